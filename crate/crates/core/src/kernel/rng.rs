use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};

use super::KernelError;

/// Stochastic purpose of a stream. Each purpose gets its own ChaCha stream
/// under the same seed, so adding a server never perturbs arrival sampling.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StreamId {
    Arrivals,
    ClassDraw,
    Transitions,
    ThinkTimes,
    Wan,
    Server(u32),
    Custom(u64),
}

impl StreamId {
    pub fn as_u64(self) -> u64 {
        match self {
            StreamId::Arrivals => 0,
            StreamId::ClassDraw => 1,
            StreamId::Transitions => 2,
            StreamId::ThinkTimes => 3,
            StreamId::Wan => 4,
            StreamId::Server(i) => 1_000 + u64::from(i),
            StreamId::Custom(n) => 1 << 32 | n,
        }
    }
}

/// SplitMix64 finalizer, used to derive replication seeds from a master seed.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// A reproducible random stream identified by `(seed, stream_id)`.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream_id: StreamId,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: StreamId) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id.as_u64());
        RngStream {
            seed,
            stream_id,
            rng,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> StreamId {
        self.stream_id
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    pub fn sample_exponential(&mut self, mean: f64) -> Result<f64, KernelError> {
        if !(mean > 0.0) || !mean.is_finite() {
            return Err(KernelError::InvalidParameter(format!(
                "exponential mean must be positive, got {mean}"
            )));
        }
        let dist =
            Exp::new(1.0 / mean).map_err(|e| KernelError::InvalidParameter(e.to_string()))?;
        // Exp can return exactly 0.0 with vanishing probability; redraw.
        loop {
            let x = dist.sample(&mut self.rng);
            if x > 0.0 {
                return Ok(x);
            }
        }
    }

    /// Normal variate re-sampled until it lies strictly above `floor`.
    pub fn sample_truncated_normal(
        &mut self,
        mean: f64,
        sigma: f64,
        floor: f64,
    ) -> Result<f64, KernelError> {
        if !(floor >= 0.0) || !(mean > floor) || !(sigma > 0.0) || !mean.is_finite() {
            return Err(KernelError::InvalidParameter(format!(
                "truncated normal needs mean > floor >= 0 and sigma > 0 \
                 (mean={mean}, sigma={sigma}, floor={floor})"
            )));
        }
        let dist =
            Normal::new(mean, sigma).map_err(|e| KernelError::InvalidParameter(e.to_string()))?;
        loop {
            let x = dist.sample(&mut self.rng);
            if x > floor {
                return Ok(x);
            }
        }
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_mean_converges() {
        let mut s = RngStream::new(42, StreamId::ThinkTimes);
        let n = 1_000_000;
        let mut sum = 0.0;
        for _ in 0..n {
            let x = s.sample_exponential(60.0).unwrap();
            assert!(x > 0.0);
            sum += x;
        }
        let mean = sum / n as f64;
        assert!((59.5..=60.5).contains(&mean), "mean {mean}");
    }

    #[test]
    fn same_seed_and_stream_repeat() {
        let mut a = RngStream::new(7, StreamId::Wan);
        let mut b = RngStream::new(7, StreamId::Wan);
        for _ in 0..100 {
            assert_eq!(
                a.sample_exponential(1.0).unwrap().to_bits(),
                b.sample_exponential(1.0).unwrap().to_bits()
            );
        }
    }

    #[test]
    fn streams_are_distinct() {
        let mut a = RngStream::new(7, StreamId::Arrivals);
        let mut b = RngStream::new(7, StreamId::Server(0));
        let xs: Vec<u64> = (0..8).map(|_| a.next_u64()).collect();
        let ys: Vec<u64> = (0..8).map(|_| b.next_u64()).collect();
        assert_ne!(xs, ys);
    }

    #[test]
    fn bad_parameters_rejected() {
        let mut s = RngStream::new(1, StreamId::Custom(9));
        assert!(s.sample_exponential(0.0).is_err());
        assert!(s.sample_exponential(-3.0).is_err());
        assert!(s.sample_truncated_normal(0.01, 0.0, 0.0).is_err());
        assert!(s.sample_truncated_normal(0.01, 0.001, 0.02).is_err());
        assert!(s.sample_truncated_normal(0.01, 0.001, -1.0).is_err());
    }

    #[test]
    fn service_time_stays_within_ten_percent() {
        let mut s = RngStream::new(3, StreamId::Server(1));
        let n = 1_000_000;
        let inside = (0..n)
            .map(|_| s.sample_truncated_normal(0.010, 0.010 / 30.0, 0.0).unwrap())
            .filter(|x| (0.009..=0.011).contains(x))
            .count();
        assert!(inside as f64 / n as f64 >= 0.997, "{inside}");
    }

    #[test]
    fn wan_delay_within_three_sigma() {
        let mut s = RngStream::new(3, StreamId::Wan);
        let n = 1_000_000;
        let inside = (0..n)
            .map(|_| s.sample_truncated_normal(0.5, 0.133333, 0.0).unwrap())
            .filter(|x| (0.1..=0.9).contains(x))
            .count();
        let frac = inside as f64 / n as f64;
        assert!((frac - 0.9973).abs() < 0.0005, "{frac}");
    }

    #[test]
    fn truncated_normal_is_positive_near_floor() {
        let mut s = RngStream::new(5, StreamId::Custom(1));
        for _ in 0..100_000 {
            assert!(s.sample_truncated_normal(0.1, 0.2, 0.0).unwrap() > 0.0);
        }
    }
}
