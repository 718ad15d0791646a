//! Session arrivals: a Poisson stream at rate λ whose customers are typed by
//! a probability mass function over classes.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernel::{KernelError, RngStream};

#[derive(Debug, Error, PartialEq)]
pub enum WorkloadError {
    #[error("mix has {classes} classes but {probs} probabilities")]
    LengthMismatch { classes: usize, probs: usize },
    #[error("mix probabilities sum to {0}, expected 1")]
    NotNormalized(f64),
    #[error("mix probability for {class:?} is {p}, outside [0, 1]")]
    BadProbability { class: String, p: f64 },
    #[error("mix is empty")]
    Empty,
    #[error("arrival rate must be >= 0, got {0}")]
    NegativeRate(f64),
    #[error("arrival rate is zero; no arrivals")]
    NoArrivals,
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

/// Class mix `(t_1..t_k)` with pmf `(p_1..p_k)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioMix {
    pub classes: Vec<String>,
    pub pmf: Vec<f64>,
}

impl ScenarioMix {
    pub fn new(classes: Vec<String>, pmf: Vec<f64>) -> Result<Self, WorkloadError> {
        let mix = ScenarioMix { classes, pmf };
        mix.validate()?;
        Ok(mix)
    }

    pub fn validate(&self) -> Result<(), WorkloadError> {
        if self.classes.is_empty() {
            return Err(WorkloadError::Empty);
        }
        if self.classes.len() != self.pmf.len() {
            return Err(WorkloadError::LengthMismatch {
                classes: self.classes.len(),
                probs: self.pmf.len(),
            });
        }
        for (c, &p) in self.classes.iter().zip(&self.pmf) {
            if !(0.0..=1.0).contains(&p) {
                return Err(WorkloadError::BadProbability {
                    class: c.clone(),
                    p,
                });
            }
        }
        let sum: f64 = self.pmf.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(WorkloadError::NotNormalized(sum));
        }
        Ok(())
    }

    fn shoppers(pmf: [f64; 3]) -> Self {
        ScenarioMix {
            classes: vec!["rare".into(), "ordinary".into(), "frequent".into()],
            pmf: pmf.to_vec(),
        }
    }

    /// Built-in mixes of rare / ordinary / frequent shoppers.
    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "S1" | "s1" => Some(Self::shoppers([0.10, 0.30, 0.60])),
            "S2" | "s2" => Some(Self::shoppers([0.33, 0.34, 0.33])),
            "S3" | "s3" => Some(Self::shoppers([0.50, 0.30, 0.20])),
            _ => None,
        }
    }

    pub fn presets() -> Vec<Self> {
        ["S1", "S2", "S3"]
            .iter()
            .map(|n| Self::preset(n).expect("built in"))
            .collect()
    }

    /// Index of the drawn class.
    pub fn draw_class(&self, rng: &mut RngStream) -> usize {
        let u = rng.uniform();
        let mut acc = 0.0;
        let mut last = 0;
        for (i, &p) in self.pmf.iter().enumerate() {
            if p <= 0.0 {
                continue;
            }
            acc += p;
            last = i;
            if u < acc {
                return i;
            }
        }
        last
    }
}

/// Poisson arrival process of customers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrivalProcess {
    pub lambda: f64,
    pub mix: ScenarioMix,
}

impl ArrivalProcess {
    pub fn new(lambda: f64, mix: ScenarioMix) -> Result<Self, WorkloadError> {
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(WorkloadError::NegativeRate(lambda));
        }
        mix.validate()?;
        Ok(ArrivalProcess { lambda, mix })
    }

    /// Exponential gap with mean 1/λ.
    pub fn next_interarrival(&self, rng: &mut RngStream) -> Result<f64, WorkloadError> {
        if self.lambda <= 0.0 {
            return Err(WorkloadError::NoArrivals);
        }
        Ok(rng.sample_exponential(1.0 / self.lambda)?)
    }

    pub fn draw_class(&self, rng: &mut RngStream) -> usize {
        self.mix.draw_class(rng)
    }

    /// λ·p_i per class, in mix order.
    pub fn per_class_rates(&self) -> Vec<(String, f64)> {
        self.mix
            .classes
            .iter()
            .zip(&self.mix.pmf)
            .map(|(c, p)| (c.clone(), self.lambda * p))
            .collect()
    }
}
