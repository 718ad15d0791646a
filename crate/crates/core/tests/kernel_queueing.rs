mod common;

use ecomsim::kernel::{Calendar, FifoResource, SimTime};
use proptest::prelude::*;

#[test]
fn md1_thousand_job_runs_average_to_formula() {
    // λ = 25/s, 20 ms deterministic service: W = λE[S²]/(2(1-ρ)) = 0.010 s.
    // A single 1000-job run is too noisy for 5%, so 400 independent runs
    // are averaged.
    let (lambda, s) = (25.0, 0.020);
    let oracle = common::pk_wait(lambda, s, s * s);
    assert!((oracle - 0.010).abs() < 1e-15);
    let runs = 400;
    let mean: f64 = (0..runs)
        .map(|seed| common::single_queue(lambda, 1000, seed, |_| s).0)
        .sum::<f64>()
        / runs as f64;
    assert!((mean - oracle).abs() / oracle < 0.05, "{mean} vs {oracle}");
}

#[test]
fn mm1_wait_matches_formula() {
    // exponential service: E[S²] = 2 E[S]²
    let (lambda, es) = (40.0, 0.015);
    let (w, _, _) =
        common::single_queue(lambda, 1_000_000, 5, |r| r.sample_exponential(es).unwrap());
    let oracle = common::pk_wait(lambda, es, 2.0 * es * es);
    assert!((w - oracle).abs() / oracle < 0.05, "{w} vs {oracle}");
}

#[derive(Clone, Copy, Debug)]
enum Ev {
    Arrive(usize),
    Done,
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Completion order equals enqueue order; arrivals = completions +
    /// in-system at every instant; busy time never exceeds elapsed time.
    #[test]
    fn fifo_conservation(
        gaps in prop::collection::vec(0.0f64..0.05, 1..200),
        services in prop::collection::vec(0.001f64..0.05, 200),
    ) {
        let mut cal: Calendar<Ev> = Calendar::new();
        let mut r: FifoResource<usize> = FifoResource::new("S");
        let mut t = 0.0;
        for (i, g) in gaps.iter().enumerate() {
            t += g;
            cal.schedule(SimTime::from_secs(t), Ev::Arrive(i)).unwrap();
        }
        let mut order = Vec::new();
        let mut last = 0.0;
        while let Some(ev) = cal.next_event(SimTime::from_secs(1e9)) {
            let now = cal.now();
            prop_assert!(now.secs() >= last);
            last = now.secs();
            match ev.action {
                Ev::Arrive(i) => {
                    if let Some(at) = r.enqueue(now, i, services[i]).unwrap() {
                        cal.schedule(at, Ev::Done).unwrap();
                    }
                }
                Ev::Done => {
                    let c = r.complete(now).unwrap();
                    order.push(c.job);
                    if let Some(at) = c.next_completion {
                        cal.schedule(at, Ev::Done).unwrap();
                    }
                }
            }
            let st = r.stats();
            prop_assert_eq!(st.arrivals, st.completions + r.in_system() as u64);
        }
        prop_assert_eq!(order, (0..gaps.len()).collect::<Vec<_>>());
        r.close(SimTime::from_secs(last));
        prop_assert!(r.stats().busy_time <= last + 1e-9);
        let total: f64 = services[..gaps.len()].iter().sum();
        prop_assert!((r.stats().busy_time - total).abs() < 1e-9);
    }

    /// Equal timestamps dispatch in creation order, whatever the insertion pattern.
    #[test]
    fn ties_follow_sequence(times in prop::collection::vec(0u8..5, 1..100)) {
        let mut cal: Calendar<usize> = Calendar::new();
        for (i, t) in times.iter().enumerate() {
            cal.schedule(SimTime::from_secs(f64::from(*t)), i).unwrap();
        }
        let mut seen: Vec<(u8, usize)> = Vec::new();
        while let Some(ev) = cal.next_event(SimTime::from_secs(10.0)) {
            seen.push((times[ev.action], ev.action));
        }
        let mut sorted = seen.clone();
        sorted.sort();
        prop_assert_eq!(seen, sorted);
    }
}
