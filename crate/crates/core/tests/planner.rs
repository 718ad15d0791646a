use ecomsim::farm::FarmSpec;
use ecomsim::planner::{critical_lambda, run_point, run_sweep, Critical, SweepSpec};
use ecomsim::sim::{RunOptions, Scenario};
use proptest::prelude::*;

fn opts(window: f64) -> RunOptions {
    RunOptions {
        window,
        ..RunOptions::default()
    }
}

fn spec(from: f64, to: f64, step: f64, reps: u32) -> SweepSpec {
    SweepSpec {
        lambda_from: from,
        lambda_to: to,
        lambda_step: step,
        replications: reps,
        seed: 77,
        threshold: 4.0,
    }
}

#[test]
fn heavier_mix_responds_slower() {
    let s1 = Scenario::preset("S1").unwrap().compile().unwrap();
    let s3 = Scenario::preset("S3").unwrap().compile().unwrap();
    let grid = spec(2.0, 12.5, 3.5, 3);
    let a = run_sweep(&s1, &grid, &opts(3600.0)).unwrap();
    let b = run_sweep(&s3, &grid, &opts(3600.0)).unwrap();
    for (p, q) in a.points.iter().zip(&b.points) {
        let noise = p.ci.unwrap() + q.ci.unwrap();
        assert!(
            p.mean_rt.unwrap() + noise >= q.mean_rt.unwrap(),
            "λ={}: {:?} vs {:?}",
            p.lambda,
            p.mean_rt,
            q.mean_rt
        );
    }
    // clearly separated once the web server is busy
    let last = a.points.len() - 1;
    assert!(a.points[last].mean_rt > b.points[last].mean_rt);
}

#[test]
fn response_time_grows_with_load() {
    let sc = Scenario::preset("S1").unwrap().compile().unwrap();
    let c = run_sweep(&sc, &spec(10.0, 16.0, 1.0, 3), &opts(3600.0)).unwrap();
    for w in c.points.windows(2) {
        let noise = w[0].ci.unwrap() + w[1].ci.unwrap();
        assert!(
            w[1].mean_rt.unwrap() + noise >= w[0].mean_rt.unwrap(),
            "{} -> {}",
            w[0].lambda,
            w[1].lambda
        );
    }
}

#[test]
fn slower_web_server_lowers_critical_rate() {
    let base = Scenario::preset("S1").unwrap();
    let mut slow = base.clone();
    let ws = slow
        .farm
        .servers
        .iter_mut()
        .find(|s| s.name == "WS")
        .unwrap();
    ws.mean = 0.011;
    ws.sigma = None;
    let grid = spec(11.0, 16.0, 0.5, 2);
    let crit = |s: &Scenario| {
        run_sweep(&s.compile().unwrap(), &grid, &opts(3600.0))
            .unwrap()
            .critical()
            .lambda()
            .unwrap()
    };
    let (a, b) = (crit(&base), crit(&slow));
    assert!(b < a, "{b} !< {a}");
    // saturation moves by the demand ratio
    let d = |s: &Scenario| s.compile().unwrap().service_demand().unwrap().lambda_sat;
    assert!((d(&slow) / d(&base) - 10.0 / 11.0).abs() < 1e-9);
}

#[test]
fn confidence_interval_narrows_with_replications() {
    let sc = Scenario::preset("S2").unwrap().compile().unwrap();
    let small = run_point(&sc, 10.0, 4, 3, &opts(900.0)).unwrap();
    let large = run_point(&sc, 10.0, 16, 3, &opts(900.0)).unwrap();
    // compare standard errors (half-width / t quantile); expected ratio 2
    let se_small = small.ci.unwrap() / 3.182446;
    let se_large = large.ci.unwrap() / 2.131450;
    let ratio = se_small / se_large;
    assert!((1.2..3.5).contains(&ratio), "{ratio}");
}

#[test]
fn added_grid_points_do_not_move_other_points() {
    let sc = Scenario::preset("S3").unwrap().compile().unwrap();
    let coarse = run_sweep(&sc, &spec(22.0, 26.0, 2.0, 2), &opts(1800.0)).unwrap();
    let fine = run_sweep(&sc, &spec(22.0, 26.0, 1.0, 2), &opts(1800.0)).unwrap();
    for p in &coarse.points {
        let q = fine.points.iter().find(|q| q.lambda == p.lambda).unwrap();
        assert_eq!(p, q);
    }
}

proptest! {
    /// λ_crit depends only on the bracketing pair of a monotone curve.
    #[test]
    fn critical_rate_ignores_points_outside_bracket(
        slope in 0.05f64..2.0,
        offset in 0.5f64..3.9,
        extra_below in prop::collection::vec(0.0f64..1.0, 0..5),
        extra_above in prop::collection::vec(0.0f64..1.0, 0..5),
    ) {
        let f = |l: f64| offset + slope * l * l;
        let crossing = ((4.0 - offset) / slope).sqrt();
        let a = (crossing * 2.0).floor() / 2.0;
        let b = a + 0.5;
        let base = vec![(a, f(a)), (b, f(b))];
        let mut wide = base.clone();
        for x in &extra_below {
            let l = a * x;
            wide.push((l, f(l)));
        }
        for x in &extra_above {
            let l = b + 10.0 * x + 1e-3;
            wide.push((l, f(l)));
        }
        wide.sort_by(|p, q| p.0.total_cmp(&q.0));
        wide.dedup_by(|p, q| p.0 == q.0);
        let want = critical_lambda(&base, 4.0);
        prop_assert_eq!(critical_lambda(&wide, 4.0), want);
        if let Critical::Crossed { lambda, multiple } = want {
            prop_assert!(a <= lambda && lambda <= b);
            prop_assert!(!multiple);
        }
    }

    /// Slower servers never raise the saturation rate.
    #[test]
    fn saturation_falls_as_any_server_slows(idx in 0usize..5, factor in 1.0f64..3.0, scenario in 0usize..3) {
        let name = ["S1", "S2", "S3"][scenario];
        let base = Scenario::preset(name).unwrap();
        let mut slow = base.clone();
        slow.farm.servers[idx].mean *= factor;
        slow.farm.servers[idx].sigma = None;
        let sat = |s: &Scenario| s.compile().unwrap().service_demand().unwrap().lambda_sat;
        prop_assert!(sat(&slow) <= sat(&base) + 1e-12);
    }

    #[test]
    fn farm_defaults_validate(drop_fes in any::<bool>()) {
        let f = FarmSpec { fes_enabled: !drop_fes, ..FarmSpec::standard() };
        prop_assert!(f.validate().is_empty());
    }
}
