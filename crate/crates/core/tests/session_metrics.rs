//! Session-level indicators against the analytic chain.

use ecomsim::behavior::{
    expected_visits, simulate_session, CbmgGraph, ClassBehavior, CustomerClass, EmptyCartPolicy,
};
use ecomsim::kernel::{RngStream, SimTime, StreamId};
use ecomsim::sim::{run_replication, RunOptions, Scenario};

fn walk(b: &ClassBehavior, n: u64, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let mut tr = RngStream::new(seed, StreamId::Transitions);
    let mut th = RngStream::new(seed, StreamId::ThinkTimes);
    let mut visits = vec![0.0; b.state_count()];
    let mut sojourn = vec![0.0; b.state_count()];
    for id in 0..n {
        let r =
            simulate_session(b, 0, id, &mut tr, &mut th, SimTime::ZERO, None, |_, _| 0).unwrap();
        for s in 0..visits.len() {
            visits[s] += f64::from(r.visits[s]);
            sojourn[s] += r.sojourn[s];
        }
    }
    (
        visits.iter().map(|v| v / n as f64).collect(),
        sojourn.iter().map(|v| v / n as f64).collect(),
    )
}

#[test]
fn branch_group_graph_matches_chain() {
    // Same check as the default graph, on the alternative topology.
    let g = CbmgGraph::branch_groups();
    for c in CustomerClass::presets() {
        let b = ClassBehavior::compile(&g, &c, EmptyCartPolicy::Abandon).unwrap();
        let ev = expected_visits(&b).unwrap();
        let (sim, _) = walk(&b, 50_000, 19);
        for (s, state) in b.states.iter().enumerate() {
            if ev.visits[s] >= 0.2 {
                let rel = (sim[s] - ev.visits[s]) / ev.visits[s];
                assert!(
                    rel.abs() < 0.03,
                    "{} {}: {} vs {}",
                    c.name,
                    state.name,
                    sim[s],
                    ev.visits[s]
                );
            }
        }
    }
}

#[test]
fn sojourn_is_visits_times_mean_draw() {
    // PM6 = PM1 × empirical mean draw, and that draw is close to the class mean.
    let g = CbmgGraph::standard();
    let c = CustomerClass::preset("frequent").unwrap();
    let b = ClassBehavior::compile(&g, &c, EmptyCartPolicy::Abandon).unwrap();
    let (visits, sojourn) = walk(&b, 60_000, 23);
    for (s, st) in b.states.iter().enumerate() {
        if b.think[s] > 0.0 && visits[s] > 0.1 {
            let per_visit = sojourn[s] / visits[s];
            assert!(
                (per_visit - b.think[s]).abs() / b.think[s] < 0.01,
                "{}: {per_visit}",
                st.name
            );
        }
    }
}

#[test]
fn simulated_pm4_tracks_analytic() {
    for name in ["S1", "S2", "S3"] {
        let sc = Scenario::preset(name).unwrap().compile().unwrap();
        let a = sc.analytic().unwrap();
        let opts = RunOptions {
            window: 14_400.0,
            ..RunOptions::default()
        };
        let r = run_replication(&sc, 8.0, 31, &opts).unwrap();
        let s = r.report.session.unwrap();
        // Sessions cut off by the window are excluded, which trims long
        // sessions slightly; 3% covers that and sampling noise.
        assert!(
            (s.pm4 - a.pm4).abs() / a.pm4 < 0.03,
            "{name} PM4 {} vs {}",
            s.pm4,
            a.pm4
        );
        assert!(
            (s.pm8 - a.pm8).abs() / a.pm8 < 0.03,
            "{name} PM8 {} vs {}",
            s.pm8,
            a.pm8
        );
        assert!(
            (s.pm5 - a.pm5).abs() < 0.01,
            "{name} PM5 {} vs {}",
            s.pm5,
            a.pm5
        );
        assert!(s.pm9 > 0.95 && s.pm9 <= 1.0);
    }
}

#[test]
fn throughput_times_service_is_utilization() {
    let sc = Scenario::preset("S2").unwrap().compile().unwrap();
    let r = run_replication(&sc, 12.0, 5, &RunOptions::default()).unwrap();
    for (srv, spec) in r.report.servers.iter().zip(&sc.scenario.farm.servers) {
        assert!(srv.utilization < 0.9);
        let predicted = srv.throughput * spec.mean;
        assert!(
            (predicted - srv.utilization).abs() / srv.utilization < 0.03,
            "{}: {predicted} vs {}",
            srv.name,
            srv.utilization
        );
    }
}

#[test]
fn redistribute_policy_keeps_carts_strict() {
    let mut s = Scenario::preset("S1").unwrap();
    s.empty_cart = EmptyCartPolicy::Redistribute;
    let sc = s.compile().unwrap();
    let r = run_replication(
        &sc,
        6.0,
        2,
        &RunOptions {
            window: 3600.0,
            ..RunOptions::default()
        },
    )
    .unwrap();
    assert!(r.report.consistency_violations().is_empty());
    let a = sc.analytic().unwrap();
    assert!((a.pm3 + a.pm5 + a.pm7 - 1.0).abs() < 1e-9);
}
