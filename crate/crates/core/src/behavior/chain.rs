//! Absorbing Markov chain view of a session.
//!
//! The cart matters to the empty-cart policy, so the chain runs over
//! `(state, cart non-empty)` pairs. Expected visits solve `v = e + vQ` over
//! the transient pairs, i.e. the entry row of the fundamental matrix
//! `(I - Q)^-1`.

use std::collections::{BTreeMap, VecDeque};

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::{BehaviorError, ClassBehavior, StateKind};
use crate::workload::ScenarioMix;

#[derive(Debug, Clone, Serialize)]
pub struct ExpectedVisits {
    pub class_name: String,
    /// Expected visits per state and session. For absorbing states this is
    /// the probability of ending there.
    pub visits: Vec<f64>,
    pub purchase_probability: f64,
    /// Probability of leaving without paying while holding items.
    pub abandon_with_items: f64,
    /// Probability of leaving without paying with an empty cart.
    pub abandon_empty: f64,
}

impl ExpectedVisits {
    pub fn think_time(&self, b: &ClassBehavior) -> f64 {
        self.visits.iter().zip(&b.think).map(|(v, t)| v * t).sum()
    }

    pub fn requests(&self, b: &ClassBehavior) -> Vec<f64> {
        let mut out = vec![0.0; b.request_types.len()];
        for (s, r) in b.request.iter().enumerate() {
            if let Some(r) = r {
                out[*r] += self.visits[s];
            }
        }
        out
    }

    pub fn items(&self, b: &ClassBehavior) -> f64 {
        b.states
            .iter()
            .zip(&self.visits)
            .filter(|(s, _)| s.adds_item)
            .map(|(_, v)| v)
            .sum()
    }
}

pub fn expected_visits(b: &ClassBehavior) -> Result<ExpectedVisits, BehaviorError> {
    let n_states = b.state_count();
    let transient: Vec<usize> = (0..n_states)
        .filter(|&s| !b.states[s].is_absorbing())
        .collect();
    let mut slot = vec![usize::MAX; n_states];
    for (i, &s) in transient.iter().enumerate() {
        slot[s] = i;
    }
    let node = |s: usize, h: usize| 2 * slot[s] + h;
    let n = 2 * transient.len();

    let mut q = DMatrix::<f64>::zeros(n, n);
    // absorption[node] = (absorbing state, cart non-empty, probability)
    let mut absorption: Vec<Vec<(usize, usize, f64)>> = vec![Vec::new(); n];
    for &s in &transient {
        for h in 0..2 {
            let from = node(s, h);
            for &(t, p) in b.transitions(s, h == 1) {
                if p <= 0.0 {
                    continue;
                }
                let h2 = h.max(usize::from(b.states[t].adds_item));
                if b.states[t].is_absorbing() {
                    absorption[from].push((t, h2, p));
                } else {
                    q[(from, node(t, h2))] += p;
                }
            }
        }
    }

    let start = node(b.entry, 0);
    check_absorbing(b, &q, &absorption, start, &transient)?;

    // (I - Q)^T x = e_start
    let mut a = DMatrix::<f64>::identity(n, n) - &q;
    a.transpose_mut();
    let mut e = DVector::<f64>::zeros(n);
    e[start] = 1.0;
    let x = a.lu().solve(&e).ok_or_else(|| BehaviorError::Singular {
        class: b.class_name.clone(),
    })?;

    let mut visits = vec![0.0; n_states];
    for &s in &transient {
        visits[s] = x[node(s, 0)] + x[node(s, 1)];
    }
    let mut purchase = 0.0;
    let mut with_items = 0.0;
    let mut empty = 0.0;
    for (from, outs) in absorption.iter().enumerate() {
        for &(t, h, p) in outs {
            let mass = x[from] * p;
            visits[t] += mass;
            if b.states[t].purchase {
                purchase += mass;
            } else if h == 1 {
                with_items += mass;
            } else {
                empty += mass;
            }
        }
    }
    Ok(ExpectedVisits {
        class_name: b.class_name.clone(),
        visits,
        purchase_probability: purchase,
        abandon_with_items: with_items,
        abandon_empty: empty,
    })
}

// Every pair reachable from the start must be able to reach absorption,
// otherwise (I - Q) is singular.
fn check_absorbing(
    b: &ClassBehavior,
    q: &DMatrix<f64>,
    absorption: &[Vec<(usize, usize, f64)>],
    start: usize,
    transient: &[usize],
) -> Result<(), BehaviorError> {
    let n = q.nrows();
    let mut seen = vec![false; n];
    seen[start] = true;
    let mut queue = VecDeque::from([start]);
    while let Some(i) = queue.pop_front() {
        for j in 0..n {
            if q[(i, j)] > 0.0 && !seen[j] {
                seen[j] = true;
                queue.push_back(j);
            }
        }
    }
    let mut ok: Vec<bool> = absorption.iter().map(|a| !a.is_empty()).collect();
    let mut changed = true;
    while changed {
        changed = false;
        for i in 0..n {
            if !ok[i] && (0..n).any(|j| q[(i, j)] > 0.0 && ok[j]) {
                ok[i] = true;
                changed = true;
            }
        }
    }
    match (0..n).find(|&i| seen[i] && !ok[i]) {
        Some(i) => Err(BehaviorError::NotAbsorbing {
            class: b.class_name.clone(),
            state: b.states[transient[i / 2]].name.clone(),
        }),
        None => Ok(()),
    }
}

/// Session metrics that follow from the chain alone, weighted by the mix.
#[derive(Debug, Clone, Default, Serialize)]
pub struct AnalyticMetrics {
    /// Mean visits per session, by report label (transient states).
    pub pm1: BTreeMap<String, f64>,
    /// Fraction of think time spent in each thinking state.
    pub pm2: BTreeMap<String, f64>,
    /// Fraction of sessions leaving with items but no purchase.
    pub pm3: f64,
    /// Mean session length in seconds of think time.
    pub pm4: f64,
    /// Buy-to-visit ratio.
    pub pm5: f64,
    /// Fraction of sessions leaving with an empty cart and no purchase.
    pub pm7: f64,
    /// Mean requests per session.
    pub pm8: f64,
    pub items_per_session: f64,
    /// Mean requests per session by request type.
    pub requests_by_type: BTreeMap<String, f64>,
}

pub fn analytic_session_metrics(
    behaviors: &[ClassBehavior],
    mix: &ScenarioMix,
) -> Result<AnalyticMetrics, BehaviorError> {
    let mut m = AnalyticMetrics::default();
    let mut think_by_label: BTreeMap<String, f64> = BTreeMap::new();
    for (class, &weight) in mix.classes.iter().zip(&mix.pmf) {
        let b = behaviors
            .iter()
            .find(|b| &b.class_name == class)
            .ok_or_else(|| BehaviorError::UnknownClass(class.clone()))?;
        let ev = expected_visits(b)?;
        for (s, state) in b.states.iter().enumerate() {
            if state.is_absorbing() {
                continue;
            }
            *m.pm1.entry(state.label().to_string()).or_default() += weight * ev.visits[s];
            if state.kind == StateKind::Thinking {
                *think_by_label.entry(state.label().to_string()).or_default() +=
                    weight * ev.visits[s] * b.think[s];
            }
        }
        for (r, v) in b.request_types.iter().zip(ev.requests(b)) {
            *m.requests_by_type.entry(r.clone()).or_default() += weight * v;
        }
        m.pm3 += weight * ev.abandon_with_items;
        m.pm5 += weight * ev.purchase_probability;
        m.pm7 += weight * ev.abandon_empty;
        m.items_per_session += weight * ev.items(b);
    }
    m.pm4 = think_by_label.values().sum();
    m.pm8 = m.requests_by_type.values().sum();
    if m.pm4 > 0.0 {
        m.pm2 = think_by_label
            .into_iter()
            .map(|(k, v)| (k, v / m.pm4))
            .collect();
    }
    Ok(m)
}
