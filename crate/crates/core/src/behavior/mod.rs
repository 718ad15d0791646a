//! Customer Behavior Model Graph (CBMG): states, labelled transitions,
//! per-class probabilities and think times, and validation.
//!
//! The graph is data. Edges carry either a class probability label
//! (`"Continue1"`, `"Found"`, ...) or a fixed probability. A class
//! resolves the labels, and [`ClassBehavior`] is the compiled result used by
//! both the session walker and the analytic absorbing-chain solver.

mod chain;
mod presets;
mod session;

pub use chain::{analytic_session_metrics, expected_visits, AnalyticMetrics, ExpectedVisits};
pub use session::{simulate_session, Outcome, SessionRecord, SessionWalk, TRANSITION_CAP};

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernel::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateKind {
    Entry,
    Thinking,
    Instant,
    Absorbing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CbmgState {
    pub name: String,
    pub kind: StateKind,
    /// Default think time in seconds; a class may override it.
    #[serde(default)]
    pub think_mean: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub emits_request: Option<String>,
    /// Entering this state puts one item in the cart.
    #[serde(default, skip_serializing_if = "is_false")]
    pub adds_item: bool,
    /// Entering this state pays for the cart; subject to the empty-cart policy.
    #[serde(default, skip_serializing_if = "is_false")]
    pub checkout: bool,
    /// Absorbing state that counts as a completed purchase.
    #[serde(default, skip_serializing_if = "is_false")]
    pub purchase: bool,
    /// Name used when reporting per-state metrics; several states may share one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report_as: Option<String>,
}

fn is_false(b: &bool) -> bool {
    !*b
}

impl CbmgState {
    pub fn new(name: &str, kind: StateKind) -> Self {
        CbmgState {
            name: name.to_string(),
            kind,
            think_mean: 0.0,
            emits_request: None,
            adds_item: false,
            checkout: false,
            purchase: false,
            report_as: None,
        }
    }

    pub fn label(&self) -> &str {
        self.report_as.as_deref().unwrap_or(&self.name)
    }

    pub fn is_absorbing(&self) -> bool {
        self.kind == StateKind::Absorbing
    }
}

/// A transition. Exactly one of `label` (resolved by the class) and `p`
/// (fixed probability) must be set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CbmgEdge {
    pub from: String,
    pub to: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
}

impl CbmgEdge {
    pub fn labelled(from: &str, label: &str, to: &str) -> Self {
        CbmgEdge {
            from: from.into(),
            to: to.into(),
            label: Some(label.into()),
            p: None,
        }
    }

    pub fn fixed(from: &str, p: f64, to: &str) -> Self {
        CbmgEdge {
            from: from.into(),
            to: to.into(),
            label: None,
            p: Some(p),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CbmgGraph {
    pub entry: String,
    pub states: Vec<CbmgState>,
    pub edges: Vec<CbmgEdge>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CustomerClass {
    pub name: String,
    /// Probability per edge label.
    pub probs: BTreeMap<String, f64>,
    /// Think-time overrides in seconds, keyed by state name.
    #[serde(default)]
    pub think_means: BTreeMap<String, f64>,
}

/// What happens when a customer with an empty cart draws a checkout edge.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmptyCartPolicy {
    /// The customer leaves without paying (edge redirected to a non-purchase exit).
    #[default]
    Abandon,
    /// Checkout mass is spread proportionally over the other edges of the group.
    Redistribute,
    /// Checkout proceeds with an empty cart.
    Allow,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    DuplicateState(String),
    UnknownEntry(String),
    EntryKind(String),
    UnknownState { edge: usize, name: String },
    BadEdgeWeight { edge: usize },
    MissingLabel { state: String, label: String },
    ProbabilityOutOfRange { what: String, value: f64 },
    GroupSum { state: String, sum: f64 },
    NoOutgoing(String),
    AbsorbingHasOutgoing(String),
    ThinkTime { state: String, value: f64 },
    UnknownThinkOverride(String),
    Unreachable(String),
    NoAbsorbingState,
    CannotAbsorb(String),
    NoAbandonExit,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DuplicateState(s) => write!(f, "state {s:?} defined twice"),
            Violation::UnknownEntry(s) => write!(f, "entry state {s:?} does not exist"),
            Violation::EntryKind(s) => write!(f, "entry state {s:?} is not of kind entry"),
            Violation::UnknownState { edge, name } => {
                write!(f, "edge #{edge} references unknown state {name:?}")
            }
            Violation::BadEdgeWeight { edge } => {
                write!(f, "edge #{edge} must set exactly one of label or p")
            }
            Violation::MissingLabel { state, label } => {
                write!(
                    f,
                    "class has no probability for label {label:?} (state {state:?})"
                )
            }
            Violation::ProbabilityOutOfRange { what, value } => {
                write!(f, "probability {what} = {value} is outside [0, 1]")
            }
            Violation::GroupSum { state, sum } => {
                write!(f, "group sums to {sum} at state {state:?}")
            }
            Violation::NoOutgoing(s) => {
                write!(f, "non-absorbing state {s:?} has no outgoing edges")
            }
            Violation::AbsorbingHasOutgoing(s) => {
                write!(f, "absorbing state {s:?} has outgoing edges")
            }
            Violation::ThinkTime { state, value } => {
                write!(
                    f,
                    "thinking state {state:?} needs think_mean > 0, got {value}"
                )
            }
            Violation::UnknownThinkOverride(s) => {
                write!(f, "think-time override for unknown state {s:?}")
            }
            Violation::Unreachable(s) => write!(f, "state {s:?} is unreachable from entry"),
            Violation::NoAbsorbingState => write!(f, "graph has no absorbing state"),
            Violation::CannotAbsorb(s) => {
                write!(f, "state {s:?} cannot reach an absorbing state")
            }
            Violation::NoAbandonExit => {
                write!(
                    f,
                    "empty-cart abandon policy needs a non-purchase absorbing state"
                )
            }
        }
    }
}

#[derive(Debug, Error)]
pub enum BehaviorError {
    #[error("class {class:?} fails validation: {}", join(.violations))]
    Invalid {
        class: String,
        violations: Vec<Violation>,
    },
    #[error("transition requested from absorbing state {0:?}")]
    AbsorbingState(String),
    #[error("class {class:?}: absorption probability < 1 from state {state:?}")]
    NotAbsorbing { class: String, state: String },
    #[error("class {class:?}: linear system for expected visits is singular")]
    Singular { class: String },
    #[error("scenario mix names unknown class {0:?}")]
    UnknownClass(String),
    #[error("session exceeded {0} transitions")]
    TransitionCap(u32),
    #[error(transparent)]
    Kernel(#[from] crate::kernel::KernelError),
}

fn join(v: &[Violation]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

const PROB_TOL: f64 = 1e-9;

impl CbmgGraph {
    pub fn state_index(&self, name: &str) -> Option<usize> {
        self.states.iter().position(|s| s.name == name)
    }

    /// Distinct request types emitted by the graph, in first-seen order.
    pub fn request_types(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for s in &self.states {
            if let Some(r) = &s.emits_request {
                if !out.contains(r) {
                    out.push(r.clone());
                }
            }
        }
        out
    }

    /// Report labels in state order, without duplicates.
    pub fn labels(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for s in &self.states {
            if !out.iter().any(|l| l == s.label()) {
                out.push(s.label().to_string());
            }
        }
        out
    }
}

/// Checks every structural and probabilistic invariant of `(graph, class)`.
/// An empty list means the pair is usable.
pub fn validate_graph(g: &CbmgGraph, c: &CustomerClass) -> Vec<Violation> {
    let mut v = Vec::new();
    let mut index: HashMap<&str, usize> = HashMap::new();
    for (i, s) in g.states.iter().enumerate() {
        if index.insert(s.name.as_str(), i).is_some() {
            v.push(Violation::DuplicateState(s.name.clone()));
        }
    }
    let entry = match index.get(g.entry.as_str()) {
        Some(&e) => {
            if g.states[e].kind != StateKind::Entry {
                v.push(Violation::EntryKind(g.entry.clone()));
            }
            Some(e)
        }
        None => {
            v.push(Violation::UnknownEntry(g.entry.clone()));
            None
        }
    };

    for (label, &p) in &c.probs {
        if !(0.0..=1.0).contains(&p) {
            v.push(Violation::ProbabilityOutOfRange {
                what: label.clone(),
                value: p,
            });
        }
    }

    let n = g.states.len();
    let mut out: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (ei, e) in g.edges.iter().enumerate() {
        let from = index.get(e.from.as_str()).copied();
        let to = index.get(e.to.as_str()).copied();
        for (name, idx) in [(&e.from, from), (&e.to, to)] {
            if idx.is_none() {
                v.push(Violation::UnknownState {
                    edge: ei,
                    name: name.clone(),
                });
            }
        }
        let p = match (&e.label, e.p) {
            (Some(label), None) => match c.probs.get(label) {
                Some(&p) => Some(p),
                None => {
                    v.push(Violation::MissingLabel {
                        state: e.from.clone(),
                        label: label.clone(),
                    });
                    None
                }
            },
            (None, Some(p)) => {
                if !(0.0..=1.0).contains(&p) {
                    v.push(Violation::ProbabilityOutOfRange {
                        what: format!("edge #{ei}"),
                        value: p,
                    });
                }
                Some(p)
            }
            _ => {
                v.push(Violation::BadEdgeWeight { edge: ei });
                None
            }
        };
        if let (Some(f), Some(t), Some(p)) = (from, to, p) {
            out[f].push((t, p));
        }
    }

    for (i, s) in g.states.iter().enumerate() {
        let edges_from = g.edges.iter().filter(|e| e.from == s.name).count();
        if s.is_absorbing() {
            if edges_from > 0 {
                v.push(Violation::AbsorbingHasOutgoing(s.name.clone()));
            }
            continue;
        }
        if edges_from == 0 {
            v.push(Violation::NoOutgoing(s.name.clone()));
        } else if out[i].len() == edges_from {
            let sum: f64 = out[i].iter().map(|&(_, p)| p).sum();
            if (sum - 1.0).abs() > PROB_TOL {
                v.push(Violation::GroupSum {
                    state: s.name.clone(),
                    sum,
                });
            }
        }
        if s.kind == StateKind::Thinking {
            let think = c.think_means.get(&s.name).copied().unwrap_or(s.think_mean);
            if !(think > 0.0) || !think.is_finite() {
                v.push(Violation::ThinkTime {
                    state: s.name.clone(),
                    value: think,
                });
            }
        }
    }
    for name in c.think_means.keys() {
        if !index.contains_key(name.as_str()) {
            v.push(Violation::UnknownThinkOverride(name.clone()));
        }
    }

    if !g.states.iter().any(CbmgState::is_absorbing) {
        v.push(Violation::NoAbsorbingState);
    }

    if let Some(entry) = entry {
        // connectivity is structural; absorption only follows positive edges
        let reach = reachable(&out, entry, false);
        for (i, s) in g.states.iter().enumerate() {
            if !reach[i] {
                v.push(Violation::Unreachable(s.name.clone()));
            }
        }
        let live = reachable(&out, entry, true);
        let absorbs = can_absorb(g, &out);
        for (i, s) in g.states.iter().enumerate() {
            if live[i] && !absorbs[i] {
                v.push(Violation::CannotAbsorb(s.name.clone()));
            }
        }
    }
    v
}

fn reachable(out: &[Vec<(usize, f64)>], from: usize, positive_only: bool) -> Vec<bool> {
    let mut seen = vec![false; out.len()];
    let mut queue = VecDeque::from([from]);
    seen[from] = true;
    while let Some(s) = queue.pop_front() {
        for &(t, p) in &out[s] {
            if (p > 0.0 || !positive_only) && !seen[t] {
                seen[t] = true;
                queue.push_back(t);
            }
        }
    }
    seen
}

fn can_absorb(g: &CbmgGraph, out: &[Vec<(usize, f64)>]) -> Vec<bool> {
    let n = out.len();
    let mut ok: Vec<bool> = g.states.iter().map(CbmgState::is_absorbing).collect();
    let mut changed = true;
    while changed {
        changed = false;
        for i in 0..n {
            if !ok[i] && out[i].iter().any(|&(t, p)| p > 0.0 && ok[t]) {
                ok[i] = true;
                changed = true;
            }
        }
    }
    ok
}

/// A validated `(graph, class)` pair compiled to index form.
///
/// Transition tables are kept twice: one for a customer holding items and
/// one for an empty cart, where the empty-cart policy has been applied.
#[derive(Debug, Clone)]
pub struct ClassBehavior {
    pub class_name: String,
    pub states: Vec<CbmgState>,
    pub entry: usize,
    pub think: Vec<f64>,
    /// Index into `request_types` per state.
    pub request: Vec<Option<usize>>,
    pub request_types: Vec<String>,
    with_items: Vec<Vec<(usize, f64)>>,
    empty_cart: Vec<Vec<(usize, f64)>>,
}

impl ClassBehavior {
    pub fn compile(
        g: &CbmgGraph,
        c: &CustomerClass,
        policy: EmptyCartPolicy,
    ) -> Result<Self, BehaviorError> {
        let mut violations = validate_graph(g, c);
        let abandon_exit = g
            .states
            .iter()
            .position(|s| s.is_absorbing() && !s.purchase);
        let uses_checkout = g.states.iter().any(|s| s.checkout);
        if policy == EmptyCartPolicy::Abandon && uses_checkout && abandon_exit.is_none() {
            violations.push(Violation::NoAbandonExit);
        }
        if !violations.is_empty() {
            return Err(BehaviorError::Invalid {
                class: c.name.clone(),
                violations,
            });
        }
        let n = g.states.len();
        let index = |name: &str| g.state_index(name).expect("validated");
        let mut with_items: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for e in &g.edges {
            let p = match (&e.label, e.p) {
                (Some(l), _) => c.probs[l],
                (None, Some(p)) => p,
                (None, None) => unreachable!("validated"),
            };
            with_items[index(&e.from)].push((index(&e.to), p));
        }
        let empty_cart = with_items
            .iter()
            .map(|row| apply_empty_cart(row, &g.states, policy, abandon_exit))
            .collect();
        let request_types = g.request_types();
        let request = g
            .states
            .iter()
            .map(|s| {
                s.emits_request
                    .as_ref()
                    .map(|r| request_types.iter().position(|t| t == r).expect("listed"))
            })
            .collect();
        let think = g
            .states
            .iter()
            .map(|s| match s.kind {
                StateKind::Thinking => c.think_means.get(&s.name).copied().unwrap_or(s.think_mean),
                _ => 0.0,
            })
            .collect();
        Ok(ClassBehavior {
            class_name: c.name.clone(),
            states: g.states.clone(),
            entry: index(&g.entry),
            think,
            request,
            request_types,
            with_items,
            empty_cart,
        })
    }

    pub fn state_count(&self) -> usize {
        self.states.len()
    }

    pub fn transitions(&self, at: usize, has_items: bool) -> &[(usize, f64)] {
        if has_items {
            &self.with_items[at]
        } else {
            &self.empty_cart[at]
        }
    }

    /// Draws the successor of `at` according to the class probabilities.
    pub fn sample_transition(
        &self,
        at: usize,
        has_items: bool,
        rng: &mut RngStream,
    ) -> Result<usize, BehaviorError> {
        if self.states[at].is_absorbing() {
            return Err(BehaviorError::AbsorbingState(self.states[at].name.clone()));
        }
        let row = self.transitions(at, has_items);
        let u = rng.uniform();
        let mut acc = 0.0;
        let mut last = row[0].0;
        for &(t, p) in row {
            if p <= 0.0 {
                continue;
            }
            acc += p;
            last = t;
            if u < acc {
                return Ok(t);
            }
        }
        // rounding left u above the accumulated mass
        Ok(last)
    }
}

fn apply_empty_cart(
    row: &[(usize, f64)],
    states: &[CbmgState],
    policy: EmptyCartPolicy,
    abandon_exit: Option<usize>,
) -> Vec<(usize, f64)> {
    let is_checkout = |t: usize| states[t].checkout;
    if policy == EmptyCartPolicy::Allow || !row.iter().any(|&(t, _)| is_checkout(t)) {
        return row.to_vec();
    }
    match policy {
        EmptyCartPolicy::Abandon => {
            let exit = abandon_exit.expect("validated");
            row.iter()
                .map(|&(t, p)| if is_checkout(t) { (exit, p) } else { (t, p) })
                .collect()
        }
        EmptyCartPolicy::Redistribute => {
            let rest: f64 = row
                .iter()
                .filter(|&&(t, _)| !is_checkout(t))
                .map(|&(_, p)| p)
                .sum();
            if rest <= 0.0 {
                // nothing to redistribute onto; leave the row unchanged
                return row.to_vec();
            }
            row.iter()
                .filter(|&&(t, _)| !is_checkout(t))
                .map(|&(t, p)| (t, p / rest))
                .collect()
        }
        EmptyCartPolicy::Allow => unreachable!(),
    }
}
