//! Observers and report builder.
//!
//! Request level: response-time statistics and happiness buckets. Server
//! level: throughput, utilization and queue length. Session level: the
//! PM1..PM11 indicators and the revenue metrics derived from them.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::behavior::{CbmgState, Outcome, SessionRecord, StateKind};
use crate::farm::Request;
use crate::kernel::FifoResource;

/// How a customer's experienced response time is summarized before bucketing.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HappinessRule {
    #[default]
    Mean,
    Max,
}

pub const HAPPY_BELOW: f64 = 2.0;
pub const UNHAPPY_ABOVE: f64 = 4.0;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RtStats {
    pub count: u64,
    pub mean: Option<f64>,
    pub p50: Option<f64>,
    pub p95: Option<f64>,
    pub p99: Option<f64>,
    pub max: Option<f64>,
}

/// Nearest-rank percentile of a sorted sample.
pub fn percentile(sorted: &[f64], q: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let rank = (q * sorted.len() as f64).ceil() as usize;
    Some(sorted[rank.clamp(1, sorted.len()) - 1])
}

impl RtStats {
    pub fn from_samples(samples: &mut [f64]) -> Self {
        samples.sort_by(f64::total_cmp);
        let count = samples.len() as u64;
        let mean = (count > 0).then(|| samples.iter().sum::<f64>() / count as f64);
        RtStats {
            count,
            mean,
            p50: percentile(samples, 0.50),
            p95: percentile(samples, 0.95),
            p99: percentile(samples, 0.99),
            max: samples.last().copied(),
        }
    }
}

/// Share of customers per experienced response-time band.
#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
pub struct Buckets {
    pub customers: u64,
    pub lt2: f64,
    pub between2and4: f64,
    pub gt4: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ServerReport {
    pub name: String,
    pub completions: u64,
    pub throughput: f64,
    pub utilization: f64,
    pub mean_queue: f64,
    pub max_queue: usize,
}

impl ServerReport {
    pub fn from_resource<J>(r: &FifoResource<J>) -> Self {
        let s = r.stats();
        ServerReport {
            name: r.name().to_string(),
            completions: s.window_completions,
            throughput: s.throughput(),
            utilization: s.utilization(),
            mean_queue: s.mean_queue_len(),
            max_queue: s.max_queue,
        }
    }
}

/// Session indicators over sessions that completed inside the window.
#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
pub struct SessionMetrics {
    /// Mean visits per state and session.
    pub pm1: BTreeMap<String, f64>,
    /// Share of think time per thinking state.
    pub pm2: BTreeMap<String, f64>,
    /// Left with items in the cart and no purchase.
    pub pm3: f64,
    /// Mean session length, seconds.
    pub pm4: f64,
    /// Buy-to-visit ratio.
    pub pm5: f64,
    /// Mean sojourn seconds per thinking state and session.
    pub pm6: BTreeMap<String, f64>,
    /// Left with an empty cart and no purchase.
    pub pm7: f64,
    /// Mean requests per session.
    pub pm8: f64,
    /// Share of started sessions that completed inside the window.
    pub pm9: f64,
    /// Mean items paid per session.
    pub pm10: f64,
    /// Mean items abandoned in the cart per session.
    pub pm11: f64,
    pub items_added: f64,
    /// Σ PM1 over request-emitting states.
    pub emitting_visits: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MetricsReport {
    pub window: f64,
    pub response_time: RtStats,
    pub by_type: BTreeMap<String, RtStats>,
    pub buckets: Buckets,
    pub servers: Vec<ServerReport>,
    pub sessions_started: u64,
    pub sessions_completed: u64,
    pub sessions_cut_off: u64,
    pub session: Option<SessionMetrics>,
    pub revenue_throughput: f64,
    pub potential_loss_throughput: f64,
    /// No session completed, so session indicators are undefined.
    pub degenerate: bool,
}

/// Everything a single run reports; reproducible from (config, seed).
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RunSummary {
    pub scenario: String,
    pub fingerprint: String,
    pub seed: u64,
    pub lambda: f64,
    pub window: f64,
    pub sessions_started: u64,
    pub sessions_completed: u64,
    pub degenerate: bool,
    pub consistency: Vec<String>,
    pub report: MetricsReport,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MetricsConfig {
    pub warmup: f64,
    pub unit_value: f64,
    pub happiness: HappinessRule,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        MetricsConfig {
            warmup: 0.0,
            unit_value: 1.0,
            happiness: HappinessRule::Mean,
        }
    }
}

/// Accumulates observations for one replication.
#[derive(Debug)]
pub struct MetricsCollector {
    cfg: MetricsConfig,
    labels: Vec<String>,
    state_label: Vec<usize>,
    state_thinking: Vec<bool>,
    state_emits: Vec<bool>,
    request_types: Vec<String>,
    rts: Vec<f64>,
    rts_by_type: Vec<Vec<f64>>,
    started: u64,
    completed: u64,
    cut_off: u64,
    visits: Vec<f64>,
    sojourn: Vec<f64>,
    emitting_visits: f64,
    requests: f64,
    items_added: f64,
    items_paid: f64,
    paid: u64,
    with_items: u64,
    empty: u64,
    bucket_counts: [u64; 3],
}

impl MetricsCollector {
    pub fn new(states: &[CbmgState], request_types: &[String], cfg: MetricsConfig) -> Self {
        let mut labels: Vec<String> = Vec::new();
        let mut state_label = Vec::with_capacity(states.len());
        for s in states {
            let idx = match labels.iter().position(|l| l == s.label()) {
                Some(i) => i,
                None => {
                    labels.push(s.label().to_string());
                    labels.len() - 1
                }
            };
            state_label.push(idx);
        }
        let n = labels.len();
        MetricsCollector {
            cfg,
            state_thinking: states
                .iter()
                .map(|s| s.kind == StateKind::Thinking)
                .collect(),
            state_emits: states.iter().map(|s| s.emits_request.is_some()).collect(),
            labels,
            state_label,
            request_types: request_types.to_vec(),
            rts: Vec::new(),
            rts_by_type: vec![Vec::new(); request_types.len()],
            started: 0,
            completed: 0,
            cut_off: 0,
            visits: vec![0.0; n],
            sojourn: vec![0.0; n],
            emitting_visits: 0.0,
            requests: 0.0,
            items_added: 0.0,
            items_paid: 0.0,
            paid: 0,
            with_items: 0,
            empty: 0,
            bucket_counts: [0; 3],
        }
    }

    pub fn warmup(&self) -> f64 {
        self.cfg.warmup
    }

    pub fn session_started(&mut self, at: f64) {
        if at >= self.cfg.warmup {
            self.started += 1;
        }
    }

    pub fn observe_request(&mut self, req: &Request) {
        if req.issued_at.secs() < self.cfg.warmup {
            return;
        }
        if let Some(rt) = req.response_time {
            self.rts.push(rt);
            self.rts_by_type[req.request_type].push(rt);
        }
    }

    pub fn observe_session(&mut self, rec: &SessionRecord) {
        if rec.start.secs() < self.cfg.warmup {
            return;
        }
        let experienced = match self.cfg.happiness {
            HappinessRule::Mean => rec.mean_response(),
            HappinessRule::Max => (rec.responses > 0).then_some(rec.response_max),
        };
        if let Some(rt) = experienced {
            let b = if rt < HAPPY_BELOW {
                0
            } else if rt <= UNHAPPY_ABOVE {
                1
            } else {
                2
            };
            self.bucket_counts[b] += 1;
        }
        let outcome = match rec.outcome {
            Some(Outcome::CutOffByWindow) | None => {
                self.cut_off += 1;
                return;
            }
            Some(o) => o,
        };
        self.completed += 1;
        for (s, &v) in rec.visits.iter().enumerate() {
            let l = self.state_label[s];
            self.visits[l] += f64::from(v);
            if self.state_thinking[s] {
                self.sojourn[l] += rec.sojourn[s];
            }
            if self.state_emits[s] {
                self.emitting_visits += f64::from(v);
            }
        }
        self.requests += rec.requests.len() as f64;
        self.items_added += f64::from(rec.items_added);
        self.items_paid += f64::from(rec.items_paid);
        match outcome {
            Outcome::Paid => self.paid += 1,
            Outcome::AbandonedWithItems => self.with_items += 1,
            Outcome::AbandonedEmpty => self.empty += 1,
            Outcome::CutOffByWindow => unreachable!(),
        }
    }

    pub fn finalize<J>(self, until: f64, servers: &[FifoResource<J>]) -> MetricsReport {
        let window = (until - self.cfg.warmup).max(0.0);
        let mut rts = self.rts;
        let response_time = RtStats::from_samples(&mut rts);
        let by_type = self
            .request_types
            .iter()
            .zip(self.rts_by_type)
            .map(|(t, mut v)| (t.clone(), RtStats::from_samples(&mut v)))
            .collect();
        let customers: u64 = self.bucket_counts.iter().sum();
        let frac = |c: u64| {
            if customers > 0 {
                c as f64 / customers as f64
            } else {
                0.0
            }
        };
        let buckets = Buckets {
            customers,
            lt2: frac(self.bucket_counts[0]),
            between2and4: frac(self.bucket_counts[1]),
            gt4: frac(self.bucket_counts[2]),
        };
        let servers = servers.iter().map(ServerReport::from_resource).collect();

        let session = (self.completed > 0).then(|| {
            let n = self.completed as f64;
            let mut thinking_label = vec![false; self.labels.len()];
            for (s, &t) in self.state_thinking.iter().enumerate() {
                thinking_label[self.state_label[s]] |= t;
            }
            let pm1 = self
                .labels
                .iter()
                .zip(&self.visits)
                .map(|(l, v)| (l.clone(), v / n))
                .collect();
            let pm6: BTreeMap<String, f64> = self
                .labels
                .iter()
                .enumerate()
                .filter(|(i, _)| thinking_label[*i])
                .map(|(i, l)| (l.clone(), self.sojourn[i] / n))
                .collect();
            let pm4: f64 = pm6.values().sum();
            let pm2 = pm6
                .iter()
                .map(|(l, v)| (l.clone(), if pm4 > 0.0 { v / pm4 } else { 0.0 }))
                .collect();
            SessionMetrics {
                pm1,
                pm2,
                pm3: self.with_items as f64 / n,
                pm4,
                pm5: self.paid as f64 / n,
                pm6,
                pm7: self.empty as f64 / n,
                pm8: self.requests / n,
                pm9: if self.started > 0 {
                    self.completed as f64 / self.started as f64
                } else {
                    0.0
                },
                pm10: self.items_paid / n,
                pm11: (self.items_added - self.items_paid) / n,
                items_added: self.items_added / n,
                emitting_visits: self.emitting_visits / n,
            }
        });
        let per_second = |items: f64| {
            if window > 0.0 {
                items * self.cfg.unit_value / window
            } else {
                0.0
            }
        };
        MetricsReport {
            window,
            response_time,
            by_type,
            buckets,
            servers,
            sessions_started: self.started,
            sessions_completed: self.completed,
            sessions_cut_off: self.cut_off,
            degenerate: session.is_none(),
            revenue_throughput: per_second(self.items_paid),
            potential_loss_throughput: per_second(self.items_added - self.items_paid),
            session,
        }
    }
}

impl MetricsReport {
    /// Identities that hold by construction; any entry is a bug.
    pub fn consistency_violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0);
        if let Some(s) = &self.session {
            let sum_pm6: f64 = s.pm6.values().sum();
            if !close(s.pm4, sum_pm6) {
                v.push(format!("PM4 {} != sum PM6 {}", s.pm4, sum_pm6));
            }
            if !close(s.pm8, s.emitting_visits) {
                v.push(format!(
                    "PM8 {} != emitting visits {}",
                    s.pm8, s.emitting_visits
                ));
            }
            if !close(s.pm10 + s.pm11, s.items_added) {
                v.push(format!(
                    "PM10+PM11 {} != items added {}",
                    s.pm10 + s.pm11,
                    s.items_added
                ));
            }
            let parts = s.pm3 + s.pm5 + s.pm7;
            if !close(parts, 1.0) {
                v.push(format!("PM3+PM5+PM7 = {parts}"));
            }
            if s.pm4 > 0.0 {
                let pm2: f64 = s.pm2.values().sum();
                if !close(pm2, 1.0) {
                    v.push(format!("PM2 sums to {pm2}"));
                }
            }
        }
        if self.buckets.customers > 0 {
            let b = self.buckets.lt2 + self.buckets.between2and4 + self.buckets.gt4;
            if !close(b, 1.0) {
                v.push(format!("bucket fractions sum to {b}"));
            }
        }
        for s in &self.servers {
            if !(0.0..=1.0).contains(&s.utilization) {
                v.push(format!("utilization of {} is {}", s.name, s.utilization));
            }
        }
        v
    }
}
