//! λ sweeps with replications, critical-rate interpolation and
//! side-by-side scenario comparison.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::kernel::splitmix64;
use crate::metrics::MetricsReport;
use crate::sim::{run_replication, CompiledScenario, RunOptions, SimError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepSpec {
    pub lambda_from: f64,
    pub lambda_to: f64,
    pub lambda_step: f64,
    pub replications: u32,
    pub seed: u64,
    pub threshold: f64,
}

impl Default for SweepSpec {
    fn default() -> Self {
        SweepSpec {
            lambda_from: 0.0,
            lambda_to: 30.0,
            lambda_step: 0.5,
            replications: 5,
            seed: 1,
            threshold: 4.0,
        }
    }
}

impl SweepSpec {
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::Invalid(m));
        if !(self.lambda_from >= 0.0) || !(self.lambda_from <= self.lambda_to) {
            return bad(format!(
                "sweep needs 0 <= lambda_from ({}) <= lambda_to ({})",
                self.lambda_from, self.lambda_to
            ));
        }
        if !(self.lambda_step > 0.0) {
            return bad(format!("sweep step must be > 0, got {}", self.lambda_step));
        }
        if self.replications == 0 {
            return bad("sweep needs at least one replication".into());
        }
        if !(self.threshold > 0.0) {
            return bad(format!("threshold must be > 0, got {}", self.threshold));
        }
        Ok(())
    }

    /// Grid points `from + i·step`, rounded to 1e-9 to avoid drift.
    pub fn lambdas(&self) -> Vec<f64> {
        let n = ((self.lambda_to - self.lambda_from) / self.lambda_step + 1e-9).floor() as usize;
        (0..=n)
            .map(|i| {
                let x = self.lambda_from + i as f64 * self.lambda_step;
                (x * 1e9).round() / 1e9
            })
            .collect()
    }
}

/// Seed of replication `rep` at rate `lambda`; independent of the grid.
pub fn replication_seed(master: u64, lambda: f64, rep: u32) -> u64 {
    splitmix64(splitmix64(master ^ splitmix64(lambda.to_bits())) ^ u64::from(rep))
}

/// Sample mean and 95% Student-t half-width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub n: usize,
    pub mean: f64,
    pub half_width: Option<f64>,
}

impl Estimate {
    pub fn of(xs: &[f64]) -> Option<Self> {
        if xs.is_empty() {
            return None;
        }
        let n = xs.len();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let half_width = (n > 1).then(|| {
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            let t = StudentsT::new(0.0, 1.0, (n - 1) as f64)
                .expect("n > 1")
                .inverse_cdf(0.975);
            t * (var / n as f64).sqrt()
        });
        Some(Estimate {
            n,
            mean,
            half_width,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServerPoint {
    pub name: String,
    pub utilization: f64,
    pub throughput: f64,
}

/// Replication means of the session indicators.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PmSnapshot {
    pub pm3: f64,
    pub pm4: f64,
    pub pm5: f64,
    pub pm7: f64,
    pub pm8: f64,
    pub pm9: f64,
    pub pm10: f64,
    pub pm11: f64,
    pub revenue_throughput: f64,
    pub potential_loss_throughput: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub lambda: f64,
    pub seeds: Vec<u64>,
    pub mean_rt: Option<f64>,
    pub ci: Option<f64>,
    pub bucket_lt2: f64,
    pub bucket_2to4: f64,
    pub bucket_gt4: f64,
    pub servers: Vec<ServerPoint>,
    pub pm: Option<PmSnapshot>,
    pub sessions_completed: f64,
    /// No replication produced a response time.
    pub degenerate: bool,
    pub consistency: Vec<String>,
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

impl SweepPoint {
    /// Aggregates replications in the given (seed) order.
    pub fn aggregate(lambda: f64, seeds: Vec<u64>, reports: &[MetricsReport]) -> Self {
        let rts: Vec<f64> = reports
            .iter()
            .filter_map(|r| r.response_time.mean)
            .collect();
        let est = Estimate::of(&rts);
        let bucketed: Vec<_> = reports.iter().filter(|r| r.buckets.customers > 0).collect();
        let servers = reports
            .first()
            .map(|first| {
                first
                    .servers
                    .iter()
                    .enumerate()
                    .map(|(i, s)| ServerPoint {
                        name: s.name.clone(),
                        utilization: mean(reports.iter().map(|r| r.servers[i].utilization)),
                        throughput: mean(reports.iter().map(|r| r.servers[i].throughput)),
                    })
                    .collect()
            })
            .unwrap_or_default();
        let with_sessions: Vec<_> = reports
            .iter()
            .filter_map(|r| r.session.as_ref().map(|s| (r, s)))
            .collect();
        let pm = (!with_sessions.is_empty()).then(|| {
            let m = |f: &dyn Fn(&(&MetricsReport, &crate::metrics::SessionMetrics)) -> f64| {
                mean(with_sessions.iter().map(f))
            };
            PmSnapshot {
                pm3: m(&|x| x.1.pm3),
                pm4: m(&|x| x.1.pm4),
                pm5: m(&|x| x.1.pm5),
                pm7: m(&|x| x.1.pm7),
                pm8: m(&|x| x.1.pm8),
                pm9: m(&|x| x.1.pm9),
                pm10: m(&|x| x.1.pm10),
                pm11: m(&|x| x.1.pm11),
                revenue_throughput: m(&|x| x.0.revenue_throughput),
                potential_loss_throughput: m(&|x| x.0.potential_loss_throughput),
            }
        });
        let consistency = reports
            .iter()
            .zip(&seeds)
            .flat_map(|(r, s)| {
                r.consistency_violations()
                    .into_iter()
                    .map(move |v| format!("seed {s}: {v}"))
            })
            .collect();
        SweepPoint {
            lambda,
            mean_rt: est.map(|e| e.mean),
            ci: est.and_then(|e| e.half_width),
            bucket_lt2: mean(bucketed.iter().map(|r| r.buckets.lt2)),
            bucket_2to4: mean(bucketed.iter().map(|r| r.buckets.between2and4)),
            bucket_gt4: mean(bucketed.iter().map(|r| r.buckets.gt4)),
            servers,
            pm,
            sessions_completed: mean(reports.iter().map(|r| r.sessions_completed as f64)),
            degenerate: est.is_none(),
            seeds,
            consistency,
        }
    }
}

/// Runs `replications` independent replications at one rate.
pub fn run_point(
    sc: &CompiledScenario,
    lambda: f64,
    replications: u32,
    master_seed: u64,
    opts: &RunOptions,
) -> Result<SweepPoint, SimError> {
    let seeds: Vec<u64> = (0..replications)
        .map(|r| replication_seed(master_seed, lambda, r))
        .collect();
    let reports = seeds
        .par_iter()
        .map(|&s| run_replication(sc, lambda, s, opts).map(|r| r.report))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SweepPoint::aggregate(lambda, seeds, &reports))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCurve {
    pub scenario: String,
    pub threshold: f64,
    pub points: Vec<SweepPoint>,
}

impl SweepCurve {
    pub fn critical(&self) -> Critical {
        let pts: Vec<(f64, f64)> = self
            .points
            .iter()
            .filter_map(|p| p.mean_rt.map(|rt| (p.lambda, rt)))
            .collect();
        critical_lambda(&pts, self.threshold)
    }
}

/// Every (λ, replication) pair runs in parallel; results are joined in
/// grid order.
pub fn run_sweep(
    sc: &CompiledScenario,
    spec: &SweepSpec,
    opts: &RunOptions,
) -> Result<SweepCurve, SimError> {
    spec.validate()?;
    let lambdas = spec.lambdas();
    let jobs: Vec<(usize, f64, u64)> = lambdas
        .iter()
        .enumerate()
        .flat_map(|(i, &l)| {
            (0..spec.replications).map(move |r| (i, l, replication_seed(spec.seed, l, r)))
        })
        .collect();
    let reports = jobs
        .par_iter()
        .map(|&(_, l, s)| run_replication(sc, l, s, opts).map(|r| r.report))
        .collect::<Result<Vec<_>, _>>()?;
    let per = spec.replications as usize;
    let points = lambdas
        .iter()
        .enumerate()
        .map(|(i, &l)| {
            let range = i * per..(i + 1) * per;
            let seeds = jobs[range.clone()].iter().map(|j| j.2).collect();
            SweepPoint::aggregate(l, seeds, &reports[range])
        })
        .collect();
    Ok(SweepCurve {
        scenario: sc.scenario.name.clone(),
        threshold: spec.threshold,
        points,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Critical {
    /// First upward crossing; `multiple` flags later re-crossings.
    Crossed {
        lambda: f64,
        multiple: bool,
    },
    NotCrossed,
    BelowRange,
}

impl Critical {
    pub fn lambda(&self) -> Option<f64> {
        match self {
            Critical::Crossed { lambda, .. } => Some(*lambda),
            _ => None,
        }
    }
}

/// Linear interpolation at the first pair with RT_a ≤ thr < RT_b.
pub fn critical_lambda(points: &[(f64, f64)], threshold: f64) -> Critical {
    let Some(&(_, first)) = points.first() else {
        return Critical::NotCrossed;
    };
    if first > threshold {
        return Critical::BelowRange;
    }
    for (i, w) in points.windows(2).enumerate() {
        let ((la, ra), (lb, rb)) = (w[0], w[1]);
        if ra <= threshold && rb > threshold {
            let lambda = la + (threshold - ra) * (lb - la) / (rb - ra);
            let multiple = points[i + 2..].iter().any(|&(_, r)| r <= threshold);
            return Critical::Crossed { lambda, multiple };
        }
    }
    Critical::NotCrossed
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub scenario: String,
    pub critical: Critical,
    pub bottleneck: String,
    pub bottleneck_demand: f64,
    pub total_demand: f64,
    pub lambda_sat: f64,
    pub demands: Vec<(String, f64)>,
    pub pm4: f64,
    pub pm5: f64,
    pub pm8: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub rows: Vec<ComparisonRow>,
    /// Critical rates fall as bottleneck demand rises.
    pub ordered_by_demand: bool,
}

pub fn compare_scenarios(
    runs: &[(&CompiledScenario, &SweepCurve)],
) -> Result<Comparison, SimError> {
    if runs.len() < 2 {
        return Err(SimError::Invalid(
            "comparison needs at least two sweeps".into(),
        ));
    }
    let mut rows = Vec::with_capacity(runs.len());
    for (sc, curve) in runs {
        let a = sc.analytic()?;
        let d = sc.scenario.farm.service_demand(&a.requests_by_type)?;
        rows.push(ComparisonRow {
            scenario: sc.scenario.name.clone(),
            critical: curve.critical(),
            total_demand: d.total(),
            bottleneck: d.bottleneck.clone(),
            bottleneck_demand: d.bottleneck_demand,
            lambda_sat: d.lambda_sat,
            demands: d.per_server,
            pm4: a.pm4,
            pm5: a.pm5,
            pm8: a.pm8,
        });
    }
    let mut by_demand: Vec<&ComparisonRow> = rows.iter().collect();
    by_demand.sort_by(|a, b| b.bottleneck_demand.total_cmp(&a.bottleneck_demand));
    let ordered_by_demand =
        by_demand
            .windows(2)
            .all(|w| match (w[0].critical.lambda(), w[1].critical.lambda()) {
                (Some(a), Some(b)) => a <= b,
                _ => false,
            });
    Ok(Comparison {
        rows,
        ordered_by_demand,
    })
}
