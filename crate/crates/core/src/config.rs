//! TOML configuration. Every section is optional and falls back to the
//! built-in defaults: standard graph, the three shopper classes, the
//! five-server farm and the S1 mix.
//!
//! ```toml
//! [scenario]
//! preset = "S2"          # or: classes = [...], pmf = [...]
//! lambda = 19.0
//!
//! [sweep]
//! lambda_from = 0.0
//! lambda_to = 30.0
//! lambda_step = 0.5
//! threshold = 4.0
//!
//! [run]
//! window = 7200.0
//! seed = 1
//! replications = 5
//!
//! [[classes]]            # replaces the built-in class of the same name
//! name = "rare"
//! probs = { Browse = 0.5, Search = 0.5, Found = 0.1, NotFound = 0.9, ... }
//!
//! [routes]
//! Browse = ["WS", "DbS", "WS"]
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::behavior::{CbmgEdge, CbmgGraph, CbmgState, CustomerClass, EmptyCartPolicy};
use crate::farm::{FarmSpec, RouteTable, ServerSpec, WanSpec};
use crate::metrics::{HappinessRule, RunSummary};
use crate::planner::{run_sweep, SweepCurve, SweepSpec};
use crate::sim::{run_replication, Replication, RunOptions, Scenario, SimError};
use crate::workload::ScenarioMix;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("ill-formed config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config:\n  {}", .0.join("\n  "))]
    Invalid(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioSection {
    pub name: Option<String>,
    /// Built-in mix: S1, S2 or S3.
    pub preset: Option<String>,
    pub classes: Option<Vec<String>>,
    pub pmf: Option<Vec<f64>>,
    pub lambda: f64,
}

impl Default for ScenarioSection {
    fn default() -> Self {
        ScenarioSection {
            name: None,
            preset: None,
            classes: None,
            pmf: None,
            lambda: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub lambda_from: f64,
    pub lambda_to: f64,
    pub lambda_step: f64,
    pub threshold: f64,
}

impl Default for SweepSection {
    fn default() -> Self {
        let d = SweepSpec::default();
        SweepSection {
            lambda_from: d.lambda_from,
            lambda_to: d.lambda_to,
            lambda_step: d.lambda_step,
            threshold: d.threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub window: f64,
    pub warmup: f64,
    pub seed: u64,
    pub replications: u32,
    /// Shorthand for `empty_cart_policy = "allow"`.
    pub allow_empty_checkout: bool,
    pub empty_cart_policy: Option<EmptyCartPolicy>,
    pub fes_enabled: bool,
    pub happiness_rule: HappinessRule,
    pub unit_value: f64,
    pub include_response_in_sojourn: bool,
    /// Seconds between queue-length samples in `run` output.
    pub queue_sample_interval: f64,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            window: 7200.0,
            warmup: 0.0,
            seed: 1,
            replications: 5,
            allow_empty_checkout: false,
            empty_cart_policy: None,
            fes_enabled: true,
            happiness_rule: HappinessRule::Mean,
            unit_value: 1.0,
            include_response_in_sojourn: false,
            queue_sample_interval: 1.0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GraphSection {
    /// `standard` or `branch-groups`; ignored when states are given.
    pub preset: Option<String>,
    pub entry: Option<String>,
    pub states: Vec<CbmgState>,
    pub edges: Vec<CbmgEdge>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FarmSection {
    pub servers: Option<Vec<ServerSpec>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub scenario: ScenarioSection,
    pub sweep: SweepSection,
    pub run: RunSection,
    pub classes: Vec<CustomerClass>,
    pub graph: GraphSection,
    pub farm: FarmSection,
    pub routes: Option<RouteTable>,
    pub wan: Option<WanSpec>,
}

/// Fully resolved configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Resolved {
    pub scenario: Scenario,
    pub lambda: f64,
    pub options: RunOptions,
    pub sweep: SweepSpec,
}

impl Resolved {
    /// SHA-256 of the canonical JSON form.
    pub fn fingerprint(&self) -> String {
        let json = serde_json::to_vec(self).expect("serializable");
        Sha256::digest(&json)
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    /// Single replication at the configured rate.
    pub fn run(&self, seed: u64) -> Result<(RunSummary, Replication), SimError> {
        let sc = self.scenario.compile()?;
        let rep = run_replication(&sc, self.lambda, seed, &self.options)?;
        let r = &rep.report;
        let summary = RunSummary {
            scenario: self.scenario.name.clone(),
            fingerprint: self.fingerprint(),
            seed,
            lambda: self.lambda,
            window: self.options.window,
            sessions_started: r.sessions_started,
            sessions_completed: r.sessions_completed,
            degenerate: r.degenerate,
            consistency: r.consistency_violations(),
            report: r.clone(),
        };
        Ok((summary, rep))
    }

    /// Sweep over the configured grid; no request logs or queue series.
    pub fn sweep(&self) -> Result<SweepCurve, SimError> {
        let sc = self.scenario.compile()?;
        let opts = RunOptions {
            queue_sample_interval: None,
            record_requests: false,
            ..self.options.clone()
        };
        run_sweep(&sc, &self.sweep, &opts)
    }
}

impl ConfigFile {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let p = path.as_ref();
        let text = std::fs::read_to_string(p).map_err(|source| ConfigError::Io {
            path: p.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    /// Config built around a built-in mix.
    pub fn preset(name: &str, lambda: f64) -> Self {
        ConfigFile {
            scenario: ScenarioSection {
                preset: Some(name.to_string()),
                lambda,
                ..ScenarioSection::default()
            },
            ..ConfigFile::default()
        }
    }

    fn graph(&self) -> Result<CbmgGraph, String> {
        let g = &self.graph;
        if !g.states.is_empty() {
            let entry = g
                .entry
                .clone()
                .or_else(|| g.states.first().map(|s| s.name.clone()))
                .unwrap_or_default();
            return Ok(CbmgGraph {
                entry,
                states: g.states.clone(),
                edges: g.edges.clone(),
            });
        }
        let name = g.preset.as_deref().unwrap_or("standard");
        CbmgGraph::preset(name).ok_or_else(|| format!("unknown graph preset {name:?}"))
    }

    fn mix(&self) -> Result<(String, ScenarioMix), String> {
        let s = &self.scenario;
        match (&s.preset, &s.classes, &s.pmf) {
            (_, Some(classes), Some(pmf)) => Ok((
                s.name.clone().unwrap_or_else(|| "custom".into()),
                ScenarioMix {
                    classes: classes.clone(),
                    pmf: pmf.clone(),
                },
            )),
            (_, Some(_), None) | (_, None, Some(_)) => {
                Err("scenario needs both classes and pmf".into())
            }
            (preset, None, None) => {
                let p = preset.as_deref().unwrap_or("S1");
                let mix = ScenarioMix::preset(p)
                    .ok_or_else(|| format!("unknown scenario preset {p:?}"))?;
                Ok((s.name.clone().unwrap_or_else(|| p.to_uppercase()), mix))
            }
        }
    }

    /// Resolves defaults and checks every cross-reference.
    pub fn resolve(&self) -> Result<Resolved, ConfigError> {
        let mut problems = Vec::new();
        let graph = self.graph().map_err(|e| problems.push(e)).ok();
        let mix = self.mix().map_err(|e| problems.push(e)).ok();
        let (Some(graph), Some((name, mix))) = (graph, mix) else {
            return Err(ConfigError::Invalid(problems));
        };

        let mut classes = CustomerClass::presets();
        for c in &self.classes {
            match classes.iter_mut().find(|x| x.name == c.name) {
                Some(x) => *x = c.clone(),
                None => classes.push(c.clone()),
            }
        }

        let mut farm = FarmSpec::standard();
        if let Some(servers) = &self.farm.servers {
            farm.servers = servers.clone();
        }
        if let Some(routes) = &self.routes {
            for (k, v) in &routes.0 {
                farm.routes.0.insert(k.clone(), v.clone());
            }
        }
        if let Some(wan) = &self.wan {
            farm.wan = wan.clone();
        }
        farm.fes_enabled = self.run.fes_enabled;

        let empty_cart = if self.run.allow_empty_checkout {
            EmptyCartPolicy::Allow
        } else {
            self.run.empty_cart_policy.unwrap_or_default()
        };
        let scenario = Scenario {
            name,
            graph,
            classes,
            mix,
            farm,
            empty_cart,
        };
        problems.extend(scenario.diagnostics());

        let r = &self.run;
        if !(self.scenario.lambda >= 0.0) || !self.scenario.lambda.is_finite() {
            problems.push(format!(
                "scenario.lambda must be >= 0, got {}",
                self.scenario.lambda
            ));
        }
        if !(r.window > 0.0) {
            problems.push(format!("run.window must be > 0, got {}", r.window));
        }
        if !(r.warmup >= 0.0 && r.warmup < r.window) {
            problems.push(format!(
                "run.warmup must be in [0, window), got {}",
                r.warmup
            ));
        }
        if !(r.unit_value >= 0.0) {
            problems.push(format!("run.unit_value must be >= 0, got {}", r.unit_value));
        }
        if !(r.queue_sample_interval > 0.0) {
            problems.push(format!(
                "run.queue_sample_interval must be > 0, got {}",
                r.queue_sample_interval
            ));
        }
        let sweep = SweepSpec {
            lambda_from: self.sweep.lambda_from,
            lambda_to: self.sweep.lambda_to,
            lambda_step: self.sweep.lambda_step,
            replications: r.replications,
            seed: r.seed,
            threshold: self.sweep.threshold,
        };
        if let Err(e) = sweep.validate() {
            problems.push(e.to_string());
        }
        if !problems.is_empty() {
            return Err(ConfigError::Invalid(problems));
        }
        Ok(Resolved {
            scenario,
            lambda: self.scenario.lambda,
            options: RunOptions {
                window: r.window,
                warmup: r.warmup,
                happiness: r.happiness_rule,
                unit_value: r.unit_value,
                include_response_in_sojourn: r.include_response_in_sojourn,
                queue_sample_interval: Some(r.queue_sample_interval),
                record_requests: true,
            },
            sweep,
        })
    }
}
