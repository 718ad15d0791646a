//! One replication: arrivals, blocking customer sessions and the server
//! farm share a single event calendar.

use serde::{Deserialize, Serialize};
use slab::Slab;
use thiserror::Error;

use crate::behavior::{
    analytic_session_metrics, AnalyticMetrics, BehaviorError, CbmgGraph, ClassBehavior,
    CustomerClass, EmptyCartPolicy, SessionWalk,
};
use crate::farm::{Farm, FarmError, FarmEvent, FarmSpec, Request, ServiceDemand};
use crate::kernel::{Calendar, KernelError, RngStream, SimTime, StreamId};
use crate::metrics::{HappinessRule, MetricsCollector, MetricsConfig, MetricsReport};
use crate::workload::{ArrivalProcess, ScenarioMix, WorkloadError};

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Behavior(#[from] BehaviorError),
    #[error(transparent)]
    Farm(#[from] FarmError),
    #[error(transparent)]
    Workload(#[from] WorkloadError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error("{0}")]
    Invalid(String),
}

/// Everything that defines the modelled system, independent of λ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub graph: CbmgGraph,
    pub classes: Vec<CustomerClass>,
    pub mix: ScenarioMix,
    pub farm: FarmSpec,
    pub empty_cart: EmptyCartPolicy,
}

impl Scenario {
    /// Built-in scenario on the standard graph and farm.
    pub fn preset(name: &str) -> Option<Self> {
        Some(Scenario {
            name: name.to_uppercase(),
            graph: CbmgGraph::standard(),
            classes: CustomerClass::presets(),
            mix: ScenarioMix::preset(name)?,
            farm: FarmSpec::standard(),
            empty_cart: EmptyCartPolicy::default(),
        })
    }

    /// Problems that make the scenario unusable, as human-readable lines.
    pub fn diagnostics(&self) -> Vec<String> {
        let mut out = Vec::new();
        if let Err(e) = self.mix.validate() {
            out.push(format!("mix: {e}"));
        }
        for name in &self.mix.classes {
            match self.classes.iter().find(|c| &c.name == name) {
                None => out.push(format!("mix names unknown class {name:?}")),
                Some(c) => {
                    if let Err(e) = ClassBehavior::compile(&self.graph, c, self.empty_cart) {
                        out.push(e.to_string());
                    }
                }
            }
        }
        out.extend(self.farm.validate());
        for r in self.graph.request_types() {
            if let Err(e) = self.farm.route_for(&r) {
                out.push(e.to_string());
            }
        }
        out
    }

    pub fn compile(&self) -> Result<CompiledScenario, SimError> {
        let problems = self.diagnostics();
        if !problems.is_empty() {
            return Err(SimError::Invalid(problems.join("; ")));
        }
        let behaviors = self
            .mix
            .classes
            .iter()
            .map(|name| {
                let c = self
                    .classes
                    .iter()
                    .find(|c| &c.name == name)
                    .expect("checked");
                ClassBehavior::compile(&self.graph, c, self.empty_cart)
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(CompiledScenario {
            scenario: self.clone(),
            request_types: self.graph.request_types(),
            behaviors,
        })
    }
}

/// A scenario with every class compiled, in mix order.
#[derive(Debug, Clone)]
pub struct CompiledScenario {
    pub scenario: Scenario,
    pub request_types: Vec<String>,
    pub behaviors: Vec<ClassBehavior>,
}

impl CompiledScenario {
    pub fn analytic(&self) -> Result<AnalyticMetrics, SimError> {
        Ok(analytic_session_metrics(
            &self.behaviors,
            &self.scenario.mix,
        )?)
    }

    /// Per-server demand of the mix-averaged session.
    pub fn service_demand(&self) -> Result<ServiceDemand, SimError> {
        let a = self.analytic()?;
        Ok(self.scenario.farm.service_demand(&a.requests_by_type)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    pub window: f64,
    pub warmup: f64,
    pub happiness: HappinessRule,
    pub unit_value: f64,
    /// Adds each response wait to the sojourn of the issuing state.
    pub include_response_in_sojourn: bool,
    /// Queue-length sampling period; `None` disables the series.
    pub queue_sample_interval: Option<f64>,
    pub record_requests: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            window: 7200.0,
            warmup: 0.0,
            happiness: HappinessRule::Mean,
            unit_value: 1.0,
            include_response_in_sojourn: false,
            queue_sample_interval: None,
            record_requests: false,
        }
    }
}

/// Flat request-log row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RequestRow {
    pub id: u64,
    pub session: u64,
    pub class: String,
    pub request_type: String,
    pub issued_at: f64,
    pub response_time: f64,
    pub wan_out: f64,
    pub wan_in: f64,
    pub queue_wait: f64,
    pub service: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct QueueSeries {
    pub server: String,
    pub samples: Vec<(f64, usize)>,
}

#[derive(Debug, Clone)]
pub struct Replication {
    pub seed: u64,
    pub lambda: f64,
    pub report: MetricsReport,
    pub requests: Vec<RequestRow>,
    pub queues: Vec<QueueSeries>,
}

#[derive(Debug, Clone, Copy)]
enum Action {
    Arrival,
    Ready(usize),
    Farm(FarmEvent),
}

impl From<FarmEvent> for Action {
    fn from(e: FarmEvent) -> Self {
        Action::Farm(e)
    }
}

struct Active {
    walk: SessionWalk,
    class: usize,
}

struct Replicator<'a> {
    sc: &'a CompiledScenario,
    opts: &'a RunOptions,
    cal: Calendar<Action>,
    farm: Farm,
    arrivals: ArrivalProcess,
    arrival_rng: RngStream,
    class_rng: RngStream,
    transition_rng: RngStream,
    think_rng: RngStream,
    sessions: Slab<Active>,
    next_session: u64,
    metrics: MetricsCollector,
    log: Vec<RequestRow>,
}

impl Replicator<'_> {
    fn arrive(&mut self) -> Result<(), SimError> {
        let now = self.cal.now();
        let class = self.arrivals.draw_class(&mut self.class_rng);
        let id = self.next_session;
        self.next_session += 1;
        let walk = SessionWalk::start(&self.sc.behaviors[class], id, class, now);
        self.metrics.session_started(now.secs());
        let key = self.sessions.insert(Active { walk, class });
        let gap = self.arrivals.next_interarrival(&mut self.arrival_rng)?;
        self.cal.schedule_in(gap, Action::Arrival)?;
        self.think(key)
    }

    /// Starts the sojourn in the current state, or acts at once if it is zero.
    fn think(&mut self, key: usize) -> Result<(), SimError> {
        let now = self.cal.now();
        let s = &mut self.sessions[key];
        let b = &self.sc.behaviors[s.class];
        let d = s.walk.draw_sojourn(b, &mut self.think_rng, now)?;
        if d > 0.0 {
            self.cal.schedule_in(d, Action::Ready(key))?;
            Ok(())
        } else {
            self.act(key)
        }
    }

    /// Sojourn over: issue the state's request or move on.
    fn act(&mut self, key: usize) -> Result<(), SimError> {
        let s = &self.sessions[key];
        match s.walk.request(&self.sc.behaviors[s.class]) {
            Some(t) => {
                let rid = self.farm.submit(&mut self.cal, t, key as u64)?;
                self.sessions[key].walk.note_request(rid);
                Ok(())
            }
            None => self.advance(key),
        }
    }

    fn advance(&mut self, key: usize) -> Result<(), SimError> {
        let now = self.cal.now();
        let s = &mut self.sessions[key];
        let b = &self.sc.behaviors[s.class];
        if s.walk.advance(b, &mut self.transition_rng, now)?.is_some() {
            let done = self.sessions.remove(key);
            self.metrics.observe_session(&done.walk.finish());
            Ok(())
        } else {
            self.think(key)
        }
    }

    fn delivered(&mut self, req: Request) -> Result<(), SimError> {
        let rt = req.response_time.expect("delivered");
        self.metrics.observe_request(&req);
        let key = req.session as usize;
        if self.opts.record_requests {
            let s = &self.sessions[key];
            self.log.push(RequestRow {
                id: req.id,
                session: s.walk.record().id,
                class: self.sc.behaviors[s.class].class_name.clone(),
                request_type: self.sc.request_types[req.request_type].clone(),
                issued_at: req.issued_at.secs(),
                response_time: rt,
                wan_out: req.wan_out,
                wan_in: req.wan_in,
                queue_wait: req.hops.iter().map(|h| h.wait()).sum(),
                service: req.hops.iter().map(|h| h.service()).sum(),
            });
        }
        self.sessions[key]
            .walk
            .note_response(rt, self.opts.include_response_in_sojourn);
        self.advance(key)
    }
}

/// Runs one replication of `sc` at arrival rate `lambda`.
pub fn run_replication(
    sc: &CompiledScenario,
    lambda: f64,
    seed: u64,
    opts: &RunOptions,
) -> Result<Replication, SimError> {
    if !(opts.window >= 0.0) || !(opts.warmup >= 0.0) || opts.warmup > opts.window {
        return Err(SimError::Invalid(format!(
            "need 0 <= warmup ({}) <= window ({})",
            opts.warmup, opts.window
        )));
    }
    let arrivals = ArrivalProcess::new(lambda, sc.scenario.mix.clone())?;
    let farm = Farm::new(
        &sc.scenario.farm,
        &sc.request_types,
        seed,
        opts.warmup,
        opts.queue_sample_interval,
    )?;
    let graph_states = &sc.behaviors[0].states;
    let metrics = MetricsCollector::new(
        graph_states,
        &sc.request_types,
        MetricsConfig {
            warmup: opts.warmup,
            unit_value: opts.unit_value,
            happiness: opts.happiness,
        },
    );
    let mut r = Replicator {
        sc,
        opts,
        cal: Calendar::new(),
        farm,
        arrival_rng: RngStream::new(seed, StreamId::Arrivals),
        class_rng: RngStream::new(seed, StreamId::ClassDraw),
        transition_rng: RngStream::new(seed, StreamId::Transitions),
        think_rng: RngStream::new(seed, StreamId::ThinkTimes),
        arrivals,
        sessions: Slab::new(),
        next_session: 0,
        metrics,
        log: Vec::new(),
    };
    let until = SimTime::from_secs(opts.window);
    if lambda > 0.0 {
        let first = r.arrivals.next_interarrival(&mut r.arrival_rng)?;
        r.cal.schedule(SimTime::from_secs(first), Action::Arrival)?;
    }
    while let Some(ev) = r.cal.next_event(until) {
        match ev.action {
            Action::Arrival => r.arrive()?,
            Action::Ready(key) => r.act(key)?,
            Action::Farm(fe) => {
                if let Some(req) = r.farm.handle(&mut r.cal, fe)? {
                    r.delivered(req)?;
                }
            }
        }
    }
    for (_, s) in std::mem::take(&mut r.sessions) {
        r.metrics.observe_session(&s.walk.cut_off(until));
    }
    r.farm.close(until);
    let report = r.metrics.finalize(opts.window, r.farm.servers());
    let queues = if opts.queue_sample_interval.is_some() {
        r.farm
            .servers()
            .iter()
            .map(|s| QueueSeries {
                server: s.name().to_string(),
                samples: s.stats().samples.clone(),
            })
            .collect()
    } else {
        Vec::new()
    };
    Ok(Replication {
        seed,
        lambda,
        report,
        requests: r.log,
        queues,
    })
}
