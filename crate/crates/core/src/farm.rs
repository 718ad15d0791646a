//! Server side: FIFO servers with truncated-normal service times, request
//! routing and WAN propagation delays.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use slab::Slab;
use thiserror::Error;

use crate::kernel::{Calendar, FifoResource, KernelError, RngStream, SimTime, StreamId};

pub const FRONT_END: &str = "FES";

#[derive(Debug, Error)]
pub enum FarmError {
    #[error("no route for request type {0:?}")]
    UnknownRequestType(String),
    #[error("route for {request:?} names unknown server {server:?}")]
    UnknownServer { request: String, server: String },
    #[error("invalid farm: {0}")]
    Invalid(String),
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServerSpec {
    pub name: String,
    /// Mean service time, seconds.
    pub mean: f64,
    /// Standard deviation, seconds. Defaults to mean/30 (±3σ = ±10%).
    #[serde(default)]
    pub sigma: Option<f64>,
}

impl ServerSpec {
    pub fn new(name: &str, mean: f64) -> Self {
        ServerSpec {
            name: name.into(),
            mean,
            sigma: None,
        }
    }

    pub fn sigma(&self) -> f64 {
        self.sigma.unwrap_or(self.mean / 30.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WanSpec {
    pub mean: f64,
    pub sigma: f64,
    /// When false, requests cross the WAN instantly.
    #[serde(default = "yes")]
    pub enabled: bool,
}

impl Default for WanSpec {
    fn default() -> Self {
        WanSpec {
            mean: 0.5,
            sigma: 0.133333,
            enabled: true,
        }
    }
}

/// Back-end server sequence per request type. The front-end server is not
/// listed; it is prepended by [`FarmSpec::route_for`] when enabled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RouteTable(pub BTreeMap<String, Vec<String>>);

impl RouteTable {
    pub fn standard() -> Self {
        let route = |s: &[&str]| s.iter().map(|x| x.to_string()).collect::<Vec<_>>();
        RouteTable(BTreeMap::from([
            ("Search".into(), route(&["WS", "ApS", "DbS", "ApS", "WS"])),
            ("Browse".into(), route(&["WS", "DbS", "WS"])),
            ("Checkout".into(), route(&["WS", "AuS", "DbS", "AuS", "WS"])),
            ("Add".into(), route(&["WS", "DbS", "WS"])),
        ]))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FarmSpec {
    pub servers: Vec<ServerSpec>,
    pub routes: RouteTable,
    #[serde(default)]
    pub wan: WanSpec,
    /// Every request passes the front-end server once on arrival.
    #[serde(default = "yes")]
    pub fes_enabled: bool,
}

fn yes() -> bool {
    true
}

impl Default for FarmSpec {
    fn default() -> Self {
        Self::standard()
    }
}

/// Per-server service demand per session and the saturation rate it implies.
#[derive(Debug, Clone, Serialize)]
pub struct ServiceDemand {
    pub per_server: Vec<(String, f64)>,
    pub bottleneck: String,
    pub bottleneck_demand: f64,
    /// 1 / max demand, in sessions per second (infinite for zero demand).
    pub lambda_sat: f64,
}

impl ServiceDemand {
    pub fn of(&self, server: &str) -> f64 {
        self.per_server
            .iter()
            .find(|(s, _)| s == server)
            .map(|(_, d)| *d)
            .unwrap_or(0.0)
    }

    pub fn total(&self) -> f64 {
        self.per_server.iter().map(|(_, d)| d).sum()
    }
}

impl FarmSpec {
    pub fn standard() -> Self {
        FarmSpec {
            servers: vec![
                ServerSpec::new("FES", 0.001),
                ServerSpec::new("WS", 0.010),
                ServerSpec::new("DbS", 0.005),
                ServerSpec::new("ApS", 0.010),
                ServerSpec::new("AuS", 0.010),
            ],
            routes: RouteTable::standard(),
            wan: WanSpec::default(),
            fes_enabled: true,
        }
    }

    pub fn server_index(&self, name: &str) -> Option<usize> {
        self.servers.iter().position(|s| s.name == name)
    }

    pub fn validate(&self) -> Vec<String> {
        let mut v = Vec::new();
        for (i, s) in self.servers.iter().enumerate() {
            if !(s.mean > 0.0) {
                v.push(format!("server {:?}: mean service must be > 0", s.name));
            }
            if !(s.sigma() > 0.0) {
                v.push(format!("server {:?}: sigma must be > 0", s.name));
            }
            if self.servers[..i].iter().any(|o| o.name == s.name) {
                v.push(format!("server {:?} defined twice", s.name));
            }
        }
        if self.fes_enabled && self.server_index(FRONT_END).is_none() {
            v.push(format!(
                "front-end enabled but no server named {FRONT_END:?}"
            ));
        }
        for (req, seq) in &self.routes.0 {
            if seq.is_empty() {
                v.push(format!("route for {req:?} is empty"));
            }
            for s in seq {
                if self.server_index(s).is_none() {
                    v.push(format!("route for {req:?} names unknown server {s:?}"));
                }
            }
        }
        if self.wan.enabled && (!(self.wan.mean > 0.0) || !(self.wan.sigma > 0.0)) {
            v.push("wan mean and sigma must be > 0".into());
        }
        v
    }

    /// Full server path: front-end once (when enabled), then the back-end sequence.
    pub fn route_for(&self, request_type: &str) -> Result<Vec<String>, FarmError> {
        let seq = self
            .routes
            .0
            .get(request_type)
            .ok_or_else(|| FarmError::UnknownRequestType(request_type.into()))?;
        let mut path = Vec::with_capacity(seq.len() + 1);
        if self.fes_enabled {
            path.push(FRONT_END.to_string());
        }
        path.extend(seq.iter().cloned());
        Ok(path)
    }

    /// Demand law: D(server) = Σ_type requests(type) × visits(server, type) × mean.
    pub fn service_demand(
        &self,
        requests_per_session: &BTreeMap<String, f64>,
    ) -> Result<ServiceDemand, FarmError> {
        let mut per_server: Vec<(String, f64)> =
            self.servers.iter().map(|s| (s.name.clone(), 0.0)).collect();
        for (req, &count) in requests_per_session {
            if count == 0.0 {
                continue;
            }
            for server in self.route_for(req)? {
                let i = self
                    .server_index(&server)
                    .ok_or_else(|| FarmError::UnknownServer {
                        request: req.clone(),
                        server: server.clone(),
                    })?;
                per_server[i].1 += count * self.servers[i].mean;
            }
        }
        let (bottleneck, bottleneck_demand) =
            per_server.iter().fold((String::new(), 0.0), |acc, (s, d)| {
                if *d > acc.1 {
                    (s.clone(), *d)
                } else {
                    acc
                }
            });
        let lambda_sat = if bottleneck_demand > 0.0 {
            1.0 / bottleneck_demand
        } else {
            f64::INFINITY
        };
        Ok(ServiceDemand {
            per_server,
            bottleneck,
            bottleneck_demand,
            lambda_sat,
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct HopRecord {
    pub server: usize,
    pub queued_at: SimTime,
    pub started_at: SimTime,
    pub completed_at: SimTime,
}

impl HopRecord {
    pub fn wait(&self) -> f64 {
        self.started_at - self.queued_at
    }

    pub fn service(&self) -> f64 {
        self.completed_at - self.started_at
    }
}

/// One HTTP request travelling client → farm → client.
#[derive(Debug, Clone, Serialize)]
pub struct Request {
    pub id: u64,
    pub request_type: usize,
    pub session: u64,
    pub issued_at: SimTime,
    pub wan_out: f64,
    pub wan_in: f64,
    pub hops: Vec<HopRecord>,
    pub response_time: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FarmEvent {
    /// Outbound WAN delay elapsed; request reaches the first server.
    ReachSite(usize),
    /// The job in service at this server finished.
    HopDone(usize),
    /// Inbound WAN delay elapsed; response is back at the client.
    Delivered(usize),
}

/// Whether service and WAN times are drawn or pinned at their means.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Variates {
    #[default]
    Sampled,
    AtMeans,
}

/// Running server farm bound to one replication.
#[derive(Debug)]
pub struct Farm {
    spec: FarmSpec,
    routes: Vec<Vec<usize>>,
    servers: Vec<FifoResource<usize>>,
    service_rng: Vec<RngStream>,
    wan_rng: RngStream,
    variates: Variates,
    in_flight: Slab<Request>,
    next_id: u64,
}

impl Farm {
    /// `request_types` fixes the index space used by [`submit`](Self::submit).
    pub fn new(
        spec: &FarmSpec,
        request_types: &[String],
        seed: u64,
        measure_from: f64,
        sample_interval: Option<f64>,
    ) -> Result<Self, FarmError> {
        let problems = spec.validate();
        if !problems.is_empty() {
            return Err(FarmError::Invalid(problems.join("; ")));
        }
        let routes = request_types
            .iter()
            .map(|r| {
                spec.route_for(r).map(|path| {
                    path.iter()
                        .map(|s| spec.server_index(s).expect("validated"))
                        .collect()
                })
            })
            .collect::<Result<Vec<Vec<usize>>, _>>()?;
        let servers = spec
            .servers
            .iter()
            .map(|s| FifoResource::with_measurement(s.name.clone(), measure_from, sample_interval))
            .collect();
        let service_rng = (0..spec.servers.len())
            .map(|i| RngStream::new(seed, StreamId::Server(i as u32)))
            .collect();
        Ok(Farm {
            spec: spec.clone(),
            routes,
            servers,
            service_rng,
            wan_rng: RngStream::new(seed, StreamId::Wan),
            variates: Variates::Sampled,
            in_flight: Slab::new(),
            next_id: 0,
        })
    }

    pub fn with_variates(mut self, v: Variates) -> Self {
        self.variates = v;
        self
    }

    pub fn spec(&self) -> &FarmSpec {
        &self.spec
    }

    pub fn servers(&self) -> &[FifoResource<usize>] {
        &self.servers
    }

    pub fn in_flight(&self) -> usize {
        self.in_flight.len()
    }

    pub fn route(&self, request_type: usize) -> &[usize] {
        &self.routes[request_type]
    }

    fn wan_delay(&mut self) -> Result<f64, FarmError> {
        if !self.spec.wan.enabled {
            return Ok(0.0);
        }
        Ok(match self.variates {
            Variates::AtMeans => self.spec.wan.mean,
            Variates::Sampled => self.wan_rng.sample_truncated_normal(
                self.spec.wan.mean,
                self.spec.wan.sigma,
                0.0,
            )?,
        })
    }

    fn service_time(&mut self, server: usize) -> Result<f64, FarmError> {
        let s = &self.spec.servers[server];
        Ok(match self.variates {
            Variates::AtMeans => s.mean,
            Variates::Sampled => {
                let (mean, sigma) = (s.mean, s.sigma());
                self.service_rng[server].sample_truncated_normal(mean, sigma, 0.0)?
            }
        })
    }

    /// Sends a request out over the WAN. Returns its id.
    pub fn submit<A: From<FarmEvent>>(
        &mut self,
        cal: &mut Calendar<A>,
        request_type: usize,
        session: u64,
    ) -> Result<u64, FarmError> {
        let id = self.next_id;
        self.next_id += 1;
        let wan_out = self.wan_delay()?;
        let key = self.in_flight.insert(Request {
            id,
            request_type,
            session,
            issued_at: cal.now(),
            wan_out,
            wan_in: 0.0,
            hops: Vec::with_capacity(self.routes[request_type].len()),
            response_time: None,
        });
        cal.schedule_in(wan_out, FarmEvent::ReachSite(key).into())?;
        Ok(id)
    }

    fn enter_hop<A: From<FarmEvent>>(
        &mut self,
        cal: &mut Calendar<A>,
        key: usize,
    ) -> Result<(), FarmError> {
        let req = &self.in_flight[key];
        let server = self.routes[req.request_type][req.hops.len()];
        let service = self.service_time(server)?;
        if let Some(done) = self.servers[server].enqueue(cal.now(), key, service)? {
            cal.schedule(done, FarmEvent::HopDone(server).into())?;
        }
        Ok(())
    }

    /// Advances the request flow. Returns the request once its response
    /// has reached the client.
    pub fn handle<A: From<FarmEvent>>(
        &mut self,
        cal: &mut Calendar<A>,
        ev: FarmEvent,
    ) -> Result<Option<Request>, FarmError> {
        match ev {
            FarmEvent::ReachSite(key) => {
                self.enter_hop(cal, key)?;
                Ok(None)
            }
            FarmEvent::HopDone(server) => {
                let now = cal.now();
                let done = self.servers[server].complete(now).ok_or_else(|| {
                    FarmError::Invalid(format!("server {server} idle at completion"))
                })?;
                if let Some(next) = done.next_completion {
                    cal.schedule(next, FarmEvent::HopDone(server).into())?;
                }
                let key = done.job;
                let req = &mut self.in_flight[key];
                req.hops.push(HopRecord {
                    server,
                    queued_at: done.queued_at,
                    started_at: done.started_at,
                    completed_at: done.completed_at,
                });
                if req.hops.len() < self.routes[req.request_type].len() {
                    self.enter_hop(cal, key)?;
                } else {
                    let wan_in = self.wan_delay()?;
                    self.in_flight[key].wan_in = wan_in;
                    cal.schedule_in(wan_in, FarmEvent::Delivered(key).into())?;
                }
                Ok(None)
            }
            FarmEvent::Delivered(key) => {
                let mut req = self.in_flight.remove(key);
                req.response_time = Some(cal.now() - req.issued_at);
                Ok(Some(req))
            }
        }
    }

    pub fn close(&mut self, at: SimTime) {
        for s in &mut self.servers {
            s.close(at);
        }
    }
}
