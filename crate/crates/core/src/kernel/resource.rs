use std::collections::VecDeque;

use serde::Serialize;

use super::{KernelError, SimTime};

#[derive(Debug)]
struct Queued<J> {
    job: J,
    service_time: f64,
    queued_at: SimTime,
}

#[derive(Debug)]
struct Serving<J> {
    job: J,
    queued_at: SimTime,
    started_at: SimTime,
    completes_at: SimTime,
}

/// The job that just left a resource, plus the completion time of the job
/// that started service in its place (if any). The caller schedules that
/// completion on its calendar.
#[derive(Debug)]
pub struct Completion<J> {
    pub job: J,
    pub queued_at: SimTime,
    pub started_at: SimTime,
    pub completed_at: SimTime,
    pub next_completion: Option<SimTime>,
}

/// Time-integrated observations of one resource over `[measure_from, close]`.
#[derive(Debug, Clone, Serialize)]
pub struct ResourceStats {
    pub arrivals: u64,
    pub completions: u64,
    /// Completions that happened inside the measurement window.
    pub window_completions: u64,
    pub busy_time: f64,
    pub queue_area: f64,
    pub max_queue: usize,
    pub samples: Vec<(f64, usize)>,
    measure_from: f64,
    sample_interval: Option<f64>,
    next_sample: f64,
    last_change: f64,
    closed_at: Option<f64>,
}

impl ResourceStats {
    fn new(measure_from: f64, sample_interval: Option<f64>) -> Self {
        ResourceStats {
            arrivals: 0,
            completions: 0,
            window_completions: 0,
            busy_time: 0.0,
            queue_area: 0.0,
            max_queue: 0,
            samples: Vec::new(),
            measure_from,
            sample_interval,
            next_sample: measure_from,
            last_change: 0.0,
            closed_at: None,
        }
    }

    // Integrates the state that held over (last_change, now].
    fn advance(&mut self, now: f64, queue_len: usize, busy: bool) {
        let start = self.last_change.max(self.measure_from);
        if now > start {
            let dt = now - start;
            self.queue_area += queue_len as f64 * dt;
            if busy {
                self.busy_time += dt;
            }
        }
        if let Some(step) = self.sample_interval {
            while self.next_sample <= now {
                self.samples.push((self.next_sample, queue_len));
                self.next_sample += step;
            }
        }
        self.last_change = self.last_change.max(now);
    }

    pub fn window(&self) -> f64 {
        self.closed_at
            .map(|c| (c - self.measure_from).max(0.0))
            .unwrap_or(0.0)
    }

    pub fn utilization(&self) -> f64 {
        let w = self.window();
        if w > 0.0 {
            (self.busy_time / w).min(1.0)
        } else {
            0.0
        }
    }

    pub fn throughput(&self) -> f64 {
        let w = self.window();
        if w > 0.0 {
            self.window_completions as f64 / w
        } else {
            0.0
        }
    }

    pub fn mean_queue_len(&self) -> f64 {
        let w = self.window();
        if w > 0.0 {
            self.queue_area / w
        } else {
            0.0
        }
    }
}

/// First-come-first-served server with an unbounded waiting line.
#[derive(Debug)]
pub struct FifoResource<J> {
    name: String,
    waiting: VecDeque<Queued<J>>,
    in_service: Option<Serving<J>>,
    stats: ResourceStats,
}

impl<J> FifoResource<J> {
    pub fn new(name: impl Into<String>) -> Self {
        Self::with_measurement(name, 0.0, None)
    }

    /// Observations start at `measure_from`; if `sample_interval` is set the
    /// waiting-line length is sampled on that grid.
    pub fn with_measurement(
        name: impl Into<String>,
        measure_from: f64,
        sample_interval: Option<f64>,
    ) -> Self {
        FifoResource {
            name: name.into(),
            waiting: VecDeque::new(),
            in_service: None,
            stats: ResourceStats::new(measure_from, sample_interval.filter(|s| *s > 0.0)),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn queue_len(&self) -> usize {
        self.waiting.len()
    }

    pub fn is_busy(&self) -> bool {
        self.in_service.is_some()
    }

    pub fn in_system(&self) -> usize {
        self.waiting.len() + usize::from(self.is_busy())
    }

    pub fn stats(&self) -> &ResourceStats {
        &self.stats
    }

    fn note(&mut self, now: SimTime) {
        let q = self.waiting.len();
        let busy = self.in_service.is_some();
        self.stats.advance(now.secs(), q, busy);
    }

    /// Adds a job. Returns its completion time when service starts at once;
    /// otherwise the job waits and its completion is reported later by
    /// [`complete`](Self::complete).
    pub fn enqueue(
        &mut self,
        now: SimTime,
        job: J,
        service_time: f64,
    ) -> Result<Option<SimTime>, KernelError> {
        if !(service_time > 0.0) || !service_time.is_finite() {
            return Err(KernelError::InvalidParameter(format!(
                "service time must be positive, got {service_time}"
            )));
        }
        self.note(now);
        self.stats.arrivals += 1;
        if self.in_service.is_none() {
            let completes_at = now + service_time;
            self.in_service = Some(Serving {
                job,
                queued_at: now,
                started_at: now,
                completes_at,
            });
            Ok(Some(completes_at))
        } else {
            self.waiting.push_back(Queued {
                job,
                service_time,
                queued_at: now,
            });
            self.stats.max_queue = self.stats.max_queue.max(self.waiting.len());
            Ok(None)
        }
    }

    /// Finishes the job in service and starts the head of the line.
    /// Returns `None` if the resource was idle.
    pub fn complete(&mut self, now: SimTime) -> Option<Completion<J>> {
        self.note(now);
        let done = self.in_service.take()?;
        self.stats.completions += 1;
        if now.secs() >= self.stats.measure_from {
            self.stats.window_completions += 1;
        }
        let next_completion = self.waiting.pop_front().map(|q| {
            let completes_at = now + q.service_time;
            self.in_service = Some(Serving {
                job: q.job,
                queued_at: q.queued_at,
                started_at: now,
                completes_at,
            });
            completes_at
        });
        Some(Completion {
            job: done.job,
            queued_at: done.queued_at,
            started_at: done.started_at,
            completed_at: now,
            next_completion,
        })
    }

    /// When the job in service will finish, if any.
    pub fn busy_until(&self) -> Option<SimTime> {
        self.in_service.as_ref().map(|s| s.completes_at)
    }

    /// Closes the accumulators at the end of the measurement window.
    pub fn close(&mut self, at: SimTime) {
        self.note(at);
        self.stats.closed_at = Some(at.secs());
    }
}
