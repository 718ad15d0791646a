#![allow(dead_code)]

use ecomsim::kernel::{Calendar, FifoResource, RngStream, SimTime, StreamId};

#[derive(Clone, Copy)]
enum Ev {
    Arrival,
    Done,
}

/// Mean queueing delay of `jobs` customers through one FIFO server fed by
/// a Poisson stream. Returns `(mean wait, mean service, mean squared service)`.
pub fn single_queue(
    lambda: f64,
    jobs: usize,
    seed: u64,
    mut service: impl FnMut(&mut RngStream) -> f64,
) -> (f64, f64, f64) {
    let mut arrivals = RngStream::new(seed, StreamId::Arrivals);
    let mut svc = RngStream::new(seed, StreamId::Server(0));
    let mut cal: Calendar<Ev> = Calendar::new();
    let mut server: FifoResource<()> = FifoResource::new("S");
    let (mut issued, mut done) = (0usize, 0usize);
    let (mut wait, mut s1, mut s2) = (0.0, 0.0, 0.0);
    let gap = arrivals.sample_exponential(1.0 / lambda).unwrap();
    cal.schedule(SimTime::from_secs(gap), Ev::Arrival).unwrap();
    while let Some(ev) = cal.next_event(SimTime::from_secs(f64::MAX)) {
        let now = cal.now();
        match ev.action {
            Ev::Arrival => {
                issued += 1;
                let s = service(&mut svc);
                s1 += s;
                s2 += s * s;
                if let Some(at) = server.enqueue(now, (), s).unwrap() {
                    cal.schedule(at, Ev::Done).unwrap();
                }
                if issued < jobs {
                    let gap = arrivals.sample_exponential(1.0 / lambda).unwrap();
                    cal.schedule_in(gap, Ev::Arrival).unwrap();
                }
            }
            Ev::Done => {
                let c = server.complete(now).unwrap();
                wait += c.started_at - c.queued_at;
                done += 1;
                if let Some(at) = c.next_completion {
                    cal.schedule(at, Ev::Done).unwrap();
                }
            }
        }
    }
    assert_eq!(done, jobs);
    let n = jobs as f64;
    (wait / n, s1 / n, s2 / n)
}

/// Pollaczek–Khinchine mean wait λE[S²] / (2(1 − λE[S])).
pub fn pk_wait(lambda: f64, es: f64, es2: f64) -> f64 {
    lambda * es2 / (2.0 * (1.0 - lambda * es))
}
