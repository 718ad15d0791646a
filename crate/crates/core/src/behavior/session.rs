use serde::Serialize;

use super::{BehaviorError, ClassBehavior};
use crate::kernel::{RngStream, SimTime};

/// Hard cap on transitions per session; reaching it is a model error.
pub const TRANSITION_CAP: u32 = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Paid,
    AbandonedWithItems,
    AbandonedEmpty,
    CutOffByWindow,
}

/// Everything one customer did during a session.
#[derive(Debug, Clone, Serialize)]
pub struct SessionRecord {
    pub id: u64,
    /// Index of the customer class within the scenario.
    pub class: usize,
    pub visits: Vec<u32>,
    pub sojourn: Vec<f64>,
    pub requests: Vec<u64>,
    pub items_added: u32,
    pub items_paid: u32,
    pub outcome: Option<Outcome>,
    pub start: SimTime,
    pub end: Option<SimTime>,
    pub response_sum: f64,
    pub response_max: f64,
    pub responses: u32,
}

impl SessionRecord {
    pub fn requests_issued(&self) -> usize {
        self.requests.len()
    }

    pub fn think_time(&self) -> f64 {
        self.sojourn.iter().sum()
    }

    pub fn mean_response(&self) -> Option<f64> {
        (self.responses > 0).then(|| self.response_sum / self.responses as f64)
    }
}

/// Step-wise walk through the CBMG for one customer.
///
/// The driver alternates [`draw_sojourn`](Self::draw_sojourn), an optional
/// request for the current state, and [`advance`](Self::advance) until the
/// walk is absorbed.
#[derive(Debug, Clone)]
pub struct SessionWalk {
    record: SessionRecord,
    state: usize,
    transitions: u32,
    open_sojourn: Option<(SimTime, f64)>,
}

impl SessionWalk {
    pub fn start(b: &ClassBehavior, id: u64, class: usize, at: SimTime) -> Self {
        let n = b.state_count();
        let mut visits = vec![0; n];
        visits[b.entry] = 1;
        SessionWalk {
            record: SessionRecord {
                id,
                class,
                visits,
                sojourn: vec![0.0; n],
                requests: Vec::new(),
                items_added: 0,
                items_paid: 0,
                outcome: None,
                start: at,
                end: None,
                response_sum: 0.0,
                response_max: 0.0,
                responses: 0,
            },
            state: b.entry,
            transitions: 0,
            open_sojourn: None,
        }
    }

    pub fn state(&self) -> usize {
        self.state
    }

    pub fn record(&self) -> &SessionRecord {
        &self.record
    }

    pub fn has_items(&self) -> bool {
        self.record.items_added > 0
    }

    /// Think time in the current state: exponential for thinking states,
    /// zero otherwise. The draw is booked as sojourn immediately.
    pub fn draw_sojourn(
        &mut self,
        b: &ClassBehavior,
        rng: &mut RngStream,
        now: SimTime,
    ) -> Result<f64, BehaviorError> {
        let mean = b.think[self.state];
        let d = if mean > 0.0 {
            rng.sample_exponential(mean)?
        } else {
            0.0
        };
        self.record.sojourn[self.state] += d;
        self.open_sojourn = Some((now, d));
        Ok(d)
    }

    pub fn request(&self, b: &ClassBehavior) -> Option<usize> {
        b.request[self.state]
    }

    pub fn note_request(&mut self, request_id: u64) {
        self.open_sojourn = None;
        self.record.requests.push(request_id);
    }

    pub fn note_response(&mut self, response_time: f64, add_to_sojourn: bool) {
        self.record.response_sum += response_time;
        self.record.response_max = self.record.response_max.max(response_time);
        self.record.responses += 1;
        if add_to_sojourn {
            self.record.sojourn[self.state] += response_time;
        }
    }

    /// Takes one transition. Returns the outcome once the walk is absorbed.
    pub fn advance(
        &mut self,
        b: &ClassBehavior,
        rng: &mut RngStream,
        now: SimTime,
    ) -> Result<Option<Outcome>, BehaviorError> {
        self.open_sojourn = None;
        if self.transitions >= TRANSITION_CAP {
            return Err(BehaviorError::TransitionCap(TRANSITION_CAP));
        }
        self.transitions += 1;
        let next = b.sample_transition(self.state, self.has_items(), rng)?;
        self.state = next;
        self.record.visits[next] += 1;
        let s = &b.states[next];
        if s.adds_item {
            self.record.items_added += 1;
        }
        if !s.is_absorbing() {
            return Ok(None);
        }
        let outcome = if s.purchase {
            self.record.items_paid = self.record.items_added;
            Outcome::Paid
        } else if self.record.items_added > 0 {
            Outcome::AbandonedWithItems
        } else {
            Outcome::AbandonedEmpty
        };
        self.record.outcome = Some(outcome);
        self.record.end = Some(now);
        Ok(Some(outcome))
    }

    pub fn is_finished(&self) -> bool {
        self.record.outcome.is_some()
    }

    pub fn finish(self) -> SessionRecord {
        self.record
    }

    /// Closes a walk still open at the end of the window. Any think time
    /// drawn past `at` is removed from the tallies.
    pub fn cut_off(mut self, at: SimTime) -> SessionRecord {
        if let Some((since, d)) = self.open_sojourn {
            let elapsed = (at - since).max(0.0);
            if d > elapsed {
                self.record.sojourn[self.state] -= d - elapsed;
            }
        }
        self.record.outcome = Some(Outcome::CutOffByWindow);
        self.record.end = Some(at);
        self.record
    }
}

/// Walks one session to absorption with instantaneous request handling.
///
/// `dispatch` is handed every emitted request type and issue time and
/// returns the request id. If `window_end` is given, a session still open
/// then is cut off.
#[allow(clippy::too_many_arguments)]
pub fn simulate_session<F>(
    b: &ClassBehavior,
    class: usize,
    id: u64,
    transitions: &mut RngStream,
    think: &mut RngStream,
    start: SimTime,
    window_end: Option<SimTime>,
    mut dispatch: F,
) -> Result<SessionRecord, BehaviorError>
where
    F: FnMut(usize, SimTime) -> u64,
{
    let mut walk = SessionWalk::start(b, id, class, start);
    let mut clock = start;
    loop {
        let d = walk.draw_sojourn(b, think, clock)?;
        if let Some(end) = window_end {
            if (clock + d).secs() > end.secs() {
                return Ok(walk.cut_off(end));
            }
        }
        clock = clock + d;
        if let Some(req) = walk.request(b) {
            let rid = dispatch(req, clock);
            walk.note_request(rid);
            walk.note_response(0.0, false);
        }
        if walk.advance(b, transitions, clock)?.is_some() {
            return Ok(walk.finish());
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::behavior::{CbmgGraph, CustomerClass, EmptyCartPolicy};
    use crate::kernel::StreamId;

    fn forced_browse_end() -> CustomerClass {
        let mut c = CustomerClass::from_table("forced", 1.0, 0.0, 0.0, (0.0, 0.0, 1.0));
        c.name = "forced".into();
        c
    }

    #[test]
    fn forced_path_visits_browse_once() {
        let g = CbmgGraph::standard();
        let b = ClassBehavior::compile(&g, &forced_browse_end(), EmptyCartPolicy::Abandon).unwrap();
        let mut tr = RngStream::new(1, StreamId::Transitions);
        let mut th = RngStream::new(1, StreamId::ThinkTimes);
        let mut issued = Vec::new();
        let rec = simulate_session(&b, 0, 0, &mut tr, &mut th, SimTime::ZERO, None, |r, t| {
            issued.push((r, t));
            issued.len() as u64
        })
        .unwrap();
        let browse = g.state_index("Browse").unwrap();
        assert_eq!(rec.visits[browse], 1);
        assert_eq!(issued.len(), 1);
        assert_eq!(b.request_types[issued[0].0], "Browse");
        assert_eq!(rec.outcome, Some(Outcome::AbandonedEmpty));
        assert_eq!(rec.requests_issued(), 1);
        assert!(rec.sojourn[browse] > 0.0);
        assert_eq!(rec.think_time(), rec.sojourn[browse]);
    }

    #[test]
    fn paid_sessions_pay_every_item() {
        let g = CbmgGraph::standard();
        let b = ClassBehavior::compile(&g, &CustomerClass::frequent(), EmptyCartPolicy::Abandon)
            .unwrap();
        let mut tr = RngStream::new(5, StreamId::Transitions);
        let mut th = RngStream::new(5, StreamId::ThinkTimes);
        for id in 0..2000 {
            let rec = simulate_session(&b, 0, id, &mut tr, &mut th, SimTime::ZERO, None, |_, _| 0)
                .unwrap();
            assert!(rec.items_paid <= rec.items_added);
            match rec.outcome.unwrap() {
                Outcome::Paid => assert_eq!(rec.items_paid, rec.items_added),
                Outcome::AbandonedWithItems => assert!(rec.items_added > 0 && rec.items_paid == 0),
                Outcome::AbandonedEmpty => assert_eq!(rec.items_added, 0),
                Outcome::CutOffByWindow => unreachable!(),
            }
            if rec.outcome == Some(Outcome::Paid) {
                // strict cart: nobody pays for nothing
                assert!(rec.items_added > 0);
            }
        }
    }

    #[test]
    fn window_cuts_long_sessions() {
        let g = CbmgGraph::standard();
        let b = ClassBehavior::compile(&g, &CustomerClass::frequent(), EmptyCartPolicy::Abandon)
            .unwrap();
        let mut tr = RngStream::new(8, StreamId::Transitions);
        let mut th = RngStream::new(8, StreamId::ThinkTimes);
        let end = SimTime::from_secs(30.0);
        let mut cut = 0;
        for id in 0..500 {
            let rec = simulate_session(
                &b,
                0,
                id,
                &mut tr,
                &mut th,
                SimTime::ZERO,
                Some(end),
                |_, _| 0,
            )
            .unwrap();
            if rec.outcome == Some(Outcome::CutOffByWindow) {
                cut += 1;
                assert!(rec.think_time() <= 30.0 + 1e-9);
                assert_eq!(rec.end, Some(end));
            }
        }
        assert!(cut > 300);
    }
}
