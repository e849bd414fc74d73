use serde::{Deserialize, Serialize};

use super::PValueSeries;

/// Six channel means plus the mean HLLE coordinate.
pub const FEATURE_DIM: usize = 7;

/// A detected disturbance, in segment ordinals of the analysed stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaultEvent {
    pub event_id: usize,
    pub start_segment: usize,
    /// Last below-threshold segment before the terminating run.
    pub end_segment: usize,
    /// Segment whose p-value completed the terminating run; `None` when the
    /// stream ended first.
    pub termination_segment: Option<usize>,
    pub start_sample: usize,
    pub end_sample: usize,
    /// Samples from the event's first sample until the segment that opened
    /// it was complete, i.e. until the detector could know.
    pub detection_latency_samples: usize,
    pub features: Vec<f64>,
    /// Source case when several traces were analysed together.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub case_id: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum State {
    Idle,
    InEvent { start: usize, last_dip: usize, run: usize },
}

/// Incremental form of the event state machine. Feed p-values in segment
/// order; closed events come back from [`EventTracker::push`] and
/// [`EventTracker::finish`].
#[derive(Debug, Clone)]
pub struct EventTracker {
    alpha: f64,
    termination_run: usize,
    segment_len: usize,
    state: State,
    next_id: usize,
    last_segment: Option<usize>,
}

impl EventTracker {
    pub fn new(alpha: f64, termination_run: usize, segment_len: usize) -> Self {
        Self {
            alpha,
            termination_run: termination_run.max(1),
            segment_len,
            state: State::Idle,
            next_id: 0,
            last_segment: None,
        }
    }

    pub fn in_event(&self) -> bool {
        matches!(self.state, State::InEvent { .. })
    }

    /// Start segment of the open event, if any.
    pub fn open_start(&self) -> Option<usize> {
        match self.state {
            State::InEvent { start, .. } => Some(start),
            State::Idle => None,
        }
    }

    fn close(&mut self, start: usize, last_dip: usize, termination: Option<usize>) -> FaultEvent {
        let id = self.next_id;
        self.next_id += 1;
        self.state = State::Idle;
        FaultEvent {
            event_id: id,
            start_segment: start,
            end_segment: last_dip,
            termination_segment: termination,
            start_sample: start * self.segment_len,
            end_sample: (last_dip + 1) * self.segment_len,
            detection_latency_samples: self.segment_len,
            features: Vec::new(),
            case_id: None,
        }
    }

    pub fn push(&mut self, segment: usize, p: f64) -> Option<FaultEvent> {
        self.last_segment = Some(segment);
        let below = p < self.alpha;
        match self.state {
            State::Idle => {
                if below {
                    self.state = State::InEvent {
                        start: segment,
                        last_dip: segment,
                        run: 0,
                    };
                }
                None
            }
            State::InEvent { start, last_dip, run } => {
                if below {
                    self.state = State::InEvent {
                        start,
                        last_dip: segment,
                        run: 0,
                    };
                    None
                } else if run + 1 >= self.termination_run {
                    Some(self.close(start, last_dip, Some(segment)))
                } else {
                    self.state = State::InEvent {
                        start,
                        last_dip,
                        run: run + 1,
                    };
                    None
                }
            }
        }
    }

    /// Close an event still open at the end of the stream.
    pub fn finish(&mut self) -> Option<FaultEvent> {
        match self.state {
            State::InEvent { start, last_dip, .. } => Some(self.close(start, last_dip, None)),
            State::Idle => None,
        }
    }
}

/// Run the state machine over a whole series. Events get ids in order and
/// empty feature vectors.
pub fn detect_events(pvals: &PValueSeries, termination_run: usize, segment_len: usize) -> Vec<FaultEvent> {
    let mut tracker = EventTracker::new(pvals.alpha, termination_run, segment_len);
    let mut events: Vec<FaultEvent> = pvals.iter().filter_map(|(i, p)| tracker.push(i, p)).collect();
    events.extend(tracker.finish());
    events
}
