use super::{DetectorConfig, EventTracker, FaultEvent, Segment};
use crate::error::{Error, Result};
use crate::ranktest::mann_whitney_u_with_tolerance;
use crate::signal::CHANNELS;

/// Sample-at-a-time detector. Segments are embedded as they fill; the
/// segment at `reference_index` becomes the reference and earlier segments
/// are not tested.
#[derive(Debug, Clone)]
pub struct OnlineDetector {
    cfg: DetectorConfig,
    buffer: Vec<[f64; CHANNELS]>,
    next_segment: usize,
    reference: Option<Vec<f64>>,
    tracker: EventTracker,
    open_features: Option<Vec<f64>>,
}

impl OnlineDetector {
    pub fn new(cfg: DetectorConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            buffer: Vec::with_capacity(cfg.segment_len),
            next_segment: 0,
            reference: None,
            tracker: EventTracker::new(cfg.alpha, cfg.termination_run, cfg.segment_len),
            open_features: None,
            cfg,
        })
    }

    /// Segments completed so far.
    pub fn segments_seen(&self) -> usize {
        self.next_segment
    }

    pub fn in_event(&self) -> bool {
        self.tracker.in_event()
    }

    /// Feed one sample. Returns the p-value of a segment completed by this
    /// sample (if tested) and any event it closed.
    pub fn push(&mut self, sample: [f64; CHANNELS]) -> Result<(Option<f64>, Option<FaultEvent>)> {
        if sample.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: "online sample",
            });
        }
        self.buffer.push(sample);
        if self.buffer.len() < self.cfg.segment_len {
            return Ok((None, None));
        }
        let index = self.next_segment;
        self.next_segment += 1;
        let raw = std::mem::replace(&mut self.buffer, Vec::with_capacity(self.cfg.segment_len));
        let seg = Segment::embed(index, index * self.cfg.segment_len, raw, &self.cfg.hlle)?;

        let reference = match &self.reference {
            Some(r) => r,
            None => {
                if index == self.cfg.reference_index {
                    if seg.hlle_coords.degenerate {
                        return Err(Error::DegenerateReference { index });
                    }
                    self.reference = Some(seg.hlle_coords.coords);
                }
                return Ok((None, None));
            }
        };
        let p = mann_whitney_u_with_tolerance(reference, &seg.hlle_coords.coords, self.cfg.tie_tolerance)?.p_value;
        let was_open = self.tracker.in_event();
        let closed = self.tracker.push(index, p);
        if !was_open && self.tracker.in_event() {
            self.open_features = Some(seg.features().to_vec());
        }
        Ok((Some(p), closed.map(|e| self.attach(e))))
    }

    /// Close an event still open; call once at the end of the stream.
    pub fn finish(&mut self) -> Option<FaultEvent> {
        self.tracker.finish().map(|e| self.attach(e))
    }

    fn attach(&mut self, mut event: FaultEvent) -> FaultEvent {
        event.features = self.open_features.take().unwrap_or_default();
        event
    }
}
