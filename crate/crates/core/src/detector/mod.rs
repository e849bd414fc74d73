//! Segment-wise fault detection: HLLE per segment, rank test against a
//! reference segment, and a threshold state machine over the p-value series.

mod events;
mod online;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hlle::{hlle_embed, Embedding1D, HlleConfig};
use crate::ranktest::mann_whitney_u_with_tolerance;
use crate::signal::{SignalTrace, CHANNELS};

pub use events::{detect_events, EventTracker, FaultEvent, FEATURE_DIM};
pub use online::OnlineDetector;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorConfig {
    pub segment_len: usize,
    pub alpha: f64,
    pub termination_run: usize,
    pub reference_index: usize,
    /// HLLE coordinates closer than this are ranked as ties. Congruent
    /// segments embed identically only up to round-off.
    pub tie_tolerance: f64,
    pub hlle: HlleConfig,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            segment_len: 20,
            alpha: 0.9892,
            termination_run: 8,
            reference_index: 0,
            tie_tolerance: 1e-6,
            hlle: HlleConfig::default(),
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        self.hlle.validate(CHANNELS)?;
        if self.segment_len < self.hlle.k_neighbors + 1 {
            return Err(Error::invalid(
                "segment_len",
                format!(
                    "{} is below the HLLE minimum of {} points",
                    self.segment_len,
                    self.hlle.k_neighbors + 1
                ),
            ));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::invalid("alpha", "must lie in [0, 1]"));
        }
        if self.termination_run == 0 {
            return Err(Error::invalid("termination_run", "must be at least 1"));
        }
        if !(self.tie_tolerance >= 0.0 && self.tie_tolerance.is_finite()) {
            return Err(Error::invalid("tie_tolerance", "must be non-negative"));
        }
        Ok(())
    }
}

/// A fixed-length window of the stream with its HLLE embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub index: usize,
    pub start: usize,
    pub end: usize,
    pub raw: Vec<[f64; CHANNELS]>,
    pub hlle_coords: Embedding1D,
}

impl Segment {
    pub fn embed(index: usize, start: usize, raw: Vec<[f64; CHANNELS]>, cfg: &HlleConfig) -> Result<Self> {
        let hlle_coords = hlle_embed(&raw, cfg)?;
        Ok(Self {
            index,
            start,
            end: start + raw.len(),
            raw,
            hlle_coords,
        })
    }

    /// Channel means followed by the mean HLLE coordinate.
    pub fn features(&self) -> [f64; FEATURE_DIM] {
        let mut f = [0.0; FEATURE_DIM];
        let n = self.raw.len() as f64;
        for row in &self.raw {
            for c in 0..CHANNELS {
                f[c] += row[c];
            }
        }
        for v in f.iter_mut().take(CHANNELS) {
            *v /= n;
        }
        f[CHANNELS] = self.hlle_coords.mean();
        f
    }
}

/// Number of whole segments in a stream of `samples` samples.
pub fn segment_count(samples: usize, segment_len: usize) -> usize {
    if segment_len == 0 {
        0
    } else {
        samples / segment_len
    }
}

/// Cut the trace into consecutive non-overlapping segments (a trailing
/// partial window is dropped) and embed each one.
pub fn segment_stream(trace: &SignalTrace, cfg: &DetectorConfig) -> Result<Vec<Segment>> {
    cfg.validate()?;
    let count = segment_count(trace.len(), cfg.segment_len);
    if count == 0 {
        return Err(Error::invalid(
            "trace",
            format!(
                "{} samples is shorter than one segment of {}",
                trace.len(),
                cfg.segment_len
            ),
        ));
    }
    (0..count)
        .into_par_iter()
        .map(|i| {
            let start = i * cfg.segment_len;
            let raw = trace.records[start..start + cfg.segment_len]
                .iter()
                .map(|r| r.channels())
                .collect();
            Segment::embed(i, start, raw, &cfg.hlle)
        })
        .collect()
}

/// Rank-test p-values of every non-reference segment against the reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PValueSeries {
    pub reference_index: usize,
    pub alpha: f64,
    /// Segment ordinals, ascending, excluding the reference.
    pub segment_indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl PValueSeries {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.segment_indices.iter().copied().zip(self.values.iter().copied())
    }
}

pub fn pvalue_series(segments: &[Segment], cfg: &DetectorConfig) -> Result<PValueSeries> {
    if segments.len() < 2 {
        return Err(Error::TooFewPoints {
            required: 2,
            actual: segments.len(),
        });
    }
    let reference = segments.get(cfg.reference_index).ok_or_else(|| {
        Error::invalid(
            "reference_index",
            format!("{} is outside 0..{}", cfg.reference_index, segments.len()),
        )
    })?;
    if reference.hlle_coords.degenerate {
        return Err(Error::DegenerateReference { index: reference.index });
    }
    let pairs: Vec<(usize, f64)> = segments
        .par_iter()
        .filter(|s| s.index != reference.index)
        .map(|s| {
            let r =
                mann_whitney_u_with_tolerance(&reference.hlle_coords.coords, &s.hlle_coords.coords, cfg.tie_tolerance)?;
            Ok((s.index, r.p_value))
        })
        .collect::<Result<_>>()?;
    let (segment_indices, values) = pairs.into_iter().unzip();
    Ok(PValueSeries {
        reference_index: reference.index,
        alpha: cfg.alpha,
        segment_indices,
        values,
    })
}

/// Attach first-segment features to events found by [`detect_events`].
pub fn extract_features(event: &mut FaultEvent, segments: &[Segment]) -> Result<()> {
    let seg = segments
        .iter()
        .find(|s| s.index == event.start_segment)
        .ok_or_else(|| {
            Error::invalid(
                "event",
                format!("start segment {} not in segment list", event.start_segment),
            )
        })?;
    event.features = seg.features().to_vec();
    Ok(())
}

/// Threshold for a fault-free calibration span of segment ordinals: the
/// smallest p-value in the span minus a 1e-4 margin.
pub fn calibrate_alpha(pvals: &PValueSeries, span: std::ops::Range<usize>) -> Result<f64> {
    let min = pvals
        .iter()
        .filter(|(i, _)| span.contains(i))
        .map(|(_, p)| p)
        .reduce(f64::min)
        .ok_or_else(|| Error::invalid("calibration span", format!("{span:?} holds no p-values")))?;
    Ok((min - 1e-4).max(0.0))
}

/// Everything produced by a batch detection run.
#[derive(Debug, Clone)]
pub struct Detection {
    pub segment_count: usize,
    pub pvalues: PValueSeries,
    pub events: Vec<FaultEvent>,
}

/// Segment, test and track a whole trace; events carry their features.
pub fn detect(trace: &SignalTrace, cfg: &DetectorConfig) -> Result<Detection> {
    let segments = segment_stream(trace, cfg)?;
    let pvalues = pvalue_series(&segments, cfg)?;
    let mut events = detect_events(&pvalues, cfg.termination_run, cfg.segment_len);
    for e in &mut events {
        extract_features(e, &segments)?;
    }
    Ok(Detection {
        segment_count: segments.len(),
        pvalues,
        events,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{synthesize_trace, FaultScenario, FaultType, SignalRecord, DEFAULT_DT};

    /// Fault-free samples; the one faulted trailing sample never fills a
    /// segment.
    fn healthy(samples: usize) -> SignalTrace {
        let s = FaultScenario {
            fault_type: FaultType::AG,
            resistance: 1.0,
            distance: 1.0,
            start_sample: samples,
            end_sample: samples + 1,
            noise_std: 0.0,
            seed: 1,
        };
        synthesize_trace(&s, samples + 1, DEFAULT_DT).unwrap()
    }

    #[test]
    fn segment_counts() {
        assert_eq!(segment_count(14000, 20), 700);
        assert_eq!(segment_count(16_100_000, 20), 805_000);
        let tr = healthy(18);
        assert!(segment_stream(&tr, &DetectorConfig::default()).is_err());
    }

    #[test]
    fn constant_window_features() {
        let raw = vec![[2.5; CHANNELS]; 20];
        let seg = Segment::embed(0, 0, raw, &HlleConfig::default()).unwrap();
        assert!(seg.hlle_coords.degenerate);
        assert_eq!(seg.features(), [2.5, 2.5, 2.5, 2.5, 2.5, 2.5, 0.0]);
    }

    #[test]
    fn degenerate_reference_is_refused() {
        let recs: Vec<_> = (0..60)
            .map(|i| {
                let v = if i < 20 { 1.0 } else { (i as f64).sin() };
                SignalRecord::new(i as f64, [v, 2.0 * v, v * v, -v, 0.5, v])
            })
            .collect();
        let tr = SignalTrace::new(1.0, recs, None).unwrap();
        let cfg = DetectorConfig::default();
        let segs = segment_stream(&tr, &cfg).unwrap();
        assert!(matches!(
            pvalue_series(&segs, &cfg),
            Err(Error::DegenerateReference { index: 0 })
        ));
    }

    #[test]
    fn stationary_stream_stays_above_alpha() {
        let tr = healthy(3200);
        let cfg = DetectorConfig::default();
        let segs = segment_stream(&tr, &cfg).unwrap();
        let p = pvalue_series(&segs, &cfg).unwrap();
        assert_eq!(p.len(), 159);
        assert!(p.values.iter().all(|&v| v >= cfg.alpha), "{:?}", p.values);
    }

    #[test]
    fn calibration_uses_span_minimum() {
        let p = PValueSeries {
            reference_index: 0,
            alpha: 0.9,
            segment_indices: vec![1, 2, 3, 4],
            values: vec![1.0, 0.995, 0.2, 0.999],
        };
        assert!((calibrate_alpha(&p, 1..3).unwrap() - 0.9949).abs() < 1e-12);
        assert!(calibrate_alpha(&p, 10..20).is_err());
    }
}
