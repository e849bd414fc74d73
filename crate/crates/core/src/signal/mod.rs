//! Measurement types, file IO and the parametric fault waveform synthesizer.

mod dataset;
mod io;
mod synth;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use dataset::{generate_dataset, DatasetCase, DatasetConfig};
pub use io::{meta_path_for, read_csv, read_meta, write_csv, write_meta, CSV_HEADER};
pub use synth::{synthesize_trace, synthesize_trace_with, WaveformModel};

/// Number of measurement channels per record.
pub const CHANNELS: usize = 6;

/// Default sample period: exactly 320 samples per 60 Hz cycle.
pub const DEFAULT_DT: f64 = 1.0 / 19200.0;

/// One timestamped three-phase voltage/current sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignalRecord {
    pub t: f64,
    pub va: f64,
    pub vb: f64,
    pub vc: f64,
    pub ia: f64,
    pub ib: f64,
    pub ic: f64,
}

impl SignalRecord {
    pub fn new(t: f64, channels: [f64; CHANNELS]) -> Self {
        let [va, vb, vc, ia, ib, ic] = channels;
        Self {
            t,
            va,
            vb,
            vc,
            ia,
            ib,
            ic,
        }
    }

    pub fn channels(&self) -> [f64; CHANNELS] {
        [self.va, self.vb, self.vc, self.ia, self.ib, self.ic]
    }

    pub fn is_valid(&self) -> bool {
        self.t.is_finite() && self.t >= 0.0 && self.channels().iter().all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Phase {
    A,
    B,
    C,
}

impl Phase {
    pub const ALL: [Phase; 3] = [Phase::A, Phase::B, Phase::C];

    pub fn index(self) -> usize {
        self as usize
    }
}

/// The ten short-circuit fault types of the catalog.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FaultType {
    AG,
    BG,
    CG,
    AB,
    BC,
    CA,
    ABG,
    BCG,
    CAG,
    ABCG,
}

impl FaultType {
    pub const ALL: [FaultType; 10] = [
        FaultType::AG,
        FaultType::BG,
        FaultType::CG,
        FaultType::AB,
        FaultType::BC,
        FaultType::CA,
        FaultType::ABG,
        FaultType::BCG,
        FaultType::CAG,
        FaultType::ABCG,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FaultType::AG => "AG",
            FaultType::BG => "BG",
            FaultType::CG => "CG",
            FaultType::AB => "AB",
            FaultType::BC => "BC",
            FaultType::CA => "CA",
            FaultType::ABG => "ABG",
            FaultType::BCG => "BCG",
            FaultType::CAG => "CAG",
            FaultType::ABCG => "ABCG",
        }
    }

    /// Faulted phases, in A-B-C order.
    pub fn phases(self) -> Vec<Phase> {
        let name = self.name();
        Phase::ALL
            .into_iter()
            .filter(|p| {
                let c = match p {
                    Phase::A => 'A',
                    Phase::B => 'B',
                    Phase::C => 'C',
                };
                name.contains(c)
            })
            .collect()
    }

    pub fn phase_mask(self) -> [bool; 3] {
        let mut mask = [false; 3];
        for p in self.phases() {
            mask[p.index()] = true;
        }
        mask
    }

    pub fn grounded(self) -> bool {
        self.name().ends_with('G')
    }

    /// Position in [`FaultType::ALL`].
    pub fn ordinal(self) -> usize {
        Self::ALL.iter().position(|&f| f == self).expect("catalog member")
    }
}

impl fmt::Display for FaultType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FaultType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|f| f.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::invalid("fault_type", format!("unknown fault type `{s}`")))
    }
}

/// Ground-truth annotation of a synthesized trace; persisted as the
/// `.meta.json` sidecar.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FaultAnnotation {
    pub fault_type: FaultType,
    pub fault_start_sample: usize,
    pub fault_end_sample: usize,
    pub resistance_ohm: f64,
    pub distance_km: f64,
    pub seed: u64,
}

/// A uniformly sampled measurement stream.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalTrace {
    pub dt: f64,
    pub records: Vec<SignalRecord>,
    pub meta: Option<FaultAnnotation>,
}

impl SignalTrace {
    /// Build a trace, checking timestamp uniformity and annotation bounds.
    pub fn new(dt: f64, records: Vec<SignalRecord>, meta: Option<FaultAnnotation>) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::invalid("dt", "must be positive and finite"));
        }
        if let Some(bad) = records.iter().position(|r| !r.is_valid()) {
            return Err(Error::invalid(
                "records",
                format!("record {bad} has a negative time or non-finite channel"),
            ));
        }
        if let Some(row) = first_nonuniform(&records, dt) {
            return Err(Error::invalid(
                "records",
                format!("timestamp at record {row} breaks the uniform period {dt}"),
            ));
        }
        if let Some(m) = &meta {
            if !(m.fault_start_sample < m.fault_end_sample && m.fault_end_sample <= records.len()) {
                return Err(Error::invalid(
                    "meta",
                    format!(
                        "fault window {}..{} outside 0..{}",
                        m.fault_start_sample,
                        m.fault_end_sample,
                        records.len()
                    ),
                ));
            }
        }
        Ok(Self { dt, records, meta })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Channel values as 6-vectors.
    pub fn points(&self) -> Vec<[f64; CHANNELS]> {
        self.records.iter().map(SignalRecord::channels).collect()
    }

    /// Concatenate traces end to end, re-timing so the result stays
    /// uniformly sampled. Annotations are dropped.
    pub fn concatenate(traces: &[SignalTrace]) -> Result<SignalTrace> {
        let dt = traces.first().ok_or(Error::EmptyInput("trace list"))?.dt;
        let mut records = Vec::with_capacity(traces.iter().map(|t| t.len()).sum());
        for tr in traces {
            if ((tr.dt - dt) / dt).abs() > 1e-9 {
                return Err(Error::invalid("dt", "traces have different sample periods"));
            }
            for r in &tr.records {
                let t = records.len() as f64 * dt;
                records.push(SignalRecord::new(t, r.channels()));
            }
        }
        Ok(SignalTrace {
            dt,
            records,
            meta: None,
        })
    }
}

/// Index of the first record whose spacing from its predecessor differs from
/// `dt` by more than 1e-9 relative.
pub(crate) fn first_nonuniform(records: &[SignalRecord], dt: f64) -> Option<usize> {
    records
        .windows(2)
        .position(|w| ((w[1].t - w[0].t) - dt).abs() > 1e-9 * dt.max(w[1].t.abs() * 1e-3))
        .map(|i| i + 1)
}

/// One fault to synthesize.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FaultScenario {
    pub fault_type: FaultType,
    pub resistance: f64,
    pub distance: f64,
    pub start_sample: usize,
    pub end_sample: usize,
    pub noise_std: f64,
    pub seed: u64,
}

impl FaultScenario {
    pub fn validate(&self) -> Result<()> {
        if !(self.resistance > 0.0 && self.resistance.is_finite()) {
            return Err(Error::invalid("resistance", "must be positive"));
        }
        if !(self.distance > 0.0 && self.distance.is_finite()) {
            return Err(Error::invalid("distance", "must be positive"));
        }
        if self.start_sample >= self.end_sample {
            return Err(Error::invalid(
                "start_sample",
                format!("fault window {}..{} is empty", self.start_sample, self.end_sample),
            ));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(Error::invalid("noise_std", "must be non-negative"));
        }
        Ok(())
    }

    pub fn annotation(&self) -> FaultAnnotation {
        FaultAnnotation {
            fault_type: self.fault_type,
            fault_start_sample: self.start_sample,
            fault_end_sample: self.end_sample,
            resistance_ohm: self.resistance,
            distance_km: self.distance,
            seed: self.seed,
        }
    }
}
