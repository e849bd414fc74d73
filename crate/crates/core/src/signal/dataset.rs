use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{synthesize_trace_with, FaultScenario, FaultType, SignalTrace, WaveformModel, DEFAULT_DT};
use crate::error::{Error, Result};

/// Scenario grid for [`generate_dataset`]. Cases are the cross product
/// `fault_types × resistances_ohm × distances_km`, in that nesting order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    pub fault_types: Vec<FaultType>,
    pub resistances_ohm: Vec<f64>,
    pub distances_km: Vec<f64>,
    pub samples_per_case: usize,
    pub dt_seconds: f64,
    pub noise_std: f64,
    pub seed: u64,
    pub fault_start_sample: usize,
    pub fault_end_sample: usize,
    pub model: WaveformModel,
}

impl Default for DatasetConfig {
    /// Desk-scale grid: 10 types × 3 resistances × 5 distances.
    fn default() -> Self {
        Self {
            fault_types: FaultType::ALL.to_vec(),
            resistances_ohm: vec![0.01, 2.0, 10.0],
            distances_km: vec![1.0, 6.0, 12.0, 17.0, 23.0],
            samples_per_case: 14000,
            dt_seconds: DEFAULT_DT,
            noise_std: 0.01,
            seed: 42,
            fault_start_sample: 3200,
            fault_end_sample: 5200,
            model: WaveformModel::default(),
        }
    }
}

impl DatasetConfig {
    /// Full grid: 10 types × 5 resistances × 23 locations = 1150 cases.
    pub fn paper_scale() -> Self {
        Self {
            resistances_ohm: vec![0.01, 0.2, 2.0, 6.0, 10.0],
            distances_km: (1..=23).map(f64::from).collect(),
            ..Self::default()
        }
    }

    pub fn case_count(&self) -> usize {
        self.fault_types.len() * self.resistances_ohm.len() * self.distances_km.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.case_count() == 0 {
            return Err(Error::invalid(
                "fault_types/resistances_ohm/distances_km",
                "grid is empty",
            ));
        }
        if !(self.dt_seconds > 0.0 && self.dt_seconds.is_finite()) {
            return Err(Error::invalid("dt_seconds", "must be positive"));
        }
        if self.fault_end_sample > self.samples_per_case {
            return Err(Error::invalid(
                "fault_end_sample",
                format!(
                    "{} exceeds samples_per_case {}",
                    self.fault_end_sample, self.samples_per_case
                ),
            ));
        }
        Ok(())
    }

    /// Every scenario of the grid, with per-case seeds derived from `seed`.
    pub fn scenarios(&self) -> Vec<FaultScenario> {
        let mut out = Vec::with_capacity(self.case_count());
        for &fault_type in &self.fault_types {
            for &resistance in &self.resistances_ohm {
                for &distance in &self.distances_km {
                    let idx = out.len() as u64;
                    out.push(FaultScenario {
                        fault_type,
                        resistance,
                        distance,
                        start_sample: self.fault_start_sample,
                        end_sample: self.fault_end_sample,
                        noise_std: self.noise_std,
                        seed: self.seed ^ idx.wrapping_mul(0x9E37_79B9_7F4A_7C15),
                    });
                }
            }
        }
        out
    }
}

/// One generated case of a dataset.
#[derive(Debug, Clone)]
pub struct DatasetCase {
    pub case_id: String,
    pub scenario: FaultScenario,
    pub trace: SignalTrace,
}

/// One annotated trace per grid point, synthesized in parallel; output order
/// follows [`DatasetConfig::scenarios`].
pub fn generate_dataset(config: &DatasetConfig) -> Result<Vec<DatasetCase>> {
    config.validate()?;
    config
        .scenarios()
        .into_par_iter()
        .enumerate()
        .map(|(i, scenario)| {
            let trace = synthesize_trace_with(&config.model, &scenario, config.samples_per_case, config.dt_seconds)?;
            Ok(DatasetCase {
                case_id: format!("case_{i:04}"),
                scenario,
                trace,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_sizes() {
        assert_eq!(DatasetConfig::default().case_count(), 150);
        assert_eq!(DatasetConfig::paper_scale().case_count(), 1150);
        let single = DatasetConfig {
            fault_types: vec![FaultType::CG],
            resistances_ohm: vec![2.0],
            distances_km: vec![5.0],
            samples_per_case: 6000,
            ..DatasetConfig::default()
        };
        let cases = generate_dataset(&single).unwrap();
        assert_eq!(cases.len(), 1);
        assert_eq!(cases[0].trace.len(), 6000);
    }

    #[test]
    fn seeds_are_distinct() {
        let s = DatasetConfig::default().scenarios();
        let mut seeds: Vec<u64> = s.iter().map(|c| c.seed).collect();
        seeds.sort();
        seeds.dedup();
        assert_eq!(seeds.len(), 150);
    }

    #[test]
    fn toml_round_trip() {
        let cfg = DatasetConfig::default();
        let text = toml::to_string(&cfg).unwrap();
        let back: DatasetConfig = toml::from_str(&text).unwrap();
        assert_eq!(cfg, back);
        let partial: DatasetConfig = toml::from_str("noise_std = 0.0\nfault_types = [\"AB\"]").unwrap();
        assert_eq!(partial.case_count(), 15);
    }
}
