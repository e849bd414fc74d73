use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{FaultScenario, FaultType, SignalRecord, SignalTrace, CHANNELS};
use crate::error::{Error, Result};

/// Constants of the parametric waveform model. All magnitudes are per-unit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WaveformModel {
    pub frequency_hz: f64,
    /// Phase angle of `va` at `t = 0`, degrees.
    pub initial_phase_deg: f64,
    pub voltage_pu: f64,
    pub current_pu: f64,
    /// Load current lag behind voltage, degrees.
    pub load_angle_deg: f64,
    /// Fault current lag behind the driving voltage, degrees.
    pub fault_angle_deg: f64,
    /// Line impedance per km used in the surge law.
    pub z_per_km: f64,
    /// Numerator of the surge law: fault current adds
    /// `current_pu * source_ohm / (R + z_per_km * d)`.
    pub source_ohm: f64,
    /// Voltage sag at infinite severity; sag is `max_sag * g / (1 + g)`.
    pub max_sag: f64,
    /// Zero-sequence share added to every faulted phase of a grounded fault.
    pub zero_sequence_ratio: f64,
    /// Decay of the asymmetrical (DC) fault current offset, in cycles.
    pub dc_offset_tau_cycles: f64,
    /// Arc distortion of the fault current, relative to its fundamental.
    pub third_harmonic: f64,
    pub fifth_harmonic: f64,
    /// Damped high-frequency oscillation launched on faulted phases at
    /// fault inception.
    pub inception_freq_hz: f64,
    pub inception_tau_cycles: f64,
    pub inception_current_ratio: f64,
    pub inception_voltage_ratio: f64,
    /// Broadband arc noise on faulted phases, relative to the fault current
    /// and voltage sag. It decays with the post-clearance ringing.
    pub arc_noise_ratio: f64,
    /// Probability that a sample carries an arc impulse; 1 gives continuous
    /// noise, small values give sparse re-strike spikes.
    pub arc_noise_density: f64,
    /// Arc ignition delay after inception before impulses appear, cycles.
    pub arc_noise_delay_cycles: f64,
    /// Post-clearance ringing: decay time constant and ring frequency.
    pub transient_tau_cycles: f64,
    pub transient_freq_hz: f64,
    /// Ringing amplitudes relative to the fault current / voltage sag.
    pub transient_current_ratio: f64,
    pub transient_voltage_ratio: f64,
    /// The ringing is tapered to exactly zero after this many cycles.
    pub transient_duration_cycles: f64,
    /// Length of the raised-cosine taper at the end of the ringing, cycles.
    pub transient_taper_cycles: f64,
}

impl Default for WaveformModel {
    fn default() -> Self {
        Self {
            frequency_hz: 60.0,
            initial_phase_deg: 0.0,
            voltage_pu: 1.0,
            current_pu: 0.2,
            load_angle_deg: 30.0,
            fault_angle_deg: 75.0,
            z_per_km: 0.4,
            source_ohm: 16.0,
            max_sag: 0.8,
            zero_sequence_ratio: 0.5,
            dc_offset_tau_cycles: 0.5,
            third_harmonic: 0.08,
            fifth_harmonic: 0.05,
            inception_freq_hz: 2000.0,
            inception_tau_cycles: 0.008,
            inception_current_ratio: 2.0,
            inception_voltage_ratio: 2.0,
            arc_noise_ratio: 3.0,
            arc_noise_density: 0.15,
            arc_noise_delay_cycles: 0.1,
            transient_tau_cycles: 2.0,
            transient_freq_hz: 450.0,
            transient_current_ratio: 0.3,
            transient_voltage_ratio: 0.5,
            transient_duration_cycles: 6.0,
            transient_taper_cycles: 2.0,
        }
    }
}

impl WaveformModel {
    /// Fault severity `g = source_ohm / (R + z_per_km * distance)`; the
    /// faulted-phase current surges to roughly `1 + g` times nominal.
    pub fn severity(&self, resistance: f64, distance: f64) -> f64 {
        self.source_ohm / (resistance + self.z_per_km * distance)
    }

    pub fn sag(&self, severity: f64) -> f64 {
        self.max_sag * severity / (1.0 + severity)
    }
}

const PHASE_OFFSET: [f64; 3] = [0.0, -TAU / 3.0, TAU / 3.0];

/// A sinusoidal fault-current source `amplitude * cos(wt + angle)` plus arc
/// harmonics, applied with `sign` to the listed phases.
struct FaultSource {
    amplitude: f64,
    angle: f64,
    targets: Vec<(usize, f64)>,
}

impl FaultSource {
    fn steady(&self, model: &WaveformModel, wt: f64) -> f64 {
        let x = wt + self.angle;
        self.amplitude * (x.cos() + model.third_harmonic * (3.0 * x).cos() + model.fifth_harmonic * (5.0 * x).cos())
    }
}

fn fault_sources(model: &WaveformModel, fault: FaultType, severity: f64) -> Vec<FaultSource> {
    let amp = model.current_pu * severity;
    let lag = model.fault_angle_deg.to_radians();
    let phases: Vec<usize> = fault.phases().iter().map(|p| p.index()).collect();
    let mut sources = Vec::new();
    if fault.grounded() {
        for &k in &phases {
            sources.push(FaultSource {
                amplitude: amp,
                angle: PHASE_OFFSET[k] - lag,
                targets: vec![(k, 1.0)],
            });
        }
        // zero-sequence share: the average faulted-phase fault current,
        // returned through ground on every faulted phase
        let (re, im) = phases.iter().fold((0.0, 0.0), |(re, im), &k| {
            (re + PHASE_OFFSET[k].cos(), im + PHASE_OFFSET[k].sin())
        });
        let mag = (re * re + im * im).sqrt() / phases.len() as f64;
        if mag > 1e-12 {
            sources.push(FaultSource {
                amplitude: amp * model.zero_sequence_ratio * mag,
                angle: im.atan2(re) - lag,
                targets: phases.iter().map(|&k| (k, 1.0)).collect(),
            });
        }
    } else {
        // line-to-line loop current driven by v_p - v_q
        let (p, q) = (phases[0], phases[1]);
        let re = PHASE_OFFSET[p].cos() - PHASE_OFFSET[q].cos();
        let im = PHASE_OFFSET[p].sin() - PHASE_OFFSET[q].sin();
        sources.push(FaultSource {
            amplitude: amp,
            angle: im.atan2(re) - lag,
            targets: vec![(p, 1.0), (q, -1.0)],
        });
    }
    sources
}

/// Grounded faults pull the faulted phase voltages toward zero; phase-to-phase
/// faults pull the two faulted voltages toward each other.
fn apply_sag(ch: &mut [f64; CHANNELS], fault: FaultType, phases: &[usize], sag: f64) {
    if fault.grounded() {
        for &k in phases {
            ch[k] *= 1.0 - sag;
        }
    } else {
        let (p, q) = (phases[0], phases[1]);
        let half = 0.5 * sag * (ch[p] - ch[q]);
        ch[p] -= half;
        ch[q] += half;
    }
}

/// Synthesize a trace with the default [`WaveformModel`].
pub fn synthesize_trace(scenario: &FaultScenario, total_samples: usize, dt: f64) -> Result<SignalTrace> {
    synthesize_trace_with(&WaveformModel::default(), scenario, total_samples, dt)
}

/// Balanced three-phase sinusoids with a fault applied inside
/// `[start_sample, end_sample)`: faulted phases gain a surge current (with a
/// decaying asymmetrical offset so the current stays continuous at onset)
/// and a voltage sag, followed by damped ringing after clearance. Gaussian
/// noise of `noise_std` is added to every channel.
pub fn synthesize_trace_with(
    model: &WaveformModel,
    scenario: &FaultScenario,
    total_samples: usize,
    dt: f64,
) -> Result<SignalTrace> {
    scenario.validate()?;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::invalid("dt", "must be positive and finite"));
    }
    if total_samples == 0 {
        return Err(Error::invalid("total_samples", "must be positive"));
    }
    if total_samples < scenario.end_sample {
        return Err(Error::invalid(
            "total_samples",
            format!("{total_samples} is shorter than the fault end {}", scenario.end_sample),
        ));
    }

    let omega = TAU * model.frequency_hz;
    let phase0 = model.initial_phase_deg.to_radians();
    let cycle = 1.0 / model.frequency_hz;
    let load_lag = model.load_angle_deg.to_radians();
    let severity = model.severity(scenario.resistance, scenario.distance);
    let sag = model.sag(severity);
    let fault = scenario.fault_type;
    let phases: Vec<usize> = fault.phases().iter().map(|p| p.index()).collect();
    let sources = fault_sources(model, fault, severity);

    let t_start = scenario.start_sample as f64 * dt;
    let t_end = scenario.end_sample as f64 * dt;
    let dc_tau = model.dc_offset_tau_cycles * cycle;
    let onset: Vec<f64> = sources
        .iter()
        .map(|s| s.steady(model, omega * t_start + phase0))
        .collect();

    let inc_tau = model.inception_tau_cycles * cycle;
    let inc_omega = TAU * model.inception_freq_hz;
    let inc_current = model.inception_current_ratio * model.current_pu * severity;
    let inc_voltage = model.inception_voltage_ratio * model.voltage_pu * sag;

    let tr_tau = model.transient_tau_cycles * cycle;
    let tr_len = model.transient_duration_cycles * cycle;
    let taper_len = model.transient_taper_cycles.min(model.transient_duration_cycles) * cycle;
    let ring = TAU * model.transient_freq_hz;
    let tr_current = model.transient_current_ratio * model.current_pu * severity;
    let tr_voltage = model.transient_voltage_ratio * model.voltage_pu * sag;

    let arc_current = model.arc_noise_ratio * model.current_pu * severity;
    let arc_voltage = model.arc_noise_ratio * model.voltage_pu * sag;
    let arc_delay = model.arc_noise_delay_cycles * cycle;

    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    let mut arc_rng = ChaCha8Rng::seed_from_u64(scenario.seed ^ 0xA5C3_5A3C_0F0F_F0F0);

    let mut records = Vec::with_capacity(total_samples);
    for n in 0..total_samples {
        let t = n as f64 * dt;
        let wt = omega * t + phase0;
        let mut ch = [0.0; CHANNELS];
        for k in 0..3 {
            ch[k] = model.voltage_pu * (wt + PHASE_OFFSET[k]).cos();
            ch[3 + k] = model.current_pu * (wt + PHASE_OFFSET[k] - load_lag).cos();
        }

        // envelope of the arc noise: full while the arc burns, then
        // following the post-clearance ringing
        let mut arc_env = 0.0;
        if n >= scenario.start_sample && n < scenario.end_sample {
            if t - t_start >= arc_delay {
                arc_env = 1.0;
            }
            apply_sag(&mut ch, fault, &phases, sag);
            let decay = (-(t - t_start) / dc_tau).exp();
            for (src, &i0) in sources.iter().zip(&onset) {
                let value = src.steady(model, wt) - i0 * decay;
                for &(k, sign) in &src.targets {
                    ch[3 + k] += sign * value;
                }
            }
            if inc_tau > 0.0 {
                let since = t - t_start;
                let env = (-since / inc_tau).exp();
                for &k in &phases {
                    // a sine start keeps the waveform continuous
                    let osc = env * (inc_omega * since).sin();
                    ch[k] -= inc_voltage * osc;
                    ch[3 + k] += inc_current * osc;
                }
            }
        } else if n >= scenario.end_sample && t - t_end < tr_len {
            let since = t - t_end;
            let taper_from = tr_len - taper_len;
            let taper = if since > taper_from && taper_len > 0.0 {
                0.5 * (1.0 + (PI * (since - taper_from) / taper_len).cos())
            } else {
                1.0
            };
            let env = (-since / tr_tau).exp() * taper;
            // re-strikes persist through the recovery window
            arc_env = taper;
            for &k in &phases {
                let osc = (ring * since + PHASE_OFFSET[k]).cos();
                ch[k] += tr_voltage * env * osc;
                ch[3 + k] += tr_current * env * osc;
            }
        }

        if arc_env > 0.0 && model.arc_noise_ratio > 0.0 {
            for &k in &phases {
                if arc_rng.random::<f64>() < model.arc_noise_density {
                    ch[k] += arc_voltage * arc_env * unit.sample(&mut arc_rng);
                    ch[3 + k] += arc_current * arc_env * unit.sample(&mut arc_rng);
                }
            }
        }
        if scenario.noise_std > 0.0 {
            for v in ch.iter_mut() {
                *v += scenario.noise_std * unit.sample(&mut rng);
            }
        }
        records.push(SignalRecord::new(t, ch));
    }
    SignalTrace::new(dt, records, Some(scenario.annotation()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scenario(fault_type: FaultType, noise_std: f64) -> FaultScenario {
        FaultScenario {
            fault_type,
            resistance: 0.01,
            distance: 1.0,
            start_sample: 3200,
            end_sample: 5200,
            noise_std,
            seed: 7,
        }
    }

    fn rms(trace: &SignalTrace, channel: usize, range: std::ops::Range<usize>) -> f64 {
        let n = range.len() as f64;
        (trace.records[range]
            .iter()
            .map(|r| r.channels()[channel].powi(2))
            .sum::<f64>()
            / n)
            .sqrt()
    }

    #[test]
    fn paper_geometry() {
        let tr = synthesize_trace(&scenario(FaultType::AG, 0.01), 14000, 5e-5).unwrap();
        assert_eq!(tr.len(), 14000);
        let meta = tr.meta.unwrap();
        assert_eq!((meta.fault_start_sample, meta.fault_end_sample), (3200, 5200));
        assert!((1.0 / (60.0 * super::super::DEFAULT_DT) - 320.0).abs() < 1e-9);
    }

    #[test]
    fn healthy_waveform_repeats_every_cycle() {
        let s = FaultScenario {
            start_sample: 13000,
            end_sample: 13001,
            ..scenario(FaultType::AG, 0.0)
        };
        let tr = synthesize_trace(&s, 14000, super::super::DEFAULT_DT).unwrap();
        for n in 0..3000 {
            let a = tr.records[n].channels();
            let b = tr.records[n + 320].channels();
            for c in 0..6 {
                assert!((a[c] - b[c]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let a = synthesize_trace(&scenario(FaultType::BCG, 0.01), 6000, 5e-5).unwrap();
        let b = synthesize_trace(&scenario(FaultType::BCG, 0.01), 6000, 5e-5).unwrap();
        assert_eq!(a, b);
        let mut other = scenario(FaultType::BCG, 0.01);
        other.seed += 1;
        let c = synthesize_trace(&other, 6000, 5e-5).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn rejects_invalid_arguments() {
        let mut s = scenario(FaultType::AG, 0.0);
        s.end_sample = s.start_sample;
        assert!(synthesize_trace(&s, 14000, 5e-5).is_err());
        let s = scenario(FaultType::AG, 0.0);
        assert!(synthesize_trace(&s, 0, 5e-5).is_err());
        assert!(synthesize_trace(&s, 14000, 0.0).is_err());
        assert!(synthesize_trace(&s, 5000, 5e-5).is_err());
    }

    #[test]
    fn faulted_phase_rms_rises_others_hold() {
        let model = WaveformModel::default();
        for fault in FaultType::ALL {
            for &(r, d) in &[(0.01, 1.0), (10.0, 23.0), (2.0, 12.0)] {
                let s = FaultScenario {
                    resistance: r,
                    distance: d,
                    ..scenario(fault, 0.0)
                };
                let tr = synthesize_trace_with(&model, &s, 6400, 5e-5).unwrap();
                let mask = fault.phase_mask();
                for k in 0..3 {
                    let pre = rms(&tr, 3 + k, 0..3200);
                    let during = rms(&tr, 3 + k, 3200..5200);
                    if mask[k] {
                        assert!(during > pre, "{fault} phase {k}: {during} <= {pre}");
                    } else {
                        assert!(((during - pre) / pre).abs() < 0.05, "{fault} phase {k}");
                    }
                }
            }
        }
    }

    #[test]
    fn current_is_continuous_at_onset() {
        let tr = synthesize_trace(&scenario(FaultType::ABCG, 0.0), 6000, super::super::DEFAULT_DT).unwrap();
        for k in 3..6 {
            let before = tr.records[3199].channels()[k];
            let at = tr.records[3200].channels()[k];
            // one-sample change of the load current is at most ~0.2 * 2pi/320
            assert!((at - before).abs() < 0.01, "channel {k} jumps {}", at - before);
        }
    }

    #[test]
    fn ringing_ends_exactly() {
        let model = WaveformModel::default();
        let s = scenario(FaultType::AB, 0.0);
        let dt = super::super::DEFAULT_DT;
        let faulted = synthesize_trace_with(&model, &s, 14000, dt).unwrap();
        let ring_end = 5200 + (model.transient_duration_cycles * 320.0) as usize;
        let clean = FaultScenario {
            start_sample: 13998,
            end_sample: 13999,
            ..s
        };
        let healthy = synthesize_trace_with(&model, &clean, 14000, dt).unwrap();
        for n in ring_end + 1..13998 {
            assert_eq!(faulted.records[n], healthy.records[n]);
        }
    }
}
