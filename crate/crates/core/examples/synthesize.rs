//! Synthesize one fault case and print per-channel RMS before, during and
//! after the fault window.

use hlle_fault::signal::{synthesize_trace, FaultScenario, FaultType, DEFAULT_DT};

fn rms(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v * v, n + 1));
    (sum / n as f64).sqrt()
}

fn main() -> hlle_fault::Result<()> {
    let scenario = FaultScenario {
        fault_type: FaultType::AG,
        resistance: 2.0,
        distance: 6.0,
        start_sample: 3200,
        end_sample: 5200,
        noise_std: 0.0,
        seed: 42,
    };
    let trace = synthesize_trace(&scenario, 14000, DEFAULT_DT)?;
    println!(
        "{} samples at dt = {:.3e} s, fault {}",
        trace.len(),
        trace.dt,
        scenario.fault_type
    );
    println!(
        "{:>8} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8}",
        "window", "va", "vb", "vc", "ia", "ib", "ic"
    );
    for (name, range) in [("pre", 0..3200), ("fault", 3200..5200), ("post", 5200..14000)] {
        let rows = &trace.records[range];
        let cols: Vec<f64> = (0..6).map(|c| rms(rows.iter().map(|r| r.channels()[c]))).collect();
        println!(
            "{name:>8} {:>8.3} {:>8.3} {:>8.3} {:>8.3} {:>8.3} {:>8.3}",
            cols[0], cols[1], cols[2], cols[3], cols[4], cols[5]
        );
    }
    Ok(())
}
