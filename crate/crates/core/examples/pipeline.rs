//! Run the whole chain on a reduced noise-free grid and list what it wrote.
//!
//! `cargo run --release --example pipeline -- [out_dir]`

use hlle_fault::pipeline::{run_pipeline, PipelineConfig};
use hlle_fault::signal::FaultType;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "target/example-pipeline".into());
    let mut cfg = PipelineConfig {
        out_dir: out.into(),
        ..PipelineConfig::default()
    };
    cfg.dataset.noise_std = 0.0;
    cfg.dataset.fault_types = vec![FaultType::AG, FaultType::BC, FaultType::ABG, FaultType::ABCG];
    cfg.dataset.resistances_ohm = vec![0.01, 10.0];
    cfg.gmm.k = 4;
    let report = run_pipeline(&cfg)?;
    for n in &report.notices {
        println!("notice: {n}");
    }
    println!("{}", report.summary());
    let mut files: Vec<_> = std::fs::read_dir(&cfg.out_dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<_, _>>()?;
    files.sort();
    for f in files {
        println!("  {}", f.display());
    }
    Ok(())
}
