//! Detect a BC fault in batch and sample by sample; both give the same
//! events.

use hlle_fault::detector::{detect, DetectorConfig, OnlineDetector};
use hlle_fault::signal::{synthesize_trace, FaultScenario, FaultType, DEFAULT_DT};

fn main() -> hlle_fault::Result<()> {
    let scenario = FaultScenario {
        fault_type: FaultType::BC,
        resistance: 0.01,
        distance: 12.0,
        start_sample: 3200,
        end_sample: 5200,
        noise_std: 0.0,
        seed: 3,
    };
    let trace = synthesize_trace(&scenario, 14000, DEFAULT_DT)?;
    let cfg = DetectorConfig::default();

    let batch = detect(&trace, &cfg)?;
    let below = batch.pvalues.iter().filter(|&(_, p)| p < cfg.alpha).count();
    println!(
        "{} segments, {} tested, {below} below alpha = {}",
        batch.segment_count,
        batch.pvalues.len(),
        cfg.alpha
    );
    for e in &batch.events {
        println!(
            "batch event {}: segments {}..={} (samples {}..{}), latency {} samples",
            e.event_id, e.start_segment, e.end_segment, e.start_sample, e.end_sample, e.detection_latency_samples
        );
    }

    let mut online = OnlineDetector::new(cfg)?;
    let mut events = Vec::new();
    for r in &trace.records {
        if let (_, Some(e)) = online.push(r.channels())? {
            println!(
                "online event {} closed after segment {}",
                e.event_id,
                online.segments_seen()
            );
            events.push(e);
        }
    }
    events.extend(online.finish());
    assert_eq!(events, batch.events);
    println!("online and batch agree");
    Ok(())
}
