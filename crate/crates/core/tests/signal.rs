use hlle_fault::ranktest::mann_whitney_u;
use hlle_fault::signal::{
    meta_path_for, read_csv, read_meta, synthesize_trace, write_csv, write_meta, FaultScenario, FaultType, DEFAULT_DT,
};
use proptest::prelude::*;

fn scenario(fault_type: FaultType, noise_std: f64, seed: u64) -> FaultScenario {
    FaultScenario {
        fault_type,
        resistance: 2.0,
        distance: 6.0,
        start_sample: 3200,
        end_sample: 5200,
        noise_std,
        seed,
    }
}

#[test]
fn csv_round_trip_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let trace = synthesize_trace(&scenario(FaultType::CAG, 0.01, 9), 14000, DEFAULT_DT).unwrap();
    let first = dir.path().join("a.csv");
    write_csv(&first, &trace).unwrap();
    write_meta(&meta_path_for(&first), trace.meta.as_ref().unwrap()).unwrap();

    let back = read_csv(&first).unwrap();
    assert_eq!(back.len(), 14000);
    assert_eq!(back.meta, trace.meta);
    assert_eq!(back.records, trace.records);

    let second = dir.path().join("b.csv");
    write_csv(&second, &back).unwrap();
    assert_eq!(std::fs::read(&first).unwrap(), std::fs::read(&second).unwrap());
    assert_eq!(read_meta(&meta_path_for(&first)).unwrap(), trace.meta.unwrap());
}

#[test]
fn csv_without_sidecar_has_no_annotation() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("plain.csv");
    write_csv(
        &p,
        &synthesize_trace(&scenario(FaultType::AB, 0.0, 1), 6000, DEFAULT_DT).unwrap(),
    )
    .unwrap();
    assert!(read_csv(&p).unwrap().meta.is_none());
}

#[test]
fn noise_free_prefault_windows_are_indistinguishable() {
    for fault in FaultType::ALL {
        let tr = synthesize_trace(&scenario(fault, 0.0, 3), 6000, DEFAULT_DT).unwrap();
        let pts = tr.points();
        // 16 segments tile one cycle, so windows 16 apart cover the same phase
        for a in 0..16 {
            for b in (a + 16..160).step_by(16) {
                for c in 0..6 {
                    let x: Vec<f64> = pts[a * 20..a * 20 + 20].iter().map(|p| p[c]).collect();
                    let y: Vec<f64> = pts[b * 20..b * 20 + 20].iter().map(|p| p[c]).collect();
                    let p = mann_whitney_u(&x, &y).unwrap().p_value;
                    assert!(p >= 0.5, "{fault} windows {a},{b} channel {c}: p = {p}");
                }
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn synthesis_is_deterministic(
        type_index in 0usize..10,
        resistance in 0.01..20.0f64,
        distance in 0.5..30.0f64,
        noise_std in 0.0..0.05f64,
        seed in any::<u64>(),
    ) {
        let s = FaultScenario {
            fault_type: FaultType::ALL[type_index],
            resistance,
            distance,
            start_sample: 800,
            end_sample: 1600,
            noise_std,
            seed,
        };
        let a = synthesize_trace(&s, 3000, DEFAULT_DT).unwrap();
        let b = synthesize_trace(&s, 3000, DEFAULT_DT).unwrap();
        prop_assert_eq!(a, b);
    }
}
