use hlle_fault::metrics::{score_all, ClusterScores, ContingencyTable};
use hlle_fault_oracles as oracle;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() < 1e-9
}

#[test]
fn every_pair_of_small_partitions_matches_brute_force() {
    let parts = oracle::all_partitions(6, 3);
    assert_eq!(parts.len(), 122);
    for t in &parts {
        for p in &parts {
            let s = score_all(t, p).unwrap();
            let expect = [
                ("MI", s.mutual_info, oracle::mutual_information(t, p)),
                ("AMI", s.adjusted_mutual_info, oracle::adjusted_mutual_information(t, p)),
                ("RI", s.rand, oracle::rand_index(t, p)),
                ("ARI", s.adjusted_rand, oracle::adjusted_rand_index(t, p)),
                ("CS", s.completeness, oracle::completeness(t, p)),
                ("HS", s.homogeneity, oracle::homogeneity(t, p)),
            ];
            for (name, got, want) in expect {
                assert!(close(got, want), "{name} {t:?} {p:?}: {got} vs {want}");
            }
        }
    }
}

#[test]
fn hand_case() {
    let s = score_all(&[0, 0, 1, 1], &[0, 1, 0, 1]).unwrap();
    assert!((s.rand - 1.0 / 3.0).abs() < 1e-12);
    assert!((s.adjusted_rand + 0.5).abs() < 1e-12);
}

#[test]
fn perfect_ten_class_partition_has_mi_ln_ten() {
    let truth: Vec<usize> = (0..150).map(|i| i / 15).collect();
    let s = score_all(&truth, &truth).unwrap();
    assert!((s.mutual_info - 10f64.ln()).abs() < 1e-12);
    assert_eq!(s.adjusted_rand, 1.0);
}

#[test]
fn shuffled_labels_score_near_zero() {
    let truth: Vec<usize> = (0..150).map(|i| i / 15).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for _ in 0..10 {
        let mut pred = truth.clone();
        pred.shuffle(&mut rng);
        let s = score_all(&truth, &pred).unwrap();
        assert!(s.adjusted_rand.abs() < 0.1, "{s:?}");
        assert!(s.adjusted_mutual_info.abs() < 0.1, "{s:?}");
    }
}

fn check_bounds(s: &ClusterScores, t: &ContingencyTable) -> Result<(), TestCaseError> {
    for v in [s.rand, s.completeness, s.homogeneity] {
        prop_assert!((-1e-12..=1.0 + 1e-12).contains(&v), "{s:?}");
    }
    // chance-corrected, so below zero when agreement is worse than random
    prop_assert!(s.adjusted_mutual_info <= 1.0 + 1e-12);
    prop_assert!((-1.0..=1.0).contains(&s.adjusted_rand));
    prop_assert!(s.mutual_info >= 0.0);
    prop_assert!(s.mutual_info <= t.truth_entropy().min(t.pred_entropy()) + 1e-12);
    Ok(())
}

fn labels() -> impl Strategy<Value = (Vec<usize>, Vec<usize>)> {
    (2usize..60).prop_flat_map(|n| (prop::collection::vec(0usize..6, n), prop::collection::vec(0usize..6, n)))
}

proptest! {
    #[test]
    fn scores_stay_in_range((t, p) in labels()) {
        let s = score_all(&t, &p).unwrap();
        check_bounds(&s, &ContingencyTable::new(&t, &p).unwrap())?;
    }

    #[test]
    fn relabeling_either_side_changes_nothing((t, p) in labels(), perm in Just((0..6).collect::<Vec<usize>>()).prop_shuffle()) {
        let base = score_all(&t, &p).unwrap();
        let p2: Vec<usize> = p.iter().map(|&l| perm[l]).collect();
        let t2: Vec<String> = t.iter().map(|&l| format!("class{}", perm[l])).collect();
        for s in [score_all(&t, &p2).unwrap(), score_all(&t2, &p).unwrap()] {
            prop_assert!(close(s.mutual_info, base.mutual_info));
            prop_assert!(close(s.adjusted_mutual_info, base.adjusted_mutual_info));
            prop_assert!(close(s.rand, base.rand));
            prop_assert!(close(s.adjusted_rand, base.adjusted_rand));
            prop_assert!(close(s.completeness, base.completeness));
            prop_assert!(close(s.homogeneity, base.homogeneity));
        }
    }

    #[test]
    fn swapping_arguments_swaps_homogeneity_and_completeness((t, p) in labels()) {
        let a = score_all(&t, &p).unwrap();
        let b = score_all(&p, &t).unwrap();
        prop_assert!(close(a.homogeneity, b.completeness));
        prop_assert!(close(a.adjusted_rand, b.adjusted_rand));
        prop_assert!(close(a.mutual_info, b.mutual_info));
    }
}
