use hlle_fault_oracles::*;

#[test]
fn u_distribution_two_by_two() {
    let d = exact_u_distribution(2, 2);
    let expected = [1.0, 1.0, 2.0, 1.0, 1.0].map(|c| c / 6.0);
    assert_eq!(d.len(), 5);
    for (a, b) in d.iter().zip(expected) {
        assert!((a - b).abs() < 1e-15);
    }
}

#[test]
fn u_distribution_one_by_one_is_uniform() {
    assert_eq!(exact_u_distribution(1, 1), vec![0.5, 0.5]);
}

#[test]
fn u_distribution_mass_sums_to_one() {
    for k1 in 1..=8 {
        for k2 in 1..=(16 - k1).min(8) {
            let total: f64 = exact_u_distribution(k1, k2).iter().sum();
            assert!((total - 1.0).abs() < 1e-12, "k1={k1} k2={k2}");
        }
    }
}

#[test]
fn exact_p_hand_cases() {
    assert!((exact_two_sided_p(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]) - 0.1).abs() < 1e-12);
    assert!((exact_two_sided_p(&[1.0, 3.0], &[2.0, 4.0]) - 4.0 / 6.0).abs() < 1e-12);
    assert_eq!(exact_two_sided_p(&[1.0], &[2.0]), 1.0);
}

#[test]
fn partitions_follow_bell_numbers() {
    assert_eq!(all_partitions(1, 1).len(), 1);
    assert_eq!(all_partitions(3, 3).len(), 5);
    assert_eq!(all_partitions(4, 4).len(), 15);
    // S(6,1) + S(6,2) + S(6,3)
    assert_eq!(all_partitions(6, 3).len(), 1 + 31 + 90);
}

#[test]
fn partitions_are_unique() {
    let parts = all_partitions(6, 3);
    let mut sorted = parts.clone();
    sorted.sort();
    sorted.dedup();
    assert_eq!(sorted.len(), parts.len());
}

#[test]
fn finite_differences_exact_on_quadratic() {
    let f = |x: &[f64]| 3.0 * x[0] * x[0] - 2.0 * x[0] * x[1] + 0.5 * x[1] * x[1] + x[0];
    let x = [1.5, -2.0];
    let g = finite_difference_gradient(f, &x, 1e-3);
    let exact = [6.0 * x[0] - 2.0 * x[1] + 1.0, -2.0 * x[0] + x[1]];
    for (a, b) in g.iter().zip(exact) {
        assert!((a - b).abs() < 1e-8 * 10.0);
    }
}

#[test]
fn finite_differences_second_order_convergence() {
    let f = |x: &[f64]| x[0].sin() * x[1].exp();
    let x = [0.7_f64, 0.3];
    let exact = [x[0].cos() * x[1].exp(), x[0].sin() * x[1].exp()];
    let err = |h: f64| {
        let g = finite_difference_gradient(f, &x, h);
        (g[0] - exact[0]).abs() + (g[1] - exact[1]).abs()
    };
    let ratio = err(1e-2) / err(5e-3);
    assert!((ratio - 4.0).abs() < 0.2, "ratio {ratio}");
}

#[test]
fn brute_force_metric_hand_case() {
    let t = [0, 0, 1, 1];
    let p = [0, 1, 0, 1];
    assert!((rand_index(&t, &p) - 1.0 / 3.0).abs() < 1e-12);
    assert!((adjusted_rand_index(&t, &p) + 0.5).abs() < 1e-12);
}
