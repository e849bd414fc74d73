//! Two-sample rank test, normal approximation against exact enumeration.

use hlle_fault::ranktest::{mann_whitney_exact, mann_whitney_u};

fn main() -> hlle_fault::Result<()> {
    let cases: [(&[f64], &[f64]); 3] = [
        (&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]),
        (
            &[0.3, 1.9, 2.2, 3.0, 4.1, 5.5, 6.1],
            &[2.8, 3.3, 4.4, 6.6, 7.2, 8.1, 9.0],
        ),
        (&[1.0, 1.0, 2.0, 3.0], &[1.0, 2.0, 2.0, 5.0]),
    ];
    for (x, y) in cases {
        let approx = mann_whitney_u(x, y)?;
        print!(
            "k1 = {}, k2 = {}: U = {}, approximate p = {:.4}",
            x.len(),
            y.len(),
            approx.u_statistic,
            approx.p_value
        );
        // enumeration is only defined for tie-free samples
        match mann_whitney_exact(x, y) {
            Ok(exact) => println!(", exact p = {:.4}", exact.p_value),
            Err(e) => println!(", no exact p ({e})"),
        }
    }
    Ok(())
}
