//! Fit a three-component Gaussian mixture and score it against the truth.

use hlle_fault::gmm::{fit, GmmConfig};
use hlle_fault::metrics::score_all;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn main() -> hlle_fault::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let noise = Normal::new(0.0, 1.0).unwrap();
    let centers = [[-6.0, 0.0], [0.0, 5.0], [6.0, 0.0]];
    let mut points = Vec::new();
    let mut truth = Vec::new();
    for (c, m) in centers.iter().enumerate() {
        for _ in 0..80 {
            points.push(vec![m[0] + noise.sample(&mut rng), m[1] + noise.sample(&mut rng)]);
            truth.push(c);
        }
    }
    let f = fit(
        &points,
        &GmmConfig {
            k: 3,
            seed: 42,
            ..GmmConfig::default()
        },
    )?;
    println!(
        "restart {} won after {} E-steps, converged: {}, log-likelihood {:.3}",
        f.restart,
        f.log_likelihood_trace.len(),
        f.converged,
        f.log_likelihood_trace.last().copied().unwrap_or(f64::NAN)
    );
    for (k, c) in f.model.components.iter().enumerate() {
        println!(
            "component {k}: weight {:.3}, mean ({:.2}, {:.2})",
            c.weight, c.mean[0], c.mean[1]
        );
    }
    println!("{:?}", score_all(&truth, &f.labels)?);
    Ok(())
}
