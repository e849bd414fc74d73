//! Embed three Gaussian blobs from 5-D into the plane.

use hlle_fault::tsne::{tsne_embed, TsneConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn main() -> hlle_fault::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let noise = Normal::new(0.0, 0.5).unwrap();
    let mut points = Vec::new();
    for c in 0..3 {
        for _ in 0..20 {
            points.push(
                (0..5)
                    .map(|j| if j == c { 8.0 } else { 0.0 } + noise.sample(&mut rng))
                    .collect(),
            );
        }
    }
    let cfg = TsneConfig {
        perplexity: 10.0,
        seed: 7,
        ..TsneConfig::default()
    };
    let e = tsne_embed(&points, &cfg)?;
    for (it, kl) in &e.kl_history {
        println!("iteration {it:5}: KL {kl:.4}");
    }
    for c in 0..3 {
        let block = &e.coords[c * 20..(c + 1) * 20];
        let cx = block.iter().map(|p| p[0]).sum::<f64>() / 20.0;
        let cy = block.iter().map(|p| p[1]).sum::<f64>() / 20.0;
        println!("blob {c}: centroid ({cx:7.2}, {cy:7.2})");
    }
    Ok(())
}
