//! Embed points along a noisy arc with HLLE and compare with arc length.

use hlle_fault::hlle::{hlle_embed, HlleConfig};

fn main() -> hlle_fault::Result<()> {
    let arc: Vec<f64> = (0..20).map(|i| i as f64 * 0.15).collect();
    // a gently curved path in 6-D
    let points: Vec<Vec<f64>> = arc
        .iter()
        .map(|&s| vec![s, 0.5 * s, s.sin(), 0.2 * s * s, -s, 1.0])
        .collect();
    let e = hlle_embed(&points, &HlleConfig::default())?;
    println!(
        "degenerate: {}, near-null eigenvalues: {}",
        e.degenerate, e.null_space_dim
    );
    for (s, y) in arc.iter().zip(&e.coords) {
        println!("{s:6.2} -> {y:8.4}");
    }
    Ok(())
}
