//! The six clustering scores on a few small labelings.

use hlle_fault::metrics::score_all;

fn main() -> hlle_fault::Result<()> {
    let truth = ["AG", "AG", "AG", "BC", "BC", "BC", "ABC", "ABC", "ABC"];
    let cases: [(&str, [usize; 9]); 3] = [
        ("perfect, renamed", [2, 2, 2, 0, 0, 0, 1, 1, 1]),
        ("one swap", [0, 0, 1, 1, 1, 1, 2, 2, 2]),
        ("merged", [0, 0, 0, 0, 0, 0, 1, 1, 1]),
    ];
    println!(
        "{:>18} {:>7} {:>7} {:>7} {:>7} {:>7} {:>7}",
        "", "MI", "AMI", "RI", "ARI", "HS", "CS"
    );
    for (name, pred) in cases {
        let s = score_all(&truth, &pred)?;
        println!(
            "{name:>18} {:7.3} {:7.3} {:7.3} {:7.3} {:7.3} {:7.3}",
            s.mutual_info, s.adjusted_mutual_info, s.rand, s.adjusted_rand, s.homogeneity, s.completeness
        );
    }
    Ok(())
}
