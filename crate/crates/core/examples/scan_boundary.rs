//! Traces where the order-0 norm becomes admissible as the order-1 norm varies,
//! for the three-order problem at r = 2, by bisection on the verdict.

use multimonotone::admissibility::{decide_values, olov_bound, DecisionConfig};

fn threshold(m1: f64, config: &DecisionConfig) -> multimonotone::Result<f64> {
    let (mut lo, mut hi) = (1e-6f64, 100.0);
    for _ in 0..60 {
        let mid = (lo * hi).sqrt();
        if decide_values(2, &[0, 1, 2], &[mid, m1, 1.0], config)?.admissible {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

fn main() -> multimonotone::Result<()> {
    let config = DecisionConfig::default();
    println!("m1,threshold,closed_form");
    for i in 1..=10 {
        let m1 = 0.25 * i as f64;
        println!("{m1},{},{}", threshold(m1, &config)?, olov_bound(2, 0, 1, m1, 1.0)?);
    }
    Ok(())
}
