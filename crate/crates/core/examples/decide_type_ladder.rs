//! Walks the lowest norm of a four-order problem through every verdict type.

use multimonotone::admissibility::{decide_values, DecisionConfig};

fn main() -> multimonotone::Result<()> {
    let config = DecisionConfig::default();
    let (r, orders) = (3, [0, 1, 2, 3]);
    for tail in [[0.5, 1.0, 1.0], [0.6, 1.0, 1.0]] {
        println!("tail norms {tail:?}");
        for m0 in [0.1, 1.0 / 6.0, 0.2, 0.22, 0.25, 1.0] {
            let norms = [m0, tail[0], tail[1], tail[2]];
            let v = decide_values(r, &orders, &norms, &config)?;
            match &v.witness {
                Some(w) => println!(
                    "  M0 = {m0:.6}: {} knots {:?} constant {:.6} ({:?})",
                    v.spline_type.label(),
                    w.knots(),
                    w.constant(),
                    v.certainty
                ),
                None => println!("  M0 = {m0:.6}: inadmissible, margin {:?}", v.margins[v.binding_stage]),
            }
        }
    }
    Ok(())
}
