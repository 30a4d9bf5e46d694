//! Evaluates an alternating spline and compares its closed-form norms with a
//! grid search over the same function written as a general combination.

use multimonotone::oracle::{numeric_sup_norm, MAX_REFINEMENTS};
use multimonotone::spline::{AlternatingSpline, TruncatedPower};

fn main() -> multimonotone::Result<()> {
    let spline = AlternatingSpline::with_constant(3, 1.0, vec![2.0, 1.0], 0.25)?;
    println!("{}", serde_json::to_string(&spline).expect("serializable"));

    for t in [-2.5, -1.5, -0.5, 0.0] {
        let values: Vec<f64> = (0..=3).map(|k| spline.eval_derivative(k, t)).collect::<Result<_, _>>()?;
        println!("t = {t:5}: {values:?}");
    }

    let general = spline.to_monotone();
    for k in 0..=3 {
        let grid = numeric_sup_norm(&general, k, MAX_REFINEMENTS)?;
        println!("order {k}: closed form {:.12}, grid {grid:.12}", spline.norm(k));
    }
    Ok(())
}
