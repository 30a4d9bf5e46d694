//! Lower bound on the order-0 norm as the top magnitude grows, for orders
//! (0, 1, 2) at r = 3, against the hand-derived curve 1/2 + 1/(24 l^2).

use multimonotone::admissibility::{estimate_limit, DecisionConfig};
use multimonotone::solver::solve_min_l;

fn main() -> multimonotone::Result<()> {
    let min = solve_min_l(3, &[1, 2], &[1.0, 1.0])?;
    println!("smallest magnitude {:.12}, spline {:?}", min.l(), min.spline().map(|s| s.knots()));

    let est = estimate_limit(3, 0, &[1, 2], &[1.0, 1.0], &DecisionConfig::default())?;
    for (l, bound) in &est.samples {
        println!("l = {l:12.4}  bound {bound:.12}  closed form {:.12}", 0.5 + 1.0 / (24.0 * l * l));
    }
    println!("limit {:.12} by {:?}, monotone {}", est.limit, est.method, est.monotone);
    Ok(())
}
