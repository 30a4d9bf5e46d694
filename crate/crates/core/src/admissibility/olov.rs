use crate::error::{Error, Result};
use crate::numeric::factorial;
use crate::spline::{check_order, check_positive};

/// Three-order threshold: with orders `k1 < k2 < r`, the vector
/// `(M_k1, M_k2, M_r)` is admissible iff `M_k1` is at least this value.
pub fn olov_bound(r: u32, k1: u32, k2: u32, m_k2: f64, m_r: f64) -> Result<f64> {
    check_order(r)?;
    if !(k1 < k2 && k2 < r) {
        return Err(Error::invalid("orders", format!("need k1 < k2 < r, got {k1}, {k2}, {r}")));
    }
    check_positive("norms", &[m_k2, m_r])?;
    let (p1, p2) = ((r - k1) as f64, (r - k2) as f64);
    let ratio = p1 / p2;
    // (r-k2)!^{p1/p2} / (r-k1)! * M_k2^{p1/p2} * M_r^{(k1-k2)/p2}
    let ln = ratio * factorial(r - k2).ln() - factorial(r - k1).ln() + ratio * m_k2.ln()
        + (k1 as f64 - k2 as f64) / p2 * m_r.ln();
    Ok(ln.exp())
}
