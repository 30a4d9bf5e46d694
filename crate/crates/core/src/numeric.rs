//! Small numeric helpers shared by the spline and solver modules.

/// Largest supported spline order. Factorials up to this order are exact integers.
pub const MAX_ORDER: u32 = 30;

const fn factorial_table() -> [u128; (MAX_ORDER + 1) as usize] {
    let mut table = [1u128; (MAX_ORDER + 1) as usize];
    let mut i = 1;
    while i <= MAX_ORDER as usize {
        table[i] = table[i - 1] * i as u128;
        i += 1;
    }
    table
}

const FACTORIALS: [u128; (MAX_ORDER + 1) as usize] = factorial_table();

/// `n!` as the nearest double. Panics if `n > MAX_ORDER`.
pub fn factorial(n: u32) -> f64 {
    FACTORIALS[n as usize] as f64
}

/// `(a^p - b^p) / (a - b)` for `a >= b >= 0`, summed without cancellation.
pub(crate) fn power_quotient(a: f64, b: f64, p: u32) -> f64 {
    // h_1 = 1, h_k = a h_{k-1} + b^{k-1}
    let mut h = 1.0;
    let mut b_pow = 1.0;
    for _ in 1..p {
        b_pow *= b;
        h = a * h + b_pow;
    }
    h
}

/// Alternating sum `sum_j (-1)^(j+1) v_j^p` for a nonincreasing sequence of
/// nonnegative values. Consecutive values are paired so every partial term is
/// nonnegative; `gaps[j]` must hold `v_j - v_{j+1}` computed as accurately as
/// the caller can.
pub(crate) fn alternating_power_sum(values: &[f64], gaps: &[f64], p: u32) -> f64 {
    debug_assert!(gaps.len() + 1 >= values.len());
    if p == 0 {
        return if values.len() % 2 == 1 { 1.0 } else { 0.0 };
    }
    let mut sum = 0.0;
    let mut j = 0;
    while j + 1 < values.len() {
        let (a, b) = (values[j], values[j + 1]);
        if b <= 0.0 {
            sum += a.powi(p as i32);
        } else {
            sum += gaps[j] * power_quotient(a, b, p);
        }
        j += 2;
    }
    if j < values.len() {
        sum += values[j].powi(p as i32);
    }
    sum
}

/// Gaps `a_j - a_{j+1}` of a knot vector.
pub(crate) fn knot_gaps(knots: &[f64]) -> Vec<f64> {
    knots.windows(2).map(|w| w[0] - w[1]).collect()
}

/// Relative difference scaled by the larger magnitude (zero when both vanish).
pub fn relative_difference(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Format with at most six significant digits, trimming trailing zeros.
pub fn format_sig6(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let exponent = x.abs().log10().floor() as i32;
    if (-4..6).contains(&exponent) {
        let decimals = (5 - exponent).max(0) as usize;
        let s = format!("{x:.decimals$}");
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    } else {
        let s = format!("{x:.5e}");
        let (mantissa, exp) = s.split_once('e').unwrap_or((&s, "0"));
        let mantissa = if mantissa.contains('.') {
            mantissa.trim_end_matches('0').trim_end_matches('.')
        } else {
            mantissa
        };
        format!("{mantissa}e{exp}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn factorials_are_exact() {
        assert_eq!(factorial(0), 1.0);
        assert_eq!(factorial(5), 120.0);
        assert_eq!(FACTORIALS[20], 2_432_902_008_176_640_000);
        assert!(factorial(30) > 2.65e32);
    }

    #[test]
    fn power_quotient_matches_direct_difference() {
        for p in 1..12 {
            let (a, b) = (1.7_f64, 0.4_f64);
            let direct = (a.powi(p as i32) - b.powi(p as i32)) / (a - b);
            assert!(relative_difference(power_quotient(a, b, p), direct) < 1e-13);
        }
        assert_eq!(power_quotient(3.0, 0.0, 3), 9.0);
    }

    #[test]
    fn alternating_sum_keeps_precision_for_close_pairs() {
        let a = 1.0 + 1e-9;
        let b = 1.0;
        let gaps = [1e-9];
        // exact: 3 * 1e-9 + 3e-18 + ...
        let s = alternating_power_sum(&[a, b], &gaps, 3);
        assert!(relative_difference(s, 3e-9) < 1e-8);
    }

    #[test]
    fn sig6_formatting() {
        assert_eq!(format_sig6(1.2), "1.2");
        assert_eq!(format_sig6(0.2), "0.2");
        assert_eq!(format_sig6(0.5), "0.5");
        assert_eq!(format_sig6(1.0 / 6.0), "0.166667");
        assert_eq!(format_sig6(1234567.0), "1.23457e6");
        assert_eq!(format_sig6(-2.0), "-2");
    }
}
