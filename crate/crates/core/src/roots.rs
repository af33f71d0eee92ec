//! Bracketed scalar root finding.

/// Bisection width at which the secant polish takes over [bohr].
pub const BRACKET_WIDTH: f64 = 1e-10;

/// Finds a root of `f` in `[lo, hi]`, given `f(lo)` and `f(hi)` of opposite
/// sign (or one of them zero).
///
/// Bisects until the bracket is narrower than `width`, then takes one secant
/// step across the final bracket. The secant point is kept only if it stays
/// inside the bracket and lowers |f|. Returns `None` if the endpoints do not
/// bracket a sign change.
pub fn bisect_secant<F>(mut f: F, mut lo: f64, mut hi: f64, width: f64) -> Option<f64>
where
    F: FnMut(f64) -> f64,
{
    let mut f_lo = f(lo);
    let mut f_hi = f(hi);
    if f_lo == 0.0 {
        return Some(lo);
    }
    if f_hi == 0.0 {
        return Some(hi);
    }
    if f_lo.signum() == f_hi.signum() || !f_lo.is_finite() || !f_hi.is_finite() {
        return None;
    }
    while (hi - lo).abs() > width {
        let mid = 0.5 * (lo + hi);
        if mid <= lo.min(hi) || mid >= lo.max(hi) {
            break;
        }
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return Some(mid);
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
            f_hi = f_mid;
        }
    }
    let (best, f_best) = if f_lo.abs() < f_hi.abs() { (lo, f_lo) } else { (hi, f_hi) };
    let secant = lo - f_lo * (hi - lo) / (f_hi - f_lo);
    if secant.is_finite() && secant >= lo.min(hi) && secant <= lo.max(hi) && f(secant).abs() < f_best.abs() {
        return Some(secant);
    }
    Some(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_sqrt_two() {
        let r = bisect_secant(|x| x * x - 2.0, 0.0, 2.0, BRACKET_WIDTH).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn rejects_missing_bracket() {
        assert!(bisect_secant(|x| x * x + 1.0, -1.0, 1.0, BRACKET_WIDTH).is_none());
    }

    #[test]
    fn accepts_reversed_bracket() {
        let r = bisect_secant(|x| x.cos(), 3.0, 1.0, BRACKET_WIDTH).unwrap();
        assert!((r - std::f64::consts::FRAC_PI_2).abs() < 1e-14);
    }

    #[test]
    fn exact_endpoint_root() {
        assert_eq!(bisect_secant(|x| x - 1.0, 1.0, 3.0, BRACKET_WIDTH), Some(1.0));
    }
}
