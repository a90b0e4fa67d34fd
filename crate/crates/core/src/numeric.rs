//! Small scalar root finding and minimization helpers.

use crate::error::Result;

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section minimization of `f` on `[lo, hi]` down to bracket width `width`.
/// Returns the best point seen and its value.
pub fn golden_section_min<F>(mut f: F, mut lo: f64, mut hi: f64, width: f64) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    while hi - lo > width {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2)?;
        }
    }
    Ok(if f1 <= f2 { (x1, f1) } else { (x2, f2) })
}

/// Bisection for a sign change of `f` on `[lo, hi]` with `f(lo) = f_lo`.
pub fn bisect_root<F>(mut f: F, mut lo: f64, mut hi: f64, mut f_lo: f64, width: f64) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    while hi - lo > width {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid)?;
        if fm == 0.0 {
            return Ok(mid);
        }
        if (fm < 0.0) == (f_lo < 0.0) {
            lo = mid;
            f_lo = fm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn golden_section_finds_minimum() {
        let (x, v) = golden_section_min(|x| Ok((x - 0.3).powi(2) + 1.0), 0.0, 1.0, 1e-8).unwrap();
        assert!((x - 0.3).abs() < 1e-7);
        assert!((v - 1.0).abs() < 1e-14);
        let (x, _) = golden_section_min(|x| Ok((x - 1.7).abs()), 1.0, 2.0, 1e-10).unwrap();
        assert!((x - 1.7).abs() < 1e-9);
    }

    #[test]
    fn bisection_finds_root() {
        let r = bisect_root(|x| Ok(x * x - 2.0), 0.0, 2.0, -2.0, 1e-12).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-11);
    }
}
