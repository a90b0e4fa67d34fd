//! The matrix `Λ(z) = (I − Ψ_z(2π))ᵀ`, the planar field `ρ = det Λ`, and the
//! monodromy index as a winding number of `ρ` around the degeneracy segment.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::integrator::{fundamental_solution, real_monodromy, IntegratorOptions};
use crate::model::{CoefficientFamily, ParamPoint, ParameterPath};
use crate::numeric::{bisect_root, golden_section_min};
use crate::winding::{winding_number, winding_with_trace, ClosedCurve, CurveSample, PlanarField, WindingOptions, WindingResult};

/// Absolute floor of the relative degeneracy test `|ρ| < rel · (1 + scale)`.
pub const DEGENERACY_REL: f64 = 1e-8;

pub fn lambda_matrix(family: &CoefficientFamily, p: ParamPoint, shift: f64, opts: &IntegratorOptions) -> Result<DMatrix<Complex64>> {
    let sol = fundamental_solution(family, p, shift, opts)?;
    let d = family.dim();
    Ok((DMatrix::<Complex64>::identity(d, d) - sol.monodromy).transpose())
}

pub fn rho(family: &CoefficientFamily, p: ParamPoint, shift: f64, opts: &IntegratorOptions) -> Result<Complex64> {
    Ok(lambda_matrix(family, p, shift, opts)?.determinant())
}

/// `ρ(λ, 0) = det(I − M_λ)`, computed in real arithmetic.
pub fn rho_real(family: &CoefficientFamily, p: ParamPoint, opts: &IntegratorOptions) -> Result<f64> {
    let m = real_monodromy(family, p, opts)?.monodromy;
    let d = family.dim();
    Ok((DMatrix::<f64>::identity(d, d) - m).determinant())
}

/// `(τ, s) ↦ ρ(γ(τ), s)` for a parameter path `γ` on `τ ∈ [0, 1]`.
pub struct RhoField<'a> {
    pub family: &'a CoefficientFamily,
    pub path: &'a ParameterPath,
    pub integrator: IntegratorOptions,
}

impl PlanarField for RhoField<'_> {
    fn value(&self, tau: f64, s: f64) -> Result<Complex64> {
        rho(self.family, self.path.at(tau), s, &self.integrator)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MonodromyOptions {
    pub margin: f64,
    /// Second margin used to certify margin independence.
    pub check_margin: f64,
    pub integrator: IntegratorOptions,
    pub winding: WindingOptions,
}

impl Default for MonodromyOptions {
    fn default() -> Self {
        MonodromyOptions { margin: 1.0, check_margin: 0.5, integrator: IntegratorOptions::default(), winding: WindingOptions::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonodromyIndex {
    pub index: i64,
    pub endpoint_rho: [f64; 2],
    pub margin: f64,
    pub check_margin: f64,
    pub primary: WindingResult,
    pub check: WindingResult,
}

/// Both endpoints of the path must have `|ρ(·, 0)|` above the degeneracy threshold.
pub fn check_endpoints(family: &CoefficientFamily, path: &ParameterPath, opts: &IntegratorOptions) -> Result<[f64; 2]> {
    let ra = rho_real(family, path.start(), opts)?;
    let rb = rho_real(family, path.end(), opts)?;
    let threshold = DEGENERACY_REL * (1.0 + ra.abs().max(rb.abs()));
    for (value, p) in [(ra, path.start()), (rb, path.end())] {
        if !(value.abs() > threshold) {
            return Err(Error::NotAdmissible(format!(
                "endpoint degenerate: |rho| = {:e} at lambda = {:?} (threshold {threshold:e})",
                value.abs(),
                p.0
            )));
        }
    }
    Ok([ra, rb])
}

/// Winding of `ρ` along the boundary of `[0, 1] × [−margin, margin]` in path coordinates.
pub fn path_winding(family: &CoefficientFamily, path: &ParameterPath, margin: f64, opts: &MonodromyOptions) -> Result<WindingResult> {
    if !(margin > 0.0) {
        return Err(Error::Invalid(format!("margin must be positive, got {margin}")));
    }
    let field = RhoField { family, path, integrator: opts.integrator };
    winding_number(&field, &ClosedCurve::rectangle(0.0, 1.0, -margin, margin), &opts.winding)
}

/// Curve samples `(λ, s, ρ, unwrapped phase)` for CSV dumps.
pub fn path_winding_trace(
    family: &CoefficientFamily,
    path: &ParameterPath,
    margin: f64,
    opts: &MonodromyOptions,
) -> Result<Vec<(ParamPoint, CurveSample)>> {
    let field = RhoField { family, path, integrator: opts.integrator };
    let (_, trace) = winding_with_trace(&field, &ClosedCurve::rectangle(0.0, 1.0, -margin, margin), &opts.winding)?;
    Ok(trace.into_iter().map(|s| (path.at(s.x), s)).collect())
}

/// Monodromy index along a parameter path, certified at two margins.
pub fn monodromy_index_path(family: &CoefficientFamily, path: &ParameterPath, opts: &MonodromyOptions) -> Result<MonodromyIndex> {
    let endpoint_rho = check_endpoints(family, path, &opts.integrator)?;
    let primary = path_winding(family, path, opts.margin, opts)?;
    let check = path_winding(family, path, opts.check_margin, opts)?;
    if primary.winding != check.winding {
        return Err(Error::Inconsistent(format!(
            "winding depends on the margin: {} at {} versus {} at {}",
            primary.winding, opts.margin, check.winding, opts.check_margin
        )));
    }
    Ok(MonodromyIndex { index: primary.winding, endpoint_rho, margin: opts.margin, check_margin: opts.check_margin, primary, check })
}

pub fn monodromy_index(family: &CoefficientFamily, a: f64, b: f64, opts: &MonodromyOptions) -> Result<MonodromyIndex> {
    monodromy_index_path(family, &ParameterPath::interval(a, b)?, opts)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Degeneracy {
    pub lambda: f64,
    pub bracket: [f64; 2],
    pub abs_rho: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScanOptions {
    pub grid: usize,
    pub integrator: IntegratorOptions,
    /// Bracket width reached by the local refinement.
    pub refine_width: f64,
}

impl Default for ScanOptions {
    fn default() -> Self {
        ScanOptions { grid: 201, integrator: IntegratorOptions::default(), refine_width: 1e-9 }
    }
}

/// Locates `λ ∈ [a, b]` with `ρ(λ, 0) = 0`. Sign changes are refined by
/// bisection, other local minima of `|ρ|` by golden-section search.
pub fn kernel_scan(family: &CoefficientFamily, a: f64, b: f64, opts: &ScanOptions) -> Result<Vec<Degeneracy>> {
    if !(a < b) || opts.grid < 3 {
        return Err(Error::Invalid("kernel scan needs a < b and at least 3 grid points".into()));
    }
    let k = opts.grid;
    let lam: Vec<f64> = (0..k).map(|i| a + (b - a) * i as f64 / (k - 1) as f64).collect();
    let f = |x: f64| rho_real(family, ParamPoint::one(x), &opts.integrator);
    let vals = lam.iter().map(|&x| f(x)).collect::<Result<Vec<f64>>>()?;
    scan_values(&lam, &vals, f, opts.refine_width)
}

/// Shared refinement over sampled real values of a scalar field along a line.
pub(crate) fn scan_values<F>(xs: &[f64], vals: &[f64], f: F, width: f64) -> Result<Vec<Degeneracy>>
where
    F: Fn(f64) -> Result<f64>,
{
    let k = xs.len();
    let scale = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let threshold = DEGENERACY_REL * (1.0 + scale);
    let below = vals.iter().filter(|v| v.abs() < threshold).count();
    if 2 * below > k {
        return Err(Error::EverywhereDegenerate { below, total: k });
    }
    let mut found: Vec<Degeneracy> = Vec::new();
    let mut push = |d: Degeneracy| {
        if d.abs_rho < threshold && !found.iter().any(|e| (e.lambda - d.lambda).abs() < 1e-6) {
            found.push(d);
        }
    };
    for i in 0..k {
        if vals[i] == 0.0 {
            push(Degeneracy { lambda: xs[i], bracket: [xs[i.saturating_sub(1)], xs[(i + 1).min(k - 1)]], abs_rho: 0.0 });
        }
    }
    for i in 0..k - 1 {
        if vals[i] != 0.0 && vals[i + 1] != 0.0 && (vals[i] < 0.0) != (vals[i + 1] < 0.0) {
            let root = bisect_root(&f, xs[i], xs[i + 1], vals[i], width)?;
            push(Degeneracy { lambda: root, bracket: [xs[i], xs[i + 1]], abs_rho: f(root)?.abs() });
        }
    }
    for i in 1..k - 1 {
        let (l, c, r) = (vals[i - 1].abs(), vals[i].abs(), vals[i + 1].abs());
        let same_sign = (vals[i - 1] < 0.0) == (vals[i] < 0.0) && (vals[i] < 0.0) == (vals[i + 1] < 0.0);
        if c <= l && c <= r && same_sign && c > 0.0 {
            let (x, v) = golden_section_min(|x| f(x).map(f64::abs), xs[i - 1], xs[i + 1], width)?;
            push(Degeneracy { lambda: x, bracket: [xs[i - 1], xs[i + 1]], abs_rho: v });
        }
    }
    found.sort_by(|p, q| p.lambda.partial_cmp(&q.lambda).expect("finite"));
    Ok(found)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn rotation(n: usize) -> CoefficientFamily {
        CoefficientFamily::scalar(n, 1, "lambda").unwrap()
    }

    /// `det Λ = (1 − e^{2πiw})(1 − e^{−2πiw})` for `S = aI`, `n = 1`, `w = a + is`.
    fn closed_form(a: f64, s: f64) -> Complex64 {
        let w = Complex64::new(a, s) * 2.0 * PI;
        let i = Complex64::i();
        (Complex64::new(1.0, 0.0) - (i * w).exp()) * (Complex64::new(1.0, 0.0) - (-i * w).exp())
    }

    #[test]
    fn lambda_matrix_examples() {
        let opts = IntegratorOptions::default();
        let zero = CoefficientFamily::scalar(1, 1, "0").unwrap();
        assert!(lambda_matrix(&zero, ParamPoint::one(0.4), 0.0, &opts).unwrap().iter().all(|z| z.norm() == 0.0));
        let half = CoefficientFamily::scalar(1, 1, "0.5").unwrap();
        let l = lambda_matrix(&half, ParamPoint::one(0.0), 0.0, &opts).unwrap();
        let target = DMatrix::<Complex64>::identity(2, 2) * Complex64::new(2.0, 0.0);
        assert!((l - target).iter().all(|z| z.norm() < 1e-9));
    }

    #[test]
    fn rho_matches_closed_form() {
        let opts = IntegratorOptions::default();
        let f = rotation(1);
        for &(a, s) in &[(0.5, 0.0), (1.0, 0.0), (1.0, 0.1), (0.3, -0.8), (1.4, 0.25)] {
            let r = rho(&f, ParamPoint::one(a), s, &opts).unwrap();
            let e = closed_form(a, s);
            assert!((r - e).norm() < 1e-8 * (1.0 + e.norm()), "a={a} s={s}: {r} vs {e}");
        }
        let r = rho(&f, ParamPoint::one(1.0), 0.1, &opts).unwrap();
        assert!((r.re - (2.0 - 2.0 * (0.2 * PI).cosh())).abs() < 1e-8);
        assert!((r.re + 0.4080).abs() < 1e-4);
    }

    #[test]
    fn rho_conjugate_symmetry() {
        let f = CoefficientFamily::parse(1, 1, &[vec!["lambda + 0.3*cos(t)".into(), "0.1".into()], vec!["0.1".into(), "lambda".into()]])
            .unwrap();
        let opts = IntegratorOptions::default();
        let p = rho(&f, ParamPoint::one(0.9), 0.3, &opts).unwrap();
        let m = rho(&f, ParamPoint::one(0.9), -0.3, &opts).unwrap();
        assert!((p.conj() - m).norm() < 1e-8 * (1.0 + p.norm()));
    }

    #[test]
    fn rotation_winding_on_rectangle() {
        let f = rotation(1);
        let path = ParameterPath::interval(0.5, 1.5).unwrap();
        let r = path_winding(&f, &path, 1.0, &MonodromyOptions::default()).unwrap();
        assert_eq!(r.winding, 2);
    }

    #[test]
    fn monodromy_index_examples() {
        let opts = MonodromyOptions::default();
        assert_eq!(monodromy_index(&rotation(1), 0.5, 1.5, &opts).unwrap().index, 2);
        assert_eq!(monodromy_index(&rotation(1), 0.1, 0.4, &opts).unwrap().index, 0);
        assert_eq!(monodromy_index(&rotation(2), 0.5, 1.5, &opts).unwrap().index, 4);
        assert_eq!(monodromy_index(&rotation(1), 1.5, 0.5, &opts).unwrap().index, -2);
    }

    #[test]
    fn degenerate_endpoint_is_not_admissible() {
        let r = monodromy_index(&rotation(1), 1.0, 1.5, &MonodromyOptions::default());
        assert!(matches!(r, Err(Error::NotAdmissible(_))));
    }

    #[test]
    fn kernel_scan_examples() {
        let opts = ScanOptions { grid: 41, ..Default::default() };
        let found = kernel_scan(&rotation(1), 0.5, 2.5, &opts).unwrap();
        assert_eq!(found.len(), 2);
        assert!((found[0].lambda - 1.0).abs() < 1e-4);
        assert!((found[1].lambda - 2.0).abs() < 1e-4);
        assert!(kernel_scan(&rotation(1), 0.1, 0.4, &opts).unwrap().is_empty());
        let zero = CoefficientFamily::scalar(1, 1, "0").unwrap();
        assert!(matches!(kernel_scan(&zero, 0.0, 1.0, &opts), Err(Error::EverywhereDegenerate { .. })));
    }

    #[test]
    fn kernel_scan_finds_sign_changes() {
        // perturbed rotation: the double crossing at 1 splits into two simple ones
        let f = CoefficientFamily::parse(
            1,
            1,
            &[vec!["lambda + 0.3*cos(2*t)".into(), "0".into()], vec!["0".into(), "lambda - 0.3*cos(2*t)".into()]],
        )
        .unwrap();
        let found = kernel_scan(&f, 0.6, 1.4, &ScanOptions { grid: 33, ..Default::default() }).unwrap();
        assert_eq!(found.len(), 2, "{found:?}");
        assert!(found[0].lambda < 1.0 && found[1].lambda > 1.0);
    }
}
