//! Conley–Zehnder index of the real monodromy path `τ ↦ M(τ) = Ψ_{γ(τ)}(2π)`
//! by crossing forms on `ker(M − I)`.
//!
//! Orientation: `q(v, w) = ⟨Jv, Ṁw⟩` symmetrized, `Ṁ = dM/dτ` along the path.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::integrator::{real_monodromy, standard_j, symplectic_residual_real, IntegratorOptions};
use crate::model::{CoefficientFamily, ParamPoint, ParameterPath};
use crate::numeric::{bisect_root, golden_section_min};

pub const ORIENTATION: &str = "q(v,w) = <Jv, dM/dtau w>, symmetrized on ker(M - I)";

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CzOptions {
    pub grid: usize,
    pub integrator: IntegratorOptions,
    /// Relative singular-value threshold for `I − M`, scaled by `1 + ‖M‖`.
    pub kernel_tol: f64,
    /// Relative threshold on crossing-form eigenvalues, scaled by `1 + ‖Ṁ‖`.
    pub form_tol: f64,
    pub refine_width: f64,
    pub fd_step: f64,
    /// Grid doublings tried when the crossing count disagrees with the
    /// parity of the endpoint determinants.
    pub max_refinements: usize,
}

impl Default for CzOptions {
    fn default() -> Self {
        CzOptions {
            grid: 121,
            integrator: IntegratorOptions::default(),
            kernel_tol: 1e-5,
            form_tol: 1e-6,
            refine_width: 1e-8,
            fd_step: 1e-5,
            max_refinements: 4,
        }
    }
}

/// Sampled monodromy path.
#[derive(Debug, Clone, PartialEq)]
pub struct SymplecticPath {
    pub path: ParameterPath,
    pub taus: Vec<f64>,
    pub matrices: Vec<DMatrix<f64>>,
}

impl SymplecticPath {
    pub fn sample(family: &CoefficientFamily, path: &ParameterPath, grid: usize, opts: &IntegratorOptions) -> Result<Self> {
        if grid < 3 {
            return Err(Error::Invalid("symplectic path needs at least 3 grid points".into()));
        }
        let taus: Vec<f64> = (0..grid).map(|i| i as f64 / (grid - 1) as f64).collect();
        let matrices = taus.iter().map(|&t| Ok(real_monodromy(family, path.at(t), opts)?.monodromy)).collect::<Result<Vec<_>>>()?;
        Ok(SymplecticPath { path: path.clone(), taus, matrices })
    }

    /// Largest `|MᵀJM − J|` and `|det M − 1|` over the samples.
    pub fn defects(&self) -> (f64, f64) {
        self.matrices
            .iter()
            .fold((0.0, 0.0), |(s, d), m| (f64::max(s, symplectic_residual_real(m)), f64::max(d, (m.determinant() - 1.0).abs())))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Crossing {
    pub location: f64,
    pub point: ParamPoint,
    pub sigma_min: f64,
    /// Orthonormal columns spanning `ker(M − I)`.
    #[serde(skip)]
    pub kernel: DMatrix<f64>,
    pub kernel_dim: usize,
    #[serde(skip)]
    pub form: DMatrix<f64>,
    pub form_eigenvalues: Vec<f64>,
    pub signature: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConleyZehnder {
    pub index: i64,
    pub crossings: Vec<Crossing>,
    pub grid: usize,
    pub endpoint_sigma: [f64; 2],
    pub orientation: &'static str,
}

fn sigma_min(m: &DMatrix<f64>) -> f64 {
    let d = m.nrows();
    let a = DMatrix::identity(d, d) - m;
    a.singular_values().min()
}

fn det_i_minus(m: &DMatrix<f64>) -> f64 {
    (DMatrix::identity(m.nrows(), m.nrows()) - m).determinant()
}

fn kernel_threshold(m: &DMatrix<f64>, opts: &CzOptions) -> f64 {
    opts.kernel_tol * (1.0 + m.norm())
}

struct Sampler<'a> {
    family: &'a CoefficientFamily,
    path: &'a ParameterPath,
    opts: &'a CzOptions,
}

impl Sampler<'_> {
    fn monodromy(&self, tau: f64) -> Result<DMatrix<f64>> {
        Ok(real_monodromy(self.family, self.path.at(tau), &self.opts.integrator)?.monodromy)
    }

    fn derivative(&self, tau: f64) -> Result<DMatrix<f64>> {
        let h = self.opts.fd_step;
        let central = |h: f64| -> Result<DMatrix<f64>> { Ok((self.monodromy(tau + h)? - self.monodromy(tau - h)?) / (2.0 * h)) };
        let coarse = central(h)?;
        let fine = central(0.5 * h)?;
        Ok((fine * 4.0 - coarse) / 3.0)
    }
}

/// Crossing locations in `τ ∈ (0, 1)` where `σ_min(I − M)` vanishes.
pub fn find_crossings(family: &CoefficientFamily, sampled: &SymplecticPath, opts: &CzOptions) -> Result<Vec<f64>> {
    let sampler = Sampler { family, path: &sampled.path, opts };
    let k = sampled.taus.len();
    let sig: Vec<f64> = sampled.matrices.iter().map(sigma_min).collect();
    let tol: Vec<f64> = sampled.matrices.iter().map(|m| kernel_threshold(m, opts)).collect();
    let below = (0..k).filter(|&i| sig[i] <= tol[i]).count();
    if 2 * below > k {
        return Err(Error::EverywhereDegenerate { below, total: k });
    }
    for end in [0, k - 1] {
        if !(sig[end] > tol[end]) {
            return Err(Error::NotAdmissible(format!(
                "endpoint degenerate: smallest singular value of I - M is {:e} at tau = {}",
                sig[end], sampled.taus[end]
            )));
        }
    }
    let f_sigma = |t: f64| sampler.monodromy(t).map(|m| sigma_min(&m));
    let mut brackets: Vec<(f64, f64)> = Vec::new();
    let dets: Vec<f64> = sampled.matrices.iter().map(det_i_minus).collect();
    for i in 0..k - 1 {
        if (dets[i] < 0.0) != (dets[i + 1] < 0.0) {
            let root = bisect_root(
                |t| sampler.monodromy(t).map(|m| det_i_minus(&m)),
                sampled.taus[i],
                sampled.taus[i + 1],
                dets[i],
                opts.refine_width,
            )?;
            brackets.push((root - opts.refine_width, root + opts.refine_width));
        }
    }
    for i in 0..k {
        let left = if i == 0 { f64::INFINITY } else { sig[i - 1] };
        let right = if i + 1 == k { f64::INFINITY } else { sig[i + 1] };
        if sig[i] <= left && sig[i] <= right {
            brackets.push((sampled.taus[i.saturating_sub(1)], sampled.taus[(i + 1).min(k - 1)]));
        }
    }
    let mut found: Vec<f64> = Vec::new();
    for (lo, hi) in brackets {
        let (t, s) = golden_section_min(f_sigma, lo.max(0.0), hi.min(1.0), opts.refine_width)?;
        let m = sampler.monodromy(t)?;
        if s < kernel_threshold(&m, opts) && t > 0.0 && t < 1.0 && !found.iter().any(|f| (f - t).abs() < 1e-6) {
            found.push(t);
        }
    }
    found.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    Ok(found)
}

/// Crossing form and signature at `τ₀`.
pub fn crossing_signature(family: &CoefficientFamily, path: &ParameterPath, tau: f64, opts: &CzOptions) -> Result<Crossing> {
    let sampler = Sampler { family, path, opts };
    let m = sampler.monodromy(tau)?;
    let d = m.nrows();
    let svd = (DMatrix::identity(d, d) - &m).svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let threshold = kernel_threshold(&m, opts);
    let cols: Vec<usize> = (0..d).filter(|&i| svd.singular_values[i] < threshold).collect();
    if cols.is_empty() {
        return Err(Error::Inconsistent(format!("no kernel of I - M at tau = {tau}")));
    }
    let sigma = svd.singular_values.min();
    let kernel = DMatrix::from_fn(d, cols.len(), |r, c| v_t[(cols[c], r)]);
    let m_dot = sampler.derivative(tau)?;
    let j = standard_j(family.half_dim());
    let raw = kernel.transpose() * j.transpose() * &m_dot * &kernel;
    let form = (&raw + raw.transpose()) * 0.5;
    let mut eig: Vec<f64> = SymmetricEigen::new(form.clone()).eigenvalues.iter().copied().collect();
    eig.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let form_tol = opts.form_tol * (1.0 + m_dot.norm());
    if let Some(bad) = eig.iter().find(|e| e.abs() <= form_tol) {
        return Err(Error::DegenerateCrossing { location: tau, eigenvalue: *bad, tol: form_tol });
    }
    let signature = eig.iter().map(|e| if *e > 0.0 { 1 } else { -1 }).sum();
    Ok(Crossing {
        location: tau,
        point: path.at(tau),
        sigma_min: sigma,
        kernel_dim: cols.len(),
        kernel,
        form,
        form_eigenvalues: eig,
        signature,
    })
}

/// Sum of crossing signatures along `path`. If the result's parity disagrees
/// with the endpoint signs of `det(I − M)`, the grid is refined and the search
/// repeated.
pub fn conley_zehnder(family: &CoefficientFamily, path: &ParameterPath, opts: &CzOptions) -> Result<ConleyZehnder> {
    let mut grid = opts.grid;
    let mut last = None;
    for _ in 0..=opts.max_refinements {
        let sampled = SymplecticPath::sample(family, path, grid, &opts.integrator)?;
        let locations = find_crossings(family, &sampled, opts)?;
        let crossings = locations.iter().map(|&t| crossing_signature(family, path, t, opts)).collect::<Result<Vec<_>>>()?;
        let index: i64 = crossings.iter().map(|c| c.signature).sum();
        let m0 = &sampled.matrices[0];
        let m1 = sampled.matrices.last().expect("nonempty grid");
        let endpoint_sigma = [sigma_min(m0), sigma_min(m1)];
        let parity_expected = (det_i_minus(m0) < 0.0) != (det_i_minus(m1) < 0.0);
        let result = ConleyZehnder { index, crossings, grid, endpoint_sigma, orientation: ORIENTATION };
        if (index.rem_euclid(2) == 1) == parity_expected {
            return Ok(result);
        }
        last = Some(result);
        grid = 2 * grid - 1;
    }
    let r = last.expect("at least one attempt");
    Err(Error::Inconsistent(format!(
        "crossing signatures sum to {} at grid {}, which contradicts the endpoint determinant signs",
        r.index, r.grid
    )))
}

pub fn conley_zehnder_interval(family: &CoefficientFamily, a: f64, b: f64, opts: &CzOptions) -> Result<ConleyZehnder> {
    conley_zehnder(family, &ParameterPath::interval(a, b)?, opts)
}
