//! Fourier–Galerkin truncations of `𝒜_λ u = Ju' + S_λ u` (on `L²`) and of the
//! Hessian `L_λ` (on `H^{1/2}`), and spectral flow by eigenvalue windows.
//!
//! Real basis order: the `2n` constant vectors, then for `k = 1..=N` the `2n`
//! vectors `sin(kt)e_j` followed by the `2n` vectors `cos(kt)e_j`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::integrator::standard_j;
use crate::model::{CoefficientFamily, ParamPoint, ParameterPath, PERIOD};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum OperatorKind {
    /// `Ju' + Su` with the `L²` Gram matrix.
    A,
    /// `Γ(u, v) + ∫⟨Su, v⟩` with the `H^{1/2}` Gram matrix.
    L,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subspace {
    Plus,
    Minus,
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct FourierTruncation {
    pub half_dim: usize,
    pub modes: usize,
}

impl FourierTruncation {
    pub fn new(half_dim: usize, modes: usize) -> Result<Self> {
        if half_dim == 0 || modes == 0 {
            return Err(Error::Invalid("truncation needs n >= 1 and N >= 1".into()));
        }
        Ok(FourierTruncation { half_dim, modes })
    }

    pub fn dim(&self) -> usize {
        2 * self.half_dim * (2 * self.modes + 1)
    }

    fn d(&self) -> usize {
        2 * self.half_dim
    }

    pub fn constant_index(&self, j: usize) -> usize {
        j
    }

    pub fn sin_index(&self, k: usize, j: usize) -> usize {
        self.d() + (k - 1) * 2 * self.d() + j
    }

    pub fn cos_index(&self, k: usize, j: usize) -> usize {
        self.d() + (k - 1) * 2 * self.d() + self.d() + j
    }

    /// Diagonal of the Gram matrix for the chosen operator's inner product.
    pub fn gram(&self, kind: OperatorKind) -> DVector<f64> {
        let mut g = DVector::zeros(self.dim());
        for j in 0..self.d() {
            g[self.constant_index(j)] = 2.0 * PI;
            for k in 1..=self.modes {
                let w = match kind {
                    OperatorKind::A => PI,
                    OperatorKind::L => PI * k as f64,
                };
                g[self.sin_index(k, j)] = w;
                g[self.cos_index(k, j)] = w;
            }
        }
        g
    }

    /// Columns span `E₊`, `E₋` (vectors `a cos kt ∓ J a sin kt`) or `E₀` (constants).
    pub fn subspace(&self, which: Subspace) -> DMatrix<f64> {
        let d = self.d();
        let j_mat = standard_j(self.half_dim);
        match which {
            Subspace::Zero => {
                let mut m = DMatrix::zeros(self.dim(), d);
                for j in 0..d {
                    m[(self.constant_index(j), j)] = 1.0;
                }
                m
            }
            Subspace::Plus | Subspace::Minus => {
                let sign = if which == Subspace::Plus { -1.0 } else { 1.0 };
                let mut m = DMatrix::zeros(self.dim(), d * self.modes);
                for k in 1..=self.modes {
                    for a in 0..d {
                        let col = (k - 1) * d + a;
                        m[(self.cos_index(k, a), col)] = 1.0;
                        for r in 0..d {
                            m[(self.sin_index(k, r), col)] = sign * j_mat[(r, a)];
                        }
                    }
                }
                m
            }
        }
    }

    pub(crate) fn quadrature_nodes(&self) -> usize {
        8 * (self.modes + 1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GalerkinAssembly {
    pub kind: OperatorKind,
    pub point: ParamPoint,
    pub truncation: FourierTruncation,
    pub stiffness: DMatrix<f64>,
    pub gram: DVector<f64>,
}

impl GalerkinAssembly {
    /// Eigenvalues of the pencil `Bx = μGx`, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let scale = self.gram.map(|g| 1.0 / g.sqrt());
        let mut reduced = self.stiffness.clone();
        for i in 0..reduced.nrows() {
            for j in 0..reduced.ncols() {
                reduced[(i, j)] *= scale[i] * scale[j];
            }
        }
        sorted_symmetric_eigenvalues(reduced)
    }

    /// Pencil eigenvector (in basis coordinates, `G`-normalized) for the
    /// eigenvalue of smallest modulus.
    pub fn smallest_eigenpair(&self) -> (f64, DVector<f64>) {
        let scale = self.gram.map(|g| 1.0 / g.sqrt());
        let n = self.stiffness.nrows();
        let reduced = DMatrix::from_fn(n, n, |i, j| self.stiffness[(i, j)] * scale[i] * scale[j]);
        let eig = SymmetricEigen::new(reduced);
        let k = (0..n).min_by(|&a, &b| eig.eigenvalues[a].abs().partial_cmp(&eig.eigenvalues[b].abs()).expect("finite")).expect("nonempty");
        (eig.eigenvalues[k], eig.eigenvectors.column(k).component_mul(&scale))
    }

    pub fn asymmetry(&self) -> f64 {
        (&self.stiffness - self.stiffness.transpose()).amax()
    }
}

fn sorted_symmetric_eigenvalues(m: DMatrix<f64>) -> Vec<f64> {
    let mut v: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite eigenvalues"));
    v
}

pub fn assemble(kind: OperatorKind, family: &CoefficientFamily, p: ParamPoint, modes: usize) -> Result<GalerkinAssembly> {
    let tr = FourierTruncation::new(family.half_dim(), modes)?;
    let d = family.dim();
    let nodes = tr.quadrature_nodes();
    let mut s_samples = vec![0.0; nodes * d * d];
    for q in 0..nodes {
        family.fill(p, tr.node(q), &mut s_samples[q * d * d..(q + 1) * d * d])?;
    }
    let b = tr.stiffness(&s_samples);
    Ok(GalerkinAssembly { kind, point: p, truncation: tr, stiffness: b, gram: tr.gram(kind) })
}

impl FourierTruncation {
    pub(crate) fn node(&self, q: usize) -> f64 {
        PERIOD * q as f64 / self.quadrature_nodes() as f64
    }

    /// Scalar mode values at the quadrature nodes: row 0 constant, row
    /// `2k − 1` `sin(kt)`, row `2k` `cos(kt)`.
    pub(crate) fn mode_values(&self) -> DMatrix<f64> {
        let nodes = self.quadrature_nodes();
        DMatrix::from_fn(2 * self.modes + 1, nodes, |a, q| {
            let t = self.node(q);
            match a {
                0 => 1.0,
                _ if a % 2 == 1 => (((a + 1) / 2) as f64 * t).sin(),
                _ => ((a / 2) as f64 * t).cos(),
            }
        })
    }

    pub(crate) fn index_of(&self, mode_row: usize, comp: usize) -> usize {
        if mode_row == 0 {
            self.constant_index(comp)
        } else if mode_row % 2 == 1 {
            self.sin_index((mode_row + 1) / 2, comp)
        } else {
            self.cos_index(mode_row / 2, comp)
        }
    }

    /// `B_{αβ} = ∫⟨J e_β' + S e_β, e_α⟩` from column-major samples of `S` at
    /// the quadrature nodes (trapezoid rule; the `J` part is exact).
    pub(crate) fn stiffness(&self, s_samples: &[f64]) -> DMatrix<f64> {
        let d = self.d();
        let m = 2 * self.modes + 1;
        let nodes = self.quadrature_nodes();
        let w = PERIOD / nodes as f64;
        let phi = self.mode_values();
        let mut b = DMatrix::<f64>::zeros(self.dim(), self.dim());
        for i in 0..d {
            for j in 0..d {
                let weights: Vec<f64> = (0..nodes).map(|q| w * s_samples[q * d * d + j * d + i]).collect();
                if weights.iter().all(|x| *x == 0.0) {
                    continue;
                }
                let scaled = DMatrix::from_fn(m, nodes, |a, q| phi[(a, q)] * weights[q]);
                let block = &scaled * phi.transpose();
                for a in 0..m {
                    for c in 0..m {
                        b[(self.index_of(a, i), self.index_of(c, j))] += block[(a, c)];
                    }
                }
            }
        }
        // (sin kt)' = k cos kt and (cos kt)' = -k sin kt
        let j_mat = standard_j(self.half_dim);
        for k in 1..=self.modes {
            let kp = k as f64 * PI;
            for i in 0..d {
                for j in 0..d {
                    let jij = j_mat[(i, j)];
                    if jij != 0.0 {
                        b[(self.cos_index(k, i), self.sin_index(k, j))] += kp * jij;
                        b[(self.sin_index(k, i), self.cos_index(k, j))] -= kp * jij;
                    }
                }
            }
        }
        b
    }
}

pub fn assemble_a(family: &CoefficientFamily, p: ParamPoint, modes: usize) -> Result<GalerkinAssembly> {
    assemble(OperatorKind::A, family, p, modes)
}

pub fn assemble_l(family: &CoefficientFamily, p: ParamPoint, modes: usize) -> Result<GalerkinAssembly> {
    assemble(OperatorKind::L, family, p, modes)
}

/// Hermitian assembly in the exponential basis `e^{ikt}e_j`, `|k| ≤ N`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexAssembly {
    pub kind: OperatorKind,
    pub stiffness: DMatrix<Complex64>,
    pub gram: DVector<f64>,
}

impl ComplexAssembly {
    pub fn eigenvalues(&self) -> Vec<f64> {
        let scale = self.gram.map(|g| 1.0 / g.sqrt());
        let n = self.stiffness.nrows();
        let reduced = DMatrix::from_fn(n, n, |i, j| self.stiffness[(i, j)] * (scale[i] * scale[j]));
        let mut v: Vec<f64> = SymmetricEigen::new(reduced).eigenvalues.iter().copied().collect();
        v.sort_by(|a, b| a.partial_cmp(b).expect("finite eigenvalues"));
        v
    }

    pub fn hermitian_defect(&self) -> f64 {
        (&self.stiffness - self.stiffness.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

pub fn assemble_complex(kind: OperatorKind, family: &CoefficientFamily, p: ParamPoint, modes: usize) -> Result<ComplexAssembly> {
    let tr = FourierTruncation::new(family.half_dim(), modes)?;
    let d = family.dim();
    let nodes = tr.quadrature_nodes();
    let span = 2 * modes;
    // Fourier coefficients Ŝ(m) = (1/2π)∫ S e^{-imt} dt for |m| ≤ 2N
    let mut s_hat = vec![Complex64::new(0.0, 0.0); (2 * span + 1) * d * d];
    let mut buf = vec![0.0; d * d];
    for q in 0..nodes {
        let t = PERIOD * q as f64 / nodes as f64;
        family.fill(p, t, &mut buf)?;
        for (mi, m) in (-(span as i64)..=span as i64).enumerate() {
            let e = Complex64::from_polar(1.0 / nodes as f64, -(m as f64) * t);
            for idx in 0..d * d {
                if buf[idx] != 0.0 {
                    s_hat[mi * d * d + idx] += e * buf[idx];
                }
            }
        }
    }
    let dim = tr.dim();
    let pos = |k: i64, comp: usize| ((k + modes as i64) as usize) * d + comp;
    let j_mat = standard_j(family.half_dim());
    let mut b = DMatrix::<Complex64>::zeros(dim, dim);
    let mut g = DVector::<f64>::zeros(dim);
    for k in -(modes as i64)..=modes as i64 {
        for i in 0..d {
            g[pos(k, i)] = match kind {
                OperatorKind::A => PERIOD,
                OperatorKind::L => PERIOD * (k.unsigned_abs().max(1)) as f64,
            };
            for l in -(modes as i64)..=modes as i64 {
                for j in 0..d {
                    // row (k, i), column (l, j): ∫ (J (e^{ilt} e_j)' + S e^{ilt} e_j)_i e^{-ikt}
                    let mi = (k - l + span as i64) as usize;
                    let mut v = s_hat[mi * d * d + j * d + i] * PERIOD;
                    if k == l {
                        v += Complex64::new(0.0, l as f64) * j_mat[(i, j)] * PERIOD;
                    }
                    b[(pos(k, i), pos(l, j))] = v;
                }
            }
        }
    }
    Ok(ComplexAssembly { kind, stiffness: b, gram: g })
}

/// `ceil(4 + 2 · max ‖S‖)` over sample points along the path.
pub fn default_modes(family: &CoefficientFamily, path: &ParameterPath) -> Result<usize> {
    let points: Vec<ParamPoint> = (0..=8).map(|i| path.at(i as f64 / 8.0)).collect();
    let norm = family.max_norm(&points, 32)?;
    Ok((4.0 + 2.0 * norm).ceil() as usize)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FlowOptions {
    pub initial_segments: usize,
    pub max_depth: usize,
    /// Windows `[−Λ, Λ]` are chosen with `Λ` inside `(0, band]`.
    pub band: f64,
    /// Endpoint eigenvalues must exceed this in modulus.
    pub invertibility_tol: f64,
    /// Minimum clearance between a window edge and any eigenvalue.
    pub edge_tol: f64,
}

impl Default for FlowOptions {
    fn default() -> Self {
        FlowOptions { initial_segments: 32, max_depth: 24, band: 1.0, invertibility_tol: 1e-6, edge_tol: 1e-9 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FlowSegment {
    pub tau: [f64; 2],
    pub window: f64,
    pub counts: [usize; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralFlow {
    pub value: i64,
    pub segments: Vec<FlowSegment>,
    pub max_depth: usize,
    pub endpoint_min_abs: [f64; 2],
}

impl SpectralFlow {
    /// Segments whose window count changed, i.e. where eigenvalues crossed zero.
    pub fn crossings(&self) -> impl Iterator<Item = &FlowSegment> {
        self.segments.iter().filter(|s| s.counts[0] != s.counts[1])
    }
}

fn min_abs(e: &[f64]) -> f64 {
    e.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()))
}

fn count_window(e: &[f64], window: f64) -> usize {
    e.iter().filter(|&&v| (0.0..=window).contains(&v)).count()
}

/// Picks `Λ` in the widest spectral gap of both endpoints, or `None` if the
/// eigenvalues moved too much for any gap to be trusted.
fn choose_window(e0: &[f64], e1: &[f64], opts: &FlowOptions) -> Option<f64> {
    if e0.len() != e1.len() {
        return None;
    }
    let drift = e0.iter().zip(e1).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let mut abs: Vec<f64> = e0.iter().chain(e1).map(|v| v.abs()).collect();
    abs.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let mut best: Option<(f64, f64)> = None;
    let mut lo = 0.0;
    for &hi in abs.iter().chain(std::iter::once(&f64::INFINITY)) {
        if lo > opts.band {
            break;
        }
        let (window, half) = if hi.is_finite() { (0.5 * (lo + hi), 0.5 * (hi - lo)) } else { (lo + opts.band, opts.band) };
        if window > 0.0 && window <= opts.band.max(lo + opts.band) && best.map_or(true, |(_, h)| half > h) {
            best = Some((window, half));
        }
        lo = hi;
    }
    let (window, half) = best?;
    if half <= 2.0 * drift + opts.edge_tol {
        return None;
    }
    let inside = |e: &[f64]| e.iter().filter(|v| v.abs() <= window).count();
    if inside(e0) != inside(e1) {
        return None;
    }
    Some(window)
}

/// Spectral flow of `τ ↦ spectrum(τ)` on `[0, 1]`, bisecting segments until a
/// stable window exists on each.
pub fn spectral_flow_with<F>(mut spectrum: F, opts: &FlowOptions) -> Result<SpectralFlow>
where
    F: FnMut(f64) -> Result<Vec<f64>>,
{
    let k = opts.initial_segments.max(1);
    let grid: Vec<f64> = (0..=k).map(|i| i as f64 / k as f64).collect();
    let mut spectra = Vec::with_capacity(grid.len());
    for &tau in &grid {
        spectra.push(spectrum(tau)?);
    }
    let endpoint_min_abs = [min_abs(&spectra[0]), min_abs(&spectra[k])];
    for (end, m) in endpoint_min_abs.iter().enumerate() {
        if !(*m > opts.invertibility_tol) {
            return Err(Error::NotAdmissible(format!(
                "endpoint degenerate: pencil eigenvalue {m:e} within {:e} of zero at path {}",
                opts.invertibility_tol,
                if end == 0 { "start" } else { "end" }
            )));
        }
    }
    let mut segments = Vec::new();
    let mut max_depth = 0;
    let mut value = 0i64;
    for i in 0..k {
        let mut stack = vec![(grid[i], spectra[i].clone(), grid[i + 1], spectra[i + 1].clone(), 0usize)];
        while let Some((t0, e0, t1, e1, depth)) = stack.pop() {
            if let Some(window) = choose_window(&e0, &e1, opts) {
                let counts = [count_window(&e0, window), count_window(&e1, window)];
                value += counts[1] as i64 - counts[0] as i64;
                max_depth = max_depth.max(depth);
                segments.push(FlowSegment { tau: [t0, t1], window, counts });
                continue;
            }
            if depth >= opts.max_depth {
                return Err(Error::RefinementExhausted(format!("no stable eigenvalue window on [{t0}, {t1}] after {depth} bisections")));
            }
            let tm = 0.5 * (t0 + t1);
            let em = spectrum(tm)?;
            stack.push((tm, em.clone(), t1, e1, depth + 1));
            stack.push((t0, e0, tm, em, depth + 1));
        }
    }
    Ok(SpectralFlow { value, segments, max_depth, endpoint_min_abs })
}

/// Spectral flow over a precomputed, ordered list of assemblies (no refinement).
pub fn spectral_flow(assemblies: &[GalerkinAssembly], opts: &FlowOptions) -> Result<SpectralFlow> {
    if assemblies.len() < 2 {
        return Err(Error::Invalid("spectral flow needs at least two assemblies".into()));
    }
    let first = &assemblies[0];
    if assemblies.iter().any(|a| a.truncation != first.truncation || a.kind != first.kind) {
        return Err(Error::Invalid("assemblies along a path must share operator kind and truncation".into()));
    }
    let spectra: Vec<Vec<f64>> = assemblies.iter().map(GalerkinAssembly::eigenvalues).collect();
    let k = spectra.len() - 1;
    let opts = FlowOptions { initial_segments: k, max_depth: 0, ..*opts };
    spectral_flow_with(
        |tau| {
            let i = (tau * k as f64).round() as usize;
            Ok(spectra[i.min(k)].clone())
        },
        &opts,
    )
}

/// Spectral flow of the `kind` family along `path` at truncation `modes`.
pub fn spectral_flow_path(
    kind: OperatorKind,
    family: &CoefficientFamily,
    path: &ParameterPath,
    modes: usize,
    opts: &FlowOptions,
) -> Result<SpectralFlow> {
    spectral_flow_with(|tau| Ok(assemble(kind, family, path.at(tau), modes)?.eigenvalues()), opts)
}

/// As [`spectral_flow_path`] with the Hermitian exponential-basis assembly.
pub fn spectral_flow_path_complex(
    kind: OperatorKind,
    family: &CoefficientFamily,
    path: &ParameterPath,
    modes: usize,
    opts: &FlowOptions,
) -> Result<SpectralFlow> {
    spectral_flow_with(|tau| Ok(assemble_complex(kind, family, path.at(tau), modes)?.eigenvalues()), opts)
}

/// Spectral flow around a closed loop. The base point is moved to the most
/// invertible initial grid point, since loop flow does not depend on it.
pub fn spectral_flow_loop(
    kind: OperatorKind,
    family: &CoefficientFamily,
    path: &ParameterPath,
    modes: usize,
    opts: &FlowOptions,
) -> Result<SpectralFlow> {
    let k = opts.initial_segments.max(1);
    let mut best = (0.0, f64::NEG_INFINITY);
    for i in 0..k {
        let tau = i as f64 / k as f64;
        let m = min_abs(&assemble(kind, family, path.at(tau), modes)?.eigenvalues());
        if m > best.1 {
            best = (tau, m);
        }
    }
    let base = best.0;
    spectral_flow_with(|tau| Ok(assemble(kind, family, path.at((base + tau).rem_euclid(1.0)), modes)?.eigenvalues()), opts)
}
