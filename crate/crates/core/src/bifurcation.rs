//! Bifurcation candidates from `ρ(λ, 0)`, complement components of the
//! candidate set, the path invariant `d(γ)`, and Newton continuation of
//! nontrivial periodic orbits by Fourier–Galerkin collocation.

use std::collections::VecDeque;
use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::integrator::{real_monodromy, IntegratorOptions};
use crate::model::{CoefficientFamily, DomainKind, NonlinearFamily, ParamPoint, ParameterDomain, ParameterPath};
use crate::monodromy::{monodromy_index_path, rho_real, scan_values, Degeneracy, MonodromyIndex, MonodromyOptions, DEGENERACY_REL};
use crate::spectral::{assemble_a, FourierTruncation};

/// `d(γ)`: winding of `det Λ(γ(τ), s)` over the rectangle
/// `[0, 1] × [−margin, margin]` in path coordinates.
pub fn d_gamma(family: &CoefficientFamily, path: &ParameterPath, opts: &MonodromyOptions) -> Result<MonodromyIndex> {
    monodromy_index_path(family, path, opts)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CandidateOptions {
    pub integrator: IntegratorOptions,
    pub refine_width: f64,
    /// Relative threshold for counting small singular values of `I − M`.
    pub kernel_tol: f64,
}

impl Default for CandidateOptions {
    fn default() -> Self {
        CandidateOptions { integrator: IntegratorOptions::default(), refine_width: 1e-9, kernel_tol: 1e-5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BifurcationCandidate {
    pub point: ParamPoint,
    pub abs_rho: f64,
    pub kernel_dim: usize,
    /// Axis along which the zero was refined.
    pub axis: usize,
    pub bracket: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CandidateSet {
    /// Cells `[i, j]` containing a refined zero of `ρ(·, 0)`, sorted.
    pub cells: Vec<[usize; 2]>,
    pub candidates: Vec<BifurcationCandidate>,
    /// `ρ(·, 0)` at the grid nodes, indexed `[j][i]`.
    pub rho: Vec<Vec<f64>>,
}

/// Number of grid cells along each axis.
pub fn cell_shape(domain: &ParameterDomain) -> [usize; 2] {
    match domain.kind {
        DomainKind::Interval { .. } => [domain.resolution[0] - 1, 1],
        DomainKind::Circle { .. } => [domain.resolution[0], 1],
        DomainKind::Rectangle { .. } => [domain.resolution[0] - 1, domain.resolution[1] - 1],
    }
}

fn kernel_dim(family: &CoefficientFamily, p: ParamPoint, opts: &CandidateOptions) -> Result<usize> {
    let m = real_monodromy(family, p, &opts.integrator)?.monodromy;
    let d = m.nrows();
    let tol = opts.kernel_tol * (1.0 + m.norm());
    Ok((DMatrix::identity(d, d) - m).singular_values().iter().filter(|s| **s < tol).count())
}

/// Cells on either side of coordinate `x` in the sorted node list `xs`.
fn cells_at(xs: &[f64], x: f64, cells: usize) -> Vec<usize> {
    let h = (xs[xs.len() - 1] - xs[0]) / (xs.len() - 1) as f64;
    let pos = (x - xs[0]) / h;
    let nearest = pos.round();
    let mut out = Vec::new();
    if (pos - nearest).abs() < 1e-9 {
        let i = nearest as i64;
        for c in [i - 1, i] {
            if c >= 0 && (c as usize) < cells {
                out.push(c as usize);
            }
        }
    } else {
        out.push((pos.floor().max(0.0) as usize).min(cells - 1));
    }
    out
}

/// Zeros of `ρ(·, 0)` along every grid line, refined by bisection on sign
/// changes and golden-section search at local minima of `|ρ|`.
pub fn candidate_scan(family: &CoefficientFamily, domain: &ParameterDomain, opts: &CandidateOptions) -> Result<CandidateSet> {
    domain.validate()?;
    let [r0, r1] = domain.resolution;
    let shape = cell_shape(domain);
    let rho_at = |p: ParamPoint| rho_real(family, p, &opts.integrator);
    let mut rho = vec![vec![0.0; r0]; r1.max(1)];
    for (j, row) in rho.iter_mut().enumerate() {
        for (i, v) in row.iter_mut().enumerate() {
            *v = rho_at(domain.node(i, j))?;
        }
    }
    let scale = rho.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    let threshold = DEGENERACY_REL * (1.0 + scale);
    let total = r0 * r1.max(1);
    let below = rho.iter().flatten().filter(|v| v.abs() < threshold).count();
    if 2 * below > total {
        return Err(Error::EverywhereDegenerate { below, total });
    }

    let mut cells: Vec<[usize; 2]> = Vec::new();
    let mut candidates = Vec::new();
    let mut record = |family_p: ParamPoint, d: &Degeneracy, axis: usize, cs: Vec<[usize; 2]>| -> Result<()> {
        cells.extend(cs);
        candidates.push(BifurcationCandidate {
            point: family_p,
            abs_rho: d.abs_rho,
            kernel_dim: kernel_dim(family, family_p, opts)?,
            axis,
            bracket: d.bracket,
        });
        Ok(())
    };

    match domain.kind {
        DomainKind::Interval { .. } | DomainKind::Circle { .. } => {
            let periodic = matches!(domain.kind, DomainKind::Circle { .. });
            let mut xs: Vec<f64> = (0..r0).map(|i| domain.node(i, 0).0[0]).collect();
            let mut vals = rho[0].clone();
            if let DomainKind::Circle { start, circumference } = domain.kind {
                xs.push(start + circumference);
                vals.push(vals[0]);
            }
            let found = scan_line(&xs, &vals, |x| rho_at(ParamPoint::one(x)), opts.refine_width)?;
            for d in found {
                let mut cs: Vec<[usize; 2]> = cells_at(&xs, d.lambda, xs.len() - 1).into_iter().map(|i| [i % shape[0], 0]).collect();
                if periodic && cs.is_empty() {
                    cs.push([0, 0]);
                }
                record(ParamPoint::one(d.lambda), &d, 0, cs)?;
            }
        }
        DomainKind::Rectangle { .. } => {
            let xs: Vec<f64> = (0..r0).map(|i| domain.node(i, 0).0[0]).collect();
            let ys: Vec<f64> = (0..r1).map(|j| domain.node(0, j).0[1]).collect();
            for (j, &y) in ys.iter().enumerate() {
                let found = scan_line(&xs, &rho[j], |x| rho_at(ParamPoint::two(x, y)), opts.refine_width)?;
                for d in found {
                    let rows = cells_at(&ys, y, shape[1]);
                    let cs = cells_at(&xs, d.lambda, shape[0]).into_iter().flat_map(|i| rows.iter().map(move |&r| [i, r])).collect();
                    record(ParamPoint::two(d.lambda, y), &d, 0, cs)?;
                }
            }
            for (i, &x) in xs.iter().enumerate() {
                let column: Vec<f64> = rho.iter().map(|row| row[i]).collect();
                let found = scan_line(&ys, &column, |y| rho_at(ParamPoint::two(x, y)), opts.refine_width)?;
                for d in found {
                    let cols = cells_at(&xs, x, shape[0]);
                    let cs = cells_at(&ys, d.lambda, shape[1]).into_iter().flat_map(|r| cols.iter().map(move |&c| [c, r])).collect();
                    record(ParamPoint::two(x, d.lambda), &d, 1, cs)?;
                }
            }
        }
    }
    cells.sort();
    cells.dedup();
    Ok(CandidateSet { cells, candidates, rho })
}

/// A grid line that is degenerate throughout contributes every node.
fn scan_line<F>(xs: &[f64], vals: &[f64], f: F, width: f64) -> Result<Vec<Degeneracy>>
where
    F: Fn(f64) -> Result<f64>,
{
    match scan_values(xs, vals, f, width) {
        Err(Error::EverywhereDegenerate { .. }) => {
            Ok(xs.iter().zip(vals).map(|(&x, v)| Degeneracy { lambda: x, bracket: [x, x], abs_rho: v.abs() }).collect())
        }
        other => other,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComponentReport {
    pub components: usize,
    /// Component label per cell, indexed `[j][i]`; `-1` marks candidate cells.
    pub labels: Vec<Vec<i64>>,
    pub sizes: Vec<usize>,
}

/// 4-connected components of the cells not in `cells`. Circle domains wrap.
pub fn disconnection_report(domain: &ParameterDomain, cells: &[[usize; 2]]) -> ComponentReport {
    let [nx, ny] = cell_shape(domain);
    let periodic = matches!(domain.kind, DomainKind::Circle { .. });
    let mut labels = vec![vec![0i64; nx]; ny];
    for c in cells {
        if c[0] < nx && c[1] < ny {
            labels[c[1]][c[0]] = -1;
        }
    }
    let mut sizes = Vec::new();
    let mut next = 1i64;
    for j0 in 0..ny {
        for i0 in 0..nx {
            if labels[j0][i0] != 0 {
                continue;
            }
            let mut size = 0;
            let mut queue = VecDeque::from([(i0, j0)]);
            labels[j0][i0] = next;
            while let Some((i, j)) = queue.pop_front() {
                size += 1;
                let mut neighbours = Vec::with_capacity(4);
                if i > 0 {
                    neighbours.push((i - 1, j));
                } else if periodic && nx > 1 {
                    neighbours.push((nx - 1, j));
                }
                if i + 1 < nx {
                    neighbours.push((i + 1, j));
                } else if periodic && nx > 1 {
                    neighbours.push((0, j));
                }
                if j > 0 {
                    neighbours.push((i, j - 1));
                }
                if j + 1 < ny {
                    neighbours.push((i, j + 1));
                }
                for (a, b) in neighbours {
                    if labels[b][a] == 0 {
                        labels[b][a] = next;
                        queue.push_back((a, b));
                    }
                }
            }
            sizes.push(size);
            next += 1;
        }
    }
    // labels are 1-based during the fill; report 0-based
    for row in labels.iter_mut() {
        for l in row.iter_mut() {
            if *l > 0 {
                *l -= 1;
            }
        }
    }
    ComponentReport { components: sizes.len(), labels, sizes }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NewtonOptions {
    pub max_iterations: usize,
    /// Discrete `L²` residual accepted as converged.
    pub tol: f64,
    /// Sup-norm below which a converged solution is the trivial one.
    pub triviality: f64,
    pub max_halvings: usize,
    /// Seeds tried are `seed · 2^k` for `k = 0..=seed_doublings`.
    pub seed_doublings: usize,
    pub fd_step: f64,
    pub divergence: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions {
            max_iterations: 60,
            tol: 1e-8,
            triviality: 1e-4,
            max_halvings: 20,
            seed_doublings: 3,
            fd_step: 1e-6,
            divergence: 1e6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrbitBranch {
    pub point: ParamPoint,
    pub modes: usize,
    /// Real Fourier coefficients: constants, then `sin(kt)`, `cos(kt)` blocks.
    pub coefficients: Vec<f64>,
    /// `max_t |u(t)|`.
    pub amplitude: f64,
    pub l2_norm: f64,
    pub residual: f64,
    pub iterations: usize,
    pub seed: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SeedOutcome {
    Converged,
    Collapsed,
    Diverged,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeedAttempt {
    pub seed: f64,
    pub outcome: SeedOutcome,
    pub amplitude: f64,
    pub residual: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum OrbitOutcome {
    Branch { orbit: OrbitBranch, attempts: Vec<SeedAttempt> },
    NoBranch { attempts: Vec<SeedAttempt> },
}

impl OrbitOutcome {
    pub fn orbit(&self) -> Option<&OrbitBranch> {
        match self {
            OrbitOutcome::Branch { orbit, .. } => Some(orbit),
            OrbitOutcome::NoBranch { .. } => None,
        }
    }
}

struct Collocation<'a> {
    nl: &'a NonlinearFamily,
    point: ParamPoint,
    tr: FourierTruncation,
    phi: DMatrix<f64>,
    gamma: DMatrix<f64>,
    gram: DVector<f64>,
    fd_step: f64,
}

impl Collocation<'_> {
    fn nodes(&self) -> usize {
        self.phi.ncols()
    }

    fn weight(&self) -> f64 {
        2.0 * PI / self.nodes() as f64
    }

    /// `u(t_q)` for every quadrature node, node-major.
    fn values(&self, c: &DVector<f64>) -> Vec<f64> {
        let d = self.nl.dim();
        let mut u = vec![0.0; self.nodes() * d];
        for q in 0..self.nodes() {
            for i in 0..d {
                u[q * d + i] = (0..self.phi.nrows()).map(|a| self.phi[(a, q)] * c[self.tr.index_of(a, i)]).sum();
            }
        }
        u
    }

    fn residual(&self, c: &DVector<f64>) -> Result<DVector<f64>> {
        let d = self.nl.dim();
        let u = self.values(c);
        let mut r = &self.gamma * c;
        let mut g = vec![0.0; d];
        let w = self.weight();
        for q in 0..self.nodes() {
            self.nl.gradient(self.point, self.tr.node(q), &u[q * d..(q + 1) * d], &mut g)?;
            for i in 0..d {
                for a in 0..self.phi.nrows() {
                    r[self.tr.index_of(a, i)] += w * self.phi[(a, q)] * g[i];
                }
            }
        }
        Ok(r)
    }

    /// Discrete `L²` norm of the projected residual, per unit time.
    fn norm(&self, r: &DVector<f64>) -> f64 {
        (r.iter().zip(self.gram.iter()).map(|(x, g)| x * x / g).sum::<f64>() / (2.0 * PI)).sqrt()
    }

    fn jacobian(&self, c: &DVector<f64>) -> Result<DMatrix<f64>> {
        let d = self.nl.dim();
        let u = self.values(c);
        let mut samples = vec![0.0; self.nodes() * d * d];
        let (mut gp, mut gm) = (vec![0.0; d], vec![0.0; d]);
        for q in 0..self.nodes() {
            let uq = &u[q * d..(q + 1) * d];
            let h = self.fd_step * (1.0 + uq.iter().fold(0.0f64, |m, v| m.max(v.abs())));
            let t = self.tr.node(q);
            for j in 0..d {
                let mut up = uq.to_vec();
                let mut um = uq.to_vec();
                up[j] += h;
                um[j] -= h;
                self.nl.gradient(self.point, t, &up, &mut gp)?;
                self.nl.gradient(self.point, t, &um, &mut gm)?;
                for i in 0..d {
                    samples[q * d * d + j * d + i] = (gp[i] - gm[i]) / (2.0 * h);
                }
            }
        }
        Ok(self.tr.stiffness(&samples))
    }

    fn amplitude(&self, c: &DVector<f64>) -> f64 {
        let d = self.nl.dim();
        self.values(c).chunks(d).map(|v| v.iter().map(|x| x * x).sum::<f64>().sqrt()).fold(0.0, f64::max)
    }

    fn l2_norm(&self, c: &DVector<f64>) -> f64 {
        c.iter().zip(self.gram.iter()).map(|(x, g)| x * x * g).sum::<f64>().sqrt()
    }
}

enum Run {
    Converged { c: DVector<f64>, residual: f64, iterations: usize },
    Diverged { residual: f64, iterations: usize },
}

fn newton_run(col: &Collocation, mut c: DVector<f64>, opts: &NewtonOptions) -> Result<Run> {
    let mut r = col.residual(&c)?;
    let mut res = col.norm(&r);
    for it in 0..opts.max_iterations {
        if res < opts.tol {
            return Ok(Run::Converged { c, residual: res, iterations: it });
        }
        let jac = col.jacobian(&c)?;
        let svd = jac.svd(true, true);
        let eps = 1e-10 * svd.singular_values.max();
        let step = svd.solve(&(-&r), eps).map_err(|e| Error::Inconsistent(format!("least-squares solve failed: {e}")))?;
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..=opts.max_halvings {
            let trial = &c + &step * alpha;
            let tr = col.residual(&trial)?;
            let tres = col.norm(&tr);
            if tres.is_finite() && tres < res {
                c = trial;
                r = tr;
                res = tres;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !res.is_finite() || col.amplitude(&c) > opts.divergence {
            return Ok(Run::Diverged { residual: res, iterations: it + 1 });
        }
        if !accepted {
            return Err(Error::NewtonStagnation { residual: res, iterations: it + 1 });
        }
    }
    if res < opts.tol {
        return Ok(Run::Converged { c, residual: res, iterations: opts.max_iterations });
    }
    Err(Error::NewtonStagnation { residual: res, iterations: opts.max_iterations })
}

/// Damped Newton on the truncated Fourier system for `Ju' + ∇_u H(λ, t, u) = 0`,
/// seeded along the near-kernel direction of the linearization. Seeds that
/// collapse to the trivial solution or diverge are retried at double size.
pub fn newton_orbit(nl: &NonlinearFamily, point: ParamPoint, modes: usize, seed: f64, opts: &NewtonOptions) -> Result<OrbitOutcome> {
    if !(seed > 0.0) {
        return Err(Error::Invalid(format!("seed amplitude must be positive, got {seed}")));
    }
    let tr = FourierTruncation::new(nl.half_dim(), modes)?;
    let d = nl.dim();
    let col = Collocation {
        nl,
        point,
        tr,
        phi: tr.mode_values(),
        gamma: tr.stiffness(&vec![0.0; tr.quadrature_nodes() * d * d]),
        gram: tr.gram(crate::spectral::OperatorKind::A),
        fd_step: opts.fd_step,
    };
    let (_, direction) = assemble_a(nl.linearization(), point, modes)?.smallest_eigenpair();
    let unit = &direction / col.amplitude(&direction);
    let mut attempts = Vec::new();
    for k in 0..=opts.seed_doublings {
        let s = seed * 2f64.powi(k as i32);
        match newton_run(&col, &unit * s, opts)? {
            Run::Converged { c, residual, iterations } => {
                let amplitude = col.amplitude(&c);
                if amplitude < opts.triviality {
                    attempts.push(SeedAttempt { seed: s, outcome: SeedOutcome::Collapsed, amplitude, residual, iterations });
                    continue;
                }
                attempts.push(SeedAttempt { seed: s, outcome: SeedOutcome::Converged, amplitude, residual, iterations });
                let orbit = OrbitBranch {
                    point,
                    modes,
                    l2_norm: col.l2_norm(&c),
                    coefficients: c.iter().copied().collect(),
                    amplitude,
                    residual,
                    iterations,
                    seed: s,
                };
                return Ok(OrbitOutcome::Branch { orbit, attempts });
            }
            Run::Diverged { residual, iterations } => {
                attempts.push(SeedAttempt { seed: s, outcome: SeedOutcome::Diverged, amplitude: f64::INFINITY, residual, iterations });
            }
        }
    }
    Ok(OrbitOutcome::NoBranch { attempts })
}

/// `u(t)` of an orbit at the given times.
pub fn orbit_values(orbit: &OrbitBranch, half_dim: usize, times: &[f64]) -> Result<Vec<Vec<f64>>> {
    let tr = FourierTruncation::new(half_dim, orbit.modes)?;
    if orbit.coefficients.len() != tr.dim() {
        return Err(Error::Invalid("coefficient count does not match the truncation".into()));
    }
    let d = 2 * half_dim;
    Ok(times
        .iter()
        .map(|&t| {
            (0..d)
                .map(|i| {
                    let mut v = orbit.coefficients[tr.constant_index(i)];
                    for k in 1..=orbit.modes {
                        let kt = k as f64 * t;
                        v += orbit.coefficients[tr.sin_index(k, i)] * kt.sin() + orbit.coefficients[tr.cos_index(k, i)] * kt.cos();
                    }
                    v
                })
                .collect()
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cubic() -> NonlinearFamily {
        NonlinearFamily::parse(1, &["lambda*u1 + (u1^2 + u2^2)*u1".into(), "lambda*u2 + (u1^2 + u2^2)*u2".into()], None).unwrap()
    }

    #[test]
    fn line_candidates_split_square() {
        let f = CoefficientFamily::scalar(1, 2, "lambda1").unwrap();
        let dom = ParameterDomain::rectangle([0.5, 0.5], [1.5, 1.5], [21, 21], vec![]).unwrap();
        let set = candidate_scan(&f, &dom, &CandidateOptions::default()).unwrap();
        assert!(!set.cells.is_empty());
        // λ₁ = 1 is the node column 10, bordering cell columns 9 and 10
        assert!(set.cells.iter().all(|c| c[0] == 9 || c[0] == 10));
        for j in 0..20 {
            assert!(set.cells.contains(&[9, j]) && set.cells.contains(&[10, j]));
        }
        assert!(set.candidates.iter().all(|c| (c.point.0[0] - 1.0).abs() < 1e-7 && c.kernel_dim == 2));
        assert_eq!(disconnection_report(&dom, &set.cells).components, 2);
    }

    #[test]
    fn admissible_family_has_no_candidates() {
        let f = CoefficientFamily::scalar(1, 1, "0.3 + 0.1*lambda").unwrap();
        let dom = ParameterDomain::interval(0.0, 1.0, 41).unwrap();
        let set = candidate_scan(&f, &dom, &CandidateOptions::default()).unwrap();
        assert!(set.cells.is_empty());
        assert_eq!(disconnection_report(&dom, &set.cells).components, 1);
    }

    #[test]
    fn interval_candidates() {
        let f = CoefficientFamily::scalar(1, 1, "lambda").unwrap();
        let dom = ParameterDomain::interval(0.55, 2.45, 39).unwrap();
        let set = candidate_scan(&f, &dom, &CandidateOptions::default()).unwrap();
        let at: Vec<f64> = set.candidates.iter().map(|c| c.point.0[0]).collect();
        assert_eq!(at.len(), 2);
        assert!((at[0] - 1.0).abs() < 1e-7 && (at[1] - 2.0).abs() < 1e-7);
        assert_eq!(disconnection_report(&dom, &set.cells).components, 3);
    }

    #[test]
    fn circle_components_wrap() {
        let dom = ParameterDomain::circle(0.0, 1.0, 10).unwrap();
        assert_eq!(disconnection_report(&dom, &[[3, 0]]).components, 1);
        assert_eq!(disconnection_report(&dom, &[[3, 0], [7, 0]]).components, 2);
        assert_eq!(disconnection_report(&dom, &[]).components, 1);
    }

    #[test]
    fn flood_fill_corner_arc() {
        let dom = ParameterDomain::rectangle([0.0, 0.0], [1.0, 1.0], [6, 6], vec![]).unwrap();
        let arc = [[2, 0], [2, 1], [1, 2], [0, 2]];
        let r = disconnection_report(&dom, &arc);
        assert_eq!(r.components, 2);
        assert_eq!(r.sizes.iter().sum::<usize>(), 25 - 4);
        assert_eq!(r.labels[0][2], -1);
    }

    #[test]
    fn d_gamma_examples() {
        let f = CoefficientFamily::scalar(1, 2, "lambda1").unwrap();
        let opts = MonodromyOptions::default();
        let path = ParameterPath::new(vec![ParamPoint::two(0.5, 0.3), ParamPoint::two(1.5, 0.3)]).unwrap();
        assert_eq!(d_gamma(&f, &path, &opts).unwrap().index, 2);
        assert_eq!(d_gamma(&f, &path.reversed(), &opts).unwrap().index, -2);
        let inside = ParameterPath::new(vec![ParamPoint::two(0.15, 0.3), ParamPoint::two(0.35, 0.9)]).unwrap();
        assert_eq!(d_gamma(&f, &inside, &opts).unwrap().index, 0);
    }

    #[test]
    fn newton_branch_amplitudes() {
        let nl = cubic();
        let opts = NewtonOptions::default();
        let o = newton_orbit(&nl, ParamPoint::one(0.9), 4, 0.1, &opts).unwrap();
        let orbit = o.orbit().expect("branch at 0.9");
        assert!((orbit.amplitude - 0.1f64.sqrt()).abs() < 1e-3, "{}", orbit.amplitude);
        assert!(orbit.residual < 1e-8);
        // circular orbit: L² norm is R·√(2π)
        assert!((orbit.l2_norm - orbit.amplitude * (2.0 * PI).sqrt()).abs() < 1e-6);
        let o = newton_orbit(&nl, ParamPoint::one(0.99), 4, 0.1, &opts).unwrap();
        assert!((o.orbit().unwrap().amplitude - 0.1).abs() < 1e-3);
        let o = newton_orbit(&nl, ParamPoint::one(1.1), 4, 0.1, &opts).unwrap();
        assert!(o.orbit().is_none());
    }

    #[test]
    fn orbit_satisfies_ode_pointwise() {
        let nl = cubic();
        let o = newton_orbit(&nl, ParamPoint::one(0.95), 4, 0.2, &NewtonOptions::default()).unwrap();
        let orbit = o.orbit().unwrap();
        let times: Vec<f64> = (0..50).map(|k| 0.123 * k as f64).collect();
        let vals = orbit_values(orbit, 1, &times).unwrap();
        let h = 1e-5;
        for (t, u) in times.iter().zip(&vals) {
            let up = &orbit_values(orbit, 1, &[t + h]).unwrap()[0];
            let um = &orbit_values(orbit, 1, &[t - h]).unwrap()[0];
            let du = [(up[0] - um[0]) / (2.0 * h), (up[1] - um[1]) / (2.0 * h)];
            let mut g = [0.0; 2];
            nl.gradient(ParamPoint::one(0.95), *t, u, &mut g).unwrap();
            // Ju' = (−u1', u0')
            assert!((-du[1] + g[0]).abs() < 1e-6 && (du[0] + g[1]).abs() < 1e-6);
        }
    }
}
