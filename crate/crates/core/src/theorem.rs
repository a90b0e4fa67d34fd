//! Independent computation of the four indices along one path:
//! monodromy winding, `sfl(𝒜)`, `sfl(L)` and the Conley–Zehnder index.

use std::time::Instant;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::integrator::{real_monodromy, IntegratorOptions};
use crate::model::{CoefficientFamily, ParamPoint, ParameterPath};
use crate::monodromy::{check_endpoints, monodromy_index_path, MonodromyOptions};
use crate::spectral::{assemble, default_modes, spectral_flow_path, FlowOptions, OperatorKind};
use crate::symplectic::{conley_zehnder, Crossing, CzOptions};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Numerics {
    pub integrator: IntegratorOptions,
    pub monodromy: MonodromyOptions,
    pub flow: FlowOptions,
    /// Fourier truncation; `None` selects `ceil(4 + 2 max ‖S‖)`.
    pub modes: Option<usize>,
    pub cz: CzOptions,
}

impl Default for Numerics {
    fn default() -> Self {
        Numerics {
            integrator: IntegratorOptions::default(),
            monodromy: MonodromyOptions::default(),
            flow: FlowOptions::default(),
            modes: None,
            cz: CzOptions::default(),
        }
    }
}

impl Numerics {
    /// Propagates the shared integrator settings into the per-index options.
    pub fn harmonized(mut self) -> Self {
        self.monodromy.integrator = self.integrator;
        self.cz.integrator = self.integrator;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostics {
    pub modes: usize,
    pub endpoint_rho: [f64; 2],
    pub endpoint_pencil_min: [f64; 2],
    pub winding_depth: usize,
    pub winding_evaluations: usize,
    pub flow_a_depth: usize,
    pub flow_l_depth: usize,
    /// Path parameters of the segments where `sfl(𝒜)` counted a change.
    pub flow_a_crossings: Vec<[f64; 2]>,
    pub crossings: Vec<Crossing>,
    /// Loop paths are re-based to this path parameter.
    pub loop_base: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Timing {
    pub monodromy: f64,
    pub sfl_a: f64,
    pub sfl_l: f64,
    pub cz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IndexReport {
    pub monodromy_winding: i64,
    pub sfl_a: i64,
    pub sfl_l: i64,
    pub cz: i64,
    pub agreement: bool,
    pub diagnostics: Diagnostics,
    pub timing: Timing,
}

impl IndexReport {
    pub fn values(&self) -> [i64; 4] {
        [self.monodromy_winding, self.sfl_a, self.sfl_l, self.cz]
    }
}

fn sigma_min(family: &CoefficientFamily, p: ParamPoint, opts: &IntegratorOptions) -> Result<f64> {
    let m = real_monodromy(family, p, opts)?.monodromy;
    let d = m.nrows();
    Ok((DMatrix::identity(d, d) - m).singular_values().min())
}

/// Moves the base point of a closed path to `tau`. Two-point paths are
/// shifted (the family is periodic in the parameter); polylines whose ends
/// coincide are rotated.
pub fn rebase_loop(path: &ParameterPath, tau: f64) -> Result<ParameterPath> {
    if tau == 0.0 {
        return Ok(path.clone());
    }
    if path.points.len() == 2 {
        let (a, b) = (path.start(), path.end());
        let shift = [(b.0[0] - a.0[0]) * tau, (b.0[1] - a.0[1]) * tau];
        let moved = |p: ParamPoint| ParamPoint([p.0[0] + shift[0], p.0[1] + shift[1]]);
        return ParameterPath::new(vec![moved(a), moved(b)]);
    }
    if path.start().dist(path.end()) != 0.0 {
        return Err(Error::Invalid("closed polyline paths must end where they start".into()));
    }
    let k = path.segments();
    let x = tau * k as f64;
    let seg = (x.floor() as usize).min(k - 1);
    let base = path.at(tau);
    let mut pts = vec![base];
    pts.extend(path.points[seg + 1..].iter().copied());
    pts.extend(path.points[1..=seg].iter().copied());
    pts.push(base);
    pts.dedup_by(|p, q| p.dist(*q) == 0.0);
    ParameterPath::new(pts)
}

/// Base parameter with the largest `σ_min(I − M)` on a uniform grid.
pub fn loop_base(family: &CoefficientFamily, path: &ParameterPath, grid: usize, opts: &IntegratorOptions) -> Result<f64> {
    let mut best = (0.0, f64::NEG_INFINITY);
    for i in 0..grid.max(1) {
        let tau = i as f64 / grid.max(1) as f64;
        let s = sigma_min(family, path.at(tau), opts)?;
        if s > best.1 {
            best = (tau, s);
        }
    }
    Ok(best.0)
}

fn pencil_min(kind: OperatorKind, family: &CoefficientFamily, p: ParamPoint, modes: usize) -> Result<f64> {
    Ok(assemble(kind, family, p, modes)?.eigenvalues().iter().fold(f64::INFINITY, |m, v| m.min(v.abs())))
}

/// All four indices along `path`. Closed paths are first re-based to an
/// invertible point.
pub fn theorem_check(family: &CoefficientFamily, path: &ParameterPath, closed: bool, numerics: &Numerics) -> Result<IndexReport> {
    let numerics = numerics.harmonized();
    let (path, base) = if closed {
        let tau = loop_base(family, path, 32, &numerics.integrator)?;
        (rebase_loop(path, tau)?, Some(tau))
    } else {
        (path.clone(), None)
    };
    let modes = match numerics.modes {
        Some(n) => n,
        None => default_modes(family, &path)?,
    };
    let endpoint_rho = check_endpoints(family, &path, &numerics.integrator)?;
    let mut endpoint_pencil_min = [0.0; 2];
    for (k, p) in [path.start(), path.end()].into_iter().enumerate() {
        let m = pencil_min(OperatorKind::A, family, p, modes)?.min(pencil_min(OperatorKind::L, family, p, modes)?);
        if !(m > numerics.flow.invertibility_tol) {
            return Err(Error::NotAdmissible(format!("endpoint degenerate: pencil eigenvalue {m:e} at lambda = {:?}", p.0)));
        }
        endpoint_pencil_min[k] = m;
    }

    let clock = Instant::now();
    let winding = monodromy_index_path(family, &path, &numerics.monodromy)?;
    let t_mono = clock.elapsed().as_secs_f64();

    let clock = Instant::now();
    let flow_a = spectral_flow_path(OperatorKind::A, family, &path, modes, &numerics.flow)?;
    let t_a = clock.elapsed().as_secs_f64();

    let clock = Instant::now();
    let flow_l = spectral_flow_path(OperatorKind::L, family, &path, modes, &numerics.flow)?;
    let t_l = clock.elapsed().as_secs_f64();

    let clock = Instant::now();
    let cz = conley_zehnder(family, &path, &numerics.cz)?;
    let t_cz = clock.elapsed().as_secs_f64();

    let values = [winding.index, flow_a.value, flow_l.value, cz.index];
    Ok(IndexReport {
        monodromy_winding: winding.index,
        sfl_a: flow_a.value,
        sfl_l: flow_l.value,
        cz: cz.index,
        agreement: values.iter().all(|v| *v == values[0]),
        diagnostics: Diagnostics {
            modes,
            endpoint_rho,
            endpoint_pencil_min,
            winding_depth: winding.primary.depth.max(winding.check.depth),
            winding_evaluations: winding.primary.evaluations + winding.check.evaluations,
            flow_a_depth: flow_a.max_depth,
            flow_l_depth: flow_l.max_depth,
            flow_a_crossings: flow_a.crossings().map(|s| s.tau).collect(),
            crossings: cz.crossings,
            loop_base: base,
        },
        timing: Timing { monodromy: t_mono, sfl_a: t_a, sfl_l: t_l, cz: t_cz },
    })
}
