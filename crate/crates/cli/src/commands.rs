//! Command dispatch. Each command returns a JSON result and, optionally,
//! CSV traces.

use std::time::Instant;

use hamindex::bifurcation::{candidate_scan, d_gamma, disconnection_report, newton_orbit, orbit_values};
use hamindex::integrator::fundamental_solution;
use hamindex::model::{validate_family, ParameterPath, SampleCounts};
use hamindex::monodromy::{monodromy_index_path, path_winding_trace};
use hamindex::spectral::{default_modes, spectral_flow_loop, spectral_flow_path, spectral_flow_path_complex, OperatorKind, SpectralFlow};
use hamindex::sturm::{sturm_report, HomogeneousPair};
use hamindex::symplectic::conley_zehnder;
use hamindex::theorem::{loop_base, rebase_loop, theorem_check};
use hamindex::{Error, Result};
use serde_json::{json, Value};

use crate::config::{self, BuiltFamily, OperatorChoice, RunConfig, Task};
use crate::traces::Trace;

pub struct Outcome {
    pub result: Value,
    pub traces: Vec<Trace>,
    /// Set when the computation finished but the indices disagree.
    pub disagreement: bool,
    /// Error reported alongside a partial result.
    pub failure: Option<Error>,
}

impl Outcome {
    fn plain(result: Value) -> Self {
        Outcome { result, traces: Vec::new(), disagreement: false, failure: None }
    }
}

struct Context<'a> {
    cfg: &'a RunConfig,
    family: Option<BuiltFamily>,
}

impl Context<'_> {
    fn family(&self) -> Result<&BuiltFamily> {
        self.family.as_ref().ok_or_else(|| Error::Invalid("config error at `family`: this command needs a family".into()))
    }

    /// Explicit path, or the one implied by the domain. The flag marks loops.
    fn path(&self, explicit: &Option<Vec<Vec<f64>>>) -> Result<(ParameterPath, bool)> {
        if let Some(points) = explicit {
            let path = config::path(points)?;
            let closed = path.points.len() > 2 && path.start().dist(path.end()) == 0.0;
            return Ok((path, closed));
        }
        match &self.cfg.domain {
            Some(config::DomainBlock::Interval { a, b, .. }) => Ok((ParameterPath::interval(*a, *b)?, false)),
            Some(d @ config::DomainBlock::Circle { .. }) => Ok((d.build()?.loop_path()?, true)),
            _ => Err(Error::Invalid("config error at `task.path`: a path is required unless the domain is an interval or circle".into())),
        }
    }
}

pub fn run(cfg: &RunConfig, seed: u64) -> Result<Outcome> {
    let family = cfg.family.as_ref().map(|f| f.build(seed)).transpose()?;
    let ctx = Context { cfg, family };
    let num = &cfg.numerics;
    match &cfg.task {
        Task::Validate {} => validate(&ctx),
        Task::Monodromy { lambda, shift } => {
            let family = ctx.family()?.linear();
            let p = config::point(lambda)?;
            let fs = fundamental_solution(family, p, *shift, &num.integrator())?;
            let d = fs.monodromy.nrows();
            let rows: Vec<Vec<[f64; 2]>> =
                (0..d).map(|i| (0..d).map(|j| [fs.monodromy[(i, j)].re, fs.monodromy[(i, j)].im]).collect()).collect();
            let rho = hamindex::monodromy::rho(family, p, *shift, &num.integrator())?;
            Ok(Outcome::plain(json!({
                "lambda": p.0,
                "shift": shift,
                "monodromy": rows,
                "rho": [rho.re, rho.im],
                "steps": fs.steps,
                "error_estimate": fs.error_estimate,
                "symplectic_residual": fs.symplectic_residual,
            })))
        }
        Task::Winding { path } => {
            let family = ctx.family()?.linear();
            let (path, _) = ctx.path(path)?;
            let opts = num.monodromy();
            let clock = Instant::now();
            let index = monodromy_index_path(family, &path, &opts)?;
            let elapsed = clock.elapsed().as_secs_f64();
            let samples = path_winding_trace(family, &path, opts.margin, &opts)?;
            let mut trace = Trace::new("winding", &["lambda1", "lambda2", "x", "s", "rho_re", "rho_im", "phase"]);
            for (p, s) in samples {
                trace.row(&[p.0[0], p.0[1], s.x, s.y, s.value.re, s.value.im, s.phase]);
            }
            Ok(Outcome {
                result: json!({ "path": path, "index": index, "timing": { "seconds": elapsed } }),
                traces: vec![trace],
                disagreement: false,
                failure: None,
            })
        }
        Task::Sfl { path, operator, complex } => {
            let family = ctx.family()?.linear();
            let (path, closed) = ctx.path(path)?;
            let modes = match num.modes {
                Some(m) => m,
                None => default_modes(family, &path)?,
            };
            let opts = num.flow();
            let kinds: &[OperatorKind] = match operator {
                OperatorChoice::A => &[OperatorKind::A],
                OperatorChoice::L => &[OperatorKind::L],
                OperatorChoice::Both => &[OperatorKind::A, OperatorKind::L],
            };
            let mut flows = serde_json::Map::new();
            let mut traces = Vec::new();
            let clock = Instant::now();
            for &kind in kinds {
                let flow = if closed {
                    spectral_flow_loop(kind, family, &path, modes, &opts)?
                } else {
                    spectral_flow_path(kind, family, &path, modes, &opts)?
                };
                let name = if kind == OperatorKind::A { "a" } else { "l" };
                traces.push(flow_trace(&format!("sfl_{name}"), &flow));
                flows.insert(name.into(), serde_json::to_value(&flow).map_err(json_error)?);
                if *complex && !closed {
                    let flow = spectral_flow_path_complex(kind, family, &path, modes, &opts)?;
                    traces.push(flow_trace(&format!("sfl_{name}_complex"), &flow));
                    flows.insert(format!("{name}_complex"), serde_json::to_value(&flow).map_err(json_error)?);
                }
            }
            let elapsed = clock.elapsed().as_secs_f64();
            Ok(Outcome {
                result: json!({ "path": path, "closed": closed, "modes": modes, "flows": flows, "timing": { "seconds": elapsed } }),
                traces,
                disagreement: false,
                failure: None,
            })
        }
        Task::Cz { path } => {
            let family = ctx.family()?.linear();
            let (path, closed) = ctx.path(path)?;
            let opts = num.cz();
            let (path, base) = if closed {
                let tau = loop_base(family, &path, 32, &opts.integrator)?;
                (rebase_loop(&path, tau)?, Some(tau))
            } else {
                (path, None)
            };
            let clock = Instant::now();
            let cz = conley_zehnder(family, &path, &opts)?;
            let elapsed = clock.elapsed().as_secs_f64();
            let mut trace = Trace::new("crossings", &["tau", "lambda1", "lambda2", "sigma_min", "kernel_dim", "signature"]);
            for c in &cz.crossings {
                trace.row(&[c.location, c.point.0[0], c.point.0[1], c.sigma_min, c.kernel_dim as f64, c.signature as f64]);
            }
            Ok(Outcome {
                result: json!({ "path": path, "loop_base": base, "cz": cz, "timing": { "seconds": elapsed } }),
                traces: vec![trace],
                disagreement: false,
                failure: None,
            })
        }
        Task::Sturm { pairs } => {
            let mut reports = Vec::new();
            for (k, block) in pairs.iter().enumerate() {
                let pair = HomogeneousPair::parse(&block.p, &block.q)
                    .map_err(|e| Error::Invalid(format!("config error at `task.pairs[{k}]`: {e}")))?;
                let report = sturm_report(&pair, num.convention(), num.arithmetic())?;
                reports.push(json!({ "name": block.name, "report": report }));
            }
            Ok(Outcome::plain(json!({ "pairs": reports })))
        }
        Task::Bifurcate { paths } => {
            let family = ctx.family()?.linear();
            let domain = ctx
                .cfg
                .domain
                .as_ref()
                .ok_or_else(|| Error::Invalid("config error at `domain`: bifurcate needs a domain".into()))?
                .build()?;
            let clock = Instant::now();
            let set = candidate_scan(family, &domain, &num.candidates())?;
            let components = disconnection_report(&domain, &set.cells);
            let mut indices = Vec::new();
            for (k, points) in paths.iter().enumerate() {
                let path = config::path(points).map_err(|e| Error::Invalid(format!("config error at `task.paths[{k}]`: {e}")))?;
                indices.push(json!({ "path": path, "d_gamma": d_gamma(family, &path, &num.monodromy())? }));
            }
            let elapsed = clock.elapsed().as_secs_f64();
            let mut trace = Trace::new("rho_grid", &["i", "j", "lambda1", "lambda2", "rho", "candidate_cell"]);
            for (j, row) in set.rho.iter().enumerate() {
                for (i, v) in row.iter().enumerate() {
                    let p = domain.node(i, j);
                    let flagged = set.cells.contains(&[i, j]);
                    trace.row(&[i as f64, j as f64, p.0[0], p.0[1], *v, flagged as u8 as f64]);
                }
            }
            Ok(Outcome {
                result: json!({
                    "cells": set.cells,
                    "candidates": set.candidates,
                    "components": components.components,
                    "component_sizes": components.sizes,
                    "paths": indices,
                    "timing": { "seconds": elapsed },
                }),
                traces: vec![trace],
                disagreement: false,
                failure: None,
            })
        }
        Task::Orbit { lambda, seed, modes } => {
            let nl = match ctx.family()? {
                BuiltFamily::Nonlinear(nl) => nl,
                BuiltFamily::Linear(_) => {
                    return Err(Error::Invalid("config error at `family`: orbit needs a `gradient` family".into()));
                }
            };
            let p = config::point(lambda)?;
            let clock = Instant::now();
            let outcome = newton_orbit(nl, p, *modes, *seed, &num.newton())?;
            let elapsed = clock.elapsed().as_secs_f64();
            let mut traces = Vec::new();
            if let Some(orbit) = outcome.orbit() {
                let times: Vec<f64> = (0..=128).map(|k| 2.0 * std::f64::consts::PI * k as f64 / 128.0).collect();
                let values = orbit_values(orbit, nl.half_dim(), &times)?;
                let mut cols = vec!["t".to_string()];
                cols.extend((1..=nl.dim()).map(|k| format!("u{k}")));
                let cols: Vec<&str> = cols.iter().map(String::as_str).collect();
                let mut trace = Trace::new("orbit", &cols);
                for (t, u) in times.iter().zip(values) {
                    let mut row = vec![*t];
                    row.extend(u);
                    trace.row(&row);
                }
                traces.push(trace);
            }
            Ok(Outcome {
                result: json!({ "outcome": outcome, "timing": { "seconds": elapsed } }),
                traces,
                disagreement: false,
                failure: None,
            })
        }
        Task::TheoremCheck { path } => {
            let family = ctx.family()?.linear();
            let (path, closed) = ctx.path(path)?;
            let report = theorem_check(family, &path, closed, &num.theorem())?;
            let mut trace = Trace::new("crossings", &["tau", "lambda1", "lambda2", "sigma_min", "kernel_dim", "signature"]);
            for c in &report.diagnostics.crossings {
                trace.row(&[c.location, c.point.0[0], c.point.0[1], c.sigma_min, c.kernel_dim as f64, c.signature as f64]);
            }
            let disagreement = !report.agreement;
            Ok(Outcome {
                result: json!({ "path": path, "closed": closed, "report": report }),
                traces: vec![trace],
                disagreement,
                failure: None,
            })
        }
    }
}

fn validate(ctx: &Context) -> Result<Outcome> {
    let built = ctx.family()?;
    let domain =
        ctx.cfg.domain.as_ref().ok_or_else(|| Error::Invalid("config error at `domain`: validate needs a domain".into()))?.build()?;
    let report = validate_family(built.linear(), &domain, SampleCounts::default());
    if let BuiltFamily::Nonlinear(nl) = built {
        nl.validate_trivial_branch(&domain, SampleCounts::default())?;
    }
    let passed = report.passed();
    let failure = (!passed).then(|| Error::Validation(format!("{} violation(s) in {} samples", report.violations.len(), report.samples)));
    Ok(Outcome { failure, ..Outcome::plain(json!({ "passed": passed, "report": report })) })
}

fn flow_trace(name: &str, flow: &SpectralFlow) -> Trace {
    let mut trace = Trace::new(name, &["tau0", "tau1", "window", "count0", "count1"]);
    for s in &flow.segments {
        trace.row(&[s.tau[0], s.tau[1], s.window, s.counts[0] as f64, s.counts[1] as f64]);
    }
    trace
}

fn json_error(e: serde_json::Error) -> Error {
    Error::Invalid(format!("serialization failed: {e}"))
}
