//! Winding numbers of planar fields along closed curves by phase tracking.
//!
//! The curve is sampled, the argument of the field is unwrapped between
//! consecutive samples, and any step whose phase increment reaches `π/2` is
//! bisected. Once every increment is below `π/2` the accumulated phase is an
//! integer multiple of `2π` up to rounding, and the integer is exact.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};

/// A complex-valued map on the plane.
pub trait PlanarField {
    fn value(&self, x: f64, y: f64) -> Result<Complex64>;
}

impl<F> PlanarField for F
where
    F: Fn(f64, f64) -> Result<Complex64>,
{
    fn value(&self, x: f64, y: f64) -> Result<Complex64> {
        self(x, y)
    }
}

/// Closed curve in the plane.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClosedCurve {
    /// Boundary of `[x0, x1] × [y0, y1]`, counterclockwise from `(x0, y0)`.
    Rectangle { x0: f64, x1: f64, y0: f64, y1: f64 },
    /// Closed polygon through the vertices in order; the last vertex connects back to the first.
    Polyline { vertices: Vec<[f64; 2]> },
}

impl ClosedCurve {
    pub fn rectangle(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        ClosedCurve::Rectangle { x0, x1, y0, y1 }
    }

    /// Same point set traversed the other way.
    pub fn reversed(&self) -> ClosedCurve {
        let mut v = self.vertices();
        v.reverse();
        ClosedCurve::Polyline { vertices: v }
    }

    pub fn vertices(&self) -> Vec<[f64; 2]> {
        match self {
            ClosedCurve::Rectangle { x0, x1, y0, y1 } => vec![[*x0, *y0], [*x1, *y0], [*x1, *y1], [*x0, *y1]],
            ClosedCurve::Polyline { vertices } => vertices.clone(),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            ClosedCurve::Rectangle { x0, x1, y0, y1 } if !(x0 < x1 && y0 < y1) => {
                Err(Error::Invalid("rectangle curve needs x0 < x1 and y0 < y1".into()))
            }
            ClosedCurve::Polyline { vertices } if vertices.len() < 3 => {
                Err(Error::Invalid("closed polyline needs at least three vertices".into()))
            }
            _ => Ok(()),
        }
    }
}

/// Arc-length parameterization of a closed polygon over `[0, 1)`.
struct Parameterized {
    vertices: Vec<[f64; 2]>,
    cumulative: Vec<f64>,
}

impl Parameterized {
    fn new(vertices: Vec<[f64; 2]>) -> Self {
        let m = vertices.len();
        let mut cumulative = vec![0.0; m + 1];
        for i in 0..m {
            let (p, q) = (vertices[i], vertices[(i + 1) % m]);
            cumulative[i + 1] = cumulative[i] + (q[0] - p[0]).hypot(q[1] - p[1]);
        }
        Parameterized { vertices, cumulative }
    }

    fn point(&self, tau: f64) -> [f64; 2] {
        let m = self.vertices.len();
        let total = self.cumulative[m];
        let s = tau.rem_euclid(1.0) * total;
        let seg = match self.cumulative.iter().position(|&c| c > s) {
            Some(k) => k - 1,
            None => m - 1,
        };
        let len = self.cumulative[seg + 1] - self.cumulative[seg];
        let w = if len > 0.0 { (s - self.cumulative[seg]) / len } else { 0.0 };
        let (p, q) = (self.vertices[seg], self.vertices[(seg + 1) % m]);
        [p[0] + w * (q[0] - p[0]), p[1] + w * (q[1] - p[1])]
    }

    /// Curve parameters of the vertices.
    fn vertex_params(&self) -> Vec<f64> {
        let total = *self.cumulative.last().unwrap_or(&1.0);
        self.cumulative[..self.vertices.len()].iter().map(|c| c / total).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WindingOptions {
    /// Initial samples along the whole curve (vertices are always included).
    pub initial_samples: usize,
    /// Maximum bisection depth of a single initial step.
    pub max_depth: usize,
    /// Relative degeneracy threshold: `|f| < rel · (1 + max |f|)` is degenerate.
    pub degeneracy_rel: f64,
}

impl Default for WindingOptions {
    fn default() -> Self {
        WindingOptions { initial_samples: 96, max_depth: 30, degeneracy_rel: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WindingResult {
    pub winding: i64,
    /// Total unwrapped phase change divided by `2π`, before rounding.
    pub raw_turns: f64,
    pub min_abs: f64,
    pub max_abs: f64,
    /// Deepest bisection level used.
    pub depth: usize,
    pub evaluations: usize,
    pub certified: bool,
}

/// One sample of a curve trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurveSample {
    pub x: f64,
    pub y: f64,
    pub value: Complex64,
    /// Unwrapped phase accumulated from the first sample.
    pub phase: f64,
}

/// Winding number of `field` along `curve`.
pub fn winding_number(field: &dyn PlanarField, curve: &ClosedCurve, opts: &WindingOptions) -> Result<WindingResult> {
    winding_with_trace(field, curve, opts).map(|(r, _)| r)
}

/// As [`winding_number`], also returning the certified sample sequence.
pub fn winding_with_trace(
    field: &dyn PlanarField,
    curve: &ClosedCurve,
    opts: &WindingOptions,
) -> Result<(WindingResult, Vec<CurveSample>)> {
    curve.validate()?;
    let param = Parameterized::new(curve.vertices());
    let mut taus = param.vertex_params();
    let k = opts.initial_samples.max(4);
    taus.extend((0..k).map(|i| i as f64 / k as f64));
    taus.sort_by(|a, b| a.partial_cmp(b).expect("finite parameters"));
    taus.dedup_by(|a, b| (*a - *b).abs() < 1e-15);
    let eval = |tau: f64| -> Result<(f64, f64, Complex64)> {
        let [x, y] = param.point(tau);
        Ok((x, y, field.value(x, y)?))
    };
    winding_from_params(eval, &taus, opts)
}

/// Winding of `f(τ)` over the closed parameter range `[0, 1]`, starting from
/// `initial_samples` uniform parameters.
pub fn winding_of_loop<F>(f: F, initial_samples: usize, opts: &WindingOptions) -> Result<WindingResult>
where
    F: Fn(f64) -> Result<Complex64>,
{
    let k = initial_samples.max(4);
    let taus: Vec<f64> = (0..k).map(|i| i as f64 / k as f64).collect();
    winding_from_params(|tau| Ok((tau, 0.0, f(tau)?)), &taus, opts).map(|(r, _)| r)
}

fn winding_from_params<F>(eval: F, taus: &[f64], opts: &WindingOptions) -> Result<(WindingResult, Vec<CurveSample>)>
where
    F: Fn(f64) -> Result<(f64, f64, Complex64)>,
{
    let mut initial = Vec::with_capacity(taus.len() + 1);
    for &tau in taus {
        initial.push((tau, eval(tau)?));
    }
    // close the loop with the first sample
    let first = initial[0].1;
    initial.push((1.0, first));

    let mut evaluations = taus.len();
    let mut trace = vec![CurveSample { x: first.0, y: first.1, value: first.2, phase: 0.0 }];
    let mut phase = 0.0;
    let mut depth_used = 0;
    let mut min_abs = initial.iter().map(|s| s.1 .2.norm()).fold(f64::INFINITY, f64::min);
    let mut max_abs = initial.iter().map(|s| s.1 .2.norm()).fold(0.0, f64::max);

    for w in initial.windows(2) {
        // depth-first subdivision of one initial step, kept in curve order
        let mut stack = vec![(w[0], w[1], 0usize)];
        while let Some((a, b, depth)) = stack.pop() {
            let (va, vb) = (a.1 .2, b.1 .2);
            let increment = if va.norm() == 0.0 || vb.norm() == 0.0 { PI } else { (vb / va).arg() };
            if increment.abs() < FRAC_PI_2 {
                phase += increment;
                depth_used = depth_used.max(depth);
                if b.0 < 1.0 {
                    trace.push(CurveSample { x: b.1 .0, y: b.1 .1, value: vb, phase });
                }
                continue;
            }
            if depth >= opts.max_depth {
                return Err(Error::RefinementExhausted(format!(
                    "phase increment {increment:.3} rad persists at depth {depth} near curve parameter {:.6}",
                    a.0
                )));
            }
            let mid_tau = 0.5 * (a.0 + b.0);
            let mid = (mid_tau, eval(mid_tau)?);
            evaluations += 1;
            min_abs = min_abs.min(mid.1 .2.norm());
            max_abs = max_abs.max(mid.1 .2.norm());
            stack.push((mid, b, depth + 1));
            stack.push((a, mid, depth + 1));
        }
    }

    let threshold = opts.degeneracy_rel * (1.0 + max_abs);
    if !(min_abs >= threshold) {
        return Err(Error::DegenerateCurve { min_abs, threshold });
    }
    let raw_turns = phase / (2.0 * PI);
    let winding = raw_turns.round();
    if (raw_turns - winding).abs() > 1e-6 {
        return Err(Error::Inconsistent(format!("unwrapped phase {raw_turns} turns is not an integer")));
    }
    Ok((WindingResult { winding: winding as i64, raw_turns, min_abs, max_abs, depth: depth_used, evaluations, certified: true }, trace))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn field<F: Fn(Complex64) -> Complex64>(f: F) -> impl Fn(f64, f64) -> Result<Complex64> {
        move |x, y| Ok(f(Complex64::new(x, y)))
    }

    #[test]
    fn constant_field_has_zero_winding() {
        let r =
            winding_number(&field(|_| Complex64::new(1.0, 0.0)), &ClosedCurve::rectangle(-1.0, 2.0, -3.0, 0.5), &WindingOptions::default())
                .unwrap();
        assert_eq!(r.winding, 0);
        assert!(r.certified);
    }

    #[test]
    fn identity_field_on_unit_square() {
        let r = winding_number(&field(|z| z), &ClosedCurve::rectangle(-0.5, 0.5, -0.5, 0.5), &WindingOptions::default()).unwrap();
        assert_eq!(r.winding, 1);
    }

    #[test]
    fn powers_and_orientation() {
        let sq = ClosedCurve::rectangle(-1.0, 1.0, -1.0, 1.0);
        let opts = WindingOptions { initial_samples: 4, ..Default::default() };
        let r = winding_number(&field(|z| z.powi(5)), &sq, &opts).unwrap();
        assert_eq!(r.winding, 5);
        assert!(r.depth > 0);
        let r = winding_number(&field(|z| z.powi(5)), &sq.reversed(), &opts).unwrap();
        assert_eq!(r.winding, -5);
        let r = winding_number(&field(|z| z.conj()), &sq, &opts).unwrap();
        assert_eq!(r.winding, -1);
        // zero outside the curve
        let r = winding_number(&field(|z| z - Complex64::new(3.0, 0.0)), &sq, &opts).unwrap();
        assert_eq!(r.winding, 0);
    }

    #[test]
    fn polyline_triangle() {
        let tri = ClosedCurve::Polyline { vertices: vec![[-1.0, -1.0], [2.0, -1.0], [0.0, 2.0]] };
        let r =
            winding_number(&field(|z| (z - Complex64::new(0.1, 0.2)) * (z + Complex64::new(0.3, 0.0))), &tri, &WindingOptions::default())
                .unwrap();
        assert_eq!(r.winding, 2);
    }

    #[test]
    fn grazing_curve_is_degenerate() {
        let sq = ClosedCurve::rectangle(0.0, 1.0, -1.0, 1.0);
        match winding_number(&field(|z| z), &sq, &WindingOptions::default()) {
            Err(Error::DegenerateCurve { .. }) | Err(Error::RefinementExhausted(_)) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn depth_exhaustion() {
        let opts = WindingOptions { initial_samples: 4, max_depth: 0, ..Default::default() };
        let r = winding_number(&field(|z| z.powi(7)), &ClosedCurve::rectangle(-1.0, 1.0, -1.0, 1.0), &opts);
        assert!(matches!(r, Err(Error::RefinementExhausted(_))));
    }

    #[test]
    fn trace_is_ordered_and_unwrapped() {
        let (r, trace) =
            winding_with_trace(&field(|z| z * z), &ClosedCurve::rectangle(-1.0, 1.0, -1.0, 1.0), &WindingOptions::default()).unwrap();
        assert_eq!(r.winding, 2);
        for w in trace.windows(2) {
            assert!((w[1].phase - w[0].phase).abs() < FRAC_PI_2);
        }
    }

    #[test]
    fn loop_parameterization() {
        let r = winding_of_loop(|tau| Ok(Complex64::from_polar(1.0, 2.0 * PI * 3.0 * tau)), 8, &WindingOptions::default()).unwrap();
        assert_eq!(r.winding, 3);
    }
}
