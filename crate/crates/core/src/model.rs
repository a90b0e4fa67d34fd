//! Parameter domains, paths and the coefficient families `S_λ(t)`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::{parse_with, Bindings, Expr, Var, Vocabulary};

pub const PERIOD: f64 = 2.0 * PI;

/// A point of the parameter space. One-parameter families ignore the second slot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ParamPoint(pub [f64; 2]);

impl ParamPoint {
    pub fn one(lambda: f64) -> Self {
        ParamPoint([lambda, 0.0])
    }

    pub fn two(lambda1: f64, lambda2: f64) -> Self {
        ParamPoint([lambda1, lambda2])
    }

    pub fn lerp(self, other: ParamPoint, w: f64) -> ParamPoint {
        ParamPoint([self.0[0] + w * (other.0[0] - self.0[0]), self.0[1] + w * (other.0[1] - self.0[1])])
    }

    pub fn dist(self, other: ParamPoint) -> f64 {
        (self.0[0] - other.0[0]).hypot(self.0[1] - other.0[1])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DomainKind {
    Interval {
        a: f64,
        b: f64,
    },
    /// Parameter runs over `[start, start + circumference)` with the ends identified.
    Circle {
        start: f64,
        circumference: f64,
    },
    Rectangle {
        lower: [f64; 2],
        upper: [f64; 2],
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParameterDomain {
    pub kind: DomainKind,
    /// Grid nodes per axis.
    pub resolution: [usize; 2],
    /// Grid cells `(i, j)` forming the boundary set of a rectangle domain.
    /// Interval domains always use their two endpoints.
    pub boundary_cells: Vec<[usize; 2]>,
}

impl ParameterDomain {
    pub fn interval(a: f64, b: f64, resolution: usize) -> Result<Self> {
        let d = ParameterDomain { kind: DomainKind::Interval { a, b }, resolution: [resolution, 1], boundary_cells: vec![] };
        d.validate()?;
        Ok(d)
    }

    pub fn circle(start: f64, circumference: f64, resolution: usize) -> Result<Self> {
        let d = ParameterDomain { kind: DomainKind::Circle { start, circumference }, resolution: [resolution, 1], boundary_cells: vec![] };
        d.validate()?;
        Ok(d)
    }

    pub fn rectangle(lower: [f64; 2], upper: [f64; 2], resolution: [usize; 2], boundary_cells: Vec<[usize; 2]>) -> Result<Self> {
        let d = ParameterDomain { kind: DomainKind::Rectangle { lower, upper }, resolution, boundary_cells };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Invalid(m));
        match self.kind {
            DomainKind::Interval { a, b } => {
                if !(a < b) {
                    return bad(format!("interval requires a < b, got [{a}, {b}]"));
                }
            }
            DomainKind::Circle { circumference, .. } => {
                if !(circumference > 0.0) {
                    return bad(format!("circle circumference must be positive, got {circumference}"));
                }
            }
            DomainKind::Rectangle { lower, upper } => {
                for ax in 0..2 {
                    if !(lower[ax] < upper[ax]) {
                        return bad(format!("rectangle axis {ax} requires lower < upper"));
                    }
                }
            }
        }
        let axes = if self.is_rectangle() { 2 } else { 1 };
        for ax in 0..axes {
            if self.resolution[ax] < 2 {
                return bad(format!("grid resolution must be at least 2, got {}", self.resolution[ax]));
            }
        }
        if !self.boundary_cells.is_empty() {
            if !self.is_rectangle() {
                return bad("boundary cells are only meaningful for rectangle domains".into());
            }
            for c in &self.boundary_cells {
                if c[0] + 1 >= self.resolution[0] || c[1] + 1 >= self.resolution[1] {
                    return bad(format!("boundary cell {c:?} lies outside the grid"));
                }
            }
        }
        Ok(())
    }

    pub fn is_rectangle(&self) -> bool {
        matches!(self.kind, DomainKind::Rectangle { .. })
    }

    pub fn arity(&self) -> usize {
        if self.is_rectangle() {
            2
        } else {
            1
        }
    }

    /// Grid node `(i, j)`.
    pub fn node(&self, i: usize, j: usize) -> ParamPoint {
        match self.kind {
            DomainKind::Interval { a, b } => ParamPoint::one(a + (b - a) * i as f64 / (self.resolution[0] - 1) as f64),
            DomainKind::Circle { start, circumference } => ParamPoint::one(start + circumference * i as f64 / self.resolution[0] as f64),
            DomainKind::Rectangle { lower, upper } => ParamPoint::two(
                lower[0] + (upper[0] - lower[0]) * i as f64 / (self.resolution[0] - 1) as f64,
                lower[1] + (upper[1] - lower[1]) * j as f64 / (self.resolution[1] - 1) as f64,
            ),
        }
    }

    /// Sample points used when validating a family over this domain.
    pub fn sample_points(&self, per_axis: usize) -> Vec<ParamPoint> {
        let per_axis = per_axis.max(2);
        let frac = |k: usize| k as f64 / (per_axis - 1) as f64;
        match self.kind {
            DomainKind::Interval { a, b } => (0..per_axis).map(|k| ParamPoint::one(a + (b - a) * frac(k))).collect(),
            DomainKind::Circle { start, circumference } => {
                (0..per_axis).map(|k| ParamPoint::one(start + circumference * frac(k))).collect()
            }
            DomainKind::Rectangle { lower, upper } => {
                let mut pts = Vec::with_capacity(per_axis * per_axis);
                for i in 0..per_axis {
                    for j in 0..per_axis {
                        pts.push(ParamPoint::two(lower[0] + (upper[0] - lower[0]) * frac(i), lower[1] + (upper[1] - lower[1]) * frac(j)));
                    }
                }
                pts
            }
        }
    }

    /// The closed loop traversing a circle domain once, starting at `start`.
    pub fn loop_path(&self) -> Result<ParameterPath> {
        match self.kind {
            DomainKind::Circle { start, circumference } => {
                Ok(ParameterPath { points: vec![ParamPoint::one(start), ParamPoint::one(start + circumference)] })
            }
            _ => Err(Error::Invalid("loop paths require a circle domain".into())),
        }
    }
}

/// Polyline in parameter space, traversed at uniform speed per segment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParameterPath {
    pub points: Vec<ParamPoint>,
}

impl ParameterPath {
    pub fn new(points: Vec<ParamPoint>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::Invalid("a path needs at least two points".into()));
        }
        for w in points.windows(2) {
            if w[0].dist(w[1]) == 0.0 {
                return Err(Error::Invalid(format!("consecutive path points coincide at {:?}", w[0].0)));
            }
        }
        Ok(ParameterPath { points })
    }

    pub fn interval(a: f64, b: f64) -> Result<Self> {
        Self::new(vec![ParamPoint::one(a), ParamPoint::one(b)])
    }

    pub fn segments(&self) -> usize {
        self.points.len() - 1
    }

    /// Point at path parameter `tau` in `[0, 1]`; each segment takes an equal share.
    pub fn at(&self, tau: f64) -> ParamPoint {
        let k = self.segments();
        let x = (tau.clamp(0.0, 1.0) * k as f64).min(k as f64);
        let seg = (x.floor() as usize).min(k - 1);
        self.points[seg].lerp(self.points[seg + 1], x - seg as f64)
    }

    /// Derivative of the parameter point with respect to `tau` on the segment containing `tau`.
    pub fn velocity(&self, tau: f64) -> [f64; 2] {
        let k = self.segments();
        let seg = ((tau.clamp(0.0, 1.0) * k as f64).floor() as usize).min(k - 1);
        let (p, q) = (self.points[seg], self.points[seg + 1]);
        [(q.0[0] - p.0[0]) * k as f64, (q.0[1] - p.0[1]) * k as f64]
    }

    pub fn reversed(&self) -> ParameterPath {
        let mut points = self.points.clone();
        points.reverse();
        ParameterPath { points }
    }

    pub fn start(&self) -> ParamPoint {
        self.points[0]
    }

    pub fn end(&self) -> ParamPoint {
        *self.points.last().expect("path has points")
    }
}

/// Symmetric `2n × 2n` coefficient matrix `S_λ(t)` given entrywise by expressions.
#[derive(Debug, Clone)]
pub struct CoefficientFamily {
    half_dim: usize,
    arity: usize,
    entries: Vec<Expr>,
    time_dependent: bool,
}

impl CoefficientFamily {
    /// Builds a family from a row-major table of `2n × 2n` expressions.
    pub fn new(half_dim: usize, arity: usize, entries: Vec<Expr>) -> Result<Self> {
        if half_dim == 0 {
            return Err(Error::Invalid("half-dimension must be positive".into()));
        }
        if arity != 1 && arity != 2 {
            return Err(Error::Invalid(format!("parameter arity must be 1 or 2, got {arity}")));
        }
        let d = 2 * half_dim;
        if entries.len() != d * d {
            return Err(Error::Invalid(format!("expected {} entries for a {d}x{d} matrix, got {}", d * d, entries.len())));
        }
        if arity == 1 && entries.iter().any(|e| e.mentions(Var::Lambda2)) {
            return Err(Error::Invalid("lambda2 used in a one-parameter family".into()));
        }
        let entries: Vec<Expr> = entries.iter().map(Expr::fold_constants).collect();
        let time_dependent = entries.iter().any(|e| e.mentions(Var::T));
        Ok(CoefficientFamily { half_dim, arity, entries, time_dependent })
    }

    /// Parses a row-major table of expression strings.
    pub fn parse(half_dim: usize, arity: usize, rows: &[Vec<String>]) -> Result<Self> {
        let d = 2 * half_dim;
        if rows.len() != d || rows.iter().any(|r| r.len() != d) {
            return Err(Error::Invalid(format!("coefficient table must be {d}x{d}")));
        }
        let mut entries = Vec::with_capacity(d * d);
        for row in rows {
            for text in row {
                entries.push(parse_with(text, Vocabulary::COEFFICIENTS)?);
            }
        }
        Self::new(half_dim, arity, entries)
    }

    /// `S ≡ f(λ) · I` for a scalar expression `f`.
    pub fn scalar(half_dim: usize, arity: usize, diagonal: &str) -> Result<Self> {
        let d = 2 * half_dim;
        let rows: Vec<Vec<String>> =
            (0..d).map(|i| (0..d).map(|j| if i == j { diagonal.to_string() } else { "0".to_string() }).collect()).collect();
        Self::parse(half_dim, arity, &rows)
    }

    pub fn half_dim(&self) -> usize {
        self.half_dim
    }

    pub fn dim(&self) -> usize {
        2 * self.half_dim
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn is_time_dependent(&self) -> bool {
        self.time_dependent
    }

    pub fn entry(&self, row: usize, col: usize) -> &Expr {
        &self.entries[row * self.dim() + col]
    }

    /// Writes `S_λ(t)` column-major into `out` (length `4n²`).
    pub fn fill(&self, p: ParamPoint, t: f64, out: &mut [f64]) -> Result<()> {
        let d = self.dim();
        let b = Bindings::new(t, p.0);
        for row in 0..d {
            for col in 0..d {
                let e = &self.entries[row * d + col];
                out[col * d + row] = match e {
                    Expr::Num(v) => *v,
                    _ => e.eval(&b).map_err(|err| Error::EntryEval { row, col, reason: err.to_string() })?,
                };
            }
        }
        Ok(())
    }

    /// `S_λ(t)` as a dense matrix.
    pub fn eval_s(&self, p: ParamPoint, t: f64) -> Result<DMatrix<f64>> {
        let d = self.dim();
        let mut buf = vec![0.0; d * d];
        self.fill(p, t, &mut buf)?;
        Ok(DMatrix::from_vec(d, d, buf))
    }

    /// Largest spectral norm of `S` over the sampled points and times.
    pub fn max_norm(&self, points: &[ParamPoint], time_samples: usize) -> Result<f64> {
        let mut best: f64 = 0.0;
        for &p in points {
            for k in 0..time_samples.max(1) {
                let t = PERIOD * k as f64 / time_samples.max(1) as f64;
                let s = self.eval_s(p, t)?;
                let sym = (&s + s.transpose()) * 0.5;
                let norm = sym.symmetric_eigenvalues().iter().fold(0.0f64, |m, v| m.max(v.abs()));
                best = best.max(norm);
            }
        }
        Ok(best)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    Asymmetry,
    Aperiodicity,
    EvaluationFailure,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub lambda: [f64; 2],
    pub t: f64,
    pub row: usize,
    pub col: usize,
    /// Size of the defect (or 0 for evaluation failures).
    pub magnitude: f64,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub samples: usize,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn count(&self, kind: ViolationKind) -> usize {
        self.violations.iter().filter(|v| v.kind == kind).count()
    }

    pub fn into_result(self) -> Result<()> {
        match self.violations.first() {
            None => Ok(()),
            Some(v) => Err(Error::Validation(format!(
                "{} violation(s); first: {:?} at lambda={:?}, t={}, entry ({}, {}), magnitude {:e} {}",
                self.violations.len(),
                v.kind,
                v.lambda,
                v.t,
                v.row,
                v.col,
                v.magnitude,
                v.detail
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SampleCounts {
    pub parameter: usize,
    pub time: usize,
}

impl Default for SampleCounts {
    fn default() -> Self {
        SampleCounts { parameter: 9, time: 16 }
    }
}

pub const SYMMETRY_TOL: f64 = 1e-10;
pub const PERIODICITY_TOL: f64 = 1e-10;

/// Checks symmetry and `2π`-periodicity of `S` at sample points. At each sample
/// the worst offending entry is reported.
pub fn validate_family(family: &CoefficientFamily, domain: &ParameterDomain, counts: SampleCounts) -> ValidationReport {
    let d = family.dim();
    let points = domain.sample_points(counts.parameter);
    let mut report = ValidationReport::default();
    // odd offset keeps samples off special angles
    let times: Vec<f64> = (0..counts.time.max(1)).map(|k| PERIOD * (k as f64 + 0.37) / counts.time.max(1) as f64).collect();
    for &p in &points {
        for &t in &times {
            report.samples += 1;
            let (now, later) = match (family.eval_s(p, t), family.eval_s(p, t + PERIOD)) {
                (Ok(a), Ok(b)) => (a, b),
                (Err(e), _) | (_, Err(e)) => {
                    let (row, col) = match &e {
                        Error::EntryEval { row, col, .. } => (*row, *col),
                        _ => (0, 0),
                    };
                    report.violations.push(Violation {
                        kind: ViolationKind::EvaluationFailure,
                        lambda: p.0,
                        t,
                        row,
                        col,
                        magnitude: 0.0,
                        detail: e.to_string(),
                    });
                    continue;
                }
            };
            let mut worst_sym = (0.0, 0, 0);
            let mut worst_per = (0.0, 0, 0);
            for i in 0..d {
                for j in 0..d {
                    let asym = (now[(i, j)] - now[(j, i)]).abs();
                    if j > i && asym > worst_sym.0 {
                        worst_sym = (asym, i, j);
                    }
                    let drift = (now[(i, j)] - later[(i, j)]).abs();
                    if drift > worst_per.0 {
                        worst_per = (drift, i, j);
                    }
                }
            }
            let scale = 1.0 + now.amax();
            if worst_sym.0 > SYMMETRY_TOL * scale {
                report.violations.push(Violation {
                    kind: ViolationKind::Asymmetry,
                    lambda: p.0,
                    t,
                    row: worst_sym.1,
                    col: worst_sym.2,
                    magnitude: worst_sym.0,
                    detail: String::new(),
                });
            }
            if worst_per.0 > PERIODICITY_TOL * scale {
                report.violations.push(Violation {
                    kind: ViolationKind::Aperiodicity,
                    lambda: p.0,
                    t,
                    row: worst_per.1,
                    col: worst_per.2,
                    magnitude: worst_per.0,
                    detail: String::new(),
                });
            }
        }
    }
    report
}

/// Nonlinear system `Ju' + ∇_u H(λ, t, u) = 0` given by the `2n` gradient components.
#[derive(Debug, Clone)]
pub struct NonlinearFamily {
    half_dim: usize,
    gradient: Vec<Expr>,
    linearization: CoefficientFamily,
}

/// Central difference step for the linearization at `u = 0`.
pub const LINEARIZATION_STEP: f64 = 1e-5;

impl NonlinearFamily {
    /// `linearization` overrides the finite-difference derivative at `u = 0`.
    pub fn new(half_dim: usize, gradient: Vec<Expr>, linearization: Option<CoefficientFamily>) -> Result<Self> {
        let d = 2 * half_dim;
        if half_dim == 0 || gradient.len() != d {
            return Err(Error::Invalid(format!("expected {d} gradient components")));
        }
        let linearization = match linearization {
            Some(l) => {
                if l.half_dim() != half_dim {
                    return Err(Error::Invalid("linearization dimension mismatch".into()));
                }
                l
            }
            None => {
                let h = LINEARIZATION_STEP;
                let mut entries = Vec::with_capacity(d * d);
                for g in &gradient {
                    for j in 0..d {
                        let mut plus = vec![0.0; d];
                        let mut minus = vec![0.0; d];
                        plus[j] = h;
                        minus[j] = -h;
                        let diff = Expr::binary(crate::expr::BinOp::Sub, substitute_state(g, &plus), substitute_state(g, &minus));
                        entries.push(Expr::binary(crate::expr::BinOp::Div, diff, Expr::Num(2.0 * h)));
                    }
                }
                CoefficientFamily::new(half_dim, arity_of(&gradient), entries)?
            }
        };
        Ok(NonlinearFamily { half_dim, gradient, linearization })
    }

    pub fn parse(half_dim: usize, gradient: &[String], linearization: Option<CoefficientFamily>) -> Result<Self> {
        let vocab = Vocabulary::with_state(2 * half_dim);
        let exprs =
            gradient.iter().map(|g| parse_with(g, vocab).map(|e| e.fold_constants())).collect::<std::result::Result<Vec<_>, _>>()?;
        Self::new(half_dim, exprs, linearization)
    }

    pub fn half_dim(&self) -> usize {
        self.half_dim
    }

    pub fn dim(&self) -> usize {
        2 * self.half_dim
    }

    pub fn linearization(&self) -> &CoefficientFamily {
        &self.linearization
    }

    pub fn gradient(&self, p: ParamPoint, t: f64, u: &[f64], out: &mut [f64]) -> Result<()> {
        let b = Bindings::with_state(t, p.0, u);
        for (i, g) in self.gradient.iter().enumerate() {
            out[i] = g.eval(&b).map_err(|e| Error::EntryEval { row: i, col: 0, reason: e.to_string() })?;
        }
        Ok(())
    }

    /// Checks `∇_u H(λ, t, 0) = 0` at sample points (tolerance `1e-9`).
    pub fn validate_trivial_branch(&self, domain: &ParameterDomain, counts: SampleCounts) -> Result<()> {
        let zero = vec![0.0; self.dim()];
        let mut g = vec![0.0; self.dim()];
        for p in domain.sample_points(counts.parameter) {
            for k in 0..counts.time.max(1) {
                let t = PERIOD * (k as f64 + 0.37) / counts.time.max(1) as f64;
                self.gradient(p, t, &zero, &mut g)?;
                if let Some(v) = g.iter().find(|v| v.abs() > 1e-9) {
                    return Err(Error::Validation(format!("gradient does not vanish at u = 0: value {v:e} at lambda={:?}, t={t}", p.0)));
                }
            }
        }
        Ok(())
    }
}

fn arity_of(exprs: &[Expr]) -> usize {
    if exprs.iter().any(|e| e.mentions(Var::Lambda2)) {
        2
    } else {
        1
    }
}

fn substitute_state(e: &Expr, u: &[f64]) -> Expr {
    match e {
        Expr::Var(Var::U(i)) => Expr::Num(u[*i]),
        Expr::Num(_) | Expr::Var(_) => e.clone(),
        Expr::Neg(x) => Expr::Neg(Box::new(substitute_state(x, u))),
        Expr::Call(f, x) => Expr::Call(*f, Box::new(substitute_state(x, u))),
        Expr::Binary(op, l, r) => Expr::Binary(*op, Box::new(substitute_state(l, u)), Box::new(substitute_state(r, u))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(rows: &[&[&str]]) -> Vec<Vec<String>> {
        rows.iter().map(|r| r.iter().map(|s| s.to_string()).collect()).collect()
    }

    #[test]
    fn zero_family_evaluates_to_zero() {
        let f = CoefficientFamily::scalar(1, 1, "0").unwrap();
        assert_eq!(f.eval_s(ParamPoint::one(0.3), 1.0).unwrap(), DMatrix::zeros(2, 2));
    }

    #[test]
    fn diagonal_lambda() {
        let f = CoefficientFamily::scalar(2, 1, "lambda").unwrap();
        assert_eq!(f.eval_s(ParamPoint::one(0.7), 2.0).unwrap(), DMatrix::identity(4, 4) * 0.7);
    }

    #[test]
    fn cos_entry_at_pi() {
        let f = CoefficientFamily::scalar(1, 1, "cos(t)").unwrap();
        assert_eq!(f.eval_s(ParamPoint::one(0.0), PI).unwrap()[(0, 0)], -1.0);
    }

    #[test]
    fn evaluation_errors_name_the_entry() {
        let f = CoefficientFamily::parse(1, 1, &table(&[&["1", "0"], &["0", "1/(lambda-1)"]])).unwrap();
        match f.eval_s(ParamPoint::one(1.0), 0.0) {
            Err(Error::EntryEval { row: 1, col: 1, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn syntactically_symmetric_tables_evaluate_symmetric() {
        let f = CoefficientFamily::parse(1, 2, &table(&[&["lambda1", "sin(t)*lambda2"], &["sin(t)*lambda2", "cos(t)"]])).unwrap();
        let s = f.eval_s(ParamPoint::two(0.4, -1.3), 0.77).unwrap();
        assert_eq!(s, s.transpose());
    }

    #[test]
    fn validation_outcomes() {
        let dom = ParameterDomain::interval(0.0, 2.0, 10).unwrap();
        let good = CoefficientFamily::scalar(1, 1, "lambda").unwrap();
        assert!(validate_family(&good, &dom, SampleCounts::default()).passed());

        let asym = CoefficientFamily::parse(1, 1, &table(&[&["lambda", "1"], &["0", "lambda"]])).unwrap();
        let report = validate_family(&asym, &dom, SampleCounts::default());
        assert_eq!(report.count(ViolationKind::Asymmetry), report.samples);
        assert_eq!(report.count(ViolationKind::Aperiodicity), 0);

        let aper = CoefficientFamily::scalar(1, 1, "t").unwrap();
        let report = validate_family(&aper, &dom, SampleCounts::default());
        assert_eq!(report.count(ViolationKind::Aperiodicity), report.samples);
        assert!((report.violations[0].magnitude - 2.0 * PI).abs() < 1e-12);
        assert!(report.into_result().is_err());
    }

    #[test]
    fn validation_reports_evaluation_failures() {
        let dom = ParameterDomain::interval(-1.0, 1.0, 3).unwrap();
        let f = CoefficientFamily::scalar(1, 1, "sqrt(lambda)").unwrap();
        let report = validate_family(&f, &dom, SampleCounts { parameter: 3, time: 2 });
        assert!(report.count(ViolationKind::EvaluationFailure) > 0);
    }

    #[test]
    fn family_shape_errors() {
        assert!(CoefficientFamily::parse(1, 1, &table(&[&["1", "0"]])).is_err());
        assert!(CoefficientFamily::scalar(1, 3, "1").is_err());
        assert!(CoefficientFamily::scalar(1, 1, "lambda2").is_err());
        assert!(CoefficientFamily::scalar(1, 2, "lambda2").is_ok());
    }

    #[test]
    fn domain_invariants() {
        assert!(ParameterDomain::interval(1.0, 1.0, 5).is_err());
        assert!(ParameterDomain::interval(0.0, 1.0, 1).is_err());
        assert!(ParameterDomain::rectangle([0.0, 0.0], [1.0, 1.0], [4, 4], vec![[3, 0]]).is_err());
        let r = ParameterDomain::rectangle([0.0, 0.0], [1.0, 2.0], [3, 5], vec![[1, 3]]).unwrap();
        assert_eq!(r.node(2, 4), ParamPoint::two(1.0, 2.0));
        assert!(ParameterDomain::circle(0.0, -1.0, 8).is_err());
    }

    #[test]
    fn path_parameterization() {
        let p = ParameterPath::new(vec![ParamPoint::two(0.0, 0.0), ParamPoint::two(1.0, 0.0), ParamPoint::two(1.0, 2.0)]).unwrap();
        assert_eq!(p.at(0.25), ParamPoint::two(0.5, 0.0));
        assert_eq!(p.at(0.75), ParamPoint::two(1.0, 1.0));
        assert_eq!(p.at(1.0), ParamPoint::two(1.0, 2.0));
        assert_eq!(p.velocity(0.9), [0.0, 4.0]);
        assert_eq!(p.reversed().at(0.0), ParamPoint::two(1.0, 2.0));
        assert!(ParameterPath::new(vec![ParamPoint::one(1.0), ParamPoint::one(1.0)]).is_err());
    }

    #[test]
    fn nonlinear_linearization_by_differences() {
        let nl = NonlinearFamily::parse(1, &["lambda*u1 + (u1^2+u2^2)*u1".into(), "lambda*u2 + (u1^2+u2^2)*u2".into()], None).unwrap();
        let s = nl.linearization().eval_s(ParamPoint::one(0.9), 0.3).unwrap();
        assert!((s - DMatrix::identity(2, 2) * 0.9).amax() < 1e-9);
        let dom = ParameterDomain::interval(0.5, 1.5, 4).unwrap();
        assert!(nl.validate_trivial_branch(&dom, SampleCounts::default()).is_ok());
        let shifted = NonlinearFamily::parse(1, &["u1 + 1".into(), "u2".into()], None).unwrap();
        assert!(shifted.validate_trivial_branch(&dom, SampleCounts::default()).is_err());
    }
}
