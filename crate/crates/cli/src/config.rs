//! Strict JSON run configuration.

use hamindex::bifurcation::{CandidateOptions, NewtonOptions};
use hamindex::integrator::IntegratorOptions;
use hamindex::model::{CoefficientFamily, NonlinearFamily, ParamPoint, ParameterDomain, ParameterPath};
use hamindex::monodromy::MonodromyOptions;
use hamindex::spectral::FlowOptions;
use hamindex::sturm::{Arithmetic, Convention};
use hamindex::symplectic::CzOptions;
use hamindex::theorem::Numerics;
use hamindex::winding::WindingOptions;
use hamindex::{families, Error, Result};
use serde::Deserialize;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub version: u32,
    /// Free-form annotation, ignored.
    #[serde(rename = "$comment", default)]
    pub _comment: Option<String>,
    #[serde(default)]
    pub family: Option<FamilyBlock>,
    #[serde(default)]
    pub domain: Option<DomainBlock>,
    #[serde(default)]
    pub numerics: NumericsBlock,
    pub task: Task,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyBlock {
    pub n: usize,
    #[serde(default = "one")]
    pub arity: usize,
    /// Row-major entries of `S`.
    #[serde(default)]
    pub s: Option<Vec<Vec<String>>>,
    /// Shorthand for `S = diagonal · I`.
    #[serde(default)]
    pub diagonal: Option<String>,
    /// Components of `∇_u H`.
    #[serde(default)]
    pub gradient: Option<Vec<String>>,
    /// Random trigonometric perturbation of `λI`, drawn with `--seed`.
    #[serde(default)]
    pub random: bool,
}

fn one() -> usize {
    1
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DomainBlock {
    Interval {
        a: f64,
        b: f64,
        #[serde(default = "default_resolution")]
        resolution: usize,
    },
    Circle {
        start: f64,
        circumference: f64,
        #[serde(default = "default_resolution")]
        resolution: usize,
    },
    Rectangle {
        lower: [f64; 2],
        upper: [f64; 2],
        resolution: [usize; 2],
        #[serde(default)]
        boundary_cells: Vec<[usize; 2]>,
    },
}

fn default_resolution() -> usize {
    201
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NumericsBlock {
    pub steps: Option<usize>,
    pub tol: Option<f64>,
    pub max_steps: Option<usize>,
    /// Fourier truncation `N`.
    pub modes: Option<usize>,
    pub margin: Option<f64>,
    pub check_margin: Option<f64>,
    pub winding_samples: Option<usize>,
    pub degeneracy_rel: Option<f64>,
    pub flow_band: Option<f64>,
    pub flow_segments: Option<usize>,
    pub invertibility_tol: Option<f64>,
    pub cz_grid: Option<usize>,
    pub kernel_tol: Option<f64>,
    pub form_tol: Option<f64>,
    pub sturm_convention: Option<Convention>,
    pub sturm_arithmetic: Option<Arithmetic>,
    pub newton_tol: Option<f64>,
    pub newton_max_iterations: Option<usize>,
    pub seed_doublings: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorChoice {
    A,
    L,
    Both,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairBlock {
    #[serde(default)]
    pub name: Option<String>,
    /// Coefficients of `λ^{m−j} s^j`, as integer, decimal or `p/q` strings.
    pub p: Vec<String>,
    pub q: Vec<String>,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Task {
    Validate {},
    Monodromy {
        lambda: Vec<f64>,
        #[serde(default)]
        shift: f64,
    },
    Winding {
        #[serde(default)]
        path: Option<Vec<Vec<f64>>>,
    },
    Sfl {
        #[serde(default)]
        path: Option<Vec<Vec<f64>>>,
        #[serde(default = "both")]
        operator: OperatorChoice,
        /// Also compute the flow of the complexified `𝒜` assembly.
        #[serde(default)]
        complex: bool,
    },
    Cz {
        #[serde(default)]
        path: Option<Vec<Vec<f64>>>,
    },
    Sturm {
        pairs: Vec<PairBlock>,
    },
    Bifurcate {
        /// Paths for `d(γ)`.
        #[serde(default)]
        paths: Vec<Vec<Vec<f64>>>,
    },
    Orbit {
        lambda: Vec<f64>,
        seed: f64,
        #[serde(default = "default_orbit_modes")]
        modes: usize,
    },
    TheoremCheck {
        #[serde(default)]
        path: Option<Vec<Vec<f64>>>,
    },
}

fn both() -> OperatorChoice {
    OperatorChoice::Both
}

fn default_orbit_modes() -> usize {
    4
}

impl Task {
    pub fn name(&self) -> &'static str {
        match self {
            Task::Validate {} => "validate",
            Task::Monodromy { .. } => "monodromy",
            Task::Winding { .. } => "winding",
            Task::Sfl { .. } => "sfl",
            Task::Cz { .. } => "cz",
            Task::Sturm { .. } => "sturm",
            Task::Bifurcate { .. } => "bifurcate",
            Task::Orbit { .. } => "orbit",
            Task::TheoremCheck { .. } => "theorem-check",
        }
    }
}

/// Parses a config document, reporting the key path of any schema error.
pub fn parse(text: &str) -> Result<RunConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Error::Invalid(format!("config error at `{path}`: {}", e.into_inner()))
    })?;
    if cfg.version != SCHEMA_VERSION {
        return Err(Error::Invalid(format!("unsupported config version {} (expected {SCHEMA_VERSION})", cfg.version)));
    }
    cfg.numerics.validate()?;
    Ok(cfg)
}

fn positive(name: &str, v: Option<f64>) -> Result<()> {
    match v {
        Some(x) if !(x > 0.0 && x.is_finite()) => {
            Err(Error::Invalid(format!("config error at `numerics.{name}`: must be positive, got {x}")))
        }
        _ => Ok(()),
    }
}

fn positive_count(name: &str, v: Option<usize>) -> Result<()> {
    match v {
        Some(0) => Err(Error::Invalid(format!("config error at `numerics.{name}`: must be positive"))),
        _ => Ok(()),
    }
}

impl NumericsBlock {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("tol", self.tol),
            ("margin", self.margin),
            ("check_margin", self.check_margin),
            ("degeneracy_rel", self.degeneracy_rel),
            ("flow_band", self.flow_band),
            ("invertibility_tol", self.invertibility_tol),
            ("kernel_tol", self.kernel_tol),
            ("form_tol", self.form_tol),
            ("newton_tol", self.newton_tol),
        ] {
            positive(name, v)?;
        }
        for (name, v) in [
            ("steps", self.steps),
            ("max_steps", self.max_steps),
            ("modes", self.modes),
            ("winding_samples", self.winding_samples),
            ("flow_segments", self.flow_segments),
            ("cz_grid", self.cz_grid),
            ("newton_max_iterations", self.newton_max_iterations),
        ] {
            positive_count(name, v)?;
        }
        self.integrator().validate()
    }

    pub fn integrator(&self) -> IntegratorOptions {
        let d = IntegratorOptions::default();
        IntegratorOptions {
            steps: self.steps.unwrap_or(d.steps),
            tol: self.tol.unwrap_or(d.tol),
            max_steps: self.max_steps.unwrap_or(d.max_steps),
        }
    }

    pub fn winding(&self) -> WindingOptions {
        let d = WindingOptions::default();
        WindingOptions {
            initial_samples: self.winding_samples.unwrap_or(d.initial_samples),
            degeneracy_rel: self.degeneracy_rel.unwrap_or(d.degeneracy_rel),
            ..d
        }
    }

    pub fn monodromy(&self) -> MonodromyOptions {
        let d = MonodromyOptions::default();
        MonodromyOptions {
            margin: self.margin.unwrap_or(d.margin),
            check_margin: self.check_margin.unwrap_or(d.check_margin),
            integrator: self.integrator(),
            winding: self.winding(),
        }
    }

    pub fn flow(&self) -> FlowOptions {
        let d = FlowOptions::default();
        FlowOptions {
            band: self.flow_band.unwrap_or(d.band),
            initial_segments: self.flow_segments.unwrap_or(d.initial_segments),
            invertibility_tol: self.invertibility_tol.unwrap_or(d.invertibility_tol),
            ..d
        }
    }

    pub fn cz(&self) -> CzOptions {
        let d = CzOptions::default();
        CzOptions {
            grid: self.cz_grid.unwrap_or(d.grid),
            kernel_tol: self.kernel_tol.unwrap_or(d.kernel_tol),
            form_tol: self.form_tol.unwrap_or(d.form_tol),
            integrator: self.integrator(),
            ..d
        }
    }

    pub fn candidates(&self) -> CandidateOptions {
        let d = CandidateOptions::default();
        CandidateOptions { integrator: self.integrator(), kernel_tol: self.kernel_tol.unwrap_or(d.kernel_tol), ..d }
    }

    pub fn newton(&self) -> NewtonOptions {
        let d = NewtonOptions::default();
        NewtonOptions {
            tol: self.newton_tol.unwrap_or(d.tol),
            max_iterations: self.newton_max_iterations.unwrap_or(d.max_iterations),
            seed_doublings: self.seed_doublings.unwrap_or(d.seed_doublings),
            ..d
        }
    }

    pub fn theorem(&self) -> Numerics {
        Numerics { integrator: self.integrator(), monodromy: self.monodromy(), flow: self.flow(), modes: self.modes, cz: self.cz() }
    }

    pub fn convention(&self) -> Convention {
        self.sturm_convention.unwrap_or_default()
    }

    pub fn arithmetic(&self) -> Arithmetic {
        self.sturm_arithmetic.unwrap_or_default()
    }
}

/// The linear family, or the linearization at `u = 0` of a nonlinear one.
pub enum BuiltFamily {
    Linear(CoefficientFamily),
    Nonlinear(NonlinearFamily),
}

impl BuiltFamily {
    pub fn linear(&self) -> &CoefficientFamily {
        match self {
            BuiltFamily::Linear(f) => f,
            BuiltFamily::Nonlinear(nl) => nl.linearization(),
        }
    }
}

impl FamilyBlock {
    pub fn build(&self, seed: u64) -> Result<BuiltFamily> {
        let given = [self.s.is_some(), self.diagonal.is_some(), self.gradient.is_some(), self.random].iter().filter(|b| **b).count();
        if given != 1 {
            return Err(Error::Invalid("config error at `family`: give exactly one of `s`, `diagonal`, `gradient`, `random`".into()));
        }
        if !(1..=2).contains(&self.arity) {
            return Err(Error::Invalid(format!("config error at `family.arity`: must be 1 or 2, got {}", self.arity)));
        }
        let check_arity = |f: CoefficientFamily| -> Result<CoefficientFamily> {
            if f.arity() > self.arity {
                return Err(Error::Invalid("config error at `family`: entries use lambda2 but arity is 1".into()));
            }
            Ok(f)
        };
        if let Some(rows) = &self.s {
            return Ok(BuiltFamily::Linear(check_arity(CoefficientFamily::parse(self.n, self.arity, rows)?)?));
        }
        if let Some(diag) = &self.diagonal {
            return Ok(BuiltFamily::Linear(check_arity(CoefficientFamily::scalar(self.n, self.arity, diag)?)?));
        }
        if let Some(g) = &self.gradient {
            return Ok(BuiltFamily::Nonlinear(NonlinearFamily::parse(self.n, g, None)?));
        }
        Ok(BuiltFamily::Linear(families::seeded_family(seed, self.n)))
    }
}

impl DomainBlock {
    pub fn build(&self) -> Result<ParameterDomain> {
        match self {
            DomainBlock::Interval { a, b, resolution } => ParameterDomain::interval(*a, *b, *resolution),
            DomainBlock::Circle { start, circumference, resolution } => ParameterDomain::circle(*start, *circumference, *resolution),
            DomainBlock::Rectangle { lower, upper, resolution, boundary_cells } => {
                ParameterDomain::rectangle(*lower, *upper, *resolution, boundary_cells.clone())
            }
        }
    }
}

pub fn point(coords: &[f64]) -> Result<ParamPoint> {
    match coords {
        [x] => Ok(ParamPoint::one(*x)),
        [x, y] => Ok(ParamPoint::two(*x, *y)),
        _ => Err(Error::Invalid(format!("a parameter point has 1 or 2 coordinates, got {}", coords.len()))),
    }
}

pub fn path(points: &[Vec<f64>]) -> Result<ParameterPath> {
    ParameterPath::new(points.iter().map(|p| point(p)).collect::<Result<Vec<_>>>()?)
}
