//! The run configuration: one JSON document, validated before anything runs.
//!
//! Syntax and type errors carry the line and column reported by the JSON
//! parser; semantic errors are pinned to the line of the offending key.

use mfg_core::coupling::{
    constant, selection_example, InteractionCoupling, LinearCoupling, PolynomialKernel, QuadraticPotential,
    SecondMomentTilt, SumCoupling,
};
use mfg_core::hjb::Grid1D;
use mfg_core::reduced::Scan;
use mfg_core::{Coupling, CouplingField, EmpiricalMeasure};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::{Map, Value};

use crate::error::{CliError, CliResult};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    pub spec: Option<SpecBlock>,
    #[serde(default)]
    pub solver: SolverBlock,
    pub scan: Option<ScanBlock>,
    #[serde(default)]
    pub pde: PdeBlock,
    pub sweep: Option<SweepBlock>,
    #[serde(default)]
    pub check: CheckBlock,
    #[serde(default)]
    pub output: OutputBlock,
}

/// Either a flat list of scalars (points in R) or a list of points.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum Points {
    Scalars(Vec<f64>),
    Vectors(Vec<Vec<f64>>),
}

impl Points {
    pub fn to_measure(&self) -> mfg_core::Result<EmpiricalMeasure> {
        match self {
            Points::Scalars(v) => EmpiricalMeasure::from_scalars(v),
            Points::Vectors(v) => EmpiricalMeasure::from_points(v),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecBlock {
    #[serde(alias = "T")]
    pub horizon: f64,
    pub initial: Option<Points>,
    pub sampler: Option<SamplerBlock>,
    pub coupling: CouplingBlock,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerKind {
    Gaussian,
    Uniform,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplerBlock {
    pub kind: SamplerKind,
    pub n: usize,
    #[serde(default = "one")]
    pub dim: usize,
    #[serde(default)]
    pub seed: u64,
    /// Standard deviation (gaussian) or half-width (uniform).
    #[serde(default = "unit")]
    pub scale: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingBlock {
    pub label: String,
    #[serde(default)]
    pub params: Map<String, Value>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodName {
    Potential,
    FixedPoint,
    FictitiousPlay,
    Enumeration,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverBlock {
    #[serde(default = "default_method")]
    pub method: MethodName,
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    #[serde(default)]
    pub restarts: usize,
    #[serde(default = "half")]
    pub relaxation: f64,
    #[serde(default)]
    pub seed: u64,
    /// Starting configuration for fixed-point and fictitious play; an extra
    /// start for the potential minimizer.
    pub init: Option<Points>,
    #[serde(default = "default_rounds")]
    pub rounds: usize,
}

impl Default for SolverBlock {
    fn default() -> Self {
        Self {
            method: default_method(),
            tol: None,
            max_iter: None,
            restarts: 0,
            relaxation: half(),
            seed: 0,
            init: None,
            rounds: default_rounds(),
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanBlock {
    pub lo: f64,
    pub hi: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Godunov,
    Viscous,
    Biased,
}

impl Scheme {
    pub fn as_str(&self) -> &'static str {
        match self {
            Scheme::Godunov => "godunov",
            Scheme::Viscous => "viscous",
            Scheme::Biased => "biased",
        }
    }
}

/// Initial datum of the Burgers runs.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Datum {
    /// `u0 = D_x g(delta_y, y)` of the configured one-dimensional coupling.
    Coupling,
    Riemann {
        left: f64,
        right: f64,
        #[serde(default)]
        at: f64,
    },
    Constant {
        value: f64,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PdeBlock {
    #[serde(default = "default_x_lo")]
    pub x_lo: f64,
    #[serde(default = "default_x_hi")]
    pub x_hi: f64,
    #[serde(default = "default_nx")]
    pub nx: usize,
    #[serde(default = "half")]
    pub cfl: f64,
    #[serde(default = "default_eps_list")]
    pub eps_list: Vec<f64>,
    pub t_final: Option<f64>,
    #[serde(default = "default_schemes")]
    pub schemes: Vec<Scheme>,
    /// Constant bias of the gradient-squared viscous term.
    #[serde(default)]
    pub theta: f64,
    #[serde(default = "default_datum")]
    pub datum: Datum,
    #[serde(default = "default_shock_threshold")]
    pub shock_threshold: f64,
}

impl Default for PdeBlock {
    fn default() -> Self {
        Self {
            x_lo: default_x_lo(),
            x_hi: default_x_hi(),
            nx: default_nx(),
            cfl: half(),
            eps_list: default_eps_list(),
            t_final: None,
            schemes: default_schemes(),
            theta: 0.0,
            datum: default_datum(),
            shock_threshold: default_shock_threshold(),
        }
    }
}

impl PdeBlock {
    pub fn grid(&self) -> mfg_core::Result<Grid1D> {
        Grid1D::new(self.x_lo, self.x_hi, self.nx)
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepBlock {
    pub x_lo: f64,
    pub x_hi: f64,
    pub count: usize,
    pub t: f64,
}

impl SweepBlock {
    /// `count` equally spaced points including both ends.
    pub fn points(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.x_lo];
        }
        let h = (self.x_hi - self.x_lo) / (self.count - 1) as f64;
        (0..self.count).map(|i| self.x_lo + h * i as f64).collect()
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckBlock {
    /// Atoms per sampled configuration.
    #[serde(default = "default_check_n")]
    pub n: usize,
    #[serde(default = "one")]
    pub dim: usize,
    /// Random configurations (or pairs of them) per checker.
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "unit")]
    pub scale: f64,
    #[serde(default = "default_quad_order")]
    pub quad_order: usize,
    #[serde(default = "default_fd_step")]
    pub fd_step: f64,
    /// Configuration at which the potentializability Jacobian is built.
    pub points: Option<Points>,
    /// Extra `[X, Y]` pairs for the monotonicity checkers.
    #[serde(default)]
    pub pairs: Vec<(Points, Points)>,
}

impl Default for CheckBlock {
    fn default() -> Self {
        Self {
            n: default_check_n(),
            dim: 1,
            samples: default_samples(),
            seed: 0,
            scale: 1.0,
            quad_order: default_quad_order(),
            fd_step: default_fd_step(),
            points: None,
            pairs: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Json,
    Csv,
    /// Straight-line lift of the solved game, one row per path knot.
    PathsCsv,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    pub path: Option<String>,
    pub format: Option<Format>,
    /// Segments per path for the `paths_csv` format.
    pub segments: Option<usize>,
}

fn one() -> usize {
    1
}
fn unit() -> f64 {
    1.0
}
fn half() -> f64 {
    0.5
}
fn default_method() -> MethodName {
    MethodName::Potential
}
fn default_rounds() -> usize {
    200
}
fn default_x_lo() -> f64 {
    -4.0
}
fn default_x_hi() -> f64 {
    4.0
}
fn default_nx() -> usize {
    1600
}
fn default_eps_list() -> Vec<f64> {
    vec![0.05, 0.02]
}
fn default_schemes() -> Vec<Scheme> {
    vec![Scheme::Godunov]
}
fn default_datum() -> Datum {
    Datum::Coupling
}
fn default_shock_threshold() -> f64 {
    0.01
}
fn default_check_n() -> usize {
    3
}
fn default_samples() -> usize {
    50
}
fn default_quad_order() -> usize {
    mfg_core::checks::DEFAULT_QUAD_ORDER
}
fn default_fd_step() -> f64 {
    mfg_core::checks::DEFAULT_FD_STEP
}

/// Line (1-based) of the last key of `path`, found by locating each key of
/// the path in turn after the previous one.
pub fn locate(src: &str, path: &[&str]) -> Option<usize> {
    let mut from = 0;
    for key in path {
        let needle = format!("\"{key}\"");
        from += src[from..].find(&needle)?;
        from += 1;
    }
    Some(src[..from].matches('\n').count() + 1)
}

/// A parsed configuration together with its source text for error locations.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: RunConfig,
    source: String,
}

impl LoadedConfig {
    pub fn parse(source: &str) -> CliResult<Self> {
        let config: RunConfig = serde_json::from_str(source).map_err(|e| CliError::Config {
            message: strip_position(&e.to_string()),
            line: Some(e.line()).filter(|&l| l > 0),
            column: Some(e.column()).filter(|&c| c > 0),
        })?;
        let loaded = Self { config, source: source.to_owned() };
        loaded.validate()?;
        Ok(loaded)
    }

    /// A config error pinned to the line of `path`.
    pub fn error_at(&self, path: &[&str], message: impl Into<String>) -> CliError {
        CliError::config(message, locate(&self.source, path))
    }

    fn require(&self, ok: bool, path: &[&str], message: impl FnOnce() -> String) -> CliResult<()> {
        if ok {
            Ok(())
        } else {
            Err(self.error_at(path, message()))
        }
    }

    fn validate(&self) -> CliResult<()> {
        let c = &self.config;
        self.require(c.schema_version == SCHEMA_VERSION, &["schema_version"], || {
            format!("unsupported schema_version {}, expected {SCHEMA_VERSION}", c.schema_version)
        })?;
        if let Some(spec) = &c.spec {
            let key = if self.source.contains("\"T\"") { "T" } else { "horizon" };
            self.require(spec.horizon > 0.0 && spec.horizon.is_finite(), &["spec", key], || {
                format!("horizon must be positive, got {}", spec.horizon)
            })?;
            self.require(spec.initial.is_some() != spec.sampler.is_some(), &["spec"], || {
                "spec needs exactly one of `initial` and `sampler`".into()
            })?;
            if let Some(s) = &spec.sampler {
                self.require(s.n > 0 && s.dim > 0, &["spec", "sampler"], || "sampler needs n, dim >= 1".into())?;
                self.require(s.scale > 0.0, &["spec", "sampler", "scale"], || "sampler scale must be positive".into())?;
            }
            self.build_coupling(&spec.coupling)?;
        }
        let s = &c.solver;
        if let Some(tol) = s.tol {
            self.require(tol > 0.0, &["solver", "tol"], || format!("tolerance must be positive, got {tol}"))?;
        }
        if let Some(m) = s.max_iter {
            self.require(m > 0, &["solver", "max_iter"], || "max_iter must be at least 1".into())?;
        }
        self.require(s.relaxation > 0.0 && s.relaxation <= 1.0, &["solver", "relaxation"], || {
            format!("relaxation must lie in (0, 1], got {}", s.relaxation)
        })?;
        self.require(s.rounds > 0, &["solver", "rounds"], || "rounds must be at least 1".into())?;
        if let Some(scan) = &c.scan {
            self.require(scan.lo < scan.hi && scan.steps >= 2, &["scan"], || {
                "scan needs lo < hi and at least 2 steps".into()
            })?;
        }
        let p = &c.pde;
        self.require(p.x_lo < p.x_hi && p.nx >= 8, &["pde"], || "pde grid needs x_lo < x_hi and nx >= 8".into())?;
        self.require(p.cfl > 0.0 && p.cfl <= 0.9, &["pde", "cfl"], || {
            format!("cfl must lie in (0, 0.9], got {}", p.cfl)
        })?;
        self.require(p.eps_list.iter().all(|&e| e > 0.0), &["pde", "eps_list"], || {
            "every viscosity must be positive".into()
        })?;
        if let Some(t) = p.t_final {
            self.require(t >= 0.0, &["pde", "t_final"], || "t_final must be non-negative".into())?;
        }
        self.require(p.shock_threshold > 0.0, &["pde", "shock_threshold"], || {
            "shock_threshold must be positive".into()
        })?;
        if let Some(w) = &c.sweep {
            self.require(w.count >= 1 && w.x_lo <= w.x_hi, &["sweep"], || {
                "sweep needs count >= 1 and x_lo <= x_hi".into()
            })?;
            self.require(w.t > 0.0, &["sweep", "t"], || format!("sweep time must be positive, got {}", w.t))?;
        }
        let k = &c.check;
        self.require(k.n > 0 && k.dim > 0, &["check"], || "check needs n, dim >= 1".into())?;
        self.require(k.fd_step > 0.0, &["check", "fd_step"], || "fd_step must be positive".into())?;
        self.require(k.quad_order > 0, &["check", "quad_order"], || "quad_order must be at least 1".into())?;
        if let Some(n) = c.output.segments {
            self.require(n > 0, &["output", "segments"], || "segments must be at least 1".into())?;
        }
        Ok(())
    }

    pub fn spec(&self) -> CliResult<&SpecBlock> {
        self.config.spec.as_ref().ok_or_else(|| CliError::config("this command needs a `spec` block", None))
    }

    /// The initial measure, drawn from the sampler if one is configured.
    /// `seed` overrides the sampler's own seed.
    pub fn initial(&self, seed: Option<u64>) -> CliResult<EmpiricalMeasure> {
        let spec = self.spec()?;
        if let Some(points) = &spec.initial {
            return points.to_measure().map_err(|e| self.error_at(&["spec", "initial"], e.to_string()));
        }
        let s = spec.sampler.as_ref().expect("validated: initial or sampler");
        let mut rng = ChaCha8Rng::seed_from_u64(seed.unwrap_or(s.seed));
        let coords: Vec<f64> = (0..s.n * s.dim)
            .map(|_| match s.kind {
                SamplerKind::Gaussian => s.scale * rng.sample::<f64, _>(StandardNormal),
                SamplerKind::Uniform => rng.random_range(-s.scale..s.scale),
            })
            .collect();
        Ok(EmpiricalMeasure::from_flat(coords, s.dim)?)
    }

    pub fn scan(&self) -> Option<Scan> {
        self.config.scan.map(|s| Scan::new(s.lo, s.hi, s.steps))
    }

    pub fn coupling(&self) -> CliResult<Box<dyn Coupling>> {
        let block = &self.spec()?.coupling;
        match self.build_coupling(block)? {
            Built::Full(c) => Ok(c),
            Built::FieldOnly(_) => Err(self.error_at(
                &["spec", "coupling", "label"],
                format!("coupling `{}` has no potential and is only available to `check`", block.label),
            )),
        }
    }

    pub fn coupling_field(&self) -> CliResult<Built> {
        self.build_coupling(&self.spec()?.coupling)
    }

    fn params<T: DeserializeOwned>(&self, block: &CouplingBlock) -> CliResult<T> {
        serde_json::from_value(Value::Object(block.params.clone()))
            .map_err(|e| self.error_at(&["spec", "coupling", "params"], format!("coupling `{}`: {e}", block.label)))
    }

    fn build_coupling(&self, block: &CouplingBlock) -> CliResult<Built> {
        let label = block.label.as_str();
        let built = match label {
            "zero" | "constant" => {
                let p: ConstantParams = self.params(block)?;
                let value = if label == "zero" { 0.0 } else { p.value };
                Built::Full(Box::new(LinearCoupling::new(constant(value).potential, label)))
            }
            "selection" => {
                let _: Empty = self.params(block)?;
                Built::Full(Box::new(selection_example()))
            }
            "linear_quadratic" => {
                let p: ConfineParams = self.params(block)?;
                Built::Full(Box::new(LinearCoupling::new(p.potential(), label)))
            }
            "interaction" => {
                let p: KernelParams = self.params(block)?;
                Built::Full(Box::new(InteractionCoupling::new(p.kernel(), label)))
            }
            "confined_interaction" => {
                let p: ConfinedInteractionParams = self.params(block)?;
                let confine = ConfineParams { stiffness: p.stiffness, quartic: p.confine_quartic, center: p.center };
                let kernel = KernelParams { quadratic: p.quadratic, quartic: p.quartic };
                Built::Full(Box::new(
                    SumCoupling::new(vec![
                        Box::new(LinearCoupling::new(confine.potential(), "confine")),
                        Box::new(InteractionCoupling::new(kernel.kernel(), "interaction")),
                    ])
                    .with_label(label),
                ))
            }
            "second_moment_tilt" => {
                let _: Empty = self.params(block)?;
                Built::FieldOnly(Box::new(SecondMomentTilt))
            }
            other => {
                return Err(self.error_at(
                    &["spec", "coupling", "label"],
                    format!(
                        "unknown coupling label `{other}` (known: zero, constant, selection, linear_quadratic, \
                         interaction, confined_interaction, second_moment_tilt)"
                    ),
                ))
            }
        };
        Ok(built)
    }
}

/// A configured coupling; some only provide the gradient field.
pub enum Built {
    Full(Box<dyn Coupling>),
    FieldOnly(Box<dyn CouplingField>),
}

impl Built {
    pub fn field(&self) -> &dyn CouplingField {
        match self {
            Built::Full(c) => c,
            Built::FieldOnly(f) => f.as_ref(),
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Empty {}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ConstantParams {
    #[serde(default)]
    value: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfineParams {
    #[serde(default = "unit")]
    stiffness: f64,
    #[serde(default)]
    quartic: f64,
    #[serde(default)]
    center: Vec<f64>,
}

impl ConfineParams {
    fn potential(self) -> QuadraticPotential {
        QuadraticPotential { stiffness: self.stiffness, quartic: self.quartic, center: self.center }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct KernelParams {
    #[serde(default = "unit")]
    quadratic: f64,
    #[serde(default)]
    quartic: f64,
}

impl KernelParams {
    fn kernel(self) -> PolynomialKernel {
        PolynomialKernel { quadratic: self.quadratic, quartic: self.quartic }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfinedInteractionParams {
    #[serde(default = "unit")]
    stiffness: f64,
    #[serde(default)]
    confine_quartic: f64,
    #[serde(default)]
    center: Vec<f64>,
    #[serde(default = "unit")]
    quadratic: f64,
    #[serde(default)]
    quartic: f64,
}

/// serde_json appends " at line L column C"; the position is reported separately.
fn strip_position(msg: &str) -> String {
    match msg.rfind(" at line ") {
        Some(i) => msg[..i].to_owned(),
        None => msg.to_owned(),
    }
}
