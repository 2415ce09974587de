//! Experiment configuration: JSON schema, parsing with field paths, and
//! validation against the preconditions of the core operations.

use std::fmt;
use std::path::{Path, PathBuf};

use heatobs_core::control::SynthesisOptions;
use heatobs_core::domain::{BoundaryCondition, Metric};
use heatobs_core::doubling::{Cutoff, Interface, Parity};
use heatobs_core::inequality::NormPair;
use heatobs_core::spectrum::Solver;
use serde::{Deserialize, Deserializer, Serialize};

/// A config problem tied to the field that caused it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl ConfigError {
    fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.field.is_empty() {
            write!(f, "config: {}", self.message)
        } else {
            write!(f, "config field `{}`: {}", self.field, self.message)
        }
    }
}

impl std::error::Error for ConfigError {}

/// A real number written either as a JSON number or as a multiple of pi:
/// `"pi"`, `"pi/2"`, `"2pi"`, `"0.5*pi"`, `"3*pi/4"`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Real(pub f64);

fn parse_real(s: &str) -> Option<f64> {
    let t: String = s
        .chars()
        .filter(|c| !c.is_whitespace())
        .collect::<String>()
        .to_ascii_lowercase();
    if let Ok(v) = t.parse::<f64>() {
        return Some(v);
    }
    let (head, tail) = t.split_once("pi")?;
    let head = head.strip_suffix('*').unwrap_or(head);
    let factor = match head {
        "" => 1.0,
        "-" => -1.0,
        h => h.parse::<f64>().ok()?,
    };
    let div = match tail {
        "" => 1.0,
        d => d.strip_prefix('/')?.parse::<f64>().ok()?,
    };
    Some(factor * std::f64::consts::PI / div)
}

impl<'de> Deserialize<'de> for Real {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(Real(v)),
            Raw::Text(s) => parse_real(&s).map(Real).ok_or_else(|| {
                serde::de::Error::custom(format!("`{s}` is neither a number nor a multiple of pi"))
            }),
        }
    }
}

fn reals(v: &[Real]) -> Vec<f64> {
    v.iter().map(|r| r.0).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    /// One length per axis.
    pub lengths: Vec<Real>,
    pub cells: Vec<usize>,
    pub bc: BoundaryCondition,
}

impl DomainConfig {
    pub fn dim(&self) -> usize {
        self.lengths.len()
    }

    pub fn lengths(&self) -> Vec<f64> {
        reals(&self.lengths)
    }
}

/// A metric given as a scalar multiple of the identity or by entries.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MetricConfig {
    Scalar(f64),
    Entries {
        xx: f64,
        #[serde(default)]
        xy: f64,
        #[serde(default = "one")]
        yy: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl MetricConfig {
    pub fn metric(&self) -> Metric {
        match *self {
            MetricConfig::Scalar(g) => Metric::scalar(g),
            MetricConfig::Entries { xx, xy, yy } => Metric { xx, xy, yy },
        }
    }
}

impl Default for MetricConfig {
    fn default() -> Self {
        MetricConfig::Scalar(1.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CoefficientConfig {
    Constant {
        #[serde(default)]
        metric: MetricConfig,
        #[serde(default = "one")]
        kappa: f64,
    },
    /// Random piecewise-linear fields drawn with the run seed.
    PiecewiseLinear {
        lipschitz_metric: f64,
        lipschitz_kappa: f64,
    },
    /// CSV table, resolved relative to the config file.
    Table {
        path: PathBuf,
        #[serde(default)]
        lipschitz_metric: Option<f64>,
        #[serde(default)]
        lipschitz_kappa: Option<f64>,
    },
}

impl Default for CoefficientConfig {
    fn default() -> Self {
        CoefficientConfig::Constant {
            metric: MetricConfig::default(),
            kappa: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SetConfig {
    Whole,
    /// Cells whose centres lie in the box; missing coordinates span the axis.
    Box {
        lo: Vec<Real>,
        hi: Vec<Real>,
    },
    Cells {
        cells: Vec<usize>,
    },
    Points {
        points: Vec<Vec<Real>>,
    },
    /// Centres of the level-`levels` intervals placed in `[from, to]`.
    Cantor {
        ratio: f64,
        levels: usize,
        from: Real,
        to: Real,
        #[serde(default)]
        transverse: Option<(Real, Real)>,
    },
    /// Random union of cells of the given measure, drawn with the run seed.
    Random {
        measure: f64,
    },
}

impl SetConfig {
    pub fn is_random(&self) -> bool {
        matches!(self, SetConfig::Random { .. })
    }
}

/// Cutoffs listed explicitly or as an evenly spaced grid.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum CutoffGrid {
    List(Vec<f64>),
    Range { from: f64, to: f64, points: usize },
}

impl<'de> Deserialize<'de> for CutoffGrid {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Range {
            from: f64,
            to: f64,
            points: usize,
        }
        let v = serde_json::Value::deserialize(d)?;
        if v.is_array() {
            return Vec::<f64>::deserialize(v)
                .map(CutoffGrid::List)
                .map_err(serde::de::Error::custom);
        }
        Range::deserialize(v)
            .map(|r| CutoffGrid::Range {
                from: r.from,
                to: r.to,
                points: r.points,
            })
            .map_err(|e| {
                serde::de::Error::custom(format!(
                    "expected a list of cutoffs or {{from, to, points}}: {e}"
                ))
            })
    }
}

impl CutoffGrid {
    pub fn values(&self) -> Vec<f64> {
        match *self {
            CutoffGrid::List(ref v) => v.clone(),
            CutoffGrid::Range { from, to, points } => match points {
                0 => Vec::new(),
                1 => vec![from],
                n => (0..n)
                    .map(|i| from + (to - from) * i as f64 / (n - 1) as f64)
                    .collect(),
            },
        }
    }
}

fn default_solver() -> Solver {
    Solver::Dense
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumParams {
    /// Leading modes to compute; all when absent.
    #[serde(default)]
    pub modes: Option<usize>,
    #[serde(default = "default_solver")]
    pub solver: Solver,
    /// Largest admissible `||K e - lambda^2 W e|| / ||e||`, relative to the
    /// largest stiffness entry.
    #[serde(default = "default_residual")]
    pub max_residual: f64,
    /// Compare frequencies with the continuum ones (constant scalar 1-D only).
    #[serde(default)]
    pub continuum: Option<ContinuumParams>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContinuumParams {
    /// Positive modes compared.
    pub modes: usize,
    /// Largest admissible `|lambda_k - lambda_k^cont| / lambda_k^cont`.
    pub tolerance: f64,
}

fn default_residual() -> f64 {
    1e-8
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepParams {
    pub norm: NormPair,
    pub cutoffs: CutoffGrid,
    #[serde(default = "default_r2")]
    pub min_r_squared: f64,
}

fn default_r2() -> f64 {
    0.9
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TelescopeParams {
    pub ratio: f64,
    pub steps: usize,
    #[serde(default = "one")]
    pub horizon: f64,
    /// Weight `D` in `e^{-D / gap}`.
    pub rate: f64,
    #[serde(default = "one")]
    pub b: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InterpParams {
    pub s: f64,
    pub t: f64,
    #[serde(default = "half")]
    pub eps: f64,
    pub samples: usize,
    #[serde(default = "default_mismatch")]
    pub max_mismatch: f64,
    #[serde(default)]
    pub telescope: Option<TelescopeParams>,
}

fn half() -> f64 {
    0.5
}

fn default_mismatch() -> f64 {
    0.01
}

/// Modal data on the controlled modes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldConfig {
    Zero,
    Mode {
        index: usize,
        #[serde(default = "one")]
        amplitude: f64,
    },
    /// Independent standard normal coefficients drawn with the run seed.
    Random,
    Coefficients {
        values: Vec<f64>,
    },
}

impl FieldConfig {
    pub fn is_random(&self) -> bool {
        matches!(self, FieldConfig::Random)
    }
}

fn zero_field() -> FieldConfig {
    FieldConfig::Zero
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlParams {
    pub modes: usize,
    #[serde(default = "one")]
    pub horizon: f64,
    pub ratio: f64,
    pub steps: usize,
    #[serde(default = "default_c_lambda")]
    pub c_lambda: f64,
    #[serde(default = "default_rank_tol")]
    pub rank_tol: f64,
    #[serde(default = "default_blind_tol")]
    pub blind_tol: f64,
    /// Weight `D` of the cost ledger.
    #[serde(default = "default_rate")]
    pub rate: f64,
    pub initial: FieldConfig,
    #[serde(default = "zero_field")]
    pub target: FieldConfig,
    /// Largest admissible relative terminal deficit.
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    /// Largest admissible share of the last ledger term in the total.
    #[serde(default = "default_tail")]
    pub ledger_tail: f64,
}

fn default_c_lambda() -> f64 {
    SynthesisOptions::default().c_lambda
}
fn default_rank_tol() -> f64 {
    SynthesisOptions::default().rank_tol
}
fn default_blind_tol() -> f64 {
    SynthesisOptions::default().blind_tol
}
fn default_rate() -> f64 {
    0.01
}
fn default_tolerance() -> f64 {
    1e-6
}
fn default_tail() -> f64 {
    1e-8
}

impl ControlParams {
    pub fn synthesis(&self) -> SynthesisOptions {
        SynthesisOptions {
            modes: self.modes,
            c_lambda: self.c_lambda,
            rank_tol: self.rank_tol,
            blind_tol: self.blind_tol,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChartParams {
    #[serde(default)]
    pub metric: MetricConfig,
    pub cutoff: Cutoff,
    pub half_width: f64,
    pub z_cells: usize,
    pub depth: f64,
    pub s_cells: usize,
    /// Grids, each twice as fine as the last.
    #[serde(default = "three")]
    pub refinements: usize,
}

fn three() -> usize {
    3
}

fn default_side() -> Interface {
    Interface::Right
}

fn default_waves() -> Vec<usize> {
    vec![1, 2, 3]
}

fn default_inclusion() -> usize {
    10
}

fn default_order() -> f64 {
    1.8
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DoubleParams {
    #[serde(default = "default_side")]
    pub side: Interface,
    /// Reflection rule; follows the boundary condition when absent.
    #[serde(default)]
    pub parity: Option<Parity>,
    /// Grids for the refinement study, each twice as fine as the last.
    #[serde(default = "three")]
    pub refinements: usize,
    /// Wavenumbers of the sampled eigenfunctions in the refinement study.
    #[serde(default = "default_waves")]
    pub wavenumbers: Vec<usize>,
    /// One-sided eigenvalues looked up in the doubled spectrum.
    #[serde(default = "default_inclusion")]
    pub inclusion: usize,
    #[serde(default = "default_order")]
    pub min_order: f64,
    #[serde(default)]
    pub chart: Option<ChartParams>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Experiment {
    Spectrum(SpectrumParams),
    ConstantSweep(SweepParams),
    InterpCheck(InterpParams),
    Control(ControlParams),
    DoubleCheck(DoubleParams),
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Spectrum(_) => "spectrum",
            Experiment::ConstantSweep(_) => "constant-sweep",
            Experiment::InterpCheck(_) => "interp-check",
            Experiment::Control(_) => "control",
            Experiment::DoubleCheck(_) => "double-check",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub domain: DomainConfig,
    #[serde(default)]
    pub coefficients: CoefficientConfig,
    #[serde(default)]
    pub set: Option<SetConfig>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Directory that relative paths in the config refer to.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

/// Parses and validates a config, reporting the path of any bad field.
pub fn parse(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: Result<ExperimentConfig, ConfigError> =
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            ConfigError::new(
                if path == "." { String::new() } else { path },
                e.into_inner().to_string(),
            )
        });
    let cfg = match cfg {
        Ok(c) => c,
        Err(e) if e.field == "experiment" => return Err(refine_experiment(text).unwrap_or(e)),
        Err(e) => return Err(e),
    };
    cfg.validate()?;
    Ok(cfg)
}

/// The tagged `experiment` section hides the path of a bad field; decoding
/// its body again as the chosen variant recovers it.
fn refine_experiment(text: &str) -> Option<ConfigError> {
    fn body<T: serde::de::DeserializeOwned>(v: &serde_json::Value) -> Option<ConfigError> {
        serde_path_to_error::deserialize::<_, T>(v).err().map(|e| {
            let path = e.path().to_string();
            let field = if path == "." {
                "experiment".to_string()
            } else {
                format!("experiment.{path}")
            };
            ConfigError::new(field, e.into_inner().to_string())
        })
    }
    let root: serde_json::Value = serde_json::from_str(text).ok()?;
    let mut map = root.get("experiment")?.as_object()?.clone();
    let kind = map.remove("kind")?;
    let v = serde_json::Value::Object(map);
    match kind.as_str()? {
        "spectrum" => body::<SpectrumParams>(&v),
        "constant-sweep" => body::<SweepParams>(&v),
        "interp-check" => body::<InterpParams>(&v),
        "control" => body::<ControlParams>(&v),
        "double-check" => body::<DoubleParams>(&v),
        _ => None,
    }
}

pub fn load(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::new("", format!("cannot read {}: {e}", path.display())))?;
    let mut cfg = parse(&text)?;
    cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok(cfg)
}

fn positive(field: &str, v: f64) -> Result<(), ConfigError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(ConfigError::new(
            field,
            format!("must be positive and finite, got {v}"),
        ))
    }
}

fn within(field: &str, v: f64, lo: f64, hi: f64) -> Result<(), ConfigError> {
    if v > lo && v < hi {
        Ok(())
    } else {
        Err(ConfigError::new(
            field,
            format!("must lie in ({lo}, {hi}), got {v}"),
        ))
    }
}

impl ExperimentConfig {
    /// Whether anything in the run draws random numbers.
    pub fn is_randomized(&self) -> bool {
        matches!(self.coefficients, CoefficientConfig::PiecewiseLinear { .. })
            || self.set.as_ref().is_some_and(SetConfig::is_random)
            || match &self.experiment {
                Experiment::InterpCheck(_) => true,
                Experiment::ConstantSweep(p) => p.norm == NormPair::L2L1,
                Experiment::Control(p) => p.initial.is_random() || p.target.is_random(),
                _ => false,
            }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let d = &self.domain;
        let dim = d.dim();
        if !(dim == 1 || dim == 2) {
            return Err(ConfigError::new(
                "domain.lengths",
                format!("need 1 or 2 axes, got {dim}"),
            ));
        }
        if d.cells.len() != dim {
            return Err(ConfigError::new(
                "domain.cells",
                format!("need {dim} entries to match the lengths"),
            ));
        }
        for (i, l) in d.lengths().iter().enumerate() {
            positive(&format!("domain.lengths[{i}]"), *l)?;
        }
        if let Some(i) = d.cells.iter().position(|&c| c < 2) {
            return Err(ConfigError::new(
                format!("domain.cells[{i}]"),
                "need at least 2 cells per axis",
            ));
        }
        match &self.coefficients {
            CoefficientConfig::Constant { kappa, .. } => positive("coefficients.kappa", *kappa)?,
            CoefficientConfig::PiecewiseLinear {
                lipschitz_metric,
                lipschitz_kappa,
            } => {
                for (f, v) in [
                    ("coefficients.lipschitz_metric", lipschitz_metric),
                    ("coefficients.lipschitz_kappa", lipschitz_kappa),
                ] {
                    if !(v.is_finite() && *v >= 0.0) {
                        return Err(ConfigError::new(
                            f,
                            format!("must be non-negative, got {v}"),
                        ));
                    }
                }
            }
            CoefficientConfig::Table { .. } => {}
        }
        if self.is_randomized() && self.seed.is_none() {
            return Err(ConfigError::new(
                "seed",
                "required because the run draws random data",
            ));
        }
        if let Some(set) = &self.set {
            self.validate_set(set)?;
        }
        let needs_set = !matches!(
            self.experiment,
            Experiment::Spectrum(_) | Experiment::DoubleCheck(_)
        );
        if needs_set && self.set.is_none() {
            return Err(ConfigError::new(
                "set",
                format!("required by the {} experiment", self.experiment.name()),
            ));
        }
        match &self.experiment {
            Experiment::Spectrum(p) => {
                if p.modes == Some(0) {
                    return Err(ConfigError::new("experiment.modes", "must be at least 1"));
                }
                if p.solver == Solver::Tridiagonal && dim != 1 {
                    return Err(ConfigError::new(
                        "experiment.solver",
                        "the tridiagonal solver handles 1-D domains only",
                    ));
                }
                positive("experiment.max_residual", p.max_residual)?;
                if let Some(c) = &p.continuum {
                    positive("experiment.continuum.tolerance", c.tolerance)?;
                    if dim != 1 {
                        return Err(ConfigError::new(
                            "experiment.continuum",
                            "continuum frequencies are known on intervals only",
                        ));
                    }
                }
            }
            Experiment::ConstantSweep(p) => {
                let c = p.cutoffs.values();
                if c.is_empty() {
                    return Err(ConfigError::new(
                        "experiment.cutoffs",
                        "need at least one cutoff",
                    ));
                }
                if let Some(i) = c.iter().position(|v| !(v.is_finite() && *v > 0.0)) {
                    return Err(ConfigError::new(
                        format!("experiment.cutoffs[{i}]"),
                        "cutoffs must be positive",
                    ));
                }
                if c.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(ConfigError::new(
                        "experiment.cutoffs",
                        "must be strictly ascending",
                    ));
                }
                if p.norm == NormPair::L2L2 || p.norm == NormPair::L2L1 {
                    if let Some(SetConfig::Points { .. } | SetConfig::Cantor { .. }) = self.set {
                        return Err(ConfigError::new(
                            "experiment.norm",
                            "L2 and L1 constants need a cell set",
                        ));
                    }
                }
            }
            Experiment::InterpCheck(p) => {
                if !(p.s >= 0.0 && p.t > p.s && p.t.is_finite()) {
                    return Err(ConfigError::new(
                        "experiment.t",
                        format!("need 0 <= s < t, got s = {}, t = {}", p.s, p.t),
                    ));
                }
                within("experiment.eps", p.eps, 0.0, 1.0)?;
                if p.samples == 0 {
                    return Err(ConfigError::new("experiment.samples", "must be at least 1"));
                }
                positive("experiment.max_mismatch", p.max_mismatch)?;
                if let Some(t) = &p.telescope {
                    within("experiment.telescope.ratio", t.ratio, 0.0, 1.0)?;
                    if t.steps < 2 {
                        return Err(ConfigError::new(
                            "experiment.telescope.steps",
                            "must be at least 2",
                        ));
                    }
                    positive("experiment.telescope.horizon", t.horizon)?;
                    if !(t.rate >= 0.0 && t.rate.is_finite()) {
                        return Err(ConfigError::new(
                            "experiment.telescope.rate",
                            "must be non-negative",
                        ));
                    }
                    if !(t.b >= 1.0) {
                        return Err(ConfigError::new(
                            "experiment.telescope.b",
                            "must be at least 1",
                        ));
                    }
                }
            }
            Experiment::Control(p) => {
                if p.modes == 0 {
                    return Err(ConfigError::new("experiment.modes", "must be at least 1"));
                }
                positive("experiment.horizon", p.horizon)?;
                within("experiment.ratio", p.ratio, 0.0, 1.0)?;
                if p.steps < 2 {
                    return Err(ConfigError::new("experiment.steps", "must be at least 2"));
                }
                positive("experiment.c_lambda", p.c_lambda)?;
                positive("experiment.tolerance", p.tolerance)?;
                positive("experiment.ledger_tail", p.ledger_tail)?;
                if !(p.rate >= 0.0 && p.rate.is_finite()) {
                    return Err(ConfigError::new("experiment.rate", "must be non-negative"));
                }
                for (f, v) in [
                    ("experiment.initial", &p.initial),
                    ("experiment.target", &p.target),
                ] {
                    match v {
                        FieldConfig::Mode { index, .. } if *index >= p.modes => {
                            return Err(ConfigError::new(
                                format!("{f}.index"),
                                format!("must be below modes = {}", p.modes),
                            ));
                        }
                        FieldConfig::Coefficients { values } if values.len() > p.modes => {
                            return Err(ConfigError::new(
                                format!("{f}.values"),
                                format!("at most {} coefficients", p.modes),
                            ));
                        }
                        _ => {}
                    }
                }
            }
            Experiment::DoubleCheck(p) => {
                if p.refinements < 1 {
                    return Err(ConfigError::new(
                        "experiment.refinements",
                        "must be at least 1",
                    ));
                }
                if p.wavenumbers.contains(&0) {
                    return Err(ConfigError::new(
                        "experiment.wavenumbers",
                        "wavenumbers start at 1",
                    ));
                }
                if let Some(c) = &p.chart {
                    positive("experiment.chart.half_width", c.half_width)?;
                    positive("experiment.chart.depth", c.depth)?;
                    if c.refinements < 1 {
                        return Err(ConfigError::new(
                            "experiment.chart.refinements",
                            "must be at least 1",
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    fn validate_set(&self, set: &SetConfig) -> Result<(), ConfigError> {
        let dim = self.domain.dim();
        let lengths = self.domain.lengths();
        match set {
            SetConfig::Whole => {}
            SetConfig::Box { lo, hi } => {
                if lo.len() > dim || hi.len() > dim {
                    return Err(ConfigError::new(
                        "set.lo",
                        format!("at most {dim} coordinates"),
                    ));
                }
                if lo.iter().zip(hi).any(|(a, b)| !(b.0 > a.0)) {
                    return Err(ConfigError::new(
                        "set.hi",
                        "must exceed lo in every coordinate",
                    ));
                }
            }
            SetConfig::Cells { cells } => {
                if cells.is_empty() {
                    return Err(ConfigError::new("set.cells", "empty cell list"));
                }
            }
            SetConfig::Points { points } => {
                if points.is_empty() {
                    return Err(ConfigError::new("set.points", "empty point list"));
                }
                if let Some(i) = points.iter().position(|p| p.len() != dim) {
                    return Err(ConfigError::new(
                        format!("set.points[{i}]"),
                        format!("need {dim} coordinates"),
                    ));
                }
            }
            SetConfig::Cantor {
                ratio,
                levels,
                from,
                to,
                transverse,
            } => {
                within("set.ratio", *ratio, 0.0, 0.5)?;
                if !(1..=20).contains(levels) {
                    return Err(ConfigError::new("set.levels", "must lie in 1..=20"));
                }
                if !(to.0 > from.0) || from.0 < 0.0 || to.0 > lengths[0] {
                    return Err(ConfigError::new(
                        "set.to",
                        format!("need 0 <= from < to <= {}", lengths[0]),
                    ));
                }
                if transverse.is_some() != (dim == 2) {
                    return Err(ConfigError::new(
                        "set.transverse",
                        "required in 2-D and not allowed in 1-D",
                    ));
                }
            }
            SetConfig::Random { measure } => {
                let vol: f64 = lengths.iter().product();
                if !(*measure > 0.0 && *measure <= vol) {
                    return Err(ConfigError::new(
                        "set.measure",
                        format!("must lie in (0, {vol}]"),
                    ));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pi_multiples() {
        let pi = std::f64::consts::PI;
        for (s, v) in [
            ("pi", pi),
            ("pi/2", pi / 2.0),
            ("2pi", 2.0 * pi),
            ("0.5*pi", 0.5 * pi),
            ("3*pi/4", 0.75 * pi),
            ("1.25", 1.25),
        ] {
            assert_eq!(parse_real(s), Some(v), "{s}");
        }
        for s in ["p", "pi/", "x*pi", "pi*2"] {
            assert_eq!(parse_real(s), None, "{s}");
        }
    }

    #[test]
    fn cutoff_ranges() {
        assert_eq!(
            CutoffGrid::Range {
                from: 1.0,
                to: 2.0,
                points: 3
            }
            .values(),
            vec![1.0, 1.5, 2.0]
        );
        assert_eq!(
            CutoffGrid::Range {
                from: 1.0,
                to: 2.0,
                points: 1
            }
            .values(),
            vec![1.0]
        );
    }
}
