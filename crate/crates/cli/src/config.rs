use std::fmt;
use std::path::PathBuf;

use deadcore::grid::Grid;
use deadcore::lab::LiouvilleFamily;
use deadcore::ops::{OperatorKind, OperatorSpec};
use deadcore::system::{SystemMethod, SystemOptions, ZeroPowerConvention};
use serde::{Deserialize, Serialize};
use thiserror::Error;
use toml_edit::{DocumentMut, Item, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    #[default]
    Solve,
    Radial,
    FitExponent,
    Measure,
    Compare,
    Flatten,
    Liouville,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Solve => "solve",
            Experiment::Radial => "radial",
            Experiment::FitExponent => "fit-exponent",
            Experiment::Measure => "measure",
            Experiment::Compare => "compare",
            Experiment::Flatten => "flatten",
            Experiment::Liouville => "liouville",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("{}unknown key `{key}`", at(*.line))]
    UnknownKey { key: String, line: Option<usize> },
    #[error("{}missing key `{key}`", at(*.line))]
    MissingKey { key: String, line: Option<usize> },
    #[error("{}`{key}` violates {invariant}: {detail}", at(*.line))]
    ConstraintViolation {
        key: String,
        invariant: String,
        detail: String,
        line: Option<usize>,
    },
    #[error("{}invalid value for `{key}`: {message}", at(*.line))]
    InvalidValue {
        key: String,
        message: String,
        line: Option<usize>,
    },
    #[error("{}syntax error: {message}", at(*.line))]
    Syntax { message: String, line: Option<usize> },
    #[error("override `{0}` is not of the form key=value")]
    BadOverride(String),
}

fn at(line: Option<usize>) -> String {
    line.map(|l| format!("line {l}: ")).unwrap_or_default()
}

impl ConfigError {
    pub fn code(&self) -> &'static str {
        match self {
            ConfigError::UnknownKey { .. } => "UnknownKey",
            ConfigError::MissingKey { .. } => "MissingKey",
            ConfigError::ConstraintViolation { .. } => "ConstraintViolation",
            ConfigError::InvalidValue { .. } => "InvalidValue",
            ConfigError::Syntax { .. } => "Syntax",
            ConfigError::BadOverride(_) => "BadOverride",
        }
    }

    pub fn key(&self) -> Option<&str> {
        match self {
            ConfigError::UnknownKey { key, .. }
            | ConfigError::MissingKey { key, .. }
            | ConfigError::ConstraintViolation { key, .. }
            | ConfigError::InvalidValue { key, .. } => Some(key),
            _ => None,
        }
    }

    pub fn line(&self) -> Option<usize> {
        match self {
            ConfigError::UnknownKey { line, .. }
            | ConfigError::MissingKey { line, .. }
            | ConfigError::ConstraintViolation { line, .. }
            | ConfigError::InvalidValue { line, .. }
            | ConfigError::Syntax { line, .. } => *line,
            ConfigError::BadOverride(_) => None,
        }
    }
}

fn violation(key: &str, invariant: &str, detail: impl Into<String>) -> ConfigError {
    ConfigError::ConstraintViolation {
        key: key.to_owned(),
        invariant: invariant.to_owned(),
        detail: detail.into(),
        line: None,
    }
}

fn one() -> f64 {
    1.0
}
fn one_usize() -> usize {
    1
}
fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(skip)]
    pub experiment: Experiment,
    #[serde(default)]
    pub seed: u64,
    pub problem: ProblemConfig,
    #[serde(default)]
    pub operators: OperatorsConfig,
    #[serde(default)]
    pub boundary: BoundaryConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub regions: RegionsConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub radial: RadialConfig,
    #[serde(default)]
    pub fit_exponent: FitConfig,
    #[serde(default)]
    pub measure: MeasureConfig,
    #[serde(default)]
    pub compare: CompareConfig,
    #[serde(default)]
    pub flatten: FlattenConfig,
    #[serde(default)]
    pub liouville: LiouvilleConfig,
}

/// A single count for every axis, or one per axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NodeCount {
    Uniform(usize),
    PerAxis(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    #[serde(default = "one_usize")]
    pub dim: usize,
    pub nodes: NodeCount,
    /// Lower domain corner, `−1` on every axis by default.
    pub lower: Option<Vec<f64>>,
    pub upper: Option<Vec<f64>>,
    pub p: f64,
    pub q: f64,
    #[serde(default)]
    pub zero_power: ZeroPowerConvention,
    #[serde(default = "one")]
    pub c_u: f64,
    #[serde(default = "one")]
    pub c_v: f64,
}

impl ProblemConfig {
    pub fn corners(&self) -> (Vec<f64>, Vec<f64>) {
        (
            self.lower.clone().unwrap_or_else(|| vec![-1.0; self.dim]),
            self.upper.clone().unwrap_or_else(|| vec![1.0; self.dim]),
        )
    }

    pub fn node_counts(&self) -> Vec<usize> {
        match &self.nodes {
            NodeCount::Uniform(n) => vec![*n; self.dim],
            NodeCount::PerAxis(v) => v.clone(),
        }
    }

    pub fn grid(&self) -> Result<Grid, deadcore::grid::GridError> {
        let (lo, hi) = self.corners();
        Grid::new(&lo, &hi, &self.node_counts())
    }

    /// Centre of the domain box.
    pub fn center(&self) -> Vec<f64> {
        let (lo, hi) = self.corners();
        lo.iter().zip(&hi).map(|(a, b)| 0.5 * (a + b)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorConfig {
    pub kind: OperatorKind,
    #[serde(default = "one")]
    pub lambda: f64,
    #[serde(default = "one")]
    pub big_lambda: f64,
    /// Wide-stencil direction count for 2D Pucci operators.
    pub directions: Option<usize>,
    /// Constant per-axis coefficients of a diagonal operator.
    pub coefficients: Option<Vec<f64>>,
}

impl Default for OperatorConfig {
    fn default() -> Self {
        OperatorConfig {
            kind: OperatorKind::Laplacian,
            lambda: 1.0,
            big_lambda: 1.0,
            directions: None,
            coefficients: None,
        }
    }
}

impl OperatorConfig {
    pub fn build(&self, grid: &Grid) -> Result<OperatorSpec, deadcore::ops::OpError> {
        let op = match self.kind {
            OperatorKind::Laplacian => OperatorSpec::laplacian(),
            OperatorKind::PucciMinus => OperatorSpec::pucci_minus(self.lambda, self.big_lambda)?,
            OperatorKind::PucciPlus => OperatorSpec::pucci_plus(self.lambda, self.big_lambda)?,
            OperatorKind::DiagonalCoeff => {
                let a = self.coefficients.clone().unwrap_or_else(|| vec![self.lambda; grid.dim()]);
                OperatorSpec::diagonal(*grid, self.lambda, self.big_lambda, |_, axis| a[axis])?
            }
        };
        match self.directions {
            Some(k) => op.with_directions(k),
            None => Ok(op),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorsConfig {
    #[serde(default)]
    pub f: OperatorConfig,
    #[serde(default)]
    pub g: OperatorConfig,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BoundaryConfig {
    #[default]
    Zero,
    Constant { u: f64, v: f64 },
    /// Traces of the radial pair `(A·(|x−c|−ρ)₊^α, B·(|x−c|−ρ)₊^β)`,
    /// multiplied by `scale`.
    Radial {
        #[serde(default)]
        rho: f64,
        center: Option<Vec<f64>>,
        #[serde(default = "one")]
        ellipticity: f64,
        #[serde(default = "one")]
        scale: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub tol: Option<f64>,
    #[serde(default = "default_max_outer")]
    pub max_outer: usize,
    #[serde(default)]
    pub method: SystemMethod,
    #[serde(default = "one")]
    pub damping: f64,
    pub clamp: Option<bool>,
    #[serde(default = "yes")]
    pub symmetric_reduction: bool,
    #[serde(default = "yes")]
    pub nested: bool,
}

fn default_max_outer() -> usize {
    500
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tol: None,
            max_outer: default_max_outer(),
            method: SystemMethod::Newton,
            damping: 1.0,
            clamp: None,
            symmetric_reduction: true,
            nested: true,
        }
    }
}

impl SolverConfig {
    pub fn options(&self) -> SystemOptions {
        SystemOptions {
            tol: self.tol,
            max_outer: self.max_outer,
            method: self.method,
            damping: self.damping,
            clamp: self.clamp,
            symmetric_reduction: self.symmetric_reduction,
            nested: self.nested,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionsConfig {
    /// Dead-core threshold on the magnitude; noise-based default.
    pub threshold: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: PathBuf::from("deadcore-out"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadialConfig {
    #[serde(default)]
    pub rho: f64,
    pub center: Option<Vec<f64>>,
    /// `E` in the constant equations; `Λ` of `operators.f` by default.
    pub ellipticity: Option<f64>,
    /// Seeded draws for the constant-identity self-check.
    #[serde(default = "default_samples")]
    pub samples: usize,
}

fn default_samples() -> usize {
    1000
}

impl Default for RadialConfig {
    fn default() -> Self {
        RadialConfig {
            rho: 0.0,
            center: None,
            ellipticity: None,
            samples: default_samples(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    /// Free-boundary point; the detected node nearest to `near` by default.
    pub center: Option<Vec<f64>>,
    /// Defaults to the domain centre.
    pub near: Option<Vec<f64>>,
    /// `8h` by default.
    pub r_min: Option<f64>,
    /// Half the distance from the centre to the boundary by default.
    pub r_max: Option<f64>,
    #[serde(default = "default_levels")]
    pub levels: usize,
}

fn default_levels() -> usize {
    12
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            center: None,
            near: None,
            r_min: None,
            r_max: None,
            levels: default_levels(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureConfig {
    /// `[8h, 16h, 32h]` by default.
    pub radii: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BarrierRole {
    /// `E = Λ` of `operators.f`.
    #[default]
    Super,
    /// `E = λ` of `operators.f`.
    Sub,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PairSource {
    /// Solution of the configured problem, optionally with other boundary data.
    Solve { boundary: Option<BoundaryConfig> },
    /// The sampled radial barrier pair.
    Barrier {
        #[serde(default)]
        role: BarrierRole,
        #[serde(default)]
        rho: f64,
        center: Option<Vec<f64>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareConfig {
    #[serde(default = "default_sup")]
    pub sup: PairSource,
    #[serde(default = "default_sub")]
    pub sub: PairSource,
}

fn default_sup() -> PairSource {
    PairSource::Barrier {
        role: BarrierRole::Super,
        rho: 0.0,
        center: None,
    }
}

fn default_sub() -> PairSource {
    PairSource::Solve { boundary: None }
}

impl Default for CompareConfig {
    fn default() -> Self {
        CompareConfig {
            sup: default_sup(),
            sub: default_sub(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlattenConfig {
    #[serde(default = "default_deltas")]
    pub deltas: Vec<f64>,
    #[serde(default = "one")]
    pub gamma_c: f64,
    /// Dead-core radius of the radial traces used as boundary data.
    #[serde(default = "default_flatten_rho")]
    pub rho: f64,
    /// Peak of the rescaled traces, at most 1.
    #[serde(default = "one")]
    pub peak: f64,
}

fn default_deltas() -> Vec<f64> {
    vec![1.0, 0.5, 0.25, 0.125]
}

fn default_flatten_rho() -> f64 {
    0.3
}

impl Default for FlattenConfig {
    fn default() -> Self {
        FlattenConfig {
            deltas: default_deltas(),
            gamma_c: 1.0,
            rho: default_flatten_rho(),
            peak: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LiouvilleConfig {
    #[serde(default = "default_liouville_radii")]
    pub radii: Vec<f64>,
    #[serde(default = "default_window")]
    pub window: f64,
    #[serde(default = "default_family")]
    pub family: LiouvilleFamily,
}

fn default_liouville_radii() -> Vec<f64> {
    vec![1.0, 2.0, 4.0, 8.0]
}

fn default_window() -> f64 {
    0.75
}

fn default_family() -> LiouvilleFamily {
    LiouvilleFamily::Threshold { theta: 0.5 }
}

impl Default for LiouvilleConfig {
    fn default() -> Self {
        LiouvilleConfig {
            radii: default_liouville_radii(),
            window: default_window(),
            family: default_family(),
        }
    }
}

fn finite(key: &str, x: f64) -> Result<(), ConfigError> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(violation(key, "finiteness", format!("got {x}")))
    }
}

fn positive(key: &str, x: f64) -> Result<(), ConfigError> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(violation(key, &format!("{key} > 0"), format!("got {x}")))
    }
}

fn nonnegative(key: &str, x: f64) -> Result<(), ConfigError> {
    if x >= 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(violation(key, &format!("{key} ≥ 0"), format!("got {x}")))
    }
}

fn point(key: &str, x: &Option<Vec<f64>>, dim: usize) -> Result<(), ConfigError> {
    if let Some(x) = x {
        if x.len() != dim {
            return Err(violation(key, "one coordinate per axis", format!("dim = {dim}, got {}", x.len())));
        }
        for v in x {
            finite(key, *v)?;
        }
    }
    Ok(())
}

fn radii_list(key: &str, radii: &[f64]) -> Result<(), ConfigError> {
    if radii.is_empty() {
        return Err(violation(key, "non-empty list", "got []"));
    }
    for r in radii {
        positive(key, *r)?;
    }
    Ok(())
}

impl BoundaryConfig {
    fn validate(&self, key: &str, dim: usize) -> Result<(), ConfigError> {
        match self {
            BoundaryConfig::Zero => Ok(()),
            BoundaryConfig::Constant { u, v } => {
                finite(&format!("{key}.u"), *u)?;
                finite(&format!("{key}.v"), *v)
            }
            BoundaryConfig::Radial {
                rho,
                center,
                ellipticity,
                scale,
            } => {
                nonnegative(&format!("{key}.rho"), *rho)?;
                point(&format!("{key}.center"), center, dim)?;
                positive(&format!("{key}.ellipticity"), *ellipticity)?;
                nonnegative(&format!("{key}.scale"), *scale)
            }
        }
    }
}

impl OperatorConfig {
    fn validate(&self, key: &str, dim: usize) -> Result<(), ConfigError> {
        positive(&format!("{key}.lambda"), self.lambda)?;
        if !(self.lambda <= self.big_lambda) || !self.big_lambda.is_finite() {
            return Err(violation(
                &format!("{key}.lambda"),
                "λ ≤ Λ",
                format!("λ = {}, Λ = {}", self.lambda, self.big_lambda),
            ));
        }
        if let Some(k) = self.directions {
            if k == 0 || k % 4 != 0 {
                return Err(violation(
                    &format!("{key}.directions"),
                    "positive multiple of 4",
                    format!("got {k}"),
                ));
            }
        }
        if let Some(a) = &self.coefficients {
            let ck = format!("{key}.coefficients");
            if self.kind != OperatorKind::DiagonalCoeff {
                return Err(violation(&ck, "coefficients only for diagonal_coeff", format!("kind = {}", self.kind)));
            }
            if a.len() != dim {
                return Err(violation(&ck, "one coefficient per axis", format!("dim = {dim}, got {}", a.len())));
            }
            if let Some(x) = a.iter().find(|x| !(**x >= self.lambda && **x <= self.big_lambda)) {
                return Err(violation(&ck, "λ ≤ a ≤ Λ", format!("got {x}")));
            }
        }
        Ok(())
    }
}

impl PairSource {
    fn validate(&self, key: &str, dim: usize) -> Result<(), ConfigError> {
        match self {
            PairSource::Solve { boundary } => match boundary {
                Some(b) => b.validate(&format!("{key}.boundary"), dim),
                None => Ok(()),
            },
            PairSource::Barrier { rho, center, .. } => {
                nonnegative(&format!("{key}.rho"), *rho)?;
                point(&format!("{key}.center"), center, dim)
            }
        }
    }
}

impl RunConfig {
    /// First violated invariant, keyed by its dotted path.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let pr = &self.problem;
        if !(1..=2).contains(&pr.dim) {
            return Err(violation("problem.dim", "dim ∈ {1, 2}", format!("got {}", pr.dim)));
        }
        let counts = pr.node_counts();
        if counts.len() != pr.dim {
            return Err(violation("problem.nodes", "one count per axis", format!("dim = {}, got {}", pr.dim, counts.len())));
        }
        if let Some(n) = counts.iter().find(|&&n| n < 3) {
            return Err(violation("problem.nodes", "nodes ≥ 3", format!("got {n}")));
        }
        point("problem.lower", &pr.lower, pr.dim)?;
        point("problem.upper", &pr.upper, pr.dim)?;
        let (lo, hi) = pr.corners();
        if let Some(a) = (0..pr.dim).find(|&a| !(lo[a] < hi[a])) {
            return Err(violation("problem.lower", "lower < upper", format!("axis {a}: {} vs {}", lo[a], hi[a])));
        }
        nonnegative("problem.p", pr.p)?;
        nonnegative("problem.q", pr.q)?;
        if !(pr.p * pr.q < 1.0) {
            return Err(violation("problem.q", "pq < 1", format!("p = {}, q = {}", pr.p, pr.q)));
        }
        nonnegative("problem.c_u", pr.c_u)?;
        nonnegative("problem.c_v", pr.c_v)?;
        pr.grid()
            .map_err(|e| violation("problem.nodes", "equal spacing on every axis", e.to_string()))?;

        self.operators.f.validate("operators.f", pr.dim)?;
        self.operators.g.validate("operators.g", pr.dim)?;
        self.boundary.validate("boundary", pr.dim)?;

        let s = &self.solver;
        if let Some(t) = s.tol {
            positive("solver.tol", t)?;
        }
        if s.max_outer == 0 {
            return Err(violation("solver.max_outer", "max_outer ≥ 1", "got 0"));
        }
        if !(s.damping > 0.0 && s.damping <= 1.0) {
            return Err(violation("solver.damping", "0 < damping ≤ 1", format!("got {}", s.damping)));
        }
        if let Some(t) = self.regions.threshold {
            positive("regions.threshold", t)?;
        }

        let r = &self.radial;
        nonnegative("radial.rho", r.rho)?;
        point("radial.center", &r.center, pr.dim)?;
        if let Some(e) = r.ellipticity {
            positive("radial.ellipticity", e)?;
        }

        let fit = &self.fit_exponent;
        point("fit_exponent.center", &fit.center, pr.dim)?;
        point("fit_exponent.near", &fit.near, pr.dim)?;
        if let Some(x) = fit.r_min {
            positive("fit_exponent.r_min", x)?;
        }
        if let Some(x) = fit.r_max {
            positive("fit_exponent.r_max", x)?;
        }
        if let (Some(a), Some(b)) = (fit.r_min, fit.r_max) {
            if a >= b {
                return Err(violation("fit_exponent.r_min", "r_min < r_max", format!("{a} vs {b}")));
            }
        }
        if fit.levels < 2 {
            return Err(violation("fit_exponent.levels", "levels ≥ 2", format!("got {}", fit.levels)));
        }

        if let Some(radii) = &self.measure.radii {
            radii_list("measure.radii", radii)?;
        }

        self.compare.sup.validate("compare.sup", pr.dim)?;
        self.compare.sub.validate("compare.sub", pr.dim)?;

        let fl = &self.flatten;
        if fl.deltas.is_empty() {
            return Err(violation("flatten.deltas", "non-empty list", "got []"));
        }
        for d in &fl.deltas {
            nonnegative("flatten.deltas", *d)?;
        }
        nonnegative("flatten.gamma_c", fl.gamma_c)?;
        nonnegative("flatten.rho", fl.rho)?;
        if !(fl.peak >= 0.0 && fl.peak <= 1.0) {
            return Err(violation("flatten.peak", "0 ≤ peak ≤ 1", format!("got {}", fl.peak)));
        }

        let lv = &self.liouville;
        radii_list("liouville.radii", &lv.radii)?;
        if lv.radii.windows(2).any(|w| w[1] <= w[0]) {
            return Err(violation("liouville.radii", "strictly increasing radii", format!("{:?}", lv.radii)));
        }
        positive("liouville.window", lv.window)?;
        if lv.window >= lv.radii[0] {
            return Err(violation(
                "liouville.window",
                "window < smallest radius",
                format!("{} vs {}", lv.window, lv.radii[0]),
            ));
        }
        if let LiouvilleFamily::Threshold { theta } = lv.family {
            nonnegative("liouville.family.theta", theta)?;
        }
        if self.experiment == Experiment::Liouville && !matches!(pr.nodes, NodeCount::Uniform(_)) {
            return Err(violation("problem.nodes", "a single node count for liouville", "got a per-axis list"));
        }
        Ok(())
    }
}

/// Parse, apply `key=value` overrides (they win over the file), and validate.
pub fn parse_config(text: &str, experiment: Experiment, overrides: &[String]) -> Result<RunConfig, ConfigError> {
    let text = apply_overrides(text, overrides)?;
    let de = toml::Deserializer::parse(&text).map_err(|e| ConfigError::Syntax {
        message: e.message().to_owned(),
        line: e.span().map(|s| line_at(&text, s.start)),
    })?;
    let mut cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| classify(&text, e))?;
    cfg.experiment = experiment;
    cfg.validate().map_err(|e| match e {
        ConfigError::ConstraintViolation {
            key,
            invariant,
            detail,
            ..
        } => {
            let line = line_of(&text, &key);
            ConfigError::ConstraintViolation {
                key,
                invariant,
                detail,
                line,
            }
        }
        other => other,
    })?;
    Ok(cfg)
}

fn classify(text: &str, e: serde_path_to_error::Error<toml::de::Error>) -> ConfigError {
    let path = e.path().to_string();
    let inner = e.inner();
    let msg = inner.message().to_owned();
    let line = inner.span().map(|s| line_at(text, s.start));
    let join = |name: &str| {
        if path == "." || path.is_empty() {
            name.to_owned()
        } else if path.ends_with(name) {
            path.clone()
        } else {
            format!("{path}.{name}")
        }
    };
    if let Some(name) = backticked(&msg, "unknown field `") {
        ConfigError::UnknownKey { key: join(name), line }
    } else if let Some(name) = backticked(&msg, "missing field `") {
        ConfigError::MissingKey { key: join(name), line }
    } else {
        ConfigError::InvalidValue {
            key: path,
            message: msg,
            line,
        }
    }
}

fn backticked<'a>(msg: &'a str, prefix: &str) -> Option<&'a str> {
    let rest = &msg[msg.find(prefix)? + prefix.len()..];
    Some(&rest[..rest.find('`')?])
}

fn line_at(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Line of the deepest existing key on a dotted path.
fn line_of(text: &str, path: &str) -> Option<usize> {
    let doc = toml_edit::Document::parse(text).ok()?;
    let mut table: &dyn toml_edit::TableLike = doc.as_table();
    let mut line = None;
    for seg in path.split('.') {
        let Some((key, item)) = table.get_key_value(seg) else {
            break;
        };
        if let Some(span) = key.span() {
            line = Some(line_at(text, span.start));
        }
        match item.as_table_like() {
            Some(t) => table = t,
            None => break,
        }
    }
    line
}

fn apply_overrides(text: &str, overrides: &[String]) -> Result<String, ConfigError> {
    if overrides.is_empty() {
        return Ok(text.to_owned());
    }
    let mut doc: DocumentMut = text.parse().map_err(|e: toml_edit::TomlError| ConfigError::Syntax {
        message: e.message().to_owned(),
        line: e.span().map(|s| line_at(text, s.start)),
    })?;
    for o in overrides {
        let (key, raw) = o.split_once('=').ok_or_else(|| ConfigError::BadOverride(o.clone()))?;
        let segs: Vec<&str> = key.trim().split('.').map(str::trim).collect();
        if segs.iter().any(|s| s.is_empty()) {
            return Err(ConfigError::BadOverride(o.clone()));
        }
        let raw = raw.trim();
        let value: Value = raw.parse().unwrap_or_else(|_| Value::from(raw));
        let mut item: &mut Item = doc.as_item_mut();
        for seg in &segs[..segs.len() - 1] {
            let t = item
                .as_table_like_mut()
                .ok_or_else(|| ConfigError::BadOverride(o.clone()))?;
            if t.get(seg).is_none() {
                t.insert(seg, toml_edit::table());
            }
            item = t.get_mut(seg).expect("just inserted");
        }
        let t = item
            .as_table_like_mut()
            .ok_or_else(|| ConfigError::BadOverride(o.clone()))?;
        t.insert(segs[segs.len() - 1], Item::Value(value));
    }
    Ok(doc.to_string())
}
