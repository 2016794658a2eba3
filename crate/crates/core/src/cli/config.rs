use std::f64::consts::{PI, TAU};
use std::path::PathBuf;

use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::Value;
use thiserror::Error;

use crate::analytic::{CoherentPhase, PhaseConvention, SqueezedVariant};
use crate::oracle::Dynamics;
use crate::qcore::Dim;

/// Optical angular frequency used when a scenario does not name one, rad/s.
pub const OPTICAL_OMEGA0: f64 = 1.77e15;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("scenario `{scenario}`: field `{field}`: {reason}")]
    Validation {
        scenario: String,
        field: String,
        reason: String,
    },
}

fn invalid(scenario: &str, field: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Validation {
        scenario: scenario.to_string(),
        field: field.to_string(),
        reason: reason.into(),
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ConventionArg {
    #[default]
    Corrected,
    Printed,
}

impl From<ConventionArg> for PhaseConvention {
    fn from(c: ConventionArg) -> Self {
        match c {
            ConventionArg::Corrected => PhaseConvention::OracleCorrected,
            ConventionArg::Printed => PhaseConvention::PaperPrinted,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum FrameArg {
    #[default]
    Rotating,
    Lab,
}

/// Selects between the exact closed forms and the published approximations
/// for the coherent and squeezed waves.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum VariantArg {
    #[default]
    Exact,
    Paper,
}

impl From<VariantArg> for SqueezedVariant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Exact => SqueezedVariant::ExactIdentity,
            VariantArg::Paper => SqueezedVariant::PaperApprox,
        }
    }
}

impl From<VariantArg> for CoherentPhase {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Exact => CoherentPhase::Exact,
            VariantArg::Paper => CoherentPhase::PaperPrinted,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DynamicsArg {
    #[default]
    Displacement,
    Full,
}

impl From<DynamicsArg> for Dynamics {
    fn from(d: DynamicsArg) -> Self {
        match d {
            DynamicsArg::Displacement => Dynamics::DisplacementOnly,
            DynamicsArg::Full => Dynamics::Full,
        }
    }
}

/// Evenly spaced samples from `start` to `end` inclusive.
#[derive(Clone, Copy, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeGrid {
    pub start: f64,
    pub end: f64,
    pub samples: usize,
}

impl TimeGrid {
    pub fn new(start: f64, end: f64, samples: usize) -> Self {
        TimeGrid {
            start,
            end,
            samples,
        }
    }

    pub fn points(&self) -> Vec<f64> {
        let span = self.end - self.start;
        let last = (self.samples - 1) as f64;
        (0..self.samples)
            .map(|i| {
                if i + 1 == self.samples {
                    self.end
                } else {
                    self.start + span * i as f64 / last
                }
            })
            .collect()
    }

    fn validate(&self, scenario: &str) -> Result<(), ConfigError> {
        if self.samples < 2 {
            return Err(invalid(scenario, "time_grid.samples", "need at least 2 samples"));
        }
        if !(self.start.is_finite() && self.start >= 0.0) {
            return Err(invalid(scenario, "time_grid.start", "must be finite and ≥ 0"));
        }
        if !(self.end.is_finite() && self.end > self.start) {
            return Err(invalid(scenario, "time_grid.end", "must be finite and > start"));
        }
        Ok(())
    }
}

/// Vacuum gravitational background; the grid runs over the Kerr phase `F`.
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "camelCase")]
pub struct VacuumParams {
    pub alpha: f64,
    #[serde(rename = "D")]
    pub d: f64,
    pub ln_ratio: f64,
    pub convention: ConventionArg,
    /// Maps `F` to time through `t = F E_pl / ω0²`.
    pub omega0: f64,
}

impl Default for VacuumParams {
    fn default() -> Self {
        VacuumParams {
            alpha: 1.0,
            d: 1.0,
            ln_ratio: crate::params::DEFAULT_LN_CUTOFF_RATIO,
            convention: ConventionArg::Corrected,
            omega0: OPTICAL_OMEGA0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "camelCase")]
pub struct CoherentParams {
    pub alpha: f64,
    pub q: f64,
    pub lambda: f64,
    pub omega: f64,
    pub optical_dim: i64,
    pub gw_dim: i64,
    pub variant: VariantArg,
    pub dynamics: DynamicsArg,
    pub tolerance: f64,
}

impl Default for CoherentParams {
    fn default() -> Self {
        CoherentParams {
            alpha: 1.0,
            q: 0.02,
            lambda: 5.0,
            omega: 1.0,
            optical_dim: 24,
            gw_dim: 64,
            variant: VariantArg::Exact,
            dynamics: DynamicsArg::Displacement,
            tolerance: 1e-5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "camelCase")]
pub struct SqueezedParams {
    pub alpha: f64,
    pub q: f64,
    pub xi0: f64,
    pub omega: f64,
    pub optical_dim: i64,
    pub gw_dim: i64,
    pub variant: VariantArg,
    pub dynamics: DynamicsArg,
    pub tolerance: f64,
}

impl Default for SqueezedParams {
    fn default() -> Self {
        SqueezedParams {
            alpha: 1.0,
            q: 0.05,
            xi0: 1.0,
            omega: 1.0,
            optical_dim: 24,
            gw_dim: 48,
            variant: VariantArg::Exact,
            dynamics: DynamicsArg::Displacement,
            tolerance: 1e-4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "camelCase")]
pub struct ThermalParams {
    /// Gravitational angular frequency, rad/s.
    pub omega: f64,
    /// Kelvin.
    pub temperature: f64,
    pub omega0: f64,
    /// Defaults to the largest allowed coupling `ω0/E_pl`.
    pub q: Option<f64>,
    pub epsilon_max: f64,
}

impl Default for ThermalParams {
    fn default() -> Self {
        ThermalParams {
            omega: TAU * 10.0,
            temperature: 1.0,
            omega0: OPTICAL_OMEGA0,
            q: None,
            epsilon_max: 1e-40,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "camelCase")]
pub struct OracleParams {
    pub alpha: f64,
    pub q: f64,
    pub omega: f64,
    pub optical_dim: i64,
    pub gw_dim: i64,
    pub frame: FrameArg,
    pub omega0: f64,
    pub tolerance: f64,
}

impl Default for OracleParams {
    fn default() -> Self {
        OracleParams {
            alpha: 1.0,
            q: 0.1,
            omega: 1.0,
            optical_dim: 24,
            gw_dim: 16,
            frame: FrameArg::Rotating,
            omega0: OPTICAL_OMEGA0,
            tolerance: 1e-6,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "camelCase")]
pub struct BchParams {
    pub q: Vec<f64>,
    pub optical_dim: i64,
    pub gw_dim: i64,
    /// Extra gravitational levels; chosen from `q` and the dims if absent.
    pub padding: Option<usize>,
    pub tolerance: f64,
}

impl Default for BchParams {
    fn default() -> Self {
        BchParams {
            q: vec![0.05, 0.1],
            optical_dim: 10,
            gw_dim: 14,
            padding: None,
            tolerance: 1e-7,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ScenarioKind {
    VacuumSqueezing(VacuumParams),
    CoherentGw(CoherentParams),
    SqueezedGw(SqueezedParams),
    ThermalCheck(ThermalParams),
    OracleVerify(OracleParams),
    BchVerify(BchParams),
}

impl ScenarioKind {
    pub fn label(&self) -> &'static str {
        match self {
            ScenarioKind::VacuumSqueezing(_) => "VacuumSqueezing",
            ScenarioKind::CoherentGw(_) => "CoherentGw",
            ScenarioKind::SqueezedGw(_) => "SqueezedGw",
            ScenarioKind::ThermalCheck(_) => "ThermalCheck",
            ScenarioKind::OracleVerify(_) => "OracleVerify",
            ScenarioKind::BchVerify(_) => "BchVerify",
        }
    }

    /// Grid used when the scenario gives none.
    pub fn default_grid(&self) -> TimeGrid {
        match self {
            ScenarioKind::VacuumSqueezing(_) => TimeGrid::new(0.0, 4.0 * PI, 2001),
            ScenarioKind::CoherentGw(p) => TimeGrid::new(0.0, TAU / p.omega, 33),
            ScenarioKind::SqueezedGw(p) => TimeGrid::new(0.0, TAU / p.omega, 33),
            ScenarioKind::OracleVerify(p) => TimeGrid::new(0.0, 2.0 * TAU / p.omega, 33),
            ScenarioKind::ThermalCheck(_) | ScenarioKind::BchVerify(_) => TimeGrid::new(0.0, 1.0, 2),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub kind: ScenarioKind,
    pub time_grid: TimeGrid,
    /// Path prefix; `<output>.csv` and `<output>.summary.json` are written.
    pub output: PathBuf,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    name: String,
    kind: String,
    #[serde(default)]
    params: Option<Value>,
    #[serde(default)]
    time_grid: Option<TimeGrid>,
    #[serde(default)]
    output: Option<String>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawDocument {
    Wrapped {
        scenarios: Vec<RawScenario>,
    },
    Bare(Vec<RawScenario>),
}

fn parse_error(e: serde_json::Error) -> ConfigError {
    ConfigError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    }
}

/// Parses a JSON configuration: either `{"scenarios": [...]}` or a bare
/// array of scenarios. An empty document yields no scenarios.
pub fn parse_config(text: &str) -> Result<Vec<Scenario>, ConfigError> {
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    // syntax first, so malformed input reports a position
    let value: Value = serde_json::from_str(text).map_err(parse_error)?;
    let doc: RawDocument = serde_json::from_value(value).map_err(|e| ConfigError::Parse {
        line: 0,
        column: 0,
        message: format!(
            "expected {{\"scenarios\": [...]}} or an array of scenarios with fields \
             name, kind, params, time_grid, output: {e}"
        ),
    })?;
    let raw = match doc {
        RawDocument::Wrapped { scenarios } | RawDocument::Bare(scenarios) => scenarios,
    };
    let mut out = Vec::with_capacity(raw.len());
    for r in raw {
        let scenario = build_scenario(r)?;
        if out.iter().any(|s: &Scenario| s.name == scenario.name) {
            return Err(invalid(&scenario.name, "name", "duplicate scenario name"));
        }
        out.push(scenario);
    }
    Ok(out)
}

fn typed_params<T: DeserializeOwned + Default>(name: &str, params: Option<Value>) -> Result<T, ConfigError> {
    match params {
        None | Some(Value::Null) => Ok(T::default()),
        Some(v) => serde_json::from_value(v).map_err(|e| invalid(name, "params", e.to_string())),
    }
}

fn build_scenario(r: RawScenario) -> Result<Scenario, ConfigError> {
    let name = r.name.trim().to_string();
    if name.is_empty() {
        return Err(invalid("<unnamed>", "name", "must not be empty"));
    }
    let kind = match r.kind.as_str() {
        "VacuumSqueezing" => ScenarioKind::VacuumSqueezing(typed_params(&name, r.params)?),
        "CoherentGw" => ScenarioKind::CoherentGw(typed_params(&name, r.params)?),
        "SqueezedGw" => ScenarioKind::SqueezedGw(typed_params(&name, r.params)?),
        "ThermalCheck" => ScenarioKind::ThermalCheck(typed_params(&name, r.params)?),
        "OracleVerify" => ScenarioKind::OracleVerify(typed_params(&name, r.params)?),
        "BchVerify" => ScenarioKind::BchVerify(typed_params(&name, r.params)?),
        other => {
            return Err(invalid(
                &name,
                "kind",
                format!(
                    "unknown kind `{other}` (expected VacuumSqueezing, CoherentGw, SqueezedGw, \
                     ThermalCheck, OracleVerify or BchVerify)"
                ),
            ))
        }
    };
    validate_kind(&name, &kind)?;
    let time_grid = r.time_grid.unwrap_or_else(|| kind.default_grid());
    time_grid.validate(&name)?;
    let output = PathBuf::from(r.output.unwrap_or_else(|| name.clone()));
    Ok(Scenario {
        name,
        kind,
        time_grid,
        output,
    })
}

pub(crate) fn to_dim(scenario: &str, field: &str, n: i64) -> Result<Dim, ConfigError> {
    if n < 2 {
        return Err(invalid(scenario, field, format!("dimension must be ≥ 2, got {n}")));
    }
    Dim::new(n as usize).map_err(|e| invalid(scenario, field, e.to_string()))
}

fn check(scenario: &str, field: &str, ok: bool, reason: &str) -> Result<(), ConfigError> {
    if ok {
        Ok(())
    } else {
        Err(invalid(scenario, field, reason))
    }
}

fn non_negative(v: f64) -> bool {
    v.is_finite() && v >= 0.0
}

fn positive(v: f64) -> bool {
    v.is_finite() && v > 0.0
}

fn coupling(q: f64) -> bool {
    q.is_finite() && (0.0..1.0).contains(&q)
}

fn validate_kind(n: &str, kind: &ScenarioKind) -> Result<(), ConfigError> {
    match kind {
        ScenarioKind::VacuumSqueezing(p) => {
            check(n, "params.alpha", non_negative(p.alpha), "must be ≥ 0")?;
            check(n, "params.D", p.d > 0.0 && p.d <= 1.0, "must lie in (0, 1]")?;
            check(n, "params.lnRatio", positive(p.ln_ratio), "must be > 0")?;
            check(n, "params.omega0", positive(p.omega0), "must be > 0")?;
        }
        ScenarioKind::CoherentGw(p) => {
            check(n, "params.alpha", non_negative(p.alpha), "must be ≥ 0")?;
            check(n, "params.q", coupling(p.q), "must lie in [0, 1)")?;
            check(n, "params.lambda", non_negative(p.lambda), "must be ≥ 0")?;
            check(n, "params.omega", positive(p.omega), "must be > 0")?;
            check(n, "params.tolerance", positive(p.tolerance), "must be > 0")?;
            to_dim(n, "params.opticalDim", p.optical_dim)?;
            to_dim(n, "params.gwDim", p.gw_dim)?;
        }
        ScenarioKind::SqueezedGw(p) => {
            check(n, "params.alpha", non_negative(p.alpha), "must be ≥ 0")?;
            check(n, "params.q", coupling(p.q), "must lie in [0, 1)")?;
            check(n, "params.xi0", non_negative(p.xi0), "must be ≥ 0")?;
            check(n, "params.omega", positive(p.omega), "must be > 0")?;
            check(n, "params.tolerance", positive(p.tolerance), "must be > 0")?;
            to_dim(n, "params.opticalDim", p.optical_dim)?;
            to_dim(n, "params.gwDim", p.gw_dim)?;
        }
        ScenarioKind::ThermalCheck(p) => {
            check(n, "params.omega", positive(p.omega), "must be > 0")?;
            check(n, "params.temperature", positive(p.temperature), "must be > 0")?;
            check(n, "params.omega0", positive(p.omega0), "must be > 0")?;
            check(n, "params.epsilonMax", positive(p.epsilon_max), "must be > 0")?;
            if let Some(q) = p.q {
                check(n, "params.q", non_negative(q), "must be ≥ 0")?;
            }
        }
        ScenarioKind::OracleVerify(p) => {
            check(n, "params.alpha", non_negative(p.alpha), "must be ≥ 0")?;
            check(n, "params.q", coupling(p.q), "must lie in [0, 1)")?;
            check(n, "params.omega", positive(p.omega), "must be > 0")?;
            check(n, "params.omega0", positive(p.omega0), "must be > 0")?;
            check(n, "params.tolerance", positive(p.tolerance), "must be > 0")?;
            to_dim(n, "params.opticalDim", p.optical_dim)?;
            to_dim(n, "params.gwDim", p.gw_dim)?;
        }
        ScenarioKind::BchVerify(p) => {
            check(n, "params.q", !p.q.is_empty(), "need at least one coupling")?;
            for &q in &p.q {
                check(n, "params.q", coupling(q), "every entry must lie in [0, 1)")?;
            }
            check(n, "params.tolerance", positive(p.tolerance), "must be > 0")?;
            to_dim(n, "params.opticalDim", p.optical_dim)?;
            to_dim(n, "params.gwDim", p.gw_dim)?;
        }
    }
    Ok(())
}
