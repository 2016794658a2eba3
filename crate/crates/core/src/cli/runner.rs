use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use super::config::{
    to_dim, BchParams, CoherentParams, ConventionArg, FrameArg, OracleParams, Scenario,
    ScenarioKind, SqueezedParams, ThermalParams, VacuumParams, VariantArg,
};
use crate::analytic::{
    coherent_gw_mean_quadrature, damping_single_mode, first_variance_minimum, kerr_phase,
    single_mode_exact_moments, squeezed_gw_mean_quadrature, thermal_damping,
    thermal_damping_deficit, vacuum_mean_quadrature, vacuum_variance, Frame, PhaseConvention,
    SqueezedVariant,
};
use crate::oracle::{bch_identity_checks, heisenberg_expectations, Dynamics, EvolutionResult, GwMode, JointSystem};
use crate::params::{GwModeState, PhysicalConstants};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Warn,
    Fail,
}

impl Status {
    pub fn is_failure(self) -> bool {
        self == Status::Fail
    }

    fn worst(self, other: Status) -> Status {
        use Status::*;
        match (self, other) {
            (Fail, _) | (_, Fail) => Fail,
            (Warn, _) | (_, Warn) => Warn,
            _ => Pass,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunSummary {
    pub name: String,
    pub status: Status,
    pub metrics: BTreeMap<String, f64>,
    pub tolerances: BTreeMap<String, f64>,
    pub runtime_s: f64,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub messages: Vec<String>,
}

impl RunSummary {
    fn new(name: &str) -> Self {
        RunSummary {
            name: name.to_string(),
            status: Status::Pass,
            metrics: BTreeMap::new(),
            tolerances: BTreeMap::new(),
            runtime_s: 0.0,
            messages: Vec::new(),
        }
    }

    fn metric(&mut self, key: &str, value: f64) {
        // JSON has no NaN; leave undefined metrics out
        if value.is_finite() {
            self.metrics.insert(key.to_string(), value);
        }
    }

    fn tolerance(&mut self, key: &str, value: f64) {
        self.tolerances.insert(key.to_string(), value);
    }

    fn require(&mut self, ok: bool, message: impl Into<String>) {
        if !ok {
            self.status = Status::Fail;
            self.messages.push(message.into());
        }
    }

    fn warn(&mut self, message: impl Into<String>) {
        self.status = self.status.worst(Status::Warn);
        self.messages.push(message.into());
    }
}

/// Settings that apply across scenarios; `Some` values override the
/// per-scenario choice.
#[derive(Clone, Debug, PartialEq)]
pub struct RunOptions {
    /// Directory that relative output prefixes are resolved against.
    pub out_dir: PathBuf,
    pub budget: usize,
    pub convention: Option<ConventionArg>,
    pub frame: Option<FrameArg>,
    pub variant: Option<VariantArg>,
    /// When false nothing is written to disk.
    pub write_files: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            out_dir: PathBuf::from("."),
            budget: JointSystem::DEFAULT_BUDGET,
            convention: None,
            frame: None,
            variant: None,
            write_files: true,
        }
    }
}

/// One CSV row. Vacuum scenarios leave the oracle columns out.
#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub t: f64,
    pub f: f64,
    pub mean_quadrature: f64,
    pub variance: f64,
    pub d: f64,
    pub oracle: Option<OracleColumns>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OracleColumns {
    pub mean: f64,
    pub variance: f64,
    pub abs_dev: f64,
    pub tail_mass: f64,
    pub tail_flagged: bool,
}

pub const VACUUM_HEADER: [&str; 5] = ["t", "F", "mean_quadrature", "variance", "D"];
pub const ORACLE_HEADER: [&str; 5] = ["oracle_mean", "oracle_variance", "abs_dev", "tail_mass", "tail_flagged"];

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes rows as RFC-4180 CSV with 17 significant digits per number.
pub fn write_csv<W: Write>(out: W, rows: &[Row]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let with_oracle = rows.first().is_some_and(|r| r.oracle.is_some());
    let mut header: Vec<&str> = VACUUM_HEADER.to_vec();
    if with_oracle {
        header.extend_from_slice(&ORACLE_HEADER);
    }
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![num(r.t), num(r.f), num(r.mean_quadrature), num(r.variance), num(r.d)];
        if let Some(o) = &r.oracle {
            rec.extend([num(o.mean), num(o.variance), num(o.abs_dev), num(o.tail_mass), o.tail_flagged.to_string()]);
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Output of one scenario before anything touches the disk.
#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioOutput {
    pub summary: RunSummary,
    pub rows: Vec<Row>,
}

/// Runs a scenario and, if `opts.write_files`, writes `<prefix>.csv` (time
/// series kinds only) and `<prefix>.summary.json`. Physics errors become a
/// failed summary; only I/O problems are returned as `Err`.
pub fn run(scenario: &Scenario, opts: &RunOptions) -> std::io::Result<RunSummary> {
    let out = evaluate(scenario, opts);
    if opts.write_files {
        write_outputs(scenario, opts, &out)?;
    }
    Ok(out.summary)
}

pub fn output_paths(scenario: &Scenario, opts: &RunOptions) -> (PathBuf, PathBuf) {
    let prefix = if scenario.output.is_absolute() {
        scenario.output.clone()
    } else {
        opts.out_dir.join(&scenario.output)
    };
    let with_suffix = |suffix: &str| {
        let mut s = prefix.clone().into_os_string();
        s.push(suffix);
        PathBuf::from(s)
    };
    (with_suffix(".csv"), with_suffix(".summary.json"))
}

fn write_outputs(scenario: &Scenario, opts: &RunOptions, out: &ScenarioOutput) -> std::io::Result<()> {
    let (csv_path, json_path) = output_paths(scenario, opts);
    if let Some(parent) = csv_path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    if !out.rows.is_empty() {
        let file = fs::File::create(&csv_path)?;
        write_csv(std::io::BufWriter::new(file), &out.rows).map_err(std::io::Error::other)?;
    }
    write_summary(&json_path, &out.summary)
}

fn write_summary(path: &Path, summary: &RunSummary) -> std::io::Result<()> {
    let mut text = serde_json::to_string_pretty(summary).map_err(std::io::Error::other)?;
    text.push('\n');
    fs::write(path, text)
}

/// Computes the rows and summary of `scenario` without writing anything.
pub fn evaluate(scenario: &Scenario, opts: &RunOptions) -> ScenarioOutput {
    let start = Instant::now();
    let mut summary = RunSummary::new(&scenario.name);
    let grid = scenario.time_grid.points();
    let result = match &scenario.kind {
        ScenarioKind::VacuumSqueezing(p) => run_vacuum(p, &grid, opts, &mut summary),
        ScenarioKind::CoherentGw(p) => run_coherent(&scenario.name, p, &grid, opts, &mut summary),
        ScenarioKind::SqueezedGw(p) => run_squeezed(&scenario.name, p, &grid, opts, &mut summary),
        ScenarioKind::ThermalCheck(p) => run_thermal(p, &mut summary).map(|_| Vec::new()),
        ScenarioKind::OracleVerify(p) => run_oracle(&scenario.name, p, &grid, opts, &mut summary),
        ScenarioKind::BchVerify(p) => run_bch(&scenario.name, p, &mut summary).map(|_| Vec::new()),
    };
    let rows = match result {
        Ok(rows) => rows,
        Err(message) => {
            summary.require(false, message);
            Vec::new()
        }
    };
    if rows.iter().any(|r| r.variance < 0.0) {
        summary.require(false, "negative variance in output");
    }
    summary.runtime_s = start.elapsed().as_secs_f64();
    ScenarioOutput { summary, rows }
}

type Outcome<T> = Result<T, String>;

fn fail<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

/// Vacuum rows over a grid of Kerr phases.
pub fn vacuum_rows(p: &VacuumParams, conv: PhaseConvention, grid: &[f64]) -> Outcome<Vec<Row>> {
    let consts = PhysicalConstants::default();
    let time_per_f = consts.planck_frequency() / (p.omega0 * p.omega0);
    grid.iter()
        .map(|&f| {
            Ok(Row {
                t: f * time_per_f,
                f,
                mean_quadrature: vacuum_mean_quadrature(p.alpha, p.d, f).map_err(fail)?,
                variance: vacuum_variance(p.alpha, p.d, f, conv).map_err(fail)?,
                d: p.d,
                oracle: None,
            })
        })
        .collect()
}

fn run_vacuum(p: &VacuumParams, grid: &[f64], opts: &RunOptions, s: &mut RunSummary) -> Outcome<Vec<Row>> {
    let conv: PhaseConvention = opts.convention.unwrap_or(p.convention).into();
    let rows = vacuum_rows(p, conv, grid)?;
    let lowest = rows
        .iter()
        .fold(None::<&Row>, |best, r| match best {
            Some(b) if b.variance <= r.variance => Some(b),
            _ => Some(r),
        })
        .expect("grid has at least two samples");
    s.metric("grid_min_F", lowest.f);
    s.metric("grid_min_variance", lowest.variance);
    s.metric("lnRatio", p.ln_ratio);
    s.metric("convention_printed", f64::from(conv == PhaseConvention::PaperPrinted));

    if p.alpha > 0.0 {
        match first_variance_minimum(p.alpha, p.d, conv) {
            Ok(m) => {
                s.metric("F0", m.f0);
                s.metric("varMin", m.var_min);
                if m.var_min >= 1.0 {
                    s.warn(format!("no squeezing: first minimum {:.6} ≥ 1", m.var_min));
                }
            }
            Err(e) => s.warn(e.to_string()),
        }
    }
    // revivals at F = 2πm inside the grid, only meaningful without damping
    let (lo, hi) = (grid[0], grid[grid.len() - 1]);
    let mut worst: f64 = 0.0;
    let mut m = (lo / TAU).ceil().max(1.0);
    while m * TAU <= hi {
        let v = vacuum_variance(p.alpha, p.d, m * TAU, conv).map_err(fail)?;
        worst = worst.max((v - 1.0).abs());
        m += 1.0;
    }
    if p.d == 1.0 && hi >= TAU {
        s.metric("max_revival_deviation", worst);
        s.tolerance("revival", 1e-9);
        s.require(worst <= 1e-9, format!("revival deviation {worst:e} > 1e-9"));
    }
    Ok(rows)
}

fn system(name: &str, optical: i64, gw: i64, omega: f64, q: f64, frame: Frame, budget: usize) -> Outcome<JointSystem> {
    let od = to_dim(name, "params.opticalDim", optical).map_err(fail)?;
    let gd = to_dim(name, "params.gwDim", gw).map_err(fail)?;
    JointSystem::with_budget(od, vec![GwMode::new(omega, q, gd).map_err(fail)?], frame, budget).map_err(fail)
}

fn oracle_rows(
    res: &EvolutionResult,
    q: f64,
    omega: f64,
    analytic_mean: impl Fn(f64) -> Outcome<f64>,
    analytic_variance: impl Fn(usize) -> f64,
) -> Outcome<Vec<Row>> {
    res.times
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let mean = analytic_mean(t)?;
            Ok(Row {
                t,
                f: kerr_phase(q, omega, t).map_err(fail)?,
                mean_quadrature: mean,
                variance: analytic_variance(i),
                d: damping_single_mode(q, omega, t),
                oracle: Some(OracleColumns {
                    mean: res.mean_quadrature[i],
                    variance: res.variance[i],
                    abs_dev: (res.mean_quadrature[i] - mean).abs(),
                    tail_mass: res.tail_mass[i],
                    tail_flagged: res.tail_flagged[i],
                }),
            })
        })
        .collect()
}

fn summarize_oracle(s: &mut RunSummary, rows: &[Row], res: &EvolutionResult, tolerance: f64) {
    let max_dev = rows
        .iter()
        .filter_map(|r| r.oracle.as_ref())
        .map(|o| o.abs_dev)
        .fold(0.0, f64::max);
    s.metric("max_abs_dev", max_dev);
    s.metric("max_tail_mass", res.tail_mass.iter().copied().fold(0.0, f64::max));
    s.metric("flagged_samples", res.tail_flagged.iter().filter(|&&f| f).count() as f64);
    s.metric("unitarity_residual", res.unitarity_residual);
    s.tolerance("abs_dev", tolerance);
    s.tolerance("unitarity", 1e-10);
    s.require(max_dev <= tolerance, format!("max deviation {max_dev:e} > {tolerance:e}"));
    s.require(res.unitarity_residual <= 1e-10, format!("norm drift {:e}", res.unitarity_residual));
    if res.any_flagged() {
        s.warn("some samples exceed the truncation tail tolerance");
    }
}

/// Coherent-wave rows and the oracle evolution behind them.
pub fn coherent_rows(name: &str, p: &CoherentParams, grid: &[f64], opts: &RunOptions) -> Outcome<(Vec<Row>, EvolutionResult)> {
    let sys = system(name, p.optical_dim, p.gw_dim, p.omega, p.q, Frame::Rotating, opts.budget)?;
    let states = [GwModeState::Coherent { lambda: p.lambda }];
    let res = heisenberg_expectations(&sys, p.alpha, &states, grid, Dynamics::from(p.dynamics)).map_err(fail)?;
    let phase = opts.variant.unwrap_or(p.variant).into();
    let rows = oracle_rows(
        &res,
        p.q,
        p.omega,
        |t| coherent_gw_mean_quadrature(p.alpha, p.q, p.lambda, p.omega, t, phase).map_err(fail),
        // no closed form for the variance here; report the oracle's
        |i| res.variance[i],
    )?;
    Ok((rows, res))
}

fn run_coherent(name: &str, p: &CoherentParams, grid: &[f64], opts: &RunOptions, s: &mut RunSummary) -> Outcome<Vec<Row>> {
    let (rows, res) = coherent_rows(name, p, grid, opts)?;
    summarize_oracle(s, &rows, &res, p.tolerance);
    s.metric("phase_amplitude_qlambda", p.q * p.lambda);
    Ok(rows)
}

pub fn squeezed_rows(name: &str, p: &SqueezedParams, grid: &[f64], opts: &RunOptions) -> Outcome<(Vec<Row>, EvolutionResult, bool)> {
    let sys = system(name, p.optical_dim, p.gw_dim, p.omega, p.q, Frame::Rotating, opts.budget)?;
    let states = [GwModeState::Squeezed { xi0: p.xi0 }];
    let res = heisenberg_expectations(&sys, p.alpha, &states, grid, Dynamics::from(p.dynamics)).map_err(fail)?;
    let variant: SqueezedVariant = opts.variant.unwrap_or(p.variant).into();
    let mut out_of_domain = false;
    let rows = oracle_rows(
        &res,
        p.q,
        p.omega,
        |t| {
            let v = squeezed_gw_mean_quadrature(p.alpha, p.q, p.xi0, p.omega, t, variant).map_err(fail)?;
            Ok(v.value)
        },
        |i| res.variance[i],
    )?;
    if let Some(&t) = grid.first() {
        out_of_domain = squeezed_gw_mean_quadrature(p.alpha, p.q, p.xi0, p.omega, t, variant)
            .map_err(fail)?
            .out_of_domain;
    }
    Ok((rows, res, out_of_domain))
}

/// `(2α − approx) / (2α − exact)` at `Ωt = π`, the ratio of the correction
/// terms of the two squeezed-wave forms.
pub fn squeezed_correction_ratio(alpha: f64, q: f64, xi0: f64) -> Outcome<f64> {
    let at = |v| squeezed_gw_mean_quadrature(alpha, q, xi0, 1.0, PI, v).map(|f| f.value).map_err(fail);
    let exact = at(SqueezedVariant::ExactIdentity)?;
    let approx = at(SqueezedVariant::PaperApprox)?;
    Ok((2.0 * alpha - approx) / (2.0 * alpha - exact))
}

fn run_squeezed(name: &str, p: &SqueezedParams, grid: &[f64], opts: &RunOptions, s: &mut RunSummary) -> Outcome<Vec<Row>> {
    let (rows, res, out_of_domain) = squeezed_rows(name, p, grid, opts)?;
    summarize_oracle(s, &rows, &res, p.tolerance);
    if p.alpha > 0.0 && p.q > 0.0 {
        s.metric("correction_ratio_approx_over_exact", squeezed_correction_ratio(p.alpha, p.q, p.xi0)?);
    }
    if out_of_domain {
        s.warn("8 q² e^{2ξ0} > 0.1: outside the small-correction regime");
    }
    Ok(rows)
}

fn run_thermal(p: &ThermalParams, s: &mut RunSummary) -> Outcome<()> {
    let consts = PhysicalConstants::default();
    let nbar = consts.nbar(p.omega, p.temperature).map_err(fail)?;
    let q = match p.q {
        Some(q) => q,
        None => consts.q_max(p.omega0).map_err(fail)?,
    };
    let damping = thermal_damping(q, nbar).map_err(fail)?;
    let epsilon = thermal_damping_deficit(q, nbar).map_err(fail)?;
    s.metric("nbar", nbar);
    s.metric("q", q);
    s.metric("damping", damping);
    s.metric("epsilon", epsilon);
    s.tolerance("epsilon_max", p.epsilon_max);
    s.require(epsilon <= p.epsilon_max, format!("ε = {epsilon:e} > {:e}", p.epsilon_max));
    Ok(())
}

/// Oracle rows for a vacuum gravitational mode against the exact moments.
pub fn oracle_verify_rows(name: &str, p: &OracleParams, grid: &[f64], opts: &RunOptions) -> Outcome<(Vec<Row>, EvolutionResult, f64, f64)> {
    let frame = match opts.frame.unwrap_or(p.frame) {
        FrameArg::Rotating => Frame::Rotating,
        FrameArg::Lab => Frame::Lab { omega0: p.omega0 },
    };
    let sys = system(name, p.optical_dim, p.gw_dim, p.omega, p.q, frame, opts.budget)?;
    let res = heisenberg_expectations(&sys, p.alpha, &[GwModeState::Vacuum], grid, Dynamics::Full).map_err(fail)?;
    let exact = grid
        .iter()
        .map(|&t| single_mode_exact_moments(p.alpha, p.q, p.omega, t, frame).map_err(fail))
        .collect::<Outcome<Vec<_>>>()?;
    let mut rel_mean: f64 = 0.0;
    let mut rel_var: f64 = 0.0;
    let mut rows = Vec::with_capacity(grid.len());
    for (i, (&t, m)) in grid.iter().zip(&exact).enumerate() {
        let dm = (res.mean_quadrature[i] - m.mean).abs();
        let dv = (res.variance[i] - m.variance).abs();
        rel_mean = rel_mean.max(relative(dm, m.mean));
        rel_var = rel_var.max(relative(dv, m.variance));
        rows.push(Row {
            t,
            f: kerr_phase(p.q, p.omega, t).map_err(fail)?,
            mean_quadrature: m.mean,
            variance: m.variance,
            d: damping_single_mode(p.q, p.omega, t),
            oracle: Some(OracleColumns {
                mean: res.mean_quadrature[i],
                variance: res.variance[i],
                abs_dev: dm.max(dv),
                tail_mass: res.tail_mass[i],
                tail_flagged: res.tail_flagged[i],
            }),
        });
    }
    Ok((rows, res, rel_mean, rel_var))
}

/// Relative deviation, falling back to absolute where the reference is
/// below 1e-3 in magnitude (the mean quadrature can cross zero).
fn relative(diff: f64, reference: f64) -> f64 {
    diff / reference.abs().max(1e-3)
}

fn run_oracle(name: &str, p: &OracleParams, grid: &[f64], opts: &RunOptions, s: &mut RunSummary) -> Outcome<Vec<Row>> {
    let (rows, res, rel_mean, rel_var) = oracle_verify_rows(name, p, grid, opts)?;
    s.metric("max_rel_dev_mean", rel_mean);
    s.metric("max_rel_dev_variance", rel_var);
    s.metric("max_tail_mass", res.tail_mass.iter().copied().fold(0.0, f64::max));
    s.metric("unitarity_residual", res.unitarity_residual);
    s.tolerance("relative_deviation", p.tolerance);
    s.tolerance("unitarity", 1e-10);
    let worst = rel_mean.max(rel_var);
    s.require(worst <= p.tolerance, format!("relative deviation {worst:e} > {:e}", p.tolerance));
    s.require(res.unitarity_residual <= 1e-10, format!("norm drift {:e}", res.unitarity_residual));
    if res.any_flagged() {
        s.warn("some samples exceed the truncation tail tolerance");
    }
    Ok(rows)
}

fn run_bch(name: &str, p: &BchParams, s: &mut RunSummary) -> Outcome<()> {
    let od = to_dim(name, "params.opticalDim", p.optical_dim).map_err(fail)?;
    let gd = to_dim(name, "params.gwDim", p.gw_dim).map_err(fail)?;
    s.tolerance("residual", p.tolerance);
    for &q in &p.q {
        let rep = bch_identity_checks(q, (od, gd), p.padding).map_err(fail)?;
        for (i, r) in rep.residuals.iter().enumerate() {
            s.metric(&format!("q={q}:identity{}", i + 1), *r);
        }
        for (i, r) in rep.opposite_sign.iter().enumerate() {
            s.metric(&format!("q={q}:opposite_sign{}", i + 1), *r);
        }
        s.metric(&format!("q={q}:padding"), rep.padding as f64);
        let worst = rep.max_residual();
        s.require(worst <= p.tolerance, format!("q = {q}: residual {worst:e} > {:e}", p.tolerance));
    }
    Ok(())
}
