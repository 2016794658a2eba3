//! The acceptance suite: ten numbered criteria, each with a hard tolerance
//! and a runtime limit.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::time::Instant;

use serde::Serialize;

use super::config::{CoherentParams, OracleParams, SqueezedParams, OPTICAL_OMEGA0};
use super::runner::{coherent_rows, oracle_verify_rows, squeezed_correction_ratio, squeezed_rows, RunOptions};
use crate::analytic::{
    first_variance_minimum, squeezed_prefactor, thermal_damping, thermal_damping_deficit,
    vacuum_variance, PhaseConvention,
};
use crate::oracle::{bch_identity_checks, factorization_check, GwMode, JointSystem};
use crate::params::{
    ligo_phase_estimate, strain_phase_amplitude, PhysicalConstants, DEFAULT_LN_CUTOFF_RATIO,
    PHASE_CALIBRATION,
};
use crate::analytic::Frame;
use crate::qcore::Dim;

pub const CRITERIA: usize = 10;

#[derive(Clone, Debug, PartialEq)]
pub struct AcceptanceOptions {
    /// Variance convention for the vacuum criteria (1 and 2). Flipping it
    /// to the printed form makes criterion 1 fail.
    pub convention: PhaseConvention,
    pub budget: usize,
}

impl Default for AcceptanceOptions {
    fn default() -> Self {
        AcceptanceOptions {
            convention: PhaseConvention::OracleCorrected,
            budget: JointSystem::DEFAULT_BUDGET,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CriterionResult {
    pub id: usize,
    pub title: &'static str,
    pub passed: bool,
    pub detail: String,
    pub runtime_s: f64,
    pub limit_s: f64,
}

impl fmt::Display for CriterionResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}] {:>2} {}: {} ({:.2}s, limit {}s)",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.title,
            self.detail,
            self.runtime_s,
            self.limit_s
        )
    }
}

struct Check {
    passed: bool,
    notes: Vec<String>,
}

impl Check {
    fn new() -> Self {
        Check {
            passed: true,
            notes: Vec::new(),
        }
    }

    /// Records `note` and folds `ok` into the verdict.
    fn expect(&mut self, ok: bool, note: String) {
        self.passed &= ok;
        self.notes.push(if ok { note } else { format!("{note} ✗") });
    }

    fn report(&mut self, note: String) {
        self.notes.push(note);
    }

    fn error(&mut self, what: &str, e: impl fmt::Display) {
        self.passed = false;
        self.notes.push(format!("{what}: error: {e}"));
    }
}

const TITLES: [(&str, f64); CRITERIA] = [
    ("vacuum squeezing minimum", 1.0),
    ("revivals", 1.0),
    ("oracle equivalence (vacuum)", 120.0),
    ("factorized unitary", 120.0),
    ("BCH identities", 30.0),
    ("coherent wave", 300.0),
    ("squeezed wave", 300.0),
    ("thermal estimate", 1.0),
    ("constants", 1.0),
    ("typo detection", 1.0),
];

/// Runs criterion `id` (1-based).
pub fn run_criterion(id: usize, opts: &AcceptanceOptions) -> CriterionResult {
    assert!((1..=CRITERIA).contains(&id), "criteria are numbered 1..={CRITERIA}");
    let (title, limit_s) = TITLES[id - 1];
    let start = Instant::now();
    let mut c = Check::new();
    match id {
        1 => vacuum_minimum(&mut c, opts),
        2 => revivals(&mut c, opts),
        3 => oracle_equivalence(&mut c, opts),
        4 => factorized_unitary(&mut c, opts),
        5 => bch(&mut c),
        6 => coherent_wave(&mut c, opts),
        7 => squeezed_wave(&mut c, opts),
        8 => thermal(&mut c),
        9 => constants(&mut c),
        _ => typo_detection(&mut c),
    }
    let runtime_s = start.elapsed().as_secs_f64();
    if runtime_s >= limit_s {
        c.expect(false, "runtime over limit".into());
    }
    CriterionResult {
        id,
        title,
        passed: c.passed,
        detail: c.notes.join("; "),
        runtime_s,
        limit_s,
    }
}

pub fn run_all(opts: &AcceptanceOptions) -> Vec<CriterionResult> {
    (1..=CRITERIA).map(|id| run_criterion(id, opts)).collect()
}

fn vacuum_minimum(c: &mut Check, opts: &AcceptanceOptions) {
    match first_variance_minimum(1.0, 1.0, opts.convention) {
        Ok(m) => {
            c.expect((m.f0 - 0.33).abs() <= 0.02, format!("F0 = {:.6}", m.f0));
            c.expect((m.var_min - 0.68).abs() <= 0.01, format!("varMin = {:.6}", m.var_min));
        }
        Err(e) => c.error("first_variance_minimum", e),
    }
}

fn revivals(c: &mut Check, opts: &AcceptanceOptions) {
    let mut worst: f64 = 0.0;
    for alpha in [0.5, 1.0, 2.0] {
        for m in 1..=3 {
            match vacuum_variance(alpha, 1.0, TAU * m as f64, opts.convention) {
                Ok(v) => worst = worst.max((v - 1.0).abs()),
                Err(e) => return c.error("vacuum_variance", e),
            }
        }
    }
    c.expect(worst <= 1e-9, format!("max |var − 1| = {worst:.2e}"));
}

fn run_opts(budget: usize) -> RunOptions {
    RunOptions {
        budget,
        write_files: false,
        ..RunOptions::default()
    }
}

fn linspace(end: f64, samples: usize) -> Vec<f64> {
    (0..samples).map(|i| end * i as f64 / (samples - 1) as f64).collect()
}

fn oracle_equivalence(c: &mut Check, opts: &AcceptanceOptions) {
    let p = OracleParams::default();
    let grid = linspace(4.0 * PI, 33);
    match oracle_verify_rows("acceptance", &p, &grid, &run_opts(opts.budget)) {
        Ok((_, res, rel_mean, rel_var)) => {
            c.expect(rel_mean <= 1e-6, format!("mean rel dev {rel_mean:.2e}"));
            c.expect(rel_var <= 1e-6, format!("variance rel dev {rel_var:.2e}"));
            c.expect(!res.any_flagged(), "tail within tolerance".into());
        }
        Err(e) => c.error("oracle", e),
    }
}

fn dim(n: usize) -> Dim {
    Dim::new(n).expect("fixed acceptance dimension")
}

fn factorized_unitary(c: &mut Check, opts: &AcceptanceOptions) {
    let times = [0.5, PI, TAU];
    let single = JointSystem::with_budget(
        dim(12),
        vec![GwMode::new(1.0, 0.1, dim(12)).expect("valid mode")],
        Frame::Rotating,
        opts.budget,
    )
    .and_then(|sys| factorization_check(&sys, &times, PhaseConvention::OracleCorrected, None));
    match single {
        Ok(rep) => {
            c.expect(rep.max_residual() <= 1e-7, format!("12×12 residual {:.2e}", rep.max_residual()));
            c.expect(rep.unitarity_residual <= 1e-8, format!("unitarity {:.2e}", rep.unitarity_residual));
        }
        Err(e) => c.error("12×12", e),
    }
    let modes = vec![
        GwMode::new(1.0, 0.1, dim(6)).expect("valid mode"),
        GwMode::new(1.7, 0.1, dim(6)).expect("valid mode"),
    ];
    let two = JointSystem::with_budget(dim(8), modes, Frame::Rotating, opts.budget)
        .and_then(|sys| factorization_check(&sys, &times, PhaseConvention::OracleCorrected, None));
    match two {
        Ok(rep) => c.expect(rep.max_residual() <= 1e-6, format!("8×6×6 residual {:.2e}", rep.max_residual())),
        Err(e) => c.error("8×6×6", e),
    }
}

fn bch(c: &mut Check) {
    for q in [0.05, 0.1] {
        match bch_identity_checks(q, (dim(10), dim(14)), None) {
            Ok(rep) => c.expect(rep.max_residual() <= 1e-7, format!("q={q}: {:.2e}", rep.max_residual())),
            Err(e) => c.error("bch", e),
        }
    }
}

fn coherent_wave(c: &mut Check, opts: &AcceptanceOptions) {
    let p = CoherentParams::default();
    let grid = linspace(TAU / p.omega, 33);
    match coherent_rows("acceptance", &p, &grid, &run_opts(opts.budget)) {
        Ok((rows, res)) => {
            let dev = rows.iter().filter_map(|r| r.oracle.as_ref()).map(|o| o.abs_dev).fold(0.0, f64::max);
            c.expect(dev <= 1e-5, format!("max dev {dev:.2e}"));
            c.expect(!res.any_flagged(), "tail within tolerance".into());
        }
        Err(e) => c.error("oracle", e),
    }
    let (omega0, omega, f) = (OPTICAL_OMEGA0, TAU * 100.0, 1e-21);
    match strain_phase_amplitude(omega0, omega, f) {
        Ok(a) => c.expect((a - 2.8e-9).abs() <= 0.05e-9, format!("(ω0/Ω)f = {a:.3e}")),
        Err(e) => c.error("phase amplitude", e),
    }
    // the same amplitude through the model couplings, for two volumes
    let consts = PhysicalConstants::default();
    for v in [1.0, 1e6] {
        let q = consts.coupling_q(omega0, omega, v);
        let lambda = consts.coherent_amplitude_from_strain(f, omega, v);
        match (q, lambda) {
            (Ok(q), Ok(l)) => {
                let a = PHASE_CALIBRATION * q * l;
                let want = omega0 / omega * f;
                c.expect(((a - want) / want).abs() <= 1e-10, format!("4qλ(V={v:e}) = {a:.3e}"));
            }
            (Err(e), _) | (_, Err(e)) => c.error("couplings", e),
        }
    }
    match ligo_phase_estimate(200, 4000.0, 1.064e-6, f) {
        Ok(p) => c.expect((p - 4.7e-9).abs() <= 0.05e-9, format!("LIGO b=200: {p:.3e}")),
        Err(e) => c.error("ligo", e),
    }
}

fn squeezed_wave(c: &mut Check, opts: &AcceptanceOptions) {
    let p = SqueezedParams::default();
    let grid = linspace(TAU / p.omega, 33);
    match squeezed_rows("acceptance", &p, &grid, &run_opts(opts.budget)) {
        Ok((rows, res, _)) => {
            let dev = rows.iter().filter_map(|r| r.oracle.as_ref()).map(|o| o.abs_dev).fold(0.0, f64::max);
            c.expect(dev <= 1e-4, format!("max dev {dev:.2e}"));
            let tail = res.tail_mass.iter().copied().fold(0.0, f64::max);
            c.report(format!("max tail {tail:.1e}"));
        }
        Err(e) => c.error("oracle", e),
    }
    match squeezed_correction_ratio(p.alpha, p.q, p.xi0) {
        Ok(r) => c.report(format!("approx/exact correction ratio {r:.3}")),
        Err(e) => c.error("ratio", e),
    }
    let epl = PhysicalConstants::default().planck_frequency();
    match squeezed_prefactor(OPTICAL_OMEGA0, epl, 1e9, 0.1) {
        Ok(x) => c.expect((7.3e-16 / 2.0..=7.3e-16 * 2.0).contains(&x), format!("prefactor {x:.2e}")),
        Err(e) => c.error("prefactor", e),
    }
}

fn thermal(c: &mut Check) {
    let consts = PhysicalConstants::default();
    let q = consts.q_max(OPTICAL_OMEGA0);
    let nbar = consts.nbar(TAU * 10.0, 1.0);
    match (q, nbar) {
        (Ok(q), Ok(n)) => match (thermal_damping(q, n), thermal_damping_deficit(q, n)) {
            (Ok(d), Ok(eps)) => {
                c.expect(eps <= 1e-40 && eps > 0.0, format!("ε = {eps:.2e} (q = {q:.2e}, n̄ = {n:.3e})"));
                c.expect(d <= 1.0 && 1.0 - d <= eps + f64::EPSILON, format!("damping = {d}"));
            }
            (Err(e), _) | (_, Err(e)) => c.error("thermal_damping", e),
        },
        (Err(e), _) | (_, Err(e)) => c.error("params", e),
    }
}

fn constants(c: &mut Check) {
    let k = PhysicalConstants::default();
    let direct = (k.c.powi(5) / (k.hbar * k.g)).sqrt();
    let rel = (k.planck_frequency() - direct).abs() / direct;
    c.expect(rel <= 1e-6, format!("E_pl rel err {rel:.1e}"));
    c.expect(
        k.ln_cutoff_ratio == 62.0 && DEFAULT_LN_CUTOFF_RATIO == 62.0,
        format!("lnCutoffRatio {}", k.ln_cutoff_ratio),
    );
    let (omega, v, f) = (TAU * 100.0, 1e3, 1e-21);
    let trip = k
        .graviton_number_from_strain(f, omega, v)
        .and_then(|n| k.single_graviton_strain(omega, v).map(|f1| f1 * n.sqrt()));
    match trip {
        Ok(back) => {
            let err = ((back - f) / f).abs();
            c.expect(err <= 1e-10, format!("strain round trip {err:.1e}"));
        }
        Err(e) => c.error("round trip", e),
    }
    let qlambda = |v: f64| -> crate::Result<f64> {
        Ok(k.coupling_q(OPTICAL_OMEGA0, omega, v)? * k.coherent_amplitude_from_strain(f, omega, v)?)
    };
    match (qlambda(1.0), qlambda(1e9)) {
        (Ok(a), Ok(b)) => {
            let err = ((a - b) / a).abs();
            c.expect(err <= 1e-10, format!("qλ V-dependence {err:.1e}"));
        }
        (Err(e), _) | (_, Err(e)) => c.error("qλ", e),
    }
}

fn typo_detection(c: &mut Check) {
    let scan = |conv| -> crate::Result<f64> {
        let mut lowest = f64::INFINITY;
        for i in 1..6283 {
            lowest = lowest.min(vacuum_variance(1.0, 1.0, i as f64 * 1e-3, conv)?);
        }
        Ok(lowest)
    };
    match (scan(PhaseConvention::PaperPrinted), scan(PhaseConvention::OracleCorrected)) {
        (Ok(printed), Ok(corrected)) => {
            c.expect(printed >= 1.0, format!("printed min {printed:.10}"));
            c.expect(corrected < 0.7, format!("corrected min {corrected:.6}"));
        }
        (Err(e), _) | (_, Err(e)) => c.error("scan", e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fast_criteria_pass() {
        let opts = AcceptanceOptions::default();
        for id in [1, 2, 5, 8, 9, 10] {
            let r = run_criterion(id, &opts);
            assert!(r.passed, "{r}");
        }
    }

    #[test]
    fn printed_convention_breaks_the_minimum() {
        let opts = AcceptanceOptions {
            convention: PhaseConvention::PaperPrinted,
            ..Default::default()
        };
        let r = run_criterion(1, &opts);
        assert!(!r.passed, "{r}");
        assert!(run_criterion(10, &opts).passed);
    }

    #[test]
    fn display_has_one_line() {
        let r = run_criterion(9, &AcceptanceOptions::default());
        let line = r.to_string();
        assert!(line.starts_with("[PASS]  9 constants:"), "{line}");
        assert!(!line.contains('\n'));
    }
}
