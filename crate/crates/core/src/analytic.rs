//! Closed-form observables of the optical quadrature `a + a†`.
//!
//! Everything here is a pure function of its arguments. Quadratures are
//! evaluated in the frame co-rotating with the cavity unless a [`Frame`]
//! says otherwise. Where the published closed forms and the exact algebra
//! disagree, both are available behind a variant enum and the exact one is
//! the default.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64 as C64;

use crate::error::{require_non_negative, require_positive, Error, Result};
use crate::params::{Flagged, DEFAULT_LN_CUTOFF_RATIO};

/// Which form of the vacuum variance to evaluate.
///
/// The two differ only in the argument of the first cosine: `F + α² sin 2F`
/// as printed, `2F + α² sin 2F` after correction. Only the corrected form
/// agrees with numerical propagation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum PhaseConvention {
    PaperPrinted,
    #[default]
    OracleCorrected,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub enum Frame {
    /// Co-rotating with the cavity frequency.
    #[default]
    Rotating,
    /// Laboratory frame; `⟨a⟩` picks up `e^{−iω0 t}`.
    Lab { omega0: f64 },
}

impl Frame {
    fn phase(&self, t: f64) -> C64 {
        match *self {
            Frame::Rotating => C64::new(1.0, 0.0),
            Frame::Lab { omega0 } => C64::from_polar(1.0, -omega0 * t),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Frame::Rotating => Ok(()),
            Frame::Lab { omega0 } => require_positive("omega0", omega0),
        }
    }
}

/// Phase of the coherent-wave quadrature oscillation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum CoherentPhase {
    /// `2qλ sin Ωt`, from the exact overlap of displaced coherent states.
    #[default]
    Exact,
    /// `qλ sin Ωt`, half the exact value.
    PaperPrinted,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum SqueezedVariant {
    /// Uses `S†D(β)S = D(β cosh ξ0 + β* e^{iθ} sinh ξ0)`.
    #[default]
    ExactIdentity,
    /// Large-squeezing shortcut `2α(1 − 8q²e^{2ξ0} sin⁴(Ωt/2))`.
    PaperApprox,
}

/// `γ` and the Kerr phase `A` of one gravitational mode at time `t`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KerrFactors {
    pub gamma: C64,
    pub a: f64,
    pub q: f64,
    pub omega: f64,
    pub t: f64,
}

impl KerrFactors {
    pub fn new(q: f64, omega: f64, t: f64) -> Result<Self> {
        Ok(KerrFactors {
            gamma: gamma_of(omega, t),
            a: kerr_phase(q, omega, t)?,
            q,
            omega,
            t,
        })
    }
}

/// Leading-order multi-mode vacuum estimates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VacuumEstimates {
    /// Accumulated Kerr phase.
    pub f: f64,
    /// Damping factor in `(0, 1]`.
    pub d: f64,
    pub ln_ratio: f64,
}

impl VacuumEstimates {
    pub fn new(omega0: f64, epl: f64, ln_ratio: f64, t: f64) -> Result<Self> {
        Ok(VacuumEstimates {
            f: f_estimate(omega0, epl, t)?,
            d: damping_worst_case(omega0, epl, ln_ratio)?,
            ln_ratio,
        })
    }

    pub fn with_default_cutoff(omega0: f64, epl: f64, t: f64) -> Result<Self> {
        Self::new(omega0, epl, DEFAULT_LN_CUTOFF_RATIO, t)
    }
}

/// `γ = 1 − e^{iΩt}`.
pub fn gamma_of(omega: f64, t: f64) -> C64 {
    C64::new(1.0, 0.0) - C64::from_polar(1.0, omega * t)
}

/// `A = 2q²(Ωt − sin Ωt)`.
pub fn kerr_phase(q: f64, omega: f64, t: f64) -> Result<f64> {
    if t < 0.0 || t.is_nan() {
        return Err(Error::NegativeTime(t));
    }
    let x = omega * t;
    Ok(2.0 * q * q * (x - x.sin()))
}

fn require_sub_planck(omega0: f64, epl: f64) -> Result<()> {
    require_positive("omega0", omega0)?;
    require_positive("Epl", epl)?;
    if omega0 >= epl {
        return Err(Error::invalid("omega0", format!("{omega0:e} must be below Epl = {epl:e}")));
    }
    Ok(())
}

/// Multi-mode Kerr phase estimate `F = (ω0/E_pl) ω0 t`.
pub fn f_estimate(omega0: f64, epl: f64, t: f64) -> Result<f64> {
    require_sub_planck(omega0, epl)?;
    if t < 0.0 || t.is_nan() {
        return Err(Error::NegativeTime(t));
    }
    Ok(omega0 / epl * omega0 * t)
}

/// Worst-case vacuum damping `D = exp(−(ω0/E_pl)² lnRatio)`.
pub fn damping_worst_case(omega0: f64, epl: f64, ln_ratio: f64) -> Result<f64> {
    Ok((-damping_exponent(omega0, epl, ln_ratio)?).exp())
}

/// `1 − D`, kept accurate when `D` rounds to 1.
pub fn damping_worst_case_deficit(omega0: f64, epl: f64, ln_ratio: f64) -> Result<f64> {
    Ok(-(-damping_exponent(omega0, epl, ln_ratio)?).exp_m1())
}

fn damping_exponent(omega0: f64, epl: f64, ln_ratio: f64) -> Result<f64> {
    require_sub_planck(omega0, epl)?;
    require_positive("lnRatio", ln_ratio)?;
    Ok((omega0 / epl).powi(2) * ln_ratio)
}

/// Vacuum overlap `⟨0|−qγ⟩ = exp(−q²|γ|²/2)`.
pub fn damping_single_mode(q: f64, omega: f64, t: f64) -> f64 {
    (-0.5 * q * q * gamma_of(omega, t).norm_sqr()).exp()
}

fn check_vacuum_args(alpha: f64, d: f64) -> Result<()> {
    require_non_negative("alpha", alpha)?;
    if !(d > 0.0 && d <= 1.0) {
        return Err(Error::invalid("D", format!("must lie in (0, 1], got {d}")));
    }
    Ok(())
}

/// `2αD e^{−α²(1−cos F)} cos(F/2 + α² sin F)`.
pub fn vacuum_mean_quadrature(alpha: f64, d: f64, f: f64) -> Result<f64> {
    check_vacuum_args(alpha, d)?;
    let a2 = alpha * alpha;
    Ok(2.0 * alpha * d * (-a2 * (1.0 - f.cos())).exp() * (f / 2.0 + a2 * f.sin()).cos())
}

/// Variance of `a + a†` for a coherent optical state under vacuum
/// gravitational fluctuations.
pub fn vacuum_variance(alpha: f64, d: f64, f: f64, conv: PhaseConvention) -> Result<f64> {
    check_vacuum_args(alpha, d)?;
    let a2 = alpha * alpha;
    let d2 = d * d;
    let first_arg = match conv {
        PhaseConvention::PaperPrinted => f + a2 * (2.0 * f).sin(),
        PhaseConvention::OracleCorrected => 2.0 * f + a2 * (2.0 * f).sin(),
    };
    let decay = (-2.0 * a2 * (1.0 - f.cos())).exp();
    let second = 2.0 * a2 * (-a2 * (1.0 - (2.0 * f).cos())).exp() * d2 * first_arg.cos();
    let mean_sq = 2.0 * a2 * d2 * decay * (f + 2.0 * a2 * f.sin()).cos();
    Ok(second - mean_sq + 2.0 * a2 * (1.0 - d2 * decay) + 1.0)
}

/// Exact single-mode moments for a coherent optical state `|α⟩` and a
/// vacuum gravitational mode.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Moments {
    /// `⟨a + a†⟩`.
    pub mean: f64,
    /// `⟨(a + a†)²⟩ − ⟨a + a†⟩²`.
    pub variance: f64,
    /// `⟨a⟩`.
    pub amplitude: C64,
    /// `⟨a²⟩`.
    pub second_moment: C64,
    /// `⟨a†a⟩`, conserved.
    pub photon_number: f64,
}

impl Moments {
    fn from_parts(amplitude: C64, second_moment: C64, photon_number: f64) -> Self {
        let mean = 2.0 * amplitude.re;
        Moments {
            mean,
            variance: 2.0 * second_moment.re + 2.0 * photon_number + 1.0 - mean * mean,
            amplitude,
            second_moment,
            photon_number,
        }
    }
}

/// `⟨a⟩ = α e^{iA/2} e^{α²(e^{iA}−1)} e^{−q²|γ|²/2}` and
/// `⟨a²⟩ = α² e^{2iA} e^{α²(e^{2iA}−1)} e^{−2q²|γ|²}`.
pub fn single_mode_exact_moments(
    alpha: f64,
    q: f64,
    omega: f64,
    t: f64,
    frame: Frame,
) -> Result<Moments> {
    require_non_negative("alpha", alpha)?;
    frame.validate()?;
    let k = KerrFactors::new(q, omega, t)?;
    let a2 = alpha * alpha;
    let g2 = k.gamma.norm_sqr();
    let i = C64::i();
    let one = C64::new(1.0, 0.0);
    let rot = frame.phase(t);
    let amplitude = alpha
        * (i * (k.a / 2.0) + a2 * ((i * k.a).exp() - one)).exp()
        * (-0.5 * q * q * g2).exp()
        * rot;
    let second = a2
        * (i * (2.0 * k.a) + a2 * ((i * (2.0 * k.a)).exp() - one)).exp()
        * (-2.0 * q * q * g2).exp()
        * rot
        * rot;
    Ok(Moments::from_parts(amplitude, second, a2))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VarianceMinimum {
    pub f0: f64,
    pub var_min: f64,
}

const SCAN_STEP: f64 = 1e-3;
const REFINE_TOL: f64 = 1e-6;

/// First local minimum of [`vacuum_variance`] over `F ∈ (0, 2π]`.
///
/// The variance is sampled every 1e-3; the first sample where the forward
/// difference turns from negative to non-negative brackets the minimum,
/// which golden-section search then narrows to 1e-6.
pub fn first_variance_minimum(alpha: f64, d: f64, conv: PhaseConvention) -> Result<VarianceMinimum> {
    require_positive("alpha", alpha)?;
    check_vacuum_args(alpha, d)?;
    let var = |f: f64| vacuum_variance(alpha, d, f, conv).expect("arguments validated above");
    let steps = (TAU / SCAN_STEP).floor() as usize;
    let grid = |i: usize| (i as f64 * SCAN_STEP).min(TAU);
    let mut prev = var(grid(1));
    let mut prev_diff: Option<f64> = None;
    for i in 1..steps {
        let next = var(grid(i + 1));
        let diff = next - prev;
        if matches!(prev_diff, Some(p) if p < 0.0) && diff >= 0.0 {
            let (f0, var_min) = golden_section(&var, grid(i - 1), grid(i + 1));
            return Ok(VarianceMinimum { f0, var_min });
        }
        prev_diff = Some(diff);
        prev = next;
    }
    Err(Error::NoMinimumFound)
}

fn golden_section(f: &impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > REFINE_TOL {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        }
    }
    let x = 0.5 * (lo + hi);
    (x, f(x))
}

/// Mean quadrature with the gravitational mode in the coherent state
/// `|λ e^{iΩt}⟩`: `2α e^{−q²|γ|²/2} cos(k qλ sin Ωt)`, `k` set by `phase`.
pub fn coherent_gw_mean_quadrature(
    alpha: f64,
    q: f64,
    lambda: f64,
    omega: f64,
    t: f64,
    phase: CoherentPhase,
) -> Result<f64> {
    require_non_negative("alpha", alpha)?;
    require_non_negative("lambda", lambda)?;
    let k = match phase {
        CoherentPhase::Exact => 2.0,
        CoherentPhase::PaperPrinted => 1.0,
    };
    Ok(2.0 * alpha * damping_single_mode(q, omega, t) * (k * q * lambda * (omega * t).sin()).cos())
}

/// Optical phase oscillation `qλ sin Ωt`.
pub fn phase_shift(q: f64, lambda: f64, omega: f64, t: f64) -> f64 {
    q * lambda * (omega * t).sin()
}

/// Threshold on `8q²e^{2ξ0}` above which the squeezed-wave expansion is
/// flagged.
pub const SQUEEZED_DOMAIN_LIMIT: f64 = 0.1;

/// Mean quadrature with the gravitational mode in a squeezed vacuum of
/// magnitude `ξ0` and phase `θ = 2Ωt`.
pub fn squeezed_gw_mean_quadrature(
    alpha: f64,
    q: f64,
    xi0: f64,
    omega: f64,
    t: f64,
    variant: SqueezedVariant,
) -> Result<Flagged> {
    require_non_negative("alpha", alpha)?;
    require_non_negative("xi0", xi0)?;
    let out_of_domain = 8.0 * q * q * (2.0 * xi0).exp() > SQUEEZED_DOMAIN_LIMIT;
    let value = match variant {
        SqueezedVariant::ExactIdentity => {
            let gamma = gamma_of(omega, t);
            let theta = 2.0 * omega * t;
            let mu = -q * (gamma * xi0.cosh() + gamma.conj() * C64::from_polar(xi0.sinh(), theta));
            2.0 * alpha * (-0.5 * mu.norm_sqr()).exp()
        }
        SqueezedVariant::PaperApprox => {
            let s = (0.5 * omega * t).sin();
            2.0 * alpha * (1.0 - 8.0 * q * q * (2.0 * xi0).exp() * s.powi(4))
        }
    };
    Ok(Flagged {
        value,
        out_of_domain,
    })
}

/// Amplitude `8(ω0/E_pl)²(υ/Ω)⁴` of the squeezed-relic correction.
pub fn squeezed_prefactor(omega0: f64, epl: f64, upsilon: f64, omega: f64) -> Result<f64> {
    require_positive("omega0", omega0)?;
    require_positive("Epl", epl)?;
    require_positive("upsilon", upsilon)?;
    require_positive("Omega", omega)?;
    Ok(8.0 * (omega0 / epl).powi(2) * (upsilon / omega).powi(4))
}

/// Worst-case thermal damping `exp(−4q²(2n̄+1))`.
pub fn thermal_damping(q: f64, nbar: f64) -> Result<f64> {
    Ok((-thermal_exponent(q, nbar)?).exp())
}

/// `1 − thermal_damping`, accurate when the damping rounds to 1.
pub fn thermal_damping_deficit(q: f64, nbar: f64) -> Result<f64> {
    Ok(-(-thermal_exponent(q, nbar)?).exp_m1())
}

fn thermal_exponent(q: f64, nbar: f64) -> Result<f64> {
    require_non_negative("nbar", nbar)?;
    if !q.is_finite() {
        return Err(Error::invalid("q", "must be finite"));
    }
    Ok(4.0 * q * q * (2.0 * nbar + 1.0))
}

/// Times `(2m+1)π/Ω` at which both squeezed variants are smallest.
pub fn squeezed_minimum_time(omega: f64, m: u32) -> f64 {
    (2 * m + 1) as f64 * PI / omega
}
