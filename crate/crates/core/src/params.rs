//! Physical constants and the maps from laboratory quantities to model
//! couplings.
//!
//! The public API is SI: angular frequencies in rad/s, volumes in m³,
//! temperatures in K. Internally the model works in natural units, and the
//! conversion happens here so the rest of the crate only sees dimensionless
//! couplings (`q`, `λ`, `ξ0`, `n̄`).

use std::f64::consts::PI;

use crate::error::{require_non_negative, require_positive, Error, Result};

/// Ratio between the optical phase amplitude `(ω0/Ω) f` and the product
/// `q λ` built from [`PhysicalConstants::coupling_q`] and
/// [`PhysicalConstants::coherent_amplitude_from_strain`].
pub const PHASE_CALIBRATION: f64 = 4.0;

/// Default `ln(E_pl / E_IR)`, the Hubble-to-Planck cutoff logarithm.
pub const DEFAULT_LN_CUTOFF_RATIO: f64 = 62.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhysicalConstants {
    /// Newton's constant, m³ kg⁻¹ s⁻².
    pub g: f64,
    /// Reduced Planck constant, J s.
    pub hbar: f64,
    /// Boltzmann constant, J/K.
    pub k_b: f64,
    /// Speed of light, m/s.
    pub c: f64,
    pub ln_cutoff_ratio: f64,
    epl: f64,
}

impl Default for PhysicalConstants {
    /// CODATA 2018.
    fn default() -> Self {
        PhysicalConstants::new(6.674_30e-11, 1.054_571_817e-34, 1.380_649e-23, 299_792_458.0)
            .expect("CODATA constants are valid")
    }
}

impl PhysicalConstants {
    pub fn new(g: f64, hbar: f64, k_b: f64, c: f64) -> Result<Self> {
        require_positive("G", g)?;
        require_positive("hbar", hbar)?;
        require_positive("kB", k_b)?;
        require_positive("c", c)?;
        Ok(PhysicalConstants {
            g,
            hbar,
            k_b,
            c,
            ln_cutoff_ratio: DEFAULT_LN_CUTOFF_RATIO,
            // explicit product: powi may round differently when constant-folded
            epl: (c * c * c * c * c / (hbar * g)).sqrt(),
        })
    }

    /// Parses `key = value` overrides on top of the CODATA defaults.
    ///
    /// Recognized keys: `G`, `hbar`, `kB`, `c`, `lnCutoffRatio`, and `Epl`
    /// (accepted only if it agrees with the other constants to 1e-6).
    /// Blank lines and `#` comments are ignored.
    pub fn from_overrides(text: &str) -> Result<Self> {
        let base = PhysicalConstants::default();
        let (mut g, mut hbar, mut k_b, mut c) = (base.g, base.hbar, base.k_b, base.c);
        let mut ln_ratio = base.ln_cutoff_ratio;
        let mut epl = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::invalid("constants", format!("line {}: expected `key = value`", lineno + 1))
            })?;
            let value: f64 = value.trim().parse().map_err(|_| {
                Error::invalid(
                    "constants",
                    format!("line {}: `{}` is not a number", lineno + 1, value.trim()),
                )
            })?;
            match key.trim() {
                "G" => g = value,
                "hbar" => hbar = value,
                "kB" => k_b = value,
                "c" => c = value,
                "lnCutoffRatio" => ln_ratio = value,
                "Epl" => epl = Some(value),
                other => {
                    return Err(Error::invalid(
                        "constants",
                        format!("line {}: unknown key `{other}`", lineno + 1),
                    ))
                }
            }
        }
        let mut consts = PhysicalConstants::new(g, hbar, k_b, c)?;
        require_positive("lnCutoffRatio", ln_ratio)?;
        consts.ln_cutoff_ratio = ln_ratio;
        if let Some(given) = epl {
            let rel = (given - consts.epl).abs() / consts.epl;
            if rel > 1e-6 {
                return Err(Error::invalid(
                    "Epl",
                    format!("{given:e} disagrees with √(c⁵/ħG) = {:e}", consts.epl),
                ));
            }
        }
        Ok(consts)
    }

    /// Planck angular frequency `√(c⁵/(ħG))`, rad/s.
    pub fn planck_frequency(&self) -> f64 {
        self.epl
    }

    /// Strain at which a wave of angular frequency `omega` in volume `v`
    /// carries exactly one graviton: `√(32πGħ/(c²ΩV))`.
    pub fn single_graviton_strain(&self, omega: f64, v: f64) -> Result<f64> {
        require_positive("Omega", omega)?;
        require_positive("V", v)?;
        Ok((32.0 * PI * self.g * self.hbar / (self.c * self.c * omega * v)).sqrt())
    }

    /// Mean graviton number of a wave of strain `f`:
    /// energy density `c²Ω²f²/(32πG)` times `V`, over `ħΩ`.
    pub fn graviton_number_from_strain(&self, f: f64, omega: f64, v: f64) -> Result<f64> {
        require_non_negative("f", f)?;
        require_positive("Omega", omega)?;
        require_positive("V", v)?;
        Ok(self.c * self.c * omega * f * f * v / (32.0 * PI * self.g * self.hbar))
    }

    /// Coherent amplitude `λ = √⟨N⟩` of a wave of strain `f`.
    pub fn coherent_amplitude_from_strain(&self, f: f64, omega: f64, v: f64) -> Result<f64> {
        Ok(self.graviton_number_from_strain(f, omega, v)?.sqrt())
    }

    /// Dimensionless coupling `q = ω0 f₁ / (4Ω)` with `f₁` the single-graviton
    /// strain of the mode.
    pub fn coupling_q(&self, omega0: f64, omega: f64, v: f64) -> Result<f64> {
        require_positive("omega0", omega0)?;
        Ok(omega0 * self.single_graviton_strain(omega, v)? / (4.0 * omega))
    }

    /// Upper bound on the coupling, `ω0 / E_pl`.
    pub fn q_max(&self, omega0: f64) -> Result<f64> {
        require_positive("omega0", omega0)?;
        Ok(omega0 / self.epl)
    }

    /// Bose–Einstein occupation `1/(e^{ħΩ/k_BT} − 1)`.
    pub fn nbar(&self, omega: f64, temperature: f64) -> Result<f64> {
        require_positive("Omega", omega)?;
        require_positive("T", temperature)?;
        let x = self.hbar * omega / (self.k_b * temperature);
        Ok(1.0 / x.exp_m1())
    }
}

/// First-order shifted cavity frequency `ω0(1 − h/2)` for strain `h`.
pub fn shifted_cavity_frequency(omega0: f64, h: f64) -> Result<f64> {
    Ok(omega0 + cavity_frequency_shift(omega0, h)?)
}

/// Frequency shift `−ω0 h / 2`, rad/s.
pub fn cavity_frequency_shift(omega0: f64, h: f64) -> Result<f64> {
    require_positive("omega0", omega0)?;
    if !h.is_finite() || h.abs() > 1e-2 {
        return Err(Error::StrainTooLarge(h));
    }
    Ok(-0.5 * omega0 * h)
}

/// Optical phase amplitude `(ω0/Ω) f` imprinted by a wave of strain `f`.
pub fn strain_phase_amplitude(omega0: f64, omega: f64, f: f64) -> Result<f64> {
    require_positive("omega0", omega0)?;
    require_positive("Omega", omega)?;
    require_non_negative("f", f)?;
    Ok(omega0 / omega * f)
}

/// Squeezing frequency scale `υ = 10⁹ √(H / 10⁻⁴ M_pl)` in Hz, from the
/// Hubble rate during inflation in Planck-mass units.
pub fn upsilon_of_hubble(h_over_mpl: f64) -> Result<f64> {
    require_positive("H_over_Mpl", h_over_mpl)?;
    Ok(1e9 * (h_over_mpl / 1e-4).sqrt())
}

/// Value carrying an optional flag that an approximation is being used
/// outside the regime it was derived for.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Flagged {
    pub value: f64,
    pub out_of_domain: bool,
}

/// Relic squeezing parameter `ξ0 = asinh((υ/Ω)²/2)`, both frequencies in Hz.
///
/// The relation is a large-squeezing (super-horizon) statement; results with
/// `ξ0 < 3` come back flagged.
pub fn xi0_from_frequency(upsilon: f64, omega: f64) -> Result<Flagged> {
    require_positive("upsilon", upsilon)?;
    require_positive("Omega", omega)?;
    let half_ratio_sq = (upsilon / omega).powi(2) / 2.0;
    if half_ratio_sq < 1.0 {
        return Err(Error::invalid(
            "upsilon",
            format!("(υ/Ω)²/2 = {half_ratio_sq} < 1 is outside the squeezed branch"),
        ));
    }
    let value = half_ratio_sq.asinh();
    Ok(Flagged {
        value,
        out_of_domain: value < 3.0,
    })
}

/// Back-of-the-envelope interferometer phase `b · (2πℓ0/λ) · f`.
pub fn ligo_phase_estimate(bounces: u32, ell0: f64, lambda_opt: f64, f: f64) -> Result<f64> {
    if bounces == 0 {
        return Err(Error::invalid("b", "bounce count must be positive"));
    }
    require_positive("ell0", ell0)?;
    require_positive("lambda_opt", lambda_opt)?;
    require_non_negative("f", f)?;
    Ok(bounces as f64 * 2.0 * PI * ell0 / lambda_opt * f)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CavityConfig {
    /// Optical angular frequency, rad/s.
    pub omega0: f64,
    /// Cavity length, m.
    pub ell0: f64,
    /// Real coherent amplitude of the cavity field.
    pub alpha: f64,
}

impl CavityConfig {
    pub fn new(omega0: f64, ell0: f64, alpha: f64, consts: &PhysicalConstants) -> Result<Self> {
        require_positive("omega0", omega0)?;
        require_positive("ell0", ell0)?;
        require_positive("alpha", alpha)?;
        if omega0 >= consts.planck_frequency() {
            return Err(Error::invalid("omega0", "must be below the Planck frequency"));
        }
        Ok(CavityConfig { omega0, ell0, alpha })
    }
}

/// Quantum state of one gravitational mode.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum GwModeState {
    Vacuum,
    Coherent { lambda: f64 },
    Squeezed { xi0: f64 },
    ThermalEstimate { nbar: f64 },
}

impl GwModeState {
    pub fn validate(&self) -> Result<()> {
        match *self {
            GwModeState::Vacuum => Ok(()),
            GwModeState::Coherent { lambda } => require_non_negative("lambda", lambda),
            GwModeState::Squeezed { xi0 } => require_non_negative("xi0", xi0),
            GwModeState::ThermalEstimate { nbar } => require_non_negative("nbar", nbar),
        }
    }
}

/// How a mode's coupling is specified.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Coupling {
    /// Quantization volume in m³; `q` follows from [`PhysicalConstants::coupling_q`].
    Volume(f64),
    Direct(f64),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GwModeConfig {
    /// Angular frequency, rad/s.
    pub omega: f64,
    pub coupling: Coupling,
    pub state: GwModeState,
}

impl GwModeConfig {
    /// Resolved dimensionless coupling for a cavity at `omega0`.
    pub fn q(&self, omega0: f64, consts: &PhysicalConstants) -> Result<f64> {
        require_positive("Omega", self.omega)?;
        self.state.validate()?;
        let q = match self.coupling {
            Coupling::Direct(q) => q,
            Coupling::Volume(v) => consts.coupling_q(omega0, self.omega, v)?,
        };
        if !(0.0..1.0).contains(&q) {
            return Err(Error::invalid("q", format!("must lie in [0, 1), got {q}")));
        }
        Ok(q)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    const OMEGA0_OPTICAL: f64 = 1.77e15;

    #[test]
    fn planck_frequency_matches_constants() {
        let k = PhysicalConstants::default();
        let direct = (k.c.powi(5) / (k.hbar * k.g)).sqrt();
        assert_relative_eq!(k.planck_frequency(), direct, max_relative = 1e-6);
        assert_relative_eq!(k.planck_frequency(), 1.855e43, max_relative = 1e-3);
        assert_eq!(k.ln_cutoff_ratio, 62.0);
    }

    #[test]
    fn overrides_parse_and_validate() {
        let k = PhysicalConstants::from_overrides("# tweak\nG = 6.7e-11\nlnCutoffRatio=60\n").unwrap();
        assert_eq!(k.g, 6.7e-11);
        assert_eq!(k.ln_cutoff_ratio, 60.0);
        assert_eq!(PhysicalConstants::from_overrides("").unwrap(), PhysicalConstants::default());
        assert!(PhysicalConstants::from_overrides("G 1").is_err());
        assert!(PhysicalConstants::from_overrides("G = x").is_err());
        assert!(PhysicalConstants::from_overrides("mass = 1").is_err());
        assert!(PhysicalConstants::from_overrides("G = -1").is_err());
        let epl = PhysicalConstants::default().planck_frequency();
        assert!(PhysicalConstants::from_overrides(&format!("Epl = {epl}")).is_ok());
        assert!(PhysicalConstants::from_overrides(&format!("Epl = {}", epl * 1.01)).is_err());
    }

    #[test]
    fn frequency_shift_first_order() {
        assert_eq!(shifted_cavity_frequency(OMEGA0_OPTICAL, 0.0).unwrap(), OMEGA0_OPTICAL);
        let shift = cavity_frequency_shift(OMEGA0_OPTICAL, 1e-21).unwrap();
        assert_relative_eq!(shift, -8.85e-7, max_relative = 1e-12);
        assert_eq!(cavity_frequency_shift(OMEGA0_OPTICAL, -1e-21).unwrap(), -shift);
        assert!(matches!(
            cavity_frequency_shift(OMEGA0_OPTICAL, 0.1),
            Err(Error::StrainTooLarge(_))
        ));
    }

    #[test]
    fn single_graviton_strain_scaling_and_energy() {
        let k = PhysicalConstants::default();
        let omega = 2.0 * PI * 100.0;
        let f1 = k.single_graviton_strain(omega, 1.0).unwrap();
        let f4 = k.single_graviton_strain(omega, 4.0).unwrap();
        assert_relative_eq!(f1 / f4, 2.0, max_relative = 1e-12);
        assert_relative_eq!(
            k.graviton_number_from_strain(f1, omega, 1.0).unwrap(),
            1.0,
            max_relative = 1e-10
        );
        // energy density c²Ω²f²/(32πG) over V holds one quantum ħΩ
        let v = 3.5e3;
        let f = k.single_graviton_strain(omega, v).unwrap();
        let energy = k.c * k.c * omega * omega * f * f / (32.0 * PI * k.g) * v;
        assert_relative_eq!(energy, k.hbar * omega, max_relative = 1e-10);
    }

    #[test]
    fn graviton_number_quadratic_in_strain() {
        let k = PhysicalConstants::default();
        let n1 = k.graviton_number_from_strain(1e-21, 600.0, 1e6).unwrap();
        let n2 = k.graviton_number_from_strain(2e-21, 600.0, 1e6).unwrap();
        assert_relative_eq!(n2 / n1, 4.0, max_relative = 1e-12);
        assert!(k.graviton_number_from_strain(1e-21, 0.0, 1.0).is_err());
    }

    #[test]
    fn phase_amplitude_calibration_is_four_and_volume_free() {
        let k = PhysicalConstants::default();
        let omega = 2.0 * PI * 100.0;
        let f = 1e-21;
        let target = strain_phase_amplitude(OMEGA0_OPTICAL, omega, f).unwrap();
        assert_relative_eq!(target, 2.817e-9, max_relative = 1e-3);
        for v in [1.0, 10.0, 1e2, 1e3, 1e6, 1e9] {
            let q = k.coupling_q(OMEGA0_OPTICAL, omega, v).unwrap();
            let lambda = k.coherent_amplitude_from_strain(f, omega, v).unwrap();
            assert_relative_eq!(q * lambda * PHASE_CALIBRATION, target, max_relative = 1e-10);
        }
    }

    #[test]
    fn q_max_values() {
        let k = PhysicalConstants::default();
        assert_eq!(k.q_max(k.planck_frequency()).unwrap(), 1.0);
        assert_relative_eq!(k.q_max(OMEGA0_OPTICAL).unwrap(), 9.5e-29, max_relative = 0.02);
    }

    #[test]
    fn coupling_scales_as_inverse_three_halves() {
        let k = PhysicalConstants::default();
        let q1 = k.coupling_q(OMEGA0_OPTICAL, 10.0, 1e3).unwrap();
        let q2 = k.coupling_q(OMEGA0_OPTICAL, 40.0, 1e3).unwrap();
        assert_relative_eq!(q1 / q2, 4f64.powf(1.5), max_relative = 1e-12);
    }

    #[test]
    fn nbar_values() {
        let k = PhysicalConstants::default();
        // ħΩ/k_BT = ln 2
        let t = 1.0;
        let omega = 2f64.ln() * k.k_b * t / k.hbar;
        assert_relative_eq!(k.nbar(omega, t).unwrap(), 1.0, max_relative = 1e-12);
        let n = k.nbar(2.0 * PI * 10.0, 1.0).unwrap();
        assert_relative_eq!(n, 2.08e9, max_relative = 0.01);
        assert!(k.nbar(2.0 * PI * 10.0, 1e-3).unwrap() < n);
        assert!(k.nbar(1e15, 1e-3).unwrap() < 1e-300);
        assert!(k.nbar(1.0, 0.0).is_err());
    }

    #[test]
    fn upsilon_values() {
        assert_relative_eq!(upsilon_of_hubble(1e-4).unwrap(), 1e9, max_relative = 1e-12);
        assert_relative_eq!(upsilon_of_hubble(1e-6).unwrap(), 1e8, max_relative = 1e-12);
        assert_relative_eq!(upsilon_of_hubble(4e-4).unwrap(), 2e9, max_relative = 1e-12);
        assert!(upsilon_of_hubble(0.0).is_err());
    }

    #[test]
    fn xi0_inverse_and_large_ratio() {
        let ratio = (2.0 * 5f64.sinh()).sqrt();
        let xi = xi0_from_frequency(ratio, 1.0).unwrap();
        assert_relative_eq!(xi.value, 5.0, max_relative = 1e-12);
        assert!(!xi.out_of_domain);
        let xi = xi0_from_frequency(1e9, 0.1).unwrap();
        assert_relative_eq!(xi.value, (1e20f64).ln(), max_relative = 1e-12);
        assert_relative_eq!(xi.value, 46.05, max_relative = 1e-3);
        let small = xi0_from_frequency(2.0, 1.0).unwrap();
        assert!(small.out_of_domain);
        assert!(xi0_from_frequency(1.0, 1.0).is_err());
    }

    #[test]
    fn ligo_estimate() {
        let p = ligo_phase_estimate(200, 4000.0, 1.064e-6, 1e-21).unwrap();
        assert_relative_eq!(p, 4.7e-9, max_relative = 0.01);
        let single = ligo_phase_estimate(1, 4000.0, 1.064e-6, 1e-21).unwrap();
        assert_relative_eq!(single, p / 200.0, max_relative = 1e-12);
        assert_relative_eq!(single, 2.36e-11, max_relative = 0.01);
        assert_eq!(ligo_phase_estimate(200, 4000.0, 1.064e-6, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn mode_config_resolves_coupling() {
        let k = PhysicalConstants::default();
        let direct = GwModeConfig {
            omega: 1.0,
            coupling: Coupling::Direct(0.1),
            state: GwModeState::Vacuum,
        };
        assert_eq!(direct.q(1.0, &k).unwrap(), 0.1);
        let bad = GwModeConfig {
            coupling: Coupling::Direct(1.5),
            ..direct
        };
        assert!(bad.q(1.0, &k).is_err());
        let vol = GwModeConfig {
            omega: 600.0,
            coupling: Coupling::Volume(1e3),
            state: GwModeState::Coherent { lambda: 2.0 },
        };
        assert_eq!(
            vol.q(OMEGA0_OPTICAL, &k).unwrap(),
            k.coupling_q(OMEGA0_OPTICAL, 600.0, 1e3).unwrap()
        );
        let neg = GwModeConfig {
            state: GwModeState::Squeezed { xi0: -1.0 },
            ..vol
        };
        assert!(neg.q(OMEGA0_OPTICAL, &k).is_err());
    }

    #[test]
    fn cavity_config_bounds() {
        let k = PhysicalConstants::default();
        assert!(CavityConfig::new(OMEGA0_OPTICAL, 4000.0, 1.0, &k).is_ok());
        assert!(CavityConfig::new(2e43, 4000.0, 1.0, &k).is_err());
        assert!(CavityConfig::new(OMEGA0_OPTICAL, 0.0, 1.0, &k).is_err());
    }

    proptest! {
        #[test]
        fn strain_number_round_trip(log_omega in 0.0f64..4.0, log_v in 0.0f64..9.0) {
            let k = PhysicalConstants::default();
            let omega = 10f64.powf(log_omega);
            let v = 10f64.powf(log_v);
            let f = k.single_graviton_strain(omega, v).unwrap();
            let n = k.graviton_number_from_strain(f, omega, v).unwrap();
            prop_assert!((n - 1.0).abs() <= 1e-10);
        }

        #[test]
        fn nbar_monotone(omega in 1.0f64..1e3, t in 0.1f64..10.0) {
            let k = PhysicalConstants::default();
            let n = k.nbar(omega, t).unwrap();
            prop_assert!(k.nbar(omega * 1.1, t).unwrap() < n);
            prop_assert!(k.nbar(omega, t * 1.1).unwrap() > n);
        }
    }
}
