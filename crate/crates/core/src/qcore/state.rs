use ndarray::Array1;
use num_complex::Complex64 as C64;

use super::{
    annihilation, describe_space, matrix_exp, product_dim, Dim, OperatorMatrix, Tolerances,
    DEFAULT_GUARD_LEVELS,
};
use crate::error::{Error, Result};

/// Normalized amplitude vector over a truncated product space.
#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    space: Vec<Dim>,
    amplitudes: Array1<C64>,
    discarded_mass: f64,
    tail_flagged: bool,
}

impl StateVector {
    /// Normalizes `amplitudes`; fails on a zero or non-finite vector.
    pub fn from_amplitudes(space: Vec<Dim>, amplitudes: Array1<C64>) -> Result<Self> {
        Self::build(space, amplitudes, 0.0, Tolerances::default().tail)
    }

    fn build(
        space: Vec<Dim>,
        mut amplitudes: Array1<C64>,
        discarded_mass: f64,
        tail_tolerance: f64,
    ) -> Result<Self> {
        let n = product_dim(&space);
        if amplitudes.len() != n {
            return Err(Error::DimensionMismatch {
                expected: format!("{n} amplitudes for space {}", describe_space(&space)),
                found: amplitudes.len().to_string(),
            });
        }
        let norm = norm_of(&amplitudes);
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::invalid("amplitudes", "state must have finite, non-zero norm"));
        }
        amplitudes.mapv_inplace(|z| z / norm);
        let mut state = StateVector {
            space,
            amplitudes,
            discarded_mass,
            tail_flagged: false,
        };
        state.tail_flagged = state.tail_mass() > tail_tolerance;
        Ok(state)
    }

    /// Fock vacuum of one mode.
    pub fn vacuum(dim: Dim) -> Self {
        let mut amplitudes = Array1::zeros(dim.get());
        amplitudes[0] = C64::new(1.0, 0.0);
        StateVector {
            space: vec![dim],
            amplitudes,
            discarded_mass: 0.0,
            tail_flagged: false,
        }
    }

    pub fn space(&self) -> &[Dim] {
        &self.space
    }

    pub fn amplitudes(&self) -> &Array1<C64> {
        &self.amplitudes
    }

    /// Probability mass the truncation removed before renormalization.
    pub fn discarded_mass(&self) -> f64 {
        self.discarded_mass
    }

    /// True when the mass sitting in the top two levels of some mode exceeds
    /// the tail tolerance the state was built with.
    pub fn is_tail_flagged(&self) -> bool {
        self.tail_flagged
    }

    pub fn norm(&self) -> f64 {
        norm_of(&self.amplitudes)
    }

    pub fn inner(&self, other: &StateVector) -> Result<C64> {
        self.check_space(&other.space)?;
        Ok(self
            .amplitudes
            .iter()
            .zip(other.amplitudes.iter())
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// `self ⊗ other`, `self` on the slower index.
    pub fn tensor(&self, other: &StateVector) -> StateVector {
        let mut space = self.space.clone();
        space.extend_from_slice(&other.space);
        let m = other.amplitudes.len();
        let amplitudes = Array1::from_shape_fn(self.amplitudes.len() * m, |i| {
            self.amplitudes[i / m] * other.amplitudes[i % m]
        });
        StateVector {
            space,
            amplitudes,
            discarded_mass: 1.0 - (1.0 - self.discarded_mass) * (1.0 - other.discarded_mass),
            tail_flagged: self.tail_flagged || other.tail_flagged,
        }
    }

    /// Probability in basis states where any mode sits in its top
    /// [`DEFAULT_GUARD_LEVELS`] levels.
    pub fn tail_mass(&self) -> f64 {
        let dims: Vec<usize> = self.space.iter().map(|d| d.get()).collect();
        let mut digits = vec![0usize; dims.len()];
        let mut mass = 0.0;
        for amp in self.amplitudes.iter() {
            let in_tail = digits
                .iter()
                .zip(&dims)
                .any(|(level, d)| *level + DEFAULT_GUARD_LEVELS >= *d);
            if in_tail {
                mass += amp.norm_sqr();
            }
            for k in (0..dims.len()).rev() {
                digits[k] += 1;
                if digits[k] < dims[k] {
                    break;
                }
                digits[k] = 0;
            }
        }
        mass
    }

    /// `op |ψ⟩` without renormalization.
    pub fn evolve(&self, op: &OperatorMatrix) -> Result<StateVector> {
        self.check_space(op.space())?;
        let amplitudes = op.as_array().dot(&self.amplitudes);
        let mut out = StateVector {
            space: self.space.clone(),
            amplitudes,
            discarded_mass: self.discarded_mass,
            tail_flagged: false,
        };
        out.tail_flagged = out.tail_mass() > Tolerances::default().tail;
        Ok(out)
    }

    pub(crate) fn from_raw(space: Vec<Dim>, amplitudes: Array1<C64>, discarded_mass: f64) -> Self {
        let mut out = StateVector {
            space,
            amplitudes,
            discarded_mass,
            tail_flagged: false,
        };
        out.tail_flagged = out.tail_mass() > Tolerances::default().tail;
        out
    }

    fn check_space(&self, other: &[Dim]) -> Result<()> {
        if self.space != other {
            return Err(Error::DimensionMismatch {
                expected: describe_space(&self.space),
                found: describe_space(other),
            });
        }
        Ok(())
    }
}

fn norm_of(v: &Array1<C64>) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `⟨ψ|M|ψ⟩`.
pub fn expectation(state: &StateVector, op: &OperatorMatrix) -> Result<C64> {
    state.check_space(op.space())?;
    let applied = op.as_array().dot(&state.amplitudes);
    Ok(state
        .amplitudes
        .iter()
        .zip(applied.iter())
        .map(|(a, b)| a.conj() * b)
        .sum())
}

fn ln_factorial_table(n: usize) -> Vec<f64> {
    let mut table = Vec::with_capacity(n + 1);
    let mut acc = 0.0;
    table.push(0.0);
    for k in 1..=n {
        acc += (k as f64).ln();
        table.push(acc);
    }
    table
}

/// Poisson mass `P(N ≥ from)` for mean `mean`, summed in log space.
fn poisson_upper_tail(mean: f64, from: usize) -> f64 {
    if mean == 0.0 {
        return if from == 0 { 1.0 } else { 0.0 };
    }
    let ln_mean = mean.ln();
    let mut ln_fact: f64 = (1..=from).map(|k| (k as f64).ln()).sum();
    let mut total = 0.0;
    let mut k = from;
    loop {
        let term = (-mean + k as f64 * ln_mean - ln_fact).exp();
        total += term;
        // past the mode the terms fall geometrically
        if k as f64 > mean && term < total * 1e-17 {
            break;
        }
        if k > from + 100_000 {
            break;
        }
        k += 1;
        ln_fact += (k as f64).ln();
    }
    total.min(1.0)
}

/// Exact probability that `|α⟩` places above level `dim − 3`.
pub fn coherent_tail_mass(alpha: C64, dim: Dim) -> f64 {
    poisson_upper_tail(alpha.norm_sqr(), dim.get() - DEFAULT_GUARD_LEVELS)
}

/// Coherent state `|α⟩` truncated to `dim` levels and renormalized.
pub fn coherent_state(alpha: C64, dim: Dim) -> Result<StateVector> {
    coherent_state_with(alpha, dim, &Tolerances::default())
}

pub fn coherent_state_with(alpha: C64, dim: Dim, tol: &Tolerances) -> Result<StateVector> {
    if !alpha.re.is_finite() || !alpha.im.is_finite() {
        return Err(Error::invalid("alpha", "must be finite"));
    }
    let tail = coherent_tail_mass(alpha, dim);
    if tail > tol.tail {
        return Err(Error::TailOverflow {
            mass: tail,
            tolerance: tol.tail,
        });
    }
    let n = dim.get();
    let ln_fact = ln_factorial_table(n);
    let mean = alpha.norm_sqr();
    let phase = if mean > 0.0 { alpha / alpha.norm() } else { C64::new(1.0, 0.0) };
    let amplitudes = Array1::from_shape_fn(n, |k| {
        if mean == 0.0 {
            return if k == 0 { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) };
        }
        let ln_mag = -mean / 2.0 + k as f64 * alpha.norm().ln() - 0.5 * ln_fact[k];
        phase.powu(k as u32) * ln_mag.exp()
    });
    let discarded = poisson_upper_tail(mean, n);
    StateVector::build(vec![dim], amplitudes, discarded, tol.tail)
}

/// Squeezed vacuum `S(ξ)|0⟩`, `ξ = r e^{iθ}`, `S(ξ) = exp(½(ξ* a² − ξ a†²))`.
///
/// Even levels only: `c_{2m} = (−e^{iθ} tanh r)^m √((2m)!) / (2^m m! √cosh r)`.
/// The tail of a squeezed state is geometric, so the state is built whenever
/// `sinh² r ≤ dim/6` and the discarded mass is recorded and flagged instead
/// of rejected.
pub fn squeezed_vacuum(r: f64, theta: f64, dim: Dim) -> Result<StateVector> {
    squeezed_vacuum_with(r, theta, dim, &Tolerances::default())
}

pub fn squeezed_vacuum_with(r: f64, theta: f64, dim: Dim, tol: &Tolerances) -> Result<StateVector> {
    check_squeeze_domain(r, theta, dim)?;
    let n = dim.get();
    let ratio = -C64::from_polar(r.tanh(), theta);
    let mut amplitudes = Array1::<C64>::zeros(n);
    let mut amp = C64::new(1.0 / r.cosh().sqrt(), 0.0);
    let mut level = 0;
    while level < n {
        amplitudes[level] = amp;
        let m = (level / 2) as f64;
        amp *= ratio * ((2.0 * m + 1.0) / (2.0 * m + 2.0)).sqrt();
        level += 2;
    }
    let kept: f64 = amplitudes.iter().map(|z| z.norm_sqr()).sum();
    let discarded = (1.0 - kept).max(0.0);
    StateVector::build(vec![dim], amplitudes, discarded, tol.tail)
}

fn check_squeeze_domain(r: f64, theta: f64, dim: Dim) -> Result<()> {
    if !(r.is_finite() && r >= 0.0) {
        return Err(Error::invalid("r", format!("must be finite and ≥ 0, got {r}")));
    }
    if !theta.is_finite() {
        return Err(Error::invalid("theta", "must be finite"));
    }
    let mean = r.sinh().powi(2);
    let limit = dim.get() as f64 / 6.0;
    if mean > limit {
        // the truncation would cut into the bulk of the distribution
        let kept: f64 = {
            let ratio = r.tanh().powi(2);
            let mut p = 1.0 / r.cosh();
            let mut sum = 0.0;
            let mut level = 0;
            while level + DEFAULT_GUARD_LEVELS < dim.get() {
                sum += p;
                let m = (level / 2) as f64;
                p *= ratio * (2.0 * m + 1.0) / (2.0 * m + 2.0);
                level += 2;
            }
            sum
        };
        return Err(Error::TailOverflow {
            mass: (1.0 - kept).max(0.0),
            tolerance: Tolerances::default().tail,
        });
    }
    Ok(())
}

/// `D(β) = exp(β a† − β* a)`.
pub fn displacement_operator(beta: C64, dim: Dim) -> Result<OperatorMatrix> {
    displacement_operator_with(beta, dim, &Tolerances::default())
}

pub fn displacement_operator_with(beta: C64, dim: Dim, tol: &Tolerances) -> Result<OperatorMatrix> {
    if !beta.re.is_finite() || !beta.im.is_finite() {
        return Err(Error::invalid("beta", "must be finite"));
    }
    let tail = coherent_tail_mass(beta, dim);
    if tail > tol.tail {
        return Err(Error::TailOverflow {
            mass: tail,
            tolerance: tol.tail,
        });
    }
    let a = annihilation(dim);
    let generator = &a.adjoint().scaled(beta) - &a.scaled(beta.conj());
    matrix_exp(&generator)
}

/// `S(ξ) = exp(½(ξ* a² − ξ a†²))` with `ξ = r e^{iθ}`.
pub fn squeeze_operator(r: f64, theta: f64, dim: Dim) -> Result<OperatorMatrix> {
    check_squeeze_domain(r, theta, dim)?;
    let xi = C64::from_polar(r, theta);
    let a = annihilation(dim);
    let a2 = a.dot(&a);
    let ad2 = a2.adjoint();
    let generator = (&a2.scaled(xi.conj()) - &ad2.scaled(xi)).scaled(C64::new(0.5, 0.0));
    matrix_exp(&generator)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::{creation, guarded_subspace, number_operator};
    use proptest::prelude::*;

    fn d(n: usize) -> Dim {
        Dim::new(n).unwrap()
    }

    fn re(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    fn quadrature(dim: Dim) -> OperatorMatrix {
        &annihilation(dim) + &creation(dim)
    }

    #[test]
    fn coherent_zero_is_vacuum() {
        let s = coherent_state(re(0.0), d(6)).unwrap();
        assert_eq!(s, StateVector::vacuum(d(6)));
    }

    #[test]
    fn coherent_eigenvalue_and_mean_number() {
        let dim = d(24);
        let s = coherent_state(re(1.0), dim).unwrap();
        let a = expectation(&s, &annihilation(dim)).unwrap();
        assert!((a - re(1.0)).norm() < 1e-9);
        let n = expectation(&s, &number_operator(dim)).unwrap();
        assert!((n.re - 1.0).abs() < 1e-9);
    }

    #[test]
    fn coherent_overflow_when_mean_exceeds_basis() {
        let err = coherent_state(re(3.0), d(8)).unwrap_err();
        assert!(matches!(err, Error::TailOverflow { .. }));
    }

    #[test]
    fn coherent_tail_mass_matches_direct_sum() {
        // direct complement sum of Poisson(4) below level 10
        let mean: f64 = 4.0;
        let mut p = (-mean).exp();
        let mut kept = 0.0;
        for k in 0..10 {
            kept += p;
            p *= mean / (k + 1) as f64;
        }
        let tail = coherent_tail_mass(re(2.0), d(12));
        assert!((tail - (1.0 - kept)).abs() < 1e-14);
    }

    #[test]
    fn large_coherent_amplitude_fits_wide_basis() {
        let s = coherent_state(C64::from_polar(5.0, 0.7), d(64)).unwrap();
        assert!(!s.is_tail_flagged());
        assert!((s.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn squeezed_r_zero_is_vacuum() {
        let s = squeezed_vacuum(0.0, 0.3, d(8)).unwrap();
        assert_eq!(s, StateVector::vacuum(d(8)));
    }

    #[test]
    fn squeezed_mean_photon_number_and_parity() {
        let dim = d(32);
        let s = squeezed_vacuum(1.0, 0.0, dim).unwrap();
        let n = expectation(&s, &number_operator(dim)).unwrap().re;
        assert!((n - 1.0f64.sinh().powi(2)).abs() < 0.01, "n = {n}");
        for (k, amp) in s.amplitudes().iter().enumerate() {
            if k % 2 == 1 {
                assert_eq!(*amp, re(0.0));
            }
        }
        let x = expectation(&s, &quadrature(dim)).unwrap();
        assert!(x.norm() < 1e-8);
        // geometric tail is recorded, not hidden
        assert!(s.discarded_mass() > 0.0);
        assert!(s.is_tail_flagged());
    }

    #[test]
    fn squeezed_rejects_mean_beyond_basis() {
        // sinh²(2) ≈ 13.2 > 24/6
        assert!(matches!(
            squeezed_vacuum(2.0, 0.0, d(24)),
            Err(Error::TailOverflow { .. })
        ));
        assert!(squeezed_vacuum(-0.1, 0.0, d(24)).is_err());
    }

    #[test]
    fn displacement_zero_is_identity() {
        let e = displacement_operator(re(0.0), d(10)).unwrap();
        assert_eq!(e, OperatorMatrix::identity(&[d(10)]));
    }

    #[test]
    fn displaced_vacuum_is_coherent_state() {
        let dim = d(24);
        let beta = re(0.5);
        let dv = StateVector::vacuum(dim).evolve(&displacement_operator(beta, dim).unwrap()).unwrap();
        let coh = coherent_state(beta, dim).unwrap();
        let worst = dv
            .amplitudes()
            .iter()
            .zip(coh.amplitudes().iter())
            .fold(0.0f64, |m, (a, b)| m.max((a - b).norm()));
        assert!(worst < 1e-8, "{worst}");
        // vacuum overlap e^{-|β|²/2}
        let overlap = displacement_operator(beta, dim).unwrap().get(0, 0);
        assert!((overlap.re - 0.882_496_902_584_595).abs() < 1e-6);
        assert!((overlap.re - (-0.125f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn squeeze_r_zero_is_identity() {
        let s = squeeze_operator(0.0, 1.0, d(12)).unwrap();
        assert_eq!(s, OperatorMatrix::identity(&[d(12)]));
    }

    #[test]
    fn squeeze_operator_is_unitary_on_guarded_subspace() {
        let dim = d(32);
        let s = squeeze_operator(1.0, 0.4, dim).unwrap();
        let guard = guarded_subspace(&[dim], DEFAULT_GUARD_LEVELS);
        assert!(s.unitarity_residual(Some(&guard)) <= 1e-8);
    }

    fn max_amp_diff(a: &StateVector, b: &StateVector) -> f64 {
        a.amplitudes()
            .iter()
            .zip(b.amplitudes().iter())
            .fold(0.0f64, |m, (x, y)| m.max((x - y).norm()))
    }

    #[test]
    fn squeeze_operator_on_vacuum_matches_closed_form_amplitudes() {
        // At dim 32 the truncated generator disagrees with the exact
        // amplitudes by ~3e-3 near the cutoff; the two constructions only
        // meet 1e-6 once the cutoff sits far out in the geometric tail.
        let at = |n: usize| {
            let dim = d(n);
            let applied = StateVector::vacuum(dim)
                .evolve(&squeeze_operator(1.0, 0.0, dim).unwrap())
                .unwrap();
            max_amp_diff(&applied, &squeezed_vacuum(1.0, 0.0, dim).unwrap())
        };
        let coarse = at(32);
        assert!(coarse > 1e-4 && coarse < 1e-2, "{coarse}");
        assert!(at(96) <= 1e-6, "{}", at(96));
    }

    #[test]
    fn expectation_checks_dimensions() {
        let s = StateVector::vacuum(d(4));
        assert!(expectation(&s, &number_operator(d(5))).is_err());
        assert_eq!(expectation(&s, &number_operator(d(4))).unwrap(), re(0.0));
    }

    #[test]
    fn tensor_product_orders_first_factor_slowest() {
        let a = coherent_state(re(0.3), d(12)).unwrap();
        let b = StateVector::vacuum(d(2));
        let ab = a.tensor(&b);
        assert_eq!(ab.space(), &[d(12), d(2)]);
        for k in 0..12 {
            assert_eq!(ab.amplitudes()[2 * k], a.amplitudes()[k]);
            assert_eq!(ab.amplitudes()[2 * k + 1], re(0.0));
        }
    }

    proptest! {
        #[test]
        fn coherent_norm_is_one(re_part in -2.0f64..2.0, im_part in -2.0f64..2.0) {
            let s = coherent_state(C64::new(re_part, im_part), d(40)).unwrap();
            prop_assert!((s.norm() - 1.0).abs() <= 1e-12);
        }

        #[test]
        fn squeezed_norm_is_one(r in 0.0f64..1.2, theta in -3.2f64..3.2) {
            let s = squeezed_vacuum(r, theta, d(40)).unwrap();
            prop_assert!((s.norm() - 1.0).abs() <= 1e-12);
        }

        #[test]
        fn displacement_inverse_pair(re_part in -1.5f64..1.5, im_part in -1.5f64..1.5) {
            let dim = d(36);
            let beta = C64::new(re_part, im_part);
            prop_assume!(beta.norm_sqr() <= 36.0 / 8.0);
            let prod = displacement_operator(beta, dim).unwrap()
                .dot(&displacement_operator(-beta, dim).unwrap());
            let defect = &prod - &OperatorMatrix::identity(&[dim]);
            let guard = guarded_subspace(&[dim], DEFAULT_GUARD_LEVELS);
            prop_assert!(defect.max_abs_on(&guard) <= 1e-8);
            prop_assert!(displacement_operator(beta, dim).unwrap()
                .unitarity_residual(Some(&guard)) <= 1e-8);
        }

        #[test]
        fn expectation_is_linear_and_conjugate_symmetric(
            s1 in -1.0f64..1.0, s2 in -1.0f64..1.0, alpha in 0.0f64..1.5,
        ) {
            let dim = d(20);
            let state = coherent_state(C64::new(alpha, 0.3), dim).unwrap();
            let a = annihilation(dim);
            let n = number_operator(dim);
            let combo = &a.scaled(re(s1)) + &n.scaled(C64::new(0.0, s2));
            let lhs = expectation(&state, &combo).unwrap();
            let rhs = expectation(&state, &a).unwrap() * s1
                + expectation(&state, &n).unwrap() * C64::new(0.0, s2);
            prop_assert!((lhs - rhs).norm() < 1e-12);
            let adj = expectation(&state, &combo.adjoint()).unwrap();
            prop_assert!((adj - lhs.conj()).norm() < 1e-12);
        }
    }
}
