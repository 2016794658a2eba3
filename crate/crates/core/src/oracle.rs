//! Brute-force reference: the joint optical/gravitational Hamiltonian on a
//! truncated Fock space, exponentiated numerically.
//!
//! Every operator here commutes with the optical number `a†a`. With the
//! optical mode as the slowest-varying index the Hamiltonian is block
//! diagonal, one block per photon number `n`, so propagators are built one
//! block ("sector") at a time. This is exact, not an approximation: the
//! off-block entries of `H` are identically zero.

use ndarray::{s, Array1, Array2};
use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::analytic::{gamma_of, kerr_phase, Frame, PhaseConvention};
use crate::error::{require_non_negative, require_positive, Error, Result};
use crate::params::GwModeState;
use crate::qcore::{
    annihilation, coherent_state, embed, guarded_indices, matrix_exp, number_operator,
    product_dim, squeezed_vacuum, Dim, OperatorMatrix, StateVector, Tolerances,
    DEFAULT_GUARD_LEVELS,
};

/// One gravitational mode: angular frequency, coupling `q = g/Ω`, truncation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GwMode {
    pub omega: f64,
    pub q: f64,
    pub dim: Dim,
}

impl GwMode {
    pub fn new(omega: f64, q: f64, dim: Dim) -> Result<Self> {
        require_positive("Omega", omega)?;
        if !(q.is_finite() && (0.0..1.0).contains(&q)) {
            return Err(Error::invalid("q", format!("must lie in [0, 1), got {q}")));
        }
        Ok(GwMode { omega, q, dim })
    }
}

/// Cavity mode coupled to one or more gravitational modes.
#[derive(Clone, Debug, PartialEq)]
pub struct JointSystem {
    optical_dim: Dim,
    modes: Vec<GwMode>,
    frame: Frame,
    budget: usize,
}

impl JointSystem {
    pub const DEFAULT_BUDGET: usize = 4096;

    pub fn new(optical_dim: Dim, modes: Vec<GwMode>, frame: Frame) -> Result<Self> {
        Self::with_budget(optical_dim, modes, frame, Self::DEFAULT_BUDGET)
    }

    /// Fails with `BudgetExceeded` if the joint product dimension exceeds
    /// `budget`.
    pub fn with_budget(
        optical_dim: Dim,
        modes: Vec<GwMode>,
        frame: Frame,
        budget: usize,
    ) -> Result<Self> {
        if modes.is_empty() {
            return Err(Error::invalid("modes", "at least one gravitational mode is required"));
        }
        for m in &modes {
            GwMode::new(m.omega, m.q, m.dim)?;
        }
        frame.validate()?;
        let sys = JointSystem {
            optical_dim,
            modes,
            frame,
            budget,
        };
        sys.check_budget(product_dim(&sys.space()))?;
        Ok(sys)
    }

    /// Rotating-frame system with a single gravitational mode.
    pub fn single_mode(optical_dim: Dim, gw_dim: Dim, omega: f64, q: f64) -> Result<Self> {
        Self::new(optical_dim, vec![GwMode::new(omega, q, gw_dim)?], Frame::Rotating)
    }

    pub fn optical_dim(&self) -> Dim {
        self.optical_dim
    }

    pub fn modes(&self) -> &[GwMode] {
        &self.modes
    }

    pub fn frame(&self) -> Frame {
        self.frame
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    /// `[optical, gw_0, gw_1, …]`, optical slowest.
    pub fn space(&self) -> Vec<Dim> {
        std::iter::once(self.optical_dim).chain(self.gw_space()).collect()
    }

    pub fn gw_space(&self) -> Vec<Dim> {
        self.modes.iter().map(|m| m.dim).collect()
    }

    pub fn dim(&self) -> usize {
        product_dim(&self.space())
    }

    fn check_budget(&self, dim: usize) -> Result<()> {
        if dim > self.budget {
            return Err(Error::BudgetExceeded {
                dim,
                budget: self.budget,
            });
        }
        Ok(())
    }

    fn omega0(&self) -> f64 {
        match self.frame {
            Frame::Rotating => 0.0,
            Frame::Lab { omega0 } => omega0,
        }
    }

    /// Same system with every gravitational mode enlarged by `padding`
    /// levels. Only the sector dimension is held to the budget, since padded
    /// checks never assemble the joint matrix.
    fn padded(&self, padding: usize) -> Result<JointSystem> {
        let modes: Vec<GwMode> = self
            .modes
            .iter()
            .map(|m| -> Result<GwMode> {
                Ok(GwMode {
                    dim: Dim::new(m.dim.get() + padding)?,
                    ..*m
                })
            })
            .collect::<Result<_>>()?;
        let sys = JointSystem {
            modes,
            ..self.clone()
        };
        sys.check_budget(product_dim(&sys.gw_space()))?;
        Ok(sys)
    }
}

/// Which generator [`propagate_with`] exponentiates.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum Dynamics {
    /// `exp(−iHt)` with the full Hamiltonian.
    #[default]
    Full,
    /// Only the photon-number-conditioned displacement
    /// `exp(Σ_k q_k a†a (γ_k* b_k − γ_k b_k†))`, dropping the Kerr phase and
    /// the free gravitational rotation. This isolates the displacement
    /// overlap that the coherent and squeezed closed forms evaluate.
    DisplacementOnly,
}

/// Per-mode ladder operators embedded in the gravitational space.
struct GwOps {
    space: Vec<Dim>,
    b: Vec<OperatorMatrix>,
    num: Vec<OperatorMatrix>,
}

impl GwOps {
    fn new(sys: &JointSystem) -> Result<Self> {
        let space = sys.gw_space();
        let mut b = Vec::with_capacity(space.len());
        let mut num = Vec::with_capacity(space.len());
        for (slot, &d) in space.iter().enumerate() {
            b.push(embed(&annihilation(d), &space, slot)?);
            num.push(embed(&number_operator(d), &space, slot)?);
        }
        Ok(GwOps { space, b, num })
    }

    /// `Σ_k Ω_k b_k†b_k − q_k Ω_k n (b_k + b_k†)`, without the optical term.
    fn hamiltonian(&self, sys: &JointSystem, n: usize) -> OperatorMatrix {
        let mut h = OperatorMatrix::zeros(&self.space);
        for (k, m) in sys.modes.iter().enumerate() {
            let quad = &self.b[k] + &self.b[k].adjoint();
            h = &h + &self.num[k].scaled(C64::new(m.omega, 0.0));
            h = &h - &quad.scaled(C64::new(m.q * m.omega * n as f64, 0.0));
        }
        h
    }

    /// `Σ_k q_k n (γ_k* b_k − γ_k b_k†)`.
    fn displacement_generator(&self, sys: &JointSystem, n: usize, t: f64) -> OperatorMatrix {
        let mut g = OperatorMatrix::zeros(&self.space);
        for (k, m) in sys.modes.iter().enumerate() {
            let gamma = gamma_of(m.omega, t);
            let scale = m.q * n as f64;
            let term = &self.b[k].scaled(gamma.conj() * scale) - &self.b[k].adjoint().scaled(gamma * scale);
            g = &g + &term;
        }
        g
    }

    fn propagator(&self, sys: &JointSystem, n: usize, t: f64, dynamics: Dynamics) -> Result<OperatorMatrix> {
        let optical_phase = C64::from_polar(1.0, -sys.omega0() * n as f64 * t);
        let generator = match dynamics {
            Dynamics::Full => self.hamiltonian(sys, n).scaled(C64::new(0.0, -t)),
            Dynamics::DisplacementOnly => self.displacement_generator(sys, n, t),
        };
        Ok(matrix_exp(&generator)?.scaled(optical_phase))
    }
}

fn check_time(t: f64) -> Result<()> {
    if t < 0.0 || !t.is_finite() {
        return Err(Error::NegativeTime(t));
    }
    Ok(())
}

/// Joint Hamiltonian in rad/s:
/// `ω0 a†a + Σ_k Ω_k b_k†b_k − q_k Ω_k a†a (b_k + b_k†)`, the first term only
/// in the lab frame.
pub fn build_hamiltonian(sys: &JointSystem) -> Result<OperatorMatrix> {
    let space = sys.space();
    let n_op = embed(&number_operator(sys.optical_dim), &space, 0)?;
    let mut h = n_op.scaled(C64::new(sys.omega0(), 0.0));
    for (k, m) in sys.modes.iter().enumerate() {
        let b = embed(&annihilation(m.dim), &space, k + 1)?;
        let num = embed(&number_operator(m.dim), &space, k + 1)?;
        let quad = &b + &b.adjoint();
        h = &h + &num.scaled(C64::new(m.omega, 0.0));
        h = &h - &n_op.dot(&quad).scaled(C64::new(m.q * m.omega, 0.0));
    }
    Ok(h)
}

/// Block of [`build_hamiltonian`] with `n` photons, on the gravitational space.
pub fn sector_hamiltonian(sys: &JointSystem, n: usize) -> Result<OperatorMatrix> {
    check_sector(sys, n)?;
    let ops = GwOps::new(sys)?;
    let h = ops.hamiltonian(sys, n);
    let shift = OperatorMatrix::identity(&ops.space).scaled(C64::new(sys.omega0() * n as f64, 0.0));
    Ok(&h + &shift)
}

fn check_sector(sys: &JointSystem, n: usize) -> Result<()> {
    if n >= sys.optical_dim.get() {
        return Err(Error::invalid(
            "n",
            format!("photon number {n} outside optical dimension {}", sys.optical_dim),
        ));
    }
    Ok(())
}

fn assemble_blocks(space: Vec<Dim>, blocks: &[OperatorMatrix]) -> OperatorMatrix {
    let g = blocks[0].size();
    let total = g * blocks.len();
    let mut data = Array2::<C64>::zeros((total, total));
    for (n, block) in blocks.iter().enumerate() {
        data.slice_mut(s![n * g..(n + 1) * g, n * g..(n + 1) * g])
            .assign(block.as_array());
    }
    OperatorMatrix::from_array(space, data).expect("blocks tile the joint space")
}

/// Joint propagator `exp(−iHt)` (or the displacement-only variant),
/// assembled from per-sector exponentials.
pub fn propagator(sys: &JointSystem, t: f64, dynamics: Dynamics) -> Result<OperatorMatrix> {
    check_time(t)?;
    let ops = GwOps::new(sys)?;
    let blocks = (0..sys.optical_dim.get())
        .map(|n| ops.propagator(sys, n, t, dynamics))
        .collect::<Result<Vec<_>>>()?;
    Ok(assemble_blocks(sys.space(), &blocks))
}

/// `ψ(t) = exp(−iHt) ψ(0)`.
pub fn propagate(sys: &JointSystem, initial: &StateVector, t: f64) -> Result<StateVector> {
    propagate_with(sys, initial, t, Dynamics::Full)
}

pub fn propagate_with(
    sys: &JointSystem,
    initial: &StateVector,
    t: f64,
    dynamics: Dynamics,
) -> Result<StateVector> {
    check_time(t)?;
    let ops = GwOps::new(sys)?;
    propagate_sectors(sys, &ops, initial, t, dynamics)
}

fn propagate_sectors(
    sys: &JointSystem,
    ops: &GwOps,
    initial: &StateVector,
    t: f64,
    dynamics: Dynamics,
) -> Result<StateVector> {
    let space = sys.space();
    if initial.space() != space.as_slice() {
        return Err(Error::DimensionMismatch {
            expected: format!("{space:?}"),
            found: format!("{:?}", initial.space()),
        });
    }
    let g = product_dim(&ops.space);
    let amps = initial.amplitudes();
    let mut out = Array1::<C64>::zeros(amps.len());
    for n in 0..sys.optical_dim.get() {
        let block = amps.slice(s![n * g..(n + 1) * g]);
        if block.iter().all(|z| z.norm_sqr() == 0.0) {
            continue;
        }
        let u = ops.propagator(sys, n, t, dynamics)?;
        out.slice_mut(s![n * g..(n + 1) * g]).assign(&u.as_array().dot(&block));
    }
    Ok(StateVector::from_raw(space, out, initial.discarded_mass()))
}

/// Free evolution `exp(−i Σ_k Ω_k b_k†b_k t)`, times `exp(−iω0 a†a t)` in the
/// lab frame, as a block for `n` photons.
fn free_block(sys: &JointSystem, n: usize, t: f64) -> OperatorMatrix {
    let mut out: Option<OperatorMatrix> = None;
    for m in &sys.modes {
        let phases = (0..m.dim.get()).map(|l| C64::from_polar(1.0, -m.omega * l as f64 * t));
        let op = OperatorMatrix::from_diagonal(&[m.dim], phases);
        out = Some(match out {
            None => op,
            Some(acc) => acc.kron(&op),
        });
    }
    out.expect("at least one mode")
        .scaled(C64::from_polar(1.0, -sys.omega0() * n as f64 * t))
}

/// Factorized propagator for `n` photons: free evolution on the left, then
/// the Kerr phase, then the conditioned displacement, per mode.
fn closed_form_block(
    sys: &JointSystem,
    n: usize,
    t: f64,
    conv: PhaseConvention,
) -> Result<OperatorMatrix> {
    let kerr_weight = match conv {
        PhaseConvention::OracleCorrected => 0.5,
        PhaseConvention::PaperPrinted => 1.0,
    };
    let nf = n as f64;
    let mut kerr = 0.0;
    let mut disp: Option<OperatorMatrix> = None;
    for m in &sys.modes {
        kerr += kerr_weight * kerr_phase(m.q, m.omega, t)? * nf * nf;
        let gamma = gamma_of(m.omega, t);
        let b = annihilation(m.dim);
        let generator = &b.scaled(gamma.conj() * (m.q * nf)) - &b.adjoint().scaled(gamma * (m.q * nf));
        let d = matrix_exp(&generator)?;
        disp = Some(match disp {
            None => d,
            Some(acc) => acc.kron(&d),
        });
    }
    let disp = disp.expect("at least one mode").scaled(C64::from_polar(1.0, kerr));
    Ok(free_block(sys, n, t).dot(&disp))
}

/// Product over modes of the factorized single-mode propagators, with free
/// evolution attached so it is directly comparable to `exp(−iHt)`.
pub fn closed_form_unitary(sys: &JointSystem, t: f64, conv: PhaseConvention) -> Result<OperatorMatrix> {
    check_time(t)?;
    let blocks = (0..sys.optical_dim.get())
        .map(|n| closed_form_block(sys, n, t, conv))
        .collect::<Result<Vec<_>>>()?;
    Ok(assemble_blocks(sys.space(), &blocks))
}

/// Levels to add above a mode of dimension `dim` so that a displacement
/// of size `beta` applied to its guarded levels stays clear of the cutoff.
///
/// The spread of a displaced Fock state grows like `β√m`; the constants
/// were fixed by scanning residual against padding at the acceptance dims.
fn padding_for(beta: f64, dim: usize) -> usize {
    4 + (4.0 * beta * (dim as f64).sqrt()).ceil() as usize
}

/// Extra gravitational levels used by [`factorization_check`]. The largest
/// displacement on the guarded optical range is `2 q n_max`.
pub fn default_padding(sys: &JointSystem) -> usize {
    let q_max = sys.modes.iter().fold(0.0f64, |acc, m| acc.max(m.q));
    let dim_max = sys.modes.iter().map(|m| m.dim.get()).max().unwrap_or(2);
    let n_max = sys.optical_dim.get().saturating_sub(1 + DEFAULT_GUARD_LEVELS) as f64;
    padding_for(2.0 * q_max * n_max, dim_max)
}

/// Extra levels used by [`bch_identity_checks`], where the displacement is
/// `q n_max`.
pub fn default_bch_padding(q: f64, dims: (Dim, Dim)) -> usize {
    let n_max = dims.0.get().saturating_sub(1 + DEFAULT_GUARD_LEVELS) as f64;
    padding_for(q * n_max, dims.1.get())
}

#[derive(Clone, Debug, PartialEq)]
pub struct FactorizationReport {
    pub times: Vec<f64>,
    /// `‖U_closed − U_expm‖_max` on the guarded subspace, per time.
    pub residuals: Vec<f64>,
    /// `‖U†U − I‖_max` of the closed form on the guarded subspace, worst time.
    pub unitarity_residual: f64,
    pub padding: usize,
}

impl FactorizationReport {
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }
}

/// Compares [`closed_form_unitary`] with the numerical propagator.
///
/// Both are built on a workspace with `padding` extra levels per
/// gravitational mode (see [`default_padding`]); the residual is read off the
/// guarded subspace of the requested dimensions, sector by sector.
pub fn factorization_check(
    sys: &JointSystem,
    times: &[f64],
    conv: PhaseConvention,
    padding: Option<usize>,
) -> Result<FactorizationReport> {
    let padding = padding.unwrap_or_else(|| default_padding(sys));
    let work = sys.padded(padding)?;
    let ops = GwOps::new(&work)?;
    let nominal: Vec<usize> = sys.modes.iter().map(|m| m.dim.get()).collect();
    let guarded = guarded_indices(&ops.space, &nominal, DEFAULT_GUARD_LEVELS);
    let sectors = sys.optical_dim.get().saturating_sub(DEFAULT_GUARD_LEVELS);
    let mut residuals = Vec::with_capacity(times.len());
    let mut unitarity: f64 = 0.0;
    for &t in times {
        check_time(t)?;
        let per_sector = (0..sectors)
            .into_par_iter()
            .map(|n| -> Result<(f64, f64)> {
                let exact = ops.propagator(&work, n, t, Dynamics::Full)?;
                let closed = closed_form_block(&work, n, t, conv)?;
                Ok(((&closed - &exact).max_abs_on(&guarded), closed.unitarity_residual(Some(&guarded))))
            })
            .collect::<Result<Vec<_>>>()?;
        residuals.push(per_sector.iter().map(|r| r.0).fold(0.0, f64::max));
        unitarity = per_sector.iter().map(|r| r.1).fold(unitarity, f64::max);
    }
    Ok(FactorizationReport {
        times: times.to_vec(),
        residuals,
        unitarity_residual: unitarity,
        padding,
    })
}

/// Residuals of the three conjugation identities
/// `V b V† = b + q a†a`, `V b†b V† = b†b + q a†a(b + b†) + q²(a†a)²` and
/// `V a†a V† = a†a`.
#[derive(Clone, Debug, PartialEq)]
pub struct BchReport {
    pub q: f64,
    pub padding: usize,
    /// With `V = exp(q a†a (b − b†))`, on the guarded subspace.
    pub residuals: [f64; 3],
    /// With the opposite sign in the exponent, on the guarded subspace.
    /// The first two identities fail at `O(q)` here.
    pub opposite_sign: [f64; 3],
    /// Correct sign, evaluated over the whole truncated space.
    pub unguarded: [f64; 3],
}

impl BchReport {
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }
}

/// Checks the identities on an `optical × gw` space padded by `padding`
/// gravitational levels ([`default_bch_padding`] if `None`), reading the
/// residuals off the guarded subspace of `dims`.
pub fn bch_identity_checks(q: f64, dims: (Dim, Dim), padding: Option<usize>) -> Result<BchReport> {
    if !(q.is_finite() && (0.0..1.0).contains(&q)) {
        return Err(Error::invalid("q", format!("must lie in [0, 1), got {q}")));
    }
    let padding = padding.unwrap_or_else(|| default_bch_padding(q, dims));
    let gw = Dim::new(dims.1.get() + padding)?;
    let space = [dims.0, gw];
    let dim = product_dim(&space);
    if dim > JointSystem::DEFAULT_BUDGET {
        return Err(Error::BudgetExceeded {
            dim,
            budget: JointSystem::DEFAULT_BUDGET,
        });
    }
    let n = embed(&number_operator(dims.0), &space, 0)?;
    let b = embed(&annihilation(gw), &space, 1)?;
    let bd = b.adjoint();
    let guarded = guarded_indices(&space, &[dims.0.get(), dims.1.get()], DEFAULT_GUARD_LEVELS);
    let real = |x: f64| C64::new(x, 0.0);

    let targets = [
        &b + &n.scaled(real(q)),
        &(&bd.dot(&b) + &n.dot(&(&b + &bd)).scaled(real(q))) + &n.dot(&n).scaled(real(q * q)),
        n.clone(),
    ];
    let conjugated = |sign: f64| -> Result<[OperatorMatrix; 3]> {
        let v = matrix_exp(&n.dot(&(&b - &bd)).scaled(real(sign * q)))?;
        let vd = v.adjoint();
        let conj = |op: &OperatorMatrix| v.dot(op).dot(&vd);
        Ok([conj(&b), conj(&bd.dot(&b)), conj(&n)])
    };
    let residual = |got: &[OperatorMatrix; 3], idx: Option<&[usize]>| -> [f64; 3] {
        std::array::from_fn(|i| {
            let diff = &got[i] - &targets[i];
            match idx {
                Some(ix) => diff.max_abs_on(ix),
                None => diff.max_abs(),
            }
        })
    };
    let plus = conjugated(1.0)?;
    let minus = conjugated(-1.0)?;
    Ok(BchReport {
        q,
        padding,
        residuals: residual(&plus, Some(&guarded)),
        opposite_sign: residual(&minus, Some(&guarded)),
        unguarded: residual(&plus, None),
    })
}

/// Time series of optical moments read off the propagated joint state.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EvolutionResult {
    pub times: Vec<f64>,
    /// `⟨a + a†⟩`.
    pub mean_quadrature: Vec<f64>,
    /// `⟨(a + a†)²⟩ − ⟨a + a†⟩²`.
    pub variance: Vec<f64>,
    /// Mass in the top two levels of any mode after propagation.
    pub tail_mass: Vec<f64>,
    /// Tail mass above tolerance, or an initial state that was already
    /// truncated beyond it.
    pub tail_flagged: Vec<bool>,
    pub photon_number: Vec<f64>,
    /// `⟨a⟩`.
    pub mean_amplitude: Vec<C64>,
    /// `⟨a²⟩`.
    pub second_moment: Vec<C64>,
    /// Largest `|‖ψ(t)‖ − ‖ψ(0)‖|` over the grid.
    pub unitarity_residual: f64,
}

impl EvolutionResult {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn any_flagged(&self) -> bool {
        self.tail_flagged.iter().any(|&f| f)
    }
}

struct Sample {
    amplitude: C64,
    second: C64,
    photons: f64,
    raised: f64,
    tail: f64,
    flagged: bool,
    norm_drift: f64,
}

/// Optical moments of `ψ`, optical index slowest. `raised` is `⟨a a†⟩` with
/// the truncated operators, so the variance below is that of the truncated
/// `a + a†` exactly.
fn optical_moments(psi: &Array1<C64>, optical: usize, g: usize) -> (C64, C64, f64, f64) {
    let mut amp = C64::new(0.0, 0.0);
    let mut second = C64::new(0.0, 0.0);
    let mut photons = 0.0;
    let mut raised = 0.0;
    for n in 0..optical {
        let nf = n as f64;
        for j in 0..g {
            let z = psi[n * g + j];
            let p = z.norm_sqr();
            photons += nf * p;
            if n + 1 < optical {
                raised += (nf + 1.0) * p;
            }
            if n >= 1 {
                amp += psi[(n - 1) * g + j].conj() * z * nf.sqrt();
            }
            if n >= 2 {
                second += psi[(n - 2) * g + j].conj() * z * (nf * (nf - 1.0)).sqrt();
            }
        }
    }
    (amp, second, photons, raised)
}

fn prepare_gw(mode: &GwMode, state: &GwModeState, t: f64) -> Result<StateVector> {
    state.validate()?;
    match *state {
        GwModeState::Vacuum => Ok(StateVector::vacuum(mode.dim)),
        GwModeState::Coherent { lambda } => {
            coherent_state(C64::from_polar(lambda, mode.omega * t), mode.dim)
        }
        GwModeState::Squeezed { xi0 } => squeezed_vacuum(xi0, 2.0 * mode.omega * t, mode.dim),
        GwModeState::ThermalEstimate { .. } => Err(Error::invalid(
            "gw_states",
            "thermal states have no pure-state oracle; use the analytic estimate",
        )),
    }
}

/// Prepares `|α⟩ ⊗ Ψ(t)` at each time, propagates it and records the optical
/// moments.
///
/// Coherent gravitational states are prepared as `|λ e^{iΩt}⟩` and squeezed
/// ones with phase `θ = 2Ωt`, matching the closed forms they are compared
/// with. Samples are computed in parallel; the result does not depend on
/// scheduling.
pub fn heisenberg_expectations(
    sys: &JointSystem,
    optical_alpha: f64,
    gw_states: &[GwModeState],
    time_grid: &[f64],
    dynamics: Dynamics,
) -> Result<EvolutionResult> {
    require_non_negative("alpha", optical_alpha)?;
    if gw_states.len() != sys.modes.len() {
        return Err(Error::DimensionMismatch {
            expected: format!("{} gravitational states", sys.modes.len()),
            found: gw_states.len().to_string(),
        });
    }
    for &t in time_grid {
        check_time(t)?;
    }
    let optical = coherent_state(C64::new(optical_alpha, 0.0), sys.optical_dim)?;
    let ops = GwOps::new(sys)?;
    let g = product_dim(&ops.space);
    let tail_tol = Tolerances::default().tail;

    let samples = time_grid
        .par_iter()
        .map(|&t| -> Result<Sample> {
            let mut initial = optical.clone();
            let mut prep_flagged = optical.is_tail_flagged();
            for (mode, state) in sys.modes.iter().zip(gw_states) {
                let gw = prepare_gw(mode, state, t)?;
                prep_flagged |= gw.is_tail_flagged();
                initial = initial.tensor(&gw);
            }
            let evolved = propagate_sectors(sys, &ops, &initial, t, dynamics)?;
            let (amplitude, second, photons, raised) =
                optical_moments(evolved.amplitudes(), sys.optical_dim.get(), g);
            let tail = evolved.tail_mass();
            Ok(Sample {
                amplitude,
                second,
                photons,
                raised,
                tail,
                flagged: prep_flagged || tail > tail_tol,
                norm_drift: (evolved.norm() - initial.norm()).abs(),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut out = EvolutionResult {
        times: time_grid.to_vec(),
        ..Default::default()
    };
    for s in samples {
        let mean = 2.0 * s.amplitude.re;
        out.mean_quadrature.push(mean);
        out.variance.push(2.0 * s.second.re + s.photons + s.raised - mean * mean);
        out.tail_mass.push(s.tail);
        out.tail_flagged.push(s.flagged);
        out.photon_number.push(s.photons);
        out.mean_amplitude.push(s.amplitude);
        out.second_moment.push(s.second);
        out.unitarity_residual = out.unitarity_residual.max(s.norm_drift);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::single_mode_exact_moments;
    use proptest::prelude::*;
    use std::f64::consts::{PI, TAU};

    fn d(n: usize) -> Dim {
        Dim::new(n).unwrap()
    }

    fn re(x: f64) -> C64 {
        C64::new(x, 0.0)
    }

    #[test]
    fn explicit_two_by_two_hamiltonian() {
        let sys = JointSystem::single_mode(d(2), d(2), 1.0, 0.1).unwrap();
        let h = build_hamiltonian(&sys).unwrap();
        // basis |n_a, n_b⟩ at index 2 n_a + n_b
        let expected = [
            [0.0, 0.0, 0.0, 0.0],
            [0.0, 1.0, 0.0, 0.0],
            [0.0, 0.0, 0.0, -0.1],
            [0.0, 0.0, -0.1, 1.0],
        ];
        for r in 0..4 {
            for c in 0..4 {
                assert!((h.get(r, c) - re(expected[r][c])).norm() < 1e-15, "({r},{c})");
            }
        }
    }

    #[test]
    fn decoupled_spectrum_is_free_oscillator() {
        let sys = JointSystem::single_mode(d(3), d(5), 1.7, 0.0).unwrap();
        let h = build_hamiltonian(&sys).unwrap();
        for i in 0..15 {
            assert!((h.get(i, i) - re(1.7 * (i % 5) as f64)).norm() < 1e-14);
            for j in 0..15 {
                if i != j {
                    assert_eq!(h.get(i, j), re(0.0));
                }
            }
        }
    }

    #[test]
    fn lab_frame_adds_optical_energy() {
        let modes = vec![GwMode::new(1.0, 0.1, d(3)).unwrap()];
        let lab = JointSystem::new(d(3), modes.clone(), Frame::Lab { omega0: 50.0 }).unwrap();
        let rot = JointSystem::new(d(3), modes, Frame::Rotating).unwrap();
        let diff = &build_hamiltonian(&lab).unwrap() - &build_hamiltonian(&rot).unwrap();
        for i in 0..9 {
            assert!((diff.get(i, i) - re(50.0 * (i / 3) as f64)).norm() < 1e-12);
        }
    }

    #[test]
    fn hamiltonian_is_block_diagonal_in_photon_number() {
        let modes = vec![GwMode::new(1.0, 0.2, d(3)).unwrap(), GwMode::new(1.7, 0.1, d(4)).unwrap()];
        let sys = JointSystem::new(d(4), modes, Frame::Lab { omega0: 3.0 }).unwrap();
        let h = build_hamiltonian(&sys).unwrap();
        let g = 12;
        for r in 0..h.size() {
            for c in 0..h.size() {
                if r / g != c / g {
                    assert_eq!(h.get(r, c), re(0.0));
                }
            }
        }
        for n in 0..4 {
            let block = sector_hamiltonian(&sys, n).unwrap();
            for r in 0..g {
                for c in 0..g {
                    assert!((block.get(r, c) - h.get(n * g + r, n * g + c)).norm() < 1e-14);
                }
            }
        }
        assert!(sector_hamiltonian(&sys, 4).is_err());
    }

    #[test]
    fn sector_propagator_matches_full_expm() {
        let modes = vec![GwMode::new(1.0, 0.15, d(5)).unwrap()];
        let sys = JointSystem::new(d(4), modes, Frame::Lab { omega0: 2.0 }).unwrap();
        let h = build_hamiltonian(&sys).unwrap();
        let t = 1.3;
        let full = matrix_exp(&h.scaled(C64::new(0.0, -t))).unwrap();
        let blocks = propagator(&sys, t, Dynamics::Full).unwrap();
        assert!((&full - &blocks).max_abs() < 1e-12);
    }

    #[test]
    fn budget_and_validation() {
        let err = JointSystem::single_mode(d(64), d(65), 1.0, 0.1).unwrap_err();
        assert_eq!(err, Error::BudgetExceeded { dim: 64 * 65, budget: 4096 });
        assert!(JointSystem::with_budget(d(64), vec![GwMode::new(1.0, 0.1, d(65)).unwrap()], Frame::Rotating, 5000).is_ok());
        assert!(GwMode::new(1.0, 1.0, d(4)).is_err());
        assert!(GwMode::new(0.0, 0.1, d(4)).is_err());
        assert!(JointSystem::new(d(4), vec![], Frame::Rotating).is_err());
        assert!(JointSystem::new(d(4), vec![GwMode::new(1.0, 0.1, d(4)).unwrap()], Frame::Lab { omega0: -1.0 }).is_err());
    }

    #[test]
    fn zero_time_is_identity() {
        let sys = JointSystem::single_mode(d(6), d(6), 1.0, 0.3).unwrap();
        let u = propagator(&sys, 0.0, Dynamics::Full).unwrap();
        assert!((&u - &OperatorMatrix::identity(&sys.space())).max_abs() < 1e-15);
        let c = closed_form_unitary(&sys, 0.0, PhaseConvention::OracleCorrected).unwrap();
        assert!((&c - &OperatorMatrix::identity(&sys.space())).max_abs() < 1e-15);
        let psi = StateVector::from_amplitudes(vec![d(6)], Array1::from_shape_fn(6, |i| re(1.0 / (i + 1) as f64))).unwrap();
        let joint = psi.tensor(&StateVector::vacuum(d(6)));
        let out = propagate(&sys, &joint, 0.0).unwrap();
        assert!((out.inner(&joint).unwrap() - re(1.0)).norm() < 1e-14);
        assert!(propagate(&sys, &joint, -1.0).is_err());
    }

    #[test]
    fn decoupled_closed_form_is_free_evolution() {
        let sys = JointSystem::single_mode(d(4), d(5), 1.3, 0.0).unwrap();
        let t = 0.7;
        let c = closed_form_unitary(&sys, t, PhaseConvention::OracleCorrected).unwrap();
        for i in 0..20 {
            assert!((c.get(i, i) - C64::from_polar(1.0, -1.3 * (i % 5) as f64 * t)).norm() < 1e-14);
        }
        assert!((&c - &propagator(&sys, t, Dynamics::Full).unwrap()).max_abs() < 1e-13);
    }

    #[test]
    fn factorized_unitary_single_mode() {
        let sys = JointSystem::single_mode(d(12), d(12), 1.0, 0.1).unwrap();
        let rep = factorization_check(&sys, &[0.5, PI, TAU], PhaseConvention::OracleCorrected, None).unwrap();
        assert_eq!(rep.padding, 29);
        assert!(rep.max_residual() <= 1e-7, "{rep:?}");
        assert!(rep.unitarity_residual <= 1e-8, "{rep:?}");
        let printed = factorization_check(&sys, &[PI], PhaseConvention::PaperPrinted, None).unwrap();
        assert!(printed.max_residual() > 0.1, "{printed:?}");
    }

    #[test]
    fn factorization_needs_padding() {
        let sys = JointSystem::single_mode(d(12), d(12), 1.0, 0.1).unwrap();
        let bare = factorization_check(&sys, &[PI], PhaseConvention::OracleCorrected, Some(0)).unwrap();
        assert!(bare.max_residual() > 1e-3, "{bare:?}");
    }

    #[test]
    fn factorized_unitary_two_modes() {
        let modes = vec![GwMode::new(1.0, 0.1, d(6)).unwrap(), GwMode::new(1.7, 0.1, d(6)).unwrap()];
        let sys = JointSystem::new(d(8), modes, Frame::Rotating).unwrap();
        let rep = factorization_check(&sys, &[0.5, 2.0], PhaseConvention::OracleCorrected, None).unwrap();
        assert_eq!(rep.padding, 14);
        assert!(rep.max_residual() <= 1e-6, "{rep:?}");
    }

    #[test]
    fn bch_identities_hold_with_guard_and_padding() {
        for q in [0.05, 0.1] {
            let rep = bch_identity_checks(q, (d(10), d(14)), None).unwrap();
            assert!(rep.max_residual() <= 1e-7, "{rep:?}");
            assert!(rep.opposite_sign[0] > q, "{rep:?}");
            assert!(rep.opposite_sign[1] > q, "{rep:?}");
            assert!(rep.opposite_sign[2] < 1e-10, "{rep:?}");
            assert!(rep.unguarded[0].max(rep.unguarded[1]) > 0.1, "{rep:?}");
        }
        let zero = bch_identity_checks(0.0, (d(10), d(14)), Some(0)).unwrap();
        assert!(zero.residuals.iter().all(|&r| r == 0.0), "{zero:?}");
        assert!(bch_identity_checks(1.2, (d(4), d(4)), None).is_err());
    }

    #[test]
    fn vacuum_oracle_matches_exact_moments() {
        let sys = JointSystem::single_mode(d(24), d(16), 1.0, 0.1).unwrap();
        let res = heisenberg_expectations(&sys, 1.0, &[GwModeState::Vacuum], &[PI, 2.5], Dynamics::Full).unwrap();
        for (i, &t) in res.times.iter().enumerate() {
            let m = single_mode_exact_moments(1.0, 0.1, 1.0, t, Frame::Rotating).unwrap();
            assert!((res.mean_quadrature[i] - m.mean).abs() <= 1e-6 * m.mean.abs());
            assert!((res.variance[i] - m.variance).abs() <= 1e-6 * m.variance);
            assert!(!res.tail_flagged[i]);
        }
        assert!(res.unitarity_residual < 1e-10);
    }

    #[test]
    fn decoupled_oracle_is_static() {
        let sys = JointSystem::single_mode(d(16), d(8), 1.0, 0.0).unwrap();
        let grid: Vec<f64> = (0..5).map(|i| i as f64 * 0.9).collect();
        let res = heisenberg_expectations(&sys, 1.2, &[GwModeState::Vacuum], &grid, Dynamics::Full).unwrap();
        for i in 0..grid.len() {
            assert!((res.mean_quadrature[i] - 2.4).abs() < 1e-7);
            assert!((res.variance[i] - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn thermal_state_and_mismatched_states_rejected() {
        let sys = JointSystem::single_mode(d(8), d(8), 1.0, 0.1).unwrap();
        let thermal = [GwModeState::ThermalEstimate { nbar: 1.0 }];
        assert!(heisenberg_expectations(&sys, 1.0, &thermal, &[0.5], Dynamics::Full).is_err());
        assert!(heisenberg_expectations(&sys, 1.0, &[], &[0.5], Dynamics::Full).is_err());
    }

    #[test]
    fn frames_agree_up_to_optical_rotation() {
        // a + a† is not frame invariant; |⟨a⟩|, ⟨a†a⟩ and the variance of
        // the co-rotated quadrature are
        let modes = vec![GwMode::new(1.0, 0.1, d(12)).unwrap()];
        let omega0 = 7.0;
        let rot = JointSystem::new(d(16), modes.clone(), Frame::Rotating).unwrap();
        let lab = JointSystem::new(d(16), modes, Frame::Lab { omega0 }).unwrap();
        let grid = [0.4, 1.9, 3.3];
        let states = [GwModeState::Vacuum];
        let r = heisenberg_expectations(&rot, 1.0, &states, &grid, Dynamics::Full).unwrap();
        let l = heisenberg_expectations(&lab, 1.0, &states, &grid, Dynamics::Full).unwrap();
        for (i, &t) in grid.iter().enumerate() {
            assert!((r.mean_amplitude[i].norm() - l.mean_amplitude[i].norm()).abs() < 1e-10);
            assert!((r.photon_number[i] - l.photon_number[i]).abs() < 1e-10);
            let back = C64::from_polar(1.0, omega0 * t);
            let amp = l.mean_amplitude[i] * back;
            let second = l.second_moment[i] * back * back;
            let corotated = l.variance[i] + l.mean_quadrature[i].powi(2) - 2.0 * l.second_moment[i].re
                + 2.0 * second.re
                - 4.0 * amp.re * amp.re;
            assert!((corotated - r.variance[i]).abs() < 1e-9, "{corotated} vs {}", r.variance[i]);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn hamiltonian_is_hermitian(q1 in 0.0f64..0.99, q2 in 0.0f64..0.99, w1 in 0.1f64..5.0, w2 in 0.1f64..5.0,
                                    na in 2usize..5, n1 in 2usize..5, n2 in 2usize..4, lab in proptest::bool::ANY) {
            let modes = vec![GwMode::new(w1, q1, d(n1)).unwrap(), GwMode::new(w2, q2, d(n2)).unwrap()];
            let frame = if lab { Frame::Lab { omega0: 10.0 } } else { Frame::Rotating };
            let sys = JointSystem::new(d(na), modes, frame).unwrap();
            prop_assert!(build_hamiltonian(&sys).unwrap().hermiticity_residual() <= 1e-12);
        }

        #[test]
        fn propagation_conserves_norm_and_photons(q in 0.0f64..0.2, t in 0.0f64..12.0, alpha in 0.0f64..1.5) {
            let sys = JointSystem::single_mode(d(20), d(12), 1.0, q).unwrap();
            let grid = [0.0, t];
            let res = heisenberg_expectations(&sys, alpha, &[GwModeState::Vacuum], &grid, Dynamics::Full).unwrap();
            prop_assert!(res.unitarity_residual <= 1e-10);
            prop_assert!((res.photon_number[1] - res.photon_number[0]).abs() <= 1e-8);
            prop_assert!(res.variance.iter().all(|&v| v >= 0.0));
        }
    }
}
