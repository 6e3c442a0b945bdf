//! Run drivers for the two dynamical protocols: relaxation of a biased
//! initial state, and a linear ramp of the spin–resonator coupling.
//!
//! Relaxation prepares the interacting ground state with a small
//! longitudinal bias on the spin, removes the bias at t = 0, and records
//! the normalized readout Σz(t) = ⟨σz(t)⟩/⟨σz(0)⟩.
//!
//! The ramp starts from the interacting ground state at zero
//! spin–resonator coupling and drives g(t) = g_f·t/t_Q linearly. At
//! requested sample times it records the instantaneous energy, the
//! instantaneous-ground-state energy (solved fresh at the exact coupling,
//! warm-started from the previous sample), the residual energy between
//! the two, and the excitation probability 1 − |⟨ψ(t)|gs(g(t))⟩|².
//!
//! Both protocols run on either engine: matrix product states (DMRG for
//! ground states, projector-splitting time evolution) or dense exact
//! diagonalization for small chains. Time stepping uses the midpoint
//! coupling g(t + dt/2) in each step, making the ramp discretization
//! second order in dt for both engines.

use std::collections::BTreeSet;
use std::fmt;

use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bath::{discretize_star, BathError, BathParams};
use crate::model::{
    build_dense, build_mpo, ops, ModelError, ModelParams, SiteLayout, DEFAULT_D_BATH,
    DEFAULT_D_RES,
};
use crate::oracle::{ed_ground_state, expect_dense, expect_local_dense, OracleError};
use crate::tnet::{
    dmrg_ground_state, lanczos_expv, tdvp_step, DmrgOptions, KrylovOptions, MpsState,
    TdvpOptions, TdvpScheme, TnetError,
};

#[derive(Debug, Error)]
pub enum ProtocolError {
    /// Invalid run configuration.
    #[error("run config: {0}")]
    Config(String),
    #[error(transparent)]
    Bath(#[from] BathError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Tnet(#[from] TnetError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    /// The readout used for normalization is numerically zero.
    #[error("readout signal vanishes at preparation (|⟨σz⟩| = {0:.3e}); cannot normalize")]
    VanishingSignal(f64),
    /// A requested evaluation point lies outside the recorded data.
    #[error("evaluation time {t} lies outside the recorded window [{lo}, {hi}]")]
    OutOfRange { t: f64, lo: f64, hi: f64 },
}

pub type ProtocolResult<T> = Result<T, ProtocolError>;

/// A sampled scalar signal on a strictly increasing time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    /// Free-form provenance note (engine, parameters, normalization).
    pub metadata: Option<String>,
}

impl TimeSeries {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> ProtocolResult<Self> {
        if times.is_empty() {
            return Err(ProtocolError::Config("time series is empty".into()));
        }
        if times.len() != values.len() {
            return Err(ProtocolError::Config(format!(
                "time series has {} times but {} values",
                times.len(),
                values.len()
            )));
        }
        for (i, &t) in times.iter().enumerate() {
            if !t.is_finite() {
                return Err(ProtocolError::Config(format!(
                    "time at index {i} is not finite"
                )));
            }
            if i > 0 && t <= times[i - 1] {
                return Err(ProtocolError::Config(format!(
                    "times must be strictly increasing (index {i}: {t} after {})",
                    times[i - 1]
                )));
            }
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(ProtocolError::Config(format!(
                "value at index {i} is not finite"
            )));
        }
        Ok(Self { times, values, metadata: None })
    }

    pub fn with_metadata(mut self, note: impl Into<String>) -> Self {
        self.metadata = Some(note.into());
        self
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Which numerical backend runs the protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    /// Matrix product states: variational ground states plus
    /// projector-splitting time evolution.
    Mps,
    /// Dense exact diagonalization (small chains only).
    Ed,
}

impl fmt::Display for Engine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Engine::Mps => write!(f, "mps"),
            Engine::Ed => write!(f, "ed"),
        }
    }
}

/// Numerical knobs shared by both engines. All fields have working
/// defaults; configs only need to override what they study.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EngineNumerics {
    /// Resonator levels kept.
    pub d_res: usize,
    /// Levels kept per bath mode.
    pub d_bath: usize,
    /// Bond-dimension cap for MPS runs.
    pub max_bond: usize,
    /// Relative discarded-weight threshold per two-site split.
    pub trunc_threshold: f64,
    /// Evolution scheme for MPS runs.
    pub tdvp_scheme: TdvpScheme,
    /// Sweep budget for each ground-state solve.
    pub dmrg_max_sweeps: usize,
    /// Energy-change convergence threshold between sweeps.
    pub dmrg_energy_tol: f64,
    /// Accuracy of the iterative local solvers.
    pub krylov_tol: f64,
    /// Subspace cap of the iterative local solvers.
    pub krylov_max_subspace: usize,
}

impl Default for EngineNumerics {
    fn default() -> Self {
        Self {
            d_res: DEFAULT_D_RES,
            d_bath: DEFAULT_D_BATH,
            max_bond: 64,
            trunc_threshold: 1e-9,
            tdvp_scheme: TdvpScheme::Auto,
            dmrg_max_sweeps: 24,
            dmrg_energy_tol: 1e-10,
            krylov_tol: 1e-10,
            krylov_max_subspace: 40,
        }
    }
}

impl EngineNumerics {
    pub fn validate(&self) -> ProtocolResult<()> {
        if self.d_res < 2 || self.d_bath < 2 {
            return Err(ProtocolError::Config(format!(
                "local truncations need at least 2 levels (d_res={}, d_bath={})",
                self.d_res, self.d_bath
            )));
        }
        if self.max_bond == 0 {
            return Err(ProtocolError::Config("bond cap must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.trunc_threshold) {
            return Err(ProtocolError::Config(format!(
                "truncation threshold must lie in [0, 1), got {}",
                self.trunc_threshold
            )));
        }
        if self.dmrg_max_sweeps == 0 {
            return Err(ProtocolError::Config("sweep budget must be at least 1".into()));
        }
        if !(self.dmrg_energy_tol > 0.0) || !(self.krylov_tol > 0.0) {
            return Err(ProtocolError::Config(
                "convergence tolerances must be positive".into(),
            ));
        }
        if self.krylov_max_subspace < 2 {
            return Err(ProtocolError::Config(
                "local solver subspace cap must be at least 2".into(),
            ));
        }
        Ok(())
    }

    pub fn dmrg_options(&self) -> DmrgOptions {
        DmrgOptions {
            max_sweeps: self.dmrg_max_sweeps,
            energy_tol: self.dmrg_energy_tol,
            max_bond: self.max_bond,
            trunc_threshold: self.trunc_threshold,
            krylov: KrylovOptions {
                max_subspace: self.krylov_max_subspace.min(24),
                max_restarts: 8,
                tol: self.krylov_tol,
            },
        }
    }

    pub fn tdvp_options(&self) -> TdvpOptions {
        TdvpOptions {
            scheme: self.tdvp_scheme,
            max_bond: self.max_bond,
            trunc_threshold: self.trunc_threshold,
            krylov_tol: self.krylov_tol,
            krylov_max_subspace: self.krylov_max_subspace,
        }
    }
}

/// Counters and health flags accumulated during a run.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct RunDiagnostics {
    /// Engine the run used ("mps" or "ed").
    pub engine: String,
    pub site_count: usize,
    /// Dense Hilbert dimension (ED engine only).
    pub hilbert_dim: Option<usize>,
    /// Number of time-evolution steps (or direct propagations for the
    /// relaxation ED fast path).
    pub evolution_steps: usize,
    /// Number of ground-state solves performed.
    pub ground_solves: usize,
    /// Total sweeps spent across all ground-state solves (MPS).
    pub dmrg_sweeps_total: usize,
    /// Whether every ground-state solve met its convergence threshold.
    pub dmrg_all_converged: bool,
    /// Largest bond dimension encountered (MPS).
    pub max_bond_reached: usize,
    /// Total relative truncation weight discarded (MPS).
    pub truncation_weight: f64,
    /// Indices of samples whose ground-state solve did not converge.
    pub flagged_samples: Vec<usize>,
}

/// Relaxation protocol: prepare with a small bias, release, record Σz(t).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelaxationConfig {
    /// Couplings of the evolution Hamiltonian (its bias must be zero).
    pub model: ModelParams,
    pub bath: BathParams,
    /// Longitudinal bias applied only during preparation,
    /// in (0, 0.1·delta].
    pub prep_bias: f64,
    pub t_max: f64,
    pub dt: f64,
    /// Record every `sample_stride`-th step (plus t = 0 and t = t_max).
    pub sample_stride: usize,
    pub engine: Engine,
    pub numerics: EngineNumerics,
}

impl RelaxationConfig {
    pub fn validate(&self) -> ProtocolResult<()> {
        self.numerics.validate()?;
        if self.model.epsilon != 0.0 {
            return Err(ProtocolError::Config(format!(
                "the evolution Hamiltonian must be unbiased (epsilon = {}); \
                 the preparation bias is the separate prep_bias knob",
                self.model.epsilon
            )));
        }
        if !(self.prep_bias > 0.0) || self.prep_bias > 0.1 * self.model.delta {
            return Err(ProtocolError::Config(format!(
                "preparation bias must lie in (0, {}], got {}",
                0.1 * self.model.delta,
                self.prep_bias
            )));
        }
        if !(self.t_max > 0.0) || !self.t_max.is_finite() {
            return Err(ProtocolError::Config(format!(
                "t_max must be positive, got {}",
                self.t_max
            )));
        }
        if !(self.dt > 0.0) || self.dt > self.t_max {
            return Err(ProtocolError::Config(format!(
                "dt must lie in (0, t_max], got {}",
                self.dt
            )));
        }
        if self.sample_stride == 0 {
            return Err(ProtocolError::Config("sample stride must be at least 1".into()));
        }
        Ok(())
    }
}

/// Result of a relaxation run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RelaxationRun {
    /// Σz(t), normalized to 1 at t = 0.
    pub series: TimeSeries,
    /// Raw ⟨σz⟩ of the prepared state (the normalization denominator).
    pub sigma_z_initial: f64,
    pub diagnostics: RunDiagnostics,
}

/// Linear coupling ramp g(t) = g_f·t/t_Q, with g_f taken from `model.g`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuenchConfig {
    /// Couplings at the END of the ramp; `model.g` is the final coupling.
    pub model: ModelParams,
    pub bath: BathParams,
    /// Ramp duration.
    pub t_quench: f64,
    pub dt: f64,
    /// Times at which to record energies and overlaps; they are snapped
    /// to the step grid, and 0 and t_quench are always included.
    pub sample_times: Vec<f64>,
    pub engine: Engine,
    pub numerics: EngineNumerics,
}

impl QuenchConfig {
    pub fn validate(&self) -> ProtocolResult<()> {
        self.numerics.validate()?;
        if self.model.epsilon != 0.0 {
            return Err(ProtocolError::Config(format!(
                "ramps are defined for the unbiased system, got epsilon = {}",
                self.model.epsilon
            )));
        }
        if !(self.model.g > 0.0) {
            return Err(ProtocolError::Config(format!(
                "final coupling must be positive, got {}",
                self.model.g
            )));
        }
        if !(self.t_quench > 0.0) || !self.t_quench.is_finite() {
            return Err(ProtocolError::Config(format!(
                "ramp duration must be positive, got {}",
                self.t_quench
            )));
        }
        if !(self.dt > 0.0) || self.dt > self.t_quench {
            return Err(ProtocolError::Config(format!(
                "dt must lie in (0, t_quench], got {}",
                self.dt
            )));
        }
        for &t in &self.sample_times {
            if !t.is_finite() || t < -1e-9 || t > self.t_quench * (1.0 + 1e-9) {
                return Err(ProtocolError::Config(format!(
                    "sample time {t} lies outside [0, {}]",
                    self.t_quench
                )));
            }
        }
        Ok(())
    }
}

/// Everything recorded along one ramp. Rows are aligned: entry i of every
/// vector belongs to `times[i]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QuenchRecord {
    pub times: Vec<f64>,
    /// Instantaneous coupling g(t) at each sample.
    pub coupling: Vec<f64>,
    /// ⟨ψ(t)|H(g(t))|ψ(t)⟩.
    pub energy: Vec<f64>,
    /// Ground-state energy of H(g(t)).
    pub gs_energy: Vec<f64>,
    /// energy − gs_energy.
    pub residual_energy: Vec<f64>,
    /// 1 − |⟨ψ(t)|gs(g(t))⟩|².
    pub excitation_probability: Vec<f64>,
    /// Whether the ground-state solve at each sample met its threshold.
    pub gs_converged: Vec<bool>,
    pub diagnostics: RunDiagnostics,
    pub metadata: Option<String>,
}

impl QuenchRecord {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Residual energy and excitation probability read out at a given time.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FreezeOutSample {
    /// The requested evaluation time.
    pub t_eval: f64,
    /// Linearly interpolated between the bracketing samples.
    pub residual_energy: f64,
    /// Taken from the nearest recorded sample.
    pub excitation_probability: f64,
    /// Time of that nearest sample.
    pub nearest_sample_time: f64,
}

/// Geometrically spaced sample times, handy for ramp records that feed
/// power-law fits.
pub fn log_spaced_samples(t_lo: f64, t_hi: f64, n: usize) -> ProtocolResult<Vec<f64>> {
    if !(t_lo > 0.0) || !(t_hi > t_lo) || !t_hi.is_finite() {
        return Err(ProtocolError::Config(format!(
            "need 0 < t_lo < t_hi, got {t_lo} .. {t_hi}"
        )));
    }
    if n < 2 {
        return Err(ProtocolError::Config("need at least two sample times".into()));
    }
    let ratio = (t_hi / t_lo).powf(1.0 / (n - 1) as f64);
    Ok((0..n).map(|i| t_lo * ratio.powi(i as i32)).collect())
}

fn vacuum(d: usize) -> Array1<C64> {
    let mut v = Array1::<C64>::zeros(d);
    v[0] = C64::new(1.0, 0.0);
    v
}

/// Product-state starting guess: a (possibly tilted) spin plus vacua.
pub(crate) fn product_guess(layout: &SiteLayout, spin_tilt: f64) -> Vec<Array1<C64>> {
    let mut locals = Vec::with_capacity(layout.site_count());
    locals.push(ndarray::array![C64::new(1.0, 0.0), C64::new(spin_tilt, 0.0)]);
    locals.push(vacuum(layout.d_res));
    for _ in 0..layout.n_modes {
        locals.push(vacuum(layout.d_bath));
    }
    locals
}

/// Apply a real symmetric matrix to a complex vector.
fn real_matvec(h: &Array2<f64>, x: &Array1<C64>) -> Array1<C64> {
    let xre = x.mapv(|z| z.re);
    let xim = x.mapv(|z| z.im);
    let yre = h.dot(&xre);
    let yim = h.dot(&xim);
    Array1::from_iter(yre.iter().zip(yim.iter()).map(|(&a, &b)| C64::new(a, b)))
}

fn norm_sqr(v: &Array1<C64>) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

/// Run the relaxation protocol.
pub fn run_relaxation(config: &RelaxationConfig) -> ProtocolResult<RelaxationRun> {
    config.validate()?;
    let bath = discretize_star(&config.bath)?;
    let layout = SiteLayout::new(config.numerics.d_res, config.numerics.d_bath, bath.len())?;
    let prep_params = config.model.with_epsilon(config.prep_bias)?;
    let n_steps = ((config.t_max / config.dt).round() as usize).max(1);
    let dt = config.t_max / n_steps as f64;
    let stride = config.sample_stride;

    let mut diag = RunDiagnostics {
        engine: config.engine.to_string(),
        site_count: layout.site_count(),
        dmrg_all_converged: true,
        ..RunDiagnostics::default()
    };
    let note = format!(
        "sigma_z normalized to its prepared value; engine={}, g={}, alpha={}, \
         n_modes={}, dt={dt}, prep_bias={}",
        config.engine, config.model.g, config.bath.alpha, bath.len(), config.prep_bias
    );

    match config.engine {
        Engine::Ed => {
            let h_prep = build_dense(&prep_params, &layout, &bath)?;
            let gs = ed_ground_state(&h_prep)?;
            diag.ground_solves = 1;
            diag.hilbert_dim = Some(h_prep.dim().0);
            let h_drift = build_dense(&config.model, &layout, &bath)?;
            let prop = crate::oracle::EdPropagator::new(&h_drift)?;
            let dims = layout.dims();
            let sz = ops::sigma_z();
            let sz0 = expect_local_dense(&sz, &dims, 0, &gs.state.amplitudes)?;
            if sz0.abs() < 1e-10 {
                return Err(ProtocolError::VanishingSignal(sz0.abs()));
            }
            let mut times = Vec::new();
            let mut values = Vec::new();
            let mut ks: Vec<usize> = (0..=n_steps).step_by(stride).collect();
            if *ks.last().unwrap() != n_steps {
                ks.push(n_steps);
            }
            for &k in &ks {
                let t = k as f64 * dt;
                let psi_t = prop.evolve(&gs.state, t)?;
                diag.evolution_steps += 1;
                let szt = expect_local_dense(&sz, &dims, 0, &psi_t.amplitudes)?;
                times.push(t);
                values.push(szt / sz0);
            }
            let series = TimeSeries::new(times, values)?.with_metadata(note);
            Ok(RelaxationRun { series, sigma_z_initial: sz0, diagnostics: diag })
        }
        Engine::Mps => {
            let h_prep = build_mpo(&prep_params, &layout, &bath)?;
            let h_drift = build_mpo(&config.model, &layout, &bath)?;
            let guess = MpsState::product_state(
                &product_guess(&layout, 1.2),
                config.numerics.max_bond,
                config.numerics.trunc_threshold,
            )?;
            let (rep, gs) = dmrg_ground_state(&h_prep, &guess, &config.numerics.dmrg_options())?;
            diag.ground_solves = 1;
            diag.dmrg_sweeps_total = rep.sweeps;
            diag.dmrg_all_converged = rep.converged;
            if !rep.converged {
                diag.flagged_samples.push(0);
            }
            diag.max_bond_reached = rep.max_bond_reached;
            diag.truncation_weight = rep.discarded_weight;
            let sz_c = ops::promote(&ops::sigma_z());
            let sz0 = gs.expect_local(&sz_c, 0)?;
            if sz0.abs() < 1e-10 {
                return Err(ProtocolError::VanishingSignal(sz0.abs()));
            }
            let mut psi = gs;
            let topts = config.numerics.tdvp_options();
            let mut times = vec![0.0];
            let mut values = vec![1.0];
            for k in 1..=n_steps {
                let rep = tdvp_step(&mut psi, &h_drift, dt, &topts)?;
                diag.evolution_steps += 1;
                diag.max_bond_reached = diag.max_bond_reached.max(rep.max_bond_reached);
                diag.truncation_weight += rep.discarded_weight;
                if k % stride == 0 || k == n_steps {
                    let n2 = {
                        let n = psi.norm();
                        n * n
                    };
                    let szt = psi.expect_local(&sz_c, 0)? / n2;
                    times.push(k as f64 * dt);
                    values.push(szt / sz0);
                }
            }
            let series = TimeSeries::new(times, values)?.with_metadata(note);
            Ok(RelaxationRun { series, sigma_z_initial: sz0, diagnostics: diag })
        }
    }
}

/// Run the linear coupling ramp.
pub fn run_quench(config: &QuenchConfig) -> ProtocolResult<QuenchRecord> {
    config.validate()?;
    let bath = discretize_star(&config.bath)?;
    let layout = SiteLayout::new(config.numerics.d_res, config.numerics.d_bath, bath.len())?;
    let g_f = config.model.g;
    let t_q = config.t_quench;
    let n_steps = ((t_q / config.dt).round() as usize).max(1);
    let dt = t_q / n_steps as f64;
    let g_at = |t: f64| g_f * (t / t_q).clamp(0.0, 1.0);

    let mut sample_ks: BTreeSet<usize> = BTreeSet::new();
    sample_ks.insert(0);
    sample_ks.insert(n_steps);
    for &t in &config.sample_times {
        let k = (t / dt).round().clamp(0.0, n_steps as f64) as usize;
        sample_ks.insert(k);
    }

    let mut diag = RunDiagnostics {
        engine: config.engine.to_string(),
        site_count: layout.site_count(),
        dmrg_all_converged: true,
        ..RunDiagnostics::default()
    };
    let metadata = Some(format!(
        "linear ramp g: 0 → {g_f} over t_q={t_q}; engine={}, alpha={}, n_modes={}, dt={dt}",
        config.engine, config.bath.alpha, bath.len()
    ));

    let mut times = Vec::new();
    let mut coupling = Vec::new();
    let mut energy = Vec::new();
    let mut gs_energy = Vec::new();
    let mut residual_energy = Vec::new();
    let mut excitation_probability = Vec::new();
    let mut gs_converged = Vec::new();

    match config.engine {
        Engine::Ed => {
            let h0 = build_dense(&config.model.with_coupling(0.0)?, &layout, &bath)?;
            let h_unit = build_dense(&config.model.with_coupling(1.0)?, &layout, &bath)?;
            let v_op = &h_unit - &h0;
            diag.hilbert_dim = Some(h0.dim().0);
            let gs0 = ed_ground_state(&h0)?;
            diag.ground_solves = 1;
            let mut psi = gs0.state.amplitudes.clone();
            let kopts = KrylovOptions { max_subspace: 40, max_restarts: 0, tol: 1e-13 };
            let mut h_buf = h0.clone();
            let set_coupling = |h_buf: &mut Array2<f64>, g: f64| {
                h_buf.assign(&h0);
                h_buf.scaled_add(g, &v_op);
            };

            for k in 0..=n_steps {
                if sample_ks.contains(&k) {
                    let t = k as f64 * dt;
                    let g = g_at(t);
                    set_coupling(&mut h_buf, g);
                    let n2 = norm_sqr(&psi);
                    let e = expect_dense(&h_buf, &psi) / n2;
                    let gsk = ed_ground_state(&h_buf)?;
                    diag.ground_solves += 1;
                    let ov = psi
                        .iter()
                        .zip(gsk.state.amplitudes.iter())
                        .map(|(a, b)| a.conj() * b)
                        .sum::<C64>();
                    let p_exc = 1.0 - ov.norm_sqr() / n2;
                    times.push(t);
                    coupling.push(g);
                    energy.push(e);
                    gs_energy.push(gsk.energy);
                    residual_energy.push(e - gsk.energy);
                    excitation_probability.push(p_exc);
                    gs_converged.push(true);
                }
                if k == n_steps {
                    break;
                }
                let g_mid = g_at((k as f64 + 0.5) * dt);
                set_coupling(&mut h_buf, g_mid);
                let mut apply = |x: &Array1<C64>| real_matvec(&h_buf, x);
                psi = lanczos_expv(&mut apply, &psi, C64::new(0.0, -dt), &kopts)?;
                diag.evolution_steps += 1;
            }
        }
        Engine::Mps => {
            let mpo0 = build_mpo(&config.model.with_coupling(0.0)?, &layout, &bath)?;
            let guess = MpsState::product_state(
                &product_guess(&layout, 1.0),
                config.numerics.max_bond,
                config.numerics.trunc_threshold,
            )?;
            let dopts = config.numerics.dmrg_options();
            let (rep0, gs0) = dmrg_ground_state(&mpo0, &guess, &dopts)?;
            diag.ground_solves = 1;
            diag.dmrg_sweeps_total = rep0.sweeps;
            diag.dmrg_all_converged = rep0.converged;
            diag.max_bond_reached = rep0.max_bond_reached;
            diag.truncation_weight = rep0.discarded_weight;
            let mut psi = gs0.clone();
            let mut prev_gs = gs0;
            let topts = config.numerics.tdvp_options();

            for k in 0..=n_steps {
                if sample_ks.contains(&k) {
                    let t = k as f64 * dt;
                    let g = g_at(t);
                    let mpo_g = build_mpo(&config.model.with_coupling(g)?, &layout, &bath)?;
                    let n2 = {
                        let n = psi.norm();
                        n * n
                    };
                    let e = psi.expect_mpo(&mpo_g)? / n2;
                    let (gsrep, gsk) = dmrg_ground_state(&mpo_g, &prev_gs, &dopts)?;
                    diag.ground_solves += 1;
                    diag.dmrg_sweeps_total += gsrep.sweeps;
                    diag.max_bond_reached =
                        diag.max_bond_reached.max(gsrep.max_bond_reached);
                    if !gsrep.converged {
                        diag.dmrg_all_converged = false;
                        diag.flagged_samples.push(times.len());
                    }
                    let ov = gsk.overlap(&psi)?;
                    let p_exc = 1.0 - ov.norm_sqr() / n2;
                    times.push(t);
                    coupling.push(g);
                    energy.push(e);
                    gs_energy.push(gsrep.energy);
                    residual_energy.push(e - gsrep.energy);
                    excitation_probability.push(p_exc);
                    gs_converged.push(gsrep.converged);
                    prev_gs = gsk;
                }
                if k == n_steps {
                    break;
                }
                let g_mid = g_at((k as f64 + 0.5) * dt);
                let mpo_mid = build_mpo(&config.model.with_coupling(g_mid)?, &layout, &bath)?;
                let rep = tdvp_step(&mut psi, &mpo_mid, dt, &topts)?;
                diag.evolution_steps += 1;
                diag.max_bond_reached = diag.max_bond_reached.max(rep.max_bond_reached);
                diag.truncation_weight += rep.discarded_weight;
            }
        }
    }

    Ok(QuenchRecord {
        times,
        coupling,
        energy,
        gs_energy,
        residual_energy,
        excitation_probability,
        gs_converged,
        diagnostics: diag,
        metadata,
    })
}

/// Read the ramp record at an evaluation time: the residual energy is
/// interpolated linearly between the bracketing samples and the
/// excitation probability is taken from the nearest sample.
pub fn evaluate_at_freeze_out(
    record: &QuenchRecord,
    t_eval: f64,
) -> ProtocolResult<FreezeOutSample> {
    if record.is_empty() {
        return Err(ProtocolError::Config("ramp record is empty".into()));
    }
    let lo = record.times[0];
    let hi = *record.times.last().unwrap();
    if !t_eval.is_finite() || t_eval < lo || t_eval > hi {
        return Err(ProtocolError::OutOfRange { t: t_eval, lo, hi });
    }
    let idx = record.times.partition_point(|&t| t < t_eval);
    let (i0, i1) = if idx == 0 {
        (0, 0)
    } else if idx >= record.len() {
        (record.len() - 1, record.len() - 1)
    } else {
        (idx - 1, idx)
    };
    let (t0, t1) = (record.times[i0], record.times[i1]);
    let e = if i0 == i1 || t1 == t0 {
        record.residual_energy[i0]
    } else {
        let w = (t_eval - t0) / (t1 - t0);
        record.residual_energy[i0] * (1.0 - w) + record.residual_energy[i1] * w
    };
    let nearest = if (t_eval - t0).abs() <= (t1 - t_eval).abs() { i0 } else { i1 };
    Ok(FreezeOutSample {
        t_eval,
        residual_energy: e,
        excitation_probability: record.excitation_probability[nearest],
        nearest_sample_time: record.times[nearest],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn tiny_model(g: f64) -> ModelParams {
        ModelParams::new(1.0, 0.75, g, 0.0).unwrap()
    }

    fn tiny_bath() -> BathParams {
        BathParams::new(0.1, 5.0, 1).unwrap()
    }

    fn tiny_numerics() -> EngineNumerics {
        EngineNumerics { d_res: 3, d_bath: 2, ..EngineNumerics::default() }
    }

    #[test]
    fn time_series_validation() {
        assert!(TimeSeries::new(vec![], vec![]).is_err());
        assert!(TimeSeries::new(vec![0.0, 1.0], vec![1.0]).is_err());
        assert!(TimeSeries::new(vec![0.0, 0.0], vec![1.0, 2.0]).is_err());
        assert!(TimeSeries::new(vec![0.0, f64::NAN], vec![1.0, 2.0]).is_err());
        assert!(TimeSeries::new(vec![0.0, 1.0], vec![1.0, f64::INFINITY]).is_err());
        let s = TimeSeries::new(vec![0.0, 0.5], vec![1.0, 0.9])
            .unwrap()
            .with_metadata("note");
        assert_eq!(s.len(), 2);
        assert_eq!(s.metadata.as_deref(), Some("note"));
    }

    #[test]
    fn relaxation_config_validation() {
        let ok = RelaxationConfig {
            model: tiny_model(0.3),
            bath: tiny_bath(),
            prep_bias: 0.05,
            t_max: 5.0,
            dt: 0.05,
            sample_stride: 10,
            engine: Engine::Ed,
            numerics: tiny_numerics(),
        };
        assert!(ok.validate().is_ok());
        let mut bad = ok.clone();
        bad.prep_bias = 0.0;
        assert!(bad.validate().is_err());
        bad = ok.clone();
        bad.prep_bias = 0.2; // exceeds 0.1·delta
        assert!(bad.validate().is_err());
        bad = ok.clone();
        bad.model.epsilon = 0.01;
        assert!(bad.validate().is_err());
        bad = ok.clone();
        bad.dt = 10.0;
        assert!(bad.validate().is_err());
        bad = ok;
        bad.sample_stride = 0;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn ed_relaxation_normalizes_and_reports() {
        let config = RelaxationConfig {
            model: tiny_model(0.3),
            bath: tiny_bath(),
            prep_bias: 0.05,
            t_max: 4.0,
            dt: 0.05,
            sample_stride: 16,
            engine: Engine::Ed,
            numerics: tiny_numerics(),
        };
        let run = run_relaxation(&config).unwrap();
        assert_abs_diff_eq!(run.series.values[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(run.series.times[0], 0.0);
        assert_abs_diff_eq!(*run.series.times.last().unwrap(), 4.0, epsilon = 1e-12);
        assert_eq!(run.diagnostics.hilbert_dim, Some(12));
        assert_eq!(run.diagnostics.site_count, 3);
        assert!(run.sigma_z_initial.abs() > 1e-6);
        for v in &run.series.values {
            assert!(v.is_finite());
            assert!(v.abs() < 50.0);
        }
    }

    #[test]
    fn ed_quench_starts_in_the_ground_state() {
        let config = QuenchConfig {
            model: tiny_model(0.4),
            bath: tiny_bath(),
            t_quench: 3.0,
            dt: 0.01,
            sample_times: vec![0.5, 1.5, 2.9],
            engine: Engine::Ed,
            numerics: tiny_numerics(),
        };
        let record = run_quench(&config).unwrap();
        let n = record.len();
        assert!(n >= 5);
        assert_eq!(record.coupling.len(), n);
        assert_eq!(record.energy.len(), n);
        assert_eq!(record.gs_energy.len(), n);
        assert_eq!(record.residual_energy.len(), n);
        assert_eq!(record.excitation_probability.len(), n);
        assert_eq!(record.gs_converged.len(), n);
        assert_abs_diff_eq!(record.times[0], 0.0);
        assert_abs_diff_eq!(*record.times.last().unwrap(), 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(record.coupling[0], 0.0);
        assert_abs_diff_eq!(*record.coupling.last().unwrap(), 0.4, epsilon = 1e-12);
        // starts in the instantaneous ground state
        assert!(record.residual_energy[0].abs() < 1e-9);
        assert!(record.excitation_probability[0].abs() < 1e-9);
        for i in 0..n {
            assert!(record.residual_energy[i] > -1e-9, "negative residual at {i}");
            assert!(
                record.excitation_probability[i] > -1e-9
                    && record.excitation_probability[i] < 1.0 + 1e-9
            );
        }
        // driving excites
        assert!(*record.residual_energy.last().unwrap() > 1e-8);
    }

    #[test]
    fn slower_ramps_excite_less() {
        let run = |t_q: f64| {
            let config = QuenchConfig {
                model: tiny_model(0.4),
                bath: tiny_bath(),
                t_quench: t_q,
                dt: 0.02,
                sample_times: vec![],
                engine: Engine::Ed,
                numerics: tiny_numerics(),
            };
            let record = run_quench(&config).unwrap();
            (
                *record.residual_energy.last().unwrap(),
                *record.excitation_probability.last().unwrap(),
            )
        };
        let (e_fast, p_fast) = run(1.0);
        let (e_slow, p_slow) = run(20.0);
        assert!(
            e_slow < e_fast,
            "adiabaticity violated: {e_slow} !< {e_fast}"
        );
        assert!(p_slow < p_fast, "adiabaticity violated: {p_slow} !< {p_fast}");
    }

    #[test]
    fn sample_times_snap_to_the_step_grid() {
        let config = QuenchConfig {
            model: tiny_model(0.3),
            bath: tiny_bath(),
            t_quench: 1.0,
            dt: 0.1,
            sample_times: vec![0.333],
            engine: Engine::Ed,
            numerics: tiny_numerics(),
        };
        let record = run_quench(&config).unwrap();
        assert_eq!(record.len(), 3);
        assert_abs_diff_eq!(record.times[1], 0.3, epsilon = 1e-12);
    }

    #[test]
    fn freeze_out_readout_interpolates() {
        let record = QuenchRecord {
            times: vec![0.0, 1.0, 2.0, 3.0],
            coupling: vec![0.0, 0.1, 0.2, 0.3],
            energy: vec![0.0; 4],
            gs_energy: vec![0.0; 4],
            residual_energy: vec![0.0, 0.1, 0.3, 0.6],
            excitation_probability: vec![0.0, 0.01, 0.09, 0.25],
            gs_converged: vec![true; 4],
            diagnostics: RunDiagnostics::default(),
            metadata: None,
        };
        let s = evaluate_at_freeze_out(&record, 1.5).unwrap();
        assert_abs_diff_eq!(s.residual_energy, 0.2, epsilon = 1e-14);
        assert!(s.nearest_sample_time == 1.0 || s.nearest_sample_time == 2.0);
        let exact = evaluate_at_freeze_out(&record, 2.0).unwrap();
        assert_abs_diff_eq!(exact.residual_energy, 0.3, epsilon = 1e-14);
        assert_abs_diff_eq!(exact.excitation_probability, 0.09, epsilon = 1e-14);
        assert!(matches!(
            evaluate_at_freeze_out(&record, -0.5),
            Err(ProtocolError::OutOfRange { .. })
        ));
        assert!(matches!(
            evaluate_at_freeze_out(&record, 3.5),
            Err(ProtocolError::OutOfRange { .. })
        ));
    }

    #[test]
    fn log_spacing_is_geometric() {
        let ts = log_spaced_samples(0.1, 100.0, 4).unwrap();
        assert_eq!(ts.len(), 4);
        assert_abs_diff_eq!(ts[0], 0.1, epsilon = 1e-12);
        assert_abs_diff_eq!(ts[3], 100.0, epsilon = 1e-9);
        let r0 = ts[1] / ts[0];
        let r1 = ts[2] / ts[1];
        assert_abs_diff_eq!(r0, r1, epsilon = 1e-9);
        assert!(log_spaced_samples(0.0, 1.0, 4).is_err());
        assert!(log_spaced_samples(1.0, 1.0, 4).is_err());
        assert!(log_spaced_samples(0.1, 1.0, 1).is_err());
    }
}
