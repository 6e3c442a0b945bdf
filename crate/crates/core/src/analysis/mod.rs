//! Scaling analysis for quench and relaxation data.
//!
//! This module hosts the pure-math layer: the principal-branch Lambert W
//! evaluator, the freeze-out time solvers for both an exponential
//! (Kosterlitz-Thouless-like) divergence of the relaxation time and a
//! conventional second-order power-law divergence, the Kibble-Zurek exponent
//! algebra, and the curve fitters used to digest simulation output.
//!
//! Everything here is deterministic: fitters use fixed initialization rules
//! and derivative-based local optimization, so a given input slice always
//! produces bit-identical results.

mod fit;
mod freeze_out;
mod lambert;

pub use fit::{fit_bkt, fit_bkt_pinned, fit_powerlaw, fit_stretched};
pub use freeze_out::{freeze_out_bkt, freeze_out_power};
pub use lambert::lambert_w0;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Equilibrium critical coupling g_c/Δ for the default parameter set
/// (α = 0.2, ω₀ = 0.75Δ, ω_c = 10Δ), taken from a separate equilibrium
/// study of the same model. Used as the default pin for freeze-out
/// evaluation when no fitted value is supplied.
pub const CRITICAL_COUPLING_DEFAULT: f64 = 0.9165;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("lambert_w0 domain: x = {0:e} lies below the branch point -1/e")]
    LambertDomain(f64),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("fit window: {0}")]
    Window(String),
    #[error("fit did not converge: {0}")]
    NonConvergence(String),
    #[error("degenerate data: {0}")]
    Degenerate(String),
    #[error("internal numerical failure: {0}")]
    Numerics(String),
}

pub type AnalysisResult<T> = Result<T, AnalysisError>;

/// Exponential divergence of the relaxation time on the approach to the
/// critical coupling: τ(g) = A·exp(B/√(g_c − g)) for g < g_c.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BktFit {
    /// Prefactor A (units of 1/Δ).
    pub prefactor: f64,
    /// Barrier constant B (units of √(coupling)).
    pub barrier: f64,
    /// Critical coupling g_c.
    pub g_c: f64,
    /// Root-mean-square residual of ln τ over the fitted points.
    pub residual: f64,
}

/// Stretched-exponential relaxation y(t) = a·exp(−(t/τ)^β).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StretchedFit {
    pub amplitude: f64,
    /// Relaxation time τ (units of 1/Δ).
    pub tau: f64,
    /// Stretching exponent β.
    pub beta: f64,
    /// Time window (t_min, t_max) the fit was restricted to.
    pub fit_window: (f64, f64),
    /// Root-mean-square residual over the fitted points.
    pub residual: f64,
}

/// Critical-point data for a conventional second-order transition with
/// correlation-length exponent ν and dynamical exponent z in d dimensions,
/// where the relaxation time diverges as τ(g) = τ₀·|g − g_c|^(−νz).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SecondOrderKz {
    /// Microscopic time prefactor τ₀.
    pub tau_0: f64,
    pub nu: f64,
    pub z: f64,
    /// Spatial dimension of the defect-counting volume.
    pub d: u32,
}

/// Freeze-out condition output: the instant, measured backwards from the
/// critical point, at which the remaining ramp time equals the equilibrium
/// relaxation time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FreezeOutResult {
    /// Freeze-out time t̂: time remaining until the ramp reaches g_c.
    pub t_f: f64,
    /// Coupling distance from criticality at freeze-out,
    /// ĝ = g_c − g(t_c − t̂) = (g_f/t_Q)·t̂.
    pub critical_offset: f64,
    /// Absolute coupling at freeze-out, g_c − ĝ. Only available when the
    /// input carries the critical coupling (the exponential-divergence
    /// route); the power-law route is expressed purely in the offset.
    pub g_at_freeze: Option<f64>,
    /// Relative residual of the defining equation τ(g(t)) = t_c − t at the
    /// returned solution.
    pub residual: f64,
}

/// Power law y = amplitude·x^(−exponent) fitted in log-log space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    /// Decay exponent μ in y ∝ x^(−μ).
    pub exponent: f64,
    pub amplitude: f64,
    /// Ordinary-least-squares standard error of the exponent.
    pub exponent_stderr: f64,
    /// Root-mean-square residual of ln y over the fitted points.
    pub residual: f64,
}

/// Residual-energy estimate treating the frozen system as an effective
/// two-level system with gap Δ_eff = C/τ̂.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoLevelEstimate {
    /// Dimensionless gap prefactor C.
    pub gap_prefactor: f64,
    /// Effective gap C/τ̂.
    pub delta_eff: f64,
    /// Estimated excitation energy P_exc·Δ_eff.
    pub estimated_energy: f64,
}

/// Kibble-Zurek scaling exponents for a second-order transition: returns
/// (μ_n, μ_E) such that the defect density scales as t_Q^(−μ_n) with
/// μ_n = d·ν/(νz + 1), and the residual energy as t_Q^(−μ_E) with
/// μ_E = (d + z)·ν/(νz + 1).
pub fn kz_exponents(kz: &SecondOrderKz) -> AnalysisResult<(f64, f64)> {
    if !(kz.nu > 0.0) || !(kz.z > 0.0) {
        return Err(AnalysisError::Parameter(format!(
            "kz_exponents requires nu > 0 and z > 0, got nu = {}, z = {}",
            kz.nu, kz.z
        )));
    }
    if kz.d == 0 {
        return Err(AnalysisError::Parameter(
            "kz_exponents requires dimension d >= 1".into(),
        ));
    }
    let denom = kz.nu * kz.z + 1.0;
    let d = f64::from(kz.d);
    Ok((d * kz.nu / denom, (d + kz.z) * kz.nu / denom))
}

/// Convert an excitation probability and a freeze-out relaxation time into
/// an energy estimate via an effective two-level gap Δ_eff = c/τ̂.
pub fn estimate_excitation_energy(
    p_exc: f64,
    tau_hat: f64,
    c: f64,
) -> AnalysisResult<TwoLevelEstimate> {
    if !(0.0..=1.0).contains(&p_exc) {
        return Err(AnalysisError::Parameter(format!(
            "excitation probability must lie in [0, 1], got {p_exc}"
        )));
    }
    if !(tau_hat > 0.0) {
        return Err(AnalysisError::Parameter(format!(
            "freeze-out relaxation time must be positive, got {tau_hat}"
        )));
    }
    if !(c > 0.0) {
        return Err(AnalysisError::Parameter(format!(
            "gap prefactor must be positive, got {c}"
        )));
    }
    let delta_eff = c / tau_hat;
    Ok(TwoLevelEstimate {
        gap_prefactor: c,
        delta_eff,
        estimated_energy: p_exc * delta_eff,
    })
}
