//! Cross-engine equivalence suite: random small instances run through
//! both the dense exact-diagonalization oracle and the matrix-product
//! engine, comparing ground-state energies and relaxation dynamics.
//!
//! Instances are drawn small enough that the matrix-product ansatz is
//! exact — every bond can saturate its Schmidt rank below the cap — so
//! the two engines must agree to solver tolerance rather than to some
//! truncation-dependent accuracy. A disagreement here is a bug, not
//! discretization noise.
//!
//! The suite is deterministic: parameters are drawn from a counter-based
//! generator seeded explicitly, so a failing case can be re-run bit for
//! bit by quoting its seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bath::{discretize_star, BathParams};
use crate::model::{build_dense, build_mpo, ModelParams, SiteLayout};
use crate::oracle::ed_ground_state;
use crate::protocols::{
    product_guess, run_relaxation, Engine, EngineNumerics, ProtocolError, ProtocolResult,
    RelaxationConfig,
};
use crate::tnet::{dmrg_ground_state, MpsState};

/// Controls for the equivalence sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EquivalenceConfig {
    /// Seed for the parameter draws.
    pub seed: u64,
    /// Bath mode counts to exercise; each adds `cases_per_count` cases.
    pub mode_counts: Vec<usize>,
    pub cases_per_count: usize,
    /// Resonator levels kept (small: the dense oracle must fit).
    pub d_res: usize,
    /// Levels per bath mode.
    pub d_bath: usize,
    /// Length of the relaxation window compared between engines.
    pub t_max: f64,
    pub dt: f64,
    /// Bond cap for the matrix-product runs; with the small local
    /// dimensions above this should exceed every exact Schmidt rank.
    pub max_bond: usize,
    /// Relative ground-state energy agreement required.
    pub energy_rtol: f64,
    /// Absolute agreement required of the normalized readout Σz(t).
    pub sigma_tol: f64,
}

impl Default for EquivalenceConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            mode_counts: vec![1, 2, 3],
            cases_per_count: 2,
            d_res: 4,
            d_bath: 3,
            t_max: 2.0,
            dt: 0.005,
            max_bond: 32,
            energy_rtol: 1e-8,
            sigma_tol: 2e-3,
        }
    }
}

impl EquivalenceConfig {
    pub fn validate(&self) -> ProtocolResult<()> {
        if self.mode_counts.is_empty() || self.mode_counts.iter().any(|&n| n == 0) {
            return Err(ProtocolError::Config(
                "mode counts must be nonempty and positive".into(),
            ));
        }
        if self.cases_per_count == 0 {
            return Err(ProtocolError::Config("need at least one case per count".into()));
        }
        if self.d_res < 2 || self.d_bath < 2 {
            return Err(ProtocolError::Config(format!(
                "local truncations need at least 2 levels (d_res={}, d_bath={})",
                self.d_res, self.d_bath
            )));
        }
        if !(self.t_max > 0.0) || !(self.dt > 0.0) || self.dt > self.t_max {
            return Err(ProtocolError::Config(format!(
                "need 0 < dt <= t_max, got dt={}, t_max={}",
                self.dt, self.t_max
            )));
        }
        if self.max_bond == 0 {
            return Err(ProtocolError::Config("bond cap must be at least 1".into()));
        }
        if !(self.energy_rtol > 0.0) || !(self.sigma_tol > 0.0) {
            return Err(ProtocolError::Config("tolerances must be positive".into()));
        }
        Ok(())
    }

    fn numerics(&self) -> EngineNumerics {
        EngineNumerics {
            d_res: self.d_res,
            d_bath: self.d_bath,
            max_bond: self.max_bond,
            trunc_threshold: 1e-12,
            ..EngineNumerics::default()
        }
    }
}

/// One random instance and how the two engines compared on it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EquivalenceCase {
    pub n_modes: usize,
    pub alpha: f64,
    pub omega_c: f64,
    pub omega_0: f64,
    pub g: f64,
    pub energy_ed: f64,
    pub energy_mps: f64,
    /// |energy_mps − energy_ed| / max(1, |energy_ed|).
    pub energy_error: f64,
    /// max_t |Σz_mps(t) − Σz_ed(t)| over the shared sample grid.
    pub max_sigma_deviation: f64,
    /// Number of shared dynamics samples compared.
    pub dynamics_points: usize,
    pub pass: bool,
}

/// Outcome of the whole sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub cases: Vec<EquivalenceCase>,
    pub all_pass: bool,
}

impl EquivalenceReport {
    /// One line per case, suitable for terminal output.
    pub fn summary(&self) -> String {
        let mut out = String::new();
        for (i, c) in self.cases.iter().enumerate() {
            out.push_str(&format!(
                "case {:2}: n={} alpha={:.3} omega_c={:.2} omega_0={:.2} g={:.2} | \
                 dE_rel={:.2e} max|dSz|={:.2e} .. {}\n",
                i + 1,
                c.n_modes,
                c.alpha,
                c.omega_c,
                c.omega_0,
                c.g,
                c.energy_error,
                c.max_sigma_deviation,
                if c.pass { "pass" } else { "FAIL" },
            ));
        }
        out.push_str(if self.all_pass {
            "equivalence: all cases pass\n"
        } else {
            "equivalence: FAILURES present\n"
        });
        out
    }
}

/// Run the sweep: for each case, compare DMRG against dense
/// diagonalization on the ground-state energy, then run the relaxation
/// protocol through both engines and compare the readout pointwise.
pub fn run_equivalence(config: &EquivalenceConfig) -> ProtocolResult<EquivalenceReport> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let numerics = config.numerics();
    let mut cases = Vec::new();

    for &n_modes in &config.mode_counts {
        for _ in 0..config.cases_per_count {
            let alpha = rng.random_range(0.05..0.3);
            let omega_c = rng.random_range(4.0..10.0);
            let omega_0 = rng.random_range(0.5..1.5);
            let g = rng.random_range(0.2..0.8);

            let params = ModelParams::new(1.0, omega_0, g, 0.0)?;
            let bath_params = BathParams::new(alpha, omega_c, n_modes)?;
            let bath = discretize_star(&bath_params)?;
            let layout = SiteLayout::new(config.d_res, config.d_bath, bath.len())?;

            // ground-state energies
            let h = build_dense(&params, &layout, &bath)?;
            let ed = ed_ground_state(&h)?;
            let mpo = build_mpo(&params, &layout, &bath)?;
            let guess = MpsState::product_state(
                &product_guess(&layout, 1.2),
                config.max_bond,
                1e-12,
            )?;
            let (rep, _) = dmrg_ground_state(&mpo, &guess, &numerics.dmrg_options())?;
            let energy_error = (rep.energy - ed.energy).abs() / ed.energy.abs().max(1.0);

            // relaxation dynamics through the public driver, both engines
            let mut relax = RelaxationConfig {
                model: params,
                bath: bath_params,
                prep_bias: 0.1,
                t_max: config.t_max,
                dt: config.dt,
                sample_stride: 10,
                engine: Engine::Ed,
                numerics,
            };
            let run_ed = run_relaxation(&relax)?;
            relax.engine = Engine::Mps;
            let run_mps = run_relaxation(&relax)?;
            if run_ed.series.len() != run_mps.series.len() {
                return Err(ProtocolError::Config(format!(
                    "engines produced different grids ({} vs {} samples)",
                    run_ed.series.len(),
                    run_mps.series.len()
                )));
            }
            let mut max_dev = 0.0_f64;
            for i in 0..run_ed.series.len() {
                let dt_grid = (run_ed.series.times[i] - run_mps.series.times[i]).abs();
                if dt_grid > 1e-12 {
                    return Err(ProtocolError::Config(format!(
                        "engines produced different grids (t[{i}] differs by {dt_grid:e})"
                    )));
                }
                max_dev =
                    max_dev.max((run_ed.series.values[i] - run_mps.series.values[i]).abs());
            }

            let pass = energy_error <= config.energy_rtol && max_dev <= config.sigma_tol;
            cases.push(EquivalenceCase {
                n_modes,
                alpha,
                omega_c,
                omega_0,
                g,
                energy_ed: ed.energy,
                energy_mps: rep.energy,
                energy_error,
                max_sigma_deviation: max_dev,
                dynamics_points: run_ed.series.len(),
                pass,
            });
        }
    }

    let all_pass = cases.iter().all(|c| c.pass);
    Ok(EquivalenceReport { cases, all_pass })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid() {
        assert!(EquivalenceConfig::default().validate().is_ok());
    }

    #[test]
    fn config_validation_rejects_nonsense() {
        let mut c = EquivalenceConfig::default();
        c.mode_counts = vec![];
        assert!(c.validate().is_err());
        c = EquivalenceConfig::default();
        c.mode_counts = vec![0];
        assert!(c.validate().is_err());
        c = EquivalenceConfig::default();
        c.dt = 0.0;
        assert!(c.validate().is_err());
        c = EquivalenceConfig::default();
        c.sigma_tol = 0.0;
        assert!(c.validate().is_err());
    }

    // One reduced case end to end; the full default sweep runs in the
    // integration suite and behind the command-line `validate`.
    #[test]
    fn single_small_case_agrees_across_engines() {
        let config = EquivalenceConfig {
            seed: 42,
            mode_counts: vec![1],
            cases_per_count: 1,
            t_max: 1.0,
            dt: 0.01,
            ..EquivalenceConfig::default()
        };
        let report = run_equivalence(&config).unwrap();
        assert_eq!(report.cases.len(), 1);
        let case = &report.cases[0];
        assert!(
            case.pass,
            "dE_rel={:.3e}, max|dSz|={:.3e}",
            case.energy_error, case.max_sigma_deviation
        );
        assert!(case.dynamics_points >= 5);
        let text = report.summary();
        assert!(text.contains("case  1"));
        assert!(text.contains("all cases pass"));
    }
}
