//! Ohmic bath: spectral density, star-geometry discretization, and the
//! resonator + bath normal-mode transformation.
//!
//! The resonator (frequency ω₀) couples via its quadrature to a set of
//! harmonic modes in star geometry. The modes discretize an Ohmic spectral
//! density J(ω) = α·ω·Θ(ω_c − ω) with the convention
//!
//!   J(ω) = π·Σ_k λ_k²·δ(ω − ω_k),
//!
//! so on a linear midpoint grid ω_k = (k − 1/2)·ω_c/N (k = 1..N) the
//! couplings are λ_k = √(J(ω_k)·δω/π). This makes the total coupling weight
//! exact: π·Σ_k λ_k² = α·ω_c²/2 independently of N.
//!
//! The quadratic (resonator + bath) sector including the counterterm is
//! diagonalized exactly; the spin then sees a collection of normal modes
//! with frequencies Ω_j and couplings g̃_j = g·O₀ⱼ·√(ω₀/Ω_j). The
//! associated effective spectral density,
//!
//!   J_eff(ω) = (π/2)·Σ_j g̃_j²·δ(ω − Ω_j),
//!
//! behaves at low frequency as (α_eff/2)·ω with α_eff = 4g²α/ω₀², which is
//! the quantity the spin dynamics is controlled by.

use ndarray::Array2;
use ndarray_linalg::{Eigh, UPLO};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BathError {
    #[error("bath configuration: {0}")]
    Config(String),
    #[error("spectral density domain: frequency must be non-negative, got {0}")]
    NegativeFrequency(f64),
    #[error(
        "normal-mode problem is not positive definite (lowest eigenvalue {0:e}); \
         the counterterm is missing or inconsistent with the couplings"
    )]
    Stability(f64),
    #[error("linear algebra backend: {0}")]
    Linalg(String),
}

pub type BathResult<T> = Result<T, BathError>;

/// Parameters of the continuous Ohmic environment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BathParams {
    /// Dimensionless coupling strength α in J(ω) = α·ω.
    pub alpha: f64,
    /// Hard cutoff frequency ω_c.
    pub omega_c: f64,
    /// Number of discrete modes.
    pub n_modes: usize,
}

impl BathParams {
    pub fn new(alpha: f64, omega_c: f64, n_modes: usize) -> BathResult<Self> {
        let p = Self { alpha, omega_c, n_modes };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> BathResult<()> {
        if !(self.alpha >= 0.0) || !self.alpha.is_finite() {
            return Err(BathError::Config(format!(
                "coupling strength must satisfy alpha >= 0, got {}",
                self.alpha
            )));
        }
        if !(self.omega_c > 0.0) || !self.omega_c.is_finite() {
            return Err(BathError::Config(format!(
                "cutoff must satisfy omega_c > 0, got {}",
                self.omega_c
            )));
        }
        if self.n_modes == 0 {
            return Err(BathError::Config("n_modes must be at least 1".into()));
        }
        Ok(())
    }
}

/// Frequency grid used by [`discretize_star`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridKind {
    /// Midpoint rule on a uniform grid over [0, ω_c]. Default, and the grid
    /// all quantitative checks are tied to.
    Linear,
    /// Logarithmically spaced bins over [10⁻⁴·ω_c, ω_c], each bin carrying
    /// its exact integrated coupling weight at its J-weighted centroid.
    /// Useful for probing low-frequency behavior; not the validated default.
    Logarithmic,
}

/// A concrete set of bath modes, their couplings, and the quadratic
/// counterterm they induce.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscretizedBath {
    /// Mode frequencies ω_k, strictly increasing.
    pub frequencies: Vec<f64>,
    /// Couplings λ_k ≥ 0 between the resonator quadrature and mode k.
    pub couplings: Vec<f64>,
    /// Counterterm coefficient c = 2·Σ_k λ_k²/ω_k. The Hamiltonian carries
    /// the compensating potential (c/2)·(a + a†)² on the resonator, which
    /// keeps the coupled quadratic sector positive definite.
    pub counterterm: f64,
    /// α of the continuum this bath discretizes (0 for a hand-built bath).
    pub alpha: f64,
    /// Cutoff of the discretized continuum.
    pub omega_c: f64,
}

impl DiscretizedBath {
    /// Number of bath modes.
    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }

    /// A bath with no modes: the resonator decouples and the model reduces
    /// to the closed two-site problem.
    pub fn closed() -> Self {
        Self {
            frequencies: Vec::new(),
            couplings: Vec::new(),
            counterterm: 0.0,
            alpha: 0.0,
            omega_c: 0.0,
        }
    }

    /// Total coupling weight π·Σ_k λ_k², compensated summation. Equals
    /// α·ω_c²/2 exactly for the linear midpoint grid.
    pub fn coupling_weight(&self) -> f64 {
        std::f64::consts::PI * kahan_sum(self.couplings.iter().map(|l| l * l))
    }
}

/// Ohmic spectral density with a hard cutoff: J(ω) = α·ω for ω ≤ ω_c,
/// zero above.
pub fn ohmic_density(omega: f64, params: &BathParams) -> BathResult<f64> {
    params.validate()?;
    if !(omega >= 0.0) {
        return Err(BathError::NegativeFrequency(omega));
    }
    Ok(if omega <= params.omega_c { params.alpha * omega } else { 0.0 })
}

/// Discretize the Ohmic density on the default linear midpoint grid.
pub fn discretize_star(params: &BathParams) -> BathResult<DiscretizedBath> {
    discretize_star_with(params, GridKind::Linear)
}

/// Discretize the Ohmic density on the requested grid.
pub fn discretize_star_with(params: &BathParams, grid: GridKind) -> BathResult<DiscretizedBath> {
    params.validate()?;
    let n = params.n_modes;
    let mut frequencies = Vec::with_capacity(n);
    let mut couplings = Vec::with_capacity(n);
    match grid {
        GridKind::Linear => {
            let dw = params.omega_c / n as f64;
            for k in 1..=n {
                let w = (k as f64 - 0.5) * dw;
                frequencies.push(w);
                couplings.push((params.alpha * w * dw / std::f64::consts::PI).sqrt());
            }
        }
        GridKind::Logarithmic => {
            let w_min = 1e-4 * params.omega_c;
            let ratio = (params.omega_c / w_min).powf(1.0 / n as f64);
            let mut lo = w_min;
            for _ in 0..n {
                let hi = lo * ratio;
                // exact bin weight ∫ J/π = α(hi² − lo²)/(2π) at the
                // J-weighted centroid (2/3)(hi³ − lo³)/(hi² − lo²)
                let weight = params.alpha * (hi * hi - lo * lo) / (2.0 * std::f64::consts::PI);
                let centroid = 2.0 / 3.0 * (hi * hi * hi - lo * lo * lo) / (hi * hi - lo * lo);
                frequencies.push(centroid);
                couplings.push(weight.sqrt());
                lo = hi;
            }
        }
    }
    let counterterm =
        2.0 * kahan_sum(frequencies.iter().zip(&couplings).map(|(&w, &l)| l * l / w));
    Ok(DiscretizedBath {
        frequencies,
        couplings,
        counterterm,
        alpha: params.alpha,
        omega_c: params.omega_c,
    })
}

/// The environment seen by the spin after exact diagonalization of the
/// coupled resonator + bath quadratic sector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectiveBath {
    /// Normal-mode frequencies Ω_j, ascending.
    pub normal_frequencies: Vec<f64>,
    /// Spin couplings g̃_j = g·|O₀ⱼ|·√(ω₀/Ω_j), non-negative by convention
    /// (the eigenvector sign is not physical).
    pub spin_couplings: Vec<f64>,
    /// Effective Ohmic strength α_eff = 4g²α/ω₀² of the low-frequency
    /// continuum limit.
    pub alpha_eff: f64,
}

/// Diagonalize the quadratic resonator + bath sector.
///
/// The potential matrix in mass-weighted coordinates is
///
///   V₀₀ = ω₀² + 2ω₀·c,  V_kk = ω_k²,  V₀k = 2λ_k√(ω₀ω_k),
///
/// with c the counterterm stored on the bath. With the exact counterterm
/// the matrix is positive definite by construction; a mismatched
/// counterterm can make it indefinite, which is reported as a stability
/// error. The normal-mode frequencies do not depend on the spin coupling g,
/// which only scales the couplings g̃_j.
pub fn normal_modes(omega_0: f64, g: f64, bath: &DiscretizedBath) -> BathResult<EffectiveBath> {
    if !(omega_0 > 0.0) || !omega_0.is_finite() {
        return Err(BathError::Config(format!(
            "resonator frequency must be positive, got {omega_0}"
        )));
    }
    if !(g >= 0.0) || !g.is_finite() {
        return Err(BathError::Config(format!(
            "spin coupling must be non-negative, got {g}"
        )));
    }
    if bath.frequencies.len() != bath.couplings.len() {
        return Err(BathError::Config(format!(
            "bath has {} frequencies but {} couplings",
            bath.frequencies.len(),
            bath.couplings.len()
        )));
    }
    if bath.frequencies.iter().any(|&w| !(w > 0.0)) {
        return Err(BathError::Config("bath frequencies must be positive".into()));
    }

    let n = bath.len();
    let mut v = Array2::<f64>::zeros((n + 1, n + 1));
    v[(0, 0)] = omega_0 * omega_0 + 2.0 * omega_0 * bath.counterterm;
    for k in 0..n {
        let w = bath.frequencies[k];
        let l = bath.couplings[k];
        v[(k + 1, k + 1)] = w * w;
        let off = 2.0 * l * (omega_0 * w).sqrt();
        v[(0, k + 1)] = off;
        v[(k + 1, 0)] = off;
    }
    let (evals, evecs) = v
        .eigh(UPLO::Lower)
        .map_err(|e| BathError::Linalg(e.to_string()))?;
    if let Some(&min) = evals.iter().find(|&&e| e <= 0.0) {
        return Err(BathError::Stability(min));
    }
    let normal_frequencies: Vec<f64> = evals.iter().map(|&e| e.sqrt()).collect();
    let spin_couplings: Vec<f64> = normal_frequencies
        .iter()
        .enumerate()
        .map(|(j, &wj)| g * evecs[(0, j)].abs() * (omega_0 / wj).sqrt())
        .collect();
    let alpha_eff = 4.0 * g * g * bath.alpha / (omega_0 * omega_0);
    Ok(EffectiveBath { normal_frequencies, spin_couplings, alpha_eff })
}

impl EffectiveBath {
    /// Pointwise estimate of the effective spectral density: for each
    /// normal mode, (π/2)·g̃_j² divided by the local frequency spacing.
    /// Needs at least two modes to estimate a spacing.
    pub fn density_points(&self) -> Vec<(f64, f64)> {
        let w = &self.normal_frequencies;
        let g2 = &self.spin_couplings;
        let n = w.len();
        if n < 2 {
            return Vec::new();
        }
        (0..n)
            .map(|j| {
                let spacing = if j == 0 {
                    w[1] - w[0]
                } else if j == n - 1 {
                    w[n - 1] - w[n - 2]
                } else {
                    0.5 * (w[j + 1] - w[j - 1])
                };
                (w[j], 0.5 * std::f64::consts::PI * g2[j] * g2[j] / spacing)
            })
            .collect()
    }

    /// Low-frequency slope of the reconstructed effective density from a
    /// through-origin least-squares fit over modes with Ω_j ≤ `omega_max`.
    /// Converges to α_eff/2 as the discretization is refined. Returns
    /// `None` when fewer than two modes fall below `omega_max`.
    pub fn low_frequency_slope(&self, omega_max: f64) -> Option<f64> {
        let pts: Vec<(f64, f64)> = self
            .density_points()
            .into_iter()
            .filter(|&(w, _)| w <= omega_max)
            .collect();
        if pts.len() < 2 {
            return None;
        }
        let num: f64 = pts.iter().map(|&(w, j)| w * j).sum();
        let den: f64 = pts.iter().map(|&(w, _)| w * w).sum();
        (den > 0.0).then(|| num / den)
    }
}

fn kahan_sum(it: impl IntoIterator<Item = f64>) -> f64 {
    let mut s = 0.0;
    let mut c = 0.0;
    for x in it {
        let y = x - c;
        let t = s + y;
        c = (t - s) - y;
        s = t;
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    #[test]
    fn ohmic_density_piecewise_linear() {
        let p = BathParams::new(0.2, 10.0, 4).unwrap();
        assert_eq!(ohmic_density(0.0, &p).unwrap(), 0.0);
        assert_relative_eq!(ohmic_density(3.0, &p).unwrap(), 0.6, max_relative = 1e-15);
        assert_eq!(ohmic_density(10.0, &p).unwrap(), 2.0);
        assert_eq!(ohmic_density(10.0 + 1e-9, &p).unwrap(), 0.0);
        assert!(ohmic_density(-1.0, &p).is_err());
    }

    #[test]
    fn params_validation() {
        assert!(BathParams::new(-0.1, 10.0, 4).is_err());
        assert!(BathParams::new(0.1, 0.0, 4).is_err());
        assert!(BathParams::new(0.1, 10.0, 0).is_err());
        assert!(BathParams::new(0.0, 10.0, 4).is_ok()); // decoupled bath is legal
    }

    #[test]
    fn midpoint_grid_layout() {
        let p = BathParams::new(1.0, 10.0, 4).unwrap();
        let bath = discretize_star(&p).unwrap();
        assert_eq!(bath.frequencies, vec![1.25, 3.75, 6.25, 8.75]);
        // single mode: λ₁ = √(J(ω_c/2)·ω_c/π) = √(50/π) for α = 1, ω_c = 10
        let single = discretize_star(&BathParams::new(1.0, 10.0, 1).unwrap()).unwrap();
        assert_eq!(single.frequencies, vec![5.0]);
        assert_abs_diff_eq!(single.couplings[0], 3.989_422_804_014_327, epsilon = 1e-15);
    }

    #[test]
    fn coupling_weight_sum_rule() {
        for &n in &[1usize, 10, 100, 1000] {
            let p = BathParams::new(0.37, 8.5, n).unwrap();
            let bath = discretize_star(&p).unwrap();
            let exact = 0.37 * 8.5 * 8.5 / 2.0;
            assert_relative_eq!(bath.coupling_weight(), exact, max_relative = 1e-13);
        }
    }

    #[test]
    fn counterterm_closed_form_on_linear_grid() {
        // λ_k²/ω_k = α·δω/π per mode, so c = 2αω_c/π independent of N
        for &(alpha, wc, n) in &[(0.2, 10.0, 7), (1.3, 4.0, 60), (0.05, 25.0, 333)] {
            let bath = discretize_star(&BathParams::new(alpha, wc, n).unwrap()).unwrap();
            assert_relative_eq!(
                bath.counterterm,
                2.0 * alpha * wc / std::f64::consts::PI,
                max_relative = 1e-13
            );
        }
    }

    #[test]
    fn log_grid_preserves_total_weight() {
        let p = BathParams::new(0.2, 10.0, 40).unwrap();
        let bath = discretize_star_with(&p, GridKind::Logarithmic).unwrap();
        // bins tile [10⁻⁴ω_c, ω_c], so the weight misses only the
        // [0, 10⁻⁴ω_c] sliver of relative size 1e-8
        assert_relative_eq!(
            bath.coupling_weight(),
            0.2 * 100.0 / 2.0,
            max_relative = 1e-7
        );
        assert!(bath.frequencies.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn closed_bath_reduces_to_bare_resonator() {
        let eff = normal_modes(0.75, 0.3, &DiscretizedBath::closed()).unwrap();
        assert_eq!(eff.normal_frequencies, vec![0.75]);
        assert_eq!(eff.spin_couplings, vec![0.3]);
        assert_eq!(eff.alpha_eff, 0.0);
    }

    #[test]
    fn single_mode_matches_two_by_two_formula() {
        let p = BathParams::new(0.3, 6.0, 1).unwrap();
        let bath = discretize_star(&p).unwrap();
        let w0 = 0.9;
        let eff = normal_modes(w0, 0.5, &bath).unwrap();

        let w1 = bath.frequencies[0];
        let l = bath.couplings[0];
        let a = w0 * w0 + 2.0 * w0 * bath.counterterm;
        let b = w1 * w1;
        let v = 2.0 * l * (w0 * w1).sqrt();
        let mid = 0.5 * (a + b);
        let disc = (0.25 * (a - b) * (a - b) + v * v).sqrt();
        assert_relative_eq!(eff.normal_frequencies[0], (mid - disc).sqrt(), max_relative = 1e-13);
        assert_relative_eq!(eff.normal_frequencies[1], (mid + disc).sqrt(), max_relative = 1e-13);
    }

    #[test]
    fn spectrum_independent_of_spin_coupling() {
        let p = BathParams::new(0.2, 10.0, 24).unwrap();
        let bath = discretize_star(&p).unwrap();
        let e1 = normal_modes(0.75, 0.3, &bath).unwrap();
        let e2 = normal_modes(0.75, 0.7, &bath).unwrap();
        assert_eq!(e1.normal_frequencies, e2.normal_frequencies);
    }

    #[test]
    fn couplings_scale_linearly_with_g() {
        let p = BathParams::new(0.2, 10.0, 16).unwrap();
        let bath = discretize_star(&p).unwrap();
        let e1 = normal_modes(0.75, 0.25, &bath).unwrap();
        let e2 = normal_modes(0.75, 0.5, &bath).unwrap();
        for (a, b) in e1.spin_couplings.iter().zip(&e2.spin_couplings) {
            assert_eq!(2.0 * a, *b);
        }
    }

    #[test]
    fn missing_counterterm_destabilizes_strong_coupling() {
        let p = BathParams::new(0.2, 10.0, 32).unwrap();
        let mut bath = discretize_star(&p).unwrap();
        bath.counterterm = 0.0;
        // shift 4ω₀Σλ²/ω = 2ω₀·(2αω_c/π) ≈ 1.91 exceeds ω₀² ≈ 0.56
        match normal_modes(0.75, 0.3, &bath) {
            Err(BathError::Stability(min)) => assert!(min < 0.0),
            other => panic!("expected stability error, got {other:?}"),
        }
    }

    #[test]
    fn effective_density_slope_matches_continuum() {
        let p = BathParams::new(0.2, 10.0, 400).unwrap();
        let bath = discretize_star(&p).unwrap();
        let (w0, g) = (0.75, 0.3);
        let eff = normal_modes(w0, g, &bath).unwrap();
        let expected = 2.0 * g * g * bath.alpha / (w0 * w0);

        // The reconstructed density carries the physical O(ω²) correction
        // from the resonator response, so the ω → 0 slope is read off by
        // fitting J/ω linearly in ω² over a window well below ω₀ and
        // taking the intercept.
        let pts: Vec<(f64, f64)> = eff
            .density_points()
            .into_iter()
            .filter(|&(w, _)| w <= 0.3)
            .map(|(w, j)| (w * w, j / w))
            .collect();
        assert!(pts.len() >= 8, "only {} modes below the fit window", pts.len());
        let n = pts.len() as f64;
        let sx: f64 = pts.iter().map(|p| p.0).sum();
        let sy: f64 = pts.iter().map(|p| p.1).sum();
        let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
        let curvature = (n * sxy - sx * sy) / (n * sxx - sx * sx);
        let intercept = (sy - curvature * sx) / n;
        assert_relative_eq!(intercept, expected, max_relative = 0.03);

        // the plain windowed estimator carries that finite-ω bias, so it
        // agrees more loosely
        let direct = eff.low_frequency_slope(0.2).unwrap();
        assert_relative_eq!(direct, expected, max_relative = 0.12);
        assert_relative_eq!(eff.alpha_eff, 2.0 * expected, max_relative = 1e-15);
    }
}
