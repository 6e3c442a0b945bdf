//! Exact dense solvers for cross-checking the tensor-network engines at
//! small Hilbert-space dimensions.
//!
//! Everything here works on the dense real-symmetric matrices produced by
//! [`crate::model::build_dense`] and scales as O(dim³); the dimension cap
//! keeps accidental large inputs from locking up a run. Time-dependent
//! evolution uses a midpoint rule: each step applies the exact propagator
//! of the Hamiltonian evaluated at the step's midpoint, so the scheme is
//! second order in the step size with no additional splitting error.

use ndarray::{Array1, Array2};
use ndarray_linalg::{Eigh, UPLO};
use num_complex::Complex64 as C64;
use thiserror::Error;

use crate::model::DEFAULT_DENSE_DIM_CAP;

#[derive(Debug, Error)]
pub enum OracleError {
    /// Invalid input (non-square, non-symmetric, bad state, ...).
    #[error("oracle input: {0}")]
    Config(String),
    /// The eigensolver failed or produced an inconsistent result.
    #[error("dense linear algebra: {0}")]
    Linalg(String),
    /// Refusing to diagonalize something this large.
    #[error("dimension {dim} exceeds the dense cap {cap}")]
    DimensionCap { dim: usize, cap: usize },
}

pub type OracleResult<T> = Result<T, OracleError>;

/// A normalized dense state vector.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseState {
    pub amplitudes: Array1<C64>,
}

impl DenseState {
    /// Wrap and normalize a vector; zero or non-finite norm is an error.
    pub fn new(amplitudes: Array1<C64>) -> OracleResult<Self> {
        let norm = amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(OracleError::Config(format!(
                "state has invalid norm {norm}"
            )));
        }
        Ok(Self { amplitudes: amplitudes.mapv(|z| z / norm) })
    }

    /// Basis state |index⟩ in a space of the given dimension.
    pub fn basis(dim: usize, index: usize) -> OracleResult<Self> {
        if index >= dim {
            return Err(OracleError::Config(format!(
                "basis index {index} out of range for dimension {dim}"
            )));
        }
        let mut v = Array1::<C64>::zeros(dim);
        v[index] = C64::new(1.0, 0.0);
        Ok(Self { amplitudes: v })
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// |⟨self|other⟩|².
    pub fn fidelity(&self, other: &Self) -> f64 {
        self.amplitudes
            .iter()
            .zip(other.amplitudes.iter())
            .map(|(a, b)| a.conj() * b)
            .sum::<C64>()
            .norm_sqr()
    }
}

fn check_square_symmetric(h: &Array2<f64>) -> OracleResult<usize> {
    let (r, c) = h.dim();
    if r != c {
        return Err(OracleError::Config(format!("matrix is {r}×{c}, not square")));
    }
    if r == 0 {
        return Err(OracleError::Config("matrix is empty".into()));
    }
    if r > DEFAULT_DENSE_DIM_CAP {
        return Err(OracleError::DimensionCap { dim: r, cap: DEFAULT_DENSE_DIM_CAP });
    }
    let mut scale: f64 = 1.0;
    let mut asym: f64 = 0.0;
    for i in 0..r {
        for j in i..r {
            scale = scale.max(h[(i, j)].abs());
            asym = asym.max((h[(i, j)] - h[(j, i)]).abs());
        }
    }
    if !scale.is_finite() {
        return Err(OracleError::Config("matrix has non-finite entries".into()));
    }
    if asym > 1e-10 * scale {
        return Err(OracleError::Config(format!(
            "matrix is not symmetric (deviation {asym:.3e} at scale {scale:.3e})"
        )));
    }
    Ok(r)
}

/// Ground-state energy, excitation gap, and eigenvector.
#[derive(Debug, Clone)]
pub struct EdGroundState {
    pub energy: f64,
    /// Energy of the first excited state minus the ground energy.
    pub gap: f64,
    pub state: DenseState,
}

/// Diagonalize a real-symmetric Hamiltonian and return its ground state.
pub fn ed_ground_state(h: &Array2<f64>) -> OracleResult<EdGroundState> {
    let dim = check_square_symmetric(h)?;
    if dim < 2 {
        return Err(OracleError::Config(
            "a gap needs at least two levels; got a 1×1 matrix".into(),
        ));
    }
    let (evals, evecs) = h
        .eigh(UPLO::Lower)
        .map_err(|e| OracleError::Linalg(e.to_string()))?;
    let energy = evals[0];
    let gap = evals[1] - evals[0];
    let ground: Array1<f64> = evecs.column(0).to_owned();
    // eigenpair residual check: catches a silently wrong LAPACK call
    let hg = h.dot(&ground);
    let res = hg
        .iter()
        .zip(ground.iter())
        .map(|(a, b)| (a - energy * b).powi(2))
        .sum::<f64>()
        .sqrt();
    let scale = evals.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    if res > 1e-8 * scale {
        return Err(OracleError::Linalg(format!(
            "eigenpair residual {res:.3e} exceeds tolerance at scale {scale:.3e}"
        )));
    }
    let state = DenseState::new(ground.mapv(|v| C64::new(v, 0.0)))?;
    Ok(EdGroundState { energy, gap, state })
}

/// Cached eigendecomposition for repeated exact propagation under one
/// static Hamiltonian.
pub struct EdPropagator {
    evals: Array1<f64>,
    evecs: Array2<f64>,
}

impl EdPropagator {
    pub fn new(h: &Array2<f64>) -> OracleResult<Self> {
        check_square_symmetric(h)?;
        let (evals, evecs) = h
            .eigh(UPLO::Lower)
            .map_err(|e| OracleError::Linalg(e.to_string()))?;
        Ok(Self { evals, evecs })
    }

    pub fn dim(&self) -> usize {
        self.evals.len()
    }

    pub fn eigenvalues(&self) -> &Array1<f64> {
        &self.evals
    }

    /// exp(−i·H·t)|ψ⟩, exact up to the eigendecomposition.
    pub fn evolve(&self, state: &DenseState, t: f64) -> OracleResult<DenseState> {
        if state.dim() != self.dim() {
            return Err(OracleError::Config(format!(
                "state dimension {} does not match operator dimension {}",
                state.dim(),
                self.dim()
            )));
        }
        let vre = state.amplitudes.mapv(|z| z.re);
        let vim = state.amplitudes.mapv(|z| z.im);
        let mut cre = self.evecs.t().dot(&vre);
        let mut cim = self.evecs.t().dot(&vim);
        for k in 0..self.dim() {
            let (s, c) = (self.evals[k] * t).sin_cos();
            // (cre + i·cim)·(c − i·s)
            let re = cre[k] * c + cim[k] * s;
            let im = cim[k] * c - cre[k] * s;
            cre[k] = re;
            cim[k] = im;
        }
        let ore = self.evecs.dot(&cre);
        let oim = self.evecs.dot(&cim);
        let amplitudes = Array1::from_iter(
            ore.iter().zip(oim.iter()).map(|(&re, &im)| C64::new(re, im)),
        );
        // unitary evolution: keep amplitudes as-is (norm preserved)
        Ok(DenseState { amplitudes })
    }
}

/// exp(−i·H·t)|ψ⟩ for a static Hamiltonian.
pub fn ed_evolve_static(
    h: &Array2<f64>,
    psi: &DenseState,
    t: f64,
) -> OracleResult<DenseState> {
    EdPropagator::new(h)?.evolve(psi, t)
}

/// Evolve under a time-dependent Hamiltonian from `t0` to `t1` using
/// uniform midpoint steps of size ≈ `dt`: each step applies the exact
/// propagator of `h_of_t(t + dt/2)`.
pub fn ed_evolve<F>(
    mut h_of_t: F,
    psi: &DenseState,
    t0: f64,
    t1: f64,
    dt: f64,
) -> OracleResult<DenseState>
where
    F: FnMut(f64) -> Array2<f64>,
{
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(OracleError::Config(format!("step size must be positive, got {dt}")));
    }
    if !(t1 >= t0) {
        return Err(OracleError::Config(format!(
            "time interval runs backwards: {t0} .. {t1}"
        )));
    }
    let span = t1 - t0;
    if span == 0.0 {
        return Ok(psi.clone());
    }
    let n = ((span / dt).round() as usize).max(1);
    let h = span / n as f64;
    let mut state = psi.clone();
    for k in 0..n {
        let tmid = t0 + (k as f64 + 0.5) * h;
        let hmat = h_of_t(tmid);
        state = EdPropagator::new(&hmat)?.evolve(&state, h)?;
    }
    Ok(state)
}

/// Apply a single-site operator to a dense state on a product space with
/// the given local dimensions.
pub fn apply_local_dense(
    op: &Array2<f64>,
    dims: &[usize],
    site: usize,
    v: &Array1<C64>,
) -> OracleResult<Array1<C64>> {
    if site >= dims.len() {
        return Err(OracleError::Config(format!(
            "site {site} out of range for {} sites",
            dims.len()
        )));
    }
    let d = dims[site];
    if op.dim() != (d, d) {
        return Err(OracleError::Config(format!(
            "operator shape {:?} does not match local dimension {d}",
            op.dim()
        )));
    }
    let total: usize = dims.iter().product();
    if v.len() != total {
        return Err(OracleError::Config(format!(
            "state length {} does not match product dimension {total}",
            v.len()
        )));
    }
    let stride: usize = dims[site + 1..].iter().product();
    let outer: usize = dims[..site].iter().product();
    let mut out = Array1::<C64>::zeros(total);
    for o in 0..outer {
        let base = o * d * stride;
        for a in 0..d {
            for b in 0..d {
                let w = op[(a, b)];
                if w == 0.0 {
                    continue;
                }
                let rb = base + a * stride;
                let cb = base + b * stride;
                for s in 0..stride {
                    out[rb + s] += w * v[cb + s];
                }
            }
        }
    }
    Ok(out)
}

/// ⟨ψ|O_site|ψ⟩ for a Hermitian single-site operator (state assumed
/// normalized).
pub fn expect_local_dense(
    op: &Array2<f64>,
    dims: &[usize],
    site: usize,
    v: &Array1<C64>,
) -> OracleResult<f64> {
    let ov = apply_local_dense(op, dims, site, v)?;
    Ok(v
        .iter()
        .zip(ov.iter())
        .map(|(a, b)| a.conj() * b)
        .sum::<C64>()
        .re)
}

/// ⟨ψ|H|ψ⟩ for a dense real-symmetric operator (state assumed normalized).
pub fn expect_dense(h: &Array2<f64>, v: &Array1<C64>) -> f64 {
    let vre = v.mapv(|z| z.re);
    let vim = v.mapv(|z| z.im);
    let hre = h.dot(&vre);
    let him = h.dot(&vim);
    let mut acc = 0.0;
    for i in 0..v.len() {
        acc += vre[i] * hre[i] + vim[i] * him[i];
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bath::DiscretizedBath;
    use crate::model::{build_dense, ops, ModelParams, SiteLayout};
    use approx::assert_abs_diff_eq;

    fn closed_rabi(g: f64, d_res: usize) -> Array2<f64> {
        let p = ModelParams::new(1.0, 0.75, g, 0.0).unwrap();
        let layout = SiteLayout::new(d_res, 2, 0).unwrap();
        build_dense(&p, &layout, &DiscretizedBath::closed()).unwrap()
    }

    #[test]
    fn bare_spin_ground_state() {
        let h = ops::spin_local(1.0, 0.0);
        let gs = ed_ground_state(&h).unwrap();
        assert_abs_diff_eq!(gs.energy, -0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(gs.gap, 1.0, epsilon = 1e-14);
        // ground state of −σx/2 is the symmetric combination
        let v = &gs.state.amplitudes;
        assert_abs_diff_eq!((v[0].conj() * v[1]).re, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn decoupled_resonator_leaves_spin_energy() {
        let h = closed_rabi(0.0, 6);
        let gs = ed_ground_state(&h).unwrap();
        assert_abs_diff_eq!(gs.energy, -0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(gs.gap, 0.75, epsilon = 1e-12);
    }

    #[test]
    fn weak_coupling_energy_matches_second_order_shift() {
        // E ≈ −Δ/2 − g²/(ω₀ + Δ) for small g (dispersive regime)
        let g = 0.1;
        let h = closed_rabi(g, 30);
        let gs = ed_ground_state(&h).unwrap();
        let pt2 = -0.5 - g * g / (0.75 + 1.0);
        assert_abs_diff_eq!(gs.energy, pt2, epsilon = 5e-4);
        // truncation-converged: doubling the cutoff moves nothing
        let gs2 = ed_ground_state(&closed_rabi(g, 40)).unwrap();
        assert_abs_diff_eq!(gs.energy, gs2.energy, epsilon = 1e-12);
    }

    #[test]
    fn spin_precession_is_cosine() {
        // |↑⟩ under −(Δ/2)σx: ⟨σz(t)⟩ = cos(Δ t)
        let h = ops::spin_local(1.0, 0.0);
        let prop = EdPropagator::new(&h).unwrap();
        let psi0 = DenseState::basis(2, 0).unwrap();
        for &t in &[0.0, 0.3, 0.7, 2.0, 6.1] {
            let psi = prop.evolve(&psi0, t).unwrap();
            let sz = expect_local_dense(&ops::sigma_z(), &[2], 0, &psi.amplitudes).unwrap();
            assert_abs_diff_eq!(sz, t.cos(), epsilon = 1e-12);
            assert_abs_diff_eq!(psi.norm(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn midpoint_scheme_is_exact_for_static_generators() {
        let h = closed_rabi(0.4, 5);
        let psi0 = DenseState::basis(h.dim().0, 3).unwrap();
        let direct = ed_evolve_static(&h, &psi0, 1.7).unwrap();
        let stepped = ed_evolve(|_| h.clone(), &psi0, 0.0, 1.7, 0.05).unwrap();
        assert!(direct.fidelity(&stepped) > 1.0 - 1e-12);
    }

    #[test]
    fn midpoint_scheme_converges_quadratically() {
        // driven two-level problem with a time-dependent bias
        let h_of = |t: f64| ops::spin_local(1.0, 0.0) + ops::sigma_z().mapv(|v| v * 0.5 * t);
        let psi0 = DenseState::basis(2, 0).unwrap();
        let fine = ed_evolve(h_of, &psi0, 0.0, 2.0, 1e-4).unwrap();
        let coarse = ed_evolve(h_of, &psi0, 0.0, 2.0, 4e-3).unwrap();
        let coarser = ed_evolve(h_of, &psi0, 0.0, 2.0, 8e-3).unwrap();
        let err_c = 1.0 - coarse.fidelity(&fine);
        let err_cc = 1.0 - coarser.fidelity(&fine);
        assert!(err_cc < 1e-6, "coarse error unexpectedly large: {err_cc}");
        // halving the step should cut the (infidelity) error by ~16 = 4²
        let ratio = err_cc / err_c.max(1e-18);
        assert!(ratio > 6.0, "order-2 convergence not seen: ratio {ratio}");
    }

    #[test]
    fn local_application_matches_kronecker_product() {
        let dims = [2usize, 3];
        let op = ndarray::array![[0.3, 0.7, 0.0], [0.7, -0.2, 1.1], [0.0, 1.1, 0.9]];
        let mut v = Array1::<C64>::zeros(6);
        for i in 0..6 {
            v[i] = C64::new(0.1 * i as f64 + 0.2, 0.05 * i as f64 - 0.1);
        }
        let got = apply_local_dense(&op, &dims, 1, &v).unwrap();
        // reference: (I₂ ⊗ op)·v
        let mut expected = Array1::<C64>::zeros(6);
        for blk in 0..2 {
            for a in 0..3 {
                for b in 0..3 {
                    expected[blk * 3 + a] += C64::new(op[(a, b)], 0.0) * v[blk * 3 + b];
                }
            }
        }
        for i in 0..6 {
            assert_abs_diff_eq!(got[i].re, expected[i].re, epsilon = 1e-14);
            assert_abs_diff_eq!(got[i].im, expected[i].im, epsilon = 1e-14);
        }
    }

    #[test]
    fn input_validation() {
        assert!(DenseState::new(Array1::<C64>::zeros(4)).is_err());
        assert!(DenseState::basis(3, 3).is_err());
        let rect = Array2::<f64>::zeros((2, 3));
        assert!(matches!(ed_ground_state(&rect), Err(OracleError::Config(_))));
        let mut asym = Array2::<f64>::zeros((3, 3));
        asym[(0, 1)] = 1.0;
        assert!(matches!(ed_ground_state(&asym), Err(OracleError::Config(_))));
        let h = ops::spin_local(1.0, 0.0);
        let psi = DenseState::basis(3, 0).unwrap();
        assert!(EdPropagator::new(&h).unwrap().evolve(&psi, 1.0).is_err());
        assert!(ed_evolve(|_| h.clone(), &DenseState::basis(2, 0).unwrap(), 1.0, 0.0, 0.1).is_err());
    }
}
