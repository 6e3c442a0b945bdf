//! Hamiltonian assembly for a two-level system coupled to a resonator
//! that is itself coupled to a discretized bosonic bath.
//!
//! In units where the qubit splitting sets the scale, the Hamiltonian is
//!
//! ```text
//! H = −(Δ/2)σx + εσz + ω₀ a†a + g σz (a + a†)
//!   + Σ_k ω_k b_k†b_k + Σ_k λ_k (a + a†)(b_k + b_k†)
//!   + (c/2)(a + a†)²,
//! ```
//!
//! with `c` the quadratic compensation stored on the discretized bath (it
//! keeps the coupled oscillator block positive definite, see the bath
//! module). Site order is always: spin, resonator, then bath modes in
//! ascending frequency.
//!
//! Two builders produce the same operator in different representations: a
//! dense real-symmetric matrix for exact diagonalization at small sizes,
//! and a bond-dimension-3 matrix product operator for the tensor-network
//! solvers. Agreement between the two is enforced by tests.

use ndarray::{Array2, Array4};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bath::DiscretizedBath;
use crate::tnet::MpoOperator;

/// Largest Hilbert-space dimension [`build_dense`] will materialize.
pub const DEFAULT_DENSE_DIM_CAP: usize = 20_000;

/// Default resonator truncation used by the run drivers.
pub const DEFAULT_D_RES: usize = 12;
/// Default bath-mode truncation used by the run drivers.
pub const DEFAULT_D_BATH: usize = 6;

#[derive(Debug, Error)]
pub enum ModelError {
    /// Inconsistent or invalid model setup.
    #[error("model config: {0}")]
    Config(String),
    /// The requested dense matrix would be too large.
    #[error("hilbert dimension {dim} exceeds the dense cap {cap}")]
    DimensionCap { dim: usize, cap: usize },
}

pub type ModelResult<T> = Result<T, ModelError>;

/// Physical couplings of the system part (the bath has its own struct).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Tunneling splitting of the two-level system.
    pub delta: f64,
    /// Resonator frequency.
    pub omega_0: f64,
    /// Spin–resonator coupling.
    pub g: f64,
    /// Longitudinal bias on the spin.
    pub epsilon: f64,
}

impl ModelParams {
    pub fn new(delta: f64, omega_0: f64, g: f64, epsilon: f64) -> ModelResult<Self> {
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(ModelError::Config(format!(
                "tunneling splitting must be positive, got {delta}"
            )));
        }
        if !(omega_0 > 0.0) || !omega_0.is_finite() {
            return Err(ModelError::Config(format!(
                "resonator frequency must be positive, got {omega_0}"
            )));
        }
        if !(g >= 0.0) || !g.is_finite() {
            return Err(ModelError::Config(format!(
                "coupling must be non-negative, got {g}"
            )));
        }
        if !epsilon.is_finite() {
            return Err(ModelError::Config(format!("bias must be finite, got {epsilon}")));
        }
        Ok(Self { delta, omega_0, g, epsilon })
    }

    /// Same system with a different spin–resonator coupling.
    pub fn with_coupling(&self, g: f64) -> ModelResult<Self> {
        Self::new(self.delta, self.omega_0, g, self.epsilon)
    }

    /// Same system with a different longitudinal bias.
    pub fn with_epsilon(&self, epsilon: f64) -> ModelResult<Self> {
        Self::new(self.delta, self.omega_0, self.g, epsilon)
    }
}

/// Local Hilbert-space truncations and the resulting site ordering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SiteLayout {
    /// Resonator levels kept.
    pub d_res: usize,
    /// Levels kept per bath mode.
    pub d_bath: usize,
    /// Number of bath modes.
    pub n_modes: usize,
}

impl SiteLayout {
    pub fn new(d_res: usize, d_bath: usize, n_modes: usize) -> ModelResult<Self> {
        if d_res < 2 {
            return Err(ModelError::Config(format!(
                "resonator needs at least 2 levels, got {d_res}"
            )));
        }
        if d_bath < 2 {
            return Err(ModelError::Config(format!(
                "bath modes need at least 2 levels, got {d_bath}"
            )));
        }
        Ok(Self { d_res, d_bath, n_modes })
    }

    /// Default truncations for a given bath size.
    pub fn default_for(n_modes: usize) -> Self {
        Self { d_res: DEFAULT_D_RES, d_bath: DEFAULT_D_BATH, n_modes }
    }

    /// Local dimension of every site, in chain order.
    pub fn dims(&self) -> Vec<usize> {
        let mut d = Vec::with_capacity(self.site_count());
        d.push(2);
        d.push(self.d_res);
        d.extend(std::iter::repeat(self.d_bath).take(self.n_modes));
        d
    }

    pub fn site_count(&self) -> usize {
        2 + self.n_modes
    }

    /// Total Hilbert-space dimension, `None` on overflow.
    pub fn hilbert_dim(&self) -> Option<usize> {
        self.dims()
            .into_iter()
            .try_fold(1usize, |acc, d| acc.checked_mul(d))
    }
}

/// Local operator tables, all real matrices in the number basis.
pub mod ops {
    use super::*;

    pub fn identity(d: usize) -> Array2<f64> {
        Array2::eye(d)
    }

    pub fn sigma_x() -> Array2<f64> {
        ndarray::array![[0.0, 1.0], [1.0, 0.0]]
    }

    pub fn sigma_z() -> Array2<f64> {
        ndarray::array![[1.0, 0.0], [0.0, -1.0]]
    }

    /// Truncated lowering operator: a|n⟩ = √n |n−1⟩.
    pub fn annihilation(d: usize) -> Array2<f64> {
        let mut a = Array2::zeros((d, d));
        for i in 0..d - 1 {
            a[(i, i + 1)] = ((i + 1) as f64).sqrt();
        }
        a
    }

    pub fn number(d: usize) -> Array2<f64> {
        Array2::from_diag(&ndarray::Array1::from_iter((0..d).map(|n| n as f64)))
    }

    /// Quadrature x̂ = a + a†.
    pub fn position(d: usize) -> Array2<f64> {
        let a = annihilation(d);
        &a + &a.t()
    }

    /// −(Δ/2)σx + εσz.
    pub fn spin_local(delta: f64, epsilon: f64) -> Array2<f64> {
        ndarray::array![[epsilon, -0.5 * delta], [-0.5 * delta, -epsilon]]
    }

    /// ω₀ n̂ + (c/2) x̂², with x̂² the square of the *truncated* x̂ so the
    /// dense and MPO builders agree exactly at any truncation.
    pub fn resonator_local(omega_0: f64, counterterm: f64, d: usize) -> Array2<f64> {
        let x = position(d);
        let x2 = x.dot(&x);
        number(d).mapv(|v| v * omega_0) + x2.mapv(|v| v * 0.5 * counterterm)
    }

    /// Promote a real matrix to complex entries.
    pub fn promote(m: &Array2<f64>) -> Array2<C64> {
        m.mapv(|v| C64::new(v, 0.0))
    }
}

/// Add `op` acting on one site into the dense matrix, in place.
fn add_local(h: &mut Array2<f64>, dims: &[usize], site: usize, op: &Array2<f64>) {
    let d = dims[site];
    debug_assert_eq!(op.dim(), (d, d));
    let stride: usize = dims[site + 1..].iter().product();
    let outer: usize = dims[..site].iter().product();
    for o in 0..outer {
        let base = o * d * stride;
        for a in 0..d {
            for b in 0..d {
                let v = op[(a, b)];
                if v == 0.0 {
                    continue;
                }
                let rb = base + a * stride;
                let cb = base + b * stride;
                for s in 0..stride {
                    h[(rb + s, cb + s)] += v;
                }
            }
        }
    }
}

/// Add `op_a ⊗ op_b` acting on two sites (i < j) into the dense matrix.
fn add_pair(
    h: &mut Array2<f64>,
    dims: &[usize],
    site_a: usize,
    op_a: &Array2<f64>,
    site_b: usize,
    op_b: &Array2<f64>,
) {
    debug_assert!(site_a < site_b);
    let da = dims[site_a];
    let db = dims[site_b];
    debug_assert_eq!(op_a.dim(), (da, da));
    debug_assert_eq!(op_b.dim(), (db, db));
    let stride: usize = dims[site_b + 1..].iter().product();
    let mid: usize = dims[site_a + 1..site_b].iter().product();
    let outer: usize = dims[..site_a].iter().product();
    for o in 0..outer {
        for aa in 0..da {
            for ab in 0..da {
                let va = op_a[(aa, ab)];
                if va == 0.0 {
                    continue;
                }
                for m in 0..mid {
                    let rowm = ((o * da + aa) * mid + m) * db;
                    let colm = ((o * da + ab) * mid + m) * db;
                    for ba in 0..db {
                        for bb in 0..db {
                            let v = va * op_b[(ba, bb)];
                            if v == 0.0 {
                                continue;
                            }
                            let rb = (rowm + ba) * stride;
                            let cb = (colm + bb) * stride;
                            for s in 0..stride {
                                h[(rb + s, cb + s)] += v;
                            }
                        }
                    }
                }
            }
        }
    }
}

fn check_bath(layout: &SiteLayout, bath: &DiscretizedBath) -> ModelResult<()> {
    if bath.len() != layout.n_modes {
        return Err(ModelError::Config(format!(
            "bath has {} modes but the layout expects {}",
            bath.len(),
            layout.n_modes
        )));
    }
    Ok(())
}

/// Dense real-symmetric Hamiltonian on the truncated chain.
///
/// Intended for exact-diagonalization cross-checks; refuses dimensions
/// above [`DEFAULT_DENSE_DIM_CAP`].
pub fn build_dense(
    params: &ModelParams,
    layout: &SiteLayout,
    bath: &DiscretizedBath,
) -> ModelResult<Array2<f64>> {
    check_bath(layout, bath)?;
    let dims = layout.dims();
    let dim = layout
        .hilbert_dim()
        .ok_or_else(|| ModelError::Config("hilbert dimension overflows usize".into()))?;
    if dim > DEFAULT_DENSE_DIM_CAP {
        return Err(ModelError::DimensionCap { dim, cap: DEFAULT_DENSE_DIM_CAP });
    }

    let mut h = Array2::<f64>::zeros((dim, dim));
    add_local(&mut h, &dims, 0, &ops::spin_local(params.delta, params.epsilon));
    add_local(
        &mut h,
        &dims,
        1,
        &ops::resonator_local(params.omega_0, bath.counterterm, layout.d_res),
    );
    let x_res = ops::position(layout.d_res);
    let gsz = ops::sigma_z().mapv(|v| v * params.g);
    add_pair(&mut h, &dims, 0, &gsz, 1, &x_res);
    for (k, (&omega, &lambda)) in bath
        .frequencies
        .iter()
        .zip(bath.couplings.iter())
        .enumerate()
    {
        let site = 2 + k;
        add_local(&mut h, &dims, site, &ops::number(layout.d_bath).mapv(|v| v * omega));
        let lx = ops::position(layout.d_bath).mapv(|v| v * lambda);
        add_pair(&mut h, &dims, 1, &x_res, site, &lx);
    }
    Ok(h)
}

/// The same Hamiltonian as a bond-dimension-3 matrix product operator.
///
/// The internal index works as a three-state machine: 0 = nothing emitted
/// yet, 1 = an open quadrature chain waiting for its partner, 2 = a
/// finished term. The spin opens σz (closed by g·x̂ on the resonator),
/// and the resonator opens x̂ (closed by λ_k·x̂ on each bath site, passed
/// through intermediate sites by the identity).
pub fn build_mpo(
    params: &ModelParams,
    layout: &SiteLayout,
    bath: &DiscretizedBath,
) -> ModelResult<MpoOperator> {
    check_bath(layout, bath)?;
    let n = layout.site_count();
    let set =
        |w: &mut Array4<C64>, row: usize, col: usize, op: &Array2<f64>| {
            let (p, q) = op.dim();
            for a in 0..p {
                for b in 0..q {
                    w[(row, a, b, col)] = C64::new(op[(a, b)], 0.0);
                }
            }
        };

    let mut tensors: Vec<Array4<C64>> = Vec::with_capacity(n);

    // spin site: row vector [I, σz, h_spin]
    let mut w0 = Array4::<C64>::zeros((1, 2, 2, 3));
    set(&mut w0, 0, 0, &ops::identity(2));
    set(&mut w0, 0, 1, &ops::sigma_z());
    set(&mut w0, 0, 2, &ops::spin_local(params.delta, params.epsilon));
    tensors.push(w0);

    // resonator site
    let d_res = layout.d_res;
    let h_res = ops::resonator_local(params.omega_0, bath.counterterm, d_res);
    let x_res = ops::position(d_res);
    let gx = x_res.mapv(|v| v * params.g);
    if n == 2 {
        // closed system: terminate immediately
        let mut w = Array4::<C64>::zeros((3, d_res, d_res, 1));
        set(&mut w, 0, 0, &h_res);
        set(&mut w, 1, 0, &gx);
        set(&mut w, 2, 0, &ops::identity(d_res));
        tensors.push(w);
        return MpoOperator::new(tensors)
            .map_err(|e| ModelError::Config(format!("internal operator assembly: {e}")));
    }
    let mut wr = Array4::<C64>::zeros((3, d_res, d_res, 3));
    set(&mut wr, 0, 0, &ops::identity(d_res));
    set(&mut wr, 0, 1, &x_res);
    set(&mut wr, 0, 2, &h_res);
    set(&mut wr, 1, 2, &gx);
    set(&mut wr, 2, 2, &ops::identity(d_res));
    tensors.push(wr);

    // bath sites
    let d_b = layout.d_bath;
    for k in 0..layout.n_modes {
        let omega = bath.frequencies[k];
        let lambda = bath.couplings[k];
        let local = ops::number(d_b).mapv(|v| v * omega);
        let lx = ops::position(d_b).mapv(|v| v * lambda);
        if k + 1 == layout.n_modes {
            let mut w = Array4::<C64>::zeros((3, d_b, d_b, 1));
            set(&mut w, 0, 0, &local);
            set(&mut w, 1, 0, &lx);
            set(&mut w, 2, 0, &ops::identity(d_b));
            tensors.push(w);
        } else {
            let mut w = Array4::<C64>::zeros((3, d_b, d_b, 3));
            set(&mut w, 0, 0, &ops::identity(d_b));
            set(&mut w, 0, 2, &local);
            set(&mut w, 1, 1, &ops::identity(d_b));
            set(&mut w, 1, 2, &lx);
            set(&mut w, 2, 2, &ops::identity(d_b));
            tensors.push(w);
        }
    }

    MpoOperator::new(tensors)
        .map_err(|e| ModelError::Config(format!("internal operator assembly: {e}")))
}
