//! Lanczos iteration for extremal eigenpairs and for the action of the
//! matrix exponential, used as the local solver inside sweeps.
//!
//! Both entry points take the operator as a closure `v ↦ H v`, so callers
//! can supply an effective Hamiltonian contraction without ever forming a
//! dense matrix. Full reorthogonalization is performed at every step; the
//! subspaces here are small (tens of vectors), so the extra inner products
//! are cheap insurance against the classic loss-of-orthogonality failure
//! modes.

use ndarray::{Array1, Array2};
use ndarray_linalg::{Eigh, UPLO};
use num_complex::Complex64 as C64;

use super::{TnetError, TnetResult};

/// Controls for the iterative local solvers.
#[derive(Debug, Clone, Copy)]
pub struct KrylovOptions {
    /// Maximum Krylov subspace dimension per (re)start.
    pub max_subspace: usize,
    /// Number of restarts allowed in the eigensolver before settling for
    /// the best estimate found.
    pub max_restarts: usize,
    /// Relative accuracy target: residual per unit eigenvalue scale, or
    /// relative error in the propagated vector.
    pub tol: f64,
}

impl Default for KrylovOptions {
    fn default() -> Self {
        Self { max_subspace: 30, max_restarts: 8, tol: 1e-10 }
    }
}

/// Relative scale below which a Lanczos residual counts as a breakdown
/// (i.e. an invariant subspace has been found).
const BREAKDOWN_TOL: f64 = 1e-13;

/// Recursion bound for time-step splitting in [`lanczos_expv`].
const MAX_SPLIT_DEPTH: u32 = 30;

fn zdot(a: &Array1<C64>, b: &Array1<C64>) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &Array1<C64>) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn axpy(y: &mut Array1<C64>, c: C64, x: &Array1<C64>) {
    y.zip_mut_with(x, |yi, xi| *yi -= c * xi);
}

/// Dense eigendecomposition of the real symmetric tridiagonal projection.
fn tridiag_eigh(alphas: &[f64], betas: &[f64]) -> TnetResult<(Array1<f64>, Array2<f64>)> {
    let m = alphas.len();
    let mut t = Array2::<f64>::zeros((m, m));
    for (i, &a) in alphas.iter().enumerate() {
        t[(i, i)] = a;
    }
    for (i, &b) in betas.iter().enumerate() {
        t[(i + 1, i)] = b;
        t[(i, i + 1)] = b;
    }
    t.eigh(UPLO::Lower)
        .map_err(|e| TnetError::Eigensolver(format!("tridiagonal projection: {e}")))
}

/// First column of exp(τT) for the tridiagonal projection T.
fn expt_e1(alphas: &[f64], betas: &[f64], tau: C64) -> TnetResult<Array1<C64>> {
    let (evals, evecs) = tridiag_eigh(alphas, betas)?;
    let m = alphas.len();
    let mut out = Array1::<C64>::zeros(m);
    for k in 0..m {
        let phase = (tau * evals[k]).exp();
        let head = evecs[(0, k)];
        for j in 0..m {
            out[j] += phase * head * evecs[(j, k)];
        }
    }
    Ok(out)
}

struct LanczosBuild {
    basis: Vec<Array1<C64>>,
    alphas: Vec<f64>,
    betas: Vec<f64>,
    final_beta: f64,
    applies: usize,
}

/// Run the three-term recurrence with full reorthogonalization until the
/// subspace cap, or a breakdown. `deflate` controls what happens on
/// breakdown: the eigensolver continues in the orthogonal complement
/// (which is itself invariant for a Hermitian operator), while the
/// propagator just stops, since the exponential is then exact.
fn build_subspace<F>(
    apply: &mut F,
    v0: Array1<C64>,
    cap: usize,
    deflate: bool,
) -> LanczosBuild
where
    F: FnMut(&Array1<C64>) -> Array1<C64>,
{
    let dim = v0.len();
    let mut basis = vec![v0];
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut applies = 0usize;
    let final_beta;
    let mut scale: f64 = 1.0;

    let mut j = 0usize;
    loop {
        let mut w = apply(&basis[j]);
        applies += 1;
        let alpha = zdot(&basis[j], &w).re;
        alphas.push(alpha);
        scale = scale.max(alpha.abs());
        axpy(&mut w, C64::new(alpha, 0.0), &basis[j]);
        if j > 0 {
            axpy(&mut w, C64::new(betas[j - 1], 0.0), &basis[j - 1]);
        }
        for _ in 0..2 {
            for u in &basis {
                let c = zdot(u, &w);
                axpy(&mut w, c, u);
            }
        }
        let beta = norm(&w);
        scale = scale.max(beta);

        if alphas.len() == cap || basis.len() == dim {
            final_beta = beta;
            break;
        }
        if beta <= BREAKDOWN_TOL * scale.max(1.0) {
            if !deflate {
                final_beta = 0.0;
                break;
            }
            // restart the recurrence in the least-covered coordinate
            // direction, projected onto the orthogonal complement
            let mut weight = vec![0.0f64; dim];
            for u in &basis {
                for (wj, z) in weight.iter_mut().zip(u.iter()) {
                    *wj += z.norm_sqr();
                }
            }
            let (best, &wmin) = weight
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.total_cmp(b.1))
                .expect("nonempty weights");
            if 1.0 - wmin <= 1e-12 {
                final_beta = 0.0;
                break;
            }
            let mut fresh = Array1::<C64>::zeros(dim);
            fresh[best] = C64::new(1.0, 0.0);
            for u in &basis {
                let c = zdot(u, &fresh);
                axpy(&mut fresh, c, u);
            }
            let nf = norm(&fresh);
            fresh.mapv_inplace(|z| z / nf);
            betas.push(0.0);
            basis.push(fresh);
        } else {
            w.mapv_inplace(|z| z / beta);
            betas.push(beta);
            basis.push(w);
        }
        j += 1;
    }
    LanczosBuild { basis, alphas, betas, final_beta, applies }
}

/// Lowest eigenpair of a Hermitian operator given by its action.
///
/// Returns `(eigenvalue, eigenvector, operator applications)`. The
/// iteration restarts from the current best estimate until the residual
/// bound `β·|s_m|` drops below `tol·max(1, |θ|)` or the restart budget is
/// exhausted; in the latter case the best available estimate is returned
/// (callers track convergence through their own energy criteria).
pub fn lanczos_ground<F>(
    apply: &mut F,
    v0: &Array1<C64>,
    opts: &KrylovOptions,
) -> TnetResult<(f64, Array1<C64>, usize)>
where
    F: FnMut(&Array1<C64>) -> Array1<C64>,
{
    let n0 = norm(v0);
    if !(n0 > 0.0) || !n0.is_finite() {
        return Err(TnetError::Eigensolver(
            "starting vector has zero or non-finite norm".into(),
        ));
    }
    if opts.max_subspace < 2 {
        return Err(TnetError::Eigensolver("subspace cap must be at least 2".into()));
    }
    let mut v = v0.mapv(|z| z / n0);
    let mut total_applies = 0usize;
    let mut best: Option<(f64, Array1<C64>, f64)> = None;

    for _ in 0..=opts.max_restarts {
        let build = build_subspace(apply, v.clone(), opts.max_subspace, true);
        total_applies += build.applies;
        let (evals, evecs) = tridiag_eigh(&build.alphas, &build.betas)?;
        let m = build.alphas.len();
        let theta = evals[0];
        let mut x = Array1::<C64>::zeros(v.len());
        for (i, u) in build.basis.iter().enumerate() {
            let c = C64::new(evecs[(i, 0)], 0.0);
            x.zip_mut_with(u, |xi, ui| *xi += c * ui);
        }
        let nx = norm(&x);
        x.mapv_inplace(|z| z / nx);
        let residual = build.final_beta * evecs[(m - 1, 0)].abs();

        let better = best.as_ref().map(|(_, _, r)| residual < *r).unwrap_or(true);
        if better {
            best = Some((theta, x.clone(), residual));
        }
        if residual <= opts.tol * theta.abs().max(1.0) {
            break;
        }
        v = x;
    }
    let (theta, x, _) = best.expect("at least one Lanczos pass ran");
    Ok((theta, x, total_applies))
}

/// Action of `exp(τ·H)` on a vector for a Hermitian operator `H` given by
/// its action; `τ` may be complex (e.g. `−i·dt` for real-time evolution).
///
/// The Krylov dimension grows until the standard a-posteriori error bound
/// meets `tol·‖v‖`; if the subspace cap is reached first, the step is
/// split in half recursively.
pub fn lanczos_expv<F>(
    apply: &mut F,
    v: &Array1<C64>,
    tau: C64,
    opts: &KrylovOptions,
) -> TnetResult<Array1<C64>>
where
    F: FnMut(&Array1<C64>) -> Array1<C64>,
{
    expv_rec(apply, v, tau, opts, 0)
}

fn expv_rec<F>(
    apply: &mut F,
    v: &Array1<C64>,
    tau: C64,
    opts: &KrylovOptions,
    depth: u32,
) -> TnetResult<Array1<C64>>
where
    F: FnMut(&Array1<C64>) -> Array1<C64>,
{
    let n0 = norm(v);
    if n0 == 0.0 {
        return Ok(v.clone());
    }
    if !n0.is_finite() {
        return Err(TnetError::Integrator("vector norm is not finite".into()));
    }
    if tau.norm() == 0.0 {
        return Ok(v.clone());
    }
    if opts.max_subspace < 2 {
        return Err(TnetError::Integrator("subspace cap must be at least 2".into()));
    }

    let dim = v.len();
    let v1 = v.mapv(|z| z / n0);
    let mut basis = vec![v1];
    let mut alphas: Vec<f64> = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut scale: f64 = 1.0;
    let mut converged_coeffs: Option<Array1<C64>> = None;

    let mut j = 0usize;
    while alphas.len() < opts.max_subspace {
        let mut w = apply(&basis[j]);
        let alpha = zdot(&basis[j], &w).re;
        alphas.push(alpha);
        scale = scale.max(alpha.abs());
        axpy(&mut w, C64::new(alpha, 0.0), &basis[j]);
        if j > 0 {
            axpy(&mut w, C64::new(betas[j - 1], 0.0), &basis[j - 1]);
        }
        for _ in 0..2 {
            for u in &basis {
                let c = zdot(u, &w);
                axpy(&mut w, c, u);
            }
        }
        let beta = norm(&w);
        scale = scale.max(beta);

        if beta <= BREAKDOWN_TOL * scale.max(1.0) || basis.len() == dim {
            // invariant subspace: the projected exponential is exact
            converged_coeffs = Some(expt_e1(&alphas, &betas, tau)?);
            break;
        }
        let coeffs = expt_e1(&alphas, &betas, tau)?;
        let err = beta * coeffs[alphas.len() - 1].norm() * n0;
        if err <= opts.tol * n0 {
            converged_coeffs = Some(coeffs);
            break;
        }
        w.mapv_inplace(|z| z / beta);
        betas.push(beta);
        basis.push(w);
        j += 1;
    }

    let coeffs = match converged_coeffs {
        Some(c) => c,
        None => {
            if depth >= MAX_SPLIT_DEPTH {
                return Err(TnetError::Integrator(format!(
                    "time step failed to converge after {MAX_SPLIT_DEPTH} bisections"
                )));
            }
            let half = tau * 0.5;
            let mid = expv_rec(apply, v, half, opts, depth + 1)?;
            return expv_rec(apply, &mid, half, opts, depth + 1);
        }
    };

    let mut out = Array1::<C64>::zeros(dim);
    for (i, u) in basis.iter().enumerate() {
        let c = coeffs[i] * n0;
        out.zip_mut_with(u, |oi, ui| *oi += c * ui);
    }
    Ok(out)
}
