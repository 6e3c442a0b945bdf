//! Time evolution by projecting the Schrödinger equation onto the MPS
//! manifold (projector-splitting integrator, symmetric second order).
//!
//! The two-site variant expands bond dimensions adaptively (truncating
//! through the state's discarded-weight threshold) and is the workhorse
//! while the state is still small. The one-site variant keeps every bond
//! dimension fixed and is exactly norm-conserving, which makes it the
//! right tool once bonds have saturated at the cap. `Auto` switches from
//! two-site to one-site sweeps at that point, decided per step.
//!
//! A full step sweeps left→right then right→left; every local evolution
//! advances by dt/2 forward, with the intervening center/bond pieces
//! evolved backward, so the composition is time-reversal symmetric.

use ndarray::{Array1, Array2, Array3, Array4};
use ndarray_linalg::QR;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::contract::{
    apply_h0, apply_h1, apply_h2, left_env_update, right_env_update, trivial_env,
};
use super::krylov::{lanczos_expv, KrylovOptions};
use super::mpo::MpoOperator;
use super::mps::{dagger, from_mat, to_mat, MpsState};
use super::{TnetError, TnetResult};

/// Which sweep variant to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TdvpScheme {
    /// Always evolve bond pairs (adaptive bond growth, truncating).
    TwoSite,
    /// Always evolve single sites (fixed bonds, exactly norm-conserving).
    OneSite,
    /// Two-site until the largest bond reaches the cap, then one-site.
    Auto,
}

/// Controls for a single evolution step.
#[derive(Debug, Clone, Copy)]
pub struct TdvpOptions {
    pub scheme: TdvpScheme,
    /// Bond-dimension cap imposed during two-site splits.
    pub max_bond: usize,
    /// Relative discarded-weight threshold for two-site splits.
    pub trunc_threshold: f64,
    /// Relative accuracy of each local exponential.
    pub krylov_tol: f64,
    /// Subspace cap for each local exponential.
    pub krylov_max_subspace: usize,
}

impl Default for TdvpOptions {
    fn default() -> Self {
        Self {
            scheme: TdvpScheme::Auto,
            max_bond: 64,
            trunc_threshold: 1e-9,
            krylov_tol: 1e-10,
            krylov_max_subspace: 40,
        }
    }
}

/// What a step did.
#[derive(Debug, Clone, Copy)]
pub struct TdvpReport {
    /// Whether the step ran two-site sweeps.
    pub two_site: bool,
    /// Largest bond dimension in the state after the step.
    pub max_bond_reached: usize,
    /// Relative weight discarded by truncations during the step.
    pub discarded_weight: f64,
}

fn flat3(t: &Array3<C64>) -> Array1<C64> {
    let len = t.len();
    t.as_standard_layout()
        .to_shape(len)
        .expect("flat3: contiguous")
        .to_owned()
}

fn unflat3(v: &Array1<C64>, dims: (usize, usize, usize)) -> Array3<C64> {
    v.to_shape(dims).expect("unflat3: element count").to_owned()
}

fn flat4(t: &Array4<C64>) -> Array1<C64> {
    let len = t.len();
    t.as_standard_layout()
        .to_shape(len)
        .expect("flat4: contiguous")
        .to_owned()
}

fn unflat4(v: &Array1<C64>, dims: (usize, usize, usize, usize)) -> Array4<C64> {
    v.to_shape(dims).expect("unflat4: element count").to_owned()
}

fn flat2(t: &Array2<C64>) -> Array1<C64> {
    let len = t.len();
    t.as_standard_layout()
        .to_shape(len)
        .expect("flat2: contiguous")
        .to_owned()
}

fn unflat2(v: &Array1<C64>, dims: (usize, usize)) -> Array2<C64> {
    v.to_shape(dims).expect("unflat2: element count").to_owned()
}

fn evolve_theta(
    l: &Array3<C64>,
    w1: &Array4<C64>,
    w2: &Array4<C64>,
    r: &Array3<C64>,
    theta: Array4<C64>,
    tau: C64,
    kopts: &KrylovOptions,
) -> TnetResult<Array4<C64>> {
    let dims = theta.dim();
    let v = flat4(&theta);
    let mut apply = |x: &Array1<C64>| flat4(&apply_h2(l, w1, w2, r, &unflat4(x, dims)));
    let out = lanczos_expv(&mut apply, &v, tau, kopts)?;
    Ok(unflat4(&out, dims))
}

fn evolve_site(
    l: &Array3<C64>,
    w: &Array4<C64>,
    r: &Array3<C64>,
    a: &Array3<C64>,
    tau: C64,
    kopts: &KrylovOptions,
) -> TnetResult<Array3<C64>> {
    let dims = a.dim();
    let v = flat3(a);
    let mut apply = |x: &Array1<C64>| flat3(&apply_h1(l, w, r, &unflat3(x, dims)));
    let out = lanczos_expv(&mut apply, &v, tau, kopts)?;
    Ok(unflat3(&out, dims))
}

fn evolve_bond(
    l: &Array3<C64>,
    r: &Array3<C64>,
    c: Array2<C64>,
    tau: C64,
    kopts: &KrylovOptions,
) -> TnetResult<Array2<C64>> {
    let dims = c.dim();
    let v = flat2(&c);
    let mut apply = |x: &Array1<C64>| flat2(&apply_h0(l, r, &unflat2(x, dims)));
    let out = lanczos_expv(&mut apply, &v, tau, kopts)?;
    Ok(unflat2(&out, dims))
}

/// Advance `psi` by one time step `dt` under `h`.
///
/// The state's bond cap and truncation threshold are replaced by the ones
/// in `opts`; the orthogonality center is brought to site 0 before the
/// sweep and ends there, so repeated calls compose without extra gauge
/// work and site-0 observables stay cheap between steps.
pub fn tdvp_step(
    psi: &mut MpsState,
    h: &MpoOperator,
    dt: f64,
    opts: &TdvpOptions,
) -> TnetResult<TdvpReport> {
    let n = psi.site_count();
    if h.phys_dims() != psi.phys_dims() {
        return Err(TnetError::Shape(
            "operator site structure does not match the state".into(),
        ));
    }
    if n < 2 {
        return Err(TnetError::Shape("sweeps need at least two sites".into()));
    }
    if !dt.is_finite() {
        return Err(TnetError::Integrator(format!("non-finite time step {dt}")));
    }
    psi.set_limits(opts.max_bond, opts.trunc_threshold)?;
    psi.move_center_to(0)?;
    let mut peak_bond = psi.max_bond_dim();
    let mut discarded = 0.0;
    let two_site = match opts.scheme {
        TdvpScheme::TwoSite => true,
        TdvpScheme::OneSite => false,
        TdvpScheme::Auto => psi.max_bond_dim() < opts.max_bond,
    };
    if dt == 0.0 {
        return Ok(TdvpReport {
            two_site,
            max_bond_reached: psi.max_bond_dim(),
            discarded_weight: 0.0,
        });
    }
    let kopts = KrylovOptions {
        max_subspace: opts.krylov_max_subspace,
        max_restarts: 0,
        tol: opts.krylov_tol,
    };
    let tau_f = C64::new(0.0, -0.5 * dt);
    let tau_b = C64::new(0.0, 0.5 * dt);

    let mut lefts: Vec<Array3<C64>> = vec![trivial_env(); n];
    let mut rights: Vec<Array3<C64>> = vec![trivial_env(); n];
    for i in (0..n - 1).rev() {
        rights[i] = right_env_update(
            &rights[i + 1],
            psi.tensor(i + 1),
            h.tensor(i + 1),
            psi.tensor(i + 1),
        );
    }

    if two_site {
        for i in 0..n - 1 {
            let theta = psi.merge_pair(i);
            let evolved = evolve_theta(
                &lefts[i],
                h.tensor(i),
                h.tensor(i + 1),
                &rights[i + 1],
                theta,
                tau_f,
                &kopts,
            )?;
            let split = psi.split_pair(i, evolved, true)?;
            peak_bond = peak_bond.max(split.kept);
            discarded += split.discarded_weight;
            lefts[i + 1] =
                left_env_update(&lefts[i], psi.tensor(i), h.tensor(i), psi.tensor(i));
            if i < n - 2 {
                let back = evolve_site(
                    &lefts[i + 1],
                    h.tensor(i + 1),
                    &rights[i + 1],
                    psi.tensor(i + 1),
                    tau_b,
                    &kopts,
                )?;
                psi.replace_tensor(i + 1, back);
            }
        }
        for i in (0..n - 1).rev() {
            let theta = psi.merge_pair(i);
            let evolved = evolve_theta(
                &lefts[i],
                h.tensor(i),
                h.tensor(i + 1),
                &rights[i + 1],
                theta,
                tau_f,
                &kopts,
            )?;
            let split = psi.split_pair(i, evolved, false)?;
            peak_bond = peak_bond.max(split.kept);
            discarded += split.discarded_weight;
            rights[i] = right_env_update(
                &rights[i + 1],
                psi.tensor(i + 1),
                h.tensor(i + 1),
                psi.tensor(i + 1),
            );
            if i > 0 {
                let back = evolve_site(
                    &lefts[i],
                    h.tensor(i),
                    &rights[i],
                    psi.tensor(i),
                    tau_b,
                    &kopts,
                )?;
                psi.replace_tensor(i, back);
            }
        }
    } else {
        for i in 0..n {
            let evolved = evolve_site(
                &lefts[i],
                h.tensor(i),
                &rights[i],
                psi.tensor(i),
                tau_f,
                &kopts,
            )?;
            if i < n - 1 {
                let (l, p, r) = evolved.dim();
                let (q, rm) = to_mat(&evolved, l * p, r)
                    .qr()
                    .map_err(|e| TnetError::Linalg(e.to_string()))?;
                let k = q.dim().1;
                psi.replace_tensor(i, from_mat(q, (l, p, k)));
                lefts[i + 1] =
                    left_env_update(&lefts[i], psi.tensor(i), h.tensor(i), psi.tensor(i));
                let c = evolve_bond(&lefts[i + 1], &rights[i], rm, tau_b, &kopts)?;
                let (rn, pn, rn2) = psi.tensor(i + 1).dim();
                debug_assert_eq!(rn, r);
                let merged = c.dot(&to_mat(psi.tensor(i + 1), rn, pn * rn2));
                psi.replace_tensor(i + 1, from_mat(merged, (k, pn, rn2)));
                psi.set_center_unchecked(i + 1);
            } else {
                psi.replace_tensor(i, evolved);
            }
        }
        for i in (0..n).rev() {
            let evolved = evolve_site(
                &lefts[i],
                h.tensor(i),
                &rights[i],
                psi.tensor(i),
                tau_f,
                &kopts,
            )?;
            if i > 0 {
                let (l, p, r) = evolved.dim();
                let (qh, rh) = dagger(&to_mat(&evolved, l, p * r))
                    .qr()
                    .map_err(|e| TnetError::Linalg(e.to_string()))?;
                let k = qh.dim().1;
                psi.replace_tensor(i, from_mat(dagger(&qh), (k, p, r)));
                rights[i - 1] = right_env_update(
                    &rights[i],
                    psi.tensor(i),
                    h.tensor(i),
                    psi.tensor(i),
                );
                let c = evolve_bond(&lefts[i], &rights[i - 1], dagger(&rh), tau_b, &kopts)?;
                let (lp, pp, lr) = psi.tensor(i - 1).dim();
                debug_assert_eq!(lr, l);
                let merged = to_mat(psi.tensor(i - 1), lp * pp, lr).dot(&c);
                psi.replace_tensor(i - 1, from_mat(merged, (lp, pp, k)));
                psi.set_center_unchecked(i - 1);
            } else {
                psi.replace_tensor(i, evolved);
            }
        }
    }

    Ok(TdvpReport {
        two_site,
        max_bond_reached: peak_bond.max(psi.max_bond_dim()),
        discarded_weight: discarded,
    })
}

#[cfg(test)]
mod tests {
    use super::super::testutil::{
        dense_evolve, dense_expect, dense_product, dense_tfi, op_at, sz, tfi_mpo,
    };
    use super::*;
    use approx::assert_abs_diff_eq;

    fn plus_tilted(n: usize) -> Vec<Array1<C64>> {
        vec![ndarray::array![C64::new(0.8, 0.0), C64::new(0.6, 0.0)]; n]
    }

    #[test]
    fn two_site_matches_dense_evolution() {
        let n = 4;
        let (j, f) = (1.0, 0.9);
        let h = tfi_mpo(n, j, f);
        let hd = dense_tfi(n, j, f);
        let locals = plus_tilted(n);
        let mut psi = MpsState::product_state(&locals, 16, 0.0).unwrap();
        let opts = TdvpOptions {
            scheme: TdvpScheme::TwoSite,
            max_bond: 16,
            trunc_threshold: 0.0,
            krylov_tol: 1e-12,
            krylov_max_subspace: 30,
        };
        let dt = 0.005;
        let steps = 100;
        for _ in 0..steps {
            tdvp_step(&mut psi, &h, dt, &opts).unwrap();
        }
        let t = dt * steps as f64;
        let psid = dense_evolve(&hd, &dense_product(&locals), t);
        for site in [0, 2] {
            let mps_val = psi.expect_local(&sz(), site).unwrap();
            let dense_val = dense_expect(&psid, &op_at(n, site, &sz()));
            assert_abs_diff_eq!(mps_val, dense_val, epsilon = 1e-4);
        }
        assert_abs_diff_eq!(psi.norm(), 1.0, epsilon = 1e-7);
        assert_eq!(psi.center(), 0);
    }

    #[test]
    fn one_site_conserves_norm_and_energy() {
        let n = 4;
        let h = tfi_mpo(n, 0.8, 1.1);
        let mut psi = MpsState::product_state(&plus_tilted(n), 16, 0.0).unwrap();
        // grow the bonds first so the one-site sweep has real work to do
        let grow = TdvpOptions {
            scheme: TdvpScheme::TwoSite,
            max_bond: 16,
            trunc_threshold: 0.0,
            krylov_tol: 1e-12,
            krylov_max_subspace: 30,
        };
        for _ in 0..5 {
            tdvp_step(&mut psi, &h, 0.01, &grow).unwrap();
        }
        assert!(psi.max_bond_dim() > 1);
        let norm0 = psi.norm();
        let e0 = psi.expect_mpo(&h).unwrap() / (norm0 * norm0);
        let opts = TdvpOptions { scheme: TdvpScheme::OneSite, ..grow };
        let mut report = None;
        for _ in 0..50 {
            report = Some(tdvp_step(&mut psi, &h, 0.02, &opts).unwrap());
        }
        let report = report.unwrap();
        assert!(!report.two_site);
        assert_eq!(report.discarded_weight, 0.0);
        let norm1 = psi.norm();
        assert_abs_diff_eq!(norm1, norm0, epsilon = 1e-8);
        // fixed-rank evolution under a static operator conserves energy
        let e1 = psi.expect_mpo(&h).unwrap() / (norm1 * norm1);
        assert_abs_diff_eq!(e1, e0, epsilon = 1e-8);
    }

    #[test]
    fn auto_scheme_switches_at_the_bond_cap() {
        let n = 4;
        let h = tfi_mpo(n, 1.0, 1.0);
        let mut psi = MpsState::product_state(&plus_tilted(n), 2, 1e-12).unwrap();
        let opts = TdvpOptions {
            scheme: TdvpScheme::Auto,
            max_bond: 2,
            trunc_threshold: 1e-12,
            krylov_tol: 1e-10,
            krylov_max_subspace: 30,
        };
        let first = tdvp_step(&mut psi, &h, 0.05, &opts).unwrap();
        assert!(first.two_site, "fresh product state should run two-site");
        assert!(psi.max_bond_dim() <= 2);
        let mut switched = false;
        for _ in 0..10 {
            let rep = tdvp_step(&mut psi, &h, 0.05, &opts).unwrap();
            assert!(psi.max_bond_dim() <= 2);
            if !rep.two_site {
                switched = true;
            }
        }
        assert!(switched, "bond cap never triggered the one-site scheme");
    }

    #[test]
    fn big_step_is_bisected_internally() {
        let n = 3;
        let h = tfi_mpo(n, 1.0, 0.7);
        let mut psi = MpsState::product_state(&plus_tilted(n), 8, 0.0).unwrap();
        let opts = TdvpOptions {
            scheme: TdvpScheme::TwoSite,
            max_bond: 8,
            trunc_threshold: 0.0,
            krylov_tol: 1e-10,
            krylov_max_subspace: 6,
        };
        // the local exponentials exceed the subspace cap and must divide
        // the step rather than fail
        tdvp_step(&mut psi, &h, 1.0, &opts).unwrap();
        assert_abs_diff_eq!(psi.norm(), 1.0, epsilon = 1e-8);
    }

    #[test]
    fn rejects_mismatched_operator() {
        let h = tfi_mpo(4, 1.0, 1.0);
        let mut psi = MpsState::product_state(&plus_tilted(3), 8, 1e-10).unwrap();
        assert!(matches!(
            tdvp_step(&mut psi, &h, 0.01, &TdvpOptions::default()),
            Err(TnetError::Shape(_))
        ));
    }
}
