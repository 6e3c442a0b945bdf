//! Interrupt-and-resume equivalence: serializing a state mid-run and
//! continuing from the restored copy must reproduce the uninterrupted
//! trajectory exactly, since the checkpoint format is bit-exact and the
//! integrator is deterministic.

use ndarray::Array1;
use num_complex::Complex64 as C64;

use oqrm_core::bath::{discretize_star, BathParams};
use oqrm_core::model::{build_mpo, ops, ModelParams, SiteLayout};
use oqrm_core::tnet::{tdvp_step, MpsState, TdvpOptions, TdvpScheme};

fn basis0(d: usize) -> Array1<C64> {
    let mut v = Array1::<C64>::zeros(d);
    v[0] = C64::new(1.0, 0.0);
    v
}

#[test]
fn resumed_run_matches_uninterrupted_run() {
    let params = ModelParams::new(1.0, 0.75, 0.5, 0.0).unwrap();
    let bath_params = BathParams::new(0.2, 5.0, 1).unwrap();
    let bath = discretize_star(&bath_params).unwrap();
    let layout = SiteLayout::new(3, 2, bath.len()).unwrap();
    let h = build_mpo(&params, &layout, &bath).unwrap();

    let locals = vec![
        ndarray::array![C64::new(0.8, 0.0), C64::new(0.6, 0.0)],
        basis0(3),
        basis0(2),
    ];
    let mut psi = MpsState::product_state(&locals, 32, 1e-12).unwrap();
    let opts = TdvpOptions {
        scheme: TdvpScheme::Auto,
        max_bond: 32,
        trunc_threshold: 1e-12,
        krylov_tol: 1e-11,
        krylov_max_subspace: 30,
    };

    for _ in 0..20 {
        tdvp_step(&mut psi, &h, 0.02, &opts).unwrap();
    }
    let mut buf = Vec::new();
    psi.save_checkpoint(&mut buf).unwrap();
    let mut restored = MpsState::load_checkpoint(buf.as_slice()).unwrap();
    assert_eq!(restored, psi);

    for _ in 0..20 {
        tdvp_step(&mut psi, &h, 0.02, &opts).unwrap();
        tdvp_step(&mut restored, &h, 0.02, &opts).unwrap();
    }

    // deterministic continuation: identical trajectories, not merely close
    assert_eq!(restored, psi);
    let sz = ops::promote(&ops::sigma_z());
    let a = psi.expect_local(&sz, 0).unwrap();
    let b = restored.expect_local(&sz, 0).unwrap();
    assert_eq!(a, b);
}
