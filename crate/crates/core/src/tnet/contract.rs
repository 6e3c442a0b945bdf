//! Contraction kernels shared by the sweeping algorithms.
//!
//! Environments are rank-3 tensors indexed (bra bond, operator bond, ket
//! bond). All kernels reduce to reshapes plus matrix products so the work
//! lands in gemm.

use ndarray::{Array2, Array3, Array4, Array5, ArrayBase, Data, Dimension};
use num_complex::Complex64 as C64;

/// The trivial boundary environment of an open chain.
pub(crate) fn trivial_env() -> Array3<C64> {
    Array3::from_elem((1, 1, 1), C64::new(1.0, 0.0))
}

/// Reshape (copying as needed) into a matrix.
fn to2<S, D>(a: &ArrayBase<S, D>, rows: usize, cols: usize) -> Array2<C64>
where
    S: Data<Elem = C64>,
    D: Dimension,
{
    let std = a.as_standard_layout();
    std.to_shape((rows, cols))
        .expect("internal reshape: element count mismatch")
        .to_owned()
}

fn conj2(a: &Array2<C64>) -> Array2<C64> {
    a.mapv(|z| z.conj())
}

fn own3(v: ndarray::ArrayView3<C64>) -> Array3<C64> {
    v.as_standard_layout().to_owned()
}

/// Grow a left environment by one site:
/// L'(b', m', k') = Σ L(b, m, k)·A*(b, p, b')·W(m, p, q, m')·A(k, q, k').
pub(crate) fn left_env_update(
    l: &Array3<C64>,
    bra: &Array3<C64>,
    w: &Array4<C64>,
    ket: &Array3<C64>,
) -> Array3<C64> {
    let (b, m, k) = l.dim();
    let (kb, p, b2) = bra.dim();
    let (k_, q, k2) = ket.dim();
    let (m_, p_, q_, m2) = w.dim();
    debug_assert_eq!((k, m, p, q, kb), (k_, m_, p_, q_, b));

    // over k: (b·m, k)·(k, q·k2)
    let m1 = to2(l, b * m, k).dot(&to2(ket, k, q * k2));
    let m1 = m1
        .to_shape((b, m, q, k2))
        .expect("left_env_update: step-1 shape");
    // over (m, q): (b·k2, m·q)·(m·q, p·m2)
    let m1p = to2(&m1.view().permuted_axes([0, 3, 1, 2]), b * k2, m * q);
    let wp = to2(&w.view().permuted_axes([0, 2, 1, 3]), m * q, p * m2);
    let m2a = m1p.dot(&wp);
    let m2a = m2a
        .to_shape((b, k2, p, m2))
        .expect("left_env_update: step-2 shape");
    // over (b, p): (m2·k2, b·p)·(b·p, b2)
    let m2p = to2(&m2a.view().permuted_axes([3, 1, 0, 2]), m2 * k2, b * p);
    let brap = conj2(&to2(bra, b * p, b2));
    let m3 = m2p.dot(&brap);
    let m3 = m3
        .to_shape((m2, k2, b2))
        .expect("left_env_update: step-3 shape");
    own3(m3.view().permuted_axes([2, 0, 1]))
}

/// Grow a right environment by one site:
/// R'(b, m, k) = Σ R(b', m', k')·A*(b, p, b')·W(m, p, q, m')·A(k, q, k').
pub(crate) fn right_env_update(
    r: &Array3<C64>,
    bra: &Array3<C64>,
    w: &Array4<C64>,
    ket: &Array3<C64>,
) -> Array3<C64> {
    let (b2, m2, k2) = r.dim();
    let (b, p, b2_) = bra.dim();
    let (k, q, k2_) = ket.dim();
    let (m, p_, q_, m2_) = w.dim();
    debug_assert_eq!((b2, m2, k2, p, q), (b2_, m2_, k2_, p_, q_));

    // over k2: (k·q, k2)·(k2, b2·m2)
    let rp = to2(&r.view().permuted_axes([2, 0, 1]), k2, b2 * m2);
    let m1 = to2(ket, k * q, k2).dot(&rp);
    let m1 = m1
        .to_shape((k, q, b2, m2))
        .expect("right_env_update: step-1 shape");
    // over (q, m2): (k·b2, q·m2)·(q·m2, m·p)
    let m1p = to2(&m1.view().permuted_axes([0, 2, 1, 3]), k * b2, q * m2);
    let wp = to2(&w.view().permuted_axes([2, 3, 0, 1]), q * m2, m * p);
    let m2a = m1p.dot(&wp);
    let m2a = m2a
        .to_shape((k, b2, m, p))
        .expect("right_env_update: step-2 shape");
    // over (b2, p): (k·m, b2·p)·(b2·p, b)
    let m2p = to2(&m2a.view().permuted_axes([0, 2, 1, 3]), k * m, b2 * p);
    let brap = conj2(&to2(&bra.view().permuted_axes([2, 1, 0]), b2 * p, b));
    let m3 = m2p.dot(&brap);
    let m3 = m3
        .to_shape((k, m, b))
        .expect("right_env_update: step-3 shape");
    own3(m3.view().permuted_axes([2, 1, 0]))
}

/// Effective two-site Hamiltonian application:
/// (Hθ)(b, q1, q2, b') = Σ L·W1·W2·R·θ with θ indexed (k, p1, p2, k').
pub(crate) fn apply_h2(
    l: &Array3<C64>,
    w1: &Array4<C64>,
    w2: &Array4<C64>,
    r: &Array3<C64>,
    theta: &Array4<C64>,
) -> Array4<C64> {
    let (bl, m0, kl) = l.dim();
    let (_, q1, p1, m1) = w1.dim();
    let (_, q2, p2, m2) = w2.dim();
    let (br, m2r, kr) = r.dim();
    debug_assert_eq!(m2, m2r);
    debug_assert_eq!(theta.dim(), (kl, p1, p2, kr));

    // over kl
    let t = to2(l, bl * m0, kl).dot(&to2(theta, kl, p1 * p2 * kr));
    let t = t
        .to_shape((bl, m0, p1, p2, kr))
        .expect("apply_h2: step-1 shape");
    // over (m0, p1)
    let tp = to2(&t.view().permuted_axes([0, 3, 4, 1, 2]), bl * p2 * kr, m0 * p1);
    let w1p = to2(&w1.view().permuted_axes([0, 2, 1, 3]), m0 * p1, q1 * m1);
    let t: Array5<C64> = tp
        .dot(&w1p)
        .to_shape((bl, p2, kr, q1, m1))
        .expect("apply_h2: step-2 shape")
        .to_owned();
    // over (m1, p2)
    let tp = to2(&t.view().permuted_axes([0, 2, 3, 4, 1]), bl * kr * q1, m1 * p2);
    let w2p = to2(&w2.view().permuted_axes([0, 2, 1, 3]), m1 * p2, q2 * m2);
    let t: Array5<C64> = tp
        .dot(&w2p)
        .to_shape((bl, kr, q1, q2, m2))
        .expect("apply_h2: step-3 shape")
        .to_owned();
    // over (m2, kr)
    let tp = to2(&t.view().permuted_axes([0, 2, 3, 4, 1]), bl * q1 * q2, m2 * kr);
    let rp = to2(&r.view().permuted_axes([1, 2, 0]), m2 * kr, br);
    tp.dot(&rp)
        .to_shape((bl, q1, q2, br))
        .expect("apply_h2: output shape")
        .to_owned()
}

/// Effective one-site Hamiltonian application:
/// (HA)(b, q, b') = Σ L·W·R·A with A indexed (k, p, k').
pub(crate) fn apply_h1(
    l: &Array3<C64>,
    w: &Array4<C64>,
    r: &Array3<C64>,
    a: &Array3<C64>,
) -> Array3<C64> {
    let (bl, m0, kl) = l.dim();
    let (_, qo, p, m1) = w.dim();
    let (br, m1r, kr) = r.dim();
    debug_assert_eq!(m1, m1r);
    debug_assert_eq!(a.dim(), (kl, p, kr));

    let t = to2(l, bl * m0, kl).dot(&to2(a, kl, p * kr));
    let t = t
        .to_shape((bl, m0, p, kr))
        .expect("apply_h1: step-1 shape");
    let tp = to2(&t.view().permuted_axes([0, 3, 1, 2]), bl * kr, m0 * p);
    let wp = to2(&w.view().permuted_axes([0, 2, 1, 3]), m0 * p, qo * m1);
    let t = tp.dot(&wp);
    let t = t
        .to_shape((bl, kr, qo, m1))
        .expect("apply_h1: step-2 shape");
    let tp = to2(&t.view().permuted_axes([0, 2, 3, 1]), bl * qo, m1 * kr);
    let rp = to2(&r.view().permuted_axes([1, 2, 0]), m1 * kr, br);
    tp.dot(&rp)
        .to_shape((bl, qo, br))
        .expect("apply_h1: output shape")
        .to_owned()
}

/// Effective bond (zero-site) Hamiltonian application:
/// (HC)(b, b') = Σ L(b, m, k)·C(k, k')·R(b', m, k').
pub(crate) fn apply_h0(l: &Array3<C64>, r: &Array3<C64>, c: &Array2<C64>) -> Array2<C64> {
    let (bl, m, kl) = l.dim();
    let (br, mr, kr) = r.dim();
    debug_assert_eq!(m, mr);
    debug_assert_eq!(c.dim(), (kl, kr));

    let t = to2(l, bl * m, kl).dot(c);
    let t = t.to_shape((bl, m * kr)).expect("apply_h0: step-1 shape");
    let rp = to2(&r.view().permuted_axes([1, 2, 0]), m * kr, br);
    t.dot(&rp)
}
