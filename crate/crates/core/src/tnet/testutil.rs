//! Shared fixtures for solver tests: a transverse-field spin chain small
//! enough to cross-check against dense linear algebra.

use ndarray::{Array1, Array2, Array4};
use ndarray_linalg::{Eigh, UPLO};
use num_complex::Complex64 as C64;

use super::mpo::MpoOperator;

pub(crate) fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

pub(crate) fn eye2() -> Array2<C64> {
    ndarray::array![[c(1.0), c(0.0)], [c(0.0), c(1.0)]]
}

pub(crate) fn sx() -> Array2<C64> {
    ndarray::array![[c(0.0), c(1.0)], [c(1.0), c(0.0)]]
}

pub(crate) fn sz() -> Array2<C64> {
    ndarray::array![[c(1.0), c(0.0)], [c(0.0), c(-1.0)]]
}

pub(crate) fn kron(a: &Array2<C64>, b: &Array2<C64>) -> Array2<C64> {
    let (ra, ca) = a.dim();
    let (rb, cb) = b.dim();
    let mut out = Array2::<C64>::zeros((ra * rb, ca * cb));
    for i in 0..ra {
        for j in 0..ca {
            for k in 0..rb {
                for l in 0..cb {
                    out[(i * rb + k, j * cb + l)] = a[(i, j)] * b[(k, l)];
                }
            }
        }
    }
    out
}

/// A single-site operator embedded in an n-site spin-1/2 chain.
pub(crate) fn op_at(n: usize, site: usize, op: &Array2<C64>) -> Array2<C64> {
    let mut m = Array2::<C64>::eye(1);
    for s in 0..n {
        let local = if s == site { op.clone() } else { eye2() };
        m = kron(&m, &local);
    }
    m
}

/// Transverse-field chain H = −j Σ σz σz − f Σ σx as a bond-3 operator.
pub(crate) fn tfi_mpo(n: usize, j: f64, f: f64) -> MpoOperator {
    assert!(n >= 2);
    let put = |w: &mut Array4<C64>, row: usize, col: usize, op: &Array2<C64>| {
        for a in 0..2 {
            for b in 0..2 {
                w[(row, a, b, col)] = op[(a, b)];
            }
        }
    };
    let mut bulk = Array4::<C64>::zeros((3, 2, 2, 3));
    let local = sx().mapv(|z| z * c(-f));
    let zz = sz().mapv(|z| z * c(-j));
    put(&mut bulk, 0, 0, &eye2());
    put(&mut bulk, 0, 1, &sz());
    put(&mut bulk, 0, 2, &local);
    put(&mut bulk, 1, 2, &zz);
    put(&mut bulk, 2, 2, &eye2());
    let first = bulk.slice(ndarray::s![0..1, .., .., ..]).to_owned();
    let last = bulk.slice(ndarray::s![.., .., .., 2..3]).to_owned();
    let mut tensors = vec![first];
    for _ in 1..n - 1 {
        tensors.push(bulk.clone());
    }
    tensors.push(last);
    MpoOperator::new(tensors).expect("valid chain operator")
}

/// The same chain as a dense matrix.
pub(crate) fn dense_tfi(n: usize, j: f64, f: f64) -> Array2<C64> {
    let dim = 1usize << n;
    let mut h = Array2::<C64>::zeros((dim, dim));
    for s in 0..n {
        h = h + op_at(n, s, &sx()).mapv(|z| z * c(-f));
    }
    for s in 0..n - 1 {
        let zz = kron(&sz(), &sz());
        let mut m = Array2::<C64>::eye(1);
        for q in 0..n {
            if q == s {
                m = kron(&m, &zz);
            } else if q == s + 1 {
                // covered by the pair insertion above
            } else {
                m = kron(&m, &eye2());
            }
        }
        h = h + m.mapv(|z| z * c(-j));
    }
    h
}

/// exp(−i·h·t)·psi via dense diagonalization.
pub(crate) fn dense_evolve(h: &Array2<C64>, psi: &Array1<C64>, t: f64) -> Array1<C64> {
    let (evals, evecs) = h.eigh(UPLO::Lower).expect("dense eigh");
    let n = psi.len();
    let mut coeffs = Array1::<C64>::zeros(n);
    for k in 0..n {
        let mut ck = C64::new(0.0, 0.0);
        for i in 0..n {
            ck += evecs[(i, k)].conj() * psi[i];
        }
        coeffs[k] = ck * (C64::new(0.0, -t) * evals[k]).exp();
    }
    let mut out = Array1::<C64>::zeros(n);
    for k in 0..n {
        for i in 0..n {
            out[i] += evecs[(i, k)] * coeffs[k];
        }
    }
    out
}

/// Dense state vector of a spin-1/2 product state.
pub(crate) fn dense_product(locals: &[Array1<C64>]) -> Array1<C64> {
    let mut v = Array1::<C64>::from_elem(1, c(1.0));
    for loc in locals {
        let mut out = Array1::<C64>::zeros(v.len() * loc.len());
        for (i, a) in v.iter().enumerate() {
            for (j, b) in loc.iter().enumerate() {
                out[i * loc.len() + j] = a * b;
            }
        }
        v = out;
    }
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v.mapv(|z| z / norm)
}

pub(crate) fn dense_expect(psi: &Array1<C64>, op: &Array2<C64>) -> f64 {
    let hp = op.dot(psi);
    psi.iter()
        .zip(hp.iter())
        .map(|(a, b)| a.conj() * b)
        .sum::<C64>()
        .re
}
