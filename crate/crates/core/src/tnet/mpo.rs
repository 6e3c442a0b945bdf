//! Matrix product operators.

use ndarray::{Array2, Array4};
use num_complex::Complex64 as C64;

use super::{TnetError, TnetResult};

/// A matrix product operator over an open chain. Site tensors are indexed
/// (left bond, bra physical, ket physical, right bond); boundary bonds have
/// dimension 1.
#[derive(Debug, Clone, PartialEq)]
pub struct MpoOperator {
    tensors: Vec<Array4<C64>>,
}

impl MpoOperator {
    pub fn new(tensors: Vec<Array4<C64>>) -> TnetResult<Self> {
        if tensors.is_empty() {
            return Err(TnetError::Shape("operator needs at least one site".into()));
        }
        let n = tensors.len();
        for (i, t) in tensors.iter().enumerate() {
            let (wl, p_out, p_in, wr) = t.dim();
            if p_out != p_in {
                return Err(TnetError::Shape(format!(
                    "site {i}: bra dimension {p_out} != ket dimension {p_in}"
                )));
            }
            if i == 0 && wl != 1 {
                return Err(TnetError::Shape(format!(
                    "left boundary bond must have dimension 1, got {wl}"
                )));
            }
            if i == n - 1 && wr != 1 {
                return Err(TnetError::Shape(format!(
                    "right boundary bond must have dimension 1, got {wr}"
                )));
            }
            if i + 1 < n {
                let next_wl = tensors[i + 1].dim().0;
                if wr != next_wl {
                    return Err(TnetError::Shape(format!(
                        "bond between sites {i} and {}: {wr} != {next_wl}",
                        i + 1
                    )));
                }
            }
        }
        Ok(Self { tensors })
    }

    pub fn site_count(&self) -> usize {
        self.tensors.len()
    }

    pub fn tensor(&self, site: usize) -> &Array4<C64> {
        &self.tensors[site]
    }

    pub fn phys_dims(&self) -> Vec<usize> {
        self.tensors.iter().map(|t| t.dim().1).collect()
    }

    /// Internal bond dimensions (between consecutive sites).
    pub fn bond_dims(&self) -> Vec<usize> {
        self.tensors.iter().skip(1).map(|t| t.dim().0).collect()
    }

    pub fn max_bond(&self) -> usize {
        self.bond_dims().into_iter().max().unwrap_or(1)
    }

    /// Contract the full chain into a dense matrix. Intended for
    /// small-instance validation; errors when the total dimension would
    /// exceed `dim_cap`.
    pub fn to_dense(&self, dim_cap: usize) -> TnetResult<Array2<C64>> {
        let mut dim: usize = 1;
        for t in &self.tensors {
            dim = dim.checked_mul(t.dim().1).ok_or_else(|| {
                TnetError::Shape("dense dimension overflows usize".to_string())
            })?;
        }
        if dim > dim_cap {
            return Err(TnetError::Shape(format!(
                "dense contraction of dimension {dim} exceeds the cap {dim_cap}"
            )));
        }
        // partial[w] holds the block of the operator with open right bond w
        let mut partial: Vec<Array2<C64>> = vec![Array2::from_elem((1, 1), C64::new(1.0, 0.0))];
        for t in &self.tensors {
            let (wl, d, _, wr) = t.dim();
            let grown = partial[0].dim().0 * d;
            let mut next = vec![Array2::<C64>::zeros((grown, grown)); wr];
            for (w_out, block) in next.iter_mut().enumerate() {
                for (w_in, prev) in partial.iter().enumerate().take(wl) {
                    let local = t.slice(ndarray::s![w_in, .., .., w_out]).to_owned();
                    *block += &ndarray::linalg::kron(prev, &local);
                }
            }
            partial = next;
        }
        debug_assert_eq!(partial.len(), 1);
        Ok(partial.pop().expect("right boundary bond has dimension 1"))
    }
}
