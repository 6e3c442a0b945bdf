//! Matrix product states with an orthogonality center.

use std::io::{Read, Write};

use ndarray::{Array1, Array2, Array3, Array4};
use ndarray_linalg::{SVDInto, QR};
use num_complex::Complex64 as C64;

use super::contract::{left_env_update, trivial_env};
use super::{MpoOperator, TnetError, TnetResult};

const CHECKPOINT_MAGIC: &[u8; 8] = b"MPSSTATE";
const CHECKPOINT_VERSION: u32 = 1;
/// Sanity bound when reading checkpoints, to fail fast on garbage headers.
const CHECKPOINT_MAX_EXTENT: u64 = 1 << 24;

/// An MPS over an open chain. Site tensors are indexed (left bond,
/// physical, right bond); tensors left of `center` are left-orthonormal
/// and tensors right of it right-orthonormal.
#[derive(Debug, Clone, PartialEq)]
pub struct MpsState {
    tensors: Vec<Array3<C64>>,
    center: usize,
    max_bond: usize,
    trunc_threshold: f64,
    cum_discarded: f64,
}

pub(crate) struct SplitOutcome {
    pub kept: usize,
    pub discarded_weight: f64,
}

impl MpsState {
    /// Build a normalized product state from one local vector per site.
    pub fn product_state(
        locals: &[Array1<C64>],
        max_bond: usize,
        trunc_threshold: f64,
    ) -> TnetResult<Self> {
        if locals.is_empty() {
            return Err(TnetError::Shape("state needs at least one site".into()));
        }
        check_limits(max_bond, trunc_threshold)?;
        let mut tensors = Vec::with_capacity(locals.len());
        for (i, v) in locals.iter().enumerate() {
            let d = v.len();
            if d == 0 {
                return Err(TnetError::Shape(format!("site {i}: empty local vector")));
            }
            let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            if !(norm > 0.0) || !norm.is_finite() {
                return Err(TnetError::Shape(format!(
                    "site {i}: local vector has invalid norm {norm}"
                )));
            }
            let mut t = Array3::<C64>::zeros((1, d, 1));
            for (p, z) in v.iter().enumerate() {
                t[(0, p, 0)] = z / norm;
            }
            tensors.push(t);
        }
        Ok(Self { tensors, center: 0, max_bond, trunc_threshold, cum_discarded: 0.0 })
    }

    /// Adopt raw site tensors (validating bond consistency), then bring the
    /// state into canonical form with the center at site 0. No truncation
    /// is performed and the norm is preserved.
    pub fn from_raw_tensors(
        tensors: Vec<Array3<C64>>,
        max_bond: usize,
        trunc_threshold: f64,
    ) -> TnetResult<Self> {
        if tensors.is_empty() {
            return Err(TnetError::Shape("state needs at least one site".into()));
        }
        check_limits(max_bond, trunc_threshold)?;
        let n = tensors.len();
        if tensors[0].dim().0 != 1 || tensors[n - 1].dim().2 != 1 {
            return Err(TnetError::Shape("boundary bonds must have dimension 1".into()));
        }
        for i in 0..n - 1 {
            if tensors[i].dim().2 != tensors[i + 1].dim().0 {
                return Err(TnetError::Shape(format!(
                    "bond between sites {i} and {}: {} != {}",
                    i + 1,
                    tensors[i].dim().2,
                    tensors[i + 1].dim().0
                )));
            }
        }
        let mut state =
            Self { tensors, center: n - 1, max_bond, trunc_threshold, cum_discarded: 0.0 };
        state.move_center_to(0)?;
        Ok(state)
    }

    pub fn site_count(&self) -> usize {
        self.tensors.len()
    }

    pub fn phys_dims(&self) -> Vec<usize> {
        self.tensors.iter().map(|t| t.dim().1).collect()
    }

    /// Internal bond dimensions (between consecutive sites).
    pub fn bond_dims(&self) -> Vec<usize> {
        self.tensors.iter().skip(1).map(|t| t.dim().0).collect()
    }

    pub fn max_bond_dim(&self) -> usize {
        self.bond_dims().into_iter().max().unwrap_or(1)
    }

    pub fn center(&self) -> usize {
        self.center
    }

    pub fn max_bond(&self) -> usize {
        self.max_bond
    }

    pub fn trunc_threshold(&self) -> f64 {
        self.trunc_threshold
    }

    /// Cumulative relative weight discarded by all truncations so far.
    pub fn cum_discarded(&self) -> f64 {
        self.cum_discarded
    }

    pub fn set_limits(&mut self, max_bond: usize, trunc_threshold: f64) -> TnetResult<()> {
        check_limits(max_bond, trunc_threshold)?;
        self.max_bond = max_bond;
        self.trunc_threshold = trunc_threshold;
        Ok(())
    }

    pub(crate) fn tensor(&self, site: usize) -> &Array3<C64> {
        &self.tensors[site]
    }

    pub(crate) fn replace_tensor(&mut self, site: usize, t: Array3<C64>) {
        self.tensors[site] = t;
    }

    pub(crate) fn set_center_unchecked(&mut self, site: usize) {
        self.center = site;
    }

    /// Frobenius norm of the state, computed from the center tensor under
    /// the canonical-form invariant.
    pub fn norm(&self) -> f64 {
        self.tensors[self.center]
            .iter()
            .map(|z| z.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn normalize(&mut self) -> f64 {
        let n = self.norm();
        if n > 0.0 {
            let c = &mut self.tensors[self.center];
            c.mapv_inplace(|z| z / n);
        }
        n
    }

    /// Move the orthogonality center with QR gauge transformations; no
    /// truncation occurs and all observables are unchanged.
    pub fn move_center_to(&mut self, site: usize) -> TnetResult<()> {
        if site >= self.tensors.len() {
            return Err(TnetError::Shape(format!(
                "center {site} out of range for {} sites",
                self.tensors.len()
            )));
        }
        while self.center < site {
            self.shift_center_right()?;
        }
        while self.center > site {
            self.shift_center_left()?;
        }
        Ok(())
    }

    fn shift_center_right(&mut self) -> TnetResult<()> {
        let i = self.center;
        let (l, p, r) = self.tensors[i].dim();
        let m = to_mat(&self.tensors[i], l * p, r);
        let (q_mat, r_mat) = m.qr().map_err(|e| TnetError::Linalg(e.to_string()))?;
        let k = q_mat.dim().1;
        self.tensors[i] = from_mat(q_mat, (l, p, k));
        let (rn, pn, rn2) = self.tensors[i + 1].dim();
        debug_assert_eq!(rn, r);
        let merged = r_mat.dot(&to_mat(&self.tensors[i + 1], rn, pn * rn2));
        self.tensors[i + 1] = from_mat(merged, (k, pn, rn2));
        self.center = i + 1;
        Ok(())
    }

    fn shift_center_left(&mut self) -> TnetResult<()> {
        let i = self.center;
        let (l, p, r) = self.tensors[i].dim();
        // LQ via QR of the conjugate transpose
        let m = to_mat(&self.tensors[i], l, p * r);
        let (q_mat, r_mat) = dagger(&m)
            .qr()
            .map_err(|e| TnetError::Linalg(e.to_string()))?;
        let k = q_mat.dim().1;
        self.tensors[i] = from_mat(dagger(&q_mat), (k, p, r));
        let lfac = dagger(&r_mat); // (l, k)
        let (lp, pp, lr) = self.tensors[i - 1].dim();
        debug_assert_eq!(lr, l);
        let merged = to_mat(&self.tensors[i - 1], lp * pp, lr).dot(&lfac);
        self.tensors[i - 1] = from_mat(merged, (lp, pp, k));
        self.center = i - 1;
        Ok(())
    }

    /// Contract sites i and i+1 into a two-site tensor (l, p1, p2, r).
    pub(crate) fn merge_pair(&self, i: usize) -> Array4<C64> {
        let (l, p1, r1) = self.tensors[i].dim();
        let (_, p2, r2) = self.tensors[i + 1].dim();
        let m = to_mat(&self.tensors[i], l * p1, r1)
            .dot(&to_mat(&self.tensors[i + 1], r1, p2 * r2));
        m.to_shape((l, p1, p2, r2))
            .expect("merge_pair: shape")
            .to_owned()
    }

    /// Split a two-site tensor back into sites i and i+1 by SVD, truncating
    /// to the state's bond cap and discarded-weight threshold. The center
    /// moves to i+1 (`to_right`) or stays at i. Singular values are not
    /// rescaled, so discarded weight shows up as norm loss.
    pub(crate) fn split_pair(
        &mut self,
        i: usize,
        theta: Array4<C64>,
        to_right: bool,
    ) -> TnetResult<SplitOutcome> {
        let (l, p1, p2, r) = theta.dim();
        let rows = l * p1;
        let cols = p2 * r;
        let m = theta
            .to_shape((rows, cols))
            .expect("split_pair: shape")
            .to_owned();

        // reduce to a square SVD via QR on the long axis
        let (u, s, vt) = if rows >= cols {
            let (q, rm) = m.qr().map_err(|e| TnetError::Linalg(e.to_string()))?;
            let (us, s, vt) = svd_square(rm)?;
            (q.dot(&us), s, vt)
        } else {
            let (q, rm) = dagger(&m)
                .qr()
                .map_err(|e| TnetError::Linalg(e.to_string()))?;
            // m = rmᴴ qᴴ; svd(rmᴴ) = u s wt, so vt = wt qᴴ
            let (us, s, wt) = svd_square(dagger(&rm))?;
            (us, s, wt.dot(&dagger(&q)))
        };

        let total: f64 = s.iter().map(|x| x * x).sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(TnetError::Shape(
                "two-site tensor has zero or non-finite weight".into(),
            ));
        }
        let mut keep = s.len();
        let mut discarded = 0.0;
        while keep > 1 {
            let w = s[keep - 1] * s[keep - 1];
            if keep > self.max_bond || (discarded + w) <= self.trunc_threshold * total {
                discarded += w;
                keep -= 1;
            } else {
                break;
            }
        }
        let discarded_weight = discarded / total;
        self.cum_discarded += discarded_weight;

        let uk = u.slice(ndarray::s![.., ..keep]).to_owned();
        let vtk = vt.slice(ndarray::s![..keep, ..]).to_owned();
        let sk = s.slice(ndarray::s![..keep]).to_owned();
        if to_right {
            self.tensors[i] = from_mat(uk, (l, p1, keep));
            let mut sv = vtk;
            for (row, &sv_val) in sk.iter().enumerate() {
                sv.row_mut(row).mapv_inplace(|z| z * sv_val);
            }
            self.tensors[i + 1] = from_mat(sv, (keep, p2, r));
            self.center = i + 1;
        } else {
            let mut us = uk;
            for (col, &sv_val) in sk.iter().enumerate() {
                us.column_mut(col).mapv_inplace(|z| z * sv_val);
            }
            self.tensors[i] = from_mat(us, (l, p1, keep));
            self.tensors[i + 1] = from_mat(vtk, (keep, p2, r));
            self.center = i;
        }
        Ok(SplitOutcome { kept: keep, discarded_weight })
    }

    /// ⟨self|other⟩ with the convention that `self` is conjugated.
    pub fn overlap(&self, other: &Self) -> TnetResult<C64> {
        if self.phys_dims() != other.phys_dims() {
            return Err(TnetError::Shape(
                "overlap between states with different site structure".into(),
            ));
        }
        let mut e = Array2::<C64>::from_elem((1, 1), C64::new(1.0, 0.0));
        for (a, b) in self.tensors.iter().zip(&other.tensors) {
            e = transfer(&e, a, b, None);
        }
        Ok(e[(0, 0)])
    }

    /// Expectation value ⟨ψ|O_site|ψ⟩ of a Hermitian single-site operator.
    /// The state is assumed normalized. The imaginary part (which vanishes
    /// for Hermitian operators up to roundoff) is dropped.
    pub fn expect_local(&self, op: &Array2<C64>, site: usize) -> TnetResult<f64> {
        let n = self.tensors.len();
        if site >= n {
            return Err(TnetError::Shape(format!(
                "site {site} out of range for {n} sites"
            )));
        }
        let d = self.tensors[site].dim().1;
        if op.dim() != (d, d) {
            return Err(TnetError::Shape(format!(
                "operator shape {:?} does not match site dimension {d}",
                op.dim()
            )));
        }
        if site == self.center {
            // all other tensors contract to identities
            let a = &self.tensors[site];
            let (l, _, r) = a.dim();
            let ap = to_mat(&own_perm3(a, [1, 0, 2]), d, l * r);
            let oa = op.dot(&ap);
            let val: C64 = ap
                .iter()
                .zip(oa.iter())
                .map(|(x, y)| x.conj() * y)
                .sum();
            return Ok(val.re);
        }
        let mut e = Array2::<C64>::from_elem((1, 1), C64::new(1.0, 0.0));
        for (i, a) in self.tensors.iter().enumerate() {
            e = transfer(&e, a, a, if i == site { Some(op) } else { None });
        }
        Ok(e[(0, 0)].re)
    }

    /// Expectation value ⟨ψ|H|ψ⟩ of an MPO. The state is assumed
    /// normalized.
    pub fn expect_mpo(&self, h: &MpoOperator) -> TnetResult<f64> {
        if self.phys_dims() != h.phys_dims() {
            return Err(TnetError::Shape(
                "operator site structure does not match the state".into(),
            ));
        }
        let mut l = trivial_env();
        for (i, a) in self.tensors.iter().enumerate() {
            l = left_env_update(&l, a, h.tensor(i), a);
        }
        Ok(l[(0, 0, 0)].re)
    }

    /// Serialize to a versioned binary checkpoint (little-endian payload).
    /// The round trip through [`MpsState::load_checkpoint`] is bit-exact.
    pub fn save_checkpoint<W: Write>(&self, mut w: W) -> TnetResult<()> {
        w.write_all(CHECKPOINT_MAGIC)?;
        w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
        let n = self.tensors.len();
        w.write_all(&(n as u64).to_le_bytes())?;
        w.write_all(&(self.center as u64).to_le_bytes())?;
        w.write_all(&(self.max_bond as u64).to_le_bytes())?;
        w.write_all(&self.trunc_threshold.to_le_bytes())?;
        w.write_all(&self.cum_discarded.to_le_bytes())?;
        for t in &self.tensors {
            w.write_all(&(t.dim().1 as u64).to_le_bytes())?;
        }
        w.write_all(&(self.tensors[0].dim().0 as u64).to_le_bytes())?;
        for t in &self.tensors {
            w.write_all(&(t.dim().2 as u64).to_le_bytes())?;
        }
        for t in &self.tensors {
            let std = t.as_standard_layout();
            for z in std.iter() {
                w.write_all(&z.re.to_le_bytes())?;
                w.write_all(&z.im.to_le_bytes())?;
            }
        }
        Ok(())
    }

    /// Read a checkpoint produced by [`MpsState::save_checkpoint`].
    pub fn load_checkpoint<R: Read>(mut r: R) -> TnetResult<Self> {
        let mut magic = [0u8; 8];
        read_exact(&mut r, &mut magic, "format magic")?;
        if &magic != CHECKPOINT_MAGIC {
            return Err(TnetError::Corrupt(
                "bad format magic; not an MPS checkpoint".into(),
            ));
        }
        let version = read_u32(&mut r, "format version")?;
        if version != CHECKPOINT_VERSION {
            return Err(TnetError::Corrupt(format!(
                "unsupported checkpoint version {version} (expected {CHECKPOINT_VERSION})"
            )));
        }
        let n = read_extent(&mut r, "site count")?;
        if n == 0 {
            return Err(TnetError::Corrupt("site count is zero".into()));
        }
        let center = read_extent(&mut r, "center position")?;
        if center >= n {
            return Err(TnetError::Corrupt(format!(
                "center position {center} out of range for {n} sites"
            )));
        }
        let max_bond = read_extent(&mut r, "bond cap")?;
        let trunc_threshold = read_f64(&mut r, "truncation threshold")?;
        let cum_discarded = read_f64(&mut r, "cumulative discarded weight")?;
        if check_limits(max_bond, trunc_threshold).is_err() || !(cum_discarded >= 0.0) {
            return Err(TnetError::Corrupt(
                "invalid bond cap, truncation threshold, or discarded weight".into(),
            ));
        }
        let mut phys = Vec::with_capacity(n);
        for i in 0..n {
            let d = read_extent(&mut r, &format!("physical dimension of site {i}"))?;
            if d == 0 {
                return Err(TnetError::Corrupt(format!(
                    "physical dimension of site {i} is zero"
                )));
            }
            phys.push(d);
        }
        let mut bonds = Vec::with_capacity(n + 1);
        for i in 0..=n {
            let b = read_extent(&mut r, &format!("bond dimension {i}"))?;
            if b == 0 {
                return Err(TnetError::Corrupt(format!("bond dimension {i} is zero")));
            }
            bonds.push(b);
        }
        if bonds[0] != 1 || bonds[n] != 1 {
            return Err(TnetError::Corrupt("boundary bonds must have dimension 1".into()));
        }
        let mut tensors = Vec::with_capacity(n);
        for i in 0..n {
            let (l, p, rr) = (bonds[i], phys[i], bonds[i + 1]);
            let count = l
                .checked_mul(p)
                .and_then(|x| x.checked_mul(rr))
                .ok_or_else(|| {
                    TnetError::Corrupt(format!("tensor size overflow at site {i}"))
                })?;
            let mut data = Vec::with_capacity(count);
            for _ in 0..count {
                let re = read_f64(&mut r, &format!("tensor payload of site {i}"))?;
                let im = read_f64(&mut r, &format!("tensor payload of site {i}"))?;
                data.push(C64::new(re, im));
            }
            tensors.push(
                Array3::from_shape_vec((l, p, rr), data)
                    .map_err(|e| TnetError::Corrupt(format!("site {i}: {e}")))?,
            );
        }
        Ok(Self { tensors, center, max_bond, trunc_threshold, cum_discarded })
    }
}

fn check_limits(max_bond: usize, trunc_threshold: f64) -> TnetResult<()> {
    if max_bond == 0 {
        return Err(TnetError::Shape("bond cap must be at least 1".into()));
    }
    if !(0.0..1.0).contains(&trunc_threshold) {
        return Err(TnetError::Shape(format!(
            "truncation threshold must lie in [0, 1), got {trunc_threshold}"
        )));
    }
    Ok(())
}

pub(crate) fn to_mat(t: &Array3<C64>, rows: usize, cols: usize) -> Array2<C64> {
    t.as_standard_layout()
        .to_shape((rows, cols))
        .expect("mps reshape: element count mismatch")
        .to_owned()
}

pub(crate) fn from_mat(m: Array2<C64>, shape: (usize, usize, usize)) -> Array3<C64> {
    m.to_shape(shape)
        .expect("mps reshape: element count mismatch")
        .to_owned()
}

fn own_perm3(t: &Array3<C64>, perm: [usize; 3]) -> Array3<C64> {
    t.view().permuted_axes(perm).as_standard_layout().to_owned()
}

pub(crate) fn dagger(m: &Array2<C64>) -> Array2<C64> {
    m.t().mapv(|z| z.conj())
}

/// SVD of a square-ish matrix (full == thin there, so no ambiguity about
/// the returned shapes).
fn svd_square(m: Array2<C64>) -> TnetResult<(Array2<C64>, Array1<f64>, Array2<C64>)> {
    let (u, s, vt) = m
        .svd_into(true, true)
        .map_err(|e| TnetError::Linalg(e.to_string()))?;
    Ok((
        u.ok_or_else(|| TnetError::Linalg("svd returned no left vectors".into()))?,
        s,
        vt.ok_or_else(|| TnetError::Linalg("svd returned no right vectors".into()))?,
    ))
}

/// One column of the ⟨bra|ket⟩ transfer contraction, optionally with a
/// single-site operator inserted.
fn transfer(
    e: &Array2<C64>,
    bra: &Array3<C64>,
    ket: &Array3<C64>,
    op: Option<&Array2<C64>>,
) -> Array2<C64> {
    let (a, p, a2) = bra.dim();
    let (b, q, b2) = ket.dim();
    let ket_eff: Array3<C64> = match op {
        None => ket.clone(),
        Some(o) => {
            // (q', q)·(b, q, b') over q
            let kp = to_mat(&own_perm3(ket, [1, 0, 2]), q, b * b2);
            let ok = o.dot(&kp);
            own_perm3(
                &ok.to_shape((q, b, b2)).expect("transfer: op shape").to_owned(),
                [1, 0, 2],
            )
        }
    };
    // T(a, q, b2) = Σ_b E(a, b)·K(b, q, b2)
    let t = e.dot(&to_mat(&ket_eff, b, q * b2));
    let t = t.to_shape((a * p, b2)).expect("transfer: grouping");
    // E'(a2, b2) = Σ_{a,p} conj(B(a, p, a2))·T((a,p), b2)
    let bm = to_mat(bra, a * p, a2);
    let bmc = bm.mapv(|z| z.conj());
    bmc.t().dot(&t.to_owned())
}


fn read_exact<R: Read>(r: &mut R, buf: &mut [u8], field: &str) -> TnetResult<()> {
    r.read_exact(buf).map_err(|_| {
        TnetError::Corrupt(format!("truncated while reading {field}"))
    })
}

fn read_u32<R: Read>(r: &mut R, field: &str) -> TnetResult<u32> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b, field)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R, field: &str) -> TnetResult<u64> {
    let mut b = [0u8; 8];
    read_exact(r, &mut b, field)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R, field: &str) -> TnetResult<f64> {
    let mut b = [0u8; 8];
    read_exact(r, &mut b, field)?;
    Ok(f64::from_le_bytes(b))
}

/// Read a u64 extent and bound it, so corrupted headers fail cleanly
/// instead of attempting absurd allocations.
fn read_extent<R: Read>(r: &mut R, field: &str) -> TnetResult<usize> {
    let v = read_u64(r, field)?;
    if v > CHECKPOINT_MAX_EXTENT {
        return Err(TnetError::Corrupt(format!(
            "{field} = {v} exceeds the sanity bound {CHECKPOINT_MAX_EXTENT}"
        )));
    }
    Ok(v as usize)
}
