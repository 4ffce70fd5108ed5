//! Tensor trains. Core `k` has shape `(r_{k-1}, n_k, r_k)` with `r_0 = r_N = 1`; its
//! unfoldings `G^{2}` (`r_{k-1} n_k x r_k`) and `G^{1}` (`r_{k-1} x n_k r_k`) are
//! reinterpretations of the core buffer.

use nalgebra::DMatrixView;

use crate::error::{Error, Result};
use crate::linalg::{svd, thin_qr, truncation_rank};
use crate::tensor::{DenseTensor, RealMatrix};

/// Default cap on the number of entries [`TtTensor::full`] will materialize.
pub const DENSE_CAP: usize = 10_000_000;

#[derive(Clone, Debug, PartialEq)]
pub struct TtTensor {
    cores: Vec<DenseTensor>,
}

/// `(r_{k-1}, n_k, r_k)` of an order-3 core.
pub fn core_dims(core: &DenseTensor) -> (usize, usize, usize) {
    let s = core.shape();
    (s[0], s[1], s[2])
}

/// `G^{2}` view: `r_{k-1} n_k x r_k`.
pub fn left_unfolding(core: &DenseTensor) -> DMatrixView<'_, f64> {
    let (a, n, b) = core_dims(core);
    DMatrixView::from_slice(core.data(), a * n, b)
}

/// `G^{1}` view: `r_{k-1} x n_k r_k`.
pub fn right_unfolding(core: &DenseTensor) -> DMatrixView<'_, f64> {
    let (a, n, b) = core_dims(core);
    DMatrixView::from_slice(core.data(), a, n * b)
}

/// Slice `G[:, i, :]` as an `r_{k-1} x r_k` matrix.
pub fn core_slice(core: &DenseTensor, i: usize) -> RealMatrix {
    let (a, n, b) = core_dims(core);
    let d = core.data();
    RealMatrix::from_fn(a, b, |p, q| d[p + a * (i + n * q)])
}

/// Contracts the middle mode of a core with a vector: `Σ_i w_i G[:, i, :]`.
pub fn contract_middle(core: &DenseTensor, w: &[f64]) -> RealMatrix {
    let (a, n, b) = core_dims(core);
    let d = core.data();
    let mut out = RealMatrix::zeros(a, b);
    for q in 0..b {
        for (i, &wi) in w.iter().enumerate().take(n) {
            if wi == 0.0 {
                continue;
            }
            let base = a * (i + n * q);
            for p in 0..a {
                out[(p, q)] += wi * d[base + p];
            }
        }
    }
    out
}

fn core_from_matrix(m: &RealMatrix, a: usize, n: usize, b: usize) -> DenseTensor {
    DenseTensor::new(vec![a, n, b], m.as_slice().to_vec()).expect("core dimensions match matrix size")
}

impl TtTensor {
    pub fn new(cores: Vec<DenseTensor>) -> Result<Self> {
        if cores.is_empty() {
            return Err(Error::Shape("a tensor train needs at least one core".into()));
        }
        let mut prev = 1;
        for (k, c) in cores.iter().enumerate() {
            if c.order() != 3 {
                return Err(Error::Shape(format!("core {k} has order {}", c.order())));
            }
            let (a, _, b) = core_dims(c);
            if a != prev {
                return Err(Error::Shape(format!("core {k} has left rank {a}, expected {prev}")));
            }
            prev = b;
        }
        if prev != 1 {
            return Err(Error::Shape(format!("last core has right rank {prev}")));
        }
        Ok(Self { cores })
    }

    pub fn cores(&self) -> &[DenseTensor] {
        &self.cores
    }

    pub fn into_cores(self) -> Vec<DenseTensor> {
        self.cores
    }

    pub fn order(&self) -> usize {
        self.cores.len()
    }

    /// `(r_0, .., r_N)`.
    pub fn ranks(&self) -> Vec<usize> {
        let mut r = vec![1];
        r.extend(self.cores.iter().map(|c| core_dims(c).2));
        r
    }

    pub fn shape(&self) -> Vec<usize> {
        self.cores.iter().map(|c| core_dims(c).1).collect()
    }

    /// Number of stored reals.
    pub fn storage(&self) -> usize {
        self.cores.iter().map(DenseTensor::len).sum()
    }

    /// Entry at a 0-based multi-index, as a chain of vector-matrix products.
    pub fn entry(&self, idx: &[usize]) -> Result<f64> {
        if idx.len() != self.cores.len() {
            return Err(Error::Index(format!("index of length {} for order {}", idx.len(), self.cores.len())));
        }
        let mut v = vec![1.0];
        for (k, (core, &i)) in self.cores.iter().zip(idx).enumerate() {
            let (a, n, b) = core_dims(core);
            if i >= n {
                return Err(Error::Index(format!("index {i} in mode {k} of size {n}")));
            }
            let d = core.data();
            let mut w = vec![0.0; b];
            for (q, wq) in w.iter_mut().enumerate() {
                let base = a * (i + n * q);
                *wq = v.iter().zip(&d[base..base + a]).map(|(x, y)| x * y).sum();
            }
            v = w;
        }
        Ok(v[0])
    }

    /// Dense reconstruction, refused above `cap` entries.
    pub fn full_capped(&self, cap: usize) -> Result<DenseTensor> {
        let shape = self.shape();
        let entries = shape.iter().try_fold(1usize, |acc, &n| acc.checked_mul(n)).unwrap_or(usize::MAX);
        if entries > cap {
            return Err(Error::SizeCap { entries, cap });
        }
        let mut acc = RealMatrix::from_element(1, 1, 1.0);
        for core in &self.cores {
            let (a, n, b) = core_dims(core);
            let rows = acc.nrows();
            let z = &acc * right_unfolding(core);
            debug_assert_eq!(z.ncols(), n * b);
            let _ = a;
            acc = RealMatrix::from_column_slice(rows * n, b, z.as_slice());
        }
        DenseTensor::new(shape, acc.as_slice().to_vec())
    }

    pub fn full(&self) -> Result<DenseTensor> {
        self.full_capped(DENSE_CAP)
    }

    /// Unfolding `X^{j}` (first `j` modes as rows) assembled from the cores as
    /// `(Π_{i<j} I ⊗ G_i^{2}) G_j^{2} · G_{j+1}^{1} (Π_{i>j+1} G_i^{1} ⊗ I)`.
    pub fn unfolding(&self, j: usize) -> Result<RealMatrix> {
        let nmodes = self.cores.len();
        if j == 0 || j > nmodes {
            return Err(Error::Index(format!("unfolding index {j} outside 1..={nmodes}")));
        }
        let mut left = RealMatrix::from_element(1, 1, 1.0);
        for core in &self.cores[..j] {
            let (_, n, b) = core_dims(core);
            let z = &left * right_unfolding(core);
            left = RealMatrix::from_column_slice(left.nrows() * n, b, z.as_slice());
        }
        let mut right = RealMatrix::from_element(1, 1, 1.0);
        for core in self.cores[j..].iter().rev() {
            let (a, n, _) = core_dims(core);
            // right has rows r_k and columns indexed by the trailing modes.
            let cols = right.ncols();
            let g2 = left_unfolding(core); // (a n) x r_k
            let z = g2 * &right; // (a n) x cols, row = p + a i
            let mut next = RealMatrix::zeros(a, n * cols);
            for c in 0..cols {
                for i in 0..n {
                    for p in 0..a {
                        next[(p, i + n * c)] = z[(p + a * i, c)];
                    }
                }
            }
            right = next;
        }
        Ok(left * right)
    }
}

/// TT rounding with relative accuracy `eps`: right-to-left QR orthogonalization followed by
/// a left-to-right sweep of truncated SVDs with per-step threshold `eps ‖X‖_F / √(N-1)`.
pub fn tt_round(t: &TtTensor, eps: f64) -> Result<TtTensor> {
    if !(eps >= 0.0) {
        return Err(Error::InvalidArgument(format!("rounding tolerance {eps} must be non-negative")));
    }
    let mut cores = t.cores.clone();
    let nmodes = cores.len();
    if nmodes == 1 {
        return Ok(t.clone());
    }
    for i in (1..nmodes).rev() {
        let (a, n, b) = core_dims(&cores[i]);
        let (q, r) = thin_qr(right_unfolding(&cores[i]).transpose());
        let k = q.ncols();
        cores[i] = core_from_matrix(&q.transpose(), k, n, b);
        let (pa, pn, _) = core_dims(&cores[i - 1]);
        let prev = left_unfolding(&cores[i - 1]) * r.transpose();
        debug_assert_eq!(prev.ncols(), k);
        let _ = a;
        cores[i - 1] = core_from_matrix(&prev, pa, pn, k);
    }
    let norm = cores[0].frobenius_norm();
    let delta = eps / ((nmodes - 1) as f64).sqrt() * norm;
    for i in 0..nmodes - 1 {
        let (a, n, _) = core_dims(&cores[i]);
        let f = svd(left_unfolding(&cores[i]).into_owned());
        let k = truncation_rank(&f.s, delta).min(f.s.len()).max(1);
        let u = f.u.columns(0, k).into_owned();
        cores[i] = core_from_matrix(&u, a, n, k);
        let mut sv = f.vt.rows(0, k).into_owned();
        for (row, s) in f.s.iter().take(k).enumerate() {
            sv.row_mut(row).scale_mut(*s);
        }
        let (_, nn, nb) = core_dims(&cores[i + 1]);
        let next = sv * right_unfolding(&cores[i + 1]);
        cores[i + 1] = core_from_matrix(&next, k, nn, nb);
    }
    TtTensor::new(cores)
}

/// Left interface of the source cores evaluated at the points: with `G_1..G_d` the first
/// `d` cores and `U_k` the source factor matrices (`N x n`), returns the `N x r_d` matrix
/// whose row `p` is `Σ_{i_1..i_d} U_1[p,i_1]..U_d[p,i_d] G_1[:,i_1,:]..G_d[:,i_d,:]`.
/// Costs `O(N n r²)` per core; no object of size `n^d` is formed.
pub fn left_contraction(cores: &[DenseTensor], factors: &[RealMatrix]) -> Result<RealMatrix> {
    check_factors(cores, factors)?;
    let npts = factors[0].nrows();
    let mut s = RealMatrix::from_element(npts, 1, 1.0);
    for (core, u) in cores.iter().zip(factors) {
        let (a, n, b) = core_dims(core);
        if s.ncols() != a {
            return Err(Error::Shape(format!("contraction rank {} does not match core rank {a}", s.ncols())));
        }
        let mut next = RealMatrix::zeros(npts, b);
        for i in 0..n {
            let part = &s * core_slice(core, i);
            for q in 0..b {
                for p in 0..npts {
                    next[(p, q)] += u[(p, i)] * part[(p, q)];
                }
            }
        }
        s = next;
    }
    Ok(s)
}

/// Right interface of the target cores: with `G_{D-d+1}..G_D` the last `d` cores and `V_k`
/// the target factor matrices, returns the `N x r_{D-d}` matrix `T` whose row `p` is the
/// contraction of the cores with the rows `V_1[p,:]..V_d[p,:]`.
pub fn right_contraction(cores: &[DenseTensor], factors: &[RealMatrix]) -> Result<RealMatrix> {
    check_factors(cores, factors)?;
    let npts = factors[0].nrows();
    let mut t = RealMatrix::from_element(npts, 1, 1.0);
    for (core, v) in cores.iter().zip(factors).rev() {
        let (a, n, b) = core_dims(core);
        if t.ncols() != b {
            return Err(Error::Shape(format!("contraction rank {} does not match core rank {b}", t.ncols())));
        }
        let mut next = RealMatrix::zeros(npts, a);
        for i in 0..n {
            let part = &t * core_slice(core, i).transpose();
            for q in 0..a {
                for p in 0..npts {
                    next[(p, q)] += v[(p, i)] * part[(p, q)];
                }
            }
        }
        t = next;
    }
    Ok(t)
}

fn check_factors(cores: &[DenseTensor], factors: &[RealMatrix]) -> Result<()> {
    if cores.len() != factors.len() || cores.is_empty() {
        return Err(Error::Shape(format!("{} cores but {} factor matrices", cores.len(), factors.len())));
    }
    let npts = factors[0].nrows();
    for (k, (c, f)) in cores.iter().zip(factors).enumerate() {
        if c.order() != 3 || f.ncols() != c.shape()[1] || f.nrows() != npts {
            return Err(Error::Shape(format!("factor {k} of shape {:?} does not match core {:?}", f.shape(), c.shape())));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::products::{face_split, kron};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn random_tt(shape: &[usize], ranks: &[usize], seed: u64) -> TtTensor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cores = shape
            .iter()
            .enumerate()
            .map(|(k, &n)| {
                DenseTensor::from_fn(vec![ranks[k], n, ranks[k + 1]], |_| rng.gen_range(-1.0..1.0)).unwrap()
            })
            .collect();
        TtTensor::new(cores).unwrap()
    }

    fn all_indices(shape: &[usize]) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        DenseTensor::from_fn(shape.to_vec(), |i| {
            out.push(i.to_vec());
            0.0
        })
        .unwrap();
        out
    }

    #[test]
    fn rank_one_entries_are_products() {
        let t = random_tt(&[3, 2, 4], &[1, 1, 1, 1], 1);
        for idx in all_indices(&[3, 2, 4]) {
            let p: f64 = t.cores().iter().zip(&idx).map(|(c, &i)| c.data()[i]).product();
            assert!((t.entry(&idx).unwrap() - p).abs() < 1e-15);
        }
    }

    #[test]
    fn order_two_is_matrix_product() {
        let t = random_tt(&[4, 5], &[1, 3, 1], 2);
        let m = left_unfolding(&t.cores()[0]) * right_unfolding(&t.cores()[1]);
        for i in 0..4 {
            for j in 0..5 {
                assert!((t.entry(&[i, j]).unwrap() - m[(i, j)]).abs() < 1e-14);
            }
        }
        assert_eq!(t.full().unwrap().unfold(1).unwrap(), m);
    }

    #[test]
    fn entries_match_full() {
        let t = random_tt(&[3, 4, 5], &[1, 2, 3, 1], 3);
        let f = t.full().unwrap();
        for idx in all_indices(&[3, 4, 5]) {
            assert!((t.entry(&idx).unwrap() - f.get(&idx).unwrap()).abs() < 1e-13);
        }
        assert!(t.entry(&[3, 0, 0]).is_err());
        assert!(matches!(t.full_capped(10), Err(Error::SizeCap { entries: 60, cap: 10 })));
    }

    #[test]
    fn unfolding_from_cores_matches_dense() {
        let t = random_tt(&[2, 3, 2, 3], &[1, 2, 3, 2, 1], 4);
        let f = t.full().unwrap();
        for j in 1..=4 {
            assert!((t.unfolding(j).unwrap() - f.unfold(j).unwrap()).norm() < 1e-13);
        }
    }

    fn pad_double(t: &TtTensor) -> TtTensor {
        // Doubles every inner rank with zero blocks; the represented tensor is unchanged.
        let n = t.order();
        let cores = t
            .cores()
            .iter()
            .enumerate()
            .map(|(k, c)| {
                let (a, m, b) = core_dims(c);
                let na = if k == 0 { 1 } else { 2 * a };
                let nb = if k == n - 1 { 1 } else { 2 * b };
                DenseTensor::from_fn(vec![na, m, nb], |i| {
                    if i[0] < a && i[2] < b {
                        c.get(&[i[0], i[1], i[2]]).unwrap()
                    } else {
                        0.0
                    }
                })
                .unwrap()
            })
            .collect();
        TtTensor::new(cores).unwrap()
    }

    #[test]
    fn rounding_recovers_padded_ranks() {
        let t = random_tt(&[4, 5, 3, 4], &[1, 2, 3, 2, 1], 5);
        let padded = pad_double(&t);
        assert_eq!(padded.ranks(), vec![1, 4, 6, 4, 1]);
        let r = tt_round(&padded, 1e-12).unwrap();
        assert_eq!(r.ranks(), t.ranks());
        let (a, b) = (r.full().unwrap(), t.full().unwrap());
        let err = a.data().iter().zip(b.data()).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        assert!(err <= 1e-12 * b.frobenius_norm());
    }

    #[test]
    fn rounding_of_rank_one_is_rank_one() {
        let t = random_tt(&[3, 3, 3], &[1, 1, 1, 1], 6);
        let r = tt_round(&t, 0.5).unwrap();
        assert_eq!(r.ranks(), vec![1, 1, 1, 1]);
        let (a, b) = (r.full().unwrap(), t.full().unwrap());
        for (x, y) in a.data().iter().zip(b.data()) {
            assert!((x - y).abs() < 1e-14);
        }
    }

    #[test]
    fn rounding_meets_tolerance() {
        let t = random_tt(&[5, 6, 5, 6], &[1, 5, 6, 5, 1], 7);
        let full = t.full().unwrap();
        for eps in [1e-1, 1e-3, 1e-6] {
            let r = tt_round(&t, eps).unwrap();
            let diff = r.full().unwrap();
            let err = diff.data().iter().zip(full.data()).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
            assert!(err <= eps * full.frobenius_norm() * (1.0 + 1e-10));
            assert!(r.ranks().iter().zip(t.ranks()).all(|(a, b)| *a <= b));
        }
    }

    fn random_factor(rows: usize, cols: usize, seed: u64) -> RealMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        RealMatrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0))
    }

    #[test]
    fn left_contraction_base_case() {
        let t = random_tt(&[3, 2], &[1, 2, 1], 8);
        let u = random_factor(5, 3, 9);
        let s = left_contraction(&t.cores()[..1], &[u.clone()]).unwrap();
        assert!((s - &u * left_unfolding(&t.cores()[0])).norm() < 1e-14);
    }

    #[test]
    fn left_contraction_matches_materialized_face_split() {
        let t = random_tt(&[3, 3, 3, 2], &[1, 2, 2, 2, 1], 10);
        let us: Vec<_> = (0..3).map(|k| random_factor(5, 3, 20 + k)).collect();
        // d = 2: (U_2 ⋉ U_1)(I ⊗ G_1^{2}) G_2^{2}
        let g1 = left_unfolding(&t.cores()[0]).into_owned();
        let g2 = left_unfolding(&t.cores()[1]).into_owned();
        let id = RealMatrix::identity(3, 3);
        let dense = face_split(&us[1], &us[0]).unwrap() * kron(&id, &g1) * &g2;
        let s = left_contraction(&t.cores()[..2], &us[..2]).unwrap();
        assert!((s - &dense).norm() < 1e-13);
        // d = 3 adds another level of the same recursion.
        let g3 = left_unfolding(&t.cores()[2]).into_owned();
        let fs = face_split(&us[2], &face_split(&us[1], &us[0]).unwrap()).unwrap();
        let l = kron(&RealMatrix::identity(9, 9), &g1);
        let l = l * kron(&id, &g2);
        let dense3 = fs * l * g3;
        let s3 = left_contraction(&t.cores()[..3], &us).unwrap();
        assert!((s3 - dense3).norm() < 1e-13);
    }

    #[test]
    fn right_contraction_matches_dense_unfolding() {
        let t = random_tt(&[2, 3, 3], &[1, 2, 3, 1], 11);
        let vs: Vec<_> = (0..2).map(|k| random_factor(4, 3, 30 + k)).collect();
        let tmat = right_contraction(&t.cores()[1..], &vs).unwrap();
        // Direct sum over the trailing indices and the inner rank.
        let r1 = right_unfolding(&t.cores()[1]).into_owned();
        let r2 = right_unfolding(&t.cores()[2]).into_owned();
        for p in 0..4 {
            for a in 0..2 {
                let mut s = 0.0;
                for i in 0..3 {
                    for j in 0..3 {
                        for b in 0..3 {
                            s += vs[0][(p, i)] * vs[1][(p, j)] * r1[(a, i + 3 * b)] * r2[(b, j)];
                        }
                    }
                }
                assert!((tmat[(p, a)] - s).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn contractions_at_grid_nodes_select_rows() {
        let t = random_tt(&[3, 3], &[1, 2, 1], 12);
        let sel = RealMatrix::identity(3, 3);
        let s = left_contraction(&t.cores()[..1], &[sel.clone()]).unwrap();
        assert!((s - left_unfolding(&t.cores()[0])).norm() == 0.0);
        assert!(left_contraction(&t.cores()[..1], &[RealMatrix::zeros(3, 2)]).is_err());
    }
}
