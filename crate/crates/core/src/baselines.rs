//! Comparison methods: adaptive cross approximation with partial pivoting, and the truncated
//! SVD as the best low-rank approximation.

use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, svd};
use crate::tensor::RealMatrix;

/// `K ≈ A Bᵀ`.
#[derive(Clone, Debug, PartialEq)]
pub struct LowRankPair {
    pub a: RealMatrix,
    pub b: RealMatrix,
}

impl LowRankPair {
    pub fn new(a: RealMatrix, b: RealMatrix) -> Result<Self> {
        if a.ncols() != b.ncols() {
            return Err(Error::Shape(format!("factors with {} and {} columns", a.ncols(), b.ncols())));
        }
        Ok(Self { a, b })
    }

    pub fn rank(&self) -> usize {
        self.a.ncols()
    }

    pub fn to_dense(&self) -> RealMatrix {
        &self.a * self.b.transpose()
    }

    /// `A(rows) B(cols)ᵀ`.
    pub fn evaluate(&self, rows: &[usize], cols: &[usize]) -> RealMatrix {
        self.a.select_rows(rows) * self.b.select_rows(cols).transpose()
    }
}

/// Outcome of [`aca`].
#[derive(Clone, Debug)]
pub struct AcaResult {
    pub pair: LowRankPair,
    /// Whether the residual estimate fell below the tolerance before the rank cap.
    pub converged: bool,
    /// Last ratio `‖u_k‖‖v_k‖ / ‖S_k‖_F`.
    pub estimate: f64,
    /// Entries of the matrix that were evaluated.
    pub evaluations: u64,
}

/// Residual entries this small relative to the evaluated row are cancellation noise.
const CANCELLATION: f64 = 64.0 * f64::EPSILON;

/// Consecutive vanishing residual rows after which the residual is taken to be zero.
const ZERO_ROW_LIMIT: usize = 8;

/// Partially pivoted ACA of an `nrows x ncols` matrix given entrywise.
///
/// Starts at row 0; each step takes the largest entry of the current residual row as the
/// column pivot and the largest unused entry of the new residual column as the next row.
/// Stops when `‖u_k‖‖v_k‖ <= eps ‖S_k‖_F`, with `‖S_k‖_F` updated incrementally, or at
/// `max_rank`. A residual row that vanishes to roundoff moves on to the next row without adding a cross.
pub fn aca(entry: &mut dyn FnMut(usize, usize) -> Result<f64>, nrows: usize, ncols: usize, eps: f64, max_rank: usize) -> Result<AcaResult> {
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance {eps} must be positive")));
    }
    let cap = max_rank.min(nrows).min(ncols);
    let mut us: Vec<Vec<f64>> = Vec::new();
    let mut vs: Vec<Vec<f64>> = Vec::new();
    let mut row_used = vec![false; nrows];
    let mut col_used = vec![false; ncols];
    let mut norm2 = 0.0;
    let mut estimate = f64::INFINITY;
    let mut evaluations = 0u64;
    let mut converged = nrows == 0 || ncols == 0;
    let mut zero_rows = 0;
    let mut last_col: Option<Vec<f64>> = None;
    let mut i = 0;
    while !converged && us.len() < cap {
        row_used[i] = true;
        let mut row = vec![0.0; ncols];
        for (j, r) in row.iter_mut().enumerate() {
            *r = entry(i, j)?;
        }
        evaluations += ncols as u64;
        let raw = row.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        for (u, v) in us.iter().zip(&vs) {
            axpy(-u[i], v, &mut row);
        }
        let pivot_col = (0..ncols).filter(|&j| !col_used[j]).max_by(|&a, &b| row[a].abs().total_cmp(&row[b].abs()));
        let Some(j) = pivot_col.filter(|&j| row[j].abs() > CANCELLATION * raw) else {
            zero_rows += 1;
            match next_row(last_col.as_deref(), &row_used) {
                Some(next) if zero_rows < ZERO_ROW_LIMIT => {
                    i = next;
                    continue;
                }
                _ => {
                    converged = true;
                    estimate = 0.0;
                    break;
                }
            }
        };
        zero_rows = 0;
        let delta = row[j];
        let v: Vec<f64> = row.iter().map(|x| x / delta).collect();
        let mut u = vec![0.0; nrows];
        for (p, c) in u.iter_mut().enumerate() {
            *c = entry(p, j)?;
        }
        evaluations += nrows as u64;
        for (uk, vk) in us.iter().zip(&vs) {
            axpy(-vk[j], uk, &mut u);
        }
        col_used[j] = true;
        let (nu, nv) = (dot(&u, &u), dot(&v, &v));
        let cross: f64 = us.iter().zip(&vs).map(|(uk, vk)| dot(uk, &u) * dot(vk, &v)).sum();
        norm2 += 2.0 * cross + nu * nv;
        estimate = (nu * nv).sqrt() / norm2.max(0.0).sqrt();
        us.push(u);
        vs.push(v);
        if estimate <= eps {
            converged = true;
            break;
        }
        last_col = us.last().cloned();
        match next_row(last_col.as_deref(), &row_used) {
            Some(next) => i = next,
            None => break,
        }
    }
    let k = us.len();
    let a = RealMatrix::from_fn(nrows, k, |p, q| us[q][p]);
    let b = RealMatrix::from_fn(ncols, k, |p, q| vs[q][p]);
    Ok(AcaResult { pair: LowRankPair { a, b }, converged, estimate, evaluations })
}

/// Largest unused entry of the last residual column, or the first unused row.
fn next_row(col: Option<&[f64]>, used: &[bool]) -> Option<usize> {
    let unused = (0..used.len()).filter(|&p| !used[p]);
    match col {
        Some(c) => unused.max_by(|&a, &b| c[a].abs().total_cmp(&c[b].abs())),
        None => unused.min(),
    }
}

/// Best rank-`rank` approximation `U_k Σ_k V_kᵀ` as `(U_k Σ_k, V_k)`, with all singular values.
pub fn truncated_svd(k: &RealMatrix, rank: usize) -> Result<(LowRankPair, Vec<f64>)> {
    let (m, n) = k.shape();
    if rank > m.min(n) {
        return Err(Error::InvalidArgument(format!("rank {rank} exceeds the smaller dimension of a {m}x{n} matrix")));
    }
    let f = svd(k.clone());
    let mut a = f.u.columns(0, rank).into_owned();
    for (q, mut c) in a.column_iter_mut().enumerate() {
        c *= f.s[q];
    }
    let b = f.vt.rows(0, rank).transpose();
    Ok((LowRankPair { a, b }, f.s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::spectral_norm;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(m: usize, n: usize, seed: u64) -> RealMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        RealMatrix::from_fn(m, n, |_, _| rng.gen_range(-1.0..1.0))
    }

    fn run(m: &RealMatrix, eps: f64, max_rank: usize) -> AcaResult {
        aca(&mut |i, j| Ok(m[(i, j)]), m.nrows(), m.ncols(), eps, max_rank).unwrap()
    }

    #[test]
    fn exact_rank_two_is_recovered_at_rank_two() {
        let m = random(30, 2, 1) * random(25, 2, 2).transpose();
        let r = run(&m, 1e-12, 10);
        assert!(r.converged);
        assert_eq!(r.pair.rank(), 2);
        assert!((r.pair.to_dense() - &m).norm() <= 1e-12 * m.norm());
    }

    #[test]
    fn zero_matrix_is_converged_at_rank_zero() {
        let r = run(&RealMatrix::zeros(20, 15), 1e-6, 10);
        assert!(r.converged);
        assert_eq!(r.pair.rank(), 0);
    }

    #[test]
    fn zero_leading_rows_are_skipped() {
        let mut m = random(12, 1, 3) * random(9, 1, 4).transpose();
        for j in 0..9 {
            m[(0, j)] = 0.0;
            m[(1, j)] = 0.0;
        }
        let r = run(&m, 1e-10, 5);
        assert_eq!(r.pair.rank(), 1);
        assert!((r.pair.to_dense() - &m).norm() <= 1e-12 * m.norm());
    }

    #[test]
    fn rank_cap_leaves_the_run_unconverged() {
        let m = random(20, 20, 5);
        let r = run(&m, 1e-10, 4);
        assert!(!r.converged);
        assert_eq!(r.pair.rank(), 4);
    }

    #[test]
    fn smooth_kernel_meets_tolerance() {
        let m = RealMatrix::from_fn(200, 150, |i, j| 1.0 / (1.0 + (i as f64 / 200.0 - 2.0 - j as f64 / 150.0).abs()));
        let r = run(&m, 1e-8, 100);
        assert!(r.converged);
        assert!((r.pair.to_dense() - &m).norm() <= 1e-6 * m.norm());
    }

    #[test]
    fn truncated_svd_error_is_next_singular_value() {
        let m = random(50, 40, 6);
        let (pair, s) = truncated_svd(&m, 10).unwrap();
        let err = spectral_norm(&(pair.to_dense() - &m));
        assert!((err - s[10]).abs() <= 1e-12 * s[0]);
        let (id, _) = truncated_svd(&RealMatrix::identity(3, 3), 3).unwrap();
        assert!((id.to_dense() - RealMatrix::identity(3, 3)).norm() <= 1e-14);
        assert!(truncated_svd(&m, 41).is_err());
    }
}
