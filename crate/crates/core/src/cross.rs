//! Black-box tensor-train approximation by greedy cross interpolation.
//!
//! Index sets are nested: `I^{≤k}` holds k-tuples of leading indices, `I^{>k}` holds
//! `(N-k)`-tuples of trailing indices, and every member extends a member of its neighbour.
//! Each sweep adds at most one pivot per cut, chosen from the residual of the two-mode
//! supercore `X(I^{≤k-1}, :, :, I^{>k+1})` seen as an `r_{k-1} n_k x n_{k+1} r_{k+1}` matrix.
//!
//! The state kept per mode `m` is the fiber tensor `F_m = X(I^{≤m}, :, I^{>m+1})` and, for all
//! but the last mode, the interpolation core `F_m P_{m+1}^{-1}` with `P_k = X(I^{≤k}, I^{>k})`.
//! `P_k` is kept as an unpivoted LU factorization grown by bordering; because pivots are added
//! in greedy order its diagonal is the sequence of selected residuals. Adding a pivot costs
//! `O(n r²)` flops and `O(n r)` entry evaluations.

use std::collections::HashMap;

use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::kernels::EntryOracle;
use crate::linalg::{axpy, cond2, cond2_2x2, dot};
use crate::tensor::{DenseTensor, RealMatrix};
use crate::tt::TtTensor;

/// Cross matrices whose condition estimate exceeds this are treated as singular.
pub const MAX_CROSS_CONDITION: f64 = 1e14;

/// Pool tuples tried when enlarging the index sets after a failed check.
const AUGMENT_CANDIDATES: usize = 8;

/// Consecutive sweeps without a new pivot after which the sweep gives up.
const IDLE_LIMIT: usize = 10;

/// Residuals below this fraction of the sampled maximum are not used as pivots.
const NOISE_LEVEL: f64 = 1e-13;

/// Relative disagreement between the two pivot estimates that triggers a rebuild.
const DRIFT_TOLERANCE: f64 = 1e-6;
/// Default sweep limit; each sweep raises every rank by at most one.
pub const DEFAULT_MAX_SWEEPS: usize = 1000;
/// Sweeps of the initialization heuristic.
pub const DEFAULT_INIT_ITERATIONS: usize = 10;

/// Nested left and right index families for cuts `k = 1..N-1`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NestedIndexSets {
    left: Vec<Vec<Vec<usize>>>,
    right: Vec<Vec<Vec<usize>>>,
}

impl NestedIndexSets {
    /// `left[k-1] = I^{≤k}`, `right[k-1] = I^{>k}`; validated structurally.
    pub fn new(left: Vec<Vec<Vec<usize>>>, right: Vec<Vec<Vec<usize>>>) -> Result<Self> {
        let s = Self { left, right };
        s.check_structure()?;
        Ok(s)
    }

    /// Cardinality-one sets threaded through a single multi-index.
    pub fn from_pivot(idx: &[usize]) -> Self {
        let n = idx.len();
        let left = (1..n).map(|k| vec![idx[..k].to_vec()]).collect();
        let right = (1..n).map(|k| vec![idx[k..].to_vec()]).collect();
        Self { left, right }
    }

    /// Tensor order `N`.
    pub fn order(&self) -> usize {
        self.left.len() + 1
    }

    /// `I^{≤k}` for `k = 1..N-1`.
    pub fn left(&self, k: usize) -> &[Vec<usize>] {
        &self.left[k - 1]
    }

    /// `I^{>k}` for `k = 1..N-1`.
    pub fn right(&self, k: usize) -> &[Vec<usize>] {
        &self.right[k - 1]
    }

    /// `(r_0, .., r_N)` with `r_k = |I^{≤k}|`.
    pub fn ranks(&self) -> Vec<usize> {
        let mut r = vec![1];
        r.extend(self.left.iter().map(Vec::len));
        r.push(1);
        r
    }

    fn check_structure(&self) -> Result<()> {
        if self.left.len() != self.right.len() {
            return Err(Error::Shape(format!("{} left families but {} right families", self.left.len(), self.right.len())));
        }
        let n = self.order();
        for k in 1..n {
            let (l, r) = (self.left(k), self.right(k));
            if l.is_empty() || l.len() != r.len() {
                return Err(Error::Shape(format!("cut {k}: |I^<=k| = {} but |I^>k| = {}", l.len(), r.len())));
            }
            if l.iter().any(|t| t.len() != k) || r.iter().any(|t| t.len() != n - k) {
                return Err(Error::Shape(format!("cut {k}: tuple lengths do not match the cut")));
            }
            let mut seen = std::collections::HashSet::new();
            if !l.iter().all(|t| seen.insert(t)) {
                return Err(Error::InvalidArgument(format!("cut {k}: duplicate left tuple")));
            }
            seen.clear();
            if !r.iter().all(|t| seen.insert(t)) {
                return Err(Error::InvalidArgument(format!("cut {k}: duplicate right tuple")));
            }
        }
        if !self.is_nested() {
            return Err(Error::InvalidArgument("index sets are not nested".into()));
        }
        Ok(())
    }

    /// Dropping the last coordinate of a member of `I^{≤k}` gives a member of `I^{≤k-1}`, and
    /// dropping the first coordinate of a member of `I^{>k}` gives a member of `I^{>k+1}`.
    pub fn is_nested(&self) -> bool {
        let n = self.order();
        for k in 2..n {
            let prev = self.left(k - 1);
            if !self.left(k).iter().all(|t| prev.iter().any(|p| p[..] == t[..k - 1])) {
                return false;
            }
        }
        for k in 1..n.saturating_sub(1) {
            let next = self.right(k + 1);
            if !self.right(k).iter().all(|t| next.iter().any(|p| p[..] == t[1..])) {
                return false;
            }
        }
        true
    }

    /// Checks the indices against a tensor shape.
    pub fn check_shape(&self, shape: &[usize]) -> Result<()> {
        if shape.len() != self.order() {
            return Err(Error::Shape(format!("index sets of order {} for a tensor of order {}", self.order(), shape.len())));
        }
        for k in 1..self.order() {
            let bad_l = self.left(k).iter().any(|t| t.iter().zip(shape).any(|(i, n)| i >= n));
            let bad_r = self.right(k).iter().any(|t| t.iter().zip(&shape[k..]).any(|(i, n)| i >= n));
            if bad_l || bad_r {
                return Err(Error::Index(format!("cut {k}: index outside shape {shape:?}")));
            }
        }
        Ok(())
    }
}

/// Outcome of one greedy cross update.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CrossUpdate {
    /// New pivot `(row, col)` appended to the index sets.
    Added { row: usize, col: usize },
    /// The residual vanished at every inspected position.
    Converged,
    /// The cross matrix is (numerically) singular; the caller should skip this update.
    Singular,
}

/// Positions to inspect for a residual: `max(rows, cols)` distinct random positions, or all of
/// them when that is not much fewer than the whole matrix.
fn residual_samples(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let total = rows * cols;
    let count = rows.max(cols);
    if total <= 4 * count {
        (0..total).collect()
    } else {
        sample_indices(rng, total, count).into_vec()
    }
}

/// One step of greedy cross on a matrix given by its entries: inspect the residual of the
/// skeleton `A(:,J) A(I,J)^{-1} A(I,:)` at random positions, then move along the row or the
/// column (fair coin) of the largest one to the largest residual in that slice, and append
/// the pivot. Positions in pivot rows or columns are never proposed.
pub fn update_cross(
    a: &mut dyn FnMut(usize, usize) -> Result<f64>,
    nrows: usize,
    ncols: usize,
    rows: &mut Vec<usize>,
    cols: &mut Vec<usize>,
    rng: &mut ChaCha8Rng,
) -> Result<CrossUpdate> {
    if rows.len() != cols.len() {
        return Err(Error::Shape(format!("{} pivot rows but {} pivot columns", rows.len(), cols.len())));
    }
    if rows.iter().any(|&i| i >= nrows) || cols.iter().any(|&j| j >= ncols) {
        return Err(Error::Index("pivot outside the matrix".into()));
    }
    let r = rows.len();
    if r >= nrows.min(ncols) {
        return Ok(CrossUpdate::Converged);
    }
    // Left factor A(:,J) and coefficients Z = A(I,J)^{-1} A(I,:).
    let mut cfac = RealMatrix::zeros(nrows, r);
    for (q, &j) in cols.iter().enumerate() {
        for i in 0..nrows {
            cfac[(i, q)] = a(i, j)?;
        }
    }
    let mut z = RealMatrix::zeros(r, ncols);
    if r > 0 {
        let p = RealMatrix::from_fn(r, r, |p, q| cfac[(rows[p], q)]);
        if cond2(p.clone()) > MAX_CROSS_CONDITION {
            return Ok(CrossUpdate::Singular);
        }
        let mut rhs = RealMatrix::zeros(r, ncols);
        for (p, &i) in rows.iter().enumerate() {
            for j in 0..ncols {
                rhs[(p, j)] = a(i, j)?;
            }
        }
        z = p.lu().solve(&rhs).ok_or(Error::SingularCross)?;
    }
    let mut residual = |i: usize, j: usize| -> Result<f64> {
        let approx: f64 = (0..r).map(|q| cfac[(i, q)] * z[(q, j)]).sum();
        Ok(a(i, j)? - approx)
    };
    let mut best = (0.0f64, usize::MAX, usize::MAX);
    for pos in residual_samples(nrows, ncols, rng) {
        let (i, j) = (pos % nrows, pos / nrows);
        if rows.contains(&i) || cols.contains(&j) {
            continue;
        }
        let v = residual(i, j)?.abs();
        if v > best.0 {
            best = (v, i, j);
        }
    }
    if best.0 == 0.0 {
        return Ok(CrossUpdate::Converged);
    }
    let (_, mut l, mut t) = best;
    let mut top = 0.0f64;
    if rng.gen::<bool>() {
        for j in (0..ncols).filter(|j| !cols.contains(j)) {
            let v = residual(l, j)?.abs();
            if v > top {
                top = v;
                t = j;
            }
        }
    } else {
        for i in (0..nrows).filter(|i| !rows.contains(i)) {
            let v = residual(i, t)?.abs();
            if v > top {
                top = v;
                l = i;
            }
        }
    }
    rows.push(l);
    cols.push(t);
    Ok(CrossUpdate::Added { row: l, col: t })
}

/// Skeleton approximation `A(:,J) A(I,J)^{-1} A(I,:)` of a dense matrix.
pub fn skeleton(a: &RealMatrix, rows: &[usize], cols: &[usize]) -> Result<RealMatrix> {
    let c = RealMatrix::from_fn(a.nrows(), cols.len(), |i, q| a[(i, cols[q])]);
    let r = RealMatrix::from_fn(rows.len(), a.ncols(), |p, j| a[(rows[p], j)]);
    let p = RealMatrix::from_fn(rows.len(), cols.len(), |p, q| a[(rows[p], cols[q])]);
    let z = p.lu().solve(&r).ok_or(Error::SingularCross)?;
    Ok(c * z)
}

/// Result of the initialization heuristic.
#[derive(Clone, Debug)]
pub struct InitResult {
    pub sets: NestedIndexSets,
    /// Largest 2-norm condition number over the cross matrices of the returned family.
    pub max_condition: f64,
}

fn concat(buf: &mut Vec<usize>, parts: &[&[usize]]) {
    buf.clear();
    for p in parts {
        buf.extend_from_slice(p);
    }
}

/// Cardinality-two nested index sets chosen to keep the 2x2 cross matrices well conditioned:
/// random right sets, then alternating left-to-right and right-to-left sweeps that pick, per
/// cut, the index pair minimizing the condition number. Among the families produced after each
/// half-sweep the one with the smallest worst-case condition number is returned. Each cut
/// evaluates `4 n` entries per half-sweep.
pub fn init_index_sets(oracle: &dyn EntryOracle, max_it: usize, seed: u64) -> Result<InitResult> {
    let shape = oracle.shape().to_vec();
    let n = shape.len();
    if n < 2 {
        return Err(Error::InvalidArgument("index initialization needs at least two modes".into()));
    }
    if let Some(k) = shape.iter().position(|&m| m < 2) {
        return Err(Error::InvalidArgument(format!("mode {k} has size {} < 2", shape[k])));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let q1: Vec<usize> = shape.iter().map(|&m| rng.gen_range(0..m)).collect();
    let mut q2: Vec<usize> = shape.iter().map(|&m| rng.gen_range(0..m)).collect();
    // Distinct last coordinates keep the two right tuples of every cut distinct.
    let last = shape[n - 1];
    q2[n - 1] = (q1[n - 1] + rng.gen_range(1..last)) % last;
    // left[k], right[k] for k = 0..=n; left[0] and right[n] hold the empty tuple.
    let mut left: Vec<[Vec<usize>; 2]> = vec![[vec![], vec![]]; n + 1];
    let mut right: Vec<[Vec<usize>; 2]> = vec![[vec![], vec![]]; n + 1];
    for k in 1..n {
        right[k] = [q1[k..].to_vec(), q2[k..].to_vec()];
    }
    let mut best: Option<(f64, NestedIndexSets)> = None;
    let mut buf = Vec::with_capacity(n);
    let eval = |a: &[usize], j: usize, b: &[usize], buf: &mut Vec<usize>| -> Result<f64> {
        concat(buf, &[a, &[j], b]);
        oracle.entry(buf)
    };
    let snapshot = |left: &[[Vec<usize>; 2]], right: &[[Vec<usize>; 2]]| {
        NestedIndexSets {
            left: (1..n).map(|k| left[k].to_vec()).collect(),
            right: (1..n).map(|k| right[k].to_vec()).collect(),
        }
    };
    for _ in 0..max_it.max(1) {
        // Left-to-right: choose I^{≤k} from mode k-1 given I^{≤k-1} and I^{>k}.
        let mut worst = 0.0f64;
        for k in 1..n {
            let m = shape[k - 1];
            let (l, r) = (left[k - 1].clone(), right[k].clone());
            let mut row1 = Vec::with_capacity(m);
            let mut row2 = Vec::with_capacity(m);
            for j in 0..m {
                row1.push((eval(&l[0], j, &r[0], &mut buf)?, eval(&l[0], j, &r[1], &mut buf)?));
                row2.push((eval(&l[1], j, &r[0], &mut buf)?, eval(&l[1], j, &r[1], &mut buf)?));
            }
            let mut pick = (f64::INFINITY, usize::MAX, usize::MAX);
            for (j1, a) in row1.iter().enumerate() {
                for (j2, b) in row2.iter().enumerate() {
                    if k == 1 && j1 == j2 {
                        continue;
                    }
                    let c = cond2_2x2(a.0, a.1, b.0, b.1);
                    if c < pick.0 {
                        pick = (c, j1, j2);
                    }
                }
            }
            if !pick.0.is_finite() {
                return Err(Error::InitSingular { bond: k });
            }
            let mut a = l[0].clone();
            a.push(pick.1);
            let mut b = l[1].clone();
            b.push(pick.2);
            left[k] = [a, b];
            worst = worst.max(pick.0);
        }
        if best.as_ref().map_or(true, |(c, _)| worst < *c) {
            best = Some((worst, snapshot(&left, &right)));
        }
        // Right-to-left: choose I^{>k-1} from mode k-1 given I^{≤k-1} and I^{>k}.
        let mut worst = 0.0f64;
        for k in (2..=n).rev() {
            let m = shape[k - 1];
            let (l, r) = (left[k - 1].clone(), right[k].clone());
            let mut col1 = Vec::with_capacity(m);
            let mut col2 = Vec::with_capacity(m);
            for j in 0..m {
                col1.push((eval(&l[0], j, &r[0], &mut buf)?, eval(&l[1], j, &r[0], &mut buf)?));
                col2.push((eval(&l[0], j, &r[1], &mut buf)?, eval(&l[1], j, &r[1], &mut buf)?));
            }
            let mut pick = (f64::INFINITY, usize::MAX, usize::MAX);
            for (j1, a) in col1.iter().enumerate() {
                for (j2, b) in col2.iter().enumerate() {
                    if k == n && j1 == j2 {
                        continue;
                    }
                    let c = cond2_2x2(a.0, b.0, a.1, b.1);
                    if c < pick.0 {
                        pick = (c, j1, j2);
                    }
                }
            }
            if !pick.0.is_finite() {
                return Err(Error::InitSingular { bond: k - 1 });
            }
            let mut a = vec![pick.1];
            a.extend_from_slice(&r[0]);
            let mut b = vec![pick.2];
            b.extend_from_slice(&r[1]);
            right[k - 1] = [a, b];
            worst = worst.max(pick.0);
        }
        if best.as_ref().map_or(true, |(c, _)| worst < *c) {
            best = Some((worst, snapshot(&left, &right)));
        }
    }
    let (max_condition, sets) = best.expect("at least one sweep ran");
    Ok(InitResult { sets, max_condition })
}

/// A single large-magnitude entry found by alternating fiber maximization from a random start;
/// costs `3 N n` evaluations. Used to seed rank-one index sets.
pub fn find_pivot(oracle: &dyn EntryOracle, seed: u64) -> Result<Vec<usize>> {
    let shape = oracle.shape().to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx: Vec<usize> = shape.iter().map(|&m| rng.gen_range(0..m)).collect();
    let mut best = oracle.entry(&idx)?.abs();
    for _ in 0..3 {
        for k in 0..shape.len() {
            let keep = idx[k];
            let mut arg = keep;
            for j in 0..shape[k] {
                idx[k] = j;
                let v = oracle.entry(&idx)?.abs();
                if v > best {
                    best = v;
                    arg = j;
                }
            }
            idx[k] = arg;
        }
    }
    Ok(idx)
}

/// Options of [`greedy_cross`].
#[derive(Clone, Debug)]
pub struct CrossOptions {
    pub max_sweeps: usize,
    pub seed: u64,
    /// Size of the fixed stopping-rule sample; `None` means `max(1000, 10 N n)`.
    pub pool_size: Option<usize>,
}

impl Default for CrossOptions {
    fn default() -> Self {
        Self { max_sweeps: DEFAULT_MAX_SWEEPS, seed: 0, pool_size: None }
    }
}

/// Output of [`greedy_cross`].
#[derive(Clone, Debug)]
pub struct CrossResult {
    pub tt: TtTensor,
    pub sets: NestedIndexSets,
    /// Whether the sampled relative error reached the tolerance.
    pub converged: bool,
    pub sweeps: usize,
    /// Sampled relative Chebyshev-norm error of the returned train.
    pub sample_error: f64,
}

/// `max |x - x̂| / max |x|` over the given index tuples.
pub fn sample_error(oracle: &dyn EntryOracle, tt: &TtTensor, samples: &[Vec<usize>]) -> Result<f64> {
    let mut num = 0.0f64;
    let mut den = 0.0f64;
    for s in samples {
        let x = oracle.entry(s)?;
        num = num.max((x - tt.entry(s)?).abs());
        den = den.max(x.abs());
    }
    if den == 0.0 {
        return Err(Error::ZeroNorm("all sampled entries are zero".into()));
    }
    Ok(num / den)
}

/// Uniform random index tuples.
pub fn sample_pool(shape: &[usize], count: usize, rng: &mut impl Rng) -> Vec<Vec<usize>> {
    (0..count).map(|_| shape.iter().map(|&m| rng.gen_range(0..m)).collect()).collect()
}

/// Columns of an `(n · r_left) x r_right` matrix; row index `i + n s`.
#[derive(Clone, Debug, Default)]
struct Columns {
    cols: Vec<Vec<f64>>,
}

/// Unpivoted LU factors of a cross matrix, grown one border at a time.
#[derive(Clone, Debug, Default)]
struct BorderedLu {
    /// Row `p` of the unit lower factor, below-diagonal part (length `p`).
    l: Vec<Vec<f64>>,
    /// Column `q` of the upper factor including its diagonal (length `q + 1`).
    u: Vec<Vec<f64>>,
}

impl BorderedLu {
    fn rank(&self) -> usize {
        self.u.len()
    }

    fn max_pivot(&self) -> f64 {
        self.u.iter().map(|c| c[c.len() - 1].abs()).fold(0.0, f64::max)
    }

    /// Solves `w^T P = f^T`.
    fn solve_left(&self, f: &[f64]) -> Vec<f64> {
        let r = self.rank();
        let mut y = vec![0.0; r];
        for q in 0..r {
            let col = &self.u[q];
            y[q] = (f[q] - dot(&y[..q], col)) / col[q];
        }
        for q in (1..r).rev() {
            let (head, tail) = y.split_at_mut(q);
            axpy(-tail[0], &self.l[q], head);
        }
        y
    }

    /// Border factors for appending row `v`, column `u` and corner `alpha` (nothing is stored).
    fn bordered(&self, v: &[f64], u: &[f64], alpha: f64) -> (Vec<f64>, Vec<f64>) {
        let r = self.rank();
        // l^T U = v^T
        let mut lrow = vec![0.0; r];
        for q in 0..r {
            let col = &self.u[q];
            lrow[q] = (v[q] - dot(&lrow[..q], col)) / col[q];
        }
        // L z = u
        let mut z = vec![0.0; r + 1];
        for p in 0..r {
            z[p] = u[p] - dot(&self.l[p], &z[..p]);
        }
        z[r] = alpha - dot(&lrow, &z);
        (lrow, z)
    }

    fn push(&mut self, (lrow, z): (Vec<f64>, Vec<f64>)) {
        self.l.push(lrow);
        self.u.push(z);
    }
}

struct CrossState<'o> {
    oracle: &'o dyn EntryOracle,
    shape: Vec<usize>,
    /// `left[k] = I^{≤k}`, `right[k] = I^{>k}` for `k = 0..=N`, with empty tuples at the ends.
    left: Vec<Vec<Vec<usize>>>,
    right: Vec<Vec<Vec<usize>>>,
    /// `fibers[m] = X(I^{≤m}, :, I^{>m+1})`.
    fibers: Vec<Columns>,
    /// Rows of `interp[m] = fibers[m] P_{m+1}^{-1}` for `m < N-1`.
    interp: Vec<Vec<Vec<f64>>>,
    /// `fib_t[k][j + n_k t]` is the vector `fibers[k](j + n_k p, t)` over `p` (index 0 unused).
    fib_t: Vec<Vec<Vec<f64>>>,
    /// Factorization of `P_k` and pivot positions for cut `k` (index 0 unused).
    lu: Vec<BorderedLu>,
    piv_rows: Vec<Vec<usize>>,
    piv_cols: Vec<Vec<usize>>,
    buf: Vec<usize>,
    /// Residuals at or below this magnitude are treated as round-off.
    noise: f64,
}

impl<'o> CrossState<'o> {
    fn rank(&self, k: usize) -> usize {
        self.left[k].len()
    }

    fn eval_fiber(&mut self, m: usize, s: usize, i: usize, t: usize) -> Result<f64> {
        let mut buf = std::mem::take(&mut self.buf);
        concat(&mut buf, &[&self.left[m][s], &[i], &self.right[m + 1][t]]);
        let v = self.oracle.entry(&buf);
        self.buf = buf;
        v
    }

    fn eval_super(&mut self, k: usize, s: usize, i: usize, j: usize, t: usize) -> Result<f64> {
        let mut buf = std::mem::take(&mut self.buf);
        concat(&mut buf, &[&self.left[k - 1][s], &[i, j], &self.right[k + 1][t]]);
        let v = self.oracle.entry(&buf);
        self.buf = buf;
        v
    }

    fn new(oracle: &'o dyn EntryOracle, init: &NestedIndexSets) -> Result<Self> {
        let shape = oracle.shape().to_vec();
        let n = shape.len();
        init.check_shape(&shape)?;
        let mut left = vec![vec![vec![]]; n + 1];
        let mut right = vec![vec![vec![]]; n + 1];
        for k in 1..n {
            left[k] = init.left(k).to_vec();
            right[k] = init.right(k).to_vec();
        }
        let mut st = Self {
            oracle,
            shape,
            left,
            right,
            fibers: vec![Columns::default(); n],
            interp: vec![vec![]; n.saturating_sub(1)],
            fib_t: vec![vec![]; n],
            lu: vec![BorderedLu::default(); n],
            piv_rows: vec![vec![]; n],
            piv_cols: vec![vec![]; n],
            buf: Vec::with_capacity(n),
            noise: 0.0,
        };
        // Reorder each cut's pairs by complete pivoting so the unpivoted LU is stable.
        for k in 1..n {
            let r = st.rank(k);
            let mut p = RealMatrix::zeros(r, r);
            for a in 0..r {
                for b in 0..r {
                    let mut buf = std::mem::take(&mut st.buf);
                    concat(&mut buf, &[&st.left[k][a], &st.right[k][b]]);
                    p[(a, b)] = oracle.entry(&buf)?;
                    st.buf = buf;
                }
            }
            let (ro, co) = complete_pivot_order(p).ok_or(Error::InitSingular { bond: k })?;
            st.left[k] = ro.iter().map(|&a| st.left[k][a].clone()).collect();
            st.right[k] = co.iter().map(|&b| st.right[k][b].clone()).collect();
        }
        for m in 0..n {
            let (rl, rr, nm) = (st.rank(m), st.rank(m + 1), st.shape[m]);
            let mut cols = Vec::with_capacity(rr);
            for t in 0..rr {
                let mut c = Vec::with_capacity(nm * rl);
                for s in 0..rl {
                    for i in 0..nm {
                        c.push(st.eval_fiber(m, s, i, t)?);
                    }
                }
                cols.push(c);
            }
            if m > 0 {
                st.fib_t[m] = (0..nm * rr).map(|g| (0..rl).map(|p| cols[g / nm][g % nm + nm * p]).collect()).collect();
            }
            st.fibers[m] = Columns { cols };
        }
        for k in 1..n {
            let pos_l = positions(&st.left[k - 1]);
            let pos_r = positions(&st.right[k + 1]);
            let (na, nb) = (st.shape[k - 1], st.shape[k]);
            st.piv_rows[k] = st.left[k].iter().map(|t| t[k - 1] + na * pos_l[&t[..k - 1]]).collect();
            st.piv_cols[k] = st.right[k].iter().map(|t| t[0] + nb * pos_r[&t[1..]]).collect();
            let f = &st.fibers[k - 1].cols;
            let rows = &st.piv_rows[k];
            let mut lu = BorderedLu::default();
            for q in 0..rows.len() {
                let v: Vec<f64> = (0..q).map(|b| f[b][rows[q]]).collect();
                let u: Vec<f64> = (0..q).map(|a| f[q][rows[a]]).collect();
                let border = lu.bordered(&v, &u, f[q][rows[q]]);
                let sigma = border.1[q];
                if sigma == 0.0 || !sigma.is_finite() {
                    return Err(Error::InitSingular { bond: k });
                }
                lu.push(border);
            }
            st.lu[k] = lu;
        }
        for m in 0..n.saturating_sub(1) {
            st.refresh_interp(m);
        }
        Ok(st)
    }

    /// Recomputes `interp[m]` from the fibers and the factorization of `P_{m+1}`.
    fn refresh_interp(&mut self, m: usize) {
        let f = &self.fibers[m].cols;
        let lu = &self.lu[m + 1];
        let rows = f.first().map_or(0, Vec::len);
        let mut row = vec![0.0; lu.rank()];
        self.interp[m] = (0..rows)
            .map(|rho| {
                for (q, c) in f.iter().enumerate() {
                    row[q] = c[rho];
                }
                lu.solve_left(&row)
            })
            .collect();
    }

    /// Interpolant at supercore position `(rho, gamma)` of cut `k`.
    fn approx(&self, k: usize, rho: usize, gamma: usize) -> f64 {
        dot(&self.interp[k - 1][rho], &self.fib_t[k][gamma])
    }

    fn exact(&mut self, k: usize, rho: usize, gamma: usize) -> Result<f64> {
        let (na, nb) = (self.shape[k - 1], self.shape[k]);
        self.eval_super(k, rho / na, rho % na, gamma % nb, gamma / nb)
    }

    /// One greedy update at cut `k`; returns the outcome and the magnitude of the new pivot.
    fn update(&mut self, k: usize, rng: &mut ChaCha8Rng) -> Result<(CrossUpdate, f64)> {
        let (na, nb) = (self.shape[k - 1], self.shape[k]);
        let nrows = na * self.rank(k - 1);
        let ncols = nb * self.rank(k + 1);
        if self.rank(k) >= nrows.min(ncols) {
            return Ok((CrossUpdate::Converged, 0.0));
        }
        let mut row_used = vec![false; nrows];
        let mut col_used = vec![false; ncols];
        for &p in &self.piv_rows[k] {
            row_used[p] = true;
        }
        for &q in &self.piv_cols[k] {
            col_used[q] = true;
        }
        let mut best = (0.0f64, 0usize, 0usize);
        for pos in residual_samples(nrows, ncols, rng) {
            let (rho, gamma) = (pos % nrows, pos / nrows);
            if row_used[rho] || col_used[gamma] {
                continue;
            }
            let v = (self.exact(k, rho, gamma)? - self.approx(k, rho, gamma)).abs();
            if v > best.0 {
                best = (v, rho, gamma);
            }
        }
        if best.0 <= self.noise {
            return Ok((CrossUpdate::Converged, 0.0));
        }
        let along_row = rng.gen::<bool>();
        self.expand(k, best.1, best.2, along_row, &row_used, &col_used)
    }

    /// Moves from `(l, t)` along its row or column to the largest residual there, and adds
    /// the resulting pivot.
    fn expand(&mut self, k: usize, mut l: usize, mut t: usize, along_row: bool, row_used: &[bool], col_used: &[bool]) -> Result<(CrossUpdate, f64)> {
        let (na, nb) = (self.shape[k - 1], self.shape[k]);
        let nrows = na * self.rank(k - 1);
        let ncols = nb * self.rank(k + 1);
        let mut row_vals = vec![0.0; ncols];
        let mut col_vals = vec![0.0; nrows];
        let mut top = -1.0;
        if along_row {
            for g in 0..ncols {
                row_vals[g] = self.exact(k, l, g)?;
                let v = (row_vals[g] - self.approx(k, l, g)).abs();
                if !col_used[g] && v > top {
                    top = v;
                    t = g;
                }
            }
            for rho in 0..nrows {
                col_vals[rho] = self.exact(k, rho, t)?;
            }
        } else {
            for rho in 0..nrows {
                col_vals[rho] = self.exact(k, rho, t)?;
                let v = (col_vals[rho] - self.approx(k, rho, t)).abs();
                if !row_used[rho] && v > top {
                    top = v;
                    l = rho;
                }
            }
            for g in 0..ncols {
                row_vals[g] = self.exact(k, l, g)?;
            }
        }
        if top <= self.noise {
            return Ok((CrossUpdate::Converged, 0.0));
        }
        // Residual column e = A(:,t) - interp · A(I,t) and the new pivot.
        let r = self.rank(k);
        let u: Vec<f64> = self.piv_rows[k].iter().map(|&p| col_vals[p]).collect();
        let v: Vec<f64> = self.fibers[k - 1].cols.iter().map(|c| c[l]).collect();
        let border = self.lu[k].bordered(&v, &u, col_vals[l]);
        let pivot = border.1[r];
        let mut e = self.column_residual(k, &col_vals, &u);
        if (e[l] - pivot).abs() > DRIFT_TOLERANCE * pivot.abs() + self.noise {
            // The updated interpolation matrix has drifted from the factorization.
            self.refresh_interp(k - 1);
            e = self.column_residual(k, &col_vals, &u);
        }
        let sigma = e[l];
        let floor = self.lu[k].max_pivot() / MAX_CROSS_CONDITION;
        if !(sigma.abs() > floor && pivot.abs() > floor) {
            return Ok((CrossUpdate::Singular, 0.0));
        }
        for &p in &self.piv_rows[k] {
            e[p] = 0.0;
        }
        self.lu[k].push(border);
        let w = self.interp[k - 1][l].clone();
        for (row, &ei) in self.interp[k - 1].iter_mut().zip(&e) {
            if ei != 0.0 {
                axpy(-ei / sigma, &w, row);
            }
            row.push(ei / sigma);
        }
        let row = &mut self.interp[k - 1][l];
        row.iter_mut().for_each(|x| *x = 0.0);
        row[r] = 1.0;
        // Index sets grow by the pivot's row and column tuples.
        let (s, i) = (l / na, l % na);
        let (j, tt) = (t % nb, t / nb);
        let mut lt = self.left[k - 1][s].clone();
        lt.push(i);
        let mut rt = vec![j];
        rt.extend_from_slice(&self.right[k + 1][tt]);
        self.left[k].push(lt);
        self.right[k].push(rt);
        self.piv_rows[k].push(l);
        self.piv_cols[k].push(t);
        debug_assert_eq!(self.rank(k), r + 1);
        // F_{k-1} gains a column, F_k gains a row block.
        if k > 1 {
            let rp = self.rank(k - 1);
            self.fib_t[k - 1].extend((0..na).map(|i| (0..rp).map(|p| col_vals[i + na * p]).collect::<Vec<_>>()));
        }
        for (g, &x) in self.fib_t[k].iter_mut().zip(&row_vals) {
            g.push(x);
        }
        self.fibers[k - 1].cols.push(col_vals);
        for (tq, c) in self.fibers[k].cols.iter_mut().enumerate() {
            c.extend_from_slice(&row_vals[nb * tq..nb * (tq + 1)]);
        }
        if k + 1 < self.shape.len() {
            let lu = &self.lu[k + 1];
            let f = &self.fibers[k].cols;
            let base = nb * r;
            let mut rowbuf = vec![0.0; f.len()];
            for jj in 0..nb {
                for (q, c) in f.iter().enumerate() {
                    rowbuf[q] = c[base + jj];
                }
                self.interp[k].push(lu.solve_left(&rowbuf));
            }
        }
        Ok((CrossUpdate::Added { row: l, col: t }, sigma.abs()))
    }

    /// `A(:,t) - interp · A(I,t)` at cut `k`.
    fn column_residual(&self, k: usize, col_vals: &[f64], u: &[f64]) -> Vec<f64> {
        col_vals.iter().zip(&self.interp[k - 1]).map(|(x, row)| x - dot(row, u)).collect()
    }

    /// Interpolant at a full multi-index.
    fn entry(&self, idx: &[usize]) -> f64 {
        let n = self.shape.len();
        let mut v = vec![1.0];
        for m in 0..n - 1 {
            let nm = self.shape[m];
            let mut next = vec![0.0; self.rank(m + 1)];
            for (s, &vs) in v.iter().enumerate() {
                axpy(vs, &self.interp[m][idx[m] + nm * s], &mut next);
            }
            v = next;
        }
        let nm = self.shape[n - 1];
        v.iter().enumerate().map(|(s, vs)| vs * self.fibers[n - 1].cols[0][idx[n - 1] + nm * s]).sum()
    }

    fn cores(&self) -> Result<TtTensor> {
        let n = self.shape.len();
        let mut cores = Vec::with_capacity(n);
        for m in 0..n {
            let (rl, rr, nm) = (self.rank(m), self.rank(m + 1), self.shape[m]);
            let mut data = vec![0.0; rl * nm * rr];
            for s in 0..rl {
                for i in 0..nm {
                    for p in 0..rr {
                        data[s + rl * (i + nm * p)] = if m + 1 < n { self.interp[m][i + nm * s][p] } else { self.fibers[m].cols[p][i + nm * s] };
                    }
                }
            }
            cores.push(DenseTensor::new(vec![rl, nm, rr], data)?);
        }
        TtTensor::new(cores)
    }

    /// Index sets extended by the first candidate tuple whose Schur complement is above the
    /// noise level at every cut, so that all enlarged cross matrices stay nonsingular.
    fn augmented(&mut self, candidates: &[&[usize]]) -> Result<Option<NestedIndexSets>> {
        let n = self.shape.len();
        'next: for x in candidates {
            for k in 1..n {
                let r = self.rank(k);
                let mut v = vec![0.0; r];
                let mut u = vec![0.0; r];
                let mut buf = std::mem::take(&mut self.buf);
                for q in 0..r {
                    concat(&mut buf, &[&x[..k], &self.right[k][q]]);
                    v[q] = self.oracle.entry(&buf)?;
                    concat(&mut buf, &[&self.left[k][q], &x[k..]]);
                    u[q] = self.oracle.entry(&buf)?;
                }
                self.buf = buf;
                let alpha = self.oracle.entry(x)?;
                let (_, z) = self.lu[k].bordered(&v, &u, alpha);
                let floor = self.noise.max(self.lu[k].max_pivot() / MAX_CROSS_CONDITION);
                if !(z[r].abs() > floor) {
                    continue 'next;
                }
            }
            let mut sets = self.sets();
            for k in 1..n {
                sets.left[k - 1].push(x[..k].to_vec());
                sets.right[k - 1].push(x[k..].to_vec());
            }
            return Ok(Some(sets));
        }
        Ok(None)
    }

    fn sets(&self) -> NestedIndexSets {
        let n = self.shape.len();
        NestedIndexSets { left: self.left[1..n].to_vec(), right: self.right[1..n].to_vec() }
    }
}

fn positions(set: &[Vec<usize>]) -> HashMap<&[usize], usize> {
    set.iter().enumerate().map(|(p, t)| (t.as_slice(), p)).collect()
}

/// Row and column orders of Gaussian elimination with complete pivoting; `None` if singular.
fn complete_pivot_order(mut a: RealMatrix) -> Option<(Vec<usize>, Vec<usize>)> {
    let r = a.nrows();
    let mut rows: Vec<usize> = (0..r).collect();
    let mut cols: Vec<usize> = (0..r).collect();
    for step in 0..r {
        let mut best = (0.0f64, step, step);
        for p in step..r {
            for q in step..r {
                let v = a[(p, q)].abs();
                if v > best.0 {
                    best = (v, p, q);
                }
            }
        }
        if best.0 == 0.0 {
            return None;
        }
        a.swap_rows(step, best.1);
        a.swap_columns(step, best.2);
        rows.swap(step, best.1);
        cols.swap(step, best.2);
        let piv = a[(step, step)];
        for p in step + 1..r {
            let f = a[(p, step)] / piv;
            for q in step..r {
                let x = a[(step, q)];
                a[(p, q)] -= f * x;
            }
        }
    }
    Some((rows, cols))
}

/// TT greedy cross: sweeps cuts `1..N-1` left to right, adding one pivot per cut, until the
/// relative Chebyshev-norm error on a fixed random sample falls to `eps` or `max_sweeps` is
/// reached. The sample is re-checked only when the largest pivot of a sweep is already below
/// `eps` relative to the sample maximum (or nothing was added), since that pivot is a lower
/// bound for the error. An unconverged run returns the last train with `converged = false`.
pub fn greedy_cross(oracle: &dyn EntryOracle, eps: f64, init: &NestedIndexSets, opts: &CrossOptions) -> Result<CrossResult> {
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance {eps} must be positive")));
    }
    let shape = oracle.shape().to_vec();
    let n = shape.len();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let pool_size = opts.pool_size.unwrap_or_else(|| 1000.max(10 * n * shape.iter().copied().max().unwrap_or(1)));
    let pool = sample_pool(&shape, pool_size, &mut rng);
    let pool_vals: Vec<f64> = pool.iter().map(|p| oracle.entry(p)).collect::<Result<_>>()?;
    let scale = pool_vals.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if n == 1 {
        let data = (0..shape[0]).map(|i| oracle.entry(&[i])).collect::<Result<Vec<_>>>()?;
        let tt = TtTensor::new(vec![DenseTensor::new(vec![1, shape[0], 1], data)?])?;
        return Ok(CrossResult { tt, sets: NestedIndexSets { left: vec![], right: vec![] }, converged: true, sweeps: 0, sample_error: 0.0 });
    }
    let mut st = CrossState::new(oracle, init)?;
    st.noise = NOISE_LEVEL * scale;
    // Relative error at every pool tuple (NaN counts as infinite).
    let pool_errors = |st: &CrossState| -> Vec<f64> {
        if scale == 0.0 {
            return vec![0.0; pool.len()];
        }
        let rel = |p: &Vec<usize>, x: f64| (x - st.entry(p)).abs() / scale;
        pool.iter().zip(&pool_vals).map(|(p, &x)| rel(p, x)).map(|e| if e.is_nan() { f64::INFINITY } else { e }).collect()
    };
    let max_of = |errs: &[f64]| errs.iter().fold(0.0f64, |a, &b| a.max(b));
    let mut sweeps = 0;
    let mut idle = 0;
    let mut next_check = 0;
    let mut backoff = 1;
    while sweeps < opts.max_sweeps {
        sweeps += 1;
        let mut top = 0.0f64;
        let mut added = false;
        for k in 1..n {
            let (outcome, piv) = st.update(k, &mut rng)?;
            if matches!(outcome, CrossUpdate::Added { .. }) {
                added = true;
                top = top.max(piv);
            }
        }
        idle = if added { 0 } else { idle + 1 };
        let indicator = if scale > 0.0 { top / scale } else { 0.0 };
        let check = (indicator <= eps || !added) && sweeps >= next_check;
        if check {
            for m in 0..n - 1 {
                st.refresh_interp(m);
            }
        }
        if check {
            let errs = pool_errors(&st);
            if max_of(&errs) <= eps {
                break;
            }
            next_check = sweeps + backoff;
            backoff *= 2;
            // The sampled supercores can be reproduced while the train is not; add a badly
            // approximated pool tuple to every cut at once, which keeps the sets nested.
            let mut order: Vec<usize> = (0..pool.len()).filter(|&i| errs[i] > eps).collect();
            order.sort_by(|&a, &b| errs[b].total_cmp(&errs[a]));
            let candidates: Vec<&[usize]> = order.iter().take(AUGMENT_CANDIDATES).map(|&i| pool[i].as_slice()).collect();
            if let Some(sets) = st.augmented(&candidates)? {
                st = CrossState::new(oracle, &sets)?;
                st.noise = NOISE_LEVEL * scale;
                idle = 0;
            }
        }
        if idle >= IDLE_LIMIT {
            break;
        }
    }
    for m in 0..n - 1 {
        st.refresh_interp(m);
    }
    let tt = st.cores()?;
    let err = max_of(&pool_errors(&st));
    Ok(CrossResult { tt, sets: st.sets(), converged: err <= eps, sweeps, sample_error: err })
}

/// Index initialization followed by greedy cross; falls back to rank-one sets seeded by
/// [`find_pivot`] when every 2x2 cross matrix is singular at some cut (exactly rank-one
/// tensors) or the best family is numerically singular.
pub fn cross_approximate(oracle: &dyn EntryOracle, eps: f64, opts: &CrossOptions) -> Result<CrossResult> {
    if oracle.shape().len() < 2 {
        return greedy_cross(oracle, eps, &NestedIndexSets { left: vec![], right: vec![] }, opts);
    }
    let init = match init_index_sets(oracle, DEFAULT_INIT_ITERATIONS, opts.seed) {
        Ok(r) if r.max_condition <= MAX_CROSS_CONDITION => Some(r.sets),
        Ok(_) | Err(Error::InitSingular { .. }) => None,
        Err(e) => return Err(e),
    };
    if let Some(sets) = init {
        match greedy_cross(oracle, eps, &sets, opts) {
            Err(Error::InitSingular { .. }) => {}
            other => return other,
        }
    }
    let pivot = find_pivot(oracle, opts.seed)?;
    greedy_cross(oracle, eps, &NestedIndexSets::from_pivot(&pivot), opts)
}
