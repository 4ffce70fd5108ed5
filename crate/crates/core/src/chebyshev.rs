//! Chebyshev nodes of the first kind, the interval map, and the Lagrange-type basis built
//! from the discrete orthogonality of `T_k` on those nodes.
//!
//! Node order is `ζ_k = cos((2k-1)π/(2n))` for `k = 1..n` (decreasing on `[-1, 1]`). The map
//! from `[-1, 1]` onto `[lo, hi]` sends `+1` to `lo` and `-1` to `hi`, so mapped nodes
//! increase along the interval. `T_k` is always evaluated with the three-term recurrence;
//! each step adds at most a couple of ulps of rounding error.

use crate::error::{Error, Result};
use crate::tensor::RealMatrix;

/// Relative slack, in units of the interval width, for points on or just past a boundary.
pub const BOX_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidArgument(format!("interval [{lo}, {hi}] must have lo < hi")));
        }
        Ok(Self { lo, hi })
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    /// Containment up to [`BOX_TOLERANCE`] times the width.
    pub fn contains(&self, x: f64) -> bool {
        let slack = BOX_TOLERANCE * self.width();
        x >= self.lo - slack && x <= self.hi + slack
    }

    /// Gap between two intervals, zero when they intersect.
    pub fn gap(&self, other: &Interval) -> f64 {
        (other.lo - self.hi).max(self.lo - other.hi).max(0.0)
    }
}

/// The `n` roots of `T_n` in decreasing order.
pub fn cheb_nodes(n: usize) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::InvalidArgument("node count must be positive".into()));
    }
    Ok((1..=n)
        .map(|k| (((2 * k - 1) as f64) * std::f64::consts::PI / (2 * n) as f64).cos())
        .collect())
}

/// `((lo - hi)/2) x + (lo + hi)/2`.
pub fn affine_map(iv: &Interval, x: f64) -> f64 {
    0.5 * (iv.lo - iv.hi) * x + 0.5 * (iv.lo + iv.hi)
}

pub fn affine_map_inv(iv: &Interval, y: f64) -> f64 {
    (y - 0.5 * (iv.lo + iv.hi)) / (0.5 * (iv.lo - iv.hi))
}

/// `T_0(x) .. T_{m-1}(x)` by the three-term recurrence, written into `out`.
pub fn chebyshev_t_all(x: f64, out: &mut [f64]) {
    let m = out.len();
    if m == 0 {
        return;
    }
    out[0] = 1.0;
    if m > 1 {
        out[1] = x;
    }
    for k in 2..m {
        out[k] = 2.0 * x * out[k - 1] - out[k - 2];
    }
}

pub fn chebyshev_t(k: usize, x: f64) -> f64 {
    let mut buf = vec![0.0; k + 1];
    chebyshev_t_all(x, &mut buf);
    buf[k]
}

/// Basis polynomial attached to mapped node `nodes[i]` (0-based `i`) on `iv`:
/// `1/n + (2/n) Σ_{k=1}^{n-1} T_k(φ⁻¹(η_i)) T_k(φ⁻¹(x))`. Values of `x` outside the
/// interval extrapolate; use [`Interval::contains`] to flag them.
pub fn basis_eval(iv: &Interval, nodes: &[f64], i: usize, x: f64) -> f64 {
    let n = nodes.len();
    let mut ti = vec![0.0; n];
    let mut tx = vec![0.0; n];
    chebyshev_t_all(affine_map_inv(iv, nodes[i]), &mut ti);
    chebyshev_t_all(affine_map_inv(iv, x), &mut tx);
    let s: f64 = (1..n).map(|k| ti[k] * tx[k]).sum();
    1.0 / n as f64 + 2.0 / n as f64 * s
}

/// Per-dimension intervals with one shared node count. Intervals are ordered source
/// dimensions, then parameter dimensions, then target dimensions.
#[derive(Clone, Debug, PartialEq)]
pub struct ChebyshevGrid {
    n: usize,
    intervals: Vec<Interval>,
    nodes: Vec<Vec<f64>>,
    /// `T_k(ζ_i)` for `k < n`, stored as `tz[i * n + k]`.
    tz: Vec<f64>,
}

impl ChebyshevGrid {
    pub fn new(n: usize, intervals: Vec<Interval>) -> Result<Self> {
        let zeta = cheb_nodes(n)?;
        let nodes = intervals
            .iter()
            .map(|iv| zeta.iter().map(|&z| affine_map(iv, z)).collect())
            .collect();
        let mut tz = vec![0.0; n * n];
        for (i, &z) in zeta.iter().enumerate() {
            chebyshev_t_all(z, &mut tz[i * n..(i + 1) * n]);
        }
        Ok(Self { n, intervals, nodes, tz })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dims(&self) -> usize {
        self.intervals.len()
    }

    pub fn intervals(&self) -> &[Interval] {
        &self.intervals
    }

    pub fn interval(&self, dim: usize) -> &Interval {
        &self.intervals[dim]
    }

    /// Mapped nodes of dimension `dim`.
    pub fn nodes(&self, dim: usize) -> &[f64] {
        &self.nodes[dim]
    }

    pub fn node(&self, dim: usize, i: usize) -> f64 {
        self.nodes[dim][i]
    }

    /// Writes the row `(φ(η_1, x), .., φ(η_n, x))` for dimension `dim` into `out`.
    pub fn q_row_into(&self, dim: usize, x: f64, out: &mut [f64]) {
        let n = self.n;
        let mut tx = vec![0.0; n];
        chebyshev_t_all(affine_map_inv(&self.intervals[dim], x), &mut tx);
        let (a, b) = (1.0 / n as f64, 2.0 / n as f64);
        for (i, o) in out.iter_mut().enumerate().take(n) {
            let ti = &self.tz[i * n..(i + 1) * n];
            let s: f64 = (1..n).map(|k| ti[k] * tx[k]).sum();
            *o = a + b * s;
        }
    }

    pub fn q_row(&self, dim: usize, x: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        self.q_row_into(dim, x, &mut out);
        out
    }

    /// Matrix whose row `p` is the q-row of `coords[p]` in dimension `dim`. Rejects coordinates
    /// outside the interval beyond the tolerance, naming the offending row.
    pub fn factor_matrix(&self, dim: usize, coords: impl Iterator<Item = f64>, role: &'static str, coord: usize) -> Result<RealMatrix> {
        let coords: Vec<f64> = coords.collect();
        let iv = self.intervals[dim];
        let mut m = RealMatrix::zeros(coords.len(), self.n);
        let mut row = vec![0.0; self.n];
        for (p, &x) in coords.iter().enumerate() {
            if !iv.contains(x) {
                return Err(Error::OutsideBox { role, index: p, coord, value: x });
            }
            self.q_row_into(dim, x, &mut row);
            for (i, &v) in row.iter().enumerate() {
                m[(p, i)] = v;
            }
        }
        Ok(m)
    }
}

/// Source factors `U_1..U_d` and target factors `V_1..V_d`.
#[derive(Clone, Debug)]
pub struct FactorMatrices {
    pub u: Vec<RealMatrix>,
    pub v: Vec<RealMatrix>,
}

/// Builds `U_k` from the source dimensions (grid dims `0..d`) and `V_k` from the target
/// dimensions (the last `d` grid dims). Points are rows of `sources` / `targets`.
pub fn factor_matrices(grid: &ChebyshevGrid, sources: &RealMatrix, targets: &RealMatrix) -> Result<FactorMatrices> {
    let d = sources.ncols();
    if targets.ncols() != d || grid.dims() < 2 * d {
        return Err(Error::Shape(format!(
            "points of dimension {d} and {} do not fit a grid of {} dimensions",
            targets.ncols(),
            grid.dims()
        )));
    }
    let offset = grid.dims() - d;
    let u = (0..d)
        .map(|k| grid.factor_matrix(k, sources.column(k).iter().copied(), "source", k))
        .collect::<Result<Vec<_>>>()?;
    let v = (0..d)
        .map(|k| grid.factor_matrix(offset + k, targets.column(k).iter().copied(), "target", k))
        .collect::<Result<Vec<_>>>()?;
    Ok(FactorMatrices { u, v })
}

/// Lebesgue-constant bound `(2/π) log n + 1` for interpolation on `n` first-kind nodes.
pub fn lebesgue_bound(n: usize) -> f64 {
    2.0 / std::f64::consts::PI * (n as f64).ln() + 1.0
}
