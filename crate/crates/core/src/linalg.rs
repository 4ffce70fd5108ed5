//! Thin wrappers over the dense factorizations the algorithms rely on: thin QR, thin SVD
//! with descending singular values, and symmetric eigendecomposition. Backed by nalgebra's
//! Householder QR, Golub-Kahan SVD and symmetric QR iteration, all backward stable.

use nalgebra::{SymmetricEigen, SVD};

use crate::tensor::RealMatrix;

/// Dot product with independent partial sums, so the loop vectorizes.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0; 8];
    let (ca, cb) = (a.chunks_exact(8), b.chunks_exact(8));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for l in 0..8 {
            acc[l] += x[l] * y[l];
        }
    }
    acc.iter().sum::<f64>() + tail
}

/// `y += alpha x`.
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Thin QR: `a = q r` with `q` of shape `m x k`, `r` of shape `k x n`, `k = min(m, n)`.
pub fn thin_qr(a: RealMatrix) -> (RealMatrix, RealMatrix) {
    let qr = a.qr();
    (qr.q(), qr.r())
}

/// Thin SVD `a = u diag(s) vt` with `s` descending.
pub struct Svd {
    pub u: RealMatrix,
    pub s: Vec<f64>,
    pub vt: RealMatrix,
}

pub fn svd(a: RealMatrix) -> Svd {
    let (m, n) = a.shape();
    if m >= 2 * n && n > 0 {
        // Tall input: factor the small triangular part only.
        let (q, r) = thin_qr(a);
        let inner = svd(r);
        return Svd { u: q * inner.u, s: inner.s, vt: inner.vt };
    }
    let f = SVD::new(a, true, true);
    Svd {
        u: f.u.expect("left singular vectors requested"),
        s: f.singular_values.iter().copied().collect(),
        vt: f.v_t.expect("right singular vectors requested"),
    }
}

pub fn singular_values(a: RealMatrix) -> Vec<f64> {
    SVD::new(a, false, false).singular_values.iter().copied().collect()
}

/// Smallest rank `k >= 1` whose discarded tail `sqrt(sum_{i>=k} s_i^2)` is at most `delta`.
pub fn truncation_rank(s: &[f64], delta: f64) -> usize {
    let mut tail = 0.0;
    let mut k = s.len();
    while k > 1 {
        let next = tail + s[k - 1] * s[k - 1];
        if next.sqrt() > delta {
            break;
        }
        tail = next;
        k -= 1;
    }
    k
}

/// 2-norm condition number (infinite for rank-deficient input).
pub fn cond2(a: RealMatrix) -> f64 {
    let s = singular_values(a);
    match (s.first(), s.last()) {
        (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
        _ => f64::INFINITY,
    }
}

/// Exact 2-norm condition number of `[[a, b], [c, d]]`.
pub fn cond2_2x2(a: f64, b: f64, c: f64, d: f64) -> f64 {
    let det = (a * d - b * c).abs();
    if det == 0.0 || !det.is_finite() {
        return f64::INFINITY;
    }
    let f2 = a * a + b * b + c * c + d * d;
    let disc = ((f2 - 2.0 * det) * (f2 + 2.0 * det)).max(0.0).sqrt();
    (f2 + disc) / (2.0 * det)
}

pub fn spectral_norm(a: &RealMatrix) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    singular_values(a.clone()).first().copied().unwrap_or(0.0)
}

/// Sweeps of the Jacobi refinement before giving up on further improvement.
const JACOBI_SWEEPS: usize = 30;

/// Symmetric eigendecomposition `A = V diag(λ) Vᵀ`, unsorted.
///
/// The QR-iteration result is polished by threshold Jacobi rotations on `VᵀAV`: the solver
/// occasionally leaves off-diagonal mass far above roundoff, and Jacobi on a nearly diagonal
/// matrix converges in a sweep or two.
pub fn sym_eig(a: RealMatrix) -> (Vec<f64>, RealMatrix) {
    let n = a.nrows();
    let scale = a.norm();
    let e = SymmetricEigen::new(a.clone());
    let mut v = e.eigenvectors;
    if n < 2 || scale == 0.0 {
        return (e.eigenvalues.iter().copied().collect(), v);
    }
    let mut b = v.transpose() * &a * &v;
    b = (&b + b.transpose()) * 0.5;
    let tau = f64::EPSILON * scale / n as f64;
    for _ in 0..JACOBI_SWEEPS {
        let mut rotated = false;
        for q in 1..n {
            for p in 0..q {
                let bpq = b[(p, q)];
                if bpq.abs() <= tau {
                    continue;
                }
                rotated = true;
                let theta = (b[(q, q)] - b[(p, p)]) / (2.0 * bpq);
                let t = theta.signum() / (theta.abs() + theta.hypot(1.0));
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / t.hypot(1.0);
                let s = t * c;
                for k in 0..n {
                    let (bkp, bkq) = (b[(k, p)], b[(k, q)]);
                    b[(k, p)] = c * bkp - s * bkq;
                    b[(k, q)] = s * bkp + c * bkq;
                }
                for k in 0..n {
                    let (bpk, bqk) = (b[(p, k)], b[(q, k)]);
                    b[(p, k)] = c * bpk - s * bqk;
                    b[(q, k)] = s * bpk + c * bqk;
                }
                b[(p, q)] = 0.0;
                b[(q, p)] = 0.0;
                for k in 0..n {
                    let (vkp, vkq) = (v[(k, p)], v[(k, q)]);
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    ((0..n).map(|i| b[(i, i)]).collect(), v)
}

/// Symmetric eigendecomposition with eigenpairs sorted by decreasing `|λ|`; equal magnitudes
/// keep the solver's order.
pub fn sym_eig_by_magnitude(a: RealMatrix) -> (Vec<f64>, RealMatrix) {
    let (vals, vecs) = sym_eig(a);
    let mut order: Vec<usize> = (0..vals.len()).collect();
    order.sort_by(|&i, &j| vals[j].abs().total_cmp(&vals[i].abs()));
    let sorted = order.iter().map(|&i| vals[i]).collect();
    let vecs = RealMatrix::from_fn(vecs.nrows(), order.len(), |r, c| vecs[(r, order[c])]);
    (sorted, vecs)
}

/// Eigenvalues of a symmetric matrix, ascending.
pub fn sym_eigenvalues(a: RealMatrix) -> Vec<f64> {
    let mut v = sym_eig(a).0;
    v.sort_by(f64::total_cmp);
    v
}
