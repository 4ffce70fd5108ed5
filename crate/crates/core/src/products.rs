//! Kronecker, Khatri-Rao (columnwise Kronecker) and face-splitting (rowwise Kronecker)
//! products. All results are materialized, so these are meant for small operands.

use crate::error::{Error, Result};
use crate::tensor::RealMatrix;

/// Block matrix `[g_ij H]`.
pub fn kron(g: &RealMatrix, h: &RealMatrix) -> RealMatrix {
    let (gr, gc) = g.shape();
    let (hr, hc) = h.shape();
    RealMatrix::from_fn(gr * hr, gc * hc, |i, j| g[(i / hr, j / hc)] * h[(i % hr, j % hc)])
}

/// Columnwise Kronecker product: column `c` is `a_c ⊗ b_c`.
pub fn khatri_rao(a: &RealMatrix, b: &RealMatrix) -> Result<RealMatrix> {
    if a.ncols() != b.ncols() {
        return Err(Error::Shape(format!(
            "Khatri-Rao product needs equal column counts, got {} and {}",
            a.ncols(),
            b.ncols()
        )));
    }
    let br = b.nrows();
    Ok(RealMatrix::from_fn(a.nrows() * br, a.ncols(), |i, c| a[(i / br, c)] * b[(i % br, c)]))
}

/// Rowwise Kronecker product: row `i` is `a_i ⊗ b_i`, so that `face_split(A, B)` equals
/// `khatri_rao(Aᵀ, Bᵀ)ᵀ`.
pub fn face_split(a: &RealMatrix, b: &RealMatrix) -> Result<RealMatrix> {
    if a.nrows() != b.nrows() {
        return Err(Error::Shape(format!(
            "face-splitting product needs equal row counts, got {} and {}",
            a.nrows(),
            b.nrows()
        )));
    }
    let bc = b.ncols();
    Ok(RealMatrix::from_fn(a.nrows(), a.ncols() * bc, |i, j| a[(i, j / bc)] * b[(i, j % bc)]))
}
