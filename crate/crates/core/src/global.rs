//! Symmetric factorization `K(X, X; θ) ≈ Q W Qᵀ` for kernels evaluated on one point set.
//!
//! Offline, `[S T] = Q R` is computed once. Online, the symmetric part of `S H(θ) Tᵀ` equals
//! `Q R Ĥ Rᵀ Qᵀ` with `Ĥ = [[0, H/2], [Hᵀ/2, 0]]`, so only the small matrix `R Ĥ Rᵀ` is
//! diagonalized. Negative eigenvalues are optionally dropped to keep the result positive
//! semidefinite, and the compressed variant further discards eigenpairs while the relative
//! Frobenius distance to `S H(θ) Tᵀ` stays within the tolerance.

use crate::chebyshev::ChebyshevGrid;
use crate::error::{Error, Result};
use crate::kernels::{KernelFamily, KernelOracle};
use crate::linalg::{sym_eig_by_magnitude, thin_qr};
use crate::parametric::{offline, FactorizationMeta, OfflineOptions, ParametricFactorization};
use crate::tensor::{DenseTensor, RealMatrix};

/// `[S T] = Q R` together with the parameter cores of the underlying factorization.
#[derive(Clone, Debug, PartialEq)]
pub struct GlobalFactorization {
    /// Orthonormal basis, `N x m`.
    pub q: RealMatrix,
    /// `m x (r_s + r_t)`; the first `r_s` columns belong to `S`.
    pub r: RealMatrix,
    pub r_s: usize,
    pub param_cores: Vec<DenseTensor>,
    pub param_grid: ChebyshevGrid,
    pub meta: FactorizationMeta,
    /// Drop negative eigenvalues online.
    pub clip: bool,
}

/// One online instantiation: `K ≈ Q_out W Q_outᵀ` with `Q_out = Q B`.
#[derive(Clone, Debug, PartialEq)]
pub struct GlobalInstance {
    /// Coefficients of `Q_out` in the offline basis; `None` means `Q_out = Q`.
    pub basis: Option<RealMatrix>,
    /// Symmetric core matrix (diagonal for the compressed variant).
    pub w: RealMatrix,
    /// Retained eigenvalues, by decreasing magnitude.
    pub eigenvalues: Vec<f64>,
    /// Exact relative Frobenius distance between `Q_out W Q_outᵀ` and `S H(θ) Tᵀ`.
    pub relative_error: f64,
}

/// Whether negative eigenvalues are dropped by default for a family.
pub fn default_clip(family: KernelFamily) -> bool {
    family.positive_definite()
}

impl GlobalFactorization {
    /// Builds the factorization from a parametric one computed with `X = Y`.
    pub fn from_parametric(f: ParametricFactorization, clip: bool) -> Result<Self> {
        if f.s.nrows() != f.t.nrows() {
            return Err(Error::Shape(format!("{} source and {} target points", f.s.nrows(), f.t.nrows())));
        }
        let r_s = f.s.ncols();
        let mut st = RealMatrix::zeros(f.s.nrows(), r_s + f.t.ncols());
        st.columns_mut(0, r_s).copy_from(&f.s);
        st.columns_mut(r_s, f.t.ncols()).copy_from(&f.t);
        let (q, r) = thin_qr(st);
        Ok(Self { q, r, r_s, param_cores: f.param_cores, param_grid: f.param_grid, meta: f.meta, clip })
    }

    /// Columns of `Q`, the rank of the uncompressed variant.
    pub fn basis_rank(&self) -> usize {
        self.q.ncols()
    }

    pub fn storage(&self) -> usize {
        self.q.len() + self.r.len() + self.param_cores.iter().map(DenseTensor::len).sum::<usize>()
    }

    /// `H(θ)` of the underlying factorization.
    pub fn h(&self, theta: &[f64]) -> Result<RealMatrix> {
        self.meta.geometry.check_theta(theta)?;
        let mut h = RealMatrix::identity(self.r_s, self.r_s);
        let mut q = vec![0.0; self.param_grid.n()];
        for (j, core) in self.param_cores.iter().enumerate() {
            self.param_grid.q_row_into(j, theta[j], &mut q);
            h *= crate::tt::contract_middle(core, &q);
        }
        Ok(h)
    }

    pub fn online(&self, theta: &[f64], eps: f64, compress: bool) -> Result<GlobalInstance> {
        global_online(self, theta, eps, compress)
    }
}

/// Offline stage on a single point set; the source and target boxes must coincide.
pub fn global_offline(oracle: &KernelOracle, points: &RealMatrix, opts: &OfflineOptions, clip: bool) -> Result<GlobalFactorization> {
    let geom = oracle.geometry();
    if geom.source != geom.target {
        return Err(Error::InvalidArgument("the symmetric factorization needs identical source and target boxes".into()));
    }
    let f = offline(oracle, points, points, opts)?;
    GlobalFactorization::from_parametric(f, clip)
}

/// Online stage. With `compress` the eigenpairs are truncated to the shortest prefix whose
/// relative Frobenius distance to `S H(θ) Tᵀ` is at most `eps`.
pub fn global_online(g: &GlobalFactorization, theta: &[f64], eps: f64, compress: bool) -> Result<GlobalInstance> {
    let h = g.h(theta)?;
    let r_t = g.r.ncols() - g.r_s;
    if h.ncols() != r_t {
        return Err(Error::Shape(format!("H(θ) has {} columns, T has {r_t}", h.ncols())));
    }
    let rs = g.r.columns(0, g.r_s);
    let rt = g.r.columns(g.r_s, r_t);
    // X = R_S H R_Tᵀ represents S H Tᵀ in the basis Q; M is its symmetric part.
    let x = rs * &h * rt.transpose();
    let m = (&x + x.transpose()) * 0.5;
    let (mu, u) = sym_eig_by_magnitude(m);
    let keep: Vec<usize> = (0..mu.len()).filter(|&i| !g.clip || mu[i] >= 0.0).collect();
    // ‖X - Σ λ u uᵀ‖² = ‖X‖² - 2 Σ λ uᵀXu + Σ λ², with uᵀXu = λ for eigenpairs of sym(X).
    let x2 = x.norm_squared();
    let xn = x2.sqrt();
    let mut errs = Vec::with_capacity(keep.len() + 1);
    let mut acc = x2;
    errs.push(acc.max(0.0).sqrt());
    for &i in &keep {
        acc -= mu[i] * mu[i];
        errs.push(acc.max(0.0).sqrt());
    }
    let k = if compress {
        (0..=keep.len()).find(|&k| errs[k] <= eps * xn).unwrap_or(keep.len())
    } else {
        keep.len()
    };
    let kept = &keep[..k];
    let eigenvalues: Vec<f64> = kept.iter().map(|&i| mu[i]).collect();
    let uk = RealMatrix::from_fn(u.nrows(), k, |r, c| u[(r, kept[c])]);
    let relative_error = if xn > 0.0 { errs[k] / xn } else { 0.0 };
    if compress {
        let w = RealMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&eigenvalues));
        return Ok(GlobalInstance { basis: Some(uk), w, eigenvalues, relative_error });
    }
    let scaled = RealMatrix::from_fn(uk.nrows(), k, |r, c| uk[(r, c)] * eigenvalues[c]);
    let w = scaled * uk.transpose();
    let w = (&w + w.transpose()) * 0.5;
    Ok(GlobalInstance { basis: None, w, eigenvalues, relative_error })
}

impl GlobalInstance {
    /// Rank of the delivered factorization.
    pub fn rank(&self) -> usize {
        self.w.nrows()
    }

    /// `Q_out = Q B`.
    pub fn q_out(&self, g: &GlobalFactorization) -> RealMatrix {
        match &self.basis {
            Some(b) => &g.q * b,
            None => g.q.clone(),
        }
    }

    /// `Q_out(rows) W Q_out(cols)ᵀ`; exactly symmetric when `rows == cols`.
    pub fn evaluate(&self, g: &GlobalFactorization, rows: &[usize], cols: &[usize]) -> Result<RealMatrix> {
        let n = g.q.nrows();
        if rows.iter().chain(cols).any(|&i| i >= n) {
            return Err(Error::Index(format!("row or column subset outside {n} points")));
        }
        let pick = |idx: &[usize]| {
            let q = g.q.select_rows(idx);
            match &self.basis {
                Some(b) => q * b,
                None => q,
            }
        };
        let a = pick(rows);
        let out = &a * &self.w * pick(cols).transpose();
        if rows == cols {
            return Ok((&out + out.transpose()) * 0.5);
        }
        Ok(out)
    }
}
