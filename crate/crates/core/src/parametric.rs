//! Parametric low-rank factorization `K(X, Y; θ) ≈ S H(θ) Tᵀ`.
//!
//! Offline: Chebyshev factor matrices, a TT approximation of the coefficient tensor by greedy
//! cross, contraction of the spatial cores with the factor matrices, and a rounding pass over
//! the train `[S, G_{d+1}, .., G_{d+dθ}, Tᵀ]`. Online: `H(θ)` is the product of the parameter
//! cores contracted with the q-rows of `θ`, independent of the number of points.

use std::time::Instant;

use crate::chebyshev::{factor_matrices, ChebyshevGrid, Interval};
use crate::cross::{cross_approximate, CrossOptions, DEFAULT_MAX_SWEEPS};
use crate::error::{Error, Result};
use crate::kernels::{CoefficientOracle, KernelOracle, KernelSpec, ProblemGeometry};
use crate::tensor::{twist, DenseTensor, RealMatrix, Twist};
use crate::tt::{contract_middle, core_dims, left_contraction, right_contraction, tt_round, TtTensor};

/// Inputs of [`offline`] other than the kernel and the points.
#[derive(Clone, Debug)]
pub struct OfflineOptions {
    /// Chebyshev nodes per dimension.
    pub n: usize,
    /// Tolerance handed to greedy cross and to the rounding pass.
    pub eps: f64,
    pub seed: u64,
    pub max_sweeps: usize,
}

impl OfflineOptions {
    pub fn new(n: usize, eps: f64, seed: u64) -> Self {
        Self { n, eps, seed, max_sweeps: DEFAULT_MAX_SWEEPS }
    }
}

/// Provenance and diagnostics of an offline run.
#[derive(Clone, Debug, PartialEq)]
pub struct FactorizationMeta {
    pub kernel: Option<KernelSpec>,
    pub geometry: ProblemGeometry,
    pub n: usize,
    pub eps: f64,
    pub seed: u64,
    /// Whether greedy cross met the tolerance on its sample.
    pub converged: bool,
    pub cross_ranks: Vec<usize>,
    pub sweeps: usize,
    pub sample_error: f64,
    /// Kernel evaluations spent offline.
    pub evaluations: u64,
    /// Wall time of the coefficient approximation and of the remaining phases, seconds.
    pub cross_seconds: f64,
    pub total_seconds: f64,
}

/// `K(X, Y; θ) ≈ S H(θ) Tᵀ` with `H(θ)` assembled from `param_cores`.
#[derive(Clone, Debug, PartialEq)]
pub struct ParametricFactorization {
    pub s: RealMatrix,
    pub t: RealMatrix,
    pub param_cores: Vec<DenseTensor>,
    /// Grid over the parameter box only.
    pub param_grid: ChebyshevGrid,
    pub meta: FactorizationMeta,
}

impl ParametricFactorization {
    pub fn new(s: RealMatrix, t: RealMatrix, param_cores: Vec<DenseTensor>, param_grid: ChebyshevGrid, meta: FactorizationMeta) -> Result<Self> {
        let mut rank = s.ncols();
        for (k, c) in param_cores.iter().enumerate() {
            if c.order() != 3 || c.shape()[0] != rank || c.shape()[1] != param_grid.n() {
                return Err(Error::Shape(format!("parameter core {k} of shape {:?} does not chain", c.shape())));
            }
            rank = c.shape()[2];
        }
        if rank != t.ncols() || param_cores.len() != param_grid.dims() {
            return Err(Error::Shape(format!("T has {} columns, the cores end at rank {rank}", t.ncols())));
        }
        Ok(Self { s, t, param_cores, param_grid, meta })
    }

    pub fn d_theta(&self) -> usize {
        self.param_cores.len()
    }

    /// `(r_d, .., r_{d+dθ})`.
    pub fn ranks(&self) -> Vec<usize> {
        let mut r = vec![self.s.ncols()];
        r.extend(self.param_cores.iter().map(|c| c.shape()[2]));
        r
    }

    /// Largest rank of the factorization.
    pub fn max_rank(&self) -> usize {
        self.ranks().into_iter().max().unwrap_or(0)
    }

    /// Stored reals: `N_s r_d + N_t r_{d+dθ} + Σ n r r`.
    pub fn storage(&self) -> usize {
        self.s.len() + self.t.len() + self.param_cores.iter().map(DenseTensor::len).sum::<usize>()
    }

    /// `H(θ)`, an `r_d x r_{d+dθ}` matrix; the identity when there are no parameters.
    pub fn online(&self, theta: &[f64]) -> Result<RealMatrix> {
        online(self, theta)
    }

    /// `S(rows) H(θ) T(cols)ᵀ`.
    pub fn evaluate(&self, theta: &[f64], rows: &[usize], cols: &[usize]) -> Result<RealMatrix> {
        evaluate(self, theta, rows, cols)
    }
}

/// Offline stage. Points are rows of `sources` (`N_s x d`) and `targets` (`N_t x d`).
pub fn offline(oracle: &KernelOracle, sources: &RealMatrix, targets: &RealMatrix, opts: &OfflineOptions) -> Result<ParametricFactorization> {
    let start = Instant::now();
    let evals0 = oracle.evaluations();
    let geom = oracle.geometry().clone();
    let (d, dt) = (geom.d(), geom.d_theta());
    if sources.nrows() == 0 || targets.nrows() == 0 {
        return Err(Error::InvalidArgument("source and target point sets must be non-empty".into()));
    }
    if sources.ncols() != d || targets.ncols() != d {
        return Err(Error::Shape(format!("points of dimension {} / {} for a {d}-dimensional problem", sources.ncols(), targets.ncols())));
    }
    if opts.n < 2 || !(opts.eps > 0.0) {
        return Err(Error::InvalidArgument(format!("need n >= 2 and eps > 0, got n = {} and eps = {}", opts.n, opts.eps)));
    }
    // Phase 1: grid and factor matrices.
    let grid = ChebyshevGrid::new(opts.n, geom.intervals())?;
    let factors = factor_matrices(&grid, sources, targets)?;
    // Phase 2: TT approximation of the coefficient tensor.
    let coeffs = CoefficientOracle::new(oracle, &grid)?;
    let cross_opts = CrossOptions { max_sweeps: opts.max_sweeps, seed: opts.seed, pool_size: None };
    let cross_start = Instant::now();
    let cross = cross_approximate(&coeffs, opts.eps, &cross_opts)?;
    let cross_seconds = cross_start.elapsed().as_secs_f64();
    let cross_ranks = cross.tt.ranks();
    let cores = cross.tt.into_cores();
    // Phase 3: contract spatial cores with the factor matrices.
    let s = left_contraction(&cores[..d], &factors.u)?;
    let t = right_contraction(&cores[d + dt..], &factors.v)?;
    // Phase 4: round [S, G_{d+1}, .., G_{d+dθ}, Tᵀ].
    let mut train = Vec::with_capacity(dt + 2);
    train.push(twist(&s, Twist::Leading));
    train.extend(cores[d..d + dt].iter().cloned());
    train.push(twist(&t.transpose(), Twist::Trailing));
    let rounded = tt_round(&TtTensor::new(train)?, opts.eps)?.into_cores();
    let (s, t, param_cores) = unpack(rounded);
    let param_grid = ChebyshevGrid::new(opts.n, geom.theta.clone())?;
    let meta = FactorizationMeta {
        kernel: oracle.kernel().spec(),
        geometry: geom,
        n: opts.n,
        eps: opts.eps,
        seed: opts.seed,
        converged: cross.converged,
        cross_ranks,
        sweeps: cross.sweeps,
        sample_error: cross.sample_error,
        evaluations: oracle.evaluations() - evals0,
        cross_seconds,
        total_seconds: start.elapsed().as_secs_f64(),
    };
    ParametricFactorization::new(s, t, param_cores, param_grid, meta)
}

fn unpack(mut cores: Vec<DenseTensor>) -> (RealMatrix, RealMatrix, Vec<DenseTensor>) {
    let last = cores.pop().expect("train has a trailing core");
    let first = cores.remove(0);
    let (_, ns, rs) = core_dims(&first);
    let s = RealMatrix::from_column_slice(ns, rs, first.data());
    let (rt, nt, _) = core_dims(&last);
    let t = RealMatrix::from_column_slice(rt, nt, last.data()).transpose();
    (s, t, cores)
}

/// Online stage: `H(θ) = Π_j G_{d+j} ×₂ q_j(θ_j)`.
pub fn online(f: &ParametricFactorization, theta: &[f64]) -> Result<RealMatrix> {
    f.meta.geometry.check_theta(theta)?;
    if f.param_cores.is_empty() {
        return Ok(RealMatrix::identity(f.s.ncols(), f.s.ncols()));
    }
    let mut q = vec![0.0; f.param_grid.n()];
    let mut h: Option<RealMatrix> = None;
    for (j, core) in f.param_cores.iter().enumerate() {
        f.param_grid.q_row_into(j, theta[j], &mut q);
        let slice = contract_middle(core, &q);
        h = Some(match h {
            None => slice,
            Some(acc) => acc * slice,
        });
    }
    Ok(h.expect("at least one parameter core"))
}

/// `S(rows) H(θ) T(cols)ᵀ`.
pub fn evaluate(f: &ParametricFactorization, theta: &[f64], rows: &[usize], cols: &[usize]) -> Result<RealMatrix> {
    if rows.iter().any(|&i| i >= f.s.nrows()) || cols.iter().any(|&j| j >= f.t.nrows()) {
        return Err(Error::Index("row or column subset outside the factorization".into()));
    }
    let h = online(f, theta)?;
    let s = f.s.select_rows(rows);
    let t = f.t.select_rows(cols);
    Ok(s * h * t.transpose())
}

/// Non-parametric special case: `K(X, Y) ≈ S Tᵀ`.
pub fn ttk(oracle: &KernelOracle, sources: &RealMatrix, targets: &RealMatrix, opts: &OfflineOptions) -> Result<(RealMatrix, RealMatrix)> {
    if oracle.geometry().d_theta() != 0 {
        return Err(Error::InvalidArgument("the non-parametric factorization needs a kernel without free parameters".into()));
    }
    let f = offline(oracle, sources, targets, opts)?;
    Ok((f.s, f.t))
}

/// Grid over a parameter box, exposed for diagnostics.
pub fn parameter_grid(n: usize, theta: &[Interval]) -> Result<ChebyshevGrid> {
    ChebyshevGrid::new(n, theta.to_vec())
}
