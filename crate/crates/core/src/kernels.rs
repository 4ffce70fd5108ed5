//! Radial kernels, problem geometry, and the coefficient-tensor entry oracle.
//!
//! The multivariate function handed to interpolation orders its arguments as
//! `ξ = (x_1..x_d, θ_1..θ_{dθ}, y_1..y_d)`; the coefficient tensor, its TT cores and the grid
//! all follow that order.

use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use crate::bessel::bessel_k;
use crate::chebyshev::{ChebyshevGrid, Interval};
use crate::error::{Error, Result};
use crate::tensor::RealMatrix;

/// Largest supported spatial or parameter dimension.
pub const MAX_DIM: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum KernelFamily {
    Biharmonic,
    Laplace3d,
    Laplace2d,
    ThinPlate,
    ThinPlateSpline,
    SquaredExponential,
    Multiquadric,
    Exponential,
    Matern,
}

impl KernelFamily {
    pub const ALL: [KernelFamily; 9] = [
        KernelFamily::Biharmonic,
        KernelFamily::Laplace3d,
        KernelFamily::Laplace2d,
        KernelFamily::ThinPlate,
        KernelFamily::ThinPlateSpline,
        KernelFamily::SquaredExponential,
        KernelFamily::Multiquadric,
        KernelFamily::Exponential,
        KernelFamily::Matern,
    ];

    pub fn name(self) -> &'static str {
        match self {
            KernelFamily::Biharmonic => "biharmonic",
            KernelFamily::Laplace3d => "laplace3d",
            KernelFamily::Laplace2d => "laplace2d",
            KernelFamily::ThinPlate => "thinplate",
            KernelFamily::ThinPlateSpline => "thinplate-spline",
            KernelFamily::SquaredExponential => "squared-exponential",
            KernelFamily::Multiquadric => "multiquadric",
            KernelFamily::Exponential => "exponential",
            KernelFamily::Matern => "matern",
        }
    }

    pub fn has_length_scale(self) -> bool {
        matches!(
            self,
            KernelFamily::ThinPlateSpline
                | KernelFamily::SquaredExponential
                | KernelFamily::Multiquadric
                | KernelFamily::Exponential
                | KernelFamily::Matern
        )
    }

    /// Families without a finite value at `r = 0`.
    pub fn singular_at_origin(self) -> bool {
        matches!(self, KernelFamily::Biharmonic | KernelFamily::Laplace3d | KernelFamily::Laplace2d)
    }

    /// Whether the family is positive semidefinite, which decides the default eigenvalue
    /// clipping of the symmetric global mode.
    pub fn positive_definite(self) -> bool {
        matches!(self, KernelFamily::SquaredExponential | KernelFamily::Exponential | KernelFamily::Matern)
    }
}

impl fmt::Display for KernelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for KernelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase();
        let alias = match key.as_str() {
            "se" | "gaussian" => "squared-exponential",
            "laplace-3d" => "laplace3d",
            "laplace-2d" => "laplace2d",
            "thin-plate" => "thinplate",
            "thin-plate-spline" | "tps" => "thinplate-spline",
            "mq" => "multiquadric",
            other => other,
        };
        KernelFamily::ALL
            .into_iter()
            .find(|f| f.name() == alias)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown kernel family `{s}`")))
    }
}

/// Anything that can be evaluated at a source point, a target point and a parameter vector.
pub trait Kernel: Send + Sync {
    fn eval(&self, x: &[f64], y: &[f64], theta: &[f64]) -> Result<f64>;
    /// Number of free parameters.
    fn theta_arity(&self) -> usize;
    fn name(&self) -> String;
    /// The built-in description of this kernel, if it has one.
    fn spec(&self) -> Option<KernelSpec> {
        None
    }
}

/// A kernel family with optionally pinned length scale and smoothness. Free parameters are
/// taken from `θ` in the order `(ℓ, ν)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub length_scale: Option<f64>,
    pub nu: Option<f64>,
}

impl KernelSpec {
    /// All parameters free.
    pub fn parametric(family: KernelFamily) -> Self {
        Self { family, length_scale: None, nu: None }
    }

    /// All parameters pinned (`ℓ` and `ν` ignored where the family has none).
    pub fn fixed(family: KernelFamily, length_scale: f64, nu: f64) -> Self {
        Self {
            family,
            length_scale: family.has_length_scale().then_some(length_scale),
            nu: (family == KernelFamily::Matern).then_some(nu),
        }
    }

    fn params(&self, theta: &[f64]) -> Result<(f64, f64)> {
        if theta.len() != self.theta_arity() {
            return Err(Error::Shape(format!(
                "kernel {} takes {} parameters, got {}",
                self.family,
                self.theta_arity(),
                theta.len()
            )));
        }
        let mut it = theta.iter().copied();
        let ell = match self.length_scale {
            Some(l) => l,
            None if self.family.has_length_scale() => it.next().unwrap_or(1.0),
            None => 1.0,
        };
        let nu = match self.nu {
            Some(v) => v,
            None if self.family == KernelFamily::Matern => it.next().unwrap_or(0.5),
            None => 0.0,
        };
        Ok((ell, nu))
    }

    /// Value at distance `r >= 0`.
    pub fn eval_radial(&self, r: f64, theta: &[f64]) -> Result<f64> {
        let (ell, nu) = self.params(theta)?;
        radial(self.family, r, ell, nu)
    }
}

fn radial(family: KernelFamily, r: f64, ell: f64, nu: f64) -> Result<f64> {
    if r == 0.0 && family.singular_at_origin() {
        return Err(Error::KernelDomain { family: family.name().into() });
    }
    Ok(match family {
        KernelFamily::Biharmonic => 1.0 / (r * r),
        KernelFamily::Laplace3d => 1.0 / r,
        KernelFamily::Laplace2d => -r.ln(),
        KernelFamily::ThinPlate => {
            if r == 0.0 {
                0.0
            } else {
                r * r * r.ln()
            }
        }
        KernelFamily::ThinPlateSpline => {
            let s = (r / ell) * (r / ell);
            if s == 0.0 {
                0.0
            } else {
                s * s.ln()
            }
        }
        KernelFamily::SquaredExponential => (-(r / ell) * (r / ell)).exp(),
        KernelFamily::Multiquadric => (1.0 + (r / ell) * (r / ell)).sqrt(),
        KernelFamily::Exponential => (-r / ell).exp(),
        KernelFamily::Matern => matern(r, ell, nu),
    })
}

/// `(2^{1-ν}/Γ(ν)) z^ν K_ν(z)` with `z = √(2ν) r/ℓ`, equal to 1 at `r = 0`.
pub fn matern(r: f64, ell: f64, nu: f64) -> f64 {
    let z = (2.0 * nu).sqrt() * r / ell;
    if z == 0.0 {
        return 1.0;
    }
    let k = bessel_k(nu, z);
    if k == 0.0 {
        return 0.0;
    }
    // Work in logs so large ν or z cannot overflow the intermediate power.
    let log = (1.0 - nu) * std::f64::consts::LN_2 - statrs::function::gamma::ln_gamma(nu) + nu * z.ln() + k.ln();
    log.exp()
}

impl Kernel for KernelSpec {
    fn eval(&self, x: &[f64], y: &[f64], theta: &[f64]) -> Result<f64> {
        let r = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        self.eval_radial(r, theta)
    }

    fn theta_arity(&self) -> usize {
        usize::from(self.family.has_length_scale() && self.length_scale.is_none())
            + usize::from(self.family == KernelFamily::Matern && self.nu.is_none())
    }

    fn spec(&self) -> Option<KernelSpec> {
        Some(*self)
    }

    fn name(&self) -> String {
        self.family.name().to_string()
    }
}

pub fn kernel_eval(spec: &KernelSpec, x: &[f64], y: &[f64], theta: &[f64]) -> Result<f64> {
    spec.eval(x, y, theta)
}

/// Source, target and parameter boxes.
#[derive(Clone, Debug, PartialEq)]
pub struct ProblemGeometry {
    pub source: Vec<Interval>,
    pub target: Vec<Interval>,
    pub theta: Vec<Interval>,
}

impl ProblemGeometry {
    pub fn new(source: Vec<Interval>, target: Vec<Interval>, theta: Vec<Interval>) -> Result<Self> {
        if source.len() != target.len() || source.is_empty() {
            return Err(Error::Shape(format!(
                "source box has {} dimensions, target box {}",
                source.len(),
                target.len()
            )));
        }
        if source.len() > MAX_DIM || theta.len() > MAX_DIM {
            return Err(Error::InvalidArgument(format!("at most {MAX_DIM} spatial and parameter dimensions")));
        }
        Ok(Self { source, target, theta })
    }

    pub fn d(&self) -> usize {
        self.source.len()
    }

    pub fn d_theta(&self) -> usize {
        self.theta.len()
    }

    /// Total number of interpolation variables `2d + dθ`.
    pub fn total_dims(&self) -> usize {
        2 * self.d() + self.d_theta()
    }

    /// Intervals in variable order (source, parameter, target).
    pub fn intervals(&self) -> Vec<Interval> {
        self.source.iter().chain(&self.theta).chain(&self.target).copied().collect()
    }

    pub fn box_distance(&self) -> f64 {
        box_distance(&self.source, &self.target)
    }

    /// Rejects a parameter vector outside the parameter box beyond the tolerance.
    pub fn check_theta(&self, theta: &[f64]) -> Result<()> {
        check_in_box(&self.theta, theta, "parameter", 0)
    }
}

pub(crate) fn check_in_box(bx: &[Interval], v: &[f64], role: &'static str, index: usize) -> Result<()> {
    if v.len() != bx.len() {
        return Err(Error::Shape(format!("{role} vector of length {} for a box of {} dimensions", v.len(), bx.len())));
    }
    for (c, (iv, &x)) in bx.iter().zip(v).enumerate() {
        if !iv.contains(x) {
            return Err(Error::OutsideBox { role, index, coord: c, value: x });
        }
    }
    Ok(())
}

/// Euclidean distance between two axis-aligned boxes.
pub fn box_distance(a: &[Interval], b: &[Interval]) -> f64 {
    a.iter().zip(b).map(|(p, q)| p.gap(q).powi(2)).sum::<f64>().sqrt()
}

/// A kernel together with its geometry and an evaluation counter.
pub struct KernelOracle {
    kernel: Arc<dyn Kernel>,
    geom: ProblemGeometry,
    evals: AtomicU64,
}

impl KernelOracle {
    pub fn new(kernel: Arc<dyn Kernel>, geom: ProblemGeometry) -> Result<Self> {
        if kernel.theta_arity() != geom.d_theta() {
            return Err(Error::Shape(format!(
                "kernel {} takes {} parameters but the parameter box has {} dimensions",
                kernel.name(),
                kernel.theta_arity(),
                geom.d_theta()
            )));
        }
        Ok(Self { kernel, geom, evals: AtomicU64::new(0) })
    }

    pub fn from_spec(spec: KernelSpec, geom: ProblemGeometry) -> Result<Self> {
        Self::new(Arc::new(spec), geom)
    }

    pub fn geometry(&self) -> &ProblemGeometry {
        &self.geom
    }

    pub fn kernel(&self) -> &Arc<dyn Kernel> {
        &self.kernel
    }

    /// Number of kernel evaluations so far.
    pub fn evaluations(&self) -> u64 {
        self.evals.load(Ordering::Relaxed)
    }

    /// Kernel value at `(x, y; θ)`, counted.
    pub fn eval(&self, x: &[f64], y: &[f64], theta: &[f64]) -> Result<f64> {
        self.evals.fetch_add(1, Ordering::Relaxed);
        self.kernel.eval(x, y, theta)
    }

    /// The interpolated function at `ξ = (x, θ, y)`; `ξ` must lie in the product box.
    pub fn f_kappa(&self, xi: &[f64]) -> Result<f64> {
        let (d, dt) = (self.geom.d(), self.geom.d_theta());
        if xi.len() != 2 * d + dt {
            return Err(Error::Shape(format!("ξ of length {} for {} variables", xi.len(), 2 * d + dt)));
        }
        check_in_box(&self.geom.intervals(), xi, "interpolation variable", 0)?;
        self.eval(&xi[..d], &xi[d + dt..], &xi[d..d + dt])
    }

    /// Kernel matrix between rows of `xs` and rows of `ys` at `θ`.
    pub fn matrix(&self, xs: &RealMatrix, ys: &RealMatrix, theta: &[f64]) -> Result<RealMatrix> {
        let d = xs.ncols();
        let mut out = RealMatrix::zeros(xs.nrows(), ys.nrows());
        let mut x = [0.0; MAX_DIM];
        let mut y = [0.0; MAX_DIM];
        for j in 0..ys.nrows() {
            for k in 0..d {
                y[k] = ys[(j, k)];
            }
            for i in 0..xs.nrows() {
                for k in 0..d {
                    x[k] = xs[(i, k)];
                }
                out[(i, j)] = self.kernel.eval(&x[..d], &y[..d], theta)?;
            }
        }
        self.evals.fetch_add((xs.nrows() * ys.nrows()) as u64, Ordering::Relaxed);
        Ok(out)
    }
}

/// Entry access to a tensor that is never stored.
pub trait EntryOracle {
    fn shape(&self) -> &[usize];
    /// Entry at a 0-based multi-index.
    fn entry(&self, idx: &[usize]) -> Result<f64>;
    /// Entries evaluated so far.
    fn evaluations(&self) -> u64;
}

/// Coefficient tensor `m_{i_1..i_D} = f_κ(η_{i_1}, .., η_{i_D})` on a Chebyshev grid.
pub struct CoefficientOracle<'a> {
    oracle: &'a KernelOracle,
    grid: &'a ChebyshevGrid,
    shape: Vec<usize>,
    evals: AtomicU64,
}

impl<'a> CoefficientOracle<'a> {
    pub fn new(oracle: &'a KernelOracle, grid: &'a ChebyshevGrid) -> Result<Self> {
        let dims = oracle.geometry().total_dims();
        if grid.dims() != dims {
            return Err(Error::Shape(format!("grid has {} dimensions, problem has {dims}", grid.dims())));
        }
        Ok(Self { oracle, grid, shape: vec![grid.n(); dims], evals: AtomicU64::new(0) })
    }
}

impl EntryOracle for CoefficientOracle<'_> {
    fn shape(&self) -> &[usize] {
        &self.shape
    }

    fn entry(&self, idx: &[usize]) -> Result<f64> {
        let g = self.oracle.geometry();
        let (d, dt) = (g.d(), g.d_theta());
        if idx.len() != self.shape.len() {
            return Err(Error::Index(format!("index of length {} for order {}", idx.len(), self.shape.len())));
        }
        let mut x = [0.0; MAX_DIM];
        let mut th = [0.0; MAX_DIM];
        let mut y = [0.0; MAX_DIM];
        for k in 0..d {
            x[k] = self.grid.node(k, idx[k]);
            y[k] = self.grid.node(d + dt + k, idx[d + dt + k]);
        }
        for k in 0..dt {
            th[k] = self.grid.node(d + k, idx[d + k]);
        }
        self.evals.fetch_add(1, Ordering::Relaxed);
        self.oracle.eval(&x[..d], &y[..d], &th[..dt])
    }

    fn evaluations(&self) -> u64 {
        self.evals.load(Ordering::Relaxed)
    }
}

/// Entry oracle backed by a closure, with its own counter.
pub struct FnOracle<F> {
    shape: Vec<usize>,
    f: F,
    evals: AtomicU64,
}

impl<F: Fn(&[usize]) -> f64> FnOracle<F> {
    pub fn new(shape: Vec<usize>, f: F) -> Self {
        Self { shape, f, evals: AtomicU64::new(0) }
    }
}

impl<F: Fn(&[usize]) -> f64> EntryOracle for FnOracle<F> {
    fn shape(&self) -> &[usize] {
        &self.shape
    }

    fn entry(&self, idx: &[usize]) -> Result<f64> {
        if idx.len() != self.shape.len() || idx.iter().zip(&self.shape).any(|(i, n)| i >= n) {
            return Err(Error::Index(format!("{idx:?} outside shape {:?}", self.shape)));
        }
        self.evals.fetch_add(1, Ordering::Relaxed);
        Ok((self.f)(idx))
    }

    fn evaluations(&self) -> u64 {
        self.evals.load(Ordering::Relaxed)
    }
}
