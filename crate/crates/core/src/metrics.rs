//! Relative errors of approximate kernel matrices, on the full matrix or on a random
//! subsample of rows and columns.

use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::kernels::KernelOracle;
use crate::linalg::spectral_norm;
use crate::tensor::RealMatrix;

/// Default number of rows and of columns in a subsample.
pub const DEFAULT_SUBSAMPLE: usize = 500;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Norm {
    Two,
    Frobenius,
}

impl Norm {
    pub fn of(self, m: &RealMatrix) -> f64 {
        match self {
            Norm::Two => spectral_norm(m),
            Norm::Frobenius => m.norm(),
        }
    }
}

impl fmt::Display for Norm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Norm::Two => "2",
            Norm::Frobenius => "F",
        })
    }
}

impl FromStr for Norm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "2" | "two" | "spectral" => Ok(Norm::Two),
            "F" | "f" | "fro" | "frobenius" => Ok(Norm::Frobenius),
            _ => Err(Error::InvalidArgument(format!("unknown norm `{s}`"))),
        }
    }
}

/// `‖K - K̂‖ / ‖K‖`.
pub fn relative_error(k: &RealMatrix, approx: &RealMatrix, norm: Norm) -> Result<f64> {
    if k.shape() != approx.shape() {
        return Err(Error::Shape(format!("reference {:?} vs approximation {:?}", k.shape(), approx.shape())));
    }
    let denom = norm.of(k);
    if denom == 0.0 {
        return Err(Error::ZeroNorm(format!("{norm}-norm of the reference matrix")));
    }
    Ok(norm.of(&(k - approx)) / denom)
}

/// Sorted random subset of `min(count, n)` indices out of `0..n`.
pub fn subsample(n: usize, count: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v = sample(&mut rng, n, count.min(n)).into_vec();
    v.sort_unstable();
    v
}

/// Relative error on the block `(rows, cols)`: only `K(X̂, Ŷ; θ)` is evaluated, and `approx`
/// returns the matching block of the approximation.
#[allow(clippy::too_many_arguments)]
pub fn subsampled_relative_error(
    oracle: &KernelOracle,
    sources: &RealMatrix,
    targets: &RealMatrix,
    theta: &[f64],
    rows: &[usize],
    cols: &[usize],
    approx: impl FnOnce(&[usize], &[usize]) -> Result<RealMatrix>,
    norm: Norm,
) -> Result<f64> {
    let exact = oracle.matrix(&sources.select_rows(rows), &targets.select_rows(cols), theta)?;
    relative_error(&exact, &approx(rows, cols)?, norm)
}
