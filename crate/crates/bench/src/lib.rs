//! Fixtures shared by the benchmarks.

use pttk::{generate_points, offline, DenseTensor, Interval, KernelFamily, KernelOracle, KernelSpec, OfflineOptions};
use pttk::{ParametricFactorization, ProblemGeometry, RealMatrix, TtTensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `[0,1]^3` against `[1,2]^3` with a length-scale box, as in the accuracy runs.
pub fn weakly_admissible(family: KernelFamily) -> ProblemGeometry {
    let db = 3f64.sqrt();
    let mut theta = vec![Interval::new(db / 2.0, db).unwrap()];
    if family == KernelFamily::Matern {
        theta.push(Interval::new(0.5, 3.0).unwrap());
    }
    let unit = |lo: f64| vec![Interval::new(lo, lo + 1.0).unwrap(); 3];
    ProblemGeometry::new(unit(0.0), unit(1.0), theta).unwrap()
}

pub fn oracle(family: KernelFamily) -> KernelOracle {
    KernelOracle::from_spec(KernelSpec::parametric(family), weakly_admissible(family)).unwrap()
}

/// Offline factorization on `npts` sources and targets.
pub fn factorization(family: KernelFamily, npts: usize, n: usize, eps: f64) -> ParametricFactorization {
    let o = oracle(family);
    let g = o.geometry().clone();
    let (xs, ys): (RealMatrix, RealMatrix) = (generate_points(&g.source, npts, 1), generate_points(&g.target, npts, 2));
    offline(&o, &xs, &ys, &OfflineOptions::new(n, eps, 3)).unwrap()
}

/// Train with random cores of the given shape and ranks (with boundary ranks 1).
pub fn random_tt(shape: &[usize], rank: usize, seed: u64) -> TtTensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = shape.len();
    let cores = (0..d)
        .map(|k| {
            let a = if k == 0 { 1 } else { rank };
            let b = if k + 1 == d { 1 } else { rank };
            DenseTensor::from_fn(vec![a, shape[k], b], |_| rng.gen_range(-1.0..1.0)).unwrap()
        })
        .collect();
    TtTensor::new(cores).unwrap()
}
