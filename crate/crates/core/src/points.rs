//! Seeded uniform random points in an axis-aligned box.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::chebyshev::Interval;
use crate::tensor::RealMatrix;

/// `count` points drawn uniformly and independently from `bx`, one per row.
pub fn generate_points(bx: &[Interval], count: usize, seed: u64) -> RealMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = RealMatrix::zeros(count, bx.len());
    for i in 0..count {
        for (c, iv) in bx.iter().enumerate() {
            out[(i, c)] = rng.gen_range(iv.lo..iv.hi);
        }
    }
    out
}
