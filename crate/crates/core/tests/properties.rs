use pttk::chebyshev::{basis_eval, lebesgue_bound};
use pttk::cross::skeleton;
use pttk::kernels::matern;
use pttk::linalg::thin_qr;
use pttk::products::{face_split, khatri_rao, kron};
use pttk::tt::tt_round;
use pttk::{ChebyshevGrid, DenseTensor, Interval, RealMatrix, TtTensor};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random(m: usize, n: usize, rng: &mut ChaCha8Rng) -> RealMatrix {
    RealMatrix::from_fn(m, n, |_, _| rng.gen_range(-1.0..1.0))
}

fn close(a: &RealMatrix, b: &RealMatrix, tol: f64) -> bool {
    a.shape() == b.shape() && (a - b).norm() <= tol * a.norm().max(b.norm()).max(1.0)
}

fn random_tt(shape: &[usize], ranks: &[usize], rng: &mut ChaCha8Rng) -> TtTensor {
    let cores = shape
        .iter()
        .enumerate()
        .map(|(k, &n)| DenseTensor::from_fn(vec![ranks[k], n, ranks[k + 1]], |_| rng.gen_range(-1.0..1.0)).unwrap())
        .collect();
    TtTensor::new(cores).unwrap()
}

fn tt_and_ranks() -> impl Strategy<Value = (Vec<usize>, Vec<usize>, u64)> {
    (2usize..=4)
        .prop_flat_map(|d| (prop::collection::vec(2usize..=6, d), prop::collection::vec(1usize..=4, d - 1), any::<u64>()))
        .prop_map(|(shape, inner, seed)| {
            let mut ranks = vec![1];
            ranks.extend(inner);
            ranks.push(1);
            (shape, ranks, seed)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kronecker_mixed_product(m in 1usize..4, n in 1usize..4, p in 1usize..4, q in 1usize..4, k in 1usize..4, l in 1usize..4, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (a, b) = (random(m, k, &mut rng), random(n, l, &mut rng));
        let (c, d) = (random(k, p, &mut rng), random(l, q, &mut rng));
        prop_assert!(close(&(kron(&a, &b) * kron(&c, &d)), &kron(&(&a * &c), &(&b * &d)), 1e-13));
    }

    #[test]
    fn khatri_rao_and_face_split_mixed_products(m in 1usize..4, n in 1usize..4, k in 1usize..4, l in 1usize..4, p in 1usize..5, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (a, b) = (random(m, k, &mut rng), random(n, l, &mut rng));
        let (c, d) = (random(k, p, &mut rng), random(l, p, &mut rng));
        // (A ⊗ B)(C ⊙ D) = AC ⊙ BD
        let lhs = kron(&a, &b) * khatri_rao(&c, &d).unwrap();
        prop_assert!(close(&lhs, &khatri_rao(&(&a * &c), &(&b * &d)).unwrap(), 1e-13));
        // (E • F)(C ⊗ D) = EC • FD
        let (e, f) = (random(p, k, &mut rng), random(p, l, &mut rng));
        let lhs = face_split(&e, &f).unwrap() * kron(&c, &d);
        prop_assert!(close(&lhs, &face_split(&(&e * &c), &(&f * &d)).unwrap(), 1e-13));
        // (E • F)(C ⊙ D) = EC ∘ FD
        let (c2, d2) = (random(k, m, &mut rng), random(l, m, &mut rng));
        let lhs = face_split(&e, &f).unwrap() * khatri_rao(&c2, &d2).unwrap();
        prop_assert!(close(&lhs, &(&e * &c2).component_mul(&(&f * &d2)), 1e-13));
    }

    #[test]
    fn unfold_fold_round_trip_is_bit_exact(shape in prop::collection::vec(1usize..5, 1..5), seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = DenseTensor::from_fn(shape.clone(), |_| rng.gen_range(-1.0..1.0)).unwrap();
        for j in 1..=shape.len() {
            let m = t.unfold(j).unwrap();
            prop_assert_eq!(m.nrows(), shape[..j].iter().product::<usize>());
            prop_assert_eq!(&DenseTensor::fold(&m, shape.clone()).unwrap(), &t);
        }
    }

    #[test]
    fn tt_round_meets_tolerance_and_never_grows_ranks((shape, ranks, seed) in tt_and_ranks(), eps in 1e-8f64..0.5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = random_tt(&shape, &ranks, &mut rng);
        let full = t.full().unwrap();
        let r = tt_round(&t, eps).unwrap();
        let diff: f64 = r.full().unwrap().data().iter().zip(full.data()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        prop_assert!(diff <= eps * full.frobenius_norm() * (1.0 + 1e-10) + 1e-14);
        prop_assert!(r.ranks().iter().zip(&ranks).all(|(a, b)| a <= b));
        let looser = tt_round(&t, eps * 4.0).unwrap();
        prop_assert!(looser.ranks().iter().zip(r.ranks()).all(|(a, b)| *a <= b), "{:?} vs {:?}", looser.ranks(), r.ranks());
    }

    #[test]
    fn tt_round_at_zero_tolerance_keeps_the_tensor((shape, ranks, seed) in tt_and_ranks()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = random_tt(&shape, &ranks, &mut rng);
        let full = t.full().unwrap();
        let r = tt_round(&t, 0.0).unwrap().full().unwrap();
        let diff: f64 = r.data().iter().zip(full.data()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        prop_assert!(diff <= 1e-12 * full.frobenius_norm().max(1.0));
    }

    #[test]
    fn skeleton_is_exact_on_rank_three(m in 4usize..30, n in 4usize..30, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random(m, 3, &mut rng) * random(3, n, &mut rng);
        let rows = rand::seq::index::sample(&mut rng, m, 3).into_vec();
        let cols = rand::seq::index::sample(&mut rng, n, 3).into_vec();
        let core = RealMatrix::from_fn(3, 3, |p, q| a[(rows[p], cols[q])]);
        let s = core.clone().svd(false, false).singular_values;
        prop_assume!(s[2] >= 1e-3 * s[0]);
        prop_assert!((skeleton(&a, &rows, &cols).unwrap() - &a).norm() <= 1e-10 * a.norm());
    }

    #[test]
    fn matern_half_integer_orders(r in 0.0f64..6.0, ell in 0.1f64..3.0) {
        prop_assert!((matern(r, ell, 0.5) - (-r / ell).exp()).abs() <= 1e-9);
        let s = 3f64.sqrt() * r / ell;
        prop_assert!((matern(r, ell, 1.5) - (1.0 + s) * (-s).exp()).abs() <= 1e-9);
        let s = 5f64.sqrt() * r / ell;
        prop_assert!((matern(r, ell, 2.5) - (1.0 + s + s * s / 3.0) * (-s).exp()).abs() <= 1e-9);
    }

    #[test]
    fn orthonormal_factor_of_thin_qr(m in 1usize..12, n in 1usize..12, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random(m, n, &mut rng);
        let (q, r) = thin_qr(a.clone());
        prop_assert!(close(&(&q * r), &a, 1e-13));
        prop_assert!(close(&(q.transpose() * &q), &RealMatrix::identity(q.ncols(), q.ncols()), 1e-13));
    }
}

#[test]
fn chebyshev_basis_is_cardinal_and_lebesgue_bounded() {
    let iv = Interval::new(-0.3, 1.7).unwrap();
    for n in [4, 8, 16, 27, 32] {
        let grid = ChebyshevGrid::new(n, vec![iv]).unwrap();
        let nodes = grid.nodes(0);
        for i in 0..n {
            for j in 0..n {
                let v = basis_eval(&iv, nodes, i, nodes[j]);
                assert!((v - f64::from(u8::from(i == j))).abs() <= 1e-12, "n {n} basis {i} at node {j}: {v}");
            }
        }
        let lebesgue = (0..=4000)
            .map(|s| iv.lo + iv.width() * s as f64 / 4000.0)
            .map(|x| (0..n).map(|i| basis_eval(&iv, nodes, i, x).abs()).sum::<f64>())
            .fold(0.0, f64::max);
        assert!(lebesgue <= lebesgue_bound(n) + 1e-12, "n {n}: {lebesgue} above {}", lebesgue_bound(n));
    }
}
