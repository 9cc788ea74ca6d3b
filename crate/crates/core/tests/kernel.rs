use maclim::grid::{FrequencyGrid, Grid, TimeGrid};
use maclim::kernel::*;
use maclim::propagators::{drude_kernel_freq, DrudeModel};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

fn random_kernel(n: usize, seed: u64) -> CtpKernel {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut m = || DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let (a, b, c) = (m(), m(), m());
    let grid: Grid = TimeGrid::new(0.0, 1.0, n).unwrap().into();
    // diagonal shift keeps the retarded part well conditioned
    let dn = (&a + a.transpose()) * 0.5 + DMatrix::identity(n, n) * (4.0 * n as f64);
    CtpKernel::new(grid, dn, (&b - b.transpose()) * 0.5, (&c + c.transpose()) * 0.5).unwrap()
}

/// `sigma Block(C) W = prod_k sigma Block(A_k) W` with dense complex matrices.
fn dense_product(ks: &[CtpKernel]) -> DMatrix<Complex64> {
    let n = ks[0].len();
    let w = ks[0].grid().weights();
    let w2 = DMatrix::from_diagonal(&DVector::from_fn(2 * n, |i, _| Complex64::new(w[i % n], 0.0)));
    let w2i = DMatrix::from_diagonal(&DVector::from_fn(2 * n, |i, _| Complex64::new(1.0 / w[i % n], 0.0)));
    let sigma = DMatrix::from_diagonal(&DVector::from_fn(2 * n, |i, _| {
        Complex64::new(if i < n { 1.0 } else { -1.0 }, 0.0)
    }));
    let mut acc = DMatrix::identity(2 * n, 2 * n);
    for k in ks {
        acc = acc * &sigma * block_of(k).matrix() * &w2;
    }
    &sigma * acc * w2i
}

#[test]
fn product_matches_dense_multiplication() {
    for m in 2..=4 {
        let ks: Vec<CtpKernel> = (0..m).map(|s| random_kernel(7, 100 + s)).collect();
        let got = block_of(&kernel_product(&ks).unwrap()).into_matrix();
        let want = dense_product(&ks);
        let scale = want.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let dev = (got - want).iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(dev < 1e-12 * scale, "m={m}: {dev:e}");
    }
}

#[test]
fn product_of_kernel_and_inverse_is_identity() {
    let k = random_kernel(9, 3);
    let inv = kernel_inverse(&k).unwrap();
    let p = kernel_product(&[k, inv]).unwrap();
    let w = p.grid().weights();
    let id = DMatrix::from_diagonal(&w.map(|x| 1.0 / x));
    assert!((p.dn() - id).amax() < 1e-9);
    assert!(p.df().amax() < 1e-12 && p.di().amax() < 1e-12);
}

#[test]
fn double_inversion_on_drude_kernel() {
    let model = DrudeModel::new(1.0, 1.0, 1.0).unwrap();
    let grid = FrequencyGrid::new(20.0, 64).unwrap();
    let (k, _) = drude_kernel_freq(&model, grid).unwrap();
    let back = kernel_inverse(&kernel_inverse(&k).unwrap()).unwrap();
    assert!(back.max_abs_diff(&k) < 1e-8 * k.dn().amax());
}

#[test]
fn frequency_round_trip_through_block() {
    let model = DrudeModel::new(1.0, 2.0, 0.5).unwrap();
    let (k, _) = drude_kernel_freq(&model, FrequencyGrid::new(3.0, 9).unwrap()).unwrap();
    let b = assemble_block(&k).unwrap();
    assert_eq!(decompose_block(&b, 1e-12).unwrap(), k);
}

proptest! {
    #[test]
    fn block_round_trip_is_exact(seed in 0u64..10_000, n in 2usize..12) {
        let k = random_kernel(n, seed);
        let b = assemble_block(&k).unwrap();
        prop_assert!(b.block_identity_deviation() <= 1e-12);
        let back = decompose_block(&b, 1e-12).unwrap();
        prop_assert_eq!(back, k);
    }

    #[test]
    fn physical_source_is_null(seed in 0u64..10_000, n in 2usize..12) {
        let k = random_kernel(n, seed);
        let mut rng = ChaCha20Rng::seed_from_u64(seed ^ 0xabc);
        let j = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        prop_assert!(physical_source_null(&k, &j).unwrap() < 1e-10);
    }

    #[test]
    fn inverse_residual_is_small(seed in 0u64..10_000, n in 2usize..10) {
        let k = random_kernel(n, seed);
        let inv = kernel_inverse(&k).unwrap();
        prop_assert!(inverse_residual(&k, &inv).unwrap() < 1e-10);
        let twice = kernel_inverse(&inv).unwrap();
        prop_assert!(twice.max_abs_diff(&k) < 1e-8 * k.dn().amax());
    }
}
