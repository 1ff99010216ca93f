use proptest::prelude::*;

use straggler_core::frames::FrameSpec;
use straggler_core::linalg::{norm, sub};
use straggler_core::loss::{finite_difference_gradient, generate_regression, DataShards, Regularizer};
use straggler_core::solvers::all_partials;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn vec_strategy(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0f64..10.0, len)
}

proptest! {
    #[test]
    fn prox_is_nonexpansive(
        a in vec_strategy(6),
        b in vec_strategy(6),
        t in 0.0f64..5.0,
        which in 0usize..3,
    ) {
        let reg = [Regularizer::None, Regularizer::SquaredL2, Regularizer::L1][which];
        let pa = reg.prox(t, &a);
        let pb = reg.prox(t, &b);
        prop_assert!(norm(&sub(&pa, &pb)) <= norm(&sub(&a, &b)) * (1.0 + 1e-12) + 1e-12);
    }

    #[test]
    fn prox_minimizes_its_objective(z in vec_strategy(4), t in 0.01f64..3.0, which in 0usize..3, dir in vec_strategy(4)) {
        let reg = [Regularizer::None, Regularizer::SquaredL2, Regularizer::L1][which];
        let obj = |x: &[f64]| t * reg.value(x) + 0.5 * sub(x, &z).iter().map(|d| d * d).sum::<f64>();
        let p = reg.prox(t, &z);
        let moved: Vec<f64> = p.iter().zip(&dir).map(|(a, d)| a + 1e-3 * d).collect();
        prop_assert!(obj(&p) <= obj(&moved) + 1e-12);
    }

    #[test]
    fn full_gather_is_the_scaled_true_gradient(seed in 0u64..1000) {
        let inst = generate_regression::<f64>(64, 5, 0.5, seed).unwrap();
        let problem = inst.problem;
        let frame = FrameSpec::HadamardRandomized { n: 64, beta: 2, seed }.build::<f64>(8).unwrap();
        let shards = DataShards::encode(&problem, &frame).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w: Vec<f64> = (0..5).map(|_| rng.random_range(-2.0..2.0)).collect();
        let parts = all_partials(&shards, &w).unwrap();
        let mut sum = vec![0.0; 5];
        for g in &parts {
            sum.iter_mut().zip(g).for_each(|(s, x)| *s += x);
        }
        // raw Σ g_i = β Xᵀ(Xw − y) for a tight frame
        let r = problem.residual(&w).unwrap();
        let mut want = problem.x().tr_matvec(&r).unwrap();
        want.iter_mut().for_each(|x| *x *= 2.0);
        prop_assert!(norm(&sub(&sum, &want)) <= 1e-10 * norm(&want).max(1.0));
    }
}

#[test]
fn tight_frame_gradient_identity_at_many_points() {
    let inst = generate_regression::<f64>(128, 7, 1.0, 5).unwrap();
    let problem = inst.problem;
    let specs = [
        FrameSpec::Steiner { v: 32, columns: Some(128), split_blocks: 1, seed: 2 },
        FrameSpec::HaarSubsampled { order: 256, beta: 2, seed: 2 },
        FrameSpec::Gaussian { n: 128, beta: 2, seed: 2 },
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for spec in &specs {
        let frame = spec.build::<f64>(8).unwrap();
        let beta = frame.beta_f64();
        let shards = DataShards::encode(&problem, &frame).unwrap();
        let tight = frame.is_tight();
        for _ in 0..50 {
            let w: Vec<f64> = (0..7).map(|_| rng.random_range(-3.0..3.0)).collect();
            let parts = all_partials(&shards, &w).unwrap();
            let mut sum = vec![0.0; 7];
            for g in &parts {
                sum.iter_mut().zip(g).for_each(|(s, x)| *s += x);
            }
            // XᵀSᵀS(Xw − y) from the dense frame
            let s = frame.to_dense();
            let r = problem.residual(&w).unwrap();
            let oracle = problem.x().tr_matvec(&s.tr_matvec(&s.matvec(&r).unwrap()).unwrap()).unwrap();
            assert!(norm(&sub(&sum, &oracle)) <= 1e-10 * norm(&oracle).max(1.0));
            if tight {
                let mut want = problem.x().tr_matvec(&r).unwrap();
                want.iter_mut().for_each(|x| *x *= beta);
                assert!(norm(&sub(&sum, &want)) <= 1e-10 * norm(&want).max(1.0));
            }
        }
    }
}

#[test]
fn fast_apply_matches_dense() {
    let specs = [
        FrameSpec::Steiner { v: 8, columns: None, split_blocks: 1, seed: 0 },
        FrameSpec::Steiner { v: 16, columns: Some(50), split_blocks: 2, seed: 4 },
        FrameSpec::HaarSubsampled { order: 64, beta: 2, seed: 1 },
        FrameSpec::HadamardRandomized { n: 32, beta: 4, seed: 1 },
        FrameSpec::Gaussian { n: 24, beta: 3, seed: 1 },
        FrameSpec::Identity { n: 32 },
        FrameSpec::Replication { n: 32, beta: 2 },
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for spec in &specs {
        let frame = spec.build::<f64>(8).unwrap();
        let dense = frame.to_dense();
        for _ in 0..100 {
            let x: Vec<f64> = (0..frame.n()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let u: Vec<f64> = (0..frame.rows()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let fx = frame.apply(&x).unwrap();
            let dx = dense.matvec(&x).unwrap();
            assert!(norm(&sub(&fx, &dx)) <= 1e-10 * norm(&dx).max(1.0), "{spec:?}");
            let fu = frame.apply_transpose(&u).unwrap();
            let du = dense.tr_matvec(&u).unwrap();
            assert!(norm(&sub(&fu, &du)) <= 1e-10 * norm(&du).max(1.0), "{spec:?}");
            for i in 0..frame.m() {
                let rows: Vec<usize> = frame.block_rows(i).collect();
                let bi = frame.apply_block(i, &x).unwrap();
                let want: Vec<f64> = rows.iter().map(|&r| dx[r]).collect();
                assert!(norm(&sub(&bi, &want)) <= 1e-10 * norm(&want).max(1.0), "{spec:?} block {i}");
            }
        }
    }
}

#[test]
fn frames_rebuild_bit_for_bit() {
    let specs = [
        FrameSpec::Steiner { v: 16, columns: Some(70), split_blocks: 1, seed: 9 },
        FrameSpec::HaarSubsampled { order: 64, beta: 2, seed: 9 },
        FrameSpec::HadamardRandomized { n: 32, beta: 2, seed: 9 },
        FrameSpec::Gaussian { n: 20, beta: 2, seed: 9 },
    ];
    for spec in &specs {
        let a = spec.build::<f64>(4).unwrap().to_dense();
        let b = spec.build::<f64>(4).unwrap().to_dense();
        for i in 0..a.rows() {
            let same = a.row(i).iter().zip(b.row(i)).all(|(x, y)| x.to_bits() == y.to_bits());
            assert!(same, "{spec:?} row {i}");
        }
    }
    let a = FrameSpec::Gaussian { n: 20, beta: 2, seed: 1 }.build::<f64>(4).unwrap().to_dense();
    let b = FrameSpec::Gaussian { n: 20, beta: 2, seed: 2 }.build::<f64>(4).unwrap().to_dense();
    assert_ne!(a.row(0), b.row(0));
}

#[test]
fn objective_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for reg in [Regularizer::None, Regularizer::SquaredL2] {
        let problem = generate_regression::<f64>(30, 6, 0.7, 22).unwrap().problem.with_regularizer(reg, 0.3);
        for _ in 0..20 {
            let w: Vec<f64> = (0..6).map(|_| rng.random_range(-2.0..2.0)).collect();
            let g = problem.gradient(&w).unwrap();
            let fd = finite_difference_gradient(|x| problem.objective(x).unwrap(), &w, 1e-6);
            assert!(norm(&sub(&g, &fd)) <= 1e-6 * norm(&g).max(1.0));
        }
    }
}

#[test]
fn generated_instances_are_reproducible() {
    let a = generate_regression::<f64>(50, 8, 1.0, 77).unwrap();
    let b = generate_regression::<f64>(50, 8, 1.0, 77).unwrap();
    assert_eq!(a.problem.y().iter().map(|v| v.to_bits()).collect::<Vec<_>>(), b.problem.y().iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    assert_eq!(a.w_star_true, b.w_star_true);
    let c = generate_regression::<f64>(50, 8, 1.0, 78).unwrap();
    assert_ne!(a.problem.y(), c.problem.y());
}
