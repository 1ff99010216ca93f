use proptest::prelude::*;

use straggler_core::cluster::{
    gather_fastest_k, run_data, run_model, DelayKind, DelayModel, InterruptFill, RunConfig, RunTrace,
};
use straggler_core::frames::FrameSpec;
use straggler_core::loss::{
    generate_regression, DataParallelProblem, DataShards, ModelParallelProblem, ModelShards, Phi, Regularizer,
};
use straggler_core::solvers::{all_partials, gd_step, Algorithm, DataObjective, SolverState};

fn ridge(seed: u64) -> DataParallelProblem<f64> {
    generate_regression::<f64>(64, 6, 1.0, seed).unwrap().problem.with_regularizer(Regularizer::SquaredL2, 0.1)
}

fn bits(tr: &RunTrace) -> Vec<(u64, u64, String)> {
    tr.rows.iter().map(|r| (r.objective.to_bits(), r.sim_time.to_bits(), r.active_mask.clone())).collect()
}

#[test]
fn runs_are_deterministic() {
    let problem = ridge(1);
    let frame = FrameSpec::HadamardRandomized { n: 64, beta: 2, seed: 1 }.build::<f64>(8).unwrap();
    let shards = DataShards::encode(&problem, &frame).unwrap();
    let delays = DelayModel::bimodal(5);
    for alg in [Algorithm::Gd, Algorithm::Prox, Algorithm::Lbfgs] {
        let cfg = RunConfig::new(alg, 5, 30, 0.05);
        let a = run_data(&problem, &shards, None, &cfg, &delays, vec![0.0; 6], None).unwrap();
        let b = run_data(&problem, &shards, None, &cfg, &delays, vec![0.0; 6], None).unwrap();
        assert_eq!(bits(&a), bits(&b), "{alg:?}");
        assert_eq!(a.final_w, b.final_w);
    }
}

#[test]
fn interrupted_workers_do_not_leak_into_the_step() {
    let problem = ridge(2);
    let frame = FrameSpec::Steiner { v: 16, columns: Some(64), split_blocks: 1, seed: 2 }.build::<f64>(8).unwrap();
    let shards = DataShards::encode(&problem, &frame).unwrap();
    let delays = DelayModel::new(DelayKind::Exponential { mean: 1.0 }, 6);
    for alg in [Algorithm::Gd, Algorithm::Lbfgs] {
        let mut nan = RunConfig::new(alg, 5, 25, 0.05);
        nan.interrupt_fill = InterruptFill::Nan;
        let mut computed = nan.clone();
        computed.interrupt_fill = InterruptFill::Computed;
        let a = run_data(&problem, &shards, None, &nan, &delays, vec![0.0; 6], None).unwrap();
        let b = run_data(&problem, &shards, None, &computed, &delays, vec![0.0; 6], None).unwrap();
        assert!(a.fault.is_none());
        assert_eq!(bits(&a), bits(&b), "{alg:?}");
    }
}

#[test]
fn zero_delay_full_gather_is_the_plain_solver() {
    let problem = ridge(3);
    let m = 8;
    let frame = FrameSpec::HadamardRandomized { n: 64, beta: 2, seed: 3 }.build::<f64>(m).unwrap();
    let shards = DataShards::encode(&problem, &frame).unwrap();
    let zero = DelayModel::new(DelayKind::Scripted { delays: vec![vec![0.0; m]] }, 0);
    let alpha = 0.05;
    let cfg = RunConfig::new(Algorithm::Gd, m, 40, alpha);
    let tr = run_data(&problem, &shards, None, &cfg, &zero, vec![0.0; 6], None).unwrap();

    let obj = DataObjective::new(&shards, problem.lambda(), problem.reg());
    let all: Vec<usize> = (0..m).collect();
    let mut state = SolverState::new(vec![0.0; 6]);
    for row in &tr.rows {
        let parts = all_partials(&shards, &state.w).unwrap();
        state = gd_step(&state, &obj, &all, &parts, alpha).unwrap().0;
        assert_eq!(row.objective.to_bits(), problem.objective(&state.w).unwrap().to_bits());
        assert_eq!(row.sim_time, 0.0);
        assert_eq!(row.k, m);
    }
    assert_eq!(tr.final_w, state.w);
}

#[test]
fn model_parallel_runs_are_deterministic_and_descend() {
    let inst = generate_regression::<f64>(40, 32, 0.3, 4).unwrap();
    let model =
        ModelParallelProblem::new(inst.problem.x().clone(), Phi::LeastSquares { y: inst.problem.y().to_vec() }).unwrap();
    let frame = FrameSpec::HadamardRandomized { n: 32, beta: 2, seed: 4 }.build::<f64>(8).unwrap();
    let shards = ModelShards::encode(&model, &frame).unwrap();
    let delays = DelayModel::bimodal(9);
    let alpha = 0.5 / model.smoothness();
    let cfg = RunConfig::new(Algorithm::Bcd, 8, 50, alpha);
    let a = run_model(&model, &shards, &frame, &cfg, &delays, None).unwrap();
    let b = run_model(&model, &shards, &frame, &cfg, &delays, None).unwrap();
    assert_eq!(bits(&a), bits(&b));
    let objs = a.objectives();
    assert!(objs.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    assert!(*objs.last().unwrap() < a.initial_objective);
}

fn delays_strategy(m: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(prop_oneof![0.0f64..10.0, Just(1.0)], m)
}

proptest! {
    #[test]
    fn elapsed_is_the_kth_order_statistic(d in delays_strategy(9), k in 1usize..=9) {
        let out = gather_fastest_k(&d, k, None).unwrap();
        let mut sorted = d.clone();
        sorted.sort_by(f64::total_cmp);
        prop_assert_eq!(out.elapsed.to_bits(), sorted[k - 1].to_bits());
        prop_assert_eq!(out.active.len(), k);
        prop_assert!(out.active.iter().all(|&i| d[i] <= out.elapsed));
        prop_assert_eq!(out.active.len() + out.interrupted.len(), 9);
    }

    #[test]
    fn replication_dedup_covers_at_most_k(d in delays_strategy(8), k in 1usize..=8) {
        let frame = FrameSpec::Replication { n: 16, beta: 2 }.build::<f64>(8).unwrap();
        let meta = frame.replication().unwrap();
        let out = gather_fastest_k(&d, k, Some(meta)).unwrap();
        let cov = out.coverage.unwrap();
        prop_assert!(cov.len() <= k);
        prop_assert_eq!(cov.len(), out.effective.len());
        prop_assert!(out.effective.iter().all(|i| out.active.contains(i)));
        let mut parts: Vec<usize> = out.effective.iter().map(|&b| meta.partition_of_block[b]).collect();
        parts.sort_unstable();
        parts.dedup();
        prop_assert_eq!(parts.len(), out.effective.len());
    }
}
