//! Turning a config into a problem, a frame, a delay model and a run.

use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use straggler_core::cluster::{
    mask_hex, run_data, run_model, DelayKind, DelayModel, InterruptFill, RunConfig, RunTrace, TraceRow,
};
use straggler_core::frames::{brip_estimate, BripMode, Frame, FrameSpec};
use straggler_core::linalg::{norm, sub, Matrix};
use straggler_core::loss::{
    f1_score, folded_accuracy, generate_logistic, generate_regression, generate_sparse_regression,
    DataParallelProblem, DataShards, ModelParallelProblem, ModelShards, Phi, Regularizer,
};
use straggler_core::solvers::{async_bcd_baseline, Algorithm, AsyncConfig, TheoremConstants};

use crate::config::{EpsilonSource, ExperimentConfig, FrameChoice, InitChoice, ProblemSpec, SchemeSpec};
use crate::error::HarnessError;

/// Sampled-mode BRIP trials for automatic step sizes.
const EPS_TRIALS: usize = 200;
/// Newton tolerance for reference optima.
const REFERENCE_TOL: f64 = 1e-12;

/// Whether the trace metric improves upwards (F1, accuracy) or downwards.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    /// `‖w − w_ref‖/‖w_ref‖` against the exact optimum.
    RelativeError,
    /// Support recovery against the planted model.
    F1,
    /// Training accuracy on sign-folded samples.
    Accuracy,
}

impl MetricKind {
    pub fn higher_is_better(self) -> bool {
        !matches!(self, MetricKind::RelativeError)
    }
}

pub enum Instance {
    Data {
        problem: DataParallelProblem<f64>,
        truth: Vec<f64>,
        metric: MetricKind,
    },
    Model {
        problem: ModelParallelProblem<f64>,
        truth: Vec<f64>,
        folded: Option<Matrix<f64>>,
        metric: MetricKind,
    },
}

impl Instance {
    pub fn metric_kind(&self) -> MetricKind {
        match self {
            Instance::Data { metric, .. } | Instance::Model { metric, .. } => *metric,
        }
    }

    pub fn metric(&self, w: &[f64]) -> f64 {
        match self {
            Instance::Data { truth, metric, .. } | Instance::Model { truth, metric, .. } => match metric {
                MetricKind::RelativeError => norm(&sub(w, truth)) / norm(truth).max(f64::MIN_POSITIVE),
                MetricKind::F1 => f1_score(w, truth, None).map_or(f64::NAN, |s| s.f1),
                MetricKind::Accuracy => match self {
                    Instance::Model { folded: Some(z), .. } => folded_accuracy(z, w),
                    _ => f64::NAN,
                },
            },
        }
    }
}

pub fn build_instance(spec: &ProblemSpec, data_seed: u64) -> Result<Instance, HarnessError> {
    Ok(match *spec {
        ProblemSpec::Ridge { n, p, sigma, lambda } => {
            let problem = generate_regression::<f64>(n, p, sigma, data_seed)?
                .problem
                .with_regularizer(Regularizer::SquaredL2, lambda);
            let truth = problem.solve_exact()?;
            Instance::Data { problem, truth, metric: MetricKind::RelativeError }
        }
        ProblemSpec::Lasso { n, p, nnz, sigma, lambda } => {
            let inst = generate_sparse_regression::<f64>(n, p, nnz, 1.0, sigma, data_seed)?;
            let problem = inst.problem.with_regularizer(Regularizer::L1, lambda);
            Instance::Data { problem, truth: inst.w_star_true, metric: MetricKind::F1 }
        }
        ProblemSpec::LeastSquares { n, p, sigma } => {
            let inst = generate_regression::<f64>(n, p, sigma, data_seed)?;
            let problem = ModelParallelProblem::new(
                inst.problem.x().clone(),
                Phi::LeastSquares { y: inst.problem.y().to_vec() },
            )?;
            let truth = problem.solve_reference(REFERENCE_TOL, 100)?;
            Instance::Model { problem, truth, folded: None, metric: MetricKind::RelativeError }
        }
        ProblemSpec::Logistic { n, p, lambda } => {
            let inst = generate_logistic::<f64>(n, p, lambda, data_seed)?;
            Instance::Model {
                problem: inst.problem,
                truth: inst.w_true,
                folded: Some(inst.folded),
                metric: MetricKind::Accuracy,
            }
        }
    })
}

/// Smallest power of two `v` with `v(v−1)/2 ≥ dim`.
pub fn steiner_order(dim: usize) -> usize {
    let mut v = 2;
    while v * (v - 1) / 2 < dim {
        v *= 2;
    }
    v
}

/// Concrete frame parameters for encoding a vector of length `dim`.
pub fn frame_spec(choice: &FrameChoice, dim: usize, frame_seed: u64) -> Result<FrameSpec, HarnessError> {
    Ok(match *choice {
        FrameChoice::Steiner { v, split_blocks } => {
            let v = v.unwrap_or_else(|| steiner_order(dim));
            let full = v * (v - 1) / 2;
            if full < dim {
                return Err(HarnessError::Config(format!(
                    "Steiner v = {v} encodes {full} coordinates, fewer than {dim}"
                )));
            }
            FrameSpec::Steiner {
                v,
                columns: (full > dim).then_some(dim),
                split_blocks,
                seed: frame_seed,
            }
        }
        FrameChoice::HaarSubsampled { beta } => {
            let order = dim * beta as usize;
            if !order.is_power_of_two() {
                return Err(HarnessError::Config(format!(
                    "Haar frames need n·β = {order} to be a power of two"
                )));
            }
            FrameSpec::HaarSubsampled { order, beta, seed: frame_seed }
        }
        FrameChoice::HadamardRandomized { beta } => FrameSpec::HadamardRandomized { n: dim, beta, seed: frame_seed },
        FrameChoice::Gaussian { beta } => FrameSpec::Gaussian { n: dim, beta, seed: frame_seed },
        FrameChoice::Identity => FrameSpec::Identity { n: dim },
        FrameChoice::Replication { beta } => FrameSpec::Replication { n: dim, beta },
    })
}

pub fn build_frame(cfg: &ExperimentConfig) -> Result<Frame<f64>, HarnessError> {
    let spec = frame_spec(&cfg.frame, cfg.problem.encoded_dim(), cfg.seeds.frame_seed)?;
    Ok(spec.build::<f64>(cfg.cluster.m)?)
}

/// Scripted delays from CSV: one row per iteration, one column per worker.
pub fn load_scripted_csv(path: &Path, m: usize) -> Result<Vec<Vec<f64>>, HarnessError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_path(path)?;
    let mut rows = Vec::new();
    for (t, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row: Vec<f64> = rec
            .iter()
            .map(|s| s.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| HarnessError::Config(format!("{}: row {t}: {e}", path.display())))?;
        if row.len() != m {
            return Err(HarnessError::Config(format!(
                "{}: row {t} has {} columns, expected {m}",
                path.display(),
                row.len()
            )));
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(HarnessError::Config(format!("{} holds no delays", path.display())));
    }
    Ok(rows)
}

pub fn build_delays(cfg: &ExperimentConfig, repetition: usize) -> Result<DelayModel, HarnessError> {
    let kind = match &cfg.cluster.scripted_csv {
        Some(path) => DelayKind::Scripted { delays: load_scripted_csv(path, cfg.cluster.m)? },
        None => cfg.cluster.delay.clone(),
    };
    let model = DelayModel::new(kind, cfg.seeds.delay_seed.wrapping_add(repetition as u64));
    model.validate()?;
    Ok(model)
}

fn epsilon_for(frame: &Frame<f64>, k: usize, source: EpsilonSource, seed: u64) -> Result<f64, HarnessError> {
    if k == frame.m() {
        return Ok(brip_estimate(frame, k, &BripMode::Exhaustive)?.epsilon);
    }
    Ok(match source {
        EpsilonSource::Zero => 0.0,
        EpsilonSource::Sampled => brip_estimate(frame, k, &BripMode::Sampled { trials: EPS_TRIALS, seed })?.safety_epsilon(),
        EpsilonSource::Exhaustive => brip_estimate(frame, k, &BripMode::Exhaustive)?.epsilon,
    })
}

/// Everything a single run produced.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SchemeOutcome {
    pub name: String,
    pub k: usize,
    pub alpha: f64,
    pub epsilon: f64,
    pub metric: MetricKind,
    pub trace: RunTrace,
    pub wall_seconds: f64,
}

fn initial_point(cfg: &ExperimentConfig, dim: usize) -> Vec<f64> {
    match cfg.solver.init {
        InitChoice::Zero => vec![0.0; dim],
        InitChoice::Random => {
            use rand::SeedableRng;
            use rand_distr::{Distribution, StandardNormal};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(cfg.seeds.solver_seed);
            (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect()
        }
    }
}

/// Run one configuration (one repetition) end to end.
pub fn run_config(cfg: &ExperimentConfig, repetition: usize, asynchronous: bool) -> Result<SchemeOutcome, HarnessError> {
    let start = Instant::now();
    let instance = build_instance(&cfg.problem, cfg.seeds.data_seed)?;
    let frame = build_frame(cfg)?;
    let delays = build_delays(cfg, repetition)?;
    let k = cfg.cluster.resolved_k()?;
    let name = cfg.output.name.clone().unwrap_or_else(|| "run".into());
    let eps = if cfg.solver.alpha.is_some() && cfg.solver.algorithm != Algorithm::Lbfgs {
        f64::NAN
    } else {
        epsilon_for(&frame, k, cfg.solver.epsilon_source, cfg.seeds.frame_seed)?
    };
    let zeta = cfg.solver.zeta;
    let metric = |w: &[f64]| instance.metric(w);
    let mut run = RunConfig::new(cfg.solver.algorithm, k, cfg.solver.iterations, 0.0);
    run.adaptive_k = cfg.cluster.adaptive_k.then_some(cfg.cluster.overlap_rule);
    run.rho = cfg.solver.rho;
    run.sigma_mem = cfg.solver.sigma_mem;
    run.compute_cost = cfg.cluster.compute_cost;
    run.interrupt_fill = InterruptFill::Nan;
    run.strict_prox = cfg.solver.strict_prox;

    let trace = match &instance {
        Instance::Data { problem, .. } => {
            let consts = TheoremConstants::estimate(problem, if eps.is_nan() { 0.0 } else { eps });
            run.m_smooth = Some(consts.m_smooth);
            run.alpha = cfg.solver.alpha.unwrap_or_else(|| match cfg.solver.algorithm {
                Algorithm::Prox => 0.99 * (2.0 * zeta / (consts.m_smooth * (1.0 + eps))).min(1.0 / consts.m_smooth),
                _ => consts.gd_alpha(zeta),
            });
            let shards = DataShards::encode(problem, &frame)?;
            let w0 = initial_point(cfg, problem.p());
            run_data(problem, &shards, frame.replication(), &run, &delays, w0, Some(&metric))?
        }
        Instance::Model { problem, .. } => {
            let l = problem.smoothness();
            run.alpha = cfg
                .solver
                .alpha
                .unwrap_or_else(|| 0.99 * zeta / (l * (1.0 + if eps.is_nan() { 0.0 } else { eps })));
            let shards = ModelShards::encode(problem, &frame)?;
            if asynchronous {
                let acfg = AsyncConfig { alpha: run.alpha, horizon: f64::INFINITY, max_events: cfg.solver.iterations };
                let tr = async_bcd_baseline(problem, &shards, &frame, &delays, &acfg)?;
                let m = frame.m();
                RunTrace {
                    rows: tr
                        .points
                        .iter()
                        .enumerate()
                        .map(|(t, p)| TraceRow {
                            t: t + 1,
                            sim_time: p.sim_time,
                            k: p.committed.len(),
                            active_mask: mask_hex(&p.committed, m),
                            objective: p.objective,
                            metric: f64::NAN,
                            alpha: run.alpha,
                            notes: String::new(),
                            gathers: Vec::new(),
                        })
                        .collect(),
                    initial_objective: tr.initial_objective,
                    initial_metric: f64::NAN,
                    participation: tr.update_counts.clone(),
                    fault: None,
                    final_w: tr.final_w.clone(),
                }
            } else {
                run_model(problem, &shards, &frame, &run, &delays, Some(&metric))?
            }
        }
    };
    if let Some(fault) = &trace.fault {
        log::error!("{name}: {fault}");
    }
    Ok(SchemeOutcome {
        name,
        k,
        alpha: run.alpha,
        epsilon: eps,
        metric: instance.metric_kind(),
        trace,
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Schemes of a `compare` config, run in parallel; each run is isolated.
pub fn run_schemes(cfg: &ExperimentConfig, repetition: usize) -> Result<Vec<SchemeOutcome>, HarnessError> {
    let schemes: Vec<SchemeSpec> = if cfg.schemes.is_empty() {
        vec![SchemeSpec {
            name: cfg.output.name.clone().unwrap_or_else(|| "run".into()),
            frame: None,
            k: None,
            eta: None,
            adaptive_k: None,
            algorithm: None,
            asynchronous: false,
        }]
    } else {
        cfg.schemes.clone()
    };
    schemes
        .par_iter()
        .map(|s| run_config(&cfg.apply_scheme(s), repetition, s.asynchronous))
        .collect()
}
