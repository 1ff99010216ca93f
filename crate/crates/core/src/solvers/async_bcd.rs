//! Simulated asynchronous block coordinate descent, the baseline the encoded
//! scheme is compared against. Worker `i` reads the aggregate when it starts a
//! job, finishes after its sampled delay and commits at once against that
//! stale read. Completions with equal timestamps commit as one batch, so zero
//! delays reproduce synchronous BCD with `k = m`.

use serde::{Deserialize, Serialize};

use super::bcd::{bcd_worker, BcdState};
use crate::cluster::{sample_iteration_delays, DelayModel};
use crate::error::{Error, Result};
use crate::frames::Frame;
use crate::loss::{ModelParallelProblem, ModelShards};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AsyncConfig {
    pub alpha: f64,
    /// Simulated seconds.
    pub horizon: f64,
    /// Commit batches; bounds zero-delay runs.
    pub max_events: usize,
}

/// One commit batch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AsyncPoint {
    pub sim_time: f64,
    pub objective: f64,
    pub committed: Vec<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AsyncTrace {
    pub points: Vec<AsyncPoint>,
    pub initial_objective: f64,
    pub update_counts: Vec<usize>,
    /// Largest number of batches committed between a read and its commit.
    pub max_staleness: usize,
    pub final_w: Vec<f64>,
}

impl AsyncTrace {
    /// Share of updates per worker.
    pub fn fractions(&self) -> Vec<f64> {
        let total: usize = self.update_counts.iter().sum();
        self.update_counts.iter().map(|&c| c as f64 / total.max(1) as f64).collect()
    }

    /// Max over min update count; infinite if some worker never finished.
    pub fn skew(&self) -> f64 {
        let max = self.update_counts.iter().copied().max().unwrap_or(0) as f64;
        let min = self.update_counts.iter().copied().min().unwrap_or(0) as f64;
        max / min
    }

    pub fn final_objective(&self) -> f64 {
        self.points.last().map_or(self.initial_objective, |p| p.objective)
    }
}

struct Job<T> {
    finish: f64,
    /// Aggregate of the other blocks at read time.
    z_tilde: Vec<T>,
    version: usize,
}

pub fn async_bcd_baseline<T: Scalar>(
    problem: &ModelParallelProblem<T>,
    shards: &ModelShards<T>,
    frame: &Frame<T>,
    delays: &DelayModel,
    cfg: &AsyncConfig,
) -> Result<AsyncTrace> {
    delays.validate()?;
    if !(cfg.horizon >= 0.0) || !cfg.alpha.is_finite() {
        return Err(Error::InvalidParameter("async run needs a finite step and horizon".into()));
    }
    let m = shards.m();
    let phi = problem.phi();
    let alpha = T::of(cfg.alpha);
    let mut state = BcdState::zeros(shards, problem.x().rows());
    let mut counts = vec![0usize; m];
    let mut trace = AsyncTrace {
        initial_objective: state.objective(phi).to_f64_lossy(),
        ..Default::default()
    };
    // job j of worker i uses the delay vector drawn for iteration j
    let delay_of = |i: usize, j: usize| -> Result<f64> {
        Ok(sample_iteration_delays(delays, m, j, 0)?[i])
    };
    let mut version = 0usize;
    let mut jobs: Vec<Job<T>> = (0..m)
        .map(|i| Ok(Job { finish: delay_of(i, 0)?, z_tilde: state.z_tilde(i), version }))
        .collect::<Result<_>>()?;

    for _ in 0..cfg.max_events {
        let now = jobs.iter().map(|j| j.finish).fold(f64::INFINITY, f64::min);
        if now > cfg.horizon {
            break;
        }
        let batch: Vec<usize> = (0..m).filter(|&i| jobs[i].finish == now).collect();
        let mut updates = Vec::with_capacity(batch.len());
        for &i in &batch {
            let rep = bcd_worker(shards, phi, i, &state.v[i], &jobs[i].z_tilde, alpha)?;
            trace.max_staleness = trace.max_staleness.max(version - jobs[i].version);
            updates.push(rep);
        }
        for rep in updates {
            let i = rep.worker;
            state.v[i] = rep.v_new;
            state.u[i] = rep.u_new;
            counts[i] += 1;
        }
        version += 1;
        state.t += 1;
        let g = state.objective(phi).to_f64_lossy();
        trace.points.push(AsyncPoint { sim_time: now, objective: g, committed: batch.clone() });
        if !g.is_finite() || g > crate::cluster::DIVERGENCE_GUARD {
            return Err(Error::Divergence { value: g, guard: crate::cluster::DIVERGENCE_GUARD });
        }
        for &i in &batch {
            jobs[i] = Job { finish: now + delay_of(i, counts[i])?, z_tilde: state.z_tilde(i), version };
        }
    }
    trace.update_counts = counts;
    trace.final_w = shards.lift(frame, &state.flat_v())?.iter().map(|x| x.to_f64_lossy()).collect();
    Ok(trace)
}

/// Synchronous full-participation BCD, for comparison in tests.
#[cfg(test)]
fn sync_bcd<T: Scalar>(shards: &ModelShards<T>, phi: &crate::loss::Phi<T>, out: usize, alpha: T, iters: usize) -> Vec<T> {
    let m = shards.m();
    let all: Vec<usize> = (0..m).collect();
    let mut state = BcdState::zeros(shards, out);
    for _ in 0..iters {
        let reps: Vec<_> = (0..m)
            .map(|i| bcd_worker(shards, phi, i, &state.v[i], &state.z_tilde(i), alpha).unwrap())
            .collect();
        state = super::bcd_step(&state, &all, &reps, alpha).unwrap().0;
    }
    state.aggregate()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cluster::{DelayKind, DelayModel};
    use crate::frames::FrameSpec;
    use crate::linalg::Matrix;
    use crate::loss::Phi;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn setup() -> (ModelParallelProblem<f64>, Frame<f64>, ModelShards<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = Matrix::gaussian(12, 8, 1.0 / 12f64.sqrt(), &mut rng);
        let y: Vec<f64> = (0..12).map(|i| (i as f64 * 0.7).sin()).collect();
        let problem = ModelParallelProblem::new(x, Phi::LeastSquares { y }).unwrap();
        let frame = FrameSpec::Gaussian { n: 8, beta: 2, seed: 1 }.build::<f64>(4).unwrap();
        let shards = ModelShards::encode(&problem, &frame).unwrap();
        (problem, frame, shards)
    }

    #[test]
    fn zero_delay_matches_synchronous_bcd() {
        let (problem, frame, shards) = setup();
        let zero = DelayModel::new(DelayKind::Scripted { delays: vec![vec![0.0; 4]] }, 0);
        let cfg = AsyncConfig { alpha: 0.1, horizon: 1.0, max_events: 25 };
        let tr = async_bcd_baseline(&problem, &shards, &frame, &zero, &cfg).unwrap();
        assert_eq!(tr.update_counts, vec![25; 4]);
        assert_eq!(tr.max_staleness, 0);
        let s = sync_bcd(&shards, problem.phi(), 12, 0.1, 25);
        let g_sync = problem.phi().value(&s);
        assert!((tr.final_objective() - g_sync).abs() <= 1e-12 * g_sync.abs().max(1.0));
    }

    #[test]
    fn slow_worker_updates_less() {
        let (problem, frame, shards) = setup();
        let d = DelayModel::new(DelayKind::Scripted { delays: vec![vec![1.0, 1.0, 1.0, 10.0]] }, 0);
        let cfg = AsyncConfig { alpha: 0.1, horizon: 50.0, max_events: 1000 };
        let tr = async_bcd_baseline(&problem, &shards, &frame, &d, &cfg).unwrap();
        assert_eq!(tr.update_counts, vec![50, 50, 50, 5]);
        assert!((tr.skew() - 10.0).abs() < 1e-12);
        assert!(tr.max_staleness >= 9);
    }
}
