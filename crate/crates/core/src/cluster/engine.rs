//! The event loop. Single-threaded and deterministic: worker results are
//! consumed in delay order, never in computation order, and aggregates are
//! summed by worker index.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::delay::{sample_iteration_delays, DelayModel};
use super::trace::{mask_hex, RunTrace, TraceRow};
use super::{arrival_order, gather_fastest_k, IterationOutcome, DIVERGENCE_GUARD};
use crate::error::{Error, Result};
use crate::frames::{Frame, ReplicationMeta};
use crate::loss::{DataParallelProblem, DataShards, ModelParallelProblem, ModelShards};
use crate::scalar::Scalar;
use crate::solvers::{
    adaptive_k, bcd_step, bcd_worker, check_prox_alpha, gd_step, lbfgs_commit, lbfgs_direction,
    prox_step, Algorithm, BcdState, DataObjective, LbfgsHistory, OverlapRule, SolverState,
};

/// What interrupted workers leave in the partials buffer.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InterruptFill {
    /// NaN vectors: any leak into a step poisons the trace.
    #[default]
    Nan,
    /// Honest values, as if the interrupt arrived too late.
    Computed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub algorithm: Algorithm,
    pub k: usize,
    #[serde(default)]
    pub adaptive_k: Option<OverlapRule>,
    pub iterations: usize,
    /// Fixed step for GD, prox and BCD; ignored by L-BFGS.
    #[serde(default)]
    pub alpha: f64,
    /// L-BFGS line-search back-off.
    #[serde(default = "default_rho")]
    pub rho: f64,
    #[serde(default = "default_sigma")]
    pub sigma_mem: usize,
    /// Seconds per (row x column) of worker data, times 1e-9.
    #[serde(default)]
    pub compute_cost: f64,
    #[serde(default)]
    pub interrupt_fill: InterruptFill,
    /// Prox steps with `α ≥ 1/M` error out instead of warning.
    #[serde(default)]
    pub strict_prox: bool,
    /// `M` for the prox guard; skipped when absent.
    #[serde(default)]
    pub m_smooth: Option<f64>,
}

fn default_rho() -> f64 {
    1.0
}

fn default_sigma() -> usize {
    10
}

impl RunConfig {
    pub fn new(algorithm: Algorithm, k: usize, iterations: usize, alpha: f64) -> Self {
        Self {
            algorithm,
            k,
            adaptive_k: None,
            iterations,
            alpha,
            rho: default_rho(),
            sigma_mem: default_sigma(),
            compute_cost: 0.0,
            interrupt_fill: InterruptFill::Nan,
            strict_prox: false,
            m_smooth: None,
        }
    }
}

struct Gatherer<'a> {
    model: &'a DelayModel,
    m: usize,
    cost: Vec<f64>,
    replication: Option<&'a ReplicationMeta>,
}

impl Gatherer<'_> {
    fn delays(&self, t: usize, phase: u64) -> Result<Vec<f64>> {
        let mut d = sample_iteration_delays(self.model, self.m, t, phase)?;
        for (di, ci) in d.iter_mut().zip(&self.cost) {
            *di += ci;
        }
        Ok(d)
    }

    fn gather(
        &self,
        t: usize,
        phase: u64,
        k: usize,
        prev: Option<&[usize]>,
        rule: Option<OverlapRule>,
        beta: f64,
    ) -> Result<IterationOutcome> {
        let d = self.delays(t, phase)?;
        let k = match (rule, prev) {
            (Some(rule), Some(prev)) => adaptive_k(&arrival_order(&d), prev, beta, self.m, rule).max(k),
            _ => k,
        };
        gather_fastest_k(&d, k, self.replication)
    }
}

fn to_f64<T: Scalar>(v: &[T]) -> Vec<f64> {
    v.iter().map(|x| x.to_f64_lossy()).collect()
}

fn guard(value: f64) -> Result<()> {
    if !value.is_finite() || value > DIVERGENCE_GUARD {
        return Err(Error::Divergence { value, guard: DIVERGENCE_GUARD });
    }
    Ok(())
}

type Metric<'a, T> = Option<&'a (dyn Fn(&[T]) -> f64 + Sync)>;

/// Simulate a data-parallel run from `w0`.
#[allow(clippy::too_many_arguments)]
pub fn run_data<T: Scalar>(
    problem: &DataParallelProblem<T>,
    shards: &DataShards<T>,
    replication: Option<&ReplicationMeta>,
    cfg: &RunConfig,
    delays: &DelayModel,
    w0: Vec<T>,
    metric: Metric<'_, T>,
) -> Result<RunTrace> {
    delays.validate()?;
    let m = shards.m();
    if cfg.k == 0 || cfg.k > m {
        return Err(Error::InvalidParameter(format!("k = {} outside 1..={m}", cfg.k)));
    }
    if cfg.algorithm == Algorithm::Bcd {
        return Err(Error::InvalidParameter("BCD runs need a model-parallel problem".into()));
    }
    let mut prox_note = None;
    if cfg.algorithm == Algorithm::Prox {
        if let Some(msmooth) = cfg.m_smooth {
            prox_note = check_prox_alpha(cfg.alpha, msmooth, cfg.strict_prox)?;
        }
    }
    let obj = DataObjective::new(shards, problem.lambda(), problem.reg());
    let gatherer = Gatherer {
        model: delays,
        m,
        cost: (0..m)
            .map(|i| cfg.compute_cost * (shards.block_len(i) * shards.p()) as f64 * 1e-9)
            .collect(),
        replication,
    };
    let metric_of = |w: &[T]| metric.map_or(f64::NAN, |f| f(w));
    let mut trace = RunTrace {
        initial_objective: problem.objective(&w0)?.to_f64_lossy(),
        initial_metric: metric_of(&w0),
        participation: vec![0; m],
        ..Default::default()
    };
    let mut state = SolverState::new(w0);
    let mut lstate = SolverState { w: state.w.clone(), t: 0, history: LbfgsHistory::new(cfg.sigma_mem, m) };
    let alpha = T::of(cfg.alpha);
    let mut sim_time = 0.0;
    let mut prev: Option<Vec<usize>> = None;
    let beta = shards.beta();

    for t in 0..cfg.iterations {
        let result: Result<(f64, Vec<f64>, Vec<usize>, usize, Vec<String>)> = (|| {
            let out = gatherer.gather(t, 0, cfg.k, prev.as_deref(), cfg.adaptive_k, beta)?;
            let w_now = if cfg.algorithm == Algorithm::Lbfgs { &lstate.w } else { &state.w };
            let partials = worker_partials(shards, w_now, &out, cfg.interrupt_fill)?;
            let mut gathers = vec![out.elapsed];
            let mut notes = Vec::new();
            let step_alpha = match cfg.algorithm {
                Algorithm::Gd => {
                    let (s, r) = gd_step(&state, &obj, &out.effective, &partials, alpha)?;
                    state = s;
                    r.alpha
                }
                Algorithm::Prox => {
                    let (s, r) = prox_step(&state, &obj, &out.effective, &partials, alpha)?;
                    state = s;
                    if t == 0 {
                        notes.extend(prox_note.clone());
                    }
                    r.alpha
                }
                Algorithm::Lbfgs => {
                    let draft = lbfgs_direction(&lstate, &obj, &out.effective, &partials)?;
                    let line = gatherer.gather(t, 1, out.active.len(), None, None, beta)?;
                    gathers.push(line.elapsed);
                    let mut curv = vec![T::nan(); m];
                    for &i in &line.effective {
                        curv[i] = shards.shard(i).curvature(&draft.direction)?;
                    }
                    let rho = T::of(cfg.rho);
                    let (s, r) = lbfgs_commit(&lstate, draft, &obj, &line.effective, &curv, rho)?;
                    lstate = s;
                    notes.extend(r.notes);
                    r.alpha
                }
                Algorithm::Bcd => unreachable!("rejected above"),
            };
            let k_t = out.active.len();
            Ok((step_alpha.to_f64_lossy(), gathers, out.active, k_t, notes))
        })();
        let w_now = if cfg.algorithm == Algorithm::Lbfgs { &lstate.w } else { &state.w };
        let outcome = result.and_then(|r| {
            let f = problem.objective(w_now)?.to_f64_lossy();
            guard(f)?;
            Ok((r, f))
        });
        match outcome {
            Ok(((a, gathers, active, k_t, notes), f)) => {
                for g in &gathers {
                    sim_time += g;
                }
                for &i in &active {
                    trace.participation[i] += 1;
                }
                trace.rows.push(TraceRow {
                    t: t + 1,
                    sim_time,
                    k: k_t,
                    active_mask: mask_hex(&active, m),
                    objective: f,
                    metric: metric_of(w_now),
                    alpha: a,
                    notes: notes.join("; "),
                    gathers,
                });
                prev = Some(active);
            }
            Err(e) => {
                log::error!("run stopped at t={}: {e}", t + 1);
                trace.rows.push(TraceRow {
                    t: t + 1,
                    sim_time,
                    k: 0,
                    active_mask: String::new(),
                    objective: f64::NAN,
                    metric: f64::NAN,
                    alpha: f64::NAN,
                    notes: format!("error: {e}"),
                    gathers: Vec::new(),
                });
                trace.fault = Some(e.to_string());
                break;
            }
        }
    }
    let w_final = if cfg.algorithm == Algorithm::Lbfgs { lstate.w } else { state.w };
    trace.final_w = to_f64(&w_final);
    Ok(trace)
}

fn worker_partials<T: Scalar>(
    shards: &DataShards<T>,
    w: &[T],
    out: &IterationOutcome,
    fill: InterruptFill,
) -> Result<Vec<Vec<T>>> {
    let m = shards.m();
    let mut wanted = vec![fill == InterruptFill::Computed; m];
    for &i in &out.effective {
        wanted[i] = true;
    }
    (0..m)
        .into_par_iter()
        .map(|i| {
            if wanted[i] {
                shards.shard(i).gradient(w)
            } else {
                Ok(vec![T::nan(); shards.p()])
            }
        })
        .collect()
}

/// Simulate encoded block coordinate descent from `v = 0`.
pub fn run_model<T: Scalar>(
    problem: &ModelParallelProblem<T>,
    shards: &ModelShards<T>,
    frame: &Frame<T>,
    cfg: &RunConfig,
    delays: &DelayModel,
    metric: Metric<'_, T>,
) -> Result<RunTrace> {
    delays.validate()?;
    let m = shards.m();
    if cfg.k == 0 || cfg.k > m {
        return Err(Error::InvalidParameter(format!("k = {} outside 1..={m}", cfg.k)));
    }
    if cfg.algorithm != Algorithm::Bcd {
        return Err(Error::InvalidParameter("model-parallel runs use BCD".into()));
    }
    let rows_x = problem.x().rows();
    let gatherer = Gatherer {
        model: delays,
        m,
        cost: (0..m)
            .map(|i| cfg.compute_cost * (shards.block_len(i) * rows_x) as f64 * 1e-9)
            .collect(),
        replication: frame.replication(),
    };
    let phi = problem.phi();
    let alpha = T::of(cfg.alpha);
    let mut state = BcdState::zeros(shards, rows_x);
    let lift = |s: &BcdState<T>| shards.lift(frame, &s.flat_v());
    let metric_of = |s: &BcdState<T>| -> Result<f64> {
        match metric {
            Some(f) => Ok(f(&lift(s)?)),
            None => Ok(f64::NAN),
        }
    };
    let mut trace = RunTrace {
        initial_objective: state.objective(phi).to_f64_lossy(),
        initial_metric: metric_of(&state)?,
        participation: vec![0; m],
        ..Default::default()
    };
    let mut sim_time = 0.0;
    let mut prev: Option<Vec<usize>> = None;
    for t in 0..cfg.iterations {
        let step = (|| -> Result<(IterationOutcome, BcdState<T>, f64)> {
            let out = gatherer.gather(t, 0, cfg.k, prev.as_deref(), cfg.adaptive_k, frame.beta_f64())?;
            let reports = (0..m)
                .into_par_iter()
                .map(|i| {
                    let mut rep = bcd_worker(shards, phi, i, &state.v[i], &state.z_tilde(i), alpha)?;
                    if cfg.interrupt_fill == InterruptFill::Nan && !out.effective.contains(&i) {
                        rep.u_new.iter_mut().for_each(|x| *x = T::nan());
                        rep.v_new.iter_mut().for_each(|x| *x = T::nan());
                    }
                    Ok(rep)
                })
                .collect::<Result<Vec<_>>>()?;
            let (next, _, _) = bcd_step(&state, &out.effective, &reports, alpha)?;
            let g = next.objective(phi).to_f64_lossy();
            guard(g)?;
            Ok((out, next, g))
        })();
        match step {
            Ok((out, next, g)) => {
                state = next;
                sim_time += out.elapsed;
                for &i in &out.active {
                    trace.participation[i] += 1;
                }
                trace.rows.push(TraceRow {
                    t: t + 1,
                    sim_time,
                    k: out.active.len(),
                    active_mask: mask_hex(&out.active, m),
                    objective: g,
                    metric: metric_of(&state)?,
                    alpha: cfg.alpha,
                    notes: String::new(),
                    gathers: vec![out.elapsed],
                });
                prev = Some(out.active);
            }
            Err(e) => {
                log::error!("run stopped at t={}: {e}", t + 1);
                trace.rows.push(TraceRow {
                    t: t + 1,
                    sim_time,
                    k: 0,
                    active_mask: String::new(),
                    objective: f64::NAN,
                    metric: f64::NAN,
                    alpha: f64::NAN,
                    notes: format!("error: {e}"),
                    gathers: Vec::new(),
                });
                trace.fault = Some(e.to_string());
                break;
            }
        }
    }
    trace.final_w = to_f64(&lift(&state)?);
    Ok(trace)
}
