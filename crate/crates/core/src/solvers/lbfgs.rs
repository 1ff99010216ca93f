//! Encoded L-BFGS. Curvature pairs use only workers present in two
//! consecutive active sets, so both gradient differences are taken over the
//! same encoded blocks.

use std::collections::VecDeque;

use super::{DataObjective, SolverState, StepReport};
use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, norm_sq, sub, Matrix};
use crate::loss::Regularizer;
use crate::scalar::Scalar;

/// Pairs with `rᵀu ≤ tol·‖u‖²` are skipped.
pub const CURVATURE_REJECT_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct LbfgsHistory<T> {
    pub memory: usize,
    /// `(u_j, r_j)`, oldest first.
    pub pairs: VecDeque<(Vec<T>, Vec<T>)>,
    /// Scale of `B^{(0)} = (rᵀu)/(rᵀr)·I` from the latest accepted pair.
    pub gamma: Option<T>,
    pub prev_w: Option<Vec<T>>,
    /// Gradients `g_i(w_{t−1})` for `i ∈ A_{t−1}`.
    pub prev_partials: Vec<Option<Vec<T>>>,
}

impl<T: Scalar> LbfgsHistory<T> {
    pub fn new(memory: usize, m: usize) -> Self {
        Self { memory, pairs: VecDeque::new(), gamma: None, prev_w: None, prev_partials: vec![None; m] }
    }

    /// `B_t q` by the two-loop recursion.
    pub fn apply(&self, q: &[T]) -> Vec<T> {
        let mut q = q.to_vec();
        let mut alphas = Vec::with_capacity(self.pairs.len());
        for (u, r) in self.pairs.iter().rev() {
            let rho = T::one() / dot(r, u);
            let a = rho * dot(u, &q);
            axpy(-a, r, &mut q);
            alphas.push((a, rho));
        }
        let gamma = self.gamma.unwrap_or(T::one());
        q.iter_mut().for_each(|e| *e *= gamma);
        for ((u, r), (a, rho)) in self.pairs.iter().zip(alphas.into_iter().rev()) {
            let b = rho * dot(r, &q);
            axpy(a - b, u, &mut q);
        }
        q
    }

    /// Dense `B_t` (diagnostics).
    pub fn dense(&self, p: usize) -> Matrix<T> {
        let mut out = Matrix::zeros(p, p);
        let mut e = vec![T::zero(); p];
        for j in 0..p {
            e[j] = T::one();
            for (i, v) in self.apply(&e).into_iter().enumerate() {
                out[(i, j)] = v;
            }
            e[j] = T::zero();
        }
        // symmetrize away rounding
        Matrix::from_fn(p, p, |i, j| T::of(0.5) * (out[(i, j)] + out[(j, i)]))
    }
}

/// First half of an iteration: everything that needs only `A_t`.
#[derive(Clone, Debug)]
pub struct LbfgsDraft<T> {
    pub gradient: Vec<T>,
    pub direction: Vec<T>,
    pub history: LbfgsHistory<T>,
    pub active: Vec<usize>,
    pub notes: Vec<String>,
}

pub fn lbfgs_direction<T: Scalar>(
    state: &SolverState<T, LbfgsHistory<T>>,
    obj: &DataObjective<'_, T>,
    active: &[usize],
    partials: &[Vec<T>],
) -> Result<LbfgsDraft<T>> {
    if !obj.reg.is_smooth() {
        return Err(Error::NonSmoothRegularizer("l1"));
    }
    let g = obj.smooth_gradient(&state.w, active, partials)?;
    let mut hist = state.history.clone();
    let mut notes = Vec::new();
    let mut fallback = false;
    if let Some(prev_w) = &hist.prev_w {
        let mut overlap: Vec<usize> =
            active.iter().copied().filter(|&i| hist.prev_partials[i].is_some()).collect();
        overlap.sort_unstable();
        if overlap.is_empty() {
            log::info!("t={}: empty overlap, gradient step", state.t);
            notes.push("empty overlap: gradient step".into());
            fallback = true;
        } else {
            let u = sub(&state.w, prev_w);
            let mut r = vec![T::zero(); u.len()];
            for &i in &overlap {
                let prev = hist.prev_partials[i].as_ref().expect("filtered");
                axpy(T::one(), &sub(&partials[i], prev), &mut r);
            }
            let s = obj.shards.subset_scale(overlap.len());
            r.iter_mut().for_each(|e| *e *= s);
            if obj.reg == Regularizer::SquaredL2 {
                axpy(obj.lambda, &u, &mut r);
            }
            let ru = dot(&r, &u);
            if ru > T::of(CURVATURE_REJECT_TOL) * norm_sq(&u) {
                hist.gamma = Some(ru / norm_sq(&r));
                if hist.memory > 0 {
                    hist.pairs.push_back((u, r));
                    while hist.pairs.len() > hist.memory {
                        hist.pairs.pop_front();
                    }
                }
            } else {
                log::info!("t={}: curvature pair rejected (rᵀu = {ru})", state.t);
                notes.push("curvature pair skipped".into());
            }
        }
    }
    let mut d: Vec<T> = if fallback { g.clone() } else { hist.apply(&g) };
    d.iter_mut().for_each(|e| *e = -*e);
    if !fallback && dot(&d, &g) >= T::zero() && norm_sq(&g) > T::zero() {
        notes.push("non-descent direction: gradient step".into());
        d = g.iter().map(|&e| -e).collect();
    }
    hist.prev_w = Some(state.w.clone());
    hist.prev_partials = vec![None; hist.prev_partials.len()];
    for &i in active {
        hist.prev_partials[i] = Some(partials[i].clone());
    }
    Ok(LbfgsDraft { gradient: g, direction: d, history: hist, active: active.to_vec(), notes })
}

/// Second half: exact line search over `D_t` with back-off `rho`.
/// `curvatures[i] = ‖S_iXd‖²` for `i ∈ line_active`.
pub fn lbfgs_commit<T: Scalar>(
    state: &SolverState<T, LbfgsHistory<T>>,
    draft: LbfgsDraft<T>,
    obj: &DataObjective<'_, T>,
    line_active: &[usize],
    curvatures: &[T],
    rho: T,
) -> Result<(SolverState<T, LbfgsHistory<T>>, StepReport<T>)> {
    if line_active.is_empty() {
        return Err(Error::EmptySubset);
    }
    let mut idx = line_active.to_vec();
    idx.sort_unstable();
    let mut curv = T::zero();
    for &i in &idx {
        curv += curvatures[i];
    }
    let denom = obj.shards.subset_scale(idx.len()) * curv + obj.reg_curvature(&draft.direction);
    let slope = dot(&draft.direction, &draft.gradient);
    let alpha = if denom > T::zero() { -rho * slope / denom } else { T::zero() };
    let mut w = state.w.clone();
    axpy(alpha, &draft.direction, &mut w);
    Ok((
        SolverState { w, t: state.t + 1, history: draft.history },
        StepReport {
            direction: draft.direction,
            alpha,
            active: draft.active,
            line_search: Some(line_active.to_vec()),
            notes: draft.notes,
        },
    ))
}

/// Both halves, with worker curvatures computed from the shards directly.
pub fn lbfgs_step<T: Scalar>(
    state: &SolverState<T, LbfgsHistory<T>>,
    obj: &DataObjective<'_, T>,
    active: &[usize],
    partials: &[Vec<T>],
    line_active: &[usize],
    rho: T,
) -> Result<(SolverState<T, LbfgsHistory<T>>, StepReport<T>)> {
    let draft = lbfgs_direction(state, obj, active, partials)?;
    let mut curv = vec![T::zero(); obj.shards.m()];
    for &i in line_active {
        curv[i] = obj.shards.shard(i).curvature(&draft.direction)?;
    }
    lbfgs_commit(state, draft, obj, line_active, &curv, rho)
}
