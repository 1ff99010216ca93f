//! Encoded block coordinate descent (model parallel).
//!
//! Worker `i` owns `v_i` and `M_i = X Ŝ_iᵀ`. Every iteration it steps
//! tentatively, `v_i' = v_i − α∇_i g̃`, and reports `u_i' = M_i v_i'` along
//! with a checksum of the `u_i` it believes the master holds. The master
//! accepts `u_i'` for `i ∈ A_t`, keeps `u_i` otherwise, and broadcasts the
//! flags `I_{i,t}` so workers commit or roll back.

use super::StepReport;
use crate::error::{Error, Result};
use crate::linalg::axpy;
use crate::loss::{ModelShards, Phi};
use crate::scalar::Scalar;

/// FNV-1a over the bit patterns of `u`.
pub fn checksum<T: Scalar>(u: &[T]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &x in u {
        for b in x.to_f64_lossy().to_bits().to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    h
}

#[derive(Clone, Debug, PartialEq)]
pub struct BcdState<T> {
    /// Committed worker blocks `v_i`.
    pub v: Vec<Vec<T>>,
    /// Master cache `u_i = M_i v_i`.
    pub u: Vec<Vec<T>>,
    pub checks: Vec<u64>,
    /// `I_{i,t−1}`.
    pub flags: Vec<bool>,
    pub t: usize,
}

impl<T: Scalar> BcdState<T> {
    /// All blocks at zero.
    pub fn zeros(shards: &ModelShards<T>, out_dim: usize) -> Self {
        let m = shards.m();
        let v: Vec<Vec<T>> = (0..m).map(|i| vec![T::zero(); shards.block_len(i)]).collect();
        let u: Vec<Vec<T>> = vec![vec![T::zero(); out_dim]; m];
        let checks = u.iter().map(|x| checksum(x)).collect();
        Self { v, u, checks, flags: vec![true; m], t: 0 }
    }

    /// `Σ_j u_j` in worker order.
    pub fn aggregate(&self) -> Vec<T> {
        let mut s = vec![T::zero(); self.u[0].len()];
        for u in &self.u {
            axpy(T::one(), u, &mut s);
        }
        s
    }

    /// `z̃_i = Σ_{j≠i} u_j`.
    pub fn z_tilde(&self, i: usize) -> Vec<T> {
        let mut s = vec![T::zero(); self.u[0].len()];
        for (j, u) in self.u.iter().enumerate() {
            if j != i {
                axpy(T::one(), u, &mut s);
            }
        }
        s
    }

    /// `g̃(v) = φ(Σ u_j)`.
    pub fn objective(&self, phi: &Phi<T>) -> T {
        phi.value(&self.aggregate())
    }

    pub fn flat_v(&self) -> Vec<T> {
        self.v.concat()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BcdWorkerReport<T> {
    pub worker: usize,
    pub v_new: Vec<T>,
    pub u_new: Vec<T>,
    /// Checksum of `M_i v_i` for the worker's committed `v_i`.
    pub base_check: u64,
    pub step: Vec<T>,
}

/// One tentative worker update.
pub fn bcd_worker<T: Scalar>(
    shards: &ModelShards<T>,
    phi: &Phi<T>,
    i: usize,
    v_i: &[T],
    z_tilde: &[T],
    alpha: T,
) -> Result<BcdWorkerReport<T>> {
    let base = shards.contribution(i, v_i)?;
    let grad = shards.partial_gradient(phi, i, v_i, z_tilde)?;
    let step: Vec<T> = grad.iter().map(|&g| -alpha * g).collect();
    let mut v_new = v_i.to_vec();
    axpy(T::one(), &step, &mut v_new);
    let u_new = shards.contribution(i, &v_new)?;
    Ok(BcdWorkerReport { worker: i, v_new, u_new, base_check: checksum(&base), step })
}

/// What the master sends back: acceptance flags and fresh `z̃_i`.
#[derive(Clone, Debug, PartialEq)]
pub struct BcdBroadcast<T> {
    pub flags: Vec<bool>,
    pub z_tilde: Vec<Vec<T>>,
}

/// Master update from the reports of `active` (indexed by worker).
pub fn bcd_step<T: Scalar>(
    state: &BcdState<T>,
    active: &[usize],
    reports: &[BcdWorkerReport<T>],
    alpha: T,
) -> Result<(BcdState<T>, BcdBroadcast<T>, StepReport<T>)> {
    if active.is_empty() {
        return Err(Error::EmptySubset);
    }
    let m = state.v.len();
    let mut next = state.clone();
    let mut flags = vec![false; m];
    let mut direction = Vec::new();
    let mut idx = active.to_vec();
    idx.sort_unstable();
    for &i in &idx {
        let rep = &reports[i];
        if rep.worker != i || rep.base_check != state.checks[i] {
            return Err(Error::ConsistencyFault(format!(
                "worker {i} reported against a u the master never committed"
            )));
        }
        flags[i] = true;
        next.u[i] = rep.u_new.clone();
        next.checks[i] = checksum(&rep.u_new);
        next.v[i] = rep.v_new.clone();
        direction.extend(rep.step.iter().copied());
    }
    next.flags = flags.clone();
    next.t += 1;
    let z_tilde = (0..m).map(|i| next.z_tilde(i)).collect();
    Ok((
        next,
        BcdBroadcast { flags, z_tilde },
        StepReport { direction, alpha, active: idx, line_search: None, notes: Vec::new() },
    ))
}
