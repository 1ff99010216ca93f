//! Master-side step rules. Each step consumes the partial results of the
//! accepted workers `A_t` and nothing else; partials of interrupted workers
//! may be present in the input and must never be read.
//!
//! Data-parallel normalization: workers return `g_i = XᵀS_iᵀS_i(Xw − y)` and
//! the master forms `g̃ = (1/(nβη)) Σ_{A_t} g_i + λ∇h(w)`.

mod adaptive;
mod async_bcd;
mod bcd;
mod gd;
mod lbfgs;
mod theory;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::axpy;
use crate::loss::{DataShards, Regularizer};
use crate::scalar::Scalar;

pub use adaptive::{adaptive_k, OverlapRule};
pub use async_bcd::{async_bcd_baseline, AsyncConfig, AsyncPoint, AsyncTrace};
pub use bcd::{bcd_step, bcd_worker, checksum, BcdBroadcast, BcdState, BcdWorkerReport};
pub use gd::{check_prox_alpha, gd_step, prox_step};
pub use lbfgs::{
    lbfgs_commit, lbfgs_direction, lbfgs_step, LbfgsDraft, LbfgsHistory, CURVATURE_REJECT_TOL,
};
pub use theory::{bcd_xi, bcd_xi_corrected, TheoremConstants};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Gd,
    Lbfgs,
    Prox,
    Bcd,
}

/// Iterate, iteration counter and algorithm-specific history.
#[derive(Clone, Debug, PartialEq)]
pub struct SolverState<T, H = ()> {
    pub w: Vec<T>,
    pub t: usize,
    pub history: H,
}

impl<T: Scalar> SolverState<T, ()> {
    pub fn new(w: Vec<T>) -> Self {
        Self { w, t: 0, history: () }
    }
}

/// What a step did.
#[derive(Clone, Debug, PartialEq)]
pub struct StepReport<T> {
    pub direction: Vec<T>,
    pub alpha: T,
    pub active: Vec<usize>,
    /// Line-search participants `D_t`, when a line search ran.
    pub line_search: Option<Vec<usize>>,
    pub notes: Vec<String>,
}

/// The encoded data-parallel objective as seen by the master.
#[derive(Clone, Copy, Debug)]
pub struct DataObjective<'a, T> {
    pub shards: &'a DataShards<T>,
    pub lambda: T,
    pub reg: Regularizer,
}

impl<'a, T: Scalar> DataObjective<'a, T> {
    pub fn new(shards: &'a DataShards<T>, lambda: T, reg: Regularizer) -> Self {
        Self { shards, lambda, reg }
    }

    /// `(1/(nβη)) Σ_{A} g_i`, summed in worker-index order.
    pub fn aggregate(&self, active: &[usize], partials: &[Vec<T>]) -> Result<Vec<T>> {
        if active.is_empty() {
            return Err(Error::EmptySubset);
        }
        let mut idx = active.to_vec();
        idx.sort_unstable();
        let mut g = vec![T::zero(); self.shards.p()];
        for &i in &idx {
            let part = partials
                .get(i)
                .ok_or_else(|| Error::InvalidParameter(format!("missing partial for worker {i}")))?;
            axpy(T::one(), part, &mut g);
        }
        let s = self.shards.subset_scale(idx.len());
        g.iter_mut().for_each(|v| *v *= s);
        Ok(g)
    }

    /// Encoded gradient including `λ∇h` (smooth `h` only).
    pub fn smooth_gradient(&self, w: &[T], active: &[usize], partials: &[Vec<T>]) -> Result<Vec<T>> {
        let mut g = self.aggregate(active, partials)?;
        let gh = self.reg.gradient(w)?;
        axpy(self.lambda, &gh, &mut g);
        Ok(g)
    }

    /// Curvature of `λh` along `d` (`λ‖d‖²` for squared L2).
    pub fn reg_curvature(&self, d: &[T]) -> T {
        match self.reg {
            Regularizer::SquaredL2 => self.lambda * crate::linalg::norm_sq(d),
            _ => T::zero(),
        }
    }
}

/// Worker gradients for every worker, as a simulated cluster would compute
/// them. Used by tests and the run engine.
pub fn all_partials<T: Scalar>(shards: &DataShards<T>, w: &[T]) -> Result<Vec<Vec<T>>> {
    use rayon::prelude::*;
    (0..shards.m()).into_par_iter().map(|i| shards.shard(i).gradient(w)).collect()
}
