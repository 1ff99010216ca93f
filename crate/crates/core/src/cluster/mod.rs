//! Deterministic master-worker simulation: per-iteration delays, fastest-k
//! gather with interrupts, replication dedup and simulated time.

mod delay;
mod engine;
mod trace;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frames::ReplicationMeta;

pub use delay::{
    adversarial_sets, sample_iteration_delays, AdversarialPolicy, DelayKind, DelayModel,
};
pub use engine::{run_data, run_model, InterruptFill, RunConfig};
pub use trace::{mask_hex, RunSummary, RunTrace, TraceRow};

/// Objective values above this abort a run.
pub const DIVERGENCE_GUARD: f64 = 1e12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationOutcome {
    /// Accepted workers, ascending.
    pub active: Vec<usize>,
    /// Accepted workers that survive replication dedup (all of `active`
    /// for non-replicated frames).
    pub effective: Vec<usize>,
    /// Distinct partitions covered (replication only).
    pub coverage: Option<Vec<usize>>,
    pub interrupted: Vec<usize>,
    /// Workers fastest first.
    pub order: Vec<usize>,
    /// The k-th order statistic of the delays.
    pub elapsed: f64,
}

/// Workers sorted by delay, ties to the lower index.
pub fn arrival_order(delays: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..delays.len()).collect();
    order.sort_by(|&a, &b| delays[a].total_cmp(&delays[b]).then(a.cmp(&b)));
    order
}

/// Accept the `k` fastest workers and interrupt the rest.
pub fn gather_fastest_k(
    delays: &[f64],
    k: usize,
    replication: Option<&ReplicationMeta>,
) -> Result<IterationOutcome> {
    let m = delays.len();
    if k == 0 || k > m {
        return Err(Error::InvalidParameter(format!("k = {k} outside 1..={m}")));
    }
    let order = arrival_order(delays);
    let elapsed = delays[order[k - 1]];
    let (coverage, effective) = match replication {
        Some(meta) => {
            let (cov, mut kept) = meta.dedup(&order[..k]);
            kept.sort_unstable();
            (Some(cov), kept)
        }
        None => {
            let mut a = order[..k].to_vec();
            a.sort_unstable();
            (None, a)
        }
    };
    let mut active = order[..k].to_vec();
    active.sort_unstable();
    let mut interrupted = order[k..].to_vec();
    interrupted.sort_unstable();
    Ok(IterationOutcome { active, effective, coverage, interrupted, order, elapsed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frames::replication_frame;

    #[test]
    fn fastest_two_of_three() {
        let o = gather_fastest_k(&[3.0, 1.0, 2.0], 2, None).unwrap();
        assert_eq!(o.active, vec![1, 2]);
        assert_eq!(o.elapsed, 2.0);
        assert_eq!(o.interrupted, vec![0]);
    }

    #[test]
    fn ties_go_to_lower_index() {
        let o = gather_fastest_k(&[1.0; 4], 2, None).unwrap();
        assert_eq!(o.active, vec![0, 1]);
        assert!(gather_fastest_k(&[1.0; 4], 5, None).is_err());
    }

    #[test]
    fn replication_dedup() {
        let f = replication_frame::<f64>(4, 2, 4).unwrap();
        let meta = f.replication().unwrap();
        let o = gather_fastest_k(&[0.1, 5.0, 0.2, 6.0], 2, Some(meta)).unwrap();
        assert_eq!(o.coverage.as_deref(), Some(&[0][..]));
        assert_eq!(o.effective, vec![0]);
        let o = gather_fastest_k(&[0.1, 0.2, 5.0, 6.0], 2, Some(meta)).unwrap();
        assert_eq!(o.coverage.as_deref(), Some(&[0, 1][..]));
    }
}
