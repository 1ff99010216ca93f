use serde::{Deserialize, Serialize};

/// One iteration of a simulated run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub t: usize,
    /// Cumulative simulated seconds after this iteration.
    pub sim_time: f64,
    pub k: usize,
    /// Accepted workers as a hex bitmask (bit i = worker i).
    pub active_mask: String,
    /// `f(w_t)` for data-parallel runs, `g(w_t)` for model-parallel runs.
    pub objective: f64,
    /// Test metric, NaN when none was requested.
    pub metric: f64,
    pub alpha: f64,
    pub notes: String,
    /// Order statistic of each gather in this iteration.
    pub gathers: Vec<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub rows: Vec<TraceRow>,
    pub initial_objective: f64,
    pub initial_metric: f64,
    /// Final iterate in the original coordinates.
    pub final_w: Vec<f64>,
    /// Iterations in which each worker was accepted.
    pub participation: Vec<usize>,
    /// Set when a solver fault ended the run early.
    pub fault: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub total_sim_time: f64,
    pub final_objective: f64,
    pub final_metric: Option<f64>,
    pub iterations: usize,
}

impl RunTrace {
    pub fn summary(&self) -> RunSummary {
        let last = self.rows.last();
        RunSummary {
            total_sim_time: last.map_or(0.0, |r| r.sim_time),
            final_objective: last.map_or(self.initial_objective, |r| r.objective),
            final_metric: last.map(|r| r.metric).filter(|m| !m.is_nan()),
            iterations: self.rows.len(),
        }
    }

    pub fn objectives(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.objective).collect()
    }

    /// Share of accepted slots per worker, divided by the uniform share.
    pub fn participation_spread(&self) -> f64 {
        let total: usize = self.participation.iter().sum();
        let m = self.participation.len();
        if total == 0 || m == 0 {
            return 0.0;
        }
        let max = *self.participation.iter().max().unwrap() as f64;
        max / total as f64 * m as f64
    }
}

/// Hex bitmask of `active` over `m` workers, most significant nibble first.
pub fn mask_hex(active: &[usize], m: usize) -> String {
    let digits = m.div_ceil(4).max(1);
    let mut nibbles = vec![0u8; digits];
    for &i in active {
        nibbles[i / 4] |= 1 << (i % 4);
    }
    nibbles.iter().rev().map(|n| format!("{n:x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mask_layout() {
        assert_eq!(mask_hex(&[0], 4), "1");
        assert_eq!(mask_hex(&[0, 3], 4), "9");
        assert_eq!(mask_hex(&[4], 8), "10");
        assert_eq!(mask_hex(&[1, 2, 31], 32), "80000006");
    }
}
