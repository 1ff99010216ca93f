//! Measurements on traces and the comparison report.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use straggler_core::cluster::RunTrace;

use crate::config::ExperimentConfig;
use crate::error::HarnessError;
use crate::experiment::SchemeOutcome;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceColumn {
    Objective,
    Metric,
}

/// First simulated time at which `column` reaches `target`: `≥` when
/// `higher_is_better`, `≤` otherwise. The initial point counts as time 0.
pub fn time_to_target(
    trace: &RunTrace,
    target: f64,
    column: TraceColumn,
    higher_is_better: bool,
) -> Result<Option<f64>, HarnessError> {
    if trace.rows.is_empty() {
        return Err(HarnessError::Config("time_to_target on an empty trace".into()));
    }
    let hit = |v: f64| if higher_is_better { v >= target } else { v <= target };
    let initial = match column {
        TraceColumn::Objective => trace.initial_objective,
        TraceColumn::Metric => trace.initial_metric,
    };
    if hit(initial) {
        return Ok(Some(0.0));
    }
    Ok(trace
        .rows
        .iter()
        .find(|r| {
            hit(match column {
                TraceColumn::Objective => r.objective,
                TraceColumn::Metric => r.metric,
            })
        })
        .map(|r| r.sim_time))
}

/// SHA-256 over the canonical JSON of everything a scheme may not change.
pub fn shared_config_hash(cfg: &ExperimentConfig) -> String {
    let mut v = serde_json::to_value(cfg).expect("config serializes");
    let obj = v.as_object_mut().expect("object");
    obj.remove("schemes");
    obj.remove("frame");
    obj.remove("output");
    if let Some(c) = obj.get_mut("cluster").and_then(|c| c.as_object_mut()) {
        for key in ["k", "eta", "adaptive_k"] {
            c.remove(key);
        }
    }
    if let Some(s) = obj.get_mut("solver").and_then(|s| s.as_object_mut()) {
        s.remove("algorithm");
    }
    // serde_json maps are ordered by key, so this text is canonical
    let text = serde_json::to_string(&v).expect("value serializes");
    hex::encode(Sha256::digest(text.as_bytes()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchemeSeries {
    pub name: String,
    pub k: usize,
    pub alpha: f64,
    pub epsilon: Option<f64>,
    pub config_hash: String,
    pub iteration: Vec<usize>,
    pub sim_time: Vec<f64>,
    pub objective: Vec<f64>,
    pub metric: Vec<Option<f64>>,
    pub final_objective: f64,
    pub final_metric: Option<f64>,
    pub participation: Vec<usize>,
    pub fault: Option<String>,
}

impl SchemeSeries {
    pub fn from_outcome(o: &SchemeOutcome, config_hash: String) -> Self {
        let tr = &o.trace;
        let opt = |x: f64| (!x.is_nan()).then_some(x);
        let summary = tr.summary();
        Self {
            name: o.name.clone(),
            k: o.k,
            alpha: o.alpha,
            epsilon: opt(o.epsilon),
            config_hash,
            iteration: std::iter::once(0).chain(tr.rows.iter().map(|r| r.t)).collect(),
            sim_time: std::iter::once(0.0).chain(tr.rows.iter().map(|r| r.sim_time)).collect(),
            objective: std::iter::once(tr.initial_objective).chain(tr.rows.iter().map(|r| r.objective)).collect(),
            metric: std::iter::once(opt(tr.initial_metric)).chain(tr.rows.iter().map(|r| opt(r.metric))).collect(),
            final_objective: summary.final_objective,
            final_metric: summary.final_metric,
            participation: tr.participation.clone(),
            fault: tr.fault.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Speedup {
    pub scheme: String,
    pub baseline: String,
    pub column: TraceColumn,
    pub target: f64,
    pub scheme_time: Option<f64>,
    pub baseline_time: Option<f64>,
    /// `scheme_time / baseline_time`; below one means faster.
    pub ratio: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub shared_config_hash: String,
    pub repetition: usize,
    pub schemes: Vec<SchemeSeries>,
    pub speedups: Vec<Speedup>,
}

/// Target for the speedup table: the baseline's final value of `column`,
/// loosened by 1% so that it is reachable.
fn matched_target(base: &SchemeOutcome, column: TraceColumn, higher: bool) -> Option<f64> {
    let s = base.trace.summary();
    let v = match column {
        TraceColumn::Objective => s.final_objective,
        TraceColumn::Metric => s.final_metric?,
    };
    Some(if higher { v * 0.99 } else { v * 1.01 })
}

/// Build the report; the first scheme is the baseline. Fails if two schemes
/// disagree on the shared configuration.
pub fn compare_report(
    cfg: &ExperimentConfig,
    outcomes: &[SchemeOutcome],
    repetition: usize,
) -> Result<ComparisonReport, HarnessError> {
    let shared = shared_config_hash(cfg);
    let mut schemes = Vec::with_capacity(outcomes.len());
    for (o, s) in outcomes.iter().zip(cfg.schemes.iter().map(Some).chain(std::iter::repeat(None))) {
        let effective = match s {
            Some(s) => cfg.apply_scheme(s),
            None => cfg.clone(),
        };
        let h = shared_config_hash(&effective);
        if h != shared {
            return Err(HarnessError::Config(format!("scheme {} changes shared configuration", o.name)));
        }
        schemes.push(SchemeSeries::from_outcome(o, h));
    }
    let mut speedups = Vec::new();
    if let Some(base) = outcomes.first() {
        for (column, higher) in [(TraceColumn::Objective, false), (TraceColumn::Metric, base.metric.higher_is_better())] {
            let Some(target) = matched_target(base, column, higher) else { continue };
            let base_time = time_to_target(&base.trace, target, column, higher).ok().flatten();
            for o in &outcomes[1..] {
                let t = time_to_target(&o.trace, target, column, higher).ok().flatten();
                speedups.push(Speedup {
                    scheme: o.name.clone(),
                    baseline: base.name.clone(),
                    column,
                    target,
                    scheme_time: t,
                    baseline_time: base_time,
                    ratio: match (t, base_time) {
                        (Some(a), Some(b)) if b > 0.0 => Some(a / b),
                        _ => None,
                    },
                });
            }
        }
    }
    Ok(ComparisonReport { shared_config_hash: shared, repetition, schemes, speedups })
}

#[cfg(test)]
mod tests {
    use super::*;
    use straggler_core::cluster::TraceRow;

    fn trace(values: &[f64]) -> RunTrace {
        RunTrace {
            rows: values
                .iter()
                .enumerate()
                .map(|(i, &v)| TraceRow {
                    t: i + 1,
                    sim_time: (i + 1) as f64 * 0.5,
                    k: 1,
                    active_mask: "1".into(),
                    objective: v,
                    metric: v,
                    alpha: 0.1,
                    notes: String::new(),
                    gathers: vec![0.5],
                })
                .collect(),
            initial_objective: 100.0,
            initial_metric: 100.0,
            ..Default::default()
        }
    }

    #[test]
    fn first_crossing() {
        let tr = trace(&[9.0, 8.0, 7.0, 6.0, 5.0, 4.0, 3.0, 2.0, 1.0]);
        assert_eq!(time_to_target(&tr, 3.0, TraceColumn::Objective, false).unwrap(), Some(3.5));
        assert_eq!(time_to_target(&tr, 0.5, TraceColumn::Objective, false).unwrap(), None);
        assert_eq!(time_to_target(&tr, 200.0, TraceColumn::Metric, false).unwrap(), Some(0.0));
    }

    #[test]
    fn higher_is_better_targets() {
        let tr = trace(&[0.1, 0.5, 0.85, 0.9]);
        let mut tr = tr;
        tr.initial_metric = 0.0;
        assert_eq!(time_to_target(&tr, 0.8, TraceColumn::Metric, true).unwrap(), Some(1.5));
    }

    #[test]
    fn empty_trace_is_an_error() {
        assert!(time_to_target(&RunTrace::default(), 1.0, TraceColumn::Objective, false).is_err());
    }
}
