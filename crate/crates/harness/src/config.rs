//! Experiment configuration. JSON, strict: unknown keys are rejected and every
//! random stream is named by an explicit seed.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use straggler_core::cluster::DelayKind;
use straggler_core::solvers::{Algorithm, OverlapRule};

use crate::error::HarnessError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemSpec,
    pub seeds: Seeds,
    pub frame: FrameChoice,
    pub cluster: ClusterSpec,
    pub solver: SolverSpec,
    #[serde(default)]
    pub output: OutputSpec,
    #[serde(default = "one")]
    pub repetitions: usize,
    /// Variants for `compare`; each overrides only scheme fields.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub schemes: Vec<SchemeSpec>,
}

fn one() -> usize {
    1
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Seeds {
    pub data_seed: u64,
    pub frame_seed: u64,
    pub delay_seed: u64,
    pub solver_seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemSpec {
    /// Data parallel, `(1/2n)‖Xw − y‖² + (λ/2)‖w‖²`.
    Ridge { n: usize, p: usize, sigma: f64, lambda: f64 },
    /// Data parallel, sparse planted model with an L1 penalty.
    Lasso { n: usize, p: usize, nnz: usize, sigma: f64, lambda: f64 },
    /// Model parallel least squares, `½‖Xw − y‖²`.
    LeastSquares { n: usize, p: usize, sigma: f64 },
    /// Model parallel regularized logistic regression.
    Logistic { n: usize, p: usize, lambda: f64 },
}

impl ProblemSpec {
    pub fn is_model_parallel(&self) -> bool {
        matches!(self, ProblemSpec::LeastSquares { .. } | ProblemSpec::Logistic { .. })
    }

    /// Length of the vector the frame encodes: samples for data
    /// parallelism, model coordinates for model parallelism.
    pub fn encoded_dim(&self) -> usize {
        match *self {
            ProblemSpec::Ridge { n, .. } | ProblemSpec::Lasso { n, .. } => n,
            ProblemSpec::LeastSquares { p, .. } => p,
            ProblemSpec::Logistic { p, .. } => p + 1,
        }
    }
}

/// Frame family; sizes come from the problem and the seed from `frame_seed`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FrameChoice {
    Steiner {
        /// Defaults to the smallest power of two whose frame is wide enough.
        #[serde(default)]
        v: Option<usize>,
        #[serde(default = "one")]
        split_blocks: usize,
    },
    HaarSubsampled { beta: u64 },
    HadamardRandomized { beta: u64 },
    Gaussian { beta: u64 },
    Identity,
    Replication { beta: u64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterSpec {
    pub m: usize,
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default)]
    pub eta: Option<f64>,
    #[serde(default)]
    pub adaptive_k: bool,
    #[serde(default)]
    pub overlap_rule: OverlapRule,
    pub delay: DelayKind,
    /// CSV of scripted delays (t rows × m columns); replaces `delay`.
    #[serde(default)]
    pub scripted_csv: Option<PathBuf>,
    #[serde(default)]
    pub compute_cost: f64,
}

impl ClusterSpec {
    pub fn resolved_k(&self) -> Result<usize, HarnessError> {
        match (self.k, self.eta) {
            (Some(k), None) => Ok(k),
            (None, Some(eta)) => {
                if !(eta > 0.0 && eta <= 1.0) {
                    return Err(HarnessError::Config(format!("eta = {eta} outside (0, 1]")));
                }
                Ok(((eta * self.m as f64).round() as usize).max(1))
            }
            (None, None) => Ok(self.m),
            (Some(_), Some(_)) => Err(HarnessError::Config("give k or eta, not both".into())),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EpsilonSource {
    /// Assume a perfect encoding.
    Zero,
    /// Random subsets, with a safety margin.
    #[default]
    Sampled,
    Exhaustive,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitChoice {
    #[default]
    Zero,
    /// N(0, 1) entries from `solver_seed`.
    Random,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    pub algorithm: Algorithm,
    #[serde(rename = "T")]
    pub iterations: usize,
    /// Fixed step; otherwise derived from `zeta` and the smoothness.
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default = "half")]
    pub zeta: f64,
    #[serde(default = "unit")]
    pub rho: f64,
    #[serde(default = "ten")]
    pub sigma_mem: usize,
    #[serde(default)]
    pub epsilon_source: EpsilonSource,
    #[serde(default)]
    pub init: InitChoice,
    #[serde(default)]
    pub strict_prox: bool,
}

fn half() -> f64 {
    0.5
}

fn unit() -> f64 {
    1.0
}

fn ten() -> usize {
    10
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default)]
    pub dir: Option<PathBuf>,
    #[serde(default)]
    pub name: Option<String>,
}

/// Fields a `compare` scheme may change. Anything else is shared.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeSpec {
    pub name: String,
    #[serde(default)]
    pub frame: Option<FrameChoice>,
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default)]
    pub eta: Option<f64>,
    #[serde(default)]
    pub adaptive_k: Option<bool>,
    #[serde(default)]
    pub algorithm: Option<Algorithm>,
    /// Run the asynchronous BCD baseline instead of the synchronous loop.
    #[serde(default)]
    pub asynchronous: bool,
}

pub const SCHEME_KEYS: &[&str] = &["frame", "cluster.k", "cluster.eta", "cluster.adaptive_k", "solver.algorithm"];

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text)?;
        if let Some(csv) = &cfg.cluster.scripted_csv {
            if csv.is_relative() {
                if let Some(dir) = path.parent() {
                    cfg.cluster.scripted_csv = Some(dir.join(csv));
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |msg: String| Err(HarnessError::Config(msg));
        let c = &self.cluster;
        if c.m == 0 {
            return bad("cluster.m must be positive".into());
        }
        let k = c.resolved_k()?;
        if k == 0 || k > c.m {
            return bad(format!("k = {k} outside 1..={}", c.m));
        }
        if self.repetitions == 0 {
            return bad("repetitions must be positive".into());
        }
        if let Some(p) = &c.scripted_csv {
            if !p.exists() {
                return bad(format!("scripted delay file {} does not exist", p.display()));
            }
        }
        if !(c.compute_cost >= 0.0) {
            return bad("compute_cost must be nonnegative".into());
        }
        if let Some(a) = self.solver.alpha {
            if !(a > 0.0 && a.is_finite()) {
                return bad(format!("alpha = {a} must be positive"));
            }
        }
        if !(self.solver.zeta > 0.0 && self.solver.zeta <= 1.0) {
            return bad("zeta must lie in (0, 1]".into());
        }
        let model = self.problem.is_model_parallel();
        if model != (self.solver.algorithm == Algorithm::Bcd) {
            return bad("BCD goes with model-parallel problems and only with them".into());
        }
        let mut names = std::collections::BTreeSet::new();
        for s in &self.schemes {
            if !names.insert(&s.name) {
                return bad(format!("duplicate scheme name {}", s.name));
            }
            let mut v = self.clone();
            v.schemes.clear();
            v.apply_scheme(s).validate()?;
        }
        Ok(())
    }

    /// The configuration a scheme runs with.
    pub fn apply_scheme(&self, s: &SchemeSpec) -> ExperimentConfig {
        let mut v = self.clone();
        v.schemes.clear();
        if let Some(f) = &s.frame {
            v.frame = f.clone();
        }
        if s.k.is_some() || s.eta.is_some() {
            v.cluster.k = s.k;
            v.cluster.eta = s.eta;
        }
        if let Some(a) = s.adaptive_k {
            v.cluster.adaptive_k = a;
        }
        if let Some(a) = s.algorithm {
            v.solver.algorithm = a;
        }
        v.output.name = Some(s.name.clone());
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const RIDGE: &str = r#"{
        "problem": {"kind": "ridge", "n": 64, "p": 8, "sigma": 0.1, "lambda": 0.01},
        "seeds": {"data_seed": 1, "frame_seed": 2, "delay_seed": 3, "solver_seed": 4},
        "frame": {"kind": "hadamard_randomized", "beta": 2},
        "cluster": {"m": 8, "k": 6, "delay": {"kind": "exponential", "mean": 0.01}},
        "solver": {"algorithm": "gd", "T": 20}
    }"#;

    #[test]
    fn parses_and_validates() {
        let cfg = ExperimentConfig::from_json(RIDGE).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.cluster.resolved_k().unwrap(), 6);
        assert_eq!(cfg.solver.zeta, 0.5);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = RIDGE.replace("\"sigma\": 0.1", "\"sigma\": 0.1, \"sigmaa\": 2");
        assert!(matches!(ExperimentConfig::from_json(&text), Err(HarnessError::Config(_))));
        let text = RIDGE.replace("\"T\": 20", "\"T\": 20, \"seed\": 3");
        assert!(ExperimentConfig::from_json(&text).is_err());
    }

    #[test]
    fn seeds_are_mandatory() {
        let text = RIDGE.replace(", \"solver_seed\": 4", "");
        assert!(ExperimentConfig::from_json(&text).is_err());
    }

    #[test]
    fn eta_and_k_conflict() {
        let text = RIDGE.replace("\"k\": 6", "\"k\": 6, \"eta\": 0.5");
        let cfg = ExperimentConfig::from_json(&text).unwrap();
        assert!(cfg.validate().is_err());
        let text = RIDGE.replace("\"k\": 6", "\"eta\": 1.5");
        assert!(ExperimentConfig::from_json(&text).unwrap().validate().is_err());
        let text = RIDGE.replace("\"k\": 6", "\"eta\": 0.75");
        assert_eq!(ExperimentConfig::from_json(&text).unwrap().cluster.resolved_k().unwrap(), 6);
    }

    #[test]
    fn bcd_needs_model_parallel_problem() {
        let text = RIDGE.replace("\"gd\"", "\"bcd\"");
        assert!(ExperimentConfig::from_json(&text).unwrap().validate().is_err());
    }
}
