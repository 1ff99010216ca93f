use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal, Pareto};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Worst-case active-set generators.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case", deny_unknown_fields)]
pub enum AdversarialPolicy {
    /// Exclude a window of `m − k` consecutive workers starting at `t(m−k) mod m`.
    RoundRobinExclude,
    /// Always drop the same workers.
    FixedExclude { drop: Vec<usize> },
    /// Make `|A_t ∩ A_{t−1}|` as small as possible, i.e. `max(0, 2k − m)`.
    OverlapMin,
    /// Uniform k-subsets, seeded.
    Random { seed: u64 },
}

/// Active sets `A_0..A_{T−1}`, each sorted ascending.
pub fn adversarial_sets(policy: &AdversarialPolicy, m: usize, k: usize, iterations: usize) -> Result<Vec<Vec<usize>>> {
    if k == 0 || k > m {
        return Err(Error::InvalidParameter(format!("k = {k} outside 1..={m}")));
    }
    let mut out: Vec<Vec<usize>> = Vec::with_capacity(iterations);
    for t in 0..iterations {
        let set = match policy {
            AdversarialPolicy::RoundRobinExclude => {
                let drop = m - k;
                let start = (t * drop) % m;
                let mut excluded = vec![false; m];
                for j in 0..drop {
                    excluded[(start + j) % m] = true;
                }
                (0..m).filter(|&i| !excluded[i]).collect()
            }
            AdversarialPolicy::FixedExclude { drop } => {
                if drop.len() != m - k || drop.iter().any(|&d| d >= m) {
                    return Err(Error::InvalidParameter(format!(
                        "fixed exclusion must name {} valid workers",
                        m - k
                    )));
                }
                (0..m).filter(|i| !drop.contains(i)).collect()
            }
            AdversarialPolicy::OverlapMin => match out.last() {
                None => (0..k).collect(),
                Some(prev) => {
                    let mut in_prev = vec![false; m];
                    prev.iter().for_each(|&i| in_prev[i] = true);
                    let fresh: Vec<usize> = (0..m).filter(|&i| !in_prev[i]).collect();
                    let mut set: Vec<usize> = fresh.into_iter().take(k).collect();
                    let need = k - set.len();
                    // reuse a rotating slice of the previous set
                    let off = t % prev.len();
                    set.extend((0..need).map(|j| prev[(off + j) % prev.len()]));
                    set.sort_unstable();
                    set
                }
            },
            AdversarialPolicy::Random { seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                rng.set_stream(t as u64);
                let mut s = sample(&mut rng, m, k).into_vec();
                s.sort_unstable();
                s
            }
        };
        out.push(set);
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DelayKind {
    /// With probability `q` draw N(mu1, sigma1²), otherwise N(mu2, sigma2²);
    /// negative draws are truncated at zero.
    GaussianMixture { q: f64, mu1: f64, sigma1: f64, mu2: f64, sigma2: f64 },
    Exponential { mean: f64 },
    /// Static background task counts `T_i` with density `∝ T^{−exponent}`
    /// on `[1, ∞)`, floored and capped; delay `base·(1 + per_task_slowdown·T_i)`.
    PowerLawBackground { exponent: f64, cap: f64, per_task_slowdown: f64, base: f64 },
    /// `delays[t][i]` in seconds; rows repeat cyclically.
    Scripted { delays: Vec<Vec<f64>> },
    /// Delay 1 for the policy's `A_t`, 2 for everyone else.
    Adversarial { policy: AdversarialPolicy, k: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DelayModel {
    #[serde(flatten)]
    pub kind: DelayKind,
    #[serde(default)]
    pub seed: u64,
}

impl DelayModel {
    pub fn new(kind: DelayKind, seed: u64) -> Self {
        Self { kind, seed }
    }

    /// Bimodal straggler model: half fast, half slow.
    pub fn bimodal(seed: u64) -> Self {
        Self::new(
            DelayKind::GaussianMixture { q: 0.5, mu1: 0.5, sigma1: 0.2, mu2: 20.0, sigma2: 5.0 },
            seed,
        )
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidParameter(msg.to_string()));
        match &self.kind {
            DelayKind::GaussianMixture { q, sigma1, sigma2, .. } => {
                if !(0.0..=1.0).contains(q) {
                    return bad("mixture weight q must lie in [0, 1]");
                }
                if *sigma1 < 0.0 || *sigma2 < 0.0 {
                    return bad("mixture standard deviations must be nonnegative");
                }
            }
            DelayKind::Exponential { mean } => {
                if !(*mean > 0.0) {
                    return bad("exponential mean must be positive");
                }
            }
            DelayKind::PowerLawBackground { exponent, cap, per_task_slowdown, base } => {
                if !(*exponent > 1.0) {
                    return bad("power-law exponent must exceed 1");
                }
                if *cap < 1.0 {
                    return bad("task cap must be at least 1");
                }
                if *per_task_slowdown < 0.0 || *base < 0.0 {
                    return bad("power-law base and slowdown must be nonnegative");
                }
            }
            DelayKind::Scripted { delays } => {
                if delays.is_empty() {
                    return bad("scripted delay matrix is empty");
                }
                if delays.iter().flatten().any(|d| !(*d >= 0.0)) {
                    return bad("scripted delays must be finite and nonnegative");
                }
            }
            DelayKind::Adversarial { .. } => {}
        }
        Ok(())
    }

    /// Static per-worker background task counts (power-law model only).
    pub fn task_counts(&self, m: usize) -> Option<Vec<f64>> {
        match &self.kind {
            DelayKind::PowerLawBackground { exponent, cap, .. } => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
                rng.set_stream(u64::MAX);
                let pareto = Pareto::new(1.0, exponent - 1.0).expect("validated");
                Some((0..m).map(|_| pareto.sample(&mut rng).floor().min(*cap)).collect())
            }
            _ => None,
        }
    }
}

/// Delays of all `m` workers at iteration `t`; `phase` separates gathers
/// within one iteration (0: gradients, 1: line search).
pub fn sample_iteration_delays(model: &DelayModel, m: usize, t: usize, phase: u64) -> Result<Vec<f64>> {
    model.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(model.seed);
    rng.set_stream(2 * t as u64 + phase);
    Ok(match &model.kind {
        DelayKind::GaussianMixture { q, mu1, sigma1, mu2, sigma2 } => {
            let n1 = Normal::new(*mu1, *sigma1).expect("validated");
            let n2 = Normal::new(*mu2, *sigma2).expect("validated");
            (0..m)
                .map(|_| {
                    let first = rng.random::<f64>() < *q;
                    let d = if first { n1.sample(&mut rng) } else { n2.sample(&mut rng) };
                    if d < 0.0 {
                        log::trace!("negative delay {d} truncated");
                    }
                    d.max(0.0)
                })
                .collect()
        }
        DelayKind::Exponential { mean } => {
            let e = Exp::new(1.0 / mean).expect("validated");
            (0..m).map(|_| e.sample(&mut rng)).collect()
        }
        DelayKind::PowerLawBackground { per_task_slowdown, base, .. } => model
            .task_counts(m)
            .expect("power-law model")
            .into_iter()
            .map(|tasks| base * (1.0 + per_task_slowdown * tasks))
            .collect(),
        DelayKind::Scripted { delays } => {
            let row = &delays[t % delays.len()];
            if row.len() != m {
                return Err(Error::DimensionMismatch { expected: m, got: row.len() });
            }
            row.clone()
        }
        DelayKind::Adversarial { policy, k } => {
            let sets = adversarial_sets(policy, m, *k, t + 1)?;
            let mut d = vec![2.0; m];
            for &i in &sets[t] {
                d[i] = 1.0;
            }
            d
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scripted_rows_verbatim() {
        let model = DelayModel::new(DelayKind::Scripted { delays: vec![vec![0.3, 0.1], vec![1.0, 2.0]] }, 0);
        assert_eq!(sample_iteration_delays(&model, 2, 1, 0).unwrap(), vec![1.0, 2.0]);
        assert_eq!(sample_iteration_delays(&model, 2, 2, 0).unwrap(), vec![0.3, 0.1]);
    }

    #[test]
    fn degenerate_mixture_hits_means() {
        let model = DelayModel::new(
            DelayKind::GaussianMixture { q: 0.5, mu1: 0.5, sigma1: 0.0, mu2: 20.0, sigma2: 0.0 },
            4,
        );
        for t in 0..20 {
            for d in sample_iteration_delays(&model, 16, t, 0).unwrap() {
                assert!(d == 0.5 || d == 20.0);
            }
        }
    }

    #[test]
    fn deterministic_per_seed_and_iteration() {
        let model = DelayModel::bimodal(9);
        let a = sample_iteration_delays(&model, 32, 7, 0).unwrap();
        let b = sample_iteration_delays(&model, 32, 7, 0).unwrap();
        let c = sample_iteration_delays(&model, 32, 7, 1).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.iter().all(|&d| d >= 0.0));
    }

    #[test]
    fn exponential_mean() {
        let model = DelayModel::new(DelayKind::Exponential { mean: 0.01 }, 1);
        let mut total = 0.0;
        let mut count = 0;
        for t in 0..1000 {
            for d in sample_iteration_delays(&model, 100, t, 0).unwrap() {
                total += d;
                count += 1;
            }
        }
        let mean = total / count as f64;
        assert!((mean - 0.01).abs() < 0.02 * 0.01, "mean {mean}");
    }

    #[test]
    fn invalid_params_rejected() {
        let m = DelayModel::new(
            DelayKind::GaussianMixture { q: 0.5, mu1: 0.5, sigma1: -1.0, mu2: 20.0, sigma2: 5.0 },
            0,
        );
        assert!(sample_iteration_delays(&m, 4, 0, 0).is_err());
        let m = DelayModel::new(
            DelayKind::PowerLawBackground { exponent: 1.5, cap: 0.5, per_task_slowdown: 1.0, base: 1.0 },
            0,
        );
        assert!(m.validate().is_err());
    }

    #[test]
    fn fixed_and_round_robin() {
        let s = adversarial_sets(&AdversarialPolicy::FixedExclude { drop: vec![3] }, 4, 3, 5).unwrap();
        assert!(s.iter().all(|a| a == &vec![0, 1, 2]));
        let s = adversarial_sets(&AdversarialPolicy::RoundRobinExclude, 4, 3, 8).unwrap();
        let dropped: Vec<usize> = s.iter().map(|a| (0..4).find(|i| !a.contains(i)).unwrap()).collect();
        assert_eq!(dropped, vec![0, 1, 2, 3, 0, 1, 2, 3]);
    }

    #[test]
    fn overlap_min_is_minimal() {
        for m in 2..=8 {
            for k in 1..=m {
                let sets = adversarial_sets(&AdversarialPolicy::OverlapMin, m, k, 6).unwrap();
                for w in sets.windows(2) {
                    assert_eq!(w[1].len(), k);
                    let ov = w[1].iter().filter(|i| w[0].contains(i)).count();
                    assert_eq!(ov, (2 * k).saturating_sub(m));
                }
            }
        }
    }
}
