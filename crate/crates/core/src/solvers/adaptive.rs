use serde::{Deserialize, Serialize};

/// Threshold for the overlap `|A_t(k) ∩ A_{t−1}|`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OverlapRule {
    /// Overlap must exceed `⌈m/β⌉` workers.
    #[default]
    Fraction,
    /// Overlap must exceed `1/β` taken literally, i.e. at least one worker.
    Literal,
}

/// Smallest `k` whose fastest-`k` set overlaps `prev` in more than the rule's
/// threshold, capped at `m`. `order` lists workers fastest first.
pub fn adaptive_k(order: &[usize], prev: &[usize], beta: f64, m: usize, rule: OverlapRule) -> usize {
    let threshold = match rule {
        OverlapRule::Fraction => (m as f64 / beta).ceil() as usize,
        OverlapRule::Literal => (1.0 / beta).floor() as usize,
    };
    let mut in_prev = vec![false; m];
    for &i in prev {
        in_prev[i] = true;
    }
    let mut overlap = 0;
    for (k, &i) in order.iter().enumerate() {
        if in_prev[i] {
            overlap += 1;
        }
        if overlap > threshold {
            return k + 1;
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_previous_set() {
        let order: Vec<usize> = (0..8).collect();
        let prev: Vec<usize> = (0..8).collect();
        assert_eq!(adaptive_k(&order, &prev, 2.0, 8, OverlapRule::Fraction), 5);
        assert_eq!(adaptive_k(&order, &prev, 2.0, 8, OverlapRule::Literal), 1);
    }

    #[test]
    fn disjoint_fastest_half_is_capped() {
        let order = [4, 5, 6, 7, 0, 1, 2, 3];
        let prev = [0, 1, 2, 3];
        // overlap never exceeds 4 = ⌈8/2⌉, so the scan runs out
        assert_eq!(adaptive_k(&order, &prev, 2.0, 8, OverlapRule::Fraction), 8);
        let prev = [0, 1, 2, 3, 4];
        assert_eq!(adaptive_k(&order, &prev, 2.0, 8, OverlapRule::Fraction), 8);
        let prev = [0, 1, 2, 3, 4, 5];
        assert_eq!(adaptive_k(&order, &prev, 2.0, 8, OverlapRule::Fraction), 7);
    }
}
