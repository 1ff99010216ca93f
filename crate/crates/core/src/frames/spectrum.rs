//! Block-restricted spectra, BRIP estimates and coherence.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::Frame;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

/// Largest subset count accepted in exhaustive mode.
pub const EXHAUSTIVE_LIMIT: u128 = 1_000_000;

/// Tolerance for counting eigenvalues equal to one.
pub const UNIT_TOL: f64 = 1e-8;

/// Above this many cached entries we keep dense blocks instead of grams.
const GRAM_CACHE_LIMIT: usize = 50_000_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum BripMode {
    Exhaustive,
    Sampled { trials: usize, seed: u64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub eta: f64,
    pub subsets_examined: usize,
    /// Extremes of the spectrum of `(1/(βη)) S_AᵀS_A` over examined subsets.
    pub min_eig: f64,
    pub max_eig: f64,
    pub epsilon: f64,
    /// Per subset: eigenvalues of `(1/β) S_AᵀS_A` within 1e-8 of one.
    pub unit_eig_multiplicity: Vec<usize>,
    /// True only for exhaustive runs.
    pub certified: bool,
}

impl SpectrumReport {
    pub fn mode_label(&self) -> &'static str {
        if self.certified {
            "exhaustive"
        } else {
            "sampled"
        }
    }

    /// ε to feed step-size rules: sampled estimates get a 20% margin.
    pub fn safety_epsilon(&self) -> f64 {
        if self.certified {
            self.epsilon
        } else {
            1.2 * self.epsilon
        }
    }
}

/// Cached per-block pieces for repeated subset spectra.
pub struct BlockGrams<T> {
    n: usize,
    m: usize,
    beta: f64,
    grams: Option<Vec<Matrix<T>>>,
    blocks: Vec<Matrix<T>>,
}

impl<T: Scalar> BlockGrams<T> {
    pub fn new(frame: &Frame<T>) -> Self {
        let m = frame.m();
        let n = frame.n();
        let blocks: Vec<Matrix<T>> = (0..m).map(|i| frame.dense_block(i)).collect();
        let grams = (m * n * n <= GRAM_CACHE_LIMIT)
            .then(|| blocks.iter().map(|b| b.gram()).collect());
        Self { n, m, beta: frame.beta_f64(), grams, blocks }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// `S_AᵀS_A`, unnormalized.
    pub fn subset_gram(&self, subset: &[usize]) -> Result<Matrix<T>> {
        if subset.is_empty() {
            return Err(Error::EmptySubset);
        }
        if let Some(&bad) = subset.iter().find(|&&i| i >= self.m) {
            return Err(Error::InvalidParameter(format!("block {bad} out of range 0..{}", self.m)));
        }
        match &self.grams {
            Some(grams) => {
                let mut g = Matrix::zeros(self.n, self.n);
                for &i in subset {
                    g.add_assign(&grams[i]);
                }
                Ok(g)
            }
            None => {
                let mut g = Matrix::zeros(self.n, self.n);
                for &i in subset {
                    g.add_assign(&self.blocks[i].gram());
                }
                Ok(g)
            }
        }
    }

    /// Ascending eigenvalues of `(1/(βη)) S_AᵀS_A` with `η = |A|/m`.
    pub fn eigs(&self, subset: &[usize]) -> Result<Vec<T>> {
        let mut g = self.subset_gram(subset)?;
        let eta = subset.len() as f64 / self.m as f64;
        g.scale(T::of(1.0 / (self.beta * eta)));
        Ok(g.symmetric_eigenvalues())
    }
}

/// Ascending eigenvalues of `(1/(βη)) S_AᵀS_A`, `η = |A|/m`. A tight frame at
/// `A = [m]` gives all ones.
pub fn gram_eigs<T: Scalar>(frame: &Frame<T>, subset: &[usize]) -> Result<Vec<T>> {
    if subset.is_empty() {
        return Err(Error::EmptySubset);
    }
    let mut g = subset_gram(frame, subset)?;
    let eta = subset.len() as f64 / frame.m() as f64;
    g.scale(T::of(1.0 / (frame.beta_f64() * eta)));
    Ok(g.symmetric_eigenvalues())
}

/// `S_AᵀS_A` assembled block by block.
pub fn subset_gram<T: Scalar>(frame: &Frame<T>, subset: &[usize]) -> Result<Matrix<T>> {
    let mut g = Matrix::zeros(frame.n(), frame.n());
    for &i in subset {
        if i >= frame.m() {
            return Err(Error::InvalidParameter(format!("block {i} out of range")));
        }
        g.add_assign(&frame.dense_block(i).gram());
    }
    Ok(g)
}

/// Eigenvalues of `(1/β) S_AᵀS_A` equal to one, given the `(1/(βη))`
/// normalized spectrum.
pub fn unit_multiplicity<T: Scalar>(eigs: &[T], eta: f64) -> usize {
    eigs.iter()
        .filter(|&&l| (l.to_f64_lossy() * eta - 1.0).abs() <= UNIT_TOL)
        .count()
}

pub fn binomial(m: usize, k: usize) -> u128 {
    if k > m {
        return 0;
    }
    let k = k.min(m - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (m - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// The `index`-th k-subset of `0..m` in lexicographic order.
pub fn unrank_combination(m: usize, k: usize, mut index: u128) -> Vec<usize> {
    let mut out = Vec::with_capacity(k);
    let mut start = 0;
    for slot in 0..k {
        let remaining = k - slot - 1;
        let mut c = start;
        loop {
            let count = binomial(m - c - 1, remaining);
            if index < count {
                break;
            }
            index -= count;
            c += 1;
        }
        out.push(c);
        start = c + 1;
    }
    out
}

/// Spectral extremes over k-subsets of blocks.
pub fn brip_estimate<T: Scalar>(frame: &Frame<T>, k: usize, mode: &BripMode) -> Result<SpectrumReport> {
    let m = frame.m();
    if k == 0 || k > m {
        return Err(Error::InvalidParameter(format!("k = {k} outside 1..={m}")));
    }
    let eta = k as f64 / m as f64;
    let grams = BlockGrams::new(frame);
    let per_subset = |subset: Vec<usize>| -> Result<(f64, f64, usize)> {
        let eigs = grams.eigs(&subset)?;
        let lo = eigs.first().map_or(0.0, |l| l.to_f64_lossy());
        let hi = eigs.last().map_or(0.0, |l| l.to_f64_lossy());
        Ok((lo, hi, unit_multiplicity(&eigs, eta)))
    };
    let (results, certified): (Vec<Result<(f64, f64, usize)>>, bool) = match mode {
        BripMode::Exhaustive => {
            let count = binomial(m, k);
            if count > EXHAUSTIVE_LIMIT {
                return Err(Error::CombinatorialBlowup { count, limit: EXHAUSTIVE_LIMIT });
            }
            let r = (0..count as u64)
                .into_par_iter()
                .map(|idx| per_subset(unrank_combination(m, k, idx as u128)))
                .collect();
            (r, true)
        }
        BripMode::Sampled { trials, seed } => {
            let r = (0..*trials as u64)
                .into_par_iter()
                .map(|t| {
                    let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                    rng.set_stream(t);
                    let mut subset = sample(&mut rng, m, k).into_vec();
                    subset.sort_unstable();
                    per_subset(subset)
                })
                .collect();
            (r, false)
        }
    };
    let mut min_eig = f64::INFINITY;
    let mut max_eig = f64::NEG_INFINITY;
    let mut unit = Vec::with_capacity(results.len());
    for r in results {
        let (lo, hi, u) = r?;
        min_eig = min_eig.min(lo);
        max_eig = max_eig.max(hi);
        unit.push(u);
    }
    Ok(SpectrumReport {
        eta,
        subsets_examined: unit.len(),
        min_eig,
        max_eig,
        epsilon: (1.0 - min_eig).max(max_eig - 1.0).max(0.0),
        unit_eig_multiplicity: unit,
        certified,
    })
}

/// `√((β−1)/(nβ−1))`.
pub fn welch_bound(n: usize, beta: f64) -> Result<f64> {
    let nb = n as f64 * beta;
    if nb <= 1.0 {
        return Err(Error::InvalidParameter(format!("welch bound needs n*beta > 1, got {nb}")));
    }
    Ok(((beta - 1.0) / (nb - 1.0)).max(0.0).sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Coherence {
    pub value: f64,
    /// Rows were not unit norm and had to be normalized first.
    pub normalized: bool,
}

/// `max_{i≠j} |<row_i, row_j>|` over unit-normalized rows, densified in
/// tiles of at most 10⁶ entries. Zero rows are ignored.
pub fn max_coherence<T: Scalar>(frame: &Frame<T>) -> Coherence {
    let n = frame.n().max(1);
    let rows = frame.rows();
    let tile = (1_000_000 / n).clamp(1, rows.max(1));
    let mut normalized = false;
    let load = |start: usize, normalized: &mut bool| -> Vec<Vec<f64>> {
        let end = (start + tile).min(rows);
        let d = frame.dense_rows(start..end);
        (0..d.rows())
            .map(|r| {
                let row: Vec<f64> = d.row(r).iter().map(|x| x.to_f64_lossy()).collect();
                let nrm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
                if (nrm - 1.0).abs() > 1e-10 {
                    *normalized = true;
                }
                if nrm == 0.0 {
                    Vec::new()
                } else {
                    row.into_iter().map(|x| x / nrm).collect()
                }
            })
            .collect()
    };
    let mut best: f64 = 0.0;
    let mut a_start = 0;
    while a_start < rows {
        let a = load(a_start, &mut normalized);
        let mut b_start = a_start;
        while b_start < rows {
            let b = if b_start == a_start { a.clone() } else { load(b_start, &mut normalized) };
            for (i, ra) in a.iter().enumerate() {
                if ra.is_empty() {
                    continue;
                }
                let j0 = if b_start == a_start { i + 1 } else { 0 };
                for rb in b.iter().skip(j0) {
                    if rb.is_empty() {
                        continue;
                    }
                    let ip: f64 = ra.iter().zip(rb).map(|(x, y)| x * y).sum();
                    best = best.max(ip.abs());
                }
            }
            b_start += tile;
        }
        a_start += tile;
    }
    Coherence { value: best, normalized }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frames::{identity_frame, steiner_etf};

    #[test]
    fn identity_half_subset() {
        let f = identity_frame::<f64>(4).partitioned(4).unwrap();
        let eigs = gram_eigs(&f, &[0, 1]).unwrap();
        let expect = [0.0, 0.0, 2.0, 2.0];
        for (a, b) in eigs.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
        let r = brip_estimate(&f, 4, &BripMode::Exhaustive).unwrap();
        assert!(r.epsilon < 1e-12);
    }

    #[test]
    fn full_subset_of_tight_frame_is_flat() {
        let f = steiner_etf::<f64>(4, 0).unwrap();
        let all: Vec<usize> = (0..f.m()).collect();
        for l in gram_eigs(&f, &all).unwrap() {
            assert!((l - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn unrank_enumerates_in_order() {
        let all: Vec<Vec<usize>> = (0..binomial(5, 3)).map(|i| unrank_combination(5, 3, i)).collect();
        assert_eq!(all.len(), 10);
        assert_eq!(all[0], vec![0, 1, 2]);
        assert_eq!(all[9], vec![2, 3, 4]);
        assert!(all.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn exhaustive_refuses_blowup() {
        let f = identity_frame::<f64>(64).partitioned(64).unwrap();
        assert!(matches!(
            brip_estimate(&f, 32, &BripMode::Exhaustive),
            Err(Error::CombinatorialBlowup { .. })
        ));
    }

    #[test]
    fn welch_values() {
        assert!((welch_bound(6, 8.0 / 3.0).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(welch_bound(5, 1.0).unwrap(), 0.0);
        assert!(welch_bound(1, 1.0).is_err());
    }

    #[test]
    fn steiner_meets_welch() {
        let f = steiner_etf::<f64>(4, 0).unwrap();
        let c = max_coherence(&f);
        assert!(!c.normalized);
        assert!((c.value - 1.0 / 3.0).abs() < 1e-8);
    }

    #[test]
    fn steiner_whole_block_multiplicity() {
        // columns {a,b} with both blocks kept are untouched: exactly C(k,2)
        // unit eigenvalues, above the closed form n(1−β(1−η)) for k < v
        for v in [4usize, 8] {
            let f = steiner_etf::<f64>(v, 0).unwrap().partitioned(v).unwrap();
            for k in 1..=v {
                let eta = k as f64 / v as f64;
                for r in 0..binomial(v, k) {
                    let subset = unrank_combination(v, k, r);
                    let eigs = gram_eigs(&f, &subset).unwrap();
                    assert_eq!(unit_multiplicity(&eigs, eta), k * (k - 1) / 2, "v {v} subset {subset:?}");
                }
            }
        }
    }
}
