use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{
    steiner_partition, Beta, Frame, FrameKind, FrameSpec, ReplicationMeta, RowBlockPartition,
    SteinerLayout, Storage,
};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;

fn require_pow2(what: &str, x: usize) -> Result<()> {
    if x == 0 || !x.is_power_of_two() {
        return Err(Error::ConstructionUnsupported(format!(
            "{what} = {x} is not a power of two (Sylvester Hadamard orders only)"
        )));
    }
    Ok(())
}

fn sorted_sample(seed: u64, total: usize, k: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = sample(&mut rng, total, k).into_vec();
    idx.sort_unstable();
    idx
}

/// Steiner equiangular tight frame of shape v² x v(v-1)/2.
///
/// Column `j` is the j-th pair {a, b} (a < b, lexicographic). Incidence row
/// `a` hands its pairs the Sylvester columns 1..v-1 in order, and the row
/// of V becomes a v-row block of `H_v[:, cols] / √(v-1)`.
pub fn steiner_etf<T: Scalar>(v: usize, seed: u64) -> Result<Frame<T>> {
    build_steiner(v, None, seed)
}

/// Steiner frame restricted to a seeded subset of `columns` pair columns.
/// Still tight with the same β; rows no longer have unit norm.
pub fn steiner_etf_truncated<T: Scalar>(v: usize, columns: usize, seed: u64) -> Result<Frame<T>> {
    build_steiner(v, Some(columns), seed)
}

fn build_steiner<T: Scalar>(v: usize, columns: Option<usize>, seed: u64) -> Result<Frame<T>> {
    require_pow2("v", v)?;
    if v < 4 {
        return Err(Error::ConstructionUnsupported(format!("Steiner frames need v >= 4, got {v}")));
    }
    let full = v * (v - 1) / 2;
    let keep: Vec<Option<usize>> = match columns {
        None => (0..full).map(Some).collect(),
        Some(c) => {
            if c == 0 || c > full {
                return Err(Error::InvalidParameter(format!(
                    "cannot keep {c} of {full} Steiner columns"
                )));
            }
            let chosen = sorted_sample(seed, full, c);
            let mut map = vec![None; full];
            for (new, &old) in chosen.iter().enumerate() {
                map[old] = Some(new);
            }
            map
        }
    };
    let n = keep.iter().filter(|k| k.is_some()).count();

    let mut terms: Vec<Vec<(usize, usize)>> = vec![Vec::with_capacity(v - 1); v];
    let mut next_hcol = vec![1usize; v];
    let mut j = 0;
    for a in 0..v {
        for b in a + 1..v {
            for end in [a, b] {
                let h = next_hcol[end];
                next_hcol[end] += 1;
                if let Some(c) = keep[j] {
                    terms[end].push((h, c));
                }
            }
            j += 1;
        }
    }
    let layout = SteinerLayout {
        v,
        split: 1,
        scale: T::one() / T::of_usize(v - 1).sqrt(),
        terms,
    };
    Frame::assemble(
        FrameKind::Steiner,
        n,
        v * v,
        Beta::new(2 * v as u64, v as u64 - 1),
        FrameSpec::Steiner { v, columns, split_blocks: 1, seed },
        Storage::Steiner(layout),
        steiner_partition(v, 1, v)?,
        None,
    )
}

/// Sample `order/beta` columns of the `order x order` orthonormal Haar
/// matrix and scale by √β. Shape: `order x order/beta`.
pub fn haar_subsampled<T: Scalar>(order: usize, beta: u64, seed: u64) -> Result<Frame<T>> {
    require_pow2("order", order)?;
    if beta == 0 || order % beta as usize != 0 {
        return Err(Error::InvalidParameter(format!("beta {beta} must divide order {order}")));
    }
    let n = order / beta as usize;
    let columns = sorted_sample(seed, order, n);
    Frame::assemble(
        FrameKind::HaarSubsampled,
        n,
        order,
        Beta::from_integer(beta),
        FrameSpec::HaarSubsampled { order, beta, seed },
        Storage::Haar { order, columns, scale: T::of(beta as f64).sqrt() },
        RowBlockPartition::uniform(order, 1)?,
        None,
    )
}

/// Scatter the input to seeded positions of a length-βn vector, then apply
/// the Walsh-Hadamard transform scaled by `1/√n`.
pub fn hadamard_randomized<T: Scalar>(n: usize, beta: u64, seed: u64) -> Result<Frame<T>> {
    if beta == 0 || n == 0 {
        return Err(Error::InvalidParameter("n and beta must be positive".into()));
    }
    let len = n * beta as usize;
    require_pow2("beta * n", len)?;
    let positions = sorted_sample(seed, len, n);
    Frame::assemble(
        FrameKind::HadamardRandomized,
        n,
        len,
        Beta::from_integer(beta),
        FrameSpec::HadamardRandomized { n, beta, seed },
        Storage::Hadamard { len, positions, scale: T::one() / T::of_usize(n).sqrt() },
        RowBlockPartition::uniform(len, 1)?,
        None,
    )
}

/// i.i.d. `N(0, 1/n)` entries, so `E[SᵀS] = βI`.
pub fn gaussian_frame<T: Scalar>(n: usize, beta: u64, seed: u64) -> Result<Frame<T>> {
    if beta == 0 || n == 0 {
        return Err(Error::InvalidParameter("n and beta must be positive".into()));
    }
    let rows = n * beta as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let entries = Matrix::gaussian(rows, n, 1.0 / (n as f64).sqrt(), &mut rng);
    Frame::assemble(
        FrameKind::Gaussian,
        n,
        rows,
        Beta::from_integer(beta),
        FrameSpec::Gaussian { n, beta, seed },
        Storage::Dense(entries),
        RowBlockPartition::uniform(rows, 1)?,
        None,
    )
}

/// Rebuild a Gaussian frame around stored entries (deserialization).
pub(crate) fn gaussian_from_entries<T: Scalar>(
    entries: Matrix<T>,
    beta: u64,
    seed: u64,
    m: usize,
) -> Result<Frame<T>> {
    let n = entries.cols();
    Frame::assemble(
        FrameKind::Gaussian,
        n,
        entries.rows(),
        Beta::from_integer(beta),
        FrameSpec::Gaussian { n, beta, seed },
        Storage::Dense(entries),
        RowBlockPartition::uniform(n * beta as usize, m)?,
        None,
    )
}

/// The uncoded `n x n` identity, one block.
pub fn identity_frame<T: Scalar>(n: usize) -> Frame<T> {
    Frame::assemble(
        FrameKind::Identity,
        n,
        n,
        Beta::from_integer(1),
        FrameSpec::Identity { n },
        Storage::Selection { row_to_col: (0..n).collect() },
        RowBlockPartition::uniform(n, 1).expect("n >= 1"),
        None,
    )
    .expect("identity is always valid")
}

/// Row-duplicated identity: the data splits into `m/β` contiguous partitions
/// and block `i` carries partition `i mod (m/β)`. Stored raw, `SᵀS = βI`.
pub fn replication_frame<T: Scalar>(n: usize, beta: u64, m: usize) -> Result<Frame<T>> {
    let b = beta as usize;
    if b == 0 || m == 0 || m % b != 0 {
        return Err(Error::InvalidParameter(format!("beta {beta} must divide m {m}")));
    }
    let parts = m / b;
    if parts > n {
        return Err(Error::InvalidParameter(format!("{parts} partitions exceed n = {n}")));
    }
    let bounds: Vec<usize> = (0..=parts).map(|p| p * n / parts).collect();
    let mut row_to_col = Vec::with_capacity(n * b);
    let mut offsets = vec![0];
    let partition_of_block: Vec<usize> = (0..m).map(|i| i % parts).collect();
    for &p in &partition_of_block {
        row_to_col.extend(bounds[p]..bounds[p + 1]);
        offsets.push(row_to_col.len());
    }
    let rows = row_to_col.len();
    Frame::assemble(
        FrameKind::Replication,
        n,
        rows,
        Beta::from_integer(beta),
        FrameSpec::Replication { n, beta },
        Storage::Selection { row_to_col },
        RowBlockPartition::from_offsets(offsets, rows)?,
        Some(ReplicationMeta { partitions: parts, partition_of_block }),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;

    fn tight_defect(f: &Frame<f64>) -> f64 {
        let g = f.to_dense().gram();
        let mut target = Matrix::<f64>::identity(f.n());
        target.scale(f.beta_f64());
        g.max_abs_diff(&target)
    }

    #[test]
    fn steiner_v4_shape_and_tightness() {
        let f = steiner_etf::<f64>(4, 0).unwrap();
        assert_eq!((f.rows(), f.n()), (16, 6));
        assert_eq!(f.beta(), Beta::new(8, 3));
        assert!(tight_defect(&f) < 1e-10);
        let d = f.to_dense();
        for r in 0..16 {
            let nrm: f64 = d.row(r).iter().map(|x| x * x).sum();
            assert!((nrm - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn steiner_rejects_non_pow2() {
        assert!(matches!(steiner_etf::<f64>(6, 0), Err(Error::ConstructionUnsupported(_))));
    }

    #[test]
    fn truncated_steiner_stays_tight() {
        let f = steiner_etf_truncated::<f64>(16, 50, 3).unwrap();
        assert_eq!(f.n(), 50);
        assert!(tight_defect(&f) < 1e-10);
    }

    #[test]
    fn haar_columns_orthonormal_after_rescale() {
        for seed in 0..4 {
            let f = haar_subsampled::<f64>(4, 2, seed).unwrap();
            assert_eq!((f.rows(), f.n()), (4, 2));
            assert!(tight_defect(&f) < 1e-12);
        }
        let f = haar_subsampled::<f64>(2, 1, 0).unwrap();
        let d = f.to_dense();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let h2 = Matrix::from_vec(2, 2, vec![s, s, s, -s]).unwrap();
        assert!(d.max_abs_diff(&h2) < 1e-15);
    }

    #[test]
    fn hadamard_smallest_case() {
        // Pad position 0 gives the first Walsh column, position 1 the second.
        let cols: Vec<Vec<f64>> = (0..16)
            .map(|s| hadamard_randomized::<f64>(1, 2, s).unwrap().to_dense().data().to_vec())
            .collect();
        assert!(cols.iter().any(|c| c == &[1.0, 1.0]));
        assert!(cols.iter().all(|c| c == &[1.0, 1.0] || c == &[1.0, -1.0]));
        let f = hadamard_randomized::<f64>(4, 2, 9).unwrap();
        assert!(tight_defect(&f) < 1e-10);
        assert!(hadamard_randomized::<f64>(3, 2, 0).is_err());
    }

    #[test]
    fn gaussian_is_deterministic() {
        let a = gaussian_frame::<f64>(2, 1, 17).unwrap().to_dense();
        let b = gaussian_frame::<f64>(2, 1, 17).unwrap().to_dense();
        assert_eq!(a.data(), b.data());
    }

    #[test]
    fn replication_blocks_duplicate_partitions() {
        let f = replication_frame::<f64>(4, 2, 4).unwrap();
        assert_eq!(f.dense_block(0).data(), f.dense_block(2).data());
        assert_eq!(f.dense_block(1).data(), f.dense_block(3).data());
        assert_ne!(f.dense_block(0).data(), f.dense_block(1).data());
        let meta = f.replication().unwrap();
        assert_eq!(meta.dedup(&[0, 2]).0, vec![0]);
        assert_eq!(meta.dedup(&[0, 1]).0, vec![0, 1]);
        assert!(tight_defect(&f) < 1e-15);
        assert!(replication_frame::<f64>(4, 3, 4).is_err());
    }

    #[test]
    fn identity_applies_exactly() {
        let f = identity_frame::<f64>(5).partitioned(5).unwrap();
        let x = [1.0, -2.0, 3.5, 0.0, 7.0];
        assert_eq!(f.apply(&x).unwrap(), x.to_vec());
    }
}
