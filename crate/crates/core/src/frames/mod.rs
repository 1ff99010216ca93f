//! Encoding matrices `S` (rows x n) with fast apply, row-block partitions
//! across workers, and spectral diagnostics.
//!
//! Storage convention: every tight kind is stored raw with `SᵀS = βI`.
//! Consumers normalize by `β·η` (and `n`) at the point of use.

mod construct;
pub mod container;
pub mod spectrum;

use std::ops::Range;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::linalg::Matrix;
use crate::scalar::Scalar;
use crate::transforms::{fwht, haar_forward, haar_transpose};

pub use construct::{
    gaussian_frame, hadamard_randomized, haar_subsampled, identity_frame, replication_frame,
    steiner_etf, steiner_etf_truncated,
};
pub use spectrum::{
    binomial, brip_estimate, gram_eigs, max_coherence, subset_gram, unit_multiplicity,
    unrank_combination, welch_bound,
    BlockGrams, BripMode, Coherence, SpectrumReport,
};

/// Redundancy factor as an exact ratio.
pub type Beta = Ratio<u64>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameKind {
    Steiner,
    HaarSubsampled,
    HadamardRandomized,
    Gaussian,
    Identity,
    Replication,
}

impl FrameKind {
    pub fn code(self) -> u8 {
        match self {
            FrameKind::Steiner => 0,
            FrameKind::HaarSubsampled => 1,
            FrameKind::HadamardRandomized => 2,
            FrameKind::Gaussian => 3,
            FrameKind::Identity => 4,
            FrameKind::Replication => 5,
        }
    }

    pub fn from_code(c: u8) -> Option<Self> {
        Some(match c {
            0 => FrameKind::Steiner,
            1 => FrameKind::HaarSubsampled,
            2 => FrameKind::HadamardRandomized,
            3 => FrameKind::Gaussian,
            4 => FrameKind::Identity,
            5 => FrameKind::Replication,
            _ => return None,
        })
    }

    /// Kinds whose rows form an equiangular tight frame when untruncated.
    pub fn is_etf(self) -> bool {
        matches!(self, FrameKind::Steiner)
    }
}

/// Constructor parameters; enough to rebuild a frame bit-for-bit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FrameSpec {
    Steiner {
        v: usize,
        /// Keep a seeded subset of this many columns (data coordinates).
        #[serde(default)]
        columns: Option<usize>,
        #[serde(default = "one")]
        split_blocks: usize,
        #[serde(default)]
        seed: u64,
    },
    HaarSubsampled { order: usize, beta: u64, seed: u64 },
    HadamardRandomized { n: usize, beta: u64, seed: u64 },
    Gaussian { n: usize, beta: u64, seed: u64 },
    Identity { n: usize },
    Replication { n: usize, beta: u64 },
}

fn one() -> usize {
    1
}

impl FrameSpec {
    /// Build the frame and partition it across `m` workers.
    pub fn build<T: Scalar>(&self, m: usize) -> Result<Frame<T>> {
        match *self {
            FrameSpec::Steiner { v, columns, split_blocks, seed } => {
                let f = match columns {
                    Some(c) => steiner_etf_truncated(v, c, seed)?,
                    None => steiner_etf(v, seed)?,
                };
                f.with_split_blocks(split_blocks)?.partitioned(m)
            }
            FrameSpec::HaarSubsampled { order, beta, seed } => {
                haar_subsampled(order, beta, seed)?.partitioned(m)
            }
            FrameSpec::HadamardRandomized { n, beta, seed } => {
                hadamard_randomized(n, beta, seed)?.partitioned(m)
            }
            FrameSpec::Gaussian { n, beta, seed } => gaussian_frame(n, beta, seed)?.partitioned(m),
            FrameSpec::Identity { n } => identity_frame(n).partitioned(m),
            FrameSpec::Replication { n, beta } => replication_frame(n, beta, m),
        }
    }

    pub fn kind(&self) -> FrameKind {
        match self {
            FrameSpec::Steiner { .. } => FrameKind::Steiner,
            FrameSpec::HaarSubsampled { .. } => FrameKind::HaarSubsampled,
            FrameSpec::HadamardRandomized { .. } => FrameKind::HadamardRandomized,
            FrameSpec::Gaussian { .. } => FrameKind::Gaussian,
            FrameSpec::Identity { .. } => FrameKind::Identity,
            FrameSpec::Replication { .. } => FrameKind::Replication,
        }
    }

    pub fn seed(&self) -> u64 {
        match *self {
            FrameSpec::Steiner { seed, .. }
            | FrameSpec::HaarSubsampled { seed, .. }
            | FrameSpec::HadamardRandomized { seed, .. }
            | FrameSpec::Gaussian { seed, .. } => seed,
            FrameSpec::Identity { .. } | FrameSpec::Replication { .. } => 0,
        }
    }
}

/// Monotone row offsets delimiting the worker blocks `S_1..S_m`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowBlockPartition {
    offsets: Vec<usize>,
}

impl RowBlockPartition {
    pub fn from_offsets(offsets: Vec<usize>, rows: usize) -> Result<Self> {
        if offsets.len() < 2 || offsets[0] != 0 || *offsets.last().unwrap() != rows {
            return Err(Error::InvalidParameter(format!(
                "partition offsets must run from 0 to {rows}"
            )));
        }
        if offsets.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter("partition blocks must be nonempty".into()));
        }
        Ok(Self { offsets })
    }

    /// Near-equal contiguous blocks.
    pub fn uniform(rows: usize, m: usize) -> Result<Self> {
        if m == 0 || m > rows {
            return Err(Error::InvalidParameter(format!(
                "cannot split {rows} rows into {m} nonempty blocks"
            )));
        }
        Self::from_offsets((0..=m).map(|i| i * rows / m).collect(), rows)
    }

    #[inline]
    pub fn m(&self) -> usize {
        self.offsets.len() - 1
    }

    #[inline]
    pub fn block(&self, i: usize) -> Range<usize> {
        self.offsets[i]..self.offsets[i + 1]
    }

    pub fn offsets(&self) -> &[usize] {
        &self.offsets
    }
}

/// Which uncoded partition each replication block carries.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReplicationMeta {
    pub partitions: usize,
    pub partition_of_block: Vec<usize>,
}

impl ReplicationMeta {
    /// Distinct partitions covered by `blocks` (first occurrence wins) and
    /// the blocks that survive after duplicates are discarded.
    pub fn dedup(&self, blocks: &[usize]) -> (Vec<usize>, Vec<usize>) {
        let mut seen = vec![false; self.partitions];
        let mut kept = Vec::new();
        for &b in blocks {
            let p = self.partition_of_block[b];
            if !seen[p] {
                seen[p] = true;
                kept.push(b);
            }
        }
        let covered = (0..self.partitions).filter(|&p| seen[p]).collect();
        (covered, kept)
    }
}

#[derive(Clone, Debug)]
pub(crate) enum Storage<T> {
    /// Each row is a standard basis vector `e_{col}`.
    Selection { row_to_col: Vec<usize> },
    Steiner(SteinerLayout<T>),
    Haar { order: usize, columns: Vec<usize>, scale: T },
    Hadamard { len: usize, positions: Vec<usize>, scale: T },
    Dense(Matrix<T>),
}

#[derive(Clone, Debug)]
pub(crate) struct SteinerLayout<T> {
    pub v: usize,
    pub split: usize,
    pub scale: T,
    /// For each row of the incidence matrix: (Hadamard column, frame column).
    pub terms: Vec<Vec<(usize, usize)>>,
}

#[derive(Clone, Debug)]
struct SteinerSegment {
    lo: usize,
    hi: usize,
    /// (Hadamard column, position within the block support).
    terms: Vec<(usize, usize)>,
}

#[derive(Clone, Debug)]
enum BlockKernel<T> {
    Selection { pos: Vec<usize> },
    Steiner { segments: Vec<SteinerSegment> },
    Global,
    Dense { local: Matrix<T> },
}

#[derive(Clone, Debug)]
struct BlockLayout<T> {
    rows: Range<usize>,
    support: Vec<usize>,
    kernel: BlockKernel<T>,
}

/// Encoding operator with structured storage and a worker partition.
#[derive(Clone, Debug)]
pub struct Frame<T> {
    kind: FrameKind,
    n: usize,
    rows: usize,
    beta: Beta,
    spec: FrameSpec,
    storage: Storage<T>,
    partition: RowBlockPartition,
    blocks: Vec<BlockLayout<T>>,
    replication: Option<ReplicationMeta>,
}

impl<T: Scalar> Frame<T> {
    pub(crate) fn assemble(
        kind: FrameKind,
        n: usize,
        rows: usize,
        beta: Beta,
        spec: FrameSpec,
        storage: Storage<T>,
        partition: RowBlockPartition,
        replication: Option<ReplicationMeta>,
    ) -> Result<Self> {
        if rows < n {
            return Err(Error::InvalidParameter(format!("frame has {rows} rows < n = {n}")));
        }
        let mut f = Self {
            kind,
            n,
            rows,
            beta,
            spec,
            storage,
            partition,
            blocks: Vec::new(),
            replication,
        };
        f.blocks = (0..f.partition.m()).map(|i| f.layout_block(i)).collect();
        Ok(f)
    }

    pub fn kind(&self) -> FrameKind {
        self.kind
    }

    /// Column count (dimension being encoded).
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Tight-frame constant: `SᵀS = βI` for tight kinds.
    pub fn beta(&self) -> Beta {
        self.beta
    }

    pub fn beta_f64(&self) -> f64 {
        *self.beta.numer() as f64 / *self.beta.denom() as f64
    }

    pub fn spec(&self) -> &FrameSpec {
        &self.spec
    }

    pub fn seed(&self) -> u64 {
        self.spec.seed()
    }

    pub fn partition(&self) -> &RowBlockPartition {
        &self.partition
    }

    pub fn m(&self) -> usize {
        self.partition.m()
    }

    pub fn replication(&self) -> Option<&ReplicationMeta> {
        self.replication.as_ref()
    }

    /// Whether `SᵀS = βI` holds by construction.
    pub fn is_tight(&self) -> bool {
        !matches!(self.kind, FrameKind::Gaussian)
    }

    pub fn block_rows(&self, i: usize) -> Range<usize> {
        self.blocks[i].rows.clone()
    }

    /// Columns touched by block `i` (sorted). Rows of the encoded data
    /// outside this set are multiplied by zero in `S_i X`.
    pub fn block_support(&self, i: usize) -> &[usize] {
        &self.blocks[i].support
    }

    /// Re-partition across `m` workers.
    pub fn partitioned(mut self, m: usize) -> Result<Self> {
        self.partition = match (&self.storage, self.kind) {
            (Storage::Steiner(layout), _) => steiner_partition(layout.v, layout.split, m)?,
            (_, FrameKind::Replication) => {
                if m != self.partition.m() {
                    return Err(Error::InvalidParameter(
                        "replication frames are built for a fixed worker count".into(),
                    ));
                }
                self.partition.clone()
            }
            _ => RowBlockPartition::uniform(self.rows, m)?,
        };
        self.blocks = (0..self.partition.m()).map(|i| self.layout_block(i)).collect();
        Ok(self)
    }

    /// Split every Steiner block into `split` contiguous row chunks so that
    /// workers can hold partial blocks.
    pub fn with_split_blocks(mut self, split: usize) -> Result<Self> {
        match &mut self.storage {
            Storage::Steiner(layout) => {
                if split == 0 || layout.v % split != 0 {
                    return Err(Error::InvalidParameter(format!(
                        "split_blocks {split} must divide v = {}",
                        layout.v
                    )));
                }
                layout.split = split;
                if let FrameSpec::Steiner { split_blocks, .. } = &mut self.spec {
                    *split_blocks = split;
                }
                let m = layout.v * split;
                self.partitioned(m)
            }
            _ if split == 1 => Ok(self),
            _ => Err(Error::InvalidParameter("split_blocks applies to Steiner frames only".into())),
        }
    }

    fn layout_block(&self, i: usize) -> BlockLayout<T> {
        let rows = self.partition.block(i);
        match &self.storage {
            Storage::Selection { row_to_col } => {
                let mut support: Vec<usize> = row_to_col[rows.clone()].to_vec();
                support.sort_unstable();
                support.dedup();
                let pos = row_to_col[rows.clone()]
                    .iter()
                    .map(|c| support.binary_search(c).unwrap())
                    .collect();
                BlockLayout { rows, support, kernel: BlockKernel::Selection { pos } }
            }
            Storage::Steiner(layout) => {
                let v = layout.v;
                let mut pieces = Vec::new();
                let mut r = rows.start;
                while r < rows.end {
                    let vrow = r / v;
                    let lo = r % v;
                    let hi = (rows.end - vrow * v).min(v);
                    pieces.push((vrow, lo, hi));
                    r = vrow * v + hi;
                }
                let mut support: Vec<usize> = pieces
                    .iter()
                    .flat_map(|&(vrow, _, _)| layout.terms[vrow].iter().map(|&(_, c)| c))
                    .collect();
                support.sort_unstable();
                support.dedup();
                let segments = pieces
                    .into_iter()
                    .map(|(vrow, lo, hi)| SteinerSegment {
                        lo,
                        hi,
                        terms: layout.terms[vrow]
                            .iter()
                            .map(|&(h, c)| (h, support.binary_search(&c).unwrap()))
                            .collect(),
                    })
                    .collect();
                BlockLayout { rows, support, kernel: BlockKernel::Steiner { segments } }
            }
            Storage::Hadamard { .. } => {
                BlockLayout { rows, support: (0..self.n).collect(), kernel: BlockKernel::Global }
            }
            Storage::Haar { .. } => {
                let mut hit = vec![false; self.n];
                for r in rows.clone() {
                    let mut e = vec![T::zero(); self.rows];
                    e[r] = T::one();
                    for (c, val) in self.apply_transpose_fast(&e).into_iter().enumerate() {
                        if val != T::zero() {
                            hit[c] = true;
                        }
                    }
                }
                let support = (0..self.n).filter(|&c| hit[c]).collect();
                BlockLayout { rows, support, kernel: BlockKernel::Global }
            }
            Storage::Dense(mat) => {
                let support: Vec<usize> = (0..self.n)
                    .filter(|&c| rows.clone().any(|r| mat[(r, c)] != T::zero()))
                    .collect();
                let local = Matrix::from_fn(rows.len(), support.len(), |i, j| {
                    mat[(rows.start + i, support[j])]
                });
                BlockLayout { rows, support, kernel: BlockKernel::Dense { local } }
            }
        }
    }

    /// `S_i x` where `x_support` holds the entries of `x` on
    /// [`block_support(i)`](Self::block_support).
    pub fn apply_block_support(&self, i: usize, x_support: &[T]) -> Result<Vec<T>> {
        let b = &self.blocks[i];
        check_len(b.support.len(), x_support.len())?;
        Ok(match &b.kernel {
            BlockKernel::Selection { pos } => pos.iter().map(|&p| x_support[p]).collect(),
            BlockKernel::Steiner { segments } => {
                let layout = self.steiner_layout();
                let mut out = Vec::with_capacity(b.rows.len());
                let mut z = vec![T::zero(); layout.v];
                for seg in segments {
                    z.iter_mut().for_each(|e| *e = T::zero());
                    for &(h, p) in &seg.terms {
                        z[h] = x_support[p];
                    }
                    fwht(&mut z);
                    out.extend(z[seg.lo..seg.hi].iter().map(|&e| e * layout.scale));
                }
                out
            }
            BlockKernel::Global => {
                let mut x = vec![T::zero(); self.n];
                for (&c, &val) in b.support.iter().zip(x_support) {
                    x[c] = val;
                }
                let full = self.apply_fast(&x);
                full[b.rows.clone()].to_vec()
            }
            BlockKernel::Dense { local } => local.matvec(x_support)?,
        })
    }

    /// `S_iᵀ u` restricted to the block support.
    pub fn apply_block_transpose_support(&self, i: usize, u: &[T]) -> Result<Vec<T>> {
        let b = &self.blocks[i];
        check_len(b.rows.len(), u.len())?;
        Ok(match &b.kernel {
            BlockKernel::Selection { pos } => {
                let mut out = vec![T::zero(); b.support.len()];
                for (&p, &val) in pos.iter().zip(u) {
                    out[p] += val;
                }
                out
            }
            BlockKernel::Steiner { segments } => {
                let layout = self.steiner_layout();
                let mut out = vec![T::zero(); b.support.len()];
                let mut z = vec![T::zero(); layout.v];
                let mut offset = 0;
                for seg in segments {
                    z.iter_mut().for_each(|e| *e = T::zero());
                    let len = seg.hi - seg.lo;
                    z[seg.lo..seg.hi].copy_from_slice(&u[offset..offset + len]);
                    offset += len;
                    fwht(&mut z);
                    for &(h, p) in &seg.terms {
                        out[p] += z[h] * layout.scale;
                    }
                }
                out
            }
            BlockKernel::Global => {
                let mut full = vec![T::zero(); self.rows];
                full[b.rows.clone()].copy_from_slice(u);
                let back = self.apply_transpose_fast(&full);
                b.support.iter().map(|&c| back[c]).collect()
            }
            BlockKernel::Dense { local } => local.tr_matvec(u)?,
        })
    }

    /// `S_i x` for a full-length `x`.
    pub fn apply_block(&self, i: usize, x: &[T]) -> Result<Vec<T>> {
        check_len(self.n, x.len())?;
        let xs: Vec<T> = self.blocks[i].support.iter().map(|&c| x[c]).collect();
        self.apply_block_support(i, &xs)
    }

    /// `S_iᵀ u` as a full-length vector.
    pub fn apply_block_transpose(&self, i: usize, u: &[T]) -> Result<Vec<T>> {
        let part = self.apply_block_transpose_support(i, u)?;
        let mut out = vec![T::zero(); self.n];
        for (&c, &val) in self.blocks[i].support.iter().zip(&part) {
            out[c] = val;
        }
        Ok(out)
    }

    /// `S x`.
    pub fn apply(&self, x: &[T]) -> Result<Vec<T>> {
        check_len(self.n, x.len())?;
        if matches!(self.storage, Storage::Haar { .. } | Storage::Hadamard { .. }) {
            return Ok(self.apply_fast(x));
        }
        let mut out = Vec::with_capacity(self.rows);
        for i in 0..self.m() {
            out.extend(self.apply_block(i, x)?);
        }
        Ok(out)
    }

    /// `Sᵀ u`.
    pub fn apply_transpose(&self, u: &[T]) -> Result<Vec<T>> {
        check_len(self.rows, u.len())?;
        if matches!(self.storage, Storage::Haar { .. } | Storage::Hadamard { .. }) {
            return Ok(self.apply_transpose_fast(u));
        }
        let mut out = vec![T::zero(); self.n];
        for i in 0..self.m() {
            let rows = self.block_rows(i);
            let part = self.apply_block_transpose_support(i, &u[rows])?;
            for (&c, &val) in self.blocks[i].support.iter().zip(&part) {
                out[c] += val;
            }
        }
        Ok(out)
    }

    fn steiner_layout(&self) -> &SteinerLayout<T> {
        match &self.storage {
            Storage::Steiner(l) => l,
            _ => unreachable!("Steiner kernel on non-Steiner storage"),
        }
    }

    /// Whole-operator transform for the transform-backed kinds.
    fn apply_fast(&self, x: &[T]) -> Vec<T> {
        match &self.storage {
            Storage::Hadamard { len, positions, scale } => {
                let mut z = vec![T::zero(); *len];
                for (&p, &val) in positions.iter().zip(x) {
                    z[p] = val;
                }
                fwht(&mut z);
                z.iter_mut().for_each(|e| *e *= *scale);
                z
            }
            Storage::Haar { order, columns, scale } => {
                let mut z = vec![T::zero(); *order];
                for (&c, &val) in columns.iter().zip(x) {
                    z[c] = val;
                }
                let mut y = haar_forward(&z);
                y.iter_mut().for_each(|e| *e *= *scale);
                y
            }
            _ => unreachable!("fast apply is only defined for transform kinds"),
        }
    }

    fn apply_transpose_fast(&self, u: &[T]) -> Vec<T> {
        match &self.storage {
            Storage::Hadamard { positions, scale, .. } => {
                let mut z = u.to_vec();
                fwht(&mut z);
                positions.iter().map(|&p| z[p] * *scale).collect()
            }
            Storage::Haar { columns, scale, .. } => {
                let z = haar_transpose(u);
                columns.iter().map(|&c| z[c] * *scale).collect()
            }
            _ => unreachable!("fast apply is only defined for transform kinds"),
        }
    }

    /// Dense materialization (rows x n), column by column through `apply`.
    pub fn to_dense(&self) -> Matrix<T> {
        let mut out = Matrix::zeros(self.rows, self.n);
        let mut e = vec![T::zero(); self.n];
        for j in 0..self.n {
            e[j] = T::one();
            let col = self.apply(&e).expect("unit vector has matching length");
            for (i, v) in col.into_iter().enumerate() {
                out[(i, j)] = v;
            }
            e[j] = T::zero();
        }
        out
    }

    /// Dense rows `rows` of `S`.
    pub fn dense_rows(&self, rows: Range<usize>) -> Matrix<T> {
        let mut out = Matrix::zeros(rows.len(), self.n);
        let mut e = vec![T::zero(); self.rows];
        for (k, r) in rows.enumerate() {
            e[r] = T::one();
            let row = self.apply_transpose(&e).expect("unit vector has matching length");
            out.row_mut(k).copy_from_slice(&row);
            e[r] = T::zero();
        }
        out
    }

    /// Dense `S_i`.
    pub fn dense_block(&self, i: usize) -> Matrix<T> {
        self.dense_rows(self.block_rows(i))
    }

    /// Gaussian frames keep their dense entries.
    pub(crate) fn dense_entries(&self) -> Option<&Matrix<T>> {
        match &self.storage {
            Storage::Dense(m) => Some(m),
            _ => None,
        }
    }
}

fn steiner_partition(v: usize, split: usize, m: usize) -> Result<RowBlockPartition> {
    let chunks = v * split;
    if m == 0 || chunks % m != 0 {
        return Err(Error::InvalidParameter(format!(
            "{m} workers cannot share {chunks} Steiner blocks evenly (v = {v}, split = {split})"
        )));
    }
    let per = chunks / m;
    let chunk_rows = v / split;
    RowBlockPartition::from_offsets((0..=m).map(|i| i * per * chunk_rows).collect(), v * v)
}
