//! Worker-side views of an encoded data-parallel problem.
//!
//! Worker `i` holds `S_iX` and `S_iy`. Only samples in the block support of
//! `S_i` matter; every other row of `X` meets a zero column of `S_i`.

use std::ops::Range;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{DataParallelProblem, Regularizer};
use crate::error::{check_len, Error, Result};
use crate::frames::Frame;
use crate::linalg::{axpy, norm_sq, Cholesky, Matrix};
use crate::scalar::Scalar;

/// How a worker evaluates its partial gradient.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradientPath {
    /// Dense `S_iX` cached at encode time.
    Cached,
    /// Raw sample rows on the block support pushed through the fast operator.
    RawRows,
}

#[derive(Clone, Debug)]
pub struct DataShard<T> {
    pub rows: Range<usize>,
    pub support: Vec<usize>,
    pub sx: Matrix<T>,
    pub sy: Vec<T>,
}

impl<T: Scalar> DataShard<T> {
    /// `S_i(Xw − y)`.
    pub fn encoded_residual(&self, w: &[T]) -> Result<Vec<T>> {
        let mut r = self.sx.matvec(w)?;
        for (ri, &yi) in r.iter_mut().zip(&self.sy) {
            *ri -= yi;
        }
        Ok(r)
    }

    /// `XᵀS_iᵀS_i(Xw − y)`.
    pub fn gradient(&self, w: &[T]) -> Result<Vec<T>> {
        let r = self.encoded_residual(w)?;
        self.sx.tr_matvec(&r)
    }

    /// `‖S_iXd‖²`.
    pub fn curvature(&self, d: &[T]) -> Result<T> {
        Ok(norm_sq(&self.sx.matvec(d)?))
    }

    /// `‖S_i(Xw − y)‖²`.
    pub fn loss(&self, w: &[T]) -> Result<T> {
        Ok(norm_sq(&self.encoded_residual(w)?))
    }
}

/// All worker shards for one (problem, frame) pair.
#[derive(Clone, Debug)]
pub struct DataShards<T> {
    shards: Vec<DataShard<T>>,
    n: usize,
    p: usize,
    beta: f64,
}

impl<T: Scalar> DataShards<T> {
    pub fn encode(problem: &DataParallelProblem<T>, frame: &Frame<T>) -> Result<Self> {
        check_len(frame.n(), problem.n())?;
        let shards = (0..frame.m())
            .into_par_iter()
            .map(|i| encode_block(problem, frame, i))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { shards, n: problem.n(), p: problem.p(), beta: frame.beta_f64() })
    }

    pub fn m(&self) -> usize {
        self.shards.len()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn shard(&self, i: usize) -> &DataShard<T> {
        &self.shards[i]
    }

    /// Rows held by worker `i` (compute-cost accounting).
    pub fn block_len(&self, i: usize) -> usize {
        self.shards[i].rows.len()
    }

    /// `1/(nβη)` for a subset of the given size.
    pub fn subset_scale(&self, size: usize) -> T {
        let eta = size as f64 / self.m() as f64;
        T::of(1.0 / (self.n as f64 * self.beta * eta))
    }

    /// `(1/(2nβη)) Σ_A ‖S_i(Xw − y)‖²`.
    pub fn encoded_loss(&self, subset: &[usize], w: &[T]) -> Result<T> {
        if subset.is_empty() {
            return Err(Error::EmptySubset);
        }
        let mut acc = T::zero();
        for &i in subset {
            acc += self.shards[i].loss(w)?;
        }
        Ok(acc * self.subset_scale(subset.len()) * T::of(0.5))
    }

    /// `(1/(nβη)) Σ_A XᵀS_iᵀS_i(Xw − y)`.
    pub fn encoded_gradient(&self, subset: &[usize], w: &[T]) -> Result<Vec<T>> {
        if subset.is_empty() {
            return Err(Error::EmptySubset);
        }
        let mut g = vec![T::zero(); self.p];
        for &i in subset {
            axpy(T::one(), &self.shards[i].gradient(w)?, &mut g);
        }
        let s = self.subset_scale(subset.len());
        g.iter_mut().for_each(|v| *v *= s);
        Ok(g)
    }

    /// Exact minimizer of the encoded objective restricted to `subset`,
    /// `(1/(2nβη))‖S_A(Xw − y)‖² + λh(w)`, for smooth `h`.
    pub fn subset_minimizer(&self, subset: &[usize], lambda: T, reg: Regularizer) -> Result<Vec<T>> {
        if subset.is_empty() {
            return Err(Error::EmptySubset);
        }
        if !reg.is_smooth() {
            return Err(Error::NonSmoothRegularizer("l1"));
        }
        let s = self.subset_scale(subset.len());
        let mut a = Matrix::zeros(self.p, self.p);
        let mut b = vec![T::zero(); self.p];
        for &i in subset {
            let sh = &self.shards[i];
            a.add_assign(&sh.sx.gram());
            axpy(T::one(), &sh.sx.tr_matvec(&sh.sy)?, &mut b);
        }
        a.scale(s);
        b.iter_mut().for_each(|v| *v *= s);
        if reg == Regularizer::SquaredL2 {
            for j in 0..self.p {
                a[(j, j)] += lambda;
            }
        }
        Cholesky::factor(&a)?.solve(&b)
    }
}

fn encode_block<T: Scalar>(
    problem: &DataParallelProblem<T>,
    frame: &Frame<T>,
    i: usize,
) -> Result<DataShard<T>> {
    let support = frame.block_support(i).to_vec();
    let rows = frame.block_rows(i);
    let xs = problem.x().select_rows(&support);
    let p = problem.p();
    let mut sx = Matrix::zeros(rows.len(), p);
    for j in 0..p {
        let col = frame.apply_block_support(i, &xs.column(j))?;
        for (r, v) in col.into_iter().enumerate() {
            sx[(r, j)] = v;
        }
    }
    let ys: Vec<T> = support.iter().map(|&s| problem.y()[s]).collect();
    let sy = frame.apply_block_support(i, &ys)?;
    Ok(DataShard { rows, support, sx, sy })
}

/// Worker `i`'s partial gradient `XᵀS_iᵀS_i(Xw − y)`.
pub fn partial_gradient_data<T: Scalar>(
    problem: &DataParallelProblem<T>,
    frame: &Frame<T>,
    shards: Option<&DataShards<T>>,
    i: usize,
    w: &[T],
    path: GradientPath,
) -> Result<Vec<T>> {
    check_len(problem.p(), w.len())?;
    match (path, shards) {
        (GradientPath::Cached, Some(s)) => s.shard(i).gradient(w),
        (GradientPath::Cached, None) => encode_block(problem, frame, i)?.gradient(w),
        (GradientPath::RawRows, _) => {
            let support = frame.block_support(i);
            let xs = problem.x().select_rows(support);
            let mut r = xs.matvec(w)?;
            for (rk, &s) in r.iter_mut().zip(support) {
                *rk -= problem.y()[s];
            }
            let sr = frame.apply_block_support(i, &r)?;
            let back = frame.apply_block_transpose_support(i, &sr)?;
            xs.tr_matvec(&back)
        }
    }
}
