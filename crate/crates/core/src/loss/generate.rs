//! Seeded synthetic workloads. One ChaCha stream per instance, consumed in a
//! fixed order (X, then w*, then noise), so instances are bit-reproducible.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{DataParallelProblem, ModelParallelProblem, Phi, Regularizer};
use crate::error::{Error, Result};
use crate::linalg::{dot, Matrix};
use crate::scalar::Scalar;

#[derive(Clone, Debug)]
pub struct GeneratedInstance<T> {
    pub problem: DataParallelProblem<T>,
    pub w_star_true: Vec<T>,
    pub sigma: f64,
    pub seed: u64,
}

fn normals<T: Scalar>(rng: &mut ChaCha8Rng, len: usize, sd: f64) -> Vec<T> {
    (0..len)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            T::of(sd * z)
        })
        .collect()
}

fn linear_model<T: Scalar>(
    x: Matrix<T>,
    w: Vec<T>,
    sigma: f64,
    seed: u64,
    rng: &mut ChaCha8Rng,
) -> Result<GeneratedInstance<T>> {
    let mut y = x.matvec(&w)?;
    let noise: Vec<T> = normals(rng, y.len(), sigma);
    for (yi, e) in y.iter_mut().zip(noise) {
        *yi += e;
    }
    Ok(GeneratedInstance {
        problem: DataParallelProblem::new(x, y, T::zero(), Regularizer::None)?,
        w_star_true: w,
        sigma,
        seed,
    })
}

/// `X` i.i.d. N(0,1), `w*` i.i.d. N(0,1), `y = Xw* + σz`.
pub fn generate_regression<T: Scalar>(
    n: usize,
    p: usize,
    sigma: f64,
    seed: u64,
) -> Result<GeneratedInstance<T>> {
    if n == 0 || p == 0 {
        return Err(Error::InvalidParameter("n and p must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = Matrix::gaussian(n, p, 1.0, &mut rng);
    let w = normals(&mut rng, p, 1.0);
    linear_model(x, w, sigma, seed, &mut rng)
}

/// Like [`generate_regression`] but `w*` has exactly `nnz` nonzeros at seeded
/// positions with values N(0, amp_var).
pub fn generate_sparse_regression<T: Scalar>(
    n: usize,
    p: usize,
    nnz: usize,
    amp_var: f64,
    sigma: f64,
    seed: u64,
) -> Result<GeneratedInstance<T>> {
    if n == 0 || p == 0 {
        return Err(Error::InvalidParameter("n and p must be positive".into()));
    }
    if nnz > p {
        return Err(Error::InvalidParameter(format!("nnz {nnz} exceeds p {p}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = Matrix::gaussian(n, p, 1.0, &mut rng);
    let mut pos = sample(&mut rng, p, nnz).into_vec();
    pos.sort_unstable();
    let mut w = vec![T::zero(); p];
    let sd = amp_var.sqrt();
    for &j in &pos {
        let z: f64 = StandardNormal.sample(&mut rng);
        // a planted coordinate must be nonzero for support recovery to be defined
        w[j] = T::of(if z == 0.0 { sd } else { sd * z });
    }
    linear_model(x, w, sigma, seed, &mut rng)
}

#[derive(Clone, Debug)]
pub struct LogisticInstance<T> {
    pub problem: ModelParallelProblem<T>,
    /// Sign-folded samples `y_i [x_i, 1]`.
    pub folded: Matrix<T>,
    /// Planted separator including the bias as its last entry.
    pub w_true: Vec<T>,
    pub lambda: f64,
    pub seed: u64,
}

/// Planted logistic model with an unregularized bias column.
///
/// The model dimension is `p + 1` (bias last). Labels are drawn from
/// `P(y = 1) = σ(10·xᵀw)` with `w ~ N(0, I/p)`. The ridge term `λ‖w‖²` on
/// the `p` feature weights rides along as `p` extra rows `√(2λ)·e_j` of the
/// data matrix so that `g(w) = φ(Xw)` stays a single smooth composite.
pub fn generate_logistic<T: Scalar>(
    n: usize,
    p: usize,
    lambda: f64,
    seed: u64,
) -> Result<LogisticInstance<T>> {
    if n == 0 || p == 0 {
        return Err(Error::InvalidParameter("n and p must be positive".into()));
    }
    if lambda < 0.0 {
        return Err(Error::InvalidParameter("lambda must be nonnegative".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let feats: Matrix<f64> = Matrix::gaussian(n, p, 1.0, &mut rng);
    let mut w_true: Vec<f64> = normals(&mut rng, p, 1.0 / (p as f64).sqrt());
    let bias: f64 = 0.0;
    w_true.push(bias);
    let mut folded = Matrix::zeros(n, p + 1);
    for i in 0..n {
        let mut row = feats.row(i).to_vec();
        row.push(1.0);
        let margin = dot(&row, &w_true);
        let prob = 1.0 / (1.0 + (-10.0 * margin).exp());
        let label = if rng.random::<f64>() < prob { 1.0 } else { -1.0 };
        for (j, v) in row.into_iter().enumerate() {
            folded[(i, j)] = T::of(label * v);
        }
    }
    let ridge = (2.0 * lambda).sqrt();
    let rows = if lambda > 0.0 { n + p } else { n };
    let x = Matrix::from_fn(rows, p + 1, |r, c| {
        if r < n {
            folded[(r, c)]
        } else if c == r - n {
            T::of(ridge)
        } else {
            T::zero()
        }
    });
    Ok(LogisticInstance {
        problem: ModelParallelProblem::new(x, Phi::Logistic { samples: n })?,
        folded,
        w_true: w_true.into_iter().map(T::of).collect(),
        lambda,
        seed,
    })
}
