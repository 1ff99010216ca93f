//! Optimization problems, their oracles, synthetic instances and metrics.
//!
//! Data parallel: `f(w) = (1/2n)‖Xw − y‖² + λh(w)`.
//! Model parallel: `g(w) = φ(Xw)` with φ smooth and convex.

mod encoded;
mod generate;
mod model;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::linalg::{dot, norm_sq, power_iteration, Cholesky, Matrix};
use crate::scalar::Scalar;

pub use encoded::{partial_gradient_data, DataShard, DataShards, GradientPath};
pub use generate::{
    generate_logistic, generate_regression, generate_sparse_regression, GeneratedInstance,
    LogisticInstance,
};
pub use model::{partial_gradient_model, ModelParallelProblem, ModelShard, ModelShards, Phi};

/// Power-iteration settings used for smoothness estimates.
pub const POWER_TOL: f64 = 1e-6;
pub const POWER_MAX_ITER: usize = 500;

/// `h` with `h(w) ≥ 0`. Squared L2 is `½‖w‖²` (so `∇h = w`, `L_h = 1`).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regularizer {
    #[default]
    None,
    SquaredL2,
    L1,
}

impl Regularizer {
    pub fn value<T: Scalar>(self, w: &[T]) -> T {
        match self {
            Regularizer::None => T::zero(),
            Regularizer::SquaredL2 => T::of(0.5) * norm_sq(w),
            Regularizer::L1 => w.iter().map(|x| x.abs()).sum(),
        }
    }

    pub fn gradient<T: Scalar>(self, w: &[T]) -> Result<Vec<T>> {
        match self {
            Regularizer::None => Ok(vec![T::zero(); w.len()]),
            Regularizer::SquaredL2 => Ok(w.to_vec()),
            Regularizer::L1 => Err(Error::NonSmoothRegularizer("l1")),
        }
    }

    pub fn is_smooth(self) -> bool {
        !matches!(self, Regularizer::L1)
    }

    /// Lipschitz constant of `∇h`.
    pub fn smoothness(self) -> f64 {
        match self {
            Regularizer::None => 0.0,
            Regularizer::SquaredL2 => 1.0,
            Regularizer::L1 => f64::INFINITY,
        }
    }

    /// `argmin_x  t·h(x) + ½‖x − z‖²` where `t = τλ`.
    pub fn prox<T: Scalar>(self, t: T, z: &[T]) -> Vec<T> {
        match self {
            Regularizer::None => z.to_vec(),
            Regularizer::SquaredL2 => z.iter().map(|&x| x / (T::one() + t)).collect(),
            Regularizer::L1 => z
                .iter()
                .map(|&x| x.signum() * (x.abs() - t).max(T::zero()))
                .collect(),
        }
    }
}

/// `f(w) = (1/2n)‖Xw − y‖² + λh(w)`, rows of `X` are samples.
#[derive(Clone, Debug)]
pub struct DataParallelProblem<T> {
    x: Matrix<T>,
    y: Vec<T>,
    lambda: T,
    reg: Regularizer,
}

impl<T: Scalar> DataParallelProblem<T> {
    pub fn new(x: Matrix<T>, y: Vec<T>, lambda: T, reg: Regularizer) -> Result<Self> {
        check_len(x.rows(), y.len())?;
        if !(lambda >= T::zero()) {
            return Err(Error::InvalidParameter("lambda must be nonnegative".into()));
        }
        if !x.is_finite() || y.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("data must be finite".into()));
        }
        Ok(Self { x, y, lambda, reg })
    }

    pub fn with_regularizer(mut self, reg: Regularizer, lambda: T) -> Self {
        self.reg = reg;
        self.lambda = lambda;
        self
    }

    pub fn x(&self) -> &Matrix<T> {
        &self.x
    }

    pub fn y(&self) -> &[T] {
        &self.y
    }

    pub fn lambda(&self) -> T {
        self.lambda
    }

    pub fn reg(&self) -> Regularizer {
        self.reg
    }

    pub fn n(&self) -> usize {
        self.x.rows()
    }

    pub fn p(&self) -> usize {
        self.x.cols()
    }

    pub fn residual(&self, w: &[T]) -> Result<Vec<T>> {
        let mut r = self.x.matvec(w)?;
        for (ri, &yi) in r.iter_mut().zip(&self.y) {
            *ri -= yi;
        }
        Ok(r)
    }

    /// `(1/2n)‖Xw − y‖²`.
    pub fn loss(&self, w: &[T]) -> Result<T> {
        let r = self.residual(w)?;
        Ok(norm_sq(&r) / T::of_usize(2 * self.n()))
    }

    pub fn objective(&self, w: &[T]) -> Result<T> {
        Ok(self.loss(w)? + self.lambda * self.reg.value(w))
    }

    /// `Xᵀ(Xw − y)/n`.
    pub fn loss_gradient(&self, w: &[T]) -> Result<Vec<T>> {
        let r = self.residual(w)?;
        let mut g = self.x.tr_matvec(&r)?;
        let inv = T::one() / T::of_usize(self.n());
        g.iter_mut().for_each(|v| *v *= inv);
        Ok(g)
    }

    /// Gradient of `f`; fails for non-smooth `h`.
    pub fn gradient(&self, w: &[T]) -> Result<Vec<T>> {
        let mut g = self.loss_gradient(w)?;
        let gh = self.reg.gradient(w)?;
        for (gi, hi) in g.iter_mut().zip(gh) {
            *gi += self.lambda * hi;
        }
        Ok(g)
    }

    /// `M = λ_max(XᵀX)/n` by power iteration.
    pub fn smoothness(&self) -> T {
        let n = T::of_usize(self.n());
        power_iteration(
            self.p(),
            |v| {
                let xv = self.x.matvec(v).expect("dims");
                self.x.tr_matvec(&xv).expect("dims").into_iter().map(|e| e / n).collect()
            },
            POWER_TOL,
            POWER_MAX_ITER,
            0x5eed,
        )
    }

    /// Extreme eigenvalues of `XᵀX/n` by dense decomposition.
    pub fn curvature_range(&self) -> (T, T) {
        let mut g = self.x.gram();
        g.scale(T::one() / T::of_usize(self.n()));
        let e = g.symmetric_eigenvalues();
        (e[0], e[e.len() - 1])
    }

    /// Exact minimizer for smooth `h` via the normal equations.
    pub fn solve_exact(&self) -> Result<Vec<T>> {
        if !self.reg.is_smooth() {
            return Err(Error::NonSmoothRegularizer("l1"));
        }
        let n = T::of_usize(self.n());
        let mut a = self.x.gram();
        a.scale(T::one() / n);
        if self.reg == Regularizer::SquaredL2 {
            for i in 0..self.p() {
                a[(i, i)] += self.lambda;
            }
        }
        let b: Vec<T> = self.x.tr_matvec(&self.y)?.into_iter().map(|e| e / n).collect();
        Cholesky::factor(&a)?.solve(&b)
    }

    /// Norm of the minimum-norm subgradient of `f` at `w` (zero at optimum).
    pub fn optimality_residual(&self, w: &[T]) -> Result<T> {
        let g = self.loss_gradient(w)?;
        let lam = self.lambda;
        let r: Vec<T> = match self.reg {
            Regularizer::L1 => g
                .iter()
                .zip(w)
                .map(|(&gi, &wi)| {
                    if wi != T::zero() {
                        gi + lam * wi.signum()
                    } else {
                        (gi.abs() - lam).max(T::zero())
                    }
                })
                .collect(),
            _ => {
                let gh = self.reg.gradient(w)?;
                g.iter().zip(gh).map(|(&a, b)| a + lam * b).collect()
            }
        };
        Ok(norm_sq(&r).sqrt())
    }
}

/// Support-recovery scores.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct F1Score {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Precision or recall had an empty denominator, or `P + R = 0`.
    pub degenerate: bool,
}

/// F1 of the support of `w_hat` against that of `w_star`. The default
/// `zero_tol` is `1e-6·max|ŵ|`.
pub fn f1_score<T: Scalar>(w_hat: &[T], w_star: &[T], zero_tol: Option<T>) -> Result<F1Score> {
    check_len(w_star.len(), w_hat.len())?;
    let tol = zero_tol
        .unwrap_or_else(|| T::of(1e-6) * w_hat.iter().fold(T::zero(), |m, &v| m.max(v.abs())));
    let est: Vec<bool> = w_hat.iter().map(|v| v.abs() > tol).collect();
    let truth: Vec<bool> = w_star.iter().map(|v| v.abs() > tol).collect();
    let hits = est.iter().zip(&truth).filter(|(a, b)| **a && **b).count() as f64;
    let n_est = est.iter().filter(|&&b| b).count() as f64;
    let n_true = truth.iter().filter(|&&b| b).count() as f64;
    let mut degenerate = false;
    let precision = if n_est > 0.0 {
        hits / n_est
    } else {
        degenerate = true;
        0.0
    };
    let recall = if n_true > 0.0 {
        hits / n_true
    } else {
        degenerate = true;
        0.0
    };
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        degenerate = true;
        0.0
    };
    Ok(F1Score { precision, recall, f1, degenerate })
}

/// Central finite-difference gradient (test and audit helper).
pub fn finite_difference_gradient(f: impl Fn(&[f64]) -> f64, w: &[f64], h: f64) -> Vec<f64> {
    let mut x = w.to_vec();
    (0..w.len())
        .map(|i| {
            let orig = x[i];
            x[i] = orig + h;
            let up = f(&x);
            x[i] = orig - h;
            let down = f(&x);
            x[i] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Fraction of samples with `sign(zᵢᵀw) > 0` for sign-folded rows `zᵢ`.
pub fn folded_accuracy<T: Scalar>(z: &Matrix<T>, w: &[T]) -> f64 {
    let hits = (0..z.rows()).filter(|&i| dot(z.row(i), w) > T::zero()).count();
    hits as f64 / z.rows().max(1) as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn soft_threshold_arithmetic() {
        assert_eq!(Regularizer::L1.prox(1.0, &[3.0, 0.5, -2.5]), vec![2.0, 0.0, -1.5]);
        assert_eq!(Regularizer::None.prox(1.0, &[3.0]), vec![3.0]);
        assert_eq!(Regularizer::SquaredL2.prox(1.0, &[3.0]), vec![1.5]);
    }

    #[test]
    fn prox_subgradient_optimality() {
        let z: [f64; 5] = [1.7, -0.2, 0.05, -3.0, 0.0];
        let t: f64 = 0.4;
        let x = Regularizer::L1.prox(t, &z);
        for (&xi, &zi) in x.iter().zip(&z) {
            let r = xi - zi;
            if xi != 0.0 {
                assert!((r + t * xi.signum()).abs() < 1e-10);
            } else {
                assert!(r.abs() <= t + 1e-10);
            }
        }
        let x = Regularizer::SquaredL2.prox(t, &z);
        for (&xi, &zi) in x.iter().zip(&z) {
            assert!((t * xi + xi - zi).abs() < 1e-10);
        }
    }

    #[test]
    fn l1_has_no_gradient() {
        assert!(matches!(
            Regularizer::L1.gradient(&[1.0f64]),
            Err(Error::NonSmoothRegularizer(_))
        ));
    }

    #[test]
    fn f1_cases() {
        let star = [1.0, 0.0, 2.0, 0.0];
        let s = f1_score(&star, &star, None).unwrap();
        assert_eq!((s.precision, s.recall, s.f1, s.degenerate), (1.0, 1.0, 1.0, false));

        let s = f1_score(&[0.0; 4], &star, None).unwrap();
        assert!(s.degenerate);
        assert_eq!(s.f1, 0.0);

        let s = f1_score(&[1.0, 0.0, 0.0, 0.0], &star, None).unwrap();
        assert_eq!((s.precision, s.recall), (1.0, 0.5));
        assert!((s.f1 - 2.0 / 3.0).abs() < 1e-15);

        let s = f1_score(&[1.0, 0.0], &[0.0, 0.0], None).unwrap();
        assert!(s.degenerate);
    }

    #[test]
    fn exact_ridge_zeroes_gradient() {
        let x = Matrix::from_fn(6, 3, |i, j| ((i * 3 + j) as f64).sin());
        let y = vec![1.0, 0.0, -1.0, 2.0, 0.5, 0.3];
        let p = DataParallelProblem::new(x, y, 0.1, Regularizer::SquaredL2).unwrap();
        let w = p.solve_exact().unwrap();
        assert!(p.optimality_residual(&w).unwrap() < 1e-12);
    }

    #[test]
    fn scalar_problem_gradient() {
        let p = DataParallelProblem::new(
            Matrix::from_vec(1, 1, vec![1.0]).unwrap(),
            vec![1.0],
            0.0,
            Regularizer::None,
        )
        .unwrap();
        assert_eq!(p.gradient(&[0.25]).unwrap(), vec![-0.75]);
    }
}
