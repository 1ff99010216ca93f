//! Model-parallel composite `g(w) = φ(Xw)` and its lifted encoding
//! `g̃(v) = φ(X Ŝᵀ v)` with `Ŝ = S/√β`, which is an isometric lifting for
//! tight frames, so `min g̃ = min g`.

use rayon::prelude::*;

use super::{POWER_MAX_ITER, POWER_TOL};
use crate::error::{check_len, Error, Result};
use crate::frames::Frame;
use crate::linalg::{axpy, dot, norm_sq, power_iteration, Cholesky, Matrix};
use crate::scalar::Scalar;

/// Outer function φ.
#[derive(Clone, Debug, PartialEq)]
pub enum Phi<T> {
    /// `½‖u − y‖²`.
    LeastSquares { y: Vec<T> },
    /// `(1/n) Σ_{i<n} log(1 + e^{−u_i}) + ½ Σ_{i≥n} u_i²`. The first `n`
    /// entries are sign-folded margins, the rest are ridge rows.
    Logistic { samples: usize },
}

fn softplus_neg<T: Scalar>(u: T) -> T {
    // log(1 + e^{-u}) without overflow
    if u > T::zero() {
        (-u).exp().ln_1p()
    } else {
        -u + u.exp().ln_1p()
    }
}

fn sigmoid<T: Scalar>(u: T) -> T {
    if u >= T::zero() {
        T::one() / (T::one() + (-u).exp())
    } else {
        let e = u.exp();
        e / (T::one() + e)
    }
}

impl<T: Scalar> Phi<T> {
    pub fn value(&self, u: &[T]) -> T {
        match self {
            Phi::LeastSquares { y } => {
                T::of(0.5) * u.iter().zip(y).map(|(&a, &b)| (a - b) * (a - b)).sum::<T>()
            }
            Phi::Logistic { samples } => {
                let n = T::of_usize(*samples);
                let loss: T = u[..*samples].iter().map(|&x| softplus_neg(x)).sum();
                loss / n + T::of(0.5) * norm_sq(&u[*samples..])
            }
        }
    }

    pub fn gradient(&self, u: &[T]) -> Vec<T> {
        match self {
            Phi::LeastSquares { y } => u.iter().zip(y).map(|(&a, &b)| a - b).collect(),
            Phi::Logistic { samples } => {
                let n = T::of_usize(*samples);
                u.iter()
                    .enumerate()
                    .map(|(i, &x)| if i < *samples { -sigmoid(-x) / n } else { x })
                    .collect()
            }
        }
    }

    /// Diagonal of `∇²φ(u)`.
    pub fn hessian_diag(&self, u: &[T]) -> Vec<T> {
        match self {
            Phi::LeastSquares { .. } => vec![T::one(); u.len()],
            Phi::Logistic { samples } => {
                let n = T::of_usize(*samples);
                u.iter()
                    .enumerate()
                    .map(|(i, &x)| {
                        if i < *samples {
                            let s = sigmoid(x);
                            s * (T::one() - s) / n
                        } else {
                            T::one()
                        }
                    })
                    .collect()
            }
        }
    }

    /// Uniform upper bound on `∇²φ` per coordinate.
    pub fn curvature_bound(&self, len: usize) -> Vec<T> {
        match self {
            Phi::LeastSquares { .. } => vec![T::one(); len],
            Phi::Logistic { samples } => {
                let q = T::one() / T::of_usize(4 * samples);
                (0..len).map(|i| if i < *samples { q } else { T::one() }).collect()
            }
        }
    }

    pub fn dim(&self) -> Option<usize> {
        match self {
            Phi::LeastSquares { y } => Some(y.len()),
            Phi::Logistic { .. } => None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ModelParallelProblem<T> {
    x: Matrix<T>,
    phi: Phi<T>,
}

impl<T: Scalar> ModelParallelProblem<T> {
    pub fn new(x: Matrix<T>, phi: Phi<T>) -> Result<Self> {
        if let Some(d) = phi.dim() {
            check_len(x.rows(), d)?;
        }
        if let Phi::Logistic { samples } = phi {
            if samples == 0 || samples > x.rows() {
                return Err(Error::InvalidParameter("logistic sample count out of range".into()));
            }
        }
        Ok(Self { x, phi })
    }

    pub fn x(&self) -> &Matrix<T> {
        &self.x
    }

    pub fn phi(&self) -> &Phi<T> {
        &self.phi
    }

    /// Model dimension.
    pub fn p(&self) -> usize {
        self.x.cols()
    }

    pub fn value(&self, w: &[T]) -> Result<T> {
        Ok(self.phi.value(&self.x.matvec(w)?))
    }

    pub fn gradient(&self, w: &[T]) -> Result<Vec<T>> {
        let u = self.x.matvec(w)?;
        self.x.tr_matvec(&self.phi.gradient(&u))
    }

    /// `L = λ_max(XᵀDX)` with `D` the curvature bound of φ.
    pub fn smoothness(&self) -> T {
        let d = self.phi.curvature_bound(self.x.rows());
        power_iteration(
            self.p(),
            |v| {
                let mut u = self.x.matvec(v).expect("dims");
                u.iter_mut().zip(&d).for_each(|(a, &b)| *a *= b);
                self.x.tr_matvec(&u).expect("dims")
            },
            POWER_TOL,
            POWER_MAX_ITER,
            0x5eed,
        )
    }

    /// Newton's method to high accuracy; a reference optimum for tests.
    pub fn solve_reference(&self, tol: f64, max_iter: usize) -> Result<Vec<T>> {
        let p = self.p();
        let mut w = vec![T::zero(); p];
        for _ in 0..max_iter {
            let u = self.x.matvec(&w)?;
            let g = self.x.tr_matvec(&self.phi.gradient(&u))?;
            if norm_sq(&g).sqrt().to_f64_lossy() <= tol {
                break;
            }
            let h = self.phi.hessian_diag(&u);
            let mut hess = Matrix::zeros(p, p);
            for r in 0..self.x.rows() {
                let row = self.x.row(r);
                for a in 0..p {
                    let ra = row[a] * h[r];
                    if ra == T::zero() {
                        continue;
                    }
                    for b in 0..p {
                        hess[(a, b)] += ra * row[b];
                    }
                }
            }
            let step = Cholesky::factor(&hess)?.solve(&g)?;
            // damped step keeps logistic iterations monotone
            let f0 = self.phi.value(&u);
            let slope = dot(&g, &step);
            let mut t = T::one();
            loop {
                let mut trial = w.clone();
                axpy(-t, &step, &mut trial);
                let f1 = self.value(&trial)?;
                if f1 <= f0 - T::of(1e-4) * t * slope || t < T::of(1e-10) {
                    w = trial;
                    break;
                }
                t *= T::of(0.5);
            }
        }
        Ok(w)
    }
}

/// Worker `i` of a model-parallel encoding: `M_i = X Ŝ_iᵀ`.
#[derive(Clone, Debug)]
pub struct ModelShard<T> {
    pub rows: std::ops::Range<usize>,
    pub m_i: Matrix<T>,
}

#[derive(Clone, Debug)]
pub struct ModelShards<T> {
    shards: Vec<ModelShard<T>>,
    inv_sqrt_beta: T,
}

impl<T: Scalar> ModelShards<T> {
    pub fn encode(problem: &ModelParallelProblem<T>, frame: &Frame<T>) -> Result<Self> {
        check_len(frame.n(), problem.p())?;
        let inv_sqrt_beta = T::one() / T::of(frame.beta_f64()).sqrt();
        let x = problem.x();
        let shards = (0..frame.m())
            .into_par_iter()
            .map(|i| {
                let support = frame.block_support(i);
                let rows = frame.block_rows(i);
                let mut m_i = Matrix::zeros(x.rows(), rows.len());
                for r in 0..x.rows() {
                    let xs: Vec<T> = support.iter().map(|&c| x[(r, c)]).collect();
                    let out = frame.apply_block_support(i, &xs)?;
                    for (k, v) in out.into_iter().enumerate() {
                        m_i[(r, k)] = v * inv_sqrt_beta;
                    }
                }
                Ok(ModelShard { rows, m_i })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { shards, inv_sqrt_beta })
    }

    pub fn m(&self) -> usize {
        self.shards.len()
    }

    pub fn shard(&self, i: usize) -> &ModelShard<T> {
        &self.shards[i]
    }

    pub fn block_len(&self, i: usize) -> usize {
        self.shards[i].rows.len()
    }

    /// `u_i = X Ŝ_iᵀ v_i`.
    pub fn contribution(&self, i: usize, v_i: &[T]) -> Result<Vec<T>> {
        self.shards[i].m_i.matvec(v_i)
    }

    /// `∇_i g̃ = Ŝ_i Xᵀ ∇φ(X Ŝ_iᵀ v_i + z̃_i)`.
    pub fn partial_gradient(
        &self,
        phi: &Phi<T>,
        i: usize,
        v_i: &[T],
        z_tilde: &[T],
    ) -> Result<Vec<T>> {
        let mut u = self.contribution(i, v_i)?;
        check_len(u.len(), z_tilde.len())?;
        axpy(T::one(), z_tilde, &mut u);
        self.shards[i].m_i.tr_matvec(&phi.gradient(&u))
    }

    /// `w = Ŝᵀ v`.
    pub fn lift(&self, frame: &Frame<T>, v: &[T]) -> Result<Vec<T>> {
        let mut w = frame.apply_transpose(v)?;
        w.iter_mut().for_each(|e| *e *= self.inv_sqrt_beta);
        Ok(w)
    }
}

/// Worker gradient through the fast operator on the block support:
/// `Ŝ_i X_supᵀ ∇φ(X_sup Ŝ_iᵀ v_i + z̃_i)`.
pub fn partial_gradient_model<T: Scalar>(
    problem: &ModelParallelProblem<T>,
    frame: &Frame<T>,
    i: usize,
    v_i: &[T],
    z_tilde: &[T],
) -> Result<Vec<T>> {
    let support = frame.block_support(i);
    let s = T::one() / T::of(frame.beta_f64()).sqrt();
    let mut w_part = frame.apply_block_transpose_support(i, v_i)?;
    w_part.iter_mut().for_each(|e| *e *= s);
    let xs = problem.x().select_cols(support);
    let mut u = xs.matvec(&w_part)?;
    check_len(u.len(), z_tilde.len())?;
    axpy(T::one(), z_tilde, &mut u);
    let back = xs.tr_matvec(&problem.phi().gradient(&u))?;
    let mut out = frame.apply_block_support(i, &back)?;
    out.iter_mut().for_each(|e| *e *= s);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loss::finite_difference_gradient;

    #[test]
    fn logistic_at_zero_is_log2() {
        let phi = Phi::<f64>::Logistic { samples: 1 };
        assert!((phi.value(&[0.0]) - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn logistic_gradient_matches_differences() {
        let x = Matrix::from_fn(7, 3, |i, j| ((i * 5 + j * 3) as f64 * 0.37).cos());
        let prob = ModelParallelProblem::new(x, Phi::Logistic { samples: 5 }).unwrap();
        for k in 0..20 {
            let w: Vec<f64> = (0..3).map(|j| ((k * 3 + j) as f64 * 1.3).sin()).collect();
            let g = prob.gradient(&w).unwrap();
            let fd = finite_difference_gradient(|w| prob.value(w).unwrap(), &w, 1e-5);
            let err = crate::linalg::rel_err(&g, &fd);
            assert!(err < 1e-5, "rel err {err}");
        }
    }

    #[test]
    fn least_squares_block_gradient() {
        let x = Matrix::from_fn(5, 4, |i, j| (i as f64 + 1.0) * (j as f64 - 1.5));
        let y = vec![1.0, 2.0, 0.0, -1.0, 0.5];
        let prob = ModelParallelProblem::new(x.clone(), Phi::LeastSquares { y: y.clone() }).unwrap();
        let frame = crate::frames::identity_frame::<f64>(4).partitioned(2).unwrap();
        let shards = ModelShards::encode(&prob, &frame).unwrap();
        let v = [0.3, -0.1, 0.7, 0.2];
        let z0 = shards.contribution(0, &v[..2]).unwrap();
        let z1 = shards.contribution(1, &v[2..]).unwrap();
        let g0 = shards.partial_gradient(prob.phi(), 0, &v[..2], &z1).unwrap();
        let full = prob.gradient(&v).unwrap();
        assert!(crate::linalg::rel_err(&g0, &full[..2]) < 1e-12);
        let raw = partial_gradient_model(&prob, &frame, 1, &v[2..], &z0).unwrap();
        assert!(crate::linalg::rel_err(&raw, &full[2..]) < 1e-12);
    }
}
