use super::{DataObjective, SolverState, StepReport};
use crate::error::{Error, Result};
use crate::linalg::axpy;
use crate::scalar::Scalar;

/// `w ← w − α g̃` with `g̃` the encoded gradient over `active`.
pub fn gd_step<T: Scalar>(
    state: &SolverState<T>,
    obj: &DataObjective<'_, T>,
    active: &[usize],
    partials: &[Vec<T>],
    alpha: T,
) -> Result<(SolverState<T>, StepReport<T>)> {
    if !obj.reg.is_smooth() {
        return Err(Error::NonSmoothRegularizer("l1"));
    }
    let g = obj.smooth_gradient(&state.w, active, partials)?;
    let d: Vec<T> = g.iter().map(|&x| -x).collect();
    let mut w = state.w.clone();
    axpy(alpha, &d, &mut w);
    Ok((
        SolverState { w, t: state.t + 1, history: () },
        StepReport { direction: d, alpha, active: active.to_vec(), line_search: None, notes: Vec::new() },
    ))
}

/// `w ← prox_{αλh}(w − α·(1/(nβη))Σ g_i)`.
pub fn prox_step<T: Scalar>(
    state: &SolverState<T>,
    obj: &DataObjective<'_, T>,
    active: &[usize],
    partials: &[Vec<T>],
    alpha: T,
) -> Result<(SolverState<T>, StepReport<T>)> {
    let g = obj.aggregate(active, partials)?;
    let mut z = state.w.clone();
    axpy(-alpha, &g, &mut z);
    let w = obj.reg.prox(alpha * obj.lambda, &z);
    let direction: Vec<T> = w.iter().zip(&state.w).map(|(&a, &b)| (a - b) / alpha).collect();
    Ok((
        SolverState { w, t: state.t + 1, history: () },
        StepReport { direction, alpha, active: active.to_vec(), line_search: None, notes: Vec::new() },
    ))
}

/// Proximal steps need `α < 1/M`. Returns a warning note when not strict.
pub fn check_prox_alpha(alpha: f64, m_smooth: f64, strict: bool) -> Result<Option<String>> {
    let limit = 1.0 / m_smooth;
    if alpha < limit {
        return Ok(None);
    }
    if strict {
        Err(Error::StepTooLarge { alpha, limit })
    } else {
        log::warn!("prox step {alpha} is not below 1/M = {limit}");
        Ok(Some(format!("alpha {alpha:.3e} >= 1/M {limit:.3e}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frames::identity_frame;
    use crate::linalg::Matrix;
    use crate::loss::{DataParallelProblem, DataShards, Regularizer};
    use crate::solvers::all_partials;

    #[test]
    fn scalar_recurrence() {
        // f(w) = ½(w − 1)², so w₁ = w₀ + α(1 − w₀)
        let p = DataParallelProblem::new(
            Matrix::from_vec(1, 1, vec![1.0]).unwrap(),
            vec![1.0],
            0.0,
            Regularizer::None,
        )
        .unwrap();
        let f = identity_frame::<f64>(1);
        let shards = DataShards::encode(&p, &f).unwrap();
        let obj = DataObjective::new(&shards, 0.0, Regularizer::None);
        let alpha = 0.3;
        let mut s = SolverState::new(vec![0.0]);
        let mut expect = 0.0;
        for _ in 0..10 {
            let parts = all_partials(&shards, &s.w).unwrap();
            s = gd_step(&s, &obj, &[0], &parts, alpha).unwrap().0;
            expect += alpha * (1.0 - expect);
            assert!((s.w[0] - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn prox_without_lambda_is_gd() {
        let x = Matrix::from_fn(8, 3, |i, j| ((i + 2 * j) as f64).sin());
        let y: Vec<f64> = (0..8).map(|i| i as f64 * 0.1).collect();
        let p = DataParallelProblem::new(x, y, 0.0, Regularizer::None).unwrap();
        let f = identity_frame::<f64>(8).partitioned(4).unwrap();
        let shards = DataShards::encode(&p, &f).unwrap();
        let s = SolverState::new(vec![0.2, -0.1, 0.4]);
        let parts = all_partials(&shards, &s.w).unwrap();
        let obj = DataObjective::new(&shards, 0.0, Regularizer::L1);
        let a = prox_step(&s, &obj, &[0, 2, 3], &parts, 0.1).unwrap().0;
        let obj = DataObjective::new(&shards, 0.0, Regularizer::None);
        let b = gd_step(&s, &obj, &[0, 2, 3], &parts, 0.1).unwrap().0;
        for (x, y) in a.w.iter().zip(&b.w) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn gd_rejects_l1() {
        let p = DataParallelProblem::new(
            Matrix::from_vec(1, 1, vec![1.0]).unwrap(),
            vec![1.0],
            0.1,
            Regularizer::L1,
        )
        .unwrap();
        let shards = DataShards::encode(&p, &identity_frame(1)).unwrap();
        let obj = DataObjective::new(&shards, 0.1, Regularizer::L1);
        let s = SolverState::new(vec![0.0]);
        assert!(matches!(
            gd_step(&s, &obj, &[0], &[vec![0.0]], 0.1),
            Err(Error::NonSmoothRegularizer(_))
        ));
    }

    #[test]
    fn prox_alpha_guard() {
        assert!(check_prox_alpha(0.5, 1.0, true).unwrap().is_none());
        assert!(check_prox_alpha(1.5, 1.0, false).unwrap().is_some());
        assert!(matches!(check_prox_alpha(1.5, 1.0, true), Err(Error::StepTooLarge { .. })));
    }
}
