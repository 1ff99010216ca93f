//! Step sizes and convergence envelopes in this crate's normalization:
//! `f(w) = (1/2n)‖Xw − y‖² + λh(w)`, `M = λ_max(XᵀX)/n`, `L = λ·L_h`,
//! `ν = λ_min(XᵀX)/n + λ` (for squared L2), and ε measured on
//! `(1/(βη)) S_AᵀS_A`.

use serde::{Deserialize, Serialize};

use crate::loss::{DataParallelProblem, Regularizer};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TheoremConstants {
    pub m_smooth: f64,
    pub l_reg: f64,
    pub nu: f64,
    pub epsilon: f64,
}

impl TheoremConstants {
    /// `M` by power iteration, `ν` by dense eigendecomposition.
    pub fn estimate<T: Scalar>(problem: &DataParallelProblem<T>, epsilon: f64) -> Self {
        let m_smooth = problem.smoothness().to_f64_lossy();
        let lam = problem.lambda().to_f64_lossy();
        let (lo, _) = problem.curvature_range();
        let ridge = if problem.reg() == Regularizer::SquaredL2 { lam } else { 0.0 };
        let l_reg = if problem.reg().is_smooth() { lam * problem.reg().smoothness() } else { 0.0 };
        log::debug!("M = {m_smooth:.6e}, L = {l_reg:.3e}, nu = {:.6e}", lo.to_f64_lossy() + ridge);
        Self { m_smooth, l_reg, nu: lo.to_f64_lossy().max(0.0) + ridge, epsilon }
    }

    /// `2ζ / (M(1+ε) + L)`.
    pub fn gd_alpha(&self, zeta: f64) -> f64 {
        2.0 * zeta / (self.m_smooth * (1.0 + self.epsilon) + self.l_reg)
    }

    /// `1 − 4νζ(1−ζ) / (M(1+ε) + L)`.
    pub fn gd_gamma(&self, zeta: f64) -> f64 {
        1.0 - 4.0 * self.nu * zeta * (1.0 - zeta) / (self.m_smooth * (1.0 + self.epsilon) + self.l_reg)
    }

    pub fn kappa1(&self) -> f64 {
        (1.0 + 3.0 * self.epsilon) / (1.0 - 7.0 * self.epsilon)
    }

    pub fn kappa2(&self) -> f64 {
        (1.0 + self.epsilon) / (1.0 - self.epsilon)
    }

    /// Per-step growth cap of the proximal method, `(1+7ε)/(1−3ε)`.
    pub fn prox_kappa(&self) -> f64 {
        (1.0 + 7.0 * self.epsilon) / (1.0 - 3.0 * self.epsilon)
    }

    /// Strongly convex GD envelope:
    /// `(κ₂γ)ᵗ f(w₀) + κ₂²(κ₂−γ)/(1−κ₂γ)·f(w*)`.
    pub fn gd_strong_envelope(&self, t: usize, f0: f64, f_star: f64, zeta: f64) -> f64 {
        let k = self.kappa2();
        let g = self.gd_gamma(zeta);
        (k * g).powi(t as i32) * f0 + k * k * (k - g) / (1.0 - k * g) * f_star
    }

    /// Running-mean envelope of the proximal method at step `t ≥ 1`:
    /// `κ₁f(w*) + (4εf(w₀) + ‖w₀−w*‖²/(2α)) / ((1−7ε)t)`.
    pub fn prox_mean_envelope(&self, t: usize, f0: f64, f_star: f64, dist0_sq: f64, alpha: f64) -> f64 {
        self.kappa1() * f_star
            + (4.0 * self.epsilon * f0 + dist0_sq / (2.0 * alpha))
                / ((1.0 - 7.0 * self.epsilon) * t as f64)
    }

    /// Whether the hypotheses of the strongly convex GD bound hold.
    pub fn gd_contracts(&self, zeta: f64) -> bool {
        self.epsilon < 1.0 && self.kappa2() * self.gd_gamma(zeta) < 1.0
    }
}

/// `ξ = 1/(ν(1−ε)α) · (1 − L(1+ε)α/2)⁻¹`, infinite when `ε ≥ 1`.
pub fn bcd_xi(nu: f64, epsilon: f64, alpha: f64, l_smooth: f64) -> f64 {
    let denom = nu * (1.0 - epsilon) * alpha * (1.0 - l_smooth * (1.0 + epsilon) * alpha / 2.0);
    if denom <= 0.0 {
        f64::INFINITY
    } else {
        1.0 / denom
    }
}

/// Rate constant that follows from the descent lemma on active blocks,
/// `‖Ŝ_AᵀΔ‖² ≤ η(1+ε)‖Δ‖²`, `‖Ŝ_A x‖² ≥ η(1−ε)‖x‖²` and the
/// Polyak-Łojasiewicz bound `g − g* ≤ ‖∇g‖²/(2ν)`:
/// `ξ = 1 / (2νη(1−ε)α(1 − Lη(1+ε)α/2))`.
pub fn bcd_xi_corrected(nu: f64, epsilon: f64, eta: f64, alpha: f64, l_smooth: f64) -> f64 {
    let denom = 2.0
        * nu
        * eta
        * (1.0 - epsilon)
        * alpha
        * (1.0 - l_smooth * eta * (1.0 + epsilon) * alpha / 2.0);
    if denom <= 0.0 {
        f64::INFINITY
    } else {
        1.0 / denom
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn no_encoding_gives_classical_constants() {
        let c = TheoremConstants { m_smooth: 2.0, l_reg: 0.0, nu: 0.5, epsilon: 0.0 };
        assert_eq!(c.gd_alpha(0.5), 0.5);
        assert_eq!(c.kappa1(), 1.0);
        assert_eq!(c.kappa2(), 1.0);
        assert_eq!(c.prox_kappa(), 1.0);
        assert!((c.gd_gamma(0.5) - 0.75).abs() < 1e-15);
        assert!(c.gd_contracts(0.5));
    }

    #[test]
    fn xi_degenerates_without_isometry() {
        assert!(bcd_xi(1.0, 1.0, 0.1, 1.0).is_infinite());
        assert!(bcd_xi(1.0, 0.1, 0.1, 1.0).is_finite());
        let stated = bcd_xi(1.0, 0.2, 0.1, 2.0);
        let derived = bcd_xi_corrected(1.0, 0.2, 0.5, 0.1, 2.0);
        assert!(stated >= derived);
    }
}
