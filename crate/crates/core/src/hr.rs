//! Hüsler–Reiss parameter spaces and the conversions between them.
//!
//! A [`PrecisionMatrix`] Θ lives in the space of symmetric matrices with zero
//! row sums; a Hüsler–Reiss precision matrix is additionally positive
//! semi-definite of rank d−1. The variogram Γ is recovered from the
//! pseudoinverse of Θ, and vice versa from the doubly centered −½Γ.
//!
//! The density exponent used throughout is `−μᵀx − xᵀΘx` with `x = log y`,
//! i.e. the quadratic form carries no factor ½.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{DivergenceReason, Error, Result};
use crate::linalg::{
    certify_s1_plus, dot, pseudo_inverse, solve_linear, Cholesky, S1Certificate, SymMatrix,
    DEFAULT_TOL,
};

/// Relative pivot threshold for the variogram solve.
pub const SOLVE_TOL: f64 = 1e-10;

/// Symmetric matrix with zero row sums, plus its 𝒮₁,₊ certificate.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecisionMatrix {
    theta: SymMatrix,
    certificate: S1Certificate,
    tol: f64,
}

impl PrecisionMatrix {
    pub fn new(theta: SymMatrix) -> Result<Self> {
        Self::with_tol(theta, DEFAULT_TOL)
    }

    /// Fails with [`Error::NotS1`] if the row sums are not zero within `tol`.
    pub fn with_tol(theta: SymMatrix, tol: f64) -> Result<Self> {
        if theta.dim() < 2 {
            return Err(Error::InvalidInput("dimension must be at least 2".into()));
        }
        let certificate = certify_s1_plus(&theta, tol)?;
        if !certificate.in_s1 {
            return Err(Error::NotS1 { max_row_sum: certificate.max_abs_row_sum });
        }
        Ok(PrecisionMatrix { theta, certificate, tol })
    }

    pub fn dim(&self) -> usize {
        self.theta.dim()
    }

    pub fn matrix(&self) -> &SymMatrix {
        &self.theta
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn certificate(&self) -> &S1Certificate {
        &self.certificate
    }

    /// Positive semi-definite of rank d−1 with kernel spanned by 𝟙.
    pub fn is_certified_plus(&self) -> bool {
        self.certificate.in_s1_plus
    }

    fn require_plus(&self) -> Result<()> {
        if self.is_certified_plus() {
            Ok(())
        } else {
            Err(Error::NotS1Plus)
        }
    }
}

/// Outcome of checking the three variogram invariants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct VariogramCheck {
    pub zero_diagonal: bool,
    pub positive_off_diagonal: bool,
    pub strictly_cnd: bool,
}

impl VariogramCheck {
    pub fn is_valid(&self) -> bool {
        self.zero_diagonal && self.positive_off_diagonal && self.strictly_cnd
    }
}

/// Symmetric, zero-diagonal, strictly conditionally negative definite matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct VariogramMatrix {
    gamma: SymMatrix,
}

impl VariogramMatrix {
    pub fn new(gamma: SymMatrix, tol: f64) -> Result<Self> {
        let check = Self::check(&gamma, tol)?;
        if !check.zero_diagonal {
            return Err(Error::InvalidInput("variogram diagonal must be zero".into()));
        }
        if !check.positive_off_diagonal {
            return Err(Error::InvalidInput("variogram off-diagonal entries must be positive".into()));
        }
        if !check.strictly_cnd {
            return Err(Error::NotStrictlyCnd);
        }
        Ok(VariogramMatrix { gamma })
    }

    /// Strict CND is tested on the doubly centered −½Γ: it must be PSD of rank d−1.
    pub fn check(gamma: &SymMatrix, tol: f64) -> Result<VariogramCheck> {
        let d = gamma.dim();
        let scale = gamma.max_abs();
        let zero_diagonal = (0..d).all(|i| gamma.get(i, i).abs() <= tol * scale);
        let positive_off_diagonal =
            (0..d).all(|i| (0..d).all(|j| i == j || gamma.get(i, j) > 0.0));
        let strictly_cnd =
            d >= 2 && certify_s1_plus(&centered_half_variogram(gamma), tol)?.in_s1_plus;
        Ok(VariogramCheck { zero_diagonal, positive_off_diagonal, strictly_cnd })
    }

    pub fn dim(&self) -> usize {
        self.gamma.dim()
    }

    pub fn matrix(&self) -> &SymMatrix {
        &self.gamma
    }
}

fn centered_half_variogram(gamma: &SymMatrix) -> SymMatrix {
    gamma.scaled(-0.5).double_centered()
}

/// Parameters `(μ, Θ)` of a generalized Hüsler–Reiss function.
#[derive(Debug, Clone, PartialEq)]
pub struct GhrParams {
    mu: Vec<f64>,
    theta: PrecisionMatrix,
}

impl GhrParams {
    pub fn new(mu: Vec<f64>, theta: PrecisionMatrix) -> Result<Self> {
        if mu.len() != theta.dim() {
            return Err(Error::DimensionMismatch { expected: theta.dim(), got: mu.len() });
        }
        if mu.iter().any(|m| !m.is_finite()) {
            return Err(Error::InvalidInput("mu must be finite".into()));
        }
        Ok(GhrParams { mu, theta })
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    pub fn mu(&self) -> &[f64] {
        &self.mu
    }

    pub fn theta(&self) -> &PrecisionMatrix {
        &self.theta
    }

    /// `μ − 𝟙`.
    pub fn shifted_mu(&self) -> Vec<f64> {
        self.mu.iter().map(|m| m - 1.0).collect()
    }

    /// `μᵀ𝟙 − d`, the rate of radial decay in log coordinates.
    pub fn mass_excess(&self) -> f64 {
        self.mu.iter().sum::<f64>() - self.dim() as f64
    }

    pub(crate) fn linear_margin(&self) -> f64 {
        self.theta.tol() * self.dim() as f64
    }
}

/// `Γᵢⱼ = Θ⁺ᵢᵢ + Θ⁺ⱼⱼ − 2Θ⁺ᵢⱼ`.
pub fn theta_to_gamma(theta: &PrecisionMatrix) -> Result<VariogramMatrix> {
    theta.require_plus()?;
    let p = pseudo_inverse(theta.matrix(), theta.tol())?;
    let gamma = SymMatrix::from_fn(theta.dim(), |i, j| {
        if i == j {
            0.0
        } else {
            p.get(i, i) + p.get(j, j) - 2.0 * p.get(i, j)
        }
    });
    Ok(VariogramMatrix { gamma })
}

/// `Θ = (Π(−½Γ)Π)⁺` with `Π = I − J/d`.
pub fn gamma_to_theta(gamma: &VariogramMatrix, tol: f64) -> Result<PrecisionMatrix> {
    let centered = centered_half_variogram(gamma.matrix());
    if !certify_s1_plus(&centered, tol)?.in_s1_plus {
        return Err(Error::NotStrictlyCnd);
    }
    let theta = pseudo_inverse(&centered, tol)?;
    // Round-off can leave row sums at ~1e-16; re-center exactly.
    PrecisionMatrix::with_tol(theta.double_centered(), tol)
}

/// Marginal parameter making `(μ, Θ)` a multivariate Pareto density.
///
/// Solves `Γv = 𝟙` and rescales to `vᵀ𝟙 = 1`, so that `Γ(μ−𝟙) ∝ 𝟙` and
/// `μᵀ𝟙 = d+1`.
pub fn mu_hr(theta: &PrecisionMatrix) -> Result<Vec<f64>> {
    let gamma = theta_to_gamma(theta)?;
    mu_hr_from_gamma(&gamma)
}

fn mu_hr_from_gamma(gamma: &VariogramMatrix) -> Result<Vec<f64>> {
    let ones = vec![1.0; gamma.dim()];
    let v = solve_linear(gamma.matrix(), &ones, SOLVE_TOL).ok_or(Error::SingularVariogram)?;
    let s: f64 = v.iter().sum();
    if !(s.abs() > f64::EPSILON * v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))) {
        return Err(Error::SingularVariogram);
    }
    Ok(v.iter().map(|x| 1.0 + x / s).collect())
}

/// `(1 + 2/d)𝟙 − (1/d)ΘΓ𝟙`; always sums to d+2.
pub fn mu_printed_formula(theta: &PrecisionMatrix) -> Result<Vec<f64>> {
    let gamma = theta_to_gamma(theta)?;
    let d = theta.dim() as f64;
    let g1 = gamma.matrix().mat_vec(&vec![1.0; theta.dim()]);
    let tg1 = theta.matrix().mat_vec(&g1);
    Ok(tg1.iter().map(|x| 1.0 + 2.0 / d - x / d).collect())
}

/// The constructive μ next to the alternative closed-form expression and the
/// two candidate values of the scalar γ in `Γ(μ−𝟙) = γ𝟙`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MuDiagnostics {
    pub mu: Vec<f64>,
    pub mu_printed_formula: Vec<f64>,
    pub mu_sum: f64,
    pub mu_printed_formula_sum: f64,
    pub formulas_agree: bool,
    /// Mean entry of `Γ(μ−𝟙)` for the constructive μ.
    pub gamma_solved: f64,
    /// `d⁻² 𝟙ᵀΓ(½ΘΓ − I)𝟙`.
    pub gamma_printed_formula: f64,
    /// ∞-norm deviation of `Γ(μ−𝟙)` from `gamma_solved · 𝟙`.
    pub proportionality_residual: f64,
}

pub fn mu_diagnostics(theta: &PrecisionMatrix) -> Result<MuDiagnostics> {
    let d = theta.dim();
    let gamma = theta_to_gamma(theta)?;
    let mu = mu_hr_from_gamma(&gamma)?;
    let printed = mu_printed_formula(theta)?;

    let shifted: Vec<f64> = mu.iter().map(|m| m - 1.0).collect();
    let g_shift = gamma.matrix().mat_vec(&shifted);
    let gamma_solved = g_shift.iter().sum::<f64>() / d as f64;
    let proportionality_residual =
        g_shift.iter().fold(0.0_f64, |m, x| m.max((x - gamma_solved).abs()));

    let ones = vec![1.0; d];
    let g1 = gamma.matrix().mat_vec(&ones);
    let tg1 = theta.matrix().mat_vec(&g1);
    let gtg1 = gamma.matrix().mat_vec(&tg1);
    let inner: Vec<f64> = gtg1.iter().zip(&g1).map(|(a, b)| 0.5 * a - b).collect();
    let gamma_printed_formula = inner.iter().sum::<f64>() / (d * d) as f64;

    let formulas_agree = mu
        .iter()
        .zip(&printed)
        .all(|(a, b)| (a - b).abs() < 1e-8);
    Ok(MuDiagnostics {
        mu_sum: mu.iter().sum(),
        mu_printed_formula_sum: printed.iter().sum(),
        mu,
        mu_printed_formula: printed,
        formulas_agree,
        gamma_solved,
        gamma_printed_formula,
        proportionality_residual,
    })
}

fn check_index(d: usize, k: usize) -> Result<()> {
    if k < d {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("index {k} out of range for dimension {d}")))
    }
}

/// `Σ^(k) = (Θ^(k))⁻¹` where `Θ^(k)` drops row and column `k`.
pub fn sigma_k(theta: &PrecisionMatrix, k: usize) -> Result<SymMatrix> {
    check_index(theta.dim(), k)?;
    theta.require_plus()?;
    let sub = theta.matrix().without_index(k);
    Cholesky::new(&sub, theta.tol()).map(|c| c.inverse()).ok_or(Error::NotS1Plus)
}

/// `det(Θ^(k))`.
pub fn det_theta_k(theta: &PrecisionMatrix, k: usize) -> Result<f64> {
    check_index(theta.dim(), k)?;
    theta.require_plus()?;
    let sub = theta.matrix().without_index(k);
    Cholesky::new(&sub, theta.tol()).map(|c| c.det()).ok_or(Error::NotS1Plus)
}

/// `Σ̃ᵢⱼ^(k) = ½(Γᵢₖ + Γⱼₖ − Γᵢⱼ)`; row and column `k` vanish.
pub fn sigma_tilde_k(gamma: &VariogramMatrix, k: usize) -> SymMatrix {
    let g = gamma.matrix();
    assert!(k < g.dim(), "index out of range");
    SymMatrix::from_fn(g.dim(), |i, j| 0.5 * (g.get(i, k) + g.get(j, k) - g.get(i, j)))
}

/// `−μᵀx − xᵀΘx` at `x = log y`, without normalizing constant.
pub fn log_density_unnormalized(p: &GhrParams, y: &[f64]) -> Result<f64> {
    if y.len() != p.dim() {
        return Err(Error::DimensionMismatch { expected: p.dim(), got: y.len() });
    }
    if y.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::OutsideSupport);
    }
    if !y.iter().any(|v| *v > 1.0) {
        return Err(Error::OutsideSupport);
    }
    let x: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    Ok(-dot(p.mu(), &x) - p.theta().matrix().quad_form(&x))
}

struct ClosedFormParts {
    log_det: f64,
    quadratic: f64,
    excess: f64,
}

/// Both divergence conditions are checked here from scratch: positive
/// definiteness of `Θ^(k)` by attempting a Cholesky factorization, and the
/// linear condition `μᵀ𝟙 > d`.
fn closed_form_parts(p: &GhrParams, k: usize) -> Result<ClosedFormParts> {
    check_index(p.dim(), k)?;
    let sub = p.theta().matrix().without_index(k);
    let chol = Cholesky::new(&sub, p.theta().tol())
        .ok_or(Error::NotIntegrable { reason: DivergenceReason::Spectral })?;
    let excess = p.mass_excess();
    if excess <= p.linear_margin() {
        return Err(Error::NotIntegrable { reason: DivergenceReason::Linear });
    }
    let m: Vec<f64> = p
        .shifted_mu()
        .into_iter()
        .enumerate()
        .filter(|(i, _)| *i != k)
        .map(|(_, v)| v)
        .collect();
    let quadratic = 0.25 * dot(&m, &chol.solve(&m));
    Ok(ClosedFormParts { log_det: chol.log_det(), quadratic, excess })
}

/// `Qₖ = ¼(μ−𝟙)_{∖k}ᵀ Σ^(k) (μ−𝟙)_{∖k}`.
pub fn quadratic_term_k(p: &GhrParams, k: usize) -> Result<f64> {
    closed_form_parts(p, k).map(|c| c.quadratic)
}

/// Log of [`marginal_integral_k`].
pub fn log_marginal_integral_k(p: &GhrParams, k: usize) -> Result<f64> {
    let c = closed_form_parts(p, k)?;
    let half_dim = 0.5 * (p.dim() - 1) as f64;
    Ok(half_dim * PI.ln() - 0.5 * c.log_det + c.quadratic - c.excess.ln())
}

/// Unnormalized mass of `{y ∈ 𝓛 : yₖ > 1}`:
/// `π^{(d−1)/2} det(Θ^(k))^{−1/2} exp(Qₖ) / (μᵀ𝟙 − d)`.
pub fn marginal_integral_k(p: &GhrParams, k: usize) -> Result<f64> {
    log_marginal_integral_k(p, k).map(f64::exp)
}

/// `Iₖ / Iₗ = exp(Qₖ − Qₗ)`.
pub fn exceedance_ratio(p: &GhrParams, k: usize, l: usize) -> Result<f64> {
    let qk = quadratic_term_k(p, k)?;
    let ql = quadratic_term_k(p, l)?;
    Ok((qk - ql).exp())
}

/// `exp{¼(Γ_{k·} − Γ_{ℓ·})(μ−𝟙)}`, valid only when `(μ−𝟙)ᵀ𝟙 = 1`.
pub fn exceedance_ratio_via_variogram(p: &GhrParams, k: usize, l: usize) -> Result<f64> {
    check_index(p.dim(), k)?;
    check_index(p.dim(), l)?;
    let shifted = p.shifted_mu();
    let total: f64 = shifted.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidInput(format!(
            "variogram route requires (mu - 1)'1 = 1, got {total}"
        )));
    }
    let gamma = theta_to_gamma(p.theta())?;
    let g = gamma.matrix();
    let diff: f64 = (0..p.dim()).map(|i| (g.get(k, i) - g.get(l, i)) * shifted[i]).sum();
    Ok((0.25 * diff).exp())
}
