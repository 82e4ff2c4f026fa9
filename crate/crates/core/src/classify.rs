//! Three-way classification of generalized Hüsler–Reiss functions.
//!
//! A pair `(μ, Θ)` with `Θ` in the zero-row-sum space yields exactly one of:
//! a Hüsler–Reiss density, a function that is integrable on the exceedance
//! region but not a multivariate Pareto density, or a non-integrable function.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::hr::{self, GhrParams};
use crate::linalg::DEFAULT_TOL;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ClassTag {
    HrDensity,
    IntegrableNonPareto,
    NonIntegrable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum Reason {
    /// Θ has an eigenvalue below `−tol · max|λ|`.
    NegativeEigenvalue,
    /// More than one eigenvalue of Θ is numerically zero.
    RankDeficit,
    /// `μᵀ𝟙 ≤ d`.
    LinearMassCondition,
    /// `μᵀ𝟙 = d` within tolerance.
    BoundaryCase,
    /// Integrable, but μ differs from the Hüsler–Reiss marginal parameter.
    MuMismatch,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Classification {
    pub tag: ClassTag,
    pub reasons: Vec<Reason>,
    pub homogeneity_degree: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Relative eigenvalue threshold for rank decisions.
    pub rank: f64,
    /// ∞-norm tolerance when matching μ against the HR marginal parameter,
    /// also used for the degree and mass-equality checks of [`is_mp_density`].
    pub mu_match: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { rank: DEFAULT_TOL, mu_match: 1e-8 }
    }
}

/// `μᵀ𝟙`: the function satisfies `f(ty) = t^{−μᵀ𝟙} f(y)`.
pub fn homogeneity_degree(p: &GhrParams) -> f64 {
    p.mu().iter().sum()
}

pub fn classify(p: &GhrParams, tol: &Tolerances) -> Result<Classification> {
    let d = p.dim();
    let cert = p.theta().certificate();
    if !cert.in_s1 {
        return Err(Error::NotS1 { max_row_sum: cert.max_abs_row_sum });
    }
    let degree = homogeneity_degree(p);
    let mut reasons = Vec::new();

    let eig = &cert.eigenvalues;
    let thr = tol.rank * eig.iter().fold(0.0_f64, |m, l| m.max(l.abs()));
    if eig.iter().any(|&l| l < -thr) {
        reasons.push(Reason::NegativeEigenvalue);
    }
    if eig.iter().filter(|l| l.abs() <= thr).count() > 1 {
        reasons.push(Reason::RankDeficit);
    }

    let margin = tol.rank * d as f64;
    let excess = degree - d as f64;
    if excess <= margin {
        reasons.push(Reason::LinearMassCondition);
        if excess.abs() <= margin {
            reasons.push(Reason::BoundaryCase);
        }
    }

    let tag = if !reasons.is_empty() || !cert.in_s1_plus {
        ClassTag::NonIntegrable
    } else {
        let mu_star = hr::mu_hr(p.theta())?;
        let gap = p
            .mu()
            .iter()
            .zip(&mu_star)
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        if gap < tol.mu_match {
            ClassTag::HrDensity
        } else {
            reasons.push(Reason::MuMismatch);
            ClassTag::IntegrableNonPareto
        }
    };
    Ok(Classification { tag, reasons, homogeneity_degree: degree })
}

/// Checks the multivariate Pareto axioms directly: degree `d+1`, Θ ∈ 𝒮₁,₊,
/// and equal closed-form masses `Iₖ` for every anchor `k`.
///
/// Shares no code with the μ-matching route of [`classify`]; the two must agree.
pub fn is_mp_density(p: &GhrParams, tol: &Tolerances) -> Result<bool> {
    let cert = p.theta().certificate();
    if !cert.in_s1 {
        return Err(Error::NotS1 { max_row_sum: cert.max_abs_row_sum });
    }
    let d = p.dim() as f64;
    if (homogeneity_degree(p) - (d + 1.0)).abs() > tol.mu_match * (d + 1.0) {
        return Ok(false);
    }
    if !cert.in_s1_plus {
        return Ok(false);
    }
    let mut logs = Vec::with_capacity(p.dim());
    for k in 0..p.dim() {
        match hr::log_marginal_integral_k(p, k) {
            Ok(v) => logs.push(v),
            Err(Error::NotIntegrable { .. }) => return Ok(false),
            Err(e) => return Err(e),
        }
    }
    let lo = logs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(hi - lo <= tol.mu_match)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hr::PrecisionMatrix;
    use crate::linalg::SymMatrix;

    fn proj3() -> PrecisionMatrix {
        PrecisionMatrix::new(SymMatrix::centering(3)).unwrap()
    }

    fn path3() -> PrecisionMatrix {
        PrecisionMatrix::new(
            SymMatrix::from_rows(&[vec![1.0, -1.0, 0.0], vec![-1.0, 2.0, -1.0], vec![0.0, -1.0, 1.0]]).unwrap(),
        )
        .unwrap()
    }

    fn classify_default(mu: Vec<f64>, theta: PrecisionMatrix) -> Classification {
        classify(&GhrParams::new(mu, theta).unwrap(), &Tolerances::default()).unwrap()
    }

    #[test]
    fn hr_density_case() {
        let c = classify_default(vec![4.0 / 3.0; 3], proj3());
        assert_eq!(c.tag, ClassTag::HrDensity);
        assert!(c.reasons.is_empty());
        assert!((c.homogeneity_degree - 4.0).abs() < 1e-14);
    }

    #[test]
    fn linear_mass_condition_case() {
        let c = classify_default(vec![2.0 / 3.0; 3], proj3());
        assert_eq!(c.tag, ClassTag::NonIntegrable);
        assert_eq!(c.reasons, vec![Reason::LinearMassCondition]);
        assert_eq!(c.homogeneity_degree, 2.0);
    }

    #[test]
    fn boundary_case_is_non_integrable() {
        let c = classify_default(vec![1.0; 3], proj3());
        assert_eq!(c.tag, ClassTag::NonIntegrable);
        assert_eq!(c.reasons, vec![Reason::LinearMassCondition, Reason::BoundaryCase]);
    }

    #[test]
    fn negated_projection_case() {
        let neg = PrecisionMatrix::new(SymMatrix::centering(3).scaled(-1.0)).unwrap();
        let c = classify_default(vec![4.0 / 3.0; 3], neg.clone());
        assert_eq!(c.tag, ClassTag::NonIntegrable);
        assert_eq!(c.reasons, vec![Reason::NegativeEigenvalue]);

        // Every failed condition is listed.
        let c = classify_default(vec![0.5; 3], neg);
        assert_eq!(c.reasons, vec![Reason::NegativeEigenvalue, Reason::LinearMassCondition]);
    }

    #[test]
    fn rank_deficit_case() {
        let t = PrecisionMatrix::new(SymMatrix::zeros(3)).unwrap();
        let c = classify_default(vec![2.0; 3], t);
        assert_eq!(c.tag, ClassTag::NonIntegrable);
        assert_eq!(c.reasons, vec![Reason::RankDeficit]);
    }

    #[test]
    fn integrable_non_pareto_case() {
        let c = classify_default(vec![2.0, 1.0, 2.0], proj3());
        assert_eq!(c.tag, ClassTag::IntegrableNonPareto);
        assert_eq!(c.reasons, vec![Reason::MuMismatch]);
        assert_eq!(c.homogeneity_degree, 5.0);
    }

    #[test]
    fn homogeneity_degree_examples() {
        let deg = |mu: Vec<f64>| homogeneity_degree(&GhrParams::new(mu, proj3()).unwrap());
        assert!((deg(vec![4.0 / 3.0; 3]) - 4.0).abs() < 1e-15);
        assert_eq!(deg(vec![1.5, 1.0, 1.5]), 4.0);
        assert_eq!(deg(vec![2.0, 1.0, 2.0]), 5.0);
    }

    #[test]
    fn is_mp_density_examples() {
        let tol = Tolerances::default();
        let p = GhrParams::new(hr::mu_hr(&path3()).unwrap(), path3()).unwrap();
        assert!(is_mp_density(&p, &tol).unwrap());
        let p = GhrParams::new(vec![5.0 / 3.0; 3], proj3()).unwrap();
        assert!(!is_mp_density(&p, &tol).unwrap());
        let neg = PrecisionMatrix::new(SymMatrix::centering(3).scaled(-1.0)).unwrap();
        let p = GhrParams::new(vec![4.0 / 3.0; 3], neg).unwrap();
        assert!(!is_mp_density(&p, &tol).unwrap());
    }

    #[test]
    fn degree_d_plus_one_with_wrong_mu_is_not_mp() {
        // Right degree, unequal masses.
        let p = GhrParams::new(vec![2.0, 1.0, 1.0], proj3()).unwrap();
        let tol = Tolerances::default();
        assert!(!is_mp_density(&p, &tol).unwrap());
        assert_eq!(classify(&p, &tol).unwrap().tag, ClassTag::IntegrableNonPareto);
    }
}
