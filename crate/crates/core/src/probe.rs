//! Pairwise-interaction families with pluggable sufficient statistics.
//!
//! A family has unnormalized log-density
//! `−Σᵢ μᵢᵀSᵢ(yᵢ) − Σᵢ Σⱼ Θᵢⱼ Tᵢ(yᵢ)Tⱼ(yⱼ)`. Only logarithmic statistics
//! with `μᵀ𝟙 = d+1` produce a `(d+1)`-homogeneous function; the residual
//! scan here exhibits the violation for the other enumerated statistics.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{is_connected, support_graph};
use crate::hr::GhrParams;
use crate::linalg::SymMatrix;
use crate::rng::Draws;

const GRID_STREAM: u64 = 1 << 41;

/// Scalar statistic of one coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Statistic {
    Log,
    Identity,
    /// `y^α`, `α ≠ 0`.
    Power(f64),
    SquareOfLog,
}

impl Statistic {
    pub fn eval(&self, y: f64) -> f64 {
        match *self {
            Statistic::Log => y.ln(),
            Statistic::Identity => y,
            Statistic::Power(a) => y.powf(a),
            Statistic::SquareOfLog => {
                let l = y.ln();
                l * l
            }
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Statistic::Power(a) if !(a.is_finite() && a != 0.0) => {
                Err(Error::InvalidInput(format!("power statistic needs a finite non-zero exponent, got {a}")))
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for Statistic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Statistic::Log => f.write_str("log"),
            Statistic::Identity => f.write_str("identity"),
            Statistic::Power(a) => write!(f, "power:{a}"),
            Statistic::SquareOfLog => f.write_str("square-of-log"),
        }
    }
}

impl FromStr for Statistic {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let stat = match s {
            "log" => Statistic::Log,
            "identity" => Statistic::Identity,
            "square-of-log" => Statistic::SquareOfLog,
            _ => match s.strip_prefix("power:") {
                Some(a) => Statistic::Power(
                    a.parse().map_err(|_| Error::InvalidInput(format!("bad power exponent '{a}'")))?,
                ),
                None => return Err(Error::InvalidInput(format!("unknown statistic '{s}'"))),
            },
        };
        stat.validate()?;
        Ok(stat)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairwiseFamilySpec {
    /// `marginal_stats[i]` has length `q`.
    marginal_stats: Vec<Vec<Statistic>>,
    interaction_stats: Vec<Statistic>,
    /// `mu[i]` has length `q`.
    mu: Vec<Vec<f64>>,
    theta: SymMatrix,
}

impl PairwiseFamilySpec {
    /// Validates shapes, non-constant statistics, `q ∈ {1, 2}`, and connectivity
    /// of the support graph of Θ.
    pub fn new(
        marginal_stats: Vec<Vec<Statistic>>,
        interaction_stats: Vec<Statistic>,
        mu: Vec<Vec<f64>>,
        theta: SymMatrix,
    ) -> Result<Self> {
        let d = theta.dim();
        for len in [marginal_stats.len(), interaction_stats.len(), mu.len()] {
            if len != d {
                return Err(Error::DimensionMismatch { expected: d, got: len });
            }
        }
        let q = marginal_stats[0].len();
        if !(1..=2).contains(&q) {
            return Err(Error::InvalidInput(format!("marginal statistic dimension must be 1 or 2, got {q}")));
        }
        for (stats, m) in marginal_stats.iter().zip(&mu) {
            if stats.len() != q {
                return Err(Error::DimensionMismatch { expected: q, got: stats.len() });
            }
            if m.len() != q {
                return Err(Error::DimensionMismatch { expected: q, got: m.len() });
            }
        }
        for s in marginal_stats.iter().flatten().chain(&interaction_stats) {
            s.validate()?;
        }
        if mu.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("mu must be finite".into()));
        }
        if !is_connected(&support_graph(&theta, 0.0)) {
            return Err(Error::Pi2Violation);
        }
        Ok(PairwiseFamilySpec { marginal_stats, interaction_stats, mu, theta })
    }

    /// `q = 1` with the same statistic for every `Sᵢ` and `Tᵢ`.
    pub fn uniform(stat: Statistic, mu: Vec<f64>, theta: SymMatrix) -> Result<Self> {
        let d = theta.dim();
        Self::new(vec![vec![stat]; d], vec![stat; d], mu.into_iter().map(|m| vec![m]).collect(), theta)
    }

    /// The generalized Hüsler–Reiss member `(μ, Θ)` written as a log-statistic family.
    pub(crate) fn log_family(p: &GhrParams) -> Self {
        let d = p.dim();
        PairwiseFamilySpec {
            marginal_stats: vec![vec![Statistic::Log]; d],
            interaction_stats: vec![Statistic::Log; d],
            mu: p.mu().iter().map(|&m| vec![m]).collect(),
            theta: p.theta().matrix().clone(),
        }
    }

    pub fn dim(&self) -> usize {
        self.theta.dim()
    }

    pub fn q(&self) -> usize {
        self.marginal_stats[0].len()
    }

    pub fn theta(&self) -> &SymMatrix {
        &self.theta
    }

    pub fn interaction_stat(&self, i: usize) -> Statistic {
        self.interaction_stats[i]
    }
}

fn check_point(f: &PairwiseFamilySpec, y: &[f64]) -> Result<()> {
    if y.len() != f.dim() {
        return Err(Error::DimensionMismatch { expected: f.dim(), got: y.len() });
    }
    if y.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(Error::DomainError);
    }
    Ok(())
}

/// Unnormalized log-density at a point of the open positive orthant.
pub fn log_pairwise_density(f: &PairwiseFamilySpec, y: &[f64]) -> Result<f64> {
    check_point(f, y)?;
    let marginal: f64 = f
        .marginal_stats
        .iter()
        .zip(&f.mu)
        .zip(y)
        .map(|((stats, m), &yi)| stats.iter().zip(m).map(|(s, mi)| mi * s.eval(yi)).sum::<f64>())
        .sum();
    let t: Vec<f64> = f.interaction_stats.iter().zip(y).map(|(s, &yi)| s.eval(yi)).collect();
    Ok(-marginal - f.theta.quad_form(&t))
}

/// `|log f(ty) − log f(y) + (d+1) log t|`; zero iff the family is `(d+1)`-homogeneous at `y`.
pub fn homogeneity_residual(f: &PairwiseFamilySpec, y: &[f64], t: f64) -> Result<f64> {
    if !(t.is_finite() && t > 0.0) {
        return Err(Error::DomainError);
    }
    let scaled: Vec<f64> = y.iter().map(|v| t * v).collect();
    let d = f.dim() as f64;
    Ok((log_pairwise_density(f, &scaled)? - log_pairwise_density(f, y)? + (d + 1.0) * t.ln()).abs())
}

/// Double difference over the four points that take `(yᵢ, yⱼ)` from
/// `{yi.0, yi.1} × {yj.0, yj.1}` and agree with `base` elsewhere:
/// `log f(y⁽¹⁾) − log f(y⁽²⁾) − log f(y⁽³⁾) + log f(y⁽⁴⁾)`.
///
/// Equals `−2Θᵢⱼ ΔTᵢ ΔTⱼ`; it vanishes identically iff the density factorizes
/// into a part free of `yᵢ` times a part free of `yⱼ`.
pub fn cross_difference(
    f: &PairwiseFamilySpec,
    i: usize,
    j: usize,
    yi: (f64, f64),
    yj: (f64, f64),
    base: &[f64],
) -> Result<f64> {
    let d = f.dim();
    if i >= d || j >= d || i == j {
        return Err(Error::InvalidInput(format!("invalid index pair ({i}, {j})")));
    }
    check_point(f, base)?;
    let at = |a: f64, b: f64| -> Result<f64> {
        let mut y = base.to_vec();
        y[i] = a;
        y[j] = b;
        log_pairwise_density(f, &y)
    };
    Ok(at(yi.0, yj.0)? - at(yi.0, yj.1)? - at(yi.1, yj.0)? + at(yi.1, yj.1)?)
}

/// Points with log-coordinates uniform on `[−2, 2]ᵈ`, conditioned on landing in 𝓛.
pub fn residual_grid(d: usize, n_points: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(n_points);
    let mut attempt = 0u64;
    while out.len() < n_points {
        let mut draws = Draws::at(seed, GRID_STREAM, attempt, d as u64);
        attempt += 1;
        let x: Vec<f64> = (0..d).map(|_| 4.0 * draws.unit() - 2.0).collect();
        if x.iter().any(|v| *v > 0.0) {
            out.push(x.into_iter().map(f64::exp).collect());
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HomogeneityScan {
    pub max_residual: f64,
    pub worst_point: Vec<f64>,
    pub worst_t: f64,
    pub evaluations: usize,
}

/// Maximum [`homogeneity_residual`] over `grid × scales`, scanned in a fixed order.
pub fn homogeneity_scan(f: &PairwiseFamilySpec, grid: &[Vec<f64>], scales: &[f64]) -> Result<HomogeneityScan> {
    let mut best = HomogeneityScan { max_residual: 0.0, worst_point: Vec::new(), worst_t: 1.0, evaluations: 0 };
    for y in grid {
        for &t in scales {
            let r = homogeneity_residual(f, y, t)?;
            best.evaluations += 1;
            if r > best.max_residual || best.worst_point.is_empty() {
                best.max_residual = r.max(best.max_residual);
                best.worst_point = y.clone();
                best.worst_t = t;
            }
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hr::{log_density_unnormalized, PrecisionMatrix};
    use std::f64::consts::E;

    fn path() -> SymMatrix {
        SymMatrix::from_rows(&[vec![1.0, -1.0, 0.0], vec![-1.0, 2.0, -1.0], vec![0.0, -1.0, 1.0]]).unwrap()
    }

    #[test]
    fn log_family_matches_hr_density() {
        let theta = PrecisionMatrix::new(path()).unwrap();
        let p = GhrParams::new(vec![1.5, 1.0, 1.5], theta).unwrap();
        let f = PairwiseFamilySpec::uniform(Statistic::Log, p.mu().to_vec(), path()).unwrap();
        for y in residual_grid(3, 50, 4) {
            let a = log_pairwise_density(&f, &y).unwrap();
            let b = log_density_unnormalized(&p, &y).unwrap();
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn identity_statistic_values() {
        let f = PairwiseFamilySpec::uniform(Statistic::Identity, vec![1.0; 3], SymMatrix::centering(3)).unwrap();
        assert!((log_pairwise_density(&f, &[2.0; 3]).unwrap() + 6.0).abs() < 1e-14);
        assert!((log_pairwise_density(&f, &[4.0; 3]).unwrap() + 12.0).abs() < 1e-13);
        assert_eq!(log_pairwise_density(&f, &[1.0, 0.0, 2.0]), Err(Error::DomainError));
    }

    #[test]
    fn homogeneity_residual_examples() {
        let f = PairwiseFamilySpec::uniform(Statistic::Identity, vec![1.0; 3], SymMatrix::centering(3)).unwrap();
        let r = homogeneity_residual(&f, &[2.0; 3], 2.0).unwrap();
        assert!((r - (6.0 - 4.0 * 2f64.ln())).abs() < 1e-13);
        assert!((r - 3.227).abs() < 1e-3);
        assert_eq!(homogeneity_residual(&f, &[2.0; 3], 1.0).unwrap(), 0.0);

        let g = PairwiseFamilySpec::uniform(Statistic::Log, vec![4.0 / 3.0; 3], SymMatrix::centering(3)).unwrap();
        for y in residual_grid(3, 20, 1) {
            assert!(homogeneity_residual(&g, &y, 10.0).unwrap() < 1e-12);
        }
    }

    #[test]
    fn cross_difference_examples() {
        let f = PairwiseFamilySpec::uniform(Statistic::Log, vec![1.5, 1.0, 1.5], path()).unwrap();
        let base = [2.0, 3.0, 5.0];
        assert!(cross_difference(&f, 0, 2, (E, 1.0), (E, 1.0), &base).unwrap().abs() < 1e-14);
        assert!((cross_difference(&f, 0, 1, (E, 1.0), (E, 1.0), &base).unwrap() - 2.0).abs() < 1e-14);
        assert_eq!(cross_difference(&f, 0, 1, (3.0, 3.0), (E, 1.0), &base).unwrap(), 0.0);
    }

    #[test]
    fn cross_difference_recovers_interaction_for_power_stats() {
        let theta = SymMatrix::from_rows(&[vec![1.0, 0.4, -0.2], vec![0.4, 2.0, 0.7], vec![-0.2, 0.7, 0.5]]).unwrap();
        let s = Statistic::Power(0.5);
        let f = PairwiseFamilySpec::uniform(s, vec![0.3, -1.0, 2.0], theta.clone()).unwrap();
        let (a, b, c, dd) = (1.7, 0.4, 3.1, 2.2);
        let v = cross_difference(&f, 1, 2, (a, b), (c, dd), &[1.0, 1.0, 1.0]).unwrap();
        let delta = (s.eval(a) - s.eval(b)) * (s.eval(c) - s.eval(dd));
        assert!((v / delta + 2.0 * theta.get(1, 2)).abs() < 1e-10);
    }

    #[test]
    fn statistic_parsing() {
        assert_eq!("log".parse::<Statistic>().unwrap(), Statistic::Log);
        assert_eq!("power:0.5".parse::<Statistic>().unwrap(), Statistic::Power(0.5));
        assert!("power:0".parse::<Statistic>().is_err());
        assert!("cosine".parse::<Statistic>().is_err());
        assert_eq!(Statistic::Power(2.0).to_string(), "power:2");
    }

    #[test]
    fn rejects_disconnected_support_and_bad_shapes() {
        let theta = SymMatrix::from_rows(&[vec![1.0, -1.0, 0.0], vec![-1.0, 1.0, 0.0], vec![0.0, 0.0, 0.0]]).unwrap();
        assert_eq!(PairwiseFamilySpec::uniform(Statistic::Log, vec![1.0; 3], theta).unwrap_err(), Error::Pi2Violation);
        let err = PairwiseFamilySpec::new(
            vec![vec![Statistic::Log; 3]; 3],
            vec![Statistic::Log; 3],
            vec![vec![1.0; 3]; 3],
            path(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidInput(_)));
    }

    #[test]
    fn square_of_log_marginals_absorb_the_diagonal() {
        // q = 2 with (log, log²) marginals: adding c·log² to each marginal is the
        // same as adding c to the diagonal of Θ.
        let stats = vec![vec![Statistic::Log, Statistic::SquareOfLog]; 3];
        let mu = vec![vec![1.5, 0.3], vec![1.0, 0.3], vec![1.5, 0.3]];
        let f = PairwiseFamilySpec::new(stats, vec![Statistic::Log; 3], mu, path()).unwrap();
        assert_eq!(f.q(), 2);
        let shifted = SymMatrix::from_fn(3, |i, j| path().get(i, j) + if i == j { 0.3 } else { 0.0 });
        let g = PairwiseFamilySpec::uniform(Statistic::Log, vec![1.5, 1.0, 1.5], shifted).unwrap();
        for y in residual_grid(3, 10, 2) {
            assert!((log_pairwise_density(&f, &y).unwrap() - log_pairwise_density(&g, &y).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn grid_is_in_exceedance_region_and_reproducible() {
        let g = residual_grid(4, 100, 9);
        assert_eq!(g.len(), 100);
        assert!(g.iter().all(|y| y.iter().any(|v| *v > 1.0)));
        assert_eq!(g, residual_grid(4, 100, 9));
    }
}
