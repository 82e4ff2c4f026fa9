//! Monte Carlo verification of the closed-form integrals.
//!
//! Every estimator works in log coordinates `x = log y`, where the unnormalized
//! mass of a region of 𝓛 is `∫ exp{−(μ−𝟙)ᵀx − xᵀΘx} dx`. Importance sampling
//! anchors at a coordinate `k`: `xₖ` is exponential, `x_{∖k}` Gaussian around
//! the conditional mode. The proposal is deliberately wider than the exact
//! conditional (covariance `Σ^(k)` instead of `½Σ^(k)`, rate halved) so the
//! weights vary and the estimate does not collapse onto the closed form.
//!
//! Randomness is counter-based: sample `i` of stream `s` under seed `seed`
//! always reads the same ChaCha words, so results are bit-identical whatever
//! the number of worker threads.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{DivergenceReason, Error, Result};
use crate::hr::{self, GhrParams};
use crate::linalg::{dot, spectral_decompose, SymMatrix};
use crate::rng::Draws;

pub const MAX_INCLUSION_EXCLUSION_DIM: usize = 12;

const CHUNK: usize = 4096;
const TREND_STREAM_BASE: u64 = 1 << 40;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    pub value: f64,
    pub std_error: f64,
    pub n: usize,
    pub seed: u64,
}

impl McEstimate {
    pub fn relative_std_error(&self) -> f64 {
        self.std_error / self.value.abs()
    }
}

/// Spread of the importance weights of one estimator run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeightSummary {
    pub mean: f64,
    pub max: f64,
    pub max_over_mean: f64,
}

#[derive(Debug, Clone, Copy)]
struct Moments {
    count: usize,
    mean: f64,
    m2: f64,
    max: f64,
    nonfinite: usize,
}

impl Moments {
    fn empty() -> Self {
        Moments { count: 0, mean: 0.0, m2: 0.0, max: f64::NEG_INFINITY, nonfinite: 0 }
    }

    fn push(&mut self, w: f64) {
        if !w.is_finite() {
            self.nonfinite += 1;
            return;
        }
        self.count += 1;
        let delta = w - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (w - self.mean);
        self.max = self.max.max(w);
    }

    fn merge(self, other: Moments) -> Moments {
        if self.count == 0 {
            return Moments { nonfinite: self.nonfinite + other.nonfinite, ..other };
        }
        if other.count == 0 {
            return Moments { nonfinite: self.nonfinite + other.nonfinite, ..self };
        }
        let count = self.count + other.count;
        let delta = other.mean - self.mean;
        let mean = self.mean + delta * other.count as f64 / count as f64;
        let m2 = self.m2 + other.m2 + delta * delta * (self.count as f64 * other.count as f64) / count as f64;
        Moments {
            count,
            mean,
            m2,
            max: self.max.max(other.max),
            nonfinite: self.nonfinite + other.nonfinite,
        }
    }
}

/// Runs `n` samples of `weight` in parallel chunks and reduces them in chunk order.
fn run_samples<F>(n: usize, seed: u64, stream: u64, words_per_sample: u64, weight: F) -> Moments
where
    F: Fn(&mut Draws) -> f64 + Sync,
{
    let chunks = n.div_ceil(CHUNK);
    let partials: Vec<Moments> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut m = Moments::empty();
            for i in (c * CHUNK)..((c + 1) * CHUNK).min(n) {
                let mut draws = Draws::at(seed, stream, i as u64, words_per_sample);
                m.push(weight(&mut draws));
            }
            m
        })
        .collect();
    partials.into_iter().fold(Moments::empty(), Moments::merge)
}

fn finish(m: Moments, n: usize, seed: u64) -> Result<(McEstimate, WeightSummary)> {
    if m.nonfinite > 0 || m.count == 0 {
        return Err(Error::DegenerateProposal);
    }
    let var = if m.count > 1 { m.m2 / (m.count - 1) as f64 } else { 0.0 };
    let est = McEstimate { value: m.mean, std_error: (var / m.count as f64).sqrt(), n, seed };
    let summary = WeightSummary {
        mean: m.mean,
        max: m.max,
        max_over_mean: if m.mean > 0.0 { m.max / m.mean } else { 0.0 },
    };
    Ok((est, summary))
}

/// Importance proposal anchored at coordinate `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProposalSpec {
    pub k: usize,
    /// `(μᵀ𝟙 − d)/2`.
    pub exponential_rate: f64,
    /// `½Σ^(k)(𝟙−μ)_{∖k}`; the Gaussian mean is this plus `xₖ𝟙`.
    pub gaussian_mean_shift: Vec<f64>,
    /// `Σ^(k)`.
    pub gaussian_covariance: SymMatrix,
    /// Row-major square root `V·diag(√λ)` of the covariance.
    factor: Vec<f64>,
    log_det_covariance: f64,
}

impl ProposalSpec {
    pub fn new(p: &GhrParams, k: usize) -> Result<Self> {
        require_integrable(p)?;
        let sigma = hr::sigma_k(p.theta(), k)?;
        let m = sigma.dim();
        let one_minus_mu: Vec<f64> = p
            .mu()
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != k)
            .map(|(_, v)| 1.0 - v)
            .collect();
        let gaussian_mean_shift = sigma.mat_vec(&one_minus_mu).into_iter().map(|v| 0.5 * v).collect();

        let spec = spectral_decompose(&sigma)?;
        if spec.eigenvalues.iter().any(|&l| !(l > 0.0)) {
            return Err(Error::DegenerateProposal);
        }
        let mut factor = vec![0.0; m * m];
        for (c, (l, v)) in spec.eigenvalues.iter().zip(&spec.eigenvectors).enumerate() {
            let s = l.sqrt();
            for r in 0..m {
                factor[r * m + c] = v[r] * s;
            }
        }
        let log_det_covariance = spec.eigenvalues.iter().map(|l| l.ln()).sum();
        Ok(ProposalSpec {
            k,
            exponential_rate: 0.5 * p.mass_excess(),
            gaussian_mean_shift,
            gaussian_covariance: sigma,
            factor,
            log_det_covariance,
        })
    }

    fn words_per_sample(&self) -> u64 {
        let m = self.gaussian_mean_shift.len();
        (1 + 2 * m.div_ceil(2)) as u64
    }

    /// Fills `x` with a draw and returns the log proposal density at it.
    fn sample(&self, draws: &mut Draws, z: &mut [f64], x: &mut [f64]) -> f64 {
        let m = z.len();
        let xk = -draws.open_unit().ln() / self.exponential_rate;
        draws.normals(z);
        let mut slot = 0;
        for (i, xi) in x.iter_mut().enumerate() {
            if i == self.k {
                *xi = xk;
                continue;
            }
            let row = &self.factor[slot * m..(slot + 1) * m];
            *xi = self.gaussian_mean_shift[slot] + xk + dot(row, z);
            slot += 1;
        }
        let log_exp = self.exponential_rate.ln() - self.exponential_rate * xk;
        let log_gauss = -0.5 * dot(z, z)
            - 0.5 * m as f64 * std::f64::consts::TAU.ln()
            - 0.5 * self.log_det_covariance;
        log_exp + log_gauss
    }
}

fn require_integrable(p: &GhrParams) -> Result<()> {
    if !p.theta().is_certified_plus() {
        return Err(Error::NotIntegrable { reason: DivergenceReason::Spectral });
    }
    if p.mass_excess() <= p.linear_margin() {
        return Err(Error::NotIntegrable { reason: DivergenceReason::Linear });
    }
    Ok(())
}

/// `−(μ−𝟙)ᵀx − xᵀΘx`: the log integrand in log coordinates, Jacobian included.
fn log_integrand(p: &GhrParams, x: &[f64]) -> f64 {
    let shifted: f64 = p.mu().iter().zip(x).map(|(m, xi)| (m - 1.0) * xi).sum();
    -shifted - p.theta().matrix().quad_form(x)
}

/// Mass of `{xⱼ > 0 ∀ j ∈ mask}`, sampled from the proposal of the lowest index in `mask`.
fn subset_mass(
    p: &GhrParams,
    proposal: &ProposalSpec,
    mask: u64,
    n: usize,
    seed: u64,
) -> Result<(McEstimate, WeightSummary)> {
    debug_assert_eq!(proposal.k, mask.trailing_zeros() as usize);
    let d = p.dim();
    let moments = run_samples(n, seed, mask, proposal.words_per_sample(), |draws| {
        let mut z = vec![0.0; d - 1];
        let mut x = vec![0.0; d];
        let log_q = proposal.sample(draws, &mut z, &mut x);
        let inside = (0..d).all(|j| mask & (1 << j) == 0 || x[j] > 0.0);
        if inside {
            (log_integrand(p, &x) - log_q).exp()
        } else {
            0.0
        }
    });
    finish(moments, n, seed)
}

fn check_samples(n: usize) -> Result<()> {
    if n == 0 {
        Err(Error::InvalidInput("sample count must be at least 1".into()))
    } else {
        Ok(())
    }
}

/// Importance-sampling estimate of the unnormalized mass of `{y ∈ 𝓛 : yₖ > 1}`,
/// together with a summary of the weights.
pub fn estimate_marginal_mass_with_weights(
    p: &GhrParams,
    k: usize,
    n: usize,
    seed: u64,
) -> Result<(McEstimate, WeightSummary)> {
    check_samples(n)?;
    if k >= p.dim() {
        return Err(Error::InvalidInput(format!("index {k} out of range")));
    }
    let proposal = ProposalSpec::new(p, k)?;
    subset_mass(p, &proposal, 1 << k, n, seed)
}

pub fn estimate_marginal_mass(p: &GhrParams, k: usize, n: usize, seed: u64) -> Result<McEstimate> {
    estimate_marginal_mass_with_weights(p, k, n, seed).map(|(e, _)| e)
}

/// Point estimate and standard error of a derived quantity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ValueWithError {
    pub value: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TotalMassEstimate {
    /// `Z(μ, Θ)`, the mass of all of 𝓛.
    pub total: McEstimate,
    /// Single-index terms `Iₖ` of the inclusion–exclusion sum.
    pub marginals: Vec<McEstimate>,
    /// `P(Yₖ > 1) = Iₖ / Z`.
    pub exceedance_probabilities: Vec<ValueWithError>,
    pub terms: usize,
}

/// Total mass over 𝓛 by inclusion–exclusion over the events `{yⱼ > 1}`.
///
/// Each of the `2ᵈ − 1` terms uses its own sample stream; the reported
/// standard error is the sum of the per-term errors.
pub fn estimate_total_mass(p: &GhrParams, n: usize, seed: u64) -> Result<TotalMassEstimate> {
    check_samples(n)?;
    let d = p.dim();
    if d > MAX_INCLUSION_EXCLUSION_DIM {
        return Err(Error::DimensionTooLarge { d, max: MAX_INCLUSION_EXCLUSION_DIM });
    }
    require_integrable(p)?;
    let proposals = (0..d).map(|k| ProposalSpec::new(p, k)).collect::<Result<Vec<_>>>()?;

    let mut value = 0.0;
    let mut std_error = 0.0;
    let mut marginals = vec![None; d];
    for mask in 1u64..(1 << d) {
        let anchor = mask.trailing_zeros() as usize;
        let (est, _) = subset_mass(p, &proposals[anchor], mask, n, seed)?;
        let sign = if mask.count_ones() % 2 == 1 { 1.0 } else { -1.0 };
        value += sign * est.value;
        std_error += est.std_error;
        if mask.count_ones() == 1 {
            marginals[anchor] = Some(est);
        }
    }
    let total = McEstimate { value, std_error, n, seed };
    let marginals: Vec<McEstimate> = marginals.into_iter().map(|m| m.expect("all singletons visited")).collect();
    let exceedance_probabilities = marginals
        .iter()
        .map(|m| {
            let prob = m.value / total.value;
            ValueWithError {
                value: prob,
                std_error: prob.abs() * (m.relative_std_error() + total.relative_std_error()),
            }
        })
        .collect();
    Ok(TotalMassEstimate { total, marginals, exceedance_probabilities, terms: (1 << d) - 1 })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrendPoint {
    pub radius: f64,
    pub truncated_mass: f64,
    pub std_error: f64,
}

/// Mass of `{y ∈ 𝓛 : 1/R ≤ yᵢ ≤ R ∀ i}` for each radius `R`.
///
/// Strata are the shells between consecutive boxes `[−log R, log R]ᵈ` in log
/// coordinates, each sampled uniformly with `n` points. The lower cut-off
/// `yᵢ ≥ 1/R` keeps each truncated mass finite even when Θ is indefinite.
/// A non-finite integrand value makes the corresponding and all later masses
/// infinite.
pub fn integrability_trend(p: &GhrParams, radii: &[f64], n: usize, seed: u64) -> Result<Vec<TrendPoint>> {
    check_samples(n)?;
    if radii.iter().any(|r| !(r.is_finite() && *r > 1.0)) {
        return Err(Error::InvalidInput("radii must be finite and greater than 1".into()));
    }
    if radii.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput("radii must be strictly increasing".into()));
    }
    let d = p.dim();
    let mut out = Vec::with_capacity(radii.len());
    let mut cumulative = 0.0_f64;
    let mut variance = 0.0;
    let mut inner = 0.0;
    for (i, &r) in radii.iter().enumerate() {
        let half = r.ln();
        let volume = (2.0 * half).powi(d as i32);
        let moments = run_samples(n, seed, TREND_STREAM_BASE + i as u64, d as u64, |draws| {
            let x: Vec<f64> = (0..d).map(|_| half * (2.0 * draws.unit() - 1.0)).collect();
            let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let outside_inner = x.iter().any(|v| v.abs() > inner);
            if max > 0.0 && outside_inner {
                volume * log_integrand(p, &x).exp()
            } else {
                0.0
            }
        });
        if moments.nonfinite > 0 || !cumulative.is_finite() {
            cumulative = f64::INFINITY;
            variance = f64::INFINITY;
        } else {
            let var = if moments.count > 1 { moments.m2 / (moments.count - 1) as f64 } else { 0.0 };
            cumulative += moments.mean;
            variance += var / moments.count as f64;
        }
        out.push(TrendPoint { radius: r, truncated_mass: cumulative, std_error: variance.sqrt() });
        inner = half;
    }
    Ok(out)
}
