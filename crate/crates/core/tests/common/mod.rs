#![allow(dead_code)]

use hrpareto::hr::{self, GhrParams, PrecisionMatrix};
use hrpareto::linalg::SymMatrix;
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

pub struct TestRng(ChaCha8Rng);

impl TestRng {
    pub fn new(seed: u64) -> Self {
        TestRng(ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        let u = (self.0.next_u64() >> 11) as f64 / (1u64 << 53) as f64;
        lo + (hi - lo) * u
    }

    pub fn index(&mut self, n: usize) -> usize {
        (self.0.next_u64() % n as u64) as usize
    }
}

pub fn path3() -> SymMatrix {
    SymMatrix::from_rows(&[vec![1.0, -1.0, 0.0], vec![-1.0, 2.0, -1.0], vec![0.0, -1.0, 1.0]]).unwrap()
}

/// Weighted graph Laplacian; the path `0-1-…-(d-1)` always carries weight so
/// the graph is connected, other edges are absent with probability ½.
pub fn random_laplacian(rng: &mut TestRng, d: usize) -> SymMatrix {
    let mut w = vec![vec![0.0; d]; d];
    for i in 0..d {
        for j in (i + 1)..d {
            let weight = if j == i + 1 || rng.uniform(0.0, 1.0) < 0.5 { rng.uniform(0.2, 2.0) } else { 0.0 };
            w[i][j] = weight;
            w[j][i] = weight;
        }
    }
    SymMatrix::from_fn(d, |i, j| if i == j { w[i].iter().sum() } else { -w[i][j] })
}

/// `Π M Π` for a random positive definite `M`; off-diagonals take both signs.
pub fn random_s1_plus(rng: &mut TestRng, d: usize) -> SymMatrix {
    let a: Vec<Vec<f64>> = (0..d).map(|_| (0..d).map(|_| rng.uniform(-1.0, 1.0)).collect()).collect();
    let m = SymMatrix::from_fn(d, |i, j| {
        (0..d).map(|k| a[i][k] * a[j][k]).sum::<f64>() + if i == j { 0.5 } else { 0.0 }
    });
    let pi = SymMatrix::centering(d);
    let left = pi.mat_mul(&m);
    SymMatrix::from_fn(d, |i, j| (0..d).map(|k| left[i * d + k] * pi.get(k, j)).sum())
}

pub fn precision(m: SymMatrix) -> PrecisionMatrix {
    PrecisionMatrix::new(m).unwrap()
}

pub fn hr_params(theta: PrecisionMatrix) -> GhrParams {
    let mu = hr::mu_hr(&theta).unwrap();
    GhrParams::new(mu, theta).unwrap()
}

/// Integrable μ away from the Hüsler–Reiss value: degree in `(d + 0.5, d + 2)`.
pub fn random_integrable_mu(rng: &mut TestRng, d: usize) -> Vec<f64> {
    let target = d as f64 + rng.uniform(0.5, 2.0);
    let raw: Vec<f64> = (0..d).map(|_| rng.uniform(0.2, 2.0)).collect();
    let s: f64 = raw.iter().sum();
    raw.iter().map(|r| r * target / s).collect()
}

/// Points of the exceedance region with log-coordinates in `[−2, 2]`.
pub fn exceedance_grid(rng: &mut TestRng, d: usize, n: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let x: Vec<f64> = (0..d).map(|_| rng.uniform(-2.0, 2.0)).collect();
        if x.iter().any(|v| *v > 0.0) {
            out.push(x.into_iter().map(f64::exp).collect());
        }
    }
    out
}

pub fn rel_spread(values: &[f64]) -> f64 {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (hi - lo) / hi.abs().max(lo.abs())
}
