//! Dense symmetric linear algebra for small matrices.
//!
//! Everything here works on [`SymMatrix`], a row-major `d × d` buffer that is
//! guaranteed symmetric on construction. The eigen-solver is cyclic Jacobi,
//! which is accurate to a few ulps for the dimensions this crate targets
//! (d up to a few dozen) and needs no external LAPACK.

use std::ops::Index;

use crate::error::{Error, Result};

/// Default relative tolerance for rank decisions.
pub const DEFAULT_TOL: f64 = 1e-9;

/// Inputs whose relative asymmetry is below this are symmetrized, others rejected.
pub const SYMMETRY_TOL: f64 = 1e-9;

const JACOBI_REL_TOL: f64 = 1e-12;
const JACOBI_MAX_SWEEPS: usize = 100;

/// Symmetric `d × d` matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    d: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    /// Builds a symmetric matrix from a row-major buffer.
    ///
    /// Entries must be finite. Small asymmetries (relative to the largest entry)
    /// are averaged away; larger ones are rejected with [`Error::NonSymmetric`].
    pub fn new(d: usize, data: Vec<f64>) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidInput("matrix dimension must be positive".into()));
        }
        if data.len() != d * d {
            return Err(Error::DimensionMismatch { expected: d * d, got: data.len() });
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("matrix entries must be finite".into()));
        }
        let max_abs = data.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        let mut asym = 0.0_f64;
        for i in 0..d {
            for j in (i + 1)..d {
                asym = asym.max((data[i * d + j] - data[j * d + i]).abs());
            }
        }
        let rel = if max_abs > 0.0 { asym / max_abs } else { 0.0 };
        if rel > SYMMETRY_TOL {
            return Err(Error::NonSymmetric { asymmetry: rel });
        }
        let mut m = SymMatrix { d, data };
        if asym > 0.0 {
            for i in 0..d {
                for j in (i + 1)..d {
                    let avg = 0.5 * (m.data[i * d + j] + m.data[j * d + i]);
                    m.data[i * d + j] = avg;
                    m.data[j * d + i] = avg;
                }
            }
        }
        Ok(m)
    }

    /// Builds from rows; every row must have length equal to the row count.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != d) {
            return Err(Error::DimensionMismatch { expected: d, got: bad.len() });
        }
        Self::new(d, rows.iter().flatten().copied().collect())
    }

    /// Builds from the upper triangle of `f`, mirroring it into the lower one.
    pub fn from_fn(d: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = vec![0.0; d * d];
        for i in 0..d {
            for j in i..d {
                let v = f(i, j);
                data[i * d + j] = v;
                data[j * d + i] = v;
            }
        }
        SymMatrix { d, data }
    }

    pub fn zeros(d: usize) -> Self {
        SymMatrix { d, data: vec![0.0; d * d] }
    }

    pub fn identity(d: usize) -> Self {
        Self::from_fn(d, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    /// The centering projection `I − J/d`.
    pub fn centering(d: usize) -> Self {
        let inv = 1.0 / d as f64;
        Self::from_fn(d, |i, j| if i == j { 1.0 - inv } else { -inv })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.d + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.d).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
    }

    pub fn scaled(&self, c: f64) -> Self {
        SymMatrix { d: self.d, data: self.data.iter().map(|x| c * x).collect() }
    }

    pub fn max_abs_diff(&self, other: &SymMatrix) -> f64 {
        assert_eq!(self.d, other.d, "dimension mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn mat_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.d, "dimension mismatch");
        (0..self.d).map(|i| dot(self.row(i), x)).collect()
    }

    /// `xᵀ M x`.
    pub fn quad_form(&self, x: &[f64]) -> f64 {
        dot(x, &self.mat_vec(x))
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.d).map(|i| self.row(i).iter().sum()).collect()
    }

    /// Principal submatrix with row and column `k` removed.
    pub fn without_index(&self, k: usize) -> SymMatrix {
        assert!(k < self.d && self.d > 1, "index out of range");
        let keep: Vec<usize> = (0..self.d).filter(|&i| i != k).collect();
        SymMatrix::from_fn(self.d - 1, |a, b| self.get(keep[a], keep[b]))
    }

    /// Inserts a zero row and column at position `k` (inverse of [`without_index`](Self::without_index)).
    pub fn with_zero_index(&self, k: usize) -> SymMatrix {
        assert!(k <= self.d, "index out of range");
        let src = |i: usize| if i < k { Some(i) } else if i == k { None } else { Some(i - 1) };
        SymMatrix::from_fn(self.d + 1, |i, j| match (src(i), src(j)) {
            (Some(a), Some(b)) => self.get(a, b),
            _ => 0.0,
        })
    }

    /// Ordinary matrix product; the result is generally not symmetric, so it is row-major `Vec`.
    pub fn mat_mul(&self, other: &SymMatrix) -> Vec<f64> {
        assert_eq!(self.d, other.d, "dimension mismatch");
        let d = self.d;
        let mut out = vec![0.0; d * d];
        for i in 0..d {
            for l in 0..d {
                let a = self.get(i, l);
                if a == 0.0 {
                    continue;
                }
                for j in 0..d {
                    out[i * d + j] += a * other.get(l, j);
                }
            }
        }
        out
    }

    /// `Π M Π` with `Π = I − J/d`: subtract row and column means, add back the grand mean.
    pub fn double_centered(&self) -> SymMatrix {
        let d = self.d;
        let n = d as f64;
        let row_means: Vec<f64> = self.row_sums().into_iter().map(|s| s / n).collect();
        let grand = row_means.iter().sum::<f64>() / n;
        SymMatrix::from_fn(d, |i, j| self.get(i, j) - row_means[i] - row_means[j] + grand)
    }
}

impl Index<(usize, usize)> for SymMatrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.d + j]
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Eigenpairs of a symmetric matrix, eigenvalues ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDecomposition {
    pub eigenvalues: Vec<f64>,
    /// `eigenvectors[i]` is the unit eigenvector for `eigenvalues[i]`.
    pub eigenvectors: Vec<Vec<f64>>,
}

impl SpectralDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn max_abs_eigenvalue(&self) -> f64 {
        self.eigenvalues.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
    }

    /// `Σ g(λᵢ) vᵢ vᵢᵀ`.
    pub fn map_spectrum(&self, mut g: impl FnMut(f64) -> f64) -> SymMatrix {
        let d = self.dim();
        let weights: Vec<f64> = self.eigenvalues.iter().map(|&l| g(l)).collect();
        SymMatrix::from_fn(d, |i, j| {
            self.eigenvectors
                .iter()
                .zip(&weights)
                .map(|(v, w)| w * v[i] * v[j])
                .sum()
        })
    }

    pub fn reconstruct(&self) -> SymMatrix {
        self.map_spectrum(|l| l)
    }
}

fn off_diagonal_norm(a: &[f64], d: usize) -> f64 {
    let mut s = 0.0;
    for i in 0..d {
        for j in 0..d {
            if i != j {
                s += a[i * d + j] * a[i * d + j];
            }
        }
    }
    s.sqrt()
}

/// Spectral decomposition by cyclic Jacobi rotations.
///
/// Converges when the off-diagonal Frobenius norm drops below `1e-12 · ‖m‖_F`.
/// Eigenvectors are sign-normalized so that their largest-magnitude component
/// is positive, making the output a deterministic function of the input.
pub fn spectral_decompose(m: &SymMatrix) -> Result<SpectralDecomposition> {
    let d = m.d;
    let mut a = m.data.clone();
    let mut v = SymMatrix::identity(d).data;
    let norm = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let target = JACOBI_REL_TOL * norm;

    let mut converged = false;
    for _ in 0..JACOBI_MAX_SWEEPS {
        if off_diagonal_norm(&a, d) <= target {
            converged = true;
            break;
        }
        for p in 0..d {
            for q in (p + 1)..d {
                let apq = a[p * d + q];
                if apq == 0.0 {
                    continue;
                }
                let tau = (a[q * d + q] - a[p * d + p]) / (2.0 * apq);
                let t = if tau.abs() > 1e150 {
                    0.5 / tau
                } else {
                    tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for k in 0..d {
                    let akp = a[k * d + p];
                    let akq = a[k * d + q];
                    a[k * d + p] = c * akp - s * akq;
                    a[k * d + q] = s * akp + c * akq;
                }
                for k in 0..d {
                    let apk = a[p * d + k];
                    let aqk = a[q * d + k];
                    a[p * d + k] = c * apk - s * aqk;
                    a[q * d + k] = s * apk + c * aqk;
                }
                a[p * d + q] = 0.0;
                a[q * d + p] = 0.0;
                for k in 0..d {
                    let vkp = v[k * d + p];
                    let vkq = v[k * d + q];
                    v[k * d + p] = c * vkp - s * vkq;
                    v[k * d + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    if !converged && off_diagonal_norm(&a, d) > target {
        return Err(Error::NoConvergence { sweeps: JACOBI_MAX_SWEEPS });
    }

    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| a[i * d + i].total_cmp(&a[j * d + j]));
    let eigenvalues = order.iter().map(|&i| a[i * d + i]).collect();
    let eigenvectors = order
        .iter()
        .map(|&c| {
            let mut col: Vec<f64> = (0..d).map(|r| v[r * d + c]).collect();
            let lead = col
                .iter()
                .copied()
                .reduce(|best, x| if x.abs() > best.abs() { x } else { best })
                .unwrap_or(0.0);
            if lead < 0.0 {
                col.iter_mut().for_each(|x| *x = -*x);
            }
            col
        })
        .collect();
    Ok(SpectralDecomposition { eigenvalues, eigenvectors })
}

/// Moore–Penrose pseudoinverse: eigenvalues with `|λ| ≤ tol · max|λ|` are treated as zero.
pub fn pseudo_inverse(m: &SymMatrix, tol: f64) -> Result<SymMatrix> {
    let spec = spectral_decompose(m)?;
    let thr = tol * spec.max_abs_eigenvalue();
    Ok(spec.map_spectrum(|l| if l.abs() > thr { 1.0 / l } else { 0.0 }))
}

/// Product of the eigenvalues with `|λ| > tol · max|λ|`; 1 for the zero matrix.
pub fn pseudo_determinant(m: &SymMatrix, tol: f64) -> Result<f64> {
    let spec = spectral_decompose(m)?;
    let thr = tol * spec.max_abs_eigenvalue();
    Ok(spec.eigenvalues.iter().filter(|l| l.abs() > thr).product())
}

/// Result of testing membership in the zero-row-sum space and its PSD rank-(d−1) cone.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct S1Certificate {
    pub in_s1: bool,
    pub in_s1_plus: bool,
    pub rank: usize,
    pub max_abs_row_sum: f64,
    pub eigenvalues: Vec<f64>,
}

/// Certifies `m ∈ 𝒮₁` (zero row sums) and `m ∈ 𝒮₁,₊` (additionally PSD, rank d−1, kernel along 𝟙).
pub fn certify_s1_plus(m: &SymMatrix, tol: f64) -> Result<S1Certificate> {
    let d = m.d;
    let max_abs_row_sum = m.row_sums().iter().fold(0.0_f64, |a, s| a.max(s.abs()));
    let in_s1 = max_abs_row_sum <= tol * m.max_abs() * d as f64;

    let spec = spectral_decompose(m)?;
    let thr = tol * spec.max_abs_eigenvalue();
    let rank = spec.eigenvalues.iter().filter(|l| l.abs() > thr).count();

    let in_s1_plus = in_s1 && d >= 2 && {
        let l0 = spec.eigenvalues[0];
        let kernel_along_ones = {
            let s: f64 = spec.eigenvectors[0].iter().sum();
            (s.abs() / (d as f64).sqrt() - 1.0).abs() < 1e-6
        };
        l0.abs() <= thr && spec.eigenvalues[1] > thr && kernel_along_ones
    };

    Ok(S1Certificate { in_s1, in_s1_plus, rank, max_abs_row_sum, eigenvalues: spec.eigenvalues })
}

/// Cholesky factor `L` with `M = L Lᵀ`.
#[derive(Debug, Clone)]
pub struct Cholesky {
    d: usize,
    l: Vec<f64>,
}

impl Cholesky {
    /// Returns `None` unless every pivot exceeds `tol · max|m|`.
    pub fn new(m: &SymMatrix, tol: f64) -> Option<Self> {
        let d = m.d;
        let floor = tol * m.max_abs();
        let mut l = vec![0.0; d * d];
        for j in 0..d {
            let mut diag = m.get(j, j);
            for k in 0..j {
                diag -= l[j * d + k] * l[j * d + k];
            }
            if !(diag > floor) || diag <= 0.0 {
                return None;
            }
            let ljj = diag.sqrt();
            l[j * d + j] = ljj;
            for i in (j + 1)..d {
                let mut s = m.get(i, j);
                for k in 0..j {
                    s -= l[i * d + k] * l[j * d + k];
                }
                l[i * d + j] = s / ljj;
            }
        }
        Some(Cholesky { d, l })
    }

    pub fn log_det(&self) -> f64 {
        2.0 * (0..self.d).map(|i| self.l[i * self.d + i].ln()).sum::<f64>()
    }

    pub fn det(&self) -> f64 {
        self.log_det().exp()
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let d = self.d;
        let mut y = b.to_vec();
        for i in 0..d {
            for k in 0..i {
                y[i] -= self.l[i * d + k] * y[k];
            }
            y[i] /= self.l[i * d + i];
        }
        for i in (0..d).rev() {
            for k in (i + 1)..d {
                y[i] -= self.l[k * d + i] * y[k];
            }
            y[i] /= self.l[i * d + i];
        }
        y
    }

    pub fn inverse(&self) -> SymMatrix {
        let d = self.d;
        let cols: Vec<Vec<f64>> = (0..d)
            .map(|j| {
                let mut e = vec![0.0; d];
                e[j] = 1.0;
                self.solve(&e)
            })
            .collect();
        SymMatrix::from_fn(d, |i, j| 0.5 * (cols[j][i] + cols[i][j]))
    }
}

/// Solves `A x = b` by Gaussian elimination with partial pivoting.
///
/// Returns `None` when a pivot falls below `tol · max|A|`.
pub fn solve_linear(a: &SymMatrix, b: &[f64], tol: f64) -> Option<Vec<f64>> {
    let d = a.d;
    assert_eq!(b.len(), d, "dimension mismatch");
    let floor = tol * a.max_abs();
    let mut m = a.data.clone();
    let mut x = b.to_vec();
    for col in 0..d {
        let pivot_row = (col..d)
            .max_by(|&i, &j| m[i * d + col].abs().total_cmp(&m[j * d + col].abs()))
            .expect("non-empty range");
        let pivot = m[pivot_row * d + col];
        if !(pivot.abs() > floor) {
            return None;
        }
        if pivot_row != col {
            for k in 0..d {
                m.swap(col * d + k, pivot_row * d + k);
            }
            x.swap(col, pivot_row);
        }
        for r in (col + 1)..d {
            let factor = m[r * d + col] / pivot;
            if factor == 0.0 {
                continue;
            }
            for k in col..d {
                m[r * d + k] -= factor * m[col * d + k];
            }
            x[r] -= factor * x[col];
        }
    }
    for i in (0..d).rev() {
        let mut s = x[i];
        for k in (i + 1)..d {
            s -= m[i * d + k] * x[k];
        }
        x[i] = s / m[i * d + i];
    }
    Some(x)
}
