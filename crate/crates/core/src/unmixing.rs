//! Unmixing-matrix estimation: PCA on the empirical covariance for
//! well-separated spectra, and a reweighted-covariance (Fourier PCA) variant
//! for degenerate spectra. Also frame alignment for error measurement.

use ndarray::{Array1, Array2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::assignment::bottleneck_assignment;
use crate::density::SampleMatrix;
use crate::error::{Error, Result};
use crate::linalg::{column_means, symmetric_eigen, EigenDecomposition, OrthonormalFrame, SymMatrix};
use crate::rng::RngState;

/// Relative eigengap below which the covariance spectrum counts as degenerate.
pub const DEGENERATE_GAP_RATIO: f64 = 1e-3;

const MIN_CF_MODULUS: f64 = 1e-3;
const MAX_PROBE_RETRIES: usize = 16;

/// Subtracts the column means. Returns `(mean, centered)`.
pub fn center(samples: &SampleMatrix) -> Result<(Array1<f64>, SampleMatrix)> {
    if samples.nrows() == 0 || samples.ncols() == 0 {
        return Err(Error::EmptyInput);
    }
    let mean = column_means(samples);
    let centered = samples - &mean;
    Ok((mean, centered))
}

/// `(1/M) Σ_j y_j y_jᵀ` (divisor `M`, data assumed centered).
pub fn empirical_covariance(centered: &SampleMatrix) -> Result<SymMatrix> {
    let m = centered.nrows();
    if m == 0 {
        return Err(Error::EmptyInput);
    }
    SymMatrix::from_upper(centered.t().dot(centered) / m as f64)
}

/// True when the smallest adjacent eigenvalue gap is below
/// `DEGENERATE_GAP_RATIO * λ_max`, i.e. PCA directions are unreliable.
pub fn spectrum_is_degenerate(eig: &EigenDecomposition) -> bool {
    eig.eigengap < DEGENERATE_GAP_RATIO * eig.lambda_max().abs()
}

/// Rows of the returned frame are eigenvectors of the empirical covariance in
/// eigenvalue-descending order.
pub fn pca_unmixing(samples: &SampleMatrix) -> Result<(OrthonormalFrame, EigenDecomposition)> {
    let (n, d) = samples.dim();
    if n < d {
        return Err(Error::TooFewSamples { needed: d, got: n });
    }
    let cov = empirical_covariance(samples)?;
    let eig = symmetric_eigen(&cov)?;
    Ok((eig.eigenvectors.clone(), eig))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FourierPcaConfig {
    /// `‖u‖ = probe_scale / sqrt(λ_max(Σ̂))`.
    pub probe_scale: f64,
    /// Probes tried; the one with the largest normalized eigengap wins.
    pub candidates: usize,
    /// Cumulant lower bound Δ. Recorded only.
    pub cumulant_bound: Option<f64>,
    /// Cumulant order k. Recorded only.
    pub cumulant_order: Option<u32>,
    /// Fourth-moment bound μ₄. Recorded only.
    pub moment4: Option<f64>,
    /// k-th moment bound μ_k. Recorded only.
    pub moment_k: Option<f64>,
}

impl Default for FourierPcaConfig {
    fn default() -> Self {
        Self {
            probe_scale: 1.0,
            candidates: 4,
            cumulant_bound: None,
            cumulant_order: None,
            moment4: None,
            moment_k: None,
        }
    }
}

impl FourierPcaConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.probe_scale > 0.0 && self.probe_scale.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "probe_scale must be positive, got {}",
                self.probe_scale
            )));
        }
        if self.candidates == 0 {
            return Err(Error::InvalidParameter("candidates must be >= 1".into()));
        }
        Ok(())
    }
}

/// Hessian of the empirical log characteristic function at `u`:
/// `D = −(Σ x xᵀ e^{iu·x} / Σ e^{iu·x} − m mᵀ)`, `m = Σ x e^{iu·x} / Σ e^{iu·x}`.
/// `None` when `|Σ e^{iu·x}| / n` is below the retry threshold.
fn log_cf_hessian(samples: &SampleMatrix, u: &[f64]) -> Option<(Array2<f64>, Array2<f64>)> {
    let (n, d) = samples.dim();
    let mut s0 = Complex64::new(0.0, 0.0);
    let mut s1 = vec![Complex64::new(0.0, 0.0); d];
    let mut s2 = vec![Complex64::new(0.0, 0.0); d * d];
    for x in samples.rows() {
        let t: f64 = x.iter().zip(u).map(|(a, b)| a * b).sum();
        let e = Complex64::from_polar(1.0, t);
        s0 += e;
        for a in 0..d {
            let xa = e * x[a];
            s1[a] += xa;
            for b in a..d {
                s2[a * d + b] += xa * x[b];
            }
        }
    }
    if s0.norm() / (n as f64) < MIN_CF_MODULUS {
        return None;
    }
    let m: Vec<Complex64> = s1.iter().map(|v| v / s0).collect();
    let mut re = Array2::zeros((d, d));
    let mut im = Array2::zeros((d, d));
    for a in 0..d {
        for b in a..d {
            let v = -(s2[a * d + b] / s0 - m[a] * m[b]);
            re[[a, b]] = v.re;
            im[[a, b]] = v.im;
        }
    }
    Some((re, im))
}

/// Reweighted-covariance Fourier PCA for degenerate spectra.
///
/// `D` above has the form `Wᵀ C W` with `C` complex diagonal, so both its real
/// and imaginary parts are diagonalized by `W`. Each candidate probe
/// diagonalizes `a·Re D + b·Im D` with `(a, b)` drawn at random; the candidate
/// with the largest eigengap per unit `‖(a, b)‖` is returned. Gaussian inputs
/// make `C` a multiple of the identity and the output arbitrary.
pub fn fourier_pca_unmixing(
    samples: &SampleMatrix,
    cfg: &FourierPcaConfig,
    rng: &mut RngState,
) -> Result<OrthonormalFrame> {
    cfg.validate()?;
    let (n, d) = samples.dim();
    if n < d || n == 0 {
        return Err(Error::TooFewSamples { needed: d.max(1), got: n });
    }
    if d == 1 {
        return Ok(OrthonormalFrame::identity(1));
    }
    let cov = empirical_covariance(samples)?;
    let lambda_max = symmetric_eigen(&cov)?.lambda_max();
    if !(lambda_max > 0.0) {
        return Err(Error::InvalidParameter("samples have zero variance".into()));
    }
    let radius = cfg.probe_scale / lambda_max.sqrt();

    let mut best: Option<(f64, OrthonormalFrame)> = None;
    let mut failures = 0;
    let mut accepted = 0;
    while accepted < cfg.candidates {
        let mut u: Vec<f64> = (0..d).map(|_| rng.normal()).collect();
        let norm = u.iter().map(|v| v * v).sum::<f64>().sqrt();
        u.iter_mut().for_each(|v| *v *= radius / norm);
        let Some((re, im)) = log_cf_hessian(samples, &u) else {
            failures += 1;
            if failures >= MAX_PROBE_RETRIES {
                return Err(Error::FourierProbeFailed { retries: failures });
            }
            continue;
        };
        accepted += 1;
        let a = rng.normal();
        let b = rng.normal();
        let combo = SymMatrix::from_upper(re * a + im * b)?;
        let eig = symmetric_eigen(&combo)?;
        let score = eig.eigengap / (a * a + b * b).sqrt();
        if best.as_ref().map_or(true, |(s, _)| score > *s) {
            best = Some((score, eig.eigenvectors));
        }
    }
    Ok(best.expect("at least one candidate").1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameAlignment {
    /// `estimate` row `i` matches `truth` row `permutation[i]`.
    pub permutation: Vec<usize>,
    pub signs: Vec<f64>,
    /// `‖ŵ_i − θ_i w_{σ(i)}‖₂`.
    pub row_errors: Vec<f64>,
    pub max_error: f64,
}

/// Matches estimated directions to true ones up to permutation and sign,
/// minimizing the largest row error.
pub fn align_frames(estimate: &OrthonormalFrame, truth: &OrthonormalFrame) -> Result<FrameAlignment> {
    let d = truth.dim();
    if estimate.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: estimate.dim(),
        });
    }
    let dots: Vec<Vec<f64>> = (0..d)
        .map(|i| (0..d).map(|j| estimate.row(i).dot(&truth.row(j))).collect())
        .collect();
    let cost: Vec<Vec<f64>> = dots
        .iter()
        .map(|r| r.iter().map(|v| 1.0 - v.abs()).collect())
        .collect();
    let permutation = bottleneck_assignment(&cost);
    let signs: Vec<f64> = (0..d)
        .map(|i| if dots[i][permutation[i]] < 0.0 { -1.0 } else { 1.0 })
        .collect();
    let row_errors: Vec<f64> = (0..d)
        .map(|i| {
            let diff = &estimate.row(i) - &(&truth.row(permutation[i]) * signs[i]);
            diff.dot(&diff).sqrt()
        })
        .collect();
    let max_error = row_errors.iter().copied().fold(0.0, f64::max);
    Ok(FrameAlignment {
        permutation,
        signs,
        row_errors,
        max_error,
    })
}
