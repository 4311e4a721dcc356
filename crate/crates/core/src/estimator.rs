//! The LC-IC pipeline: center, split, estimate the unmixing frame on one part,
//! fit univariate log-concave marginals along its rows on the other part, and
//! multiply.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::density::{Density, SampleMatrix, Sampler};
use crate::error::{Error, Result};
use crate::lcmle::{fit_logconcave_1d, LogConcave1D, WeightedPoints};
use crate::linalg::OrthonormalFrame;
use crate::par;
use crate::rng::RngState;
use crate::unmixing::{center, fourier_pca_unmixing, pca_unmixing, spectrum_is_degenerate, FourierPcaConfig};

/// Orthonormality tolerance enforced on fitted and loaded frames.
const FRAME_TOL: f64 = 1e-10;

/// How the unmixing frame is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Pca,
    Fourier,
    /// PCA unless the covariance spectrum is degenerate, then Fourier PCA.
    #[default]
    Auto,
    /// Frame supplied by the caller (oracle-informed estimate).
    Provided,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Pca => "pca",
            Method::Fourier => "fourier",
            Method::Auto => "auto",
            Method::Provided => "provided",
        })
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pca" => Ok(Method::Pca),
            "fourier" => Ok(Method::Fourier),
            "auto" => Ok(Method::Auto),
            other => Err(Error::InvalidParameter(format!("unknown method {other:?}"))),
        }
    }
}

/// Sizes of the unmixing part (`M = round(r·n)`) and the marginal part
/// (`N = n − M`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitPlan {
    pub ratio: f64,
    pub unmixing: usize,
    pub marginal: usize,
}

impl SplitPlan {
    pub fn new(n: usize, d: usize, ratio: f64) -> Result<Self> {
        if !(ratio > 0.0 && ratio < 1.0) {
            return Err(Error::InvalidParameter(format!("split ratio {ratio} not in (0, 1)")));
        }
        let unmixing = (ratio * n as f64).round() as usize;
        let marginal = n - unmixing.min(n);
        if unmixing < d || marginal < 2 {
            return Err(Error::SplitInfeasible {
                n,
                unmixing,
                marginal,
                dim: d,
            });
        }
        Ok(Self {
            ratio,
            unmixing,
            marginal,
        })
    }

    /// One seeded shuffle of `0..n`; the prefix goes to unmixing and the
    /// suffix to the marginals.
    pub fn assign(&self, rng: &mut RngState) -> (Vec<usize>, Vec<usize>) {
        let mut idx: Vec<usize> = (0..self.unmixing + self.marginal).collect();
        rng.shuffle(&mut idx);
        let marginal = idx.split_off(self.unmixing);
        (idx, marginal)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub ratio: f64,
    pub method: Method,
    pub fourier: FourierPcaConfig,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            ratio: 0.5,
            method: Method::Auto,
            fourier: FourierPcaConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    /// Smallest adjacent gap of the unmixing-part covariance spectrum.
    pub eigengap: Option<f64>,
    pub knot_counts: Vec<usize>,
    pub unmixing_samples: usize,
    pub marginal_samples: usize,
}

/// `p̂(x) = ∏_i p̂_i(ŵ_i · (x − μ̂))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductEstimate {
    pub mean: Vec<f64>,
    #[serde(rename = "W")]
    pub frame: OrthonormalFrame,
    pub marginals: Vec<LogConcave1D>,
    pub method: Method,
    pub diagnostics: Diagnostics,
}

/// Fits with the given split ratio and method and default Fourier settings.
pub fn fit_lcic(samples: &SampleMatrix, ratio: f64, method: Method, rng: &mut RngState) -> Result<ProductEstimate> {
    fit_lcic_with(
        samples,
        &FitOptions {
            ratio,
            method,
            ..FitOptions::default()
        },
        rng,
    )
}

pub fn fit_lcic_with(samples: &SampleMatrix, opts: &FitOptions, rng: &mut RngState) -> Result<ProductEstimate> {
    check_samples(samples)?;
    if opts.method == Method::Provided {
        return Err(Error::InvalidParameter("use fit_oracle for a provided frame".into()));
    }
    let (n, d) = samples.dim();
    let plan = SplitPlan::new(n, d, opts.ratio)?;
    let (mean, centered) = center(samples)?;
    let (unmix_idx, marg_idx) = plan.assign(rng);
    let y = centered.select(Axis(0), &unmix_idx);
    let x = centered.select(Axis(0), &marg_idx);

    let (pca_frame, eig) = pca_unmixing(&y)?;
    let use_fourier = match opts.method {
        Method::Pca => false,
        Method::Fourier => true,
        _ => spectrum_is_degenerate(&eig),
    };
    let (frame, method) = if use_fourier {
        (fourier_pca_unmixing(&y, &opts.fourier, rng)?, Method::Fourier)
    } else {
        (pca_frame, Method::Pca)
    };
    if frame.orthonormality_error() > FRAME_TOL {
        return Err(Error::InvalidParameter("estimated frame lost orthonormality".into()));
    }
    let marginals = fit_marginals(&x, &frame)?;
    Ok(assemble(mean.to_vec(), frame, marginals, method, Some(eig.eigengap), plan.unmixing, plan.marginal))
}

/// Oracle-informed estimate: marginals fitted on all samples along the rows
/// of a known frame.
pub fn fit_oracle(samples: &SampleMatrix, frame: &OrthonormalFrame) -> Result<ProductEstimate> {
    check_samples(samples)?;
    let (n, d) = samples.dim();
    if frame.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: frame.dim(),
        });
    }
    if n < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: n });
    }
    let (mean, centered) = center(samples)?;
    let marginals = fit_marginals(&centered, frame)?;
    Ok(assemble(mean.to_vec(), frame.clone(), marginals, Method::Provided, None, 0, n))
}

fn check_samples(samples: &SampleMatrix) -> Result<()> {
    if samples.nrows() == 0 || samples.ncols() == 0 {
        return Err(Error::EmptyInput);
    }
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    Ok(())
}

/// `x` holds centered rows. Projections use the same arithmetic as
/// `ProductEstimate::project`, so training points evaluate inside the support
/// bit for bit.
fn fit_marginals(x: &SampleMatrix, frame: &OrthonormalFrame) -> Result<Vec<LogConcave1D>> {
    let z: Vec<Vec<f64>> = x.rows().into_iter().map(|r| frame.project(&r.to_vec())).collect();
    par::map_range(frame.dim(), |i| {
        let col: Vec<f64> = z.iter().map(|r| r[i]).collect();
        WeightedPoints::from_samples(&col)
            .and_then(|pts| fit_logconcave_1d(&pts))
            .map_err(|e| Error::MarginalFit {
                direction: i,
                source: Box::new(e),
            })
    })
    .into_iter()
    .collect()
}

fn assemble(
    mean: Vec<f64>,
    frame: OrthonormalFrame,
    marginals: Vec<LogConcave1D>,
    method: Method,
    eigengap: Option<f64>,
    unmixing_samples: usize,
    marginal_samples: usize,
) -> ProductEstimate {
    let knot_counts = marginals.iter().map(|m| m.knots().len()).collect();
    ProductEstimate {
        mean,
        frame,
        marginals,
        method,
        diagnostics: Diagnostics {
            eigengap,
            knot_counts,
            unmixing_samples,
            marginal_samples,
        },
    }
}

impl ProductEstimate {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        if d == 0 {
            return Err(Error::EmptyInput);
        }
        for found in [self.frame.dim(), self.marginals.len()] {
            if found != d {
                return Err(Error::DimensionMismatch { expected: d, found });
            }
        }
        if self.mean.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        let err = self.frame.orthonormality_error();
        if err > FRAME_TOL {
            return Err(Error::InvalidParameter(format!("frame orthonormality error {err:e}")));
        }
        Ok(())
    }

    /// Coordinates `ŵ_i · (x − μ̂)`.
    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        let centered: Vec<f64> = x.iter().zip(&self.mean).map(|(a, b)| a - b).collect();
        self.frame.project(&centered)
    }

    /// `Σ_i log p̂_i(ŵ_i · (x − μ̂))`; `-inf` outside the support.
    pub fn log_density(&self, x: &[f64]) -> f64 {
        let mut total = 0.0;
        for (z, m) in self.project(x).iter().zip(&self.marginals) {
            let l = m.log_density(*z);
            if l == f64::NEG_INFINITY {
                return l;
            }
            total += l;
        }
        total
    }

    /// Rows `x = Ŵᵀ z + μ̂` with independent `z_i` from the marginals.
    pub fn sample(&self, n: usize, rng: &mut RngState) -> SampleMatrix {
        let d = self.dim();
        let mut out = Array2::zeros((n, d));
        let mut z = vec![0.0; d];
        for mut row in out.rows_mut() {
            for (zi, m) in z.iter_mut().zip(&self.marginals) {
                *zi = m.sample_one(rng);
            }
            let x = self.frame.unproject(&z);
            for j in 0..d {
                row[j] = x[j] + self.mean[j];
            }
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let est: Self = serde_json::from_str(s)?;
        est.validate()?;
        Ok(est)
    }
}

pub fn log_density(estimate: &ProductEstimate, x: &[f64]) -> f64 {
    estimate.log_density(x)
}

pub fn sample_estimate(estimate: &ProductEstimate, n: usize, rng: &mut RngState) -> SampleMatrix {
    estimate.sample(n, rng)
}

impl Density for ProductEstimate {
    fn dim(&self) -> usize {
        ProductEstimate::dim(self)
    }
    fn log_density(&self, x: &[f64]) -> f64 {
        ProductEstimate::log_density(self, x)
    }
}

impl Sampler for ProductEstimate {
    fn sample(&self, n: usize, rng: &mut RngState) -> SampleMatrix {
        ProductEstimate::sample(self, n, rng)
    }
}
