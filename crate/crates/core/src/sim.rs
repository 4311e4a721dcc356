//! Ground-truth models with the log-concave independent components property:
//! `X = Wᵀ Z + mean` with independent log-concave coordinates `Z_i`.

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Gamma as GammaDist, Normal};
use statrs::function::gamma::ln_gamma;

use crate::density::{Density, SampleMatrix, Sampler};
use crate::error::{Error, Result};
use crate::linalg::OrthonormalFrame;
use crate::rng::RngState;

/// Haar-distributed orthogonal matrix: QR of an i.i.d. Gaussian matrix with
/// the diagonal of R made positive (Gram–Schmidt, two passes).
pub fn haar_orthogonal(d: usize, rng: &mut RngState) -> OrthonormalFrame {
    assert!(d >= 1, "dimension must be positive");
    let g = Array2::from_shape_fn((d, d), |_| rng.normal());
    let mut q: Array2<f64> = Array2::zeros((d, d));
    for j in 0..d {
        let mut v = g.column(j).to_owned();
        for _ in 0..2 {
            for k in 0..j {
                let qk = q.column(k);
                let proj = qk.dot(&v);
                v.scaled_add(-proj, &qk);
            }
        }
        let norm = v.dot(&v).sqrt();
        q.column_mut(j).assign(&(v / norm));
    }
    OrthonormalFrame::new_unchecked(q)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum MarginalSpec {
    Normal {
        variance: f64,
    },
    Gamma {
        shape: f64,
        scale: f64,
        /// Shift by the analytic mean `shape * scale`.
        #[serde(default)]
        centered: bool,
    },
}

impl MarginalSpec {
    pub fn normal(variance: f64) -> Result<Self> {
        let m = MarginalSpec::Normal { variance };
        m.validate()?;
        Ok(m)
    }

    pub fn gamma(shape: f64, scale: f64, centered: bool) -> Result<Self> {
        let m = MarginalSpec::Gamma {
            shape,
            scale,
            centered,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            MarginalSpec::Normal { variance } => {
                if !(variance > 0.0 && variance.is_finite()) {
                    return Err(Error::InvalidParameter(format!(
                        "normal variance must be positive, got {variance}"
                    )));
                }
            }
            MarginalSpec::Gamma { shape, scale, .. } => {
                if !(scale > 0.0 && scale.is_finite()) {
                    return Err(Error::InvalidParameter(format!(
                        "gamma scale must be positive, got {scale}"
                    )));
                }
                // shape < 1 has an unbounded, non-log-concave density
                if !(shape >= 1.0 && shape.is_finite()) {
                    return Err(Error::InvalidParameter(format!(
                        "gamma shape must be >= 1 for log-concavity, got {shape}"
                    )));
                }
            }
        }
        Ok(())
    }

    fn shift(&self) -> f64 {
        match *self {
            MarginalSpec::Gamma {
                shape,
                scale,
                centered: true,
            } => shape * scale,
            _ => 0.0,
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            MarginalSpec::Normal { .. } => 0.0,
            MarginalSpec::Gamma { shape, scale, .. } => shape * scale - self.shift(),
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            MarginalSpec::Normal { variance } => variance,
            MarginalSpec::Gamma { shape, scale, .. } => shape * scale * scale,
        }
    }

    pub fn log_pdf(&self, z: f64) -> f64 {
        match *self {
            MarginalSpec::Normal { variance } => {
                -0.5 * (std::f64::consts::TAU * variance).ln() - 0.5 * z * z / variance
            }
            MarginalSpec::Gamma { shape, scale, .. } => {
                let t = z + self.shift();
                if t < 0.0 {
                    return f64::NEG_INFINITY;
                }
                if t == 0.0 {
                    return if shape == 1.0 {
                        -scale.ln()
                    } else {
                        f64::NEG_INFINITY
                    };
                }
                (shape - 1.0) * t.ln() - t / scale - ln_gamma(shape) - shape * scale.ln()
            }
        }
    }

    pub fn cdf(&self, z: f64) -> f64 {
        match *self {
            MarginalSpec::Normal { variance } => {
                Normal::new(0.0, variance.sqrt()).expect("validated").cdf(z)
            }
            MarginalSpec::Gamma { shape, scale, .. } => {
                let t = z + self.shift();
                if t <= 0.0 {
                    0.0
                } else {
                    GammaDist::new(shape, 1.0 / scale).expect("validated").cdf(t)
                }
            }
        }
    }

    pub fn sample(&self, rng: &mut RngState) -> f64 {
        match *self {
            MarginalSpec::Normal { variance } => variance.sqrt() * rng.normal(),
            MarginalSpec::Gamma { shape, scale, .. } => scale * rng.gamma(shape) - self.shift(),
        }
    }
}

/// `p(x) = ∏ f_i(w_i · (x − mean))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthModel {
    pub mean: Vec<f64>,
    #[serde(rename = "W")]
    pub frame: OrthonormalFrame,
    pub marginals: Vec<MarginalSpec>,
}

impl GroundTruthModel {
    pub fn new(mean: Vec<f64>, frame: OrthonormalFrame, marginals: Vec<MarginalSpec>) -> Result<Self> {
        let d = frame.dim();
        if d == 0 {
            return Err(Error::EmptyInput);
        }
        for len in [mean.len(), marginals.len()] {
            if len != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: len,
                });
            }
        }
        for m in &marginals {
            m.validate()?;
        }
        if mean.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self {
            mean,
            frame,
            marginals,
        })
    }

    /// Centered Gaussian with `Σ_Z = Diag(variances)` mixed by `frame`.
    pub fn gaussian(variances: &[f64], frame: OrthonormalFrame) -> Result<Self> {
        let marginals = variances
            .iter()
            .map(|&v| MarginalSpec::normal(v))
            .collect::<Result<Vec<_>>>()?;
        Self::new(vec![0.0; variances.len()], frame, marginals)
    }

    pub fn validate(&self) -> Result<()> {
        Self::new(self.mean.clone(), self.frame.clone(), self.marginals.clone()).map(|_| ())
    }

    pub fn dim(&self) -> usize {
        self.frame.dim()
    }

    /// Covariance `Wᵀ Diag(var_i) W` of `X`.
    pub fn covariance(&self) -> Array2<f64> {
        let w = self.frame.matrix();
        let d = self.dim();
        let mut c = Array2::zeros((d, d));
        for i in 0..d {
            let v = self.marginals[i].variance();
            for a in 0..d {
                for b in 0..d {
                    c[[a, b]] += v * w[[i, a]] * w[[i, b]];
                }
            }
        }
        c
    }

    /// `E[X]` including any uncentered Gamma offsets.
    pub fn expectation(&self) -> Vec<f64> {
        let z: Vec<f64> = self.marginals.iter().map(|m| m.mean()).collect();
        let shift = self.frame.unproject(&z);
        self.mean.iter().zip(shift).map(|(a, b)| a + b).collect()
    }
}

/// Draws `z_i` from each marginal and returns rows `x = Wᵀ z + mean`.
pub fn sample_ground_truth(model: &GroundTruthModel, n: usize, rng: &mut RngState) -> SampleMatrix {
    let d = model.dim();
    let mut out = Array2::zeros((n, d));
    let mut z = vec![0.0; d];
    for mut row in out.rows_mut() {
        for (zi, m) in z.iter_mut().zip(&model.marginals) {
            *zi = m.sample(rng);
        }
        let x = model.frame.unproject(&z);
        for j in 0..d {
            row[j] = x[j] + model.mean[j];
        }
    }
    out
}

/// `Σ_i log f_i(w_i · (x − mean))`.
pub fn eval_ground_truth_logdensity(model: &GroundTruthModel, x: &[f64]) -> f64 {
    let centered: Vec<f64> = x.iter().zip(&model.mean).map(|(a, b)| a - b).collect();
    let z = model.frame.project(&centered);
    let mut total = 0.0;
    for (zi, m) in z.iter().zip(&model.marginals) {
        let l = m.log_pdf(*zi);
        if l == f64::NEG_INFINITY {
            return l;
        }
        total += l;
    }
    total
}

impl Density for GroundTruthModel {
    fn dim(&self) -> usize {
        GroundTruthModel::dim(self)
    }
    fn log_density(&self, x: &[f64]) -> f64 {
        eval_ground_truth_logdensity(self, x)
    }
}

impl Sampler for GroundTruthModel {
    fn sample(&self, n: usize, rng: &mut RngState) -> SampleMatrix {
        sample_ground_truth(self, n, rng)
    }
}
