//! Univariate log-concave maximum likelihood.
//!
//! The MLE's log-density is concave and piecewise linear with kinks only at
//! data points, `−∞` outside `[min x, max x]`. It maximizes the
//! self-normalizing objective `Σ_j w_j φ(x_j) − ∫ exp φ`, whose maximizer
//! integrates to one.

pub mod special;
mod solver;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::RngState;

pub use solver::{fit_logconcave_1d, fit_logconcave_1d_traced, FitReport};

/// Distinct sorted values with positive weights summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedPoints {
    values: Vec<f64>,
    weights: Vec<f64>,
}

impl WeightedPoints {
    /// Equal weights; ties collapse into one point with summed weight.
    pub fn from_samples(samples: &[f64]) -> Result<Self> {
        let w = vec![1.0; samples.len()];
        Self::from_weighted(samples, &w)
    }

    /// Sorts, drops zero-weight entries, merges ties and normalizes.
    pub fn from_weighted(values: &[f64], weights: &[f64]) -> Result<Self> {
        if values.len() != weights.len() {
            return Err(Error::DimensionMismatch {
                expected: values.len(),
                found: weights.len(),
            });
        }
        if values.iter().chain(weights).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        if weights.iter().any(|&w| w < 0.0) {
            return Err(Error::InvalidParameter("negative weight".into()));
        }
        let mut pairs: Vec<(f64, f64)> = values
            .iter()
            .zip(weights)
            .filter(|(_, &w)| w > 0.0)
            .map(|(&v, &w)| (v, w))
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut vs: Vec<f64> = Vec::with_capacity(pairs.len());
        let mut ws: Vec<f64> = Vec::with_capacity(pairs.len());
        for (v, w) in pairs {
            match vs.last() {
                // -0.0 and 0.0 are the same point
                Some(&last) if last == v => *ws.last_mut().unwrap() += w,
                _ => {
                    vs.push(v);
                    ws.push(w);
                }
            }
        }
        if vs.len() < 2 {
            return Err(Error::TooFewDistinct { distinct: vs.len() });
        }
        let total: f64 = ws.iter().sum();
        ws.iter_mut().for_each(|w| *w /= total);
        Ok(Self {
            values: vs,
            weights: ws,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RawLogConcave {
    knots: Vec<f64>,
    phi: Vec<f64>,
}

/// Concave piecewise-linear log-density on `[knots[0], knots[m-1]]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawLogConcave", into = "RawLogConcave")]
pub struct LogConcave1D {
    knots: Vec<f64>,
    phi: Vec<f64>,
    /// `cum[j]` = mass on `[knots[0], knots[j]]`.
    cum: Vec<f64>,
}

impl TryFrom<RawLogConcave> for LogConcave1D {
    type Error = Error;
    fn try_from(raw: RawLogConcave) -> Result<Self> {
        Self::new(raw.knots, raw.phi)
    }
}

impl From<LogConcave1D> for RawLogConcave {
    fn from(m: LogConcave1D) -> Self {
        RawLogConcave {
            knots: m.knots,
            phi: m.phi,
        }
    }
}

/// Relative slack allowed on the slope sequence when validating concavity.
const CONCAVITY_TOL: f64 = 1e-9;
const NORMALIZATION_TOL: f64 = 1e-8;

impl LogConcave1D {
    /// Validates knots/values: `m >= 2`, strictly increasing knots, finite
    /// values, nonincreasing slopes and unit integral.
    pub fn new(knots: Vec<f64>, phi: Vec<f64>) -> Result<Self> {
        let m = Self::new_unnormalized(knots, phi)?;
        let total = m.total_mass();
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::InvalidParameter(format!(
                "log-density integrates to {total}, not 1"
            )));
        }
        Ok(m)
    }

    pub(crate) fn new_unnormalized(knots: Vec<f64>, phi: Vec<f64>) -> Result<Self> {
        if knots.len() != phi.len() {
            return Err(Error::DimensionMismatch {
                expected: knots.len(),
                found: phi.len(),
            });
        }
        if knots.len() < 2 {
            return Err(Error::TooFewDistinct {
                distinct: knots.len(),
            });
        }
        if knots.iter().chain(&phi).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        if knots.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter("knots must be strictly increasing".into()));
        }
        let m = Self::build(knots, phi);
        let slopes = m.slopes();
        for w in slopes.windows(2) {
            let scale = 1.0 + w[0].abs().max(w[1].abs());
            if w[1] - w[0] > CONCAVITY_TOL * scale {
                return Err(Error::InvalidParameter("log-density is not concave".into()));
            }
        }
        Ok(m)
    }

    fn build(knots: Vec<f64>, phi: Vec<f64>) -> Self {
        let mut cum = Vec::with_capacity(knots.len());
        cum.push(0.0);
        for i in 0..knots.len() - 1 {
            let seg = (knots[i + 1] - knots[i]) * special::j(phi[i], phi[i + 1]);
            cum.push(cum[i] + seg);
        }
        Self { knots, phi, cum }
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn phi(&self) -> &[f64] {
        &self.phi
    }

    pub fn support(&self) -> (f64, f64) {
        (self.knots[0], *self.knots.last().unwrap())
    }

    pub fn slopes(&self) -> Vec<f64> {
        self.knots
            .windows(2)
            .zip(self.phi.windows(2))
            .map(|(k, p)| (p[1] - p[0]) / (k[1] - k[0]))
            .collect()
    }

    /// `∫ exp φ` by closed-form segment integrals.
    pub fn total_mass(&self) -> f64 {
        *self.cum.last().unwrap()
    }

    /// Linear interpolation of `phi` inside the support, `−∞` outside.
    pub fn log_density(&self, z: f64) -> f64 {
        let (lo, hi) = self.support();
        if !(z >= lo && z <= hi) {
            return f64::NEG_INFINITY;
        }
        match self.knots.binary_search_by(|k| k.partial_cmp(&z).expect("finite")) {
            Ok(j) => self.phi[j],
            Err(j) => {
                let (a, b) = (self.knots[j - 1], self.knots[j]);
                let t = (z - a) / (b - a);
                self.phi[j - 1] + t * (self.phi[j] - self.phi[j - 1])
            }
        }
    }

    pub fn cdf(&self, z: f64) -> f64 {
        let (lo, hi) = self.support();
        if z <= lo {
            return 0.0;
        }
        if z >= hi {
            return 1.0;
        }
        let j = self.knots.partition_point(|&k| k <= z) - 1;
        let a = self.knots[j];
        let partial = (z - a) * special::j(self.phi[j], self.log_density(z));
        ((self.cum[j] + partial) / self.total_mass()).clamp(0.0, 1.0)
    }

    /// Inverse-CDF sampling: pick a segment from the mass table, then invert
    /// the segment's truncated-exponential CDF in closed form.
    pub fn sample(&self, n: usize, rng: &mut RngState) -> Vec<f64> {
        (0..n).map(|_| self.sample_one(rng)).collect()
    }

    pub fn sample_one(&self, rng: &mut RngState) -> f64 {
        let target = rng.uniform() * self.total_mass();
        let mut j = self.cum.partition_point(|&c| c <= target);
        j = j.clamp(1, self.knots.len() - 1) - 1;
        let seg_mass = self.cum[j + 1] - self.cum[j];
        let q = if seg_mass > 0.0 {
            ((target - self.cum[j]) / seg_mass).clamp(0.0, 1.0)
        } else {
            rng.uniform()
        };
        let (a, b) = (self.knots[j], self.knots[j + 1]);
        let delta = self.phi[j + 1] - self.phi[j];
        let t = truncated_exp_quantile(delta, q);
        (a + t * (b - a)).clamp(a, b)
    }

    /// `Σ_j w_j φ(x_j) − ∫ exp φ`.
    pub fn objective(&self, data: &WeightedPoints) -> f64 {
        let ll: f64 = data
            .values
            .iter()
            .zip(&data.weights)
            .map(|(&x, &w)| w * self.log_density(x))
            .sum();
        ll - self.total_mass()
    }

    pub fn weighted_log_likelihood(&self, data: &WeightedPoints) -> f64 {
        data.values
            .iter()
            .zip(&data.weights)
            .map(|(&x, &w)| w * self.log_density(x))
            .sum()
    }

    /// Density of `a·Z + b` when `Z` has this density.
    pub fn affine_image(&self, a: f64, b: f64) -> Result<Self> {
        if a == 0.0 || !a.is_finite() || !b.is_finite() {
            return Err(Error::InvalidParameter("affine map must be invertible".into()));
        }
        let shift = a.abs().ln();
        let mut pts: Vec<(f64, f64)> = self
            .knots
            .iter()
            .zip(&self.phi)
            .map(|(&k, &p)| (a * k + b, p - shift))
            .collect();
        if a < 0.0 {
            pts.reverse();
        }
        let (k, p) = pts.into_iter().unzip();
        Self::new(k, p)
    }
}

/// Quantile `t ∈ [0, 1]` of the density `∝ e^{δ t}` on `[0, 1]` at level `q`.
fn truncated_exp_quantile(delta: f64, q: f64) -> f64 {
    let t = if delta.abs() < 1e-12 {
        q
    } else if delta < 0.0 {
        (q * delta.exp_m1()).ln_1p() / delta
    } else {
        1.0 - ((1.0 - q) * (-delta).exp_m1()).ln_1p() / (-delta)
    };
    t.clamp(0.0, 1.0)
}

/// `log_density` as a free function.
pub fn log_density_1d(model: &LogConcave1D, z: f64) -> f64 {
    model.log_density(z)
}

pub fn cdf_1d(model: &LogConcave1D, z: f64) -> f64 {
    model.cdf(z)
}

pub fn sample_1d(model: &LogConcave1D, n: usize, rng: &mut RngState) -> Vec<f64> {
    model.sample(n, rng)
}
