//! Mixtures of LC-IC densities fitted by EM. The weighted M-step is replaced
//! by re-sampling: each component is refitted on i.i.d. draws from the
//! responsibility-weighted empirical distribution.

use ndarray::Array2;
use rand_distr::{weighted::WeightedAliasIndex, Distribution};
use serde::{Deserialize, Serialize};

use crate::assignment::min_cost_assignment;
use crate::density::{Density, SampleMatrix};
use crate::error::{Error, Result};
use crate::estimator::{fit_lcic, Method, ProductEstimate};
use crate::par;
use crate::rng::RngState;

/// Lower bound applied to responsibilities before row renormalization.
pub const RESPONSIBILITY_FLOOR: f64 = 1e-7;
const WEIGHT_SUM_TOL: f64 = 1e-12;

/// `p(x) = Σ_k π_k p_k(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureModel {
    pub weights: Vec<f64>,
    pub components: Vec<ProductEstimate>,
}

impl MixtureModel {
    pub fn new(weights: Vec<f64>, components: Vec<ProductEstimate>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::EmptyInput);
        }
        if weights.len() != components.len() {
            return Err(Error::DimensionMismatch {
                expected: weights.len(),
                found: components.len(),
            });
        }
        if weights.iter().any(|w| !(*w >= 0.0)) || (weights.iter().sum::<f64>() - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::InvalidParameter("mixture weights must be a probability vector".into()));
        }
        let d = components[0].dim();
        for c in &components {
            c.validate()?;
            if c.dim() != d {
                return Err(Error::DimensionMismatch { expected: d, found: c.dim() });
            }
        }
        Ok(Self { weights, components })
    }

    pub fn k(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.components[0].dim()
    }

    /// `log Σ_k π_k p_k(x)`.
    pub fn log_density(&self, x: &[f64]) -> f64 {
        log_sum_exp(&self.weighted_logs(x))
    }

    fn weighted_logs(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.components)
            .map(|(w, c)| w.ln() + c.log_density(x))
            .collect()
    }

    /// `Σ_j log p(x_j)`.
    pub fn log_likelihood(&self, samples: &SampleMatrix) -> f64 {
        samples.rows().into_iter().map(|r| self.log_density(&r.to_vec())).sum()
    }
}

impl Density for MixtureModel {
    fn dim(&self) -> usize {
        MixtureModel::dim(self)
    }
    fn log_density(&self, x: &[f64]) -> f64 {
        MixtureModel::log_density(self, x)
    }
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + v.iter().map(|l| (l - max).exp()).sum::<f64>().ln()
}

/// Posterior membership probabilities, one row per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Responsibilities {
    pub theta: Array2<f64>,
    /// Rows whose sample lies outside every component's support; these get
    /// the uniform row `1/K`.
    pub outside: Vec<usize>,
}

/// Floors each entry at `RESPONSIBILITY_FLOOR` and renormalizes the row.
fn floor_row(row: &mut [f64]) {
    row.iter_mut().for_each(|t| *t = t.max(RESPONSIBILITY_FLOOR));
    let s: f64 = row.iter().sum();
    row.iter_mut().for_each(|t| *t /= s);
}

pub fn posterior(model: &MixtureModel, samples: &SampleMatrix) -> Result<Responsibilities> {
    if samples.ncols() != model.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.dim(),
            found: samples.ncols(),
        });
    }
    let k = model.k();
    let samples = samples.as_standard_layout();
    let rows: Vec<Option<Vec<f64>>> = par::map_range(samples.nrows(), |j| {
        let logs = model.weighted_logs(samples.row(j).as_slice().expect("standard layout"));
        let total = log_sum_exp(&logs);
        if total == f64::NEG_INFINITY {
            return None;
        }
        let mut row: Vec<f64> = logs.iter().map(|l| (l - total).exp()).collect();
        floor_row(&mut row);
        Some(row)
    });
    let mut theta = Array2::zeros((samples.nrows(), k));
    let mut outside = Vec::new();
    for (j, row) in rows.into_iter().enumerate() {
        match row {
            Some(r) => theta.row_mut(j).assign(&ndarray::Array1::from(r)),
            None => {
                theta.row_mut(j).fill(1.0 / k as f64);
                outside.push(j);
            }
        }
    }
    Ok(Responsibilities { theta, outside })
}

#[derive(Debug, Clone, PartialEq)]
pub enum EmInit {
    /// Responsibility rows drawn from a flat Dirichlet.
    Random,
    /// Hard labels in `0..K`.
    Labels(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmOptions {
    pub k: usize,
    pub iters: usize,
    /// Each component is refitted on `resample_factor · n` draws for the
    /// unmixing part and as many for the marginal part.
    pub resample_factor: usize,
    pub init: EmInit,
    pub method: Method,
}

impl Default for EmOptions {
    fn default() -> Self {
        Self {
            k: 2,
            iters: 20,
            resample_factor: 4,
            init: EmInit::Random,
            method: Method::Pca,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EmFit {
    pub model: MixtureModel,
    /// Log-likelihood of the data after each iteration.
    pub log_likelihood: Vec<f64>,
    pub responsibilities: Responsibilities,
}

fn initial_responsibilities(n: usize, opts: &EmOptions, rng: &mut RngState) -> Result<Array2<f64>> {
    let k = opts.k;
    let mut theta = Array2::zeros((n, k));
    match &opts.init {
        EmInit::Random => {
            for mut row in theta.rows_mut() {
                let mut r = rng.dirichlet_flat(k);
                floor_row(&mut r);
                row.assign(&ndarray::Array1::from(r));
            }
        }
        EmInit::Labels(labels) => {
            if labels.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: labels.len(),
                });
            }
            for (j, &l) in labels.iter().enumerate() {
                if l >= k {
                    return Err(Error::InvalidParameter(format!("label {l} out of range for K = {k}")));
                }
                let mut r = vec![0.0; k];
                r[l] = 1.0;
                floor_row(&mut r);
                theta.row_mut(j).assign(&ndarray::Array1::from(r));
            }
        }
    }
    Ok(theta)
}

/// Refits component `k` on draws from `Σ_j θ_jk δ_{x_j} / Σ_j θ_jk`.
fn refit_component(samples: &SampleMatrix, weights: Vec<f64>, component: usize, opts: &EmOptions, mut rng: RngState) -> Result<ProductEstimate> {
    let (n, d) = samples.dim();
    let alias = WeightedAliasIndex::new(weights)
        .map_err(|e| Error::InvalidParameter(format!("component {component} weights: {e}")))?;
    let draws = 2 * opts.resample_factor * n;
    let idx: Vec<usize> = (0..draws).map(|_| alias.sample(&mut rng)).collect();
    // distinct points, not indices: the data may contain repeated rows
    let mut seen = vec![false; n];
    let mut rows = std::collections::HashSet::new();
    for &i in &idx {
        if !seen[i] {
            seen[i] = true;
            rows.insert(samples.row(i).iter().map(|v| v.to_bits()).collect::<Vec<u64>>());
        }
    }
    let distinct = rows.len();
    if distinct < d + 2 {
        return Err(Error::ComponentCollapse { component, distinct });
    }
    let resampled = samples.select(ndarray::Axis(0), &idx);
    fit_lcic(&resampled, 0.5, opts.method, &mut rng)
}

pub fn em_fit(samples: &SampleMatrix, opts: &EmOptions, rng: &mut RngState) -> Result<EmFit> {
    let (n, d) = samples.dim();
    let k = opts.k;
    if k == 0 || opts.resample_factor == 0 {
        return Err(Error::InvalidParameter("K and resample_factor must be positive".into()));
    }
    if n < k * (d + 2) {
        return Err(Error::TooFewSamples {
            needed: k * (d + 2),
            got: n,
        });
    }
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    let samples = samples.as_standard_layout().into_owned();
    let mut theta = initial_responsibilities(n, opts, rng)?;
    let mut trace = Vec::with_capacity(opts.iters);
    let mut model: Option<MixtureModel> = None;
    let mut resp = None;
    for _ in 0..opts.iters {
        let streams = rng.split(k);
        let columns: Vec<Vec<f64>> = (0..k).map(|c| theta.column(c).to_vec()).collect();
        let components = par::map_vec(columns.into_iter().zip(streams).enumerate().collect(), |(c, (w, s))| {
            refit_component(&samples, w, c, opts, s)
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
        let mut weights: Vec<f64> = (0..k).map(|c| theta.column(c).sum() / n as f64).collect();
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        let m = MixtureModel::new(weights, components)?;
        trace.push(m.log_likelihood(&samples));
        let r = posterior(&m, &samples)?;
        theta = r.theta.clone();
        resp = Some(r);
        model = Some(m);
    }
    let model = model.ok_or_else(|| Error::InvalidParameter("at least one EM iteration required".into()))?;
    Ok(EmFit {
        model,
        log_likelihood: trace,
        responsibilities: resp.expect("set with model"),
    })
}

/// Row-wise argmax of the posterior; ties go to the lowest index.
pub fn assign_clusters(model: &MixtureModel, samples: &SampleMatrix) -> Result<Vec<usize>> {
    let r = posterior(model, samples)?;
    Ok(r.theta
        .rows()
        .into_iter()
        .map(|row| {
            let mut best = 0;
            for (c, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = c;
                }
            }
            best
        })
        .collect())
}

/// Largest fraction of agreement over bijections between the predicted and
/// true label sets.
pub fn clustering_accuracy(labels: &[usize], truth: &[usize]) -> Result<f64> {
    if labels.len() != truth.len() {
        return Err(Error::DimensionMismatch {
            expected: truth.len(),
            found: labels.len(),
        });
    }
    if labels.is_empty() {
        return Err(Error::EmptyInput);
    }
    let index = |xs: &[usize]| {
        let mut vals = xs.to_vec();
        vals.sort_unstable();
        vals.dedup();
        let idx: Vec<usize> = xs.iter().map(|x| vals.binary_search(x).expect("present")).collect();
        (idx, vals.len())
    };
    let (p, kp) = index(labels);
    let (t, kt) = index(truth);
    let k = kp.max(kt);
    let mut counts = vec![vec![0.0; k]; k];
    for (&a, &b) in p.iter().zip(&t) {
        counts[a][b] += 1.0;
    }
    let cost: Vec<Vec<f64>> = counts.iter().map(|r| r.iter().map(|c| -c).collect()).collect();
    let assign = min_cost_assignment(&cost);
    let agree: f64 = assign.iter().enumerate().map(|(a, &b)| counts[a][b]).sum();
    Ok(agree / labels.len() as f64)
}
