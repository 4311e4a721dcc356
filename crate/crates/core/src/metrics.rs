//! Monte-Carlo divergences, closed-form Gaussian references and the stability
//! bounds relating rotation error to density error.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::density::{Density, SampleMatrix, Sampler};
use crate::error::{Error, Result};
use crate::linalg::{cholesky, inverse_spd, log_det_spd, operator_norm, OrthonormalFrame, SymMatrix};
use crate::par;
use crate::rng::RngState;
use crate::sim::haar_orthogonal;

pub const DEFAULT_MC_SAMPLES: usize = 10_000;
pub const DEFAULT_MC_REPEATS: usize = 50;
pub const MIN_MC_SAMPLES: usize = 100;

/// Mean over independent repeats with the standard error of that mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub value: f64,
    pub std_error: f64,
    #[serde(rename = "K")]
    pub samples_per_repeat: usize,
    pub repeats: usize,
}

impl McEstimate {
    /// Spread is acceptable when the standard error is at most 10% of the
    /// value or 0.002, whichever is larger.
    pub fn spread_ok(&self) -> bool {
        self.std_error <= (0.1 * self.value.abs()).max(0.002)
    }
}

/// Runs `repeats` independent averages of `term(log p, log q)` over `k` draws
/// from `p`. Repeats use split streams and are combined in index order.
fn mc_average<P, Q, S, T>(log_p: &P, log_q: &Q, sampler: &S, k: usize, repeats: usize, rng: &mut RngState, term: T) -> Result<McEstimate>
where
    P: Density + ?Sized,
    Q: Density + ?Sized,
    S: Sampler + ?Sized,
    T: Fn(f64, f64) -> f64 + Sync,
{
    if k < MIN_MC_SAMPLES {
        return Err(Error::InvalidParameter(format!("K = {k} is below {MIN_MC_SAMPLES}")));
    }
    if repeats == 0 {
        return Err(Error::InvalidParameter("at least one repeat required".into()));
    }
    if log_p.dim() != log_q.dim() {
        return Err(Error::DimensionMismatch {
            expected: log_p.dim(),
            found: log_q.dim(),
        });
    }
    let streams = rng.split(repeats);
    let means = par::map_range(repeats, |r| -> Result<f64> {
        let mut stream = streams[r].clone();
        let xs = sampler.sample(k, &mut stream);
        let xs = xs.as_standard_layout();
        let mut acc = 0.0;
        for x in xs.rows() {
            let x = x.as_slice().expect("standard layout");
            let lp = log_p.log_density(x);
            if lp == f64::NEG_INFINITY {
                return Err(Error::SamplerOutsideSupport);
            }
            acc += term(lp, log_q.log_density(x));
        }
        Ok(acc / k as f64)
    })
    .into_iter()
    .collect::<Result<Vec<f64>>>()?;

    let value = means.iter().sum::<f64>() / repeats as f64;
    let std_error = if repeats > 1 {
        let var = means.iter().map(|m| (m - value).powi(2)).sum::<f64>() / (repeats - 1) as f64;
        (var / repeats as f64).sqrt()
    } else {
        0.0
    };
    Ok(McEstimate {
        value,
        std_error,
        samples_per_repeat: k,
        repeats,
    })
}

/// `h²(p, q) ≈ (1/K) Σ ½(√(q/p)(S_k) − 1)²` with `S_k ~ p`, averaged over
/// repeats. Points where `q` vanishes contribute ½.
pub fn hellinger_sq_mc<P, Q, S>(log_p: &P, log_q: &Q, p_sampler: &S, k: usize, repeats: usize, rng: &mut RngState) -> Result<McEstimate>
where
    P: Density + ?Sized,
    Q: Density + ?Sized,
    S: Sampler + ?Sized,
{
    mc_average(log_p, log_q, p_sampler, k, repeats, rng, |lp, lq| {
        if lq == f64::NEG_INFINITY {
            0.5
        } else {
            0.5 * ((0.5 * (lq - lp)).exp() - 1.0).powi(2)
        }
    })
}

/// `E_p (1 − q/p)₊ = ∫ (p − q)₊`, which equals the total variation for
/// normalized densities, including mass of `q` outside the support of `p`.
pub fn tv_mc<P, Q, S>(log_p: &P, log_q: &Q, p_sampler: &S, k: usize, repeats: usize, rng: &mut RngState) -> Result<McEstimate>
where
    P: Density + ?Sized,
    Q: Density + ?Sized,
    S: Sampler + ?Sized,
{
    mc_average(log_p, log_q, p_sampler, k, repeats, rng, |lp, lq| {
        if lq == f64::NEG_INFINITY {
            1.0
        } else {
            (1.0 - (lq - lp).exp()).max(0.0)
        }
    })
}

/// Multivariate normal with a cached Cholesky factor.
#[derive(Debug, Clone, PartialEq)]
pub struct Gaussian {
    mean: Array1<f64>,
    cov: SymMatrix,
    chol: Array2<f64>,
    log_norm: f64,
}

impl Gaussian {
    pub fn new(mean: Vec<f64>, cov: SymMatrix) -> Result<Self> {
        if mean.len() != cov.dim() {
            return Err(Error::DimensionMismatch {
                expected: cov.dim(),
                found: mean.len(),
            });
        }
        let chol = cholesky(&cov)?;
        let d = mean.len() as f64;
        let log_det = 2.0 * chol.diag().iter().map(|v| v.ln()).sum::<f64>();
        let log_norm = -0.5 * (d * (2.0 * std::f64::consts::PI).ln() + log_det);
        Ok(Self {
            mean: Array1::from(mean),
            cov,
            chol,
            log_norm,
        })
    }

    /// `N(0, Σ)` for the covariance `Σ`.
    pub fn centered(cov: SymMatrix) -> Result<Self> {
        Self::new(vec![0.0; cov.dim()], cov)
    }

    pub fn mean(&self) -> &Array1<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &SymMatrix {
        &self.cov
    }
}

impl Density for Gaussian {
    fn dim(&self) -> usize {
        self.mean.len()
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        // forward substitution for L y = x − m
        let d = self.mean.len();
        let mut y = vec![0.0; d];
        let mut quad = 0.0;
        for i in 0..d {
            let mut s = x[i] - self.mean[i];
            for k in 0..i {
                s -= self.chol[[i, k]] * y[k];
            }
            y[i] = s / self.chol[[i, i]];
            quad += y[i] * y[i];
        }
        self.log_norm - 0.5 * quad
    }
}

impl Sampler for Gaussian {
    fn sample(&self, n: usize, rng: &mut RngState) -> SampleMatrix {
        let d = self.mean.len();
        let mut out = Array2::zeros((n, d));
        let mut eps = vec![0.0; d];
        for mut row in out.rows_mut() {
            eps.iter_mut().for_each(|e| *e = rng.normal());
            for i in 0..d {
                let mut v = self.mean[i];
                for k in 0..=i {
                    v += self.chol[[i, k]] * eps[k];
                }
                row[i] = v;
            }
        }
        out
    }
}

/// Closed-form squared Hellinger distance between two normals.
pub fn gaussian_hellinger_sq(mean1: &[f64], cov1: &SymMatrix, mean2: &[f64], cov2: &SymMatrix) -> Result<f64> {
    let d = cov1.dim();
    for found in [cov2.dim(), mean1.len(), mean2.len()] {
        if found != d {
            return Err(Error::DimensionMismatch { expected: d, found });
        }
    }
    let avg = SymMatrix::symmetrize(&((cov1.matrix() + cov2.matrix()) * 0.5))?;
    let log_coef = 0.25 * log_det_spd(cov1)? + 0.25 * log_det_spd(cov2)? - 0.5 * log_det_spd(&avg)?;
    let inv = inverse_spd(&avg)?;
    let delta = Array1::from_iter(mean1.iter().zip(mean2).map(|(a, b)| a - b));
    let maha = delta.dot(&inv.matrix().dot(&delta));
    Ok(1.0 - (log_coef - maha / 8.0).exp())
}

/// Product-density squared Hellinger `1 − ∏(1 − h_i²)` and the cruder bound
/// `d · max h_i²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tensorized {
    pub value: f64,
    pub bound: f64,
}

pub fn tensorized_hellinger(h1_sq: &[f64]) -> Result<Tensorized> {
    if h1_sq.iter().any(|h| !(0.0..=1.0).contains(h)) {
        return Err(Error::InvalidParameter("squared Hellinger values must lie in [0, 1]".into()));
    }
    let prod: f64 = h1_sq.iter().map(|h| 1.0 - h).product();
    let max = h1_sq.iter().cloned().fold(0.0, f64::max);
    Ok(Tensorized {
        value: 1.0 - prod,
        bound: h1_sq.len() as f64 * max,
    })
}

/// `KL(N(0, Σ) ‖ N(0, RᵀΣR)) = ½(tr(RᵀΣ⁻¹RΣ) − d)`.
pub fn gaussian_rotation_kl(cov: &SymMatrix, r: &OrthonormalFrame) -> Result<f64> {
    let d = cov.dim();
    if r.dim() != d {
        return Err(Error::DimensionMismatch { expected: d, found: r.dim() });
    }
    let inv = inverse_spd(cov)?;
    let rm = r.matrix();
    let prod = rm.t().dot(inv.matrix()).dot(rm).dot(cov.matrix());
    Ok(0.5 * (prod.diag().sum() - d as f64))
}

/// Inputs of the KL stability bound for a Hölder-smooth log-density.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KlBoundParams {
    /// Hölder seminorm `[∇φ]_α`.
    pub holder_const: f64,
    pub alpha: f64,
    pub d: usize,
    /// `‖Σ‖_op`
    pub sigma_op: f64,
    /// `‖I − R‖_op`
    pub rot_dev: f64,
}

impl KlBoundParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::InvalidParameter(format!("alpha = {} not in (0, 1]", self.alpha)));
        }
        if [self.holder_const, self.sigma_op, self.rot_dev].iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::InvalidParameter("bound parameters must be nonnegative".into()));
        }
        Ok(())
    }
}

/// `[∇φ]_α d^{(1+α)/2} ‖Σ‖^{(1+α)/2} ‖I−R‖^{1+α}`.
pub fn kl_stability_bound(p: &KlBoundParams) -> Result<f64> {
    p.validate()?;
    let e = 0.5 * (1.0 + p.alpha);
    Ok(p.holder_const * (p.d as f64).powf(e) * p.sigma_op.powf(e) * p.rot_dev.powf(1.0 + p.alpha))
}

/// Inputs of the total-variation stability bound for a density with an
/// integrable gradient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TvBoundParams {
    /// `‖∇p‖_{L¹}`
    pub grad_l1: f64,
    /// Bound on `‖A⁻¹‖_op`; 1 for orthogonal maps.
    #[serde(rename = "B")]
    pub b: f64,
    pub d: usize,
    pub sigma_op: f64,
    /// `‖I − A‖_op`
    pub map_dev: f64,
}

impl TvBoundParams {
    pub fn validate(&self) -> Result<()> {
        if [self.grad_l1, self.b, self.sigma_op, self.map_dev].iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::InvalidParameter("bound parameters must be nonnegative".into()));
        }
        Ok(())
    }
}

/// `½[(1+B)‖∇p‖_{L¹}√d + d] ‖Σ‖^{1/4} ‖I−A‖^{1/2}`.
pub fn tv_stability_bound(p: &TvBoundParams) -> Result<f64> {
    p.validate()?;
    let d = p.d as f64;
    Ok(0.5 * ((1.0 + p.b) * p.grad_l1 * d.sqrt() + d) * p.sigma_op.powf(0.25) * p.map_dev.sqrt())
}

/// Rotation by `angle` in a Haar-random plane.
pub fn random_plane_rotation(d: usize, angle: f64, rng: &mut RngState) -> OrthonormalFrame {
    let q = haar_orthogonal(d, rng);
    let (u, v) = (q.row(0).to_owned(), q.row(1).to_owned());
    let uu = outer(&u, &u);
    let vv = outer(&v, &v);
    let vu = outer(&v, &u);
    let uv = outer(&u, &v);
    let r = Array2::eye(d) + (uu + vv) * (angle.cos() - 1.0) + (vu - uv) * angle.sin();
    OrthonormalFrame::new(r).expect("plane rotation is orthogonal")
}

fn outer(a: &Array1<f64>, b: &Array1<f64>) -> Array2<f64> {
    Array2::from_shape_fn((a.len(), b.len()), |(i, j)| a[i] * b[j])
}

/// A random centered Gaussian and a small rotation, as used by the
/// bound-domination checks.
#[derive(Debug, Clone)]
pub struct StabilityInstance {
    pub cov: SymMatrix,
    pub rotation: OrthonormalFrame,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub rot_dev: f64,
}

/// Dimension in 2..=5, Haar eigenbasis, spectrum in `[1, 10]` (condition
/// number at most 10), rotation angle in `(0, 0.3]`.
pub fn random_stability_instance(rng: &mut RngState) -> Result<StabilityInstance> {
    let d = 2 + rng.below(4);
    let mut lambdas: Vec<f64> = (0..d).map(|_| 1.0 + 9.0 * rng.uniform()).collect();
    lambdas.sort_by(|a, b| b.total_cmp(a));
    let basis = haar_orthogonal(d, rng);
    let cov = SymMatrix::from_diag(&lambdas).conjugate_by(&basis);
    let angle = 0.3 * rng.uniform();
    let rotation = random_plane_rotation(d, angle, rng);
    let rot_dev = operator_norm(&(Array2::eye(d) - rotation.matrix()))?;
    Ok(StabilityInstance {
        cov,
        rotation,
        lambda_min: lambdas[d - 1],
        lambda_max: lambdas[0],
        rot_dev,
    })
}

impl StabilityInstance {
    pub fn dim(&self) -> usize {
        self.cov.dim()
    }

    /// Gaussian constants: `[∇φ]₁ = 1/λ_min`, `α = 1`.
    pub fn kl_params(&self) -> KlBoundParams {
        KlBoundParams {
            holder_const: 1.0 / self.lambda_min,
            alpha: 1.0,
            d: self.dim(),
            sigma_op: self.lambda_max,
            rot_dev: self.rot_dev,
        }
    }

    /// Gaussian constants: `‖∇p‖_{L¹} ≤ √(d/λ_min)`, `B = 1`.
    pub fn tv_params(&self) -> TvBoundParams {
        TvBoundParams {
            grad_l1: (self.dim() as f64 / self.lambda_min).sqrt(),
            b: 1.0,
            d: self.dim(),
            sigma_op: self.lambda_max,
            map_dev: self.rot_dev,
        }
    }

    /// Covariance `RᵀΣR` of `p ∘ R`.
    pub fn rotated_cov(&self) -> Result<SymMatrix> {
        let r = self.rotation.matrix();
        SymMatrix::symmetrize(&r.t().dot(self.cov.matrix()).dot(r))
    }
}

/// Outcome of a bound-domination suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub name: String,
    pub instances: usize,
    pub violations: usize,
    /// Largest observed (divergence / bound) ratio.
    pub worst_ratio: f64,
}

/// Closed-form KL against the KL stability bound on `instances` random cases.
pub fn kl_domination_suite(instances: usize, rng: &mut RngState) -> Result<SuiteReport> {
    let mut violations = 0;
    let mut worst: f64 = 0.0;
    for _ in 0..instances {
        let inst = random_stability_instance(rng)?;
        let kl = gaussian_rotation_kl(&inst.cov, &inst.rotation)?;
        let bound = kl_stability_bound(&inst.kl_params())?;
        if kl > bound {
            violations += 1;
        }
        if bound > 0.0 {
            worst = worst.max(kl / bound);
        }
    }
    Ok(SuiteReport {
        name: "kl".into(),
        instances,
        violations,
        worst_ratio: worst,
    })
}

/// Monte-Carlo TV (minus four standard errors) against the TV stability bound.
pub fn tv_domination_suite(instances: usize, k: usize, repeats: usize, rng: &mut RngState) -> Result<SuiteReport> {
    let mut violations = 0;
    let mut worst: f64 = 0.0;
    for _ in 0..instances {
        let inst = random_stability_instance(rng)?;
        let p = Gaussian::centered(inst.cov.clone())?;
        let q = Gaussian::centered(inst.rotated_cov()?)?;
        let tv = tv_mc(&p, &q, &p, k, repeats, rng)?;
        let bound = tv_stability_bound(&inst.tv_params())?;
        let low = tv.value - 4.0 * tv.std_error;
        if low > bound {
            violations += 1;
        }
        if bound > 0.0 {
            worst = worst.max(low / bound);
        }
    }
    Ok(SuiteReport {
        name: "tv".into(),
        instances,
        violations,
        worst_ratio: worst,
    })
}
