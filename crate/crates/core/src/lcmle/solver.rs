//! Active-set solver for the univariate log-concave MLE.
//!
//! The iterate is a concave function that is linear between "active" knots (a
//! subset of the data points containing both endpoints). For a fixed knot set
//! the objective is smooth and strictly concave in the knot values and is
//! maximized by damped Newton steps on a tridiagonal system. Knots are added
//! where the directional derivative toward a new kink is positive and removed
//! when a Newton step would make the function convex there.

use super::special::{self, terms};
use super::{LogConcave1D, WeightedPoints};
use crate::error::{Error, Result};

const MAX_OUTER: usize = 500;
const MAX_NEWTON: usize = 200;
const NEWTON_GRAD_TOL: f64 = 1e-12;
/// Knot insertion threshold on the kink directional derivative, relative to
/// the data range.
const KINK_GRAD_TOL: f64 = 1e-10;

/// Fit together with per-iteration objective values (nondecreasing).
#[derive(Debug, Clone)]
pub struct FitReport {
    pub model: LogConcave1D,
    pub objective_trace: Vec<f64>,
    pub outer_iterations: usize,
}

/// Maximum-likelihood log-concave density for weighted points.
pub fn fit_logconcave_1d(data: &WeightedPoints) -> Result<LogConcave1D> {
    fit_logconcave_1d_traced(data).map(|r| r.model)
}

pub fn fit_logconcave_1d_traced(data: &WeightedPoints) -> Result<FitReport> {
    let x = data.values();
    let w = data.weights();
    let m = x.len();
    if m < 2 {
        return Err(Error::TooFewDistinct { distinct: m });
    }
    let range = x[m - 1] - x[0];
    let mut state = ActiveSet {
        x,
        w,
        knots: vec![0, m - 1],
        theta: vec![-range.ln(); 2],
    };
    let mut trace = Vec::new();
    state.newton()?;
    trace.push(state.objective());

    let mut outer = 0;
    loop {
        let phi = state.phi_at_data();
        let Some((j, grad)) = state.best_new_knot(&phi) else {
            break;
        };
        if grad <= KINK_GRAD_TOL * range {
            break;
        }
        outer += 1;
        if outer > MAX_OUTER {
            return Err(Error::MleNoConvergence { iterations: MAX_OUTER });
        }
        state.insert_knot(j, phi[j]);
        loop {
            let before = state.theta.clone();
            let before_obj = state.objective();
            state.newton()?;
            if let Some((t, blocking)) = state.max_feasible_step(&before) {
                for (b, a) in before.iter().zip(state.theta.iter_mut()) {
                    *a = b + t * (*a - b);
                }
                state.remove_knots(blocking);
                let obj = state.objective();
                debug_assert!(obj >= before_obj - 1e-12 * (1.0 + before_obj.abs()));
                continue;
            }
            break;
        }
        let obj = state.objective();
        debug_assert!(
            obj >= trace.last().copied().unwrap_or(f64::NEG_INFINITY) - 1e-12 * (1.0 + obj.abs()),
            "objective decreased"
        );
        trace.push(obj);
    }

    let knots: Vec<f64> = state.knots.iter().map(|&k| x[k]).collect();
    let mut theta = state.theta;
    let raw = LogConcave1D::new_unnormalized(knots.clone(), theta.clone())?;
    let log_mass = raw.total_mass().ln();
    theta.iter_mut().for_each(|t| *t -= log_mass);
    let model = LogConcave1D::new(knots, theta)?;
    Ok(FitReport {
        model,
        objective_trace: trace,
        outer_iterations: outer,
    })
}

struct ActiveSet<'a> {
    x: &'a [f64],
    w: &'a [f64],
    /// Indices into `x`; strictly increasing, first 0, last m-1.
    knots: Vec<usize>,
    theta: Vec<f64>,
}

impl ActiveSet<'_> {
    fn seg_len(&self, a: usize) -> f64 {
        self.x[self.knots[a + 1]] - self.x[self.knots[a]]
    }

    /// Weight mass carried by each knot's hat function.
    fn knot_weights(&self) -> Vec<f64> {
        let p = self.knots.len();
        let mut out = vec![0.0; p];
        for a in 0..p - 1 {
            let (lo, hi) = (self.knots[a], self.knots[a + 1]);
            let (xl, len) = (self.x[lo], self.seg_len(a));
            out[a] += self.w[lo];
            for j in lo + 1..hi {
                let lam = (self.x[j] - xl) / len;
                out[a] += (1.0 - lam) * self.w[j];
                out[a + 1] += lam * self.w[j];
            }
        }
        out[p - 1] += self.w[*self.knots.last().unwrap()];
        out
    }

    fn objective_with(&self, kw: &[f64], theta: &[f64]) -> f64 {
        let lin: f64 = kw.iter().zip(theta).map(|(a, b)| a * b).sum();
        let integral: f64 = (0..theta.len() - 1)
            .map(|a| self.seg_len(a) * special::j(theta[a], theta[a + 1]))
            .sum();
        lin - integral
    }

    fn objective(&self) -> f64 {
        self.objective_with(&self.knot_weights(), &self.theta)
    }

    /// Maximizes over `theta` with the knot set fixed.
    fn newton(&mut self) -> Result<()> {
        let kw = self.knot_weights();
        let p = self.theta.len();
        let mut obj = self.objective_with(&kw, &self.theta);
        for _ in 0..MAX_NEWTON {
            // gradient and negated (positive definite) tridiagonal Hessian
            let mut g = kw.clone();
            let mut diag = vec![0.0; p];
            let mut off = vec![0.0; p - 1];
            for a in 0..p - 1 {
                let len = self.seg_len(a);
                let t = terms(self.theta[a], self.theta[a + 1]);
                g[a] -= len * t.dr;
                g[a + 1] -= len * t.ds;
                diag[a] += len * t.drr;
                diag[a + 1] += len * t.dss;
                off[a] = len * t.drs;
            }
            let gmax = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if gmax <= NEWTON_GRAD_TOL {
                return Ok(());
            }
            let step = solve_tridiagonal(&diag, &off, &g);
            let slope: f64 = g.iter().zip(&step).map(|(a, b)| a * b).sum();
            if !(slope > 0.0) || !step.iter().all(|v| v.is_finite()) {
                // Hessian solve lost accuracy; fall back to a gradient step
                return self.gradient_polish(&kw);
            }
            let mut t = 1.0;
            let mut accepted = false;
            for _ in 0..60 {
                let trial: Vec<f64> = self.theta.iter().zip(&step).map(|(a, b)| a + t * b).collect();
                let trial_obj = self.objective_with(&kw, &trial);
                if trial_obj >= obj + 1e-4 * t * slope {
                    self.theta = trial;
                    obj = trial_obj;
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            if !accepted {
                // at the floating-point resolution of the objective
                return Ok(());
            }
            if slope < 1e-26 {
                return Ok(());
            }
        }
        Ok(())
    }

    /// Damped projected-gradient fallback (no constraints are active within a
    /// knot set, so the projection is the identity).
    fn gradient_polish(&mut self, kw: &[f64]) -> Result<()> {
        let p = self.theta.len();
        let mut obj = self.objective_with(kw, &self.theta);
        let mut t = 1.0;
        for _ in 0..10_000 {
            let mut g = kw.to_vec();
            for a in 0..p - 1 {
                let len = self.seg_len(a);
                let tm = terms(self.theta[a], self.theta[a + 1]);
                g[a] -= len * tm.dr;
                g[a + 1] -= len * tm.ds;
            }
            let gg: f64 = g.iter().map(|v| v * v).sum();
            if gg.sqrt() <= NEWTON_GRAD_TOL {
                return Ok(());
            }
            let mut improved = false;
            for _ in 0..60 {
                let trial: Vec<f64> = self.theta.iter().zip(&g).map(|(a, b)| a + t * b).collect();
                let trial_obj = self.objective_with(kw, &trial);
                if trial_obj >= obj + 1e-4 * t * gg {
                    self.theta = trial;
                    obj = trial_obj;
                    improved = true;
                    t *= 2.0;
                    break;
                }
                t *= 0.5;
            }
            if !improved {
                return Ok(());
            }
        }
        Ok(())
    }

    /// Kink at interior knot `a`: slope change, `≤ 0` for concavity.
    fn kinks(&self, theta: &[f64]) -> Vec<f64> {
        let p = theta.len();
        (1..p - 1)
            .map(|a| {
                let s_left = (theta[a] - theta[a - 1]) / self.seg_len(a - 1);
                let s_right = (theta[a + 1] - theta[a]) / self.seg_len(a);
                s_right - s_left
            })
            .collect()
    }

    /// If `self.theta` violates concavity, the largest `t ∈ [0, 1)` keeping
    /// `before + t (theta − before)` concave, and the interior knots whose
    /// kink vanishes there.
    fn max_feasible_step(&self, before: &[f64]) -> Option<(f64, Vec<usize>)> {
        let new = self.kinks(&self.theta);
        if new.iter().all(|&c| c <= 0.0) {
            return None;
        }
        let old = self.kinks(before);
        let mut t_min = 1.0;
        for (&c0, &c1) in old.iter().zip(&new) {
            if c1 > 0.0 {
                let c0 = c0.min(0.0);
                let t = c0 / (c0 - c1);
                t_min = f64::min(t_min, t);
            }
        }
        let moved: Vec<f64> = before
            .iter()
            .zip(&self.theta)
            .map(|(b, a)| b + t_min * (a - b))
            .collect();
        let at = self.kinks(&moved);
        let mut blocking: Vec<usize> = Vec::new();
        for (i, (&c0, &c1)) in old.iter().zip(&new).enumerate() {
            if c1 > 0.0 {
                let c0 = c0.min(0.0);
                let t = c0 / (c0 - c1);
                if t <= t_min * (1.0 + 1e-12) || at[i] >= 0.0 {
                    blocking.push(i + 1);
                }
            } else if at[i] >= 0.0 {
                blocking.push(i + 1);
            }
        }
        Some((t_min, blocking))
    }

    fn remove_knots(&mut self, mut which: Vec<usize>) {
        which.sort_unstable();
        for &a in which.iter().rev() {
            self.knots.remove(a);
            self.theta.remove(a);
        }
    }

    fn insert_knot(&mut self, j: usize, value: f64) {
        let pos = self.knots.partition_point(|&k| k < j);
        self.knots.insert(pos, j);
        self.theta.insert(pos, value);
    }

    fn phi_at_data(&self) -> Vec<f64> {
        let m = self.x.len();
        let mut phi = vec![0.0; m];
        for a in 0..self.knots.len() - 1 {
            let (lo, hi) = (self.knots[a], self.knots[a + 1]);
            let (xl, len) = (self.x[lo], self.seg_len(a));
            let (tl, tr) = (self.theta[a], self.theta[a + 1]);
            phi[lo] = tl;
            for j in lo + 1..hi {
                let lam = (self.x[j] - xl) / len;
                phi[j] = tl + lam * (tr - tl);
            }
        }
        phi[m - 1] = *self.theta.last().unwrap();
        phi
    }

    /// Directional derivative of the objective along `−(x − x_j)_+` for each
    /// non-knot interior data point; returns the best `(j, derivative)`.
    ///
    /// The derivative equals `∫_{x_j}^{x_m} (F_n − F) dx − (x_m − x_j)(1 − F(x_m))`
    /// with `F_n` the weighted empirical CDF and `F` the CDF of `exp φ`.
    fn best_new_knot(&self, phi: &[f64]) -> Option<(usize, f64)> {
        let x = self.x;
        let m = x.len();
        // cumulative ∫_{x_0}^{x_j} (F_n − F)
        let mut acc = vec![0.0; m];
        let mut fn_cum = 0.0;
        let mut f_cum = 0.0;
        for i in 0..m - 1 {
            fn_cum += self.w[i];
            let len = x[i + 1] - x[i];
            let t = terms(phi[i], phi[i + 1]);
            acc[i + 1] = acc[i] + len * (fn_cum - f_cum) - len * len * t.dr;
            f_cum += len * t.j;
        }
        let total = acc[m - 1];
        let mut is_knot = vec![false; m];
        for &k in &self.knots {
            is_knot[k] = true;
        }
        let mut best: Option<(usize, f64)> = None;
        for j in 1..m - 1 {
            if is_knot[j] {
                continue;
            }
            let d = total - acc[j] - (x[m - 1] - x[j]) * (1.0 - f_cum);
            if best.map_or(true, |(_, b)| d > b) {
                best = Some((j, d));
            }
        }
        best
    }
}

/// Solves `A s = g` for symmetric positive-definite tridiagonal `A` given by
/// `diag` and `off` (Thomas algorithm).
fn solve_tridiagonal(diag: &[f64], off: &[f64], g: &[f64]) -> Vec<f64> {
    let p = diag.len();
    let mut c = vec![0.0; p];
    let mut d = vec![0.0; p];
    let mut denom = diag[0];
    c[0] = if p > 1 { off[0] / denom } else { 0.0 };
    d[0] = g[0] / denom;
    for i in 1..p {
        denom = diag[i] - off[i - 1] * c[i - 1];
        if i < p - 1 {
            c[i] = off[i] / denom;
        }
        d[i] = (g[i] - off[i - 1] * d[i - 1]) / denom;
    }
    let mut s = vec![0.0; p];
    s[p - 1] = d[p - 1];
    for i in (0..p - 1).rev() {
        s[i] = d[i] - c[i] * s[i + 1];
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngState;

    #[test]
    fn two_points_uniform() {
        let data = WeightedPoints::from_samples(&[0.0, 1.0]).unwrap();
        let m = fit_logconcave_1d(&data).unwrap();
        assert_eq!(m.knots(), &[0.0, 1.0]);
        assert!(m.phi().iter().all(|p| p.abs() < 1e-12));
    }

    #[test]
    fn support_is_data_range_and_normalized() {
        let mut rng = RngState::new(4);
        let xs: Vec<f64> = (0..500).map(|_| rng.normal()).collect();
        let data = WeightedPoints::from_samples(&xs).unwrap();
        let r = fit_logconcave_1d_traced(&data).unwrap();
        let (lo, hi) = r.model.support();
        assert_eq!(lo, data.values()[0]);
        assert_eq!(hi, *data.values().last().unwrap());
        assert!((r.model.total_mass() - 1.0).abs() < 1e-8);
        assert!(r.objective_trace.windows(2).all(|w| w[1] >= w[0] - 1e-12));
        assert!(r.model.knots().len() > 2);
    }

    #[test]
    fn tridiagonal_solver() {
        let diag = [4.0, 5.0, 6.0];
        let off = [1.0, 2.0];
        let g = [1.0, 2.0, 3.0];
        let s = solve_tridiagonal(&diag, &off, &g);
        let r0 = 4.0 * s[0] + 1.0 * s[1];
        let r1 = 1.0 * s[0] + 5.0 * s[1] + 2.0 * s[2];
        let r2 = 2.0 * s[1] + 6.0 * s[2];
        assert!((r0 - 1.0).abs() < 1e-14 && (r1 - 2.0).abs() < 1e-14 && (r2 - 3.0).abs() < 1e-14);
    }
}
