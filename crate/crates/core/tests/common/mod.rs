//! Independent oracles shared by the integration and acceptance suites.
#![allow(dead_code)]

pub mod lcmle_oracle {
    /// `∫₀¹ exp((1−u) r + u s) du` by the textbook formula; a separate code
    /// path from the library's series/closed-form evaluation.
    fn seg_integral(r: f64, s: f64) -> f64 {
        let d = s - r;
        if d.abs() < 1e-6 {
            // Simpson on the (nearly constant) exponential
            (r.exp() + 4.0 * (0.5 * (r + s)).exp() + s.exp()) / 6.0
        } else {
            (s.exp() - r.exp()) / d
        }
    }

    /// `Σ w_j φ_j − ∫ exp(interp φ)`.
    pub fn objective(x: &[f64], w: &[f64], phi: &[f64]) -> f64 {
        let lin: f64 = w.iter().zip(phi).map(|(a, b)| a * b).sum();
        let integral: f64 = (0..x.len() - 1)
            .map(|i| (x[i + 1] - x[i]) * seg_integral(phi[i], phi[i + 1]))
            .sum();
        lin - integral
    }

    fn interp(x: &[f64], knots: &[usize], theta: &[f64]) -> Vec<f64> {
        let mut phi = vec![0.0; x.len()];
        for a in 0..knots.len() - 1 {
            let (lo, hi) = (knots[a], knots[a + 1]);
            for j in lo..=hi {
                let t = (x[j] - x[lo]) / (x[hi] - x[lo]);
                phi[j] = theta[a] + t * (theta[a + 1] - theta[a]);
            }
        }
        phi
    }

    fn maximize_smooth(f: impl Fn(&[f64]) -> f64, start: Vec<f64>) -> (f64, Vec<f64>) {
        let k = start.len();
        let mut p = start;
        let mut val = f(&p);
        let grad = |p: &[f64]| -> Vec<f64> {
            (0..k)
                .map(|i| {
                    let h = 1e-6 * (1.0 + p[i].abs());
                    let mut a = p.to_vec();
                    let mut b = p.to_vec();
                    a[i] += h;
                    b[i] -= h;
                    (f(&a) - f(&b)) / (2.0 * h)
                })
                .collect()
        };
        for _ in 0..200 {
            let g = grad(&p);
            // Hessian by differencing the gradient
            let mut hess = vec![vec![0.0; k]; k];
            for j in 0..k {
                let h = 1e-4 * (1.0 + p[j].abs());
                let mut a = p.clone();
                let mut b = p.clone();
                a[j] += h;
                b[j] -= h;
                let (ga, gb) = (grad(&a), grad(&b));
                for i in 0..k {
                    hess[i][j] = (ga[i] - gb[i]) / (2.0 * h);
                }
            }
            // solve (−H) s = g by Gaussian elimination with partial pivoting
            let mut a: Vec<Vec<f64>> = hess.iter().map(|r| r.iter().map(|v| -v).collect()).collect();
            let mut rhs = g.clone();
            for c in 0..k {
                let piv = (c..k).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
                a.swap(c, piv);
                rhs.swap(c, piv);
                for r in c + 1..k {
                    let factor = a[r][c] / a[c][c];
                    for cc in c..k {
                        a[r][cc] -= factor * a[c][cc];
                    }
                    rhs[r] -= factor * rhs[c];
                }
            }
            let mut step = vec![0.0; k];
            for r in (0..k).rev() {
                let mut s = rhs[r];
                for cc in r + 1..k {
                    s -= a[r][cc] * step[cc];
                }
                step[r] = s / a[r][r];
            }
            let dir_ok = step.iter().zip(&g).map(|(a, b)| a * b).sum::<f64>() > 0.0;
            let dir = if dir_ok { step } else { g.clone() };
            let mut t = 1.0;
            let mut moved = false;
            for _ in 0..60 {
                let trial: Vec<f64> = p.iter().zip(&dir).map(|(a, b)| a + t * b).collect();
                let tv = f(&trial);
                if tv > val {
                    p = trial;
                    val = tv;
                    moved = true;
                    break;
                }
                t *= 0.5;
            }
            if !moved {
                break;
            }
        }
        (val, p)
    }

    /// Enumerates every kink set (subset of interior points), maximizes the
    /// smooth objective on each, and keeps the best concave solution. Exact for
    /// the handful of points used in tests.
    pub fn brute_force(x: &[f64], w: &[f64]) -> (f64, Vec<f64>) {
        let m = x.len();
        let interior = m.saturating_sub(2);
        let range = x[m - 1] - x[0];
        let mut best = (f64::NEG_INFINITY, Vec::new());
        for mask in 0u32..(1 << interior) {
            let mut knots = vec![0];
            for i in 0..interior {
                if mask & (1 << i) != 0 {
                    knots.push(i + 1);
                }
            }
            knots.push(m - 1);
            let start = vec![-range.ln(); knots.len()];
            let (val, theta) = maximize_smooth(|t| objective(x, w, &interp(x, &knots, t)), start);
            let phi = interp(x, &knots, &theta);
            let slopes: Vec<f64> = (0..m - 1).map(|i| (phi[i + 1] - phi[i]) / (x[i + 1] - x[i])).collect();
            let concave = slopes.windows(2).all(|s| s[1] <= s[0] + 1e-7 * (1.0 + s[0].abs()));
            if concave && val > best.0 {
                best = (val, phi);
            }
        }
        best
    }
}

pub mod ks {
    /// Two-sided one-sample Kolmogorov–Smirnov statistic.
    pub fn statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
        let mut xs = samples.to_vec();
        xs.sort_by(f64::total_cmp);
        let n = xs.len() as f64;
        xs.iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = cdf(x);
                (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
            })
            .fold(0.0, f64::max)
    }

    /// Asymptotic critical value at level 0.001: `K⁻¹(0.999) / √n`.
    pub fn critical_001(n: usize) -> f64 {
        1.949_5 / (n as f64).sqrt()
    }
}
