mod common;

use common::lcmle_oracle;
use lcic::lcmle::{fit_logconcave_1d, fit_logconcave_1d_traced, LogConcave1D, WeightedPoints};
use lcic::RngState;

fn random_instance(rng: &mut RngState, m: usize, weighted: bool) -> WeightedPoints {
    let xs: Vec<f64> = (0..m).map(|_| 4.0 * rng.uniform() - 2.0).collect();
    let ws: Vec<f64> = if weighted {
        rng.dirichlet_flat(m)
    } else {
        vec![1.0; m]
    };
    WeightedPoints::from_weighted(&xs, &ws).unwrap()
}

fn phi_at(model: &LogConcave1D, xs: &[f64]) -> Vec<f64> {
    xs.iter().map(|&x| model.log_density(x)).collect()
}

#[test]
fn small_instances_match_brute_force() {
    let mut rng = RngState::new(2024);
    for trial in 0..40 {
        let m = 2 + trial % 4;
        let data = random_instance(&mut rng, m, trial % 2 == 1);
        let fit = fit_logconcave_1d(&data).unwrap();
        let ours = lcmle_oracle::objective(data.values(), data.weights(), &phi_at(&fit, data.values()));
        let (oracle, _) = lcmle_oracle::brute_force(data.values(), data.weights());
        assert!((ours - oracle).abs() <= 1e-4, "trial {trial}: ours {ours} oracle {oracle}");
        assert!(oracle <= ours + 1e-9, "oracle beat the solver: {oracle} > {ours}");
    }
}

/// Adding a small concave perturbation to a concave φ keeps it concave, so
/// the objective may not increase along any such direction.
#[test]
fn no_concave_perturbation_improves_the_fit() {
    let mut rng = RngState::new(7);
    for trial in 0..10 {
        let xs: Vec<f64> = (0..60).map(|_| rng.normal() * (1.0 + trial as f64)).collect();
        let data = WeightedPoints::from_samples(&xs).unwrap();
        let fit = fit_logconcave_1d(&data).unwrap();
        let x = data.values();
        let phi = phi_at(&fit, x);
        let base = lcmle_oracle::objective(x, data.weights(), &phi);
        for _ in 0..50 {
            // ψ(x) = a + b x − c |x − t|, concave for c ≥ 0
            let (a, b, c) = (rng.normal(), rng.normal(), rng.uniform());
            let t = x[0] + rng.uniform() * (x[x.len() - 1] - x[0]);
            for eps in [1e-2, 1e-3] {
                let moved: Vec<f64> = x
                    .iter()
                    .zip(&phi)
                    .map(|(&xi, &p)| p + eps * (a + b * xi - c * (xi - t).abs()))
                    .collect();
                let val = lcmle_oracle::objective(x, data.weights(), &moved);
                assert!(val <= base + 1e-6, "trial {trial}: {val} > {base}");
            }
        }
    }
}

#[test]
fn fit_is_normalized_concave_and_spans_the_data() {
    let mut rng = RngState::new(11);
    for n in [2usize, 3, 10, 500] {
        let xs: Vec<f64> = (0..n).map(|_| rng.gamma(2.0)).collect();
        let data = WeightedPoints::from_samples(&xs).unwrap();
        let report = fit_logconcave_1d_traced(&data).unwrap();
        let fit = &report.model;
        assert!((fit.total_mass() - 1.0).abs() <= 1e-8);
        let lo = xs.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(fit.support(), (lo, hi));
        for s in fit.slopes().windows(2) {
            assert!(s[1] <= s[0] + 1e-9 * (1.0 + s[0].abs()));
        }
        for t in report.objective_trace.windows(2) {
            assert!(t[1] >= t[0] - 1e-12 * t[0].abs().max(1.0), "trace decreased: {t:?}");
        }
    }
}

#[test]
fn affine_equivariance() {
    let mut rng = RngState::new(5);
    let xs: Vec<f64> = (0..300).map(|_| rng.normal()).collect();
    let base = fit_logconcave_1d(&WeightedPoints::from_samples(&xs).unwrap()).unwrap();
    for (a, b) in [(2.5, -1.0), (-0.3, 4.0)] {
        let ys: Vec<f64> = xs.iter().map(|x| a * x + b).collect();
        let direct = fit_logconcave_1d(&WeightedPoints::from_samples(&ys).unwrap()).unwrap();
        let mapped = base.affine_image(a, b).unwrap();
        for y in ys.iter().step_by(7) {
            let (p, q) = (direct.log_density(*y), mapped.log_density(*y));
            assert!((p - q).abs() <= 1e-7 * (1.0 + p.abs()), "at {y}: {p} vs {q}");
        }
    }
}

/// Midpoint rule for `∫ sqrt(f g)` on the fit's support.
fn hellinger_sq_to_std_normal(fit: &LogConcave1D) -> f64 {
    let (lo, hi) = fit.support();
    let k = 200_000;
    let h = (hi - lo) / k as f64;
    let mut affinity = 0.0;
    for i in 0..k {
        let z = lo + (i as f64 + 0.5) * h;
        let log_g = -0.5 * z * z - 0.5 * (2.0 * std::f64::consts::PI).ln();
        affinity += (0.5 * (fit.log_density(z) + log_g)).exp() * h;
    }
    1.0 - affinity
}

#[test]
fn large_normal_sample_is_recovered() {
    let mut rng = RngState::new(99);
    let xs: Vec<f64> = (0..100_000).map(|_| rng.normal()).collect();
    let fit = fit_logconcave_1d(&WeightedPoints::from_samples(&xs).unwrap()).unwrap();
    let h2 = hellinger_sq_to_std_normal(&fit);
    assert!(h2 <= 0.005, "squared Hellinger {h2}");
}

#[test]
fn cdf_matches_trapezoid_quadrature() {
    let mut rng = RngState::new(3);
    let xs: Vec<f64> = (0..200).map(|_| rng.gamma(3.0)).collect();
    let fit = fit_logconcave_1d(&WeightedPoints::from_samples(&xs).unwrap()).unwrap();
    let (lo, hi) = fit.support();
    let k = 1_000_000;
    let h = (hi - lo) / k as f64;
    let dens = |z: f64| fit.log_density(z).exp();
    let mut acc = 0.0;
    let mut prev = dens(lo);
    let checkpoints: Vec<usize> = (1..=10).map(|c| c * k / 10).collect();
    let mut next = 0;
    for i in 1..=k {
        let z = if i == k { hi } else { lo + i as f64 * h };
        let cur = dens(z);
        acc += 0.5 * (prev + cur) * h;
        prev = cur;
        if i == checkpoints[next] {
            assert!((fit.cdf(z) - acc).abs() <= 1e-6, "at {z}: {} vs {acc}", fit.cdf(z));
            next += 1;
        }
    }
}

#[test]
fn samples_from_uniform_model_pass_ks() {
    let model = LogConcave1D::new(vec![-1.0, 3.0], vec![-(4.0f64).ln(); 2]).unwrap();
    let mut rng = RngState::new(8);
    let n = 100_000;
    let s = model.sample(n, &mut rng);
    let d = common::ks::statistic(&s, |z| ((z + 1.0) / 4.0).clamp(0.0, 1.0));
    assert!(d <= common::ks::critical_001(n), "KS {d}");
}

#[test]
fn samples_from_fitted_model_match_its_cdf() {
    let mut rng = RngState::new(21);
    let xs: Vec<f64> = (0..500).map(|_| rng.gamma(1.5)).collect();
    let fit = fit_logconcave_1d(&WeightedPoints::from_samples(&xs).unwrap()).unwrap();
    let n = 20_000;
    let s = fit.sample(n, &mut rng);
    let d = common::ks::statistic(&s, |z| fit.cdf(z));
    assert!(d <= common::ks::critical_001(n), "KS {d}");
}

#[test]
fn two_points_give_the_uniform_density() {
    let fit = fit_logconcave_1d(&WeightedPoints::from_samples(&[0.0, 1.0]).unwrap()).unwrap();
    assert_eq!(fit.knots(), &[0.0, 1.0]);
    assert!(fit.phi().iter().all(|p| p.abs() <= 1e-12), "{:?}", fit.phi());
}
