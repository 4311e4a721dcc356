use lcic::linalg::{OrthonormalFrame, SymMatrix};
use lcic::metrics::{
    gaussian_hellinger_sq, gaussian_rotation_kl, hellinger_sq_mc, kl_domination_suite, kl_stability_bound, tensorized_hellinger,
    tv_domination_suite, tv_mc, tv_stability_bound, Gaussian, KlBoundParams, TvBoundParams,
};
use lcic::{Density, RngState, Sampler};
use statrs::distribution::{ContinuousCDF, Normal};

fn normal_1d(mean: f64, var: f64) -> Gaussian {
    Gaussian::new(vec![mean], SymMatrix::from_diag(&[var])).unwrap()
}

/// `1 − ∫ √(p q)` by composite Simpson on a wide interval.
fn hellinger_quadrature(p: &Gaussian, q: &Gaussian) -> f64 {
    let (a, b, n) = (-40.0, 40.0, 200_000);
    let h = (b - a) / n as f64;
    let f = |x: f64| (0.5 * (p.log_density(&[x]) + q.log_density(&[x]))).exp();
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(a + i as f64 * h);
    }
    1.0 - s * h / 3.0
}

#[test]
fn gaussian_closed_form_matches_quadrature() {
    let (p, q) = (normal_1d(0.0, 1.0), normal_1d(0.0, 4.0));
    let quad = hellinger_quadrature(&p, &q);
    let closed = gaussian_hellinger_sq(&[0.0], p.cov(), &[0.0], q.cov()).unwrap();
    assert!((quad - closed).abs() < 1e-10);
    assert!((closed - 0.105_572_809).abs() < 1e-8);
    let (p, q) = (normal_1d(0.3, 2.0), normal_1d(-1.0, 0.5));
    let closed = gaussian_hellinger_sq(&[0.3], p.cov(), &[-1.0], q.cov()).unwrap();
    assert!((hellinger_quadrature(&p, &q) - closed).abs() < 1e-10);
}

/// Sampling from the wider density keeps `q/p` bounded, so the estimator
/// has finite variance and the standard error is trustworthy.
#[test]
fn hellinger_mc_agrees_with_closed_form() {
    let (p, q) = (normal_1d(0.0, 4.0), normal_1d(0.0, 1.0));
    let est = hellinger_sq_mc(&p, &q, &p, 10_000, 50, &mut RngState::new(1)).unwrap();
    let truth = 1.0 - (0.8f64).sqrt();
    assert!((est.value - truth).abs() <= 4.0 * est.std_error, "{est:?}");
    assert!(est.spread_ok());
}

/// From the narrower density `q/p` is unbounded and the per-draw term has
/// infinite variance; the 4-SE interval still covers the truth most of the
/// time (about 93% by an independent simulation).
#[test]
fn hellinger_mc_coverage_from_narrow_sampler() {
    let (p, q) = (normal_1d(0.0, 1.0), normal_1d(0.0, 4.0));
    let truth = 1.0 - (0.8f64).sqrt();
    let mut rng = RngState::new(11);
    let covered = (0..20)
        .filter(|_| {
            let est = hellinger_sq_mc(&p, &q, &p, 10_000, 50, &mut rng).unwrap();
            (est.value - truth).abs() <= 4.0 * est.std_error
        })
        .count();
    assert!(covered >= 15, "{covered}/20 covered");
}

#[test]
fn hellinger_mc_symmetric_when_samplers_swap() {
    let mut rng = RngState::new(2);
    let p = Gaussian::new(vec![0.0, 0.0], SymMatrix::from_diag(&[1.0, 2.0])).unwrap();
    let q = Gaussian::new(vec![0.5, 0.0], SymMatrix::from_diag(&[1.5, 1.0])).unwrap();
    let a = hellinger_sq_mc(&p, &q, &p, 10_000, 20, &mut rng).unwrap();
    let b = hellinger_sq_mc(&q, &p, &q, 10_000, 20, &mut rng).unwrap();
    let se = (a.std_error.powi(2) + b.std_error.powi(2)).sqrt();
    assert!((a.value - b.value).abs() <= 4.0 * se);
}

#[test]
fn tv_mc_agrees_with_normal_cdf() {
    let (p, q) = (normal_1d(0.0, 1.0), normal_1d(1.0, 1.0));
    let est = tv_mc(&p, &q, &p, 10_000, 50, &mut RngState::new(3)).unwrap();
    let truth = 2.0 * Normal::new(0.0, 1.0).unwrap().cdf(0.5) - 1.0;
    assert!((est.value - truth).abs() <= 4.0 * est.std_error, "{est:?} vs {truth}");
    let far = normal_1d(100.0, 1.0);
    let est = tv_mc(&p, &far, &p, 1000, 5, &mut RngState::new(3)).unwrap();
    assert!((est.value - 1.0).abs() < 1e-6);
}

#[test]
fn tensorization_matches_product_gaussians() {
    let mut rng = RngState::new(4);
    for _ in 0..50 {
        let d = 1 + rng.below(6);
        let (m1, m2): (Vec<f64>, Vec<f64>) = (0..d).map(|_| (rng.normal(), rng.normal())).unzip();
        let (v1, v2): (Vec<f64>, Vec<f64>) = (0..d).map(|_| (0.2 + 3.0 * rng.uniform(), 0.2 + 3.0 * rng.uniform())).unzip();
        let parts: Vec<f64> = (0..d)
            .map(|i| {
                gaussian_hellinger_sq(&[m1[i]], &SymMatrix::from_diag(&[v1[i]]), &[m2[i]], &SymMatrix::from_diag(&[v2[i]])).unwrap()
            })
            .collect();
        let joint = gaussian_hellinger_sq(&m1, &SymMatrix::from_diag(&v1), &m2, &SymMatrix::from_diag(&v2)).unwrap();
        let t = tensorized_hellinger(&parts).unwrap();
        assert!((t.value - joint).abs() <= 1e-12, "{} vs {joint}", t.value);
        assert!(t.value <= t.bound + 1e-15);
    }
}

#[test]
fn tensorized_value_below_crude_bound() {
    let mut rng = RngState::new(5);
    for _ in 0..1000 {
        let h: Vec<f64> = (0..1 + rng.below(10)).map(|_| rng.uniform()).collect();
        let t = tensorized_hellinger(&h).unwrap();
        assert!(t.value <= t.bound + 1e-15);
    }
}

#[test]
fn rotation_kl_matches_monte_carlo() {
    let cov = SymMatrix::from_diag(&[6.0, 3.0]);
    let t: f64 = 0.1;
    let r = OrthonormalFrame::new(ndarray::array![[t.cos(), -t.sin()], [t.sin(), t.cos()]]).unwrap();
    let p = Gaussian::centered(cov.clone()).unwrap();
    let rm = r.matrix();
    let q = Gaussian::centered(SymMatrix::symmetrize(&rm.t().dot(cov.matrix()).dot(rm)).unwrap()).unwrap();
    let n = 10_000_000;
    let xs = p.sample(n, &mut RngState::new(6));
    let (mut s, mut s2) = (0.0, 0.0);
    for x in xs.rows() {
        let x = x.as_slice().unwrap();
        let v = p.log_density(x) - q.log_density(x);
        s += v;
        s2 += v * v;
    }
    let mean = s / n as f64;
    let se = ((s2 / n as f64 - mean * mean) / n as f64).sqrt();
    let kl = gaussian_rotation_kl(&cov, &r).unwrap();
    assert!((mean - kl).abs() <= 3.0 * se, "mc {mean} ± {se} vs {kl}");
}

#[test]
fn bivariate_bounds_dominate() {
    let cov = SymMatrix::from_diag(&[6.0, 3.0]);
    let t: f64 = 0.1;
    let r = OrthonormalFrame::new(ndarray::array![[t.cos(), -t.sin()], [t.sin(), t.cos()]]).unwrap();
    let dev = 2.0 * (t / 2.0).sin();
    let kl_bound = kl_stability_bound(&KlBoundParams {
        holder_const: 1.0 / 3.0,
        alpha: 1.0,
        d: 2,
        sigma_op: 6.0,
        rot_dev: dev,
    })
    .unwrap();
    assert!(gaussian_rotation_kl(&cov, &r).unwrap() < kl_bound);

    let p = Gaussian::centered(cov.clone()).unwrap();
    let rm = r.matrix();
    let q = Gaussian::centered(SymMatrix::symmetrize(&rm.t().dot(cov.matrix()).dot(rm)).unwrap()).unwrap();
    let tv = tv_mc(&p, &q, &p, 10_000, 20, &mut RngState::new(7)).unwrap();
    let tv_bound = tv_stability_bound(&TvBoundParams {
        grad_l1: (2.0f64 / 3.0).sqrt(),
        b: 1.0,
        d: 2,
        sigma_op: 6.0,
        map_dev: dev,
    })
    .unwrap();
    assert!(tv.value - 4.0 * tv.std_error <= tv_bound);
}

#[test]
fn stability_suites_report_no_violations() {
    let mut rng = RngState::new(8);
    let kl = kl_domination_suite(100, &mut rng).unwrap();
    assert_eq!(kl.violations, 0, "{kl:?}");
    let tv = tv_domination_suite(50, 10_000, 10, &mut rng).unwrap();
    assert_eq!(tv.violations, 0, "{tv:?}");
}
