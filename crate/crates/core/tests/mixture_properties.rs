use ndarray::{concatenate, Axis};
use lcic::estimator::{fit_lcic, fit_oracle, Method};
use lcic::mixture::{assign_clusters, clustering_accuracy, em_fit, EmInit, EmOptions};
use lcic::sim::{haar_orthogonal, sample_ground_truth, GroundTruthModel, MarginalSpec};
use lcic::{RngState, SampleMatrix};

/// Two LC-IC components centered at (−5, −5) and (5, 5), 500 points each.
fn separated_mixture(seed: u64) -> (SampleMatrix, Vec<usize>) {
    let mut rng = RngState::new(seed);
    let mut parts = Vec::new();
    let mut labels = Vec::new();
    for (k, c) in [-5.0, 5.0].into_iter().enumerate() {
        let w = haar_orthogonal(2, &mut rng);
        let marginals = vec![MarginalSpec::normal(2.0).unwrap(), MarginalSpec::gamma(2.0, 1.0, true).unwrap()];
        let truth = GroundTruthModel::new(vec![c, c], w, marginals).unwrap();
        parts.push(sample_ground_truth(&truth, 500, &mut rng));
        labels.extend(std::iter::repeat(k).take(500));
    }
    let views: Vec<_> = parts.iter().map(|p| p.view()).collect();
    (concatenate(Axis(0), &views).unwrap(), labels)
}

#[test]
fn separated_mixture_is_clustered() {
    let mut acc: Vec<f64> = (0..5)
        .map(|seed| {
            let (x, truth) = separated_mixture(seed);
            let opts = EmOptions {
                k: 2,
                iters: 20,
                ..EmOptions::default()
            };
            let fit = em_fit(&x, &opts, &mut RngState::new(100 + seed)).unwrap();
            let labels = assign_clusters(&fit.model, &x).unwrap();
            clustering_accuracy(&labels, &truth).unwrap()
        })
        .collect();
    acc.sort_by(|a, b| a.total_cmp(b));
    assert!(acc[2] >= 0.95, "accuracies {acc:?}");
}

#[test]
fn provided_labels_initialize_em() {
    let (x, truth) = separated_mixture(9);
    let opts = EmOptions {
        k: 2,
        iters: 3,
        init: EmInit::Labels(truth.clone()),
        ..EmOptions::default()
    };
    let fit = em_fit(&x, &opts, &mut RngState::new(1)).unwrap();
    let labels = assign_clusters(&fit.model, &x).unwrap();
    assert!(clustering_accuracy(&labels, &truth).unwrap() >= 0.95);
    for w in &fit.model.weights {
        assert!((w - 0.5).abs() < 0.05);
    }
}

#[test]
fn single_component_is_a_bootstrap_fit() {
    let mut rng = RngState::new(2);
    let w = haar_orthogonal(2, &mut rng);
    let truth = GroundTruthModel::gaussian(&[6.0, 3.0], w).unwrap();
    let x = sample_ground_truth(&truth, 500, &mut rng);
    let opts = EmOptions {
        k: 1,
        iters: 1,
        resample_factor: 4,
        ..EmOptions::default()
    };
    let fit = em_fit(&x, &opts, &mut rng).unwrap();
    assert_eq!(fit.model.weights, vec![1.0]);
    assert!(fit.responsibilities.theta.iter().all(|&t| t == 1.0));
    let direct = fit_lcic(&x, 0.5, Method::Pca, &mut rng).unwrap();
    let n = x.nrows() as f64;
    let ll_em = fit.log_likelihood[0] / n;
    let ll_direct: f64 = x.rows().into_iter().map(|r| direct.log_density(r.as_slice().unwrap())).filter(|v| v.is_finite()).sum::<f64>() / n;
    assert!(ll_em.is_finite());
    assert!((ll_em - ll_direct).abs() < 0.2, "{ll_em} vs {ll_direct}");
}

/// With many re-samples the heuristic M-step approaches the weighted MLE on
/// the original points.
#[test]
fn heavy_resampling_approaches_weighted_mle() {
    let mut rng = RngState::new(3);
    let w = haar_orthogonal(2, &mut rng);
    let truth = GroundTruthModel::gaussian(&[6.0, 3.0], w).unwrap();
    let x = sample_ground_truth(&truth, 400, &mut rng);
    let opts = EmOptions {
        k: 1,
        iters: 1,
        resample_factor: 100,
        ..EmOptions::default()
    };
    let fit = em_fit(&x, &opts, &mut rng).unwrap();
    let component = &fit.model.components[0];
    let direct = fit_oracle(&x, &component.frame).unwrap();
    let per_sample = |est: &lcic::ProductEstimate| {
        x.rows().into_iter().map(|r| est.log_density(r.as_slice().unwrap())).sum::<f64>() / x.nrows() as f64
    };
    let (a, b) = (per_sample(component), per_sample(&direct));
    assert!((a - b).abs() <= 0.01, "{a} vs {b}");
}

#[test]
fn em_is_seed_reproducible() {
    let (x, _) = separated_mixture(4);
    let opts = EmOptions {
        iters: 2,
        resample_factor: 1,
        ..EmOptions::default()
    };
    let a = em_fit(&x, &opts, &mut RngState::new(5)).unwrap();
    let b = em_fit(&x, &opts, &mut RngState::new(5)).unwrap();
    assert_eq!(a.model, b.model);
    assert_eq!(a.log_likelihood, b.log_likelihood);
}

#[test]
fn collapsed_component_reported() {
    // five distinct points cannot support a d = 4 component (needs 6)
    let mut rng = RngState::new(6);
    let base = ndarray::Array2::from_shape_fn((5, 4), |_| rng.normal());
    let views: Vec<_> = (0..4).map(|_| base.view()).collect();
    let x = concatenate(Axis(0), &views).unwrap();
    let opts = EmOptions {
        k: 1,
        iters: 1,
        ..EmOptions::default()
    };
    match em_fit(&x, &opts, &mut rng) {
        Err(lcic::Error::ComponentCollapse { component, .. }) => assert_eq!(component, 0),
        other => panic!("unexpected {other:?}"),
    }
}
