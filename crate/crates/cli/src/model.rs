//! JSON densities accepted by `eval`, `sample` and `hellinger`: a fitted
//! estimate or a ground-truth model.

use std::path::Path;

use anyhow::{anyhow, Context, Result};
use lcic::{Density, GroundTruthModel, ProductEstimate, RngState, SampleMatrix, Sampler};

use crate::io::read_text;

#[derive(Debug, Clone)]
pub enum DensitySpec {
    Estimate(ProductEstimate),
    Truth(GroundTruthModel),
}

impl DensitySpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let estimate_err = match ProductEstimate::from_json(text) {
            Ok(e) => return Ok(Self::Estimate(e)),
            Err(e) => e,
        };
        let truth_err = match serde_json::from_str::<GroundTruthModel>(text) {
            Ok(t) => match t.validate() {
                Ok(()) => return Ok(Self::Truth(t)),
                Err(e) => anyhow!(e),
            },
            Err(e) => anyhow!(e),
        };
        Err(anyhow!(
            "not a fitted estimate ({estimate_err}) nor a ground-truth model ({truth_err})"
        ))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&read_text(path)?).with_context(|| format!("loading {}", path.display()))
    }
}

impl Density for DensitySpec {
    fn dim(&self) -> usize {
        match self {
            Self::Estimate(e) => e.dim(),
            Self::Truth(t) => t.dim(),
        }
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        match self {
            Self::Estimate(e) => e.log_density(x),
            Self::Truth(t) => Density::log_density(t, x),
        }
    }
}

impl Sampler for DensitySpec {
    fn sample(&self, n: usize, rng: &mut RngState) -> SampleMatrix {
        match self {
            Self::Estimate(e) => e.sample(n, rng),
            Self::Truth(t) => Sampler::sample(t, n, rng),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use lcic::OrthonormalFrame;

    #[test]
    fn detects_both_kinds() {
        let truth = GroundTruthModel::gaussian(&[2.0, 1.0], OrthonormalFrame::identity(2)).unwrap();
        let text = serde_json::to_string(&truth).unwrap();
        assert!(matches!(DensitySpec::from_json(&text).unwrap(), DensitySpec::Truth(_)));

        let x = Sampler::sample(&truth, 200, &mut RngState::new(0));
        let est = lcic::fit_lcic(&x, 0.5, lcic::Method::Pca, &mut RngState::new(1)).unwrap();
        let spec = DensitySpec::from_json(&est.to_json().unwrap()).unwrap();
        assert!(matches!(spec, DensitySpec::Estimate(_)));
        assert_eq!(spec.dim(), 2);
    }

    #[test]
    fn garbage_is_rejected() {
        assert!(DensitySpec::from_json("{\"mean\": [0]}").is_err());
        assert!(DensitySpec::from_json("not json").is_err());
    }
}
