//! Loader for the Wisconsin diagnostic breast cancer file (`wdbc.data`):
//! id, diagnosis (M/B), then 30 real-valued features per line.

use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use lcic::SampleMatrix;
use ndarray::{Array2, Axis};

use crate::io::read_text;

/// Column names in file order (ten measurements as mean, standard error and
/// worst value).
pub const FEATURES: [&str; 30] = [
    "radius_mean",
    "texture_mean",
    "perimeter_mean",
    "area_mean",
    "smoothness_mean",
    "compactness_mean",
    "concavity_mean",
    "concave_points_mean",
    "symmetry_mean",
    "fractal_dimension_mean",
    "radius_se",
    "texture_se",
    "perimeter_se",
    "area_se",
    "smoothness_se",
    "compactness_se",
    "concavity_se",
    "concave_points_se",
    "symmetry_se",
    "fractal_dimension_se",
    "radius_worst",
    "texture_worst",
    "perimeter_worst",
    "area_worst",
    "smoothness_worst",
    "compactness_worst",
    "concavity_worst",
    "concave_points_worst",
    "symmetry_worst",
    "fractal_dimension_worst",
];

/// Features of the two-dimensional replication.
pub const DEFAULT_PAIR: [&str; 2] = ["radius_se", "texture_se"];

#[derive(Debug, Clone)]
pub struct Wdbc {
    pub features: SampleMatrix,
    /// 0 = malignant, 1 = benign.
    pub diagnosis: Vec<usize>,
}

impl Wdbc {
    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&read_text(path)?).with_context(|| format!("loading {}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut values = Vec::new();
        let mut diagnosis = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() == 1 && fields[0].is_empty() {
                continue;
            }
            if fields.len() != 32 {
                bail!("line {}: expected 32 fields, got {}", i + 1, fields.len());
            }
            let label = match fields[1] {
                "M" => 0,
                "B" => 1,
                // a header line, if present
                _ if i == 0 => continue,
                other => bail!("line {}: unknown diagnosis {other:?}", i + 1),
            };
            diagnosis.push(label);
            for f in &fields[2..] {
                values.push(f.parse::<f64>().map_err(|_| anyhow!("line {}: bad number {f:?}", i + 1))?);
            }
        }
        if diagnosis.is_empty() {
            bail!("no records");
        }
        Ok(Self {
            features: Array2::from_shape_vec((diagnosis.len(), 30), values)?,
            diagnosis,
        })
    }

    pub fn len(&self) -> usize {
        self.diagnosis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diagnosis.is_empty()
    }

    /// Columns picked by name, in the given order.
    pub fn select(&self, names: &[String]) -> Result<SampleMatrix> {
        let idx = names
            .iter()
            .map(|name| {
                FEATURES
                    .iter()
                    .position(|f| f == name)
                    .ok_or_else(|| anyhow!("unknown feature {name:?}"))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(self.features.select(Axis(1), &idx))
    }
}
