use ndarray::Array2;

use crate::rng::RngState;

/// Row-per-sample data matrix (`n × d`).
pub type SampleMatrix = Array2<f64>;

/// Something with a pointwise log-density on `R^d`.
pub trait Density: Sync {
    fn dim(&self) -> usize;

    /// Natural log of the density at `x`; `-inf` outside the support.
    fn log_density(&self, x: &[f64]) -> f64;
}

/// Something that can draw i.i.d. samples.
pub trait Sampler: Sync {
    fn sample(&self, n: usize, rng: &mut RngState) -> SampleMatrix;
}

impl<T: Density + ?Sized> Density for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn log_density(&self, x: &[f64]) -> f64 {
        (**self).log_density(x)
    }
}

impl<T: Sampler + ?Sized> Sampler for &T {
    fn sample(&self, n: usize, rng: &mut RngState) -> SampleMatrix {
        (**self).sample(n, rng)
    }
}
