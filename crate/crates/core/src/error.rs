use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty input")]
    EmptyInput,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },

    #[error("input contains non-finite values")]
    NonFinite,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("Jacobi eigensolver did not converge after {sweeps} sweeps")]
    EigenNoConvergence { sweeps: usize },

    #[error("characteristic function too close to zero for {retries} probes")]
    FourierProbeFailed { retries: usize },

    #[error("log-concave MLE needs at least 2 distinct values, got {distinct}")]
    TooFewDistinct { distinct: usize },

    #[error("log-concave MLE did not converge after {iterations} iterations")]
    MleNoConvergence { iterations: usize },

    #[error("split infeasible: n={n}, M={unmixing}, N={marginal}, d={dim} (need M >= d and N >= 2)")]
    SplitInfeasible {
        n: usize,
        unmixing: usize,
        marginal: usize,
        dim: usize,
    },

    #[error("marginal fit failed in direction {direction}: {source}")]
    MarginalFit {
        direction: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("covariance matrix is singular or not positive definite")]
    SingularCovariance,

    #[error("sampler produced a point where its own log-density is -inf")]
    SamplerOutsideSupport,

    #[error("mixture component {component} collapsed: {distinct} distinct re-sampled points")]
    ComponentCollapse { component: usize, distinct: usize },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
