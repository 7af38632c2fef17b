//! Supervised joint dimensionality reduction for paired feature vectors.
//!
//! Estimates separable linear embeddings `(U, V)` from samples `(a, b, y)`
//! through a factorized proxy matrix, with a randomized fast path, sparse
//! feature selection, a higher-order tensor extension, and a kernel
//! regression predictor built on the learned embeddings.

pub mod baselines;
pub mod data;
pub mod error;
pub mod estimator;
pub mod io;
pub mod metrics;
pub mod predictor;
pub mod sparse;
pub mod synth;
pub mod tensor;

pub use data::{
    fit_normalization_featurewise, fit_normalization_full, unwhiten_embeddings, whiten,
    NormalizationState, Normalize, SampleSet, WhitenedSampleSet, DEFAULT_JITTER_FLOOR,
};
pub use error::{Error, Result};
pub use estimator::{
    build_proxy, fit_fast_jdr, fit_jdr, fit_jdr_whitened, spectrum, whiten_for, EmbeddingPair,
    ProxyMatrix,
};
pub use metrics::{fit_loglog_slope, nsee, recall_at_k, subspace_distance, SlopeFit};
pub use sparse::{
    estimate_rank_sparsity, fit_sparse_jdr, project_omega1, project_omega2, project_omega3,
    SparseEmbeddingPair, SparsityBudget,
};
pub use synth::{generate, make_ground_truth, FeatureDist, GroundTruth, Model, SyntheticSpec};
