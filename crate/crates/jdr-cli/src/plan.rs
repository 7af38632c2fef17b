//! Experiment plans: which estimator to sweep over which variable.

use jdr::synth::{FeatureDist, Model, SyntheticSpec};
use jdr::{Error, Normalize, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepVar {
    /// Sample count.
    M,
    /// Feature dimension (n1 = n2 = n).
    N,
    /// Planted row sparsity (s1 = s2 = s).
    S,
}

impl SweepVar {
    pub fn name(&self) -> &'static str {
        match self {
            SweepVar::M => "m",
            SweepVar::N => "n",
            SweepVar::S => "s",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimatorKind {
    Jdr,
    FastJdr,
    SparseJdr,
    Pca,
    Phd,
    Cphd,
}

impl EstimatorKind {
    pub fn name(&self) -> &'static str {
        match self {
            EstimatorKind::Jdr => "jdr",
            EstimatorKind::FastJdr => "fast",
            EstimatorKind::SparseJdr => "sparse",
            EstimatorKind::Pca => "pca",
            EstimatorKind::Phd => "phd",
            EstimatorKind::Cphd => "cphd",
        }
    }
}

/// A full sweep description: grid, fixed parameters, and repetitions.
#[derive(Debug, Clone)]
pub struct ExperimentPlan {
    pub sweep: SweepVar,
    pub grid: Vec<usize>,
    pub model: Model,
    pub dist: FeatureDist,
    pub estimator: EstimatorKind,
    pub normalize: Normalize,
    /// Fixed feature dimension (used unless sweeping n).
    pub n: usize,
    /// Fixed sample count (used unless sweeping m).
    pub m: usize,
    pub r: usize,
    /// Fixed planted sparsity for the sparse estimator when not sweeping s.
    pub s: Option<usize>,
    pub trials: u64,
    pub seed: u64,
}

impl ExperimentPlan {
    pub fn validate(&self) -> Result<()> {
        if self.grid.len() < 2 {
            return Err(Error::TooFewSamples {
                needed: 2,
                got: self.grid.len(),
            });
        }
        if self.grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Parse {
                context: "grid values must be strictly increasing".into(),
            });
        }
        if self.trials == 0 {
            return Err(Error::TooFewSamples { needed: 1, got: 0 });
        }
        if self.sweep == SweepVar::S && self.estimator != EstimatorKind::SparseJdr {
            return Err(Error::Parse {
                context: "sweeping s requires the sparse estimator".into(),
            });
        }
        if self.estimator == EstimatorKind::SparseJdr
            && self.sweep != SweepVar::S
            && self.s.is_none()
        {
            return Err(Error::Parse {
                context: "the sparse estimator needs a fixed --s when not sweeping s".into(),
            });
        }
        Ok(())
    }

    /// Synthetic spec for one grid value (before trial derivation).
    pub fn spec_for(&self, value: usize, grid_index: usize) -> SyntheticSpec {
        let (n, m, sparsity) = match self.sweep {
            SweepVar::M => (self.n, value, self.s),
            SweepVar::N => (value, self.m, self.s),
            SweepVar::S => (self.n, self.m, Some(value)),
        };
        let mut spec = SyntheticSpec::new(
            self.model,
            n,
            n,
            self.r,
            m,
            grid_seed(self.seed, grid_index),
        )
        .with_dist(self.dist);
        if self.estimator == EstimatorKind::SparseJdr {
            if let Some(s) = sparsity {
                spec = spec.with_sparsity(s, s);
            }
        }
        spec
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E3779B97F4A7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D049BB133111EB);
    x ^ (x >> 31)
}

/// Deterministic per-grid-point base seed; trials then derive from it.
pub fn grid_seed(base: u64, grid_index: usize) -> u64 {
    splitmix64(base ^ (grid_index as u64 + 1).wrapping_mul(0xD1B54A32D192ED03))
}

/// Salt for the fast path's sketch generator so it never shares a stream
/// with data generation.
pub fn sketch_seed(data_seed: u64) -> u64 {
    splitmix64(data_seed ^ 0xA076_1D64_78BD_642F)
}
