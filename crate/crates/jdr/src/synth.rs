//! Synthetic data generation for the bilinear and RBF response models,
//! including the non-ideal feature distributions and planted row-sparse
//! embeddings used by the experiment harness.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal, Uniform};

use crate::data::SampleSet;
use crate::error::{Error, Result};

/// Response model linking features to responses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Model {
    /// `y = a^T U V^T b + z`, `z ~ N(0, 1)`.
    Bilinear,
    /// `y ~ Ber(exp(-||U^T a - V^T b||^2))`.
    Rbf,
}

/// Marginal distribution of the raw feature coordinates. All variants
/// have zero mean and unit variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FeatureDist {
    Gaussian,
    /// Uniform on `[-sqrt(3), sqrt(3)]`.
    Uniform,
    /// Poisson(4), standardized with the exact moments (mean 4, sd 2).
    Poisson,
    /// Jointly Gaussian `a`, `b` with cross-correlation `rho` between
    /// matched coordinates.
    CorrelatedGaussian(f64),
}

/// Full description of a synthetic dataset.
#[derive(Debug, Clone)]
pub struct SyntheticSpec {
    pub model: Model,
    pub n1: usize,
    pub n2: usize,
    pub r: usize,
    pub m: usize,
    pub feature_dist: FeatureDist,
    /// Planted `(s1, s2)` row supports for `U` and `V`.
    pub sparsity: Option<(usize, usize)>,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn new(model: Model, n1: usize, n2: usize, r: usize, m: usize, seed: u64) -> Self {
        SyntheticSpec {
            model,
            n1,
            n2,
            r,
            m,
            feature_dist: FeatureDist::Gaussian,
            sparsity: None,
            seed,
        }
    }

    pub fn with_dist(mut self, dist: FeatureDist) -> Self {
        self.feature_dist = dist;
        self
    }

    pub fn with_sparsity(mut self, s1: usize, s2: usize) -> Self {
        self.sparsity = Some((s1, s2));
        self
    }

    /// Derives the spec for one trial of a repeated experiment.
    pub fn for_trial(&self, trial: u64) -> Self {
        let mut spec = self.clone();
        spec.seed ^= trial;
        spec
    }

    pub fn validate(&self) -> Result<()> {
        if self.r == 0 || self.r > self.n1.min(self.n2) {
            return Err(Error::RankTooLarge {
                rank: self.r,
                n1: self.n1,
                n2: self.n2,
            });
        }
        if let Some((s1, s2)) = self.sparsity {
            if s1 < self.r || s1 > self.n1 || s2 < self.r || s2 > self.n2 {
                return Err(Error::BudgetOutOfRange {
                    context: format!(
                        "planted supports ({s1}, {s2}) must satisfy r <= s <= n for r = {}, n = ({}, {})",
                        self.r, self.n1, self.n2
                    ),
                });
            }
        }
        if let FeatureDist::CorrelatedGaussian(rho) = self.feature_dist {
            if !(0.0..1.0).contains(&rho) {
                return Err(Error::Parse {
                    context: format!("correlation {rho} outside [0, 1)"),
                });
            }
        }
        Ok(())
    }
}

/// True embeddings the generator plants into the responses.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    pub u: DMatrix<f64>,
    pub v: DMatrix<f64>,
    pub support_u: Option<Vec<usize>>,
    pub support_v: Option<Vec<usize>>,
}

// Truth and samples come from separate ChaCha streams so the truth does
// not depend on m.
const TRUTH_STREAM: u64 = 1;
const SAMPLE_STREAM: u64 = 2;

fn truth_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(TRUTH_STREAM);
    rng
}

fn sample_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(SAMPLE_STREAM);
    rng
}

fn orthonormal_on_support(
    rng: &mut ChaCha8Rng,
    n: usize,
    r: usize,
    support: Option<&[usize]>,
) -> DMatrix<f64> {
    match support {
        None => DMatrix::from_fn(n, r, |_, _| rng.sample::<f64, _>(StandardNormal))
            .qr()
            .q(),
        Some(rows) => {
            let dense = DMatrix::from_fn(rows.len(), r, |_, _| rng.sample::<f64, _>(StandardNormal))
                .qr()
                .q();
            let mut out = DMatrix::zeros(n, r);
            for (local, &row) in rows.iter().enumerate() {
                for j in 0..r {
                    out[(row, j)] = dense[(local, j)];
                }
            }
            out
        }
    }
}

/// Draws orthonormal ground-truth embeddings, on planted row supports
/// when the spec asks for sparsity.
pub fn make_ground_truth(spec: &SyntheticSpec) -> Result<GroundTruth> {
    spec.validate()?;
    let mut rng = truth_rng(spec.seed);
    let (support_u, support_v) = match spec.sparsity {
        None => (None, None),
        Some((s1, s2)) => {
            let mut su = rand::seq::index::sample(&mut rng, spec.n1, s1).into_vec();
            su.sort_unstable();
            let mut sv = rand::seq::index::sample(&mut rng, spec.n2, s2).into_vec();
            sv.sort_unstable();
            (Some(su), Some(sv))
        }
    };
    let u = orthonormal_on_support(&mut rng, spec.n1, spec.r, support_u.as_deref());
    let v = orthonormal_on_support(&mut rng, spec.n2, spec.r, support_v.as_deref());
    Ok(GroundTruth {
        u,
        v,
        support_u,
        support_v,
    })
}

/// Generates a sample set from the spec and planted truth. Identical
/// `(spec, truth)` inputs give identical output.
///
/// Per sample the generator draws the coordinates of `a`, then `b`, then
/// the response randomness, so the correlated-Gaussian path with rho = 0
/// reproduces the independent Gaussian path exactly.
pub fn generate(spec: &SyntheticSpec, truth: &GroundTruth) -> Result<SampleSet> {
    spec.validate()?;
    if truth.u.shape() != (spec.n1, spec.r) || truth.v.shape() != (spec.n2, spec.r) {
        return Err(Error::dims(format!(
            "ground truth shapes {:?}, {:?} do not match spec ({}, {}, r = {})",
            truth.u.shape(),
            truth.v.shape(),
            spec.n1,
            spec.n2,
            spec.r
        )));
    }
    let mut rng = sample_rng(spec.seed);
    let uniform = Uniform::new(-(3.0f64).sqrt(), (3.0f64).sqrt()).expect("valid range");
    let poisson = Poisson::new(4.0).expect("valid rate");

    let mut a = DMatrix::zeros(spec.m, spec.n1);
    let mut b = DMatrix::zeros(spec.m, spec.n2);
    let mut y = DVector::zeros(spec.m);
    let matched = spec.n1.min(spec.n2);

    for i in 0..spec.m {
        match spec.feature_dist {
            FeatureDist::Gaussian => {
                for j in 0..spec.n1 {
                    a[(i, j)] = rng.sample(StandardNormal);
                }
                for k in 0..spec.n2 {
                    b[(i, k)] = rng.sample(StandardNormal);
                }
            }
            FeatureDist::Uniform => {
                for j in 0..spec.n1 {
                    a[(i, j)] = uniform.sample(&mut rng);
                }
                for k in 0..spec.n2 {
                    b[(i, k)] = uniform.sample(&mut rng);
                }
            }
            FeatureDist::Poisson => {
                for j in 0..spec.n1 {
                    a[(i, j)] = (poisson.sample(&mut rng) - 4.0) / 2.0;
                }
                for k in 0..spec.n2 {
                    b[(i, k)] = (poisson.sample(&mut rng) - 4.0) / 2.0;
                }
            }
            FeatureDist::CorrelatedGaussian(rho) => {
                let mix = (1.0 - rho * rho).sqrt();
                for j in 0..spec.n1 {
                    a[(i, j)] = rng.sample::<f64, _>(StandardNormal);
                }
                for k in 0..spec.n2 {
                    let g: f64 = rng.sample(StandardNormal);
                    b[(i, k)] = if k < matched { rho * a[(i, k)] + mix * g } else { g };
                }
            }
        }

        let a_emb = truth.u.tr_mul(&a.row(i).transpose());
        let b_emb = truth.v.tr_mul(&b.row(i).transpose());
        y[i] = match spec.model {
            Model::Bilinear => a_emb.dot(&b_emb) + rng.sample::<f64, _>(StandardNormal),
            Model::Rbf => {
                let mu = (-(&a_emb - &b_emb).norm_squared()).exp();
                assert!(mu > 0.0 && mu <= 1.0, "Bernoulli mean {mu} invalid");
                if rng.random::<f64>() < mu {
                    1.0
                } else {
                    0.0
                }
            }
        };
    }
    SampleSet::new(a, b, y)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_truth_is_orthogonal() {
        let spec = SyntheticSpec::new(Model::Bilinear, 5, 6, 5, 10, 1);
        let truth = make_ground_truth(&spec).unwrap();
        assert_eq!(truth.u.shape(), (5, 5));
        let gram = truth.u.transpose() * &truth.u;
        assert!((gram - DMatrix::identity(5, 5)).norm() <= 1e-10);
    }

    #[test]
    fn sparse_truth_has_planted_support() {
        let spec = SyntheticSpec::new(Model::Bilinear, 10, 12, 2, 10, 2).with_sparsity(3, 4);
        let truth = make_ground_truth(&spec).unwrap();
        let support = truth.support_u.as_ref().unwrap();
        assert_eq!(support.len(), 3);
        let mut nonzero_rows = 0;
        for i in 0..10 {
            let row_norm: f64 = truth.u.row(i).iter().map(|v| v * v).sum();
            if row_norm > 0.0 {
                nonzero_rows += 1;
                assert!(support.contains(&i));
            }
        }
        assert_eq!(nonzero_rows, 3);
        let gram = truth.u.transpose() * &truth.u;
        assert!((gram - DMatrix::identity(2, 2)).norm() <= 1e-10);
    }

    #[test]
    fn generation_is_deterministic() {
        let spec = SyntheticSpec::new(Model::Rbf, 6, 5, 2, 200, 33);
        let truth = make_ground_truth(&spec).unwrap();
        let one = generate(&spec, &truth).unwrap();
        let two = generate(&spec, &truth).unwrap();
        assert_eq!(one.a, two.a);
        assert_eq!(one.b, two.b);
        assert_eq!(one.y, two.y);
    }

    #[test]
    fn bilinear_responses_centered() {
        let spec = SyntheticSpec::new(Model::Bilinear, 6, 6, 2, 100_000, 4);
        let truth = make_ground_truth(&spec).unwrap();
        let set = generate(&spec, &truth).unwrap();
        let mean = set.y.sum() / set.m() as f64;
        assert!(mean.abs() <= 0.05, "mean {mean}");
    }

    #[test]
    fn rbf_responses_are_binary() {
        let spec = SyntheticSpec::new(Model::Rbf, 4, 4, 2, 2000, 5);
        let truth = make_ground_truth(&spec).unwrap();
        let set = generate(&spec, &truth).unwrap();
        assert!(set.y.iter().all(|&v| v == 0.0 || v == 1.0));
    }

    #[test]
    fn uniform_features_have_unit_variance() {
        let spec = SyntheticSpec::new(Model::Bilinear, 3, 3, 1, 100_000, 6)
            .with_dist(FeatureDist::Uniform);
        let truth = make_ground_truth(&spec).unwrap();
        let set = generate(&spec, &truth).unwrap();
        for j in 0..3 {
            let col = set.a.column(j);
            let mean = col.sum() / set.m() as f64;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / set.m() as f64;
            assert!((var - 1.0).abs() <= 0.05, "variance {var}");
            assert!(col.iter().all(|v| v.abs() <= 3.0f64.sqrt() + 1e-12));
        }
    }

    #[test]
    fn poisson_features_standardized() {
        let spec = SyntheticSpec::new(Model::Bilinear, 2, 2, 1, 100_000, 7)
            .with_dist(FeatureDist::Poisson);
        let truth = make_ground_truth(&spec).unwrap();
        let set = generate(&spec, &truth).unwrap();
        let col = set.a.column(0);
        let mean = col.sum() / set.m() as f64;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / set.m() as f64;
        assert!(mean.abs() <= 0.05);
        assert!((var - 1.0).abs() <= 0.05);
    }

    #[test]
    fn zero_correlation_matches_gaussian_path_exactly() {
        let gaussian = SyntheticSpec::new(Model::Bilinear, 5, 4, 2, 500, 8);
        let correlated = gaussian.clone().with_dist(FeatureDist::CorrelatedGaussian(0.0));
        let truth = make_ground_truth(&gaussian).unwrap();
        let g = generate(&gaussian, &truth).unwrap();
        let c = generate(&correlated, &truth).unwrap();
        assert_eq!(g.a, c.a);
        assert_eq!(g.b, c.b);
        assert_eq!(g.y, c.y);
    }

    #[test]
    fn matched_coordinates_are_correlated() {
        let spec = SyntheticSpec::new(Model::Bilinear, 3, 3, 1, 100_000, 9)
            .with_dist(FeatureDist::CorrelatedGaussian(0.2));
        let truth = make_ground_truth(&spec).unwrap();
        let set = generate(&spec, &truth).unwrap();
        let corr = {
            let (a0, b0) = (set.a.column(0), set.b.column(0));
            let dot: f64 = a0.iter().zip(b0.iter()).map(|(x, y)| x * y).sum();
            dot / set.m() as f64
        };
        assert!((corr - 0.2).abs() <= 0.05, "correlation {corr}");
    }

    #[test]
    fn trial_seeds_differ() {
        let spec = SyntheticSpec::new(Model::Bilinear, 4, 4, 2, 100, 10);
        assert_eq!(spec.for_trial(0).seed, 10);
        assert_ne!(spec.for_trial(3).seed, 10);
    }
}
