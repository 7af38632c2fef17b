//! Link functions where one method succeeds and the other fails: the
//! proxy estimator needs a link that is odd in both arguments, pHd needs
//! an even one.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use jdr::baselines::fit_phd;
use jdr::metrics::nsee;
use jdr::synth::{make_ground_truth, GroundTruth, Model, SyntheticSpec};
use jdr::{fit_jdr, fit_normalization_featurewise, whiten, Normalize, Result, SampleSet};

use crate::plan::grid_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathLink {
    /// `f(a_bar, b_bar) = sum_j a_bar_j b_bar_j`, odd in both arguments.
    Odd,
    /// `f(a_bar, b_bar) = sum_j a_bar_j^2 b_bar_j^2`, even in both.
    Even,
}

impl PathLink {
    pub fn name(&self) -> &'static str {
        match self {
            PathLink::Odd => "odd",
            PathLink::Even => "even",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathMethod {
    Jdr,
    Phd,
}

impl PathMethod {
    pub fn name(&self) -> &'static str {
        match self {
            PathMethod::Jdr => "jdr",
            PathMethod::Phd => "phd",
        }
    }
}

#[derive(Debug, Clone)]
pub struct PathologyConfig {
    pub n: usize,
    pub r: usize,
    pub grid: Vec<usize>,
    pub trials: u64,
    pub seed: u64,
}

impl Default for PathologyConfig {
    fn default() -> Self {
        PathologyConfig {
            n: 30,
            r: 5,
            grid: vec![1000, 2500, 5000, 10000],
            trials: 10,
            seed: 7,
        }
    }
}

/// One (link, method) sweep: mean NSEE per grid value plus the value at
/// the largest m.
#[derive(Debug, Clone)]
pub struct PathologyCell {
    pub link: PathLink,
    pub method: PathMethod,
    pub means: Vec<(usize, f64)>,
    pub final_nsee: f64,
}

fn generate_pathology(
    link: PathLink,
    truth: &GroundTruth,
    n: usize,
    m: usize,
    seed: u64,
) -> Result<SampleSet> {
    // Stream 3 keeps pathology draws disjoint from the synth module's
    // truth (1) and sample (2) streams.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(3);
    let mut a = DMatrix::zeros(m, n);
    let mut b = DMatrix::zeros(m, n);
    let mut y = DVector::zeros(m);
    for i in 0..m {
        for j in 0..n {
            a[(i, j)] = rng.sample(StandardNormal);
        }
        for j in 0..n {
            b[(i, j)] = rng.sample(StandardNormal);
        }
        let a_bar = truth.u.tr_mul(&a.row(i).transpose());
        let b_bar = truth.v.tr_mul(&b.row(i).transpose());
        y[i] = match link {
            PathLink::Odd => a_bar.dot(&b_bar),
            PathLink::Even => a_bar
                .iter()
                .zip(b_bar.iter())
                .map(|(x, z)| x * x * z * z)
                .sum(),
        };
    }
    SampleSet::new(a, b, y)
}

fn run_cell(cfg: &PathologyConfig, link: PathLink, method: PathMethod) -> Result<PathologyCell> {
    let scores: Result<Vec<Vec<f64>>> = cfg
        .grid
        .par_iter()
        .enumerate()
        .map(|(gi, &m)| {
            (0..cfg.trials)
                .map(|trial| {
                    // Reuse the synth module's truth stream; only the
                    // responses differ from the standard models.
                    let spec = SyntheticSpec::new(
                        Model::Bilinear,
                        cfg.n,
                        cfg.n,
                        cfg.r,
                        m,
                        grid_seed(cfg.seed, gi) ^ trial,
                    );
                    let truth = make_ground_truth(&spec)?;
                    let set = generate_pathology(link, &truth, cfg.n, m, spec.seed)?;
                    match method {
                        PathMethod::Jdr => {
                            let emb = fit_jdr(&set, cfg.r, Normalize::None)?;
                            nsee(&truth.u, &emb.whitened_u, &truth.v, &emb.whitened_v)
                        }
                        PathMethod::Phd => {
                            let state = fit_normalization_featurewise(&set)?;
                            let w = whiten(&set, &state)?;
                            let (ua, _) = fit_phd(&w.a_prime, &set.y, cfg.r)?;
                            let (ub, _) = fit_phd(&w.b_prime, &set.y, cfg.r)?;
                            nsee(&truth.u, &ua, &truth.v, &ub)
                        }
                    }
                })
                .collect()
        })
        .collect();
    let scores = scores?;
    let means: Vec<(usize, f64)> = cfg
        .grid
        .iter()
        .zip(scores.iter())
        .map(|(&m, trials)| (m, trials.iter().sum::<f64>() / trials.len() as f64))
        .collect();
    let final_nsee = means.last().expect("grid nonempty").1;
    Ok(PathologyCell {
        link,
        method,
        means,
        final_nsee,
    })
}

/// Runs both methods on both links, sweeping m.
pub fn run_pathology(cfg: &PathologyConfig) -> Result<Vec<PathologyCell>> {
    let mut cells = Vec::with_capacity(4);
    for link in [PathLink::Odd, PathLink::Even] {
        for method in [PathMethod::Jdr, PathMethod::Phd] {
            cells.push(run_cell(cfg, link, method)?);
        }
    }
    Ok(cells)
}
