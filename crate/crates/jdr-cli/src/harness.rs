//! Sweep execution: per-trial synthesis, fitting, NSEE scoring, and
//! log-log slope summaries.

use nalgebra::DMatrix;
use rayon::prelude::*;

use jdr::baselines::{fit_cphd, fit_pca, fit_phd};
use jdr::metrics::{fit_loglog_slope, nsee, subspace_distance, SlopeFit};
use jdr::sparse::{fit_sparse_jdr, SparsityBudget};
use jdr::synth::{generate, make_ground_truth, FeatureDist, GroundTruth, SyntheticSpec};
use jdr::{
    fit_fast_jdr, fit_jdr, fit_normalization_featurewise, whiten, Result, SampleSet,
};

use crate::plan::{sketch_seed, EstimatorKind, ExperimentPlan};

#[derive(Debug, Clone)]
pub struct TrialRow {
    pub parameter: usize,
    pub trial: u64,
    pub nsee: f64,
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub rows: Vec<TrialRow>,
    /// Mean NSEE per grid value, in grid order.
    pub means: Vec<(usize, f64)>,
    pub slope: SlopeFit,
}

/// NSEE of one fitted estimator against the planted truth. For cpHd the
/// reference subspace is the block-diagonal concatenation of U and V.
fn score(
    plan: &ExperimentPlan,
    spec: &SyntheticSpec,
    truth: &GroundTruth,
    set: &SampleSet,
) -> Result<f64> {
    let r = plan.r;
    match plan.estimator {
        EstimatorKind::Jdr => {
            let emb = fit_jdr(set, r, plan.normalize)?;
            nsee(&truth.u, &emb.u, &truth.v, &emb.v)
        }
        EstimatorKind::FastJdr => {
            let emb = fit_fast_jdr(set, r, sketch_seed(spec.seed))?;
            nsee(&truth.u, &emb.u, &truth.v, &emb.v)
        }
        EstimatorKind::SparseJdr => {
            let (s1, s2) = spec.sparsity.expect("sparse estimator needs planted sparsity");
            let fitted = fit_sparse_jdr(set, SparsityBudget::new(r, s1, s2))?;
            nsee(&truth.u, &fitted.base.u, &truth.v, &fitted.base.v)
        }
        EstimatorKind::Pca => {
            let (ua, _) = fit_pca(&set.a, r)?;
            let (ub, _) = fit_pca(&set.b, r)?;
            nsee(&truth.u, &ua, &truth.v, &ub)
        }
        EstimatorKind::Phd => {
            let state = fit_normalization_featurewise(set)?;
            let w = whiten(set, &state)?;
            let (ua, _) = fit_phd(&w.a_prime, &set.y, r)?;
            let (ub, _) = fit_phd(&w.b_prime, &set.y, r)?;
            nsee(&truth.u, &ua, &truth.v, &ub)
        }
        EstimatorKind::Cphd => {
            let (w_emb, _) = fit_cphd(set, r)?;
            let (n1, n2) = (set.n1(), set.n2());
            let mut block = DMatrix::zeros(n1 + n2, 2 * r);
            for j in 0..r {
                for i in 0..n1 {
                    block[(i, j)] = truth.u[(i, j)];
                }
                for i in 0..n2 {
                    block[(n1 + i, r + j)] = truth.v[(i, j)];
                }
            }
            let d = subspace_distance(&block, &w_emb)?;
            Ok(d / (2.0 * r as f64).sqrt())
        }
    }
}

fn run_one(plan: &ExperimentPlan, grid_index: usize, trial: u64) -> Result<f64> {
    let spec = plan
        .spec_for(plan.grid[grid_index], grid_index)
        .for_trial(trial);
    let truth = make_ground_truth(&spec)?;
    let set = generate(&spec, &truth)?;
    score(plan, &spec, &truth, &set)
}

/// Runs every (grid value, trial) cell, in parallel, and fits the
/// log-log slope of mean NSEE against the sweep variable. Output order
/// is (grid value, trial) regardless of scheduling.
pub fn run_experiment(plan: &ExperimentPlan) -> Result<ExperimentResult> {
    plan.validate()?;
    let tasks: Vec<(usize, u64)> = (0..plan.grid.len())
        .flat_map(|gi| (0..plan.trials).map(move |t| (gi, t)))
        .collect();
    let scores: Result<Vec<f64>> = tasks
        .par_iter()
        .map(|&(gi, t)| run_one(plan, gi, t))
        .collect();
    let scores = scores?;

    let mut rows = Vec::with_capacity(tasks.len());
    let mut means = Vec::with_capacity(plan.grid.len());
    for (gi, &parameter) in plan.grid.iter().enumerate() {
        let mut total = 0.0;
        for t in 0..plan.trials {
            let value = scores[gi * plan.trials as usize + t as usize];
            rows.push(TrialRow {
                parameter,
                trial: t,
                nsee: value,
            });
            total += value;
        }
        means.push((parameter, total / plan.trials as f64));
    }

    let xs: Vec<f64> = means.iter().map(|&(p, _)| p as f64).collect();
    let ys: Vec<f64> = means.iter().map(|&(_, v)| v).collect();
    let slope = fit_loglog_slope(&xs, &ys)?;
    Ok(ExperimentResult { rows, means, slope })
}

#[derive(Debug, Clone)]
pub struct RobustnessResult {
    pub baseline: ExperimentResult,
    pub variant: ExperimentResult,
    pub slope_difference: f64,
}

/// Runs the same sweep under Gaussian features and under one violated
/// assumption, reporting both slopes.
pub fn run_robustness(plan: &ExperimentPlan, variant: FeatureDist) -> Result<RobustnessResult> {
    let mut baseline_plan = plan.clone();
    baseline_plan.dist = FeatureDist::Gaussian;
    let mut variant_plan = plan.clone();
    variant_plan.dist = variant;

    let baseline = run_experiment(&baseline_plan)?;
    let variant = run_experiment(&variant_plan)?;
    let slope_difference = (variant.slope.slope - baseline.slope.slope).abs();
    Ok(RobustnessResult {
        baseline,
        variant,
        slope_difference,
    })
}
