//! Support recovery for the feature-selecting estimator on planted
//! row-sparse models.

use jdr::sparse::{estimate_rank_sparsity, fit_sparse_jdr, SparsityBudget};
use jdr::synth::{generate, make_ground_truth, Model, SyntheticSpec};
use jdr::{build_proxy, WhitenedSampleSet};

#[test]
fn planted_supports_recovered_in_most_trials() {
    let trials = 20;
    let mut hits = 0;
    for trial in 0..trials {
        let spec = SyntheticSpec::new(Model::Bilinear, 30, 30, 2, 20_000, 500)
            .with_sparsity(3, 3)
            .for_trial(trial);
        let truth = make_ground_truth(&spec).unwrap();
        let set = generate(&spec, &truth).unwrap();
        let fitted = fit_sparse_jdr(&set, SparsityBudget::new(2, 3, 3)).unwrap();
        if &fitted.row_support_u == truth.support_u.as_ref().unwrap()
            && &fitted.row_support_v == truth.support_v.as_ref().unwrap()
        {
            hits += 1;
        }
    }
    assert!(hits >= 18, "supports recovered in only {hits}/{trials} trials");
}

#[test]
fn rank_and_sparsity_estimated_from_planted_model() {
    // Pick the first seed whose planted block has well-separated entries,
    // so the threshold eta = min planted |X^(j,k)| is meaningful.
    let mut chosen = None;
    for seed in 0..200u64 {
        let spec = SyntheticSpec::new(Model::Bilinear, 20, 20, 2, 100_000, seed).with_sparsity(3, 3);
        let truth = make_ground_truth(&spec).unwrap();
        let target = &truth.u * truth.v.transpose();
        let mut min_entry = f64::INFINITY;
        for &j in truth.support_u.as_ref().unwrap() {
            for &k in truth.support_v.as_ref().unwrap() {
                min_entry = min_entry.min(target[(j, k)].abs());
            }
        }
        if min_entry >= 0.1 {
            chosen = Some((spec, truth, min_entry));
            break;
        }
    }
    let (spec, truth, eta) = chosen.expect("some seed yields a well-separated planted block");

    let set = generate(&spec, &truth).unwrap();
    let proxy = build_proxy(&WhitenedSampleSet::from_raw(&set)).unwrap();
    let est = estimate_rank_sparsity(&proxy, eta).unwrap();
    assert_eq!(est.r_hat, 2, "rank estimate");
    assert_eq!(est.s1_hat, 3, "row sparsity estimate");
    assert_eq!(est.s2_hat, 3, "column sparsity estimate");

    let rows: std::collections::BTreeSet<usize> = est.support.iter().map(|&(j, _)| j).collect();
    let planted: std::collections::BTreeSet<usize> =
        truth.support_u.as_ref().unwrap().iter().copied().collect();
    assert_eq!(rows, planted);
}
