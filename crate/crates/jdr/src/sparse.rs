//! Hard-thresholding projections and embedding estimation with feature
//! selection.
//!
//! The feasible sets bound per-column sparsity (omega1), the number of
//! nonzero columns (omega2), and the number of nonzero rows (omega3).
//! The sequential composition of the three projections followed by a
//! compact SVD yields row-sparse embeddings; the exact joint projection
//! is NP-hard in general.

use nalgebra::{DMatrix, DVector};

use crate::data::{SampleSet, WhitenedSampleSet};
use crate::error::{Error, Result};
use crate::estimator::{build_proxy, compact_svd, spectrum, EmbeddingPair, ProxyMatrix};

/// Rank and row/column sparsity budget for the selecting estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SparsityBudget {
    pub r: usize,
    pub s1: usize,
    pub s2: usize,
}

impl SparsityBudget {
    pub fn new(r: usize, s1: usize, s2: usize) -> Self {
        SparsityBudget { r, s1, s2 }
    }

    pub fn validate(&self, n1: usize, n2: usize) -> Result<()> {
        if self.r == 0 || self.r >= n1 || self.r >= n2 {
            return Err(Error::RankTooLarge {
                rank: self.r,
                n1,
                n2,
            });
        }
        if self.s1 < self.r || self.s1 > n1 || self.s2 < self.r || self.s2 > n2 {
            return Err(Error::BudgetOutOfRange {
                context: format!(
                    "need r <= s1 <= n1 and r <= s2 <= n2, got r = {}, s1 = {}, s2 = {}, n1 = {n1}, n2 = {n2}",
                    self.r, self.s1, self.s2
                ),
            });
        }
        Ok(())
    }
}

/// Embeddings with at most `s1` nonzero rows in `U` and `s2` in `V`.
#[derive(Debug, Clone)]
pub struct SparseEmbeddingPair {
    pub base: EmbeddingPair,
    pub row_support_u: Vec<usize>,
    pub row_support_v: Vec<usize>,
}

/// Indices of the `k` largest values, ties broken toward the smaller
/// index. Returned sorted ascending.
fn top_k_indices(values: &[f64], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[j].partial_cmp(&values[i]).unwrap().then(i.cmp(&j)));
    let mut keep: Vec<usize> = order.into_iter().take(k).collect();
    keep.sort_unstable();
    keep
}

/// Keeps the `s1` largest-magnitude entries of each column, zeroing the
/// rest.
pub fn project_omega1(x: &DMatrix<f64>, s1: usize) -> Result<DMatrix<f64>> {
    let n1 = x.nrows();
    if s1 == 0 || s1 > n1 {
        return Err(Error::BudgetOutOfRange {
            context: format!("s1 = {s1} not in [1, {n1}]"),
        });
    }
    let mut out = DMatrix::zeros(n1, x.ncols());
    for k in 0..x.ncols() {
        let magnitudes: Vec<f64> = x.column(k).iter().map(|v| v.abs()).collect();
        for i in top_k_indices(&magnitudes, s1) {
            out[(i, k)] = x[(i, k)];
        }
    }
    Ok(out)
}

/// Keeps the `s2` columns of largest Euclidean norm, zeroing the rest.
pub fn project_omega2(x: &DMatrix<f64>, s2: usize) -> Result<DMatrix<f64>> {
    let n2 = x.ncols();
    if s2 == 0 || s2 > n2 {
        return Err(Error::BudgetOutOfRange {
            context: format!("s2 = {s2} not in [1, {n2}]"),
        });
    }
    let norms: Vec<f64> = (0..n2).map(|k| x.column(k).norm()).collect();
    let mut out = DMatrix::zeros(x.nrows(), n2);
    for k in top_k_indices(&norms, s2) {
        out.set_column(k, &x.column(k));
    }
    Ok(out)
}

/// Keeps the `s1` rows of largest Euclidean norm, zeroing the rest.
pub fn project_omega3(x: &DMatrix<f64>, s1: usize) -> Result<DMatrix<f64>> {
    let n1 = x.nrows();
    if s1 == 0 || s1 > n1 {
        return Err(Error::BudgetOutOfRange {
            context: format!("s1 = {s1} not in [1, {n1}]"),
        });
    }
    let norms: Vec<f64> = (0..n1).map(|i| x.row(i).norm()).collect();
    let mut out = DMatrix::zeros(n1, x.ncols());
    for i in top_k_indices(&norms, s1) {
        out.set_row(i, &x.row(i));
    }
    Ok(out)
}

fn nonzero_rows(x: &DMatrix<f64>) -> Vec<usize> {
    (0..x.nrows())
        .filter(|&i| x.row(i).iter().any(|&v| v != 0.0))
        .collect()
}

fn nonzero_cols(x: &DMatrix<f64>) -> Vec<usize> {
    (0..x.ncols())
        .filter(|&k| x.column(k).iter().any(|&v| v != 0.0))
        .collect()
}

/// Pads an index set with the smallest unused indices until it has at
/// least `min_len` members (used when the projected proxy has fewer
/// nonzero rows/columns than the rank requires).
fn pad_support(mut support: Vec<usize>, min_len: usize, n: usize) -> Vec<usize> {
    let mut candidate = 0;
    while support.len() < min_len && candidate < n {
        if !support.contains(&candidate) {
            support.push(candidate);
        }
        candidate += 1;
    }
    support.sort_unstable();
    support
}

/// Embedding estimation with feature selection: sequential projections
/// onto the three sparsity sets, then a compact rank-`r` SVD. Consumes
/// raw (unnormalized) samples.
pub fn fit_sparse_jdr(set: &SampleSet, budget: SparsityBudget) -> Result<SparseEmbeddingPair> {
    budget.validate(set.n1(), set.n2())?;
    let proxy = build_proxy(&WhitenedSampleSet::from_raw(set))?;
    let x1 = project_omega1(&proxy.x0, budget.s1)?;
    let x2 = project_omega2(&x1, budget.s2)?;
    let x3 = project_omega3(&x2, budget.s1)?;

    let rows = pad_support(nonzero_rows(&x3), budget.r, set.n1());
    let cols = pad_support(nonzero_cols(&x3), budget.r, set.n2());

    // SVD of the dense submatrix keeps the singular vectors supported on
    // the selected rows/columns even when the rank is deficient.
    let sub = DMatrix::from_fn(rows.len(), cols.len(), |i, j| x3[(rows[i], cols[j])]);
    let (u_sub, sigma, v_sub) = compact_svd(&sub, budget.r);

    let mut u = DMatrix::zeros(set.n1(), budget.r);
    for (local, &row) in rows.iter().enumerate() {
        for j in 0..budget.r {
            u[(row, j)] = u_sub[(local, j)];
        }
    }
    let mut v = DMatrix::zeros(set.n2(), budget.r);
    for (local, &col) in cols.iter().enumerate() {
        for j in 0..budget.r {
            v[(col, j)] = v_sub[(local, j)];
        }
    }

    Ok(SparseEmbeddingPair {
        base: EmbeddingPair {
            u: u.clone(),
            v: v.clone(),
            sigma,
            whitened_u: u,
            whitened_v: v,
        },
        row_support_u: rows,
        row_support_v: cols,
    })
}

/// Rank and sparsity read off the proxy by thresholding at `eta / 2`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankSparsityEstimate {
    pub r_hat: usize,
    pub s1_hat: usize,
    pub s2_hat: usize,
    /// Entries with `|X0| > eta / 2`, in row-major order.
    pub support: Vec<(usize, usize)>,
}

/// Estimates rank and row/column sparsity from the proxy spectrum and
/// entries.
pub fn estimate_rank_sparsity(p: &ProxyMatrix, eta: f64) -> Result<RankSparsityEstimate> {
    if !(eta > 0.0) {
        return Err(Error::NonPositiveValue { index: 0 });
    }
    let threshold = eta / 2.0;
    let sigma: DVector<f64> = spectrum(p);
    let r_hat = sigma.iter().filter(|&&s| s > threshold).count();

    let mut support = Vec::new();
    let mut rows = std::collections::BTreeSet::new();
    let mut cols = std::collections::BTreeSet::new();
    for j in 0..p.x0.nrows() {
        for k in 0..p.x0.ncols() {
            if p.x0[(j, k)].abs() > threshold {
                support.push((j, k));
                rows.insert(j);
                cols.insert(k);
            }
        }
    }
    Ok(RankSparsityEstimate {
        r_hat,
        s1_hat: rows.len(),
        s2_hat: cols.len(),
        support,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Normalize;
    use crate::estimator::fit_jdr;
    use crate::metrics::subspace_distance;
    use crate::synth::{make_ground_truth, Model, SyntheticSpec};
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn omega1_keeps_largest_column_entries() {
        let x = DMatrix::from_row_slice(3, 2, &[3.0, 1.0, 2.0, 5.0, -4.0, 2.0]);
        let got = project_omega1(&x, 2).unwrap();
        let want = DMatrix::from_row_slice(3, 2, &[3.0, 0.0, 0.0, 5.0, -4.0, 2.0]);
        assert_eq!(got, want);
    }

    #[test]
    fn omega1_full_budget_is_identity() {
        let x = DMatrix::from_row_slice(3, 2, &[3.0, 1.0, 2.0, 5.0, -4.0, 2.0]);
        assert_eq!(project_omega1(&x, 3).unwrap(), x);
    }

    #[test]
    fn omega1_ties_prefer_smaller_row() {
        let x = DMatrix::from_column_slice(3, 1, &[1.0, 1.0, 0.0]);
        let got = project_omega1(&x, 1).unwrap();
        assert_eq!(got, DMatrix::from_column_slice(3, 1, &[1.0, 0.0, 0.0]));
    }

    #[test]
    fn omega2_keeps_largest_columns() {
        let x = DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 3.0, 0.0, 2.0, 0.0]);
        let got = project_omega2(&x, 1).unwrap();
        let want = DMatrix::from_row_slice(2, 3, &[0.0, 0.0, 3.0, 0.0, 0.0, 0.0]);
        assert_eq!(got, want);
    }

    #[test]
    fn omega2_zero_matrix_stays_zero() {
        let x = DMatrix::<f64>::zeros(3, 3);
        assert_eq!(project_omega2(&x, 2).unwrap(), x);
    }

    #[test]
    fn omega3_keeps_largest_rows() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 2.0, 3.0, 0.0]);
        let got = project_omega3(&x, 1).unwrap();
        let want = DMatrix::from_row_slice(3, 2, &[0.0, 0.0, 0.0, 0.0, 3.0, 0.0]);
        assert_eq!(got, want);
    }

    #[test]
    fn omega3_already_feasible_unchanged() {
        let x = DMatrix::from_row_slice(3, 2, &[0.0, 0.0, 4.0, 5.0, 0.0, 0.0]);
        assert_eq!(project_omega3(&x, 1).unwrap(), x);
    }

    #[test]
    fn budget_validation() {
        assert!(matches!(
            SparsityBudget::new(3, 3, 3).validate(3, 5),
            Err(Error::RankTooLarge { .. })
        ));
        assert!(matches!(
            SparsityBudget::new(2, 1, 3).validate(5, 5),
            Err(Error::BudgetOutOfRange { .. })
        ));
        assert!(SparsityBudget::new(2, 3, 4).validate(5, 5).is_ok());
    }

    #[test]
    fn projections_are_idempotent() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let x = DMatrix::from_fn(4, 4, |_, _| rng.sample::<f64, _>(StandardNormal));
            for s in 1..=4 {
                let p1 = project_omega1(&x, s).unwrap();
                assert_eq!(project_omega1(&p1, s).unwrap(), p1);
                let p2 = project_omega2(&x, s).unwrap();
                assert_eq!(project_omega2(&p2, s).unwrap(), p2);
                let p3 = project_omega3(&x, s).unwrap();
                assert_eq!(project_omega3(&p3, s).unwrap(), p3);
            }
        }
    }

    #[test]
    fn full_budget_matches_plain_estimator() {
        let spec = SyntheticSpec::new(Model::Bilinear, 8, 7, 2, 1500, 11);
        let truth = make_ground_truth(&spec).unwrap();
        let set = crate::synth::generate(&spec, &truth).unwrap();
        let plain = fit_jdr(&set, 2, Normalize::None).unwrap();
        let sparse = fit_sparse_jdr(&set, SparsityBudget::new(2, 8, 7)).unwrap();
        let du = subspace_distance(&plain.whitened_u, &sparse.base.whitened_u).unwrap();
        let dv = subspace_distance(&plain.whitened_v, &sparse.base.whitened_v).unwrap();
        assert!(du <= 1e-8 && dv <= 1e-8, "du {du}, dv {dv}");
    }

    #[test]
    fn sparse_outputs_respect_budget() {
        let spec = SyntheticSpec::new(Model::Bilinear, 12, 10, 2, 800, 13).with_sparsity(4, 3);
        let truth = make_ground_truth(&spec).unwrap();
        let set = crate::synth::generate(&spec, &truth).unwrap();
        let fitted = fit_sparse_jdr(&set, SparsityBudget::new(2, 4, 3)).unwrap();
        assert!(fitted.row_support_u.len() <= 4);
        assert!(fitted.row_support_v.len() <= 3);
        for i in 0..12 {
            if !fitted.row_support_u.contains(&i) {
                assert!(fitted.base.u.row(i).iter().all(|&v| v == 0.0));
            }
        }
        for j in 0..10 {
            if !fitted.row_support_v.contains(&j) {
                assert!(fitted.base.v.row(j).iter().all(|&v| v == 0.0));
            }
        }
        // Orthonormal columns even on a restricted support.
        assert!(crate::metrics::gram_deviation(&fitted.base.whitened_u) <= 1e-8);
    }

    #[test]
    fn zero_responses_still_produce_valid_sparse_pair() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let a = DMatrix::from_fn(40, 6, |_, _| rng.sample::<f64, _>(StandardNormal));
        let b = DMatrix::from_fn(40, 5, |_, _| rng.sample::<f64, _>(StandardNormal));
        let set = SampleSet::new(a, b, DVector::zeros(40)).unwrap();
        let fitted = fit_sparse_jdr(&set, SparsityBudget::new(2, 3, 3)).unwrap();
        assert!(fitted.base.sigma.iter().all(|&s| s == 0.0));
        assert!(crate::metrics::gram_deviation(&fitted.base.whitened_u) <= 1e-8);
        assert!(fitted.row_support_u.len() <= 3);
    }

    #[test]
    fn rank_estimate_thresholds_spectrum() {
        let x0 = DMatrix::from_partial_diagonal(3, 3, &[3.0, 1.0, 0.01]);
        let p = ProxyMatrix { x0, m_used: 1 };
        let est = estimate_rank_sparsity(&p, 1.0).unwrap();
        assert_eq!(est.r_hat, 2);
        assert_eq!(est.s1_hat, 2);
        assert_eq!(est.s2_hat, 2);
        assert_eq!(est.support, vec![(0, 0), (1, 1)]);
    }

    #[test]
    fn rank_estimate_of_zero_matrix() {
        let p = ProxyMatrix {
            x0: DMatrix::zeros(4, 3),
            m_used: 1,
        };
        let est = estimate_rank_sparsity(&p, 0.5).unwrap();
        assert_eq!((est.r_hat, est.s1_hat, est.s2_hat), (0, 0, 0));
        assert!(est.support.is_empty());
    }

    #[test]
    fn rank_estimate_rejects_nonpositive_eta() {
        let p = ProxyMatrix {
            x0: DMatrix::zeros(2, 2),
            m_used: 1,
        };
        assert!(estimate_rank_sparsity(&p, 0.0).is_err());
    }
}
