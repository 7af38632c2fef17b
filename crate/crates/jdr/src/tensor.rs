//! Third-order proxy tensors and HOSVD factor extraction for problems
//! with three feature types or vector responses.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::estimator::compact_svd;

/// Refuse dense tensors above this many entries.
pub const DEFAULT_ENTRY_BUDGET: usize = 100_000_000;

/// What each tensor mode represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeRole {
    FeatureA,
    FeatureB,
    FeatureC,
    Response,
}

/// Dense third-order tensor. Entry `(i, j, k)` is stored at
/// `i + d0 * (j + d1 * k)` (mode 0 fastest).
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    dims: [usize; 3],
    data: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(dims: [usize; 3]) -> Result<Self> {
        Self::zeros_with_budget(dims, DEFAULT_ENTRY_BUDGET)
    }

    pub fn zeros_with_budget(dims: [usize; 3], budget: usize) -> Result<Self> {
        if dims.iter().any(|&d| d == 0) {
            return Err(Error::dims("tensor dimensions must be at least 1"));
        }
        let entries = dims[0]
            .checked_mul(dims[1])
            .and_then(|p| p.checked_mul(dims[2]))
            .ok_or_else(|| Error::BudgetOutOfRange {
                context: "tensor size overflows".into(),
            })?;
        if entries > budget {
            return Err(Error::BudgetOutOfRange {
                context: format!("tensor with {entries} entries exceeds budget {budget}"),
            });
        }
        Ok(Tensor3 {
            dims,
            data: vec![0.0; entries],
        })
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    #[inline]
    fn offset(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[self.offset(i, j, k)]
    }

    pub fn set(&mut self, i: usize, j: usize, k: usize, value: f64) {
        let at = self.offset(i, j, k);
        self.data[at] = value;
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Mode-`mode` unfolding: an `n_mode x (product of the other dims)`
    /// matrix whose columns run over the remaining modes in increasing
    /// order, the smaller one fastest.
    pub fn unfold(&self, mode: usize) -> DMatrix<f64> {
        assert!(mode < 3, "mode must be 0, 1, or 2");
        let [d0, d1, d2] = self.dims;
        let (rows, others) = match mode {
            0 => (d0, [d1, d2]),
            1 => (d1, [d0, d2]),
            _ => (d2, [d0, d1]),
        };
        let mut out = DMatrix::zeros(rows, others[0] * others[1]);
        for k in 0..d2 {
            for j in 0..d1 {
                for i in 0..d0 {
                    let v = self.data[self.offset(i, j, k)];
                    let (row, col) = match mode {
                        0 => (i, j + d1 * k),
                        1 => (j, i + d0 * k),
                        _ => (k, i + d0 * j),
                    };
                    out[(row, col)] = v;
                }
            }
        }
        out
    }

    /// Inverse of [`unfold`]: rebuilds the tensor from a mode-`mode`
    /// unfolding.
    ///
    /// [`unfold`]: Tensor3::unfold
    pub fn fold(mat: &DMatrix<f64>, mode: usize, dims: [usize; 3]) -> Result<Self> {
        let mut out = Tensor3::zeros(dims)?;
        let [d0, d1, _] = dims;
        for k in 0..dims[2] {
            for j in 0..dims[1] {
                for i in 0..dims[0] {
                    let (row, col) = match mode {
                        0 => (i, j + d1 * k),
                        1 => (j, i + d0 * k),
                        _ => (k, i + d0 * j),
                    };
                    out.set(i, j, k, mat[(row, col)]);
                }
            }
        }
        Ok(out)
    }
}

/// Proxy tensor with per-mode role labels.
#[derive(Debug, Clone)]
pub struct ProxyTensor3 {
    pub tensor: Tensor3,
    pub mode_roles: [ModeRole; 3],
    pub m_used: usize,
}

fn copy_row(mat: &DMatrix<f64>, row: usize, buf: &mut Vec<f64>) {
    buf.clear();
    buf.extend((0..mat.ncols()).map(|j| mat[(row, j)]));
}

/// Builds the third-order proxy `T = (1/m) sum_i y_i a_i (x) b_i (x) c_i`.
pub fn build_proxy3(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    c: &DMatrix<f64>,
    y: &DVector<f64>,
) -> Result<ProxyTensor3> {
    let m = a.nrows();
    if m == 0 {
        return Err(Error::TooFewSamples { needed: 1, got: 0 });
    }
    if b.nrows() != m || c.nrows() != m || y.len() != m {
        return Err(Error::dims(format!(
            "feature/response row counts differ: {m}, {}, {}, {}",
            b.nrows(),
            c.nrows(),
            y.len()
        )));
    }
    let dims = [a.ncols(), b.ncols(), c.ncols()];
    let mut tensor = Tensor3::zeros(dims)?;
    let (mut ra, mut rb, mut rc) = (Vec::new(), Vec::new(), Vec::new());
    for i in 0..m {
        copy_row(a, i, &mut ra);
        copy_row(b, i, &mut rb);
        copy_row(c, i, &mut rc);
        let w = y[i];
        if w == 0.0 {
            continue;
        }
        for (k, &ck) in rc.iter().enumerate() {
            for (j, &bj) in rb.iter().enumerate() {
                let scale = w * bj * ck;
                let base = tensor.offset(0, j, k);
                for (idx, &aj) in ra.iter().enumerate() {
                    tensor.data[base + idx] += scale * aj;
                }
            }
        }
    }
    let inv_m = 1.0 / m as f64;
    for v in &mut tensor.data {
        *v *= inv_m;
    }
    Ok(ProxyTensor3 {
        tensor,
        mode_roles: [ModeRole::FeatureA, ModeRole::FeatureB, ModeRole::FeatureC],
        m_used: m,
    })
}

/// Proxy tensor for vector responses:
/// `T = (1/m) sum_i y_i (x) a_i (x) b_i`, with the response on mode 0.
pub fn build_proxy_multiresponse(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    responses: &DMatrix<f64>,
) -> Result<ProxyTensor3> {
    let m = a.nrows();
    if m == 0 {
        return Err(Error::TooFewSamples { needed: 1, got: 0 });
    }
    if b.nrows() != m || responses.nrows() != m {
        return Err(Error::dims(format!(
            "feature/response row counts differ: {m}, {}, {}",
            b.nrows(),
            responses.nrows()
        )));
    }
    let dims = [responses.ncols(), a.ncols(), b.ncols()];
    let mut tensor = Tensor3::zeros(dims)?;
    let (mut ry, mut ra, mut rb) = (Vec::new(), Vec::new(), Vec::new());
    for i in 0..m {
        copy_row(responses, i, &mut ry);
        copy_row(a, i, &mut ra);
        copy_row(b, i, &mut rb);
        for (k, &bk) in rb.iter().enumerate() {
            for (j, &aj) in ra.iter().enumerate() {
                let scale = aj * bk;
                let base = tensor.offset(0, j, k);
                for (idx, &yq) in ry.iter().enumerate() {
                    tensor.data[base + idx] += scale * yq;
                }
            }
        }
    }
    let inv_m = 1.0 / m as f64;
    for v in &mut tensor.data {
        *v *= inv_m;
    }
    Ok(ProxyTensor3 {
        tensor,
        mode_roles: [ModeRole::Response, ModeRole::FeatureA, ModeRole::FeatureB],
        m_used: m,
    })
}

/// Truncated HOSVD: for each requested mode, the top-`rank` left singular
/// vectors of that mode's unfolding. Pass `None` to skip a mode (for
/// example, a response mode).
pub fn hosvd_factors(
    proxy: &ProxyTensor3,
    ranks: &[Option<usize>; 3],
) -> Result<[Option<DMatrix<f64>>; 3]> {
    let dims = proxy.tensor.dims();
    let mut factors = [None, None, None];
    for mode in 0..3 {
        if let Some(rank) = ranks[mode] {
            if rank == 0 || rank > dims[mode] {
                return Err(Error::RankTooLarge {
                    rank,
                    n1: dims[mode],
                    n2: dims[mode],
                });
            }
            let unfolding = proxy.tensor.unfold(mode);
            let (factor, _, _) = compact_svd(&unfolding, rank);
            factors[mode] = Some(factor);
        }
    }
    Ok(factors)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{gram_deviation, subspace_distance};
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn gauss(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
        DMatrix::from_fn(r, c, |_, _| rng.sample(StandardNormal))
    }

    #[test]
    fn single_sample_single_entry() {
        let a = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let b = DMatrix::from_row_slice(1, 3, &[1.0, 0.0, 0.0]);
        let c = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let y = DVector::from_vec(vec![3.0]);
        let p = build_proxy3(&a, &b, &c, &y).unwrap();
        assert_eq!(p.tensor.get(0, 0, 0), 3.0);
        let total: f64 = (0..2)
            .flat_map(|i| (0..3).flat_map(move |j| (0..2).map(move |k| (i, j, k))))
            .map(|(i, j, k)| p.tensor.get(i, j, k).abs())
            .sum();
        assert_eq!(total, 3.0);
    }

    #[test]
    fn zero_responses_zero_tensor() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = gauss(&mut rng, 10, 3);
        let b = gauss(&mut rng, 10, 4);
        let c = gauss(&mut rng, 10, 2);
        let p = build_proxy3(&a, &b, &c, &DVector::zeros(10)).unwrap();
        assert_eq!(p.tensor.norm(), 0.0);
    }

    #[test]
    fn entries_match_scalar_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let m = 40;
        let a = gauss(&mut rng, m, 3);
        let b = gauss(&mut rng, m, 4);
        let c = gauss(&mut rng, m, 2);
        let y = DVector::from_fn(m, |_, _| rng.sample::<f64, _>(StandardNormal));
        let p = build_proxy3(&a, &b, &c, &y).unwrap();
        for j in 0..3 {
            for k in 0..4 {
                for l in 0..2 {
                    let expected: f64 = (0..m)
                        .map(|i| y[i] * a[(i, j)] * b[(i, k)] * c[(i, l)])
                        .sum::<f64>()
                        / m as f64;
                    let got = p.tensor.get(j, k, l);
                    assert!(
                        (got - expected).abs() <= 1e-12 * expected.abs().max(1.0),
                        "entry ({j},{k},{l}): {got} vs {expected}"
                    );
                }
            }
        }
    }

    #[test]
    fn multiresponse_single_column_matches_matrix_proxy() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = 60;
        let a = gauss(&mut rng, m, 4);
        let b = gauss(&mut rng, m, 3);
        let y = gauss(&mut rng, m, 1);
        let p = build_proxy_multiresponse(&a, &b, &y).unwrap();
        assert_eq!(p.mode_roles[0], ModeRole::Response);

        let set = crate::data::SampleSet::new(a.clone(), b.clone(), y.column(0).into_owned())
            .unwrap();
        let matrix_proxy =
            crate::estimator::build_proxy(&crate::data::WhitenedSampleSet::from_raw(&set))
                .unwrap();
        for j in 0..4 {
            for k in 0..3 {
                let t = p.tensor.get(0, j, k);
                let x = matrix_proxy.x0[(j, k)];
                assert!((t - x).abs() <= 1e-14 * x.abs().max(1.0));
            }
        }
    }

    #[test]
    fn one_hot_responses_partition_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let m = 50;
        let a = gauss(&mut rng, m, 3);
        let b = gauss(&mut rng, m, 3);
        // Column (i % 2) is 1, the other 0: two complementary subsamples.
        let responses = DMatrix::from_fn(m, 2, |i, q| if i % 2 == q { 1.0 } else { 0.0 });
        let p = build_proxy_multiresponse(&a, &b, &responses).unwrap();

        for q in 0..2 {
            let rows: Vec<usize> = (0..m).filter(|i| i % 2 == q).collect();
            let m_q = rows.len();
            let sub_a = DMatrix::from_fn(m_q, 3, |i, j| a[(rows[i], j)]);
            let sub_b = DMatrix::from_fn(m_q, 3, |i, j| b[(rows[i], j)]);
            let sub = crate::data::SampleSet::new(sub_a, sub_b, DVector::from_element(m_q, 1.0))
                .unwrap();
            let sub_proxy =
                crate::estimator::build_proxy(&crate::data::WhitenedSampleSet::from_raw(&sub))
                    .unwrap();
            let weight = m_q as f64 / m as f64;
            for j in 0..3 {
                for k in 0..3 {
                    let got = p.tensor.get(q, j, k);
                    let want = weight * sub_proxy.x0[(j, k)];
                    assert!((got - want).abs() <= 1e-12 * want.abs().max(1.0));
                }
            }
        }
    }

    #[test]
    fn unfold_shapes_and_refold_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut t = Tensor3::zeros([3, 4, 2]).unwrap();
        for k in 0..2 {
            for j in 0..4 {
                for i in 0..3 {
                    t.set(i, j, k, rng.sample(StandardNormal));
                }
            }
        }
        for mode in 0..3 {
            let unfolded = t.unfold(mode);
            let expected_rows = t.dims()[mode];
            let expected_cols = 24 / expected_rows;
            assert_eq!(unfolded.shape(), (expected_rows, expected_cols));
            let refolded = Tensor3::fold(&unfolded, mode, t.dims()).unwrap();
            assert_eq!(refolded, t);
        }
    }

    #[test]
    fn rank_one_tensor_factors() {
        let u = DVector::from_vec(vec![0.6, 0.8, 0.0]);
        let v = DVector::from_vec(vec![1.0, 0.0]).normalize();
        let w = DVector::from_vec(vec![0.0, 0.6, 0.8]);
        let mut t = Tensor3::zeros([3, 2, 3]).unwrap();
        for i in 0..3 {
            for j in 0..2 {
                for k in 0..3 {
                    t.set(i, j, k, 2.0 * u[i] * v[j] * w[k]);
                }
            }
        }
        let proxy = ProxyTensor3 {
            tensor: t,
            mode_roles: [ModeRole::FeatureA, ModeRole::FeatureB, ModeRole::FeatureC],
            m_used: 1,
        };
        let factors = hosvd_factors(&proxy, &[Some(1), Some(1), Some(1)]).unwrap();
        let vectors = [u, v, w];
        for mode in 0..3 {
            let factor = factors[mode].as_ref().unwrap();
            let truth = DMatrix::from_column_slice(vectors[mode].len(), 1, vectors[mode].as_slice());
            assert!(subspace_distance(&truth, factor).unwrap() <= 1e-8);
        }
    }

    #[test]
    fn three_feature_model_recovers_first_factor() {
        // y = a^T U V^T b * (w^T c): the mode-0 unfolding of E[T] has
        // column space span(U).
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let n = 8;
        let r = 2;
        let m = 1_000_000;
        let u = gauss(&mut rng, n, r).qr().q();
        let v = gauss(&mut rng, n, r).qr().q();
        let w = {
            let raw = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
            raw.normalize()
        };
        let a = gauss(&mut rng, m, n);
        let b = gauss(&mut rng, m, n);
        let c = gauss(&mut rng, m, n);
        let y = DVector::from_fn(m, |i, _| {
            let ua = u.tr_mul(&a.row(i).transpose());
            let vb = v.tr_mul(&b.row(i).transpose());
            let wc: f64 = (0..n).map(|j| w[j] * c[(i, j)]).sum();
            ua.dot(&vb) * wc
        });
        let proxy = build_proxy3(&a, &b, &c, &y).unwrap();
        let factors = hosvd_factors(&proxy, &[Some(r), None, None]).unwrap();
        let factor = factors[0].as_ref().unwrap();
        assert!(factors[1].is_none());
        let d = subspace_distance(&u, factor).unwrap();
        assert!(d <= 0.2, "distance {d}");
        assert!(gram_deviation(factor) <= 1e-8);
    }

    #[test]
    fn mode_permutation_permutes_factors() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let m = 300;
        let a = gauss(&mut rng, m, 4);
        let b = gauss(&mut rng, m, 5);
        let c = gauss(&mut rng, m, 3);
        let y = DVector::from_fn(m, |_, _| rng.sample::<f64, _>(StandardNormal));
        let direct = build_proxy3(&a, &b, &c, &y).unwrap();
        let swapped = build_proxy3(&b, &a, &c, &y).unwrap();
        let f_direct = hosvd_factors(&direct, &[Some(2), Some(2), Some(2)]).unwrap();
        let f_swapped = hosvd_factors(&swapped, &[Some(2), Some(2), Some(2)]).unwrap();
        let d01 = subspace_distance(
            f_direct[0].as_ref().unwrap(),
            f_swapped[1].as_ref().unwrap(),
        )
        .unwrap();
        let d10 = subspace_distance(
            f_direct[1].as_ref().unwrap(),
            f_swapped[0].as_ref().unwrap(),
        )
        .unwrap();
        let d22 = subspace_distance(
            f_direct[2].as_ref().unwrap(),
            f_swapped[2].as_ref().unwrap(),
        )
        .unwrap();
        assert!(d01 <= 1e-10 && d10 <= 1e-10 && d22 <= 1e-10);
    }

    #[test]
    fn entry_budget_enforced() {
        let err = Tensor3::zeros_with_budget([100, 100, 100], 500_000).unwrap_err();
        assert!(matches!(err, Error::BudgetOutOfRange { .. }));
        assert!(Tensor3::zeros_with_budget([10, 10, 10], 1000).is_ok());
    }

    #[test]
    fn hosvd_rejects_oversized_rank() {
        let proxy = ProxyTensor3 {
            tensor: Tensor3::zeros([2, 3, 2]).unwrap(),
            mode_roles: [ModeRole::FeatureA, ModeRole::FeatureB, ModeRole::FeatureC],
            m_used: 1,
        };
        assert!(hosvd_factors(&proxy, &[Some(3), None, None]).is_err());
    }
}
