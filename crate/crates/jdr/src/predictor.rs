//! Dyadic score prediction: scaled embedded features plus Nadaraya-Watson
//! kernel regression over observed entity pairs.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::{whiten_a, whiten_b, NormalizationState};
use crate::error::{Error, Result};
use crate::estimator::EmbeddingPair;

/// A dyadic prediction problem: per-entity features on both sides,
/// observed score triples, and query pairs to score.
#[derive(Debug, Clone)]
pub struct DyadicDataset {
    /// One feature row per left-side entity (for example, diseases).
    pub a_features: DMatrix<f64>,
    /// One feature row per right-side entity (for example, genes).
    pub b_features: DMatrix<f64>,
    pub observed: Vec<(usize, usize, f64)>,
    pub queries: Vec<(usize, usize)>,
}

impl DyadicDataset {
    pub fn validate(&self) -> Result<()> {
        let (rows, cols) = (self.a_features.nrows(), self.b_features.nrows());
        for &(i, j, _) in &self.observed {
            if i >= rows || j >= cols {
                return Err(Error::IndexOutOfRange { i, j, rows, cols });
            }
        }
        for &(i, j) in &self.queries {
            if i >= rows || j >= cols {
                return Err(Error::IndexOutOfRange { i, j, rows, cols });
            }
        }
        Ok(())
    }
}

fn scale_columns_by_sqrt_sigma(projected: &mut DMatrix<f64>, sigma: &DVector<f64>) {
    for k in 0..projected.ncols() {
        let w = sigma[k].max(0.0).sqrt();
        for i in 0..projected.nrows() {
            projected[(i, k)] *= w;
        }
    }
}

/// Embeds A-side feature rows: whiten, project by the whitened left
/// singular vectors, and weight coordinate `k` by `sqrt(sigma_k)` so more
/// prominent directions count more.
pub fn embed_scaled_a(
    features: &DMatrix<f64>,
    emb: &EmbeddingPair,
    state: Option<&NormalizationState>,
) -> Result<DMatrix<f64>> {
    let whitened = match state {
        Some(st) => whiten_a(features, st)?,
        None => features.clone(),
    };
    if whitened.ncols() != emb.whitened_u.nrows() {
        return Err(Error::dims(format!(
            "features have {} columns, embedding expects {}",
            whitened.ncols(),
            emb.whitened_u.nrows()
        )));
    }
    let mut projected = &whitened * &emb.whitened_u;
    scale_columns_by_sqrt_sigma(&mut projected, &emb.sigma);
    Ok(projected)
}

/// B-side analogue of [`embed_scaled_a`].
pub fn embed_scaled_b(
    features: &DMatrix<f64>,
    emb: &EmbeddingPair,
    state: Option<&NormalizationState>,
) -> Result<DMatrix<f64>> {
    let whitened = match state {
        Some(st) => whiten_b(features, st)?,
        None => features.clone(),
    };
    if whitened.ncols() != emb.whitened_v.nrows() {
        return Err(Error::dims(format!(
            "features have {} columns, embedding expects {}",
            whitened.ncols(),
            emb.whitened_v.nrows()
        )));
    }
    let mut projected = &whitened * &emb.whitened_v;
    scale_columns_by_sqrt_sigma(&mut projected, &emb.sigma);
    Ok(projected)
}

/// Weight sums below this threshold fall back to the observed mean.
const WEIGHT_FLOOR: f64 = 1e-300;

/// Nadaraya-Watson predictor over embedded dyads with the product kernel
/// `exp(-||da||^2 / (2 h_d^2)) * exp(-||db||^2 / (2 h_g^2))`.
///
/// Predictions are clamped to the observed response range, which the
/// kernel average satisfies mathematically but floating-point rounding
/// can violate by ulps.
#[derive(Debug, Clone)]
pub struct KernelPredictor {
    a_emb: DMatrix<f64>,
    b_emb: DMatrix<f64>,
    h_d: f64,
    h_g: f64,
    fallback: f64,
    y_min: f64,
    y_max: f64,
    /// Distinct entity indices appearing in the observed triples.
    distinct_a: Vec<usize>,
    distinct_b: Vec<usize>,
    /// Observed triples re-indexed into the distinct lists, in input order.
    triples_local: Vec<(u32, u32, f64)>,
}

impl KernelPredictor {
    /// Builds a predictor over embedded features and observed triples.
    pub fn new(
        a_emb: DMatrix<f64>,
        b_emb: DMatrix<f64>,
        observed: &[(usize, usize, f64)],
        h_d: f64,
        h_g: f64,
    ) -> Result<Self> {
        if observed.is_empty() {
            return Err(Error::TooFewSamples { needed: 1, got: 0 });
        }
        if !(h_d > 0.0) {
            return Err(Error::NonPositiveValue { index: 0 });
        }
        if !(h_g > 0.0) {
            return Err(Error::NonPositiveValue { index: 1 });
        }
        let (rows, cols) = (a_emb.nrows(), b_emb.nrows());
        let mut map_a = std::collections::HashMap::new();
        let mut map_b = std::collections::HashMap::new();
        let mut distinct_a = Vec::new();
        let mut distinct_b = Vec::new();
        let mut triples_local = Vec::with_capacity(observed.len());
        let mut sum = 0.0;
        let mut y_min = f64::INFINITY;
        let mut y_max = f64::NEG_INFINITY;
        for &(i, j, y) in observed {
            if i >= rows || j >= cols {
                return Err(Error::IndexOutOfRange { i, j, rows, cols });
            }
            let ai = *map_a.entry(i).or_insert_with(|| {
                distinct_a.push(i);
                distinct_a.len() - 1
            });
            let bj = *map_b.entry(j).or_insert_with(|| {
                distinct_b.push(j);
                distinct_b.len() - 1
            });
            triples_local.push((ai as u32, bj as u32, y));
            sum += y;
            y_min = y_min.min(y);
            y_max = y_max.max(y);
        }
        Ok(KernelPredictor {
            a_emb,
            b_emb,
            h_d,
            h_g,
            fallback: sum / observed.len() as f64,
            y_min,
            y_max,
            distinct_a,
            distinct_b,
            triples_local,
        })
    }

    pub fn bandwidths(&self) -> (f64, f64) {
        (self.h_d, self.h_g)
    }

    fn kernel_row(
        emb: &DMatrix<f64>,
        query: usize,
        support: &[usize],
        bandwidth: f64,
    ) -> Vec<f64> {
        let denom = 2.0 * bandwidth * bandwidth;
        support
            .iter()
            .map(|&p| {
                let mut dist2 = 0.0;
                for k in 0..emb.ncols() {
                    let d = emb[(query, k)] - emb[(p, k)];
                    dist2 += d * d;
                }
                (-dist2 / denom).exp()
            })
            .collect()
    }

    /// Predicts the score of pair `(i, j)` as the kernel-weighted average
    /// of observed responses; falls back to the observed mean when the
    /// total weight underflows.
    pub fn predict(&self, i: usize, j: usize) -> Result<f64> {
        let (rows, cols) = (self.a_emb.nrows(), self.b_emb.nrows());
        if i >= rows || j >= cols {
            return Err(Error::IndexOutOfRange { i, j, rows, cols });
        }
        let ka = Self::kernel_row(&self.a_emb, i, &self.distinct_a, self.h_d);
        let kb = Self::kernel_row(&self.b_emb, j, &self.distinct_b, self.h_g);
        let mut numerator = 0.0;
        let mut denominator = 0.0;
        for &(ai, bj, y) in &self.triples_local {
            let w = ka[ai as usize] * kb[bj as usize];
            numerator += w * y;
            denominator += w;
        }
        if denominator < WEIGHT_FLOOR {
            return Ok(self.fallback);
        }
        Ok((numerator / denominator).clamp(self.y_min, self.y_max))
    }

    /// Batch prediction; exactly equivalent to calling [`predict`] per
    /// query.
    ///
    /// [`predict`]: KernelPredictor::predict
    pub fn predict_all(&self, queries: &[(usize, usize)]) -> Result<Vec<f64>> {
        queries.iter().map(|&(i, j)| self.predict(i, j)).collect()
    }
}

/// Median pairwise Euclidean distance over a seeded subsample of at most
/// 1000 rows; falls back to 1 when the median is not positive.
pub fn median_heuristic_bandwidth(features: &DMatrix<f64>, seed: u64) -> f64 {
    let m = features.nrows();
    if m < 2 {
        return 1.0;
    }
    let take = m.min(1000);
    let rows: Vec<usize> = if take == m {
        (0..m).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut idx = rand::seq::index::sample(&mut rng, m, take).into_vec();
        idx.sort_unstable();
        idx
    };
    let mut distances = Vec::with_capacity(take * (take - 1) / 2);
    for (p, &i) in rows.iter().enumerate() {
        for &j in rows.iter().skip(p + 1) {
            let mut dist2 = 0.0;
            for k in 0..features.ncols() {
                let d = features[(i, k)] - features[(j, k)];
                dist2 += d * d;
            }
            distances.push(dist2.sqrt());
        }
    }
    distances.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = if distances.len() % 2 == 1 {
        distances[distances.len() / 2]
    } else {
        0.5 * (distances[distances.len() / 2 - 1] + distances[distances.len() / 2])
    };
    if median > 0.0 {
        median
    } else {
        1.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn row_points(points: &[&[f64]]) -> DMatrix<f64> {
        DMatrix::from_fn(points.len(), points[0].len(), |i, j| points[i][j])
    }

    #[test]
    fn single_observation_reproduced_everywhere() {
        let a = row_points(&[&[0.0, 0.0], &[5.0, -1.0]]);
        let b = row_points(&[&[1.0], &[2.0], &[3.0]]);
        let kp = KernelPredictor::new(a, b, &[(1, 2, 4.25)], 0.3, 0.7).unwrap();
        for i in 0..2 {
            for j in 0..3 {
                assert_eq!(kp.predict(i, j).unwrap(), 4.25);
            }
        }
    }

    #[test]
    fn constant_responses_reproduced_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = DMatrix::from_fn(6, 3, |_, _| rng.sample::<f64, _>(StandardNormal));
        let b = DMatrix::from_fn(7, 3, |_, _| rng.sample::<f64, _>(StandardNormal));
        let observed: Vec<(usize, usize, f64)> =
            (0..6).flat_map(|i| (0..7).map(move |j| (i, j, 2.5))).collect();
        let kp = KernelPredictor::new(a, b, &observed, 1.0, 1.0).unwrap();
        for i in 0..6 {
            for j in 0..7 {
                assert_eq!(kp.predict(i, j).unwrap(), 2.5);
            }
        }
    }

    #[test]
    fn equidistant_pair_averages() {
        // Query at the midpoint of two observed dyads with y = 0 and 1.
        let a = row_points(&[&[-1.0], &[1.0], &[0.0]]);
        let b = row_points(&[&[-1.0], &[1.0], &[0.0]]);
        let kp = KernelPredictor::new(a, b, &[(0, 0, 0.0), (1, 1, 1.0)], 0.8, 0.8).unwrap();
        assert_eq!(kp.predict(2, 2).unwrap(), 0.5);
    }

    #[test]
    fn underflow_falls_back_to_mean() {
        let a = row_points(&[&[0.0], &[1e6]]);
        let b = row_points(&[&[0.0], &[1e6]]);
        let kp = KernelPredictor::new(a, b, &[(0, 0, 1.0), (0, 0, 3.0)], 1e-3, 1e-3).unwrap();
        assert_eq!(kp.predict(1, 1).unwrap(), 2.0);
    }

    #[test]
    fn shrinking_bandwidth_localizes() {
        let a = row_points(&[&[0.0], &[1.0], &[2.0]]);
        let b = row_points(&[&[0.0], &[1.0], &[2.0]]);
        let observed = [(0, 0, 1.0), (1, 1, 5.0), (2, 2, 9.0)];
        for &h in &[0.5, 0.2, 0.05] {
            let kp = KernelPredictor::new(a.clone(), b.clone(), &observed, h, h).unwrap();
            let at_obs = kp.predict(1, 1).unwrap();
            assert!((at_obs - 5.0).abs() <= (5.0f64) * h, "h = {h}: {at_obs}");
        }
    }

    #[test]
    fn predictions_bounded_by_observed_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = DMatrix::from_fn(20, 2, |_, _| rng.sample::<f64, _>(StandardNormal));
        let b = DMatrix::from_fn(25, 2, |_, _| rng.sample::<f64, _>(StandardNormal));
        let observed: Vec<(usize, usize, f64)> = (0..200)
            .map(|_| {
                (
                    rng.random_range(0..20),
                    rng.random_range(0..25),
                    rng.sample::<f64, _>(StandardNormal),
                )
            })
            .collect();
        let y_min = observed.iter().map(|t| t.2).fold(f64::INFINITY, f64::min);
        let y_max = observed.iter().map(|t| t.2).fold(f64::NEG_INFINITY, f64::max);
        let kp = KernelPredictor::new(a, b, &observed, 0.7, 0.9).unwrap();
        for _ in 0..200 {
            let (i, j) = (rng.random_range(0..20), rng.random_range(0..25));
            let pred = kp.predict(i, j).unwrap();
            assert!(pred >= y_min && pred <= y_max);
        }
    }

    #[test]
    fn prediction_invariant_to_triple_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = DMatrix::from_fn(10, 2, |_, _| rng.sample::<f64, _>(StandardNormal));
        let b = DMatrix::from_fn(10, 2, |_, _| rng.sample::<f64, _>(StandardNormal));
        let observed: Vec<(usize, usize, f64)> = (0..60)
            .map(|_| {
                (
                    rng.random_range(0..10),
                    rng.random_range(0..10),
                    rng.sample::<f64, _>(StandardNormal),
                )
            })
            .collect();
        let mut reversed = observed.clone();
        reversed.reverse();
        let kp1 = KernelPredictor::new(a.clone(), b.clone(), &observed, 0.6, 0.6).unwrap();
        let kp2 = KernelPredictor::new(a, b, &reversed, 0.6, 0.6).unwrap();
        for i in 0..10 {
            for j in 0..10 {
                let p1 = kp1.predict(i, j).unwrap();
                let p2 = kp2.predict(i, j).unwrap();
                assert!((p1 - p2).abs() <= 1e-12 * p1.abs().max(1.0));
            }
        }
    }

    #[test]
    fn batch_equals_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = DMatrix::from_fn(8, 2, |_, _| rng.sample::<f64, _>(StandardNormal));
        let b = DMatrix::from_fn(9, 2, |_, _| rng.sample::<f64, _>(StandardNormal));
        let observed: Vec<(usize, usize, f64)> = (0..30)
            .map(|_| {
                (
                    rng.random_range(0..8),
                    rng.random_range(0..9),
                    rng.sample::<f64, _>(StandardNormal),
                )
            })
            .collect();
        let kp = KernelPredictor::new(a, b, &observed, 0.5, 0.5).unwrap();
        let queries: Vec<(usize, usize)> = (0..8).flat_map(|i| (0..9).map(move |j| (i, j))).collect();
        let batch = kp.predict_all(&queries).unwrap();
        for (q, &(i, j)) in queries.iter().enumerate() {
            assert_eq!(batch[q], kp.predict(i, j).unwrap());
        }
        assert!(kp.predict_all(&[]).unwrap().is_empty());
    }

    #[test]
    fn rejects_bad_construction() {
        let a = row_points(&[&[0.0]]);
        let b = row_points(&[&[0.0]]);
        assert!(KernelPredictor::new(a.clone(), b.clone(), &[], 1.0, 1.0).is_err());
        assert!(KernelPredictor::new(a.clone(), b.clone(), &[(0, 0, 1.0)], 0.0, 1.0).is_err());
        assert!(KernelPredictor::new(a.clone(), b.clone(), &[(0, 1, 1.0)], 1.0, 1.0).is_err());
        let kp = KernelPredictor::new(a, b, &[(0, 0, 1.0)], 1.0, 1.0).unwrap();
        assert!(matches!(
            kp.predict(0, 5),
            Err(Error::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn median_bandwidth_examples() {
        let two = row_points(&[&[0.0, 0.0], &[2.0, 0.0]]);
        assert_eq!(median_heuristic_bandwidth(&two, 0), 2.0);

        let same = row_points(&[&[1.0], &[1.0], &[1.0]]);
        assert_eq!(median_heuristic_bandwidth(&same, 0), 1.0);
    }

    #[test]
    fn median_bandwidth_matches_chi_square_prediction() {
        // Pairwise squared distances of standard Gaussians in r dims are
        // 2 * chi^2_r; the median distance is close to sqrt(2r).
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = DMatrix::from_fn(10_000, 5, |_, _| rng.sample::<f64, _>(StandardNormal));
        let h = median_heuristic_bandwidth(&x, 42);
        let expected = (2.0f64 * 5.0).sqrt();
        assert!((h - expected).abs() <= 0.15 * expected, "h = {h}");
    }

    #[test]
    fn scaled_embedding_weights_coordinates() {
        let emb = EmbeddingPair {
            u: DMatrix::identity(3, 2),
            v: DMatrix::identity(2, 2),
            sigma: DVector::from_vec(vec![4.0, 1.0]),
            whitened_u: DMatrix::identity(3, 2),
            whitened_v: DMatrix::identity(2, 2),
        };
        let feats = row_points(&[&[1.0, 1.0, 9.0]]);
        let out = embed_scaled_a(&feats, &emb, None).unwrap();
        assert_relative_eq!(out[(0, 0)], 2.0);
        assert_relative_eq!(out[(0, 1)], 1.0);
    }

    #[test]
    fn unscaled_projection_preserves_in_span_norms() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let basis = DMatrix::from_fn(6, 2, |_, _| rng.sample::<f64, _>(StandardNormal))
            .qr()
            .q();
        let emb = EmbeddingPair {
            u: basis.clone(),
            v: basis.clone(),
            sigma: DVector::from_vec(vec![1.0, 1.0]),
            whitened_u: basis.clone(),
            whitened_v: basis.clone(),
        };
        // Rows lie exactly in span(U).
        let coeffs = DMatrix::from_fn(5, 2, |_, _| rng.sample::<f64, _>(StandardNormal));
        let feats = &coeffs * basis.transpose();
        let out = embed_scaled_a(&feats, &emb, None).unwrap();
        for i in 0..5 {
            let original: f64 = feats.row(i).norm();
            let embedded: f64 = out.row(i).norm();
            assert!((original - embedded).abs() <= 1e-8 * original.max(1.0));
        }
    }
}
