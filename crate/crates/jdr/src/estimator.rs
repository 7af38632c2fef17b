//! Proxy-matrix construction and embedding estimation.
//!
//! The proxy `X0 = (1/m) sum_i a_i' y_i' b_i'^T` concentrates around
//! `U Q V^T`, so its top singular subspaces estimate the true embedding
//! spans. The exact path takes a compact SVD of `X0`; the fast path
//! sketches the rank-1 sum with a Gaussian test matrix and never forms
//! `X0`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::data::{
    fit_normalization_featurewise, fit_normalization_full, unwhiten_embeddings, whiten, Normalize,
    SampleSet, WhitenedSampleSet, DEFAULT_JITTER_FLOOR,
};
use crate::error::{Error, Result};

/// The empirical embedding proxy matrix.
#[derive(Debug, Clone)]
pub struct ProxyMatrix {
    pub x0: DMatrix<f64>,
    pub m_used: usize,
}

/// Estimated embeddings. `whitened_u`/`whitened_v` are the orthonormal
/// singular vectors of the proxy; `u`/`v` are mapped back to the original
/// feature coordinates (equal to the whitened ones when normalization is
/// off).
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingPair {
    pub u: DMatrix<f64>,
    pub v: DMatrix<f64>,
    /// Top singular values of the proxy, nonincreasing.
    pub sigma: DVector<f64>,
    pub whitened_u: DMatrix<f64>,
    pub whitened_v: DMatrix<f64>,
}

impl EmbeddingPair {
    pub fn rank(&self) -> usize {
        self.sigma.len()
    }
}

/// Scales row `i` of `mat` by `weights[i] / denom`.
fn scale_rows(mat: &DMatrix<f64>, weights: &DVector<f64>, denom: f64) -> DMatrix<f64> {
    let mut out = mat.clone();
    for j in 0..out.ncols() {
        for i in 0..out.nrows() {
            out[(i, j)] *= weights[i] / denom;
        }
    }
    out
}

/// Builds `X0 = (1/m) sum_i a_i' y_i' b_i'^T`, accumulating the rank-1
/// terms in sample order without storing them individually.
pub fn build_proxy(w: &WhitenedSampleSet) -> Result<ProxyMatrix> {
    let m = w.m();
    if m == 0 {
        return Err(Error::TooFewSamples { needed: 1, got: 0 });
    }
    if w.b_prime.nrows() != m || w.y_prime.len() != m {
        return Err(Error::dims(format!(
            "A' has {} rows, B' has {}, y' has {}",
            m,
            w.b_prime.nrows(),
            w.y_prime.len()
        )));
    }
    let weighted_b = scale_rows(&w.b_prime, &w.y_prime, m as f64);
    let mut x0 = DMatrix::zeros(w.a_prime.ncols(), w.b_prime.ncols());
    x0.gemm_tr(1.0, &w.a_prime, &weighted_b, 0.0);
    Ok(ProxyMatrix { x0, m_used: m })
}

/// Full singular value spectrum of the proxy, nonincreasing.
pub fn spectrum(p: &ProxyMatrix) -> DVector<f64> {
    let mut vals: Vec<f64> = p
        .x0
        .clone()
        .svd(false, false)
        .singular_values
        .iter()
        .copied()
        .collect();
    vals.sort_by(|a, b| b.partial_cmp(a).unwrap());
    DVector::from_vec(vals)
}

/// Compact rank-`r` SVD with deterministic ordering and sign convention:
/// singular values nonincreasing, and each left singular vector has its
/// largest-magnitude entry positive (ties to the smallest row index).
pub(crate) fn compact_svd(
    mat: &DMatrix<f64>,
    r: usize,
) -> (DMatrix<f64>, DVector<f64>, DMatrix<f64>) {
    let svd = mat.clone().svd(true, true);
    let u_full = svd.u.expect("svd requested u");
    let v_t = svd.v_t.expect("svd requested v_t");
    let s = &svd.singular_values;

    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&i, &j| s[j].partial_cmp(&s[i]).unwrap().then(i.cmp(&j)));

    let n1 = u_full.nrows();
    let n2 = v_t.ncols();
    let mut u = DMatrix::zeros(n1, r);
    let mut v = DMatrix::zeros(n2, r);
    let mut sigma = DVector::zeros(r);
    for (col, &k) in order.iter().take(r).enumerate() {
        sigma[col] = s[k];
        let mut flip = 1.0;
        let mut best = 0.0;
        for i in 0..n1 {
            let val = u_full[(i, k)].abs();
            if val > best {
                best = val;
                flip = if u_full[(i, k)] < 0.0 { -1.0 } else { 1.0 };
            }
        }
        for i in 0..n1 {
            u[(i, col)] = flip * u_full[(i, k)];
        }
        for j in 0..n2 {
            v[(j, col)] = flip * v_t[(k, j)];
        }
    }
    (u, sigma, v)
}

fn check_rank(r: usize, n1: usize, n2: usize) -> Result<()> {
    if r == 0 || r > n1.min(n2) {
        return Err(Error::RankTooLarge { rank: r, n1, n2 });
    }
    Ok(())
}

/// Whitens according to `normalize`, leaving data untouched for
/// [`Normalize::None`].
pub fn whiten_for(set: &SampleSet, normalize: Normalize) -> Result<WhitenedSampleSet> {
    match normalize {
        Normalize::Full => {
            let state = fit_normalization_full(set, DEFAULT_JITTER_FLOOR)?;
            whiten(set, &state)
        }
        Normalize::FeatureWise => {
            let state = fit_normalization_featurewise(set)?;
            whiten(set, &state)
        }
        Normalize::None => {
            set.validate()?;
            Ok(WhitenedSampleSet::from_raw(set))
        }
    }
}

/// Estimates embeddings from already-whitened samples, de-whitening with
/// the state carried by `w` (if any).
pub fn fit_jdr_whitened(w: &WhitenedSampleSet, r: usize) -> Result<EmbeddingPair> {
    check_rank(r, w.a_prime.ncols(), w.b_prime.ncols())?;
    let proxy = build_proxy(w)?;
    let (whitened_u, sigma, whitened_v) = compact_svd(&proxy.x0, r);
    let (u, v) = match &w.state {
        Some(state) => unwhiten_embeddings(&whitened_u, &whitened_v, state)?,
        None => (whitened_u.clone(), whitened_v.clone()),
    };
    Ok(EmbeddingPair {
        u,
        v,
        sigma,
        whitened_u,
        whitened_v,
    })
}

/// Joint dimensionality reduction by compact SVD of the embedding proxy.
pub fn fit_jdr(set: &SampleSet, r: usize, normalize: Normalize) -> Result<EmbeddingPair> {
    check_rank(r, set.n1(), set.n2())?;
    let w = whiten_for(set, normalize)?;
    fit_jdr_whitened(&w, r)
}

/// Power iterations applied to the randomized range finder. One pass is
/// enough to keep the sketched estimate close to the exact SVD at the
/// noise levels the proxy carries.
const FAST_POWER_ITERATIONS: usize = 1;

/// Fast joint dimensionality reduction: feature-wise normalization plus a
/// randomized range sketch of width `2r`, never materializing the proxy.
/// Identical seeds give bit-identical outputs on one platform.
pub fn fit_fast_jdr(set: &SampleSet, r: usize, seed: u64) -> Result<EmbeddingPair> {
    let (n1, n2) = (set.n1(), set.n2());
    if r == 0 || 2 * r > n2 || r > n1 {
        return Err(Error::RankTooLarge {
            rank: r,
            n1,
            n2: n2 / 2,
        });
    }
    let state = fit_normalization_featurewise(set)?;
    let w = whiten(set, &state)?;
    let m = w.m();
    let width = 2 * r;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sketch = DMatrix::from_fn(n2, width, |_, _| rng.sample::<f64, _>(StandardNormal));

    // One pass of X0 * M = (1/m) sum_i a_i' y_i' (b_i'^T M), never
    // forming X0. `apply_t` is the transposed counterpart.
    let apply = |mat: &DMatrix<f64>| -> DMatrix<f64> {
        let probed = &w.b_prime * mat;
        let weighted = scale_rows(&probed, &w.y_prime, m as f64);
        let mut out = DMatrix::zeros(n1, mat.ncols());
        out.gemm_tr(1.0, &w.a_prime, &weighted, 0.0);
        out
    };
    let apply_t = |mat: &DMatrix<f64>| -> DMatrix<f64> {
        let probed = &w.a_prime * mat;
        let weighted = scale_rows(&probed, &w.y_prime, m as f64);
        let mut out = DMatrix::zeros(n2, mat.ncols());
        out.gemm_tr(1.0, &w.b_prime, &weighted, 0.0);
        out
    };

    // Range probe Z = X0 * S, sharpened by power iterations so the
    // captured range tracks the top singular subspace instead of the
    // additive noise tail. Cost stays O(m n r) per pass.
    let mut q = apply(&sketch).qr().q();
    for _ in 0..FAST_POWER_ITERATIONS {
        let q_right = apply_t(&q).qr().q();
        q = apply(&q_right).qr().q();
    }

    // W = Q^T X0, a (2r) x n2 matrix.
    let small = apply_t(&q).transpose();
    let (u_small, sigma, whitened_v) = compact_svd(&small, r);
    let whitened_u = &q * &u_small;
    let (u, v) = unwhiten_embeddings(&whitened_u, &whitened_v, &state)?;
    Ok(EmbeddingPair {
        u,
        v,
        sigma,
        whitened_u,
        whitened_v,
    })
}
