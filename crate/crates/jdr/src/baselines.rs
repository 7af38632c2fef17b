//! Reference dimensionality reduction methods used for comparison:
//! PCA, principal Hessian directions (pHd), and pHd on concatenated
//! features (cpHd).

use nalgebra::{DMatrix, DVector};

use crate::data::{column_means, sample_covariance, SampleSet};
use crate::error::{Error, Result};

/// Flips each column so its largest-magnitude entry is positive.
fn fix_signs(mat: &mut DMatrix<f64>) {
    for j in 0..mat.ncols() {
        let mut best = 0.0;
        let mut flip = 1.0;
        for i in 0..mat.nrows() {
            let v = mat[(i, j)];
            if v.abs() > best {
                best = v.abs();
                flip = if v < 0.0 { -1.0 } else { 1.0 };
            }
        }
        if flip < 0.0 {
            for i in 0..mat.nrows() {
                mat[(i, j)] = -mat[(i, j)];
            }
        }
    }
}

/// Sorted eigendecomposition of a symmetric matrix. `by_magnitude`
/// orders by |eigenvalue|, otherwise by signed value, descending; ties
/// keep the smaller original index.
fn sorted_eigen(mat: DMatrix<f64>, by_magnitude: bool) -> (DVector<f64>, DMatrix<f64>) {
    let eig = nalgebra::SymmetricEigen::new(mat);
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        let (a, b) = if by_magnitude {
            (eig.eigenvalues[i].abs(), eig.eigenvalues[j].abs())
        } else {
            (eig.eigenvalues[i], eig.eigenvalues[j])
        };
        b.partial_cmp(&a).unwrap().then(i.cmp(&j))
    });
    let values = DVector::from_iterator(n, order.iter().map(|&k| eig.eigenvalues[k]));
    let mut vectors = DMatrix::zeros(n, n);
    for (col, &k) in order.iter().enumerate() {
        vectors.set_column(col, &eig.eigenvectors.column(k));
    }
    (values, vectors)
}

/// PCA embedding: the top-`r` eigenvectors of the sample covariance
/// (1/m convention). Returns the embedding and the full eigenvalue
/// spectrum, descending.
pub fn fit_pca(x: &DMatrix<f64>, r: usize) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let (m, n) = x.shape();
    if r == 0 || r > n {
        return Err(Error::RankTooLarge { rank: r, n1: n, n2: n });
    }
    if m < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: m });
    }
    let cov = sample_covariance(x, &column_means(x));
    let (values, vectors) = sorted_eigen(cov, false);
    let mut embedding = vectors.columns(0, r).into_owned();
    fix_signs(&mut embedding);
    Ok((embedding, values))
}

/// Principal Hessian directions: eigenvectors of
/// `M = (1/m) sum_i (y_i - y_bar) x_i x_i^T` with the `r` largest
/// absolute eigenvalues. Expects whitened (or standardized) features.
/// Returns the embedding and the selected eigenvalues in order.
pub fn fit_phd(x: &DMatrix<f64>, y: &DVector<f64>, r: usize) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let (m, n) = x.shape();
    if r == 0 || r > n {
        return Err(Error::RankTooLarge { rank: r, n1: n, n2: n });
    }
    if y.len() != m {
        return Err(Error::dims(format!("{} samples but {} responses", m, y.len())));
    }
    if m < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: m });
    }
    let y_bar = y.sum() / m as f64;
    let mut weighted = x.clone();
    for i in 0..m {
        let w = (y[i] - y_bar) / m as f64;
        for j in 0..n {
            weighted[(i, j)] *= w;
        }
    }
    let mut hessian_proxy = DMatrix::zeros(n, n);
    hessian_proxy.gemm_tr(1.0, x, &weighted, 0.0);
    // Symmetrize to guard against accumulation asymmetry.
    let sym = (&hessian_proxy + hessian_proxy.transpose()) * 0.5;
    let (values, vectors) = sorted_eigen(sym, true);
    let mut embedding = vectors.columns(0, r).into_owned();
    fix_signs(&mut embedding);
    Ok((embedding, DVector::from_iterator(r, values.iter().take(r).copied())))
}

/// Standardizes columns to zero mean, unit variance; constant columns
/// are centered only.
fn standardize(x: &DMatrix<f64>) -> DMatrix<f64> {
    let m = x.nrows() as f64;
    let mut out = x.clone();
    for j in 0..x.ncols() {
        let mu = x.column(j).sum() / m;
        let var = x.column(j).iter().map(|v| (v - mu).powi(2)).sum::<f64>() / m;
        let sd = if var.sqrt() < 1e-12 { 1.0 } else { var.sqrt() };
        for i in 0..x.nrows() {
            out[(i, j)] = (out[(i, j)] - mu) / sd;
        }
    }
    out
}

/// pHd on the concatenated feature vector `[a^T, b^T]^T` with `2r`
/// directions. Features are standardized internally.
pub fn fit_cphd(set: &SampleSet, r: usize) -> Result<(DMatrix<f64>, DVector<f64>)> {
    set.validate()?;
    let (m, n1, n2) = (set.m(), set.n1(), set.n2());
    if r == 0 || 2 * r > n1 + n2 {
        return Err(Error::RankTooLarge {
            rank: 2 * r,
            n1: n1 + n2,
            n2: n1 + n2,
        });
    }
    let mut concat = DMatrix::zeros(m, n1 + n2);
    for i in 0..m {
        for j in 0..n1 {
            concat[(i, j)] = set.a[(i, j)];
        }
        for j in 0..n2 {
            concat[(i, n1 + j)] = set.b[(i, j)];
        }
    }
    fit_phd(&standardize(&concat), &set.y, 2 * r)
}
