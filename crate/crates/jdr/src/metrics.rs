//! Subspace estimation error, log-log slope fitting, and retrieval metrics.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

const ORTHO_TOL: f64 = 1e-6;

/// Frobenius deviation of `M^T M` from the identity.
pub fn gram_deviation(mat: &DMatrix<f64>) -> f64 {
    let gram = mat.transpose() * mat;
    (&gram - DMatrix::identity(gram.nrows(), gram.ncols())).norm()
}

fn orthonormalize_if_needed(mat: &DMatrix<f64>) -> DMatrix<f64> {
    if gram_deviation(mat) > ORTHO_TOL {
        mat.clone().qr().q()
    } else {
        mat.clone()
    }
}

/// Subspace estimation error `||U_hat - P_U U_hat||_F`, in `[0, sqrt(r)]`:
/// 0 when the spans coincide, `sqrt(r)` when they are orthogonal.
///
/// `u_true` must have orthonormal columns; `u_hat` is orthonormalized by
/// economy QR if its Gram matrix deviates from the identity.
pub fn subspace_distance(u_true: &DMatrix<f64>, u_hat: &DMatrix<f64>) -> Result<f64> {
    if u_true.shape() != u_hat.shape() {
        return Err(Error::dims(format!(
            "subspace bases have shapes {:?} and {:?}",
            u_true.shape(),
            u_hat.shape()
        )));
    }
    let deviation = gram_deviation(u_true);
    if deviation > ORTHO_TOL {
        return Err(Error::NotOrthonormal {
            deviation,
            tolerance: ORTHO_TOL,
        });
    }
    let hat = orthonormalize_if_needed(u_hat);
    let projected = u_true * (u_true.transpose() * &hat);
    Ok((hat - projected).norm())
}

/// Normalized subspace estimation error:
/// `max{d(U, U_hat), d(V, V_hat)} / sqrt(r)`, in `[0, 1]`.
pub fn nsee(
    u_true: &DMatrix<f64>,
    u_hat: &DMatrix<f64>,
    v_true: &DMatrix<f64>,
    v_hat: &DMatrix<f64>,
) -> Result<f64> {
    let r = u_true.ncols();
    if v_true.ncols() != r {
        return Err(Error::dims(format!(
            "U has {r} columns but V has {}",
            v_true.ncols()
        )));
    }
    let du = subspace_distance(u_true, u_hat)?;
    let dv = subspace_distance(v_true, v_hat)?;
    Ok(du.max(dv) / (r as f64).sqrt())
}

/// An ordinary least squares fit on natural-log transformed points.
#[derive(Debug, Clone, PartialEq)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    /// The `(ln x, ln y)` pairs the line was fitted to.
    pub points: Vec<(f64, f64)>,
}

/// Fits `ln y = slope * ln x + intercept` by OLS. Requires at least two
/// points, strictly increasing positive `xs`, and positive `ys`.
pub fn fit_loglog_slope(xs: &[f64], ys: &[f64]) -> Result<SlopeFit> {
    if xs.len() != ys.len() {
        return Err(Error::dims(format!(
            "{} x values vs {} y values",
            xs.len(),
            ys.len()
        )));
    }
    if xs.len() < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            got: xs.len(),
        });
    }
    for (i, (&x, &y)) in xs.iter().zip(ys.iter()).enumerate() {
        if !(x > 0.0) || !(y > 0.0) {
            return Err(Error::NonPositiveValue { index: i });
        }
        if i > 0 && xs[i - 1] >= x {
            return Err(Error::Parse {
                context: format!("x values must be strictly increasing (index {i})"),
            });
        }
    }
    let points: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys.iter())
        .map(|(&x, &y)| (x.ln(), y.ln()))
        .collect();
    let n = points.len() as f64;
    let mean_x = points.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
    let sxy: f64 = points
        .iter()
        .map(|p| (p.0 - mean_x) * (p.1 - mean_y))
        .sum();
    let slope = sxy / sxx;
    Ok(SlopeFit {
        slope,
        intercept: mean_y - slope * mean_x,
        points,
    })
}

/// Fraction of `positives` appearing among the `k` highest scores. Ties
/// are broken toward the smaller index.
pub fn recall_at_k(scores: &[f64], positives: &[usize], k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::TooFewSamples { needed: 1, got: 0 });
    }
    if positives.is_empty() {
        return Err(Error::EmptyPositives);
    }
    for &p in positives {
        if p >= scores.len() {
            return Err(Error::IndexOutOfRange {
                i: p,
                j: 0,
                rows: scores.len(),
                cols: 1,
            });
        }
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&i, &j| scores[j].partial_cmp(&scores[i]).unwrap().then(i.cmp(&j)));
    let top: std::collections::HashSet<usize> = order.into_iter().take(k).collect();
    let hits = positives.iter().filter(|p| top.contains(p)).count();
    Ok(hits as f64 / positives.len() as f64)
}
