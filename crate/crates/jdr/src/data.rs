//! Sample storage, validation, and data normalization.
//!
//! Whitening comes in two flavors: full (Cholesky factors of the sample
//! covariances) and feature-wise (per-coordinate standard deviations).
//! Both center responses; neither rescales them.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Paired feature matrices with responses. Row `i` of `a`, `b`, and `y`
/// together form sample `i`.
#[derive(Debug, Clone)]
pub struct SampleSet {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub y: DVector<f64>,
}

impl SampleSet {
    /// Builds a validated sample set.
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        let set = SampleSet { a, b, y };
        set.validate()?;
        Ok(set)
    }

    pub fn m(&self) -> usize {
        self.a.nrows()
    }

    pub fn n1(&self) -> usize {
        self.a.ncols()
    }

    pub fn n2(&self) -> usize {
        self.b.ncols()
    }

    /// Checks the row-count and finiteness invariants.
    pub fn validate(&self) -> Result<()> {
        let m = self.a.nrows();
        if m == 0 {
            return Err(Error::TooFewSamples { needed: 1, got: 0 });
        }
        if self.b.nrows() != m || self.y.len() != m {
            return Err(Error::dims(format!(
                "A has {} rows, B has {}, y has {}",
                m,
                self.b.nrows(),
                self.y.len()
            )));
        }
        check_finite("A", &self.a)?;
        check_finite("B", &self.b)?;
        for (i, v) in self.y.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFiniteValue {
                    matrix: "y",
                    row: i,
                    col: 0,
                });
            }
        }
        Ok(())
    }
}

fn check_finite(name: &'static str, mat: &DMatrix<f64>) -> Result<()> {
    // Column-major scan; reports the first offending coordinate.
    for col in 0..mat.ncols() {
        for row in 0..mat.nrows() {
            if !mat[(row, col)].is_finite() {
                return Err(Error::NonFiniteValue {
                    matrix: name,
                    row,
                    col,
                });
            }
        }
    }
    Ok(())
}

/// Normalization mode requested at fit time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Normalize {
    Full,
    FeatureWise,
    None,
}

/// Fitted normalization parameters: means plus either Cholesky factors of
/// the sample covariances or per-feature standard deviations.
#[derive(Debug, Clone)]
pub enum NormalizationState {
    Full {
        mu_a: DVector<f64>,
        mu_b: DVector<f64>,
        mu_y: f64,
        /// Lower-triangular factor with `C_a C_a^T = Sigma_a (+ jitter I)`.
        c_a: DMatrix<f64>,
        c_b: DMatrix<f64>,
        /// Largest diagonal perturbation actually applied to make a
        /// covariance factorizable; zero when both were positive definite.
        jitter: f64,
    },
    FeatureWise {
        mu_a: DVector<f64>,
        mu_b: DVector<f64>,
        mu_y: f64,
        sigma_a: DVector<f64>,
        sigma_b: DVector<f64>,
        /// Indices of constant features whose sigma was replaced by 1.
        constant_a: Vec<usize>,
        constant_b: Vec<usize>,
    },
}

impl NormalizationState {
    pub fn jitter(&self) -> f64 {
        match self {
            NormalizationState::Full { jitter, .. } => *jitter,
            NormalizationState::FeatureWise { .. } => 0.0,
        }
    }

    pub fn mode(&self) -> Normalize {
        match self {
            NormalizationState::Full { .. } => Normalize::Full,
            NormalizationState::FeatureWise { .. } => Normalize::FeatureWise,
        }
    }

    fn dims(&self) -> (usize, usize) {
        match self {
            NormalizationState::Full { mu_a, mu_b, .. } => (mu_a.len(), mu_b.len()),
            NormalizationState::FeatureWise { mu_a, mu_b, .. } => (mu_a.len(), mu_b.len()),
        }
    }
}

/// Whitened samples along with the state that produced them.
#[derive(Debug, Clone)]
pub struct WhitenedSampleSet {
    pub a_prime: DMatrix<f64>,
    pub b_prime: DMatrix<f64>,
    pub y_prime: DVector<f64>,
    pub state: Option<NormalizationState>,
}

impl WhitenedSampleSet {
    /// Wraps raw samples as already whitened (normalization deactivated).
    pub fn from_raw(set: &SampleSet) -> Self {
        WhitenedSampleSet {
            a_prime: set.a.clone(),
            b_prime: set.b.clone(),
            y_prime: set.y.clone(),
            state: None,
        }
    }

    pub fn m(&self) -> usize {
        self.a_prime.nrows()
    }
}

/// Default jitter floor for [`fit_normalization_full`], as a fraction of
/// `trace(Sigma)/n`.
pub const DEFAULT_JITTER_FLOOR: f64 = 1e-10;

pub fn column_means(mat: &DMatrix<f64>) -> DVector<f64> {
    let m = mat.nrows() as f64;
    DVector::from_iterator(mat.ncols(), mat.column_iter().map(|c| c.sum() / m))
}

/// Sample covariance with the 1/m convention.
pub fn sample_covariance(mat: &DMatrix<f64>, means: &DVector<f64>) -> DMatrix<f64> {
    let m = mat.nrows();
    let n = mat.ncols();
    let mut centered = mat.clone();
    for j in 0..n {
        let mu = means[j];
        for i in 0..m {
            centered[(i, j)] -= mu;
        }
    }
    let mut cov = DMatrix::zeros(n, n);
    cov.gemm_tr(1.0 / m as f64, &centered, &centered, 0.0);
    cov
}

fn try_cholesky(mat: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let chol = nalgebra::Cholesky::new(mat.clone())?;
    let l = chol.l();
    if (0..l.nrows()).all(|i| l[(i, i)].is_finite() && l[(i, i)] > 0.0) {
        Some(l)
    } else {
        None
    }
}

/// Cholesky factor of `cov`, escalating a diagonal jitter from
/// `jitter_floor * trace / n` (doubling) until the factorization succeeds.
/// Returns the factor and the jitter actually applied.
fn cholesky_with_jitter(
    cov: &DMatrix<f64>,
    jitter_floor: f64,
    side: &str,
) -> Result<(DMatrix<f64>, f64)> {
    let n = cov.nrows();
    let trace = cov.trace();
    if !(trace > 0.0) {
        return Err(Error::DegenerateData {
            context: format!("covariance of {side} has zero trace (no variance)"),
        });
    }
    if let Some(l) = try_cholesky(cov) {
        return Ok((l, 0.0));
    }
    let mut lambda = jitter_floor.max(f64::MIN_POSITIVE) * trace / n as f64;
    while lambda <= trace {
        let mut jittered = cov.clone();
        for i in 0..n {
            jittered[(i, i)] += lambda;
        }
        if let Some(l) = try_cholesky(&jittered) {
            return Ok((l, lambda));
        }
        lambda *= 2.0;
    }
    Err(Error::DegenerateData {
        context: format!("covariance of {side} not factorizable even with jitter > trace"),
    })
}

/// Fits full normalization: sample means and Cholesky factors of the
/// sample covariances (1/m convention).
pub fn fit_normalization_full(set: &SampleSet, jitter_floor: f64) -> Result<NormalizationState> {
    set.validate()?;
    if set.m() < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            got: set.m(),
        });
    }
    let mu_a = column_means(&set.a);
    let mu_b = column_means(&set.b);
    let mu_y = set.y.sum() / set.m() as f64;
    let (c_a, jitter_a) = cholesky_with_jitter(&sample_covariance(&set.a, &mu_a), jitter_floor, "A")?;
    let (c_b, jitter_b) = cholesky_with_jitter(&sample_covariance(&set.b, &mu_b), jitter_floor, "B")?;
    Ok(NormalizationState::Full {
        mu_a,
        mu_b,
        mu_y,
        c_a,
        c_b,
        jitter: jitter_a.max(jitter_b),
    })
}

/// Threshold under which a feature standard deviation is treated as zero.
pub const SIGMA_FLOOR: f64 = 1e-12;

/// Fits feature-wise normalization: per-coordinate means and standard
/// deviations. Constant features get sigma 1 and are flagged.
pub fn fit_normalization_featurewise(set: &SampleSet) -> Result<NormalizationState> {
    set.validate()?;
    if set.m() < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            got: set.m(),
        });
    }
    let m = set.m() as f64;
    let stats = |mat: &DMatrix<f64>| {
        let mu = column_means(mat);
        let mut sigma = DVector::zeros(mat.ncols());
        let mut constant = Vec::new();
        for j in 0..mat.ncols() {
            let var = mat.column(j).iter().map(|v| (v - mu[j]).powi(2)).sum::<f64>() / m;
            let sd = var.sqrt();
            if sd < SIGMA_FLOOR {
                sigma[j] = 1.0;
                constant.push(j);
            } else {
                sigma[j] = sd;
            }
        }
        (mu, sigma, constant)
    };
    let (mu_a, sigma_a, constant_a) = stats(&set.a);
    let (mu_b, sigma_b, constant_b) = stats(&set.b);
    Ok(NormalizationState::FeatureWise {
        mu_a,
        mu_b,
        mu_y: set.y.sum() / m,
        sigma_a,
        sigma_b,
        constant_a,
        constant_b,
    })
}

/// Centers a matrix and applies `C^{-1}` row-wise via triangular solve.
fn whiten_matrix_full(mat: &DMatrix<f64>, mu: &DVector<f64>, c: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let mut centered_t = DMatrix::zeros(mat.ncols(), mat.nrows());
    for j in 0..mat.ncols() {
        for i in 0..mat.nrows() {
            centered_t[(j, i)] = mat[(i, j)] - mu[j];
        }
    }
    let solved = c
        .solve_lower_triangular(&centered_t)
        .ok_or_else(|| Error::DegenerateData {
            context: "triangular solve failed: zero diagonal in Cholesky factor".into(),
        })?;
    Ok(solved.transpose())
}

/// Applies a fitted normalization: `a_i' = C_a^{-1}(a_i - mu_a)` in full
/// mode, per-coordinate standardization in feature-wise mode. Responses
/// are centered in both modes.
pub fn whiten(set: &SampleSet, state: &NormalizationState) -> Result<WhitenedSampleSet> {
    let (n1, n2) = state.dims();
    if set.n1() != n1 || set.n2() != n2 {
        return Err(Error::dims(format!(
            "normalization state is for ({n1}, {n2}) features, set has ({}, {})",
            set.n1(),
            set.n2()
        )));
    }
    let mu_y = match state {
        NormalizationState::Full { mu_y, .. } => *mu_y,
        NormalizationState::FeatureWise { mu_y, .. } => *mu_y,
    };
    Ok(WhitenedSampleSet {
        a_prime: whiten_a(&set.a, state)?,
        b_prime: whiten_b(&set.b, state)?,
        y_prime: set.y.map(|v| v - mu_y),
        state: Some(state.clone()),
    })
}

fn whiten_matrix_featurewise(
    mat: &DMatrix<f64>,
    mu: &DVector<f64>,
    sigma: &DVector<f64>,
) -> DMatrix<f64> {
    let mut out = mat.clone();
    for j in 0..mat.ncols() {
        let (m_j, s_j) = (mu[j], sigma[j]);
        for i in 0..mat.nrows() {
            out[(i, j)] = (out[(i, j)] - m_j) / s_j;
        }
    }
    out
}

/// Whitens a matrix of A-side feature rows with a fitted state.
pub fn whiten_a(mat: &DMatrix<f64>, state: &NormalizationState) -> Result<DMatrix<f64>> {
    if mat.ncols() != state.dims().0 {
        return Err(Error::dims(format!(
            "features have {} columns, state expects {}",
            mat.ncols(),
            state.dims().0
        )));
    }
    match state {
        NormalizationState::Full { mu_a, c_a, .. } => whiten_matrix_full(mat, mu_a, c_a),
        NormalizationState::FeatureWise { mu_a, sigma_a, .. } => {
            Ok(whiten_matrix_featurewise(mat, mu_a, sigma_a))
        }
    }
}

/// Whitens a matrix of B-side feature rows with a fitted state.
pub fn whiten_b(mat: &DMatrix<f64>, state: &NormalizationState) -> Result<DMatrix<f64>> {
    if mat.ncols() != state.dims().1 {
        return Err(Error::dims(format!(
            "features have {} columns, state expects {}",
            mat.ncols(),
            state.dims().1
        )));
    }
    match state {
        NormalizationState::Full { mu_b, c_b, .. } => whiten_matrix_full(mat, mu_b, c_b),
        NormalizationState::FeatureWise { mu_b, sigma_b, .. } => {
            Ok(whiten_matrix_featurewise(mat, mu_b, sigma_b))
        }
    }
}

/// Maps embeddings estimated in whitened coordinates back to the original
/// feature space: `U = (C_a^T)^{-1} U'` in full mode, row-wise division by
/// sigma in feature-wise mode.
pub fn unwhiten_embeddings(
    u_prime: &DMatrix<f64>,
    v_prime: &DMatrix<f64>,
    state: &NormalizationState,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let (n1, n2) = state.dims();
    if u_prime.nrows() != n1 || v_prime.nrows() != n2 {
        return Err(Error::dims(format!(
            "embeddings have {} and {} rows, state expects {n1} and {n2}",
            u_prime.nrows(),
            v_prime.nrows()
        )));
    }
    match state {
        NormalizationState::Full { c_a, c_b, .. } => {
            let solve = |c: &DMatrix<f64>, w: &DMatrix<f64>| {
                c.tr_solve_lower_triangular(w)
                    .ok_or_else(|| Error::DegenerateData {
                        context: "triangular solve failed: zero diagonal in Cholesky factor".into(),
                    })
            };
            Ok((solve(c_a, u_prime)?, solve(c_b, v_prime)?))
        }
        NormalizationState::FeatureWise {
            sigma_a, sigma_b, ..
        } => {
            let scale_rows = |w: &DMatrix<f64>, sigma: &DVector<f64>| {
                let mut out = w.clone();
                for i in 0..out.nrows() {
                    for j in 0..out.ncols() {
                        out[(i, j)] /= sigma[i];
                    }
                }
                out
            };
            Ok((scale_rows(u_prime, sigma_a), scale_rows(v_prime, sigma_b)))
        }
    }
}
