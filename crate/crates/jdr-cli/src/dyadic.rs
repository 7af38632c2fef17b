//! Synthetic dyadic retrieval benchmark: entity features on two sides,
//! bilinear association scores, disease-wise train/test partitions, and
//! recall@k for JDR+KR against PCA+KR and random ranking.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use jdr::baselines::fit_pca;
use jdr::data::column_means;
use jdr::metrics::recall_at_k;
use jdr::predictor::{embed_scaled_a, embed_scaled_b, median_heuristic_bandwidth, KernelPredictor};
use jdr::{
    fit_jdr_whitened, fit_normalization_full, whiten, Error, Result, SampleSet,
    DEFAULT_JITTER_FLOOR,
};

#[derive(Debug, Clone)]
pub struct DyadicConfig {
    pub m_d: usize,
    pub m_g: usize,
    pub n_d: usize,
    pub n_g: usize,
    pub r: usize,
    pub partitions: usize,
    pub k: usize,
    pub train_fraction: f64,
    /// Scores above this are positives for recall. Bilinear scores have
    /// variance r, so two standard deviations is `2 sqrt(r)`.
    pub positive_threshold: f64,
    pub seed: u64,
}

impl DyadicConfig {
    pub fn desk_scale(seed: u64) -> Self {
        let r = 5usize;
        DyadicConfig {
            m_d: 300,
            m_g: 300,
            n_d: 40,
            n_g: 40,
            r,
            partitions: 5,
            k: 10,
            train_fraction: 0.8,
            positive_threshold: 2.0 * (r as f64).sqrt(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.r == 0 || self.r > self.n_d.min(self.n_g) {
            return Err(Error::RankTooLarge {
                rank: self.r,
                n1: self.n_d,
                n2: self.n_g,
            });
        }
        if !(0.0 < self.train_fraction && self.train_fraction < 1.0) {
            return Err(Error::Parse {
                context: format!("train fraction {} outside (0, 1)", self.train_fraction),
            });
        }
        if self.partitions == 0 || self.k == 0 || self.m_d < 2 || self.m_g < 1 {
            return Err(Error::TooFewSamples { needed: 2, got: 0 });
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct RecallRow {
    pub method: &'static str,
    pub partition: usize,
    pub recall: f64,
}

#[derive(Debug, Clone)]
pub struct DyadicOutcome {
    pub rows: Vec<RecallRow>,
    pub mean_jdr: f64,
    pub mean_pca: f64,
    /// Expected recall@k of a uniformly random ranking: k / m_g.
    pub random_baseline: f64,
}

struct Population {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    scores: DMatrix<f64>,
    positives: Vec<Vec<usize>>,
}

fn synthesize(cfg: &DyadicConfig) -> Population {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(4);
    let a = DMatrix::from_fn(cfg.m_d, cfg.n_d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let b = DMatrix::from_fn(cfg.m_g, cfg.n_g, |_, _| rng.sample::<f64, _>(StandardNormal));
    let u = DMatrix::from_fn(cfg.n_d, cfg.r, |_, _| rng.sample::<f64, _>(StandardNormal))
        .qr()
        .q();
    let v = DMatrix::from_fn(cfg.n_g, cfg.r, |_, _| rng.sample::<f64, _>(StandardNormal))
        .qr()
        .q();
    let scores = (&a * &u) * (&b * &v).transpose();
    let positives = (0..cfg.m_d)
        .map(|i| {
            (0..cfg.m_g)
                .filter(|&j| scores[(i, j)] > cfg.positive_threshold)
                .collect()
        })
        .collect();
    Population {
        a,
        b,
        scores,
        positives,
    }
}

/// Mean recall@k over test diseases with at least one positive.
fn mean_recall(
    cfg: &DyadicConfig,
    pop: &Population,
    predictor: &KernelPredictor,
    test: &[usize],
) -> Result<f64> {
    let recalls: Result<Vec<Option<f64>>> = test
        .par_iter()
        .map(|&i| {
            if pop.positives[i].is_empty() {
                return Ok(None);
            }
            let queries: Vec<(usize, usize)> = (0..cfg.m_g).map(|j| (i, j)).collect();
            let scores = predictor.predict_all(&queries)?;
            recall_at_k(&scores, &pop.positives[i], cfg.k).map(Some)
        })
        .collect();
    let recalls: Vec<f64> = recalls?.into_iter().flatten().collect();
    if recalls.is_empty() {
        return Err(Error::EmptyPositives);
    }
    Ok(recalls.iter().sum::<f64>() / recalls.len() as f64)
}

fn observed_triples(pop: &Population, train: &[usize], m_g: usize) -> Vec<(usize, usize, f64)> {
    let mut triples = Vec::with_capacity(train.len() * m_g);
    for &i in train {
        for j in 0..m_g {
            triples.push((i, j, pop.scores[(i, j)]));
        }
    }
    triples
}

fn rows_subset(mat: &DMatrix<f64>, rows: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), mat.ncols(), |i, j| mat[(rows[i], j)])
}

fn jdr_kr_recall(
    cfg: &DyadicConfig,
    pop: &Population,
    triples: &[(usize, usize, f64)],
    train: &[usize],
    test: &[usize],
) -> Result<f64> {
    // Per-triple samples: each observed pair contributes one row.
    let m = triples.len();
    let a = DMatrix::from_fn(m, cfg.n_d, |t, j| pop.a[(triples[t].0, j)]);
    let b = DMatrix::from_fn(m, cfg.n_g, |t, j| pop.b[(triples[t].1, j)]);
    let y = DVector::from_fn(m, |t, _| triples[t].2);
    let set = SampleSet::new(a, b, y)?;
    let state = fit_normalization_full(&set, DEFAULT_JITTER_FLOOR)?;
    let w = whiten(&set, &state)?;
    let emb = fit_jdr_whitened(&w, cfg.r)?;

    let disease_emb = embed_scaled_a(&pop.a, &emb, Some(&state))?;
    let gene_emb = embed_scaled_b(&pop.b, &emb, Some(&state))?;
    let h_d = median_heuristic_bandwidth(&rows_subset(&disease_emb, train), cfg.seed ^ 0x11);
    let h_g = median_heuristic_bandwidth(&gene_emb, cfg.seed ^ 0x12);
    let predictor = KernelPredictor::new(disease_emb, gene_emb, triples, h_d, h_g)?;
    mean_recall(cfg, pop, &predictor, test)
}

fn pca_kr_recall(
    cfg: &DyadicConfig,
    pop: &Population,
    triples: &[(usize, usize, f64)],
    train: &[usize],
    test: &[usize],
) -> Result<f64> {
    let train_feats = rows_subset(&pop.a, train);
    let (u_pca, _) = fit_pca(&train_feats, cfg.r)?;
    let (v_pca, _) = fit_pca(&pop.b, cfg.r)?;

    let mu_a = column_means(&train_feats);
    let mu_b = column_means(&pop.b);
    let center = |mat: &DMatrix<f64>, mu: &DVector<f64>| {
        let mut out = mat.clone();
        for j in 0..out.ncols() {
            for i in 0..out.nrows() {
                out[(i, j)] -= mu[j];
            }
        }
        out
    };
    let disease_emb = center(&pop.a, &mu_a) * &u_pca;
    let gene_emb = center(&pop.b, &mu_b) * &v_pca;
    let h_d = median_heuristic_bandwidth(&rows_subset(&disease_emb, train), cfg.seed ^ 0x21);
    let h_g = median_heuristic_bandwidth(&gene_emb, cfg.seed ^ 0x22);
    let predictor = KernelPredictor::new(disease_emb, gene_emb, triples, h_d, h_g)?;
    mean_recall(cfg, pop, &predictor, test)
}

/// Synthesizes one dyadic population, then evaluates JDR+KR and PCA+KR
/// over disease-wise partitions.
pub fn run_dyadic_benchmark(cfg: &DyadicConfig) -> Result<DyadicOutcome> {
    cfg.validate()?;
    let pop = synthesize(cfg);
    let train_size = ((cfg.m_d as f64) * cfg.train_fraction).round() as usize;
    let train_size = train_size.clamp(1, cfg.m_d - 1);

    let mut rows = Vec::new();
    let (mut sum_jdr, mut sum_pca) = (0.0, 0.0);
    for partition in 0..cfg.partitions {
        let mut order: Vec<usize> = (0..cfg.m_d).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ (partition as u64 + 1));
        rng.set_stream(5);
        order.shuffle(&mut rng);
        let mut train = order[..train_size].to_vec();
        let mut test = order[train_size..].to_vec();
        train.sort_unstable();
        test.sort_unstable();

        let triples = observed_triples(&pop, &train, cfg.m_g);
        let jdr_recall = jdr_kr_recall(cfg, &pop, &triples, &train, &test)?;
        let pca_recall = pca_kr_recall(cfg, &pop, &triples, &train, &test)?;
        rows.push(RecallRow {
            method: "jdr+kr",
            partition,
            recall: jdr_recall,
        });
        rows.push(RecallRow {
            method: "pca+kr",
            partition,
            recall: pca_recall,
        });
        sum_jdr += jdr_recall;
        sum_pca += pca_recall;
    }
    Ok(DyadicOutcome {
        rows,
        mean_jdr: sum_jdr / cfg.partitions as f64,
        mean_pca: sum_pca / cfg.partitions as f64,
        random_baseline: cfg.k as f64 / cfg.m_g as f64,
    })
}
