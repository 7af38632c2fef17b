//! Subcommand definitions and their implementations. Every run writes a
//! metadata record with all parameters, seeds, and the library version
//! alongside its results, and writes only into the `--out` target.

use std::collections::HashSet;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::{DMatrix, DVector};

use jdr::baselines::{fit_cphd, fit_pca, fit_phd};
use jdr::io::{
    self, load_embedding, read_matrix_csv, read_pairs_csv, read_triples_csv, read_vector_csv,
    save_embedding, save_sparse_embedding, write_matrix_csv, write_meta, write_vector_csv,
    EmbeddingMeta,
};
use jdr::predictor::{embed_scaled_a, embed_scaled_b, median_heuristic_bandwidth, KernelPredictor};
use jdr::sparse::{fit_sparse_jdr, SparsityBudget};
use jdr::synth::{generate, make_ground_truth, FeatureDist, Model, SyntheticSpec};
use jdr::{
    fit_fast_jdr, fit_jdr_whitened, fit_normalization_featurewise, fit_normalization_full,
    whiten, whiten_for, EmbeddingPair, Error, Normalize, Result, SampleSet, DEFAULT_JITTER_FLOOR,
};

use crate::dyadic::{run_dyadic_benchmark, DyadicConfig, DyadicOutcome};
use crate::harness::{run_experiment, run_robustness, ExperimentResult};
use crate::pathology::{run_pathology, PathologyCell, PathologyConfig};
use crate::plan::{EstimatorKind, ExperimentPlan, SweepVar};

#[derive(Parser)]
#[command(name = "jdr", version, about = "Joint dimensionality reduction toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Generate synthetic paired-feature data with planted embeddings.
    Synth(SynthArgs),
    /// Fit embeddings from feature and response CSV files.
    Fit(FitArgs),
    /// Predict dyadic scores with kernel regression over embedded features.
    Predict(PredictArgs),
    /// Run an NSEE sweep and fit its log-log slope.
    Experiment(ExperimentArgs),
    /// Compare the proxy estimator and pHd on odd and even links.
    Pathology(PathologyArgs),
    /// Synthetic dyadic retrieval benchmark (recall@k).
    Dyadic(DyadicArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    Bilinear,
    Rbf,
}

impl From<ModelArg> for Model {
    fn from(value: ModelArg) -> Model {
        match value {
            ModelArg::Bilinear => Model::Bilinear,
            ModelArg::Rbf => Model::Rbf,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DistArg {
    Gaussian,
    Uniform,
    Poisson,
    Corr,
}

impl DistArg {
    fn to_dist(self, rho: f64) -> FeatureDist {
        match self {
            DistArg::Gaussian => FeatureDist::Gaussian,
            DistArg::Uniform => FeatureDist::Uniform,
            DistArg::Poisson => FeatureDist::Poisson,
            DistArg::Corr => FeatureDist::CorrelatedGaussian(rho),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NormalizeArg {
    Full,
    Featurewise,
    None,
}

impl From<NormalizeArg> for Normalize {
    fn from(value: NormalizeArg) -> Normalize {
        match value {
            NormalizeArg::Full => Normalize::Full,
            NormalizeArg::Featurewise => Normalize::FeatureWise,
            NormalizeArg::None => Normalize::None,
        }
    }
}

fn normalize_name(n: Normalize) -> &'static str {
    match n {
        Normalize::Full => "full",
        Normalize::FeatureWise => "featurewise",
        Normalize::None => "none",
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AlgoArg {
    Jdr,
    Fast,
    Sparse,
    Pca,
    Phd,
    Cphd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepArg {
    M,
    N,
    S,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EstimatorArg {
    Jdr,
    Fast,
    Sparse,
    Pca,
    Phd,
    Cphd,
}

impl From<EstimatorArg> for EstimatorKind {
    fn from(value: EstimatorArg) -> EstimatorKind {
        match value {
            EstimatorArg::Jdr => EstimatorKind::Jdr,
            EstimatorArg::Fast => EstimatorKind::FastJdr,
            EstimatorArg::Sparse => EstimatorKind::SparseJdr,
            EstimatorArg::Pca => EstimatorKind::Pca,
            EstimatorArg::Phd => EstimatorKind::Phd,
            EstimatorArg::Cphd => EstimatorKind::Cphd,
        }
    }
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[arg(long, value_enum, default_value = "bilinear")]
    pub model: ModelArg,
    #[arg(long, value_enum, default_value = "gaussian")]
    pub dist: DistArg,
    /// Cross-correlation for --dist corr.
    #[arg(long, default_value_t = 0.2)]
    pub rho: f64,
    #[arg(long, default_value_t = 50)]
    pub n1: usize,
    #[arg(long, default_value_t = 50)]
    pub n2: usize,
    #[arg(long, default_value_t = 5)]
    pub rank: usize,
    #[arg(short = 'm', long, default_value_t = 1000)]
    pub samples: usize,
    /// Planted row support sizes (give both to plant sparsity).
    #[arg(long)]
    pub s1: Option<usize>,
    #[arg(long)]
    pub s2: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct FitArgs {
    #[arg(long)]
    pub a: PathBuf,
    #[arg(long)]
    pub b: PathBuf,
    #[arg(long)]
    pub y: PathBuf,
    /// Input CSVs carry a header row.
    #[arg(long)]
    pub headers: bool,
    #[arg(long, value_enum, default_value = "jdr")]
    pub algo: AlgoArg,
    #[arg(long)]
    pub rank: usize,
    #[arg(long)]
    pub s1: Option<usize>,
    #[arg(long)]
    pub s2: Option<usize>,
    /// Defaults per algorithm: full for jdr, featurewise for fast,
    /// none for sparse (its estimator consumes raw data).
    #[arg(long, value_enum)]
    pub normalize: Option<NormalizeArg>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct PredictArgs {
    #[arg(long)]
    pub a_features: PathBuf,
    #[arg(long)]
    pub b_features: PathBuf,
    /// Observed (i, j, y) triples CSV.
    #[arg(long)]
    pub observed: PathBuf,
    /// Query (i, j) pairs CSV.
    #[arg(long)]
    pub queries: PathBuf,
    /// Directory produced by `jdr fit`.
    #[arg(long)]
    pub embedding: PathBuf,
    /// Disease-side bandwidth (default: median heuristic).
    #[arg(long)]
    pub hd: Option<f64>,
    /// Gene-side bandwidth (default: median heuristic).
    #[arg(long)]
    pub hg: Option<f64>,
    /// Treat unobserved pairs as observed with score 0.
    #[arg(long)]
    pub fill_zeros: bool,
    #[arg(long)]
    pub headers: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output CSV of (i, j, predicted score) rows.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct ExperimentArgs {
    #[arg(long, value_enum)]
    pub sweep: SweepArg,
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub grid: Vec<usize>,
    #[arg(long, default_value_t = 20)]
    pub trials: u64,
    #[arg(long, value_enum, default_value = "bilinear")]
    pub model: ModelArg,
    #[arg(long, value_enum, default_value = "gaussian")]
    pub dist: DistArg,
    #[arg(long, default_value_t = 0.2)]
    pub rho: f64,
    #[arg(long, value_enum, default_value = "jdr")]
    pub estimator: EstimatorArg,
    /// Normalization for the exact estimator; synthetic sweeps default
    /// to none.
    #[arg(long, value_enum, default_value = "none")]
    pub normalize: NormalizeArg,
    #[arg(long, default_value_t = 5)]
    pub rank: usize,
    /// Fixed feature dimension (when not sweeping n).
    #[arg(long, default_value_t = 50)]
    pub n: usize,
    /// Fixed sample count (when not sweeping m).
    #[arg(short = 'm', long, default_value_t = 20000)]
    pub samples: usize,
    /// Fixed planted sparsity for the sparse estimator (when not
    /// sweeping s).
    #[arg(long)]
    pub s: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also run the Gaussian baseline and report the slope difference.
    #[arg(long)]
    pub compare_gaussian: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct PathologyArgs {
    #[arg(long, default_value_t = 30)]
    pub n: usize,
    #[arg(long, default_value_t = 5)]
    pub rank: usize,
    #[arg(long, value_delimiter = ',', num_args = 1.., default_values_t = [1000usize, 2500, 5000, 10000])]
    pub grid: Vec<usize>,
    #[arg(long, default_value_t = 10)]
    pub trials: u64,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct DyadicArgs {
    #[arg(long, default_value_t = 300)]
    pub md: usize,
    #[arg(long, default_value_t = 300)]
    pub mg: usize,
    #[arg(long, default_value_t = 40)]
    pub nd: usize,
    #[arg(long, default_value_t = 40)]
    pub ng: usize,
    #[arg(long, default_value_t = 5)]
    pub rank: usize,
    #[arg(long, default_value_t = 5)]
    pub partitions: usize,
    #[arg(long, default_value_t = 10)]
    pub k: usize,
    #[arg(long, default_value_t = 0.8)]
    pub train_fraction: f64,
    /// Positive-score threshold (default: 2 sqrt(rank)).
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth(args) => cmd_synth(&args),
        Command::Fit(args) => cmd_fit(&args),
        Command::Predict(args) => cmd_predict(&args),
        Command::Experiment(args) => cmd_experiment(&args),
        Command::Pathology(args) => cmd_pathology(&args),
        Command::Dyadic(args) => cmd_dyadic(&args),
    }
}

fn cmd_synth(args: &SynthArgs) -> Result<()> {
    let mut spec = SyntheticSpec::new(
        args.model.into(),
        args.n1,
        args.n2,
        args.rank,
        args.samples,
        args.seed,
    )
    .with_dist(args.dist.to_dist(args.rho));
    match (args.s1, args.s2) {
        (Some(s1), Some(s2)) => spec = spec.with_sparsity(s1, s2),
        (None, None) => {}
        _ => {
            return Err(Error::BudgetOutOfRange {
                context: "give both --s1 and --s2 or neither".into(),
            })
        }
    }
    let truth = make_ground_truth(&spec)?;
    let set = generate(&spec, &truth)?;

    fs::create_dir_all(&args.out)?;
    write_matrix_csv(&args.out.join("A.csv"), &set.a)?;
    write_matrix_csv(&args.out.join("B.csv"), &set.b)?;
    write_vector_csv(&args.out.join("y.csv"), &set.y)?;
    write_matrix_csv(&args.out.join("U.csv"), &truth.u)?;
    write_matrix_csv(&args.out.join("V.csv"), &truth.v)?;
    write_meta(
        &args.out.join("meta.json"),
        &serde_json::json!({
            "command": "synth",
            "model": format!("{:?}", args.model).to_lowercase(),
            "dist": format!("{:?}", args.dist).to_lowercase(),
            "rho": if args.dist == DistArg::Corr { Some(args.rho) } else { None },
            "n1": args.n1,
            "n2": args.n2,
            "r": args.rank,
            "m": args.samples,
            "s1": args.s1,
            "s2": args.s2,
            "seed": args.seed,
            "version": io::library_version(),
        }),
    )?;
    println!(
        "synth: wrote {} samples (n1 = {}, n2 = {}) to {}",
        args.samples,
        args.n1,
        args.n2,
        args.out.display()
    );
    Ok(())
}

fn fit_normalize_default(algo: AlgoArg) -> Normalize {
    match algo {
        AlgoArg::Jdr => Normalize::Full,
        AlgoArg::Fast => Normalize::FeatureWise,
        _ => Normalize::None,
    }
}

fn cmd_fit(args: &FitArgs) -> Result<()> {
    let a = read_matrix_csv(&args.a, args.headers)?;
    let b = read_matrix_csv(&args.b, args.headers)?;
    let y = read_vector_csv(&args.y, args.headers)?;
    let set = SampleSet::new(a, b, y)?;
    let normalize: Normalize = args
        .normalize
        .map(Into::into)
        .unwrap_or_else(|| fit_normalize_default(args.algo));

    let (m, n1, n2) = (set.m(), set.n1(), set.n2());
    let meta = |algo: &str, jitter: f64, norm: Normalize, seed: Option<u64>| EmbeddingMeta {
        algo: algo.into(),
        r: args.rank,
        m,
        n1,
        n2,
        normalize: normalize_name(norm).into(),
        jitter,
        seed,
        version: io::library_version(),
    };

    fs::create_dir_all(&args.out)?;
    match args.algo {
        AlgoArg::Jdr => {
            let w = whiten_for(&set, normalize)?;
            let emb = fit_jdr_whitened(&w, args.rank)?;
            let jitter = w.state.as_ref().map_or(0.0, |s| s.jitter());
            save_embedding(&args.out, &emb, &meta("jdr", jitter, normalize, None))?;
        }
        AlgoArg::Fast => {
            if normalize != Normalize::FeatureWise {
                return Err(Error::Parse {
                    context: "the fast path always normalizes feature-wise".into(),
                });
            }
            let emb = fit_fast_jdr(&set, args.rank, args.seed)?;
            save_embedding(
                &args.out,
                &emb,
                &meta("fast", 0.0, Normalize::FeatureWise, Some(args.seed)),
            )?;
        }
        AlgoArg::Sparse => {
            let (s1, s2) = match (args.s1, args.s2) {
                (Some(s1), Some(s2)) => (s1, s2),
                _ => {
                    return Err(Error::BudgetOutOfRange {
                        context: "sparse fitting needs --s1 and --s2".into(),
                    })
                }
            };
            // The selecting estimator consumes raw data; feature-wise
            // standardization is offered as an extension for real CSVs.
            let working = match normalize {
                Normalize::None => set,
                Normalize::FeatureWise => {
                    let state = fit_normalization_featurewise(&set)?;
                    let w = whiten(&set, &state)?;
                    SampleSet::new(w.a_prime, w.b_prime, w.y_prime)?
                }
                Normalize::Full => {
                    return Err(Error::Parse {
                        context: "sparse fitting supports --normalize none or featurewise".into(),
                    })
                }
            };
            let fitted = fit_sparse_jdr(&working, SparsityBudget::new(args.rank, s1, s2))?;
            save_sparse_embedding(&args.out, &fitted, &meta("sparse", 0.0, normalize, None))?;
        }
        AlgoArg::Pca => {
            let (u, values_a) = fit_pca(&set.a, args.rank)?;
            let (v, _) = fit_pca(&set.b, args.rank)?;
            let sigma = DVector::from_iterator(args.rank, values_a.iter().take(args.rank).copied());
            let emb = EmbeddingPair {
                u: u.clone(),
                v: v.clone(),
                sigma,
                whitened_u: u,
                whitened_v: v,
            };
            save_embedding(&args.out, &emb, &meta("pca", 0.0, Normalize::None, None))?;
        }
        AlgoArg::Phd => {
            let state = fit_normalization_featurewise(&set)?;
            let w = whiten(&set, &state)?;
            let (u, values) = fit_phd(&w.a_prime, &set.y, args.rank)?;
            let (v, _) = fit_phd(&w.b_prime, &set.y, args.rank)?;
            let sigma = DVector::from_iterator(args.rank, values.iter().map(|v| v.abs()));
            let emb = EmbeddingPair {
                u: u.clone(),
                v: v.clone(),
                sigma,
                whitened_u: u,
                whitened_v: v,
            };
            save_embedding(&args.out, &emb, &meta("phd", 0.0, Normalize::FeatureWise, None))?;
        }
        AlgoArg::Cphd => {
            let (w_emb, values) = fit_cphd(&set, args.rank)?;
            write_matrix_csv(&args.out.join("U.csv"), &w_emb)?;
            let sigma = DVector::from_iterator(2 * args.rank, values.iter().map(|v| v.abs()));
            io::write_row_csv(&args.out.join("sigma.csv"), &sigma)?;
            write_meta(
                &args.out.join("meta.json"),
                &meta("cphd", 0.0, Normalize::FeatureWise, None),
            )?;
        }
    }
    println!(
        "fit: {} rank-{} embedding written to {}",
        match args.algo {
            AlgoArg::Jdr => "jdr",
            AlgoArg::Fast => "fast",
            AlgoArg::Sparse => "sparse",
            AlgoArg::Pca => "pca",
            AlgoArg::Phd => "phd",
            AlgoArg::Cphd => "cphd",
        },
        args.rank,
        args.out.display()
    );
    Ok(())
}

fn cmd_predict(args: &PredictArgs) -> Result<()> {
    let (emb, meta) = load_embedding(&args.embedding)?;
    let a_features = read_matrix_csv(&args.a_features, args.headers)?;
    let b_features = read_matrix_csv(&args.b_features, args.headers)?;
    let mut observed = read_triples_csv(&args.observed, args.headers)?;
    let queries = read_pairs_csv(&args.queries, args.headers)?;
    if observed.is_empty() {
        return Err(Error::TooFewSamples { needed: 1, got: 0 });
    }

    if args.fill_zeros {
        let seen: HashSet<(usize, usize)> = observed.iter().map(|&(i, j, _)| (i, j)).collect();
        for i in 0..a_features.nrows() {
            for j in 0..b_features.nrows() {
                if !seen.contains(&(i, j)) {
                    observed.push((i, j, 0.0));
                }
            }
        }
    }

    // Rebuild the whitening population from the observed triples with
    // the mode the embedding was fitted under (each triple is one
    // sample).
    let m = observed.len();
    let per_triple = SampleSet::new(
        DMatrix::from_fn(m, a_features.ncols(), |t, j| a_features[(observed[t].0, j)]),
        DMatrix::from_fn(m, b_features.ncols(), |t, j| b_features[(observed[t].1, j)]),
        DVector::from_fn(m, |t, _| observed[t].2),
    )?;
    let state = match meta.normalize.as_str() {
        "full" => Some(fit_normalization_full(&per_triple, DEFAULT_JITTER_FLOOR)?),
        "featurewise" => Some(fit_normalization_featurewise(&per_triple)?),
        "none" => None,
        other => {
            return Err(Error::Parse {
                context: format!("embedding metadata has unknown normalize mode '{other}'"),
            })
        }
    };

    let a_emb = embed_scaled_a(&a_features, &emb, state.as_ref())?;
    let b_emb = embed_scaled_b(&b_features, &emb, state.as_ref())?;
    let h_d = match args.hd {
        Some(h) => h,
        None => median_heuristic_bandwidth(&a_emb, args.seed ^ 0x11),
    };
    let h_g = match args.hg {
        Some(h) => h,
        None => median_heuristic_bandwidth(&b_emb, args.seed ^ 0x12),
    };
    let predictor = KernelPredictor::new(a_emb, b_emb, &observed, h_d, h_g)?;
    let predictions = predictor.predict_all(&queries)?;

    if let Some(parent) = args.out.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    let mut out = BufWriter::new(fs::File::create(&args.out)?);
    for (&(i, j), score) in queries.iter().zip(predictions.iter()) {
        writeln!(out, "{i},{j},{score}")?;
    }
    out.flush()?;

    let meta_path = meta_sidecar_path(&args.out);
    write_meta(
        &meta_path,
        &serde_json::json!({
            "command": "predict",
            "embedding": args.embedding.display().to_string(),
            "embedding_meta": meta,
            "h_d": h_d,
            "h_g": h_g,
            "fill_zeros": args.fill_zeros,
            "observed": m,
            "queries": queries.len(),
            "seed": args.seed,
            "version": io::library_version(),
        }),
    )?;
    println!(
        "predict: {} scores written to {} (h_d = {h_d}, h_g = {h_g})",
        queries.len(),
        args.out.display()
    );
    Ok(())
}

fn meta_sidecar_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".meta.json");
    out.with_file_name(name)
}

pub fn write_experiment_csv(path: &Path, result: &ExperimentResult) -> Result<()> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    writeln!(out, "parameter,trial,nsee")?;
    for row in &result.rows {
        writeln!(out, "{},{},{}", row.parameter, row.trial, row.nsee)?;
    }
    for &(parameter, mean) in &result.means {
        writeln!(out, "{parameter},mean,{mean}")?;
    }
    writeln!(out, "all,slope,{}", result.slope.slope)?;
    out.flush()?;
    Ok(())
}

fn cmd_experiment(args: &ExperimentArgs) -> Result<()> {
    let plan = ExperimentPlan {
        sweep: match args.sweep {
            SweepArg::M => SweepVar::M,
            SweepArg::N => SweepVar::N,
            SweepArg::S => SweepVar::S,
        },
        grid: args.grid.clone(),
        model: args.model.into(),
        dist: args.dist.to_dist(args.rho),
        estimator: args.estimator.into(),
        normalize: args.normalize.into(),
        n: args.n,
        m: args.samples,
        r: args.rank,
        s: args.s,
        trials: args.trials,
        seed: args.seed,
    };
    fs::create_dir_all(&args.out)?;

    let (result, comparison) = if args.compare_gaussian {
        let robustness = run_robustness(&plan, plan.dist)?;
        write_experiment_csv(&args.out.join("baseline.csv"), &robustness.baseline)?;
        (
            robustness.variant.clone(),
            Some((robustness.baseline.slope.slope, robustness.slope_difference)),
        )
    } else {
        (run_experiment(&plan)?, None)
    };
    write_experiment_csv(&args.out.join("results.csv"), &result)?;

    write_meta(
        &args.out.join("meta.json"),
        &serde_json::json!({
            "command": "experiment",
            "sweep": plan.sweep.name(),
            "grid": plan.grid,
            "trials": plan.trials,
            "model": format!("{:?}", args.model).to_lowercase(),
            "dist": format!("{:?}", args.dist).to_lowercase(),
            "rho": if args.dist == DistArg::Corr { Some(args.rho) } else { None },
            "estimator": plan.estimator.name(),
            "normalize": normalize_name(plan.normalize),
            "r": plan.r,
            "n": plan.n,
            "m": plan.m,
            "s": plan.s,
            "seed": plan.seed,
            "slope": result.slope.slope,
            "intercept": result.slope.intercept,
            "baseline_slope": comparison.map(|(slope, _)| slope),
            "slope_difference": comparison.map(|(_, diff)| diff),
            "version": io::library_version(),
        }),
    )?;
    match comparison {
        Some((baseline_slope, diff)) => println!(
            "experiment: slope {} vs gaussian baseline {} (|difference| = {})",
            result.slope.slope, baseline_slope, diff
        ),
        None => println!("experiment: slope {}", result.slope.slope),
    }
    Ok(())
}

pub fn write_pathology_csv(path: &Path, cells: &[PathologyCell]) -> Result<()> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    writeln!(out, "link,method,m,mean_nsee")?;
    for cell in cells {
        for &(m, mean) in &cell.means {
            writeln!(out, "{},{},{m},{mean}", cell.link.name(), cell.method.name())?;
        }
    }
    for cell in cells {
        writeln!(
            out,
            "{},{},final,{}",
            cell.link.name(),
            cell.method.name(),
            cell.final_nsee
        )?;
    }
    out.flush()?;
    Ok(())
}

fn cmd_pathology(args: &PathologyArgs) -> Result<()> {
    let cfg = PathologyConfig {
        n: args.n,
        r: args.rank,
        grid: args.grid.clone(),
        trials: args.trials,
        seed: args.seed,
    };
    if cfg.grid.len() < 2 || cfg.grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Parse {
            context: "grid must be strictly increasing with at least two values".into(),
        });
    }
    let cells = run_pathology(&cfg)?;
    fs::create_dir_all(&args.out)?;
    write_pathology_csv(&args.out.join("pathology.csv"), &cells)?;
    write_meta(
        &args.out.join("meta.json"),
        &serde_json::json!({
            "command": "pathology",
            "n": cfg.n,
            "r": cfg.r,
            "grid": cfg.grid,
            "trials": cfg.trials,
            "seed": cfg.seed,
            "version": io::library_version(),
        }),
    )?;
    for cell in &cells {
        println!(
            "pathology: {} link, {} final NSEE {}",
            cell.link.name(),
            cell.method.name(),
            cell.final_nsee
        );
    }
    Ok(())
}

pub fn write_recall_csv(path: &Path, outcome: &DyadicOutcome) -> Result<()> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    writeln!(out, "method,partition,recall")?;
    for row in &outcome.rows {
        writeln!(out, "{},{},{}", row.method, row.partition, row.recall)?;
    }
    writeln!(out, "jdr+kr,mean,{}", outcome.mean_jdr)?;
    writeln!(out, "pca+kr,mean,{}", outcome.mean_pca)?;
    writeln!(out, "random,baseline,{}", outcome.random_baseline)?;
    out.flush()?;
    Ok(())
}

fn cmd_dyadic(args: &DyadicArgs) -> Result<()> {
    let cfg = DyadicConfig {
        m_d: args.md,
        m_g: args.mg,
        n_d: args.nd,
        n_g: args.ng,
        r: args.rank,
        partitions: args.partitions,
        k: args.k,
        train_fraction: args.train_fraction,
        positive_threshold: args
            .threshold
            .unwrap_or_else(|| 2.0 * (args.rank as f64).sqrt()),
        seed: args.seed,
    };
    let outcome = run_dyadic_benchmark(&cfg)?;
    fs::create_dir_all(&args.out)?;
    write_recall_csv(&args.out.join("recall.csv"), &outcome)?;
    write_meta(
        &args.out.join("meta.json"),
        &serde_json::json!({
            "command": "dyadic",
            "m_d": cfg.m_d,
            "m_g": cfg.m_g,
            "n_d": cfg.n_d,
            "n_g": cfg.n_g,
            "r": cfg.r,
            "partitions": cfg.partitions,
            "k": cfg.k,
            "train_fraction": cfg.train_fraction,
            "positive_threshold": cfg.positive_threshold,
            "seed": cfg.seed,
            "mean_recall_jdr_kr": outcome.mean_jdr,
            "mean_recall_pca_kr": outcome.mean_pca,
            "random_baseline": outcome.random_baseline,
            "version": io::library_version(),
        }),
    )?;
    println!(
        "dyadic: recall@{} jdr+kr {} vs pca+kr {} (random {})",
        cfg.k, outcome.mean_jdr, outcome.mean_pca, outcome.random_baseline
    );
    Ok(())
}
