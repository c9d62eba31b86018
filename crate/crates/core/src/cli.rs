//! Command-line interface.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::dataset::{parse_dataset, save_dataset, split, Dataset, ParseOptions};
use crate::embedding::{captured_variance_fraction, embed, exact_captured_variance, EmbeddingConfig};
use crate::error::{Error, ErrorKind, Result};
use crate::inference::{decide, Inference};
use crate::kernel::KernelFamily;
use crate::link::{LossKind, OptimizerConfig};
use crate::metrics::{bootstrap_ci, Metric};
use crate::model_io::{load_pipeline, save_embedding, save_pipeline, StoredEmbedding};
use crate::pipeline::{predict, train_pipeline, Bandwidth, EmbeddingMode, PipelineConfig};
use crate::rng::Rng;
use crate::tensor::DIRECT_SOLVE_MAX_DIM;

#[derive(Parser, Debug)]
#[command(name = "rlink", version, about = "Low-rank label embedding with a random-feature link")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train a pipeline and write the model file.
    Train(TrainArgs),
    /// Write label decisions for a test set.
    Predict(PredictArgs),
    /// Report metrics with bootstrap confidence intervals as JSON lines.
    Eval(EvalArgs),
    /// Compute only the label embedding and feature projector.
    Embed(EmbedArgs),
    /// Seeded train/test split of a dataset file.
    Split(SplitArgs),
}

#[derive(Args, Debug)]
struct DimArgs {
    /// Feature count (default: header or largest index).
    #[arg(long)]
    n_features: Option<usize>,
    /// Label count (default: header or largest label).
    #[arg(long)]
    n_labels: Option<usize>,
}

impl DimArgs {
    fn options(&self) -> ParseOptions {
        ParseOptions {
            n_features: self.n_features,
            n_labels: self.n_labels,
        }
    }
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value_t = 10)]
    rank: usize,
    #[arg(long, default_value_t = crate::embedding::DEFAULT_OVERSAMPLE)]
    oversample: usize,
    #[arg(long, default_value_t = crate::embedding::DEFAULT_POWER_ITERS)]
    power_iters: usize,
    #[arg(long, default_value_t = 1.0)]
    l2: f64,
    #[arg(long, default_value_t = 0.0)]
    l2_link: f64,
    #[arg(long, default_value_t = 1000)]
    features: usize,
    /// gaussian, cauchy, student:NU, or linear (no random features)
    #[arg(long, default_value = "gaussian")]
    kernel: String,
    /// Positive number or "median"
    #[arg(long, default_value = "median")]
    bandwidth: String,
    /// squared, logistic, or per-class-logistic
    #[arg(long, default_value = "per-class-logistic")]
    loss: String,
    #[arg(long, default_value_t = 0.1)]
    lr: f64,
    #[arg(long, default_value_t = 1.0)]
    lr_decay: f64,
    #[arg(long, default_value_t = 0.9)]
    momentum: f64,
    #[arg(long, default_value_t = 10)]
    passes: usize,
    #[arg(long, default_value_t = 1)]
    batch_size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// learned, random, or none
    #[arg(long, default_value = "learned")]
    embedding: String,
    /// Reweight features by inverse document frequency and normalize rows.
    #[arg(long)]
    tfidf: bool,
    #[command(flatten)]
    dims: DimArgs,
}

#[derive(Args, Debug)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    test: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// threshold, f1, topk:K, or argmax
    #[arg(long, default_value = "threshold")]
    inference: String,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long)]
    test: PathBuf,
    /// Prediction file written by `predict`.
    #[arg(long, conflicts_with = "model", required_unless_present = "model")]
    pred: Option<PathBuf>,
    /// Model file; each metric uses its own inference rule.
    #[arg(long)]
    model: Option<PathBuf>,
    /// hamming, macrof1, p@K, or error (repeatable)
    #[arg(long, required = true)]
    metric: Vec<String>,
    #[arg(long, default_value_t = 1000)]
    bootstrap: usize,
    #[arg(long, default_value_t = 0.9)]
    level: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    dims: DimArgs,
}

#[derive(Args, Debug)]
struct EmbedArgs {
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 10)]
    rank: usize,
    #[arg(long, default_value_t = crate::embedding::DEFAULT_OVERSAMPLE)]
    oversample: usize,
    #[arg(long, default_value_t = crate::embedding::DEFAULT_POWER_ITERS)]
    power_iters: usize,
    #[arg(long, default_value_t = 1.0)]
    l2: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also report the exact captured variance (needs at most 2000 features).
    #[arg(long)]
    exact: bool,
    #[command(flatten)]
    dims: DimArgs,
}

#[derive(Args, Debug)]
struct SplitArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    train_out: PathBuf,
    #[arg(long)]
    test_out: PathBuf,
    #[arg(long, default_value_t = 0.25)]
    test_fraction: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn train_config(a: &TrainArgs) -> Result<PipelineConfig> {
    let kernel = match a.kernel.as_str() {
        "linear" => None,
        other => Some(other.parse::<KernelFamily>()?),
    };
    let config = PipelineConfig {
        rank: a.rank,
        oversample: a.oversample,
        power_iters: a.power_iters,
        l2: a.l2,
        embedding: a.embedding.parse::<EmbeddingMode>()?,
        kernel,
        features: a.features,
        bandwidth: a.bandwidth.parse::<Bandwidth>()?,
        loss: a.loss.parse::<LossKind>()?,
        l2_link: a.l2_link,
        optimizer: OptimizerConfig {
            learning_rate: a.lr,
            lr_decay: a.lr_decay,
            momentum: a.momentum,
            passes: a.passes,
            batch_size: a.batch_size,
            ..OptimizerConfig::default()
        },
        seed: a.seed,
        tfidf: a.tfidf,
    };
    config.validate()?;
    Ok(config)
}

fn load(path: &Path, opts: &ParseOptions) -> Result<Dataset> {
    let ds = parse_dataset(path, opts)?;
    log::info!(
        "{}: {} examples, {} features, {} labels",
        path.display(),
        ds.n_examples(),
        ds.n_features(),
        ds.n_labels()
    );
    Ok(ds)
}

/// Prediction files hold one comma-separated label list per example.
pub fn write_predictions<W: Write>(preds: &[Vec<usize>], out: W) -> Result<()> {
    let mut w = BufWriter::new(out);
    for p in preds {
        let line: Vec<String> = p.iter().map(|j| j.to_string()).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_predictions(path: &Path) -> Result<Vec<Vec<usize>>> {
    let file = File::open(path).map_err(|e| Error::Data(format!("cannot open {}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        let labels = line
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse::<usize>().map_err(|_| Error::Parse {
                    path: path.to_path_buf(),
                    line: i + 1,
                    message: format!("invalid label '{s}'"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        out.push(labels);
    }
    Ok(out)
}

fn cmd_train(a: &TrainArgs) -> Result<()> {
    let config = train_config(a)?;
    let ds = load(&a.train, &a.dims.options())?;
    let start = std::time::Instant::now();
    let pipeline = train_pipeline(&ds, &config)?;
    log::info!("trained in {:.2}s", start.elapsed().as_secs_f64());
    save_pipeline(&pipeline, &a.model)
}

fn cmd_predict(a: &PredictArgs) -> Result<()> {
    let rule: Inference = a.inference.parse()?;
    let pipeline = load_pipeline(&a.model)?;
    let opts = ParseOptions {
        n_features: Some(pipeline.n_features),
        n_labels: Some(pipeline.n_labels),
    };
    let ds = load(&a.test, &opts)?;
    let zhat = predict(&pipeline, &ds.x)?;
    let preds = decide(&zhat, rule, &pipeline.label_frequencies)?;
    write_predictions(&preds, File::create(&a.out)?)
}

fn cmd_eval(a: &EvalArgs, stdout: &mut dyn Write) -> Result<()> {
    let metrics = a
        .metric
        .iter()
        .map(|m| m.parse::<Metric>())
        .collect::<Result<Vec<_>>>()?;
    let rng = Rng::new(a.seed);
    let report = |metric: &Metric, ds: &Dataset, preds: &[Vec<usize>], out: &mut dyn Write| -> Result<()> {
        let f = metric.evaluator(&ds.y, preds)?;
        let r = bootstrap_ci(&metric.name(), ds.n_examples(), f, a.bootstrap, a.level, &rng)?;
        writeln!(out, "{}", r.to_json())?;
        Ok(())
    };
    if let Some(model) = &a.model {
        let pipeline = load_pipeline(model)?;
        let opts = ParseOptions {
            n_features: Some(pipeline.n_features),
            n_labels: Some(pipeline.n_labels),
        };
        let ds = load(&a.test, &opts)?;
        let zhat = predict(&pipeline, &ds.x)?;
        for m in &metrics {
            let preds = decide(&zhat, m.inference(), &pipeline.label_frequencies)?;
            report(m, &ds, &preds, stdout)?;
        }
    } else {
        let path = a.pred.as_ref().expect("clap requires --pred without --model");
        let ds = load(&a.test, &a.dims.options())?;
        let preds = read_predictions(path)?;
        for m in &metrics {
            report(m, &ds, &preds, stdout)?;
        }
    }
    Ok(())
}

fn cmd_embed(a: &EmbedArgs, stdout: &mut dyn Write) -> Result<()> {
    let ds = load(&a.train, &a.dims.options())?;
    let config = EmbeddingConfig {
        rank: a.rank,
        oversample: a.oversample,
        power_iters: a.power_iters,
        lambda: a.l2,
    };
    if a.exact && ds.n_features() > DIRECT_SOLVE_MAX_DIM {
        return Err(Error::Config(format!(
            "--exact needs at most {DIRECT_SOLVE_MAX_DIM} features, dataset has {}",
            ds.n_features()
        )));
    }
    let (model, emb) = embed(&ds.x, &ds.y, &config, a.seed)?;
    let fraction = captured_variance_fraction(&emb.sigma, &emb.sigma_ext)?;
    let mut summary = serde_json::json!({
        "rank": model.rank(),
        "sigma": emb.sigma,
        "captured_variance_fraction": fraction,
    });
    if a.exact {
        summary["exact_captured_variance"] =
            exact_captured_variance(&ds.x, &ds.y, &emb.sigma, a.l2)?.into();
    }
    save_embedding(
        &StoredEmbedding {
            model,
            sigma_ext: emb.sigma_ext,
        },
        &a.out,
    )?;
    writeln!(stdout, "{summary}")?;
    Ok(())
}

fn cmd_split(a: &SplitArgs) -> Result<()> {
    let ds = load(&a.data, &ParseOptions::default())?;
    let (train, test) = split(&ds, a.test_fraction, a.seed)?;
    save_dataset(&train, &a.train_out)?;
    save_dataset(&test, &a.test_out)
}

/// Process exit code for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e.kind() {
        ErrorKind::Config => 1,
        ErrorKind::Data | ErrorKind::Io => 2,
        ErrorKind::Numerical => 3,
    }
}

/// Runs the CLI with explicit arguments (including the program name),
/// writing results to `stdout` and diagnostics to standard error.
pub fn run<I, T>(args: I, stdout: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let result = match &cli.command {
        Command::Train(a) => cmd_train(a),
        Command::Predict(a) => cmd_predict(a),
        Command::Eval(a) => cmd_eval(a, stdout),
        Command::Embed(a) => cmd_embed(a, stdout),
        Command::Split(a) => cmd_split(a),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
