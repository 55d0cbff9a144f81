//! Command-line entry point.
//!
//! Subcommands: `train`, `predict`, `cross-validate`, `grid-search`,
//! `synthesize`, `report`. Options resolve in a fixed order: built-in
//! defaults, then the `RUMORLENS_SEED` environment variable (seed only),
//! then the `--config` file (flat JSON keyed by flag names), then the flags
//! themselves. Every run prints the resolved seed and a digest of the fully
//! resolved configuration before any other output.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data or model
//! file error, 3 training divergence.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, CommandFactory, Parser, Subcommand};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::data::{
    load_jsonl, load_model, read_predict_records, save_model, synthesize_corpus, LoadOptions,
};
use crate::error::{Error, Result};
use crate::evaluation::{
    compute_metrics, confusion, cross_validate, threshold_predictions, MetricsReport,
};
use crate::experiments::{
    grid_search, load_results, render_report, save_results, ExperimentResult, GridSpec,
    Hyperparams, ReportFormat, ResultsDocument, RunStatus, SelectionMetric,
};
use crate::layers::Activation;
use crate::model::{build_model, ModelConfig, Variant};
use crate::text::{encode_and_pad, tokenize, EncodedExample};

/// Environment variable consulted as the lowest-priority seed source.
pub const SEED_ENV_VAR: &str = "RUMORLENS_SEED";

const DEFAULT_SEED: u64 = 42;
const DEFAULT_K: usize = 10;

#[derive(Parser)]
#[command(
    name = "rumorlens",
    version,
    about = "Rumor detection on short texts with LSTM, LSTM-dropout and LSTM-CNN classifiers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one model on a labeled JSONL corpus and save it
    Train(TrainArgs),
    /// Score a JSONL file with a saved model
    Predict(PredictArgs),
    /// Stratified k-fold cross validation on a labeled corpus
    CrossValidate(CrossValidateArgs),
    /// Exhaustive hyperparameter grid search
    GridSearch(GridSearchArgs),
    /// Generate a balanced synthetic corpus
    Synthesize(SynthesizeArgs),
    /// Render a saved results document as a table
    Report(ReportArgs),
}

#[derive(Args, Clone, Default)]
struct CommonOpts {
    /// Flat key-value JSON config file; command-line flags win
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seed for every random decision in the run
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for parallel folds and grid combinations
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args, Clone, Default)]
struct ModelOpts {
    /// Architecture: lstm, lstm_dropout, lstm_cnn (or all, where supported)
    #[arg(long)]
    variant: Option<String>,
    #[arg(long)]
    max_len: Option<usize>,
    #[arg(long)]
    embed_dim: Option<usize>,
    #[arg(long)]
    hidden: Option<usize>,
    /// Convolution filter count (lstm_cnn)
    #[arg(long)]
    filters: Option<usize>,
    #[arg(long)]
    kernel_width: Option<usize>,
    #[arg(long)]
    pool: Option<usize>,
    /// Convolution activation: relu or tanh
    #[arg(long)]
    activation: Option<String>,
    /// Dropout rate for lstm_dropout
    #[arg(long)]
    dropout: Option<f64>,
}

#[derive(Args, Clone, Default)]
struct TrainingOpts {
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    /// Learning rate for plain SGD
    #[arg(long)]
    lr: Option<f64>,
}

#[derive(Args)]
struct TrainArgs {
    /// Labeled JSONL corpus
    #[arg(long)]
    data: PathBuf,
    /// Where to write the trained model
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    common: CommonOpts,
    #[command(flatten)]
    model_opts: ModelOpts,
    #[command(flatten)]
    training: TrainingOpts,
}

#[derive(Args)]
struct PredictArgs {
    /// JSONL records to score (label optional)
    #[arg(long)]
    data: PathBuf,
    /// Saved model file
    #[arg(long)]
    model: PathBuf,
    /// Write predictions here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    common: CommonOpts,
}

#[derive(Args)]
struct CrossValidateArgs {
    /// Labeled JSONL corpus
    #[arg(long)]
    data: PathBuf,
    /// Number of folds
    #[arg(long)]
    k: Option<usize>,
    /// Save the full results document here
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comparison table format: text or csv
    #[arg(long)]
    format: Option<String>,
    #[command(flatten)]
    common: CommonOpts,
    #[command(flatten)]
    model_opts: ModelOpts,
    #[command(flatten)]
    training: TrainingOpts,
}

#[derive(Args)]
struct GridSearchArgs {
    /// Labeled JSONL corpus
    #[arg(long)]
    data: PathBuf,
    /// Number of folds per combination
    #[arg(long)]
    k: Option<usize>,
    /// Save the full results document here
    #[arg(long)]
    out: Option<PathBuf>,
    /// Ranking metric: accuracy or f1_pos
    #[arg(long)]
    metric: Option<String>,
    #[command(flatten)]
    common: CommonOpts,
    #[command(flatten)]
    model_opts: ModelOpts,
    #[command(flatten)]
    training: TrainingOpts,
}

#[derive(Args)]
struct SynthesizeArgs {
    /// Where to write the generated JSONL corpus
    #[arg(long)]
    out: PathBuf,
    /// Number of examples
    #[arg(long)]
    n: Option<usize>,
    /// Per-token probability of drawing from the own-class lexicon
    #[arg(long)]
    signal: Option<f64>,
    #[arg(long)]
    max_len: Option<usize>,
    #[command(flatten)]
    common: CommonOpts,
}

#[derive(Args)]
struct ReportArgs {
    /// Results document produced by cross-validate or grid-search
    #[arg(long, value_name = "FILE")]
    r#in: PathBuf,
    /// text or csv
    #[arg(long)]
    format: Option<String>,
    /// Write the table here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    common: CommonOpts,
}

/// Runs the CLI against `argv` (without the binary name) and returns the
/// process exit code.
pub fn run<I>(argv: I) -> i32
where
    I: IntoIterator<Item = String>,
{
    let argv: Vec<String> =
        std::iter::once("rumorlens".to_string()).chain(argv).collect();
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    print!("{e}");
                    0
                }
                _ => {
                    eprint!("{e}");
                    1
                }
            };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            match &e {
                Error::Usage(_) | Error::Config(_) => {
                    let mut cmd = Cli::command();
                    let _ = cmd.print_help();
                    1
                }
                Error::TrainingDiverged { .. } => 3,
                _ => 2,
            }
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Train(args) => with_workers(args.common.workers_resolved()?, || cmd_train(&args)),
        Command::Predict(args) => cmd_predict(&args),
        Command::CrossValidate(args) => {
            with_workers(args.common.workers_resolved()?, || cmd_cross_validate(&args))
        }
        Command::GridSearch(args) => {
            with_workers(args.common.workers_resolved()?, || cmd_grid_search(&args))
        }
        Command::Synthesize(args) => cmd_synthesize(&args),
        Command::Report(args) => cmd_report(&args),
    }
}

impl CommonOpts {
    /// Worker resolution needs to happen before the rayon pool is built,
    /// i.e. before the full config resolution; flags and file agree because
    /// the same lookup rules apply.
    fn workers_resolved(&self) -> Result<Option<usize>> {
        if self.workers.is_some() {
            return Ok(self.workers);
        }
        let file = FileCfg::load(self.config.as_deref())?;
        file.usize("workers")
    }
}

fn with_workers<T>(workers: Option<usize>, f: impl FnOnce() -> Result<T> + Send) -> Result<T>
where
    T: Send,
{
    match workers {
        None => f(),
        Some(n) => {
            if n == 0 {
                return Err(Error::Usage("--workers must be at least 1".into()));
            }
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Usage(format!("cannot build worker pool: {e}")))?;
            pool.install(f)
        }
    }
}

/// Flat key-value view of the `--config` file.
struct FileCfg(serde_json::Map<String, Value>);

const KNOWN_KEYS: [&str; 24] = [
    "data", "model", "out", "in", "variant", "k", "seed", "epochs", "batch-size", "lr",
    "dropout", "max-len", "embed-dim", "hidden", "filters", "kernel-width", "pool",
    "activation", "workers", "format", "metric", "n", "signal", "min-count",
];
const EXTRA_KEYS: [&str; 1] = ["max-vocab"];

impl FileCfg {
    fn load(path: Option<&Path>) -> Result<FileCfg> {
        let Some(path) = path else {
            return Ok(FileCfg(serde_json::Map::new()));
        };
        let content = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let value: Value = serde_json::from_str(&content)
            .map_err(|e| Error::Usage(format!("config file is not valid JSON: {e}")))?;
        let Value::Object(map) = value else {
            return Err(Error::Usage("config file must be a JSON object".into()));
        };
        for key in map.keys() {
            if !KNOWN_KEYS.contains(&key.as_str()) && !EXTRA_KEYS.contains(&key.as_str()) {
                return Err(Error::Usage(format!("unknown config key {key:?}")));
            }
        }
        Ok(FileCfg(map))
    }

    fn usize(&self, key: &str) -> Result<Option<usize>> {
        match self.0.get(key) {
            None => Ok(None),
            Some(v) => v
                .as_u64()
                .map(|n| Some(n as usize))
                .ok_or_else(|| Error::Usage(format!("config key {key:?} must be an integer"))),
        }
    }

    fn u64_(&self, key: &str) -> Result<Option<u64>> {
        match self.0.get(key) {
            None => Ok(None),
            Some(v) => v
                .as_u64()
                .map(Some)
                .ok_or_else(|| Error::Usage(format!("config key {key:?} must be an integer"))),
        }
    }

    fn f64_(&self, key: &str) -> Result<Option<f64>> {
        match self.0.get(key) {
            None => Ok(None),
            Some(v) => v
                .as_f64()
                .map(Some)
                .ok_or_else(|| Error::Usage(format!("config key {key:?} must be a number"))),
        }
    }

    fn string(&self, key: &str) -> Result<Option<String>> {
        match self.0.get(key) {
            None => Ok(None),
            Some(v) => v
                .as_str()
                .map(|s| Some(s.to_string()))
                .ok_or_else(|| Error::Usage(format!("config key {key:?} must be a string"))),
        }
    }

    /// A view without the array-valued entries among `keys`; grid-search
    /// consumes those lists itself and resolves the rest as scalars.
    fn scalars_only(&self, keys: &[&str]) -> FileCfg {
        let mut map = self.0.clone();
        for key in keys {
            if matches!(map.get(*key), Some(Value::Array(_))) {
                map.remove(*key);
            }
        }
        FileCfg(map)
    }

    /// Scalar or list; used by grid-search dimensions.
    fn list(&self, key: &str) -> Option<Vec<Value>> {
        match self.0.get(key) {
            None => None,
            Some(Value::Array(items)) => Some(items.clone()),
            Some(v) => Some(vec![v.clone()]),
        }
    }
}

fn env_seed() -> Result<Option<u64>> {
    match std::env::var(SEED_ENV_VAR) {
        Err(_) => Ok(None),
        Ok(raw) => raw.trim().parse::<u64>().map(Some).map_err(|_| {
            Error::Usage(format!("{SEED_ENV_VAR} must be an unsigned integer, got {raw:?}"))
        }),
    }
}

fn resolve_seed(flag: Option<u64>, file: &FileCfg) -> Result<u64> {
    Ok(flag
        .or(file.u64_("seed")?)
        .or(env_seed()?)
        .unwrap_or(DEFAULT_SEED))
}

fn parse_activation(s: &str) -> Result<Activation> {
    Activation::parse(s)
        .ok_or_else(|| Error::Usage(format!("unknown activation {s:?} (expected relu or tanh)")))
}

fn parse_format(s: Option<&str>) -> Result<ReportFormat> {
    match s {
        None => Ok(ReportFormat::Text),
        Some(s) => ReportFormat::parse(s)
            .ok_or_else(|| Error::Usage(format!("unknown format {s:?} (expected text or csv)"))),
    }
}

#[derive(Clone, Copy)]
enum VariantSel {
    One(Variant),
    All,
}

impl VariantSel {
    fn list(&self) -> Vec<Variant> {
        match self {
            VariantSel::One(v) => vec![*v],
            VariantSel::All => Variant::ALL.to_vec(),
        }
    }
}

fn parse_variant_sel(s: &str, allow_all: bool) -> Result<VariantSel> {
    if s == "all" {
        if allow_all {
            return Ok(VariantSel::All);
        }
        return Err(Error::Usage("this command needs a single variant, not \"all\"".into()));
    }
    Variant::parse(s).map(VariantSel::One).ok_or_else(|| {
        Error::Usage(format!(
            "unknown variant {s:?} (expected lstm, lstm_dropout, lstm_cnn or all)"
        ))
    })
}

/// Fully resolved model/training settings shared by train, cross-validate
/// and grid-search.
struct ResolvedRun {
    variant: VariantSel,
    max_len: usize,
    embed_dim: usize,
    hidden: usize,
    filters: usize,
    kernel_width: usize,
    pool: usize,
    activation: Activation,
    dropout: f64,
    epochs: usize,
    batch_size: usize,
    lr: f64,
    seed: u64,
    min_count: usize,
    max_vocab: usize,
}

impl ResolvedRun {
    fn resolve(
        common: &CommonOpts,
        model: &ModelOpts,
        training: &TrainingOpts,
        allow_all_variants: bool,
        default_variant: VariantSel,
        file: &FileCfg,
    ) -> Result<ResolvedRun> {
        let hyper_defaults = Hyperparams::default();
        let variant = match model.variant.clone().or(file.string("variant")?) {
            None => default_variant,
            Some(s) => parse_variant_sel(&s, allow_all_variants)?,
        };
        let activation = match model.activation.clone().or(file.string("activation")?) {
            None => Activation::Relu,
            Some(s) => parse_activation(&s)?,
        };
        let run = ResolvedRun {
            variant,
            max_len: model.max_len.or(file.usize("max-len")?).unwrap_or(30),
            embed_dim: model.embed_dim.or(file.usize("embed-dim")?).unwrap_or(32),
            hidden: model.hidden.or(file.usize("hidden")?).unwrap_or(64),
            filters: model.filters.or(file.usize("filters")?).unwrap_or(32),
            kernel_width: model.kernel_width.or(file.usize("kernel-width")?).unwrap_or(3),
            pool: model.pool.or(file.usize("pool")?).unwrap_or(2),
            activation,
            dropout: model.dropout.or(file.f64_("dropout")?).unwrap_or(0.2),
            epochs: training.epochs.or(file.usize("epochs")?).unwrap_or(hyper_defaults.epochs),
            batch_size: training
                .batch_size
                .or(file.usize("batch-size")?)
                .unwrap_or(hyper_defaults.batch_size),
            lr: training.lr.or(file.f64_("lr")?).unwrap_or(hyper_defaults.learning_rate),
            seed: resolve_seed(common.seed, &file)?,
            min_count: file.usize("min-count")?.unwrap_or(1),
            max_vocab: file.usize("max-vocab")?.unwrap_or(20_000),
        };
        Ok(run)
    }

    fn load_options(&self) -> LoadOptions {
        LoadOptions { max_len: self.max_len, min_count: self.min_count, max_vocab: self.max_vocab }
    }

    fn model_config(&self, variant: Variant, vocab_size: usize) -> ModelConfig {
        ModelConfig {
            variant,
            vocab_size,
            max_len: self.max_len,
            embed_dim: self.embed_dim,
            hidden: self.hidden,
            dropout_rate: self.dropout,
            n_filters: self.filters,
            kernel_width: self.kernel_width,
            pool: self.pool,
            conv_activation: self.activation,
            seed: self.seed,
        }
    }

    fn hyperparams(&self) -> Hyperparams {
        Hyperparams {
            batch_size: self.batch_size,
            epochs: self.epochs,
            learning_rate: self.lr,
            conv_activation: self.activation,
            dropout_rate: self.dropout,
        }
    }

    fn echo_value(&self, command: &str, extra: &[(&str, Value)]) -> Value {
        let variant = match self.variant {
            VariantSel::One(v) => v.name().to_string(),
            VariantSel::All => "all".to_string(),
        };
        let mut map = BTreeMap::from([
            ("command".to_string(), json!(command)),
            ("variant".to_string(), json!(variant)),
            ("max-len".to_string(), json!(self.max_len)),
            ("embed-dim".to_string(), json!(self.embed_dim)),
            ("hidden".to_string(), json!(self.hidden)),
            ("filters".to_string(), json!(self.filters)),
            ("kernel-width".to_string(), json!(self.kernel_width)),
            ("pool".to_string(), json!(self.pool)),
            ("activation".to_string(), json!(self.activation.name())),
            ("dropout".to_string(), json!(self.dropout)),
            ("epochs".to_string(), json!(self.epochs)),
            ("batch-size".to_string(), json!(self.batch_size)),
            ("lr".to_string(), json!(self.lr)),
            ("seed".to_string(), json!(self.seed)),
            ("min-count".to_string(), json!(self.min_count)),
            ("max-vocab".to_string(), json!(self.max_vocab)),
        ]);
        for (k, v) in extra {
            map.insert(k.to_string(), v.clone());
        }
        serde_json::to_value(map).expect("echo value serializes")
    }
}

fn config_digest(resolved: &Value) -> String {
    let canonical = serde_json::to_string(resolved).expect("resolved config serializes");
    let hash = Sha256::digest(canonical.as_bytes());
    let hex: String = hash.iter().map(|b| format!("{b:02x}")).collect();
    hex[..12].to_string()
}

fn echo_resolved(seed: u64, resolved: &Value) {
    println!("# seed={seed} config-digest={}", config_digest(resolved));
}

fn write_or_print(path: Option<&Path>, content: &str) -> Result<()> {
    match path {
        None => {
            print!("{content}");
            Ok(())
        }
        Some(path) => {
            fs::write(path, content).map_err(|e| Error::io(path, e))?;
            println!("wrote {}", path.display());
            Ok(())
        }
    }
}

fn fold_line(prefix: &str, m: &MetricsReport) -> String {
    format!(
        "{prefix}  ACC {:.2}  PRE {:.2}  REC {:.2}  F-M {:.2}",
        m.accuracy.value, m.precision_pos.value, m.recall_pos.value, m.f1_pos.value
    )
}

fn print_malformed(malformed: &[crate::data::MalformedLine]) {
    for m in malformed {
        eprintln!("warning: skipped line {}: {}", m.line, m.reason);
    }
}

fn cmd_train(args: &TrainArgs) -> Result<()> {
    let file = FileCfg::load(args.common.config.as_deref())?;
    let run = ResolvedRun::resolve(
        &args.common,
        &args.model_opts,
        &args.training,
        false,
        VariantSel::One(Variant::Lstm),
        &file,
    )?;
    let VariantSel::One(variant) = run.variant else { unreachable!() };
    let resolved = run.echo_value(
        "train",
        &[
            ("data", json!(args.data.display().to_string())),
            ("model", json!(args.model.display().to_string())),
        ],
    );

    // Validate the configuration before paying for the corpus load.
    run.model_config(variant, 2).validate()?;
    run.hyperparams().validate()?;
    echo_resolved(run.seed, &resolved);

    let loaded = load_jsonl(&args.data, &run.load_options())?;
    print_malformed(&loaded.malformed);
    let dataset = loaded.dataset;
    println!(
        "loaded {} examples ({} rumor / {} non-rumor), vocabulary {}",
        dataset.examples.len(),
        dataset.class_counts[1],
        dataset.class_counts[0],
        dataset.vocab.size()
    );

    let config = run.model_config(variant, dataset.vocab.size());
    let mut model = build_model(&config)?;
    let mut print_epoch = |epoch: usize, loss: f64| println!("epoch {epoch}  loss {loss:.6}");
    model.fit(
        &dataset.examples,
        run.epochs,
        run.batch_size,
        run.lr,
        Some(&mut print_epoch),
    )?;

    let train_metrics = crate::evaluation::evaluate_model(&model, &dataset.examples)?;
    println!("{}", fold_line("train", &train_metrics));

    save_model(&model, &dataset.vocab, &args.model)?;
    println!("saved model to {}", args.model.display());
    Ok(())
}

fn cmd_predict(args: &PredictArgs) -> Result<()> {
    let file = FileCfg::load(args.common.config.as_deref())?;
    let seed = resolve_seed(args.common.seed, &file)?;
    let resolved = json!({
        "command": "predict",
        "data": args.data.display().to_string(),
        "model": args.model.display().to_string(),
        "seed": seed,
    });
    echo_resolved(seed, &resolved);

    let (model, vocab) = load_model(&args.model)?;
    let records = read_predict_records(&args.data)?;
    let max_len = model.config().max_len;

    let examples: Vec<EncodedExample> = records
        .iter()
        .map(|r| EncodedExample {
            indices: encode_and_pad(&tokenize(&r.text), &vocab, max_len),
            label: r.label.unwrap_or(0),
            event: String::new(),
        })
        .collect();
    let probs = model.predict(&examples)?;
    let preds = threshold_predictions(&probs);

    let mut out = String::new();
    for ((record, &p), &pred) in records.iter().zip(&probs).zip(&preds) {
        let label = if pred == 1 { "rumour" } else { "non-rumour" };
        out.push_str(&format!("{}\t{:.6}\t{}\n", record.id, p, label));
    }
    write_or_print(args.out.as_deref(), &out)?;

    if records.iter().all(|r| r.label.is_some()) {
        let labels: Vec<u8> = records.iter().map(|r| r.label.unwrap()).collect();
        let metrics = compute_metrics(&confusion(&preds, &labels)?)?;
        println!("{}", fold_line("labeled", &metrics));
    }
    Ok(())
}

/// Shared between cross-validate output and the results document.
fn singleton_grid(variants: &[Variant], hyper: &Hyperparams) -> GridSpec {
    GridSpec {
        variants: variants.to_vec(),
        batch_sizes: vec![hyper.batch_size],
        epochs: vec![hyper.epochs],
        learning_rates: vec![hyper.learning_rate],
        conv_activations: vec![hyper.conv_activation],
        dropout_rates: vec![hyper.dropout_rate],
    }
}

fn cmd_cross_validate(args: &CrossValidateArgs) -> Result<()> {
    let file = FileCfg::load(args.common.config.as_deref())?;
    let run = ResolvedRun::resolve(
        &args.common,
        &args.model_opts,
        &args.training,
        true,
        VariantSel::All,
        &file,
    )?;
    let k = args.k.or(file.usize("k")?).unwrap_or(DEFAULT_K);
    let format = parse_format(
        args.format.as_deref().or(file.string("format")?.as_deref()).or(None),
    )?;
    if k < 2 {
        return Err(Error::Usage("--k must be at least 2".into()));
    }
    let resolved = run.echo_value(
        "cross-validate",
        &[("data", json!(args.data.display().to_string())), ("k", json!(k))],
    );
    let variants = run.variant.list();
    for v in &variants {
        run.model_config(*v, 2).validate()?;
    }
    let hyper = run.hyperparams();
    hyper.validate()?;
    echo_resolved(run.seed, &resolved);

    let loaded = load_jsonl(&args.data, &run.load_options())?;
    print_malformed(&loaded.malformed);
    let dataset = loaded.dataset;
    println!(
        "loaded {} examples ({} rumor / {} non-rumor), vocabulary {}",
        dataset.examples.len(),
        dataset.class_counts[1],
        dataset.class_counts[0],
        dataset.vocab.size()
    );

    let mut results: Vec<ExperimentResult> = Vec::new();
    for (i, &variant) in variants.iter().enumerate() {
        let config = run.model_config(variant, dataset.vocab.size());
        println!("== {} ==", variant.technique());
        let started = std::time::Instant::now();
        let cv = cross_validate(&config, &hyper, &dataset, k, run.seed)?;
        for (fold, m) in cv.per_fold.iter().enumerate() {
            println!("{}", fold_line(&format!("fold {fold}"), m));
        }
        println!("{}", fold_line("mean", &cv.mean));
        results.push(ExperimentResult {
            combo_index: i,
            variant,
            hyperparams: hyper.clone(),
            status: RunStatus::Success { per_fold: cv.per_fold, mean: cv.mean },
            wall_secs: started.elapsed().as_secs_f64(),
            seed: run.seed,
            completed_at_unix: crate::experiments::unix_now(),
        });
    }

    println!();
    print!("{}", render_report(&results, format));

    if let Some(out) = &args.out {
        let doc = ResultsDocument::new(
            run.seed,
            k,
            SelectionMetric::Accuracy,
            singleton_grid(&variants, &hyper),
            resolved,
            results,
        );
        save_results(&doc, out)?;
        println!("wrote {}", out.display());
    }
    Ok(())
}

const GRID_DIMENSION_KEYS: [&str; 6] =
    ["variant", "batch-size", "epochs", "lr", "activation", "dropout"];

fn cmd_grid_search(args: &GridSearchArgs) -> Result<()> {
    let file = FileCfg::load(args.common.config.as_deref())?;
    let run = ResolvedRun::resolve(
        &args.common,
        &args.model_opts,
        &args.training,
        true,
        VariantSel::All,
        &file.scalars_only(&GRID_DIMENSION_KEYS),
    )?;
    let k = args.k.or(file.usize("k")?).unwrap_or(DEFAULT_K);
    if k < 2 {
        return Err(Error::Usage("--k must be at least 2".into()));
    }
    let metric_name = args.metric.clone().or(file.string("metric")?);
    let selection = match metric_name.as_deref() {
        None => SelectionMetric::Accuracy,
        Some(s) => SelectionMetric::parse(s).ok_or_else(|| {
            Error::Usage(format!("unknown metric {s:?} (expected accuracy or f1_pos)"))
        })?,
    };

    let grid = resolve_grid(args, &run, &file)?;
    let combos = grid.combinations().len();
    let resolved = run.echo_value(
        "grid-search",
        &[
            ("data", json!(args.data.display().to_string())),
            ("k", json!(k)),
            ("grid", serde_json::to_value(&grid).expect("grid serializes")),
        ],
    );
    echo_resolved(run.seed, &resolved);

    let loaded = load_jsonl(&args.data, &run.load_options())?;
    print_malformed(&loaded.malformed);
    let dataset = loaded.dataset;
    println!(
        "loaded {} examples, searching {combos} combinations with {k}-fold validation",
        dataset.examples.len()
    );

    let base_config = run.model_config(Variant::Lstm, dataset.vocab.size());
    let results = grid_search(&grid, &base_config, &dataset, k, run.seed, selection)?;

    println!("rank  technique  batch  epochs  lr  activation  dropout  ACC  PRE  REC  F-M");
    for (rank, r) in results.iter().enumerate() {
        let h = &r.hyperparams;
        match r.mean_metrics() {
            Some(m) => println!(
                "{}  {}  {}  {}  {}  {}  {}  {:.2}  {:.2}  {:.2}  {:.2}",
                rank + 1,
                r.variant.technique(),
                h.batch_size,
                h.epochs,
                h.learning_rate,
                h.conv_activation.name(),
                h.dropout_rate,
                m.accuracy.value,
                m.precision_pos.value,
                m.recall_pos.value,
                m.f1_pos.value
            ),
            None => {
                let RunStatus::Failed { error } = &r.status else { unreachable!() };
                println!(
                    "{}  {}  {}  {}  {}  {}  {}  FAILED: {error}",
                    rank + 1,
                    r.variant.technique(),
                    h.batch_size,
                    h.epochs,
                    h.learning_rate,
                    h.conv_activation.name(),
                    h.dropout_rate
                );
            }
        }
    }

    if let Some(out) = &args.out {
        let doc = ResultsDocument::new(run.seed, k, selection, grid, resolved, results);
        save_results(&doc, out)?;
        println!("wrote {}", out.display());
    }
    Ok(())
}

/// Grid dimensions come from the config file (lists or scalars); a scalar
/// command-line flag pins its dimension to that single value.
fn resolve_grid(args: &GridSearchArgs, run: &ResolvedRun, file: &FileCfg) -> Result<GridSpec> {
    let defaults = GridSpec::default();

    let variants = match &args.model_opts.variant {
        Some(s) => parse_variant_sel(s, true)?.list(),
        None => match file.list("variant") {
            None => defaults.variants,
            Some(items) => {
                let mut out = Vec::new();
                for item in items {
                    let s = item.as_str().ok_or_else(|| {
                        Error::Usage("config key \"variant\" must hold strings".into())
                    })?;
                    out.extend(parse_variant_sel(s, true)?.list());
                }
                out.dedup();
                out
            }
        },
    };

    fn usizes(file: &FileCfg, key: &str, flag: Option<usize>, dflt: &[usize]) -> Result<Vec<usize>> {
        if let Some(v) = flag {
            return Ok(vec![v]);
        }
        match file.list(key) {
            None => Ok(dflt.to_vec()),
            Some(items) => items
                .iter()
                .map(|v| {
                    v.as_u64()
                        .map(|n| n as usize)
                        .ok_or_else(|| Error::Usage(format!("config key {key:?} must hold integers")))
                })
                .collect(),
        }
    }

    fn f64s(file: &FileCfg, key: &str, flag: Option<f64>, dflt: &[f64]) -> Result<Vec<f64>> {
        if let Some(v) = flag {
            return Ok(vec![v]);
        }
        match file.list(key) {
            None => Ok(dflt.to_vec()),
            Some(items) => items
                .iter()
                .map(|v| {
                    v.as_f64()
                        .ok_or_else(|| Error::Usage(format!("config key {key:?} must hold numbers")))
                })
                .collect(),
        }
    }

    let conv_activations = match &args.model_opts.activation {
        Some(s) => vec![parse_activation(s)?],
        None => match file.list("activation") {
            None => defaults.conv_activations,
            Some(items) => items
                .iter()
                .map(|v| {
                    v.as_str()
                        .ok_or_else(|| Error::Usage("config key \"activation\" must hold strings".into()))
                        .and_then(parse_activation)
                })
                .collect::<Result<_>>()?,
        },
    };

    Ok(GridSpec {
        variants,
        batch_sizes: usizes(file, "batch-size", args.training.batch_size, &defaults.batch_sizes)?,
        epochs: usizes(file, "epochs", args.training.epochs, &defaults.epochs)?,
        learning_rates: f64s(file, "lr", args.training.lr, &defaults.learning_rates)?,
        conv_activations,
        dropout_rates: f64s(file, "dropout", args.model_opts.dropout, &[run.dropout])?,
    })
}

fn cmd_synthesize(args: &SynthesizeArgs) -> Result<()> {
    let file = FileCfg::load(args.common.config.as_deref())?;
    let seed = resolve_seed(args.common.seed, &file)?;
    let n = args.n.or(file.usize("n")?).unwrap_or(2000);
    let signal = args.signal.or(file.f64_("signal")?).unwrap_or(0.9);
    let max_len = args.max_len.or(file.usize("max-len")?).unwrap_or(30);
    if n < 20 {
        return Err(Error::Usage("--n must be at least 20".into()));
    }
    if !(0.5..=1.0).contains(&signal) {
        return Err(Error::Usage("--signal must be in [0.5, 1.0]".into()));
    }
    if max_len < 5 {
        return Err(Error::Usage("--max-len must be at least 5".into()));
    }
    let resolved = json!({
        "command": "synthesize",
        "out": args.out.display().to_string(),
        "n": n,
        "signal": signal,
        "max-len": max_len,
        "seed": seed,
    });
    echo_resolved(seed, &resolved);

    let dataset = synthesize_corpus(&args.out, n, signal, max_len, seed)?;
    println!(
        "wrote {} examples ({} rumor / {} non-rumor, vocabulary {}) to {}",
        dataset.examples.len(),
        dataset.class_counts[1],
        dataset.class_counts[0],
        dataset.vocab.size(),
        args.out.display()
    );
    Ok(())
}

fn cmd_report(args: &ReportArgs) -> Result<()> {
    let file = FileCfg::load(args.common.config.as_deref())?;
    let seed = resolve_seed(args.common.seed, &file)?;
    let format = parse_format(
        args.format.as_deref().or(file.string("format")?.as_deref()).or(None),
    )?;
    let resolved = json!({
        "command": "report",
        "in": args.r#in.display().to_string(),
        "format": match format { ReportFormat::Text => "text", ReportFormat::Csv => "csv" },
        "seed": seed,
    });
    echo_resolved(seed, &resolved);

    let doc = load_results(&args.r#in)?;
    let table = render_report(&doc.results, format);
    write_or_print(args.out.as_deref(), &table)
}
