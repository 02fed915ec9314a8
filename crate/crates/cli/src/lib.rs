//! The `f10` command line: train, predict, evaluate and grid.

use std::error::Error as StdError;
use std::ffi::OsString;
use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use f10sgd::dataset::{RawClassified, RawSequence};
use f10sgd::eval::{accuracy, span_f1, EvalReport};
use f10sgd::features::{extract_ner_sentence_features, load_gazetteer, Gazetteer};
use f10sgd::formats::{
    conll_to_raw, read_classification_raw, read_conll_sentences, read_conll_tokens, write_conll, TextOptions, LABEL_PREFIX,
};
use f10sgd::model_io::{load_model, save_model, ModelFile, TaskKind};
use f10sgd::optimizer::{grid_search_alpha0, train_with};
use f10sgd::{Alphabet, CrfModel, Dataset, Hyperparams, LinearModel, MaxEntModel, SparseVector};

type BoxResult<T> = Result<T, Box<dyn StdError>>;

/// Environment variable overriding the default thread count.
pub const THREADS_ENV: &str = "F10_THREADS";

pub const DEFAULT_GRID: &[f64] = &[0.01, 0.05, 0.1, 0.5, 1.0];

#[derive(Parser, Debug)]
#[command(name = "f10", version, about = "Elastic-net MaxEnt and CRF trainer")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train a model and save it
    Train(TrainArgs),
    /// Write predictions for an input file
    Predict(PredictArgs),
    /// Score a saved model on a labeled file
    Evaluate(EvaluateArgs),
    /// Pick alpha0 by dev-set grid search
    Grid(GridArgs),
}

#[derive(Args, Debug)]
struct DataArgs {
    /// maxent or crf
    #[arg(long, value_parser = TaskKind::from_str)]
    task: TaskKind,
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    dev: Option<PathBuf>,
    /// Longest n-gram for classification text
    #[arg(long, default_value_t = 2)]
    ngrams: usize,
    #[arg(long)]
    no_lowercase: bool,
    /// Add a bias feature to every classification example
    #[arg(long)]
    bias: bool,
    /// Gazetteer for CRF features, as NAME=PATH (repeatable)
    #[arg(long, value_name = "NAME=PATH")]
    gazetteer: Vec<String>,
}

#[derive(Args, Debug)]
struct OptimizerArgs {
    #[arg(long, default_value_t = 10)]
    epochs: usize,
    /// First active-bias epoch; equal to --epochs for plain SGD
    #[arg(long, default_value_t = 7)]
    ab_start: usize,
    #[arg(long, default_value_t = 0.1)]
    alpha0: f64,
    #[arg(long, default_value_t = 0.0)]
    l1: f64,
    #[arg(long, default_value_t = 0.0)]
    l2: f64,
    /// Worker threads [default: $F10_THREADS or all cores]
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Confidence history length for active bias
    #[arg(long, default_value_t = 3)]
    history: usize,
    /// Stop when the dev metric stalls for two epochs
    #[arg(long)]
    early_stop: bool,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    opt: OptimizerArgs,
    #[arg(long)]
    model: PathBuf,
}

#[derive(Args, Debug)]
struct GridArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    opt: OptimizerArgs,
    /// Comma-separated alpha0 candidates [default: 0.01,0.05,0.1,0.5,1.0]
    #[arg(long, value_delimiter = ',')]
    alphas: Vec<f64>,
    /// Retrain with the best alpha0 and save here
    #[arg(long)]
    model: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    input: PathBuf,
    /// Defaults to stdout
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    test: PathBuf,
    /// Must match the model's task when given
    #[arg(long, value_parser = TaskKind::from_str)]
    task: Option<TaskKind>,
}

/// A command line problem detected after parsing.
#[derive(Debug)]
struct UsageError(String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl StdError for UsageError {}

/// Featurization settings, stored in the model file so prediction
/// reproduces training-time features.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureConfig {
    pub text: TextOptions,
    pub gazetteers: Vec<(String, PathBuf)>,
}

impl FeatureConfig {
    fn from_args(data: &DataArgs) -> Result<Self, UsageError> {
        let gazetteers = data
            .gazetteer
            .iter()
            .map(|spec| match spec.split_once('=') {
                Some((name, path)) if !name.is_empty() && !path.is_empty() => {
                    Ok((name.to_owned(), PathBuf::from(path)))
                }
                _ => Err(UsageError(format!("--gazetteer expects NAME=PATH, got `{spec}`"))),
            })
            .collect::<Result<_, _>>()?;
        if data.ngrams == 0 {
            return Err(UsageError("--ngrams must be at least 1".into()));
        }
        Ok(FeatureConfig {
            text: TextOptions {
                n_max: data.ngrams,
                lowercase: !data.no_lowercase,
                bias: data.bias,
            },
            gazetteers,
        })
    }

    fn load_gazetteers(&self) -> BoxResult<Vec<Gazetteer>> {
        self.gazetteers
            .iter()
            .map(|(name, path)| {
                load_gazetteer(path, name).map_err(|e| format!("gazetteer {}: {e}", path.display()).into())
            })
            .collect()
    }
}

impl fmt::Display for FeatureConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "ngrams={};lowercase={};bias={}",
            self.text.n_max, self.text.lowercase as u8, self.text.bias as u8
        )?;
        for (name, path) in &self.gazetteers {
            write!(f, ";gazetteer={}={}", name, path.display())?;
        }
        Ok(())
    }
}

impl FromStr for FeatureConfig {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let mut cfg = FeatureConfig {
            text: TextOptions::default(),
            gazetteers: Vec::new(),
        };
        let flag = |v: &str| match v {
            "0" => Ok(false),
            "1" => Ok(true),
            _ => Err(format!("bad flag `{v}`")),
        };
        for item in s.split(';').filter(|i| !i.is_empty()) {
            let (key, value) = item.split_once('=').ok_or_else(|| format!("bad config entry `{item}`"))?;
            match key {
                "ngrams" => cfg.text.n_max = value.parse().map_err(|_| format!("bad ngrams `{value}`"))?,
                "lowercase" => cfg.text.lowercase = flag(value)?,
                "bias" => cfg.text.bias = flag(value)?,
                "gazetteer" => {
                    let (name, path) = value
                        .split_once('=')
                        .ok_or_else(|| format!("bad gazetteer entry `{value}`"))?;
                    cfg.gazetteers.push((name.to_owned(), PathBuf::from(path)));
                }
                other => return Err(format!("unknown config key `{other}`")),
            }
        }
        Ok(cfg)
    }
}

fn hyperparams(opt: &OptimizerArgs) -> BoxResult<Hyperparams> {
    let threads = match opt.threads {
        Some(t) => t,
        None => default_threads()?,
    };
    if threads == 0 {
        return Err(UsageError("--threads must be at least 1".into()).into());
    }
    let hyper = Hyperparams {
        alpha0: opt.alpha0,
        lambda1: opt.l1,
        lambda2: opt.l2,
        epochs: opt.epochs,
        // the default start epoch means "no sampling" for shorter runs
        ab_start_epoch: opt.ab_start.min(opt.epochs),
        history: opt.history,
        threads,
        seed: opt.seed,
        early_stop: opt.early_stop,
    };
    hyper.validate().map_err(|e| UsageError(e.to_string()))?;
    Ok(hyper)
}

fn default_threads() -> BoxResult<usize> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| UsageError(format!("{THREADS_ENV} must be a positive integer, got `{v}`")).into()),
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

fn encode_features(features: &Alphabet, strings: &[String]) -> SparseVector {
    SparseVector::from_indicators(strings.iter().filter_map(|s| features.id_of(s)))
}

/// Training data in both tasks' shapes.
enum Prepared {
    MaxEnt {
        train: Dataset<f10sgd::ClassifiedExample>,
        dev: Option<Vec<f10sgd::ClassifiedExample>>,
    },
    Crf {
        train: Dataset<f10sgd::SequenceExample>,
        dev: Option<Vec<f10sgd::SequenceExample>>,
    },
}

impl Prepared {
    fn load(data: &DataArgs, cfg: &FeatureConfig) -> BoxResult<Self> {
        Ok(match data.task {
            TaskKind::MaxEnt => {
                let train = Dataset::from_raw(&read_classification_raw(&data.train, &cfg.text)?)?;
                let dev = match &data.dev {
                    Some(p) => {
                        let raw: Vec<RawClassified> = read_classification_raw(p, &cfg.text)?;
                        Some(Dataset::encode_with(&raw, &train.features, &train.labels)?.examples)
                    }
                    None => None,
                };
                Prepared::MaxEnt { train, dev }
            }
            TaskKind::Crf => {
                let gaz = cfg.load_gazetteers()?;
                let train = Dataset::from_raw(&conll_to_raw(&read_conll_sentences(&data.train)?, &gaz))?;
                let dev = match &data.dev {
                    Some(p) => {
                        let raw: Vec<RawSequence> = conll_to_raw(&read_conll_sentences(p)?, &gaz);
                        Some(Dataset::encode_with(&raw, &train.features, &train.labels)?.examples)
                    }
                    None => None,
                };
                Prepared::Crf { train, dev }
            }
        })
    }

    fn alphabets(&self) -> (&Alphabet, &Alphabet) {
        match self {
            Prepared::MaxEnt { train, .. } => (&train.labels, &train.features),
            Prepared::Crf { train, .. } => (&train.labels, &train.features),
        }
    }

    fn train(&self, hyper: &Hyperparams, out: &mut dyn Write) -> BoxResult<Vec<f64>> {
        match self {
            Prepared::MaxEnt { train, dev } => {
                let model = MaxEntModel::new(train.features.len(), train.labels.len());
                fit(&model, train, dev.as_deref(), hyper, out)
            }
            Prepared::Crf { train, dev } => {
                let model = CrfModel::new(train.features.len(), train.labels.len());
                fit(&model, train, dev.as_deref(), hyper, out)
            }
        }
    }

    fn grid(&self, hyper: &Hyperparams, candidates: &[f64]) -> BoxResult<f10sgd::optimizer::GridResult> {
        let missing = || UsageError("grid needs --dev".into());
        Ok(match self {
            Prepared::MaxEnt { train, dev } => {
                let model = MaxEntModel::new(train.features.len(), train.labels.len());
                let dev = dev.as_deref().ok_or_else(missing)?;
                grid_search_alpha0(&model, &train.examples, dev, &train.labels, hyper, candidates)?
            }
            Prepared::Crf { train, dev } => {
                let model = CrfModel::new(train.features.len(), train.labels.len());
                let dev = dev.as_deref().ok_or_else(missing)?;
                grid_search_alpha0(&model, &train.examples, dev, &train.labels, hyper, candidates)?
            }
        })
    }
}

fn fit<M: LinearModel>(
    model: &M,
    train: &Dataset<M::Example>,
    dev: Option<&[M::Example]>,
    hyper: &Hyperparams,
    out: &mut dyn Write,
) -> BoxResult<Vec<f64>> {
    let mut write_err = None;
    let result = train_with(model, &train.examples, dev, &train.labels, hyper, |report| {
        let tag = if report.active_bias { " ab" } else { "" };
        if let Err(e) = writeln!(out, "{report}{tag}") {
            write_err.get_or_insert(e);
        }
    })?;
    if let Some(e) = write_err {
        return Err(e.into());
    }
    Ok(result.weights)
}

fn save(
    path: &Path,
    task: TaskKind,
    prepared: &Prepared,
    cfg: &FeatureConfig,
    weights: Vec<f64>,
    out: &mut dyn Write,
) -> BoxResult<()> {
    let (labels, features) = prepared.alphabets();
    let file = ModelFile {
        task,
        labels: labels.clone(),
        features: features.clone(),
        config: cfg.to_string(),
        weights,
    };
    save_model(&file, path)?;
    let bytes = fs::metadata(path)?.len();
    writeln!(
        out,
        "saved {} nnz={} bytes={}",
        path.display(),
        file.nonzero_count(),
        bytes
    )?;
    Ok(())
}

fn cmd_train(args: &TrainArgs, out: &mut dyn Write) -> BoxResult<()> {
    let cfg = FeatureConfig::from_args(&args.data)?;
    let hyper = hyperparams(&args.opt)?;
    let prepared = Prepared::load(&args.data, &cfg)?;
    let weights = prepared.train(&hyper, out)?;
    save(&args.model, args.data.task, &prepared, &cfg, weights, out)
}

fn cmd_grid(args: &GridArgs, out: &mut dyn Write) -> BoxResult<()> {
    let cfg = FeatureConfig::from_args(&args.data)?;
    let hyper = hyperparams(&args.opt)?;
    if args.data.dev.is_none() {
        return Err(UsageError("grid needs --dev".into()).into());
    }
    let candidates = if args.alphas.is_empty() { DEFAULT_GRID } else { &args.alphas };
    let prepared = Prepared::load(&args.data, &cfg)?;
    let grid = prepared.grid(&hyper, candidates)?;
    for (alpha0, metric) in &grid.table {
        writeln!(out, "alpha0={alpha0} dev={metric:.6}")?;
    }
    writeln!(out, "best_alpha0={}", grid.best_alpha0)?;
    if let Some(path) = &args.model {
        let best = Hyperparams {
            alpha0: grid.best_alpha0,
            ..hyper
        };
        let weights = prepared.train(&best, out)?;
        save(path, args.data.task, &prepared, &cfg, weights, out)?;
    }
    Ok(())
}

/// A loaded model ready to featurize and decode.
struct Loaded {
    file: ModelFile,
    cfg: FeatureConfig,
}

impl Loaded {
    fn open(path: &Path) -> BoxResult<Self> {
        let file = load_model(path).map_err(|e| format!("{}: {e}", path.display()))?;
        let cfg = file
            .config
            .parse()
            .map_err(|e| format!("{}: bad config: {e}", path.display()))?;
        Ok(Loaded { file, cfg })
    }

    fn label(&self, id: usize) -> String {
        self.file.labels.string_of(id as u32).unwrap_or_default().to_owned()
    }

    fn classify(&self, texts: &[&str]) -> Vec<String> {
        let model = MaxEntModel::new(self.file.features.len(), self.file.labels.len());
        texts
            .iter()
            .map(|text| {
                let sv = encode_features(&self.file.features, &self.cfg.text.featurize(text));
                self.label(model.predict(&self.file.weights, &sv))
            })
            .collect()
    }

    fn tag(&self, sentences: &[Vec<&str>]) -> BoxResult<Vec<Vec<String>>> {
        let gaz = self.cfg.load_gazetteers()?;
        let model = CrfModel::new(self.file.features.len(), self.file.labels.len());
        Ok(sentences
            .iter()
            .map(|tokens| {
                let feats: Vec<SparseVector> = extract_ner_sentence_features(tokens, &gaz)
                    .iter()
                    .map(|f| encode_features(&self.file.features, f))
                    .collect();
                model
                    .viterbi_decode(&self.file.weights, &feats)
                    .into_iter()
                    .map(|y| self.label(y))
                    .collect()
            })
            .collect())
    }
}

/// Drops leading `__label__` tokens so labeled files can be fed to predict.
fn strip_labels(line: &str) -> &str {
    let mut rest = line.trim_start();
    while let Some(tail) = rest.strip_prefix(LABEL_PREFIX) {
        rest = tail.trim_start_matches(|c: char| !c.is_ascii_whitespace()).trim_start();
    }
    rest
}

fn cmd_predict(args: &PredictArgs, out: &mut dyn Write) -> BoxResult<()> {
    let loaded = Loaded::open(&args.model)?;
    let text = match loaded.file.task {
        TaskKind::MaxEnt => {
            let input = fs::read_to_string(&args.input)?;
            let texts: Vec<&str> = input.lines().map(strip_labels).collect();
            let mut s = String::new();
            for label in loaded.classify(&texts) {
                s.push_str(&label);
                s.push('\n');
            }
            s
        }
        TaskKind::Crf => {
            let sentences = read_conll_tokens(&args.input)?;
            let tokens: Vec<Vec<&str>> = sentences.iter().map(|s| s.tokens()).collect();
            let tags = loaded.tag(&tokens)?;
            write_conll(&sentences, Some(&tags))
        }
    };
    match &args.output {
        Some(path) => fs::write(path, text)?,
        None => out.write_all(text.as_bytes())?,
    }
    Ok(())
}

fn cmd_evaluate(args: &EvaluateArgs, out: &mut dyn Write) -> BoxResult<()> {
    let loaded = Loaded::open(&args.model)?;
    if let Some(task) = args.task {
        if task != loaded.file.task {
            return Err(format!(
                "--task {} does not match model task {}",
                task.as_str(),
                loaded.file.task.as_str()
            )
            .into());
        }
    }
    let report = evaluate_file(&loaded, &args.test)?;
    write!(out, "{report}")?;
    Ok(())
}

fn evaluate_file(loaded: &Loaded, test: &Path) -> BoxResult<EvalReport> {
    Ok(match loaded.file.task {
        TaskKind::MaxEnt => {
            let input = fs::read_to_string(test)?;
            let mut gold = Vec::new();
            let mut texts = Vec::new();
            for (i, line) in input.lines().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                let (label, body) = f10sgd::formats::parse_labeled_line(test, i + 1, line)?;
                gold.push(label.to_owned());
                texts.push(body);
            }
            if gold.is_empty() {
                return Err(f10sgd::Error::EmptyDataset.into());
            }
            accuracy(&gold, &loaded.classify(&texts))?
        }
        TaskKind::Crf => {
            let sentences = read_conll_sentences(test)?;
            let tokens: Vec<Vec<&str>> = sentences.iter().map(|s| s.tokens()).collect();
            let gold: Vec<Vec<String>> = sentences
                .iter()
                .map(|s| s.tags().into_iter().map(str::to_owned).collect())
                .collect();
            let pred = loaded.tag(&tokens)?;
            span_f1(&gold, &pred)?
        }
    })
}

/// Runs the command line with `args` (including the program name) and
/// returns the process exit code: 0 on success, 1 on usage errors, 2 on
/// runtime errors.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    let stdout = io::stdout();
    let mut out = stdout.lock();
    let result = match &cli.command {
        Command::Train(a) => cmd_train(a, &mut out),
        Command::Predict(a) => cmd_predict(a, &mut out),
        Command::Evaluate(a) => cmd_evaluate(a, &mut out),
        Command::Grid(a) => cmd_grid(a, &mut out),
    };
    match result {
        Ok(()) => 0,
        Err(e) if e.is::<UsageError>() => {
            eprintln!("error: {e}");
            1
        }
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}
