//! `lazyprop` command line: `train`, `surface`, `trace`, `coreset`.
//!
//! Every setting can come from a flag or from a flat `key=value` file passed
//! with `--config`; flags win over the file, the file over built-in
//! defaults. Each run directory gets a `config.txt` holding the merged
//! settings, so `--config <run>/config.txt` replays it.

mod config;
mod manifest;

pub use config::ConfigFile;
pub use manifest::{DatasetFingerprint, ManifestStatus, RunManifest, MANIFEST_FILE};

use std::ffi::OsString;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, CommandFactory, Parser, Subcommand};

use crate::datasets::{IdxOptions, load_idx_with, make_two_clouds, write_idx, Dataset, ToyTaskSpec};
use crate::error::{Error, Result};
use crate::gating::GateKind;
use crate::landscape::{self, AxisRange, GridSpec};
use crate::model::{LinearToyModel, Model, ToyTargets};
use crate::report::{read_summary, write_json, MetricsWriter};
use crate::scalar::Scalar;
use crate::trainer::{run_experiment, RunStatus, RunSummary, TrainConfig, Trainer};

pub const CONFIG_ECHO_FILE: &str = "config.txt";

#[derive(Debug, Parser)]
#[command(name = "lazyprop", version, about = "Error-gated one-sample SGD experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train an MLP on MNIST/EMNIST or the linear toy model on two clouds
    Train(TrainArgs),
    /// Sample toy loss and accuracy over a (w1, w2) grid
    Surface(SurfaceArgs),
    /// Record toy weight trajectories from preset or explicit starts
    Trace(TraceArgs),
    /// Export the remembered samples of a lazy run
    Coreset(CoresetArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetKind {
    Mnist,
    Emnist,
    Toy,
}

impl DatasetKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DatasetKind::Mnist => "mnist",
            DatasetKind::Emnist => "emnist",
            DatasetKind::Toy => "toy",
        }
    }

    /// Conventional file names (train images, train labels, test images, test labels).
    fn idx_names(self) -> [&'static str; 4] {
        match self {
            DatasetKind::Emnist => [
                "emnist-digits-train-images-idx3-ubyte",
                "emnist-digits-train-labels-idx1-ubyte",
                "emnist-digits-test-images-idx3-ubyte",
                "emnist-digits-test-labels-idx1-ubyte",
            ],
            _ => [
                "train-images-idx3-ubyte",
                "train-labels-idx1-ubyte",
                "t10k-images-idx3-ubyte",
                "t10k-labels-idx1-ubyte",
            ],
        }
    }
}

impl FromStr for DatasetKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "mnist" => Ok(DatasetKind::Mnist),
            "emnist" => Ok(DatasetKind::Emnist),
            "toy" => Ok(DatasetKind::Toy),
            other => Err(format!("unknown dataset '{other}' (expected mnist, emnist or toy)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Precision {
    F32,
    #[default]
    F64,
}

impl FromStr for Precision {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "f32" => Ok(Precision::F32),
            "f64" => Ok(Precision::F64),
            other => Err(format!("unknown precision '{other}' (expected f32 or f64)")),
        }
    }
}

impl fmt::Display for Precision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Precision::F32 => "f32",
            Precision::F64 => "f64",
        })
    }
}

/// Stop threshold, or `none` to switch the default cutoff off.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StopAcc(pub Option<f64>);

impl FromStr for StopAcc {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s == "none" {
            return Ok(StopAcc(None));
        }
        s.parse()
            .map(|v| StopAcc(Some(v)))
            .map_err(|_| format!("expected an accuracy in [0, 1] or 'none', got '{s}'"))
    }
}

impl fmt::Display for StopAcc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            Some(v) => write!(f, "{v}"),
            None => f.write_str("none"),
        }
    }
}

/// `w1,w2`
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point2(pub [f64; 2]);

impl FromStr for Point2 {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        let bad = || format!("expected 'w1,w2', got '{s}'");
        if parts.len() != 2 {
            return Err(bad());
        }
        let a = parts[0].parse().map_err(|_| bad())?;
        let b = parts[1].parse().map_err(|_| bad())?;
        Ok(Point2([a, b]))
    }
}

impl fmt::Display for Point2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{}", self.0[0], self.0[1])
    }
}

/// Comma-separated list of seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedList(pub Vec<u64>);

impl FromStr for SeedList {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let seeds = s
            .split(',')
            .map(|p| p.trim().parse::<u64>().map_err(|_| format!("bad seed '{p}' in '{s}'")))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        if seeds.is_empty() {
            return Err("empty seed list".into());
        }
        Ok(SeedList(seeds))
    }
}

/// A rule or `all`.
#[derive(Debug, Clone, PartialEq)]
pub struct RuleSel(pub Vec<GateKind>);

impl FromStr for RuleSel {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s == "all" {
            return Ok(RuleSel(GateKind::ALL.to_vec()));
        }
        s.parse::<GateKind>().map(|g| RuleSel(vec![g])).map_err(|e| e.to_string())
    }
}

/// A preset id (1-based) or `all`.
#[derive(Debug, Clone, PartialEq)]
pub struct PresetSel(pub Vec<usize>);

impl FromStr for PresetSel {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let n = landscape::PRESET_INITIAL_CONDITIONS.len();
        if s == "all" {
            return Ok(PresetSel((1..=n).collect()));
        }
        match s.parse::<usize>() {
            Ok(id) if (1..=n).contains(&id) => Ok(PresetSel(vec![id])),
            _ => Err(format!("preset must be 1..={n} or 'all', got '{s}'")),
        }
    }
}

fn parse_rule(s: &str) -> std::result::Result<GateKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_targets(s: &str) -> std::result::Result<ToyTargets, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Geometry of the two-cloud toy data.
#[derive(Debug, Clone, Args)]
pub struct ToyDataArgs {
    /// Points per class
    #[arg(long)]
    pub n_per_class: Option<usize>,
    /// Disc radius (centres at (-2,0) and (2,0))
    #[arg(long)]
    pub radius: Option<f64>,
    /// Seed of the toy point sampler
    #[arg(long)]
    pub data_seed: Option<u64>,
    /// Toy regression targets: signed (-1/+1) or zero-one
    #[arg(long, value_parser = parse_targets)]
    pub targets: Option<ToyTargets>,
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    /// Flat key=value settings file; flags override it
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// mnist, emnist or toy
    #[arg(long)]
    pub dataset: Option<DatasetKind>,
    /// backprop, pure-lazy or lazy
    #[arg(long, value_parser = parse_rule)]
    pub rule: Option<GateKind>,
    /// Hidden units (ignored for toy)
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Presented samples between evaluations
    #[arg(long)]
    pub eval_every: Option<u64>,
    /// Stop once test accuracy reaches this value ('none' disables)
    #[arg(long)]
    pub stop_acc: Option<StopAcc>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Several seeds, e.g. 1,2,3; one run directory each
    #[arg(long, conflicts_with = "seed")]
    pub seeds: Option<SeedList>,
    /// Worker threads for multi-seed runs
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Parent of the run directories
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Directory holding the standard IDX file names (or $LAZYPROP_DATA_DIR)
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
    #[arg(long)]
    pub train_images: Option<PathBuf>,
    #[arg(long)]
    pub train_labels: Option<PathBuf>,
    #[arg(long)]
    pub test_images: Option<PathBuf>,
    #[arg(long)]
    pub test_labels: Option<PathBuf>,
    /// Transpose images on load
    #[arg(long)]
    pub transpose: bool,
    /// Use only the first N training samples
    #[arg(long)]
    pub train_limit: Option<usize>,
    /// Use only the first N test samples
    #[arg(long)]
    pub test_limit: Option<usize>,
    /// f32 or f64
    #[arg(long)]
    pub precision: Option<Precision>,
    /// Skip the full training-set sweep at evaluation points
    #[arg(long)]
    pub no_train_eval: bool,
    /// Toy start weights
    #[arg(long, allow_hyphen_values = true, conflicts_with = "preset")]
    pub init: Option<Point2>,
    /// Toy start from a preset (1-3)
    #[arg(long)]
    pub preset: Option<usize>,
    #[command(flatten)]
    pub toy: ToyDataArgs,
    /// No progress on stderr
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Debug, Clone, Args)]
pub struct SurfaceArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Grid points per axis
    #[arg(long)]
    pub res: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    pub w1_min: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub w1_max: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub w2_min: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub w2_max: Option<f64>,
    #[command(flatten)]
    pub toy: ToyDataArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Debug, Clone, Args)]
pub struct TraceArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// 1, 2, 3 or all
    #[arg(long, conflicts_with = "init")]
    pub preset: Option<PresetSel>,
    /// Explicit start weights
    #[arg(long, allow_hyphen_values = true)]
    pub init: Option<Point2>,
    /// backprop, pure-lazy, lazy or all
    #[arg(long, alias = "rules")]
    pub rule: Option<RuleSel>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    /// Shuffle seed
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub toy: ToyDataArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Debug, Clone, Args)]
pub struct CoresetArgs {
    /// summary.json of a completed lazy run
    #[arg(long)]
    pub summary: PathBuf,
    /// Output directory (default: <run>/coreset)
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write the selected samples as an IDX pair
    #[arg(long)]
    pub export_idx: bool,
    /// Source images (default: taken from the run's manifest)
    #[arg(long)]
    pub train_images: Option<PathBuf>,
    #[arg(long)]
    pub train_labels: Option<PathBuf>,
    #[arg(long)]
    pub quiet: bool,
}

#[derive(Debug)]
enum CliError {
    Usage { command: &'static str, msg: String },
    Run(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Run(e)
    }
}

fn usage(command: &'static str, msg: impl Into<String>) -> CliError {
    CliError::Usage {
        command,
        msg: msg.into(),
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Parses `args` (program name first), runs the command and returns the
/// process exit code: 0 success, 1 runtime failure, 2 usage error.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let result = match cli.command {
        Command::Train(a) => cmd_train(&a),
        Command::Surface(a) => cmd_surface(&a),
        Command::Trace(a) => cmd_trace(&a),
        Command::Coreset(a) => cmd_coreset(&a),
    };
    match result {
        Ok(()) => 0,
        Err(CliError::Usage { command, msg }) => {
            let mut cmd = Cli::command();
            cmd.build();
            let usage = cmd
                .find_subcommand_mut(command)
                .map(|c| c.render_usage().to_string())
                .unwrap_or_default();
            eprintln!("error: {msg}\n\n{usage}\n\nFor more information, try 'lazyprop {command} --help'.");
            2
        }
        Err(CliError::Run(e)) => {
            eprintln!("error: {}", one_line(&e.to_string()));
            1
        }
    }
}

fn one_line(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn load_config(command: &'static str, path: &Option<PathBuf>, known: &[&str]) -> CliResult<ConfigFile> {
    let Some(path) = path else {
        return Ok(ConfigFile::default());
    };
    let cfg = ConfigFile::load(path).map_err(|e| usage(command, e.to_string()))?;
    if let Some(k) = cfg.keys().find(|k| !known.contains(k)) {
        return Err(usage(command, format!("unknown key '{k}' in {}", path.display())));
    }
    Ok(cfg)
}

fn pick<T: FromStr + Clone>(command: &'static str, flag: &Option<T>, cfg: &ConfigFile, key: &str) -> CliResult<Option<T>> {
    config::merge(flag, cfg, key).map_err(|e| usage(command, e.to_string()))
}

fn pick_flag(command: &'static str, flag: bool, cfg: &ConfigFile, key: &str) -> CliResult<bool> {
    Ok(flag || cfg.get_flag(key).map_err(|e| usage(command, e.to_string()))?)
}

const TOY_KEYS: [&str; 4] = ["n-per-class", "radius", "data-seed", "targets"];

/// Toy data spec and target encoding; records the merged values in `echo`.
fn resolve_toy(command: &'static str, a: &ToyDataArgs, cfg: &ConfigFile, echo: &mut ConfigFile) -> CliResult<(ToyTaskSpec, ToyTargets)> {
    let mut spec = ToyTaskSpec::default();
    if let Some(n) = pick(command, &a.n_per_class, cfg, "n-per-class")? {
        spec.n_per_class = n;
    }
    if let Some(r) = pick(command, &a.radius, cfg, "radius")? {
        spec.radius = r;
    }
    if let Some(s) = pick(command, &a.data_seed, cfg, "data-seed")? {
        spec.seed = s;
    }
    let targets = match &a.targets {
        Some(t) => *t,
        None => cfg.get::<String>("targets").map_err(|e| usage(command, e.to_string()))?.map_or(Ok(ToyTargets::default()), |s| parse_targets(&s).map_err(|e| usage(command, e)))?,
    };
    spec.validate().map_err(|e| usage(command, e.to_string()))?;
    echo.insert("n-per-class", spec.n_per_class);
    echo.insert("radius", spec.radius);
    echo.insert("data-seed", spec.seed);
    echo.insert("targets", targets_name(targets));
    Ok((spec, targets))
}

fn targets_name(t: ToyTargets) -> &'static str {
    match t {
        ToyTargets::ZeroOne => "zero-one",
        ToyTargets::Signed => "signed",
    }
}

// ---------------------------------------------------------------- train

const TRAIN_KEYS: [&str; 24] = [
    "dataset",
    "rule",
    "hidden",
    "lr",
    "epochs",
    "eval-every",
    "stop-acc",
    "seed",
    "seeds",
    "jobs",
    "out",
    "data-dir",
    "train-images",
    "train-labels",
    "test-images",
    "test-labels",
    "transpose",
    "train-limit",
    "test-limit",
    "precision",
    "no-train-eval",
    "init",
    "preset",
    "quiet",
];

#[derive(Debug, Clone)]
enum DataSource {
    Idx {
        paths: [PathBuf; 4],
        transpose: bool,
        train_limit: Option<usize>,
        test_limit: Option<usize>,
    },
    Toy {
        spec: ToyTaskSpec,
        targets: ToyTargets,
        init: [f64; 2],
    },
}

#[derive(Debug, Clone)]
struct TrainPlan {
    dataset: DatasetKind,
    config: TrainConfig,
    seeds: Vec<u64>,
    precision: Precision,
    source: DataSource,
    jobs: usize,
    out: PathBuf,
    quiet: bool,
    echo: ConfigFile,
}

const IDX_ROLES: [&str; 4] = ["train-images", "train-labels", "test-images", "test-labels"];

fn find_idx(dir: &Path, name: &str) -> Option<PathBuf> {
    [name.to_string(), format!("{name}.gz")]
        .into_iter()
        .map(|n| dir.join(n))
        .find(|p| p.is_file())
}

fn resolve_train(a: &TrainArgs) -> CliResult<TrainPlan> {
    const C: &str = "train";
    let known: Vec<&str> = TRAIN_KEYS.iter().chain(TOY_KEYS.iter()).copied().collect();
    let cfg = load_config(C, &a.config, &known)?;

    let dataset: DatasetKind = pick(C, &a.dataset, &cfg, "dataset")?
        .ok_or_else(|| usage(C, "missing --dataset (mnist, emnist or toy)"))?;
    let rule: GateKind = match &a.rule {
        Some(r) => *r,
        None => match cfg.get::<String>("rule").map_err(|e| usage(C, e.to_string()))? {
            Some(s) => parse_rule(&s).map_err(|e| usage(C, e))?,
            None => return Err(usage(C, "missing --rule (backprop, pure-lazy or lazy)")),
        },
    };

    let mut config = match dataset {
        DatasetKind::Mnist => TrainConfig::mnist(rule),
        DatasetKind::Emnist => TrainConfig::emnist(rule),
        DatasetKind::Toy => TrainConfig::toy(rule),
    };
    if let Some(h) = pick(C, &a.hidden, &cfg, "hidden")? {
        config.hidden_dim = h;
    }
    if let Some(lr) = pick(C, &a.lr, &cfg, "lr")? {
        config.learning_rate = lr;
    }
    if let Some(e) = pick(C, &a.epochs, &cfg, "epochs")? {
        config.epochs = e;
    }
    let eval_every = pick(C, &a.eval_every, &cfg, "eval-every")?;
    if let Some(e) = eval_every {
        config.eval_every = e;
    }
    if let Some(StopAcc(s)) = pick(C, &a.stop_acc, &cfg, "stop-acc")? {
        config.stop_test_accuracy = s;
    }
    config.eval_train = !pick_flag(C, a.no_train_eval, &cfg, "no-train-eval")?;

    let seeds = match (pick(C, &a.seed, &cfg, "seed")?, pick(C, &a.seeds, &cfg, "seeds")?) {
        (Some(_), Some(_)) => return Err(usage(C, "give either seed or seeds, not both")),
        (Some(s), None) => vec![s],
        (None, Some(SeedList(s))) => s,
        (None, None) => vec![0],
    };
    let jobs = pick(C, &a.jobs, &cfg, "jobs")?.unwrap_or(1);
    if jobs == 0 {
        return Err(usage(C, "--jobs must be >= 1"));
    }
    let precision = pick(C, &a.precision, &cfg, "precision")?.unwrap_or_default();
    let out = pick(C, &a.out, &cfg, "out")?.unwrap_or_else(|| PathBuf::from("runs"));
    let quiet = pick_flag(C, a.quiet, &cfg, "quiet")?;

    let mut echo = ConfigFile::default();
    echo.insert("dataset", dataset.as_str());
    echo.insert("rule", rule);
    echo.insert("precision", precision);

    let source = if dataset == DatasetKind::Toy {
        let (spec, targets) = resolve_toy(C, &a.toy, &cfg, &mut echo)?;
        let presets = landscape::preset_initial_conditions();
        let init = match (pick(C, &a.init, &cfg, "init")?, pick(C, &a.preset, &cfg, "preset")?) {
            (Some(_), Some(_)) => return Err(usage(C, "give either init or preset, not both")),
            (Some(Point2(w)), None) => w,
            (None, Some(p)) if (1..=presets.len()).contains(&p) => presets[p - 1],
            (None, Some(p)) => return Err(usage(C, format!("preset must be 1..={}, got {p}", presets.len()))),
            (None, None) => presets[0],
        };
        if eval_every.is_none() {
            config.eval_every = (2 * spec.n_per_class).max(1) as u64;
        }
        echo.insert("init", Point2(init));
        DataSource::Toy { spec, targets, init }
    } else {
        let data_dir = pick(C, &a.data_dir, &cfg, "data-dir")?
            .or_else(|| std::env::var_os("LAZYPROP_DATA_DIR").map(PathBuf::from));
        let flags = [&a.train_images, &a.train_labels, &a.test_images, &a.test_labels];
        let names = dataset.idx_names();
        let mut paths: Vec<PathBuf> = Vec::with_capacity(4);
        for ((flag, role), name) in flags.into_iter().zip(IDX_ROLES).zip(names) {
            let p = match pick(C, flag, &cfg, role)? {
                Some(p) => p,
                None => data_dir.as_deref().and_then(|d| find_idx(d, name)).ok_or_else(|| {
                    usage(C, format!("missing dataset path: --{role} (or --data-dir containing {name})"))
                })?,
            };
            echo.insert(role, p.display());
            paths.push(p);
        }
        let transpose = pick_flag(C, a.transpose, &cfg, "transpose")?;
        let train_limit = pick(C, &a.train_limit, &cfg, "train-limit")?;
        let test_limit = pick(C, &a.test_limit, &cfg, "test-limit")?;
        echo.insert("transpose", transpose);
        if let Some(n) = train_limit {
            echo.insert("train-limit", n);
        }
        if let Some(n) = test_limit {
            echo.insert("test-limit", n);
        }
        DataSource::Idx {
            paths: paths.try_into().expect("four paths"),
            transpose,
            train_limit,
            test_limit,
        }
    };

    config.validate().map_err(|e| usage(C, e.to_string()))?;
    echo.insert("hidden", config.hidden_dim);
    echo.insert("lr", config.learning_rate);
    echo.insert("epochs", config.epochs);
    echo.insert("eval-every", config.eval_every);
    echo.insert("stop-acc", StopAcc(config.stop_test_accuracy));
    echo.insert("no-train-eval", !config.eval_train);

    Ok(TrainPlan {
        dataset,
        config,
        seeds,
        precision,
        source,
        jobs,
        out,
        quiet,
        echo,
    })
}

struct Loaded<S> {
    train: Dataset<S>,
    test: Dataset<S>,
    fingerprints: Vec<DatasetFingerprint>,
}

fn load_data<S: Scalar>(source: &DataSource) -> Result<Loaded<S>> {
    match source {
        DataSource::Toy { spec, .. } => {
            let data = make_two_clouds::<S>(spec)?;
            Ok(Loaded {
                train: data.clone(),
                test: data,
                fingerprints: Vec::new(),
            })
        }
        DataSource::Idx {
            paths,
            transpose,
            train_limit,
            test_limit,
        } => {
            let opts = IdxOptions {
                transpose: *transpose,
                ..IdxOptions::default()
            };
            let mut train = load_idx_with::<S>(&paths[0], &paths[1], opts)?;
            let mut test = load_idx_with::<S>(&paths[2], &paths[3], opts)?;
            if let Some(n) = train_limit {
                train = train.head(*n);
            }
            if let Some(n) = test_limit {
                test = test.head(*n);
            }
            let fingerprints = paths
                .iter()
                .zip(IDX_ROLES)
                .map(|(p, role)| DatasetFingerprint::of_file(role, p))
                .collect::<Result<_>>()?;
            Ok(Loaded {
                train,
                test,
                fingerprints,
            })
        }
    }
}

/// `{dataset}-{rule}-h{hidden}-s{seed}`
pub fn run_dir_name(dataset: &str, config: &TrainConfig) -> String {
    format!("{dataset}-{}-h{}-s{}", config.rule, config.hidden_dim, config.seed)
}

fn train_one<S: Scalar>(plan: &TrainPlan, seed: u64, data: &Loaded<S>) -> Result<(PathBuf, RunSummary)> {
    let mut config = plan.config.clone();
    config.seed = seed;
    let dir = plan.out.join(run_dir_name(plan.dataset.as_str(), &config));
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;

    let mut echo = plan.echo.clone();
    echo.insert("seed", seed);
    let mut manifest = RunManifest::new("train", echo.entries().clone());
    manifest.config = Some(config.clone());
    manifest.datasets = data.fingerprints.clone();

    let mut artifacts = Vec::new();
    let result = (|| -> Result<RunSummary> {
        let echo_path = dir.join(CONFIG_ECHO_FILE);
        fs::write(&echo_path, echo.render()).map_err(|e| Error::io(&echo_path, e))?;
        artifacts.push(CONFIG_ECHO_FILE);

        let mut writer = MetricsWriter::create(&dir.join("metrics.csv"), &dir.join("metrics.jsonl"))?.with_progress(!plan.quiet);
        artifacts.extend(["metrics.csv", "metrics.jsonl"]);

        let (summary, model_ck, ledger) = match &plan.source {
            DataSource::Toy { targets, init, .. } => {
                let model = LinearToyModel::new([S::from_f64_lossy(init[0]), S::from_f64_lossy(init[1])], *targets);
                let mut trainer = Trainer::new(config.clone(), model, data.train.len())?;
                let summary = trainer.run(&data.train, &data.test, &mut writer)?;
                let ck = trainer.model().checkpoint();
                let (_, _, ledger) = trainer.into_parts();
                (summary, ck, ledger)
            }
            DataSource::Idx { .. } => {
                let out = run_experiment(&config, &data.train, &data.test, &mut writer)?;
                (out.summary, out.model.checkpoint(), out.ledger)
            }
        };

        write_json(&dir.join("summary.json"), &summary)?;
        artifacts.push("summary.json");
        let model_path = dir.join("model.json");
        fs::write(&model_path, model_ck.to_json()?).map_err(|e| Error::io(&model_path, e))?;
        artifacts.push("model.json");
        ledger.write_per_sample_csv(&dir.join("per_sample_energy.csv"))?;
        artifacts.push("per_sample_energy.csv");
        Ok(summary)
    })();

    for a in artifacts {
        manifest.add_artifact(a);
    }
    match result {
        Ok(summary) => {
            manifest.status = summary.status.into();
            manifest.error = summary.error.clone();
            manifest.write(&dir)?;
            Ok((dir, summary))
        }
        Err(e) => {
            manifest.status = ManifestStatus::Failed;
            manifest.error = Some(e.to_string());
            let _ = manifest.write(&dir);
            Err(e)
        }
    }
}

fn run_plan<S: Scalar>(plan: &TrainPlan) -> CliResult<()> {
    let data = load_data::<S>(&plan.source)?;
    let jobs = plan.jobs.min(plan.seeds.len()).max(1);
    let data = &data;
    let results: Vec<(u64, Result<(PathBuf, RunSummary)>)> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..jobs)
            .map(|w| {
                let mine: Vec<u64> = plan.seeds.iter().copied().skip(w).step_by(jobs).collect();
                s.spawn(move || {
                    mine.into_iter()
                        .map(|seed| (seed, train_one::<S>(plan, seed, data)))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("training worker panicked"))
            .collect()
    });

    let mut first_err = None;
    for (seed, r) in results {
        match r {
            Ok((dir, summary)) if summary.status == RunStatus::Failed => {
                let msg = format!(
                    "run {} failed: {}",
                    dir.display(),
                    summary.error.as_deref().unwrap_or("unknown error")
                );
                first_err.get_or_insert(Error::Numeric(msg));
            }
            Ok((dir, summary)) => {
                if !plan.quiet {
                    let acc = summary.final_record.as_ref().map_or(f64::NAN, |r| r.test_accuracy);
                    println!("{}  test_acc={acc:.4}  updates={}", dir.display(), summary.update_count);
                }
            }
            Err(e) => {
                if plan.seeds.len() > 1 {
                    eprintln!("error: seed {seed}: {}", one_line(&e.to_string()));
                }
                first_err.get_or_insert(e);
            }
        }
    }
    match first_err {
        Some(e) => Err(CliError::Run(e)),
        None => Ok(()),
    }
}

fn cmd_train(a: &TrainArgs) -> CliResult<()> {
    let plan = resolve_train(a)?;
    match plan.precision {
        Precision::F32 => run_plan::<f32>(&plan),
        Precision::F64 => run_plan::<f64>(&plan),
    }
}

// -------------------------------------------------------------- surface

fn cmd_surface(a: &SurfaceArgs) -> CliResult<()> {
    const C: &str = "surface";
    let known: Vec<&str> = ["res", "w1-min", "w1-max", "w2-min", "w2-max", "out", "quiet"]
        .iter()
        .chain(TOY_KEYS.iter())
        .copied()
        .collect();
    let cfg = load_config(C, &a.config, &known)?;
    let mut echo = ConfigFile::default();
    let (spec, targets) = resolve_toy(C, &a.toy, &cfg, &mut echo)?;

    let mut grid = GridSpec::default();
    if let Some(r) = pick(C, &a.res, &cfg, "res")? {
        grid.w1.resolution = r;
        grid.w2.resolution = r;
    }
    let bounds = [
        (&a.w1_min, "w1-min"),
        (&a.w1_max, "w1-max"),
        (&a.w2_min, "w2-min"),
        (&a.w2_max, "w2-max"),
    ];
    let mut vals = [grid.w1.min, grid.w1.max, grid.w2.min, grid.w2.max];
    for (v, (flag, key)) in vals.iter_mut().zip(bounds) {
        if let Some(x) = pick(C, flag, &cfg, key)? {
            *v = x;
        }
        echo.insert(key, *v);
    }
    grid.w1 = AxisRange::new(vals[0], vals[1], grid.w1.resolution);
    grid.w2 = AxisRange::new(vals[2], vals[3], grid.w2.resolution);
    echo.insert("res", grid.w1.resolution);
    let out = pick(C, &a.out, &cfg, "out")?.unwrap_or_else(|| PathBuf::from("runs"));
    let quiet = pick_flag(C, a.quiet, &cfg, "quiet")?;

    let dir = out.join(format!("toy-surface-s{}", spec.seed));
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let mut manifest = RunManifest::new(C, echo.entries().clone());
    let echo_path = dir.join(CONFIG_ECHO_FILE);
    fs::write(&echo_path, echo.render()).map_err(|e| Error::io(&echo_path, e))?;
    manifest.add_artifact(CONFIG_ECHO_FILE);

    let data = make_two_clouds::<f64>(&spec)?;
    let surface = match landscape::sample_surface(&data, &grid, targets) {
        Ok(s) => s,
        Err(e @ Error::InvalidSpec(_)) => return Err(usage(C, e.to_string())),
        Err(e) => return Err(e.into()),
    };
    surface.write_csv(&dir.join("surface.csv"))?;
    manifest.add_artifact("surface.csv");
    manifest.status = ManifestStatus::Completed;
    manifest.write(&dir)?;
    if !quiet {
        println!("{}", dir.join("surface.csv").display());
    }
    Ok(())
}

// ---------------------------------------------------------------- trace

#[derive(Debug, serde::Serialize)]
struct TraceEntry {
    rule: GateKind,
    initial_condition_id: usize,
    initial: [f64; 2],
    last: [f64; 2],
    m_total: f64,
    m_min: f64,
    update_count: u64,
    steps: usize,
    final_train_accuracy: f64,
    trajectory: String,
    energy: String,
}

fn cmd_trace(a: &TraceArgs) -> CliResult<()> {
    const C: &str = "trace";
    let known: Vec<&str> = ["preset", "init", "rule", "rules", "epochs", "lr", "seed", "out", "quiet"]
        .iter()
        .chain(TOY_KEYS.iter())
        .copied()
        .collect();
    let cfg = load_config(C, &a.config, &known)?;
    let mut echo = ConfigFile::default();
    let (spec, targets) = resolve_toy(C, &a.toy, &cfg, &mut echo)?;

    let presets = landscape::preset_initial_conditions();
    let starts: Vec<(usize, [f64; 2])> = match (pick(C, &a.init, &cfg, "init")?, pick(C, &a.preset, &cfg, "preset")?) {
        (Some(_), Some(_)) => return Err(usage(C, "give either init or preset, not both")),
        (Some(Point2(w)), None) => {
            echo.insert("init", Point2(w));
            vec![(0, w)]
        }
        (None, sel) => {
            let PresetSel(ids) = sel.unwrap_or_else(|| PresetSel((1..=presets.len()).collect()));
            echo.insert("preset", if ids.len() == 1 { ids[0].to_string() } else { "all".into() });
            ids.into_iter().map(|id| (id, presets[id - 1])).collect()
        }
    };
    let rule_sel = match &a.rule {
        Some(r) => Some(r.clone()),
        None => {
            let get = |k| cfg.get::<RuleSel>(k).map_err(|e| usage(C, e.to_string()));
            get("rule")?.or(get("rules")?)
        }
    };
    let RuleSel(rules) = rule_sel.unwrap_or_else(|| RuleSel(GateKind::ALL.to_vec()));
    echo.insert("rule", if rules.len() == 1 { rules[0].to_string() } else { "all".into() });

    let mut base = TrainConfig::toy(GateKind::Backprop);
    base.eval_every = (2 * spec.n_per_class).max(1) as u64;
    if let Some(e) = pick(C, &a.epochs, &cfg, "epochs")? {
        base.epochs = e;
    }
    if let Some(lr) = pick(C, &a.lr, &cfg, "lr")? {
        base.learning_rate = lr;
    }
    if let Some(s) = pick(C, &a.seed, &cfg, "seed")? {
        base.seed = s;
    }
    base.validate().map_err(|e| usage(C, e.to_string()))?;
    echo.insert("epochs", base.epochs);
    echo.insert("lr", base.learning_rate);
    echo.insert("seed", base.seed);
    let out = pick(C, &a.out, &cfg, "out")?.unwrap_or_else(|| PathBuf::from("runs"));
    let quiet = pick_flag(C, a.quiet, &cfg, "quiet")?;

    let dir = out.join(format!("toy-trace-s{}", base.seed));
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let mut manifest = RunManifest::new(C, echo.entries().clone());
    let echo_path = dir.join(CONFIG_ECHO_FILE);
    fs::write(&echo_path, echo.render()).map_err(|e| Error::io(&echo_path, e))?;
    manifest.add_artifact(CONFIG_ECHO_FILE);

    let data = make_two_clouds::<f64>(&spec)?;
    let mut entries = Vec::new();
    for &(id, w0) in &starts {
        for &rule in &rules {
            let config = TrainConfig { rule, ..base.clone() };
            let traj = landscape::trace_run(&config, &data, w0, targets, id)?;
            let stem = format!("{rule}-ic{id}");
            let traj_name = format!("trajectory-{stem}.csv");
            let energy_name = format!("energy-{stem}.csv");
            traj.write_csv(&dir.join(&traj_name))?;
            write_energy_csv(&dir.join(&energy_name), &traj.per_sample_energy)?;
            manifest.add_artifact(&traj_name);
            manifest.add_artifact(&energy_name);
            let last = traj.final_point();
            entries.push(TraceEntry {
                rule,
                initial_condition_id: id,
                initial: w0,
                last,
                m_total: traj.m_total,
                m_min: crate::scalar::l1_distance(&w0, &last),
                update_count: traj.update_count,
                steps: traj.points.len() - 1,
                final_train_accuracy: landscape::accuracy_at(&data, last),
                trajectory: traj_name,
                energy: energy_name,
            });
        }
    }
    write_json(&dir.join("trace_summary.json"), &entries)?;
    manifest.add_artifact("trace_summary.json");
    manifest.status = ManifestStatus::Completed;
    manifest.write(&dir)?;
    if !quiet {
        for e in &entries {
            println!(
                "{:<9} ic{}  M={:.4}  updates={:<6} acc={:.3}  {}",
                e.rule.as_str(),
                e.initial_condition_id,
                e.m_total,
                e.update_count,
                e.final_train_accuracy,
                e.trajectory
            );
        }
    }
    Ok(())
}

fn write_energy_csv(path: &Path, energy: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["sample_id", "energy"])?;
    for (id, e) in energy.iter().enumerate() {
        w.write_record([id.to_string(), format!("{e:?}")])?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

// -------------------------------------------------------------- coreset

#[derive(Debug, serde::Serialize, serde::Deserialize)]
pub struct CoresetExport {
    pub source_summary: PathBuf,
    pub n_train: usize,
    pub fraction: f64,
    pub sample_ids: Vec<usize>,
}

fn cmd_coreset(a: &CoresetArgs) -> CliResult<()> {
    const C: &str = "coreset";
    let summary = read_summary(&a.summary)?;
    if summary.config.rule != GateKind::Lazy {
        return Err(Error::InvalidInput(format!(
            "{} comes from a {} run; coresets need a lazy run",
            a.summary.display(),
            summary.config.rule
        ))
        .into());
    }
    let ids = summary
        .coreset_ids
        .clone()
        .ok_or_else(|| Error::InvalidInput(format!("{} has no remembered sample ids", a.summary.display())))?;
    let run_dir = a.summary.parent().map(Path::to_path_buf).unwrap_or_default();
    let dir = a.out.clone().unwrap_or_else(|| run_dir.join("coreset"));
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;

    let mut echo = ConfigFile::default();
    echo.insert("summary", a.summary.display());
    echo.insert("export-idx", a.export_idx);
    let mut manifest = RunManifest::new(C, echo.entries().clone());
    manifest.config = Some(summary.config.clone());

    let export = CoresetExport {
        source_summary: a.summary.clone(),
        n_train: summary.n_train,
        fraction: if summary.n_train == 0 { 0.0 } else { ids.len() as f64 / summary.n_train as f64 },
        sample_ids: ids,
    };
    write_json(&dir.join("coreset_ids.json"), &export)?;
    manifest.add_artifact("coreset_ids.json");

    if a.export_idx {
        let run_manifest = RunManifest::read(&run_dir.join(MANIFEST_FILE)).ok();
        let from_manifest = |role: &str| {
            run_manifest
                .as_ref()
                .and_then(|m| m.datasets.iter().find(|d| d.role == role))
                .map(|d| d.path.clone())
        };
        let images = a
            .train_images
            .clone()
            .or_else(|| from_manifest("train-images"))
            .ok_or_else(|| usage(C, "--export-idx needs --train-images (none recorded in the run manifest)"))?;
        let labels = a
            .train_labels
            .clone()
            .or_else(|| from_manifest("train-labels"))
            .ok_or_else(|| usage(C, "--export-idx needs --train-labels (none recorded in the run manifest)"))?;
        let transpose = run_manifest
            .as_ref()
            .and_then(|m| m.config_echo.get("transpose"))
            .is_some_and(|v| v == "true");
        let opts = IdxOptions {
            transpose,
            ..IdxOptions::default()
        };
        let full = load_idx_with::<f64>(&images, &labels, opts)?;
        manifest.datasets.push(DatasetFingerprint::of_file("train-images", &images)?);
        manifest.datasets.push(DatasetFingerprint::of_file("train-labels", &labels)?);
        let subset = full.select_ids(&export.sample_ids)?;
        write_idx(
            &subset,
            dir.join("coreset-images-idx3-ubyte"),
            dir.join("coreset-labels-idx1-ubyte"),
        )?;
        manifest.add_artifact("coreset-images-idx3-ubyte");
        manifest.add_artifact("coreset-labels-idx1-ubyte");
    }
    manifest.status = ManifestStatus::Completed;
    manifest.write(&dir)?;
    if !a.quiet {
        println!(
            "{} samples ({:.4} of {}) -> {}",
            export.sample_ids.len(),
            export.fraction,
            export.n_train,
            dir.display()
        );
    }
    Ok(())
}
