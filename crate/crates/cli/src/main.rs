use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{ArgGroup, Parser, ValueEnum};
use pax_core::data::{SampleMode, DEFAULT_MISSING_TOKENS};
use pax_core::experiment::{
    run_experiment, run_partition_sweep, sweep_table, DataSource, ExperimentConfig, PartitionChoice,
};
use pax_core::{LossKind, TrainingConfig};

const USAGE_ERROR: u8 = 2;
const TRAINING_ERROR: u8 = 1;

/// Boolean flags accepted in config files as `key = true`.
const BOOL_KEYS: &[&str] = &["synthetic", "per-party-test"];

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Loss {
    Logistic,
    Squared,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Mode {
    Random,
    Balanced,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Switch {
    On,
    Off,
}

/// Federated histogram boosting experiments with party-adaptive bins.
#[derive(Debug, Parser)]
#[command(name = "pax", version, args_override_self = true)]
#[command(group(ArgGroup::new("source").required(true).args(["data", "synthetic"])))]
#[command(group(ArgGroup::new("split").args(["partition_step", "counts"])))]
struct Cli {
    /// File of `key = value` lines using the long flag names; flags win.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,

    /// CSV file with a header row.
    #[arg(long, value_name = "CSV")]
    data: Option<PathBuf>,

    /// Use the seeded synthetic non-IID generator.
    #[arg(long)]
    synthetic: bool,

    #[arg(long, default_value = "label")]
    label_col: String,

    /// Cell values treated as missing (repeatable). Defaults to "" and "NA".
    #[arg(long = "missing-token", value_name = "TOKEN")]
    missing_tokens: Vec<String>,

    #[arg(long, default_value_t = 3)]
    parties: usize,

    /// Re-partition schedule step (1-5), or `all` to run every step.
    #[arg(long, value_name = "STEP")]
    partition_step: Option<String>,

    /// Explicit party sizes, comma separated.
    #[arg(long, value_delimiter = ',', value_name = "A,B,C")]
    counts: Option<Vec<usize>>,

    #[arg(long, default_value_t = 1000)]
    samples_per_party: usize,

    #[arg(long, default_value_t = 1000)]
    test_size: usize,

    /// Evaluate each party on its own test slice.
    #[arg(long)]
    per_party_test: bool,

    #[arg(long, default_value_t = 100)]
    rounds: usize,

    /// Global bin count; the global error budget is 1 / bins.
    #[arg(long, default_value_t = 255)]
    bins: usize,

    #[arg(long, default_value_t = 1.0)]
    lambda: f64,

    #[arg(long, default_value_t = 0.0)]
    gamma: f64,

    /// Learning rate.
    #[arg(long, default_value_t = 0.3)]
    eta: f64,

    #[arg(long, default_value_t = 6)]
    max_depth: usize,

    #[arg(long, default_value_t = 0.0)]
    min_gain: f64,

    #[arg(long, value_enum, default_value_t = Loss::Logistic)]
    loss: Loss,

    #[arg(long, default_value_t = 0)]
    seed: u64,

    #[arg(long, value_enum, default_value_t = Mode::Random)]
    sample_mode: Mode,

    #[arg(long, default_value = "pax-out")]
    out: PathBuf,

    /// Predict on bin representatives (on) or raw feature values (off).
    #[arg(long, value_enum, default_value_t = Switch::On)]
    quantize_predict: Switch,
}

/// Turns `key = value` lines into `--key value` arguments.
fn config_file_args(path: &Path) -> anyhow::Result<Vec<String>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
    let mut args = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            bail!("{}:{}: expected `key = value`", path.display(), n + 1);
        };
        let key = key.trim().replace('_', "-");
        let value = value.trim().trim_matches('"');
        if key == "config" {
            bail!(
                "{}:{}: config files cannot include other config files",
                path.display(),
                n + 1
            );
        }
        if BOOL_KEYS.contains(&key.as_str()) {
            match value {
                "true" | "on" | "yes" => args.push(format!("--{key}")),
                "false" | "off" | "no" => {}
                _ => bail!("{}:{}: `{key}` takes true or false", path.display(), n + 1),
            }
        } else {
            args.push(format!("--{key}"));
            args.push(value.to_string());
        }
    }
    Ok(args)
}

/// Command line with config-file arguments placed ahead of the real flags.
fn expand_args(raw: Vec<String>) -> anyhow::Result<Vec<String>> {
    let mut config = None;
    let mut iter = raw.iter().skip(1);
    while let Some(arg) = iter.next() {
        if arg == "--config" {
            config = iter.next().cloned();
        } else if let Some(p) = arg.strip_prefix("--config=") {
            config = Some(p.to_string());
        }
    }
    let mut out = vec![raw.first().cloned().unwrap_or_else(|| "pax".into())];
    if let Some(path) = config {
        out.extend(config_file_args(Path::new(&path))?);
    }
    out.extend(raw.into_iter().skip(1));
    Ok(out)
}

enum Plan {
    Single(ExperimentConfig),
    Sweep(ExperimentConfig),
}

fn build_plan(cli: &Cli) -> anyhow::Result<Plan> {
    let training = TrainingConfig {
        epsilon_global: 1.0 / cli.bins.max(1) as f64,
        max_rounds: cli.rounds,
        lambda: cli.lambda,
        gamma: cli.gamma,
        learning_rate: cli.eta,
        max_depth: cli.max_depth,
        min_gain: cli.min_gain,
        loss: match cli.loss {
            Loss::Logistic => LossKind::BinaryLogistic,
            Loss::Squared => LossKind::SquaredError,
        },
        quantize_predict: matches!(cli.quantize_predict, Switch::On),
        early_stopping: None,
    };
    if cli.bins == 0 {
        bail!("--bins must be at least 1");
    }
    training.validate()?;
    let source = match &cli.data {
        Some(path) => DataSource::Csv {
            path: path.clone(),
            label_column: cli.label_col.clone(),
            missing_tokens: if cli.missing_tokens.is_empty() {
                DEFAULT_MISSING_TOKENS.iter().map(|s| s.to_string()).collect()
            } else {
                cli.missing_tokens.clone()
            },
        },
        None => DataSource::Synthetic,
    };
    let mut cfg = ExperimentConfig {
        source,
        n_parties: cli.parties,
        partition: PartitionChoice::Even,
        samples_per_party: cli.samples_per_party,
        n_test: cli.test_size,
        sample_mode: match cli.sample_mode {
            Mode::Random => SampleMode::Random,
            Mode::Balanced => SampleMode::LabelBalanced,
        },
        per_party_test: cli.per_party_test,
        training,
        seed: cli.seed,
    };
    if cli.parties == 0 {
        bail!("--parties must be at least 1");
    }
    if let Some(counts) = &cli.counts {
        if counts.len() != cli.parties {
            bail!("--counts lists {} sizes for {} parties", counts.len(), cli.parties);
        }
        cfg.partition = PartitionChoice::Counts(counts.clone());
    }
    match cli.partition_step.as_deref() {
        None => Ok(Plan::Single(cfg)),
        Some("all") => Ok(Plan::Sweep(cfg)),
        Some(s) => {
            let step: usize = s
                .parse()
                .ok()
                .filter(|s| (1..=5).contains(s))
                .with_context(|| format!("--partition-step must be 1-5 or `all`, got `{s}`"))?;
            cfg.partition = PartitionChoice::Step(step);
            Ok(Plan::Single(cfg))
        }
    }
}

fn is_usage_error(e: &pax_core::Error) -> bool {
    matches!(e, pax_core::Error::Config(_) | pax_core::Error::Partition(_))
}

fn execute(plan: Plan, out: &Path) -> Result<(), pax_core::Error> {
    match plan {
        Plan::Single(cfg) => {
            let res = run_experiment(&cfg)?;
            res.write(out)?;
            print!("{}", res.report.to_table());
        }
        Plan::Sweep(cfg) => {
            let results = run_partition_sweep(&cfg, &[1, 2, 3, 4, 5])?;
            for (i, res) in results.iter().enumerate() {
                res.write(&out.join(format!("step{}", i + 1)))?;
            }
            let reports: Vec<_> = results.into_iter().map(|r| r.report).collect();
            let table = sweep_table(&reports);
            std::fs::write(out.join("sweep.txt"), &table)?;
            std::fs::write(out.join("sweep.json"), serde_json::to_string_pretty(&reports)?)?;
            print!("{table}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let args = match expand_args(std::env::args().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(USAGE_ERROR);
        }
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { USAGE_ERROR } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let plan = match build_plan(&cli) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(USAGE_ERROR);
        }
    };
    match execute(plan, &cli.out) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if is_usage_error(&e) => {
            eprintln!("error: {e}");
            ExitCode::from(USAGE_ERROR)
        }
        Err(e) => {
            eprintln!("training failed: {e}");
            ExitCode::from(TRAINING_ERROR)
        }
    }
}
