//! End-to-end experiment: data preparation, partitioning, federated training,
//! evaluation and report files.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::config::TrainingConfig;
use crate::data::{
    generate, load_csv, partition_schedule, sample_indices, Dataset, ManifestEntry, SampleMode, SyntheticConfig,
};
use crate::error::{Error, Result};
use crate::gbt::{Ensemble, LossKind};
use crate::metrics::{classification_metrics, rmse, MetricsRow};
use crate::protocol::{run_training, RoundTelemetry};

pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataSource {
    Synthetic,
    Csv {
        path: PathBuf,
        label_column: String,
        missing_tokens: Vec<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PartitionChoice {
    /// Contiguous equal shares of the pool.
    Even,
    /// A step of the five-step re-partition schedule (three parties).
    Step(usize),
    /// Explicit contiguous party sizes.
    Counts(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub source: DataSource,
    pub n_parties: usize,
    pub partition: PartitionChoice,
    pub samples_per_party: usize,
    pub n_test: usize,
    pub sample_mode: SampleMode,
    /// Give every party its own test slice instead of one shared test set.
    pub per_party_test: bool,
    pub training: TrainingConfig,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            source: DataSource::Synthetic,
            n_parties: 3,
            partition: PartitionChoice::Even,
            samples_per_party: 1000,
            n_test: 1000,
            sample_mode: SampleMode::Random,
            per_party_test: false,
            training: TrainingConfig::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub partition_step: Option<usize>,
    pub party_counts: Vec<usize>,
    pub epsilons: Vec<f64>,
    pub eps_m: Option<f64>,
    pub rounds: usize,
    pub initial_train_loss: f64,
    pub final_train_loss: f64,
    pub parties: Vec<MetricsRow>,
    pub average: MetricsRow,
    pub train_walltime_seconds: f64,
    pub config: ExperimentConfig,
}

impl MetricsReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// JSON with the walltime zeroed, for reproducibility checks.
    pub fn to_json_without_walltime(&self) -> Result<String> {
        let mut r = self.clone();
        r.train_walltime_seconds = 0.0;
        r.to_json()
    }

    pub fn to_table(&self) -> String {
        let mut out = String::new();
        if let Some(step) = self.partition_step {
            let _ = writeln!(out, "partition step {step}");
        }
        let _ = writeln!(
            out,
            "rounds {}  eps_m {}  train walltime {:.2}s",
            self.rounds,
            self.eps_m.map_or("-".into(), |e| format!("{e:.6}")),
            self.train_walltime_seconds
        );
        out.push_str(&table_header());
        for row in &self.parties {
            out.push_str(&table_row(
                &row.party.map_or("avg".into(), |p| format!("P{}", p + 1)),
                row,
            ));
        }
        out.push_str(&table_row("avg", &self.average));
        out
    }
}

fn fmt_metric(v: Option<f64>) -> String {
    v.map_or("-".into(), |v| format!("{v:.4}"))
}

fn table_header() -> String {
    format!(
        "{:<6} {:>8} {:>7} {:>7} {:>7} {:>7} {:>7} {:>7} {:>8}\n",
        "row", "n_train", "n_test", "ACC", "PRE", "REC", "AUC", "F1", "RMSE"
    )
}

fn table_row(label: &str, r: &MetricsRow) -> String {
    format!(
        "{:<6} {:>8} {:>7} {:>7} {:>7} {:>7} {:>7} {:>7} {:>8}\n",
        label,
        r.n_train,
        r.n_test,
        fmt_metric(r.acc),
        fmt_metric(r.pre),
        fmt_metric(r.rec),
        fmt_metric(r.auc),
        fmt_metric(r.f1),
        fmt_metric(r.rmse)
    )
}

/// Summary table with one averaged row per report, e.g. one per partition step.
pub fn sweep_table(reports: &[MetricsReport]) -> String {
    let mut out = format!(
        "{:<6} {:<18} {:>7} {:>7} {:>7} {:>7} {:>7} {:>9}\n",
        "step", "party counts", "ACC", "PRE", "REC", "AUC", "F1", "walltime"
    );
    for r in reports {
        let counts = r
            .party_counts
            .iter()
            .map(usize::to_string)
            .collect::<Vec<_>>()
            .join("/");
        let a = &r.average;
        let _ = writeln!(
            out,
            "{:<6} {:<18} {:>7} {:>7} {:>7} {:>7} {:>7} {:>8.2}s",
            r.partition_step.map_or("-".into(), |s| s.to_string()),
            counts,
            fmt_metric(a.acc),
            fmt_metric(a.pre),
            fmt_metric(a.rec),
            fmt_metric(a.auc),
            fmt_metric(a.f1),
            r.train_walltime_seconds
        );
    }
    out
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub report: MetricsReport,
    pub model: Ensemble,
    pub telemetry: Vec<RoundTelemetry>,
    pub manifest: Vec<ManifestEntry>,
}

impl ExperimentResult {
    /// Writes `report.json`, `report.txt`, `model.json`, `telemetry.jsonl`
    /// and, for schedule runs, `partition_manifest.json`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("report.json"), self.report.to_json()?)?;
        fs::write(dir.join("report.txt"), self.report.to_table())?;
        fs::write(dir.join("model.json"), self.model.to_json()?)?;
        let mut log = String::new();
        for line in &self.telemetry {
            log.push_str(&serde_json::to_string(line)?);
            log.push('\n');
        }
        fs::write(dir.join("telemetry.jsonl"), log)?;
        if !self.manifest.is_empty() {
            fs::write(
                dir.join("partition_manifest.json"),
                serde_json::to_string(&self.manifest)?,
            )?;
        }
        Ok(())
    }
}

/// Training pool and test set(s) before partitioning.
fn prepare_data(cfg: &ExperimentConfig) -> Result<(Dataset, Vec<Dataset>)> {
    let pool_size = cfg.n_parties * cfg.samples_per_party;
    let test_slices = if cfg.per_party_test { cfg.n_parties } else { 1 };
    let test_size = cfg.n_test * test_slices;
    let (pool, test) = match &cfg.source {
        DataSource::Synthetic => {
            let factor = match cfg.sample_mode {
                SampleMode::Random => 1,
                SampleMode::LabelBalanced => 2,
            };
            let data = generate(&SyntheticConfig {
                n_pool: pool_size * factor,
                n_test: test_size * factor,
                seed: cfg.seed,
                ..SyntheticConfig::default()
            })?;
            match cfg.sample_mode {
                SampleMode::Random => (data.pool, data.test),
                SampleMode::LabelBalanced => {
                    let (pool_idx, _) = sample_indices(&data.pool, pool_size, 0, cfg.sample_mode, cfg.seed)?;
                    let (test_idx, _) = sample_indices(&data.test, test_size, 0, cfg.sample_mode, cfg.seed ^ 1)?;
                    (data.pool.subset(&pool_idx)?, data.test.subset(&test_idx)?)
                }
            }
        }
        DataSource::Csv {
            path,
            label_column,
            missing_tokens,
        } => {
            let tokens: Vec<&str> = missing_tokens.iter().map(String::as_str).collect();
            let ds = load_csv(path, label_column, &tokens)?;
            let (train, test) = sample_indices(&ds, pool_size, test_size, cfg.sample_mode, cfg.seed)?;
            (ds.subset(&train)?, ds.subset(&test)?)
        }
    };
    let tests = if cfg.per_party_test {
        (0..cfg.n_parties)
            .map(|p| test.subset(&(p * cfg.n_test..(p + 1) * cfg.n_test).collect::<Vec<_>>()))
            .collect::<Result<Vec<_>>>()?
    } else {
        vec![test]
    };
    Ok((pool, tests))
}

fn party_rows(cfg: &ExperimentConfig, n_pool: usize) -> Result<(Vec<Vec<usize>>, Vec<ManifestEntry>)> {
    match &cfg.partition {
        PartitionChoice::Even => {
            let share = n_pool / cfg.n_parties;
            Ok((
                (0..cfg.n_parties)
                    .map(|p| (p * share..(p + 1) * share).collect())
                    .collect(),
                Vec::new(),
            ))
        }
        PartitionChoice::Step(step) => {
            if cfg.n_parties != 3 {
                return Err(Error::Config("the partition schedule needs exactly 3 parties".into()));
            }
            let spec = partition_schedule(n_pool, cfg.seed)?;
            let rows = spec.step(*step)?.parties.clone();
            let manifest = spec.manifest().into_iter().filter(|m| m.step == *step).collect();
            Ok((rows, manifest))
        }
        PartitionChoice::Counts(counts) => {
            if counts.len() != cfg.n_parties {
                return Err(Error::Config(format!(
                    "{} party counts for {} parties",
                    counts.len(),
                    cfg.n_parties
                )));
            }
            if counts.iter().sum::<usize>() > n_pool {
                return Err(Error::Config(format!("party counts exceed the pool of {n_pool} rows")));
            }
            let mut start = 0;
            let mut rows = Vec::with_capacity(counts.len());
            for &c in counts {
                rows.push((start..start + c).collect());
                start += c;
            }
            Ok((rows, Vec::new()))
        }
    }
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    if cfg.n_parties == 0 || cfg.samples_per_party == 0 || cfg.n_test == 0 {
        return Err(Error::Config(
            "parties, samples per party and test size must be positive".into(),
        ));
    }
    cfg.training.validate()?;
    let (pool, tests) = prepare_data(cfg)?;
    let (rows, manifest) = party_rows(cfg, pool.n_rows())?;
    if let Some(p) = rows.iter().position(Vec::is_empty) {
        return Err(Error::Config(format!("party {} has no rows", p + 1)));
    }
    let party_data = rows.iter().map(|r| pool.subset(r)).collect::<Result<Vec<_>>>()?;
    let counts: Vec<usize> = rows.iter().map(Vec::len).collect();

    let start = Instant::now();
    let outcome = run_training(&cfg.training, party_data)?;
    let walltime = start.elapsed().as_secs_f64();

    let model = outcome.model;
    let mut party_rows = Vec::with_capacity(cfg.n_parties);
    for (p, &n_train) in counts.iter().enumerate() {
        let test = &tests[if cfg.per_party_test { p } else { 0 }];
        let raw: Vec<f64> = test.rows().map(|x| model.predict(x)).collect::<Result<_>>()?;
        party_rows.push(match model.loss {
            LossKind::BinaryLogistic => {
                let proba: Vec<f64> = raw.iter().map(|&r| crate::gbt::sigmoid(r)).collect();
                let m = classification_metrics(&proba, test.labels(), DEFAULT_THRESHOLD)?;
                MetricsRow::classification(p, n_train, test.n_rows(), &m)
            }
            LossKind::SquaredError => MetricsRow::regression(p, n_train, test.n_rows(), rmse(&raw, test.labels())?),
        });
    }
    let average = MetricsRow::average(&party_rows)?;
    let report = MetricsReport {
        partition_step: match cfg.partition {
            PartitionChoice::Step(s) => Some(s),
            _ => None,
        },
        party_counts: counts,
        epsilons: outcome.epsilons,
        eps_m: outcome.telemetry.first().map(|t| t.eps_m),
        rounds: model.len(),
        initial_train_loss: outcome.initial_loss,
        final_train_loss: outcome.telemetry.last().map_or(outcome.initial_loss, |t| t.train_loss),
        parties: party_rows,
        average,
        train_walltime_seconds: walltime,
        config: cfg.clone(),
    };
    Ok(ExperimentResult {
        report,
        model,
        telemetry: outcome.telemetry,
        manifest,
    })
}

/// Runs the same experiment at each partition step.
pub fn run_partition_sweep(cfg: &ExperimentConfig, steps: &[usize]) -> Result<Vec<ExperimentResult>> {
    steps
        .iter()
        .map(|&s| {
            run_experiment(&ExperimentConfig {
                partition: PartitionChoice::Step(s),
                ..cfg.clone()
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ExperimentConfig {
        ExperimentConfig {
            samples_per_party: 60,
            n_test: 50,
            training: TrainingConfig {
                max_rounds: 3,
                ..TrainingConfig::default()
            },
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn zero_rounds_predicts_class_zero() {
        let cfg = ExperimentConfig {
            training: TrainingConfig {
                max_rounds: 0,
                ..TrainingConfig::default()
            },
            ..small()
        };
        let res = run_experiment(&cfg).unwrap();
        let test = &prepare_data(&cfg).unwrap().1[0];
        let zeros = test.labels().iter().filter(|&&y| y == 0.0).count() as f64 / test.n_rows() as f64;
        assert_eq!(res.report.average.acc, Some(zeros));
        assert_eq!(res.report.average.auc, Some(0.5));
        assert!(res.model.is_empty());
    }

    #[test]
    fn averaged_row_is_the_mean() {
        let cfg = ExperimentConfig {
            per_party_test: true,
            ..small()
        };
        let r = run_experiment(&cfg).unwrap().report;
        let mean = r.parties.iter().map(|p| p.acc.unwrap()).sum::<f64>() / 3.0;
        assert!((r.average.acc.unwrap() - mean).abs() <= 1e-12);
    }

    #[test]
    fn counts_and_steps() {
        let cfg = ExperimentConfig {
            partition: PartitionChoice::Counts(vec![100, 50, 30]),
            ..small()
        };
        assert_eq!(run_experiment(&cfg).unwrap().report.party_counts, vec![100, 50, 30]);
        let cfg = ExperimentConfig {
            partition: PartitionChoice::Step(2),
            ..small()
        };
        let res = run_experiment(&cfg).unwrap();
        assert_eq!(res.report.party_counts, vec![90, 69, 21]);
        assert_eq!(res.manifest.len(), 3);
        let bad = ExperimentConfig {
            partition: PartitionChoice::Counts(vec![1, 2]),
            ..small()
        };
        assert!(matches!(run_experiment(&bad), Err(Error::Config(_))));
    }

    #[test]
    fn writes_all_outputs() {
        let dir = tempfile::tempdir().unwrap();
        run_experiment(&small()).unwrap().write(dir.path()).unwrap();
        for f in ["report.json", "report.txt", "model.json", "telemetry.jsonl"] {
            assert!(dir.path().join(f).exists(), "{f}");
        }
        let log = fs::read_to_string(dir.path().join("telemetry.jsonl")).unwrap();
        assert_eq!(log.lines().count(), 3);
    }
}
