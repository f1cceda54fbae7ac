//! Experiment runner: distributed vs centralized comparison, depth sweeps,
//! smoothed metric series, CSV emission.
//!
//! Output files are split by determinism: everything in the CSVs and the
//! decision log is a pure function of the plan, while wall-clock timings go
//! to `timings.txt` and nowhere else.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use silotrain_core::codec::{self, ModelArtifact, ModelMetadata};
use silotrain_core::data::{partition, stratified_holdout, synthesize, DataError, Dataset};
use silotrain_core::envelope::keygen;
use silotrain_core::nn::arch::NetworkArchitecture;
use silotrain_core::nn::train::{evaluate_on, train, EpochRecord, TrainingConfig};
use silotrain_core::nn::{init_random, Metric, NnError};
use silotrain_core::protocol::{
    run_round_robin, Coordinator, DecisionOutcome, DecisionRecord, ProtocolError, RejectReason,
    RoundRobinConfig, Trainer, Watchdog,
};
use silotrain_core::seed::derive_seed;
use silotrain_core::series::{ema_smooth, REPORT_FACTOR};
use silotrain_core::simnet::LinkConfig;

use crate::clock::StdClock;
use crate::ingest::{ingest_directory, IngestError};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("plan: {0}")]
    Plan(String),
    #[error("io: {0}")]
    Io(#[from] io::Error),
    #[error("ingest: {0}")]
    Ingest(#[from] IngestError),
    #[error("data: {0}")]
    Data(#[from] DataError),
    #[error("network: {0}")]
    Nn(#[from] NnError),
    #[error("protocol: {0}")]
    Protocol(#[from] ProtocolError),
    #[error("model: {0}")]
    Codec(#[from] silotrain_core::codec::CodecError),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PlanMode {
    Distributed { n_nodes: usize },
    Centralized,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Synthetic { n_per_class: usize },
    Directory(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentPlan {
    pub mode: PlanMode,
    pub depth: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub patience: usize,
    pub seed: u64,
    pub data: DataSource,
    pub out_dir: Option<PathBuf>,
}

impl ExperimentPlan {
    pub fn n_nodes(&self) -> usize {
        match self.mode {
            PlanMode::Distributed { n_nodes } => n_nodes,
            PlanMode::Centralized => 4,
        }
    }

    fn base_config(&self) -> TrainingConfig {
        TrainingConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            patience: self.patience,
            rng_seed: self.seed,
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if let PlanMode::Distributed { n_nodes } = self.mode {
            if n_nodes == 0 {
                return Err(HarnessError::Plan("n_nodes must be at least 1".into()));
            }
        }
        if self.depth == 0 {
            return Err(HarnessError::Plan("depth must be at least 1".into()));
        }
        if let DataSource::Synthetic { n_per_class: 0 } = self.data {
            return Err(HarnessError::Plan("synthetic size must be at least 1".into()));
        }
        self.base_config()
            .validate()
            .map_err(|e| HarnessError::Plan(e.to_string()))
    }
}

/// Parses the key=value plan format. Keys: mode, n_nodes, depth, epochs,
/// batch_size, learning_rate, patience, seed, data, out_dir. Blank lines and
/// `#` comments are skipped; unknown or repeated keys are errors.
pub fn parse_plan(text: &str) -> Result<ExperimentPlan, HarnessError> {
    let defaults = TrainingConfig::default();
    let mut mode: Option<&str> = None;
    let mut n_nodes: Option<usize> = None;
    let mut depth = 4usize;
    let mut epochs = defaults.epochs;
    let mut batch_size = defaults.batch_size;
    let mut learning_rate = defaults.learning_rate;
    let mut patience = defaults.patience;
    let mut seed = 0u64;
    let mut data: Option<DataSource> = None;
    let mut out_dir: Option<PathBuf> = None;
    let mut seen: Vec<&str> = Vec::new();

    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(HarnessError::Plan(format!(
                "line {}: expected key=value, got {line:?}",
                lineno + 1
            )));
        };
        let (key, value) = (key.trim(), value.trim());
        if seen.contains(&key) {
            return Err(HarnessError::Plan(format!("line {}: repeated key {key}", lineno + 1)));
        }
        let bad = |what: &str| HarnessError::Plan(format!("line {}: bad {what}: {value:?}", lineno + 1));
        match key {
            "mode" => match value {
                "distributed" => mode = Some("distributed"),
                "centralized" => mode = Some("centralized"),
                _ => return Err(bad("mode")),
            },
            "n_nodes" => n_nodes = Some(value.parse().map_err(|_| bad("n_nodes"))?),
            "depth" => depth = value.parse().map_err(|_| bad("depth"))?,
            "epochs" => epochs = value.parse().map_err(|_| bad("epochs"))?,
            "batch_size" => batch_size = value.parse().map_err(|_| bad("batch_size"))?,
            "learning_rate" => learning_rate = value.parse().map_err(|_| bad("learning_rate"))?,
            "patience" => patience = value.parse().map_err(|_| bad("patience"))?,
            "seed" => seed = value.parse().map_err(|_| bad("seed"))?,
            "data" => {
                data = Some(if let Some(n) = value.strip_prefix("synthetic:") {
                    DataSource::Synthetic {
                        n_per_class: n.parse().map_err(|_| bad("synthetic size"))?,
                    }
                } else {
                    DataSource::Directory(PathBuf::from(value))
                })
            }
            "out_dir" => out_dir = Some(PathBuf::from(value)),
            _ => {
                return Err(HarnessError::Plan(format!("line {}: unknown key {key}", lineno + 1)))
            }
        }
        seen.push(match key {
            "mode" => "mode",
            "n_nodes" => "n_nodes",
            "depth" => "depth",
            "epochs" => "epochs",
            "batch_size" => "batch_size",
            "learning_rate" => "learning_rate",
            "patience" => "patience",
            "seed" => "seed",
            "data" => "data",
            _ => "out_dir",
        });
    }

    let mode = match mode {
        Some("distributed") => PlanMode::Distributed {
            n_nodes: n_nodes.unwrap_or(4),
        },
        Some("centralized") => PlanMode::Centralized,
        _ => return Err(HarnessError::Plan("missing key: mode".into())),
    };
    let data = data.ok_or_else(|| HarnessError::Plan("missing key: data".into()))?;
    let plan = ExperimentPlan {
        mode,
        depth,
        epochs,
        batch_size,
        learning_rate,
        patience,
        seed,
        data,
        out_dir,
    };
    plan.validate()?;
    Ok(plan)
}

/// One metric series with its training wall time.
#[derive(Debug, Clone)]
pub struct NodeSeries {
    pub label: String,
    pub history: Vec<EpochRecord>,
    pub train_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub run_label: String,
    pub depth: usize,
    pub series: Vec<NodeSeries>,
    /// Measured on the global holdout no node ever trained on.
    pub final_metric: Metric,
    pub total_epochs: usize,
    pub epochs_to_best: usize,
    pub model_version: u64,
    pub decision_log: Vec<DecisionRecord>,
    /// Encoded final model, byte-identical to what the winner holds.
    pub final_model: Vec<u8>,
    pub total_train_seconds: f64,
}

fn load_data(plan: &ExperimentPlan) -> Result<Dataset, HarnessError> {
    match &plan.data {
        DataSource::Synthetic { n_per_class } => Ok(synthesize(
            *n_per_class,
            derive_seed(plan.seed, "synthetic-data"),
        )?),
        DataSource::Directory(path) => Ok(ingest_directory(path)?.dataset),
    }
}

/// The split every run shares: global 80/20 holdout first, then the training
/// side cut into one shard per trainer plus one for the coordinator.
fn split(plan: &ExperimentPlan, n_nodes: usize) -> Result<(Vec<Dataset>, Dataset), HarnessError> {
    let full = load_data(plan)?;
    let (train_all, test_set) =
        stratified_holdout(&full, 0.8, derive_seed(plan.seed, "global-holdout"))?;
    let shards = partition(&train_all, n_nodes + 1, derive_seed(plan.seed, "partition"))?;
    Ok((shards, test_set))
}

pub fn run_distributed(plan: &ExperimentPlan) -> Result<ExperimentReport, HarnessError> {
    plan.validate()?;
    let n_nodes = plan.n_nodes();
    let (shards, test_set) = split(plan, n_nodes)?;
    let architecture = NetworkArchitecture::for_depth(plan.depth)?;

    let mut coordinator = Coordinator::init(
        "coordinator",
        architecture,
        &shards[0],
        &TrainingConfig {
            rng_seed: derive_seed(plan.seed, "coordinator"),
            ..plan.base_config()
        },
        keygen(derive_seed(plan.seed, "keys")),
    )?;

    let mut trainers = Vec::new();
    let mut watchdogs = Vec::new();
    for (k, shard) in shards[1..].iter().enumerate() {
        let node_id = format!("node-{}", k + 1);
        trainers.push(Trainer::new(
            &node_id,
            shard,
            coordinator.public_part(),
            TrainingConfig {
                rng_seed: derive_seed(plan.seed, &node_id),
                ..plan.base_config()
            },
        )?);
        watchdogs.push(Watchdog::new(
            &node_id,
            coordinator.public_part(),
            derive_seed(plan.seed, &format!("watchdog-{}", k + 1)),
        ));
    }

    let round_config = RoundRobinConfig {
        pass_limit: 3,
        link: LinkConfig {
            latency_ticks: 1,
            drop_probability: 0.0,
            seed: derive_seed(plan.seed, "links"),
        },
    };
    let mut clock = StdClock::new();
    let outcome = run_round_robin(
        &mut coordinator,
        &mut trainers,
        &mut watchdogs,
        &round_config,
        &mut clock,
    )?;

    let current = coordinator.current();
    let final_metric = evaluate_on(
        &current.architecture,
        &current.parameters,
        &test_set,
        plan.batch_size,
    )?;
    let series: Vec<NodeSeries> = outcome
        .node_runs
        .iter()
        .map(|run| NodeSeries {
            label: run.node_id.clone(),
            history: run.history.clone(),
            train_seconds: run.train_micros as f64 / 1e6,
        })
        .collect();
    let total_train_seconds = series.iter().map(|s| s.train_seconds).sum();

    Ok(ExperimentReport {
        run_label: "distributed".into(),
        depth: plan.depth,
        series,
        final_metric,
        total_epochs: outcome.total_epochs,
        epochs_to_best: outcome.epochs_at_last_accept,
        model_version: coordinator.current_version(),
        decision_log: coordinator.decision_log().to_vec(),
        final_model: codec::encode(current),
        total_train_seconds,
    })
}

pub fn run_centralized(plan: &ExperimentPlan) -> Result<ExperimentReport, HarnessError> {
    plan.validate()?;
    // Same split as the distributed run; the union of all shards is exactly
    // the global training side.
    let (shards, test_set) = split(plan, plan.n_nodes())?;
    let mut items = Vec::new();
    for shard in &shards {
        items.extend_from_slice(shard.items());
    }
    let union = Dataset::new(items);
    let architecture = NetworkArchitecture::for_depth(plan.depth)?;

    let (train_set, eval_set) = stratified_holdout(
        &union,
        0.8,
        derive_seed(plan.seed, "centralized-holdout"),
    )?;
    let initial = init_random(&architecture, derive_seed(plan.seed, "centralized-init"));
    let config = TrainingConfig {
        rng_seed: derive_seed(plan.seed, "centralized-train"),
        ..plan.base_config()
    };
    let started = Instant::now();
    let (best, history) = train(&architecture, initial, &train_set, &eval_set, &config, |_| {})?;
    let train_seconds = started.elapsed().as_secs_f64();

    let final_metric = evaluate_on(&architecture, &best, &test_set, plan.batch_size)?;
    let epochs_to_best = history
        .iter()
        .rev()
        .find(|r| r.improved)
        .map(|r| r.epoch_index + 1)
        .unwrap_or(0);
    let artifact = ModelArtifact::new(
        architecture,
        best,
        ModelMetadata {
            model_version: 0,
            origin_node: "centralized".into(),
            metric_accuracy: final_metric.accuracy,
            metric_loss: final_metric.loss,
        },
    )?;

    Ok(ExperimentReport {
        run_label: "centralized".into(),
        depth: plan.depth,
        total_epochs: history.len(),
        epochs_to_best,
        series: vec![NodeSeries {
            label: "centralized".into(),
            history,
            train_seconds,
        }],
        final_metric,
        model_version: 0,
        decision_log: Vec::new(),
        final_model: codec::encode(&artifact),
        total_train_seconds: train_seconds,
    })
}

/// Runs whatever the plan's mode says.
pub fn run_plan(plan: &ExperimentPlan) -> Result<ExperimentReport, HarnessError> {
    match plan.mode {
        PlanMode::Distributed { .. } => run_distributed(plan),
        PlanMode::Centralized => run_centralized(plan),
    }
}

/// The paper-style comparison: both modes on the same plan and seed.
pub fn compare(plan: &ExperimentPlan) -> Result<(ExperimentReport, ExperimentReport), HarnessError> {
    Ok((run_distributed(plan)?, run_centralized(plan)?))
}

/// Reruns the plan at each depth with matched seeds.
pub fn layer_sweep(
    plan: &ExperimentPlan,
    depths: &[usize],
) -> Result<Vec<ExperimentReport>, HarnessError> {
    let mut reports = Vec::new();
    for &depth in depths {
        let swept = ExperimentPlan {
            depth,
            ..plan.clone()
        };
        let mut report = run_plan(&swept)?;
        report.run_label = format!("{}-depth-{depth}", report.run_label);
        reports.push(report);
    }
    Ok(reports)
}

fn write_series_csv(path: &Path, history: &[EpochRecord]) -> Result<(), HarnessError> {
    let accuracy: Vec<f64> = history.iter().map(|r| r.eval_accuracy).collect();
    let loss: Vec<f64> = history.iter().map(|r| r.eval_loss).collect();
    let smoothed_accuracy = ema_smooth(&accuracy, REPORT_FACTOR).expect("factor in range");
    let smoothed_loss = ema_smooth(&loss, REPORT_FACTOR).expect("factor in range");

    let mut out = String::from("epoch,raw_accuracy,smoothed_accuracy,raw_loss,smoothed_loss\n");
    for (i, record) in history.iter().enumerate() {
        out.push_str(&format!(
            "{},{:.6},{:.6},{:.6},{:.6}\n",
            i,
            record.eval_accuracy,
            smoothed_accuracy.smoothed[i],
            record.eval_loss,
            smoothed_loss.smoothed[i],
        ));
    }
    fs::write(path, out)?;
    Ok(())
}

fn summary_line(report: &ExperimentReport) -> String {
    format!(
        "{},{},{:.6},{:.6},{},{},{}\n",
        report.run_label,
        report.depth,
        report.final_metric.accuracy,
        report.final_metric.loss,
        report.total_epochs,
        report.epochs_to_best,
        report.model_version,
    )
}

/// One decision as a single `key=value` log line. Metrics the gate never
/// saw (integrity or format rejects) print as `none`.
pub fn decision_line(run_label: &str, record: &DecisionRecord) -> String {
    let (candidate_accuracy, candidate_loss) = match record.candidate_metric {
        Some(m) => (format!("{:.6}", m.accuracy), format!("{:.6}", m.loss)),
        None => ("none".into(), "none".into()),
    };
    let decision = match record.decision {
        DecisionOutcome::Accepted => "accepted",
        DecisionOutcome::Rejected(RejectReason::NotBetter) => "rejected reason=not_better",
        DecisionOutcome::Rejected(RejectReason::Integrity) => "rejected reason=integrity",
        DecisionOutcome::Rejected(RejectReason::Format) => "rejected reason=format",
    };
    format!(
        "run={run_label} t={} origin={} candidate_accuracy={candidate_accuracy} candidate_loss={candidate_loss} incumbent_accuracy={:.6} incumbent_loss={:.6} decision={decision} version={}\n",
        record.timestamp,
        record.candidate_origin,
        record.incumbent_metric.accuracy,
        record.incumbent_metric.loss,
        record.version_after,
    )
}

/// Writes the whole report bundle: one CSV per series, `summary.csv`,
/// `decisions.log` (when any run decided anything), and `timings.txt`.
/// Everything except `timings.txt` is deterministic in the plan.
pub fn emit_report(out_dir: &Path, reports: &[&ExperimentReport]) -> Result<Vec<PathBuf>, HarnessError> {
    fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();

    for report in reports {
        for series in &report.series {
            let name = if series.label == report.run_label {
                format!("{}.csv", series.label)
            } else {
                format!("{}-{}.csv", report.run_label, series.label)
            };
            let path = out_dir.join(name);
            write_series_csv(&path, &series.history)?;
            written.push(path);
        }
    }

    let mut summary = String::from(
        "run,depth,final_accuracy,final_loss,total_epochs,epochs_to_best,model_version\n",
    );
    for report in reports {
        summary.push_str(&summary_line(report));
    }
    let summary_path = out_dir.join("summary.csv");
    fs::write(&summary_path, summary)?;
    written.push(summary_path);

    if reports.iter().any(|r| !r.decision_log.is_empty()) {
        let mut log = String::new();
        for report in reports {
            for record in &report.decision_log {
                log.push_str(&decision_line(&report.run_label, record));
            }
        }
        let log_path = out_dir.join("decisions.log");
        fs::write(&log_path, log)?;
        written.push(log_path);
    }

    let timings_path = out_dir.join("timings.txt");
    let mut timings = fs::File::create(&timings_path)?;
    for report in reports {
        for series in &report.series {
            writeln!(
                timings,
                "{} {} seconds={:.6}",
                report.run_label, series.label, series.train_seconds
            )?;
        }
        writeln!(
            timings,
            "{} total seconds={:.6}",
            report.run_label, report.total_train_seconds
        )?;
    }
    written.push(timings_path);

    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn tiny_plan() -> ExperimentPlan {
        ExperimentPlan {
            mode: PlanMode::Distributed { n_nodes: 2 },
            depth: 2,
            epochs: 6,
            batch_size: 16,
            learning_rate: 0.2,
            patience: 6,
            seed: 5,
            data: DataSource::Synthetic { n_per_class: 45 },
            out_dir: None,
        }
    }

    #[test]
    fn plan_parsing_round_trip_and_defaults() {
        let text = "\
# comparison plan
mode = distributed
n_nodes = 3
data = synthetic:120
seed = 9
";
        let plan = parse_plan(text).unwrap();
        assert_eq!(plan.mode, PlanMode::Distributed { n_nodes: 3 });
        assert_eq!(plan.depth, 4);
        assert_eq!(plan.seed, 9);
        assert_eq!(plan.data, DataSource::Synthetic { n_per_class: 120 });
        let defaults = TrainingConfig::default();
        assert_eq!(plan.epochs, defaults.epochs);
        assert_eq!(plan.batch_size, defaults.batch_size);

        assert!(parse_plan("data=synthetic:10\n").is_err(), "mode is required");
        assert!(parse_plan("mode=distributed\n").is_err(), "data is required");
        assert!(parse_plan("mode=distributed\ndata=synthetic:10\nmode=centralized\n").is_err());
        assert!(parse_plan("mode=distributed\ndata=synthetic:10\ncolor=blue\n").is_err());
        assert!(parse_plan("mode=distributed\ndata=synthetic:0\n").is_err());

        let dir_plan = parse_plan("mode=centralized\ndata=/tmp/images\nout_dir=/tmp/out\n").unwrap();
        assert_eq!(dir_plan.data, DataSource::Directory(PathBuf::from("/tmp/images")));
        assert_eq!(dir_plan.out_dir, Some(PathBuf::from("/tmp/out")));
    }

    #[test]
    fn global_holdout_is_disjoint_from_every_shard() {
        let plan = tiny_plan();
        let (shards, test_set) = split(&plan, plan.n_nodes()).unwrap();
        let test_ids: BTreeSet<&str> = test_set.items().iter().map(|i| i.source_id()).collect();
        let mut train_ids: BTreeSet<&str> = BTreeSet::new();
        for shard in &shards {
            for item in shard.items() {
                assert!(!test_ids.contains(item.source_id()), "leaked into training");
                assert!(train_ids.insert(item.source_id()), "duplicated across shards");
            }
        }
        assert_eq!(train_ids.len() + test_ids.len(), 45 * 2);
    }

    #[test]
    fn distributed_report_carries_the_coordinator_model() {
        let report = run_distributed(&tiny_plan()).unwrap();
        assert_eq!(report.series.len(), 2);
        assert!(report.total_epochs > 0);
        assert!(report.epochs_to_best <= report.total_epochs);
        let artifact = codec::decode(&report.final_model).unwrap();
        assert_eq!(artifact.metadata.model_version, report.model_version);
        assert_eq!(
            report.decision_log.iter().filter(|r| r.decision == DecisionOutcome::Accepted).count()
                as u64,
            report.model_version
        );
    }

    #[test]
    fn reruns_are_identical_apart_from_wall_time() {
        let plan = tiny_plan();
        let a = run_distributed(&plan).unwrap();
        let b = run_distributed(&plan).unwrap();
        assert_eq!(a.final_model, b.final_model);
        assert_eq!(a.decision_log, b.decision_log);
        assert_eq!(a.final_metric, b.final_metric);
        for (sa, sb) in a.series.iter().zip(&b.series) {
            assert_eq!(sa.history, sb.history);
        }
    }

    #[test]
    fn centralized_runs_on_the_union() {
        let plan = ExperimentPlan {
            mode: PlanMode::Centralized,
            ..tiny_plan()
        };
        let report = run_centralized(&plan).unwrap();
        assert_eq!(report.series.len(), 1);
        assert_eq!(report.model_version, 0);
        assert!(report.decision_log.is_empty());
        assert_eq!(report.total_epochs, report.series[0].history.len());
    }

    #[test]
    fn emitted_files_are_deterministic_minus_timings() {
        let plan = tiny_plan();
        let (dist, cent) = compare(&plan).unwrap();
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        emit_report(dir_a.path(), &[&dist, &cent]).unwrap();
        let (dist2, cent2) = compare(&plan).unwrap();
        emit_report(dir_b.path(), &[&dist2, &cent2]).unwrap();

        let mut names: Vec<String> = fs::read_dir(dir_a.path())
            .unwrap()
            .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
            .collect();
        names.sort();
        assert_eq!(
            names,
            vec![
                "centralized.csv",
                "decisions.log",
                "distributed-node-1.csv",
                "distributed-node-2.csv",
                "summary.csv",
                "timings.txt"
            ]
        );
        for name in &names {
            if name == "timings.txt" {
                continue;
            }
            let a = fs::read(dir_a.path().join(name)).unwrap();
            let b = fs::read(dir_b.path().join(name)).unwrap();
            assert_eq!(a, b, "{name} differs between identical runs");
        }

        let summary = fs::read_to_string(dir_a.path().join("summary.csv")).unwrap();
        let mut lines = summary.lines();
        assert_eq!(
            lines.next().unwrap(),
            "run,depth,final_accuracy,final_loss,total_epochs,epochs_to_best,model_version"
        );
        assert!(lines.next().unwrap().starts_with("distributed,2,"));
        assert!(lines.next().unwrap().starts_with("centralized,2,"));

        let node_csv = fs::read_to_string(dir_a.path().join("distributed-node-1.csv")).unwrap();
        assert_eq!(
            node_csv.lines().next().unwrap(),
            "epoch,raw_accuracy,smoothed_accuracy,raw_loss,smoothed_loss"
        );
        assert_eq!(node_csv.lines().count() - 1, dist.series[0].history.len());
    }

    #[test]
    fn sweep_reruns_the_same_split_per_depth() {
        let plan = ExperimentPlan {
            mode: PlanMode::Centralized,
            epochs: 2,
            patience: 2,
            ..tiny_plan()
        };
        let reports = layer_sweep(&plan, &[1, 2]).unwrap();
        assert_eq!(reports.len(), 2);
        assert_eq!(reports[0].run_label, "centralized-depth-1");
        assert_eq!(reports[1].run_label, "centralized-depth-2");
        assert_eq!(reports[0].depth, 1);
        assert_eq!(reports[1].depth, 2);
    }
}
