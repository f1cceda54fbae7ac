//! Command-line front end. Machine output goes to stdout as key=value
//! lines, logs go to stderr, and the exit code is the contract: 0 on
//! success, 1 for usage problems, 2 for runtime failures.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::atomic::AtomicBool;
use std::sync::{Arc, Mutex};
use std::thread;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use silotrain_core::envelope::keygen;
use silotrain_core::nn::arch::NetworkArchitecture;
use silotrain_core::nn::train::TrainingConfig;
use silotrain_core::protocol::{Coordinator, ImprovementEvent, Trainer, Watchdog};
use silotrain_core::seed::derive_seed;

use silotrain::harness::{self, decision_line};
use silotrain::ingest::{export_dataset, ingest_directory};
use silotrain::keyfile::{load_keypair, load_public, save_keypair};
use silotrain::spool::{write_spool_file, SpoolWatcher, POLL_INTERVAL};
use silotrain::tcp;

#[derive(Parser)]
#[command(name = "silotrain", version, about = "Siloed training over model exchange")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a signing/sealing keypair as <name>.pub and <name>.key.
    Keygen {
        #[arg(long)]
        name: PathBuf,
        /// Omit for a random key.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Serve the current model and the acceptance gate until killed.
    Coordinator {
        #[arg(long)]
        listen_addr: String,
        /// Directory of labeled PGM images; also receives decisions.log.
        #[arg(long)]
        data_dir: PathBuf,
        /// Private key file (or its basename) from keygen.
        #[arg(long)]
        key_file: PathBuf,
        #[arg(long, default_value_t = 4)]
        arch_depth: usize,
    },
    /// Run one training round against a live coordinator.
    Node {
        #[arg(long)]
        coordinator_addr: String,
        #[arg(long)]
        data_dir: PathBuf,
        /// The coordinator's public key file.
        #[arg(long)]
        key_file: PathBuf,
        /// Stage improvements as files under <dir>/inbox before sending.
        #[arg(long)]
        spool_dir: Option<PathBuf>,
    },
    /// Run the experiment a plan file describes, in process.
    Simulate {
        #[arg(long)]
        plan_file: PathBuf,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Run the plan both distributed and centralized on matched seeds.
    Compare {
        #[arg(long)]
        plan_file: PathBuf,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Write a synthetic labeled dataset as PGM files.
    Synth {
        #[arg(long)]
        n_per_class: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Scan a data directory and report what would be ingested.
    IngestCheck {
        #[arg(long)]
        data_dir: PathBuf,
    },
}

fn init_logging() {
    let level = match std::env::var("SILOTRAIN_LOG").as_deref() {
        Ok("quiet") => log::LevelFilter::Off,
        Ok("debug") => log::LevelFilter::Debug,
        _ => log::LevelFilter::Info,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .init();
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                std::process::exit(0);
            }
            // Usage errors are one line on stderr, whatever clap rendered.
            let line = e
                .to_string()
                .lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with("For more information"))
                .collect::<Vec<_>>()
                .join("; ");
            eprintln!("{line}");
            std::process::exit(1);
        }
    };
    init_logging();
    if let Err(e) = run(cli.command) {
        eprintln!("error: {e:#}");
        std::process::exit(2);
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn node_id_for(data_dir: &Path) -> String {
    data_dir
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| String::from("node"))
}

fn emit(pairs: &[(&str, String)]) {
    let mut out = std::io::stdout().lock();
    for (key, value) in pairs {
        let _ = writeln!(out, "{key}={value}");
    }
    let _ = out.flush();
}

fn run(command: Command) -> anyhow::Result<()> {
    match command {
        Command::Keygen { name, seed } => {
            let keys = keygen(seed.unwrap_or_else(rand::random));
            let (pub_path, key_path) = save_keypair(&name, &keys)?;
            emit(&[
                ("public", pub_path.display().to_string()),
                ("private", key_path.display().to_string()),
                ("key_id", hex(&keys.key_id())),
            ]);
            Ok(())
        }
        Command::Coordinator {
            listen_addr,
            data_dir,
            key_file,
            arch_depth,
        } => {
            let keys = load_keypair(&key_file)?;
            let report = ingest_directory(&data_dir)?;
            if report.skipped > 0 {
                log::info!("skipped {} unusable files in {}", report.skipped, data_dir.display());
            }
            let node_id = node_id_for(&data_dir);
            let config = TrainingConfig {
                rng_seed: derive_seed(0, &node_id),
                ..TrainingConfig::default()
            };
            let coordinator = Coordinator::init(
                &node_id,
                NetworkArchitecture::for_depth(arch_depth)?,
                &report.dataset,
                &config,
                keys,
            )?;
            let listener = std::net::TcpListener::bind(&listen_addr)?;
            emit(&[
                ("listen", listener.local_addr()?.to_string()),
                ("node", node_id.clone()),
                ("key_id", hex(&coordinator.public_part().key_id())),
                ("version", coordinator.current_version().to_string()),
            ]);
            let log_path = data_dir.join("decisions.log");
            let mut log_file = fs::OpenOptions::new()
                .create(true)
                .append(true)
                .open(&log_path)?;
            log::info!("serving on {listen_addr}, decisions to {}", log_path.display());
            // Runs until the process is killed.
            let stop = Arc::new(AtomicBool::new(false));
            tcp::serve_coordinator(
                listener,
                Arc::new(Mutex::new(coordinator)),
                stop,
                move |record| {
                    if let Err(e) = log_file.write_all(decision_line("live", record).as_bytes()) {
                        log::warn!("decision log write failed: {e}");
                    }
                    let _ = log_file.flush();
                },
            )?;
            Ok(())
        }
        Command::Node {
            coordinator_addr,
            data_dir,
            key_file,
            spool_dir,
        } => {
            let coordinator_public = load_public(&key_file)?;
            let report = ingest_directory(&data_dir)?;
            if report.skipped > 0 {
                log::info!("skipped {} unusable files in {}", report.skipped, data_dir.display());
            }
            let node_id = node_id_for(&data_dir);
            let config = TrainingConfig {
                rng_seed: derive_seed(0, &node_id),
                ..TrainingConfig::default()
            };
            let mut trainer = Trainer::new(&node_id, &report.dataset, coordinator_public.clone(), config)?;
            let mut watchdog = Watchdog::new(&node_id, coordinator_public, derive_seed(1, &node_id));

            let outcome = match spool_dir {
                None => tcp::run_node_round(&coordinator_addr, &mut trainer, &mut watchdog)?,
                Some(dir) => spooled_node_round(&coordinator_addr, dir, &mut trainer, &mut watchdog)?,
            };
            let accepted = outcome.decisions.iter().filter(|d| d.accepted).count();
            let version = outcome.decisions.last().map(|d| d.version).unwrap_or(0);
            emit(&[
                ("node", node_id),
                ("epochs", outcome.history.len().to_string()),
                ("candidates", outcome.candidates_sent.to_string()),
                ("accepted", accepted.to_string()),
                ("version", version.to_string()),
            ]);
            Ok(())
        }
        Command::Simulate { plan_file, out_dir } => {
            let plan = harness::parse_plan(&fs::read_to_string(&plan_file)?)?;
            let out_dir = resolve_out_dir(out_dir, &plan)?;
            let report = harness::run_plan(&plan)?;
            harness::emit_report(&out_dir, &[&report])?;
            emit(&[
                ("run", report.run_label.clone()),
                ("final_accuracy", format!("{:.6}", report.final_metric.accuracy)),
                ("final_loss", format!("{:.6}", report.final_metric.loss)),
                ("total_epochs", report.total_epochs.to_string()),
                ("model_version", report.model_version.to_string()),
                ("out_dir", out_dir.display().to_string()),
            ]);
            Ok(())
        }
        Command::Compare { plan_file, out_dir } => {
            let plan = harness::parse_plan(&fs::read_to_string(&plan_file)?)?;
            let out_dir = resolve_out_dir(out_dir, &plan)?;
            let (dist, cent) = harness::compare(&plan)?;
            harness::emit_report(&out_dir, &[&dist, &cent])?;
            let gap = (dist.final_metric.accuracy - cent.final_metric.accuracy).abs();
            emit(&[
                ("distributed_accuracy", format!("{:.6}", dist.final_metric.accuracy)),
                ("distributed_loss", format!("{:.6}", dist.final_metric.loss)),
                ("distributed_version", dist.model_version.to_string()),
                ("centralized_accuracy", format!("{:.6}", cent.final_metric.accuracy)),
                ("centralized_loss", format!("{:.6}", cent.final_metric.loss)),
                ("accuracy_gap", format!("{gap:.6}")),
                ("out_dir", out_dir.display().to_string()),
            ]);
            Ok(())
        }
        Command::Synth {
            n_per_class,
            seed,
            out_dir,
        } => {
            let dataset = silotrain_core::data::synthesize(n_per_class, seed)?;
            export_dataset(&dataset, &out_dir)?;
            emit(&[
                ("out_dir", out_dir.display().to_string()),
                ("images", dataset.len().to_string()),
            ]);
            Ok(())
        }
        Command::IngestCheck { data_dir } => {
            let report = ingest_directory(&data_dir)?;
            let ones = report.dataset.items().iter().filter(|i| i.label() == 1).count();
            emit(&[
                ("data_dir", data_dir.display().to_string()),
                ("images", report.dataset.len().to_string()),
                ("skipped", report.skipped.to_string()),
                ("class0", (report.dataset.len() - ones).to_string()),
                ("class1", ones.to_string()),
            ]);
            Ok(())
        }
    }
}

fn resolve_out_dir(flag: Option<PathBuf>, plan: &harness::ExperimentPlan) -> anyhow::Result<PathBuf> {
    flag.or_else(|| plan.out_dir.clone()).ok_or_else(|| {
        anyhow::anyhow!("no output directory: pass --out-dir or set out_dir in the plan")
    })
}

/// Like a plain node round, but improvements land in the spool inbox first
/// and are only sent once the watcher picks them back up. Training IO and
/// network IO stay decoupled; dedup still happens at the watchdog.
fn spooled_node_round(
    addr: &str,
    spool_dir: PathBuf,
    trainer: &mut Trainer,
    watchdog: &mut Watchdog,
) -> Result<tcp::NodeRoundOutcome, anyhow::Error> {
    use silotrain_core::frame::Message;

    let mut watcher = SpoolWatcher::new(&spool_dir)?;
    let inbox = spool_dir.join("inbox");

    let mut stream = std::net::TcpStream::connect(addr)?;
    stream.set_nodelay(true)?;
    tcp::send_message(
        &mut stream,
        &Message::FetchModel {
            node_id: trainer.node_id().to_string(),
        },
    )?;
    let current = match tcp::read_message(&mut stream)? {
        Some(Message::CurrentModel(signed)) => signed,
        Some(other) => {
            return Err(tcp::TcpError::UnexpectedReply {
                wanted: "CurrentModel",
                got: other.kind().to_string(),
            }
            .into())
        }
        None => return Err(tcp::TcpError::TruncatedFrame.into()),
    };

    let mut spooled = 0u64;
    let history = trainer.run_round(&current, |event| {
        match write_spool_file(&inbox, &event.artifact, event.epoch_index) {
            Ok(_) => spooled += 1,
            Err(e) => log::warn!("spool write failed, dropping improvement: {e}"),
        }
    })?;
    log::info!("spooled {spooled} improvements under {}", inbox.display());

    // Everything is already on disk, so one sizing poll and one consuming
    // poll see stable files.
    let mut events = watcher.poll_once()?;
    thread::sleep(POLL_INTERVAL);
    events.extend(watcher.poll_once()?);

    let mut outcome = tcp::NodeRoundOutcome {
        history,
        candidates_sent: 0,
        decisions: Vec::new(),
    };
    for event in events {
        let improvement = ImprovementEvent {
            epoch_index: event.epoch_index,
            artifact: event.artifact,
        };
        let Some(message) = watchdog.forward(&improvement) else {
            continue;
        };
        tcp::send_message(&mut stream, &message)?;
        outcome.candidates_sent += 1;
        match tcp::read_message(&mut stream)? {
            Some(Message::Decision { accepted, version }) => {
                outcome.decisions.push(tcp::DecisionNote {
                    epoch_index: event.epoch_index,
                    accepted,
                    version,
                });
            }
            Some(other) => {
                return Err(tcp::TcpError::UnexpectedReply {
                    wanted: "Decision",
                    got: other.kind().to_string(),
                }
                .into())
            }
            None => return Err(tcp::TcpError::TruncatedFrame.into()),
        }
    }
    Ok(outcome)
}
