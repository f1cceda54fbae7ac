//! The three roles and their exchange discipline.
//!
//! The coordinator owns the current model and an acceptance gate: it serves
//! signed model bytes to anyone who asks and re-evaluates every sealed
//! candidate on its own holdout, replacing the model only on strict metric
//! improvement. Trainers fetch, verify, train locally, and surface
//! improvement events. Watchdogs watch those events, deduplicate them, seal
//! the artifacts for the coordinator, and forward. Training data never
//! leaves a node; only model artifacts move.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::codec::{self, CodecError, ModelArtifact, ModelMetadata};
use crate::data::{stratified_holdout, DataError, Dataset};
use crate::envelope::{
    open, seal, sign, verify, EnvelopeError, KeyPair, PublicPart, SealedEnvelope, SignedArtifact,
};
use crate::frame::{FrameError, Message};
use crate::nn::arch::NetworkArchitecture;
use crate::nn::train::{evaluate_on, train, EpochRecord, TrainingConfig};
use crate::nn::{Metric, NnError};
use crate::seed::derive_seed;
use crate::simnet::{Direction, LinkConfig, SimulatedLink};

pub const HOLDOUT_FRACTION: f64 = 0.8;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ProtocolError {
    #[error("envelope: {0}")]
    Envelope(#[from] EnvelopeError),
    #[error("codec: {0}")]
    Codec(#[from] CodecError),
    #[error("network: {0}")]
    Nn(#[from] NnError),
    #[error("data: {0}")]
    Data(#[from] DataError),
    #[error("frame: {0}")]
    Frame(#[from] FrameError),
    #[error("configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RejectReason {
    /// Evaluated fine but did not strictly beat the incumbent (ties included).
    NotBetter,
    /// The envelope failed to open or verify.
    Integrity,
    /// The payload decoded to nothing usable.
    Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DecisionOutcome {
    Accepted,
    Rejected(RejectReason),
}

/// One gate decision, appended to the coordinator's log in order.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionRecord {
    /// Monotonic decision counter, not wall time.
    pub timestamp: u64,
    pub candidate_origin: String,
    /// Missing when the candidate never evaluated (integrity/format rejects).
    pub candidate_metric: Option<Metric>,
    pub incumbent_metric: Metric,
    pub decision: DecisionOutcome,
    /// Current model version after this decision.
    pub version_after: u64,
}

/// Holds the current model and decides whether candidates replace it.
#[derive(Debug)]
pub struct Coordinator {
    node_id: String,
    keys: KeyPair,
    eval_set: Dataset,
    eval_batch: usize,
    current: ModelArtifact,
    current_signed: SignedArtifact,
    best_metric: Metric,
    log: Vec<DecisionRecord>,
    decision_counter: u64,
}

impl Coordinator {
    /// Splits local data, trains the architecture for a single epoch to get
    /// a starting model, and publishes it as version 0.
    pub fn init(
        node_id: &str,
        architecture: NetworkArchitecture,
        local_data: &Dataset,
        config: &TrainingConfig,
        keys: KeyPair,
    ) -> Result<Self, ProtocolError> {
        let (train_set, eval_set) = stratified_holdout(
            local_data,
            HOLDOUT_FRACTION,
            derive_seed(config.rng_seed, "coordinator-holdout"),
        )?;
        let initial = crate::nn::init_random(
            &architecture,
            derive_seed(config.rng_seed, "coordinator-init"),
        );
        let warmup = TrainingConfig {
            epochs: 1,
            patience: 0,
            rng_seed: derive_seed(config.rng_seed, "coordinator-warmup"),
            ..config.clone()
        };
        let (params, history) = train(
            &architecture,
            initial,
            &train_set,
            &eval_set,
            &warmup,
            |_| {},
        )?;
        let first = history.first().expect("one epoch ran");
        let best_metric = Metric {
            accuracy: first.eval_accuracy,
            loss: first.eval_loss,
        };
        let current = ModelArtifact::new(
            architecture,
            params,
            ModelMetadata {
                model_version: 0,
                origin_node: node_id.to_string(),
                metric_accuracy: best_metric.accuracy,
                metric_loss: best_metric.loss,
            },
        )?;
        let current_signed = sign(&codec::encode(&current), &keys.private);
        Ok(Coordinator {
            node_id: node_id.to_string(),
            keys,
            eval_set,
            eval_batch: config.batch_size,
            current,
            current_signed,
            best_metric,
            log: Vec::new(),
            decision_counter: 0,
        })
    }

    pub fn node_id(&self) -> &str {
        &self.node_id
    }

    pub fn public_part(&self) -> PublicPart {
        self.keys.public.clone()
    }

    pub fn current(&self) -> &ModelArtifact {
        &self.current
    }

    pub fn current_version(&self) -> u64 {
        self.current.metadata.model_version
    }

    pub fn best_metric(&self) -> Metric {
        self.best_metric
    }

    pub fn decision_log(&self) -> &[DecisionRecord] {
        &self.log
    }

    /// Serves the signed current model. Successive calls between decisions
    /// return byte-identical artifacts.
    pub fn handle_fetch(&self) -> Message {
        Message::CurrentModel(self.current_signed.clone())
    }

    /// Opens, decodes, and re-measures a sealed candidate, then applies the
    /// acceptance rule. Rejections leave the current model untouched; the
    /// whole update is atomic from any observer's point of view.
    pub fn evaluate_candidate(&mut self, origin: &str, envelope: &SealedEnvelope) -> Message {
        let payload = match open(envelope, &self.keys.private) {
            Ok(p) => p,
            Err(_) => return self.reject(origin, None, RejectReason::Integrity),
        };
        let artifact = match codec::decode(&payload) {
            Ok(a) => a,
            Err(_) => return self.reject(origin, None, RejectReason::Format),
        };
        if !artifact.parameters.all_finite() {
            return self.reject(origin, None, RejectReason::Format);
        }
        let metric = match evaluate_on(
            &artifact.architecture,
            &artifact.parameters,
            &self.eval_set,
            self.eval_batch,
        ) {
            Ok(m) => m,
            Err(_) => return self.reject(origin, None, RejectReason::Format),
        };

        if !metric.beats(&self.best_metric) {
            return self.reject(origin, Some(metric), RejectReason::NotBetter);
        }

        let version = self.current.metadata.model_version + 1;
        let accepted = ModelArtifact::new(
            artifact.architecture,
            artifact.parameters,
            ModelMetadata {
                model_version: version,
                origin_node: artifact.metadata.origin_node,
                metric_accuracy: metric.accuracy,
                metric_loss: metric.loss,
            },
        )
        .expect("decoded artifact is consistent");
        let signed = sign(&codec::encode(&accepted), &self.keys.private);
        self.current = accepted;
        self.current_signed = signed;
        self.best_metric = metric;
        self.push_record(origin, Some(metric), DecisionOutcome::Accepted);
        Message::Decision {
            accepted: true,
            version,
        }
    }

    fn reject(&mut self, origin: &str, metric: Option<Metric>, reason: RejectReason) -> Message {
        self.push_record(origin, metric, DecisionOutcome::Rejected(reason));
        Message::Decision {
            accepted: false,
            version: self.current.metadata.model_version,
        }
    }

    fn push_record(
        &mut self,
        origin: &str,
        candidate_metric: Option<Metric>,
        decision: DecisionOutcome,
    ) {
        let record = DecisionRecord {
            timestamp: self.decision_counter,
            candidate_origin: origin.to_string(),
            candidate_metric,
            incumbent_metric: self.best_metric,
            decision,
            version_after: self.current.metadata.model_version,
        };
        self.decision_counter += 1;
        self.log.push(record);
    }
}

/// Fired by a trainer at every strict improvement during a round.
#[derive(Debug, Clone)]
pub struct ImprovementEvent {
    pub epoch_index: usize,
    pub artifact: ModelArtifact,
}

/// Trains locally against fetched models.
#[derive(Debug)]
pub struct Trainer {
    node_id: String,
    coordinator_public: PublicPart,
    train_set: Dataset,
    eval_set: Dataset,
    config: TrainingConfig,
    rounds: u64,
}

impl Trainer {
    pub fn new(
        node_id: &str,
        local_data: &Dataset,
        coordinator_public: PublicPart,
        config: TrainingConfig,
    ) -> Result<Self, ProtocolError> {
        let (train_set, eval_set) = stratified_holdout(
            local_data,
            HOLDOUT_FRACTION,
            derive_seed(config.rng_seed, "trainer-holdout"),
        )?;
        Ok(Trainer {
            node_id: node_id.to_string(),
            coordinator_public,
            train_set,
            eval_set,
            config,
            rounds: 0,
        })
    }

    pub fn node_id(&self) -> &str {
        &self.node_id
    }

    /// Verifies the fetched model, trains from it with early stopping, and
    /// reports each improvement through the callback. Returns the epoch
    /// history. A failed signature check means no training happens.
    pub fn run_round(
        &mut self,
        current: &SignedArtifact,
        mut on_event: impl FnMut(ImprovementEvent),
    ) -> Result<Vec<EpochRecord>, ProtocolError> {
        let payload = verify(current, &self.coordinator_public)?;
        let fetched = codec::decode(&payload)?;
        self.rounds += 1;
        let round_config = TrainingConfig {
            rng_seed: derive_seed(self.config.rng_seed, &format!("round-{}", self.rounds)),
            ..self.config.clone()
        };
        let base_version = fetched.metadata.model_version;
        let architecture = fetched.architecture;
        let node_id = self.node_id.clone();
        let (_, history) = train(
            &architecture,
            fetched.parameters,
            &self.train_set,
            &self.eval_set,
            &round_config,
            |snapshot| {
                let artifact = ModelArtifact::new(
                    architecture.clone(),
                    snapshot.params.clone(),
                    ModelMetadata {
                        model_version: base_version,
                        origin_node: node_id.clone(),
                        metric_accuracy: snapshot.metric.accuracy,
                        metric_loss: snapshot.metric.loss,
                    },
                )
                .expect("trained parameters match the architecture");
                on_event(ImprovementEvent {
                    epoch_index: snapshot.epoch_index,
                    artifact,
                });
            },
        )?;
        Ok(history)
    }
}

/// Seals and forwards improvement events, at most once each.
#[derive(Debug)]
pub struct Watchdog {
    node_id: String,
    coordinator_public: PublicPart,
    seen: BTreeSet<(String, u64, u64)>,
    rng: ChaCha20Rng,
    duplicates_dropped: u64,
}

impl Watchdog {
    pub fn new(node_id: &str, coordinator_public: PublicPart, seed: u64) -> Self {
        Watchdog {
            node_id: node_id.to_string(),
            coordinator_public,
            seen: BTreeSet::new(),
            rng: ChaCha20Rng::seed_from_u64(seed),
            duplicates_dropped: 0,
        }
    }

    pub fn duplicates_dropped(&self) -> u64 {
        self.duplicates_dropped
    }

    /// Turns a fresh improvement event into a sealed candidate message.
    /// An event already seen (same origin, base version, and epoch) is
    /// dropped and `None` returned.
    pub fn forward(&mut self, event: &ImprovementEvent) -> Option<Message> {
        let key = (
            event.artifact.metadata.origin_node.clone(),
            event.artifact.metadata.model_version,
            event.epoch_index as u64,
        );
        if !self.seen.insert(key) {
            self.duplicates_dropped += 1;
            return None;
        }
        let payload = codec::encode(&event.artifact);
        let envelope = seal(&payload, &self.coordinator_public, &mut self.rng);
        Some(Message::CandidateModel {
            node_id: self.node_id.clone(),
            envelope,
        })
    }
}

/// Wall-clock source for measuring training time. The simulation path can
/// run with `NullClock` where timing is irrelevant.
pub trait Clock {
    fn now_micros(&mut self) -> u64;
}

pub struct NullClock;

impl Clock for NullClock {
    fn now_micros(&mut self) -> u64 {
        0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundRobinConfig {
    /// Full sweeps over the node list before stopping.
    pub pass_limit: usize,
    pub link: LinkConfig,
}

impl Default for RoundRobinConfig {
    fn default() -> Self {
        RoundRobinConfig {
            pass_limit: 3,
            link: LinkConfig::default(),
        }
    }
}

/// Per-node outcome of a round-robin run.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeRun {
    pub node_id: String,
    pub history: Vec<EpochRecord>,
    /// Time spent inside local training, transport and gating excluded.
    pub train_micros: u64,
    pub fetches: u64,
    pub candidates_sent: u64,
    pub accepted: u64,
    pub rejected: u64,
    pub aborted_rounds: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundRobinOutcome {
    pub node_runs: Vec<NodeRun>,
    pub passes_run: usize,
    pub total_epochs: usize,
    /// Cumulative epoch count across nodes when the last acceptance landed.
    pub epochs_at_last_accept: usize,
}

/// Drives trainers one at a time through simulated links: fetch, train,
/// forward candidates, collect decisions. Runs passes until one completes
/// with no acceptance or the pass limit is hit. A transport loss or role
/// error cancels the round of the node it hit and nothing else.
pub fn run_round_robin(
    coordinator: &mut Coordinator,
    trainers: &mut [Trainer],
    watchdogs: &mut [Watchdog],
    config: &RoundRobinConfig,
    clock: &mut dyn Clock,
) -> Result<RoundRobinOutcome, ProtocolError> {
    if trainers.len() != watchdogs.len() {
        return Err(ProtocolError::Config(format!(
            "{} trainers but {} watchdogs",
            trainers.len(),
            watchdogs.len()
        )));
    }
    if config.pass_limit == 0 {
        return Err(ProtocolError::Config(String::from(
            "pass limit must be at least 1",
        )));
    }

    let mut links: Vec<SimulatedLink> = (0..trainers.len())
        .map(|k| {
            SimulatedLink::new(&LinkConfig {
                seed: derive_seed(config.link.seed, &format!("link-{k}")),
                ..config.link.clone()
            })
        })
        .collect();
    let wait = config.link.latency_ticks + 1;

    let mut node_runs: Vec<NodeRun> = trainers
        .iter()
        .map(|t| NodeRun {
            node_id: t.node_id.clone(),
            history: Vec::new(),
            train_micros: 0,
            fetches: 0,
            candidates_sent: 0,
            accepted: 0,
            rejected: 0,
            aborted_rounds: 0,
        })
        .collect();

    let mut passes_run = 0;
    let mut total_epochs = 0usize;
    let mut epochs_at_last_accept = 0usize;

    for _ in 0..config.pass_limit {
        passes_run += 1;
        let mut pass_accepts = 0u64;

        for k in 0..trainers.len() {
            let link = &mut links[k];
            let run = &mut node_runs[k];

            let fetch = Message::FetchModel {
                node_id: trainers[k].node_id.clone(),
            };
            link.send(Direction::AToB, fetch.to_frame()?)?;
            let Some(frame) = link.recv_within(Direction::AToB, wait) else {
                run.aborted_rounds += 1;
                continue;
            };
            let Ok(Message::FetchModel { .. }) = Message::from_frame(&frame) else {
                run.aborted_rounds += 1;
                continue;
            };
            run.fetches += 1;
            link.send(Direction::BToA, coordinator.handle_fetch().to_frame()?)?;
            let Some(frame) = link.recv_within(Direction::BToA, wait) else {
                run.aborted_rounds += 1;
                continue;
            };
            let Ok(Message::CurrentModel(signed)) = Message::from_frame(&frame) else {
                run.aborted_rounds += 1;
                continue;
            };

            let watchdog = &mut watchdogs[k];
            let mut callback_micros = 0u64;
            let started = clock.now_micros();
            let clock_ref = &mut *clock;
            let result = trainers[k].run_round(&signed, |event| {
                let cb_start = clock_ref.now_micros();
                if let Some(message) = watchdog.forward(&event) {
                    if message
                        .to_frame()
                        .and_then(|f| link.send(Direction::AToB, f).map(|_| ()))
                        .is_ok()
                    {
                        run.candidates_sent += 1;
                        if let Some(frame) = link.recv_within(Direction::AToB, wait) {
                            if let Ok(Message::CandidateModel { node_id, envelope }) =
                                Message::from_frame(&frame)
                            {
                                let decision = coordinator.evaluate_candidate(&node_id, &envelope);
                                if matches!(decision, Message::Decision { accepted: true, .. }) {
                                    pass_accepts += 1;
                                    epochs_at_last_accept = total_epochs + event.epoch_index + 1;
                                }
                                let _ = decision
                                    .to_frame()
                                    .map(|f| link.send(Direction::BToA, f));
                                if let Some(df) = link.recv_within(Direction::BToA, wait) {
                                    if let Ok(Message::Decision { accepted, .. }) =
                                        Message::from_frame(&df)
                                    {
                                        if accepted {
                                            run.accepted += 1;
                                        } else {
                                            run.rejected += 1;
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
                callback_micros += clock_ref.now_micros() - cb_start;
            });
            let elapsed = clock.now_micros().saturating_sub(started);

            match result {
                Ok(history) => {
                    total_epochs += history.len();
                    run.history.extend(history);
                    run.train_micros += elapsed.saturating_sub(callback_micros);
                }
                Err(_) => {
                    run.aborted_rounds += 1;
                }
            }
        }

        if pass_accepts == 0 {
            break;
        }
    }

    Ok(RoundRobinOutcome {
        node_runs,
        passes_run,
        total_epochs,
        epochs_at_last_accept,
    })
}
