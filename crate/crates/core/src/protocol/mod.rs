//! Aggregator and party state machines over a simulated, lock-step transport.
//!
//! Setup: the aggregator asks every party for its sample count, assigns
//! each party its epsilon, and broadcasts the null model. Parties build their
//! surrogate histograms when they receive an epsilon. Every round then fuses
//! the latest gradient replies, grows one tree, and broadcasts the extended
//! model; the replies to that broadcast report the new training loss and
//! feed the next round.

mod aggregator;
mod message;
mod party;
mod transport;

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use aggregator::{compute_local_epsilon, AggregatorState};
pub use message::{Endpoint, GradientPayload, Message, Payload, SCHEMA_VERSION};
pub use party::PartyState;
pub use transport::InProcessTransport;

use crate::config::TrainingConfig;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::gbt::Ensemble;
use crate::histogram::GradHessBuckets;

/// One line of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundTelemetry {
    /// Number of trees in the model after this round.
    pub t: usize,
    pub eps_m: f64,
    /// Mean training loss of the model after this round.
    pub train_loss: f64,
    pub elapsed_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingOutcome {
    pub model: Ensemble,
    pub telemetry: Vec<RoundTelemetry>,
    /// Mean training loss of the null model.
    pub initial_loss: f64,
    pub sizes: Vec<u64>,
    pub epsilons: Vec<f64>,
    pub stopped_early: bool,
    pub messages: u64,
    pub bytes: u64,
}

/// An aggregator, its parties and the transport between them.
#[derive(Debug)]
pub struct Federation {
    aggregator: AggregatorState,
    parties: Vec<PartyState>,
    transport: InProcessTransport,
    pending: Option<Vec<GradHessBuckets>>,
    loss: f64,
}

impl Federation {
    pub fn new(config: TrainingConfig, datasets: Vec<Dataset>) -> Result<Self> {
        config.validate()?;
        let Some(first) = datasets.first() else {
            return Err(Error::Config("the roster is empty".into()));
        };
        let n_features = first.n_features();
        if datasets.iter().any(|d| d.n_features() != n_features) {
            return Err(Error::Config("parties disagree on the feature schema".into()));
        }
        for (i, d) in datasets.iter().enumerate() {
            for &y in d.labels() {
                config.loss.validate_label(y).map_err(|_| {
                    Error::Config(format!(
                        "party {i} has label {y}, invalid for {} loss",
                        config.loss.name()
                    ))
                })?;
            }
        }
        let quantize = config.quantize_predict;
        let aggregator = AggregatorState::new(config, datasets.len(), n_features);
        let parties = datasets
            .into_iter()
            .enumerate()
            .map(|(i, d)| PartyState::new(i, d, quantize))
            .collect();
        Ok(Federation {
            aggregator,
            parties,
            transport: InProcessTransport::new(),
            pending: None,
            loss: f64::NAN,
        })
    }

    pub fn aggregator(&self) -> &AggregatorState {
        &self.aggregator
    }

    pub fn parties(&self) -> &[PartyState] {
        &self.parties
    }

    pub fn model(&self) -> &Ensemble {
        &self.aggregator.model
    }

    /// Mean training loss of the current model, known once it was broadcast.
    pub fn train_loss(&self) -> f64 {
        self.loss
    }

    pub fn transport(&self) -> &InProcessTransport {
        &self.transport
    }

    /// Sends `payload_for(party)` to every party, lets the parties respond
    /// (possibly in parallel), and collects their replies in roster order.
    fn exchange(&mut self, payload_for: impl Fn(usize) -> Payload) -> Result<Vec<Message>> {
        for &p in &self.aggregator.roster {
            let msg = self.aggregator.message(p, payload_for(p));
            self.transport.send(&msg)?;
        }
        let inbox = self
            .parties
            .iter()
            .map(|p| self.transport.recv(Endpoint::Aggregator, Endpoint::Party(p.id())))
            .collect::<Result<Vec<_>>>()?;
        let replies: Vec<Result<Option<Message>>> = self
            .parties
            .par_iter_mut()
            .zip(inbox.into_par_iter())
            .map(|(party, msg)| party.handle(msg))
            .collect();
        let mut expected = Vec::new();
        for (party, reply) in self.parties.iter().zip(replies) {
            if let Some(msg) = reply? {
                self.transport.send(&msg)?;
                expected.push(party.id());
            }
        }
        if !expected.is_empty() && expected.len() != self.parties.len() {
            return Err(Error::Protocol("only part of the roster replied".into()));
        }
        expected
            .into_iter()
            .map(|p| self.transport.recv(Endpoint::Party(p), Endpoint::Aggregator))
            .collect()
    }

    fn broadcast(&mut self) -> Result<()> {
        let model = self.aggregator.model.clone();
        let replies = self.exchange(|_| Payload::ModelBroadcast { model: model.clone() })?;
        let buckets = self.aggregator.accept_gradients(replies)?;
        let total_loss: f64 = buckets.iter().map(|b| b.loss_sum).sum();
        let n: u64 = self.aggregator.sizes.iter().sum();
        self.loss = total_loss / n as f64;
        self.pending = Some(buckets);
        Ok(())
    }

    /// Size query, epsilon assignment, and the broadcast of the null model.
    pub fn setup(&mut self) -> Result<()> {
        if self.pending.is_some() {
            return Err(Error::Protocol("federation is already set up".into()));
        }
        let replies = self.exchange(|_| Payload::DataCountQuery)?;
        self.aggregator.record_sizes(replies)?;
        let eps = self.aggregator.epsilons.clone();
        self.exchange(|p| Payload::EpsilonAssign { epsilon: eps[p] })?;
        self.broadcast()
    }

    /// Fuses the outstanding replies, grows and appends one tree, and
    /// broadcasts the new model. Returns the telemetry line for the round.
    pub fn run_round(&mut self) -> Result<RoundTelemetry> {
        let start = Instant::now();
        if self.aggregator.round >= self.aggregator.config.max_rounds {
            return Err(Error::Protocol("the round budget is exhausted".into()));
        }
        let buckets = self
            .pending
            .take()
            .ok_or_else(|| Error::Protocol("run_round called before setup".into()))?;
        self.aggregator.grow(&buckets)?;
        self.broadcast()?;
        Ok(RoundTelemetry {
            t: self.aggregator.round,
            eps_m: self.aggregator.epsilon_m().expect("set by the first round"),
            train_loss: self.loss,
            elapsed_ms: start.elapsed().as_secs_f64() * 1e3,
        })
    }

    /// Sends the final model to every party.
    pub fn terminate(&mut self) -> Result<Ensemble> {
        let model = self.aggregator.model.clone();
        self.exchange(|_| Payload::Terminate { model: model.clone() })?;
        Ok(model)
    }
}

/// Trains a global model over one dataset per party.
pub fn run_training(config: &TrainingConfig, datasets: Vec<Dataset>) -> Result<TrainingOutcome> {
    let mut fed = Federation::new(config.clone(), datasets)?;
    fed.setup()?;
    let initial_loss = fed.train_loss();
    let mut telemetry = Vec::with_capacity(config.max_rounds);
    let mut stopped_early = false;
    let mut stale = 0;
    let mut previous = initial_loss;
    for _ in 0..config.max_rounds {
        let line = fed.run_round()?;
        let loss = line.train_loss;
        telemetry.push(line);
        if let Some(es) = config.early_stopping {
            stale = if previous - loss < es.tolerance { stale + 1 } else { 0 };
            previous = loss;
            if stale >= es.patience {
                stopped_early = true;
                break;
            }
        }
    }
    let model = fed.terminate()?;
    let (messages, bytes) = fed.transport().traffic();
    Ok(TrainingOutcome {
        model,
        telemetry,
        initial_loss,
        sizes: fed.aggregator().sizes().to_vec(),
        epsilons: fed.aggregator().epsilons().to_vec(),
        stopped_early,
        messages,
        bytes,
    })
}
