use super::message::{Endpoint, GradientPayload, Message, Payload};
use crate::config::TrainingConfig;
use crate::error::{Error, Result};
use crate::gbt::{grow_tree, Ensemble};
use crate::histogram::{select_merge_epsilon, GradHessBuckets, MergeLayout, SurrogateHistogram};

/// Splits the global error budget across parties in proportion to their
/// sample counts: `eps_i = eps_global * s_i / sum(s)`.
pub fn compute_local_epsilon(epsilon_global: f64, sizes: &[u64]) -> Result<Vec<f64>> {
    if !(epsilon_global > 0.0 && epsilon_global <= 1.0) {
        return Err(Error::Config(format!(
            "global epsilon must lie in (0, 1], got {epsilon_global}"
        )));
    }
    if sizes.is_empty() {
        return Err(Error::Config("no parties to assign epsilon to".into()));
    }
    if let Some(i) = sizes.iter().position(|&s| s == 0) {
        return Err(Error::Config(format!("party {i} holds no samples")));
    }
    let total: u64 = sizes.iter().sum();
    Ok(sizes
        .iter()
        .map(|&s| epsilon_global * (s as f64 / total as f64))
        .collect())
}

/// The aggregator's view of the federation: the global model, the roster and
/// its sizes and epsilons, and the histograms collected in round one.
#[derive(Debug)]
pub struct AggregatorState {
    pub(crate) model: Ensemble,
    pub(crate) config: TrainingConfig,
    pub(crate) roster: Vec<usize>,
    pub(crate) sizes: Vec<u64>,
    pub(crate) epsilons: Vec<f64>,
    pub(crate) round: usize,
    histograms: Vec<Option<SurrogateHistogram>>,
    layout: Option<MergeLayout>,
    epsilon_m: Option<f64>,
}

impl AggregatorState {
    pub fn new(config: TrainingConfig, n_parties: usize, n_features: usize) -> Self {
        AggregatorState {
            model: Ensemble::null(config.loss, config.learning_rate, n_features),
            config,
            roster: (0..n_parties).collect(),
            sizes: Vec::new(),
            epsilons: Vec::new(),
            round: 0,
            histograms: vec![None; n_parties],
            layout: None,
            epsilon_m: None,
        }
    }

    pub fn model(&self) -> &Ensemble {
        &self.model
    }

    pub fn round(&self) -> usize {
        self.round
    }

    pub fn epsilons(&self) -> &[f64] {
        &self.epsilons
    }

    pub fn sizes(&self) -> &[u64] {
        &self.sizes
    }

    pub fn epsilon_m(&self) -> Option<f64> {
        self.epsilon_m
    }

    pub fn merged_histogram(&self) -> Option<&SurrogateHistogram> {
        self.layout.as_ref().map(|l| &l.merged)
    }

    pub(crate) fn message(&self, party: usize, payload: Payload) -> Message {
        Message::new(self.round, Endpoint::Aggregator, Endpoint::Party(party), payload)
    }

    pub(crate) fn record_sizes(&mut self, replies: Vec<Message>) -> Result<()> {
        let mut sizes = Vec::with_capacity(replies.len());
        for (&p, msg) in self.roster.iter().zip(replies) {
            check_origin(&msg, p, self.round)?;
            match msg.payload {
                Payload::DataCountReply { count } => sizes.push(count),
                other => return Err(unexpected(p, other.kind())),
            }
        }
        self.epsilons = compute_local_epsilon(self.config.epsilon_global, &sizes)?;
        self.sizes = sizes;
        Ok(())
    }

    /// Validates one gradient reply per roster party for the current round and
    /// keeps any histograms they carry.
    pub(crate) fn accept_gradients(&mut self, replies: Vec<Message>) -> Result<Vec<GradHessBuckets>> {
        if replies.len() != self.roster.len() {
            return Err(Error::Protocol(format!(
                "round {} has {} replies for {} parties",
                self.round,
                replies.len(),
                self.roster.len()
            )));
        }
        let mut out = Vec::with_capacity(replies.len());
        for (slot, (&p, msg)) in self.roster.iter().zip(replies).enumerate() {
            check_origin(&msg, p, self.round)?;
            let payload: GradientPayload = match msg.payload {
                Payload::GradientReply(g) => *g,
                other => return Err(unexpected(p, other.kind())),
            };
            if payload.party != p || payload.epsilon != self.epsilons[slot] {
                return Err(Error::Protocol(format!(
                    "party {p} reply disagrees with its assignment"
                )));
            }
            if let Some(h) = payload.histogram {
                if self.histograms[slot].is_some() {
                    return Err(Error::Protocol(format!("party {p} resent its histogram")));
                }
                self.histograms[slot] = Some(h);
            }
            out.push(payload.buckets);
        }
        Ok(out)
    }

    /// Fuses the round's buckets, grows one tree and appends it to the model.
    pub(crate) fn grow(&mut self, buckets: &[GradHessBuckets]) -> Result<()> {
        if self.layout.is_none() {
            let eps_m = select_merge_epsilon(&self.epsilons, self.config.loss)?;
            let hists = self
                .histograms
                .iter()
                .enumerate()
                .map(|(i, h)| {
                    h.as_ref()
                        .ok_or_else(|| Error::Protocol(format!("no histogram from party {i}")))
                })
                .collect::<Result<Vec<_>>>()?;
            self.layout = Some(MergeLayout::build(&hists, eps_m)?);
            self.epsilon_m = Some(eps_m);
        }
        let layout = self.layout.as_ref().expect("built above");
        let refs: Vec<&GradHessBuckets> = buckets.iter().collect();
        let fused = layout.fuse(&refs)?;
        let tree = grow_tree(&layout.merged.thresholds(), &fused.cells, &self.config)?;
        self.model.push(tree)?;
        self.round += 1;
        Ok(())
    }
}

fn check_origin(msg: &Message, party: usize, round: usize) -> Result<()> {
    if msg.sender != Endpoint::Party(party) || msg.receiver != Endpoint::Aggregator {
        return Err(Error::Protocol(format!(
            "reply slot of party {party} holds a foreign message"
        )));
    }
    if msg.round != round {
        return Err(Error::Protocol(format!(
            "party {party} replied for round {} during round {round}",
            msg.round
        )));
    }
    Ok(())
}

fn unexpected(party: usize, kind: &str) -> Error {
    Error::Protocol(format!("party {party} sent an unexpected {kind} message"))
}
