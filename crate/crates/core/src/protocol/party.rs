use super::message::{Endpoint, GradientPayload, Message, Payload};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::gbt::{Ensemble, LossKind, Tree};
use crate::histogram::{accumulate, compute_histogram, GradHessBuckets, Provenance, QuantizedRows, SurrogateHistogram};

/// Running tree sums for the model a party last evaluated, so a broadcast
/// that only appends trees costs one tree evaluation per row.
#[derive(Debug, Clone)]
struct PredictionCache {
    loss: LossKind,
    base_score: f64,
    learning_rate: f64,
    trees: Vec<Tree>,
    /// Per cell when predicting on representatives, per row otherwise.
    sums: Vec<f64>,
}

impl PredictionCache {
    fn extends(&self, model: &Ensemble) -> bool {
        self.loss == model.loss
            && self.base_score == model.base_score
            && self.learning_rate == model.learning_rate
            && model.trees.len() >= self.trees.len()
            && model.trees[..self.trees.len()] == self.trees[..]
    }
}

/// A data holder. Its dataset never leaves this struct; everything it reveals
/// goes out through [`PartyState::handle`] replies.
#[derive(Debug)]
pub struct PartyState {
    id: usize,
    data: Dataset,
    quantize: bool,
    epsilon: Option<f64>,
    histogram: Option<SurrogateHistogram>,
    rows: Option<QuantizedRows>,
    histogram_sent: bool,
    cache: Option<PredictionCache>,
    final_model: Option<Ensemble>,
}

impl PartyState {
    pub fn new(id: usize, data: Dataset, quantize: bool) -> Self {
        PartyState {
            id,
            data,
            quantize,
            epsilon: None,
            histogram: None,
            rows: None,
            histogram_sent: false,
            cache: None,
            final_model: None,
        }
    }

    pub fn id(&self) -> usize {
        self.id
    }

    pub fn n_features(&self) -> usize {
        self.data.n_features()
    }

    pub fn epsilon(&self) -> Option<f64> {
        self.epsilon
    }

    pub fn histogram(&self) -> Option<&SurrogateHistogram> {
        self.histogram.as_ref()
    }

    /// The model received with the terminate message.
    pub fn final_model(&self) -> Option<&Ensemble> {
        self.final_model.as_ref()
    }

    fn endpoint(&self) -> Endpoint {
        Endpoint::Party(self.id)
    }

    fn reply(&self, round: usize, payload: Payload) -> Option<Message> {
        Some(Message::new(round, self.endpoint(), Endpoint::Aggregator, payload))
    }

    pub fn handle(&mut self, msg: Message) -> Result<Option<Message>> {
        if msg.receiver != self.endpoint() || msg.sender != Endpoint::Aggregator {
            return Err(Error::Protocol(format!(
                "party {} received a misaddressed message",
                self.id
            )));
        }
        match msg.payload {
            Payload::DataCountQuery => Ok(self.reply(
                msg.round,
                Payload::DataCountReply {
                    count: self.data.n_rows() as u64,
                },
            )),
            Payload::EpsilonAssign { epsilon } => {
                if self.epsilon.is_some() {
                    return Err(Error::Protocol(format!("party {} was assigned epsilon twice", self.id)));
                }
                let hist = compute_histogram(&self.data, epsilon)?;
                self.rows = Some(hist.quantize(&self.data)?);
                self.histogram = Some(hist);
                self.epsilon = Some(epsilon);
                Ok(None)
            }
            Payload::ModelBroadcast { model } => {
                let buckets = self.evaluate(&model)?;
                let histogram = if self.histogram_sent {
                    None
                } else {
                    self.histogram_sent = true;
                    self.histogram.clone()
                };
                let payload = GradientPayload {
                    party: self.id,
                    epsilon: self.epsilon.expect("set before evaluate succeeds"),
                    histogram,
                    buckets,
                };
                Ok(self.reply(msg.round, Payload::GradientReply(Box::new(payload))))
            }
            Payload::Terminate { model } => {
                self.final_model = Some(model);
                Ok(None)
            }
            other => Err(Error::Protocol(format!(
                "party {} cannot handle a {} message",
                self.id,
                other.kind()
            ))),
        }
    }

    fn evaluate(&mut self, model: &Ensemble) -> Result<GradHessBuckets> {
        let (Some(hist), Some(rows)) = (&self.histogram, &self.rows) else {
            return Err(Error::Protocol(format!("party {} has no epsilon yet", self.id)));
        };
        if model.n_features != self.data.n_features() {
            return Err(Error::Dimension {
                expected: self.data.n_features(),
                actual: model.n_features,
            });
        }
        let mut cache = match self.cache.take() {
            Some(c) if c.extends(model) => c,
            _ => {
                let n = if self.quantize {
                    rows.n_cells()
                } else {
                    self.data.n_rows()
                };
                PredictionCache {
                    loss: model.loss,
                    base_score: model.base_score,
                    learning_rate: model.learning_rate,
                    trees: Vec::new(),
                    sums: vec![0.0; n],
                }
            }
        };
        for tree in &model.trees[cache.trees.len()..] {
            if self.quantize {
                for (s, reps) in cache.sums.iter_mut().zip(&rows.representatives) {
                    *s += tree.predict(reps);
                }
            } else {
                for (s, row) in cache.sums.iter_mut().zip(self.data.rows()) {
                    *s += tree.predict(row);
                }
            }
            cache.trees.push(tree.clone());
        }
        let (base, lr, quantize) = (model.base_score, model.learning_rate, self.quantize);
        let sums = &cache.sums;
        let buckets = accumulate(
            hist,
            rows,
            &self.data,
            model.loss,
            Provenance::Party(self.id),
            |cell, row| base + lr * if quantize { sums[cell] } else { sums[row] },
        )?;
        self.cache = Some(cache);
        Ok(buckets)
    }
}
