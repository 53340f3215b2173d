//! Wire messages between the aggregator and parties.
//!
//! Every message is a JSON object
//! `{"type", "round", "sender", "receiver", "payload", "schema_version"}`.
//! `type` names the payload variant in snake case; payload-free variants omit
//! `payload`. A gradient reply payload carries the party's bucket sums, its
//! epsilon, and (in its first reply only) its surrogate histogram including
//! the serialized sketches as `[value, g, delta]` triples.

use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;

use crate::error::{Error, Result};
use crate::gbt::Ensemble;
use crate::histogram::{GradHessBuckets, SurrogateHistogram};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Endpoint {
    Aggregator,
    Party(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientPayload {
    pub party: usize,
    pub epsilon: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub histogram: Option<SurrogateHistogram>,
    pub buckets: GradHessBuckets,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "payload", rename_all = "snake_case")]
pub enum Payload {
    DataCountQuery,
    DataCountReply { count: u64 },
    EpsilonAssign { epsilon: f64 },
    ModelBroadcast { model: Ensemble },
    GradientReply(Box<GradientPayload>),
    Terminate { model: Ensemble },
}

impl Payload {
    pub fn kind(&self) -> &'static str {
        match self {
            Payload::DataCountQuery => "data_count_query",
            Payload::DataCountReply { .. } => "data_count_reply",
            Payload::EpsilonAssign { .. } => "epsilon_assign",
            Payload::ModelBroadcast { .. } => "model_broadcast",
            Payload::GradientReply(_) => "gradient_reply",
            Payload::Terminate { .. } => "terminate",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Message {
    pub round: usize,
    pub sender: Endpoint,
    pub receiver: Endpoint,
    #[serde(flatten)]
    pub payload: Payload,
    pub schema_version: u32,
}

/// Wire form used for parsing: the payload stays raw until its type is known.
#[derive(Deserialize)]
struct Envelope<'a> {
    #[serde(rename = "type")]
    kind: String,
    round: usize,
    sender: Endpoint,
    receiver: Endpoint,
    #[serde(borrow, default)]
    payload: Option<&'a RawValue>,
    schema_version: u32,
}

impl Message {
    pub fn new(round: usize, sender: Endpoint, receiver: Endpoint, payload: Payload) -> Self {
        Message {
            round,
            sender,
            receiver,
            payload,
            schema_version: SCHEMA_VERSION,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let env: Envelope<'_> = serde_json::from_str(s)?;
        // Put the tag first so the payload is parsed in place rather than
        // buffered, which the flattened form would force.
        let tagged = match env.payload {
            Some(body) => format!(
                "{{\"type\":{},\"payload\":{}}}",
                serde_json::to_string(&env.kind)?,
                body.get()
            ),
            None => format!("{{\"type\":{}}}", serde_json::to_string(&env.kind)?),
        };
        let payload: Payload = serde_json::from_str(&tagged)?;
        let msg = Message {
            round: env.round,
            sender: env.sender,
            receiver: env.receiver,
            payload,
            schema_version: env.schema_version,
        };
        if msg.schema_version != SCHEMA_VERSION {
            return Err(Error::Protocol(format!(
                "schema version {} is not supported (expected {SCHEMA_VERSION})",
                msg.schema_version
            )));
        }
        Ok(msg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gbt::LossKind;

    #[test]
    fn envelope_layout() {
        let msg = Message::new(
            3,
            Endpoint::Aggregator,
            Endpoint::Party(1),
            Payload::EpsilonAssign { epsilon: 0.25 },
        );
        let v: serde_json::Value = serde_json::from_str(&msg.to_json().unwrap()).unwrap();
        assert_eq!(v["type"], "epsilon_assign");
        assert_eq!(v["round"], 3);
        assert_eq!(v["sender"], "aggregator");
        assert_eq!(v["receiver"]["party"], 1);
        assert_eq!(v["payload"]["epsilon"], 0.25);
        assert_eq!(v["schema_version"], SCHEMA_VERSION);
    }

    #[test]
    fn round_trip_every_kind() {
        let model = Ensemble::null(LossKind::BinaryLogistic, 0.3, 2);
        for payload in [
            Payload::DataCountQuery,
            Payload::DataCountReply { count: 1160 },
            Payload::EpsilonAssign { epsilon: 0.0232 },
            Payload::ModelBroadcast { model: model.clone() },
            Payload::Terminate { model },
        ] {
            let msg = Message::new(0, Endpoint::Party(0), Endpoint::Aggregator, payload);
            assert_eq!(Message::from_json(&msg.to_json().unwrap()).unwrap(), msg);
        }
    }

    #[test]
    fn unknown_schema_is_rejected() {
        let mut msg = Message::new(0, Endpoint::Aggregator, Endpoint::Party(0), Payload::DataCountQuery);
        msg.schema_version = 99;
        assert!(matches!(
            Message::from_json(&msg.to_json().unwrap()),
            Err(Error::Protocol(_))
        ));
    }
}
