use std::collections::{BTreeMap, VecDeque};

use super::message::{Endpoint, Message};
use crate::error::{Error, Result};

/// Lock-step in-process transport. Messages are serialized on send and parsed
/// on receive, with one FIFO queue per (sender, receiver) pair.
#[derive(Debug, Default)]
pub struct InProcessTransport {
    queues: BTreeMap<(Endpoint, Endpoint), VecDeque<String>>,
    messages: u64,
    bytes: u64,
}

impl InProcessTransport {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn send(&mut self, msg: &Message) -> Result<()> {
        let wire = msg.to_json()?;
        self.messages += 1;
        self.bytes += wire.len() as u64;
        self.queues
            .entry((msg.sender, msg.receiver))
            .or_default()
            .push_back(wire);
        Ok(())
    }

    pub fn recv(&mut self, from: Endpoint, to: Endpoint) -> Result<Message> {
        let wire = self
            .queues
            .get_mut(&(from, to))
            .and_then(VecDeque::pop_front)
            .ok_or_else(|| Error::Protocol(format!("no message from {from:?} to {to:?}")))?;
        let msg = Message::from_json(&wire)?;
        if msg.sender != from || msg.receiver != to {
            return Err(Error::Protocol("message routed to the wrong queue".into()));
        }
        Ok(msg)
    }

    pub fn pending(&self) -> usize {
        self.queues.values().map(VecDeque::len).sum()
    }

    /// Messages and serialized bytes sent so far.
    pub fn traffic(&self) -> (u64, u64) {
        (self.messages, self.bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::message::Payload;

    #[test]
    fn fifo_per_pair() {
        let mut t = InProcessTransport::new();
        for count in [1, 2] {
            let m = Message::new(
                0,
                Endpoint::Party(0),
                Endpoint::Aggregator,
                Payload::DataCountReply { count },
            );
            t.send(&m).unwrap();
        }
        let m = Message::new(
            0,
            Endpoint::Party(1),
            Endpoint::Aggregator,
            Payload::DataCountReply { count: 9 },
        );
        t.send(&m).unwrap();
        let first = t.recv(Endpoint::Party(0), Endpoint::Aggregator).unwrap();
        assert_eq!(first.payload, Payload::DataCountReply { count: 1 });
        assert_eq!(t.pending(), 2);
        assert!(t.recv(Endpoint::Aggregator, Endpoint::Party(0)).is_err());
        assert_eq!(t.traffic().0, 3);
    }
}
