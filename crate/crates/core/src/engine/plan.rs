use std::collections::BTreeSet;

use super::EngineError;
use crate::graph::{Digraph, DigraphSequence};

/// Receiver `receiver` drops its link from `sender` at `step`; the sender
/// learns about it `ack_delay` steps later.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct TerminationEvent {
    pub step: usize,
    pub sender: usize,
    pub receiver: usize,
    pub ack_delay: usize,
}

impl TerminationEvent {
    pub fn discovery_step(&self) -> usize {
        self.step + self.ack_delay
    }

    /// The sender still believes the link exists at step `k`.
    pub fn undiscovered_at(&self, k: usize) -> bool {
        self.step <= k && k < self.discovery_step()
    }
}

/// Topology over time plus link terminations whose acknowledgement reaches
/// the sender late.
#[derive(Debug, Clone, PartialEq)]
pub struct SwitchPlan {
    topology: DigraphSequence,
    ack_delay_bound: usize,
    termination_events: Vec<TerminationEvent>,
}

impl SwitchPlan {
    pub fn fixed(g: Digraph) -> Self {
        SwitchPlan {
            topology: DigraphSequence::Static(g),
            ack_delay_bound: 0,
            termination_events: Vec::new(),
        }
    }

    pub fn switching(topology: DigraphSequence) -> Self {
        SwitchPlan {
            topology,
            ack_delay_bound: 0,
            termination_events: Vec::new(),
        }
    }

    pub fn new(
        topology: DigraphSequence,
        ack_delay_bound: usize,
        mut termination_events: Vec<TerminationEvent>,
    ) -> Result<Self, EngineError> {
        termination_events.sort();
        let n = topology.n();
        let mut seen = BTreeSet::new();
        for ev in &termination_events {
            if ev.sender >= n || ev.receiver >= n {
                return Err(EngineError::InvalidTermination(format!(
                    "event {ev:?} names a node outside 0..{n}"
                )));
            }
            if ev.ack_delay > ack_delay_bound {
                return Err(EngineError::HistoryUnderrun {
                    sender: ev.sender,
                    receiver: ev.receiver,
                    ack_delay: ev.ack_delay,
                    depth: ack_delay_bound,
                });
            }
            if !topology.at(ev.step).has_edge(ev.receiver, ev.sender) {
                return Err(EngineError::InvalidTermination(format!(
                    "link {} -> {} is not active at step {}",
                    ev.sender, ev.receiver, ev.step
                )));
            }
            if !seen.insert((ev.receiver, ev.sender)) {
                return Err(EngineError::InvalidTermination(format!(
                    "link {} -> {} is terminated more than once",
                    ev.sender, ev.receiver
                )));
            }
        }
        Ok(SwitchPlan {
            topology,
            ack_delay_bound,
            termination_events,
        })
    }

    pub fn n(&self) -> usize {
        self.topology.n()
    }

    pub fn topology(&self) -> &DigraphSequence {
        &self.topology
    }

    pub fn ack_delay_bound(&self) -> usize {
        self.ack_delay_bound
    }

    pub fn termination_events(&self) -> &[TerminationEvent] {
        &self.termination_events
    }

    /// Links that actually carry messages at step `k`.
    pub fn actual_graph(&self, k: usize) -> Digraph {
        let mut g = self.topology.at(k).into_owned();
        for ev in self.termination_events.iter().filter(|ev| ev.step <= k) {
            g = g.without_edge(ev.receiver, ev.sender);
        }
        g
    }

    /// Links the senders believe in at step `k`: the actual graph plus every
    /// terminated link whose acknowledgement has not arrived yet.
    pub fn perceived_graph(&self, k: usize) -> Digraph {
        let mut g = self.actual_graph(k);
        for ev in self
            .termination_events
            .iter()
            .filter(|ev| ev.undiscovered_at(k))
        {
            g = g
                .with_edge(ev.receiver, ev.sender)
                .expect("event endpoints validated");
        }
        g
    }

    /// Termination of `(receiver, sender)` that is still undiscovered at `k`.
    pub fn undiscovered(
        &self,
        k: usize,
        receiver: usize,
        sender: usize,
    ) -> Option<&TerminationEvent> {
        self.termination_events
            .iter()
            .find(|ev| ev.receiver == receiver && ev.sender == sender && ev.undiscovered_at(k))
    }

    pub fn discovered_at(&self, k: usize) -> impl Iterator<Item = &TerminationEvent> {
        self.termination_events
            .iter()
            .filter(move |ev| ev.ack_delay > 0 && ev.discovery_step() == k)
    }

    /// Links with a termination event, as `(receiver, sender)`, in event order.
    pub fn terminated_links(&self) -> Vec<(usize, usize)> {
        self.termination_events
            .iter()
            .map(|ev| (ev.receiver, ev.sender))
            .collect()
    }
}
