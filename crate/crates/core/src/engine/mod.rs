//! Ratio consensus under bounded delays, switching topologies and late
//! link-termination acknowledgements.
//!
//! Each node keeps a pair `(y, z)`, starting from `(y0, 1)`, and pushes
//! weighted shares of both along its outgoing links every step. Both
//! iterations use the same weights and the same delays, so `y / z` at every
//! node tends to the average of `y0`.

mod delay;
mod plan;
mod state;
mod trace;

pub use delay::{DelaySchedule, DelaySource};
pub use plan::{SwitchPlan, TerminationEvent};
pub use state::{InFlightMessage, SentRecord, SimulationState, StepRecord, CONSERVATION_TOL};
pub use trace::{Trace, TraceStep};

use thiserror::Error;

use crate::weights::{out_degree_weights, WeightMatrix};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },
    #[error(
        "weight ({receiver}, {sender}) at step {step} does not match any live or pending link"
    )]
    WeightGraphMismatch {
        step: usize,
        receiver: usize,
        sender: usize,
    },
    #[error(
        "ack delay {ack_delay} on {sender} -> {receiver} exceeds the send history depth {depth}"
    )]
    HistoryUnderrun {
        sender: usize,
        receiver: usize,
        ack_delay: usize,
        depth: usize,
    },
    #[error("invalid termination event: {0}")]
    InvalidTermination(String),
    #[error("invalid delay schedule: {0}")]
    Delay(String),
    #[error("z at node {node} is not positive at step {step}")]
    NonPositiveZ { node: usize, step: usize },
    #[error("initial value at node {node} is not finite")]
    NonFinite { node: usize },
    #[error("buffered mass needs slot {slot} but only {capacity} exist")]
    SlotOverflow { slot: usize, capacity: usize },
    #[error("weights: {0}")]
    Weights(String),
}

/// How nodes pick their weights each step.
#[derive(Debug, Clone, PartialEq)]
pub enum WeightsMode {
    /// `1 / (1 + D_j^+)` from the out-degree each sender believes it has.
    OutDegree,
    /// One matrix for every step; only valid on a static topology.
    Fixed(WeightMatrix),
}

/// A running experiment: plan, delays and weight rule plus the evolving state.
#[derive(Debug, Clone)]
pub struct Simulation {
    plan: SwitchPlan,
    delays: DelaySchedule,
    weights: WeightsMode,
    state: SimulationState,
}

impl Simulation {
    pub fn new(
        plan: SwitchPlan,
        delays: DelaySchedule,
        weights: WeightsMode,
        y0: &[f64],
    ) -> Result<Self, EngineError> {
        if y0.len() != plan.n() {
            return Err(EngineError::Dimension {
                expected: plan.n(),
                found: y0.len(),
            });
        }
        if let WeightsMode::Fixed(w) = &weights {
            if !plan.topology().is_static() || !plan.termination_events().is_empty() {
                return Err(EngineError::Weights(
                    "a fixed weight matrix needs a static topology without terminations".into(),
                ));
            }
            let g = plan.topology().at(0);
            let report = crate::weights::validate_column_stochastic(w, &g);
            if !report.is_clean() {
                return Err(EngineError::Weights(report.summary()));
            }
        }
        let state = SimulationState::new(y0, plan.ack_delay_bound())?;
        Ok(Simulation {
            plan,
            delays,
            weights,
            state,
        })
    }

    pub fn state(&self) -> &SimulationState {
        &self.state
    }

    pub fn state_mut(&mut self) -> &mut SimulationState {
        &mut self.state
    }

    pub fn plan(&self) -> &SwitchPlan {
        &self.plan
    }

    pub fn delays(&self) -> &DelaySchedule {
        &self.delays
    }

    /// Weight matrix the nodes use at step `k`.
    pub fn weights_at(&self, k: usize) -> WeightMatrix {
        match &self.weights {
            WeightsMode::OutDegree => out_degree_weights(&self.plan.perceived_graph(k)),
            WeightsMode::Fixed(w) => w.clone(),
        }
    }

    pub fn step(&mut self) -> Result<StepRecord, EngineError> {
        let w = self.weights_at(self.state.k());
        self.state.step(&w, &self.delays, &self.plan)
    }

    /// Steps until `state.k() == horizon`, collecting a trace that starts
    /// with the current state.
    pub fn run_to(&mut self, horizon: usize) -> Result<Trace, EngineError> {
        let mut trace = Trace::new(self.state.n());
        trace.push(&self.state);
        while self.state.k() < horizon {
            self.step()?;
            trace.push(&self.state);
        }
        Ok(trace)
    }

    /// Like [`Simulation::run_to`] but also keeps every [`StepRecord`].
    pub fn run_recorded(
        &mut self,
        horizon: usize,
    ) -> Result<(Trace, Vec<StepRecord>), EngineError> {
        let mut trace = Trace::new(self.state.n());
        let mut records = Vec::with_capacity(horizon);
        trace.push(&self.state);
        while self.state.k() < horizon {
            records.push(self.step()?);
            trace.push(&self.state);
        }
        Ok((trace, records))
    }
}

/// `max - min`. Zero for an empty slice.
pub fn spread(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    hi - lo
}
