//! Single-iteration consensus on a doubly stochastic matrix where each node
//! uses the most recent value it has received from every neighbor.
//!
//! Without delays this reaches the average. With delays it still reaches
//! consensus, but the agreed value depends on the delay pattern.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::engine::{spread, DelaySchedule};
use crate::graph::Digraph;
use crate::weights::WeightMatrix;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BaselineError {
    #[error("baseline needs a symmetric topology")]
    Asymmetric,
    #[error("weights are not doubly stochastic (row {row} sums to {sum})")]
    NotDoublyStochastic { row: usize, sum: f64 },
    #[error("weights do not match the topology: {0}")]
    Weights(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },
    #[error("link {sender} -> {receiver} silent for {staleness} steps at step {step}, more than tau_bar {tau_bar}")]
    Stale {
        step: usize,
        receiver: usize,
        sender: usize,
        staleness: usize,
        tau_bar: usize,
    },
}

/// What a node uses for a neighbor it has not heard from yet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BootstrapMode {
    /// The neighbor's initial value, as if delivered at step 0.
    #[default]
    InitialValue,
    /// Leave the term out and rescale the remaining weights to sum to one.
    SkipAndRenormalize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Pending {
    arrival: usize,
    receiver: usize,
    sender: usize,
    send_step: usize,
    value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineState {
    k: usize,
    x: Vec<f64>,
    /// `(receiver, sender) -> (value, send step)` of the newest delivery.
    last_seen: BTreeMap<(usize, usize), (f64, usize)>,
    pending: Vec<Pending>,
}

impl BaselineState {
    pub fn new(x0: &[f64], graph: &Digraph, mode: BootstrapMode) -> Self {
        let last_seen = match mode {
            BootstrapMode::InitialValue => {
                graph.edges().map(|(r, s)| ((r, s), (x0[s], 0))).collect()
            }
            BootstrapMode::SkipAndRenormalize => BTreeMap::new(),
        };
        BaselineState {
            k: 0,
            x: x0.to_vec(),
            last_seen,
            pending: Vec::new(),
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn last_seen(&self, receiver: usize, sender: usize) -> Option<(f64, usize)> {
        self.last_seen.get(&(receiver, sender)).copied()
    }
}

/// One update `x_j[k+1] = p'_jj x_j[k] + Σ_i p'_ji x_i[k - d_ji[k]]`.
pub fn baseline_step(
    state: &mut BaselineState,
    weights: &WeightMatrix,
    graph: &Digraph,
    delays: &DelaySchedule,
) -> Result<(), BaselineError> {
    let n = state.x.len();
    let k = state.k;
    for (r, s) in graph.edges() {
        state.pending.push(Pending {
            arrival: k + delays.delay(k, r, s),
            receiver: r,
            sender: s,
            send_step: k,
            value: state.x[s],
        });
    }
    let mut i = 0;
    while i < state.pending.len() {
        if state.pending[i].arrival == k {
            let m = state.pending.swap_remove(i);
            let entry = state
                .last_seen
                .entry((m.receiver, m.sender))
                .or_insert((m.value, m.send_step));
            if m.send_step >= entry.1 {
                *entry = (m.value, m.send_step);
            }
        } else {
            i += 1;
        }
    }

    let tau_bar = delays.tau_bar();
    let mut next = vec![0.0; n];
    for (j, out) in next.iter_mut().enumerate() {
        let mut acc = weights.get(j, j) * state.x[j];
        let mut used = weights.get(j, j);
        for i in graph.in_neighbors(j) {
            let staleness = match state.last_seen.get(&(j, i)) {
                Some(&(v, sent)) => {
                    acc += weights.get(j, i) * v;
                    used += weights.get(j, i);
                    k - sent
                }
                None => k + 1,
            };
            if staleness > tau_bar {
                return Err(BaselineError::Stale {
                    step: k,
                    receiver: j,
                    sender: i,
                    staleness,
                    tau_bar,
                });
            }
        }
        *out = acc / used;
    }
    state.x = next;
    state.k += 1;
    Ok(())
}

/// Per-step node values of a baseline run.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineTrace {
    pub steps: Vec<Vec<f64>>,
}

pub const BASELINE_HEADER: &str = "k,node,x";

impl BaselineTrace {
    pub fn last(&self) -> &[f64] {
        self.steps
            .last()
            .expect("a trace always holds the initial state")
    }

    pub fn spreads(&self) -> Vec<f64> {
        self.steps.iter().map(|x| spread(x)).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(BASELINE_HEADER);
        out.push('\n');
        for (k, x) in self.steps.iter().enumerate() {
            for (j, v) in x.iter().enumerate() {
                let _ = writeln!(out, "{k},{j},{v:?}");
            }
        }
        out
    }

    pub fn spread_csv(&self) -> String {
        let mut out = String::from("k,spread\n");
        for (k, s) in self.spreads().iter().enumerate() {
            let _ = writeln!(out, "{k},{s:?}");
        }
        out
    }
}

/// A baseline run on a fixed symmetric topology.
#[derive(Debug, Clone)]
pub struct Baseline {
    graph: Digraph,
    weights: WeightMatrix,
    delays: DelaySchedule,
    state: BaselineState,
}

impl Baseline {
    pub fn new(
        graph: Digraph,
        weights: WeightMatrix,
        delays: DelaySchedule,
        x0: &[f64],
        mode: BootstrapMode,
    ) -> Result<Self, BaselineError> {
        let n = graph.n();
        if x0.len() != n || weights.n() != n {
            return Err(BaselineError::Dimension {
                expected: n,
                found: if x0.len() != n { x0.len() } else { weights.n() },
            });
        }
        if !graph.is_symmetric() {
            return Err(BaselineError::Asymmetric);
        }
        let report = crate::weights::validate_column_stochastic(&weights, &graph);
        if !report.is_clean() {
            return Err(BaselineError::Weights(report.summary()));
        }
        for row in 0..n {
            let sum = weights.row_sum(row);
            if (sum - 1.0).abs() > crate::weights::COLUMN_SUM_TOL {
                return Err(BaselineError::NotDoublyStochastic { row, sum });
            }
        }
        let state = BaselineState::new(x0, &graph, mode);
        Ok(Baseline {
            graph,
            weights,
            delays,
            state,
        })
    }

    pub fn state(&self) -> &BaselineState {
        &self.state
    }

    pub fn step(&mut self) -> Result<(), BaselineError> {
        baseline_step(&mut self.state, &self.weights, &self.graph, &self.delays)
    }

    pub fn run_to(&mut self, horizon: usize) -> Result<BaselineTrace, BaselineError> {
        let mut steps = vec![self.state.x.clone()];
        while self.state.k < horizon {
            self.step()?;
            steps.push(self.state.x.clone());
        }
        Ok(BaselineTrace { steps })
    }
}
