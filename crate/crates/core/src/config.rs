//! TOML experiment files.
//!
//! ```toml
//! name = "five_node_delayed"
//! seed = 42
//! horizon = 2000
//! epsilon = 1e-6
//! y0 = [-1, 2, 3, 4, 2]
//!
//! [graph]
//! kind = "explicit"
//! n = 5
//! edges = [[1, 0], [2, 0], [2, 1], [4, 1], [4, 2], [0, 3], [2, 4], [3, 4]]
//!
//! [delays]
//! source = "uniform"
//! tau_bar = 5
//! ```
//!
//! Edges are `[receiver, sender]` pairs. Every random choice is derived from
//! `seed`, so a file and a seed fully determine a run.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Deserialize;
use thiserror::Error;

use crate::analysis::{analyze_run, AnalysisError, AnalysisReport};
use crate::augmented::{oracle_check, AugmentedError, OracleReport};
use crate::baseline::{Baseline, BaselineError, BaselineTrace, BootstrapMode};
use crate::engine::{
    DelaySchedule, DelaySource, EngineError, Simulation, SwitchPlan, TerminationEvent, Trace,
    WeightsMode,
};
use crate::graph::{self, Digraph, DigraphSequence};
use crate::matrix::{parse_number, Matrix};
use crate::weights::{doubly_stochastic_weights, WeightMatrix};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("cannot parse config: {0}")]
    Parse(String),
    #[error("`{field}`: {message}")]
    Field { field: String, message: String },
}

fn field(field: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Field {
        field: field.to_string(),
        message: message.into(),
    }
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Baseline(#[from] BaselineError),
    #[error(transparent)]
    Augmented(#[from] AugmentedError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error("not checkable: {0}")]
    NotCheckable(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Protocol {
    #[default]
    Ratio,
    Baseline,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub seed: u64,
    pub horizon: usize,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    pub y0: Vec<f64>,
    #[serde(default)]
    pub protocol: Protocol,
    #[serde(default)]
    pub bootstrap: Option<String>,
    pub graph: GraphConfig,
    #[serde(default)]
    pub weights: WeightsConfig,
    #[serde(default)]
    pub delays: DelaysConfig,
    #[serde(default)]
    pub ack: Option<AckConfig>,
    #[serde(default)]
    pub analysis: AnalysisConfig,
}

fn default_epsilon() -> f64 {
    1e-6
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphConfig {
    pub kind: String,
    pub n: usize,
    #[serde(default)]
    pub edges: Vec<[usize; 2]>,
    /// Member graphs of a periodic schedule, each a list of edges.
    #[serde(default)]
    pub graphs: Vec<Vec<[usize; 2]>>,
    pub p: Option<f64>,
    pub radius: Option<f64>,
    pub max_attempts: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightsConfig {
    #[serde(default)]
    pub mode: Option<String>,
    /// Rows of numbers or fractions, e.g. `"1/3 0 1/2"`.
    #[serde(default)]
    pub matrix: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DelaysConfig {
    #[serde(default)]
    pub source: Option<String>,
    #[serde(default)]
    pub tau_bar: usize,
    /// `[receiver, sender, bound]`.
    #[serde(default)]
    pub bounds: Vec<[usize; 3]>,
    /// `[receiver, sender, delay]` for `per-link`.
    #[serde(default)]
    pub links: Vec<[usize; 3]>,
    /// `[k, receiver, sender, delay]` for `table`.
    #[serde(default)]
    pub table: Vec<[usize; 4]>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AckConfig {
    pub bound: usize,
    #[serde(default)]
    pub events: Vec<EventConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventConfig {
    pub step: usize,
    pub sender: usize,
    pub receiver: usize,
    pub ack_delay: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    pub window: Option<usize>,
}

/// A validated experiment ready to run.
#[derive(Debug, Clone)]
pub enum Experiment {
    Ratio(Simulation),
    Baseline(Baseline),
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        cfg.build()?;
        Ok(cfg)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    fn edges(list: &[[usize; 2]], n: usize, name: &str) -> Result<Digraph, ConfigError> {
        Digraph::new(n, list.iter().map(|e| (e[0], e[1]))).map_err(|e| field(name, e.to_string()))
    }

    fn topology(&self) -> Result<DigraphSequence, ConfigError> {
        let g = &self.graph;
        if g.n == 0 {
            return Err(field("graph.n", "must be at least 1"));
        }
        let need = |v: Option<f64>, name: &str| {
            v.ok_or_else(|| field(name, format!("required for kind `{}`", g.kind)))
        };
        let seq = match g.kind.as_str() {
            "explicit" => DigraphSequence::Static(Self::edges(&g.edges, g.n, "graph.edges")?),
            "random" => DigraphSequence::Static(
                graph::random_digraph(g.n, need(g.p, "graph.p")?, self.seed).map_err(|e| field("graph.p", e.to_string()))?,
            ),
            "geometric" => DigraphSequence::Static(
                graph::random_geometric_strongly_connected(
                    g.n,
                    need(g.radius, "graph.radius")?,
                    self.seed,
                    g.max_attempts.unwrap_or(1000),
                )
                .map_err(|e| field("graph.radius", e.to_string()))?,
            ),
            "periodic" => {
                let members = g
                    .graphs
                    .iter()
                    .enumerate()
                    .map(|(i, list)| Self::edges(list, g.n, &format!("graph.graphs[{i}]")))
                    .collect::<Result<Vec<_>, _>>()?;
                DigraphSequence::periodic(members).map_err(|e| field("graph.graphs", e.to_string()))?
            }
            "random-per-step" => DigraphSequence::random_per_step(g.n, need(g.p, "graph.p")?, self.seed)
                .map_err(|e| field("graph.p", e.to_string()))?,
            other => {
                return Err(field(
                    "graph.kind",
                    format!("unknown kind `{other}` (explicit, random, geometric, periodic, random-per-step)"),
                ))
            }
        };
        let unused = match g.kind.as_str() {
            "explicit" => !g.graphs.is_empty() || g.p.is_some() || g.radius.is_some(),
            "periodic" => !g.edges.is_empty() || g.p.is_some() || g.radius.is_some(),
            "geometric" => !g.edges.is_empty() || !g.graphs.is_empty() || g.p.is_some(),
            _ => !g.edges.is_empty() || !g.graphs.is_empty() || g.radius.is_some(),
        };
        if unused {
            return Err(field(
                "graph",
                format!("fields given that kind `{}` does not use", g.kind),
            ));
        }
        Ok(seq)
    }

    fn delay_schedule(&self) -> Result<DelaySchedule, ConfigError> {
        let d = &self.delays;
        let source =
            match d
                .source
                .as_deref()
                .unwrap_or(if d.tau_bar == 0 { "zero" } else { "uniform" })
            {
                "zero" => DelaySource::Zero,
                "uniform" => DelaySource::Uniform { seed: self.seed },
                "per-link" => {
                    DelaySource::PerLink(d.links.iter().map(|l| ((l[0], l[1]), l[2])).collect())
                }
                "table" => {
                    DelaySource::Table(d.table.iter().map(|t| ((t[0], t[1], t[2]), t[3])).collect())
                }
                other => {
                    return Err(field(
                        "delays.source",
                        format!("unknown source `{other}` (zero, uniform, per-link, table)"),
                    ))
                }
            };
        let bounds: BTreeMap<_, _> = d.bounds.iter().map(|b| ((b[0], b[1]), b[2])).collect();
        DelaySchedule::new(d.tau_bar, bounds, source).map_err(|e| field("delays", e.to_string()))
    }

    fn weight_matrix(&self) -> Result<Option<Matrix>, ConfigError> {
        if self.weights.matrix.is_empty() {
            return Ok(None);
        }
        let rows = self
            .weights
            .matrix
            .iter()
            .enumerate()
            .map(|(i, row)| {
                row.split_whitespace()
                    .map(parse_number)
                    .collect::<Result<Vec<f64>, _>>()
                    .map_err(|e| field(&format!("weights.matrix[{i}]"), e.to_string()))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Matrix::from_rows(&rows)
            .map(Some)
            .map_err(|e| field("weights.matrix", e.to_string()))
    }

    /// Validates everything and assembles the run.
    pub fn build(&self) -> Result<Experiment, ConfigError> {
        if self.name.trim().is_empty() {
            return Err(field("name", "must not be empty"));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(field("epsilon", "must be positive"));
        }
        if self.y0.len() != self.graph.n {
            return Err(field(
                "y0",
                format!(
                    "has {} entries but graph.n is {}",
                    self.y0.len(),
                    self.graph.n
                ),
            ));
        }
        if let Some(i) = self.y0.iter().position(|v| !v.is_finite()) {
            return Err(field("y0", format!("entry {i} is not finite")));
        }
        if self.analysis.window == Some(0) {
            return Err(field("analysis.window", "must be at least 1"));
        }
        let topology = self.topology()?;
        let delays = self.delay_schedule()?;
        let matrix = self.weight_matrix()?;
        let mode = self.weights.mode.as_deref();

        match self.protocol {
            Protocol::Ratio => {
                if self.bootstrap.is_some() {
                    return Err(field("bootstrap", "only used by the baseline protocol"));
                }
                let weights = match (
                    mode.unwrap_or(if matrix.is_some() {
                        "matrix"
                    } else {
                        "out-degree"
                    }),
                    matrix,
                ) {
                    ("out-degree", None) => WeightsMode::OutDegree,
                    ("matrix", Some(m)) => WeightsMode::Fixed(WeightMatrix::new_unchecked(m)),
                    ("matrix", None) => {
                        return Err(field("weights.matrix", "required for mode `matrix`"))
                    }
                    ("out-degree", Some(_)) => {
                        return Err(field("weights.matrix", "only used with mode `matrix`"))
                    }
                    (other, _) => {
                        return Err(field(
                            "weights.mode",
                            format!(
                            "unknown mode `{other}` for the ratio protocol (out-degree, matrix)"
                        ),
                        ))
                    }
                };
                let plan = match &self.ack {
                    None => SwitchPlan::switching(topology),
                    Some(ack) => SwitchPlan::new(
                        topology,
                        ack.bound,
                        ack.events
                            .iter()
                            .map(|e| TerminationEvent {
                                step: e.step,
                                sender: e.sender,
                                receiver: e.receiver,
                                ack_delay: e.ack_delay,
                            })
                            .collect(),
                    )
                    .map_err(|e| field("ack.events", e.to_string()))?,
                };
                let sim =
                    Simulation::new(plan, delays, weights, &self.y0).map_err(|e| match e {
                        EngineError::Weights(m) => field("weights.matrix", m),
                        other => field("y0", other.to_string()),
                    })?;
                Ok(Experiment::Ratio(sim))
            }
            Protocol::Baseline => {
                if self.ack.is_some() {
                    return Err(field(
                        "ack",
                        "the baseline protocol has no link termination",
                    ));
                }
                let DigraphSequence::Static(g) = topology else {
                    return Err(field(
                        "graph.kind",
                        "the baseline protocol needs a fixed topology",
                    ));
                };
                let weights = match (mode.unwrap_or(if matrix.is_some() { "matrix" } else { "doubly-stochastic" }), matrix) {
                    ("doubly-stochastic", None) => {
                        doubly_stochastic_weights(&g).map_err(|e| field("graph", e.to_string()))?
                    }
                    ("matrix", Some(m)) => WeightMatrix::new_unchecked(m),
                    ("matrix", None) => return Err(field("weights.matrix", "required for mode `matrix`")),
                    (other, _) => {
                        return Err(field(
                            "weights.mode",
                            format!("unknown mode `{other}` for the baseline protocol (doubly-stochastic, matrix)"),
                        ))
                    }
                };
                let bootstrap = match self.bootstrap.as_deref() {
                    None | Some("initial-value") => BootstrapMode::InitialValue,
                    Some("skip-and-renormalize") => BootstrapMode::SkipAndRenormalize,
                    Some(other) => {
                        return Err(field(
                            "bootstrap",
                            format!("unknown mode `{other}` (initial-value, skip-and-renormalize)"),
                        ))
                    }
                };
                let b = Baseline::new(g, weights, delays, &self.y0, bootstrap).map_err(
                    |e| match e {
                        BaselineError::Asymmetric => field("graph", e.to_string()),
                        BaselineError::Dimension { .. } => field("y0", e.to_string()),
                        _ => field("weights", e.to_string()),
                    },
                )?;
                Ok(Experiment::Baseline(b))
            }
        }
    }

    pub fn average(&self) -> f64 {
        self.y0.iter().sum::<f64>() / self.y0.len() as f64
    }
}

/// Result of `run`.
#[derive(Debug, Clone)]
pub enum RunOutput {
    Ratio(Trace),
    Baseline(BaselineTrace),
}

impl RunOutput {
    pub fn trace_csv(&self) -> String {
        match self {
            RunOutput::Ratio(t) => t.to_csv(),
            RunOutput::Baseline(t) => t.to_csv(),
        }
    }

    pub fn spread_csv(&self) -> String {
        match self {
            RunOutput::Ratio(t) => t.spread_csv(),
            RunOutput::Baseline(t) => t.spread_csv(),
        }
    }

    /// Per-node estimates at the last step: ratios, or plain values for
    /// the baseline.
    pub fn final_estimates(&self) -> Vec<f64> {
        match self {
            RunOutput::Ratio(t) => t.final_ratios(),
            RunOutput::Baseline(t) => t.last().to_vec(),
        }
    }

    fn estimates(&self) -> Vec<Vec<f64>> {
        match self {
            RunOutput::Ratio(t) => t.steps().iter().map(|s| s.ratios()).collect(),
            RunOutput::Baseline(t) => t.steps.clone(),
        }
    }

    /// First step from which every estimate stays within `eps` of `target`.
    pub fn steps_to_within(&self, target: f64, eps: f64) -> Option<usize> {
        let mut first = None;
        for (k, est) in self.estimates().iter().enumerate() {
            let inside = est.iter().all(|m| (m - target).abs() <= eps);
            match (inside, first) {
                (true, None) => first = Some(k),
                (false, _) => first = None,
                _ => {}
            }
        }
        first
    }

    pub fn summary(&self, cfg: &ExperimentConfig) -> String {
        let avg = cfg.average();
        let fin = self.final_estimates();
        let err = fin.iter().map(|m| (m - avg).abs()).fold(0.0, f64::max);
        let mut s = String::new();
        let _ = writeln!(s, "name: {}", cfg.name);
        let _ = writeln!(s, "seed: {}", cfg.seed);
        let protocol = match cfg.protocol {
            Protocol::Ratio => "ratio",
            Protocol::Baseline => "baseline",
        };
        let _ = writeln!(s, "protocol: {protocol}");
        let _ = writeln!(s, "n: {}", cfg.graph.n);
        let _ = writeln!(s, "horizon: {}", cfg.horizon);
        let _ = writeln!(s, "tau_bar: {}", cfg.delays.tau_bar);
        let _ = writeln!(s, "average: {avg:?}");
        let list: Vec<String> = fin.iter().map(|v| format!("{v:?}")).collect();
        let _ = writeln!(s, "final_estimates: {}", list.join(" "));
        let _ = writeln!(s, "final_spread: {:?}", crate::engine::spread(&fin));
        let _ = writeln!(s, "max_abs_error: {err:?}");
        let _ = writeln!(s, "epsilon: {:?}", cfg.epsilon);
        match self.steps_to_within(avg, cfg.epsilon) {
            Some(k) => {
                let _ = writeln!(s, "steps_to_epsilon: {k}");
            }
            None => {
                let _ = writeln!(s, "steps_to_epsilon: not reached");
            }
        }
        s
    }
}

pub fn run(cfg: &ExperimentConfig) -> Result<RunOutput, RunError> {
    match cfg.build()? {
        Experiment::Ratio(mut sim) => Ok(RunOutput::Ratio(sim.run_to(cfg.horizon)?)),
        Experiment::Baseline(mut b) => Ok(RunOutput::Baseline(b.run_to(cfg.horizon)?)),
    }
}

pub fn run_oracle_check(cfg: &ExperimentConfig) -> Result<OracleReport, RunError> {
    match cfg.build()? {
        Experiment::Ratio(mut sim) => Ok(oracle_check(&mut sim, cfg.horizon)?),
        Experiment::Baseline(_) => Err(RunError::NotCheckable(
            "the augmented model covers the ratio protocol only".into(),
        )),
    }
}

pub fn run_analysis(cfg: &ExperimentConfig) -> Result<(Trace, AnalysisReport), RunError> {
    match cfg.build()? {
        Experiment::Ratio(mut sim) => Ok(analyze_run(&mut sim, cfg.horizon, cfg.analysis.window)?),
        Experiment::Baseline(_) => Err(RunError::NotCheckable(
            "analysis covers the ratio protocol only".into(),
        )),
    }
}
