//! Average consensus on directed graphs that tolerates bounded message
//! delays, switching topologies and late link-termination acknowledgements.
//!
//! The [`engine`] runs the two coupled iterations node by node. The
//! [`augmented`] module rebuilds the same run as a plain product of
//! block matrices and serves as an independent check on the engine, while
//! [`analysis`] inspects those products (ergodicity coefficient, SIA
//! structure, positivity bounds, error envelope). [`baseline`] is the
//! single-iteration doubly-stochastic scheme that reaches consensus under
//! delays but not, in general, the average.

pub mod analysis;
pub mod augmented;
pub mod baseline;
pub mod config;
pub mod engine;
pub mod error;
pub mod fixtures;
pub mod graph;
pub mod matrix;
pub mod seed;
pub mod weights;

pub use engine::{spread, DelaySchedule, Simulation, SimulationState, SwitchPlan, Trace};
pub use graph::{Digraph, DigraphSequence};
pub use matrix::Matrix;
pub use weights::WeightMatrix;
