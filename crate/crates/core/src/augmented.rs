//! Augmented-matrix model of a delayed run.
//!
//! Each real node `j` gets `tau_bar` virtual nodes; virtual node `r` holds
//! the mass due at `j` in `r` steps. One step of the whole system is then a
//! single column-stochastic matrix
//!
//! ```text
//! [ P_0  I  0 ... 0 ]
//! [ P_1  0  I ... 0 ]
//! [ ...             ]
//! [ P_T  0  0 ... 0 ]
//! ```
//!
//! where `P_r` keeps the weights of links whose message at this step is
//! delayed by exactly `r`. Late termination acknowledgements add one chain
//! of `chain_len` virtual nodes per terminated link that loops back into the
//! sender.
//!
//! This module never looks at the engine's message buffers: it is fed the
//! weights and delays of each step and iterates `x[k+1] = P[k] x[k]`.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::engine::{EngineError, Simulation, StepRecord};
use crate::matrix::Matrix;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AugmentedError {
    #[error("delay {delay} on link ({receiver}, {sender}) is outside 0..={tau_bar}")]
    DelayOutOfRange {
        receiver: usize,
        sender: usize,
        delay: usize,
        tau_bar: usize,
    },
    #[error("link ({receiver}, {sender}) has an assignment but zero weight")]
    AssignmentForZeroEntry { receiver: usize, sender: usize },
    #[error("positive weight ({receiver}, {sender}) has no delay assignment")]
    MissingAssignment { receiver: usize, sender: usize },
    #[error("link ({receiver}, {sender}) is assigned both a delay and a loop-back")]
    DoubleAssignment { receiver: usize, sender: usize },
    #[error("loop-back on ({receiver}, {sender}) has no chain or return time {ret} is outside 1..={chain_len}")]
    BadLoopBack {
        receiver: usize,
        sender: usize,
        ret: usize,
        chain_len: usize,
    },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },
    #[error("the engine and the oracle were not driven by the same configuration: {0}")]
    ConfigMismatch(String),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

/// One step of the augmented system.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedMatrix {
    n: usize,
    tau_bar: usize,
    chains: Vec<(usize, usize)>,
    chain_len: usize,
    weights: Matrix,
    matrix: Matrix,
}

impl AugmentedMatrix {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn tau_bar(&self) -> usize {
        self.tau_bar
    }

    pub fn dim(&self) -> usize {
        self.matrix.n()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    /// The unsplit weight matrix this step was built from.
    pub fn weights(&self) -> &Matrix {
        &self.weights
    }

    /// Block `P_r`: rows `r*n..(r+1)*n` of the first block column.
    pub fn delay_block(&self, r: usize) -> Matrix {
        assert!(
            r <= self.tau_bar,
            "block {r} beyond tau_bar {}",
            self.tau_bar
        );
        let n = self.n;
        let mut b = Matrix::zeros(n);
        for l in 0..n {
            for j in 0..n {
                b.set(l, j, self.matrix.get(r * n + l, j));
            }
        }
        b
    }

    pub fn to_text(&self) -> String {
        self.matrix.to_text()
    }
}

/// Builds the augmented matrix for a step with the given per-link delays.
///
/// `assignment` maps every positive off-diagonal `(receiver, sender)` entry
/// of `weights` to its delay; self weights always land in `P_0`.
pub fn build_augmented(
    weights: &Matrix,
    assignment: &BTreeMap<(usize, usize), usize>,
    tau_bar: usize,
) -> Result<AugmentedMatrix, AugmentedError> {
    build_augmented_with_loopbacks(weights, assignment, &BTreeMap::new(), tau_bar, &[], 0)
}

/// Like [`build_augmented`], plus a loop-back chain of `chain_len` virtual
/// nodes for every link in `chains`. `looped` maps a terminated link
/// `(receiver, sender)` to the number of steps until its mass returns to
/// the sender (between 1 and `chain_len`).
pub fn build_augmented_with_loopbacks(
    weights: &Matrix,
    delivered: &BTreeMap<(usize, usize), usize>,
    looped: &BTreeMap<(usize, usize), usize>,
    tau_bar: usize,
    chains: &[(usize, usize)],
    chain_len: usize,
) -> Result<AugmentedMatrix, AugmentedError> {
    let n = weights.n();
    let chain_base = (tau_bar + 1) * n;
    let dim = chain_base + chains.len() * chain_len;
    let mut m = Matrix::zeros(dim);

    for (&(l, j), &r) in delivered {
        if r > tau_bar {
            return Err(AugmentedError::DelayOutOfRange {
                receiver: l,
                sender: j,
                delay: r,
                tau_bar,
            });
        }
        if l >= n || j >= n || l == j || weights.get(l, j) <= 0.0 {
            return Err(AugmentedError::AssignmentForZeroEntry {
                receiver: l,
                sender: j,
            });
        }
        if looped.contains_key(&(l, j)) {
            return Err(AugmentedError::DoubleAssignment {
                receiver: l,
                sender: j,
            });
        }
        m.set(r * n + l, j, weights.get(l, j));
    }
    for (&(l, j), &ret) in looped {
        if l >= n || j >= n || l == j || weights.get(l, j) <= 0.0 {
            return Err(AugmentedError::AssignmentForZeroEntry {
                receiver: l,
                sender: j,
            });
        }
        let c = chains.iter().position(|&link| link == (l, j));
        let Some(c) = c.filter(|_| (1..=chain_len).contains(&ret)) else {
            return Err(AugmentedError::BadLoopBack {
                receiver: l,
                sender: j,
                ret,
                chain_len,
            });
        };
        m.set(chain_base + c * chain_len + ret - 1, j, weights.get(l, j));
    }
    for j in 0..n {
        for l in 0..n {
            if l != j
                && weights.get(l, j) > 0.0
                && !delivered.contains_key(&(l, j))
                && !looped.contains_key(&(l, j))
            {
                return Err(AugmentedError::MissingAssignment {
                    receiver: l,
                    sender: j,
                });
            }
        }
        m.set(j, j, weights.get(j, j));
    }
    // Delay slot r feeds slot r - 1 (slot 0 being the real node).
    for r in 1..=tau_bar {
        for l in 0..n {
            m.set((r - 1) * n + l, r * n + l, 1.0);
        }
    }
    for (c, &(_, sender)) in chains.iter().enumerate() {
        let base = chain_base + c * chain_len;
        for r in 1..=chain_len {
            let target = if r == 1 { sender } else { base + r - 2 };
            m.set(target, base + r - 1, 1.0);
        }
    }
    Ok(AugmentedMatrix {
        n,
        tau_bar,
        chains: chains.to_vec(),
        chain_len,
        weights: weights.clone(),
        matrix: m,
    })
}

/// Augmented state pair `(y, z)`.
pub type AugmentedState = (Vec<f64>, Vec<f64>);

/// Iterates `x[k+1] = P[k] x[k]` for both y and z from `(y0, 0...)` and
/// `(z0, 0...)`. The result starts with the initial state, so it holds one
/// more entry than there are matrices.
pub fn iterate<'a>(
    matrices: impl IntoIterator<Item = &'a AugmentedMatrix>,
    y0: &[f64],
    z0: &[f64],
) -> Result<Vec<AugmentedState>, AugmentedError> {
    if y0.len() != z0.len() {
        return Err(AugmentedError::Dimension {
            expected: y0.len(),
            found: z0.len(),
        });
    }
    let mut matrices = matrices.into_iter().peekable();
    let dim = matrices.peek().map_or(y0.len(), |p| p.dim());
    let mut y = vec![0.0; dim];
    let mut z = vec![0.0; dim];
    y[..y0.len()].copy_from_slice(y0);
    z[..z0.len()].copy_from_slice(z0);
    let mut out = vec![(y, z)];
    for p in matrices {
        if p.n() != y0.len() || p.dim() != dim {
            return Err(AugmentedError::Dimension {
                expected: dim,
                found: p.dim(),
            });
        }
        let (y, z) = out.last().expect("non-empty");
        let next = (p.matrix().mul_vec(y), p.matrix().mul_vec(z));
        out.push(next);
    }
    Ok(out)
}

/// Rebuilds the augmented matrices of a run from what each step reported:
/// its weights, the delay of every delivered message and the return time of
/// every looped one.
pub fn matrices_from_records(
    records: &[StepRecord],
    tau_bar: usize,
    chains: &[(usize, usize)],
    chain_len: usize,
) -> Result<Vec<AugmentedMatrix>, AugmentedError> {
    records
        .iter()
        .map(|rec| {
            let delivered = rec.delivered.iter().map(|&(l, j, d)| ((l, j), d)).collect();
            let looped = rec.looped.iter().map(|&(l, j, d)| ((l, j), d)).collect();
            build_augmented_with_loopbacks(
                &rec.weights,
                &delivered,
                &looped,
                tau_bar,
                chains,
                chain_len,
            )
        })
        .collect()
}

/// Per-step agreement between an engine run and the augmented model.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    /// Largest absolute difference over every augmented entry of y and z,
    /// for k = 0..=horizon.
    pub per_step: Vec<f64>,
}

impl OracleReport {
    pub fn max_deviation(&self) -> f64 {
        self.per_step.iter().copied().fold(0.0, f64::max)
    }

    /// First step whose deviation exceeds `tol`.
    pub fn first_violation(&self, tol: f64) -> Option<usize> {
        self.per_step.iter().position(|&d| d > tol)
    }
}

/// Largest absolute entrywise difference between matching state pairs.
pub fn compare_states(
    engine: &[AugmentedState],
    oracle: &[AugmentedState],
) -> Result<Vec<f64>, AugmentedError> {
    if engine.len() != oracle.len() {
        return Err(AugmentedError::Dimension {
            expected: oracle.len(),
            found: engine.len(),
        });
    }
    engine
        .iter()
        .zip(oracle)
        .map(|((ey, ez), (oy, oz))| {
            if ey.len() != oy.len() || ez.len() != oz.len() {
                return Err(AugmentedError::Dimension {
                    expected: oy.len(),
                    found: ey.len(),
                });
            }
            Ok(ey
                .iter()
                .zip(oy)
                .chain(ez.iter().zip(oz))
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max))
        })
        .collect()
}

/// Runs `sim` to `horizon`, snapshotting the engine's buffers in augmented
/// form after every step, and compares them with the augmented model built
/// from the step records.
pub fn oracle_check(sim: &mut Simulation, horizon: usize) -> Result<OracleReport, AugmentedError> {
    let tau_bar = sim.delays().tau_bar();
    let chains: Vec<(usize, usize)> = sim
        .plan()
        .termination_events()
        .iter()
        .map(|e| (e.receiver, e.sender))
        .collect();
    let chain_len = sim.plan().ack_delay_bound();
    let y0 = sim.state().y().to_vec();
    let z0 = sim.state().z().to_vec();
    if sim.state().k() != 0 || z0.iter().any(|&z| z != 1.0) {
        return Err(AugmentedError::ConfigMismatch(
            "the check must start from a fresh state".into(),
        ));
    }
    let mut snapshots = vec![sim.state().augmented_view(tau_bar, sim.plan())?];
    let mut records = Vec::with_capacity(horizon);
    while sim.state().k() < horizon {
        records.push(sim.step()?);
        snapshots.push(sim.state().augmented_view(tau_bar, sim.plan())?);
    }
    let matrices = matrices_from_records(&records, tau_bar, &chains, chain_len)?;
    let oracle = iterate(&matrices, &y0, &z0)?;
    Ok(OracleReport {
        per_step: compare_states(&snapshots, &oracle)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{DelaySchedule, SwitchPlan, TerminationEvent, WeightsMode};
    use crate::fixtures;
    use crate::graph::{Digraph, DigraphSequence};
    use crate::weights::out_degree_weights;

    fn half() -> Matrix {
        Matrix::from_rows(&[vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap()
    }

    fn rows(m: &Matrix) -> Vec<Vec<f64>> {
        (0..m.n()).map(|i| m.row(i).to_vec()).collect()
    }

    #[test]
    fn two_node_first_step_layout() {
        // Both messages of the first step arrive immediately.
        let a = BTreeMap::from([((0, 1), 0), ((1, 0), 0)]);
        let p = build_augmented(&half(), &a, 2).unwrap();
        let expected = vec![
            vec![0.5, 0.5, 1.0, 0.0, 0.0, 0.0],
            vec![0.5, 0.5, 0.0, 1.0, 0.0, 0.0],
            vec![0.0, 0.0, 0.0, 0.0, 1.0, 0.0],
            vec![0.0, 0.0, 0.0, 0.0, 0.0, 1.0],
            vec![0.0; 6],
            vec![0.0; 6],
        ];
        assert_eq!(rows(p.matrix()), expected);
    }

    #[test]
    fn two_node_delayed_step_layout() {
        let a = BTreeMap::from([((0, 1), 1), ((1, 0), 2)]);
        let p = build_augmented(&half(), &a, 2).unwrap();
        let expected = vec![
            vec![0.5, 0.0, 1.0, 0.0, 0.0, 0.0],
            vec![0.0, 0.5, 0.0, 1.0, 0.0, 0.0],
            vec![0.0, 0.5, 0.0, 0.0, 1.0, 0.0],
            vec![0.0, 0.0, 0.0, 0.0, 0.0, 1.0],
            vec![0.0; 6],
            vec![0.5, 0.0, 0.0, 0.0, 0.0, 0.0],
        ];
        assert_eq!(rows(p.matrix()), expected);
        assert!(p.matrix().is_column_stochastic(1e-15));
        assert_eq!(p.delay_block(1).get(0, 1), 0.5);
        assert_eq!(p.delay_block(2).get(1, 0), 0.5);
    }

    #[test]
    fn one_step_by_hand() {
        let a = BTreeMap::from([((0, 1), 1), ((1, 0), 2)]);
        let p = build_augmented(&half(), &a, 2).unwrap();
        let x = vec![4.0, 2.0, 1.0, 3.0, 5.0, 7.0];
        // Row by row: 0.5*4 + 1, 0.5*2 + 3, 0.5*2 + 5, 7, 0, 0.5*4.
        assert_eq!(p.matrix().mul_vec(&x), vec![3.0, 4.0, 6.0, 7.0, 0.0, 2.0]);
    }

    #[test]
    fn zero_tau_bar_is_plain_weights() {
        let w = out_degree_weights(&fixtures::five_node_graph());
        let a = fixtures::five_node_graph()
            .edges()
            .map(|e| (e, 0))
            .collect();
        let p = build_augmented(&w, &a, 0).unwrap();
        assert_eq!(p.matrix(), w.matrix());
    }

    #[test]
    fn assignment_errors() {
        let w = half();
        let err = build_augmented(&w, &BTreeMap::from([((0, 1), 3), ((1, 0), 0)]), 2).unwrap_err();
        assert!(matches!(
            err,
            AugmentedError::DelayOutOfRange { delay: 3, .. }
        ));
        let err = build_augmented(&w, &BTreeMap::from([((0, 1), 0)]), 2).unwrap_err();
        assert!(matches!(
            err,
            AugmentedError::MissingAssignment {
                receiver: 1,
                sender: 0
            }
        ));
        let diag = Matrix::identity(2);
        let err = build_augmented(&diag, &BTreeMap::from([((0, 1), 0)]), 1).unwrap_err();
        assert!(matches!(err, AugmentedError::AssignmentForZeroEntry { .. }));
    }

    /// Three nodes, one delay step, link 1 -> 3 terminated at k2 and only
    /// acknowledged two steps later. The hand layout keeps the states
    /// `(x1, x2, x3, x1^(1), c1, c2)`.
    #[test]
    fn late_ack_step_layout() {
        let w = Matrix::from_rows(&[
            vec![1.0 / 3.0, 0.5, 0.0],
            vec![1.0 / 3.0, 0.5, 0.5],
            vec![1.0 / 3.0, 0.0, 0.5],
        ])
        .unwrap();
        let delivered = BTreeMap::from([((1, 0), 0), ((0, 1), 1), ((1, 2), 0)]);
        let looped = BTreeMap::from([((2, 0), 2)]);
        let p = build_augmented_with_loopbacks(&w, &delivered, &looped, 1, &[(2, 0)], 2).unwrap();
        assert!(p.matrix().is_column_stochastic(1e-15));
        let keep = [0, 1, 2, 3, 6, 7];
        let third = 1.0 / 3.0;
        let expected = vec![
            vec![third, 0.0, 0.0, 1.0, 1.0, 0.0],
            vec![third, 0.5, 0.5, 0.0, 0.0, 0.0],
            vec![0.0, 0.0, 0.5, 0.0, 0.0, 0.0],
            vec![0.0, 0.5, 0.0, 0.0, 0.0, 0.0],
            vec![0.0, 0.0, 0.0, 0.0, 0.0, 1.0],
            vec![third, 0.0, 0.0, 0.0, 0.0, 0.0],
        ];
        assert_eq!(rows(&p.matrix().select(&keep)), expected);

        // Before the termination everything is delivered on time.
        let all = BTreeMap::from([((1, 0), 0), ((2, 0), 0), ((0, 1), 0), ((1, 2), 0)]);
        let p1 =
            build_augmented_with_loopbacks(&w, &all, &BTreeMap::new(), 1, &[(2, 0)], 2).unwrap();
        let expected1 = vec![
            vec![third, 0.5, 0.0, 1.0, 1.0, 0.0],
            vec![third, 0.5, 0.5, 0.0, 0.0, 0.0],
            vec![third, 0.0, 0.5, 0.0, 0.0, 0.0],
            vec![0.0; 6],
            vec![0.0, 0.0, 0.0, 0.0, 0.0, 1.0],
            vec![0.0; 6],
        ];
        assert_eq!(rows(&p1.matrix().select(&keep)), expected1);
    }

    fn check(sim: &mut Simulation, horizon: usize) -> OracleReport {
        let report = oracle_check(sim, horizon).unwrap();
        assert_eq!(report.per_step.len(), horizon + 1);
        report
    }

    #[test]
    fn engine_matches_model_without_delays() {
        let g = fixtures::five_node_graph();
        let mut sim = Simulation::new(
            SwitchPlan::fixed(g),
            DelaySchedule::zero(),
            WeightsMode::OutDegree,
            &fixtures::FIVE_NODE_Y0,
        )
        .unwrap();
        assert!(check(&mut sim, 100).max_deviation() <= 1e-12);
    }

    #[test]
    fn engine_matches_model_with_delays() {
        let g = fixtures::five_node_graph();
        let mut sim = Simulation::new(
            SwitchPlan::fixed(g),
            DelaySchedule::uniform(3, 7),
            WeightsMode::OutDegree,
            &fixtures::FIVE_NODE_Y0,
        )
        .unwrap();
        assert!(check(&mut sim, 100).max_deviation() <= 1e-12);
    }

    #[test]
    fn engine_matches_model_with_late_ack() {
        let g = fixtures::ack_four_node_graph();
        let ev = TerminationEvent {
            step: 3,
            sender: 0,
            receiver: 2,
            ack_delay: 2,
        };
        let plan = SwitchPlan::new(DigraphSequence::Static(g), 2, vec![ev]).unwrap();
        let mut sim = Simulation::new(
            plan,
            DelaySchedule::uniform(2, 11),
            WeightsMode::OutDegree,
            &[1.0, 5.0, -2.0, 4.0],
        )
        .unwrap();
        assert!(check(&mut sim, 60).max_deviation() <= 1e-12);
    }

    #[test]
    fn switching_run_matches_model() {
        let seq = DigraphSequence::periodic(fixtures::periodic3_graphs()).unwrap();
        let mut sim = Simulation::new(
            SwitchPlan::switching(seq),
            DelaySchedule::uniform(2, 3),
            WeightsMode::OutDegree,
            &[1.0, 2.0, 6.0],
        )
        .unwrap();
        assert!(check(&mut sim, 80).max_deviation() <= 1e-12);
    }

    #[test]
    fn corrupted_engine_is_caught() {
        let g = Digraph::complete(4);
        let mut sim = Simulation::new(
            SwitchPlan::fixed(g),
            DelaySchedule::uniform(2, 5),
            WeightsMode::OutDegree,
            &[1.0, 2.0, 3.0, 4.0],
        )
        .unwrap();
        let tau_bar = sim.delays().tau_bar();
        let mut snaps = vec![sim.state().augmented_view(tau_bar, sim.plan()).unwrap()];
        let mut records = Vec::new();
        for k in 0..30 {
            if k == 10 {
                sim.state_mut().perturb_y(2, 1e-6);
            }
            records.push(sim.step().unwrap());
            snaps.push(sim.state().augmented_view(tau_bar, sim.plan()).unwrap());
        }
        let m = matrices_from_records(&records, tau_bar, &[], 0).unwrap();
        let oracle = iterate(&m, &[1.0, 2.0, 3.0, 4.0], &[1.0; 4]).unwrap();
        let dev = compare_states(&snaps, &oracle).unwrap();
        assert!(dev[..=10].iter().all(|&d| d <= 1e-12));
        assert!(dev[11] >= 1e-7);
    }

    #[test]
    fn iterate_keeps_mass() {
        let a = BTreeMap::from([((0, 1), 1), ((1, 0), 2)]);
        let p = build_augmented(&half(), &a, 2).unwrap();
        let states = iterate(std::iter::repeat_n(&p, 20), &[3.0, -1.0], &[1.0, 1.0]).unwrap();
        assert_eq!(states.len(), 21);
        for (y, z) in &states {
            assert!((y.iter().sum::<f64>() - 2.0).abs() < 1e-12);
            assert!((z.iter().sum::<f64>() - 2.0).abs() < 1e-12);
        }
    }
}
