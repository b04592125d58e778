use std::collections::{BTreeMap, VecDeque};

use super::plan::{SwitchPlan, TerminationEvent};
use super::{DelaySchedule, EngineError};
use crate::weights::WeightMatrix;

/// Relative tolerance on total-mass conservation.
pub const CONSERVATION_TOL: f64 = 1e-9;

/// A weighted message travelling from `sender` to `receiver`. The y and z
/// masses always share weight and delay.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InFlightMessage {
    pub sender: usize,
    pub receiver: usize,
    pub send_step: usize,
    pub arrival_step: usize,
    pub y_mass: f64,
    pub z_mass: f64,
}

/// One entry of a sender's per-link history.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SentRecord {
    pub step: usize,
    pub y_mass: f64,
    pub z_mass: f64,
    /// False when the link was already gone and the mass awaits return.
    pub delivered: bool,
}

/// What one step did, in enough detail to rebuild the step's augmented
/// matrix independently.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub weights: WeightMatrix,
    /// `(receiver, sender, delay)` for every delivered link message.
    pub delivered: Vec<(usize, usize, usize)>,
    /// `(receiver, sender, steps until the mass returns to the sender)` for
    /// messages on terminated but undiscovered links.
    pub looped: Vec<(usize, usize, usize)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationState {
    k: usize,
    y: Vec<f64>,
    z: Vec<f64>,
    in_flight: Vec<InFlightMessage>,
    /// `(sender, receiver)` -> last `history_depth` sends, oldest first.
    send_history: BTreeMap<(usize, usize), VecDeque<SentRecord>>,
    history_depth: usize,
    sigma_y0: f64,
    sigma_abs_y0: f64,
    sigma_z0: f64,
}

impl SimulationState {
    /// `z[0]` is all ones.
    pub fn new(y0: &[f64], history_depth: usize) -> Result<Self, EngineError> {
        if y0.is_empty() {
            return Err(EngineError::Dimension {
                expected: 1,
                found: 0,
            });
        }
        if let Some(i) = y0.iter().position(|v| !v.is_finite()) {
            return Err(EngineError::NonFinite { node: i });
        }
        let n = y0.len();
        Ok(SimulationState {
            k: 0,
            y: y0.to_vec(),
            z: vec![1.0; n],
            in_flight: Vec::new(),
            send_history: BTreeMap::new(),
            history_depth,
            sigma_y0: y0.iter().sum(),
            sigma_abs_y0: y0.iter().map(|v| v.abs()).sum(),
            sigma_z0: n as f64,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn z(&self) -> &[f64] {
        &self.z
    }

    pub fn in_flight(&self) -> &[InFlightMessage] {
        &self.in_flight
    }

    pub fn send_history(&self, sender: usize, receiver: usize) -> Option<&VecDeque<SentRecord>> {
        self.send_history.get(&(sender, receiver))
    }

    /// Test hook: perturb a node value. The conserved total moves with it,
    /// so only an outside model of the run can notice.
    pub fn perturb_y(&mut self, node: usize, delta: f64) {
        self.y[node] += delta;
        self.sigma_y0 += delta;
    }

    /// `y / z` per node.
    pub fn ratios(&self) -> Result<Vec<f64>, EngineError> {
        self.y
            .iter()
            .zip(&self.z)
            .enumerate()
            .map(|(j, (&y, &z))| {
                if z > 0.0 {
                    Ok(y / z)
                } else {
                    Err(EngineError::NonPositiveZ {
                        node: j,
                        step: self.k,
                    })
                }
            })
            .collect()
    }

    /// Undelivered history mass that will be returned to its sender.
    fn pending_return_totals(&self) -> (f64, f64) {
        self.send_history
            .values()
            .flatten()
            .filter(|r| !r.delivered)
            .fold((0.0, 0.0), |(y, z), r| (y + r.y_mass, z + r.z_mass))
    }

    /// Total `(y, z)` across nodes, in-flight messages and pending returns.
    pub fn mass_totals(&self) -> (f64, f64) {
        let (ry, rz) = self.pending_return_totals();
        let fy: f64 = self.in_flight.iter().map(|m| m.y_mass).sum();
        let fz: f64 = self.in_flight.iter().map(|m| m.z_mass).sum();
        (
            self.y.iter().sum::<f64>() + fy + ry,
            self.z.iter().sum::<f64>() + fz + rz,
        )
    }

    /// Relative drift of `(y, z)` totals from their initial values. The y
    /// drift is scaled by `max(1, sum |y0|)` so that zero-sum inputs stay
    /// well defined.
    pub fn conservation_error(&self) -> (f64, f64) {
        let (ty, tz) = self.mass_totals();
        (
            (ty - self.sigma_y0).abs() / self.sigma_abs_y0.max(1.0),
            (tz - self.sigma_z0).abs() / self.sigma_z0,
        )
    }

    /// The state laid out like the augmented oracle vector: the n node
    /// values, then one block of n per delay slot `r = 1..=tau_bar` holding
    /// mass that arrives `r - 1` steps from now, then a block of
    /// `plan.ack_delay_bound()` slots per terminated link holding mass due
    /// back at its sender `r - 1` steps from now.
    pub fn augmented_view(
        &self,
        tau_bar: usize,
        plan: &SwitchPlan,
    ) -> Result<(Vec<f64>, Vec<f64>), EngineError> {
        let n = self.n();
        let chain_len = plan.ack_delay_bound();
        let events = plan.termination_events();
        let dim = (tau_bar + 1) * n + events.len() * chain_len;
        let mut y = vec![0.0; dim];
        let mut z = vec![0.0; dim];
        y[..n].copy_from_slice(&self.y);
        z[..n].copy_from_slice(&self.z);
        for m in &self.in_flight {
            let r = m.arrival_step + 1 - self.k;
            if r > tau_bar {
                return Err(EngineError::SlotOverflow {
                    slot: r,
                    capacity: tau_bar,
                });
            }
            y[r * n + m.receiver] += m.y_mass;
            z[r * n + m.receiver] += m.z_mass;
        }
        for (c, ev) in events.iter().enumerate() {
            let Some(records) = self.send_history.get(&(ev.sender, ev.receiver)) else {
                continue;
            };
            for rec in records.iter().filter(|r| !r.delivered) {
                let r = ev.discovery_step() + 1 - self.k;
                if r == 0 || r > chain_len {
                    return Err(EngineError::SlotOverflow {
                        slot: r,
                        capacity: chain_len,
                    });
                }
                let idx = (tau_bar + 1) * n + c * chain_len + (r - 1);
                y[idx] += rec.y_mass;
                z[idx] += rec.z_mass;
            }
        }
        Ok((y, z))
    }

    /// Returns to the sender every mass it sent on the terminated link
    /// during `[event.step, event.discovery_step() - 1]`, and drops those
    /// records from the history. Returns the `(y, z)` mass added back.
    pub fn reconcile_termination(
        &mut self,
        event: &TerminationEvent,
    ) -> Result<(f64, f64), EngineError> {
        if event.ack_delay > self.history_depth {
            return Err(EngineError::HistoryUnderrun {
                sender: event.sender,
                receiver: event.receiver,
                ack_delay: event.ack_delay,
                depth: self.history_depth,
            });
        }
        let Some(records) = self.send_history.get_mut(&(event.sender, event.receiver)) else {
            return Ok((0.0, 0.0));
        };
        let window = event.step..event.discovery_step();
        let (mut ry, mut rz) = (0.0, 0.0);
        records.retain(|r| {
            if !r.delivered && window.contains(&r.step) {
                ry += r.y_mass;
                rz += r.z_mass;
                false
            } else {
                true
            }
        });
        self.y[event.sender] += ry;
        self.z[event.sender] += rz;
        Ok((ry, rz))
    }

    fn record_send(
        &mut self,
        sender: usize,
        receiver: usize,
        rec: SentRecord,
    ) -> Result<(), EngineError> {
        if self.history_depth == 0 {
            if rec.delivered {
                return Ok(());
            }
            return Err(EngineError::HistoryUnderrun {
                sender,
                receiver,
                ack_delay: 1,
                depth: 0,
            });
        }
        let depth = self.history_depth;
        let records = self.send_history.entry((sender, receiver)).or_default();
        records.push_back(rec);
        while records.len() > depth {
            let dropped = records.pop_front().expect("nonempty");
            if !dropped.delivered {
                return Err(EngineError::HistoryUnderrun {
                    sender,
                    receiver,
                    ack_delay: rec.step - dropped.step + 1,
                    depth,
                });
            }
        }
        Ok(())
    }

    /// Advances from step k to k + 1.
    ///
    /// Every node splits its current (y, z) according to its column of
    /// `weights_at_k`: the diagonal share stays, each off-diagonal share
    /// becomes a message. Messages on live links travel with the scheduled
    /// delay; messages on terminated links the sender has not yet heard
    /// about go into the send history and come back at discovery. The new
    /// value of a node is its kept share plus everything arriving at k,
    /// summed by (sender, send step).
    pub fn step(
        &mut self,
        weights_at_k: &WeightMatrix,
        delays: &DelaySchedule,
        plan: &SwitchPlan,
    ) -> Result<StepRecord, EngineError> {
        let n = self.n();
        let k = self.k;
        if weights_at_k.n() != n || plan.n() != n {
            return Err(EngineError::Dimension {
                expected: n,
                found: if weights_at_k.n() != n {
                    weights_at_k.n()
                } else {
                    plan.n()
                },
            });
        }
        let actual = plan.actual_graph(k);
        let mut delivered = Vec::new();
        let mut looped = Vec::new();

        for j in 0..n {
            if weights_at_k.get(j, j) <= 0.0 {
                return Err(EngineError::WeightGraphMismatch {
                    step: k,
                    receiver: j,
                    sender: j,
                });
            }
            for l in 0..n {
                let w = weights_at_k.get(l, j);
                if l == j || w == 0.0 {
                    continue;
                }
                if w < 0.0 {
                    return Err(EngineError::WeightGraphMismatch {
                        step: k,
                        receiver: l,
                        sender: j,
                    });
                }
                let (y_mass, z_mass) = (w * self.y[j], w * self.z[j]);
                if actual.has_edge(l, j) {
                    let tau = delays.delay(k, l, j);
                    self.in_flight.push(InFlightMessage {
                        sender: j,
                        receiver: l,
                        send_step: k,
                        arrival_step: k + tau,
                        y_mass,
                        z_mass,
                    });
                    delivered.push((l, j, tau));
                    if self.history_depth > 0 {
                        self.record_send(
                            j,
                            l,
                            SentRecord {
                                step: k,
                                y_mass,
                                z_mass,
                                delivered: true,
                            },
                        )?;
                    }
                } else if let Some(ev) = plan.undiscovered(k, l, j) {
                    looped.push((l, j, ev.discovery_step() - k));
                    self.record_send(
                        j,
                        l,
                        SentRecord {
                            step: k,
                            y_mass,
                            z_mass,
                            delivered: false,
                        },
                    )?;
                } else {
                    return Err(EngineError::WeightGraphMismatch {
                        step: k,
                        receiver: l,
                        sender: j,
                    });
                }
            }
        }

        let mut arriving: Vec<InFlightMessage> = Vec::new();
        self.in_flight.retain(|m| {
            if m.arrival_step == k {
                arriving.push(*m);
                false
            } else {
                true
            }
        });
        arriving.sort_by_key(|m| (m.receiver, m.sender, m.send_step));

        let mut new_y: Vec<f64> = (0..n).map(|j| weights_at_k.get(j, j) * self.y[j]).collect();
        let mut new_z: Vec<f64> = (0..n).map(|j| weights_at_k.get(j, j) * self.z[j]).collect();
        for m in &arriving {
            new_y[m.receiver] += m.y_mass;
            new_z[m.receiver] += m.z_mass;
        }
        self.y = new_y;
        self.z = new_z;

        for ev in plan.discovered_at(k) {
            self.reconcile_termination(ev)?;
        }

        self.k += 1;
        debug_assert!(
            {
                let (ey, ez) = self.conservation_error();
                ey <= CONSERVATION_TOL && ez <= CONSERVATION_TOL
            },
            "mass conservation breached at step {}: {:?}",
            self.k,
            self.conservation_error()
        );
        Ok(StepRecord {
            step: k,
            weights: weights_at_k.clone(),
            delivered,
            looped,
        })
    }
}
