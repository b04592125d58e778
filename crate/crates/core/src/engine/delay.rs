use std::collections::BTreeMap;

use rand::RngExt;

use super::EngineError;
use crate::seed::{rng_for, stream};

/// Where per-link, per-step delays come from.
#[derive(Debug, Clone, PartialEq)]
pub enum DelaySource {
    /// Every message is available in the step it is sent.
    Zero,
    /// Independent uniform draw over `{0, ..., bound}` for each `(k, receiver, sender)`.
    Uniform { seed: u64 },
    /// A constant delay per link; unlisted links have delay 0.
    PerLink(BTreeMap<(usize, usize), usize>),
    /// Explicit `(k, receiver, sender) -> delay`; unlisted entries have delay 0.
    Table(BTreeMap<(usize, usize, usize), usize>),
}

/// Bounded integer delays `tau_ji[k]` with `0 <= tau_ji[k] <= bound_ji <= tau_bar`.
#[derive(Debug, Clone, PartialEq)]
pub struct DelaySchedule {
    tau_bar: usize,
    per_link_bounds: BTreeMap<(usize, usize), usize>,
    source: DelaySource,
}

impl DelaySchedule {
    pub fn zero() -> Self {
        DelaySchedule {
            tau_bar: 0,
            per_link_bounds: BTreeMap::new(),
            source: DelaySource::Zero,
        }
    }

    pub fn uniform(tau_bar: usize, seed: u64) -> Self {
        DelaySchedule {
            tau_bar,
            per_link_bounds: BTreeMap::new(),
            source: DelaySource::Uniform { seed },
        }
    }

    pub fn new(
        tau_bar: usize,
        per_link_bounds: BTreeMap<(usize, usize), usize>,
        source: DelaySource,
    ) -> Result<Self, EngineError> {
        let schedule = DelaySchedule {
            tau_bar,
            per_link_bounds,
            source,
        };
        schedule.validate()?;
        Ok(schedule)
    }

    fn validate(&self) -> Result<(), EngineError> {
        for (&(r, s), &b) in &self.per_link_bounds {
            if b > self.tau_bar {
                return Err(EngineError::Delay(format!(
                    "bound {b} on link ({r}, {s}) exceeds tau_bar {}",
                    self.tau_bar
                )));
            }
        }
        let check = |r: usize, s: usize, d: usize| {
            if r == s && d != 0 {
                return Err(EngineError::Delay(format!(
                    "self delay at node {r} must be 0"
                )));
            }
            if d > self.bound(r, s) {
                return Err(EngineError::Delay(format!(
                    "delay {d} on link ({r}, {s}) exceeds its bound {}",
                    self.bound(r, s)
                )));
            }
            Ok(())
        };
        match &self.source {
            DelaySource::Zero | DelaySource::Uniform { .. } => Ok(()),
            DelaySource::PerLink(map) => map.iter().try_for_each(|(&(r, s), &d)| check(r, s, d)),
            DelaySource::Table(map) => map.iter().try_for_each(|(&(_, r, s), &d)| check(r, s, d)),
        }
    }

    pub fn tau_bar(&self) -> usize {
        self.tau_bar
    }

    pub fn source(&self) -> &DelaySource {
        &self.source
    }

    /// Largest delay link `(receiver, sender)` may see.
    pub fn bound(&self, receiver: usize, sender: usize) -> usize {
        if receiver == sender {
            return 0;
        }
        self.per_link_bounds
            .get(&(receiver, sender))
            .copied()
            .unwrap_or(self.tau_bar)
    }

    /// Delay of the message sent at step `k` from `sender` to `receiver`.
    pub fn delay(&self, k: usize, receiver: usize, sender: usize) -> usize {
        if receiver == sender {
            return 0;
        }
        match &self.source {
            DelaySource::Zero => 0,
            DelaySource::Uniform { seed } => {
                let bound = self.bound(receiver, sender);
                if bound == 0 {
                    return 0;
                }
                let mut rng = rng_for(
                    *seed,
                    &[stream::DELAY, k as u64, receiver as u64, sender as u64],
                );
                rng.random_range(0..=bound)
            }
            DelaySource::PerLink(map) => map.get(&(receiver, sender)).copied().unwrap_or(0),
            DelaySource::Table(map) => map.get(&(k, receiver, sender)).copied().unwrap_or(0),
        }
    }

    /// Indicator: 1 when the message sent at `k` on `(receiver, sender)` is delayed by exactly `tau`.
    pub fn indicator(&self, k: usize, receiver: usize, sender: usize, tau: usize) -> u8 {
        u8::from(self.delay(k, receiver, sender) == tau)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_draws_stay_in_bounds_and_cover_range() {
        let d = DelaySchedule::uniform(5, 11);
        let mut seen = [false; 6];
        for k in 0..600 {
            let v = d.delay(k, 1, 0);
            assert!(v <= 5);
            seen[v] = true;
            assert_eq!(d.delay(k, 2, 2), 0);
        }
        assert!(seen.iter().all(|&b| b));
        assert_eq!(
            d.delay(17, 1, 0),
            DelaySchedule::uniform(5, 11).delay(17, 1, 0)
        );
    }

    #[test]
    fn per_link_bounds_cap_draws() {
        let bounds = BTreeMap::from([((1, 0), 1)]);
        let d = DelaySchedule::new(4, bounds, DelaySource::Uniform { seed: 3 }).unwrap();
        assert!((0..200).all(|k| d.delay(k, 1, 0) <= 1));
        assert_eq!(d.bound(0, 1), 4);
    }

    #[test]
    fn rejects_out_of_range_entries() {
        let table = BTreeMap::from([((0, 1, 0), 3)]);
        assert!(DelaySchedule::new(2, BTreeMap::new(), DelaySource::Table(table)).is_err());
        let bounds = BTreeMap::from([((1, 0), 3)]);
        assert!(DelaySchedule::new(2, bounds, DelaySource::Zero).is_err());
        let links = BTreeMap::from([((1, 1), 1)]);
        assert!(DelaySchedule::new(2, BTreeMap::new(), DelaySource::PerLink(links)).is_err());
    }

    #[test]
    fn table_and_indicator() {
        let table = BTreeMap::from([((4, 0, 1), 1), ((4, 1, 0), 2)]);
        let d = DelaySchedule::new(2, BTreeMap::new(), DelaySource::Table(table)).unwrap();
        assert_eq!(d.delay(4, 1, 0), 2);
        assert_eq!(d.delay(5, 1, 0), 0);
        assert_eq!(d.indicator(4, 0, 1, 1), 1);
        assert_eq!(d.indicator(4, 0, 1, 0), 0);
    }
}
