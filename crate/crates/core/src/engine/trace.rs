use std::fmt::Write as _;

use super::{spread, SimulationState};
use crate::error::ParseError;

#[derive(Debug, Clone, PartialEq)]
pub struct TraceStep {
    pub k: usize,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
}

impl TraceStep {
    pub fn ratios(&self) -> Vec<f64> {
        self.y.iter().zip(&self.z).map(|(y, z)| y / z).collect()
    }
}

/// Per-step node values of one run, k = 0..=K.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    n: usize,
    steps: Vec<TraceStep>,
}

pub const TRACE_HEADER: &str = "k,node,y,z,mu";

impl Trace {
    pub fn new(n: usize) -> Self {
        Trace {
            n,
            steps: Vec::new(),
        }
    }

    pub fn push(&mut self, state: &SimulationState) {
        self.steps.push(TraceStep {
            k: state.k(),
            y: state.y().to_vec(),
            z: state.z().to_vec(),
        });
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn steps(&self) -> &[TraceStep] {
        &self.steps
    }

    pub fn last(&self) -> &TraceStep {
        self.steps
            .last()
            .expect("a trace always holds the initial state")
    }

    pub fn final_ratios(&self) -> Vec<f64> {
        self.last().ratios()
    }

    pub fn ratio_spreads(&self) -> Vec<f64> {
        self.steps.iter().map(|s| spread(&s.ratios())).collect()
    }

    /// First step from which every later ratio stays within `eps` of `target`.
    pub fn steps_to_within(&self, target: f64, eps: f64) -> Option<usize> {
        let mut first = None;
        for s in &self.steps {
            let inside = s.ratios().iter().all(|m| (m - target).abs() <= eps);
            match (inside, first) {
                (true, None) => first = Some(s.k),
                (false, _) => first = None,
                _ => {}
            }
        }
        first
    }

    /// CSV with header `k,node,y,z,mu`, one row per node per step. Floats
    /// use the shortest representation that round-trips.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.steps.len() * self.n * 48);
        out.push_str(TRACE_HEADER);
        out.push('\n');
        for s in &self.steps {
            for j in 0..self.n {
                let _ = writeln!(
                    out,
                    "{},{},{:?},{:?},{:?}",
                    s.k,
                    j,
                    s.y[j],
                    s.z[j],
                    s.y[j] / s.z[j]
                );
            }
        }
        out
    }

    pub fn spread_csv(&self) -> String {
        let mut out = String::from("k,spread\n");
        for (s, sp) in self.steps.iter().zip(self.ratio_spreads()) {
            let _ = writeln!(out, "{},{sp:?}", s.k);
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self, ParseError> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h.trim() == TRACE_HEADER => {}
            _ => {
                return Err(ParseError::Line {
                    line: 1,
                    message: format!("expected header `{TRACE_HEADER}`"),
                })
            }
        }
        let mut steps: Vec<TraceStep> = Vec::new();
        for (i, line) in lines {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let bad = |m: &str| ParseError::Line {
                line: i + 1,
                message: m.to_string(),
            };
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 5 {
                return Err(bad("expected 5 fields"));
            }
            let k: usize = f[0].parse().map_err(|_| bad("bad step"))?;
            let node: usize = f[1].parse().map_err(|_| bad("bad node"))?;
            let y: f64 = f[2].parse().map_err(|_| bad("bad y"))?;
            let z: f64 = f[3].parse().map_err(|_| bad("bad z"))?;
            if steps.last().map(|s| s.k) != Some(k) {
                steps.push(TraceStep {
                    k,
                    y: Vec::new(),
                    z: Vec::new(),
                });
            }
            let s = steps.last_mut().expect("just pushed");
            if node != s.y.len() {
                return Err(bad("nodes must be listed in order"));
            }
            s.y.push(y);
            s.z.push(z);
        }
        let n = steps.first().map(|s| s.y.len()).unwrap_or(0);
        if n == 0 || steps.iter().any(|s| s.y.len() != n) {
            return Err(ParseError::Line {
                line: 0,
                message: "every step must list the same nodes".into(),
            });
        }
        Ok(Trace { n, steps })
    }
}
