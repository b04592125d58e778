//! Column-stochastic weight matrices for the ratio protocol and the
//! doubly-stochastic weights used by the single-iteration baseline.
//!
//! Entry `(l, j)` is the weight node `j` puts on its link to node `l`; the
//! diagonal is the self weight. Columns therefore describe where a node's
//! mass goes, and each column sums to one.

use std::ops::Deref;

use crate::error::WeightError;
use crate::graph::Digraph;
use crate::matrix::Matrix;

/// Column-sum tolerance for a valid weight matrix.
pub const COLUMN_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix(Matrix);

impl WeightMatrix {
    /// Wraps a matrix after checking it against `g`.
    pub fn new(m: Matrix, g: &Digraph) -> Result<Self, WeightError> {
        let report = validate_column_stochastic(&m, g);
        if report.is_clean() {
            Ok(WeightMatrix(m))
        } else {
            Err(WeightError::Invalid(report.summary()))
        }
    }

    /// Wraps a matrix without checking it. Used for deliberately broken
    /// inputs in tests and for matrices validated elsewhere.
    pub fn new_unchecked(m: Matrix) -> Self {
        WeightMatrix(m)
    }

    pub fn matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }
}

impl Deref for WeightMatrix {
    type Target = Matrix;

    fn deref(&self) -> &Matrix {
        &self.0
    }
}

/// `p_lj = 1 / (1 + D_j^+)` on `j` itself and on each out-neighbor of `j`.
pub fn out_degree_weights(g: &Digraph) -> WeightMatrix {
    let n = g.n();
    let mut m = Matrix::zeros(n);
    for j in 0..n {
        let outs = g.out_neighbors(j);
        let w = 1.0 / (1 + outs.len()) as f64;
        m.set(j, j, w);
        for l in outs {
            m.set(l, j, w);
        }
    }
    WeightMatrix(m)
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    /// Set when the matrix order differs from the graph's node count; no
    /// other check is run in that case.
    pub dimension_mismatch: Option<(usize, usize)>,
    /// `(column, |sum - 1|)` for every column outside tolerance.
    pub column_deviations: Vec<(usize, f64)>,
    /// Positive off-diagonal entries `(l, j)` with no edge `(l, j)`.
    pub structure_violations: Vec<(usize, usize)>,
    pub negative_entries: Vec<(usize, usize)>,
    pub zero_diagonals: Vec<usize>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.dimension_mismatch.is_none()
            && self.column_deviations.is_empty()
            && self.structure_violations.is_empty()
            && self.negative_entries.is_empty()
            && self.zero_diagonals.is_empty()
    }

    pub fn summary(&self) -> String {
        if self.is_clean() {
            return "clean".into();
        }
        let mut parts = Vec::new();
        if let Some((m, g)) = self.dimension_mismatch {
            parts.push(format!("matrix order {m} but graph has {g} nodes"));
        }
        for (c, d) in &self.column_deviations {
            parts.push(format!("column {c} sum off by {d:e}"));
        }
        for (l, j) in &self.structure_violations {
            parts.push(format!("positive entry ({l}, {j}) without an edge"));
        }
        for (l, j) in &self.negative_entries {
            parts.push(format!("negative entry ({l}, {j})"));
        }
        for d in &self.zero_diagonals {
            parts.push(format!("zero self weight at node {d}"));
        }
        parts.join("; ")
    }
}

/// Checks column sums, support against `g`, signs and self weights.
pub fn validate_column_stochastic(w: &Matrix, g: &Digraph) -> ValidationReport {
    let mut report = ValidationReport::default();
    if w.n() != g.n() {
        report.dimension_mismatch = Some((w.n(), g.n()));
        return report;
    }
    let n = w.n();
    for j in 0..n {
        let dev = (w.column_sum(j) - 1.0).abs();
        if dev > COLUMN_SUM_TOL {
            report.column_deviations.push((j, dev));
        }
        if w.get(j, j) <= 0.0 {
            report.zero_diagonals.push(j);
        }
        for l in 0..n {
            let v = w.get(l, j);
            if v < 0.0 {
                report.negative_entries.push((l, j));
            } else if v > 0.0 && l != j && !g.has_edge(l, j) {
                report.structure_violations.push((l, j));
            }
        }
    }
    report
}

/// Metropolis-style symmetric doubly-stochastic weights:
/// `p'_lj = 1 / max(1 + D_l, 1 + D_j)` on edges, diagonal takes the rest.
pub fn doubly_stochastic_weights(g: &Digraph) -> Result<WeightMatrix, WeightError> {
    if let Some((r, s)) = g.edges().find(|&(r, s)| !g.has_edge(s, r)) {
        return Err(WeightError::Asymmetric {
            receiver: r,
            sender: s,
        });
    }
    let n = g.n();
    let deg: Vec<usize> = (0..n).map(|j| g.out_degree(j)).collect();
    let mut m = Matrix::zeros(n);
    for (l, j) in g.edges() {
        m.set(l, j, 1.0 / (1 + deg[l].max(deg[j])) as f64);
    }
    for j in 0..n {
        let off: f64 = (0..n).filter(|&l| l != j).map(|l| m.get(l, j)).sum();
        m.set(j, j, 1.0 - off);
    }
    Ok(WeightMatrix(m))
}
