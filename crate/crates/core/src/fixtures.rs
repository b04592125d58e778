//! Reference networks and initial conditions used by tests, bundled
//! configurations and the acceptance suite.

use rand::RngExt;

use crate::graph::Digraph;
use crate::matrix::Matrix;
use crate::seed::rng_for;

/// Five-node strongly connected digraph with out-degrees (2, 2, 1, 1, 2).
pub fn five_node_graph() -> Digraph {
    Digraph::new(
        5,
        [
            (1, 0),
            (2, 0),
            (2, 1),
            (4, 1),
            (4, 2),
            (0, 3),
            (2, 4),
            (3, 4),
        ],
    )
    .expect("static fixture")
}

/// The weight matrix of [`five_node_graph`] as published, entered literally.
pub fn five_node_explicit_weights() -> Matrix {
    Matrix::parse_text(
        "1/3 0   0   1/2 0
         1/3 1/3 0   0   0
         1/3 1/3 1/2 0   1/3
         0   0   0   1/2 1/3
         0   1/3 1/2 0   1/3",
    )
    .expect("static fixture")
}

pub const FIVE_NODE_Y0: [f64; 5] = [-1.0, 2.0, 3.0, 4.0, 2.0];

pub const SWITCHING6_Y0: [f64; 6] = [-1.0, 1.0, 2.0, 3.0, 4.0, 3.0];

/// Two nodes linked both ways.
pub fn two_node_graph() -> Digraph {
    Digraph::complete(2)
}

/// Three nodes: 0 sends to 1 and 2, 1 sends to 0, 2 sends to 1.
pub fn ack_example_graph() -> Digraph {
    Digraph::new(3, [(1, 0), (2, 0), (0, 1), (1, 2)]).expect("static fixture")
}

/// Periodic three-node schedule whose members are never strongly connected
/// but whose consecutive pairs always are: `{0->1, 1->2}` then `{2->0}`.
pub fn periodic3_graphs() -> Vec<Digraph> {
    vec![
        Digraph::new(3, [(1, 0), (2, 1)]).expect("static fixture"),
        Digraph::new(3, [(0, 2)]).expect("static fixture"),
    ]
}

/// Four nodes where node 0 has out-neighbors {1, 2}; the graph stays
/// strongly connected after the link 0 -> 2 is removed.
pub fn ack_four_node_graph() -> Digraph {
    Digraph::new(4, [(1, 0), (2, 0), (2, 1), (3, 2), (0, 3), (3, 1)]).expect("static fixture")
}

/// Random column-stochastic `n x n` matrix. Each entry is kept with
/// probability `density` (the diagonal with probability `diag_density`),
/// drawn from `[0.1, 1)` and columns are then normalised. A column left
/// empty gets one random entry.
pub fn random_column_stochastic(n: usize, density: f64, diag_density: f64, seed: u64) -> Matrix {
    let mut rng = rng_for(seed, &[n as u64]);
    let mut m = Matrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            let p = if i == j { diag_density } else { density };
            if rng.random_bool(p) {
                m.set(j, i, rng.random_range(0.1..1.0));
            }
        }
        if m.column_sum(i) == 0.0 {
            let j = rng.random_range(0..n);
            m.set(j, i, rng.random_range(0.1..1.0));
        }
        let s = m.column_sum(i);
        for j in 0..n {
            m.set(j, i, m.get(j, i) / s);
        }
    }
    m
}

/// Hand-built matrices with known structure: `(name, matrix, is_sia)`.
pub fn structured_matrices() -> Vec<(&'static str, Matrix, bool)> {
    let rows = |r: &[&[f64]]| {
        Matrix::from_rows(&r.iter().map(|x| x.to_vec()).collect::<Vec<_>>())
            .expect("static fixture")
    };
    vec![
        ("swap", rows(&[&[0.0, 1.0], &[1.0, 0.0]]), false),
        ("identity3", Matrix::identity(3), false),
        (
            "two closed blocks",
            rows(&[
                &[0.5, 0.5, 0.0, 0.0],
                &[0.5, 0.5, 0.0, 0.0],
                &[0.0, 0.0, 0.3, 0.6],
                &[0.0, 0.0, 0.7, 0.4],
            ]),
            false,
        ),
        (
            "3-cycle",
            rows(&[&[0.0, 0.0, 1.0], &[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]]),
            false,
        ),
        (
            "bipartite",
            rows(&[
                &[0.0, 0.0, 0.5, 0.2],
                &[0.0, 0.0, 0.5, 0.8],
                &[0.4, 0.3, 0.0, 0.0],
                &[0.6, 0.7, 0.0, 0.0],
            ]),
            false,
        ),
        (
            "3-cycle with self loop",
            rows(&[&[0.5, 0.0, 1.0], &[0.5, 0.0, 0.0], &[0.0, 1.0, 0.0]]),
            true,
        ),
        (
            "cycles of length 2 and 3",
            rows(&[&[0.0, 0.5, 1.0], &[1.0, 0.0, 0.0], &[0.0, 0.5, 0.0]]),
            true,
        ),
        (
            "transient into absorbing",
            rows(&[&[0.5, 0.0, 0.0], &[0.5, 1.0, 0.0], &[0.0, 0.0, 1.0]]),
            false,
        ),
        (
            "transient into single sink",
            rows(&[&[0.2, 0.0], &[0.8, 1.0]]),
            true,
        ),
        ("ratio weights", five_node_explicit_weights(), true),
    ]
}
