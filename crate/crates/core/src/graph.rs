//! Directed graphs, connectivity, unions over time windows and seeded
//! random generators.
//!
//! An edge is stored as the ordered pair `(receiver, sender)`: the pair
//! `(j, i)` is a link over which node `i` sends to node `j`. Nodes are the
//! positional indices `0..n`. Self-loops are never stored; every node's
//! access to its own value is implicit.

use std::borrow::Cow;
use std::collections::BTreeSet;
use std::fmt::Write as _;

use rand::RngExt;

use crate::error::{GraphError, ParseError};
use crate::seed::{rng_for, stream};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Digraph {
    n: usize,
    edges: BTreeSet<(usize, usize)>,
}

impl Digraph {
    pub fn new(
        n: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self, GraphError> {
        if n == 0 {
            return Err(GraphError::NoNodes);
        }
        let mut set = BTreeSet::new();
        for (receiver, sender) in edges {
            if receiver >= n || sender >= n {
                return Err(GraphError::OutOfRange {
                    receiver,
                    sender,
                    n,
                });
            }
            if receiver == sender {
                return Err(GraphError::SelfLoop(receiver));
            }
            set.insert((receiver, sender));
        }
        Ok(Digraph { n, edges: set })
    }

    pub fn empty(n: usize) -> Self {
        assert!(n > 0, "graph must have at least one node");
        Digraph {
            n,
            edges: BTreeSet::new(),
        }
    }

    pub fn complete(n: usize) -> Self {
        let edges = (0..n)
            .flat_map(|j| (0..n).filter(move |&i| i != j).map(move |i| (j, i)))
            .collect();
        Digraph { n, edges }
    }

    /// Directed cycle `0 -> 1 -> ... -> n-1 -> 0`.
    pub fn cycle(n: usize) -> Self {
        if n < 2 {
            return Self::empty(n);
        }
        Digraph {
            n,
            edges: (0..n).map(|i| ((i + 1) % n, i)).collect(),
        }
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    /// Edges as `(receiver, sender)` pairs in ascending order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn has_edge(&self, receiver: usize, sender: usize) -> bool {
        self.edges.contains(&(receiver, sender))
    }

    /// Nodes that receive from `j`, ascending.
    pub fn out_neighbors(&self, j: usize) -> Vec<usize> {
        self.edges
            .iter()
            .filter(|&&(_, s)| s == j)
            .map(|&(r, _)| r)
            .collect()
    }

    /// Nodes that send to `j`, ascending.
    pub fn in_neighbors(&self, j: usize) -> Vec<usize> {
        self.edges
            .range((j, 0)..(j + 1, 0))
            .map(|&(_, s)| s)
            .collect()
    }

    pub fn out_degree(&self, j: usize) -> usize {
        self.edges.iter().filter(|&&(_, s)| s == j).count()
    }

    pub fn in_degree(&self, j: usize) -> usize {
        self.edges.range((j, 0)..(j + 1, 0)).count()
    }

    pub fn max_out_degree(&self) -> usize {
        (0..self.n).map(|j| self.out_degree(j)).max().unwrap_or(0)
    }

    /// Every edge has its reverse.
    pub fn is_symmetric(&self) -> bool {
        self.edges.iter().all(|&(r, s)| self.has_edge(s, r))
    }

    pub fn without_edge(&self, receiver: usize, sender: usize) -> Digraph {
        let mut g = self.clone();
        g.edges.remove(&(receiver, sender));
        g
    }

    pub fn with_edge(&self, receiver: usize, sender: usize) -> Result<Digraph, GraphError> {
        Digraph::new(self.n, self.edges().chain([(receiver, sender)]))
    }

    /// Successor lists in the direction information flows (sender to receiver).
    pub fn successors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n];
        for &(r, s) in &self.edges {
            adj[s].push(r);
        }
        adj
    }

    pub fn is_strongly_connected(&self) -> bool {
        strongly_connected_components(&self.successors()).len() == 1
    }

    /// Edge-list text: header `n=<count>`, then one `receiver sender` pair per line.
    pub fn to_edge_list(&self) -> String {
        let mut s = format!("n={}\n", self.n);
        for (r, snd) in self.edges() {
            let _ = writeln!(s, "{r} {snd}");
        }
        s
    }

    pub fn parse_edge_list(text: &str) -> Result<Digraph, GraphError> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty());
        let (hline, header) = lines.next().ok_or(ParseError::MissingHeader)?;
        let n: usize = header
            .strip_prefix("n=")
            .ok_or(ParseError::MissingHeader)?
            .trim()
            .parse()
            .map_err(|_| ParseError::Line {
                line: hline,
                message: format!("bad node count in `{header}`"),
            })?;
        let mut edges = Vec::new();
        for (line, l) in lines {
            let parts: Vec<&str> = l.split_whitespace().collect();
            let parsed: Option<(usize, usize)> = match parts.as_slice() {
                [a, b] => a.parse().ok().zip(b.parse().ok()),
                _ => None,
            };
            let pair = parsed.ok_or_else(|| ParseError::Line {
                line,
                message: format!("expected `receiver sender`, got `{l}`"),
            })?;
            edges.push(pair);
        }
        Digraph::new(n, edges)
    }
}

/// Tarjan's algorithm, iterative. `adj[u]` lists the successors of `u`.
/// Components are returned in reverse topological order of the condensation
/// (sink components first).
pub fn strongly_connected_components(adj: &[Vec<usize>]) -> Vec<Vec<usize>> {
    const UNVISITED: usize = usize::MAX;
    let n = adj.len();
    let mut index = vec![UNVISITED; n];
    let mut low = vec![0; n];
    let mut on_stack = vec![false; n];
    let mut stack = Vec::new();
    let mut comps = Vec::new();
    let mut next = 0;
    // (node, position in its successor list)
    let mut call: Vec<(usize, usize)> = Vec::new();

    for root in 0..n {
        if index[root] != UNVISITED {
            continue;
        }
        call.push((root, 0));
        index[root] = next;
        low[root] = next;
        next += 1;
        stack.push(root);
        on_stack[root] = true;

        while let Some(&mut (v, ref mut pos)) = call.last_mut() {
            if let Some(&w) = adj[v].get(*pos) {
                *pos += 1;
                if index[w] == UNVISITED {
                    index[w] = next;
                    low[w] = next;
                    next += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    call.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
                continue;
            }
            call.pop();
            if let Some(&(parent, _)) = call.last() {
                low[parent] = low[parent].min(low[v]);
            }
            if low[v] == index[v] {
                let mut comp = Vec::new();
                loop {
                    let w = stack.pop().expect("tarjan stack underflow");
                    on_stack[w] = false;
                    comp.push(w);
                    if w == v {
                        break;
                    }
                }
                comp.sort_unstable();
                comps.push(comp);
            }
        }
    }
    comps
}

/// Union of edge sets. All graphs must share the same node count.
pub fn union(gs: &[Digraph]) -> Result<Digraph, GraphError> {
    let first = gs.first().ok_or(GraphError::EmptyUnion)?;
    let mut edges = BTreeSet::new();
    for g in gs {
        if g.n != first.n {
            return Err(GraphError::NodeCountMismatch(first.n, g.n));
        }
        edges.extend(g.edges.iter().copied());
    }
    Ok(Digraph { n: first.n, edges })
}

/// A time-indexed topology `G[k]`.
#[derive(Debug, Clone, PartialEq)]
pub enum DigraphSequence {
    /// The same graph at every step.
    Static(Digraph),
    /// An explicit list of graphs, repeated cyclically past its end.
    Periodic(Vec<Digraph>),
    /// A fresh [`random_digraph`] at every step, drawn from a per-step seed.
    RandomPerStep { n: usize, p: f64, seed: u64 },
}

impl DigraphSequence {
    pub fn periodic(graphs: Vec<Digraph>) -> Result<Self, GraphError> {
        let first = graphs.first().ok_or(GraphError::EmptyUnion)?;
        if let Some(g) = graphs.iter().find(|g| g.n != first.n) {
            return Err(GraphError::NodeCountMismatch(first.n, g.n));
        }
        Ok(DigraphSequence::Periodic(graphs))
    }

    pub fn random_per_step(n: usize, p: f64, seed: u64) -> Result<Self, GraphError> {
        check_probability(p)?;
        if n == 0 {
            return Err(GraphError::NoNodes);
        }
        Ok(DigraphSequence::RandomPerStep { n, p, seed })
    }

    pub fn n(&self) -> usize {
        match self {
            DigraphSequence::Static(g) => g.n,
            DigraphSequence::Periodic(gs) => gs[0].n,
            DigraphSequence::RandomPerStep { n, .. } => *n,
        }
    }

    pub fn is_static(&self) -> bool {
        matches!(self, DigraphSequence::Static(_))
    }

    /// The graph in force at step `k`.
    pub fn at(&self, k: usize) -> Cow<'_, Digraph> {
        match self {
            DigraphSequence::Static(g) => Cow::Borrowed(g),
            DigraphSequence::Periodic(gs) => Cow::Borrowed(&gs[k % gs.len()]),
            DigraphSequence::RandomPerStep { n, p, seed } => {
                let step_seed = crate::seed::derive_seed(*seed, &[stream::TOPOLOGY_STEP, k as u64]);
                Cow::Owned(random_digraph(*n, *p, step_seed).expect("validated at construction"))
            }
        }
    }

    pub fn union_over(&self, range: std::ops::Range<usize>) -> Result<Digraph, GraphError> {
        let gs: Vec<Digraph> = range.map(|k| self.at(k).into_owned()).collect();
        union(&gs)
    }
}

/// True iff the union over every window `[t_m, t_{m+1})` is strongly
/// connected. `window_starts` must begin at 0, be strictly increasing and
/// contain at least two entries (the last entry closes the final window).
pub fn is_jointly_strongly_connected(
    seq: &DigraphSequence,
    window_starts: &[usize],
) -> Result<bool, GraphError> {
    let ok = window_starts.len() >= 2
        && window_starts[0] == 0
        && window_starts.windows(2).all(|w| w[0] < w[1]);
    if !ok {
        return Err(GraphError::BadWindows(window_starts.to_vec()));
    }
    for w in window_starts.windows(2) {
        if !seq.union_over(w[0]..w[1])?.is_strongly_connected() {
            return Ok(false);
        }
    }
    Ok(true)
}

fn check_probability(p: f64) -> Result<(), GraphError> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(GraphError::BadProbability(p))
    }
}

/// Each ordered pair `(j, i)`, `j != i`, is an edge independently with
/// probability `p`. Pairs are visited in ascending `(receiver, sender)` order.
pub fn random_digraph(n: usize, p: f64, seed: u64) -> Result<Digraph, GraphError> {
    check_probability(p)?;
    if n == 0 {
        return Err(GraphError::NoNodes);
    }
    let mut rng = rng_for(seed, &[stream::GRAPH]);
    let mut edges = BTreeSet::new();
    for j in 0..n {
        for i in 0..n {
            if i != j && rng.random_bool(p) {
                edges.insert((j, i));
            }
        }
    }
    Ok(Digraph { n, edges })
}

/// Nodes placed uniformly in the unit square; every pair within Euclidean
/// distance `radius` is joined in both directions.
pub fn random_geometric_digraph(n: usize, radius: f64, seed: u64) -> Result<Digraph, GraphError> {
    if radius.is_nan() || radius <= 0.0 {
        return Err(GraphError::BadRadius(radius));
    }
    if n == 0 {
        return Err(GraphError::NoNodes);
    }
    let mut rng = rng_for(seed, &[stream::GRAPH]);
    let points: Vec<(f64, f64)> = (0..n).map(|_| (rng.random(), rng.random())).collect();
    let mut edges = BTreeSet::new();
    for a in 0..n {
        for b in (a + 1)..n {
            let (dx, dy) = (points[a].0 - points[b].0, points[a].1 - points[b].1);
            if (dx * dx + dy * dy).sqrt() <= radius {
                edges.insert((a, b));
                edges.insert((b, a));
            }
        }
    }
    Ok(Digraph { n, edges })
}

/// Draws geometric graphs with derived seeds until one is strongly connected.
pub fn random_geometric_strongly_connected(
    n: usize,
    radius: f64,
    seed: u64,
    max_attempts: usize,
) -> Result<Digraph, GraphError> {
    for attempt in 0..max_attempts {
        let s = crate::seed::derive_seed(seed, &[stream::REJECTION, attempt as u64]);
        let g = random_geometric_digraph(n, radius, s)?;
        if g.is_strongly_connected() {
            return Ok(g);
        }
    }
    Err(GraphError::RejectionExhausted(max_attempts))
}
