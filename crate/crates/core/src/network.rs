//! Time-varying undirected communication graphs and their mixing matrices.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream, Purpose};
use crate::Matrix;

/// Undirected edge `(i, j)` with `i < j`, 0-based.
pub type Edge = (usize, usize);

/// Sorted, duplicate-free list of undirected edges.
pub type EdgeSet = Vec<Edge>;

/// Random graph per round plus a rotating chain backbone.
///
/// Every unordered pair is connected with probability `edge_prob`,
/// independently per round. With the backbone on, the chain `1 - 2 - … - n`
/// is split into four consecutive blocks of `⌈n/4⌉` link indices and block
/// `k` is added at rounds `t ≡ k + 1 (mod 4)`; for `n = 100` these are the
/// links `(i, i+1)` for `i ∈ [1, 24]`, `[25, 49]`, `[50, 74]`, `[75, 99]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraphSchedule {
    pub n: usize,
    pub edge_prob: f64,
    pub backbone: bool,
    pub seed: u64,
}

impl GraphSchedule {
    pub fn new(n: usize, edge_prob: f64, backbone: bool, seed: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("n", "need at least one agent"));
        }
        if !(0.0..=1.0).contains(&edge_prob) {
            return Err(Error::invalid(
                "edge_prob",
                format!("must lie in [0, 1], got {edge_prob}"),
            ));
        }
        Ok(Self {
            n,
            edge_prob,
            backbone,
            seed,
        })
    }

    /// Backbone links active at round `t` (1-based rounds).
    pub fn backbone_edges(&self, t: usize) -> EdgeSet {
        let n = self.n;
        if !self.backbone || n < 2 {
            return Vec::new();
        }
        let block = n.div_ceil(4);
        let k = (t - 1) % 4;
        // 1-based link index i joins nodes i and i+1.
        let first = (k * block).max(1);
        let last = ((k + 1) * block - 1).min(n - 1);
        (first..=last).map(|i| (i - 1, i)).collect()
    }

    pub fn generate_round_graph(&self, t: usize) -> EdgeSet {
        assert!(t >= 1, "rounds start at 1");
        let mut adjacency = vec![false; self.n * self.n];
        if self.edge_prob > 0.0 {
            let mut rng = stream(self.seed, 0, t, Purpose::Graph);
            for i in 0..self.n {
                for j in (i + 1)..self.n {
                    // Always draw so that the stream layout does not depend on
                    // the probability.
                    let draw: f64 = rng.random();
                    if draw < self.edge_prob {
                        adjacency[i * self.n + j] = true;
                    }
                }
            }
        }
        for (i, j) in self.backbone_edges(t) {
            adjacency[i * self.n + j] = true;
        }
        let mut edges = Vec::new();
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                if adjacency[i * self.n + j] {
                    edges.push((i, j));
                }
            }
        }
        edges
    }
}

/// Doubly stochastic weights of one round.
#[derive(Debug, Clone, PartialEq)]
pub struct MixingMatrix {
    pub weights: Matrix,
    /// Every positive entry is at least this large.
    pub w_floor: f64,
}

impl MixingMatrix {
    pub fn n(&self) -> usize {
        self.weights.nrows()
    }
}

/// `W_ij = 1/n` on edges, `W_ii = 1 - Σ_{j≠i} W_ij`, zero elsewhere.
pub fn build_mixing(edges: &[Edge], n: usize) -> MixingMatrix {
    let w = 1.0 / n as f64;
    let mut weights = Matrix::zeros(n, n);
    for &(i, j) in edges {
        debug_assert!(i != j && i < n && j < n);
        weights[(i, j)] = w;
        weights[(j, i)] = w;
    }
    for i in 0..n {
        let off: f64 = (0..n).filter(|&j| j != i).map(|j| weights[(i, j)]).sum();
        weights[(i, i)] = 1.0 - off;
    }
    MixingMatrix {
        weights,
        w_floor: w,
    }
}

pub fn validate_double_stochasticity(w: &Matrix, tol: f64) -> bool {
    if w.nrows() != w.ncols() {
        return false;
    }
    let rows_ok = w.row_iter().all(|r| (r.sum() - 1.0).abs() <= tol);
    let cols_ok = w.column_iter().all(|c| (c.sum() - 1.0).abs() <= tol);
    rows_ok && cols_ok && w.iter().all(|&x| x >= -tol)
}

/// Checks the positive-weight floor and zero pattern of a mixing matrix
/// against its edge set.
pub fn validate_weight_floor(mix: &MixingMatrix, edges: &[Edge]) -> bool {
    let n = mix.n();
    let mut linked = vec![false; n * n];
    for &(i, j) in edges {
        linked[i * n + j] = true;
        linked[j * n + i] = true;
    }
    (0..n).all(|i| {
        (0..n).all(|j| {
            let x = mix.weights[(i, j)];
            if i == j || linked[i * n + j] {
                x >= mix.w_floor && x <= 1.0
            } else {
                x == 0.0
            }
        })
    })
}

struct DisjointSet {
    parent: Vec<usize>,
    rank: Vec<u8>,
    components: usize,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            rank: vec![0; n],
            components: n,
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
        self.components -= 1;
    }
}

/// True iff the union of every `window` consecutive edge sets connects all
/// `n` nodes. Undirected connectivity is strong connectivity of the
/// symmetric digraph.
pub fn validate_joint_connectivity(graphs: &[EdgeSet], n: usize, window: usize) -> Result<bool> {
    if window == 0 {
        return Err(Error::invalid("window", "must be positive"));
    }
    if graphs.len() < window {
        return Err(Error::invalid(
            "graphs",
            format!("need at least {window} rounds, got {}", graphs.len()),
        ));
    }
    for start in 0..=(graphs.len() - window) {
        let mut dsu = DisjointSet::new(n);
        for edges in &graphs[start..start + window] {
            for &(i, j) in edges {
                dsu.union(i, j);
            }
        }
        if dsu.components != 1 {
            return Ok(false);
        }
    }
    Ok(true)
}
