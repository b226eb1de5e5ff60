//! Tree topologies and the homogeneous zero-field Ising tree model.
//!
//! Every edge of the model carries the same correlation `rho`; equivalently,
//! a child spin disagrees with its parent with flip probability
//! `theta = (1 - rho) / 2`. On a tree this admits exact ancestral sampling:
//! draw the root uniformly in {+1, -1} and propagate outward, flipping each
//! child independently with probability `theta`. Correlations decay along
//! paths as `rho^distance`.

use alloc::collections::BinaryHeap;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Reverse;

use crate::error::{Error, Result};
use crate::rng::Rng;

/// An undirected tree on nodes `0..p`.
///
/// Construction verifies exactly `p - 1` edges, no self-loops or duplicates,
/// and connectivity. Edges are stored normalized (`u < v`) and sorted, so two
/// topologies are equal iff their edge slices are equal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeTopology {
    p: usize,
    edges: Vec<(usize, usize)>,
    adjacency: Vec<Vec<usize>>,
    max_degree: usize,
}

impl TreeTopology {
    pub fn new(p: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if p == 0 {
            return Err(Error::InvalidSize {
                what: "tree node count",
                got: 0,
            });
        }
        if edges.len() != p - 1 {
            return Err(Error::NotATree {
                reason: "edge count is not p - 1",
            });
        }
        let mut normalized = Vec::with_capacity(edges.len());
        for &(a, b) in edges {
            if a >= p {
                return Err(Error::NodeOutOfRange { node: a, p });
            }
            if b >= p {
                return Err(Error::NodeOutOfRange { node: b, p });
            }
            if a == b {
                return Err(Error::NotATree {
                    reason: "self-loop",
                });
            }
            normalized.push((a.min(b), a.max(b)));
        }
        normalized.sort_unstable();
        if normalized.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::NotATree {
                reason: "duplicate edge",
            });
        }
        // p - 1 distinct edges and no cycle imply connectivity.
        let mut uf = UnionFind::new(p);
        for &(u, v) in &normalized {
            if !uf.union(u, v) {
                return Err(Error::NotATree { reason: "cycle" });
            }
        }
        let mut adjacency = vec![Vec::new(); p];
        for &(u, v) in &normalized {
            adjacency[u].push(v);
            adjacency[v].push(u);
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        let max_degree = adjacency.iter().map(Vec::len).max().unwrap_or(0);
        Ok(TreeTopology {
            p,
            edges: normalized,
            adjacency,
            max_degree,
        })
    }

    pub fn node_count(&self) -> usize {
        self.p
    }

    /// Edges normalized `(u, v)` with `u < v`, in sorted order.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn degree(&self, node: usize) -> usize {
        self.adjacency[node].len()
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    pub fn neighbors(&self, node: usize) -> &[usize] {
        &self.adjacency[node]
    }

    pub fn contains_edge(&self, u: usize, v: usize) -> bool {
        let key = (u.min(v), u.max(v));
        self.edges.binary_search(&key).is_ok()
    }

    /// Whether the node count dominates the maximal degree by the factor the
    /// active algorithm's analysis assumes (`p >= 82 d`). Checked, never
    /// enforced.
    pub fn satisfies_degree_assumption(&self) -> bool {
        self.p >= 82 * self.max_degree
    }

    /// Number of edges on the unique path between `u` and `v`.
    pub fn path_distance(&self, u: usize, v: usize) -> Result<usize> {
        if u >= self.p {
            return Err(Error::NodeOutOfRange { node: u, p: self.p });
        }
        if v >= self.p {
            return Err(Error::NodeOutOfRange { node: v, p: self.p });
        }
        if u == v {
            return Ok(0);
        }
        let mut dist = vec![usize::MAX; self.p];
        let mut queue = alloc::collections::VecDeque::new();
        dist[u] = 0;
        queue.push_back(u);
        while let Some(x) = queue.pop_front() {
            for &y in &self.adjacency[x] {
                if dist[y] == usize::MAX {
                    dist[y] = dist[x] + 1;
                    if y == v {
                        return Ok(dist[y]);
                    }
                    queue.push_back(y);
                }
            }
        }
        unreachable!("tree is connected");
    }

    /// `(node, parent)` pairs in BFS order from node 0, root first with a
    /// sentinel parent equal to itself. Fixed traversal order keeps sampling
    /// deterministic.
    fn bfs_order(&self) -> Vec<(usize, usize)> {
        let mut order = Vec::with_capacity(self.p);
        let mut visited = vec![false; self.p];
        let mut queue = alloc::collections::VecDeque::new();
        visited[0] = true;
        order.push((0, 0));
        queue.push_back(0);
        while let Some(x) = queue.pop_front() {
            for &y in &self.adjacency[x] {
                if !visited[y] {
                    visited[y] = true;
                    order.push((y, x));
                    queue.push_back(y);
                }
            }
        }
        order
    }
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    fn root(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Returns false if `x` and `y` were already connected.
    fn union(&mut self, x: usize, y: usize) -> bool {
        let rx = self.root(x);
        let ry = self.root(y);
        if rx == ry {
            return false;
        }
        self.parent[rx.max(ry)] = rx.min(ry);
        true
    }
}

/// Path graph 0-1-...-(p-1).
pub fn build_chain(p: usize) -> Result<TreeTopology> {
    if p < 2 {
        return Err(Error::InvalidSize {
            what: "chain node count",
            got: p,
        });
    }
    let edges: Vec<_> = (0..p - 1).map(|i| (i, i + 1)).collect();
    TreeTopology::new(p, &edges)
}

/// Backbone chain over nodes `0..p/2` with one leaf (`p/2 + i`) hanging off
/// each backbone node `i`. All nodes observed; max degree 3.
pub fn build_hmm(p: usize) -> Result<TreeTopology> {
    if p < 4 || !p.is_multiple_of(2) {
        return Err(Error::InvalidSize {
            what: "hmm node count (even, >= 4)",
            got: p,
        });
    }
    let half = p / 2;
    let mut edges = Vec::with_capacity(p - 1);
    for i in 0..half - 1 {
        edges.push((i, i + 1));
    }
    for i in 0..half {
        edges.push((i, half + i));
    }
    TreeTopology::new(p, &edges)
}

/// Complete binary tree with `2^levels - 1` nodes in heap layout: node `k`
/// has children `2k + 1` and `2k + 2` where present.
pub fn build_binary_tree(levels: u32) -> Result<TreeTopology> {
    if levels < 1 {
        return Err(Error::InvalidSize {
            what: "binary tree levels",
            got: 0,
        });
    }
    let p = (1usize << levels) - 1;
    let mut edges = Vec::with_capacity(p.saturating_sub(1));
    for k in 0..p {
        for child in [2 * k + 1, 2 * k + 2] {
            if child < p {
                edges.push((k, child));
            }
        }
    }
    TreeTopology::new(p, &edges)
}

/// Uniformly random labeled tree, drawn by decoding a uniform Prüfer
/// sequence. Deterministic given the generator state.
pub fn build_random_tree(p: usize, rng: &mut Rng) -> Result<TreeTopology> {
    if p < 2 {
        return Err(Error::InvalidSize {
            what: "random tree node count",
            got: p,
        });
    }
    if p == 2 {
        return TreeTopology::new(2, &[(0, 1)]);
    }
    let seq: Vec<usize> = (0..p - 2).map(|_| rng.below(p)).collect();
    let mut degree = vec![1usize; p];
    for &a in &seq {
        degree[a] += 1;
    }
    let mut leaves: BinaryHeap<Reverse<usize>> = (0..p)
        .filter(|&i| degree[i] == 1)
        .map(Reverse)
        .collect();
    let mut edges = Vec::with_capacity(p - 1);
    for &a in &seq {
        let Reverse(leaf) = leaves.pop().expect("prufer decode invariant");
        edges.push((leaf, a));
        degree[a] -= 1;
        if degree[a] == 1 {
            leaves.push(Reverse(a));
        }
    }
    let Reverse(u) = leaves.pop().expect("two leaves remain");
    let Reverse(v) = leaves.pop().expect("two leaves remain");
    edges.push((u, v));
    TreeTopology::new(p, &edges)
}

/// A batch of ±1 samples over an ordered node subset.
///
/// Logically an `m x |nodes|` matrix stored row-major; column `j` holds the
/// values of `nodes[j]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleBlock {
    nodes: Vec<usize>,
    m: usize,
    data: Vec<i8>,
}

impl SampleBlock {
    pub fn empty(nodes: Vec<usize>) -> Self {
        SampleBlock {
            nodes,
            m: 0,
            data: Vec::new(),
        }
    }

    /// Builds a block from row-major ±1 data: `m` rows, one column per node.
    pub fn from_rows(nodes: Vec<usize>, m: usize, data: Vec<i8>) -> Result<Self> {
        if data.len() != m * nodes.len() {
            return Err(Error::InvalidArgument(
                "data length must be m * node count",
            ));
        }
        if data.iter().any(|&x| x != 1 && x != -1) {
            return Err(Error::InvalidArgument("entries must be +1 or -1"));
        }
        Ok(SampleBlock { nodes, m, data })
    }

    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.m
    }

    pub fn is_empty(&self) -> bool {
        self.m == 0
    }

    /// Value of column `col` in sample `sample`.
    #[inline]
    pub fn value(&self, sample: usize, col: usize) -> i8 {
        self.data[sample * self.nodes.len() + col]
    }

    pub fn row(&self, sample: usize) -> &[i8] {
        let w = self.nodes.len();
        &self.data[sample * w..(sample + 1) * w]
    }
}

/// Homogeneous zero-field Ising model on a tree, parameterized by the edge
/// correlation `rho` in (0,1). The flip probability `theta = (1 - rho) / 2`
/// is always derived, never stored, so the two cannot drift apart.
#[derive(Debug, Clone, PartialEq)]
pub struct IsingTreeModel {
    topology: TreeTopology,
    rho: f64,
}

impl IsingTreeModel {
    pub fn new(topology: TreeTopology, rho: f64) -> Result<Self> {
        if !(rho > 0.0 && rho < 1.0) {
            return Err(Error::InvalidRho(rho));
        }
        Ok(IsingTreeModel { topology, rho })
    }

    pub fn topology(&self) -> &TreeTopology {
        &self.topology
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn theta(&self) -> f64 {
        (1.0 - self.rho) / 2.0
    }

    pub fn node_count(&self) -> usize {
        self.topology.node_count()
    }

    /// Exact correlation `rho^{dist(u, v)}` by correlation decay.
    pub fn exact_correlation(&self, u: usize, v: usize) -> Result<f64> {
        if u == v {
            return Err(Error::InvalidArgument(
                "exact correlation requires distinct nodes",
            ));
        }
        let dist = self.topology.path_distance(u, v)?;
        Ok(libm::pow(self.rho, dist as f64))
    }

    /// `m` i.i.d. full-vector samples: the root (node 0) is a uniform sign
    /// and each child equals its parent with probability `1 - theta`.
    pub fn sample_vectors(&self, m: usize, rng: &mut Rng) -> Result<SampleBlock> {
        if m == 0 {
            return Err(Error::InvalidSize {
                what: "sample count",
                got: 0,
            });
        }
        let p = self.topology.node_count();
        let order = self.topology.bfs_order();
        let theta = self.theta();
        let mut data = vec![0i8; m * p];
        let mut values = vec![0i8; p];
        for s in 0..m {
            for &(node, parent) in &order {
                values[node] = if node == parent {
                    rng.sign()
                } else if rng.bernoulli(theta) {
                    -values[parent]
                } else {
                    values[parent]
                };
            }
            data[s * p..(s + 1) * p].copy_from_slice(&values);
        }
        Ok(SampleBlock {
            nodes: (0..p).collect(),
            m,
            data,
        })
    }

    /// `m` i.i.d. samples of the exact marginal law of `nodes`, implemented
    /// by drawing full vectors internally and exposing only the requested
    /// columns. Budget accounting is the caller's concern, not this
    /// operation's.
    pub fn sample_subvector(&self, nodes: &[usize], m: usize, rng: &mut Rng) -> Result<SampleBlock> {
        if nodes.is_empty() {
            return Err(Error::InvalidArgument("subset must be nonempty"));
        }
        let p = self.topology.node_count();
        for &node in nodes {
            if node >= p {
                return Err(Error::NodeOutOfRange { node, p });
            }
        }
        let mut seen = vec![false; p];
        for &node in nodes {
            if seen[node] {
                return Err(Error::InvalidArgument("subset contains duplicates"));
            }
            seen[node] = true;
        }
        if m == 0 {
            return Err(Error::InvalidSize {
                what: "sample count",
                got: 0,
            });
        }
        let order = self.topology.bfs_order();
        let theta = self.theta();
        let w = nodes.len();
        let mut data = vec![0i8; m * w];
        let mut values = vec![0i8; p];
        for s in 0..m {
            for &(node, parent) in &order {
                values[node] = if node == parent {
                    rng.sign()
                } else if rng.bernoulli(theta) {
                    -values[parent]
                } else {
                    values[parent]
                };
            }
            for (j, &node) in nodes.iter().enumerate() {
                data[s * w + j] = values[node];
            }
        }
        Ok(SampleBlock {
            nodes: nodes.to_vec(),
            m,
            data,
        })
    }
}
