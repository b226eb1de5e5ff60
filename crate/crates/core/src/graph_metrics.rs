//! Edge geodesic pre-distance, r-packings of edge collections, and hop-error
//! classification of learned structures.
//!
//! The pre-distance between two node pairs is the shortest path length
//! between any endpoint of one and any endpoint of the other; edges sharing a
//! node are at pre-distance 0. Packing routines work on a [`Forest`], which
//! unlike [`TreeTopology`] tolerates isolated nodes and multiple components
//! (induced subgraphs of a tree are forests).

use alloc::collections::{BTreeMap, VecDeque};
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::tree_model::TreeTopology;

/// An undirected simple graph with no cycles required per component checks;
/// used for induced subgraphs and packing instances.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Forest {
    p: usize,
    edges: Vec<(usize, usize)>,
    adjacency: Vec<Vec<usize>>,
}

impl Forest {
    pub fn new(p: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut normalized = Vec::with_capacity(edges.len());
        for &(a, b) in edges {
            if a >= p {
                return Err(Error::NodeOutOfRange { node: a, p });
            }
            if b >= p {
                return Err(Error::NodeOutOfRange { node: b, p });
            }
            if a == b {
                return Err(Error::InvalidArgument("self-loop"));
            }
            normalized.push((a.min(b), a.max(b)));
        }
        normalized.sort_unstable();
        if normalized.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidArgument("duplicate edge"));
        }
        let mut adjacency = vec![Vec::new(); p];
        for &(u, v) in &normalized {
            adjacency[u].push(v);
            adjacency[v].push(u);
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        Ok(Forest {
            p,
            edges: normalized,
            adjacency,
        })
    }

    pub fn node_count(&self) -> usize {
        self.p
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self, node: usize) -> &[usize] {
        &self.adjacency[node]
    }

    pub fn contains_edge(&self, u: usize, v: usize) -> bool {
        let key = (u.min(v), u.max(v));
        self.edges.binary_search(&key).is_ok()
    }

    fn bfs_distances(&self, from: usize) -> Vec<usize> {
        let mut dist = vec![usize::MAX; self.p];
        let mut queue = VecDeque::new();
        dist[from] = 0;
        queue.push_back(from);
        while let Some(x) = queue.pop_front() {
            for &y in &self.adjacency[x] {
                if dist[y] == usize::MAX {
                    dist[y] = dist[x] + 1;
                    queue.push_back(y);
                }
            }
        }
        dist
    }
}

impl From<&TreeTopology> for Forest {
    fn from(tree: &TreeTopology) -> Self {
        Forest::new(tree.node_count(), tree.edges()).expect("tree is a valid forest")
    }
}

/// Minimum path length between any endpoint of `e` and any endpoint of `e2`,
/// or `None` when no connecting path exists. Edges sharing a node are at
/// pre-distance 0.
pub fn edge_geodesic_predistance(
    graph: &Forest,
    e: (usize, usize),
    e2: (usize, usize),
) -> Result<Option<usize>> {
    for node in [e.0, e.1, e2.0, e2.1] {
        if node >= graph.p {
            return Err(Error::NodeOutOfRange { node, p: graph.p });
        }
    }
    let mut best: Option<usize> = None;
    for from in [e.0, e.1] {
        let dist = graph.bfs_distances(from);
        for to in [e2.0, e2.1] {
            if dist[to] != usize::MAX && best.is_none_or(|b| dist[to] < b) {
                best = Some(dist[to]);
            }
        }
    }
    Ok(best)
}

/// One greedy selection step: the chosen edge and every collection edge
/// removed with it (the chosen edge included).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PackingStep {
    pub chosen: (usize, usize),
    pub removed: Vec<(usize, usize)>,
}

/// Result of a packing computation: a subset of the input collection whose
/// edges are pairwise at pre-distance at least `r`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PackingResult {
    pub selected: Vec<(usize, usize)>,
    pub r: usize,
    pub steps: Vec<PackingStep>,
}

impl PackingResult {
    pub fn size(&self) -> usize {
        self.selected.len()
    }
}

fn normalize_collection(graph: &Forest, collection: &[(usize, usize)]) -> Result<Vec<(usize, usize)>> {
    let mut edges = Vec::with_capacity(collection.len());
    for &(a, b) in collection {
        if !graph.contains_edge(a, b) {
            return Err(Error::InvalidArgument(
                "collection edge not present in graph",
            ));
        }
        edges.push((a.min(b), a.max(b)));
    }
    edges.sort_unstable();
    if edges.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidArgument("collection contains duplicates"));
    }
    Ok(edges)
}

/// Greedy 2-packing: root each component at its minimum-id node, repeatedly
/// take the remaining collection edge incident to the deepest node (ties by
/// smaller node id), and discard everything at pre-distance <= 1 from it.
///
/// On a component with `k` nodes whose collection covers all its edges the
/// selection has size at least `(k - 1) / (2d - 1)` for max degree `d`, since
/// each step discards at most `2d - 1` edges.
pub fn greedy_2packing(graph: &Forest, collection: &[(usize, usize)]) -> Result<PackingResult> {
    let edges = normalize_collection(graph, collection)?;
    // Depth of every node, rooting each component at its min-id node.
    let mut depth = vec![usize::MAX; graph.p];
    for root in 0..graph.p {
        if depth[root] != usize::MAX {
            continue;
        }
        depth[root] = 0;
        let mut queue = VecDeque::new();
        queue.push_back(root);
        while let Some(x) = queue.pop_front() {
            for &y in &graph.adjacency[x] {
                if depth[y] == usize::MAX {
                    depth[y] = depth[x] + 1;
                    queue.push_back(y);
                }
            }
        }
    }
    // (deepest endpoint depth desc, deepest endpoint id asc, other id asc).
    let rank = |&(u, v): &(usize, usize)| -> (usize, usize, usize) {
        let (deep, shallow) = if depth[u] >= depth[v] { (u, v) } else { (v, u) };
        (depth[deep], deep, shallow)
    };
    let mut remaining = edges;
    let mut selected = Vec::new();
    let mut steps = Vec::new();
    while !remaining.is_empty() {
        let chosen = *remaining
            .iter()
            .max_by(|a, b| {
                let (da, ia, oa) = rank(a);
                let (db, ib, ob) = rank(b);
                da.cmp(&db).then(ib.cmp(&ia)).then(ob.cmp(&oa))
            })
            .expect("nonempty");
        // Nodes at distance <= 1 from the chosen edge.
        let mut near = vec![chosen.0, chosen.1];
        near.extend_from_slice(graph.neighbors(chosen.0));
        near.extend_from_slice(graph.neighbors(chosen.1));
        near.sort_unstable();
        near.dedup();
        let (kept, removed): (Vec<_>, Vec<_>) = remaining
            .into_iter()
            .partition(|&(u, v)| near.binary_search(&u).is_err() && near.binary_search(&v).is_err());
        selected.push(chosen);
        steps.push(PackingStep { chosen, removed });
        remaining = kept;
    }
    Ok(PackingResult {
        selected,
        r: 2,
        steps,
    })
}

/// Exact r-packing number of `collection` in `graph` by subset enumeration.
/// Guarded to collections of at most 20 edges.
pub fn packing_number_bruteforce(
    graph: &Forest,
    collection: &[(usize, usize)],
    r: usize,
) -> Result<usize> {
    let edges = normalize_collection(graph, collection)?;
    let k = edges.len();
    if k > 20 {
        return Err(Error::TooLarge { limit: 20, got: k });
    }
    if k == 0 {
        return Ok(0);
    }
    // Conflict mask per edge: pairs at pre-distance < r cannot coexist.
    let mut conflicts = vec![0u32; k];
    for i in 0..k {
        for j in i + 1..k {
            let d = edge_geodesic_predistance(graph, edges[i], edges[j])?;
            if d.is_some_and(|d| d < r) {
                conflicts[i] |= 1 << j;
                conflicts[j] |= 1 << i;
            }
        }
    }
    let mut valid = vec![false; 1 << k];
    valid[0] = true;
    let mut best = 0;
    for mask in 1usize..1 << k {
        let low = mask.trailing_zeros() as usize;
        let rest = mask & (mask - 1);
        valid[mask] = valid[rest] && (conflicts[low] as usize & rest) == 0;
        if valid[mask] {
            best = best.max(mask.count_ones() as usize);
        }
    }
    Ok(best)
}

/// Histogram of wrong learned edges by the true-tree distance between their
/// endpoints (`t >= 2` always, since true edges cannot be wrong).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct HopErrorHistogram {
    counts: BTreeMap<usize, usize>,
}

impl HopErrorHistogram {
    pub fn total(&self) -> usize {
        self.counts.values().sum()
    }

    pub fn count(&self, t: usize) -> usize {
        self.counts.get(&t).copied().unwrap_or(0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.counts.iter().map(|(&t, &c)| (t, c))
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }
}

/// Buckets every edge of `learned` missing from `truth` by the length of the
/// true path between its endpoints.
pub fn t_hop_classify(learned: &TreeTopology, truth: &TreeTopology) -> Result<HopErrorHistogram> {
    if learned.node_count() != truth.node_count() {
        return Err(Error::NodeSetMismatch);
    }
    let mut histogram = HopErrorHistogram::default();
    for &(u, v) in learned.edges() {
        if !truth.contains_edge(u, v) {
            let t = truth.path_distance(u, v)?;
            *histogram.counts.entry(t).or_insert(0) += 1;
        }
    }
    Ok(histogram)
}
