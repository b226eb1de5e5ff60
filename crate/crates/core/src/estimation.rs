//! Empirical pairwise correlations and spanning-tree structure estimation.
//!
//! The accumulator keeps exact integer sums of sample products per node pair,
//! with per-pair counts, so active acquisition (which makes counts
//! heterogeneous) and map-reduce merging stay exact; division happens only at
//! read time. Product sums are computed from bit-packed sample columns:
//! `sum = m - 2 * popcount(xor)`.
//!
//! The structure estimate is the maximum-weight spanning tree of the complete
//! graph with empirical correlations as weights, built by Kruskal with ties
//! broken by lexicographic `(min id, max id)` edge order. A mutual-information
//! variant over the empirical pairwise joints is provided for comparison with
//! the correlation-weighted fit.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::tree_model::{SampleBlock, TreeTopology};

/// Running sums of pairwise sample products over a universe of `p` nodes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorrelationAccumulator {
    p: usize,
    sums: Vec<i64>,
    counts: Vec<u64>,
}

#[inline]
fn pair_index(p: usize, u: usize, v: usize) -> usize {
    debug_assert!(u < v && v < p);
    u * (2 * p - u - 1) / 2 + (v - u - 1)
}

impl CorrelationAccumulator {
    pub fn new(p: usize) -> Self {
        let pairs = p * (p - 1) / 2;
        CorrelationAccumulator {
            p,
            sums: vec![0; pairs],
            counts: vec![0; pairs],
        }
    }

    pub fn universe(&self) -> usize {
        self.p
    }

    /// Folds a sample block in: for every pair of block nodes, the sum gains
    /// the per-sample products and the count gains the block length. Pairs
    /// not jointly observed are untouched.
    pub fn accumulate(&mut self, block: &SampleBlock) -> Result<()> {
        let nodes = block.nodes();
        for &node in nodes {
            if node >= self.p {
                return Err(Error::NodeOutOfRange { node, p: self.p });
            }
        }
        let m = block.len();
        if m == 0 || nodes.len() < 2 {
            return Ok(());
        }
        // Pack column j as bits: 1 where the sample is -1. Disagreement
        // count is then a popcount of the xor, and the product sum is
        // m - 2 * disagreements.
        let words = m.div_ceil(64);
        let mut packed = vec![0u64; nodes.len() * words];
        for s in 0..m {
            let row = block.row(s);
            let (w, bit) = (s / 64, s % 64);
            for (j, &x) in row.iter().enumerate() {
                if x < 0 {
                    packed[j * words + w] |= 1u64 << bit;
                }
            }
        }
        for j1 in 0..nodes.len() {
            let col1 = &packed[j1 * words..(j1 + 1) * words];
            for j2 in j1 + 1..nodes.len() {
                let col2 = &packed[j2 * words..(j2 + 1) * words];
                let disagree: u64 = col1
                    .iter()
                    .zip(col2)
                    .map(|(a, b)| (a ^ b).count_ones() as u64)
                    .sum();
                let (u, v) = (nodes[j1].min(nodes[j2]), nodes[j1].max(nodes[j2]));
                let idx = pair_index(self.p, u, v);
                self.sums[idx] += m as i64 - 2 * disagree as i64;
                self.counts[idx] += m as u64;
            }
        }
        Ok(())
    }

    /// Adds another accumulator over the same universe. Associative and
    /// commutative, enabling map-reduce accumulation.
    pub fn merge(&mut self, other: &CorrelationAccumulator) -> Result<()> {
        if self.p != other.p {
            return Err(Error::InvalidArgument(
                "accumulators cover different universes",
            ));
        }
        for (s, o) in self.sums.iter_mut().zip(&other.sums) {
            *s += o;
        }
        for (c, o) in self.counts.iter_mut().zip(&other.counts) {
            *c += o;
        }
        Ok(())
    }

    /// Directly installs `(sum, count)` for a pair; used to ingest
    /// precomputed statistics.
    pub fn set_pair(&mut self, u: usize, v: usize, sum: i64, count: u64) -> Result<()> {
        self.check_pair(u, v)?;
        if sum.unsigned_abs() > count {
            return Err(Error::InvalidArgument("|sum| exceeds count"));
        }
        let idx = pair_index(self.p, u.min(v), u.max(v));
        self.sums[idx] = sum;
        self.counts[idx] = count;
        Ok(())
    }

    fn check_pair(&self, u: usize, v: usize) -> Result<()> {
        if u >= self.p {
            return Err(Error::NodeOutOfRange { node: u, p: self.p });
        }
        if v >= self.p {
            return Err(Error::NodeOutOfRange { node: v, p: self.p });
        }
        if u == v {
            return Err(Error::InvalidArgument("pair requires distinct nodes"));
        }
        Ok(())
    }

    pub fn count(&self, u: usize, v: usize) -> Result<u64> {
        self.check_pair(u, v)?;
        Ok(self.counts[pair_index(self.p, u.min(v), u.max(v))])
    }

    pub fn sum(&self, u: usize, v: usize) -> Result<i64> {
        self.check_pair(u, v)?;
        Ok(self.sums[pair_index(self.p, u.min(v), u.max(v))])
    }

    /// Empirical correlation `sum / count`. An unobserved pair is an error,
    /// distinct from an observed correlation of zero.
    pub fn empirical_correlation(&self, u: usize, v: usize) -> Result<f64> {
        self.check_pair(u, v)?;
        let idx = pair_index(self.p, u.min(v), u.max(v));
        if self.counts[idx] == 0 {
            return Err(Error::NoData {
                u: u.min(v),
                v: u.max(v),
            });
        }
        Ok(self.sums[idx] as f64 / self.counts[idx] as f64)
    }
}

/// A spanning tree over a node subset, with the weight each edge carried at
/// selection time.
#[derive(Debug, Clone, PartialEq)]
pub struct LearnedTree {
    nodes: Vec<usize>,
    edges: Vec<(usize, usize, f64)>,
}

impl LearnedTree {
    /// Covered nodes, sorted ascending.
    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    /// Chosen edges `(u, v, weight)` with `u < v`, sorted by `(u, v)`.
    pub fn edges(&self) -> &[(usize, usize, f64)] {
        &self.edges
    }

    pub fn edge_pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().map(|&(u, v, _)| (u, v))
    }

    pub fn contains_edge(&self, u: usize, v: usize) -> bool {
        let key = (u.min(v), u.max(v));
        self.edges
            .binary_search_by(|&(a, b, _)| (a, b).cmp(&key))
            .is_ok()
    }

    pub fn weight_sum(&self) -> f64 {
        self.edges.iter().map(|&(_, _, w)| w).sum()
    }

    /// Converts to a [`TreeTopology`] when the tree spans `0..p` exactly.
    pub fn to_topology(&self) -> Result<TreeTopology> {
        let p = self.nodes.len();
        if self.nodes.iter().enumerate().any(|(i, &n)| i != n) {
            return Err(Error::InvalidArgument(
                "learned tree does not span a contiguous universe",
            ));
        }
        let pairs: Vec<_> = self.edge_pairs().collect();
        TreeTopology::new(p, &pairs)
    }
}

fn validate_subset(p: usize, nodes: &[usize]) -> Result<Vec<usize>> {
    if nodes.is_empty() {
        return Err(Error::InvalidArgument("node subset must be nonempty"));
    }
    let mut sorted = nodes.to_vec();
    sorted.sort_unstable();
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidArgument("node subset contains duplicates"));
    }
    if let Some(&last) = sorted.last() {
        if last >= p {
            return Err(Error::NodeOutOfRange { node: last, p });
        }
    }
    Ok(sorted)
}

/// Kruskal over pairs already ordered by descending weight (ties in
/// lexicographic node order). `nodes` must be sorted.
fn select_spanning(
    nodes: &[usize],
    ordered: impl Iterator<Item = (usize, usize, f64)>,
) -> LearnedTree {
    let k = nodes.len();
    let mut index_of = alloc::collections::BTreeMap::new();
    for (i, &n) in nodes.iter().enumerate() {
        index_of.insert(n, i);
    }
    let mut parent: Vec<usize> = (0..k).collect();
    fn root(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let mut edges = Vec::with_capacity(k.saturating_sub(1));
    for (u, v, w) in ordered {
        if edges.len() + 1 == k {
            break;
        }
        let (iu, iv) = (index_of[&u], index_of[&v]);
        let (ru, rv) = (root(&mut parent, iu), root(&mut parent, iv));
        if ru != rv {
            parent[ru.max(rv)] = ru.min(rv);
            edges.push((u, v, w));
        }
    }
    edges.sort_unstable_by_key(|a| (a.0, a.1));
    LearnedTree {
        nodes: nodes.to_vec(),
        edges,
    }
}

/// Maximum-weight spanning tree over the complete graph on `nodes` with
/// empirical correlations as weights.
///
/// Every pair within `nodes` must have data. When all pair counts are equal
/// (the passive / global-phase case) the descending order is produced by a
/// counting sort on the integer sums, which is both faster than a comparison
/// sort and gives the identical order.
pub fn scl_mst(acc: &CorrelationAccumulator, nodes: &[usize]) -> Result<LearnedTree> {
    let nodes = validate_subset(acc.universe(), nodes)?;
    let k = nodes.len();
    if k == 1 {
        return Ok(LearnedTree {
            nodes,
            edges: Vec::new(),
        });
    }
    let n_pairs = k * (k - 1) / 2;
    let mut sums = Vec::with_capacity(n_pairs);
    let mut common_count: Option<u64> = None;
    let mut uniform = true;
    for (i, &u) in nodes.iter().enumerate() {
        for &v in &nodes[i + 1..] {
            let idx = pair_index(acc.p, u, v);
            let count = acc.counts[idx];
            if count == 0 {
                return Err(Error::NoData { u, v });
            }
            match common_count {
                None => common_count = Some(count),
                Some(c) if c != count => uniform = false,
                _ => {}
            }
            sums.push((u, v, acc.sums[idx], count));
        }
    }
    let count = common_count.expect("at least one pair");
    if uniform && 2 * count < (4 * n_pairs as u64).max(1024) {
        // Bucket by integer sum; emit buckets from the largest sum down.
        // Pairs were generated in lexicographic order, so ties come out in
        // exactly the comparison sort's order.
        let buckets = (2 * count + 1) as usize;
        let mut heads = vec![usize::MAX; buckets];
        let mut next = vec![usize::MAX; sums.len()];
        let mut tails = vec![usize::MAX; buckets];
        for (i, &(_, _, s, _)) in sums.iter().enumerate() {
            let b = (s + count as i64) as usize;
            if heads[b] == usize::MAX {
                heads[b] = i;
            } else {
                next[tails[b]] = i;
            }
            tails[b] = i;
        }
        let inv = 1.0 / count as f64;
        let mut items: Vec<(usize, usize, f64)> = Vec::with_capacity(sums.len());
        for b in (0..buckets).rev() {
            let mut cur = heads[b];
            while cur != usize::MAX {
                let (u, v, s, _) = sums[cur];
                items.push((u, v, s as f64 * inv));
                cur = next[cur];
            }
        }
        Ok(select_spanning(&nodes, items.into_iter()))
    } else {
        let mut weighted: Vec<(usize, usize, f64)> = sums
            .into_iter()
            .map(|(u, v, s, c)| (u, v, s as f64 / c as f64))
            .collect();
        weighted.sort_unstable_by(|a, b| {
            b.2.total_cmp(&a.2).then_with(|| (a.0, a.1).cmp(&(b.0, b.1)))
        });
        Ok(select_spanning(&nodes, weighted.into_iter()))
    }
}

/// Maximum-weight spanning tree with plug-in empirical mutual information
/// weights, computed from jointly observed full-vector blocks. Same
/// tie-break rule as [`scl_mst`].
pub fn cl_mst_mutual_information(blocks: &[SampleBlock], p: usize) -> Result<LearnedTree> {
    if p < 2 {
        return Err(Error::InvalidSize {
            what: "node universe",
            got: p,
        });
    }
    for block in blocks {
        let mut cover = vec![false; p];
        if block.nodes().len() != p {
            return Err(Error::InvalidArgument(
                "mutual-information fit requires full-vector samples",
            ));
        }
        for &node in block.nodes() {
            if node >= p {
                return Err(Error::NodeOutOfRange { node, p });
            }
            cover[node] = true;
        }
        if cover.iter().any(|&c| !c) {
            return Err(Error::InvalidArgument(
                "mutual-information fit requires full-vector samples",
            ));
        }
    }
    let m_total: u64 = blocks.iter().map(|b| b.len() as u64).sum();
    if m_total == 0 {
        return Err(Error::NoData { u: 0, v: 1 });
    }
    // Joint counts per pair: cell index (s_u << 1) | s_v with s = 1 for -1.
    let n_pairs = p * (p - 1) / 2;
    let mut joint = vec![[0u64; 4]; n_pairs];
    let mut minus = vec![0u64; p];
    for block in blocks {
        let cols: Vec<usize> = {
            let mut col_of = vec![0usize; p];
            for (j, &node) in block.nodes().iter().enumerate() {
                col_of[node] = j;
            }
            col_of
        };
        for s in 0..block.len() {
            let row = block.row(s);
            for u in 0..p {
                if row[cols[u]] < 0 {
                    minus[u] += 1;
                }
                for v in u + 1..p {
                    let su = (row[cols[u]] < 0) as usize;
                    let sv = (row[cols[v]] < 0) as usize;
                    joint[pair_index(p, u, v)][(su << 1) | sv] += 1;
                }
            }
        }
    }
    let m = m_total as f64;
    let mut weighted = Vec::with_capacity(n_pairs);
    for u in 0..p {
        for v in u + 1..p {
            let cells = &joint[pair_index(p, u, v)];
            let marg_u = [m_total - minus[u], minus[u]];
            let marg_v = [m_total - minus[v], minus[v]];
            let mut mi = 0.0;
            for su in 0..2 {
                for sv in 0..2 {
                    let n_cell = cells[(su << 1) | sv];
                    if n_cell > 0 {
                        let ratio =
                            n_cell as f64 * m / (marg_u[su] as f64 * marg_v[sv] as f64);
                        mi += n_cell as f64 / m * libm::log(ratio);
                    }
                }
            }
            weighted.push((u, v, mi));
        }
    }
    weighted.sort_unstable_by(|a, b| {
        b.2.total_cmp(&a.2).then_with(|| (a.0, a.1).cmp(&(b.0, b.1)))
    });
    let nodes: Vec<usize> = (0..p).collect();
    Ok(select_spanning(&nodes, weighted.into_iter()))
}
