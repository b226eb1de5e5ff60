//! Two-phase active structure learning under a fixed scalar-sample budget.
//!
//! The total budget is `n * p` scalar samples, the cost of the passive
//! algorithm's `n` full vectors. The global phase spends a fraction
//! `alpha` of it on full vectors, iteratively: fit the spanning tree,
//! estimate `rho` as the mean edge correlation, and look the next `alpha`
//! up in a fixed table (small estimated correlations demand a larger
//! global fraction). The loop stops as soon as the looked-up value stops
//! increasing; it visits at most the 7 table values.
//!
//! The refinement phase tests every adjacent-edge triple `i - j - k` of the
//! fitted tree with the margin check
//!
//! ```text
//! rho_ik <= rho_ij * (11 + 9 rho_hat) / 20   and symmetrically for jk
//! ```
//!
//! (correlation decay makes the true two-hop correlation `rho^2`, so a pass
//! certifies a comfortable gap). Edges of failing triples are unconfident;
//! the remaining budget buys sub-vector samples of the unconfident nodes
//! only, each connected component of the unconfident subgraph is refit over
//! its node set with all samples, and the component's edges are replaced by
//! the refit. Replacing a connected tree fragment by a spanning tree of the
//! same nodes keeps the overall structure a spanning tree.

use alloc::collections::BTreeSet;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::estimation::{scl_mst, CorrelationAccumulator, LearnedTree};
use crate::rng::Rng;
use crate::tree_model::{IsingTreeModel, SampleBlock, TreeTopology};

/// `alpha` per mille by estimated-correlation interval. Kept in integer per
/// mille so sample-count floors are exact.
const ALPHA_TABLE_PM: [(f64, f64, u32); 7] = [
    (0.0, 0.02, 1000),
    (0.02, 0.07, 995),
    (0.07, 0.16, 985),
    (0.16, 0.34, 950),
    (0.34, 0.53, 900),
    (0.53, 0.76, 850),
    (0.76, 1.0, 800),
];

fn alpha_lookup_pm(rho_hat: f64) -> u32 {
    if rho_hat <= 0.0 {
        // A degenerate estimate falls back to fully passive sampling.
        return 1000;
    }
    if rho_hat >= 1.0 {
        return 800;
    }
    for &(lo, hi, pm) in &ALPHA_TABLE_PM {
        if rho_hat >= lo && rho_hat < hi {
            return pm;
        }
    }
    unreachable!("intervals cover (0,1)")
}

/// Global-phase budget fraction for an estimated correlation, from the
/// lookup table; clamped to 1 below zero and to 0.8 at or above one.
pub fn alpha_lookup(rho_hat: f64) -> f64 {
    alpha_lookup_pm(rho_hat) as f64 / 1000.0
}

/// `floor(alpha * n)` computed exactly in integer per mille.
pub fn global_sample_target(alpha: f64, n: u64) -> u64 {
    let pm = alpha_pm_from_f64(alpha);
    (n as u128 * pm as u128 / 1000) as u64
}

/// `floor((1 - alpha) * n * p / p_tilde)`, the refinement sub-vector sample
/// count, computed exactly in integer per mille.
pub fn refinement_sample_count(alpha: f64, n: u64, p: usize, p_tilde: usize) -> u64 {
    let pm = alpha_pm_from_f64(alpha);
    ((1000 - pm) as u128 * n as u128 * p as u128 / (1000 * p_tilde as u128)) as u64
}

fn alpha_pm_from_f64(alpha: f64) -> u32 {
    let pm = libm::round(alpha * 1000.0);
    debug_assert!((0.0..=1000.0).contains(&pm));
    pm as u32
}

/// Where an acquisition was charged.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AcquisitionStage {
    Global,
    Refinement,
}

/// One charged acquisition: `samples` draws of the sub-vector over `nodes`,
/// costing `samples * nodes.len()` scalars.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Acquisition {
    pub stage: AcquisitionStage,
    pub nodes: Vec<usize>,
    pub samples: u64,
}

/// Enforces the active-learning contract: scalar samples acquired never
/// exceed the total budget.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BudgetLedger {
    total: u64,
    spent: u64,
    log: Vec<Acquisition>,
}

impl BudgetLedger {
    pub fn new(total_scalars: u64) -> Self {
        BudgetLedger {
            total: total_scalars,
            spent: 0,
            log: Vec::new(),
        }
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn spent(&self) -> u64 {
        self.spent
    }

    pub fn remaining(&self) -> u64 {
        self.total - self.spent
    }

    pub fn log(&self) -> &[Acquisition] {
        &self.log
    }

    /// Charges `samples * |nodes|` scalars. Overdraw is a caller bug and
    /// surfaces as an error before any state changes.
    pub fn charge(
        &mut self,
        stage: AcquisitionStage,
        nodes: &[usize],
        samples: u64,
    ) -> Result<()> {
        let cost = samples * nodes.len() as u64;
        if cost > self.remaining() {
            return Err(Error::LedgerOverdraw {
                requested: cost,
                available: self.remaining(),
            });
        }
        self.spent += cost;
        self.log.push(Acquisition {
            stage,
            nodes: nodes.to_vec(),
            samples,
        });
        Ok(())
    }
}

/// Adaptive sampling interface: the algorithm decides what to draw next from
/// the outcome of earlier draws. Implementations must be deterministic given
/// their own state.
pub trait SampleOracle {
    fn node_count(&self) -> usize;
    /// `m >= 1` full-vector samples.
    fn sample_all(&mut self, m: usize) -> SampleBlock;
    /// `m >= 1` samples of the exact marginal over `nodes` (nonempty, valid).
    fn sample_subset(&mut self, nodes: &[usize], m: usize) -> SampleBlock;
}

/// Oracle backed by an Ising tree model and a dedicated generator stream.
pub struct ModelOracle<'a> {
    model: &'a IsingTreeModel,
    rng: Rng,
}

impl<'a> ModelOracle<'a> {
    pub fn new(model: &'a IsingTreeModel, rng: Rng) -> Self {
        ModelOracle { model, rng }
    }
}

impl SampleOracle for ModelOracle<'_> {
    fn node_count(&self) -> usize {
        self.model.node_count()
    }

    fn sample_all(&mut self, m: usize) -> SampleBlock {
        self.model
            .sample_vectors(m, &mut self.rng)
            .expect("validated sample request")
    }

    fn sample_subset(&mut self, nodes: &[usize], m: usize) -> SampleBlock {
        self.model
            .sample_subvector(nodes, m, &mut self.rng)
            .expect("validated sample request")
    }
}

/// Mean empirical correlation over the fitted tree's edges.
pub fn estimate_rho(tree: &LearnedTree, acc: &CorrelationAccumulator) -> Result<f64> {
    if tree.edges().is_empty() {
        return Err(Error::InvalidArgument(
            "correlation estimate needs a tree with at least one edge",
        ));
    }
    let mut sum = 0.0;
    for (u, v) in tree.edge_pairs() {
        sum += acc.empirical_correlation(u, v)?;
    }
    Ok(sum / tree.edges().len() as f64)
}

/// The `(i, j, k)` margin test with `j` in the middle: both tree-edge
/// correlations must dominate the closing pair by the factor
/// `(11 + 9 rho_hat) / 20`. Symmetric in `i` and `k`.
pub fn confident_event(
    acc: &CorrelationAccumulator,
    i: usize,
    j: usize,
    k: usize,
    rho_hat: f64,
) -> Result<bool> {
    let factor = (11.0 + 9.0 * rho_hat) / 20.0;
    let r_ik = acc.empirical_correlation(i, k)?;
    let r_ij = acc.empirical_correlation(i, j)?;
    let r_jk = acc.empirical_correlation(j, k)?;
    Ok(r_ik <= r_ij * factor && r_ik <= r_jk * factor)
}

/// Partition of a fitted tree's edges into confident and unconfident, with
/// the endpoints of unconfident edges.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConfidenceSets {
    /// Tree edges whose every adjacent-edge triple passed, sorted.
    pub confident_edges: Vec<(usize, usize)>,
    /// Tree edges in some failing triple, sorted.
    pub unconfident_edges: Vec<(usize, usize)>,
    /// Endpoints of unconfident edges, sorted.
    pub unconfident_nodes: Vec<usize>,
}

impl ConfidenceSets {
    pub fn p_tilde(&self) -> usize {
        self.unconfident_nodes.len()
    }
}

/// Tests every unordered adjacent-edge pair of the tree once (shared node in
/// the middle); both edges of a failing triple become unconfident. An edge
/// is confident iff every triple containing it passes.
pub fn classify_confidence(
    tree: &LearnedTree,
    acc: &CorrelationAccumulator,
    rho_hat: f64,
) -> Result<ConfidenceSets> {
    let mut adjacency: alloc::collections::BTreeMap<usize, Vec<usize>> =
        alloc::collections::BTreeMap::new();
    for (u, v) in tree.edge_pairs() {
        adjacency.entry(u).or_default().push(v);
        adjacency.entry(v).or_default().push(u);
    }
    let mut unconf_edges = BTreeSet::new();
    let mut unconf_nodes = BTreeSet::new();
    for (&j, neighbors) in &adjacency {
        for (a_idx, &i) in neighbors.iter().enumerate() {
            for &k in &neighbors[a_idx + 1..] {
                if !confident_event(acc, i, j, k, rho_hat)? {
                    unconf_edges.insert((i.min(j), i.max(j)));
                    unconf_edges.insert((j.min(k), j.max(k)));
                    unconf_nodes.insert(i);
                    unconf_nodes.insert(j);
                    unconf_nodes.insert(k);
                }
            }
        }
    }
    let confident_edges = tree
        .edge_pairs()
        .filter(|e| !unconf_edges.contains(e))
        .collect();
    Ok(ConfidenceSets {
        confident_edges,
        unconfident_edges: unconf_edges.into_iter().collect(),
        unconfident_nodes: unconf_nodes.into_iter().collect(),
    })
}

/// Outcome of the global learning phase.
#[derive(Debug, Clone)]
pub struct GlobalPhase {
    pub tree: LearnedTree,
    pub accumulator: CorrelationAccumulator,
    /// Budget fraction of the last completed iteration.
    pub alpha: f64,
    /// Correlation estimate of the last completed iteration.
    pub rho_hat: f64,
    /// `(alpha_i, rho_hat_i)` per iteration.
    pub trace: Vec<(f64, f64)>,
    /// Full-vector samples acquired in total.
    pub vector_samples: u64,
}

/// Iterative global phase: acquire up to `floor(alpha_i n)` cumulative
/// vector samples, refit, re-estimate `rho`, look up `alpha_{i+1}`, and stop
/// once the fraction no longer grows.
pub fn global_phase<O: SampleOracle>(
    oracle: &mut O,
    n: u64,
    ledger: &mut BudgetLedger,
) -> Result<GlobalPhase> {
    let p = oracle.node_count();
    if p < 2 {
        return Err(Error::InvalidSize {
            what: "node count",
            got: p,
        });
    }
    if n < 1 {
        return Err(Error::InvalidSize {
            what: "vector sample budget",
            got: 0,
        });
    }
    let nodes: Vec<usize> = (0..p).collect();
    let mut acc = CorrelationAccumulator::new(p);
    let mut alpha_pm = 800u32;
    let mut acquired = 0u64;
    let mut trace = Vec::new();
    loop {
        let target = (n as u128 * alpha_pm as u128 / 1000) as u64;
        let add = target - acquired;
        if add > 0 {
            ledger.charge(AcquisitionStage::Global, &nodes, add)?;
            let block = oracle.sample_all(add as usize);
            acc.accumulate(&block)?;
            acquired = target;
        }
        let tree = scl_mst(&acc, &nodes)?;
        let rho_hat = estimate_rho(&tree, &acc)?;
        trace.push((alpha_pm as f64 / 1000.0, rho_hat));
        let next_pm = alpha_lookup_pm(rho_hat);
        if next_pm <= alpha_pm {
            return Ok(GlobalPhase {
                tree,
                accumulator: acc,
                alpha: alpha_pm as f64 / 1000.0,
                rho_hat,
                trace,
                vector_samples: acquired,
            });
        }
        alpha_pm = next_pm;
        debug_assert!(trace.len() <= 7, "alpha strictly increases in a 7-value set");
    }
}

/// Refinement phase: buy `floor((1 - alpha) n p / p_tilde)` sub-vector
/// samples of the unconfident nodes, then refit each connected component of
/// the unconfident subgraph over its node set with all samples and splice
/// the refit in. With no unconfident nodes, or with the budget exhausted
/// (`alpha = 1`), the fitted tree is returned unchanged.
pub fn local_refinement<O: SampleOracle>(
    oracle: &mut O,
    tree: &LearnedTree,
    conf: &ConfidenceSets,
    acc: &mut CorrelationAccumulator,
    alpha: f64,
    n: u64,
    ledger: &mut BudgetLedger,
) -> Result<TreeTopology> {
    let alpha_pm = alpha_pm_from_f64(alpha);
    let p = oracle.node_count();
    let p_tilde = conf.p_tilde();
    assert!(p_tilde != 1, "unconfident nodes come in pairs via edges");
    if p_tilde == 0 || alpha_pm == 1000 {
        return tree.to_topology();
    }
    let m_ref =
        ((1000 - alpha_pm) as u128 * n as u128 * p as u128 / (1000 * p_tilde as u128)) as u64;
    if m_ref > 0 {
        ledger.charge(
            AcquisitionStage::Refinement,
            &conf.unconfident_nodes,
            m_ref,
        )?;
        let block = oracle.sample_subset(&conf.unconfident_nodes, m_ref as usize);
        acc.accumulate(&block)?;
    }
    let mut edge_set: BTreeSet<(usize, usize)> = tree.edge_pairs().collect();
    for component in unconfident_components(conf) {
        for &edge in &component.edges {
            edge_set.remove(&edge);
        }
        let refit = scl_mst(acc, &component.nodes)?;
        for edge in refit.edge_pairs() {
            edge_set.insert(edge);
        }
    }
    let edges: Vec<_> = edge_set.into_iter().collect();
    // Construction re-verifies the spanning-tree invariant (count,
    // connectivity, acyclicity).
    TreeTopology::new(p, &edges)
}

struct Component {
    nodes: Vec<usize>,
    edges: Vec<(usize, usize)>,
}

fn unconfident_components(conf: &ConfidenceSets) -> Vec<Component> {
    let nodes = &conf.unconfident_nodes;
    let index_of = |node: usize| nodes.binary_search(&node).expect("endpoint is unconfident");
    let mut parent: Vec<usize> = (0..nodes.len()).collect();
    fn root(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for &(u, v) in &conf.unconfident_edges {
        let (ru, rv) = (
            root(&mut parent, index_of(u)),
            root(&mut parent, index_of(v)),
        );
        if ru != rv {
            parent[ru.max(rv)] = ru.min(rv);
        }
    }
    let mut components: alloc::collections::BTreeMap<usize, Component> =
        alloc::collections::BTreeMap::new();
    for (i, &node) in nodes.iter().enumerate() {
        let r = root(&mut parent, i);
        components
            .entry(r)
            .or_insert_with(|| Component {
                nodes: Vec::new(),
                edges: Vec::new(),
            })
            .nodes
            .push(node);
    }
    for &(u, v) in &conf.unconfident_edges {
        let r = root(&mut parent, index_of(u));
        components.get_mut(&r).expect("component exists").edges.push((u, v));
    }
    components.into_values().collect()
}

/// Full diagnostics of one active run.
#[derive(Debug, Clone)]
pub struct ActiveResult {
    /// The learned spanning tree of all `p` nodes.
    pub tree: TreeTopology,
    /// Final global-phase budget fraction.
    pub alpha: f64,
    /// Final correlation estimate from the global phase.
    pub rho_hat: f64,
    /// `(alpha_i, rho_hat_i)` per global iteration.
    pub trace: Vec<(f64, f64)>,
    pub confidence: ConfidenceSets,
    /// Scalar samples of each node across both phases.
    pub per_node_scalar_samples: Vec<u64>,
    pub ledger: BudgetLedger,
}

/// Runs the whole algorithm: global phase, confidence classification with
/// the final iteration's samples and estimate, then budget-accounted local
/// refinement. Total scalars charged never exceed `n * p`.
pub fn active_learn<O: SampleOracle>(oracle: &mut O, n: u64) -> Result<ActiveResult> {
    run_with_classifier(oracle, n, classify_confidence)
}

fn run_with_classifier<O, F>(oracle: &mut O, n: u64, classify: F) -> Result<ActiveResult>
where
    O: SampleOracle,
    F: Fn(&LearnedTree, &CorrelationAccumulator, f64) -> Result<ConfidenceSets>,
{
    let p = oracle.node_count();
    let mut ledger = BudgetLedger::new(n * p as u64);
    let mut global = global_phase(oracle, n, &mut ledger)?;
    let confidence = classify(&global.tree, &global.accumulator, global.rho_hat)?;
    let tree = local_refinement(
        oracle,
        &global.tree,
        &confidence,
        &mut global.accumulator,
        global.alpha,
        n,
        &mut ledger,
    )?;
    let mut per_node_scalar_samples = vec![0u64; p];
    for acq in ledger.log() {
        for &node in &acq.nodes {
            per_node_scalar_samples[node] += acq.samples;
        }
    }
    Ok(ActiveResult {
        tree,
        alpha: global.alpha,
        rho_hat: global.rho_hat,
        trace: global.trace,
        confidence,
        per_node_scalar_samples,
        ledger,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngSeed;
    use crate::tree_model::build_chain;
    use std::collections::VecDeque;

    #[test]
    fn alpha_table_rows_and_clamps() {
        assert_eq!(alpha_lookup(0.9), 0.8);
        assert_eq!(alpha_lookup(0.76), 0.8);
        assert_eq!(alpha_lookup(0.34), 0.9);
        assert_eq!(alpha_lookup(0.53), 0.85);
        assert_eq!(alpha_lookup(0.16), 0.95);
        assert_eq!(alpha_lookup(0.07), 0.985);
        assert_eq!(alpha_lookup(0.02), 0.995);
        assert_eq!(alpha_lookup(0.01), 1.0);
        assert_eq!(alpha_lookup(-0.1), 1.0);
        assert_eq!(alpha_lookup(0.0), 1.0);
        assert_eq!(alpha_lookup(1.2), 0.8);
    }

    fn acc_with_weights(p: usize, weights: &[(usize, usize, f64)]) -> CorrelationAccumulator {
        let mut acc = CorrelationAccumulator::new(p);
        let scale = 1u64 << 40;
        for &(u, v, w) in weights {
            acc.set_pair(u, v, (w * scale as f64) as i64, scale).unwrap();
        }
        acc
    }

    #[test]
    fn estimate_rho_is_mean_over_tree_edges() {
        let acc = acc_with_weights(3, &[(0, 1, 0.6), (1, 2, 0.8), (0, 2, 0.3)]);
        let tree = scl_mst(&acc, &[0, 1, 2]).unwrap();
        let pairs: Vec<_> = tree.edge_pairs().collect();
        assert_eq!(pairs, vec![(0, 1), (1, 2)]);
        assert!((estimate_rho(&tree, &acc).unwrap() - 0.7).abs() < 1e-9);
    }

    #[test]
    fn confident_event_examples() {
        // Exact correlations at rho = 0.9: factor 0.955, 0.9 * 0.955 >= 0.81.
        let acc = acc_with_weights(3, &[(0, 1, 0.9), (1, 2, 0.9), (0, 2, 0.81)]);
        assert!(confident_event(&acc, 0, 1, 2, 0.9).unwrap());

        // All three correlations equal and positive: factor < 1 fails.
        let acc = acc_with_weights(3, &[(0, 1, 0.5), (1, 2, 0.5), (0, 2, 0.5)]);
        assert!(!confident_event(&acc, 0, 1, 2, 0.5).unwrap());

        // Zero closing correlation passes.
        let acc = acc_with_weights(3, &[(0, 1, 0.5), (1, 2, 0.5), (0, 2, 0.0)]);
        assert!(confident_event(&acc, 0, 1, 2, 0.5).unwrap());

        let empty = CorrelationAccumulator::new(3);
        assert!(confident_event(&empty, 0, 1, 2, 0.5).is_err());
    }

    #[test]
    fn classify_marks_only_failing_triples_on_chain() {
        // Chain 0-1-2-3; only triple (0,1,2) fails.
        let acc = acc_with_weights(
            4,
            &[
                (0, 1, 0.9),
                (1, 2, 0.9),
                (2, 3, 0.9),
                (0, 2, 0.89), // 0.89 > 0.9 * 0.955: failing closure
                (1, 3, 0.80), // passes
                (0, 3, 0.70),
            ],
        );
        let tree = scl_mst(&acc, &[0, 1, 2, 3]).unwrap();
        let pairs: Vec<_> = tree.edge_pairs().collect();
        assert_eq!(pairs, vec![(0, 1), (1, 2), (2, 3)]);
        let conf = classify_confidence(&tree, &acc, 0.9).unwrap();
        assert_eq!(conf.unconfident_edges, vec![(0, 1), (1, 2)]);
        assert_eq!(conf.unconfident_nodes, vec![0, 1, 2]);
        assert_eq!(conf.confident_edges, vec![(2, 3)]);
        assert_eq!(conf.p_tilde(), 3);
    }

    #[test]
    fn classify_on_star_keeps_unaffected_edge_confident() {
        let acc = acc_with_weights(
            4,
            &[
                (0, 1, 0.9),
                (0, 2, 0.9),
                (0, 3, 0.9),
                (1, 2, 0.89), // (1,0,2) fails
                (1, 3, 0.50),
                (2, 3, 0.50),
            ],
        );
        let tree = scl_mst(&acc, &[0, 1, 2, 3]).unwrap();
        let conf = classify_confidence(&tree, &acc, 0.9).unwrap();
        assert_eq!(conf.unconfident_edges, vec![(0, 1), (0, 2)]);
        assert_eq!(conf.confident_edges, vec![(0, 3)]);
        assert_eq!(conf.unconfident_nodes, vec![0, 1, 2]);
    }

    #[test]
    fn all_pass_classification_is_empty() {
        let acc = acc_with_weights(3, &[(0, 1, 0.9), (1, 2, 0.9), (0, 2, 0.5)]);
        let tree = scl_mst(&acc, &[0, 1, 2]).unwrap();
        let conf = classify_confidence(&tree, &acc, 0.9).unwrap();
        assert!(conf.unconfident_edges.is_empty());
        assert_eq!(conf.p_tilde(), 0);
        assert_eq!(conf.confident_edges.len(), 2);
    }

    #[test]
    fn ledger_charges_and_overdraws() {
        let mut ledger = BudgetLedger::new(100);
        ledger
            .charge(AcquisitionStage::Global, &[0, 1, 2, 3], 20)
            .unwrap();
        assert_eq!(ledger.spent(), 80);
        assert_eq!(ledger.remaining(), 20);
        let err = ledger.charge(AcquisitionStage::Refinement, &[0, 1, 2], 7);
        assert!(matches!(err, Err(Error::LedgerOverdraw { .. })));
        assert_eq!(ledger.spent(), 80, "failed charge leaves state untouched");
        assert_eq!(ledger.log().len(), 1);
    }

    /// Oracle that replays a fixed schedule of blocks.
    struct ScriptedOracle {
        p: usize,
        blocks: VecDeque<SampleBlock>,
    }

    impl SampleOracle for ScriptedOracle {
        fn node_count(&self) -> usize {
            self.p
        }

        fn sample_all(&mut self, m: usize) -> SampleBlock {
            let block = self.blocks.pop_front().expect("script exhausted");
            assert_eq!(block.len(), m, "script out of step");
            block
        }

        fn sample_subset(&mut self, nodes: &[usize], m: usize) -> SampleBlock {
            let block = self.blocks.pop_front().expect("script exhausted");
            assert_eq!(block.len(), m);
            assert_eq!(block.nodes(), nodes);
            block
        }
    }

    /// A two-node block with `agree` matching samples and `m - agree`
    /// mismatching ones.
    fn pair_block(m: usize, agree: usize) -> SampleBlock {
        let mut data = Vec::with_capacity(2 * m);
        for s in 0..m {
            if s < agree {
                data.extend_from_slice(&[1, 1]);
            } else {
                data.extend_from_slice(&[1, -1]);
            }
        }
        SampleBlock::from_rows(vec![0, 1], m, data).unwrap()
    }

    #[test]
    fn global_phase_follows_scripted_escalation() {
        // rho_hat sequence 0.4 -> 0.3 -> ~0.23 walks alpha 0.8 -> 0.9 ->
        // 0.95 and stops: three fits, floor(0.95 n) vectors in total.
        let n = 1000;
        let mut oracle = ScriptedOracle {
            p: 2,
            blocks: VecDeque::from(vec![
                pair_block(800, 560), // rho_hat = 0.4    -> alpha 0.9
                pair_block(100, 25),  // cum 270/900 = 0.3 -> alpha 0.95
                pair_block(50, 0),    // cum 220/950 ~ 0.232 -> alpha stays
            ]),
        };
        let mut ledger = BudgetLedger::new(n * 2);
        let global = global_phase(&mut oracle, n, &mut ledger).unwrap();
        assert_eq!(global.alpha, 0.95);
        assert_eq!(global.vector_samples, 950);
        assert_eq!(global.trace.len(), 3);
        assert_eq!(global.trace[0].0, 0.8);
        assert_eq!(global.trace[1].0, 0.9);
        assert_eq!(global.trace[2].0, 0.95);
        assert!((global.trace[0].1 - 0.4).abs() < 1e-12);
        assert!((global.trace[1].1 - 0.3).abs() < 1e-12);
        assert_eq!(ledger.spent(), 950 * 2);
    }

    #[test]
    fn tiny_rho_hat_spends_everything_globally() {
        let n = 1000;
        let mut oracle = ScriptedOracle {
            p: 2,
            blocks: VecDeque::from(vec![
                pair_block(800, 404), // rho_hat = 0.01 < 0.02 -> alpha 1
                pair_block(200, 100),
            ]),
        };
        let mut ledger = BudgetLedger::new(n * 2);
        let global = global_phase(&mut oracle, n, &mut ledger).unwrap();
        assert_eq!(global.alpha, 1.0);
        assert_eq!(global.vector_samples, 1000);
        assert_eq!(ledger.spent(), ledger.total());
        assert_eq!(global.trace.len(), 2);
    }

    #[test]
    fn refinement_sample_arithmetic() {
        assert_eq!(global_sample_target(0.8, 1000), 800);
        assert_eq!(global_sample_target(0.95, 1000), 950);
        assert_eq!(global_sample_target(0.985, 999), 984); // floor(984.015)
        assert_eq!(refinement_sample_count(0.8, 1000, 100, 3), 6666);
        assert_eq!(refinement_sample_count(0.8, 1000, 100, 3) + 800, 7466);
        let floor = (3.0 - 2.0 * 0.8) * 1000.0;
        assert!(7466.0 >= floor);
        assert_eq!(refinement_sample_count(1.0, 1000, 100, 3), 0);
    }

    #[test]
    fn refinement_with_no_unconfident_nodes_is_identity() {
        let acc = acc_with_weights(3, &[(0, 1, 0.9), (1, 2, 0.9), (0, 2, 0.5)]);
        let tree = scl_mst(&acc, &[0, 1, 2]).unwrap();
        let conf = ConfidenceSets::default();
        let mut oracle = ScriptedOracle {
            p: 3,
            blocks: VecDeque::new(),
        };
        let mut ledger = BudgetLedger::new(3000);
        let mut acc = acc;
        let refined =
            local_refinement(&mut oracle, &tree, &conf, &mut acc, 0.8, 1000, &mut ledger)
                .unwrap();
        assert_eq!(refined.edges(), &[(0, 1), (1, 2)]);
        assert_eq!(ledger.spent(), 0);
    }

    #[test]
    #[should_panic(expected = "unconfident nodes come in pairs")]
    fn refinement_rejects_singleton_unconfident_set() {
        let acc = acc_with_weights(3, &[(0, 1, 0.9), (1, 2, 0.9), (0, 2, 0.5)]);
        let tree = scl_mst(&acc, &[0, 1, 2]).unwrap();
        let conf = ConfidenceSets {
            confident_edges: vec![(0, 1), (1, 2)],
            unconfident_edges: vec![],
            unconfident_nodes: vec![1],
        };
        let mut oracle = ScriptedOracle {
            p: 3,
            blocks: VecDeque::new(),
        };
        let mut acc = acc;
        let mut ledger = BudgetLedger::new(3000);
        let _ = local_refinement(&mut oracle, &tree, &conf, &mut acc, 0.8, 1000, &mut ledger);
    }

    #[test]
    fn refinement_replaces_component_with_refit() {
        // Chain 0-1-2-3 fitted from 1000 synthetic joint observations per
        // pair; edges (0,1),(1,2) are unconfident. The refinement draw is
        // twice as large and decisively favors the closing pair (0,2).
        let mut acc = CorrelationAccumulator::new(4);
        for &(u, v, s) in &[
            (0, 1, 900i64),
            (1, 2, 900),
            (2, 3, 900),
            (0, 2, 890),
            (1, 3, 500),
            (0, 3, 400),
        ] {
            acc.set_pair(u, v, s, 1000).unwrap();
        }
        let tree = scl_mst(&acc, &[0, 1, 2, 3]).unwrap();
        let pairs: Vec<_> = tree.edge_pairs().collect();
        assert_eq!(pairs, vec![(0, 1), (1, 2), (2, 3)]);
        let conf = classify_confidence(&tree, &acc, 0.9).unwrap();
        assert_eq!(conf.unconfident_nodes, vec![0, 1, 2]);
        assert_eq!(conf.unconfident_edges, vec![(0, 1), (1, 2)]);

        let n = 7500u64;
        let p = 4usize;
        let m_ref = refinement_sample_count(0.8, n, p, 3) as usize;
        assert_eq!(m_ref, 2000);
        // Columns 0 and 2 always agree; column 1 alternates, so the new
        // products are (0,1): 0, (1,2): 0, (0,2): +2000.
        let mut data = Vec::new();
        for s in 0..m_ref {
            let mid = if s % 2 == 0 { 1 } else { -1 };
            data.extend_from_slice(&[1, mid, 1]);
        }
        let block = SampleBlock::from_rows(vec![0, 1, 2], m_ref, data).unwrap();
        let mut oracle = ScriptedOracle {
            p,
            blocks: VecDeque::from(vec![block]),
        };
        let mut ledger = BudgetLedger::new(n * p as u64);
        ledger
            .charge(AcquisitionStage::Global, &[0, 1, 2, 3], 6000)
            .unwrap();
        let refined =
            local_refinement(&mut oracle, &tree, &conf, &mut acc, 0.8, n, &mut ledger)
                .unwrap();
        // Post-refinement correlations in the component: (0,1) = 0.3,
        // (1,2) = 0.3, (0,2) = 2890/3000; the refit takes (0,2) then the
        // lexicographically first of the 0.3 ties, and (2,3) survives.
        assert_eq!(refined.edges(), &[(0, 1), (0, 2), (2, 3)]);
        assert_eq!(ledger.spent(), ledger.total());
    }

    #[test]
    fn active_run_on_model_is_budget_safe_and_spanning() {
        let model = crate::tree_model::IsingTreeModel::new(build_chain(30).unwrap(), 0.85).unwrap();
        let seed = RngSeed::new(2024);
        for trial in 0..10u64 {
            let mut oracle = ModelOracle::new(&model, seed.stream(&[trial]));
            let n = 40 + 10 * trial;
            let result = active_learn(&mut oracle, n).unwrap();
            assert_eq!(result.tree.node_count(), 30);
            assert_eq!(result.tree.edges().len(), 29);
            assert!(result.ledger.spent() <= result.ledger.total());
            assert!(result.trace.len() <= 7);
            let total: u64 = result.per_node_scalar_samples.iter().sum();
            assert_eq!(total, result.ledger.spent());
            // Per-node counts: global vectors everywhere, plus the
            // refinement samples on unconfident nodes.
            if result.confidence.p_tilde() > 0 && result.alpha < 1.0 {
                let m_ref = refinement_sample_count(
                    result.alpha,
                    n,
                    30,
                    result.confidence.p_tilde(),
                );
                let global = global_sample_target(result.alpha, n);
                for &node in &result.confidence.unconfident_nodes {
                    assert_eq!(
                        result.per_node_scalar_samples[node],
                        global + m_ref
                    );
                }
            }
        }
    }

    #[test]
    fn all_pass_stub_reduces_to_global_fit() {
        let model = crate::tree_model::IsingTreeModel::new(build_chain(20).unwrap(), 0.7).unwrap();
        let seed = RngSeed::new(77);
        let mut oracle = ModelOracle::new(&model, seed.stream(&[0]));
        let stub = |tree: &LearnedTree, _: &CorrelationAccumulator, _: f64| {
            Ok(ConfidenceSets {
                confident_edges: tree.edge_pairs().collect(),
                unconfident_edges: vec![],
                unconfident_nodes: vec![],
            })
        };
        let result = run_with_classifier(&mut oracle, 200, stub).unwrap();

        // Replay the same stream passively with the same sample count.
        let mut rng = seed.stream(&[0]);
        let block = model
            .sample_vectors(global_sample_target(result.alpha, 200) as usize, &mut rng)
            .unwrap();
        let mut acc = CorrelationAccumulator::new(20);
        acc.accumulate(&block).unwrap();
        let passive = scl_mst(&acc, &(0..20).collect::<Vec<_>>()).unwrap();
        let pairs: Vec<_> = passive.edge_pairs().collect();
        assert_eq!(result.tree.edges(), pairs.as_slice());
    }
}
