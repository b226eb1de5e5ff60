//! Seeded Monte Carlo comparison of passive and active structure learning.
//!
//! Every (structure, rho, n) cell runs `trials` independent trials of both
//! algorithms at the same scalar budget: the passive fit consumes exactly
//! `n * p` scalars (n full vectors), the active run is capped at `n * p` by
//! its ledger. A trial errs iff the learned edge set differs from the truth.
//! Trial `t` of cell `c` draws from generator streams derived from
//! `(master seed, c, t, algorithm)`, so results are reproducible and
//! independent of scheduling and worker count.

use std::fmt;
use std::path::PathBuf;

use anyhow::Context;
use rayon::prelude::*;

use isingtree::active::{active_learn, ModelOracle};
use isingtree::estimation::{scl_mst, CorrelationAccumulator};
use isingtree::rng::RngSeed;
use isingtree::tree_model::{
    build_binary_tree, build_chain, build_hmm, build_random_tree, IsingTreeModel, TreeTopology,
};

/// Wilson score interval z for 95% coverage.
const WILSON_Z: f64 = 1.959963984540054;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("invalid configuration: {}", problems.join("; "))]
    InvalidConfig { problems: Vec<String> },
    #[error("slope fit needs at least 3 usable points, found {usable}")]
    InsufficientData { usable: usize },
    #[error("slope fit input mixes groups: {0}")]
    MixedGroup(&'static str),
}

/// Ground-truth structure families.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StructureKind {
    Chain,
    Hmm,
    BinaryTree,
    Random,
}

impl StructureKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            StructureKind::Chain => "chain",
            StructureKind::Hmm => "hmm",
            StructureKind::BinaryTree => "binary-tree",
            StructureKind::Random => "random",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "chain" => Some(StructureKind::Chain),
            "hmm" => Some(StructureKind::Hmm),
            "binary-tree" | "binary_tree" => Some(StructureKind::BinaryTree),
            "random" => Some(StructureKind::Random),
            _ => None,
        }
    }
}

impl fmt::Display for StructureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Full experiment description.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub structure: StructureKind,
    /// Node count for chain/hmm/random, level count for binary trees.
    pub size: usize,
    pub rhos: Vec<f64>,
    pub n_grid: Vec<u64>,
    pub trials: u64,
    pub master_seed: u64,
    pub workers: usize,
    pub out: Option<PathBuf>,
    pub trial_log: Option<PathBuf>,
    /// Permit structures with `p < 82 d`, outside the active algorithm's
    /// analyzed regime.
    pub allow_assumption_violation: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            structure: StructureKind::Chain,
            size: 200,
            rhos: vec![0.9],
            n_grid: vec![60, 100, 140, 180],
            trials: 2000,
            master_seed: 1,
            workers: default_workers(),
            out: None,
            trial_log: None,
            allow_assumption_violation: false,
        }
    }
}

pub fn default_workers() -> usize {
    std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        let mut problems = Vec::new();
        if self.trials < 1 {
            problems.push("trials must be at least 1".to_string());
        }
        if self.rhos.is_empty() {
            problems.push("rho list must be nonempty".to_string());
        }
        for &rho in &self.rhos {
            if !(rho > 0.0 && rho < 1.0) {
                problems.push(format!("rho {rho} outside (0,1)"));
            }
        }
        if self.n_grid.is_empty() {
            problems.push("n grid must be nonempty".to_string());
        }
        if self.n_grid.windows(2).any(|w| w[1] <= w[0]) {
            problems.push("n grid must be strictly increasing".to_string());
        }
        if self.n_grid.first().is_some_and(|&n| n == 0) {
            problems.push("n must be at least 1".to_string());
        }
        if self.workers < 1 {
            problems.push("workers must be at least 1".to_string());
        }
        match self.structure {
            StructureKind::Chain | StructureKind::Random => {
                if self.size < 2 {
                    problems.push(format!("size {} too small (need p >= 2)", self.size));
                }
            }
            StructureKind::Hmm => {
                if self.size < 4 || !self.size.is_multiple_of(2) {
                    problems.push(format!("size {} invalid for hmm (even, >= 4)", self.size));
                }
            }
            StructureKind::BinaryTree => {
                if self.size < 1 || self.size > 30 {
                    problems.push(format!("size {} invalid for binary-tree levels", self.size));
                }
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(HarnessError::InvalidConfig { problems })
        }
    }

    /// Builds the ground-truth topology; random structures derive from the
    /// master seed so the whole experiment is reproducible.
    pub fn build_topology(&self) -> anyhow::Result<TreeTopology> {
        let tree = match self.structure {
            StructureKind::Chain => build_chain(self.size)?,
            StructureKind::Hmm => build_hmm(self.size)?,
            StructureKind::BinaryTree => build_binary_tree(self.size as u32)?,
            StructureKind::Random => {
                let mut rng = RngSeed::new(self.master_seed).stream(&[u64::MAX]);
                build_random_tree(self.size, &mut rng)?
            }
        };
        if !tree.satisfies_degree_assumption() && !self.allow_assumption_violation {
            anyhow::bail!(
                "structure has p = {} < 82 d = {}; pass --allow-assumption-violation to run anyway",
                tree.node_count(),
                82 * tree.max_degree()
            );
        }
        Ok(tree)
    }
}

/// One summary CSV row: a (structure, rho, n, algorithm) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub structure: String,
    pub rho: f64,
    pub n: u64,
    pub algorithm: String,
    pub trials: u64,
    pub errors: u64,
    pub err_rate: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    /// Mean unconfident-node count per trial; active rows only.
    pub mean_ptilde: Option<f64>,
    /// Mean final global fraction; active rows only.
    pub mean_alpha: Option<f64>,
}

/// Per-trial active-run diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub structure: String,
    pub rho: f64,
    pub n: u64,
    pub trial: u64,
    /// `(alpha_i, rho_hat_i)` per global iteration.
    pub trace: Vec<(f64, f64)>,
    pub p_tilde: usize,
    pub error: bool,
}

/// Receives results as they are produced; rows stream in deterministic
/// order regardless of the worker count.
pub trait ExperimentSink {
    fn on_row(&mut self, _row: &SummaryRow) -> anyhow::Result<()> {
        Ok(())
    }
    fn on_trial(&mut self, _record: &TrialRecord) -> anyhow::Result<()> {
        Ok(())
    }
}

/// Sink that discards everything.
pub struct NullSink;

impl ExperimentSink for NullSink {}

/// Wilson 95% score interval for an error proportion.
pub fn wilson_interval(errors: u64, trials: u64) -> (f64, f64) {
    let n = trials as f64;
    let p = errors as f64 / n;
    let z2 = WILSON_Z * WILSON_Z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = WILSON_Z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    // The score bounds are exactly 0 and 1 in the degenerate cases; keep
    // them there against rounding.
    let lo = if errors == 0 { 0.0 } else { (center - half).max(0.0) };
    let hi = if errors == trials {
        1.0
    } else {
        (center + half).min(1.0)
    };
    (lo, hi)
}

struct TrialOutcome {
    passive_error: bool,
    active_error: bool,
    p_tilde: usize,
    alpha_pm: u32,
    trace: Vec<(f64, f64)>,
}

fn run_trial(
    model: &IsingTreeModel,
    truth: &TreeTopology,
    n: u64,
    seed: RngSeed,
    cell: u64,
    trial: u64,
) -> Result<TrialOutcome, isingtree::Error> {
    let p = model.node_count();
    let nodes: Vec<usize> = (0..p).collect();

    // Passive: n full vectors, n * p scalars.
    let mut rng = seed.stream(&[cell, trial, 0]);
    let block = model.sample_vectors(n as usize, &mut rng)?;
    let mut acc = CorrelationAccumulator::new(p);
    acc.accumulate(&block)?;
    let passive_tree = scl_mst(&acc, &nodes)?;
    let passive_error = !passive_tree.edge_pairs().eq(truth.edges().iter().copied());

    // Active: ledger-capped at the same n * p scalars.
    let mut oracle = ModelOracle::new(model, seed.stream(&[cell, trial, 1]));
    let result = active_learn(&mut oracle, n)?;
    debug_assert!(result.ledger.spent() <= result.ledger.total());
    let active_error = result.tree.edges() != truth.edges();

    Ok(TrialOutcome {
        passive_error,
        active_error,
        p_tilde: result.confidence.p_tilde(),
        alpha_pm: (result.alpha * 1000.0).round() as u32,
        trace: result.trace,
    })
}

/// Runs the full grid, streaming two summary rows (passive, then active)
/// per cell plus one trial record per active run. Returns all rows.
pub fn run_experiment(
    config: &ExperimentConfig,
    sink: &mut dyn ExperimentSink,
) -> anyhow::Result<Vec<SummaryRow>> {
    config.validate()?;
    let truth = config.build_topology()?;
    let seed = RngSeed::new(config.master_seed);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .context("building worker pool")?;
    let mut rows = Vec::new();
    for (ri, &rho) in config.rhos.iter().enumerate() {
        let model = IsingTreeModel::new(truth.clone(), rho)?;
        for (ni, &n) in config.n_grid.iter().enumerate() {
            let cell = (ri * config.n_grid.len() + ni) as u64;
            let outcomes: Result<Vec<TrialOutcome>, isingtree::Error> = pool.install(|| {
                (0..config.trials)
                    .into_par_iter()
                    .map(|t| run_trial(&model, &truth, n, seed, cell, t))
                    .collect()
            });
            let outcomes = outcomes.with_context(|| {
                format!("cell rho={rho} n={n} of structure {}", config.structure)
            })?;

            let mut passive_errors = 0u64;
            let mut active_errors = 0u64;
            let mut ptilde_sum = 0u64;
            let mut alpha_pm_sum = 0u64;
            for (t, outcome) in outcomes.iter().enumerate() {
                passive_errors += outcome.passive_error as u64;
                active_errors += outcome.active_error as u64;
                ptilde_sum += outcome.p_tilde as u64;
                alpha_pm_sum += outcome.alpha_pm as u64;
                sink.on_trial(&TrialRecord {
                    structure: config.structure.as_str().to_string(),
                    rho,
                    n,
                    trial: t as u64,
                    trace: outcome.trace.clone(),
                    p_tilde: outcome.p_tilde,
                    error: outcome.active_error,
                })?;
            }
            let trials = config.trials;
            for (algorithm, errors, diag) in [
                ("passive", passive_errors, None),
                (
                    "active",
                    active_errors,
                    Some((
                        ptilde_sum as f64 / trials as f64,
                        alpha_pm_sum as f64 / 1000.0 / trials as f64,
                    )),
                ),
            ] {
                let (ci_lo, ci_hi) = wilson_interval(errors, trials);
                let row = SummaryRow {
                    structure: config.structure.as_str().to_string(),
                    rho,
                    n,
                    algorithm: algorithm.to_string(),
                    trials,
                    errors,
                    err_rate: errors as f64 / trials as f64,
                    ci_lo,
                    ci_hi,
                    mean_ptilde: diag.map(|d| d.0),
                    mean_alpha: diag.map(|d| d.1),
                };
                sink.on_row(&row)?;
                rows.push(row);
            }
        }
    }
    Ok(rows)
}

/// Least-squares slope of `ln(error rate)` against `n` for one
/// (structure, rho, algorithm) group. Saturated cells (0 or all errors)
/// carry no slope information and are dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct SlopeEstimate {
    pub structure: String,
    pub rho: f64,
    pub algorithm: String,
    pub slope: f64,
    /// Root-mean-square residual of the fit.
    pub residual: f64,
    pub points: usize,
}

pub fn estimate_slope(rows: &[SummaryRow]) -> Result<SlopeEstimate, HarnessError> {
    let usable: Vec<&SummaryRow> = rows
        .iter()
        .filter(|r| r.errors > 0 && r.errors < r.trials)
        .collect();
    if usable.len() < 3 {
        return Err(HarnessError::InsufficientData {
            usable: usable.len(),
        });
    }
    let first = usable[0];
    if usable
        .iter()
        .any(|r| r.structure != first.structure || r.rho != first.rho || r.algorithm != first.algorithm)
    {
        return Err(HarnessError::MixedGroup(
            "rows must share structure, rho, and algorithm",
        ));
    }
    let k = usable.len() as f64;
    let xs: Vec<f64> = usable.iter().map(|r| r.n as f64).collect();
    let ys: Vec<f64> = usable.iter().map(|r| r.err_rate.ln()).collect();
    let x_mean = xs.iter().sum::<f64>() / k;
    let y_mean = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - x_mean) * (x - x_mean)).sum();
    let sxy: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (x - x_mean) * (y - y_mean))
        .sum();
    let slope = sxy / sxx;
    let intercept = y_mean - slope * x_mean;
    let residual = (xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let e = y - (intercept + slope * x);
            e * e
        })
        .sum::<f64>()
        / k)
        .sqrt();
    Ok(SlopeEstimate {
        structure: first.structure.clone(),
        rho: first.rho,
        algorithm: first.algorithm.clone(),
        slope,
        residual,
        points: usable.len(),
    })
}

/// Groups rows by (structure, rho, algorithm) and fits each group,
/// preserving first-appearance order. Groups with too few usable points are
/// skipped.
pub fn estimate_all_slopes(rows: &[SummaryRow]) -> Vec<SlopeEstimate> {
    let mut keys: Vec<(String, f64, String)> = Vec::new();
    for row in rows {
        let key = (row.structure.clone(), row.rho, row.algorithm.clone());
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    keys.into_iter()
        .filter_map(|(structure, rho, algorithm)| {
            let group: Vec<SummaryRow> = rows
                .iter()
                .filter(|r| r.structure == structure && r.rho == rho && r.algorithm == algorithm)
                .cloned()
                .collect();
            estimate_slope(&group).ok()
        })
        .collect()
}

/// Parses an n-grid spec: either a comma list `60,100,140` or a range
/// `start:end:step` with inclusive end.
pub fn parse_n_grid(spec: &str) -> anyhow::Result<Vec<u64>> {
    let spec = spec.trim();
    if spec.contains(':') {
        let parts: Vec<&str> = spec.split(':').collect();
        anyhow::ensure!(parts.len() == 3, "range spec must be start:end:step");
        let start: u64 = parts[0].trim().parse().context("range start")?;
        let end: u64 = parts[1].trim().parse().context("range end")?;
        let step: u64 = parts[2].trim().parse().context("range step")?;
        anyhow::ensure!(step > 0, "range step must be positive");
        anyhow::ensure!(end >= start, "range end must be at least start");
        Ok((start..=end).step_by(step as usize).collect())
    } else {
        spec.split(',')
            .map(|s| s.trim().parse::<u64>().map_err(Into::into))
            .collect()
    }
}

/// Parses a comma-separated correlation list.
pub fn parse_rho_list(spec: &str) -> anyhow::Result<Vec<f64>> {
    spec.split(',')
        .map(|s| s.trim().parse::<f64>().map_err(Into::into))
        .collect()
}
