//! Command-line interface.
//!
//! Exit codes: 0 on success, 1 on usage or validation errors, 2 when
//! `verify-bounds` finds a failing inequality.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use isingtree::exponents::{
    k2_conf, k2_unconf, k_passive, k_t_hop, rho_grid, verify_bounds, ExponentCurve,
};
use isingtree::graph_metrics::{greedy_2packing, Forest};

use crate::formats::{
    bounds_report_csv, curve_csv, parse_config, parse_summary_csv, slope_csv, summary_row_csv,
    trial_record_csv, write_topology, SUMMARY_HEADER, TRIAL_LOG_HEADER,
};
use crate::harness::{
    estimate_all_slopes, parse_n_grid, parse_rho_list, run_experiment,
    ExperimentConfig, ExperimentSink, StructureKind, SummaryRow, TrialRecord,
};

#[derive(Parser)]
#[command(
    name = "isingtree-sim",
    version,
    about = "Structure learning on homogeneous Ising trees: simulation, exponents, diagnostics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the seeded passive-vs-active Monte Carlo comparison.
    Simulate(SimulateArgs),
    /// Emit an analytic error-exponent curve as CSV.
    Exponents(ExponentsArgs),
    /// Evaluate the exponent-boost inequalities over a rho grid.
    VerifyBounds(VerifyBoundsArgs),
    /// Trace the greedy edge 2-packing on a built-in 11-node example.
    PackingDemo,
    /// Fit log-error slopes from an existing summary CSV.
    Slope(SlopeArgs),
}

#[derive(Args)]
struct SimulateArgs {
    /// Flat `key = value` config file; command-line flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Ground-truth family: chain, hmm, binary-tree, random.
    #[arg(long)]
    structure: Option<String>,
    /// Node count (chain, hmm, random).
    #[arg(long)]
    p: Option<usize>,
    /// Level count (binary-tree).
    #[arg(long)]
    levels: Option<usize>,
    /// Comma-separated correlations, e.g. `0.9,0.7`.
    #[arg(long)]
    rho: Option<String>,
    /// Vector-sample grid: comma list `60,100` or range `50:250:50`.
    #[arg(long)]
    n: Option<String>,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    /// Summary CSV path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Optional per-trial active-run diagnostics CSV.
    #[arg(long)]
    trial_log: Option<PathBuf>,
    /// Run structures outside the analyzed p >= 82 d regime.
    #[arg(long)]
    allow_assumption_violation: bool,
}

#[derive(Args)]
struct ExponentsArgs {
    /// One of: k-passive, k-t-hop, k2-conf, k2-unconf.
    #[arg(long)]
    curve: String,
    /// Hop count for k-t-hop.
    #[arg(long, default_value_t = 3)]
    t: u32,
    #[arg(long, default_value_t = 0.01)]
    grid_start: f64,
    #[arg(long, default_value_t = 0.99)]
    grid_end: f64,
    #[arg(long, default_value_t = 0.005)]
    grid_step: f64,
    /// CSV path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyBoundsArgs {
    #[arg(long, default_value_t = 0.01)]
    grid_start: f64,
    #[arg(long, default_value_t = 0.99)]
    grid_end: f64,
    #[arg(long, default_value_t = 0.005)]
    grid_step: f64,
    /// Per-point CSV path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SlopeArgs {
    /// Summary CSV produced by `simulate`.
    #[arg(long)]
    input: PathBuf,
    /// Restrict to one structure.
    #[arg(long)]
    structure: Option<String>,
    /// Restrict to one correlation.
    #[arg(long)]
    rho: Option<f64>,
    /// Restrict to `passive` or `active`.
    #[arg(long)]
    algorithm: Option<String>,
    /// CSV path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Parses and runs; returns the process exit status.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(err) => {
            use clap::error::ErrorKind;
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            return code;
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            1
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<i32> {
    match cli.command {
        Command::Simulate(args) => run_simulate(args),
        Command::Exponents(args) => run_exponents(args),
        Command::VerifyBounds(args) => run_verify_bounds(args),
        Command::PackingDemo => run_packing_demo(),
        Command::Slope(args) => run_slope(args),
    }
}

fn out_writer(path: Option<&Path>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        Some(path) => Box::new(BufWriter::new(
            File::create(path).with_context(|| format!("creating {}", path.display()))?,
        )),
        None => Box::new(std::io::stdout()),
    })
}

fn write_out(path: Option<&Path>, content: &str) -> anyhow::Result<()> {
    let mut w = out_writer(path)?;
    w.write_all(content.as_bytes())?;
    w.flush()?;
    Ok(())
}

fn apply_config_entry(
    config: &mut ExperimentConfig,
    p: &mut Option<usize>,
    levels: &mut Option<usize>,
    key: &str,
    value: &str,
) -> anyhow::Result<()> {
    match key {
        "structure" => {
            config.structure = StructureKind::parse(value)
                .with_context(|| format!("unknown structure `{value}`"))?;
        }
        "p" => *p = Some(value.parse().context("p")?),
        "levels" => *levels = Some(value.parse().context("levels")?),
        "rho" => config.rhos = parse_rho_list(value)?,
        "n" => config.n_grid = parse_n_grid(value)?,
        "trials" => config.trials = value.parse().context("trials")?,
        "seed" => config.master_seed = value.parse().context("seed")?,
        "workers" => config.workers = value.parse().context("workers")?,
        "out" => config.out = Some(PathBuf::from(value)),
        "trial-log" | "trial_log" => config.trial_log = Some(PathBuf::from(value)),
        "allow-assumption-violation" | "allow_assumption_violation" => {
            config.allow_assumption_violation = value.parse().context("allow-assumption-violation")?;
        }
        other => anyhow::bail!("unknown config key `{other}`"),
    }
    Ok(())
}

fn build_experiment_config(args: &SimulateArgs) -> anyhow::Result<ExperimentConfig> {
    let mut config = ExperimentConfig::default();
    let mut p: Option<usize> = None;
    let mut levels: Option<usize> = None;
    if let Some(path) = &args.config {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        for (key, value) in parse_config(&text)? {
            apply_config_entry(&mut config, &mut p, &mut levels, &key, &value)?;
        }
    }
    if let Some(structure) = &args.structure {
        config.structure = StructureKind::parse(structure)
            .with_context(|| format!("unknown structure `{structure}`"))?;
    }
    if let Some(v) = args.p {
        p = Some(v);
    }
    if let Some(v) = args.levels {
        levels = Some(v);
    }
    if let Some(rho) = &args.rho {
        config.rhos = parse_rho_list(rho)?;
    }
    if let Some(n) = &args.n {
        config.n_grid = parse_n_grid(n)?;
    }
    if let Some(v) = args.trials {
        config.trials = v;
    }
    if let Some(v) = args.seed {
        config.master_seed = v;
    }
    if let Some(v) = args.workers {
        config.workers = v;
    }
    if args.out.is_some() {
        config.out = args.out.clone();
    }
    if args.trial_log.is_some() {
        config.trial_log = args.trial_log.clone();
    }
    if args.allow_assumption_violation {
        config.allow_assumption_violation = true;
    }
    // Assumption-respecting defaults per family; explicit sizes win.
    config.size = match config.structure {
        StructureKind::BinaryTree => {
            anyhow::ensure!(p.is_none(), "binary-tree takes --levels, not --p");
            levels.unwrap_or(8)
        }
        _ => {
            anyhow::ensure!(levels.is_none(), "--levels applies to binary-tree only");
            p.unwrap_or(match config.structure {
                StructureKind::Hmm => 300,
                _ => 200,
            })
        }
    };
    Ok(config)
}

/// Streams summary rows (and optionally trial records) as CSV, flushing per
/// row so an interrupted run leaves a parseable prefix.
struct CsvSink {
    rows: Box<dyn Write>,
    trials: Option<BufWriter<File>>,
}

impl CsvSink {
    fn new(out: Option<&Path>, trial_log: Option<&Path>) -> anyhow::Result<Self> {
        let mut rows = out_writer(out)?;
        writeln!(rows, "{SUMMARY_HEADER}")?;
        rows.flush()?;
        let trials = match trial_log {
            Some(path) => {
                let mut w = BufWriter::new(
                    File::create(path)
                        .with_context(|| format!("creating {}", path.display()))?,
                );
                writeln!(w, "{TRIAL_LOG_HEADER}")?;
                Some(w)
            }
            None => None,
        };
        Ok(CsvSink { rows, trials })
    }
}

impl ExperimentSink for CsvSink {
    fn on_row(&mut self, row: &SummaryRow) -> anyhow::Result<()> {
        writeln!(self.rows, "{}", summary_row_csv(row))?;
        self.rows.flush()?;
        Ok(())
    }

    fn on_trial(&mut self, record: &TrialRecord) -> anyhow::Result<()> {
        if let Some(w) = &mut self.trials {
            writeln!(w, "{}", trial_record_csv(record))?;
        }
        Ok(())
    }
}

fn run_simulate(args: SimulateArgs) -> anyhow::Result<i32> {
    let config = build_experiment_config(&args)?;
    config.validate()?;
    let truth = config.build_topology()?;
    if config.structure == StructureKind::Random {
        // Random truths are reproducible from the seed, but record the drawn
        // topology next to the summary for direct inspection.
        if let Some(out) = &config.out {
            let path = out.with_extension("topology.txt");
            std::fs::write(&path, write_topology(&truth))
                .with_context(|| format!("writing {}", path.display()))?;
            eprintln!("wrote topology to {}", path.display());
        }
    }
    let mut sink = CsvSink::new(config.out.as_deref(), config.trial_log.as_deref())?;
    run_experiment(&config, &mut sink)?;
    if let Some(trials) = &mut sink.trials {
        trials.flush()?;
    }
    Ok(0)
}

fn run_exponents(args: ExponentsArgs) -> anyhow::Result<i32> {
    let grid = rho_grid(args.grid_start, args.grid_end, args.grid_step)?;
    let curve = match args.curve.as_str() {
        "k-passive" => ExponentCurve::evaluate("k-passive", &grid, k_passive)?,
        "k-t-hop" => {
            let label = format!("k-{}-hop", args.t);
            ExponentCurve::evaluate(&label, &grid, |rho| k_t_hop(args.t, rho))?
        }
        "k2-conf" => ExponentCurve::evaluate("k2-conf", &grid, k2_conf)?,
        "k2-unconf" => ExponentCurve::evaluate("k2-unconf", &grid, k2_unconf)?,
        other => anyhow::bail!(
            "unknown curve `{other}` (expected k-passive, k-t-hop, k2-conf, k2-unconf)"
        ),
    };
    write_out(args.out.as_deref(), &curve_csv(&[curve]))?;
    Ok(0)
}

fn run_verify_bounds(args: VerifyBoundsArgs) -> anyhow::Result<i32> {
    let grid = rho_grid(args.grid_start, args.grid_end, args.grid_step)?;
    let report = verify_bounds(&grid)?;
    write_out(args.out.as_deref(), &bounds_report_csv(&report))?;
    for summary in report.summaries() {
        eprintln!(
            "{}: {} over {} points, worst margin {:.6} at rho={}",
            summary.check,
            if summary.pass { "pass" } else { "FAIL" },
            summary.points,
            summary.worst_margin,
            summary.worst_rho,
        );
    }
    Ok(if report.all_pass() { 0 } else { 2 })
}

fn run_packing_demo() -> anyhow::Result<i32> {
    // An 11-node rooted tree with two depth-4 leaves; node 0 is unused so
    // the example keeps 1-based labels.
    let edges = [
        (1, 2),
        (1, 3),
        (2, 4),
        (2, 5),
        (3, 6),
        (3, 7),
        (4, 8),
        (5, 9),
        (8, 10),
        (8, 11),
    ];
    let forest = Forest::new(12, &edges)?;
    let fmt_edges = |edges: &[(usize, usize)]| {
        edges
            .iter()
            .map(|(u, v)| format!("{{{u},{v}}}"))
            .collect::<Vec<_>>()
            .join(" ")
    };
    println!("graph edges: {}", fmt_edges(&edges));
    let result = greedy_2packing(&forest, &edges)?;
    for (i, step) in result.steps.iter().enumerate() {
        println!(
            "step {}: pick {{{},{}}}, discard {}",
            i + 1,
            step.chosen.0,
            step.chosen.1,
            fmt_edges(&step.removed),
        );
    }
    println!(
        "2-packing of size {}: {}",
        result.size(),
        fmt_edges(&result.selected)
    );
    Ok(0)
}

fn run_slope(args: SlopeArgs) -> anyhow::Result<i32> {
    let text = std::fs::read_to_string(&args.input)
        .with_context(|| format!("reading {}", args.input.display()))?;
    let mut rows = parse_summary_csv(&text)?;
    if let Some(structure) = &args.structure {
        rows.retain(|r| &r.structure == structure);
    }
    if let Some(rho) = args.rho {
        rows.retain(|r| r.rho == rho);
    }
    if let Some(algorithm) = &args.algorithm {
        rows.retain(|r| &r.algorithm == algorithm);
    }
    let slopes = estimate_all_slopes(&rows);
    anyhow::ensure!(
        !slopes.is_empty(),
        "no group had the 3 usable points a fit needs"
    );
    write_out(args.out.as_deref(), &slope_csv(&slopes))?;
    Ok(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_args(args: &[&str]) -> i32 {
        cli_main(std::iter::once("isingtree-sim").chain(args.iter().copied()))
    }

    #[test]
    fn unknown_subcommand_is_usage_error() {
        assert_eq!(run_args(&["frobnicate"]), 1);
        assert_eq!(run_args(&[]), 1);
    }

    #[test]
    fn help_exits_cleanly() {
        assert_eq!(run_args(&["--help"]), 0);
        assert_eq!(run_args(&["simulate", "--help"]), 0);
    }

    #[test]
    fn verify_bounds_coarse_grid_passes() {
        let dir = std::env::temp_dir().join("isingtree-cli-test-vb");
        std::fs::create_dir_all(&dir).unwrap();
        let out = dir.join("bounds.csv");
        let code = run_args(&[
            "verify-bounds",
            "--grid-step",
            "0.1",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code, 0);
        let text = std::fs::read_to_string(&out).unwrap();
        assert!(text.starts_with("check,rho,lhs,rhs,margin,pass\n"));
        assert!(text.lines().skip(1).all(|l| l.ends_with("true")));
    }

    #[test]
    fn exponents_curve_to_file() {
        let dir = std::env::temp_dir().join("isingtree-cli-test-exp");
        std::fs::create_dir_all(&dir).unwrap();
        let out = dir.join("curve.csv");
        let code = run_args(&[
            "exponents",
            "--curve",
            "k-passive",
            "--grid-step",
            "0.05",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code, 0);
        let text = std::fs::read_to_string(&out).unwrap();
        assert!(text.starts_with("rho,value,label\n"));
        assert!(text.contains(",k-passive"));
        assert_eq!(run_args(&["exponents", "--curve", "bogus"]), 1);
    }

    #[test]
    fn simulate_row_count_and_config_file() {
        let dir = std::env::temp_dir().join("isingtree-cli-test-sim");
        std::fs::create_dir_all(&dir).unwrap();
        let out = dir.join("summary.csv");
        let cfg = dir.join("run.cfg");
        std::fs::write(
            &cfg,
            "structure = chain\np = 12\nrho = 0.8,0.6\ntrials = 8\nseed = 5\nworkers = 2\nallow-assumption-violation = true\n",
        )
        .unwrap();
        let code = run_args(&[
            "simulate",
            "--config",
            cfg.to_str().unwrap(),
            "--n",
            "20:60:20",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code, 0);
        let rows = parse_summary_csv(&std::fs::read_to_string(&out).unwrap()).unwrap();
        // 2 rhos x 3 n values x 2 algorithms.
        assert_eq!(rows.len(), 12);
    }

    #[test]
    fn simulate_writes_trial_log() {
        let dir = std::env::temp_dir().join("isingtree-cli-test-log");
        std::fs::create_dir_all(&dir).unwrap();
        let out = dir.join("summary.csv");
        let log = dir.join("trials.csv");
        let code = run_args(&[
            "simulate",
            "--structure",
            "chain",
            "--p",
            "10",
            "--rho",
            "0.8",
            "--n",
            "25",
            "--trials",
            "6",
            "--seed",
            "3",
            "--allow-assumption-violation",
            "--out",
            out.to_str().unwrap(),
            "--trial-log",
            log.to_str().unwrap(),
        ]);
        assert_eq!(code, 0);
        let text = std::fs::read_to_string(&log).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), TRIAL_LOG_HEADER);
        let rows: Vec<&str> = lines.collect();
        assert_eq!(rows.len(), 6);
        for row in rows {
            let fields: Vec<&str> = row.split(',').collect();
            assert_eq!(fields.len(), 8);
            assert!(fields[4].starts_with("0.8"), "alpha trace {row}");
            assert!(fields[7] == "0" || fields[7] == "1");
        }
    }

    #[test]
    fn simulate_rejects_bad_config() {
        assert_eq!(run_args(&["simulate", "--rho", "1.5", "--trials", "4"]), 1);
        assert_eq!(run_args(&["simulate", "--p", "100"]), 1); // assumption
    }

    #[test]
    fn packing_demo_runs() {
        assert_eq!(run_args(&["packing-demo"]), 0);
    }
}
