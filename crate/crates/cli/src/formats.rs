//! Text formats: topology edge lists, the CSV schemas, and the flat
//! key-value config file.

use std::fmt::Write as _;

use anyhow::Context;

use isingtree::exponents::{BoundsReport, ExponentCurve};
use isingtree::tree_model::TreeTopology;

use crate::harness::{SlopeEstimate, SummaryRow, TrialRecord};

/// Serializes a topology as a `p=<count>` header followed by one `u v` edge
/// per line.
pub fn write_topology(tree: &TreeTopology) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "p={}", tree.node_count());
    for &(u, v) in tree.edges() {
        let _ = writeln!(out, "{u} {v}");
    }
    out
}

/// Parses the edge-list format produced by [`write_topology`].
pub fn parse_topology(text: &str) -> anyhow::Result<TreeTopology> {
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
    let header = lines.next().context("empty topology file")?;
    let p: usize = header
        .strip_prefix("p=")
        .with_context(|| format!("expected `p=<count>` header, found `{header}`"))?
        .trim()
        .parse()
        .context("node count")?;
    let mut edges = Vec::new();
    for line in lines {
        let mut parts = line.split_whitespace();
        let u: usize = parts
            .next()
            .with_context(|| format!("edge line `{line}`"))?
            .parse()
            .with_context(|| format!("edge line `{line}`"))?;
        let v: usize = parts
            .next()
            .with_context(|| format!("edge line `{line}`"))?
            .parse()
            .with_context(|| format!("edge line `{line}`"))?;
        anyhow::ensure!(
            parts.next().is_none(),
            "edge line `{line}` has trailing fields"
        );
        edges.push((u, v));
    }
    Ok(TreeTopology::new(p, &edges)?)
}

pub const SUMMARY_HEADER: &str =
    "structure,rho,n,algorithm,trials,errors,err_rate,ci_lo,ci_hi,mean_ptilde,mean_alpha";

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn summary_row_csv(row: &SummaryRow) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{},{}",
        row.structure,
        row.rho,
        row.n,
        row.algorithm,
        row.trials,
        row.errors,
        row.err_rate,
        row.ci_lo,
        row.ci_hi,
        opt(row.mean_ptilde),
        opt(row.mean_alpha),
    )
}

/// Parses a summary CSV (header required, as written by the simulator).
pub fn parse_summary_csv(text: &str) -> anyhow::Result<Vec<SummaryRow>> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().context("empty summary CSV")?;
    anyhow::ensure!(
        header.trim() == SUMMARY_HEADER,
        "unexpected header `{header}`"
    );
    let mut rows = Vec::new();
    for line in lines {
        let fields: Vec<&str> = line.split(',').collect();
        anyhow::ensure!(fields.len() == 11, "row `{line}` has {} fields", fields.len());
        let parse_opt = |s: &str| -> anyhow::Result<Option<f64>> {
            if s.is_empty() {
                Ok(None)
            } else {
                Ok(Some(s.parse()?))
            }
        };
        rows.push(SummaryRow {
            structure: fields[0].to_string(),
            rho: fields[1].parse().with_context(|| format!("rho in `{line}`"))?,
            n: fields[2].parse().with_context(|| format!("n in `{line}`"))?,
            algorithm: fields[3].to_string(),
            trials: fields[4].parse().with_context(|| format!("trials in `{line}`"))?,
            errors: fields[5].parse().with_context(|| format!("errors in `{line}`"))?,
            err_rate: fields[6].parse().with_context(|| format!("err_rate in `{line}`"))?,
            ci_lo: fields[7].parse().with_context(|| format!("ci_lo in `{line}`"))?,
            ci_hi: fields[8].parse().with_context(|| format!("ci_hi in `{line}`"))?,
            mean_ptilde: parse_opt(fields[9])?,
            mean_alpha: parse_opt(fields[10])?,
        });
    }
    Ok(rows)
}

pub const TRIAL_LOG_HEADER: &str = "structure,rho,n,trial,alpha_trace,rho_trace,ptilde,error";

pub fn trial_record_csv(record: &TrialRecord) -> String {
    let alpha_trace = record
        .trace
        .iter()
        .map(|(a, _)| a.to_string())
        .collect::<Vec<_>>()
        .join(";");
    let rho_trace = record
        .trace
        .iter()
        .map(|(_, r)| r.to_string())
        .collect::<Vec<_>>()
        .join(";");
    format!(
        "{},{},{},{},{},{},{},{}",
        record.structure,
        record.rho,
        record.n,
        record.trial,
        alpha_trace,
        rho_trace,
        record.p_tilde,
        record.error as u8,
    )
}

pub const BOUNDS_HEADER: &str = "check,rho,lhs,rhs,margin,pass";

pub fn bounds_report_csv(report: &BoundsReport) -> String {
    let mut out = String::from(BOUNDS_HEADER);
    out.push('\n');
    for row in report.rows() {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            row.check,
            row.rho,
            row.lhs,
            row.rhs,
            row.margin(),
            row.pass(),
        );
    }
    out
}

pub const CURVE_HEADER: &str = "rho,value,label";

pub fn curve_csv(curves: &[ExponentCurve]) -> String {
    let mut out = String::from(CURVE_HEADER);
    out.push('\n');
    for curve in curves {
        for &(rho, value) in &curve.points {
            let _ = writeln!(out, "{},{},{}", rho, value, curve.label);
        }
    }
    out
}

pub const SLOPE_HEADER: &str = "structure,rho,algorithm,slope,residual,points";

pub fn slope_csv(slopes: &[SlopeEstimate]) -> String {
    let mut out = String::from(SLOPE_HEADER);
    out.push('\n');
    for s in slopes {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            s.structure, s.rho, s.algorithm, s.slope, s.residual, s.points
        );
    }
    out
}

/// Parses the flat config format: `key = value` lines, `#` comments, blank
/// lines ignored. Returns entries in file order.
pub fn parse_config(text: &str) -> anyhow::Result<Vec<(String, String)>> {
    let mut entries = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .with_context(|| format!("line {}: expected `key = value`, found `{raw}`", idx + 1))?;
        entries.push((key.trim().to_string(), value.trim().to_string()));
    }
    Ok(entries)
}
