//! Monte Carlo harness, file formats, and command-line interface for the
//! `isingtree` structure-learning library.
//!
//! The harness compares passive and active structure learning at equal
//! scalar-sample budgets over reproducible seeded trials, streams summary
//! rows as CSV, and fits error-exponent slopes from the resulting curves.

pub mod cli;
pub mod formats;
pub mod harness;
