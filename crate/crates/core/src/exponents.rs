//! Error-exponent calculators and the numeric inequality sweep.
//!
//! The passive structure-learning error exponent on a homogeneous Ising tree
//! has the closed form
//!
//! ```text
//! K_passive(rho) = -ln(1 - theta * (1 - sqrt(1 - rho^2))),  theta = (1-rho)/2
//! ```
//!
//! and the t-hop generalization replaces `theta` by the t-step flip
//! probability `tilde_theta(t-1)` and `1 - rho^2` by `4 theta (1 - theta)`.
//! Two further exponents are defined as constrained KL minimizations over
//! distributions on the three-node path: the minimizer under a linear
//! expectation constraint lies in the exponential-tilt family
//! `Q_lambda ∝ P e^{-lambda g}`, and the unique `lambda >= 0` with
//! `E_{Q_lambda}[g] = 0` is found by bracketing and bisection.
//!
//! [`verify_bounds`] evaluates every piecewise inequality that the active
//! algorithm's exponent guarantee rests on, over a dense rho grid, and
//! reports per-point margins. All logarithms are natural.

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Boost factors by correlation interval; half-open exactly as tabulated.
const C_RHO_TABLE: [(f64, f64, f64); 7] = [
    (0.0, 0.03, 1.0),
    (0.03, 0.1, 1.01),
    (0.1, 0.2, 1.03),
    (0.2, 0.4, 1.08),
    (0.4, 0.6, 1.19),
    (0.6, 0.8, 1.29),
    (0.8, 1.0, 1.4),
];

fn check_rho(rho: f64) -> Result<f64> {
    if rho > 0.0 && rho < 1.0 {
        Ok(rho)
    } else {
        Err(Error::Domain {
            what: "correlation",
            value: rho,
        })
    }
}

/// Closed-form passive (correlation-weighted spanning tree) error exponent.
pub fn k_passive(rho: f64) -> Result<f64> {
    let rho = check_rho(rho)?;
    let theta = (1.0 - rho) / 2.0;
    Ok(-libm::log(1.0 - theta * (1.0 - libm::sqrt(1.0 - rho * rho))))
}

/// Flip probability across `t` hops: `tilde_theta(1) = theta` and
/// `tilde_theta(k) = (1 - 2 theta) tilde_theta(k-1) + theta`. Equals
/// `(1 - (1 - 2 theta)^t) / 2` and increases to 1/2.
pub fn tilde_theta(t: u32, theta: f64) -> Result<f64> {
    if t < 1 {
        return Err(Error::Domain {
            what: "hop count",
            value: t as f64,
        });
    }
    if !(theta > 0.0 && theta < 0.5) {
        return Err(Error::Domain {
            what: "flip probability",
            value: theta,
        });
    }
    let mut value = theta;
    for _ in 1..t {
        value = (1.0 - 2.0 * theta) * value + theta;
    }
    Ok(value)
}

/// Exponent of the t-hop error event (`t >= 2`):
/// `-ln(1 - tilde_theta(t-1) * (1 - sqrt(4 theta (1 - theta))))`.
///
/// At `t = 2` this reduces to [`k_passive`] since `4 theta (1 - theta)`
/// equals `1 - rho^2`.
pub fn k_t_hop(t: u32, rho: f64) -> Result<f64> {
    if t < 2 {
        return Err(Error::Domain {
            what: "hop count",
            value: t as f64,
        });
    }
    let rho = check_rho(rho)?;
    let theta = (1.0 - rho) / 2.0;
    let tt = tilde_theta(t - 1, theta)?;
    Ok(-libm::log(
        1.0 - tt * (1.0 - libm::sqrt(4.0 * theta * (1.0 - theta))),
    ))
}

/// Binary KL divergence `D(a || b)` in nats, with the `0 log 0 = 0`
/// convention. A degenerate `b` with mismatched `a` yields infinity.
pub fn binary_kl(a: f64, b: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&a) {
        return Err(Error::Domain {
            what: "first Bernoulli parameter",
            value: a,
        });
    }
    if !(0.0..=1.0).contains(&b) {
        return Err(Error::Domain {
            what: "second Bernoulli parameter",
            value: b,
        });
    }
    if b == 0.0 || b == 1.0 {
        return Ok(if a == b { 0.0 } else { f64::INFINITY });
    }
    let mut d = 0.0;
    if a > 0.0 {
        d += a * libm::log(a / b);
    }
    if a < 1.0 {
        d += (1.0 - a) * libm::log((1.0 - a) / (1.0 - b));
    }
    Ok(d)
}

/// Piecewise-constant guaranteed boost factor of the active exponent over
/// the passive exponent.
pub fn c_rho_lookup(rho: f64) -> Result<f64> {
    let rho = check_rho(rho)?;
    for &(lo, hi, value) in &C_RHO_TABLE {
        if rho >= lo && rho < hi {
            return Ok(value);
        }
    }
    unreachable!("intervals cover (0,1)")
}

/// Joint law of the homogeneous three-node path i - j - k.
///
/// Atom index packs the spins as `(s_i << 2) | (s_j << 1) | s_k` with bit 1
/// meaning spin -1; `P(x) = 1/2 q(x_j|x_i) q(x_k|x_j)` where `q` keeps the
/// parent's sign with probability `1 - theta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThreeNodePathModel {
    rho: f64,
}

/// Node positions on the path, for building atom-wise functions.
pub const PATH_I: usize = 2;
pub const PATH_J: usize = 1;
pub const PATH_K: usize = 0;

/// Spin (+1.0 or -1.0) of the node at bit position `pos` in atom `idx`.
#[inline]
pub fn atom_spin(idx: usize, pos: usize) -> f64 {
    if idx >> pos & 1 == 0 {
        1.0
    } else {
        -1.0
    }
}

impl ThreeNodePathModel {
    pub fn new(rho: f64) -> Result<Self> {
        Ok(ThreeNodePathModel {
            rho: check_rho(rho)?,
        })
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn probabilities(&self) -> [f64; 8] {
        let theta = (1.0 - self.rho) / 2.0;
        let mut p = [0.0; 8];
        for (idx, slot) in p.iter_mut().enumerate() {
            let si = idx >> PATH_I & 1;
            let sj = idx >> PATH_J & 1;
            let sk = idx >> PATH_K & 1;
            let q_ij = if si == sj { 1.0 - theta } else { theta };
            let q_jk = if sj == sk { 1.0 - theta } else { theta };
            *slot = 0.5 * q_ij * q_jk;
        }
        p
    }
}

/// Expectation of `g` under `q` on the 8 atoms.
pub fn expectation(q: &[f64; 8], g: &[f64; 8]) -> f64 {
    q.iter().zip(g).map(|(qi, gi)| qi * gi).sum()
}

/// Pairwise correlation `E_q[X_a X_b]` for path positions `a`, `b`.
pub fn pair_correlation(q: &[f64; 8], a: usize, b: usize) -> f64 {
    (0..8)
        .map(|idx| q[idx] * atom_spin(idx, a) * atom_spin(idx, b))
        .sum()
}

/// Solution of `min D(Q || P)` subject to `E_Q[g] <= 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TiltSolution {
    /// Lagrange multiplier of the expectation constraint.
    pub lambda: f64,
    /// Minimizing distribution.
    pub q: [f64; 8],
    /// `D(Q* || P)` in nats.
    pub divergence: f64,
    /// `E_{Q*}[g]`, the constraint residual.
    pub residual: f64,
    pub converged: bool,
}

const TILT_RESIDUAL_TOL: f64 = 1e-10;
const TILT_LAMBDA_CAP: f64 = 512.0;

fn tilt(p: &[f64; 8], g: &[f64; 8], lambda: f64) -> [f64; 8] {
    // Shift g by its minimum over the support so the exponent is <= 0 and
    // cannot overflow; the shift cancels on normalization.
    let g_min = p
        .iter()
        .zip(g)
        .filter(|(pi, _)| **pi > 0.0)
        .map(|(_, gi)| *gi)
        .fold(f64::INFINITY, f64::min);
    let mut q = [0.0; 8];
    let mut z = 0.0;
    for i in 0..8 {
        if p[i] > 0.0 {
            q[i] = p[i] * libm::exp(-lambda * (g[i] - g_min));
            z += q[i];
        }
    }
    for qi in &mut q {
        *qi /= z;
    }
    q
}

fn divergence(q: &[f64; 8], p: &[f64; 8]) -> f64 {
    q.iter()
        .zip(p)
        .filter(|(qi, _)| **qi > 0.0)
        .map(|(qi, pi)| qi * libm::log(qi / pi))
        .sum()
}

/// Minimizes `D(Q || P)` over distributions on the 8 atoms subject to
/// `E_Q[g] <= 0`.
///
/// If `P` already satisfies the constraint the minimum is 0 at `Q = P`.
/// Otherwise the minimizer is the exponential tilt `Q_lambda ∝ P e^{-lambda g}`
/// at the unique root of `E_{Q_lambda}[g] = 0`; the root is bracketed by
/// doubling and then bisected until the residual is below `1e-10`.
pub fn min_kl_tilted(p: &[f64; 8], g: &[f64; 8]) -> Result<TiltSolution> {
    let total: f64 = p.iter().sum();
    if p.iter().any(|&pi| pi < 0.0) || (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(
            "base measure must be a probability distribution",
        ));
    }
    let h0 = expectation(p, g);
    if h0 <= 0.0 {
        return Ok(TiltSolution {
            lambda: 0.0,
            q: *p,
            divergence: 0.0,
            residual: h0,
            converged: true,
        });
    }
    let h_at = |lambda: f64| {
        let q = tilt(p, g, lambda);
        expectation(&q, g)
    };
    let mut hi = 1.0;
    while h_at(hi) > 0.0 {
        hi *= 2.0;
        if hi > TILT_LAMBDA_CAP {
            return Err(Error::TiltInfeasible);
        }
    }
    let mut lo = 0.0;
    let mut best_lambda = hi;
    let mut best_abs = f64::INFINITY;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let h = h_at(mid);
        if h.abs() < best_abs {
            best_abs = h.abs();
            best_lambda = mid;
        }
        if h > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if best_abs < TILT_RESIDUAL_TOL * 1e-2 {
            break;
        }
    }
    let q = tilt(p, g, best_lambda);
    let residual = expectation(&q, g);
    Ok(TiltSolution {
        lambda: best_lambda,
        q,
        divergence: divergence(&q, p),
        residual,
        converged: residual.abs() < TILT_RESIDUAL_TOL,
    })
}

/// Constraint function of the confident-two-hop program:
/// `E_Q[x_i x_j - ((13 + 7 rho)/20) x_i x_k] <= 0`.
pub fn conf_constraint(rho: f64) -> [f64; 8] {
    let factor = (13.0 + 7.0 * rho) / 20.0;
    let mut g = [0.0; 8];
    for (idx, slot) in g.iter_mut().enumerate() {
        *slot = atom_spin(idx, PATH_I) * atom_spin(idx, PATH_J)
            - factor * atom_spin(idx, PATH_I) * atom_spin(idx, PATH_K);
    }
    g
}

/// Constraint function of the unconfident-two-hop program:
/// `E_Q[((19 + 21 rho)/40) x_i x_j - x_i x_k] <= 0`.
pub fn unconf_constraint(rho: f64) -> [f64; 8] {
    let factor = (19.0 + 21.0 * rho) / 40.0;
    let mut g = [0.0; 8];
    for (idx, slot) in g.iter_mut().enumerate() {
        *slot = factor * atom_spin(idx, PATH_I) * atom_spin(idx, PATH_J)
            - atom_spin(idx, PATH_I) * atom_spin(idx, PATH_K);
    }
    g
}

/// Tilt solution of the confident-two-hop KL program at `rho`.
pub fn k2_conf_solution(rho: f64) -> Result<TiltSolution> {
    let model = ThreeNodePathModel::new(rho)?;
    min_kl_tilted(&model.probabilities(), &conf_constraint(rho))
}

/// Exponent of two-hop errors surviving the confidence test.
pub fn k2_conf(rho: f64) -> Result<f64> {
    Ok(k2_conf_solution(rho)?.divergence)
}

/// Tilt solution of the unconfident-two-hop KL program at `rho`.
pub fn k2_unconf_solution(rho: f64) -> Result<TiltSolution> {
    let model = ThreeNodePathModel::new(rho)?;
    min_kl_tilted(&model.probabilities(), &unconf_constraint(rho))
}

/// Exponent of accumulating enough unconfident two-hop errors to starve the
/// refinement phase: `0.8 * 13 * min D(Q || P)` under the unconfident
/// constraint.
pub fn k2_unconf(rho: f64) -> Result<f64> {
    Ok(0.8 * 13.0 * k2_unconf_solution(rho)?.divergence)
}

/// Inclusive rho grid `lo, lo + step, ..., hi` for sweeps and curves.
pub fn rho_grid(lo: f64, hi: f64, step: f64) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi < 1.0 && lo < hi) {
        return Err(Error::InvalidArgument("grid must lie inside (0,1)"));
    }
    if step.is_nan() || step <= 0.0 {
        return Err(Error::InvalidArgument("grid step must be positive"));
    }
    let count = libm::round((hi - lo) / step) as usize;
    let mut grid: Vec<f64> = (0..=count).map(|k| lo + k as f64 * step).collect();
    if let Some(last) = grid.last_mut() {
        if (*last - hi).abs() < step * 1e-6 {
            *last = hi;
        }
    }
    grid.retain(|&r| r > 0.0 && r < 1.0);
    Ok(grid)
}

/// A labeled exponent curve sampled on a rho grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ExponentCurve {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

impl ExponentCurve {
    pub fn evaluate(
        label: &str,
        grid: &[f64],
        mut f: impl FnMut(f64) -> Result<f64>,
    ) -> Result<Self> {
        let mut points = Vec::with_capacity(grid.len());
        for &rho in grid {
            points.push((rho, f(rho)?));
        }
        Ok(ExponentCurve {
            label: String::from(label),
            points,
        })
    }
}

/// One evaluated inequality at one grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundRow {
    pub check: &'static str,
    pub rho: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub strict: bool,
}

impl BoundRow {
    pub fn margin(&self) -> f64 {
        self.lhs - self.rhs
    }

    pub fn pass(&self) -> bool {
        if self.strict {
            self.lhs > self.rhs
        } else {
            self.lhs >= self.rhs
        }
    }
}

/// Worst margin per named check.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckSummary {
    pub check: &'static str,
    pub points: usize,
    pub worst_margin: f64,
    pub worst_rho: f64,
    pub pass: bool,
}

/// Report of the full inequality sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundsReport {
    rows: Vec<BoundRow>,
}

impl BoundsReport {
    pub fn rows(&self) -> &[BoundRow] {
        &self.rows
    }

    pub fn all_pass(&self) -> bool {
        self.rows.iter().all(BoundRow::pass)
    }

    pub fn summaries(&self) -> Vec<CheckSummary> {
        let mut out: Vec<CheckSummary> = Vec::new();
        for row in &self.rows {
            match out.iter_mut().find(|s| s.check == row.check) {
                Some(s) => {
                    s.points += 1;
                    s.pass &= row.pass();
                    if row.margin() < s.worst_margin {
                        s.worst_margin = row.margin();
                        s.worst_rho = row.rho;
                    }
                }
                None => out.push(CheckSummary {
                    check: row.check,
                    points: 1,
                    worst_margin: row.margin(),
                    worst_rho: row.rho,
                    pass: row.pass(),
                }),
            }
        }
        out
    }
}

/// Evaluates every inequality underpinning the active algorithm's exponent
/// boost at each grid point, labeled (a)-(g):
///
/// - a: `0.8 K_3 / K_passive` clears the boost floor on [0.5, 1);
/// - b: `0.85 K_3 / K_passive >= 1.19` on [0.4, 0.5);
/// - c: `0.8 D((1-rho)/2 || 0.12) > 1.23 K_passive` on [0.4, 0.5);
/// - d: `125 D(5 theta/6 || theta)` and `130 D(7 theta/6 || theta)` clear
///   `c_rho K_passive` everywhere;
/// - e: `K2_conf >= K_3` everywhere;
/// - f: `K2_unconf >= c_rho K_passive` everywhere;
/// - g: the alpha-escape tails `130 D(6 theta/5 || theta) >= 1.4 K_passive`
///   on [0.8, 1) and `130 D((1 + 1/5.72) theta || theta) >= 1.3 K_passive`
///   on [0.6, 0.8).
pub fn verify_bounds(grid: &[f64]) -> Result<BoundsReport> {
    let mut rows = Vec::new();
    for &rho in grid {
        let rho = check_rho(rho)?;
        let theta = (1.0 - rho) / 2.0;
        let kp = k_passive(rho)?;
        let k3 = k_t_hop(3, rho)?;
        let c = c_rho_lookup(rho)?;

        if rho >= 0.5 {
            let floor = if rho >= 0.8 {
                1.4
            } else if rho >= 0.6 {
                1.29
            } else {
                1.19
            };
            rows.push(BoundRow {
                check: "a_t3_ratio_alpha08",
                rho,
                lhs: 0.8 * k3 / kp,
                rhs: floor,
                strict: false,
            });
        }
        if (0.4..0.5).contains(&rho) {
            rows.push(BoundRow {
                check: "b_t3_ratio_alpha085",
                rho,
                lhs: 0.85 * k3 / kp,
                rhs: 1.19,
                strict: false,
            });
            rows.push(BoundRow {
                check: "c_overshoot_tail",
                rho,
                lhs: 0.8 * binary_kl((1.0 - rho) / 2.0, 0.12)?,
                rhs: 1.23 * kp,
                strict: true,
            });
        }
        rows.push(BoundRow {
            check: "d_mean_low_tail",
            rho,
            lhs: 125.0 * binary_kl(5.0 * theta / 6.0, theta)?,
            rhs: c * kp,
            strict: false,
        });
        rows.push(BoundRow {
            check: "d_mean_high_tail",
            rho,
            lhs: 130.0 * binary_kl(7.0 * theta / 6.0, theta)?,
            rhs: c * kp,
            strict: false,
        });
        rows.push(BoundRow {
            check: "e_conf_vs_t3",
            rho,
            lhs: k2_conf(rho)?,
            rhs: k3,
            strict: false,
        });
        rows.push(BoundRow {
            check: "f_unconf_vs_boost",
            rho,
            lhs: k2_unconf(rho)?,
            rhs: c * kp,
            strict: false,
        });
        if rho >= 0.8 {
            rows.push(BoundRow {
                check: "g_escape_high",
                rho,
                lhs: 130.0 * binary_kl(6.0 * theta / 5.0, theta)?,
                rhs: 1.4 * kp,
                strict: false,
            });
        } else if rho >= 0.6 {
            rows.push(BoundRow {
                check: "g_escape_mid",
                rho,
                lhs: 130.0 * binary_kl((1.0 + 1.0 / 5.72) * theta, theta)?,
                rhs: 1.3 * kp,
                strict: false,
            });
        }
    }
    Ok(BoundsReport { rows })
}
