//! Independent reference implementations used only to cross-check the
//! library's fast paths. They deliberately share no code with the routines
//! they verify.

/// Euclidean projection onto the probability simplex (Duchi et al.).
pub fn project_simplex(v: &[f64; 8]) -> [f64; 8] {
    let mut u = *v;
    u.sort_unstable_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut tau = 0.0;
    for (i, &ui) in u.iter().enumerate() {
        cumsum += ui;
        let candidate = (cumsum - 1.0) / (i + 1) as f64;
        if ui - candidate > 0.0 {
            tau = candidate;
        }
    }
    let mut out = [0.0; 8];
    for (o, &vi) in out.iter_mut().zip(v.iter()) {
        *o = (vi - tau).max(0.0);
    }
    out
}

fn dot(a: &[f64; 8], b: &[f64; 8]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn project_halfspace(v: &[f64; 8], g: &[f64; 8]) -> [f64; 8] {
    let s = dot(v, g);
    if s <= 0.0 {
        return *v;
    }
    let norm2 = dot(g, g);
    let mut out = *v;
    for (o, &gi) in out.iter_mut().zip(g.iter()) {
        *o -= s / norm2 * gi;
    }
    out
}

/// Dykstra's alternating projections onto `simplex ∩ {<g, q> <= 0}`.
pub fn project_feasible(v: &[f64; 8], g: &[f64; 8]) -> [f64; 8] {
    let mut x = *v;
    let mut p_corr = [0.0; 8];
    let mut q_corr = [0.0; 8];
    for _ in 0..3000 {
        let mut y_in = x;
        for i in 0..8 {
            y_in[i] += p_corr[i];
        }
        let y = project_simplex(&y_in);
        for i in 0..8 {
            p_corr[i] = y_in[i] - y[i];
        }
        let mut x_in = y;
        for i in 0..8 {
            x_in[i] += q_corr[i];
        }
        let x_new = project_halfspace(&x_in, g);
        for i in 0..8 {
            q_corr[i] = x_in[i] - x_new[i];
        }
        let drift: f64 = x
            .iter()
            .zip(&x_new)
            .map(|(a, b)| (a - b).abs())
            .sum();
        x = x_new;
        let sum: f64 = x.iter().sum();
        if drift < 1e-15 && (sum - 1.0).abs() < 1e-12 && dot(&x, g) < 1e-12 {
            break;
        }
    }
    // Land exactly on the simplex; the halfspace residual stays ~1e-12.
    project_simplex(&x)
}

fn divergence_at(q: &[f64; 8], p: &[f64; 8]) -> f64 {
    q.iter()
        .zip(p)
        .filter(|(qi, _)| **qi > 0.0)
        .map(|(qi, pi)| qi * (qi / pi).ln())
        .sum()
}

/// Reference solver for `min D(q || p)` over the simplex subject to
/// `<g, q> <= 0`: projected gradient descent with Armijo backtracking and
/// Dykstra projections. The objective is 1-strongly convex on the simplex,
/// so the iteration converges linearly.
pub fn simplex_min_divergence(p: &[f64; 8], g: &[f64; 8]) -> f64 {
    let grad = |q: &[f64; 8]| -> [f64; 8] {
        let mut out = [0.0; 8];
        for i in 0..8 {
            out[i] = (q[i].max(1e-300) / p[i]).ln() + 1.0;
        }
        out
    };
    let mut x = project_feasible(&[1.0 / 8.0; 8], g);
    let mut fx = divergence_at(&x, p);
    let mut best = fx;
    let mut step = 0.5;
    let mut stalled = 0;
    for _ in 0..60_000 {
        let gr = grad(&x);
        let mut accepted = false;
        for _ in 0..60 {
            let mut trial = x;
            for i in 0..8 {
                trial[i] -= step * gr[i];
            }
            let candidate = project_feasible(&trial, g);
            let f_candidate = divergence_at(&candidate, p);
            let decrease: f64 = x
                .iter()
                .zip(&candidate)
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            if f_candidate <= fx - 1e-4 / step.max(1e-12) * decrease || f_candidate < fx {
                x = candidate;
                fx = f_candidate;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
        step = (step * 1.3).min(4.0);
        if fx < best - 1e-15 {
            best = fx;
            stalled = 0;
        } else {
            stalled += 1;
            if stalled > 300 {
                break;
            }
        }
    }
    best.min(fx)
}

/// Decodes a Prüfer sequence over nodes `0..p` by linear scanning; quadratic
/// and independent of the library's heap-based decoder.
fn decode_prufer(p: usize, seq: &[usize]) -> Vec<(usize, usize)> {
    let mut degree = vec![1usize; p];
    for &a in seq {
        degree[a] += 1;
    }
    let mut edges = Vec::with_capacity(p - 1);
    let mut used = vec![false; p];
    for (pos, &a) in seq.iter().enumerate() {
        let leaf = (0..p)
            .find(|&j| !used[j] && degree[j] == 1)
            .expect("a leaf always exists");
        edges.push((leaf.min(a), leaf.max(a)));
        used[leaf] = true;
        degree[a] -= 1;
        let _ = pos;
    }
    let mut last: Vec<usize> = (0..p).filter(|&j| !used[j] && degree[j] >= 1).collect();
    last.sort_unstable();
    assert_eq!(last.len(), 2);
    edges.push((last[0], last[1]));
    edges.sort_unstable();
    edges
}

/// Exhaustive maximum-weight spanning tree over all `p^(p-2)` labeled trees.
pub fn exhaustive_best_tree(p: usize, weight: impl Fn(usize, usize) -> f64) -> Vec<(usize, usize)> {
    assert!((2..=7).contains(&p), "exhaustive search guard");
    if p == 2 {
        return vec![(0, 1)];
    }
    let digits = p - 2;
    let total = p.pow(digits as u32);
    let mut best_sum = f64::NEG_INFINITY;
    let mut best_edges = Vec::new();
    let mut seq = vec![0usize; digits];
    for code in 0..total {
        let mut rest = code;
        for d in seq.iter_mut() {
            *d = rest % p;
            rest /= p;
        }
        let edges = decode_prufer(p, &seq);
        let sum: f64 = edges.iter().map(|&(u, v)| weight(u, v)).sum();
        if sum > best_sum {
            best_sum = sum;
            best_edges = edges;
        }
    }
    best_edges
}
