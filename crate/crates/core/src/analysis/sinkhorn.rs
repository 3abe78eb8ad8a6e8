use super::AnalysisError;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::cmp::Ordering;

pub const DEFAULT_MAX_SAMPLES: usize = 5000;

/// Per-stage factor of the ε schedule.
const ANNEAL: f64 = 0.8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinkhornOptions {
    /// Entropic regularization; `None` uses [`default_epsilon`] of the pooled
    /// cloud.
    pub epsilon: Option<f64>,
    pub max_iters: usize,
    /// Tolerance on the L1 marginal violation.
    pub tol: f64,
    /// Over-relaxation factor of the final phase, in (0, 2); 1 is plain
    /// Sinkhorn.
    pub relaxation: f64,
}

impl Default for SinkhornOptions {
    fn default() -> Self {
        Self { epsilon: None, max_iters: 2000, tol: 1e-3, relaxation: 1.8 }
    }
}

/// `0.01 ×` the mean squared pairwise distance of the pooled samples.
pub fn default_epsilon(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let pooled: Vec<&Vec<f64>> = a.iter().chain(b).collect();
    let n = pooled.len() as f64;
    let k = pooled.first().map_or(0, |p| p.len());
    let mut total = 0.0;
    for c in 0..k {
        let mean = pooled.iter().map(|p| p[c]).sum::<f64>() / n;
        total += pooled.iter().map(|p| (p[c] - mean).powi(2)).sum::<f64>() / n;
    }
    0.01 * 2.0 * total
}

/// Seeded uniform subsample without replacement, in original order.
pub fn subsample(samples: &[Vec<f64>], max: usize, seed: u64) -> Vec<Vec<f64>> {
    if samples.len() <= max {
        return samples.to_vec();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = rand::seq::index::sample(&mut rng, samples.len(), max).into_vec();
    idx.sort_unstable();
    idx.into_iter().map(|i| samples[i].clone()).collect()
}

fn squared_diameter(a: &[f64], b: &[f64], k: usize) -> f64 {
    (0..k)
        .map(|c| {
            let (lo, hi) = a.iter().chain(b).skip(c).step_by(k).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
            (hi - lo).powi(2)
        })
        .sum()
}

/// Row-major copy of a cloud.
fn flatten(a: &[Vec<f64>]) -> Vec<f64> {
    a.iter().flatten().copied().collect()
}

/// `−ε log Σ_j w exp((h_j − C(x_i, y_j)) / ε)` for every row `i` of `x`.
/// Terms more than ~46 below the row maximum are below 1e-20 of it and are
/// skipped.
fn soft_min(x: &[f64], y: &[f64], k: usize, h: &[f64], log_w: f64, eps: f64) -> Vec<f64> {
    let inv = 1.0 / eps;
    x.par_chunks(k)
        .map_init(Vec::new, |z, xi| {
            z.clear();
            let mut m = f64::NEG_INFINITY;
            for (yj, hj) in y.chunks_exact(k).zip(h) {
                let c: f64 = xi.iter().zip(yj).map(|(a, b)| (a - b) * (a - b)).sum();
                let v = (hj - c) * inv;
                m = m.max(v);
                z.push(v);
            }
            let cut = m - 46.0;
            let s: f64 = z.iter().filter(|&&v| v > cut).map(|v| (v - m).exp()).sum();
            -eps * (log_w + m + s.ln())
        })
        .collect()
}

/// L1 violation of the row marginal of the plan `(f, g)`, given `t = T(g)`.
fn row_error(f: &[f64], t: &[f64], eps: f64) -> f64 {
    f.iter().zip(t).map(|(fo, tn)| ((fo - tn) / eps).exp_m1().abs()).sum::<f64>() / f.len() as f64
}

/// Entropic transport cost `OT_ε(a, b)` (dual value) with uniform weights.
///
/// ε is annealed geometrically from the squared diameter of the data down
/// to `eps` with one plain update per stage. The final phase uses
/// over-relaxed updates, falling back to plain ones if the error grows.
/// The returned value is the dual objective at a pair whose row marginal
/// is exact.
fn entropic_ot(a: &[f64], b: &[f64], k: usize, eps: f64, opts: &SinkhornOptions) -> Result<f64, AnalysisError> {
    let (n, m) = ((a.len() / k) as f64, (b.len() / k) as f64);
    let (log_wa, log_wb) = (-n.ln(), -m.ln());
    let mut f = vec![0.0; a.len() / k];
    let mut g = vec![0.0; b.len() / k];
    let mut e = squared_diameter(a, b, k).max(eps);
    while e > eps {
        g = soft_min(b, a, k, &f, log_wa, e);
        f = soft_min(a, b, k, &g, log_wb, e);
        e = (ANNEAL * e).max(eps);
    }
    let mut omega = opts.relaxation;
    let mut best = (f64::INFINITY, f.clone(), g.clone());
    let mut err = f64::INFINITY;
    for _ in 0..opts.max_iters {
        let g_hat = soft_min(b, a, k, &f, log_wa, eps);
        g.iter_mut().zip(&g_hat).for_each(|(go, gn)| *go += omega * (gn - *go));
        let f_hat = soft_min(a, b, k, &g, log_wb, eps);
        err = row_error(&f, &f_hat, eps);
        if !err.is_finite() {
            return Err(AnalysisError::NoConvergence(err));
        }
        if err < opts.tol {
            return Ok(f_hat.iter().sum::<f64>() / n + g.iter().sum::<f64>() / m);
        }
        if err < best.0 {
            best = (err, f.clone(), g.clone());
        } else if omega != 1.0 && err > 10.0 * best.0 {
            omega = 1.0;
            (f, g) = (best.1.clone(), best.2.clone());
            continue;
        }
        f.iter_mut().zip(&f_hat).for_each(|(fo, fn_)| *fo += omega * (fn_ - *fo));
    }
    Err(AnalysisError::NoConvergence(err))
}

/// Whether `(a, b)` is out of canonical order (length, then lexicographic
/// on the raw samples). Used to make the divergence exactly symmetric.
fn out_of_order(a: &[f64], b: &[f64]) -> bool {
    a.len().cmp(&b.len()).then_with(|| a.iter().zip(b).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(Ordering::Equal)).is_gt()
}

/// Debiased divergence `OT_ε(A,B) − ½ OT_ε(A,A) − ½ OT_ε(B,B)` with
/// squared-Euclidean cost and uniform weights. All three terms come from
/// the same solver, so `S(A, A)` is exactly zero.
pub fn sinkhorn_divergence(a: &[Vec<f64>], b: &[Vec<f64>], opts: &SinkhornOptions) -> Result<f64, AnalysisError> {
    if a.is_empty() || b.is_empty() {
        return Err(AnalysisError::EmptyCloud);
    }
    let k = a[0].len();
    if k == 0 || a.iter().chain(b).any(|p| p.len() != k) {
        return Err(AnalysisError::InvalidParameter("samples of different lengths".into()));
    }
    if !(opts.relaxation > 0.0 && opts.relaxation < 2.0) {
        return Err(AnalysisError::InvalidParameter(format!("relaxation must lie in (0, 2), got {}", opts.relaxation)));
    }
    let (fa, fb) = (flatten(a), flatten(b));
    let (a, b, fa, fb) = if out_of_order(&fa, &fb) { (b, a, fb, fa) } else { (a, b, fa, fb) };
    let eps = opts.epsilon.unwrap_or_else(|| default_epsilon(a, b));
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(AnalysisError::InvalidParameter(format!("epsilon must be positive, got {eps}")));
    }
    let (a, b) = (&fa[..], &fb[..]);
    let aa = entropic_ot(a, a, k, eps, opts)?;
    if a == b {
        // Identical clouds: the cross term is the self term.
        return Ok((aa - 0.5 * aa - 0.5 * aa).max(0.0));
    }
    let ab = entropic_ot(a, b, k, eps, opts)?;
    let bb = entropic_ot(b, b, k, eps, opts)?;
    Ok((ab - 0.5 * aa - 0.5 * bb).max(0.0))
}
