//! Order-statistics tail-index estimators: Hill, second-order adjusted Hill and
//! the extreme-value moments estimator, with double-bootstrap selection of the
//! number of order statistics `k`.
//!
//! Estimators report the extreme-value index `gamma`; the density exponent is
//! `alpha = 1 + 1/gamma` when `gamma > 0`.

use std::io::Write;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::{select_xmin, FitOptions, TailFit};
use crate::powerlaw::Sample;
use crate::rng;

pub const DOUBLE_BOOTSTRAP_MIN_N: usize = 500;
pub const DOUBLE_BOOTSTRAP_REPLICATES: usize = 200;
/// Fraction of order statistics searched when minimising the bootstrap AMSE.
pub const AMSE_SEARCH_FRACTION: f64 = 0.99;
pub const DEFAULT_RHO: f64 = -1.0;
pub const DEFAULT_GRID: usize = 20;
pub const MIN_GRID: usize = 5;
/// Hill and CNS exponents further apart than this are flagged in comparisons.
pub const DISAGREEMENT_FLAG: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Hill,
    AdjustedHill,
    Moments,
    Cns,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Hill => "hill",
            Method::AdjustedHill => "adjusted_hill",
            Method::Moments => "moments",
            Method::Cns => "cns",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailIndexEstimate {
    pub method: Method,
    pub gamma: f64,
    /// `1 + 1/gamma`; absent when `gamma ≤ 0` (no power-law tail).
    pub alpha: Option<f64>,
    /// Order statistics used, or the tail size for CNS.
    pub k_used: usize,
    /// `x_(n−k)` for order-statistics methods, `xmin` for CNS.
    pub threshold: f64,
    /// Asymptotic standard error of `alpha`.
    pub stderr: Option<f64>,
}

fn alpha_of(gamma: f64) -> Option<f64> {
    (gamma > 0.0).then(|| 1.0 + 1.0 / gamma)
}

fn check_k(s: &Sample, k: usize) -> Result<()> {
    if k < 2 || k >= s.len() {
        return Err(Error::InvalidArgument(format!(
            "k must satisfy 2 ≤ k < n = {}, got {k}",
            s.len()
        )));
    }
    Ok(())
}

/// First two moments of `ln(x_(n−i+1) / x_(n−k))`, i = 1..k.
fn log_moments(sorted: &[f64], k: usize) -> (f64, f64) {
    let n = sorted.len();
    let base = sorted[n - k - 1].ln();
    let (mut m1, mut m2) = (0.0, 0.0);
    for &x in &sorted[n - k..] {
        let l = x.ln() - base;
        m1 += l;
        m2 += l * l;
    }
    (m1 / k as f64, m2 / k as f64)
}

fn hill_gamma(sorted: &[f64], k: usize) -> f64 {
    log_moments(sorted, k).0
}

pub fn hill(s: &Sample, k: usize) -> Result<TailIndexEstimate> {
    check_k(s, k)?;
    let gamma = hill_gamma(s.values(), k);
    if !(gamma > 0.0) {
        return Err(Error::DegenerateTail(format!("top {} values are all equal", k + 1)));
    }
    let alpha = 1.0 + 1.0 / gamma;
    Ok(TailIndexEstimate {
        method: Method::Hill,
        gamma,
        alpha: Some(alpha),
        k_used: k,
        threshold: s.values()[s.len() - k - 1],
        stderr: Some((alpha - 1.0) / (k as f64).sqrt()),
    })
}

/// γ̂ = M1 + 1 − ½·(1 − M1²/M2)^{−1}.
pub fn moments(s: &Sample, k: usize) -> Result<TailIndexEstimate> {
    check_k(s, k)?;
    let (m1, m2) = log_moments(s.values(), k);
    if !(m2 > m1 * m1) {
        return Err(Error::DegenerateTail(
            "log-spacings of the top order statistics have zero variance".into(),
        ));
    }
    let gamma = m1 + 1.0 - 0.5 / (1.0 - m1 * m1 / m2);
    let alpha = alpha_of(gamma);
    // Asymptotic variance of the moments estimator for gamma > 0 is 1 + gamma².
    let stderr = alpha.map(|_| ((1.0 + gamma * gamma) / k as f64).sqrt() / (gamma * gamma));
    Ok(TailIndexEstimate {
        method: Method::Moments,
        gamma,
        alpha,
        k_used: k,
        threshold: s.values()[s.len() - k - 1],
        stderr,
    })
}

/// Bias-corrected Hill estimate: Hill values on a grid of `k' ≤ k` are
/// regressed on `(k'/n)^{−rho}` with weights `k'`, and the intercept (the
/// `k' → 0` limit) is reported.
pub fn adjusted_hill(s: &Sample, k: usize, rho: f64, grid: usize) -> Result<TailIndexEstimate> {
    check_k(s, k)?;
    if !(rho < 0.0) {
        return Err(Error::InvalidArgument(format!("rho must be negative, got {rho}")));
    }
    let ks = hill_grid(k, grid);
    if ks.len() < MIN_GRID {
        return Err(Error::InsufficientGrid {
            points: ks.len(),
            needed: MIN_GRID,
        });
    }
    let n = s.len() as f64;
    let sorted = s.values();
    let points: Vec<(f64, f64, f64)> = ks
        .iter()
        .map(|&kp| ((kp as f64 / n).powf(-rho), hill_gamma(sorted, kp), kp as f64))
        .collect();
    let (intercept, intercept_se) = weighted_intercept(&points);
    if !(intercept > 0.0) {
        return Err(Error::DegenerateTail(format!(
            "bias-corrected extreme-value index is {intercept}"
        )));
    }
    Ok(TailIndexEstimate {
        method: Method::AdjustedHill,
        gamma: intercept,
        alpha: alpha_of(intercept),
        k_used: k,
        threshold: sorted[sorted.len() - k - 1],
        stderr: Some(intercept_se / (intercept * intercept)),
    })
}

/// Distinct, evenly spaced values in `2..=k`, at most `grid` of them.
fn hill_grid(k: usize, grid: usize) -> Vec<usize> {
    if k < 2 || grid == 0 {
        return Vec::new();
    }
    if grid == 1 {
        return vec![k];
    }
    let span = (k - 2) as f64;
    let mut out: Vec<usize> = (0..grid)
        .map(|g| 2 + (g as f64 * span / (grid - 1) as f64).round() as usize)
        .collect();
    out.dedup();
    out
}

/// Intercept of the weighted least-squares line through `(x, y, w)` and its
/// standard error.
fn weighted_intercept(points: &[(f64, f64, f64)]) -> (f64, f64) {
    let sw: f64 = points.iter().map(|p| p.2).sum();
    let mx = points.iter().map(|p| p.2 * p.0).sum::<f64>() / sw;
    let my = points.iter().map(|p| p.2 * p.1).sum::<f64>() / sw;
    let sxx: f64 = points.iter().map(|p| p.2 * (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| p.2 * (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let dof = (points.len() - 2) as f64;
    let rss: f64 = points
        .iter()
        .map(|p| p.2 * (p.1 - intercept - slope * p.0).powi(2))
        .sum();
    let sigma2 = rss / dof;
    let se = (sigma2 * (1.0 / sw + mx * mx / sxx)).sqrt();
    (intercept, se)
}

/// Double-bootstrap choice of `k`.
///
/// Bootstrap samples of sizes `n1 = ⌊n^0.95⌋` and `n2 = ⌊n1²/n⌋` each give the
/// `k` minimising the mean of `(M2(k) − 2·M1(k)²)²` over the replicates. The
/// two minimisers combine as
/// `k* = k1²/k2 · ((ln k1)² / (2 ln n1 − ln k1)²)^{(ln n1 − ln k1)/ln n1}`.
pub fn double_bootstrap_k(s: &Sample, seed: u64) -> Result<usize> {
    double_bootstrap_k_with(s, seed, DOUBLE_BOOTSTRAP_REPLICATES)
}

pub fn double_bootstrap_k_with(s: &Sample, seed: u64, replicates: usize) -> Result<usize> {
    let n = s.len();
    if n < DOUBLE_BOOTSTRAP_MIN_N {
        return Err(Error::SampleTooSmall {
            needed: DOUBLE_BOOTSTRAP_MIN_N,
            got: n,
        });
    }
    if replicates == 0 {
        return Err(Error::InvalidArgument("need at least one replicate".into()));
    }
    let n1 = (n as f64).powf(0.95).floor() as usize;
    let n2 = ((n1 * n1) as f64 / n as f64).floor() as usize;
    let k1 = amse_minimiser(s.values(), n1, replicates, rng::derive_seed(seed, 1)) as f64;
    let k2 = amse_minimiser(s.values(), n2, replicates, rng::derive_seed(seed, 2)) as f64;
    let ln_n1 = (n1 as f64).ln();
    let ln_k1 = k1.ln();
    let correction =
        (ln_k1.powi(2) / (2.0 * ln_n1 - ln_k1).powi(2)).powf((ln_n1 - ln_k1) / ln_n1);
    let k_star = (k1 * k1 / k2 * correction).floor();
    Ok((k_star as usize).clamp(2, n - 1))
}

/// Argmin over `k` of the bootstrap mean of `(M2(k) − 2·M1(k)²)²` at resample
/// size `size`. Replicates are summed in fixed blocks so the result does not
/// depend on the thread count.
fn amse_minimiser(values: &[f64], size: usize, replicates: usize, seed: u64) -> usize {
    const BLOCK: usize = 8;
    let k_max = ((AMSE_SEARCH_FRACTION * size as f64).floor() as usize)
        .min(size - 1)
        .max(2);
    let blocks: Vec<Vec<f64>> = (0..replicates)
        .collect::<Vec<_>>()
        .par_chunks(BLOCK)
        .map(|chunk| {
            let mut acc = vec![0.0; k_max + 1];
            let mut logs = Vec::with_capacity(size);
            let mut idx = Vec::with_capacity(size);
            for &r in chunk {
                let mut rng = rng::stream(rng::derive_seed(seed, r as u64));
                idx.clear();
                idx.extend((0..size).map(|_| rng.gen_range(0..values.len() as u32)));
                // Descending order statistics.
                idx.sort_unstable_by(|a, b| b.cmp(a));
                logs.clear();
                logs.extend(idx.iter().map(|&i| values[i as usize].ln()));
                accumulate_amse(&logs, k_max, &mut acc);
            }
            acc
        })
        .collect();
    let mut total = vec![0.0; k_max + 1];
    for b in &blocks {
        for (t, v) in total.iter_mut().zip(b) {
            *t += v;
        }
    }
    (2..=k_max)
        .min_by(|&a, &b| total[a].total_cmp(&total[b]).then(a.cmp(&b)))
        .expect("k range is nonempty")
}

fn accumulate_amse(desc_logs: &[f64], k_max: usize, acc: &mut [f64]) {
    let (mut s1, mut s2) = (0.0, 0.0);
    for k in 1..=k_max {
        let l = desc_logs[k - 1];
        s1 += l;
        s2 += l * l;
        if k < 2 {
            continue;
        }
        let base = desc_logs[k];
        let kf = k as f64;
        let m1 = s1 / kf - base;
        let m2 = s2 / kf - 2.0 * base * s1 / kf + base * base;
        let stat = m2 - 2.0 * m1 * m1;
        acc[k] += stat * stat;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonOptions {
    /// Use this `k` instead of the double-bootstrap choice.
    pub k_override: Option<usize>,
    pub rho: f64,
    pub grid: usize,
    pub replicates: usize,
    pub fit: FitOptions,
}

impl Default for ComparisonOptions {
    fn default() -> Self {
        ComparisonOptions {
            k_override: None,
            rho: DEFAULT_RHO,
            grid: DEFAULT_GRID,
            replicates: DOUBLE_BOOTSTRAP_REPLICATES,
            fit: FitOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    /// CNS, Hill, adjusted Hill, moments, in that order.
    pub estimates: Vec<TailIndexEstimate>,
    pub k: usize,
    pub cns_fit: TailFit,
    /// CNS and Hill exponents differ by more than [`DISAGREEMENT_FLAG`].
    pub flagged: bool,
}

impl Comparison {
    pub fn get(&self, method: Method) -> Option<&TailIndexEstimate> {
        self.estimates.iter().find(|e| e.method == method)
    }

    /// Width of the smallest interval holding every reported alpha.
    pub fn alpha_spread(&self) -> f64 {
        let alphas: Vec<f64> = self.estimates.iter().filter_map(|e| e.alpha).collect();
        let hi = alphas.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lo = alphas.iter().cloned().fold(f64::INFINITY, f64::min);
        hi - lo
    }

    /// CSV with header `method,alpha,gamma,threshold,stderr`. `threshold` is
    /// `k` for the order-statistics methods and `xmin` for CNS.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["method", "alpha", "gamma", "threshold", "stderr"])?;
        for e in &self.estimates {
            let threshold = match e.method {
                Method::Cns => e.threshold.to_string(),
                _ => e.k_used.to_string(),
            };
            w.write_record([
                e.method.as_str().to_string(),
                e.alpha.map(|a| a.to_string()).unwrap_or_default(),
                e.gamma.to_string(),
                threshold,
                e.stderr.map(|v| v.to_string()).unwrap_or_default(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<comparison csv>", e))?;
        Ok(())
    }
}

pub fn estimator_comparison(s: &Sample, seed: u64) -> Result<Comparison> {
    estimator_comparison_with(s, seed, &ComparisonOptions::default())
}

pub fn estimator_comparison_with(
    s: &Sample,
    seed: u64,
    opts: &ComparisonOptions,
) -> Result<Comparison> {
    if s.len() < DOUBLE_BOOTSTRAP_MIN_N {
        return Err(Error::SampleTooSmall {
            needed: DOUBLE_BOOTSTRAP_MIN_N,
            got: s.len(),
        });
    }
    let cns_fit = select_xmin(s, &opts.fit)?;
    let k = match opts.k_override {
        Some(k) => k,
        None => double_bootstrap_k_with(s, seed, opts.replicates)?,
    };
    let cns = TailIndexEstimate {
        method: Method::Cns,
        gamma: 1.0 / (cns_fit.alpha - 1.0),
        alpha: Some(cns_fit.alpha),
        k_used: cns_fit.n_tail,
        threshold: cns_fit.xmin,
        stderr: Some(cns_fit.stderr),
    };
    let hill_est = hill(s, k)?;
    let flagged = (cns_fit.alpha - hill_est.alpha.unwrap_or(f64::INFINITY)).abs() > DISAGREEMENT_FLAG;
    let estimates = vec![
        cns,
        hill_est,
        adjusted_hill(s, k, opts.rho, opts.grid)?,
        moments(s, k)?,
    ];
    Ok(Comparison {
        estimates,
        k,
        cns_fit,
        flagged,
    })
}
