//! Maximum-likelihood power-law fits with KS-minimising threshold selection.
//!
//! The threshold scan visits every distinct sample value that leaves at least
//! `min_tail` observations in the tail. Continuous exponents come from suffix
//! sums of `ln x`, so each candidate costs O(1) before its KS distance. The KS
//! distance itself is evaluated by interval bisection with monotone bounds: the
//! empirical and model CDFs are both nondecreasing, so a block of consecutive
//! points can be discarded once its bound falls below the running maximum, and a
//! candidate is abandoned as soon as its partial maximum exceeds the best
//! distance found so far. Results are identical to a full scan.

use std::sync::atomic::{AtomicU64, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::powerlaw::{Kind, PowerLawModel, Sample};
use crate::zeta::hurwitz_zeta;

pub const DEFAULT_MIN_TAIL: usize = 50;

/// Search interval for the exact discrete exponent.
pub const DISCRETE_ALPHA_LOWER: f64 = 1.01;
pub const DISCRETE_ALPHA_UPPER: f64 = 6.0;
const DISCRETE_ALPHA_CEILING: f64 = 50.0;
const GOLDEN_TOLERANCE: f64 = 1e-6;

/// Blocks this small are scanned point by point.
const LEAF: usize = 16;
/// Candidates per parallel work unit in the threshold scan.
const CHUNK: usize = 2048;
/// Candidates visited by the seeding pass.
const PREPASS: usize = 1024;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub kind: Kind,
    /// Smallest tail a candidate threshold may leave.
    pub min_tail: usize,
    /// Fit at this threshold instead of scanning.
    pub xmin_override: Option<f64>,
    /// Scan at most this many candidates, evenly spaced by rank.
    pub candidate_cap: Option<usize>,
    /// Discrete kind only: exact zeta likelihood (true) or the continuous
    /// approximation with the half-integer shift (false).
    pub discrete_exact: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            kind: Kind::Continuous,
            min_tail: DEFAULT_MIN_TAIL,
            xmin_override: None,
            candidate_cap: None,
            discrete_exact: true,
        }
    }
}

impl FitOptions {
    pub fn continuous() -> Self {
        Self::default()
    }

    pub fn discrete() -> Self {
        FitOptions {
            kind: Kind::Discrete,
            ..Self::default()
        }
    }

    pub fn with_min_tail(mut self, min_tail: usize) -> Self {
        self.min_tail = min_tail;
        self
    }

    pub fn with_xmin(mut self, xmin: f64) -> Self {
        self.xmin_override = Some(xmin);
        self
    }

    pub fn with_candidate_cap(mut self, cap: usize) -> Self {
        self.candidate_cap = Some(cap);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.min_tail < 2 {
            return Err(Error::InvalidArgument(format!(
                "min_tail must be at least 2, got {}",
                self.min_tail
            )));
        }
        if self.candidate_cap == Some(0) {
            return Err(Error::InvalidArgument("candidate_cap must be positive".into()));
        }
        Ok(())
    }
}

/// Exponent estimate from a fixed tail.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MleEstimate {
    pub alpha: f64,
    pub stderr: f64,
    pub loglik: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailFit {
    pub alpha: f64,
    pub xmin: f64,
    pub n_tail: usize,
    pub ks: f64,
    pub stderr: f64,
    pub loglik: f64,
    /// Size of the sample the tail was taken from.
    pub n: usize,
    pub kind: Kind,
}

impl TailFit {
    pub fn model(&self) -> PowerLawModel {
        PowerLawModel {
            alpha: self.alpha,
            xmin: self.xmin,
            kind: self.kind,
        }
    }

    /// Exponent of the fitted complementary CDF.
    pub fn ccdf_alpha(&self) -> f64 {
        self.alpha - 1.0
    }
}

fn check_tail(tail: &[f64], xmin: f64) -> Result<()> {
    if tail.is_empty() {
        return Err(Error::EmptySample);
    }
    if !(xmin > 0.0) {
        return Err(Error::Domain(format!("xmin must be positive, got {xmin}")));
    }
    if let Some(bad) = tail.iter().find(|&&x| !(x >= xmin)) {
        return Err(Error::Domain(format!("tail value {bad} lies below xmin = {xmin}")));
    }
    Ok(())
}

/// α̂ = 1 + n / Σ ln(x_i / xmin).
pub fn mle_alpha_continuous(tail: &[f64], xmin: f64) -> Result<MleEstimate> {
    check_tail(tail, xmin)?;
    let log_spacing: f64 = tail.iter().map(|&x| (x / xmin).ln()).sum();
    continuous_estimate(tail.len(), log_spacing, xmin)
}

fn continuous_estimate(n: usize, log_spacing: f64, xmin: f64) -> Result<MleEstimate> {
    if !(log_spacing > 0.0) {
        return Err(Error::DegenerateTail(format!(
            "all {n} tail values equal xmin = {xmin}"
        )));
    }
    let nf = n as f64;
    let alpha = 1.0 + nf / log_spacing;
    Ok(MleEstimate {
        alpha,
        stderr: (alpha - 1.0) / nf.sqrt(),
        loglik: nf * (alpha - 1.0).ln() - nf * xmin.ln() - alpha * log_spacing,
    })
}

/// Discrete exponent for integer data ≥ `xmin ≥ 1`.
///
/// With `exact`, maximises `−α Σ ln x − n ln ζ(α, xmin)` by golden-section
/// search; otherwise returns `1 + n / Σ ln(x / (xmin − ½))`.
pub fn mle_alpha_discrete(tail: &[f64], xmin: f64, exact: bool) -> Result<MleEstimate> {
    check_tail(tail, xmin)?;
    if xmin < 1.0 || xmin.fract() != 0.0 {
        return Err(Error::KindMismatch(format!(
            "discrete fit needs an integer xmin ≥ 1, got {xmin}"
        )));
    }
    if let Some(bad) = tail.iter().find(|x| x.fract() != 0.0) {
        return Err(Error::KindMismatch(format!("non-integer value {bad} in discrete tail")));
    }
    if tail.iter().all(|&x| x == xmin) {
        return Err(Error::DegenerateTail(format!(
            "all {} tail values equal xmin = {xmin}",
            tail.len()
        )));
    }
    let sum_ln: f64 = tail.iter().map(|x| x.ln()).sum();
    Ok(discrete_estimate(tail.len(), sum_ln, xmin, exact))
}

fn discrete_loglik(alpha: f64, n: f64, sum_ln: f64, xmin: f64) -> f64 {
    -alpha * sum_ln - n * hurwitz_zeta(alpha, xmin).ln()
}

fn discrete_estimate(n: usize, sum_ln: f64, xmin: f64, exact: bool) -> MleEstimate {
    let nf = n as f64;
    let alpha = if exact {
        let f = |a: f64| discrete_loglik(a, nf, sum_ln, xmin);
        let mut upper = DISCRETE_ALPHA_UPPER;
        let mut alpha = golden_max(f, DISCRETE_ALPHA_LOWER, upper, GOLDEN_TOLERANCE);
        // Very steep tails sit against the default bracket; widen it.
        while upper - alpha < 10.0 * GOLDEN_TOLERANCE && upper < DISCRETE_ALPHA_CEILING {
            let lower = upper - 1.0;
            upper = (upper * 2.0).min(DISCRETE_ALPHA_CEILING);
            alpha = golden_max(f, lower, upper, GOLDEN_TOLERANCE);
        }
        alpha
    } else {
        let shifted = sum_ln - nf * (xmin - 0.5).ln();
        1.0 + nf / shifted
    };
    MleEstimate {
        alpha,
        stderr: (alpha - 1.0) / nf.sqrt(),
        loglik: discrete_loglik(alpha, nf, sum_ln, xmin),
    }
}

/// Maximiser of a unimodal `f` on `[lo, hi]`.
fn golden_max(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut c = hi - INV_PHI * (hi - lo);
    let mut d = lo + INV_PHI * (hi - lo);
    let mut fc = f(c);
    let mut fd = f(d);
    while hi - lo > tol {
        if fc > fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - INV_PHI * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + INV_PHI * (hi - lo);
            fd = f(d);
        }
    }
    (lo + hi) / 2.0
}

/// Fits the exponent at a fixed threshold and reports its KS distance.
pub fn fit_at(sample: &Sample, xmin: f64, opts: &FitOptions) -> Result<TailFit> {
    opts.validate()?;
    let tail = sample.tail(xmin);
    if tail.len() < 2 {
        return Err(Error::SampleTooSmall {
            needed: 2,
            got: tail.len(),
        });
    }
    let est = match opts.kind {
        Kind::Continuous => mle_alpha_continuous(tail, xmin)?,
        Kind::Discrete => mle_alpha_discrete(tail, xmin, opts.discrete_exact)?,
    };
    let model = PowerLawModel::new(est.alpha, xmin, opts.kind)?;
    let ks = crate::powerlaw::ks_sorted(tail, &model)?;
    Ok(TailFit {
        alpha: est.alpha,
        xmin,
        n_tail: tail.len(),
        ks,
        stderr: est.stderr,
        loglik: est.loglik,
        n: sample.len(),
        kind: opts.kind,
    })
}

/// Chooses the threshold whose maximum-likelihood fit minimises the KS
/// distance over the tail. Ties go to the smaller threshold.
pub fn select_xmin(sample: &Sample, opts: &FitOptions) -> Result<TailFit> {
    opts.validate()?;
    if let Some(xmin) = opts.xmin_override {
        return fit_at(sample, xmin, opts);
    }
    if sample.len() < opts.min_tail {
        return Err(Error::SampleTooSmall {
            needed: opts.min_tail,
            got: sample.len(),
        });
    }
    if opts.kind == Kind::Discrete && !sample.is_integral() {
        return Err(Error::KindMismatch("discrete fit on non-integer data".into()));
    }
    let values = sample.values();
    let starts = candidate_starts(values, opts);
    let scanner: Box<dyn CandidateScan + Sync> = match opts.kind {
        Kind::Continuous => Box::new(ContinuousScan::new(values)),
        Kind::Discrete => Box::new(DiscreteScan::new(values, opts.discrete_exact)),
    };

    // A coarse pass over evenly spaced candidates seeds the cutoff, so long
    // runs of steadily improving candidates are pruned in the full pass.
    let global = AtomicU64::new(f64::INFINITY.to_bits());
    let stride = (starts.len() / PREPASS).max(1);
    let mut hint = 0usize;
    for &start in starts.iter().step_by(stride) {
        let Some(alpha) = scanner.alpha(start) else {
            continue;
        };
        let cutoff = f64::from_bits(global.load(Ordering::Relaxed));
        match scanner.ks_bounded(start, alpha, hint, &|d| d >= cutoff) {
            Ok((d, argmax)) => {
                hint = argmax;
                global.fetch_min_f64(d);
            }
            Err(witness) => hint = witness,
        }
    }

    let winner = starts
        .par_chunks(CHUNK)
        .filter_map(|chunk| {
            let mut local: Option<(f64, usize, f64)> = None;
            let mut hint = 0usize;
            for &start in chunk {
                let Some(alpha) = scanner.alpha(start) else {
                    continue;
                };
                let cutoff_global = f64::from_bits(global.load(Ordering::Relaxed));
                let cutoff_local = local.map_or(f64::INFINITY, |l| l.0);
                let prune = |d: f64| d > cutoff_global || d >= cutoff_local;
                match scanner.ks_bounded(start, alpha, hint, &prune) {
                    Ok((d, argmax)) => {
                        hint = argmax;
                        local = Some((d, start, alpha));
                        global.fetch_min_f64(d);
                    }
                    Err(witness) => hint = witness,
                }
            }
            local
        })
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let Some((ks, start, alpha)) = winner else {
        return Err(Error::DegenerateTail(
            "no candidate threshold leaves a tail with spread".into(),
        ));
    };
    let xmin = values[start];
    let n_tail = values.len() - start;
    let est = scanner.estimate(start, alpha);
    Ok(TailFit {
        alpha,
        xmin,
        n_tail,
        ks,
        stderr: est.stderr,
        loglik: est.loglik,
        n: values.len(),
        kind: opts.kind,
    })
}

/// Index of the first occurrence of each eligible distinct value.
fn candidate_starts(values: &[f64], opts: &FitOptions) -> Vec<usize> {
    let n = values.len();
    let mut starts = Vec::new();
    let mut i = 0;
    while i < n && n - i >= opts.min_tail {
        starts.push(i);
        let x = values[i];
        i += values[i..].partition_point(|&v| v == x);
    }
    match opts.candidate_cap {
        Some(cap) if starts.len() > cap => {
            let total = starts.len();
            (0..cap).map(|k| starts[k * total / cap]).collect()
        }
        _ => starts,
    }
}

trait AtomicMinF64 {
    fn fetch_min_f64(&self, value: f64);
}

impl AtomicMinF64 for AtomicU64 {
    // Nonnegative finite floats order the same as their bit patterns.
    fn fetch_min_f64(&self, value: f64) {
        debug_assert!(value >= 0.0);
        self.fetch_min(value.to_bits(), Ordering::Relaxed);
    }
}

trait CandidateScan {
    /// Fitted exponent for the tail starting at `start`, or `None` when the
    /// tail has no spread.
    fn alpha(&self, start: usize) -> Option<f64>;
    fn estimate(&self, start: usize, alpha: f64) -> MleEstimate;
    /// Exact KS distance and the point attaining it, or, once `prune` accepts a
    /// partial maximum, the point that produced it. Points are identified by
    /// absolute position so a hint carries over between candidates.
    fn ks_bounded(
        &self,
        start: usize,
        alpha: f64,
        hint: usize,
        prune: &dyn Fn(f64) -> bool,
    ) -> Result<(f64, usize), usize>;
}

/// Per-point quantities for the bounded KS search: the empirical CDF just below
/// and at the point, and the model CDF at the matching edges.
#[derive(Clone, Copy)]
struct Edge {
    emp_lo: f64,
    emp_hi: f64,
    model_lo: f64,
    model_hi: f64,
}

impl Edge {
    fn gap(&self) -> f64 {
        (self.emp_hi - self.model_hi)
            .abs()
            .max((self.model_lo - self.emp_lo).abs())
    }
}

/// Maximum of `edge(i).gap()` over `0..len` with its argument. Gives up with
/// the current argument as soon as `prune` accepts the running maximum.
fn bounded_max(
    len: usize,
    hint: usize,
    edge: impl Fn(usize) -> Edge,
    prune: &dyn Fn(f64) -> bool,
) -> Result<(f64, usize), usize> {
    let first = edge(0);
    let last = edge(len - 1);
    let mut best = first.gap();
    let mut arg = 0;
    if last.gap() > best {
        best = last.gap();
        arg = len - 1;
    }
    if hint > 0 && hint < len - 1 {
        let g = edge(hint).gap();
        if g > best {
            best = g;
            arg = hint;
        }
    }
    if prune(best) {
        return Err(arg);
    }
    let mut stack = vec![(0usize, len - 1, first, last)];
    while let Some((a, b, ea, eb)) = stack.pop() {
        if b - a <= 1 {
            continue;
        }
        let bound = (eb.emp_hi - ea.model_lo).max(eb.model_hi - ea.emp_lo);
        if bound <= best {
            continue;
        }
        if b - a <= LEAF {
            for i in a + 1..b {
                let g = edge(i).gap();
                if g > best {
                    best = g;
                    arg = i;
                }
            }
            if prune(best) {
                return Err(arg);
            }
            continue;
        }
        let mid = a + (b - a) / 2;
        let em = edge(mid);
        let g = em.gap();
        if g > best {
            best = g;
            arg = mid;
            if prune(best) {
                return Err(arg);
            }
        }
        // Right half first so the left (popped next) is explored depth-first.
        stack.push((mid, b, em, eb));
        stack.push((a, mid, ea, em));
    }
    Ok((best, arg))
}

struct ContinuousScan<'a> {
    values: &'a [f64],
    /// suffix[i] = Σ_{j ≥ i} ln x_j
    suffix_ln: Vec<f64>,
}

impl<'a> ContinuousScan<'a> {
    fn new(values: &'a [f64]) -> Self {
        ContinuousScan {
            values,
            suffix_ln: suffix_log_sums(values),
        }
    }

    fn log_spacing(&self, start: usize) -> f64 {
        let m = (self.values.len() - start) as f64;
        self.suffix_ln[start] - m * self.values[start].ln()
    }
}

impl CandidateScan for ContinuousScan<'_> {
    fn alpha(&self, start: usize) -> Option<f64> {
        let m = self.values.len() - start;
        continuous_estimate(m, self.log_spacing(start), self.values[start])
            .ok()
            .map(|e| e.alpha)
    }

    fn estimate(&self, start: usize, _alpha: f64) -> MleEstimate {
        let m = self.values.len() - start;
        continuous_estimate(m, self.log_spacing(start), self.values[start])
            .expect("winning candidate has spread")
    }

    fn ks_bounded(
        &self,
        start: usize,
        alpha: f64,
        hint: usize,
        prune: &dyn Fn(f64) -> bool,
    ) -> Result<(f64, usize), usize> {
        let tail = &self.values[start..];
        let xmin = tail[0];
        let n = tail.len() as f64;
        let edge = |i: usize| {
            let cdf = 1.0 - (tail[i] / xmin).powf(1.0 - alpha);
            Edge {
                emp_lo: i as f64 / n,
                emp_hi: (i + 1) as f64 / n,
                model_lo: cdf,
                model_hi: cdf,
            }
        };
        let hint = hint.saturating_sub(start).min(tail.len() - 1);
        bounded_max(tail.len(), hint, edge, prune)
            .map(|(d, i)| (d, i + start))
            .map_err(|i| i + start)
    }
}

/// Compensated suffix sums of `ln x`.
fn suffix_log_sums(values: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; values.len() + 1];
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for i in (0..values.len()).rev() {
        let v = values[i].ln();
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
        out[i] = sum + comp;
    }
    out
}

struct DiscreteScan<'a> {
    values: &'a [f64],
    exact: bool,
    suffix_ln: Vec<f64>,
    /// Distinct values in ascending order.
    distinct: Vec<f64>,
    /// below[u] = number of observations smaller than distinct[u]; one extra
    /// entry holding the sample size.
    below: Vec<usize>,
}

impl<'a> DiscreteScan<'a> {
    fn new(values: &'a [f64], exact: bool) -> Self {
        let mut distinct = Vec::new();
        let mut below = Vec::new();
        let mut i = 0;
        while i < values.len() {
            let x = values[i];
            distinct.push(x);
            below.push(i);
            i += values[i..].partition_point(|&v| v == x);
        }
        below.push(values.len());
        DiscreteScan {
            values,
            exact,
            suffix_ln: suffix_log_sums(values),
            distinct,
            below,
        }
    }

    fn spread(&self, start: usize) -> bool {
        self.values[self.values.len() - 1] > self.values[start]
    }
}

impl CandidateScan for DiscreteScan<'_> {
    fn alpha(&self, start: usize) -> Option<f64> {
        self.spread(start).then(|| {
            let m = self.values.len() - start;
            discrete_estimate(m, self.suffix_ln[start], self.values[start], self.exact).alpha
        })
    }

    fn estimate(&self, start: usize, _alpha: f64) -> MleEstimate {
        let m = self.values.len() - start;
        discrete_estimate(m, self.suffix_ln[start], self.values[start], self.exact)
    }

    fn ks_bounded(
        &self,
        start: usize,
        alpha: f64,
        hint: usize,
        prune: &dyn Fn(f64) -> bool,
    ) -> Result<(f64, usize), usize> {
        let u0 = self.below.partition_point(|&b| b < start);
        let xmin = self.values[start];
        let norm = hurwitz_zeta(alpha, xmin);
        let n = (self.values.len() - start) as f64;
        let distinct = &self.distinct[u0..];
        let below = &self.below[u0..];
        let edge = |u: usize| {
            let x = distinct[u];
            Edge {
                emp_lo: (below[u] - start) as f64 / n,
                emp_hi: (below[u + 1] - start) as f64 / n,
                model_lo: 1.0 - hurwitz_zeta(alpha, x) / norm,
                model_hi: 1.0 - hurwitz_zeta(alpha, x + 1.0) / norm,
            }
        };
        let hint = hint.saturating_sub(u0).min(distinct.len() - 1);
        bounded_max(distinct.len(), hint, edge, prune)
            .map(|(d, u)| (d, u + u0))
            .map_err(|u| u + u0)
    }
}
