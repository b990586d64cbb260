//! Generative models of algorithmic attention.
//!
//! * The copying model: creators arrive one at a time holding one unit of
//!   attention, and each arrival is followed by a batch of attention events.
//!   An event goes to a uniformly random creator with probability `gamma`
//!   (exploration) and otherwise to a creator chosen proportionally to current
//!   attention (exploitation).
//! * The Barabási–Albert model: each new node attaches `m` edges to distinct
//!   existing nodes chosen proportionally to degree, starting from a complete
//!   graph on `m + 1` nodes.
//!
//! Proportional choice is a uniform draw from a flat urn holding one entry per
//! unit of attention (copying model) or per edge endpoint (BA), so every draw is
//! O(1).

use std::io::Write;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::{select_xmin, FitOptions, TailFit};
use crate::powerlaw::{Kind, Sample};
use crate::rng;

pub const MIN_COPY_NODES: usize = 1_000;
pub const SWEEP_GAMMA_MAX: f64 = 0.9;
pub const DEFAULT_EVENTS_PER_NODE: usize = 20;
/// Degree window for the BA log-log CCDF slope.
pub const BA_SLOPE_WINDOW: (u64, u64) = (10, 500);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GrowthModel {
    Copy,
    Ba,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthConfig {
    pub model: GrowthModel,
    pub n_nodes: usize,
    /// Exploration probability (copying model).
    pub gamma: f64,
    /// Edges per new node (BA model).
    pub m: usize,
    /// Attention events following each arrival (copying model).
    pub events_per_node: usize,
    pub seed: u64,
}

impl GrowthConfig {
    pub fn copy(n_nodes: usize, gamma: f64, seed: u64) -> Self {
        GrowthConfig {
            model: GrowthModel::Copy,
            n_nodes,
            gamma,
            m: 1,
            events_per_node: DEFAULT_EVENTS_PER_NODE,
            seed,
        }
    }

    pub fn ba(n_nodes: usize, m: usize, seed: u64) -> Self {
        GrowthConfig {
            model: GrowthModel::Ba,
            n_nodes,
            gamma: 0.0,
            m,
            events_per_node: 0,
            seed,
        }
    }

    pub fn with_events_per_node(mut self, events: usize) -> Self {
        self.events_per_node = events;
        self
    }

    pub fn validate(&self) -> Result<()> {
        match self.model {
            GrowthModel::Copy => {
                if !(0.0..=1.0).contains(&self.gamma) {
                    return Err(Error::Domain(format!(
                        "gamma must lie in [0, 1], got {}",
                        self.gamma
                    )));
                }
                if self.n_nodes < MIN_COPY_NODES {
                    return Err(Error::InvalidArgument(format!(
                        "copying model needs at least {MIN_COPY_NODES} creators, got {}",
                        self.n_nodes
                    )));
                }
                if self.events_per_node == 0 {
                    return Err(Error::InvalidArgument(
                        "events_per_node must be at least 1".into(),
                    ));
                }
            }
            GrowthModel::Ba => {
                if self.m < 1 {
                    return Err(Error::InvalidArgument("m must be at least 1".into()));
                }
                if self.n_nodes <= self.m + 1 {
                    return Err(Error::InvalidArgument(format!(
                        "BA model needs more than m + 1 = {} nodes, got {}",
                        self.m + 1,
                        self.n_nodes
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Attention (copying model) or degree (BA) per node, in arrival order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegreeSequence {
    pub counts: Vec<u64>,
    pub config: GrowthConfig,
    /// Attention events (copying model) or attached edges (BA).
    pub steps: u64,
    /// Attention held before any event: one unit per creator (copying model),
    /// or the seed graph's degree sum (BA).
    pub initial_units: u64,
}

impl DegreeSequence {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Copying model: `initial_units + steps`. BA: `2·m·(n − m − 1) + m·(m + 1)`.
    pub fn expected_total(&self) -> u64 {
        match self.config.model {
            GrowthModel::Copy => self.initial_units + self.steps,
            GrowthModel::Ba => 2 * self.steps + self.initial_units,
        }
    }

    /// Nonzero counts as a discrete sample.
    pub fn sample(&self) -> Result<Sample> {
        Sample::new(
            self.counts.iter().filter(|&&c| c > 0).map(|&c| c as f64),
            Kind::Discrete,
        )
    }

    /// Single-column CSV with header `count`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["count"])?;
        for c in &self.counts {
            w.write_record([c.to_string()])?;
        }
        w.flush().map_err(|e| Error::io("<degree csv>", e))?;
        Ok(())
    }
}

/// Density exponent `1 + 1/(1 − gamma)` of the exploration/exploitation model.
pub fn theoretical_alpha(gamma: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::Domain(format!("gamma must lie in [0, 1], got {gamma}")));
    }
    if gamma == 1.0 {
        return Err(Error::ExponentialRegime);
    }
    Ok(1.0 + 1.0 / (1.0 - gamma))
}

/// Density exponent of the copying model with `events` attention events per
/// arrival. Each arrival adds one unit of its own, which dilutes the
/// proportional share: `1 + (1 + 1/events)/(1 − gamma)`. Tends to
/// [`theoretical_alpha`] as `events` grows.
pub fn finite_batch_alpha(gamma: f64, events: usize) -> Result<f64> {
    if events == 0 {
        return Err(Error::InvalidArgument("events must be at least 1".into()));
    }
    let limit = theoretical_alpha(gamma)?;
    Ok(1.0 + (limit - 1.0) * (1.0 + 1.0 / events as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoryPrediction {
    pub gamma: f64,
    /// Density exponent; infinite at `gamma = 1`.
    pub alpha_predicted: f64,
    pub ccdf_alpha_predicted: f64,
}

impl TheoryPrediction {
    pub fn new(gamma: f64) -> Result<Self> {
        let alpha = match theoretical_alpha(gamma) {
            Ok(a) => a,
            Err(Error::ExponentialRegime) => f64::INFINITY,
            Err(e) => return Err(e),
        };
        Ok(TheoryPrediction {
            gamma,
            alpha_predicted: alpha,
            ccdf_alpha_predicted: alpha - 1.0,
        })
    }
}

pub fn simulate(cfg: &GrowthConfig) -> Result<DegreeSequence> {
    match cfg.model {
        GrowthModel::Copy => simulate_copy(cfg),
        GrowthModel::Ba => simulate_ba(cfg),
    }
}

pub fn simulate_copy(cfg: &GrowthConfig) -> Result<DegreeSequence> {
    if cfg.model != GrowthModel::Copy {
        return Err(Error::InvalidArgument("expected a copying-model config".into()));
    }
    cfg.validate()?;
    let n = cfg.n_nodes;
    let events = cfg.events_per_node;
    let mut rng = rng::stream(cfg.seed);
    let mut counts = vec![0u64; n];
    let mut urn: Vec<u32> = Vec::with_capacity(n * (events + 1));
    for creator in 0..n {
        counts[creator] = 1;
        urn.push(creator as u32);
        for _ in 0..events {
            let target = if rng.gen::<f64>() < cfg.gamma {
                rng.gen_range(0..=creator)
            } else {
                urn[rng.gen_range(0..urn.len())] as usize
            };
            counts[target] += 1;
            urn.push(target as u32);
        }
    }
    Ok(DegreeSequence {
        counts,
        config: cfg.clone(),
        steps: (n * events) as u64,
        initial_units: n as u64,
    })
}

pub fn simulate_ba(cfg: &GrowthConfig) -> Result<DegreeSequence> {
    if cfg.model != GrowthModel::Ba {
        return Err(Error::InvalidArgument("expected a BA config".into()));
    }
    cfg.validate()?;
    let (n, m) = (cfg.n_nodes, cfg.m);
    let seed_nodes = m + 1;
    let mut rng = rng::stream(cfg.seed);
    let mut degree = vec![0u64; n];
    let mut endpoints: Vec<u32> = Vec::with_capacity(seed_nodes * m + 2 * m * (n - seed_nodes));
    for a in 0..seed_nodes {
        for b in a + 1..seed_nodes {
            endpoints.push(a as u32);
            endpoints.push(b as u32);
            degree[a] += 1;
            degree[b] += 1;
        }
    }
    let initial_units = endpoints.len() as u64;
    let mut targets: Vec<u32> = Vec::with_capacity(m);
    for node in seed_nodes..n {
        targets.clear();
        while targets.len() < m {
            let t = endpoints[rng.gen_range(0..endpoints.len())];
            if !targets.contains(&t) {
                targets.push(t);
            }
        }
        for &t in &targets {
            endpoints.push(node as u32);
            endpoints.push(t);
            degree[node] += 1;
            degree[t as usize] += 1;
        }
    }
    Ok(DegreeSequence {
        counts: degree,
        config: cfg.clone(),
        steps: (m * (n - seed_nodes)) as u64,
        initial_units,
    })
}

/// Discrete threshold-selected fit of the nonzero counts.
pub fn measure_exponent(d: &DegreeSequence, opts: &FitOptions) -> Result<TailFit> {
    let opts = FitOptions {
        kind: Kind::Discrete,
        ..opts.clone()
    };
    select_xmin(&d.sample()?, &opts)
}

/// Least-squares slope of `ln P̂(K ≥ k)` against `ln k` at log-spaced integer
/// degrees in `[lo, hi]`.
pub fn ccdf_slope(counts: &[u64], lo: u64, hi: u64) -> Result<f64> {
    if lo == 0 || hi <= lo {
        return Err(Error::InvalidArgument(format!("bad degree window [{lo}, {hi}]")));
    }
    let mut sorted: Vec<u64> = counts.to_vec();
    sorted.sort_unstable();
    let n = sorted.len() as f64;
    const POINTS: usize = 40;
    let ratio = (hi as f64 / lo as f64).ln();
    let mut ks: Vec<u64> = (0..POINTS)
        .map(|i| (lo as f64 * (ratio * i as f64 / (POINTS - 1) as f64).exp()).round() as u64)
        .collect();
    ks.dedup();
    let pts: Vec<(f64, f64)> = ks
        .iter()
        .filter_map(|&k| {
            let at_least = sorted.len() - sorted.partition_point(|&c| c < k);
            (at_least > 0).then(|| ((k as f64).ln(), (at_least as f64 / n).ln()))
        })
        .collect();
    if pts.len() < 3 {
        return Err(Error::SampleTooSmall {
            needed: 3,
            got: pts.len(),
        });
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / pts.len() as f64;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / pts.len() as f64;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub gamma: f64,
    pub alpha_pred: f64,
    pub alpha_mean: f64,
    pub alpha_sd: f64,
    pub n_runs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepOptions {
    pub events_per_node: usize,
    pub fit: FitOptions,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            events_per_node: DEFAULT_EVENTS_PER_NODE,
            fit: FitOptions::discrete(),
        }
    }
}

pub fn gamma_sweep(
    gammas: &[f64],
    n_nodes: usize,
    seeds_per_gamma: usize,
    seed: u64,
) -> Result<Vec<SweepRow>> {
    gamma_sweep_with(gammas, n_nodes, seeds_per_gamma, seed, &SweepOptions::default())
}

/// Mean and standard deviation of the measured exponent over independent runs
/// per `gamma`. Run `r` of the `i`-th gamma is seeded from `(seed, i, r)`.
pub fn gamma_sweep_with(
    gammas: &[f64],
    n_nodes: usize,
    seeds_per_gamma: usize,
    seed: u64,
    opts: &SweepOptions,
) -> Result<Vec<SweepRow>> {
    if let Some(g) = gammas.iter().find(|g| !(0.0..=SWEEP_GAMMA_MAX).contains(*g)) {
        return Err(Error::Domain(format!(
            "sweep gammas must lie in [0, {SWEEP_GAMMA_MAX}], got {g}"
        )));
    }
    if gammas.is_empty() {
        return Ok(Vec::new());
    }
    if seeds_per_gamma == 0 {
        return Err(Error::InvalidArgument("seeds_per_gamma must be positive".into()));
    }
    let jobs: Vec<(usize, usize)> = (0..gammas.len())
        .flat_map(|g| (0..seeds_per_gamma).map(move |r| (g, r)))
        .collect();
    let alphas = jobs
        .par_iter()
        .map(|&(g, r)| {
            let run_seed = rng::derive_seed(rng::derive_seed(seed, g as u64), r as u64);
            let cfg = GrowthConfig::copy(n_nodes, gammas[g], run_seed)
                .with_events_per_node(opts.events_per_node);
            Ok(measure_exponent(&simulate_copy(&cfg)?, &opts.fit)?.alpha)
        })
        .collect::<Result<Vec<f64>>>()?;

    let mut rows: Vec<SweepRow> = gammas
        .iter()
        .enumerate()
        .map(|(g, &gamma)| {
            let runs = &alphas[g * seeds_per_gamma..(g + 1) * seeds_per_gamma];
            let mean = runs.iter().sum::<f64>() / runs.len() as f64;
            let sd = if runs.len() > 1 {
                (runs.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (runs.len() - 1) as f64)
                    .sqrt()
            } else {
                0.0
            };
            SweepRow {
                gamma,
                alpha_pred: theoretical_alpha(gamma).expect("gamma checked above"),
                alpha_mean: mean,
                alpha_sd: sd,
                n_runs: runs.len(),
            }
        })
        .collect();
    rows.sort_by(|a, b| a.gamma.total_cmp(&b.gamma));
    Ok(rows)
}

/// CSV with header `gamma,alpha_pred,alpha_mean,alpha_sd,n_runs`.
pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["gamma", "alpha_pred", "alpha_mean", "alpha_sd", "n_runs"])?;
    for r in rows {
        w.write_record([
            r.gamma.to_string(),
            r.alpha_pred.to_string(),
            r.alpha_mean.to_string(),
            r.alpha_sd.to_string(),
            r.n_runs.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<sweep csv>", e))?;
    Ok(())
}
