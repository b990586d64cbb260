//! Semiparametric bootstrap goodness of fit for a [`TailFit`].

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::{select_xmin, FitOptions, TailFit};
use crate::powerlaw::{pl_sample_with, Kind, Sample};
use crate::rng;

pub const MIN_BOOTSTRAP: usize = 100;

/// p-values below this are flagged as implausible power laws. Never enforced.
pub const PLAUSIBILITY_THRESHOLD: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GofResult {
    pub p_value: f64,
    pub n_boot: usize,
    pub observed_ks: f64,
    pub seed: u64,
    /// Replicates whose refitted KS distance reached `observed_ks`.
    pub exceed: usize,
}

impl GofResult {
    pub fn plausible(&self) -> bool {
        self.p_value >= PLAUSIBILITY_THRESHOLD
    }
}

/// Fraction of bootstrap replicates whose refitted KS distance is at least
/// `fit.ks`.
///
/// Each replicate has `|s|` observations. Every observation comes, with
/// probability `n_tail / n`, from the fitted power law above `xmin` and
/// otherwise uniformly from the sample values below `xmin`. Replicates are
/// refitted with `opts` and seeded from `(seed, replicate index)`, so the
/// result does not depend on scheduling.
pub fn gof_pvalue(
    s: &Sample,
    fit: &TailFit,
    n_boot: usize,
    seed: u64,
    opts: &FitOptions,
) -> Result<GofResult> {
    if n_boot < MIN_BOOTSTRAP {
        return Err(Error::InvalidArgument(format!(
            "need at least {MIN_BOOTSTRAP} bootstrap replicates, got {n_boot}"
        )));
    }
    check_fit_matches(s, fit)?;
    let body = &s.values()[..s.len() - fit.n_tail];
    if body.is_empty() && fit.n_tail < s.len() {
        return Err(Error::InvalidArgument("fit tail does not match sample body".into()));
    }
    let model = fit.model();
    let n = s.len();
    let tail_prob = fit.n_tail as f64 / n as f64;

    let distances = (0..n_boot as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = rng::stream(rng::derive_seed(seed, r));
            let mut values = Vec::with_capacity(n);
            let mut from_tail = 0;
            for _ in 0..n {
                if body.is_empty() || rng.gen::<f64>() < tail_prob {
                    from_tail += 1;
                } else {
                    values.push(body[rng.gen_range(0..body.len())]);
                }
            }
            if from_tail > 0 {
                values.extend_from_slice(pl_sample_with(&model, from_tail, &mut rng)?.values());
            }
            let replicate = Sample::new(values, fit.kind)?;
            Ok(select_xmin(&replicate, opts)?.ks)
        })
        .collect::<Result<Vec<f64>>>()?;

    let exceed = distances.iter().filter(|&&d| d >= fit.ks).count();
    Ok(GofResult {
        p_value: exceed as f64 / n_boot as f64,
        n_boot,
        observed_ks: fit.ks,
        seed,
        exceed,
    })
}

fn check_fit_matches(s: &Sample, fit: &TailFit) -> Result<()> {
    if fit.n != s.len() || s.tail(fit.xmin).len() != fit.n_tail {
        return Err(Error::InvalidArgument(format!(
            "fit (n = {}, n_tail = {}) was not produced from this sample (n = {}, tail = {})",
            fit.n,
            fit.n_tail,
            s.len(),
            s.tail(fit.xmin).len()
        )));
    }
    Ok(())
}

/// Share of the sample at or above the fitted threshold.
pub fn power_law_proportion(s: &Sample, fit: &TailFit) -> Result<f64> {
    check_fit_matches(s, fit)?;
    Ok(fit.n_tail as f64 / s.len() as f64)
}

/// Serialized fit summary shared by the CLI and report outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub alpha: f64,
    pub xmin: f64,
    pub n_tail: usize,
    pub ks: f64,
    pub stderr: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub p_value: Option<f64>,
    pub n: usize,
    pub kind: Kind,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub seed: Option<u64>,
}

impl FitReport {
    pub fn new(fit: &TailFit, gof: Option<&GofResult>) -> Self {
        FitReport {
            alpha: fit.alpha,
            xmin: fit.xmin,
            n_tail: fit.n_tail,
            ks: fit.ks,
            stderr: fit.stderr,
            p_value: gof.map(|g| g.p_value),
            n: fit.n,
            kind: fit.kind,
            seed: gof.map(|g| g.seed),
        }
    }
}
