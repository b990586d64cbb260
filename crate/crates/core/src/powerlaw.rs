//! Power-law distribution primitives shared by the fitting and simulation code.
//!
//! Exponents are density exponents throughout: p(x) ∝ x^{-alpha}. The
//! complementary CDF then decays as x^{-(alpha - 1)}; [`Convention`] converts
//! between the two.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::zeta::hurwitz_zeta;

/// Upper bound on discrete draws; keeps inverse-CDF search finite for alpha near 1.
const DISCRETE_DRAW_CAP: f64 = 1.0e15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Continuous,
    Discrete,
}

impl std::fmt::Display for Kind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Kind::Continuous => "continuous",
            Kind::Discrete => "discrete",
        })
    }
}

impl std::str::FromStr for Kind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "continuous" => Ok(Kind::Continuous),
            "discrete" => Ok(Kind::Discrete),
            other => Err(Error::InvalidArgument(format!("unknown kind '{other}'"))),
        }
    }
}

/// Positive observations, sorted ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    values: Vec<f64>,
    kind: Kind,
}

impl Sample {
    /// Keeps finite positive values and sorts them.
    pub fn new(values: impl IntoIterator<Item = f64>, kind: Kind) -> Result<Self> {
        Self::with_rejections(values, kind).map(|(s, _)| s)
    }

    /// Like [`Sample::new`], also returning how many inputs were dropped.
    pub fn with_rejections(
        values: impl IntoIterator<Item = f64>,
        kind: Kind,
    ) -> Result<(Self, usize)> {
        let mut rejected = 0;
        let mut kept: Vec<f64> = values
            .into_iter()
            .filter(|v| {
                let ok = v.is_finite() && *v > 0.0;
                if !ok {
                    rejected += 1;
                }
                ok
            })
            .collect();
        if kept.is_empty() {
            return Err(Error::EmptySample);
        }
        kept.sort_by(f64::total_cmp);
        Ok((Sample { values: kept, kind }, rejected))
    }

    /// Builds from values already known to be sorted, finite and positive.
    pub(crate) fn from_sorted_unchecked(values: Vec<f64>, kind: Kind) -> Self {
        debug_assert!(!values.is_empty());
        debug_assert!(values.windows(2).all(|w| w[0] <= w[1]));
        Sample { values, kind }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn kind(&self) -> Kind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.values[0]
    }

    pub fn max(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    /// Index of the first value ≥ `xmin`.
    pub fn tail_start(&self, xmin: f64) -> usize {
        self.values.partition_point(|&v| v < xmin)
    }

    /// Values ≥ `xmin`.
    pub fn tail(&self, xmin: f64) -> &[f64] {
        &self.values[self.tail_start(xmin)..]
    }

    pub fn tail_sample(&self, xmin: f64) -> Result<Sample> {
        let tail = self.tail(xmin);
        if tail.is_empty() {
            return Err(Error::EmptySample);
        }
        Ok(Sample::from_sorted_unchecked(tail.to_vec(), self.kind))
    }

    /// Multiplies every value by `c > 0`.
    pub fn scaled(&self, c: f64) -> Result<Sample> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::Domain(format!("scale factor must be positive, got {c}")));
        }
        Ok(Sample::from_sorted_unchecked(
            self.values.iter().map(|v| v * c).collect(),
            self.kind,
        ))
    }

    pub fn is_integral(&self) -> bool {
        self.values.iter().all(|v| v.fract() == 0.0)
    }

    pub fn with_kind(mut self, kind: Kind) -> Sample {
        self.kind = kind;
        self
    }
}

/// Which exponent a number refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Convention {
    /// p(x) ∝ x^{-alpha}
    Density,
    /// P(X ≥ x) ∝ x^{-alpha}
    Ccdf,
}

impl Convention {
    /// Re-expresses `alpha`, given in `self`, in the `target` convention.
    pub fn convert(self, alpha: f64, target: Convention) -> f64 {
        match (self, target) {
            (Convention::Density, Convention::Ccdf) => alpha - 1.0,
            (Convention::Ccdf, Convention::Density) => alpha + 1.0,
            _ => alpha,
        }
    }
}

pub fn density_to_ccdf(alpha: f64) -> f64 {
    Convention::Density.convert(alpha, Convention::Ccdf)
}

pub fn ccdf_to_density(alpha: f64) -> f64 {
    Convention::Ccdf.convert(alpha, Convention::Density)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawModel {
    pub alpha: f64,
    pub xmin: f64,
    pub kind: Kind,
}

impl PowerLawModel {
    pub fn new(alpha: f64, xmin: f64, kind: Kind) -> Result<Self> {
        if !(alpha > 1.0 && alpha.is_finite()) {
            return Err(Error::Domain(format!("alpha must exceed 1, got {alpha}")));
        }
        if !(xmin > 0.0 && xmin.is_finite()) {
            return Err(Error::Domain(format!("xmin must be positive, got {xmin}")));
        }
        if kind == Kind::Discrete && xmin.fract() != 0.0 {
            return Err(Error::KindMismatch(format!(
                "discrete model needs an integer xmin, got {xmin}"
            )));
        }
        Ok(PowerLawModel { alpha, xmin, kind })
    }

    pub fn continuous(alpha: f64, xmin: f64) -> Result<Self> {
        Self::new(alpha, xmin, Kind::Continuous)
    }

    pub fn discrete(alpha: f64, xmin: f64) -> Result<Self> {
        Self::new(alpha, xmin, Kind::Discrete)
    }

    /// P(X ≥ x).
    pub fn ccdf(&self, x: f64) -> Result<f64> {
        if !(x >= self.xmin) {
            return Err(Error::Domain(format!(
                "x = {x} lies below xmin = {}",
                self.xmin
            )));
        }
        Ok(self.ccdf_unchecked(x))
    }

    pub(crate) fn ccdf_unchecked(&self, x: f64) -> f64 {
        match self.kind {
            Kind::Continuous => (x / self.xmin).powf(1.0 - self.alpha),
            Kind::Discrete => {
                hurwitz_zeta(self.alpha, x) / hurwitz_zeta(self.alpha, self.xmin)
            }
        }
    }

    /// Density (continuous) or probability mass (discrete) at `x ≥ xmin`.
    pub fn pdf(&self, x: f64) -> Result<f64> {
        if !(x >= self.xmin) {
            return Err(Error::Domain(format!(
                "x = {x} lies below xmin = {}",
                self.xmin
            )));
        }
        Ok(match self.kind {
            Kind::Continuous => {
                (self.alpha - 1.0) / self.xmin * (x / self.xmin).powf(-self.alpha)
            }
            Kind::Discrete => x.powf(-self.alpha) / hurwitz_zeta(self.alpha, self.xmin),
        })
    }

    /// Exponent of the complementary CDF, `alpha - 1`.
    pub fn ccdf_exponent(&self) -> f64 {
        density_to_ccdf(self.alpha)
    }

    /// Value whose upper-tail probability is `1 - u`, for `u` in [0, 1).
    ///
    /// Continuous: `xmin·(1−u)^{−1/(alpha−1)}`. Discrete: the largest integer
    /// `x` with `P(X ≥ x) ≥ 1 − u`.
    pub fn quantile(&self, u: f64) -> Result<f64> {
        if !(0.0..1.0).contains(&u) {
            return Err(Error::Domain(format!("quantile level must be in [0,1), got {u}")));
        }
        Ok(match self.kind {
            Kind::Continuous => self.continuous_quantile(1.0 - u),
            Kind::Discrete => DiscreteInverter::new(self).invert(1.0 - u),
        })
    }

    fn continuous_quantile(&self, upper: f64) -> f64 {
        self.xmin * upper.powf(-1.0 / (self.alpha - 1.0))
    }
}

struct DiscreteInverter {
    alpha: f64,
    xmin: f64,
    norm: f64,
}

impl DiscreteInverter {
    fn new(model: &PowerLawModel) -> Self {
        DiscreteInverter {
            alpha: model.alpha,
            xmin: model.xmin,
            norm: hurwitz_zeta(model.alpha, model.xmin),
        }
    }

    fn ccdf(&self, x: f64) -> f64 {
        hurwitz_zeta(self.alpha, x) / self.norm
    }

    /// Largest integer `x ≥ xmin` with `P(X ≥ x) ≥ upper`.
    fn invert(&self, upper: f64) -> f64 {
        // Continuous approximation as a starting guess, then bracket and bisect.
        let guess = ((self.xmin - 0.5) * upper.powf(-1.0 / (self.alpha - 1.0)) + 0.5)
            .floor()
            .clamp(self.xmin, DISCRETE_DRAW_CAP);
        let (mut lo, mut hi);
        if self.ccdf(guess) >= upper {
            lo = guess;
            let mut step = 1.0;
            loop {
                hi = lo + step;
                if hi >= DISCRETE_DRAW_CAP {
                    hi = DISCRETE_DRAW_CAP;
                    if self.ccdf(hi) >= upper {
                        return hi;
                    }
                    break;
                }
                if self.ccdf(hi) < upper {
                    break;
                }
                lo = hi;
                step *= 2.0;
            }
        } else {
            hi = guess;
            let mut step = 1.0;
            loop {
                lo = (hi - step).max(self.xmin);
                if lo == self.xmin || self.ccdf(lo) >= upper {
                    break;
                }
                hi = lo;
                step *= 2.0;
            }
        }
        while hi - lo > 1.0 {
            let mid = ((lo + hi) / 2.0).floor();
            if self.ccdf(mid) >= upper {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }
}

/// Draws `n` values from `model`. Deterministic for a fixed seed.
pub fn pl_sample(model: &PowerLawModel, n: usize, seed: u64) -> Result<Sample> {
    let mut rng = rng::stream(seed);
    pl_sample_with(model, n, &mut rng)
}

pub(crate) fn pl_sample_with<R: Rng + ?Sized>(
    model: &PowerLawModel,
    n: usize,
    rng: &mut R,
) -> Result<Sample> {
    if n == 0 {
        return Err(Error::InvalidArgument("sample size must be at least 1".into()));
    }
    let mut values = Vec::with_capacity(n);
    match model.kind {
        Kind::Continuous => {
            for _ in 0..n {
                values.push(model.continuous_quantile(rng::open01(rng)));
            }
        }
        Kind::Discrete => {
            let inv = DiscreteInverter::new(model);
            for _ in 0..n {
                values.push(inv.invert(rng::open01(rng)));
            }
        }
    }
    values.sort_by(f64::total_cmp);
    Ok(Sample::from_sorted_unchecked(values, model.kind))
}

/// One `(x, P̂(X ≥ x))` point per distinct value.
pub fn empirical_ccdf(sample: &Sample) -> Vec<(f64, f64)> {
    ccdf_points(sample.values())
}

pub(crate) fn ccdf_points(sorted: &[f64]) -> Vec<(f64, f64)> {
    let n = sorted.len() as f64;
    let mut out = Vec::new();
    let mut i = 0;
    while i < sorted.len() {
        let x = sorted[i];
        out.push((x, (sorted.len() - i) as f64 / n));
        while i < sorted.len() && sorted[i] == x {
            i += 1;
        }
    }
    out
}

/// Kolmogorov–Smirnov distance between the tail's empirical CDF and `model`.
pub fn ks_distance(tail: &Sample, model: &PowerLawModel) -> Result<f64> {
    ks_sorted(tail.values(), model)
}

/// KS distance for a sorted slice of values, all ≥ `model.xmin`.
pub fn ks_sorted(tail: &[f64], model: &PowerLawModel) -> Result<f64> {
    if tail.is_empty() {
        return Err(Error::EmptySample);
    }
    if tail[0] < model.xmin {
        return Err(Error::Domain(format!(
            "tail value {} lies below xmin = {}",
            tail[0], model.xmin
        )));
    }
    Ok(match model.kind {
        Kind::Continuous => ks_continuous(tail, model.alpha, model.xmin),
        Kind::Discrete => ks_discrete(tail, model.alpha, model.xmin),
    })
}

pub(crate) fn ks_continuous(tail: &[f64], alpha: f64, xmin: f64) -> f64 {
    let n = tail.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in tail.iter().enumerate() {
        let cdf = 1.0 - (x / xmin).powf(1.0 - alpha);
        let below = i as f64 / n;
        let above = (i + 1) as f64 / n;
        d = d.max((above - cdf).abs()).max((cdf - below).abs());
    }
    d
}

/// Discrete KS: compares P̂(X ≤ x) with P(X ≤ x) at every distinct value and
/// P̂(X < x) with P(X ≤ x − 1), which covers every integer in the tail's range.
pub(crate) fn ks_discrete(tail: &[f64], alpha: f64, xmin: f64) -> f64 {
    let n = tail.len() as f64;
    let norm = hurwitz_zeta(alpha, xmin);
    let mut d: f64 = 0.0;
    let mut i = 0;
    while i < tail.len() {
        let x = tail[i];
        let mut j = i;
        while j < tail.len() && tail[j] == x {
            j += 1;
        }
        let below = i as f64 / n;
        let through = j as f64 / n;
        let cdf_before = 1.0 - hurwitz_zeta(alpha, x) / norm;
        let cdf_at = 1.0 - hurwitz_zeta(alpha, x + 1.0) / norm;
        d = d.max((below - cdf_before).abs()).max((through - cdf_at).abs());
        i = j;
    }
    d
}
