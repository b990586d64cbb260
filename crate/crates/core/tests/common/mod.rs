//! Brute-force reference implementations shared by integration tests.
#![allow(dead_code)]

use powertail::zeta::hurwitz_zeta;
use powertail::Kind;
use rand::Rng;

/// Exhaustive threshold scan result.
#[derive(Debug, Clone, Copy)]
pub struct Brute {
    pub xmin: f64,
    pub alpha: f64,
    pub ks: f64,
}

/// O(n²) KS distance: empirical CDF values are counted afresh at every point.
pub fn ks_continuous_oracle(tail: &[f64], alpha: f64, xmin: f64) -> f64 {
    let n = tail.len() as f64;
    let mut d: f64 = 0.0;
    for &x in tail {
        let le = tail.iter().filter(|&&y| y <= x).count() as f64 / n;
        let lt = tail.iter().filter(|&&y| y < x).count() as f64 / n;
        let cdf = 1.0 - (x / xmin).powf(1.0 - alpha);
        d = d.max((le - cdf).abs()).max((lt - cdf).abs());
    }
    d
}

/// Discrete KS evaluated at every integer between `xmin` and the tail maximum,
/// with the model CDF accumulated term by term.
pub fn ks_discrete_oracle(tail: &[f64], alpha: f64, xmin: f64) -> f64 {
    let n = tail.len() as f64;
    let norm = hurwitz_zeta(alpha, xmin);
    let top = tail.iter().cloned().fold(xmin, f64::max) as u64;
    let mut mass = 0.0;
    let mut d: f64 = 0.0;
    for x in xmin as u64..=top {
        mass += (x as f64).powf(-alpha);
        let cdf = mass / norm;
        let le = tail.iter().filter(|&&y| y <= x as f64).count() as f64 / n;
        d = d.max((le - cdf).abs());
    }
    d
}

pub fn alpha_continuous_oracle(tail: &[f64], xmin: f64) -> Option<f64> {
    let s: f64 = tail.iter().map(|x| (x / xmin).ln()).sum();
    (s > 0.0).then(|| 1.0 + tail.len() as f64 / s)
}

/// Ternary search on the exact discrete log-likelihood.
pub fn alpha_discrete_oracle(tail: &[f64], xmin: f64) -> Option<f64> {
    if tail.iter().all(|&x| x == xmin) {
        return None;
    }
    let n = tail.len() as f64;
    let sum_ln: f64 = tail.iter().map(|x| x.ln()).sum();
    let ll = |a: f64| -a * sum_ln - n * hurwitz_zeta(a, xmin).ln();
    let (mut lo, mut hi) = (1.01, 6.0);
    while hi - lo > 1e-10 {
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        if ll(m1) < ll(m2) {
            lo = m1;
        } else {
            hi = m2;
        }
    }
    Some(0.5 * (lo + hi))
}

/// Tries every distinct value leaving at least `min_tail` points and keeps the
/// first candidate with the smallest KS distance.
pub fn brute_select(values: &[f64], kind: Kind, min_tail: usize) -> Option<Brute> {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut distinct = sorted.clone();
    distinct.dedup();
    let mut best: Option<Brute> = None;
    for &xmin in &distinct {
        let tail: Vec<f64> = sorted.iter().cloned().filter(|&x| x >= xmin).collect();
        if tail.len() < min_tail {
            break;
        }
        let fitted = match kind {
            Kind::Continuous => alpha_continuous_oracle(&tail, xmin)
                .map(|a| (a, ks_continuous_oracle(&tail, a, xmin))),
            Kind::Discrete => alpha_discrete_oracle(&tail, xmin)
                .map(|a| (a, ks_discrete_oracle(&tail, a, xmin))),
        };
        if let Some((alpha, ks)) = fitted {
            if best.is_none_or(|b| ks < b.ks) {
                best = Some(Brute { xmin, alpha, ks });
            }
        }
    }
    best
}

/// Lognormal-ish body below `xmin` spliced onto a Pareto tail.
pub fn mixed_continuous<R: Rng>(rng: &mut R, n: usize, alpha: f64, xmin: f64) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let u: f64 = rng.gen_range(1e-12..1.0);
            if rng.gen_bool(0.6) {
                xmin * u.powf(-1.0 / (alpha - 1.0))
            } else {
                xmin * (0.05 + 0.95 * u)
            }
        })
        .collect()
}

/// Integer data: a zeta-like tail from rounding down a Pareto draw, plus a
/// uniform body on `1..xmin`.
pub fn mixed_discrete<R: Rng>(rng: &mut R, n: usize, alpha: f64, xmin: u64) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let u: f64 = rng.gen_range(1e-12..1.0);
            if xmin == 1 || rng.gen_bool(0.7) {
                ((xmin as f64 - 0.5) * u.powf(-1.0 / (alpha - 1.0)) + 0.5).floor()
            } else {
                rng.gen_range(1..xmin) as f64
            }
        })
        .collect()
}

/// Earnings per bucket read straight from `records_clean.csv`; an empty
/// platform list is the Patreon bucket.
pub fn clean_buckets(path: &std::path::Path) -> std::collections::BTreeMap<String, Vec<f64>> {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = |name: &str| header.iter().position(|h| *h == name).unwrap();
    let (pc, ec) = (col("platforms"), col("earnings"));
    let mut out: std::collections::BTreeMap<String, Vec<f64>> = Default::default();
    for line in lines {
        let f: Vec<&str> = line.split(',').collect();
        let bucket = if f[pc].is_empty() { "patreon" } else { f[pc] };
        assert!(!bucket.contains(';'), "multi-platform record survived: {line}");
        out.entry(bucket.to_string()).or_default().push(f[ec].parse().unwrap());
    }
    out
}

fn type7(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Recomputes every `table1.csv` cell from `records_clean.csv` and returns the
/// largest relative discrepancy.
pub fn table1_discrepancy(dir: &std::path::Path) -> f64 {
    let buckets = clean_buckets(&dir.join("records_clean.csv"));
    let text = std::fs::read_to_string(dir.join("table1.csv")).unwrap();
    let mut rows = 0;
    let mut worst: f64 = 0.0;
    for line in text.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let mut v = buckets[f[0]].clone();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let sd = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        let want = [
            n,
            mean,
            type7(&v, 0.5),
            sd,
            v[0],
            type7(&v, 0.25),
            type7(&v, 0.5),
            type7(&v, 0.75),
            v[v.len() - 1],
        ];
        for (cell, w) in f[1..].iter().zip(want) {
            let got: f64 = cell.parse().unwrap();
            worst = worst.max((got - w).abs() / w.abs().max(1e-300));
        }
        rows += 1;
    }
    assert_eq!(rows, buckets.len(), "table1 rows vs buckets");
    worst
}

/// Every file under `dir`, relative path to bytes.
pub fn snapshot(dir: &std::path::Path) -> std::collections::BTreeMap<String, Vec<u8>> {
    fn walk(root: &std::path::Path, d: &std::path::Path, out: &mut std::collections::BTreeMap<String, Vec<u8>>) {
        for e in std::fs::read_dir(d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                let rel = p.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.insert(rel, std::fs::read(&p).unwrap());
            }
        }
    }
    let mut out = Default::default();
    walk(dir, dir, &mut out);
    out
}

pub fn fixture(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

/// Runs `count` random select_xmin instances (n ≤ 500) against the exhaustive
/// scan and returns a description of each mismatch. Continuous exponents must
/// agree to 1e-9; discrete ones to 1e-5 (golden-section tolerance).
pub fn select_xmin_mismatches(kind: Kind, count: u64, master: u64) -> Vec<String> {
    use powertail::rng::{derive_seed, stream};
    use powertail::{select_xmin, FitOptions, Sample};
    let mut bad = Vec::new();
    for case in 0..count {
        let mut rng = stream(derive_seed(master, case));
        let n = rng.gen_range(60..=500);
        let (values, tol) = match kind {
            Kind::Continuous => {
                let alpha = rng.gen_range(1.6..3.5);
                (mixed_continuous(&mut rng, n, alpha, 10.0), 1e-9)
            }
            Kind::Discrete => {
                let alpha = rng.gen_range(2.0..3.5);
                let xmin = rng.gen_range(1..=6);
                (mixed_discrete(&mut rng, n, alpha, xmin), 1e-5)
            }
        };
        let min_tail = rng.gen_range(5..=30);
        let brute = brute_select(&values, kind, min_tail).unwrap();
        let s = Sample::new(values, kind).unwrap();
        let opts = FitOptions {
            kind,
            ..FitOptions::default()
        }
        .with_min_tail(min_tail);
        let fit = select_xmin(&s, &opts).unwrap();
        if fit.xmin != brute.xmin || (fit.alpha - brute.alpha).abs() > tol {
            bad.push(format!(
                "{kind:?} case {case}: ({}, {}) vs brute ({}, {})",
                fit.xmin, fit.alpha, brute.xmin, brute.alpha
            ));
        }
    }
    bad
}

/// Compares `ks_distance` with the double-loop oracles on `count` cases,
/// alternating continuous and discrete, and returns the largest difference.
pub fn ks_max_discrepancy(count: u64, master: u64) -> f64 {
    use powertail::powerlaw::ks_distance;
    use powertail::rng::{derive_seed, stream};
    use powertail::{PowerLawModel, Sample};
    let mut worst: f64 = 0.0;
    for case in 0..count {
        let mut rng = stream(derive_seed(master, case));
        let n = rng.gen_range(5..=300);
        let (kind, alpha, xmin, tail) = if case % 2 == 0 {
            let alpha = rng.gen_range(1.5..4.0);
            let xmin = rng.gen_range(0.5..20.0);
            let mut v = mixed_continuous(&mut rng, n, alpha, xmin);
            v.retain(|&x| x >= xmin);
            // Force a tie.
            if v.len() > 3 {
                v[1] = v[0];
            }
            (Kind::Continuous, alpha, xmin, v)
        } else {
            let alpha = rng.gen_range(2.0..4.0);
            let xmin = rng.gen_range(1..=5);
            let mut v = mixed_discrete(&mut rng, n, alpha, xmin);
            v.retain(|&x| x >= xmin as f64);
            (Kind::Discrete, alpha, xmin as f64, v)
        };
        if tail.is_empty() {
            continue;
        }
        let model = PowerLawModel::new(alpha, xmin, kind).unwrap();
        let got = ks_distance(&Sample::new(tail.clone(), kind).unwrap(), &model).unwrap();
        let want = match kind {
            Kind::Continuous => ks_continuous_oracle(&tail, alpha, xmin),
            Kind::Discrete => ks_discrete_oracle(&tail, alpha, xmin),
        };
        worst = worst.max((got - want).abs());
    }
    worst
}
