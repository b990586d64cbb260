//! Figure and table data derived from fits and summary statistics.
//!
//! Nothing here re-estimates anything: every function takes finished
//! [`TailFit`]s or [`PlatformStats`] and only rearranges them.

mod manifest;
mod svg;

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::earnings::PlatformStats;
use crate::error::{Error, Result};
use crate::fit::TailFit;
use crate::powerlaw::{empirical_ccdf, Sample};

pub use manifest::{sha256_hex, Artifact, ArtifactManifest};
pub use svg::{render_svg, SvgOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    LogLog,
    Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Style {
    Points,
    Line,
    Bars,
}

/// Log-log line `log10 y = intercept + slope · log10 x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FittedLine {
    pub slope: f64,
    pub intercept: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotSeries {
    pub name: String,
    pub points: Vec<(f64, f64)>,
    pub scale: Scale,
    pub style: Style,
    /// Category names for bar charts, one per point.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub labels: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xmin: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub line: Option<FittedLine>,
}

impl PlotSeries {
    pub fn new(name: impl Into<String>, points: Vec<(f64, f64)>, scale: Scale, style: Style) -> Self {
        PlotSeries {
            name: name.into(),
            points,
            scale,
            style,
            labels: Vec::new(),
            xmin: None,
            line: None,
        }
    }

    pub fn check(&self) -> Result<()> {
        if self.scale == Scale::LogLog {
            if let Some(&(x, y)) = self.points.iter().find(|(x, y)| !(*x > 0.0 && *y > 0.0)) {
                return Err(Error::Render {
                    series: self.name.clone(),
                    reason: format!("nonpositive point ({x}, {y}) on log-log axes"),
                });
            }
        }
        if let Some(&(x, y)) = self.points.iter().find(|(x, y)| !x.is_finite() || !y.is_finite()) {
            return Err(Error::Render {
                series: self.name.clone(),
                reason: format!("non-finite point ({x}, {y})"),
            });
        }
        Ok(())
    }

    /// CSV with header `x,y`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["x", "y"])?;
        for (x, y) in &self.points {
            w.write_record([x.to_string(), y.to_string()])?;
        }
        w.flush().map_err(|e| Error::io("<series csv>", e))?;
        Ok(())
    }
}

/// Empirical CCDF, the fitted power law and a vertical threshold marker.
///
/// The fitted line passes through `(xmin, P̂(X ≥ xmin))` with log-log slope
/// `−(alpha − 1)` and extends to the sample maximum.
pub fn ccdf_figure(sample: &Sample, fit: &TailFit) -> Result<Vec<PlotSeries>> {
    if fit.n != sample.len() || sample.tail(fit.xmin).len() != fit.n_tail {
        return Err(Error::InvalidArgument(
            "fit was not produced from this sample".into(),
        ));
    }
    let empirical = empirical_ccdf(sample);
    let anchor = fit.n_tail as f64 / fit.n as f64;
    let slope = -(fit.alpha - 1.0);
    let intercept = anchor.log10() - slope * fit.xmin.log10();
    let x_end = sample.max().max(fit.xmin);
    let line_at = |x: f64| anchor * (x / fit.xmin).powf(slope);
    let mut fitted = PlotSeries::new(
        "power-law fit",
        vec![(fit.xmin, anchor), (x_end, line_at(x_end))],
        Scale::LogLog,
        Style::Line,
    );
    fitted.line = Some(FittedLine { slope, intercept });
    let y_low = empirical.last().map_or(anchor, |p| p.1).min(line_at(x_end));
    let mut marker = PlotSeries::new(
        "xmin",
        vec![(fit.xmin, y_low), (fit.xmin, 1.0)],
        Scale::LogLog,
        Style::Line,
    );
    marker.xmin = Some(fit.xmin);
    let mut emp = PlotSeries::new("empirical CCDF", empirical, Scale::LogLog, Style::Points);
    emp.xmin = Some(fit.xmin);
    Ok(vec![emp, fitted, marker])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlatformAlpha {
    pub platform: String,
    /// Mean of the per-year exponents.
    pub mean_alpha: f64,
    pub n_years: usize,
    /// Exponent fitted on all years pooled, when supplied.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pooled_alpha: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YearAlpha {
    pub platform: String,
    pub year: i32,
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaPanel {
    /// Sorted by ascending mean exponent.
    pub by_platform: Vec<PlatformAlpha>,
    /// Sorted by platform, then year.
    pub by_year: Vec<YearAlpha>,
}

/// Per-platform mean exponent across years and the per-year series.
pub fn alpha_panel(fits: &BTreeMap<(String, i32), TailFit>) -> Result<AlphaPanel> {
    let alphas: BTreeMap<(String, i32), f64> =
        fits.iter().map(|(k, f)| (k.clone(), f.alpha)).collect();
    alpha_panel_from(&alphas)
}

/// As [`alpha_panel`], from bare exponents.
pub fn alpha_panel_from(alphas: &BTreeMap<(String, i32), f64>) -> Result<AlphaPanel> {
    if alphas.is_empty() {
        return Err(Error::InvalidArgument("no fits supplied".into()));
    }
    let by_year: Vec<YearAlpha> = alphas
        .iter()
        .map(|((platform, year), &alpha)| YearAlpha {
            platform: platform.clone(),
            year: *year,
            alpha,
        })
        .collect();
    let mut groups: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for row in &by_year {
        groups.entry(&row.platform).or_default().push(row.alpha);
    }
    let mut by_platform: Vec<PlatformAlpha> = groups
        .into_iter()
        .map(|(platform, a)| PlatformAlpha {
            platform: platform.to_string(),
            mean_alpha: a.iter().sum::<f64>() / a.len() as f64,
            n_years: a.len(),
            pooled_alpha: None,
        })
        .collect();
    by_platform.sort_by(|a, b| {
        a.mean_alpha
            .total_cmp(&b.mean_alpha)
            .then_with(|| a.platform.cmp(&b.platform))
    });
    Ok(AlphaPanel {
        by_platform,
        by_year,
    })
}

impl AlphaPanel {
    /// Attaches pooled-sample exponents to the per-platform rows.
    pub fn with_pooled(mut self, pooled: &BTreeMap<String, f64>) -> Self {
        for row in &mut self.by_platform {
            row.pooled_alpha = pooled.get(&row.platform).copied();
        }
        self
    }

    /// One line series per platform, exponent against year.
    pub fn year_series(&self) -> Vec<PlotSeries> {
        let mut by: BTreeMap<&str, Vec<(f64, f64)>> = BTreeMap::new();
        for r in &self.by_year {
            by.entry(&r.platform).or_default().push((r.year as f64, r.alpha));
        }
        by.into_iter()
            .map(|(p, pts)| PlotSeries::new(p, pts, Scale::Linear, Style::Line))
            .collect()
    }

    pub fn write_platform_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["platform", "mean_alpha", "n_years", "pooled_alpha"])?;
        for r in &self.by_platform {
            w.write_record([
                r.platform.clone(),
                r.mean_alpha.to_string(),
                r.n_years.to_string(),
                r.pooled_alpha.map(|a| a.to_string()).unwrap_or_default(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<alpha csv>", e))?;
        Ok(())
    }

    pub fn write_year_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["platform", "year", "alpha"])?;
        for r in &self.by_year {
            w.write_record([r.platform.clone(), r.year.to_string(), r.alpha.to_string()])?;
        }
        w.flush().map_err(|e| Error::io("<alpha csv>", e))?;
        Ok(())
    }
}

/// Ranks starting at 1, ties sharing the average of their positions.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && x[order[j + 1]] == x[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman's `1 − 6 Σd² / (n(n² − 1))` on average ranks. `None` below three
/// observations.
pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 3 {
        return None;
    }
    let (rx, ry) = (average_ranks(x), average_ranks(y));
    let d2: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - b).powi(2)).sum();
    let n = x.len() as f64;
    Some(1.0 - 6.0 * d2 / (n * (n * n - 1.0)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MedianAlphaRow {
    pub platform: String,
    pub median: f64,
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MedianVsAlpha {
    pub rows: Vec<MedianAlphaRow>,
    /// Omitted below three platforms.
    pub spearman: Option<f64>,
}

/// Median earnings against exponent for platforms present in both inputs.
pub fn median_vs_alpha(stats: &[PlatformStats], alphas: &BTreeMap<String, f64>) -> MedianVsAlpha {
    let mut rows: Vec<MedianAlphaRow> = stats
        .iter()
        .filter_map(|s| {
            alphas.get(&s.platform).map(|&alpha| MedianAlphaRow {
                platform: s.platform.clone(),
                median: s.median,
                alpha,
            })
        })
        .collect();
    rows.sort_by(|a, b| a.platform.cmp(&b.platform));
    let med: Vec<f64> = rows.iter().map(|r| r.median).collect();
    let alp: Vec<f64> = rows.iter().map(|r| r.alpha).collect();
    MedianVsAlpha {
        spearman: spearman(&med, &alp),
        rows,
    }
}

impl MedianVsAlpha {
    pub fn series(&self) -> PlotSeries {
        let mut s = PlotSeries::new(
            "median vs alpha",
            self.rows.iter().map(|r| (r.median, r.alpha)).collect(),
            Scale::Linear,
            Style::Points,
        );
        s.labels = self.rows.iter().map(|r| r.platform.clone()).collect();
        s
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["platform", "median", "alpha"])?;
        for r in &self.rows {
            w.write_record([r.platform.clone(), r.median.to_string(), r.alpha.to_string()])?;
        }
        w.flush().map_err(|e| Error::io("<scatter csv>", e))?;
        Ok(())
    }
}

/// Bars of the power-law proportion per platform, largest first.
pub fn proportion_figure(proportions: &[(String, f64)]) -> Result<PlotSeries> {
    if let Some((p, v)) = proportions.iter().find(|(_, v)| !(0.0..=1.0).contains(v)) {
        return Err(Error::Domain(format!("proportion for {p} is {v}, outside [0, 1]")));
    }
    let mut sorted = proportions.to_vec();
    sorted.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let mut s = PlotSeries::new(
        "power-law proportion",
        sorted
            .iter()
            .enumerate()
            .map(|(i, (_, v))| ((i + 1) as f64, *v))
            .collect(),
        Scale::Linear,
        Style::Bars,
    );
    s.labels = sorted.into_iter().map(|(p, _)| p).collect();
    Ok(s)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryRow {
    pub category: String,
    pub alpha: f64,
    pub obs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryPanel {
    /// Sorted by ascending exponent.
    pub rows: Vec<CategoryRow>,
    pub simple_mean: f64,
    /// Mean weighted by observation count.
    pub weighted_mean: f64,
}

pub fn category_panel(rows: &[CategoryRow]) -> Result<CategoryPanel> {
    if rows.is_empty() {
        return Err(Error::InvalidArgument("no categories supplied".into()));
    }
    let total: usize = rows.iter().map(|r| r.obs).sum();
    if total == 0 {
        return Err(Error::InvalidArgument("categories have no observations".into()));
    }
    let simple_mean = rows.iter().map(|r| r.alpha).sum::<f64>() / rows.len() as f64;
    let weighted_mean = rows.iter().map(|r| r.alpha * r.obs as f64).sum::<f64>() / total as f64;
    let mut sorted = rows.to_vec();
    sorted.sort_by(|a, b| a.alpha.total_cmp(&b.alpha).then_with(|| a.category.cmp(&b.category)));
    Ok(CategoryPanel {
        rows: sorted,
        simple_mean,
        weighted_mean,
    })
}

impl CategoryPanel {
    pub fn series(&self) -> PlotSeries {
        let mut s = PlotSeries::new(
            "alpha by category",
            self.rows
                .iter()
                .enumerate()
                .map(|(i, r)| ((i + 1) as f64, r.alpha))
                .collect(),
            Scale::Linear,
            Style::Bars,
        );
        s.labels = self.rows.iter().map(|r| r.category.clone()).collect();
        s
    }

    /// Category rows followed by the `simple_mean` and `weighted_mean` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["category", "alpha", "obs"])?;
        for r in &self.rows {
            w.write_record([r.category.clone(), r.alpha.to_string(), r.obs.to_string()])?;
        }
        let total: usize = self.rows.iter().map(|r| r.obs).sum();
        w.write_record(["simple_mean".to_string(), self.simple_mean.to_string(), total.to_string()])?;
        w.write_record(["weighted_mean".to_string(), self.weighted_mean.to_string(), total.to_string()])?;
        w.flush().map_err(|e| Error::io("<category csv>", e))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fit::{select_xmin, FitOptions};
    use crate::powerlaw::{pl_sample, PowerLawModel};
    use crate::rng;
    use rand::Rng;

    #[test]
    fn ccdf_figure_geometry() {
        let s = pl_sample(&PowerLawModel::continuous(2.0, 1.0).unwrap(), 20_000, 11).unwrap();
        let fit = select_xmin(&s, &FitOptions::continuous()).unwrap();
        let series = ccdf_figure(&s, &fit).unwrap();
        assert_eq!(series.len(), 3);
        let line = series[1].line.unwrap();
        assert!((line.slope + 1.0).abs() <= 0.02, "{}", line.slope);
        let (x0, y0) = series[1].points[0];
        assert_eq!(x0, fit.xmin);
        assert_eq!(y0, fit.n_tail as f64 / fit.n as f64);
        assert!((y0.log10() - (line.intercept + line.slope * x0.log10())).abs() < 1e-12);
        assert!(series[2].points.iter().all(|p| p.0 == fit.xmin));
        assert_eq!(series[2].xmin, Some(fit.xmin));
        assert!(series[0].points.windows(2).all(|w| w[1].1 <= w[0].1 && w[1].0 > w[0].0));
        assert!(series.iter().all(|s| s.check().is_ok()));

        let other = pl_sample(&PowerLawModel::continuous(2.0, 1.0).unwrap(), 100, 1).unwrap();
        assert!(ccdf_figure(&other, &fit).is_err());
    }

    #[test]
    fn alpha_panel_means_and_order() {
        let mut a = BTreeMap::new();
        a.insert(("youtube".to_string(), 2018), 2.1);
        a.insert(("youtube".to_string(), 2024), 1.9);
        let p = alpha_panel_from(&a).unwrap();
        assert_eq!(p.by_platform.len(), 1);
        assert!((p.by_platform[0].mean_alpha - 2.0).abs() < 1e-15);
        assert_eq!(p.by_year.iter().map(|r| r.year).collect::<Vec<_>>(), vec![2018, 2024]);

        let reported = [
            ("twitter", 2.35),
            ("facebook", 1.94),
            ("youtube", 1.8),
            ("patreon", 2.24),
            ("instagram", 1.84),
            ("twitch", 1.93),
        ];
        let map: BTreeMap<(String, i32), f64> = reported
            .iter()
            .map(|(p, a)| ((p.to_string(), 2024), *a))
            .collect();
        let p = alpha_panel_from(&map).unwrap();
        let order: Vec<&str> = p.by_platform.iter().map(|r| r.platform.as_str()).collect();
        assert_eq!(
            order,
            vec!["youtube", "instagram", "twitch", "facebook", "patreon", "twitter"]
        );
        let pooled = BTreeMap::from([("twitch".to_string(), 1.9)]);
        let p = p.with_pooled(&pooled);
        assert_eq!(p.by_platform[2].pooled_alpha, Some(1.9));
        assert_eq!(p.by_platform[0].pooled_alpha, None);
        assert_eq!(p.year_series().len(), 6);
        assert!(alpha_panel_from(&BTreeMap::new()).is_err());
    }

    fn stats(platform: &str, median: f64) -> PlatformStats {
        PlatformStats {
            platform: platform.into(),
            obs: 10,
            mean: median,
            median,
            sd: 1.0,
            sd_defined: true,
            min: 10.0,
            q25: median,
            q75: median,
            max: median,
        }
    }

    #[test]
    fn spearman_on_reported_values() {
        let st = vec![
            stats("facebook", 47.0),
            stats("instagram", 59.0),
            stats("patreon", 57.0),
            stats("twitch", 46.0),
            stats("twitter", 72.0),
            stats("youtube", 47.0),
        ];
        let alphas: BTreeMap<String, f64> = [
            ("youtube", 1.8),
            ("instagram", 1.84),
            ("twitch", 1.93),
            ("facebook", 1.94),
            ("patreon", 2.24),
            ("twitter", 2.35),
        ]
        .iter()
        .map(|(p, a)| (p.to_string(), *a))
        .collect();
        let m = median_vs_alpha(&st, &alphas);
        let rho = m.spearman.unwrap();
        assert!((rho - (1.0 - 111.0 / 210.0)).abs() < 1e-12, "{rho}");
        assert!(rho > 0.0);
        assert_eq!(m.rows.len(), 6);
        assert_eq!(m.series().labels.len(), 6);

        let two = median_vs_alpha(&st[..2], &alphas);
        assert_eq!(two.spearman, None);
        assert_eq!(two.rows.len(), 2);
    }

    #[test]
    fn ranks_average_ties() {
        assert_eq!(average_ranks(&[47.0, 59.0, 57.0, 46.0, 72.0, 47.0]), vec![2.5, 5.0, 4.0, 1.0, 6.0, 2.5]);
        assert_eq!(average_ranks(&[1.0, 1.0, 1.0]), vec![2.0, 2.0, 2.0]);
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]), Some(-1.0));
        assert_eq!(spearman(&[1.0, 2.0], &[1.0, 2.0]), None);
    }

    #[test]
    fn spearman_matches_rank_and_sum_oracle() {
        let mut r = rng::stream(12);
        for _ in 0..100 {
            let n = r.gen_range(3..30);
            let x: Vec<f64> = (0..n).map(|_| r.gen_range(0..6) as f64).collect();
            let y: Vec<f64> = (0..n).map(|_| r.gen_range(0..6) as f64).collect();
            let rank = |v: &[f64], i: usize| {
                let below = v.iter().filter(|&&w| w < v[i]).count() as f64;
                let equal = v.iter().filter(|&&w| w == v[i]).count() as f64;
                below + (equal + 1.0) / 2.0
            };
            let d2: f64 = (0..n).map(|i| (rank(&x, i) - rank(&y, i)).powi(2)).sum();
            let nf = n as f64;
            let oracle = 1.0 - 6.0 * d2 / (nf * (nf * nf - 1.0));
            assert!((spearman(&x, &y).unwrap() - oracle).abs() < 1e-12);
        }
    }

    #[test]
    fn proportions_sorted_descending() {
        let s = proportion_figure(&[
            ("youtube".into(), 0.47),
            ("twitter".into(), 0.05),
            ("twitch".into(), 0.55),
        ])
        .unwrap();
        assert_eq!(s.labels, vec!["twitch", "youtube", "twitter"]);
        assert_eq!(s.points[0], (1.0, 0.55));
        assert_eq!(s.style, Style::Bars);
        assert_eq!(proportion_figure(&[("a".into(), 0.3)]).unwrap().points.len(), 1);
        assert!(proportion_figure(&[("a".into(), 1.3)]).is_err());
    }

    #[test]
    fn category_means() {
        let p = category_panel(&[
            CategoryRow { category: "b".into(), alpha: 3.0, obs: 300 },
            CategoryRow { category: "a".into(), alpha: 2.0, obs: 100 },
        ])
        .unwrap();
        assert_eq!(p.simple_mean, 2.5);
        assert_eq!(p.weighted_mean, 2.75);
        assert_eq!(p.rows[0].category, "a");
        let one = category_panel(&[CategoryRow { category: "a".into(), alpha: 2.2, obs: 5 }]).unwrap();
        assert_eq!(one.simple_mean, one.weighted_mean);
        assert!(category_panel(&[]).is_err());
        let mut buf = Vec::new();
        p.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.ends_with("simple_mean,2.5,400\nweighted_mean,2.75,400\n"));
    }

    #[test]
    fn loglog_rejects_nonpositive() {
        let s = PlotSeries::new("bad", vec![(1.0, 0.0)], Scale::LogLog, Style::Points);
        match s.check() {
            Err(Error::Render { series, .. }) => assert_eq!(series, "bad"),
            other => panic!("{other:?}"),
        }
        let lin = PlotSeries::new("ok", vec![(0.0, -1.0)], Scale::Linear, Style::Points);
        assert!(lin.check().is_ok());
    }
}
