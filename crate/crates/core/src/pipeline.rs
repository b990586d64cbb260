//! End-to-end earnings run: ingest, impute, apply the floor, segment by
//! platform, fit every bucket and write tables, figure series, SVGs and an
//! artifact manifest into one output directory.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::earnings::{
    self, canonical_order, earnings_sample, filter_floor, fit_imputation, impute_earnings,
    nsfw_breakdown, segment_single_platform, summary_stats, EarningsRecord, Floor,
    ImputationModel, Platform, PlatformStats, YearRow,
};
use crate::error::{Error, Result};
use crate::fit::{select_xmin, FitOptions, TailFit, DEFAULT_MIN_TAIL};
use crate::powerlaw::{Kind, Sample};
use crate::gof::{gof_pvalue, power_law_proportion, FitReport, GofResult};
use crate::report::{
    alpha_panel, category_panel, ccdf_figure, median_vs_alpha, proportion_figure, render_svg,
    sha256_hex, ArtifactManifest, CategoryRow, SvgOptions,
};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineOptions {
    pub floor: Floor,
    pub min_tail: usize,
    /// Bootstrap replicates for goodness of fit; 0 disables it.
    pub bootstrap: usize,
    pub seed: u64,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        PipelineOptions {
            floor: Floor::default(),
            min_tail: DEFAULT_MIN_TAIL,
            bootstrap: 0,
            seed: rng::DEFAULT_SEED,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub parsed: usize,
    pub rejected: usize,
    pub imputed: usize,
    pub clamped: usize,
    pub flagged: usize,
    pub below_floor: usize,
    pub multi_platform: usize,
    pub kept: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineRun {
    pub counts: Counts,
    pub stats: Vec<PlatformStats>,
    pub year_rows: Vec<YearRow>,
    /// Pooled-year fit per platform.
    pub fits: BTreeMap<String, FitReport>,
    pub spearman: Option<f64>,
    pub warnings: Vec<String>,
    pub artifacts: ArtifactManifest,
}

struct Output {
    dir: PathBuf,
    manifest: ArtifactManifest,
}

impl Output {
    fn put(&mut self, rel: &str, contents: &[u8], inputs: Vec<String>) -> Result<()> {
        let path = self.dir.join(rel);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        std::fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
        self.manifest.record(rel, contents, inputs);
        Ok(())
    }

    fn csv(
        &mut self,
        rel: &str,
        inputs: Vec<String>,
        write: impl FnOnce(&mut Vec<u8>) -> Result<()>,
    ) -> Result<()> {
        let mut buf = Vec::new();
        write(&mut buf)?;
        self.put(rel, &buf, inputs)
    }

    fn json<T: Serialize>(&mut self, rel: &str, value: &T, inputs: Vec<String>) -> Result<()> {
        let mut buf = serde_json::to_vec_pretty(value)?;
        buf.push(b'\n');
        self.put(rel, &buf, inputs)
    }
}

/// Fit of one bucket, or a warning when it is too small or degenerate.
fn try_fit(label: &str, sample: &Sample, opts: &FitOptions) -> std::result::Result<TailFit, String> {
    select_xmin(sample, opts).map_err(|e| format!("{label}: no fit ({e})"))
}

fn fit_digest(report: &FitReport) -> String {
    sha256_hex(&serde_json::to_vec(report).expect("fit report serializes"))
}

pub fn run_pipeline(input: &Path, out_dir: &Path, opts: &PipelineOptions) -> Result<PipelineRun> {
    let parsed = earnings::parse_csv(input)?;
    run_records(parsed.records, &parsed.rejected, out_dir, opts)
}

/// Runs the pipeline on already parsed records. `rejected` rows are only
/// logged.
pub fn run_records(
    mut records: Vec<EarningsRecord>,
    rejected: &[earnings::RowDiagnostic],
    out_dir: &Path,
    opts: &PipelineOptions,
) -> Result<PipelineRun> {
    let fit_opts = FitOptions::continuous().with_min_tail(opts.min_tail);
    fit_opts.validate()?;
    if opts.bootstrap > 0 && opts.bootstrap < crate::gof::MIN_BOOTSTRAP {
        return Err(Error::InvalidArgument(format!(
            "bootstrap needs at least {} replicates",
            crate::gof::MIN_BOOTSTRAP
        )));
    }
    let mut out = Output {
        dir: out_dir.to_path_buf(),
        manifest: ArtifactManifest::default(),
    };
    let mut warnings = Vec::new();
    let mut log = String::new();
    for d in rejected {
        let _ = writeln!(log, "rejected {d}");
    }
    let mut counts = Counts {
        parsed: records.len(),
        rejected: rejected.len(),
        ..Counts::default()
    };

    canonical_order(&mut records);
    let any_missing = records.iter().any(|r| r.earnings.is_none());
    let model: Option<ImputationModel> = if any_missing {
        Some(fit_imputation(&records)?)
    } else {
        None
    };
    if let Some(model) = &model {
        let imp = impute_earnings(&records, model);
        counts.imputed = imp.n_imputed;
        counts.clamped = imp.n_clamped;
        counts.flagged = imp.flagged.len();
        for id in &imp.flagged {
            let _ = writeln!(log, "imputed with reference encoding (unseen level): {id}");
        }
        records = imp.records;
        out.json("imputation.json", model, Vec::new())?;
    }
    let floored = filter_floor(&records, opts.floor);
    counts.below_floor = floored.dropped;
    let seg = segment_single_platform(&floored.kept);
    counts.multi_platform = seg.discarded_multi;
    counts.kept = seg.kept();
    let _ = writeln!(
        log,
        "floor {} ({}) dropped {}; multi-platform discarded {}",
        opts.floor.value,
        if opts.floor.inclusive { "inclusive" } else { "strict" },
        floored.dropped,
        seg.discarded_multi
    );
    for p in Platform::ALL {
        if !seg.buckets.contains_key(&p) {
            warnings.push(format!("no single-platform records for {p}"));
        }
    }
    let clean: Vec<EarningsRecord> = seg.buckets.values().flatten().cloned().collect();
    out.csv("records_clean.csv", Vec::new(), |b| earnings::write_records_csv(&clean, b))?;

    // Buckets: pooled per platform, per platform-year, per category.
    let platforms: Vec<(Platform, Sample)> = seg
        .buckets
        .iter()
        .map(|(p, rs)| Ok((*p, earnings_sample(rs)?)))
        .collect::<Result<_>>()?;
    let mut year_buckets: Vec<((String, i32), Sample)> = Vec::new();
    let mut cat_buckets: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for (p, rs) in &seg.buckets {
        let mut by_year: BTreeMap<i32, Vec<f64>> = BTreeMap::new();
        for r in rs {
            let e = r.earnings.expect("floored records have earnings");
            by_year.entry(r.year).or_default().push(e);
            cat_buckets.entry(r.category.clone()).or_default().push(e);
        }
        for (year, v) in by_year {
            year_buckets.push(((p.as_str().to_string(), year), Sample::new(v, Kind::Continuous)?));
        }
    }

    let stats: Vec<PlatformStats> = platforms
        .iter()
        .map(|(p, b)| summary_stats(p.as_str(), b))
        .collect();
    let year_rows = nsfw_breakdown(&seg);

    let platform_fits: Vec<std::result::Result<(TailFit, Option<GofResult>), String>> = platforms
        .par_iter()
        .enumerate()
        .map(|(i, (p, b))| {
            let fit = try_fit(p.as_str(), b, &fit_opts)?;
            let gof = if opts.bootstrap > 0 {
                let seed = rng::derive_seed(opts.seed, i as u64);
                Some(
                    gof_pvalue(b, &fit, opts.bootstrap, seed, &fit_opts)
                        .map_err(|e| format!("{p}: goodness of fit failed ({e})"))?,
                )
            } else {
                None
            };
            Ok((fit, gof))
        })
        .collect();
    let year_fits: Vec<std::result::Result<TailFit, String>> = year_buckets
        .par_iter()
        .map(|((p, y), b)| try_fit(&format!("{p} {y}"), b, &fit_opts))
        .collect();
    let cat_fits: Vec<(String, usize, std::result::Result<TailFit, String>)> = cat_buckets
        .into_par_iter()
        .map(|(c, v)| {
            let n = v.len();
            let fit = Sample::new(v, Kind::Continuous)
                .map_err(|e| format!("category {c}: {e}"))
                .and_then(|s| try_fit(&format!("category {c}"), &s, &fit_opts));
            (c, n, fit)
        })
        .collect();

    // Tables.
    out.csv("table1.csv", Vec::new(), |b| earnings::write_platform_stats_csv(&stats, b))?;
    out.json("table1.json", &stats, Vec::new())?;
    let mut t1 = String::from("Platform & Obs & Mean & Median & SD & Min & Q25 & Q50 & Q75 & Max \\\\\n");
    for s in &stats {
        let _ = writeln!(t1, "{} \\\\", s.table_row());
    }
    out.put("table1.txt", t1.as_bytes(), Vec::new())?;
    out.csv("table2.csv", Vec::new(), |b| earnings::write_year_rows_csv(&year_rows, b))?;
    out.json("table2.json", &year_rows, Vec::new())?;
    let mut t2 = String::from("Platform & Year & Obs & Mean & Median & NSFW share \\\\\n");
    for r in &year_rows {
        let _ = writeln!(t2, "{} \\\\", r.table_row());
    }
    out.put("table2.txt", t2.as_bytes(), Vec::new())?;

    // Figure 1 and per-platform fits.
    let mut fits: BTreeMap<String, FitReport> = BTreeMap::new();
    let mut digests: BTreeMap<String, String> = BTreeMap::new();
    let mut proportions = Vec::new();
    let mut pooled_alpha: BTreeMap<String, f64> = BTreeMap::new();
    for ((p, b), res) in platforms.iter().zip(platform_fits) {
        let (fit, gof) = match res {
            Ok(v) => v,
            Err(w) => {
                warnings.push(w);
                continue;
            }
        };
        let name = p.as_str();
        let report = FitReport::new(&fit, gof.as_ref());
        let digest = fit_digest(&report);
        out.json(&format!("fits/{name}.json"), &report, Vec::new())?;
        let series = ccdf_figure(b, &fit)?;
        for (s, suffix) in series.iter().zip(["empirical", "fit", "xmin"]) {
            out.csv(&format!("fig1_{name}_{suffix}.csv"), vec![digest.clone()], |buf| {
                s.write_csv(buf)
            })?;
        }
        let svg = render_svg(
            &series,
            &SvgOptions::titled(&format!("{} earnings CCDF", p.label()), "monthly earnings (USD)", "P(X ≥ x)"),
        )?;
        out.put(&format!("fig1_{name}.svg"), svg.as_bytes(), vec![digest.clone()])?;
        proportions.push((name.to_string(), power_law_proportion(b, &fit)?));
        pooled_alpha.insert(name.to_string(), fit.alpha);
        fits.insert(name.to_string(), report);
        digests.insert(name.to_string(), digest);
    }

    // Figure 2.
    let mut by_year: BTreeMap<(String, i32), TailFit> = BTreeMap::new();
    let mut year_digests = Vec::new();
    for ((key, _), res) in year_buckets.iter().zip(year_fits) {
        match res {
            Ok(fit) => {
                year_digests.push(fit_digest(&FitReport::new(&fit, None)));
                by_year.insert(key.clone(), fit);
            }
            Err(w) => warnings.push(w),
        }
    }
    let mut fig_year_rows: Vec<(String, i32, TailFit)> = Vec::new();
    for ((p, y), f) in &by_year {
        fig_year_rows.push((p.clone(), *y, f.clone()));
    }
    out.csv("fits_by_year.csv", year_digests.clone(), |buf| {
        let mut w = csv::Writer::from_writer(buf);
        w.write_record(["platform", "year", "alpha", "xmin", "n_tail", "ks", "stderr"])?;
        for (p, y, f) in &fig_year_rows {
            w.write_record([
                p.clone(),
                y.to_string(),
                f.alpha.to_string(),
                f.xmin.to_string(),
                f.n_tail.to_string(),
                f.ks.to_string(),
                f.stderr.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("fits_by_year.csv", e))?;
        Ok(())
    })?;
    if by_year.is_empty() {
        warnings.push("no platform-year fits; figure 2 skipped".into());
    } else {
        let panel = alpha_panel(&by_year)?.with_pooled(&pooled_alpha);
        out.csv("fig2_platform.csv", year_digests.clone(), |b| panel.write_platform_csv(b))?;
        out.csv("fig2_year.csv", year_digests.clone(), |b| panel.write_year_csv(b))?;
        let svg = render_svg(
            &panel.year_series(),
            &SvgOptions::titled("Exponent by platform and year", "year", "alpha"),
        )?;
        out.put("fig2.svg", svg.as_bytes(), year_digests)?;
    }

    // Figures 3 and 4.
    let all_digests: Vec<String> = digests.values().cloned().collect();
    let scatter = median_vs_alpha(&stats, &pooled_alpha);
    if scatter.rows.is_empty() {
        warnings.push("no platform fits; figures 3 and 4 skipped".into());
    } else {
        out.csv("fig3.csv", all_digests.clone(), |b| scatter.write_csv(b))?;
        out.json("fig3.json", &scatter, all_digests.clone())?;
        let svg = render_svg(
            &[scatter.series()],
            &SvgOptions::titled("Median earnings vs exponent", "median monthly earnings (USD)", "alpha"),
        )?;
        out.put("fig3.svg", svg.as_bytes(), all_digests.clone())?;

        let bars = proportion_figure(&proportions)?;
        out.csv("fig4.csv", all_digests.clone(), |buf| {
            let mut w = csv::Writer::from_writer(buf);
            w.write_record(["platform", "proportion"])?;
            for (label, (_, v)) in bars.labels.iter().zip(&bars.points) {
                w.write_record([label.clone(), v.to_string()])?;
            }
            w.flush().map_err(|e| Error::io("fig4.csv", e))?;
            Ok(())
        })?;
        let svg = render_svg(
            &[bars],
            &SvgOptions::titled("Share of earnings above the power-law threshold", "platform", "proportion"),
        )?;
        out.put("fig4.svg", svg.as_bytes(), all_digests)?;
    }

    // Figure 5.
    let mut cat_rows = Vec::new();
    let mut cat_digests = Vec::new();
    for (c, n, res) in cat_fits {
        match res {
            Ok(f) => {
                cat_digests.push(fit_digest(&FitReport::new(&f, None)));
                cat_rows.push(CategoryRow {
                    category: c,
                    alpha: f.alpha,
                    obs: n,
                });
            }
            Err(w) => warnings.push(w),
        }
    }
    if cat_rows.is_empty() {
        warnings.push("no category fits; figure 5 skipped".into());
    } else {
        let panel = category_panel(&cat_rows)?;
        out.csv("fig5.csv", cat_digests.clone(), |b| panel.write_csv(b))?;
        let svg = render_svg(
            &[panel.series()],
            &SvgOptions::titled("Exponent by content category", "category", "alpha"),
        )?;
        out.put("fig5.svg", svg.as_bytes(), cat_digests)?;
    }

    for w in &warnings {
        let _ = writeln!(log, "warning: {w}");
    }
    out.put("diagnostics.log", log.as_bytes(), Vec::new())?;

    let mut run = PipelineRun {
        counts,
        stats,
        year_rows,
        fits,
        spearman: scatter.spearman,
        warnings,
        artifacts: ArtifactManifest::default(),
    };
    out.json("summary.json", &SummaryView::from(&run), Vec::new())?;
    run.artifacts = out.manifest;
    Ok(run)
}

#[derive(Serialize)]
struct SummaryView<'a> {
    counts: &'a Counts,
    fits: &'a BTreeMap<String, FitReport>,
    spearman: Option<f64>,
    warnings: &'a [String],
}

impl<'a> From<&'a PipelineRun> for SummaryView<'a> {
    fn from(r: &'a PipelineRun) -> Self {
        SummaryView {
            counts: &r.counts,
            fits: &r.fits,
            spearman: r.spearman,
            warnings: &r.warnings,
        }
    }
}
