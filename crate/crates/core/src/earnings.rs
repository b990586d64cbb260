//! Creator-earnings records: CSV ingestion, linear imputation of missing
//! earnings, the earnings floor, single-platform segmentation and the
//! per-platform summary tables.
//!
//! Input schema (UTF-8, header required, column order free):
//!
//! ```text
//! creator_id,year,platforms,category,nsfw,members,paid_members,earnings[,imputed]
//! ```
//!
//! `platforms` is a `;`-separated subset of facebook, instagram, twitch,
//! twitter, youtube; an empty field means the creator is on Patreon only.
//! `earnings` is monthly USD and may be empty.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::powerlaw::{Kind, Sample};
use crate::rng;

pub const DEFAULT_FLOOR: f64 = 10.0;
pub const MIN_TRAINING_ROWS: usize = 50;
pub const RIDGE_JITTER: f64 = 1e-8;

pub const REQUIRED_COLUMNS: [&str; 8] = [
    "creator_id",
    "year",
    "platforms",
    "category",
    "nsfw",
    "members",
    "paid_members",
    "earnings",
];

/// Social platforms a creator can list, plus the Patreon-only bucket.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Platform {
    Facebook,
    Instagram,
    Patreon,
    Twitch,
    Twitter,
    Youtube,
}

impl Platform {
    pub const ALL: [Platform; 6] = [
        Platform::Facebook,
        Platform::Instagram,
        Platform::Patreon,
        Platform::Twitch,
        Platform::Twitter,
        Platform::Youtube,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Platform::Facebook => "facebook",
            Platform::Instagram => "instagram",
            Platform::Patreon => "patreon",
            Platform::Twitch => "twitch",
            Platform::Twitter => "twitter",
            Platform::Youtube => "youtube",
        }
    }

    /// Capitalised name used in rendered tables.
    pub fn label(self) -> &'static str {
        match self {
            Platform::Facebook => "Facebook",
            Platform::Instagram => "Instagram",
            Platform::Patreon => "Patreon",
            Platform::Twitch => "Twitch",
            Platform::Twitter => "Twitter",
            Platform::Youtube => "Youtube",
        }
    }
}

impl fmt::Display for Platform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Platform {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        Platform::ALL
            .into_iter()
            .find(|p| p.as_str() == lower)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown platform '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EarningsRecord {
    pub creator_id: String,
    pub year: i32,
    /// Social platforms; never contains [`Platform::Patreon`].
    pub platforms: BTreeSet<Platform>,
    pub category: String,
    pub nsfw: bool,
    pub members: u64,
    pub paid_members: u64,
    pub earnings: Option<f64>,
    pub imputed: bool,
}

impl EarningsRecord {
    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.paid_members > self.members {
            return Err(format!(
                "paid_members {} exceeds members {}",
                self.paid_members, self.members
            ));
        }
        if let Some(e) = self.earnings {
            if !e.is_finite() || e < 0.0 {
                return Err(format!("earnings must be finite and nonnegative, got {e}"));
            }
        }
        if self.imputed && self.earnings.is_none() {
            return Err("imputed record has no earnings".into());
        }
        if self.platforms.contains(&Platform::Patreon) {
            return Err("patreon is implied by an empty platform list".into());
        }
        Ok(())
    }

    /// The platform bucket of a single-platform record; `None` for multi-platform.
    pub fn bucket(&self) -> Option<Platform> {
        match self.platforms.len() {
            0 => Some(Platform::Patreon),
            1 => self.platforms.iter().next().copied(),
            _ => None,
        }
    }

    fn sort_key(&self) -> (&str, i32, String) {
        (&self.creator_id, self.year, format!("{self:?}"))
    }
}

/// Sorts records into a canonical order so downstream results do not depend
/// on input row order.
pub fn canonical_order(records: &mut [EarningsRecord]) {
    records.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RowDiagnostic {
    pub line: u64,
    pub message: String,
}

impl fmt::Display for RowDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedRecords {
    pub records: Vec<EarningsRecord>,
    pub rejected: Vec<RowDiagnostic>,
}

pub fn parse_csv(path: impl AsRef<Path>) -> Result<ParsedRecords> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_reader(file)
}

/// Parses records, rejecting malformed rows with line-numbered diagnostics.
pub fn parse_reader<R: Read>(input: R) -> Result<ParsedRecords> {
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let headers = reader.headers()?.clone();
    let column = |name: &str| headers.iter().position(|h| h.eq_ignore_ascii_case(name));
    let mut idx = [0usize; 8];
    let missing: Vec<&str> = REQUIRED_COLUMNS
        .iter()
        .zip(idx.iter_mut())
        .filter_map(|(name, slot)| match column(name) {
            Some(i) => {
                *slot = i;
                None
            }
            None => Some(*name),
        })
        .collect();
    if !missing.is_empty() {
        return Err(Error::Schema(format!(
            "missing required column(s): {}",
            missing.join(", ")
        )));
    }
    let imputed_col = column("imputed");

    let mut out = ParsedRecords {
        records: Vec::new(),
        rejected: Vec::new(),
    };
    for row in reader.records() {
        let row = match row {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line());
                out.rejected.push(RowDiagnostic {
                    line,
                    message: e.to_string(),
                });
                continue;
            }
        };
        let line = row.position().map_or(0, |p| p.line());
        match parse_row(&row, &idx, imputed_col) {
            Ok(r) => out.records.push(r),
            Err(message) => out.rejected.push(RowDiagnostic { line, message }),
        }
    }
    Ok(out)
}

fn parse_row(
    row: &csv::StringRecord,
    idx: &[usize; 8],
    imputed_col: Option<usize>,
) -> std::result::Result<EarningsRecord, String> {
    let field = |i: usize| row.get(idx[i]).ok_or_else(|| format!("missing field '{}'", REQUIRED_COLUMNS[i]));
    let creator_id = field(0)?.to_string();
    if creator_id.is_empty() {
        return Err("empty creator_id".into());
    }
    let year: i32 = field(1)?
        .parse()
        .map_err(|_| format!("bad year '{}'", field(1).unwrap_or_default()))?;
    let mut platforms = BTreeSet::new();
    for token in field(2)?.split(';').map(str::trim).filter(|t| !t.is_empty()) {
        let p: Platform = token.parse().map_err(|e: Error| e.to_string())?;
        if p == Platform::Patreon {
            return Err("'patreon' is implied by an empty platform list".into());
        }
        platforms.insert(p);
    }
    let category = field(3)?.to_ascii_lowercase();
    if category.is_empty() {
        return Err("empty category".into());
    }
    let nsfw = parse_bool(field(4)?)?;
    let count = |i: usize| -> std::result::Result<u64, String> {
        let raw = field(i)?;
        raw.parse()
            .map_err(|_| format!("bad {} '{raw}'", REQUIRED_COLUMNS[i]))
    };
    let members = count(5)?;
    let paid_members = count(6)?;
    let raw = field(7)?;
    let earnings = if raw.is_empty() {
        None
    } else {
        Some(
            raw.parse::<f64>()
                .map_err(|_| format!("bad earnings '{raw}'"))?,
        )
    };
    let imputed = match imputed_col.and_then(|i| row.get(i)) {
        Some(raw) if !raw.is_empty() => parse_bool(raw)?,
        _ => false,
    };
    let record = EarningsRecord {
        creator_id,
        year,
        platforms,
        category,
        nsfw,
        members,
        paid_members,
        earnings,
        imputed,
    };
    record.validate()?;
    Ok(record)
}

fn parse_bool(raw: &str) -> std::result::Result<bool, String> {
    match raw.to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" | "t" => Ok(true),
        "false" | "0" | "no" | "f" => Ok(false),
        _ => Err(format!("bad boolean '{raw}'")),
    }
}

/// Writes records in the input schema, with the optional `imputed` column.
pub fn write_records_csv<W: Write>(records: &[EarningsRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<&str> = REQUIRED_COLUMNS.to_vec();
    header.push("imputed");
    w.write_record(&header)?;
    for r in records {
        let platforms: Vec<&str> = r.platforms.iter().map(|p| p.as_str()).collect();
        w.write_record([
            r.creator_id.clone(),
            r.year.to_string(),
            platforms.join(";"),
            r.category.clone(),
            r.nsfw.to_string(),
            r.members.to_string(),
            r.paid_members.to_string(),
            r.earnings.map(|e| e.to_string()).unwrap_or_default(),
            r.imputed.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<records csv>", e))?;
    Ok(())
}

/// Linear model of earnings on paid members, members, content category, NSFW
/// status and year. Categorical blocks are one-hot encoded with the first
/// (sorted) level as reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImputationModel {
    pub features: Vec<String>,
    pub coefficients: Vec<f64>,
    /// Sorted; the first entry is the reference level.
    pub categories: Vec<String>,
    /// Sorted; the first entry is the reference level.
    pub years: Vec<i32>,
    pub r_squared: f64,
    pub n_train: usize,
}

impl ImputationModel {
    pub fn coefficient(&self, feature: &str) -> Option<f64> {
        self.features
            .iter()
            .position(|f| f == feature)
            .map(|i| self.coefficients[i])
    }

    /// Prediction and whether any categorical level was unseen in training
    /// (such levels fall back to the reference encoding).
    pub fn predict(&self, r: &EarningsRecord) -> (f64, bool) {
        let (row, unseen) = design_row(r, &self.categories, &self.years);
        let y = row.iter().zip(&self.coefficients).map(|(x, b)| x * b).sum();
        (y, unseen)
    }
}

fn feature_names(categories: &[String], years: &[i32]) -> Vec<String> {
    let mut names = vec![
        "intercept".to_string(),
        "paid_members".into(),
        "members".into(),
        "nsfw".into(),
    ];
    names.extend(categories.iter().skip(1).map(|c| format!("category[{c}]")));
    names.extend(years.iter().skip(1).map(|y| format!("year[{y}]")));
    names
}

fn design_row(r: &EarningsRecord, categories: &[String], years: &[i32]) -> (Vec<f64>, bool) {
    let p = 4 + categories.len().saturating_sub(1) + years.len().saturating_sub(1);
    let mut row = vec![0.0; p];
    row[0] = 1.0;
    row[1] = r.paid_members as f64;
    row[2] = r.members as f64;
    row[3] = if r.nsfw { 1.0 } else { 0.0 };
    let mut unseen = false;
    match categories.iter().position(|c| *c == r.category) {
        Some(0) => {}
        Some(i) => row[3 + i] = 1.0,
        None => unseen = true,
    }
    let base = 3 + categories.len().saturating_sub(1);
    match years.iter().position(|&y| y == r.year) {
        Some(0) => {}
        Some(i) => row[base + i] = 1.0,
        None => unseen = true,
    }
    (row, unseen)
}

/// Ordinary least squares on records with observed earnings, solved through
/// the normal equations. Columns are equilibrated to unit diagonal and a
/// ridge jitter of [`RIDGE_JITTER`] is added to that diagonal before the
/// Cholesky factorisation.
pub fn fit_imputation(records: &[EarningsRecord]) -> Result<ImputationModel> {
    let train: Vec<&EarningsRecord> = records
        .iter()
        .filter(|r| r.earnings.is_some() && !r.imputed)
        .collect();
    if train.len() < MIN_TRAINING_ROWS {
        return Err(Error::SampleTooSmall {
            needed: MIN_TRAINING_ROWS,
            got: train.len(),
        });
    }
    let categories: Vec<String> = train
        .iter()
        .map(|r| r.category.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let years: Vec<i32> = train
        .iter()
        .map(|r| r.year)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let names = feature_names(&categories, &years);
    let p = names.len();

    let mut xtx = vec![0.0; p * p];
    let mut xty = vec![0.0; p];
    let mut y_sum = 0.0;
    for r in &train {
        let (row, _) = design_row(r, &categories, &years);
        let y = r.earnings.expect("training rows have earnings");
        y_sum += y;
        for i in 0..p {
            if row[i] == 0.0 {
                continue;
            }
            xty[i] += row[i] * y;
            for j in i..p {
                xtx[i * p + j] += row[i] * row[j];
            }
        }
    }
    for i in 0..p {
        for j in 0..i {
            xtx[i * p + j] = xtx[j * p + i];
        }
    }

    // Columns that are identically zero in training (e.g. no NSFW rows) carry
    // no information; they are pinned to a zero coefficient.
    let active: Vec<usize> = (0..p).filter(|&i| xtx[i * p + i] > 0.0).collect();
    let q = active.len();
    let scale: Vec<f64> = active.iter().map(|&i| xtx[i * p + i].sqrt()).collect();
    let mut a = vec![0.0; q * q];
    let mut b = vec![0.0; q];
    for (ai, &i) in active.iter().enumerate() {
        b[ai] = xty[i] / scale[ai];
        for (aj, &j) in active.iter().enumerate() {
            a[ai * q + aj] = xtx[i * p + j] / (scale[ai] * scale[aj]);
        }
        a[ai * q + ai] += RIDGE_JITTER;
    }
    let z = cholesky_solve(&mut a, &b, q)?;
    let mut coefficients = vec![0.0; p];
    for (ai, &i) in active.iter().enumerate() {
        coefficients[i] = z[ai] / scale[ai];
    }

    let y_mean = y_sum / train.len() as f64;
    let (mut ssr, mut sst) = (0.0, 0.0);
    for r in &train {
        let (row, _) = design_row(r, &categories, &years);
        let y = r.earnings.expect("training rows have earnings");
        let fit: f64 = row.iter().zip(&coefficients).map(|(x, c)| x * c).sum();
        ssr += (y - fit).powi(2);
        sst += (y - y_mean).powi(2);
    }
    let r_squared = if sst > 0.0 { 1.0 - ssr / sst } else { 1.0 };

    Ok(ImputationModel {
        features: names,
        coefficients,
        categories,
        years,
        r_squared,
        n_train: train.len(),
    })
}

fn cholesky_solve(a: &mut [f64], b: &[f64], n: usize) -> Result<Vec<f64>> {
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= a[j * n + k] * a[j * n + k];
        }
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::SingularDesign(format!(
                "normal matrix not positive definite at column {j}"
            )));
        }
        let d = d.sqrt();
        a[j * n + j] = d;
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = s / d;
        }
    }
    let mut y = b.to_vec();
    for i in 0..n {
        for k in 0..i {
            y[i] -= a[i * n + k] * y[k];
        }
        y[i] /= a[i * n + i];
    }
    for i in (0..n).rev() {
        for k in i + 1..n {
            y[i] -= a[k * n + i] * y[k];
        }
        y[i] /= a[i * n + i];
    }
    Ok(y)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImputationOutcome {
    pub records: Vec<EarningsRecord>,
    pub n_imputed: usize,
    pub n_clamped: usize,
    /// Creator ids whose category or year was unseen in training.
    pub flagged: Vec<String>,
}

/// Fills missing earnings with the model prediction, clamped below at 0.
/// Observed earnings are never touched.
pub fn impute_earnings(records: &[EarningsRecord], model: &ImputationModel) -> ImputationOutcome {
    let mut out = ImputationOutcome {
        records: Vec::with_capacity(records.len()),
        n_imputed: 0,
        n_clamped: 0,
        flagged: Vec::new(),
    };
    for r in records {
        let mut r = r.clone();
        if r.earnings.is_none() {
            let (pred, unseen) = model.predict(&r);
            if pred < 0.0 {
                out.n_clamped += 1;
            }
            r.earnings = Some(pred.max(0.0));
            r.imputed = true;
            out.n_imputed += 1;
            if unseen {
                out.flagged.push(r.creator_id.clone());
            }
        }
        out.records.push(r);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Floor {
    pub value: f64,
    /// Keep `earnings >= value` instead of `earnings > value`.
    pub inclusive: bool,
}

impl Default for Floor {
    fn default() -> Self {
        Floor {
            value: DEFAULT_FLOOR,
            inclusive: false,
        }
    }
}

impl Floor {
    pub fn keeps(&self, earnings: f64) -> bool {
        if self.inclusive {
            earnings >= self.value
        } else {
            earnings > self.value
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FloorOutcome {
    pub kept: Vec<EarningsRecord>,
    pub dropped: usize,
    /// Records without earnings, which cannot be compared to the floor.
    pub missing: usize,
}

pub fn filter_floor(records: &[EarningsRecord], floor: Floor) -> FloorOutcome {
    let mut out = FloorOutcome {
        kept: Vec::new(),
        dropped: 0,
        missing: 0,
    };
    for r in records {
        match r.earnings {
            Some(e) if floor.keeps(e) => out.kept.push(r.clone()),
            Some(_) => out.dropped += 1,
            None => out.missing += 1,
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Segmentation {
    pub buckets: BTreeMap<Platform, Vec<EarningsRecord>>,
    pub discarded_multi: usize,
    /// Single-platform records without earnings.
    pub missing: usize,
}

impl Segmentation {
    pub fn sample(&self, platform: Platform) -> Option<Result<Sample>> {
        self.buckets.get(&platform).map(|rs| earnings_sample(rs))
    }

    pub fn kept(&self) -> usize {
        self.buckets.values().map(Vec::len).sum()
    }
}

/// Continuous sample of the earnings in `records` (records without earnings
/// are skipped).
pub fn earnings_sample(records: &[EarningsRecord]) -> Result<Sample> {
    Sample::new(records.iter().filter_map(|r| r.earnings), Kind::Continuous)
}

/// Assigns single-platform creators to their platform and platform-less
/// creators to Patreon; creators listing two or more platforms are discarded.
pub fn segment_single_platform(records: &[EarningsRecord]) -> Segmentation {
    let mut seg = Segmentation::default();
    for r in records {
        match r.bucket() {
            Some(p) => {
                if r.earnings.is_none() {
                    seg.missing += 1;
                }
                seg.buckets.entry(p).or_default().push(r.clone());
            }
            None => seg.discarded_multi += 1,
        }
    }
    seg
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlatformStats {
    pub platform: String,
    pub obs: usize,
    pub mean: f64,
    pub median: f64,
    pub sd: f64,
    /// False for a singleton, whose `sd` is reported as 0.
    pub sd_defined: bool,
    pub min: f64,
    pub q25: f64,
    pub q75: f64,
    pub max: f64,
}

/// Linear interpolation between order statistics at `h = (n − 1)p`
/// (zero-based), i.e. the `h = (n − 1)p + 1` rule on one-based ranks.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn summary_stats(platform: impl Into<String>, sample: &Sample) -> PlatformStats {
    let x = sample.values();
    let n = x.len();
    let mean = x.iter().sum::<f64>() / n as f64;
    let (sd, sd_defined) = if n > 1 {
        let ss: f64 = x.iter().map(|v| (v - mean).powi(2)).sum();
        ((ss / (n - 1) as f64).sqrt(), true)
    } else {
        (0.0, false)
    };
    PlatformStats {
        platform: platform.into(),
        obs: n,
        mean,
        median: quantile_sorted(x, 0.5),
        sd,
        sd_defined,
        min: x[0],
        q25: quantile_sorted(x, 0.25),
        q75: quantile_sorted(x, 0.75),
        max: x[n - 1],
    }
}

impl PlatformStats {
    /// One row in LaTeX table layout:
    /// `Platform & Obs & Mean & Median & SD & Min & Q25 & Q50 & Q75 & Max`.
    pub fn table_row(&self) -> String {
        format!(
            "{} & {} & {} & {} & {} & {:.2} & {:.1} & {:.1} & {:.1} & {}",
            display_label(&self.platform),
            thousands(self.obs as f64),
            thousands(self.mean),
            thousands(self.median),
            thousands(self.sd),
            self.min,
            self.q25,
            self.median,
            self.q75,
            thousands(self.max),
        )
    }
}

fn display_label(platform: &str) -> String {
    match platform.parse::<Platform>() {
        Ok(p) => p.label().to_string(),
        Err(_) => platform.to_string(),
    }
}

/// Rounds to an integer and groups digits in threes with commas.
pub fn thousands(v: f64) -> String {
    let r = v.round();
    let digits = format!("{}", r.abs() as u64);
    let mut out = String::with_capacity(digits.len() + digits.len() / 3 + 1);
    for (i, ch) in digits.chars().enumerate() {
        if i > 0 && (digits.len() - i) % 3 == 0 {
            out.push(',');
        }
        out.push(ch);
    }
    if r < 0.0 {
        out.insert(0, '-');
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YearRow {
    pub platform: String,
    pub year: i32,
    pub obs: usize,
    pub mean: f64,
    pub median: f64,
    pub nsfw_share: f64,
}

impl YearRow {
    /// `Platform & Year & Obs & Mean & Median & NSFW share`.
    pub fn table_row(&self) -> String {
        format!(
            "{} & {} & {} & {} & {} & {:.2}",
            display_label(&self.platform),
            self.year,
            thousands(self.obs as f64),
            thousands(self.mean),
            thousands(self.median),
            self.nsfw_share
        )
    }
}

/// Per platform and year: count, mean and median earnings, NSFW share.
/// Empty cells are omitted. Rows are ordered by platform, then year.
pub fn nsfw_breakdown(seg: &Segmentation) -> Vec<YearRow> {
    let mut rows = Vec::new();
    for (platform, records) in &seg.buckets {
        let mut by_year: BTreeMap<i32, (Vec<f64>, usize, usize)> = BTreeMap::new();
        for r in records {
            let cell = by_year.entry(r.year).or_default();
            cell.1 += 1;
            if r.nsfw {
                cell.2 += 1;
            }
            if let Some(e) = r.earnings {
                cell.0.push(e);
            }
        }
        for (year, (mut earnings, n, nsfw)) in by_year {
            if earnings.is_empty() {
                continue;
            }
            earnings.sort_by(f64::total_cmp);
            rows.push(YearRow {
                platform: platform.as_str().to_string(),
                year,
                obs: earnings.len(),
                mean: earnings.iter().sum::<f64>() / earnings.len() as f64,
                median: quantile_sorted(&earnings, 0.5),
                nsfw_share: nsfw as f64 / n as f64,
            });
        }
    }
    rows
}

pub fn write_platform_stats_csv<W: Write>(stats: &[PlatformStats], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "platform", "obs", "mean", "median", "sd", "min", "q25", "q50", "q75", "max",
    ])?;
    for s in stats {
        w.write_record([
            s.platform.clone(),
            s.obs.to_string(),
            s.mean.to_string(),
            s.median.to_string(),
            s.sd.to_string(),
            s.min.to_string(),
            s.q25.to_string(),
            s.median.to_string(),
            s.q75.to_string(),
            s.max.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<stats csv>", e))?;
    Ok(())
}

pub fn write_year_rows_csv<W: Write>(rows: &[YearRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["platform", "year", "obs", "mean", "median", "nsfw_share"])?;
    for r in rows {
        w.write_record([
            r.platform.clone(),
            r.year.to_string(),
            r.obs.to_string(),
            r.mean.to_string(),
            r.median.to_string(),
            r.nsfw_share.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<year csv>", e))?;
    Ok(())
}

/// Settings of the synthetic creator-earnings generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureConfig {
    /// Fraction of the reference per-platform, per-year creator counts.
    pub scale: f64,
    /// Share of creators given a second platform (discarded downstream).
    pub multi_platform_share: f64,
    /// Share of records with earnings withheld (imputed downstream).
    pub missing_share: f64,
    pub seed: u64,
}

impl Default for FixtureConfig {
    fn default() -> Self {
        FixtureConfig {
            scale: 0.05,
            multi_platform_share: 0.1,
            missing_share: 0.15,
            seed: rng::DEFAULT_SEED,
        }
    }
}

pub const FIXTURE_CATEGORIES: [(&str, f64); 5] = [
    ("animation", -0.12),
    ("podcasts", -0.06),
    ("music", 0.04),
    ("comics", 0.06),
    ("writing", 0.08),
];

struct PlatformProfile {
    platform: Platform,
    alpha: f64,
    xmin: f64,
    tail_share: f64,
    /// (year, creators, NSFW share)
    years: [(i32, usize, f64); 3],
}

const PROFILES: [PlatformProfile; 6] = [
    PlatformProfile {
        platform: Platform::Facebook,
        alpha: 1.94,
        xmin: 40.0,
        tail_share: 0.35,
        years: [(2018, 2870, 0.25), (2021, 3068, 0.18), (2024, 2520, 0.19)],
    },
    PlatformProfile {
        platform: Platform::Instagram,
        alpha: 1.84,
        xmin: 45.0,
        tail_share: 0.4,
        years: [(2018, 414, 0.46), (2021, 14589, 0.22), (2024, 20876, 0.27)],
    },
    PlatformProfile {
        platform: Platform::Patreon,
        alpha: 2.24,
        xmin: 60.0,
        tail_share: 0.25,
        years: [(2018, 15221, 0.42), (2021, 30768, 0.36), (2024, 37961, 0.39)],
    },
    PlatformProfile {
        platform: Platform::Twitch,
        alpha: 1.93,
        xmin: 26.0,
        tail_share: 0.55,
        years: [(2018, 54, 0.43), (2021, 869, 0.21), (2024, 870, 0.21)],
    },
    PlatformProfile {
        platform: Platform::Twitter,
        alpha: 2.35,
        xmin: 2114.0,
        tail_share: 0.05,
        years: [(2018, 7022, 0.45), (2021, 16576, 0.46), (2024, 23966, 0.58)],
    },
    PlatformProfile {
        platform: Platform::Youtube,
        alpha: 1.8,
        xmin: 30.0,
        tail_share: 0.47,
        years: [(2018, 2143, 0.17), (2021, 6835, 0.12), (2024, 14457, 0.12)],
    },
];

/// Lower edge of the log-uniform body below each platform's threshold; some
/// mass falls under the default floor.
const BODY_LOW: f64 = 3.0;

/// Deterministic synthetic records with per-platform, per-year counts, NSFW
/// shares and tail exponents of the same magnitude as real Patreon
/// creator data. Earnings mix a log-uniform body with a Pareto tail, are
/// rounded to cents, and drive the member counts through a per-creator price.
pub fn generate_fixture(cfg: &FixtureConfig) -> Result<Vec<EarningsRecord>> {
    if !(cfg.scale > 0.0) {
        return Err(Error::InvalidArgument("scale must be positive".into()));
    }
    for (name, v) in [
        ("multi_platform_share", cfg.multi_platform_share),
        ("missing_share", cfg.missing_share),
    ] {
        if !(0.0..1.0).contains(&v) {
            return Err(Error::InvalidArgument(format!("{name} must lie in [0, 1)")));
        }
    }
    let socials: Vec<Platform> = Platform::ALL
        .into_iter()
        .filter(|&p| p != Platform::Patreon)
        .collect();
    let mut rng = rng::stream(cfg.seed);
    let mut out = Vec::new();
    let mut id = 0usize;
    for profile in &PROFILES {
        for &(year, count, nsfw_share) in &profile.years {
            let n = ((count as f64 * cfg.scale).round() as usize).max(1);
            for _ in 0..n {
                id += 1;
                let (category, shift) = FIXTURE_CATEGORIES[rng.gen_range(0..FIXTURE_CATEGORIES.len())];
                let earnings = if rng.gen::<f64>() < profile.tail_share {
                    let a = profile.alpha + shift;
                    profile.xmin * rng::open01(&mut rng).powf(-1.0 / (a - 1.0))
                } else {
                    BODY_LOW * (profile.xmin / BODY_LOW).powf(rng.gen::<f64>())
                };
                let earnings = (earnings * 100.0).round() / 100.0;
                let price = rng.gen_range(3.0..8.0);
                let paid = (earnings / price).round() as u64;
                let members = paid + (paid as f64 * rng.gen_range(0.0..2.0)).round() as u64;
                let mut platforms = BTreeSet::new();
                if profile.platform != Platform::Patreon {
                    platforms.insert(profile.platform);
                }
                if rng.gen::<f64>() < cfg.multi_platform_share {
                    platforms.insert(socials[rng.gen_range(0..socials.len())]);
                    if platforms.len() == 1 && profile.platform != Platform::Patreon {
                        platforms.insert(
                            *socials
                                .iter()
                                .find(|&&p| p != profile.platform)
                                .expect("several social platforms"),
                        );
                    }
                }
                let withheld = rng.gen::<f64>() < cfg.missing_share;
                out.push(EarningsRecord {
                    creator_id: format!("c{id:07}"),
                    year,
                    platforms,
                    category: category.to_string(),
                    nsfw: rng.gen::<f64>() < nsfw_share,
                    members,
                    paid_members: paid,
                    earnings: (!withheld).then_some(earnings),
                    imputed: false,
                });
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::seq::SliceRandom;

    const HEADER: &str = "creator_id,year,platforms,category,nsfw,members,paid_members,earnings\n";

    fn parse(body: &str) -> ParsedRecords {
        parse_reader(format!("{HEADER}{body}").as_bytes()).unwrap()
    }

    fn record(id: &str, platforms: &[Platform], earnings: Option<f64>) -> EarningsRecord {
        EarningsRecord {
            creator_id: id.into(),
            year: 2021,
            platforms: platforms.iter().copied().collect(),
            category: "music".into(),
            nsfw: false,
            members: 10,
            paid_members: 5,
            earnings,
            imputed: false,
        }
    }

    #[test]
    fn parse_basic_row() {
        let p = parse("c1,2021,instagram,music,false,120,30,250.0\n");
        assert!(p.rejected.is_empty());
        let r = &p.records[0];
        assert_eq!(r.platforms, BTreeSet::from([Platform::Instagram]));
        assert_eq!(r.earnings, Some(250.0));
        assert_eq!((r.members, r.paid_members, r.year), (120, 30, 2021));
        assert!(!r.imputed && !r.nsfw);
    }

    #[test]
    fn parse_optional_and_sets() {
        let p = parse("c1,2021,,music,true,120,30,\nc2,2018,twitter; youtube,Comics,1,5,5,12\n");
        assert!(p.rejected.is_empty(), "{:?}", p.rejected);
        assert_eq!(p.records[0].earnings, None);
        assert!(!p.records[0].imputed);
        assert!(p.records[0].platforms.is_empty());
        assert_eq!(p.records[0].bucket(), Some(Platform::Patreon));
        assert_eq!(p.records[1].platforms.len(), 2);
        assert_eq!(p.records[1].category, "comics");
        assert_eq!(p.records[1].bucket(), None);
    }

    #[test]
    fn parse_rejections_are_line_numbered() {
        let p = parse(
            "c1,2021,instagram,music,false,10,30,250.0\n\
             c2,2021,instagram,music,false,100,30,abc\n\
             c3,2021,myspace,music,false,100,30,1\n\
             c4,2021,twitch,music,false,100,30,-1\n\
             c5,2021,twitch,music,false,100,30,7.5\n",
        );
        assert_eq!(p.records.len(), 1);
        let lines: Vec<u64> = p.rejected.iter().map(|d| d.line).collect();
        assert_eq!(lines, vec![2, 3, 4, 5]);
        assert!(p.rejected[0].message.contains("paid_members"));
        assert!(p.rejected[1].to_string().starts_with("line 3:"));
    }

    #[test]
    fn missing_column_is_schema_error() {
        let err = parse_reader("creator_id,year,platforms\nc1,2021,\n".as_bytes()).unwrap_err();
        match err {
            Error::Schema(m) => assert!(m.contains("category") && m.contains("earnings")),
            e => panic!("{e}"),
        }
        assert!(matches!(
            parse_csv("/nonexistent/input.csv"),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn csv_round_trip() {
        let records = generate_fixture(&FixtureConfig {
            scale: 0.002,
            ..Default::default()
        })
        .unwrap();
        let mut buf = Vec::new();
        write_records_csv(&records, &mut buf).unwrap();
        let back = parse_reader(buf.as_slice()).unwrap();
        assert!(back.rejected.is_empty());
        assert_eq!(back.records, records);
    }

    fn synthetic(n: usize, seed: u64) -> Vec<EarningsRecord> {
        let mut rng = rng::stream(seed);
        let cats = ["animation", "music", "writing"];
        (0..n)
            .map(|i| {
                let paid = rng.gen_range(0..400u64);
                let members = paid + rng.gen_range(0..200u64);
                // Box-Muller for the unit-variance noise.
                let (u1, u2): (f64, f64) = (rng::open01(&mut rng), rng.gen());
                let noise = (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos();
                EarningsRecord {
                    creator_id: format!("s{i}"),
                    year: [2018, 2021, 2024][i % 3],
                    platforms: BTreeSet::new(),
                    category: cats[i % 3].into(),
                    nsfw: i % 4 == 0,
                    members,
                    paid_members: paid,
                    earnings: Some(5.0 * paid as f64 + noise),
                    imputed: false,
                }
            })
            .collect()
    }

    #[test]
    fn imputation_recovers_generator() {
        let data = synthetic(2_000, 3);
        let m = fit_imputation(&data).unwrap();
        let b = m.coefficient("paid_members").unwrap();
        assert!((b - 5.0).abs() < 0.1, "{b}");
        assert!(m.coefficient("members").unwrap().abs() < 0.05);
        assert!(m.r_squared > 0.99);
        assert_eq!(m.n_train, 2_000);
        assert_eq!(m.categories[0], "animation");
        assert!(m.features.contains(&"category[writing]".to_string()));
        assert!(m.features.contains(&"year[2024]".to_string()));

        let mut missing = record("m", &[], None);
        missing.paid_members = 100;
        missing.members = 150;
        let out = impute_earnings(&[missing], &m);
        let e = out.records[0].earnings.unwrap();
        assert!((e - 500.0).abs() < 10.0, "{e}");
        assert!(out.records[0].imputed);
        assert_eq!(out.n_imputed, 1);
        assert!(out.flagged.is_empty());
    }

    #[test]
    fn imputation_matches_direct_least_squares() {
        // Two regressors with exact solution: y = 2 + 3·paid + 0.5·members.
        let data: Vec<EarningsRecord> = (0..60u64)
            .map(|i| {
                let paid = i % 13;
                let members = paid + (i * 7) % 11;
                EarningsRecord {
                    creator_id: format!("x{i}"),
                    year: 2021,
                    platforms: BTreeSet::new(),
                    category: "music".into(),
                    nsfw: false,
                    members,
                    paid_members: paid,
                    earnings: Some(2.0 + 3.0 * paid as f64 + 0.5 * members as f64),
                    imputed: false,
                }
            })
            .collect();
        let m = fit_imputation(&data).unwrap();
        assert_eq!(m.features, vec!["intercept", "paid_members", "members", "nsfw"]);
        assert!((m.coefficients[0] - 2.0).abs() < 1e-5);
        assert!((m.coefficients[1] - 3.0).abs() < 1e-6);
        assert!((m.coefficients[2] - 0.5).abs() < 1e-6);
        assert_eq!(m.coefficients[3], 0.0);
    }

    #[test]
    fn imputation_preconditions() {
        let few = synthetic(10, 1);
        assert!(matches!(
            fit_imputation(&few),
            Err(Error::SampleTooSmall { needed: 50, got: 10 })
        ));
        let mut one_cat = synthetic(200, 2);
        for r in &mut one_cat {
            r.category = "music".into();
        }
        let m = fit_imputation(&one_cat).unwrap();
        assert!(!m.features.iter().any(|f| f.starts_with("category")));
    }

    #[test]
    fn imputation_clamps_and_flags() {
        let m = ImputationModel {
            features: feature_names(&["music".into()], &[2021]),
            coefficients: vec![-3.2, 0.0, 0.0, 0.0],
            categories: vec!["music".into()],
            years: vec![2021],
            r_squared: 1.0,
            n_train: 50,
        };
        let mut unseen = record("u", &[], None);
        unseen.category = "cooking".into();
        let observed = record("o", &[], Some(42.0));
        let out = impute_earnings(&[record("a", &[], None), unseen, observed.clone()], &m);
        assert_eq!(out.records[0].earnings, Some(0.0));
        assert_eq!(out.n_clamped, 2);
        assert_eq!(out.flagged, vec!["u".to_string()]);
        assert_eq!(out.records[2], observed);
    }

    #[test]
    fn floor_rule() {
        let rs = vec![
            record("a", &[], Some(10.0)),
            record("b", &[], Some(10.04)),
            record("c", &[], Some(3.0)),
            record("d", &[], None),
        ];
        let strict = filter_floor(&rs, Floor::default());
        assert_eq!(strict.kept.len(), 1);
        assert_eq!(strict.kept[0].creator_id, "b");
        assert_eq!((strict.dropped, strict.missing), (2, 1));
        let inclusive = filter_floor(
            &rs,
            Floor {
                value: 10.0,
                inclusive: true,
            },
        );
        assert_eq!(inclusive.kept.len(), 2);
        assert!(filter_floor(&[], Floor::default()).kept.is_empty());
    }

    #[test]
    fn segmentation_rules() {
        let rs = vec![
            record("a", &[Platform::Instagram], Some(20.0)),
            record("b", &[], Some(30.0)),
            record("c", &[Platform::Twitter, Platform::Youtube], Some(40.0)),
            record("d", &[Platform::Instagram], Some(50.0)),
        ];
        let seg = segment_single_platform(&rs);
        assert_eq!(seg.discarded_multi, 1);
        assert_eq!(seg.buckets[&Platform::Instagram].len(), 2);
        assert_eq!(seg.buckets[&Platform::Patreon][0].creator_id, "b");
        assert_eq!(seg.kept() + seg.discarded_multi, rs.len());
        let s = seg.sample(Platform::Instagram).unwrap().unwrap();
        assert_eq!(s.values(), &[20.0, 50.0]);
        assert!(seg.sample(Platform::Twitch).is_none());
    }

    #[test]
    fn summary_hand_values() {
        let s = Sample::new([40.0, 10.0, 30.0, 20.0], Kind::Continuous).unwrap();
        let st = summary_stats("twitch", &s);
        assert_eq!(st.mean, 25.0);
        assert_eq!(st.median, 25.0);
        assert_eq!(st.q25, 17.5);
        assert_eq!(st.q75, 32.5);
        assert_eq!((st.min, st.max, st.obs), (10.0, 40.0, 4));
        assert!((st.sd - (500.0f64 / 3.0).sqrt()).abs() < 1e-12);

        let one = summary_stats("x", &Sample::new([42.0], Kind::Continuous).unwrap());
        assert_eq!(
            (one.mean, one.median, one.q25, one.q75, one.min, one.max, one.sd),
            (42.0, 42.0, 42.0, 42.0, 42.0, 42.0, 0.0)
        );
        assert!(!one.sd_defined);
    }

    #[test]
    fn latex_row_layout() {
        let st = PlatformStats {
            platform: "facebook".into(),
            obs: 8458,
            mean: 149.2,
            median: 46.5,
            sd: 631.4,
            sd_defined: true,
            min: 10.0,
            q25: 29.6,
            q75: 99.0,
            max: 35261.0,
        };
        assert_eq!(
            st.table_row(),
            "Facebook & 8,458 & 149 & 47 & 631 & 10.00 & 29.6 & 46.5 & 99.0 & 35,261"
        );
        let row = YearRow {
            platform: "twitter".into(),
            year: 2024,
            obs: 23966,
            mean: 399.0,
            median: 72.0,
            nsfw_share: 0.58,
        };
        assert_eq!(row.table_row(), "Twitter & 2024 & 23,966 & 399 & 72 & 0.58");
        assert_eq!(thousands(211321.4), "211,321");
        assert_eq!(thousands(999.0), "999");
        assert_eq!(thousands(1000.0), "1,000");
    }

    #[test]
    fn nsfw_share_and_omission() {
        let mut rs: Vec<EarningsRecord> = (0..4)
            .map(|i| record(&format!("r{i}"), &[Platform::Twitch], Some(20.0 + i as f64)))
            .collect();
        rs[0].nsfw = true;
        let mut other_year = record("y", &[Platform::Youtube], Some(15.0));
        other_year.year = 2018;
        rs.push(other_year);
        let rows = nsfw_breakdown(&segment_single_platform(&rs));
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].platform, "twitch");
        assert_eq!(rows[0].nsfw_share, 0.25);
        assert_eq!(rows[0].obs, 4);
        assert_eq!(rows[0].median, 21.5);
        assert_eq!(rows[1].year, 2018);
    }

    #[test]
    fn summary_matches_brute_force() {
        let mut rng = rng::stream(99);
        for _ in 0..100 {
            let n = rng.gen_range(1..40);
            let xs: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1000.0)).collect();
            let st = summary_stats("p", &Sample::new(xs.clone(), Kind::Continuous).unwrap());
            let mut sorted = xs.clone();
            sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let mean = xs.iter().sum::<f64>() / n as f64;
            assert!((st.mean - mean).abs() < 1e-9);
            if n > 1 {
                let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
                assert!((st.sd - var.sqrt()).abs() < 1e-9);
            }
            for (p, got) in [(0.25, st.q25), (0.5, st.median), (0.75, st.q75)] {
                // one-based rank h = (n − 1)p + 1
                let h = (n - 1) as f64 * p + 1.0;
                let lo = h.floor();
                let x_lo = sorted[lo as usize - 1];
                let x_hi = sorted[(lo as usize).min(n - 1)];
                assert!((got - (x_lo + (h - lo) * (x_hi - x_lo))).abs() < 1e-9);
            }
            assert_eq!(st.min, sorted[0]);
            assert_eq!(st.max, sorted[n - 1]);
        }
    }

    #[test]
    fn fixture_is_deterministic_and_shaped() {
        let cfg = FixtureConfig {
            scale: 0.01,
            ..Default::default()
        };
        let a = generate_fixture(&cfg).unwrap();
        assert_eq!(a, generate_fixture(&cfg).unwrap());
        assert!(a.iter().all(|r| r.validate().is_ok()));
        let multi = a.iter().filter(|r| r.platforms.len() > 1).count() as f64 / a.len() as f64;
        assert!((0.05..0.15).contains(&multi), "{multi}");
        let missing = a.iter().filter(|r| r.earnings.is_none()).count() as f64 / a.len() as f64;
        assert!((0.1..0.2).contains(&missing), "{missing}");
        assert!(generate_fixture(&FixtureConfig {
            scale: 0.0,
            ..Default::default()
        })
        .is_err());
    }

    #[test]
    fn order_insensitive_after_canonical_sort() {
        let mut a = generate_fixture(&FixtureConfig {
            scale: 0.005,
            ..Default::default()
        })
        .unwrap();
        let mut b = a.clone();
        b.shuffle(&mut rng::stream(5));
        canonical_order(&mut a);
        canonical_order(&mut b);
        assert_eq!(a, b);
        let ma = fit_imputation(&a).unwrap();
        assert_eq!(ma, fit_imputation(&b).unwrap());
    }
}
