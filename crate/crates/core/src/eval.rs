//! RMSE evaluation against a reference device.
//!
//! Reference tables are CSV files with a `time_s` column followed by
//! `<method>_hr` / `<method>_rr` columns; `hexoskin_hr` and `hexoskin_rr`
//! are the references. Blank cells are missing readings. Series are paired
//! on timestamps rounded to the whole second.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::estimator::VitalsEstimate;

pub const REFERENCE_METHOD: &str = "hexoskin";

/// HR monitors must stay strictly below this RMSE (beats/minute).
pub const AAMI_HR_RMSE_LIMIT: f64 = 5.0;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{a} and {b} share no timestamps")]
    Alignment { a: String, b: String },
    #[error("invalid series {method}: {message}")]
    Series { method: String, message: String },
    #[error("reference table: {0}")]
    Config(String),
    #[error("CSV line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("cannot read {path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Hr,
    Rr,
}

impl Metric {
    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Hr => "hr",
            Metric::Rr => "rr",
        }
    }

    fn from_suffix(column: &str) -> Option<(&str, Metric)> {
        if let Some(m) = column.strip_suffix("_hr") {
            Some((m, Metric::Hr))
        } else {
            column.strip_suffix("_rr").map(|m| (m, Metric::Rr))
        }
    }
}

/// Timed readings of one metric from one method.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSeries {
    pub method: String,
    pub metric: Metric,
    rows: Vec<(f64, f64)>,
}

impl ReferenceSeries {
    pub fn new(method: impl Into<String>, metric: Metric, rows: Vec<(f64, f64)>) -> Result<Self, EvalError> {
        let method = method.into();
        let bad = |message: String| EvalError::Series {
            method: method.clone(),
            message,
        };
        for (i, &(t, v)) in rows.iter().enumerate() {
            if !t.is_finite() || !(v.is_finite() && v > 0.0) {
                return Err(bad(format!("row {i}: ({t}, {v}) needs finite time and positive value")));
            }
            if i > 0 && t <= rows[i - 1].0 {
                return Err(bad(format!("row {i}: time {t} not after {}", rows[i - 1].0)));
            }
        }
        Ok(Self { method, metric, rows })
    }

    pub fn rows(&self) -> &[(f64, f64)] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    fn by_second(&self) -> BTreeMap<i64, f64> {
        let mut m = BTreeMap::new();
        for &(t, v) in &self.rows {
            m.entry(t.round() as i64).or_insert(v);
        }
        m
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RmseEntry {
    pub method: String,
    pub reference: String,
    pub metric: Metric,
    /// Rounded to 4 decimals.
    pub rmse: f64,
    pub rmse_exact: f64,
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub published: Option<f64>,
}

impl RmseEntry {
    pub fn rmse_4dp(&self) -> String {
        format!("{:.4}", self.rmse_exact)
    }

    /// AAMI verdict; `None` for respiration entries.
    pub fn aami_pass(&self) -> Option<bool> {
        (self.metric == Metric::Hr).then(|| aami_pass(self.rmse_exact))
    }
}

pub fn round4(x: f64) -> f64 {
    (x * 1e4).round() / 1e4
}

/// Root mean square difference over the seconds both series cover.
pub fn rmse(a: &ReferenceSeries, b: &ReferenceSeries) -> Result<RmseEntry, EvalError> {
    let bm = b.by_second();
    let (mut sum, mut n) = (0.0, 0usize);
    for (t, va) in a.by_second() {
        if let Some(vb) = bm.get(&t) {
            sum += (va - vb) * (va - vb);
            n += 1;
        }
    }
    if n == 0 {
        return Err(EvalError::Alignment {
            a: a.method.clone(),
            b: b.method.clone(),
        });
    }
    let exact = (sum / n as f64).sqrt();
    Ok(RmseEntry {
        method: a.method.clone(),
        reference: b.method.clone(),
        metric: a.metric,
        rmse: round4(exact),
        rmse_exact: exact,
        n,
        published: None,
    })
}

pub fn aami_pass(rmse: f64) -> bool {
    rmse < AAMI_HR_RMSE_LIMIT
}

/// Per-method AAMI verdicts for the HR entries of a report.
pub fn aami_check(report: &RmseReport) -> Vec<(String, bool)> {
    report
        .entries
        .iter()
        .filter(|e| e.metric == Metric::Hr)
        .map(|e| (e.method.clone(), aami_pass(e.rmse_exact)))
        .collect()
}

/// Columns of a reference CSV, keyed by `(method, metric)`.
#[derive(Debug, Clone, Default)]
pub struct ReferenceTable {
    pub columns: BTreeMap<(String, Metric), ReferenceSeries>,
    /// Column order as it appeared in the header.
    pub order: Vec<(String, Metric)>,
}

impl ReferenceTable {
    pub fn get(&self, method: &str, metric: Metric) -> Option<&ReferenceSeries> {
        self.columns.get(&(method.to_owned(), metric))
    }
}

pub fn read_reference_csv<R: Read>(reader: R) -> Result<ReferenceTable, EvalError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.get(0) != Some("time_s") {
        return Err(EvalError::Config(format!(
            "first column must be time_s, got {:?}",
            headers.get(0).unwrap_or("")
        )));
    }
    let mut cols: Vec<(String, Metric, Vec<(f64, f64)>)> = Vec::new();
    for name in headers.iter().skip(1) {
        let (method, metric) = Metric::from_suffix(name)
            .ok_or_else(|| EvalError::Config(format!("column {name:?} is not <method>_hr or <method>_rr")))?;
        cols.push((method.to_owned(), metric, Vec::new()));
    }
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let num = |s: &str, what: &str| {
            s.parse::<f64>().map_err(|_| EvalError::Parse {
                line,
                message: format!("{what}: {s:?} is not a number"),
            })
        };
        let t = num(rec.get(0).unwrap_or(""), "time_s")?;
        for (i, col) in cols.iter_mut().enumerate() {
            let cell = rec.get(i + 1).unwrap_or("");
            if !cell.is_empty() {
                col.2.push((t, num(cell, &headers[i + 1])?));
            }
        }
    }
    let mut table = ReferenceTable::default();
    for (method, metric, rows) in cols {
        let key = (method.clone(), metric);
        if table.columns.contains_key(&key) {
            return Err(EvalError::Config(format!("duplicate column {method}_{}", metric.as_str())));
        }
        table.columns.insert(key.clone(), ReferenceSeries::new(method, metric, rows)?);
        table.order.push(key);
    }
    Ok(table)
}

pub fn load_reference_csv(path: &Path) -> Result<ReferenceTable, EvalError> {
    let file = std::fs::File::open(path).map_err(|source| EvalError::Io {
        path: path.to_owned(),
        source,
    })?;
    read_reference_csv(file)
}

/// Smoothed HR and RR series from an estimate stream, skipping absent values.
pub fn series_from_estimates(
    label: &str,
    estimates: &[VitalsEstimate],
) -> Result<(ReferenceSeries, ReferenceSeries), EvalError> {
    let pick = |f: fn(&VitalsEstimate) -> Option<f64>| {
        estimates
            .iter()
            .filter_map(|e| f(e).map(|v| (e.t_s as f64, v)))
            .collect::<Vec<_>>()
    };
    Ok((
        ReferenceSeries::new(label, Metric::Hr, pick(|e| e.hr_bpm))?,
        ReferenceSeries::new(label, Metric::Rr, pick(|e| e.rr_bpm))?,
    ))
}

/// The commonly quoted summary RMSEs for the bundled fixture: (method, metric, RMSE).
pub const PUBLISHED_TABLE2: [(&str, Metric, f64); 6] = [
    ("apple", Metric::Hr, 3.1119),
    ("samsung", Metric::Hr, 2.0901),
    ("hue", Metric::Hr, 2.9558),
    ("green", Metric::Hr, 3.0262),
    ("hue", Metric::Rr, 1.7014),
    ("green", Metric::Rr, 2.5026),
];

fn published(method: &str, metric: Metric) -> Option<f64> {
    PUBLISHED_TABLE2
        .iter()
        .find(|(m, k, _)| *m == method && *k == metric)
        .map(|p| p.2)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RmseReport {
    pub reference: String,
    pub entries: Vec<RmseEntry>,
    pub notes: Vec<String>,
}

impl RmseReport {
    pub fn entry(&self, method: &str, metric: Metric) -> Option<&RmseEntry> {
        self.entries.iter().find(|e| e.method == method && e.metric == metric)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<6} {:<12} {:<10} {:>4} {:>9} {:>9} {:>5}",
            "metric", "method", "reference", "n", "rmse", "published", "aami"
        );
        for e in &self.entries {
            let publ = e.published.map_or("-".to_owned(), |p| format!("{p:.4}"));
            let aami = match e.aami_pass() {
                Some(true) => "pass",
                Some(false) => "fail",
                None => "-",
            };
            let _ = writeln!(
                s,
                "{:<6} {:<12} {:<10} {:>4} {:>9} {:>9} {:>5}",
                e.metric.as_str(),
                e.method,
                e.reference,
                e.n,
                e.rmse_4dp(),
                publ,
                aami
            );
        }
        for n in &self.notes {
            let _ = writeln!(s, "note: {n}");
        }
        s
    }
}

/// RMSE of every non-reference column, and of every extra series, against
/// the reference column of its metric.
///
/// When the table reproduces the published watch and RR figures, entries
/// carry the published values, and a hue/green HR pair that matches only
/// after exchanging the two cells is reported in `notes`.
pub fn table_report(table: &ReferenceTable, extra: &[ReferenceSeries]) -> Result<RmseReport, EvalError> {
    let reference = |metric: Metric| {
        table.get(REFERENCE_METHOD, metric).ok_or_else(|| {
            EvalError::Config(format!("missing reference column {REFERENCE_METHOD}_{}", metric.as_str()))
        })
    };
    if table.get(REFERENCE_METHOD, Metric::Hr).is_none() && table.get(REFERENCE_METHOD, Metric::Rr).is_none() {
        return Err(EvalError::Config(format!(
            "no {REFERENCE_METHOD}_hr or {REFERENCE_METHOD}_rr column"
        )));
    }
    let mut entries = Vec::new();
    let mut candidates: Vec<&ReferenceSeries> = Vec::new();
    for metric in [Metric::Hr, Metric::Rr] {
        candidates.extend(
            table
                .order
                .iter()
                .filter(|(m, k)| *k == metric && m != REFERENCE_METHOD)
                .map(|key| &table.columns[key]),
        );
        candidates.extend(extra.iter().filter(|s| s.metric == metric));
    }
    for s in candidates {
        entries.push(rmse(s, reference(s.metric)?)?);
    }

    let mut notes = Vec::new();
    let matches = |e: &RmseEntry, p: f64| (e.rmse - p).abs() < 5e-5;
    let reproduces = ["apple", "samsung"]
        .iter()
        .map(|m| (*m, Metric::Hr))
        .chain(["hue", "green"].iter().map(|m| (*m, Metric::Rr)))
        .all(|(m, k)| {
            entries
                .iter()
                .any(|e| e.method == m && e.metric == k && published(m, k).is_some_and(|p| matches(e, p)))
        });
    if reproduces {
        for e in entries.iter_mut() {
            if table.get(&e.method, e.metric).is_some() {
                e.published = published(&e.method, e.metric);
            }
        }
        let find = |m: &str| entries.iter().find(|e| e.method == m && e.metric == Metric::Hr);
        if let (Some(hue), Some(green)) = (find("hue"), find("green")) {
            let (ph, pg) = (published("hue", Metric::Hr).unwrap(), published("green", Metric::Hr).unwrap());
            if !matches(hue, ph) && matches(hue, pg) && matches(green, ph) {
                notes.push(format!(
                    "published hue/green HR RMSE cells appear swapped: recomputed hue {} vs printed {ph:.4}, \
                     recomputed green {} vs printed {pg:.4}",
                    hue.rmse_4dp(),
                    green.rmse_4dp()
                ));
            }
        }
    }
    Ok(RmseReport {
        reference: REFERENCE_METHOD.into(),
        entries,
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const FIXTURE: &str = include_str!("../fixtures/table1.csv");

    fn series(method: &str, rows: &[(f64, f64)]) -> ReferenceSeries {
        ReferenceSeries::new(method, Metric::Hr, rows.to_vec()).unwrap()
    }

    // Independent recomputation: squared differences summed by hand from the
    // raw fixture columns.
    fn hand_rmse(a: &[f64], b: &[f64]) -> f64 {
        let s: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
        (s / a.len() as f64).sqrt()
    }

    #[test]
    fn fixture_reproduces_table() {
        let table = read_reference_csv(FIXTURE.as_bytes()).unwrap();
        let report = table_report(&table, &[]).unwrap();
        let get = |m, k| report.entry(m, k).unwrap();
        assert_eq!(get("apple", Metric::Hr).rmse_4dp(), "3.1119");
        assert_eq!(get("samsung", Metric::Hr).rmse_4dp(), "2.0901");
        assert_eq!(get("hue", Metric::Hr).rmse_4dp(), "3.0262");
        assert_eq!(get("green", Metric::Hr).rmse_4dp(), "2.9558");
        assert_eq!(get("hue", Metric::Rr).rmse_4dp(), "1.7014");
        assert_eq!(get("green", Metric::Rr).rmse_4dp(), "2.5026");
        assert!(report.entries.iter().all(|e| e.n == 19));
        assert_eq!(report.notes.len(), 1);
        assert!(report.notes[0].contains("swapped"));
        assert_eq!(get("hue", Metric::Hr).published, Some(2.9558));
    }

    #[test]
    fn squared_sums_match_hand_counts() {
        let table = read_reference_csv(FIXTURE.as_bytes()).unwrap();
        let col = |m: &str, k| -> Vec<f64> { table.get(m, k).unwrap().rows().iter().map(|r| r.1).collect() };
        let sq = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>();
        assert_eq!(sq(&col("apple", Metric::Hr), &col("hexoskin", Metric::Hr)), 184.0);
        assert_eq!(sq(&col("hue", Metric::Rr), &col("hexoskin", Metric::Rr)), 55.0);
        let want = hand_rmse(&col("green", Metric::Rr), &col("hexoskin", Metric::Rr));
        let report = table_report(&table, &[]).unwrap();
        assert_eq!(report.entry("green", Metric::Rr).unwrap().rmse_exact, want);
    }

    #[test]
    fn text_and_json_carry_values() {
        let table = read_reference_csv(FIXTURE.as_bytes()).unwrap();
        let report = table_report(&table, &[]).unwrap();
        let text = report.to_text();
        assert!(text.contains("1.7014") && text.contains("swapped"));
        let back: RmseReport = serde_json::from_str(&report.to_json()).unwrap();
        assert_eq!(back, report);
    }

    #[test]
    fn single_row_is_abs_diff() {
        let csv = "time_s,hexoskin_hr,apple_hr\n10,72,75.5\n";
        let report = table_report(&read_reference_csv(csv.as_bytes()).unwrap(), &[]).unwrap();
        let e = report.entry("apple", Metric::Hr).unwrap();
        assert_eq!((e.rmse, e.n), (3.5, 1));
        assert!(report.notes.is_empty());
        assert_eq!(e.published, None);
    }

    #[test]
    fn gap_rows_are_excluded() {
        let csv = "time_s,hexoskin_hr,apple_hr\n10,72,74\n15,70,\n20,71,71\n";
        let report = table_report(&read_reference_csv(csv.as_bytes()).unwrap(), &[]).unwrap();
        let e = report.entry("apple", Metric::Hr).unwrap();
        assert_eq!(e.n, 2);
        assert_eq!(e.rmse_exact, 2.0f64.sqrt());
    }

    #[test]
    fn missing_reference_is_config_error() {
        let csv = "time_s,apple_hr\n10,72\n";
        assert!(matches!(
            table_report(&read_reference_csv(csv.as_bytes()).unwrap(), &[]),
            Err(EvalError::Config(_))
        ));
        let csv = "time_s,hexoskin_hr,hue_rr\n10,72,16\n";
        assert!(matches!(
            table_report(&read_reference_csv(csv.as_bytes()).unwrap(), &[]),
            Err(EvalError::Config(_))
        ));
    }

    #[test]
    fn bad_cells_and_headers() {
        assert!(matches!(
            read_reference_csv("time_s,hexoskin_hr\n10,abc\n".as_bytes()),
            Err(EvalError::Parse { line: 2, .. })
        ));
        assert!(read_reference_csv("t,hexoskin_hr\n".as_bytes()).is_err());
        assert!(read_reference_csv("time_s,hexoskin\n".as_bytes()).is_err());
        assert!(read_reference_csv("time_s,hexoskin_hr\n10,72\n5,70\n".as_bytes()).is_err());
    }

    #[test]
    fn no_overlap_is_alignment_error() {
        let a = series("a", &[(1.0, 60.0)]);
        let b = series("b", &[(3.0, 60.0)]);
        assert!(matches!(rmse(&a, &b), Err(EvalError::Alignment { .. })));
    }

    #[test]
    fn alignment_rounds_to_seconds() {
        let a = series("a", &[(9.6, 60.0), (15.2, 62.0)]);
        let b = series("b", &[(10.0, 61.0), (15.0, 62.0)]);
        let e = rmse(&a, &b).unwrap();
        assert_eq!(e.n, 2);
        assert_eq!(e.rmse_exact, 0.5f64.sqrt());
    }

    #[test]
    fn aami_boundaries() {
        assert!(aami_pass(2.9558));
        assert!(!aami_pass(5.0));
        assert!(aami_pass(0.0));
        let table = read_reference_csv(FIXTURE.as_bytes()).unwrap();
        let verdicts = aami_check(&table_report(&table, &[]).unwrap());
        assert_eq!(verdicts.len(), 4);
        assert!(verdicts.iter().all(|v| v.1));
    }

    #[test]
    fn estimates_join_the_report() {
        use crate::roi::Channel;
        let est: Vec<VitalsEstimate> = (10..=20)
            .map(|t| VitalsEstimate {
                t_s: t,
                hr_bpm: Some(71.0),
                rr_bpm: (t >= 15).then_some(17.0),
                hr_raw: None,
                rr_raw: None,
                reason: None,
                channel: Channel::Hue,
                sample_count: 0,
                window_used_s: 0.0,
            })
            .collect();
        let (hr, rr) = series_from_estimates("run", &est).unwrap();
        let table = read_reference_csv(FIXTURE.as_bytes()).unwrap();
        let report = table_report(&table, &[hr, rr]).unwrap();
        let e = report.entry("run", Metric::Hr).unwrap();
        assert_eq!(e.n, 3);
        assert_eq!(e.rmse_exact, ((1.0 + 1.0 + 0.0) / 3.0f64).sqrt());
        assert_eq!(report.entry("run", Metric::Rr).unwrap().n, 2);
    }

    fn arb_series() -> impl Strategy<Value = Vec<(f64, f64)>> {
        prop::collection::vec(40.0f64..140.0, 1..40)
            .prop_map(|v| v.into_iter().enumerate().map(|(i, x)| (i as f64 * 5.0, x)).collect())
    }

    proptest! {
        #[test]
        fn rmse_is_symmetric(a in arb_series(), b in arb_series()) {
            let (a, b) = (series("a", &a), series("b", &b));
            prop_assert_eq!(rmse(&a, &b).unwrap().rmse_exact, rmse(&b, &a).unwrap().rmse_exact);
        }

        #[test]
        fn constant_offset_gives_abs_offset(a in arb_series(), c in -20.0f64..20.0) {
            let shifted: Vec<_> = a.iter().map(|&(t, v)| (t, v + c)).collect();
            let e = rmse(&series("a", &a), &series("b", &shifted)).unwrap();
            prop_assert!((e.rmse_exact - c.abs()).abs() < 1e-9);
        }

        #[test]
        fn self_rmse_is_zero(a in arb_series()) {
            let s = series("a", &a);
            prop_assert_eq!(rmse(&s, &s).unwrap().rmse_exact, 0.0);
        }
    }
}
