//! Alignment reports and their CSV / JSON-lines renderings.

use std::fmt::Write as _;
use std::path::Path;

use clozealign_core::ngram::ResponseScore;
use clozealign_core::norms::SubwordStats;
use clozealign_core::stats::CalibrationCurve;
use serde_json::Value;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum Format {
    #[default]
    Csv,
    Jsonl,
}

/// One statistic for one checkpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub analysis: String,
    pub model_id: String,
    pub n_params: u64,
    pub checkpoint_step: u64,
    pub dedup: bool,
    pub statistic: f64,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    pub n: usize,
}

impl ReportRow {
    fn key(&self) -> (&str, &str, u64, bool) {
        (
            &self.analysis,
            &self.model_id,
            self.checkpoint_step,
            self.dedup,
        )
    }
}

/// Rows ordered by `(analysis, model_id, checkpoint_step, dedup)`, one per key.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AlignmentReport {
    rows: Vec<ReportRow>,
}

impl AlignmentReport {
    pub fn new(mut rows: Vec<ReportRow>) -> Result<Self> {
        rows.sort_by(|a, b| a.key().cmp(&b.key()));
        if let Some(w) = rows.windows(2).find(|w| w[0].key() == w[1].key()) {
            return Err(CliError::Config(format!(
                "duplicate report row for `{}` on `{}` step {} (dedup {})",
                w[0].analysis, w[0].model_id, w[0].checkpoint_step, w[0].dedup
            )));
        }
        for r in &rows {
            let low_ok = r.ci_low.is_none_or(|l| l <= r.statistic);
            let high_ok = r.ci_high.is_none_or(|h| r.statistic <= h);
            if !(low_ok && high_ok) {
                return Err(CliError::Config(format!(
                    "row `{}` on `{}`: interval does not contain the statistic",
                    r.analysis, r.model_id
                )));
            }
        }
        Ok(AlignmentReport { rows })
    }

    pub fn rows(&self) -> &[ReportRow] {
        &self.rows
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn find(&self, analysis: &str, model_id: &str) -> impl Iterator<Item = &ReportRow> {
        let (analysis, model_id) = (analysis.to_string(), model_id.to_string());
        self.rows
            .iter()
            .filter(move |r| r.analysis == analysis && r.model_id == model_id)
    }
}

/// Six significant digits, switching to exponent notation outside
/// `[1e-5, 1e6)`, like C's `%g`. Non-finite values render as `nan`, `inf`.
pub fn fmt_g6(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..6).contains(&exp) {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{m}e{sign}{:02}", exp.abs());
    }
    let decimals = (5 - exp) as usize;
    trim_zeros(&format!("{x:.decimals$}")).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn json_number(x: Option<f64>) -> String {
    match x {
        Some(v) if v.is_finite() => fmt_g6(v),
        _ => "null".into(),
    }
}

fn csv_number(x: Option<f64>) -> String {
    x.map(fmt_g6).unwrap_or_default()
}

fn json_str(s: &str) -> String {
    serde_json::to_string(s).expect("strings serialize")
}

const REPORT_COLUMNS: [&str; 9] = [
    "analysis",
    "model_id",
    "n_params",
    "checkpoint_step",
    "dedup",
    "statistic",
    "ci_low",
    "ci_high",
    "n",
];

const CORRELATION_COLUMNS: [&str; 8] = [
    "analysis",
    "model_id",
    "checkpoint",
    "dedup",
    "rho",
    "ci_low",
    "ci_high",
    "n",
];

const SCORE_COLUMNS: [&str; 5] = ["stem_id", "response", "first_subword", "backoff", "unigram"];

const SUBWORD_COLUMNS: [&str; 4] = [
    "response_types",
    "single_token_fraction",
    "mean_subwords",
    "sd_subwords",
];

const CALIBRATION_COLUMNS: [&str; 5] = ["bin_center", "mean_model_prob", "ci_low", "ci_high", "n"];

/// A cell: raw text for CSV, and either a JSON string or a bare JSON
/// literal for JSON lines.
enum Cell {
    Text(String),
    Literal(String),
    Number(Option<f64>),
}

fn render_table(columns: &[&str], rows: Vec<Vec<Cell>>, format: Format) -> Result<String> {
    if rows.is_empty() {
        return Err(CliError::Config("refusing to write an empty report".into()));
    }
    let mut out = String::new();
    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            let csv_err = |e: csv::Error| CliError::Config(format!("rendering CSV: {e}"));
            w.write_record(columns).map_err(csv_err)?;
            for row in rows {
                let cells: Vec<String> = row
                    .into_iter()
                    .map(|c| match c {
                        Cell::Text(s) | Cell::Literal(s) => s,
                        Cell::Number(v) => csv_number(v),
                    })
                    .collect();
                w.write_record(&cells).map_err(csv_err)?;
            }
            let bytes = w
                .into_inner()
                .map_err(|e| CliError::Config(e.to_string()))?;
            out = String::from_utf8(bytes).expect("CSV of UTF-8 input");
        }
        Format::Jsonl => {
            for row in rows {
                out.push('{');
                for (i, (name, cell)) in columns.iter().zip(row).enumerate() {
                    if i > 0 {
                        out.push(',');
                    }
                    let value = match cell {
                        Cell::Text(s) => json_str(&s),
                        Cell::Literal(s) => s,
                        Cell::Number(v) => json_number(v),
                    };
                    let _ = write!(out, "{}:{}", json_str(name), value);
                }
                out.push_str("}\n");
            }
        }
    }
    Ok(out)
}

pub fn render_report(report: &AlignmentReport, format: Format) -> Result<String> {
    let rows = report
        .rows
        .iter()
        .map(|r| {
            vec![
                Cell::Text(r.analysis.clone()),
                Cell::Text(r.model_id.clone()),
                Cell::Literal(r.n_params.to_string()),
                Cell::Literal(r.checkpoint_step.to_string()),
                Cell::Literal(r.dedup.to_string()),
                Cell::Number(Some(r.statistic)),
                Cell::Number(r.ci_low),
                Cell::Number(r.ci_high),
                Cell::Literal(r.n.to_string()),
            ]
        })
        .collect();
    render_table(&REPORT_COLUMNS, rows, format)
}

/// The per-analysis correlation table.
pub fn render_correlations(rows: &[ReportRow], format: Format) -> Result<String> {
    let rows = rows
        .iter()
        .map(|r| {
            vec![
                Cell::Text(r.analysis.clone()),
                Cell::Text(r.model_id.clone()),
                Cell::Literal(r.checkpoint_step.to_string()),
                Cell::Literal(r.dedup.to_string()),
                Cell::Number(Some(r.statistic)),
                Cell::Number(r.ci_low),
                Cell::Number(r.ci_high),
                Cell::Literal(r.n.to_string()),
            ]
        })
        .collect();
    render_table(&CORRELATION_COLUMNS, rows, format)
}

pub fn render_calibration(curve: &CalibrationCurve, format: Format) -> Result<String> {
    let rows = curve
        .bins
        .iter()
        .map(|b| {
            vec![
                Cell::Number(Some(b.bin_center)),
                Cell::Number(Some(b.mean_model_prob)),
                Cell::Number(Some(b.ci_low)),
                Cell::Number(Some(b.ci_high)),
                Cell::Literal(b.n.to_string()),
            ]
        })
        .collect();
    render_table(&CALIBRATION_COLUMNS, rows, format)
}

/// Per-response n-gram scores.
pub fn render_scores(scores: &[ResponseScore], format: Format) -> Result<String> {
    let rows = scores
        .iter()
        .map(|s| {
            vec![
                Cell::Text(s.stem_id.clone()),
                Cell::Text(s.response.clone()),
                Cell::Literal(s.first_subword.to_string()),
                Cell::Number(Some(s.backoff)),
                Cell::Number(Some(s.unigram)),
            ]
        })
        .collect();
    render_table(&SCORE_COLUMNS, rows, format)
}

pub fn render_subword_stats(
    stats: &SubwordStats,
    n_types: usize,
    format: Format,
) -> Result<String> {
    let row = vec![
        Cell::Literal(n_types.to_string()),
        Cell::Number(Some(stats.single_token_fraction)),
        Cell::Number(Some(stats.mean_subwords)),
        Cell::Number(Some(stats.sd_subwords)),
    ];
    render_table(&SUBWORD_COLUMNS, vec![row], format)
}

/// Writes the rendered text, or prints it when `path` is `None`.
pub fn write_output(text: &str, path: Option<&Path>) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::io(p, e)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

pub fn emit_report(report: &AlignmentReport, path: &Path, format: Format) -> Result<()> {
    let text = render_report(report, format)?;
    write_output(&text, Some(path))
}

fn parse_opt(s: &str) -> std::result::Result<Option<f64>, String> {
    match s {
        "" => Ok(None),
        v => v.parse().map(Some).map_err(|_| format!("bad number `{v}`")),
    }
}

/// Reads a report written by [`render_report`] in either format.
pub fn parse_report(text: &str, format: Format, path: &Path) -> Result<AlignmentReport> {
    let mut rows = Vec::new();
    match format {
        Format::Csv => {
            let mut rdr = csv::Reader::from_reader(text.as_bytes());
            let headers = rdr
                .headers()
                .map_err(|e| CliError::format(path, 1, e.to_string()))?
                .clone();
            if headers.iter().ne(REPORT_COLUMNS) {
                return Err(CliError::format(path, 1, "unexpected report columns"));
            }
            for rec in rdr.records() {
                let rec = rec.map_err(|e| CliError::format(path, 0, e.to_string()))?;
                let line = rec.position().map_or(0, |p| p.line() as usize);
                let fail = |m: String| CliError::format(path, line, m);
                let int = |i: usize| {
                    rec[i]
                        .parse::<u64>()
                        .map_err(|_| fail(format!("bad integer `{}`", &rec[i])))
                };
                rows.push(ReportRow {
                    analysis: rec[0].to_string(),
                    model_id: rec[1].to_string(),
                    n_params: int(2)?,
                    checkpoint_step: int(3)?,
                    dedup: rec[4]
                        .parse()
                        .map_err(|_| fail(format!("bad flag `{}`", &rec[4])))?,
                    statistic: parse_opt(&rec[5])
                        .map_err(fail)?
                        .ok_or_else(|| fail("missing statistic".into()))?,
                    ci_low: parse_opt(&rec[6]).map_err(fail)?,
                    ci_high: parse_opt(&rec[7]).map_err(fail)?,
                    n: int(8)? as usize,
                });
            }
        }
        Format::Jsonl => {
            for (i, line) in text
                .lines()
                .enumerate()
                .filter(|(_, l)| !l.trim().is_empty())
            {
                let fail = |m: &str| CliError::format(path, i + 1, m.to_string());
                let v: Value = serde_json::from_str(line)
                    .map_err(|e| CliError::format(path, i + 1, e.to_string()))?;
                let s = |k: &str| v[k].as_str().map(str::to_string).ok_or_else(|| fail(k));
                let u = |k: &str| v[k].as_u64().ok_or_else(|| fail(k));
                let f = |k: &str| match &v[k] {
                    Value::Null => Ok(None),
                    x => x.as_f64().map(Some).ok_or_else(|| fail(k)),
                };
                rows.push(ReportRow {
                    analysis: s("analysis")?,
                    model_id: s("model_id")?,
                    n_params: u("n_params")?,
                    checkpoint_step: u("checkpoint_step")?,
                    dedup: v["dedup"].as_bool().ok_or_else(|| fail("dedup"))?,
                    statistic: f("statistic")?.unwrap_or(f64::NAN),
                    ci_low: f("ci_low")?,
                    ci_high: f("ci_high")?,
                    n: u("n")? as usize,
                });
            }
        }
    }
    AlignmentReport::new(rows)
}
