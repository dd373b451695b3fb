//! CSV emission and re-parsing of experiment results.
//!
//! Numbers are written with 17 significant digits so that every `f64`
//! survives a round trip exactly.

use crate::error::{Error, Result};
use crate::harness::{cell_passed, summarize, CellResult, ExperimentResult, Replication};
use slowfast_core::stats::Summary;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

/// `d.dddddddddddddddde±x`: 17 significant digits.
pub fn format_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        format!("{v}")
    }
}

fn format_opt(v: Option<f64>) -> String {
    v.map(format_f64).unwrap_or_default()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Statistic {
    Mean,
    Sd,
    TheoreticalSd,
}

impl Statistic {
    pub fn file_name(self) -> &'static str {
        match self {
            Statistic::Mean => "summary_mean.csv",
            Statistic::Sd => "summary_sd.csv",
            Statistic::TheoreticalSd => "theoretical_sd.csv",
        }
    }
}

/// Table entry: the statistic, `FAIL(k)` for a failed cell, or empty when
/// undefined.
fn entry(cell: &CellResult, j: usize, stat: Statistic) -> String {
    if !cell.passed {
        return format!("FAIL({})", cell.failures);
    }
    let s = &cell.summaries[j];
    let v = match stat {
        Statistic::Mean => s.summary.map(|s| s.mean),
        Statistic::Sd => s.summary.map(|s| s.sd).filter(|v| v.is_finite()),
        Statistic::TheoreticalSd => s.theoretical_sd,
    };
    format_opt(v)
}

/// Wide table: one row per `(column, ε, η)`, one value column per `n`.
pub fn table(result: &ExperimentResult, stat: Statistic) -> Result<String> {
    let cfg = &result.config;
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["estimator".to_string(), "epsilon".into(), "eta".into()];
    header.extend(cfg.n.iter().map(|n| format!("n={n}")));
    w.write_record(&header)?;
    for (j, col) in result.columns.iter().enumerate() {
        for (si, s) in cfg.scales.iter().enumerate() {
            let mut row = vec![col.to_string(), format_f64(s.epsilon), format_f64(s.eta)];
            for ni in 0..cfg.n.len() {
                row.push(entry(&result.cells[si * cfg.n.len() + ni], j, stat));
            }
            w.write_record(&row)?;
        }
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| Error::config(e.to_string()))?).expect("csv is utf-8"))
}

/// Parsed wide table: `(estimator, ε, η)` rows with one entry per `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedRow {
    pub estimator: String,
    pub epsilon: f64,
    pub eta: f64,
    pub entries: Vec<TableEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TableEntry {
    Value(f64),
    Fail(usize),
    Missing,
}

fn parse_f64(s: &str) -> Result<f64> {
    s.parse().map_err(|_| Error::config(format!("not a number: '{s}'")))
}

pub fn parse_table(text: &str) -> Result<(Vec<usize>, Vec<ParsedRow>)> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let ns = r
        .headers()?
        .iter()
        .skip(3)
        .map(|h| h.strip_prefix("n=").and_then(|v| v.parse().ok()).ok_or_else(|| Error::config(format!("bad header '{h}'"))))
        .collect::<Result<Vec<usize>>>()?;
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let entries = rec
            .iter()
            .skip(3)
            .map(|e| {
                if e.is_empty() {
                    Ok(TableEntry::Missing)
                } else if let Some(k) = e.strip_prefix("FAIL(").and_then(|s| s.strip_suffix(')')) {
                    k.parse().map(TableEntry::Fail).map_err(|_| Error::config(format!("bad entry '{e}'")))
                } else {
                    parse_f64(e).map(TableEntry::Value)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(ParsedRow { estimator: rec[0].to_string(), epsilon: parse_f64(&rec[1])?, eta: parse_f64(&rec[2])?, entries });
    }
    Ok((ns, rows))
}

/// `rep,seed,<columns…>,error`.
pub fn raw_csv(result: &ExperimentResult, cell: &CellResult) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["rep".to_string(), "seed".into()];
    header.extend(result.columns.iter().map(|c| c.to_string()));
    header.push("error".into());
    w.write_record(&header)?;
    for r in &cell.replications {
        let mut row = vec![r.rep.to_string(), r.seed.to_string()];
        row.extend(r.values.iter().map(|v| format_opt(*v)));
        row.push(r.error.clone().unwrap_or_default());
        w.write_record(&row)?;
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| Error::config(e.to_string()))?).expect("csv is utf-8"))
}

/// Column names and replications from a `raw.csv`.
pub fn parse_raw(text: &str) -> Result<(Vec<String>, Vec<Replication>)> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = r.headers()?.iter().map(String::from).collect();
    if header.len() < 3 || header[0] != "rep" || header[1] != "seed" || header.last().map(String::as_str) != Some("error") {
        return Err(Error::config("raw.csv header must be rep,seed,<columns>,error"));
    }
    let names = header[2..header.len() - 1].to_vec();
    let mut reps = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let bad = |f: &str| Error::config(format!("bad {f} in raw.csv"));
        let values = (2..rec.len() - 1)
            .map(|i| if rec[i].is_empty() { Ok(None) } else { parse_f64(&rec[i]).map(Some) })
            .collect::<Result<Vec<_>>>()?;
        let error = &rec[rec.len() - 1];
        reps.push(Replication {
            rep: rec[0].parse().map_err(|_| bad("rep"))?,
            seed: rec[1].parse().map_err(|_| bad("seed"))?,
            values,
            error: (!error.is_empty()).then(|| error.to_string()),
        });
    }
    Ok((names, reps))
}

/// Summaries recomputed from a stored `raw.csv`, and whether the cell passes.
pub fn resummarize(text: &str) -> Result<(Vec<String>, Vec<Option<Summary>>, bool)> {
    let (names, reps) = parse_raw(text)?;
    let failures = reps.iter().filter(|r| r.failed()).count();
    let sums = summarize(names.len(), &reps);
    Ok((names, sums, cell_passed(failures, reps.len())))
}

/// Human-readable layout: per column and `ε`, rows `η`, columns `n`, entries `mean (sd)`.
pub fn text_report(result: &ExperimentResult) -> String {
    let cfg = &result.config;
    let mut out = String::new();
    for (j, col) in result.columns.iter().enumerate() {
        for (si, s) in cfg.scales.iter().enumerate() {
            let _ = writeln!(out, "{col}  eps = {}  eta = {}", s.epsilon, s.eta);
            let _ = write!(out, "{:>12}", "n");
            for n in &cfg.n {
                let _ = write!(out, "{n:>28}");
            }
            let _ = writeln!(out);
            let _ = write!(out, "{:>12}", "mean (sd)");
            for ni in 0..cfg.n.len() {
                let cell = &result.cells[si * cfg.n.len() + ni];
                let text = match (cell.passed, cell.summaries[j].summary) {
                    (false, _) => format!("FAIL({})", cell.failures),
                    (true, Some(s)) => format!("{:.5} ({:.5})", s.mean, s.sd),
                    (true, None) => "-".into(),
                };
                let _ = write!(out, "{text:>28}");
            }
            let _ = writeln!(out);
            let _ = write!(out, "{:>12}", "theory sd");
            for ni in 0..cfg.n.len() {
                let t = result.cells[si * cfg.n.len() + ni].summaries[j].theoretical_sd;
                let text = t.map(|v| format!("{v:.5}")).unwrap_or_else(|| "-".into());
                let _ = write!(out, "{text:>28}");
            }
            let _ = writeln!(out, "\n");
        }
    }
    out
}

fn write(path: PathBuf, text: &str) -> Result<()> {
    fs::write(&path, text).map_err(|e| Error::io(path, e))
}

/// Writes `out/<cell>/raw.csv`, the three summary tables, `summary.txt` and
/// the resolved `config.toml`.
pub fn emit(result: &ExperimentResult, out: &Path) -> Result<()> {
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    for cell in &result.cells {
        let dir = out.join(cell.label());
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        write(dir.join("raw.csv"), &raw_csv(result, cell)?)?;
    }
    for stat in [Statistic::Mean, Statistic::Sd, Statistic::TheoreticalSd] {
        write(out.join(stat.file_name()), &table(result, stat)?)?;
    }
    write(out.join("summary.txt"), &text_report(result))?;
    write(out.join("config.toml"), &result.config.to_toml())?;
    Ok(())
}
