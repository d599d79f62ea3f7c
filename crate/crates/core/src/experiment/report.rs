//! Per-trial metric rows, aggregates, and the CSV files that carry them.

use std::fmt::Write as _;
use std::path::Path;

use super::config::format_snr;
use crate::{Error, Result};

pub const REPORT_HEADER: &str = "dataset,mode,L,snr,method,trial,seed,resolved_nmse,residual";
pub const SUMMARY_HEADER: &str = "dataset,mode,L,snr,method,trials,failed,mean_nmse,std_nmse,mean_residual";

#[derive(Clone, Debug, PartialEq)]
pub struct TrialRecord {
    pub dataset: String,
    pub mode: String,
    pub sources: usize,
    pub snr: f64,
    pub method: String,
    pub trial: usize,
    pub seed: u64,
    /// NaN when every restart diverged.
    pub resolved_nmse: f64,
    pub residual: f64,
    /// Seconds; written to `timings.csv` only.
    pub wall_time: f64,
    pub diagnostic: Option<String>,
}

impl TrialRecord {
    fn key(&self) -> (String, String, usize, String, String) {
        (self.dataset.clone(), self.mode.clone(), self.sources, format_snr(self.snr), self.method.clone())
    }

    fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{:e},{:e}",
            self.dataset,
            self.mode,
            self.sources,
            format_snr(self.snr),
            self.method,
            self.trial,
            self.seed,
            self.resolved_nmse,
            self.residual
        )
    }
}

/// Mean ± sample standard deviation of resolved NMSE over the finite trials of one grid point.
#[derive(Clone, Debug, PartialEq)]
pub struct Summary {
    pub dataset: String,
    pub mode: String,
    pub sources: usize,
    pub snr: String,
    pub method: String,
    pub trials: usize,
    pub failed: usize,
    pub mean_nmse: f64,
    pub std_nmse: f64,
    pub mean_residual: f64,
}

/// Groups rows by `(dataset, mode, L, snr, method)` in order of first appearance.
pub fn summarize(rows: &[TrialRecord]) -> Vec<Summary> {
    let mut keys = Vec::new();
    for r in rows {
        let k = r.key();
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    keys.into_iter()
        .map(|k| {
            let group: Vec<&TrialRecord> = rows.iter().filter(|r| r.key() == k).collect();
            let ok: Vec<&TrialRecord> = group.iter().copied().filter(|r| r.resolved_nmse.is_finite()).collect();
            let n = ok.len() as f64;
            let mean = ok.iter().map(|r| r.resolved_nmse).sum::<f64>() / n;
            let var = if ok.len() > 1 { ok.iter().map(|r| (r.resolved_nmse - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
            let mean_residual = ok.iter().map(|r| r.residual).sum::<f64>() / n;
            Summary {
                dataset: k.0,
                mode: k.1,
                sources: k.2,
                snr: k.3,
                method: k.4,
                trials: group.len(),
                failed: group.len() - ok.len(),
                mean_nmse: mean,
                std_nmse: var.sqrt(),
                mean_residual,
            }
        })
        .collect()
}

pub fn report_csv(rows: &[TrialRecord]) -> String {
    let mut s = String::from(REPORT_HEADER);
    s.push('\n');
    for r in rows {
        s.push_str(&r.csv_row());
        s.push('\n');
    }
    s
}

pub fn timings_csv(rows: &[TrialRecord]) -> String {
    let mut s = String::from("trial,method,wall_time_s\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{:.3}", r.trial, r.method, r.wall_time);
    }
    s
}

pub fn summary_csv(summaries: &[Summary]) -> String {
    let mut s = String::from(SUMMARY_HEADER);
    s.push('\n');
    for m in summaries {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{:e},{:e},{:e}",
            m.dataset, m.mode, m.sources, m.snr, m.method, m.trials, m.failed, m.mean_nmse, m.std_nmse, m.mean_residual
        );
    }
    s
}

/// Parses a `report.csv`; `wall_time` is unknown and set to NaN.
pub fn parse_report_csv(text: &str) -> Result<Vec<TrialRecord>> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(REPORT_HEADER) {
        return Err(Error::format(format!("report header must be {REPORT_HEADER:?}")));
    }
    lines
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, line)| {
            let f: Vec<&str> = line.split(',').collect();
            let bad = |what: &str| Error::format(format!("report row {}: bad {what}", i + 1));
            if f.len() != 9 {
                return Err(bad("column count"));
            }
            Ok(TrialRecord {
                dataset: f[0].into(),
                mode: f[1].into(),
                sources: f[2].parse().map_err(|_| bad("L"))?,
                snr: f[3].parse().map_err(|_| bad("snr"))?,
                method: f[4].into(),
                trial: f[5].parse().map_err(|_| bad("trial"))?,
                seed: f[6].parse().map_err(|_| bad("seed"))?,
                resolved_nmse: f[7].parse().map_err(|_| bad("resolved_nmse"))?,
                residual: f[8].parse().map_err(|_| bad("residual"))?,
                wall_time: f64::NAN,
                diagnostic: None,
            })
        })
        .collect()
}

/// Reads one or more report files and aggregates them.
pub fn gridplot(paths: &[impl AsRef<Path>]) -> Result<Vec<Summary>> {
    let mut rows = Vec::new();
    for p in paths {
        let p = p.as_ref();
        let text = std::fs::read_to_string(p).map_err(|e| Error::Config(format!("cannot read {}: {e}", p.display())))?;
        rows.extend(parse_report_csv(&text)?);
    }
    Ok(summarize(&rows))
}

/// Fixed-width table with `mean ± std` cells.
pub fn render_table(summaries: &[Summary]) -> String {
    let header = ["dataset", "mode", "L", "snr", "method", "trials", "failed", "nmse"];
    let cells: Vec<[String; 8]> = summaries
        .iter()
        .map(|m| {
            [
                m.dataset.clone(),
                m.mode.clone(),
                m.sources.to_string(),
                m.snr.clone(),
                m.method.clone(),
                m.trials.to_string(),
                m.failed.to_string(),
                format!("{:.4} ± {:.4}", m.mean_nmse, m.std_nmse),
            ]
        })
        .collect();
    let widths: Vec<usize> = (0..8).map(|c| cells.iter().map(|r| r[c].chars().count()).chain([header[c].len()]).max().unwrap_or(0)).collect();
    let mut out = String::new();
    let line = |cols: Vec<&str>| cols.iter().zip(&widths).map(|(c, &w)| format!("{c:<w$}")).collect::<Vec<_>>().join("  ").trim_end().to_string();
    let _ = writeln!(out, "{}", line(header.to_vec()));
    for r in &cells {
        let _ = writeln!(out, "{}", line(r.iter().map(String::as_str).collect()));
    }
    out
}
