use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{summarize, timing_report, CaseResult, EvalError, Result, SummaryRow, TimingRow};

pub const RESULTS_CSV_HEADER: &str = "scenario,planner,seed,debris_visited,refuels,dv_used_kms,episode_return,wall_time_s,mean_decision_latency_s";

/// Case counts per number of debris visited, index = debris visited.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub scenario: String,
    pub planner: String,
    pub counts: Vec<usize>,
}

pub fn histograms(results: &[CaseResult]) -> Vec<Histogram> {
    super::groups(results)
        .into_iter()
        .map(|((scenario, planner), rows)| {
            let top = rows.iter().map(|r| r.debris_visited).max().unwrap_or(0);
            let mut counts = vec![0; top + 1];
            for r in rows {
                counts[r.debris_visited] += 1;
            }
            Histogram {
                scenario,
                planner,
                counts,
            }
        })
        .collect()
}

/// Everything the JSON export carries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsBundle {
    pub results: Vec<CaseResult>,
    pub summaries: Vec<SummaryRow>,
    pub timing: Vec<TimingRow>,
    pub histograms: Vec<Histogram>,
    pub std_kind: String,
}

impl ResultsBundle {
    pub fn new(results: Vec<CaseResult>) -> Self {
        let (summaries, timing) = if results.is_empty() {
            (Vec::new(), Vec::new())
        } else {
            (
                summarize(&results).expect("non-empty"),
                timing_report(&results).expect("non-empty"),
            )
        };
        Self {
            histograms: histograms(&results),
            results,
            summaries,
            timing,
            std_kind: "population".into(),
        }
    }
}

pub fn results_to_csv(results: &[CaseResult]) -> Result<String> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(Vec::new());
    for r in results {
        w.serialize(r)?;
    }
    let body = w.into_inner().map_err(|e| EvalError::Io {
        path: "<memory>".into(),
        source: e.into_error(),
    })?;
    let mut out = String::with_capacity(RESULTS_CSV_HEADER.len() + 1 + body.len());
    out.push_str(RESULTS_CSV_HEADER);
    out.push('\n');
    out.push_str(std::str::from_utf8(&body).expect("csv output is utf-8"));
    Ok(out)
}

pub fn parse_results_csv(text: &str) -> Result<Vec<CaseResult>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header.join(",") != RESULTS_CSV_HEADER {
        return Err(EvalError::Csv(csv::Error::from(std::io::Error::new(
            std::io::ErrorKind::InvalidData,
            format!("unexpected header {}", header.join(",")),
        ))));
    }
    r.deserialize().map(|row| row.map_err(EvalError::from)).collect()
}

/// Fixed-width table in the Min / Max / Avg ± Std layout.
pub fn summary_table(rows: &[SummaryRow]) -> String {
    let mut out = String::from("# debris visited per case; std is the population standard deviation\n");
    let _ = writeln!(
        out,
        "{:<14} {:<24} {:>5} {:>6} {:>6} {:>13}",
        "scenario", "planner", "cases", "min", "max", "avg ± std"
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{:<14} {:<24} {:>5} {:>6.0} {:>6.0} {:>13}",
            r.scenario,
            r.planner,
            r.n_cases,
            r.min,
            r.max,
            r.mean_pm_std()
        );
    }
    out
}

pub fn timing_table(rows: &[TimingRow]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<14} {:<24} {:>5} {:>12} {:>12} {:>14} {:>14}",
        "scenario", "planner", "cases", "wall_mean_s", "wall_max_s", "decision_mean_s", "decision_max_s"
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{:<14} {:<24} {:>5} {:>12.4} {:>12.4} {:>14.3e} {:>14.3e}",
            r.scenario,
            r.planner,
            r.n_cases,
            r.mean_wall_time_s,
            r.max_wall_time_s,
            r.mean_decision_latency_s,
            r.max_decision_latency_s
        );
    }
    out
}

fn histograms_csv(hists: &[Histogram]) -> String {
    let mut out = String::from("scenario,planner,debris_visited,count\n");
    for h in hists {
        for (k, c) in h.counts.iter().enumerate() {
            let _ = writeln!(out, "{},{},{k},{c}", h.scenario, h.planner);
        }
    }
    out
}

fn write(path: PathBuf, text: &str) -> Result<PathBuf> {
    fs::write(&path, text).map_err(|e| EvalError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    Ok(path)
}

/// Writes results.csv, results.json, summary.txt, timing.txt, timing.json
/// and histograms.csv into `dir`; returns the written paths.
pub fn write_results(dir: &Path, results: &[CaseResult]) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| EvalError::Io {
        path: dir.display().to_string(),
        source: e,
    })?;
    let bundle = ResultsBundle::new(results.to_vec());
    Ok(vec![
        write(dir.join("results.csv"), &results_to_csv(results)?)?,
        write(
            dir.join("results.json"),
            &(serde_json::to_string_pretty(&bundle)? + "\n"),
        )?,
        write(dir.join("summary.txt"), &summary_table(&bundle.summaries))?,
        write(dir.join("timing.txt"), &timing_table(&bundle.timing))?,
        write(
            dir.join("timing.json"),
            &(serde_json::to_string_pretty(&bundle.timing)? + "\n"),
        )?,
        write(dir.join("histograms.csv"), &histograms_csv(&bundle.histograms))?,
    ])
}
