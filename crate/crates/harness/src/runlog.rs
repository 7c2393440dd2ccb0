//! Line-delimited run logs and the files derived from them.
//!
//! `runlog.jsonl` holds a header line, one line per evaluation and, for
//! finished runs, a final line with the best design's train and test
//! reports. Wall-clock timings go to a separate sidecar so the log itself
//! depends only on the configuration.

use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use labo_core::grasp::ScoreReport;
use labo_core::search::{EvalRecord, History, Method};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::SuiteConfig;
use crate::error::{CliError, CliResult};
use crate::suite::TaskInfo;

pub const SCHEMA: &str = "labo-runlog";
pub const VERSION: u32 = 1;

pub const RUNLOG: &str = "runlog.jsonl";
pub const TIMINGS: &str = "timings.jsonl";
pub const CURVE: &str = "curve.tsv";
pub const SUMMARY: &str = "summary.json";
pub const BEST_THETA: &str = "best_theta.txt";
pub const CHECKSUMS: &str = "SHA256SUMS";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunHeader {
    pub schema: String,
    pub version: u32,
    pub method: Method,
    pub seed: u64,
    pub budget: usize,
    pub fixed_fingers: Option<usize>,
    /// The full optimizer configuration.
    pub config: serde_json::Value,
    pub suite: SuiteConfig,
    pub tasks: Vec<TaskInfo>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalReport {
    pub best_index: usize,
    pub best_score: f64,
    /// The design as evaluated, i.e. after any finger-count mask.
    pub theta: Vec<f64>,
    pub train: ScoreReport,
    pub test: ScoreReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Line {
    Header(RunHeader),
    Eval(EvalRecord),
    Final(FinalReport),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunLog {
    pub header: RunHeader,
    pub records: Vec<EvalRecord>,
    pub final_report: Option<FinalReport>,
}

fn json_line<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string(v).expect("log lines serialize");
    s.push('\n');
    s
}

impl RunLog {
    pub fn read(path: &Path) -> CliResult<Self> {
        let f = File::open(path).map_err(|e| CliError::input(path, e))?;
        let bad = |n: usize, m: String| CliError::SchemaMismatch(format!("{}:{n}: {m}", path.display()));
        let mut lines = BufReader::new(f).lines().enumerate();
        let header = match lines.next() {
            Some((_, Ok(l))) => {
                let v: serde_json::Value = serde_json::from_str(&l).map_err(|e| bad(1, e.to_string()))?;
                if v.get("schema").and_then(|s| s.as_str()) != Some(SCHEMA) {
                    return Err(bad(1, format!("not a {SCHEMA} file")));
                }
                let version = v.get("version").and_then(|s| s.as_u64());
                if version != Some(VERSION as u64) {
                    return Err(bad(1, format!("log version {version:?}, this build reads version {VERSION}")));
                }
                match serde_json::from_value(v).map_err(|e| bad(1, e.to_string()))? {
                    Line::Header(h) => h,
                    _ => return Err(bad(1, "first line must be the header".into())),
                }
            }
            Some((_, Err(e))) => return Err(CliError::input(path, e)),
            None => return Err(bad(1, "empty log".into())),
        };
        let mut log = RunLog {
            header,
            records: Vec::new(),
            final_report: None,
        };
        for (i, l) in lines {
            let l = l.map_err(|e| CliError::input(path, e))?;
            match serde_json::from_str(&l).map_err(|e| bad(i + 1, e.to_string()))? {
                Line::Eval(r) if log.final_report.is_none() => log.records.push(r),
                Line::Final(f) if log.final_report.is_none() => log.final_report = Some(f),
                _ => return Err(bad(i + 1, "unexpected line".into())),
            }
        }
        Ok(log)
    }
}

/// Appends lines to a run log, flushing after every batch so an
/// interrupted run leaves a readable prefix.
pub struct RunLogWriter {
    out: BufWriter<File>,
}

impl RunLogWriter {
    /// Starts `path` afresh with the header and any records already made.
    pub fn create(path: &Path, header: &RunHeader, existing: &[EvalRecord]) -> std::io::Result<Self> {
        let mut w = Self {
            out: BufWriter::new(File::create(path)?),
        };
        w.out.write_all(json_line(&Line::Header(header.clone())).as_bytes())?;
        w.append(existing)?;
        Ok(w)
    }

    pub fn append(&mut self, records: &[EvalRecord]) -> std::io::Result<()> {
        for r in records {
            self.out.write_all(json_line(&Line::Eval(r.clone())).as_bytes())?;
        }
        self.out.flush()
    }

    pub fn finish(mut self, f: &FinalReport) -> std::io::Result<()> {
        self.out.write_all(json_line(&Line::Final(f.clone())).as_bytes())?;
        self.out.flush()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Timing {
    pub iteration: usize,
    pub evaluations: usize,
    pub seconds: f64,
}

pub fn append_timing(path: &Path, t: &Timing) -> std::io::Result<()> {
    let mut f = OpenOptions::new().create(true).append(true).open(path)?;
    f.write_all(json_line(t).as_bytes())
}

/// One row per optimizer iteration that evaluated something: cumulative
/// evaluations, best `F` so far, and the train success rate of that best
/// design.
pub fn curve_tsv(h: &History) -> String {
    let mut s = String::from("iteration\tevaluations\tbest_F\tbest_success_rate\n");
    let mut best: Option<&EvalRecord> = None;
    for (i, r) in h.records.iter().enumerate() {
        if best.is_none_or(|b| r.score > b.score) {
            best = Some(r);
        }
        let last_of_iteration = h.records.get(i + 1).is_none_or(|n| n.iteration != r.iteration);
        if last_of_iteration {
            let b = best.expect("set above");
            s += &format!("{}\t{}\t{}\t{}\n", r.iteration, i + 1, b.score, b.success_rate.unwrap_or(0.0));
        }
    }
    s
}

pub fn theta_text(theta: &[f64]) -> String {
    theta.iter().map(|v| format!("{v}\n")).collect()
}

pub fn sha256_file(path: &Path) -> std::io::Result<String> {
    Ok(format!("{:x}", Sha256::digest(fs::read(path)?)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub method: Method,
    pub seed: u64,
    pub budget: usize,
    pub fixed_fingers: Option<usize>,
    pub evaluations: usize,
    pub iterations: usize,
    #[serde(rename = "best_F")]
    pub best_score: f64,
    pub best_index: usize,
    pub train_success_rate: f64,
    pub test_success_rate: f64,
    pub cost: f64,
    pub runlog_sha256: String,
}

/// `sha256sum`-compatible listing of `files` inside `dir`.
pub fn write_checksums(dir: &Path, files: &[&str]) -> std::io::Result<()> {
    let mut s = String::new();
    for f in files {
        s += &format!("{}  {f}\n", sha256_file(&dir.join(f))?);
    }
    fs::write(dir.join(CHECKSUMS), s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use labo_core::objective::Evaluation;

    #[test]
    fn curve_groups_by_iteration() {
        let mut h = History::default();
        for (it, s) in [(0, 0.1), (0, 0.3), (1, 0.2), (2, 0.5)] {
            h.push(it, vec![0.0], None, &Evaluation::plain(s), None);
        }
        let c = curve_tsv(&h);
        let rows: Vec<&str> = c.lines().skip(1).collect();
        assert_eq!(rows, ["0\t2\t0.3\t0", "1\t3\t0.3\t0", "2\t4\t0.5\t0"]);
    }

    #[test]
    fn theta_text_round_trips() {
        let t = [0.1, 1.0 / 3.0, 0.0, 1.0];
        let back: Vec<f64> = theta_text(&t).lines().map(|l| l.parse().unwrap()).collect();
        assert_eq!(back, t);
    }
}
