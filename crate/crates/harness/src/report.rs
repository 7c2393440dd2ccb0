//! Aggregation of finished runs into result tables: per method, per object
//! complexity bin, and per pinned finger count. Every number is measured on
//! the test split with the best design of each run; cells are mean and
//! sample standard deviation over runs.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use labo_core::grasp::{GraspType, Split};
use labo_core::objects::ComplexityBin;
use labo_core::search::Method;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::runlog::RunLog;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
}

impl Stat {
    pub fn of(xs: &[f64]) -> Self {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let std = if xs.len() < 2 {
            0.0
        } else {
            (xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        Self { mean, std }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub method: Method,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_fingers: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bin: Option<ComplexityBin>,
    pub n_runs: usize,
    pub n_tasks: usize,
    /// Tasks per grasp type (power, pinch, lateral) behind the rates.
    pub type_counts: [usize; 3],
    pub power: Stat,
    pub pinch: Stat,
    pub lateral: Stat,
    pub overall: Stat,
    pub cost: Stat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub methods: Vec<Row>,
    pub bins: Vec<Row>,
    pub fingers: Vec<Row>,
}

/// Success rates of one run restricted to the test tasks accepted by `keep`.
struct RunRates {
    counts: [usize; 3],
    rates: [f64; 3],
    overall: f64,
    cost: f64,
}

fn rates(log: &RunLog, keep: impl Fn(ComplexityBin) -> bool) -> CliResult<RunRates> {
    let f = log
        .final_report
        .as_ref()
        .ok_or_else(|| CliError::usage(format!("run {} (seed {}) is unfinished", log.header.method.name(), log.header.seed)))?;
    let test: Vec<_> = log.header.tasks.iter().filter(|t| t.split == Split::Test).collect();
    if test.is_empty() || test.len() != f.test.p.len() {
        return Err(CliError::SchemaMismatch(format!(
            "run seed {}: {} test tasks in the header, {} results",
            log.header.seed,
            test.len(),
            f.test.p.len()
        )));
    }
    let (mut counts, mut hits) = ([0usize; 3], [0usize; 3]);
    for (t, &ok) in test.iter().zip(&f.test.p) {
        if keep(t.bin) {
            counts[t.grasp_type.index()] += 1;
            hits[t.grasp_type.index()] += ok as usize;
        }
    }
    let total: usize = counts.iter().sum();
    Ok(RunRates {
        counts,
        rates: std::array::from_fn(|g| if counts[g] > 0 { hits[g] as f64 / counts[g] as f64 } else { 0.0 }),
        overall: if total > 0 { hits.iter().sum::<usize>() as f64 / total as f64 } else { 0.0 },
        cost: f.test.cost,
    })
}

fn row(method: Method, n_fingers: Option<usize>, bin: Option<ComplexityBin>, logs: &[&RunLog]) -> CliResult<Row> {
    let first = &logs[0].header.tasks;
    if let Some(l) = logs.iter().find(|l| &l.header.tasks != first) {
        return Err(CliError::SchemaMismatch(format!(
            "{} runs use different task suites (seed {} differs from seed {})",
            method.name(),
            l.header.seed,
            logs[0].header.seed
        )));
    }
    let rs: Vec<RunRates> = logs
        .iter()
        .map(|l| rates(l, |b| bin.is_none_or(|x| x == b)))
        .collect::<CliResult<_>>()?;
    let col = |f: &dyn Fn(&RunRates) -> f64| Stat::of(&rs.iter().map(f).collect::<Vec<_>>());
    Ok(Row {
        method,
        n_fingers,
        bin,
        n_runs: logs.len(),
        n_tasks: rs[0].counts.iter().sum(),
        type_counts: rs[0].counts,
        power: col(&|r| r.rates[GraspType::Power.index()]),
        pinch: col(&|r| r.rates[GraspType::Pinch.index()]),
        lateral: col(&|r| r.rates[GraspType::Lateral.index()]),
        overall: col(&|r| r.overall),
        cost: col(&|r| r.cost),
    })
}

pub fn build(logs: &[RunLog]) -> CliResult<Report> {
    if logs.is_empty() {
        return Err(CliError::usage("report needs at least one run log"));
    }
    let mut free: BTreeMap<usize, Vec<&RunLog>> = BTreeMap::new();
    let mut pinned: BTreeMap<(usize, usize), Vec<&RunLog>> = BTreeMap::new();
    let order = |m: Method| Method::ALL.iter().position(|&x| x == m).expect("listed");
    for l in logs {
        let m = order(l.header.method);
        match l.header.fixed_fingers {
            None => free.entry(m).or_default().push(l),
            Some(n) => pinned.entry((m, n)).or_default().push(l),
        }
    }
    let mut report = Report {
        methods: Vec::new(),
        bins: Vec::new(),
        fingers: Vec::new(),
    };
    for (m, ls) in &free {
        let method = Method::ALL[*m];
        report.methods.push(row(method, None, None, ls)?);
        for b in ComplexityBin::ALL {
            report.bins.push(row(method, None, Some(b), ls)?);
        }
    }
    for ((m, n), ls) in &pinned {
        report.fingers.push(row(Method::ALL[*m], Some(*n), None, ls)?);
    }
    Ok(report)
}

const STAT_COLUMNS: [&str; 5] = ["power", "pinch", "lateral", "overall", "cost"];

fn tsv(rows: &[Row], key: &str, key_of: impl Fn(&Row) -> String) -> String {
    let mut s = format!("method\t{key}\tn_runs\tn_tasks\tn_power\tn_pinch\tn_lateral");
    for c in STAT_COLUMNS {
        s += &format!("\t{c}_mean\t{c}_std");
    }
    s.push('\n');
    for r in rows {
        let [a, b, c] = r.type_counts;
        s += &format!("{}\t{}\t{}\t{}\t{a}\t{b}\t{c}", r.method.name(), key_of(r), r.n_runs, r.n_tasks);
        for st in [r.power, r.pinch, r.lateral, r.overall, r.cost] {
            s += &format!("\t{:.6}\t{:.6}", st.mean, st.std);
        }
        s.push('\n');
    }
    s
}

/// Writes `methods.tsv`, `bins.tsv`, `fingers.tsv` (when there are pinned
/// runs) and `report.json` into `dir`.
pub fn write(report: &Report, dir: &Path) -> anyhow::Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("methods.tsv"), tsv(&report.methods, "scope", |_| "all".into()))?;
    fs::write(
        dir.join("bins.tsv"),
        tsv(&report.bins, "complexity", |r| r.bin.map(|b| b.name()).unwrap_or("-").into()),
    )?;
    if !report.fingers.is_empty() {
        fs::write(
            dir.join("fingers.tsv"),
            tsv(&report.fingers, "n_fingers", |r| r.n_fingers.map(|n| n.to_string()).unwrap_or_default()),
        )?;
    }
    fs::write(dir.join("report.json"), serde_json::to_string_pretty(report)? + "\n")?;
    Ok(())
}
