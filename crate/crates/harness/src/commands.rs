//! The four subcommands.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::Context;
use labo_core::design::{ParamVector, PARAM_DIM};
use labo_core::grasp::score::evaluate_design;
use labo_core::grasp::ScoreReport;
use labo_core::labo::AnyOptimizer;
use labo_core::objective::GraspObjective;
use labo_core::objects::ObjectKind;
use labo_core::search::Optimizer;
use serde::Serialize;

use crate::checkpoint;
use crate::config::{parse_args, Config};
use crate::error::{read_input, CliError, CliResult};
use crate::exec::RayonMap;
use crate::report;
use crate::runlog::{self, FinalReport, RunHeader, RunLog, RunLogWriter, Summary, Timing};
use crate::suite;

const CHECKPOINT_DIR: &str = "checkpoint";

/// How a `run` invocation ended.
#[derive(Debug, Clone, PartialEq)]
pub enum RunOutcome {
    Finished(Summary),
    /// Stopped by `output.stop_after`; resume with `--resume`.
    Stopped { evaluations: usize },
}

fn objective(cfg: &Config) -> CliResult<GraspObjective> {
    let suite = suite::build_suite(&cfg.suite)?;
    Ok(GraspObjective::new(suite, cfg.suite.seed, cfg.run.eval.clone())
        .with_executor(Box::new(RayonMap))
        .with_fixed_fingers(cfg.run.fixed_fingers))
}

fn header(cfg: &Config, obj: &GraspObjective) -> RunHeader {
    RunHeader {
        schema: runlog::SCHEMA.into(),
        version: runlog::VERSION,
        method: cfg.run.optimizer,
        seed: cfg.run.seed,
        budget: cfg.run.budget,
        fixed_fingers: cfg.run.fixed_fingers,
        config: serde_json::to_value(&cfg.run).expect("config serializes"),
        suite: cfg.suite.clone(),
        tasks: suite::task_info(&obj.suite),
    }
}

/// `labo run CONFIG [--key value]... [--resume]`
pub fn run(config_path: &Path, args: &[String]) -> CliResult<RunOutcome> {
    let (overrides, flags) = parse_args(args, &["resume"])?;
    let cfg = Config::load(Some(config_path), &overrides)?;
    let out = cfg.output.dir.clone();
    let ckpt = out.join(CHECKPOINT_DIR);
    let obj = objective(&cfg)?;

    let mut opt = if flags.iter().any(|f| f == "resume") {
        let (saved, opt) = checkpoint::load(&ckpt)?;
        if saved.result_key() != cfg.result_key() {
            return Err(CliError::usage(format!(
                "configuration differs from the checkpoint in {}",
                ckpt.display()
            )));
        }
        opt
    } else {
        cfg.run.build(obj.suite.n_tasks()).map_err(|e| CliError::usage(e.to_string()))?
    };
    let fresh = opt.iteration() == 0;

    let io = |what: &str, p: &Path| format!("{what} {}", p.display());
    fs::create_dir_all(&out).with_context(|| io("creating", &out))?;
    let log_path = out.join(runlog::RUNLOG);
    let timings = out.join(runlog::TIMINGS);
    if fresh {
        for f in [runlog::TIMINGS, runlog::SUMMARY, runlog::BEST_THETA, runlog::CHECKSUMS] {
            let _ = fs::remove_file(out.join(f));
        }
    }
    // The log is rewritten from the optimizer's history, so a resumed run
    // ends with exactly the log an uninterrupted one would have written.
    let mut log = RunLogWriter::create(&log_path, &header(&cfg, &obj), &opt.history().records)
        .with_context(|| io("writing", &log_path))?;

    let mut steps = 0;
    while !opt.is_done() && cfg.output.stop_after.is_none_or(|k| steps < k) {
        let t0 = Instant::now();
        let recs = opt
            .step(&obj)
            .map_err(|e| anyhow::anyhow!("{} iteration {}: {e}", opt.method().name(), opt.iteration()))?;
        let seconds = t0.elapsed().as_secs_f64();
        steps += 1;
        log.append(&recs).with_context(|| io("writing", &log_path))?;
        runlog::append_timing(
            &timings,
            &Timing {
                iteration: opt.iteration(),
                evaluations: opt.evaluations(),
                seconds,
            },
        )
        .with_context(|| io("writing", &timings))?;
        if cfg.output.progress {
            eprintln!(
                "{} seed {}: iteration {} evaluations {}/{} best F {:.4} ({seconds:.2}s)",
                opt.method().name(),
                cfg.run.seed,
                opt.iteration(),
                opt.evaluations(),
                opt.budget(),
                opt.history().best_score()
            );
        }
        let every = cfg.output.checkpoint_every;
        if every > 0 && opt.iteration() % every == 0 {
            checkpoint::save(&ckpt, &cfg, &opt)?;
        }
    }
    fs::write(out.join(runlog::CURVE), runlog::curve_tsv(opt.history())).with_context(|| io("writing", &out))?;
    if !opt.is_done() {
        checkpoint::save(&ckpt, &cfg, &opt)?;
        return Ok(RunOutcome::Stopped {
            evaluations: opt.evaluations(),
        });
    }
    let summary = finish(&cfg, &obj, &opt, log)?;
    checkpoint::save(&ckpt, &cfg, &opt)?;
    Ok(RunOutcome::Finished(summary))
}

fn finish(cfg: &Config, obj: &GraspObjective, opt: &AnyOptimizer, log: RunLogWriter) -> CliResult<Summary> {
    let out = &cfg.output.dir;
    let best = opt
        .history()
        .best()
        .ok_or_else(|| CliError::usage("budget 0: nothing was evaluated"))?;
    let theta = obj.prepare(&best.theta);
    let (train, test) = evaluate_design(&theta, &obj.suite, obj.seed, &obj.config, obj.executor());
    let fin = FinalReport {
        best_index: best.index,
        best_score: best.score,
        theta: theta.into_inner(),
        train,
        test,
    };
    log.finish(&fin).context("writing the run log")?;
    fs::write(out.join(runlog::BEST_THETA), runlog::theta_text(&fin.theta)).context("writing best θ")?;
    let summary = Summary {
        method: opt.method(),
        seed: cfg.run.seed,
        budget: cfg.run.budget,
        fixed_fingers: cfg.run.fixed_fingers,
        evaluations: opt.evaluations(),
        iterations: opt.iteration(),
        best_score: fin.best_score,
        best_index: fin.best_index,
        train_success_rate: fin.train.overall_success_rate(),
        test_success_rate: fin.test.overall_success_rate(),
        cost: fin.train.cost,
        runlog_sha256: runlog::sha256_file(&out.join(runlog::RUNLOG)).context("hashing the run log")?,
    };
    fs::write(
        out.join(runlog::SUMMARY),
        serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n",
    )
    .context("writing the summary")?;
    runlog::write_checksums(
        out,
        &[runlog::RUNLOG, runlog::CURVE, runlog::SUMMARY, runlog::BEST_THETA],
    )
    .context("writing checksums")?;
    Ok(summary)
}

/// `labo report LOG_OR_RUN_DIR... --out DIR`
pub fn report(inputs: &[PathBuf], out: &Path) -> CliResult<report::Report> {
    let logs: Vec<RunLog> = inputs
        .iter()
        .map(|p| {
            let p = if p.is_dir() { p.join(runlog::RUNLOG) } else { p.clone() };
            RunLog::read(&p)
        })
        .collect::<CliResult<_>>()?;
    let r = report::build(&logs)?;
    report::write(&r, out).with_context(|| format!("writing tables to {}", out.display()))?;
    Ok(r)
}

/// `labo objects KIND COUNT SEED OUT_DIR`
pub fn objects(kind: &str, count: usize, seed: u64, out: &Path) -> CliResult<Vec<PathBuf>> {
    let k = ObjectKind::parse(kind).ok_or_else(|| {
        CliError::usage(format!("unknown object kind `{kind}` (sphere, box, polyhedron, thin-plate, mixed)"))
    })?;
    Ok(suite::write_objects(k, count, seed, out).with_context(|| format!("writing objects to {}", out.display()))?)
}

/// One real per line; blank lines and `#` comments are ignored.
pub fn read_theta(path: &Path) -> CliResult<ParamVector> {
    let text = read_input(path)?;
    let bad = |reason: String| CliError::MalformedVector {
        path: path.to_path_buf(),
        reason,
    };
    let mut v = Vec::with_capacity(PARAM_DIM);
    for (i, l) in text.lines().enumerate() {
        let l = l.trim();
        if l.is_empty() || l.starts_with('#') {
            continue;
        }
        let x: f64 = l.parse().map_err(|_| bad(format!("line {}: `{l}` is not a number", i + 1)))?;
        v.push(x);
    }
    ParamVector::new(v).map_err(|e| bad(e.to_string()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalOutput {
    pub train: ScoreReport,
    pub test: ScoreReport,
}

/// `labo eval THETA_FILE [--config FILE] [--key value]...`: the suite and
/// evaluator settings come from the configuration.
pub fn eval(theta_path: &Path, config: Option<&Path>, args: &[String]) -> CliResult<EvalOutput> {
    let theta = read_theta(theta_path)?;
    let (overrides, _) = parse_args(args, &[])?;
    let cfg = Config::load(config, &overrides)?;
    let obj = objective(&cfg)?;
    let theta = obj.prepare(theta.as_slice());
    let (train, test) = evaluate_design(&theta, &obj.suite, obj.seed, &obj.config, obj.executor());
    Ok(EvalOutput { train, test })
}
