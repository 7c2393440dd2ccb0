//! Experiment configuration: a TOML document whose top level and sections
//! mirror [`RunConfig`], plus `[suite]` and `[output]` for the harness.
//! Every field can be overridden from the command line with
//! `--section.key value`.

use std::path::{Path, PathBuf};

use labo_core::grasp::{DEFAULT_TEST_TASKS, DEFAULT_TRAIN_TASKS};
use labo_core::labo::RunConfig;
use serde::{Deserialize, Serialize};

use crate::error::{read_input, CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuiteConfig {
    pub n_train: usize,
    pub n_test: usize,
    /// Generates the procedural suite and seeds every episode.
    pub seed: u64,
    /// Task list to load instead of generating one.
    pub manifest: Option<PathBuf>,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            n_train: DEFAULT_TRAIN_TASKS,
            n_test: DEFAULT_TEST_TASKS,
            seed: 0,
            manifest: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Iterations between checkpoints; 0 disables them.
    pub checkpoint_every: usize,
    /// Stop (after checkpointing) once this many iterations ran in the
    /// current invocation.
    pub stop_after: Option<usize>,
    /// Per-iteration progress on stderr.
    pub progress: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("run"),
            checkpoint_every: 1,
            stop_after: None,
            progress: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Config {
    pub run: RunConfig,
    pub suite: SuiteConfig,
    pub output: OutputConfig,
}

/// `--a.b value`, with the value parsed as a TOML literal when possible
/// and taken as a bare string otherwise. The literal `none` clears a key.
#[derive(Debug, Clone, PartialEq)]
pub struct Override {
    pub key: Vec<String>,
    pub value: Option<toml::Value>,
}

fn parse_value(raw: &str) -> Option<toml::Value> {
    if raw == "none" {
        return None;
    }
    let literal = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"));
    Some(literal.unwrap_or_else(|| toml::Value::String(raw.to_string())))
}

/// Splits command-line words into overrides and the switches in `flags`
/// (given without the leading dashes).
pub fn parse_args(args: &[String], flags: &[&str]) -> CliResult<(Vec<Override>, Vec<String>)> {
    let mut overrides = Vec::new();
    let mut set = Vec::new();
    let mut it = args.iter();
    while let Some(a) = it.next() {
        let Some(key) = a.strip_prefix("--") else {
            return Err(CliError::usage(format!("unexpected argument `{a}`; overrides are `--key value`")));
        };
        if flags.contains(&key) {
            set.push(key.to_string());
            continue;
        }
        let (key, raw) = match key.split_once('=') {
            Some((k, v)) => (k, v.to_string()),
            None => (key, it.next().ok_or_else(|| CliError::usage(format!("`--{key}` needs a value")))?.clone()),
        };
        if key.is_empty() || key.split('.').any(str::is_empty) {
            return Err(CliError::usage(format!("malformed key `--{key}`")));
        }
        overrides.push(Override {
            key: key.split('.').map(|k| k.replace('-', "_")).collect(),
            value: parse_value(&raw),
        });
    }
    Ok((overrides, set))
}

fn apply(table: &mut toml::Table, o: &Override) -> CliResult<()> {
    let (last, path) = o.key.split_last().expect("keys are non-empty");
    let mut t = table;
    for k in path {
        let entry = t.entry(k.clone()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        t = entry
            .as_table_mut()
            .ok_or_else(|| CliError::usage(format!("`{}`: `{k}` is not a section", o.key.join("."))))?;
    }
    match &o.value {
        Some(v) => {
            t.insert(last.clone(), v.clone());
        }
        None => {
            t.remove(last);
        }
    }
    Ok(())
}

fn section<T: for<'de> Deserialize<'de>>(table: &mut toml::Table, name: &str) -> CliResult<T> {
    let v = table.remove(name).unwrap_or_else(|| toml::Value::Table(toml::Table::new()));
    from_toml(v).map_err(|e| CliError::usage(format!("config [{name}]: {e}")))
}

// Going through JSON lets integers fill float fields (`beta = 1`).
fn from_toml<T: for<'de> Deserialize<'de>>(v: toml::Value) -> Result<T, serde_json::Error> {
    serde_json::to_value(v).and_then(serde_json::from_value)
}

impl Config {
    /// Reads `path` (or starts from defaults) and applies `overrides`.
    pub fn load(path: Option<&Path>, overrides: &[Override]) -> CliResult<Self> {
        let mut table = match path {
            Some(p) => {
                let text = read_input(p)?;
                text.parse::<toml::Table>()
                    .map_err(|e| CliError::usage(format!("{}: {e}", p.display())))?
            }
            None => toml::Table::new(),
        };
        for o in overrides {
            apply(&mut table, o)?;
        }
        Self::from_table(table)
    }

    pub fn from_table(mut table: toml::Table) -> CliResult<Self> {
        let suite: SuiteConfig = section(&mut table, "suite")?;
        let output: OutputConfig = section(&mut table, "output")?;
        let run: RunConfig =
            from_toml(toml::Value::Table(table)).map_err(|e| CliError::usage(format!("config: {e}")))?;
        run.validate().map_err(|e| CliError::usage(e.to_string()))?;
        if suite.n_train == 0 && suite.manifest.is_none() {
            return Err(CliError::usage("suite.n_train must be positive"));
        }
        Ok(Self { run, suite, output })
    }

    pub fn to_toml(&self) -> String {
        let mut t = toml::Table::try_from(&self.run).expect("run config is TOML-representable");
        t.insert("suite".into(), toml::Value::try_from(&self.suite).expect("suite section"));
        t.insert("output".into(), toml::Value::try_from(&self.output).expect("output section"));
        toml::to_string(&t).expect("table serializes")
    }

    /// The part of the configuration that determines results; two runs
    /// with equal keys produce identical logs.
    pub fn result_key(&self) -> (RunConfig, SuiteConfig) {
        (self.run.clone(), self.suite.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use labo_core::search::Method;

    fn words(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    #[test]
    fn overrides_reach_nested_fields() {
        let (o, flags) = parse_args(
            &words("--optimizer uniform --budget 10 --labo.nn.lr 1e-4 --bo.acquisition.beta=1 --resume --suite.n-train 3"),
            &["resume"],
        )
        .unwrap();
        assert_eq!(flags, ["resume"]);
        let c = Config::load(None, &o).unwrap();
        assert_eq!(c.run.optimizer, Method::Uniform);
        assert_eq!(c.run.budget, 10);
        assert_eq!(c.run.labo.nn.lr, 1e-4);
        assert_eq!(c.run.bo.acquisition.beta, 1.0);
        assert_eq!(c.suite.n_train, 3);
    }

    #[test]
    fn unknown_keys_are_errors() {
        for a in ["--budgett 3", "--labo.steps 3", "--suite.size 3", "--output.where x"] {
            let (o, _) = parse_args(&words(a), &[]).unwrap();
            let e = Config::load(None, &o).unwrap_err();
            assert_eq!(e.exit_code(), 2, "{a}");
        }
        assert!(parse_args(&words("--budget"), &[]).is_err());
        assert!(parse_args(&words("budget 3"), &[]).is_err());
    }

    #[test]
    fn snapshot_round_trips() {
        let (o, _) = parse_args(&words("--optimizer raw-bo --fixed_fingers 4 --seed 9 --output.dir x/y"), &[]).unwrap();
        let c = Config::load(None, &o).unwrap();
        assert_eq!(c.run.optimizer, Method::RawBo);
        let back = Config::from_table(c.to_toml().parse().unwrap()).unwrap();
        assert_eq!(back, c);
        let (o, _) = parse_args(&words("--fixed_fingers none"), &[]).unwrap();
        let mut t: toml::Table = c.to_toml().parse().unwrap();
        apply(&mut t, &o[0]).unwrap();
        assert_eq!(Config::from_table(t).unwrap().run.fixed_fingers, None);
    }

    #[test]
    fn invalid_values_are_usage_errors() {
        let (o, _) = parse_args(&words("--fixed_fingers 9"), &[]).unwrap();
        assert_eq!(Config::load(None, &o).unwrap_err().exit_code(), 2);
        let e = Config::load(Some(Path::new("/nonexistent/cfg.toml")), &[]).unwrap_err();
        assert_eq!(e.exit_code(), 2);
        assert!(e.to_string().contains("/nonexistent/cfg.toml"));
    }
}
