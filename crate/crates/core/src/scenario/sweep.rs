//! Editable scenario source and one-parameter sweeps.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use toml::Value;

use super::config::{Scenario, ScenarioConfig, ScenarioError};
use super::engine::run;
use super::report::{show, Report};
use crate::vehicle::Mode;

/// A scenario file held as a TOML document so single values can be
/// overridden before validation.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSource {
    table: toml::Table,
}

impl ScenarioSource {
    pub fn parse(text: &str) -> Result<Self, ScenarioError> {
        let table = text.parse::<toml::Table>().map_err(|e| ScenarioError::Parse(e.to_string()))?;
        Ok(Self { table })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ScenarioError> {
        let p = path.as_ref();
        let text =
            std::fs::read_to_string(p).map_err(|source| ScenarioError::Io { path: p.display().to_string(), source })?;
        Self::parse(&text)
    }

    pub fn set_mode(&mut self, mode: Mode) {
        self.table.insert("mode".into(), Value::String(mode.name().into()));
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.table.insert("seed".into(), Value::Integer(seed as i64));
    }

    /// Set the number at a dotted path such as `channels.cv2x.jitter_max_ms`
    /// or `agents.0.speed_mps`. Missing tables along the way are created;
    /// an existing non-numeric value is an error.
    pub fn set_number(&mut self, path: &str, value: f64) -> Result<(), ScenarioError> {
        let err = |m: String| ScenarioError::Sweep(m);
        let parts: Vec<&str> = path.split('.').collect();
        if parts.iter().any(|p| p.is_empty()) {
            return Err(err(format!("malformed parameter path {path:?}")));
        }
        let new = if value.is_finite() && value.fract() == 0.0 && value.abs() < 9.0e15 {
            Value::Integer(value as i64)
        } else {
            Value::Float(value)
        };
        let (leaf, inner) = parts.split_last().expect("nonempty");
        let mut root = Value::Table(self.table.clone());
        let mut cur = &mut root;
        for p in inner {
            cur = step(cur, p).ok_or_else(|| err(format!("{path}: no such entry {p:?}")))?;
        }
        let slot = match cur {
            Value::Table(t) => t.entry(leaf.to_string()).or_insert_with(|| new.clone()),
            Value::Array(a) => leaf
                .parse::<usize>()
                .ok()
                .and_then(|i| a.get_mut(i))
                .ok_or_else(|| err(format!("{path}: index out of range")))?,
            other => return Err(err(format!("{path}: cannot index into {}", other.type_str()))),
        };
        match slot {
            Value::Integer(_) | Value::Float(_) => *slot = new,
            other => return Err(err(format!("{path} is not numeric (found {})", other.type_str()))),
        }
        let Value::Table(t) = root else { unreachable!("root is a table") };
        self.table = t;
        Ok(())
    }

    pub fn config(&self) -> Result<ScenarioConfig, ScenarioError> {
        Value::Table(self.table.clone()).try_into().map_err(|e: toml::de::Error| ScenarioError::Parse(e.to_string()))
    }

    pub fn build(&self) -> Result<Scenario, ScenarioError> {
        Scenario::build(self.config()?)
    }
}

fn step<'v>(cur: &'v mut Value, key: &str) -> Option<&'v mut Value> {
    match cur {
        Value::Table(t) => Some(t.entry(key.to_string()).or_insert_with(|| Value::Table(toml::Table::new()))),
        Value::Array(a) => key.parse::<usize>().ok().and_then(|i| a.get_mut(i)),
        _ => None,
    }
}

/// One run of a sweep.
#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub value: f64,
    pub report: Report,
}

/// Run `source` once per value of the parameter at `path`, same seed each
/// time. Runs execute in parallel; the result keeps the order of `values`.
pub fn sweep(source: &ScenarioSource, path: &str, values: &[f64]) -> Result<Vec<SweepPoint>, ScenarioError> {
    if values.is_empty() {
        return Err(ScenarioError::Sweep("no values to sweep".into()));
    }
    let scenarios = values
        .iter()
        .map(|v| {
            let mut s = source.clone();
            s.set_number(path, *v)?;
            s.build()
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(scenarios
        .par_iter()
        .zip(values.par_iter())
        .map(|(sc, v)| SweepPoint { value: *v, report: run(sc).report })
        .collect())
}

/// Metrics as rows, sweep values as columns. `metrics` picks rows; `None`
/// shows every numeric metric.
pub fn sweep_table(path: &str, points: &[SweepPoint], metrics: Option<&[&str]>) -> String {
    let Some(first) = points.first() else { return String::new() };
    let names: Vec<&str> = match metrics {
        Some(m) => m.to_vec(),
        None => first.report.records.iter().filter(|r| r.value.is_number()).map(|r| r.name.as_str()).collect(),
    };
    let w = names.iter().map(|n| n.len()).max().unwrap_or(0).max(path.len());
    let mut out = format!("{path:<w$}");
    for p in points {
        let _ = write!(out, "  {:>12}", p.value);
    }
    out.push('\n');
    for n in names {
        let _ = write!(out, "{n:<w$}");
        for p in points {
            let cell = p.report.get(n).map_or("-".to_owned(), show);
            let _ = write!(out, "  {cell:>12}");
        }
        out.push('\n');
    }
    out
}
