//! Metric records, their line-delimited JSON and table renderings, and A/B
//! comparison.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use serde_json::Value;

/// One reported quantity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricRecord {
    pub name: String,
    pub value: Value,
    pub unit: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    pub records: Vec<MetricRecord>,
}

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ReportError {
    #[error("line {line}: {message}")]
    BadLine { line: usize, message: String },
    #[error("reports describe different topologies ({a} vs {b})")]
    TopologyMismatch { a: String, b: String },
    #[error("report has no topology_id record")]
    MissingTopology,
}

/// Non-finite floats become null.
pub fn number(x: f64) -> Value {
    serde_json::Number::from_f64(x).map_or(Value::Null, Value::Number)
}

impl Report {
    pub fn push(&mut self, name: &str, value: Value, unit: &str) {
        self.records.push(MetricRecord { name: name.to_owned(), value, unit: unit.to_owned() });
    }

    pub fn push_f64(&mut self, name: &str, value: f64, unit: &str) {
        self.push(name, number(value), unit);
    }

    pub fn push_u64(&mut self, name: &str, value: u64, unit: &str) {
        self.push(name, Value::from(value), unit);
    }

    pub fn get(&self, name: &str) -> Option<&Value> {
        self.records.iter().find(|r| r.name == name).map(|r| &r.value)
    }

    pub fn f64(&self, name: &str) -> Option<f64> {
        self.get(name).and_then(Value::as_f64)
    }

    pub fn topology_id(&self) -> Option<&str> {
        self.get("topology_id").and_then(Value::as_str)
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r).expect("records serialize"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self, ReportError> {
        let mut records = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let r = serde_json::from_str(line).map_err(|e| ReportError::BadLine { line: i + 1, message: e.to_string() })?;
            records.push(r);
        }
        Ok(Self { records })
    }

    pub fn to_table(&self) -> String {
        let w = self.records.iter().map(|r| r.name.len()).max().unwrap_or(0).max(6);
        let mut out = format!("{:<w$}  {:>16}  unit\n", "metric", "value");
        for r in &self.records {
            let _ = writeln!(out, "{:<w$}  {:>16}  {}", r.name, show(&r.value), r.unit);
        }
        out
    }
}

pub(crate) fn show(v: &Value) -> String {
    match v {
        Value::Number(n) => match n.as_f64() {
            Some(x) if n.is_f64() => {
                if x != 0.0 && (x.abs() >= 1e7 || x.abs() < 1e-3) {
                    format!("{x:.4e}")
                } else {
                    format!("{x:.4}")
                }
            }
            _ => n.to_string(),
        },
        Value::String(s) if s.chars().count() > 16 => format!("{}…", s.chars().take(12).collect::<String>()),
        Value::String(s) => s.clone(),
        Value::Null => "-".into(),
        other => other.to_string(),
    }
}

/// Change of one numeric metric from report `a` to report `b`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Delta {
    pub name: String,
    pub a: f64,
    pub b: f64,
    pub absolute: f64,
    /// `None` when `a` is zero and `b` is not.
    pub relative: Option<f64>,
    pub unit: String,
}

/// Metric-by-metric deltas over the numeric records both reports share.
pub fn compare(a: &Report, b: &Report) -> Result<Vec<Delta>, ReportError> {
    let (ta, tb) = match (a.topology_id(), b.topology_id()) {
        (Some(x), Some(y)) => (x, y),
        _ => return Err(ReportError::MissingTopology),
    };
    if ta != tb {
        return Err(ReportError::TopologyMismatch { a: ta.into(), b: tb.into() });
    }
    let mut out = Vec::new();
    for ra in &a.records {
        let (Some(x), Some(y)) = (ra.value.as_f64(), b.f64(&ra.name)) else { continue };
        let absolute = y - x;
        let relative = if x != 0.0 {
            Some(absolute / x.abs())
        } else if absolute == 0.0 {
            Some(0.0)
        } else {
            None
        };
        out.push(Delta { name: ra.name.clone(), a: x, b: y, absolute, relative, unit: ra.unit.clone() });
    }
    Ok(out)
}

pub fn deltas_to_table(deltas: &[Delta]) -> String {
    let w = deltas.iter().map(|d| d.name.len()).max().unwrap_or(0).max(6);
    let mut out = format!("{:<w$}  {:>14}  {:>14}  {:>14}  {:>9}  unit\n", "metric", "a", "b", "delta", "rel");
    for d in deltas {
        let rel = d.relative.map_or("-".to_owned(), |r| format!("{:+.1}%", r * 100.0));
        let _ = writeln!(
            out,
            "{:<w$}  {:>14}  {:>14}  {:>14}  {:>9}  {}",
            d.name,
            show(&number(d.a)),
            show(&number(d.b)),
            show(&number(d.absolute)),
            rel,
            d.unit
        );
    }
    out
}
