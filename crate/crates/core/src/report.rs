//! Report records and raw per-replica tables.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;

use crate::error::{Error, Result};
use crate::stats;

/// Seventeen significant digits: enough for an exact round trip.
pub fn fmt_real(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Clone, Debug, PartialEq)]
pub struct EstimatorReport {
    pub name: String,
    pub replicas: usize,
    pub mean: f64,
    pub std_error: f64,
    pub ci95: (f64, f64),
    pub aux: BTreeMap<String, f64>,
}

impl EstimatorReport {
    /// Mean, standard error and normal 95% interval of `samples`.
    pub fn from_samples(name: &str, samples: &[f64]) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::config(format!(
                "{name}: need at least two replicas, got {}",
                samples.len()
            )));
        }
        let mean = stats::mean(samples);
        let se = stats::std_error(samples);
        Ok(EstimatorReport {
            name: name.to_string(),
            replicas: samples.len(),
            mean,
            std_error: se,
            ci95: (mean - 1.96 * se, mean + 1.96 * se),
            aux: BTreeMap::new(),
        })
    }

    pub fn with(mut self, key: &str, value: f64) -> Self {
        self.aux.insert(key.to_string(), value);
        self
    }

    pub fn set(&mut self, key: &str, value: f64) {
        self.aux.insert(key.to_string(), value);
    }

    /// Auxiliary value, NaN when absent.
    pub fn get(&self, key: &str) -> f64 {
        self.aux.get(key).copied().unwrap_or(f64::NAN)
    }

    pub fn flag(&self, key: &str) -> bool {
        self.get(key) == 1.0
    }

    /// One-line `key=value` record.
    pub fn to_record(&self) -> String {
        let mut s = format!(
            "name={} replicas={} mean={} std_error={} ci95_lo={} ci95_hi={}",
            self.name,
            self.replicas,
            fmt_real(self.mean),
            fmt_real(self.std_error),
            fmt_real(self.ci95.0),
            fmt_real(self.ci95.1)
        );
        for (k, v) in &self.aux {
            write!(s, " aux.{k}={}", fmt_real(*v)).unwrap();
        }
        s
    }

    pub fn parse_record(line: &str) -> Result<Self> {
        let bad = |msg: String| Error::Parse { line: 1, msg };
        let mut fields = BTreeMap::new();
        for tok in line.split_whitespace() {
            let (k, v) = tok
                .split_once('=')
                .ok_or_else(|| bad(format!("token without '=': {tok}")))?;
            fields.insert(k.to_string(), v.to_string());
        }
        let real = |k: &str| -> Result<f64> {
            fields
                .get(k)
                .ok_or_else(|| bad(format!("missing {k}")))?
                .parse::<f64>()
                .map_err(|_| bad(format!("bad real for {k}")))
        };
        let mut aux = BTreeMap::new();
        for (k, v) in &fields {
            if let Some(name) = k.strip_prefix("aux.") {
                let v = v
                    .parse::<f64>()
                    .map_err(|_| bad(format!("bad real for {k}")))?;
                aux.insert(name.to_string(), v);
            }
        }
        Ok(EstimatorReport {
            name: fields
                .get("name")
                .cloned()
                .ok_or_else(|| bad("missing name".into()))?,
            replicas: fields
                .get("replicas")
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| bad("missing replicas".into()))?,
            mean: real("mean")?,
            std_error: real("std_error")?,
            ci95: (real("ci95_lo")?, real("ci95_hi")?),
            aux,
        })
    }
}

/// Per-replica raw values, one row per replica.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RawTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl RawTable {
    pub fn new(columns: &[&str]) -> Self {
        RawTable {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{}", self.columns.join(","))?;
        let mut line = String::new();
        for row in &self.rows {
            line.clear();
            for (j, v) in row.iter().enumerate() {
                if j > 0 {
                    line.push(',');
                }
                line.push_str(&fmt_real(*v));
            }
            line.push('\n');
            out.write_all(line.as_bytes())?;
        }
        Ok(())
    }
}

/// A report together with the raw values it was computed from.
#[derive(Clone, Debug, PartialEq)]
pub struct Estimate {
    pub report: EstimatorReport,
    pub raw: RawTable,
}
