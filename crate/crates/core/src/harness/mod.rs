//! Monte Carlo experiment drivers, result tables and CSV output.

mod experiments;
mod scenario;
mod stats;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::ops::Range;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

pub use experiments::{
    empirical_power, run_coded_ber, run_nmse, run_ser, run_ser_vs_pmax, validate_moments, validate_moments_for,
    ExperimentOptions, MomentCheck, MomentReport, PowerReport, ZeroCheck,
};
pub use scenario::{Observation, OperatingPoint, Scenario, TrialDraw};
pub use stats::{wilson_interval, ErrorCounter};

use crate::error::{Error, Result};

/// One CSV row: a metric at one sweep value for one curve.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub value: f64,
    pub metric: f64,
    pub stderr: f64,
    pub trials: u64,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentResult {
    pub experiment: String,
    pub sweep_variable: String,
    pub metric_name: String,
    pub seed: u64,
    pub fingerprint: String,
    pub rows: Vec<ResultRow>,
    /// Diagnostic event counts (clipped eigenvalues, singular systems, ...).
    pub counters: BTreeMap<String, u64>,
}

/// Fixed CSV header.
pub const CSV_HEADER: &str = "value,metric,stderr,trials,label";

impl ExperimentResult {
    pub fn to_csv(&self) -> String {
        let mut s = String::from(CSV_HEADER);
        s.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:.6e},{:.6e},{:.6e},{},{}",
                r.value, r.metric, r.stderr, r.trials, r.label
            );
        }
        s
    }

    /// Writes the CSV and a `<path>.meta.json` sidecar with seed and fingerprint.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let io = |source| Error::Io {
            path: path.to_path_buf(),
            source,
        };
        std::fs::write(path, self.to_csv()).map_err(io)?;
        let meta = serde_json::json!({
            "experiment": self.experiment,
            "sweep_variable": self.sweep_variable,
            "metric": self.metric_name,
            "seed": self.seed,
            "fingerprint": self.fingerprint,
            "counters": self.counters,
        });
        let mut meta_path = path.as_os_str().to_owned();
        meta_path.push(".meta.json");
        let text = serde_json::to_string_pretty(&meta).expect("meta serializes");
        std::fs::write(&meta_path, text + "\n").map_err(|source| Error::Io {
            path: meta_path.into(),
            source,
        })
    }

    /// Rows of one curve in sweep order.
    pub fn curve(&self, label: &str) -> Vec<&ResultRow> {
        let mut rows: Vec<&ResultRow> = self.rows.iter().filter(|r| r.label == label).collect();
        rows.sort_by(|a, b| a.value.total_cmp(&b.value));
        rows
    }

    pub fn labels(&self) -> Vec<String> {
        let mut seen = Vec::new();
        for r in &self.rows {
            if !seen.contains(&r.label) {
                seen.push(r.label.clone());
            }
        }
        seen
    }

    pub fn point(&self, label: &str, value: f64) -> Option<&ResultRow> {
        self.rows
            .iter()
            .find(|r| r.label == label && (r.value - value).abs() < 1e-9)
    }
}

/// Evaluates `f` on every index of `range` in parallel; results come back in index order.
pub(crate) fn parallel_trials<T: Send>(range: Range<u64>, f: impl Fn(u64) -> T + Sync + Send) -> Vec<T> {
    range.into_par_iter().map(f).collect()
}

/// Formats a sweep parameter for labels: integers without a fraction.
pub(crate) fn fmt_param(x: f64) -> String {
    if x.fract() == 0.0 && x.abs() < 1e15 {
        format!("{}", x as i64)
    } else {
        format!("{x}")
    }
}
