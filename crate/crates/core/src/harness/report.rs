use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::Command;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{ExperimentSpec, HarnessError};

/// One recorded value: metric `value` for `seed` after `round` rounds and `queries` queries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub seed: u64,
    pub round: usize,
    pub queries: usize,
    pub value: f64,
}

/// Mean and standard error over seeds for one round.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub round: usize,
    pub queries: f64,
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExperimentReport {
    /// Rows per metric, ordered by seed (spec order) then round.
    pub metrics: BTreeMap<String, Vec<MetricRow>>,
}

impl ExperimentReport {
    pub fn push(&mut self, metric: &str, row: MetricRow) {
        self.metrics.entry(metric.to_owned()).or_default().push(row);
    }

    /// Concatenates per-seed reports in the given order.
    pub fn merge(parts: impl IntoIterator<Item = ExperimentReport>) -> Self {
        let mut out = Self::default();
        for part in parts {
            for (name, rows) in part.metrics {
                out.metrics.entry(name).or_default().extend(rows);
            }
        }
        out
    }

    pub fn rows(&self, metric: &str) -> &[MetricRow] {
        self.metrics.get(metric).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn metric_names(&self) -> impl Iterator<Item = &str> {
        self.metrics.keys().map(String::as_str)
    }

    /// Per-round mean and standard error of `metric` across seeds.
    pub fn aggregate(&self, metric: &str) -> Vec<Aggregate> {
        let mut by_round: BTreeMap<usize, Vec<&MetricRow>> = BTreeMap::new();
        for row in self.rows(metric) {
            by_round.entry(row.round).or_default().push(row);
        }
        by_round
            .into_iter()
            .map(|(round, rows)| {
                let n = rows.len();
                let mean = rows.iter().map(|r| r.value).sum::<f64>() / n as f64;
                let queries = rows.iter().map(|r| r.queries as f64).sum::<f64>() / n as f64;
                let stderr = if n > 1 {
                    let var = rows.iter().map(|r| (r.value - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
                    (var / n as f64).sqrt()
                } else {
                    0.0
                };
                Aggregate { round, queries, mean, stderr, n }
            })
            .collect()
    }

    /// Values of `metric` at `round`, keyed by seed.
    pub fn values_at(&self, metric: &str, round: usize) -> BTreeMap<u64, f64> {
        self.rows(metric).iter().filter(|r| r.round == round).map(|r| (r.seed, r.value)).collect()
    }

    /// Largest round recorded for `metric`.
    pub fn last_round(&self, metric: &str) -> Option<usize> {
        self.rows(metric).iter().map(|r| r.round).max()
    }

    /// CSV text with header `seed,round,queries,value`.
    pub fn to_csv(&self, metric: &str) -> String {
        let mut out = String::from("seed,round,queries,value\n");
        for r in self.rows(metric) {
            out.push_str(&format!("{},{},{},{}\n", r.seed, r.round, r.queries, r.value));
        }
        out
    }

    /// The manifest document: spec echo, seeds, code version and aggregates.
    pub fn manifest(&self, spec: &ExperimentSpec) -> serde_json::Value {
        let aggregates: BTreeMap<&str, Vec<Aggregate>> = self.metric_names().map(|m| (m, self.aggregate(m))).collect();
        json!({
            "experiment": spec.experiment,
            "strategy": spec.strategy,
            "seeds": spec.seeds,
            "code_version": code_version(),
            "spec": spec,
            "files": self.metric_names().map(|m| format!("metrics_{m}.csv")).collect::<Vec<_>>(),
            "aggregates": aggregates,
        })
    }

    /// Writes `metrics_<name>.csv` for every metric plus `manifest.json` into `dir`.
    pub fn write(&self, spec: &ExperimentSpec, dir: &Path) -> Result<(), HarnessError> {
        let out_err = |e: std::io::Error| HarnessError::Output(format!("{}: {e}", dir.display()));
        fs::create_dir_all(dir).map_err(out_err)?;
        for name in self.metric_names() {
            fs::write(dir.join(format!("metrics_{name}.csv")), self.to_csv(name)).map_err(out_err)?;
        }
        let manifest = serde_json::to_string_pretty(&self.manifest(spec)).map_err(|e| HarnessError::Output(e.to_string()))?;
        fs::write(dir.join("manifest.json"), manifest + "\n").map_err(out_err)?;
        Ok(())
    }
}

/// Package version plus `git describe` of the source tree when available.
pub fn code_version() -> String {
    let version = env!("CARGO_PKG_VERSION");
    let described = Command::new("git")
        .args(["-C", env!("CARGO_MANIFEST_DIR"), "describe", "--always", "--dirty", "--tags"])
        .output()
        .ok()
        .filter(|o| o.status.success())
        .and_then(|o| String::from_utf8(o.stdout).ok())
        .map(|s| s.trim().to_owned())
        .filter(|s| !s.is_empty());
    match described {
        Some(d) => format!("{version} ({d})"),
        None => format!("{version} (unknown)"),
    }
}
