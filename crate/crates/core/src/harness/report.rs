use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cloud::SetKind;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub loss: f64,
    pub task_loss: f64,
    pub subset_loss: f64,
    /// Temperature at the end of the epoch.
    pub tau: f64,
    pub lr: f64,
    /// Nonzero fraction of `S` at the sparsification threshold, on probe clouds.
    pub sparsity: f64,
}

/// One evaluated number: `metric` of `method` on the `set` of size `m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricCell {
    pub method: String,
    pub m: usize,
    pub set: SetKind,
    pub metric: String,
    pub value: f64,
}

/// Diagnostics of a learned sampling matrix at size `m`, averaged over clouds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerStat {
    pub m: usize,
    pub nonzero_fraction: f64,
    pub nonzero_per_column: f64,
    pub orthogonality: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub stage: String,
    pub m: usize,
    pub seconds: f64,
}

/// Losses, metrics, diagnostics and timings of one run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub task: String,
    pub seed: u64,
    /// Named scalars such as the head's full-cloud accuracy.
    #[serde(default)]
    pub reference: BTreeMap<String, f64>,
    #[serde(default)]
    pub epochs: Vec<EpochLog>,
    #[serde(default)]
    pub metrics: Vec<MetricCell>,
    #[serde(default)]
    pub sampler_stats: Vec<SamplerStat>,
    #[serde(default)]
    pub timings: Vec<Timing>,
}

impl RunReport {
    pub fn new(task: impl Into<String>, seed: u64) -> Self {
        Self {
            task: task.into(),
            seed,
            ..Self::default()
        }
    }

    pub fn metric(&self, method: &str, m: usize, set: SetKind, metric: &str) -> Option<f64> {
        self.metrics
            .iter()
            .find(|c| c.method == method && c.m == m && c.set == set && c.metric == metric)
            .map(|c| c.value)
    }

    pub fn push_metric(&mut self, method: &str, m: usize, set: SetKind, metric: &str, value: f64) {
        self.metrics.push(MetricCell {
            method: method.to_string(),
            m,
            set,
            metric: metric.to_string(),
            value,
        });
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("report serializes")
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("malformed report: {e}")))
    }

    pub fn epochs_csv(&self) -> String {
        let mut out = String::from("epoch,loss,task_loss,subset_loss,tau,lr,sparsity\n");
        for e in &self.epochs {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                e.epoch, e.loss, e.task_loss, e.subset_loss, e.tau, e.lr, e.sparsity
            )
            .unwrap();
        }
        out
    }

    pub fn metrics_csv(&self) -> String {
        let mut out = String::from("method,m,set,metric,value\n");
        for c in &self.metrics {
            writeln!(out, "{},{},{},{},{}", c.method, c.m, c.set.short(), c.metric, c.value).unwrap();
        }
        out
    }

    pub fn timings_csv(&self) -> String {
        let mut out = String::from("stage,m,seconds\n");
        for t in &self.timings {
            writeln!(out, "{},{},{}", t.stage, t.m, t.seconds).unwrap();
        }
        out
    }

    /// Writes `report.toml` plus `epochs.csv`, `metrics.csv` and `timings.csv`.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (name, body) in [
            ("report.toml", self.to_toml_string()),
            ("epochs.csv", self.epochs_csv()),
            ("metrics.csv", self.metrics_csv()),
            ("timings.csv", self.timings_csv()),
        ] {
            let path = dir.join(name);
            std::fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> RunReport {
        let mut r = RunReport::new("classification", 7);
        r.reference.insert("head_accuracy".into(), 0.96875);
        r.epochs.push(EpochLog {
            epoch: 0,
            loss: 1.0 / 3.0,
            task_loss: 0.1,
            subset_loss: 2.5e-7,
            tau: 0.9,
            lr: 5e-4,
            sparsity: 0.125,
        });
        r.push_metric("learned", 16, SetKind::Generated, "accuracy", 0.8125);
        r.push_metric("learned", 16, SetKind::Matched, "accuracy", std::f64::consts::PI);
        r.sampler_stats.push(SamplerStat {
            m: 16,
            nonzero_fraction: 0.01,
            nonzero_per_column: 2.56,
            orthogonality: 0.3,
        });
        r.timings.push(Timing {
            stage: "features".into(),
            m: 16,
            seconds: 1.2e-4,
        });
        r
    }

    #[test]
    fn toml_round_trip_is_exact() {
        let r = sample();
        assert_eq!(RunReport::from_toml_str(&r.to_toml_string()).unwrap(), r);
    }

    #[test]
    fn lookup_and_csv() {
        let r = sample();
        assert_eq!(r.metric("learned", 16, SetKind::Generated, "accuracy"), Some(0.8125));
        assert_eq!(r.metric("random", 16, SetKind::Generated, "accuracy"), None);
        let csv = r.metrics_csv();
        assert!(csv.starts_with("method,m,set,metric,value\nlearned,16,G,accuracy,0.8125\n"));
        assert_eq!(r.epochs_csv().lines().count(), 2);
    }

    #[test]
    fn save_and_load() {
        let dir = tempfile::tempdir().unwrap();
        let r = sample();
        r.save(dir.path()).unwrap();
        assert_eq!(RunReport::load(dir.path().join("report.toml")).unwrap(), r);
        assert!(dir.path().join("timings.csv").exists());
    }
}
