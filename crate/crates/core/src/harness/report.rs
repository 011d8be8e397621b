use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::collection::Access;
use super::spec::Mode;
use super::HarnessError;
use crate::eval::{Metric, MetricReport, TTest};
use crate::neural::{write_checkpoint, AnyRanker, EpochRecord};
use crate::retrieval::{write_run, RunList};

/// One evaluated system.
#[derive(Debug, Clone)]
pub struct SystemResult {
    pub name: String,
    pub runs: Vec<RunList>,
    pub metrics: MetricReport,
}

/// A paired t-test of `system` against `baseline` on one metric. `test` is
/// `None` when the test is undefined (fewer than two queries).
#[derive(Debug, Clone)]
pub struct Significance {
    pub system: String,
    pub baseline: String,
    pub metric: Metric,
    pub test: Option<TTest>,
}

#[derive(Debug, Clone)]
pub struct Report {
    pub name: String,
    pub mode: Mode,
    pub model_name: String,
    pub seed: u64,
    pub config_hash: String,
    pub resolved_spec: String,
    /// BM25 first, then the baselines, then the model.
    pub systems: Vec<SystemResult>,
    pub significance: Vec<Significance>,
    pub train_log: Vec<EpochRecord>,
    pub best_epoch: Option<usize>,
    pub num_train_pairs: usize,
    pub skipped_pairs: usize,
    pub skipped_queries: Vec<String>,
    pub model: Option<AnyRanker>,
    /// SHA-256 of every input file, keyed `collection/part/file`.
    pub checksums: BTreeMap<String, String>,
    pub accesses: Vec<Access>,
}

const SIGNIFICANCE_LEVEL: f64 = 0.05;

impl Report {
    pub fn system(&self, name: &str) -> Option<&SystemResult> {
        self.systems.iter().find(|s| s.name == name)
    }

    pub fn mean(&self, system: &str, metric: Metric) -> Option<f64> {
        self.system(system)?.metrics.mean(metric)
    }

    fn test(&self, system: &str, metric: Metric) -> Option<&TTest> {
        self.significance
            .iter()
            .find(|s| s.system == system && s.metric == metric)
            .and_then(|s| s.test.as_ref())
    }

    pub fn to_markdown(&self) -> String {
        let mut s = String::new();
        let metrics = self.systems.first().map(|r| r.metrics.metrics.clone()).unwrap_or_default();
        let _ = writeln!(s, "# {}\n", self.name);
        let _ = writeln!(s, "Mode: {}. Model: {}.", self.mode.label(), self.model_name);
        if self.mode == Mode::Oracle {
            let _ = writeln!(s, "\nThe model was trained on the test collection; these numbers are an upper bound.");
        }
        if let Some(first) = self.systems.first() {
            let m = &first.metrics;
            let _ = writeln!(s, "\nEvaluated queries: {}", m.num_queries());
            if !m.no_relevant.is_empty() {
                let _ = writeln!(s, "Excluded (no relevant documents): {}", m.no_relevant.join(", "));
            }
            if !m.unjudged_queries.is_empty() {
                let _ = writeln!(s, "Not in qrels: {}", m.unjudged_queries.join(", "));
            }
        }

        let _ = write!(s, "\n| system |");
        for m in &metrics {
            let _ = write!(s, " {m} |");
        }
        let _ = write!(s, "\n|---|");
        for _ in &metrics {
            let _ = write!(s, "---:|");
        }
        s.push('\n');
        for sys in &self.systems {
            let _ = write!(s, "| {} |", sys.name);
            for &m in &metrics {
                let v = sys.metrics.mean(m).unwrap_or(0.0);
                let mark = match self.test(&sys.name, m) {
                    Some(t) if t.p < SIGNIFICANCE_LEVEL && t.mean_diff > 0.0 => " ▲",
                    Some(t) if t.p < SIGNIFICANCE_LEVEL && t.mean_diff < 0.0 => " ▼",
                    _ => "",
                };
                let _ = write!(s, " {v:.4}{mark} |");
            }
            s.push('\n');
        }
        if let Some(base) = self.systems.first() {
            let _ = writeln!(
                s,
                "\n▲/▼: paired two-sided t-test against {} at p < {SIGNIFICANCE_LEVEL}.",
                base.name
            );
        }

        if !self.train_log.is_empty() {
            let _ = writeln!(s, "\n## Training\n");
            let _ = writeln!(s, "Pairs: {}; unusable pair lookups: {}.", self.num_train_pairs, self.skipped_pairs);
            if !self.skipped_queries.is_empty() {
                let _ = writeln!(s, "Queries without pairs: {}.", self.skipped_queries.join(", "));
            }
            if let Some(b) = self.best_epoch {
                let _ = writeln!(s, "Best validation epoch: {b} of {}.", self.train_log.len());
            }
        }

        let _ = writeln!(s, "\n## Provenance\n");
        let _ = writeln!(s, "- config hash: `{}`", self.config_hash);
        let _ = writeln!(s, "- seed: {}", self.seed);
        for (k, v) in &self.checksums {
            let _ = writeln!(s, "- `{k}`: `{v}`");
        }
        s
    }

    /// `system \t qid \t metric \t value`, all systems, with `all` rows.
    pub fn metrics_tsv(&self) -> String {
        let mut s = String::new();
        for sys in &self.systems {
            let mut buf = Vec::new();
            sys.metrics.write_tsv(&mut buf).expect("writing to memory");
            for line in String::from_utf8(buf).expect("utf-8").lines() {
                let _ = writeln!(s, "{}\t{line}", sys.name);
            }
        }
        s
    }

    pub fn significance_tsv(&self) -> String {
        let mut s = String::from("system\tbaseline\tmetric\tmean_diff\tt\tp\tn\n");
        for sig in &self.significance {
            match &sig.test {
                Some(t) => {
                    let _ = writeln!(
                        s,
                        "{}\t{}\t{}\t{:.6}\t{:.6}\t{:.6}\t{}",
                        sig.system, sig.baseline, sig.metric, t.mean_diff, t.t, t.p, t.n
                    );
                }
                None => {
                    let _ = writeln!(s, "{}\t{}\t{}\t-\t-\t-\t-", sig.system, sig.baseline, sig.metric);
                }
            }
        }
        s
    }

    /// Writes `report.md`, `metrics.tsv`, `significance.tsv`,
    /// `resolved_spec.toml`, `runs/<system>.run` and, after training,
    /// `train_log.tsv` and `model.ckpt`.
    pub fn write_to(&self, dir: &Path) -> Result<(), HarnessError> {
        let put = |name: &str, bytes: &[u8]| -> Result<(), HarnessError> {
            let p = dir.join(name);
            fs::write(&p, bytes).map_err(|e| HarnessError::io(&p, e))
        };
        let runs_dir = dir.join("runs");
        fs::create_dir_all(&runs_dir).map_err(|e| HarnessError::io(&runs_dir, e))?;
        put("report.md", self.to_markdown().as_bytes())?;
        put("metrics.tsv", self.metrics_tsv().as_bytes())?;
        put("significance.tsv", self.significance_tsv().as_bytes())?;
        put("resolved_spec.toml", self.resolved_spec.as_bytes())?;
        for sys in &self.systems {
            let mut buf = Vec::new();
            write_run(&sys.runs, &mut buf).map_err(|e| HarnessError::io(&runs_dir, e))?;
            put(&format!("runs/{}.run", sys.name), &buf)?;
        }
        if !self.train_log.is_empty() {
            let mut log = String::from("epoch\tloss\tval_ndcg@20\n");
            for r in &self.train_log {
                let _ = writeln!(log, "{r}");
            }
            put("train_log.tsv", log.as_bytes())?;
        }
        if let Some(m) = &self.model {
            let mut buf = Vec::new();
            write_checkpoint(m, &mut buf)?;
            put("model.ckpt", &buf)?;
        }
        Ok(())
    }
}
