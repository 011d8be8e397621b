//! TREC-style effectiveness metrics and the paired t-test.
//!
//! Relevance is `grade > 0`; documents missing from the qrels count as
//! non-relevant. Means are taken over queries that appear in both the run
//! and the qrels and have at least one relevant document; the others are
//! listed in the report instead.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use thiserror::Error;

use crate::corpus::Qrels;
use crate::retrieval::RunList;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("unknown metric '{0}'")]
    UnknownMetric(String),
    #[error("metric cutoff must be at least 1")]
    ZeroCutoff,
    #[error("paired test needs at least 2 queries, got {0}")]
    TooFewQueries(usize),
    #[error("paired samples differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("reports cover different queries")]
    QuerySetMismatch,
    #[error("metric {0} missing from report")]
    MissingMetric(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Metric {
    Map,
    PrecisionAt(usize),
    NdcgAt(usize),
    JudgedAt(usize),
}

impl Metric {
    pub const STANDARD: [Metric; 4] = [
        Metric::Map,
        Metric::PrecisionAt(20),
        Metric::NdcgAt(20),
        Metric::JudgedAt(20),
    ];
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Metric::Map => write!(f, "map"),
            Metric::PrecisionAt(k) => write!(f, "p@{k}"),
            Metric::NdcgAt(k) => write!(f, "ndcg@{k}"),
            Metric::JudgedAt(k) => write!(f, "judged@{k}"),
        }
    }
}

impl FromStr for Metric {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let lower = s.trim().to_ascii_lowercase();
        if lower == "map" {
            return Ok(Metric::Map);
        }
        let unknown = || EvalError::UnknownMetric(s.to_string());
        let (name, k) = lower.split_once('@').ok_or_else(unknown)?;
        let k: usize = k.parse().map_err(|_| unknown())?;
        if k == 0 {
            return Err(EvalError::ZeroCutoff);
        }
        match name {
            "p" | "precision" => Ok(Metric::PrecisionAt(k)),
            "ndcg" => Ok(Metric::NdcgAt(k)),
            "judged" => Ok(Metric::JudgedAt(k)),
            _ => Err(unknown()),
        }
    }
}

/// Parses a comma-separated metric list such as `map,ndcg@20`.
pub fn parse_metrics(list: &str) -> Result<Vec<Metric>, EvalError> {
    list.split(',').filter(|s| !s.trim().is_empty()).map(str::parse).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Gain {
    /// `rel / log2(i + 1)`, as in trec_eval.
    #[default]
    Linear,
    /// `(2^rel − 1) / log2(i + 1)`.
    Exponential,
}

fn grade(rels: &BTreeMap<String, u32>, docno: &str) -> u32 {
    rels.get(docno).copied().unwrap_or(0)
}

pub fn average_precision<'a>(ranking: impl IntoIterator<Item = &'a str>, rels: &BTreeMap<String, u32>) -> f64 {
    let total = rels.values().filter(|&&g| g > 0).count();
    if total == 0 {
        return 0.0;
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (i, d) in ranking.into_iter().enumerate() {
        if grade(rels, d) > 0 {
            hits += 1;
            sum += hits as f64 / (i + 1) as f64;
        }
    }
    sum / total as f64
}

/// Relevant documents among the first `k`, divided by `k` even when the
/// ranking is shorter.
pub fn precision_at_k<'a>(ranking: impl IntoIterator<Item = &'a str>, rels: &BTreeMap<String, u32>, k: usize) -> f64 {
    assert!(k >= 1);
    let hits = ranking.into_iter().take(k).filter(|d| grade(rels, d) > 0).count();
    hits as f64 / k as f64
}

pub fn ndcg_at_k<'a>(ranking: impl IntoIterator<Item = &'a str>, rels: &BTreeMap<String, u32>, k: usize) -> f64 {
    ndcg_at_k_with_gain(ranking, rels, k, Gain::Linear)
}

pub fn ndcg_at_k_with_gain<'a>(
    ranking: impl IntoIterator<Item = &'a str>,
    rels: &BTreeMap<String, u32>,
    k: usize,
    gain: Gain,
) -> f64 {
    assert!(k >= 1);
    let g = |r: u32| match gain {
        Gain::Linear => r as f64,
        Gain::Exponential => 2f64.powi(r as i32) - 1.0,
    };
    let discount = |i: usize| ((i + 2) as f64).log2();
    let dcg: f64 = ranking
        .into_iter()
        .take(k)
        .enumerate()
        .map(|(i, d)| g(grade(rels, d)) / discount(i))
        .sum();
    let mut ideal: Vec<u32> = rels.values().copied().filter(|&r| r > 0).collect();
    ideal.sort_unstable_by(|a, b| b.cmp(a));
    let idcg: f64 = ideal.iter().take(k).enumerate().map(|(i, &r)| g(r) / discount(i)).sum();
    if idcg == 0.0 {
        0.0
    } else {
        dcg / idcg
    }
}

/// Fraction of the first `k` positions holding a judged document (any
/// grade, including 0).
pub fn judged_at_k<'a>(ranking: impl IntoIterator<Item = &'a str>, rels: &BTreeMap<String, u32>, k: usize) -> f64 {
    judged_count(ranking, rels, k) as f64 / k as f64
}

fn judged_count<'a>(ranking: impl IntoIterator<Item = &'a str>, rels: &BTreeMap<String, u32>, k: usize) -> usize {
    assert!(k >= 1);
    ranking.into_iter().take(k).filter(|d| rels.contains_key(*d)).count()
}

pub fn metric_value(metric: Metric, run: &RunList, rels: &BTreeMap<String, u32>) -> f64 {
    match metric {
        Metric::Map => average_precision(run.docnos(), rels),
        Metric::PrecisionAt(k) => precision_at_k(run.docnos(), rels, k),
        Metric::NdcgAt(k) => ndcg_at_k(run.docnos(), rels, k),
        Metric::JudgedAt(k) => judged_at_k(run.docnos(), rels, k),
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MetricReport {
    pub metrics: Vec<Metric>,
    /// Evaluated queries only.
    pub per_query: BTreeMap<String, BTreeMap<Metric, f64>>,
    pub means: BTreeMap<Metric, f64>,
    /// `(judged documents in the top k, k)` per evaluated query, for the
    /// largest judged@k cutoff requested (20 when none is).
    pub judged_counts: BTreeMap<String, (usize, usize)>,
    /// In the qrels but with no relevant document.
    pub no_relevant: Vec<String>,
    /// In the run but absent from the qrels.
    pub unjudged_queries: Vec<String>,
}

impl MetricReport {
    pub fn num_queries(&self) -> usize {
        self.per_query.len()
    }

    pub fn mean(&self, metric: Metric) -> Option<f64> {
        self.means.get(&metric).copied()
    }

    /// Values of one metric in qid order.
    pub fn column(&self, metric: Metric) -> Vec<(&str, f64)> {
        self.per_query
            .iter()
            .filter_map(|(q, m)| m.get(&metric).map(|&v| (q.as_str(), v)))
            .collect()
    }

    /// `qid \t metric \t value` lines, then `all` rows with the means and
    /// the evaluated query count.
    pub fn write_tsv<W: Write>(&self, mut out: W) -> io::Result<()> {
        for (qid, values) in &self.per_query {
            for m in &self.metrics {
                writeln!(out, "{qid}\t{m}\t{:.4}", values[m])?;
            }
        }
        self.write_summary(&mut out)
    }

    pub fn write_summary<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "all\tnum_q\t{}", self.num_queries())?;
        for m in &self.metrics {
            writeln!(out, "all\t{m}\t{:.4}", self.means[m])?;
        }
        Ok(())
    }
}

/// Scores every run against the qrels.
pub fn evaluate(runs: &[RunList], qrels: &Qrels, metrics: &[Metric]) -> MetricReport {
    let judged_k = metrics
        .iter()
        .filter_map(|m| match m {
            Metric::JudgedAt(k) => Some(*k),
            _ => None,
        })
        .max()
        .unwrap_or(20);
    let mut report = MetricReport {
        metrics: metrics.to_vec(),
        ..Default::default()
    };
    let mut seen = HashSet::new();
    for run in runs {
        if !seen.insert(run.qid.as_str()) {
            log::warn!("query {} appears in more than one run list; keeping the first", run.qid);
            continue;
        }
        let Some(rels) = qrels.get(&run.qid) else {
            report.unjudged_queries.push(run.qid.clone());
            continue;
        };
        if !rels.values().any(|&g| g > 0) {
            report.no_relevant.push(run.qid.clone());
            continue;
        }
        let values = metrics.iter().map(|&m| (m, metric_value(m, run, rels))).collect();
        report.per_query.insert(run.qid.clone(), values);
        report
            .judged_counts
            .insert(run.qid.clone(), (judged_count(run.docnos(), rels, judged_k), judged_k));
    }
    report.no_relevant.sort();
    report.unjudged_queries.sort();
    let n = report.per_query.len();
    for &m in metrics {
        let sum: f64 = report.per_query.values().map(|v| v[&m]).sum();
        report.means.insert(m, if n == 0 { 0.0 } else { sum / n as f64 });
    }
    report
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TTest {
    pub t: f64,
    pub p: f64,
    pub n: usize,
    pub mean_diff: f64,
}

/// Two-sided paired t-test on `a[i] − b[i]`.
pub fn paired_t_test(a: &[f64], b: &[f64]) -> Result<TTest, EvalError> {
    if a.len() != b.len() {
        return Err(EvalError::LengthMismatch(a.len(), b.len()));
    }
    let n = a.len();
    if n < 2 {
        return Err(EvalError::TooFewQueries(n));
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = diffs.iter().sum::<f64>() / n as f64;
    let var = diffs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (n - 1) as f64;
    if diffs.iter().all(|&d| d == 0.0) {
        return Ok(TTest {
            t: 0.0,
            p: 1.0,
            n,
            mean_diff: 0.0,
        });
    }
    if var == 0.0 {
        return Ok(TTest {
            t: mean.signum() * f64::INFINITY,
            p: 0.0,
            n,
            mean_diff: mean,
        });
    }
    let t = mean / (var / n as f64).sqrt();
    Ok(TTest {
        t,
        p: student_t_two_sided(t, (n - 1) as f64),
        n,
        mean_diff: mean,
    })
}

/// Paired test between two reports on one metric, over their shared query
/// set (which must be identical).
pub fn compare_reports(a: &MetricReport, b: &MetricReport, metric: Metric) -> Result<TTest, EvalError> {
    if !a.per_query.keys().eq(b.per_query.keys()) {
        return Err(EvalError::QuerySetMismatch);
    }
    let col = |r: &MetricReport| -> Result<Vec<f64>, EvalError> {
        r.per_query
            .values()
            .map(|v| v.get(&metric).copied().ok_or_else(|| EvalError::MissingMetric(metric.to_string())))
            .collect()
    };
    paired_t_test(&col(a)?, &col(b)?)
}

/// `P(|T| ≥ |t|)` for Student's t with `df` degrees of freedom.
pub fn student_t_two_sided(t: f64, df: f64) -> f64 {
    if !t.is_finite() {
        return 0.0;
    }
    let x = df / (df + t * t);
    regularized_incomplete_beta(df / 2.0, 0.5, x).clamp(0.0, 1.0)
}

/// Lanczos approximation (g = 7, nine coefficients).
pub fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const C: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = C[0];
    let t = x + G + 0.5;
    for (i, &c) in C.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// `I_x(a, b)` by the modified Lentz continued fraction, using the
/// symmetry `I_x(a, b) = 1 − I_{1−x}(b, a)` where it converges faster.
pub fn regularized_incomplete_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    if x < (a + 1.0) / (a + b + 2.0) {
        ln_front.exp() * beta_fraction(a, b, x) / a
    } else {
        1.0 - ln_front.exp() * beta_fraction(b, a, 1.0 - x) / b
    }
}

fn beta_fraction(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;
    let (qab, qap, qam) = (a + b, a + 1.0, a - 1.0);
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=10_000 {
        let m = m as f64;
        let m2 = 2.0 * m;
        for aa in [
            m * (b - m) * x / ((qam + m2) * (a + m2)),
            -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2)),
        ] {
            d = 1.0 + aa * d;
            if d.abs() < TINY {
                d = TINY;
            }
            c = 1.0 + aa / c;
            if c.abs() < TINY {
                c = TINY;
            }
            d = 1.0 / d;
            h *= d * c;
        }
        if (d * c - 1.0).abs() < EPS {
            break;
        }
    }
    h
}
