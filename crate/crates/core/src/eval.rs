//! Evaluation harness: per-case metrics, CSV output and the threshold sweep.

use std::collections::BTreeSet;
use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{bigram_diff, diff_output_lines, keyword_search, FlaggedLines};
use crate::corpus::RegressionCase;
use crate::error::{Error, Result};
use crate::lcs::{lcs_ids, LineIds};
use crate::script::{build_script, cidiff_within, lcs_diff_within, Algorithm};
use crate::seeds::match_with_lcs;
use crate::similarity::SimilarityParams;

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(600);
/// First runs at least this long are not repeated.
pub const REPEAT_LIMIT: Duration = Duration::from_secs(60);
pub const TIMEOUT_RUNTIME: f64 = -1.0;

pub const CSV_HEADER: [&str; 10] = [
    "case_id",
    "algorithm",
    "script_size",
    "added_count",
    "runtime_ms",
    "timed_out",
    "p_size",
    "p_added",
    "precision",
    "recall",
];

/// 100 (m_cidiff - m_lcs) / (m_lcs + 1).
pub fn percentage_difference(m_cidiff: usize, m_lcs: usize) -> f64 {
    100.0 * (m_cidiff as f64 - m_lcs as f64) / (m_lcs as f64 + 1.0)
}

/// Precision is 1 for an empty output; recall is `None` when nothing is annotated.
pub fn precision_recall(output: &FlaggedLines, annotated: &BTreeSet<usize>) -> (f64, Option<f64>) {
    let hits = output.mod_indices.intersection(annotated).count() as f64;
    let precision = if output.is_empty() {
        1.0
    } else {
        hits / output.len() as f64
    };
    let recall = (!annotated.is_empty()).then(|| hits / annotated.len() as f64);
    (precision, recall)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlgorithmKind {
    Cidiff,
    Lcs,
    Bigram,
    Keyword,
}

impl AlgorithmKind {
    pub const ALL: [AlgorithmKind; 4] = [
        AlgorithmKind::Cidiff,
        AlgorithmKind::Lcs,
        AlgorithmKind::Bigram,
        AlgorithmKind::Keyword,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AlgorithmKind::Cidiff => "cidiff",
            AlgorithmKind::Lcs => "lcs",
            AlgorithmKind::Bigram => "bigram",
            AlgorithmKind::Keyword => "keyword",
        }
    }
}

impl fmt::Display for AlgorithmKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AlgorithmKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        AlgorithmKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown algorithm {s:?}"))
    }
}

/// What one algorithm produced on one case. Flag-only baselines have no
/// script; their `added_count` is the number of flagged lines.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlgorithmOutput {
    pub script_size: Option<usize>,
    pub added_count: usize,
    pub flagged: FlaggedLines,
}

/// Something the harness can time on a case.
pub trait CaseAlgorithm: Sync {
    fn name(&self) -> &str;

    /// Should return `Error::Timeout` once `deadline` passes; the harness
    /// also checks elapsed time itself.
    fn run(&self, case: &RegressionCase, deadline: Instant) -> Result<AlgorithmOutput>;
}

#[derive(Debug, Clone)]
pub struct Builtin {
    pub kind: AlgorithmKind,
    pub params: SimilarityParams,
    pub keywords: Vec<String>,
}

impl Builtin {
    pub fn new(kind: AlgorithmKind, params: SimilarityParams, keywords: Vec<String>) -> Self {
        Builtin {
            kind,
            params,
            keywords,
        }
    }
}

impl CaseAlgorithm for Builtin {
    fn name(&self) -> &str {
        self.kind.as_str()
    }

    fn run(&self, case: &RegressionCase, deadline: Instant) -> Result<AlgorithmOutput> {
        let (p, f) = (&case.passing, &case.failing);
        let script = match self.kind {
            AlgorithmKind::Cidiff => cidiff_within(p, f, &self.params, Some(deadline))?,
            AlgorithmKind::Lcs => lcs_diff_within(p, f, &self.params, Some(deadline))?,
            AlgorithmKind::Bigram | AlgorithmKind::Keyword => {
                let flagged = if self.kind == AlgorithmKind::Bigram {
                    bigram_diff(p, f)
                } else {
                    keyword_search(f, &self.keywords)
                };
                return Ok(AlgorithmOutput {
                    script_size: None,
                    added_count: flagged.len(),
                    flagged,
                });
            }
        };
        Ok(AlgorithmOutput {
            script_size: Some(script.size()),
            added_count: script.added_count(),
            flagged: diff_output_lines(&script),
        })
    }
}

/// One CSV row.
#[derive(Debug, Clone, PartialEq)]
pub struct AlgorithmMetrics {
    pub algorithm: String,
    pub script_size: Option<usize>,
    pub added_count: Option<usize>,
    /// Milliseconds, or [`TIMEOUT_RUNTIME`] when timed out.
    pub runtime_ms: f64,
    pub timed_out: bool,
    /// Set on the `cidiff` row when both `cidiff` and `lcs` finished.
    pub p_size: Option<f64>,
    pub p_added: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaseMetrics {
    pub id: String,
    pub rows: Vec<AlgorithmMetrics>,
}

impl CaseMetrics {
    pub fn row(&self, algorithm: &str) -> Option<&AlgorithmMetrics> {
        self.rows.iter().find(|r| r.algorithm == algorithm)
    }
}

enum Attempt {
    Done(AlgorithmOutput, Duration),
    TimedOut,
    Failed(Error),
}

fn timed_run(alg: &dyn CaseAlgorithm, case: &RegressionCase, timeout: Duration) -> Attempt {
    let start = Instant::now();
    let result = alg.run(case, start + timeout);
    let elapsed = start.elapsed();
    match result {
        Err(Error::Timeout) => Attempt::TimedOut,
        _ if elapsed > timeout => Attempt::TimedOut,
        Ok(out) => Attempt::Done(out, elapsed),
        Err(e) => Attempt::Failed(e),
    }
}

fn measure(alg: &dyn CaseAlgorithm, case: &RegressionCase, timeout: Duration) -> AlgorithmMetrics {
    let mut row = AlgorithmMetrics {
        algorithm: alg.name().to_string(),
        script_size: None,
        added_count: None,
        runtime_ms: TIMEOUT_RUNTIME,
        timed_out: false,
        p_size: None,
        p_added: None,
        precision: None,
        recall: None,
        error: None,
    };
    let (output, first) = match timed_run(alg, case, timeout) {
        Attempt::Done(out, t) => (out, t),
        Attempt::TimedOut => {
            row.timed_out = true;
            return row;
        }
        Attempt::Failed(e) => {
            row.error = Some(e.to_string());
            return row;
        }
    };
    let mut times = vec![first];
    if first < REPEAT_LIMIT {
        for _ in 0..2 {
            match timed_run(alg, case, timeout) {
                Attempt::Done(_, t) => times.push(t),
                _ => {
                    row.timed_out = true;
                    return row;
                }
            }
        }
    }
    times.sort();
    row.runtime_ms = times[times.len() / 2].as_secs_f64() * 1000.0;
    row.script_size = output.script_size;
    row.added_count = Some(output.added_count);
    if let Some(ann) = &case.annotations {
        let (p, r) = precision_recall(&output.flagged, ann);
        row.precision = Some(p);
        row.recall = r;
    }
    row
}

/// Runs every algorithm on the case. Runtime is the median of three runs
/// unless the first one takes at least [`REPEAT_LIMIT`].
pub fn run_case(case: &RegressionCase, algorithms: &[&dyn CaseAlgorithm], timeout: Duration) -> CaseMetrics {
    let mut rows: Vec<AlgorithmMetrics> = algorithms.iter().map(|a| measure(*a, case, timeout)).collect();
    let finished = |name: &str| {
        rows.iter()
            .find(|r| r.algorithm == name && !r.timed_out && r.error.is_none())
            .cloned()
    };
    if let (Some(ci), Some(lcs)) = (finished("cidiff"), finished("lcs")) {
        let row = rows.iter_mut().find(|r| r.algorithm == "cidiff").unwrap();
        row.p_size = ci
            .script_size
            .zip(lcs.script_size)
            .map(|(a, b)| percentage_difference(a, b));
        row.p_added = ci
            .added_count
            .zip(lcs.added_count)
            .map(|(a, b)| percentage_difference(a, b));
    }
    CaseMetrics {
        id: case.id.clone(),
        rows,
    }
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::ThreadPool(e.to_string()))
}

/// Evaluates cases on at most `jobs` threads (0 picks the core count);
/// results are sorted by case id.
pub fn run_corpus(
    cases: &[RegressionCase],
    algorithms: &[&dyn CaseAlgorithm],
    timeout: Duration,
    jobs: usize,
) -> Result<Vec<CaseMetrics>> {
    let mut out: Vec<CaseMetrics> = pool(jobs)?.install(|| {
        cases
            .par_iter()
            .map(|c| run_case(c, algorithms, timeout))
            .collect()
    });
    out.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(out)
}

fn fmt_f64(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

fn fmt_usize(v: Option<usize>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_metrics_csv<W: Write>(out: W, metrics: &[CaseMetrics]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for case in metrics {
        for r in &case.rows {
            w.write_record([
                case.id.clone(),
                r.algorithm.clone(),
                fmt_usize(r.script_size),
                fmt_usize(r.added_count),
                format!("{:.6}", r.runtime_ms),
                r.timed_out.to_string(),
                fmt_f64(r.p_size),
                fmt_f64(r.p_added),
                fmt_f64(r.precision),
                fmt_f64(r.recall),
            ])?;
        }
    }
    w.flush().map_err(|e| Error::io("csv output", e))?;
    Ok(())
}

/// Lower quartile, median and upper quartile, linearly interpolated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quartiles {
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

impl Quartiles {
    /// `None` for an empty sample; NaN values are not expected.
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        Some(Quartiles {
            q1: quantile(&v, 0.25),
            median: quantile(&v, 0.5),
            q3: quantile(&v, 0.75),
        })
    }
}

pub fn median(values: &[f64]) -> Option<f64> {
    Quartiles::of(values).map(|q| q.median)
}

/// Per-algorithm medians over finished cases.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub algorithm: String,
    pub cases: usize,
    pub timed_out: usize,
    pub runtime_ms: Option<f64>,
    pub p_size: Option<f64>,
    pub p_added: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
}

pub fn summarize(metrics: &[CaseMetrics]) -> Vec<Summary> {
    let mut names: Vec<&str> = Vec::new();
    for r in metrics.iter().flat_map(|c| &c.rows) {
        if !names.contains(&r.algorithm.as_str()) {
            names.push(&r.algorithm);
        }
    }
    names
        .into_iter()
        .map(|name| {
            let rows: Vec<&AlgorithmMetrics> = metrics.iter().filter_map(|c| c.row(name)).collect();
            let col = |f: &dyn Fn(&AlgorithmMetrics) -> Option<f64>| {
                median(&rows.iter().filter_map(|r| f(r)).collect::<Vec<_>>())
            };
            Summary {
                algorithm: name.to_string(),
                cases: rows.len(),
                timed_out: rows.iter().filter(|r| r.timed_out).count(),
                runtime_ms: col(&|r| (!r.timed_out && r.error.is_none()).then_some(r.runtime_ms)),
                p_size: col(&|r| r.p_size),
                p_added: col(&|r| r.p_added),
                precision: col(&|r| r.precision),
                recall: col(&|r| r.recall),
            }
        })
        .collect()
}

/// Threshold values `0, step, 2 step, ..., 1`.
pub fn threshold_grid(step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && step <= 1.0) {
        return Err(Error::InvalidThreshold {
            name: "step",
            value: step,
        });
    }
    let n = (1.0 / step).round().max(1.0) as usize;
    Ok((0..=n).map(|i| i as f64 / n as f64).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub line_threshold: f64,
    pub token_threshold: f64,
    pub cases: usize,
    pub precision: Option<Quartiles>,
    pub recall: Option<Quartiles>,
}

pub const SWEEP_CSV_HEADER: [&str; 9] = [
    "line_threshold",
    "token_threshold",
    "cases",
    "precision_q1",
    "precision_median",
    "precision_q3",
    "recall_q1",
    "recall_median",
    "recall_q3",
];

/// Precision and recall of CiDiff's added lines for every threshold pair
/// of the grid, over the annotated cases. The LCS of each case is computed
/// once and shared by all cells.
pub fn sweep_thresholds(cases: &[RegressionCase], step: f64, jobs: usize) -> Result<Vec<SweepCell>> {
    let grid = threshold_grid(step)?;
    let cells: Vec<SimilarityParams> = grid
        .iter()
        .flat_map(|&l| {
            grid.iter().map(move |&t| SimilarityParams {
                line_threshold: l,
                token_threshold: t,
            })
        })
        .collect();
    let annotated: Vec<(&RegressionCase, &BTreeSet<usize>)> = cases
        .iter()
        .filter_map(|c| c.annotations.as_ref().map(|a| (c, a)))
        .collect();
    if annotated.is_empty() {
        return Err(Error::NoAnnotations);
    }
    let per_case: Vec<Vec<(f64, Option<f64>)>> = pool(jobs)?.install(|| {
        annotated
            .par_iter()
            .map(|(case, ann)| {
                let (p, f) = (&case.passing, &case.failing);
                let ids = LineIds::new(p, f);
                let lcs = lcs_ids(&ids.reference, &ids.modified, None).expect("no deadline set");
                cells
                    .iter()
                    .map(|params| {
                        let matching = match_with_lcs(p, f, &ids, &lcs, params);
                        let script = build_script(p, f, &matching, params, Algorithm::Cidiff);
                        precision_recall(&diff_output_lines(&script), ann)
                    })
                    .collect()
            })
            .collect()
    });
    Ok(cells
        .iter()
        .enumerate()
        .map(|(i, params)| {
            let precision: Vec<f64> = per_case.iter().map(|c| c[i].0).collect();
            let recall: Vec<f64> = per_case.iter().filter_map(|c| c[i].1).collect();
            SweepCell {
                line_threshold: params.line_threshold,
                token_threshold: params.token_threshold,
                cases: per_case.len(),
                precision: Quartiles::of(&precision),
                recall: Quartiles::of(&recall),
            }
        })
        .collect())
}

pub fn write_sweep_csv<W: Write>(out: W, cells: &[SweepCell]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SWEEP_CSV_HEADER)?;
    for c in cells {
        let q = |x: Option<Quartiles>| -> [String; 3] {
            [
                fmt_f64(x.map(|q| q.q1)),
                fmt_f64(x.map(|q| q.median)),
                fmt_f64(x.map(|q| q.q3)),
            ]
        };
        let [p1, pm, p3] = q(c.precision);
        let [r1, rm, r3] = q(c.recall);
        w.write_record([
            format!("{:.6}", c.line_threshold),
            format!("{:.6}", c.token_threshold),
            c.cases.to_string(),
            p1,
            pm,
            p3,
            r1,
            rm,
            r3,
        ])?;
    }
    w.flush().map_err(|e| Error::io("csv output", e))?;
    Ok(())
}
