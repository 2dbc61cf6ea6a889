//! Scores attribution output against a hand-labeled truth set.
//!
//! Every judged pair lands in exactly one of three buckets: a correct name
//! is a true positive, a wrong name a false positive, and no name at all a
//! false negative. True negatives do not exist in this regime because every
//! domain in the truth set has a real owner, so silence is always a miss.
//! Accuracy is therefore tp/(tp+fp+fn), the share of the whole set that was
//! named correctly.

use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use serde::Serialize;
use thiserror::Error;

use crate::orgname::normalize_org;
use crate::resolver::{from_record_line, Attribution};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("all counts are zero; nothing to score")]
    AllZero,
    #[error("no truth entry for domain {domain:?}")]
    MissingTruth { domain: String },
    #[error("{path} line {line}: {reason}")]
    Format {
        path: String,
        line: usize,
        reason: String,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One labeled domain: who actually controls it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GroundTruthEntry {
    pub domain: String,
    pub expected_org: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub notes: Option<String>,
}

/// A truth file loaded and indexed by domain.
#[derive(Debug, Clone)]
pub struct TruthSet {
    entries: Vec<GroundTruthEntry>,
    by_domain: HashMap<String, usize>,
}

impl TruthSet {
    /// Parses `domain<TAB>expected_org[<TAB>notes]` lines. Blank lines and
    /// `#` comments are ignored. Duplicate domains and empty organization
    /// names are rejected rather than silently resolved.
    pub fn parse(text: &str, origin: &str) -> Result<TruthSet, EvalError> {
        let mut entries = Vec::new();
        let mut by_domain = HashMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fail = |reason: String| EvalError::Format {
                path: origin.to_string(),
                line: i + 1,
                reason,
            };
            let mut fields = line.splitn(3, '\t');
            let domain = fields.next().unwrap_or("").trim().to_string();
            let expected_org = fields.next().unwrap_or("").trim().to_string();
            let notes = fields
                .next()
                .map(str::trim)
                .filter(|n| !n.is_empty())
                .map(str::to_string);
            if domain.is_empty() {
                return Err(fail("missing domain".into()));
            }
            if expected_org.is_empty() {
                return Err(fail(format!("no expected organization for {domain:?}")));
            }
            if by_domain.contains_key(&domain) {
                return Err(fail(format!("duplicate domain {domain:?}")));
            }
            by_domain.insert(domain.clone(), entries.len());
            entries.push(GroundTruthEntry {
                domain,
                expected_org,
                notes,
            });
        }
        Ok(TruthSet { entries, by_domain })
    }

    pub fn from_file(path: &Path) -> Result<TruthSet, EvalError> {
        let text = std::fs::read_to_string(path)?;
        TruthSet::parse(&text, &path.display().to_string())
    }

    pub fn get(&self, domain: &str) -> Option<&GroundTruthEntry> {
        self.by_domain.get(domain).map(|&i| &self.entries[i])
    }

    pub fn entries(&self) -> &[GroundTruthEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// The three-way verdict for one judged pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Outcome {
    Tp,
    Fp,
    Fn,
}

impl Outcome {
    pub fn as_str(&self) -> &'static str {
        match self {
            Outcome::Tp => "TP",
            Outcome::Fp => "FP",
            Outcome::Fn => "FN",
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Whether two organization names refer to the same organization.
///
/// Both are normalized; equal canonical forms match, and so does one
/// canonical token sequence appearing contiguously inside the other, which
/// lets "Amazon" stand for "Amazon Technologies". Names with no content
/// after normalization only match verbatim.
pub fn names_match(a: &str, b: &str) -> bool {
    match (normalize_org(a), normalize_org(b)) {
        (Ok(na), Ok(nb)) => {
            if na.text() == nb.text() {
                return true;
            }
            let ta: Vec<&str> = na.tokens().collect();
            let tb: Vec<&str> = nb.tokens().collect();
            contains_window(&ta, &tb) || contains_window(&tb, &ta)
        }
        _ => a.trim().eq_ignore_ascii_case(b.trim()),
    }
}

fn contains_window(haystack: &[&str], needle: &[&str]) -> bool {
    !needle.is_empty()
        && haystack.len() >= needle.len()
        && haystack.windows(needle.len()).any(|w| w == needle)
}

/// Judges one produced name (or its absence) against the truth entry.
pub fn judge(org: Option<&str>, truth: &GroundTruthEntry) -> Outcome {
    match org {
        None => Outcome::Fn,
        Some(name) if names_match(name, &truth.expected_org) => Outcome::Tp,
        Some(_) => Outcome::Fp,
    }
}

/// Counts plus the derived ratios, each in [0,1]. A ratio whose denominator
/// is zero is absent rather than zero, so "no attributions at all" does not
/// masquerade as perfect or worthless precision.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EvalMetrics {
    pub true_positives: u64,
    pub false_positives: u64,
    pub false_negatives: u64,
    pub accuracy: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
}

impl EvalMetrics {
    pub fn accuracy_percent(&self) -> Option<f64> {
        self.accuracy.map(to_percent)
    }

    pub fn precision_percent(&self) -> Option<f64> {
        self.precision.map(to_percent)
    }

    pub fn recall_percent(&self) -> Option<f64> {
        self.recall.map(to_percent)
    }

    pub fn f1_percent(&self) -> Option<f64> {
        self.f1.map(to_percent)
    }
}

/// Ratio to a percentage rounded to two decimals.
fn to_percent(ratio: f64) -> f64 {
    (ratio * 10_000.0).round() / 100.0
}

fn format_percent(value: Option<f64>) -> String {
    match value {
        Some(v) => format!("{v:.2}"),
        None => "-".to_string(),
    }
}

/// Derives all ratios from the raw counts.
pub fn compute_metrics(tp: u64, fp: u64, fn_count: u64) -> Result<EvalMetrics, EvalError> {
    if tp == 0 && fp == 0 && fn_count == 0 {
        return Err(EvalError::AllZero);
    }
    let ratio = |n: u64, d: u64| {
        if d == 0 {
            None
        } else {
            Some(n as f64 / d as f64)
        }
    };
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_count);
    let f1 = match (precision, recall) {
        (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
        (Some(_), Some(_)) => Some(0.0),
        _ => None,
    };
    Ok(EvalMetrics {
        true_positives: tp,
        false_positives: fp,
        false_negatives: fn_count,
        accuracy: ratio(tp, tp + fp + fn_count),
        precision,
        recall,
        f1,
    })
}

/// One judged domain, kept for per-domain reporting.
#[derive(Debug, Clone, Serialize)]
pub struct DomainOutcome {
    pub domain: String,
    pub expected: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub produced: Option<String>,
    pub outcome: Outcome,
}

/// The full result of scoring one technique's output.
#[derive(Debug, Clone, Serialize)]
pub struct Evaluation {
    pub metrics: EvalMetrics,
    pub outcomes: Vec<DomainOutcome>,
}

impl Evaluation {
    /// A fixed-width table row: label, counts, then the four percentages.
    pub fn table_row(&self, label: &str) -> String {
        let m = &self.metrics;
        format!(
            "{label}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            m.true_positives,
            m.false_positives,
            m.false_negatives,
            format_percent(m.accuracy_percent()),
            format_percent(m.precision_percent()),
            format_percent(m.recall_percent()),
            format_percent(m.f1_percent()),
        )
    }
}

pub const TABLE_HEADER: &str = "technique\ttp\tfp\tfn\taccuracy\tprecision\trecall\tf1";

/// Judges every attribution record against the truth set. Records are
/// matched to truth first by the input name, then by registrable domain;
/// a record matching neither is an error, because an unlabeled domain
/// cannot be scored at all.
pub fn judge_records(
    records: &[Attribution],
    truth: &TruthSet,
) -> Result<Evaluation, EvalError> {
    let mut outcomes = Vec::with_capacity(records.len());
    let (mut tp, mut fp, mut fn_count) = (0u64, 0u64, 0u64);
    for record in records {
        let entry = truth
            .get(&record.input_fqdn)
            .or_else(|| truth.get(&record.registrable_domain))
            .ok_or_else(|| EvalError::MissingTruth {
                domain: record.input_fqdn.clone(),
            })?;
        let outcome = judge(record.organization.as_deref(), entry);
        match outcome {
            Outcome::Tp => tp += 1,
            Outcome::Fp => fp += 1,
            Outcome::Fn => fn_count += 1,
        }
        outcomes.push(DomainOutcome {
            domain: record.input_fqdn.clone(),
            expected: entry.expected_org.clone(),
            produced: record.organization.clone(),
            outcome,
        });
    }
    Ok(Evaluation {
        metrics: compute_metrics(tp, fp, fn_count)?,
        outcomes,
    })
}

/// Parses a results file in the resolver's line-record format.
pub fn load_records(path: &Path) -> Result<Vec<Attribution>, EvalError> {
    let text = std::fs::read_to_string(path)?;
    let mut records = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let record = from_record_line(line).map_err(|e| EvalError::Format {
            path: path.display().to_string(),
            line: i + 1,
            reason: e.to_string(),
        })?;
        records.push(record);
    }
    Ok(records)
}

/// Scores a results file against a truth file.
pub fn evaluate_technique(results: &Path, truth: &Path) -> Result<Evaluation, EvalError> {
    let truth = TruthSet::from_file(truth)?;
    let records = load_records(results)?;
    judge_records(&records, &truth)
}
