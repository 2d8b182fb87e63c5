//! Metrics and experiment harnesses: exact match with pre-matching
//! normalization, fact-verification accuracy, ROUGE, table-reduction
//! statistics, and the token-cutoff experiment.

mod rouge;

pub use rouge::{rouge_l, rouge_n, tokenize, RougeScore};

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};
use thiserror::Error;

use crate::normalize::{is_decimal, normalize_date_token, normalize_number_token};
use crate::pipeline::PipelineOutput;
use crate::prompt::{linearize_table, TokenCount};
use crate::table::{QAInstance, Table, TaskKind};

/// Absolute tolerance for numeric answer comparison.
pub const NUMERIC_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("length mismatch: {predictions} predictions vs {golds} golds")]
    LengthMismatch { predictions: usize, golds: usize },
    #[error("header alone needs {header} tokens, budget is {budget}")]
    BudgetTooSmall { header: usize, budget: usize },
    #[error("prediction {0} has no matching dataset instance")]
    MissingInstance(String),
}

fn strip_surrounding_quotes(s: &str) -> &str {
    let b = s.as_bytes();
    if b.len() >= 2 {
        let (first, last) = (b[0], b[b.len() - 1]);
        if first == last && (first == b'"' || first == b'\'') {
            return &s[1..s.len() - 1];
        }
    }
    s
}

fn canonical_decimal(s: &str) -> String {
    let (neg, digits) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    let (int_part, frac_part) = match digits.split_once('.') {
        Some((i, f)) => (i, f),
        None => (digits, ""),
    };
    let int_trimmed = int_part.trim_start_matches('0');
    let int_final = if int_trimmed.is_empty() { "0" } else { int_trimmed };
    let frac_final = frac_part.trim_end_matches('0');
    let is_zero = int_final == "0" && frac_final.is_empty();
    let mut out = String::new();
    if neg && !is_zero {
        out.push('-');
    }
    out.push_str(int_final);
    if !frac_final.is_empty() {
        out.push('.');
        out.push_str(frac_final);
    }
    out
}

/// Pre-matching normalization applied to both sides of the comparison:
/// lowercase, trim, strip surrounding quotes and trailing periods (to a
/// fixed point, so interleavings like `'a'.` fully unwrap), then
/// date/number canonicalization and canonical decimal rendering.
pub fn normalize_answer(s: &str) -> String {
    let mut t = s.trim().to_lowercase();
    loop {
        let before = t.clone();
        t = strip_surrounding_quotes(t.trim()).to_string();
        while t.ends_with('.') {
            t.pop();
        }
        t = t.trim().to_string();
        if t == before {
            break;
        }
    }
    let t = normalize_number_token(&normalize_date_token(&t));
    if is_decimal(&t) {
        canonical_decimal(&t)
    } else {
        t
    }
}

#[derive(Debug, Clone, PartialEq)]
enum AnswerItem {
    Num(f64),
    Text(String),
}

fn parse_items(s: &str) -> Vec<AnswerItem> {
    s.split('|')
        .map(|part| {
            let n = normalize_answer(part);
            if is_decimal(&n) {
                if let Ok(v) = n.parse::<f64>() {
                    return AnswerItem::Num(v);
                }
            }
            AnswerItem::Text(n)
        })
        .collect()
}

fn multiset_eq(a: &[AnswerItem], b: &[AnswerItem]) -> bool {
    if a.len() != b.len() {
        return false;
    }
    let split = |items: &[AnswerItem]| {
        let mut nums: Vec<f64> = Vec::new();
        let mut texts: Vec<String> = Vec::new();
        for it in items {
            match it {
                AnswerItem::Num(v) => nums.push(*v),
                AnswerItem::Text(t) => texts.push(t.clone()),
            }
        }
        nums.sort_by(|x, y| x.partial_cmp(y).unwrap());
        texts.sort();
        (nums, texts)
    };
    let (an, at) = split(a);
    let (bn, bt) = split(b);
    if an.len() != bn.len() || at != bt {
        return false;
    }
    an.iter()
        .zip(bn.iter())
        .all(|(x, y)| (x - y).abs() <= NUMERIC_TOLERANCE)
}

/// Denotation-style exact match: both sides are split on `|`, normalized,
/// and compared as multisets, with numeric items matched under an absolute
/// tolerance. A multi-element gold list is also accepted as a whole
/// multiset, which covers golds derived by executing a reference query.
pub fn exact_match(pred: &str, gold: &[String]) -> bool {
    let p = parse_items(pred);
    if gold.iter().any(|g| multiset_eq(&p, &parse_items(g))) {
        return true;
    }
    if gold.len() > 1 {
        let combined: Vec<AnswerItem> = gold.iter().flat_map(|g| parse_items(g)).collect();
        if multiset_eq(&p, &combined) {
            return true;
        }
    }
    false
}

fn parse_label(s: &str) -> Option<bool> {
    match normalize_answer(s).as_str() {
        "true" | "yes" => Some(true),
        "false" | "no" => Some(false),
        _ => None,
    }
}

/// Fact-verification label match; an unparseable prediction never matches.
pub fn label_match(pred: &str, gold: &[String]) -> bool {
    let gold_label = gold.first().and_then(|g| parse_label(g));
    match (parse_label(pred), gold_label) {
        (Some(p), Some(g)) => p == g,
        _ => false,
    }
}

/// Fraction of predictions whose parsed label equals the gold label.
pub fn binary_accuracy(predictions: &[String], golds: &[String]) -> Result<f64, EvalError> {
    if predictions.len() != golds.len() {
        return Err(EvalError::LengthMismatch {
            predictions: predictions.len(),
            golds: golds.len(),
        });
    }
    if predictions.is_empty() {
        return Ok(0.0);
    }
    let correct = predictions
        .iter()
        .zip(golds.iter())
        .filter(|(p, g)| label_match(p, std::slice::from_ref(*g)))
        .count();
    Ok(correct as f64 / predictions.len() as f64)
}

/// Percentage of table tokens discarded by a cutoff threshold.
pub fn cutoff_percent(table_tokens: u64, threshold: u64) -> f64 {
    debug_assert!(table_tokens > 0);
    table_tokens.saturating_sub(threshold) as f64 / table_tokens as f64 * 100.0
}

/// Cutoff classes over the discarded-token percentage; intervals are
/// half-open on the left boundary and together cover [0, 100].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CutoffClass {
    C0_10,
    C10_25,
    C25_50,
    C50Plus,
}

impl CutoffClass {
    pub const ALL: [CutoffClass; 4] = [
        CutoffClass::C0_10,
        CutoffClass::C10_25,
        CutoffClass::C25_50,
        CutoffClass::C50Plus,
    ];

    pub fn contains(self, p: f64) -> bool {
        match self {
            CutoffClass::C0_10 => (0.0..10.0).contains(&p),
            CutoffClass::C10_25 => (10.0..25.0).contains(&p),
            CutoffClass::C25_50 => (25.0..50.0).contains(&p),
            CutoffClass::C50Plus => (50.0..=100.0).contains(&p),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            CutoffClass::C0_10 => "0 - 10%",
            CutoffClass::C10_25 => "10 - 25%",
            CutoffClass::C25_50 => "25 - 50%",
            CutoffClass::C50Plus => "50% +",
        }
    }
}

pub fn classify_cutoff(p: f64) -> CutoffClass {
    debug_assert!((0.0..=100.0).contains(&p));
    if p < 10.0 {
        CutoffClass::C0_10
    } else if p < 25.0 {
        CutoffClass::C10_25
    } else if p < 50.0 {
        CutoffClass::C25_50
    } else {
        CutoffClass::C50Plus
    }
}

/// Keeps the header and the maximal row prefix whose linearization fits the
/// token budget. Rows are never split.
pub fn truncate_table_tokens(
    t: &Table,
    budget: usize,
    counter: &dyn TokenCount,
) -> Result<Table, EvalError> {
    let mut header_only = t.clone();
    header_only.rows = Vec::new();
    let mut text = linearize_table(&header_only, None);
    let header_tokens = counter.count(&text);
    if header_tokens > budget {
        return Err(EvalError::BudgetTooSmall {
            header: header_tokens,
            budget,
        });
    }
    let mut kept = 0;
    for row in &t.rows {
        let candidate = format!("{text}\n{}", row.join(" | "));
        if counter.count(&candidate) > budget {
            break;
        }
        text = candidate;
        kept += 1;
    }
    let mut out = t.clone();
    out.rows.truncate(kept);
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReductionStats {
    /// Number of non-failed outputs the means are taken over.
    pub count: usize,
    pub mean_before: f64,
    pub mean_after: f64,
    /// Mean of per-instance after/before ratios (instances with zero cells
    /// before are skipped).
    pub mean_ratio: f64,
}

/// Arithmetic means of the cell counts recorded by the pipeline, over
/// non-failed outputs.
pub fn reduction_stats(outputs: &[PipelineOutput]) -> ReductionStats {
    let ok: Vec<&PipelineOutput> = outputs.iter().filter(|o| o.error.is_none()).collect();
    if ok.is_empty() {
        return ReductionStats {
            count: 0,
            mean_before: 0.0,
            mean_after: 0.0,
            mean_ratio: 0.0,
        };
    }
    let n = ok.len() as f64;
    let mean_before = ok.iter().map(|o| o.cells_before as f64).sum::<f64>() / n;
    let mean_after = ok.iter().map(|o| o.cells_after as f64).sum::<f64>() / n;
    let ratios: Vec<f64> = ok
        .iter()
        .filter(|o| o.cells_before > 0)
        .map(|o| o.cells_after as f64 / o.cells_before as f64)
        .collect();
    let mean_ratio = if ratios.is_empty() {
        0.0
    } else {
        ratios.iter().sum::<f64>() / ratios.len() as f64
    };
    ReductionStats {
        count: ok.len(),
        mean_before,
        mean_after,
        mean_ratio,
    }
}

/// Fraction of non-failed outputs answered directly from the selection SQL.
pub fn direct_answer_rate(outputs: &[PipelineOutput]) -> f64 {
    let ok: Vec<&PipelineOutput> = outputs.iter().filter(|o| o.error.is_none()).collect();
    if ok.is_empty() {
        return 0.0;
    }
    ok.iter().filter(|o| o.direct_answer).count() as f64 / ok.len() as f64
}

/// Manual error-analysis category attached to an output by a human
/// annotator; at most one per output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ErrorCategory {
    MissingColumns,
    MissingRows,
    IncorrectReasoning,
    IncorrectAnnotation,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Annotation {
    pub instance_id: String,
    pub category: ErrorCategory,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct MetricSet {
    pub exact_match: bool,
    pub binary_accuracy: bool,
    pub rouge: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InstanceEval {
    pub id: String,
    pub predicted: String,
    pub gold: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub correct: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rouge_1: Option<RougeScore>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rouge_2: Option<RougeScore>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rouge_l: Option<RougeScore>,
    pub cells_before: u64,
    pub cells_after: u64,
    pub direct_answer: bool,
    pub failed: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AggregateEval {
    pub count: usize,
    pub failures: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_rouge_1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_rouge_2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_rouge_l: Option<f64>,
    pub reduction: ReductionStats,
    pub direct_answer_rate: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cutoff_classes: Option<BTreeMap<String, usize>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub per_instance: Vec<InstanceEval>,
    pub aggregate: AggregateEval,
}

/// Scores pipeline outputs against their dataset instances. Exact match
/// applies to QA instances, label accuracy to fact verification, ROUGE to
/// everything when requested (max over gold variants). Failed outputs count
/// as incorrect.
pub fn evaluate(
    outputs: &[PipelineOutput],
    instances: &[QAInstance],
    metrics: MetricSet,
) -> Result<EvalReport, EvalError> {
    let by_id: HashMap<&str, &QAInstance> =
        instances.iter().map(|i| (i.id.as_str(), i)).collect();
    let mut per_instance = Vec::with_capacity(outputs.len());
    for out in outputs {
        let inst = by_id
            .get(out.instance_id.as_str())
            .ok_or_else(|| EvalError::MissingInstance(out.instance_id.clone()))?;
        let failed = out.error.is_some();
        let correct = match inst.task {
            TaskKind::Qa if metrics.exact_match => {
                Some(!failed && exact_match(&out.answer, &inst.gold_answers))
            }
            TaskKind::FactVerification if metrics.binary_accuracy => {
                Some(!failed && label_match(&out.answer, &inst.gold_answers))
            }
            _ => None,
        };
        let (rouge_1, rouge_2, rouge_l_score) = if metrics.rouge && !failed {
            let best = |f: &dyn Fn(&str, &str) -> RougeScore| {
                inst.gold_answers
                    .iter()
                    .map(|g| f(&out.answer, g))
                    .max_by(|a, b| a.f1.partial_cmp(&b.f1).unwrap())
            };
            (
                best(&|p, g| rouge_n(p, g, 1)),
                best(&|p, g| rouge_n(p, g, 2)),
                best(&rouge_l),
            )
        } else {
            (None, None, None)
        };
        per_instance.push(InstanceEval {
            id: out.instance_id.clone(),
            predicted: out.answer.clone(),
            gold: inst.gold_answers.clone(),
            correct,
            rouge_1,
            rouge_2,
            rouge_l: rouge_l_score,
            cells_before: out.cells_before,
            cells_after: out.cells_after,
            direct_answer: out.direct_answer,
            failed,
        });
    }
    let scored: Vec<&InstanceEval> = per_instance.iter().filter(|e| e.correct.is_some()).collect();
    let accuracy = if scored.is_empty() {
        None
    } else {
        Some(
            scored.iter().filter(|e| e.correct == Some(true)).count() as f64
                / scored.len() as f64,
        )
    };
    let mean_rouge = |get: &dyn Fn(&InstanceEval) -> Option<RougeScore>| {
        let values: Vec<f64> = per_instance.iter().filter_map(|e| get(e).map(|s| s.f1)).collect();
        if values.is_empty() {
            None
        } else {
            Some(values.iter().sum::<f64>() / values.len() as f64)
        }
    };
    let aggregate = AggregateEval {
        count: per_instance.len(),
        failures: per_instance.iter().filter(|e| e.failed).count(),
        accuracy,
        mean_rouge_1: mean_rouge(&|e| e.rouge_1),
        mean_rouge_2: mean_rouge(&|e| e.rouge_2),
        mean_rouge_l: mean_rouge(&|e| e.rouge_l),
        reduction: reduction_stats(outputs),
        direct_answer_rate: direct_answer_rate(outputs),
        cutoff_classes: None,
    };
    Ok(EvalReport {
        per_instance,
        aggregate,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CutoffBucket {
    pub class: CutoffClass,
    pub label: String,
    pub count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<f64>,
}

/// Buckets instances by the percentage of table tokens a threshold would
/// discard; when predictions are supplied, per-bucket accuracy is joined in
/// (exact match for QA, label match for fact verification).
pub fn cutoff_buckets(
    instances: &[QAInstance],
    threshold: u64,
    counter: &dyn TokenCount,
    predictions: Option<&HashMap<String, String>>,
) -> Vec<CutoffBucket> {
    let mut counts: BTreeMap<usize, (usize, usize, usize)> = BTreeMap::new();
    for (i, class) in CutoffClass::ALL.iter().enumerate() {
        let _ = class;
        counts.insert(i, (0, 0, 0));
    }
    for inst in instances {
        let tokens = counter.count(&linearize_table(&inst.table, None)).max(1) as u64;
        let class = classify_cutoff(cutoff_percent(tokens, threshold));
        let idx = CutoffClass::ALL.iter().position(|c| *c == class).unwrap();
        let entry = counts.get_mut(&idx).unwrap();
        entry.0 += 1;
        if let Some(preds) = predictions {
            if let Some(pred) = preds.get(&inst.id) {
                entry.1 += 1;
                let hit = match inst.task {
                    TaskKind::Qa => exact_match(pred, &inst.gold_answers),
                    TaskKind::FactVerification => label_match(pred, &inst.gold_answers),
                };
                if hit {
                    entry.2 += 1;
                }
            }
        }
    }
    CutoffClass::ALL
        .iter()
        .enumerate()
        .map(|(i, class)| {
            let (count, scored, hits) = counts[&i];
            CutoffBucket {
                class: *class,
                label: class.label().to_string(),
                count,
                accuracy: if scored > 0 {
                    Some(hits as f64 / scored as f64)
                } else {
                    None
                },
            }
        })
        .collect()
}
