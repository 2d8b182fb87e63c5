//! Two-step orchestration per instance and per dataset: strategy-driven
//! sub-table selection with a fallback ladder, an optional direct-answer
//! short-circuit, then answer generation.
//!
//! Fallback ladder when the selection query cannot produce a usable
//! sub-table: project the valid columns referenced by the failed query; if
//! none, ask once more with the column-only strategy and project what it
//! references; if that fails too, fall back to the full table truncated to
//! the token budget. Each adopted route is recorded as a fallback event
//! with the failure reason that triggered it.

use serde::{Deserialize, Serialize};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Duration;
use thiserror::Error;

use crate::llm::{CompletionRequest, LLMConfig, LlmError, Provider};
use crate::normalize::preprocess_table;
use crate::prompt::{
    build_answer_prompt, build_selection_prompt, parse_answer, ByteHeuristicCounter,
    ExemplarSet, PromptBudget, PromptError, Stage, TokenCount,
};
use crate::sql::{extract_sql, project_columns, validate_query, TableStore};
use crate::table::{cell_count, QAInstance, SubTable, Table, TaskKind};

/// Which dimensions the selection SQL may restrict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Col,
    Row,
    ColRow,
}

impl std::str::FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "col" => Ok(Strategy::Col),
            "row" => Ok(Strategy::Row),
            "colrow" | "col_row" | "col+row" => Ok(Strategy::ColRow),
            other => Err(format!("unknown strategy {other:?} (use col|row|colrow)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FallbackReason {
    EmptyResult,
    ExecError,
    SchemaError,
    NoSql,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FallbackAction {
    ColumnProjection,
    TruncatedFullTable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FallbackEvent {
    pub reason: FallbackReason,
    pub action: FallbackAction,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubTableResult {
    /// The SQL that produced the sub-table; empty for the truncated-table
    /// fallback, which executes none.
    pub sql: String,
    pub subtable: SubTable,
    pub strategy_used: Strategy,
    pub fallbacks: Vec<FallbackEvent>,
}

/// Everything needed to re-execute the instance offline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selection_prompt: Option<String>,
    pub raw_selection_output: String,
    pub subtable_result: SubTableResult,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub answer_prompt: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub raw_answer_output: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineOutput {
    pub instance_id: String,
    pub answer: String,
    pub direct_answer: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<Trace>,
    pub cells_before: u64,
    pub cells_after: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid table: {0}")]
    InvalidTable(String),
    #[error("store error: {0}")]
    Store(String),
    #[error("llm error on instance {instance}: {source}")]
    Llm { instance: String, source: LlmError },
    #[error("prompt error: {0}")]
    Prompt(String),
    #[error("answer parse error: {0}")]
    Answer(String),
    #[error("fallback table could not be constructed: {0}")]
    FallbackUnavailable(String),
}

pub struct PipelineConfig {
    pub strategy: Strategy,
    pub selection_cfg: LLMConfig,
    pub answer_cfg: LLMConfig,
    pub selection_shots: ExemplarSet,
    pub answer_shots: ExemplarSet,
    /// Enables the direct-answer short-circuit for 1x1 selection results.
    pub direct_answer: bool,
    /// Optional hard cap on built prompts.
    pub prompt_budget: Option<PromptBudget>,
    /// Token budget for the truncated-full-table fallback.
    pub table_token_budget: usize,
    pub sql_timeout: Duration,
}

impl PipelineConfig {
    pub fn new(strategy: Strategy, model: &str, task: TaskKind) -> Self {
        let benchmark = match task {
            TaskKind::Qa => crate::llm::Benchmark::WikiTq,
            TaskKind::FactVerification => crate::llm::Benchmark::TabFact,
        };
        PipelineConfig {
            strategy,
            selection_cfg: LLMConfig::selection_defaults(model),
            answer_cfg: LLMConfig::answer_defaults(model, benchmark),
            selection_shots: ExemplarSet::empty(Stage::Selection, task),
            answer_shots: ExemplarSet::empty(Stage::Answer, task),
            direct_answer: false,
            prompt_budget: None,
            table_token_budget: 2000,
            sql_timeout: Duration::from_secs(5),
        }
    }

    fn counter(&self) -> &dyn TokenCount {
        match &self.prompt_budget {
            Some(b) => b.counter.as_ref(),
            None => &ByteHeuristicCounter,
        }
    }
}

pub struct SelectionOutcome {
    pub result: SubTableResult,
    pub selection_prompt: Option<String>,
    /// Raw model output; the fresh column-selection retry, when made, is
    /// appended after a separator line.
    pub raw_selection_output: String,
}

const RETRY_SEPARATOR: &str = "\n--- column-selection retry ---\n";

fn complete_text(
    llm: &dyn Provider,
    prompt: &str,
    cfg: &LLMConfig,
    instance_id: &str,
) -> Result<String, PipelineError> {
    let req = CompletionRequest {
        prompt: prompt.to_string(),
        config: cfg.clone(),
    };
    llm.complete(&req)
        .map(|resp| resp.text().to_string())
        .map_err(|source| PipelineError::Llm {
            instance: instance_id.to_string(),
            source,
        })
}

/// Valid columns referenced by a raw model output, resolved to exact SQL
/// names, plus the failure reason when the output itself was unusable.
fn salvage_columns(raw: &str, table: &Table) -> (Vec<String>, Option<FallbackReason>) {
    let q = match extract_sql(raw) {
        Ok(q) => q,
        Err(_) => return (Vec::new(), Some(FallbackReason::NoSql)),
    };
    match validate_query(&q, table) {
        Ok(bound) => (bound.referenced_columns.into_iter().collect(), None),
        Err(_) => {
            let valid: Vec<String> = q
                .referenced_columns
                .iter()
                .filter_map(|c| table.column_by_sql_name(c).map(|col| col.sql_name.clone()))
                .collect();
            (valid, Some(FallbackReason::SchemaError))
        }
    }
}

enum Attempt {
    Success { sql: String, subtable: SubTable },
    Failure { reason: FallbackReason, salvage: Vec<String> },
}

fn attempt_query(raw: &str, table: &Table, store: &TableStore, strategy: Strategy) -> Attempt {
    let q = match extract_sql(raw) {
        Ok(q) => q,
        Err(_) => {
            return Attempt::Failure {
                reason: FallbackReason::NoSql,
                salvage: Vec::new(),
            }
        }
    };
    let bound = match validate_query(&q, table) {
        Ok(b) => b,
        Err(_) => {
            let valid: Vec<String> = q
                .referenced_columns
                .iter()
                .filter_map(|c| table.column_by_sql_name(c).map(|col| col.sql_name.clone()))
                .collect();
            return Attempt::Failure {
                reason: FallbackReason::SchemaError,
                salvage: valid,
            };
        }
    };
    let referenced: Vec<String> = bound.referenced_columns.iter().cloned().collect();
    match store.execute(&bound) {
        Ok(sub) => {
            if sub.rows.is_empty() && strategy != Strategy::Col {
                Attempt::Failure {
                    reason: FallbackReason::EmptyResult,
                    salvage: referenced,
                }
            } else {
                Attempt::Success {
                    sql: bound.text,
                    subtable: sub,
                }
            }
        }
        Err(_) => Attempt::Failure {
            reason: FallbackReason::ExecError,
            salvage: referenced,
        },
    }
}

fn truncated_full_table(
    table: &Table,
    cfg: &PipelineConfig,
) -> Result<SubTable, PipelineError> {
    let truncated = crate::eval::truncate_table_tokens(table, cfg.table_token_budget, cfg.counter())
        .map_err(|e| PipelineError::FallbackUnavailable(e.to_string()))?;
    let headers: Vec<String> = truncated
        .columns
        .iter()
        .map(|c| c.display_name.clone())
        .collect();
    Ok(SubTable::new(headers, truncated.rows))
}

/// Runs the sub-table selection step: builds the strategy prompt, asks the
/// model for SQL, validates and executes it, and walks the fallback ladder
/// when anything goes wrong. The instance's table must already be
/// preprocessed.
pub fn select_subtable(
    inst: &QAInstance,
    cfg: &PipelineConfig,
    llm: &dyn Provider,
) -> Result<SelectionOutcome, PipelineError> {
    let table = &inst.table;
    let store = TableStore::materialize_with_timeout(table, cfg.sql_timeout)
        .map_err(|e| PipelineError::Store(e.to_string()))?;

    let mut selection_prompt = None;
    let mut raw_log = String::new();
    let first_attempt = match build_selection_prompt(
        table,
        &inst.question,
        inst.task,
        cfg.strategy,
        &cfg.selection_shots,
        cfg.prompt_budget.as_ref(),
    ) {
        Ok(prompt) => {
            let raw = complete_text(llm, &prompt, &cfg.selection_cfg, &inst.id)?;
            selection_prompt = Some(prompt);
            raw_log = raw.clone();
            attempt_query(&raw, table, &store, cfg.strategy)
        }
        Err(PromptError::BudgetExceeded { .. }) => Attempt::Failure {
            reason: FallbackReason::NoSql,
            salvage: Vec::new(),
        },
        Err(e) => return Err(PipelineError::Prompt(e.to_string())),
    };

    let (reason, salvage) = match first_attempt {
        Attempt::Success { sql, subtable } => {
            return Ok(SelectionOutcome {
                result: SubTableResult {
                    sql,
                    subtable,
                    strategy_used: cfg.strategy,
                    fallbacks: Vec::new(),
                },
                selection_prompt,
                raw_selection_output: raw_log,
            });
        }
        Attempt::Failure { reason, salvage } => (reason, salvage),
    };

    let mut fallbacks = Vec::new();
    // route 1: project the valid columns the failed query referenced
    if !salvage.is_empty() {
        if let Ok(sub) = project_columns(table, &salvage) {
            fallbacks.push(FallbackEvent {
                reason,
                action: FallbackAction::ColumnProjection,
            });
            let sql = sub.provenance_sql.clone().unwrap_or_default();
            return Ok(SelectionOutcome {
                result: SubTableResult {
                    sql,
                    subtable: sub,
                    strategy_used: cfg.strategy,
                    fallbacks,
                },
                selection_prompt,
                raw_selection_output: raw_log,
            });
        }
    }
    // route 2: one fresh column-only call (skipped when the failed call
    // already used the column strategy)
    let mut latest_reason = reason;
    if cfg.strategy != Strategy::Col {
        if let Ok(prompt) = build_selection_prompt(
            table,
            &inst.question,
            inst.task,
            Strategy::Col,
            &cfg.selection_shots,
            cfg.prompt_budget.as_ref(),
        ) {
            let raw = complete_text(llm, &prompt, &cfg.selection_cfg, &inst.id)?;
            raw_log.push_str(RETRY_SEPARATOR);
            raw_log.push_str(&raw);
            let (cols, retry_reason) = salvage_columns(&raw, table);
            if !cols.is_empty() {
                if let Ok(sub) = project_columns(table, &cols) {
                    fallbacks.push(FallbackEvent {
                        reason,
                        action: FallbackAction::ColumnProjection,
                    });
                    let sql = sub.provenance_sql.clone().unwrap_or_default();
                    return Ok(SelectionOutcome {
                        result: SubTableResult {
                            sql,
                            subtable: sub,
                            strategy_used: cfg.strategy,
                            fallbacks,
                        },
                        selection_prompt,
                        raw_selection_output: raw_log,
                    });
                }
            }
            latest_reason = retry_reason.unwrap_or(reason);
        }
    }
    // route 3: full table truncated to the token budget
    let sub = truncated_full_table(table, cfg)?;
    fallbacks.push(FallbackEvent {
        reason: latest_reason,
        action: FallbackAction::TruncatedFullTable,
    });
    Ok(SelectionOutcome {
        result: SubTableResult {
            sql: String::new(),
            subtable: sub,
            strategy_used: cfg.strategy,
            fallbacks,
        },
        selection_prompt,
        raw_selection_output: raw_log,
    })
}

/// The direct-answer rule: a clean 1x1 non-empty selection result on a QA
/// instance, with the feature flag enabled.
pub fn is_direct_answer(r: &SubTableResult, inst: &QAInstance, enabled: bool) -> bool {
    enabled
        && inst.task == TaskKind::Qa
        && r.fallbacks.is_empty()
        && r.subtable.rows.len() == 1
        && r.subtable.columns.len() == 1
        && !r.subtable.rows[0][0].trim().is_empty()
}

/// Runs both pipeline steps for one instance and records the full trace.
pub fn run_instance(
    inst: &QAInstance,
    cfg: &PipelineConfig,
    llm: &dyn Provider,
) -> Result<PipelineOutput, PipelineError> {
    let table = preprocess_table(&inst.table)
        .map_err(|e| PipelineError::InvalidTable(e.to_string()))?;
    let prepped = QAInstance {
        table,
        ..inst.clone()
    };
    let cells_before = cell_count(&prepped.table) as u64;
    let outcome = select_subtable(&prepped, cfg, llm)?;
    let cells_after = outcome.result.subtable.cell_count() as u64;

    if is_direct_answer(&outcome.result, &prepped, cfg.direct_answer) {
        let answer = outcome.result.subtable.rows[0][0].trim().to_string();
        return Ok(PipelineOutput {
            instance_id: prepped.id,
            answer,
            direct_answer: true,
            trace: Some(Trace {
                selection_prompt: outcome.selection_prompt,
                raw_selection_output: outcome.raw_selection_output,
                subtable_result: outcome.result,
                answer_prompt: None,
                raw_answer_output: None,
            }),
            cells_before,
            cells_after,
            error: None,
        });
    }

    let answer_prompt = build_answer_prompt(
        &outcome.result.subtable,
        &outcome.result.sql,
        &prepped.question,
        prepped.task,
        &cfg.answer_shots,
        prepped.context.as_deref(),
        cfg.prompt_budget.as_ref(),
    )
    .map_err(|e| PipelineError::Prompt(e.to_string()))?;
    let raw_answer = complete_text(llm, &answer_prompt, &cfg.answer_cfg, &prepped.id)?;
    let answer = parse_answer(&raw_answer, prepped.task)
        .map_err(|e| PipelineError::Answer(e.to_string()))?;

    Ok(PipelineOutput {
        instance_id: prepped.id,
        answer,
        direct_answer: false,
        trace: Some(Trace {
            selection_prompt: outcome.selection_prompt,
            raw_selection_output: outcome.raw_selection_output,
            subtable_result: outcome.result,
            answer_prompt: Some(answer_prompt),
            raw_answer_output: Some(raw_answer),
        }),
        cells_before,
        cells_after,
        error: None,
    })
}

fn run_or_failure(inst: &QAInstance, cfg: &PipelineConfig, llm: &dyn Provider) -> PipelineOutput {
    match run_instance(inst, cfg, llm) {
        Ok(out) => out,
        Err(e) => PipelineOutput {
            instance_id: inst.id.clone(),
            answer: String::new(),
            direct_answer: false,
            trace: None,
            cells_before: 0,
            cells_after: 0,
            error: Some(e.to_string()),
        },
    }
}

/// Runs a whole dataset with a bounded worker pool. Outputs come back in
/// input order regardless of completion order; per-instance failures become
/// failed output records and never abort the batch.
pub fn run_dataset(
    instances: &[QAInstance],
    cfg: &PipelineConfig,
    llm: &dyn Provider,
    workers: usize,
    progress: Option<&(dyn Fn(usize, usize) + Sync)>,
) -> Vec<PipelineOutput> {
    let total = instances.len();
    if workers <= 1 {
        return instances
            .iter()
            .enumerate()
            .map(|(i, inst)| {
                let out = run_or_failure(inst, cfg, llm);
                if let Some(cb) = progress {
                    cb(i + 1, total);
                }
                out
            })
            .collect();
    }
    let next = AtomicUsize::new(0);
    let done = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<PipelineOutput>>> = Mutex::new(vec![None; total]);
    std::thread::scope(|scope| {
        for _ in 0..workers.min(total.max(1)) {
            scope.spawn(|| loop {
                let idx = next.fetch_add(1, Ordering::SeqCst);
                if idx >= total {
                    break;
                }
                let out = run_or_failure(&instances[idx], cfg, llm);
                results.lock().expect("results poisoned")[idx] = Some(out);
                let finished = done.fetch_add(1, Ordering::SeqCst) + 1;
                if let Some(cb) = progress {
                    cb(finished, total);
                }
            });
        }
    });
    results
        .into_inner()
        .expect("results poisoned")
        .into_iter()
        .map(|o| o.expect("worker missed an index"))
        .collect()
}
