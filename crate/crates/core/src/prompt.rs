//! Prompt construction for the two pipeline stages (sub-table selection and
//! answer generation), table linearization, and answer-text parsing.
//!
//! Prompt building is a pure function of its arguments. The instruction
//! wording ships as defaults here and can be overridden per exemplar set,
//! so prompts are swappable without code changes.

use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use thiserror::Error;

use crate::pipeline::Strategy;
use crate::table::{SubTable, Table, TaskKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Selection,
    Answer,
}

/// One few-shot example: a linearized table snippet, the question asked of
/// it, and the target text the model should produce.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exemplar {
    pub table: String,
    pub question: String,
    pub target: String,
}

/// A named, versioned set of few-shot exemplars for one stage and task.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExemplarSet {
    pub name: String,
    pub stage: Stage,
    pub task: TaskKind,
    /// Optional override for the stage instruction text.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instruction: Option<String>,
    pub shots: Vec<Exemplar>,
}

impl ExemplarSet {
    pub fn empty(stage: Stage, task: TaskKind) -> Self {
        ExemplarSet {
            name: "empty".into(),
            stage,
            task,
            instruction: None,
            shots: Vec::new(),
        }
    }

    pub fn load(path: &Path) -> Result<Self, PromptError> {
        let text = fs::read_to_string(path)
            .map_err(|e| PromptError::Asset(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| PromptError::Asset(format!("{}: {e}", path.display())))
    }
}

/// Pluggable token counting scheme. The default is a byte heuristic; an
/// exact tokenizer can be dropped in behind the same interface.
pub trait TokenCount: Send + Sync {
    fn count(&self, text: &str) -> usize;
    fn name(&self) -> &'static str;
}

/// ceil(byte_length / 4)
#[derive(Debug, Clone, Copy, Default)]
pub struct ByteHeuristicCounter;

impl TokenCount for ByteHeuristicCounter {
    fn count(&self, text: &str) -> usize {
        text.len().div_ceil(4)
    }

    fn name(&self) -> &'static str {
        "bytes/4"
    }
}

pub struct PromptBudget {
    pub max_prompt_tokens: usize,
    pub counter: Box<dyn TokenCount>,
}

impl PromptBudget {
    pub fn new(max_prompt_tokens: usize) -> Self {
        assert!(max_prompt_tokens > 0, "budget must be positive");
        PromptBudget {
            max_prompt_tokens,
            counter: Box::new(ByteHeuristicCounter),
        }
    }

    fn check(&self, prompt: &str) -> Result<(), PromptError> {
        let tokens = self.counter.count(prompt);
        if tokens > self.max_prompt_tokens {
            Err(PromptError::BudgetExceeded {
                tokens,
                budget: self.max_prompt_tokens,
            })
        } else {
            Ok(())
        }
    }
}

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("prompt of {tokens} tokens exceeds budget of {budget}")]
    BudgetExceeded { tokens: usize, budget: usize },
    #[error("exemplar set has stage {found:?}, expected {expected:?}")]
    WrongStage { expected: Stage, found: Stage },
    #[error("prompt asset error: {0}")]
    Asset(String),
    #[error("model output is empty")]
    UnparseableAnswer,
}

pub(crate) fn linearize_rows(
    headers: &[&str],
    rows: &[Vec<String>],
    max_rows: Option<usize>,
) -> String {
    let mut out = headers.join(" | ");
    let shown = max_rows.unwrap_or(rows.len()).min(rows.len());
    for row in &rows[..shown] {
        out.push('\n');
        out.push_str(&row.join(" | "));
    }
    if shown < rows.len() {
        let _ = write!(out, "\n... ({} more rows)", rows.len() - shown);
    }
    out
}

/// Renders a table as prompt text: optional title line, a pipe-separated
/// header, then up to `max_rows` data lines with an elision marker.
pub fn linearize_table(t: &Table, max_rows: Option<usize>) -> String {
    let headers = t.display_names();
    let body = linearize_rows(&headers, &t.rows, max_rows);
    match &t.title {
        Some(title) => format!("title: {title}\n{body}"),
        None => body,
    }
}

pub fn linearize_subtable(s: &SubTable, max_rows: Option<usize>) -> String {
    let headers: Vec<&str> = s.columns.iter().map(|c| c.as_str()).collect();
    linearize_rows(&headers, &s.rows, max_rows)
}

/// Rows of the target table shown in the selection prompt.
pub const SCHEMA_PREVIEW_ROWS: usize = 3;

fn selection_instruction(strategy: Strategy) -> &'static str {
    match strategy {
        Strategy::Col => {
            "Write a single SQL SELECT query over the table `w` that selects only the \
             columns needed to answer the question. Do not filter rows: choose columns only. \
             Respond with only the SQL query."
        }
        Strategy::Row => {
            "Write a single SQL SELECT query over the table `w` that keeps every column \
             (use SELECT *) and restricts it to the rows needed to answer the question \
             with a WHERE clause; use GROUP BY and aggregate functions when the question \
             calls for them. Respond with only the SQL query."
        }
        Strategy::ColRow => {
            "Write a single SQL SELECT query over the table `w` that selects both the \
             columns and the rows needed to answer the question; use WHERE, GROUP BY, and \
             aggregate functions when the question calls for them. Respond with only the \
             SQL query."
        }
    }
}

fn question_label(task: TaskKind) -> &'static str {
    match task {
        TaskKind::Qa => "Question",
        TaskKind::FactVerification => "Statement",
    }
}

fn answer_cue(task: TaskKind) -> &'static str {
    match task {
        TaskKind::Qa => {
            "Answer the question using the table above. Reason step by step, then end \
             your response with a final line of the form `Answer: <answer>`. Use `|` to \
             separate multiple answers."
        }
        TaskKind::FactVerification => {
            "Decide whether the statement is true or false using the table above. Reason \
             step by step, then end your response with a final line of the form \
             `Answer: yes` or `Answer: no`."
        }
    }
}

/// Builds the sub-table selection prompt: instruction, exemplar shots, a
/// schema block (title, display-to-SQL name map with types, first rows),
/// and the question or statement.
pub fn build_selection_prompt(
    t: &Table,
    question: &str,
    task: TaskKind,
    strategy: Strategy,
    ex: &ExemplarSet,
    budget: Option<&PromptBudget>,
) -> Result<String, PromptError> {
    if ex.stage != Stage::Selection {
        return Err(PromptError::WrongStage {
            expected: Stage::Selection,
            found: ex.stage,
        });
    }
    let label = question_label(task);
    let mut prompt = String::new();
    prompt.push_str(
        ex.instruction
            .as_deref()
            .unwrap_or_else(|| selection_instruction(strategy)),
    );
    prompt.push_str("\n\n");
    for shot in &ex.shots {
        let _ = write!(
            prompt,
            "{}\n{label}: {}\nSQL: {}\n\n",
            shot.table, shot.question, shot.target
        );
    }
    if let Some(title) = &t.title {
        let _ = writeln!(prompt, "title: {title}");
    }
    prompt.push_str("columns:\n");
    for col in &t.columns {
        let _ = writeln!(
            prompt,
            "{} -> {} ({})",
            col.display_name, col.sql_name, col.inferred_type
        );
    }
    let headers = t.display_names();
    prompt.push_str(&linearize_rows(&headers, &t.rows, Some(SCHEMA_PREVIEW_ROWS)));
    let _ = write!(prompt, "\n{label}: {question}\nSQL:");
    if let Some(b) = budget {
        b.check(&prompt)?;
    }
    Ok(prompt)
}

/// Builds the answer-generation prompt: exemplar shots, the selection SQL,
/// the fully linearized sub-table, optional context, the question or
/// statement, and the final-answer cue.
pub fn build_answer_prompt(
    sub: &SubTable,
    sql: &str,
    question: &str,
    task: TaskKind,
    ex: &ExemplarSet,
    context: Option<&str>,
    budget: Option<&PromptBudget>,
) -> Result<String, PromptError> {
    if ex.stage != Stage::Answer {
        return Err(PromptError::WrongStage {
            expected: Stage::Answer,
            found: ex.stage,
        });
    }
    let label = question_label(task);
    let mut prompt = String::new();
    for shot in &ex.shots {
        let _ = write!(
            prompt,
            "{}\n{label}: {}\n{}\n\n",
            shot.table, shot.question, shot.target
        );
    }
    let _ = writeln!(prompt, "SQL: {sql}");
    prompt.push_str(&linearize_subtable(sub, None));
    prompt.push('\n');
    if let Some(ctx) = context {
        let _ = writeln!(prompt, "Context: {ctx}");
    }
    let _ = writeln!(prompt, "{label}: {question}");
    prompt.push_str(answer_cue(task));
    if let Some(b) = budget {
        b.check(&prompt)?;
    }
    Ok(prompt)
}

fn map_fact_label(candidate: &str) -> String {
    let first_word: String = candidate
        .chars()
        .skip_while(|c| !c.is_alphanumeric())
        .take_while(|c| c.is_alphanumeric())
        .collect::<String>()
        .to_lowercase();
    match first_word.as_str() {
        "yes" | "true" => "true".to_string(),
        "no" | "false" => "false".to_string(),
        _ => candidate.to_string(),
    }
}

/// Extracts the final answer from chain-of-thought output: the text after
/// the last `Answer:` marker, or the last non-empty line when the marker is
/// missing. Fact-verification labels are mapped to `true`/`false`.
pub fn parse_answer(raw: &str, task: TaskKind) -> Result<String, PromptError> {
    if raw.trim().is_empty() {
        return Err(PromptError::UnparseableAnswer);
    }
    let lower = raw.to_ascii_lowercase();
    let candidate = match lower.rfind("answer:") {
        Some(idx) => raw[idx + "answer:".len()..].trim(),
        None => raw.lines().rev().find(|l| !l.trim().is_empty()).unwrap().trim(),
    };
    Ok(match task {
        TaskKind::Qa => candidate.to_string(),
        TaskKind::FactVerification => map_fact_label(candidate),
    })
}
