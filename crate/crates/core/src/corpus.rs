//! Canonical dataset loading and writing. One instance per line of
//! line-delimited JSON: {id, task, question, gold_answers, context?,
//! table: {title?, header, rows}}. Malformed lines become reject records,
//! never batch failures.

use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use thiserror::Error;

use crate::normalize::preprocess_table;
use crate::sql::{extract_sql, validate_query, TableStore};
use crate::table::{validate, QAInstance, Table, TaskKind};

#[derive(Debug, Serialize, Deserialize)]
struct TableWire {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    title: Option<String>,
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct InstanceWire {
    id: String,
    task: TaskKind,
    question: String,
    gold_answers: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    context: Option<String>,
    table: TableWire,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Reject {
    pub line_no: usize,
    pub reason: String,
}

#[derive(Debug)]
pub struct LoadResult {
    pub instances: Vec<QAInstance>,
    pub rejects: Vec<Reject>,
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("file error: {0}")]
    File(String),
    #[error("dataset contains no valid instances")]
    EmptyDataset,
    #[error("bad fact-verification label: {0:?}")]
    BadLabel(String),
    #[error("gold query failed: {0}")]
    GoldQuery(String),
}

fn instance_from_wire(wire: InstanceWire) -> Result<QAInstance, String> {
    let table = Table::from_parts(
        wire.table.title,
        wire.table.header,
        wire.table.rows,
        Some(wire.id.clone()),
    );
    let violations = validate(&table);
    if !violations.is_empty() {
        return Err(violations
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join("; "));
    }
    if wire.gold_answers.is_empty() {
        return Err("gold_answers must be non-empty".to_string());
    }
    let inst = QAInstance {
        id: wire.id,
        table,
        question: wire.question,
        gold_answers: wire.gold_answers,
        task: wire.task,
        context: wire.context,
    };
    match inst.task {
        TaskKind::FactVerification => {
            adapt_fact_statement(inst).map_err(|e| e.to_string())
        }
        TaskKind::Qa => Ok(inst),
    }
}

/// Loads and validates a canonical dataset. When `expected_task` is given,
/// lines with a different task are rejected. Order follows the file.
pub fn load_dataset(
    path: &Path,
    expected_task: Option<TaskKind>,
) -> Result<LoadResult, CorpusError> {
    let file =
        File::open(path).map_err(|e| CorpusError::File(format!("{}: {e}", path.display())))?;
    let mut instances = Vec::new();
    let mut rejects = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| CorpusError::File(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let wire: InstanceWire = match serde_json::from_str(&line) {
            Ok(w) => w,
            Err(e) => {
                rejects.push(Reject {
                    line_no,
                    reason: format!("parse error: {e}"),
                });
                continue;
            }
        };
        if let Some(expected) = expected_task {
            if wire.task != expected {
                rejects.push(Reject {
                    line_no,
                    reason: format!("task mismatch: expected {expected:?}, found {:?}", wire.task),
                });
                continue;
            }
        }
        match instance_from_wire(wire) {
            Ok(inst) => instances.push(inst),
            Err(reason) => rejects.push(Reject { line_no, reason }),
        }
    }
    if instances.is_empty() {
        return Err(CorpusError::EmptyDataset);
    }
    Ok(LoadResult { instances, rejects })
}

/// Writes instances back out in the canonical format, cell-for-cell.
pub fn write_dataset(path: &Path, instances: &[QAInstance]) -> Result<(), CorpusError> {
    let file =
        File::create(path).map_err(|e| CorpusError::File(format!("{}: {e}", path.display())))?;
    let mut out = BufWriter::new(file);
    for inst in instances {
        let wire = InstanceWire {
            id: inst.id.clone(),
            task: inst.task,
            question: inst.question.clone(),
            gold_answers: inst.gold_answers.clone(),
            context: inst.context.clone(),
            table: TableWire {
                title: inst.table.title.clone(),
                header: inst
                    .table
                    .columns
                    .iter()
                    .map(|c| c.display_name.clone())
                    .collect(),
                rows: inst.table.rows.clone(),
            },
        };
        let line = serde_json::to_string(&wire).map_err(|e| CorpusError::File(e.to_string()))?;
        writeln!(out, "{line}").map_err(|e| CorpusError::File(e.to_string()))?;
    }
    out.flush().map_err(|e| CorpusError::File(e.to_string()))
}

pub fn write_rejects(path: &Path, rejects: &[Reject]) -> Result<(), CorpusError> {
    let file =
        File::create(path).map_err(|e| CorpusError::File(format!("{}: {e}", path.display())))?;
    let mut out = BufWriter::new(file);
    for r in rejects {
        let line = serde_json::to_string(r).map_err(|e| CorpusError::File(e.to_string()))?;
        writeln!(out, "{line}").map_err(|e| CorpusError::File(e.to_string()))?;
    }
    out.flush().map_err(|e| CorpusError::File(e.to_string()))
}

/// Normalizes a fact-verification gold label to lowercase `true`/`false`.
pub fn adapt_fact_statement(mut inst: QAInstance) -> Result<QAInstance, CorpusError> {
    debug_assert_eq!(inst.task, TaskKind::FactVerification);
    if inst.gold_answers.len() != 1 {
        return Err(CorpusError::BadLabel(format!(
            "expected one label, got {}",
            inst.gold_answers.len()
        )));
    }
    let lowered = inst.gold_answers[0].trim().to_lowercase();
    match lowered.as_str() {
        "true" | "false" => {
            inst.gold_answers[0] = lowered;
            Ok(inst)
        }
        other => Err(CorpusError::BadLabel(other.to_string())),
    }
}

/// Executes a ground-truth SQL query against the (preprocessed) table and
/// renders the result grid, row-major, as the gold answer list.
pub fn derive_wikisql_gold(sql_gold: &str, table: &Table) -> Result<Vec<String>, CorpusError> {
    let prepped = preprocess_table(table).map_err(|e| CorpusError::GoldQuery(e.to_string()))?;
    let query = extract_sql(sql_gold).map_err(|e| CorpusError::GoldQuery(e.to_string()))?;
    let bound =
        validate_query(&query, &prepped).map_err(|e| CorpusError::GoldQuery(e.to_string()))?;
    let store =
        TableStore::materialize(&prepped).map_err(|e| CorpusError::GoldQuery(e.to_string()))?;
    let sub = store
        .execute(&bound)
        .map_err(|e| CorpusError::GoldQuery(e.to_string()))?;
    Ok(sub.rows.into_iter().flatten().collect())
}
