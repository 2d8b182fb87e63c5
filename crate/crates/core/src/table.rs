//! Core data types shared by the whole pipeline: tables, benchmark
//! instances, and the sub-tables produced by query execution.

use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::fmt;

use crate::normalize;

/// Per-column type annotation. Cells themselves are always stored as text;
/// the annotation only drives SQL affinity and prompt schema hints.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum CellType {
    Text,
    Number,
    Date,
}

impl fmt::Display for CellType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CellType::Text => write!(f, "TEXT"),
            CellType::Number => write!(f, "NUMBER"),
            CellType::Date => write!(f, "DATE"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSpec {
    /// Column name exactly as found in the source table.
    pub display_name: String,
    /// Sanitized identifier used in SQL, matches `[a-z_][a-z0-9_]*`.
    pub sql_name: String,
    pub inferred_type: CellType,
}

/// A titled grid of string cells with named columns. Immutable after
/// construction; safe to share across pipeline workers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Table {
    pub title: Option<String>,
    pub columns: Vec<ColumnSpec>,
    /// Each row has exactly `columns.len()` cells. Missing cells are
    /// represented as empty strings.
    pub rows: Vec<Vec<String>>,
    pub source_id: Option<String>,
}

impl Table {
    /// Builds a table from raw header/rows, assigning sanitized SQL names
    /// and inferring column types from the cells as-is.
    pub fn from_parts(
        title: Option<String>,
        header: Vec<String>,
        rows: Vec<Vec<String>>,
        source_id: Option<String>,
    ) -> Self {
        let mut taken = std::collections::HashSet::new();
        let columns = header
            .iter()
            .enumerate()
            .map(|(i, display)| {
                let sql_name = normalize::sanitize_identifier(display, &taken);
                taken.insert(sql_name.clone());
                let cells = rows.iter().filter_map(|r| r.get(i).map(|s| s.as_str()));
                ColumnSpec {
                    display_name: display.clone(),
                    sql_name,
                    inferred_type: normalize::infer_column_type(cells),
                }
            })
            .collect();
        Table {
            title,
            columns,
            rows,
            source_id,
        }
    }

    pub fn display_names(&self) -> Vec<&str> {
        self.columns.iter().map(|c| c.display_name.as_str()).collect()
    }

    pub fn sql_names(&self) -> Vec<&str> {
        self.columns.iter().map(|c| c.sql_name.as_str()).collect()
    }

    /// Case-insensitive lookup of a column by its SQL name.
    pub fn column_by_sql_name(&self, name: &str) -> Option<&ColumnSpec> {
        self.columns
            .iter()
            .find(|c| c.sql_name.eq_ignore_ascii_case(name))
    }
}

/// Number of body cells: rows x columns, header excluded.
pub fn cell_count(t: &Table) -> usize {
    t.rows.len() * t.columns.len()
}

/// Invariant violation found by [`validate`]. Violations are data, not
/// faults: loaders collect them into reject reports.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    RaggedRow {
        index: usize,
        expected: usize,
        actual: usize,
    },
    EmptyHeader {
        index: usize,
    },
    BadSqlName {
        index: usize,
        name: String,
    },
    DuplicateSqlName {
        name: String,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::RaggedRow {
                index,
                expected,
                actual,
            } => write!(
                f,
                "ragged row at index {index}: expected {expected} cells, got {actual}"
            ),
            Violation::EmptyHeader { index } => {
                write!(f, "empty header at column {index}")
            }
            Violation::BadSqlName { index, name } => {
                write!(f, "invalid sql name {name:?} at column {index}")
            }
            Violation::DuplicateSqlName { name } => {
                write!(f, "duplicate sanitized column name {name:?}")
            }
        }
    }
}

fn is_valid_sql_name(name: &str) -> bool {
    let mut chars = name.chars();
    match chars.next() {
        Some(c) if c.is_ascii_lowercase() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_')
}

/// Returns every invariant violation: ragged rows, empty headers, bad or
/// duplicate sanitized names. An empty result means the table is valid.
pub fn validate(t: &Table) -> Vec<Violation> {
    let mut violations = Vec::new();
    let width = t.columns.len();
    for (i, col) in t.columns.iter().enumerate() {
        if col.display_name.is_empty() {
            violations.push(Violation::EmptyHeader { index: i });
        }
        if !is_valid_sql_name(&col.sql_name) {
            violations.push(Violation::BadSqlName {
                index: i,
                name: col.sql_name.clone(),
            });
        }
    }
    let mut seen: HashMap<&str, usize> = HashMap::new();
    for col in &t.columns {
        *seen.entry(col.sql_name.as_str()).or_insert(0) += 1;
    }
    for (name, count) in seen {
        if count > 1 {
            violations.push(Violation::DuplicateSqlName {
                name: name.to_string(),
            });
        }
    }
    for (i, row) in t.rows.iter().enumerate() {
        if row.len() != width {
            violations.push(Violation::RaggedRow {
                index: i,
                expected: width,
                actual: row.len(),
            });
        }
    }
    violations
}

/// Benchmark task kind carried by every instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Qa,
    FactVerification,
}

/// One benchmark item: a table plus a question (or, for fact verification,
/// a statement) and its gold answer(s).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QAInstance {
    pub id: String,
    pub table: Table,
    pub question: String,
    pub gold_answers: Vec<String>,
    pub task: TaskKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub context: Option<String>,
}

/// Result grid from sub-table selection: headers plus rectangular rows.
/// May be empty (zero rows).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance_sql: Option<String>,
}

impl SubTable {
    pub fn new(columns: Vec<String>, rows: Vec<Vec<String>>) -> Self {
        debug_assert!(rows.iter().all(|r| r.len() == columns.len()));
        SubTable {
            columns,
            rows,
            provenance_sql: None,
        }
    }

    pub fn cell_count(&self) -> usize {
        self.rows.len() * self.columns.len()
    }

    pub fn is_rectangular(&self) -> bool {
        self.rows.iter().all(|r| r.len() == self.columns.len())
    }
}
