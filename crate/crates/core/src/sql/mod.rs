//! SQL side of sub-table selection: cleaning LLM output into a single safe
//! SELECT, validating it against the table schema, and executing it on an
//! embedded store.

mod lexer;
mod store;

pub use store::{ExecError, StoreError, TableStore};

use std::collections::{BTreeSet, HashMap, HashSet};
use thiserror::Error;

use crate::table::{SubTable, Table};
use lexer::{lex, Tok, Token};

/// A cleaned, single-statement SELECT together with the identifiers it
/// references.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SqlQuery {
    pub text: String,
    /// Lowercased column identifiers referenced anywhere in the query.
    pub referenced_columns: BTreeSet<String>,
    /// Relation names referenced in FROM/JOIN clauses or as qualifiers.
    pub referenced_tables: Vec<String>,
    /// Presence of COUNT/SUM/AVG/MIN/MAX or GROUP BY.
    pub has_aggregation: bool,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ExtractError {
    #[error("no SELECT statement found in model output")]
    NoSqlFound,
    #[error("multiple SQL statements in model output")]
    MultipleStatements,
    #[error("forbidden SQL keyword: {0}")]
    ForbiddenStatement(String),
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("unknown identifiers: {}", unknown.join(", "))]
pub struct SchemaError {
    pub unknown: Vec<String>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ProjectError {
    #[error("no columns to project")]
    NoColumns,
    #[error("unknown column: {0}")]
    UnknownColumn(String),
}

const FORBIDDEN: [&str; 7] = [
    "insert", "update", "delete", "drop", "alter", "attach", "pragma",
];

const AGGREGATES: [&str; 5] = ["count", "sum", "avg", "min", "max"];

fn is_keyword(w: &str) -> bool {
    const KEYWORDS: [&str; 52] = [
        "select", "from", "where", "group", "by", "order", "having", "limit", "offset",
        "distinct", "all", "as", "and", "or", "not", "in", "like", "glob", "between", "is",
        "null", "asc", "desc", "join", "inner", "left", "right", "outer", "cross", "on",
        "union", "intersect", "except", "case", "when", "then", "else", "end", "cast",
        "exists", "collate", "escape", "isnull", "notnull", "true", "false", "integer",
        "real", "text", "rowid", "using", "natural",
    ];
    const FUNCTIONS: [&str; 16] = [
        "count", "sum", "avg", "min", "max", "abs", "length", "lower", "upper", "round",
        "substr", "replace", "trim", "coalesce", "nullif", "ifnull",
    ];
    let lower = w.to_ascii_lowercase();
    KEYWORDS.contains(&lower.as_str()) || FUNCTIONS.contains(&lower.as_str())
}

/// Picks the text most likely to contain the SQL: the first fenced code
/// block mentioning SELECT, any fenced block, or the raw text.
fn strip_fences(raw: &str) -> &str {
    let mut fences: Vec<usize> = Vec::new();
    let mut from = 0;
    while let Some(pos) = raw[from..].find("```") {
        fences.push(from + pos);
        from = from + pos + 3;
    }
    if fences.is_empty() {
        return raw;
    }
    let mut blocks: Vec<&str> = Vec::new();
    let mut k = 0;
    while k + 1 < fences.len() {
        let mut body_start = fences[k] + 3;
        // skip a language tag on the opening fence line
        if let Some(nl) = raw[body_start..fences[k + 1]].find('\n') {
            let tag = &raw[body_start..body_start + nl];
            if tag.trim().chars().all(|c| c.is_ascii_alphanumeric()) {
                body_start += nl + 1;
            }
        }
        blocks.push(&raw[body_start..fences[k + 1]]);
        k += 2;
    }
    if blocks.is_empty() {
        // single unmatched fence: take everything after it
        let mut body_start = fences[0] + 3;
        if let Some(nl) = raw[body_start..].find('\n') {
            let tag = &raw[body_start..body_start + nl];
            if tag.trim().chars().all(|c| c.is_ascii_alphanumeric()) {
                body_start += nl + 1;
            }
        }
        return &raw[body_start..];
    }
    blocks
        .iter()
        .find(|b| find_select(b).is_some())
        .copied()
        .unwrap_or(blocks[0])
}

fn find_select(text: &str) -> Option<usize> {
    let lower = text.to_ascii_lowercase();
    let bytes = lower.as_bytes();
    let mut from = 0;
    while let Some(pos) = lower[from..].find("select") {
        let at = from + pos;
        let before_ok = at == 0 || !(bytes[at - 1].is_ascii_alphanumeric() || bytes[at - 1] == b'_');
        let after = at + 6;
        let after_ok =
            after >= bytes.len() || !(bytes[after].is_ascii_alphanumeric() || bytes[after] == b'_');
        if before_ok && after_ok {
            return Some(at);
        }
        from = at + 6;
    }
    None
}

struct Analysis {
    tables: Vec<String>,
    columns: BTreeSet<String>,
    has_aggregation: bool,
}

fn analyze(tokens: &[Token]) -> Analysis {
    let mut tables = Vec::new();
    let mut aliases: HashSet<String> = HashSet::new();
    let mut has_aggregation = false;
    // pass 1: relations, aliases, aggregation
    let mut in_from = false;
    let mut expect_table = false;
    let mut i = 0;
    while i < tokens.len() {
        let t = &tokens[i];
        match &t.tok {
            Tok::Word(w) => {
                let lower = w.to_ascii_lowercase();
                let next_is_paren = tokens.get(i + 1).map(|n| n.is_sym("(")).unwrap_or(false);
                if AGGREGATES.contains(&lower.as_str()) && next_is_paren {
                    has_aggregation = true;
                }
                if lower == "group"
                    && tokens.get(i + 1).map(|n| n.word_eq("by")).unwrap_or(false)
                {
                    has_aggregation = true;
                }
                if lower == "from" || lower == "join" {
                    in_from = true;
                    expect_table = true;
                } else if lower == "as" {
                    if let Some(next) = tokens.get(i + 1) {
                        match &next.tok {
                            Tok::Word(a) => {
                                aliases.insert(a.to_ascii_lowercase());
                            }
                            Tok::Quoted(a) => {
                                aliases.insert(a.to_ascii_lowercase());
                            }
                            _ => {}
                        }
                    }
                } else if matches!(
                    lower.as_str(),
                    "where" | "group" | "order" | "having" | "limit" | "on" | "select" | "union"
                ) {
                    in_from = false;
                    expect_table = false;
                } else if expect_table && !is_keyword(w) {
                    tables.push(w.clone());
                    expect_table = false;
                }
            }
            Tok::Quoted(q) => {
                if expect_table {
                    tables.push(q.clone());
                    expect_table = false;
                }
            }
            Tok::Sym(s) if s == "," && in_from => {
                expect_table = true;
            }
            _ => {}
        }
        i += 1;
    }
    // pass 2: column candidates
    let mut columns = BTreeSet::new();
    let table_set: HashSet<String> = tables.iter().map(|t| t.to_ascii_lowercase()).collect();
    let mut in_from = false;
    let mut i = 0;
    while i < tokens.len() {
        let t = &tokens[i];
        let prev_word = if i > 0 { Some(&tokens[i - 1]) } else { None };
        let next = tokens.get(i + 1);
        match &t.tok {
            Tok::Word(w) => {
                let lower = w.to_ascii_lowercase();
                if lower == "from" || lower == "join" {
                    in_from = true;
                } else if matches!(
                    lower.as_str(),
                    "where" | "group" | "order" | "having" | "limit" | "on" | "select" | "union"
                ) {
                    in_from = false;
                }
                let is_function_call = next.map(|n| n.is_sym("(")).unwrap_or(false);
                let is_alias_def = prev_word.map(|p| p.word_eq("as")).unwrap_or(false);
                let is_qualifier = next.map(|n| n.is_sym(".")).unwrap_or(false);
                if is_qualifier && !is_keyword(w) {
                    // table qualifier in `w.col`
                    if !table_set.contains(&lower) {
                        // count unknown qualifiers as table references
                    }
                    i += 1;
                    continue;
                }
                if !is_keyword(w)
                    && !is_function_call
                    && !is_alias_def
                    && !in_from
                    && !aliases.contains(&lower)
                    && !table_set.contains(&lower)
                {
                    columns.insert(lower);
                }
            }
            Tok::Quoted(q) => {
                let lower = q.to_ascii_lowercase();
                let is_alias_def = prev_word.map(|p| p.word_eq("as")).unwrap_or(false);
                if !in_from && !is_alias_def && !aliases.contains(&lower) {
                    columns.insert(lower);
                }
            }
            _ => {}
        }
        i += 1;
    }
    // qualifiers like `w.col`: the token after '.' is a column
    let mut i = 1;
    while i + 1 < tokens.len() {
        if tokens[i].is_sym(".") {
            if let (Tok::Word(q), Tok::Word(c)) = (&tokens[i - 1].tok, &tokens[i + 1].tok) {
                if !is_keyword(c) {
                    columns.insert(c.to_ascii_lowercase());
                }
                let qual = q.to_ascii_lowercase();
                if !table_set.contains(&qual) {
                    tables.push(q.clone());
                }
            }
        }
        i += 1;
    }
    Analysis {
        tables,
        columns,
        has_aggregation,
    }
}

/// Cleans raw LLM output into a single SELECT statement: strips code fences
/// and leading prose, trims a trailing semicolon, rejects multi-statement or
/// non-SELECT payloads, and records referenced identifiers.
pub fn extract_sql(raw_llm_output: &str) -> Result<SqlQuery, ExtractError> {
    let candidate = strip_fences(raw_llm_output);
    let start = find_select(candidate).ok_or(ExtractError::NoSqlFound)?;
    let sql = &candidate[start..];
    let tokens = lex(sql);
    let stmt_end = tokens.iter().position(|t| t.is_sym(";"));
    let (stmt, rest): (&[Token], &[Token]) = match stmt_end {
        Some(pos) => (&tokens[..pos], &tokens[pos + 1..]),
        None => (&tokens[..], &[]),
    };
    if rest.iter().any(|t| !t.is_sym(";")) {
        return Err(ExtractError::MultipleStatements);
    }
    if stmt.is_empty() {
        return Err(ExtractError::NoSqlFound);
    }
    for t in stmt {
        if let Tok::Word(w) = &t.tok {
            let lower = w.to_ascii_lowercase();
            if FORBIDDEN.contains(&lower.as_str()) {
                return Err(ExtractError::ForbiddenStatement(lower));
            }
        }
    }
    let text = sql[..stmt.last().unwrap().end].trim().to_string();
    let analysis = analyze(stmt);
    Ok(SqlQuery {
        text,
        referenced_columns: analysis.columns,
        referenced_tables: analysis.tables,
        has_aggregation: analysis.has_aggregation,
    })
}

/// Checks every referenced identifier against the table schema and, on
/// success, returns the query rewritten with exact-case SQL names. Column
/// references are matched case-insensitively.
pub fn validate_query(q: &SqlQuery, t: &Table) -> Result<SqlQuery, SchemaError> {
    let schema: HashMap<String, &str> = t
        .columns
        .iter()
        .map(|c| (c.sql_name.to_ascii_lowercase(), c.sql_name.as_str()))
        .collect();
    let mut unknown = Vec::new();
    for table in &q.referenced_tables {
        if !table.eq_ignore_ascii_case("w") {
            unknown.push(table.clone());
        }
    }
    for col in &q.referenced_columns {
        if !schema.contains_key(col.as_str()) {
            unknown.push(col.clone());
        }
    }
    if !unknown.is_empty() {
        return Err(SchemaError { unknown });
    }
    // rewrite identifiers to exact sql_names
    let tokens = lex(&q.text);
    let mut out = String::with_capacity(q.text.len());
    let mut last_end = 0;
    for (i, tok) in tokens.iter().enumerate() {
        out.push_str(&q.text[last_end..tok.start]);
        last_end = tok.end;
        let original = &q.text[tok.start..tok.end];
        let next_is_paren = tokens.get(i + 1).map(|n| n.is_sym("(")).unwrap_or(false);
        match &tok.tok {
            Tok::Word(w) if !is_keyword(w) && !next_is_paren => {
                let lower = w.to_ascii_lowercase();
                if let Some(exact) = schema.get(lower.as_str()) {
                    out.push_str(exact);
                } else if lower == "w" {
                    out.push('w');
                } else {
                    out.push_str(original);
                }
            }
            Tok::Quoted(inner) => {
                let lower = inner.to_ascii_lowercase();
                if let Some(exact) = schema.get(lower.as_str()) {
                    out.push_str(exact);
                } else {
                    out.push_str(original);
                }
            }
            _ => out.push_str(original),
        }
    }
    out.push_str(&q.text[last_end..]);
    let referenced_columns = q
        .referenced_columns
        .iter()
        .map(|c| schema[c.as_str()].to_string())
        .collect();
    Ok(SqlQuery {
        text: out,
        referenced_columns,
        referenced_tables: vec!["w".to_string()],
        has_aggregation: q.has_aggregation,
    })
}

/// Projects the named columns (duplicates collapsed, order preserved) over
/// all rows of the table.
pub fn project_columns<S: AsRef<str>>(t: &Table, cols: &[S]) -> Result<SubTable, ProjectError> {
    if cols.is_empty() {
        return Err(ProjectError::NoColumns);
    }
    let mut picked: Vec<(usize, String)> = Vec::new();
    for c in cols {
        let name = c.as_ref();
        let idx = t
            .columns
            .iter()
            .position(|col| col.sql_name.eq_ignore_ascii_case(name))
            .ok_or_else(|| ProjectError::UnknownColumn(name.to_string()))?;
        if !picked.iter().any(|(i, _)| *i == idx) {
            picked.push((idx, t.columns[idx].sql_name.clone()));
        }
    }
    let headers: Vec<String> = picked.iter().map(|(_, n)| n.clone()).collect();
    let rows: Vec<Vec<String>> = t
        .rows
        .iter()
        .map(|row| picked.iter().map(|(i, _)| row[*i].clone()).collect())
        .collect();
    let mut sub = SubTable::new(headers.clone(), rows);
    sub.provenance_sql = Some(format!("SELECT {} FROM w", headers.join(", ")));
    Ok(sub)
}
