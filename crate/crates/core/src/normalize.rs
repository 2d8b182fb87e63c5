//! Table preprocessing: comma removal from grouped numbers, date
//! canonicalization to YYYY-MM-DD, identifier sanitization, and column
//! type inference.
//!
//! Normalization rewrites whole cells only. A token that does not match a
//! known layout is returned unchanged, so the functions are total and
//! idempotent.

use regex::Regex;
use std::collections::HashSet;
use std::sync::LazyLock;
use thiserror::Error;

use crate::table::{validate, CellType, ColumnSpec, Table, Violation};

static GROUPED_NUMBER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^[+-]?\d{1,3}(,\d{3})+(\.\d+)?$").unwrap());

static DECIMAL: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^[+-]?(\d+\.?\d*|\.\d+)$").unwrap());

static ISO_DATE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^\d{4}-\d{2}-\d{2}$").unwrap());

// Accepted source layouts (month names case-insensitive, full or 3-letter):
//   D Month YYYY | Month D, YYYY | YYYY-M-D | YYYY/M/D
static DAY_MONTH_YEAR: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^(\d{1,2})\s+([A-Za-z]+)\s+(\d{4})$").unwrap());
static MONTH_DAY_YEAR: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^([A-Za-z]+)\s+(\d{1,2}),\s*(\d{4})$").unwrap());
static YMD_NUMERIC: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^(\d{4})[-/](\d{1,2})[-/](\d{1,2})$").unwrap());

#[derive(Debug, Error)]
#[error("invalid table: {reasons}")]
pub struct InvalidTable {
    pub reasons: String,
    pub violations: Vec<Violation>,
}

/// Removes grouping commas from thousands-grouped decimals; any other
/// string is returned unchanged.
pub fn normalize_number_token(s: &str) -> String {
    if GROUPED_NUMBER.is_match(s) {
        s.chars().filter(|c| *c != ',').collect()
    } else {
        s.to_string()
    }
}

fn month_number(name: &str) -> Option<u32> {
    const MONTHS: [&str; 12] = [
        "january",
        "february",
        "march",
        "april",
        "may",
        "june",
        "july",
        "august",
        "september",
        "october",
        "november",
        "december",
    ];
    let lower = name.to_ascii_lowercase();
    for (i, full) in MONTHS.iter().enumerate() {
        if lower == *full || (lower.len() == 3 && full.starts_with(&lower)) {
            return Some(i as u32 + 1);
        }
    }
    None
}

fn days_in_month(year: u32, month: u32) -> u32 {
    match month {
        1 | 3 | 5 | 7 | 8 | 10 | 12 => 31,
        4 | 6 | 9 | 11 => 30,
        2 => {
            let leap = (year.is_multiple_of(4) && !year.is_multiple_of(100))
                || year.is_multiple_of(400);
            if leap {
                29
            } else {
                28
            }
        }
        _ => 0,
    }
}

fn render_date(year: u32, month: u32, day: u32) -> Option<String> {
    if month == 0 || month > 12 || day == 0 || day > days_in_month(year, month) {
        return None;
    }
    Some(format!("{year:04}-{month:02}-{day:02}"))
}

/// Rewrites a recognized date layout to YYYY-MM-DD; anything else (including
/// calendar-invalid dates and ambiguous numeric forms like `03/04/2008`) is
/// returned unchanged.
pub fn normalize_date_token(s: &str) -> String {
    if let Some(c) = DAY_MONTH_YEAR.captures(s) {
        if let Some(month) = month_number(&c[2]) {
            let day: u32 = c[1].parse().unwrap_or(0);
            let year: u32 = c[3].parse().unwrap_or(0);
            if let Some(out) = render_date(year, month, day) {
                return out;
            }
        }
    }
    if let Some(c) = MONTH_DAY_YEAR.captures(s) {
        if let Some(month) = month_number(&c[1]) {
            let day: u32 = c[2].parse().unwrap_or(0);
            let year: u32 = c[3].parse().unwrap_or(0);
            if let Some(out) = render_date(year, month, day) {
                return out;
            }
        }
    }
    if let Some(c) = YMD_NUMERIC.captures(s) {
        let year: u32 = c[1].parse().unwrap_or(0);
        let month: u32 = c[2].parse().unwrap_or(0);
        let day: u32 = c[3].parse().unwrap_or(0);
        if let Some(out) = render_date(year, month, day) {
            return out;
        }
    }
    s.to_string()
}

/// Trims surrounding whitespace, then applies date and number rewriting.
pub fn normalize_cell(s: &str) -> String {
    let trimmed = s.trim();
    normalize_number_token(&normalize_date_token(trimmed))
}

/// True when `s` is a plain decimal number (optionally signed, optional
/// fraction). Used by type inference and answer normalization.
pub fn is_decimal(s: &str) -> bool {
    DECIMAL.is_match(s)
}

/// True when `s` is a canonical YYYY-MM-DD rendering.
pub fn is_iso_date(s: &str) -> bool {
    ISO_DATE.is_match(s)
}

/// Lowercases, folds non-alphanumeric runs to single underscores, prefixes
/// a leading digit with `c_`, maps empty results to `col`, and appends a
/// numeric suffix while the candidate collides with `taken`.
pub fn sanitize_identifier(display_name: &str, taken: &HashSet<String>) -> String {
    let mut out = String::new();
    let mut pending_sep = false;
    for ch in display_name.chars() {
        if ch.is_ascii_alphanumeric() {
            if pending_sep && !out.is_empty() {
                out.push('_');
            }
            pending_sep = false;
            out.push(ch.to_ascii_lowercase());
        } else {
            pending_sep = true;
        }
    }
    if out.is_empty() {
        out = "col".to_string();
    }
    if out.starts_with(|c: char| c.is_ascii_digit()) {
        out = format!("c_{out}");
    }
    if !taken.contains(&out) {
        return out;
    }
    let mut n = 2;
    loop {
        let candidate = format!("{out}_{n}");
        if !taken.contains(&candidate) {
            return candidate;
        }
        n += 1;
    }
}

/// NUMBER if every non-empty cell parses as a decimal, DATE if every
/// non-empty cell is a canonical date, otherwise TEXT. Columns with no
/// non-empty cells stay TEXT.
pub fn infer_column_type<'a>(cells: impl Iterator<Item = &'a str>) -> CellType {
    let mut saw_any = false;
    let mut all_number = true;
    let mut all_date = true;
    for cell in cells {
        if cell.is_empty() {
            continue;
        }
        saw_any = true;
        if !is_decimal(cell) {
            all_number = false;
        }
        if !is_iso_date(cell) {
            all_date = false;
        }
        if !all_number && !all_date {
            return CellType::Text;
        }
    }
    if !saw_any {
        CellType::Text
    } else if all_number {
        CellType::Number
    } else if all_date {
        CellType::Date
    } else {
        CellType::Text
    }
}

/// Normalizes every cell, reassigns sanitized SQL names, and recomputes
/// inferred types. Shape, title, and row order are preserved.
pub fn preprocess_table(t: &Table) -> Result<Table, InvalidTable> {
    let violations = validate(t);
    if !violations.is_empty() {
        let reasons = violations
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join("; ");
        return Err(InvalidTable {
            reasons,
            violations,
        });
    }
    let rows: Vec<Vec<String>> = t
        .rows
        .iter()
        .map(|row| row.iter().map(|c| normalize_cell(c)).collect())
        .collect();
    let mut taken = HashSet::new();
    let columns = t
        .columns
        .iter()
        .enumerate()
        .map(|(i, col)| {
            let sql_name = sanitize_identifier(&col.display_name, &taken);
            taken.insert(sql_name.clone());
            ColumnSpec {
                display_name: col.display_name.clone(),
                sql_name,
                inferred_type: infer_column_type(
                    rows.iter().filter_map(|r| r.get(i).map(|s| s.as_str())),
                ),
            }
        })
        .collect();
    Ok(Table {
        title: t.title.clone(),
        columns,
        rows,
        source_id: t.source_id.clone(),
    })
}
