//! Independent brute-force interpreter and random query generator used to
//! check the SQL engine. Deliberately shares no code with the engine: it
//! evaluates the query AST directly over the table's row vectors.

use rand::rngs::StdRng;
use rand::Rng;
use subtab_core::normalize::preprocess_table;
use subtab_core::table::{CellType, Table};

const WORDS: [&str; 8] = [
    "ash", "birch", "cedar", "drift", "elm", "fern", "grove", "heath",
];
const NAMES: [&str; 8] = [
    "alpha", "bravo", "charlie", "delta", "echo", "foxtrot", "golf", "hotel",
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    fn sql(self) -> &'static str {
        match self {
            CmpOp::Eq => "=",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }
}

#[derive(Debug, Clone)]
pub enum CondValue {
    Num(f64),
    Text(String),
}

#[derive(Debug, Clone)]
pub struct Cond {
    pub col: usize,
    pub op: CmpOp,
    pub value: CondValue,
}

#[derive(Debug, Clone, Copy)]
pub enum Agg {
    CountStar,
    Count(usize),
    Sum(usize),
    Avg(usize),
    Min(usize),
    Max(usize),
}

#[derive(Debug, Clone)]
pub enum Shape {
    Projection(Vec<usize>),
    Aggregate(Agg),
    GroupBy { key: usize, agg: Agg },
}

#[derive(Debug, Clone)]
pub struct GenQuery {
    pub shape: Shape,
    pub conds: Vec<Cond>,
}

fn render_num(v: f64) -> String {
    if v.fract() == 0.0 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}

impl GenQuery {
    pub fn to_sql(&self, table: &Table) -> String {
        let name = |i: usize| table.columns[i].sql_name.clone();
        let agg_sql = |agg: &Agg| match agg {
            Agg::CountStar => "COUNT(*)".to_string(),
            Agg::Count(i) => format!("COUNT({})", name(*i)),
            Agg::Sum(i) => format!("SUM({})", name(*i)),
            Agg::Avg(i) => format!("AVG({})", name(*i)),
            Agg::Min(i) => format!("MIN({})", name(*i)),
            Agg::Max(i) => format!("MAX({})", name(*i)),
        };
        let select = match &self.shape {
            Shape::Projection(cols) => cols.iter().map(|c| name(*c)).collect::<Vec<_>>().join(", "),
            Shape::Aggregate(agg) => agg_sql(agg),
            Shape::GroupBy { key, agg } => format!("{}, {}", name(*key), agg_sql(agg)),
        };
        let mut sql = format!("SELECT {select} FROM w");
        if !self.conds.is_empty() {
            let parts: Vec<String> = self
                .conds
                .iter()
                .map(|c| match &c.value {
                    CondValue::Num(v) => {
                        format!("{} {} {}", name(c.col), c.op.sql(), render_num(*v))
                    }
                    CondValue::Text(t) => {
                        format!("{} {} '{}'", name(c.col), c.op.sql(), t.replace('\'', "''"))
                    }
                })
                .collect();
            sql.push_str(&format!(" WHERE {}", parts.join(" AND ")));
        }
        if let Shape::GroupBy { key, .. } = &self.shape {
            sql.push_str(&format!(" GROUP BY {}", name(*key)));
        }
        sql
    }
}

pub fn gen_table(rng: &mut StdRng) -> Table {
    let n_cols = rng.gen_range(1..=8);
    let n_rows = rng.gen_range(0..=30);
    let numeric: Vec<bool> = (0..n_cols).map(|_| rng.gen_bool(0.5)).collect();
    let header: Vec<String> = NAMES[..n_cols].iter().map(|s| s.to_string()).collect();
    let rows: Vec<Vec<String>> = (0..n_rows)
        .map(|_| {
            (0..n_cols)
                .map(|c| {
                    if numeric[c] {
                        if rng.gen_bool(0.7) {
                            rng.gen_range(-50i64..200).to_string()
                        } else {
                            format!("{:.2}", rng.gen_range(-5000i64..20000) as f64 / 100.0)
                        }
                    } else if rng.gen_bool(0.1) {
                        String::new()
                    } else {
                        WORDS[rng.gen_range(0..WORDS.len())].to_string()
                    }
                })
                .collect()
        })
        .collect();
    let raw = Table::from_parts(None, header, rows, None);
    preprocess_table(&raw).expect("generated table is valid")
}

fn number_columns(table: &Table) -> Vec<usize> {
    table
        .columns
        .iter()
        .enumerate()
        .filter(|(_, c)| c.inferred_type == CellType::Number)
        .map(|(i, _)| i)
        .collect()
}

fn gen_agg(rng: &mut StdRng, table: &Table) -> Agg {
    let numbers = number_columns(table);
    let any = rng.gen_range(0..table.columns.len());
    match rng.gen_range(0..6) {
        0 => Agg::CountStar,
        1 => Agg::Count(any),
        2 if !numbers.is_empty() => Agg::Sum(numbers[rng.gen_range(0..numbers.len())]),
        3 if !numbers.is_empty() => Agg::Avg(numbers[rng.gen_range(0..numbers.len())]),
        4 => Agg::Min(any),
        5 => Agg::Max(any),
        _ => Agg::CountStar,
    }
}

fn gen_cond(rng: &mut StdRng, table: &Table) -> Cond {
    let col = rng.gen_range(0..table.columns.len());
    if table.columns[col].inferred_type == CellType::Number {
        let op = [CmpOp::Eq, CmpOp::Ne, CmpOp::Lt, CmpOp::Le, CmpOp::Gt, CmpOp::Ge]
            [rng.gen_range(0..6)];
        // bias toward values present in the column so conditions match rows
        let value = if !table.rows.is_empty() && rng.gen_bool(0.6) {
            let row = rng.gen_range(0..table.rows.len());
            table.rows[row][col].parse::<f64>().unwrap()
        } else {
            rng.gen_range(-60i64..210) as f64
        };
        Cond {
            col,
            op,
            value: CondValue::Num(value),
        }
    } else {
        let op = if rng.gen_bool(0.5) { CmpOp::Eq } else { CmpOp::Ne };
        let value = if !table.rows.is_empty() && rng.gen_bool(0.6) {
            table.rows[rng.gen_range(0..table.rows.len())][col].clone()
        } else {
            WORDS[rng.gen_range(0..WORDS.len())].to_string()
        };
        Cond {
            col,
            op,
            value: CondValue::Text(value),
        }
    }
}

/// Random query from the grammar: projection, conjunctive comparisons on at
/// most two columns, a single aggregate, or a single GROUP BY.
pub fn gen_query(rng: &mut StdRng, table: &Table) -> GenQuery {
    let n_cols = table.columns.len();
    let shape = match rng.gen_range(0..3) {
        0 => {
            let mut cols: Vec<usize> = (0..n_cols).collect();
            for i in (1..cols.len()).rev() {
                cols.swap(i, rng.gen_range(0..=i));
            }
            cols.truncate(rng.gen_range(1..=n_cols));
            Shape::Projection(cols)
        }
        1 => Shape::Aggregate(gen_agg(rng, table)),
        _ => Shape::GroupBy {
            key: rng.gen_range(0..n_cols),
            agg: gen_agg(rng, table),
        },
    };
    let conds = (0..rng.gen_range(0..=2)).map(|_| gen_cond(rng, table)).collect();
    GenQuery { shape, conds }
}

fn passes(row: &[String], conds: &[Cond], table: &Table) -> bool {
    conds.iter().all(|c| {
        let cell = &row[c.col];
        match &c.value {
            CondValue::Num(v) => {
                let x: f64 = match cell.parse() {
                    Ok(x) => x,
                    Err(_) => return false,
                };
                match c.op {
                    CmpOp::Eq => x == *v,
                    CmpOp::Ne => x != *v,
                    CmpOp::Lt => x < *v,
                    CmpOp::Le => x <= *v,
                    CmpOp::Gt => x > *v,
                    CmpOp::Ge => x >= *v,
                }
            }
            CondValue::Text(t) => {
                let _ = table;
                match c.op {
                    CmpOp::Eq => cell == t,
                    CmpOp::Ne => cell != t,
                    _ => unreachable!("text conditions are equality only"),
                }
            }
        }
    })
}

fn apply_agg(rows: &[&Vec<String>], agg: &Agg, table: &Table) -> String {
    let numeric = |i: usize| table.columns[i].inferred_type == CellType::Number;
    match agg {
        Agg::CountStar => rows.len().to_string(),
        Agg::Count(i) => {
            // empty-string cells are values, not NULLs
            let _ = i;
            rows.len().to_string()
        }
        Agg::Sum(i) => {
            if rows.is_empty() {
                String::new()
            } else {
                let sum: f64 = rows.iter().map(|r| r[*i].parse::<f64>().unwrap()).sum();
                sum.to_string()
            }
        }
        Agg::Avg(i) => {
            if rows.is_empty() {
                String::new()
            } else {
                let sum: f64 = rows.iter().map(|r| r[*i].parse::<f64>().unwrap()).sum();
                (sum / rows.len() as f64).to_string()
            }
        }
        Agg::Min(i) => {
            if rows.is_empty() {
                String::new()
            } else if numeric(*i) {
                let v = rows
                    .iter()
                    .map(|r| r[*i].parse::<f64>().unwrap())
                    .fold(f64::INFINITY, f64::min);
                v.to_string()
            } else {
                rows.iter().map(|r| r[*i].clone()).min().unwrap()
            }
        }
        Agg::Max(i) => {
            if rows.is_empty() {
                String::new()
            } else if numeric(*i) {
                let v = rows
                    .iter()
                    .map(|r| r[*i].parse::<f64>().unwrap())
                    .fold(f64::NEG_INFINITY, f64::max);
                v.to_string()
            } else {
                rows.iter().map(|r| r[*i].clone()).max().unwrap()
            }
        }
    }
}

#[derive(PartialEq, Eq, PartialOrd, Ord)]
enum GroupKey {
    Num(u64),
    Text(String),
}

/// Evaluates the query over the table's row vectors, independently of the
/// SQL engine. Returns the result grid.
pub fn brute_force(table: &Table, q: &GenQuery) -> Vec<Vec<String>> {
    let kept: Vec<&Vec<String>> = table
        .rows
        .iter()
        .filter(|r| passes(r, &q.conds, table))
        .collect();
    match &q.shape {
        Shape::Projection(cols) => kept
            .iter()
            .map(|r| cols.iter().map(|c| r[*c].clone()).collect())
            .collect(),
        Shape::Aggregate(agg) => vec![vec![apply_agg(&kept, agg, table)]],
        Shape::GroupBy { key, agg } => {
            let numeric = table.columns[*key].inferred_type == CellType::Number;
            let mut groups: std::collections::BTreeMap<GroupKey, Vec<&Vec<String>>> =
                std::collections::BTreeMap::new();
            for row in kept {
                let k = if numeric {
                    let v: f64 = row[*key].parse().unwrap();
                    let v = if v == 0.0 { 0.0 } else { v };
                    GroupKey::Num(v.to_bits())
                } else {
                    GroupKey::Text(row[*key].clone())
                };
                groups.entry(k).or_default().push(row);
            }
            groups
                .values()
                .map(|rows| {
                    let key_cell = rows[0][*key].clone();
                    vec![key_cell, apply_agg(rows, agg, table)]
                })
                .collect()
        }
    }
}

/// Order-insensitive grid comparison; numeric cells compare by value so
/// that `5`, `5.0`, and `5.00` are the same cell.
pub fn grids_equal(a: &[Vec<String>], b: &[Vec<String>]) -> bool {
    fn canonical(grid: &[Vec<String>]) -> Vec<Vec<String>> {
        let mut rows: Vec<Vec<String>> = grid
            .iter()
            .map(|row| {
                row.iter()
                    .map(|cell| match cell.parse::<f64>() {
                        Ok(v) if v.is_finite() => {
                            let v = if v == 0.0 { 0.0 } else { v };
                            format!("{:.10e}", v)
                        }
                        _ => cell.clone(),
                    })
                    .collect()
            })
            .collect();
        rows.sort();
        rows
    }
    canonical(a) == canonical(b)
}
