//! Embedded relational store. Each pipeline instance gets a private
//! in-memory SQLite database holding one relation `w`; NUMBER columns get
//! numeric affinity so comparisons and ORDER BY behave numerically.

use rusqlite::types::ValueRef;
use rusqlite::Connection;
use std::sync::mpsc;
use std::time::Duration;
use thiserror::Error;

use crate::table::{CellType, SubTable, Table};

use super::SqlQuery;

#[derive(Debug, Error)]
#[error("store error: {0}")]
pub struct StoreError(pub String);

#[derive(Debug, Error)]
pub enum ExecError {
    #[error("sql execution failed: {0}")]
    Sql(String),
    #[error("query timed out")]
    Timeout,
}

pub const DEFAULT_QUERY_TIMEOUT: Duration = Duration::from_secs(5);

pub struct TableStore {
    conn: Connection,
    timeout: Duration,
}

impl TableStore {
    /// Loads a preprocessed table into a fresh in-memory store as relation
    /// `w`, one row per table row.
    pub fn materialize(t: &Table) -> Result<Self, StoreError> {
        Self::materialize_with_timeout(t, DEFAULT_QUERY_TIMEOUT)
    }

    pub fn materialize_with_timeout(t: &Table, timeout: Duration) -> Result<Self, StoreError> {
        let conn = Connection::open_in_memory().map_err(|e| StoreError(e.to_string()))?;
        let decls: Vec<String> = t
            .columns
            .iter()
            .map(|c| {
                let affinity = match c.inferred_type {
                    CellType::Number => "NUMERIC",
                    CellType::Text | CellType::Date => "TEXT",
                };
                format!("\"{}\" {affinity}", c.sql_name)
            })
            .collect();
        let ddl = format!("CREATE TABLE w ({})", decls.join(", "));
        conn.execute(&ddl, [])
            .map_err(|e| StoreError(e.to_string()))?;
        let placeholders = vec!["?"; t.columns.len()].join(", ");
        let insert = format!("INSERT INTO w VALUES ({placeholders})");
        {
            let mut stmt = conn
                .prepare(&insert)
                .map_err(|e| StoreError(e.to_string()))?;
            for row in &t.rows {
                stmt.execute(rusqlite::params_from_iter(row.iter()))
                    .map_err(|e| StoreError(e.to_string()))?;
            }
        }
        Ok(TableStore { conn, timeout })
    }

    /// Runs a validated SELECT and collects the result grid. Execution is
    /// interrupted once the configured timeout elapses.
    pub fn execute(&self, q: &SqlQuery) -> Result<SubTable, ExecError> {
        self.run_select(&q.text)
    }

    /// The current full body of `w`, in insertion order.
    pub fn snapshot(&self) -> Result<SubTable, ExecError> {
        self.run_select("SELECT * FROM w")
    }

    fn run_select(&self, sql: &str) -> Result<SubTable, ExecError> {
        let interrupter = self.conn.get_interrupt_handle();
        let (done_tx, done_rx) = mpsc::channel::<()>();
        let timeout = self.timeout;
        let watchdog = std::thread::spawn(move || {
            if done_rx.recv_timeout(timeout).is_err() {
                interrupter.interrupt();
            }
        });
        let result = self.collect(sql);
        let _ = done_tx.send(());
        let _ = watchdog.join();
        result
    }

    fn collect(&self, sql: &str) -> Result<SubTable, ExecError> {
        let mut stmt = self.conn.prepare(sql).map_err(map_exec_err)?;
        let columns: Vec<String> = stmt.column_names().iter().map(|s| s.to_string()).collect();
        let ncols = columns.len();
        let mut rows = stmt.query([]).map_err(map_exec_err)?;
        let mut grid: Vec<Vec<String>> = Vec::new();
        loop {
            match rows.next() {
                Ok(Some(row)) => {
                    let mut out = Vec::with_capacity(ncols);
                    for i in 0..ncols {
                        out.push(render_value(row.get_ref(i).map_err(map_exec_err)?));
                    }
                    grid.push(out);
                }
                Ok(None) => break,
                Err(e) => return Err(map_exec_err(e)),
            }
        }
        let mut sub = SubTable::new(columns, grid);
        sub.provenance_sql = Some(sql.to_string());
        Ok(sub)
    }
}

fn map_exec_err(e: rusqlite::Error) -> ExecError {
    if let rusqlite::Error::SqliteFailure(err, _) = &e {
        if err.code == rusqlite::ErrorCode::OperationInterrupted {
            return ExecError::Timeout;
        }
    }
    ExecError::Sql(e.to_string())
}

/// Renders a stored value as cell text. NULL becomes the empty string,
/// matching the "missing = empty text" convention.
fn render_value(v: ValueRef<'_>) -> String {
    match v {
        ValueRef::Null => String::new(),
        ValueRef::Integer(i) => i.to_string(),
        ValueRef::Real(f) => f.to_string(),
        ValueRef::Text(t) => String::from_utf8_lossy(t).into_owned(),
        ValueRef::Blob(b) => hex::encode(b),
    }
}
