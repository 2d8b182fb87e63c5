//! Two-stage table reasoning over relational sub-tables.
//!
//! Given a table and a question (or a statement to verify), the pipeline
//! first asks a language model for a SQL query that extracts the minimal
//! sub-table needed, executes it on an embedded store with validation and
//! fallbacks, then asks the model to answer from the sub-table alone. The
//! crate also ships the full offline evaluation harness: exact match with
//! pre-matching normalization, fact-verification accuracy, ROUGE, table
//! reduction statistics, and token-cutoff experiments.

pub mod corpus;
pub mod eval;
pub mod llm;
pub mod normalize;
pub mod pipeline;
pub mod prompt;
pub mod sql;
pub mod table;

pub use pipeline::{run_dataset, run_instance, PipelineConfig, PipelineOutput, Strategy};
pub use table::{QAInstance, SubTable, Table, TaskKind};
