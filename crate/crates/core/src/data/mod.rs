//! Categorical datasets with explicit missing cells.

mod cohort;
mod missing;
mod split;
mod table;

use thiserror::Error;

use crate::bn::{BnError, Variable};

pub use cohort::{CohortSchema, VariableRole, HOSPITAL, TARGET};
pub use missing::{inject_missing, missing_probabilities, Mechanism, MissingnessSpec};
pub use split::train_test_split;
pub use table::{infer_variables, read_table, read_table_str, write_table, write_table_string, DEFAULT_MISSING_TOKEN};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("header mismatch: {0}")]
    HeaderMismatch(String),
    #[error("row {row}, column `{column}`: unknown label `{label}`")]
    UnknownLabel { row: usize, column: String, label: String },
    #[error("row {row} has {found} cells, expected {expected}")]
    Ragged { row: usize, found: usize, expected: usize },
    #[error("record {row}, column {column}: state {state} out of range")]
    InvalidState { row: usize, column: usize, state: usize },
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("schema line {line}: {message}")]
    Schema { line: usize, message: String },
    #[error(transparent)]
    Bn(#[from] BnError),
}

pub type Result<T> = std::result::Result<T, DataError>;

/// A cell holds a state index or nothing.
pub type Cell = Option<usize>;

/// Table of categorical records. Column `i` holds states of `variables[i]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Dataset {
    variables: Vec<Variable>,
    records: Vec<Vec<Cell>>,
}

impl Dataset {
    pub fn new(variables: Vec<Variable>, records: Vec<Vec<Cell>>) -> Result<Self> {
        for (r, rec) in records.iter().enumerate() {
            if rec.len() != variables.len() {
                return Err(DataError::Ragged {
                    row: r,
                    found: rec.len(),
                    expected: variables.len(),
                });
            }
            for (c, (cell, var)) in rec.iter().zip(&variables).enumerate() {
                if let Some(s) = *cell {
                    if s >= var.cardinality() {
                        return Err(DataError::InvalidState { row: r, column: c, state: s });
                    }
                }
            }
        }
        Ok(Dataset { variables, records })
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn records(&self) -> &[Vec<Cell>] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn width(&self) -> usize {
        self.variables.len()
    }

    pub fn names(&self) -> Vec<String> {
        self.variables.iter().map(|v| v.name().to_string()).collect()
    }

    pub fn cardinalities(&self) -> Vec<usize> {
        self.variables.iter().map(Variable::cardinality).collect()
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.variables
            .iter()
            .position(|v| v.name() == name)
            .ok_or_else(|| DataError::UnknownVariable(name.to_string()))
    }

    pub fn is_complete(&self) -> bool {
        self.records.iter().all(|r| r.iter().all(Option::is_some))
    }

    pub fn missing_count(&self) -> usize {
        self.records.iter().flatten().filter(|c| c.is_none()).count()
    }

    /// Records at `indices`, in that order (repeats allowed).
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            variables: self.variables.clone(),
            records: indices.iter().map(|&i| self.records[i].clone()).collect(),
        }
    }

    pub fn concat(&self, other: &Dataset) -> Result<Dataset> {
        if self.variables != other.variables {
            return Err(DataError::Precondition("datasets have different variables".into()));
        }
        let mut records = self.records.clone();
        records.extend(other.records.iter().cloned());
        Ok(Dataset {
            variables: self.variables.clone(),
            records,
        })
    }

    pub fn with_records(&self, records: Vec<Vec<Cell>>) -> Result<Dataset> {
        Dataset::new(self.variables.clone(), records)
    }
}
