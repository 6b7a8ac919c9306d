//! Turning solver assignments into gapped rows, and back.

use thiserror::Error;

use crate::qubo::CafProblem;
use crate::solver::{check_feasible, SolverError, Violation};

pub const GAP: u8 = b'-';

#[derive(Debug, Error, PartialEq)]
pub enum DecodeError {
    #[error("assignment violates {} constraint(s), first: {:?}", .0.len(), .0.first())]
    Infeasible(Vec<Violation>),
    #[error("{0} rows given for a problem with {1} sequences")]
    RowCount(usize, usize),
    #[error("row {row} has width {got}, expected {expected}")]
    Width { row: usize, got: usize, expected: usize },
    #[error("row {row} holds {got} residues, expected {expected}")]
    ResidueCount { row: usize, got: usize, expected: usize },
    #[error(transparent)]
    Solver(#[from] SolverError),
}

/// Equal-width gapped rows with their record ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlignmentBlock {
    pub ids: Vec<String>,
    pub rows: Vec<String>,
}

impl AlignmentBlock {
    pub fn new(ids: Vec<String>, rows: Vec<String>) -> Self {
        assert_eq!(ids.len(), rows.len(), "one id per row");
        Self { ids, rows }
    }

    /// Width of the first row; zero for an empty block.
    pub fn width(&self) -> usize {
        self.rows.first().map_or(0, String::len)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn is_uniform(&self) -> bool {
        let w = self.width();
        self.rows.iter().all(|r| r.len() == w)
    }

    pub fn row_of(&self, id: &str) -> Option<&str> {
        self.ids.iter().position(|i| i == id).map(|i| self.rows[i].as_str())
    }

    /// Rows as a whitespace-padded table, ids left-aligned.
    pub fn to_table(&self) -> String {
        let id_width = self.ids.iter().map(String::len).max().unwrap_or(0);
        let mut out = String::new();
        for (id, row) in self.ids.iter().zip(&self.rows) {
            out.push_str(&format!("{id:<id_width$}"));
            for ch in row.chars() {
                out.push(' ');
                out.push(ch);
            }
            out.push('\n');
        }
        out
    }
}

pub fn degap(row: &str) -> String {
    row.bytes().filter(|&b| b != GAP).map(char::from).collect()
}

/// Reads the rows of a feasible assignment: column `c` of row `s` is the
/// residue placed there, or a gap.
pub fn decode_assignment<S: AsRef<str>>(
    assignment: &[bool],
    problem: &CafProblem,
    ids: &[String],
    sequences: &[S],
) -> Result<AlignmentBlock, DecodeError> {
    if sequences.len() != problem.seq_count() || ids.len() != problem.seq_count() {
        return Err(DecodeError::RowCount(sequences.len(), problem.seq_count()));
    }
    let feasibility = check_feasible(assignment, problem)?;
    if !feasibility.is_feasible() {
        return Err(DecodeError::Infeasible(feasibility.violations));
    }
    let cols = problem.columns();
    let rows = sequences
        .iter()
        .enumerate()
        .map(|(s, seq)| {
            let residues = seq.as_ref().as_bytes();
            let mut row = vec![GAP; cols];
            for (n, &residue) in residues.iter().enumerate() {
                let c = (0..cols)
                    .find(|&c| assignment[problem.var_index(s, n, c)])
                    .expect("feasible assignment places every element");
                row[c] = residue;
            }
            String::from_utf8(row).expect("ascii residues")
        })
        .collect();
    Ok(AlignmentBlock::new(ids.to_vec(), rows))
}

/// Inverse of [`decode_assignment`]: the assignment whose decoding yields
/// `rows`.
pub fn encode_rows<S: AsRef<str>>(rows: &[S], problem: &CafProblem) -> Result<Vec<bool>, DecodeError> {
    if rows.len() != problem.seq_count() {
        return Err(DecodeError::RowCount(rows.len(), problem.seq_count()));
    }
    let mut x = vec![false; problem.num_vars()];
    for (s, row) in rows.iter().enumerate() {
        let row = row.as_ref().as_bytes();
        if row.len() != problem.columns() {
            return Err(DecodeError::Width {
                row: s,
                got: row.len(),
                expected: problem.columns(),
            });
        }
        let columns: Vec<usize> = (0..row.len()).filter(|&c| row[c] != GAP).collect();
        if columns.len() != problem.lengths()[s] {
            return Err(DecodeError::ResidueCount {
                row: s,
                got: columns.len(),
                expected: problem.lengths()[s],
            });
        }
        for (n, c) in columns.into_iter().enumerate() {
            x[problem.var_index(s, n, c)] = true;
        }
    }
    Ok(x)
}
