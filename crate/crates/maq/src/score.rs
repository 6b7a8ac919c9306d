//! Sum-of-pairs evaluation of finished alignments.
//!
//! Every pair of rows contributes 1 in a column where both hold residues
//! and the residues differ. Residue/gap and gap/gap pairs contribute 0.

use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

use crate::decode::{AlignmentBlock, GAP};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ScoreError {
    #[error("row {row} has width {got}, expected {expected}")]
    RaggedBlock { row: usize, got: usize, expected: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ScoreReport {
    pub per_column: Vec<u64>,
    pub total: u64,
}

impl ScoreReport {
    /// `column\tscore` header, one line per one-based column, then the total.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("column\tscore\n");
        for (c, s) in self.per_column.iter().enumerate() {
            let _ = writeln!(out, "{}\t{s}", c + 1);
        }
        let _ = writeln!(out, "total\t{}", self.total);
        out
    }
}

fn check_uniform(block: &AlignmentBlock) -> Result<usize, ScoreError> {
    let width = block.width();
    for (row, r) in block.rows.iter().enumerate() {
        if r.len() != width {
            return Err(ScoreError::RaggedBlock {
                row,
                got: r.len(),
                expected: width,
            });
        }
    }
    Ok(width)
}

pub fn score_alignment(block: &AlignmentBlock) -> Result<ScoreReport, ScoreError> {
    let width = check_uniform(block)?;
    let rows: Vec<&[u8]> = block.rows.iter().map(|r| r.as_bytes()).collect();
    let per_column: Vec<u64> = (0..width)
        .map(|c| {
            let mut score = 0;
            for (i, a) in rows.iter().enumerate() {
                for b in &rows[i + 1..] {
                    let (x, y) = (a[c], b[c]);
                    if x != GAP && y != GAP && x != y {
                        score += 1;
                    }
                }
            }
            score
        })
        .collect();
    let total = per_column.iter().sum();
    Ok(ScoreReport { per_column, total })
}

/// Column sum-of-pairs cost with a residue/gap charge: mismatch 1,
/// residue against gap `gap_cost`, matches and gap pairs 0.
pub fn gapped_pair_cost(block: &AlignmentBlock, gap_cost: f64) -> Result<f64, ScoreError> {
    let width = check_uniform(block)?;
    let rows: Vec<&[u8]> = block.rows.iter().map(|r| r.as_bytes()).collect();
    let mut cost = 0.0;
    for c in 0..width {
        for (i, a) in rows.iter().enumerate() {
            for b in &rows[i + 1..] {
                cost += match (a[c] == GAP, b[c] == GAP) {
                    (true, true) => 0.0,
                    (true, false) | (false, true) => gap_cost,
                    (false, false) if a[c] != b[c] => 1.0,
                    (false, false) => 0.0,
                };
            }
        }
    }
    Ok(cost)
}
