//! Progressive merging of cluster alignments through a shared anchor row.
//!
//! Each new cluster is aligned together with the center of the previous
//! cluster. The two copies of that anchor usually carry different gap
//! patterns; reconciling them takes the union of both patterns, and the
//! gap columns inserted into an anchor are inserted into every row of its
//! block.

use thiserror::Error;

use crate::decode::{degap, AlignmentBlock, GAP};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MergeError {
    #[error("anchor rows hold different residues: '{0}' vs '{1}'")]
    AnchorMismatch(String, String),
    #[error("record '{0}' is not present in the block")]
    MissingRow(String),
    #[error("rows have unequal widths after gap insertion")]
    WidthMismatch,
}

/// Gap columns to insert into every row of one block, as
/// `(position, count)` pairs in the block's current coordinates.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GapScript {
    pub insertions: Vec<(usize, usize)>,
}

impl GapScript {
    pub fn is_empty(&self) -> bool {
        self.insertions.is_empty()
    }

    pub fn added_width(&self) -> usize {
        self.insertions.iter().map(|&(_, n)| n).sum()
    }

    pub fn apply(&self, row: &str) -> String {
        let bytes = row.as_bytes();
        let mut out = Vec::with_capacity(bytes.len() + self.added_width());
        let mut cursor = 0;
        for &(pos, count) in &self.insertions {
            out.extend_from_slice(&bytes[cursor..pos]);
            out.extend(std::iter::repeat_n(GAP, count));
            cursor = pos;
        }
        out.extend_from_slice(&bytes[cursor..]);
        String::from_utf8(out).expect("ascii rows")
    }

    pub fn apply_block(&self, block: &AlignmentBlock) -> AlignmentBlock {
        AlignmentBlock::new(block.ids.clone(), block.rows.iter().map(|r| self.apply(r)).collect())
    }
}

fn gap_run(row: &[u8], from: usize) -> usize {
    row[from..].iter().take_while(|&&b| b == GAP).count()
}

/// Scripts that make two gapped copies of one sequence identical.
///
/// Before every residue, and after the last, the side with the shorter
/// gap run receives the difference, inserted directly before that residue.
pub fn reconcile_anchor(merged: &str, new: &str) -> Result<(GapScript, GapScript), MergeError> {
    let mismatch = || MergeError::AnchorMismatch(degap(merged), degap(new));
    let (a, b) = (merged.as_bytes(), new.as_bytes());
    let (mut ia, mut ib) = (0, 0);
    let mut script_a = GapScript::default();
    let mut script_b = GapScript::default();
    loop {
        let (ga, gb) = (gap_run(a, ia), gap_run(b, ib));
        let (pa, pb) = (ia + ga, ib + gb);
        if ga < gb {
            script_a.insertions.push((pa, gb - ga));
        } else if gb < ga {
            script_b.insertions.push((pb, ga - gb));
        }
        match (pa == a.len(), pb == b.len()) {
            (true, true) => break,
            (false, false) if a[pa] == b[pb] => {
                ia = pa + 1;
                ib = pb + 1;
            }
            _ => return Err(mismatch()),
        }
    }
    Ok((script_a, script_b))
}

/// Sequences entering one cluster's problem: the members, then the previous
/// center when there is one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterInput {
    pub ids: Vec<String>,
    pub sequences: Vec<String>,
    /// Index of the anchor within `ids`, if appended.
    pub anchor: Option<usize>,
}

/// `anchor` is the previous center as `(id, residues)`; see
/// [`ProgressiveState::anchor`].
pub fn append_anchor(
    member_ids: Vec<String>,
    member_sequences: Vec<String>,
    anchor: Option<(String, String)>,
) -> ClusterInput {
    let mut ids = member_ids;
    let mut sequences = member_sequences;
    let anchor = anchor.map(|(id, residues)| {
        ids.push(id);
        sequences.push(residues);
        ids.len() - 1
    });
    ClusterInput { ids, sequences, anchor }
}

/// Everything aligned so far, plus the anchor the next cluster must carry.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProgressiveState {
    pub merged: AlignmentBlock,
    pub anchor_id: String,
}

impl ProgressiveState {
    pub fn new(block: AlignmentBlock, anchor_id: impl Into<String>) -> Result<Self, MergeError> {
        let anchor_id = anchor_id.into();
        if block.row_of(&anchor_id).is_none() {
            return Err(MergeError::MissingRow(anchor_id));
        }
        Ok(Self {
            merged: block,
            anchor_id,
        })
    }

    /// The anchor's id and ungapped residues.
    pub fn anchor(&self) -> (String, String) {
        (self.anchor_id.clone(), degap(self.anchor_row()))
    }

    pub fn anchor_row(&self) -> &str {
        self.merged
            .row_of(&self.anchor_id)
            .expect("anchor row present by construction")
    }
}

/// Folds `new_block`, which must contain the current anchor, into the
/// state. The newer copy of the anchor is dropped and `new_center` becomes
/// the next anchor.
pub fn merge_blocks(
    state: ProgressiveState,
    new_block: &AlignmentBlock,
    new_center: &str,
) -> Result<ProgressiveState, MergeError> {
    let new_anchor = new_block
        .row_of(&state.anchor_id)
        .ok_or_else(|| MergeError::MissingRow(state.anchor_id.clone()))?;
    if new_block.row_of(new_center).is_none() {
        return Err(MergeError::MissingRow(new_center.to_string()));
    }
    let (script_old, script_new) = reconcile_anchor(state.anchor_row(), new_anchor)?;
    let old = script_old.apply_block(&state.merged);
    let new = script_new.apply_block(new_block);
    if old.row_of(&state.anchor_id) != new.row_of(&state.anchor_id) {
        return Err(MergeError::WidthMismatch);
    }

    let mut ids = old.ids;
    let mut rows = old.rows;
    for (id, row) in new.ids.into_iter().zip(new.rows) {
        if id != state.anchor_id {
            ids.push(id);
            rows.push(row);
        }
    }
    let merged = AlignmentBlock::new(ids, rows);
    if !merged.is_uniform() {
        return Err(MergeError::WidthMismatch);
    }
    ProgressiveState::new(merged, new_center)
}
