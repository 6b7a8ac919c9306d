//! Bottom-k MinHash sketches and the Mash distance estimator.

use std::collections::HashSet;

use thiserror::Error;
use twox_hash::XxHash64;

use crate::seqio::{Alphabet, SequenceRecord};

pub const DEFAULT_DISTANCE_CAP: f64 = 1.0;

#[derive(Debug, Error, PartialEq)]
pub enum SketchError {
    #[error("record '{id}' has length {len}, shorter than k = {k}")]
    SequenceTooShort { id: String, len: usize, k: usize },
    #[error("sketches were built with different parameters")]
    ParamMismatch,
    #[error("invalid sketch parameters: {0}")]
    InvalidParams(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SketchParams {
    pub k: usize,
    pub sketch_size: usize,
    pub hash_seed: u64,
}

impl SketchParams {
    pub fn new(k: usize, sketch_size: usize, hash_seed: u64) -> Result<Self, SketchError> {
        if k == 0 {
            return Err(SketchError::InvalidParams("k must be at least 1"));
        }
        if sketch_size == 0 {
            return Err(SketchError::InvalidParams("sketch size must be at least 1"));
        }
        Ok(Self {
            k,
            sketch_size,
            hash_seed,
        })
    }

    pub fn for_alphabet(alphabet: Alphabet, hash_seed: u64) -> Self {
        match alphabet {
            Alphabet::Protein => Self {
                k: 4,
                sketch_size: 64,
                hash_seed,
            },
            Alphabet::Nucleotide => Self {
                k: 16,
                sketch_size: 1000,
                hash_seed,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KmerSketch {
    pub record_id: String,
    pub params: SketchParams,
    /// Strictly increasing.
    pub min_hashes: Vec<u64>,
    /// Distinct k-mers in the source sequence.
    pub kmer_count: usize,
}

/// Builds the bottom-`sketch_size` sketch of a record's distinct k-mers.
///
/// `U` is folded onto `T` before hashing so RNA and DNA inputs share k-mers.
pub fn build_sketch(record: &SequenceRecord, params: SketchParams) -> Result<KmerSketch, SketchError> {
    let k = params.k;
    let len = record.residues.len();
    if len < k {
        return Err(SketchError::SequenceTooShort {
            id: record.id.clone(),
            len,
            k,
        });
    }
    let canonical: Vec<u8> = record
        .residues
        .bytes()
        .map(|b| if b == b'U' { b'T' } else { b })
        .collect();
    let distinct: HashSet<&[u8]> = canonical.windows(k).collect();
    let mut hashes: Vec<u64> = distinct
        .iter()
        .map(|kmer| XxHash64::oneshot(params.hash_seed, kmer))
        .collect();
    hashes.sort_unstable();
    hashes.dedup();
    hashes.truncate(params.sketch_size);
    Ok(KmerSketch {
        record_id: record.id.clone(),
        params,
        min_hashes: hashes,
        kmer_count: distinct.len(),
    })
}

/// Mash's Jaccard estimate: the shared fraction among the smallest
/// `min(sketch_size, |union|)` hashes of the merged sketches.
pub fn jaccard_estimate(a: &KmerSketch, b: &KmerSketch) -> Result<f64, SketchError> {
    if a.params != b.params {
        return Err(SketchError::ParamMismatch);
    }
    let limit = a.params.sketch_size;
    let (xs, ys) = (&a.min_hashes, &b.min_hashes);
    let (mut i, mut j) = (0, 0);
    let mut taken = 0usize;
    let mut shared = 0usize;
    while taken < limit && (i < xs.len() || j < ys.len()) {
        match (xs.get(i), ys.get(j)) {
            (Some(x), Some(y)) if x == y => {
                shared += 1;
                i += 1;
                j += 1;
            }
            (Some(x), Some(y)) if x < y => i += 1,
            (Some(_), Some(_)) => j += 1,
            (Some(_), None) => i += 1,
            (None, Some(_)) => j += 1,
            (None, None) => unreachable!(),
        }
        taken += 1;
    }
    if taken == 0 {
        return Ok(0.0);
    }
    Ok(shared as f64 / taken as f64)
}

/// Mash distance `-ln(2j / (1 + j)) / k`, capped at `cap`.
pub fn mash_distance(jaccard: f64, k: usize, cap: f64) -> f64 {
    debug_assert!((0.0..=1.0).contains(&jaccard));
    if jaccard <= 0.0 {
        return cap;
    }
    if jaccard >= 1.0 {
        return 0.0;
    }
    let d = -(2.0 * jaccard / (1.0 + jaccard)).ln() / k as f64;
    d.min(cap)
}
