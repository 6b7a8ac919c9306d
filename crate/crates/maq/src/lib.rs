//! Progressive multiple sequence alignment over clustered column-assignment
//! QUBOs.
//!
//! The pipeline reads FASTA records, estimates pairwise distances from
//! MinHash sketches, groups similar sequences, aligns each group by
//! minimizing a binary quadratic energy, and stitches the group alignments
//! together through shared anchor sequences.

pub mod cluster;
pub mod decode;
pub mod merge;
pub mod pipeline;
pub mod qubo;
pub mod score;
pub mod seqio;
pub mod sketch;
pub mod solver;

pub use decode::AlignmentBlock;
pub use pipeline::{run_baseline_unclustered, run_pipeline, RunConfig, RunOutput, RunReport};
pub use score::{score_alignment, ScoreReport};
pub use seqio::{parse_fasta, Dataset, SequenceRecord};
