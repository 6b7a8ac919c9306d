//! End-to-end runs: sketch, cluster, solve each cluster, merge, score.

use std::io;
use std::path::Path;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::cluster::{build_distance_matrix, find_center, plan_clusters, Cluster, DistanceMatrix};
use crate::decode::{decode_assignment, AlignmentBlock, DecodeError};
use crate::merge::{append_anchor, merge_blocks, ClusterInput, MergeError, ProgressiveState};
use crate::qubo::{build_caf_qubo, build_weights, variable_count, CafProblem, Penalties, Qubo, QuboError};
use crate::score::{score_alignment, ScoreError, ScoreReport};
use crate::seqio::{write_fasta_entries, Alphabet, Dataset, FastaError};
use crate::sketch::{build_sketch, SketchError, SketchParams, DEFAULT_DISTANCE_CAP};
use crate::solver::{backend_for, BackendKind, SolveResult, SolverConfig, SolverError};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("reading input: {0}")]
    Input(#[from] FastaError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("sketching: {0}")]
    Sketch(#[from] SketchError),
    #[error("building cluster {cluster} problem: {source}")]
    Qubo { cluster: usize, source: QuboError },
    #[error("solving cluster {cluster}: {source}")]
    Solver { cluster: usize, source: SolverError },
    #[error("decoding cluster {cluster}: {source}")]
    Decode { cluster: usize, source: DecodeError },
    #[error("merging cluster {cluster}: {source}")]
    Merge { cluster: usize, source: MergeError },
    #[error("scoring: {0}")]
    Score(#[from] ScoreError),
    #[error("i/o on {path}: {source}")]
    Io { path: String, source: io::Error },
}

impl PipelineError {
    /// 2 for bad input or configuration, 3 when the annealer never reaches a
    /// feasible sample, 4 for internal consistency failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Input(_)
            | PipelineError::Config(_)
            | PipelineError::Sketch(_)
            | PipelineError::Io { .. } => 2,
            PipelineError::Solver { source, .. } => match source {
                SolverError::NeverFeasible { .. } => 3,
                SolverError::TooLarge { .. } | SolverError::InvalidConfig(_) => 2,
                SolverError::LengthMismatch { .. } => 4,
            },
            PipelineError::Qubo { source, .. } => match source {
                QuboError::InvalidProblem(_) => 2,
                _ => 4,
            },
            PipelineError::Decode { .. } | PipelineError::Merge { .. } | PipelineError::Score(_) => 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Extra columns beyond the longest input sequence.
    pub gap_budget: usize,
    /// Residue-against-gap charge inside the alignment energy.
    pub gap_penalty: f64,
    pub similarity_cutoff: f64,
    pub min_cluster_size: usize,
    /// `None` picks the alphabet default.
    pub kmer: Option<usize>,
    pub sketch_size: Option<usize>,
    pub hash_seed: u64,
    pub distance_cap: f64,
    pub solver: SolverConfig,
    /// Include per-stage wall times in the report. Off by default so that
    /// repeated runs produce identical reports.
    pub record_timings: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            gap_budget: 0,
            gap_penalty: 0.5,
            similarity_cutoff: 0.98,
            min_cluster_size: 2,
            kmer: None,
            sketch_size: None,
            hash_seed: 0,
            distance_cap: DEFAULT_DISTANCE_CAP,
            solver: SolverConfig::default(),
            record_timings: false,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        if !(0.0..1.0).contains(&self.gap_penalty) {
            return Err(PipelineError::Config(format!(
                "gap penalty {} must lie in [0, 1)",
                self.gap_penalty
            )));
        }
        if !self.similarity_cutoff.is_finite() || self.similarity_cutoff < 0.0 {
            return Err(PipelineError::Config(format!(
                "similarity cutoff {} must be a non-negative number",
                self.similarity_cutoff
            )));
        }
        if self.min_cluster_size == 0 {
            return Err(PipelineError::Config("minimum cluster size must be at least 1".into()));
        }
        if self.kmer == Some(0) || self.sketch_size == Some(0) {
            return Err(PipelineError::Config(
                "k-mer length and sketch size must be at least 1".into(),
            ));
        }
        if self.distance_cap.is_nan() || self.distance_cap <= 0.0 {
            return Err(PipelineError::Config("distance cap must be positive".into()));
        }
        self.solver.validate().map_err(|e| PipelineError::Config(e.to_string()))
    }

    /// Sketch parameters for a dataset; k is clamped to the shortest record.
    pub fn sketch_params(&self, dataset: &Dataset) -> SketchParams {
        let defaults = SketchParams::for_alphabet(dataset.alphabet(), self.hash_seed);
        let shortest = dataset.records().iter().map(|r| r.len()).min().unwrap_or(1);
        SketchParams {
            k: self.kmer.unwrap_or(defaults.k).min(shortest),
            sketch_size: self.sketch_size.unwrap_or(defaults.sketch_size),
            hash_seed: self.hash_seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SketchSummary {
    pub k: usize,
    pub sketch_size: usize,
    pub hash_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterReport {
    pub members: Vec<String>,
    pub center: String,
    pub anchor: Option<String>,
    pub sequences_in_problem: usize,
    /// `C * sum(N_i)` over the sequences in this cluster's problem.
    pub variable_count: usize,
    pub solver_called: bool,
    pub energy: f64,
    pub feasible: bool,
    pub optimal_assignments: Option<u64>,
    pub alternates_detected: bool,
    pub restarts_used: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageTimings {
    pub sketch_ms: f64,
    pub cluster_ms: f64,
    pub solve_ms: f64,
    pub merge_ms: f64,
    pub score_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub mode: &'static str,
    pub total_sequences: usize,
    pub alphabet: Alphabet,
    pub max_len: usize,
    pub gap_budget: usize,
    pub columns: usize,
    pub gap_penalty: f64,
    pub sketch: SketchSummary,
    pub similarity_cutoff: f64,
    pub min_cluster_size: usize,
    pub backend: BackendKind,
    pub seed: u64,
    pub clusters: Vec<ClusterReport>,
    pub max_single_call_spins: usize,
    pub sum_spins_all_calls: usize,
    pub final_width: usize,
    pub score_total: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timings: Option<StageTimings>,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub block: AlignmentBlock,
    pub scores: ScoreReport,
    pub report: RunReport,
    pub distances: DistanceMatrix,
}

/// Everything needed to solve one cluster, built before any solving starts.
pub struct ClusterJob {
    pub input: ClusterInput,
    pub problem: CafProblem,
    pub qubo: Option<Qubo>,
}

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

/// Builds the problem for one cluster; single-sequence problems have no
/// pairwise terms and get no QUBO.
pub fn build_job(
    input: ClusterInput,
    max_len: usize,
    config: &RunConfig,
    cluster: usize,
) -> Result<ClusterJob, PipelineError> {
    let problem = CafProblem::for_sequences(&input.sequences, max_len, config.gap_budget, config.gap_penalty)
        .map_err(|source| PipelineError::Qubo { cluster, source })?;
    let qubo = if input.sequences.len() >= 2 {
        let weights = build_weights(&input.sequences).map_err(|source| PipelineError::Qubo { cluster, source })?;
        Some(
            build_caf_qubo(&problem, &weights, Penalties::for_problem(&problem))
                .map_err(|source| PipelineError::Qubo { cluster, source })?,
        )
    } else {
        None
    };
    Ok(ClusterJob { input, problem, qubo })
}

struct Solved {
    block: AlignmentBlock,
    result: Option<SolveResult>,
}

fn solve_job(job: &ClusterJob, config: &RunConfig, cluster: usize) -> Result<Solved, PipelineError> {
    let Some(qubo) = &job.qubo else {
        // every placement of a lone row costs nothing; gaps go in front,
        // matching the exact solver's tie order
        let seq = &job.input.sequences[0];
        let row = format!("{}{}", "-".repeat(job.problem.columns() - seq.len()), seq);
        return Ok(Solved {
            block: AlignmentBlock::new(job.input.ids.clone(), vec![row]),
            result: None,
        });
    };
    let backend = backend_for(&config.solver);
    let result = backend
        .solve(&job.problem, qubo)
        .map_err(|source| PipelineError::Solver { cluster, source })?;
    let block = decode_assignment(&result.assignment, &job.problem, &job.input.ids, &job.input.sequences)
        .map_err(|source| PipelineError::Decode { cluster, source })?;
    Ok(Solved {
        block,
        result: Some(result),
    })
}

fn distance_matrix(dataset: &Dataset, config: &RunConfig) -> Result<(DistanceMatrix, SketchParams), PipelineError> {
    let params = config.sketch_params(dataset);
    let sketches = dataset
        .records()
        .par_iter()
        .map(|r| build_sketch(r, params))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((build_distance_matrix(&sketches, config.distance_cap)?, params))
}

struct Prepared {
    dm: DistanceMatrix,
    params: SketchParams,
    clusters: Vec<Cluster>,
    jobs: Vec<ClusterJob>,
    t_sketch: Duration,
    t_cluster: Duration,
}

fn prepare(
    dataset: &Dataset,
    config: &RunConfig,
    plan: impl FnOnce(&DistanceMatrix) -> Vec<Cluster>,
) -> Result<Prepared, PipelineError> {
    config.validate()?;
    let t0 = Instant::now();
    let (dm, params) = distance_matrix(dataset, config)?;
    let t_sketch = t0.elapsed();

    let t1 = Instant::now();
    let clusters = plan(&dm);
    let t_cluster = t1.elapsed();

    // The anchor of cluster i is the center of cluster i-1, whose residues
    // are known up front, so every problem can be built and solved at once.
    let max_len = dataset.max_len();
    let id_of = |i: usize| dataset.get(i).id.clone();
    let jobs = clusters
        .iter()
        .enumerate()
        .map(|(i, cluster)| {
            let ids = cluster.members.iter().map(|&m| id_of(m)).collect();
            let seqs = cluster
                .members
                .iter()
                .map(|&m| dataset.get(m).residues.clone())
                .collect();
            let anchor = i
                .checked_sub(1)
                .map(|prev| clusters[prev].center)
                .map(|c| (id_of(c), dataset.get(c).residues.clone()));
            build_job(append_anchor(ids, seqs, anchor), max_len, config, i)
        })
        .collect::<Result<_, _>>()?;
    Ok(Prepared {
        dm,
        params,
        clusters,
        jobs,
        t_sketch,
        t_cluster,
    })
}

fn clustered_plan(config: &RunConfig) -> impl FnOnce(&DistanceMatrix) -> Vec<Cluster> + '_ {
    |dm| plan_clusters(dm, config.similarity_cutoff, config.min_cluster_size).clusters
}

fn single_cluster(dm: &DistanceMatrix) -> Vec<Cluster> {
    let members: Vec<usize> = (0..dm.len()).collect();
    let center = find_center(&members, dm);
    vec![Cluster { members, center }]
}

/// The per-cluster problems a run would solve, in processing order.
pub fn cluster_jobs(dataset: &Dataset, config: &RunConfig, baseline: bool) -> Result<Vec<ClusterJob>, PipelineError> {
    let prepared = if baseline {
        prepare(dataset, config, single_cluster)?
    } else {
        prepare(dataset, config, clustered_plan(config))?
    };
    Ok(prepared.jobs)
}

fn run_with_clusters(
    dataset: &Dataset,
    config: &RunConfig,
    mode: &'static str,
    plan: impl FnOnce(&DistanceMatrix) -> Vec<Cluster>,
) -> Result<RunOutput, PipelineError> {
    let Prepared {
        dm,
        params,
        clusters,
        jobs,
        t_sketch,
        t_cluster,
    } = prepare(dataset, config, plan)?;
    let max_len = dataset.max_len();
    let id_of = |i: usize| dataset.get(i).id.clone();

    let t2 = Instant::now();
    let solved: Vec<Solved> = jobs
        .par_iter()
        .enumerate()
        .map(|(i, job)| solve_job(job, config, i))
        .collect::<Result<_, _>>()?;
    let t_solve = t2.elapsed();

    let t3 = Instant::now();
    let mut state: Option<ProgressiveState> = None;
    for (i, (cluster, s)) in clusters.iter().zip(&solved).enumerate() {
        let center = id_of(cluster.center);
        state = Some(
            match state {
                None => ProgressiveState::new(s.block.clone(), center),
                Some(st) => merge_blocks(st, &s.block, &center),
            }
            .map_err(|source| PipelineError::Merge { cluster: i, source })?,
        );
    }
    let block = state.expect("at least one cluster").merged;
    let t_merge = t3.elapsed();

    let t4 = Instant::now();
    let scores = score_alignment(&block)?;
    let t_score = t4.elapsed();

    let cluster_reports: Vec<ClusterReport> = clusters
        .iter()
        .zip(&jobs)
        .zip(&solved)
        .map(|((cluster, job), s)| {
            let optimal = s.result.as_ref().and_then(|r| r.optimal_count);
            ClusterReport {
                members: cluster.members.iter().map(|&m| id_of(m)).collect(),
                center: id_of(cluster.center),
                anchor: job.input.anchor.map(|a| job.input.ids[a].clone()),
                sequences_in_problem: job.input.sequences.len(),
                variable_count: variable_count(&job.problem),
                solver_called: s.result.is_some(),
                energy: s.result.as_ref().map_or(0.0, |r| r.energy),
                feasible: s.result.as_ref().is_none_or(|r| r.feasible),
                optimal_assignments: optimal,
                alternates_detected: optimal.is_some_and(|n| n > 1),
                restarts_used: s.result.as_ref().map_or(0, |r| r.restarts_used),
            }
        })
        .collect();
    let report = RunReport {
        mode,
        total_sequences: dataset.count(),
        alphabet: dataset.alphabet(),
        max_len,
        gap_budget: config.gap_budget,
        columns: max_len + config.gap_budget,
        gap_penalty: config.gap_penalty,
        sketch: SketchSummary {
            k: params.k,
            sketch_size: params.sketch_size,
            hash_seed: params.hash_seed,
        },
        similarity_cutoff: config.similarity_cutoff,
        min_cluster_size: config.min_cluster_size,
        backend: config.solver.backend,
        seed: config.solver.seed,
        max_single_call_spins: cluster_reports.iter().map(|c| c.variable_count).max().unwrap_or(0),
        sum_spins_all_calls: cluster_reports.iter().map(|c| c.variable_count).sum(),
        clusters: cluster_reports,
        final_width: block.width(),
        score_total: scores.total,
        timings: config.record_timings.then(|| StageTimings {
            sketch_ms: ms(t_sketch),
            cluster_ms: ms(t_cluster),
            solve_ms: ms(t_solve),
            merge_ms: ms(t_merge),
            score_ms: ms(t_score),
        }),
    };
    Ok(RunOutput {
        block,
        scores,
        report,
        distances: dm,
    })
}

/// Full clustered pipeline.
pub fn run_pipeline(dataset: &Dataset, config: &RunConfig) -> Result<RunOutput, PipelineError> {
    run_with_clusters(dataset, config, "clustered", clustered_plan(config))
}

/// The same solve applied to the whole dataset as one cluster.
pub fn run_baseline_unclustered(dataset: &Dataset, config: &RunConfig) -> Result<RunOutput, PipelineError> {
    run_with_clusters(dataset, config, "baseline", single_cluster)
}

/// Gapped rows under their original headers.
pub fn aligned_fasta(block: &AlignmentBlock, dataset: &Dataset) -> String {
    let mut out = Vec::new();
    let entries = block.ids.iter().zip(&block.rows).map(|(id, row)| {
        let description = dataset.index_of(id).and_then(|i| dataset.get(i).description.as_deref());
        (id.as_str(), description, row.as_str())
    });
    write_fasta_entries(&mut out, entries).expect("writing to memory");
    String::from_utf8(out).expect("ascii output")
}

/// Writes `contents` through a temporary file in the target directory and
/// renames it into place.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), PipelineError> {
    let io_err = |source| PipelineError::Io {
        path: path.display().to_string(),
        source,
    };
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err)?;
    io::Write::write_all(&mut tmp, contents.as_bytes()).map_err(io_err)?;
    tmp.persist(path).map_err(|e| io_err(e.error))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seqio::parse_fasta_str;

    #[test]
    fn single_sequence_passes_through() {
        let ds = parse_fasta_str(">only\nMKV\n").unwrap();
        let out = run_pipeline(&ds, &RunConfig::default()).unwrap();
        assert_eq!(out.block.rows, ["MKV"]);
        assert_eq!(out.scores.total, 0);
        assert_eq!(out.report.clusters.len(), 1);
        assert!(!out.report.clusters[0].solver_called);
    }

    #[test]
    fn identical_pair_aligns_cleanly() {
        let ds = parse_fasta_str(">a\nMKVL\n>b\nMKVL\n").unwrap();
        let out = run_pipeline(&ds, &RunConfig::default()).unwrap();
        assert_eq!(out.block.rows, ["MKVL", "MKVL"]);
        assert_eq!(out.scores.total, 0);
    }

    #[test]
    fn config_validation() {
        let ds = parse_fasta_str(">a\nMKVL\n").unwrap();
        for cfg in [
            RunConfig {
                gap_penalty: 1.0,
                ..RunConfig::default()
            },
            RunConfig {
                min_cluster_size: 0,
                ..RunConfig::default()
            },
            RunConfig {
                similarity_cutoff: f64::NAN,
                ..RunConfig::default()
            },
            RunConfig {
                kmer: Some(0),
                ..RunConfig::default()
            },
        ] {
            let err = run_pipeline(&ds, &cfg).unwrap_err();
            assert_eq!(err.exit_code(), 2, "{err}");
        }
    }

    #[test]
    fn short_records_clamp_k() {
        let ds = parse_fasta_str(">a\nAC\n>b\nACGTAC\n").unwrap();
        let cfg = RunConfig::default();
        assert_eq!(cfg.sketch_params(&ds).k, 2);
        let out = run_pipeline(&ds, &cfg).unwrap();
        assert_eq!(out.report.sketch.k, 2);
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.txt");
        write_atomic(&path, "one").unwrap();
        write_atomic(&path, "two").unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "two");
    }
}
