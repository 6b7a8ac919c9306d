use std::fs::File;
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use maq::pipeline::{
    aligned_fasta, cluster_jobs, run_baseline_unclustered, run_pipeline, write_atomic, PipelineError, RunConfig,
};
use maq::seqio::parse_fasta;
use maq::solver::{BackendKind, SolverConfig, DEFAULT_ENUMERATION_CAP};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Backend {
    Exact,
    Sa,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Emit {
    Fasta,
    Table,
    Scores,
    Report,
}

impl Emit {
    fn suffix(self) -> &'static str {
        match self {
            Emit::Fasta => "aligned.fasta",
            Emit::Table => "table.txt",
            Emit::Scores => "scores.tsv",
            Emit::Report => "report.json",
        }
    }
}

/// Progressive multiple sequence alignment: cluster by MinHash distance,
/// align each cluster by minimizing a column-assignment QUBO, merge through
/// shared cluster centers.
#[derive(Debug, Parser)]
#[command(name = "maq", version)]
struct Cli {
    /// FASTA file to align.
    #[arg(long)]
    input: PathBuf,

    /// Extra alignment columns beyond the longest sequence.
    #[arg(long = "gaps", default_value_t = 0)]
    gaps: usize,

    /// Residue-against-gap charge in the alignment energy, in [0, 1).
    #[arg(long = "gap-penalty", default_value_t = 0.5)]
    gap_penalty: f64,

    /// Minimum similarity (1 - distance) for two sequences to share a cluster.
    #[arg(long, default_value_t = 0.98)]
    cutoff: f64,

    /// Clusters smaller than this fold into the next one.
    #[arg(long = "min-cluster-size", default_value_t = 2)]
    min_cluster_size: usize,

    /// k-mer length for sketching (default: 4 protein, 16 nucleotide).
    #[arg(long)]
    kmer: Option<usize>,

    /// Hashes kept per sketch (default: 64 protein, 1000 nucleotide).
    #[arg(long = "sketch-size")]
    sketch_size: Option<usize>,

    /// Seed for sketch hashing and the annealer.
    #[arg(long, default_value_t = 0)]
    seed: u64,

    #[arg(long, value_enum, default_value_t = Backend::Exact)]
    backend: Backend,

    /// Annealing sweeps per restart.
    #[arg(long, default_value_t = 2000)]
    sweeps: usize,

    /// Independent annealing chains per attempt.
    #[arg(long, default_value_t = 16)]
    restarts: usize,

    /// Extra annealing attempts when no chain ends feasible.
    #[arg(long, default_value_t = 3)]
    retries: usize,

    /// Starting inverse temperature (needs --beta-max; default derived from the problem).
    #[arg(long = "beta-min", requires = "beta_max")]
    beta_min: Option<f64>,

    #[arg(long = "beta-max", requires = "beta_min")]
    beta_max: Option<f64>,

    /// Largest number of feasible assignments the exact backend will enumerate.
    #[arg(long = "enumeration-cap", default_value_t = DEFAULT_ENUMERATION_CAP)]
    enumeration_cap: u64,

    /// Align all sequences as one cluster instead.
    #[arg(long)]
    baseline: bool,

    /// Outputs to produce.
    #[arg(long, value_enum, value_delimiter = ',', default_value = "fasta")]
    emit: Vec<Emit>,

    /// Write outputs as files here instead of to stdout.
    #[arg(long = "out-dir")]
    out_dir: Option<PathBuf>,

    /// Write the pairwise distance matrix as TSV.
    #[arg(long = "distances")]
    distances: Option<PathBuf>,

    /// Write each cluster's QUBO as text into this directory.
    #[arg(long = "dump-qubo")]
    dump_qubo: Option<PathBuf>,

    /// Record per-stage wall times in the report.
    #[arg(long)]
    timings: bool,
}

impl Cli {
    fn run_config(&self) -> RunConfig {
        RunConfig {
            gap_budget: self.gaps,
            gap_penalty: self.gap_penalty,
            similarity_cutoff: self.cutoff,
            min_cluster_size: self.min_cluster_size,
            kmer: self.kmer,
            sketch_size: self.sketch_size,
            hash_seed: self.seed,
            solver: SolverConfig {
                backend: match self.backend {
                    Backend::Exact => BackendKind::Exact,
                    Backend::Sa => BackendKind::SimulatedAnnealing,
                },
                seed: self.seed,
                sweeps: self.sweeps,
                restarts: self.restarts,
                beta_schedule: self.beta_min.zip(self.beta_max),
                feasibility_retries: self.retries,
                enumeration_cap: self.enumeration_cap,
            },
            record_timings: self.timings,
            ..RunConfig::default()
        }
    }
}

fn io_error(path: &Path) -> impl FnOnce(io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn run(cli: &Cli) -> Result<(), PipelineError> {
    let file = File::open(&cli.input).map_err(io_error(&cli.input))?;
    let dataset = parse_fasta(BufReader::new(file))?;
    let config = cli.run_config();

    if let Some(dir) = &cli.dump_qubo {
        std::fs::create_dir_all(dir).map_err(io_error(dir))?;
        for (i, job) in cluster_jobs(&dataset, &config, cli.baseline)?.iter().enumerate() {
            if let Some(qubo) = &job.qubo {
                write_atomic(&dir.join(format!("cluster{i}.qubo.txt")), &qubo.to_text())?;
            }
        }
    }

    let output = if cli.baseline {
        run_baseline_unclustered(&dataset, &config)?
    } else {
        run_pipeline(&dataset, &config)?
    };

    if let Some(path) = &cli.distances {
        write_atomic(path, &output.distances.to_tsv())?;
    }

    let stem = cli
        .input
        .file_stem()
        .map_or_else(|| "alignment".to_string(), |s| s.to_string_lossy().into_owned());
    let stdout = io::stdout();
    for &kind in &cli.emit {
        let text = match kind {
            Emit::Fasta => aligned_fasta(&output.block, &dataset),
            Emit::Table => output.block.to_table(),
            Emit::Scores => output.scores.to_tsv(),
            Emit::Report => output.report.to_json(),
        };
        match &cli.out_dir {
            Some(dir) => {
                std::fs::create_dir_all(dir).map_err(io_error(dir))?;
                write_atomic(&dir.join(format!("{stem}.{}", kind.suffix())), &text)?;
            }
            None => {
                let mut out = stdout.lock();
                out.write_all(text.as_bytes())
                    .and_then(|()| out.flush())
                    .map_err(io_error(Path::new("<stdout>")))?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("maq: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
