//! Minimizers for column-assignment QUBOs.
//!
//! [`solve_exact`] walks every feasible placement and is the reference the
//! annealer is checked against. [`solve_sa`] is single-flip Metropolis
//! annealing over the raw QUBO, standing in for an annealing device.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::qubo::{CafProblem, Qubo};

/// Energies closer than this are treated as equal.
pub const ENERGY_TOLERANCE: f64 = 1e-9;

pub const DEFAULT_ENUMERATION_CAP: u64 = 1_000_000;

#[derive(Debug, Error, PartialEq)]
pub enum SolverError {
    #[error("{count} feasible assignments exceed the enumeration cap of {cap}")]
    TooLarge { count: u128, cap: u64 },
    #[error("no feasible sample after {attempts} annealing attempts (best energy {best_energy})")]
    NeverFeasible { attempts: usize, best_energy: f64 },
    #[error("assignment has {got} entries, problem has {expected} variables")]
    LengthMismatch { expected: usize, got: usize },
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Exact,
    SimulatedAnnealing,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub backend: BackendKind,
    pub seed: u64,
    pub sweeps: usize,
    pub restarts: usize,
    /// Inverse temperatures `(start, end)`, interpolated geometrically.
    /// `None` derives the range from the QUBO's coefficients.
    pub beta_schedule: Option<(f64, f64)>,
    pub feasibility_retries: usize,
    pub enumeration_cap: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            backend: BackendKind::Exact,
            seed: 0,
            sweeps: 2000,
            restarts: 16,
            beta_schedule: None,
            feasibility_retries: 3,
            enumeration_cap: DEFAULT_ENUMERATION_CAP,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        if self.sweeps == 0 {
            return Err(SolverError::InvalidConfig("sweeps must be at least 1".into()));
        }
        if self.restarts == 0 {
            return Err(SolverError::InvalidConfig("restarts must be at least 1".into()));
        }
        if let Some((lo, hi)) = self.beta_schedule {
            if !(lo > 0.0 && lo < hi && hi.is_finite()) {
                return Err(SolverError::InvalidConfig(format!(
                    "beta schedule ({lo}, {hi}) must satisfy 0 < start < end"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    pub assignment: Vec<bool>,
    pub energy: f64,
    pub feasible: bool,
    pub restarts_used: usize,
    pub wall_time: Duration,
    /// Number of assignments sharing the minimum energy, when known.
    pub optimal_count: Option<u64>,
}

/// A problem-in, lowest-energy-sample-out minimizer.
pub trait Backend {
    fn solve(&self, problem: &CafProblem, qubo: &Qubo) -> Result<SolveResult, SolverError>;
}

pub struct ExactBackend {
    pub cap: u64,
}

impl Backend for ExactBackend {
    fn solve(&self, problem: &CafProblem, qubo: &Qubo) -> Result<SolveResult, SolverError> {
        solve_exact(problem, qubo, self.cap)
    }
}

pub struct AnnealingBackend {
    pub config: SolverConfig,
}

impl Backend for AnnealingBackend {
    fn solve(&self, problem: &CafProblem, qubo: &Qubo) -> Result<SolveResult, SolverError> {
        solve_sa(qubo, problem, &self.config)
    }
}

pub fn backend_for(config: &SolverConfig) -> Box<dyn Backend + Send + Sync> {
    match config.backend {
        BackendKind::Exact => Box::new(ExactBackend {
            cap: config.enumeration_cap,
        }),
        BackendKind::SimulatedAnnealing => Box::new(AnnealingBackend { config: config.clone() }),
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    /// Element occupies `placements` columns instead of exactly one.
    Placement {
        sequence: usize,
        element: usize,
        placements: usize,
    },
    /// Element `element + 1` sits at or left of element `element`.
    Order {
        sequence: usize,
        element: usize,
        column: usize,
        next_column: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Feasibility {
    pub violations: Vec<Violation>,
}

impl Feasibility {
    pub fn is_feasible(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn check_feasible(assignment: &[bool], problem: &CafProblem) -> Result<Feasibility, SolverError> {
    if assignment.len() != problem.num_vars() {
        return Err(SolverError::LengthMismatch {
            expected: problem.num_vars(),
            got: assignment.len(),
        });
    }
    let cols = problem.columns();
    let mut violations = Vec::new();
    for (s, &len) in problem.lengths().iter().enumerate() {
        let placed: Vec<Vec<usize>> = (0..len)
            .map(|n| (0..cols).filter(|&c| assignment[problem.var_index(s, n, c)]).collect())
            .collect();
        for (n, columns) in placed.iter().enumerate() {
            if columns.len() != 1 {
                violations.push(Violation::Placement {
                    sequence: s,
                    element: n,
                    placements: columns.len(),
                });
            }
        }
        for (n, pair) in placed.windows(2).enumerate() {
            for &c in &pair[0] {
                for &c_next in pair[1].iter().filter(|&&c_next| c_next <= c) {
                    violations.push(Violation::Order {
                        sequence: s,
                        element: n,
                        column: c,
                        next_column: c_next,
                    });
                }
            }
        }
    }
    Ok(Feasibility { violations })
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// Number of feasible assignments: product of `C choose N_s`.
pub fn feasible_count(problem: &CafProblem) -> u128 {
    problem
        .lengths()
        .iter()
        .map(|&n| binomial(problem.columns(), n))
        .product()
}

/// Column subsets of size `k` from `0..cols`, in decreasing lexicographic
/// order, which is increasing lexicographic order of the bit vectors they
/// produce.
fn column_subsets(cols: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current: Vec<usize> = (0..k).collect();
    loop {
        out.push(current.clone());
        let Some(i) = (0..k).rev().find(|&i| current[i] < cols - k + i) else {
            break;
        };
        current[i] += 1;
        for j in (i + 1)..k {
            current[j] = current[j - 1] + 1;
        }
    }
    out.reverse();
    out
}

struct ExactSearch<'a> {
    qubo: &'a Qubo,
    adjacency: Vec<Vec<(usize, f64)>>,
    /// Variable indices per sequence per subset.
    choices: Vec<Vec<Vec<usize>>>,
    /// Energy of each subset's variables among themselves.
    self_energy: Vec<Vec<f64>>,
    field: Vec<f64>,
    picked: Vec<usize>,
    best_energy: f64,
    best: Vec<usize>,
    optimal_count: u64,
}

impl ExactSearch<'_> {
    fn descend(&mut self, seq: usize, energy: f64) {
        if seq == self.choices.len() {
            if energy < self.best_energy - ENERGY_TOLERANCE {
                self.best_energy = energy;
                self.best.clone_from(&self.picked);
                self.optimal_count = 1;
            } else if (energy - self.best_energy).abs() <= ENERGY_TOLERANCE {
                self.optimal_count += 1;
            }
            return;
        }
        let last = seq + 1 == self.choices.len();
        for idx in 0..self.choices[seq].len() {
            let vars = &self.choices[seq][idx];
            let mut e = energy + self.self_energy[seq][idx];
            for &v in vars {
                e += self.qubo.linear()[v] + self.field[v];
            }
            self.picked[seq] = idx;
            if last {
                self.descend(seq + 1, e);
                continue;
            }
            for &v in &self.choices[seq][idx] {
                for &(u, c) in &self.adjacency[v] {
                    self.field[u] += c;
                }
            }
            self.descend(seq + 1, e);
            for &v in &self.choices[seq][idx] {
                for &(u, c) in &self.adjacency[v] {
                    self.field[u] -= c;
                }
            }
        }
    }
}

/// Enumerates every feasible assignment and returns the lowest-energy one;
/// among equal energies the lexicographically smallest bit vector wins.
pub fn solve_exact(problem: &CafProblem, qubo: &Qubo, cap: u64) -> Result<SolveResult, SolverError> {
    let start = Instant::now();
    if qubo.num_vars() != problem.num_vars() {
        return Err(SolverError::LengthMismatch {
            expected: problem.num_vars(),
            got: qubo.num_vars(),
        });
    }
    let count = feasible_count(problem);
    if count > u128::from(cap) {
        return Err(SolverError::TooLarge { count, cap });
    }

    let cols = problem.columns();
    let choices: Vec<Vec<Vec<usize>>> = problem
        .lengths()
        .iter()
        .enumerate()
        .map(|(s, &len)| {
            column_subsets(cols, len)
                .into_iter()
                .map(|subset| {
                    subset
                        .iter()
                        .enumerate()
                        .map(|(n, &c)| problem.var_index(s, n, c))
                        .collect()
                })
                .collect()
        })
        .collect();
    let self_energy = choices
        .iter()
        .map(|per_seq| {
            per_seq
                .iter()
                .map(|vars: &Vec<usize>| {
                    let mut e = 0.0;
                    for (i, &a) in vars.iter().enumerate() {
                        for &b in &vars[i + 1..] {
                            e += qubo.quadratic().get(&(a.min(b), a.max(b))).copied().unwrap_or(0.0);
                        }
                    }
                    e
                })
                .collect()
        })
        .collect();

    let mut search = ExactSearch {
        qubo,
        adjacency: qubo.neighbors(),
        picked: vec![0; choices.len()],
        best: vec![0; choices.len()],
        choices,
        self_energy,
        field: vec![0.0; qubo.num_vars()],
        best_energy: f64::INFINITY,
        optimal_count: 0,
    };
    search.descend(0, qubo.offset());

    let mut assignment = vec![false; qubo.num_vars()];
    for (seq, &idx) in search.best.iter().enumerate() {
        for &v in &search.choices[seq][idx] {
            assignment[v] = true;
        }
    }
    let energy = qubo.energy(&assignment);
    Ok(SolveResult {
        assignment,
        energy,
        feasible: true,
        restarts_used: 0,
        wall_time: start.elapsed(),
        optimal_count: Some(search.optimal_count),
    })
}

/// Inverse-temperature range derived from the coefficients: the hot end
/// accepts the largest possible single flip half the time, the cold end
/// rejects the smallest nonzero one with probability 0.99.
pub fn default_beta_range(qubo: &Qubo) -> (f64, f64) {
    let mut max_delta: f64 = 0.0;
    let mut min_delta = f64::INFINITY;
    let adjacency = qubo.neighbors();
    for (i, &lin) in qubo.linear().iter().enumerate() {
        let spread = lin.abs() + adjacency[i].iter().map(|(_, c)| c.abs()).sum::<f64>();
        max_delta = max_delta.max(spread);
        if lin != 0.0 {
            min_delta = min_delta.min(lin.abs());
        }
        for &(_, c) in &adjacency[i] {
            if c != 0.0 {
                min_delta = min_delta.min(c.abs());
            }
        }
    }
    if max_delta == 0.0 || !min_delta.is_finite() {
        return (0.1, 10.0);
    }
    let hot = std::f64::consts::LN_2 / max_delta;
    let cold = (100.0f64).ln() / min_delta;
    if cold > hot {
        (hot, cold)
    } else {
        (hot, hot * 10.0)
    }
}

fn beta_at(range: (f64, f64), sweep: usize, sweeps: usize) -> f64 {
    if sweeps == 1 {
        return range.1;
    }
    let t = sweep as f64 / (sweeps - 1) as f64;
    range.0 * (range.1 / range.0).powf(t)
}

struct Chain {
    energy: f64,
    state: Vec<bool>,
}

fn anneal_chain(qubo: &Qubo, adjacency: &[Vec<(usize, f64)>], betas: &[f64], rng: &mut ChaCha8Rng) -> Chain {
    let n = qubo.num_vars();
    let mut state: Vec<bool> = (0..n).map(|_| rng.random::<bool>()).collect();
    let mut field: Vec<f64> = qubo.linear().to_vec();
    for (i, adj) in adjacency.iter().enumerate() {
        if state[i] {
            for &(j, c) in adj {
                field[j] += c;
            }
        }
    }
    let mut energy = qubo.energy(&state);
    let mut best = Chain {
        energy,
        state: state.clone(),
    };
    for &beta in betas {
        for i in 0..n {
            let delta = if state[i] { -field[i] } else { field[i] };
            let accept = delta <= 0.0 || rng.random::<f64>() < (-beta * delta).exp();
            if !accept {
                continue;
            }
            let sign = if state[i] { -1.0 } else { 1.0 };
            state[i] = !state[i];
            energy += delta;
            for &(j, c) in &adjacency[i] {
                field[j] += sign * c;
            }
        }
        if energy < best.energy - ENERGY_TOLERANCE {
            best.energy = energy;
            best.state.clone_from(&state);
        }
    }
    best.energy = qubo.energy(&best.state);
    best
}

/// Simulated annealing over the raw QUBO.
///
/// Each of `restarts` chains starts from a seeded random state and runs
/// `sweeps` in-order passes of single-bit Metropolis updates. Chain `r` of
/// attempt `a` draws from stream `a * restarts + r` of the base seed, so the
/// first `r` chains are identical whatever the restart count.
pub fn solve_sa(qubo: &Qubo, problem: &CafProblem, config: &SolverConfig) -> Result<SolveResult, SolverError> {
    let start = Instant::now();
    config.validate()?;
    if qubo.num_vars() == 0 {
        return Err(SolverError::InvalidConfig("empty QUBO".into()));
    }
    if qubo.num_vars() != problem.num_vars() {
        return Err(SolverError::LengthMismatch {
            expected: problem.num_vars(),
            got: qubo.num_vars(),
        });
    }
    let range = config.beta_schedule.unwrap_or_else(|| default_beta_range(qubo));
    let betas: Vec<f64> = (0..config.sweeps).map(|s| beta_at(range, s, config.sweeps)).collect();
    let adjacency = qubo.neighbors();

    let mut best_overall: Option<Chain> = None;
    let attempts = config.feasibility_retries + 1;
    for attempt in 0..attempts {
        let chains: Vec<Chain> = (0..config.restarts)
            .into_par_iter()
            .map(|r| {
                let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
                rng.set_stream((attempt * config.restarts + r) as u64);
                anneal_chain(qubo, &adjacency, &betas, &mut rng)
            })
            .collect();
        // first chain wins ties, keeping the result independent of scheduling
        let best = chains
            .into_iter()
            .reduce(|a, b| if b.energy < a.energy - ENERGY_TOLERANCE { b } else { a })
            .expect("at least one restart");
        let feasible = check_feasible(&best.state, problem)?.is_feasible();
        if feasible {
            return Ok(SolveResult {
                assignment: best.state,
                energy: best.energy,
                feasible: true,
                restarts_used: (attempt + 1) * config.restarts,
                wall_time: start.elapsed(),
                optimal_count: None,
            });
        }
        if best_overall.as_ref().is_none_or(|b| best.energy < b.energy) {
            best_overall = Some(best);
        }
    }
    Err(SolverError::NeverFeasible {
        attempts,
        best_energy: best_overall.map_or(f64::INFINITY, |b| b.energy),
    })
}
