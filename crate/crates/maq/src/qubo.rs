//! Column-assignment QUBO for aligning one cluster.
//!
//! Binary variable `x[s][n][c]` is set when element `n` of sequence `s`
//! sits in column `c`. The energy is
//!
//! ```text
//! E = H_obj + A * H_assign + B * H_order
//! H_assign = sum_{s,n} (sum_c x[s][n][c] - 1)^2
//! H_order  = sum_{s,n} sum_{c' <= c} x[s][n][c] * x[s][n+1][c']
//! H_obj    = sum_c sum_{s1<s2} ( sum_{n1,n2} w(s1,n1,s2,n2) x[s1][n1][c] x[s2][n2][c]
//!                               + g * (y[s1][c] - y[s2][c])^2 )
//! ```
//!
//! with `y[s][c] = sum_n x[s][n][c]`. On feasible assignments every `y` is
//! 0 or 1, so the squared term charges `g` exactly when one row of the pair
//! has a residue and the other a gap, and `E` equals the column
//! sum-of-pairs cost {match 0, mismatch 1, residue/gap g, gap/gap 0}.
//! `H_obj` is non-negative for every assignment, which is what lets a
//! penalty above the largest feasible objective dominate all violations.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum QuboError {
    #[error("need at least two sequences to build pairwise weights")]
    SingleSequence,
    #[error("penalty {got} must exceed the objective bound {bound}")]
    PenaltyTooSmall { got: f64, bound: f64 },
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
}

/// Shape of one column-assignment problem.
#[derive(Debug, Clone, PartialEq)]
pub struct CafProblem {
    lengths: Vec<usize>,
    max_len: usize,
    gap_budget: usize,
    columns: usize,
    gap_penalty: f64,
    offsets: Vec<usize>,
}

impl CafProblem {
    /// `max_len` is the N that fixes the column count `C = N + G`; it may
    /// exceed every length in `lengths` when the problem is one cluster of
    /// a larger dataset.
    pub fn new(lengths: Vec<usize>, max_len: usize, gap_budget: usize, gap_penalty: f64) -> Result<Self, QuboError> {
        if lengths.is_empty() {
            return Err(QuboError::InvalidProblem("no sequences".into()));
        }
        if lengths.contains(&0) {
            return Err(QuboError::InvalidProblem("empty sequence".into()));
        }
        if lengths.iter().any(|&n| n > max_len) {
            return Err(QuboError::InvalidProblem(format!(
                "sequence longer than max length {max_len}"
            )));
        }
        if !(0.0..1.0).contains(&gap_penalty) {
            return Err(QuboError::InvalidProblem(format!(
                "gap penalty {gap_penalty} outside [0, 1)"
            )));
        }
        let columns = max_len + gap_budget;
        let mut offsets = Vec::with_capacity(lengths.len() + 1);
        let mut acc = 0;
        for &n in &lengths {
            offsets.push(acc);
            acc += n * columns;
        }
        offsets.push(acc);
        Ok(Self {
            lengths,
            max_len,
            gap_budget,
            columns,
            gap_penalty,
            offsets,
        })
    }

    pub fn for_sequences<S: AsRef<str>>(
        sequences: &[S],
        max_len: usize,
        gap_budget: usize,
        gap_penalty: f64,
    ) -> Result<Self, QuboError> {
        let lengths = sequences.iter().map(|s| s.as_ref().len()).collect();
        Self::new(lengths, max_len, gap_budget, gap_penalty)
    }

    pub fn seq_count(&self) -> usize {
        self.lengths.len()
    }

    pub fn lengths(&self) -> &[usize] {
        &self.lengths
    }

    pub fn max_len(&self) -> usize {
        self.max_len
    }

    pub fn gap_budget(&self) -> usize {
        self.gap_budget
    }

    pub fn columns(&self) -> usize {
        self.columns
    }

    pub fn gap_penalty(&self) -> f64 {
        self.gap_penalty
    }

    pub fn num_vars(&self) -> usize {
        self.offsets[self.lengths.len()]
    }

    /// Flat index of `x[seq][element][column]`, all zero-based.
    pub fn var_index(&self, seq: usize, element: usize, column: usize) -> usize {
        debug_assert!(element < self.lengths[seq] && column < self.columns);
        self.offsets[seq] + element * self.columns + column
    }

    /// Inverse of [`var_index`](Self::var_index).
    pub fn var_coords(&self, var: usize) -> (usize, usize, usize) {
        let seq = self.offsets.partition_point(|&o| o <= var) - 1;
        let local = var - self.offsets[seq];
        (seq, local / self.columns, local % self.columns)
    }

    /// Largest objective any feasible assignment can reach: each pair of
    /// rows meets in at most `min(N1, N2)` residue/residue columns and at
    /// most `min(C, N1 + N2)` residue/gap columns.
    pub fn objective_bound(&self) -> f64 {
        let mut bound = 0.0;
        for (i, &a) in self.lengths.iter().enumerate() {
            for &b in &self.lengths[i + 1..] {
                bound += a.min(b) as f64 + self.gap_penalty * self.columns.min(a + b) as f64;
            }
        }
        bound
    }
}

/// Number of binary variables `C * sum(N_i)` for a problem.
pub fn variable_count(problem: &CafProblem) -> usize {
    problem.columns() * problem.lengths().iter().sum::<usize>()
}

/// Mismatch indicators for every cross-sequence element pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeightsMatrix {
    lengths: Vec<usize>,
    /// One row-major `N1 x N2` block per sequence pair `s1 < s2`.
    blocks: Vec<Vec<u8>>,
}

impl WeightsMatrix {
    fn block_index(&self, s1: usize, s2: usize) -> usize {
        let l = self.lengths.len();
        // pairs enumerated row by row: (0,1), (0,2), ..., (1,2), ...
        s1 * l - s1 * (s1 + 1) / 2 + (s2 - s1 - 1)
    }

    pub fn seq_count(&self) -> usize {
        self.lengths.len()
    }

    /// 1 when element `n1` of `s1` differs from element `n2` of `s2`.
    pub fn get(&self, s1: usize, n1: usize, s2: usize, n2: usize) -> u8 {
        assert_ne!(s1, s2, "weights are defined across sequences only");
        if s1 > s2 {
            return self.get(s2, n2, s1, n1);
        }
        let block = &self.blocks[self.block_index(s1, s2)];
        block[n1 * self.lengths[s2] + n2]
    }
}

pub fn build_weights<S: AsRef<str>>(sequences: &[S]) -> Result<WeightsMatrix, QuboError> {
    if sequences.len() < 2 {
        return Err(QuboError::SingleSequence);
    }
    let bytes: Vec<&[u8]> = sequences.iter().map(|s| s.as_ref().as_bytes()).collect();
    let mut blocks = Vec::with_capacity(bytes.len() * (bytes.len() - 1) / 2);
    for (i, a) in bytes.iter().enumerate() {
        for b in &bytes[i + 1..] {
            let block = a.iter().flat_map(|x| b.iter().map(move |y| u8::from(x != y))).collect();
            blocks.push(block);
        }
    }
    Ok(WeightsMatrix {
        lengths: bytes.iter().map(|s| s.len()).collect(),
        blocks,
    })
}

/// Constraint weights for the one-column and ordering terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Penalties {
    pub one_column: f64,
    pub order: f64,
}

impl Penalties {
    /// One unit above the problem's feasible objective bound.
    pub fn for_problem(problem: &CafProblem) -> Self {
        let p = problem.objective_bound() + 1.0;
        Self {
            one_column: p,
            order: p,
        }
    }

    /// `1 + g * L^2 * C + sum_{s1<s2} N1 * N2`.
    pub fn crude(problem: &CafProblem) -> Self {
        let l = problem.seq_count() as f64;
        let lens = problem.lengths();
        let mut cross = 0usize;
        for (i, &a) in lens.iter().enumerate() {
            cross += lens[i + 1..].iter().map(|&b| a * b).sum::<usize>();
        }
        let p = 1.0 + problem.gap_penalty() * l * l * problem.columns() as f64 + cross as f64;
        Self {
            one_column: p,
            order: p,
        }
    }
}

/// Quadratic binary energy `offset + sum linear[i] x_i + sum q[i,j] x_i x_j`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Qubo {
    num_vars: usize,
    linear: Vec<f64>,
    quadratic: BTreeMap<(usize, usize), f64>,
    offset: f64,
}

impl Qubo {
    pub fn new(num_vars: usize) -> Self {
        Self {
            num_vars,
            linear: vec![0.0; num_vars],
            quadratic: BTreeMap::new(),
            offset: 0.0,
        }
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn linear(&self) -> &[f64] {
        &self.linear
    }

    /// Off-diagonal terms keyed by `(i, j)` with `i < j`.
    pub fn quadratic(&self) -> &BTreeMap<(usize, usize), f64> {
        &self.quadratic
    }

    pub fn add_offset(&mut self, value: f64) {
        self.offset += value;
    }

    pub fn add_linear(&mut self, i: usize, value: f64) {
        self.linear[i] += value;
    }

    /// Adds `value * x_i * x_j`; a diagonal term folds into the linear
    /// coefficient because `x * x = x` on binaries.
    pub fn add_quadratic(&mut self, i: usize, j: usize, value: f64) {
        assert!(i < self.num_vars && j < self.num_vars);
        if i == j {
            self.linear[i] += value;
            return;
        }
        let key = if i < j { (i, j) } else { (j, i) };
        *self.quadratic.entry(key).or_insert(0.0) += value;
    }

    fn prune_zeros(&mut self) {
        self.quadratic.retain(|_, v| *v != 0.0);
    }

    pub fn energy(&self, x: &[bool]) -> f64 {
        assert_eq!(x.len(), self.num_vars, "assignment length mismatch");
        let mut e = self.offset;
        for (i, &c) in self.linear.iter().enumerate() {
            if x[i] {
                e += c;
            }
        }
        for (&(i, j), &c) in &self.quadratic {
            if x[i] && x[j] {
                e += c;
            }
        }
        e
    }

    /// Symmetric adjacency lists of the quadratic terms.
    pub fn neighbors(&self) -> Vec<Vec<(usize, f64)>> {
        let mut adj = vec![Vec::new(); self.num_vars];
        for (&(i, j), &c) in &self.quadratic {
            adj[i].push((j, c));
            adj[j].push((i, c));
        }
        adj
    }

    /// One `i j coeff` line per term (`i == j` for linear), ordered by
    /// indices, then `offset value`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut quad = self.quadratic.iter().peekable();
        for (i, &c) in self.linear.iter().enumerate() {
            if c != 0.0 {
                let _ = writeln!(out, "{i} {i} {c}");
            }
            while let Some((&(a, b), &q)) = quad.next_if(|((a, _), _)| *a == i) {
                let _ = writeln!(out, "{a} {b} {q}");
            }
        }
        let _ = writeln!(out, "offset {}", self.offset);
        out
    }
}

/// Assembles the full energy for one problem.
pub fn build_caf_qubo(problem: &CafProblem, weights: &WeightsMatrix, penalties: Penalties) -> Result<Qubo, QuboError> {
    let bound = problem.objective_bound();
    for got in [penalties.one_column, penalties.order] {
        if got.is_nan() || got <= bound {
            return Err(QuboError::PenaltyTooSmall { got, bound });
        }
    }
    if weights.seq_count() != problem.seq_count() || weights.lengths.as_slice() != problem.lengths() {
        return Err(QuboError::InvalidProblem("weights do not match problem shape".into()));
    }

    let lens = problem.lengths();
    let seqs = lens.len();
    let cols = problem.columns();
    let g = problem.gap_penalty();
    let partners = (seqs - 1) as f64;
    let mut q = Qubo::new(problem.num_vars());

    for (s, &len) in lens.iter().enumerate() {
        for n in 0..len {
            // (sum_c x - 1)^2 = 1 - sum_c x + 2 sum_{c<c'} x x'
            q.add_offset(penalties.one_column);
            for c in 0..cols {
                let v = problem.var_index(s, n, c);
                q.add_linear(v, g * partners - penalties.one_column);
                for c2 in (c + 1)..cols {
                    q.add_quadratic(v, problem.var_index(s, n, c2), 2.0 * penalties.one_column);
                }
                // y^2 cross terms within one row and column
                for m in (n + 1)..len {
                    q.add_quadratic(v, problem.var_index(s, m, c), 2.0 * g * partners);
                }
            }
            if n + 1 < len {
                for c in 0..cols {
                    let v = problem.var_index(s, n, c);
                    for c_next in 0..=c {
                        q.add_quadratic(v, problem.var_index(s, n + 1, c_next), penalties.order);
                    }
                }
            }
        }
    }

    for s1 in 0..seqs {
        for s2 in (s1 + 1)..seqs {
            for n1 in 0..lens[s1] {
                for n2 in 0..lens[s2] {
                    let coeff = f64::from(weights.get(s1, n1, s2, n2)) - 2.0 * g;
                    for c in 0..cols {
                        q.add_quadratic(problem.var_index(s1, n1, c), problem.var_index(s2, n2, c), coeff);
                    }
                }
            }
        }
    }

    q.prune_zeros();
    Ok(q)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn problem(seqs: &[&str], gaps: usize, g: f64) -> CafProblem {
        let n = seqs.iter().map(|s| s.len()).max().unwrap();
        CafProblem::for_sequences(seqs, n, gaps, g).unwrap()
    }

    /// Assignment placing each row's residues at the given columns.
    fn placement(p: &CafProblem, cols: &[&[usize]]) -> Vec<bool> {
        let mut x = vec![false; p.num_vars()];
        for (s, row) in cols.iter().enumerate() {
            for (n, &c) in row.iter().enumerate() {
                x[p.var_index(s, n, c)] = true;
            }
        }
        x
    }

    #[test]
    fn weights_tables() {
        let w = build_weights(&["AB", "AB"]).unwrap();
        assert_eq!(
            [
                w.get(0, 0, 1, 0),
                w.get(0, 0, 1, 1),
                w.get(0, 1, 1, 0),
                w.get(0, 1, 1, 1)
            ],
            [0, 1, 1, 0]
        );
        assert_eq!(w.get(1, 1, 0, 0), 1);
        let w = build_weights(&["A", "T"]).unwrap();
        assert_eq!(w.get(0, 0, 1, 0), 1);
        let w = build_weights(&["AT", "T"]).unwrap();
        assert_eq!((w.get(0, 0, 1, 0), w.get(0, 1, 1, 0)), (1, 0));
        assert_eq!(build_weights(&["A"]), Err(QuboError::SingleSequence));
    }

    #[test]
    fn weights_with_three_rows() {
        let w = build_weights(&["AC", "CA", "C"]).unwrap();
        assert_eq!(w.get(0, 1, 2, 0), 0);
        assert_eq!(w.get(1, 0, 2, 0), 0);
        assert_eq!(w.get(1, 1, 2, 0), 1);
        assert_eq!(w.get(2, 0, 0, 0), 1);
    }

    #[test]
    fn variable_counts() {
        let p = CafProblem::new(vec![2, 1], 2, 1, 0.5).unwrap();
        assert_eq!(variable_count(&p), 9);
        assert_eq!(p.num_vars(), 9);
        let p = CafProblem::new(vec![5], 5, 0, 0.5).unwrap();
        assert_eq!(variable_count(&p), 25);
        let p = CafProblem::new(vec![8, 8, 9, 7, 8, 7], 9, 0, 0.5).unwrap();
        assert_eq!(variable_count(&p), 423);
    }

    #[test]
    fn var_index_round_trip() {
        let p = CafProblem::new(vec![3, 1, 2], 3, 2, 0.5).unwrap();
        let mut seen = vec![false; p.num_vars()];
        for s in 0..3 {
            for n in 0..p.lengths()[s] {
                for c in 0..p.columns() {
                    let v = p.var_index(s, n, c);
                    assert!(!seen[v]);
                    seen[v] = true;
                    assert_eq!(p.var_coords(v), (s, n, c));
                }
            }
        }
        assert!(seen.into_iter().all(|b| b));
    }

    #[test]
    fn invalid_problems() {
        assert!(CafProblem::new(vec![], 1, 0, 0.5).is_err());
        assert!(CafProblem::new(vec![3], 2, 0, 0.5).is_err());
        assert!(CafProblem::new(vec![0], 2, 0, 0.5).is_err());
        assert!(CafProblem::new(vec![1], 2, 0, 1.0).is_err());
        assert!(CafProblem::new(vec![1], 2, 0, -0.1).is_err());
    }

    #[test]
    fn penalty_check() {
        let p = problem(&["AB", "AB"], 0, 0.5);
        let w = build_weights(&["AB", "AB"]).unwrap();
        let bound = p.objective_bound();
        let small = Penalties {
            one_column: bound,
            order: bound + 5.0,
        };
        assert!(matches!(
            build_caf_qubo(&p, &w, small),
            Err(QuboError::PenaltyTooSmall { .. })
        ));
        assert!(build_caf_qubo(&p, &w, Penalties::crude(&p)).is_ok());
        assert!(Penalties::crude(&p).one_column >= Penalties::for_problem(&p).one_column);
    }

    #[test]
    fn identical_pair_identity_is_zero() {
        let p = problem(&["AB", "AB"], 0, 0.5);
        let w = build_weights(&["AB", "AB"]).unwrap();
        let q = build_caf_qubo(&p, &w, Penalties::for_problem(&p)).unwrap();
        assert_eq!(q.energy(&placement(&p, &[&[0, 1], &[0, 1]])), 0.0);
    }

    #[test]
    fn forced_mismatch_costs_one() {
        let p = problem(&["A", "T"], 0, 0.5);
        let w = build_weights(&["A", "T"]).unwrap();
        let q = build_caf_qubo(&p, &w, Penalties::for_problem(&p)).unwrap();
        assert_eq!(q.energy(&placement(&p, &[&[0], &[0]])), 1.0);
    }

    #[test]
    fn gap_free_penalty_zero_cost() {
        let p = problem(&["AT", "T"], 1, 0.0);
        let w = build_weights(&["AT", "T"]).unwrap();
        let q = build_caf_qubo(&p, &w, Penalties::for_problem(&p)).unwrap();
        // AT- / -T-
        assert_eq!(q.energy(&placement(&p, &[&[0, 1], &[1]])), 0.0);
        // -AT / T-- : both residues meet gaps, no mismatch pair
        assert_eq!(q.energy(&placement(&p, &[&[1, 2], &[0]])), 0.0);
        // AT- / T-- : A vs T
        assert_eq!(q.energy(&placement(&p, &[&[0, 1], &[0]])), 1.0);
    }

    #[test]
    fn infeasible_states_pay_penalties() {
        let p = problem(&["AB", "AB"], 0, 0.5);
        let w = build_weights(&["AB", "AB"]).unwrap();
        let pen = Penalties::for_problem(&p);
        let q = build_caf_qubo(&p, &w, pen).unwrap();
        let zeros = vec![false; p.num_vars()];
        assert_eq!(q.energy(&zeros), 4.0 * pen.one_column);
        // both elements of row 0 in column 0: one ordering violation
        let x = placement(&p, &[&[0, 0], &[0, 1]]);
        assert!(q.energy(&x) >= pen.order);
    }

    #[test]
    fn text_dump_is_ordered() {
        let p = problem(&["A", "T"], 0, 0.25);
        let w = build_weights(&["A", "T"]).unwrap();
        let q = build_caf_qubo(
            &p,
            &w,
            Penalties {
                one_column: 10.0,
                order: 10.0,
            },
        )
        .unwrap();
        // one column: linear g - A per var, cross term 1 - 2g, offset 2A
        assert_eq!(q.to_text(), "0 0 -9.75\n0 1 0.5\n1 1 -9.75\noffset 20\n");
    }
}
