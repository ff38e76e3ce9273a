//! k-SAT instances and the multilinear problem Hamiltonian built from them.
//!
//! A clause `(l_1 ∨ … ∨ l_k)` with literal signs `s_m` contributes
//! `2^-k Π_m (1 - s_m z_m)` to the energy. On `±1` assignments this is the
//! indicator of the clause being violated, so the energy counts unsatisfied
//! clauses; on relaxed coordinates `z ∈ [-1, 1]^N` it is the multilinear
//! extension the spin solvers descend on.

use std::collections::HashMap;
use std::fmt::Write as _;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::classical::ClassicalSpinState;
use crate::error::{Error, Result};

/// Largest instance accepted by [`brute_force_ground`].
pub const BRUTE_FORCE_MAX_VARS: usize = 24;

/// Tolerance on `|z_i| <= 1` for relaxed evaluation.
const RELAXED_BOUND_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Literal {
    pub var: usize,
    /// `+1` if the literal is satisfied by `z_var = +1`, `-1` for a negated variable.
    pub sign: i8,
}

impl Literal {
    pub fn new(var: usize, sign: i8) -> Result<Self> {
        if sign != 1 && sign != -1 {
            return Err(Error::InvalidFormula(format!("literal sign must be ±1, got {sign}")));
        }
        Ok(Self { var, sign })
    }

    pub fn positive(var: usize) -> Self {
        Self { var, sign: 1 }
    }

    pub fn negative(var: usize) -> Self {
        Self { var, sign: -1 }
    }

    pub fn is_satisfied_by(&self, value: i8) -> bool {
        value == self.sign
    }

    /// One-based signed DIMACS integer.
    pub fn to_dimacs(&self) -> i64 {
        (self.var as i64 + 1) * self.sign as i64
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Clause {
    literals: Vec<Literal>,
}

impl Clause {
    /// Builds a clause; variables must be pairwise distinct and the clause non-empty.
    pub fn new(literals: Vec<Literal>) -> Result<Self> {
        if literals.is_empty() {
            return Err(Error::InvalidFormula("empty clause".into()));
        }
        for (a, la) in literals.iter().enumerate() {
            if la.sign != 1 && la.sign != -1 {
                return Err(Error::InvalidFormula(format!("literal sign must be ±1, got {}", la.sign)));
            }
            if literals[..a].iter().any(|lb| lb.var == la.var) {
                return Err(Error::InvalidFormula(format!(
                    "repeated variable {} in clause",
                    la.var + 1
                )));
            }
        }
        Ok(Self { literals })
    }

    pub fn literals(&self) -> &[Literal] {
        &self.literals
    }

    pub fn len(&self) -> usize {
        self.literals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.literals.is_empty()
    }

    pub fn is_satisfied(&self, values: &[i8]) -> bool {
        self.literals.iter().any(|l| l.is_satisfied_by(values[l.var]))
    }

    /// Clause-product form `2^-k Π (1 - s z)`, evaluated without expansion.
    pub fn product_value(&self, z: &[f64]) -> f64 {
        let scale = 0.5f64.powi(self.literals.len() as i32);
        self.literals
            .iter()
            .fold(scale, |acc, l| acc * (1.0 - l.sign as f64 * z[l.var]))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CnfFormula {
    n_vars: usize,
    k: usize,
    clauses: Vec<Clause>,
}

impl CnfFormula {
    /// Every clause must have exactly `k` literals over variables `< n_vars`.
    pub fn new(n_vars: usize, k: usize, clauses: Vec<Clause>) -> Result<Self> {
        for (a, clause) in clauses.iter().enumerate() {
            if clause.len() != k {
                return Err(Error::InvalidFormula(format!(
                    "clause {a} has {} literals, expected {k}",
                    clause.len()
                )));
            }
            if let Some(l) = clause.literals().iter().find(|l| l.var >= n_vars) {
                return Err(Error::InvalidFormula(format!(
                    "clause {a} references variable {} but n_vars = {n_vars}",
                    l.var + 1
                )));
            }
        }
        Ok(Self { n_vars, k, clauses })
    }

    pub fn empty(n_vars: usize) -> Self {
        Self { n_vars, k: 0, clauses: Vec::new() }
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn clauses(&self) -> &[Clause] {
        &self.clauses
    }

    pub fn num_clauses(&self) -> usize {
        self.clauses.len()
    }

    /// Sum of clause products, the unexpanded form of the energy.
    pub fn clause_form_energy(&self, z: &[f64]) -> f64 {
        self.clauses.iter().map(|c| c.product_value(z)).sum()
    }
}

/// `M = ⌊αN⌋`, guarded against products like `1.2 * 12 = 14.399…`.
pub fn clauses_for_density(n: usize, alpha: f64) -> usize {
    (alpha * n as f64 + 1e-9).floor().max(0.0) as usize
}

pub fn parse_dimacs(text: &str) -> Result<CnfFormula> {
    let mut header: Option<(usize, usize)> = None;
    let mut clauses: Vec<Clause> = Vec::new();
    let mut current: Vec<Literal> = Vec::new();
    let mut k: Option<usize> = None;
    let mut last_line = 0;

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        last_line = line_no;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('c') {
            continue;
        }
        if line.starts_with('%') {
            break;
        }
        if line.starts_with('p') {
            if header.is_some() {
                return Err(dimacs_err(line_no, "duplicate header"));
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 4 || fields[0] != "p" || fields[1] != "cnf" {
                return Err(dimacs_err(line_no, "malformed header, expected `p cnf N M`"));
            }
            let n = fields[2]
                .parse::<usize>()
                .map_err(|_| dimacs_err(line_no, "malformed variable count in header"))?;
            let m = fields[3]
                .parse::<usize>()
                .map_err(|_| dimacs_err(line_no, "malformed clause count in header"))?;
            header = Some((n, m));
            continue;
        }
        let (n, _) = header.ok_or_else(|| dimacs_err(line_no, "clause before header"))?;
        for tok in line.split_whitespace() {
            let v: i64 = tok
                .parse()
                .map_err(|_| dimacs_err(line_no, &format!("invalid literal `{tok}`")))?;
            if v == 0 {
                let lits = std::mem::take(&mut current);
                if lits.is_empty() {
                    return Err(dimacs_err(line_no, "empty clause"));
                }
                let clause = Clause::new(lits).map_err(|e| match e {
                    Error::InvalidFormula(msg) => dimacs_err(line_no, &msg),
                    other => other,
                })?;
                match k {
                    None => k = Some(clause.len()),
                    Some(k) if k != clause.len() => {
                        return Err(dimacs_err(
                            line_no,
                            &format!("clause has {} literals, expected {k}", clause.len()),
                        ))
                    }
                    _ => {}
                }
                clauses.push(clause);
                continue;
            }
            let var = v.unsigned_abs() as usize;
            if var > n {
                return Err(dimacs_err(
                    line_no,
                    &format!("variable {var} out of range 1..={n}"),
                ));
            }
            current.push(Literal { var: var - 1, sign: if v > 0 { 1 } else { -1 } });
        }
    }

    let (n, m) = header.ok_or_else(|| dimacs_err(last_line.max(1), "missing `p cnf` header"))?;
    if !current.is_empty() {
        return Err(dimacs_err(last_line, "unterminated clause (missing trailing 0)"));
    }
    if clauses.len() != m {
        return Err(dimacs_err(
            last_line.max(1),
            &format!("header declares {m} clauses, found {}", clauses.len()),
        ));
    }
    CnfFormula::new(n, k.unwrap_or(0), clauses)
}

fn dimacs_err(line: usize, msg: &str) -> Error {
    Error::Dimacs { line, msg: msg.to_string() }
}

pub fn emit_dimacs(formula: &CnfFormula) -> String {
    let mut out = String::with_capacity(16 + formula.num_clauses() * 4 * (formula.k() + 1));
    let _ = writeln!(out, "p cnf {} {}", formula.n_vars(), formula.num_clauses());
    for clause in formula.clauses() {
        for l in clause.literals() {
            let _ = write!(out, "{} ", l.to_dimacs());
        }
        out.push_str("0\n");
    }
    out
}

/// Uniform random k-SAT: each clause draws `k` distinct variables and negates
/// each independently with probability 1/2. Duplicate clauses are allowed.
pub fn generate_random_ksat(n: usize, k: usize, m: usize, seed: u64) -> Result<CnfFormula> {
    if k > n {
        return Err(Error::InvalidArgument(format!("k = {k} exceeds n = {n}")));
    }
    if k == 0 && m > 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut clauses = Vec::with_capacity(m);
    for _ in 0..m {
        let mut vars = index::sample(&mut rng, n, k).into_vec();
        vars.sort_unstable();
        let literals = vars
            .into_iter()
            .map(|var| Literal { var, sign: if rng.gen_bool(0.5) { 1 } else { -1 } })
            .collect();
        clauses.push(Clause { literals });
    }
    Ok(CnfFormula { n_vars: n, k, clauses })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HuboTerm {
    pub coefficient: f64,
    /// Sorted, distinct; empty for the constant term.
    pub variables: Vec<usize>,
}

/// Multilinear polynomial `Σ_S c_S Π_{i∈S} z_i` in flat storage, with a
/// variable → term incidence index for gradient evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct HuboPolynomial {
    n_vars: usize,
    coeffs: Vec<f64>,
    term_offsets: Vec<usize>,
    term_vars: Vec<usize>,
    incidence_offsets: Vec<usize>,
    incidence: Vec<usize>,
}

impl HuboPolynomial {
    /// Builds a polynomial, merging terms with equal variable sets in first-seen order.
    pub fn from_terms<I>(n_vars: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = HuboTerm>,
    {
        let mut index: HashMap<Vec<usize>, usize> = HashMap::new();
        let mut merged: Vec<(Vec<usize>, f64)> = Vec::new();
        for term in terms {
            if !term.coefficient.is_finite() {
                return Err(Error::InvalidArgument("non-finite term coefficient".into()));
            }
            let mut vars = term.variables;
            vars.sort_unstable();
            if vars.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::InvalidArgument("repeated variable in term".into()));
            }
            if let Some(&v) = vars.last() {
                if v >= n_vars {
                    return Err(Error::InvalidArgument(format!(
                        "term variable {v} out of range for {n_vars} variables"
                    )));
                }
            }
            match index.get(&vars) {
                Some(&slot) => merged[slot].1 += term.coefficient,
                None => {
                    index.insert(vars.clone(), merged.len());
                    merged.push((vars, term.coefficient));
                }
            }
        }
        Ok(Self::from_merged(n_vars, merged))
    }

    fn from_merged(n_vars: usize, merged: Vec<(Vec<usize>, f64)>) -> Self {
        let mut coeffs = Vec::with_capacity(merged.len());
        let mut term_offsets = Vec::with_capacity(merged.len() + 1);
        let mut term_vars = Vec::new();
        let mut degree = vec![0usize; n_vars];
        term_offsets.push(0);
        for (vars, c) in &merged {
            coeffs.push(*c);
            for &v in vars {
                degree[v] += 1;
            }
            term_vars.extend_from_slice(vars);
            term_offsets.push(term_vars.len());
        }

        let mut incidence_offsets = Vec::with_capacity(n_vars + 1);
        incidence_offsets.push(0);
        for d in &degree {
            incidence_offsets.push(incidence_offsets.last().unwrap() + d);
        }
        let mut fill = incidence_offsets[..n_vars].to_vec();
        let mut incidence = vec![0usize; term_vars.len()];
        for (t, (vars, _)) in merged.iter().enumerate() {
            for &v in vars {
                incidence[fill[v]] = t;
                fill[v] += 1;
            }
        }

        Self { n_vars, coeffs, term_offsets, term_vars, incidence_offsets, incidence }
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn num_terms(&self) -> usize {
        self.coeffs.len()
    }

    pub fn term(&self, t: usize) -> (f64, &[usize]) {
        (self.coeffs[t], &self.term_vars[self.term_offsets[t]..self.term_offsets[t + 1]])
    }

    pub fn terms(&self) -> impl Iterator<Item = (f64, &[usize])> + '_ {
        (0..self.num_terms()).map(move |t| self.term(t))
    }

    pub fn to_terms(&self) -> Vec<HuboTerm> {
        self.terms()
            .map(|(c, vars)| HuboTerm { coefficient: c, variables: vars.to_vec() })
            .collect()
    }

    /// Indices of the terms that contain variable `i`.
    pub fn incident_terms(&self, i: usize) -> &[usize] {
        &self.incidence[self.incidence_offsets[i]..self.incidence_offsets[i + 1]]
    }

    pub fn max_order(&self) -> usize {
        self.term_offsets.windows(2).map(|w| w[1] - w[0]).max().unwrap_or(0)
    }

    fn check_dims(&self, z: &[f64]) -> Result<()> {
        if z.len() != self.n_vars {
            return Err(Error::DimensionMismatch { expected: self.n_vars, got: z.len() });
        }
        if let Some(v) = z.iter().find(|v| !(v.abs() <= 1.0 + RELAXED_BOUND_SLACK)) {
            return Err(Error::InvalidArgument(format!("relaxed coordinate {v} outside [-1, 1]")));
        }
        Ok(())
    }

    pub fn energy(&self, z: &[f64]) -> Result<f64> {
        self.check_dims(z)?;
        Ok(self.energy_unchecked(z))
    }

    pub fn gradient_z(&self, z: &[f64]) -> Result<Vec<f64>> {
        self.check_dims(z)?;
        let mut grad = vec![0.0; self.n_vars];
        self.gradient_into(z, &mut grad);
        Ok(grad)
    }

    /// Energy without bounds or dimension checks; callers guarantee `z.len() == n_vars`.
    pub fn energy_unchecked(&self, z: &[f64]) -> f64 {
        let mut e = 0.0;
        for t in 0..self.coeffs.len() {
            let vars = &self.term_vars[self.term_offsets[t]..self.term_offsets[t + 1]];
            e += vars.iter().fold(self.coeffs[t], |acc, &v| acc * z[v]);
        }
        e
    }

    /// `∂E/∂z_i` for one variable, summed over its incident terms.
    pub fn partial(&self, i: usize, z: &[f64]) -> f64 {
        let mut g = 0.0;
        for &t in self.incident_terms(i) {
            let vars = &self.term_vars[self.term_offsets[t]..self.term_offsets[t + 1]];
            let mut p = self.coeffs[t];
            for &v in vars {
                if v != i {
                    p *= z[v];
                }
            }
            g += p;
        }
        g
    }

    /// Full gradient into `out`.
    pub fn gradient_into(&self, z: &[f64], out: &mut [f64]) {
        self.energy_gradient_into(z, out);
    }

    /// Energy and gradient in one pass over the terms.
    pub fn energy_gradient_into(&self, z: &[f64], out: &mut [f64]) -> f64 {
        let out = &mut out[..self.n_vars];
        out.fill(0.0);
        let mut e = 0.0;
        for (t, &c) in self.coeffs.iter().enumerate() {
            let vars = &self.term_vars[self.term_offsets[t]..self.term_offsets[t + 1]];
            match *vars {
                [] => e += c,
                [a] => {
                    e += c * z[a];
                    out[a] += c;
                }
                [a, b] => {
                    let (za, zb) = (z[a], z[b]);
                    e += c * za * zb;
                    out[a] += c * zb;
                    out[b] += c * za;
                }
                [a, b, d] => {
                    let (za, zb, zd) = (z[a], z[b], z[d]);
                    let ab = c * za * zb;
                    e += ab * zd;
                    out[a] += c * zb * zd;
                    out[b] += c * za * zd;
                    out[d] += ab;
                }
                _ => {
                    e += vars.iter().fold(c, |acc, &v| acc * z[v]);
                    for (j, &v) in vars.iter().enumerate() {
                        let others = vars
                            .iter()
                            .enumerate()
                            .filter(|&(l, _)| l != j)
                            .fold(c, |acc, (_, &u)| acc * z[u]);
                        out[v] += others;
                    }
                }
            }
        }
        e
    }

    /// Undirected graph with an edge `{i, j}` whenever some term contains both.
    pub fn interaction_graph(&self) -> InteractionGraph {
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); self.n_vars];
        for (_, vars) in self.terms() {
            for (a, &i) in vars.iter().enumerate() {
                for &j in &vars[a + 1..] {
                    adj[i].push(j);
                    adj[j].push(i);
                }
            }
        }
        InteractionGraph::from_adjacency(adj)
    }
}

/// Expands every clause into at most `2^k` monomials and merges like terms.
pub fn cnf_to_hubo(formula: &CnfFormula) -> HuboPolynomial {
    let mut index: HashMap<Vec<usize>, usize> = HashMap::new();
    let mut merged: Vec<(Vec<usize>, f64)> = Vec::new();
    for clause in formula.clauses() {
        let lits = clause.literals();
        let k = lits.len();
        let scale = 0.5f64.powi(k as i32);
        for mask in 0u32..(1u32 << k) {
            let mut coeff = scale;
            let mut vars = Vec::with_capacity(mask.count_ones() as usize);
            for (m, l) in lits.iter().enumerate() {
                if mask & (1 << m) != 0 {
                    coeff *= -(l.sign as f64);
                    vars.push(l.var);
                }
            }
            vars.sort_unstable();
            match index.get(&vars) {
                Some(&slot) => merged[slot].1 += coeff,
                None => {
                    index.insert(vars.clone(), merged.len());
                    merged.push((vars, coeff));
                }
            }
        }
    }
    HuboPolynomial::from_merged(formula.n_vars(), merged)
}

/// Undirected simple graph in CSR form; neighbour lists are sorted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InteractionGraph {
    offsets: Vec<usize>,
    neighbors: Vec<usize>,
}

impl InteractionGraph {
    pub fn from_adjacency(mut adj: Vec<Vec<usize>>) -> Self {
        let mut offsets = Vec::with_capacity(adj.len() + 1);
        let mut neighbors = Vec::new();
        offsets.push(0);
        for list in &mut adj {
            list.sort_unstable();
            list.dedup();
            neighbors.extend_from_slice(list);
            offsets.push(neighbors.len());
        }
        Self { offsets, neighbors }
    }

    /// Complete graph on `n` vertices.
    pub fn complete(n: usize) -> Self {
        let adj = (0..n).map(|i| (0..n).filter(|&j| j != i).collect()).collect();
        Self::from_adjacency(adj)
    }

    pub fn num_vertices(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.offsets[i + 1] - self.offsets[i]
    }

    pub fn degrees(&self) -> Vec<usize> {
        (0..self.num_vertices()).map(|i| self.degree(i)).collect()
    }

    pub fn num_edges(&self) -> usize {
        self.neighbors.len() / 2
    }

    /// Edges as `(i, j)` with `i < j`, in lexicographic order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        (0..self.num_vertices())
            .flat_map(|i| self.neighbors(i).iter().filter(move |&&j| j > i).map(move |&j| (i, j)))
            .collect()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.neighbors(i).binary_search(&j).is_ok()
    }

    pub(crate) fn offsets(&self) -> &[usize] {
        &self.offsets
    }

    pub(crate) fn flat_neighbors(&self) -> &[usize] {
        &self.neighbors
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SpinAssignment(Vec<i8>);

impl SpinAssignment {
    pub fn new(values: Vec<i8>) -> Result<Self> {
        if let Some(v) = values.iter().find(|&&v| v != 1 && v != -1) {
            return Err(Error::InvalidArgument(format!("spin value must be ±1, got {v}")));
        }
        Ok(Self(values))
    }

    /// Rounds each entry by sign; zero rounds to `+1`.
    pub fn from_signs(values: &[f64]) -> Self {
        Self(values.iter().map(|&v| if v < 0.0 { -1 } else { 1 }).collect())
    }

    /// Bit `i` of `bits` set means `z_i = -1` (little-endian, as in the statevector).
    pub fn from_bits(n: usize, bits: u64) -> Self {
        Self((0..n).map(|i| if (bits >> i) & 1 == 1 { -1 } else { 1 }).collect())
    }

    pub fn values(&self) -> &[i8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn to_reals(&self) -> Vec<f64> {
        self.0.iter().map(|&v| v as f64).collect()
    }
}

pub fn round_solution(spins: &ClassicalSpinState) -> SpinAssignment {
    SpinAssignment::from_signs(&spins.mz())
}

pub fn count_unsatisfied(formula: &CnfFormula, assignment: &SpinAssignment) -> Result<usize> {
    if assignment.len() != formula.n_vars() {
        return Err(Error::DimensionMismatch { expected: formula.n_vars(), got: assignment.len() });
    }
    let values = assignment.values();
    Ok(formula.clauses().iter().filter(|c| !c.is_satisfied(values)).count())
}

/// Exhaustive minimum of the unsatisfied-clause count. Assignments are visited
/// in lexicographic order with `-1 < +1`, so the first minimiser found is the
/// lexicographically smallest.
pub fn brute_force_ground(formula: &CnfFormula) -> Result<(f64, SpinAssignment)> {
    let n = formula.n_vars();
    if n > BRUTE_FORCE_MAX_VARS {
        return Err(Error::TooManyVariables { n, max: BRUTE_FORCE_MAX_VARS });
    }
    let mut values = vec![-1i8; n];
    let mut best = usize::MAX;
    let mut best_values = values.clone();
    for idx in 0u64..(1u64 << n) {
        for (i, v) in values.iter_mut().enumerate() {
            *v = if (idx >> (n - 1 - i)) & 1 == 0 { -1 } else { 1 };
        }
        let unsat = formula.clauses().iter().filter(|c| !c.is_satisfied(&values)).count();
        if unsat < best {
            best = unsat;
            best_values.copy_from_slice(&values);
            if best == 0 {
                break;
            }
        }
    }
    Ok((best as f64, SpinAssignment(best_values)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lit(v: usize, s: i8) -> Literal {
        Literal::new(v, s).unwrap()
    }

    fn two_clause() -> CnfFormula {
        CnfFormula::new(2, 2, vec![Clause::new(vec![lit(0, 1), lit(1, 1)]).unwrap()]).unwrap()
    }

    #[test]
    fn parses_minimal_dimacs() {
        let f = parse_dimacs("p cnf 2 1\n1 -2 0").unwrap();
        assert_eq!(f.n_vars(), 2);
        assert_eq!(f.num_clauses(), 1);
        assert_eq!(f.clauses()[0].literals(), &[lit(0, 1), lit(1, -1)]);
    }

    #[test]
    fn rejects_repeated_variable() {
        assert!(matches!(parse_dimacs("p cnf 2 1\n1 1 0"), Err(Error::Dimacs { .. })));
    }

    #[test]
    fn dimacs_error_paths() {
        assert!(parse_dimacs("p cnf x 1\n1 0").is_err());
        assert!(parse_dimacs("1 2 0\n").is_err());
        assert!(parse_dimacs("p cnf 2 1\n1 3 0").is_err());
        assert!(parse_dimacs("p cnf 2 2\n1 2 0").is_err());
        assert!(parse_dimacs("p cnf 2 1\n1 2").is_err());
        assert!(parse_dimacs("").is_err());
    }

    #[test]
    fn dimacs_comments_and_split_lines() {
        let f = parse_dimacs("c hello\nc world\np cnf 3 2\n1 -2\n 3 0\n-1 2 -3 0\n").unwrap();
        assert_eq!(f.num_clauses(), 2);
        assert_eq!(f.k(), 3);
    }

    #[test]
    fn emits_expected_lines() {
        let f = CnfFormula::new(2, 2, vec![Clause::new(vec![lit(0, 1), lit(1, -1)]).unwrap()]).unwrap();
        let text = emit_dimacs(&f);
        assert!(text.lines().any(|l| l == "1 -2 0"));
        assert_eq!(emit_dimacs(&CnfFormula::empty(5)), "p cnf 5 0\n");
    }

    #[test]
    fn generator_sizes_from_density() {
        let f = generate_random_ksat(12, 2, clauses_for_density(12, 1.2), 3).unwrap();
        assert_eq!(f.num_clauses(), 14);
        assert_eq!(f.n_vars(), 12);
        assert_eq!(clauses_for_density(10_000, 4.2), 42_000);
        assert_eq!(clauses_for_density(10, 4.2), 42);
        let big = generate_random_ksat(10_000, 3, 42_000, 1).unwrap();
        assert_eq!(big.num_clauses(), 42_000);
        assert!(generate_random_ksat(2, 3, 1, 0).is_err());
    }

    #[test]
    fn single_clause_expansions() {
        let h = cnf_to_hubo(&two_clause());
        let mut terms = h.to_terms();
        terms.sort_by(|a, b| a.variables.cmp(&b.variables));
        let expect = [(vec![], 0.25), (vec![0], -0.25), (vec![0, 1], 0.25), (vec![1], -0.25)];
        assert_eq!(terms.len(), 4);
        for (t, (vars, c)) in terms.iter().zip(expect.iter()) {
            assert_eq!(&t.variables, vars);
            assert_eq!(t.coefficient, *c);
        }

        let f1 = CnfFormula::new(1, 1, vec![Clause::new(vec![lit(0, 1)]).unwrap()]).unwrap();
        let h1 = cnf_to_hubo(&f1);
        assert_eq!(h1.energy(&[1.0]).unwrap(), 0.0);
        assert_eq!(h1.energy(&[-1.0]).unwrap(), 1.0);
        assert_eq!(h1.energy(&[0.0]).unwrap(), 0.5);
    }

    #[test]
    fn energy_examples() {
        let h = cnf_to_hubo(&two_clause());
        assert_eq!(h.energy(&[1.0, -1.0]).unwrap(), 0.0);
        assert_eq!(h.energy(&[-1.0, -1.0]).unwrap(), 1.0);
        assert_eq!(h.energy(&[0.0, 0.0]).unwrap(), 0.25);
        assert!(matches!(h.energy(&[0.0]), Err(Error::DimensionMismatch { .. })));
        assert!(h.energy(&[2.0, 0.0]).is_err());
    }

    #[test]
    fn gradient_examples() {
        let h = cnf_to_hubo(&two_clause());
        let g = h.gradient_z(&[0.0, 0.0]).unwrap();
        assert_eq!(g[0], -0.25);
        for z1 in [-1.0, -0.3, 0.0, 0.8] {
            assert_eq!(h.gradient_z(&[1.0, z1]).unwrap()[1], 0.0);
        }
        assert!(h.gradient_z(&[0.0; 3]).is_err());
    }

    #[test]
    fn rounding_tie_breaks_up() {
        let s = ClassicalSpinState::from_z(&[0.3, -0.9]);
        assert_eq!(round_solution(&s).values(), &[1, -1]);
        let s = ClassicalSpinState::from_z(&[0.0, 0.0]);
        assert_eq!(round_solution(&s).values(), &[1, 1]);
    }

    #[test]
    fn unsat_counting() {
        let f = two_clause();
        let a = SpinAssignment::new(vec![-1, -1]).unwrap();
        assert_eq!(count_unsatisfied(&f, &a).unwrap(), 1);
        let a = SpinAssignment::new(vec![1, -1]).unwrap();
        assert_eq!(count_unsatisfied(&f, &a).unwrap(), 0);
        assert!(count_unsatisfied(&f, &SpinAssignment::new(vec![1]).unwrap()).is_err());
        assert!(SpinAssignment::new(vec![0]).is_err());
    }

    #[test]
    fn brute_force_examples() {
        let (e, _) = brute_force_ground(&two_clause()).unwrap();
        assert_eq!(e, 0.0);
        let f = CnfFormula::new(
            1,
            1,
            vec![Clause::new(vec![lit(0, 1)]).unwrap(), Clause::new(vec![lit(0, -1)]).unwrap()],
        )
        .unwrap();
        let (e, a) = brute_force_ground(&f).unwrap();
        assert_eq!(e, 1.0);
        assert_eq!(a.values(), &[-1]);
        assert!(matches!(
            brute_force_ground(&CnfFormula::empty(25)),
            Err(Error::TooManyVariables { .. })
        ));
    }

    #[test]
    fn interaction_graph_examples() {
        let h = HuboPolynomial::from_terms(
            3,
            vec![HuboTerm { coefficient: 1.0, variables: vec![2, 0, 1] }],
        )
        .unwrap();
        assert_eq!(h.interaction_graph().edges(), vec![(0, 1), (0, 2), (1, 2)]);
        let lin = HuboPolynomial::from_terms(
            3,
            (0..3).map(|i| HuboTerm { coefficient: 0.5, variables: vec![i] }),
        )
        .unwrap();
        assert_eq!(lin.interaction_graph().num_edges(), 0);
    }

    #[test]
    fn from_terms_merges_and_validates() {
        let h = HuboPolynomial::from_terms(
            2,
            vec![
                HuboTerm { coefficient: 1.0, variables: vec![1, 0] },
                HuboTerm { coefficient: 0.5, variables: vec![0, 1] },
            ],
        )
        .unwrap();
        assert_eq!(h.num_terms(), 1);
        assert_eq!(h.term(0), (1.5, &[0usize, 1][..]));
        assert_eq!(h.incident_terms(1), &[0]);
        assert!(HuboPolynomial::from_terms(
            2,
            vec![HuboTerm { coefficient: 1.0, variables: vec![1, 1] }]
        )
        .is_err());
        assert!(HuboPolynomial::from_terms(
            2,
            vec![HuboTerm { coefficient: f64::NAN, variables: vec![0] }]
        )
        .is_err());
    }
}
