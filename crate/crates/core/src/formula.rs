//! 2-CNF data model: literals, clauses, formulas, correlated pairs,
//! incidence-graph neighborhoods, and random generation.
//!
//! Variables are 1-indexed to align with DIMACS. Clauses always contain two
//! distinct variables; duplicate clauses are allowed and tracked as separate
//! slots throughout the crate.

use crate::rng::Stream;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FormulaError {
    #[error("need at least 2 variables, got {0}")]
    TooFewVariables(u32),
    #[error("variable {0} out of range 1..={1}")]
    VariableOutOfRange(u32, u32),
    #[error("clause uses the same variable twice: {0}")]
    RepeatedVariable(u32),
}

/// A signed literal over a 1-indexed variable.
///
/// Encoded as `(var-1) << 1 | negated` so literals double as dense indices
/// in `0..2n`.
#[derive(Copy, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Lit(u32);

impl Lit {
    pub fn new(var: u32, sign: i8) -> Self {
        debug_assert!(var >= 1 && (sign == 1 || sign == -1));
        Lit((var - 1) << 1 | (sign < 0) as u32)
    }

    pub fn pos(var: u32) -> Self {
        Self::new(var, 1)
    }

    pub fn neg(var: u32) -> Self {
        Self::new(var, -1)
    }

    /// 1-indexed variable.
    pub fn var(self) -> u32 {
        (self.0 >> 1) + 1
    }

    pub fn sign(self) -> i8 {
        if self.0 & 1 == 0 {
            1
        } else {
            -1
        }
    }

    pub fn is_positive(self) -> bool {
        self.0 & 1 == 0
    }

    /// Dense index in `0..2n`.
    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn from_index(i: usize) -> Self {
        Lit(i as u32)
    }

    pub fn to_dimacs(self) -> i64 {
        self.var() as i64 * self.sign() as i64
    }

    pub fn from_dimacs(v: i64) -> Self {
        debug_assert!(v != 0);
        Lit::new(v.unsigned_abs() as u32, if v > 0 { 1 } else { -1 })
    }
}

impl std::ops::Not for Lit {
    type Output = Lit;
    fn not(self) -> Lit {
        Lit(self.0 ^ 1)
    }
}

impl std::fmt::Debug for Lit {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.to_dimacs())
    }
}

impl std::fmt::Display for Lit {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.to_dimacs())
    }
}

/// A 2-clause: an ordered pair of literals over distinct variables.
#[derive(Copy, Clone, PartialEq, Eq, Hash)]
pub struct Clause(pub Lit, pub Lit);

impl Clause {
    pub fn new(a: Lit, b: Lit) -> Self {
        debug_assert_ne!(a.var(), b.var());
        Clause(a, b)
    }

    pub fn lits(&self) -> [Lit; 2] {
        [self.0, self.1]
    }

    pub fn contains_var(&self, var: u32) -> bool {
        self.0.var() == var || self.1.var() == var
    }

    /// The literal of the other variable.
    pub fn other(&self, var: u32) -> Lit {
        debug_assert!(self.contains_var(var));
        if self.0.var() == var {
            self.1
        } else {
            self.0
        }
    }

    /// Sign of `var` in this clause.
    pub fn sign_of(&self, var: u32) -> i8 {
        debug_assert!(self.contains_var(var));
        if self.0.var() == var {
            self.0.sign()
        } else {
            self.1.sign()
        }
    }

    /// Unordered, sign-aware canonical form (lower variable first).
    pub fn normalized(&self) -> (Lit, Lit) {
        if self.0.var() <= self.1.var() {
            (self.0, self.1)
        } else {
            (self.1, self.0)
        }
    }
}

impl std::fmt::Debug for Clause {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({} {})", self.0, self.1)
    }
}

/// A 2-CNF over variables `1..=n`. Duplicate clauses are kept.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Cnf {
    n: u32,
    clauses: Vec<Clause>,
}

impl Cnf {
    pub fn new(n: u32, clauses: Vec<Clause>) -> Result<Self, FormulaError> {
        for c in &clauses {
            for l in c.lits() {
                if l.var() > n {
                    return Err(FormulaError::VariableOutOfRange(l.var(), n));
                }
            }
            if c.0.var() == c.1.var() {
                return Err(FormulaError::RepeatedVariable(c.0.var()));
            }
        }
        Ok(Cnf { n, clauses })
    }

    pub fn empty(n: u32) -> Self {
        Cnf {
            n,
            clauses: Vec::new(),
        }
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn m(&self) -> usize {
        self.clauses.len()
    }

    pub fn clauses(&self) -> &[Clause] {
        &self.clauses
    }

    pub fn clause(&self, i: usize) -> Clause {
        self.clauses[i]
    }

    /// Append a clause (the only supported mutation).
    pub fn push(&mut self, c: Clause) {
        debug_assert!(c.0.var() <= self.n && c.1.var() <= self.n);
        self.clauses.push(c);
    }

    /// With an extra clause appended.
    pub fn with_clause(&self, c: Clause) -> Cnf {
        let mut out = self.clone();
        out.push(c);
        out
    }

    /// Variable -> incident clause indices.
    pub fn occurrences(&self) -> Vec<Vec<u32>> {
        let mut occ = vec![Vec::new(); self.n as usize + 1];
        for (i, c) in self.clauses.iter().enumerate() {
            occ[c.0.var() as usize].push(i as u32);
            occ[c.1.var() as usize].push(i as u32);
        }
        occ
    }

    /// Literal-index -> clause indices containing that literal.
    pub fn literal_occurrences(&self) -> Vec<Vec<u32>> {
        let mut occ = vec![Vec::new(); 2 * self.n as usize];
        for (i, c) in self.clauses.iter().enumerate() {
            occ[c.0.index()].push(i as u32);
            occ[c.1.index()].push(i as u32);
        }
        occ
    }
}

/// Draw a uniformly random 2-clause on `1..=n`: an unordered pair of
/// distinct variables, each independently signed.
pub fn sample_clause(n: u32, rng: &mut Stream) -> Clause {
    let v1 = 1 + rng.below(n as u64) as u32;
    let mut v2 = 1 + rng.below(n as u64 - 1) as u32;
    if v2 >= v1 {
        v2 += 1;
    }
    let s1 = rng.sign();
    let s2 = rng.sign();
    Clause::new(Lit::new(v1, s1), Lit::new(v2, s2))
}

/// `m` i.i.d. uniform clauses (with replacement) on `n >= 2` variables.
pub fn sample_random_cnf(n: u32, m: usize, rng: &mut Stream) -> Result<Cnf, FormulaError> {
    if n < 2 {
        return Err(FormulaError::TooFewVariables(n));
    }
    let clauses = (0..m).map(|_| sample_clause(n, rng)).collect();
    Ok(Cnf { n, clauses })
}

/// Clause count for density `d`: `round(d*n/2)`, rounding half up.
///
/// This is the convention used by every experiment in the crate.
pub fn clause_count_for_density(n: u32, d: f64) -> usize {
    debug_assert!(d > 0.0);
    (d * n as f64 / 2.0).round() as usize
}

/// Exact first moment of the model count over the random formula
/// distribution: `2^n * (3/4)^m` (a fixed assignment violates a uniform
/// clause with probability 1/4).
pub fn expected_count(n: u32, m: usize) -> f64 {
    2f64.powi(n as i32) * 0.75f64.powi(m as i32)
}

/// A pair of formulas sharing a common clause prefix.
///
/// `formula(1)` is `shared || private1`, `formula(2)` is `shared || private2`;
/// the three sequences are mutually independent and i.i.d. uniform.
#[derive(Clone, Debug)]
pub struct CorrelatedPair {
    pub n: u32,
    pub shared: Vec<Clause>,
    pub private1: Vec<Clause>,
    pub private2: Vec<Clause>,
}

impl CorrelatedPair {
    pub fn formula(&self, h: u8) -> Cnf {
        debug_assert!(h == 1 || h == 2);
        let private = if h == 1 { &self.private1 } else { &self.private2 };
        let mut clauses = Vec::with_capacity(self.shared.len() + private.len());
        clauses.extend_from_slice(&self.shared);
        clauses.extend_from_slice(private);
        Cnf {
            n: self.n,
            clauses,
        }
    }

    pub fn shared_len(&self) -> usize {
        self.shared.len()
    }
}

/// Sample a correlated pair with `m_shared` common clauses and
/// `m_private` extra independent clauses on each side.
pub fn sample_correlated_pair(
    n: u32,
    m_shared: usize,
    m_private: usize,
    rng: &mut Stream,
) -> Result<CorrelatedPair, FormulaError> {
    if n < 2 {
        return Err(FormulaError::TooFewVariables(n));
    }
    let draw = |m: usize, tag: u64| -> Vec<Clause> {
        let mut s = rng.child("pair-stream", tag);
        (0..m).map(|_| sample_clause(n, &mut s)).collect()
    };
    Ok(CorrelatedPair {
        n,
        shared: draw(m_shared, 0),
        private1: draw(m_private, 1),
        private2: draw(m_private, 2),
    })
}

/// A depth-truncated neighborhood of a center variable in the bipartite
/// incidence graph.
#[derive(Clone, Debug)]
pub struct SubFormula {
    /// Center variable (original index).
    pub center: u32,
    /// Retained variables in BFS order (original indices); `vars[0] == center`.
    pub vars: Vec<u32>,
    /// Retained clause indices into the parent formula.
    pub clause_indices: Vec<usize>,
    /// Variables at exactly the truncation distance.
    pub boundary: Vec<u32>,
    /// The retained clauses renumbered onto `1..=vars.len()` in `vars` order.
    pub formula: Cnf,
}

impl SubFormula {
    /// Local (renumbered) variable for an original one.
    pub fn local_var(&self, original: u32) -> Option<u32> {
        self.vars
            .iter()
            .position(|&v| v == original)
            .map(|i| i as u32 + 1)
    }
}

/// Breadth-first truncation of the incidence graph at even distance
/// `radius` from variable `x`. Clauses at distance `radius - 1` keep both
/// endpoints; clauses beyond are dropped.
pub fn neighborhood(cnf: &Cnf, x: u32, radius: u32) -> SubFormula {
    debug_assert!(x >= 1 && x <= cnf.n());
    debug_assert!(radius % 2 == 0);
    let occ = cnf.occurrences();
    let mut dist = vec![u32::MAX; cnf.n() as usize + 1];
    let mut vars = vec![x];
    let mut clause_indices = Vec::new();
    let mut clause_seen = vec![false; cnf.m()];
    dist[x as usize] = 0;
    let mut head = 0;
    while head < vars.len() {
        let v = vars[head];
        head += 1;
        let dv = dist[v as usize];
        if dv >= radius {
            continue; // clauses incident to boundary variables lie beyond the radius
        }
        for &ci in &occ[v as usize] {
            let ci = ci as usize;
            if clause_seen[ci] {
                continue;
            }
            clause_seen[ci] = true;
            clause_indices.push(ci);
            let w = cnf.clause(ci).other(v);
            let wv = w.var();
            if dist[wv as usize] == u32::MAX {
                dist[wv as usize] = dv + 2;
                vars.push(wv);
            }
        }
    }
    clause_indices.sort_unstable();
    let boundary = vars
        .iter()
        .copied()
        .filter(|&v| dist[v as usize] == radius)
        .collect();
    let mut local = vec![0u32; cnf.n() as usize + 1];
    for (i, &v) in vars.iter().enumerate() {
        local[v as usize] = i as u32 + 1;
    }
    let clauses = clause_indices
        .iter()
        .map(|&ci| {
            let c = cnf.clause(ci);
            Clause::new(
                Lit::new(local[c.0.var() as usize], c.0.sign()),
                Lit::new(local[c.1.var() as usize], c.1.sign()),
            )
        })
        .collect();
    SubFormula {
        center: x,
        formula: Cnf {
            n: vars.len() as u32,
            clauses,
        },
        vars,
        clause_indices,
        boundary,
    }
}
