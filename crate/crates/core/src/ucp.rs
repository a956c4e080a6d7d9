//! Pessimistic unit clause propagation, formula pruning, and
//! clause-addition sensitivity sets.
//!
//! `run_ucp` closes an initial literal set under clause implications: a
//! clause `l ∨ l'` together with a true `¬l'` forces `l`. Variables that end
//! up with both polarities in the closure are conflicted and get the dummy
//! value 0; clauses whose variables are all conflicted are conflict clauses.
//! Pruning removes every conflict clause reachable from any singleton start;
//! the remaining formula is always satisfiable.

use crate::formula::{Clause, Cnf, Lit};
use std::collections::BTreeMap;
use std::fmt::Write as _;

/// Result of one propagation run: the literal closure, the partial
/// assignment on touched variables, and the conflict clauses.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UcpOutcome {
    /// The implication closure, sorted by literal index.
    pub closure: Vec<Lit>,
    /// Touched variable -> -1 / 0 / +1 (0 means both polarities reached).
    pub sigma: BTreeMap<u32, i8>,
    /// Indices of clauses whose two variables are both conflicted, sorted.
    pub conflicts: Vec<usize>,
}

impl UcpOutcome {
    /// Variables reached by the closure (`V` in the outcome).
    pub fn touched_vars(&self) -> Vec<u32> {
        self.sigma.keys().copied().collect()
    }

    /// Variables assigned the dummy value 0.
    pub fn conflicted_vars(&self) -> Vec<u32> {
        self.sigma
            .iter()
            .filter(|&(_, &s)| s == 0)
            .map(|(&v, _)| v)
            .collect()
    }
}

/// Reusable propagation engine; builds the literal occurrence index once
/// and runs many closures against it (pruning needs `2n` of them).
pub struct UcpEngine<'a> {
    cnf: &'a Cnf,
    /// literal index -> clauses containing that literal
    occ: Vec<Vec<u32>>,
    /// literal index -> stamp of the run that enqueued it
    stamp: Vec<u32>,
    clause_stamp: Vec<u32>,
    epoch: u32,
    queue: Vec<Lit>,
}

impl<'a> UcpEngine<'a> {
    pub fn new(cnf: &'a Cnf) -> Self {
        UcpEngine {
            occ: cnf.literal_occurrences(),
            stamp: vec![0; 2 * cnf.n() as usize],
            clause_stamp: vec![0; cnf.m()],
            epoch: 0,
            queue: Vec::new(),
            cnf,
        }
    }

    /// Closure of `initial` under implications, in discovery order.
    /// Processing order is irrelevant to the resulting set.
    pub fn closure(&mut self, initial: &[Lit]) -> Vec<Lit> {
        self.epoch += 1;
        self.queue.clear();
        for &l in initial {
            if self.stamp[l.index()] != self.epoch {
                self.stamp[l.index()] = self.epoch;
                self.queue.push(l);
            }
        }
        let mut head = 0;
        while head < self.queue.len() {
            let l = self.queue[head];
            head += 1;
            // clauses containing ¬l are now unit on their other literal
            for ci in &self.occ[(!l).index()] {
                let other = self.cnf.clause(*ci as usize).other(l.var());
                if self.stamp[other.index()] != self.epoch {
                    self.stamp[other.index()] = self.epoch;
                    self.queue.push(other);
                }
            }
        }
        self.queue.clone()
    }

    pub fn run(&mut self, initial: &[Lit]) -> UcpOutcome {
        let mut closure = self.closure(initial);
        let epoch = self.epoch;
        let in_closure = |l: Lit, stamp: &[u32]| stamp[l.index()] == epoch;

        let mut sigma = BTreeMap::new();
        for &l in &closure {
            let v = l.var();
            let value = if in_closure(!l, &self.stamp) {
                0
            } else {
                l.sign()
            };
            sigma.insert(v, value);
        }

        // conflict clauses: all incident variables conflicted; only clauses
        // touching a conflicted variable can qualify
        let mut conflicts = Vec::new();
        for (&v, &s) in &sigma {
            if s != 0 {
                continue;
            }
            for half in [Lit::pos(v), Lit::neg(v)] {
                for &ci in &self.occ[half.index()] {
                    if self.clause_stamp[ci as usize] == epoch {
                        continue;
                    }
                    self.clause_stamp[ci as usize] = epoch;
                    let c = self.cnf.clause(ci as usize);
                    if sigma.get(&c.0.var()) == Some(&0) && sigma.get(&c.1.var()) == Some(&0) {
                        conflicts.push(ci as usize);
                    }
                }
            }
        }
        conflicts.sort_unstable();
        closure.sort_unstable();
        UcpOutcome {
            closure,
            sigma,
            conflicts,
        }
    }
}

/// One-shot propagation from an initial literal set.
pub fn run_ucp(cnf: &Cnf, initial: &[Lit]) -> UcpOutcome {
    UcpEngine::new(cnf).run(initial)
}

/// All literals implication-reachable from `l` (including `l`).
pub fn reachable_literals(cnf: &Cnf, l: Lit) -> Vec<Lit> {
    let mut out = UcpEngine::new(cnf).closure(&[l]);
    out.sort_unstable();
    out
}

/// A formula split into the clauses that survive pruning and those removed
/// as conflict clauses of some singleton closure.
#[derive(Clone, Debug)]
pub struct PrunedCnf {
    pub base: Cnf,
    /// Surviving clause indices, ascending.
    pub kept: Vec<usize>,
    /// Removed clause indices, ascending.
    pub removed: Vec<usize>,
    /// Per-literal conflict clause counts, indexed by `Lit::index()`.
    pub per_literal_conflict_count: Vec<u32>,
}

impl PrunedCnf {
    /// The pruned formula (same variable set, kept clauses in order).
    pub fn pruned(&self) -> Cnf {
        let clauses = self.kept.iter().map(|&i| self.base.clause(i)).collect();
        Cnf::new(self.base.n(), clauses).expect("subset of a valid formula")
    }

    /// Number of literals whose singleton run produced any conflict.
    pub fn conflicted_literal_count(&self) -> usize {
        self.per_literal_conflict_count
            .iter()
            .filter(|&&c| c > 0)
            .count()
    }
}

/// Run propagation from every one of the `2n` singleton literal sets and
/// remove the union of the conflict clause sets.
pub fn prune(cnf: &Cnf) -> PrunedCnf {
    let mut engine = UcpEngine::new(cnf);
    let mut removed_mask = vec![false; cnf.m()];
    let mut per_literal = vec![0u32; 2 * cnf.n() as usize];
    for li in 0..2 * cnf.n() as usize {
        let out = engine.run(&[Lit::from_index(li)]);
        per_literal[li] = out.conflicts.len() as u32;
        for ci in out.conflicts {
            removed_mask[ci] = true;
        }
    }
    let (mut kept, mut removed) = (Vec::new(), Vec::new());
    for (i, &r) in removed_mask.iter().enumerate() {
        if r {
            removed.push(i);
        } else {
            kept.push(i);
        }
    }
    PrunedCnf {
        base: cnf.clone(),
        kept,
        removed,
        per_literal_conflict_count: per_literal,
    }
}

/// The sensitivity set of a clause `e` on variables `{v, v'}`: all literals
/// reachable from any literal whose closure meets `{v, ¬v}` or `{v', ¬v'}`.
///
/// Adding or removing `e` can change the pruned model count by at most a
/// factor `2^|N|` where `N` is this set.
pub fn clause_sensitivity_set(cnf: &Cnf, e: Clause) -> Vec<Lit> {
    let mut engine = UcpEngine::new(cnf);
    // literals whose closure reaches w or ¬w, by contraposition:
    // w ∈ closure(l)  ⟺  ¬l ∈ closure(¬w)
    let mut sources = Vec::new();
    for v in [e.0.var(), e.1.var()] {
        for start in [Lit::pos(v), Lit::neg(v)] {
            for l in engine.closure(&[start]) {
                sources.push(!l);
            }
        }
    }
    sources.sort_unstable();
    sources.dedup();
    let mut seen = vec![false; 2 * cnf.n() as usize];
    let mut out = Vec::new();
    for l in sources {
        for r in engine.closure(&[l]) {
            if !seen[r.index()] {
                seen[r.index()] = true;
                out.push(r);
            }
        }
    }
    out.sort_unstable();
    out
}

/// Debug dump: one line per literal, `lit: l1 l2 ...` with the closure in
/// sorted DIMACS order; lines ordered `1, -1, 2, -2, ...`.
pub fn dump_closures(cnf: &Cnf) -> String {
    let mut engine = UcpEngine::new(cnf);
    let mut out = String::new();
    for v in 1..=cnf.n() {
        for l in [Lit::pos(v), Lit::neg(v)] {
            let mut closure = engine.closure(&[l]);
            closure.sort_by_key(|x| (x.var(), !x.is_positive()));
            write!(out, "{}:", l.to_dimacs()).unwrap();
            for c in closure {
                write!(out, " {}", c.to_dimacs()).unwrap();
            }
            out.push('\n');
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::formula::{clause_count_for_density, sample_random_cnf};
    use crate::rng::Stream;

    fn cl(a: i64, b: i64) -> Clause {
        Clause::new(Lit::from_dimacs(a), Lit::from_dimacs(b))
    }

    fn lits(xs: &[i64]) -> Vec<Lit> {
        let mut v: Vec<Lit> = xs.iter().map(|&x| Lit::from_dimacs(x)).collect();
        v.sort_unstable();
        v
    }

    #[test]
    fn single_implication() {
        let f = Cnf::new(2, vec![cl(1, 2)]).unwrap();
        let out = run_ucp(&f, &[Lit::neg(1)]);
        assert_eq!(out.closure, lits(&[-1, 2]));
        assert_eq!(out.sigma.get(&1), Some(&-1));
        assert_eq!(out.sigma.get(&2), Some(&1));
        assert!(out.conflicts.is_empty());
    }

    #[test]
    fn conflict_marks_both_clauses() {
        let f = Cnf::new(2, vec![cl(1, 2), cl(1, -2)]).unwrap();
        let out = run_ucp(&f, &[Lit::neg(1)]);
        assert_eq!(out.closure, lits(&[-1, 1, 2, -2]));
        assert_eq!(out.sigma.get(&1), Some(&0));
        assert_eq!(out.sigma.get(&2), Some(&0));
        assert_eq!(out.conflicts, vec![0, 1]);
    }

    #[test]
    fn empty_start_is_empty() {
        let f = Cnf::new(2, vec![cl(1, 2)]).unwrap();
        let out = run_ucp(&f, &[]);
        assert!(out.closure.is_empty());
        assert!(out.conflicts.is_empty());
    }

    #[test]
    fn reachability_chain_and_contraposition() {
        let f = Cnf::new(3, vec![cl(-1, 2), cl(-2, 3)]).unwrap();
        assert_eq!(reachable_literals(&f, Lit::pos(1)), lits(&[1, 2, 3]));
        // x3 reachable from x1 implies ¬x1 reachable from ¬x3
        assert_eq!(reachable_literals(&f, Lit::neg(3)), lits(&[-3, -2, -1]));
        let g = Cnf::new(2, vec![cl(1, 2)]).unwrap();
        assert_eq!(reachable_literals(&g, Lit::pos(1)), lits(&[1]));
    }

    #[test]
    fn order_independence() {
        // reference: closure computed with randomly permuted work order
        fn shuffled_closure(cnf: &Cnf, start: Lit, rng: &mut Stream) -> Vec<Lit> {
            let occ = cnf.literal_occurrences();
            let mut in_set = vec![false; 2 * cnf.n() as usize];
            let mut set = vec![start];
            in_set[start.index()] = true;
            loop {
                let mut candidates = Vec::new();
                for &l in &set {
                    for &ci in &occ[(!l).index()] {
                        let o = cnf.clause(ci as usize).other(l.var());
                        if !in_set[o.index()] {
                            candidates.push(o);
                        }
                    }
                }
                if candidates.is_empty() {
                    break;
                }
                let pick = candidates[rng.below(candidates.len() as u64) as usize];
                in_set[pick.index()] = true;
                set.push(pick);
            }
            set.sort_unstable();
            set
        }
        let root = Stream::from_seed(17);
        for i in 0..100 {
            let mut s = root.child("order", i);
            let f = sample_random_cnf(12, 16, &mut s).unwrap();
            let start = Lit::from_index(s.below(24) as usize);
            let fast = reachable_literals(&f, start);
            for _ in 0..5 {
                assert_eq!(shuffled_closure(&f, start, &mut s), fast);
            }
        }
    }

    #[test]
    fn prune_full_contradiction() {
        let f = Cnf::new(2, vec![cl(1, 2), cl(1, -2), cl(-1, 2), cl(-1, -2)]).unwrap();
        let p = prune(&f);
        assert_eq!(p.removed, vec![0, 1, 2, 3]);
        assert!(p.kept.is_empty());
        assert_eq!(p.pruned().m(), 0);
    }

    #[test]
    fn prune_keeps_conflict_free_formula() {
        let f = Cnf::new(3, vec![cl(1, 2), cl(-2, 3)]).unwrap();
        let p = prune(&f);
        assert!(p.removed.is_empty());
        assert_eq!(p.pruned(), f);
    }

    #[test]
    fn prune_is_idempotent() {
        let root = Stream::from_seed(23);
        for i in 0..300 {
            let mut s = root.child("idem", i);
            let n = 10 + s.below(30) as u32;
            let d = [0.5, 1.0, 1.5, 2.0, 2.5][s.below(5) as usize];
            let m = clause_count_for_density(n, d);
            let f = sample_random_cnf(n, m, &mut s).unwrap();
            let once = prune(&f).pruned();
            let twice = prune(&once);
            assert!(twice.removed.is_empty(), "pruning not idempotent");
        }
    }

    #[test]
    fn sensitivity_set_on_empty_formula() {
        let f = Cnf::empty(2);
        let n = clause_sensitivity_set(&f, cl(1, 2));
        assert_eq!(n, lits(&[1, -1, 2, -2]));
    }

    #[test]
    fn sensitivity_set_pulls_in_implying_variable() {
        let f = Cnf::new(3, vec![cl(-3, 1)]).unwrap();
        let n = clause_sensitivity_set(&f, cl(1, 2));
        assert_eq!(n, lits(&[1, -1, 2, -2, 3, -3]));
    }

    #[test]
    fn closure_dump_golden() {
        let f = Cnf::new(2, vec![cl(-1, 2)]).unwrap();
        assert_eq!(dump_closures(&f), "1: 1 2\n-1: -1\n2: 2\n-2: -1 -2\n");
    }
}
