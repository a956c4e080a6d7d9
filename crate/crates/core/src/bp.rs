//! Belief propagation on 2-CNFs.
//!
//! Messages are probability distributions on `{+1, -1}`, stored as the
//! probability of `+1` and keyed by (clause index, endpoint) for
//! deterministic iteration. The update is synchronous: clause-to-variable
//! messages are recomputed from the old variable-to-clause messages and
//! vice versa. On a tree formula of depth `2l`, running `2l` rounds from
//! uniform messages makes the assembled root marginal exactly the marginal
//! of the uniform distribution on satisfying assignments.

use crate::formula::Cnf;
use crate::gw_tree::{project, CorrelatedTree, TreeFormula};
use crate::rng::Stream;

/// One message per (clause, endpoint) pair and direction.
#[derive(Clone, Debug, PartialEq)]
pub struct MessageSet {
    /// `[v0->a, v1->a, a->v0, a->v1]` per clause, each the mass on `+1`.
    per_clause: Vec<[f64; 4]>,
}

impl MessageSet {
    pub fn uniform(cnf: &Cnf) -> Self {
        MessageSet {
            per_clause: vec![[0.5; 4]; cnf.m()],
        }
    }

    pub fn var_to_clause(&self, clause: usize, endpoint: usize) -> f64 {
        self.per_clause[clause][endpoint]
    }

    pub fn clause_to_var(&self, clause: usize, endpoint: usize) -> f64 {
        self.per_clause[clause][2 + endpoint]
    }

    pub fn set_var_to_clause(&mut self, clause: usize, endpoint: usize, p: f64) {
        self.per_clause[clause][endpoint] = p;
    }

    pub fn set_clause_to_var(&mut self, clause: usize, endpoint: usize, p: f64) {
        self.per_clause[clause][2 + endpoint] = p;
    }

    /// Mass a message puts on sign `s`.
    fn eval(p: f64, s: i8) -> f64 {
        if s > 0 {
            p
        } else {
            1.0 - p
        }
    }
}

/// Occurrence-indexed view used to run updates repeatedly.
pub struct BpGraph<'a> {
    cnf: &'a Cnf,
    /// var -> (clause index, endpoint of var in it)
    occ: Vec<Vec<(u32, u8)>>,
}

impl<'a> BpGraph<'a> {
    pub fn new(cnf: &'a Cnf) -> Self {
        let mut occ = vec![Vec::new(); cnf.n() as usize + 1];
        for (i, c) in cnf.clauses().iter().enumerate() {
            occ[c.0.var() as usize].push((i as u32, 0));
            occ[c.1.var() as usize].push((i as u32, 1));
        }
        BpGraph { cnf, occ }
    }

    /// One synchronous update of all messages.
    pub fn step(&self, msgs: &MessageSet) -> MessageSet {
        let mut out = MessageSet {
            per_clause: vec![[0.5; 4]; self.cnf.m()],
        };
        // clause -> variable: depends on the other endpoint's old message
        for (ci, c) in self.cnf.clauses().iter().enumerate() {
            for (endpoint, lit) in [(0usize, c.0), (1, c.1)] {
                let other = if endpoint == 0 { c.1 } else { c.0 };
                let q = MessageSet::eval(msgs.var_to_clause(ci, 1 - endpoint), other.sign());
                // mass on the satisfying sign of this endpoint is 1/(1+q)
                let on_sign = 1.0 / (1.0 + q);
                let p_plus = if lit.sign() > 0 { on_sign } else { 1.0 - on_sign };
                out.set_clause_to_var(ci, endpoint, p_plus);
            }
        }
        // variable -> clause: product of the other incident clauses' old messages
        for v in 1..=self.cnf.n() {
            let inc = &self.occ[v as usize];
            for &(ci, endpoint) in inc {
                let mut up = 1.0;
                let mut down = 1.0;
                for &(cj, ej) in inc {
                    if cj == ci && ej == endpoint {
                        continue;
                    }
                    let p = msgs.clause_to_var(cj as usize, ej as usize);
                    up *= p;
                    down *= 1.0 - p;
                }
                let denom = up + down;
                let p_plus = if denom > 0.0 { up / denom } else { 0.5 };
                out.set_var_to_clause(ci as usize, endpoint as usize, p_plus);
            }
        }
        out
    }

    /// Marginal assembly from all incident clause-to-variable messages.
    pub fn marginals(&self, msgs: &MessageSet) -> Vec<f64> {
        let mut out = vec![0.5; self.cnf.n() as usize + 1];
        for v in 1..=self.cnf.n() {
            let mut up = 1.0;
            let mut down = 1.0;
            for &(ci, e) in &self.occ[v as usize] {
                let p = msgs.clause_to_var(ci as usize, e as usize);
                up *= p;
                down *= 1.0 - p;
            }
            let denom = up + down;
            out[v as usize] = if denom > 0.0 { up / denom } else { 0.5 };
        }
        out
    }
}

/// One synchronous BP update.
pub fn bp_step(cnf: &Cnf, msgs: &MessageSet) -> MessageSet {
    BpGraph::new(cnf).step(msgs)
}

/// Per-variable marginal estimates (`out[v]` for `v in 1..=n`; index 0 unused).
pub fn bp_marginals(cnf: &Cnf, msgs: &MessageSet) -> Vec<f64> {
    BpGraph::new(cnf).marginals(msgs)
}

/// Root marginal of a tree formula: uniform start, one synchronous round
/// per level of the (even-rounded) depth, then assembly at the root.
pub fn tree_root_marginal(tree: &TreeFormula) -> f64 {
    let cnf = tree.as_cnf();
    let graph = BpGraph::new(&cnf);
    let mut msgs = MessageSet::uniform(&cnf);
    let rounds = tree.depth() + tree.depth() % 2;
    for _ in 0..rounds {
        msgs = graph.step(&msgs);
    }
    graph.marginals(&msgs)[1]
}

/// Root marginals of the two projections of a correlated tree.
pub fn correlated_root_marginals(ct: &CorrelatedTree, ell: u32) -> (f64, f64) {
    debug_assert!(ct.depth() <= 2 * ell);
    (
        tree_root_marginal(&project(ct, 1)),
        tree_root_marginal(&project(ct, 2)),
    )
}

/// Exact conditional root marginal of a tree formula given clamped
/// variables, by one bottom-up pass of normalized satisfying-weight pairs.
/// Returns `None` when the clamping admits no satisfying assignment.
fn clamped_root_marginal(tree: &TreeFormula, clamps: &[(u32, i8)]) -> Option<f64> {
    let mut clamp = vec![0i8; tree.var_count()];
    for &(v, s) in clamps {
        clamp[v as usize] = s;
    }
    fn weights(tree: &TreeFormula, clamp: &[i8], var: u32) -> Option<(f64, f64)> {
        let mut w = match clamp[var as usize] {
            1 => (1.0, 0.0),
            -1 => (0.0, 1.0),
            _ => (1.0, 1.0),
        };
        for &(signs, child) in tree.children(var) {
            let cw = weights(tree, clamp, child)?;
            let child_mass = if signs.child > 0 { cw.0 } else { cw.1 };
            // a clause satisfied by the parent frees the child entirely
            let m = |parent_sign_matches: bool| if parent_sign_matches { 1.0 } else { child_mass };
            w.0 *= m(signs.parent > 0);
            w.1 *= m(signs.parent < 0);
            if w == (0.0, 0.0) {
                return None;
            }
        }
        let total = w.0 + w.1;
        if total == 0.0 {
            return None;
        }
        Some((w.0 / total, w.1 / total))
    }
    weights(tree, &clamp, 0).map(|w| w.0)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InfluenceResult {
    /// Max over admissible boundary patterns of the root-marginal shift.
    pub influence: f64,
    /// True when the pattern space was sampled rather than enumerated,
    /// making `influence` a lower bound on the true maximum.
    pub truncated: bool,
    /// Boundary patterns evaluated.
    pub patterns: u64,
}

pub struct InfluenceOptions {
    /// Enumerate exhaustively while the boundary has at most this many variables.
    pub exhaustive_limit: u32,
    /// Patterns sampled beyond the limit.
    pub sample_patterns: u64,
    pub seed: u64,
}

impl Default for InfluenceOptions {
    fn default() -> Self {
        InfluenceOptions {
            exhaustive_limit: 20,
            sample_patterns: 1 << 20,
            seed: 0xb075_0da7,
        }
    }
}

/// How strongly the boundary (variables at depth exactly `2l`) can steer
/// the root marginal: the maximum of `|P(root true | boundary) - P(root
/// true)|` over boundary patterns extendable to a satisfying assignment.
pub fn boundary_influence(tree: &TreeFormula, ell: u32) -> InfluenceResult {
    boundary_influence_with(tree, ell, &InfluenceOptions::default())
}

pub fn boundary_influence_with(
    tree: &TreeFormula,
    ell: u32,
    opts: &InfluenceOptions,
) -> InfluenceResult {
    // at depth 0 the root would be its own boundary; conditioning is vacuous
    let boundary = if ell == 0 {
        Vec::new()
    } else {
        tree.vars_at_depth(2 * ell)
    };
    if boundary.is_empty() {
        return InfluenceResult {
            influence: 0.0,
            truncated: false,
            patterns: 0,
        };
    }
    let p0 = clamped_root_marginal(tree, &[]).expect("tree formulas are satisfiable");
    let b = boundary.len() as u32;
    let mut best: f64 = 0.0;
    let mut patterns = 0u64;
    let mut eval_mask = |mask: u64| {
        let clamps: Vec<(u32, i8)> = boundary
            .iter()
            .enumerate()
            .map(|(i, &v)| (v, if mask >> i & 1 == 1 { 1 } else { -1 }))
            .collect();
        if let Some(p) = clamped_root_marginal(tree, &clamps) {
            best = best.max((p - p0).abs());
            patterns += 1;
        }
    };
    let truncated = b > opts.exhaustive_limit;
    if !truncated {
        for mask in 0..1u64 << b {
            eval_mask(mask);
        }
    } else {
        let mut rng = Stream::from_seed(opts.seed).child("influence", b as u64);
        for _ in 0..opts.sample_patterns {
            let mask = if b >= 64 {
                rng.next_u64()
            } else {
                rng.below(1u64 << b)
            };
            eval_mask(mask);
        }
    }
    InfluenceResult {
        influence: best,
        truncated,
        patterns,
    }
}
