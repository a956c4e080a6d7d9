//! Multitype Galton-Watson tree formulas.
//!
//! A plain tree alternates variable and clause nodes: each variable at even
//! depth below the truncation spawns an independent Poisson(d/4) number of
//! clause children of each of the four sign types `(s, s')` (`s` = sign of
//! the parent variable, `s'` = sign of the child variable), and each clause
//! spawns exactly one variable child. Truncation at depth `2l` keeps all
//! clauses at odd depth `<= 2l-1` with their child variable.
//!
//! The correlated tree adds a share class to every node: `shared`,
//! `1-distinct`, or `2-distinct`. A shared variable spawns Poisson(dt/4)
//! shared clauses plus Poisson(d(1-t)/4) 1-distinct and 2-distinct clauses
//! of each sign type; an h-distinct variable spawns only h-distinct clauses
//! at the plain rate; a clause's child variable inherits its class.
//! Deleting all (3-h)-distinct nodes projects the correlated tree onto its
//! side-h plain tree.
//!
//! Canonical keys identify rooted trees up to root- and type-preserving
//! isomorphism, and double as the joint local-structure signature used to
//! count instances of a tree in a pruned correlated formula pair.

use crate::formula::{Clause, Cnf, CorrelatedPair, Lit};
use crate::rng::Stream;
use crate::ucp::prune;
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GwError {
    #[error("tree exceeded the node cap ({cap}); partial size {size}")]
    SizeCap { cap: usize, size: usize },
}

pub const DEFAULT_NODE_CAP: usize = 1_000_000;

/// Sign pair of a clause node: parent-variable sign, child-variable sign.
#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SignPair {
    pub parent: i8,
    pub child: i8,
}

pub const SIGN_PAIRS: [SignPair; 4] = [
    SignPair {
        parent: 1,
        child: 1,
    },
    SignPair {
        parent: 1,
        child: -1,
    },
    SignPair {
        parent: -1,
        child: 1,
    },
    SignPair {
        parent: -1,
        child: -1,
    },
];

fn sign_char(s: i8) -> char {
    if s > 0 {
        '+'
    } else {
        '-'
    }
}

/// Share class in a correlated tree.
#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ShareClass {
    Shared,
    Distinct1,
    Distinct2,
}

impl ShareClass {
    pub fn distinct(h: u8) -> Self {
        match h {
            1 => ShareClass::Distinct1,
            2 => ShareClass::Distinct2,
            _ => panic!("h must be 1 or 2"),
        }
    }
}

/// A rooted tree formula; variable node 0 is the root.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TreeFormula {
    vars: Vec<PlainVar>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
struct PlainVar {
    depth: u32,
    children: Vec<(SignPair, u32)>,
}

impl TreeFormula {
    pub fn root_only() -> Self {
        TreeFormula {
            vars: vec![PlainVar {
                depth: 0,
                children: Vec::new(),
            }],
        }
    }

    pub fn var_count(&self) -> usize {
        self.vars.len()
    }

    pub fn clause_count(&self) -> usize {
        self.vars.iter().map(|v| v.children.len()).sum()
    }

    /// Maximum node depth (clause nodes sit at child depth - 1).
    pub fn depth(&self) -> u32 {
        self.vars.iter().map(|v| v.depth).max().unwrap_or(0)
    }

    /// Variable indices (0-based) at exactly `depth`.
    pub fn vars_at_depth(&self, depth: u32) -> Vec<u32> {
        (0..self.vars.len() as u32)
            .filter(|&i| self.vars[i as usize].depth == depth)
            .collect()
    }

    pub fn children(&self, var: u32) -> &[(SignPair, u32)] {
        &self.vars[var as usize].children
    }

    /// View as a 2-CNF: node `i` becomes variable `i + 1`.
    pub fn as_cnf(&self) -> Cnf {
        let mut clauses = Vec::with_capacity(self.clause_count());
        for (i, v) in self.vars.iter().enumerate() {
            for &(signs, child) in &v.children {
                clauses.push(Clause::new(
                    Lit::new(i as u32 + 1, signs.parent),
                    Lit::new(child + 1, signs.child),
                ));
            }
        }
        Cnf::new(self.vars.len() as u32, clauses).expect("tree is a valid formula")
    }
}

/// Sample the plain tree truncated at depth `2 * ell`.
pub fn sample_plain_tree(d: f64, ell: u32, rng: &mut Stream) -> Result<TreeFormula, GwError> {
    sample_plain_tree_capped(d, ell, rng, DEFAULT_NODE_CAP)
}

pub fn sample_plain_tree_capped(
    d: f64,
    ell: u32,
    rng: &mut Stream,
    cap: usize,
) -> Result<TreeFormula, GwError> {
    debug_assert!(d > 0.0);
    let mut vars = vec![PlainVar {
        depth: 0,
        children: Vec::new(),
    }];
    let mut frontier = vec![0u32];
    for level in 0..ell {
        let mut next = Vec::new();
        for &vi in &frontier {
            for signs in SIGN_PAIRS {
                let k = rng.poisson(d / 4.0);
                for _ in 0..k {
                    let child = vars.len() as u32;
                    if vars.len() >= cap {
                        return Err(GwError::SizeCap {
                            cap,
                            size: vars.len(),
                        });
                    }
                    vars.push(PlainVar {
                        depth: 2 * (level + 1),
                        children: Vec::new(),
                    });
                    vars[vi as usize].children.push((signs, child));
                    next.push(child);
                }
            }
        }
        frontier = next;
    }
    Ok(TreeFormula { vars })
}

/// A correlated tree; variable node 0 is the shared root.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CorrelatedTree {
    vars: Vec<CorrVar>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
struct CorrVar {
    class: ShareClass,
    depth: u32,
    children: Vec<CorrClause>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
struct CorrClause {
    class: ShareClass,
    signs: SignPair,
    child: u32,
}

impl CorrelatedTree {
    pub fn root_only() -> Self {
        CorrelatedTree {
            vars: vec![CorrVar {
                class: ShareClass::Shared,
                depth: 0,
                children: Vec::new(),
            }],
        }
    }

    pub fn var_count(&self) -> usize {
        self.vars.len()
    }

    pub fn depth(&self) -> u32 {
        self.vars.iter().map(|v| v.depth).max().unwrap_or(0)
    }

    pub fn var_class(&self, var: u32) -> ShareClass {
        self.vars[var as usize].class
    }

    /// Count clause nodes of a given class.
    pub fn clause_count_of(&self, class: ShareClass) -> usize {
        self.vars
            .iter()
            .flat_map(|v| &v.children)
            .filter(|c| c.class == class)
            .count()
    }
}

/// Sample the correlated tree truncated at depth `2 * ell`.
pub fn sample_correlated_tree(
    d: f64,
    t: f64,
    ell: u32,
    rng: &mut Stream,
) -> Result<CorrelatedTree, GwError> {
    sample_correlated_tree_capped(d, t, ell, rng, DEFAULT_NODE_CAP)
}

pub fn sample_correlated_tree_capped(
    d: f64,
    t: f64,
    ell: u32,
    rng: &mut Stream,
    cap: usize,
) -> Result<CorrelatedTree, GwError> {
    debug_assert!(d > 0.0 && (0.0..=1.0).contains(&t));
    let mut vars = vec![CorrVar {
        class: ShareClass::Shared,
        depth: 0,
        children: Vec::new(),
    }];
    let mut frontier = vec![0u32];
    for level in 0..ell {
        let mut next = Vec::new();
        for &vi in &frontier {
            let parent_class = vars[vi as usize].class;
            // offspring menu: (clause class, Poisson mean)
            let menu: &[(ShareClass, f64)] = match parent_class {
                ShareClass::Shared => &[
                    (ShareClass::Shared, d * t / 4.0),
                    (ShareClass::Distinct1, d * (1.0 - t) / 4.0),
                    (ShareClass::Distinct2, d * (1.0 - t) / 4.0),
                ],
                ShareClass::Distinct1 => &[(ShareClass::Distinct1, d / 4.0)],
                ShareClass::Distinct2 => &[(ShareClass::Distinct2, d / 4.0)],
            };
            for &(class, mean) in menu {
                for signs in SIGN_PAIRS {
                    let k = rng.poisson(mean);
                    for _ in 0..k {
                        let child = vars.len() as u32;
                        if vars.len() >= cap {
                            return Err(GwError::SizeCap {
                                cap,
                                size: vars.len(),
                            });
                        }
                        vars.push(CorrVar {
                            class,
                            depth: 2 * (level + 1),
                            children: Vec::new(),
                        });
                        vars[vi as usize].children.push(CorrClause {
                            class,
                            signs,
                            child,
                        });
                        next.push(child);
                    }
                }
            }
        }
        frontier = next;
    }
    Ok(CorrelatedTree { vars })
}

/// Delete all `(3-h)`-distinct nodes, keeping shared and `h`-distinct ones.
pub fn project(ct: &CorrelatedTree, h: u8) -> TreeFormula {
    debug_assert!(h == 1 || h == 2);
    let keep = ShareClass::distinct(h);
    let mut map = vec![u32::MAX; ct.vars.len()];
    let mut vars = Vec::new();
    // the subtree under a kept node is entirely kept, so a BFS over kept
    // children reproduces arena order
    let mut queue = vec![0u32];
    map[0] = 0;
    vars.push(PlainVar {
        depth: 0,
        children: Vec::new(),
    });
    let mut head = 0;
    while head < queue.len() {
        let old = queue[head];
        head += 1;
        for c in &ct.vars[old as usize].children {
            if c.class != ShareClass::Shared && c.class != keep {
                continue;
            }
            let new_child = vars.len() as u32;
            vars.push(PlainVar {
                depth: ct.vars[c.child as usize].depth,
                children: Vec::new(),
            });
            let ni = map[old as usize];
            vars[ni as usize].children.push((c.signs, new_child));
            map[c.child as usize] = new_child;
            queue.push(c.child);
        }
    }
    TreeFormula { vars }
}

/// Canonical key of a rooted typed tree; equal keys iff the trees are
/// isomorphic by a root- and type-preserving isomorphism.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CanonicalKey(pub String);

impl std::fmt::Display for CanonicalKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

fn plain_key_rec(t: &TreeFormula, var: u32) -> String {
    let mut parts: Vec<String> = t.vars[var as usize]
        .children
        .iter()
        .map(|&(signs, child)| {
            format!(
                "[{}{}{}]",
                sign_char(signs.parent),
                sign_char(signs.child),
                plain_key_rec(t, child)
            )
        })
        .collect();
    parts.sort();
    format!("({})", parts.concat())
}

/// Canonical key of a plain tree.
pub fn canonical_key(t: &TreeFormula) -> CanonicalKey {
    CanonicalKey(plain_key_rec(t, 0))
}

fn corr_plain_key_rec(ct: &CorrelatedTree, var: u32) -> String {
    let mut parts: Vec<String> = ct.vars[var as usize]
        .children
        .iter()
        .map(|c| {
            format!(
                "[{}{}{}]",
                sign_char(c.signs.parent),
                sign_char(c.signs.child),
                corr_plain_key_rec(ct, c.child)
            )
        })
        .collect();
    parts.sort();
    format!("({})", parts.concat())
}

fn corr_key_rec(ct: &CorrelatedTree, var: u32) -> String {
    debug_assert_eq!(ct.vars[var as usize].class, ShareClass::Shared);
    let mut shared = Vec::new();
    let mut d1 = Vec::new();
    let mut d2 = Vec::new();
    for c in &ct.vars[var as usize].children {
        let s = sign_char(c.signs.parent);
        let s2 = sign_char(c.signs.child);
        match c.class {
            ShareClass::Shared => shared.push(format!("A{}{}{}", s, s2, corr_key_rec(ct, c.child))),
            ShareClass::Distinct1 => {
                d1.push(format!("B{}{}{}", s, s2, corr_plain_key_rec(ct, c.child)))
            }
            ShareClass::Distinct2 => {
                d2.push(format!("C{}{}{}", s, s2, corr_plain_key_rec(ct, c.child)))
            }
        }
    }
    shared.sort();
    d1.sort();
    d2.sort();
    format!("S({}|{}|{})", shared.concat(), d1.concat(), d2.concat())
}

/// Canonical key of a correlated tree.
///
/// Below the shared skeleton the share class is constant, so the distinct
/// subtrees are keyed as plain trees without losing type information.
pub fn canonical_key_correlated(ct: &CorrelatedTree) -> CanonicalKey {
    CanonicalKey(corr_key_rec(ct, 0))
}

// ---------------------------------------------------------------------------
// Instances of a tree in a pruned correlated formula pair
// ---------------------------------------------------------------------------

/// A clause slot of one side of a pruned pair, labeled with its origin.
#[derive(Copy, Clone, Debug)]
struct LabeledClause {
    clause: Clause,
    /// Index into the shared prefix, if the slot came from there.
    shared_index: Option<u32>,
}

/// Both sides of a correlated pair after pruning, with per-side adjacency
/// and shared-origin labels, ready for local-structure extraction.
pub struct PrunedPair {
    n: u32,
    sides: [Vec<LabeledClause>; 2],
    occ: [Vec<Vec<u32>>; 2],
}

impl PrunedPair {
    /// Prune both projections of a correlated pair.
    pub fn from_pair(pair: &CorrelatedPair) -> Self {
        let m_shared = pair.shared_len();
        let build = |h: u8| -> Vec<LabeledClause> {
            let f = pair.formula(h);
            let pruned = prune(&f);
            pruned
                .kept
                .iter()
                .map(|&i| LabeledClause {
                    clause: f.clause(i),
                    shared_index: (i < m_shared).then_some(i as u32),
                })
                .collect()
        };
        let sides = [build(1), build(2)];
        let occ = [Self::occ_of(pair.n, &sides[0]), Self::occ_of(pair.n, &sides[1])];
        PrunedPair {
            n: pair.n,
            sides,
            occ,
        }
    }

    fn occ_of(n: u32, side: &[LabeledClause]) -> Vec<Vec<u32>> {
        let mut occ = vec![Vec::new(); n as usize + 1];
        for (i, lc) in side.iter().enumerate() {
            occ[lc.clause.0.var() as usize].push(i as u32);
            occ[lc.clause.1.var() as usize].push(i as u32);
        }
        occ
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    /// Is the depth-`2l` neighborhood of `x` on side `h` acyclic?
    fn side_is_tree(&self, h: usize, x: u32, ell: u32) -> bool {
        // BFS over variables; reaching any variable twice (including via a
        // duplicate clause slot) means a cycle within range
        let mut parent_clause: BTreeMap<u32, u32> = BTreeMap::new();
        let mut visited = std::collections::HashSet::from([x]);
        let mut frontier = vec![x];
        for _ in 0..ell {
            let mut next = Vec::new();
            for &v in &frontier {
                for &ci in &self.occ[h][v as usize] {
                    if parent_clause.get(&v) == Some(&ci) {
                        continue; // the slot we were discovered through
                    }
                    let w = self.sides[h][ci as usize].clause.other(v).var();
                    if !visited.insert(w) {
                        return false;
                    }
                    parent_clause.insert(w, ci);
                    next.push(w);
                }
            }
            frontier = next;
        }
        true
    }

    /// Joint local-structure key of variable `x` at depth `2 * ell`, or
    /// `None` when the neighborhoods are cyclic or the shared skeletons of
    /// the two sides disagree (then `x` is an instance of no tree).
    pub fn instance_key_at(&self, x: u32, ell: u32) -> Option<CanonicalKey> {
        if !self.side_is_tree(0, x, ell) || !self.side_is_tree(1, x, ell) {
            return None;
        }
        self.joint_key(x, 2 * ell, [None, None]).map(CanonicalKey)
    }

    /// `x` is a shared-skeleton variable; `parents[h]` is the slot on side
    /// `h` we came through.
    fn joint_key(&self, x: u32, budget: u32, parents: [Option<u32>; 2]) -> Option<String> {
        if budget == 0 {
            return Some("S(||)".to_string());
        }
        // shared-origin slots incident to x on each side, minus the parent
        let shared_at = |h: usize| -> BTreeMap<u32, u32> {
            self.occ[h][x as usize]
                .iter()
                .filter(|&&ci| Some(ci) != parents[h])
                .filter_map(|&ci| {
                    self.sides[h][ci as usize]
                        .shared_index
                        .map(|si| (si, ci))
                })
                .collect()
        };
        let s1 = shared_at(0);
        let s2 = shared_at(1);
        // every surviving shared slot must survive on both sides; otherwise
        // no joint isomorphism can exist
        if s1.keys().ne(s2.keys()) {
            return None;
        }
        let mut shared_parts = Vec::new();
        for (&si, &ci1) in &s1 {
            let ci2 = s2[&si];
            let c = self.sides[0][ci1 as usize].clause;
            let child = c.other(x).var();
            let sub = self.joint_key(child, budget - 2, [Some(ci1), Some(ci2)])?;
            shared_parts.push(format!(
                "A{}{}{}",
                sign_char(c.sign_of(x)),
                sign_char(c.sign_of(child)),
                sub
            ));
        }
        let private_parts = |h: usize, tag: char| -> Vec<String> {
            self.occ[h][x as usize]
                .iter()
                .filter(|&&ci| Some(ci) != parents[h])
                .filter(|&&ci| self.sides[h][ci as usize].shared_index.is_none())
                .map(|&ci| {
                    let c = self.sides[h][ci as usize].clause;
                    let child = c.other(x).var();
                    format!(
                        "{}{}{}{}",
                        tag,
                        sign_char(c.sign_of(x)),
                        sign_char(c.sign_of(child)),
                        self.plain_key(h, child, budget - 2, ci)
                    )
                })
                .collect()
        };
        let mut d1 = private_parts(0, 'B');
        let mut d2 = private_parts(1, 'C');
        shared_parts.sort();
        d1.sort();
        d2.sort();
        Some(format!(
            "S({}|{}|{})",
            shared_parts.concat(),
            d1.concat(),
            d2.concat()
        ))
    }

    /// Plain subtree key on one side; below the shared skeleton the clause
    /// origin no longer matters.
    fn plain_key(&self, h: usize, x: u32, budget: u32, parent: u32) -> String {
        if budget == 0 {
            return "()".to_string();
        }
        let mut parts: Vec<String> = self.occ[h][x as usize]
            .iter()
            .filter(|&&ci| ci != parent)
            .map(|&ci| {
                let c = self.sides[h][ci as usize].clause;
                let child = c.other(x).var();
                format!(
                    "[{}{}{}]",
                    sign_char(c.sign_of(x)),
                    sign_char(c.sign_of(child)),
                    self.plain_key(h, child, budget - 2, ci)
                )
            })
            .collect();
        parts.sort();
        format!("({})", parts.concat())
    }

    /// Histogram of joint local-structure keys over all variables.
    pub fn instance_histogram(&self, ell: u32) -> BTreeMap<CanonicalKey, u64> {
        let mut hist = BTreeMap::new();
        for x in 1..=self.n {
            if let Some(k) = self.instance_key_at(x, ell) {
                *hist.entry(k).or_insert(0) += 1;
            }
        }
        hist
    }
}

/// Number of variables whose joint depth-`2l` structure in the pruned pair
/// realizes the tree `t`.
pub fn count_instances(pp: &PrunedPair, t: &CorrelatedTree, ell: u32) -> u64 {
    debug_assert!(t.depth() <= 2 * ell);
    let target = canonical_key_correlated(t);
    (1..=pp.n())
        .filter(|&x| pp.instance_key_at(x, ell).as_ref() == Some(&target))
        .count() as u64
}

/// Histogram CSV lines, `key,count`, keys in sorted order.
pub fn histogram_csv(hist: &BTreeMap<CanonicalKey, u64>) -> String {
    let mut out = String::from("key,count\n");
    for (k, v) in hist {
        out.push_str(&format!("{},{}\n", k.0, v));
    }
    out
}
