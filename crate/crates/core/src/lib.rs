//! Random 2-SAT counting pipeline.
//!
//! The crate covers the full loop of desk-scale experiments on random
//! 2-CNFs: uniform and correlated formula generation, pessimistic unit
//! clause propagation and pruning, exact model counting, Galton-Watson tree
//! formulas with belief propagation on them, population dynamics for the
//! log-likelihood-ratio fixed point together with the variance constant it
//! yields, and a reproducible Monte Carlo experiment harness exposed
//! through the `satclt` CLI.

pub mod bp;
pub mod counting;
pub mod density;
pub mod dimacs;
pub mod experiments;
pub mod formula;
pub mod gw_tree;
pub mod rng;
pub mod stats;
pub mod ucp;

pub use bp::{
    boundary_influence, bp_marginals, bp_step, correlated_root_marginals, tree_root_marginal,
    InfluenceResult, MessageSet,
};
pub use counting::{
    count_models, count_models_bruteforce, count_models_with, is_satisfiable, marginal,
    survival_probability, CountError, Marginal, ModelCount,
};
pub use density::{
    bethe_cross_functional, bp_tensor_update, eta_squared, iterate_to_fixed_point, ll_update,
    phi_transform, psi_transform, wasserstein2_estimate, EtaParams, EtaResult, FixedPointResult,
    Population, W2Estimate,
};
pub use formula::{
    clause_count_for_density, expected_count, neighborhood, sample_correlated_pair,
    sample_random_cnf, Clause, Cnf, CorrelatedPair, FormulaError, Lit, SubFormula,
};
pub use gw_tree::{
    canonical_key, canonical_key_correlated, count_instances, project, sample_correlated_tree,
    sample_plain_tree, CanonicalKey, CorrelatedTree, PrunedPair, ShareClass, SignPair,
    TreeFormula,
};
pub use rng::Stream;
pub use ucp::{clause_sensitivity_set, prune, reachable_literals, run_ucp, PrunedCnf, UcpOutcome};
