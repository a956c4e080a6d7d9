//! Population dynamics for the log-likelihood-ratio fixed point on R² and
//! the variance constant derived from it.
//!
//! A population is an empirical measure: a multiset of points in R². One
//! update step replaces every point independently: draw Poisson(t*d) shared
//! terms and Poisson((1-t)*d) side-private terms per coordinate, resample
//! input points with replacement, and sum signed log-likelihood
//! contributions. Shared terms reuse the same sign pair and the same
//! resampled point in both output coordinates, which is what correlates the
//! two coordinates for t > 0.
//!
//! Convergence is monitored with a coupled pair of chains driven by common
//! random numbers, one chain started one step ahead of the other. The mean
//! squared pointwise gap between them is a Wasserstein-2 upper bound that
//! contracts by a factor of about d/2 per step all the way to zero, unlike
//! the empirical two-sample estimate, whose sampling floor at realistic
//! subsample sizes is orders of magnitude above useful tolerances.

use crate::rng::Stream;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum DensityError {
    #[error("logit transform undefined at {0} (needs the open interval (0,1))")]
    LogitDomain(f64),
}

/// An empirical measure on R² with its provenance.
#[derive(Clone, Debug)]
pub struct Population {
    pub points: Vec<[f64; 2]>,
    pub d: f64,
    pub t: f64,
    pub iteration: u32,
    pub seed_label: u64,
}

impl Population {
    /// All points at the origin (the fixed-point iteration's start).
    pub fn zeros(size: usize, d: f64, t: f64, seed_label: u64) -> Self {
        Population {
            points: vec![[0.0, 0.0]; size],
            d,
            t,
            iteration: 0,
            seed_label,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn mean_sq_norm(&self) -> f64 {
        self.points
            .iter()
            .map(|p| p[0] * p[0] + p[1] * p[1])
            .sum::<f64>()
            / self.len() as f64
    }

    /// CSV dump: comment header with provenance, then `xi1,xi2` rows.
    pub fn to_csv(&self) -> String {
        let mut out = format!(
            "# d={} t={} iteration={} seed={}\nxi1,xi2\n",
            self.d, self.t, self.iteration, self.seed_label
        );
        for p in &self.points {
            out.push_str(&format!("{},{}\n", p[0], p[1]));
        }
        out
    }
}

/// One signed log-likelihood term: `s * ln((1 + r * tanh(xi / 2)) / 2)`.
#[inline]
fn ll_term(s: i8, r: i8, xi: f64) -> f64 {
    s as f64 * (0.5 * (1.0 + r as f64 * (xi / 2.0).tanh())).ln()
}

/// Generate output point `i` of the update, and optionally its coupled twin
/// drawn from a second source population with the same randomness.
#[inline]
fn update_point(
    src_a: &[[f64; 2]],
    src_b: Option<&[[f64; 2]]>,
    d: f64,
    t: f64,
    rng: &mut Stream,
) -> ([f64; 2], [f64; 2]) {
    let size = src_a.len() as u64;
    let mut a = [0.0f64; 2];
    let mut b = [0.0f64; 2];
    let shared = rng.poisson(t * d);
    for _ in 0..shared {
        let j = rng.below(size) as usize;
        let s = rng.sign();
        let r = rng.sign();
        a[0] += ll_term(s, r, src_a[j][0]);
        a[1] += ll_term(s, r, src_a[j][1]);
        if let Some(sb) = src_b {
            b[0] += ll_term(s, r, sb[j][0]);
            b[1] += ll_term(s, r, sb[j][1]);
        }
    }
    for coord in 0..2 {
        let private = rng.poisson((1.0 - t) * d);
        for _ in 0..private {
            let j = rng.below(size) as usize;
            let s = rng.sign();
            let r = rng.sign();
            a[coord] += ll_term(s, r, src_a[j][coord]);
            if let Some(sb) = src_b {
                b[coord] += ll_term(s, r, sb[j][coord]);
            }
        }
    }
    (a, b)
}

/// One population-dynamics step of the log-likelihood-ratio operator.
///
/// Every output point uses its own substream of `rng`, so the result is
/// independent of how work is scheduled.
pub fn ll_update(pop: &Population, d: f64, t: f64, rng: &Stream) -> Population {
    let points: Vec<[f64; 2]> = (0..pop.len() as u64)
        .into_par_iter()
        .map(|i| {
            let mut s = rng.child("point", i);
            update_point(&pop.points, None, d, t, &mut s).0
        })
        .collect();
    Population {
        points,
        d,
        t,
        iteration: pop.iteration + 1,
        seed_label: pop.seed_label,
    }
}

/// Coupled step: advance two populations with identical randomness.
/// Returns the updated pair and the mean squared pointwise gap of the
/// outputs.
fn ll_update_coupled(
    a: &Population,
    b: &Population,
    d: f64,
    t: f64,
    rng: &Stream,
) -> (Population, Population, f64) {
    debug_assert_eq!(a.len(), b.len());
    let pairs: Vec<([f64; 2], [f64; 2])> = (0..a.len() as u64)
        .into_par_iter()
        .map(|i| {
            let mut s = rng.child("point", i);
            update_point(&a.points, Some(&b.points), d, t, &mut s)
        })
        .collect();
    // The pointwise gaps inherit a multiplicative cascade from the coupled
    // genealogy and get heavy-tailed as the chains converge, so a plain mean
    // is noisy at late iterations. Median of block means is stable and keeps
    // consecutive-ratio diagnostics meaningful.
    let sq_gaps: Vec<f64> = pairs
        .iter()
        .map(|(x, y)| (x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2))
        .collect();
    let gap = median_of_means(&sq_gaps, 100);
    let mk = |points: Vec<[f64; 2]>, base: &Population| Population {
        points,
        d,
        t,
        iteration: base.iteration + 1,
        seed_label: base.seed_label,
    };
    (
        mk(pairs.iter().map(|p| p.0).collect(), a),
        mk(pairs.iter().map(|p| p.1).collect(), b),
        gap,
    )
}

fn median_of_means(xs: &[f64], blocks: usize) -> f64 {
    let blocks = blocks.min(xs.len()).max(1);
    let size = xs.len() / blocks;
    let mut means: Vec<f64> = xs
        .chunks(size)
        .take(blocks)
        .map(|c| c.iter().sum::<f64>() / c.len() as f64)
        .collect();
    means.sort_by(f64::total_cmp);
    let mid = means.len() / 2;
    if means.len() % 2 == 1 {
        means[mid]
    } else {
        0.5 * (means[mid - 1] + means[mid])
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct FixedPointResult {
    #[serde(skip)]
    pub population: Population,
    pub iterations: u32,
    pub converged: bool,
    /// Coupled squared-W2 upper-bound estimates, one per iteration.
    pub w2_sq_trace: Vec<f64>,
    /// Population mean squared norm after each iteration.
    pub second_moment_trace: Vec<f64>,
}

/// Iterate the update from the atom at the origin until the coupled W2
/// estimate between consecutive iterates drops below `tol` (or `max_iter`).
///
/// Runs the one-step-ahead twin chain on common random numbers; the root
/// mean squared pointwise gap between the chains estimates the W2 distance
/// between consecutive iterates without the two-sample floor.
pub fn iterate_to_fixed_point(
    d: f64,
    t: f64,
    size: usize,
    tol: f64,
    max_iter: u32,
    rng: &Stream,
    seed_label: u64,
) -> FixedPointResult {
    debug_assert!(d > 0.0 && d < 2.0 && (0.0..=1.0).contains(&t));
    let mut a = Population::zeros(size, d, t, seed_label);
    let mut b = ll_update(&a, d, t, &rng.child("warmup", 0));
    let mut w2_sq_trace = Vec::new();
    let mut second_moment_trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    for k in 0..max_iter {
        let (a2, b2, gap) = ll_update_coupled(&a, &b, d, t, &rng.child("iter", k as u64));
        a = a2;
        b = b2;
        iterations = k + 1;
        w2_sq_trace.push(gap);
        second_moment_trace.push(b.mean_sq_norm());
        if gap.sqrt() < tol {
            converged = true;
            break;
        }
    }
    // b is one application ahead of a; return the further iterate
    FixedPointResult {
        population: b,
        iterations,
        converged,
        w2_sq_trace,
        second_moment_trace,
    }
}

// ---------------------------------------------------------------------------
// Wasserstein-2 estimates
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, Serialize)]
pub struct W2Estimate {
    /// Exact optimal-assignment W2 between equal-size subsamples.
    pub exact_subsample: f64,
    /// Sum of per-coordinate sorted-quantile squared distances on the full
    /// populations: a cheap lower bound on W2.
    pub lower_bound: f64,
    pub subsample_size: usize,
}

/// Exact assignment-based W2 on (strided) subsamples of up to
/// `max_subsample` points, plus the coordinatewise lower bound.
pub fn wasserstein2_estimate(a: &Population, b: &Population, max_subsample: usize) -> W2Estimate {
    let stride_sample = |p: &Population, k: usize| -> Vec<[f64; 2]> {
        let step = (p.len() / k).max(1);
        p.points.iter().copied().step_by(step).take(k).collect()
    };
    let k = max_subsample.min(a.len()).min(b.len());
    let sa = stride_sample(a, k);
    let sb = stride_sample(b, k);
    let total = min_cost_assignment(k, |i, j| {
        (sa[i][0] - sb[j][0]).powi(2) + (sa[i][1] - sb[j][1]).powi(2)
    });
    let exact = (total / k as f64).sqrt();

    // lower bound: any coupling of the joint induces couplings of the
    // coordinate marginals
    let n = a.len().min(b.len());
    let mut lb_sq = 0.0;
    for coord in 0..2 {
        let mut xs: Vec<f64> = a.points[..n].iter().map(|p| p[coord]).collect();
        let mut ys: Vec<f64> = b.points[..n].iter().map(|p| p[coord]).collect();
        xs.sort_by(f64::total_cmp);
        ys.sort_by(f64::total_cmp);
        lb_sq += xs
            .iter()
            .zip(&ys)
            .map(|(x, y)| (x - y).powi(2))
            .sum::<f64>()
            / n as f64;
    }
    W2Estimate {
        exact_subsample: exact,
        lower_bound: lb_sq.sqrt(),
        subsample_size: k,
    }
}

/// Exact minimum-cost perfect assignment by shortest augmenting paths with
/// potentials. O(n^3); `cost` is evaluated on demand.
pub fn min_cost_assignment(n: usize, cost: impl Fn(usize, usize) -> f64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    // rows and columns are 1-based; p[j] = row matched to column j
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    (1..=n).map(|j| cost(p[j] - 1, j - 1)).sum()
}

// ---------------------------------------------------------------------------
// Cross functional and the variance constant
// ---------------------------------------------------------------------------

/// Monte Carlo estimate (mean, standard error) of the cross functional:
/// draw two independent points and two signs, multiply the two per-
/// coordinate factors `ln(1 - (1+r1 tanh(xi1/2))(1+r2 tanh(xi2/2))/4)`.
///
/// `clamp` truncates each log factor to `[-B, B]` before multiplying.
pub fn bethe_cross_functional(
    pop: &Population,
    rng: &mut Stream,
    samples: u64,
    clamp: Option<f64>,
) -> (f64, f64) {
    debug_assert!(!pop.is_empty());
    let size = pop.len() as u64;
    let mut mean = 0.0f64;
    let mut m2 = 0.0f64;
    for k in 0..samples {
        let p1 = pop.points[rng.below(size) as usize];
        let p2 = pop.points[rng.below(size) as usize];
        let r1 = rng.sign() as f64;
        let r2 = rng.sign() as f64;
        let mut term = 1.0;
        for h in 0..2 {
            let f1 = 1.0 + r1 * (p1[h] / 2.0).tanh();
            let f2 = 1.0 + r2 * (p2[h] / 2.0).tanh();
            let mut lg = (1.0 - 0.25 * f1 * f2).ln();
            if let Some(b) = clamp {
                lg = lg.clamp(-b, b);
            }
            term *= lg;
        }
        let delta = term - mean;
        mean += delta / (k + 1) as f64;
        m2 += delta * (term - mean);
    }
    let var = if samples > 1 {
        m2 / (samples - 1) as f64
    } else {
        0.0
    };
    (mean, (var / samples as f64).sqrt())
}

#[derive(Clone, Debug, Serialize)]
pub struct EtaNode {
    pub t: f64,
    pub b: f64,
    pub se: f64,
    pub converged: bool,
}

/// The variance constant and everything that went into it.
#[derive(Clone, Debug, Serialize)]
pub struct EtaResult {
    pub d: f64,
    pub eta2: f64,
    pub b0: f64,
    pub quadrature: String,
    pub nodes: Vec<EtaNode>,
}

impl EtaResult {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("serializable")
    }
}

pub struct EtaParams {
    pub quad_k: u32,
    pub pop_size: usize,
    pub tol: f64,
    pub max_iter: u32,
    pub samples: u64,
}

impl Default for EtaParams {
    fn default() -> Self {
        EtaParams {
            quad_k: 21,
            pop_size: 100_000,
            tol: 1e-3,
            max_iter: 200,
            samples: 2_000_000,
        }
    }
}

/// Composite-Simpson integral of the cross functional at the fixed point
/// over the sharing parameter, minus its value at zero sharing.
///
/// All quadrature nodes reuse the same child streams (common random
/// numbers), so the subtraction cancels most of the Monte Carlo noise.
pub fn eta_squared(d: f64, params: &EtaParams, rng: &Stream) -> EtaResult {
    let k = params.quad_k.max(3) | 1; // odd node count for Simpson
    let nodes: Vec<EtaNode> = (0..k)
        .into_par_iter()
        .map(|i| {
            let t = i as f64 / (k - 1) as f64;
            let fp = iterate_to_fixed_point(
                d,
                t,
                params.pop_size,
                params.tol,
                params.max_iter,
                &rng.child("fixed-point", 0),
                0,
            );
            let (b, se) = bethe_cross_functional(
                &fp.population,
                &mut rng.child("bethe", 0),
                params.samples,
                None,
            );
            EtaNode {
                t,
                b,
                se,
                converged: fp.converged,
            }
        })
        .collect();
    let h = 1.0 / (k - 1) as f64;
    let mut integral = nodes[0].b + nodes[k as usize - 1].b;
    for (i, node) in nodes.iter().enumerate().take(k as usize - 1).skip(1) {
        integral += node.b * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    integral *= h / 3.0;
    let b0 = nodes[0].b;
    EtaResult {
        d,
        eta2: integral - b0,
        b0,
        quadrature: format!("composite-simpson-{k}"),
        nodes,
    }
}

// ---------------------------------------------------------------------------
// Probability-space form of the update and the transforms linking the two
// ---------------------------------------------------------------------------

/// Log-likelihood ratio -> probability, coordinatewise.
pub fn psi_transform(x: (f64, f64)) -> (f64, f64) {
    let f = |z: f64| (1.0 + (z / 2.0).tanh()) / 2.0;
    (f(x.0), f(x.1))
}

/// Probability -> log-likelihood ratio, coordinatewise; defined on (0,1)².
pub fn phi_transform(x: (f64, f64)) -> Result<(f64, f64), DensityError> {
    let f = |p: f64| -> Result<f64, DensityError> {
        if p <= 0.0 || p >= 1.0 {
            return Err(DensityError::LogitDomain(p));
        }
        Ok((p / (1.0 - p)).ln())
    };
    Ok((f(x.0)?, f(x.1)?))
}

/// Push a population through the probability transform.
pub fn psi_points(pop: &Population) -> Vec<[f64; 2]> {
    pop.points
        .iter()
        .map(|&p| {
            let (a, b) = psi_transform((p[0], p[1]));
            [a, b]
        })
        .collect()
}

/// One density-evolution step directly on (0,1)²: per output point, draw
/// per-sign Poisson(t*d/2) shared and Poisson((1-t)*d/2) private factor
/// counts, resample inputs, and combine the per-sign products into a
/// normalized pair. Shared factors reuse the same resampled vector and the
/// same sign in both output coordinates.
pub fn bp_tensor_update(points: &[[f64; 2]], d: f64, t: f64, rng: &Stream) -> Vec<[f64; 2]> {
    let size = points.len() as u64;
    (0..points.len() as u64)
        .into_par_iter()
        .map(|i| {
            let mut s = rng.child("point", i);
            // per sign (index 0: -1, index 1: +1), per coordinate
            let mut terms = [[1.0f64; 2]; 2];
            for sign_idx in 0..2 {
                let shared = s.poisson(t * d / 2.0);
                for _ in 0..shared {
                    let j = s.below(size) as usize;
                    let r = s.sign() as f64;
                    for h in 0..2 {
                        terms[sign_idx][h] *= 0.5 * (1.0 + r * (2.0 * points[j][h] - 1.0));
                    }
                }
                for h in 0..2 {
                    let private = s.poisson((1.0 - t) * d / 2.0);
                    for _ in 0..private {
                        let j = s.below(size) as usize;
                        let r = s.sign() as f64;
                        terms[sign_idx][h] *= 0.5 * (1.0 + r * (2.0 * points[j][h] - 1.0));
                    }
                }
            }
            let mut out = [0.5f64; 2];
            for h in 0..2 {
                let denom = terms[0][h] + terms[1][h];
                if denom > 0.0 {
                    out[h] = terms[0][h] / denom;
                }
            }
            out
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn root() -> Stream {
        Stream::from_seed(271828)
    }

    #[test]
    fn update_from_zeros_gives_log2_multiples() {
        let pop = Population::zeros(2000, 1.0, 0.5, 0);
        let out = ll_update(&pop, 1.0, 0.5, &root().child("z", 0));
        let l2 = std::f64::consts::LN_2;
        for p in &out.points {
            for &c in p {
                let k = c / l2;
                assert!(
                    (k - k.round()).abs() < 1e-9,
                    "coordinate {c} is not a multiple of ln 2"
                );
            }
        }
    }

    #[test]
    fn diagonal_is_preserved_at_full_sharing() {
        let mut pop = Population::zeros(5000, 1.3, 1.0, 0);
        for k in 0..5 {
            pop = ll_update(&pop, 1.3, 1.0, &root().child("diag", k));
            for p in &pop.points {
                assert_eq!(p[0], p[1]);
            }
        }
    }

    #[test]
    fn coordinate_means_vanish_by_sign_symmetry() {
        let pop = Population::zeros(200_000, 1.5, 0.5, 0);
        let out = ll_update(&pop, 1.5, 0.5, &root().child("sym", 0));
        for coord in 0..2 {
            let mean: f64 =
                out.points.iter().map(|p| p[coord]).sum::<f64>() / out.len() as f64;
            // terms are +-ln 2 with random signs; se ~ ln2 * sqrt(d/P)
            assert!(mean.abs() < 0.02, "mean = {mean}");
        }
    }

    #[test]
    fn fixed_point_shrinks_with_d() {
        let fp = iterate_to_fixed_point(0.05, 0.5, 20_000, 1e-4, 100, &root().child("small", 0), 0);
        assert!(fp.converged);
        // weak-interaction regime keeps the mass near the origin
        assert!(fp.population.mean_sq_norm() < 4.0 * 0.05 * std::f64::consts::LN_2.powi(2));
    }

    #[test]
    fn coupled_trace_contracts_at_rate_d_over_2() {
        let fp = iterate_to_fixed_point(1.0, 0.5, 50_000, 1e-12, 25, &root().child("con", 0), 0);
        let tr = &fp.w2_sq_trace;
        assert!(tr.len() >= 20);
        for k in 3..15 {
            let ratio = tr[k] / tr[k - 1];
            assert!(ratio < 0.5 + 0.15, "ratio at {k} = {ratio}");
        }
    }

    #[test]
    fn determinism_and_worker_independence() {
        let a = iterate_to_fixed_point(1.2, 0.3, 3000, 1e-3, 50, &root().child("det", 0), 0);
        let b = iterate_to_fixed_point(1.2, 0.3, 3000, 1e-3, 50, &root().child("det", 0), 0);
        assert_eq!(a.population.points, b.population.points);
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap();
        let c = pool.install(|| {
            iterate_to_fixed_point(1.2, 0.3, 3000, 1e-3, 50, &root().child("det", 0), 0)
        });
        assert_eq!(a.population.points, c.population.points);
    }

    #[test]
    fn second_moment_recursion_bound() {
        let fp = iterate_to_fixed_point(1.5, 0.5, 30_000, 1e-3, 60, &root().child("mom", 0), 0);
        let l22 = std::f64::consts::LN_2.powi(2);
        let mut prev = 0.0;
        for &m in &fp.second_moment_trace {
            assert!(m <= 2.0 * 1.5 * prev + 4.0 * 1.5 * l22 + 1e-9, "m = {m}");
            prev = m;
        }
    }

    #[test]
    fn w2_identical_and_atoms() {
        let a = Population::zeros(500, 1.0, 0.0, 0);
        let est = wasserstein2_estimate(&a, &a.clone(), 200);
        assert_eq!(est.exact_subsample, 0.0);
        assert_eq!(est.lower_bound, 0.0);

        let mut b = Population::zeros(500, 1.0, 0.0, 0);
        for p in &mut b.points {
            *p = [3.0, 4.0];
        }
        let est = wasserstein2_estimate(&a, &b, 100);
        assert!((est.exact_subsample - 5.0).abs() < 1e-12);
        assert!((est.lower_bound - 5.0).abs() < 1e-12);
    }

    #[test]
    fn w2_triangle_inequality_on_exact_matching() {
        let base = root();
        for i in 0..10 {
            let mk = |tag: u64| {
                let mut s = base.child("tri", i * 10 + tag);
                let mut p = Population::zeros(60, 1.0, 0.0, 0);
                for q in &mut p.points {
                    *q = [s.normal() * (1.0 + tag as f64), s.normal() - tag as f64];
                }
                p
            };
            let (a, b, c) = (mk(0), mk(1), mk(2));
            let ab = wasserstein2_estimate(&a, &b, 60).exact_subsample;
            let bc = wasserstein2_estimate(&b, &c, 60).exact_subsample;
            let ac = wasserstein2_estimate(&a, &c, 60).exact_subsample;
            assert!(ac <= ab + bc + 1e-9);
        }
    }

    #[test]
    fn assignment_solves_small_instance_exactly() {
        // 3x3 with known optimum 1 + 2 + 1 = 4 (perm 0->1, 1->0, 2->2)
        let cost = [[5.0, 1.0, 9.0], [2.0, 7.0, 8.0], [9.0, 9.0, 1.0]];
        let total = min_cost_assignment(3, |i, j| cost[i][j]);
        assert_eq!(total, 4.0);
    }

    #[test]
    fn bethe_at_origin_atom() {
        let pop = Population::zeros(100, 1.0, 0.0, 0);
        let (b, se) = bethe_cross_functional(&pop, &mut root().child("b0", 0), 10_000, None);
        let exact = 0.75f64.ln().powi(2);
        assert!((b - exact).abs() < 1e-12, "b = {b}");
        assert_eq!(se, 0.0); // every sample takes the same value
    }

    #[test]
    fn bethe_is_positive_and_factorizes_at_t_zero() {
        let fp = iterate_to_fixed_point(1.2, 0.0, 50_000, 1e-3, 80, &root().child("fac", 0), 0);
        let (b, se) = bethe_cross_functional(
            &fp.population,
            &mut root().child("bmc", 0),
            400_000,
            None,
        );
        assert!(b > 0.0);
        // with independent coordinates the cross functional factorizes into
        // the squared 1-D expectation; estimate that via the first coordinate
        let mut rng = root().child("b1d", 0);
        let size = fp.population.len() as u64;
        let samples = 400_000u64;
        let mut acc = crate::stats::Moments::new();
        for _ in 0..samples {
            let p1 = fp.population.points[rng.below(size) as usize];
            let p2 = fp.population.points[rng.below(size) as usize];
            let r1 = rng.sign() as f64;
            let r2 = rng.sign() as f64;
            let f1 = 1.0 + r1 * (p1[0] / 2.0).tanh();
            let f2 = 1.0 + r2 * (p2[0] / 2.0).tanh();
            acc.push((1.0 - 0.25 * f1 * f2).ln());
        }
        let one_d = acc.mean();
        let target = one_d * one_d;
        // a finite resampled population carries ancestral correlations, so
        // the factorization identity of the limit law holds on it only up to
        // an O(1/P)-scale realization error (~0.3% at this size); allow 1%
        let se_target = 2.0 * one_d.abs() * acc.se_mean();
        let tol = 3.0 * (se * se + se_target * se_target).sqrt() + 0.01 * b.abs();
        assert!((b - target).abs() < tol, "b = {b}, target = {target}, tol = {tol}");
    }

    #[test]
    fn eta_vanishes_as_d_goes_to_zero() {
        let params = EtaParams {
            quad_k: 5,
            pop_size: 20_000,
            tol: 1e-4,
            max_iter: 60,
            samples: 200_000,
        };
        let r = eta_squared(0.01, &params, &root().child("eta0", 0));
        assert!(r.eta2.abs() < 1e-3, "eta2 = {}", r.eta2);
    }

    #[test]
    fn eta_reconstructs_from_nodes_and_orders_by_d() {
        let params = EtaParams {
            quad_k: 9,
            pop_size: 30_000,
            tol: 1e-3,
            max_iter: 80,
            samples: 300_000,
        };
        let lo = eta_squared(0.5, &params, &root().child("eta", 1));
        let hi = eta_squared(1.5, &params, &root().child("eta", 2));
        assert!(lo.eta2 > 0.0 && hi.eta2 > lo.eta2);
        // invariant: eta2 equals the quadrature of the stored nodes minus b0
        let k = lo.nodes.len();
        let h = 1.0 / (k - 1) as f64;
        let mut integral = lo.nodes[0].b + lo.nodes[k - 1].b;
        for (i, node) in lo.nodes.iter().enumerate().take(k - 1).skip(1) {
            integral += node.b * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        integral *= h / 3.0;
        assert!((lo.eta2 - (integral - lo.b0)).abs() < 1e-12);
    }

    #[test]
    fn transforms_are_mutually_inverse() {
        // The probability representation carries about eps * e^{|x|} / 2 of
        // absolute error back in logit space, so the 1e-12 round-trip is
        // checked on |x| <= 9 and a looser one further out.
        let mut s = root().child("psi", 0);
        for _ in 0..2000 {
            let x = (s.normal() * 3.0, s.normal() * 3.0);
            if x.0.abs() > 9.0 || x.1.abs() > 9.0 {
                continue;
            }
            let (a, b) = psi_transform(x);
            assert!((0.0..=1.0).contains(&a) && (0.0..=1.0).contains(&b));
            let back = phi_transform((a, b)).unwrap();
            assert!((back.0 - x.0).abs() < 1e-12 * x.0.abs().max(1.0));
            assert!((back.1 - x.1).abs() < 1e-12 * x.1.abs().max(1.0));
        }
        for x in [-30.0f64, -20.0, 15.0, 30.0] {
            let back = phi_transform(psi_transform((x, 0.0))).unwrap();
            assert!((back.0 - x).abs() < 1e-2 * x.abs());
        }
        assert_eq!(psi_transform((0.0, 0.0)), (0.5, 0.5));
        // oddness
        let (a, _) = psi_transform((1.7, 0.0));
        let (b, _) = psi_transform((-1.7, 0.0));
        assert!((a + b - 1.0).abs() < 1e-15);
        assert!(phi_transform((0.0, 0.5)).is_err());
        assert!(phi_transform((0.5, 1.0)).is_err());
    }

    #[test]
    fn bp_tensor_fixed_point_at_zero_interactions() {
        let points = vec![[0.5, 0.5]; 1000];
        let out = bp_tensor_update(&points, 1e-12, 0.5, &root().child("bp0", 0));
        for p in out {
            assert_eq!(p, [0.5, 0.5]);
        }
    }

    #[test]
    fn bp_tensor_preserves_diagonal_at_full_sharing() {
        let mut s = root().child("bpdiag", 0);
        let points: Vec<[f64; 2]> = (0..2000)
            .map(|_| {
                let p = 0.5 + 0.4 * (s.unit_f64() - 0.5);
                [p, p]
            })
            .collect();
        let out = bp_tensor_update(&points, 1.4, 1.0, &root().child("bpd", 1));
        for p in out {
            assert_eq!(p[0], p[1]);
        }
    }

    #[test]
    fn pushforward_commutes_with_probability_space_update() {
        // psi(LL(pop)) and BP(psi(pop)) agree in distribution: compare each
        // 1-D marginal with a two-sample KS at 1e5 points
        let size = 100_000;
        let (d, t) = (1.0, 0.5);
        let fp = iterate_to_fixed_point(d, t, size, 1e-3, 40, &root().child("comm", 0), 0);
        let pop = fp.population;
        let route_a = psi_points(&ll_update(&pop, d, t, &root().child("comm-ll", 0)));
        let route_b = bp_tensor_update(&psi_points(&pop), d, t, &root().child("comm-bp", 0));
        // the routes realize the same atoms through different float paths;
        // quantize so equal atoms coincide exactly
        for coord in 0..2 {
            let mut xs: Vec<f64> = route_a
                .iter()
                .map(|p| crate::stats::quantize(p[coord], 1e-9))
                .collect();
            let mut ys: Vec<f64> = route_b
                .iter()
                .map(|p| crate::stats::quantize(p[coord], 1e-9))
                .collect();
            xs.sort_by(f64::total_cmp);
            ys.sort_by(f64::total_cmp);
            let ks = crate::stats::two_sample_ks(&xs, &ys);
            assert!(ks <= 0.01, "coord {coord}: ks = {ks}");
        }
    }
}
