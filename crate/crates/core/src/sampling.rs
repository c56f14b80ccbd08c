//! Sampling distributions, query plans and reweighted sampling matrices.

use std::collections::HashSet;

use crate::error::{invalid, Error, Result};
use crate::lewis::WeightVector;
use crate::matrix::RealMatrix;
use crate::rng::SeededRng;

/// Probability vector over the unlabeled pool.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingDistribution {
    probs: Vec<f64>,
    support_size: usize,
}

impl SamplingDistribution {
    /// Normalizes non-negative masses into a distribution.
    pub fn from_masses(masses: &[f64]) -> Result<Self> {
        if masses.is_empty() {
            return Err(invalid("distribution over an empty index set"));
        }
        if let Some(v) = masses.iter().find(|v| !v.is_finite() || **v < 0.0) {
            return Err(invalid(format!("mass {v} is negative or non-finite")));
        }
        let total: f64 = masses.iter().sum();
        if !(total > 0.0) {
            return Err(Error::AllZeroWeights);
        }
        let probs: Vec<f64> = masses.iter().map(|m| m / total).collect();
        let support_size = probs.iter().filter(|v| **v > 0.0).count();
        Ok(Self {
            probs,
            support_size,
        })
    }

    pub fn uniform(n: usize) -> Result<Self> {
        Self::from_masses(&vec![1.0; n])
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn support_size(&self) -> usize {
        self.support_size
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn sampler(&self) -> Sampler {
        let mut acc = 0.0;
        let cdf = self
            .probs
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        Sampler { cdf }
    }
}

/// Inverse-CDF sampler; draws never land on zero-probability indices.
#[derive(Debug, Clone)]
pub struct Sampler {
    cdf: Vec<f64>,
}

impl Sampler {
    pub fn draw(&self, rng: &mut SeededRng) -> usize {
        let total = *self.cdf.last().expect("non-empty distribution");
        let target = rng.uniform() * total;
        let idx = self.cdf.partition_point(|&c| c <= target);
        idx.min(self.cdf.len() - 1)
    }
}

/// Ordered draws from the unlabeled pool together with the distinct indices
/// they touch. `distinct` lists each index once, in order of first draw; that
/// is the order in which labels are queried.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryPlan {
    pub draws: Vec<usize>,
    pub distinct: Vec<usize>,
    pub seed: u64,
}

impl QueryPlan {
    /// Total number of draws, repetitions included.
    pub fn m(&self) -> usize {
        self.draws.len()
    }

    fn from_draws(draws: Vec<usize>, seed: u64) -> Self {
        let mut seen = HashSet::new();
        let distinct = draws.iter().copied().filter(|i| seen.insert(*i)).collect();
        Self {
            draws,
            distinct,
            seed,
        }
    }
}

/// One row of a sampling matrix: `scale * e_source^T`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampledRow {
    pub source: usize,
    pub scale: f64,
}

/// Sparse reweighted row-selection operator.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingMatrix {
    pub rows: Vec<SampledRow>,
    pub n_source: usize,
    pub p: f64,
}

impl SamplingMatrix {
    /// The `n x n` identity selection (every row once, scale 1).
    pub fn identity(n: usize, p: f64) -> Self {
        Self {
            rows: (0..n).map(|source| SampledRow { source, scale: 1.0 }).collect(),
            n_source: n,
            p,
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    fn check_source_len(&self, len: usize) -> Result<()> {
        if len != self.n_source {
            return Err(Error::MismatchedLengths {
                expected: self.n_source,
                got: len,
            });
        }
        Ok(())
    }

    /// `S v`.
    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.check_source_len(v.len())?;
        Ok(self.rows.iter().map(|r| r.scale * v[r.source]).collect())
    }

    /// `S A` as a dense matrix; fails when `S` selects no rows.
    pub fn apply_matrix(&self, a: &RealMatrix) -> Result<RealMatrix> {
        self.check_source_len(a.nrows())?;
        let am = a.as_dmatrix();
        RealMatrix::from_fn(self.rows.len(), a.ncols(), |r, c| {
            let row = self.rows[r];
            row.scale * am[(row.source, c)]
        })
    }

    /// Sorted distinct source indices.
    pub fn distinct_sources(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.rows.iter().map(|r| r.source).collect();
        v.sort_unstable();
        v.dedup();
        v
    }
}

/// Elementwise maximum of several weight vectors over the same rows.
pub fn elementwise_max(weights: &[WeightVector]) -> Result<Vec<f64>> {
    let first = weights
        .first()
        .ok_or_else(|| invalid("at least one weight vector is required"))?;
    let n = first.len();
    let mut out = first.as_slice().to_vec();
    for w in &weights[1..] {
        if w.len() != n {
            return Err(Error::MismatchedLengths {
                expected: n,
                got: w.len(),
            });
        }
        if w.p() != first.p() {
            return Err(Error::MixedExponents {
                first: first.p(),
                other: w.p(),
            });
        }
        for (o, v) in out.iter_mut().zip(w.as_slice()) {
            *o = o.max(*v);
        }
    }
    Ok(out)
}

/// Normalized elementwise-maximum weights `p_i = max_j w_i^j / T`, returned
/// together with the unnormalized total `T = sum_i max_j w_i^j`.
pub fn max_weight_distribution(weights: &[WeightVector]) -> Result<(SamplingDistribution, f64)> {
    let max = elementwise_max(weights)?;
    let total: f64 = max.iter().sum();
    if !(total > 0.0) {
        return Err(Error::AllZeroWeights);
    }
    Ok((SamplingDistribution::from_masses(&max)?, total))
}

/// Default draw cap `50 * tau * ceil(ln(tau + 1))`.
pub fn default_draw_cap(tau: usize) -> usize {
    let log = ((tau as f64 + 1.0).ln().ceil() as usize).max(1);
    50 * tau * log
}

/// Draws i.i.d. from `dist` until `tau` distinct indices have been seen.
pub fn draw_until_distinct(
    dist: &SamplingDistribution,
    tau: usize,
    seed: u64,
    m_cap: usize,
) -> Result<QueryPlan> {
    if tau == 0 {
        return Err(invalid("query budget must be at least 1"));
    }
    if tau > dist.support_size() {
        return Err(Error::BudgetExceedsSupport {
            tau,
            support: dist.support_size(),
        });
    }
    if m_cap < tau {
        return Err(invalid(format!("draw cap {m_cap} is below the budget {tau}")));
    }
    let sampler = dist.sampler();
    let mut rng = SeededRng::new(seed);
    let mut seen = HashSet::with_capacity(tau);
    let mut draws = Vec::with_capacity(tau);
    while seen.len() < tau {
        if draws.len() == m_cap {
            return Err(Error::CapExceeded {
                cap: m_cap,
                tau,
                partial: Box::new(QueryPlan::from_draws(draws, seed)),
            });
        }
        let q = sampler.draw(&mut rng);
        draws.push(q);
        seen.insert(q);
    }
    Ok(QueryPlan::from_draws(draws, seed))
}

/// Exactly `m` i.i.d. draws from `dist`.
pub fn draw_iid(dist: &SamplingDistribution, m: usize, seed: u64) -> QueryPlan {
    let sampler = dist.sampler();
    let mut rng = SeededRng::new(seed);
    let draws = (0..m).map(|_| sampler.draw(&mut rng)).collect();
    QueryPlan::from_draws(draws, seed)
}

/// Sampling matrix over `n_l + n_u` source rows: the `n_l` labeled rows with
/// scale 1, followed by one row per draw `q` with scale `(m p_q)^{-1/p}`.
pub fn build_sampling_matrix(
    plan: &QueryPlan,
    dist: &SamplingDistribution,
    n_l: usize,
    p: f64,
) -> Result<SamplingMatrix> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(invalid(format!("sampling exponent must be at least 1, got {p}")));
    }
    let m = plan.m() as f64;
    let n_u = dist.len();
    let mut rows: Vec<SampledRow> = (0..n_l).map(|source| SampledRow { source, scale: 1.0 }).collect();
    rows.reserve(plan.m());
    for &q in &plan.draws {
        if q >= n_u {
            return Err(Error::IndexOutOfRange { index: q, len: n_u });
        }
        let pq = dist.probs()[q];
        if !(pq > 0.0) {
            return Err(invalid(format!("draw {q} has zero probability under the distribution")));
        }
        rows.push(SampledRow {
            source: n_l + q,
            scale: (m * pq).powf(-1.0 / p),
        });
    }
    Ok(SamplingMatrix {
        rows,
        n_source: n_l + n_u,
        p,
    })
}

/// Independent coin flips: row `i` is kept with probability
/// `p_i = min(beta * w_i, 1)` and scaled by `p_i^{-1/p}`.
pub fn bernoulli_sampling_matrix(w: &WeightVector, beta: f64, p: f64, seed: u64) -> Result<SamplingMatrix> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(invalid(format!("beta must be positive, got {beta}")));
    }
    if !(p > 0.0 && p.is_finite()) {
        return Err(invalid(format!("exponent must be positive, got {p}")));
    }
    let mut rng = SeededRng::new(seed);
    let mut rows = Vec::new();
    for (source, &wi) in w.as_slice().iter().enumerate() {
        let pi = (beta * wi).min(1.0);
        // One uniform per row keeps the stream aligned with row indices.
        let u = rng.uniform();
        if pi > 0.0 && u < pi {
            rows.push(SampledRow {
                source,
                scale: pi.powf(-1.0 / p),
            });
        }
    }
    Ok(SamplingMatrix {
        rows,
        n_source: w.len(),
        p,
    })
}

/// Sample-size formula
/// `ceil(c eps^-4 T d^{max(p/2-1,0)} ln^2(max(d,2)) ln(max(dT/eps, 2)))`.
pub fn sample_size_bound(d: usize, p: f64, eps: f64, total: f64, c: f64) -> Result<u64> {
    if d == 0 {
        return Err(invalid("dimension must be at least 1"));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(invalid(format!("epsilon must lie in (0, 1), got {eps}")));
    }
    if !(total > 0.0 && total.is_finite()) || !(c > 0.0 && c.is_finite()) {
        return Err(invalid("T and c must be positive and finite"));
    }
    let df = d as f64;
    let dim_factor = df.powf((p / 2.0 - 1.0).max(0.0));
    let log_d = df.max(2.0).ln();
    let log_t = (df * total / eps).max(2.0).ln();
    let value = c * eps.powi(-4) * total * dim_factor * log_d * log_d * log_t;
    Ok(value.ceil() as u64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wv(v: &[f64]) -> WeightVector {
        WeightVector::new(v.to_vec(), 2.0).unwrap()
    }

    #[test]
    fn max_distribution_example() {
        let (dist, t) = max_weight_distribution(&[wv(&[1.0, 0.5, 0.5]), wv(&[0.5, 1.0, 0.5])]).unwrap();
        assert!((t - 2.5).abs() < 1e-15);
        for (a, b) in dist.probs().iter().zip([0.4, 0.4, 0.2]) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn max_distribution_identical_and_single() {
        let w = wv(&[0.5, 0.25, 0.75, 0.5]);
        let (dist, t) = max_weight_distribution(&[w.clone(), w.clone(), w.clone()]).unwrap();
        assert!((t - 2.0).abs() < 1e-15);
        for (a, b) in dist.probs().iter().zip(w.as_slice()) {
            assert!((a - b / 2.0).abs() < 1e-15);
        }
        let (single, _) = max_weight_distribution(std::slice::from_ref(&w)).unwrap();
        assert_eq!(single, dist);
    }

    #[test]
    fn max_distribution_errors() {
        assert!(matches!(
            max_weight_distribution(&[wv(&[0.5, 0.5]), wv(&[0.5])]),
            Err(Error::MismatchedLengths { .. })
        ));
        let w3 = WeightVector::new(vec![0.5, 0.5], 3.0).unwrap();
        assert!(matches!(
            max_weight_distribution(&[wv(&[0.5, 0.5]), w3]),
            Err(Error::MixedExponents { .. })
        ));
        assert!(matches!(
            max_weight_distribution(&[wv(&[0.0, 0.0])]),
            Err(Error::AllZeroWeights)
        ));
    }

    #[test]
    fn uniform_covers_everything() {
        let dist = SamplingDistribution::uniform(10).unwrap();
        let plan = draw_until_distinct(&dist, 10, 3, default_draw_cap(10)).unwrap();
        let mut d = plan.distinct.clone();
        d.sort_unstable();
        assert_eq!(d, (0..10).collect::<Vec<_>>());
        assert!(plan.m() >= 10);
    }

    #[test]
    fn point_mass() {
        let dist = SamplingDistribution::from_masses(&[1.0, 0.0, 0.0]).unwrap();
        assert_eq!(dist.support_size(), 1);
        let plan = draw_until_distinct(&dist, 1, 0, 10).unwrap();
        assert_eq!(plan.draws, vec![0]);
        assert_eq!(plan.m(), 1);
    }

    #[test]
    fn reproducible_plan() {
        let dist = SamplingDistribution::from_masses(&[0.1, 0.3, 0.05, 0.2, 0.15, 0.2]).unwrap();
        let a = draw_until_distinct(&dist, 5, 42, 1000).unwrap();
        let b = draw_until_distinct(&dist, 5, 42, 1000).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.distinct.len(), 5);
        let sa = build_sampling_matrix(&a, &dist, 2, 2.0).unwrap();
        let sb = build_sampling_matrix(&b, &dist, 2, 2.0).unwrap();
        assert_eq!(sa, sb);
    }

    #[test]
    fn budget_and_cap_errors() {
        let dist = SamplingDistribution::from_masses(&[1.0, 0.0, 1.0]).unwrap();
        assert!(matches!(
            draw_until_distinct(&dist, 3, 1, 100),
            Err(Error::BudgetExceedsSupport { tau: 3, support: 2 })
        ));
        let skewed = SamplingDistribution::from_masses(&[1.0, 1e-12]).unwrap();
        match draw_until_distinct(&skewed, 2, 1, 5) {
            Err(Error::CapExceeded { partial, cap, .. }) => {
                assert_eq!(cap, 5);
                assert_eq!(partial.m(), 5);
                assert_eq!(partial.distinct, vec![0]);
            }
            other => panic!("expected CapExceeded, got {other:?}"),
        }
    }

    #[test]
    fn sampling_matrix_scales() {
        let dist = SamplingDistribution::uniform(4).unwrap();
        let plan = QueryPlan::from_draws(vec![0, 1, 1, 3], 0);
        let s = build_sampling_matrix(&plan, &dist, 2, 2.0).unwrap();
        assert_eq!(s.n_source, 6);
        assert_eq!(s.rows[0], SampledRow { source: 0, scale: 1.0 });
        assert_eq!(s.rows[1], SampledRow { source: 1, scale: 1.0 });
        assert_eq!(s.rows.len(), 6);
        for r in &s.rows[2..] {
            assert!((r.scale - 1.0).abs() < 1e-15);
        }
        assert_eq!(s.rows[3].source, 3);
        assert_eq!(s.rows[4].source, 3);

        let half = SamplingDistribution::uniform(2).unwrap();
        let plan = QueryPlan::from_draws(vec![1, 0], 0);
        let s1 = build_sampling_matrix(&plan, &half, 0, 1.0).unwrap();
        assert!(s1.rows.iter().all(|r| (r.scale - 1.0).abs() < 1e-15));
    }

    #[test]
    fn sampling_matrix_errors() {
        let dist = SamplingDistribution::uniform(2).unwrap();
        let plan = QueryPlan::from_draws(vec![5], 0);
        assert!(matches!(
            build_sampling_matrix(&plan, &dist, 0, 2.0),
            Err(Error::IndexOutOfRange { index: 5, len: 2 })
        ));
        let ok = QueryPlan::from_draws(vec![0], 0);
        assert!(build_sampling_matrix(&ok, &dist, 0, 0.5).is_err());
    }

    #[test]
    fn apply_selects_and_scales() {
        let s = SamplingMatrix {
            rows: vec![SampledRow { source: 2, scale: 2.0 }, SampledRow { source: 0, scale: 0.5 }],
            n_source: 3,
            p: 2.0,
        };
        assert_eq!(s.apply(&[1.0, 2.0, 3.0]).unwrap(), vec![6.0, 0.5]);
        assert!(s.apply(&[1.0]).is_err());
    }

    #[test]
    fn bernoulli_saturated_keeps_everything() {
        let w = wv(&[0.2, 0.9, 0.01]);
        let s = bernoulli_sampling_matrix(&w, 1e6, 2.0, 9).unwrap();
        assert_eq!(s.rows.len(), 3);
        assert!(s.rows.iter().all(|r| r.scale == 1.0));
    }

    #[test]
    fn bernoulli_half_scale() {
        let w = wv(&[1.0, 1.0]);
        for seed in 0..20 {
            let s = bernoulli_sampling_matrix(&w, 0.5, 3.0, seed).unwrap();
            for r in &s.rows {
                assert!((r.scale - 2f64.powf(1.0 / 3.0)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn bernoulli_expected_row_count() {
        // Monte Carlo oracle: each row is an independent Bernoulli(min(beta w, 1)).
        let w = wv(&[0.1, 0.4, 0.8, 1.0, 0.05, 0.3]);
        let beta = 1.5;
        let probs: Vec<f64> = w.as_slice().iter().map(|v| (beta * v).min(1.0)).collect();
        let mean: f64 = probs.iter().sum();
        let var: f64 = probs.iter().map(|p| p * (1.0 - p)).sum();
        let trials = 10_000;
        let total: usize = (0..trials)
            .map(|seed| bernoulli_sampling_matrix(&w, beta, 2.0, seed).unwrap().rows.len())
            .sum();
        let observed = total as f64 / trials as f64;
        let se = (var / trials as f64).sqrt();
        assert!((observed - mean).abs() <= 3.0 * se, "{observed} vs {mean} (se {se})");
    }

    #[test]
    fn sample_size_formula() {
        // Direct evaluation of the formula for c=1, d=10, p=2, eps=0.5, T=10.
        let expect = (16.0 * 10.0 * 10f64.ln().powi(2) * 200f64.ln()).ceil() as u64;
        assert_eq!(sample_size_bound(10, 2.0, 0.5, 10.0, 1.0).unwrap(), expect);
        assert_eq!(expect, 4495);
        // p = 2 drops the dimension factor; p = 4 multiplies by d.
        let p4 = sample_size_bound(10, 4.0, 0.5, 10.0, 1.0).unwrap();
        let raw2 = 16.0 * 10.0 * 10f64.ln().powi(2) * 200f64.ln();
        assert_eq!(p4, (raw2 * 10.0).ceil() as u64);
    }

    #[test]
    fn sample_size_roughly_linear_in_t() {
        let a = sample_size_bound(20, 2.0, 0.3, 50.0, 1.0).unwrap() as f64;
        let b = sample_size_bound(20, 2.0, 0.3, 100.0, 1.0).unwrap() as f64;
        let log_ratio = (20.0 * 100.0 / 0.3f64).ln() / (20.0 * 50.0 / 0.3f64).ln();
        assert!((b / a - 2.0 * log_ratio).abs() < 1e-3);
        assert!(sample_size_bound(20, 2.0, 1.5, 1.0, 1.0).is_err());
    }

    #[test]
    fn default_cap_values() {
        assert_eq!(default_draw_cap(1), 50);
        assert_eq!(default_draw_cap(10), 50 * 10 * 3);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn plan_accounting(masses in prop::collection::vec(0.0f64..1.0, 2..30), seed in any::<u64>(), frac in 0.1f64..1.0) {
                prop_assume!(masses.iter().any(|m| *m > 0.0));
                let dist = SamplingDistribution::from_masses(&masses).unwrap();
                let tau = ((dist.support_size() as f64 * frac).ceil() as usize).max(1);
                match draw_until_distinct(&dist, tau, seed, 200_000) {
                    Ok(plan) => {
                        let uniq: HashSet<usize> = plan.draws.iter().copied().collect();
                        prop_assert_eq!(uniq.len(), plan.distinct.len());
                        prop_assert_eq!(plan.distinct.len(), tau);
                        prop_assert!(plan.m() >= tau);
                        prop_assert!(plan.draws.iter().all(|&i| dist.probs()[i] > 0.0));
                        prop_assert_eq!(&plan, &draw_until_distinct(&dist, tau, seed, 200_000).unwrap());
                    }
                    Err(Error::CapExceeded { .. }) => {}
                    Err(e) => prop_assert!(false, "{}", e),
                }
            }

            #[test]
            fn total_mass_bounds(seed in 0u64..1000, k in 1usize..5) {
                // T lies between d and min(k d, n) when each vector sums to d.
                let mut rng = SeededRng::new(seed);
                let n = 20;
                let d = 3;
                let ws: Vec<WeightVector> = (0..k).map(|_| {
                    let a = RealMatrix::from_fn(n, d, |_, _| rng.normal()).unwrap();
                    crate::lewis::leverage_scores(&a).unwrap()
                }).collect();
                let (_, t) = max_weight_distribution(&ws).unwrap();
                prop_assert!(t >= d as f64 - 1e-9);
                prop_assert!(t <= ((k * d).min(n)) as f64 + 1e-9);
            }
        }
    }
}
