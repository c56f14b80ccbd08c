//! Observational statistics over families of weight vectors, plus a
//! synthetic generator of correlated feature representations.

use std::collections::{HashMap, HashSet};
use std::fmt::{Display, Write as _};
use std::hash::Hash;

use nalgebra::DMatrix;

use crate::error::{invalid, Error, Result};
use crate::lewis::WeightVector;
use crate::matrix::{RealMatrix, DEFAULT_RANK_TOLERANCE};
use crate::rng::SeededRng;

/// One point of the sum-of-maximum-weights curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub k: usize,
    /// `T(k) = sum_i max_{j <= k} w_i^j`.
    pub total: f64,
    /// `min(k * d_max, n)`.
    pub upper_bound: f64,
}

/// `T(k')` for every prefix `k' = 1..=k` of `weights`, with the bound
/// `sum_i max_j w_i^j <= min(sum_j rank_j, n)`. The rank of each
/// representation is read off as the rounded weight sum.
pub fn max_weight_sum_curve(weights: &[WeightVector], n: usize) -> Result<Vec<CurvePoint>> {
    let mut running = vec![0.0_f64; n];
    let mut d_max = 0usize;
    let mut out = Vec::with_capacity(weights.len());
    for (j, w) in weights.iter().enumerate() {
        if w.len() != n {
            return Err(Error::MismatchedLengths {
                expected: n,
                got: w.len(),
            });
        }
        for (r, v) in running.iter_mut().zip(w.as_slice()) {
            *r = r.max(*v);
        }
        d_max = d_max.max(w.sum().round() as usize);
        let k = j + 1;
        out.push(CurvePoint {
            k,
            total: running.iter().sum(),
            upper_bound: (k * d_max).min(n) as f64,
        });
    }
    Ok(out)
}

/// Indices of the `size` largest values, ties broken by ascending index.
fn top_indices(values: &[f64], size: usize) -> HashSet<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    idx.into_iter().take(size).collect()
}

/// Mean fraction of each model's top-`t`% rows that also fall in the top-`t`%
/// of the elementwise-max weights. The set size is `max(1, floor(t n / 100))`.
pub fn coverage_kappa(weights: &[WeightVector], t_percent: f64) -> Result<f64> {
    if !(t_percent > 0.0 && t_percent <= 100.0) {
        return Err(invalid(format!("t must lie in (0, 100], got {t_percent}")));
    }
    let max = crate::sampling::elementwise_max(weights)?;
    let n = max.len();
    let size = ((t_percent / 100.0 * n as f64).floor() as usize).clamp(1, n.max(1));
    let top_max = top_indices(&max, size);
    let total: f64 = weights
        .iter()
        .map(|w| {
            let top_j = top_indices(w.as_slice(), size);
            top_j.intersection(&top_max).count() as f64 / size as f64
        })
        .sum();
    Ok(total / weights.len() as f64)
}

/// `max_c count(c) / min_c count(c)`, over `universe` when given.
pub fn class_imbalance<T>(labels: &[T], universe: Option<&[T]>) -> Result<f64>
where
    T: Eq + Hash + Display,
{
    if labels.is_empty() {
        return Err(Error::EmptyLabels);
    }
    let mut counts: HashMap<&T, usize> = HashMap::new();
    for l in labels {
        *counts.entry(l).or_default() += 1;
    }
    let selected: Vec<usize> = match universe {
        Some(classes) => classes
            .iter()
            .map(|c| counts.get(c).copied().ok_or_else(|| Error::AbsentClass(c.to_string())))
            .collect::<Result<_>>()?,
        None => counts.values().copied().collect(),
    };
    let max = selected.iter().copied().max().ok_or(Error::EmptyLabels)?;
    let min = selected.iter().copied().min().ok_or(Error::EmptyLabels)?;
    Ok(max as f64 / min as f64)
}

/// Rotation applied to the shared latent factors of each representation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BackboneRotation {
    Random,
    Identity,
}

/// `k` correlated `n x d` representations with random rotations.
pub fn synthetic_backbones(n: usize, d: usize, k: usize, correlation: f64, seed: u64) -> Result<Vec<RealMatrix>> {
    synthetic_backbones_with(n, d, k, correlation, seed, BackboneRotation::Random)
}

/// Representation `j` is `tanh(sqrt(c) Z R_j + sqrt(1 - c) N_j)` for a shared
/// Gaussian latent `Z`, an orthogonal `R_j` and fresh Gaussian noise `N_j`.
/// Rank-deficient draws are regenerated up to three times.
pub fn synthetic_backbones_with(
    n: usize,
    d: usize,
    k: usize,
    correlation: f64,
    seed: u64,
    rotation: BackboneRotation,
) -> Result<Vec<RealMatrix>> {
    if d == 0 || n <= d {
        return Err(invalid(format!("need n > d >= 1, got n={n}, d={d}")));
    }
    if k == 0 {
        return Err(invalid("need at least one representation"));
    }
    if !(0.0..=1.0).contains(&correlation) {
        return Err(invalid(format!("correlation must lie in [0, 1], got {correlation}")));
    }
    let mut latent_rng = SeededRng::with_stream(seed, 0);
    let z = DMatrix::from_fn(n, d, |_, _| latent_rng.normal());
    let shared = correlation.sqrt();
    let fresh = (1.0 - correlation).sqrt();

    let mut out = Vec::with_capacity(k);
    for j in 0..k {
        let mut last_err = None;
        let mut built = None;
        for attempt in 0..3u64 {
            let mut rng = SeededRng::with_stream(seed, 1 + j as u64 + attempt * (k as u64 + 1));
            let rot = match rotation {
                BackboneRotation::Random => random_orthogonal(d, &mut rng),
                BackboneRotation::Identity => DMatrix::identity(d, d),
            };
            let mixed = &z * rot * shared;
            let m = DMatrix::from_fn(n, d, |r, c| {
                let noise = if fresh > 0.0 { fresh * rng.normal() } else { 0.0 };
                (mixed[(r, c)] + noise).tanh()
            });
            let candidate = RealMatrix::from_dmatrix(m)?;
            match candidate.ensure_full_column_rank(DEFAULT_RANK_TOLERANCE) {
                Ok(()) => {
                    built = Some(candidate);
                    break;
                }
                Err(e) => last_err = Some(e),
            }
        }
        match built {
            Some(m) => out.push(m),
            None => return Err(last_err.expect("attempted at least once")),
        }
    }
    Ok(out)
}

/// Haar-distributed orthogonal matrix via QR of a Gaussian matrix with the
/// sign of `diag(R)` folded into `Q`.
fn random_orthogonal(d: usize, rng: &mut SeededRng) -> DMatrix<f64> {
    let g = DMatrix::from_fn(d, d, |_, _| rng.normal());
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for c in 0..d {
        if r[(c, c)] < 0.0 {
            q.column_mut(c).neg_mut();
        }
    }
    q
}

/// `k,T,upper_bound` CSV.
pub fn curve_csv(points: &[CurvePoint]) -> String {
    let mut s = String::from("k,T,upper_bound\n");
    for p in points {
        let _ = writeln!(s, "{},{},{}", p.k, p.total, p.upper_bound);
    }
    s
}

/// `t,kappa` CSV.
pub fn kappa_csv(rows: &[(f64, f64)]) -> String {
    let mut s = String::from("t,kappa\n");
    for (t, k) in rows {
        let _ = writeln!(s, "{t},{k}");
    }
    s
}
