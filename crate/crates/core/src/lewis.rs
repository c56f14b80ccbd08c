//! ℓp Lewis weights and leverage scores.
//!
//! The Lewis weights of `A` are the unique positive fixed point of
//!
//! ```text
//! w_i = (a_i^T (A^T W^{1-2/p} A)^{-1} a_i)^{p/2}
//! ```
//!
//! and reduce to the leverage scores at `p = 2`. They lie in `[0, 1]` and sum
//! to `d` for a full-column-rank `A`.

use nalgebra::DMatrix;

use crate::error::{invalid, Error, Result};
use crate::matrix::{RealMatrix, DEFAULT_RANK_TOLERANCE};

const WEIGHT_SLACK: f64 = 1e-9;

/// Per-row weights together with the exponent they were computed for.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    w: Vec<f64>,
    p: f64,
}

impl WeightVector {
    /// Validates that every entry is finite and lies in `[0, 1]`; entries that
    /// exceed 1 by rounding noise are clamped.
    pub fn new(w: Vec<f64>, p: f64) -> Result<Self> {
        if !(p > 0.0 && p.is_finite()) {
            return Err(invalid(format!("exponent p must be positive, got {p}")));
        }
        let mut w = w;
        for (i, v) in w.iter_mut().enumerate() {
            if !v.is_finite() || *v < 0.0 || *v > 1.0 + WEIGHT_SLACK {
                return Err(invalid(format!("weight {i} = {v} outside [0, 1]")));
            }
            *v = v.min(1.0);
        }
        Ok(Self { w, p })
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.w
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.w
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }

    pub fn sum(&self) -> f64 {
        self.w.iter().sum()
    }

    pub fn min(&self) -> f64 {
        self.w.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.w.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Iteration schedule for [`lewis_weights`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LewisConfig {
    pub p: f64,
    pub max_iters: usize,
    /// Maximum relative fixed-point residual accepted as converged.
    pub fp_tolerance: f64,
    pub rank_tolerance: f64,
    /// Geometric damping exponent in `(0, 1]`; 1 is the plain iteration.
    pub damping: f64,
}

impl LewisConfig {
    /// Defaults for exponent `p`: plain iteration below 4, damping ½ from 4 up.
    pub fn new(p: f64) -> Self {
        Self {
            p,
            max_iters: 200,
            fp_tolerance: 1e-10,
            rank_tolerance: DEFAULT_RANK_TOLERANCE,
            damping: if p < 4.0 { 1.0 } else { 0.5 },
        }
    }

    pub fn with_tolerance(mut self, fp_tolerance: f64) -> Self {
        self.fp_tolerance = fp_tolerance;
        self
    }

    pub fn with_max_iters(mut self, max_iters: usize) -> Self {
        self.max_iters = max_iters;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p > 0.0 && self.p.is_finite()) {
            return Err(invalid(format!("p must be positive, got {}", self.p)));
        }
        if self.max_iters == 0 {
            return Err(invalid("max_iters must be at least 1"));
        }
        if !(self.fp_tolerance > 0.0) || !(self.rank_tolerance > 0.0) {
            return Err(invalid("tolerances must be positive"));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(invalid(format!("damping must lie in (0, 1], got {}", self.damping)));
        }
        Ok(())
    }
}

/// Lewis weights plus the certificate of the final iterate.
#[derive(Debug, Clone, PartialEq)]
pub struct LewisOutcome {
    pub weights: WeightVector,
    pub residual: f64,
    pub iterations: usize,
}

/// Leverage scores `diag(A (A^T A)^{-1} A^T)`, computed as squared row norms
/// of the thin orthogonal factor of `A`.
pub fn leverage_scores(a: &RealMatrix) -> Result<WeightVector> {
    leverage_scores_with_tolerance(a, DEFAULT_RANK_TOLERANCE)
}

pub fn leverage_scores_with_tolerance(a: &RealMatrix, rank_tolerance: f64) -> Result<WeightVector> {
    a.ensure_full_column_rank(rank_tolerance)?;
    let q = a.as_dmatrix().clone().qr().q();
    let w = q
        .row_iter()
        .map(|row| row.norm_squared().clamp(0.0, 1.0))
        .collect();
    WeightVector::new(w, 2.0)
}

/// ℓp Lewis weights by fixed-point iteration from the uniform start `d/n`.
pub fn lewis_weights(a: &RealMatrix, cfg: &LewisConfig) -> Result<WeightVector> {
    lewis_weights_detailed(a, cfg).map(|o| o.weights)
}

pub fn lewis_weights_detailed(a: &RealMatrix, cfg: &LewisConfig) -> Result<LewisOutcome> {
    cfg.validate()?;
    a.ensure_full_column_rank(cfg.rank_tolerance)?;
    let (n, d) = (a.nrows(), a.ncols());
    let half_p = cfg.p / 2.0;
    let mut w = vec![d as f64 / n as f64; n];
    let mut residual = f64::INFINITY;

    for iter in 1..=cfg.max_iters {
        let qf = quadratic_forms(a, &w, cfg.p)?;
        let candidate: Vec<f64> = qf.iter().map(|q| q.powf(half_p)).collect();
        residual = relative_residual(&candidate, &w);
        if residual <= cfg.fp_tolerance {
            let weights = WeightVector::new(w.into_iter().map(|v| v.min(1.0)).collect(), cfg.p)?;
            return Ok(LewisOutcome {
                weights,
                residual,
                iterations: iter,
            });
        }
        if !residual.is_finite() {
            break;
        }
        if cfg.damping == 1.0 {
            w = candidate;
        } else {
            for (wi, ci) in w.iter_mut().zip(&candidate) {
                *wi = wi.powf(1.0 - cfg.damping) * ci.powf(cfg.damping);
            }
        }
    }
    Err(Error::NotConverged {
        iterations: cfg.max_iters,
        residual,
    })
}

/// Maximum relative fixed-point residual `max_i |q_i(w)^{p/2} / w_i - 1|`.
pub fn verify_fixed_point(a: &RealMatrix, w: &WeightVector, p: f64) -> Result<f64> {
    if w.len() != a.nrows() {
        return Err(Error::MismatchedLengths {
            expected: a.nrows(),
            got: w.len(),
        });
    }
    if let Some((index, &value)) = w.as_slice().iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        return Err(Error::NonPositiveWeight { index, value });
    }
    let qf = quadratic_forms(a, w.as_slice(), p)?;
    let candidate: Vec<f64> = qf.iter().map(|q| q.powf(p / 2.0)).collect();
    Ok(relative_residual(&candidate, w.as_slice()))
}

fn relative_residual(candidate: &[f64], w: &[f64]) -> f64 {
    candidate
        .iter()
        .zip(w)
        .map(|(&c, &wi)| {
            if wi > 0.0 {
                (c / wi - 1.0).abs()
            } else if c == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        })
        .fold(0.0, f64::max)
}

/// `a_i^T (A^T W^{1-2/p} A)^{-1} a_i` for every row, via Cholesky of the
/// reweighted Gram matrix. Rows with zero weight are left out of the Gram
/// matrix (they can only be zero rows at a fixed point).
pub(crate) fn quadratic_forms(a: &RealMatrix, w: &[f64], p: f64) -> Result<Vec<f64>> {
    let am = a.as_dmatrix();
    let (n, d) = am.shape();
    let exponent = 1.0 - 2.0 / p;
    let scale: Vec<f64> = w
        .iter()
        .map(|&wi| {
            if wi > 0.0 {
                if exponent == 0.0 {
                    1.0
                } else {
                    wi.powf(exponent / 2.0)
                }
            } else {
                0.0
            }
        })
        .collect();
    if scale.iter().any(|s| !s.is_finite()) {
        return Err(invalid("weights produce a non-finite reweighting"));
    }
    let b = DMatrix::from_fn(n, d, |r, c| am[(r, c)] * scale[r]);
    let gram = b.tr_mul(&b);
    let chol = gram.cholesky().ok_or(Error::RankDeficient {
        ratio: 0.0,
        tolerance: DEFAULT_RANK_TOLERANCE,
    })?;
    let z = chol.l().solve_lower_triangular(&am.transpose()).ok_or(Error::RankDeficient {
        ratio: 0.0,
        tolerance: DEFAULT_RANK_TOLERANCE,
    })?;
    Ok(z.column_iter().map(|c| c.norm_squared()).collect())
}
