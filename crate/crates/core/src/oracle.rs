//! Independent checks: subspace-embedding distortion and brute-force optima.
//!
//! Nothing here calls into the single-neuron solver; the brute-force
//! optimizer is a separate gradient method so that it can serve as a
//! reference for the sampled solves.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::matrix::{pow_norm, RealMatrix, DEFAULT_RANK_TOLERANCE};
use crate::regression::{solve_lp_regression, Activation};
use crate::rng::SeededRng;
use crate::sampling::SamplingMatrix;

pub const BRUTE_FORCE_RESTARTS: usize = 50;
const BRUTE_FORCE_MAX_ITERS: usize = 3000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistortionMethod {
    ExactP2,
    MonteCarlo,
}

/// Measured distortion of `S` on the column space of `A`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistortionReport {
    /// `sup |‖SAθ‖_p^p / ‖Aθ‖_p^p − 1|` (squared scale at p = 2).
    pub epsilon_hat: f64,
    /// Smallest `ε` with `(1−ε)‖Aθ‖_p ≤ ‖SAθ‖_p ≤ (1+ε)‖Aθ‖_p` over the same
    /// directions (norm scale).
    pub norm_epsilon: f64,
    pub method: DistortionMethod,
    pub trials: usize,
}

/// Whether `s` keeps every source row exactly once at scale 1.
fn is_full_selection(s: &SamplingMatrix) -> bool {
    let mut seen = vec![false; s.n_source];
    s.rows.len() == s.n_source
        && s.rows.iter().all(|r| r.scale == 1.0 && !std::mem::replace(&mut seen[r.source], true))
}

/// Exact ℓ2 distortion as the spectral norm of `(SQ)^T(SQ) − I`, where `Q`
/// is an orthonormal basis of `range(A)`. A selection of every row at unit
/// scale is reported as exactly zero rather than QR roundoff.
pub fn exact_distortion_p2(a: &RealMatrix, s: &SamplingMatrix) -> Result<DistortionReport> {
    if s.n_source != a.nrows() {
        return Err(Error::MismatchedLengths {
            expected: a.nrows(),
            got: s.n_source,
        });
    }
    a.ensure_full_column_rank(DEFAULT_RANK_TOLERANCE)?;
    if is_full_selection(s) {
        return Ok(DistortionReport {
            epsilon_hat: 0.0,
            norm_epsilon: 0.0,
            method: DistortionMethod::ExactP2,
            trials: 0,
        });
    }
    let q = a.as_dmatrix().clone().qr().q();
    let d = q.ncols();
    let mut gram = DMatrix::<f64>::zeros(d, d);
    for row in &s.rows {
        let qr = q.row(row.source);
        gram.ger(row.scale * row.scale, &qr.transpose(), &qr.transpose(), 1.0);
    }
    for i in 0..d {
        gram[(i, i)] -= 1.0;
    }
    let eig = gram.symmetric_eigen();
    let lo = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = eig.eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let epsilon_hat = lo.abs().max(hi.abs());
    let norm_epsilon = (1.0 - (1.0 + lo).max(0.0).sqrt()).max((1.0 + hi).max(0.0).sqrt() - 1.0);
    Ok(DistortionReport {
        epsilon_hat,
        norm_epsilon,
        method: DistortionMethod::ExactP2,
        trials: 0,
    })
}

/// Largest observed `|‖SAθ‖_p^p / ‖Aθ‖_p^p − 1|` over random unit directions.
/// A lower bound on the true distortion.
pub fn monte_carlo_distortion(
    a: &RealMatrix,
    s: &SamplingMatrix,
    p: f64,
    trials: usize,
    seed: u64,
) -> Result<DistortionReport> {
    if trials == 0 {
        return Err(invalid("at least one trial is required"));
    }
    if s.n_source != a.nrows() {
        return Err(Error::MismatchedLengths {
            expected: a.nrows(),
            got: s.n_source,
        });
    }
    let mut rng = SeededRng::new(seed);
    let mut epsilon_hat: f64 = 0.0;
    let mut norm_epsilon: f64 = 0.0;
    for _ in 0..trials {
        let mut theta = rng.normal_vec(a.ncols());
        let nrm = theta.iter().map(|v| v * v).sum::<f64>().sqrt();
        if nrm == 0.0 {
            continue;
        }
        theta.iter_mut().for_each(|v| *v /= nrm);
        let at = a.mul_vec(&theta);
        let full = pow_norm(&at, p);
        if full == 0.0 {
            continue;
        }
        let sampled = pow_norm(&s.apply(&at)?, p);
        let ratio = sampled / full;
        epsilon_hat = epsilon_hat.max((ratio - 1.0).abs());
        norm_epsilon = norm_epsilon.max((ratio.powf(1.0 / p) - 1.0).abs());
    }
    Ok(DistortionReport {
        epsilon_hat,
        norm_epsilon,
        method: DistortionMethod::MonteCarlo,
        trials,
    })
}

fn neuron_loss(a: &DMatrix<f64>, y: &[f64], f: Activation, p: f64, theta: &DVector<f64>) -> f64 {
    let z = a * theta;
    z.iter().zip(y).map(|(zi, yi)| (f.apply(*zi) - yi).abs().powf(p)).sum()
}

fn neuron_grad(a: &DMatrix<f64>, y: &[f64], f: Activation, p: f64, theta: &DVector<f64>) -> DVector<f64> {
    let z = a * theta;
    let coeff = DVector::from_iterator(
        z.len(),
        z.iter().zip(y).map(|(zi, yi)| {
            let r = f.apply(*zi) - yi;
            if r == 0.0 {
                0.0
            } else {
                p * r.abs().powf(p - 1.0) * r.signum() * f.derivative(*zi)
            }
        }),
    );
    a.tr_mul(&coeff)
}

/// Barzilai-Borwein gradient descent with a monotone backtracking safeguard.
fn bb_descent(a: &DMatrix<f64>, y: &[f64], f: Activation, p: f64, start: DVector<f64>) -> (DVector<f64>, f64) {
    let mut theta = start;
    let mut loss = neuron_loss(a, y, f, p, &theta);
    let mut grad = neuron_grad(a, y, f, p, &theta);
    let mut step = 1.0 / (grad.norm() + 1.0);
    let mut quiet = 0;
    for _ in 0..BRUTE_FORCE_MAX_ITERS {
        let gn2 = grad.norm_squared();
        if gn2 == 0.0 || loss == 0.0 {
            break;
        }
        let mut t = step;
        let mut next = None;
        for _ in 0..60 {
            let cand = &theta - &grad * t;
            let cl = neuron_loss(a, y, f, p, &cand);
            if cl <= loss - 1e-4 * t * gn2 {
                next = Some((cand, cl));
                break;
            }
            t *= 0.5;
        }
        let Some((cand, cl)) = next else { break };
        let cand_grad = neuron_grad(a, y, f, p, &cand);
        let s = &cand - &theta;
        let g = &cand_grad - &grad;
        let sg = s.dot(&g);
        step = if sg > 0.0 { (s.norm_squared() / sg).min(1e12) } else { t * 2.0 };
        let rel = (loss - cl) / loss;
        theta = cand;
        loss = cl;
        grad = cand_grad;
        quiet = if rel < 1e-13 { quiet + 1 } else { 0 };
        if quiet >= 5 {
            break;
        }
    }
    (theta, loss)
}

/// Best of `restarts` dense minimizations of `‖f(Aθ) − y‖_p^p`.
///
/// The identity activation defers to [`solve_lp_regression`]. Otherwise the
/// starts are the least-squares fit followed by Gaussian directions scaled
/// to the size of `y`, each run in parallel on its own RNG stream.
pub fn brute_force_opt(
    a: &RealMatrix,
    y: &[f64],
    f: Activation,
    p: f64,
    restarts: usize,
    seed: u64,
) -> Result<(Vec<f64>, f64)> {
    if y.len() != a.nrows() {
        return Err(Error::MismatchedLengths {
            expected: a.nrows(),
            got: y.len(),
        });
    }
    if restarts == 0 {
        return Err(invalid("at least one restart is required"));
    }
    let am = a.as_dmatrix();
    if f == Activation::Identity {
        let theta = solve_lp_regression(a, y, p, 1e-12)?;
        let loss = neuron_loss(am, y, f, p, &DVector::from_column_slice(&theta));
        return Ok((theta, loss));
    }
    let losses = restart_losses(a, y, f, p, restarts, seed)?;
    let best = losses
        .into_iter()
        .enumerate()
        .min_by(|(i, x), (j, z)| x.1.total_cmp(&z.1).then(i.cmp(j)))
        .map(|(_, r)| r)
        .expect("at least one restart");
    Ok((best.0.iter().copied().collect(), best.1))
}

fn restart_losses(
    a: &RealMatrix,
    y: &[f64],
    f: Activation,
    p: f64,
    restarts: usize,
    seed: u64,
) -> Result<Vec<(DVector<f64>, f64)>> {
    let am = a.as_dmatrix();
    let d = am.ncols();
    let ls = solve_lp_regression(a, y, 2.0, 1e-12)?;
    let y_norm = pow_norm(y, p);
    let starts: Vec<DVector<f64>> = (0..restarts)
        .map(|r| {
            if r == 0 {
                return DVector::from_column_slice(&ls);
            }
            let mut rng = SeededRng::with_stream(seed, r as u64);
            let u = DVector::from_vec(rng.normal_vec(d));
            let au = pow_norm((am * &u).as_slice(), p);
            let factor = if au > 0.0 && y_norm > 0.0 {
                (y_norm / au).powf(1.0 / p)
            } else {
                1.0
            };
            u * factor
        })
        .collect();
    Ok(starts.into_par_iter().map(|s| bb_descent(am, y, f, p, s)).collect())
}

/// Best-so-far loss after each restart, in restart order.
pub fn brute_force_profile(
    a: &RealMatrix,
    y: &[f64],
    f: Activation,
    p: f64,
    restarts: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    if f == Activation::Identity {
        let (_, loss) = brute_force_opt(a, y, f, p, 1, seed)?;
        return Ok(vec![loss; restarts]);
    }
    let losses = restart_losses(a, y, f, p, restarts, seed)?;
    let mut best = f64::INFINITY;
    Ok(losses
        .iter()
        .map(|(_, l)| {
            best = best.min(*l);
            best
        })
        .collect())
}
