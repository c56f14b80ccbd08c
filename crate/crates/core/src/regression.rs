//! ℓp regression and the constrained single-neuron solve.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::matrix::{pow_norm, RealMatrix, DEFAULT_RANK_TOLERANCE};
use crate::rng::SeededRng;
use crate::sampling::SamplingMatrix;

/// Residual floor inside IRLS weights.
pub const IRLS_SMOOTHING: f64 = 1e-10;

const IRLS_MAX_ITERS: usize = 1000;
const IRLS_RESTARTS: usize = 5;
const IRLS_SEED: u64 = 0x1215;

/// Scalar activation applied coordinatewise. Every variant is 1-Lipschitz
/// and maps 0 to 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Activation {
    Identity,
    Relu,
    Tanh,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
        }
    }

    /// Derivative; the relu subgradient at 0 is taken as 0.
    #[inline]
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => {
                let t = x.tanh();
                1.0 - t * t
            }
        }
    }

    pub fn lipschitz(self) -> f64 {
        1.0
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Identity => "identity",
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "identity" | "linear" => Ok(Activation::Identity),
            "relu" => Ok(Activation::Relu),
            "tanh" => Ok(Activation::Tanh),
            other => Err(invalid(format!(
                "unknown activation `{other}` (expected identity, relu or tanh)"
            ))),
        }
    }
}

// ---------------------------------------------------------------------------
// Unconstrained ℓp regression
// ---------------------------------------------------------------------------

fn residual(a: &DMatrix<f64>, y: &[f64], theta: &DVector<f64>) -> Vec<f64> {
    let fit = a * theta;
    fit.iter().zip(y).map(|(f, yi)| f - yi).collect()
}

fn lp_objective(a: &DMatrix<f64>, y: &[f64], theta: &DVector<f64>, p: f64) -> f64 {
    pow_norm(&residual(a, y, theta), p)
}

/// Least squares through the thin QR factorization.
fn least_squares(a: &DMatrix<f64>, y: &[f64]) -> Result<DVector<f64>> {
    let qr = a.clone().qr();
    let rhs = qr.q().tr_mul(&DVector::from_column_slice(y));
    qr.r().solve_upper_triangular(&rhs).ok_or(Error::RankDeficient {
        ratio: 0.0,
        tolerance: DEFAULT_RANK_TOLERANCE,
    })
}

fn weighted_least_squares(a: &DMatrix<f64>, y: &[f64], weights: &[f64]) -> Option<DVector<f64>> {
    let sw: Vec<f64> = weights.iter().map(|w| w.sqrt()).collect();
    let b = DMatrix::from_fn(a.nrows(), a.ncols(), |r, c| a[(r, c)] * sw[r]);
    let z: Vec<f64> = y.iter().zip(&sw).map(|(v, s)| v * s).collect();
    least_squares(&b, &z).ok().filter(|t| t.iter().all(|v| v.is_finite()))
}

struct IrlsRun {
    theta: DVector<f64>,
    objective: f64,
    iterations: usize,
}

/// IRLS with backtracking along the reweighted step; falls back to
/// subgradient descent if the line search stalls before convergence.
fn irls(a: &DMatrix<f64>, y: &[f64], p: f64, start: DVector<f64>, tol: f64) -> IrlsRun {
    let mut theta = start;
    let mut f = lp_objective(a, y, &theta, p);
    let floor = tol * 1e-3;
    let mut stalled = false;
    let mut iterations = 0;

    while iterations < IRLS_MAX_ITERS && f > 0.0 {
        iterations += 1;
        let r = residual(a, y, &theta);
        let weights: Vec<f64> = r.iter().map(|v| v.abs().max(IRLS_SMOOTHING).powf(p - 2.0)).collect();
        let Some(target) = weighted_least_squares(a, y, &weights) else {
            stalled = true;
            break;
        };
        let dir = target - &theta;
        let mut alpha = 1.0;
        let mut accepted = None;
        while alpha > 1e-12 {
            let cand = &theta + &dir * alpha;
            let fc = lp_objective(a, y, &cand, p);
            if fc <= f {
                accepted = Some((cand, fc));
                break;
            }
            alpha *= 0.5;
        }
        match accepted {
            Some((cand, fc)) => {
                let decrease = (f - fc) / f.max(f64::MIN_POSITIVE);
                theta = cand;
                f = fc;
                if decrease <= floor {
                    break;
                }
            }
            None => {
                stalled = true;
                break;
            }
        }
    }

    if stalled && f > 0.0 {
        let (t, fs) = subgradient_polish(a, y, p, theta.clone(), f);
        if fs < f {
            theta = t;
            f = fs;
        }
    }
    IrlsRun {
        theta,
        objective: f,
        iterations,
    }
}

fn subgradient_polish(a: &DMatrix<f64>, y: &[f64], p: f64, start: DVector<f64>, f0: f64) -> (DVector<f64>, f64) {
    let mut theta = start.clone();
    let mut best = (start, f0);
    let step0 = 0.1 * (theta.norm() + 1.0);
    for k in 0..2000 {
        let r = residual(a, y, &theta);
        let g_r: Vec<f64> = r
            .iter()
            .map(|v| p * v.abs().powf(p - 1.0) * v.signum() * if *v == 0.0 { 0.0 } else { 1.0 })
            .collect();
        let g = a.tr_mul(&DVector::from_vec(g_r));
        let gn = g.norm();
        if gn == 0.0 {
            break;
        }
        theta -= g * (step0 / ((k + 1) as f64).sqrt() / gn);
        let f = lp_objective(a, y, &theta, p);
        if f < best.1 {
            best = (theta.clone(), f);
        }
    }
    best
}

/// Minimizes `||A theta - y||_p` for `p >= 1`.
///
/// `p = 2` is solved in closed form. Other exponents run IRLS from the
/// least-squares point and from four seeded perturbations of it; the best
/// objective is returned, and the run fails with [`Error::NotConverged`] if
/// the starts disagree by more than a relative `tol`.
pub fn solve_lp_regression(a: &RealMatrix, y: &[f64], p: f64, tol: f64) -> Result<Vec<f64>> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(invalid(format!("p must be at least 1, got {p}")));
    }
    if !(tol > 0.0) {
        return Err(invalid("tolerance must be positive"));
    }
    if y.len() != a.nrows() {
        return Err(Error::MismatchedLengths {
            expected: a.nrows(),
            got: y.len(),
        });
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(invalid("labels must be finite"));
    }
    a.ensure_full_column_rank(DEFAULT_RANK_TOLERANCE)?;
    let am = a.as_dmatrix();
    let ls = least_squares(am, y)?;
    if p == 2.0 {
        return Ok(ls.iter().copied().collect());
    }

    let scale = ls.norm() + 1.0;
    let mut starts = vec![ls.clone()];
    let mut rng = SeededRng::new(IRLS_SEED);
    for _ in 1..IRLS_RESTARTS {
        let noise = DVector::from_vec(rng.normal_vec(am.ncols()));
        starts.push(&ls + noise * (0.5 * scale));
    }
    let runs: Vec<IrlsRun> = starts.into_par_iter().map(|s| irls(am, y, p, s, tol)).collect();
    let best = runs
        .iter()
        .min_by(|x, y| x.objective.total_cmp(&y.objective))
        .expect("at least one start");
    let worst = runs.iter().map(|r| r.objective).fold(0.0, f64::max);
    let slack = 1e-12 * pow_norm(y, p).max(1.0);
    if worst > (1.0 + tol) * best.objective + slack {
        return Err(Error::NotConverged {
            iterations: runs.iter().map(|r| r.iterations).max().unwrap_or(0),
            residual: (worst - best.objective) / best.objective.max(f64::MIN_POSITIVE),
        });
    }
    Ok(best.theta.iter().copied().collect())
}

// ---------------------------------------------------------------------------
// Single-neuron problem
// ---------------------------------------------------------------------------

/// Sampled single-neuron regression problem.
///
/// The objective is `||S f(A theta) - S y||_p^p` where `S = diag(scales)`
/// acts on the selected rows `features` / `labels`; the activation is applied
/// before the row scaling.
#[derive(Debug, Clone)]
pub struct NeuronProblem {
    pub features: RealMatrix,
    pub labels: Vec<f64>,
    pub scales: Vec<f64>,
    pub activation: Activation,
    pub p: f64,
    pub epsilon: f64,
    pub constrained: bool,
}

impl NeuronProblem {
    /// Problem with unit row scales.
    pub fn new(
        features: RealMatrix,
        labels: Vec<f64>,
        activation: Activation,
        p: f64,
        epsilon: f64,
        constrained: bool,
    ) -> Result<Self> {
        let scales = vec![1.0; features.nrows()];
        let prob = Self {
            features,
            labels,
            scales,
            activation,
            p,
            epsilon,
            constrained,
        };
        prob.validate()?;
        Ok(prob)
    }

    /// Selects and scales the rows of `(a, y)` named by `s`.
    pub fn from_sampling(
        s: &SamplingMatrix,
        a: &RealMatrix,
        y: &[f64],
        activation: Activation,
        epsilon: f64,
        constrained: bool,
    ) -> Result<Self> {
        if a.nrows() != s.n_source || y.len() != s.n_source {
            return Err(Error::MismatchedLengths {
                expected: s.n_source,
                got: a.nrows().min(y.len()),
            });
        }
        if s.is_empty() {
            return Err(invalid("sampling matrix selects no rows"));
        }
        let am = a.as_dmatrix();
        let features = RealMatrix::from_fn(s.len(), a.ncols(), |r, c| am[(s.rows[r].source, c)])?;
        let labels = s.rows.iter().map(|r| y[r.source]).collect();
        let scales = s.rows.iter().map(|r| r.scale).collect();
        let prob = Self {
            features,
            labels,
            scales,
            activation,
            p: s.p,
            epsilon,
            constrained,
        };
        prob.validate()?;
        Ok(prob)
    }

    pub fn with_scales(mut self, scales: Vec<f64>) -> Result<Self> {
        self.scales = scales;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.features.nrows();
        for len in [self.labels.len(), self.scales.len()] {
            if len != n {
                return Err(Error::MismatchedLengths { expected: n, got: len });
            }
        }
        if !(self.p >= 1.0 && self.p.is_finite()) {
            return Err(invalid(format!("p must be at least 1, got {}", self.p)));
        }
        if self.labels.iter().any(|v| !v.is_finite()) {
            return Err(invalid("labels must be finite"));
        }
        if self.scales.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(invalid("row scales must be positive and finite"));
        }
        if self.constrained && !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(invalid(format!("epsilon must lie in (0, 1), got {}", self.epsilon)));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    fn row_weights(&self) -> Vec<f64> {
        self.scales.iter().map(|s| s.powf(self.p)).collect()
    }

    /// `||S A theta||_p^p`.
    pub fn constraint_lhs(&self, theta: &[f64]) -> f64 {
        let z = self.features.mul_vec(theta);
        z.iter()
            .zip(&self.scales)
            .map(|(v, s)| (s * v).abs().powf(self.p))
            .sum()
    }

    /// `||S y||_p^p / (eps L^p)`.
    pub fn constraint_rhs(&self) -> f64 {
        let sy: f64 = self
            .labels
            .iter()
            .zip(&self.scales)
            .map(|(v, s)| (s * v).abs().powf(self.p))
            .sum();
        sy / (self.epsilon * self.activation.lipschitz().powf(self.p))
    }

    /// `||S f(A theta) - S y||_p^p`.
    pub fn loss(&self, theta: &[f64]) -> f64 {
        let z = self.features.mul_vec(theta);
        z.iter()
            .zip(&self.labels)
            .zip(&self.scales)
            .map(|((zi, yi), s)| (s * (self.activation.apply(*zi) - yi)).abs().powf(self.p))
            .sum()
    }

    /// Gradient of [`NeuronProblem::loss`].
    pub fn gradient(&self, theta: &[f64]) -> Vec<f64> {
        let z = self.features.mul_vec(theta);
        let weights = self.row_weights();
        let coeff: Vec<f64> = z
            .iter()
            .zip(&self.labels)
            .zip(&weights)
            .map(|((zi, yi), w)| {
                let r = self.activation.apply(*zi) - yi;
                w * self.p * r.abs().powf(self.p - 1.0) * sign(r) * self.activation.derivative(*zi)
            })
            .collect();
        let g = self.features.as_dmatrix().tr_mul(&DVector::from_vec(coeff));
        g.iter().copied().collect()
    }
}

#[inline]
fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Fitted parameters of a single-neuron solve.
#[derive(Debug, Clone, PartialEq)]
pub struct NeuronSolution {
    pub theta: Vec<f64>,
    pub loss: f64,
    pub constraint_lhs: f64,
    pub constraint_rhs: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Loss after every accepted step of the winning start.
    pub trace: Vec<f64>,
}

impl NeuronSolution {
    pub fn is_feasible(&self) -> bool {
        self.constraint_lhs <= self.constraint_rhs * (1.0 + 1e-8)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Number of starts: the origin, the linear fit, then Gaussian starts.
    pub starts: usize,
    pub max_iters: usize,
    /// Relative loss decrease below which a start stops.
    pub ftol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            starts: 5,
            max_iters: 500,
            ftol: 1e-12,
        }
    }
}

/// Solves the (optionally constrained) single-neuron problem with the
/// default [`SolverOptions`].
pub fn solve_constrained_neuron(prob: &NeuronProblem, seed: u64) -> Result<NeuronSolution> {
    solve_constrained_neuron_with(prob, seed, &SolverOptions::default())
}

/// Projected descent with backtracking from several seeded starts.
///
/// Each step moves along a reweighted Gauss-Newton direction (the negative
/// gradient when that is not a descent direction), radially rescales into
/// the constraint set `{theta : ||S A theta||_p^p <= ||S y||_p^p / (eps L^p)}`
/// and is accepted only if the loss does not increase.
pub fn solve_constrained_neuron_with(prob: &NeuronProblem, seed: u64, opts: &SolverOptions) -> Result<NeuronSolution> {
    prob.validate()?;
    if opts.starts == 0 || opts.max_iters == 0 {
        return Err(invalid("solver needs at least one start and one iteration"));
    }
    let d = prob.dim();
    let rhs = if prob.constrained { prob.constraint_rhs() } else { f64::INFINITY };

    if prob.constrained && rhs == 0.0 {
        // E = {0} when S y vanishes.
        let theta = vec![0.0; d];
        return Ok(NeuronSolution {
            loss: prob.loss(&theta),
            constraint_lhs: 0.0,
            constraint_rhs: 0.0,
            theta,
            converged: true,
            iterations: 0,
            trace: Vec::new(),
        });
    }

    let linear_fit = scaled_linear_fit(prob);

    if prob.activation == Activation::Identity {
        if let Some(fit) = &linear_fit {
            let lhs = prob.constraint_lhs(fit);
            if !prob.constrained || lhs <= rhs {
                return Ok(finish(prob, fit.clone(), rhs, true, 0, vec![prob.loss(fit)]));
            }
        }
    }

    let starts = start_points(prob, linear_fit, rhs, seed, opts.starts);
    let runs: Vec<Descent> = starts
        .into_par_iter()
        .map(|s| projected_descent(prob, s, rhs, opts))
        .collect();
    let best = runs
        .into_iter()
        .enumerate()
        .min_by(|(i, a), (j, b)| a.loss.total_cmp(&b.loss).then(i.cmp(j)))
        .map(|(_, r)| r)
        .expect("at least one start");
    Ok(finish(prob, best.theta, rhs, best.converged, best.iterations, best.trace))
}

fn finish(prob: &NeuronProblem, theta: Vec<f64>, rhs: f64, converged: bool, iterations: usize, trace: Vec<f64>) -> NeuronSolution {
    NeuronSolution {
        loss: prob.loss(&theta),
        constraint_lhs: prob.constraint_lhs(&theta),
        constraint_rhs: if rhs.is_finite() { rhs } else { prob.constraint_rhs_or_inf() },
        theta,
        converged,
        iterations,
        trace,
    }
}

impl NeuronProblem {
    fn constraint_rhs_or_inf(&self) -> f64 {
        if self.epsilon > 0.0 {
            self.constraint_rhs()
        } else {
            f64::INFINITY
        }
    }
}

/// ℓp fit of `S y` on `S A` (linear model); `None` when `S A` is rank deficient.
fn scaled_linear_fit(prob: &NeuronProblem) -> Option<Vec<f64>> {
    let fm = prob.features.as_dmatrix();
    let sa = RealMatrix::from_fn(fm.nrows(), fm.ncols(), |r, c| prob.scales[r] * fm[(r, c)]).ok()?;
    let sy: Vec<f64> = prob.labels.iter().zip(&prob.scales).map(|(y, s)| y * s).collect();
    solve_lp_regression(&sa, &sy, prob.p, 1e-10).ok()
}

fn start_points(prob: &NeuronProblem, linear_fit: Option<Vec<f64>>, rhs: f64, seed: u64, count: usize) -> Vec<Vec<f64>> {
    let d = prob.dim();
    let mut starts = vec![vec![0.0; d]];
    if let Some(fit) = linear_fit {
        starts.push(fit);
    }
    let target = if rhs.is_finite() {
        0.5 * rhs
    } else {
        prob.labels
            .iter()
            .zip(&prob.scales)
            .map(|(v, s)| (s * v).abs().powf(prob.p))
            .sum::<f64>()
    };
    let mut stream = 0;
    while starts.len() < count {
        stream += 1;
        let mut rng = SeededRng::with_stream(seed, stream);
        let u = rng.normal_vec(d);
        let lhs = prob.constraint_lhs(&u);
        let factor = if lhs > 0.0 && target > 0.0 {
            (target / lhs).powf(1.0 / prob.p)
        } else {
            1.0
        };
        starts.push(u.into_iter().map(|v| v * factor).collect());
    }
    starts.truncate(count);
    starts
}

/// Radial rescaling into the constraint set; exact because the constraint
/// is absolutely homogeneous of degree p.
fn project(prob: &NeuronProblem, theta: &mut [f64], rhs: f64) {
    if !rhs.is_finite() {
        return;
    }
    let mut lhs = prob.constraint_lhs(theta);
    if lhs <= rhs {
        return;
    }
    let mut factor = (rhs / lhs).powf(1.0 / prob.p);
    for _ in 0..8 {
        for v in theta.iter_mut() {
            *v *= factor;
        }
        lhs = prob.constraint_lhs(theta);
        if lhs <= rhs {
            return;
        }
        factor = 1.0 - 1e-12;
    }
}

struct Descent {
    theta: Vec<f64>,
    loss: f64,
    converged: bool,
    iterations: usize,
    trace: Vec<f64>,
}

fn projected_descent(prob: &NeuronProblem, start: Vec<f64>, rhs: f64, opts: &SolverOptions) -> Descent {
    let mut theta = start;
    project(prob, &mut theta, rhs);
    let mut loss = prob.loss(&theta);
    let mut trace = vec![loss];
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iters {
        if loss == 0.0 {
            converged = true;
            break;
        }
        iterations += 1;
        let grad = prob.gradient(&theta);
        if grad.iter().all(|g| *g == 0.0) {
            converged = true;
            break;
        }
        let mut directions = Vec::with_capacity(2);
        if let Some(gn) = gauss_newton_direction(prob, &theta) {
            if dot(&gn, &grad) < 0.0 {
                directions.push(gn);
            }
        }
        directions.push(grad.iter().map(|g| -g).collect());

        let mut step = None;
        for dir in &directions {
            if let Some(found) = line_search(prob, &theta, loss, &grad, dir, rhs) {
                step = Some(found);
                break;
            }
        }
        let Some((cand, cand_loss)) = step else {
            converged = true;
            break;
        };
        let decrease = (loss - cand_loss) / loss;
        theta = cand;
        loss = cand_loss;
        trace.push(loss);
        if decrease <= opts.ftol {
            converged = true;
            break;
        }
    }
    Descent {
        theta,
        loss,
        converged,
        iterations,
        trace,
    }
}

fn line_search(
    prob: &NeuronProblem,
    theta: &[f64],
    loss: f64,
    grad: &[f64],
    dir: &[f64],
    rhs: f64,
) -> Option<(Vec<f64>, f64)> {
    let mut alpha = if dir_is_gradient(grad, dir) {
        // Scale the raw gradient step to a relative move of order one.
        let tn = norm(theta).max(1.0);
        tn / norm(dir).max(f64::MIN_POSITIVE)
    } else {
        1.0
    };
    for _ in 0..60 {
        let mut cand: Vec<f64> = theta.iter().zip(dir).map(|(t, d)| t + alpha * d).collect();
        project(prob, &mut cand, rhs);
        let cand_loss = prob.loss(&cand);
        let moved: Vec<f64> = cand.iter().zip(theta).map(|(c, t)| c - t).collect();
        let predicted = dot(grad, &moved);
        if cand_loss.is_finite() && cand_loss < loss && cand_loss <= loss + 1e-4 * predicted.min(0.0) {
            return Some((cand, cand_loss));
        }
        alpha *= 0.5;
    }
    None
}

fn dir_is_gradient(grad: &[f64], dir: &[f64]) -> bool {
    grad.iter().zip(dir).all(|(g, d)| *d == -*g)
}

/// Reweighted Gauss-Newton step: minimizes
/// `sum_i c_i max(|r_i|, delta)^{p-2} (r_i + J_i step)^2` with a small ridge.
fn gauss_newton_direction(prob: &NeuronProblem, theta: &[f64]) -> Option<Vec<f64>> {
    let fm = prob.features.as_dmatrix();
    let (n, d) = fm.shape();
    let z = prob.features.mul_vec(theta);
    let mut jac = DMatrix::zeros(n, d);
    let mut rw = DVector::zeros(n);
    let mut sw = vec![0.0; n];
    for i in 0..n {
        let r = prob.activation.apply(z[i]) - prob.labels[i];
        let w = prob.scales[i].powf(prob.p) * r.abs().max(IRLS_SMOOTHING).powf(prob.p - 2.0);
        let s = w.sqrt();
        sw[i] = s;
        let deriv = prob.activation.derivative(z[i]);
        for c in 0..d {
            jac[(i, c)] = s * deriv * fm[(i, c)];
        }
        rw[i] = s * r;
    }
    let mut h = jac.tr_mul(&jac);
    let ridge = 1e-10 * (h.trace() / d as f64).max(1e-300);
    for c in 0..d {
        h[(c, c)] += ridge;
    }
    let rhs = -jac.tr_mul(&rw);
    let step = h.cholesky()?.solve(&rhs);
    step.iter().all(|v| v.is_finite()).then(|| step.iter().copied().collect())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Ratio `||f(A theta_tilde) - y||_p^p / (||f(A theta*) - y||_p^p + eps L^p ||A theta*||_p^p)`.
///
/// Returns 0 when numerator and denominator both vanish and `+inf` when only
/// the denominator does.
pub fn evaluate_guarantee(
    a: &RealMatrix,
    y: &[f64],
    theta_tilde: &[f64],
    theta_star: &[f64],
    f: Activation,
    p: f64,
    eps: f64,
) -> f64 {
    let loss = |theta: &[f64]| -> f64 {
        let z = a.mul_vec(theta);
        z.iter().zip(y).map(|(zi, yi)| (f.apply(*zi) - yi).abs().powf(p)).sum()
    };
    let numerator = loss(theta_tilde);
    let opt = loss(theta_star);
    let reg = eps * f.lipschitz().powf(p) * pow_norm(&a.mul_vec(theta_star), p);
    let denominator = opt + reg;
    if denominator == 0.0 {
        if numerator == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        numerator / denominator
    }
}
