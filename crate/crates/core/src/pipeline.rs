//! End-to-end one-shot selection: weights per representation, the shared
//! max-weight distribution, label queries and per-model solves.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::error::{invalid, Error, Result};
use crate::lewis::{lewis_weights, LewisConfig, WeightVector};
use crate::matrix::RealMatrix;
use crate::regression::{solve_constrained_neuron_with, Activation, NeuronProblem, NeuronSolution, SolverOptions};
use crate::sampling::{
    bernoulli_sampling_matrix, build_sampling_matrix, default_draw_cap, draw_until_distinct, elementwise_max,
    max_weight_distribution, QueryPlan, SampledRow, SamplingMatrix,
};

/// Labeled and unlabeled feature matrices for `k` representations of the
/// same instances. Column counts may differ between representations.
#[derive(Debug, Clone)]
pub struct MultiRepDataset {
    labeled: Vec<RealMatrix>,
    labels: Vec<f64>,
    unlabeled: Vec<RealMatrix>,
}

impl MultiRepDataset {
    /// `labeled` is either empty (no initial labels) or holds one matrix per
    /// representation, row-aligned with `labels`.
    pub fn new(labeled: Vec<RealMatrix>, labels: Vec<f64>, unlabeled: Vec<RealMatrix>) -> Result<Self> {
        let first = unlabeled
            .first()
            .ok_or_else(|| invalid("at least one representation is required"))?;
        let n_u = first.nrows();
        for u in &unlabeled {
            if u.nrows() != n_u {
                return Err(Error::MismatchedLengths {
                    expected: n_u,
                    got: u.nrows(),
                });
            }
        }
        if labeled.is_empty() {
            if !labels.is_empty() {
                return Err(invalid("labels given without labeled feature matrices"));
            }
        } else {
            if labeled.len() != unlabeled.len() {
                return Err(Error::MismatchedLengths {
                    expected: unlabeled.len(),
                    got: labeled.len(),
                });
            }
            for (l, u) in labeled.iter().zip(&unlabeled) {
                if l.nrows() != labels.len() {
                    return Err(Error::MismatchedLengths {
                        expected: labels.len(),
                        got: l.nrows(),
                    });
                }
                if l.ncols() != u.ncols() {
                    return Err(Error::MismatchedLengths {
                        expected: u.ncols(),
                        got: l.ncols(),
                    });
                }
            }
        }
        if labels.iter().any(|v| !v.is_finite()) {
            return Err(invalid("labels must be finite"));
        }
        Ok(Self {
            labeled,
            labels,
            unlabeled,
        })
    }

    /// Dataset without an initial labeled set.
    pub fn unlabeled_only(unlabeled: Vec<RealMatrix>) -> Result<Self> {
        Self::new(Vec::new(), Vec::new(), unlabeled)
    }

    pub fn k(&self) -> usize {
        self.unlabeled.len()
    }

    pub fn n_l(&self) -> usize {
        self.labels.len()
    }

    pub fn n_u(&self) -> usize {
        self.unlabeled[0].nrows()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.unlabeled.iter().map(RealMatrix::ncols).collect()
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn unlabeled(&self) -> &[RealMatrix] {
        &self.unlabeled
    }

    pub fn labeled(&self) -> &[RealMatrix] {
        &self.labeled
    }

    /// `[L^j; U^j]`.
    pub fn full_matrix(&self, j: usize) -> Result<RealMatrix> {
        match self.labeled.get(j) {
            Some(l) => l.vstack(&self.unlabeled[j]),
            None => Ok(self.unlabeled[j].clone()),
        }
    }
}

/// Source of labels for unlabeled indices. Asking for the same index twice
/// counts as a single query.
pub trait LabelOracle {
    fn query(&mut self, index: usize) -> Result<f64>;

    /// Number of distinct indices queried so far.
    fn query_count(&self) -> usize;

    /// Queries in the order they were first made, as `(index, label)`.
    fn audit_log(&self) -> &[(usize, f64)];
}

#[derive(Debug, Default)]
struct QueryBook {
    answered: HashMap<usize, f64>,
    log: Vec<(usize, f64)>,
}

impl QueryBook {
    fn get_or_insert(&mut self, index: usize, fetch: impl FnOnce() -> Result<f64>) -> Result<f64> {
        if let Some(v) = self.answered.get(&index) {
            return Ok(*v);
        }
        let v = fetch()?;
        self.answered.insert(index, v);
        self.log.push((index, v));
        Ok(v)
    }
}

/// Oracle backed by an in-memory label vector.
#[derive(Debug)]
pub struct VecOracle {
    labels: Vec<f64>,
    book: QueryBook,
}

impl VecOracle {
    pub fn new(labels: Vec<f64>) -> Self {
        Self {
            labels,
            book: QueryBook::default(),
        }
    }
}

impl LabelOracle for VecOracle {
    fn query(&mut self, index: usize) -> Result<f64> {
        let labels = &self.labels;
        self.book.get_or_insert(index, || {
            labels.get(index).copied().ok_or(Error::IndexOutOfRange {
                index,
                len: labels.len(),
            })
        })
    }

    fn query_count(&self) -> usize {
        self.book.log.len()
    }

    fn audit_log(&self) -> &[(usize, f64)] {
        &self.book.log
    }
}

/// Oracle reading one label per line from a text file, only as far as the
/// largest index requested so far.
#[derive(Debug)]
pub struct FileOracle {
    path: PathBuf,
    reader: BufReader<File>,
    cache: Vec<f64>,
    exhausted: bool,
    book: QueryBook,
}

impl FileOracle {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let file = File::open(&path).map_err(|e| Error::Oracle(format!("{}: {e}", path.display())))?;
        Ok(Self {
            path,
            reader: BufReader::new(file),
            cache: Vec::new(),
            exhausted: false,
            book: QueryBook::default(),
        })
    }

    fn fill_to(&mut self, index: usize) -> Result<f64> {
        let mut line = String::new();
        while self.cache.len() <= index && !self.exhausted {
            line.clear();
            let read = self
                .reader
                .read_line(&mut line)
                .map_err(|e| Error::Oracle(format!("{}: {e}", self.path.display())))?;
            if read == 0 {
                self.exhausted = true;
                break;
            }
            let text = line.trim();
            if text.is_empty() {
                continue;
            }
            let v: f64 = text.parse().map_err(|_| {
                Error::Oracle(format!(
                    "{}: line {}: `{text}` is not a number",
                    self.path.display(),
                    self.cache.len() + 1
                ))
            })?;
            self.cache.push(v);
        }
        self.cache.get(index).copied().ok_or_else(|| {
            Error::Oracle(format!(
                "{}: no label for index {index} ({} labels)",
                self.path.display(),
                self.cache.len()
            ))
        })
    }
}

impl LabelOracle for FileOracle {
    fn query(&mut self, index: usize) -> Result<f64> {
        if let Some(v) = self.book.answered.get(&index) {
            return Ok(*v);
        }
        let v = self.fill_to(index)?;
        self.book.get_or_insert(index, || Ok(v))
    }

    fn query_count(&self) -> usize {
        self.book.log.len()
    }

    fn audit_log(&self) -> &[(usize, f64)] {
        &self.book.log
    }
}

/// How unlabeled rows are selected.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scheme {
    /// i.i.d. draws until `tau` distinct rows are seen.
    Iid,
    /// Independent coin flips with probability `min(beta * max_j w_i^j, 1)`.
    Bernoulli { beta: f64 },
}

#[derive(Debug, Clone)]
pub struct OneShotParams {
    pub tau: usize,
    pub epsilon: f64,
    pub activation: Activation,
    pub lewis: LewisConfig,
    pub seed: u64,
    pub constrained: bool,
    pub scheme: Scheme,
    /// Draw cap for [`Scheme::Iid`]; defaults to `50 tau ceil(ln(tau + 1))`.
    pub m_cap: Option<usize>,
    pub solver: SolverOptions,
}

impl OneShotParams {
    pub fn new(tau: usize, epsilon: f64, p: f64, activation: Activation, seed: u64) -> Self {
        Self {
            tau,
            epsilon,
            activation,
            lewis: LewisConfig::new(p),
            seed,
            constrained: true,
            scheme: Scheme::Iid,
            m_cap: None,
            solver: SolverOptions::default(),
        }
    }

    pub fn p(&self) -> f64 {
        self.lewis.p
    }
}

#[derive(Debug, Clone)]
pub struct PipelineResult {
    pub solutions: Vec<NeuronSolution>,
    pub plan: QueryPlan,
    pub sampling: SamplingMatrix,
    /// `T = sum_i max_j w_i(U^j)`.
    pub total_mass: f64,
    pub queries_used: usize,
    pub weights: Vec<WeightVector>,
    /// Labels of `[L; U]` with queried entries filled in; unqueried unlabeled
    /// entries are `NaN`.
    pub known_labels: Vec<f64>,
}

/// Lewis weights of every `U^j`, computed in parallel.
pub fn representation_weights(unlabeled: &[RealMatrix], cfg: &LewisConfig) -> Result<Vec<WeightVector>> {
    unlabeled.par_iter().map(|u| lewis_weights(u, cfg)).collect()
}

/// Rows chosen for labeling, before any label is read.
#[derive(Debug, Clone)]
pub struct Selection {
    pub weights: Vec<WeightVector>,
    /// `T`, the sum of the elementwise-max weights.
    pub total_mass: f64,
    pub plan: QueryPlan,
    pub sampling: SamplingMatrix,
}

/// Computes weights for every representation and draws the shared plan.
pub fn select_rows(data: &MultiRepDataset, params: &OneShotParams) -> Result<Selection> {
    let n_u = data.n_u();
    let n_l = data.n_l();
    let p = params.p();
    if params.scheme == Scheme::Iid && (params.tau == 0 || params.tau > n_u) {
        return Err(Error::QueryBudgetInfeasible { tau: params.tau, n_u });
    }
    if params.constrained && !(params.epsilon > 0.0 && params.epsilon < 1.0) {
        return Err(invalid(format!("epsilon must lie in (0, 1), got {}", params.epsilon)));
    }

    let weights = representation_weights(data.unlabeled(), &params.lewis)?;
    let (dist, total_mass) = max_weight_distribution(&weights)?;

    let (plan, sampling) = match params.scheme {
        Scheme::Iid => {
            let cap = params.m_cap.unwrap_or_else(|| default_draw_cap(params.tau));
            let plan = draw_until_distinct(&dist, params.tau, params.seed, cap)?;
            let s = build_sampling_matrix(&plan, &dist, n_l, p)?;
            (plan, s)
        }
        Scheme::Bernoulli { beta } => {
            let max = WeightVector::new(elementwise_max(&weights)?, p)?;
            let coin = bernoulli_sampling_matrix(&max, beta, p, params.seed)?;
            let draws: Vec<usize> = coin.rows.iter().map(|r| r.source).collect();
            let mut rows: Vec<SampledRow> = (0..n_l).map(|source| SampledRow { source, scale: 1.0 }).collect();
            rows.extend(coin.rows.iter().map(|r| SampledRow {
                source: n_l + r.source,
                scale: r.scale,
            }));
            let plan = QueryPlan {
                distinct: draws.clone(),
                draws,
                seed: params.seed,
            };
            let s = SamplingMatrix {
                rows,
                n_source: n_l + n_u,
                p,
            };
            (plan, s)
        }
    };
    Ok(Selection {
        weights,
        total_mass,
        plan,
        sampling,
    })
}

/// Runs the full selection and fitting procedure.
///
/// Exactly `tau` distinct unlabeled rows are queried under [`Scheme::Iid`].
/// All models share the one sampling matrix, with the labeled rows at scale 1
/// ahead of the sampled rows.
pub fn run_one_shot(data: &MultiRepDataset, oracle: &mut dyn LabelOracle, params: &OneShotParams) -> Result<PipelineResult> {
    let n_l = data.n_l();
    let Selection {
        weights,
        total_mass,
        plan,
        sampling,
    } = select_rows(data, params)?;

    let before = oracle.query_count();
    let mut known_labels = data.labels().to_vec();
    known_labels.resize(n_l + data.n_u(), f64::NAN);
    for &q in &plan.distinct {
        known_labels[n_l + q] = oracle.query(q)?;
    }
    let queries_used = oracle.query_count() - before;

    let solutions = solve_on_plan(data, &sampling, &known_labels, params)?;
    Ok(PipelineResult {
        solutions,
        plan,
        sampling,
        total_mass,
        queries_used,
        weights,
        known_labels,
    })
}

/// Fits every representation on the rows selected by `sampling`.
///
/// `labels` covers `[L; U]`; only selected entries are read, so further
/// output dimensions can reuse the same plan with their own label vectors.
pub fn solve_on_plan(
    data: &MultiRepDataset,
    sampling: &SamplingMatrix,
    labels: &[f64],
    params: &OneShotParams,
) -> Result<Vec<NeuronSolution>> {
    if sampling.is_empty() {
        return Err(invalid("no rows were selected"));
    }
    if sampling.rows.iter().any(|r| !labels.get(r.source).is_some_and(|v| v.is_finite())) {
        return Err(invalid("a selected row has no label"));
    }
    let filled: Vec<f64> = labels.iter().map(|v| if v.is_finite() { *v } else { 0.0 }).collect();
    (0..data.k())
        .into_par_iter()
        .map(|j| {
            let a = data.full_matrix(j)?;
            let prob = NeuronProblem::from_sampling(
                sampling,
                &a,
                &filled,
                params.activation,
                params.epsilon,
                params.constrained,
            )?;
            solve_constrained_neuron_with(&prob, params.seed, &params.solver)
        })
        .collect()
}
