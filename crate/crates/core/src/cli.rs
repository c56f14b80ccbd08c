//! Command-line front end.
//!
//! Exit codes: 0 success, 1 a verification check failed, 2 invalid input or
//! arguments, 3 an iteration did not converge, 4 file I/O or parse failure.
//! Every output file is written through a temporary file and renamed, so a
//! failed run leaves no partial outputs behind.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::RunConfig;
use crate::diagnostics::{class_imbalance, coverage_kappa, curve_csv, kappa_csv, max_weight_sum_curve};
use crate::error::{invalid, Error, Result};
use crate::io::{read_matrix, read_tokens, read_vector, write_atomic, MatrixFormat};
use crate::lewis::{lewis_weights_detailed, verify_fixed_point};
use crate::matrix::RealMatrix;
use crate::oracle::{brute_force_opt, exact_distortion_p2, monte_carlo_distortion};
use crate::pipeline::{run_one_shot, select_rows, FileOracle, MultiRepDataset, PipelineResult, VecOracle};
use crate::regression::evaluate_guarantee;
use crate::sampling::sample_size_bound;

pub const EXIT_OK: u8 = 0;
pub const EXIT_CHECK_FAILED: u8 = 1;
pub const EXIT_INVALID: u8 = 2;
pub const EXIT_NOT_CONVERGED: u8 = 3;
pub const EXIT_IO: u8 = 4;

/// Fixed-point residual accepted by `verify`.
pub const RESIDUAL_THRESHOLD: f64 = 1e-6;

#[derive(Debug, Parser)]
#[command(name = "maxlewis", version, about = "One-shot active label selection by maximum Lewis weights")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Lewis weights of each input matrix.
    Weights(CommonArgs),
    /// Draw a shared query plan and write the sampled matrices.
    Sample(CommonArgs),
    /// Select, query and fit every model.
    Pipeline(CommonArgs),
    /// Check fixed-point residuals, embedding distortion and guarantee ratios.
    Verify(VerifyArgs),
    /// Sum-of-max-weights curve, coverage table and class imbalance.
    Diagnose(CommonArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// Feature matrix file (CSV or binary); repeat for several representations.
    #[arg(long)]
    pub input: Vec<PathBuf>,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub tau: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Encoding for matrix outputs.
    #[arg(long)]
    pub format: Option<MatrixFormat>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Comma-separated seed sweep; one CSV row per seed.
    #[arg(long, value_delimiter = ',')]
    pub seeds: Vec<u64>,
}

pub fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Io { .. } | Error::Parse { .. } | Error::Oracle(_) => EXIT_IO,
        Error::NotConverged { .. } | Error::CapExceeded { .. } => EXIT_NOT_CONVERGED,
        _ => EXIT_INVALID,
    }
}

/// Runs a parsed command. `Ok` carries the exit code (0, or 1 when a
/// verification check fails); errors map through [`exit_code`].
pub fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Weights(a) => cmd_weights(&a),
        Command::Sample(a) => cmd_sample(&a),
        Command::Pipeline(a) => cmd_pipeline(&a),
        Command::Verify(a) => cmd_verify(&a),
        Command::Diagnose(a) => cmd_diagnose(&a),
    }
}

/// Config file (if any) with command-line flags layered on top.
fn resolve_config(args: &CommonArgs) -> Result<RunConfig> {
    let mut cfg = match &args.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if !args.input.is_empty() {
        cfg.unlabeled = args.input.clone();
    }
    if let Some(p) = args.p {
        cfg.p = p;
    }
    if let Some(e) = args.epsilon {
        cfg.epsilon = e;
    }
    if let Some(t) = args.tau {
        cfg.tau = Some(t);
    }
    if let Some(s) = args.seed {
        cfg.seed = Some(s);
    }
    if let Some(d) = &args.out_dir {
        cfg.out_dir = Some(d.clone());
    }
    if let Some(f) = args.format {
        cfg.format = f;
    }
    cfg.validate()?;
    if cfg.unlabeled.is_empty() {
        return Err(invalid("no input matrices (use --input or `unlabeled` in the config)"));
    }
    Ok(cfg)
}

fn out_dir(cfg: &RunConfig) -> Result<PathBuf> {
    let dir = cfg.out_dir.clone().unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir).map_err(|e| Error::Io {
        path: dir.display().to_string(),
        message: e.to_string(),
    })?;
    Ok(dir)
}

/// Writes every `(name, contents)` pair only after all of them were produced.
fn write_all(dir: &Path, files: &[(String, Vec<u8>)]) -> Result<()> {
    for (name, contents) in files {
        write_atomic(dir.join(name), contents)?;
    }
    Ok(())
}

fn read_all(paths: &[PathBuf]) -> Result<Vec<RealMatrix>> {
    paths.iter().map(read_matrix).collect()
}

fn load_dataset(cfg: &RunConfig) -> Result<MultiRepDataset> {
    let unlabeled = read_all(&cfg.unlabeled)?;
    match &cfg.labeled_labels {
        Some(labels) => MultiRepDataset::new(read_all(&cfg.labeled)?, read_vector(labels)?, unlabeled),
        None => MultiRepDataset::unlabeled_only(unlabeled),
    }
}

/// The configured budget, or the sample-size bound capped at the pool size.
fn resolve_tau(cfg: &RunConfig, data: &MultiRepDataset) -> Result<usize> {
    if let Some(t) = cfg.tau {
        return Ok(t);
    }
    let weights = crate::pipeline::representation_weights(data.unlabeled(), &cfg.lewis())?;
    let (_, total) = crate::sampling::max_weight_distribution(&weights)?;
    let d = data.dims().into_iter().max().unwrap_or(1);
    let bound = sample_size_bound(d, cfg.p, cfg.epsilon, total, cfg.constant_c)?;
    Ok((bound.min(data.n_u() as u64) as usize).max(1))
}

fn weight_file(w: &[f64], residual: f64) -> Vec<u8> {
    let mut s = String::from("index,weight\n");
    for (i, v) in w.iter().enumerate() {
        let _ = writeln!(s, "{i},{v}");
    }
    let sum: f64 = w.iter().sum();
    let min = w.iter().copied().fold(f64::INFINITY, f64::min);
    let max = w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let _ = writeln!(s, "# sum={sum},min={min},max={max},residual={residual}");
    s.into_bytes()
}

fn indexed_name(stem: &str, j: usize, k: usize, ext: &str) -> String {
    if k == 1 {
        format!("{stem}.{ext}")
    } else {
        format!("{stem}_{j}.{ext}")
    }
}

fn cmd_weights(args: &CommonArgs) -> Result<u8> {
    let cfg = resolve_config(args)?;
    let mats = read_all(&cfg.unlabeled)?;
    let lewis = cfg.lewis();
    let k = mats.len();
    let mut files = Vec::with_capacity(k);
    for (j, a) in mats.iter().enumerate() {
        let outcome = lewis_weights_detailed(a, &lewis)?;
        let residual = verify_fixed_point(a, &outcome.weights, cfg.p)?;
        println!(
            "{}: n={} d={} sum={} residual={} iterations={}",
            cfg.unlabeled[j].display(),
            a.nrows(),
            a.ncols(),
            outcome.weights.sum(),
            residual,
            outcome.iterations
        );
        files.push((indexed_name("weights", j, k, "csv"), weight_file(outcome.weights.as_slice(), residual)));
    }
    write_all(&out_dir(&cfg)?, &files)?;
    Ok(EXIT_OK)
}

fn plan_csv(draws: &[usize]) -> Vec<u8> {
    let mut s = String::from("draw_order,index\n");
    for (i, q) in draws.iter().enumerate() {
        let _ = writeln!(s, "{i},{q}");
    }
    s.into_bytes()
}

fn cmd_sample(args: &CommonArgs) -> Result<u8> {
    let cfg = resolve_config(args)?;
    let seed = cfg.require_seed()?;
    let data = load_dataset(&cfg)?;
    let tau = resolve_tau(&cfg, &data)?;
    let sel = select_rows(&data, &cfg.params(tau, seed))?;
    println!(
        "T={} tau={} draws={} selected={}",
        sel.total_mass,
        tau,
        sel.plan.m(),
        sel.sampling.len()
    );

    let mut selection = String::from("row,source,scale\n");
    for (i, r) in sel.sampling.rows.iter().enumerate() {
        let _ = writeln!(selection, "{i},{},{}", r.source, r.scale);
    }
    let mut files = vec![
        ("plan.csv".to_string(), plan_csv(&sel.plan.draws)),
        ("selection.csv".to_string(), selection.into_bytes()),
    ];
    let k = data.k();
    for j in 0..k {
        let sa = sel.sampling.apply_matrix(&data.full_matrix(j)?)?;
        files.push((
            indexed_name("sampled", j, k, cfg.format.extension()),
            crate::io::encode_matrix(&sa, cfg.format),
        ));
    }
    write_all(&out_dir(&cfg)?, &files)?;
    Ok(EXIT_OK)
}

/// Full label vector over `[L; U]`, read eagerly for reporting.
fn full_labels(cfg: &RunConfig, data: &MultiRepDataset) -> Result<Vec<f64>> {
    let path = cfg
        .oracle_labels
        .as_ref()
        .ok_or_else(|| invalid("`oracle_labels` is required"))?;
    let pool = read_vector(path)?;
    if pool.len() != data.n_u() {
        return Err(Error::MismatchedLengths {
            expected: data.n_u(),
            got: pool.len(),
        });
    }
    let mut y = data.labels().to_vec();
    y.extend(pool);
    Ok(y)
}

/// Per-model `(full_loss, opt, ratio)` against the brute-force optimum.
fn guarantee_rows(cfg: &RunConfig, data: &MultiRepDataset, result: &PipelineResult, y: &[f64], seed: u64) -> Result<Vec<(f64, f64, f64)>> {
    (0..data.k())
        .map(|j| {
            let a = data.full_matrix(j)?;
            let (theta_star, opt) = brute_force_opt(&a, y, cfg.activation, cfg.p, cfg.oracle_restarts, seed)?;
            let theta = &result.solutions[j].theta;
            let full: f64 = a
                .mul_vec(theta)
                .iter()
                .zip(y)
                .map(|(z, t)| (cfg.activation.apply(*z) - t).abs().powf(cfg.p))
                .sum();
            let ratio = evaluate_guarantee(&a, y, theta, &theta_star, cfg.activation, cfg.p, cfg.epsilon);
            Ok((full, opt, ratio))
        })
        .collect()
}

fn cmd_pipeline(args: &CommonArgs) -> Result<u8> {
    let cfg = resolve_config(args)?;
    let seed = cfg.require_seed()?;
    let data = load_dataset(&cfg)?;
    let tau = resolve_tau(&cfg, &data)?;
    let params = cfg.params(tau, seed);
    let oracle_path = cfg
        .oracle_labels
        .as_ref()
        .ok_or_else(|| invalid("`oracle_labels` is required for the pipeline"))?;
    let mut oracle = FileOracle::open(oracle_path)?;
    let result = run_one_shot(&data, &mut oracle, &params)?;
    let report = if cfg.report_guarantee {
        let y = full_labels(&cfg, &data)?;
        Some(guarantee_rows(&cfg, &data, &result, &y, seed)?)
    } else {
        None
    };

    let mut audit = String::from("index,label\n");
    for (i, v) in crate::pipeline::LabelOracle::audit_log(&oracle) {
        let _ = writeln!(audit, "{i},{v}");
    }
    let mut files = vec![
        ("plan.csv".to_string(), plan_csv(&result.plan.draws)),
        ("audit.csv".to_string(), audit.into_bytes()),
    ];
    let k = data.k();
    let mut guarantee =
        String::from("model,converged,feasible,sampled_loss,constraint_lhs,constraint_rhs,full_loss,opt,ratio\n");
    for (j, sol) in result.solutions.iter().enumerate() {
        let mut theta = String::from("index,value\n");
        for (i, v) in sol.theta.iter().enumerate() {
            let _ = writeln!(theta, "{i},{v}");
        }
        files.push((format!("theta_{j}.csv"), theta.into_bytes()));
        let tail = match &report {
            Some(rows) => format!("{},{},{}", rows[j].0, rows[j].1, rows[j].2),
            None => ",,".to_string(),
        };
        let _ = writeln!(
            guarantee,
            "{j},{},{},{},{},{},{tail}",
            sol.converged,
            sol.is_feasible(),
            sol.loss,
            sol.constraint_lhs,
            sol.constraint_rhs
        );
    }
    files.push(("guarantee.csv".to_string(), guarantee.into_bytes()));
    println!(
        "k={k} T={} tau={tau} queries={} draws={}",
        result.total_mass,
        result.queries_used,
        result.plan.m()
    );
    write_all(&out_dir(&cfg)?, &files)?;
    Ok(EXIT_OK)
}

struct SeedReport {
    seed: u64,
    residual: f64,
    distortion: f64,
    ratio: Option<f64>,
}

fn verify_seed(cfg: &RunConfig, data: &MultiRepDataset, tau: usize, labels: Option<&[f64]>, seed: u64) -> Result<SeedReport> {
    let params = cfg.params(tau, seed);
    let sel = select_rows(data, &params)?;
    let mut residual: f64 = 0.0;
    for (u, w) in data.unlabeled().iter().zip(&sel.weights) {
        residual = residual.max(verify_fixed_point(u, w, cfg.p)?);
    }
    let mut distortion: f64 = 0.0;
    for j in 0..data.k() {
        let a = data.full_matrix(j)?;
        let report = if cfg.p == 2.0 {
            exact_distortion_p2(&a, &sel.sampling)?
        } else {
            monte_carlo_distortion(&a, &sel.sampling, cfg.p, cfg.distortion_trials, seed)?
        };
        distortion = distortion.max(report.epsilon_hat);
    }
    let ratio = match labels {
        Some(y) => {
            let n_l = data.n_l();
            let pool = y[n_l..].to_vec();
            let mut oracle = VecOracle::new(pool);
            let result = run_one_shot(data, &mut oracle, &params)?;
            let rows = guarantee_rows(cfg, data, &result, y, seed)?;
            Some(rows.iter().map(|r| r.2).fold(0.0, f64::max))
        }
        None => None,
    };
    Ok(SeedReport {
        seed,
        residual,
        distortion,
        ratio,
    })
}

fn cmd_verify(args: &VerifyArgs) -> Result<u8> {
    let mut cfg = resolve_config(&args.common)?;
    if !args.seeds.is_empty() {
        cfg.seeds = args.seeds.clone();
    }
    let seeds = cfg.verify_seeds()?;
    let data = load_dataset(&cfg)?;
    let tau = resolve_tau(&cfg, &data)?;
    let labels = if cfg.report_guarantee {
        Some(full_labels(&cfg, &data)?)
    } else {
        None
    };

    let mut csv = String::from("seed,fixed_point_residual,distortion,guarantee_ratio,pass\n");
    let mut all_pass = true;
    println!("{:<8} {:<22} {:>14} {:>10}  result", "seed", "check", "value", "threshold");
    for seed in seeds {
        let r = verify_seed(&cfg, &data, tau, labels.as_deref(), seed)?;
        let mut checks = vec![
            ("fixed_point_residual", r.residual, RESIDUAL_THRESHOLD),
            ("distortion", r.distortion, cfg.distortion_threshold),
        ];
        if let Some(ratio) = r.ratio {
            checks.push(("guarantee_ratio", ratio, cfg.guarantee_threshold));
        }
        let mut seed_pass = true;
        for (name, value, threshold) in checks {
            let ok = value <= threshold;
            seed_pass &= ok;
            println!(
                "{:<8} {:<22} {:>14.6e} {:>10}  {}",
                r.seed,
                name,
                value,
                threshold,
                if ok { "PASS" } else { "FAIL" }
            );
        }
        all_pass &= seed_pass;
        let ratio = r.ratio.map(|v| v.to_string()).unwrap_or_default();
        let _ = writeln!(csv, "{},{},{},{ratio},{seed_pass}", r.seed, r.residual, r.distortion);
    }
    write_all(&out_dir(&cfg)?, &[("verify.csv".to_string(), csv.into_bytes())])?;
    Ok(if all_pass { EXIT_OK } else { EXIT_CHECK_FAILED })
}

fn cmd_diagnose(args: &CommonArgs) -> Result<u8> {
    let cfg = resolve_config(args)?;
    let mats = read_all(&cfg.unlabeled)?;
    let n = mats[0].nrows();
    let weights = crate::pipeline::representation_weights(&mats, &cfg.lewis())?;
    let curve = max_weight_sum_curve(&weights, n)?;
    let kappa = cfg
        .t_values
        .iter()
        .map(|&t| Ok((t, coverage_kappa(&weights, t)?)))
        .collect::<Result<Vec<_>>>()?;
    let mut files = vec![
        ("curve.csv".to_string(), curve_csv(&curve).into_bytes()),
        ("kappa.csv".to_string(), kappa_csv(&kappa).into_bytes()),
    ];
    if let Some(last) = curve.last() {
        println!("T({})={} upper_bound={}", last.k, last.total, last.upper_bound);
    }
    if let Some(path) = &cfg.class_labels {
        let labels = read_tokens(path)?;
        let ratio = class_imbalance(&labels, None)?;
        println!("imbalance={ratio}");
        files.push(("imbalance.csv".to_string(), format!("imbalance\n{ratio}\n").into_bytes()));
    }
    write_all(&out_dir(&cfg)?, &files)?;
    Ok(EXIT_OK)
}
