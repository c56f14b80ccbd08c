//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::fs;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use maxlewis::diagnostics::{
    class_imbalance, coverage_kappa, curve_csv, max_weight_sum_curve, synthetic_backbones,
};
use maxlewis::io::{write_matrix, MatrixFormat};
use maxlewis::lewis::lewis_weights_detailed;
use maxlewis::matrix::pow_norm;
use maxlewis::oracle::{brute_force_opt, exact_distortion_p2, monte_carlo_distortion, BRUTE_FORCE_RESTARTS};
use maxlewis::pipeline::{run_one_shot, VecOracle};
use maxlewis::sampling::{build_sampling_matrix, draw_iid};
use maxlewis::{
    evaluate_guarantee, leverage_scores, lewis_weights, max_weight_distribution, sample_size_bound,
    verify_fixed_point, Activation, Error, LewisConfig, MultiRepDataset, OneShotParams, RealMatrix,
    SamplingDistribution, SeededRng, WeightVector,
};

type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

struct Outcome {
    pass: bool,
    detail: String,
}

fn gaussian(n: usize, d: usize, rng: &mut SeededRng) -> RealMatrix {
    RealMatrix::from_fn(n, d, |_, _| rng.normal()).unwrap()
}

fn within(elapsed: Duration, limit_secs: u64) -> bool {
    elapsed <= Duration::from_secs(limit_secs)
}

/// Lewis weights at p = 2 agree with leverage scores.
fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for seed in 0..50 {
        let a = gaussian(200, 10, &mut SeededRng::new(1000 + seed));
        let w = lewis_weights(&a, &LewisConfig::new(2.0)).unwrap();
        let lev = leverage_scores(&a).unwrap();
        for (x, y) in w.as_slice().iter().zip(lev.as_slice()) {
            worst = worst.max((x - y).abs());
        }
    }
    let t = start.elapsed();
    Outcome {
        pass: worst <= 1e-8 && within(t, 5),
        detail: format!("max |w - lev| = {worst:.3e} over 50 matrices, {:.2?}", t),
    }
}

/// Fixed-point certification across p, and the damped p = 4 path.
fn criterion_2() -> Outcome {
    let start = Instant::now();
    let d = 10.0;
    let mut worst_res: f64 = 0.0;
    let mut worst_sum: f64 = 0.0;
    let mut ok = true;
    for (pi, p) in [1.0, 1.5, 2.0, 3.0].into_iter().enumerate() {
        for seed in 0..10u64 {
            let a = gaussian(200, 10, &mut SeededRng::new(2000 + 100 * pi as u64 + seed));
            match lewis_weights(&a, &LewisConfig::new(p)) {
                Ok(w) => {
                    let r = verify_fixed_point(&a, &w, p).unwrap();
                    worst_res = worst_res.max(r);
                    worst_sum = worst_sum.max((w.sum() - d).abs());
                }
                Err(_) => ok = false,
            }
        }
    }
    ok &= worst_res <= 1e-6 && worst_sum <= 1e-6 * d;

    let mut p4 = Vec::new();
    for seed in 0..10u64 {
        let a = gaussian(200, 10, &mut SeededRng::new(2900 + seed));
        match lewis_weights_detailed(&a, &LewisConfig::new(4.0)) {
            Ok(out) => {
                let r = verify_fixed_point(&a, &out.weights, 4.0).unwrap();
                ok &= r <= 1e-4;
                p4.push(format!("{r:.1e}"));
            }
            Err(Error::NotConverged { .. }) => p4.push("NotConverged".into()),
            Err(_) => ok = false,
        }
    }
    let t = start.elapsed();
    Outcome {
        pass: ok && within(t, 30),
        detail: format!(
            "p in {{1,1.5,2,3}}: max residual {worst_res:.2e}, max |sum-d| {worst_sum:.2e}; p=4 residuals [{}]; {:.2?}",
            p4.join(" "),
            t
        ),
    }
}

/// Leverage-score sampling is a 1/2-subspace embedding in at least 95 of 100 seeds.
fn criterion_3() -> Outcome {
    let start = Instant::now();
    let (n, d) = (2000, 20);
    let a = gaussian(n, d, &mut SeededRng::new(3));
    let lev = leverage_scores(&a).unwrap();
    let dist = SamplingDistribution::from_masses(lev.as_slice()).unwrap();
    let m = (40.0 * d as f64 * (d as f64).ln()).ceil() as usize;
    let mut good = 0;
    let mut worst: f64 = 0.0;
    for seed in 0..100 {
        let plan = draw_iid(&dist, m, seed);
        let s = build_sampling_matrix(&plan, &dist, 0, 2.0).unwrap();
        let eps = exact_distortion_p2(&a, &s).unwrap().epsilon_hat;
        worst = worst.max(eps);
        if eps <= 0.5 {
            good += 1;
        }
    }
    let t = start.elapsed();
    Outcome {
        pass: good >= 95 && within(t, 120),
        detail: format!("m = {m}: {good}/100 seeds with distortion <= 0.5 (worst {worst:.3}), {:.2?}", t),
    }
}

/// The sampled p-th power norm is unbiased.
fn criterion_4() -> Outcome {
    let start = Instant::now();
    let n = 500;
    let mut rng = SeededRng::new(4);
    let x: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
    // A fixed, deliberately mismatched distribution.
    let masses: Vec<f64> = x.iter().map(|v| 1.0 + v.abs()).collect();
    let dist = SamplingDistribution::from_masses(&masses).unwrap();
    let mut ok = true;
    let mut parts = Vec::new();
    for p in [1.0, 2.0] {
        let full = pow_norm(&x, p);
        let trials = 10_000;
        let mut acc = 0.0;
        for t in 0..trials {
            let plan = draw_iid(&dist, 100, 40_000 + t);
            let s = build_sampling_matrix(&plan, &dist, 0, p).unwrap();
            acc += pow_norm(&s.apply(&x).unwrap(), p);
        }
        let bias = (acc / trials as f64 / full - 1.0).abs();
        ok &= bias <= 0.02;
        parts.push(format!("p={p}: |mean ratio - 1| = {bias:.4}"));
    }
    let t = start.elapsed();
    Outcome {
        pass: ok && within(t, 60),
        detail: format!("{}, {:.2?}", parts.join(", "), t),
    }
}

/// Planted relu labels with 5% noise: `y = relu(A theta) + sigma * N(0, 1)`
/// with `sigma = 0.05 * rms(relu(A theta))`.
fn noisy_relu_labels(a: &RealMatrix, theta: &[f64], rng: &mut SeededRng) -> Vec<f64> {
    let clean: Vec<f64> = a.mul_vec(theta).iter().map(|v| v.max(0.0)).collect();
    let rms = (clean.iter().map(|v| v * v).sum::<f64>() / clean.len() as f64).sqrt();
    clean.iter().map(|v| v + 0.05 * rms * rng.normal()).collect()
}

const GUARANTEE_EPS: f64 = 0.25;
const GUARANTEE_C: f64 = 0.007;
const GUARANTEE_LIMIT: f64 = 10.0;

/// Budget from the sample-size bound for the given weights.
fn budget(weights: &[WeightVector], d: usize, n_u: usize) -> (usize, f64) {
    let (_, total) = max_weight_distribution(weights).unwrap();
    let tau = sample_size_bound(d, 2.0, GUARANTEE_EPS, total, GUARANTEE_C).unwrap() as usize;
    (tau.min(n_u), total)
}

/// One run of the pipeline; returns, per model, the guarantee ratio and the
/// plain excess-loss ratio `loss(theta_tilde) / OPT` for reference.
fn guarantee_run(data: &MultiRepDataset, y: &[f64], tau: usize, seed: u64) -> Vec<(f64, f64)> {
    let params = OneShotParams::new(tau, GUARANTEE_EPS, 2.0, Activation::Relu, seed);
    let mut oracle = VecOracle::new(y.to_vec());
    let result = run_one_shot(data, &mut oracle, &params).unwrap();
    assert_eq!(result.queries_used, tau);
    (0..data.k())
        .map(|j| {
            let a = &data.unlabeled()[j];
            let (theta_star, opt) =
                brute_force_opt(a, y, Activation::Relu, 2.0, BRUTE_FORCE_RESTARTS, 0xACCE55 + seed).unwrap();
            let theta = &result.solutions[j].theta;
            let loss: f64 = a
                .mul_vec(theta)
                .iter()
                .zip(y)
                .map(|(z, t)| (z.max(0.0) - t).powi(2))
                .sum();
            let ratio = evaluate_guarantee(a, y, theta, &theta_star, Activation::Relu, 2.0, GUARANTEE_EPS);
            (ratio, loss / opt)
        })
        .collect()
}

fn criterion_5() -> Outcome {
    let start = Instant::now();
    let (n, d) = (2000, 10);
    let mut good = 0;
    let mut worst: f64 = 0.0;
    let mut worst_excess: f64 = 0.0;
    let mut taus = Vec::new();
    for seed in 0..20u64 {
        let mut rng = SeededRng::new(5000 + seed);
        let a = gaussian(n, d, &mut rng);
        let theta = rng.normal_vec(d);
        let y = noisy_relu_labels(&a, &theta, &mut rng);
        let w = lewis_weights(&a, &LewisConfig::new(2.0)).unwrap();
        let (tau, _) = budget(&[w], d, n);
        taus.push(tau);
        let data = MultiRepDataset::unlabeled_only(vec![a]).unwrap();
        let (ratio, excess) = guarantee_run(&data, &y, tau, seed)[0];
        worst = worst.max(ratio);
        worst_excess = worst_excess.max(excess);
        if ratio <= GUARANTEE_LIMIT {
            good += 1;
        }
    }
    let t = start.elapsed();
    let tau_max = *taus.iter().max().unwrap();
    Outcome {
        pass: good >= 18 && tau_max <= 600 && within(t, 300),
        detail: format!(
            "tau <= {tau_max}: {good}/20 runs with ratio <= {GUARANTEE_LIMIT} (worst {worst:.4}; worst loss/OPT {worst_excess:.3}), {:.2?}",
            t
        ),
    }
}

fn criterion_6() -> Outcome {
    let start = Instant::now();
    let (n, d, k) = (2000, 10, 5);
    let mut good = 0;
    let mut worst: f64 = 0.0;
    let mut worst_excess: f64 = 0.0;
    let mut tau_seen = 0;
    for seed in 0..20u64 {
        let reps = synthetic_backbones(n, d, k, 0.95, 6000 + seed).unwrap();
        let mut rng = SeededRng::with_stream(6000 + seed, 99);
        let theta = rng.normal_vec(d);
        let y = noisy_relu_labels(&reps[0], &theta, &mut rng);
        let weights: Vec<WeightVector> = reps
            .iter()
            .map(|a| lewis_weights(a, &LewisConfig::new(2.0)).unwrap())
            .collect();
        let (tau, _) = budget(&weights, d, n);
        tau_seen = tau_seen.max(tau);
        let data = MultiRepDataset::unlabeled_only(reps).unwrap();
        let ratios = guarantee_run(&data, &y, tau, seed);
        worst = ratios.iter().map(|r| r.0).fold(worst, f64::max);
        worst_excess = ratios.iter().map(|r| r.1).fold(worst_excess, f64::max);
        if ratios.iter().all(|r| r.0 <= GUARANTEE_LIMIT) {
            good += 1;
        }
    }
    let t = start.elapsed();
    Outcome {
        pass: good >= 18 && within(t, 600),
        detail: format!(
            "k = {k}, tau <= {tau_seen}: {good}/20 seeds with every model ratio <= {GUARANTEE_LIMIT} (worst {worst:.4}; worst loss/OPT {worst_excess:.3}), {:.2?}",
            t
        ),
    }
}

fn criterion_7(out: &Path) -> Outcome {
    let start = Instant::now();
    let (n, d, k) = (4000, 16, 50);
    let reps = synthetic_backbones(n, d, k, 0.9, 7).unwrap();
    let weights: Vec<WeightVector> = reps.iter().map(|a| leverage_scores(a).unwrap()).collect();
    let curve = max_weight_sum_curve(&weights, n).unwrap();
    let t1 = curve[0].total;
    let t50 = curve[k - 1].total;
    let ub = curve[k - 1].upper_bound;
    let path = out.join("curve_k50.csv");
    let written = fs::write(&path, curve_csv(&curve)).is_ok();
    let t = start.elapsed();
    Outcome {
        pass: t50 <= 3.0 * t1 && ub == 800.0 && (ub - 50.0 * t1).abs() < 1e-6 && written && within(t, 120),
        detail: format!(
            "T(1) = {t1:.4}, T(50) = {t50:.4} ({:.2}x), upper_bound(50) = {ub}; curve at {}; {:.2?}",
            t50 / t1,
            path.display(),
            t
        ),
    }
}

fn criterion_8() -> Outcome {
    let mut ok = true;
    let mut notes = Vec::new();
    let mut families = 0;
    for (seed, corr) in [(80u64, 0.0), (81, 0.5), (82, 0.9), (83, 1.0)] {
        let reps = synthetic_backbones(300, 6, 8, corr, seed).unwrap();
        let ws: Vec<WeightVector> = reps.iter().map(|a| leverage_scores(a).unwrap()).collect();
        let kappa_full = coverage_kappa(&ws, 100.0).unwrap();
        ok &= kappa_full == 1.0;
        let curve = max_weight_sum_curve(&ws, 300).unwrap();
        for (i, pt) in curve.iter().enumerate() {
            ok &= pt.total <= ((i + 1) * 6).min(300) as f64 + 1e-9;
            if i > 0 {
                ok &= pt.total >= curve[i - 1].total;
            }
        }
        let same = vec![ws[0].clone(); 4];
        for t in [10.0, 30.0, 50.0] {
            ok &= coverage_kappa(&same, t).unwrap() == 1.0;
        }
        families += 1;
    }
    notes.push(format!("{families} families: kappa(100) = 1, identical kappa = 1, T monotone and bounded"));
    let imb = class_imbalance(&["a", "a", "a", "b"], None).unwrap();
    ok &= imb == 3.0;
    notes.push(format!("imbalance {{3,1}} = {imb}"));
    Outcome {
        pass: ok,
        detail: notes.join("; "),
    }
}

fn read_dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

fn criterion_9(work: &Path) -> Outcome {
    let mut rng = SeededRng::new(9);
    let (n, d) = (300, 5);
    let a = gaussian(n, d, &mut rng);
    let b = RealMatrix::from_fn(n, d, |i, j| a.get(i, j).tanh() + 0.1 * (i as f64 * 0.37 + j as f64).sin()).unwrap();
    let theta = rng.normal_vec(d);
    let y = noisy_relu_labels(&a, &theta, &mut rng);
    let labels: String = y.iter().map(|v| format!("{v}\n")).collect();
    fs::write(work.join("labels.csv"), labels).unwrap();
    for (name, m) in [("a", &a), ("b", &b)] {
        write_matrix(work.join(format!("{name}.csv")), m, MatrixFormat::Csv).unwrap();
        write_matrix(work.join(format!("{name}.bin")), m, MatrixFormat::Binary).unwrap();
    }
    let conf = |ext: &str| {
        format!(
            "seed = 99\np = 2\nepsilon = 0.5\ntau = 40\nactivation = relu\nunlabeled = a.{ext}, b.{ext}\noracle_labels = labels.csv\nreport_guarantee = true\noracle_restarts = 8\n"
        )
    };
    fs::write(work.join("csv.conf"), conf("csv")).unwrap();
    fs::write(work.join("bin.conf"), conf("bin")).unwrap();

    let run = |conf: &str, out: &str| -> bool {
        Command::new(env!("CARGO_BIN_EXE_maxlewis"))
            .args(["pipeline", "--config"])
            .arg(work.join(conf))
            .arg("--out-dir")
            .arg(work.join(out))
            .output()
            .map(|o| o.status.success())
            .unwrap_or(false)
    };
    let ran = run("csv.conf", "run1") && run("csv.conf", "run2") && run("bin.conf", "run3");
    if !ran {
        return Outcome {
            pass: false,
            detail: "pipeline command failed".into(),
        };
    }
    let r1 = read_dir_bytes(&work.join("run1"));
    let r2 = read_dir_bytes(&work.join("run2"));
    let r3 = read_dir_bytes(&work.join("run3"));
    Outcome {
        pass: r1 == r2 && r1 == r3 && r1.len() >= 5,
        detail: format!(
            "{} output files; rerun identical: {}; binary input identical: {}",
            r1.len(),
            r1 == r2,
            r1 == r3
        ),
    }
}

fn criterion_10() -> Outcome {
    let mut worst_gap = f64::NEG_INFINITY;
    let mut ok = true;
    for seed in 0..100u64 {
        let mut rng = SeededRng::new(10_000 + seed);
        let n = 40 + (seed as usize % 5) * 20;
        let d = 2 + seed as usize % 4;
        let a = gaussian(n, d, &mut rng);
        let masses: Vec<f64> = (0..n).map(|_| rng.uniform() + 0.05).collect();
        let dist = SamplingDistribution::from_masses(&masses).unwrap();
        let plan = draw_iid(&dist, 3 * d + seed as usize % 30, seed);
        let s = build_sampling_matrix(&plan, &dist, 0, 2.0).unwrap();
        let exact = exact_distortion_p2(&a, &s).unwrap().epsilon_hat;
        let mc = monte_carlo_distortion(&a, &s, 2.0, 500, seed).unwrap().epsilon_hat;
        worst_gap = worst_gap.max(mc - exact);
        ok &= mc <= exact + 1e-9;
    }
    Outcome {
        pass: ok,
        detail: format!("100 pairs, max (monte carlo - exact) = {worst_gap:.3e}"),
    }
}

fn main() -> ExitCode {
    let work = tempfile::tempdir().expect("temporary directory");
    let out = Path::new(env!("CARGO_TARGET_TMPDIR"));
    let criteria: Vec<Criterion> = vec![
        ("lewis weights equal leverage scores at p=2", Box::new(criterion_1)),
        ("fixed-point certification for general p", Box::new(criterion_2)),
        ("subspace embedding at p=2", Box::new(criterion_3)),
        ("unbiased sampled norms", Box::new(criterion_4)),
        ("guarantee ratio, single relu model", Box::new(criterion_5)),
        ("guarantee ratio, five models sharing one plan", Box::new(criterion_6)),
        ("sum of max weights grows slowly", Box::new(move || criterion_7(out))),
        ("diagnostics exactness", Box::new(criterion_8)),
        ("pipeline determinism", Box::new(|| criterion_9(work.path()))),
        ("monte carlo distortion never exceeds exact", Box::new(criterion_10)),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let id = (i + 1).to_string();
        if !filter.is_empty() && !filter.contains(&id) {
            continue;
        }
        let o = run();
        println!(
            "criterion {id:>2} {}: {name}: {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
        if !o.pass {
            failed += 1;
        }
    }
    if failed == 0 {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failed} criteria failed");
        ExitCode::FAILURE
    }
}
