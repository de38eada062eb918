//! Acceptance checks, one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary (`harness = false`) so the lines always reach the
//! terminal. Criterion 7 needs real scenes in `$ESMLR_DATA_DIR`
//! (`indian_pines.bsq` with `indian_pines_gt.labels`, and `pavia.bsq` with
//! `pavia_gt.labels`, each with its JSON sidecar) and reports SKIP without
//! them.

use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use esmlr::emaps::{area_thickening, area_thinning, Connectivity, GrayImage};
use esmlr::esmlr::{
    lorsal_train, log_likelihood, log_likelihood_gradient, map_objective, mlr_posteriors,
    one_hot_targets, ridge_dual, ridge_init, ridge_primal, LorsalConfig, Regressor, RidgeConfig,
};
use esmlr::evaluation::{aa, kappa, oa, ConfusionMatrix};
use esmlr::experiment::{cmd_experiment, prepare, run_trials_on, ExperimentConfig};

enum Outcome {
    Pass(String),
    Fail(String),
    Skip(String),
}

type Check = fn() -> Outcome;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

fn rand_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize, scale: f64) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.random_range(-scale..scale))
}

fn rand_labels(rng: &mut ChaCha8Rng, n: usize, m: usize) -> Vec<usize> {
    // every class appears at least once when n >= m
    (0..n).map(|j| if j < m { j + 1 } else { rng.random_range(1..=m) }).collect()
}

/// Gaussian elimination with partial pivoting on `a x = b`.
fn gauss_solve(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let (mut a, mut b) = (a.clone(), b.clone());
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[(i, col)].abs().total_cmp(&a[(j, col)].abs()))
            .unwrap();
        a.swap_rows(col, piv);
        b.swap_rows(col, piv);
        for r in col + 1..n {
            let f = a[(r, col)] / a[(col, col)];
            for c in col..n {
                a[(r, c)] -= f * a[(col, c)];
            }
            for c in 0..b.ncols() {
                b[(r, c)] -= f * b[(col, c)];
            }
        }
    }
    let mut x = DMatrix::zeros(n, b.ncols());
    for c in 0..b.ncols() {
        for r in (0..n).rev() {
            let s: f64 = (r + 1..n).map(|k| a[(r, k)] * x[(k, c)]).sum();
            x[(r, c)] = (b[(r, c)] - s) / a[(r, r)];
        }
    }
    x
}

fn ridge_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut worst, mut worst_pd) = (0.0f64, 0.0f64);
    for _ in 0..50 {
        let l = rng.random_range(1..=20);
        let n = rng.random_range(2..=30);
        let m = rng.random_range(2..=5).min(n);
        let c = 2f64.powi(rng.random_range(0..=10));
        let h = rand_matrix(&mut rng, l, n, 1.0);
        let y = one_hot_targets(&rand_labels(&mut rng, n, m), m).unwrap();
        let cfg = RidgeConfig { c };
        // Y Hᵀ (H Hᵀ + I/C)⁻¹ through the transposed normal equations
        let mut a = &h * h.transpose();
        for i in 0..l {
            a[(i, i)] += 1.0 / c;
        }
        let oracle = gauss_solve(&a, &(&h * y.y.transpose())).transpose();
        let w = ridge_init(&h, &y, &cfg).unwrap().w;
        worst = worst.max((&w - &oracle).norm() / oracle.norm().max(1e-300));
        let p = ridge_primal(&h, &y, &cfg).unwrap().w;
        let d = ridge_dual(&h, &y, &cfg).unwrap().w;
        worst_pd = worst_pd.max((&p - &d).norm() / p.norm().max(1e-300));
    }
    let secs = start.elapsed().as_secs_f64();
    check(
        worst < 1e-8 && worst_pd < 1e-8 && secs < 1.0,
        format!("max rel err {worst:.2e}, primal/dual {worst_pd:.2e}, {secs:.3} s"),
    )
}

fn gradient_check() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let step = 1e-5;
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let m = rng.random_range(2..=5);
        let l = rng.random_range(1..=8);
        let n = rng.random_range(m..=20);
        let h = rand_matrix(&mut rng, l, n, 1.0);
        let labels = rand_labels(&mut rng, n, m);
        let w = Regressor { w: rand_matrix(&mut rng, m - 1, l, 1.0) };
        let g = log_likelihood_gradient(&w, &h, &labels).unwrap();
        let mut fd = DMatrix::zeros(m - 1, l);
        for i in 0..m - 1 {
            for j in 0..l {
                let mut plus = w.clone();
                plus.w[(i, j)] += step;
                let mut minus = w.clone();
                minus.w[(i, j)] -= step;
                fd[(i, j)] = (log_likelihood(&plus, &h, &labels).unwrap()
                    - log_likelihood(&minus, &h, &labels).unwrap())
                    / (2.0 * step);
            }
        }
        worst = worst.max((&g - &fd).norm() / g.norm().max(1e-12));
    }
    check(worst < 1e-5, format!("max rel err {worst:.2e} over 20 instances"))
}

fn solver_monotonicity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (m, l, n) = (4, 25, 60);
    let labels = rand_labels(&mut rng, n, m);
    let mut h = rand_matrix(&mut rng, l, n, 1.0);
    for j in 0..n {
        h[(0, j)] = 1.0;
        h[(labels[j], j)] += 1.0; // class signal on rows 1..=M
    }
    let w0 = Regressor::zeros(m, l);

    let cfg = LorsalConfig::from_exponent(-6);
    let fit = lorsal_train(&h, &labels, &w0, &cfg).unwrap();
    let drops = fit
        .objective_history
        .windows(2)
        .filter(|w| w[1] < w[0] - 1e-9)
        .count();
    let final_obj = map_objective(&fit.regressor, &h, &labels, cfg.lambda).unwrap();
    let consistent = (final_obj - fit.objective_history.last().unwrap()).abs() < 1e-9;

    let nnz: Vec<usize> = (-15..=0)
        .step_by(3)
        .map(|b| {
            lorsal_train(&h, &labels, &w0, &LorsalConfig::from_exponent(b))
                .unwrap()
                .regressor
                .nnz()
        })
        .collect();
    let sparse_ok = nnz.windows(2).all(|w| w[1] <= w[0]);
    check(
        drops == 0 && consistent && sparse_ok,
        format!(
            "{} accepted steps, {drops} decreases; nnz over b=-15..0 step 3: {nnz:?}",
            fit.iterations
        ),
    )
}

/// Keep upper level sets whose connected components reach `lambda` pixels.
fn brute_thinning(levels: &[u8], h: usize, w: usize, lambda: usize, eight: bool) -> Vec<u8> {
    let n = levels.len();
    let mut out = vec![0u8; n];
    let max = levels.iter().copied().max().unwrap_or(0);
    for t in 1..=max {
        let mut seen = vec![false; n];
        for s in 0..n {
            if seen[s] || levels[s] < t {
                continue;
            }
            let mut comp = vec![s];
            seen[s] = true;
            let mut i = 0;
            while i < comp.len() {
                let (r, c) = ((comp[i] / w) as isize, (comp[i] % w) as isize);
                for dr in -1isize..=1 {
                    for dc in -1isize..=1 {
                        if (dr == 0 && dc == 0) || (!eight && dr != 0 && dc != 0) {
                            continue;
                        }
                        let (rr, cc) = (r + dr, c + dc);
                        if rr < 0 || cc < 0 || rr >= h as isize || cc >= w as isize {
                            continue;
                        }
                        let q = rr as usize * w + cc as usize;
                        if !seen[q] && levels[q] >= t {
                            seen[q] = true;
                            comp.push(q);
                        }
                    }
                }
                i += 1;
            }
            if comp.len() >= lambda {
                for &p in &comp {
                    out[p] = t;
                }
            }
        }
    }
    out
}

fn morphology_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut mismatches = 0;
    let small = 10_000;
    for i in 0..small {
        let levels: Vec<u8> = (0..36).map(|_| rng.random_range(0..3)).collect();
        let img = GrayImage::new(6, 6, levels.clone()).unwrap();
        let lambda = rng.random_range(1..=36);
        let eight = i % 2 == 1;
        let conn = if eight { Connectivity::Eight } else { Connectivity::Four };
        if area_thinning(&img, lambda, conn).levels != brute_thinning(&levels, 6, 6, lambda, eight) {
            mismatches += 1;
        }
    }

    let mut property_failures = 0;
    for _ in 0..1_000 {
        let levels: Vec<u8> = (0..256).map(|_| rng.random::<u8>()).collect();
        let img = GrayImage::new(16, 16, levels.clone()).unwrap();
        let lambda = rng.random_range(2..=64);
        let conn = Connectivity::Four;
        let thin = area_thinning(&img, lambda, conn);
        let thick = area_thickening(&img, lambda, conn);
        let idempotent = area_thinning(&thin, lambda, conn) == thin
            && area_thickening(&thick, lambda, conn) == thick;
        let anti_extensive = thin.levels.iter().zip(&levels).all(|(a, b)| a <= b);
        let extensive = thick.levels.iter().zip(&levels).all(|(a, b)| a >= b);
        let inverted: Vec<u8> = levels.iter().map(|v| 255 - v).collect();
        let dual: Vec<u8> = brute_thinning(&inverted, 16, 16, lambda, false)
            .iter()
            .map(|v| 255 - v)
            .collect();
        if !(idempotent && anti_extensive && extensive && thick.levels == dual) {
            property_failures += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    check(
        mismatches == 0 && property_failures == 0 && secs < 30.0,
        format!(
            "{small} 6x6 images vs level-set oracle: {mismatches} mismatches; 1000 16x16 images: {property_failures} property failures; {secs:.1} s"
        ),
    )
}

fn metrics() -> Outcome {
    let cm = ConfusionMatrix { class_count: 2, counts: vec![40, 10, 5, 45] };
    let (o, a, k) = (oa(&cm).unwrap(), aa(&cm).unwrap(), kappa(&cm).unwrap());
    let uniform = ConfusionMatrix { class_count: 2, counts: vec![1, 1, 1, 1] };
    let (ou, ku) = (oa(&uniform).unwrap(), kappa(&uniform).unwrap());

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let m = rng.random_range(2..=8);
        let l = rng.random_range(1..=20);
        let scale = 10f64.powi(rng.random_range(-2..=2));
        let w = Regressor { w: rand_matrix(&mut rng, m - 1, l, scale) };
        let h = rand_matrix(&mut rng, l, 30, 1.0);
        let p = mlr_posteriors(&w, &h).unwrap();
        for col in p.column_iter() {
            worst = worst.max((col.sum() - 1.0).abs());
        }
    }
    check(
        o == 0.85 && k == 0.70 && (a - 0.85).abs() < 1e-15 && ou == 0.5 && ku == 0.0 && worst <= 1e-12,
        format!("oa {o}, kappa {k}, aa {a}; uniform oa {ou}, kappa {ku}; posterior sum err {worst:.1e}"),
    )
}

fn synthetic_config(variant: &str, trials: usize, out: &Path) -> ExperimentConfig {
    ExperimentConfig::from_value(json!({
        "synthetic": {"height": 40, "width": 40, "bands": 20, "classes": 3, "noise": 0.04, "seed": 7},
        "variant": variant,
        "mode": "spectral",
        "l": 300,
        "q": 10,
        "trials": trials,
        "base_seed": 100,
        "out_dir": out,
    }))
    .unwrap()
}

fn synthetic_end_to_end() -> Outcome {
    let unused = std::env::temp_dir();
    let mean_oa = |variant: &str| -> f64 {
        let cfg = synthetic_config(variant, 10, &unused);
        let data = prepare(&cfg).unwrap();
        let oas: Vec<f64> = run_trials_on(&cfg, &data, 1)
            .unwrap()
            .into_iter()
            .map(|t| t.unwrap().report.oa)
            .collect();
        oas.iter().sum::<f64>() / oas.len() as f64
    };
    let esmlr = mean_oa("esmlr");
    let smlr = mean_oa("smlr");
    check(
        esmlr >= 0.95 && esmlr >= smlr,
        format!("ESMLR mean OA {esmlr:.4}, SMLR mean OA {smlr:.4} (10 trials, Q = 10)"),
    )
}

fn real_data() -> Outcome {
    let Some(dir) = std::env::var_os("ESMLR_DATA_DIR").map(PathBuf::from) else {
        return Outcome::Skip("ESMLR_DATA_DIR not set".into());
    };
    let scene = |name: &str| (dir.join(format!("{name}.bsq")), dir.join(format!("{name}_gt.labels")));
    let (ip, pavia) = (scene("indian_pines"), scene("pavia"));
    if !(ip.0.exists() && ip.1.exists() && pavia.0.exists() && pavia.1.exists()) {
        return Outcome::Skip(format!("scenes missing in {}", dir.display()));
    }
    let out = tempfile::tempdir().unwrap();
    let run = |(cube, gt): &(PathBuf, PathBuf), mode: &str, counts: &str| -> (f64, f64) {
        let cfg = ExperimentConfig::from_value(json!({
            "cube": cube,
            "ground_truth": gt,
            "variant": "esmlr",
            "mode": mode,
            "train_counts": counts,
            "trials": 10,
            "out_dir": out.path(),
        }))
        .unwrap();
        let t = Instant::now();
        let res = cmd_experiment(&cfg).unwrap();
        (100.0 * res.summary.oa.mean, t.elapsed().as_secs_f64())
    };
    let (ip_mfl, t1) = run(&ip, "mfl", "indian_pines");
    let (ip_spe, t2) = run(&ip, "spectral", "indian_pines");
    let (pu_mfl, t3) = run(&pavia, "mfl", "pavia");
    let near = |v: f64, target: f64| (v - target).abs() <= 2.0;
    check(
        near(ip_mfl, 93.44) && near(ip_spe, 74.46) && near(pu_mfl, 98.61),
        format!(
            "Indian Pines MFL {ip_mfl:.2} ({t1:.0} s), spectral {ip_spe:.2} ({t2:.0} s); Pavia MFL {pu_mfl:.2} ({t3:.0} s)"
        ),
    )
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let cfg = synthetic_config("esmlr", 3, dir.path());
    let path = dir.path().join("trials.csv");
    cmd_experiment(&cfg).unwrap();
    let first = fs::read(&path).unwrap();
    cmd_experiment(&cfg).unwrap();
    let second = fs::read(&path).unwrap();

    let data = prepare(&cfg).unwrap();
    let rows = |threads| -> Vec<String> {
        run_trials_on(&cfg, &data, threads)
            .unwrap()
            .into_iter()
            .map(|t| {
                let r = t.unwrap().report;
                format!("{},{},{},{},{:?}", r.trial, r.oa, r.aa, r.kappa, r.per_class)
            })
            .collect()
    };
    let same_schedule = rows(1) == rows(3);
    check(
        first == second && same_schedule,
        format!(
            "trials.csv {} bytes, identical across runs: {}; serial vs 3 workers identical: {same_schedule}",
            first.len(),
            first == second
        ),
    )
}

fn main() {
    let criteria: [(&str, Check); 8] = [
        ("ridge oracle equivalence", ridge_oracle),
        ("gradient check", gradient_check),
        ("solver monotonicity and sparsity", solver_monotonicity),
        ("morphology oracle", morphology_oracle),
        ("metrics", metrics),
        ("synthetic end-to-end", synthetic_end_to_end),
        ("conditional reproduction on real scenes", real_data),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Outcome::Fail(format!("panicked: {msg}"))
        });
        let (tag, detail) = match outcome {
            Outcome::Pass(d) => ("PASS", d),
            Outcome::Skip(d) => ("SKIP", d),
            Outcome::Fail(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("criterion {} ({name}): {tag}: {detail}", i + 1);
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
