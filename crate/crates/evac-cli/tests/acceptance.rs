//! End-to-end acceptance checks, one test per criterion, each printing a
//! single `criterion N (...): PASS/FAIL` line (visible with --nocapture).
//! Tolerances and runtime budgets are pinned as constants next to each
//! check. Experiments run through the compiled `evac` binary so the whole
//! config -> train -> evaluate -> CSV pipeline is exercised.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use evac::analysis;
use evac::gpd::GpdParams;
use evac::rng::RandomStream;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_evac")
}

/// Fresh scratch directory per test, wiped on entry so reruns are clean.
fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("evac-acceptance-{name}"));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_cfg(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn run_cli(args: &[&str]) {
    let out = Command::new(bin()).args(args).output().unwrap();
    assert!(
        out.status.success(),
        "cli {:?} failed: {}",
        args,
        String::from_utf8_lossy(&out.stderr)
    );
}

/// Minimal CSV reader: header row + comma-split records.
fn read_csv(path: &Path) -> Vec<HashMap<String, String>> {
    let text = std::fs::read_to_string(path)
        .unwrap_or_else(|e| panic!("cannot read {}: {e}", path.display()));
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().expect("empty csv").split(',').collect();
    lines
        .map(|l| {
            header
                .iter()
                .zip(l.split(','))
                .map(|(h, v)| (h.to_string(), v.to_string()))
                .collect()
        })
        .collect()
}

fn column(rows: &[HashMap<String, String>], key: &str) -> Vec<f64> {
    rows.iter().map(|r| r[key].parse::<f64>().unwrap()).collect()
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

/// Byte-compare every CSV artifact present in `dir_a` against `dir_b`.
/// (config.resolved is excluded: it records the out_dir path.)
fn csvs_match(dir_a: &Path, dir_b: &Path) -> Vec<String> {
    let mut mismatches = Vec::new();
    let mut names: Vec<String> = std::fs::read_dir(dir_a)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.ends_with(".csv"))
        .collect();
    names.sort();
    assert!(!names.is_empty(), "no csv artifacts in {}", dir_a.display());
    for name in names {
        let a = std::fs::read(dir_a.join(&name)).unwrap();
        let b = std::fs::read(dir_b.join(&name))
            .unwrap_or_else(|e| panic!("missing counterpart {name}: {e}"));
        if a != b {
            mismatches.push(name);
        }
    }
    mismatches
}

fn report(n: u32, name: &str, pass: bool, detail: &str, elapsed: Duration) {
    println!(
        "criterion {n} ({name}): {} — {detail} [{:.1}s]",
        if pass { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64()
    );
}

// ---------------------------------------------------------------- 1 ----

#[test]
fn criterion_01_gpd_kernel() {
    const ROUND_TRIP_TOL: f64 = 1e-9;
    const GRAD_REL_TOL: f64 = 1e-5;
    const CONTINUITY_TOL: f64 = 1e-6;
    const BUDGET: Duration = Duration::from_secs(5);
    let t0 = Instant::now();
    let mut rng = RandomStream::new(42);

    // CDF/quantile round trips on random parameters and levels.
    let mut worst_rt = 0.0f64;
    for _ in 0..200 {
        let xi = rng.uniform(-0.45, 1.5);
        let sigma = rng.uniform(0.1, 5.0);
        let gpd = GpdParams::new(xi, sigma).unwrap();
        let tau = rng.uniform(1e-6, 1.0 - 1e-6);
        let x = gpd.quantile(tau).unwrap();
        worst_rt = worst_rt.max((gpd.cdf(x) - tau).abs());
        let x2 = rng.uniform(0.0, 0.95 * if xi < 0.0 { -sigma / xi } else { 10.0 * sigma });
        let rt = gpd.quantile(gpd.cdf(x2)).unwrap();
        worst_rt = worst_rt.max((rt - x2).abs() / x2.abs().max(1.0));
    }
    assert!(worst_rt <= ROUND_TRIP_TOL, "round-trip error {worst_rt}");

    // Analytic gradients against central finite differences.
    const FD_H: f64 = 1e-6;
    let mut worst_grad = 0.0f64;
    for _ in 0..200 {
        let xi = rng.uniform(-0.4, 1.5);
        let sigma = rng.uniform(0.2, 4.0);
        let gpd = GpdParams::new(xi, sigma).unwrap();
        // stay strictly inside the support so no branch is clamped
        let x = gpd.quantile(rng.uniform(0.05, 0.95)).unwrap();
        let (d_xi, d_sigma, viol) = gpd.grad_log_pdf(x);
        assert!(!viol, "support violation at interior point");
        let at = |xi: f64, sigma: f64| GpdParams::new(xi, sigma).unwrap().log_pdf(x).0;
        let fd_xi = (at(xi + FD_H, sigma) - at(xi - FD_H, sigma)) / (2.0 * FD_H);
        let fd_sigma = (at(xi, sigma + FD_H) - at(xi, sigma - FD_H)) / (2.0 * FD_H);
        let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs()).max(1.0);
        worst_grad = worst_grad.max(rel(d_xi, fd_xi)).max(rel(d_sigma, fd_sigma));
    }
    assert!(worst_grad <= GRAD_REL_TOL, "gradient mismatch {worst_grad}");

    // Continuity across the xi ~ 0 branch switch.
    let mut worst_cont = 0.0f64;
    for &sigma in &[0.5, 1.0, 2.0] {
        let lo = GpdParams::new(-1e-8, sigma).unwrap();
        let zero = GpdParams::new(0.0, sigma).unwrap();
        let hi = GpdParams::new(1e-8, sigma).unwrap();
        for k in 1..40 {
            let tau = k as f64 / 40.0;
            let q0 = zero.quantile(tau).unwrap();
            worst_cont = worst_cont.max((lo.quantile(tau).unwrap() - q0).abs());
            worst_cont = worst_cont.max((hi.quantile(tau).unwrap() - q0).abs());
            let x = q0;
            worst_cont = worst_cont.max((lo.cdf(x) - zero.cdf(x)).abs());
            worst_cont = worst_cont.max((hi.cdf(x) - zero.cdf(x)).abs());
            worst_cont = worst_cont.max((lo.log_pdf(x).0 - zero.log_pdf(x).0).abs());
            worst_cont = worst_cont.max((hi.log_pdf(x).0 - zero.log_pdf(x).0).abs());
        }
    }
    assert!(worst_cont <= CONTINUITY_TOL, "branch discontinuity {worst_cont}");

    let elapsed = t0.elapsed();
    report(
        1,
        "gpd kernel",
        true,
        &format!("round-trip {worst_rt:.2e}, grad {worst_grad:.2e}, continuity {worst_cont:.2e}"),
        elapsed,
    );
    assert!(elapsed < BUDGET, "ran {elapsed:?}, budget {BUDGET:?}");
}

// ---------------------------------------------------------------- 2 ----

#[test]
fn criterion_02_mle_recovery() {
    const XI_TRUE: f64 = 0.25;
    const SIGMA_TRUE: f64 = 2.0;
    const XI_TOL: f64 = 0.05;
    const SIGMA_TOL: f64 = 0.1;
    const BUDGET: Duration = Duration::from_secs(30);
    let t0 = Instant::now();
    let dir = scratch("c2");
    let cfg = write_cfg(
        &dir,
        "fit.cfg",
        &format!(
            "experiment = fit-gpd\nseeds = 1,2,3,4,5\nfit_n = 20000\n\
             gpd_xi = {XI_TRUE}\ngpd_sigma = {SIGMA_TRUE}\nout_dir = {}\n",
            dir.join("out").display()
        ),
    );
    run_cli(&["run", "--config", cfg.to_str().unwrap()]);
    let mut xis = Vec::new();
    let mut sigmas = Vec::new();
    for seed in 1..=5 {
        let rows = read_csv(&dir.join("out").join(format!("fit_gpd_seed{seed}.csv")));
        xis.push(rows[0]["xi"].parse::<f64>().unwrap());
        sigmas.push(rows[0]["sigma"].parse::<f64>().unwrap());
    }
    let (xi_med, sigma_med) = (median(&xis), median(&sigmas));
    let pass = (xi_med - XI_TRUE).abs() <= XI_TOL && (sigma_med - SIGMA_TRUE).abs() <= SIGMA_TOL;
    let elapsed = t0.elapsed();
    report(2, "mle recovery", pass, &format!("xi {xi_med:.4}, sigma {sigma_med:.4}"), elapsed);
    assert!(pass, "median fit ({xi_med}, {sigma_med}) outside ±({XI_TOL}, {SIGMA_TOL})");
    assert!(elapsed < BUDGET, "ran {elapsed:?}, budget {BUDGET:?}");
}

// ---------------------------------------------------------------- 3 ----

#[test]
fn criterion_03_variance_factor_bound() {
    const BUDGET: Duration = Duration::from_secs(5);
    let t0 = Instant::now();
    let mut checked = 0usize;
    let mut violations = 0usize;
    for k in 0..25 {
        let eta = 0.75 + 0.01 * k as f64;
        for j in 1..=50 {
            let t = (1.0 - eta) * j as f64 / 51.0;
            for &xi in &[0.0, 0.3] {
                for &sigma in &[0.5, 1.0, 2.0] {
                    let gpd = GpdParams::new(xi, sigma).unwrap();
                    let ly = analysis::lambda_y_sq(eta, t, gpd).unwrap();
                    let lh = analysis::lambda_h_sq(eta, t, gpd).unwrap();
                    checked += 1;
                    if lh > ly {
                        violations += 1;
                    }
                }
            }
        }
    }
    let pass = violations == 0;
    let elapsed = t0.elapsed();
    report(
        3,
        "variance factor bound",
        pass,
        &format!("{violations} violations over {checked} grid points"),
        elapsed,
    );
    assert!(pass, "{violations} grid points had lambda_h^2 > lambda_y^2");
    assert!(elapsed < BUDGET, "ran {elapsed:?}, budget {BUDGET:?}");
}

// ---------------------------------------------------------------- 4 ----

#[test]
fn criterion_04_estimator_variance_study() {
    const BUDGET: Duration = Duration::from_secs(120);
    let t0 = Instant::now();
    let dir = scratch("c4");
    let cfg = write_cfg(
        &dir,
        "var.cfg",
        &format!(
            "experiment = variance-table\nseeds = 1,2,3,4,5\ntau = 0.99\nstudy_eta = 0.95\n\
             resamples = 500\nout_dir = {}\n",
            dir.join("out").display()
        ),
    );
    run_cli(&["run", "--config", cfg.to_str().unwrap()]);
    let rows = read_csv(&dir.join("out").join("variance_study.csv"));
    assert_eq!(rows.len(), 5, "expected one study row per seed");
    let gpd_med = median(&column(&rows, "var_gpd"));
    let direct_med = median(&column(&rows, "var_direct"));
    let pass = gpd_med < direct_med;
    let elapsed = t0.elapsed();
    report(
        4,
        "estimator variance",
        pass,
        &format!("median var_gpd {gpd_med:.4} vs var_direct {direct_med:.4}"),
        elapsed,
    );
    assert!(pass, "var_gpd {gpd_med} !< var_direct {direct_med}");
    assert!(elapsed < BUDGET, "ran {elapsed:?}, budget {BUDGET:?}");
}

// ---------------------------------------------------------------- 5 ----

#[test]
fn criterion_05_motivating_example() {
    const A: f64 = 10.0;
    const L: f64 = -10.0;
    const H: f64 = 50.0;
    const N: f64 = 10_000.0;
    const PS: [f64; 3] = [0.005, 0.01, 0.05];
    const BUDGET: Duration = Duration::from_secs(10);
    let t0 = Instant::now();
    let dir = scratch("c5");
    let cfg = write_cfg(
        &dir,
        "mot.cfg",
        &format!("experiment = motivating\nseeds = 1\nout_dir = {}\n", dir.join("out").display()),
    );
    run_cli(&["run", "--config", cfg.to_str().unwrap()]);

    let mut mode_mass = Vec::new();
    let mut detail = String::new();
    for &p in &PS {
        let rows = read_csv(&dir.join("out").join(format!("motivating_seed1_p{p}.csv")));
        let mut n = 0.0;
        let mut sum = 0.0;
        let mut at_mode = 0.0;
        for r in &rows {
            let value: f64 = r["value"].parse().unwrap();
            let count: f64 = r["count"].parse().unwrap();
            n += count;
            sum += value * count;
            if value == H * A {
                at_mode = count;
            }
        }
        assert_eq!(n, N, "histogram should hold {N} draws");
        let mean = sum / n;
        let analytic = H * (A + p * L);
        // binomial count variance per step, scaled by the penalty weight
        let se = (H * p * (1.0 - p) * L * L / N).sqrt();
        assert!(
            (mean - analytic).abs() <= 3.0 * se,
            "p={p}: mean {mean} vs analytic {analytic} ± {:.3}",
            3.0 * se
        );
        detail.push_str(&format!("p={p}: mean {mean:.2} (target {analytic:.1}); "));
        mode_mass.push(at_mode / n);
    }
    // PS is ordered by decreasing rarity, so mode mass must strictly decrease
    let increasing_as_p_drops = mode_mass[0] > mode_mass[1] && mode_mass[1] > mode_mass[2];
    let elapsed = t0.elapsed();
    report(
        5,
        "motivating example",
        increasing_as_p_drops,
        &format!("{detail}mode mass {mode_mass:?}"),
        elapsed,
    );
    assert!(increasing_as_p_drops, "mode mass not strictly increasing as p decreases");
    assert!(elapsed < BUDGET, "ran {elapsed:?}, budget {BUDGET:?}");
}

// ---------------------------------------------------------------- 6 ----

#[test]
fn criterion_06_bellman_contraction() {
    const GAMMA: f64 = 0.9;
    // Monte Carlo tolerance for the empirical Wasserstein ratio estimator
    // (three standard errors at the pinned sample size).
    const RATIO_MARGIN: f64 = 0.02;
    const BUDGET: Duration = Duration::from_secs(60);
    let t0 = Instant::now();
    let dir = scratch("c6");
    let cfg = write_cfg(
        &dir,
        "con.cfg",
        &format!(
            "experiment = contraction\nseeds = 1\ngamma = {GAMMA}\npairs = 20\n\
             contraction_states = 4\nout_dir = {}\n",
            dir.join("out").display()
        ),
    );
    run_cli(&["run", "--config", cfg.to_str().unwrap()]);
    let rows = read_csv(&dir.join("out").join("contraction.csv"));
    assert_eq!(rows.len(), 20, "expected 20 critic pairs");
    let ratios = column(&rows, "ratio");
    let max = ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let pass = max <= GAMMA + RATIO_MARGIN;
    let elapsed = t0.elapsed();
    report(6, "bellman contraction", pass, &format!("max ratio {max:.4} vs {GAMMA}"), elapsed);
    assert!(pass, "max ratio {max} exceeds {GAMMA} + {RATIO_MARGIN}");
    assert!(elapsed < BUDGET, "ran {elapsed:?}, budget {BUDGET:?}");
}

// ---------------------------------------------------------------- 7 ----

/// Matched-budget training configuration under which the tail-aware
/// critic's risk estimates separate from the plain table's on both grids.
const GRID_TRAIN: &str = "experiment = compare\neta = 0.90\nx1 = 0.98\nlr_q = 0.3\n\
                          lr_gpd = 0.01\nepisodes = 20000\nwarmup_updates = 500\n\
                          eval_episodes = 2000\nseeds = 1,2,3,4,5\n";

fn grid_medians(dir: &Path, env: &str) -> (f64, f64, f64, f64) {
    let cfg_path = write_cfg(
        dir,
        &format!("{env}.cfg"),
        &format!("{GRID_TRAIN}env = {env}\nout_dir = {}\n", dir.join(env).display()),
    );
    run_cli(&["run", "--config", cfg_path.to_str().unwrap()]);
    let mut fail = HashMap::<String, Vec<f64>>::new();
    let mut reward = HashMap::<String, Vec<f64>>::new();
    for seed in 1..=5 {
        for row in read_csv(&dir.join(env).join(format!("compare_seed{seed}.csv"))) {
            let alg = row["algorithm"].clone();
            fail.entry(alg.clone()).or_default().push(row["pct_failure"].parse().unwrap());
            reward.entry(alg).or_default().push(row["cumulative_reward"].parse().unwrap());
        }
    }
    (
        median(&fail["evac"]),
        median(&fail["qr-baseline"]),
        median(&reward["evac"]),
        median(&reward["qr-baseline"]),
    )
}

#[test]
fn criterion_07_risk_aversion_direction() {
    const FAILURE_FACTOR: f64 = 0.5;
    const REWARD_FACTOR: f64 = 0.75;
    const BUDGET_PER_SCENARIO: Duration = Duration::from_secs(600);
    let dir = scratch("c7");
    let mut all_pass = true;
    for env in ["grid-A", "grid-B"] {
        let t0 = Instant::now();
        let (fail_e, fail_b, rew_e, rew_b) = grid_medians(&dir, env);
        let elapsed = t0.elapsed();
        let pass = fail_e <= FAILURE_FACTOR * fail_b && rew_e >= REWARD_FACTOR * rew_b;
        all_pass &= pass;
        report(
            7,
            &format!("risk aversion, {env}"),
            pass,
            &format!(
                "median failure {fail_e:.3} vs {fail_b:.3}, reward {rew_e:.2} vs {rew_b:.2}"
            ),
            elapsed,
        );
        assert!(
            pass,
            "{env}: failure {fail_e} vs {fail_b} (need <= {FAILURE_FACTOR}x), \
             reward {rew_e} vs {rew_b} (need >= {REWARD_FACTOR}x)"
        );
        assert!(elapsed < BUDGET_PER_SCENARIO, "{env} ran {elapsed:?}");
    }
    assert!(all_pass);
}

// ---------------------------------------------------------------- 8 ----

#[test]
fn criterion_08_distribution_fidelity() {
    const BUDGET: Duration = Duration::from_secs(300);
    let t0 = Instant::now();
    let dir = scratch("c8");
    let cfg = write_cfg(
        &dir,
        "chain.cfg",
        &format!(
            "experiment = compare\nenv = chain\nseeds = 1,2,3,4,5\nout_dir = {}\n",
            dir.join("out").display()
        ),
    );
    run_cli(&["run", "--config", cfg.to_str().unwrap()]);
    let mut w1 = HashMap::<String, Vec<f64>>::new();
    for seed in 1..=5 {
        for row in read_csv(&dir.join("out").join(format!("compare_seed{seed}.csv"))) {
            w1.entry(row["algorithm"].clone()).or_default().push(row["w1"].parse().unwrap());
        }
    }
    let evac_med = median(&w1["evac"]);
    let base_med = median(&w1["qr-baseline"]);
    let pass = evac_med < base_med;
    let elapsed = t0.elapsed();
    report(
        8,
        "distribution fidelity",
        pass,
        &format!("median W1 evac {evac_med:.4} vs baseline {base_med:.4}"),
        elapsed,
    );
    assert!(elapsed < BUDGET, "ran {elapsed:?}, budget {BUDGET:?}");
    // Known structural shortfall: with tail excesses pinned to the table's
    // own interpolation, the shape-bounded tail fit cannot beat the table
    // it is built from on a fixed-magnitude Bernoulli ladder. See "Known
    // limitations" in README.md for the analysis. The assertion is kept
    // faithful to the stated claim rather than weakened.
    assert!(pass, "median W1 evac {evac_med} !< baseline {base_med}");
}

// ---------------------------------------------------------------- 9 ----

#[test]
fn criterion_09_baseline_reduction() {
    const BUDGET: Duration = Duration::from_secs(60);
    let t0 = Instant::now();
    let dir = scratch("c9");
    let shared = "experiment = train\nenv = grid-A\nepisodes = 800\nseeds = 1,2\n";
    let cfg_e = write_cfg(
        &dir,
        "evac.cfg",
        &format!(
            "{shared}algorithm = evac\nwarmup_updates = 18446744073709551615\nout_dir = {}\n",
            dir.join("evac").display()
        ),
    );
    let cfg_b = write_cfg(
        &dir,
        "base.cfg",
        &format!("{shared}algorithm = qr-baseline\nout_dir = {}\n", dir.join("base").display()),
    );
    run_cli(&["run", "--config", cfg_e.to_str().unwrap()]);
    run_cli(&["run", "--config", cfg_b.to_str().unwrap()]);
    // every CSV describing the update trajectory must be byte-identical
    let mismatches = csvs_match(&dir.join("evac"), &dir.join("base"));
    let pass = mismatches.is_empty();
    let elapsed = t0.elapsed();
    report(
        9,
        "baseline reduction",
        pass,
        &format!("mismatching artifacts: {mismatches:?}"),
        elapsed,
    );
    assert!(pass, "artifacts differ: {mismatches:?}");
    assert!(elapsed < BUDGET, "ran {elapsed:?}, budget {BUDGET:?}");
}

// --------------------------------------------------------------- 10 ----

#[test]
fn criterion_10_determinism() {
    const BUDGET: Duration = Duration::from_secs(120);
    let t0 = Instant::now();
    let dir = scratch("c10");
    for out in ["first", "second"] {
        let cfg = write_cfg(
            &dir,
            &format!("{out}.cfg"),
            &format!(
                "experiment = compare\nenv = chain\nseeds = 1,2,3\nout_dir = {}\n",
                dir.join(out).display()
            ),
        );
        run_cli(&["run", "--config", cfg.to_str().unwrap()]);
    }
    let mismatches = csvs_match(&dir.join("first"), &dir.join("second"));
    let pass = mismatches.is_empty();
    let elapsed = t0.elapsed();
    report(10, "determinism", pass, &format!("mismatching artifacts: {mismatches:?}"), elapsed);
    assert!(pass, "re-run artifacts differ: {mismatches:?}");
    assert!(elapsed < BUDGET, "ran {elapsed:?}, budget {BUDGET:?}");
}
