//! Experiment runners: each executes one named experiment across all
//! configured seeds, writes per-seed CSV artifacts plus a `summary.csv`
//! of mean/std per metric, and echoes the resolved config. Per-seed work
//! runs on independent child streams (optionally in parallel); all file
//! writes happen in a single-threaded pass afterwards.

use std::path::{Path, PathBuf};

use evac::agent::{self, Policy, TrainConfig};
use evac::analysis;
use evac::critic::{bellman_contraction_check, EvtCritic};
use evac::env::{self, MdpSpec, PenaltySpec, Scenario};
use evac::error::{Error, Result};
use evac::gpd::{mean_log_lik, mle_fit, FitOptions, GpdParams};
use evac::io;
use evac::parallel;
use evac::quantile::{QuantileTable, RiskSpec};
use evac::rng::RandomStream;

use crate::config::{Algorithm, EnvKind, Experiment, RunConfig};

/// Salts folding a seed into the auxiliary streams so evaluation and
/// fidelity draws never alias the training stream of any listed seed.
const EVAL_SALT: u64 = 0x45564143_00000001;
const FIDELITY_SALT: u64 = 0x45564143_00000002;

/// Quantile-grid resolution of the contraction-ratio integral.
const CONTRACTION_SAMPLES: usize = 256;

struct Artifact {
    name: String,
    text: String,
}

impl Artifact {
    fn new(name: impl Into<String>, text: String) -> Artifact {
        Artifact { name: name.into(), text }
    }
}

/// Run the configured experiment and write all artifacts under `out_dir`.
pub fn run(config: &RunConfig) -> Result<()> {
    let mut artifacts = vec![Artifact::new("config.resolved", config.resolved_text())];
    let summary = match config.experiment {
        Experiment::FitGpd => fit_gpd(config, &mut artifacts)?,
        Experiment::Motivating => motivating(config, &mut artifacts)?,
        Experiment::Train => train_experiment(config, &mut artifacts)?,
        Experiment::Evaluate => evaluate_experiment(config, &mut artifacts)?,
        Experiment::VarianceTable => variance_table(config, &mut artifacts)?,
        Experiment::Fidelity => fidelity(config, &mut artifacts)?,
        Experiment::Contraction => contraction(config, &mut artifacts)?,
        Experiment::Compare => compare(config, &mut artifacts)?,
    };
    artifacts.push(Artifact::new("summary.csv", summary_csv(&summary)));

    let dir = PathBuf::from(&config.out_dir);
    std::fs::create_dir_all(&dir)?;
    for artifact in &artifacts {
        io::write_file(&dir.join(&artifact.name), &artifact.text)?;
    }
    Ok(())
}

/// Build the configured environment, with the penalty and discount
/// overridden by the resolved config.
pub fn build_env(config: &RunConfig) -> Result<(MdpSpec, PenaltySpec)> {
    let (mut mdp, mut penalty) = match config.env {
        EnvKind::Chain => env::make_rare_chain(config.chain_len, config.p, config.l, config.gamma),
        EnvKind::GridA => env::make_hazard_grid(Scenario::A),
        EnvKind::GridB => env::make_hazard_grid(Scenario::B),
    };
    mdp.gamma = config.gamma;
    penalty.p = config.p;
    penalty.l = config.l;
    penalty.mode = config.penalty_mode;
    mdp.validate()?;
    penalty.validate(&mdp)?;
    Ok((mdp, penalty))
}

fn algorithms(config: &RunConfig) -> Vec<Algorithm> {
    match config.experiment {
        Experiment::Compare | Experiment::Fidelity => {
            vec![Algorithm::Evac, Algorithm::QrBaseline]
        }
        _ => vec![config.algorithm],
    }
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn summary_csv(rows: &[(String, f64, f64)]) -> String {
    io::csv_text(
        "metric,mean,std",
        rows.iter()
            .map(|(m, mean, std)| format!("{m},{},{}", io::fmt_f64(*mean), io::fmt_f64(*std))),
    )
}

fn summarize(rows: &mut Vec<(String, f64, f64)>, metric: &str, values: &[f64]) {
    let (mean, std) = mean_std(values);
    rows.push((metric.to_string(), mean, std));
}

type Summary = Vec<(String, f64, f64)>;

fn fit_gpd(config: &RunConfig, artifacts: &mut Vec<Artifact>) -> Result<Summary> {
    let truth = GpdParams::new(config.gpd_xi, config.gpd_sigma)?;
    let n_seeds = config.seeds.len();
    let fits: Vec<Result<(f64, f64, f64)>> = parallel::map_indexed(n_seeds, |i| {
        let mut rng = RandomStream::new(config.seeds[i]);
        let xs: Vec<f64> = (0..config.fit_n).map(|_| truth.sample(&mut rng)).collect();
        let fit = mle_fit(&xs, GpdParams::init_from_data(&xs), &FitOptions::standalone())?;
        Ok((fit.params.xi(), fit.params.sigma(), mean_log_lik(&fit.params, &xs)))
    });
    let mut xi = Vec::new();
    let mut sigma = Vec::new();
    let mut loglik = Vec::new();
    for (i, fit) in fits.into_iter().enumerate() {
        let (x, s, ll) = fit?;
        artifacts.push(Artifact::new(
            format!("fit_gpd_seed{}.csv", config.seeds[i]),
            io::csv_text(
                "xi,sigma,loglik",
                [format!("{},{},{}", io::fmt_f64(x), io::fmt_f64(s), io::fmt_f64(ll))],
            ),
        ));
        xi.push(x);
        sigma.push(s);
        loglik.push(ll);
    }
    let mut summary = Summary::new();
    summarize(&mut summary, "xi", &xi);
    summarize(&mut summary, "sigma", &sigma);
    summarize(&mut summary, "loglik", &loglik);
    Ok(summary)
}

fn motivating(config: &RunConfig, artifacts: &mut Vec<Artifact>) -> Result<Summary> {
    let n_seeds = config.seeds.len();
    let runs: Vec<Vec<Vec<f64>>> = parallel::map_indexed(n_seeds, |i| {
        let mut rng = RandomStream::new(config.seeds[i]);
        config
            .jp_p
            .iter()
            .map(|&p| env::simulate_jp(p, config.jp_h, config.jp_a, config.jp_l, config.jp_n, &mut rng))
            .collect()
    });
    let mut summary = Summary::new();
    for (pi, &p) in config.jp_p.iter().enumerate() {
        let mut means = Vec::new();
        for (si, per_seed) in runs.iter().enumerate() {
            let totals = &per_seed[pi];
            means.push(totals.iter().sum::<f64>() / totals.len() as f64);
            let mut sorted = totals.clone();
            parallel::sort_f64(&mut sorted);
            let mut rows = Vec::new();
            let mut j = 0;
            while j < sorted.len() {
                let mut k = j;
                while k < sorted.len() && sorted[k] == sorted[j] {
                    k += 1;
                }
                rows.push(format!("{},{}", io::fmt_f64(sorted[j]), k - j));
                j = k;
            }
            artifacts.push(Artifact::new(
                format!("motivating_seed{}_p{}.csv", config.seeds[si], p),
                io::csv_text("value,count", rows),
            ));
        }
        summarize(&mut summary, &format!("jp_mean_p{p}"), &means);
    }
    Ok(summary)
}

struct TrainedSeed {
    critic: EvtCritic,
    policy: Policy,
    log_csv: String,
}

fn train_one(
    mdp: &MdpSpec,
    penalty: &PenaltySpec,
    tc: &TrainConfig,
) -> Result<TrainedSeed> {
    let mut rng = RandomStream::new(tc.seed);
    let (critic, policy, log) = agent::train(mdp, penalty, tc, &mut rng)?;
    Ok(TrainedSeed { critic, policy, log_csv: agent::training_log_csv(&log) })
}

fn policy_csv(policy: &Policy) -> String {
    io::csv_text(
        "state,action",
        policy.action_of.iter().enumerate().map(|(s, a)| format!("{s},{a}")),
    )
}

fn train_seeds(
    config: &RunConfig,
    algorithm: Algorithm,
    mdp: &MdpSpec,
    penalty: &PenaltySpec,
) -> Result<Vec<TrainedSeed>> {
    let n = config.seeds.len();
    let runs: Vec<Result<TrainedSeed>> = parallel::map_indexed(n, |i| {
        let tc = config.train_config(config.seeds[i], algorithm);
        train_one(mdp, penalty, &tc)
    });
    runs.into_iter().collect()
}

fn train_experiment(config: &RunConfig, artifacts: &mut Vec<Artifact>) -> Result<Summary> {
    let (mdp, penalty) = build_env(config)?;
    let algorithm = algorithms(config)[0];
    let trained = train_seeds(config, algorithm, &mdp, &penalty)?;
    let mut final_return = Vec::new();
    let mut final_failures = Vec::new();
    let mut final_cvar = Vec::new();
    for (i, t) in trained.iter().enumerate() {
        let seed = config.seeds[i];
        artifacts.push(Artifact::new(format!("train_seed{seed}.csv"), t.log_csv.clone()));
        artifacts.push(Artifact::new(format!("tables_seed{seed}.csv"), t.critic.dump_tables_csv()));
        artifacts.push(Artifact::new(format!("gpds_seed{seed}.csv"), t.critic.dump_gpds_csv()));
        artifacts.push(Artifact::new(format!("policy_seed{seed}.csv"), policy_csv(&t.policy)));
        if let Some(last) = t.log_csv.lines().last().filter(|_| config.episodes > 0) {
            let cells: Vec<&str> = last.split(',').collect();
            final_return.push(io::parse_f64(cells[1])?);
            final_failures.push(io::parse_f64(cells[2])?);
            final_cvar.push(io::parse_f64(cells[3])?);
        }
    }
    let mut summary = Summary::new();
    if !final_return.is_empty() {
        summarize(&mut summary, "final_return", &final_return);
        summarize(&mut summary, "final_failures", &final_failures);
        summarize(&mut summary, "final_cvar", &final_cvar);
    }
    Ok(summary)
}

struct EvalRow {
    report: agent::EvalReport,
    traces_csv: String,
}

fn eval_one(
    config: &RunConfig,
    mdp: &MdpSpec,
    penalty: &PenaltySpec,
    trained: &TrainedSeed,
    seed: u64,
) -> Result<EvalRow> {
    let risk = RiskSpec::new(config.x1)?;
    let mut rng = RandomStream::new(seed ^ EVAL_SALT);
    let (report, traces) = agent::evaluate(
        mdp,
        penalty,
        &trained.policy,
        &trained.critic,
        risk,
        config.eval_episodes,
        config.alpha_trigger,
        &mut rng,
    )?;
    Ok(EvalRow { report, traces_csv: agent::traces_csv(&traces) })
}

fn opt_cell(v: Option<f64>) -> String {
    v.map(io::fmt_f64).unwrap_or_default()
}

fn evaluate_experiment(config: &RunConfig, artifacts: &mut Vec<Artifact>) -> Result<Summary> {
    let (mdp, penalty) = build_env(config)?;
    let algorithm = algorithms(config)[0];
    let trained = train_seeds(config, algorithm, &mdp, &penalty)?;
    let mut pct = Vec::new();
    let mut ret = Vec::new();
    let mut len = Vec::new();
    let mut cvar = Vec::new();
    let mut overshoot = Vec::new();
    for (i, t) in trained.iter().enumerate() {
        let seed = config.seeds[i];
        let row = eval_one(config, &mdp, &penalty, t, seed)?;
        let r = &row.report;
        artifacts.push(Artifact::new(
            format!("eval_seed{seed}.csv"),
            io::csv_text(
                "pct_failure,mean_overshoot,mean_overshoot_all,mean_return,mean_length,start_state_cvar",
                [format!(
                    "{},{},{},{},{},{}",
                    io::fmt_f64(r.pct_failure),
                    opt_cell(r.mean_overshoot),
                    opt_cell(r.mean_overshoot_all),
                    io::fmt_f64(r.mean_return),
                    io::fmt_f64(r.mean_length),
                    io::fmt_f64(r.start_state_cvar),
                )],
            ),
        ));
        artifacts.push(Artifact::new(format!("traces_seed{seed}.csv"), row.traces_csv));
        pct.push(r.pct_failure);
        ret.push(r.mean_return);
        len.push(r.mean_length);
        cvar.push(r.start_state_cvar);
        if let Some(o) = r.mean_overshoot {
            overshoot.push(o);
        }
    }
    let mut summary = Summary::new();
    summarize(&mut summary, "pct_failure", &pct);
    summarize(&mut summary, "mean_return", &ret);
    summarize(&mut summary, "mean_length", &len);
    summarize(&mut summary, "start_state_cvar", &cvar);
    if overshoot.len() == trained.len() {
        summarize(&mut summary, "mean_overshoot", &overshoot);
    }
    Ok(summary)
}

fn variance_table(config: &RunConfig, artifacts: &mut Vec<Artifact>) -> Result<Summary> {
    // analytic variance-factor grid
    let mut rows = Vec::new();
    for k in 0..25 {
        let eta = 0.75 + 0.01 * k as f64;
        for j in 1..=50 {
            let t = (1.0 - eta) * j as f64 / 51.0;
            for &xi in &[0.0, 0.3] {
                for &sigma in &[0.5, 1.0, 2.0] {
                    let gpd = GpdParams::new(xi, sigma)?;
                    let ly = analysis::lambda_y_sq(eta, t, gpd)?;
                    let lh = analysis::lambda_h_sq(eta, t, gpd)?;
                    rows.push(format!(
                        "{},{},{},{},{},{}",
                        io::fmt_f64(eta),
                        io::fmt_f64(t),
                        io::fmt_f64(xi),
                        io::fmt_f64(sigma),
                        io::fmt_f64(ly),
                        io::fmt_f64(lh),
                    ));
                }
            }
        }
    }
    artifacts.push(Artifact::new(
        "variance_table.csv",
        io::csv_text("eta,t,xi,sigma,lambda_y_sq,lambda_h_sq", rows),
    ));

    // empirical estimator-variance study per seed
    let tail = GpdParams::new(config.study_xi, config.study_sigma)?;
    let sampler = analysis::body_tail_sampler(config.study_eta, 1.0, tail);
    let n_seeds = config.seeds.len();
    let studies: Vec<Result<analysis::VarianceStudy>> = parallel::map_indexed(n_seeds, |i| {
        let mut rng = RandomStream::new(config.seeds[i]);
        analysis::qr_variance_study(
            &sampler,
            config.tau,
            config.study_eta,
            config.n_samples,
            config.resamples,
            &mut rng,
        )
    });
    let mut direct = Vec::new();
    let mut gpd_var = Vec::new();
    let mut study_rows = Vec::new();
    for (i, study) in studies.into_iter().enumerate() {
        let s = study?;
        study_rows.push(format!(
            "{},{},{},{},{}",
            config.seeds[i],
            io::fmt_f64(s.var_direct),
            io::fmt_f64(s.var_gpd),
            s.excluded,
            s.used,
        ));
        direct.push(s.var_direct);
        gpd_var.push(s.var_gpd);
    }
    artifacts.push(Artifact::new(
        "variance_study.csv",
        io::csv_text("seed,var_direct,var_gpd,excluded,used", study_rows),
    ));
    let mut summary = Summary::new();
    summarize(&mut summary, "var_direct", &direct);
    summarize(&mut summary, "var_gpd", &gpd_var);
    Ok(summary)
}

fn fidelity(config: &RunConfig, artifacts: &mut Vec<Artifact>) -> Result<Summary> {
    let (mdp, penalty) = build_env(config)?;
    let mut rows = Vec::new();
    let mut per_alg: Vec<(Algorithm, Vec<f64>)> = Vec::new();
    for algorithm in algorithms(config) {
        let trained = train_seeds(config, algorithm, &mdp, &penalty)?;
        let n = config.seeds.len();
        let w1s: Vec<Result<f64>> = parallel::map_indexed(n, |i| {
            let mut rng = RandomStream::new(config.seeds[i] ^ FIDELITY_SALT);
            analysis::fidelity_report(
                &trained[i].critic,
                &mdp,
                &penalty,
                &trained[i].policy.action_of,
                mdp.start_state,
                config.n_mc,
                config.m_samples,
                &mut rng,
            )
        });
        let mut values = Vec::new();
        for (i, w1) in w1s.into_iter().enumerate() {
            let w1 = w1?;
            rows.push((config.seeds[i], algorithm, w1));
            values.push(w1);
        }
        per_alg.push((algorithm, values));
    }
    rows.sort_by_key(|&(seed, alg, _)| (seed, alg.name()));
    artifacts.push(Artifact::new(
        "fidelity.csv",
        io::csv_text(
            "seed,algorithm,w1",
            rows.iter().map(|(s, a, w)| format!("{s},{},{}", a.name(), io::fmt_f64(*w))),
        ),
    ));
    let mut summary = Summary::new();
    for (alg, values) in &per_alg {
        summarize(&mut summary, &format!("{}.w1", alg.name()), values);
    }
    Ok(summary)
}

/// Random fully-connected MDP for contraction measurements.
fn random_mdp(n_states: usize, gamma: f64, rng: &mut RandomStream) -> MdpSpec {
    let n_actions = 2;
    let mut transition = Vec::with_capacity(n_states * n_actions);
    for _ in 0..n_states * n_actions {
        let weights: Vec<f64> = (0..n_states).map(|_| rng.uniform(0.05, 1.0)).collect();
        let total: f64 = weights.iter().sum();
        transition.push(weights.into_iter().map(|w| w / total).collect());
    }
    MdpSpec {
        n_states,
        n_actions,
        transition,
        base_reward: (0..n_states * n_actions).map(|_| rng.uniform(-1.0, 1.0)).collect(),
        arrival_reward: vec![0.0; n_states],
        terminal: vec![false; n_states],
        gamma,
        horizon: 25,
        start_state: 0,
    }
}

/// Random critic with sorted uniform tables and an active random tail.
fn random_critic(
    n_states: usize,
    m_atoms: usize,
    eta: f64,
    rng: &mut RandomStream,
) -> Result<EvtCritic> {
    let mut critic = EvtCritic::new(n_states, 2, m_atoms, eta, 0, true)?;
    for s in 0..n_states {
        for a in 0..2 {
            let mut values: Vec<f64> = (0..m_atoms).map(|_| rng.uniform(-3.0, 3.0)).collect();
            parallel::sort_f64(&mut values);
            critic.set_table(s, a, QuantileTable::from_values(values)?)?;
            let gpd = GpdParams::new(rng.uniform(-0.2, 0.8), rng.uniform(0.2, 2.0))?;
            critic.set_gpd(s, a, gpd)?;
        }
    }
    Ok(critic)
}

fn contraction(config: &RunConfig, artifacts: &mut Vec<Artifact>) -> Result<Summary> {
    let n_seeds = config.seeds.len();
    let per_seed: Vec<Result<Vec<f64>>> = parallel::map_indexed(n_seeds, |i| {
        let mut rng = RandomStream::new(config.seeds[i]);
        let mdp = random_mdp(config.contraction_states, config.gamma, &mut rng);
        mdp.validate()?;
        let policy: Vec<usize> =
            (0..config.contraction_states).map(|_| rng.index(2)).collect();
        let mut ratios = Vec::with_capacity(config.pairs);
        for _ in 0..config.pairs {
            let z1 = random_critic(config.contraction_states, config.m_atoms, config.eta, &mut rng)?;
            let z2 = random_critic(config.contraction_states, config.m_atoms, config.eta, &mut rng)?;
            ratios.push(bellman_contraction_check(&z1, &z2, &mdp, &policy, CONTRACTION_SAMPLES)?);
        }
        Ok(ratios)
    });
    let mut rows = Vec::new();
    let mut all = Vec::new();
    for (i, ratios) in per_seed.into_iter().enumerate() {
        for (pair, ratio) in ratios?.into_iter().enumerate() {
            rows.push(format!("{},{pair},{}", config.seeds[i], io::fmt_f64(ratio)));
            all.push(ratio);
        }
    }
    artifacts.push(Artifact::new("contraction.csv", io::csv_text("seed,pair,ratio", rows)));
    let mut summary = Summary::new();
    summarize(&mut summary, "ratio", &all);
    let max = all.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    summary.push(("max_ratio".to_string(), max, 0.0));
    Ok(summary)
}

fn compare(config: &RunConfig, artifacts: &mut Vec<Artifact>) -> Result<Summary> {
    let (mdp, penalty) = build_env(config)?;
    struct AlgRow {
        episode_length: f64,
        pct_failure: f64,
        cumulative_reward: f64,
        cvar: f64,
        w1: f64,
    }
    let mut per_alg: Vec<(Algorithm, Vec<AlgRow>)> = Vec::new();
    for algorithm in algorithms(config) {
        let trained = train_seeds(config, algorithm, &mdp, &penalty)?;
        let n = config.seeds.len();
        let rows: Vec<Result<AlgRow>> = parallel::map_indexed(n, |i| {
            let seed = config.seeds[i];
            let eval = eval_one(config, &mdp, &penalty, &trained[i], seed)?;
            let mut rng = RandomStream::new(seed ^ FIDELITY_SALT);
            let w1 = analysis::fidelity_report(
                &trained[i].critic,
                &mdp,
                &penalty,
                &trained[i].policy.action_of,
                mdp.start_state,
                config.n_mc,
                config.m_samples,
                &mut rng,
            )?;
            Ok(AlgRow {
                episode_length: eval.report.mean_length,
                pct_failure: eval.report.pct_failure,
                cumulative_reward: eval.report.mean_return,
                cvar: eval.report.start_state_cvar,
                w1,
            })
        });
        per_alg.push((algorithm, rows.into_iter().collect::<Result<Vec<_>>>()?));
    }

    for (i, &seed) in config.seeds.iter().enumerate() {
        let rows = per_alg.iter().map(|(alg, rows)| {
            let r = &rows[i];
            format!(
                "{},{},{},{},{},{}",
                alg.name(),
                io::fmt_f64(r.episode_length),
                io::fmt_f64(r.pct_failure),
                io::fmt_f64(r.cumulative_reward),
                io::fmt_f64(r.cvar),
                io::fmt_f64(r.w1),
            )
        });
        artifacts.push(Artifact::new(
            format!("compare_seed{seed}.csv"),
            io::csv_text("algorithm,episode_length,pct_failure,cumulative_reward,cvar,w1", rows),
        ));
    }

    let mut summary = Summary::new();
    for (alg, rows) in &per_alg {
        let name = alg.name();
        let pick = |f: fn(&AlgRow) -> f64| rows.iter().map(f).collect::<Vec<f64>>();
        summarize(&mut summary, &format!("{name}.episode_length"), &pick(|r| r.episode_length));
        summarize(&mut summary, &format!("{name}.pct_failure"), &pick(|r| r.pct_failure));
        summarize(
            &mut summary,
            &format!("{name}.cumulative_reward"),
            &pick(|r| r.cumulative_reward),
        );
        summarize(&mut summary, &format!("{name}.cvar"), &pick(|r| r.cvar));
        summarize(&mut summary, &format!("{name}.w1"), &pick(|r| r.w1));
    }
    Ok(summary)
}

/// Train a critic on the configured env with the first seed, for the
/// `dump-critic` subcommand.
pub fn trained_critic_bundle(config: &RunConfig) -> Result<(String, String)> {
    let (mdp, penalty) = build_env(config)?;
    let tc = config.train_config(config.seeds[0], config.algorithm);
    let trained = train_one(&mdp, &penalty, &tc)?;
    Ok((trained.critic.dump_tables_csv(), trained.critic.dump_gpds_csv()))
}

/// Fit a GPD to one excess value per line, for the `fit-gpd` subcommand.
pub fn fit_excess_file(path: &Path, lr: f64, steps: usize) -> Result<String> {
    let text = std::fs::read_to_string(path)?;
    let mut excesses = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line == "excess" {
            continue;
        }
        excesses.push(io::parse_f64(line)?);
    }
    if excesses.is_empty() {
        return Err(Error::invalid("input contains no excess values"));
    }
    let opts = FitOptions { lr, steps, ..FitOptions::default() };
    let fit = mle_fit(&excesses, GpdParams::init_from_data(&excesses), &opts)?;
    Ok(io::csv_text(
        "xi,sigma,loglik",
        [format!(
            "{},{},{}",
            io::fmt_f64(fit.params.xi()),
            io::fmt_f64(fit.params.sigma()),
            io::fmt_f64(mean_log_lik(&fit.params, &excesses)),
        )],
    ))
}

/// Load a critic bundle, verify the dump round-trips byte-exactly, and
/// describe it, for the `load-critic` subcommand.
pub fn verify_critic_bundle(
    tables_path: &Path,
    gpds_path: &Path,
    eta: f64,
    warmup_updates: u64,
) -> Result<String> {
    let tables = std::fs::read_to_string(tables_path)?;
    let gpds = std::fs::read_to_string(gpds_path)?;
    let critic = EvtCritic::load_csv(&tables, &gpds, eta, warmup_updates, true)?;
    let tables_match = critic.dump_tables_csv() == tables;
    let gpds_match = critic.dump_gpds_csv() == gpds;
    if !tables_match || !gpds_match {
        return Err(Error::Numerical(format!(
            "bundle does not round-trip bit-exactly (tables_match={}, gpds_match={})",
            tables_match, gpds_match
        )));
    }
    let mut ready = 0usize;
    for s in 0..critic.n_states() {
        for a in 0..critic.n_actions() {
            if critic.tail_active(s, a)? {
                ready += 1;
            }
        }
    }
    Ok(io::csv_text(
        "states,actions,atoms,ready_pairs,tables_match,gpds_match",
        [format!(
            "{},{},{},{ready},1,1",
            critic.n_states(),
            critic.n_actions(),
            critic.atoms(),
        )],
    ))
}
