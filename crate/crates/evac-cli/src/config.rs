//! Flat `key = value` run configuration with a strict schema: unknown or
//! duplicate keys are rejected before any file is written, every key has
//! a documented default, and the fully resolved config echoes into the
//! output directory for byte-identical re-runs.

use evac::env::PenaltyMode;
use evac::error::{Error, Result};
use evac::io;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    FitGpd,
    Motivating,
    Train,
    Evaluate,
    VarianceTable,
    Fidelity,
    Contraction,
    Compare,
}

impl Experiment {
    fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "fit-gpd" => Experiment::FitGpd,
            "motivating" => Experiment::Motivating,
            "train" => Experiment::Train,
            "evaluate" => Experiment::Evaluate,
            "variance-table" => Experiment::VarianceTable,
            "fidelity" => Experiment::Fidelity,
            "contraction" => Experiment::Contraction,
            "compare" => Experiment::Compare,
            _ => return Err(Error::invalid(format!("unknown experiment '{s}'"))),
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Experiment::FitGpd => "fit-gpd",
            Experiment::Motivating => "motivating",
            Experiment::Train => "train",
            Experiment::Evaluate => "evaluate",
            Experiment::VarianceTable => "variance-table",
            Experiment::Fidelity => "fidelity",
            Experiment::Contraction => "contraction",
            Experiment::Compare => "compare",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnvKind {
    Chain,
    GridA,
    GridB,
}

impl EnvKind {
    fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "chain" => EnvKind::Chain,
            "grid-A" => EnvKind::GridA,
            "grid-B" => EnvKind::GridB,
            _ => return Err(Error::invalid(format!("unknown env '{s}'"))),
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            EnvKind::Chain => "chain",
            EnvKind::GridA => "grid-A",
            EnvKind::GridB => "grid-B",
        }
    }

    /// Canonical hazard probability when the config leaves `p` unset.
    fn default_p(self) -> f64 {
        match self {
            EnvKind::Chain => 0.01,
            EnvKind::GridA => 0.05,
            EnvKind::GridB => 0.03,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    Evac,
    QrBaseline,
}

impl Algorithm {
    fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "evac" => Algorithm::Evac,
            "qr-baseline" => Algorithm::QrBaseline,
            _ => return Err(Error::invalid(format!("unknown algorithm '{s}'"))),
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Evac => "evac",
            Algorithm::QrBaseline => "qr-baseline",
        }
    }
}

fn mode_name(mode: PenaltyMode) -> &'static str {
    match mode {
        PenaltyMode::Bernoulli => "bernoulli",
        PenaltyMode::AbsGaussian => "abs-gaussian",
    }
}

fn parse_mode(s: &str) -> Result<PenaltyMode> {
    Ok(match s {
        "bernoulli" => PenaltyMode::Bernoulli,
        "abs-gaussian" => PenaltyMode::AbsGaussian,
        _ => return Err(Error::invalid(format!("unknown penalty_mode '{s}'"))),
    })
}

/// Documented schema: `key` — default — meaning. Rendered into `--help`.
pub const CONFIG_DOC: &str = "\
Config file format: one `key = value` per line; `#` starts a comment line.
Unknown or duplicate keys abort with exit 2 before anything is written.

  experiment          = compare        fit-gpd | motivating | train | evaluate |
                                       variance-table | fidelity | contraction | compare
  env                 = grid-A         chain | grid-A | grid-B
  algorithm           = evac           evac | qr-baseline (compare and fidelity run both)
  seeds               = 1,2,3,4,5      comma-separated u64 list
  out_dir             = out            artifact directory (created if missing)
  eta                 = 0.96           critic body/tail threshold level
  x1                  = 0.95           CVaR risk level
  m_atoms             = 32             quantile atoms per (state, action)
  k_excess            = 100            tail-excess draws per fit step
  lr_q                = 0.05           quantile-table learning rate
  lr_gpd              = 0.01           online tail-fit learning rate
  gamma               = 0.99           discount (also applied to the env)
  episodes            = 2000           training episodes per seed
  kappa               = 1.0            quantile Huber curvature (0 = pinball)
  warmup_updates      = 1000           per-pair updates before tail fitting
  p                   = per env        hazard probability (chain 0.01, grid-A 0.05, grid-B 0.03)
  l                   = -50            hazard penalty (<= 0, bernoulli mode)
  penalty_mode        = bernoulli      bernoulli | abs-gaussian
  chain_len           = 5              rare-penalty chain length
  eval_episodes       = 500            greedy evaluation episodes
  alpha_trigger       = 0.0            overshoot threshold (abs-gaussian quantity)
  n_mc                = 10000          Monte Carlo ground-truth rollouts (fidelity)
  m_samples           = 10000          critic composite draws (fidelity)
  tau                 = 0.99           variance-study target quantile level
  study_eta           = 0.95           variance-study threshold level
  study_xi            = 0.3            variance-study sampler tail shape
  study_sigma         = 1.0            variance-study sampler tail scale
  n_samples           = 2000           variance-study sample size per resample
  resamples           = 500            variance-study bootstrap resamples
  fit_n               = 20000          fit-gpd synthetic sample size
  gpd_xi              = 0.25           fit-gpd true shape
  gpd_sigma           = 2.0            fit-gpd true scale
  jp_a                = 10             motivating per-step gain
  jp_l                = -10            motivating failure penalty
  jp_h                = 50             motivating horizon
  jp_n                = 10000          motivating sample count
  jp_p                = 0.005,0.01,0.05  motivating failure probabilities
  pairs               = 20             contraction critic pairs per seed
  contraction_states  = 4              contraction MDP state count
";

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub env: EnvKind,
    pub algorithm: Algorithm,
    pub seeds: Vec<u64>,
    pub out_dir: String,
    pub eta: f64,
    pub x1: f64,
    pub m_atoms: usize,
    pub k_excess: usize,
    pub lr_q: f64,
    pub lr_gpd: f64,
    pub gamma: f64,
    pub episodes: usize,
    pub kappa: f64,
    pub warmup_updates: u64,
    pub p: f64,
    pub l: f64,
    pub penalty_mode: PenaltyMode,
    pub chain_len: usize,
    pub eval_episodes: usize,
    pub alpha_trigger: f64,
    pub n_mc: usize,
    pub m_samples: usize,
    pub tau: f64,
    pub study_eta: f64,
    pub study_xi: f64,
    pub study_sigma: f64,
    pub n_samples: usize,
    pub resamples: usize,
    pub fit_n: usize,
    pub gpd_xi: f64,
    pub gpd_sigma: f64,
    pub jp_a: f64,
    pub jp_l: f64,
    pub jp_h: usize,
    pub jp_n: usize,
    pub jp_p: Vec<f64>,
    pub pairs: usize,
    pub contraction_states: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            experiment: Experiment::Compare,
            env: EnvKind::GridA,
            algorithm: Algorithm::Evac,
            seeds: vec![1, 2, 3, 4, 5],
            out_dir: "out".to_string(),
            eta: 0.96,
            x1: 0.95,
            m_atoms: 32,
            k_excess: 100,
            lr_q: 0.05,
            lr_gpd: 0.01,
            gamma: 0.99,
            episodes: 2000,
            kappa: 1.0,
            warmup_updates: 1000,
            p: f64::NAN, // resolved to the env's canonical value
            l: -50.0,
            penalty_mode: PenaltyMode::Bernoulli,
            chain_len: 5,
            eval_episodes: 500,
            alpha_trigger: 0.0,
            n_mc: 10_000,
            m_samples: 10_000,
            tau: 0.99,
            study_eta: 0.95,
            study_xi: 0.3,
            study_sigma: 1.0,
            n_samples: 2000,
            resamples: 500,
            fit_n: 20_000,
            gpd_xi: 0.25,
            gpd_sigma: 2.0,
            jp_a: 10.0,
            jp_l: -10.0,
            jp_h: 50,
            jp_n: 10_000,
            jp_p: vec![0.005, 0.01, 0.05],
            pairs: 20,
            contraction_states: 4,
        }
    }
}

fn parse_u64(s: &str, key: &str) -> Result<u64> {
    s.parse::<u64>()
        .map_err(|_| Error::invalid(format!("key '{key}': '{s}' is not a u64")))
}

fn parse_usize(s: &str, key: &str) -> Result<usize> {
    s.parse::<usize>()
        .map_err(|_| Error::invalid(format!("key '{key}': '{s}' is not an unsigned integer")))
}

fn parse_f64(s: &str, key: &str) -> Result<f64> {
    s.parse::<f64>()
        .map_err(|_| Error::invalid(format!("key '{key}': '{s}' is not a number")))
}

fn parse_f64_list(s: &str, key: &str) -> Result<Vec<f64>> {
    s.split(',').map(|part| parse_f64(part.trim(), key)).collect()
}

fn parse_u64_list(s: &str, key: &str) -> Result<Vec<u64>> {
    s.split(',').map(|part| parse_u64(part.trim(), key)).collect()
}

impl RunConfig {
    /// Parse a config file body on top of the defaults and resolve
    /// env-dependent values. Rejects unknown and duplicate keys.
    pub fn from_text(text: &str) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        let mut seen: Vec<String> = Vec::new();
        for (line_no, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::invalid(format!("line {}: expected 'key = value'", line_no + 1))
            })?;
            let key = key.trim();
            let value = value.trim();
            if seen.iter().any(|k| k == key) {
                return Err(Error::invalid(format!("duplicate key '{key}'")));
            }
            seen.push(key.to_string());
            cfg.apply(key, value)?;
        }
        cfg.resolve()?;
        Ok(cfg)
    }

    fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "experiment" => self.experiment = Experiment::parse(value)?,
            "env" => self.env = EnvKind::parse(value)?,
            "algorithm" => self.algorithm = Algorithm::parse(value)?,
            "seeds" => self.seeds = parse_u64_list(value, key)?,
            "out_dir" => self.out_dir = value.to_string(),
            "eta" => self.eta = parse_f64(value, key)?,
            "x1" => self.x1 = parse_f64(value, key)?,
            "m_atoms" => self.m_atoms = parse_usize(value, key)?,
            "k_excess" => self.k_excess = parse_usize(value, key)?,
            "lr_q" => self.lr_q = parse_f64(value, key)?,
            "lr_gpd" => self.lr_gpd = parse_f64(value, key)?,
            "gamma" => self.gamma = parse_f64(value, key)?,
            "episodes" => self.episodes = parse_usize(value, key)?,
            "kappa" => self.kappa = parse_f64(value, key)?,
            "warmup_updates" => self.warmup_updates = parse_u64(value, key)?,
            "p" => self.p = parse_f64(value, key)?,
            "l" => self.l = parse_f64(value, key)?,
            "penalty_mode" => self.penalty_mode = parse_mode(value)?,
            "chain_len" => self.chain_len = parse_usize(value, key)?,
            "eval_episodes" => self.eval_episodes = parse_usize(value, key)?,
            "alpha_trigger" => self.alpha_trigger = parse_f64(value, key)?,
            "n_mc" => self.n_mc = parse_usize(value, key)?,
            "m_samples" => self.m_samples = parse_usize(value, key)?,
            "tau" => self.tau = parse_f64(value, key)?,
            "study_eta" => self.study_eta = parse_f64(value, key)?,
            "study_xi" => self.study_xi = parse_f64(value, key)?,
            "study_sigma" => self.study_sigma = parse_f64(value, key)?,
            "n_samples" => self.n_samples = parse_usize(value, key)?,
            "resamples" => self.resamples = parse_usize(value, key)?,
            "fit_n" => self.fit_n = parse_usize(value, key)?,
            "gpd_xi" => self.gpd_xi = parse_f64(value, key)?,
            "gpd_sigma" => self.gpd_sigma = parse_f64(value, key)?,
            "jp_a" => self.jp_a = parse_f64(value, key)?,
            "jp_l" => self.jp_l = parse_f64(value, key)?,
            "jp_h" => self.jp_h = parse_usize(value, key)?,
            "jp_n" => self.jp_n = parse_usize(value, key)?,
            "jp_p" => self.jp_p = parse_f64_list(value, key)?,
            "pairs" => self.pairs = parse_usize(value, key)?,
            "contraction_states" => self.contraction_states = parse_usize(value, key)?,
            _ => return Err(Error::invalid(format!("unknown config key '{key}'"))),
        }
        Ok(())
    }

    /// Fill env-dependent defaults and validate everything cheap enough
    /// to check before touching the filesystem.
    fn resolve(&mut self) -> Result<()> {
        if self.p.is_nan() {
            self.p = self.env.default_p();
        }
        if self.seeds.is_empty() {
            return Err(Error::invalid("seeds must be non-empty"));
        }
        if self.out_dir.is_empty() {
            return Err(Error::invalid("out_dir must be non-empty"));
        }
        // dry-run the library constructors so bad values exit 2 with
        // nothing written rather than failing mid-experiment
        self.train_config(self.seeds[0], self.algorithm).validate()?;
        evac::critic::EvtCritic::new(2, 2, self.m_atoms, self.eta, 0, true)?;
        if !(self.p > 0.0 && self.p <= 1.0) {
            return Err(Error::invalid(format!("p {} outside (0, 1]", self.p)));
        }
        if self.l > 0.0 {
            return Err(Error::invalid(format!("l {} must be <= 0", self.l)));
        }
        if !(0.0 < self.gamma && self.gamma < 1.0) {
            return Err(Error::invalid(format!("gamma {} outside (0, 1)", self.gamma)));
        }
        for &p in &self.jp_p {
            if !(p > 0.0 && p < 1.0) {
                return Err(Error::invalid(format!("jp_p entry {p} outside (0, 1)")));
            }
        }
        if !(0.0 < self.study_eta && self.study_eta < self.tau && self.tau < 1.0) {
            return Err(Error::invalid(format!(
                "need 0 < study_eta < tau < 1, got {} and {}",
                self.study_eta, self.tau
            )));
        }
        if self.chain_len == 0 || self.contraction_states == 0 {
            return Err(Error::invalid("chain_len and contraction_states must be >= 1"));
        }
        Ok(())
    }

    /// Training hyperparameters for one seed and algorithm.
    pub fn train_config(&self, seed: u64, algorithm: Algorithm) -> evac::agent::TrainConfig {
        evac::agent::TrainConfig {
            eta: self.eta,
            x1: self.x1,
            m_atoms: self.m_atoms,
            k_excess: self.k_excess,
            lr_q: self.lr_q,
            lr_gpd: self.lr_gpd,
            gamma: self.gamma,
            episodes: self.episodes,
            seed,
            kappa: self.kappa,
            warmup_updates: self.warmup_updates,
            baseline_mode: algorithm == Algorithm::QrBaseline,
        }
    }

    /// Canonical echo of every resolved key, floats at 17 significant
    /// digits, stable ordering: the `config.resolved` artifact.
    pub fn resolved_text(&self) -> String {
        let seeds: Vec<String> = self.seeds.iter().map(u64::to_string).collect();
        let jp_p: Vec<String> = self.jp_p.iter().map(|&v| io::fmt_f64(v)).collect();
        let mut s = String::from("# resolved configuration\n");
        let mut kv = |k: &str, v: String| {
            s.push_str(k);
            s.push_str(" = ");
            s.push_str(&v);
            s.push('\n');
        };
        kv("experiment", self.experiment.name().into());
        kv("env", self.env.name().into());
        kv("algorithm", self.algorithm.name().into());
        kv("seeds", seeds.join(","));
        kv("out_dir", self.out_dir.clone());
        kv("eta", io::fmt_f64(self.eta));
        kv("x1", io::fmt_f64(self.x1));
        kv("m_atoms", self.m_atoms.to_string());
        kv("k_excess", self.k_excess.to_string());
        kv("lr_q", io::fmt_f64(self.lr_q));
        kv("lr_gpd", io::fmt_f64(self.lr_gpd));
        kv("gamma", io::fmt_f64(self.gamma));
        kv("episodes", self.episodes.to_string());
        kv("kappa", io::fmt_f64(self.kappa));
        kv("warmup_updates", self.warmup_updates.to_string());
        kv("p", io::fmt_f64(self.p));
        kv("l", io::fmt_f64(self.l));
        kv("penalty_mode", mode_name(self.penalty_mode).into());
        kv("chain_len", self.chain_len.to_string());
        kv("eval_episodes", self.eval_episodes.to_string());
        kv("alpha_trigger", io::fmt_f64(self.alpha_trigger));
        kv("n_mc", self.n_mc.to_string());
        kv("m_samples", self.m_samples.to_string());
        kv("tau", io::fmt_f64(self.tau));
        kv("study_eta", io::fmt_f64(self.study_eta));
        kv("study_xi", io::fmt_f64(self.study_xi));
        kv("study_sigma", io::fmt_f64(self.study_sigma));
        kv("n_samples", self.n_samples.to_string());
        kv("resamples", self.resamples.to_string());
        kv("fit_n", self.fit_n.to_string());
        kv("gpd_xi", io::fmt_f64(self.gpd_xi));
        kv("gpd_sigma", io::fmt_f64(self.gpd_sigma));
        kv("jp_a", io::fmt_f64(self.jp_a));
        kv("jp_l", io::fmt_f64(self.jp_l));
        kv("jp_h", self.jp_h.to_string());
        kv("jp_n", self.jp_n.to_string());
        kv("jp_p", jp_p.join(","));
        kv("pairs", self.pairs.to_string());
        kv("contraction_states", self.contraction_states.to_string());
        s
    }
}
