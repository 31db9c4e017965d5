//! Training loop and policy machinery: CVaR-greedy improvement over the
//! composite critic, epsilon-greedy episode collection with per-transition
//! critic updates, and greedy-policy evaluation with failure metrics.
//! Environments emit standard rewards; negation happens here at the critic
//! boundary, and all reported CVaR values convert back to reward units.

use crate::critic::{update_critic, EvtCritic, Transition};
use crate::env::{self, MdpSpec, PenaltyMode, PenaltySpec};
use crate::error::{Error, Result};
use crate::io;
use crate::quantile::RiskSpec;
use crate::rng::RandomStream;

/// Deterministic greedy policy plus the exploration rate it was trained at.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy {
    pub action_of: Vec<usize>,
    pub exploration_eps: f64,
}

impl Policy {
    pub fn greedy(action_of: Vec<usize>) -> Policy {
        Policy { action_of, exploration_eps: 0.0 }
    }

    pub fn action(&self, s: usize) -> usize {
        self.action_of[s]
    }
}

/// Training hyperparameters. Defaults follow the reference configuration:
/// threshold level 0.96, risk level 0.95, 32 atoms, 100 excess draws per
/// fit step, learning rates (0.05, 0.01), Huber kappa 1, 1000-update
/// tail warmup.
#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub eta: f64,
    pub x1: f64,
    pub m_atoms: usize,
    pub k_excess: usize,
    pub lr_q: f64,
    pub lr_gpd: f64,
    pub gamma: f64,
    pub episodes: usize,
    pub seed: u64,
    pub kappa: f64,
    pub warmup_updates: u64,
    pub baseline_mode: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            eta: 0.96,
            x1: 0.95,
            m_atoms: 32,
            k_excess: 100,
            lr_q: 0.05,
            lr_gpd: 0.01,
            gamma: 0.99,
            episodes: 2000,
            seed: 1,
            kappa: 1.0,
            warmup_updates: 1000,
            baseline_mode: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        RiskSpec::new(self.x1)?;
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::invalid(format!("gamma {} outside [0, 1]", self.gamma)));
        }
        if self.lr_q < 0.0 || self.lr_gpd < 0.0 || self.kappa < 0.0 {
            return Err(Error::invalid("learning rates and kappa must be >= 0"));
        }
        if self.m_atoms < 2 || self.k_excess == 0 {
            return Err(Error::invalid("need at least 2 atoms and 1 excess draw"));
        }
        Ok(())
    }

    fn build_critic(&self, n_states: usize, n_actions: usize) -> Result<EvtCritic> {
        if self.baseline_mode {
            EvtCritic::baseline(n_states, n_actions, self.m_atoms, self.eta)
        } else {
            EvtCritic::new(n_states, n_actions, self.m_atoms, self.eta, self.warmup_updates, true)
        }
    }
}

/// Linear exploration decay 1.0 -> 0.05 over the first half of training,
/// flat 0.05 afterwards.
pub fn exploration_eps(episode: usize, episodes: usize) -> f64 {
    let half = (episodes / 2).max(1);
    if episode >= half {
        0.05
    } else {
        1.0 + (0.05 - 1.0) * episode as f64 / half as f64
    }
}

/// One training-log entry per episode. `ret` is the cumulative
/// undiscounted environment reward; `start_state_cvar` is in reward
/// orientation (negated back from the critic's loss convention).
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeLog {
    pub episode: usize,
    pub ret: f64,
    pub failures: usize,
    pub start_state_cvar: f64,
    pub eps: f64,
}

/// Training log in its canonical CSV form.
pub fn training_log_csv(log: &[EpisodeLog]) -> String {
    io::csv_text(
        "episode,return,failures,start_state_cvar,eps",
        log.iter().map(|e| {
            format!(
                "{},{},{},{},{}",
                e.episode,
                io::fmt_f64(e.ret),
                e.failures,
                io::fmt_f64(e.start_state_cvar),
                io::fmt_f64(e.eps)
            )
        }),
    )
}

/// Greedy CVaR policy: per state, the action minimizing the composite
/// critic's CVaR of negated returns; ties break to the lowest index.
pub fn policy_improvement(critic: &EvtCritic, risk: RiskSpec) -> Result<Policy> {
    let mut action_of = Vec::with_capacity(critic.n_states());
    for s in 0..critic.n_states() {
        let mut best = 0usize;
        let mut best_v = critic.cvar(s, 0, risk)?;
        for a in 1..critic.n_actions() {
            let v = critic.cvar(s, a, risk)?;
            if v < best_v {
                best = a;
                best_v = v;
            }
        }
        action_of.push(best);
    }
    Ok(Policy::greedy(action_of))
}

/// Run epsilon-greedy episodes with per-transition critic updates and
/// per-episode policy improvement. Returns the final critic, the final
/// greedy policy, and the per-episode log.
pub fn train(
    mdp: &MdpSpec,
    penalty: &PenaltySpec,
    config: &TrainConfig,
    rng: &mut RandomStream,
) -> Result<(EvtCritic, Policy, Vec<EpisodeLog>)> {
    mdp.validate()?;
    penalty.validate(mdp)?;
    config.validate()?;
    let risk = RiskSpec::new(config.x1)?;
    let mut critic = config.build_critic(mdp.n_states, mdp.n_actions)?;
    let mut policy = policy_improvement(&critic, risk)?;
    let mut log = Vec::with_capacity(config.episodes);

    for episode in 0..config.episodes {
        let eps = exploration_eps(episode, config.episodes);
        let mut s = mdp.start_state;
        let mut ep_return = 0.0;
        let mut failures = 0usize;
        for step_index in 0..mdp.horizon {
            if mdp.terminal[s] {
                break;
            }
            let a = if rng.next_f64() < eps {
                rng.index(mdp.n_actions)
            } else {
                policy.action_of[s]
            };
            if penalty.trigger[mdp.idx(s, a)] {
                failures += 1;
            }
            let (s2, r, done) = env::step(mdp, penalty, s, a, step_index, rng)?;
            ep_return += r;
            let batch = [Transition { s, a, r: -r, s2, a2: policy.action_of[s2] }];
            critic = update_critic(
                critic,
                &batch,
                config.gamma,
                config.lr_q,
                config.kappa,
                config.lr_gpd,
                config.k_excess,
                rng,
            )?;
            s = s2;
            if done {
                break;
            }
        }
        policy = policy_improvement(&critic, risk)?;
        policy.exploration_eps = eps;
        let start_cvar = critic.cvar(mdp.start_state, policy.action_of[mdp.start_state], risk)?;
        log.push(EpisodeLog {
            episode,
            ret: ep_return,
            failures,
            start_state_cvar: -start_cvar,
            eps,
        });
    }
    Ok((critic, policy, log))
}

/// One evaluation trajectory row (`episode,step,s,a,r,s2,done` in dumps).
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub episode: usize,
    pub step: usize,
    pub s: usize,
    pub a: usize,
    pub r: f64,
    pub s2: usize,
    pub done: bool,
}

/// Trajectory traces in their canonical CSV form.
pub fn traces_csv(rows: &[TraceRow]) -> String {
    io::csv_text(
        "episode,step,s,a,r,s2,done",
        rows.iter().map(|t| {
            format!(
                "{},{},{},{},{},{},{}",
                t.episode,
                t.step,
                t.s,
                t.a,
                io::fmt_f64(t.r),
                t.s2,
                u8::from(t.done)
            )
        }),
    )
}

/// Greedy-policy evaluation summary. Overshoot fields are None when the
/// penalty trigger is pure set membership (no scalar trigger quantity);
/// in absolute-Gaussian mode the drawn penalty magnitude is the quantity
/// and `alpha_trigger` the threshold. `mean_overshoot` conditions on
/// exceeding steps (primary); `mean_overshoot_all` averages |q - alpha|
/// over all steps (the displayed-formula variant).
#[derive(Debug, Clone)]
pub struct EvalReport {
    pub pct_failure: f64,
    pub mean_overshoot: Option<f64>,
    pub mean_overshoot_all: Option<f64>,
    pub mean_return: f64,
    pub mean_length: f64,
    pub start_state_cvar: f64,
}

/// Roll out the greedy policy for `n_episodes` and report failure and
/// return statistics, plus the critic's start-state CVaR (reward
/// orientation). Also returns the full trajectory trace.
#[allow(clippy::too_many_arguments)]
pub fn evaluate(
    mdp: &MdpSpec,
    penalty: &PenaltySpec,
    policy: &Policy,
    critic: &EvtCritic,
    risk: RiskSpec,
    n_episodes: usize,
    alpha_trigger: f64,
    rng: &mut RandomStream,
) -> Result<(EvalReport, Vec<TraceRow>)> {
    if n_episodes == 0 {
        return Err(Error::invalid("evaluation needs at least one episode"));
    }
    let mut traces = Vec::new();
    let mut total_steps = 0usize;
    let mut total_failures = 0usize;
    let mut total_return = 0.0;
    let mut overshoot_sum = 0.0;
    let mut overshoot_count = 0usize;
    let mut abs_dev_sum = 0.0;
    let quantity_mode = penalty.mode == PenaltyMode::AbsGaussian;

    for episode in 0..n_episodes {
        let mut s = mdp.start_state;
        for step_index in 0..mdp.horizon {
            if mdp.terminal[s] {
                break;
            }
            let a = policy.action_of[s];
            let triggered = penalty.trigger[mdp.idx(s, a)];
            if triggered {
                total_failures += 1;
            }
            let (s2, r, done) = env::step(mdp, penalty, s, a, step_index, rng)?;
            total_return += r;
            total_steps += 1;
            if quantity_mode {
                // recover the drawn penalty magnitude from the reward
                let q = if triggered {
                    mdp.base_reward[mdp.idx(s, a)] + mdp.arrival_reward[s2] - r
                } else {
                    0.0
                };
                if triggered && q > alpha_trigger {
                    overshoot_sum += q - alpha_trigger;
                    overshoot_count += 1;
                }
                abs_dev_sum += (q - alpha_trigger).abs();
            }
            traces.push(TraceRow { episode, step: step_index, s, a, r, s2, done });
            s = s2;
            if done {
                break;
            }
        }
    }

    let start_cvar = critic.cvar(mdp.start_state, policy.action_of[mdp.start_state], risk)?;
    let report = EvalReport {
        pct_failure: 100.0 * total_failures as f64 / total_steps.max(1) as f64,
        mean_overshoot: if quantity_mode && overshoot_count > 0 {
            Some(overshoot_sum / overshoot_count as f64)
        } else if quantity_mode {
            Some(0.0)
        } else {
            None
        },
        mean_overshoot_all: if quantity_mode {
            Some(abs_dev_sum / total_steps.max(1) as f64)
        } else {
            None
        },
        mean_return: total_return / n_episodes as f64,
        mean_length: total_steps as f64 / n_episodes as f64,
        start_state_cvar: -start_cvar,
    };
    Ok((report, traces))
}
