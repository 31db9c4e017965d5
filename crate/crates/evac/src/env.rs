//! Small tabular MDPs with rare-penalty reward structure: a dense
//! transition/reward specification, a penalty channel that fires on
//! designated (state, action) pairs, slippery gridworlds with hazard cells,
//! rare-penalty chains, and Monte Carlo ground-truth return sampling.

use crate::error::{Error, Result};
use crate::parallel;
use crate::rng::RandomStream;

/// Dense tabular MDP. Transition rows are indexed by `s * n_actions + a`
/// and must each sum to 1 within 1e-12.
#[derive(Debug, Clone)]
pub struct MdpSpec {
    pub n_states: usize,
    pub n_actions: usize,
    /// `transition[s * n_actions + a][s2]` = P(s2 | s, a)
    pub transition: Vec<Vec<f64>>,
    /// Deterministic reward component keyed by (s, a).
    pub base_reward: Vec<f64>,
    /// Bonus granted on *entering* a state (e.g. reaching the goal). A
    /// (s, a)-keyed reward cannot express an on-arrival bonus under
    /// stochastic transitions, so it lives in its own term.
    pub arrival_reward: Vec<f64>,
    pub terminal: Vec<bool>,
    pub gamma: f64,
    pub horizon: usize,
    pub start_state: usize,
}

impl MdpSpec {
    pub fn validate(&self) -> Result<()> {
        let pairs = self.n_states * self.n_actions;
        if self.transition.len() != pairs
            || self.base_reward.len() != pairs
            || self.arrival_reward.len() != self.n_states
            || self.terminal.len() != self.n_states
        {
            return Err(Error::invalid("MdpSpec table sizes are inconsistent"));
        }
        if !(0.0 < self.gamma && self.gamma < 1.0) {
            return Err(Error::invalid(format!("gamma {} outside (0, 1)", self.gamma)));
        }
        if self.horizon == 0 || self.start_state >= self.n_states {
            return Err(Error::invalid("bad horizon or start state"));
        }
        for (i, row) in self.transition.iter().enumerate() {
            if row.len() != self.n_states {
                return Err(Error::invalid(format!("transition row {i} has wrong length")));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-12 || row.iter().any(|&p| p < 0.0) {
                return Err(Error::invalid(format!(
                    "transition row {i} is not a probability vector (sum {sum})"
                )));
            }
        }
        Ok(())
    }

    #[inline]
    pub fn idx(&self, s: usize, a: usize) -> usize {
        s * self.n_actions + a
    }

    /// Sample a successor from the transition row using one uniform draw.
    pub fn sample_next(&self, s: usize, a: usize, rng: &mut RandomStream) -> usize {
        let row = &self.transition[self.idx(s, a)];
        let u = rng.next_f64();
        let mut acc = 0.0;
        let mut last = 0;
        for (s2, &p) in row.iter().enumerate() {
            if p <= 0.0 {
                continue;
            }
            acc += p;
            last = s2;
            if u < acc {
                return s2;
            }
        }
        last // guard against accumulated rounding at u ~ 1
    }
}

/// How the penalty draw is generated on a triggering (s, a).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PenaltyMode {
    /// Adds `l` with probability `p` (l <= 0).
    Bernoulli,
    /// Subtracts `gauss_factor * |N(0, gauss_scale)|`.
    AbsGaussian,
}

/// Rare-penalty channel added on top of the base reward.
#[derive(Debug, Clone)]
pub struct PenaltySpec {
    pub mode: PenaltyMode,
    /// Trigger predicate per (s, a), same indexing as the MDP tables.
    pub trigger: Vec<bool>,
    pub p: f64,
    pub l: f64,
    pub gauss_scale: f64,
    pub gauss_factor: f64,
}

impl PenaltySpec {
    /// No penalty anywhere.
    pub fn none(n_states: usize, n_actions: usize) -> Self {
        PenaltySpec {
            mode: PenaltyMode::Bernoulli,
            trigger: vec![false; n_states * n_actions],
            p: 1.0,
            l: 0.0,
            gauss_scale: 0.5,
            gauss_factor: 1.0,
        }
    }

    pub fn validate(&self, mdp: &MdpSpec) -> Result<()> {
        if self.trigger.len() != mdp.n_states * mdp.n_actions {
            return Err(Error::invalid("penalty trigger table has wrong size"));
        }
        if !(self.p > 0.0 && self.p <= 1.0) {
            return Err(Error::invalid(format!("penalty probability {} outside (0, 1]", self.p)));
        }
        if self.mode == PenaltyMode::Bernoulli && self.l > 0.0 {
            return Err(Error::invalid("Bernoulli penalty l must be <= 0"));
        }
        if self.gauss_scale <= 0.0 || self.gauss_factor <= 0.0 {
            return Err(Error::invalid("gauss_scale and gauss_factor must be positive"));
        }
        Ok(())
    }
}

/// One environment step from a non-terminal state.
///
/// Returns `(s2, r, done)` where `r = base_reward(s, a) + arrival_reward(s2)
/// + penalty draw` and `done` is true when `s2` is terminal or the horizon
/// is reached after this step. Draw order is fixed: successor first, then
/// the penalty draw (only on triggering pairs).
pub fn step(
    mdp: &MdpSpec,
    penalty: &PenaltySpec,
    s: usize,
    a: usize,
    step_index: usize,
    rng: &mut RandomStream,
) -> Result<(usize, f64, bool)> {
    if s >= mdp.n_states || a >= mdp.n_actions {
        return Err(Error::invalid(format!("state {s} / action {a} out of range")));
    }
    if mdp.terminal[s] {
        return Err(Error::invalid(format!("cannot step from terminal state {s}")));
    }
    let idx = mdp.idx(s, a);
    let s2 = mdp.sample_next(s, a, rng);
    let mut r = mdp.base_reward[idx] + mdp.arrival_reward[s2];
    if penalty.trigger[idx] {
        match penalty.mode {
            PenaltyMode::Bernoulli => {
                if rng.bernoulli(penalty.p) {
                    r += penalty.l;
                }
            }
            PenaltyMode::AbsGaussian => {
                r -= penalty.gauss_factor * rng.normal(penalty.gauss_scale).abs();
            }
        }
    }
    let done = mdp.terminal[s2] || step_index + 1 >= mdp.horizon;
    Ok((s2, r, done))
}

/// Draws of the H-step Bernoulli-penalty return
/// `J_p = sum_{i=1..h} (a + s_i * l)`, `s_i ~ Bernoulli(p)`.
pub fn simulate_jp(p: f64, h: usize, a: f64, l: f64, n: usize, rng: &mut RandomStream) -> Vec<f64> {
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let mut total = 0.0;
        for _ in 0..h {
            total += a + if rng.bernoulli(p) { l } else { 0.0 };
        }
        out.push(total);
    }
    out
}

/// Hazard-grid scenario selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    /// 2x2 hazard block on the start-goal diagonal, p = 0.05.
    A,
    /// Three single-cell hazards clustered near the goal corner, p = 0.03.
    B,
}

pub const GRID_SIDE: usize = 7;
const GRID_GOAL_BONUS: f64 = 20.0;
const GRID_STEP_REWARD: f64 = -1.0;
const GRID_SLIP: f64 = 0.1;
pub const GRID_ACTIONS: usize = 4; // 0 up, 1 right, 2 down, 3 left
const HAZARD_L: f64 = -50.0;

fn grid_index(row: usize, col: usize) -> usize {
    row * GRID_SIDE + col
}

/// Apply a compass move, staying in place at the walls.
fn grid_move(row: usize, col: usize, action: usize) -> (usize, usize) {
    match action {
        0 => (row.saturating_sub(1), col),
        1 => (row, (col + 1).min(GRID_SIDE - 1)),
        2 => ((row + 1).min(GRID_SIDE - 1), col),
        3 => (row, col.saturating_sub(1)),
        _ => unreachable!("grid actions are 0..4"),
    }
}

/// Hazard cells: Scenario A is the 2x2 block rows/cols {3, 4}; Scenario B is
/// a three-cell barrier segment guarding the goal's direct upper approach.
/// B deliberately leaves the southern approach fully hazard-free (distance
/// >= 2 everywhere), so the hazards are avoidable outright while the north
/// lane stays shorter-looking but slip-exposed.
pub fn hazard_cells(scenario: Scenario) -> Vec<(usize, usize)> {
    match scenario {
        Scenario::A => vec![(3, 3), (3, 4), (4, 3), (4, 4)],
        Scenario::B => vec![(4, 4), (4, 5), (4, 6)],
    }
}

/// 7x7 slippery gridworld with rare hazard penalties.
///
/// Start (0,0), terminal goal (6,6); step reward -1, +20 on reaching the
/// goal; moves slip to a random perpendicular direction with probability
/// 0.1 (0.05 each side); hazard occupancy triggers a Bernoulli(-50) penalty;
/// gamma 0.99, horizon 100.
pub fn make_hazard_grid(scenario: Scenario) -> (MdpSpec, PenaltySpec) {
    let n_states = GRID_SIDE * GRID_SIDE;
    let goal = grid_index(6, 6);
    let mut transition = vec![vec![0.0; n_states]; n_states * GRID_ACTIONS];
    let mut base_reward = vec![GRID_STEP_REWARD; n_states * GRID_ACTIONS];
    let mut arrival_reward = vec![0.0; n_states];
    arrival_reward[goal] = GRID_GOAL_BONUS;
    let mut terminal = vec![false; n_states];
    terminal[goal] = true;

    for row in 0..GRID_SIDE {
        for col in 0..GRID_SIDE {
            let s = grid_index(row, col);
            for a in 0..GRID_ACTIONS {
                let idx = s * GRID_ACTIONS + a;
                if s == goal {
                    transition[idx][s] = 1.0; // never stepped from; keep rows valid
                    base_reward[idx] = 0.0;
                    continue;
                }
                let (ir, ic) = grid_move(row, col, a);
                transition[idx][grid_index(ir, ic)] += 1.0 - GRID_SLIP;
                for perp in perpendicular(a) {
                    let (pr, pc) = grid_move(row, col, perp);
                    transition[idx][grid_index(pr, pc)] += GRID_SLIP / 2.0;
                }
            }
        }
    }

    let mdp = MdpSpec {
        n_states,
        n_actions: GRID_ACTIONS,
        transition,
        base_reward,
        arrival_reward,
        terminal,
        gamma: 0.99,
        horizon: 100,
        start_state: grid_index(0, 0),
    };

    let mut trigger = vec![false; n_states * GRID_ACTIONS];
    for (r, c) in hazard_cells(scenario) {
        for a in 0..GRID_ACTIONS {
            trigger[grid_index(r, c) * GRID_ACTIONS + a] = true;
        }
    }
    let penalty = PenaltySpec {
        mode: PenaltyMode::Bernoulli,
        trigger,
        p: match scenario {
            Scenario::A => 0.05,
            Scenario::B => 0.03,
        },
        l: HAZARD_L,
        gauss_scale: 0.5,
        gauss_factor: 1.0,
    };
    debug_assert!(mdp.validate().is_ok());
    (mdp, penalty)
}

/// Deterministic chain of `len` forward steps with a single action; every
/// step costs -1 and carries a Bernoulli(p) penalty of `l`. The return
/// distribution is a small explicit mixture, which makes the chain the
/// reference environment for critic-fidelity comparisons.
pub fn make_rare_chain(len: usize, p: f64, l: f64, gamma: f64) -> (MdpSpec, PenaltySpec) {
    assert!(len >= 1);
    let n_states = len + 1;
    let n_actions = 1;
    let mut transition = vec![vec![0.0; n_states]; n_states];
    for s in 0..len {
        transition[s][s + 1] = 1.0;
    }
    transition[len][len] = 1.0;
    let mut terminal = vec![false; n_states];
    terminal[len] = true;
    let mdp = MdpSpec {
        n_states,
        n_actions,
        transition,
        base_reward: vec![-1.0; n_states],
        arrival_reward: vec![0.0; n_states],
        terminal,
        gamma,
        horizon: 4 * len,
        start_state: 0,
    };
    let mut trigger = vec![true; n_states];
    trigger[len] = false;
    let penalty = PenaltySpec {
        mode: PenaltyMode::Bernoulli,
        trigger,
        p,
        l,
        gauss_scale: 0.5,
        gauss_factor: 1.0,
    };
    debug_assert!(mdp.validate().is_ok());
    (mdp, penalty)
}

/// Two-state, two-action MDP: both actions reach the terminal state, but
/// action 1 pays a bonus and carries a rare large penalty. Mean-greedy
/// prefers the risky action; CVaR-greedy prefers the safe one.
pub fn make_risky_choice(p: f64, l: f64, risky_bonus: f64, gamma: f64) -> (MdpSpec, PenaltySpec) {
    let n_states = 2;
    let n_actions = 2;
    let transition = vec![
        vec![0.0, 1.0], // (s0, safe)
        vec![0.0, 1.0], // (s0, risky)
        vec![0.0, 1.0],
        vec![0.0, 1.0],
    ];
    let mdp = MdpSpec {
        n_states,
        n_actions,
        transition,
        base_reward: vec![0.0, risky_bonus, 0.0, 0.0],
        arrival_reward: vec![0.0, 0.0],
        terminal: vec![false, true],
        gamma,
        horizon: 2,
        start_state: 0,
    };
    let penalty = PenaltySpec {
        mode: PenaltyMode::Bernoulli,
        trigger: vec![false, true, false, false],
        p,
        l,
        gauss_scale: 0.5,
        gauss_factor: 1.0,
    };
    debug_assert!(mdp.validate().is_ok());
    (mdp, penalty)
}

/// One rollout of the (deterministic) policy, returning the discounted
/// return truncated at the horizon with no bootstrap.
pub fn rollout_return(
    mdp: &MdpSpec,
    penalty: &PenaltySpec,
    policy: &[usize],
    s0: usize,
    gamma: f64,
    rng: &mut RandomStream,
) -> f64 {
    let mut s = s0;
    let mut total = 0.0;
    let mut disc = 1.0;
    for step_index in 0..mdp.horizon {
        if mdp.terminal[s] {
            break;
        }
        let (s2, r, _) = step(mdp, penalty, s, policy[s], step_index, rng)
            .expect("rollout stepped from a valid state");
        total += disc * r;
        disc *= gamma;
        s = s2;
    }
    total
}

/// `n` Monte Carlo draws of the policy's discounted return from `s0`.
/// Each rollout runs on its own child stream, so the result is identical
/// under parallel and sequential execution.
pub fn mc_ground_truth_returns(
    mdp: &MdpSpec,
    penalty: &PenaltySpec,
    policy: &[usize],
    s0: usize,
    gamma: f64,
    n: usize,
    rng: &mut RandomStream,
) -> Vec<f64> {
    let seeds = rng.child_seeds(n);
    parallel::map_indexed(n, |i| {
        let mut local = RandomStream::new(seeds[i]);
        rollout_return(mdp, penalty, policy, s0, gamma, &mut local)
    })
}

fn perpendicular(action: usize) -> [usize; 2] {
    match action {
        0 | 2 => [3, 1],
        1 | 3 => [0, 2],
        _ => unreachable!("grid actions are 0..4"),
    }
}
