//! Composite body+tail return-distribution critic: per-(state, action)
//! quantile tables for levels up to a threshold `eta`, and a Generalized
//! Pareto tail for levels above it, fitted online from table excesses.
//! Distributions are stored in negated-reward orientation (large values =
//! bad outcomes), so the upper tail is the risk region.

use std::sync::atomic::{AtomicU64, Ordering};

use crate::env::MdpSpec;
use crate::error::{Error, Result};
use crate::gpd::{self, FitOptions, GpdParams};
use crate::io;
use crate::quantile::{self, midpoint_levels, sorted_table_cdf, QuantileTable, RiskSpec};
use crate::rng::RandomStream;

/// One experienced transition in critic (negated-reward) orientation:
/// `r` is the negated environment reward and `a2` the bootstrap action.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub s: usize,
    pub a: usize,
    pub r: f64,
    pub s2: usize,
    pub a2: usize,
}

/// Composite critic: body table + GPD tail per (state, action).
///
/// The tail branch stays inactive for a pair until its table has received
/// `warmup_updates` updates and a first fit has run; until then every read
/// (targets, quantiles, CVaR) comes from the table alone. Constructing with
/// `tail_enabled = false` pins that behaviour forever, which is exactly the
/// plain quantile-regression baseline.
#[derive(Debug)]
pub struct EvtCritic {
    n_states: usize,
    n_actions: usize,
    eta: f64,
    warmup_updates: u64,
    tail_enabled: bool,
    /// Fixed true: stored distributions are of negated returns.
    pub negate_rewards: bool,
    tables: Vec<QuantileTable>,
    gpds: Vec<GpdParams>,
    gpd_ready: Vec<bool>,
    update_counts: Vec<u64>,
    // instrumentation: tail reads and fits observed, for baseline audits
    gpd_reads: AtomicU64,
    gpd_updates: AtomicU64,
}

impl Clone for EvtCritic {
    fn clone(&self) -> Self {
        EvtCritic {
            n_states: self.n_states,
            n_actions: self.n_actions,
            eta: self.eta,
            warmup_updates: self.warmup_updates,
            tail_enabled: self.tail_enabled,
            negate_rewards: self.negate_rewards,
            tables: self.tables.clone(),
            gpds: self.gpds.clone(),
            gpd_ready: self.gpd_ready.clone(),
            update_counts: self.update_counts.clone(),
            gpd_reads: AtomicU64::new(self.gpd_reads.load(Ordering::Relaxed)),
            gpd_updates: AtomicU64::new(self.gpd_updates.load(Ordering::Relaxed)),
        }
    }
}

impl EvtCritic {
    /// Fresh critic with `m` atoms per pair, all initialized to 0.
    pub fn new(
        n_states: usize,
        n_actions: usize,
        m: usize,
        eta: f64,
        warmup_updates: u64,
        tail_enabled: bool,
    ) -> Result<Self> {
        if n_states == 0 || n_actions == 0 {
            return Err(Error::invalid("critic needs at least one state and action"));
        }
        let levels = midpoint_levels(m);
        if m < 2 {
            return Err(Error::invalid("critic needs at least 2 atoms"));
        }
        if !(0.5 < eta && eta < 1.0) {
            return Err(Error::invalid(format!("eta {eta} outside (0.5, 1)")));
        }
        if eta <= levels[0] || eta >= levels[m - 1] {
            return Err(Error::invalid(format!(
                "eta {eta} must lie strictly inside the level grid ({}, {})",
                levels[0],
                levels[m - 1]
            )));
        }
        let pairs = n_states * n_actions;
        let table = QuantileTable::midpoint(m, 0.0)?;
        Ok(EvtCritic {
            n_states,
            n_actions,
            eta,
            warmup_updates,
            tail_enabled,
            negate_rewards: true,
            tables: vec![table; pairs],
            gpds: vec![GpdParams::new(0.1, 1.0)?; pairs],
            gpd_ready: vec![false; pairs],
            update_counts: vec![0; pairs],
            gpd_reads: AtomicU64::new(0),
            gpd_updates: AtomicU64::new(0),
        })
    }

    /// The QR-only baseline: identical update path with the tail branch
    /// permanently disabled.
    pub fn baseline(n_states: usize, n_actions: usize, m: usize, eta: f64) -> Result<Self> {
        EvtCritic::new(n_states, n_actions, m, eta, u64::MAX, false)
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn atoms(&self) -> usize {
        self.tables[0].len()
    }

    pub fn tail_enabled(&self) -> bool {
        self.tail_enabled
    }

    pub fn warmup_updates(&self) -> u64 {
        self.warmup_updates
    }

    /// Tail reads observed so far (instrumentation; 0 in baseline mode).
    pub fn gpd_read_count(&self) -> u64 {
        self.gpd_reads.load(Ordering::Relaxed)
    }

    /// GPD fit steps applied so far (instrumentation; 0 in baseline mode).
    pub fn gpd_update_count(&self) -> u64 {
        self.gpd_updates.load(Ordering::Relaxed)
    }

    fn pair(&self, s: usize, a: usize) -> Result<usize> {
        if s >= self.n_states || a >= self.n_actions {
            return Err(Error::invalid(format!("state {s} / action {a} out of range")));
        }
        Ok(s * self.n_actions + a)
    }

    pub fn table(&self, s: usize, a: usize) -> Result<&QuantileTable> {
        Ok(&self.tables[self.pair(s, a)?])
    }

    pub fn gpd(&self, s: usize, a: usize) -> Result<GpdParams> {
        Ok(self.gpds[self.pair(s, a)?])
    }

    pub fn update_count(&self, s: usize, a: usize) -> Result<u64> {
        Ok(self.update_counts[self.pair(s, a)?])
    }

    /// Whether tail reads for this pair go through the GPD.
    pub fn tail_active(&self, s: usize, a: usize) -> Result<bool> {
        Ok(self.tail_enabled && self.gpd_ready[self.pair(s, a)?])
    }

    /// Replace one pair's table (test/snapshot plumbing). The grid must
    /// match the critic's atom count.
    pub fn set_table(&mut self, s: usize, a: usize, table: QuantileTable) -> Result<()> {
        let idx = self.pair(s, a)?;
        if table.len() != self.tables[idx].len() {
            return Err(Error::invalid("replacement table has a different atom count"));
        }
        self.tables[idx] = table;
        Ok(())
    }

    /// Install tail parameters for one pair and mark its tail usable.
    pub fn set_gpd(&mut self, s: usize, a: usize, params: GpdParams) -> Result<()> {
        let idx = self.pair(s, a)?;
        self.gpds[idx] = params;
        self.gpd_ready[idx] = true;
        Ok(())
    }

    /// Threshold value u: the sorted table's interpolated quantile at eta.
    pub fn tail_threshold(&self, s: usize, a: usize) -> Result<f64> {
        let idx = self.pair(s, a)?;
        Ok(quantile::inverse_transform_sample(&self.tables[idx].sorted(), self.eta))
    }

    /// Quantile of the composite distribution: sorted table at tau <= eta,
    /// threshold plus GPD quantile at (tau-eta)/(1-eta) above (when the
    /// tail is active; otherwise the table covers the whole range).
    pub fn composite_quantile(&self, s: usize, a: usize, tau: f64) -> Result<f64> {
        let idx = self.pair(s, a)?;
        if !(0.0..=1.0).contains(&tau) {
            return Err(Error::invalid(format!("tau {tau} outside [0, 1]")));
        }
        let sorted = self.tables[idx].sorted();
        if tau <= self.eta || !(self.tail_enabled && self.gpd_ready[idx]) {
            return Ok(sorted.interpolate(tau));
        }
        self.gpd_reads.fetch_add(1, Ordering::Relaxed);
        let u = sorted.interpolate(self.eta);
        let t = (tau - self.eta) / (1.0 - self.eta);
        Ok(u + self.gpds[idx].quantile(t)?)
    }

    /// CDF of the composite distribution: eta + (1-eta)H(x-u) at and above
    /// the threshold, the table's piecewise-linear inverse below.
    pub fn composite_cdf(&self, s: usize, a: usize, x: f64) -> Result<f64> {
        let idx = self.pair(s, a)?;
        let sorted = self.tables[idx].sorted();
        if self.tail_enabled && self.gpd_ready[idx] {
            let u = sorted.interpolate(self.eta);
            if x >= u {
                self.gpd_reads.fetch_add(1, Ordering::Relaxed);
                return Ok(self.eta + (1.0 - self.eta) * self.gpds[idx].cdf(x - u));
            }
            return Ok(sorted_table_cdf(&sorted, x).min(self.eta));
        }
        Ok(sorted_table_cdf(&sorted, x))
    }

    /// One draw from the composite distribution. Always consumes exactly
    /// two uniforms: the body/tail Bernoulli(eta) and the conditional
    /// level, keeping rng streams aligned across tail activation states.
    pub fn sample_composite(&self, s: usize, a: usize, rng: &mut RandomStream) -> Result<f64> {
        let idx = self.pair(s, a)?;
        let u1 = rng.next_f64();
        let u2 = rng.next_f64();
        let sorted = self.tables[idx].sorted();
        if u1 < self.eta {
            return Ok(sorted.interpolate(self.eta * u2));
        }
        if self.tail_enabled && self.gpd_ready[idx] {
            self.gpd_reads.fetch_add(1, Ordering::Relaxed);
            let u = sorted.interpolate(self.eta);
            return Ok(u + self.gpds[idx].quantile_unchecked(u2));
        }
        // tail branch before activation: read the table above eta instead
        Ok(sorted.interpolate(self.eta + (1.0 - self.eta) * u2))
    }

    /// Distributional TD target `r + gamma * Z(s2, a2)` with Z sampled
    /// from the composite next-state distribution. `r` must already be in
    /// negated-reward orientation.
    pub fn sample_target(
        &self,
        s2: usize,
        a2: usize,
        r: f64,
        gamma: f64,
        rng: &mut RandomStream,
    ) -> Result<f64> {
        if !(0.0..=1.0).contains(&gamma) {
            return Err(Error::invalid(format!("gamma {gamma} outside [0, 1]")));
        }
        Ok(r + gamma * self.sample_composite(s2, a2, rng)?)
    }

    /// `n` tail excesses read from the sorted table (not the GPD, which
    /// would be self-confirming): table quantile at tau ~ U(eta, 1) minus
    /// the threshold, clamped at >= 0.
    pub fn excess_samples(
        &self,
        s: usize,
        a: usize,
        n: usize,
        rng: &mut RandomStream,
    ) -> Result<Vec<f64>> {
        if n == 0 {
            return Err(Error::invalid("excess sample count must be >= 1"));
        }
        let idx = self.pair(s, a)?;
        let sorted = self.tables[idx].sorted();
        let u = sorted.interpolate(self.eta);
        Ok((0..n)
            .map(|_| {
                let tau = self.eta + (1.0 - self.eta) * rng.next_f64();
                (sorted.interpolate(tau) - u).max(0.0)
            })
            .collect())
    }

    /// CVaR at `risk.x1` of the composite (negated-return) distribution:
    /// mean of the quantile function over [x1, 1], with the tail segment
    /// integrated in closed form through the GPD partial mean.
    pub fn cvar(&self, s: usize, a: usize, risk: RiskSpec) -> Result<f64> {
        let idx = self.pair(s, a)?;
        if !(self.tail_enabled && self.gpd_ready[idx]) {
            return Ok(quantile::cvar(&self.tables[idx], risk));
        }
        self.gpd_reads.fetch_add(1, Ordering::Relaxed);
        let sorted = self.tables[idx].sorted();
        let u = sorted.interpolate(self.eta);
        let x1 = risk.x1();
        let g = self.gpds[idx];
        let scale = 1.0 - self.eta;
        let total = if x1 >= self.eta {
            let t1 = (x1 - self.eta) / scale;
            scale * ((1.0 - t1) * u + g.partial_mean(t1))
        } else {
            quantile::integrate_sorted_quantile(&sorted, x1, self.eta)
                + scale * (u + g.partial_mean(0.0))
        };
        Ok(total / (RiskSpec::X2 - x1))
    }

    /// Table CSV bundle half: `s,a,tau,theta` rows for every pair.
    pub fn dump_tables_csv(&self) -> String {
        let mut rows = Vec::with_capacity(self.tables.len() * self.atoms());
        for s in 0..self.n_states {
            for a in 0..self.n_actions {
                let t = &self.tables[s * self.n_actions + a];
                for (lv, v) in t.levels().iter().zip(t.values()) {
                    rows.push(format!("{s},{a},{},{}", io::fmt_f64(*lv), io::fmt_f64(*v)));
                }
            }
        }
        io::csv_text("s,a,tau,theta", rows)
    }

    /// GPD CSV bundle half: `s,a,xi,sigma` rows for pairs whose tail has
    /// been fitted; unfitted pairs are omitted so a reload restores the
    /// same activation state.
    pub fn dump_gpds_csv(&self) -> String {
        let mut rows = Vec::new();
        for s in 0..self.n_states {
            for a in 0..self.n_actions {
                let idx = s * self.n_actions + a;
                if self.gpd_ready[idx] {
                    rows.push(format!(
                        "{s},{a},{},{}",
                        io::fmt_f64(self.gpds[idx].xi()),
                        io::fmt_f64(self.gpds[idx].sigma())
                    ));
                }
            }
        }
        io::csv_text("s,a,xi,sigma", rows)
    }

    /// Rebuild a critic from the CSV bundle written by the dump methods.
    /// Tail parameters activate exactly the pairs present in the GPD file.
    pub fn load_csv(
        tables_csv: &str,
        gpds_csv: &str,
        eta: f64,
        warmup_updates: u64,
        tail_enabled: bool,
    ) -> Result<EvtCritic> {
        let table_rows = io::csv_rows(tables_csv, "s,a,tau,theta")?;
        if table_rows.is_empty() {
            return Err(Error::invalid("table bundle has no rows"));
        }
        let mut parsed: Vec<(usize, usize, f64, f64)> = Vec::with_capacity(table_rows.len());
        let mut n_states = 0;
        let mut n_actions = 0;
        for row in &table_rows {
            if row.len() != 4 {
                return Err(Error::invalid("table bundle row must have 4 fields"));
            }
            let s = io::parse_usize(&row[0])?;
            let a = io::parse_usize(&row[1])?;
            let tau = io::parse_f64(&row[2])?;
            let theta = io::parse_f64(&row[3])?;
            n_states = n_states.max(s + 1);
            n_actions = n_actions.max(a + 1);
            parsed.push((s, a, tau, theta));
        }
        let pairs = n_states * n_actions;
        if parsed.len() % pairs != 0 {
            return Err(Error::invalid("table bundle does not cover all pairs evenly"));
        }
        let m = parsed.len() / pairs;
        let levels = midpoint_levels(m);
        let mut grouped: Vec<Vec<(f64, f64)>> = vec![Vec::with_capacity(m); pairs];
        for (s, a, tau, theta) in parsed {
            grouped[s * n_actions + a].push((tau, theta));
        }
        let mut critic = EvtCritic::new(n_states, n_actions, m, eta, warmup_updates, tail_enabled)?;
        for (idx, mut atoms) in grouped.into_iter().enumerate() {
            if atoms.len() != m {
                return Err(Error::invalid("table bundle pair with wrong atom count"));
            }
            atoms.sort_by(|x, y| x.0.total_cmp(&y.0));
            for (i, (tau, _)) in atoms.iter().enumerate() {
                if *tau != levels[i] {
                    return Err(Error::invalid(format!(
                        "table bundle tau {tau} does not match the midpoint grid"
                    )));
                }
            }
            let values: Vec<f64> = atoms.iter().map(|&(_, v)| v).collect();
            critic.tables[idx] = QuantileTable::from_values(values)?;
        }
        for row in io::csv_rows(gpds_csv, "s,a,xi,sigma")? {
            if row.len() != 4 {
                return Err(Error::invalid("gpd bundle row must have 4 fields"));
            }
            let s = io::parse_usize(&row[0])?;
            let a = io::parse_usize(&row[1])?;
            let params = GpdParams::new(io::parse_f64(&row[2])?, io::parse_f64(&row[3])?)?;
            critic.set_gpd(s, a, params)?;
        }
        Ok(critic)
    }
}

/// Joint critic update of one batch: per transition, draw one composite
/// TD target and apply a quantile-regression step to the (s, a) table;
/// then, for each pair touched by the batch and past its warmup, draw
/// `k_excess` table excesses and apply one warm-started MLE ascent step
/// to its tail parameters. Consumes the critic and returns the updated one.
pub fn update_critic(
    critic: EvtCritic,
    batch: &[Transition],
    gamma: f64,
    lr_q: f64,
    kappa: f64,
    lr_gpd: f64,
    k_excess: usize,
    rng: &mut RandomStream,
) -> Result<EvtCritic> {
    if batch.is_empty() {
        return Err(Error::invalid("update batch must be non-empty"));
    }
    if lr_q < 0.0 || lr_gpd < 0.0 || kappa < 0.0 || k_excess == 0 {
        return Err(Error::invalid("negative learning rate, kappa, or zero k_excess"));
    }
    let mut critic = critic;
    let mut touched: Vec<usize> = Vec::new();
    for t in batch {
        let idx = critic.pair(t.s, t.a)?;
        let y = critic.sample_target(t.s2, t.a2, t.r, gamma, rng)?;
        critic.tables[idx] = quantile::qr_update(&critic.tables[idx], &[y], lr_q, kappa)?;
        critic.update_counts[idx] += 1;
        if !touched.contains(&idx) {
            touched.push(idx);
        }
    }
    if critic.tail_enabled && lr_gpd > 0.0 {
        let opts = FitOptions {
            lr: lr_gpd,
            steps: 1,
            ..FitOptions::default()
        };
        for &idx in &touched {
            if critic.update_counts[idx] < critic.warmup_updates {
                continue;
            }
            let (s, a) = (idx / critic.n_actions, idx % critic.n_actions);
            let excess = critic.excess_samples(s, a, k_excess, rng)?;
            let init = if critic.gpd_ready[idx] {
                critic.gpds[idx]
            } else {
                GpdParams::init_from_data(&excess)
            };
            let fit = gpd::mle_fit(&excess, init, &opts)?;
            critic.gpds[idx] = fit.params;
            critic.gpd_ready[idx] = true;
            critic.gpd_updates.fetch_add(1, Ordering::Relaxed);
        }
    }
    Ok(critic)
}

/// Empirical check of the gamma-contraction of the distributional Bellman
/// operator under the maximal 1-Wasserstein metric.
///
/// Per-pair distances are 1-Wasserstein estimates over `n_samples`
/// stratified quantile levels; the operator image marginalizes successors
/// exactly through the transition rows, so reward draws cancel and the
/// check is deterministic. Returns max-over-pairs dbar(TZ1, TZ2) divided
/// by max-over-pairs dbar(Z1, Z2).
pub fn bellman_contraction_check(
    z1: &EvtCritic,
    z2: &EvtCritic,
    mdp: &MdpSpec,
    policy: &[usize],
    n_samples: usize,
) -> Result<f64> {
    if z1.n_states != mdp.n_states
        || z2.n_states != mdp.n_states
        || z1.n_actions != mdp.n_actions
        || z2.n_actions != mdp.n_actions
    {
        return Err(Error::invalid("critics and MDP disagree on state/action counts"));
    }
    if policy.len() != mdp.n_states || policy.iter().any(|&a| a >= mdp.n_actions) {
        return Err(Error::invalid("policy does not cover the MDP"));
    }
    if n_samples == 0 {
        return Err(Error::invalid("contraction check needs n_samples >= 1"));
    }
    let taus = midpoint_levels(n_samples);
    // dbar(Z1, Z2) per pair: mean |Q1 - Q2| over the stratified levels
    let mut dist = vec![0.0; mdp.n_states * mdp.n_actions];
    for s in 0..mdp.n_states {
        for a in 0..mdp.n_actions {
            let mut acc = 0.0;
            for &tau in &taus {
                acc += (z1.composite_quantile(s, a, tau)? - z2.composite_quantile(s, a, tau)?)
                    .abs();
            }
            dist[s * mdp.n_actions + a] = acc / n_samples as f64;
        }
    }
    let denom = dist.iter().fold(0.0_f64, |m, &d| m.max(d));
    if denom <= 0.0 {
        return Err(Error::invalid(
            "identical critics: contraction ratio is undefined (0/0)",
        ));
    }
    let mut num = 0.0_f64;
    for s in 0..mdp.n_states {
        for a in 0..mdp.n_actions {
            let row = &mdp.transition[s * mdp.n_actions + a];
            let mut acc = 0.0;
            for (s2, &p) in row.iter().enumerate() {
                if p > 0.0 {
                    acc += p * dist[s2 * mdp.n_actions + policy[s2]];
                }
            }
            num = num.max(mdp.gamma * acc);
        }
    }
    Ok(num / denom)
}
