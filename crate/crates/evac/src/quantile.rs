//! Quantile-table distribution model: pinball and Huber quantile losses,
//! per-atom quantile-regression updates, inverse-transform sampling, and
//! CVaR of the interpolated quantile function.
//!
//! A table holds `M` values at the fixed midpoint levels
//! `tau_i = (2i - 1) / (2M)`. Training never reorders the atoms; readers
//! that need a monotone quantile function sort a copy at read time.

use crate::error::{Error, Result};

/// Quantile atoms at midpoint levels. Values are in whatever orientation the
/// caller trains them (the critic uses negated returns).
#[derive(Debug, Clone, PartialEq)]
pub struct QuantileTable {
    levels: Vec<f64>,
    values: Vec<f64>,
}

/// The midpoint level grid `(2i - 1) / (2m)`, `i = 1..=m`.
pub fn midpoint_levels(m: usize) -> Vec<f64> {
    (1..=m).map(|i| (2 * i - 1) as f64 / (2 * m) as f64).collect()
}

impl QuantileTable {
    /// Table of `m` atoms, all initialized to `init`.
    pub fn midpoint(m: usize, init: f64) -> Result<Self> {
        if m < 2 {
            return Err(Error::invalid("quantile table needs at least 2 atoms"));
        }
        Ok(QuantileTable {
            levels: midpoint_levels(m),
            values: vec![init; m],
        })
    }

    /// Table whose atoms take the given values (midpoint levels of same length).
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::invalid("quantile table needs at least 2 atoms"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("quantile table values must be finite"));
        }
        Ok(QuantileTable {
            levels: midpoint_levels(values.len()),
            values,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn set_value(&mut self, i: usize, v: f64) {
        self.values[i] = v;
    }

    /// Copy with values sorted ascending (monotone quantile function).
    pub fn sorted(&self) -> QuantileTable {
        let mut values = self.values.clone();
        values.sort_unstable_by(f64::total_cmp);
        QuantileTable {
            levels: self.levels.clone(),
            values,
        }
    }

    /// Number of adjacent inversions (0 when already monotone).
    pub fn crossing_count(&self) -> usize {
        self.values.windows(2).filter(|w| w[0] > w[1]).count()
    }

    /// Linear interpolation of the values between bracketing levels, with
    /// constant extrapolation below `tau_1` and above `tau_M`. Monotone in
    /// `tau` whenever the values are sorted.
    pub fn interpolate(&self, tau: f64) -> f64 {
        let lv = &self.levels;
        let vs = &self.values;
        if tau <= lv[0] {
            return vs[0];
        }
        if tau >= lv[lv.len() - 1] {
            return vs[vs.len() - 1];
        }
        // levels are an ascending uniform grid; locate the bracket directly
        let m = lv.len();
        let pos = (tau * m as f64 - 0.5).floor();
        let i = (pos as usize).min(m - 2);
        let w = (tau - lv[i]) / (lv[i + 1] - lv[i]);
        vs[i] + w * (vs[i + 1] - vs[i])
    }
}

/// Inverse-transform sample of the interpolated quantile function at `tau`.
pub fn inverse_transform_sample(table: &QuantileTable, tau: f64) -> f64 {
    table.interpolate(tau)
}

/// CDF of the distribution induced by inverse-transform sampling from a
/// sorted table: the largest level whose interpolated quantile is <= x.
/// Right-continuous and non-decreasing; mass below the first atom and
/// above the last maps to 0 and 1 (the constant-extrapolation plateaus).
pub fn sorted_table_cdf(sorted: &QuantileTable, x: f64) -> f64 {
    let vs = sorted.values();
    let lv = sorted.levels();
    let m = vs.len();
    if x < vs[0] {
        return 0.0;
    }
    if x >= vs[m - 1] {
        return 1.0;
    }
    // rightmost j with vs[j] <= x; flat runs resolve to their last index
    let j = vs.partition_point(|&v| v <= x) - 1;
    lv[j] + (lv[j + 1] - lv[j]) * (x - vs[j]) / (vs[j + 1] - vs[j])
}

/// Mean pinball loss of threshold `theta` at level `tau`:
/// `(1/N) sum (y - theta) (tau - 1[y - theta < 0])`.
pub fn pinball_loss(samples: &[f64], theta: f64, tau: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::invalid("pinball_loss needs samples"));
    }
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::invalid(format!("tau {tau} outside [0, 1]")));
    }
    let mut acc = 0.0;
    for &y in samples {
        let u = y - theta;
        acc += u * (tau - f64::from(u < 0.0));
    }
    Ok(acc / samples.len() as f64)
}

/// Mean Huber quantile loss: `|tau - 1[u < 0]| * L_k(u) / k` with
/// `L_k(u) = u^2/2` for `|u| <= k`, else `k(|u| - k/2)`.
pub fn huber_quantile_loss(samples: &[f64], theta: f64, tau: f64, kappa: f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::invalid("huber_quantile_loss needs samples"));
    }
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::invalid(format!("tau {tau} outside [0, 1]")));
    }
    if kappa <= 0.0 {
        return Err(Error::invalid("kappa must be positive"));
    }
    let mut acc = 0.0;
    for &y in samples {
        let u = y - theta;
        let l = if u.abs() <= kappa {
            0.5 * u * u
        } else {
            kappa * (u.abs() - 0.5 * kappa)
        };
        acc += (tau - f64::from(u < 0.0)).abs() * l / kappa;
    }
    Ok(acc / samples.len() as f64)
}

/// One gradient step per atom on its quantile loss against `targets`.
///
/// `kappa > 0` uses the Huber quantile loss; `kappa = 0` uses the exact
/// pinball subgradient (zero at `u = 0`, so an exactly-hit quantile is a
/// fixed point). `lr = 0` returns the table unchanged.
pub fn qr_update(table: &QuantileTable, targets: &[f64], lr: f64, kappa: f64) -> Result<QuantileTable> {
    if targets.is_empty() {
        return Err(Error::invalid("qr_update needs targets"));
    }
    if kappa < 0.0 {
        return Err(Error::invalid("kappa must be >= 0"));
    }
    let n = targets.len() as f64;
    let mut out = table.clone();
    for i in 0..out.values.len() {
        let tau = out.levels[i];
        let theta = out.values[i];
        let mut g = 0.0;
        for &y in targets {
            let u = y - theta;
            if kappa == 0.0 {
                g += if u > 0.0 {
                    tau
                } else if u < 0.0 {
                    tau - 1.0
                } else {
                    0.0
                };
            } else {
                // d/dtheta of the Huber quantile loss, negated (ascent on -loss)
                g += (tau - f64::from(u < 0.0)).abs() * u.clamp(-kappa, kappa) / kappa;
            }
        }
        out.values[i] = theta + lr * g / n;
    }
    Ok(out)
}

/// Risk level for CVaR: integrate the quantile function over `[x1, x2]`
/// with `x2` fixed at 1 (the worst `1 - x1` fraction of negated returns).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiskSpec {
    x1: f64,
}

impl RiskSpec {
    pub const X2: f64 = 1.0;

    pub fn new(x1: f64) -> Result<Self> {
        if !(0.5..1.0).contains(&x1) {
            return Err(Error::invalid(format!("x1 {x1} outside [0.5, 1)")));
        }
        Ok(RiskSpec { x1 })
    }

    pub fn x1(&self) -> f64 {
        self.x1
    }
}

/// Integral of the sorted piecewise-linear quantile function over
/// `[lo, hi]`, with constant extrapolation outside the level grid.
/// Trapezoid over the interpolation knots, which is exact for a
/// piecewise-linear integrand.
pub(crate) fn integrate_sorted_quantile(sorted: &QuantileTable, lo: f64, hi: f64) -> f64 {
    debug_assert!(lo <= hi);
    let mut knots: Vec<f64> = Vec::with_capacity(sorted.len() + 2);
    knots.push(lo);
    for &l in sorted.levels() {
        if l > lo && l < hi {
            knots.push(l);
        }
    }
    knots.push(hi);
    let mut acc = 0.0;
    for w in knots.windows(2) {
        acc += 0.5 * (sorted.interpolate(w[0]) + sorted.interpolate(w[1])) * (w[1] - w[0]);
    }
    acc
}

/// CVaR at `risk.x1` of the table's distribution: the mean of the sorted,
/// interpolated quantile function over `[x1, 1]`.
pub fn cvar(table: &QuantileTable, risk: RiskSpec) -> f64 {
    let sorted = table.sorted();
    integrate_sorted_quantile(&sorted, risk.x1, RiskSpec::X2) / (RiskSpec::X2 - risk.x1)
}

/// Asymptotic variance of the level-`tau` quantile estimator,
/// `tau (1 - tau) / f(q_tau)^2`, given the density at the quantile.
pub fn qr_asymptotic_variance(tau: f64, density_at_quantile: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&tau) || tau == 0.0 {
        return Err(Error::invalid(format!("tau {tau} outside (0, 1)")));
    }
    if density_at_quantile <= 0.0 {
        return Err(Error::invalid("density at the quantile must be positive"));
    }
    Ok(tau * (1.0 - tau) / (density_at_quantile * density_at_quantile))
}

/// Argmin of the pinball loss over a uniform grid of `grid_steps + 1`
/// thresholds spanning the sample range (ties resolve to the lowest
/// threshold). Prefix sums over the sorted data make each evaluation
/// O(log n), so a 1e4-point grid stays cheap.
pub fn pinball_argmin_grid(samples: &[f64], tau: f64, grid_steps: usize) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::invalid("pinball_argmin_grid needs samples"));
    }
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::invalid(format!("tau {tau} outside [0, 1]")));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let n = sorted.len();
    let mut prefix = vec![0.0; n + 1];
    for (i, &v) in sorted.iter().enumerate() {
        prefix[i + 1] = prefix[i] + v;
    }
    let total = prefix[n];
    let (lo, hi) = (sorted[0], sorted[n - 1]);
    if lo == hi {
        return Ok(lo);
    }
    let step = (hi - lo) / grid_steps as f64;
    let mut best = (f64::INFINITY, lo);
    for k in 0..=grid_steps {
        let theta = lo + k as f64 * step;
        // number of samples strictly below theta
        let below = sorted.partition_point(|&v| v < theta);
        let sum_below = prefix[below];
        let nb = below as f64;
        let loss = tau * ((total - sum_below) - theta * (n as f64 - nb))
            + (1.0 - tau) * (theta * nb - sum_below);
        if loss < best.0 {
            best = (loss, theta);
        }
    }
    Ok(best.1)
}
