//! Analytical claims as executable checks: asymptotic variance factors of
//! direct vs tail-assisted quantile estimation, 1-Wasserstein distance,
//! a bootstrap variance study of the two estimators, and a distributional
//! fidelity report comparing a critic against Monte Carlo ground truth.

use crate::critic::EvtCritic;
use crate::env::{self, MdpSpec, PenaltySpec};
use crate::error::{Error, Result};
use crate::gpd::{mle_fit, FitOptions, GpdParams};
use crate::parallel;
use crate::quantile::pinball_argmin_grid;
use crate::rng::RandomStream;

/// Grid resolution for quantile-function integrals over unequal samples.
const W1_GRID: usize = 10_000;
/// Densities below this are treated as numerically unusable.
const DENSITY_FLOOR: f64 = 1e-300;
/// Tail-fit resamples need at least this many excesses to be included.
const MIN_EXCESSES: usize = 30;

fn check_levels(eta: f64, t: f64) -> Result<f64> {
    if !(0.0 < eta && eta < 1.0) {
        return Err(Error::invalid(format!("eta {eta} outside (0, 1)")));
    }
    if !(0.0 < t && eta + t < 1.0) {
        return Err(Error::invalid(format!(
            "t {t} must satisfy 0 < t and eta + t < 1 (eta = {eta})"
        )));
    }
    Ok(t / (1.0 - eta))
}

fn tail_density_at(gpd: GpdParams, q: f64) -> Result<f64> {
    let theta = gpd.quantile(q)?;
    let (log_f, violation) = gpd.log_pdf(theta);
    let f = if violation { 0.0 } else { log_f.exp() };
    if !(f > DENSITY_FLOOR) {
        return Err(Error::Numerical(format!(
            "tail density {f:e} at quantile level {q} underflows"
        )));
    }
    Ok(f)
}

/// Asymptotic variance factor of the direct quantile estimator at level
/// `eta + t` of a body/tail composite whose tail beyond level `eta`
/// follows `gpd`: (eta + t)(1 - eta - t) / [(1 - eta)^2 f_H(theta_q)^2]
/// with q = t / (1 - eta).
pub fn lambda_y_sq(eta: f64, t: f64, gpd: GpdParams) -> Result<f64> {
    let q = check_levels(eta, t)?;
    let f = tail_density_at(gpd, q)?;
    Ok((eta + t) * (1.0 - eta - t) / ((1.0 - eta) * (1.0 - eta) * f * f))
}

/// Asymptotic variance factor of the tail-model quantile estimator at
/// excess level q = t / (1 - eta): q(1 - q) / f_H(theta_q)^2. Always at
/// most [`lambda_y_sq`] (their ratio is t / (eta + t) < 1).
pub fn lambda_h_sq(eta: f64, t: f64, gpd: GpdParams) -> Result<f64> {
    let q = check_levels(eta, t)?;
    let f = tail_density_at(gpd, q)?;
    Ok(q * (1.0 - q) / (f * f))
}

/// Empirical quantile of a sorted sample with midpoint-atom linear
/// interpolation: atom i sits at level (2i + 1) / (2n), constant beyond
/// the extreme atoms.
pub fn empirical_quantile(sorted: &[f64], tau: f64) -> f64 {
    let n = sorted.len();
    assert!(n > 0, "empirical_quantile needs a non-empty sample");
    let p = (tau * n as f64 - 0.5).clamp(0.0, (n - 1) as f64);
    let i = p.floor() as usize;
    let frac = p - i as f64;
    if frac == 0.0 || i + 1 == n {
        sorted[i]
    } else {
        sorted[i] + frac * (sorted[i + 1] - sorted[i])
    }
}

/// 1-Wasserstein distance between two empirical distributions. Equal-size
/// samples use the exact mean of sorted pairwise distances; unequal sizes
/// integrate |Q_x - Q_y| over a midpoint level grid of 1e4 points.
pub fn wasserstein1(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.is_empty() || ys.is_empty() {
        return Err(Error::invalid("wasserstein1 needs non-empty samples"));
    }
    if xs.iter().chain(ys.iter()).any(|v| !v.is_finite()) {
        return Err(Error::invalid("wasserstein1 needs finite samples"));
    }
    let mut a = xs.to_vec();
    let mut b = ys.to_vec();
    parallel::sort_f64(&mut a);
    parallel::sort_f64(&mut b);
    if a.len() == b.len() {
        let n = a.len() as f64;
        return Ok(a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum::<f64>() / n);
    }
    let mut acc = 0.0;
    for i in 0..W1_GRID {
        let tau = (2 * i + 1) as f64 / (2 * W1_GRID) as f64;
        acc += (empirical_quantile(&a, tau) - empirical_quantile(&b, tau)).abs();
    }
    Ok(acc / W1_GRID as f64)
}

/// Sampler for a body/tail composite: uniform on [0, body_end] with
/// probability `eta`, otherwise `body_end` plus a draw from `gpd`.
/// Consumes exactly two uniforms per draw.
pub fn body_tail_sampler(
    eta: f64,
    body_end: f64,
    gpd: GpdParams,
) -> impl Fn(&mut RandomStream) -> f64 + Sync {
    move |rng| {
        let u1 = rng.next_f64();
        if u1 < eta {
            body_end * rng.next_f64()
        } else {
            body_end + gpd.sample(rng)
        }
    }
}

/// Bootstrap comparison of the two quantile estimators at one level.
#[derive(Debug, Clone, PartialEq)]
pub struct VarianceStudy {
    /// Sample variance of the grid-argmin pinball estimator.
    pub var_direct: f64,
    /// Sample variance of the threshold-plus-tail-fit estimator,
    /// over the included resamples only.
    pub var_gpd: f64,
    /// Resamples excluded for having fewer than 30 threshold excesses.
    pub excluded: usize,
    /// Resamples included in `var_gpd`.
    pub used: usize,
}

fn sample_variance(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)
}

/// Estimate the level-`tau` quantile of `sampler`'s distribution on
/// `resamples` independent samples of size `n`, two ways per resample:
/// direct pinball argmin over a 1e4-step grid, and the empirical
/// `eta`-quantile plus a fitted tail quantile at (tau - eta)/(1 - eta).
/// Resamples with fewer than 30 excesses are excluded from the tail-fit
/// variance and counted.
pub fn qr_variance_study<F>(
    sampler: &F,
    tau: f64,
    eta: f64,
    n: usize,
    resamples: usize,
    rng: &mut RandomStream,
) -> Result<VarianceStudy>
where
    F: Fn(&mut RandomStream) -> f64 + Sync,
{
    if resamples < 2 {
        return Err(Error::invalid("variance needs at least 2 resamples"));
    }
    if n < 2 {
        return Err(Error::invalid("variance study needs n >= 2"));
    }
    if !(0.0 < eta && eta < tau && tau < 1.0) {
        return Err(Error::invalid(format!("need 0 < eta < tau < 1, got eta {eta}, tau {tau}")));
    }
    let seeds = rng.child_seeds(resamples);
    let runs: Vec<Result<(f64, Option<f64>)>> = parallel::map_indexed(resamples, |i| {
        let mut local = RandomStream::new(seeds[i]);
        let mut xs: Vec<f64> = (0..n).map(|_| sampler(&mut local)).collect();
        parallel::sort_f64(&mut xs);
        let direct = pinball_argmin_grid(&xs, tau, W1_GRID)?;
        let u = empirical_quantile(&xs, eta);
        let excesses: Vec<f64> =
            xs.iter().filter(|&&x| x > u).map(|&x| x - u).collect();
        if excesses.len() < MIN_EXCESSES {
            return Ok((direct, None));
        }
        let init = GpdParams::init_from_data(&excesses);
        let fit = mle_fit(&excesses, init, &FitOptions::standalone())?;
        let assisted = u + fit.params.quantile((tau - eta) / (1.0 - eta))?;
        Ok((direct, Some(assisted)))
    });

    let mut direct = Vec::with_capacity(resamples);
    let mut assisted = Vec::new();
    let mut excluded = 0usize;
    for run in runs {
        let (d, g) = run?;
        direct.push(d);
        match g {
            Some(v) => assisted.push(v),
            None => excluded += 1,
        }
    }
    if assisted.len() < 2 {
        return Err(Error::DegenerateData(format!(
            "only {} resamples had {MIN_EXCESSES}+ excesses; cannot form a variance",
            assisted.len()
        )));
    }
    Ok(VarianceStudy {
        var_direct: sample_variance(&direct),
        var_gpd: sample_variance(&assisted),
        excluded,
        used: assisted.len(),
    })
}

/// 1-Wasserstein distance between `n_mc` Monte Carlo ground-truth
/// discounted returns of `policy` from `s0` and `m_samples` draws from
/// the critic's composite distribution at (s0, policy(s0)), mapped back
/// to reward orientation. Both sample sizes must be at least 1e3.
#[allow(clippy::too_many_arguments)]
pub fn fidelity_report(
    critic: &EvtCritic,
    mdp: &MdpSpec,
    penalty: &PenaltySpec,
    policy: &[usize],
    s0: usize,
    n_mc: usize,
    m_samples: usize,
    rng: &mut RandomStream,
) -> Result<f64> {
    if n_mc < 1000 || m_samples < 1000 {
        return Err(Error::invalid(format!(
            "fidelity needs n_mc and m_samples >= 1000, got {n_mc} and {m_samples}"
        )));
    }
    let truth = env::mc_ground_truth_returns(mdp, penalty, policy, s0, mdp.gamma, n_mc, rng);
    let a0 = policy[s0];
    let mut model = Vec::with_capacity(m_samples);
    for _ in 0..m_samples {
        model.push(-critic.sample_composite(s0, a0, rng)?);
    }
    wasserstein1(&truth, &model)
}
