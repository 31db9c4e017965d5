//! Generalized Pareto Distribution kernel: cdf, quantile, sampling, log-pdf,
//! analytic gradients, and gradient-ascent maximum-likelihood fitting.
//!
//! Parameterization: shape `xi`, scale `sigma > 0`, support `x >= 0`
//! (and `x <= -sigma/xi` when `xi < 0`).
//!
//!   F(x) = 1 - (1 + xi * x / sigma)^(-1/xi)      (xi != 0)
//!   F(x) = 1 - exp(-x / sigma)                    (xi == 0)
//!
//! The `xi == 0` exponential branch is taken whenever `|xi| < 1e-8`; both
//! branches agree to ~1e-6 at the switch point.

use crate::error::{Error, Result};
use crate::rng::RandomStream;

/// Lower projection bound for the shape parameter during fitting.
pub const XI_MIN: f64 = -0.49;
/// Upper projection bound for the shape parameter during fitting.
pub const XI_MAX: f64 = 2.0;
/// Lower projection bound for the scale parameter.
pub const SIGMA_MIN: f64 = 1e-4;
/// Below this magnitude the shape is treated as exactly zero (exponential).
pub const XI_ZERO_TOL: f64 = 1e-8;

/// Arguments of `ln` are clamped here when a point falls outside the
/// support, yielding a large negative log-density instead of a NaN.
const LOG_ARG_FLOOR: f64 = 1e-12;
/// Relative scale margin applied by the fitting feasibility projection, so
/// the largest batch point sits strictly inside the projected support.
const FEAS_MARGIN: f64 = 1e-3;
/// Step used for the finite-difference shape gradient on the `xi == 0`
/// branch (central difference across `xi = +/-1e-6`).
const XI_FD_STEP: f64 = 1e-6;
/// Multi-step fits stop once an accepted ascent step improves the mean
/// log-likelihood by less than this: the forgone gain is bounded by
/// `steps * tol`, orders of magnitude below the statistical error of any
/// batch, while late-stage steps each cost a full line search.
const CONVERGED_LL_GAIN: f64 = 1e-9;

/// GPD parameter pair. `sigma` is strictly positive by construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GpdParams {
    xi: f64,
    sigma: f64,
}

impl GpdParams {
    pub fn new(xi: f64, sigma: f64) -> Result<Self> {
        if !xi.is_finite() || !sigma.is_finite() || sigma <= 0.0 {
            return Err(Error::invalid(format!(
                "GPD parameters need finite xi and sigma > 0, got xi={xi}, sigma={sigma}"
            )));
        }
        Ok(GpdParams { xi, sigma })
    }

    /// Clamp `(xi, sigma)` into the fitting box `[xi_lo, xi_hi] x [sigma_min, inf)`.
    pub fn projected(xi: f64, sigma: f64, xi_lo: f64, xi_hi: f64, sigma_min: f64) -> Self {
        GpdParams {
            xi: xi.clamp(xi_lo, xi_hi),
            sigma: sigma.max(sigma_min),
        }
    }

    pub fn xi(&self) -> f64 {
        self.xi
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Upper end of the support: `-sigma/xi` for `xi < 0`, else infinity.
    pub fn support_max(&self) -> f64 {
        if self.xi < -XI_ZERO_TOL {
            -self.sigma / self.xi
        } else {
            f64::INFINITY
        }
    }

    fn is_zero_shape(&self) -> bool {
        self.xi.abs() < XI_ZERO_TOL
    }

    /// Default fit initialization: `xi = 0.1`, `sigma` = sample standard
    /// deviation of the batch (floored at [`SIGMA_MIN`]).
    pub fn init_from_data(xs: &[f64]) -> Self {
        GpdParams {
            xi: 0.1,
            sigma: std_dev(xs).max(SIGMA_MIN),
        }
    }

    /// Distribution function; points outside the support clamp to 0 / 1.
    pub fn cdf(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        if self.is_zero_shape() {
            1.0 - (-x / self.sigma).exp()
        } else {
            let zx = self.xi * x / self.sigma;
            if 1.0 + zx <= 0.0 {
                return 1.0; // xi < 0 and x at or past the upper endpoint
            }
            // (1 + zx)^(-1/xi) via ln_1p for precision near xi = 0
            1.0 - (-zx.ln_1p() / self.xi).exp()
        }
    }

    /// Quantile function on `[0, 1)`; `tau = 1` is accepted only for
    /// `xi < 0`, whose support is bounded above by `-sigma/xi`.
    pub fn quantile(&self, tau: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&tau) {
            return Err(Error::invalid(format!("quantile level {tau} outside [0, 1]")));
        }
        if tau == 1.0 && self.xi >= -XI_ZERO_TOL {
            return Err(Error::invalid(
                "tau = 1 has no finite quantile for xi >= 0 (unbounded support)",
            ));
        }
        Ok(self.quantile_unchecked(tau))
    }

    /// Quantile without the level check; callers guarantee `tau` in `[0, 1)`
    /// (or `tau = 1` with `xi < 0`).
    pub(crate) fn quantile_unchecked(&self, tau: f64) -> f64 {
        if self.is_zero_shape() {
            -self.sigma * (1.0 - tau).ln()
        } else {
            // ((1-tau)^(-xi) - 1) via exp_m1 for precision near xi = 0
            self.sigma / self.xi * (-self.xi * (1.0 - tau).ln()).exp_m1()
        }
    }

    /// Inverse-transform draw: `quantile(u)` with `u ~ U[0, 1)`.
    pub fn sample(&self, rng: &mut RandomStream) -> f64 {
        self.quantile_unchecked(rng.next_f64())
    }

    /// Log-density at `x`. Returns `(value, support_violation)`: outside the
    /// support the `ln` argument is clamped to 1e-12 and the flag is raised,
    /// so fitting still receives a strong, finite penalty gradient.
    pub fn log_pdf(&self, x: f64) -> (f64, bool) {
        let mut violation = x < 0.0;
        if self.is_zero_shape() {
            (-self.sigma.ln() - x / self.sigma, violation)
        } else {
            let zx = self.xi * x / self.sigma;
            let ln_t = if 1.0 + zx < LOG_ARG_FLOOR {
                violation = true;
                LOG_ARG_FLOOR.ln()
            } else {
                zx.ln_1p()
            };
            let v = -self.sigma.ln() + (-1.0 / self.xi - 1.0) * ln_t;
            (v, violation)
        }
    }

    /// Partial derivatives `(d/dxi, d/dsigma)` of [`GpdParams::log_pdf`] at
    /// `x`, plus the same support-violation flag.
    ///
    /// General branch (`t = 1 + xi x / sigma`):
    ///   d/dxi    = ln(t)/xi^2 - (1/xi + 1) * (x/sigma) / t
    ///   d/dsigma = -1/sigma + (1/xi + 1) * xi x / (sigma^2 t)
    /// Zero-shape branch: d/dsigma = -1/sigma + x/sigma^2; d/dxi is taken by
    /// central finite difference across `xi = +/-1e-6`.
    pub fn grad_log_pdf(&self, x: f64) -> (f64, f64, bool) {
        if self.is_zero_shape() {
            let d_sigma = -1.0 / self.sigma + x / (self.sigma * self.sigma);
            let hi = GpdParams { xi: XI_FD_STEP, sigma: self.sigma };
            let lo = GpdParams { xi: -XI_FD_STEP, sigma: self.sigma };
            let (lp_hi, v1) = hi.log_pdf(x);
            let (lp_lo, v2) = lo.log_pdf(x);
            let d_xi = (lp_hi - lp_lo) / (2.0 * XI_FD_STEP);
            (d_xi, d_sigma, x < 0.0 || v1 || v2)
        } else {
            let zx = self.xi * x / self.sigma;
            let mut violation = x < 0.0;
            let (t, ln_t) = if 1.0 + zx < LOG_ARG_FLOOR {
                violation = true;
                (LOG_ARG_FLOOR, LOG_ARG_FLOOR.ln())
            } else {
                (1.0 + zx, zx.ln_1p())
            };
            let z = x / self.sigma;
            let d_xi = ln_t / (self.xi * self.xi) - (1.0 / self.xi + 1.0) * z / t;
            let d_sigma =
                -1.0 / self.sigma + (1.0 / self.xi + 1.0) * self.xi * x / (self.sigma * self.sigma * t);
            (d_xi, d_sigma, violation)
        }
    }

    /// Unnormalized partial expectation of the quantile function,
    /// `I(s1) = integral_{s1}^{1} Q(s) ds`. Infinite for `xi >= 1`
    /// (the GPD mean diverges), which callers propagate as "maximal risk".
    pub fn partial_mean(&self, s1: f64) -> f64 {
        debug_assert!((0.0..=1.0).contains(&s1));
        let w = 1.0 - s1;
        if w == 0.0 {
            return 0.0;
        }
        if self.is_zero_shape() {
            // integral of -sigma ln(1-s) over [s1, 1]
            self.sigma * w * (1.0 - w.ln())
        } else if self.xi >= 1.0 {
            f64::INFINITY
        } else {
            // (sigma/xi) * [ w^(1-xi) / (1-xi) - w ]
            self.sigma / self.xi * (w.powf(1.0 - self.xi) / (1.0 - self.xi) - w)
        }
    }
}

/// Mean log-likelihood of `xs` under `p` (support violations contribute the
/// clamped large-negative density).
pub fn mean_log_lik(p: &GpdParams, xs: &[f64]) -> f64 {
    let mut acc = 0.0;
    for &x in xs {
        acc += p.log_pdf(x).0;
    }
    acc / xs.len() as f64
}

/// Knobs for [`mle_fit`]. Defaults match the online critic update:
/// step size 1e-2, projection box `[XI_MIN, XI_MAX] x [SIGMA_MIN, inf)`,
/// up to 20 step halvings whenever a step would decrease the likelihood.
#[derive(Debug, Clone, Copy)]
pub struct FitOptions {
    pub lr: f64,
    pub steps: usize,
    pub xi_bounds: (f64, f64),
    pub sigma_min: f64,
    pub max_halvings: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            lr: 1e-2,
            steps: 1,
            xi_bounds: (XI_MIN, XI_MAX),
            sigma_min: SIGMA_MIN,
            max_halvings: 20,
        }
    }
}

impl FitOptions {
    /// Standalone refit: a step budget large enough to converge from a
    /// moment init on batches of 30..1e5 points (the online preset's
    /// single small step assumes a warm start instead). The budget is an
    /// upper bound; fits exit at convergence.
    pub fn standalone() -> Self {
        FitOptions { steps: 5000, lr: 5e-2, ..Self::default() }
    }
}

/// Result of a maximum-likelihood fit.
#[derive(Debug, Clone, Copy)]
pub struct GpdFit {
    pub params: GpdParams,
    /// Mean log-likelihood of the data under `params`.
    pub mean_log_lik: f64,
    /// Raised when the batch was all zeros and no fit was attempted.
    pub degenerate: bool,
    /// Number of parameter evaluations the feasibility projection had to
    /// lift: how often the fit brushed against the support constraint.
    pub support_violations: usize,
}

/// Feasibility projection: for `xi < 0` the support ends at `-sigma/xi`, so
/// the scale is lifted until the largest batch point sits strictly inside.
/// Plain clamped ascent cannot make this move on its own: between "bulk fit"
/// and "covering scale" every intermediate step lowers the clamped
/// likelihood (the excluded point's term is floored, i.e. flat), so a
/// short-tailed warm start would silently truncate real tail mass forever.
fn project_feasible(p: GpdParams, x_max: f64) -> (GpdParams, bool) {
    if p.xi < -XI_ZERO_TOL {
        let need = -p.xi * x_max * (1.0 + FEAS_MARGIN);
        if p.sigma < need {
            return (GpdParams { xi: p.xi, sigma: need }, true);
        }
    }
    (p, false)
}

/// Projected gradient-ascent MLE for GPD parameters.
///
/// Each step moves along the mean score and projects back into the fitting
/// box and the data-feasible region (every batch point inside the support);
/// a step that would lower the mean log-likelihood is halved up to
/// `max_halvings` times and skipped if still not improving, so the
/// likelihood never decreases after the initial feasibility projection.
/// `steps` is an upper bound: the loop exits early once a step is fully
/// rejected or improves the likelihood by less than `CONVERGED_LL_GAIN`.
///
/// Steps are additionally kept local (|dsigma| <= sigma/2, |dxi| <= 1/4
/// per step) before the likelihood test: near sigma -> 0 the raw score
/// scales as 1/sigma^2, and an unrestricted first step can jump to a huge
/// scale that a single improving-likelihood check cannot reject — ruinous
/// in the online regime where later batches only correct at O(1/sigma).
pub fn mle_fit(excesses: &[f64], init: GpdParams, opts: &FitOptions) -> Result<GpdFit> {
    if excesses.is_empty() {
        return Err(Error::invalid("mle_fit needs a non-empty excess batch"));
    }
    if excesses.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err(Error::invalid("excesses must be finite and >= 0"));
    }
    let (xi_lo, xi_hi) = opts.xi_bounds;
    if excesses.iter().all(|&x| x == 0.0) {
        let params = GpdParams::projected(init.xi, SIGMA_MIN, xi_lo, xi_hi, opts.sigma_min);
        return Ok(GpdFit {
            params,
            mean_log_lik: mean_log_lik(&params, excesses),
            degenerate: true,
            support_violations: 0,
        });
    }
    let x_max = excesses.iter().cloned().fold(0.0, f64::max);

    let boxed = GpdParams::projected(init.xi, init.sigma, xi_lo, xi_hi, opts.sigma_min);
    let (mut cur, lifted) = project_feasible(boxed, x_max);
    let mut cur_ll = mean_log_lik(&cur, excesses);
    let mut violations = lifted as usize;

    for _ in 0..opts.steps {
        let mut gx = 0.0;
        let mut gs = 0.0;
        for &x in excesses {
            let (dx, ds, _) = cur.grad_log_pdf(x);
            gx += dx;
            gs += ds;
        }
        let n = excesses.len() as f64;
        gx /= n;
        gs /= n;

        let mut lr = opts.lr;
        // trust region: scale the step down, keeping its direction
        let sigma_cap = 0.5 * cur.sigma;
        if lr * gs.abs() > sigma_cap {
            lr = sigma_cap / gs.abs();
        }
        let xi_cap = 0.25;
        if lr * gx.abs() > xi_cap {
            lr = xi_cap / gx.abs();
        }
        let mut gain = None;
        for _ in 0..=opts.max_halvings {
            let boxed = GpdParams::projected(
                cur.xi + lr * gx,
                cur.sigma + lr * gs,
                xi_lo,
                xi_hi,
                opts.sigma_min,
            );
            let (cand, lifted) = project_feasible(boxed, x_max);
            let cand_ll = mean_log_lik(&cand, excesses);
            if cand_ll >= cur_ll {
                violations += lifted as usize;
                gain = Some(cand_ll - cur_ll);
                cur = cand;
                cur_ll = cand_ll;
                break;
            }
            lr *= 0.5;
        }
        // Converged: with the state unchanged, the next iteration would
        // recompute the identical gradient and line search, so a fully
        // rejected step makes every remaining step a no-op. An accepted
        // step below the gain floor is likewise numerical noise.
        match gain {
            None => break,
            Some(g) if g < CONVERGED_LL_GAIN => break,
            Some(_) => {}
        }
    }

    Ok(GpdFit {
        params: cur,
        mean_log_lik: cur_ll,
        degenerate: false,
        support_violations: violations,
    })
}

fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    (xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    const LN2: f64 = std::f64::consts::LN_2;

    /// Central finite-difference oracle for the analytic gradients.
    fn finite_diff_grad(p: &GpdParams, x: f64, h: f64) -> (f64, f64) {
        let f = |xi: f64, sigma: f64| GpdParams { xi, sigma }.log_pdf(x).0;
        let d_xi = (f(p.xi + h, p.sigma) - f(p.xi - h, p.sigma)) / (2.0 * h);
        let d_sigma = (f(p.xi, p.sigma + h) - f(p.xi, p.sigma - h)) / (2.0 * h);
        (d_xi, d_sigma)
    }

    /// Kolmogorov-Smirnov statistic of `xs` against the model cdf.
    fn ks_statistic(p: &GpdParams, xs: &mut [f64]) -> f64 {
        xs.sort_unstable_by(f64::total_cmp);
        let n = xs.len() as f64;
        let mut d = 0.0f64;
        for (i, &x) in xs.iter().enumerate() {
            let f = p.cdf(x);
            d = d.max((f - i as f64 / n).abs());
            d = d.max(((i + 1) as f64 / n - f).abs());
        }
        d
    }

    #[test]
    fn cdf_reference_points() {
        let exp1 = GpdParams::new(0.0, 1.0).unwrap();
        assert!((exp1.cdf(LN2) - 0.5).abs() < 1e-12);

        let heavy = GpdParams::new(0.5, 1.0).unwrap();
        // 1 - (1 + 0.5)^(-2) = 1 - 1/2.25
        assert!((heavy.cdf(1.0) - (1.0 - 1.0 / 2.25)).abs() < 1e-12);

        let bounded = GpdParams::new(-0.5, 1.0).unwrap();
        assert_eq!(bounded.support_max(), 2.0);
        assert_eq!(bounded.cdf(2.0), 1.0);
        assert_eq!(bounded.cdf(5.0), 1.0);
        assert_eq!(bounded.cdf(-1.0), 0.0);
    }

    #[test]
    fn cdf_monotone_on_grid() {
        let mut rng = RandomStream::new(101);
        for _ in 0..50 {
            let p = GpdParams::new(rng.uniform(-0.45, 1.5), rng.uniform(0.1, 3.0)).unwrap();
            let hi = p.support_max().min(50.0);
            let mut prev = -1.0;
            for i in 0..1000 {
                let x = hi * i as f64 / 999.0;
                let c = p.cdf(x);
                assert!(c >= prev - 1e-15, "cdf not monotone at xi={} x={x}", p.xi());
                assert!((0.0..=1.0).contains(&c));
                prev = c;
            }
        }
    }

    #[test]
    fn quantile_reference_points() {
        let exp1 = GpdParams::new(0.0, 1.0).unwrap();
        assert!((exp1.quantile(0.5).unwrap() - LN2).abs() < 1e-12);

        // (sigma/xi) * ((1-tau)^(-xi) - 1) at xi=1, sigma=2, tau=0.9
        let p = GpdParams::new(1.0, 2.0).unwrap();
        assert!((p.quantile(0.9).unwrap() - 2.0 * (10.0 - 1.0)).abs() < 1e-9);

        let bounded = GpdParams::new(-0.5, 1.0).unwrap();
        assert!((bounded.quantile(1.0).unwrap() - 2.0).abs() < 1e-12);

        assert!(exp1.quantile(1.0).is_err());
        assert!(exp1.quantile(-0.1).is_err());
        assert!(exp1.quantile(1.5).is_err());
    }

    #[test]
    fn quantile_cdf_round_trip() {
        let mut rng = RandomStream::new(7);
        for _ in 0..50 {
            let p = GpdParams::new(rng.uniform(-0.45, 1.8), rng.uniform(0.05, 4.0)).unwrap();
            for _ in 0..40 {
                let tau = rng.uniform(1e-6, 1.0 - 1e-6);
                let x = p.quantile(tau).unwrap();
                assert!(
                    (p.cdf(x) - tau).abs() < 1e-10,
                    "cdf(quantile({tau})) = {} at xi={}, sigma={}",
                    p.cdf(x),
                    p.xi(),
                    p.sigma()
                );
                // and quantile(cdf(x)) = x on interior points
                let x2 = p.quantile(p.cdf(x)).unwrap();
                assert!((x2 - x).abs() <= 1e-9 * x.abs().max(1.0));
            }
        }
    }

    #[test]
    fn branch_continuity_at_switch() {
        // cdf and log_pdf agree across |xi| = 1e-8 to ~1e-6.
        let sigma = 1.3;
        for x in [0.1, 0.7, 2.5, 9.0] {
            let below = GpdParams::new(XI_ZERO_TOL * 0.99, sigma).unwrap(); // zero branch
            let above = GpdParams::new(XI_ZERO_TOL * 1.01, sigma).unwrap(); // general branch
            assert!((below.cdf(x) - above.cdf(x)).abs() < 1e-6);
            assert!((below.log_pdf(x).0 - above.log_pdf(x).0).abs() < 1e-6);
            let neg = GpdParams::new(-XI_ZERO_TOL * 1.01, sigma).unwrap();
            assert!((below.cdf(x) - neg.cdf(x)).abs() < 1e-6);
            assert!((below.log_pdf(x).0 - neg.log_pdf(x).0).abs() < 1e-6);
        }
    }

    #[test]
    fn log_pdf_reference_points() {
        let exp1 = GpdParams::new(0.0, 1.0).unwrap();
        assert!((exp1.log_pdf(1.0).0 - (-1.0)).abs() < 1e-12);

        // xi=1, sigma=1, x=1: -ln(1) + (-2) ln(2)
        let p = GpdParams::new(1.0, 1.0).unwrap();
        assert!((p.log_pdf(1.0).0 - (-2.0 * LN2)).abs() < 1e-12);

        // outside support for xi<0: clamped and flagged
        let bounded = GpdParams::new(-0.5, 1.0).unwrap();
        let (v, flag) = bounded.log_pdf(3.0);
        assert!(flag);
        assert!(v < -20.0, "clamped log-pdf should be strongly negative, got {v}");
        let (_, neg_flag) = exp1.log_pdf(-0.5);
        assert!(neg_flag);
    }

    #[test]
    fn gradient_reference_points() {
        // xi=0, sigma=1, x=1: d/dsigma = -1 + 1 = 0
        let exp1 = GpdParams::new(0.0, 1.0).unwrap();
        let (_, ds, _) = exp1.grad_log_pdf(1.0);
        assert!(ds.abs() < 1e-12, "d_sigma at the exponential MLE point: {ds}");

        // xi=0, sigma=2, x=1: -1/2 + 1/4 = -0.25
        let p = GpdParams::new(0.0, 2.0).unwrap();
        let (_, ds, _) = p.grad_log_pdf(1.0);
        assert!((ds + 0.25).abs() < 1e-12);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = RandomStream::new(31);
        let mut checked = 0;
        while checked < 200 {
            let xi = rng.uniform(-0.4, 1.8);
            let sigma = rng.uniform(0.2, 3.0);
            let p = GpdParams::new(xi, sigma).unwrap();
            let x = p.sample(&mut rng);
            // keep clear of the support edge where FD steps would cross it
            if xi < 0.0 && x > 0.9 * p.support_max() {
                continue;
            }
            if x < 1e-3 {
                continue;
            }
            let (gx, gs, viol) = p.grad_log_pdf(x);
            assert!(!viol);
            let (fx, fs) = finite_diff_grad(&p, x, 1e-6);
            let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1.0);
            assert!(rel(gx, fx) < 1e-5, "d_xi: analytic={gx}, fd={fx} at xi={xi}, sigma={sigma}, x={x}");
            assert!(rel(gs, fs) < 1e-5, "d_sigma: analytic={gs}, fd={fs} at xi={xi}, sigma={sigma}, x={x}");
            checked += 1;
        }
    }

    #[test]
    fn zero_branch_xi_gradient_matches_analytic_limit() {
        // limit of d/dxi log f as xi -> 0 is x^2/(2 sigma^2) - x/sigma
        let p = GpdParams::new(0.0, 1.5).unwrap();
        for x in [0.2, 1.0, 3.7] {
            let (gx, _, _) = p.grad_log_pdf(x);
            let limit = x * x / (2.0 * p.sigma() * p.sigma()) - x / p.sigma();
            assert!((gx - limit).abs() < 1e-5, "x={x}: fd={gx}, limit={limit}");
        }
    }

    #[test]
    fn sampling_matches_cdf() {
        let mut rng = RandomStream::new(13);
        let exp1 = GpdParams::new(0.0, 1.0).unwrap();
        let n = 100_000;
        let xs: Vec<f64> = (0..n).map(|_| exp1.sample(&mut rng)).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        assert!((mean - 1.0).abs() < 0.02, "exponential sample mean {mean}");

        let p = GpdParams::new(0.3, 1.5).unwrap();
        let mut ys: Vec<f64> = (0..n).map(|_| p.sample(&mut rng)).collect();
        let d = ks_statistic(&p, &mut ys);
        assert!(d < 0.01, "KS statistic {d}");
    }

    #[test]
    fn mle_recovers_known_parameters() {
        // median over 5 seeds of a fit to 20k draws from (0.25, 2.0)
        let truth = GpdParams::new(0.25, 2.0).unwrap();
        let mut xis = vec![];
        let mut sigmas = vec![];
        let opts = FitOptions { lr: 0.1, steps: 1000, ..FitOptions::default() };
        for seed in 1..=5 {
            let mut rng = RandomStream::new(seed);
            let xs: Vec<f64> = (0..20_000).map(|_| truth.sample(&mut rng)).collect();
            let fit = mle_fit(&xs, GpdParams::init_from_data(&xs), &opts).unwrap();
            assert!(!fit.degenerate);
            xis.push(fit.params.xi());
            sigmas.push(fit.params.sigma());
        }
        xis.sort_unstable_by(f64::total_cmp);
        sigmas.sort_unstable_by(f64::total_cmp);
        assert!((xis[2] - 0.25).abs() < 0.05, "median xi {}", xis[2]);
        assert!((sigmas[2] - 2.0).abs() < 0.1, "median sigma {}", sigmas[2]);
    }

    #[test]
    fn mle_on_exponential_data_matches_sample_mean() {
        // with the shape pinned at zero the scale MLE is the sample mean
        let truth = GpdParams::new(0.0, 1.0).unwrap();
        let mut rng = RandomStream::new(2);
        let xs: Vec<f64> = (0..20_000).map(|_| truth.sample(&mut rng)).collect();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let opts = FitOptions {
            xi_bounds: (0.0, 0.0),
            ..FitOptions::standalone()
        };
        let fit = mle_fit(&xs, GpdParams::new(0.0, 0.5).unwrap(), &opts).unwrap();
        assert!(
            (fit.params.sigma() - mean).abs() <= 0.02,
            "sigma {} vs sample mean {mean}",
            fit.params.sigma()
        );
    }

    #[test]
    fn mle_constant_data_pushes_to_boundary() {
        // Likelihood of a point mass at c is maximized at sigma = c with xi
        // on the lower projection bound; verify against a dense grid first.
        let c = 1.7;
        let xs = vec![c; 200];
        let mut best = (f64::NEG_INFINITY, 0.0, 0.0);
        for i in 0..=80 {
            let xi = XI_MIN + (XI_MAX - XI_MIN) * i as f64 / 80.0;
            for j in 1..=400 {
                let sigma = 4.0 * j as f64 / 400.0;
                let ll = mean_log_lik(&GpdParams::new(xi, sigma).unwrap(), &xs);
                if ll > best.0 {
                    best = (ll, xi, sigma);
                }
            }
        }
        assert!((best.1 - XI_MIN).abs() < 0.05, "grid argmax xi {}", best.1);
        assert!((best.2 - c).abs() < 0.05, "grid argmax sigma {}", best.2);

        let opts = FitOptions { steps: 4000, ..FitOptions::standalone() };
        let fit = mle_fit(&xs, GpdParams::new(0.1, 1.0).unwrap(), &opts).unwrap();
        assert!((fit.params.sigma() - c).abs() < 0.1, "sigma {}", fit.params.sigma());
        assert!((fit.params.xi() - XI_MIN).abs() < 0.05, "xi {}", fit.params.xi());
    }

    #[test]
    fn mle_all_zero_batch_is_degenerate() {
        let xs = vec![0.0; 50];
        let fit = mle_fit(&xs, GpdParams::new(0.1, 1.0).unwrap(), &FitOptions::default()).unwrap();
        assert!(fit.degenerate);
        assert_eq!(fit.params.sigma(), SIGMA_MIN);
    }

    #[test]
    fn mle_rejects_bad_input() {
        let init = GpdParams::new(0.1, 1.0).unwrap();
        assert!(mle_fit(&[], init, &FitOptions::default()).is_err());
        assert!(mle_fit(&[1.0, -0.5], init, &FitOptions::default()).is_err());
    }

    #[test]
    fn mle_never_decreases_likelihood() {
        // Baseline is the likelihood at the projected starting point (box
        // and feasibility), which is where the ascent itself begins.
        let mut rng = RandomStream::new(17);
        let truth = GpdParams::new(0.4, 1.0).unwrap();
        for _ in 0..10 {
            let xs: Vec<f64> = (0..200).map(|_| truth.sample(&mut rng)).collect();
            let x_max = xs.iter().cloned().fold(0.0, f64::max);
            let init = GpdParams::new(rng.uniform(-0.3, 1.0), rng.uniform(0.2, 3.0)).unwrap();
            let boxed = GpdParams::projected(init.xi(), init.sigma(), XI_MIN, XI_MAX, SIGMA_MIN);
            let init_ll = mean_log_lik(&project_feasible(boxed, x_max).0, &xs);
            let opts = FitOptions { steps: 50, ..FitOptions::default() };
            let fit = mle_fit(&xs, init, &opts).unwrap();
            assert!(
                fit.mean_log_lik >= init_ll,
                "final {} < initial {init_ll}",
                fit.mean_log_lik
            );
        }
    }

    #[test]
    fn fitted_support_always_covers_the_batch() {
        // A short-tailed warm start must not truncate observed tail mass:
        // without the feasibility projection, a bulk of small excesses plus
        // a few large ones strands the fit at a tiny bounded support whose
        // partial mean ignores the large points entirely.
        let mut xs = vec![0.05; 95];
        xs.extend([40.0, 41.0, 39.5, 40.5, 42.0]);
        let warm = GpdParams::new(-0.49, 0.8).unwrap();
        // online regime: one small warm-started step per call, many calls
        let mut cur = warm;
        for _ in 0..50 {
            cur = mle_fit(&xs, cur, &FitOptions::default()).unwrap().params;
        }
        let x_max = 42.0;
        assert!(
            cur.support_max() > x_max,
            "support {} truncates data max {x_max}",
            cur.support_max()
        );
        // the tail integral now sees the large excesses: the conditional
        // mean over the top 5% of the fitted tail reaches their scale
        let pm = cur.partial_mean(0.95) / 0.05;
        assert!(pm > 10.0, "tail mean {pm} blind to the 5% mass near 40");
    }

    #[test]
    fn partial_mean_matches_quadrature() {
        // Oracle: trapezoid in w = 1 - s on a log-spaced grid down to 1e-40,
        // which resolves the integrable singularity of Q near s = 1.
        let quad = |p: &GpdParams, s1: f64| {
            // quantile at level 1 - w, written in w so that tiny tail masses
            // keep full precision
            let q_of_w = |w: f64| {
                if p.xi().abs() < XI_ZERO_TOL {
                    -p.sigma() * w.ln()
                } else {
                    p.sigma() / p.xi() * (w.powf(-p.xi()) - 1.0)
                }
            };
            let n = 20_000;
            let w1: f64 = 1.0 - s1;
            let w_floor: f64 = 1e-40;
            let ratio = (w_floor / w1).powf(1.0 / n as f64);
            let mut acc = 0.0;
            let mut w_hi = w1;
            for _ in 0..n {
                let w_lo = w_hi * ratio;
                acc += 0.5 * (q_of_w(w_hi) + q_of_w(w_lo)) * (w_hi - w_lo);
                w_hi = w_lo;
            }
            acc
        };
        for (xi, sigma, s1) in [(0.0, 1.0, 0.0), (0.3, 2.0, 0.5), (-0.2, 0.7, 0.25), (0.9, 1.0, 0.0)] {
            let p = GpdParams::new(xi, sigma).unwrap();
            let exact = p.partial_mean(s1);
            let approx = quad(&p, s1);
            assert!(
                (exact - approx).abs() < 2e-3 * exact.abs().max(1.0),
                "xi={xi} s1={s1}: exact={exact} quad={approx}"
            );
        }
        assert!(GpdParams::new(1.0, 1.0).unwrap().partial_mean(0.0).is_infinite());
        assert!(GpdParams::new(1.5, 1.0).unwrap().partial_mean(0.9).is_infinite());
    }
}
