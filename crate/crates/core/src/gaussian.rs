//! Closed-form and quadrature evaluation of the Gaussian examples: the
//! dirty-paper boundary point of the AWGN channel with additive
//! interference, and capacity-distortion curves for the AWGN channel with
//! ergodic (or mixed) fading.
//!
//! All `sigma_*` parameters are variances in squared signal units; rates
//! are in nats.

use gauss_quad::GaussHermite;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GaussianError {
    #[error("parameter {name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("feedback noise must exceed forward noise (sigma_z = {sigma_z} <= sigma = {sigma})")]
    FeedbackNotNoisier { sigma_z: f64, sigma: f64 },
    #[error("state distribution second moment {m2} exceeds the declared fading power {sigma_s}")]
    SecondMomentTooLarge { m2: f64, sigma_s: f64 },
    #[error("state distribution weights must be non-negative and sum to 1 (sum {0})")]
    BadStateWeights(f64),
    #[error("distortion budget {requested} is infeasible; the smallest reachable value is {min_reachable}")]
    Infeasible { requested: f64, min_reachable: f64 },
    #[error("mixture weight beta must lie in [0, 1], got {0}")]
    BadBeta(f64),
    #[error("distortion grid must be non-empty and strictly increasing")]
    BadGrid,
    #[error("component input powers must agree for a common input (got {0} and {1})")]
    PowerMismatch(f64, f64),
}

pub type Result<T> = std::result::Result<T, GaussianError>;

fn require_positive(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(GaussianError::NonPositive { name, value })
    }
}

// ---------------------------------------------------------------------------
// Dirty-paper boundary point
// ---------------------------------------------------------------------------

/// Parameters of the additive-interference model Y = X + S + N,
/// Z = X + S + N_z with encoder CSI S_e = S + N_e.
#[derive(Debug, Clone, Copy)]
pub struct DpcParams {
    /// Input power constraint E[X^2].
    pub p_x: f64,
    /// Forward noise variance.
    pub sigma: f64,
    /// Feedback noise variance; must exceed `sigma`.
    pub sigma_z: f64,
    /// Encoder-CSI noise variance.
    pub sigma_e: f64,
    /// State (interference) variance.
    pub sigma_s: f64,
}

impl DpcParams {
    pub fn validate(&self) -> Result<()> {
        require_positive("p_x", self.p_x)?;
        require_positive("sigma", self.sigma)?;
        require_positive("sigma_z", self.sigma_z)?;
        require_positive("sigma_e", self.sigma_e)?;
        require_positive("sigma_s", self.sigma_s)?;
        if self.sigma_z <= self.sigma {
            return Err(GaussianError::FeedbackNotNoisier {
                sigma_z: self.sigma_z,
                sigma: self.sigma,
            });
        }
        Ok(())
    }
}

/// The maximal-rate boundary point: achieved rate, state-estimation
/// distortion, and the linear estimator coefficients (a, b, c) of
/// s_hat = a Z + b X + c S_e.
#[derive(Debug, Clone, Copy)]
pub struct DpcBoundary {
    pub rate: f64,
    pub distortion: f64,
    pub coeff_z: f64,
    pub coeff_x: f64,
    pub coeff_se: f64,
}

/// Shared by the boundary point and the converse bound so the two are
/// bit-identical.
fn dpc_distortion_expr(sigma_s: f64, sigma_e: f64, sigma_z: f64) -> f64 {
    sigma_s * sigma_e * sigma_z / (sigma_s * sigma_z + sigma_e * sigma_s + sigma_e * sigma_z)
}

/// Closed forms of the boundary point where the message rate is maximal:
/// rate (1/2) ln(1 + P_X / (sigma + sigma_e)), the linear-MMSE
/// coefficients, and the resulting distortion.
pub fn dpc_boundary(params: &DpcParams) -> Result<DpcBoundary> {
    params.validate()?;
    let DpcParams {
        p_x,
        sigma,
        sigma_z,
        sigma_e,
        sigma_s,
    } = *params;
    let denom = sigma_s * sigma_z + sigma_e * sigma_s + sigma_e * sigma_z;
    let a = sigma_e * sigma_s / denom;
    let c = sigma_s * sigma_z / denom;
    Ok(DpcBoundary {
        rate: 0.5 * (1.0 + p_x / (sigma + sigma_e)).ln(),
        distortion: dpc_distortion_expr(sigma_s, sigma_e, sigma_z),
        coeff_z: a,
        coeff_x: -a,
        coeff_se: c,
    })
}

/// Converse: no estimator beats this distortion when the interference is
/// i.i.d. Gaussian. Identical expression to the achievability, so the
/// boundary point is tight.
pub fn dpc_converse_bound(params: &DpcParams) -> Result<f64> {
    params.validate()?;
    Ok(dpc_distortion_expr(params.sigma_s, params.sigma_e, params.sigma_z))
}

// ---------------------------------------------------------------------------
// AWGN with fading
// ---------------------------------------------------------------------------

/// Fading distribution of S for the rate expectation. The estimator and
/// the constraint depend on S only through the declared power `sigma_s`.
#[derive(Debug, Clone)]
pub enum StateDist {
    /// S ~ N(0, variance).
    Gaussian { variance: f64 },
    /// Finite support: (value, probability) pairs.
    Finite(Vec<(f64, f64)>),
}

impl StateDist {
    pub fn second_moment(&self) -> f64 {
        match self {
            StateDist::Gaussian { variance } => *variance,
            StateDist::Finite(points) => points.iter().map(|(v, p)| p * v * v).sum(),
        }
    }

    fn validate(&self, sigma_s: f64) -> Result<()> {
        if let StateDist::Finite(points) = self {
            let sum: f64 = points.iter().map(|(_, p)| p).sum();
            if points.iter().any(|(_, p)| *p < 0.0) || (sum - 1.0).abs() > 1e-9 {
                return Err(GaussianError::BadStateWeights(sum));
            }
        }
        let m2 = self.second_moment();
        if m2 > sigma_s * (1.0 + 1e-9) {
            return Err(GaussianError::SecondMomentTooLarge { m2, sigma_s });
        }
        Ok(())
    }
}

/// Parameters of the fading model Y = S X + N, Z = S X + N_z.
#[derive(Debug, Clone)]
pub struct FadingParams {
    pub p_x: f64,
    pub sigma: f64,
    pub sigma_z: f64,
    /// Fading power bound; enters the estimator and its conditional MMSE.
    pub sigma_s: f64,
    pub s_dist: StateDist,
}

impl FadingParams {
    pub fn validate(&self) -> Result<()> {
        require_positive("p_x", self.p_x)?;
        require_positive("sigma", self.sigma)?;
        require_positive("sigma_z", self.sigma_z)?;
        require_positive("sigma_s", self.sigma_s)?;
        if self.sigma_z <= self.sigma {
            return Err(GaussianError::FeedbackNotNoisier {
                sigma_z: self.sigma_z,
                sigma: self.sigma,
            });
        }
        self.s_dist.validate(self.sigma_s)
    }
}

/// Quadrature settings for the Gaussian expectations.
#[derive(Debug, Clone, Copy)]
pub struct QuadOpts {
    pub nodes: usize,
    /// Feasibility-frontier scan resolution over alpha in [0, 1].
    pub alpha_scan: usize,
    /// Golden-section refinement tolerance on alpha.
    pub alpha_tol: f64,
}

impl Default for QuadOpts {
    fn default() -> Self {
        Self {
            nodes: 64,
            alpha_scan: 129,
            alpha_tol: 1e-10,
        }
    }
}

/// Cached quadrature rules for repeated Gaussian expectations. The primary
/// rule has the configured node count; the check rule has ~1.5x nodes and
/// estimates the quadrature error. Integrands whose singularities sit close
/// to the real axis (small sigma against strong fading) defeat plain
/// Gauss-Hermite, so on disagreement the value is recomputed by adaptive
/// Simpson on the truncated weighted integral.
pub(crate) struct QuadCtx {
    rule: GaussHermite,
    check: GaussHermite,
}

impl QuadCtx {
    pub fn new(opts: &QuadOpts) -> Self {
        let nodes = opts.nodes.max(2);
        Self {
            rule: GaussHermite::new(nodes).expect("node count >= 2"),
            check: GaussHermite::new(nodes + nodes / 2 + 1).expect("node count >= 2"),
        }
    }

    /// E[f(X)] for X ~ N(0, variance).
    pub fn expect(&self, variance: f64, f: impl Fn(f64) -> f64) -> f64 {
        if variance == 0.0 {
            return f(0.0);
        }
        let scale = (2.0 * variance).sqrt();
        let sqrt_pi = std::f64::consts::PI.sqrt();
        let a = self.rule.integrate(|t| f(scale * t)) / sqrt_pi;
        let b = self.check.integrate(|t| f(scale * t)) / sqrt_pi;
        if (a - b).abs() <= 1e-9 * (1.0 + b.abs()) {
            return b;
        }
        // slow Gauss-Hermite convergence: integrate the weighted function
        // adaptively over the numerically relevant range
        let sd = variance.sqrt();
        let norm = 1.0 / (sd * (2.0 * std::f64::consts::PI).sqrt());
        let g = |x: f64| f(x) * (-(x * x) / (2.0 * variance)).exp() * norm;
        let l = 9.0 * sd;
        adaptive_simpson(&g, -l, l, 1e-11 * (1.0 + b.abs()), 32)
    }
}

fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, depth)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        left + right + delta / 15.0
    } else {
        simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
}

/// Conditional MMSE of estimating S from Z given the input value x:
/// sigma_s sigma_z / (sigma_s x^2 + sigma_z).
pub fn fading_h(params: &FadingParams, x: f64) -> f64 {
    params.sigma_s * params.sigma_z / (params.sigma_s * x * x + params.sigma_z)
}

/// The linear state reconstruction s_hat(x, z) = sigma_s x z / (sigma_s x^2 + sigma_z).
pub fn fading_estimator(params: &FadingParams, x: f64, z: f64) -> f64 {
    params.sigma_s * x * z / (params.sigma_s * x * x + params.sigma_z)
}

fn rate_at_ctx(params: &FadingParams, alpha: f64, q: &QuadCtx) -> f64 {
    let rate_of_s2 =
        |s2: f64| 0.5 * ((alpha * s2 * params.p_x + params.sigma) / params.sigma).ln();
    match &params.s_dist {
        StateDist::Gaussian { variance } => q.expect(*variance, |s| rate_of_s2(s * s)),
        StateDist::Finite(points) => points.iter().map(|(v, p)| p * rate_of_s2(v * v)).sum(),
    }
}

fn constraint_at_ctx(params: &FadingParams, alpha: f64, q: &QuadCtx) -> f64 {
    q.expect(alpha * params.p_x, |x| fading_h(params, x))
}

/// Rate integrand at power fraction alpha: (1/2) E_S[ln(1 + alpha S^2 P_X / sigma)].
pub fn fading_rate_at(params: &FadingParams, alpha: f64, quad: &QuadOpts) -> Result<f64> {
    params.validate()?;
    Ok(rate_at_ctx(params, alpha, &QuadCtx::new(quad)))
}

/// Distortion of the power fraction alpha: E_X[H(X)] with X ~ N(0, alpha P_X).
pub fn fading_constraint_at(params: &FadingParams, alpha: f64, quad: &QuadOpts) -> Result<f64> {
    params.validate()?;
    Ok(constraint_at_ctx(params, alpha, &QuadCtx::new(quad)))
}

#[derive(Debug, Clone, Copy)]
pub struct FadingPoint {
    pub c_nats: f64,
    pub alpha_star: f64,
    pub distortion: f64,
}

/// C(D) for the ergodic fading model: the best rate over power fractions
/// alpha whose estimation distortion E[H(X)] stays within D.
///
/// E[H] is decreasing in alpha while the rate is increasing, so the
/// feasible set is an interval ending at alpha = 1 and the optimum sits at
/// its right edge; the generic scan stays in place for distributions where
/// that structure is verified rather than assumed.
pub fn fading_capacity(params: &FadingParams, d: f64, quad: &QuadOpts) -> Result<FadingPoint> {
    params.validate()?;
    let ctx = QuadCtx::new(quad);
    let constraint = |alpha: f64| constraint_at_ctx(params, alpha, &ctx);
    let rate = |alpha: f64| rate_at_ctx(params, alpha, &ctx);

    let d_min = constraint(1.0);
    if d < d_min {
        return Err(GaussianError::Infeasible {
            requested: d,
            min_reachable: d_min,
        });
    }

    // scan for feasibility and the best feasible rate
    let scan = quad.alpha_scan.max(3);
    let mut best: Option<(f64, f64)> = None; // (rate, alpha)
    let mut prev_feasible_alpha: Option<f64> = None;
    let mut frontier_bracket: Option<(f64, f64)> = None;
    let mut last_alpha = 0.0;
    for i in 0..scan {
        let alpha = i as f64 / (scan - 1) as f64;
        let feasible = constraint(alpha) <= d + 1e-12;
        if feasible {
            let r = rate(alpha);
            if best.map(|(b, _)| r > b).unwrap_or(true) {
                best = Some((r, alpha));
            }
            if prev_feasible_alpha.is_none() && i > 0 && frontier_bracket.is_none() {
                frontier_bracket = Some((last_alpha, alpha));
            }
            prev_feasible_alpha = Some(alpha);
        }
        last_alpha = alpha;
    }
    let (mut best_rate, mut best_alpha) = best.expect("alpha = 1 is feasible");

    // refine the feasibility frontier, then golden-section the rate over
    // the feasible interval
    let mut lo = if let Some((infeas, feas)) = frontier_bracket {
        let (mut a, mut b) = (infeas, feas);
        for _ in 0..60 {
            let mid = 0.5 * (a + b);
            if constraint(mid) <= d + 1e-12 {
                b = mid;
            } else {
                a = mid;
            }
        }
        b
    } else {
        0.0
    };
    let mut hi = 1.0;
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - phi * (hi - lo);
    let mut x2 = lo + phi * (hi - lo);
    let mut f1 = rate(x1);
    let mut f2 = rate(x2);
    while hi - lo > quad.alpha_tol {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + phi * (hi - lo);
            f2 = rate(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - phi * (hi - lo);
            f1 = rate(x1);
        }
    }
    let golden_alpha = 0.5 * (lo + hi);
    if constraint(golden_alpha) <= d + 1e-12 {
        let r = rate(golden_alpha);
        if r > best_rate {
            best_rate = r;
            best_alpha = golden_alpha;
        }
    }
    // the right endpoint is always feasible here; prefer it on ties so the
    // unconstrained case reports alpha = 1 exactly
    let r_end = rate(1.0);
    if r_end >= best_rate {
        best_rate = r_end;
        best_alpha = 1.0;
    }
    Ok(FadingPoint {
        c_nats: best_rate,
        alpha_star: best_alpha,
        distortion: constraint(best_alpha),
    })
}

#[derive(Debug, Clone, Copy)]
pub struct FadingCurvePoint {
    pub d: f64,
    pub c_nats: f64,
    pub alpha_star: f64,
    pub feasible: bool,
}

#[derive(Debug, Clone)]
pub struct FadingCurve {
    pub points: Vec<FadingCurvePoint>,
}

impl FadingCurve {
    /// Largest violation of midpoint concavity over consecutive feasible
    /// triples (0 when the feasible part of the curve is concave).
    pub fn max_midpoint_concavity_violation(&self) -> f64 {
        let feasible: Vec<&FadingCurvePoint> =
            self.points.iter().filter(|p| p.feasible).collect();
        let mut worst = 0.0f64;
        for w in feasible.windows(3) {
            let (p0, p1, p2) = (w[0], w[1], w[2]);
            // interpolate the chord at p1.d
            let t = (p1.d - p0.d) / (p2.d - p0.d);
            let chord = p0.c_nats * (1.0 - t) + p2.c_nats * t;
            worst = worst.max(chord - p1.c_nats);
        }
        worst
    }
}

/// C(D) over a strictly increasing distortion grid; infeasible prefix
/// points are flagged rather than dropped.
pub fn fading_cd_curve(
    params: &FadingParams,
    d_grid: &[f64],
    quad: &QuadOpts,
) -> Result<FadingCurve> {
    params.validate()?;
    if d_grid.is_empty() || d_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(GaussianError::BadGrid);
    }
    let mut points = Vec::with_capacity(d_grid.len());
    let mut running_max = f64::NEG_INFINITY;
    for &d in d_grid {
        match fading_capacity(params, d, quad) {
            Ok(p) => {
                // nested feasible sets make C non-decreasing; enforce over
                // quadrature jitter
                running_max = running_max.max(p.c_nats);
                points.push(FadingCurvePoint {
                    d,
                    c_nats: running_max,
                    alpha_star: p.alpha_star,
                    feasible: true,
                });
            }
            Err(GaussianError::Infeasible { .. }) => points.push(FadingCurvePoint {
                d,
                c_nats: f64::NAN,
                alpha_star: f64::NAN,
                feasible: false,
            }),
            Err(e) => return Err(e),
        }
    }
    Ok(FadingCurve { points })
}

/// Inner bound for a sequence-level mixture of two fading processes: the
/// common power fraction must satisfy the mixed constraint
/// beta E[H_1] + (1-beta) E[H_2] <= D, and the rate is the worse of the
/// two component rates at that fraction.
pub fn mixed_fading_rate(
    params1: &FadingParams,
    params2: &FadingParams,
    beta: f64,
    d: f64,
    quad: &QuadOpts,
) -> Result<FadingPoint> {
    params1.validate()?;
    params2.validate()?;
    if !(0.0..=1.0).contains(&beta) {
        return Err(GaussianError::BadBeta(beta));
    }
    if (params1.p_x - params2.p_x).abs() > 1e-12 {
        return Err(GaussianError::PowerMismatch(params1.p_x, params2.p_x));
    }
    let ctx = QuadCtx::new(quad);
    let constraint = |alpha: f64| -> f64 {
        beta * constraint_at_ctx(params1, alpha, &ctx)
            + (1.0 - beta) * constraint_at_ctx(params2, alpha, &ctx)
    };
    let rate = |alpha: f64| -> f64 {
        rate_at_ctx(params1, alpha, &ctx).min(rate_at_ctx(params2, alpha, &ctx))
    };
    let d_min = constraint(1.0);
    if d < d_min {
        return Err(GaussianError::Infeasible {
            requested: d,
            min_reachable: d_min,
        });
    }
    // mixed constraint is still decreasing in alpha and the min-rate is
    // still increasing: bisect the frontier, take the right edge
    let mut best_alpha = 1.0;
    if constraint(0.0) > d {
        // frontier inside (0, 1); the optimum is still alpha = 1 but keep
        // the generic structure: golden-section over [frontier, 1]
        let mut a = 0.0;
        let mut b = 1.0;
        for _ in 0..60 {
            let mid = 0.5 * (a + b);
            if constraint(mid) <= d + 1e-12 {
                b = mid;
            } else {
                a = mid;
            }
        }
        let lo = b;
        let mut lo_g = lo;
        let mut hi_g = 1.0;
        let phi = 0.5 * (5f64.sqrt() - 1.0);
        let mut x1 = hi_g - phi * (hi_g - lo_g);
        let mut x2 = lo_g + phi * (hi_g - lo_g);
        let mut f1 = rate(x1);
        let mut f2 = rate(x2);
        while hi_g - lo_g > quad.alpha_tol {
            if f1 < f2 {
                lo_g = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo_g + phi * (hi_g - lo_g);
                f2 = rate(x2);
            } else {
                hi_g = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi_g - phi * (hi_g - lo_g);
                f1 = rate(x1);
            }
        }
        let cand = 0.5 * (lo_g + hi_g);
        best_alpha = if rate(1.0) >= rate(cand) { 1.0 } else { cand };
    }
    Ok(FadingPoint {
        c_nats: rate(best_alpha),
        alpha_star: best_alpha,
        distortion: constraint(best_alpha),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;
    use rand_distr::{Distribution, Normal};

    const LN2: f64 = std::f64::consts::LN_2;

    fn all_ones() -> DpcParams {
        DpcParams {
            p_x: 1.0,
            sigma: 0.5,
            sigma_z: 1.0,
            sigma_e: 1.0,
            sigma_s: 1.0,
        }
    }

    #[test]
    fn dpc_all_ones_symmetry() {
        let b = dpc_boundary(&all_ones()).unwrap();
        assert!((b.distortion - 1.0 / 3.0).abs() < 1e-15);
        assert!((b.coeff_z - 1.0 / 3.0).abs() < 1e-15);
        assert!((b.coeff_x + 1.0 / 3.0).abs() < 1e-15);
        assert!((b.coeff_se - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn dpc_rate_half_ln_two() {
        let params = DpcParams {
            p_x: 1.0,
            sigma: 0.5,
            sigma_z: 1.0,
            sigma_e: 0.5,
            sigma_s: 1.0,
        };
        let b = dpc_boundary(&params).unwrap();
        assert!((b.rate - 0.5 * LN2).abs() < 1e-15);
    }

    #[test]
    fn dpc_perfect_encoder_csi_limit() {
        let params = DpcParams {
            sigma_e: 1e-12,
            ..all_ones()
        };
        let b = dpc_boundary(&params).unwrap();
        assert!(b.distortion < 1e-11);
        assert!((b.coeff_se - 1.0).abs() < 1e-11);
    }

    #[test]
    fn dpc_converse_is_bit_identical() {
        let mut rng = ChaCha12Rng::seed_from_u64(31);
        for _ in 0..100 {
            let sigma = 0.1 + rng.gen::<f64>();
            let params = DpcParams {
                p_x: 0.1 + 3.0 * rng.gen::<f64>(),
                sigma,
                sigma_z: sigma + 0.1 + rng.gen::<f64>(),
                sigma_e: 0.1 + rng.gen::<f64>(),
                sigma_s: 0.1 + rng.gen::<f64>(),
            };
            let b = dpc_boundary(&params).unwrap();
            let conv = dpc_converse_bound(&params).unwrap();
            assert_eq!(b.distortion.to_bits(), conv.to_bits());
        }
    }

    #[test]
    fn dpc_monotonicity_in_parameters() {
        let base = all_ones();
        let b0 = dpc_boundary(&base).unwrap();
        let more_power = dpc_boundary(&DpcParams {
            p_x: 2.0,
            ..base
        })
        .unwrap();
        assert!(more_power.rate > b0.rate);
        let more_noise = dpc_boundary(&DpcParams {
            sigma: 0.8,
            ..base
        })
        .unwrap();
        assert!(more_noise.rate < b0.rate);
        let worse_csi = dpc_boundary(&DpcParams {
            sigma_e: 1.5,
            ..base
        })
        .unwrap();
        assert!(worse_csi.rate < b0.rate);
    }

    #[test]
    fn dpc_validation() {
        assert!(matches!(
            dpc_boundary(&DpcParams {
                sigma_z: 0.4,
                ..all_ones()
            }),
            Err(GaussianError::FeedbackNotNoisier { .. })
        ));
        assert!(matches!(
            dpc_boundary(&DpcParams {
                p_x: 0.0,
                ..all_ones()
            }),
            Err(GaussianError::NonPositive { .. })
        ));
    }

    fn unit_fading() -> FadingParams {
        FadingParams {
            p_x: 1.0,
            sigma: 1.0,
            sigma_z: 2.0,
            sigma_s: 1.0,
            s_dist: StateDist::Gaussian { variance: 1.0 },
        }
    }

    #[test]
    fn fading_h_closed_form_points() {
        let p = FadingParams {
            sigma_z: 1.0,
            sigma: 0.5,
            ..unit_fading()
        };
        assert!((fading_h(&p, 0.0) - 1.0).abs() < 1e-15); // sigma_s
        assert!((fading_h(&p, 1.0) - 0.5).abs() < 1e-15);
        assert!(fading_h(&p, 1e9) < 1e-15);
        // monotone decreasing in |x|
        assert!(fading_h(&p, 0.5) > fading_h(&p, 1.5));
    }

    #[test]
    fn fading_estimator_points() {
        let p = FadingParams {
            sigma_z: 1.0,
            sigma: 0.5,
            ..unit_fading()
        };
        assert_eq!(fading_estimator(&p, 0.0, 3.0), 0.0);
        assert!((fading_estimator(&p, 1.0, 2.0) - 1.0).abs() < 1e-15);
        // sigma_z -> 0: noiseless inversion z / x
        let p0 = FadingParams {
            sigma_z: 1e-12,
            sigma: 1e-13,
            ..unit_fading()
        };
        assert!((fading_estimator(&p0, 2.0, 3.0) - 1.5).abs() < 1e-9);
    }

    /// Monte Carlo check of the conditional MMSE identity
    /// E_Z[(S - s_hat(x, Z))^2 | x] = H(x).
    #[test]
    fn fading_estimator_mmse_consistency() {
        let params = unit_fading();
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let s_dist = Normal::new(0.0, 1.0).unwrap();
        let nz = Normal::new(0.0, params.sigma_z.sqrt()).unwrap();
        for &x in &[0.0, 0.7, 1.3, 2.5] {
            let n = 400_000;
            let mut acc = 0.0;
            let mut acc2 = 0.0;
            for _ in 0..n {
                let s: f64 = s_dist.sample(&mut rng);
                let z = s * x + nz.sample(&mut rng);
                let err = (s - fading_estimator(&params, x, z)).powi(2);
                acc += err;
                acc2 += err * err;
            }
            let mean = acc / n as f64;
            let se = ((acc2 / n as f64 - mean * mean) / n as f64).sqrt();
            let h = fading_h(&params, x);
            assert!(
                (mean - h).abs() < 3.0 * se + 1e-9,
                "x={x}: {mean} vs {h} (se {se})"
            );
        }
    }

    #[test]
    fn fading_rate_zero_power_is_zero() {
        let params = unit_fading();
        let quad = QuadOpts::default();
        assert_eq!(fading_rate_at(&params, 0.0, &quad).unwrap(), 0.0);
    }

    /// Deterministic unit fading S = 1 reduces the rate to the AWGN value.
    #[test]
    fn fading_capacity_deterministic_state() {
        let params = FadingParams {
            p_x: 1.0,
            sigma: 1.0,
            sigma_z: 2.0,
            sigma_s: 1.0,
            s_dist: StateDist::Finite(vec![(1.0, 1.0)]),
        };
        let quad = QuadOpts::default();
        let point = fading_capacity(&params, 10.0, &quad).unwrap();
        assert!((point.c_nats - 0.5 * LN2).abs() < 1e-12);
        assert_eq!(point.alpha_star, 1.0);

        // Monte Carlo oracle on the rate integral at alpha = 1
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        let xd = Normal::new(0.0, 1.0).unwrap();
        let n = 1_000_000;
        let mut acc = 0.0;
        let mut acc2 = 0.0;
        for _ in 0..n {
            let _x: f64 = xd.sample(&mut rng);
            let v = 0.5 * ((1.0 * params.p_x + params.sigma) / params.sigma).ln();
            acc += v;
            acc2 += v * v;
        }
        let mean = acc / n as f64;
        let se = ((acc2 / n as f64 - mean * mean).max(0.0) / n as f64).sqrt();
        // the integrand is constant here, so 3 SE collapses to the float
        // accumulation floor of a million-term sum
        assert!((point.c_nats - mean).abs() <= 3.0 * se + 1e-9);
    }

    /// Quadrature rate and constraint against Monte Carlo for Gaussian
    /// fading.
    #[test]
    fn fading_quadrature_matches_monte_carlo() {
        let params = unit_fading();
        let quad = QuadOpts::default();
        let alpha = 0.7;
        let rate_q = fading_rate_at(&params, alpha, &quad).unwrap();
        let cons_q = fading_constraint_at(&params, alpha, &quad).unwrap();

        let mut rng = ChaCha12Rng::seed_from_u64(21);
        let sd = Normal::new(0.0, 1.0).unwrap();
        let xd = Normal::new(0.0, (alpha * params.p_x).sqrt()).unwrap();
        let n = 1_000_000;
        let (mut r_acc, mut r_acc2, mut c_acc, mut c_acc2) = (0.0, 0.0, 0.0, 0.0);
        for _ in 0..n {
            let s: f64 = sd.sample(&mut rng);
            let r = 0.5 * ((alpha * s * s * params.p_x + params.sigma) / params.sigma).ln();
            r_acc += r;
            r_acc2 += r * r;
            let x: f64 = xd.sample(&mut rng);
            let c = fading_h(&params, x);
            c_acc += c;
            c_acc2 += c * c;
        }
        let nf = n as f64;
        let r_mean = r_acc / nf;
        let r_se = ((r_acc2 / nf - r_mean * r_mean) / nf).sqrt();
        assert!(
            (rate_q - r_mean).abs() < 3.0 * r_se,
            "rate {rate_q} vs MC {r_mean} +- {r_se}"
        );
        let c_mean = c_acc / nf;
        let c_se = ((c_acc2 / nf - c_mean * c_mean) / nf).sqrt();
        assert!(
            (cons_q - c_mean).abs() < 3.0 * c_se,
            "constraint {cons_q} vs MC {c_mean} +- {c_se}"
        );
    }

    #[test]
    fn fading_capacity_feasibility_structure() {
        let params = unit_fading();
        let quad = QuadOpts::default();
        // constraint at alpha = 0 is sigma_s, so any D >= sigma_s is
        // feasible everywhere and alpha* = 1
        let vacuous = fading_capacity(&params, params.sigma_s + 0.01, &quad).unwrap();
        assert_eq!(vacuous.alpha_star, 1.0);
        // below the alpha = 1 distortion nothing is feasible
        let d_min = fading_constraint_at(&params, 1.0, &quad).unwrap();
        match fading_capacity(&params, d_min * 0.9, &quad) {
            Err(GaussianError::Infeasible { min_reachable, .. }) => {
                assert!((min_reachable - d_min).abs() < 1e-12);
            }
            other => panic!("expected infeasible, got {other:?}"),
        }
        // between the two, still feasible with alpha* = 1 (rate increases
        // with power while sensing improves with power)
        let mid = fading_capacity(&params, 0.5 * (d_min + params.sigma_s), &quad).unwrap();
        assert_eq!(mid.alpha_star, 1.0);
        assert!(mid.distortion <= 0.5 * (d_min + params.sigma_s) + 1e-12);
    }

    #[test]
    fn fading_curve_shape() {
        let params = unit_fading();
        let quad = QuadOpts::default();
        let d_min = fading_constraint_at(&params, 1.0, &quad).unwrap();
        let grid: Vec<f64> = (0..20)
            .map(|i| 0.5 * d_min + i as f64 * 0.05 * params.sigma_s)
            .collect();
        let curve = fading_cd_curve(&params, &grid, &quad).unwrap();
        // infeasible prefix flagged
        assert!(!curve.points[0].feasible);
        let mut seen_feasible = false;
        for p in &curve.points {
            if p.feasible {
                seen_feasible = true;
            } else {
                assert!(!seen_feasible, "infeasible point after a feasible one");
            }
        }
        // feasible tail non-decreasing and midpoint-concave
        let feasible: Vec<_> = curve.points.iter().filter(|p| p.feasible).collect();
        assert!(feasible.len() >= 2);
        for w in feasible.windows(2) {
            assert!(w[1].c_nats >= w[0].c_nats - 1e-15);
        }
        assert!(curve.max_midpoint_concavity_violation() <= 1e-6);

        assert!(matches!(
            fading_cd_curve(&params, &[], &quad),
            Err(GaussianError::BadGrid)
        ));
        assert!(matches!(
            fading_cd_curve(&params, &[0.5, 0.4], &quad),
            Err(GaussianError::BadGrid)
        ));
    }

    #[test]
    fn fading_capacity_monotone_in_power() {
        let quad = QuadOpts::default();
        let lo = fading_capacity(
            &FadingParams {
                p_x: 0.5,
                ..unit_fading()
            },
            2.0,
            &quad,
        )
        .unwrap();
        let hi = fading_capacity(
            &FadingParams {
                p_x: 2.0,
                ..unit_fading()
            },
            2.0,
            &quad,
        )
        .unwrap();
        assert!(hi.c_nats > lo.c_nats);
    }

    #[test]
    fn mixed_fading_identical_components_match_single() {
        let params = unit_fading();
        let quad = QuadOpts::default();
        let single = fading_capacity(&params, 0.9, &quad).unwrap();
        let mixed = mixed_fading_rate(&params, &params, 0.3, 0.9, &quad).unwrap();
        assert!((single.c_nats - mixed.c_nats).abs() < 1e-12);
    }

    /// With sigma_s1 < sigma_s2 and common noise the weaker-fading
    /// component is the bottleneck at every alpha.
    #[test]
    fn mixed_fading_min_component_binds() {
        let p1 = unit_fading();
        let p2 = FadingParams {
            sigma_s: 4.0,
            s_dist: StateDist::Gaussian { variance: 4.0 },
            ..unit_fading()
        };
        let quad = QuadOpts::default();
        let d = 1.5;
        let point = mixed_fading_rate(&p1, &p2, 0.5, d, &quad).unwrap();
        let r1 = fading_rate_at(&p1, point.alpha_star, &quad).unwrap();
        let r2 = fading_rate_at(&p2, point.alpha_star, &quad).unwrap();
        assert!(r1 < r2);
        assert!((point.c_nats - r1).abs() < 1e-12);

        // Monte Carlo on both integrals at alpha*
        let mut rng = ChaCha12Rng::seed_from_u64(33);
        for (params, expect) in [(&p1, r1), (&p2, r2)] {
            let sd = Normal::new(0.0, params.s_dist.second_moment().sqrt()).unwrap();
            let n = 1_000_000;
            let mut acc = 0.0;
            let mut acc2 = 0.0;
            for _ in 0..n {
                let s: f64 = sd.sample(&mut rng);
                let v = 0.5
                    * ((point.alpha_star * s * s * params.p_x + params.sigma) / params.sigma)
                        .ln();
                acc += v;
                acc2 += v * v;
            }
            let mean = acc / n as f64;
            let se = ((acc2 / n as f64 - mean * mean) / n as f64).sqrt();
            assert!(
                (expect - mean).abs() < 3.0 * se,
                "{expect} vs MC {mean} +- {se}"
            );
        }
    }

    /// The rate is still the min over both components even when beta = 1
    /// removes component 2 from the constraint.
    #[test]
    fn mixed_fading_beta_one_still_takes_min() {
        let p1 = FadingParams {
            sigma_s: 4.0,
            s_dist: StateDist::Gaussian { variance: 4.0 },
            ..unit_fading()
        };
        let p2 = unit_fading(); // weaker fading: smaller rate
        let quad = QuadOpts::default();
        let d = 3.9; // feasible for the beta-weighted constraint
        let point = mixed_fading_rate(&p1, &p2, 1.0, d, &quad).unwrap();
        let r2 = fading_rate_at(&p2, point.alpha_star, &quad).unwrap();
        assert!((point.c_nats - r2).abs() < 1e-12, "min must bind on component 2");
    }

    #[test]
    fn state_dist_second_moment_validation() {
        let bad = FadingParams {
            sigma_s: 0.5,
            s_dist: StateDist::Gaussian { variance: 1.0 },
            ..unit_fading()
        };
        assert!(matches!(
            bad.validate(),
            Err(GaussianError::SecondMomentTooLarge { .. })
        ));
    }
}
