//! Single-letter capacity-distortion solver.
//!
//! Evaluates the achievable-rate objective I(A,U; Y,S_d) - I(U; S_e|A) of
//! a policy together with the optimal-estimator distortion, maximizes it
//! under a distortion budget (certified exhaustive enumeration on tiny
//! instances, multi-start exponentiated-gradient ascent otherwise), and
//! extends the machinery to mixed models and nonstationary symbol lists.

mod ascent;
mod exhaustive;
mod mixed;
mod nonstationary;

pub use ascent::AscentOpts;
pub use mixed::{
    mixed_distortion_decomposition, mixed_rate, MixedDistortionReport, MixedModel,
    MixedRateReport,
};
pub use nonstationary::{nonstationary_capacity, NonstationarySolution, SymbolSolution};

use thiserror::Error;

use crate::estimator::{optimal_estimator, DistortionMap};
use crate::model::{IsacModel, ModelError, Policy};
use crate::prob::{FiniteDist, FiniteKernel, ProbError};

#[derive(Debug, Error)]
pub enum SolveError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Prob(#[from] ProbError),
    #[error(transparent)]
    Estimator(#[from] crate::estimator::EstimatorError),
    #[error("distortion budget {requested} is infeasible; smallest distortion found is {min_found}")]
    Infeasible { requested: f64, min_found: f64 },
    #[error("exhaustive mode would enumerate {count} policies, cap is {cap}")]
    TooManyPolicies { count: u128, cap: u128 },
    #[error("empty distortion grid")]
    EmptyGrid,
    #[error("empty model list")]
    EmptyModelList,
    #[error("mixed model invalid: {0}")]
    MixedModel(String),
}

pub type Result<T> = std::result::Result<T, SolveError>;

/// The two mutual-information terms of the objective, their difference,
/// and the optimal-estimator distortion of the evaluated policy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveReport {
    /// I(A, U; Y, S_d) in nats.
    pub i_auy: f64,
    /// I(U; S_e | A) in nats.
    pub i_use: f64,
    /// i_auy - i_use.
    pub objective: f64,
    /// Expected per-symbol distortion under the optimal estimator.
    pub distortion: f64,
}

/// Optimizer backend selection.
#[derive(Debug, Clone)]
pub enum OptimizerMode {
    /// Certified enumeration: deterministic auxiliary/input kernels with
    /// the action distribution on a simplex grid of the given resolution
    /// (grid step 1/resolution).
    Exhaustive { p_a_grid: usize },
    /// Multi-start alternating exponentiated-gradient ascent.
    Ascent(AscentOpts),
}

#[derive(Debug, Clone)]
pub struct SolveOpts {
    /// Auxiliary alphabet size; defaults to |X| * |S_e| + 1, a support
    /// counting heuristic recorded as such (no cardinality theorem backs
    /// the action-dependent case).
    pub u_size: Option<usize>,
    pub mode: OptimizerMode,
    pub seed: u64,
    /// Slack allowed on the distortion constraint.
    pub feasibility_tol: f64,
    /// Refuse exhaustive enumerations larger than this.
    pub policy_cap: u128,
}

impl Default for SolveOpts {
    fn default() -> Self {
        Self {
            u_size: None,
            mode: OptimizerMode::Ascent(AscentOpts::default()),
            seed: 0,
            feasibility_tol: 1e-9,
            policy_cap: 2_000_000,
        }
    }
}

impl SolveOpts {
    pub fn exhaustive(p_a_grid: usize) -> Self {
        Self {
            mode: OptimizerMode::Exhaustive { p_a_grid },
            ..Self::default()
        }
    }

    pub fn resolved_u_size(&self, model: &IsacModel) -> usize {
        self.u_size
            .unwrap_or(model.alphabets.x * model.alphabets.s_e + 1)
    }
}

/// A solved capacity point.
#[derive(Debug, Clone)]
pub struct CapacitySolution {
    pub c_nats: f64,
    pub policy: Policy,
    pub report: ObjectiveReport,
    pub u_size: usize,
    pub mode_used: &'static str,
    pub restarts_used: usize,
    /// Slack that was allowed on the distortion constraint.
    pub feasibility_tol: f64,
}

/// Ordered capacity-distortion curve with the achieving policy per point.
#[derive(Debug, Clone)]
pub struct CdCurve {
    pub points: Vec<CdPoint>,
}

#[derive(Debug, Clone)]
pub struct CdPoint {
    pub d: f64,
    pub c_nats: f64,
    pub policy: Policy,
    pub report: ObjectiveReport,
}

// ---------------------------------------------------------------------------
// Policy evaluation
// ---------------------------------------------------------------------------

/// Model-derived tables shared across many policy evaluations.
pub(crate) struct ModelCtx<'m> {
    pub model: &'m IsacModel,
    /// P(s_e | a).
    pub se: FiniteKernel,
    /// P(y | x, s).
    pub y: FiniteKernel,
    /// Optimal-estimator conditional distortion e(a, x, s_e).
    pub dist_map: DistortionMap,
}

impl<'m> ModelCtx<'m> {
    pub fn new(model: &'m IsacModel) -> Self {
        Self {
            model,
            se: model.state_se(),
            y: model.channel_y(),
            dist_map: optimal_estimator(model).distortion_map,
        }
    }

    /// Expected distortion of a policy under the optimal estimator,
    /// through the precomputed conditional-distortion table.
    pub fn distortion(&self, policy: &Policy) -> f64 {
        let al = &self.model.alphabets;
        let mut total = 0.0;
        for a in 0..al.a {
            let pa = policy.p_a.prob(a);
            if pa == 0.0 {
                continue;
            }
            for s_e in 0..al.s_e {
                let pse = self.se.prob(&[a], &[s_e]);
                if pse == 0.0 {
                    continue;
                }
                for u in 0..policy.u_size {
                    let pu = policy.p_u_given_a_se.prob(&[a, s_e], &[u]);
                    if pu == 0.0 {
                        continue;
                    }
                    for x in 0..al.x {
                        let px = policy.p_x_given_u_se.prob(&[u, s_e], &[x]);
                        if px > 0.0 {
                            total += pa * pse * pu * px * self.dist_map.get(a, x, s_e);
                        }
                    }
                }
            }
        }
        total
    }

    /// Evaluates the objective and distortion of a policy.
    pub fn evaluate(&self, policy: &Policy) -> ObjectiveReport {
        let al = &self.model.alphabets;
        let nu = policy.u_size;

        // q(y | u, s_e, s) = sum_x P(x | u, s_e) P(y | x, s)
        let mut q = vec![0.0; nu * al.s_e * al.s * al.y];
        for u in 0..nu {
            for s_e in 0..al.s_e {
                for s in 0..al.s {
                    for x in 0..al.x {
                        let px = policy.p_x_given_u_se.prob(&[u, s_e], &[x]);
                        if px == 0.0 {
                            continue;
                        }
                        for y in 0..al.y {
                            q[((u * al.s_e + s_e) * al.s + s) * al.y + y] +=
                                px * self.y.prob(&[x, s], &[y]);
                        }
                    }
                }
            }
        }

        // joint of (a, u, y, s_d) and of (a, u, s_e)
        let mut m_auysd = vec![0.0; al.a * nu * al.y * al.s_d];
        let mut m_ause = vec![0.0; al.a * nu * al.s_e];
        for a in 0..al.a {
            let pa = policy.p_a.prob(a);
            if pa == 0.0 {
                continue;
            }
            for s_e in 0..al.s_e {
                for u in 0..nu {
                    let pu = policy.p_u_given_a_se.prob(&[a, s_e], &[u]);
                    if pu == 0.0 {
                        continue;
                    }
                    m_ause[(a * nu + u) * al.s_e + s_e] += pa * self.se.prob(&[a], &[s_e]) * pu;
                    for s in 0..al.s {
                        for s_d in 0..al.s_d {
                            let pst = self.model.state_kernel.prob(&[a], &[s_e, s, s_d]);
                            if pst == 0.0 {
                                continue;
                            }
                            let base = pa * pst * pu;
                            for y in 0..al.y {
                                m_auysd[((a * nu + u) * al.y + y) * al.s_d + s_d] +=
                                    base * q[((u * al.s_e + s_e) * al.s + s) * al.y + y];
                            }
                        }
                    }
                }
            }
        }

        let i_auy = mi_grouped(&m_auysd, al.a * nu, al.y * al.s_d);
        let i_use = cmi_use(&m_ause, al.a, nu, al.s_e);
        ObjectiveReport {
            i_auy,
            i_use,
            objective: i_auy - i_use,
            distortion: self.distortion(policy),
        }
    }
}

/// I(G; H) for a dense joint laid out as [g][h].
fn mi_grouped(joint: &[f64], ng: usize, nh: usize) -> f64 {
    let mut pg = vec![0.0; ng];
    let mut ph = vec![0.0; nh];
    for g in 0..ng {
        for h in 0..nh {
            let p = joint[g * nh + h];
            pg[g] += p;
            ph[h] += p;
        }
    }
    let mut mi = 0.0;
    for g in 0..ng {
        for h in 0..nh {
            let p = joint[g * nh + h];
            if p > 0.0 {
                mi += p * (p / (pg[g] * ph[h])).ln();
            }
        }
    }
    mi
}

/// I(U; S_e | A) for a dense joint laid out as [a][u][s_e].
fn cmi_use(joint: &[f64], na: usize, nu: usize, nse: usize) -> f64 {
    let mut p_a = vec![0.0; na];
    let mut p_au = vec![0.0; na * nu];
    let mut p_ase = vec![0.0; na * nse];
    for a in 0..na {
        for u in 0..nu {
            for s_e in 0..nse {
                let p = joint[(a * nu + u) * nse + s_e];
                p_a[a] += p;
                p_au[a * nu + u] += p;
                p_ase[a * nse + s_e] += p;
            }
        }
    }
    let mut cmi = 0.0;
    for a in 0..na {
        for u in 0..nu {
            for s_e in 0..nse {
                let p = joint[(a * nu + u) * nse + s_e];
                if p > 0.0 {
                    cmi += p * (p * p_a[a] / (p_au[a * nu + u] * p_ase[a * nse + s_e])).ln();
                }
            }
        }
    }
    cmi
}

/// Evaluates the rate objective I(A,U; Y,S_d) - I(U; S_e|A) and the
/// optimal-estimator distortion of a policy.
pub fn evaluate_policy(model: &IsacModel, policy: &Policy) -> Result<ObjectiveReport> {
    model.check_policy(policy)?;
    Ok(ModelCtx::new(model).evaluate(policy))
}

/// Replaces the auxiliary by U' = (U, A), leaving the induced joint (and
/// therefore objective and distortion) unchanged. The flattening is
/// u' = u * |A| + a.
pub fn augment_policy(model: &IsacModel, policy: &Policy) -> Result<Policy> {
    model.check_policy(policy)?;
    let al = &model.alphabets;
    let nu = policy.u_size;
    let nu2 = nu * al.a;
    let p_u2 = FiniteKernel::from_fn(vec![al.a, al.s_e], vec![nu2], |c, o| {
        let (a, s_e) = (c[0], c[1]);
        let (u, a_tag) = (o[0] / al.a, o[0] % al.a);
        if a_tag == a {
            policy.p_u_given_a_se.prob(&[a, s_e], &[u])
        } else {
            0.0
        }
    })?;
    let p_x2 = FiniteKernel::from_fn(vec![nu2, al.s_e], vec![al.x], |c, o| {
        let (u, s_e) = (c[0] / al.a, c[1]);
        policy.p_x_given_u_se.prob(&[u, s_e], &[o[0]])
    })?;
    Ok(Policy {
        u_size: nu2,
        p_a: policy.p_a.clone(),
        p_u_given_a_se: p_u2,
        p_x_given_u_se: p_x2,
    })
}

/// Best found rate at distortion budget `d`.
///
/// In exhaustive mode the result is a certified global optimum over the
/// enumerated class (deterministic kernels, gridded action distribution).
/// An infeasible budget is reported distinctly.
pub fn capacity_at(model: &IsacModel, d: f64, opts: &SolveOpts) -> Result<CapacitySolution> {
    capacity_at_warm(model, d, opts, None)
}

pub(crate) fn capacity_at_warm(
    model: &IsacModel,
    d: f64,
    opts: &SolveOpts,
    warm: Option<&Policy>,
) -> Result<CapacitySolution> {
    let ctx = ModelCtx::new(model);
    match &opts.mode {
        OptimizerMode::Exhaustive { p_a_grid } => {
            exhaustive::solve(&ctx, d, *p_a_grid, opts)
        }
        OptimizerMode::Ascent(a_opts) => ascent::solve(&ctx, d, a_opts, opts, warm),
    }
}

/// Capacity-distortion curve over a strictly increasing distortion grid.
///
/// Each point warm-starts from the previous solution and the curve is made
/// non-decreasing by cumulative max (feasible sets are nested in D).
pub fn cd_curve(model: &IsacModel, d_grid: &[f64], opts: &SolveOpts) -> Result<CdCurve> {
    if d_grid.is_empty() {
        return Err(SolveError::EmptyGrid);
    }
    for w in d_grid.windows(2) {
        if w[1] <= w[0] {
            return Err(SolveError::EmptyGrid);
        }
    }
    let mut points: Vec<CdPoint> = Vec::with_capacity(d_grid.len());
    for &d in d_grid {
        let warm = points.last().map(|p| p.policy.clone());
        let sol = capacity_at_warm(model, d, opts, warm.as_ref())?;
        let better_than_prev = points
            .last()
            .map(|p| sol.c_nats > p.c_nats)
            .unwrap_or(true);
        if better_than_prev {
            points.push(CdPoint {
                d,
                c_nats: sol.c_nats,
                policy: sol.policy,
                report: sol.report,
            });
        } else {
            let prev = points.last().unwrap().clone();
            points.push(CdPoint { d, ..prev });
        }
    }
    Ok(CdCurve { points })
}

/// Deterministic kernel with out[cell] fixed by `map`.
pub fn deterministic_kernel(
    cond_sizes: Vec<usize>,
    out_size: usize,
    map: &[usize],
) -> FiniteKernel {
    let mut probs = vec![0.0; map.len() * out_size];
    for (cell, &o) in map.iter().enumerate() {
        probs[cell * out_size + o] = 1.0;
    }
    FiniteKernel::new(cond_sizes, vec![out_size], probs).expect("deterministic kernel")
}

/// All length-`parts` compositions of `grid` as probability vectors.
pub fn simplex_grid(parts: usize, grid: usize) -> Vec<FiniteDist> {
    let mut out = Vec::new();
    let mut current = vec![0usize; parts];
    fn rec(
        i: usize,
        remaining: usize,
        grid: usize,
        current: &mut [usize],
        out: &mut Vec<FiniteDist>,
    ) {
        if i + 1 == current.len() {
            current[i] = remaining;
            let probs = current.iter().map(|&k| k as f64 / grid as f64).collect();
            out.push(FiniteDist::new(probs).expect("grid point on the simplex"));
            return;
        }
        for k in 0..=remaining {
            current[i] = k;
            rec(i + 1, remaining - k, grid, current, out);
        }
    }
    rec(0, grid, grid, &mut current, &mut out);
    out
}
