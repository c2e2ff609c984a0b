//! Nonstationary (symbol-indexed) capacity under an average distortion
//! budget, by Lagrangian decomposition: for a multiplier lambda, every
//! symbol maximizes objective_i - lambda * distortion_i independently;
//! bisection on lambda meets the average constraint, and time-sharing
//! between the bracketing solutions closes the remaining gap up to the
//! reported bound.

use crate::model::{IsacModel, Policy};

use super::{ascent, exhaustive, ModelCtx, OptimizerMode, Result, SolveError, SolveOpts};

#[derive(Debug, Clone)]
pub struct SymbolSolution {
    pub policy: Policy,
    pub objective: f64,
    pub distortion: f64,
}

/// Solution of the coupled per-symbol problem.
///
/// `rate` is the time-shared average rate; `share_weight` is the weight on
/// the `high` (feasible-side) solutions; `gap_bound` bounds how far `rate`
/// can lie below the true optimum over the same per-symbol policy class.
#[derive(Debug, Clone)]
pub struct NonstationarySolution {
    pub rate: f64,
    pub lambda: f64,
    pub gap_bound: f64,
    pub share_weight: f64,
    pub average_distortion: f64,
    pub low: Vec<SymbolSolution>,
    pub high: Vec<SymbolSolution>,
}

fn solve_symbols(
    ctxs: &[ModelCtx],
    lambda: f64,
    opts: &SolveOpts,
    warm: Option<&[SymbolSolution]>,
) -> Result<Vec<SymbolSolution>> {
    ctxs.iter()
        .enumerate()
        .map(|(i, ctx)| {
            let warm_policy = warm.map(|w| &w[i].policy);
            let (policy, objective, distortion) = match &opts.mode {
                OptimizerMode::Exhaustive { p_a_grid } => {
                    exhaustive::solve_lagrangian(ctx, lambda, *p_a_grid, opts)?
                }
                OptimizerMode::Ascent(a_opts) => {
                    ascent::solve_lagrangian(ctx, lambda, a_opts, opts, warm_policy)?
                }
            };
            Ok(SymbolSolution {
                policy,
                objective,
                distortion,
            })
        })
        .collect()
}

fn average(sols: &[SymbolSolution]) -> (f64, f64) {
    let n = sols.len() as f64;
    let r = sols.iter().map(|s| s.objective).sum::<f64>() / n;
    let d = sols.iter().map(|s| s.distortion).sum::<f64>() / n;
    (r, d)
}

/// Dual value at lambda: average max (objective - lambda distortion) + lambda D.
/// Upper-bounds the constrained optimum over the same policy class.
fn dual_value(sols: &[SymbolSolution], lambda: f64, d: f64) -> f64 {
    let n = sols.len() as f64;
    let l: f64 = sols
        .iter()
        .map(|s| s.objective - lambda * s.distortion)
        .sum::<f64>()
        / n;
    l + lambda * d
}

pub fn nonstationary_capacity(
    models: &[IsacModel],
    d: f64,
    opts: &SolveOpts,
) -> Result<NonstationarySolution> {
    if models.is_empty() {
        return Err(SolveError::EmptyModelList);
    }
    let ctxs: Vec<ModelCtx> = models.iter().map(ModelCtx::new).collect();

    let sols0 = solve_symbols(&ctxs, 0.0, opts, None)?;
    let (r0, d0) = average(&sols0);
    if d0 <= d + opts.feasibility_tol {
        return Ok(NonstationarySolution {
            rate: r0,
            lambda: 0.0,
            gap_bound: 0.0,
            share_weight: 1.0,
            average_distortion: d0,
            low: sols0.clone(),
            high: sols0,
        });
    }

    // find a feasible-side multiplier by doubling
    let mut lambda_hi = 1.0;
    let mut sols_hi = solve_symbols(&ctxs, lambda_hi, opts, Some(&sols0))?;
    let mut d_hi = average(&sols_hi).1;
    let mut doublings = 0;
    while d_hi > d + opts.feasibility_tol {
        lambda_hi *= 2.0;
        doublings += 1;
        if doublings > 60 {
            return Err(SolveError::Infeasible {
                requested: d,
                min_found: d_hi,
            });
        }
        sols_hi = solve_symbols(&ctxs, lambda_hi, opts, Some(&sols_hi))?;
        d_hi = average(&sols_hi).1;
    }

    let mut lambda_lo = lambda_hi / 2.0;
    if doublings == 0 {
        lambda_lo = 0.0;
    }
    let mut sols_lo = if lambda_lo == 0.0 {
        sols0
    } else {
        solve_symbols(&ctxs, lambda_lo, opts, Some(&sols_hi))?
    };

    for _ in 0..40 {
        let mid = 0.5 * (lambda_lo + lambda_hi);
        let sols_mid = solve_symbols(&ctxs, mid, opts, Some(&sols_hi))?;
        let d_mid = average(&sols_mid).1;
        if d_mid > d + opts.feasibility_tol {
            lambda_lo = mid;
            sols_lo = sols_mid;
        } else {
            lambda_hi = mid;
            sols_hi = sols_mid;
        }
        if lambda_hi - lambda_lo < 1e-9 * (1.0 + lambda_hi) {
            break;
        }
    }

    let (r_lo, d_lo) = average(&sols_lo);
    let (r_hi, d_hi) = average(&sols_hi);
    // time share t on the feasible side so the mixed distortion meets D
    let t = if d_lo - d_hi > 1e-15 {
        ((d_lo - d) / (d_lo - d_hi)).clamp(0.0, 1.0)
    } else {
        1.0
    };
    let rate = t * r_hi + (1.0 - t) * r_lo;
    let avg_dist = t * d_hi + (1.0 - t) * d_lo;
    let gap_bound = dual_value(&sols_lo, lambda_lo, d)
        .min(dual_value(&sols_hi, lambda_hi, d))
        - rate;
    Ok(NonstationarySolution {
        rate,
        lambda: lambda_hi,
        gap_bound: gap_bound.max(0.0),
        share_weight: t,
        average_distortion: avg_dist,
        low: sols_lo,
        high: sols_hi,
    })
}
