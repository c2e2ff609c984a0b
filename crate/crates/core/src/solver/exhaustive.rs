//! Certified enumeration backend: deterministic auxiliary and input
//! kernels, action distribution on a simplex grid. Global optimum over
//! this class by construction; meant for tiny instances and tests.

use rayon::prelude::*;

use crate::model::Policy;
use crate::prob::FiniteDist;

use super::{
    deterministic_kernel, simplex_grid, CapacitySolution, ModelCtx, Result, SolveError, SolveOpts,
};

/// Number of deterministic maps from `cells` cells into `out` symbols.
fn det_count(cells: usize, out: usize) -> u128 {
    (out as u128).checked_pow(cells as u32).unwrap_or(u128::MAX)
}

/// Decodes map index `code` into per-cell output choices.
fn det_map(code: u128, cells: usize, out: usize) -> Vec<usize> {
    let mut map = vec![0usize; cells];
    let mut c = code;
    for slot in map.iter_mut() {
        *slot = (c % out as u128) as usize;
        c /= out as u128;
    }
    map
}

pub(super) fn solve(
    ctx: &ModelCtx,
    d: f64,
    p_a_grid: usize,
    opts: &SolveOpts,
) -> Result<CapacitySolution> {
    let al = &ctx.model.alphabets;
    let nu = opts.resolved_u_size(ctx.model);
    let u_cells = al.a * al.s_e;
    let x_cells = nu * al.s_e;
    let n_u = det_count(u_cells, nu);
    let n_x = det_count(x_cells, al.x);
    let pa_points = simplex_grid(al.a, p_a_grid);
    let total = n_u
        .saturating_mul(n_x)
        .saturating_mul(pa_points.len() as u128);
    if total > opts.policy_cap {
        return Err(SolveError::TooManyPolicies {
            count: total,
            cap: opts.policy_cap,
        });
    }

    struct Best {
        objective: f64,
        code: (u128, u128, usize),
        policy: Option<Policy>,
    }

    let feas_tol = opts.feasibility_tol;
    let kernel_codes: Vec<(u128, u128)> = (0..n_u)
        .flat_map(|cu| (0..n_x).map(move |cx| (cu, cx)))
        .collect();

    let evaluated: Vec<(Option<Best>, f64)> = kernel_codes
        .par_iter()
        .map(|&(cu, cx)| {
            let p_u = deterministic_kernel(
                vec![al.a, al.s_e],
                nu,
                &det_map(cu, u_cells, nu),
            );
            let p_x = deterministic_kernel(
                vec![nu, al.s_e],
                al.x,
                &det_map(cx, x_cells, al.x),
            );
            let mut best: Option<Best> = None;
            let mut min_dist = f64::INFINITY;
            for (pi, p_a) in pa_points.iter().enumerate() {
                let policy = Policy {
                    u_size: nu,
                    p_a: p_a.clone(),
                    p_u_given_a_se: p_u.clone(),
                    p_x_given_u_se: p_x.clone(),
                };
                let report = ctx.evaluate(&policy);
                min_dist = min_dist.min(report.distortion);
                if report.distortion <= d + feas_tol {
                    let better = best
                        .as_ref()
                        .map(|b| report.objective > b.objective)
                        .unwrap_or(true);
                    if better {
                        best = Some(Best {
                            objective: report.objective,
                            code: (cu, cx, pi),
                            policy: Some(policy),
                        });
                    }
                }
            }
            (best, min_dist)
        })
        .collect();

    let mut min_dist = f64::INFINITY;
    let mut best: Option<Best> = None;
    for (cand, md) in evaluated {
        min_dist = min_dist.min(md);
        if let Some(c) = cand {
            let take = match &best {
                None => true,
                // deterministic tie-break: lexicographically smallest code
                Some(b) => c.objective > b.objective
                    || (c.objective == b.objective && c.code < b.code),
            };
            if take {
                best = Some(c);
            }
        }
    }

    match best {
        Some(b) => {
            let policy = b.policy.expect("winning policy retained");
            let report = ctx.evaluate(&policy);
            Ok(CapacitySolution {
                c_nats: b.objective,
                policy,
                report,
                u_size: nu,
                mode_used: "exhaustive",
                restarts_used: 0,
                feasibility_tol: opts.feasibility_tol,
            })
        }
        None => Err(SolveError::Infeasible {
            requested: d,
            min_found: min_dist,
        }),
    }
}

/// Lagrangian variant: maximizes objective - lambda * distortion over the
/// same enumerated class, with no feasibility filter.
pub(super) fn solve_lagrangian(
    ctx: &ModelCtx,
    lambda: f64,
    p_a_grid: usize,
    opts: &SolveOpts,
) -> Result<(Policy, f64, f64)> {
    let al = &ctx.model.alphabets;
    let nu = opts.resolved_u_size(ctx.model);
    let u_cells = al.a * al.s_e;
    let x_cells = nu * al.s_e;
    let n_u = det_count(u_cells, nu);
    let n_x = det_count(x_cells, al.x);
    let pa_points = simplex_grid(al.a, p_a_grid);
    let total = n_u
        .saturating_mul(n_x)
        .saturating_mul(pa_points.len() as u128);
    if total > opts.policy_cap {
        return Err(SolveError::TooManyPolicies {
            count: total,
            cap: opts.policy_cap,
        });
    }

    let kernel_codes: Vec<(u128, u128)> = (0..n_u)
        .flat_map(|cu| (0..n_x).map(move |cx| (cu, cx)))
        .collect();
    let best = kernel_codes
        .par_iter()
        .map(|&(cu, cx)| {
            let p_u = deterministic_kernel(vec![al.a, al.s_e], nu, &det_map(cu, u_cells, nu));
            let p_x = deterministic_kernel(vec![nu, al.s_e], al.x, &det_map(cx, x_cells, al.x));
            let mut local: Option<(f64, (u128, u128, usize), FiniteDist)> = None;
            for (pi, p_a) in pa_points.iter().enumerate() {
                let policy = Policy {
                    u_size: nu,
                    p_a: p_a.clone(),
                    p_u_given_a_se: p_u.clone(),
                    p_x_given_u_se: p_x.clone(),
                };
                let report = ctx.evaluate(&policy);
                let value = report.objective - lambda * report.distortion;
                let better = local.as_ref().map(|l| value > l.0).unwrap_or(true);
                if better {
                    local = Some((value, (cu, cx, pi), p_a.clone()));
                }
            }
            local
        })
        .reduce(
            || None,
            |a, b| match (a, b) {
                (None, x) | (x, None) => x,
                (Some(x), Some(y)) => {
                    if y.0 > x.0 || (y.0 == x.0 && y.1 < x.1) {
                        Some(y)
                    } else {
                        Some(x)
                    }
                }
            },
        )
        .expect("enumerated class is non-empty");

    let (_, (cu, cx, _), p_a) = best;
    let policy = Policy {
        u_size: nu,
        p_a,
        p_u_given_a_se: deterministic_kernel(vec![al.a, al.s_e], nu, &det_map(cu, u_cells, nu)),
        p_x_given_u_se: deterministic_kernel(vec![nu, al.s_e], al.x, &det_map(cx, x_cells, al.x)),
    };
    let report = ctx.evaluate(&policy);
    Ok((policy, report.objective, report.distortion))
}
