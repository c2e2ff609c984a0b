//! Multi-start alternating maximization backend.
//!
//! Each kernel (action distribution, auxiliary kernel, input kernel) is
//! updated in turn by an exponentiated-gradient step while the others are
//! held fixed; the distortion constraint enters as a growing hinge
//! penalty. The objective is nonconvex, so restarts run from independent
//! seeded initializations and the best feasible policy wins.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;

use crate::model::Policy;
use crate::prob::{FiniteDist, FiniteKernel};

use super::{CapacitySolution, ModelCtx, ObjectiveReport, Result, SolveError, SolveOpts};

#[derive(Debug, Clone)]
pub struct AscentOpts {
    pub restarts: usize,
    pub iters: usize,
    /// Exponentiated-gradient step size.
    pub step: f64,
    pub penalty_init: f64,
    pub penalty_growth: f64,
    /// Grow the penalty every this many iterations while infeasible.
    pub penalty_every: usize,
}

impl Default for AscentOpts {
    fn default() -> Self {
        Self {
            restarts: 32,
            iters: 400,
            step: 1.0,
            penalty_init: 4.0,
            penalty_growth: 3.0,
            penalty_every: 80,
        }
    }
}

/// Mutable policy tables during ascent (rows stored flat).
struct Vars {
    p_a: Vec<f64>,
    q_u: Vec<f64>,
    q_x: Vec<f64>,
}

struct Dims {
    na: usize,
    nu: usize,
    nse: usize,
    ns: usize,
    nsd: usize,
    nx: usize,
    ny: usize,
}

impl Vars {
    fn random<R: Rng>(dims: &Dims, rng: &mut R) -> Self {
        let row = |rng: &mut R, n: usize| -> Vec<f64> {
            let raw: Vec<f64> = (0..n).map(|_| -(rng.gen::<f64>()).ln()).collect();
            let s: f64 = raw.iter().sum();
            raw.iter().map(|v| v / s).collect()
        };
        let mut q_u = Vec::with_capacity(dims.na * dims.nse * dims.nu);
        for _ in 0..dims.na * dims.nse {
            q_u.extend(row(rng, dims.nu));
        }
        let mut q_x = Vec::with_capacity(dims.nu * dims.nse * dims.nx);
        for _ in 0..dims.nu * dims.nse {
            q_x.extend(row(rng, dims.nx));
        }
        Self {
            p_a: row(rng, dims.na),
            q_u,
            q_x,
        }
    }

    fn from_policy(policy: &Policy) -> Self {
        let collect = |k: &FiniteKernel| -> Vec<f64> {
            (0..k.n_rows()).flat_map(|r| k.row(r).to_vec()).collect()
        };
        Self {
            p_a: policy.p_a.as_slice().to_vec(),
            q_u: collect(&policy.p_u_given_a_se),
            q_x: collect(&policy.p_x_given_u_se),
        }
    }

    fn to_policy(&self, dims: &Dims) -> Policy {
        Policy {
            u_size: dims.nu,
            p_a: FiniteDist::new(normalize(self.p_a.clone())).expect("simplex point"),
            p_u_given_a_se: FiniteKernel::new(
                vec![dims.na, dims.nse],
                vec![dims.nu],
                normalize_rows(self.q_u.clone(), dims.nu),
            )
            .expect("stochastic rows"),
            p_x_given_u_se: FiniteKernel::new(
                vec![dims.nu, dims.nse],
                vec![dims.nx],
                normalize_rows(self.q_x.clone(), dims.nx),
            )
            .expect("stochastic rows"),
        }
    }
}

fn normalize(mut v: Vec<f64>) -> Vec<f64> {
    let s: f64 = v.iter().sum();
    for x in &mut v {
        *x /= s;
    }
    v
}

fn normalize_rows(mut v: Vec<f64>, width: usize) -> Vec<f64> {
    for row in v.chunks_mut(width) {
        let s: f64 = row.iter().sum();
        for x in row {
            *x /= s;
        }
    }
    v
}

/// Per-row conditional expected scores for all three kernels, computed in
/// one sweep of the (a, s_e, s, s_d, u, x, y) lattice. The score of an
/// outcome is the objective integrand minus `lambda` times the
/// conditional distortion e(a, x, s_e).
struct Scores {
    t_a: Vec<f64>,
    t_u: Vec<f64>,
    t_x: Vec<f64>,
    objective: f64,
    distortion: f64,
}

fn sweep(ctx: &ModelCtx, dims: &Dims, vars: &Vars, lambda: f64) -> Scores {
    let Dims {
        na,
        nu,
        nse,
        ns,
        nsd,
        nx,
        ny,
    } = *dims;

    // marginals needed by the score terms
    let mut m_auysd = vec![0.0; na * nu * ny * nsd];
    let mut m_ause = vec![0.0; na * nu * nse];
    // q(y | u, s_e, s)
    let mut q = vec![0.0; nu * nse * ns * ny];
    for u in 0..nu {
        for s_e in 0..nse {
            for s in 0..ns {
                for x in 0..nx {
                    let px = vars.q_x[(u * nse + s_e) * nx + x];
                    if px == 0.0 {
                        continue;
                    }
                    for y in 0..ny {
                        q[((u * nse + s_e) * ns + s) * ny + y] +=
                            px * ctx.y.prob(&[x, s], &[y]);
                    }
                }
            }
        }
    }
    for a in 0..na {
        let pa = vars.p_a[a];
        if pa == 0.0 {
            continue;
        }
        for s_e in 0..nse {
            let pse = ctx.se.prob(&[a], &[s_e]);
            for u in 0..nu {
                let pu = vars.q_u[(a * nse + s_e) * nu + u];
                if pu == 0.0 {
                    continue;
                }
                m_ause[(a * nu + u) * nse + s_e] += pa * pse * pu;
                for s in 0..ns {
                    for s_d in 0..nsd {
                        let pst = ctx.model.state_kernel.prob(&[a], &[s_e, s, s_d]);
                        if pst == 0.0 {
                            continue;
                        }
                        for y in 0..ny {
                            m_auysd[((a * nu + u) * ny + y) * nsd + s_d] +=
                                pa * pst * pu * q[((u * nse + s_e) * ns + s) * ny + y];
                        }
                    }
                }
            }
        }
    }
    let mut m_au = vec![0.0; na * nu];
    let mut m_ysd = vec![0.0; ny * nsd];
    for a in 0..na {
        for u in 0..nu {
            for y in 0..ny {
                for s_d in 0..nsd {
                    let p = m_auysd[((a * nu + u) * ny + y) * nsd + s_d];
                    m_au[a * nu + u] += p;
                    m_ysd[y * nsd + s_d] += p;
                }
            }
        }
    }
    let mut m_a = vec![0.0; na];
    let mut m_ase = vec![0.0; na * nse];
    for a in 0..na {
        for u in 0..nu {
            for s_e in 0..nse {
                let p = m_ause[(a * nu + u) * nse + s_e];
                m_a[a] += p;
                m_ase[a * nse + s_e] += p;
            }
        }
    }

    // score sweep with numerators/denominators per row entry
    let mut acc_a = vec![0.0; na];
    let mut den_a = vec![0.0; na];
    let mut acc_u = vec![0.0; na * nse * nu];
    let mut den_u = vec![0.0; na * nse * nu];
    let mut acc_x = vec![0.0; nu * nse * nx];
    let mut den_x = vec![0.0; nu * nse * nx];
    let mut objective = 0.0;
    let mut distortion = 0.0;

    for a in 0..na {
        let pa = vars.p_a[a];
        if pa == 0.0 {
            continue;
        }
        for s_e in 0..nse {
            for u in 0..nu {
                let pu = vars.q_u[(a * nse + s_e) * nu + u];
                if pu == 0.0 {
                    continue;
                }
                // leakage score is constant over (s, s_d, x, y)
                let p_ause = m_ause[(a * nu + u) * nse + s_e];
                let s2 = if p_ause > 0.0 {
                    (p_ause * m_a[a] / (m_au[a * nu + u] * m_ase[a * nse + s_e])).ln()
                } else {
                    0.0
                };
                for s in 0..ns {
                    for s_d in 0..nsd {
                        let pst = ctx.model.state_kernel.prob(&[a], &[s_e, s, s_d]);
                        if pst == 0.0 {
                            continue;
                        }
                        for x in 0..nx {
                            let px = vars.q_x[(u * nse + s_e) * nx + x];
                            if px == 0.0 {
                                continue;
                            }
                            let e = ctx.dist_map.get(a, x, s_e);
                            let base = pa * pst * pu * px;
                            for y in 0..ny {
                                let py = ctx.y.prob(&[x, s], &[y]);
                                if py == 0.0 {
                                    continue;
                                }
                                let w = base * py;
                                let m1 = m_auysd[((a * nu + u) * ny + y) * nsd + s_d];
                                let s1 = (m1 / (m_au[a * nu + u] * m_ysd[y * nsd + s_d])).ln();
                                let score = s1 - s2 - lambda * e;
                                acc_a[a] += w * score;
                                den_a[a] += w;
                                acc_u[(a * nse + s_e) * nu + u] += w * score;
                                den_u[(a * nse + s_e) * nu + u] += w;
                                acc_x[(u * nse + s_e) * nx + x] += w * score;
                                den_x[(u * nse + s_e) * nx + x] += w;
                                objective += w * (s1 - s2);
                                distortion += w * e;
                            }
                        }
                    }
                }
            }
        }
    }

    let ratio = |acc: Vec<f64>, den: Vec<f64>| -> Vec<f64> {
        acc.iter()
            .zip(&den)
            .map(|(&a, &d)| if d > 0.0 { a / d } else { 0.0 })
            .collect()
    };
    Scores {
        t_a: ratio(acc_a, den_a),
        t_u: ratio(acc_u, den_u),
        t_x: ratio(acc_x, den_x),
        objective,
        distortion,
    }
}

/// One exponentiated-gradient step on each row of a flat row-major table.
fn eg_update(rows: &mut [f64], scores: &[f64], width: usize, step: f64) {
    for (row, t) in rows.chunks_mut(width).zip(scores.chunks(width)) {
        let max_t = t.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if !max_t.is_finite() {
            continue;
        }
        let mut sum = 0.0;
        for (p, &ti) in row.iter_mut().zip(t) {
            *p *= (step * (ti - max_t)).exp();
            sum += *p;
        }
        if sum > 0.0 {
            for p in row.iter_mut() {
                *p /= sum;
            }
        }
    }
}

struct RestartOutcome {
    policy: Policy,
    report: ObjectiveReport,
}

fn run_restart(
    ctx: &ModelCtx,
    dims: &Dims,
    d: f64,
    a_opts: &AscentOpts,
    feas_tol: f64,
    init: Vars,
) -> RestartOutcome {
    let mut vars = init;
    let mut mu = a_opts.penalty_init;
    // hinge penalty: active only while the constraint is violated
    let mut lambda = 0.0;
    let mut best: Option<(f64, Vars)> = None;
    for iter in 0..a_opts.iters {
        let s0 = sweep(ctx, dims, &vars, lambda);
        // s0 describes the current vars exactly: snapshot and penalty
        // bookkeeping happen here, before any update
        if s0.distortion <= d + 0.5 * feas_tol {
            let better = best
                .as_ref()
                .map(|(obj, _)| s0.objective > *obj)
                .unwrap_or(true);
            if better {
                best = Some((
                    s0.objective,
                    Vars {
                        p_a: vars.p_a.clone(),
                        q_u: vars.q_u.clone(),
                        q_x: vars.q_x.clone(),
                    },
                ));
            }
        }
        lambda = if s0.distortion > d { mu } else { 0.0 };
        if (iter + 1) % a_opts.penalty_every == 0 && s0.distortion > d + feas_tol {
            mu *= a_opts.penalty_growth;
        }
        eg_update(&mut vars.p_a, &s0.t_a, dims.na, a_opts.step);
        let s1 = sweep(ctx, dims, &vars, lambda);
        eg_update(&mut vars.q_u, &s1.t_u, dims.nu, a_opts.step);
        let s2 = sweep(ctx, dims, &vars, lambda);
        eg_update(&mut vars.q_x, &s2.t_x, dims.nx, a_opts.step);
    }
    // prefer the best feasible iterate seen over the final point
    let final_policy = vars.to_policy(dims);
    let final_report = ctx.evaluate(&final_policy);
    let final_ok = final_report.distortion <= d + feas_tol;
    if let Some((_, snap)) = best {
        let policy = snap.to_policy(dims);
        let report = ctx.evaluate(&policy);
        if report.distortion <= d + feas_tol
            && (!final_ok || report.objective > final_report.objective)
        {
            return RestartOutcome { policy, report };
        }
    }
    RestartOutcome {
        policy: final_policy,
        report: final_report,
    }
}

fn dims_of(ctx: &ModelCtx, nu: usize) -> Dims {
    let al = &ctx.model.alphabets;
    Dims {
        na: al.a,
        nu,
        nse: al.s_e,
        ns: al.s,
        nsd: al.s_d,
        nx: al.x,
        ny: al.y,
    }
}

pub(super) fn solve(
    ctx: &ModelCtx,
    d: f64,
    a_opts: &AscentOpts,
    opts: &SolveOpts,
    warm: Option<&Policy>,
) -> Result<CapacitySolution> {
    let nu = opts.resolved_u_size(ctx.model);
    let dims = dims_of(ctx, nu);
    let feas_tol = opts.feasibility_tol;

    let outcomes: Vec<RestartOutcome> = (0..a_opts.restarts)
        .into_par_iter()
        .map(|r| {
            let init = if r == 0 {
                if let Some(p) = warm {
                    if p.u_size == nu {
                        Vars::from_policy(p)
                    } else {
                        let mut rng = ChaCha12Rng::seed_from_u64(opts.seed);
                        rng.set_stream(r as u64);
                        Vars::random(&dims, &mut rng)
                    }
                } else {
                    // one deterministic center start
                    Vars {
                        p_a: vec![1.0 / dims.na as f64; dims.na],
                        q_u: vec![1.0 / dims.nu as f64; dims.na * dims.nse * dims.nu],
                        q_x: vec![1.0 / dims.nx as f64; dims.nu * dims.nse * dims.nx],
                    }
                }
            } else {
                let mut rng = ChaCha12Rng::seed_from_u64(opts.seed);
                rng.set_stream(r as u64);
                Vars::random(&dims, &mut rng)
            };
            run_restart(ctx, &dims, d, a_opts, feas_tol, init)
        })
        .collect();

    let mut best: Option<&RestartOutcome> = None;
    let mut min_dist = f64::INFINITY;
    for o in &outcomes {
        min_dist = min_dist.min(o.report.distortion);
        if o.report.distortion <= d + feas_tol {
            let better = best
                .map(|b| o.report.objective > b.report.objective)
                .unwrap_or(true);
            if better {
                best = Some(o);
            }
        }
    }
    if let Some(b) = best {
        return Ok(CapacitySolution {
            c_nats: b.report.objective,
            policy: b.policy.clone(),
            report: b.report,
            u_size: nu,
            mode_used: "ascent",
            restarts_used: a_opts.restarts,
            feasibility_tol: opts.feasibility_tol,
        });
    }

    // no feasible restart: minimize distortion alone to settle feasibility
    let min_sol = minimize_distortion(ctx, &dims, opts, a_opts);
    if min_sol.report.distortion <= d + feas_tol {
        Ok(CapacitySolution {
            c_nats: min_sol.report.objective,
            policy: min_sol.policy,
            report: min_sol.report,
            u_size: nu,
            mode_used: "ascent",
            restarts_used: a_opts.restarts,
            feasibility_tol: opts.feasibility_tol,
        })
    } else {
        Err(SolveError::Infeasible {
            requested: d,
            min_found: min_sol.report.distortion.min(min_dist),
        })
    }
}

/// Ascent on -distortion only; used to decide infeasibility.
fn minimize_distortion(
    ctx: &ModelCtx,
    dims: &Dims,
    opts: &SolveOpts,
    a_opts: &AscentOpts,
) -> RestartOutcome {
    let restarts = a_opts.restarts.min(8).max(1);
    (0..restarts)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha12Rng::seed_from_u64(opts.seed ^ 0x5eed_d157);
            rng.set_stream(r as u64);
            let mut vars = Vars::random(dims, &mut rng);
            for _ in 0..a_opts.iters {
                // pure distortion descent: score = -e
                let scores = sweep(ctx, dims, &vars, 1.0e6);
                eg_update(&mut vars.p_a, &scores.t_a, dims.na, a_opts.step);
                eg_update(&mut vars.q_u, &scores.t_u, dims.nu, a_opts.step);
                eg_update(&mut vars.q_x, &scores.t_x, dims.nx, a_opts.step);
            }
            let policy = vars.to_policy(dims);
            let report = ctx.evaluate(&policy);
            RestartOutcome { policy, report }
        })
        .min_by(|a, b| {
            a.report
                .distortion
                .partial_cmp(&b.report.distortion)
                .unwrap()
        })
        .expect("at least one restart")
}

/// Unconstrained Lagrangian ascent: maximizes objective - lambda * distortion.
pub(super) fn solve_lagrangian(
    ctx: &ModelCtx,
    lambda: f64,
    a_opts: &AscentOpts,
    opts: &SolveOpts,
    warm: Option<&Policy>,
) -> Result<(Policy, f64, f64)> {
    let nu = opts.resolved_u_size(ctx.model);
    let dims = dims_of(ctx, nu);
    let best = (0..a_opts.restarts)
        .into_par_iter()
        .map(|r| {
            let mut vars = if r == 0 {
                match warm {
                    Some(p) if p.u_size == nu => Vars::from_policy(p),
                    _ => Vars {
                        p_a: vec![1.0 / dims.na as f64; dims.na],
                        q_u: vec![1.0 / dims.nu as f64; dims.na * dims.nse * dims.nu],
                        q_x: vec![1.0 / dims.nx as f64; dims.nu * dims.nse * dims.nx],
                    },
                }
            } else {
                let mut rng = ChaCha12Rng::seed_from_u64(opts.seed ^ 0x1a6a);
                rng.set_stream(r as u64);
                Vars::random(&dims, &mut rng)
            };
            for _ in 0..a_opts.iters {
                let scores = sweep(ctx, &dims, &vars, lambda);
                eg_update(&mut vars.p_a, &scores.t_a, dims.na, a_opts.step);
                let scores = sweep(ctx, &dims, &vars, lambda);
                eg_update(&mut vars.q_u, &scores.t_u, dims.nu, a_opts.step);
                let scores = sweep(ctx, &dims, &vars, lambda);
                eg_update(&mut vars.q_x, &scores.t_x, dims.nx, a_opts.step);
            }
            let policy = vars.to_policy(&dims);
            let report = ctx.evaluate(&policy);
            let value = report.objective - lambda * report.distortion;
            (value, policy, report)
        })
        .max_by(|a, b| a.0.partial_cmp(&b.0).unwrap())
        .expect("at least one restart");
    Ok((best.1, best.2.objective, best.2.distortion))
}
