//! Browser bindings for the interactive demo page: the dirty-paper
//! boundary point, fading capacity-distortion curves, and a discrete
//! C(D) curve solved on the bundled demo model. Each function returns a
//! JSON string the page renders onto canvases.

use serde::Serialize;
use wasm_bindgen::prelude::wasm_bindgen;

use isac_cd::gaussian::{
    dpc_boundary, fading_cd_curve, DpcParams, FadingParams, QuadOpts, StateDist,
};
use isac_cd::model::{IsacModel, Policy};
use isac_cd::prob::FiniteDist;
use isac_cd::solver::{deterministic_kernel, evaluate_policy};

const DEMO_MODEL_JSON: &str = include_str!("../../../models/tradeoff.json");

#[derive(Serialize)]
struct DpcResponse {
    rate_nats: f64,
    rate_bits: f64,
    distortion: f64,
    coeff_z: f64,
    coeff_x: f64,
    coeff_se: f64,
}

#[derive(Serialize)]
struct CurvePoint {
    d: f64,
    c_bits: Option<f64>,
    alpha_star: Option<f64>,
    feasible: bool,
}

#[derive(Serialize)]
struct CurveResponse {
    points: Vec<CurvePoint>,
    d_min: f64,
}

#[derive(Serialize)]
struct DiscretePoint {
    d: f64,
    c_bits: f64,
}

#[derive(Serialize)]
struct DiscreteResponse {
    points: Vec<DiscretePoint>,
    unconstrained_bits: f64,
    min_distortion: f64,
}

fn err_json(message: impl std::fmt::Display) -> String {
    serde_json::json!({ "error": message.to_string() }).to_string()
}

/// Dirty-paper boundary point for the additive-interference channel.
/// All sigma parameters are variances.
#[wasm_bindgen]
pub fn dpc_point(px: f64, sigma: f64, sigma_z: f64, sigma_e: f64, sigma_s: f64) -> String {
    let params = DpcParams {
        p_x: px,
        sigma,
        sigma_z,
        sigma_e,
        sigma_s,
    };
    match dpc_boundary(&params) {
        Ok(b) => serde_json::to_string(&DpcResponse {
            rate_nats: b.rate,
            rate_bits: b.rate / std::f64::consts::LN_2,
            distortion: b.distortion,
            coeff_z: b.coeff_z,
            coeff_x: b.coeff_x,
            coeff_se: b.coeff_se,
        })
        .unwrap(),
        Err(e) => err_json(e),
    }
}

/// Fading C(D) curve over `points` budgets between `d_lo` and `d_hi`
/// (Gaussian fading with power sigma_s).
#[wasm_bindgen]
pub fn fading_curve(
    px: f64,
    sigma: f64,
    sigma_z: f64,
    sigma_s: f64,
    d_lo: f64,
    d_hi: f64,
    points: usize,
) -> String {
    let params = FadingParams {
        p_x: px,
        sigma,
        sigma_z,
        sigma_s,
        s_dist: StateDist::Gaussian { variance: sigma_s },
    };
    let quad = QuadOpts::default();
    let n = points.clamp(2, 200);
    let grid: Vec<f64> = (0..n)
        .map(|i| d_lo + (d_hi - d_lo) * i as f64 / (n - 1) as f64)
        .collect();
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return err_json("distortion grid must increase");
    }
    match fading_cd_curve(&params, &grid, &quad) {
        Ok(curve) => {
            let d_min = isac_cd::gaussian::fading_constraint_at(&params, 1.0, &quad)
                .unwrap_or(f64::NAN);
            let points = curve
                .points
                .iter()
                .map(|p| CurvePoint {
                    d: p.d,
                    c_bits: p.feasible.then(|| p.c_nats / std::f64::consts::LN_2),
                    alpha_star: p.feasible.then_some(p.alpha_star),
                    feasible: p.feasible,
                })
                .collect();
            serde_json::to_string(&CurveResponse { points, d_min }).unwrap()
        }
        Err(e) => err_json(e),
    }
}

/// Discrete C(D) on the bundled demo model: sequential certified
/// enumeration of deterministic policies with the action distribution on
/// a simplex grid (kept small so a browser tab stays responsive).
#[wasm_bindgen]
pub fn demo_cd_curve(d_lo: f64, d_hi: f64, points: usize, pa_grid: usize) -> String {
    let model = match IsacModel::from_json(DEMO_MODEL_JSON) {
        Ok(m) => m,
        Err(e) => return err_json(e),
    };
    let n = points.clamp(2, 50);
    let grid: Vec<f64> = (0..n)
        .map(|i| d_lo + (d_hi - d_lo) * i as f64 / (n - 1) as f64)
        .collect();
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return err_json("distortion grid must increase");
    }
    let evaluated = enumerate_policies(&model, 2, pa_grid.clamp(2, 24));
    let min_distortion = evaluated
        .iter()
        .map(|e| e.1)
        .fold(f64::INFINITY, f64::min);
    let unconstrained = evaluated.iter().map(|e| e.0).fold(f64::NEG_INFINITY, f64::max);
    let mut out = Vec::new();
    let mut best_so_far = f64::NEG_INFINITY;
    for &d in &grid {
        let best = evaluated
            .iter()
            .filter(|e| e.1 <= d + 1e-9)
            .map(|e| e.0)
            .fold(f64::NEG_INFINITY, f64::max);
        if best.is_finite() {
            best_so_far = best_so_far.max(best);
            out.push(DiscretePoint {
                d,
                c_bits: best_so_far / std::f64::consts::LN_2,
            });
        }
    }
    serde_json::to_string(&DiscreteResponse {
        points: out,
        unconstrained_bits: unconstrained / std::f64::consts::LN_2,
        min_distortion,
    })
    .unwrap()
}

/// (objective, distortion) of every policy in the enumerated class.
fn enumerate_policies(model: &IsacModel, u_size: usize, pa_grid: usize) -> Vec<(f64, f64)> {
    let al = &model.alphabets;
    let u_cells = al.a * al.s_e;
    let x_cells = u_size * al.s_e;
    let n_u = u_size.pow(u_cells as u32);
    let n_x = al.x.pow(x_cells as u32);
    let mut out = Vec::new();
    for cu in 0..n_u {
        let mut u_map = vec![0usize; u_cells];
        let mut c = cu;
        for slot in u_map.iter_mut() {
            *slot = c % u_size;
            c /= u_size;
        }
        let p_u = deterministic_kernel(vec![al.a, al.s_e], u_size, &u_map);
        for cx in 0..n_x {
            let mut x_map = vec![0usize; x_cells];
            let mut c = cx;
            for slot in x_map.iter_mut() {
                *slot = c % al.x;
                c /= al.x;
            }
            let p_x = deterministic_kernel(vec![u_size, al.s_e], al.x, &x_map);
            for k in 0..=pa_grid {
                let p0 = k as f64 / pa_grid as f64;
                let policy = Policy {
                    u_size,
                    p_a: FiniteDist::new(vec![p0, 1.0 - p0]).expect("simplex point"),
                    p_u_given_a_se: p_u.clone(),
                    p_x_given_u_se: p_x.clone(),
                };
                if let Ok(report) = evaluate_policy(model, &policy) {
                    out.push((report.objective, report.distortion));
                }
            }
        }
    }
    out
}
