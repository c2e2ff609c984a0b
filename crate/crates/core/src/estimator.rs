//! Per-symbol state estimation: the Bayes posterior over the state given
//! (a, x, s_e, z), the optimal symbolwise estimator table it induces, and
//! expected-distortion evaluation of arbitrary estimator tables.
//!
//! The posterior depends only on P(s_e, s | a) and P(z | x, s); the
//! decoder-facing channel output Y never enters, which downstream tests
//! check literally.

use thiserror::Error;

use crate::model::{IsacModel, ModelError, Policy};
use crate::prob::{FiniteDist, FiniteKernel};

#[derive(Debug, Error)]
pub enum EstimatorError {
    #[error("observation (a={a}, x={x}, s_e={s_e}, z={z}) has zero probability under the model")]
    UnreachableObservation {
        a: usize,
        x: usize,
        s_e: usize,
        z: usize,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("empty model list")]
    EmptyModelList,
}

pub type Result<T> = std::result::Result<T, EstimatorError>;

/// Deterministic map (a, x, s_e, z) -> s_hat, stored densely.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EstimatorTable {
    dims: [usize; 4],
    s_hat: Vec<usize>,
}

impl EstimatorTable {
    pub fn new(dims: [usize; 4], s_hat: Vec<usize>) -> Self {
        assert_eq!(dims.iter().product::<usize>(), s_hat.len());
        Self { dims, s_hat }
    }

    pub fn dims(&self) -> [usize; 4] {
        self.dims
    }

    fn flat(&self, a: usize, x: usize, s_e: usize, z: usize) -> usize {
        ((a * self.dims[1] + x) * self.dims[2] + s_e) * self.dims[3] + z
    }

    pub fn get(&self, a: usize, x: usize, s_e: usize, z: usize) -> usize {
        self.s_hat[self.flat(a, x, s_e, z)]
    }

    pub fn set(&mut self, a: usize, x: usize, s_e: usize, z: usize, s_hat: usize) {
        let i = self.flat(a, x, s_e, z);
        self.s_hat[i] = s_hat;
    }

    pub fn entries(&self) -> &[usize] {
        &self.s_hat
    }
}

/// Expected distortion of the optimal estimator conditioned on
/// (a, x, s_e), averaged over the feedback Z. Precomputed densely because
/// the capacity solver reads it inside inner loops.
#[derive(Debug, Clone, PartialEq)]
pub struct DistortionMap {
    dims: [usize; 3],
    e: Vec<f64>,
}

impl DistortionMap {
    pub fn get(&self, a: usize, x: usize, s_e: usize) -> f64 {
        self.e[(a * self.dims[1] + x) * self.dims[2] + s_e]
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }
}

/// The optimal estimator with its conditional-distortion table and the
/// report of observation tuples that can never occur (table entries for
/// those are the tie-break default 0, never an error).
#[derive(Debug, Clone)]
pub struct OptimalEstimator {
    pub table: EstimatorTable,
    pub distortion_map: DistortionMap,
    pub unreachable: Vec<(usize, usize, usize, usize)>,
    /// Per-tuple minimized posterior expected distortion, aligned with the
    /// table layout; 0 for unreachable tuples.
    pub posterior_expected: Vec<f64>,
}

/// Bayes posterior over S given (a, x, s_e, z):
/// P(s_e, s | a) P(z | x, s) normalized over s.
pub fn posterior(
    model: &IsacModel,
    a: usize,
    x: usize,
    s_e: usize,
    z: usize,
) -> Result<FiniteDist> {
    let se_s = model.state_se_s();
    let z_kernel = model.channel_z();
    posterior_from(&se_s, &z_kernel, model.alphabets.s, a, x, s_e, z)
}

fn posterior_from(
    se_s: &FiniteKernel,
    z_kernel: &FiniteKernel,
    s_size: usize,
    a: usize,
    x: usize,
    s_e: usize,
    z: usize,
) -> Result<FiniteDist> {
    let mut w = vec![0.0; s_size];
    let mut den = 0.0;
    for (s, w_s) in w.iter_mut().enumerate() {
        *w_s = se_s.prob(&[a], &[s_e, s]) * z_kernel.prob(&[x, s], &[z]);
        den += *w_s;
    }
    if den <= 0.0 {
        return Err(EstimatorError::UnreachableObservation { a, x, s_e, z });
    }
    for w_s in &mut w {
        *w_s /= den;
    }
    Ok(FiniteDist::new(w).expect("normalized posterior"))
}

/// Builds the optimal symbolwise estimator for a memoryless model.
///
/// For every reachable (a, x, s_e, z) the table entry minimizes the
/// posterior-expected distortion, ties broken toward the lowest index.
pub fn optimal_estimator(model: &IsacModel) -> OptimalEstimator {
    let al = &model.alphabets;
    let dims = [al.a, al.x, al.s_e, al.z];
    let se_s = model.state_se_s();
    let z_kernel = model.channel_z();
    let n = dims.iter().product();
    let mut s_hat = vec![0usize; n];
    let mut posterior_expected = vec![0.0; n];
    let mut unreachable = Vec::new();
    let mut e = vec![0.0; al.a * al.x * al.s_e];

    let mut flat = 0;
    for a in 0..al.a {
        for x in 0..al.x {
            for s_e in 0..al.s_e {
                // P(s_e | a), the weight of this conditioning slice
                let p_se: f64 = (0..al.s).map(|s| se_s.prob(&[a], &[s_e, s])).sum();
                let mut acc = 0.0;
                for z in 0..al.z {
                    // unnormalized posterior weights and their mass
                    let mut den = 0.0;
                    let mut w = vec![0.0; al.s];
                    for (s, w_s) in w.iter_mut().enumerate() {
                        *w_s = se_s.prob(&[a], &[s_e, s]) * z_kernel.prob(&[x, s], &[z]);
                        den += *w_s;
                    }
                    if den <= 0.0 {
                        unreachable.push((a, x, s_e, z));
                        s_hat[flat] = 0;
                        posterior_expected[flat] = 0.0;
                        flat += 1;
                        continue;
                    }
                    let mut best = (0usize, f64::INFINITY);
                    for cand in 0..al.s_hat {
                        let cost: f64 = (0..al.s)
                            .map(|s| w[s] / den * model.distortion_at(s, cand))
                            .sum();
                        if cost < best.1 {
                            best = (cand, cost);
                        }
                    }
                    s_hat[flat] = best.0;
                    posterior_expected[flat] = best.1;
                    flat += 1;
                    // z-average: den / p_se is P(z | a, x, s_e)
                    if p_se > 0.0 {
                        acc += den / p_se * best.1;
                    }
                }
                e[(a * al.x + x) * al.s_e + s_e] = acc;
            }
        }
    }

    OptimalEstimator {
        table: EstimatorTable::new(dims, s_hat),
        distortion_map: DistortionMap {
            dims: [al.a, al.x, al.s_e],
            e,
        },
        unreachable,
        posterior_expected,
    }
}

/// Optimal per-symbol estimators for a nonstationary (symbol-indexed)
/// sequence of memoryless models.
pub fn nonstationary_estimators(models: &[IsacModel]) -> Result<Vec<EstimatorTable>> {
    if models.is_empty() {
        return Err(EstimatorError::EmptyModelList);
    }
    Ok(models.iter().map(|m| optimal_estimator(m).table).collect())
}

/// Expected per-symbol distortion of an arbitrary estimator table under
/// the single-letter joint induced by (model, policy):
/// sum over the joint of d(s, table(a, x, s_e, z)).
pub fn policy_distortion(model: &IsacModel, policy: &Policy, table: &EstimatorTable) -> Result<f64> {
    model.check_policy(policy)?;
    let al = &model.alphabets;
    assert_eq!(table.dims(), [al.a, al.x, al.s_e, al.z]);
    let se_s = model.state_se_s();
    let z_kernel = model.channel_z();
    let mut total = 0.0;
    for a in 0..al.a {
        let pa = policy.p_a.prob(a);
        if pa == 0.0 {
            continue;
        }
        for s_e in 0..al.s_e {
            for s in 0..al.s {
                let ps = se_s.prob(&[a], &[s_e, s]);
                if ps == 0.0 {
                    continue;
                }
                for u in 0..policy.u_size {
                    let pu = policy.p_u_given_a_se.prob(&[a, s_e], &[u]);
                    if pu == 0.0 {
                        continue;
                    }
                    for x in 0..al.x {
                        let px = policy.p_x_given_u_se.prob(&[u, s_e], &[x]);
                        if px == 0.0 {
                            continue;
                        }
                        let base = pa * ps * pu * px;
                        for z in 0..al.z {
                            let pz = z_kernel.prob(&[x, s], &[z]);
                            if pz == 0.0 {
                                continue;
                            }
                            total += base * pz * model.distortion_at(s, table.get(a, x, s_e, z));
                        }
                    }
                }
            }
        }
    }
    Ok(total)
}
