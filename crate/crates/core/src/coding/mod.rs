//! Desk-scale Monte Carlo of the random-coding scheme: per-message action
//! sequences, binned auxiliary codebooks drawn from P(u | a), codeword
//! selection through the eta functionals, information-density threshold
//! decoding, and symbolwise state estimation.
//!
//! The decision thresholds are instantiated with single-letter mutual
//! information values of the configured policy joint (the only computable
//! surrogate for their asymptotic definitions); every report says so.

mod experiment;

pub use experiment::{
    distortion_tail_check, run_experiment, ExperimentReport, TailCheck, TrialOutcome,
};

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use thiserror::Error;

use crate::estimator::{optimal_estimator, EstimatorTable};
use crate::model::{IsacModel, ModelError, Policy};
use crate::prob::sample_slice;
use crate::solver::{evaluate_policy, ObjectiveReport, SolveError};

/// Total codeword budget |M| * |C(m)|.
pub const CODEWORD_CAP: u64 = 1 << 20;
/// Blocklength ceiling for exact enumeration paths.
const ENUM_MAX_N: usize = 16;
/// Path budget for exact enumeration (product of per-symbol support sizes).
const ENUM_MAX_PATHS: u64 = 1 << 20;

#[derive(Debug, Error)]
pub enum CodingError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Prob(#[from] crate::prob::ProbError),
    #[error("blocklength must be at least 1")]
    BadBlocklength,
    #[error("threshold slack gamma must be positive, got {0}")]
    BadGamma(f64),
    #[error("codebook of {messages} messages x {bin_size} codewords exceeds the cap {cap}")]
    ResourceCap {
        messages: u64,
        bin_size: u64,
        cap: u64,
    },
    #[error("block length {0} does not match the configured n = {1}")]
    BlockLength(usize, usize),
}

pub type Result<T> = std::result::Result<T, CodingError>;

/// Which distortion criterion drives codeword selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistortionVariant {
    /// Select the codeword minimizing the conditional expected distortion.
    Average,
    /// Keep the blockwise distortion below a threshold in probability;
    /// select the lowest-index codeword in the good set.
    Maximal,
}

#[derive(Debug, Clone)]
pub struct SchemeConfig {
    pub model: IsacModel,
    pub policy: Policy,
    pub n: usize,
    /// Message rate in bits per symbol.
    pub rate_bits: f64,
    /// Bin rate (codewords per message) in bits per symbol.
    pub bin_rate_bits: f64,
    /// Threshold slack in nats.
    pub gamma: f64,
    pub trials: usize,
    pub seed: u64,
    pub variant: DistortionVariant,
    /// Monte Carlo sample count for eta values beyond the enumeration cap.
    pub eta_mc_samples: usize,
}

impl SchemeConfig {
    pub fn messages(&self) -> u64 {
        ((self.n as f64 * self.rate_bits).exp2().round() as u64).max(1)
    }

    pub fn bin_size(&self) -> u64 {
        ((self.n as f64 * self.bin_rate_bits).exp2().round() as u64).max(1)
    }

    fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(CodingError::BadBlocklength);
        }
        if !(self.gamma > 0.0) {
            return Err(CodingError::BadGamma(self.gamma));
        }
        self.model
            .check_policy(&self.policy)
            .map_err(CodingError::from)?;
        let m = self.messages();
        let l = self.bin_size();
        if m.saturating_mul(l) > CODEWORD_CAP {
            return Err(CodingError::ResourceCap {
                messages: m,
                bin_size: l,
                cap: CODEWORD_CAP,
            });
        }
        Ok(())
    }
}

/// An eta value: exact by enumeration, or Monte Carlo with its standard
/// error.
#[derive(Debug, Clone, Copy)]
pub struct EtaValue {
    pub value: f64,
    pub std_err: Option<f64>,
}

impl EtaValue {
    fn exact(value: f64) -> Self {
        Self {
            value,
            std_err: None,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Dims {
    pub a: usize,
    pub u: usize,
    pub s_e: usize,
    pub s: usize,
    pub s_d: usize,
    pub x: usize,
    pub z: usize,
    pub y: usize,
}

/// Precomputed single-letter tables for one scheme configuration.
pub struct SchemeContext {
    pub(crate) al: Dims,
    pub(crate) model: IsacModel,
    pub(crate) n: usize,
    pub(crate) gamma: f64,
    pub(crate) variant: DistortionVariant,
    eta_mc_samples: usize,
    /// estimator table applied symbolwise
    pub(crate) table: EstimatorTable,
    report: ObjectiveReport,
    /// decoding threshold on the 1/n-normalized density: i_auy - gamma
    pub t1_threshold: f64,
    /// average-variant selection threshold on eta1: sqrt(pi1)
    pub b1_threshold: f64,
    /// maximal-variant selection threshold on eta2: sqrt(pi2)
    pub b2_threshold: f64,
    /// reference blockwise distortion for the maximal variant
    pub dbar: f64,
    // sampling tables
    pub(crate) p_a: Vec<f64>,
    pub(crate) state_rows: Vec<Vec<f64>>,
    pub(crate) u_given_a: Vec<Vec<f64>>,
    pub(crate) x_rows: Vec<Vec<f64>>,
    pub(crate) ch_rows: Vec<Vec<f64>>,
    // density tables
    pub(crate) log_v: Vec<f64>,
    pub(crate) log_m: Vec<f64>,
    /// W(y, s_d | u, a, s_e): encoder-side output law for eta1
    w_rows: Vec<Vec<f64>>,
    /// conditional expected distortion per (u, a, s_e) for eta2 (average)
    e2: Vec<f64>,
    /// per-(u, a, s_e) distortion value support for eta2 (maximal)
    dist_support: Vec<Vec<(f64, f64)>>,
}

impl SchemeContext {
    pub fn new(config: &SchemeConfig) -> Result<Self> {
        config.validate()?;
        let model = &config.model;
        let policy = &config.policy;
        let alp = &model.alphabets;
        let al = Dims {
            a: alp.a,
            u: policy.u_size,
            s_e: alp.s_e,
            s: alp.s,
            s_d: alp.s_d,
            x: alp.x,
            z: alp.z,
            y: alp.y,
        };
        let report = evaluate_policy(model, policy)?;
        let joint = model.assemble_joint(policy)?;
        let opt = optimal_estimator(model);

        // marginals for the decoding density
        let m_auysd = joint.marginal(&["a", "u", "y", "s_d"])?;
        let m_au = joint.marginal(&["a", "u"])?;
        let m_ysd = joint.marginal(&["y", "s_d"])?;
        let mut log_v = vec![f64::NEG_INFINITY; al.a * al.u * al.y * al.s_d];
        for a in 0..al.a {
            for u in 0..al.u {
                let p_au = m_au.prob(&[a, u]);
                for y in 0..al.y {
                    for s_d in 0..al.s_d {
                        let p = m_auysd.prob(&[a, u, y, s_d]);
                        if p > 0.0 && p_au > 0.0 {
                            log_v[((a * al.u + u) * al.y + y) * al.s_d + s_d] = (p / p_au).ln();
                        }
                    }
                }
            }
        }
        let mut log_m = vec![f64::NEG_INFINITY; al.y * al.s_d];
        for y in 0..al.y {
            for s_d in 0..al.s_d {
                let p = m_ysd.prob(&[y, s_d]);
                if p > 0.0 {
                    log_m[y * al.s_d + s_d] = p.ln();
                }
            }
        }

        // encoder-side per-symbol output law W(y, s_d | u, a, s_e) and the
        // conditional distortion tables
        let z_kernel = model.channel_z();
        let y_kernel = model.channel_y();
        let se = model.state_se();
        let mut w_rows = vec![vec![0.0; al.y * al.s_d]; al.u * al.a * al.s_e];
        let mut e2 = vec![0.0; al.u * al.a * al.s_e];
        let mut dist_support = vec![Vec::new(); al.u * al.a * al.s_e];
        for u in 0..al.u {
            for a in 0..al.a {
                for s_e in 0..al.s_e {
                    let row = (u * al.a + a) * al.s_e + s_e;
                    let p_se = se.prob(&[a], &[s_e]);
                    if p_se == 0.0 {
                        // unreachable (a, s_e) pair: any placeholder works,
                        // the encoder never sees it
                        let width = al.y * al.s_d;
                        w_rows[row] = vec![1.0 / width as f64; width];
                        dist_support[row] = vec![(0.0, 1.0)];
                        continue;
                    }
                    let mut support: Vec<(f64, f64)> = Vec::new();
                    for s in 0..al.s {
                        for s_d in 0..al.s_d {
                            let p_ssd = model.state_kernel.prob(&[a], &[s_e, s, s_d]) / p_se;
                            if p_ssd == 0.0 {
                                continue;
                            }
                            for x in 0..al.x {
                                let px = policy.p_x_given_u_se.prob(&[u, s_e], &[x]);
                                if px == 0.0 {
                                    continue;
                                }
                                for y in 0..al.y {
                                    let py = y_kernel.prob(&[x, s], &[y]);
                                    if py > 0.0 {
                                        w_rows[row][y * al.s_d + s_d] += p_ssd * px * py;
                                    }
                                }
                                for z in 0..al.z {
                                    let pz = z_kernel.prob(&[x, s], &[z]);
                                    if pz == 0.0 {
                                        continue;
                                    }
                                    let d = model.distortion_at(s, opt.table.get(a, x, s_e, z));
                                    let w = p_ssd * px * pz;
                                    e2[row] += w * d;
                                    merge_support(&mut support, d, w);
                                }
                            }
                        }
                    }
                    dist_support[row] = support;
                }
            }
        }

        // sampling tables
        let p_a = policy.p_a.as_slice().to_vec();
        let state_rows: Vec<Vec<f64>> = (0..al.a)
            .map(|a| model.state_kernel.row(a).to_vec())
            .collect();
        let mut u_given_a = vec![vec![0.0; al.u]; al.a];
        for a in 0..al.a {
            for s_e in 0..al.s_e {
                let pse = se.prob(&[a], &[s_e]);
                for u in 0..al.u {
                    u_given_a[a][u] += pse * policy.p_u_given_a_se.prob(&[a, s_e], &[u]);
                }
            }
        }
        let x_rows: Vec<Vec<f64>> = (0..al.u * al.s_e)
            .map(|r| policy.p_x_given_u_se.row(r).to_vec())
            .collect();
        let ch_rows: Vec<Vec<f64>> = (0..al.x * al.s)
            .map(|r| model.channel_kernel.row(r).to_vec())
            .collect();

        let mut ctx = Self {
            al,
            model: model.clone(),
            n: config.n,
            gamma: config.gamma,
            variant: config.variant,
            eta_mc_samples: config.eta_mc_samples.max(64),
            table: opt.table,
            report,
            t1_threshold: report.i_auy - config.gamma,
            b1_threshold: 1.0,
            b2_threshold: 1.0,
            dbar: report.distortion,
            p_a,
            state_rows,
            u_given_a,
            x_rows,
            ch_rows,
            log_v,
            log_m,
            w_rows,
            e2,
            dist_support,
        };

        // pi1: the true block density misses T1; pi2: the true blockwise
        // distortion overshoots dbar + gamma. Both under the i.i.d.
        // single-letter law, exact by multinomial convolution.
        let pi1 = ctx.pi1();
        ctx.b1_threshold = pi1.sqrt().min(1.0);
        if config.variant == DistortionVariant::Maximal {
            let pi2 = ctx.pi2(&joint)?;
            ctx.b2_threshold = pi2.sqrt().min(1.0);
        }
        Ok(ctx)
    }

    pub fn objective_report(&self) -> ObjectiveReport {
        self.report
    }

    /// pi1 = P((1/n) sum density < i_auy - gamma) under the policy joint.
    fn pi1(&self) -> f64 {
        let al = &self.al;
        let mut support: Vec<(f64, f64)> = Vec::new();
        // P(a, u) * W(y, s_d | a, u) with W from the joint tables
        for a in 0..al.a {
            for u in 0..al.u {
                for y in 0..al.y {
                    for s_d in 0..al.s_d {
                        let lv = self.log_v[((a * al.u + u) * al.y + y) * al.s_d + s_d];
                        if lv == f64::NEG_INFINITY {
                            continue;
                        }
                        // joint mass = P(a, u) * V = exp(log pau + lv); we
                        // reconstruct P(a, u) from the sampling tables
                        let p_au = self.p_a[a] * self.u_given_a[a][u];
                        let p = p_au * lv.exp();
                        if p > 0.0 {
                            let v = lv - self.log_m[y * al.s_d + s_d];
                            merge_support(&mut support, v, p);
                        }
                    }
                }
            }
        }
        normalize_support(&mut support);
        iid_sum_prob(&support, self.n, |sum| {
            sum < self.n as f64 * self.t1_threshold
        })
    }

    /// pi2 = P((1/n) sum distortion > dbar + gamma) under the policy joint.
    fn pi2(&self, joint: &crate::prob::JointDist) -> Result<f64> {
        let m = joint.marginal(&["a", "u", "s_e", "s", "x", "z"])?;
        let al = &self.al;
        let mut support: Vec<(f64, f64)> = Vec::new();
        for a in 0..al.a {
            for u in 0..al.u {
                for s_e in 0..al.s_e {
                    for s in 0..al.s {
                        for x in 0..al.x {
                            for z in 0..al.z {
                                let p = m.prob(&[a, u, s_e, s, x, z]);
                                if p > 0.0 {
                                    let d = self
                                        .model
                                        .distortion_at(s, self.table.get(a, x, s_e, z));
                                    merge_support(&mut support, d, p);
                                }
                            }
                        }
                    }
                }
            }
        }
        let thr = self.n as f64 * (self.dbar + self.gamma);
        Ok(iid_sum_prob(&support, self.n, |sum| sum > thr + 1e-12))
    }

    /// Probability that the channel output pair misses the decoding set T1,
    /// given the codeword/action/CSI blocks.
    pub fn eta1(&self, u: &[usize], a: &[usize], s_e: &[usize]) -> Result<EtaValue> {
        self.check_blocks(u, a, s_e)?;
        let al = &self.al;
        let mut per_symbol: Vec<Vec<(f64, f64)>> = Vec::with_capacity(self.n);
        for i in 0..self.n {
            let row = &self.w_rows[(u[i] * al.a + a[i]) * al.s_e + s_e[i]];
            let mut support = Vec::new();
            for y in 0..al.y {
                for s_d in 0..al.s_d {
                    let p = row[y * al.s_d + s_d];
                    if p > 0.0 {
                        let v = self.log_v[((a[i] * al.u + u[i]) * al.y + y) * al.s_d + s_d]
                            - self.log_m[y * al.s_d + s_d];
                        merge_support(&mut support, v, p);
                    }
                }
            }
            per_symbol.push(support);
        }
        let thr = self.n as f64 * self.t1_threshold;
        self.block_sum_prob(&per_symbol, move |sum| sum < thr)
    }

    /// Average variant: conditional expected blockwise distortion (exact,
    /// separable across symbols). Maximal variant: probability that the
    /// blockwise distortion exceeds dbar + gamma.
    pub fn eta2(&self, u: &[usize], a: &[usize], s_e: &[usize]) -> Result<EtaValue> {
        self.check_blocks(u, a, s_e)?;
        let al = &self.al;
        match self.variant {
            DistortionVariant::Average => {
                let total: f64 = (0..self.n)
                    .map(|i| self.e2[(u[i] * al.a + a[i]) * al.s_e + s_e[i]])
                    .sum();
                Ok(EtaValue::exact(total / self.n as f64))
            }
            DistortionVariant::Maximal => {
                let per_symbol: Vec<Vec<(f64, f64)>> = (0..self.n)
                    .map(|i| self.dist_support[(u[i] * al.a + a[i]) * al.s_e + s_e[i]].clone())
                    .collect();
                let thr = self.n as f64 * (self.dbar + self.gamma);
                self.block_sum_prob(&per_symbol, move |sum| sum > thr + 1e-12)
            }
        }
    }

    fn block_sum_prob(
        &self,
        per_symbol: &[Vec<(f64, f64)>],
        hit: impl Fn(f64) -> bool + Copy,
    ) -> Result<EtaValue> {
        if enumeration_paths(per_symbol) <= ENUM_MAX_PATHS && self.n <= ENUM_MAX_N {
            Ok(EtaValue::exact(block_sum_enumerate(per_symbol, hit)))
        } else {
            let mut rng = ChaCha12Rng::seed_from_u64(0x0e7a);
            let samples = self.eta_mc_samples;
            let mut count = 0usize;
            for _ in 0..samples {
                let mut total = 0.0;
                for sup in per_symbol {
                    let idx = sample_weighted_pairs(sup, &mut rng);
                    total += sup[idx].0;
                }
                if hit(total) {
                    count += 1;
                }
            }
            let p = count as f64 / samples as f64;
            Ok(EtaValue {
                value: p,
                std_err: Some((p * (1.0 - p) / samples as f64).sqrt()),
            })
        }
    }

    fn check_blocks(&self, u: &[usize], a: &[usize], s_e: &[usize]) -> Result<()> {
        for b in [u.len(), a.len(), s_e.len()] {
            if b != self.n {
                return Err(CodingError::BlockLength(b, self.n));
            }
        }
        Ok(())
    }
}

fn sample_weighted_pairs<R: rand::Rng + ?Sized>(pairs: &[(f64, f64)], rng: &mut R) -> usize {
    let weights: Vec<f64> = pairs.iter().map(|(_, p)| *p).collect();
    sample_slice(&weights, rng)
}

pub(crate) fn merge_support(support: &mut Vec<(f64, f64)>, value: f64, prob: f64) {
    for (v, p) in support.iter_mut() {
        if (*v - value).abs() <= 1e-12 {
            *p += prob;
            return;
        }
    }
    support.push((value, prob));
}

fn normalize_support(support: &mut [(f64, f64)]) {
    let total: f64 = support.iter().map(|(_, p)| p).sum();
    if total > 0.0 {
        for (_, p) in support.iter_mut() {
            *p /= total;
        }
    }
}

fn enumeration_paths(per_symbol: &[Vec<(f64, f64)>]) -> u64 {
    let mut total: u64 = 1;
    for s in per_symbol {
        total = total.saturating_mul(s.len().max(1) as u64);
        if total > ENUM_MAX_PATHS {
            return total;
        }
    }
    total
}

/// P(hit(sum of one draw per symbol)) by depth-first enumeration.
fn block_sum_enumerate(per_symbol: &[Vec<(f64, f64)>], hit: impl Fn(f64) -> bool + Copy) -> f64 {
    fn rec(
        per_symbol: &[Vec<(f64, f64)>],
        i: usize,
        sum: f64,
        prob: f64,
        hit: &impl Fn(f64) -> bool,
    ) -> f64 {
        if prob == 0.0 {
            return 0.0;
        }
        if i == per_symbol.len() {
            return if hit(sum) { prob } else { 0.0 };
        }
        per_symbol[i]
            .iter()
            .map(|&(v, p)| rec(per_symbol, i + 1, sum + v, prob * p, hit))
            .sum()
    }
    rec(per_symbol, 0, 0.0, 1.0, &hit)
}

/// P(hit(sum of n i.i.d. draws)) for a single-value-support distribution,
/// exact by multinomial enumeration over value counts.
pub(crate) fn iid_sum_prob(support: &[(f64, f64)], n: usize, hit: impl Fn(f64) -> bool) -> f64 {
    fn rec(
        support: &[(f64, f64)],
        j: usize,
        remaining: usize,
        weight: f64,
        sum: f64,
        hit: &impl Fn(f64) -> bool,
        acc: &mut f64,
    ) {
        if weight == 0.0 {
            return;
        }
        if j + 1 == support.len() {
            let (v, p) = support[j];
            // p^0 = 1 covers the remaining == 0 case
            let w = weight * p.powi(remaining as i32);
            if w > 0.0 && hit(sum + remaining as f64 * v) {
                *acc += w;
            }
            return;
        }
        let (v, p) = support[j];
        // incremental binomial weight: C(remaining, c) p^c
        let mut term = weight;
        for c in 0..=remaining {
            rec(support, j + 1, remaining - c, term, sum + c as f64 * v, hit, acc);
            term *= p * (remaining - c) as f64 / (c + 1) as f64;
        }
    }
    if support.is_empty() {
        return 0.0;
    }
    if support.len() == 1 {
        return if hit(n as f64 * support[0].0) { 1.0 } else { 0.0 };
    }
    let mut acc = 0.0;
    rec(support, 0, n, 1.0, 0.0, &hit, &mut acc);
    acc
}
