//! Two-component mixed state/channel models: the min/max achievable-rate
//! bound and the weighted distortion decomposition.

use crate::estimator::{optimal_estimator, policy_distortion};
use crate::model::{IsacModel, Policy};
use crate::prob::FiniteKernel;

use super::{evaluate_policy, Result, SolveError};

/// An ISAC instance whose state law and channel law are each a sequence-
/// level convex mixture of two components. All components share the same
/// alphabets and distortion table; component (i, j) pairs state kernel i
/// with channel kernel j.
#[derive(Debug, Clone)]
pub struct MixedModel {
    pub state_kernels: [FiniteKernel; 2],
    pub state_weights: [f64; 2],
    pub channel_kernels: [FiniteKernel; 2],
    pub channel_weights: [f64; 2],
    /// Alphabets and distortion table shared by every component; the
    /// kernels of this template are ignored.
    pub template: IsacModel,
}

impl MixedModel {
    pub fn new(
        template: IsacModel,
        state_kernels: [FiniteKernel; 2],
        state_weights: [f64; 2],
        channel_kernels: [FiniteKernel; 2],
        channel_weights: [f64; 2],
    ) -> Result<Self> {
        for w in state_weights.iter().chain(&channel_weights) {
            if !(*w >= 0.0) {
                return Err(SolveError::MixedModel(format!("negative weight {w}")));
            }
        }
        if (state_weights[0] + state_weights[1] - 1.0).abs() > 1e-12 {
            return Err(SolveError::MixedModel("state weights must sum to 1".into()));
        }
        if (channel_weights[0] + channel_weights[1] - 1.0).abs() > 1e-12 {
            return Err(SolveError::MixedModel(
                "channel weights must sum to 1".into(),
            ));
        }
        let mixed = Self {
            state_kernels,
            state_weights,
            channel_kernels,
            channel_weights,
            template,
        };
        // shape checks via component construction
        for i in 0..2 {
            for j in 0..2 {
                mixed.component(i, j)?;
            }
        }
        Ok(mixed)
    }

    /// Component model with state kernel `i` and channel kernel `j`.
    pub fn component(&self, i: usize, j: usize) -> Result<IsacModel> {
        Ok(IsacModel::new(
            self.template.alphabets.clone(),
            self.state_kernels[i].clone(),
            self.channel_kernels[j].clone(),
            self.template.distortion.clone(),
        )?)
    }

    /// The single-letter mixture model: weighted state and channel kernels.
    pub fn mixture(&self) -> Result<IsacModel> {
        let state = FiniteKernel::mix(
            &self.state_kernels[0],
            self.state_weights[0],
            &self.state_kernels[1],
            self.state_weights[1],
        )?;
        let channel = FiniteKernel::mix(
            &self.channel_kernels[0],
            self.channel_weights[0],
            &self.channel_kernels[1],
            self.channel_weights[1],
        )?;
        Ok(IsacModel::new(
            self.template.alphabets.clone(),
            state,
            channel,
            self.template.distortion.clone(),
        )?)
    }
}

/// Achievable rate of a shared policy on a mixed model: the smallest
/// component information rate minus the largest component leakage. The
/// mixture weights do not enter the rate.
#[derive(Debug, Clone, Copy)]
pub struct MixedRateReport {
    pub rate: f64,
    /// I(A, U; Y, S_d) per component (i, j).
    pub component_rates: [[f64; 2]; 2],
    /// I(U; S_e | A) per state component i.
    pub component_leakages: [f64; 2],
}

pub fn mixed_rate(mixed: &MixedModel, policy: &Policy) -> Result<MixedRateReport> {
    let mut component_rates = [[0.0; 2]; 2];
    let mut component_leakages = [0.0; 2];
    for i in 0..2 {
        for j in 0..2 {
            let model = mixed.component(i, j)?;
            let report = evaluate_policy(&model, policy)?;
            component_rates[i][j] = report.i_auy;
            // leakage depends only on the state component
            component_leakages[i] = report.i_use;
        }
    }
    let min_rate = component_rates
        .iter()
        .flatten()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    let max_leak = component_leakages
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(MixedRateReport {
        rate: min_rate - max_leak,
        component_rates,
        component_leakages,
    })
}

/// Distortion decomposition of a shared policy: the overall mixture
/// distortion equals the weight-averaged component distortions, each
/// measured with the mixture-posterior estimator applied to that
/// component.
#[derive(Debug, Clone, Copy)]
pub struct MixedDistortionReport {
    pub overall: f64,
    pub components: [[f64; 2]; 2],
}

pub fn mixed_distortion_decomposition(
    mixed: &MixedModel,
    policy: &Policy,
) -> Result<MixedDistortionReport> {
    let mixture = mixed.mixture()?;
    let table = optimal_estimator(&mixture).table;
    let mut components = [[0.0; 2]; 2];
    let mut overall = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            let model = mixed.component(i, j)?;
            let d = policy_distortion(&model, policy, &table)?;
            components[i][j] = d;
            overall += mixed.state_weights[i] * mixed.channel_weights[j] * d;
        }
    }
    Ok(MixedDistortionReport {
        overall,
        components,
    })
}
