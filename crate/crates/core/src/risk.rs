//! Stress and factor analytics on top of fitted models: shock contamination
//! of one state, factor composition into a single univariate mixture,
//! factor re-weighting sweeps and before/after impact reports.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::markov::GmHmm;
use crate::mixture::{self, GaussianMixture, Moments};

/// Tail thresholds (monthly %) used when the caller gives none.
pub const DEFAULT_THRESHOLDS: [f64; 2] = [-5.0, 0.0];

#[derive(Debug, Clone, PartialEq)]
pub struct FactorSpec {
    pub name: String,
    pub weight: f64,
    pub mixture: GaussianMixture,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StressSpec {
    /// 0-based state.
    pub target_state: usize,
    pub shock: GaussianMixture,
    pub epsilon: f64,
}

/// Copy of `model` with the target state's emission contaminated by the shock.
pub fn stress_model(model: &GmHmm, spec: &StressSpec) -> Result<GmHmm> {
    if spec.target_state >= model.n_states() {
        return Err(Error::Domain(format!(
            "state {} does not exist in a {}-state model",
            spec.target_state + 1,
            model.n_states()
        )));
    }
    let stressed = model
        .emission(spec.target_state)
        .contaminate(&spec.shock, spec.epsilon)?;
    Ok(model.with_emission(spec.target_state, stressed))
}

pub fn compose_factors(factors: &[FactorSpec]) -> Result<GaussianMixture> {
    let pairs: Vec<(f64, &GaussianMixture)> =
        factors.iter().map(|f| (f.weight, &f.mixture)).collect();
    mixture::flatten_factors(&pairs)
}

/// Weights with factor `name` set to `target` and every other factor scaled
/// proportionally to fill the remaining mass.
pub fn proportional_weights(base: &[FactorSpec], name: &str, target: f64) -> Result<Vec<f64>> {
    let idx = base
        .iter()
        .position(|f| f.name == name)
        .ok_or_else(|| Error::Domain(format!("no factor named `{name}`")))?;
    if !(0.0..=1.0).contains(&target) {
        return Err(Error::Domain(format!("weight {target} outside [0, 1]")));
    }
    let rest = 1.0 - base[idx].weight;
    if rest <= 0.0 && target < 1.0 {
        return Err(Error::Domain(format!(
            "factor `{name}` holds all the weight; nothing to rescale"
        )));
    }
    Ok(base
        .iter()
        .enumerate()
        .map(|(i, f)| {
            if i == idx {
                target
            } else if rest > 0.0 {
                f.weight * (1.0 - target) / rest
            } else {
                0.0
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub weights: Vec<f64>,
    #[serde(skip)]
    pub mixture: GaussianMixture,
    pub mean: f64,
    pub variance: f64,
    pub threshold: f64,
    /// `P(ξ < threshold)` under the composed mixture.
    pub tail_probability: f64,
}

/// Composes `base_factors` under each weight vector in turn. Output order
/// follows `sweep`.
pub fn reweight_sweep(
    base_factors: &[FactorSpec],
    sweep: &[Vec<f64>],
    threshold: f64,
) -> Result<Vec<SweepRow>> {
    sweep
        .iter()
        .enumerate()
        .map(|(row, weights)| {
            if weights.len() != base_factors.len() {
                return Err(Error::Domain(format!(
                    "sweep vector {} has {} weights for {} factors",
                    row + 1,
                    weights.len(),
                    base_factors.len()
                )));
            }
            let factors: Vec<FactorSpec> = base_factors
                .iter()
                .zip(weights)
                .map(|(f, &w)| FactorSpec {
                    weight: w,
                    ..f.clone()
                })
                .collect();
            let mix = compose_factors(&factors)?;
            let m = mix.central_moments();
            Ok(SweepRow {
                weights: weights.clone(),
                mean: m.mean,
                variance: m.variance,
                threshold,
                tail_probability: mix.cdf(threshold),
                mixture: mix,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailRow {
    pub threshold: f64,
    pub before: f64,
    pub after: f64,
    /// `after / before`; infinite when `before` is zero.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImpactReport {
    pub before: Moments,
    pub after: Moments,
    /// `after - before`, field by field.
    pub delta: Moments,
    pub tails: Vec<TailRow>,
}

pub fn impact_report(
    before: &GaussianMixture,
    after: &GaussianMixture,
    thresholds: &[f64],
) -> ImpactReport {
    let (b, a) = (before.central_moments(), after.central_moments());
    let delta = Moments {
        mean: a.mean - b.mean,
        variance: a.variance - b.variance,
        skewness: a.skewness - b.skewness,
        excess_kurtosis: a.excess_kurtosis - b.excess_kurtosis,
    };
    let tails = thresholds
        .iter()
        .map(|&x| {
            let (pb, pa) = (before.cdf(x), after.cdf(x));
            TailRow {
                threshold: x,
                before: pb,
                after: pa,
                ratio: if pb == pa { 1.0 } else { pa / pb },
            }
        })
        .collect();
    ImpactReport {
        before: b,
        after: a,
        delta,
        tails,
    }
}
