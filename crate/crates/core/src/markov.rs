//! Hidden Markov model with Gaussian-mixture emissions.
//!
//! States are 0-based in the Rust API. Everything rendered for people or
//! written to files (violations, reports, CSV, JSON) uses 1-based state
//! numbers `S_1..S_N`.
//!
//! The forward and backward passes are scaled per step. Emission densities
//! are additionally evaluated in log space and shifted by their per-step
//! maximum, so an observation far out in every state's tail does not flush
//! the recursion to zero.

use std::fmt;

use ndarray::{Array1, Array2};
use rand::Rng;

use crate::error::{Error, Result};
use crate::mixture::{
    ln_pdf_from_terms, sum_within_tolerance, GaussianMixture, MixtureParams, WEIGHT_SUM_TOLERANCE,
};
use crate::rng;

/// Unvalidated model description, as read from a file or assembled by hand.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParts {
    pub transition: Vec<Vec<f64>>,
    pub initial: Vec<f64>,
    pub emissions: Vec<MixtureParams>,
}

/// One broken model invariant. Indices are 0-based; `Display` prints 1-based.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    NoStates,
    TransitionRowCount {
        expected: usize,
        found: usize,
    },
    TransitionRowLength {
        row: usize,
        expected: usize,
        found: usize,
    },
    TransitionEntry {
        row: usize,
        col: usize,
        value: f64,
    },
    TransitionRowSum {
        row: usize,
        sum: f64,
    },
    InitialLength {
        expected: usize,
        found: usize,
    },
    InitialEntry {
        state: usize,
        value: f64,
    },
    InitialSum {
        sum: f64,
    },
    EmissionCount {
        expected: usize,
        found: usize,
    },
    EmissionShape {
        state: usize,
        message: String,
    },
    EmissionWeight {
        state: usize,
        component: usize,
        value: f64,
    },
    EmissionWeightSum {
        state: usize,
        sum: f64,
    },
    EmissionMean {
        state: usize,
        component: usize,
        value: f64,
    },
    EmissionSigma {
        state: usize,
        component: usize,
        value: f64,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use Violation::*;
        match self {
            NoStates => write!(f, "model has no states"),
            TransitionRowCount { expected, found } => {
                write!(f, "transition has {found} rows, expected {expected}")
            }
            TransitionRowLength {
                row,
                expected,
                found,
            } => write!(
                f,
                "transition row {} has {found} entries, expected {expected}",
                row + 1
            ),
            TransitionEntry { row, col, value } => write!(
                f,
                "transition[{}][{}] = {value} is not a probability",
                row + 1,
                col + 1
            ),
            TransitionRowSum { row, sum } => write!(
                f,
                "transition row {} sums to {sum}, outside 1 ± {WEIGHT_SUM_TOLERANCE}",
                row + 1
            ),
            InitialLength { expected, found } => {
                write!(f, "initial has {found} entries, expected {expected}")
            }
            InitialEntry { state, value } => {
                write!(f, "initial[{}] = {value} is not a probability", state + 1)
            }
            InitialSum { sum } => {
                write!(
                    f,
                    "initial sums to {sum}, outside 1 ± {WEIGHT_SUM_TOLERANCE}"
                )
            }
            EmissionCount { expected, found } => {
                write!(f, "emissions has {found} entries, expected {expected}")
            }
            EmissionShape { state, message } => {
                write!(f, "state {} emission: {message}", state + 1)
            }
            EmissionWeight {
                state,
                component,
                value,
            } => write!(
                f,
                "state {} component {} weight {value} must be finite and nonnegative",
                state + 1,
                component + 1
            ),
            EmissionWeightSum { state, sum } => write!(
                f,
                "state {} weights sum to {sum}, outside 1 ± {WEIGHT_SUM_TOLERANCE}",
                state + 1
            ),
            EmissionMean {
                state,
                component,
                value,
            } => write!(
                f,
                "state {} component {} mean {value} is not finite",
                state + 1,
                component + 1
            ),
            EmissionSigma {
                state,
                component,
                value,
            } => write!(
                f,
                "state {} component {} sigma {value} must be finite and positive",
                state + 1,
                component + 1
            ),
        }
    }
}

/// Checks every model invariant, renormalizing probability vectors whose sums
/// are within tolerance. Returns all violations found, not just the first.
pub fn validate(parts: &ModelParts) -> std::result::Result<GmHmm, Vec<Violation>> {
    let n = parts.transition.len();
    let mut v = Vec::new();
    if n == 0 {
        v.push(Violation::NoStates);
        return Err(v);
    }

    let mut transition = Array2::zeros((n, n));
    for (i, row) in parts.transition.iter().enumerate() {
        if row.len() != n {
            v.push(Violation::TransitionRowLength {
                row: i,
                expected: n,
                found: row.len(),
            });
            continue;
        }
        match checked_distribution(row) {
            Ok(p) => transition.row_mut(i).assign(&Array1::from(p)),
            Err(Bad::Entry(j, value)) => v.push(Violation::TransitionEntry {
                row: i,
                col: j,
                value,
            }),
            Err(Bad::Sum(sum)) => v.push(Violation::TransitionRowSum { row: i, sum }),
        }
    }

    let mut initial = Array1::zeros(n);
    if parts.initial.len() != n {
        v.push(Violation::InitialLength {
            expected: n,
            found: parts.initial.len(),
        });
    } else {
        match checked_distribution(&parts.initial) {
            Ok(p) => initial = Array1::from(p),
            Err(Bad::Entry(state, value)) => v.push(Violation::InitialEntry { state, value }),
            Err(Bad::Sum(sum)) => v.push(Violation::InitialSum { sum }),
        }
    }

    if parts.emissions.len() != n {
        v.push(Violation::EmissionCount {
            expected: n,
            found: parts.emissions.len(),
        });
    }
    let mut emissions = Vec::with_capacity(n);
    for (state, e) in parts.emissions.iter().enumerate() {
        let before = v.len();
        check_emission(state, e, &mut v);
        if v.len() == before {
            match GaussianMixture::from_params(&e.weights, &e.means, &e.sigmas) {
                Ok(m) => emissions.push(m),
                Err(err) => v.push(Violation::EmissionShape {
                    state,
                    message: err.to_string(),
                }),
            }
        }
    }

    if v.is_empty() {
        Ok(GmHmm {
            transition,
            initial,
            emissions,
        })
    } else {
        Err(v)
    }
}

enum Bad {
    Entry(usize, f64),
    Sum(f64),
}

fn checked_distribution(p: &[f64]) -> std::result::Result<Vec<f64>, Bad> {
    if let Some((i, &x)) = p
        .iter()
        .enumerate()
        .find(|(_, x)| !(x.is_finite() && (0.0..=1.0).contains(*x)))
    {
        return Err(Bad::Entry(i, x));
    }
    let sum: f64 = p.iter().sum();
    if !sum_within_tolerance(sum) {
        return Err(Bad::Sum(sum));
    }
    Ok(p.iter().map(|x| x / sum).collect())
}

fn check_emission(state: usize, e: &MixtureParams, v: &mut Vec<Violation>) {
    let m = e.weights.len();
    if m == 0 {
        v.push(Violation::EmissionShape {
            state,
            message: "no components".into(),
        });
        return;
    }
    if e.means.len() != m || e.sigmas.len() != m {
        v.push(Violation::EmissionShape {
            state,
            message: format!(
                "{} weights, {} means, {} sigmas",
                m,
                e.means.len(),
                e.sigmas.len()
            ),
        });
        return;
    }
    for k in 0..m {
        let (w, mu, s) = (e.weights[k], e.means[k], e.sigmas[k]);
        if !(w.is_finite() && w >= 0.0) {
            v.push(Violation::EmissionWeight {
                state,
                component: k,
                value: w,
            });
        }
        if !mu.is_finite() {
            v.push(Violation::EmissionMean {
                state,
                component: k,
                value: mu,
            });
        }
        if !(s.is_finite() && s > 0.0) {
            v.push(Violation::EmissionSigma {
                state,
                component: k,
                value: s,
            });
        }
    }
    let sum: f64 = e.weights.iter().sum();
    if sum.is_finite() && !sum_within_tolerance(sum) {
        v.push(Violation::EmissionWeightSum { state, sum });
    }
}

/// Validated GM-HMM. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct GmHmm {
    transition: Array2<f64>,
    initial: Array1<f64>,
    emissions: Vec<GaussianMixture>,
}

impl GmHmm {
    pub fn new(
        transition: Array2<f64>,
        initial: Array1<f64>,
        emissions: Vec<GaussianMixture>,
    ) -> Result<Self> {
        let parts = ModelParts {
            transition: transition.rows().into_iter().map(|r| r.to_vec()).collect(),
            initial: initial.to_vec(),
            emissions: emissions.iter().map(GaussianMixture::to_params).collect(),
        };
        validate(&parts).map_err(Error::Validation)
    }

    pub fn from_parts(parts: &ModelParts) -> Result<Self> {
        validate(parts).map_err(Error::Validation)
    }

    pub fn to_parts(&self) -> ModelParts {
        ModelParts {
            transition: self
                .transition
                .rows()
                .into_iter()
                .map(|r| r.to_vec())
                .collect(),
            initial: self.initial.to_vec(),
            emissions: self
                .emissions
                .iter()
                .map(GaussianMixture::to_params)
                .collect(),
        }
    }

    pub fn n_states(&self) -> usize {
        self.initial.len()
    }

    pub fn transition(&self) -> &Array2<f64> {
        &self.transition
    }

    pub fn initial(&self) -> &Array1<f64> {
        &self.initial
    }

    pub fn emissions(&self) -> &[GaussianMixture] {
        &self.emissions
    }

    pub fn emission(&self, state: usize) -> &GaussianMixture {
        &self.emissions[state]
    }

    /// Copy of the model with state `s`'s emission replaced.
    pub(crate) fn with_emission(&self, state: usize, emission: GaussianMixture) -> GmHmm {
        let mut out = self.clone();
        out.emissions[state] = emission;
        out
    }

    pub fn emission_density(&self, state: usize, x: f64) -> f64 {
        self.emissions[state].pdf(x)
    }

    pub fn select_initial_state(&self, u: f64) -> usize {
        select_initial_state(self.initial.as_slice().expect("contiguous"), u)
    }

    pub fn select_next_state(&self, state: usize, u: f64) -> usize {
        rng::select_index(
            self.transition.row(state).as_slice().expect("contiguous"),
            u,
        )
    }

    /// Relabels states: new state `s` is old state `order[s]`.
    pub fn permute_states(&self, order: &[usize]) -> GmHmm {
        let n = self.n_states();
        assert_eq!(order.len(), n, "permutation length");
        let transition =
            Array2::from_shape_fn((n, n), |(i, j)| self.transition[[order[i], order[j]]]);
        let initial = Array1::from_shape_fn(n, |i| self.initial[order[i]]);
        let emissions = order.iter().map(|&s| self.emissions[s].clone()).collect();
        GmHmm {
            transition,
            initial,
            emissions,
        }
    }

    /// Runs the chain for `steps` periods. Each step consumes one uniform
    /// for the state (initial or transition), one uniform for the component
    /// and one standard normal variate, in that order.
    pub fn simulate<R: Rng + ?Sized>(&self, steps: usize, rng: &mut R) -> StatePath {
        let mut out = Vec::with_capacity(steps);
        let mut state = 0;
        for t in 0..steps {
            let u = rng::uniform(rng);
            state = if t == 0 {
                self.select_initial_state(u)
            } else {
                self.select_next_state(state, u)
            };
            out.push(PathStep {
                state,
                value: self.emissions[state].sample(rng),
            });
        }
        StatePath { steps: out }
    }

    /// Scaled forward pass.
    pub fn forward(&self, obs: &ObservationSeries) -> Result<ForwardPass> {
        let em = ScaledEmissions::new(self, obs.values())?;
        let (alpha, scale) = self.forward_scaled(&em)?;
        let log_scale: Vec<f64> = scale
            .iter()
            .zip(&em.shift)
            .map(|(c, s)| c.ln() + s)
            .collect();
        let log_likelihood = log_scale.iter().sum();
        Ok(ForwardPass {
            alpha,
            log_scale,
            log_likelihood,
        })
    }

    /// Scaled backward variables, using the forward pass's scaling factors:
    /// `β̂_t(i) = β_t(i) / Π_{s>t} exp(log_scale_s)`, so the last row is ones.
    pub fn backward(&self, obs: &ObservationSeries) -> Result<Array2<f64>> {
        Ok(self.forward_backward(obs)?.beta)
    }

    pub fn log_likelihood(&self, obs: &ObservationSeries) -> Result<f64> {
        Ok(self.forward(obs)?.log_likelihood)
    }

    /// `P(q_t = S_i | O)`, a `T × N` matrix.
    pub fn state_posteriors(&self, obs: &ObservationSeries) -> Result<Array2<f64>> {
        Ok(self.forward_backward(obs)?.state_posteriors())
    }

    pub(crate) fn forward_backward(&self, obs: &ObservationSeries) -> Result<ForwardBackward> {
        let em = ScaledEmissions::new(self, obs.values())?;
        let (alpha, scale) = self.forward_scaled(&em)?;
        let (t_len, n) = alpha.dim();
        let mut beta = Array2::<f64>::zeros((t_len, n));
        beta.row_mut(t_len - 1).fill(1.0);
        for t in (0..t_len - 1).rev() {
            for i in 0..n {
                let mut acc = 0.0;
                for j in 0..n {
                    acc += self.transition[[i, j]] * em.scaled[[t + 1, j]] * beta[[t + 1, j]];
                }
                beta[[t, i]] = acc / scale[t + 1];
            }
        }
        let log_likelihood = scale.iter().zip(&em.shift).map(|(c, s)| c.ln() + s).sum();
        Ok(ForwardBackward {
            alpha,
            beta,
            emissions: em,
            log_likelihood,
        })
    }

    fn forward_scaled(&self, em: &ScaledEmissions) -> Result<(Array2<f64>, Vec<f64>)> {
        let (t_len, n) = em.scaled.dim();
        let mut alpha = Array2::<f64>::zeros((t_len, n));
        let mut scale = Vec::with_capacity(t_len);
        for t in 0..t_len {
            for j in 0..n {
                let prior = if t == 0 {
                    self.initial[j]
                } else {
                    (0..n)
                        .map(|i| alpha[[t - 1, i]] * self.transition[[i, j]])
                        .sum()
                };
                alpha[[t, j]] = prior * em.scaled[[t, j]];
            }
            let c: f64 = alpha.row(t).sum();
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::Underflow { step: t + 1 });
            }
            alpha.row_mut(t).mapv_inplace(|a| a / c);
            scale.push(c);
        }
        Ok((alpha, scale))
    }
}

/// `select_initial_state` over a bare probability vector.
pub fn select_initial_state(initial: &[f64], u: f64) -> usize {
    rng::select_index(initial, u)
}

/// `select_next_state` over a bare row-major transition matrix.
pub fn select_next_state(transition: &Array2<f64>, state: usize, u: f64) -> usize {
    rng::select_index(&transition.row(state).to_vec(), u)
}

/// Emission densities for each (t, state), divided by `exp(shift_t)` where
/// `shift_t` is the largest log density at step `t`.
#[derive(Debug, Clone)]
pub(crate) struct ScaledEmissions {
    pub log_density: Array2<f64>,
    pub scaled: Array2<f64>,
    pub shift: Vec<f64>,
}

impl ScaledEmissions {
    fn new(model: &GmHmm, obs: &[f64]) -> Result<Self> {
        if obs.is_empty() {
            return Err(Error::InsufficientData("empty observation series".into()));
        }
        let n = model.n_states();
        let terms: Vec<_> = model.emissions.iter().map(|e| e.log_terms()).collect();
        let log_density = Array2::from_shape_fn((obs.len(), n), |(t, j)| {
            ln_pdf_from_terms(&terms[j], obs[t])
        });
        let mut shift = Vec::with_capacity(obs.len());
        let mut scaled = Array2::zeros((obs.len(), n));
        for t in 0..obs.len() {
            let m = log_density.row(t).fold(f64::NEG_INFINITY, |a, &b| a.max(b));
            if !m.is_finite() {
                return Err(Error::Underflow { step: t + 1 });
            }
            for j in 0..n {
                scaled[[t, j]] = (log_density[[t, j]] - m).exp();
            }
            shift.push(m);
        }
        Ok(Self {
            log_density,
            scaled,
            shift,
        })
    }
}

#[derive(Debug, Clone)]
pub(crate) struct ForwardBackward {
    pub alpha: Array2<f64>,
    pub beta: Array2<f64>,
    pub emissions: ScaledEmissions,
    pub log_likelihood: f64,
}

impl ForwardBackward {
    pub fn state_posteriors(&self) -> Array2<f64> {
        let mut g = &self.alpha * &self.beta;
        for mut row in g.rows_mut() {
            let s = row.sum();
            row.mapv_inplace(|x| x / s);
        }
        g
    }
}

/// Result of the scaled forward recursion.
///
/// `alpha[t][i]` is `α_t(i)` divided by `exp(log_scale_1 + ... + log_scale_t)`;
/// each row sums to one. `log_likelihood` is `ln P(O | λ)`.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    pub alpha: Array2<f64>,
    pub log_scale: Vec<f64>,
    pub log_likelihood: f64,
}

/// Ordered monthly percentage log returns, optionally labelled.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSeries {
    values: Vec<f64>,
    labels: Option<Vec<String>>,
}

impl ObservationSeries {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some((t, v)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::Domain(format!(
                "observation {} is not finite ({v})",
                t + 1
            )));
        }
        Ok(Self {
            values,
            labels: None,
        })
    }

    pub fn with_labels(values: Vec<f64>, labels: Vec<String>) -> Result<Self> {
        if labels.len() != values.len() {
            return Err(Error::Domain(format!(
                "{} labels for {} observations",
                labels.len(),
                values.len()
            )));
        }
        let mut s = Self::new(values)?;
        s.labels = Some(labels);
        Ok(s)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathStep {
    pub state: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StatePath {
    pub steps: Vec<PathStep>,
}

impl StatePath {
    pub fn values(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.value).collect()
    }

    pub fn states(&self) -> Vec<usize> {
        self.steps.iter().map(|s| s.state).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use approx::assert_relative_eq;
    use ndarray::array;

    fn two_state() -> GmHmm {
        GmHmm::new(
            array![[0.8, 0.2], [0.3, 0.7]],
            array![0.6, 0.4],
            vec![
                GaussianMixture::from_params(&[0.7, 0.3], &[1.0, -2.0], &[1.0, 2.0]).unwrap(),
                GaussianMixture::single(-0.5, 1.5).unwrap(),
            ],
        )
        .unwrap()
    }

    #[test]
    fn table_model_validates_after_normalization() {
        let m = fixtures::table_model();
        for row in m.transition().rows() {
            assert!((row.sum() - 1.0).abs() < 1e-9);
        }
        assert!((m.initial().sum() - 1.0).abs() < 1e-9);
        assert_relative_eq!(m.transition()[[0, 0]], 0.71 / 0.997, epsilon = 1e-15);
    }

    #[test]
    fn row_sum_violation() {
        let mut parts = fixtures::table_model().to_parts();
        parts.transition[1] = vec![0.5, 0.3, 0.0];
        let v = validate(&parts).unwrap_err();
        assert_eq!(v.len(), 1);
        match &v[0] {
            Violation::TransitionRowSum { row, sum } => {
                assert_eq!(*row, 1);
                assert_relative_eq!(*sum, 0.8, epsilon = 1e-12);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(v[0].to_string().contains("row 2"));
    }

    #[test]
    fn negative_sigma_named() {
        let mut parts = fixtures::table_model().to_parts();
        parts.emissions[2].sigmas[1] = -0.5;
        let v = validate(&parts).unwrap_err();
        assert_eq!(
            v,
            vec![Violation::EmissionSigma {
                state: 2,
                component: 1,
                value: -0.5
            }]
        );
        assert_eq!(
            v[0].to_string(),
            "state 3 component 2 sigma -0.5 must be finite and positive"
        );
    }

    #[test]
    fn collects_all_violations() {
        let parts = ModelParts {
            transition: vec![vec![0.5, 0.6], vec![1.2, -0.2]],
            initial: vec![1.0],
            emissions: vec![MixtureParams {
                weights: vec![1.0],
                means: vec![0.0],
                sigmas: vec![1.0],
            }],
        };
        let v = validate(&parts).unwrap_err();
        assert_eq!(v.len(), 4, "{v:?}");
    }

    #[test]
    fn initial_state_selection() {
        let pi = [0.5, 0.3, 0.2];
        assert_eq!(select_initial_state(&pi, 0.3), 0);
        assert_eq!(select_initial_state(&pi, 0.6), 1);
        assert_eq!(select_initial_state(&pi, 0.95), 2);
        assert_eq!(fixtures::table_model().select_initial_state(0.5), 1);
    }

    #[test]
    fn next_state_selection() {
        let m = fixtures::table_model();
        assert_eq!(m.select_next_state(1, 0.5), 1);
        assert_eq!(m.select_next_state(0, 0.99), 2);
        let absorbing = array![[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        for u in [0.0, 0.5, 0.99] {
            assert_eq!(select_next_state(&absorbing, 1, u), 1);
        }
    }

    #[test]
    fn emission_density_delegates() {
        let m = fixtures::table_model();
        assert_relative_eq!(m.emission_density(0, 1.662), m.emission(0).pdf(1.662));
        assert!((m.emission_density(0, 1.662) - 0.32953).abs() < 2e-5);
        let single = GmHmm::new(
            array![[0.5, 0.5], [0.5, 0.5]],
            array![0.5, 0.5],
            vec![
                GaussianMixture::single(2.0, 0.5).unwrap(),
                GaussianMixture::single(2.0, 0.5).unwrap(),
            ],
        )
        .unwrap();
        let peak = 1.0 / (0.5 * (2.0 * std::f64::consts::PI).sqrt());
        assert_relative_eq!(single.emission_density(0, 2.0), peak, epsilon = 1e-15);
        assert_eq!(
            single.emission_density(0, 0.3),
            single.emission_density(1, 0.3)
        );
    }

    #[test]
    fn one_state_likelihood_factorizes() {
        let mix = GaussianMixture::from_params(&[0.4, 0.6], &[0.0, 3.0], &[1.0, 2.0]).unwrap();
        let m = GmHmm::new(array![[1.0]], array![1.0], vec![mix.clone()]).unwrap();
        let obs = ObservationSeries::new(vec![0.3, -1.0, 4.0, 2.2]).unwrap();
        let expected: f64 = obs.values().iter().map(|&x| mix.pdf(x).ln()).sum();
        assert_relative_eq!(m.log_likelihood(&obs).unwrap(), expected, epsilon = 1e-12);
    }

    #[test]
    fn single_observation_base_case() {
        let m = two_state();
        let obs = ObservationSeries::new(vec![0.7]).unwrap();
        let p = 0.6 * m.emission_density(0, 0.7) + 0.4 * m.emission_density(1, 0.7);
        assert_relative_eq!(m.log_likelihood(&obs).unwrap(), p.ln(), epsilon = 1e-14);
    }

    #[test]
    fn backward_boundary_and_identity() {
        let m = two_state();
        let obs = ObservationSeries::new(vec![0.1, 2.0, -3.0, 0.5, 1.1]).unwrap();
        let beta = m.backward(&obs).unwrap();
        assert!(beta.row(4).iter().all(|&b| b == 1.0));
        let fwd = m.forward(&obs).unwrap();
        // Σ_i α̂_t(i) β̂_t(i) is the same (one) for every t in scaled terms.
        for t in 0..obs.len() {
            let s: f64 = (0..2).map(|i| fwd.alpha[[t, i]] * beta[[t, i]]).sum();
            assert_relative_eq!(s, 1.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn far_outlier_does_not_underflow() {
        let m = two_state();
        let obs = ObservationSeries::new(vec![0.0, 300.0, 0.0]).unwrap();
        let ll = m.log_likelihood(&obs).unwrap();
        assert!(ll.is_finite() && ll < -1e3);
    }

    #[test]
    fn impossible_observation_is_an_underflow_error() {
        // state 1 is absorbing and the only state reachable; its density at
        // the second point is positive, but π puts all mass on state 1 and
        // state 2's path is blocked by zero transitions.
        let m = GmHmm::new(
            array![[1.0, 0.0], [0.0, 1.0]],
            array![1.0, 0.0],
            vec![
                GaussianMixture::single(0.0, 0.01).unwrap(),
                GaussianMixture::single(100.0, 1.0).unwrap(),
            ],
        )
        .unwrap();
        let obs = ObservationSeries::new(vec![0.0, 1.0e4]).unwrap();
        // both log densities are finite, so the step-2 scale is what fails
        match m.forward(&obs) {
            Err(Error::Underflow { step }) => assert_eq!(step, 2),
            other => panic!("expected underflow, got {other:?}"),
        }
    }

    #[test]
    fn one_state_simulation() {
        let m = GmHmm::new(
            array![[1.0]],
            array![1.0],
            vec![GaussianMixture::single(0.0, 1.0).unwrap()],
        )
        .unwrap();
        let path = m.simulate(100, &mut rng::seeded(1));
        assert_eq!(path.steps.len(), 100);
        assert!(path.states().iter().all(|&s| s == 0));
    }

    #[test]
    fn simulation_is_deterministic() {
        let m = fixtures::table_model();
        let a = m.simulate(500, &mut rng::seeded(99));
        let b = m.simulate(500, &mut rng::seeded(99));
        assert_eq!(a, b);
        let c = m.simulate(500, &mut rng::seeded(100));
        assert_ne!(a, c);
    }

    #[test]
    fn simulate_draw_discipline() {
        let m = fixtures::table_model();
        let mut r = rng::seeded(5);
        let path = m.simulate(3, &mut r);
        let mut r2 = rng::seeded(5);
        let mut state = 0;
        for (t, step) in path.steps.iter().enumerate() {
            let u = rng::uniform(&mut r2);
            state = if t == 0 {
                m.select_initial_state(u)
            } else {
                m.select_next_state(state, u)
            };
            let k = m.emission(state).select_component(rng::uniform(&mut r2));
            let c = m.emission(state).components()[k];
            let value = c.mean() + c.sigma() * rng::standard_normal(&mut r2);
            assert_eq!(step.state, state);
            assert_eq!(step.value, value);
        }
    }

    #[test]
    fn permutation_keeps_likelihood() {
        let m = fixtures::table_model();
        let obs = ObservationSeries::new(m.simulate(60, &mut rng::seeded(8)).values()).unwrap();
        let base = m.log_likelihood(&obs).unwrap();
        for order in [[1, 0, 2], [2, 1, 0], [1, 2, 0]] {
            let p = m.permute_states(&order);
            assert_relative_eq!(p.log_likelihood(&obs).unwrap(), base, epsilon = 1e-9);
        }
    }

    #[test]
    fn observation_series_rejects_non_finite() {
        assert!(ObservationSeries::new(vec![1.0, f64::NAN]).is_err());
        assert!(ObservationSeries::with_labels(vec![1.0], vec![]).is_err());
    }
}
