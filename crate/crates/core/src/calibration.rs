//! Baum-Welch calibration of a [`GmHmm`] to one observation series.
//!
//! Each restart starts from [`initialize`] on its own random substream and
//! iterates [`baum_welch_step`] until the log-likelihood changes by less than
//! the tolerance. The best restart wins; its states are put in canonical
//! order (descending mixture mean).

use ndarray::{Array1, Array2, Array3, Axis};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::markov::{ForwardBackward, GmHmm, ObservationSeries};
use crate::mixture::{GaussianComponent, GaussianMixture};
use crate::rng::{self, ScenarioRng};

/// A component whose total responsibility falls below this is re-seeded.
pub const RESCUE_MASS: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationConfig {
    pub state_count: usize,
    pub component_count: usize,
    /// Absolute change in log-likelihood that counts as converged.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub restarts: usize,
    pub seed: u64,
    /// Lower bound on component variance, in squared percent.
    pub variance_floor: f64,
    pub weight_floor: f64,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self {
            state_count: 3,
            component_count: 2,
            tolerance: 1e-6,
            max_iterations: 500,
            restarts: 10,
            seed: 0,
            variance_floor: 1e-6,
            weight_floor: 1e-6,
        }
    }
}

impl CalibrationConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Domain(m.to_string()));
        if self.state_count == 0 {
            return bad("state_count must be at least 1");
        }
        if self.component_count == 0 {
            return bad("component_count must be at least 1");
        }
        if self.tolerance.is_nan() || self.tolerance <= 0.0 {
            return bad("tolerance must be positive");
        }
        if self.max_iterations == 0 {
            return bad("max_iterations must be at least 1");
        }
        if self.restarts == 0 {
            return bad("restarts must be at least 1");
        }
        if !(self.variance_floor > 0.0 && self.weight_floor > 0.0) {
            return bad("floors must be positive");
        }
        if self.weight_floor * self.component_count as f64 >= 1.0 {
            return bad("weight_floor times component_count must be below 1");
        }
        Ok(())
    }

    pub fn floors(&self) -> Floors {
        Floors {
            variance: self.variance_floor,
            weight: self.weight_floor,
        }
    }
}

/// Parameter floors applied in every M-step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Floors {
    pub variance: f64,
    pub weight: f64,
}

impl Default for Floors {
    fn default() -> Self {
        CalibrationConfig::default().floors()
    }
}

/// `ξ_t(i, j) = P(q_t = S_i, q_{t+1} = S_j | O, λ)` as a `(T-1) × N × N` array.
pub fn posterior_transitions(model: &GmHmm, obs: &ObservationSeries) -> Result<Array3<f64>> {
    require_two(obs)?;
    let fb = model.forward_backward(obs)?;
    Ok(transition_posteriors(model, &fb))
}

/// Per-state component responsibilities: entry `[j][[t, k]]` is
/// `P(q_t = S_j, component k | O, λ)`. Summed over `j` and `k` each `t` gives 1.
pub fn posterior_components(model: &GmHmm, obs: &ObservationSeries) -> Result<Vec<Array2<f64>>> {
    let fb = model.forward_backward(obs)?;
    let gamma = fb.state_posteriors();
    Ok(component_posteriors(model, obs, &fb, &gamma))
}

fn transition_posteriors(model: &GmHmm, fb: &ForwardBackward) -> Array3<f64> {
    let (t_len, n) = fb.alpha.dim();
    let a = model.transition();
    let b = &fb.emissions.scaled;
    let mut xi = Array3::zeros((t_len - 1, n, n));
    for t in 0..t_len - 1 {
        let mut total = 0.0;
        for i in 0..n {
            for j in 0..n {
                let v = fb.alpha[[t, i]] * a[[i, j]] * b[[t + 1, j]] * fb.beta[[t + 1, j]];
                xi[[t, i, j]] = v;
                total += v;
            }
        }
        xi.index_axis_mut(Axis(0), t).mapv_inplace(|v| v / total);
    }
    xi
}

fn component_posteriors(
    model: &GmHmm,
    obs: &ObservationSeries,
    fb: &ForwardBackward,
    gamma: &Array2<f64>,
) -> Vec<Array2<f64>> {
    let x = obs.values();
    model
        .emissions()
        .iter()
        .enumerate()
        .map(|(j, mix)| {
            // ln w_k - ln σ_k - ln √(2π), hoisted out of the time loop
            let offsets: Vec<f64> = mix
                .weights()
                .iter()
                .zip(mix.components())
                .map(|(w, c)| w.ln() + c.ln_pdf(c.mean()))
                .collect();
            Array2::from_shape_fn((x.len(), mix.len()), |(t, k)| {
                if mix.weights()[k] == 0.0 {
                    return 0.0;
                }
                let c = &mix.components()[k];
                let z = (x[t] - c.mean()) / c.sigma();
                let share = (offsets[k] - 0.5 * z * z - fb.emissions.log_density[[t, j]]).exp();
                gamma[[t, j]] * share
            })
        })
        .collect()
}

fn require_two(obs: &ObservationSeries) -> Result<()> {
    if obs.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "need at least 2 observations, got {}",
            obs.len()
        )));
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub model: GmHmm,
    /// Log-likelihood of the re-estimated model.
    pub log_likelihood: f64,
    /// Log-likelihood of the model the step started from.
    pub previous_log_likelihood: f64,
    /// Some component was re-seeded; likelihood may drop on this step.
    pub rescued: bool,
}

/// One E-step and M-step. The rng is only consumed when a component has to
/// be rescued.
pub fn baum_welch_step<R: Rng + ?Sized>(
    model: &GmHmm,
    obs: &ObservationSeries,
    floors: Floors,
    rng: &mut R,
) -> Result<StepOutcome> {
    require_two(obs)?;
    let fb = model.forward_backward(obs)?;
    let (next, rescued) = m_step(model, obs, &fb, floors, rng)?;
    let log_likelihood = next.log_likelihood(obs)?;
    Ok(StepOutcome {
        model: next,
        log_likelihood,
        previous_log_likelihood: fb.log_likelihood,
        rescued,
    })
}

/// Re-estimation from a completed E-step; the flag reports a rescue.
fn m_step<R: Rng + ?Sized>(
    model: &GmHmm,
    obs: &ObservationSeries,
    fb: &ForwardBackward,
    floors: Floors,
    rng: &mut R,
) -> Result<(GmHmm, bool)> {
    let x = obs.values();
    let n = model.n_states();
    let gamma = fb.state_posteriors();
    let xi_total = transition_posteriors(model, fb).sum_axis(Axis(0));
    let resp = component_posteriors(model, obs, fb, &gamma);

    let initial = gamma.row(0).to_owned();

    let mut transition = Array2::zeros((n, n));
    for i in 0..n {
        let row_mass = xi_total.row(i).sum();
        if row_mass > 0.0 {
            transition
                .row_mut(i)
                .assign(&xi_total.row(i).mapv(|v| v / row_mass));
        } else {
            transition.row_mut(i).assign(&model.transition().row(i));
        }
    }

    let mut rescued = false;
    let mut emissions = Vec::with_capacity(n);
    for (j, old) in model.emissions().iter().enumerate() {
        let state_w = gamma.column(j);
        let state_mass = state_w.sum();
        if state_mass < RESCUE_MASS {
            // unvisited state: nothing to learn from
            emissions.push(old.clone());
            continue;
        }
        let pooled_var = weighted_variance(x, state_w.iter().copied(), state_mass);
        let mut raw_weights = Vec::with_capacity(old.len());
        let mut components = Vec::with_capacity(old.len());
        for k in 0..old.len() {
            let r = resp[j].column(k);
            let mass = r.sum();
            let (mean, var) = if mass < RESCUE_MASS {
                rescued = true;
                (x[rng.random_range(0..x.len())], pooled_var)
            } else {
                let mean = r.iter().zip(x).map(|(r, o)| r * o).sum::<f64>() / mass;
                let var = r
                    .iter()
                    .zip(x)
                    .map(|(r, o)| r * (o - mean) * (o - mean))
                    .sum::<f64>()
                    / mass;
                (mean, var)
            };
            raw_weights.push(mass / state_mass);
            components.push(GaussianComponent::new(
                mean,
                var.max(floors.variance).sqrt(),
            )?);
        }
        let weights = floor_weights(&raw_weights, floors.weight);
        emissions.push(GaussianMixture::new(weights, components)?);
    }

    Ok((GmHmm::new(transition, initial, emissions)?, rescued))
}

fn weighted_variance(x: &[f64], w: impl Iterator<Item = f64> + Clone, total: f64) -> f64 {
    let mean = w.clone().zip(x).map(|(w, o)| w * o).sum::<f64>() / total;
    w.zip(x)
        .map(|(w, o)| w * (o - mean) * (o - mean))
        .sum::<f64>()
        / total
}

/// Maximizes `Σ n_k ln w_k` subject to `w_k ≥ floor`: clamped entries sit
/// exactly at the floor, the rest share the remaining mass proportionally.
fn floor_weights(raw: &[f64], floor: f64) -> Vec<f64> {
    let m = raw.len();
    let total: f64 = raw.iter().sum();
    if total.is_nan() || total <= 0.0 {
        return vec![1.0 / m as f64; m];
    }
    let mut clamped = vec![false; m];
    loop {
        let free_mass = 1.0 - floor * clamped.iter().filter(|&&c| c).count() as f64;
        let free_raw: f64 = raw
            .iter()
            .zip(&clamped)
            .filter(|(_, &c)| !c)
            .map(|(r, _)| r)
            .sum();
        let mut changed = false;
        for k in 0..m {
            if !clamped[k] && (free_raw <= 0.0 || free_mass * raw[k] / free_raw < floor) {
                clamped[k] = true;
                changed = true;
            }
        }
        if !changed {
            return (0..m)
                .map(|k| {
                    if clamped[k] {
                        floor
                    } else {
                        free_mass * raw[k] / free_raw
                    }
                })
                .collect();
        }
    }
}

/// Random starting model: uniform π, uniform transition rows perturbed by up
/// to ±10%, and per-state mixtures seeded from `N` quantile blocks of the
/// sorted data (means at random block points, sigmas at the block standard
/// deviation, uniform weights).
pub fn initialize<R: Rng + ?Sized>(
    obs: &ObservationSeries,
    n: usize,
    m: usize,
    variance_floor: f64,
    rng: &mut R,
) -> Result<GmHmm> {
    let t_len = obs.len();
    if n == 0 || m == 0 {
        return Err(Error::Domain(
            "state and component counts must be positive".into(),
        ));
    }
    if t_len < n * m {
        return Err(Error::InsufficientData(format!(
            "{t_len} observations cannot seed {n} states × {m} components"
        )));
    }
    let initial = Array1::from_elem(n, 1.0 / n as f64);
    let mut transition = Array2::zeros((n, n));
    for mut row in transition.rows_mut() {
        row.iter_mut()
            .for_each(|a| *a = 1.0 + 0.1 * (2.0 * rng::uniform(rng) - 1.0));
        let s = row.sum();
        row.mapv_inplace(|a| a / s);
    }

    let mut sorted = obs.values().to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut emissions = Vec::with_capacity(n);
    for b in 0..n {
        let block = &sorted[b * t_len / n..(b + 1) * t_len / n];
        let mean = block.iter().sum::<f64>() / block.len() as f64;
        let var = block.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / block.len() as f64;
        let sigma = var.max(variance_floor).sqrt();
        let components = (0..m)
            .map(|_| GaussianComponent::new(block[rng.random_range(0..block.len())], sigma))
            .collect::<Result<Vec<_>>>()?;
        emissions.push(GaussianMixture::new(vec![1.0 / m as f64; m], components)?);
    }
    GmHmm::new(transition, initial, emissions)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestartReport {
    /// Substream index under the configured seed.
    pub restart: usize,
    /// Log-likelihood of the initial model followed by one entry per step.
    pub log_likelihood_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub final_log_likelihood: Option<f64>,
    /// Steps (1-based) on which a component was rescued.
    pub rescue_iterations: Vec<usize>,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub restarts: Vec<RestartReport>,
    pub best_restart: usize,
    pub iterations: usize,
    pub converged: bool,
    pub final_log_likelihood: f64,
    pub parameter_count: usize,
    /// `2p - 2 ln L`.
    pub aic: f64,
}

/// Number of free parameters in a model: `N-1` initial, `N(N-1)` transition
/// and `3m-1` per state.
pub fn parameter_count(model: &GmHmm) -> usize {
    let n = model.n_states();
    let emission: usize = model.emissions().iter().map(|e| 3 * e.len() - 1).sum();
    (n - 1) + n * (n - 1) + emission
}

/// Fits a model to `obs`, running `config.restarts` independent EM runs.
pub fn calibrate(
    obs: &ObservationSeries,
    config: &CalibrationConfig,
) -> Result<(GmHmm, CalibrationReport)> {
    config.validate()?;
    let needed = 2 * config.state_count * config.component_count;
    if obs.len() < needed.max(2) {
        return Err(Error::InsufficientData(format!(
            "{} observations; at least {} needed for {} states × {} components",
            obs.len(),
            needed.max(2),
            config.state_count,
            config.component_count
        )));
    }

    let runs: Vec<(Option<GmHmm>, RestartReport)> = (0..config.restarts)
        .into_par_iter()
        .map(|r| run_restart(obs, config, r))
        .collect();

    let mut best: Option<(usize, f64)> = None;
    for (r, (_, report)) in runs.iter().enumerate() {
        if let Some(ll) = report.final_log_likelihood {
            if best.is_none_or(|(_, b)| ll > b) {
                best = Some((r, ll));
            }
        }
    }
    let Some((best_idx, best_ll)) = best else {
        let reasons: Vec<String> = runs.iter().filter_map(|(_, r)| r.failure.clone()).collect();
        return Err(Error::CalibrationFailed(reasons.join("; ")));
    };

    let model = canonical_order(runs[best_idx].0.as_ref().expect("successful run"));
    let p = parameter_count(&model);
    let restarts: Vec<RestartReport> = runs.into_iter().map(|(_, r)| r).collect();
    let report = CalibrationReport {
        best_restart: best_idx,
        iterations: restarts[best_idx].iterations,
        converged: restarts[best_idx].converged,
        final_log_likelihood: best_ll,
        parameter_count: p,
        aic: 2.0 * p as f64 - 2.0 * best_ll,
        restarts,
    };
    Ok((model, report))
}

fn run_restart(
    obs: &ObservationSeries,
    config: &CalibrationConfig,
    restart: usize,
) -> (Option<GmHmm>, RestartReport) {
    let mut report = RestartReport {
        restart,
        log_likelihood_trace: Vec::new(),
        iterations: 0,
        converged: false,
        final_log_likelihood: None,
        rescue_iterations: Vec::new(),
        failure: None,
    };
    let mut rng: ScenarioRng = rng::substream(config.seed, restart as u64);
    let result = (|| -> Result<GmHmm> {
        let mut model = initialize(
            obs,
            config.state_count,
            config.component_count,
            config.variance_floor,
            &mut rng,
        )?;
        // each iteration's E-step doubles as the likelihood of the previous M-step
        let mut fb = model.forward_backward(obs)?;
        let mut ll = fb.log_likelihood;
        report.log_likelihood_trace.push(ll);
        for it in 1..=config.max_iterations {
            let (next, rescued) = m_step(&model, obs, &fb, config.floors(), &mut rng)?;
            fb = next.forward_backward(obs)?;
            report.iterations = it;
            report.log_likelihood_trace.push(fb.log_likelihood);
            if rescued {
                report.rescue_iterations.push(it);
            }
            let delta = fb.log_likelihood - ll;
            model = next;
            ll = fb.log_likelihood;
            if delta.abs() < config.tolerance && !rescued {
                report.converged = true;
                break;
            }
        }
        report.final_log_likelihood = Some(ll);
        Ok(model)
    })();
    match result {
        Ok(model) => (Some(model), report),
        Err(e) => {
            report.failure = Some(format!("restart {restart}: {e}"));
            (None, report)
        }
    }
}

/// States sorted by descending mixture mean; ties keep their order.
pub fn canonical_order(model: &GmHmm) -> GmHmm {
    let mut order: Vec<usize> = (0..model.n_states()).collect();
    order.sort_by(|&a, &b| {
        model
            .emission(b)
            .mean()
            .total_cmp(&model.emission(a).mean())
    });
    model.permute_states(&order)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::markov::validate;
    use approx::assert_relative_eq;
    use ndarray::array;

    fn series(v: &[f64]) -> ObservationSeries {
        ObservationSeries::new(v.to_vec()).unwrap()
    }

    fn two_state() -> GmHmm {
        GmHmm::new(
            array![[0.9, 0.1], [0.2, 0.8]],
            array![0.5, 0.5],
            vec![
                GaussianMixture::from_params(&[0.6, 0.4], &[1.0, 3.0], &[1.0, 0.5]).unwrap(),
                GaussianMixture::from_params(&[0.5, 0.5], &[-2.0, -0.5], &[1.5, 1.0]).unwrap(),
            ],
        )
        .unwrap()
    }

    #[test]
    fn transition_posteriors_normalize() {
        let m = two_state();
        let obs = series(&[0.3, 1.2, -2.0, -1.1, 2.9, 0.0]);
        let xi = posterior_transitions(&m, &obs).unwrap();
        assert_eq!(xi.dim(), (5, 2, 2));
        for t in 0..5 {
            assert_relative_eq!(xi.index_axis(Axis(0), t).sum(), 1.0, epsilon = 1e-12);
        }
        assert!(posterior_transitions(&m, &series(&[1.0])).is_err());
    }

    #[test]
    fn one_state_posteriors_are_one() {
        let m = GmHmm::new(
            array![[1.0]],
            array![1.0],
            vec![GaussianMixture::single(0.0, 1.0).unwrap()],
        )
        .unwrap();
        let obs = series(&[0.1, -0.4, 2.0]);
        let xi = posterior_transitions(&m, &obs).unwrap();
        assert!(xi.iter().all(|&v| (v - 1.0).abs() < 1e-15));
        let r = posterior_components(&m, &obs).unwrap();
        assert!(r[0].iter().all(|&v| (v - 1.0).abs() < 1e-15));
    }

    #[test]
    fn single_component_responsibility_is_state_posterior() {
        let m = GmHmm::new(
            array![[0.7, 0.3], [0.4, 0.6]],
            array![0.2, 0.8],
            vec![
                GaussianMixture::single(1.0, 1.0).unwrap(),
                GaussianMixture::single(-1.0, 2.0).unwrap(),
            ],
        )
        .unwrap();
        let obs = series(&[0.5, -2.0, 1.5, 0.0]);
        let gamma = m.state_posteriors(&obs).unwrap();
        let r = posterior_components(&m, &obs).unwrap();
        for t in 0..4 {
            for j in 0..2 {
                assert_relative_eq!(r[j][[t, 0]], gamma[[t, j]], epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn zero_weight_component_gets_no_responsibility() {
        let m = GmHmm::new(
            array![[1.0]],
            array![1.0],
            vec![GaussianMixture::from_params(&[1.0, 0.0], &[0.0, 0.5], &[1.0, 1.0]).unwrap()],
        )
        .unwrap();
        let r = posterior_components(&m, &series(&[0.5, 0.4, 0.6])).unwrap();
        assert!(r[0].column(1).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn one_state_one_component_step_is_gaussian_mle() {
        let x = [1.3, -0.7, 2.2, 0.4, 0.9, -1.5, 3.1];
        let m = GmHmm::new(
            array![[1.0]],
            array![1.0],
            vec![GaussianMixture::single(10.0, 4.0).unwrap()],
        )
        .unwrap();
        let out = baum_welch_step(&m, &series(&x), Floors::default(), &mut rng::seeded(0)).unwrap();
        let mean = x.iter().sum::<f64>() / x.len() as f64;
        let sd = (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / x.len() as f64).sqrt();
        let c = out.model.emission(0).components()[0];
        assert_relative_eq!(c.mean(), mean, epsilon = 1e-12);
        assert_relative_eq!(c.sigma(), sd, epsilon = 1e-12);
        assert!(!out.rescued);
        assert!(out.log_likelihood > out.previous_log_likelihood);
    }

    #[test]
    fn step_is_monotone_on_simple_case() {
        let m = two_state();
        let obs = ObservationSeries::new(m.simulate(200, &mut rng::seeded(4)).values()).unwrap();
        let mut model = m;
        let mut r = rng::seeded(1);
        for _ in 0..20 {
            let s = baum_welch_step(&model, &obs, Floors::default(), &mut r).unwrap();
            assert!(s.log_likelihood >= s.previous_log_likelihood - 1e-9);
            assert!(validate(&s.model.to_parts()).is_ok());
            model = s.model;
        }
    }

    #[test]
    fn weight_floor_is_exact() {
        let w = floor_weights(&[0.999_999_999, 1e-9, 0.0], 1e-6);
        assert_eq!(w[1], 1e-6);
        assert_eq!(w[2], 1e-6);
        assert_relative_eq!(w.iter().sum::<f64>(), 1.0, epsilon = 1e-15);
        assert_eq!(floor_weights(&[0.3, 0.7], 1e-6), vec![0.3, 0.7]);
        assert_eq!(floor_weights(&[0.0, 0.0], 1e-6), vec![0.5, 0.5]);
    }

    #[test]
    fn empty_component_is_rescued() {
        // second component sits far away with negligible weight
        let m = GmHmm::new(
            array![[1.0]],
            array![1.0],
            vec![
                GaussianMixture::from_params(&[1.0 - 1e-12, 1e-12], &[0.0, 500.0], &[1.0, 0.1])
                    .unwrap(),
            ],
        )
        .unwrap();
        let x: Vec<f64> = (0..50).map(|i| (i as f64 * 0.37).sin()).collect();
        let out = baum_welch_step(&m, &series(&x), Floors::default(), &mut rng::seeded(2)).unwrap();
        assert!(out.rescued);
        let c = out.model.emission(0).components()[1];
        assert!(x.contains(&c.mean()));
        assert!(out.model.emission(0).weights()[1] >= 1e-6);
    }

    #[test]
    fn initialize_is_valid_and_seed_dependent() {
        let x: Vec<f64> = (0..60)
            .map(|i| ((i * 7919) % 97) as f64 / 10.0 - 4.0)
            .collect();
        let obs = series(&x);
        let a = initialize(&obs, 3, 2, 1e-6, &mut rng::substream(5, 0)).unwrap();
        let b = initialize(&obs, 3, 2, 1e-6, &mut rng::substream(5, 1)).unwrap();
        assert!(validate(&a.to_parts()).is_ok());
        assert_ne!(a, b);
        // quantile blocks: state means increase with block index
        assert!(a.emission(0).mean() < a.emission(2).mean());
    }

    #[test]
    fn constant_series_initializes_at_floor() {
        let obs = series(&[2.5; 20]);
        let m = initialize(&obs, 2, 2, 1e-6, &mut rng::seeded(1)).unwrap();
        for e in m.emissions() {
            for c in e.components() {
                assert_eq!(c.mean(), 2.5);
                assert_relative_eq!(c.sigma(), 1e-3, epsilon = 1e-15);
            }
        }
        assert!(initialize(&series(&[1.0, 2.0]), 2, 2, 1e-6, &mut rng::seeded(1)).is_err());
    }

    #[test]
    fn calibrate_rejects_short_series_and_bad_config() {
        let cfg = CalibrationConfig::default();
        assert!(matches!(
            calibrate(&series(&[0.0; 11]), &cfg),
            Err(Error::InsufficientData(_))
        ));
        let bad = CalibrationConfig {
            restarts: 0,
            ..CalibrationConfig::default()
        };
        assert!(calibrate(&series(&[0.0; 40]), &bad).is_err());
    }

    #[test]
    fn one_state_calibration_is_closed_form() {
        let x: Vec<f64> = (0..40)
            .map(|i| (i as f64 * 1.3).cos() * 2.0 + 0.5)
            .collect();
        let cfg = CalibrationConfig {
            state_count: 1,
            component_count: 1,
            restarts: 2,
            ..CalibrationConfig::default()
        };
        let (m, report) = calibrate(&series(&x), &cfg).unwrap();
        let mean = x.iter().sum::<f64>() / x.len() as f64;
        let sd = (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / x.len() as f64).sqrt();
        let c = m.emission(0).components()[0];
        assert_relative_eq!(c.mean(), mean, epsilon = 1e-12);
        assert_relative_eq!(c.sigma(), sd, epsilon = 1e-12);
        assert!(report.converged);
        assert_eq!(report.parameter_count, 2);
    }

    #[test]
    fn calibration_is_deterministic_and_canonical() {
        let truth = two_state();
        let obs =
            ObservationSeries::new(truth.simulate(300, &mut rng::seeded(12)).values()).unwrap();
        let cfg = CalibrationConfig {
            state_count: 2,
            component_count: 2,
            restarts: 3,
            seed: 77,
            ..CalibrationConfig::default()
        };
        let (a, ra) = calibrate(&obs, &cfg).unwrap();
        let (b, rb) = calibrate(&obs, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(ra, rb);
        assert!(a.emission(0).mean() >= a.emission(1).mean());
        for r in &ra.restarts {
            for (i, w) in r.log_likelihood_trace.windows(2).enumerate() {
                if !r.rescue_iterations.contains(&(i + 1)) {
                    assert!(w[1] >= w[0] - 1e-9);
                }
            }
        }
        let best = ra.restarts[ra.best_restart].final_log_likelihood.unwrap();
        assert!(ra
            .restarts
            .iter()
            .all(|r| r.final_log_likelihood.unwrap() <= best));
        assert_relative_eq!(a.log_likelihood(&obs).unwrap(), best, epsilon = 1e-9);
    }
}
