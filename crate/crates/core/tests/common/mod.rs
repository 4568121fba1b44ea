//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use gmhmm::markov::ModelParts;
use gmhmm::mixture::MixtureParams;
use gmhmm::{GmHmm, ObservationSeries};
use ndarray::{Array2, Array3};
use rand::Rng;

fn normal_pdf(x: f64, mu: f64, sigma: f64) -> f64 {
    let z = (x - mu) / sigma;
    (-0.5 * z * z).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt())
}

fn simplex<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
    let s: f64 = raw.iter().sum();
    raw.iter().map(|x| x / s).collect()
}

pub fn random_model<R: Rng>(rng: &mut R, n: usize, m: usize) -> GmHmm {
    let parts = ModelParts {
        transition: (0..n).map(|_| simplex(rng, n)).collect(),
        initial: simplex(rng, n),
        emissions: (0..n)
            .map(|_| MixtureParams {
                weights: simplex(rng, m),
                means: (0..m).map(|_| rng.random_range(-3.0..3.0)).collect(),
                sigmas: (0..m).map(|_| rng.random_range(0.5..2.5)).collect(),
            })
            .collect(),
    };
    GmHmm::from_parts(&parts).unwrap()
}

pub fn random_series<R: Rng>(rng: &mut R, t: usize) -> ObservationSeries {
    ObservationSeries::new((0..t).map(|_| rng.random_range(-4.0..4.0)).collect()).unwrap()
}

/// Exact quantities from summing over every joint (state, component) path.
pub struct Enumeration {
    pub likelihood: f64,
    /// `P(q_t = i | O)`.
    pub gamma: Array2<f64>,
    /// `P(q_t = i, q_{t+1} = j | O)`.
    pub xi: Array3<f64>,
    /// `[i][[t, k]] = P(q_t = i, component k | O)`.
    pub components: Vec<Array2<f64>>,
}

pub fn enumerate(model: &GmHmm, obs: &ObservationSeries) -> Enumeration {
    let x = obs.values();
    let t_len = x.len();
    let n = model.n_states();
    let parts = model.to_parts();
    let labels: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (0..parts.emissions[i].weights.len()).map(move |k| (i, k)))
        .collect();
    let emit = |t: usize, (i, k): (usize, usize)| {
        let e = &parts.emissions[i];
        e.weights[k] * normal_pdf(x[t], e.means[k], e.sigmas[k])
    };

    let max_m = parts
        .emissions
        .iter()
        .map(|e| e.weights.len())
        .max()
        .unwrap();
    let mut likelihood = 0.0;
    let mut gamma = Array2::zeros((t_len, n));
    let mut xi = Array3::zeros((t_len.saturating_sub(1), n, n));
    let mut components = vec![Array2::zeros((t_len, max_m)); n];

    let total = labels.len().pow(t_len as u32);
    let mut path = vec![0usize; t_len];
    for code in 0..total {
        let mut c = code;
        for slot in path.iter_mut() {
            *slot = c % labels.len();
            c /= labels.len();
        }
        let mut p = parts.initial[labels[path[0]].0] * emit(0, labels[path[0]]);
        for t in 1..t_len {
            let (prev, cur) = (labels[path[t - 1]], labels[path[t]]);
            p *= parts.transition[prev.0][cur.0] * emit(t, cur);
        }
        likelihood += p;
        for t in 0..t_len {
            let (i, k) = labels[path[t]];
            gamma[[t, i]] += p;
            components[i][[t, k]] += p;
            if t + 1 < t_len {
                xi[[t, i, labels[path[t + 1]].0]] += p;
            }
        }
    }
    gamma /= likelihood;
    xi /= likelihood;
    for c in components.iter_mut() {
        *c /= likelihood;
    }
    Enumeration {
        likelihood,
        gamma,
        xi,
        components,
    }
}

/// Stationary distribution by power iteration from uniform.
pub fn stationary(model: &GmHmm) -> Vec<f64> {
    let a = model.transition();
    let n = model.n_states();
    let mut p = vec![1.0 / n as f64; n];
    for _ in 0..10_000 {
        let next: Vec<f64> = (0..n)
            .map(|j| (0..n).map(|i| p[i] * a[[i, j]]).sum())
            .collect();
        let diff: f64 = next.iter().zip(&p).map(|(a, b)| (a - b).abs()).sum();
        p = next;
        if diff < 1e-15 {
            break;
        }
    }
    p
}

/// Mean of the mixture of state emissions under the given state weights.
pub fn weighted_mean(model: &GmHmm, weights: &[f64]) -> f64 {
    weights
        .iter()
        .zip(model.emissions())
        .map(|(w, e)| w * e.mean())
        .sum()
}

/// One-sample Kolmogorov-Smirnov statistic.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Asymptotic 1% critical value of the KS statistic.
pub fn ks_critical_1pct(n: usize) -> f64 {
    1.62762 / (n as f64).sqrt()
}

/// Standard error of the mean of a correlated series by non-overlapping
/// batch means.
pub fn batch_means_se(xs: &[f64], batches: usize) -> f64 {
    let size = xs.len() / batches;
    let means: Vec<f64> = (0..batches)
        .map(|b| xs[b * size..(b + 1) * size].iter().sum::<f64>() / size as f64)
        .collect();
    let grand = means.iter().sum::<f64>() / batches as f64;
    let var = means.iter().map(|m| (m - grand).powi(2)).sum::<f64>() / (batches - 1) as f64;
    (var / batches as f64).sqrt()
}

/// Writes `levels` as a one-column price CSV with a header.
pub fn price_csv(levels: &[f64]) -> String {
    let mut s = String::from("level\n");
    for l in levels {
        s.push_str(&format!("{l}\n"));
    }
    s
}

/// Price levels whose percentage log returns are `returns`, starting at 1000.
pub fn levels_from_returns(returns: &[f64]) -> Vec<f64> {
    let mut level = 1000.0f64;
    let mut out = vec![level];
    for r in returns {
        level *= (r / 100.0).exp();
        out.push(level);
    }
    out
}
