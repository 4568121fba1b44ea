//! Univariate Gaussian mixtures.
//!
//! A [`GaussianMixture`] is the emission distribution of one hidden state and
//! also the carrier for stress and factor-composition analytics. All values
//! are monthly percentage log returns.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Weight vectors whose sum lies within this distance of 1 are renormalized;
/// anything further off is rejected. Hand-entered parameters are usually rounded.
pub const WEIGHT_SUM_TOLERANCE: f64 = 0.01;

/// Whether `sum` lies in the closed band `[1 - tol, 1 + tol]`. The slack
/// keeps rounded entries such as `0.99` inside the band after summation.
pub(crate) fn sum_within_tolerance(sum: f64) -> bool {
    (sum - 1.0).abs() <= WEIGHT_SUM_TOLERANCE + 1e-12
}

/// Factor weights must sum to 1 within this tolerance.
pub const FACTOR_SUM_TOLERANCE: f64 = 1e-6;

const QUANTILE_TOLERANCE: f64 = 1e-10;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Standard normal cdf via the complementary error function, accurate in the
/// left tail to well below 1e-12 absolute.
#[inline]
pub fn std_normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z * FRAC_1_SQRT_2)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianComponent {
    mean: f64,
    sigma: f64,
}

impl GaussianComponent {
    pub fn new(mean: f64, sigma: f64) -> Result<Self> {
        if !mean.is_finite() {
            return Err(Error::InvalidMixture(format!("mean {mean} is not finite")));
        }
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::InvalidMixture(format!(
                "sigma {sigma} must be finite and positive"
            )));
        }
        Ok(Self { mean, sigma })
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    #[inline]
    pub fn pdf(&self, x: f64) -> f64 {
        let z = (x - self.mean) / self.sigma;
        (-0.5 * z * z).exp() / (self.sigma * (2.0 * PI).sqrt())
    }

    #[inline]
    pub fn ln_pdf(&self, x: f64) -> f64 {
        let z = (x - self.mean) / self.sigma;
        -0.5 * z * z - self.sigma.ln() - LN_SQRT_2PI
    }

    #[inline]
    pub fn cdf(&self, x: f64) -> f64 {
        std_normal_cdf((x - self.mean) / self.sigma)
    }
}

/// Mean, variance, skewness and excess kurtosis of a distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mean: f64,
    pub variance: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
}

impl Moments {
    pub fn std_dev(&self) -> f64 {
        self.variance.sqrt()
    }
}

/// Serialized form of a mixture: three parallel lists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureParams {
    pub weights: Vec<f64>,
    pub means: Vec<f64>,
    pub sigmas: Vec<f64>,
}

/// Weighted list of univariate Gaussian components. Component order is
/// significant: index `k` names a component in reports and responsibilities.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixture {
    weights: Vec<f64>,
    components: Vec<GaussianComponent>,
}

impl GaussianMixture {
    pub fn new(weights: Vec<f64>, components: Vec<GaussianComponent>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidMixture(
                "at least one component required".into(),
            ));
        }
        if weights.len() != components.len() {
            return Err(Error::InvalidMixture(format!(
                "{} weights for {} components",
                weights.len(),
                components.len()
            )));
        }
        let weights = normalize_weights(weights)?;
        Ok(Self {
            weights,
            components,
        })
    }

    pub fn from_params(weights: &[f64], means: &[f64], sigmas: &[f64]) -> Result<Self> {
        if means.len() != sigmas.len() {
            return Err(Error::InvalidMixture(format!(
                "{} means but {} sigmas",
                means.len(),
                sigmas.len()
            )));
        }
        let components = means
            .iter()
            .zip(sigmas)
            .map(|(&m, &s)| GaussianComponent::new(m, s))
            .collect::<Result<Vec<_>>>()?;
        Self::new(weights.to_vec(), components)
    }

    /// One-component mixture `N(mean, sigma)`.
    pub fn single(mean: f64, sigma: f64) -> Result<Self> {
        Self::new(vec![1.0], vec![GaussianComponent::new(mean, sigma)?])
    }

    pub fn to_params(&self) -> MixtureParams {
        MixtureParams {
            weights: self.weights.clone(),
            means: self.components.iter().map(|c| c.mean).collect(),
            sigmas: self.components.iter().map(|c| c.sigma).collect(),
        }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn components(&self) -> &[GaussianComponent] {
        &self.components
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    fn iter(&self) -> impl Iterator<Item = (f64, &GaussianComponent)> {
        self.weights.iter().copied().zip(&self.components)
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.iter().map(|(w, c)| w * c.pdf(x)).sum()
    }

    /// Log density, evaluated with a streaming log-sum-exp so it stays finite
    /// far from every component.
    pub fn ln_pdf(&self, x: f64) -> f64 {
        let mut max = f64::NEG_INFINITY;
        let mut sum = 0.0;
        for (w, c) in self.iter() {
            if w <= 0.0 {
                continue;
            }
            let term = w.ln() + c.ln_pdf(x);
            if term > max {
                sum = sum * (max - term).exp() + 1.0;
                max = term;
            } else {
                sum += (term - max).exp();
            }
        }
        if max == f64::NEG_INFINITY {
            return max;
        }
        max + sum.ln()
    }

    /// Per-component `(ln w - ln σ - ln √(2π), μ, 1/σ)` for repeated
    /// evaluation of [`ln_pdf`](Self::ln_pdf) over a series.
    pub(crate) fn log_terms(&self) -> Vec<(f64, f64, f64)> {
        self.iter()
            .filter(|(w, _)| *w > 0.0)
            .map(|(w, c)| (w.ln() + c.ln_pdf(c.mean), c.mean, 1.0 / c.sigma))
            .collect()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let p: f64 = self.iter().map(|(w, c)| w * c.cdf(x)).sum();
        p.clamp(0.0, 1.0)
    }

    /// Inverse cdf by bracketing and bisection.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::Domain(format!("quantile level {p} outside (0, 1)")));
        }
        let mut lo = self
            .components
            .iter()
            .map(|c| c.mean - 40.0 * c.sigma)
            .fold(f64::INFINITY, f64::min);
        let mut hi = self
            .components
            .iter()
            .map(|c| c.mean + 40.0 * c.sigma)
            .fold(f64::NEG_INFINITY, f64::max);
        for _ in 0..400 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let c = self.cdf(mid);
            if (c - p).abs() <= QUANTILE_TOLERANCE * 1e-3 {
                return Ok(mid);
            }
            if c < p {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let (clo, chi) = (self.cdf(lo), self.cdf(hi));
        Ok(if (clo - p).abs() <= (chi - p).abs() {
            lo
        } else {
            hi
        })
    }

    pub fn mean(&self) -> f64 {
        self.iter().map(|(w, c)| w * c.mean).sum()
    }

    /// Exact mixture moments from per-component Gaussian central moments
    /// about the mixture mean.
    pub fn central_moments(&self) -> Moments {
        let mean = self.mean();
        let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
        for (w, c) in self.iter() {
            let d = c.mean - mean;
            let s2 = c.sigma * c.sigma;
            m2 += w * (d * d + s2);
            m3 += w * (d * d * d + 3.0 * d * s2);
            m4 += w * (d.powi(4) + 6.0 * d * d * s2 + 3.0 * s2 * s2);
        }
        Moments {
            mean,
            variance: m2,
            skewness: m3 / m2.powf(1.5),
            excess_kurtosis: m4 / (m2 * m2) - 3.0,
        }
    }

    /// `Σ w_k σ_k`. Not a standard deviation of anything; it is a common
    /// summary reported next to fitted component sigmas. Use
    /// [`central_moments`](Self::central_moments) for the real spread.
    pub fn weighted_sigma(&self) -> f64 {
        self.iter().map(|(w, c)| w * c.sigma).sum()
    }

    /// Index of the component selected by uniform draw `u`.
    pub fn select_component(&self, u: f64) -> usize {
        rng::select_index(&self.weights, u)
    }

    /// Draws one value: one uniform for the component, then one standard
    /// normal variate.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let k = self.select_component(rng::uniform(rng));
        let c = &self.components[k];
        c.mean + c.sigma * rng::standard_normal(rng)
    }

    /// `(1 - epsilon) * self + epsilon * shock`, flattened: base components
    /// first, then shock components.
    pub fn contaminate(&self, shock: &GaussianMixture, epsilon: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(Error::Domain(format!("epsilon {epsilon} outside [0, 1]")));
        }
        let weights = self
            .weights
            .iter()
            .map(|w| (1.0 - epsilon) * w)
            .chain(shock.weights.iter().map(|w| epsilon * w))
            .collect();
        let components = self
            .components
            .iter()
            .chain(&shock.components)
            .copied()
            .collect();
        Self::new(weights, components)
    }
}

/// Flattens a weighted set of mixtures into one mixture. Inner component `k`
/// of factor `i` receives weight `W_i * w_ik`; nothing is collapsed.
pub fn flatten_factors(factors: &[(f64, &GaussianMixture)]) -> Result<GaussianMixture> {
    if factors.is_empty() {
        return Err(Error::InvalidMixture("no factors given".into()));
    }
    check_factor_weights(factors.iter().map(|(w, _)| *w))?;
    let mut weights = Vec::new();
    let mut components = Vec::new();
    for (outer, mix) in factors {
        for (w, c) in mix.iter() {
            weights.push(outer * w);
            components.push(*c);
        }
    }
    GaussianMixture::new(weights, components)
}

/// [`GaussianMixture::ln_pdf`] from precomputed [`GaussianMixture::log_terms`].
pub(crate) fn ln_pdf_from_terms(terms: &[(f64, f64, f64)], x: f64) -> f64 {
    let mut max = f64::NEG_INFINITY;
    let mut sum = 0.0;
    for &(offset, mean, inv_sigma) in terms {
        let z = (x - mean) * inv_sigma;
        let term = offset - 0.5 * z * z;
        if term > max {
            sum = sum * (max - term).exp() + 1.0;
            max = term;
        } else {
            sum += (term - max).exp();
        }
    }
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + sum.ln()
}

pub(crate) fn check_factor_weights(weights: impl Iterator<Item = f64>) -> Result<()> {
    let mut sum = 0.0;
    for (i, w) in weights.enumerate() {
        if !(w.is_finite() && w >= 0.0) {
            return Err(Error::InvalidMixture(format!(
                "factor {} weight {w} must be finite and nonnegative",
                i + 1
            )));
        }
        sum += w;
    }
    if (sum - 1.0).abs() > FACTOR_SUM_TOLERANCE {
        return Err(Error::InvalidMixture(format!(
            "factor weights sum to {sum}, expected 1"
        )));
    }
    Ok(())
}

fn normalize_weights(mut weights: Vec<f64>) -> Result<Vec<f64>> {
    for (k, &w) in weights.iter().enumerate() {
        if !(w.is_finite() && w >= 0.0) {
            return Err(Error::InvalidMixture(format!(
                "weight {w} of component {} must be finite and nonnegative",
                k + 1
            )));
        }
    }
    let sum: f64 = weights.iter().sum();
    if !sum_within_tolerance(sum) {
        return Err(Error::InvalidMixture(format!(
            "weights sum to {sum}, outside 1 ± {WEIGHT_SUM_TOLERANCE}"
        )));
    }
    // already-normalized vectors are kept bit-for-bit
    if (sum - 1.0).abs() > 1e-12 {
        weights.iter_mut().for_each(|w| *w /= sum);
    }
    Ok(weights)
}
