//! Reference FTSE-100 monthly model (3 states, 2 components per state) and
//! the three-factor composition used in the examples and acceptance suite.
//!
//! Values carry their rounded precision; row 1 of the transition matrix and
//! the initial vector are renormalized on load.

use crate::markov::{GmHmm, ModelParts};
use crate::mixture::{GaussianMixture, MixtureParams};
use crate::risk::FactorSpec;

pub const TRANSITION: [[f64; 3]; 3] = [[0.71, 0.057, 0.23], [0.13, 0.51, 0.36], [0.45, 0.19, 0.36]];
pub const INITIAL: [f64; 3] = [1.0434e-24, 0.99, 1.6637e-17];
pub const WEIGHTS: [[f64; 2]; 3] = [[0.99207, 0.0079285], [0.73889, 0.26111], [0.7665, 0.2335]];
pub const MEANS: [[f64; 2]; 3] = [[1.662, -30.170], [-2.588, 1.113], [0.776, -0.680]];
pub const SIGMAS: [[f64; 2]; 3] = [[1.201, 0.100], [2.940, 2.728], [2.447, 2.715]];

/// Listed "overall" mean per state.
pub const OVERALL_MEANS: [f64; 3] = [1.41, 0.097, 0.44];
/// Listed "overall" sigma per state (a weighted sum of component sigmas).
pub const OVERALL_SIGMAS: [f64; 3] = [1.192, 2.88, 2.51];

pub fn table_parts() -> ModelParts {
    ModelParts {
        transition: TRANSITION.iter().map(|r| r.to_vec()).collect(),
        initial: INITIAL.to_vec(),
        emissions: (0..3)
            .map(|j| MixtureParams {
                weights: WEIGHTS[j].to_vec(),
                means: MEANS[j].to_vec(),
                sigmas: SIGMAS[j].to_vec(),
            })
            .collect(),
    }
}

pub fn table_model() -> GmHmm {
    GmHmm::from_parts(&table_parts()).expect("reference model is valid")
}

pub fn table_state(state: usize) -> GaussianMixture {
    GaussianMixture::from_params(&WEIGHTS[state], &MEANS[state], &SIGMAS[state])
        .expect("reference mixture is valid")
}

/// Portfolio return collapsed to one Gaussian, operational risk and credit
/// risk, weighted 0.7 / 0.2 / 0.1.
pub fn three_factor_spec() -> Vec<FactorSpec> {
    let f = |name: &str, weight, mean, sigma| FactorSpec {
        name: name.to_string(),
        weight,
        mixture: GaussianMixture::single(mean, sigma).expect("valid"),
    };
    vec![
        f("portfolio", 0.7, 1.41, 1.2),
        f("operational", 0.2, 0.0, 1.0),
        f("credit", 0.1, -0.1, 0.1),
    ]
}
