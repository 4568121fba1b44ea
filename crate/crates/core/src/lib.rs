//! Gaussian-mixture hidden Markov models for regime-switching return
//! scenarios: mixture algebra, filtering, Baum-Welch calibration, scenario
//! fans and trees, stress contamination and factor composition.
//!
//! States are 0-based throughout the Rust API; files, the CLI and printed
//! reports number states from 1.

pub mod calibration;
pub mod cli;
pub mod error;
pub mod fixtures;
pub mod io;
pub mod markov;
pub mod mixture;
pub mod risk;
pub mod rng;
pub mod scenario;

pub use calibration::{calibrate, CalibrationConfig, CalibrationReport};
pub use error::{Error, Result};
pub use markov::{GmHmm, ModelParts, ObservationSeries, StatePath};
pub use mixture::{GaussianComponent, GaussianMixture, Moments};
pub use risk::{FactorSpec, StressSpec};
pub use scenario::{Fan, ScenarioTree};
