//! Price ingestion and file formats.
//!
//! * Price CSV: `label,level` rows with an optional header, or a single
//!   column of levels.
//! * Model file (JSON): `version`, `states`, `transition`, `initial`,
//!   `emissions` (each with `weights`, `means`, `sigmas`).
//! * Tree file (JSON): `version`, `branching`, `nodes` with `id`,
//!   `parent_id`, `stage`, `state`, `value`, `conditional_probability`.
//! * Fan CSV: `scenario,value,probability`.
//! * Path CSV: `step,state,value`.
//! * Factor file (JSON): array of `name`, `weight`, `weights`, `means`, `sigmas`.
//!
//! States and scenario/step numbers are 1-based in every file. Floats are
//! written in shortest round-trip form, so persistence is lossless.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::markov::{GmHmm, ModelParts, ObservationSeries, StatePath};
use crate::mixture::{GaussianMixture, MixtureParams};
use crate::risk::FactorSpec;
use crate::scenario::{Fan, ScenarioNode, ScenarioTree};

pub const MODEL_FORMAT_VERSION: u32 = 1;
pub const TREE_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct PricePoint {
    pub label: Option<String>,
    pub level: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PriceSeries {
    pub points: Vec<PricePoint>,
}

impl PriceSeries {
    pub fn levels(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.level).collect()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Parses price CSV text. Row numbers in errors are 1-based file lines.
pub fn parse_price_csv(text: &str) -> Result<PriceSeries> {
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);
    let body = text.trim_end_matches(['\n', '\r', ' ', '\t']);
    if body.trim().is_empty() {
        return Err(Error::Empty("price file has no rows".into()));
    }
    if let Some(line) = body.lines().position(|l| l.trim().is_empty()) {
        return Err(Error::Csv {
            row: line + 1,
            message: "blank line".into(),
        });
    }

    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(body.as_bytes());
    let mut width = None;
    let mut points = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Csv {
            row: e.position().map_or(i + 1, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let row = record.position().map_or(i + 1, |p| p.line() as usize);
        let n = record.len();
        if !(1..=2).contains(&n) {
            return Err(Error::Csv {
                row,
                message: format!("expected 1 or 2 fields, found {n}"),
            });
        }
        match width {
            None => width = Some(n),
            Some(w) if w != n => {
                return Err(Error::Csv {
                    row,
                    message: format!("expected {w} fields, found {n}"),
                })
            }
            _ => {}
        }
        let raw = record[n - 1].trim();
        let level: f64 = match raw.parse() {
            Ok(v) => v,
            Err(_) if i == 0 => continue, // header
            Err(_) => {
                return Err(Error::Csv {
                    row,
                    message: format!("level `{raw}` is not a number"),
                })
            }
        };
        if !(level.is_finite() && level > 0.0) {
            return Err(Error::Csv {
                row,
                message: format!("level {raw} must be positive"),
            });
        }
        points.push(PricePoint {
            label: (n == 2).then(|| record[0].trim().to_string()),
            level,
        });
    }
    if points.is_empty() {
        return Err(Error::Empty("price file has a header but no data".into()));
    }
    Ok(PriceSeries { points })
}

pub fn read_price_csv(path: impl AsRef<Path>) -> Result<PriceSeries> {
    let path = path.as_ref();
    parse_price_csv(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
}

/// Monthly percentage log returns `100 · ln(I_t / I_{t-1})`.
pub fn to_log_returns(prices: &PriceSeries) -> Result<ObservationSeries> {
    if prices.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "need at least 2 price levels, got {}",
            prices.len()
        )));
    }
    let values: Vec<f64> = prices
        .points
        .windows(2)
        .map(|w| 100.0 * (w[1].level / w[0].level).ln())
        .collect();
    let labels: Option<Vec<String>> = prices.points[1..].iter().map(|p| p.label.clone()).collect();
    match labels {
        Some(l) => ObservationSeries::with_labels(values, l),
        None => ObservationSeries::new(values),
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    version: u32,
    states: usize,
    transition: Vec<Vec<f64>>,
    initial: Vec<f64>,
    emissions: Vec<MixtureParams>,
}

fn schema(path: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Schema {
        path: path.into(),
        message: message.into(),
    }
}

fn parse_versioned<T: DeserializeOwned>(text: &str, expected: u32) -> Result<T> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| schema("$", e.to_string()))?;
    match value.get("version") {
        None => return Err(schema("version", "missing field")),
        Some(v) => match v.as_u64() {
            Some(found) if found == u64::from(expected) => {}
            Some(found) => {
                return Err(Error::Version {
                    found: found as u32,
                    expected,
                })
            }
            None => return Err(schema("version", "expected an integer")),
        },
    }
    serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        schema(path, e.into_inner().to_string())
    })
}

pub fn model_to_json(model: &GmHmm) -> String {
    let parts = model.to_parts();
    let file = ModelFile {
        version: MODEL_FORMAT_VERSION,
        states: model.n_states(),
        transition: parts.transition,
        initial: parts.initial,
        emissions: parts.emissions,
    };
    let mut s = serde_json::to_string_pretty(&file).expect("finite model serializes");
    s.push('\n');
    s
}

/// Parses and validates a model file. Probability vectors within tolerance
/// are renormalized.
pub fn model_from_json(text: &str) -> Result<GmHmm> {
    let file: ModelFile = parse_versioned(text, MODEL_FORMAT_VERSION)?;
    let n = file.states;
    if file.transition.len() != n {
        return Err(schema(
            "transition",
            format!("{} rows for {n} states", file.transition.len()),
        ));
    }
    if let Some(i) = file.transition.iter().position(|r| r.len() != n) {
        return Err(schema(
            format!("transition[{i}]"),
            format!("{} entries for {n} states", file.transition[i].len()),
        ));
    }
    if file.initial.len() != n {
        return Err(schema(
            "initial",
            format!("{} entries for {n} states", file.initial.len()),
        ));
    }
    if file.emissions.len() != n {
        return Err(schema(
            "emissions",
            format!("{} entries for {n} states", file.emissions.len()),
        ));
    }
    for (j, e) in file.emissions.iter().enumerate() {
        let m = e.weights.len();
        if e.means.len() != m {
            return Err(schema(
                format!("emissions[{j}].means"),
                "length differs from weights",
            ));
        }
        if e.sigmas.len() != m {
            return Err(schema(
                format!("emissions[{j}].sigmas"),
                "length differs from weights",
            ));
        }
    }
    GmHmm::from_parts(&ModelParts {
        transition: file.transition,
        initial: file.initial,
        emissions: file.emissions,
    })
}

pub fn write_model(model: &GmHmm, path: impl AsRef<Path>) -> Result<()> {
    write_text(path.as_ref(), &model_to_json(model))
}

pub fn read_model(path: impl AsRef<Path>) -> Result<GmHmm> {
    model_from_json(&read_text(path.as_ref())?)
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeRecord {
    id: usize,
    parent_id: Option<usize>,
    stage: usize,
    state: usize,
    value: f64,
    conditional_probability: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TreeFile {
    version: u32,
    branching: Vec<usize>,
    nodes: Vec<NodeRecord>,
}

pub fn tree_to_json(tree: &ScenarioTree) -> String {
    let file = TreeFile {
        version: TREE_FORMAT_VERSION,
        branching: tree.branching().to_vec(),
        nodes: tree
            .nodes()
            .iter()
            .map(|n| NodeRecord {
                id: n.id,
                parent_id: n.parent,
                stage: n.stage,
                state: n.state + 1,
                value: n.value,
                conditional_probability: n.conditional_probability,
            })
            .collect(),
    };
    let mut s = serde_json::to_string_pretty(&file).expect("finite tree serializes");
    s.push('\n');
    s
}

pub fn tree_from_json(text: &str) -> Result<ScenarioTree> {
    let file: TreeFile = parse_versioned(text, TREE_FORMAT_VERSION)?;
    let nodes = file
        .nodes
        .into_iter()
        .enumerate()
        .map(|(i, r)| {
            if r.state == 0 {
                return Err(schema(format!("nodes[{i}].state"), "states are 1-based"));
            }
            Ok(ScenarioNode {
                id: r.id,
                parent: r.parent_id,
                stage: r.stage,
                state: r.state - 1,
                value: r.value,
                conditional_probability: r.conditional_probability,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    ScenarioTree::from_nodes(file.branching, nodes)
}

pub fn write_tree(tree: &ScenarioTree, path: impl AsRef<Path>) -> Result<()> {
    write_text(path.as_ref(), &tree_to_json(tree))
}

pub fn read_tree(path: impl AsRef<Path>) -> Result<ScenarioTree> {
    tree_from_json(&read_text(path.as_ref())?)
}

pub fn fan_to_csv(fan: &Fan) -> String {
    let mut out = String::from("scenario,value,probability\n");
    for (i, s) in fan.scenarios.iter().enumerate() {
        out.push_str(&format!("{},{},{}\n", i + 1, s.value, s.probability));
    }
    out
}

pub fn write_fan(fan: &Fan, path: impl AsRef<Path>) -> Result<()> {
    write_text(path.as_ref(), &fan_to_csv(fan))
}

pub fn path_to_csv(path: &StatePath) -> String {
    let mut out = String::from("step,state,value\n");
    for (t, s) in path.steps.iter().enumerate() {
        out.push_str(&format!("{},{},{}\n", t + 1, s.state + 1, s.value));
    }
    out
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FactorRecord {
    name: String,
    weight: f64,
    weights: Vec<f64>,
    means: Vec<f64>,
    sigmas: Vec<f64>,
}

pub fn factors_from_json(text: &str) -> Result<Vec<FactorSpec>> {
    let records: Vec<FactorRecord> = serde_path_to_error::deserialize(
        &mut serde_json::Deserializer::from_str(text),
    )
    .map_err(|e| {
        let path = e.path().to_string();
        schema(path, e.into_inner().to_string())
    })?;
    if records.is_empty() {
        return Err(schema("$", "no factors"));
    }
    records
        .into_iter()
        .enumerate()
        .map(|(i, r)| {
            let mixture = GaussianMixture::from_params(&r.weights, &r.means, &r.sigmas)
                .map_err(|e| schema(format!("[{i}]"), e.to_string()))?;
            Ok(FactorSpec {
                name: r.name,
                weight: r.weight,
                mixture,
            })
        })
        .collect()
}

pub fn factors_to_json(factors: &[FactorSpec]) -> String {
    let records: Vec<FactorRecord> = factors
        .iter()
        .map(|f| {
            let p = f.mixture.to_params();
            FactorRecord {
                name: f.name.clone(),
                weight: f.weight,
                weights: p.weights,
                means: p.means,
                sigmas: p.sigmas,
            }
        })
        .collect();
    let mut s = serde_json::to_string_pretty(&records).expect("finite factors serialize");
    s.push('\n');
    s
}

pub fn read_factors(path: impl AsRef<Path>) -> Result<Vec<FactorSpec>> {
    factors_from_json(&read_text(path.as_ref())?)
}

pub(crate) fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}
