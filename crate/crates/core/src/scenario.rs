//! Scenario fans and multistage scenario trees sampled from a [`GmHmm`].

use std::collections::HashMap;

use rand::Rng;

use crate::error::{Error, Result};
use crate::markov::GmHmm;
use crate::rng;

const PROBABILITY_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scenario {
    pub value: f64,
    pub probability: f64,
}

/// One-stage set of equiprobable scenarios.
#[derive(Debug, Clone, PartialEq)]
pub struct Fan {
    pub scenarios: Vec<Scenario>,
    pub sorted: bool,
}

impl Fan {
    pub fn values(&self) -> Vec<f64> {
        self.scenarios.iter().map(|s| s.value).collect()
    }

    pub fn len(&self) -> usize {
        self.scenarios.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scenarios.is_empty()
    }
}

/// Runs the chain once per scenario: pick the initial state from π, then for
/// each scenario select a component, sample it, and move to the next state.
/// Every scenario has probability `1 / count`.
pub fn generate_fan<R: Rng + ?Sized>(
    model: &GmHmm,
    count: usize,
    rng: &mut R,
    sorted: bool,
) -> Result<Fan> {
    if count == 0 {
        return Err(Error::Domain("scenario count must be positive".into()));
    }
    let probability = 1.0 / count as f64;
    let mut state = model.select_initial_state(rng::uniform(rng));
    let mut scenarios = Vec::with_capacity(count);
    for _ in 0..count {
        let value = model.emission(state).sample(rng);
        scenarios.push(Scenario { value, probability });
        state = model.select_next_state(state, rng::uniform(rng));
    }
    if sorted {
        scenarios.sort_by(|a, b| a.value.total_cmp(&b.value));
    }
    Ok(Fan { scenarios, sorted })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenarioNode {
    pub id: usize,
    pub parent: Option<usize>,
    pub stage: usize,
    /// 0-based hidden state.
    pub state: usize,
    pub value: f64,
    pub conditional_probability: f64,
}

/// Rooted, staged scenario tree. Node ids are breadth-first from 0 and equal
/// the node's index.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioTree {
    nodes: Vec<ScenarioNode>,
    branching: Vec<usize>,
}

impl ScenarioTree {
    /// Rebuilds a tree from node records, checking the structural invariants.
    pub fn from_nodes(branching: Vec<usize>, nodes: Vec<ScenarioNode>) -> Result<Self> {
        let bad = |m: String| Err(Error::Domain(m));
        if branching.is_empty() || branching.contains(&0) {
            return bad(format!("invalid branching {branching:?}"));
        }
        let expected: usize = stage_counts(&branching).iter().sum();
        if nodes.len() != expected {
            return bad(format!(
                "{} nodes, branching {branching:?} needs {expected}",
                nodes.len()
            ));
        }
        let mut child_mass = vec![0.0; nodes.len()];
        let mut per_stage = vec![0usize; branching.len() + 1];
        for (idx, node) in nodes.iter().enumerate() {
            if node.id != idx {
                return bad(format!("node at position {idx} has id {}", node.id));
            }
            if node.stage > branching.len() {
                return bad(format!(
                    "node {idx} at stage {} beyond tree depth",
                    node.stage
                ));
            }
            per_stage[node.stage] += 1;
            if !(node.conditional_probability > 0.0 && node.conditional_probability <= 1.0) {
                return bad(format!(
                    "node {idx} conditional probability {} outside (0, 1]",
                    node.conditional_probability
                ));
            }
            match node.parent {
                None if idx == 0 && node.stage == 0 => {
                    if node.conditional_probability != 1.0 {
                        return bad("root conditional probability must be 1".into());
                    }
                }
                None => return bad(format!("node {idx} has no parent")),
                Some(p) => {
                    if p >= idx || nodes[p].stage + 1 != node.stage {
                        return bad(format!("node {idx} has invalid parent {p}"));
                    }
                    child_mass[p] += node.conditional_probability;
                }
            }
        }
        if per_stage != stage_counts(&branching) {
            return bad(format!(
                "stage sizes {per_stage:?} do not match branching {branching:?}"
            ));
        }
        for (idx, node) in nodes.iter().enumerate() {
            if node.stage < branching.len() && (child_mass[idx] - 1.0).abs() > PROBABILITY_SLACK {
                return bad(format!(
                    "children of node {idx} carry probability {}",
                    child_mass[idx]
                ));
            }
        }
        Ok(Self { nodes, branching })
    }

    pub fn nodes(&self) -> &[ScenarioNode] {
        &self.nodes
    }

    pub fn branching(&self) -> &[usize] {
        &self.branching
    }

    pub fn stages(&self) -> usize {
        self.branching.len()
    }

    pub fn root(&self) -> &ScenarioNode {
        &self.nodes[0]
    }

    pub fn node(&self, id: usize) -> Result<&ScenarioNode> {
        self.nodes.get(id).ok_or(Error::UnknownNode(id))
    }

    pub fn stage_nodes(&self, stage: usize) -> impl Iterator<Item = &ScenarioNode> {
        self.nodes.iter().filter(move |n| n.stage == stage)
    }

    pub fn children(&self, id: usize) -> impl Iterator<Item = &ScenarioNode> {
        self.nodes.iter().filter(move |n| n.parent == Some(id))
    }

    /// Product of conditional probabilities from the root down to `id`.
    pub fn path_probability(&self, id: usize) -> Result<f64> {
        let mut node = self.node(id)?;
        let mut p = node.conditional_probability;
        while let Some(parent) = node.parent {
            node = &self.nodes[parent];
            p *= node.conditional_probability;
        }
        Ok(p)
    }

    /// Node ids from the root to `id`, inclusive.
    pub fn path(&self, id: usize) -> Result<Vec<usize>> {
        let mut out = vec![self.node(id)?.id];
        let mut node = &self.nodes[id];
        while let Some(parent) = node.parent {
            out.push(parent);
            node = &self.nodes[parent];
        }
        out.reverse();
        Ok(out)
    }

    /// `Σ p(node) · cost(node)` over every non-root node, with `p` the path
    /// probability: the probability-weighted objective of a scenario program
    /// whose per-node costs are already known.
    pub fn expectation(&self, costs: &HashMap<usize, f64>) -> Result<f64> {
        let mut total = 0.0;
        for node in &self.nodes[1..] {
            let cost = costs.get(&node.id).ok_or(Error::MissingCost(node.id))?;
            total += self.path_probability(node.id)? * cost;
        }
        Ok(total)
    }
}

fn stage_counts(branching: &[usize]) -> Vec<usize> {
    let mut out = vec![1];
    for b in branching {
        out.push(out.last().unwrap() * b);
    }
    out
}

/// Samples a tree with `branching[s]` children under every stage-`s` node.
///
/// The root ("today") draws its state from π and carries `root_value`. Every
/// child draws its own state from its parent's transition row and then a
/// value from that state's mixture; children of one parent are equiprobable.
/// Per node the draws are: state uniform, component uniform, normal variate.
pub fn generate_tree_with_root<R: Rng + ?Sized>(
    model: &GmHmm,
    branching: &[usize],
    root_value: f64,
    rng: &mut R,
) -> Result<ScenarioTree> {
    if branching.is_empty() || branching.contains(&0) {
        return Err(Error::Domain(format!(
            "branching {branching:?} must be nonempty and positive"
        )));
    }
    let total: usize = stage_counts(branching).iter().sum();
    let mut nodes = Vec::with_capacity(total);
    nodes.push(ScenarioNode {
        id: 0,
        parent: None,
        stage: 0,
        state: model.select_initial_state(rng::uniform(rng)),
        value: root_value,
        conditional_probability: 1.0,
    });
    let mut frontier = 0..1;
    for (s, &b) in branching.iter().enumerate() {
        let start = nodes.len();
        let probability = 1.0 / b as f64;
        for parent in frontier.clone() {
            let parent_state = nodes[parent].state;
            for _ in 0..b {
                let state = model.select_next_state(parent_state, rng::uniform(rng));
                let value = model.emission(state).sample(rng);
                nodes.push(ScenarioNode {
                    id: nodes.len(),
                    parent: Some(parent),
                    stage: s + 1,
                    state,
                    value,
                    conditional_probability: probability,
                });
            }
        }
        frontier = start..nodes.len();
    }
    Ok(ScenarioTree {
        nodes,
        branching: branching.to_vec(),
    })
}

/// [`generate_tree_with_root`] with a root value of 0.
pub fn generate_tree<R: Rng + ?Sized>(
    model: &GmHmm,
    branching: &[usize],
    rng: &mut R,
) -> Result<ScenarioTree> {
    generate_tree_with_root(model, branching, 0.0, rng)
}

pub fn path_probability(tree: &ScenarioTree, id: usize) -> Result<f64> {
    tree.path_probability(id)
}

pub fn tree_expectation(tree: &ScenarioTree, costs: &HashMap<usize, f64>) -> Result<f64> {
    tree.expectation(costs)
}
