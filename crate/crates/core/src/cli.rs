//! The `gmhmm` command-line driver.
//!
//! Every subcommand prints its effective seed (drawn from entropy when
//! omitted) and, with `--json`, emits one machine-readable JSON document on
//! standard output instead of the text report.

use std::fmt::Write as _;
use std::io::Write;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use crate::calibration::{self, CalibrationConfig, CalibrationReport};
use crate::error::{Error, Result};
use crate::io;
use crate::markov::{GmHmm, StatePath};
use crate::mixture::GaussianMixture;
use crate::risk::{self, ImpactReport, StressSpec, DEFAULT_THRESHOLDS};
use crate::rng;
use crate::scenario::{self, Fan};

#[derive(Debug, Parser)]
#[command(
    name = "gmhmm",
    version,
    about = "Regime-switching mixture scenario generator"
)]
pub struct Cli {
    /// Emit a machine-readable JSON report on standard output.
    #[arg(long, global = true)]
    pub json: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a model to a price series by Baum-Welch with restarts.
    Calibrate(CalibrateArgs),
    /// Sample a scenario fan (single count) or a scenario tree (comma list).
    Generate(GenerateArgs),
    /// Simulate one path of (state, value) pairs.
    Simulate(SimulateArgs),
    /// Contaminate one state with a shock and compare fans and tails.
    Stress(StressArgs),
    /// Compose weighted factor mixtures into one mixture.
    Compose(ComposeArgs),
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    /// Price CSV (`label,level` or a single column of levels).
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = 3)]
    pub states: usize,
    #[arg(long, default_value_t = 2)]
    pub components: usize,
    #[arg(long, default_value_t = 10)]
    pub restarts: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[arg(long, default_value_t = 500)]
    pub max_iter: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Branching {
    Fan(usize),
    Tree(Vec<usize>),
}

impl FromStr for Branching {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let parts = s
            .split(',')
            .map(|p| {
                p.trim()
                    .parse::<usize>()
                    .map_err(|_| format!("`{p}` is not a non-negative integer"))
            })
            .collect::<std::result::Result<Vec<_>, _>>()?;
        if parts.contains(&0) {
            return Err("branching factors must be positive".into());
        }
        Ok(match parts.as_slice() {
            [n] if !s.contains(',') => Branching::Fan(*n),
            _ => Branching::Tree(parts),
        })
    }
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// `N` for an N-scenario fan CSV; `b1,b2,...` for a tree file.
    #[arg(long)]
    pub branching: Branching,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Sort fan scenarios ascending by value.
    #[arg(long)]
    pub sort: bool,
    #[arg(long)]
    pub output: PathBuf,
    /// Value carried by a tree's root node.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub root_value: f64,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub steps: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub output: PathBuf,
    /// Also write an SVG line plot of value against step.
    #[arg(long)]
    pub plot: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StressArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Target state (1-based).
    #[arg(long)]
    pub state: usize,
    #[arg(long, allow_hyphen_values = true)]
    pub shock_mean: f64,
    #[arg(long)]
    pub shock_sigma: f64,
    #[arg(long)]
    pub epsilon: f64,
    #[arg(long)]
    pub count: usize,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Directory receiving `unstressed.csv` and `stressed.csv`.
    #[arg(long, default_value = ".")]
    pub output_dir: PathBuf,
    #[arg(long)]
    pub sort: bool,
}

#[derive(Debug, Args)]
pub struct ComposeArgs {
    #[arg(long)]
    pub factors: PathBuf,
    /// Target weights for `--sweep-factor`; the others rescale proportionally.
    #[arg(long, value_delimiter = ',', requires = "sweep_factor")]
    pub sweep: Option<Vec<f64>>,
    #[arg(long, requires = "sweep")]
    pub sweep_factor: Option<String>,
    /// Loss threshold for the sweep's tail probability.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub threshold: f64,
}

/// Executes a parsed command line, writing the report to `out`.
pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<()> {
    let report = match &cli.command {
        Command::Calibrate(a) => calibrate(a, cli.json)?,
        Command::Generate(a) => generate(a, cli.json)?,
        Command::Simulate(a) => simulate(a, cli.json)?,
        Command::Stress(a) => stress(a, cli.json)?,
        Command::Compose(a) => compose(a, cli.json)?,
    };
    out.write_all(report.as_bytes())
        .and_then(|_| out.flush())
        .map_err(|e| Error::io("<stdout>", e))
}

fn effective_seed(seed: Option<u64>) -> u64 {
    seed.unwrap_or_else(rand::random)
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

fn calibrate(a: &CalibrateArgs, as_json: bool) -> Result<String> {
    let seed = effective_seed(a.seed);
    let prices = io::read_price_csv(&a.input)?;
    let obs = io::to_log_returns(&prices)?;
    let config = CalibrationConfig {
        state_count: a.states,
        component_count: a.components,
        tolerance: a.tol,
        max_iterations: a.max_iter,
        restarts: a.restarts,
        seed,
        ..CalibrationConfig::default()
    };
    let (model, report) = calibration::calibrate(&obs, &config)?;
    io::write_model(&model, &a.output)?;

    if as_json {
        return Ok(to_json(&json!({
            "command": "calibrate",
            "seed": seed,
            "observations": obs.len(),
            "output": a.output,
            "report": report,
            "states": state_summaries(&model),
        })));
    }
    let mut s = String::new();
    writeln!(s, "seed: {seed}").unwrap();
    writeln!(s, "observations: {}", obs.len()).unwrap();
    write_restarts(&mut s, &report);
    writeln!(s, "best restart: {}", report.best_restart + 1).unwrap();
    writeln!(s, "log-likelihood: {}", report.final_log_likelihood).unwrap();
    writeln!(s, "parameters: {}", report.parameter_count).unwrap();
    writeln!(s, "AIC: {}", report.aic).unwrap();
    write_model_summary(&mut s, &model);
    writeln!(s, "model written to {}", a.output.display()).unwrap();
    Ok(s)
}

fn write_restarts(s: &mut String, report: &CalibrationReport) {
    for r in &report.restarts {
        match (r.final_log_likelihood, &r.failure) {
            (Some(ll), _) => writeln!(
                s,
                "restart {:>2}: log-likelihood {ll} iterations {} {}",
                r.restart + 1,
                r.iterations,
                if r.converged {
                    "converged"
                } else {
                    "not converged"
                }
            ),
            (None, failure) => writeln!(
                s,
                "restart {:>2}: failed ({})",
                r.restart + 1,
                failure.as_deref().unwrap_or("unknown")
            ),
        }
        .unwrap();
    }
}

#[derive(Serialize)]
struct StateSummary {
    state: usize,
    initial: f64,
    mean: f64,
    sigma: f64,
    weighted_sigma: f64,
    weights: Vec<f64>,
    means: Vec<f64>,
    sigmas: Vec<f64>,
}

fn state_summaries(model: &GmHmm) -> Vec<StateSummary> {
    model
        .emissions()
        .iter()
        .enumerate()
        .map(|(j, e)| {
            let p = e.to_params();
            StateSummary {
                state: j + 1,
                initial: model.initial()[j],
                mean: e.mean(),
                sigma: e.central_moments().std_dev(),
                weighted_sigma: e.weighted_sigma(),
                weights: p.weights,
                means: p.means,
                sigmas: p.sigmas,
            }
        })
        .collect()
}

fn write_model_summary(s: &mut String, model: &GmHmm) {
    for st in state_summaries(model) {
        writeln!(
            s,
            "state {}: mean {} sigma {} weighted sigma {} initial {}",
            st.state, st.mean, st.sigma, st.weighted_sigma, st.initial
        )
        .unwrap();
        for k in 0..st.weights.len() {
            writeln!(
                s,
                "  component {}: weight {} mean {} sigma {}",
                k + 1,
                st.weights[k],
                st.means[k],
                st.sigmas[k]
            )
            .unwrap();
        }
    }
    writeln!(s, "transition:").unwrap();
    for row in model.transition().rows() {
        let cells: Vec<String> = row.iter().map(|p| p.to_string()).collect();
        writeln!(s, "  {}", cells.join(" ")).unwrap();
    }
}

fn generate(a: &GenerateArgs, as_json: bool) -> Result<String> {
    let seed = effective_seed(a.seed);
    let model = io::read_model(&a.model)?;
    let mut rng = rng::seeded(seed);
    let (kind, size) = match &a.branching {
        Branching::Fan(n) => {
            let fan = scenario::generate_fan(&model, *n, &mut rng, a.sort)?;
            io::write_fan(&fan, &a.output)?;
            ("fan", fan.len())
        }
        Branching::Tree(b) => {
            let tree = scenario::generate_tree_with_root(&model, b, a.root_value, &mut rng)?;
            io::write_tree(&tree, &a.output)?;
            ("tree", tree.nodes().len())
        }
    };
    if as_json {
        return Ok(to_json(&json!({
            "command": "generate",
            "seed": seed,
            "kind": kind,
            "size": size,
            "output": a.output,
        })));
    }
    let unit = if kind == "fan" { "scenarios" } else { "nodes" };
    Ok(format!(
        "seed: {seed}\n{kind} of {size} {unit} written to {}\n",
        a.output.display()
    ))
}

fn simulate(a: &SimulateArgs, as_json: bool) -> Result<String> {
    let seed = effective_seed(a.seed);
    if a.steps == 0 {
        return Err(Error::Domain("--steps must be positive".into()));
    }
    let model = io::read_model(&a.model)?;
    let path = model.simulate(a.steps, &mut rng::seeded(seed));
    io::write_text(&a.output, &io::path_to_csv(&path))?;
    if let Some(plot) = &a.plot {
        io::write_text(plot, &path_svg(&path))?;
    }
    let values = path.values();
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    if as_json {
        return Ok(to_json(&json!({
            "command": "simulate",
            "seed": seed,
            "steps": a.steps,
            "mean": mean,
            "output": a.output,
            "plot": a.plot,
        })));
    }
    let mut s = format!(
        "seed: {seed}\n{} steps written to {}\n",
        a.steps,
        a.output.display()
    );
    writeln!(s, "sample mean: {mean}").unwrap();
    if let Some(plot) = &a.plot {
        writeln!(s, "plot written to {}", plot.display()).unwrap();
    }
    Ok(s)
}

/// A bare polyline of value against step with a zero line.
fn path_svg(path: &StatePath) -> String {
    const W: f64 = 800.0;
    const H: f64 = 300.0;
    const PAD: f64 = 20.0;
    let values = path.values();
    let lo = values.iter().copied().fold(0.0f64, f64::min);
    let hi = values.iter().copied().fold(0.0f64, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    let n = values.len().max(2) - 1;
    let x = |i: usize| PAD + (W - 2.0 * PAD) * i as f64 / n as f64;
    let y = |v: f64| PAD + (H - 2.0 * PAD) * (hi - v) / span;
    let points: Vec<String> = values
        .iter()
        .enumerate()
        .map(|(i, &v)| format!("{:.2},{:.2}", x(i), y(v)))
        .collect();
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n\
         <line x1=\"{PAD}\" y1=\"{z:.2}\" x2=\"{x2}\" y2=\"{z:.2}\" stroke=\"#999\" stroke-width=\"1\"/>\n\
         <polyline fill=\"none\" stroke=\"#1f4e79\" stroke-width=\"1.5\" points=\"{}\"/>\n\
         </svg>\n",
        points.join(" "),
        z = y(0.0),
        x2 = W - PAD,
    )
}

fn stress(a: &StressArgs, as_json: bool) -> Result<String> {
    let seed = effective_seed(a.seed);
    let model = io::read_model(&a.model)?;
    if a.state == 0 || a.state > model.n_states() {
        return Err(Error::Domain(format!(
            "--state {} outside 1..={}",
            a.state,
            model.n_states()
        )));
    }
    let spec = StressSpec {
        target_state: a.state - 1,
        shock: GaussianMixture::single(a.shock_mean, a.shock_sigma)?,
        epsilon: a.epsilon,
    };
    let stressed = risk::stress_model(&model, &spec)?;
    let before = scenario::generate_fan(&model, a.count, &mut rng::seeded(seed), a.sort)?;
    let after = scenario::generate_fan(&stressed, a.count, &mut rng::seeded(seed), a.sort)?;
    let (unstressed_path, stressed_path) = (
        a.output_dir.join("unstressed.csv"),
        a.output_dir.join("stressed.csv"),
    );
    io::write_fan(&before, &unstressed_path)?;
    io::write_fan(&after, &stressed_path)?;
    let impact = risk::impact_report(
        model.emission(spec.target_state),
        stressed.emission(spec.target_state),
        &DEFAULT_THRESHOLDS,
    );

    if as_json {
        return Ok(to_json(&json!({
            "command": "stress",
            "seed": seed,
            "state": a.state,
            "unstressed": unstressed_path,
            "stressed": stressed_path,
            "fan_mean": { "before": fan_mean(&before), "after": fan_mean(&after) },
            "impact": impact,
        })));
    }
    let mut s = format!("seed: {seed}\n");
    writeln!(
        s,
        "state {}: shock N({}, {}) at epsilon {}",
        a.state, a.shock_mean, a.shock_sigma, a.epsilon
    )
    .unwrap();
    writeln!(
        s,
        "fans of {} written to {} and {}",
        a.count,
        unstressed_path.display(),
        stressed_path.display()
    )
    .unwrap();
    writeln!(
        s,
        "fan mean: before {} after {}",
        fan_mean(&before),
        fan_mean(&after)
    )
    .unwrap();
    write_impact(&mut s, &impact);
    Ok(s)
}

fn fan_mean(fan: &Fan) -> f64 {
    fan.scenarios
        .iter()
        .map(|sc| sc.value * sc.probability)
        .sum()
}

fn write_impact(s: &mut String, r: &ImpactReport) {
    writeln!(
        s,
        "{:<16} {:>24} {:>24} {:>24}",
        "", "before", "after", "delta"
    )
    .unwrap();
    for (name, b, a, d) in [
        ("mean", r.before.mean, r.after.mean, r.delta.mean),
        (
            "variance",
            r.before.variance,
            r.after.variance,
            r.delta.variance,
        ),
        (
            "skewness",
            r.before.skewness,
            r.after.skewness,
            r.delta.skewness,
        ),
        (
            "excess kurtosis",
            r.before.excess_kurtosis,
            r.after.excess_kurtosis,
            r.delta.excess_kurtosis,
        ),
    ] {
        writeln!(s, "{name:<16} {b:>24} {a:>24} {d:>24}").unwrap();
    }
    for t in &r.tails {
        writeln!(
            s,
            "P(x < {}): before {} after {} ratio {}",
            t.threshold, t.before, t.after, t.ratio
        )
        .unwrap();
    }
}

fn compose(a: &ComposeArgs, as_json: bool) -> Result<String> {
    let factors = io::read_factors(&a.factors)?;
    let mix = risk::compose_factors(&factors)?;
    let moments = mix.central_moments();
    let tails: Vec<(f64, f64)> = DEFAULT_THRESHOLDS
        .iter()
        .map(|&x| (x, mix.cdf(x)))
        .collect();

    let sweep = match (&a.sweep, &a.sweep_factor) {
        (Some(targets), Some(name)) => {
            let vectors = targets
                .iter()
                .map(|&w| risk::proportional_weights(&factors, name, w))
                .collect::<Result<Vec<_>>>()?;
            Some((name, risk::reweight_sweep(&factors, &vectors, a.threshold)?))
        }
        _ => None,
    };

    if as_json {
        return Ok(to_json(&json!({
            "command": "compose",
            "seed": null,
            "mixture": mix.to_params(),
            "moments": moments,
            "tails": tails.iter().map(|&(x, p)| json!({"threshold": x, "probability": p})).collect::<Vec<_>>(),
            "sweep": sweep.as_ref().map(|(name, rows)| json!({"factor": name, "rows": rows})),
        })));
    }
    let mut s = String::from("seed: none (deterministic)\n");
    let names: Vec<&str> = factors.iter().map(|f| f.name.as_str()).collect();
    writeln!(s, "factors: {}", names.join(", ")).unwrap();
    writeln!(s, "composed mixture ({} components):", mix.len()).unwrap();
    for (w, c) in mix.weights().iter().zip(mix.components()) {
        writeln!(s, "  weight {w} mean {} sigma {}", c.mean(), c.sigma()).unwrap();
    }
    writeln!(s, "mean: {}", moments.mean).unwrap();
    writeln!(s, "variance: {}", moments.variance).unwrap();
    writeln!(s, "skewness: {}", moments.skewness).unwrap();
    writeln!(s, "excess kurtosis: {}", moments.excess_kurtosis).unwrap();
    for (x, p) in &tails {
        writeln!(s, "P(x < {x}): {p}").unwrap();
    }
    if let Some((name, rows)) = sweep {
        let idx = factors.iter().position(|f| &f.name == name).unwrap();
        writeln!(s, "sweep over {name} (threshold {}):", a.threshold).unwrap();
        for row in rows {
            let ws: Vec<String> = row.weights.iter().map(|w| w.to_string()).collect();
            writeln!(
                s,
                "  {name} {} weights [{}] mean {} variance {} P(x < {}) {}",
                row.weights[idx],
                ws.join(", "),
                row.mean,
                row.variance,
                row.threshold,
                row.tail_probability
            )
            .unwrap();
        }
    }
    Ok(s)
}
