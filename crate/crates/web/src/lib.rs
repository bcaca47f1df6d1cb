//! Browser bindings. Every export takes plain values and returns a JSON string.

use serde::Serialize;
use shiftstable::graph::{is_stable_conditional, selection_stable, to_selection_diagram, Edge};
use shiftstable::io::{graph_to_json, parse_graph};
use shiftstable::robust::{baselines, lambda_sweep, tradeoff_sweep, TradeoffConfig, WeightsMode};
use shiftstable::scm::CoefficientSource;
use shiftstable::{corpus, derive_seed};
use wasm_bindgen::prelude::*;

const TRAINING_ROWS: usize = 10_000;

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("serializable")
}

fn linspace(lo: f64, hi: f64, steps: usize) -> Result<Vec<f64>, String> {
    if steps == 0 || !lo.is_finite() || !hi.is_finite() {
        return Err("grid needs finite bounds and at least one step".into());
    }
    if steps == 1 {
        return Ok(vec![lo]);
    }
    Ok((0..steps)
        .map(|i| lo + (hi - lo) * i as f64 / (steps - 1) as f64)
        .collect())
}

pub fn preset_json(name: &str) -> Result<String, String> {
    corpus::by_name(name)
        .map(|g| graph_to_json(&g))
        .ok_or_else(|| format!("unknown preset `{name}`"))
}

#[derive(Serialize)]
struct Stability {
    target: String,
    conditioning: Vec<String>,
    stable: bool,
    selection_diagram_stable: bool,
    witnesses: Vec<String>,
    nodes: Vec<String>,
}

/// `conditioning` is comma-separated.
pub fn stability_json(graph: &str, conditioning: &str) -> Result<String, String> {
    let g = parse_graph(graph).map_err(|e| e.to_string())?;
    let z: Vec<&str> = conditioning
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .collect();
    let y = g.target();
    let verdict = is_stable_conditional(&g, &z, y).map_err(|e| e.to_string())?;
    let by_selection =
        selection_stable(&to_selection_diagram(&g), &z, y).map_err(|e| e.to_string())?;
    Ok(to_json(&Stability {
        target: y.to_string(),
        conditioning: z.iter().map(|s| s.to_string()).collect(),
        stable: verdict.is_stable(),
        selection_diagram_stable: by_selection,
        witnesses: verdict.witnesses().iter().map(|p| p.to_string()).collect(),
        nodes: g.observed().into_iter().map(str::to_string).collect(),
    }))
}

#[derive(Serialize)]
struct SweepCurves {
    lambda: Vec<f64>,
    oracle: Vec<f64>,
    stable: Vec<f64>,
    unstable: Vec<f64>,
    crossover: Option<(f64, f64)>,
}

/// Triangle model with training coefficients `lyx`, `lyz`, `lxz`; sweeps the `Y -> X` coefficient.
pub fn sweep_json(
    lyx: f64,
    lyz: f64,
    lxz: f64,
    lo: f64,
    hi: f64,
    steps: usize,
) -> Result<String, String> {
    let grid = linspace(lo, hi, steps)?;
    let m = corpus::triangle_scm(lyx, lyz, lxz);
    let b = baselines(&m, CoefficientSource::Exact).map_err(|e| e.to_string())?;
    let s = lambda_sweep(&m, &Edge::directed("Y", "X"), &grid, &b.stable, &b.unstable)
        .map_err(|e| e.to_string())?;
    Ok(to_json(&SweepCurves {
        lambda: s.rows.iter().map(|r| r.lambda).collect(),
        oracle: s.rows.iter().map(|r| r.oracle_mse).collect(),
        stable: s.rows.iter().map(|r| r.stable_mse).collect(),
        unstable: s.rows.iter().map(|r| r.unstable_mse).collect(),
        crossover: s.crossover,
    }))
}

#[derive(Serialize)]
struct Curve {
    avg_regret: Vec<f64>,
    max_mse: Vec<f64>,
}

#[derive(Serialize)]
struct TradeoffCurves {
    sigma: Vec<f64>,
    predictors: Vec<(String, Curve)>,
    stepwise_features: Vec<Vec<String>>,
}

/// Random triangle drawn from `seed`; predictors fitted on a sample, environments drawn around the truth.
pub fn tradeoff_json(
    seed: u64,
    n_mc: usize,
    lo: f64,
    hi: f64,
    steps: usize,
) -> Result<String, String> {
    let grid = linspace(lo, hi, steps)?;
    if grid.iter().any(|&s| s < 0.0) {
        return Err("spreads must be nonnegative".into());
    }
    let m = corpus::preset_triangle(seed);
    let data = m
        .sample(TRAINING_ROWS, derive_seed(seed, 1))
        .map_err(|e| e.to_string())?;
    let b = baselines(&m, CoefficientSource::Estimated(&data)).map_err(|e| e.to_string())?;
    let cfg = TradeoffConfig {
        sigma_grid: grid.clone(),
        n_mc,
        seed: derive_seed(seed, 2),
        mode: WeightsMode::Source,
    };
    let t = tradeoff_sweep(&m, &b, &cfg).map_err(|e| e.to_string())?;
    let mut predictors: Vec<(String, Curve)> = Vec::new();
    for r in &t.rows {
        let i = match predictors.iter().position(|(n, _)| *n == r.predictor) {
            Some(i) => i,
            None => {
                predictors.push((
                    r.predictor.clone(),
                    Curve {
                        avg_regret: vec![],
                        max_mse: vec![],
                    },
                ));
                predictors.len() - 1
            }
        };
        predictors[i].1.avg_regret.push(r.avg_regret);
        predictors[i].1.max_mse.push(r.max_mse);
    }
    Ok(to_json(&TradeoffCurves {
        sigma: grid,
        predictors,
        stepwise_features: t.stepwise_features.into_iter().map(|(_, f)| f).collect(),
    }))
}

fn js(r: Result<String, String>) -> Result<String, JsValue> {
    r.map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn preset_graph(name: &str) -> Result<String, JsValue> {
    js(preset_json(name))
}

#[wasm_bindgen]
pub fn stability_report(graph: &str, conditioning: &str) -> Result<String, JsValue> {
    js(stability_json(graph, conditioning))
}

#[wasm_bindgen]
pub fn lambda_sweep_curves(
    lyx: f64,
    lyz: f64,
    lxz: f64,
    lo: f64,
    hi: f64,
    steps: usize,
) -> Result<String, JsValue> {
    js(sweep_json(lyx, lyz, lxz, lo, hi, steps))
}

#[wasm_bindgen]
pub fn tradeoff_curves(
    seed: u32,
    n_mc: usize,
    lo: f64,
    hi: f64,
    steps: usize,
) -> Result<String, JsValue> {
    js(tradeoff_json(seed as u64, n_mc, lo, hi, steps))
}
