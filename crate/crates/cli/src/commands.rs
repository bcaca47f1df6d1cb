use std::collections::BTreeSet;

use serde::Serialize;
use shiftstable::derive_seed;
use shiftstable::graph::{
    is_stable_conditional, selection_stable, to_selection_diagram, Edge, EdgeKind,
};
use shiftstable::hierarchy::{hierarchy_report, EnumerationLimits, PredictorSpec};
use shiftstable::robust::{
    baselines, lambda_sweep, tradeoff_sweep, Baselines, TradeoffConfig, WeightsMode,
};
use shiftstable::scm::{CoefficientSource, DataTable, LinearGaussianScm, LinearPredictor};

use crate::input::{load_graph, load_model, parse_assignment, parse_edge, parse_grid};
use crate::output::{csv_bytes, emit, emit_meta, write_atomic};
use crate::{Failure, Fit, HierarchyArgs, SimulateArgs, StabilityArgs, SweepArgs, TradeoffArgs};

/// Substream for training samples drawn from a user seed.
const TRAINING_STREAM: u64 = 1;
/// Substream for environment draws.
const ENVIRONMENT_STREAM: u64 = 2;

const IDENTIFIABILITY_NOTE: &str =
    "note: level-2 and level-3 specs are stable, but estimating them \
from observational data additionally requires the interventional or counterfactual distribution \
to be identified; the linear models used here identify them from the coefficients.";

fn braces(items: &BTreeSet<String>) -> String {
    format!(
        "{{{}}}",
        items.iter().cloned().collect::<Vec<_>>().join(", ")
    )
}

fn joined<T: ToString>(items: &[T], sep: &str) -> String {
    items.iter().map(T::to_string).collect::<Vec<_>>().join(sep)
}

#[derive(Serialize)]
struct StabilityReport {
    target: String,
    conditioning: BTreeSet<String>,
    stable: bool,
    selection_diagram_stable: bool,
    witnesses: Vec<String>,
}

pub fn stability(a: StabilityArgs) -> Result<(), Failure> {
    let (g, _) = load_graph(&a.source)?;
    let z: Vec<&str> = a
        .condition
        .iter()
        .map(String::as_str)
        .filter(|s| !s.is_empty())
        .collect();
    let y = g.target();
    let verdict = is_stable_conditional(&g, &z, y)?;
    let by_selection = selection_stable(&to_selection_diagram(&g), &z, y)?;
    let word = |s: bool| if s { "stable" } else { "unstable" };
    let report = StabilityReport {
        target: y.to_string(),
        conditioning: z.iter().map(|s| s.to_string()).collect(),
        stable: verdict.is_stable(),
        selection_diagram_stable: by_selection,
        witnesses: verdict.witnesses().iter().map(|p| p.to_string()).collect(),
    };
    println!("target: {y}");
    println!("conditioning: {}", braces(&report.conditioning));
    println!("path criterion: {}", word(report.stable));
    println!("selection diagram: {}", word(by_selection));
    for w in &report.witnesses {
        println!("witness: {w}");
    }
    if let Some(p) = &a.out {
        let json = serde_json::to_string_pretty(&report).expect("serializable report");
        write_atomic(p, format!("{json}\n").as_bytes())?;
    }
    if report.stable != by_selection {
        return Err(Failure::Disagreement(
            "path criterion and selection diagram disagree; this is a bug".into(),
        ));
    }
    Ok(())
}

#[derive(Serialize)]
struct HierarchyRow {
    level: u8,
    interventions: String,
    conditioning: String,
    deleted_edges: String,
    optimal: bool,
    retained_paths: usize,
    missing_paths: String,
}

fn hierarchy_row(
    s: &PredictorSpec,
    optimal: bool,
    retained: usize,
    missing: &[String],
) -> HierarchyRow {
    HierarchyRow {
        level: s.level,
        interventions: joined(&s.interventions.iter().collect::<Vec<_>>(), ";"),
        conditioning: joined(&s.conditioning.iter().collect::<Vec<_>>(), ";"),
        deleted_edges: joined(&s.deleted_edges, ";"),
        optimal,
        retained_paths: retained,
        missing_paths: missing.join(" | "),
    }
}

pub fn hierarchy(a: HierarchyArgs) -> Result<(), Failure> {
    let (g, _) = load_graph(&a.source)?;
    let limits = EnumerationLimits {
        level1_features: a.max_level1,
        level2_features: a.max_level2,
    };
    let report = hierarchy_report(&g, &limits)?;
    let mut rows = Vec::new();
    if report.optimal.is_some() {
        for r in &report.retention {
            let missing: Vec<String> = r.missing.iter().map(|p| p.to_string()).collect();
            rows.push(hierarchy_row(&r.spec, false, r.retained, &missing));
        }
    } else {
        for s in report.level1.iter().chain(&report.level2) {
            rows.push(hierarchy_row(s, false, 0, &[]));
        }
    }
    match &report.optimal {
        Some(opt) => {
            rows.push(hierarchy_row(opt, true, report.optimal_retained, &[]));
            eprintln!(
                "optimal: condition on {} deleting {}",
                braces(&opt.conditioning),
                if opt.deleted_edges.is_empty() {
                    "nothing".to_string()
                } else {
                    joined(&opt.deleted_edges, ", ")
                }
            );
        }
        None => eprintln!(
            "no stable predictor exists: {}",
            report
                .no_stable_reason
                .as_deref()
                .unwrap_or("unknown reason")
        ),
    }
    if rows.iter().any(|r| r.level >= 2) {
        eprintln!("{IDENTIFIABILITY_NOTE}");
    }
    emit(a.out.as_deref(), &csv_bytes(&rows)?)
}

#[derive(Serialize)]
struct PredictorMeta {
    features: Vec<String>,
    weights: Vec<f64>,
    auxiliaries: Vec<String>,
}

impl From<&LinearPredictor> for PredictorMeta {
    fn from(p: &LinearPredictor) -> Self {
        PredictorMeta {
            features: p.features.clone(),
            weights: p.weights.clone(),
            auxiliaries: p.avs.iter().map(|a| a.to_string()).collect(),
        }
    }
}

/// Baselines fitted as requested; returns the training seed when data were sampled.
fn fitted_baselines(
    m: &LinearGaussianScm,
    fit: Fit,
    n_train: usize,
    seed: Option<u64>,
) -> Result<(Baselines, Option<u64>), Failure> {
    match fit {
        Fit::Exact => Ok((baselines(m, CoefficientSource::Exact)?, None)),
        Fit::Estimated => {
            let seed = seed.ok_or_else(|| Failure::Usage("--fit estimated needs --seed".into()))?;
            let train_seed = derive_seed(seed, TRAINING_STREAM);
            let data = m.sample(n_train, train_seed)?;
            Ok((
                baselines(m, CoefficientSource::Estimated(&data))?,
                Some(train_seed),
            ))
        }
    }
}

fn fit_name(f: Fit) -> &'static str {
    match f {
        Fit::Exact => "exact",
        Fit::Estimated => "estimated",
    }
}

#[derive(Serialize)]
struct SweepRow {
    lambda: f64,
    oracle_mse: f64,
    stable_mse: f64,
    unstable_fixed_mse: f64,
}

#[derive(Serialize)]
struct SweepMeta {
    command: &'static str,
    source: String,
    edge: String,
    training_value: f64,
    crossover: Option<(f64, f64)>,
    fit: &'static str,
    seed: Option<u64>,
    training_seed: Option<u64>,
    n_train: Option<usize>,
    stable: PredictorMeta,
    unstable: PredictorMeta,
}

fn swept_edge(m: &LinearGaussianScm, edge: Option<&str>) -> Result<Edge, Failure> {
    if let Some(e) = edge {
        return parse_edge(e);
    }
    let directed: Vec<Edge> = m
        .graph()
        .unstable_edges()
        .into_iter()
        .filter(|e| e.kind == EdgeKind::Directed)
        .collect();
    match directed.as_slice() {
        [e] => Ok(e.clone()),
        [] => Err(Failure::Spec(
            "the model has no directed unstable edge to sweep".into(),
        )),
        _ => Err(Failure::Spec(format!(
            "several unstable edges ({}); choose one with --edge",
            joined(&directed, ", ")
        ))),
    }
}

pub fn sweep(a: SweepArgs) -> Result<(), Failure> {
    let grid = parse_grid(&a.lambda_grid)?;
    let (m, source) = load_model(&a.source, a.seed)?;
    let edge = swept_edge(&m, a.edge.as_deref())?;
    let fit = a.fit.fit.unwrap_or(Fit::Exact);
    let (b, training_seed) = fitted_baselines(&m, fit, a.fit.n_train, a.seed)?;
    let s = lambda_sweep(&m, &edge, &grid, &b.stable, &b.unstable)?;
    let rows: Vec<SweepRow> = s
        .rows
        .iter()
        .map(|r| SweepRow {
            lambda: r.lambda,
            oracle_mse: r.oracle_mse,
            stable_mse: r.stable_mse,
            unstable_fixed_mse: r.unstable_mse,
        })
        .collect();
    match s.crossover {
        Some((lo, hi)) => eprintln!("unstable predictor beats stable for {edge} in ({lo}, {hi})"),
        None => eprintln!("unstable predictor never beats stable at the training value"),
    }
    emit(a.out.as_deref(), &csv_bytes(&rows)?)?;
    let meta = SweepMeta {
        command: "sweep",
        source,
        edge: edge.to_string(),
        training_value: s.training_value,
        crossover: s.crossover,
        fit: fit_name(fit),
        seed: a.seed,
        training_seed,
        n_train: training_seed.map(|_| a.fit.n_train),
        stable: (&b.stable).into(),
        unstable: (&b.unstable).into(),
    };
    emit_meta(a.out.as_deref(), &meta)
}

#[derive(Serialize)]
struct TraceCsvRow<'a> {
    sigma: f64,
    step: usize,
    candidate: &'a str,
    expected_mse: f64,
    chosen: bool,
}

#[derive(Serialize)]
struct TradeoffMeta {
    command: &'static str,
    source: String,
    seed: u64,
    training_seed: Option<u64>,
    environment_seed: u64,
    weights_mode: WeightsMode,
    fit: &'static str,
    n_train: Option<usize>,
    n_mc: usize,
    sigma_grid: Vec<f64>,
    stepwise_recomputed_per_sigma: bool,
    candidates: Vec<String>,
    stepwise_features: Vec<(f64, Vec<String>)>,
    stable: PredictorMeta,
    unstable: PredictorMeta,
    source_coefficients: Vec<(String, f64)>,
}

pub fn tradeoff(a: TradeoffArgs) -> Result<(), Failure> {
    let sigma_grid = parse_grid(&a.sigma_grid)?;
    if sigma_grid.iter().any(|&s| s < 0.0) {
        return Err(Failure::Usage("prior spreads must be nonnegative".into()));
    }
    let mode: WeightsMode = a.weights_mode.parse().map_err(|_| {
        Failure::Usage(format!(
            "--weights-mode must be source or prior-optimal, got `{}`",
            a.weights_mode
        ))
    })?;
    let (m, source) = load_model(&a.source, Some(a.seed))?;
    let fit = a.fit.fit.unwrap_or(Fit::Estimated);
    let (b, training_seed) = fitted_baselines(&m, fit, a.fit.n_train, Some(a.seed))?;
    let environment_seed = derive_seed(a.seed, ENVIRONMENT_STREAM);
    let cfg = TradeoffConfig {
        sigma_grid: sigma_grid.clone(),
        n_mc: a.n_mc,
        seed: environment_seed,
        mode,
    };
    let t = tradeoff_sweep(&m, &b, &cfg)?;
    emit(a.out.as_deref(), &csv_bytes(&t.rows)?)?;
    if let Some(p) = &a.trace_out {
        let rows: Vec<TraceCsvRow> = t
            .traces
            .iter()
            .flat_map(|(sigma, trace)| {
                trace.iter().map(move |r| TraceCsvRow {
                    sigma: *sigma,
                    step: r.step,
                    candidate: &r.candidate,
                    expected_mse: r.expected_mse,
                    chosen: r.chosen,
                })
            })
            .collect();
        write_atomic(p, &csv_bytes(&rows)?)?;
    }
    let meta = TradeoffMeta {
        command: "tradeoff",
        source,
        seed: a.seed,
        training_seed,
        environment_seed,
        weights_mode: mode,
        fit: fit_name(fit),
        n_train: training_seed.map(|_| a.fit.n_train),
        n_mc: a.n_mc,
        sigma_grid,
        stepwise_recomputed_per_sigma: true,
        candidates: t.candidates.clone(),
        stepwise_features: t.stepwise_features.clone(),
        stable: (&b.stable).into(),
        unstable: (&b.unstable).into(),
        source_coefficients: m
            .coefficients()
            .into_iter()
            .map(|(e, v)| (e.to_string(), v))
            .collect(),
    };
    emit_meta(a.out.as_deref(), &meta)
}

#[derive(Serialize)]
struct SimulateMeta {
    command: &'static str,
    source: String,
    seed: u64,
    sample_seed: u64,
    n: usize,
    overrides: Vec<(String, f64)>,
}

pub fn simulate(a: SimulateArgs) -> Result<(), Failure> {
    let (m, source) = load_model(&a.source, Some(a.seed))?;
    let overrides = a
        .coefficients
        .iter()
        .filter(|s| !s.is_empty())
        .map(|s| parse_assignment(s))
        .collect::<Result<Vec<_>, _>>()?;
    let m = m.with_coefficients(&overrides)?;
    let sample_seed = derive_seed(a.seed, TRAINING_STREAM);
    let data: DataTable = m.sample(a.n, sample_seed)?;
    let mut buf = Vec::new();
    data.write_csv(&mut buf)?;
    emit(a.out.as_deref(), &buf)?;
    let meta = SimulateMeta {
        command: "simulate",
        source,
        seed: a.seed,
        sample_seed,
        n: a.n,
        overrides: overrides
            .into_iter()
            .map(|(e, v)| (e.to_string(), v))
            .collect(),
    };
    emit_meta(a.out.as_deref(), &meta)
}
