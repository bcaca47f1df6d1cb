use serde::{Deserialize, Serialize};

use super::{
    draw_environments, evaluate, par_map, stepwise_on_draws, EnvironmentPrior, TraceRow,
    WeightsMode,
};
use crate::error::{Error, Result};
use crate::graph::{Edge, EdgeKind};
use crate::hierarchy::{optimal_stable, PredictorSpec};
use crate::scm::{
    fit_predictor, mse, predictor_for_spec, resolve_model, CoefficientSource, CovarianceMatrix,
    LinearGaussianScm, LinearPredictor,
};

/// The two reference predictors and the covariance their weights were fitted in.
#[derive(Debug, Clone)]
pub struct Baselines {
    pub stable_spec: PredictorSpec,
    pub stable: LinearPredictor,
    /// Least squares on every observed non-target node.
    pub unstable: LinearPredictor,
    pub fit_sigma: CovarianceMatrix,
}

pub fn baselines(m: &LinearGaussianScm, coeffs: CoefficientSource<'_>) -> Result<Baselines> {
    let stable_spec = optimal_stable(m.graph())?;
    let stable = predictor_for_spec(m, &stable_spec, coeffs)?;
    let fitted = resolve_model(m, coeffs)?;
    let fit_sigma = fitted.covariance()?;
    let g = m.graph();
    let unstable = fit_predictor(&fit_sigma, g.target(), &g.candidate_features())?;
    Ok(Baselines {
        stable_spec,
        stable,
        unstable,
        fit_sigma,
    })
}

/// Observed non-target nodes not already used as plain features of `stable`.
pub fn reincorporation_candidates(m: &LinearGaussianScm, stable: &LinearPredictor) -> Vec<String> {
    m.graph()
        .candidate_features()
        .into_iter()
        .filter(|c| !stable.features.contains(c))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaRow {
    pub lambda: f64,
    pub oracle_mse: f64,
    pub stable_mse: f64,
    pub unstable_mse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaSweep {
    pub edge: Edge,
    pub training_value: f64,
    pub rows: Vec<LambdaRow>,
    /// Maximal interval around the training value, clipped to the grid range,
    /// on which the unstable predictor beats the stable one.
    pub crossover: Option<(f64, f64)>,
}

struct Curves<'a> {
    m: &'a LinearGaussianScm,
    edge: &'a Edge,
    stable: &'a LinearPredictor,
    unstable: &'a LinearPredictor,
}

impl Curves<'_> {
    fn row(&self, lambda: f64) -> Result<LambdaRow> {
        let env = self.m.with_coefficient(self.edge, lambda)?;
        let sigma = env.covariance()?;
        let g = env.graph();
        let oracle = fit_predictor(&sigma, g.target(), &g.candidate_features())?;
        Ok(LambdaRow {
            lambda,
            oracle_mse: mse(&oracle, &sigma)?,
            stable_mse: mse(self.stable, &sigma)?,
            unstable_mse: mse(self.unstable, &sigma)?,
        })
    }

    fn gap(&self, lambda: f64) -> Result<f64> {
        let r = self.row(lambda)?;
        Ok(r.unstable_mse - r.stable_mse)
    }

    /// Boundary between `inside` (gap < 0) and `outside` (gap >= 0).
    fn bisect(&self, mut inside: f64, mut outside: f64) -> Result<f64> {
        for _ in 0..100 {
            let mid = 0.5 * (inside + outside);
            if mid == inside || mid == outside {
                break;
            }
            if self.gap(mid)? < 0.0 {
                inside = mid;
            } else {
                outside = mid;
            }
        }
        Ok(0.5 * (inside + outside))
    }
}

/// MSE of the oracle, the stable and the unstable predictor as one directed
/// unstable edge coefficient varies over `grid`; weights stay fixed.
pub fn lambda_sweep(
    m: &LinearGaussianScm,
    edge: &Edge,
    grid: &[f64],
    stable: &LinearPredictor,
    unstable: &LinearPredictor,
) -> Result<LambdaSweep> {
    if edge.kind != EdgeKind::Directed || !m.graph().is_unstable(edge) {
        return Err(Error::Query(format!(
            "`{edge}` is not a directed unstable edge"
        )));
    }
    if grid.is_empty() || grid.iter().any(|v| !v.is_finite()) {
        return Err(Error::Spec(
            "lambda grid must be a nonempty list of finite values".into(),
        ));
    }
    let training_value = m.coefficient(edge).expect("edge of the model");
    let curves = Curves {
        m,
        edge,
        stable,
        unstable,
    };
    let rows = par_map(grid.len(), |i| curves.row(grid[i]))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;

    let lo = grid.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = grid.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let crossover = if curves.gap(training_value)? < 0.0 && (lo..=hi).contains(&training_value) {
        let mut sorted: Vec<f64> = grid.to_vec();
        sorted.sort_by(f64::total_cmp);
        let mut left = lo;
        let mut inside = training_value;
        for &v in sorted.iter().rev().filter(|&&v| v < training_value) {
            if curves.gap(v)? >= 0.0 {
                left = curves.bisect(inside, v)?;
                break;
            }
            inside = v;
        }
        let mut right = hi;
        inside = training_value;
        for &v in sorted.iter().filter(|&&v| v > training_value) {
            if curves.gap(v)? >= 0.0 {
                right = curves.bisect(inside, v)?;
                break;
            }
            inside = v;
        }
        Some((left, right))
    } else {
        None
    };
    Ok(LambdaSweep {
        edge: edge.clone(),
        training_value,
        rows,
        crossover,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeoffConfig {
    pub sigma_grid: Vec<f64>,
    pub n_mc: usize,
    pub seed: u64,
    pub mode: WeightsMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeoffRow {
    pub sigma: f64,
    pub predictor: String,
    pub avg_mse: f64,
    pub avg_regret: f64,
    pub max_mse: f64,
    pub n_envs: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeoffResult {
    pub rows: Vec<TradeoffRow>,
    /// Features chosen by stepwise selection at each spread.
    pub stepwise_features: Vec<(f64, Vec<String>)>,
    /// Stepwise trace at each spread.
    pub traces: Vec<(f64, Vec<TraceRow>)>,
    pub candidates: Vec<String>,
}

/// Predictor names used in [`TradeoffRow::predictor`].
pub const STABLE: &str = "stable";
pub const UNSTABLE: &str = "unstable";
pub const STEPWISE: &str = "stepwise";

/// For each spread, draws environments around `source`, reruns stepwise
/// selection on those draws and evaluates the stable, unstable and stepwise
/// predictors on them. The same seed is used at every spread.
pub fn tradeoff_sweep(
    source: &LinearGaussianScm,
    base: &Baselines,
    cfg: &TradeoffConfig,
) -> Result<TradeoffResult> {
    if cfg.sigma_grid.is_empty() {
        return Err(Error::Spec("sigma grid must not be empty".into()));
    }
    let candidates = reincorporation_candidates(source, &base.stable);
    let mut rows = Vec::new();
    let mut stepwise_features = Vec::new();
    let mut traces = Vec::new();
    for &sigma in &cfg.sigma_grid {
        let prior = EnvironmentPrior::normal(source, sigma)?;
        let envs = draw_environments(&prior, cfg.n_mc, cfg.seed)?;
        let sw = stepwise_on_draws(&base.fit_sigma, &base.stable, &candidates, &envs, cfg.mode)?;
        let report = evaluate(
            &[
                (STABLE, &base.stable),
                (UNSTABLE, &base.unstable),
                (STEPWISE, &sw.predictor),
            ],
            &envs,
        )?;
        for p in &report.predictors {
            rows.push(TradeoffRow {
                sigma,
                predictor: p.name.clone(),
                avg_mse: p.avg_mse,
                avg_regret: p.avg_regret,
                max_mse: p.max_mse,
                n_envs: report.n_envs,
                seed: cfg.seed,
            });
        }
        stepwise_features.push((sigma, sw.features));
        traces.push((sigma, sw.trace));
    }
    Ok(TradeoffResult {
        rows,
        stepwise_features,
        traces,
        candidates,
    })
}
