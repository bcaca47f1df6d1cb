use serde::{Deserialize, Serialize};

use super::{par_map, EnvironmentDraw};
use crate::error::Result;
use crate::scm::{fit_predictor, mse, LinearPredictor};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictorSummary {
    pub name: String,
    pub mses: Vec<f64>,
    pub avg_mse: f64,
    pub avg_regret: f64,
    pub max_mse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub predictors: Vec<PredictorSummary>,
    /// MSE of the oracle refitted in each environment.
    pub oracle_mses: Vec<f64>,
    pub n_envs: usize,
    pub seed: Option<u64>,
}

impl EvalReport {
    pub fn get(&self, name: &str) -> Option<&PredictorSummary> {
        self.predictors.iter().find(|p| p.name == name)
    }
}

fn oracle_mse(env: &EnvironmentDraw) -> Result<f64> {
    let g = env.scm.graph();
    let features: Vec<String> = g
        .candidate_features()
        .into_iter()
        .filter(|f| !env.scm.is_aux(f))
        .collect();
    let p = fit_predictor(&env.sigma, g.target(), &features)?;
    mse(&p, &env.sigma)
}

/// Mean of the closed-form MSE over `envs`.
pub fn expected_mse(p: &LinearPredictor, envs: &[EnvironmentDraw]) -> Result<f64> {
    let v = par_map(envs.len(), |i| mse(p, &envs[i].sigma))
        .into_iter()
        .collect::<Result<Vec<f64>>>()?;
    Ok(v.iter().sum::<f64>() / v.len().max(1) as f64)
}

/// Fixed-weight MSE of every predictor in every environment, with regret
/// against the per-environment oracle.
pub fn evaluate(
    predictors: &[(&str, &LinearPredictor)],
    envs: &[EnvironmentDraw],
) -> Result<EvalReport> {
    let n = envs.len();
    let oracle_mses = par_map(n, |i| oracle_mse(&envs[i]))
        .into_iter()
        .collect::<Result<Vec<f64>>>()?;
    let mut out = Vec::with_capacity(predictors.len());
    for (name, p) in predictors {
        let mses = par_map(n, |i| mse(p, &envs[i].sigma))
            .into_iter()
            .collect::<Result<Vec<f64>>>()?;
        let denom = n.max(1) as f64;
        let avg_mse = mses.iter().sum::<f64>() / denom;
        let avg_regret = mses
            .iter()
            .zip(&oracle_mses)
            .map(|(m, o)| m - o)
            .sum::<f64>()
            / denom;
        let max_mse = mses.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        out.push(PredictorSummary {
            name: name.to_string(),
            mses,
            avg_mse,
            avg_regret,
            max_mse,
        });
    }
    Ok(EvalReport {
        predictors: out,
        oracle_mses,
        n_envs: n,
        seed: None,
    })
}
