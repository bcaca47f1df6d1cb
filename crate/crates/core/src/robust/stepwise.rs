use serde::{Deserialize, Serialize};

use super::{draw_environments, expected_mse, EnvironmentDraw, EnvironmentPrior};
use crate::error::{Error, Result};
use crate::scm::{fit_predictor, CovarianceMatrix, LinearPredictor};

/// Strict-improvement threshold for accepting a candidate.
const IMPROVEMENT_TOL: f64 = 1e-12;

/// How weights are chosen for a candidate feature set.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightsMode {
    /// Least squares in the source environment.
    #[default]
    Source,
    /// `β = (E_θ Σ_FF)⁻¹ E_θ Σ_FY` over the environment draws.
    PriorOptimal,
}

impl std::str::FromStr for WeightsMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "source" => Ok(WeightsMode::Source),
            "prior-optimal" => Ok(WeightsMode::PriorOptimal),
            _ => Err(Error::Spec(format!("unknown weights mode `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub step: usize,
    pub candidate: String,
    pub expected_mse: f64,
    pub chosen: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepwiseResult {
    pub features: Vec<String>,
    pub predictor: LinearPredictor,
    pub initial_expected_mse: f64,
    pub final_expected_mse: f64,
    pub trace: Vec<TraceRow>,
    pub mode: WeightsMode,
}

/// Greedy forward selection on a fixed set of draws.
///
/// Starts from `stable` as fitted. Each step scores every remaining candidate
/// by its expected MSE over `envs` and adds the best one if it lowers the
/// current estimate; ties go to the lexicographically smaller id.
pub fn stepwise_on_draws(
    fit_sigma: &CovarianceMatrix,
    stable: &LinearPredictor,
    candidates: &[String],
    envs: &[EnvironmentDraw],
    mode: WeightsMode,
) -> Result<StepwiseResult> {
    let base = match mode {
        WeightsMode::Source => fit_sigma.clone(),
        WeightsMode::PriorOptimal => CovarianceMatrix::mean_of(envs.iter().map(|e| &e.sigma))?,
    }
    .with_avs(&stable.avs)?;
    let fit = |features: &[String]| -> Result<LinearPredictor> {
        let mut p = fit_predictor(&base, &stable.target, features)?;
        p.avs = stable.avs.clone();
        Ok(p)
    };

    let mut remaining: Vec<String> = candidates.to_vec();
    remaining.sort();
    remaining.dedup();
    let mut current = stable.clone();
    let initial = expected_mse(stable, envs)?;
    let mut best_so_far = initial;
    let mut trace = Vec::new();
    let mut step = 0;
    while !remaining.is_empty() {
        step += 1;
        let mut scored = Vec::with_capacity(remaining.len());
        for c in &remaining {
            let mut f = current.features.clone();
            f.push(c.clone());
            let p = fit(&f)?;
            let score = expected_mse(&p, envs)?;
            scored.push((c.clone(), score, p));
        }
        let (bi, _) = scored
            .iter()
            .enumerate()
            .fold(
                (0, f64::INFINITY),
                |acc, (i, s)| if s.1 < acc.1 { (i, s.1) } else { acc },
            );
        let accept = scored[bi].1 < best_so_far - IMPROVEMENT_TOL;
        for (i, (c, score, _)) in scored.iter().enumerate() {
            trace.push(TraceRow {
                step,
                candidate: c.clone(),
                expected_mse: *score,
                chosen: accept && i == bi,
            });
        }
        if !accept {
            break;
        }
        let (c, score, p) = scored.swap_remove(bi);
        remaining.retain(|r| r != &c);
        current = p;
        best_so_far = score;
    }
    Ok(StepwiseResult {
        features: current.features.clone(),
        predictor: current,
        initial_expected_mse: initial,
        final_expected_mse: best_so_far,
        trace,
        mode,
    })
}

/// Draws `n_mc` environments from `prior` and runs [`stepwise_on_draws`],
/// fitting weights in the prior's source model.
pub fn stepwise_reincorporation(
    prior: &EnvironmentPrior,
    stable: &LinearPredictor,
    candidates: &[String],
    n_mc: usize,
    seed: u64,
    mode: WeightsMode,
) -> Result<StepwiseResult> {
    let envs = draw_environments(prior, n_mc, seed)?;
    let sigma = prior.source().covariance()?;
    stepwise_on_draws(&sigma, stable, candidates, &envs, mode)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;
    use crate::robust::{baselines, reincorporation_candidates};
    use crate::scm::{mse, CoefficientSource};

    fn setup(sigma: f64) -> (StepwiseResult, f64) {
        let m = corpus::triangle_scm(5.0, 1.0, 1.0);
        let b = baselines(&m, CoefficientSource::Exact).unwrap();
        let cands = reincorporation_candidates(&m, &b.stable);
        assert_eq!(cands, vec!["X".to_string(), "Z".to_string()]);
        let prior = EnvironmentPrior::normal(&m, sigma).unwrap();
        let r = stepwise_reincorporation(&prior, &b.stable, &cands, 300, 9, WeightsMode::Source)
            .unwrap();
        let oracle = mse(&b.unstable, &m.covariance().unwrap()).unwrap();
        (r, oracle)
    }

    #[test]
    fn point_prior_reaches_oracle_performance() {
        let (r, oracle) = setup(0.0);
        // one more column spans the oracle's feature space
        assert_eq!(r.features.len(), 2);
        assert!((r.final_expected_mse - oracle).abs() < 1e-9);
        assert!(r.final_expected_mse < r.initial_expected_mse);
    }

    #[test]
    fn diffuse_prior_keeps_stable_set() {
        let (r, _) = setup(1e3);
        assert_eq!(r.features, vec!["Z*".to_string()]);
        assert!(r.trace.iter().all(|t| !t.chosen));
    }

    #[test]
    fn trace_is_monotone() {
        for sigma in [0.0, 0.5, 2.0, 5.0] {
            let (r, _) = setup(sigma);
            let chosen: Vec<f64> = r
                .trace
                .iter()
                .filter(|t| t.chosen)
                .map(|t| t.expected_mse)
                .collect();
            let mut last = r.initial_expected_mse;
            for c in chosen {
                assert!(c <= last);
                last = c;
            }
            assert!(r.final_expected_mse <= r.initial_expected_mse);
        }
    }

    #[test]
    fn no_candidates_returns_stable() {
        let m = corpus::triangle_scm(5.0, 1.0, 1.0);
        let b = baselines(&m, CoefficientSource::Exact).unwrap();
        let prior = EnvironmentPrior::normal(&m, 1.0).unwrap();
        let r = stepwise_reincorporation(&prior, &b.stable, &[], 10, 1, WeightsMode::PriorOptimal)
            .unwrap();
        assert_eq!(r.predictor, b.stable);
        assert!(r.trace.is_empty());
    }
}
