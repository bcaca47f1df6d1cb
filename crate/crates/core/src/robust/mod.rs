//! Environment priors, Monte Carlo evaluation across environments, greedy
//! reincorporation of unstable features, and the sweeps built on them.

mod eval;
mod stepwise;
mod sweep;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Edge, EdgeKind};
use crate::scm::{CovarianceMatrix, LinearGaussianScm};

pub use eval::{evaluate, expected_mse, EvalReport, PredictorSummary};
pub use stepwise::{
    stepwise_on_draws, stepwise_reincorporation, StepwiseResult, TraceRow, WeightsMode,
};
pub use sweep::{
    baselines, lambda_sweep, reincorporation_candidates, tradeoff_sweep, Baselines, LambdaRow,
    LambdaSweep, TradeoffConfig, TradeoffResult, TradeoffRow, STABLE, STEPWISE, UNSTABLE,
};

/// Distribution of one unstable coefficient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CoefficientPrior {
    Fixed {
        value: f64,
    },
    Normal {
        mean: f64,
        std: f64,
    },
    /// Magnitude uniform on `[lo, hi)` with a fair random sign.
    UniformSigned {
        lo: f64,
        hi: f64,
    },
}

#[derive(Debug, Clone)]
pub struct EnvironmentPrior {
    source: LinearGaussianScm,
    edges: Vec<(Edge, CoefficientPrior)>,
    sigma: f64,
}

impl EnvironmentPrior {
    /// A prior with one entry per unstable edge of the source graph.
    ///
    /// Bidirected unstable edges must be fixed so that every draw keeps a
    /// valid exogenous covariance.
    pub fn new(
        source: LinearGaussianScm,
        edges: Vec<(Edge, CoefficientPrior)>,
        sigma: f64,
    ) -> Result<Self> {
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::Spec(format!(
                "prior spread must be nonnegative, got {sigma}"
            )));
        }
        let mut want = source.graph().unstable_edges();
        want.sort();
        let mut got: Vec<Edge> = edges.iter().map(|(e, _)| e.clone().canonical()).collect();
        got.sort();
        if want != got {
            return Err(Error::Spec(
                "prior must cover exactly the unstable edges of the graph".into(),
            ));
        }
        for (e, p) in &edges {
            let ok = match *p {
                CoefficientPrior::Fixed { value } => value.is_finite(),
                CoefficientPrior::Normal { mean, std } => {
                    e.kind == EdgeKind::Directed
                        && mean.is_finite()
                        && std >= 0.0
                        && std.is_finite()
                }
                CoefficientPrior::UniformSigned { lo, hi } => {
                    e.kind == EdgeKind::Directed && 0.0 <= lo && lo <= hi && hi.is_finite()
                }
            };
            if !ok {
                return Err(Error::Spec(format!("invalid prior for edge `{e}`: {p:?}")));
            }
        }
        Ok(EnvironmentPrior {
            source,
            edges,
            sigma,
        })
    }

    /// Normal prior with standard deviation `sigma` centred on each source coefficient.
    pub fn normal(source: &LinearGaussianScm, sigma: f64) -> Result<Self> {
        let edges = source
            .graph()
            .unstable_edges()
            .into_iter()
            .map(|e| {
                let v = source.coefficient(&e).expect("edge of the model");
                let p = match e.kind {
                    EdgeKind::Directed => CoefficientPrior::Normal {
                        mean: v,
                        std: sigma,
                    },
                    EdgeKind::Bidirected => CoefficientPrior::Fixed { value: v },
                };
                (e, p)
            })
            .collect();
        Self::new(source.clone(), edges, sigma)
    }

    pub fn source(&self) -> &LinearGaussianScm {
        &self.source
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn edges(&self) -> &[(Edge, CoefficientPrior)] {
        &self.edges
    }

    fn draw_one(&self, seed: u64, index: usize) -> Result<EnvironmentDraw> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(index as u64);
        let mut coefficients = Vec::with_capacity(self.edges.len());
        for (e, p) in &self.edges {
            // the same three variates per edge for every prior kind
            let z: f64 = StandardNormal.sample(&mut rng);
            let u: f64 = rng.random();
            let positive = rng.random_bool(0.5);
            let v = match *p {
                CoefficientPrior::Fixed { value } => value,
                CoefficientPrior::Normal { mean, std } => mean + std * z,
                CoefficientPrior::UniformSigned { lo, hi } => {
                    let m = lo + (hi - lo) * u;
                    if positive {
                        m
                    } else {
                        -m
                    }
                }
            };
            coefficients.push((e.clone(), v));
        }
        let scm = self.source.with_coefficients(&coefficients)?;
        let sigma = scm.covariance()?;
        Ok(EnvironmentDraw {
            coefficients,
            scm,
            sigma,
        })
    }
}

/// One sampled environment with its covariance computed once.
#[derive(Debug, Clone)]
pub struct EnvironmentDraw {
    pub coefficients: Vec<(Edge, f64)>,
    pub scm: LinearGaussianScm,
    pub sigma: CovarianceMatrix,
}

#[cfg(feature = "parallel")]
pub(crate) fn par_map<T: Send, F: Fn(usize) -> T + Sync + Send>(n: usize, f: F) -> Vec<T> {
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn par_map<T, F: Fn(usize) -> T>(n: usize, f: F) -> Vec<T> {
    (0..n).map(f).collect()
}

/// `n` environments; draw `i` uses stream `i` of a generator seeded with `seed`,
/// so the same standard variates are reused across priors that differ only in spread.
pub fn draw_environments(
    prior: &EnvironmentPrior,
    n: usize,
    seed: u64,
) -> Result<Vec<EnvironmentDraw>> {
    if n == 0 {
        return Err(Error::Spec(
            "number of environments must be at least 1".into(),
        ));
    }
    par_map(n, |i| prior.draw_one(seed, i))
        .into_iter()
        .collect()
}
