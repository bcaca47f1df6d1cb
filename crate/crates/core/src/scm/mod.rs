//! Linear Gaussian structural causal models over a [`CausalGraph`].
//!
//! Every variable is mean zero and satisfies `V = Σ λ_pv P + U_v`, where the
//! exogenous vector `U` has covariance `ℰ`. Off-diagonal entries of `ℰ` live
//! exactly on bidirected edges.

mod covariance;
mod data;
mod predictor;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::graph::{delete_edges, mutilate_do, CausalGraph, Edge, EdgeKind, Node};

pub use covariance::CovarianceMatrix;
pub use data::{estimate_scm, DataTable};
pub(crate) use predictor::resolve_model;
pub use predictor::{
    extend_with_avs, fit_predictor, mse, oracle_predictor, predictor_for_spec, AvDefinition,
    CoefficientSource, LinearPredictor,
};

/// Default exogenous noise variance.
pub const DEFAULT_NOISE_VAR: f64 = 0.01;

/// Relative tolerance on the smallest eigenvalue in PSD checks.
pub const PSD_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct LinearGaussianScm {
    graph: CausalGraph,
    order: Vec<usize>,
    /// `lambda[(head, tail)]` is the coefficient of the directed edge `tail -> head`.
    lambda: DMatrix<f64>,
    exo_cov: DMatrix<f64>,
    /// Nodes allowed to carry zero exogenous variance (deterministic auxiliaries).
    aux: Vec<bool>,
}

impl LinearGaussianScm {
    /// Builds a model from explicit coefficients.
    ///
    /// Every directed edge needs a coefficient and every bidirected edge an
    /// exogenous covariance entry. Noise variances default to [`DEFAULT_NOISE_VAR`].
    pub fn new(
        graph: CausalGraph,
        coefficients: impl IntoIterator<Item = (Edge, f64)>,
        noise: impl IntoIterator<Item = (String, f64)>,
        exo_cov: impl IntoIterator<Item = (Edge, f64)>,
    ) -> Result<Self> {
        let n = graph.node_count();
        let mut lambda = DMatrix::zeros(n, n);
        let mut exo = DMatrix::zeros(n, n);
        for i in 0..n {
            exo[(i, i)] = DEFAULT_NOISE_VAR;
        }

        let mut seen_dir = vec![false; graph.gedges().len()];
        for (edge, value) in coefficients {
            if edge.kind != EdgeKind::Directed {
                return Err(Error::Model(format!(
                    "coefficient given for bidirected edge `{edge}`; use exo_cov"
                )));
            }
            let k = graph
                .find_edge(&edge)
                .ok_or_else(|| Error::Model(format!("coefficient for missing edge `{edge}`")))?;
            check_finite(value, &edge)?;
            let e = graph.gedges()[k];
            lambda[(e.head, e.tail)] = value;
            seen_dir[k] = true;
        }
        for (id, var) in noise {
            let v = graph
                .node_index(&id)
                .ok_or_else(|| Error::Model(format!("noise for unknown node `{id}`")))?;
            if !(var.is_finite() && var > 0.0) {
                return Err(Error::Model(format!(
                    "noise variance of `{id}` must be positive, got {var}"
                )));
            }
            exo[(v, v)] = var;
        }
        let mut seen_bi = vec![false; graph.gedges().len()];
        for (edge, value) in exo_cov {
            let edge = Edge::bidirected(edge.tail, edge.head);
            let k = graph.find_edge(&edge).ok_or_else(|| {
                Error::Model(format!("exogenous covariance for missing edge `{edge}`"))
            })?;
            check_finite(value, &edge)?;
            let e = graph.gedges()[k];
            exo[(e.tail, e.head)] = value;
            exo[(e.head, e.tail)] = value;
            seen_bi[k] = true;
        }
        for (k, e) in graph.gedges().iter().enumerate() {
            let seen = match e.kind {
                EdgeKind::Directed => seen_dir[k],
                EdgeKind::Bidirected => seen_bi[k],
            };
            if !seen {
                return Err(Error::Model(format!(
                    "no value given for edge `{}`",
                    graph.to_edge(e)
                )));
            }
        }
        Self::from_parts(graph, lambda, exo, None)
    }

    /// Convenience constructor: directed coefficients only, every
    /// noise variance equal to `noise_var`, zero covariance on bidirected edges.
    pub fn with_noise(
        graph: CausalGraph,
        coefficients: impl IntoIterator<Item = (Edge, f64)>,
        noise_var: f64,
    ) -> Result<Self> {
        let noise: Vec<(String, f64)> = graph
            .nodes()
            .iter()
            .map(|n| (n.id.clone(), noise_var))
            .collect();
        let bi: Vec<(Edge, f64)> = graph
            .edges()
            .into_iter()
            .filter(|e| e.kind == EdgeKind::Bidirected)
            .map(|e| (e, 0.0))
            .collect();
        Self::new(graph, coefficients, noise, bi)
    }

    fn from_parts(
        graph: CausalGraph,
        lambda: DMatrix<f64>,
        exo_cov: DMatrix<f64>,
        aux: Option<Vec<bool>>,
    ) -> Result<Self> {
        let order = graph
            .topological_order()
            .ok_or_else(|| Error::Model("graph has a directed cycle".into()))?;
        let aux = aux.unwrap_or_else(|| vec![false; graph.node_count()]);
        for v in 0..graph.node_count() {
            let d = exo_cov[(v, v)];
            if aux[v] {
                if d != 0.0 {
                    return Err(Error::Model(format!(
                        "auxiliary node `{}` must have zero noise",
                        graph.id(v)
                    )));
                }
            } else if d.is_nan() || d <= 0.0 {
                return Err(Error::Model(format!(
                    "noise variance of `{}` must be positive",
                    graph.id(v)
                )));
            }
        }
        check_psd(&exo_cov, "exogenous covariance")?;
        Ok(LinearGaussianScm {
            graph,
            order,
            lambda,
            exo_cov,
            aux,
        })
    }

    pub fn graph(&self) -> &CausalGraph {
        &self.graph
    }

    /// Node ids in topological order.
    pub fn order(&self) -> Vec<&str> {
        self.order.iter().map(|&v| self.graph.id(v)).collect()
    }

    pub(crate) fn order_indices(&self) -> &[usize] {
        &self.order
    }

    pub fn lambda(&self) -> &DMatrix<f64> {
        &self.lambda
    }

    pub fn exo_cov(&self) -> &DMatrix<f64> {
        &self.exo_cov
    }

    pub fn is_aux(&self, id: &str) -> bool {
        self.graph.node_index(id).is_some_and(|v| self.aux[v])
    }

    /// Coefficient of a directed edge, or the exogenous covariance of a bidirected one.
    pub fn coefficient(&self, edge: &Edge) -> Option<f64> {
        let k = self.graph.find_edge(edge)?;
        let e = self.graph.gedges()[k];
        Some(match e.kind {
            EdgeKind::Directed => self.lambda[(e.head, e.tail)],
            EdgeKind::Bidirected => self.exo_cov[(e.tail, e.head)],
        })
    }

    /// Directed edges with their coefficients, in canonical edge order.
    pub fn coefficients(&self) -> Vec<(Edge, f64)> {
        self.graph
            .gedges()
            .iter()
            .filter(|e| e.kind == EdgeKind::Directed)
            .map(|e| (self.graph.to_edge(e), self.lambda[(e.head, e.tail)]))
            .collect()
    }

    pub fn noise_var(&self, id: &str) -> Option<f64> {
        self.graph.node_index(id).map(|v| self.exo_cov[(v, v)])
    }

    /// A copy with the value of one edge replaced. The graph is unchanged.
    pub fn with_coefficient(&self, edge: &Edge, value: f64) -> Result<Self> {
        self.with_coefficients(&[(edge.clone(), value)])
    }

    pub fn with_coefficients(&self, values: &[(Edge, f64)]) -> Result<Self> {
        let mut out = self.clone();
        let mut touched_exo = false;
        for (edge, value) in values {
            let k = self
                .graph
                .find_edge(edge)
                .ok_or_else(|| Error::Model(format!("edge `{edge}` is not in the model")))?;
            check_finite(*value, edge)?;
            let e = self.graph.gedges()[k];
            match e.kind {
                EdgeKind::Directed => out.lambda[(e.head, e.tail)] = *value,
                EdgeKind::Bidirected => {
                    out.exo_cov[(e.tail, e.head)] = *value;
                    out.exo_cov[(e.head, e.tail)] = *value;
                    touched_exo = true;
                }
            }
        }
        if touched_exo {
            check_psd(&out.exo_cov, "exogenous covariance")?;
        }
        Ok(out)
    }

    /// Environment where the given edges carry value zero. The graph is unchanged.
    pub fn zeroed(&self, edges: &[Edge]) -> Result<Self> {
        let values: Vec<(Edge, f64)> = edges.iter().map(|e| (e.clone(), 0.0)).collect();
        self.with_coefficients(&values)
    }

    /// Model on `delete_edges(graph, d)` with the deleted entries removed.
    pub fn surgered(&self, d: &[Edge]) -> Result<Self> {
        let graph = delete_edges(&self.graph, d)?;
        self.restrict_to(graph)
    }

    /// Model on `mutilate_do(graph, w)`.
    pub fn mutilated(&self, w: &[&str]) -> Result<Self> {
        let graph = mutilate_do(&self.graph, w)?;
        self.restrict_to(graph)
    }

    fn restrict_to(&self, graph: CausalGraph) -> Result<Self> {
        let n = graph.node_count();
        let mut lambda = DMatrix::zeros(n, n);
        let mut exo = DMatrix::zeros(n, n);
        for v in 0..n {
            exo[(v, v)] = self.exo_cov[(v, v)];
        }
        for e in graph.gedges() {
            match e.kind {
                EdgeKind::Directed => lambda[(e.head, e.tail)] = self.lambda[(e.head, e.tail)],
                EdgeKind::Bidirected => {
                    exo[(e.tail, e.head)] = self.exo_cov[(e.tail, e.head)];
                    exo[(e.head, e.tail)] = self.exo_cov[(e.head, e.tail)];
                }
            }
        }
        Self::from_parts(graph, lambda, exo, Some(self.aux.clone()))
    }

    /// Appends deterministic auxiliary nodes `id = Σ weight · parent`.
    pub(crate) fn with_aux_nodes(&self, defs: &[(String, Vec<(String, f64)>)]) -> Result<Self> {
        let mut nodes: Vec<Node> = self.graph.nodes().to_vec();
        let mut edges = self.graph.edges_with_flags();
        for (id, parents) in defs {
            nodes.push(Node::observed(id.clone()));
            for (p, _) in parents {
                edges.push((Edge::directed(p.clone(), id.clone()), false));
            }
        }
        let graph = CausalGraph::new(nodes, edges, self.graph.target())?;
        let n = graph.node_count();
        let old = self.graph.node_count();
        let mut lambda = DMatrix::zeros(n, n);
        let mut exo = DMatrix::zeros(n, n);
        lambda.view_mut((0, 0), (old, old)).copy_from(&self.lambda);
        exo.view_mut((0, 0), (old, old)).copy_from(&self.exo_cov);
        let mut aux = self.aux.clone();
        aux.resize(n, true);
        for (id, parents) in defs {
            let v = graph.node_index(id).expect("just added");
            for (p, w) in parents {
                let pi = graph
                    .node_index(p)
                    .expect("validated by graph construction");
                lambda[(v, pi)] = *w;
            }
        }
        Self::from_parts(graph, lambda, exo, Some(aux))
    }

    /// Total-effect matrix `B = (I - Λ)^{-1}`, built by propagation in topological order.
    pub(crate) fn total_effects(&self) -> DMatrix<f64> {
        let n = self.graph.node_count();
        let mut b = DMatrix::<f64>::zeros(n, n);
        for &v in &self.order {
            b[(v, v)] = 1.0;
            for p in self.graph.parent_indices(v) {
                let w = self.lambda[(v, p)];
                if w != 0.0 {
                    let row = b.row(p).clone_owned() * w;
                    let mut target = b.row_mut(v);
                    target += row;
                }
            }
        }
        b
    }

    /// Exact covariance `Σ = B ℰ Bᵀ` over all nodes, latent ones included.
    pub fn covariance(&self) -> Result<CovarianceMatrix> {
        let b = self.total_effects();
        let mut sigma = &b * &self.exo_cov * b.transpose();
        sigma = (&sigma + sigma.transpose()) * 0.5;
        check_psd(&sigma, "covariance")?;
        let ids = self.graph.nodes().iter().map(|n| n.id.clone()).collect();
        CovarianceMatrix::from_parts(ids, sigma)
    }
}

fn check_finite(value: f64, edge: &Edge) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::Model(format!("non-finite value on edge `{edge}`")))
    }
}

pub(crate) fn check_psd(m: &DMatrix<f64>, what: &str) -> Result<()> {
    if m.nrows() == 0 {
        return Ok(());
    }
    let eig = SymmetricEigen::new(m.clone()).eigenvalues;
    let max = eig.iter().fold(0.0_f64, |a, &b| a.max(b.abs()));
    let min = eig.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    if min < -PSD_TOL * max.max(f64::MIN_POSITIVE) {
        return Err(Error::Model(format!(
            "{what} is not positive semidefinite (smallest eigenvalue {min:e})"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;
    use crate::graph::Node;

    fn two_node(lambda: f64) -> LinearGaussianScm {
        let g = CausalGraph::new(
            vec![Node::observed("X"), Node::observed("Y")],
            vec![(Edge::directed("X", "Y"), false)],
            "Y",
        )
        .unwrap();
        LinearGaussianScm::with_noise(g, vec![(Edge::directed("X", "Y"), lambda)], 1.0).unwrap()
    }

    #[test]
    fn two_node_covariance_by_hand() {
        let s = two_node(2.0).covariance().unwrap();
        assert!((s.get("X", "X").unwrap() - 1.0).abs() < 1e-15);
        assert!((s.get("X", "Y").unwrap() - 2.0).abs() < 1e-15);
        assert!((s.get("Y", "Y").unwrap() - 5.0).abs() < 1e-15);
    }

    #[test]
    fn no_edges_means_sigma_equals_exo() {
        let m = two_node(0.0);
        let s = m.covariance().unwrap();
        assert_eq!(s.matrix(), m.exo_cov());
    }

    #[test]
    fn triangle_variance_and_cross_covariance() {
        let s = corpus::triangle_scm(5.0, 1.0, 1.0).covariance().unwrap();
        assert!((s.var("Y").unwrap() - 0.01).abs() < 1e-15);
        assert!((s.get("Y", "X").unwrap() - 0.05).abs() < 1e-15);
    }

    #[test]
    fn missing_coefficient_is_rejected() {
        let g = corpus::triangle();
        let r = LinearGaussianScm::with_noise(g, vec![(Edge::directed("Y", "X"), 1.0)], 0.01);
        assert!(matches!(r, Err(Error::Model(_))));
    }

    #[test]
    fn non_psd_exogenous_covariance_is_rejected() {
        let g = CausalGraph::new(
            vec![Node::observed("Y"), Node::observed("Z")],
            vec![(Edge::bidirected("Y", "Z"), false)],
            "Y",
        )
        .unwrap();
        let r = LinearGaussianScm::new(
            g,
            Vec::new(),
            vec![("Y".to_string(), 1.0), ("Z".to_string(), 1.0)],
            vec![(Edge::bidirected("Y", "Z"), 2.0)],
        );
        assert!(matches!(r, Err(Error::Model(_))));
    }

    #[test]
    fn surgery_drops_coefficients() {
        let m = corpus::triangle_scm(5.0, 1.0, 1.0);
        let s = m.surgered(&[Edge::directed("Y", "X")]).unwrap();
        assert_eq!(s.coefficient(&Edge::directed("Y", "X")), None);
        let sig = s.covariance().unwrap();
        assert!(sig.get("Y", "X").unwrap().abs() < 1e-15);
        let z = m.zeroed(&[Edge::directed("Y", "X")]).unwrap();
        assert_eq!(z.coefficient(&Edge::directed("Y", "X")), Some(0.0));
        assert!(z.graph().same_structure(m.graph()));
    }
}
