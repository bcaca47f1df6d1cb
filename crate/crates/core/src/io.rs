//! JSON file formats for graphs and models.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::graph::{CausalGraph, Edge, EdgeKind, Node};
use crate::scm::LinearGaussianScm;

fn yes() -> bool {
    true
}

fn directed() -> EdgeKind {
    EdgeKind::Directed
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeSpec {
    pub id: String,
    #[serde(default = "yes")]
    pub observed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeSpec {
    pub tail: String,
    pub head: String,
    #[serde(default = "directed")]
    pub kind: EdgeKind,
    #[serde(default)]
    pub unstable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphFile {
    pub nodes: Vec<NodeSpec>,
    pub edges: Vec<EdgeSpec>,
    pub target: String,
}

impl GraphFile {
    pub fn build(&self) -> Result<CausalGraph> {
        let nodes = self
            .nodes
            .iter()
            .map(|n| Node {
                id: n.id.clone(),
                observed: n.observed,
                intervened: false,
            })
            .collect();
        let edges = self.edges.iter().map(|e| {
            (
                Edge {
                    tail: e.tail.clone(),
                    head: e.head.clone(),
                    kind: e.kind,
                },
                e.unstable,
            )
        });
        CausalGraph::new(nodes, edges, &self.target)
    }

    pub fn from_graph(g: &CausalGraph) -> Self {
        GraphFile {
            nodes: g
                .nodes()
                .iter()
                .map(|n| NodeSpec {
                    id: n.id.clone(),
                    observed: n.observed,
                })
                .collect(),
            edges: g
                .edges_with_flags()
                .into_iter()
                .map(|(e, unstable)| EdgeSpec {
                    tail: e.tail,
                    head: e.head,
                    kind: e.kind,
                    unstable,
                })
                .collect(),
            target: g.target().to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientSpec {
    pub tail: String,
    pub head: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub node: String,
    pub var: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExoCovSpec {
    pub a: String,
    pub b: String,
    pub value: f64,
}

/// A graph plus coefficients; omitted noise variances default to 0.01.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScmFile {
    #[serde(flatten)]
    pub graph: GraphFile,
    pub coefficients: Vec<CoefficientSpec>,
    #[serde(default)]
    pub noise: Vec<NoiseSpec>,
    #[serde(default)]
    pub exo_cov: Vec<ExoCovSpec>,
}

impl ScmFile {
    pub fn build(&self) -> Result<LinearGaussianScm> {
        let g = self.graph.build()?;
        LinearGaussianScm::new(
            g,
            self.coefficients
                .iter()
                .map(|c| (Edge::directed(c.tail.clone(), c.head.clone()), c.value)),
            self.noise.iter().map(|n| (n.node.clone(), n.var)),
            self.exo_cov
                .iter()
                .map(|c| (Edge::bidirected(c.a.clone(), c.b.clone()), c.value)),
        )
    }

    pub fn from_scm(m: &LinearGaussianScm) -> Self {
        let g = m.graph();
        ScmFile {
            graph: GraphFile::from_graph(g),
            coefficients: m
                .coefficients()
                .into_iter()
                .map(|(e, value)| CoefficientSpec {
                    tail: e.tail,
                    head: e.head,
                    value,
                })
                .collect(),
            noise: g
                .nodes()
                .iter()
                .map(|n| NoiseSpec {
                    node: n.id.clone(),
                    var: m.noise_var(&n.id).expect("node of the model"),
                })
                .collect(),
            exo_cov: g
                .edges()
                .into_iter()
                .filter(|e| e.kind == EdgeKind::Bidirected)
                .map(|e| ExoCovSpec {
                    value: m.coefficient(&e).expect("edge of the model"),
                    a: e.tail,
                    b: e.head,
                })
                .collect(),
        }
    }
}

pub fn parse_graph(json: &str) -> Result<CausalGraph> {
    serde_json::from_str::<GraphFile>(json)?.build()
}

pub fn parse_scm(json: &str) -> Result<LinearGaussianScm> {
    serde_json::from_str::<ScmFile>(json)?.build()
}

pub fn graph_to_json(g: &CausalGraph) -> String {
    serde_json::to_string_pretty(&GraphFile::from_graph(g)).expect("serializable")
}

pub fn scm_to_json(m: &LinearGaussianScm) -> String {
    serde_json::to_string_pretty(&ScmFile::from_scm(m)).expect("serializable")
}
