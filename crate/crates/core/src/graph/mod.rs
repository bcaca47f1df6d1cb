//! Acyclic directed mixed graphs with a marked set of unstable edges.
//!
//! Directed edges are causal mechanisms, bidirected edges stand for an
//! unobserved common cause. Any edge may be marked unstable, meaning the
//! mechanism (or edge strength) it carries can differ between environments.

mod paths;
mod selection;
mod surgery;

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub(crate) use paths::path_stable;
pub use paths::{
    active_paths, active_unstable_paths, d_separated, is_stable_conditional, Path, PathMode,
    SeparationQuery, StabilityVerdict,
};
pub use selection::{selection_stable, to_selection_diagram, SelectionDiagram, SelectionNode};
pub use surgery::{delete_edges, edges_into, mutilate_do};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeKind {
    Directed,
    Bidirected,
}

/// An edge identified by `(tail, head, kind)`.
///
/// Bidirected edges are stored with `tail <= head` so that `A <-> B` and
/// `B <-> A` compare equal; use [`Edge::bidirected`] or [`Edge::canonical`].
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Edge {
    pub tail: String,
    pub head: String,
    pub kind: EdgeKind,
}

impl Edge {
    pub fn directed(tail: impl Into<String>, head: impl Into<String>) -> Self {
        Edge {
            tail: tail.into(),
            head: head.into(),
            kind: EdgeKind::Directed,
        }
    }

    pub fn bidirected(a: impl Into<String>, b: impl Into<String>) -> Self {
        Edge {
            tail: a.into(),
            head: b.into(),
            kind: EdgeKind::Bidirected,
        }
        .canonical()
    }

    pub fn canonical(mut self) -> Self {
        if self.kind == EdgeKind::Bidirected && self.head < self.tail {
            std::mem::swap(&mut self.tail, &mut self.head);
        }
        self
    }

    /// True when the edge carries an arrowhead at `node`.
    pub fn points_into(&self, node: &str) -> bool {
        match self.kind {
            EdgeKind::Directed => self.head == node,
            EdgeKind::Bidirected => self.head == node || self.tail == node,
        }
    }
}

impl fmt::Display for Edge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            EdgeKind::Directed => write!(f, "{} -> {}", self.tail, self.head),
            EdgeKind::Bidirected => write!(f, "{} <-> {}", self.tail, self.head),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Node {
    pub id: String,
    pub observed: bool,
    /// Set by `mutilate_do` on intervened nodes; they become context roots.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub intervened: bool,
}

impl Node {
    pub fn observed(id: impl Into<String>) -> Self {
        Node {
            id: id.into(),
            observed: true,
            intervened: false,
        }
    }

    pub fn latent(id: impl Into<String>) -> Self {
        Node {
            id: id.into(),
            observed: false,
            intervened: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct GEdge {
    pub tail: usize,
    pub head: usize,
    pub kind: EdgeKind,
    pub unstable: bool,
}

impl GEdge {
    /// The endpoint opposite `v`.
    pub fn other(&self, v: usize) -> usize {
        if self.tail == v {
            self.head
        } else {
            self.tail
        }
    }

    pub fn arrow_at(&self, v: usize) -> bool {
        match self.kind {
            EdgeKind::Directed => self.head == v,
            EdgeKind::Bidirected => true,
        }
    }
}

/// Immutable ADMG with observed/latent nodes, unstable edges and a target.
#[derive(Debug, Clone)]
pub struct CausalGraph {
    nodes: Vec<Node>,
    index: HashMap<String, usize>,
    edges: Vec<GEdge>,
    incident: Vec<Vec<usize>>,
    target: usize,
}

impl CausalGraph {
    /// Builds and validates a graph. `edges` pairs each edge with its unstable flag.
    pub fn new(
        nodes: Vec<Node>,
        edges: impl IntoIterator<Item = (Edge, bool)>,
        target: &str,
    ) -> Result<Self> {
        let mut index = HashMap::with_capacity(nodes.len());
        for (i, n) in nodes.iter().enumerate() {
            if index.insert(n.id.clone(), i).is_some() {
                return Err(Error::InvalidGraph(format!("duplicate node id `{}`", n.id)));
            }
        }
        let lookup = |id: &str| {
            index
                .get(id)
                .copied()
                .ok_or_else(|| Error::InvalidGraph(format!("edge references unknown node `{id}`")))
        };

        let mut seen = BTreeSet::new();
        let mut gedges = Vec::new();
        for (edge, unstable) in edges {
            let edge = edge.canonical();
            if edge.tail == edge.head {
                return Err(Error::InvalidGraph(format!("self-loop on `{}`", edge.tail)));
            }
            let (tail, head) = (lookup(&edge.tail)?, lookup(&edge.head)?);
            if !seen.insert(edge.clone()) {
                return Err(Error::InvalidGraph(format!("duplicate edge `{edge}`")));
            }
            gedges.push(GEdge {
                tail,
                head,
                kind: edge.kind,
                unstable,
            });
        }

        let target = *index
            .get(target)
            .ok_or_else(|| Error::InvalidGraph(format!("unknown target `{target}`")))?;
        if !nodes[target].observed {
            return Err(Error::InvalidGraph(format!(
                "target `{}` must be observed",
                nodes[target].id
            )));
        }

        let mut g = CausalGraph {
            incident: vec![Vec::new(); nodes.len()],
            nodes,
            index,
            edges: Vec::new(),
            target,
        };
        g.set_edges(gedges);
        if g.topological_order().is_none() {
            return Err(Error::InvalidGraph("directed cycle".into()));
        }
        Ok(g)
    }

    /// Replaces the edge list, keeping it sorted canonically, and rebuilds adjacency.
    pub(crate) fn set_edges(&mut self, mut edges: Vec<GEdge>) {
        edges.sort_by(|a, b| self.edge_key(a).cmp(&self.edge_key(b)));
        for inc in &mut self.incident {
            inc.clear();
        }
        for (k, e) in edges.iter().enumerate() {
            self.incident[e.tail].push(k);
            self.incident[e.head].push(k);
        }
        self.edges = edges;
    }

    fn edge_key(&self, e: &GEdge) -> (EdgeKind, &str, &str) {
        (e.kind, &self.nodes[e.tail].id, &self.nodes[e.head].id)
    }

    pub(crate) fn gedges(&self) -> &[GEdge] {
        &self.edges
    }

    pub(crate) fn incident(&self, v: usize) -> &[usize] {
        &self.incident[v]
    }

    pub(crate) fn nodes_mut(&mut self) -> &mut Vec<Node> {
        &mut self.nodes
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn node_index(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn id(&self, v: usize) -> &str {
        &self.nodes[v].id
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    pub fn is_observed(&self, id: &str) -> bool {
        self.node_index(id).is_some_and(|v| self.nodes[v].observed)
    }

    pub fn target(&self) -> &str {
        &self.nodes[self.target].id
    }

    pub(crate) fn target_index(&self) -> usize {
        self.target
    }

    /// Observed node ids in declaration order.
    pub fn observed(&self) -> Vec<&str> {
        self.nodes
            .iter()
            .filter(|n| n.observed)
            .map(|n| n.id.as_str())
            .collect()
    }

    /// Observed nodes other than the target, sorted by id.
    pub fn candidate_features(&self) -> Vec<String> {
        let mut v: Vec<String> = self
            .nodes
            .iter()
            .enumerate()
            .filter(|(i, n)| n.observed && *i != self.target)
            .map(|(_, n)| n.id.clone())
            .collect();
        v.sort();
        v
    }

    pub(crate) fn to_edge(&self, e: &GEdge) -> Edge {
        Edge {
            tail: self.nodes[e.tail].id.clone(),
            head: self.nodes[e.head].id.clone(),
            kind: e.kind,
        }
    }

    /// All edges in canonical order.
    pub fn edges(&self) -> Vec<Edge> {
        self.edges.iter().map(|e| self.to_edge(e)).collect()
    }

    pub fn unstable_edges(&self) -> Vec<Edge> {
        self.edges
            .iter()
            .filter(|e| e.unstable)
            .map(|e| self.to_edge(e))
            .collect()
    }

    pub fn edges_with_flags(&self) -> Vec<(Edge, bool)> {
        self.edges
            .iter()
            .map(|e| (self.to_edge(e), e.unstable))
            .collect()
    }

    pub fn has_edge(&self, edge: &Edge) -> bool {
        self.find_edge(edge).is_some()
    }

    pub fn is_unstable(&self, edge: &Edge) -> bool {
        self.find_edge(edge).is_some_and(|k| self.edges[k].unstable)
    }

    pub(crate) fn find_edge(&self, edge: &Edge) -> Option<usize> {
        let edge = edge.clone().canonical();
        let (t, h) = (self.node_index(&edge.tail)?, self.node_index(&edge.head)?);
        self.incident[t].iter().copied().find(|&k| {
            let e = &self.edges[k];
            e.tail == t && e.head == h && e.kind == edge.kind
        })
    }

    pub fn parents(&self, id: &str) -> Vec<&str> {
        let Some(v) = self.node_index(id) else {
            return Vec::new();
        };
        self.parent_indices(v)
            .into_iter()
            .map(|p| self.id(p))
            .collect()
    }

    pub(crate) fn parent_indices(&self, v: usize) -> Vec<usize> {
        self.incident[v]
            .iter()
            .map(|&k| &self.edges[k])
            .filter(|e| e.kind == EdgeKind::Directed && e.head == v)
            .map(|e| e.tail)
            .collect()
    }

    /// Kahn's algorithm over directed edges; ties broken by node index.
    pub fn topological_order(&self) -> Option<Vec<usize>> {
        let n = self.nodes.len();
        let mut indeg = vec![0usize; n];
        for e in self.edges.iter().filter(|e| e.kind == EdgeKind::Directed) {
            indeg[e.head] += 1;
        }
        let mut ready: BTreeSet<usize> = (0..n).filter(|&v| indeg[v] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(v) = ready.pop_first() {
            order.push(v);
            for &k in &self.incident[v] {
                let e = &self.edges[k];
                if e.kind == EdgeKind::Directed && e.tail == v {
                    indeg[e.head] -= 1;
                    if indeg[e.head] == 0 {
                        ready.insert(e.head);
                    }
                }
            }
        }
        (order.len() == n).then_some(order)
    }

    /// Ancestors of `set`, including the set itself, as a membership mask.
    pub(crate) fn ancestor_mask(&self, set: &[usize]) -> Vec<bool> {
        let mut mask = vec![false; self.nodes.len()];
        let mut stack: Vec<usize> = set.to_vec();
        while let Some(v) = stack.pop() {
            if mask[v] {
                continue;
            }
            mask[v] = true;
            stack.extend(self.parent_indices(v));
        }
        mask
    }

    /// Ancestors of the node `id`, including itself.
    pub fn ancestors(&self, id: &str) -> BTreeSet<String> {
        let Some(v) = self.node_index(id) else {
            return BTreeSet::new();
        };
        self.ancestor_mask(&[v])
            .iter()
            .enumerate()
            .filter(|(_, &a)| a)
            .map(|(i, _)| self.nodes[i].id.clone())
            .collect()
    }

    /// Resolves ids to indices, failing with a query error on unknown ids.
    pub(crate) fn resolve<'a>(&self, ids: impl IntoIterator<Item = &'a str>) -> Result<Vec<usize>> {
        ids.into_iter()
            .map(|id| {
                self.node_index(id)
                    .ok_or_else(|| Error::Query(format!("unknown node `{id}`")))
            })
            .collect()
    }

    /// Structural equality: same nodes, edges, unstable flags and target.
    /// Ignores the `intervened` markers.
    pub fn same_structure(&self, other: &CausalGraph) -> bool {
        let strip = |g: &CausalGraph| -> Vec<(String, bool)> {
            g.nodes.iter().map(|n| (n.id.clone(), n.observed)).collect()
        };
        strip(self) == strip(other)
            && self.edges_with_flags() == other.edges_with_flags()
            && self.target() == other.target()
    }

    /// A stable text key for deduplicating structurally identical graphs.
    pub fn canonical_key(&self) -> String {
        let mut parts: Vec<String> = self
            .edges_with_flags()
            .iter()
            .map(|(e, u)| if *u { format!("{e}!") } else { e.to_string() })
            .collect();
        parts.sort();
        parts.join(";")
    }
}

impl PartialEq for CausalGraph {
    fn eq(&self, other: &Self) -> bool {
        self.nodes == other.nodes && self.same_structure(other)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain() -> CausalGraph {
        CausalGraph::new(
            vec![
                Node::observed("X"),
                Node::observed("Y"),
                Node::observed("Z"),
            ],
            vec![
                (Edge::directed("X", "Y"), false),
                (Edge::directed("Y", "Z"), true),
            ],
            "Y",
        )
        .unwrap()
    }

    #[test]
    fn bidirected_edges_are_order_insensitive() {
        assert_eq!(Edge::bidirected("Z", "Y"), Edge::bidirected("Y", "Z"));
        let g = CausalGraph::new(
            vec![Node::observed("Y"), Node::observed("Z")],
            vec![(Edge::bidirected("Z", "Y"), false)],
            "Y",
        )
        .unwrap();
        assert!(g.has_edge(&Edge::bidirected("Y", "Z")));
    }

    #[test]
    fn rejects_cycles_self_loops_and_duplicates() {
        let nodes = || vec![Node::observed("A"), Node::observed("B")];
        let cyc = CausalGraph::new(
            nodes(),
            vec![
                (Edge::directed("A", "B"), false),
                (Edge::directed("B", "A"), false),
            ],
            "A",
        );
        assert!(matches!(cyc, Err(Error::InvalidGraph(_))));
        let self_loop = CausalGraph::new(nodes(), vec![(Edge::directed("A", "A"), false)], "A");
        assert!(matches!(self_loop, Err(Error::InvalidGraph(_))));
        let dup = CausalGraph::new(
            nodes(),
            vec![
                (Edge::bidirected("A", "B"), false),
                (Edge::bidirected("B", "A"), true),
            ],
            "A",
        );
        assert!(matches!(dup, Err(Error::InvalidGraph(_))));
    }

    #[test]
    fn parallel_directed_and_bidirected_edges_allowed() {
        let g = CausalGraph::new(
            vec![Node::observed("Y"), Node::observed("Z")],
            vec![
                (Edge::directed("Y", "Z"), true),
                (Edge::bidirected("Y", "Z"), false),
            ],
            "Y",
        )
        .unwrap();
        assert_eq!(g.edges().len(), 2);
        assert_eq!(g.unstable_edges(), vec![Edge::directed("Y", "Z")]);
    }

    #[test]
    fn target_must_be_observed() {
        let r = CausalGraph::new(vec![Node::latent("Y")], Vec::new(), "Y");
        assert!(matches!(r, Err(Error::InvalidGraph(_))));
    }

    #[test]
    fn ancestors_and_topological_order() {
        let g = chain();
        let order: Vec<&str> = g
            .topological_order()
            .unwrap()
            .into_iter()
            .map(|v| g.id(v))
            .collect();
        assert_eq!(order, vec!["X", "Y", "Z"]);
        assert_eq!(
            g.ancestors("Z"),
            ["X", "Y", "Z"].iter().map(|s| s.to_string()).collect()
        );
    }

    #[test]
    fn conditioning_rejects_target_and_latents() {
        let g = CausalGraph::new(
            vec![Node::observed("Y"), Node::latent("W")],
            vec![(Edge::directed("W", "Y"), false)],
            "Y",
        )
        .unwrap();
        for z in ["Y", "W", "Q"] {
            assert!(matches!(
                is_stable_conditional(&g, &[z], "Y"),
                Err(Error::Query(_))
            ));
        }
    }
}
