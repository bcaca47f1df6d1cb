use std::collections::BTreeSet;

use serde::Serialize;

use super::paths::{d_separated, SeparationQuery};
use super::{CausalGraph, Edge, EdgeKind, Node};
use crate::error::Result;

/// A selection variable added for one unstable edge.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SelectionNode {
    pub id: String,
    /// The single child of the selection node.
    pub child: String,
    /// The unstable edge this node was created for.
    pub edge: Edge,
}

/// A graph augmented with one selection node per unstable edge.
///
/// For a directed unstable edge the selection node points at its head. For an
/// unstable bidirected edge `A <-> B` the edge is replaced in `augmented` by an
/// explicit latent confounder `L -> A`, `L -> B`, and the selection node points
/// at `L`, so every selection node keeps exactly one child.
#[derive(Debug, Clone)]
pub struct SelectionDiagram {
    pub base: CausalGraph,
    pub augmented: CausalGraph,
    pub selection_nodes: Vec<SelectionNode>,
}

fn fresh_id(prefix: &str, k: usize, taken: &BTreeSet<String>) -> String {
    let mut id = format!("{prefix}{k}");
    while taken.contains(&id) {
        id.push('\'');
    }
    id
}

pub fn to_selection_diagram(g: &CausalGraph) -> SelectionDiagram {
    let mut taken: BTreeSet<String> = g.nodes().iter().map(|n| n.id.clone()).collect();
    let mut nodes: Vec<Node> = g.nodes().to_vec();
    let mut edges: Vec<(Edge, bool)> = Vec::new();
    let mut selection_nodes = Vec::new();

    for (edge, unstable) in g.edges_with_flags() {
        if !unstable {
            edges.push((edge, false));
            continue;
        }
        let k = selection_nodes.len() + 1;
        let s = fresh_id("S", k, &taken);
        taken.insert(s.clone());
        nodes.push(Node::latent(s.clone()));
        let child = match edge.kind {
            EdgeKind::Directed => {
                edges.push((edge.clone(), true));
                edge.head.clone()
            }
            EdgeKind::Bidirected => {
                let l = fresh_id("L", k, &taken);
                taken.insert(l.clone());
                nodes.push(Node::latent(l.clone()));
                edges.push((Edge::directed(l.clone(), edge.tail.clone()), true));
                edges.push((Edge::directed(l.clone(), edge.head.clone()), true));
                l
            }
        };
        edges.push((Edge::directed(s.clone(), child.clone()), false));
        selection_nodes.push(SelectionNode { id: s, child, edge });
    }

    let augmented = CausalGraph::new(nodes, edges, g.target())
        .expect("adding parentless selection nodes preserves validity");
    SelectionDiagram {
        base: g.clone(),
        augmented,
        selection_nodes,
    }
}

/// Stability of `P(y | z)` read off the selection diagram: every selection
/// node must be d-separated from `y` given `z`.
pub fn selection_stable(sd: &SelectionDiagram, z: &[&str], y: &str) -> Result<bool> {
    if sd.selection_nodes.is_empty() {
        // still validate the query against the graph
        sd.base.resolve(z.iter().copied().chain([y]))?;
        return Ok(true);
    }
    let q = SeparationQuery::new(
        sd.selection_nodes.iter().map(|s| s.id.as_str()),
        [y],
        z.iter().copied(),
    );
    d_separated(&sd.augmented, &q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;

    #[test]
    fn pneumonia_has_one_selection_node_on_icu() {
        let sd = to_selection_diagram(&corpus::pneumonia());
        assert_eq!(sd.selection_nodes.len(), 1);
        assert_eq!(sd.selection_nodes[0].child, "ICU");
        assert_eq!(sd.selection_nodes[0].edge, Edge::directed("Asthma", "ICU"));
        assert!(sd.base.same_structure(&corpus::pneumonia()));
    }

    #[test]
    fn no_unstable_edges_no_selection_nodes() {
        let g = corpus::confounded_child();
        let stable = CausalGraph::new(
            g.nodes().to_vec(),
            g.edges().into_iter().map(|e| (e, false)),
            g.target(),
        )
        .unwrap();
        let sd = to_selection_diagram(&stable);
        assert!(sd.selection_nodes.is_empty());
        assert!(selection_stable(&sd, &[], "Y").unwrap());
        assert!(selection_stable(&sd, &["X", "Z"], "Y").unwrap());
    }

    #[test]
    fn confounded_child_selection_points_at_z() {
        let sd = to_selection_diagram(&corpus::confounded_child());
        assert_eq!(sd.selection_nodes.len(), 1);
        assert_eq!(sd.selection_nodes[0].child, "Z");
    }

    #[test]
    fn pneumonia_selection_verdicts() {
        let sd = to_selection_diagram(&corpus::pneumonia());
        assert!(selection_stable(&sd, &["Pneumonia", "Asthma", "ICU"], "Mortality").unwrap());
        assert!(!selection_stable(&sd, &["Pneumonia", "Asthma"], "Mortality").unwrap());
    }

    #[test]
    fn bidirected_unstable_edge_gets_latent_confounder() {
        let g = CausalGraph::new(
            vec![
                Node::observed("A"),
                Node::observed("B"),
                Node::observed("Y"),
            ],
            vec![
                (Edge::bidirected("A", "B"), true),
                (Edge::directed("B", "Y"), false),
            ],
            "Y",
        )
        .unwrap();
        let sd = to_selection_diagram(&g);
        let s = &sd.selection_nodes[0];
        assert_eq!(s.child, "L1");
        assert!(!sd.augmented.has_edge(&Edge::bidirected("A", "B")));
        assert!(sd.augmented.has_edge(&Edge::directed("L1", "A")));
        assert!(!selection_stable(&sd, &[], "Y").unwrap());
        assert!(selection_stable(&sd, &["B"], "Y").unwrap());
    }
}
