use std::collections::BTreeSet;

use super::{CausalGraph, Edge};
use crate::error::{Error, Result};

/// Removes exactly the edges in `d`. Unstable markers on surviving edges are kept.
pub fn delete_edges(g: &CausalGraph, d: &[Edge]) -> Result<CausalGraph> {
    let mut drop = BTreeSet::new();
    for e in d {
        let k = g
            .find_edge(e)
            .ok_or_else(|| Error::Spec(format!("edge `{e}` is not in the graph")))?;
        drop.insert(k);
    }
    let kept = g
        .gedges()
        .iter()
        .enumerate()
        .filter(|(k, _)| !drop.contains(k))
        .map(|(_, e)| *e)
        .collect();
    let mut out = g.clone();
    out.set_edges(kept);
    Ok(out)
}

/// Edges with an arrowhead at some node of `w` (directed into it, or bidirected touching it).
pub fn edges_into(g: &CausalGraph, w: &[&str]) -> Result<Vec<Edge>> {
    let ws = g
        .resolve(w.iter().copied())
        .map_err(|e| Error::Spec(e.to_string()))?;
    Ok(g.gedges()
        .iter()
        .filter(|e| {
            ws.iter()
                .any(|&v| e.arrow_at(v) && (e.head == v || e.tail == v))
        })
        .map(|e| g.to_edge(e))
        .collect())
}

/// Graph of `do(w)`: every edge with a head in `w` removed, intervened nodes flagged.
pub fn mutilate_do(g: &CausalGraph, w: &[&str]) -> Result<CausalGraph> {
    for &v in w {
        if !g.contains(v) {
            return Err(Error::Spec(format!("unknown node `{v}`")));
        }
        if v == g.target() {
            return Err(Error::Spec(format!("cannot intervene on the target `{v}`")));
        }
        if !g.is_observed(v) {
            return Err(Error::Spec(format!(
                "cannot intervene on latent node `{v}`"
            )));
        }
    }
    let mut out = delete_edges(g, &edges_into(g, w)?)?;
    for n in out.nodes_mut() {
        if w.contains(&n.id.as_str()) {
            n.intervened = true;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;

    #[test]
    fn do_x_on_style_shift_removes_unstable_edge() {
        let g = corpus::style_shift();
        let m = mutilate_do(&g, &["X"]).unwrap();
        assert!(!m.has_edge(&Edge::directed("W", "X")));
        assert!(m.unstable_edges().is_empty());
        assert_eq!(m.edges().len(), 3);
        assert!(m.nodes()[m.node_index("X").unwrap()].intervened);
    }

    #[test]
    fn empty_intervention_is_identity() {
        let g = corpus::style_shift();
        assert_eq!(mutilate_do(&g, &[]).unwrap(), g);
        assert_eq!(delete_edges(&g, &[]).unwrap(), g);
    }

    #[test]
    fn do_z_on_confounded_child_drops_both_edges_into_z() {
        let g = corpus::confounded_child();
        let m = mutilate_do(&g, &["Z"]).unwrap();
        assert_eq!(m.edges(), vec![Edge::directed("X", "Y")]);
    }

    #[test]
    fn delete_directed_keeps_parallel_bidirected() {
        let g = corpus::confounded_child();
        let d = delete_edges(&g, &[Edge::directed("Y", "Z")]).unwrap();
        assert!(d.has_edge(&Edge::bidirected("Y", "Z")));
        assert!(!d.has_edge(&Edge::directed("Y", "Z")));
        assert!(d.unstable_edges().is_empty());
    }

    #[test]
    fn deleting_unstable_edges_of_triangle() {
        let g = corpus::triangle();
        let d = delete_edges(&g, &g.unstable_edges()).unwrap();
        assert!(!d.has_edge(&Edge::directed("Y", "X")));
        assert!(d.has_edge(&Edge::directed("Y", "Z")));
        assert!(d.has_edge(&Edge::directed("X", "Z")));
    }

    #[test]
    fn surgery_errors() {
        let g = corpus::confounded_child();
        assert!(matches!(mutilate_do(&g, &["Y"]), Err(Error::Spec(_))));
        assert!(matches!(
            delete_edges(&g, &[Edge::directed("Z", "X")]),
            Err(Error::Spec(_))
        ));
    }
}
