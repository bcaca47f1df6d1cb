//! Independent reference implementations shared by the integration tests.

#![allow(dead_code)]

use std::collections::{BTreeSet, HashMap};

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use shiftstable::graph::{CausalGraph, Edge, EdgeKind, Node};

/// Adjacency for brute-force path enumeration.
pub struct Skeleton {
    pub ids: Vec<String>,
    index: HashMap<String, usize>,
    /// (neighbour, arrowhead at self, arrowhead at neighbour)
    adj: Vec<Vec<(usize, bool, bool)>>,
    children: Vec<Vec<usize>>,
}

impl Skeleton {
    pub fn new(g: &CausalGraph) -> Self {
        let ids: Vec<String> = g.nodes().iter().map(|n| n.id.clone()).collect();
        let index: HashMap<String, usize> = ids
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i))
            .collect();
        let mut adj = vec![Vec::new(); ids.len()];
        let mut children = vec![Vec::new(); ids.len()];
        for e in g.edges() {
            let (t, h) = (index[&e.tail], index[&e.head]);
            match e.kind {
                EdgeKind::Directed => {
                    adj[t].push((h, false, true));
                    adj[h].push((t, true, false));
                    children[t].push(h);
                }
                EdgeKind::Bidirected => {
                    adj[t].push((h, true, true));
                    adj[h].push((t, true, true));
                }
            }
        }
        Skeleton {
            ids,
            index,
            adj,
            children,
        }
    }

    pub fn idx(&self, id: &str) -> usize {
        self.index[id]
    }

    /// Nodes with a directed path into some member of `z`, including `z`.
    fn anc_of(&self, z: &[usize]) -> Vec<bool> {
        let n = self.ids.len();
        let mut anc = vec![false; n];
        for (v, a) in anc.iter_mut().enumerate() {
            // DFS down from v
            let mut stack = vec![v];
            let mut seen = vec![false; n];
            while let Some(u) = stack.pop() {
                if seen[u] {
                    continue;
                }
                seen[u] = true;
                if z.contains(&u) {
                    *a = true;
                    break;
                }
                stack.extend(self.children[u].iter().copied());
            }
        }
        anc
    }

    /// True iff some simple path between `x` and `y` is active given `z`.
    pub fn connected(&self, x: usize, y: usize, z: &[usize]) -> bool {
        let anc = self.anc_of(z);
        let mut on = vec![false; self.ids.len()];
        on[x] = true;
        self.dfs(x, None, y, z, &anc, &mut on)
    }

    fn dfs(
        &self,
        v: usize,
        arrived_with_head: Option<bool>,
        y: usize,
        z: &[usize],
        anc: &[bool],
        on: &mut Vec<bool>,
    ) -> bool {
        for &(w, head_at_v, head_at_w) in &self.adj[v] {
            if let Some(in_head) = arrived_with_head {
                let collider = in_head && head_at_v;
                let ok = if collider { anc[v] } else { !z.contains(&v) };
                if !ok {
                    continue;
                }
            }
            if w == y {
                return true;
            }
            if on[w] {
                continue;
            }
            on[w] = true;
            let found = self.dfs(w, Some(head_at_w), y, z, anc, on);
            on[w] = false;
            if found {
                return true;
            }
        }
        false
    }

    pub fn separated(&self, xs: &[usize], ys: &[usize], z: &[usize]) -> bool {
        xs.iter()
            .all(|&x| ys.iter().all(|&y| !self.connected(x, y, z)))
    }
}

/// Parameters for random mixed graphs.
#[derive(Debug, Clone, Copy)]
pub struct GraphShape {
    pub max_nodes: usize,
    pub max_edges: usize,
}

pub const SMALL: GraphShape = GraphShape {
    max_nodes: 8,
    max_edges: 14,
};

/// A random acyclic mixed graph with observed target, some latents, some
/// bidirected edges and a random unstable subset.
pub fn random_graph(seed: u64, shape: GraphShape) -> CausalGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(2..=shape.max_nodes);
    let ids: Vec<String> = (0..n).map(|i| format!("V{i}")).collect();
    let target = rng.random_range(0..n);
    let nodes: Vec<Node> = ids
        .iter()
        .enumerate()
        .map(|(i, id)| {
            if i != target && rng.random_bool(0.2) {
                Node::latent(id.clone())
            } else {
                Node::observed(id.clone())
            }
        })
        .collect();
    // index order is a topological order for directed edges
    let mut pairs: Vec<(usize, usize, EdgeKind)> = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            pairs.push((a, b, EdgeKind::Directed));
            pairs.push((a, b, EdgeKind::Bidirected));
        }
    }
    let m = rng.random_range(0..=shape.max_edges.min(pairs.len()));
    let mut chosen = BTreeSet::new();
    while chosen.len() < m {
        let k = rng.random_range(0..pairs.len());
        // bidirected edges are rarer than directed ones
        if pairs[k].2 == EdgeKind::Bidirected && rng.random_bool(0.6) {
            continue;
        }
        chosen.insert(k);
    }
    let edges: Vec<(Edge, bool)> = chosen
        .into_iter()
        .map(|k| {
            let (a, b, kind) = pairs[k];
            let e = match kind {
                EdgeKind::Directed => Edge::directed(ids[a].clone(), ids[b].clone()),
                EdgeKind::Bidirected => Edge::bidirected(ids[a].clone(), ids[b].clone()),
            };
            (e, rng.random_bool(0.3))
        })
        .collect();
    CausalGraph::new(nodes, edges, &ids[target]).expect("generator yields valid graphs")
}

pub fn arb_graph(shape: GraphShape) -> impl Strategy<Value = CausalGraph> {
    any::<u64>().prop_map(move |s| random_graph(s, shape))
}

/// Every subset of `items`.
pub fn subsets<T: Clone>(items: &[T]) -> Vec<Vec<T>> {
    (0..1u64 << items.len())
        .map(|mask| {
            items
                .iter()
                .enumerate()
                .filter(|(i, _)| mask >> i & 1 == 1)
                .map(|(_, x)| x.clone())
                .collect()
        })
        .collect()
}

pub fn strs(v: &[String]) -> Vec<&str> {
    v.iter().map(String::as_str).collect()
}
