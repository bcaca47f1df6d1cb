//! d-separation (reachability) and enumeration of active unstable paths.
//!
//! Activation rules for mixed graphs: a non-endpoint node is a collider when
//! both adjacent edges carry an arrowhead at it (`->`, `<->`). A path is active
//! given `Z` when every collider is an ancestor of `Z` (or in `Z`) and every
//! non-collider lies outside `Z`.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{CausalGraph, Edge, EdgeKind, GEdge};
use crate::error::{Error, Result};

/// A query `sources ⟂ sinks | conditioning`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeparationQuery {
    pub sources: BTreeSet<String>,
    pub sinks: BTreeSet<String>,
    pub conditioning: BTreeSet<String>,
}

impl SeparationQuery {
    pub fn new<'a>(
        sources: impl IntoIterator<Item = &'a str>,
        sinks: impl IntoIterator<Item = &'a str>,
        conditioning: impl IntoIterator<Item = &'a str>,
    ) -> Self {
        let set = |it: &mut dyn Iterator<Item = &'a str>| it.map(str::to_string).collect();
        SeparationQuery {
            sources: set(&mut sources.into_iter()),
            sinks: set(&mut sinks.into_iter()),
            conditioning: set(&mut conditioning.into_iter()),
        }
    }

    fn validate(&self, g: &CausalGraph) -> Result<(Vec<usize>, Vec<usize>, Vec<usize>)> {
        let overlap =
            |a: &BTreeSet<String>, b: &BTreeSet<String>| a.intersection(b).next().cloned();
        if let Some(v) = overlap(&self.sources, &self.sinks)
            .or_else(|| overlap(&self.sources, &self.conditioning))
            .or_else(|| overlap(&self.sinks, &self.conditioning))
        {
            return Err(Error::Query(format!(
                "`{v}` appears in more than one query set"
            )));
        }
        Ok((
            g.resolve(self.sources.iter().map(String::as_str))?,
            g.resolve(self.sinks.iter().map(String::as_str))?,
            g.resolve(self.conditioning.iter().map(String::as_str))?,
        ))
    }
}

fn mask(n: usize, members: &[usize]) -> Vec<bool> {
    let mut m = vec![false; n];
    for &v in members {
        m[v] = true;
    }
    m
}

/// True iff no active path connects `sources` and `sinks` given `conditioning`.
pub fn d_separated(g: &CausalGraph, q: &SeparationQuery) -> Result<bool> {
    let (sources, sinks, cond) = q.validate(g)?;
    let reached = reachable(g, &sources, &cond);
    Ok(!sinks.iter().any(|&t| reached[t]))
}

/// Nodes reachable from `sources` along active paths given `cond`.
pub(crate) fn reachable(g: &CausalGraph, sources: &[usize], cond: &[usize]) -> Vec<bool> {
    let n = g.node_count();
    let in_cond = mask(n, cond);
    let anc = g.ancestor_mask(cond);
    // visited[v][arrow]: reached v over an edge with (1) or without (0) an arrowhead at v
    let mut visited = vec![[false; 2]; n];
    let mut reached = vec![false; n];
    let mut stack: Vec<(usize, Option<bool>)> = sources.iter().map(|&s| (s, None)).collect();
    while let Some((v, arrow_in)) = stack.pop() {
        if let Some(a) = arrow_in {
            if visited[v][a as usize] {
                continue;
            }
            visited[v][a as usize] = true;
        }
        reached[v] = true;
        for &k in g.incident(v) {
            let e = &g.gedges()[k];
            if let Some(a) = arrow_in {
                if !passes(a, e.arrow_at(v), in_cond[v], anc[v]) {
                    continue;
                }
            }
            let w = e.other(v);
            stack.push((w, Some(e.arrow_at(w))));
        }
    }
    reached
}

#[inline]
fn passes(arrow_in: bool, arrow_out: bool, conditioned: bool, ancestor_of_cond: bool) -> bool {
    if arrow_in && arrow_out {
        ancestor_of_cond
    } else {
        !conditioned
    }
}

/// A path as an alternating node/edge sequence, `nodes.len() == edges.len() + 1`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Path {
    pub nodes: Vec<String>,
    pub edges: Vec<Edge>,
    pub unstable: Vec<bool>,
}

impl Path {
    fn from_indices(g: &CausalGraph, nodes: &[usize], edges: &[usize]) -> Self {
        let es: Vec<&GEdge> = edges.iter().map(|&k| &g.gedges()[k]).collect();
        Path {
            nodes: nodes.iter().map(|&v| g.id(v).to_string()).collect(),
            edges: es.iter().map(|e| g.to_edge(e)).collect(),
            unstable: es.iter().map(|e| e.unstable).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn has_unstable_edge(&self) -> bool {
        self.unstable.iter().any(|&u| u)
    }

    pub fn source(&self) -> &str {
        &self.nodes[0]
    }
}

impl fmt::Display for Path {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.nodes[0])?;
        for (i, e) in self.edges.iter().enumerate() {
            let forward = e.kind == EdgeKind::Directed && e.tail == self.nodes[i];
            let arrow = match (e.kind, forward, self.unstable[i]) {
                (EdgeKind::Bidirected, _, false) => "<->",
                (EdgeKind::Bidirected, _, true) => "<-!->",
                (_, true, false) => "->",
                (_, true, true) => "-!->",
                (_, false, false) => "<-",
                (_, false, true) => "<-!-",
            };
            write!(f, " {arrow} {}", self.nodes[i + 1])?;
        }
        Ok(())
    }
}

/// Which paths count as witnesses of instability.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PathMode {
    /// Paths that enter through an unstable edge `e` and continue actively from
    /// `He(e)` to the target. This is the form equivalent to d-connection of a
    /// selection node placed on `He(e)`; it also covers unstable edges into the
    /// target and instability that reaches the target without passing a feature.
    #[default]
    Anchored,
    /// Active paths from some conditioned node to the target that contain at
    /// least one unstable edge.
    FromConditioning,
}

struct Walker<'a> {
    g: &'a CausalGraph,
    in_cond: Vec<bool>,
    anc: Vec<bool>,
    sink: usize,
    banned: Option<usize>,
    on_path: Vec<bool>,
    nodes: Vec<usize>,
    edges: Vec<usize>,
    found: Vec<(Vec<usize>, Vec<usize>)>,
    limit: usize,
}

impl Walker<'_> {
    fn dfs(&mut self, v: usize, arrow_in: Option<bool>) {
        if self.found.len() >= self.limit {
            return;
        }
        if v == self.sink && !self.edges.is_empty() {
            self.found.push((self.nodes.clone(), self.edges.clone()));
            return;
        }
        for &k in self.g.incident(v) {
            if Some(k) == self.banned {
                continue;
            }
            let e = self.g.gedges()[k];
            let w = e.other(v);
            if self.on_path[w] {
                continue;
            }
            if let Some(a) = arrow_in {
                if !passes(a, e.arrow_at(v), self.in_cond[v], self.anc[v]) {
                    continue;
                }
            }
            self.on_path[w] = true;
            self.nodes.push(w);
            self.edges.push(k);
            self.dfs(w, Some(e.arrow_at(w)));
            self.edges.pop();
            self.nodes.pop();
            self.on_path[w] = false;
        }
    }
}

const PATH_LIMIT: usize = 100_000;

/// Every active path to `y` given `z` that contains an unstable edge.
///
/// The empty list certifies path-stability of `P(y | z)`. Paths come back in
/// lexicographic order of their node sequence.
pub fn active_unstable_paths(
    g: &CausalGraph,
    z: &[&str],
    y: &str,
    mode: PathMode,
) -> Result<Vec<Path>> {
    let (zs, yi) = resolve_stability_query(g, z, y)?;
    Ok(collect_paths(g, &zs, yi, mode, PATH_LIMIT))
}

fn resolve_stability_query(g: &CausalGraph, z: &[&str], y: &str) -> Result<(Vec<usize>, usize)> {
    let yi = g
        .node_index(y)
        .ok_or_else(|| Error::Query(format!("unknown node `{y}`")))?;
    if z.contains(&y) {
        return Err(Error::Query(format!(
            "`{y}` cannot be both target and conditioned"
        )));
    }
    let zs = g.resolve(z.iter().copied())?;
    if let Some(&l) = zs.iter().find(|&&v| !g.nodes()[v].observed) {
        return Err(Error::Query(format!(
            "latent node `{}` cannot be conditioned on",
            g.id(l)
        )));
    }
    Ok((zs, yi))
}

fn collect_paths(
    g: &CausalGraph,
    zs: &[usize],
    yi: usize,
    mode: PathMode,
    limit: usize,
) -> Vec<Path> {
    let n = g.node_count();
    let mut walker = Walker {
        g,
        in_cond: mask(n, zs),
        anc: g.ancestor_mask(zs),
        sink: yi,
        banned: None,
        on_path: vec![false; n],
        nodes: Vec::new(),
        edges: Vec::new(),
        found: Vec::new(),
        limit,
    };
    let mut out: Vec<Path> = Vec::new();
    match mode {
        PathMode::Anchored => {
            for (k, e) in g.gedges().iter().enumerate() {
                if !e.unstable {
                    continue;
                }
                let heads: Vec<(usize, usize)> = match e.kind {
                    EdgeKind::Directed => vec![(e.tail, e.head)],
                    EdgeKind::Bidirected => vec![(e.tail, e.head), (e.head, e.tail)],
                };
                for (tail, head) in heads {
                    if head == yi {
                        out.push(Path::from_indices(g, &[tail, head], &[k]));
                        continue;
                    }
                    walker.banned = (e.kind == EdgeKind::Bidirected).then_some(k);
                    walker.on_path[head] = true;
                    walker.nodes = vec![head];
                    walker.edges.clear();
                    walker.dfs(head, Some(true));
                    walker.on_path[head] = false;
                    for (ns, es) in walker.found.drain(..) {
                        let mut nodes = vec![tail];
                        nodes.extend(ns);
                        let mut edges = vec![k];
                        edges.extend(es);
                        out.push(Path::from_indices(g, &nodes, &edges));
                    }
                }
                if out.len() >= limit {
                    break;
                }
            }
        }
        PathMode::FromConditioning => {
            walker.banned = None;
            for &s in zs {
                walker.on_path[s] = true;
                walker.nodes = vec![s];
                walker.edges.clear();
                walker.dfs(s, None);
                walker.on_path[s] = false;
                out.extend(
                    walker
                        .found
                        .drain(..)
                        .map(|(ns, es)| Path::from_indices(g, &ns, &es))
                        .filter(Path::has_unstable_edge),
                );
            }
        }
    }
    out.sort();
    out.dedup();
    out
}

/// Outcome of a stability check, with witness paths when unstable.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "lowercase")]
pub enum StabilityVerdict {
    Stable,
    Unstable { witnesses: Vec<Path> },
}

impl StabilityVerdict {
    pub fn is_stable(&self) -> bool {
        matches!(self, StabilityVerdict::Stable)
    }

    pub fn witnesses(&self) -> &[Path] {
        match self {
            StabilityVerdict::Stable => &[],
            StabilityVerdict::Unstable { witnesses } => witnesses,
        }
    }
}

/// Every active path from a member of `z` to `y` given the rest of `z`,
/// stable or not, in lexicographic order.
pub fn active_paths(g: &CausalGraph, z: &[&str], y: &str) -> Result<Vec<Path>> {
    let (zs, yi) = resolve_stability_query(g, z, y)?;
    let n = g.node_count();
    let mut walker = Walker {
        g,
        in_cond: mask(n, &zs),
        anc: g.ancestor_mask(&zs),
        sink: yi,
        banned: None,
        on_path: vec![false; n],
        nodes: Vec::new(),
        edges: Vec::new(),
        found: Vec::new(),
        limit: PATH_LIMIT,
    };
    let mut out = Vec::new();
    for &s in &zs {
        walker.on_path[s] = true;
        walker.nodes = vec![s];
        walker.edges.clear();
        walker.dfs(s, None);
        walker.on_path[s] = false;
        out.extend(
            walker
                .found
                .drain(..)
                .map(|(ns, es)| Path::from_indices(g, &ns, &es)),
        );
    }
    out.sort();
    out.dedup();
    Ok(out)
}

/// Verdict of the path criterion without collecting witnesses.
pub(crate) fn path_stable(g: &CausalGraph, z: &[&str], y: &str) -> Result<bool> {
    let (zs, yi) = resolve_stability_query(g, z, y)?;
    Ok(collect_paths(g, &zs, yi, PathMode::Anchored, 1).is_empty())
}

/// Path criterion for stability of `P(y | z)`.
///
/// Stable iff no unstable edge points into `y` and no anchored active unstable
/// path reaches `y`. Both endpoints of an unstable bidirected edge count as heads.
pub fn is_stable_conditional(g: &CausalGraph, z: &[&str], y: &str) -> Result<StabilityVerdict> {
    let (zs, yi) = resolve_stability_query(g, z, y)?;
    let witnesses = collect_paths(g, &zs, yi, PathMode::Anchored, PATH_LIMIT);
    Ok(if witnesses.is_empty() {
        StabilityVerdict::Stable
    } else {
        StabilityVerdict::Unstable { witnesses }
    })
}
