//! Stable distributions at the three levels: conditioning, intervention and
//! counterfactual edge deletion.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{
    active_paths, delete_edges, edges_into, is_stable_conditional, mutilate_do, path_stable,
    CausalGraph, Edge, EdgeKind, Path, StabilityVerdict,
};

/// A distribution `P(Y | Z, do(W))` with edges `D` deleted.
///
/// Level 1 has `W = D = ∅`, level 2 has `D` equal to the edges into `W`, and
/// level 3 keeps `W = ∅` with an arbitrary `D` whose directed edges avoid the
/// target. Features are `Z ∪ W`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PredictorSpec {
    pub level: u8,
    #[serde(default)]
    pub conditioning: BTreeSet<String>,
    #[serde(default)]
    pub interventions: BTreeSet<String>,
    #[serde(default)]
    pub deleted_edges: Vec<Edge>,
}

fn set<'a>(ids: impl IntoIterator<Item = &'a str>) -> BTreeSet<String> {
    ids.into_iter().map(str::to_string).collect()
}

fn canonical_edges(d: impl IntoIterator<Item = Edge>) -> Vec<Edge> {
    let mut d: Vec<Edge> = d.into_iter().map(Edge::canonical).collect();
    d.sort();
    d.dedup();
    d
}

impl PredictorSpec {
    pub fn level1<'a>(z: impl IntoIterator<Item = &'a str>) -> Self {
        PredictorSpec {
            level: 1,
            conditioning: set(z),
            interventions: BTreeSet::new(),
            deleted_edges: Vec::new(),
        }
    }

    pub fn level2<'a>(
        g: &CausalGraph,
        w: impl IntoIterator<Item = &'a str>,
        z: impl IntoIterator<Item = &'a str>,
    ) -> Result<Self> {
        let w = set(w);
        let ws: Vec<&str> = w.iter().map(String::as_str).collect();
        let d = edges_into(g, &ws)?;
        Ok(PredictorSpec {
            level: 2,
            conditioning: set(z),
            interventions: w,
            deleted_edges: canonical_edges(d),
        })
    }

    pub fn level3<'a>(
        z: impl IntoIterator<Item = &'a str>,
        d: impl IntoIterator<Item = Edge>,
    ) -> Self {
        PredictorSpec {
            level: 3,
            conditioning: set(z),
            interventions: BTreeSet::new(),
            deleted_edges: canonical_edges(d),
        }
    }

    /// `Z ∪ W`.
    pub fn features(&self) -> BTreeSet<String> {
        self.conditioning
            .union(&self.interventions)
            .cloned()
            .collect()
    }

    /// Fills in the derived deleted-edge set of a level-2 spec and sorts edges.
    pub fn normalized(mut self, g: &CausalGraph) -> Result<Self> {
        if self.level == 2 && self.deleted_edges.is_empty() {
            let ws: Vec<&str> = self.interventions.iter().map(String::as_str).collect();
            self.deleted_edges = edges_into(g, &ws)?;
        }
        self.deleted_edges = canonical_edges(self.deleted_edges);
        self.validate(g)?;
        Ok(self)
    }

    pub fn validate(&self, g: &CausalGraph) -> Result<()> {
        let y = g.target();
        match self.level {
            1 if !self.interventions.is_empty() || !self.deleted_edges.is_empty() => {
                return Err(Error::Spec(
                    "a level-1 spec has no interventions or deletions".into(),
                ))
            }
            3 if !self.interventions.is_empty() => {
                return Err(Error::Spec(
                    "a level-3 spec lists its features as conditioning".into(),
                ))
            }
            1..=3 => {}
            l => return Err(Error::Spec(format!("unknown level {l}"))),
        }
        if let Some(v) = self.conditioning.intersection(&self.interventions).next() {
            return Err(Error::Spec(format!(
                "`{v}` is both conditioned and intervened"
            )));
        }
        for v in self.features() {
            if v == y {
                return Err(Error::Spec(format!("target `{y}` cannot be a feature")));
            }
            if !g.contains(&v) {
                return Err(Error::Spec(format!("unknown node `{v}`")));
            }
            if !g.is_observed(&v) {
                return Err(Error::Spec(format!(
                    "latent node `{v}` cannot be a feature"
                )));
            }
        }
        for e in &self.deleted_edges {
            if !g.has_edge(e) {
                return Err(Error::Spec(format!("edge `{e}` is not in the graph")));
            }
        }
        if self.level == 2 {
            let ws: Vec<&str> = self.interventions.iter().map(String::as_str).collect();
            if canonical_edges(edges_into(g, &ws)?) != canonical_edges(self.deleted_edges.clone()) {
                return Err(Error::Spec(
                    "level-2 deleted edges must be exactly the edges into the interventions".into(),
                ));
            }
        }
        if self.level == 3 {
            if let Some(e) = self
                .deleted_edges
                .iter()
                .find(|e| e.kind == EdgeKind::Directed && e.head == y)
            {
                return Err(Error::Spec(format!(
                    "deleting `{e}` would replace the target by a counterfactual"
                )));
            }
        }
        Ok(())
    }

    /// The graph the spec's stability is judged on.
    pub fn surgered_graph(&self, g: &CausalGraph) -> Result<CausalGraph> {
        if self.level == 2 {
            let ws: Vec<&str> = self.interventions.iter().map(String::as_str).collect();
            mutilate_do(g, &ws)
        } else {
            delete_edges(g, &self.deleted_edges)
        }
    }

    fn sort_key(&self) -> (usize, Vec<String>, usize, Vec<String>) {
        (
            self.interventions.len(),
            self.interventions.iter().cloned().collect(),
            self.conditioning.len(),
            self.conditioning.iter().cloned().collect(),
        )
    }
}

/// Path-criterion verdict of `s` after its surgery.
pub fn stable_for_spec(g: &CausalGraph, s: &PredictorSpec) -> Result<StabilityVerdict> {
    s.validate(g)?;
    let surg = s.surgered_graph(g)?;
    let f = s.features();
    let z: Vec<&str> = f.iter().map(String::as_str).collect();
    is_stable_conditional(&surg, &z, g.target())
}

fn quick_stable(g: &CausalGraph, s: &PredictorSpec) -> Result<bool> {
    let surg = s.surgered_graph(g)?;
    let f = s.features();
    let z: Vec<&str> = f.iter().map(String::as_str).collect();
    path_stable(&surg, &z, g.target())
}

/// Bounds on exhaustive enumeration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnumerationLimits {
    /// Level 1 enumerates `2^n` subsets of `n` candidate features.
    pub level1_features: usize,
    /// Level 2 enumerates `3^n` disjoint pairs.
    pub level2_features: usize,
}

impl Default for EnumerationLimits {
    fn default() -> Self {
        EnumerationLimits {
            level1_features: 20,
            level2_features: 12,
        }
    }
}

fn subset(cands: &[String], mask: u64) -> Vec<&str> {
    cands
        .iter()
        .enumerate()
        .filter(|(i, _)| mask >> i & 1 == 1)
        .map(|(_, c)| c.as_str())
        .collect()
}

#[cfg(feature = "parallel")]
fn map_masks<T: Send>(n: u64, f: impl Fn(u64) -> T + Sync + Send) -> Vec<T> {
    use rayon::prelude::*;
    (0..n).into_par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn map_masks<T>(n: u64, f: impl Fn(u64) -> T) -> Vec<T> {
    (0..n).map(f).collect()
}

/// Every `Z ⊆ O \ {Y}` with stable `P(Y | Z)`, ordered by size then lexicographically.
pub fn enumerate_level1(
    g: &CausalGraph,
    limits: &EnumerationLimits,
) -> Result<Vec<BTreeSet<String>>> {
    let cands = g.candidate_features();
    let n = cands.len();
    if n > limits.level1_features {
        return Err(Error::Capacity {
            what: "level-1 subsets",
            needed: 1u128 << n,
            limit: 1u128 << limits.level1_features,
        });
    }
    let y = g.target();
    let verdicts = map_masks(1u64 << n, |mask| {
        let z = subset(&cands, mask);
        path_stable(g, &z, y).map(|ok| ok.then(|| set(z)))
    });
    let mut out: Vec<BTreeSet<String>> = verdicts
        .into_iter()
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    out.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    Ok(out)
}

/// Every disjoint `(W, Z)` with stable `P(Y | Z, do(W))`.
///
/// Pairs whose mutilated graphs coincide and whose feature sets `Z ∪ W` are
/// equal are merged, keeping the one with the fewest interventions.
pub fn enumerate_level2(g: &CausalGraph, limits: &EnumerationLimits) -> Result<Vec<PredictorSpec>> {
    let cands = g.candidate_features();
    let n = cands.len();
    if n > limits.level2_features {
        return Err(Error::Capacity {
            what: "level-2 pairs",
            needed: 3u128.pow(n as u32),
            limit: 3u128.pow(limits.level2_features as u32),
        });
    }
    let full = (1u64 << n) - 1;
    let per_w = map_masks(1u64 << n, |wm| -> Result<Vec<(String, PredictorSpec)>> {
        let w = subset(&cands, wm);
        let spec_w = PredictorSpec::level2(g, w.iter().copied(), [])?;
        let key = spec_w.surgered_graph(g)?.canonical_key();
        let rest = full & !wm;
        let mut found = Vec::new();
        // iterate submasks of `rest`
        let mut zm = rest;
        loop {
            let mut s = spec_w.clone();
            s.conditioning = set(subset(&cands, zm));
            if quick_stable(g, &s)? {
                found.push((key.clone(), s));
            }
            if zm == 0 {
                break;
            }
            zm = (zm - 1) & rest;
        }
        Ok(found)
    });
    let mut best: BTreeMap<(String, BTreeSet<String>), PredictorSpec> = BTreeMap::new();
    for found in per_w {
        for (key, s) in found? {
            let k = (key, s.features());
            match best.get(&k) {
                Some(prev) if prev.sort_key() <= s.sort_key() => {}
                _ => {
                    best.insert(k, s);
                }
            }
        }
    }
    let mut out: Vec<PredictorSpec> = best.into_values().collect();
    out.sort_by_key(PredictorSpec::sort_key);
    Ok(out)
}

/// Deletes exactly the unstable edges and conditions on every other observed node.
pub fn optimal_stable(g: &CausalGraph) -> Result<PredictorSpec> {
    let y = g.target();
    if let Some(e) = g.unstable_edges().into_iter().find(|e| e.points_into(y)) {
        return Err(Error::NoStableSolution(format!(
            "unstable edge `{e}` points into the target `{y}`"
        )));
    }
    let cands = g.candidate_features();
    Ok(PredictorSpec::level3(
        cands.iter().map(String::as_str),
        g.unstable_edges(),
    ))
}

fn require_stable(g: &CausalGraph, s: &PredictorSpec, level: u8) -> Result<()> {
    if s.level != level {
        return Err(Error::Spec(format!(
            "expected a level-{level} spec, got level {}",
            s.level
        )));
    }
    if !stable_for_spec(g, s)?.is_stable() {
        return Err(Error::Spec("the input spec is not stable".into()));
    }
    Ok(())
}

/// A stable `P(Y | Z)` as the level-2 distribution `P(Y | Z, do(∅))`.
pub fn embed_level1_as_level2(g: &CausalGraph, s: &PredictorSpec) -> Result<PredictorSpec> {
    require_stable(g, s, 1)?;
    Ok(PredictorSpec {
        level: 2,
        ..s.clone()
    })
}

/// A stable `P(Y | Z, do(W))` as a counterfactual that deletes every edge into `W`.
pub fn convert_level2_to_level3(g: &CausalGraph, s: &PredictorSpec) -> Result<PredictorSpec> {
    require_stable(g, s, 2)?;
    Ok(PredictorSpec {
        level: 3,
        conditioning: s.features(),
        interventions: BTreeSet::new(),
        deleted_edges: s.deleted_edges.clone(),
    })
}

/// Active paths from features to the target that avoid unstable edges, in the
/// spec's surgered graph.
pub fn retained_paths(g: &CausalGraph, s: &PredictorSpec) -> Result<Vec<Path>> {
    s.validate(g)?;
    let surg = s.surgered_graph(g)?;
    let f = s.features();
    let z: Vec<&str> = f.iter().map(String::as_str).collect();
    Ok(active_paths(&surg, &z, g.target())?
        .into_iter()
        .filter(|p| !p.has_unstable_edge())
        .collect())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathComparison {
    pub retained_a: Vec<Path>,
    pub retained_b: Vec<Path>,
    /// Retained by `b` but not by `a`.
    pub only_b: Vec<Path>,
    /// Retained by `a` but not by `b`.
    pub only_a: Vec<Path>,
}

pub fn compare_retained_paths(
    g: &CausalGraph,
    a: &PredictorSpec,
    b: &PredictorSpec,
) -> Result<PathComparison> {
    let ra = retained_paths(g, a)?;
    let rb = retained_paths(g, b)?;
    let only_b = rb.iter().filter(|p| !ra.contains(p)).cloned().collect();
    let only_a = ra.iter().filter(|p| !rb.contains(p)).cloned().collect();
    Ok(PathComparison {
        retained_a: ra,
        retained_b: rb,
        only_b,
        only_a,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Retention {
    pub spec: PredictorSpec,
    pub retained: usize,
    /// Paths kept by the optimal spec but not by this one.
    pub missing: Vec<Path>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HierarchyReport {
    pub target: String,
    pub level1: Vec<PredictorSpec>,
    pub level2: Vec<PredictorSpec>,
    pub optimal: Option<PredictorSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub no_stable_reason: Option<String>,
    pub optimal_retained: usize,
    pub retention: Vec<Retention>,
}

pub fn hierarchy_report(g: &CausalGraph, limits: &EnumerationLimits) -> Result<HierarchyReport> {
    let level1: Vec<PredictorSpec> = enumerate_level1(g, limits)?
        .iter()
        .map(|z| PredictorSpec::level1(z.iter().map(String::as_str)))
        .collect();
    let level2 = enumerate_level2(g, limits)?;
    let (optimal, no_stable_reason) = match optimal_stable(g) {
        Ok(s) => (Some(s), None),
        Err(Error::NoStableSolution(msg)) => (None, Some(msg)),
        Err(e) => return Err(e),
    };
    let mut retention = Vec::new();
    let mut optimal_retained = 0;
    if let Some(opt) = &optimal {
        let best = retained_paths(g, opt)?;
        optimal_retained = best.len();
        for s in level1.iter().chain(&level2) {
            let mine = retained_paths(g, s)?;
            retention.push(Retention {
                spec: s.clone(),
                retained: mine.len(),
                missing: best.iter().filter(|p| !mine.contains(p)).cloned().collect(),
            });
        }
    }
    Ok(HierarchyReport {
        target: g.target().to_string(),
        level1,
        level2,
        optimal,
        no_stable_reason,
        optimal_retained,
        retention,
    })
}
