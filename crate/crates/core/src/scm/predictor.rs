use std::collections::BTreeSet;
use std::fmt;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::{estimate_scm, CovarianceMatrix, DataTable, LinearGaussianScm};
use crate::error::{Error, Result};
use crate::graph::{Edge, EdgeKind};
use crate::hierarchy::PredictorSpec;

/// A linear auxiliary variable `id = base - Σ coef · node`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AvDefinition {
    pub id: String,
    pub base: String,
    pub terms: Vec<(String, f64)>,
}

impl fmt::Display for AvDefinition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} = {}", self.id, self.base)?;
        for (node, c) in &self.terms {
            if *c >= 0.0 {
                write!(f, " - {c} {node}")?;
            } else {
                write!(f, " + {} {node}", -c)?;
            }
        }
        Ok(())
    }
}

/// `Ŷ = Σ β_i F_i`; features are node ids or ids defined in `avs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearPredictor {
    pub target: String,
    pub features: Vec<String>,
    pub weights: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub avs: Vec<AvDefinition>,
}

impl LinearPredictor {
    /// Predictions for every row of `data`.
    pub fn predict(&self, data: &DataTable) -> Result<Vec<f64>> {
        // each feature as a sparse combination of data columns
        let mut combos: Vec<Vec<(usize, f64)>> = Vec::with_capacity(self.features.len());
        for f in &self.features {
            match self.avs.iter().find(|a| &a.id == f) {
                Some(av) => {
                    let mut c = vec![(data.column_index(&av.base)?, 1.0)];
                    for (node, coef) in &av.terms {
                        c.push((data.column_index(node)?, -coef));
                    }
                    combos.push(c);
                }
                None => combos.push(vec![(data.column_index(f)?, 1.0)]),
            }
        }
        Ok((0..data.n_rows())
            .map(|i| {
                let row = data.row(i);
                combos
                    .iter()
                    .zip(&self.weights)
                    .map(|(c, w)| w * c.iter().map(|&(j, a)| a * row[j]).sum::<f64>())
                    .sum()
            })
            .collect())
    }
}

/// Where auxiliary-variable coefficients come from.
#[derive(Debug, Clone, Copy)]
pub enum CoefficientSource<'a> {
    /// The model's own coefficients.
    Exact,
    /// Least-squares estimates from training data.
    Estimated(&'a DataTable),
}

pub(crate) fn resolve_model(
    m: &LinearGaussianScm,
    coeffs: CoefficientSource<'_>,
) -> Result<LinearGaussianScm> {
    match coeffs {
        CoefficientSource::Exact => Ok(m.clone()),
        CoefficientSource::Estimated(data) => estimate_scm(m, data),
    }
}

/// Solves `Σ_FF β = Σ_FY`, adding a small ridge when `Σ_FF` is near singular.
pub(crate) fn solve_weights(sff: DMatrix<f64>, sfy: &DVector<f64>) -> Result<DVector<f64>> {
    let k = sff.nrows();
    if k == 0 {
        return Ok(DVector::zeros(0));
    }
    let eig = SymmetricEigen::new(sff.clone()).eigenvalues;
    let max = eig.amax();
    let min = eig.min();
    let mut a = sff;
    if max.is_nan() || max <= 0.0 || min <= 1e-12 * max {
        let ridge = 1e-10 * a.trace() / k as f64;
        if ridge.is_nan() || ridge <= 0.0 {
            return Err(Error::Fit("feature covariance is zero".into()));
        }
        for i in 0..k {
            a[(i, i)] += ridge;
        }
    }
    let chol = a
        .cholesky()
        .ok_or_else(|| Error::Fit("feature covariance is singular after ridge".into()))?;
    Ok(chol.solve(sfy))
}

/// Population least-squares weights `β = Σ_FF⁻¹ Σ_FY`.
pub fn fit_predictor(sigma: &CovarianceMatrix, y: &str, f: &[String]) -> Result<LinearPredictor> {
    if f.iter().any(|x| x == y) {
        return Err(Error::Spec(format!("target `{y}` cannot be a feature")));
    }
    let beta = solve_weights(sigma.block(f)?, &sigma.cross(f, y)?)?;
    Ok(LinearPredictor {
        target: y.to_string(),
        features: f.to_vec(),
        weights: beta.iter().copied().collect(),
        avs: Vec::new(),
    })
}

/// Closed-form `E[(Y - Ŷ)²] = σ_yy - 2 βᵀ Σ_FY + βᵀ Σ_FF β`.
pub fn mse(p: &LinearPredictor, sigma: &CovarianceMatrix) -> Result<f64> {
    if p.features.is_empty() {
        return sigma.var(&p.target);
    }
    let extended;
    let s = if p.features.iter().all(|f| sigma.contains(f)) {
        sigma
    } else {
        let needed: Vec<AvDefinition> = p
            .avs
            .iter()
            .filter(|a| p.features.contains(&a.id))
            .cloned()
            .collect();
        extended = sigma.with_avs(&needed)?;
        &extended
    };
    let beta = DVector::from_column_slice(&p.weights);
    let sff = s.block(&p.features)?;
    let sfy = s.cross(&p.features, &p.target)?;
    let v = s.var(&p.target)? - 2.0 * beta.dot(&sfy) + (beta.transpose() * sff * &beta)[(0, 0)];
    Ok(v.max(0.0))
}

/// Conditional expectation of the target given every other observed node.
pub fn oracle_predictor(m: &LinearGaussianScm) -> Result<LinearPredictor> {
    let g = m.graph();
    let features: Vec<String> = g
        .candidate_features()
        .into_iter()
        .filter(|f| !m.is_aux(f))
        .collect();
    fit_predictor(&m.covariance()?, g.target(), &features)
}

fn unique_id(base: &str, taken: &BTreeSet<String>) -> String {
    let mut id = format!("{base}*");
    while taken.contains(&id) {
        id.push('\'');
    }
    id
}

/// Appends one auxiliary node `V*` per head of a deleted directed edge.
///
/// `V* = V - Σ λ_xv X` over the deleted edges `X -> V`; the coefficients come
/// from `coeffs`, the returned model keeps the true mechanisms of `m`.
pub fn extend_with_avs(
    m: &LinearGaussianScm,
    d: &[Edge],
    coeffs: CoefficientSource<'_>,
) -> Result<(LinearGaussianScm, Vec<AvDefinition>)> {
    let g = m.graph();
    for e in d {
        if e.kind == EdgeKind::Bidirected {
            return Err(Error::Unsupported(format!(
                "no auxiliary variable removes the bidirected edge `{e}`"
            )));
        }
        if !g.has_edge(e) {
            return Err(Error::Spec(format!("edge `{e}` is not in the graph")));
        }
    }
    if d.is_empty() {
        return Ok((m.clone(), Vec::new()));
    }
    let source = resolve_model(m, coeffs)?;
    let mut taken: BTreeSet<String> = g.nodes().iter().map(|n| n.id.clone()).collect();
    let heads: BTreeSet<&str> = d.iter().map(|e| e.head.as_str()).collect();
    let mut defs = Vec::new();
    let mut aux = Vec::new();
    for head in m.order().into_iter().filter(|v| heads.contains(v)) {
        let id = unique_id(head, &taken);
        taken.insert(id.clone());
        let mut terms: Vec<(String, f64)> = d
            .iter()
            .filter(|e| e.head == head)
            .map(|e| {
                (
                    e.tail.clone(),
                    source.coefficient(e).expect("edge checked above"),
                )
            })
            .collect();
        terms.sort_by(|a, b| a.0.cmp(&b.0));
        let mut parents = vec![(head.to_string(), 1.0)];
        parents.extend(terms.iter().map(|(x, c)| (x.clone(), -c)));
        aux.push((id.clone(), parents));
        defs.push(AvDefinition {
            id,
            base: head.to_string(),
            terms,
        });
    }
    Ok((m.with_aux_nodes(&aux)?, defs))
}

/// Reduced row echelon form; returns the pivot column of each nonzero row.
fn rref(m: &mut DMatrix<f64>, tol: f64) -> Vec<usize> {
    let (rows, cols) = m.shape();
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let (best, val) = (r..rows)
            .map(|i| (i, m[(i, c)].abs()))
            .fold((r, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if val <= tol {
            continue;
        }
        m.swap_rows(r, best);
        let p = m[(r, c)];
        for j in 0..cols {
            m[(r, j)] /= p;
        }
        for i in 0..rows {
            if i != r {
                let f = m[(i, c)];
                if f != 0.0 {
                    for j in 0..cols {
                        m[(i, j)] -= f * m[(r, j)];
                    }
                }
            }
        }
        pivots.push(c);
        r += 1;
    }
    pivots
}

/// Builds the predictor realizing `s` on `m`.
///
/// Features are the counterfactual versions of `Z ∪ W` under reference value
/// zero for every deleted edge. Heads of deleted edges that are ancestors of
/// the target, and every intervened node at level 2, keep their factual value.
/// Only combinations of counterfactual features that can be computed from
/// observed non-target columns are kept; each is realized as a plain node or
/// an auxiliary definition. Weights are fitted in the surgered model.
pub fn predictor_for_spec(
    m: &LinearGaussianScm,
    s: &PredictorSpec,
    coeffs: CoefficientSource<'_>,
) -> Result<LinearPredictor> {
    s.validate(m.graph())?;
    let model = resolve_model(m, coeffs)?;
    let g = model.graph();
    let n = g.node_count();
    let y = g.target_index();
    let lambda = model.lambda();

    let mut deleted = vec![vec![false; n]; n];
    let mut heads = vec![false; n];
    for e in s
        .deleted_edges
        .iter()
        .filter(|e| e.kind == EdgeKind::Directed)
    {
        let (t, h) = (
            g.node_index(&e.tail).unwrap(),
            g.node_index(&e.head).unwrap(),
        );
        deleted[h][t] = true;
        heads[h] = true;
    }
    let anc_y = g.ancestor_mask(&[y]);
    let plug_in: Vec<bool> = (0..n)
        .map(|v| heads[v] && (s.level == 2 || anc_y[v]))
        .collect();

    // rows[v]: the counterfactual of v as a combination of factual nodes
    let unit = |v: usize| {
        let mut r = DVector::zeros(n);
        r[v] = 1.0;
        r
    };
    let mut rows: Vec<DVector<f64>> = (0..n).map(unit).collect();
    let mut affected = vec![false; n];
    for &v in model.order_indices() {
        if plug_in[v] {
            continue;
        }
        let mut row = unit(v);
        for p in g.parent_indices(v) {
            let w = lambda[(v, p)];
            if deleted[v][p] {
                row[p] -= w;
                affected[v] = true;
            } else if affected[p] {
                row -= (unit(p) - &rows[p]) * w;
                affected[v] = true;
            }
        }
        rows[v] = row;
    }

    let mut feats: Vec<usize> = s
        .features()
        .iter()
        .map(|f| g.node_index(f).unwrap())
        .collect();
    let pos: Vec<usize> = {
        let mut p = vec![0; n];
        for (i, &v) in model.order_indices().iter().enumerate() {
            p[v] = i;
        }
        p
    };
    feats.sort_by_key(|&v| pos[v]);

    let forbidden: Vec<usize> = (0..n)
        .filter(|&v| v == y || !g.nodes()[v].observed)
        .collect();
    let mut mat = DMatrix::from_fn(forbidden.len(), feats.len(), |r, c| {
        rows[feats[c]][forbidden[r]]
    });
    let scale = mat.iter().fold(1.0_f64, |a, &b| a.max(b.abs()));
    let pivots = rref(&mut mat, 1e-10 * scale);

    let mut taken: BTreeSet<String> = g.nodes().iter().map(|n| n.id.clone()).collect();
    let mut features = Vec::new();
    let mut avs = Vec::new();
    let mut t_rows: Vec<DVector<f64>> = Vec::new();
    for j in (0..feats.len()).filter(|j| !pivots.contains(j)) {
        // null-space vector with free column j set to one
        let mut c = DVector::zeros(feats.len());
        c[j] = 1.0;
        for (r, &pc) in pivots.iter().enumerate() {
            c[pc] = -mat[(r, j)];
        }
        let mut realized = DVector::zeros(n);
        let mut in_surgered = DVector::zeros(n);
        for (i, &v) in feats.iter().enumerate() {
            if c[i] != 0.0 {
                realized += &rows[v] * c[i];
                in_surgered[v] += c[i];
            }
        }
        let base = feats[j];
        let rscale = realized.amax().max(1.0);
        let terms: Vec<(String, f64)> = (0..n)
            .filter(|&k| k != base && realized[k].abs() > 1e-12 * rscale)
            .map(|k| (g.id(k).to_string(), -realized[k]))
            .collect();
        if terms.is_empty() && (realized[base] - 1.0).abs() <= 1e-12 * rscale {
            features.push(g.id(base).to_string());
        } else {
            let id = unique_id(g.id(base), &taken);
            taken.insert(id.clone());
            features.push(id.clone());
            avs.push(AvDefinition {
                id,
                base: g.id(base).to_string(),
                terms,
            });
        }
        t_rows.push(in_surgered);
    }

    let weights = if t_rows.is_empty() {
        Vec::new()
    } else {
        let surg = model.surgered(&s.deleted_edges)?.covariance()?;
        let t = DMatrix::from_fn(t_rows.len(), n, |i, k| t_rows[i][k]);
        let sff = surg.transform(&t);
        let sfy = &t * surg.matrix().column(y);
        solve_weights(sff, &sfy)?.iter().copied().collect()
    };
    Ok(LinearPredictor {
        target: g.target().to_string(),
        features,
        weights,
        avs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;
    use crate::graph::{CausalGraph, Node};
    use crate::hierarchy::optimal_stable;

    fn two_node() -> LinearGaussianScm {
        let g = CausalGraph::new(
            vec![Node::observed("X"), Node::observed("Y")],
            vec![(Edge::directed("X", "Y"), false)],
            "Y",
        )
        .unwrap();
        LinearGaussianScm::with_noise(g, vec![(Edge::directed("X", "Y"), 2.0)], 1.0).unwrap()
    }

    #[test]
    fn regression_recovers_edge_and_residual_noise() {
        let m = two_node();
        let p = oracle_predictor(&m).unwrap();
        assert!((p.weights[0] - 2.0).abs() < 1e-12);
        assert!((mse(&p, &m.covariance().unwrap()).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn empty_feature_set_predicts_the_mean() {
        let sigma = two_node().covariance().unwrap();
        let p = fit_predictor(&sigma, "Y", &[]).unwrap();
        assert!(p.weights.is_empty());
        assert!((mse(&p, &sigma).unwrap() - 5.0).abs() < 1e-12);
    }

    #[test]
    fn triangle_av_extension() {
        let m = corpus::triangle_scm(5.0, 1.0, 1.0);
        let (ext, defs) =
            extend_with_avs(&m, &[Edge::directed("X", "Z")], CoefficientSource::Exact).unwrap();
        assert_eq!(defs[0].id, "Z*");
        assert_eq!(defs[0].terms, vec![("X".to_string(), 1.0)]);
        assert_eq!(ext.coefficient(&Edge::directed("Z", "Z*")), Some(1.0));
        assert_eq!(ext.coefficient(&Edge::directed("X", "Z*")), Some(-1.0));
        let s = ext.covariance().unwrap();
        let base = m.covariance().unwrap();
        let expect = base.get("Z", "X").unwrap() - base.var("X").unwrap();
        assert!((s.get("Z*", "X").unwrap() - expect).abs() < 1e-15);
        assert!((expect - base.get("Y", "X").unwrap()).abs() < 1e-15);
        let p = fit_predictor(&s, "Y", &["Z*".to_string()]).unwrap();
        assert!((p.weights[0] - 0.5).abs() < 1e-12);
        assert!((mse(&p, &s).unwrap() - 0.005).abs() < 1e-12);
    }

    #[test]
    fn bidirected_deletion_has_no_av() {
        let g = corpus::confounded_child();
        let coeffs = vec![
            (Edge::directed("X", "Y"), 1.0),
            (Edge::directed("Y", "Z"), 1.0),
        ];
        let m = LinearGaussianScm::new(
            g,
            coeffs,
            Vec::new(),
            vec![(Edge::bidirected("Y", "Z"), 0.004)],
        )
        .unwrap();
        let r = extend_with_avs(&m, &[Edge::bidirected("Y", "Z")], CoefficientSource::Exact);
        assert!(matches!(r, Err(Error::Unsupported(_))));
        assert!(extend_with_avs(&m, &[], CoefficientSource::Exact)
            .unwrap()
            .1
            .is_empty());
    }

    #[test]
    fn optimal_triangle_predictor_uses_only_z_star() {
        let m = corpus::triangle_scm(5.0, 1.0, 1.0);
        let spec = optimal_stable(m.graph()).unwrap();
        let p = predictor_for_spec(&m, &spec, CoefficientSource::Exact).unwrap();
        assert_eq!(p.features, vec!["Z*".to_string()]);
        assert_eq!(p.avs[0].base, "Z");
        assert_eq!(p.avs[0].terms.len(), 1);
        assert_eq!(p.avs[0].terms[0].0, "X");
        assert!((p.avs[0].terms[0].1 - 1.0).abs() < 1e-12);
        assert!((p.weights[0] - 0.5).abs() < 1e-12);
        for lyx in [-10.0, 0.0, 5.0, 40.0] {
            let env = m.with_coefficient(&Edge::directed("Y", "X"), lyx).unwrap();
            let v = mse(&p, &env.covariance().unwrap()).unwrap();
            assert!((v - 0.005).abs() < 1e-12, "lyx={lyx}: {v}");
        }
    }

    #[test]
    fn x_is_inert_next_to_z_star_in_the_surgered_triangle() {
        let m = corpus::triangle_scm(5.0, 1.0, 1.0)
            .with_coefficient(&Edge::directed("Y", "X"), 0.0)
            .unwrap();
        let (ext, _) =
            extend_with_avs(&m, &[Edge::directed("X", "Z")], CoefficientSource::Exact).unwrap();
        let s = ext.covariance().unwrap();
        let both = fit_predictor(&s, "Y", &["Z*".to_string(), "X".to_string()]).unwrap();
        let alone = fit_predictor(&s, "Y", &["Z*".to_string()]).unwrap();
        assert!(both.weights[1].abs() < 1e-9);
        assert!((both.weights[0] - alone.weights[0]).abs() < 1e-9);
        assert!((mse(&both, &s).unwrap() - mse(&alone, &s).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn oracle_spec_matches_oracle_predictor() {
        let g = corpus::confounded_child();
        let coeffs = vec![
            (Edge::directed("X", "Y"), 0.7),
            (Edge::directed("Y", "Z"), -1.2),
        ];
        let m = LinearGaussianScm::new(
            g,
            coeffs,
            Vec::new(),
            vec![(Edge::bidirected("Y", "Z"), 0.004)],
        )
        .unwrap();
        let spec = PredictorSpec::level1(["X", "Z"]);
        let a = predictor_for_spec(&m, &spec, CoefficientSource::Exact).unwrap();
        let b = oracle_predictor(&m).unwrap();
        assert_eq!(a.features, b.features);
        for (x, y) in a.weights.iter().zip(&b.weights) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn av_display() {
        let av = AvDefinition {
            id: "Z*".into(),
            base: "Z".into(),
            terms: vec![("X".into(), 1.5), ("W".into(), -2.0)],
        };
        assert_eq!(av.to_string(), "Z* = Z - 1.5 X + 2 W");
    }
}
