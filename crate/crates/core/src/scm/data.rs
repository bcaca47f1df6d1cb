use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{CovarianceMatrix, LinearGaussianScm};
use crate::error::{Error, Result};
use crate::graph::EdgeKind;

/// Row-major table of samples with one column per observed node.
#[derive(Debug, Clone, PartialEq)]
pub struct DataTable {
    columns: Vec<String>,
    values: Vec<f64>,
}

impl DataTable {
    pub fn new(columns: Vec<String>, values: Vec<f64>) -> Result<Self> {
        if columns.is_empty() {
            return Err(Error::Model("data table needs at least one column".into()));
        }
        if !values.len().is_multiple_of(columns.len()) {
            return Err(Error::Model(format!(
                "{} values do not fill rows of {} columns",
                values.len(),
                columns.len()
            )));
        }
        Ok(DataTable { columns, values })
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn n_rows(&self) -> usize {
        self.values.len() / self.columns.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let w = self.columns.len();
        &self.values[i * w..(i + 1) * w]
    }

    pub fn column_index(&self, id: &str) -> Result<usize> {
        self.columns
            .iter()
            .position(|c| c == id)
            .ok_or_else(|| Error::Index(format!("no column `{id}` in data table")))
    }

    pub fn column(&self, id: &str) -> Result<Vec<f64>> {
        let j = self.column_index(id)?;
        Ok((0..self.n_rows()).map(|i| self.row(i)[j]).collect())
    }

    /// Uncentred second moments `E[x xᵀ]`, matching the mean-zero model.
    pub fn second_moments(&self) -> CovarianceMatrix {
        let w = self.columns.len();
        let n = self.n_rows();
        let x = DMatrix::from_row_slice(n, w, &self.values);
        let m = x.transpose() * &x / n as f64;
        CovarianceMatrix::from_parts(self.columns.clone(), (&m + m.transpose()) * 0.5)
            .expect("gram matrix is symmetric and square")
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(&self.columns)?;
        for i in 0..self.n_rows() {
            wr.write_record(self.row(i).iter().map(|v| format!("{v:?}")))?;
        }
        wr.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let columns: Vec<String> = rd.headers()?.iter().map(str::to_string).collect();
        let mut values = Vec::new();
        for (line, rec) in rd.records().enumerate() {
            let rec = rec?;
            for field in rec.iter() {
                let v: f64 = field.trim().parse().map_err(|_| {
                    Error::Model(format!("row {}: `{field}` is not a number", line + 1))
                })?;
                values.push(v);
            }
        }
        Self::new(columns, values)
    }
}

impl LinearGaussianScm {
    /// Ancestral sampling of `n` rows over the observed nodes; deterministic in `seed`.
    pub fn sample(&self, n: usize, seed: u64) -> Result<DataTable> {
        if n == 0 {
            return Err(Error::Model("sample size must be at least 1".into()));
        }
        let g = self.graph();
        let k = g.node_count();
        let eig = SymmetricEigen::new(self.exo_cov().clone());
        let scale = DVector::from_iterator(k, eig.eigenvalues.iter().map(|&d| d.max(0.0).sqrt()));
        let root = &eig.eigenvectors * DMatrix::from_diagonal(&scale);

        let observed: Vec<usize> = (0..k).filter(|&v| g.nodes()[v].observed).collect();
        let parents: Vec<Vec<(usize, f64)>> = (0..k)
            .map(|v| {
                g.parent_indices(v)
                    .into_iter()
                    .map(|p| (p, self.lambda()[(v, p)]))
                    .collect()
            })
            .collect();

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut eps = DVector::<f64>::zeros(k);
        let mut val = vec![0.0; k];
        let mut values = Vec::with_capacity(n * observed.len());
        for _ in 0..n {
            for e in eps.iter_mut() {
                *e = StandardNormal.sample(&mut rng);
            }
            let u = &root * &eps;
            for &v in self.order_indices() {
                val[v] = u[v] + parents[v].iter().map(|&(p, w)| w * val[p]).sum::<f64>();
            }
            values.extend(observed.iter().map(|&v| val[v]));
        }
        DataTable::new(
            observed.iter().map(|&v| g.id(v).to_string()).collect(),
            values,
        )
    }
}

/// Least-squares estimate of every structural equation from `data`.
///
/// Each node is regressed on its parents without intercept; the residual mean
/// square becomes its noise variance. Requires a fully observed graph without
/// bidirected edges.
pub fn estimate_scm(m: &LinearGaussianScm, data: &DataTable) -> Result<LinearGaussianScm> {
    let g = m.graph();
    if let Some(n) = g.nodes().iter().find(|n| !n.observed || m.is_aux(&n.id)) {
        return Err(Error::Unsupported(format!(
            "cannot estimate equations with latent or auxiliary node `{}`",
            n.id
        )));
    }
    if let Some(e) = g
        .edges()
        .into_iter()
        .find(|e| e.kind == EdgeKind::Bidirected)
    {
        return Err(Error::Unsupported(format!(
            "cannot estimate exogenous covariance of `{e}` from data"
        )));
    }
    let mom = data.second_moments();
    let mut coefficients = Vec::new();
    let mut noise = Vec::new();
    for node in g.nodes() {
        let v = node.id.as_str();
        let parents: Vec<String> = g.parents(v).into_iter().map(str::to_string).collect();
        let vv = mom.var(v)?;
        if parents.is_empty() {
            noise.push((v.to_string(), vv));
            continue;
        }
        let a = mom.block(&parents)?;
        let b = mom.cross(&parents, v)?;
        let beta = a
            .cholesky()
            .ok_or_else(|| Error::Fit(format!("parents of `{v}` are collinear in the data")))?
            .solve(&b);
        let resid = (vv - beta.dot(&b)).max(f64::MIN_POSITIVE);
        for (p, w) in parents.iter().zip(beta.iter()) {
            coefficients.push((crate::graph::Edge::directed(p.clone(), v), *w));
        }
        noise.push((v.to_string(), resid));
    }
    LinearGaussianScm::new(g.clone(), coefficients, noise, Vec::new())
}
