use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};

use super::predictor::AvDefinition;
use crate::error::{Error, Result};

/// Node-indexed symmetric covariance matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceMatrix {
    ids: Vec<String>,
    index: HashMap<String, usize>,
    m: DMatrix<f64>,
}

impl CovarianceMatrix {
    pub fn from_parts(ids: Vec<String>, m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != ids.len() || m.ncols() != ids.len() {
            return Err(Error::Model(format!(
                "covariance is {}x{} but has {} ids",
                m.nrows(),
                m.ncols(),
                ids.len()
            )));
        }
        let scale = m.iter().fold(1.0_f64, |a, &b| a.max(b.abs()));
        if (&m - m.transpose()).amax() > 1e-12 * scale {
            return Err(Error::Model("covariance is not symmetric".into()));
        }
        let mut index = HashMap::with_capacity(ids.len());
        for (i, id) in ids.iter().enumerate() {
            if index.insert(id.clone(), i).is_some() {
                return Err(Error::Model(format!("duplicate covariance id `{id}`")));
            }
        }
        Ok(CovarianceMatrix { ids, index, m })
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    pub fn index_of(&self, id: &str) -> Result<usize> {
        self.index
            .get(id)
            .copied()
            .ok_or_else(|| Error::Index(format!("`{id}` is not indexed by the covariance")))
    }

    pub fn get(&self, a: &str, b: &str) -> Result<f64> {
        Ok(self.m[(self.index_of(a)?, self.index_of(b)?)])
    }

    pub fn var(&self, a: &str) -> Result<f64> {
        self.get(a, a)
    }

    /// `Σ_FF` for the listed ids.
    pub fn block(&self, rows: &[String]) -> Result<DMatrix<f64>> {
        let idx = self.indices(rows)?;
        Ok(DMatrix::from_fn(idx.len(), idx.len(), |i, j| {
            self.m[(idx[i], idx[j])]
        }))
    }

    /// `Σ_F,y` for the listed ids.
    pub fn cross(&self, rows: &[String], col: &str) -> Result<DVector<f64>> {
        let idx = self.indices(rows)?;
        let c = self.index_of(col)?;
        Ok(DVector::from_fn(idx.len(), |i, _| self.m[(idx[i], c)]))
    }

    fn indices(&self, ids: &[String]) -> Result<Vec<usize>> {
        ids.iter().map(|id| self.index_of(id)).collect()
    }

    /// Extends the index by linear auxiliaries `id = base - Σ coef · node`.
    ///
    /// Ids already indexed are kept as they are. Definitions may only refer to
    /// ids present before the call.
    pub fn with_avs(&self, avs: &[AvDefinition]) -> Result<Self> {
        let fresh: Vec<&AvDefinition> = avs.iter().filter(|a| !self.contains(&a.id)).collect();
        if fresh.is_empty() {
            return Ok(self.clone());
        }
        let n = self.ids.len();
        let k = fresh.len();
        let mut t = DMatrix::<f64>::zeros(n + k, n);
        for i in 0..n {
            t[(i, i)] = 1.0;
        }
        let mut ids = self.ids.clone();
        for (r, av) in fresh.iter().enumerate() {
            t[(n + r, self.index_of(&av.base)?)] += 1.0;
            for (node, coef) in &av.terms {
                t[(n + r, self.index_of(node)?)] -= coef;
            }
            ids.push(av.id.clone());
        }
        let m = &t * &self.m * t.transpose();
        Self::from_parts(ids, (&m + m.transpose()) * 0.5)
    }

    /// Covariance of arbitrary linear combinations, one row of `t` per combination.
    pub(crate) fn transform(&self, t: &DMatrix<f64>) -> DMatrix<f64> {
        let m = t * &self.m * t.transpose();
        (&m + m.transpose()) * 0.5
    }

    /// Elementwise mean of covariances sharing one index.
    pub fn mean_of<'a>(items: impl IntoIterator<Item = &'a CovarianceMatrix>) -> Result<Self> {
        let mut it = items.into_iter();
        let first = it
            .next()
            .ok_or_else(|| Error::Model("mean of an empty set of covariances".into()))?;
        let mut acc = first.m.clone();
        let mut count = 1.0;
        for c in it {
            if c.ids != first.ids {
                return Err(Error::Index("covariances index different ids".into()));
            }
            acc += &c.m;
            count += 1.0;
        }
        Self::from_parts(first.ids.clone(), acc / count)
    }
}
