//! Aligned multiview data: `M` feature matrices `D_m x N` sharing sample columns.

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::linalg::{check_finite, row_means, subtract_row_means, Matrix};

#[derive(Debug, Clone)]
pub struct MultiviewDataset {
    views: Vec<Matrix>,
    centered: bool,
}

impl MultiviewDataset {
    /// Validates that all views are finite and share the sample count `N >= 2`.
    ///
    /// A single view is accepted (it is the degenerate `M = 1` case of the
    /// projector construction); correlation analysis proper needs `M >= 2`.
    pub fn new(views: Vec<Matrix>) -> Result<Self> {
        if views.is_empty() {
            return Err(Error::Input("dataset has no views".into()));
        }
        let n = views[0].ncols();
        for (m, v) in views.iter().enumerate() {
            check_finite(v, &format!("view {m}"))?;
            if v.ncols() != n {
                return Err(Error::Dimension(format!(
                    "view {m} has {} samples, view 0 has {n}",
                    v.ncols()
                )));
            }
        }
        if n < 2 {
            return Err(Error::Input(format!("need at least 2 samples, got {n}")));
        }
        Ok(Self {
            views,
            centered: false,
        })
    }

    pub fn views(&self) -> &[Matrix] {
        &self.views
    }

    pub fn view(&self, m: usize) -> &Matrix {
        &self.views[m]
    }

    pub fn num_views(&self) -> usize {
        self.views.len()
    }

    pub fn num_samples(&self) -> usize {
        self.views[0].ncols()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.views.iter().map(|v| v.nrows()).collect()
    }

    pub fn is_centered(&self) -> bool {
        self.centered
    }

    /// Per-view feature means (length `D_m` each).
    pub fn means(&self) -> Vec<Vec<f64>> {
        self.views.iter().map(row_means).collect()
    }

    /// Remove each feature's mean across samples. Returns the means removed.
    pub fn center(&self) -> (MultiviewDataset, Vec<Vec<f64>>) {
        let means = self.means();
        let views = self
            .views
            .iter()
            .zip(&means)
            .map(|(v, mu)| subtract_row_means(v, mu))
            .collect();
        (
            MultiviewDataset {
                views,
                centered: true,
            },
            means,
        )
    }

    /// Subtract externally supplied per-view means (e.g. training means from a
    /// fitted model) from every sample.
    pub fn center_with(&self, means: &[Vec<f64>]) -> Result<MultiviewDataset> {
        if means.len() != self.views.len() {
            return Err(Error::Dimension(format!(
                "{} mean vectors for {} views",
                means.len(),
                self.views.len()
            )));
        }
        let mut views = Vec::with_capacity(self.views.len());
        for (m, (v, mu)) in self.views.iter().zip(means).enumerate() {
            if mu.len() != v.nrows() {
                return Err(Error::Dimension(format!(
                    "view {m}: {} means for {} features",
                    mu.len(),
                    v.nrows()
                )));
            }
            views.push(subtract_row_means(v, mu));
        }
        Ok(MultiviewDataset {
            views,
            centered: false,
        })
    }

    /// Columns `idx` of every view, in order.
    pub fn select(&self, idx: &[usize]) -> Result<MultiviewDataset> {
        let n = self.num_samples();
        if let Some(&bad) = idx.iter().find(|&&i| i >= n) {
            return Err(Error::Input(format!("sample {bad} out of range (N = {n})")));
        }
        let views = self.views.iter().map(|v| v.select_columns(idx)).collect();
        MultiviewDataset::new(views)
    }

    /// SHA-256 of each view (dimensions followed by row-major little-endian f64s).
    pub fn hashes(&self) -> Vec<String> {
        self.views.iter().map(matrix_hash).collect()
    }
}

pub fn matrix_hash(m: &Matrix) -> String {
    let mut h = Sha256::new();
    h.update((m.nrows() as u64).to_le_bytes());
    h.update((m.ncols() as u64).to_le_bytes());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            h.update(m[(i, j)].to_le_bytes());
        }
    }
    hex::encode(h.finalize())
}

/// Concatenate views vertically into a `(sum D_m) x N` matrix.
pub fn concatenate(data: &MultiviewDataset) -> Matrix {
    let total: usize = data.dims().iter().sum();
    let n = data.num_samples();
    let mut out = Matrix::zeros(total, n);
    let mut offset = 0;
    for v in data.views() {
        out.rows_mut(offset, v.nrows()).copy_from(v);
        offset += v.nrows();
    }
    out
}
