//! Primal MAXVAR MCCA and its graph-regularized form (GMCCA).
//!
//! Given centered views `X_m` (`D_m x N`) and a graph Laplacian `L`, the shared
//! sources are the top-`d` eigenvectors of
//!
//! ```text
//! C = sum_m X_m^T (X_m X_m^T)^{-1} X_m - gamma L
//! ```
//!
//! and the loadings are `U_m = (X_m X_m^T)^{-1} X_m S^T`. At the optimum the
//! cost `sum_m ||U_m^T X_m - S||_F^2 + gamma Tr(S L S^T)` equals
//! `M d - sum_i lambda_i`. With `gamma = 0` this is plain MAXVAR MCCA.

use nalgebra::Cholesky;
use nalgebra::Dyn;

use crate::data::MultiviewDataset;
use crate::error::{Error, Result};
use crate::graph::GraphLaplacian;
use crate::linalg::{self, sym_eig_topd, trace_quadratic, Matrix};
use crate::model::Variant;

/// Relative threshold on the smallest eigenvalue of `X_m X_m^T`.
pub const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct PrimalModel {
    pub variant: Variant,
    /// `d x N` shared sources, orthonormal rows.
    pub s_hat: Matrix,
    /// Per-view loadings, `D_m x d`.
    pub loadings: Vec<Matrix>,
    pub eigenvalues: Vec<f64>,
    pub gamma: f64,
    pub d: usize,
    /// Feature means removed from the training views before fitting.
    pub view_means: Vec<Vec<f64>>,
    pub train_hashes: Vec<String>,
}

impl PrimalModel {
    pub fn num_views(&self) -> usize {
        self.loadings.len()
    }
}

/// Cholesky factor of `X X^T`, after checking it is safely nonsingular.
fn covariance_factor(x: &Matrix, view: usize) -> Result<Cholesky<f64, Dyn>> {
    let cov = linalg::symmetrize(&(x * x.transpose()));
    let min_eig = linalg::sym_eigenvalues(&cov)[0];
    let threshold = RANK_TOL * cov.norm();
    if x.nrows() > x.ncols() || !(min_eig > threshold) {
        return Err(Error::RankDeficient {
            view,
            min_eig,
            threshold,
        });
    }
    cov.cholesky().ok_or(Error::RankDeficient {
        view,
        min_eig,
        threshold,
    })
}

fn check_laplacian(l: &GraphLaplacian, n: usize) -> Result<()> {
    if l.n() != n {
        return Err(Error::Dimension(format!(
            "graph has {} nodes but data has {n} samples",
            l.n()
        )));
    }
    Ok(())
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma >= 0.0) || !gamma.is_finite() {
        return Err(Error::Config(format!(
            "gamma must be finite and >= 0, got {gamma}"
        )));
    }
    Ok(())
}

/// `sum_m X_m^T (X_m X_m^T)^{-1} X_m - gamma L`, symmetrized.
///
/// Fails with [`Error::RankDeficient`] when some `X_m X_m^T` is (numerically)
/// singular, which always happens for `D_m > N`.
pub fn build_c(data: &MultiviewDataset, l: &GraphLaplacian, gamma: f64) -> Result<Matrix> {
    check_gamma(gamma)?;
    let n = data.num_samples();
    check_laplacian(l, n)?;
    let mut c = Matrix::zeros(n, n);
    for (m, x) in data.views().iter().enumerate() {
        let chol = covariance_factor(x, m)?;
        c += x.transpose() * chol.solve(x);
    }
    if gamma != 0.0 {
        c -= l.matrix() * gamma;
    }
    Ok(linalg::symmetrize(&c))
}

/// Fit GMCCA. Uncentered data is centered first; the removed means are kept in
/// the model so new samples can be shifted consistently.
pub fn fit_gmcca(
    data: &MultiviewDataset,
    l: &GraphLaplacian,
    gamma: f64,
    d: usize,
) -> Result<PrimalModel> {
    let n = data.num_samples();
    if d == 0 || d > n {
        return Err(Error::Dimension(format!(
            "d must lie in [1, N = {n}], got {d}"
        )));
    }
    let (centered, view_means) = data.center();
    let c = build_c(&centered, l, gamma)?;
    let eig = sym_eig_topd(&c, d)?;
    let s_hat = eig.vectors.transpose();
    let st = eig.vectors;
    let mut loadings = Vec::with_capacity(centered.num_views());
    for (m, x) in centered.views().iter().enumerate() {
        let chol = covariance_factor(x, m)?;
        loadings.push(chol.solve(&(x * &st)));
    }
    Ok(PrimalModel {
        variant: Variant::Gmcca,
        s_hat,
        loadings,
        eigenvalues: eig.values,
        gamma,
        d,
        view_means,
        train_hashes: data.hashes(),
    })
}

/// Plain MAXVAR MCCA (no graph).
pub fn fit_mcca(data: &MultiviewDataset, d: usize) -> Result<PrimalModel> {
    let mut model = fit_gmcca(data, &GraphLaplacian::zeros(data.num_samples()), 0.0, d)?;
    model.variant = Variant::Mcca;
    Ok(model)
}

fn check_loadings(loadings: &[Matrix], data: &MultiviewDataset) -> Result<usize> {
    if loadings.len() != data.num_views() {
        return Err(Error::Dimension(format!(
            "{} loading matrices for {} views",
            loadings.len(),
            data.num_views()
        )));
    }
    let d = loadings.first().map(|u| u.ncols()).unwrap_or(0);
    for (m, (u, x)) in loadings.iter().zip(data.views()).enumerate() {
        if u.nrows() != x.nrows() || u.ncols() != d {
            return Err(Error::Dimension(format!(
                "view {m}: loading is {}x{}, expected {}x{d}",
                u.nrows(),
                u.ncols(),
                x.nrows()
            )));
        }
    }
    Ok(d)
}

/// `sum_m ||U_m^T X_m - S||_F^2 + gamma Tr(S L S^T)` at the model's parameters,
/// evaluated on `data` exactly as given (pass the centered training views).
pub fn primal_objective(
    model: &PrimalModel,
    data: &MultiviewDataset,
    l: &GraphLaplacian,
) -> Result<f64> {
    check_loadings(&model.loadings, data)?;
    check_laplacian(l, data.num_samples())?;
    if model.s_hat.ncols() != data.num_samples() {
        return Err(Error::Dimension("S and data disagree on N".into()));
    }
    let mut total = 0.0;
    for (u, x) in model.loadings.iter().zip(data.views()) {
        total += (u.transpose() * x - &model.s_hat).norm_squared();
    }
    Ok(total + model.gamma * trace_quadratic(&model.s_hat, l.matrix())?)
}

/// Pairwise disagreement `sum_{m < m'} ||U_m^T X_m - U_{m'}^T X_{m'}||_F^2`.
pub fn sumcor_objective(loadings: &[Matrix], data: &MultiviewDataset) -> Result<f64> {
    check_loadings(loadings, data)?;
    let proj: Vec<Matrix> = loadings
        .iter()
        .zip(data.views())
        .map(|(u, x)| u.transpose() * x)
        .collect();
    let mut total = 0.0;
    for a in 0..proj.len() {
        for b in (a + 1)..proj.len() {
            total += (&proj[a] - &proj[b]).norm_squared();
        }
    }
    Ok(total)
}

/// `sum_m U_m^T X_m^new`, a `d x T` embedding. No centering is applied; shift
/// new samples by `model.view_means` first when the training data was not
/// already centered.
pub fn transform_primal(model: &PrimalModel, new_views: &[Matrix]) -> Result<Matrix> {
    project_views(&model.loadings, new_views)
}

pub(crate) fn project_views(loadings: &[Matrix], new_views: &[Matrix]) -> Result<Matrix> {
    if new_views.len() != loadings.len() {
        return Err(Error::Dimension(format!(
            "model has {} views, got {}",
            loadings.len(),
            new_views.len()
        )));
    }
    let t = new_views[0].ncols();
    let d = loadings[0].ncols();
    let mut out = Matrix::zeros(d, t);
    for (m, (u, x)) in loadings.iter().zip(new_views).enumerate() {
        if x.nrows() != u.nrows() || x.ncols() != t {
            return Err(Error::Dimension(format!(
                "view {m}: expected {} features and {t} samples, got {}x{}",
                u.nrows(),
                x.nrows(),
                x.ncols()
            )));
        }
        out += u.transpose() * x;
    }
    Ok(out)
}
