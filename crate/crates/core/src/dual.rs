//! Dual (GDMCCA) and kernel (GKMCCA) graph-regularized MCCA.
//!
//! Both forms work with `N x N` similarity matrices `G_m` (`X_m^T X_m` for the
//! dual, centered kernels `K_m` for the kernel form). The shared sources are
//! the top-`d` eigenvectors of
//!
//! ```text
//! C = sum_m G_m (G_m + eps_m I)^{-1} - gamma L
//! ```
//!
//! and the duals are `A_m = (G_m + eps_m I)^{-1} S^T`. Substituting these duals
//! back into the ridge-penalized cost gives `M d - Tr(S C S^T)`, so this `C` is
//! the one whose leading eigenvectors minimize it. The variant without the
//! leading `G_m` factor is available as [`CdForm::Printed`] for comparison.

use serde::{Deserialize, Serialize};

use crate::data::MultiviewDataset;
use crate::error::{Error, Result};
use crate::graph::GraphLaplacian;
use crate::kernels::{
    center_cross_kernel, center_kernel, cross_kernel, kernel_from_spec, KernelMatrix, KernelSpec,
};
use crate::linalg::{self, ridge_solve, sym_eig_topd, trace_quadratic, Matrix};
use crate::mcca::project_views;
use crate::model::Variant;

/// Which dual eigenproblem matrix to assemble.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CdForm {
    /// `sum_m G_m (G_m + eps I)^{-1} - gamma L`, the minimizer of the dual cost.
    #[default]
    Derived,
    /// `sum_m (G_m + eps I)^{-1} - gamma L`.
    Printed,
}

impl std::str::FromStr for CdForm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "derived" => Ok(CdForm::Derived),
            "printed" => Ok(CdForm::Printed),
            other => Err(Error::Config(format!(
                "cd form must be 'derived' or 'printed', got '{other}'"
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct DualModel {
    pub variant: Variant,
    /// `d x N`, orthonormal rows.
    pub s_hat: Matrix,
    /// Per-view duals, `N x d`.
    pub duals: Vec<Matrix>,
    pub eigenvalues: Vec<f64>,
    pub gamma: f64,
    /// Ridge weight per view.
    pub epsilon: Vec<f64>,
    pub d: usize,
    pub cd_form: CdForm,
    /// Kernel per view; `None` for the linear dual model.
    pub kernels: Option<Vec<KernelSpec>>,
    /// Feature means removed before fitting (dual model only, empty otherwise).
    pub view_means: Vec<Vec<f64>>,
    /// Training data fingerprints; empty when fitted from bare kernels.
    pub train_hashes: Vec<String>,
    pub train_dims: Vec<usize>,
}

impl DualModel {
    pub fn num_views(&self) -> usize {
        self.duals.len()
    }

    pub fn num_train(&self) -> usize {
        self.s_hat.ncols()
    }

    fn check_train(&self, train: &MultiviewDataset) -> Result<()> {
        if train.num_views() != self.num_views() || train.num_samples() != self.num_train() {
            return Err(Error::Dimension(format!(
                "model was trained on {} views x {} samples, got {} x {}",
                self.num_views(),
                self.num_train(),
                train.num_views(),
                train.num_samples()
            )));
        }
        if !self.train_dims.is_empty() && train.dims() != self.train_dims {
            return Err(Error::Dimension(format!(
                "training feature dimensions {:?} do not match model {:?}",
                train.dims(),
                self.train_dims
            )));
        }
        if !self.train_hashes.is_empty() && train.hashes() != self.train_hashes {
            return Err(Error::Input(
                "supplied training data does not match the data the model was fitted on".into(),
            ));
        }
        Ok(())
    }
}

/// Broadcast a scalar ridge weight or validate a per-view list.
pub fn expand_epsilon(epsilon: &[f64], views: usize) -> Result<Vec<f64>> {
    let eps = match epsilon.len() {
        1 => vec![epsilon[0]; views],
        k if k == views => epsilon.to_vec(),
        k => {
            return Err(Error::Config(format!(
                "epsilon must be a scalar or one value per view ({views}), got {k} values"
            )))
        }
    };
    if let Some(e) = eps.iter().find(|e| !(**e > 0.0) || !e.is_finite()) {
        return Err(Error::Config(format!(
            "epsilon must be > 0 (the unregularized dual ignores the data), got {e}"
        )));
    }
    Ok(eps)
}

fn check_common(l: &GraphLaplacian, n: usize, gamma: f64, d: usize) -> Result<()> {
    if l.n() != n {
        return Err(Error::Dimension(format!(
            "graph has {} nodes but data has {n} samples",
            l.n()
        )));
    }
    if !(gamma >= 0.0) || !gamma.is_finite() {
        return Err(Error::Config(format!(
            "gamma must be finite and >= 0, got {gamma}"
        )));
    }
    if d == 0 || d > n {
        return Err(Error::Dimension(format!(
            "d must lie in [1, N = {n}], got {d}"
        )));
    }
    Ok(())
}

fn per_view<T>(view: usize, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Singular(msg) => Error::Singular(format!("view {view}: {msg}")),
        other => other,
    })
}

/// Assemble the eigenproblem matrix from similarity matrices `G_m`.
pub fn build_dual_matrix(
    grams: &[Matrix],
    l: &GraphLaplacian,
    gamma: f64,
    epsilon: &[f64],
    form: CdForm,
) -> Result<Matrix> {
    let n = l.n();
    let mut c = Matrix::zeros(n, n);
    for (m, (g, &eps)) in grams.iter().zip(epsilon).enumerate() {
        if g.nrows() != n || g.ncols() != n {
            return Err(Error::Dimension(format!(
                "view {m}: similarity matrix is {}x{}, expected {n}x{n}",
                g.nrows(),
                g.ncols()
            )));
        }
        let rhs = match form {
            CdForm::Derived => g.clone(),
            CdForm::Printed => Matrix::identity(n, n),
        };
        c += per_view(m, ridge_solve(g, eps, &rhs))?;
    }
    if gamma != 0.0 {
        c -= l.matrix() * gamma;
    }
    Ok(linalg::symmetrize(&c))
}

#[allow(clippy::too_many_arguments)]
fn solve_dual(
    grams: &[Matrix],
    l: &GraphLaplacian,
    gamma: f64,
    epsilon: &[f64],
    d: usize,
    form: CdForm,
) -> Result<(Matrix, Vec<Matrix>, Vec<f64>)> {
    let c = build_dual_matrix(grams, l, gamma, epsilon, form)?;
    let eig = sym_eig_topd(&c, d)?;
    let mut duals = Vec::with_capacity(grams.len());
    for (m, (g, &eps)) in grams.iter().zip(epsilon).enumerate() {
        duals.push(per_view(m, ridge_solve(g, eps, &eig.vectors))?);
    }
    Ok((eig.vectors.transpose(), duals, eig.values))
}

/// Fit graph-regularized dual MCCA on (auto-centered) views.
pub fn fit_gdmcca(
    data: &MultiviewDataset,
    l: &GraphLaplacian,
    gamma: f64,
    epsilon: &[f64],
    d: usize,
    form: CdForm,
) -> Result<DualModel> {
    let n = data.num_samples();
    check_common(l, n, gamma, d)?;
    let eps = expand_epsilon(epsilon, data.num_views())?;
    let (centered, view_means) = data.center();
    let grams: Vec<Matrix> = centered
        .views()
        .iter()
        .map(|x| linalg::symmetrize(&(x.transpose() * x)))
        .collect();
    let (s_hat, duals, eigenvalues) = solve_dual(&grams, l, gamma, &eps, d, form)?;
    Ok(DualModel {
        variant: Variant::Gdmcca,
        s_hat,
        duals,
        eigenvalues,
        gamma,
        epsilon: eps,
        d,
        cd_form: form,
        kernels: None,
        view_means,
        train_hashes: data.hashes(),
        train_dims: data.dims(),
    })
}

/// Fit graph-regularized kernel MCCA on centered kernel matrices.
pub fn fit_gkmcca(
    kernels: &[KernelMatrix],
    l: &GraphLaplacian,
    gamma: f64,
    epsilon: &[f64],
    d: usize,
) -> Result<DualModel> {
    if kernels.is_empty() {
        return Err(Error::Input("no kernel matrices".into()));
    }
    let n = kernels[0].n();
    for (m, k) in kernels.iter().enumerate() {
        if !k.is_centered() {
            return Err(Error::State(format!("kernel for view {m} is not centered")));
        }
        if k.n() != n {
            return Err(Error::Dimension(format!(
                "kernel for view {m} is {}x{0}, view 0 is {n}x{n}",
                k.n()
            )));
        }
    }
    check_common(l, n, gamma, d)?;
    let eps = expand_epsilon(epsilon, kernels.len())?;
    let grams: Vec<Matrix> = kernels.iter().map(|k| k.matrix().clone()).collect();
    let (s_hat, duals, eigenvalues) = solve_dual(&grams, l, gamma, &eps, d, CdForm::Derived)?;
    Ok(DualModel {
        variant: Variant::Gkmcca,
        s_hat,
        duals,
        eigenvalues,
        gamma,
        epsilon: eps,
        d,
        cd_form: CdForm::Derived,
        kernels: Some(kernels.iter().map(|k| k.spec()).collect()),
        view_means: Vec::new(),
        train_hashes: Vec::new(),
        train_dims: Vec::new(),
    })
}

/// Build and center one kernel per view, then fit GKMCCA. The model records
/// the training fingerprints so out-of-sample transforms can verify them.
pub fn fit_gkmcca_from_data(
    data: &MultiviewDataset,
    specs: &[KernelSpec],
    l: &GraphLaplacian,
    gamma: f64,
    epsilon: &[f64],
    d: usize,
) -> Result<DualModel> {
    if specs.len() != data.num_views() {
        return Err(Error::Config(format!(
            "{} kernel specs for {} views",
            specs.len(),
            data.num_views()
        )));
    }
    let kernels = data
        .views()
        .iter()
        .zip(specs)
        .map(|(x, &spec)| center_kernel(&kernel_from_spec(x, spec)?))
        .collect::<Result<Vec<_>>>()?;
    let mut model = fit_gkmcca(&kernels, l, gamma, epsilon, d)?;
    model.train_hashes = data.hashes();
    model.train_dims = data.dims();
    Ok(model)
}

/// Ridge-penalized dual cost
/// `sum_m ||A_m^T G_m - S||_F^2 + gamma Tr(S L S^T) + sum_m eps_m Tr(A_m^T G_m A_m)`.
pub fn dual_objective(
    s: &Matrix,
    duals: &[Matrix],
    grams: &[Matrix],
    l: &GraphLaplacian,
    gamma: f64,
    epsilon: &[f64],
) -> Result<f64> {
    if duals.len() != grams.len() || epsilon.len() != grams.len() {
        return Err(Error::Dimension(format!(
            "{} duals, {} similarity matrices, {} ridge weights",
            duals.len(),
            grams.len(),
            epsilon.len()
        )));
    }
    let mut total = gamma * trace_quadratic(s, l.matrix())?;
    for ((a, g), &eps) in duals.iter().zip(grams).zip(epsilon) {
        if a.nrows() != g.nrows() || a.ncols() != s.nrows() {
            return Err(Error::Dimension("dual shape does not match S and G".into()));
        }
        let ga = g * a;
        total += (ga.transpose() - s).norm_squared();
        total += eps * a.component_mul(&ga).sum();
    }
    Ok(total)
}

/// Loadings implied by the duals, `U_m = X_m A_m` on centered training views.
pub fn implied_loadings(model: &DualModel, train: &MultiviewDataset) -> Result<Vec<Matrix>> {
    if model.kernels.is_some() {
        return Err(Error::State(
            "kernel models have no explicit loadings; use transform_kernel".into(),
        ));
    }
    model.check_train(train)?;
    let centered = train.center_with(&model.view_means)?;
    Ok(centered
        .views()
        .iter()
        .zip(&model.duals)
        .map(|(x, a)| x * a)
        .collect())
}

/// `sum_m U_m^T X_m^new` with `U_m = X_m^train A_m`. New views are used as
/// given; subtract `model.view_means` first to embed raw samples.
pub fn transform_dual(
    model: &DualModel,
    train: &MultiviewDataset,
    new_views: &[Matrix],
) -> Result<Matrix> {
    let loadings = implied_loadings(model, train)?;
    project_views(&loadings, new_views)
}

/// Out-of-sample embedding for kernel models: `sum_m A_m^T K_m^new` where the
/// cross kernel is centered against the training kernel.
pub fn transform_kernel(
    model: &DualModel,
    train: &MultiviewDataset,
    new_views: &[Matrix],
) -> Result<Matrix> {
    let specs = model
        .kernels
        .as_ref()
        .ok_or_else(|| Error::State("model has no kernel provenance; use transform_dual".into()))?;
    model.check_train(train)?;
    if new_views.len() != specs.len() {
        return Err(Error::Dimension(format!(
            "model has {} views, got {}",
            specs.len(),
            new_views.len()
        )));
    }
    let t = new_views[0].ncols();
    let mut out = Matrix::zeros(model.d, t);
    for (m, ((x_train, x_new), spec)) in train.views().iter().zip(new_views).zip(specs).enumerate()
    {
        if x_new.ncols() != t {
            return Err(Error::Dimension(format!(
                "view {m} has {} samples, view 0 has {t}",
                x_new.ncols()
            )));
        }
        let kbar = kernel_from_spec(x_train, *spec)?;
        let cross = cross_kernel(*spec, x_train, x_new)?;
        let centered = center_cross_kernel(&cross, kbar.matrix())?;
        out += model.duals[m].transpose() * centered;
    }
    Ok(out)
}
