//! Graph-regularized multiview canonical correlation analysis.
//!
//! Given `M` views `X_m` (`D_m x N`, one column per sample) and a graph over
//! the samples, the models here find a `d`-dimensional shared representation
//! `S` that every view can reconstruct linearly while staying smooth over the
//! graph:
//!
//! * [`mcca::fit_gmcca`] — primal form, needs `D_m < N` and full-rank views;
//! * [`dual::fit_gdmcca`] — ridge-regularized dual form for `D_m > N`;
//! * [`dual::fit_gkmcca`] — kernel form on centered kernel matrices.
//!
//! Supporting modules build graphs and kernels, compute the generalization
//! bound for fitted loadings, and evaluate embeddings.

// `!(x > 0.0)` is deliberate: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod data;
pub mod dual;
pub mod error;
pub mod eval;
pub mod graph;
pub mod io;
pub mod kernels;
pub mod linalg;
pub mod mcca;
pub mod model;
pub mod synth;

pub use data::MultiviewDataset;
pub use dual::{CdForm, DualModel};
pub use error::{Error, Result};
pub use graph::{GraphAdjacency, GraphLaplacian};
pub use kernels::{KernelMatrix, KernelSpec};
pub use linalg::Matrix;
pub use mcca::PrimalModel;
pub use model::{Model, Variant};
