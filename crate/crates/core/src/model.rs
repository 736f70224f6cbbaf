//! Fitted-model container and its JSON envelope.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dual::{CdForm, DualModel};
use crate::error::{Error, Result};
use crate::kernels::KernelSpec;
use crate::linalg::{from_rows, to_rows, Matrix};
use crate::mcca::PrimalModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Mcca,
    Gmcca,
    Gdmcca,
    Gkmcca,
    Pca,
}

impl Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Mcca => "mcca",
            Variant::Gmcca => "gmcca",
            Variant::Gdmcca => "gdmcca",
            Variant::Gkmcca => "gkmcca",
            Variant::Pca => "pca",
        }
    }

    /// Whether the fitted model carries explicit per-view loadings.
    pub fn is_primal(self) -> bool {
        matches!(self, Variant::Mcca | Variant::Gmcca | Variant::Pca)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mcca" => Ok(Variant::Mcca),
            "gmcca" => Ok(Variant::Gmcca),
            "gdmcca" => Ok(Variant::Gdmcca),
            "gkmcca" => Ok(Variant::Gkmcca),
            "pca" => Ok(Variant::Pca),
            other => Err(Error::Config(format!(
                "unknown variant '{other}' (expected mcca, gmcca, gdmcca, gkmcca or pca)"
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub enum Model {
    Primal(PrimalModel),
    Dual(DualModel),
}

impl Model {
    pub fn variant(&self) -> Variant {
        match self {
            Model::Primal(p) => p.variant,
            Model::Dual(d) => d.variant,
        }
    }

    pub fn s_hat(&self) -> &Matrix {
        match self {
            Model::Primal(p) => &p.s_hat,
            Model::Dual(d) => &d.s_hat,
        }
    }

    pub fn eigenvalues(&self) -> &[f64] {
        match self {
            Model::Primal(p) => &p.eigenvalues,
            Model::Dual(d) => &d.eigenvalues,
        }
    }

    pub fn gamma(&self) -> f64 {
        match self {
            Model::Primal(p) => p.gamma,
            Model::Dual(d) => d.gamma,
        }
    }

    pub fn view_means(&self) -> &[Vec<f64>] {
        match self {
            Model::Primal(p) => &p.view_means,
            Model::Dual(d) => &d.view_means,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&Envelope::from_model(self))?)
    }

    pub fn from_json(text: &str) -> Result<Model> {
        let env: Envelope = serde_json::from_str(text)?;
        env.into_model()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Model> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Model::from_json(&text)
    }
}

impl From<PrimalModel> for Model {
    fn from(m: PrimalModel) -> Self {
        Model::Primal(m)
    }
}

impl From<DualModel> for Model {
    fn from(m: DualModel) -> Self {
        Model::Dual(m)
    }
}

const FORMAT_VERSION: u32 = 1;

type Rows = Vec<Vec<f64>>;

#[derive(Serialize, Deserialize)]
struct KernelProvenance {
    #[serde(flatten)]
    spec: KernelSpec,
    centered: bool,
}

#[derive(Serialize, Deserialize)]
struct TrainInfo {
    num_samples: usize,
    dims: Vec<usize>,
    hashes: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct Envelope {
    format_version: u32,
    variant: Variant,
    gamma: f64,
    d: usize,
    eigenvalues: Vec<f64>,
    s_hat: Rows,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    loadings: Option<Vec<Rows>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    duals: Option<Vec<Rows>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    epsilon: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    cd_form: Option<CdForm>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    kernel: Option<Vec<KernelProvenance>>,
    view_means: Vec<Vec<f64>>,
    train: TrainInfo,
}

fn matrices(rows: Vec<Rows>) -> Result<Vec<Matrix>> {
    rows.iter().map(|r| from_rows(r)).collect()
}

impl Envelope {
    fn from_model(model: &Model) -> Self {
        match model {
            Model::Primal(p) => Envelope {
                format_version: FORMAT_VERSION,
                variant: p.variant,
                gamma: p.gamma,
                d: p.d,
                eigenvalues: p.eigenvalues.clone(),
                s_hat: to_rows(&p.s_hat),
                loadings: Some(p.loadings.iter().map(to_rows).collect()),
                duals: None,
                epsilon: None,
                cd_form: None,
                kernel: None,
                view_means: p.view_means.clone(),
                train: TrainInfo {
                    num_samples: p.s_hat.ncols(),
                    dims: p.loadings.iter().map(|u| u.nrows()).collect(),
                    hashes: p.train_hashes.clone(),
                },
            },
            Model::Dual(d) => Envelope {
                format_version: FORMAT_VERSION,
                variant: d.variant,
                gamma: d.gamma,
                d: d.d,
                eigenvalues: d.eigenvalues.clone(),
                s_hat: to_rows(&d.s_hat),
                loadings: None,
                duals: Some(d.duals.iter().map(to_rows).collect()),
                epsilon: Some(d.epsilon.clone()),
                cd_form: Some(d.cd_form),
                kernel: d.kernels.as_ref().map(|ks| {
                    ks.iter()
                        .map(|&spec| KernelProvenance {
                            spec,
                            centered: true,
                        })
                        .collect()
                }),
                view_means: d.view_means.clone(),
                train: TrainInfo {
                    num_samples: d.s_hat.ncols(),
                    dims: d.train_dims.clone(),
                    hashes: d.train_hashes.clone(),
                },
            },
        }
    }

    fn into_model(self) -> Result<Model> {
        if self.format_version != FORMAT_VERSION {
            return Err(Error::Input(format!(
                "unsupported model format version {}",
                self.format_version
            )));
        }
        let s_hat = from_rows(&self.s_hat)?;
        if s_hat.nrows() != self.d || self.eigenvalues.len() != self.d {
            return Err(Error::Input(format!(
                "model declares d = {} but stores {} source rows and {} eigenvalues",
                self.d,
                s_hat.nrows(),
                self.eigenvalues.len()
            )));
        }
        let n = s_hat.ncols();
        if self.variant.is_primal() {
            let loadings =
                matrices(self.loadings.ok_or_else(|| {
                    Error::Input(format!("{} model has no loadings", self.variant))
                })?)?;
            if loadings.iter().any(|u| u.ncols() != self.d) {
                return Err(Error::Input("loading matrices must have d columns".into()));
            }
            return Ok(Model::Primal(PrimalModel {
                variant: self.variant,
                s_hat,
                loadings,
                eigenvalues: self.eigenvalues,
                gamma: self.gamma,
                d: self.d,
                view_means: self.view_means,
                train_hashes: self.train.hashes,
            }));
        }
        let duals = matrices(
            self.duals
                .ok_or_else(|| Error::Input(format!("{} model has no duals", self.variant)))?,
        )?;
        if duals.iter().any(|a| a.shape() != (n, self.d)) {
            return Err(Error::Input(format!(
                "dual matrices must be {n} x {}",
                self.d
            )));
        }
        let kernels = self
            .kernel
            .map(|ks| ks.into_iter().map(|k| k.spec).collect::<Vec<_>>());
        if self.variant == Variant::Gkmcca && kernels.is_none() {
            return Err(Error::Input("gkmcca model has no kernel provenance".into()));
        }
        Ok(Model::Dual(DualModel {
            variant: self.variant,
            s_hat,
            duals,
            eigenvalues: self.eigenvalues,
            gamma: self.gamma,
            epsilon: self.epsilon.unwrap_or_default(),
            d: self.d,
            cd_form: self.cd_form.unwrap_or_default(),
            kernels,
            view_means: self.view_means,
            train_hashes: self.train.hashes,
            train_dims: self.train.dims,
        }))
    }
}
