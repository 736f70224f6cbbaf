//! Pipeline configuration: a JSON file whose keys can each be overridden by a
//! `--key value` flag.

use std::path::{Path, PathBuf};

use clap::Args;
use mvgcca::kernels::Bandwidth;
use mvgcca::{CdForm, Error, Result, Variant};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelFamily {
    #[default]
    Linear,
    Gaussian,
}

impl std::str::FromStr for KernelFamily {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(KernelFamily::Linear),
            "gaussian" => Ok(KernelFamily::Gaussian),
            _ => Err(Error::Config(format!(
                "kernel must be 'linear' or 'gaussian', got '{s}'"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum AutoTag {
    Auto,
}

/// Gaussian bandwidth: a number or `"auto"` (mean pairwise distance).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Sigma {
    Fixed(f64),
    #[serde(with = "auto_tag")]
    #[default]
    Auto,
}

mod auto_tag {
    use super::AutoTag;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(s: S) -> Result<S::Ok, S::Error> {
        AutoTag::Auto.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<(), D::Error> {
        AutoTag::deserialize(d).map(|_| ())
    }
}

impl Sigma {
    pub fn bandwidth(self) -> Bandwidth {
        match self {
            Sigma::Fixed(s) => Bandwidth::Fixed(s),
            Sigma::Auto => Bandwidth::Auto,
        }
    }
}

impl std::str::FromStr for Sigma {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if s == "auto" {
            return Ok(Sigma::Auto);
        }
        s.parse::<f64>()
            .ok()
            .filter(|v| *v > 0.0 && v.is_finite())
            .map(Sigma::Fixed)
            .ok_or_else(|| {
                Error::Config(format!(
                    "sigma must be 'auto' or a positive number, got '{s}'"
                ))
            })
    }
}

/// Where the sample graph comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum GraphSource {
    /// No graph (every regularizer term vanishes).
    #[default]
    None,
    /// Tab-separated `i j w` edge list with 0-based ids.
    File { path: PathBuf },
    /// Mutual-or k-nearest-neighbour graph on kernel similarities of one view
    /// (or of all views concatenated when `view` is absent).
    Knn {
        k1: usize,
        #[serde(default)]
        view: Option<usize>,
        #[serde(default = "default_knn_kernel")]
        kernel: KernelFamily,
        #[serde(default)]
        sigma: Sigma,
    },
    /// Cosine similarities to the `k2` most similar same-class samples.
    Supervised {
        k2: usize,
        #[serde(default)]
        view: Option<usize>,
    },
    Combine {
        graphs: Vec<GraphSource>,
        weights: Vec<f64>,
    },
}

fn default_knn_kernel() -> KernelFamily {
    KernelFamily::Gaussian
}

/// Scalar or per-view ridge weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Epsilon {
    Scalar(f64),
    PerView(Vec<f64>),
}

impl Epsilon {
    pub fn values(&self) -> Vec<f64> {
        match self {
            Epsilon::Scalar(v) => vec![*v],
            Epsilon::PerView(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    #[default]
    Clustering,
    Classification,
    Ranking,
}

impl std::str::FromStr for Task {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "clustering" => Ok(Task::Clustering),
            "classification" => Ok(Task::Classification),
            "ranking" => Ok(Task::Ranking),
            _ => Err(Error::Config(format!(
                "task must be clustering, classification or ranking, got '{s}'"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub views: Vec<PathBuf>,
    pub variant: Variant,
    pub d: usize,
    pub gamma: f64,
    pub epsilon: Epsilon,
    pub kernel: KernelFamily,
    pub sigma: Sigma,
    pub graph: GraphSource,
    pub cd_form: CdForm,
    pub seed: u64,
    pub delta: f64,
    pub labels: Option<PathBuf>,
    pub task: Task,
    /// Cluster count for k-means; defaults to the number of classes.
    pub clusters: Option<usize>,
    /// Neighbours voting in classification.
    pub neighbors: usize,
    /// Ranking cutoffs `L`.
    pub cutoffs: Vec<usize>,
    /// Seed items averaged into each ranking query.
    pub query_size: usize,
    /// Independent seed-item draws for ranking, macro-averaged.
    pub repeats: usize,
    pub gammas: Vec<f64>,
    /// Per-class share of samples used for training in `sweep`.
    pub train_fraction: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            views: Vec::new(),
            variant: Variant::Gmcca,
            d: 2,
            gamma: 0.0,
            epsilon: Epsilon::Scalar(0.1),
            kernel: KernelFamily::Linear,
            sigma: Sigma::Auto,
            graph: GraphSource::None,
            cd_form: CdForm::Derived,
            seed: 0,
            delta: 0.1,
            labels: None,
            task: Task::Clustering,
            clusters: None,
            neighbors: 1,
            cutoffs: vec![10],
            query_size: 5,
            repeats: 1,
            gammas: vec![0.0, 0.01, 0.1, 1.0, 10.0],
            train_fraction: 0.5,
        }
    }
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<T>()
                .map_err(|_| Error::Config(format!("invalid {what} list entry '{t}'")))
        })
        .collect()
}

/// Flags shared by every pipeline subcommand. Each one overrides the key of
/// the same name in `--config`.
#[derive(Debug, Clone, Default, Args)]
pub struct ConfigArgs {
    /// JSON configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// View CSV files (rows are samples, no header).
    #[arg(long, num_args = 1..)]
    pub views: Option<Vec<PathBuf>>,
    /// mcca, gmcca, gdmcca, gkmcca or pca.
    #[arg(long)]
    pub variant: Option<Variant>,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Ridge weight, or a comma-separated list with one weight per view.
    #[arg(long)]
    pub epsilon: Option<String>,
    /// linear or gaussian.
    #[arg(long)]
    pub kernel: Option<KernelFamily>,
    /// Gaussian bandwidth, or `auto`.
    #[arg(long)]
    pub sigma: Option<Sigma>,
    /// Edge-list graph file (overrides any graph in the config).
    #[arg(long)]
    pub graph: Option<PathBuf>,
    /// Build a k-nearest-neighbour kernel graph with this k.
    #[arg(long, conflicts_with_all = ["graph", "supervised"])]
    pub knn: Option<usize>,
    /// Build a supervised cosine graph with this many same-class neighbours.
    #[arg(long, conflicts_with = "graph")]
    pub supervised: Option<usize>,
    /// View used to build a knn/supervised graph (default: all views concatenated).
    #[arg(long)]
    pub graph_view: Option<usize>,
    /// derived or printed.
    #[arg(long)]
    pub cd_form: Option<CdForm>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub delta: Option<f64>,
    /// `id,label` CSV.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// clustering, classification or ranking.
    #[arg(long)]
    pub task: Option<Task>,
    #[arg(long)]
    pub clusters: Option<usize>,
    #[arg(long)]
    pub neighbors: Option<usize>,
    /// Comma-separated ranking cutoffs.
    #[arg(long)]
    pub cutoffs: Option<String>,
    #[arg(long)]
    pub query_size: Option<usize>,
    #[arg(long)]
    pub repeats: Option<usize>,
    /// Comma-separated gamma grid for `sweep`.
    #[arg(long)]
    pub gammas: Option<String>,
    #[arg(long)]
    pub train_fraction: Option<f64>,
}

impl ConfigArgs {
    pub fn resolve(&self) -> Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(path) => load_config(path)?,
            None => PipelineConfig::default(),
        };
        if let Some(v) = &self.views {
            cfg.views = v.clone();
        }
        if let Some(v) = self.variant {
            cfg.variant = v;
        }
        if let Some(v) = self.d {
            cfg.d = v;
        }
        if let Some(v) = self.gamma {
            cfg.gamma = v;
        }
        if let Some(v) = &self.epsilon {
            let list: Vec<f64> = parse_list(v, "epsilon")?;
            cfg.epsilon = if list.len() == 1 {
                Epsilon::Scalar(list[0])
            } else {
                Epsilon::PerView(list)
            };
        }
        if let Some(v) = self.kernel {
            cfg.kernel = v;
        }
        if let Some(v) = self.sigma {
            cfg.sigma = v;
        }
        if let Some(v) = self.cd_form {
            cfg.cd_form = v;
        }
        if let Some(path) = &self.graph {
            cfg.graph = GraphSource::File { path: path.clone() };
        }
        if let Some(k1) = self.knn {
            cfg.graph = GraphSource::Knn {
                k1,
                view: self.graph_view,
                kernel: default_knn_kernel(),
                sigma: self.sigma.unwrap_or_default(),
            };
        }
        if let Some(k2) = self.supervised {
            cfg.graph = GraphSource::Supervised {
                k2,
                view: self.graph_view,
            };
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        if let Some(v) = self.delta {
            cfg.delta = v;
        }
        if let Some(v) = &self.labels {
            cfg.labels = Some(v.clone());
        }
        if let Some(v) = self.task {
            cfg.task = v;
        }
        if let Some(v) = self.clusters {
            cfg.clusters = Some(v);
        }
        if let Some(v) = self.neighbors {
            cfg.neighbors = v;
        }
        if let Some(v) = &self.cutoffs {
            cfg.cutoffs = parse_list(v, "cutoff")?;
        }
        if let Some(v) = self.query_size {
            cfg.query_size = v;
        }
        if let Some(v) = self.repeats {
            cfg.repeats = v;
        }
        if let Some(v) = &self.gammas {
            cfg.gammas = parse_list(v, "gamma")?;
        }
        if let Some(v) = self.train_fraction {
            cfg.train_fraction = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

pub fn load_config(path: &Path) -> Result<PipelineConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.d == 0 {
            return fail("d must be at least 1".into());
        }
        if !(self.gamma >= 0.0) || !self.gamma.is_finite() {
            return fail(format!("gamma must be finite and >= 0, got {}", self.gamma));
        }
        if let Some(g) = self.gammas.iter().find(|g| !(**g >= 0.0) || !g.is_finite()) {
            return fail(format!(
                "gamma grid entries must be finite and >= 0, got {g}"
            ));
        }
        if matches!(self.variant, Variant::Gdmcca | Variant::Gkmcca)
            && self.epsilon.values().iter().any(|e| !(*e > 0.0))
        {
            return fail("epsilon must be > 0 for the dual and kernel variants".into());
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return fail(format!("delta must lie in (0, 1), got {}", self.delta));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return fail(format!(
                "train_fraction must lie in (0, 1), got {}",
                self.train_fraction
            ));
        }
        if self.cutoffs.is_empty() || self.cutoffs.contains(&0) {
            return fail("ranking cutoffs must be a nonempty list of positive integers".into());
        }
        if self.query_size == 0 || self.repeats == 0 || self.neighbors == 0 {
            return fail("query_size, repeats and neighbors must be at least 1".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_config_with_flag_overrides() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(
            &path,
            r#"{"variant": "gkmcca", "d": 3, "epsilon": [0.1, 0.2], "kernel": "gaussian",
                "sigma": "auto", "graph": {"type": "knn", "k1": 4, "view": 1}}"#,
        )
        .unwrap();
        let args = ConfigArgs {
            config: Some(path),
            d: Some(5),
            sigma: Some(Sigma::Fixed(2.0)),
            ..Default::default()
        };
        let cfg = args.resolve().unwrap();
        assert_eq!(cfg.variant, Variant::Gkmcca);
        assert_eq!(cfg.d, 5);
        assert_eq!(cfg.epsilon.values(), vec![0.1, 0.2]);
        assert_eq!(cfg.sigma, Sigma::Fixed(2.0));
        assert!(matches!(
            cfg.graph,
            GraphSource::Knn {
                k1: 4,
                view: Some(1),
                ..
            }
        ));
    }

    #[test]
    fn invalid_values_are_rejected() {
        let bad = ConfigArgs {
            gamma: Some(-1.0),
            ..Default::default()
        };
        assert!(bad.resolve().is_err());
        let bad = ConfigArgs {
            variant: Some(Variant::Gdmcca),
            epsilon: Some("0".into()),
            ..Default::default()
        };
        assert!(bad.resolve().is_err());
        assert!("fast".parse::<Sigma>().is_err());
        let sigma: Sigma = serde_json::from_str("\"auto\"").unwrap();
        assert_eq!(sigma, Sigma::Auto);
        assert_eq!(serde_json::to_string(&Sigma::Auto).unwrap(), "\"auto\"");
    }
}
