//! Synthetic multiview data: clustered low-dimensional sources that are smooth
//! over a planted community graph, observed through random linear maps plus
//! Gaussian noise.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::MultiviewDataset;
use crate::error::{Error, Result};
use crate::graph::GraphAdjacency;
use crate::linalg::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub n: usize,
    /// Source dimension.
    pub rho: usize,
    /// Feature dimension per view; the number of views is `dims.len()`.
    pub dims: Vec<usize>,
    pub noise_std: f64,
    pub clusters: usize,
    /// Standard deviation of the cluster centres.
    pub separation: f64,
    /// Standard deviation of sources around their centre.
    pub spread: f64,
    /// Probability of a (weight 1) edge between two samples of the same cluster.
    pub p_in: f64,
    /// Probability of a (weight 1) edge across clusters.
    pub p_out: f64,
    /// Use the identity as the map of every view with `D_m == rho`.
    pub identity_maps: bool,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            n: 200,
            rho: 2,
            dims: vec![10, 10, 10],
            noise_std: 1.0,
            clusters: 2,
            separation: 3.0,
            spread: 1.0,
            p_in: 1.0,
            p_out: 0.0,
            identity_maps: false,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn num_views(&self) -> usize {
        self.dims.len()
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.dims.is_empty() {
            return fail("at least one view dimension is required".into());
        }
        if self.n < 2 {
            return fail(format!("n must be at least 2, got {}", self.n));
        }
        if self.rho == 0 || self.dims.iter().any(|&d| d < self.rho) {
            return fail(format!(
                "rho = {} must be positive and at most every view dimension {:?}",
                self.rho, self.dims
            ));
        }
        if self.clusters == 0 || self.clusters > self.n {
            return fail(format!(
                "clusters must lie in [1, n], got {}",
                self.clusters
            ));
        }
        for (name, v) in [
            ("noise_std", self.noise_std),
            ("separation", self.separation),
            ("spread", self.spread),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return fail(format!("{name} must be finite and nonnegative, got {v}"));
            }
        }
        for (name, p) in [("p_in", self.p_in), ("p_out", self.p_out)] {
            if !(0.0..=1.0).contains(&p) {
                return fail(format!("{name} must lie in [0, 1], got {p}"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SynthData {
    pub data: MultiviewDataset,
    pub graph: GraphAdjacency,
    /// Cluster of each sample; samples are grouped in contiguous, near-equal blocks.
    pub labels: Vec<usize>,
    /// `rho x N`
    pub sources: Matrix,
}

fn gaussian(rows: usize, cols: usize, std: f64, rng: &mut ChaCha8Rng) -> Matrix {
    let dist = Normal::new(0.0, 1.0).unwrap();
    Matrix::from_fn(rows, cols, |_, _| std * dist.sample(rng))
}

pub fn generate(spec: &SynthSpec) -> Result<SynthData> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (n, rho, k) = (spec.n, spec.rho, spec.clusters);
    let labels: Vec<usize> = (0..n).map(|i| i * k / n).collect();

    let centres = gaussian(rho, k, spec.separation, &mut rng);
    let mut sources = gaussian(rho, n, spec.spread, &mut rng);
    for (j, &c) in labels.iter().enumerate() {
        let mut col = sources.column_mut(j);
        col += centres.column(c);
    }

    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let p = if labels[i] == labels[j] {
                spec.p_in
            } else {
                spec.p_out
            };
            if p > 0.0 && rng.random_bool(p) {
                edges.push((i, j, 1.0));
            }
        }
    }
    let graph = GraphAdjacency::from_edges(n, &edges)?;

    let mut views = Vec::with_capacity(spec.num_views());
    for &dm in &spec.dims {
        let map = if spec.identity_maps && dm == rho {
            Matrix::identity(rho, rho)
        } else {
            gaussian(dm, rho, 1.0 / (rho as f64).sqrt(), &mut rng)
        };
        let mut x = map * &sources;
        if spec.noise_std > 0.0 {
            x += gaussian(dm, n, spec.noise_std, &mut rng);
        }
        views.push(x);
    }
    Ok(SynthData {
        data: MultiviewDataset::new(views)?,
        graph,
        labels,
        sources,
    })
}
