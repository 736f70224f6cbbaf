//! Downstream evaluation: standardization, cosine ranking with
//! precision/recall/MRR, k-means with label-matched accuracy, scatter ratio,
//! nearest-neighbour classification and a PCA baseline.

use std::cmp::Ordering;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{concatenate, MultiviewDataset};
use crate::error::{Error, Result};
use crate::linalg::{sym_eig_topd, symmetrize, Matrix};
use crate::mcca::PrimalModel;
use crate::model::Variant;

#[derive(Debug, Clone, PartialEq)]
pub struct ZScore {
    pub values: Matrix,
    /// Rows with (numerically) zero variance; these are returned as zeros.
    pub degenerate: Vec<usize>,
}

/// Standardize every row to mean 0 and population variance 1.
pub fn zscore(e: &Matrix) -> Matrix {
    zscore_flagged(e).values
}

pub fn zscore_flagged(e: &Matrix) -> ZScore {
    let n = e.ncols() as f64;
    let mut values = Matrix::zeros(e.nrows(), e.ncols());
    let mut degenerate = Vec::new();
    for (i, row) in e.row_iter().enumerate() {
        let mean = row.sum() / n;
        let var = row.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
        let scale = row.amax();
        if !(var > (1e-12 * scale).powi(2)) {
            log::warn!("zscore: row {i} has zero variance; mapped to zeros");
            degenerate.push(i);
            continue;
        }
        let sd = var.sqrt();
        for (j, x) in row.iter().enumerate() {
            values[(i, j)] = (x - mean) / sd;
        }
    }
    ZScore { values, degenerate }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingResult {
    pub query: usize,
    /// Candidate column indices, most similar first.
    pub ranking: Vec<usize>,
    /// Cosine similarity of each ranked candidate (zero vectors report 0).
    pub similarity: Vec<f64>,
    /// Relevance of each ranked candidate, aligned with `ranking`.
    pub relevant: Vec<bool>,
}

impl RankingResult {
    /// Mark the candidates in `ids` as relevant.
    pub fn with_relevant(mut self, ids: &[usize]) -> Self {
        self.relevant = self.ranking.iter().map(|c| ids.contains(c)).collect();
        self
    }

    pub fn with_query(mut self, query: usize) -> Self {
        self.query = query;
        self
    }
}

/// Rank the columns of `candidates` by descending cosine similarity to `query`.
///
/// Ties go to the lower index; zero candidates come last.
pub fn rank_by_cosine(query: &[f64], candidates: &Matrix) -> Result<RankingResult> {
    if query.len() != candidates.nrows() {
        return Err(Error::Dimension(format!(
            "query has length {}, candidates have {} rows",
            query.len(),
            candidates.nrows()
        )));
    }
    let qn = query.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !(qn > 0.0) || !qn.is_finite() {
        return Err(Error::Input("query vector is zero".into()));
    }
    let scored: Vec<(usize, Option<f64>)> = candidates
        .column_iter()
        .enumerate()
        .map(|(j, c)| {
            let cn = c.norm();
            if cn > 0.0 {
                let dot: f64 = c.iter().zip(query).map(|(a, b)| a * b).sum();
                (j, Some(dot / (qn * cn)))
            } else {
                (j, None)
            }
        })
        .collect();
    let mut order = scored.clone();
    order.sort_by(|a, b| match (a.1, b.1) {
        (Some(x), Some(y)) => y.total_cmp(&x).then(a.0.cmp(&b.0)),
        (Some(_), None) => Ordering::Less,
        (None, Some(_)) => Ordering::Greater,
        (None, None) => a.0.cmp(&b.0),
    });
    Ok(RankingResult {
        query: 0,
        ranking: order.iter().map(|p| p.0).collect(),
        similarity: order.iter().map(|p| p.1.unwrap_or(0.0)).collect(),
        relevant: vec![false; order.len()],
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankingMetrics {
    pub precision: f64,
    pub recall: f64,
    pub mrr: f64,
    /// Queries that had at least one relevant candidate.
    pub queries: usize,
}

/// Macro-averaged precision@L, recall@L and MRR (MRR uses the full list).
pub fn precision_recall_mrr(rankings: &[RankingResult], l: usize) -> Result<RankingMetrics> {
    if l == 0 {
        return Err(Error::Config("cutoff L must be at least 1".into()));
    }
    let (mut p, mut r, mut mrr, mut used) = (0.0, 0.0, 0.0, 0usize);
    for rk in rankings {
        let total = rk.relevant.iter().filter(|&&x| x).count();
        if total == 0 {
            log::warn!("query {} has no relevant candidates; excluded", rk.query);
            continue;
        }
        let hits = rk.relevant.iter().take(l).filter(|&&x| x).count() as f64;
        let first = rk.relevant.iter().position(|&x| x).unwrap();
        p += hits / l as f64;
        r += hits / total as f64;
        mrr += 1.0 / (first + 1) as f64;
        used += 1;
    }
    if used == 0 {
        return Err(Error::Degenerate(
            "no query has a relevant candidate".into(),
        ));
    }
    let u = used as f64;
    Ok(RankingMetrics {
        precision: p / u,
        recall: r / u,
        mrr: mrr / u,
        queries: used,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    pub labels: Vec<usize>,
    pub k: usize,
}

impl ClusterAssignment {
    pub fn new(labels: Vec<usize>, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::Input("cluster count must be at least 1".into()));
        }
        if let Some(&bad) = labels.iter().find(|&&c| c >= k) {
            return Err(Error::Input(format!(
                "cluster label {bad} is not below k = {k}"
            )));
        }
        Ok(Self { labels, k })
    }
}

#[derive(Debug, Clone)]
pub struct KMeans {
    pub assignment: ClusterAssignment,
    /// `d x k`
    pub centroids: Matrix,
    pub inertia: f64,
    pub iterations: usize,
}

pub const KMEANS_MAX_ITER: usize = 300;
/// Independent k-means++ starts per call; the lowest-inertia run is kept.
pub const KMEANS_RESTARTS: usize = 10;

fn sq_dist(e: &Matrix, j: usize, c: &Matrix, k: usize) -> f64 {
    e.column(j)
        .iter()
        .zip(c.column(k).iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum()
}

fn nearest(e: &Matrix, j: usize, c: &Matrix) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for k in 0..c.ncols() {
        let dist = sq_dist(e, j, c, k);
        if dist < best.1 {
            best = (k, dist);
        }
    }
    best
}

fn plus_plus_init(e: &Matrix, k: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let n = e.ncols();
    let mut c = Matrix::zeros(e.nrows(), k);
    c.set_column(0, &e.column(rng.random_range(0..n)));
    let mut d2: Vec<f64> = (0..n).map(|j| sq_dist(e, j, &c, 0)).collect();
    for i in 1..k {
        let pick = match WeightedIndex::new(&d2) {
            Ok(w) => w.sample(rng),
            // Every point coincides with a centroid already.
            Err(_) => rng.random_range(0..n),
        };
        c.set_column(i, &e.column(pick));
        for (j, dj) in d2.iter_mut().enumerate() {
            *dj = dj.min(sq_dist(e, j, &c, i));
        }
    }
    c
}

fn lloyd(e: &Matrix, mut c: Matrix) -> KMeans {
    let (n, k) = (e.ncols(), c.ncols());
    let mut labels = vec![usize::MAX; n];
    let mut iterations = 0;
    while iterations < KMEANS_MAX_ITER {
        iterations += 1;
        let mut changed = false;
        for (j, lab) in labels.iter_mut().enumerate() {
            let (best, _) = nearest(e, j, &c);
            if *lab != best {
                *lab = best;
                changed = true;
            }
        }
        // Re-seed empty clusters at the point farthest from its own centroid.
        let mut counts = vec![0usize; k];
        for &lab in &labels {
            counts[lab] += 1;
        }
        for empty in 0..k {
            if counts[empty] > 0 {
                continue;
            }
            let far = (0..n)
                .filter(|&j| counts[labels[j]] > 1)
                .map(|j| (j, sq_dist(e, j, &c, labels[j])))
                .max_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)));
            if let Some((j, _)) = far {
                counts[labels[j]] -= 1;
                labels[j] = empty;
                counts[empty] = 1;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        c.fill(0.0);
        for (j, &lab) in labels.iter().enumerate() {
            let mut col = c.column_mut(lab);
            col += e.column(j);
        }
        for (i, &cnt) in counts.iter().enumerate() {
            if cnt > 0 {
                let mut col = c.column_mut(i);
                col /= cnt as f64;
            }
        }
    }
    let inertia = (0..n).map(|j| sq_dist(e, j, &c, labels[j])).sum();
    KMeans {
        assignment: ClusterAssignment { labels, k },
        centroids: c,
        inertia,
        iterations,
    }
}

/// Lloyd's algorithm from k-means++ seeds on the columns of `e`; deterministic in `seed`.
pub fn kmeans_fit(e: &Matrix, k: usize, seed: u64) -> Result<KMeans> {
    let n = e.ncols();
    if k == 0 || k > n {
        return Err(Error::Config(format!("k must lie in [1, {n}], got {k}")));
    }
    crate::linalg::check_finite(e, "embedding")?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: Option<KMeans> = None;
    for _ in 0..KMEANS_RESTARTS {
        let run = lloyd(e, plus_plus_init(e, k, &mut rng));
        if best.as_ref().is_none_or(|b| run.inertia < b.inertia) {
            best = Some(run);
        }
    }
    Ok(best.unwrap())
}

pub fn kmeans(e: &Matrix, k: usize, seed: u64) -> Result<ClusterAssignment> {
    Ok(kmeans_fit(e, k, seed)?.assignment)
}

/// Sum of squared distances of each column to its cluster mean.
pub fn inertia(e: &Matrix, assign: &ClusterAssignment) -> Result<f64> {
    Ok(within_scatter(e, assign)?.iter().sum())
}

fn within_scatter(e: &Matrix, assign: &ClusterAssignment) -> Result<Vec<f64>> {
    if assign.labels.len() != e.ncols() {
        return Err(Error::Dimension(format!(
            "{} labels for {} samples",
            assign.labels.len(),
            e.ncols()
        )));
    }
    let mut sums = Matrix::zeros(e.nrows(), assign.k);
    let mut counts = vec![0usize; assign.k];
    for (j, &c) in assign.labels.iter().enumerate() {
        let mut col = sums.column_mut(c);
        col += e.column(j);
        counts[c] += 1;
    }
    for (c, &cnt) in counts.iter().enumerate() {
        if cnt > 0 {
            let mut col = sums.column_mut(c);
            col /= cnt as f64;
        }
    }
    let mut out = vec![0.0; assign.k];
    for (j, &c) in assign.labels.iter().enumerate() {
        out[c] += sq_dist(e, j, &sums, c);
    }
    Ok(out)
}

/// Compact arbitrary labels to `0..classes`, in order of first appearance.
fn compact(labels: &[usize]) -> (Vec<usize>, usize) {
    let mut seen: Vec<usize> = Vec::new();
    let out = labels
        .iter()
        .map(|l| match seen.iter().position(|s| s == l) {
            Some(i) => i,
            None => {
                seen.push(*l);
                seen.len() - 1
            }
        })
        .collect();
    (out, seen.len())
}

/// Minimum-cost perfect assignment on a square cost matrix (Hungarian method,
/// potentials form). Returns the column assigned to each row.
pub fn hungarian(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut row_to_col = vec![0; n];
    for j in 1..=n {
        if p[j] > 0 {
            row_to_col[p[j] - 1] = j - 1;
        }
    }
    row_to_col
}

/// Fraction of samples correctly clustered under the best one-to-one matching
/// of cluster ids to class labels.
pub fn clustering_accuracy(pred: &ClusterAssignment, truth: &[usize]) -> Result<f64> {
    if pred.labels.len() != truth.len() {
        return Err(Error::Dimension(format!(
            "{} predictions for {} labels",
            pred.labels.len(),
            truth.len()
        )));
    }
    if truth.is_empty() {
        return Err(Error::Input("no samples to score".into()));
    }
    let (t, classes) = compact(truth);
    let size = classes.max(pred.k);
    let mut counts = vec![vec![0.0; size]; size];
    for (&c, &l) in pred.labels.iter().zip(&t) {
        counts[c][l] += 1.0;
    }
    let cost: Vec<Vec<f64>> = counts
        .iter()
        .map(|r| r.iter().map(|x| -x).collect())
        .collect();
    let matched: f64 = hungarian(&cost)
        .iter()
        .enumerate()
        .map(|(r, &c)| counts[r][c])
        .sum();
    Ok(matched / truth.len() as f64)
}

/// Total energy `||E||_F^2` over the summed within-cluster scatter. Returns
/// `+inf` (with a warning) when every cluster is scatter-free.
pub fn scatter_ratio(e: &Matrix, assign: &ClusterAssignment) -> Result<f64> {
    let within: f64 = within_scatter(e, assign)?.iter().sum();
    let total = e.norm_squared();
    if within == 0.0 {
        log::warn!("scatter_ratio: zero within-cluster scatter");
        return Ok(f64::INFINITY);
    }
    Ok(total / within)
}

/// Labels for the columns of `test` by majority vote among the `j` nearest
/// columns of `train` (Euclidean). Vote ties go to the class whose member is
/// nearest.
pub fn knn_classify(
    train: &Matrix,
    train_labels: &[usize],
    test: &Matrix,
    j: usize,
) -> Result<Vec<usize>> {
    if train.ncols() != train_labels.len() {
        return Err(Error::Dimension(format!(
            "{} labels for {} training samples",
            train_labels.len(),
            train.ncols()
        )));
    }
    if train.nrows() != test.nrows() {
        return Err(Error::Dimension(format!(
            "training embedding has {} rows, test has {}",
            train.nrows(),
            test.nrows()
        )));
    }
    if j == 0 || j > train.ncols() {
        return Err(Error::Config(format!(
            "neighbour count must lie in [1, {}], got {j}",
            train.ncols()
        )));
    }
    let mut out = Vec::with_capacity(test.ncols());
    for t in 0..test.ncols() {
        let mut dist: Vec<(f64, usize)> = (0..train.ncols())
            .map(|i| ((train.column(i) - test.column(t)).norm_squared(), i))
            .collect();
        dist.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        // (votes, first position) per label
        let mut tally: Vec<(usize, usize, usize)> = Vec::new();
        for (pos, &(_, i)) in dist.iter().take(j).enumerate() {
            let lab = train_labels[i];
            match tally.iter_mut().find(|e| e.0 == lab) {
                Some(e) => e.1 += 1,
                None => tally.push((lab, 1, pos)),
            }
        }
        let winner = tally
            .iter()
            .max_by(|a, b| a.1.cmp(&b.1).then(b.2.cmp(&a.2)))
            .unwrap();
        out.push(winner.0);
    }
    Ok(out)
}

pub fn classification_accuracy(pred: &[usize], truth: &[usize]) -> Result<f64> {
    if pred.len() != truth.len() || pred.is_empty() {
        return Err(Error::Dimension(format!(
            "{} predictions for {} labels",
            pred.len(),
            truth.len()
        )));
    }
    let hits = pred.iter().zip(truth).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / pred.len() as f64)
}

#[derive(Debug, Clone)]
pub struct Pca {
    /// `d x N`; row `i` is `sqrt(lambda_i) v_i^T`.
    pub scores: Matrix,
    /// `(sum D_m) x d`, with `scores = loadings^T X`.
    pub loadings: Matrix,
    pub eigenvalues: Vec<f64>,
    /// `d x N` orthonormal rows (the Gram eigenvectors).
    pub basis: Matrix,
}

/// Top-`d` principal component scores of a (centered) `D x N` matrix via the
/// eigendecomposition of its `N x N` Gram matrix.
pub fn pca_baseline(concat: &Matrix, d: usize) -> Result<Pca> {
    let (dim, n) = concat.shape();
    if d == 0 || d > dim.min(n) {
        return Err(Error::Dimension(format!(
            "d must lie in [1, {}], got {d}",
            dim.min(n)
        )));
    }
    let gram = symmetrize(&(concat.transpose() * concat));
    let eig = sym_eig_topd(&gram, d)?;
    let tol = 1e-12 * gram.norm().max(f64::MIN_POSITIVE);
    let mut scores = eig.vectors.transpose();
    let mut loadings = concat * &eig.vectors;
    for i in 0..d {
        let lam = eig.values[i].max(0.0);
        let root = lam.sqrt();
        let mut row = scores.row_mut(i);
        row *= root;
        let mut col = loadings.column_mut(i);
        if lam > tol {
            col /= root;
        } else {
            col.fill(0.0);
        }
    }
    Ok(Pca {
        scores,
        loadings,
        eigenvalues: eig.values,
        basis: eig.vectors.transpose(),
    })
}

/// PCA on the centered, concatenated views, packaged as a primal model so it
/// shares the transform path (`sum_m U_m^T X_m`).
pub fn fit_pca(data: &MultiviewDataset, d: usize) -> Result<PrimalModel> {
    let (centered, view_means) = data.center();
    let pca = pca_baseline(&concatenate(&centered), d)?;
    let mut loadings = Vec::with_capacity(data.num_views());
    let mut offset = 0;
    for dm in data.dims() {
        loadings.push(pca.loadings.rows(offset, dm).into_owned());
        offset += dm;
    }
    Ok(PrimalModel {
        variant: Variant::Pca,
        s_hat: pca.basis,
        loadings,
        eigenvalues: pca.eigenvalues,
        gamma: 0.0,
        d,
        view_means,
        train_hashes: data.hashes(),
    })
}
