//! Source graphs: adjacency construction, Laplacians and weighted combination.
//!
//! Neighborhoods use the union rule (an edge exists when either endpoint lists
//! the other among its nearest neighbors), which keeps `W` exactly symmetric.
//! Ranking ties go to the lower sample index and self-loops are never created.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::kernels::KernelMatrix;
use crate::linalg::{check_finite, Matrix};

/// Symmetric, nonnegative, zero-diagonal edge weights.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphAdjacency {
    w: Matrix,
}

impl GraphAdjacency {
    pub fn new(w: Matrix) -> Result<Self> {
        check_finite(&w, "adjacency")?;
        let n = w.nrows();
        if w.ncols() != n {
            return Err(Error::Dimension(format!(
                "adjacency must be square, got {}x{}",
                n,
                w.ncols()
            )));
        }
        for i in 0..n {
            if w[(i, i)] != 0.0 {
                return Err(Error::Input(format!(
                    "adjacency has a self-loop at node {i}"
                )));
            }
            for j in 0..n {
                if w[(i, j)] < 0.0 {
                    return Err(Error::Input(format!(
                        "negative edge weight {} at ({i}, {j})",
                        w[(i, j)]
                    )));
                }
                if w[(i, j)] != w[(j, i)] {
                    return Err(Error::Input(format!(
                        "adjacency is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(Self { w })
    }

    /// Graph with `n` nodes and no edges.
    pub fn empty(n: usize) -> Self {
        Self {
            w: Matrix::zeros(n, n),
        }
    }

    pub fn n(&self) -> usize {
        self.w.nrows()
    }

    pub fn weights(&self) -> &Matrix {
        &self.w
    }

    /// Undirected edges `(i, j, w)` with `i < j` and `w > 0`, row-major order.
    pub fn edges(&self) -> Vec<(usize, usize, f64)> {
        let n = self.n();
        let mut out = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                let v = self.w[(i, j)];
                if v != 0.0 {
                    out.push((i, j, v));
                }
            }
        }
        out
    }

    pub fn from_edges(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let mut w = Matrix::zeros(n, n);
        for &(i, j, v) in edges {
            if i >= n || j >= n {
                return Err(Error::Input(format!(
                    "edge ({i}, {j}) out of range for a graph with {n} nodes"
                )));
            }
            if i == j {
                return Err(Error::Input(format!("self-loop on node {i}")));
            }
            w[(i, j)] = v;
            w[(j, i)] = v;
        }
        Self::new(w)
    }

    /// Subgraph induced by `nodes`, in the given order.
    pub fn induced(&self, nodes: &[usize]) -> Result<Self> {
        if let Some(&bad) = nodes.iter().find(|&&i| i >= self.n()) {
            return Err(Error::Input(format!("node {bad} out of range")));
        }
        let w = Matrix::from_fn(nodes.len(), nodes.len(), |a, b| {
            self.w[(nodes[a], nodes[b])]
        });
        Self::new(w)
    }

    /// `L = D - W`.
    pub fn laplacian(&self) -> GraphLaplacian {
        let degree: Vec<f64> = self.w.row_iter().map(|r| r.sum()).collect();
        let l = Matrix::from_diagonal(&DVector::from_vec(degree.clone())) - &self.w;
        GraphLaplacian { l, degree }
    }

    /// Tab-separated edge list, one `i<TAB>j<TAB>weight` line per edge with `i < j`.
    pub fn to_tsv(&self) -> String {
        let mut s = String::new();
        for (i, j, v) in self.edges() {
            let _ = writeln!(s, "{i}\t{j}\t{v}");
        }
        s
    }

    pub fn from_tsv(text: &str, n: usize, origin: &str) -> Result<Self> {
        let mut edges = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 3 {
                return Err(Error::Parse {
                    path: origin.to_string(),
                    row: lineno + 1,
                    col: fields.len(),
                    msg: "expected 3 tab-separated fields".into(),
                });
            }
            let parse_idx = |k: usize| -> Result<usize> {
                fields[k].trim().parse::<usize>().map_err(|e| Error::Parse {
                    path: origin.to_string(),
                    row: lineno + 1,
                    col: k + 1,
                    msg: e.to_string(),
                })
            };
            let i = parse_idx(0)?;
            let j = parse_idx(1)?;
            let v: f64 = fields[2]
                .trim()
                .parse()
                .map_err(|e: std::num::ParseFloatError| Error::Parse {
                    path: origin.to_string(),
                    row: lineno + 1,
                    col: 3,
                    msg: e.to_string(),
                })?;
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Parse {
                    path: origin.to_string(),
                    row: lineno + 1,
                    col: 3,
                    msg: format!("edge weight must be finite and >= 0, got {v}"),
                });
            }
            edges.push((i, j, v));
        }
        Self::from_edges(n, &edges)
    }

    pub fn write_tsv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_tsv()).map_err(|e| Error::io(path, e))
    }

    pub fn read_tsv(path: &Path, n: usize) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_tsv(&text, n, &path.display().to_string())
    }
}

#[derive(Debug, Clone)]
pub struct GraphLaplacian {
    l: Matrix,
    degree: Vec<f64>,
}

impl GraphLaplacian {
    pub fn matrix(&self) -> &Matrix {
        &self.l
    }

    pub fn degree(&self) -> &[f64] {
        &self.degree
    }

    pub fn n(&self) -> usize {
        self.l.nrows()
    }

    pub fn zeros(n: usize) -> Self {
        GraphAdjacency::empty(n).laplacian()
    }
}

/// Validating Laplacian constructor (`L = D - W`).
pub fn laplacian(adj: &GraphAdjacency) -> GraphLaplacian {
    adj.laplacian()
}

/// Indices of the `k` largest entries of `scores` over `candidates`.
/// Ties go to the lower index.
fn top_k(candidates: &[usize], scores: impl Fn(usize) -> f64, k: usize) -> Vec<usize> {
    let mut ranked: Vec<(usize, f64)> = candidates.iter().map(|&j| (j, scores(j))).collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    ranked.truncate(k);
    ranked.into_iter().map(|(j, _)| j).collect()
}

/// k-NN graph over kernel similarity: `w_ij = K(i, j)` when `j` is among the
/// `k1` most similar samples of `i` or vice versa, else 0.
pub fn knn_kernel_graph(kernel: &KernelMatrix, k1: usize) -> Result<GraphAdjacency> {
    let k = kernel.matrix();
    let n = k.nrows();
    if k1 == 0 || k1 + 1 > n {
        return Err(Error::Config(format!(
            "k1 must lie in [1, N-1] = [1, {}], got {k1}",
            n.saturating_sub(1)
        )));
    }
    let mut linked = vec![false; n * n];
    for i in 0..n {
        let others: Vec<usize> = (0..n).filter(|&j| j != i).collect();
        for j in top_k(&others, |j| k[(i, j)], k1) {
            linked[i * n + j] = true;
            linked[j * n + i] = true;
        }
    }
    let w = Matrix::from_fn(n, n, |i, j| {
        if linked[i * n + j] {
            // Read the upper triangle for both halves so W is exactly symmetric.
            k[(i.min(j), i.max(j))]
        } else {
            0.0
        }
    });
    GraphAdjacency::new(w)
}

/// Supervised graph: same-label samples linked by cosine similarity when one is
/// among the other's `k2` most cosine-similar same-label samples.
pub fn supervised_cosine_graph(o: &Matrix, labels: &[usize], k2: usize) -> Result<GraphAdjacency> {
    check_finite(o, "supervised graph features")?;
    let n = o.ncols();
    if labels.len() != n {
        return Err(Error::Dimension(format!(
            "{} labels for {n} samples",
            labels.len()
        )));
    }
    let norms: Vec<f64> = o.column_iter().map(|c| c.norm()).collect();
    if let Some(j) = norms.iter().position(|&v| v == 0.0) {
        return Err(Error::Input(format!("sample {j} is an all-zero column")));
    }
    let mut classes: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for (j, &c) in labels.iter().enumerate() {
        classes.entry(c).or_default().push(j);
    }
    for (c, members) in &classes {
        if members.len() < k2 + 1 {
            return Err(Error::Config(format!(
                "class {c} has {} members, need at least k2 + 1 = {}",
                members.len(),
                k2 + 1
            )));
        }
    }
    let gram = o.transpose() * o;
    let cosine = |i: usize, j: usize| {
        let (a, b) = (i.min(j), i.max(j));
        gram[(a, b)] / (norms[a] * norms[b])
    };
    let mut w = Matrix::zeros(n, n);
    for members in classes.values() {
        for &i in members {
            let others: Vec<usize> = members.iter().copied().filter(|&j| j != i).collect();
            for j in top_k(&others, |j| cosine(i, j), k2) {
                let v = cosine(i, j);
                w[(i, j)] = v;
                w[(j, i)] = v;
            }
        }
    }
    // Cosine similarity can be negative; edge weights cannot.
    w.apply(|v| *v = v.max(0.0));
    GraphAdjacency::new(w)
}

/// `W = sum_i weights_i W_i`.
pub fn combine_adjacency(graphs: &[GraphAdjacency], weights: &[f64]) -> Result<GraphAdjacency> {
    if graphs.is_empty() {
        return Err(Error::Input("no graphs to combine".into()));
    }
    if graphs.len() != weights.len() {
        return Err(Error::Dimension(format!(
            "{} graphs but {} weights",
            graphs.len(),
            weights.len()
        )));
    }
    let n = graphs[0].n();
    if let Some(g) = graphs.iter().find(|g| g.n() != n) {
        return Err(Error::Dimension(format!(
            "graph sizes differ: {n} vs {}",
            g.n()
        )));
    }
    if let Some(w) = weights.iter().find(|w| !(**w >= 0.0) || !w.is_finite()) {
        return Err(Error::Input(format!(
            "combination weight must be >= 0, got {w}"
        )));
    }
    let mut w = Matrix::zeros(n, n);
    for (g, &c) in graphs.iter().zip(weights) {
        w += g.weights() * c;
    }
    GraphAdjacency::new(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{gaussian_kernel, Bandwidth, KernelSpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn adj(rows: &[&[f64]]) -> GraphAdjacency {
        let n = rows.len();
        GraphAdjacency::new(Matrix::from_fn(n, n, |i, j| rows[i][j])).unwrap()
    }

    #[test]
    fn laplacian_examples() {
        let g = adj(&[&[0.0, 1.0], &[1.0, 0.0]]);
        let l = laplacian(&g);
        assert_eq!(
            l.matrix(),
            &Matrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0])
        );

        let l0 = laplacian(&GraphAdjacency::empty(3));
        assert_eq!(l0.matrix(), &Matrix::zeros(3, 3));

        let tri = adj(&[&[0.0, 1.0, 1.0], &[1.0, 0.0, 1.0], &[1.0, 1.0, 0.0]]);
        let l = laplacian(&tri);
        let want = Matrix::identity(3, 3) * 2.0
            - (Matrix::from_element(3, 3, 1.0) - Matrix::identity(3, 3));
        assert_eq!(l.matrix(), &want);
        let eig = crate::linalg::sym_eigenvalues(l.matrix());
        assert!(eig[0].abs() < 1e-12);
        assert!((eig[1] - 3.0).abs() < 1e-12 && (eig[2] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn adjacency_validation() {
        let asym = Matrix::from_row_slice(2, 2, &[0.0, 1.0, 0.5, 0.0]);
        assert!(GraphAdjacency::new(asym).is_err());
        let neg = Matrix::from_row_slice(2, 2, &[0.0, -1.0, -1.0, 0.0]);
        assert!(GraphAdjacency::new(neg).is_err());
        let selfloop = Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        assert!(GraphAdjacency::new(selfloop).is_err());
    }

    #[test]
    fn knn_two_nodes_and_full_neighborhood() {
        let k = KernelMatrix::from_parts(
            Matrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 1.0]),
            false,
            KernelSpec::Linear,
        )
        .unwrap();
        let g = knn_kernel_graph(&k, 1).unwrap();
        assert_eq!(g.weights()[(0, 1)], 0.3);
        assert!(knn_kernel_graph(&k, 2).is_err());
        assert!(knn_kernel_graph(&k, 0).is_err());

        let x = Matrix::from_row_slice(1, 4, &[0.0, 1.0, 3.5, 7.0]);
        let k = gaussian_kernel(&x, Bandwidth::Fixed(2.0)).unwrap();
        let g = knn_kernel_graph(&k, 3).unwrap();
        let mut want = k.matrix().clone();
        want.fill_diagonal(0.0);
        assert_eq!(g.weights(), &want);
    }

    #[test]
    fn knn_points_on_a_line_brute_force() {
        let pos = [0.0, 1.0, 3.5, 7.0];
        let x = Matrix::from_row_slice(1, 4, &pos);
        let k = gaussian_kernel(&x, Bandwidth::Auto).unwrap();
        let g = knn_kernel_graph(&k, 1).unwrap();
        // Nearest neighbor by absolute distance, exhaustive.
        let mut edges = std::collections::BTreeSet::new();
        for i in 0..4 {
            let mut best = usize::MAX;
            let mut bd = f64::INFINITY;
            for j in 0..4 {
                if j != i && (pos[i] - pos[j]).abs() < bd {
                    bd = (pos[i] - pos[j]).abs();
                    best = j;
                }
            }
            edges.insert((i.min(best), i.max(best)));
        }
        let got: std::collections::BTreeSet<_> = g.edges().iter().map(|e| (e.0, e.1)).collect();
        assert_eq!(got, edges);
        assert_eq!(edges, [(0, 1), (1, 2), (2, 3)].into_iter().collect());
    }

    #[test]
    fn supervised_examples() {
        let o = Matrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]);
        let g = supervised_cosine_graph(&o, &[0, 0], 1).unwrap();
        assert!((g.weights()[(0, 1)] - 1.0 / 2f64.sqrt()).abs() < 1e-15);
        let g = supervised_cosine_graph(&o, &[0, 1], 0).unwrap();
        assert_eq!(g.weights(), &Matrix::zeros(2, 2));
        assert!(matches!(
            supervised_cosine_graph(&o, &[0, 1], 1),
            Err(Error::Config(_))
        ));
        let z = Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        assert!(matches!(
            supervised_cosine_graph(&z, &[0, 0], 1),
            Err(Error::Input(_))
        ));
    }

    #[test]
    fn supervised_matches_per_class_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 12;
        let mut o = Matrix::from_fn(4, n, |_, _| rng.random_range(-1.0..1.0));
        for mut c in o.column_iter_mut() {
            let nn = c.norm();
            c /= nn;
        }
        let labels: Vec<usize> = (0..n).map(|i| i % 3).collect();
        let g = supervised_cosine_graph(&o, &labels, 2).unwrap();
        let mut want = std::collections::BTreeSet::new();
        for i in 0..n {
            let mut sims: Vec<(f64, usize)> = (0..n)
                .filter(|&j| j != i && labels[j] == labels[i])
                .map(|j| (o.column(i).dot(&o.column(j)), j))
                .collect();
            sims.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
            for &(s, j) in sims.iter().take(2) {
                if s > 0.0 {
                    want.insert((i.min(j), i.max(j)));
                }
            }
        }
        let got: std::collections::BTreeSet<_> = g.edges().iter().map(|e| (e.0, e.1)).collect();
        assert_eq!(got, want);
        for (i, j, _) in g.edges() {
            assert_eq!(labels[i], labels[j]);
        }
    }

    #[test]
    fn combine_examples() {
        let a = adj(&[&[0.0, 1.0, 0.0], &[1.0, 0.0, 0.0], &[0.0, 0.0, 0.0]]);
        let b = adj(&[&[0.0, 0.0, 0.0], &[0.0, 0.0, 2.0], &[0.0, 2.0, 0.0]]);
        assert_eq!(
            combine_adjacency(std::slice::from_ref(&a), &[1.0]).unwrap(),
            a
        );
        let u = combine_adjacency(&[a.clone(), b.clone()], &[1.0, 1.0]).unwrap();
        assert_eq!(u.edges(), vec![(0, 1, 1.0), (1, 2, 2.0)]);
        let z = combine_adjacency(&[a.clone(), b.clone()], &[0.0, 0.0]).unwrap();
        assert_eq!(z, GraphAdjacency::empty(3));
        assert!(combine_adjacency(std::slice::from_ref(&a), &[-1.0]).is_err());
        assert!(combine_adjacency(&[a, GraphAdjacency::empty(2)], &[1.0, 1.0]).is_err());
    }

    #[test]
    fn combine_weighted_sum_elementwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let graphs: Vec<GraphAdjacency> = (0..3)
            .map(|_| {
                let mut w = Matrix::zeros(5, 5);
                for i in 0..5 {
                    for j in (i + 1)..5 {
                        if rng.random_bool(0.5) {
                            let v = rng.random_range(0.0..1.0);
                            w[(i, j)] = v;
                            w[(j, i)] = v;
                        }
                    }
                }
                GraphAdjacency::new(w).unwrap()
            })
            .collect();
        let weights = [0.5, 0.3, 0.2];
        let c = combine_adjacency(&graphs, &weights).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                let want: f64 = (0..3)
                    .map(|g| weights[g] * graphs[g].weights()[(i, j)])
                    .sum();
                assert!((c.weights()[(i, j)] - want).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn tsv_round_trip_and_errors() {
        let g = adj(&[&[0.0, 0.25, 0.0], &[0.25, 0.0, 1.5], &[0.0, 1.5, 0.0]]);
        let text = g.to_tsv();
        assert_eq!(text, "0\t1\t0.25\n1\t2\t1.5\n");
        assert_eq!(GraphAdjacency::from_tsv(&text, 3, "mem").unwrap(), g);
        assert!(GraphAdjacency::from_tsv("0\t5\t1\n", 3, "mem").is_err());
        assert!(GraphAdjacency::from_tsv("0\t1\n", 3, "mem").is_err());
        assert!(GraphAdjacency::from_tsv("0\t1\t-2\n", 3, "mem").is_err());
    }

    #[test]
    fn induced_subgraph() {
        let g = adj(&[&[0.0, 0.25, 0.0], &[0.25, 0.0, 1.5], &[0.0, 1.5, 0.0]]);
        let s = g.induced(&[2, 1]).unwrap();
        assert_eq!(s.edges(), vec![(0, 1, 1.5)]);
    }
}
