//! Subcommand implementations.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use mvgcca::bounds::{generalization_bound, BoundReport};
use mvgcca::data::concatenate;
use mvgcca::dual::{
    fit_gdmcca, fit_gkmcca_from_data, implied_loadings, transform_dual, transform_kernel,
};
use mvgcca::eval::{
    classification_accuracy, clustering_accuracy, fit_pca, kmeans, knn_classify,
    precision_recall_mrr, rank_by_cosine, scatter_ratio, zscore, RankingResult,
};
use mvgcca::graph::{combine_adjacency, knn_kernel_graph, supervised_cosine_graph};
use mvgcca::io::{load_dataset, read_labels, write_json, write_labels, write_matrix_csv};
use mvgcca::kernels::{gaussian_kernel, linear_kernel, mean_pairwise_distance};
use mvgcca::mcca::{fit_gmcca, fit_mcca, transform_primal};
use mvgcca::synth::{generate, SynthSpec};
use mvgcca::{Error, GraphAdjacency, KernelSpec, Matrix, Model, MultiviewDataset, Result, Variant};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::{GraphSource, KernelFamily, PipelineConfig, Sigma, Task};

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::io(path, e)
}

pub fn load_views(cfg: &PipelineConfig) -> Result<MultiviewDataset> {
    if cfg.views.is_empty() {
        return Err(Error::Config(
            "no view files given (use --views or the 'views' key)".into(),
        ));
    }
    load_dataset(&cfg.views)
}

fn labels_for(cfg: &PipelineConfig, n: usize) -> Result<Vec<usize>> {
    let path = cfg
        .labels
        .as_ref()
        .ok_or_else(|| Error::Config("this task needs a labels file (--labels)".into()))?;
    read_labels(path, n)
}

/// Feature matrix a constructed graph is built from: one view, or all views stacked.
fn graph_features(data: &MultiviewDataset, view: Option<usize>) -> Result<Matrix> {
    match view {
        Some(m) if m >= data.num_views() => Err(Error::Config(format!(
            "graph view {m} does not exist ({} views)",
            data.num_views()
        ))),
        Some(m) => Ok(data.view(m).clone()),
        None => Ok(concatenate(data)),
    }
}

/// Samples of the full dataset that `data` consists of, when it is a subset.
pub struct Subset<'a> {
    pub nodes: &'a [usize],
    pub full_n: usize,
}

pub fn build_graph(
    src: &GraphSource,
    data: &MultiviewDataset,
    labels: Option<&[usize]>,
    subset: Option<&Subset>,
) -> Result<GraphAdjacency> {
    let n = data.num_samples();
    match src {
        GraphSource::None => Ok(GraphAdjacency::empty(n)),
        GraphSource::File { path } => match subset {
            Some(s) => GraphAdjacency::read_tsv(path, s.full_n)?.induced(s.nodes),
            None => GraphAdjacency::read_tsv(path, n),
        },
        GraphSource::Knn {
            k1,
            view,
            kernel,
            sigma,
        } => {
            let x = graph_features(data, *view)?;
            let k = match kernel {
                KernelFamily::Linear => linear_kernel(&x)?,
                KernelFamily::Gaussian => gaussian_kernel(&x, sigma.bandwidth())?,
            };
            knn_kernel_graph(&k, *k1)
        }
        GraphSource::Supervised { k2, view } => {
            let labels = labels.ok_or_else(|| {
                Error::Config("a supervised graph needs a labels file (--labels)".into())
            })?;
            supervised_cosine_graph(&graph_features(data, *view)?, labels, *k2)
        }
        GraphSource::Combine { graphs, weights } => {
            let parts = graphs
                .iter()
                .map(|g| build_graph(g, data, labels, subset))
                .collect::<Result<Vec<_>>>()?;
            combine_adjacency(&parts, weights)
        }
    }
}

fn needs_labels(src: &GraphSource) -> bool {
    match src {
        GraphSource::Supervised { .. } => true,
        GraphSource::Combine { graphs, .. } => graphs.iter().any(needs_labels),
        _ => false,
    }
}

fn kernel_specs(cfg: &PipelineConfig, data: &MultiviewDataset) -> Result<Vec<KernelSpec>> {
    data.views()
        .iter()
        .map(|x| match (cfg.kernel, cfg.sigma) {
            (KernelFamily::Linear, _) => Ok(KernelSpec::Linear),
            (KernelFamily::Gaussian, Sigma::Fixed(sigma)) => Ok(KernelSpec::Gaussian { sigma }),
            (KernelFamily::Gaussian, Sigma::Auto) => {
                let sigma = mean_pairwise_distance(x)?;
                if !(sigma > 0.0) {
                    return Err(Error::Degenerate(
                        "all samples coincide; cannot choose a bandwidth automatically".into(),
                    ));
                }
                Ok(KernelSpec::Gaussian { sigma })
            }
        })
        .collect()
}

pub fn fit_model(
    cfg: &PipelineConfig,
    data: &MultiviewDataset,
    graph: &GraphAdjacency,
) -> Result<Model> {
    fit_variant(cfg, cfg.variant, cfg.gamma, data, graph)
}

fn fit_variant(
    cfg: &PipelineConfig,
    variant: Variant,
    gamma: f64,
    data: &MultiviewDataset,
    graph: &GraphAdjacency,
) -> Result<Model> {
    let l = graph.laplacian();
    let eps = cfg.epsilon.values();
    Ok(match variant {
        Variant::Mcca => fit_mcca(data, cfg.d)?.into(),
        Variant::Gmcca => fit_gmcca(data, &l, gamma, cfg.d)?.into(),
        Variant::Gdmcca => fit_gdmcca(data, &l, gamma, &eps, cfg.d, cfg.cd_form)?.into(),
        Variant::Gkmcca => {
            let specs = kernel_specs(cfg, data)?;
            fit_gkmcca_from_data(data, &specs, &l, gamma, &eps, cfg.d)?.into()
        }
        Variant::Pca => fit_pca(data, cfg.d)?.into(),
    })
}

/// Embed raw samples with a fitted model. Dual and kernel models need the
/// training views they were fitted on.
pub fn embed(
    model: &Model,
    views: &MultiviewDataset,
    train: Option<&MultiviewDataset>,
) -> Result<Matrix> {
    let need_train = || {
        train.ok_or_else(|| {
            Error::Config(format!(
                "{} models need the training views (--train-views) to embed new samples",
                model.variant()
            ))
        })
    };
    match model {
        Model::Primal(p) => transform_primal(p, views.center_with(&p.view_means)?.views()),
        Model::Dual(d) if d.kernels.is_some() => transform_kernel(d, need_train()?, views.views()),
        Model::Dual(d) => {
            transform_dual(d, need_train()?, views.center_with(&d.view_means)?.views())
        }
    }
}

/// Explicit per-view loadings (not available for kernel models).
pub fn loadings(model: &Model, train: Option<&MultiviewDataset>) -> Result<Vec<Matrix>> {
    match model {
        Model::Primal(p) => Ok(p.loadings.clone()),
        Model::Dual(d) => {
            let train = train.ok_or_else(|| {
                Error::Config("dual models need the training views to recover loadings".into())
            })?;
            implied_loadings(d, train)
        }
    }
}

fn write_eigenvalues(path: &Path, values: &[f64]) -> Result<()> {
    let mut text = String::from("index,eigenvalue\n");
    for (i, v) in values.iter().enumerate() {
        text.push_str(&format!("{},{v:?}\n", i + 1));
    }
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

fn print_json(value: &Value) {
    use std::io::Write;
    // A closed pipe (e.g. `| head`) is not an error worth reporting.
    let _ = writeln!(
        std::io::stdout(),
        "{}",
        serde_json::to_string_pretty(value).expect("serializable")
    );
}

pub fn cmd_fit(cfg: &PipelineConfig, out: &Path, eigen_out: Option<&Path>) -> Result<()> {
    let data = load_views(cfg)?;
    let labels = if needs_labels(&cfg.graph) {
        Some(labels_for(cfg, data.num_samples())?)
    } else {
        None
    };
    let graph = build_graph(&cfg.graph, &data, labels.as_deref(), None)?;
    let model = fit_model(cfg, &data, &graph)?;
    model.save(out)?;
    let eigen_path = match eigen_out {
        Some(p) => p.to_path_buf(),
        None => out.with_extension("eigenvalues.csv"),
    };
    write_eigenvalues(&eigen_path, model.eigenvalues())?;
    log::info!("wrote {} and {}", out.display(), eigen_path.display());
    print_json(&json!({
        "variant": model.variant(),
        "d": cfg.d,
        "gamma": cfg.gamma,
        "samples": data.num_samples(),
        "views": data.num_views(),
        "graph_edges": graph.edges().len(),
        "eigenvalues": model.eigenvalues(),
        "model": out,
        "eigenvalue_table": eigen_path,
    }));
    Ok(())
}

fn load_optional(paths: &[PathBuf]) -> Result<Option<MultiviewDataset>> {
    if paths.is_empty() {
        Ok(None)
    } else {
        load_dataset(paths).map(Some)
    }
}

pub fn cmd_transform(
    cfg: &PipelineConfig,
    model: &Path,
    train_views: &[PathBuf],
    out: &Path,
) -> Result<()> {
    let model = Model::load(model)?;
    let data = load_views(cfg)?;
    let train = load_optional(train_views)?;
    let emb = embed(&model, &data, train.as_ref())?;
    write_matrix_csv(out, &emb)?;
    print_json(&json!({ "samples": emb.ncols(), "d": emb.nrows(), "embedding": out }));
    Ok(())
}

/// Seeded per-class split. Each class keeps `round(fraction * size)` samples for
/// training, clamped so that classes with at least two members contribute to
/// both sides. Returned index lists are ascending.
pub fn stratified_split(labels: &[usize], fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut classes: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &l) in labels.iter().enumerate() {
        classes.entry(l).or_default().push(i);
    }
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for members in classes.values_mut() {
        members.shuffle(&mut rng);
        let size = members.len();
        let mut take = (fraction * size as f64).round() as usize;
        if size >= 2 {
            take = take.clamp(1, size - 1);
        } else {
            take = size;
        }
        train.extend_from_slice(&members[..take]);
        test.extend_from_slice(&members[take..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    (train, test)
}

fn class_count(labels: &[usize]) -> usize {
    let mut l = labels.to_vec();
    l.sort_unstable();
    l.dedup();
    l.len()
}

fn ranking_metrics(
    cfg: &PipelineConfig,
    emb: &Matrix,
    groups: &[usize],
) -> Result<serde_json::Map<String, Value>> {
    let z = zscore(emb);
    let n = z.ncols();
    let mut members: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &g) in groups.iter().enumerate() {
        members.entry(g).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let candidates_n = n.saturating_sub(cfg.query_size);
    let mut cutoffs = Vec::new();
    for &l in &cfg.cutoffs {
        if l > candidates_n {
            log::warn!("cutoff {l} exceeds the {candidates_n} candidates; clamped");
        }
        cutoffs.push(l.min(candidates_n).max(1));
    }
    let mut sums = vec![(0.0, 0.0); cutoffs.len()];
    let mut mrr = 0.0;
    for _ in 0..cfg.repeats {
        let mut rankings = Vec::new();
        for (&g, ids) in &members {
            if ids.len() <= cfg.query_size {
                log::warn!(
                    "group {g} has {} members, not more than the query size; skipped",
                    ids.len()
                );
                continue;
            }
            let mut pool = ids.clone();
            pool.shuffle(&mut rng);
            let seeds = &pool[..cfg.query_size];
            let mut query = vec![0.0; z.nrows()];
            for &s in seeds {
                for (q, v) in query.iter_mut().zip(z.column(s).iter()) {
                    *q += v / cfg.query_size as f64;
                }
            }
            let cand_ids: Vec<usize> = (0..n).filter(|i| !seeds.contains(i)).collect();
            let cands = z.select_columns(&cand_ids);
            let mut r = rank_by_cosine(&query, &cands)?;
            r.ranking = r.ranking.iter().map(|&j| cand_ids[j]).collect();
            let relevant: Vec<usize> = pool[cfg.query_size..].to_vec();
            rankings.push(RankingResult::with_relevant(r, &relevant).with_query(g));
        }
        if rankings.is_empty() {
            return Err(Error::Degenerate(format!(
                "no group has more than {} members to rank",
                cfg.query_size
            )));
        }
        for (k, &l) in cutoffs.iter().enumerate() {
            let m = precision_recall_mrr(&rankings, l)?;
            sums[k].0 += m.precision;
            sums[k].1 += m.recall;
            if k == 0 {
                mrr += m.mrr;
            }
        }
    }
    let reps = cfg.repeats as f64;
    let mut out = serde_json::Map::new();
    for (&(p, r), &l) in sums.iter().zip(&cutoffs) {
        out.insert(format!("precision@{l}"), json!(p / reps));
        out.insert(format!("recall@{l}"), json!(r / reps));
    }
    out.insert("mrr".into(), json!(mrr / reps));
    Ok(out)
}

pub struct EvalInputs {
    pub model: PathBuf,
    pub train_views: Vec<PathBuf>,
    pub test_views: Vec<PathBuf>,
    pub test_labels: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

pub fn cmd_evaluate(cfg: &PipelineConfig, inputs: &EvalInputs) -> Result<()> {
    let model = Model::load(&inputs.model)?;
    let train = load_optional(&inputs.train_views)?;
    let emb = if cfg.views.is_empty() {
        model.s_hat().clone()
    } else {
        embed(&model, &load_views(cfg)?, train.as_ref())?
    };
    let labels = labels_for(cfg, emb.ncols())?;
    let mut metrics = serde_json::Map::new();
    metrics.insert("task".into(), json!(cfg.task));
    metrics.insert("variant".into(), json!(model.variant()));
    match cfg.task {
        Task::Clustering => {
            let k = cfg.clusters.unwrap_or_else(|| class_count(&labels));
            let assign = kmeans(&emb, k, cfg.seed)?;
            metrics.insert(
                "accuracy".into(),
                json!(clustering_accuracy(&assign, &labels)?),
            );
            let ratio = scatter_ratio(&emb, &assign)?;
            // JSON has no infinity; null marks zero within-cluster scatter.
            metrics.insert(
                "scatter_ratio".into(),
                if ratio.is_finite() {
                    json!(ratio)
                } else {
                    Value::Null
                },
            );
        }
        Task::Classification => {
            let (test_emb, test_labels) = if inputs.test_views.is_empty() {
                (emb.clone(), labels.clone())
            } else {
                let test = load_dataset(&inputs.test_views)?;
                let e = embed(&model, &test, train.as_ref())?;
                let path = inputs.test_labels.as_ref().ok_or_else(|| {
                    Error::Config("classification on test views needs --test-labels".into())
                })?;
                let l = read_labels(path, e.ncols())?;
                (e, l)
            };
            let pred = knn_classify(&emb, &labels, &test_emb, cfg.neighbors)?;
            metrics.insert(
                "accuracy".into(),
                json!(classification_accuracy(&pred, &test_labels)?),
            );
        }
        Task::Ranking => metrics.extend(ranking_metrics(cfg, &emb, &labels)?),
    }
    metrics.insert(
        "parameters".into(),
        json!({
            "gamma": model.gamma(),
            "d": emb.nrows(),
            "seed": cfg.seed,
            "clusters": cfg.clusters,
            "neighbors": cfg.neighbors,
            "cutoffs": cfg.cutoffs,
            "query_size": cfg.query_size,
            "repeats": cfg.repeats,
            "samples": emb.ncols(),
        }),
    );
    let value = Value::Object(metrics);
    match &inputs.out {
        Some(p) => write_json(p, &value)?,
        None => print_json(&value),
    }
    Ok(())
}

pub fn cmd_bound(cfg: &PipelineConfig, model: &Path, out: Option<&Path>) -> Result<()> {
    let model = Model::load(model)?;
    let train = load_views(cfg)?;
    let u = loadings(&model, Some(&train))?;
    let centered = train.center_with(model.view_means())?;
    let report = generalization_bound(&u, &centered, cfg.delta)?;
    match out {
        Some(p) => write_json(p, &report)?,
        None => print_json(&serde_json::to_value(report)?),
    }
    Ok(())
}

#[derive(Debug, Clone, Copy)]
pub struct SweepRow {
    pub gamma: f64,
    pub report: BoundReport,
    pub accuracy: f64,
}

/// Fit on a seeded per-class training split for each gamma; report the bound
/// on the training data and k-means accuracy on the held-out embedding.
pub fn sweep(
    cfg: &PipelineConfig,
    data: &MultiviewDataset,
    labels: &[usize],
) -> Result<Vec<SweepRow>> {
    if !matches!(
        cfg.variant,
        Variant::Gmcca | Variant::Mcca | Variant::Gdmcca
    ) {
        return Err(Error::Config(format!(
            "sweep needs explicit loadings; variant {} is not supported (use gmcca or gdmcca)",
            cfg.variant
        )));
    }
    if cfg.gammas.is_empty() {
        return Err(Error::Config("empty gamma grid".into()));
    }
    let (train_idx, test_idx) = stratified_split(labels, cfg.train_fraction, cfg.seed);
    if test_idx.is_empty() {
        return Err(Error::Input("split left no test samples".into()));
    }
    let train = data.select(&train_idx)?;
    let test = data.select(&test_idx)?;
    let train_labels: Vec<usize> = train_idx.iter().map(|&i| labels[i]).collect();
    let test_labels: Vec<usize> = test_idx.iter().map(|&i| labels[i]).collect();
    let subset = Subset {
        nodes: &train_idx,
        full_n: data.num_samples(),
    };
    let graph = build_graph(&cfg.graph, &train, Some(&train_labels), Some(&subset))?;
    let k = cfg.clusters.unwrap_or_else(|| class_count(labels));
    let variant = if cfg.variant == Variant::Mcca {
        Variant::Gmcca
    } else {
        cfg.variant
    };
    cfg.gammas
        .par_iter()
        .map(|&gamma| {
            let model = fit_variant(cfg, variant, gamma, &train, &graph)?;
            let u = loadings(&model, Some(&train))?;
            let report =
                generalization_bound(&u, &train.center_with(model.view_means())?, cfg.delta)?;
            let test_c = test.center_with(model.view_means())?;
            let mut emb = Matrix::zeros(cfg.d, test_c.num_samples());
            for (um, xm) in u.iter().zip(test_c.views()) {
                emb += um.transpose() * xm;
            }
            let assign = kmeans(&emb, k, cfg.seed)?;
            Ok(SweepRow {
                gamma,
                report,
                accuracy: clustering_accuracy(&assign, &test_labels)?,
            })
        })
        .collect()
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from("gamma,bound,g_bar,B,R,accuracy\n");
    for r in rows {
        s.push_str(&format!(
            "{:?},{:?},{:?},{:?},{:?},{:?}\n",
            r.gamma, r.report.bound, r.report.g_bar, r.report.b, r.report.r, r.accuracy
        ));
    }
    s
}

pub fn cmd_sweep(cfg: &PipelineConfig, out: &Path) -> Result<()> {
    let data = load_views(cfg)?;
    let labels = labels_for(cfg, data.num_samples())?;
    let rows = sweep(cfg, &data, &labels)?;
    std::fs::write(out, sweep_csv(&rows)).map_err(|e| io_err(out, e))?;
    print_json(&json!({ "rows": rows.len(), "table": out }));
    Ok(())
}

pub fn cmd_graph_build(cfg: &PipelineConfig, out: &Path) -> Result<()> {
    let data = load_views(cfg)?;
    let labels = if needs_labels(&cfg.graph) {
        Some(labels_for(cfg, data.num_samples())?)
    } else {
        None
    };
    let graph = build_graph(&cfg.graph, &data, labels.as_deref(), None)?;
    graph.write_tsv(out)?;
    print_json(&json!({ "nodes": graph.n(), "edges": graph.edges().len(), "graph": out }));
    Ok(())
}

pub fn cmd_synth(spec: &SynthSpec, dir: &Path) -> Result<()> {
    let s = generate(spec)?;
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let mut views = Vec::new();
    for (m, v) in s.data.views().iter().enumerate() {
        let p = dir.join(format!("view{m}.csv"));
        write_matrix_csv(&p, v)?;
        views.push(p);
    }
    let graph = dir.join("graph.tsv");
    s.graph.write_tsv(&graph)?;
    let labels = dir.join("labels.csv");
    write_labels(&labels, &s.labels)?;
    let sources = dir.join("sources.csv");
    write_matrix_csv(&sources, &s.sources)?;
    write_json(&dir.join("spec.json"), spec)?;
    print_json(&json!({
        "views": views,
        "graph": graph,
        "labels": labels,
        "sources": sources,
    }));
    Ok(())
}
