//! `mvgcca` — fit, apply and evaluate graph-regularized multiview CCA models.
//!
//! Every failure is reported as one JSON object on standard error
//! (`{"error": {"kind": ..., "message": ...}}`) with a nonzero exit status.

// `!(x > 0.0)` is deliberate: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mvgcca::synth::SynthSpec;
use mvgcca::{Error, Result};

use crate::config::ConfigArgs;

#[derive(Parser)]
#[command(
    name = "mvgcca",
    version,
    about = "Graph-regularized multiview CCA pipelines"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a model and write it as JSON, plus an eigenvalue table.
    Fit {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, default_value = "model.json")]
        out: PathBuf,
        /// Eigenvalue CSV (default: next to the model).
        #[arg(long)]
        eigen_out: Option<PathBuf>,
    },
    /// Embed samples with a fitted model; writes one row per sample.
    Transform {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        model: PathBuf,
        /// Training views (required for gdmcca and gkmcca models).
        #[arg(long, num_args = 1..)]
        train_views: Vec<PathBuf>,
        #[arg(long, default_value = "embedding.csv")]
        out: PathBuf,
    },
    /// Score an embedding on a clustering, classification or ranking task.
    Evaluate {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        model: PathBuf,
        #[arg(long, num_args = 1..)]
        train_views: Vec<PathBuf>,
        /// Held-out views for classification.
        #[arg(long, num_args = 1..)]
        test_views: Vec<PathBuf>,
        #[arg(long)]
        test_labels: Option<PathBuf>,
        /// Metrics JSON (default: standard output).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generalization bound of a fitted model on its training views.
    Bound {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Bound and held-out clustering accuracy over a grid of gamma values.
    Sweep {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, default_value = "sweep.csv")]
        out: PathBuf,
    },
    /// Graph utilities.
    Graph {
        #[command(subcommand)]
        command: GraphCommand,
    },
    /// Generate a synthetic dataset with a planted community graph.
    Synth(SynthArgs),
}

#[derive(Subcommand)]
enum GraphCommand {
    /// Build a sample graph and write it as a tab-separated edge list.
    Build {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, default_value = "graph.tsv")]
        out: PathBuf,
    },
}

#[derive(Args)]
struct SynthArgs {
    /// JSON file with generator settings.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    rho: Option<usize>,
    /// Comma-separated feature dimension of each view.
    #[arg(long)]
    dims: Option<String>,
    #[arg(long)]
    noise_std: Option<f64>,
    #[arg(long)]
    clusters: Option<usize>,
    #[arg(long)]
    separation: Option<f64>,
    #[arg(long)]
    spread: Option<f64>,
    #[arg(long)]
    p_in: Option<f64>,
    #[arg(long)]
    p_out: Option<f64>,
    #[arg(long)]
    identity_maps: bool,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "synth")]
    out: PathBuf,
}

impl SynthArgs {
    fn resolve(&self) -> Result<SynthSpec> {
        let mut spec = match &self.config {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| Error::Config(format!("cannot read {}: {e}", p.display())))?;
                serde_json::from_str(&text)
                    .map_err(|e| Error::Config(format!("{}: {e}", p.display())))?
            }
            None => SynthSpec::default(),
        };
        if let Some(v) = self.n {
            spec.n = v;
        }
        if let Some(v) = self.rho {
            spec.rho = v;
        }
        if let Some(v) = &self.dims {
            spec.dims = v
                .split(',')
                .map(|t| {
                    t.trim()
                        .parse()
                        .map_err(|_| Error::Config(format!("invalid view dimension '{t}'")))
                })
                .collect::<Result<_>>()?;
        }
        if let Some(v) = self.noise_std {
            spec.noise_std = v;
        }
        if let Some(v) = self.clusters {
            spec.clusters = v;
        }
        if let Some(v) = self.separation {
            spec.separation = v;
        }
        if let Some(v) = self.spread {
            spec.spread = v;
        }
        if let Some(v) = self.p_in {
            spec.p_in = v;
        }
        if let Some(v) = self.p_out {
            spec.p_out = v;
        }
        if self.identity_maps {
            spec.identity_maps = true;
        }
        if let Some(v) = self.seed {
            spec.seed = v;
        }
        Ok(spec)
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Fit {
            cfg,
            out,
            eigen_out,
        } => commands::cmd_fit(&cfg.resolve()?, &out, eigen_out.as_deref()),
        Command::Transform {
            cfg,
            model,
            train_views,
            out,
        } => commands::cmd_transform(&cfg.resolve()?, &model, &train_views, &out),
        Command::Evaluate {
            cfg,
            model,
            train_views,
            test_views,
            test_labels,
            out,
        } => commands::cmd_evaluate(
            &cfg.resolve()?,
            &commands::EvalInputs {
                model,
                train_views,
                test_views,
                test_labels,
                out,
            },
        ),
        Command::Bound { cfg, model, out } => {
            commands::cmd_bound(&cfg.resolve()?, &model, out.as_deref())
        }
        Command::Sweep { cfg, out } => commands::cmd_sweep(&cfg.resolve()?, &out),
        Command::Graph {
            command: GraphCommand::Build { cfg, out },
        } => commands::cmd_graph_build(&cfg.resolve()?, &out),
        Command::Synth(args) => commands::cmd_synth(&args.resolve()?, &args.out),
    }
}

fn report(kind: &str, message: &str) {
    let obj = serde_json::json!({ "error": { "kind": kind, "message": message } });
    eprintln!("{obj}");
}

fn init_threads() -> Result<()> {
    let Ok(raw) = std::env::var("MVGCCA_THREADS") else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        Error::Config(format!(
            "MVGCCA_THREADS must be a positive integer, got '{raw}'"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Config(format!("cannot size thread pool: {e}")))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help / --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            report("usage", e.render().to_string().trim());
            return ExitCode::from(2);
        }
    };
    match init_threads().and_then(|_| run(cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            report(e.kind(), &e.to_string());
            ExitCode::FAILURE
        }
    }
}
