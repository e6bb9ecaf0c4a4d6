use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::{Parser, Subcommand};
use viewclean::catalog::{Catalog, TaskCache};
use viewclean::distance::{view_distance, view_transport, ImpactAggregation};
use viewclean::engine::Strategy;
use viewclean::{synth, Error, ViewResult};

use crate::blocking::blocking_report;
use crate::experiment::{run_experiment, write_outputs, ExperimentConfig};

#[derive(Debug, Parser)]
#[command(name = "viewclean", version, about = "View-driven duplicate cleaning experiments")]
pub struct Cli {
    /// Directory of dataset definitions (`*.json`).
    #[arg(long, global = true, default_value = "configs")]
    pub configs: PathBuf,

    /// Root that dataset file paths are resolved against.
    #[arg(long, global = true, env = "VIEWCLEAN_DATA", default_value = "data")]
    pub data_dir: PathBuf,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Repeated oracle-labeled cleaning runs; writes metrics.csv and summary.txt.
    Experiment {
        config: PathBuf,
        /// Overrides the config's output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        repetitions: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Replaces the config's strategies; repeatable.
        #[arg(long = "strategy")]
        strategies: Vec<Strategy>,
        /// Worker threads; defaults to one per core.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Row, pair, and positive counts at each blocking stage.
    BlockingReport {
        #[arg(long)]
        dataset: String,
        /// Views whose provenance bounds the candidate records; repeatable.
        #[arg(long = "view")]
        views: Vec<String>,
        #[arg(long)]
        json: bool,
    },
    /// Per-record view impact scores, highest first, as CSV.
    Impact {
        #[arg(long)]
        dataset: String,
        #[arg(long = "view", required = true)]
        views: Vec<String>,
        #[arg(long, value_enum, default_value = "max")]
        aggregation: Aggregation,
        #[arg(long)]
        top: Option<usize>,
    },
    /// Distance between two stored view results (JSON).
    Emd {
        a: PathBuf,
        b: PathBuf,
        /// Also print the optimal flow cells.
        #[arg(long)]
        flows: bool,
    },
    /// Writes a synthetic dataset as data.csv and matches.csv.
    Synth {
        #[arg(long, default_value_t = 300)]
        n: usize,
        #[arg(long, default_value_t = 0.15)]
        dup_rate: f64,
        #[arg(long, default_value_t = 0.1)]
        noise: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Starts the HTTP labeling service.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
        /// Persist sessions here and restore them on start.
        #[arg(long)]
        checkpoints: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum Aggregation {
    Max,
    Sum,
}

impl From<Aggregation> for ImpactAggregation {
    fn from(a: Aggregation) -> Self {
        match a {
            Aggregation::Max => ImpactAggregation::Max,
            Aggregation::Sum => ImpactAggregation::Sum,
        }
    }
}

pub const EXIT_FAILURE: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_MISSING_DATA: u8 = 3;

/// Maps an error chain to the process exit code.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    let engine = err.chain().find_map(|e| {
        e.downcast_ref::<Error>().or_else(|| match e.downcast_ref::<viewclean_service::ApiError>() {
            Some(viewclean_service::ApiError::Engine(inner)) => Some(inner),
            _ => None,
        })
    });
    match engine {
        Some(Error::MissingData { .. }) => EXIT_MISSING_DATA,
        Some(
            Error::Config(_)
            | Error::NotFound { .. }
            | Error::Parse { .. }
            | Error::UnknownColumn(_)
            | Error::UnknownFunction(_)
            | Error::Type(_),
        ) => EXIT_CONFIG,
        _ if err.chain().any(|e| e.downcast_ref::<clap::Error>().is_some()) => EXIT_CONFIG,
        _ => EXIT_FAILURE,
    }
}

fn cache(cli: &Cli) -> anyhow::Result<TaskCache> {
    let catalog = Catalog::load_dir(&cli.configs)?;
    Ok(TaskCache::new(catalog, cli.data_dir.clone()))
}

fn read_view(path: &Path) -> anyhow::Result<ViewResult> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text).map_err(|e| Error::parse(path, e.to_string()))?)
}

pub fn run(cli: Cli, out: &mut dyn Write) -> anyhow::Result<()> {
    match &cli.command {
        Command::Experiment {
            config,
            out: dir,
            repetitions,
            seed,
            strategies,
            threads,
        } => {
            let mut cfg = ExperimentConfig::from_file(config)?;
            if let Some(d) = dir {
                cfg.output = d.clone();
            }
            if let Some(r) = repetitions {
                cfg.repetitions = *r;
            }
            if let Some(s) = seed {
                cfg.master_seed = *s;
            }
            if !strategies.is_empty() {
                cfg.strategies = strategies.clone();
            }
            let cache = cache(&cli)?;
            let rows = match threads {
                Some(n) => rayon::ThreadPoolBuilder::new()
                    .num_threads(*n)
                    .build()
                    .context("building worker pool")?
                    .install(|| run_experiment(&cfg, &cache))?,
                None => run_experiment(&cfg, &cache)?,
            };
            let (metrics, summary) = write_outputs(&rows, &cfg.output)?;
            writeln!(out, "{} rows -> {}", rows.len(), metrics.display())?;
            writeln!(out, "summary -> {}", summary.display())?;
        }
        Command::BlockingReport { dataset, views, json } => {
            let cache = cache(&cli)?;
            let d = cache.dataset(dataset)?;
            for w in d.size_warnings() {
                tracing::warn!("{w}");
            }
            let report = blocking_report(&d, views)?;
            if *json {
                writeln!(out, "{}", serde_json::to_string_pretty(&report)?)?;
            } else {
                write!(out, "{report}")?;
            }
        }
        Command::Impact {
            dataset,
            views,
            aggregation,
            top,
        } => {
            let cache = cache(&cli)?;
            let d = cache.dataset(dataset)?;
            let dash = d.config.dashboard(views, (*aggregation).into())?;
            let mut scores: Vec<_> = dash.impacts(&d.relation)?.into_iter().collect();
            scores.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
            let mut w = csv::Writer::from_writer(out);
            let mut header = vec!["id".to_string(), "impact".to_string()];
            header.extend(d.relation.schema().iter().map(|c| c.name.clone()));
            w.write_record(&header)?;
            for (id, s) in scores.into_iter().take(top.unwrap_or(usize::MAX)) {
                let rec = d.relation.get(id).ok_or(Error::UnknownRecord(id))?;
                let mut row = vec![id.to_string(), s.to_string()];
                row.extend(rec.values.iter().map(|v| v.to_string()));
                w.write_record(&row)?;
            }
            w.flush()?;
        }
        Command::Emd { a, b, flows } => {
            let (va, vb) = (read_view(a)?, read_view(b)?);
            writeln!(out, "{}", view_distance(&va, &vb)?)?;
            if *flows {
                let t = view_transport(&va, &vb)?;
                for c in &t.flows {
                    writeln!(out, "{} {} {}", c.row, c.col, c.mass)?;
                }
            }
        }
        Command::Synth {
            n,
            dup_rate,
            noise,
            seed,
            out: dir,
        } => {
            let (rel, truth) = synth::generate_synthetic(*n, *dup_rate, *noise, *seed)?;
            synth::save(dir, &rel, &truth)?;
            writeln!(
                out,
                "{} records, {} planted pairs -> {}",
                rel.len(),
                truth.len(),
                dir.display()
            )?;
        }
        Command::Serve { addr, checkpoints } => {
            let state = viewclean_service::AppState::new(cache(&cli)?, checkpoints.clone());
            let restored = state.restore()?;
            if restored > 0 {
                tracing::info!("restored {restored} sessions");
            }
            tokio::runtime::Runtime::new()?.block_on(viewclean_service::serve(state, *addr))?;
        }
    }
    Ok(())
}
