//! Repeated, seeded cleaning runs with an oracle labeler.
//!
//! Every run's seed is `derive_seed(master, [view, grid, rep])`, so one run
//! can be re-executed alone and strategies compared under the same seed see
//! the same holdout split. Runs execute on a worker pool; rows are written
//! in run order, which keeps the metrics file byte-identical across
//! invocations.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use viewclean::catalog::TaskCache;
use viewclean::distance::ImpactAggregation;
use viewclean::engine::{run_cleaning, CleaningConfig, IterationRecord, PreparedTask, Strategy};
use viewclean::labeler::OracleLabeler;
use viewclean::seed::derive_seed;
use viewclean::{Error, Result};

/// One entry is a single view name or a list of names cleaned as a dashboard.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ViewGroup {
    One(String),
    Dashboard(Vec<String>),
}

impl ViewGroup {
    pub fn names(&self) -> Vec<String> {
        match self {
            ViewGroup::One(v) => vec![v.clone()],
            ViewGroup::Dashboard(vs) => vs.clone(),
        }
    }

    pub fn label(&self) -> String {
        self.names().join("+")
    }
}

/// Sweep axes. An empty axis keeps the base configuration's value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Grid {
    pub budget: Vec<usize>,
    pub batch: Vec<usize>,
    pub initial_batch: Vec<usize>,
    pub alpha: Vec<f64>,
    pub window: Vec<usize>,
}

impl Grid {
    /// Cartesian product in axis order budget, batch, initial_batch, alpha,
    /// window (last axis varies fastest). Each budget is rounded down to
    /// whole batches, so a point runs `(budget - initial_batch) / batch`
    /// batches after the first.
    pub fn points(&self, base: &CleaningConfig) -> Vec<CleaningConfig> {
        fn axis<T: Clone>(v: &[T], default: T) -> Vec<T> {
            if v.is_empty() {
                vec![default]
            } else {
                v.to_vec()
            }
        }
        let mut out = Vec::new();
        for budget in axis(&self.budget, base.budget) {
            for batch in axis(&self.batch, base.batch) {
                for initial_batch in axis(&self.initial_batch, base.initial_batch) {
                    for &alpha in &axis(&self.alpha, base.alpha) {
                        for window in axis(&self.window, base.window) {
                            let whole = budget.saturating_sub(initial_batch) / batch.max(1) * batch;
                            out.push(CleaningConfig {
                                budget: if budget >= initial_batch { initial_batch + whole } else { budget },
                                batch,
                                initial_batch,
                                alpha,
                                window,
                                ..base.clone()
                            });
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: String,
    pub views: Vec<ViewGroup>,
    #[serde(default)]
    pub aggregation: ImpactAggregation,
    pub strategies: Vec<Strategy>,
    pub repetitions: usize,
    #[serde(default)]
    pub master_seed: u64,
    /// Seed and strategy are overwritten per run.
    #[serde(default)]
    pub base: CleaningConfig,
    #[serde(default)]
    pub grid: Grid,
    #[serde(default = "default_output")]
    pub output: PathBuf,
}

fn default_output() -> PathBuf {
    PathBuf::from("results")
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<ExperimentConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: ExperimentConfig =
            serde_json::from_str(&text).map_err(|e| Error::parse(path, e.to_string()))?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.to_string()));
        if self.views.is_empty() || self.views.iter().any(|g| g.names().is_empty()) {
            return fail("every view group must name at least one view");
        }
        if self.strategies.is_empty() {
            return fail("no strategies given");
        }
        if self.repetitions == 0 {
            return fail("repetitions must be at least 1");
        }
        for p in self.grid.points(&self.base) {
            p.validate()?;
        }
        Ok(())
    }

    /// Every run in output order: view group, grid point, strategy, repetition.
    pub fn runs(&self) -> Vec<RunSpec> {
        let points = self.grid.points(&self.base);
        let mut out = Vec::new();
        for (vi, group) in self.views.iter().enumerate() {
            for (gi, point) in points.iter().enumerate() {
                for &strategy in &self.strategies {
                    for rep in 0..self.repetitions {
                        let seed = derive_seed(self.master_seed, &[vi as u64, gi as u64, rep as u64]);
                        out.push(RunSpec {
                            id: format!("v{vi}-g{gi}-{strategy}-r{rep}"),
                            view_index: vi,
                            grid_index: gi,
                            rep,
                            views: group.label(),
                            cfg: CleaningConfig {
                                seed,
                                strategy,
                                ..point.clone()
                            },
                        });
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub id: String,
    pub view_index: usize,
    pub grid_index: usize,
    pub rep: usize,
    pub views: String,
    pub cfg: CleaningConfig,
}

/// One line of the metrics file. Iteration 0 is the dirty view.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub run: String,
    pub strategy: Strategy,
    pub views: String,
    pub budget: usize,
    pub batch: usize,
    pub initial_batch: usize,
    pub alpha: f64,
    pub window: usize,
    pub rep: usize,
    pub seed: u64,
    pub iteration: usize,
    pub labels_used: usize,
    pub positives: usize,
    pub predicted_dups: usize,
    pub distance_to_clean: Option<f64>,
    pub distance_to_prev: Option<f64>,
    pub f1: Option<f64>,
    /// Per-view distances to the clean views, `;`-separated.
    pub per_view: String,
    /// Set on the run's last row only.
    pub stopped: Option<String>,
}

fn rows_for(run: &RunSpec, log: &[IterationRecord], stopped: Option<String>) -> Vec<MetricRow> {
    log.iter()
        .enumerate()
        .map(|(i, rec)| MetricRow {
            run: run.id.clone(),
            strategy: run.cfg.strategy,
            views: run.views.clone(),
            budget: run.cfg.budget,
            batch: run.cfg.batch,
            initial_batch: run.cfg.initial_batch,
            alpha: run.cfg.alpha,
            window: run.cfg.window,
            rep: run.rep,
            seed: run.cfg.seed,
            iteration: rec.batch,
            labels_used: rec.labels_used,
            positives: rec.positives_labeled,
            predicted_dups: rec.predicted_dups,
            distance_to_clean: rec.distance_to_clean,
            distance_to_prev: rec.view_change,
            f1: rec.f1,
            per_view: rec
                .per_view_to_clean
                .iter()
                .flatten()
                .map(|d| d.to_string())
                .collect::<Vec<_>>()
                .join(";"),
            stopped: if i + 1 == log.len() { stopped.clone() } else { None },
        })
        .collect()
}

pub fn run_one(prepared: Arc<PreparedTask>, run: &RunSpec) -> Result<Vec<MetricRow>> {
    let truth = prepared
        .task
        .truth
        .clone()
        .ok_or_else(|| Error::Config("experiments need ground-truth matches".into()))?;
    let mut oracle = OracleLabeler::new(&truth);
    let session = run_cleaning(prepared, &mut oracle, run.cfg.clone())?;
    Ok(rows_for(run, session.log(), session.stopped().map(|r| r.to_string())))
}

/// Runs every grid point and repetition. Rows come back in run order.
pub fn run_experiment(cfg: &ExperimentConfig, cache: &TaskCache) -> Result<Vec<MetricRow>> {
    cfg.validate()?;
    let dataset = cache.dataset(&cfg.dataset)?;
    for w in dataset.size_warnings() {
        tracing::warn!("{w}");
    }
    if dataset.truth.is_none() {
        return Err(Error::Config(format!(
            "dataset `{}` has no matches file; experiments need ground truth",
            cfg.dataset
        )));
    }
    let prepared = cfg
        .views
        .iter()
        .map(|g| cache.prepared(&cfg.dataset, &g.names(), cfg.aggregation))
        .collect::<Result<Vec<_>>>()?;
    let runs = cfg.runs();
    tracing::info!("{} runs over {} view groups", runs.len(), prepared.len());
    let per_run = runs
        .par_iter()
        .map(|r| run_one(prepared[r.view_index].clone(), r))
        .collect::<Result<Vec<_>>>()?;
    Ok(per_run.into_iter().flatten().collect())
}

pub fn write_metrics(rows: &[MetricRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::parse(path, e.to_string()))?;
    for r in rows {
        w.serialize(r).map_err(|e| Error::parse(path, e.to_string()))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_metrics(path: &Path) -> Result<Vec<MetricRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::parse(path, e.to_string()))?;
    r.deserialize()
        .collect::<std::result::Result<Vec<MetricRow>, _>>()
        .map_err(|e| Error::parse(path, e.to_string()))
}

/// Mean and sample standard deviation.
pub fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Per-iteration curve for one (views, grid point, strategy) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    pub iteration: usize,
    pub labels: (f64, f64),
    pub distance: Option<(f64, f64)>,
    pub f1: Option<(f64, f64)>,
    /// Runs still going at this iteration.
    pub active: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub views: String,
    pub strategy: Strategy,
    pub grid: String,
    pub runs: usize,
    pub points: Vec<CurvePoint>,
}

/// Stopped runs carry their last row forward so every iteration averages
/// over all repetitions.
pub fn summarize(rows: &[MetricRow]) -> Vec<Curve> {
    let mut cells: Vec<(String, Vec<Vec<&MetricRow>>)> = Vec::new();
    for r in rows {
        let key = format!(
            "{}\u{1f}{}\u{1f}{}",
            r.views,
            r.strategy,
            grid_label(r)
        );
        let cell = match cells.iter().position(|(k, _)| *k == key) {
            Some(i) => &mut cells[i].1,
            None => {
                cells.push((key, Vec::new()));
                &mut cells.last_mut().expect("just pushed").1
            }
        };
        match cell.last_mut() {
            Some(run) if run[0].run == r.run => run.push(r),
            _ => cell.push(vec![r]),
        }
    }
    cells
        .into_iter()
        .map(|(_, runs)| {
            let first = runs[0][0];
            let len = runs.iter().map(Vec::len).max().unwrap_or(0);
            let points = (0..len)
                .map(|i| {
                    let at: Vec<&MetricRow> = runs.iter().map(|run| run[i.min(run.len() - 1)]).collect();
                    let collect = |f: fn(&MetricRow) -> Option<f64>| {
                        let xs: Vec<f64> = at.iter().filter_map(|r| f(r)).collect();
                        (xs.len() == at.len()).then(|| mean_sd(&xs))
                    };
                    CurvePoint {
                        iteration: i,
                        labels: mean_sd(&at.iter().map(|r| r.labels_used as f64).collect::<Vec<_>>()),
                        distance: collect(|r| r.distance_to_clean),
                        f1: collect(|r| r.f1),
                        active: runs.iter().filter(|run| run.len() > i).count(),
                    }
                })
                .collect();
            Curve {
                views: first.views.clone(),
                strategy: first.strategy,
                grid: grid_label(first),
                runs: runs.len(),
                points,
            }
        })
        .collect()
}

fn grid_label(r: &MetricRow) -> String {
    format!(
        "l={} b={} b0={} alpha={} window={}",
        r.budget, r.batch, r.initial_batch, r.alpha, r.window
    )
}

fn fmt_pair(p: Option<(f64, f64)>) -> String {
    match p {
        Some((m, s)) => format!("{m:.4} ± {s:.4}"),
        None => "-".to_string(),
    }
}

pub fn render_summary(curves: &[Curve]) -> String {
    let mut out = String::new();
    for c in curves {
        let _ = writeln!(out, "{} | {} | {} | {} runs", c.views, c.strategy, c.grid, c.runs);
        let _ = writeln!(out, "  iter  labels          distance_to_clean    f1                   active");
        for p in &c.points {
            let _ = writeln!(
                out,
                "  {:>4}  {:>14}  {:>19}  {:>19}  {:>6}",
                p.iteration,
                format!("{:.1} ± {:.1}", p.labels.0, p.labels.1),
                fmt_pair(p.distance),
                fmt_pair(p.f1),
                p.active
            );
        }
        out.push('\n');
    }
    out
}

/// Writes `metrics.csv` and `summary.txt` under `dir`; returns their paths.
pub fn write_outputs(rows: &[MetricRow], dir: &Path) -> Result<(PathBuf, PathBuf)> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let metrics = dir.join("metrics.csv");
    write_metrics(rows, &metrics)?;
    let summary = dir.join("summary.txt");
    let mut f = std::fs::File::create(&summary).map_err(|e| Error::io(&summary, e))?;
    f.write_all(render_summary(&summarize(rows)).as_bytes())
        .map_err(|e| Error::io(&summary, e))?;
    Ok((metrics, summary))
}
