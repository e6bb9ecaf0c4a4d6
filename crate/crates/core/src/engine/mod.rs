//! The view-driven active-learning loop.

mod scores;
mod select;
mod session;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::classifier::TrainConfig;
use crate::distance::{aggregate_impacts, view_distance, view_impact_scores, ImpactAggregation, ImpactTable};
use crate::error::{Error, Result};
use crate::pairs::{BlockingRule, FeatureSpec, PairSpace};
use crate::relation::{dedup_victims, GroundTruth, PairKey, RecordId, Relation};
use crate::view::{CompiledView, ViewResult, ViewSpec};

pub use scores::{dashboard_pair_scores, pair_scores, PairScore, PairScores};
pub use select::{
    hybrid_weights, round_robin_weights, select_baseline, select_bias, select_hybrid, select_top,
    top_pair_scores, Baseline,
};
pub use session::{drive, run_cleaning, IterationRecord, Session, SessionSummary};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    #[default]
    ViewImpact,
    Hybrid,
    Uncertainty,
    Entropy,
    Random,
    RoundRobin,
}

impl Strategy {
    pub const ALL: [Strategy; 6] = [
        Strategy::ViewImpact,
        Strategy::Hybrid,
        Strategy::Uncertainty,
        Strategy::Entropy,
        Strategy::Random,
        Strategy::RoundRobin,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::ViewImpact => "view_impact",
            Strategy::Hybrid => "hybrid",
            Strategy::Uncertainty => "uncertainty",
            Strategy::Entropy => "entropy",
            Strategy::Random => "random",
            Strategy::RoundRobin => "round_robin",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown strategy `{s}`")))
    }
}

/// How the first batch is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialSampling {
    /// Weighted by view impact.
    Bias,
    Random,
    RoundRobin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Budget,
    Converged,
    /// No unlabeled candidate pairs remain.
    Exhausted,
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StopReason::Budget => "budget",
            StopReason::Converged => "converged",
            StopReason::Exhausted => "exhausted",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CleaningConfig {
    /// Total labels `l`, including the first batch.
    pub budget: usize,
    pub batch: usize,
    pub initial_batch: usize,
    pub alpha: f64,
    pub strategy: Strategy,
    /// `None` follows the strategy: random and round-robin runs draw the
    /// first batch the same way, every other strategy uses bias sampling.
    pub initial: Option<InitialSampling>,
    pub epsilon: f64,
    pub window: usize,
    pub seed: u64,
    /// Hold out half of the candidate pairs for F1; they are classified
    /// for cleaning but never offered for labeling or trained on.
    pub holdout: bool,
    pub ensemble_size: usize,
    pub train: TrainConfig,
}

impl Default for CleaningConfig {
    fn default() -> Self {
        CleaningConfig {
            budget: 73,
            batch: 20,
            initial_batch: 13,
            alpha: 0.5,
            strategy: Strategy::ViewImpact,
            initial: None,
            epsilon: 0.01,
            window: 3,
            seed: 0,
            holdout: true,
            ensemble_size: 10,
            train: TrainConfig::default(),
        }
    }
}

impl CleaningConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.initial_batch == 0 {
            return fail("initial batch must be at least 1".into());
        }
        if self.initial_batch > self.budget {
            return fail(format!(
                "initial batch {} exceeds budget {}",
                self.initial_batch, self.budget
            ));
        }
        if self.batch == 0 {
            return fail("batch size must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return fail(format!("alpha {} outside [0, 1]", self.alpha));
        }
        if !(self.epsilon >= 0.0) {
            return fail(format!("epsilon {} must be non-negative", self.epsilon));
        }
        if self.window == 0 {
            return fail("window must be at least 1".into());
        }
        if self.ensemble_size == 0 {
            return fail("ensemble size must be at least 1".into());
        }
        Ok(())
    }

    pub fn initial_sampling(&self) -> InitialSampling {
        self.initial.unwrap_or(match self.strategy {
            Strategy::Random => InitialSampling::Random,
            Strategy::RoundRobin => InitialSampling::RoundRobin,
            _ => InitialSampling::Bias,
        })
    }
}

/// Views cleaned together; tuple impact is the MAX or SUM over views.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DashboardSpec {
    pub views: Vec<ViewSpec>,
    #[serde(default)]
    pub aggregation: ImpactAggregation,
}

impl DashboardSpec {
    pub fn single(view: ViewSpec) -> Self {
        DashboardSpec {
            views: vec![view],
            aggregation: ImpactAggregation::Max,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.views.is_empty() {
            return Err(Error::Config("dashboard has no views".into()));
        }
        Ok(())
    }

    pub fn impacts(&self, rel: &Relation) -> Result<ImpactTable> {
        self.validate()?;
        let tables = self
            .views
            .iter()
            .map(|v| view_impact_scores(v, rel))
            .collect::<Result<Vec<_>>>()?;
        Ok(aggregate_impacts(&tables, self.aggregation))
    }

    /// Union of the member views' provenances.
    pub fn provenance(&self, rel: &Relation) -> Result<BTreeSet<RecordId>> {
        let mut out = BTreeSet::new();
        for v in &self.views {
            out.extend(crate::view::provenance(v, rel)?);
        }
        Ok(out)
    }
}

/// Everything a cleaning run needs besides its configuration.
#[derive(Debug, Clone)]
pub struct CleaningTask {
    pub relation: Arc<Relation>,
    pub dashboard: DashboardSpec,
    /// Learning features.
    pub features: FeatureSpec,
    pub blocking: BlockingRule,
    /// When known, used only for reporting (distance to the clean view and
    /// holdout F1), never for selection.
    pub truth: Option<Arc<GroundTruth>>,
}

/// Seed-independent precomputation shared by every run over one task:
/// impact scores, blocked pairs with features, and the dirty and clean views.
#[derive(Debug)]
pub struct PreparedTask {
    pub task: CleaningTask,
    compiled: Vec<CompiledView>,
    pub impacts: ImpactTable,
    pub scores: PairScores,
    pub space: PairSpace,
    pub dirty: Vec<ViewResult>,
    pub clean: Option<Vec<ViewResult>>,
}

impl PreparedTask {
    pub fn new(task: CleaningTask) -> Result<PreparedTask> {
        task.dashboard.validate()?;
        let rel = &task.relation;
        let compiled = task
            .dashboard
            .views
            .iter()
            .map(|v| v.compile(rel.schema()))
            .collect::<Result<Vec<_>>>()?;
        let impacts = task.dashboard.impacts(rel)?;
        let members = task.dashboard.provenance(rel)?;
        let space = PairSpace::build(rel, &members, &task.features, &task.blocking)?;
        let scores = PairScores::from_impacts(&impacts, &space.pairs);
        let dirty: Vec<ViewResult> = compiled.iter().map(|c| c.evaluate(rel)).collect();
        let mut prepared = PreparedTask {
            compiled,
            impacts,
            scores,
            space,
            dirty,
            clean: None,
            task,
        };
        if let Some(truth) = prepared.task.truth.clone() {
            prepared.clean = Some(prepared.views_after(truth.matches.iter())?);
        }
        Ok(prepared)
    }

    pub fn relation(&self) -> &Relation {
        &self.task.relation
    }

    pub fn view_names(&self) -> Vec<&str> {
        self.task.dashboard.views.iter().map(|v| v.name.as_str()).collect()
    }

    /// Member views over the relation with the given duplicates removed.
    pub fn views_after<'a>(&self, dups: impl IntoIterator<Item = &'a PairKey>) -> Result<Vec<ViewResult>> {
        let rel = self.relation();
        let victims = dedup_victims(rel, dups)?;
        Ok(self
            .compiled
            .iter()
            .map(|c| c.evaluate_records(rel.records().iter().filter(|r| !victims.contains(&r.id))))
            .collect())
    }

    /// Per-view distances between `current` and the clean views, if known.
    pub fn distances_to_clean(&self, current: &[ViewResult]) -> Result<Option<Vec<f64>>> {
        self.clean
            .as_ref()
            .map(|clean| per_view_distance(current, clean))
            .transpose()
    }
}

pub fn per_view_distance(a: &[ViewResult], b: &[ViewResult]) -> Result<Vec<f64>> {
    a.iter().zip(b).map(|(x, y)| view_distance(x, y)).collect()
}

/// Dashboard distance: the largest per-view distance.
pub fn dashboard_distance(a: &[ViewResult], b: &[ViewResult]) -> Result<f64> {
    Ok(per_view_distance(a, b)?.into_iter().fold(0.0, f64::max))
}
