//! Candidate-pair counts before blocking, after view blocking, and after
//! feature blocking.

use std::fmt;

use serde::Serialize;
use viewclean::catalog::Dataset;
use viewclean::distance::ImpactAggregation;
use viewclean::pairs::PairSpace;
use viewclean::relation::RecordId;
use viewclean::Result;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Stage {
    pub name: &'static str,
    pub rows: usize,
    pub pairs: u64,
    /// Each unordered pair counted in both orders.
    pub ordered_pairs: u64,
    pub positives: u64,
    pub ordered_positives: u64,
}

impl Stage {
    fn new(name: &'static str, rows: usize, pairs: u64, positives: u64) -> Stage {
        Stage {
            name,
            rows,
            pairs,
            ordered_pairs: 2 * pairs,
            positives,
            ordered_positives: 2 * positives,
        }
    }

    /// Same under either counting convention.
    pub fn positive_fraction(&self) -> f64 {
        if self.pairs == 0 {
            0.0
        } else {
            self.positives as f64 / self.pairs as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlockingReport {
    pub dataset: String,
    pub views: Vec<String>,
    pub stages: Vec<Stage>,
}

fn choose2(n: usize) -> u64 {
    let n = n as u64;
    n * n.saturating_sub(1) / 2
}

/// Without views the view stage is omitted; with the identity rule the
/// last stage equals the view stage.
pub fn blocking_report(dataset: &Dataset, views: &[String]) -> Result<BlockingReport> {
    let rel = &dataset.relation;
    let truth = dataset.truth.as_deref();
    let positives = |keep: &dyn Fn(&viewclean::PairKey) -> bool| {
        truth.map_or(0, |t| t.matches.iter().filter(|p| keep(p)).count() as u64)
    };

    let mut stages = vec![Stage::new("base", rel.len(), choose2(rel.len()), positives(&|_| true))];
    let members = if views.is_empty() {
        rel.ids().collect()
    } else {
        let dash = dataset.config.dashboard(views, ImpactAggregation::Max)?;
        let members = dash.provenance(rel)?;
        let inside = |id: RecordId| members.contains(&id);
        stages.push(Stage::new(
            "view",
            members.len(),
            choose2(members.len()),
            positives(&|p| inside(p.low()) && inside(p.high())),
        ));
        members
    };
    let space = PairSpace::build(rel, &members, &dataset.config.features, &dataset.config.blocking)?;
    let kept = space.pairs.len() as u64;
    let hits = truth.map_or(0, |t| space.pairs.iter().filter(|p| t.is_match(p)).count() as u64);
    stages.push(Stage::new(
        if views.is_empty() { "features" } else { "view+features" },
        members.len(),
        kept,
        hits,
    ));
    Ok(BlockingReport {
        dataset: dataset.config.name.clone(),
        views: views.to_vec(),
        stages,
    })
}

impl fmt::Display for BlockingReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "dataset {} views [{}]", self.dataset, self.views.join(", "))?;
        writeln!(
            f,
            "{:<14} {:>7} {:>14} {:>14} {:>10} {:>10} {:>9}",
            "stage", "rows", "pairs", "ordered", "positives", "ordered+", "pos %"
        )?;
        for s in &self.stages {
            writeln!(
                f,
                "{:<14} {:>7} {:>14} {:>14} {:>10} {:>10} {:>9.3}",
                s.name,
                s.rows,
                s.pairs,
                s.ordered_pairs,
                s.positives,
                s.ordered_positives,
                100.0 * s.positive_fraction()
            )?;
        }
        Ok(())
    }
}
