use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::distance::ImpactTable;
use crate::error::Result;
use crate::pairs::{BlockingRule, PairSpace};
use crate::relation::{PairKey, RecordId, Relation};
use crate::view::ViewSpec;

use super::DashboardSpec;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairScore {
    pub score: f64,
    /// The endpoint whose impact the pair carries.
    pub generator: RecordId,
}

/// Candidate pairs keyed to the impact of their generating tuple.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PairScores {
    entries: BTreeMap<PairKey, PairScore>,
}

impl PairScores {
    /// A pair generated by both endpoints keeps the larger score; on a tie
    /// the smaller id is the generator. Tuples without an impact score 0.
    pub fn from_impacts(impacts: &ImpactTable, pairs: &[PairKey]) -> PairScores {
        let entries = pairs
            .iter()
            .map(|&p| {
                let lo = impacts.get(&p.low()).copied().unwrap_or(0.0);
                let hi = impacts.get(&p.high()).copied().unwrap_or(0.0);
                let score = if hi > lo {
                    PairScore { score: hi, generator: p.high() }
                } else {
                    PairScore { score: lo, generator: p.low() }
                };
                (p, score)
            })
            .collect();
        PairScores { entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, pair: &PairKey) -> Option<&PairScore> {
        self.entries.get(pair)
    }

    pub fn contains(&self, pair: &PairKey) -> bool {
        self.entries.contains_key(pair)
    }

    pub fn remove(&mut self, pair: &PairKey) -> Option<PairScore> {
        self.entries.remove(pair)
    }

    /// Entries in canonical pair order.
    pub fn iter(&self) -> impl Iterator<Item = (&PairKey, &PairScore)> {
        self.entries.iter()
    }

    pub fn keys(&self) -> impl Iterator<Item = &PairKey> {
        self.entries.keys()
    }
}

impl FromIterator<(PairKey, PairScore)> for PairScores {
    fn from_iter<I: IntoIterator<Item = (PairKey, PairScore)>>(iter: I) -> Self {
        PairScores {
            entries: iter.into_iter().collect(),
        }
    }
}

/// Impact scores for `spec`, then pairs over its provenance that pass `rule`.
pub fn pair_scores(spec: &ViewSpec, rel: &Relation, rule: &BlockingRule) -> Result<PairScores> {
    dashboard_pair_scores(&DashboardSpec::single(spec.clone()), rel, rule)
}

/// As [`pair_scores`], with impacts aggregated over the dashboard's views
/// and pairs over the union of their provenances.
pub fn dashboard_pair_scores(
    dash: &DashboardSpec,
    rel: &Relation,
    rule: &BlockingRule,
) -> Result<PairScores> {
    let impacts = dash.impacts(rel)?;
    let members = dash.provenance(rel)?;
    let space = PairSpace::build(rel, &members, &Vec::new(), rule)?;
    Ok(PairScores::from_impacts(&impacts, &space.pairs))
}
