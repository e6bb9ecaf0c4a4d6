use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::relation::{RecordId, Relation};
use crate::view::ViewSpec;

use super::view_distance;

/// Impact score per provenance record. Records outside the view's
/// provenance are absent and have impact zero.
pub type ImpactTable = BTreeMap<RecordId, f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImpactAggregation {
    #[default]
    Max,
    Sum,
}

/// `Distance(V(R), V(R - t))` for every `t` in the provenance of `spec`.
pub fn view_impact_scores(spec: &ViewSpec, rel: &Relation) -> Result<ImpactTable> {
    let view = spec.compile(rel.schema())?;
    let full = view.evaluate(rel);
    let members: Vec<RecordId> = rel
        .records()
        .iter()
        .filter(|r| view.selects(r))
        .map(|r| r.id)
        .collect();
    let scores = members
        .par_iter()
        .map(|&t| {
            let without = view.evaluate_records(rel.records().iter().filter(|r| r.id != t));
            view_distance(&full, &without).map(|d| (t, d))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(scores.into_iter().collect())
}

/// Combines per-view tables; a record absent from every table stays absent.
pub fn aggregate_impacts(tables: &[ImpactTable], how: ImpactAggregation) -> ImpactTable {
    let mut out = ImpactTable::new();
    for table in tables {
        for (&id, &score) in table {
            out.entry(id)
                .and_modify(|acc| match how {
                    ImpactAggregation::Max => *acc = acc.max(score),
                    ImpactAggregation::Sum => *acc += score,
                })
                .or_insert(score);
        }
    }
    out
}
