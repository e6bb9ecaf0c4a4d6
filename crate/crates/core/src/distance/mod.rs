//! Distances between view results.
//!
//! Attributes compare by type: text by equality (0 or 1), numbers by absolute
//! difference normalized by the largest magnitude in that column across both
//! views. A tuple distance is the Euclidean norm of its attribute distances,
//! and the distance between two views is the Earth Mover's Distance with
//! uniform weight `1/|V|` per row.

pub mod emd;
mod impact;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::relation::{AttributeType, Column, Value};
use crate::view::ViewResult;

pub use emd::{FlowCell, Transport};
pub use impact::{aggregate_impacts, view_impact_scores, ImpactAggregation, ImpactTable};

/// Distance between an empty and a non-empty view.
pub const EMPTY_VIEW_DISTANCE: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceConfig {
    /// Largest consecutive-view change still counted as "no change".
    pub epsilon: f64,
    /// Number of trailing iterations that must all stay within `epsilon`.
    pub window: usize,
}

impl Default for DistanceConfig {
    fn default() -> Self {
        DistanceConfig {
            epsilon: 0.01,
            window: 3,
        }
    }
}

/// Type-based distance between two cells, in `[0, 1]`.
///
/// Two nulls are at distance 0; a null against any value is at distance 1.
/// `norm` is the column's normalization constant; a non-positive norm means
/// every value in the column is zero.
pub fn attribute_distance(a: &Value, b: &Value, ty: AttributeType, norm: f64) -> f64 {
    match (a, b) {
        (Value::Null, Value::Null) => 0.0,
        (Value::Null, _) | (_, Value::Null) => 1.0,
        _ => match ty {
            AttributeType::Text => {
                if a == b {
                    0.0
                } else {
                    1.0
                }
            }
            AttributeType::Number => match (a.as_f64(), b.as_f64()) {
                (Some(x), Some(y)) => {
                    if norm <= 0.0 {
                        0.0
                    } else {
                        ((x - y).abs() / norm).min(1.0)
                    }
                }
                _ => 1.0,
            },
        },
    }
}

/// Per-column normalization constants for a pair of views.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalizer {
    norms: Vec<f64>,
}

impl Normalizer {
    /// Max absolute value per numeric column over the rows of both views.
    pub fn for_views(schema: &[Column], views: &[&ViewResult]) -> Normalizer {
        let mut norms = vec![0.0f64; schema.len()];
        for v in views {
            for row in &v.rows {
                for ((n, c), cell) in norms.iter_mut().zip(schema).zip(row) {
                    if c.ty == AttributeType::Number {
                        if let Some(x) = cell.as_f64() {
                            *n = n.max(x.abs());
                        }
                    }
                }
            }
        }
        Normalizer { norms }
    }

    pub fn norms(&self) -> &[f64] {
        &self.norms
    }
}

/// Euclidean norm of the attribute distance vector of two rows.
pub fn tuple_distance(
    left: &[Value],
    right: &[Value],
    schema: &[Column],
    normalizer: &Normalizer,
) -> Result<f64> {
    if left.len() != schema.len() || right.len() != schema.len() {
        return Err(Error::SchemaMismatch(format!(
            "rows of arity {} and {} against {} columns",
            left.len(),
            right.len(),
            schema.len()
        )));
    }
    let sum: f64 = left
        .iter()
        .zip(right)
        .zip(schema)
        .zip(&normalizer.norms)
        .map(|(((a, b), c), &norm)| attribute_distance(a, b, c.ty, norm).powi(2))
        .sum();
    Ok(sum.sqrt())
}

fn check_schemas(v1: &ViewResult, v2: &ViewResult) -> Result<()> {
    if v1.schema != v2.schema {
        return Err(Error::SchemaMismatch(format!(
            "view schemas differ: {:?} vs {:?}",
            v1.schema, v2.schema
        )));
    }
    Ok(())
}

/// Row-major ground-distance matrix between the rows of two views.
pub fn cost_matrix(v1: &ViewResult, v2: &ViewResult) -> Result<Vec<f64>> {
    check_schemas(v1, v2)?;
    let normalizer = Normalizer::for_views(&v1.schema, &[v1, v2]);
    let mut costs = Vec::with_capacity(v1.len() * v2.len());
    for a in &v1.rows {
        for b in &v2.rows {
            costs.push(tuple_distance(a, b, &v1.schema, &normalizer)?);
        }
    }
    Ok(costs)
}

/// Optimal transport plan between two non-empty views.
pub fn view_transport(v1: &ViewResult, v2: &ViewResult) -> Result<Transport> {
    let costs = cost_matrix(v1, v2)?;
    if v1.is_empty() || v2.is_empty() {
        return Err(Error::Config("transport plan needs two non-empty views".into()));
    }
    Ok(emd::solve_uniform(&costs, v1.len(), v2.len()))
}

/// Earth Mover's Distance between two views. Not clamped: multi-attribute
/// tuple distances can exceed 1.
pub fn view_distance(v1: &ViewResult, v2: &ViewResult) -> Result<f64> {
    check_schemas(v1, v2)?;
    match (v1.is_empty(), v2.is_empty()) {
        (true, true) => Ok(0.0),
        (true, false) | (false, true) => Ok(EMPTY_VIEW_DISTANCE),
        (false, false) => {
            if v1.rows == v2.rows {
                return Ok(0.0);
            }
            Ok(view_transport(v1, v2)?.cost)
        }
    }
}

/// `1 - Distance(v, clean)`, with the distance clamped to `[0, 1]`.
pub fn quality(v: &ViewResult, clean: &ViewResult) -> Result<f64> {
    Ok(1.0 - view_distance(v, clean)?.clamp(0.0, 1.0))
}

/// True iff the last `window` changes are all within `epsilon`.
pub fn converged(history: &[f64], cfg: &DistanceConfig) -> bool {
    cfg.window > 0
        && history.len() >= cfg.window
        && history[history.len() - cfg.window..]
            .iter()
            .all(|&d| d <= cfg.epsilon)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cuisine_view(rows: &[(&str, f64)]) -> ViewResult {
        ViewResult {
            schema: vec![
                Column::new("cuisine", AttributeType::Text),
                Column::new("count", AttributeType::Number),
            ],
            rows: rows
                .iter()
                .map(|(c, n)| vec![Value::from(*c), Value::Number(*n)])
                .collect(),
        }
    }

    #[test]
    fn attribute_distances_from_the_worked_example() {
        let t = AttributeType::Text;
        let n = AttributeType::Number;
        assert_eq!(attribute_distance(&"American".into(), &"American".into(), t, 0.0), 0.0);
        assert!((attribute_distance(&23.0.into(), &17.0.into(), n, 23.0) - 0.2609).abs() < 1e-4);
        assert!((attribute_distance(&18.0.into(), &17.0.into(), n, 23.0) - 0.0435).abs() < 1e-4);
        assert!((attribute_distance(&23.0.into(), &18.0.into(), n, 23.0) - 0.217).abs() < 1e-3);
    }

    #[test]
    fn null_handling() {
        let n = AttributeType::Number;
        assert_eq!(attribute_distance(&Value::Null, &Value::Null, n, 5.0), 0.0);
        assert_eq!(attribute_distance(&Value::Null, &3.0.into(), n, 5.0), 1.0);
        assert_eq!(attribute_distance(&"x".into(), &Value::Null, AttributeType::Text, 0.0), 1.0);
        assert_eq!(attribute_distance(&0.0.into(), &0.0.into(), n, 0.0), 0.0);
    }

    #[test]
    fn tuple_distances_from_the_worked_example() {
        let v = cuisine_view(&[("American", 23.0), ("French", 18.0), ("Asian", 17.0)]);
        let norm = Normalizer::for_views(&v.schema, &[&v]);
        assert_eq!(norm.norms(), &[0.0, 23.0]);
        let d = |a: usize, b: usize| tuple_distance(&v.rows[a], &v.rows[b], &v.schema, &norm).unwrap();
        assert!((d(0, 1) - 1.023).abs() < 1e-3);
        assert!((d(0, 2) - 1.033).abs() < 1e-3);
        assert_eq!(d(1, 1), 0.0);
    }

    #[test]
    fn worked_example_emd() {
        let before = cuisine_view(&[("American", 23.0), ("French", 18.0), ("Asian", 18.0)]);
        let after = cuisine_view(&[("American", 23.0), ("French", 18.0), ("Asian", 17.0)]);
        let plan = view_transport(&before, &after).unwrap();
        assert!((plan.cost - 1.0 / 69.0).abs() < 1e-12);
        assert_eq!(plan.flows.len(), 3);
        for f in &plan.flows {
            assert_eq!(f.row, f.col);
            assert!((f.mass - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn one_row_versus_two() {
        let a = cuisine_view(&[("x", 4.0)]);
        let b = cuisine_view(&[("x", 2.0), ("y", 4.0)]);
        // d1 = 2/4, d2 = 1
        assert!((view_distance(&a, &b).unwrap() - 0.75).abs() < 1e-12);
    }

    #[test]
    fn empty_views() {
        let e = cuisine_view(&[]);
        let v = cuisine_view(&[("x", 1.0)]);
        assert_eq!(view_distance(&e, &e).unwrap(), 0.0);
        assert_eq!(view_distance(&e, &v).unwrap(), 1.0);
        assert_eq!(view_distance(&v, &e).unwrap(), 1.0);
    }

    #[test]
    fn schema_mismatch_is_an_error() {
        let v = cuisine_view(&[("x", 1.0)]);
        let mut w = v.clone();
        w.schema[1].ty = AttributeType::Text;
        w.rows[0][1] = Value::from("1");
        assert!(matches!(view_distance(&v, &w), Err(Error::SchemaMismatch(_))));
    }

    #[test]
    fn quality_clamps() {
        let a = cuisine_view(&[("x", 1.0)]);
        let b = cuisine_view(&[("y", 0.0)]);
        assert!(view_distance(&a, &b).unwrap() > 1.0);
        assert_eq!(quality(&a, &b).unwrap(), 0.0);
        assert_eq!(quality(&a, &a).unwrap(), 1.0);
    }

    #[test]
    fn convergence_window() {
        let cfg = DistanceConfig { epsilon: 0.01, window: 3 };
        assert!(converged(&[0.005, 0.0, 0.0], &cfg));
        assert!(!converged(&[0.0, 0.02, 0.0], &cfg));
        assert!(!converged(&[0.0, 0.0], &cfg));
        assert!(converged(&[0.5, 0.01, 0.0, 0.0], &cfg));
    }
}
