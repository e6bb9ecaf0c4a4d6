//! Seeded random views, relations, and view specs for property tests.
#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::Rng;
use viewclean::relation::{AttributeType, Column, Relation, Value};
use viewclean::view::{Aggregate, Bin, BinExpr, OrderKey, Predicate, ViewResult, ViewSpec};

pub fn view_schema() -> Vec<Column> {
    vec![
        Column::new("label", AttributeType::Text),
        Column::new("x", AttributeType::Number),
        Column::new("y", AttributeType::Number),
    ]
}

/// A view with 1..=max_rows rows over a small value domain (so equal and
/// null cells occur).
pub fn random_view<R: Rng>(rng: &mut R, max_rows: usize) -> ViewResult {
    let rows = rng.gen_range(1..=max_rows);
    ViewResult {
        schema: view_schema(),
        rows: (0..rows)
            .map(|_| {
                vec![
                    Value::from(*["a", "b", "c"].choose(rng).unwrap()),
                    number_cell(rng, -20.0, 40.0),
                    number_cell(rng, 0.0, 5.0),
                ]
            })
            .collect(),
    }
}

fn number_cell<R: Rng>(rng: &mut R, lo: f64, hi: f64) -> Value {
    if rng.gen_bool(0.1) {
        Value::Null
    } else {
        Value::Number(rng.gen_range(lo..hi).round())
    }
}

const CITIES: [&str; 3] = ["sf", "la", "ny"];
const CUISINES: [&str; 5] = ["american", "french", "asian", "thai", "italian"];

pub fn random_relation<R: Rng>(rng: &mut R) -> Relation {
    let schema = vec![
        Column::new("name", AttributeType::Text),
        Column::new("city", AttributeType::Text),
        Column::new("cuisine", AttributeType::Text),
        Column::new("price", AttributeType::Number),
    ];
    let n = rng.gen_range(0..30);
    let rows = (0..n)
        .map(|k| {
            vec![
                Value::from(format!("r{k}").as_str()),
                Value::from(*CITIES.choose(rng).unwrap()),
                Value::from(*CUISINES.choose(rng).unwrap()),
                number_cell(rng, 1.0, 60.0),
            ]
        })
        .collect();
    Relation::from_rows(schema, rows).unwrap()
}

fn random_atom<R: Rng>(rng: &mut R) -> Predicate {
    match rng.gen_range(0..5) {
        0 => Predicate::Eq {
            column: "city".into(),
            value: Value::from(*CITIES.choose(rng).unwrap()),
        },
        1 => Predicate::Contains {
            column: "cuisine".into(),
            pattern: ["a", "an", "TH", "ital"].choose(rng).unwrap().to_string(),
            ignore_case: rng.gen_bool(0.5),
        },
        2 => Predicate::Lt {
            column: "price".into(),
            value: rng.gen_range(5.0..50.0),
        },
        3 => Predicate::Ge {
            column: "price".into(),
            value: rng.gen_range(5.0..50.0),
        },
        _ => Predicate::True,
    }
}

fn random_predicate<R: Rng>(rng: &mut R) -> Predicate {
    match rng.gen_range(0..4) {
        0 => Predicate::And(vec![random_atom(rng), random_atom(rng)]),
        1 => Predicate::Or(vec![random_atom(rng), random_atom(rng)]),
        _ => random_atom(rng),
    }
}

/// A spec drawn from the shapes the cleaning views use: plain selections,
/// Count*, grouped counts/averages, price bins, and top-k.
pub fn random_spec<R: Rng>(rng: &mut R) -> ViewSpec {
    let mut spec = ViewSpec::select("fixture", random_predicate(rng));
    match rng.gen_range(0..5) {
        0 => {
            spec.projection = vec!["cuisine".into(), "price".into()];
            if rng.gen_bool(0.5) {
                spec.order_by = vec![OrderKey { column: "price".into(), descending: rng.gen_bool(0.5) }];
                spec.limit = Some(rng.gen_range(1..6));
            }
        }
        1 => spec.aggregates = vec![Aggregate::count()],
        2 => {
            spec.group_by = vec!["cuisine".into()];
            spec.aggregates = vec![Aggregate::count(), Aggregate::avg("price")];
        }
        3 => {
            spec.derived = vec![BinExpr {
                name: "bucket".into(),
                column: "price".into(),
                bins: vec![
                    Bin { below: 10.0, label: "cheap".into() },
                    Bin { below: 30.0, label: "mid".into() },
                ],
                otherwise: "dear".into(),
            }];
            spec.group_by = vec!["bucket".into()];
            spec.aggregates = vec![Aggregate::count()];
        }
        _ => {
            spec.group_by = vec!["cuisine".into()];
            spec.aggregates = vec![Aggregate::count()];
            spec.order_by = vec![OrderKey { column: "count".into(), descending: true }];
            spec.limit = Some(rng.gen_range(1..4));
        }
    }
    spec
}
