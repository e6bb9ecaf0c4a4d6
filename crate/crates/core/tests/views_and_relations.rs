#[path = "support/fixtures.rs"]
mod fixtures;

use std::collections::BTreeSet;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use viewclean::distance::view_impact_scores;
use viewclean::relation::{apply_dedup, AttributeType, Column, PairKey, RecordId, Relation, Value};
use viewclean::view::{evaluate, provenance, OrderKey};

#[test]
fn records_outside_provenance_have_no_impact() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x10CA);
    for _ in 0..100 {
        let rel = fixtures::random_relation(&mut rng);
        let spec = fixtures::random_spec(&mut rng);
        let prov = provenance(&spec, &rel).unwrap();
        let full = evaluate(&spec, &rel).unwrap();
        let impacts = view_impact_scores(&spec, &rel).unwrap();
        assert_eq!(impacts.keys().copied().collect::<BTreeSet<_>>(), prov);
        for r in rel.records().iter().filter(|r| !prov.contains(&r.id)) {
            let without = rel.without(&BTreeSet::from([r.id]));
            assert_eq!(evaluate(&spec, &without).unwrap(), full);
        }
        assert!(impacts.values().all(|s| s.is_finite() && *s >= 0.0));
    }
}

#[test]
fn provenance_ignores_order_and_limit() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..50 {
        let rel = fixtures::random_relation(&mut rng);
        let mut spec = fixtures::random_spec(&mut rng);
        let before = provenance(&spec, &rel).unwrap();
        spec.limit = Some(1);
        spec.order_by.clear();
        assert_eq!(provenance(&spec, &rel).unwrap(), before);
    }
}

#[test]
fn removing_a_record_moves_its_group_count_by_one() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..30 {
        let rel = fixtures::random_relation(&mut rng);
        let mut spec = viewclean::ViewSpec::select("g", viewclean::view::Predicate::True);
        spec.group_by = vec!["cuisine".into()];
        spec.aggregates = vec![viewclean::view::Aggregate::count()];
        spec.order_by = vec![OrderKey { column: "cuisine".into(), descending: false }];
        let full = evaluate(&spec, &rel).unwrap();
        for r in rel.records() {
            let v = evaluate(&spec, &rel.without(&BTreeSet::from([r.id]))).unwrap();
            let cuisine = &r.values[2];
            let count = |view: &viewclean::ViewResult| {
                view.rows
                    .iter()
                    .find(|row| &row[0] == cuisine)
                    .map_or(0.0, |row| row[1].as_f64().unwrap())
            };
            assert_eq!(count(&full) - count(&v), 1.0);
        }
    }
}

fn numbered(n: u32) -> Relation {
    let schema = vec![Column::new("x", AttributeType::Number)];
    Relation::from_rows(schema, (0..n).map(|i| vec![Value::Number(i as f64)]).collect()).unwrap()
}

proptest! {
    #[test]
    fn dedup_is_idempotent_and_counts_components(edges in prop::collection::vec((0u32..20, 0u32..20), 0..25)) {
        let rel = numbered(20);
        let pairs: BTreeSet<PairKey> = edges
            .into_iter()
            .filter_map(|(a, b)| PairKey::new(RecordId(a), RecordId(b)))
            .collect();
        let once = apply_dedup(&rel, &pairs).unwrap();
        let twice = apply_dedup(&once, pairs.iter().filter(|p| once.contains(p.low()) && once.contains(p.high()))).unwrap();
        prop_assert_eq!(once.records(), twice.records());

        // oracle: count components by flood fill
        let mut seen = BTreeSet::new();
        let mut lost = 0usize;
        let members: BTreeSet<RecordId> = pairs.iter().flat_map(|p| [p.low(), p.high()]).collect();
        for &start in &members {
            if !seen.insert(start) {
                continue;
            }
            let mut stack = vec![start];
            let mut size = 1;
            while let Some(x) = stack.pop() {
                for p in pairs.iter().filter(|p| p.contains(x)) {
                    let y = if p.low() == x { p.high() } else { p.low() };
                    if seen.insert(y) {
                        size += 1;
                        stack.push(y);
                    }
                }
            }
            lost += size - 1;
        }
        prop_assert_eq!(once.len(), 20 - lost);
        // survivors keep their original order
        let ids: Vec<u32> = once.records().iter().map(|r| r.id.0).collect();
        prop_assert!(ids.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn pair_keys_are_canonical(a in 0u32..1000, b in 0u32..1000) {
        prop_assume!(a != b);
        let p = PairKey::new(RecordId(a), RecordId(b)).unwrap();
        prop_assert_eq!(p, PairKey::new(RecordId(b), RecordId(a)).unwrap());
        prop_assert!(p.low() < p.high());
    }
}
