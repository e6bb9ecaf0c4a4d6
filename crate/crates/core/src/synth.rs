//! Seeded synthetic restaurant-like data with planted duplicates.

use std::path::Path;

use rand::seq::{index, SliceRandom};
use rand::Rng;

use crate::error::{Error, Result};
use crate::pairs::{BlockingRule, FeatureDef, FeatureSpec, SimilarityFn};
use crate::relation::{AttributeType, Column, GroundTruth, PairKey, Record, RecordId, Relation, Value};
use crate::seed::rng_for;
use crate::view::{Aggregate, OrderKey, Predicate, ViewSpec};

const WORDS: [&str; 60] = [
    "golden", "dragon", "palace", "blue", "door", "corner", "cafe", "bistro", "grill", "house",
    "garden", "river", "stone", "oak", "maple", "sun", "moon", "star", "harbor", "market",
    "kitchen", "table", "spoon", "fork", "lantern", "bamboo", "lotus", "olive", "fig", "pepper",
    "salt", "smoke", "fire", "ember", "copper", "iron", "silver", "north", "south", "east",
    "west", "little", "grand", "royal", "village", "city", "square", "bridge", "tower", "mill",
    "orchard", "vine", "barrel", "anchor", "pearl", "jade", "ruby", "saffron", "basil", "thyme",
];

const CATEGORIES: [&str; 8] = [
    "american", "italian", "french", "asian", "mexican", "indian", "thai", "greek",
];

const CITIES: [(&str, f64); 5] = [
    ("springfield", 0.45),
    ("riverton", 0.2),
    ("lakeside", 0.15),
    ("hillcrest", 0.1),
    ("fairview", 0.1),
];

/// The city the default views select on.
pub const FOCUS_CITY: &str = "springfield";

pub fn schema() -> Vec<Column> {
    vec![
        Column::new("name", AttributeType::Text),
        Column::new("category", AttributeType::Text),
        Column::new("city", AttributeType::Text),
        Column::new("price", AttributeType::Number),
    ]
}

pub fn default_features() -> FeatureSpec {
    vec![
        FeatureDef::new("name", SimilarityFn::LevenshteinNorm),
        FeatureDef::new("name", SimilarityFn::Jaccard),
        FeatureDef::new("category", SimilarityFn::LevenshteinNorm),
        FeatureDef::new("price", SimilarityFn::NormEuclid),
    ]
}

pub fn default_blocking() -> BlockingRule {
    BlockingRule::Any(vec![
        BlockingRule::AtLeast {
            column: "name".into(),
            function: SimilarityFn::Jaccard,
            threshold: 0.3,
        },
        BlockingRule::AtLeast {
            column: "name".into(),
            function: SimilarityFn::LevenshteinNorm,
            threshold: 0.7,
        },
    ])
}

fn focus() -> Predicate {
    Predicate::Eq {
        column: "city".into(),
        value: Value::from(FOCUS_CITY),
    }
}

/// Three most frequent categories in the focus city.
pub fn top3_view() -> ViewSpec {
    ViewSpec {
        group_by: vec!["category".into()],
        aggregates: vec![Aggregate::count()],
        order_by: vec![OrderKey {
            column: "count".into(),
            descending: true,
        }],
        limit: Some(3),
        ..ViewSpec::select("Top3", focus())
    }
}

pub fn count_view() -> ViewSpec {
    ViewSpec {
        aggregates: vec![Aggregate::count()],
        ..ViewSpec::select("Count*", focus())
    }
}

pub fn avg_price_view() -> ViewSpec {
    ViewSpec {
        group_by: vec!["category".into()],
        aggregates: vec![Aggregate::avg("price")],
        ..ViewSpec::select("AvgPrice", focus())
    }
}

fn zipf_index<R: Rng>(rng: &mut R, n: usize) -> usize {
    let weights: Vec<f64> = (1..=n).map(|k| 1.0 / k as f64).collect();
    let total: f64 = weights.iter().sum();
    let mut x = rng.gen::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if x < *w {
            return i;
        }
        x -= w;
    }
    n - 1
}

fn pick_city<R: Rng>(rng: &mut R) -> &'static str {
    let mut x = rng.gen::<f64>();
    for (c, p) in CITIES {
        if x < p {
            return c;
        }
        x -= p;
    }
    CITIES[CITIES.len() - 1].0
}

fn round_cents(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

/// `round(noise · len)` random single-character edits (substitute, delete,
/// or insert a lowercase letter).
fn perturb_text<R: Rng>(s: &str, noise: f64, rng: &mut R) -> String {
    let mut chars: Vec<char> = s.chars().collect();
    let edits = (noise * chars.len() as f64).round() as usize;
    for _ in 0..edits {
        let letter = (b'a' + rng.gen_range(0..26u8)) as char;
        match rng.gen_range(0..3) {
            0 if !chars.is_empty() => {
                let i = rng.gen_range(0..chars.len());
                chars[i] = letter;
            }
            1 if chars.len() > 1 => {
                chars.remove(rng.gen_range(0..chars.len()));
            }
            _ => chars.insert(rng.gen_range(0..=chars.len()), letter),
        }
    }
    chars.into_iter().collect()
}

/// `n` base records, of which `⌈n · dup_rate⌉` get one perturbed copy.
/// Records are shuffled so copies are not adjacent; ids are positions.
pub fn generate_synthetic(n: usize, dup_rate: f64, noise: f64, seed: u64) -> Result<(Relation, GroundTruth)> {
    if !(dup_rate > 0.0 && dup_rate < 1.0) {
        return Err(Error::Config(format!("dup_rate {dup_rate} must lie in (0, 1)")));
    }
    if !(0.0..=1.0).contains(&noise) {
        return Err(Error::Config(format!("noise {noise} must lie in [0, 1]")));
    }
    let mut rng = rng_for(seed, &[]);
    let mut base: Vec<Vec<Value>> = Vec::with_capacity(n);
    for _ in 0..n {
        let words = rng.gen_range(2..=3);
        let name = (0..words)
            .map(|_| *WORDS.choose(&mut rng).expect("non-empty"))
            .collect::<Vec<_>>()
            .join(" ");
        let category = CATEGORIES[zipf_index(&mut rng, CATEGORIES.len())];
        let city = pick_city(&mut rng);
        let price = round_cents(rng.gen_range(5.0..100.0));
        base.push(vec![name.as_str().into(), category.into(), city.into(), price.into()]);
    }
    let dups = ((n as f64) * dup_rate).ceil() as usize;
    let dups = dups.min(n);
    let mut chosen = index::sample(&mut rng, n, dups).into_vec();
    chosen.sort_unstable();

    // (row, original base index)
    let mut rows: Vec<(Vec<Value>, usize)> = base.iter().cloned().zip(0..).collect();
    for &i in &chosen {
        let src = &base[i];
        let name = perturb_text(src[0].as_str().expect("text"), noise, &mut rng);
        let price = src[3].as_f64().expect("number");
        let price = round_cents(price * (1.0 + rng.gen_range(-1.0..=1.0) * noise));
        rows.push((vec![name.as_str().into(), src[1].clone(), src[2].clone(), price.into()], i));
    }
    rows.shuffle(&mut rng);

    let mut first_seen: Vec<Option<RecordId>> = vec![None; n];
    let mut matches = Vec::with_capacity(dups);
    let mut records = Vec::with_capacity(rows.len());
    for (pos, (values, origin)) in rows.into_iter().enumerate() {
        let id = RecordId(pos as u32);
        match first_seen[origin] {
            Some(other) => matches.push(PairKey::new(other, id).expect("distinct positions")),
            None => first_seen[origin] = Some(id),
        }
        records.push(Record { id, values });
    }
    Ok((Relation::new(schema(), records)?, GroundTruth::new(matches)))
}

/// Writes `data.csv` (with an `id` column) and `matches.csv` under `dir`.
pub fn save(dir: &Path, rel: &Relation, truth: &GroundTruth) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let data = dir.join("data.csv");
    let mut w = csv::Writer::from_path(&data).map_err(|e| Error::parse(&data, e.to_string()))?;
    let mut header = vec!["id".to_string()];
    header.extend(rel.schema().iter().map(|c| c.name.clone()));
    let csv_err = |path: &Path, e: csv::Error| Error::parse(path, e.to_string());
    w.write_record(&header).map_err(|e| csv_err(&data, e))?;
    for r in rel.records() {
        let mut row = vec![r.id.to_string()];
        row.extend(r.values.iter().map(|v| v.to_string()));
        w.write_record(&row).map_err(|e| csv_err(&data, e))?;
    }
    w.flush().map_err(|e| Error::io(&data, e))?;

    let path = dir.join("matches.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| csv_err(&path, e))?;
    w.write_record(["id1", "id2"]).map_err(|e| csv_err(&path, e))?;
    for p in &truth.matches {
        w.write_record([p.low().to_string(), p.high().to_string()])
            .map_err(|e| csv_err(&path, e))?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    Ok(())
}
