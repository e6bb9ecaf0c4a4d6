//! Candidate pairs, similarity features, and blocking.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io::{BufRead, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::relation::{AttributeType, PairKey, Record, RecordId, Relation, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimilarityFn {
    LevenshteinNorm,
    Jaccard,
    JaccardContainment,
    Cosine,
    NormEuclid,
}

impl SimilarityFn {
    pub const ALL: [SimilarityFn; 5] = [
        SimilarityFn::LevenshteinNorm,
        SimilarityFn::Jaccard,
        SimilarityFn::JaccardContainment,
        SimilarityFn::Cosine,
        SimilarityFn::NormEuclid,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SimilarityFn::LevenshteinNorm => "levenshtein_norm",
            SimilarityFn::Jaccard => "jaccard",
            SimilarityFn::JaccardContainment => "jaccard_containment",
            SimilarityFn::Cosine => "cosine",
            SimilarityFn::NormEuclid => "norm_euclid",
        }
    }

    pub fn accepts(self, ty: AttributeType) -> bool {
        match self {
            SimilarityFn::NormEuclid => ty == AttributeType::Number,
            _ => ty == AttributeType::Text,
        }
    }
}

impl fmt::Display for SimilarityFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SimilarityFn {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SimilarityFn::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::UnknownFunction(s.to_string()))
    }
}

/// Lowercases, turns punctuation into spaces, and splits on whitespace.
pub fn tokenize(s: &str) -> Vec<String> {
    let cleaned: String = s
        .chars()
        .map(|c| if c.is_alphanumeric() { c } else { ' ' })
        .collect::<String>()
        .to_lowercase();
    cleaned.split_whitespace().map(str::to_string).collect()
}

/// A text cell preprocessed once for every pair it takes part in.
#[derive(Debug, Clone, Default)]
struct Prepared {
    lower: String,
    /// Sorted, de-duplicated tokens.
    set: Vec<String>,
    /// Sorted token frequencies.
    counts: Vec<(String, u32)>,
}

impl Prepared {
    fn new(s: &str) -> Prepared {
        let tokens = tokenize(s);
        let mut counts: BTreeMap<String, u32> = BTreeMap::new();
        for t in tokens {
            *counts.entry(t).or_default() += 1;
        }
        Prepared {
            lower: s.to_lowercase(),
            set: counts.keys().cloned().collect(),
            counts: counts.into_iter().collect(),
        }
    }
}

fn intersection_size(a: &[String], b: &[String]) -> usize {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

fn levenshtein_norm(a: &str, b: &str) -> f64 {
    let longest = a.chars().count().max(b.chars().count());
    if longest == 0 {
        return 1.0;
    }
    1.0 - strsim::levenshtein(a, b) as f64 / longest as f64
}

fn jaccard(a: &[String], b: &[String]) -> f64 {
    let inter = intersection_size(a, b);
    let union = a.len() + b.len() - inter;
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

fn containment(a: &[String], b: &[String]) -> f64 {
    let smaller = a.len().min(b.len());
    if smaller == 0 {
        return if a.len() == b.len() { 1.0 } else { 0.0 };
    }
    intersection_size(a, b) as f64 / smaller as f64
}

fn cosine(a: &[(String, u32)], b: &[(String, u32)]) -> f64 {
    if a.is_empty() && b.is_empty() {
        return 1.0;
    }
    // squared norms are integers, so identical inputs give exactly 1
    let norm2 = |v: &[(String, u32)]| v.iter().map(|(_, c)| (*c as f64).powi(2)).sum::<f64>();
    let (na2, nb2) = (norm2(a), norm2(b));
    if na2 == 0.0 || nb2 == 0.0 {
        return 0.0;
    }
    let (mut i, mut j, mut dot) = (0, 0, 0.0);
    while i < a.len() && j < b.len() {
        match a[i].0.cmp(&b[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                dot += a[i].1 as f64 * b[j].1 as f64;
                i += 1;
                j += 1;
            }
        }
    }
    (dot / (na2 * nb2).sqrt()).clamp(0.0, 1.0)
}

fn norm_euclid(x: f64, y: f64, norm: f64) -> f64 {
    if norm <= 0.0 {
        return 1.0;
    }
    (1.0 - (x - y).abs() / norm).clamp(0.0, 1.0)
}

fn text_similarity(f: SimilarityFn, a: &Prepared, b: &Prepared) -> f64 {
    match f {
        SimilarityFn::LevenshteinNorm => levenshtein_norm(&a.lower, &b.lower),
        SimilarityFn::Jaccard => jaccard(&a.set, &b.set),
        SimilarityFn::JaccardContainment => containment(&a.set, &b.set),
        SimilarityFn::Cosine => cosine(&a.counts, &b.counts),
        SimilarityFn::NormEuclid => unreachable!("numeric function on text"),
    }
}

/// Similarity in `[0, 1]` (1 = identical). A null on either side gives 0.
/// `norm` is the population normalization constant used by `norm_euclid`.
pub fn similarity(f: SimilarityFn, a: &Value, b: &Value, norm: f64) -> Result<f64> {
    match (f, a, b) {
        (_, Value::Null, _) | (_, _, Value::Null) => Ok(0.0),
        (SimilarityFn::NormEuclid, Value::Number(x), Value::Number(y)) => Ok(norm_euclid(*x, *y, norm)),
        (SimilarityFn::NormEuclid, _, _) => Err(Error::Type(format!("{f} needs numbers"))),
        (_, Value::Text(x), Value::Text(y)) => {
            Ok(text_similarity(f, &Prepared::new(x), &Prepared::new(y)))
        }
        _ => Err(Error::Type(format!("{f} needs text"))),
    }
}

/// Looks a function up by name; unknown names are an error.
pub fn similarity_by_name(name: &str, a: &Value, b: &Value, norm: f64) -> Result<f64> {
    similarity(name.parse()?, a, b, norm)
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FeatureDef {
    pub column: String,
    pub function: SimilarityFn,
}

impl FeatureDef {
    pub fn new(column: impl Into<String>, function: SimilarityFn) -> Self {
        FeatureDef {
            column: column.into(),
            function,
        }
    }
}

impl fmt::Display for FeatureDef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.column, self.function)
    }
}

pub type FeatureSpec = Vec<FeatureDef>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub pair: PairKey,
    pub features: Vec<f64>,
}

/// Feature vectors for a set of pairs, computed once and cached by pair.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    spec: FeatureSpec,
    vectors: BTreeMap<PairKey, Vec<f64>>,
}

enum PreparedColumn {
    Text(HashMap<RecordId, Prepared>),
    Number { values: HashMap<RecordId, Option<f64>>, norm: f64 },
}

impl FeatureTable {
    /// Computes every feature of `spec` for every pair. `norm_euclid`
    /// normalizes by the max magnitude over the records the pairs touch.
    pub fn compute(rel: &Relation, spec: &FeatureSpec, pairs: &[PairKey]) -> Result<FeatureTable> {
        let mut members: BTreeSet<RecordId> = BTreeSet::new();
        for p in pairs {
            members.insert(p.low());
            members.insert(p.high());
        }
        let records: Vec<&Record> = members
            .iter()
            .map(|&id| rel.get(id).ok_or(Error::UnknownRecord(id)))
            .collect::<Result<_>>()?;

        let mut columns = Vec::with_capacity(spec.len());
        for def in spec {
            let idx = rel.column_index(&def.column)?;
            let ty = rel.schema()[idx].ty;
            if !def.function.accepts(ty) {
                return Err(Error::Type(format!("feature {def} on a {ty:?} column")));
            }
            columns.push(match ty {
                AttributeType::Text => PreparedColumn::Text(
                    records
                        .iter()
                        .filter_map(|r| r.values[idx].as_str().map(|s| (r.id, Prepared::new(s))))
                        .collect(),
                ),
                AttributeType::Number => {
                    let values: HashMap<RecordId, Option<f64>> =
                        records.iter().map(|r| (r.id, r.values[idx].as_f64())).collect();
                    let norm = values.values().flatten().fold(0.0f64, |m, x| m.max(x.abs()));
                    PreparedColumn::Number { values, norm }
                }
            });
        }

        let rows: Vec<(PairKey, Vec<f64>)> = pairs
            .par_iter()
            .map(|&pair| {
                let features = spec
                    .iter()
                    .zip(&columns)
                    .map(|(def, col)| match col {
                        PreparedColumn::Text(cells) => {
                            match (cells.get(&pair.low()), cells.get(&pair.high())) {
                                (Some(a), Some(b)) => text_similarity(def.function, a, b),
                                _ => 0.0,
                            }
                        }
                        PreparedColumn::Number { values, norm } => {
                            match (values[&pair.low()], values[&pair.high()]) {
                                (Some(x), Some(y)) => norm_euclid(x, y, *norm),
                                _ => 0.0,
                            }
                        }
                    })
                    .collect();
                (pair, features)
            })
            .collect();
        Ok(FeatureTable {
            spec: spec.clone(),
            vectors: rows.into_iter().collect(),
        })
    }

    pub fn from_vectors(spec: FeatureSpec, vectors: BTreeMap<PairKey, Vec<f64>>) -> Result<Self> {
        if let Some((p, v)) = vectors.iter().find(|(_, v)| v.len() != spec.len()) {
            return Err(Error::Config(format!(
                "pair {p} has {} features, spec has {}",
                v.len(),
                spec.len()
            )));
        }
        Ok(FeatureTable { spec, vectors })
    }

    pub fn spec(&self) -> &FeatureSpec {
        &self.spec
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, pair: &PairKey) -> Option<&[f64]> {
        self.vectors.get(pair).map(Vec::as_slice)
    }

    pub fn vector(&self, pair: &PairKey) -> Result<FeatureVector> {
        self.get(pair)
            .map(|f| FeatureVector {
                pair: *pair,
                features: f.to_vec(),
            })
            .ok_or(Error::MissingFeatures(*pair))
    }

    pub fn pairs(&self) -> impl Iterator<Item = &PairKey> {
        self.vectors.keys()
    }

    pub fn feature_index(&self, def: &FeatureDef) -> Option<usize> {
        self.spec.iter().position(|d| d == def)
    }

    /// Keeps only the named features (in that order) for the given pairs.
    pub fn project(&self, spec: &FeatureSpec, pairs: &[PairKey]) -> Result<FeatureTable> {
        let idx: Vec<usize> = spec
            .iter()
            .map(|d| {
                self.feature_index(d)
                    .ok_or_else(|| Error::Config(format!("feature {d} was not computed")))
            })
            .collect::<Result<_>>()?;
        let mut vectors = BTreeMap::new();
        for p in pairs {
            let v = self.get(p).ok_or(Error::MissingFeatures(*p))?;
            vectors.insert(*p, idx.iter().map(|&i| v[i]).collect());
        }
        Ok(FeatureTable {
            spec: spec.clone(),
            vectors,
        })
    }

    /// Writes `id1,id2,f1,...` lines under a header naming each feature.
    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        let mut write = || -> std::io::Result<()> {
            write!(out, "id1,id2")?;
            for d in &self.spec {
                write!(out, ",{d}")?;
            }
            writeln!(out)?;
            for (p, v) in &self.vectors {
                write!(out, "{},{}", p.low(), p.high())?;
                for x in v {
                    write!(out, ",{x:?}")?;
                }
                writeln!(out)?;
            }
            out.flush()
        };
        write().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<FeatureTable> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut lines = std::io::BufReader::new(file).lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::parse(path, "missing header"))?
            .map_err(|e| Error::io(path, e))?;
        let spec = header
            .split(',')
            .skip(2)
            .map(|h| {
                let (column, function) = h
                    .rsplit_once(':')
                    .ok_or_else(|| Error::parse(path, format!("bad feature name `{h}`")))?;
                Ok(FeatureDef::new(column, function.parse()?))
            })
            .collect::<Result<FeatureSpec>>()?;
        let mut vectors = BTreeMap::new();
        for (n, line) in lines.enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let bad = |m: &str| Error::parse(path, format!("line {}: {m}", n + 2));
            let mut fields = line.split(',');
            let mut id = || -> Result<RecordId> {
                fields
                    .next()
                    .and_then(|f| f.trim().parse().ok())
                    .map(RecordId)
                    .ok_or_else(|| bad("bad id"))
            };
            let (a, b) = (id()?, id()?);
            let pair = PairKey::new(a, b).ok_or_else(|| bad("self-pair"))?;
            let v = fields
                .map(|f| f.trim().parse::<f64>().map_err(|_| bad("bad feature value")))
                .collect::<Result<Vec<_>>>()?;
            vectors.insert(pair, v);
        }
        FeatureTable::from_vectors(spec, vectors).map_err(|e| Error::parse(path, e.to_string()))
    }
}

/// All unordered pairs over `ids`, in canonical order.
pub fn build_pairs(ids: &BTreeSet<RecordId>) -> Vec<PairKey> {
    let ids: Vec<RecordId> = ids.iter().copied().collect();
    let mut out = Vec::with_capacity(ids.len() * ids.len().saturating_sub(1) / 2);
    for (k, &a) in ids.iter().enumerate() {
        for &b in &ids[k + 1..] {
            out.push(PairKey::new(a, b).expect("ids are distinct"));
        }
    }
    out
}

/// Threshold filter over pair features. A pair survives iff the rule holds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockingRule {
    All(Vec<BlockingRule>),
    Any(Vec<BlockingRule>),
    /// Keep if similarity ≥ threshold.
    AtLeast {
        column: String,
        function: SimilarityFn,
        threshold: f64,
    },
    /// Keep if distance (1 − similarity) ≤ threshold.
    AtMostDistance {
        column: String,
        function: SimilarityFn,
        threshold: f64,
    },
}

impl Default for BlockingRule {
    fn default() -> Self {
        BlockingRule::identity()
    }
}

impl BlockingRule {
    pub fn identity() -> Self {
        BlockingRule::All(Vec::new())
    }

    /// Every feature the rule reads, de-duplicated, in first-use order.
    pub fn features(&self) -> FeatureSpec {
        fn walk(rule: &BlockingRule, out: &mut FeatureSpec) {
            match rule {
                BlockingRule::All(rs) | BlockingRule::Any(rs) => {
                    rs.iter().for_each(|r| walk(r, out))
                }
                BlockingRule::AtLeast { column, function, .. }
                | BlockingRule::AtMostDistance { column, function, .. } => {
                    let def = FeatureDef::new(column.clone(), *function);
                    if !out.contains(&def) {
                        out.push(def);
                    }
                }
            }
        }
        let mut out = Vec::new();
        walk(self, &mut out);
        out
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            BlockingRule::All(rs) | BlockingRule::Any(rs) => rs.iter().try_for_each(|r| r.validate()),
            BlockingRule::AtLeast { threshold, .. } | BlockingRule::AtMostDistance { threshold, .. } => {
                if (0.0..=1.0).contains(threshold) {
                    Ok(())
                } else {
                    Err(Error::Config(format!("blocking threshold {threshold} outside [0, 1]")))
                }
            }
        }
    }

    fn keeps(&self, table: &FeatureTable, v: &[f64]) -> Result<bool> {
        Ok(match self {
            BlockingRule::All(rs) => {
                for r in rs {
                    if !r.keeps(table, v)? {
                        return Ok(false);
                    }
                }
                true
            }
            BlockingRule::Any(rs) => {
                for r in rs {
                    if r.keeps(table, v)? {
                        return Ok(true);
                    }
                }
                false
            }
            BlockingRule::AtLeast { column, function, threshold } => {
                v[Self::index(table, column, *function)?] >= *threshold
            }
            BlockingRule::AtMostDistance { column, function, threshold } => {
                1.0 - v[Self::index(table, column, *function)?] <= *threshold
            }
        })
    }

    fn index(table: &FeatureTable, column: &str, function: SimilarityFn) -> Result<usize> {
        let def = FeatureDef::new(column, function);
        table
            .feature_index(&def)
            .ok_or_else(|| Error::Config(format!("blocking feature {def} was not computed")))
    }
}

/// Keeps the pairs whose features satisfy `rule`, preserving input order.
pub fn apply_blocking(pairs: &[PairKey], table: &FeatureTable, rule: &BlockingRule) -> Result<Vec<PairKey>> {
    let mut out = Vec::new();
    for p in pairs {
        let v = table.get(p).ok_or(Error::MissingFeatures(*p))?;
        if rule.keeps(table, v)? {
            out.push(*p);
        }
    }
    Ok(out)
}

/// The candidate pairs of one cleaning task after view and feature blocking.
#[derive(Debug, Clone)]
pub struct PairSpace {
    /// Pairs over the view provenance, before feature blocking.
    pub unblocked: usize,
    /// Surviving pairs, canonical order.
    pub pairs: Vec<PairKey>,
    /// Learning features of the surviving pairs.
    pub features: FeatureTable,
}

impl PairSpace {
    pub fn build(
        rel: &Relation,
        members: &BTreeSet<RecordId>,
        features: &FeatureSpec,
        rule: &BlockingRule,
    ) -> Result<PairSpace> {
        rule.validate()?;
        let all = build_pairs(members);
        let mut union = features.clone();
        for def in rule.features() {
            if !union.contains(&def) {
                union.push(def);
            }
        }
        let table = FeatureTable::compute(rel, &union, &all)?;
        let pairs = apply_blocking(&all, &table, rule)?;
        let features = table.project(features, &pairs)?;
        Ok(PairSpace {
            unblocked: all.len(),
            pairs,
            features,
        })
    }
}
