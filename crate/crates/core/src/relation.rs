//! Typed tabular data, ground-truth match sets, and duplicate removal.

use std::cmp::Ordering;
use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::hash::{Hash, Hasher};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttributeType {
    Text,
    Number,
}

/// A single cell. Nulls come from empty cells and unparseable numbers.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    #[default]
    Null,
    Number(f64),
    Text(String),
}

impl Value {
    pub fn is_null(&self) -> bool {
        matches!(self, Value::Null)
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Number(x) => Some(*x),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Value::Text(s) => Some(s),
            _ => None,
        }
    }

    /// Parses a raw cell under the given column type.
    pub fn parse(raw: &str, ty: AttributeType) -> Value {
        let trimmed = raw.trim();
        if trimmed.is_empty() {
            return Value::Null;
        }
        match ty {
            AttributeType::Text => Value::Text(trimmed.to_string()),
            AttributeType::Number => {
                let cleaned: String = trimmed
                    .chars()
                    .filter(|c| !matches!(c, '$' | ',' | ' '))
                    .collect();
                match cleaned.parse::<f64>() {
                    Ok(x) if x.is_finite() => Value::Number(x),
                    _ => Value::Null,
                }
            }
        }
    }

    pub fn conforms_to(&self, ty: AttributeType) -> bool {
        matches!(
            (self, ty),
            (Value::Null, _)
                | (Value::Number(_), AttributeType::Number)
                | (Value::Text(_), AttributeType::Text)
        )
    }

    fn rank(&self) -> u8 {
        match self {
            Value::Null => 0,
            Value::Number(_) => 1,
            Value::Text(_) => 2,
        }
    }
}

fn canonical_bits(x: f64) -> u64 {
    if x == 0.0 {
        0
    } else {
        x.to_bits()
    }
}

// Total order: null < numbers < text; numbers by `total_cmp` with -0 == +0.
impl Ord for Value {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Value::Number(a), Value::Number(b)) => {
                if a == b {
                    Ordering::Equal
                } else {
                    a.total_cmp(b)
                }
            }
            (Value::Text(a), Value::Text(b)) => a.cmp(b),
            _ => self.rank().cmp(&other.rank()),
        }
    }
}

impl PartialOrd for Value {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for Value {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Value {}

impl Hash for Value {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.rank().hash(state);
        match self {
            Value::Null => {}
            Value::Number(x) => canonical_bits(*x).hash(state),
            Value::Text(s) => s.hash(state),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Null => Ok(()),
            Value::Number(x) => write!(f, "{x}"),
            Value::Text(s) => f.write_str(s),
        }
    }
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Value::Text(s.to_string())
    }
}

impl From<f64> for Value {
    fn from(x: f64) -> Self {
        Value::Number(x)
    }
}

/// Zero-based ingestion index of a record; stable for the lifetime of a run.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct RecordId(pub u32);

impl fmt::Display for RecordId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Unordered pair of distinct records, stored smaller id first.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(try_from = "(RecordId, RecordId)", into = "(RecordId, RecordId)")]
pub struct PairKey {
    low: RecordId,
    high: RecordId,
}

impl PairKey {
    /// Returns `None` when both ids are equal.
    pub fn new(a: RecordId, b: RecordId) -> Option<PairKey> {
        match a.cmp(&b) {
            Ordering::Less => Some(PairKey { low: a, high: b }),
            Ordering::Greater => Some(PairKey { low: b, high: a }),
            Ordering::Equal => None,
        }
    }

    pub fn low(&self) -> RecordId {
        self.low
    }

    pub fn high(&self) -> RecordId {
        self.high
    }

    pub fn contains(&self, id: RecordId) -> bool {
        self.low == id || self.high == id
    }
}

impl TryFrom<(RecordId, RecordId)> for PairKey {
    type Error = String;

    fn try_from((a, b): (RecordId, RecordId)) -> Result<Self, Self::Error> {
        PairKey::new(a, b).ok_or_else(|| format!("self-pair ({a}, {a})"))
    }
}

impl From<PairKey> for (RecordId, RecordId) {
    fn from(p: PairKey) -> Self {
        (p.low, p.high)
    }
}

impl fmt::Display for PairKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.low, self.high)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub id: RecordId,
    pub values: Vec<Value>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    #[serde(rename = "type")]
    pub ty: AttributeType,
}

impl Column {
    pub fn new(name: impl Into<String>, ty: AttributeType) -> Self {
        Column {
            name: name.into(),
            ty,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Relation {
    schema: Vec<Column>,
    records: Vec<Record>,
    /// Optional source-file keys, aligned with `records`, used to resolve
    /// ground-truth files that reference the dataset's own identifiers.
    keys: Option<Vec<String>>,
    index: HashMap<RecordId, usize>,
}

impl Relation {
    pub fn new(schema: Vec<Column>, records: Vec<Record>) -> Result<Relation> {
        let mut names = BTreeSet::new();
        for c in &schema {
            if !names.insert(c.name.as_str()) {
                return Err(Error::Config(format!("duplicate column `{}`", c.name)));
            }
        }
        let mut index = HashMap::with_capacity(records.len());
        for (pos, r) in records.iter().enumerate() {
            if r.values.len() != schema.len() {
                return Err(Error::SchemaMismatch(format!(
                    "record {} has {} values, schema has {} columns",
                    r.id,
                    r.values.len(),
                    schema.len()
                )));
            }
            for (v, c) in r.values.iter().zip(&schema) {
                if !v.conforms_to(c.ty) {
                    return Err(Error::Type(format!(
                        "record {} column `{}` holds {v:?}",
                        r.id, c.name
                    )));
                }
            }
            if index.insert(r.id, pos).is_some() {
                return Err(Error::Config(format!("duplicate record id {}", r.id)));
            }
        }
        Ok(Relation {
            schema,
            records,
            keys: None,
            index,
        })
    }

    /// Builds a relation from rows, assigning sequential ids from zero.
    pub fn from_rows(schema: Vec<Column>, rows: Vec<Vec<Value>>) -> Result<Relation> {
        let records = rows
            .into_iter()
            .enumerate()
            .map(|(i, values)| Record {
                id: RecordId(i as u32),
                values,
            })
            .collect();
        Relation::new(schema, records)
    }

    pub fn schema(&self) -> &[Column] {
        &self.schema
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.schema
            .iter()
            .position(|c| c.name == name)
            .ok_or_else(|| Error::UnknownColumn(name.to_string()))
    }

    pub fn get(&self, id: RecordId) -> Option<&Record> {
        self.index.get(&id).map(|&pos| &self.records[pos])
    }

    pub fn contains(&self, id: RecordId) -> bool {
        self.index.contains_key(&id)
    }

    pub fn ids(&self) -> impl Iterator<Item = RecordId> + '_ {
        self.records.iter().map(|r| r.id)
    }

    pub fn keys(&self) -> Option<&[String]> {
        self.keys.as_deref()
    }

    /// Resolves a source-file key (or, without a key column, a decimal id).
    pub fn resolve_key(&self, key: &str) -> Option<RecordId> {
        match &self.keys {
            Some(keys) => keys
                .iter()
                .position(|k| k == key)
                .map(|pos| self.records[pos].id),
            None => key
                .trim()
                .parse::<u32>()
                .ok()
                .map(RecordId)
                .filter(|id| self.contains(*id)),
        }
    }

    /// A copy of this relation without the given records, in original order.
    pub fn without(&self, drop: &BTreeSet<RecordId>) -> Relation {
        let mut keys = self.keys.as_ref().map(|_| Vec::new());
        let mut records = Vec::with_capacity(self.records.len());
        for (pos, r) in self.records.iter().enumerate() {
            if drop.contains(&r.id) {
                continue;
            }
            if let (Some(out), Some(src)) = (keys.as_mut(), self.keys.as_ref()) {
                out.push(src[pos].clone());
            }
            records.push(r.clone());
        }
        let index = records
            .iter()
            .enumerate()
            .map(|(pos, r)| (r.id, pos))
            .collect();
        Relation {
            schema: self.schema.clone(),
            records,
            keys,
            index,
        }
    }
}

/// Options for delimiter-separated ingestion.
#[derive(Debug, Clone)]
pub struct LoadOptions {
    pub delimiter: u8,
    /// Header column holding the dataset's own record identifiers.
    pub key_column: Option<String>,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions {
            delimiter: b',',
            key_column: None,
        }
    }
}

pub fn load_relation(path: &Path, schema: &[Column], opts: &LoadOptions) -> Result<Relation> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(opts.delimiter)
        .has_headers(true)
        .flexible(false)
        .from_reader(file);
    let header = reader
        .headers()
        .map_err(|e| Error::parse(path, e.to_string()))?
        .clone();
    let position = |name: &str| header.iter().position(|h| h.trim() == name);

    let mut columns = Vec::with_capacity(schema.len());
    for c in schema {
        let pos = position(&c.name).ok_or_else(|| {
            Error::Config(format!(
                "{}: column `{}` not present in header {:?}",
                path.display(),
                c.name,
                header.iter().collect::<Vec<_>>()
            ))
        })?;
        columns.push(pos);
    }
    let key_pos = match &opts.key_column {
        Some(k) => Some(position(k).ok_or_else(|| {
            Error::Config(format!(
                "{}: key column `{k}` not present in header",
                path.display()
            ))
        })?),
        None => None,
    };

    let mut rows = Vec::new();
    let mut keys = key_pos.map(|_| Vec::new());
    for (line, row) in reader.records().enumerate() {
        let row = row.map_err(|e| Error::parse(path, format!("row {}: {e}", line + 2)))?;
        let values = columns
            .iter()
            .zip(schema)
            .map(|(&pos, c)| Value::parse(row.get(pos).unwrap_or(""), c.ty))
            .collect();
        if let (Some(pos), Some(keys)) = (key_pos, keys.as_mut()) {
            keys.push(row.get(pos).unwrap_or("").trim().to_string());
        }
        rows.push(values);
    }
    let mut rel = Relation::from_rows(schema.to_vec(), rows)?;
    rel.keys = keys;
    Ok(rel)
}

/// Known duplicate pairs.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub matches: BTreeSet<PairKey>,
}

impl GroundTruth {
    pub fn new(matches: impl IntoIterator<Item = PairKey>) -> Self {
        GroundTruth {
            matches: matches.into_iter().collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.matches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matches.is_empty()
    }

    pub fn is_match(&self, pair: &PairKey) -> bool {
        self.matches.contains(pair)
    }

    /// Matches whose endpoints both fall in `ids`.
    pub fn restricted_to(&self, ids: &BTreeSet<RecordId>) -> GroundTruth {
        GroundTruth {
            matches: self
                .matches
                .iter()
                .filter(|p| ids.contains(&p.low()) && ids.contains(&p.high()))
                .copied()
                .collect(),
        }
    }
}

/// Reads a two-column pair file with a header row. Ids are resolved through
/// the relation's key column when it has one, else as zero-based ids.
pub fn load_ground_truth(path: &Path, rel: &Relation, opts: &LoadOptions) -> Result<GroundTruth> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(opts.delimiter)
        .has_headers(true)
        .from_reader(file);
    let mut matches = BTreeSet::new();
    for (line, row) in reader.records().enumerate() {
        let row = row.map_err(|e| Error::parse(path, format!("row {}: {e}", line + 2)))?;
        if row.len() < 2 {
            return Err(Error::parse(path, format!("row {}: expected two ids", line + 2)));
        }
        let resolve = |raw: &str| {
            rel.resolve_key(raw).ok_or_else(|| {
                Error::parse(path, format!("row {}: unknown id `{raw}`", line + 2))
            })
        };
        let a = resolve(row.get(0).unwrap_or(""))?;
        let b = resolve(row.get(1).unwrap_or(""))?;
        let pair = PairKey::new(a, b)
            .ok_or_else(|| Error::parse(path, format!("row {}: self-pair", line + 2)))?;
        matches.insert(pair);
    }
    Ok(GroundTruth { matches })
}

struct DisjointSet {
    parent: Vec<usize>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        DisjointSet {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Links so the root is always the smaller index.
    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

/// Ids removed by [`apply_dedup`]: every member of a duplicate component
/// except its smallest id.
pub fn dedup_victims<'a>(
    rel: &Relation,
    dup_pairs: impl IntoIterator<Item = &'a PairKey>,
) -> Result<BTreeSet<RecordId>> {
    let mut ids: Vec<RecordId> = Vec::new();
    let mut slot: HashMap<RecordId, usize> = HashMap::new();
    let mut edges = Vec::new();
    for p in dup_pairs {
        for id in [p.low(), p.high()] {
            if !rel.contains(id) {
                return Err(Error::UnknownRecord(id));
            }
        }
        let mut slot_of = |id: RecordId| {
            *slot.entry(id).or_insert_with(|| {
                ids.push(id);
                ids.len() - 1
            })
        };
        let (a, b) = (slot_of(p.low()), slot_of(p.high()));
        edges.push((a, b));
    }
    let mut ds = DisjointSet::new(ids.len());
    for (a, b) in edges {
        ds.union(a, b);
    }
    let mut keeper: HashMap<usize, RecordId> = HashMap::new();
    for (i, &id) in ids.iter().enumerate() {
        let root = ds.find(i);
        keeper
            .entry(root)
            .and_modify(|k| *k = (*k).min(id))
            .or_insert(id);
    }
    let mut victims = BTreeSet::new();
    for (i, &id) in ids.iter().enumerate() {
        if keeper[&ds.find(i)] != id {
            victims.insert(id);
        }
    }
    Ok(victims)
}

/// Drops all but the minimum-id record of each connected duplicate component.
pub fn apply_dedup<'a>(
    rel: &Relation,
    dup_pairs: impl IntoIterator<Item = &'a PairKey>,
) -> Result<Relation> {
    let victims = dedup_victims(rel, dup_pairs)?;
    Ok(rel.without(&victims))
}
