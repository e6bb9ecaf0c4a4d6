//! Select / bin / group / aggregate / order / limit views over a relation.
//!
//! Views are declared as JSON documents (see [`ViewSpec`]) rather than parsed
//! from SQL. Evaluation runs selection, then derived bin columns, then
//! grouping and aggregation, then ordering, then the limit, and finally the
//! projection.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::relation::{AttributeType, Column, Record, RecordId, Relation, Value};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Predicate {
    True,
    False,
    Eq {
        column: String,
        value: Value,
    },
    /// SQL `LIKE '%pattern%'`.
    Contains {
        column: String,
        pattern: String,
        #[serde(default)]
        ignore_case: bool,
    },
    Lt {
        column: String,
        value: f64,
    },
    Ge {
        column: String,
        value: f64,
    },
    And(Vec<Predicate>),
    Or(Vec<Predicate>),
}

impl Default for Predicate {
    fn default() -> Self {
        Predicate::True
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bin {
    /// Exclusive upper bound.
    pub below: f64,
    pub label: String,
}

/// `CASE WHEN col < b1 THEN l1 WHEN col < b2 THEN l2 ... ELSE otherwise END AS name`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinExpr {
    pub name: String,
    pub column: String,
    pub bins: Vec<Bin>,
    pub otherwise: String,
}

impl BinExpr {
    pub fn label_for(&self, v: &Value) -> &str {
        if let Some(x) = v.as_f64() {
            for b in &self.bins {
                if x < b.below {
                    return &b.label;
                }
            }
        }
        &self.otherwise
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AggregateFn {
    Count,
    Avg,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub func: AggregateFn,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub column: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alias: Option<String>,
}

impl Aggregate {
    pub fn count() -> Self {
        Aggregate {
            func: AggregateFn::Count,
            column: None,
            alias: None,
        }
    }

    pub fn avg(column: impl Into<String>) -> Self {
        Aggregate {
            func: AggregateFn::Avg,
            column: Some(column.into()),
            alias: None,
        }
    }

    pub fn output_name(&self) -> String {
        if let Some(a) = &self.alias {
            return a.clone();
        }
        match (self.func, &self.column) {
            (AggregateFn::Count, _) => "count".to_string(),
            (AggregateFn::Avg, Some(c)) => format!("avg_{c}"),
            (AggregateFn::Avg, None) => "avg".to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderKey {
    pub column: String,
    #[serde(default)]
    pub descending: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewSpec {
    pub name: String,
    #[serde(default)]
    pub selection: Predicate,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub derived: Vec<BinExpr>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub group_by: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub aggregates: Vec<Aggregate>,
    /// Output columns; empty means every column the stage produces.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub projection: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub order_by: Vec<OrderKey>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub limit: Option<usize>,
}

impl ViewSpec {
    pub fn select(name: impl Into<String>, selection: Predicate) -> Self {
        ViewSpec {
            name: name.into(),
            selection,
            derived: Vec::new(),
            group_by: Vec::new(),
            aggregates: Vec::new(),
            projection: Vec::new(),
            order_by: Vec::new(),
            limit: None,
        }
    }

    pub fn is_aggregate(&self) -> bool {
        !self.group_by.is_empty() || !self.aggregates.is_empty()
    }

    pub fn compile(&self, schema: &[Column]) -> Result<CompiledView> {
        CompiledView::new(self, schema)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewResult {
    pub schema: Vec<Column>,
    pub rows: Vec<Vec<Value>>,
}

impl ViewResult {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

#[derive(Debug, Clone)]
enum Compiled {
    Const(bool),
    Eq(usize, Value),
    Contains {
        col: usize,
        pattern: String,
        ignore_case: bool,
    },
    Lt(usize, f64),
    Ge(usize, f64),
    And(Vec<Compiled>),
    Or(Vec<Compiled>),
}

impl Compiled {
    fn build(p: &Predicate, schema: &[Column]) -> Result<Compiled> {
        let lookup = |name: &str, want: Option<AttributeType>| -> Result<usize> {
            let idx = schema
                .iter()
                .position(|c| c.name == name)
                .ok_or_else(|| Error::UnknownColumn(name.to_string()))?;
            if let Some(want) = want {
                if schema[idx].ty != want {
                    return Err(Error::Type(format!(
                        "predicate on `{name}` expects {want:?}, column is {:?}",
                        schema[idx].ty
                    )));
                }
            }
            Ok(idx)
        };
        Ok(match p {
            Predicate::True => Compiled::Const(true),
            Predicate::False => Compiled::Const(false),
            Predicate::Eq { column, value } => {
                let idx = lookup(column, None)?;
                if value.is_null() || !value.conforms_to(schema[idx].ty) {
                    return Err(Error::Type(format!(
                        "cannot compare `{column}` ({:?}) with {value:?}",
                        schema[idx].ty
                    )));
                }
                Compiled::Eq(idx, value.clone())
            }
            Predicate::Contains {
                column,
                pattern,
                ignore_case,
            } => Compiled::Contains {
                col: lookup(column, Some(AttributeType::Text))?,
                pattern: if *ignore_case {
                    pattern.to_lowercase()
                } else {
                    pattern.clone()
                },
                ignore_case: *ignore_case,
            },
            Predicate::Lt { column, value } => {
                Compiled::Lt(lookup(column, Some(AttributeType::Number))?, *value)
            }
            Predicate::Ge { column, value } => {
                Compiled::Ge(lookup(column, Some(AttributeType::Number))?, *value)
            }
            Predicate::And(ps) => Compiled::And(
                ps.iter()
                    .map(|p| Compiled::build(p, schema))
                    .collect::<Result<_>>()?,
            ),
            Predicate::Or(ps) => Compiled::Or(
                ps.iter()
                    .map(|p| Compiled::build(p, schema))
                    .collect::<Result<_>>()?,
            ),
        })
    }

    fn matches(&self, values: &[Value]) -> bool {
        match self {
            Compiled::Const(b) => *b,
            Compiled::Eq(i, v) => !values[*i].is_null() && values[*i] == *v,
            Compiled::Contains {
                col,
                pattern,
                ignore_case,
            } => match values[*col].as_str() {
                Some(s) if *ignore_case => s.to_lowercase().contains(pattern.as_str()),
                Some(s) => s.contains(pattern.as_str()),
                None => false,
            },
            Compiled::Lt(i, x) => values[*i].as_f64().is_some_and(|v| v < *x),
            Compiled::Ge(i, x) => values[*i].as_f64().is_some_and(|v| v >= *x),
            Compiled::And(ps) => ps.iter().all(|p| p.matches(values)),
            Compiled::Or(ps) => ps.iter().any(|p| p.matches(values)),
        }
    }
}

#[derive(Debug, Clone)]
struct CompiledAggregate {
    func: AggregateFn,
    col: Option<usize>,
}

/// A [`ViewSpec`] resolved against a schema, reusable across evaluations.
#[derive(Debug, Clone)]
pub struct CompiledView {
    selection: Compiled,
    bins: Vec<(usize, BinExpr)>,
    group_cols: Vec<usize>,
    aggregates: Vec<CompiledAggregate>,
    aggregate: bool,
    /// Columns produced before projection.
    stage_schema: Vec<Column>,
    order: Vec<(usize, bool)>,
    projection: Vec<usize>,
    limit: Option<usize>,
    output_schema: Vec<Column>,
}

struct StageRow {
    values: Vec<Value>,
    tie: Vec<Value>,
    min_id: RecordId,
}

impl CompiledView {
    fn new(spec: &ViewSpec, schema: &[Column]) -> Result<Self> {
        let selection = Compiled::build(&spec.selection, schema)?;

        let mut extended: Vec<Column> = schema.to_vec();
        let mut bins = Vec::new();
        for b in &spec.derived {
            let src = schema
                .iter()
                .position(|c| c.name == b.column)
                .ok_or_else(|| Error::UnknownColumn(b.column.clone()))?;
            if schema[src].ty != AttributeType::Number {
                return Err(Error::Type(format!("bin source `{}` is not numeric", b.column)));
            }
            if b.bins.windows(2).any(|w| w[0].below >= w[1].below) {
                return Err(Error::Config(format!(
                    "bin `{}`: upper bounds must be strictly increasing",
                    b.name
                )));
            }
            if extended.iter().any(|c| c.name == b.name) {
                return Err(Error::Config(format!("derived column `{}` shadows a column", b.name)));
            }
            extended.push(Column::new(b.name.clone(), AttributeType::Text));
            bins.push((src, b.clone()));
        }
        let ext_index = |name: &str| {
            extended
                .iter()
                .position(|c| c.name == name)
                .ok_or_else(|| Error::UnknownColumn(name.to_string()))
        };

        let aggregate = spec.is_aggregate();
        let mut group_cols = Vec::new();
        let mut aggregates = Vec::new();
        let stage_schema = if aggregate {
            let mut out = Vec::new();
            for g in &spec.group_by {
                let idx = ext_index(g)?;
                group_cols.push(idx);
                out.push(extended[idx].clone());
            }
            for a in &spec.aggregates {
                let col = match (a.func, &a.column) {
                    (AggregateFn::Count, _) => None,
                    (AggregateFn::Avg, Some(c)) => {
                        let idx = ext_index(c)?;
                        if extended[idx].ty != AttributeType::Number {
                            return Err(Error::Type(format!("AVG over non-numeric `{c}`")));
                        }
                        Some(idx)
                    }
                    (AggregateFn::Avg, None) => {
                        return Err(Error::Config("AVG requires a column".into()))
                    }
                };
                aggregates.push(CompiledAggregate { func: a.func, col });
                out.push(Column::new(a.output_name(), AttributeType::Number));
            }
            out
        } else {
            extended.clone()
        };
        let stage_index = |name: &str| {
            stage_schema
                .iter()
                .position(|c| c.name == name)
                .ok_or_else(|| Error::UnknownColumn(name.to_string()))
        };

        let projection: Vec<usize> = if spec.projection.is_empty() {
            (0..stage_schema.len()).collect()
        } else {
            spec.projection
                .iter()
                .map(|p| stage_index(p))
                .collect::<Result<_>>()?
        };
        let mut order = Vec::new();
        for k in &spec.order_by {
            let idx = stage_index(&k.column)?;
            if !projection.contains(&idx) {
                return Err(Error::Config(format!(
                    "order-by column `{}` is not in the output",
                    k.column
                )));
            }
            order.push((idx, k.descending));
        }
        if spec.limit == Some(0) {
            return Err(Error::Config("limit must be positive".into()));
        }
        let output_schema = projection.iter().map(|&i| stage_schema[i].clone()).collect();
        Ok(CompiledView {
            selection,
            bins,
            group_cols,
            aggregates,
            aggregate,
            stage_schema,
            order,
            projection,
            limit: spec.limit,
            output_schema,
        })
    }

    pub fn output_schema(&self) -> &[Column] {
        &self.output_schema
    }

    pub fn selects(&self, record: &Record) -> bool {
        self.selection.matches(&record.values)
    }

    fn extend(&self, record: &Record) -> Vec<Value> {
        let mut values = record.values.clone();
        for (src, b) in &self.bins {
            values.push(Value::Text(b.label_for(&record.values[*src]).to_string()));
        }
        values
    }

    /// Evaluates over an arbitrary record stream (e.g. a relation minus one tuple).
    pub fn evaluate_records<'a>(&self, records: impl Iterator<Item = &'a Record>) -> ViewResult {
        let selected = records.filter(|r| self.selects(r));
        let mut rows: Vec<StageRow> = if self.aggregate {
            self.aggregate_rows(selected)
        } else {
            selected
                .map(|r| {
                    let values = self.extend(r);
                    StageRow {
                        tie: values.clone(),
                        values,
                        min_id: r.id,
                    }
                })
                .collect()
        };
        rows.sort_by(|a, b| self.compare(a, b));
        if let Some(limit) = self.limit {
            rows.truncate(limit);
        }
        ViewResult {
            schema: self.output_schema.clone(),
            rows: rows
                .into_iter()
                .map(|r| self.projection.iter().map(|&i| r.values[i].clone()).collect())
                .collect(),
        }
    }

    pub fn evaluate(&self, rel: &Relation) -> ViewResult {
        self.evaluate_records(rel.records().iter())
    }

    fn compare(&self, a: &StageRow, b: &StageRow) -> Ordering {
        for &(idx, desc) in &self.order {
            let ord = a.values[idx].cmp(&b.values[idx]);
            let ord = if desc { ord.reverse() } else { ord };
            if ord != Ordering::Equal {
                return ord;
            }
        }
        a.tie.cmp(&b.tie).then(a.min_id.cmp(&b.min_id))
    }

    fn aggregate_rows<'a>(&self, records: impl Iterator<Item = &'a Record>) -> Vec<StageRow> {
        struct Acc {
            count: usize,
            sums: Vec<(f64, usize)>,
            min_id: RecordId,
        }
        let mut groups: BTreeMap<Vec<Value>, Acc> = BTreeMap::new();
        for r in records {
            let values = self.extend(r);
            let key: Vec<Value> = self.group_cols.iter().map(|&i| values[i].clone()).collect();
            let acc = groups.entry(key).or_insert_with(|| Acc {
                count: 0,
                sums: vec![(0.0, 0); self.aggregates.len()],
                min_id: r.id,
            });
            acc.count += 1;
            acc.min_id = acc.min_id.min(r.id);
            for (slot, agg) in acc.sums.iter_mut().zip(&self.aggregates) {
                if let Some(x) = agg.col.and_then(|c| values[c].as_f64()) {
                    slot.0 += x;
                    slot.1 += 1;
                }
            }
        }
        if groups.is_empty() && self.group_cols.is_empty() && !self.aggregates.is_empty() {
            groups.insert(
                Vec::new(),
                Acc {
                    count: 0,
                    sums: vec![(0.0, 0); self.aggregates.len()],
                    min_id: RecordId(u32::MAX),
                },
            );
        }
        groups
            .into_iter()
            .map(|(key, acc)| {
                let mut values = key.clone();
                for (agg, &(sum, n)) in self.aggregates.iter().zip(&acc.sums) {
                    values.push(match agg.func {
                        AggregateFn::Count => Value::Number(acc.count as f64),
                        AggregateFn::Avg if n == 0 => Value::Null,
                        AggregateFn::Avg => Value::Number(sum / n as f64),
                    });
                }
                StageRow {
                    values,
                    tie: key,
                    min_id: acc.min_id,
                }
            })
            .collect()
    }

    pub fn stage_schema(&self) -> &[Column] {
        &self.stage_schema
    }
}

pub fn evaluate(spec: &ViewSpec, rel: &Relation) -> Result<ViewResult> {
    Ok(spec.compile(rel.schema())?.evaluate(rel))
}

/// Ids of records satisfying the selection; ordering and limit are ignored.
pub fn provenance(spec: &ViewSpec, rel: &Relation) -> Result<BTreeSet<RecordId>> {
    let compiled = spec.compile(rel.schema())?;
    Ok(rel
        .records()
        .iter()
        .filter(|r| compiled.selects(r))
        .map(|r| r.id)
        .collect())
}
