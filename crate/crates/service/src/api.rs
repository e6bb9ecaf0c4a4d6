//! Request and response bodies. Field names are the wire contract.

use serde::{Deserialize, Serialize};
use viewclean::classifier::Label;
use viewclean::distance::ImpactAggregation;
use viewclean::engine::{CleaningConfig, IterationRecord, SessionSummary, StopReason};
use viewclean::labeler::PairPayload;
use viewclean::relation::Column;
use viewclean::{PairKey, ViewResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CreateSession {
    pub dataset: String,
    pub views: Vec<String>,
    #[serde(default)]
    pub aggregation: ImpactAggregation,
    #[serde(default)]
    pub config: CleaningConfig,
    /// Also accepted as the `Idempotency-Key` header, which wins.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub idempotency_key: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionDescriptor {
    pub id: String,
    pub dataset: String,
    pub views: Vec<String>,
    pub aggregation: ImpactAggregation,
    pub config: CleaningConfig,
    /// Seconds since the Unix epoch.
    pub created_at: u64,
    pub summary: SessionSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchResponse {
    pub session: String,
    pub stopped: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<StopReason>,
    /// Column names and types for the record values in `pairs`.
    pub schema: Vec<Column>,
    pub pairs: Vec<PairPayload>,
    pub labels_used: usize,
    pub budget: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelEntry {
    pub pair: PairKey,
    pub label: Label,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelSubmission {
    pub labels: Vec<LabelEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedView {
    pub name: String,
    pub result: ViewResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubmitResponse {
    pub summary: SessionSummary,
    pub record: IterationRecord,
    pub view_change: Option<f64>,
    pub views: Vec<NamedView>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewResponse {
    pub session: String,
    pub views: Vec<NamedView>,
    pub dirty: Vec<NamedView>,
    pub history: Vec<f64>,
    pub summary: SessionSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub summary: Option<SessionSummary>,
}
