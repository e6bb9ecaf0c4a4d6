//! Label providers for the cleaning loop.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::classifier::Label;
use crate::error::{Error, Result};
use crate::relation::{GroundTruth, PairKey, Record};

/// One pair as shown to a labeler: both records in full plus the pair's
/// view impact score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairPayload {
    pub pair: PairKey,
    pub left: Record,
    pub right: Record,
    pub impact: f64,
}

pub trait Labeler {
    /// Returns one label per payload, in order.
    fn label(&mut self, batch: &[PairPayload]) -> Result<Vec<Label>>;
}

/// Answers from a ground-truth match set.
#[derive(Debug, Clone)]
pub struct OracleLabeler<'a> {
    truth: &'a GroundTruth,
    asked: usize,
}

impl<'a> OracleLabeler<'a> {
    pub fn new(truth: &'a GroundTruth) -> Self {
        OracleLabeler { truth, asked: 0 }
    }

    pub fn asked(&self) -> usize {
        self.asked
    }
}

impl Labeler for OracleLabeler<'_> {
    fn label(&mut self, batch: &[PairPayload]) -> Result<Vec<Label>> {
        self.asked += batch.len();
        Ok(batch
            .iter()
            .map(|p| Label::from_bool(self.truth.is_match(&p.pair)))
            .collect())
    }
}

/// Replays previously recorded answers; asking about an unrecorded pair is
/// an error.
#[derive(Debug, Clone, Default)]
pub struct TranscriptLabeler {
    answers: HashMap<PairKey, Label>,
}

impl TranscriptLabeler {
    pub fn new(transcript: impl IntoIterator<Item = (PairKey, Label)>) -> Self {
        TranscriptLabeler {
            answers: transcript.into_iter().collect(),
        }
    }
}

impl Labeler for TranscriptLabeler {
    fn label(&mut self, batch: &[PairPayload]) -> Result<Vec<Label>> {
        batch
            .iter()
            .map(|p| {
                self.answers
                    .get(&p.pair)
                    .copied()
                    .ok_or_else(|| Error::Labeler(format!("no recorded label for {}", p.pair)))
            })
            .collect()
    }
}

impl<F> Labeler for F
where
    F: FnMut(&[PairPayload]) -> Result<Vec<Label>>,
{
    fn label(&mut self, batch: &[PairPayload]) -> Result<Vec<Label>> {
        self(batch)
    }
}
