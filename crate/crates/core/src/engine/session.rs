use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::sync::Arc;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::classifier::{ensemble_scores, f1_on_holdout, train, EnsembleScore, Label, LabeledPair, Model};
use crate::distance::{converged, DistanceConfig};
use crate::error::{Error, Result};
use crate::labeler::{Labeler, PairPayload};
use crate::pairs::FeatureVector;
use crate::relation::PairKey;
use crate::seed::{derive_seed, rng_for};
use crate::view::ViewResult;

use super::{
    dashboard_distance, select_baseline, select_bias, select_hybrid, select_top, Baseline, CleaningConfig,
    InitialSampling, PairScores, PreparedTask, StopReason, Strategy,
};

// rng stream ids under (seed, batch index)
const STREAM_HOLDOUT: u64 = 0;
const STREAM_SELECT: u64 = 1;
const STREAM_ENSEMBLE: u64 = 2;

/// Metrics after one completed batch; batch 0 is the dirty view.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub batch: usize,
    pub labels_used: usize,
    pub positives_labeled: usize,
    pub predicted_dups: usize,
    /// Distance to the previous view; batch 1 compares against the dirty view.
    pub view_change: Option<f64>,
    pub distance_to_clean: Option<f64>,
    pub per_view_to_clean: Option<Vec<f64>>,
    pub f1: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSummary {
    pub labels_used: usize,
    pub budget: usize,
    pub budget_remaining: usize,
    pub batches: usize,
    pub outstanding: usize,
    pub last_view_change: Option<f64>,
    pub history: Vec<f64>,
    pub predicted_dups: usize,
    pub distance_to_clean: Option<f64>,
    pub f1: Option<f64>,
    pub stopped: bool,
    pub reason: Option<StopReason>,
}

/// A single cleaning run, advanced one labeled batch at a time.
///
/// The session owns exactly one outstanding batch until it stops. A
/// submission must answer that batch exactly; anything else is rejected
/// without changing state.
#[derive(Debug, Clone)]
pub struct Session {
    prepared: Arc<PreparedTask>,
    cfg: CleaningConfig,
    pool: PairScores,
    holdout: Vec<PairKey>,
    labeled: Vec<LabeledPair>,
    outstanding: Option<Vec<PairKey>>,
    batches: usize,
    model: Option<Model>,
    margins: BTreeMap<PairKey, f64>,
    dups: BTreeSet<PairKey>,
    current: Vec<ViewResult>,
    history: Vec<f64>,
    stopped: Option<StopReason>,
    log: Vec<IterationRecord>,
}

impl Session {
    /// Splits off the holdout and queues the first batch.
    pub fn start(prepared: Arc<PreparedTask>, cfg: CleaningConfig) -> Result<Session> {
        cfg.validate()?;
        let mut pool = prepared.scores.clone();
        let mut holdout = Vec::new();
        if cfg.holdout {
            let mut keys: Vec<PairKey> = pool.keys().copied().collect();
            keys.shuffle(&mut rng_for(cfg.seed, &[0, STREAM_HOLDOUT]));
            holdout = keys[..keys.len() / 2].to_vec();
            holdout.sort();
            for p in &holdout {
                pool.remove(p);
            }
        }
        let current = prepared.dirty.clone();
        let per_view = prepared.distances_to_clean(&current)?;
        let mut session = Session {
            cfg,
            pool,
            holdout,
            labeled: Vec::new(),
            outstanding: None,
            batches: 0,
            model: None,
            margins: BTreeMap::new(),
            dups: BTreeSet::new(),
            current,
            history: Vec::new(),
            stopped: None,
            log: vec![IterationRecord {
                batch: 0,
                labels_used: 0,
                positives_labeled: 0,
                predicted_dups: 0,
                view_change: None,
                distance_to_clean: per_view.as_ref().map(|d| d.iter().copied().fold(0.0, f64::max)),
                per_view_to_clean: per_view,
                f1: None,
            }],
            prepared,
        };
        session.queue_next()?;
        Ok(session)
    }

    pub fn config(&self) -> &CleaningConfig {
        &self.cfg
    }

    pub fn prepared(&self) -> &Arc<PreparedTask> {
        &self.prepared
    }

    pub fn outstanding(&self) -> Option<&[PairKey]> {
        self.outstanding.as_deref()
    }

    pub fn stopped(&self) -> Option<StopReason> {
        self.stopped
    }

    pub fn labels_used(&self) -> usize {
        self.labeled.len()
    }

    pub fn batches(&self) -> usize {
        self.batches
    }

    /// `Distance(V_curr, V_prev)` for every batch after the first.
    pub fn history(&self) -> &[f64] {
        &self.history
    }

    pub fn current_views(&self) -> &[ViewResult] {
        &self.current
    }

    pub fn dups(&self) -> &BTreeSet<PairKey> {
        &self.dups
    }

    pub fn labeled(&self) -> &[LabeledPair] {
        &self.labeled
    }

    pub fn holdout(&self) -> &[PairKey] {
        &self.holdout
    }

    pub fn model(&self) -> Option<&Model> {
        self.model.as_ref()
    }

    pub fn log(&self) -> &[IterationRecord] {
        &self.log
    }

    /// Every user answer so far, in the order given.
    pub fn transcript(&self) -> Vec<(PairKey, Label)> {
        self.labeled.iter().map(|l| (l.pair, l.label)).collect()
    }

    /// The outstanding batch with full records and impact scores.
    pub fn payload(&self) -> Vec<PairPayload> {
        let rel = self.prepared.relation();
        self.outstanding
            .iter()
            .flatten()
            .map(|&pair| PairPayload {
                pair,
                left: rel.get(pair.low()).expect("pair ids exist").clone(),
                right: rel.get(pair.high()).expect("pair ids exist").clone(),
                impact: self.prepared.scores.get(&pair).map_or(0.0, |s| s.score),
            })
            .collect()
    }

    pub fn summary(&self) -> SessionSummary {
        let last = self.log.last().expect("log starts with the dirty view");
        SessionSummary {
            labels_used: self.labeled.len(),
            budget: self.cfg.budget,
            budget_remaining: self.cfg.budget - self.labeled.len(),
            batches: self.batches,
            outstanding: self.outstanding.as_ref().map_or(0, Vec::len),
            last_view_change: last.view_change,
            history: self.history.clone(),
            predicted_dups: self.dups.len(),
            distance_to_clean: last.distance_to_clean,
            f1: last.f1,
            stopped: self.stopped.is_some(),
            reason: self.stopped,
        }
    }

    /// SHA-256 over the labels, decisions, view history, and current views.
    pub fn digest(&self) -> String {
        #[derive(Serialize)]
        struct Canonical<'a> {
            transcript: Vec<(PairKey, Label)>,
            outstanding: &'a Option<Vec<PairKey>>,
            holdout: &'a [PairKey],
            batches: usize,
            dups: &'a BTreeSet<PairKey>,
            history: &'a [f64],
            log: &'a [IterationRecord],
            current: &'a [ViewResult],
            stopped: Option<StopReason>,
        }
        let canonical = Canonical {
            transcript: self.transcript(),
            outstanding: &self.outstanding,
            holdout: &self.holdout,
            batches: self.batches,
            dups: &self.dups,
            history: &self.history,
            log: &self.log,
            current: &self.current,
            stopped: self.stopped,
        };
        let bytes = serde_json::to_vec(&canonical).expect("session state serializes");
        format!("{:x}", Sha256::digest(&bytes))
    }

    /// Answers the outstanding batch. All-or-nothing: on error nothing changes.
    pub fn submit(&mut self, answers: &[(PairKey, Label)]) -> Result<&IterationRecord> {
        if let Some(reason) = self.stopped {
            return Err(Error::Stopped(reason));
        }
        let batch = self
            .outstanding
            .as_ref()
            .ok_or_else(|| Error::Submission("no outstanding batch".into()))?;
        let expected: HashSet<PairKey> = batch.iter().copied().collect();
        let mut given: BTreeMap<PairKey, Label> = BTreeMap::new();
        for &(pair, label) in answers {
            if !expected.contains(&pair) {
                return Err(Error::Submission(format!("pair {pair} is not in the outstanding batch")));
            }
            if given.insert(pair, label).is_some() {
                return Err(Error::Submission(format!("pair {pair} answered twice")));
            }
        }
        if given.len() != expected.len() {
            return Err(Error::Submission(format!(
                "expected {} labels, got {}",
                expected.len(),
                given.len()
            )));
        }

        // Build the next state on the side so a failure leaves `self` intact.
        let mut next = self.clone();
        let batch = next.outstanding.take().expect("checked above");
        for pair in batch {
            let features = next
                .prepared
                .space
                .features
                .get(&pair)
                .ok_or(Error::MissingFeatures(pair))?
                .to_vec();
            next.labeled.push(LabeledPair {
                pair,
                features,
                label: given[&pair],
            });
            next.pool.remove(&pair);
        }
        next.batches += 1;
        next.advance()?;
        *self = next;
        Ok(self.log.last().expect("advance appends a record"))
    }

    /// Retrain, reclassify, recompute views, then stop or queue the next batch.
    fn advance(&mut self) -> Result<()> {
        let model = train(&self.labeled, &self.cfg.train)?;
        let features = &self.prepared.space.features;
        let mut dups: BTreeSet<PairKey> = self
            .labeled
            .iter()
            .filter(|l| l.label.is_duplicate())
            .map(|l| l.pair)
            .collect();
        let mut margins = BTreeMap::new();
        for pair in self.pool.keys().chain(&self.holdout) {
            let x = features.get(pair).ok_or(Error::MissingFeatures(*pair))?;
            let d = model.decision(x)?;
            if Label::from_decision(d).is_duplicate() {
                dups.insert(*pair);
            }
            if self.pool.contains(pair) {
                margins.insert(*pair, d);
            }
        }

        let views = self.prepared.views_after(&dups)?;
        let change = dashboard_distance(&views, &self.current)?;
        if self.batches > 1 {
            self.history.push(change);
        }
        let per_view = self.prepared.distances_to_clean(&views)?;
        let f1 = match (&self.prepared.task.truth, self.holdout.is_empty()) {
            (Some(truth), false) => {
                let held: Vec<LabeledPair> = self
                    .holdout
                    .iter()
                    .map(|p| LabeledPair {
                        pair: *p,
                        features: features.get(p).expect("holdout pairs have features").to_vec(),
                        label: Label::from_bool(truth.is_match(p)),
                    })
                    .collect();
                Some(f1_on_holdout(&model, &held)?)
            }
            _ => None,
        };
        self.log.push(IterationRecord {
            batch: self.batches,
            labels_used: self.labeled.len(),
            positives_labeled: self.labeled.iter().filter(|l| l.label.is_duplicate()).count(),
            predicted_dups: dups.len(),
            view_change: Some(change),
            distance_to_clean: per_view.as_ref().map(|d| d.iter().copied().fold(0.0, f64::max)),
            per_view_to_clean: per_view,
            f1,
        });
        self.current = views;
        self.dups = dups;
        self.margins = margins;
        self.model = Some(model);

        let dcfg = DistanceConfig {
            epsilon: self.cfg.epsilon,
            window: self.cfg.window,
        };
        if converged(&self.history, &dcfg) {
            self.stopped = Some(StopReason::Converged);
            return Ok(());
        }
        self.queue_next()
    }

    fn queue_next(&mut self) -> Result<()> {
        let left = self.cfg.budget - self.labeled.len();
        if left == 0 {
            self.stopped = Some(StopReason::Budget);
            return Ok(());
        }
        if self.pool.is_empty() {
            self.stopped = Some(StopReason::Exhausted);
            return Ok(());
        }
        let b = if self.batches == 0 {
            self.cfg.initial_batch
        } else {
            self.cfg.batch
        }
        .min(left);
        let batch = self.select(b)?;
        debug_assert!(!batch.is_empty());
        self.outstanding = Some(batch);
        Ok(())
    }

    fn candidates(&self) -> Vec<PairKey> {
        self.pool.keys().copied().collect()
    }

    fn ensemble(&self) -> Result<Vec<EnsembleScore>> {
        let features = &self.prepared.space.features;
        let candidates: Vec<FeatureVector> = self
            .pool
            .keys()
            .map(|p| features.vector(p))
            .collect::<Result<_>>()?;
        ensemble_scores(
            &self.labeled,
            &candidates,
            self.cfg.ensemble_size,
            &self.cfg.train,
            derive_seed(self.cfg.seed, &[self.batches as u64, STREAM_ENSEMBLE]),
        )
    }

    fn select(&self, b: usize) -> Result<Vec<PairKey>> {
        let mut rng = rng_for(self.cfg.seed, &[self.batches as u64, STREAM_SELECT]);
        let features = &self.prepared.space.features;
        if self.batches == 0 {
            let candidates = self.candidates();
            return match self.cfg.initial_sampling() {
                InitialSampling::Bias => Ok(select_bias(b, &self.pool, &mut rng)),
                InitialSampling::Random => select_baseline(Baseline::Random(&candidates), b, &mut rng),
                InitialSampling::RoundRobin => {
                    select_baseline(Baseline::RoundRobin(&candidates, features), b, &mut rng)
                }
            };
        }
        match self.cfg.strategy {
            Strategy::ViewImpact => select_top(b, &self.pool, &self.margins, &mut rng),
            Strategy::Hybrid => {
                let unc: BTreeMap<PairKey, f64> =
                    self.ensemble()?.into_iter().map(|s| (s.pair, s.uncertainty)).collect();
                select_hybrid(b, &self.pool, &self.margins, &unc, self.cfg.alpha, &mut rng)
            }
            Strategy::Uncertainty => select_baseline(Baseline::Uncertainty(&self.ensemble()?), b, &mut rng),
            Strategy::Entropy => select_baseline(Baseline::Entropy(&self.ensemble()?), b, &mut rng),
            Strategy::Random => select_baseline(Baseline::Random(&self.candidates()), b, &mut rng),
            Strategy::RoundRobin => {
                select_baseline(Baseline::RoundRobin(&self.candidates(), features), b, &mut rng)
            }
        }
    }
}

/// Answers outstanding batches with `labeler` until the session stops. If
/// the labeler fails, the session keeps its outstanding batch and can be
/// driven again.
pub fn drive(session: &mut Session, labeler: &mut dyn Labeler) -> Result<()> {
    while session.outstanding().is_some() {
        let payload = session.payload();
        let labels = labeler.label(&payload)?;
        if labels.len() != payload.len() {
            return Err(Error::Labeler(format!(
                "expected {} labels, got {}",
                payload.len(),
                labels.len()
            )));
        }
        let answers: Vec<(PairKey, Label)> = payload.iter().map(|p| p.pair).zip(labels).collect();
        session.submit(&answers)?;
    }
    Ok(())
}

/// Starts a session and drives it to a stop.
pub fn run_cleaning(
    prepared: Arc<PreparedTask>,
    labeler: &mut dyn Labeler,
    cfg: CleaningConfig,
) -> Result<Session> {
    let mut session = Session::start(prepared, cfg)?;
    drive(&mut session, labeler)?;
    Ok(session)
}
