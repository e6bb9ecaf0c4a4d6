use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pairs::FeatureVector;
use crate::relation::PairKey;
use crate::seed::rng_for;

use super::{train, LabeledPair, Model, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleScore {
    pub pair: PairKey,
    /// Fraction of members voting duplicate.
    pub p: f64,
    pub uncertainty: f64,
    pub entropy: f64,
}

/// `1 − |2p − 1|`: 0 on unanimity, 1 on an even split.
pub fn disagreement(p: f64) -> f64 {
    1.0 - (2.0 * p - 1.0).abs()
}

/// Binary entropy in bits with `0 · log 0 = 0`.
pub fn binary_entropy(p: f64) -> f64 {
    let h = |q: f64| if q <= 0.0 { 0.0 } else { -q * q.log2() };
    h(p) + h(1.0 - p)
}

/// Trains `k` models on bootstrap resamples of `data` (member `m` draws
/// from the stream `[m]` under `seed`) and scores each candidate by vote
/// disagreement.
pub fn ensemble_scores(
    data: &[LabeledPair],
    candidates: &[FeatureVector],
    k: usize,
    cfg: &TrainConfig,
    seed: u64,
) -> Result<Vec<EnsembleScore>> {
    if data.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    if k == 0 {
        return Err(Error::Config("ensemble needs at least one member".into()));
    }
    let models: Vec<Model> = (0..k as u64)
        .into_par_iter()
        .map(|m| {
            let mut rng = rng_for(seed, &[m]);
            let sample: Vec<LabeledPair> = (0..data.len())
                .map(|_| data[rng.gen_range(0..data.len())].clone())
                .collect();
            train(&sample, cfg)
        })
        .collect::<Result<_>>()?;
    candidates
        .iter()
        .map(|c| {
            let mut votes = 0usize;
            for model in &models {
                if model.decision(&c.features)? > 0.0 {
                    votes += 1;
                }
            }
            let p = votes as f64 / k as f64;
            Ok(EnsembleScore {
                pair: c.pair,
                p,
                uncertainty: disagreement(p),
                entropy: binary_entropy(p),
            })
        })
        .collect()
}
