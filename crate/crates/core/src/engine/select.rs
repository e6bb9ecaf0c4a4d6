//! Batch selection strategies. Every function is deterministic given the
//! rng state; candidate order is canonical pair order unless noted.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::classifier::EnsembleScore;
use crate::error::{Error, Result};
use crate::pairs::FeatureTable;
use crate::relation::{PairKey, RecordId};
use crate::sampling::weighted_sample_without_replacement;

use super::PairScores;

/// Weighted sampling by impact score over every candidate.
pub fn select_bias<R: Rng + ?Sized>(b: usize, ps: &PairScores, rng: &mut R) -> Vec<PairKey> {
    let items: Vec<(PairKey, f64)> = ps.iter().map(|(p, s)| (*p, s.score)).collect();
    weighted_sample_without_replacement(&items, b, rng)
}

/// One entry per generating tuple: the pair with the smallest `|margin|`
/// (ties to the smaller pair), carrying the tuple's score. Ordered by
/// generator id.
pub fn top_pair_scores(ps: &PairScores, margins: &BTreeMap<PairKey, f64>) -> Result<Vec<(PairKey, f64)>> {
    let mut best: BTreeMap<RecordId, (f64, PairKey, f64)> = BTreeMap::new();
    for (pair, s) in ps.iter() {
        let m = margins.get(pair).ok_or(Error::MissingMargin(*pair))?.abs();
        best.entry(s.generator)
            .and_modify(|cur| {
                if m < cur.0 {
                    *cur = (m, *pair, s.score);
                }
            })
            .or_insert((m, *pair, s.score));
    }
    Ok(best.into_values().map(|(_, p, s)| (p, s)).collect())
}

pub fn select_top<R: Rng + ?Sized>(
    b: usize,
    ps: &PairScores,
    margins: &BTreeMap<PairKey, f64>,
    rng: &mut R,
) -> Result<Vec<PairKey>> {
    let items = top_pair_scores(ps, margins)?;
    Ok(weighted_sample_without_replacement(&items, b, rng))
}

/// `α · impact/max impact + (1 − α) · uncertainty/max uncertainty`; a term
/// whose maximum is zero contributes zero.
pub fn hybrid_weights(
    items: &[(PairKey, f64)],
    uncertainty: &BTreeMap<PairKey, f64>,
    alpha: f64,
) -> Result<Vec<(PairKey, f64)>> {
    let unc: Vec<f64> = items
        .iter()
        .map(|(p, _)| uncertainty.get(p).copied().ok_or(Error::MissingMargin(*p)))
        .collect::<Result<_>>()?;
    let scale = |max: f64| if max > 0.0 { 1.0 / max } else { 0.0 };
    let si = scale(items.iter().map(|(_, s)| *s).fold(0.0, f64::max));
    let su = scale(unc.iter().copied().fold(0.0, f64::max));
    Ok(items
        .iter()
        .zip(unc)
        .map(|(&(p, s), u)| {
            let w = if alpha >= 1.0 {
                s * si
            } else if alpha <= 0.0 {
                u * su
            } else {
                alpha * s * si + (1.0 - alpha) * u * su
            };
            (p, w)
        })
        .collect())
}

pub fn select_hybrid<R: Rng + ?Sized>(
    b: usize,
    ps: &PairScores,
    margins: &BTreeMap<PairKey, f64>,
    uncertainty: &BTreeMap<PairKey, f64>,
    alpha: f64,
    rng: &mut R,
) -> Result<Vec<PairKey>> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Config(format!("alpha {alpha} outside [0, 1]")));
    }
    let items = hybrid_weights(&top_pair_scores(ps, margins)?, uncertainty, alpha)?;
    Ok(weighted_sample_without_replacement(&items, b, rng))
}

/// Weight `1 / r` where `r` is the pair's best 1-based rank over the
/// per-feature lists sorted by decreasing value (ties by pair order).
pub fn round_robin_weights(candidates: &[PairKey], features: &FeatureTable) -> Result<Vec<(PairKey, f64)>> {
    let vectors: Vec<&[f64]> = candidates
        .iter()
        .map(|p| features.get(p).ok_or(Error::MissingFeatures(*p)))
        .collect::<Result<_>>()?;
    let mut best = vec![usize::MAX; candidates.len()];
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    for f in 0..features.spec().len() {
        order.sort_by(|&a, &b| {
            vectors[b][f]
                .total_cmp(&vectors[a][f])
                .then(candidates[a].cmp(&candidates[b]))
        });
        for (rank, &i) in order.iter().enumerate() {
            best[i] = best[i].min(rank + 1);
        }
    }
    Ok(candidates
        .iter()
        .zip(best)
        .map(|(&p, r)| (p, if r == usize::MAX { 0.0 } else { 1.0 / r as f64 }))
        .collect())
}

/// Non-view-aware strategies.
#[derive(Debug, Clone, Copy)]
pub enum Baseline<'a> {
    /// Bootstrap disagreement of each candidate.
    Uncertainty(&'a [EnsembleScore]),
    Entropy(&'a [EnsembleScore]),
    Random(&'a [PairKey]),
    RoundRobin(&'a [PairKey], &'a FeatureTable),
}

pub fn select_baseline<R: Rng + ?Sized>(kind: Baseline<'_>, b: usize, rng: &mut R) -> Result<Vec<PairKey>> {
    Ok(match kind {
        Baseline::Uncertainty(scores) => {
            let items: Vec<_> = scores.iter().map(|s| (s.pair, s.uncertainty)).collect();
            weighted_sample_without_replacement(&items, b, rng)
        }
        Baseline::Entropy(scores) => {
            let items: Vec<_> = scores.iter().map(|s| (s.pair, s.entropy)).collect();
            weighted_sample_without_replacement(&items, b, rng)
        }
        Baseline::Random(candidates) => {
            let mut v = candidates.to_vec();
            let (picked, _) = v.partial_shuffle(rng, b.min(candidates.len()));
            picked.to_vec()
        }
        Baseline::RoundRobin(candidates, features) => {
            let items = round_robin_weights(candidates, features)?;
            weighted_sample_without_replacement(&items, b, rng)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::PairScore;
    use crate::pairs::{FeatureDef, SimilarityFn};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pk(a: u32, b: u32) -> PairKey {
        PairKey::new(RecordId(a), RecordId(b)).unwrap()
    }

    fn ps(entries: &[(PairKey, f64, u32)]) -> PairScores {
        entries
            .iter()
            .map(|&(p, score, g)| (p, PairScore { score, generator: RecordId(g) }))
            .collect()
    }

    #[test]
    fn top_keeps_min_margin_per_tuple() {
        let scores = ps(&[(pk(1, 2), 0.5, 1), (pk(1, 3), 0.5, 1)]);
        let margins = BTreeMap::from([(pk(1, 2), -0.5), (pk(1, 3), 0.1)]);
        assert_eq!(top_pair_scores(&scores, &margins).unwrap(), vec![(pk(1, 3), 0.5)]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(select_top(5, &scores, &margins, &mut rng).unwrap(), vec![pk(1, 3)]);
    }

    #[test]
    fn top_skips_zero_weight_tuples() {
        let scores = ps(&[(pk(1, 2), 1.0, 1), (pk(3, 4), 0.0, 3)]);
        let margins = BTreeMap::from([(pk(1, 2), 0.3), (pk(3, 4), 0.0)]);
        for seed in 0..50 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            assert_eq!(select_top(1, &scores, &margins, &mut rng).unwrap(), vec![pk(1, 2)]);
        }
    }

    #[test]
    fn missing_margin_is_an_error() {
        let scores = ps(&[(pk(1, 2), 1.0, 1)]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            select_top(1, &scores, &BTreeMap::new(), &mut rng),
            Err(Error::MissingMargin(_))
        ));
    }

    #[test]
    fn hybrid_half_alpha_balances_terms() {
        let items = vec![(pk(1, 2), 1.0), (pk(3, 4), 0.0)];
        let unc = BTreeMap::from([(pk(1, 2), 0.0), (pk(3, 4), 1.0)]);
        let w = hybrid_weights(&items, &unc, 0.5).unwrap();
        assert_eq!(w[0].1, 0.5);
        assert_eq!(w[1].1, 0.5);
    }

    #[test]
    fn round_robin_rank_symmetry() {
        let (a, b) = (pk(1, 2), pk(3, 4));
        let spec = vec![
            FeatureDef::new("x", SimilarityFn::Jaccard),
            FeatureDef::new("y", SimilarityFn::Jaccard),
        ];
        let table = FeatureTable::from_vectors(
            spec,
            BTreeMap::from([(a, vec![0.9, 0.1]), (b, vec![0.2, 0.8])]),
        )
        .unwrap();
        let w = round_robin_weights(&[a, b], &table).unwrap();
        assert_eq!(w, vec![(a, 1.0), (b, 1.0)]);
    }

    #[test]
    fn random_takes_everything() {
        let cands: Vec<PairKey> = (0..6).map(|k| pk(k, 10)).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut got = select_baseline(Baseline::Random(&cands), 6, &mut rng).unwrap();
        got.sort();
        assert_eq!(got, cands);
    }

    #[test]
    fn uncertainty_all_zero_is_uniform() {
        let cands: Vec<EnsembleScore> = (0..3)
            .map(|k| EnsembleScore { pair: pk(k, 10), p: 1.0, uncertainty: 0.0, entropy: 0.0 })
            .collect();
        let mut hits = [0usize; 3];
        for seed in 0..3000 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let got = select_baseline(Baseline::Uncertainty(&cands), 1, &mut rng).unwrap();
            hits[got[0].low().0 as usize] += 1;
        }
        for h in hits {
            assert!((h as f64 / 3000.0 - 1.0 / 3.0).abs() < 0.04, "{hits:?}");
        }
    }
}
