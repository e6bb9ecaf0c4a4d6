use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use viewclean::pairs::{similarity, SimilarityFn};
use viewclean::sampling::weighted_sample_without_replacement;
use viewclean::seed::{derive_seed, rng_for};
use viewclean::Value;

#[test]
fn single_draw_follows_weights() {
    // P(a) = 9 / (9 + 1)
    let items = [("a", 9.0), ("b", 1.0)];
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let hits = (0..10_000)
        .filter(|_| weighted_sample_without_replacement(&items, 1, &mut rng)[0] == "a")
        .count();
    let p = hits as f64 / 10_000.0;
    assert!((p - 0.9).abs() < 0.03, "{p}");
}

#[test]
fn two_of_three_matches_successive_sampling() {
    // weights 1, 2, 3: P(first = c) = 1/2; P(c in sample of 2) =
    // 3/6 + (1/6)(3/5) + (2/6)(3/4) = 0.85
    let items = [("a", 1.0), ("b", 2.0), ("c", 3.0)];
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let n = 20_000;
    let (mut first_c, mut has_c) = (0, 0);
    for _ in 0..n {
        let s = weighted_sample_without_replacement(&items, 2, &mut rng);
        first_c += (s[0] == "c") as usize;
        has_c += s.contains(&"c") as usize;
    }
    assert!((first_c as f64 / n as f64 - 0.5).abs() < 0.02);
    assert!((has_c as f64 / n as f64 - 0.85).abs() < 0.02);
}

#[test]
fn zero_weights_come_last() {
    let items = [(0, 0.0), (1, 5.0), (2, 0.0), (3, 1.0)];
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..200 {
        let s = weighted_sample_without_replacement(&items, 4, &mut rng);
        let mut head = s[..2].to_vec();
        head.sort();
        assert_eq!(head, vec![1, 3]);
    }
    // all-zero weights still produce a full, duplicate-free sample
    let flat = [(0, 0.0), (1, 0.0), (2, 0.0)];
    let mut s = weighted_sample_without_replacement(&flat, 5, &mut rng);
    s.sort();
    assert_eq!(s, vec![0, 1, 2]);
}

#[test]
fn derived_seeds_separate_streams() {
    assert_ne!(derive_seed(1, &[0]), derive_seed(1, &[1]));
    assert_ne!(derive_seed(1, &[0, 1]), derive_seed(1, &[1, 0]));
    assert_ne!(derive_seed(1, &[]), derive_seed(2, &[]));
    use rand::RngCore;
    assert_eq!(rng_for(5, &[3]).next_u64(), rng_for(5, &[3]).next_u64());
}

fn text() -> impl Strategy<Value = String> {
    "[a-c ]{0,12}"
}

proptest! {
    #[test]
    fn text_similarities_are_symmetric_and_bounded(a in text(), b in text()) {
        let (va, vb) = (Value::from(a.as_str()), Value::from(b.as_str()));
        for f in [SimilarityFn::LevenshteinNorm, SimilarityFn::Jaccard, SimilarityFn::JaccardContainment, SimilarityFn::Cosine] {
            let ab = similarity(f, &va, &vb, 1.0).unwrap();
            let ba = similarity(f, &vb, &va, 1.0).unwrap();
            prop_assert!((ab - ba).abs() < 1e-12, "{} {} {}", f, ab, ba);
            prop_assert!((0.0..=1.0).contains(&ab));
        }
    }

    #[test]
    fn identical_text_is_fully_similar(a in "[a-z]{1,6}( [a-z]{1,6}){0,3}") {
        let v = Value::from(a.as_str());
        for f in [SimilarityFn::LevenshteinNorm, SimilarityFn::Jaccard, SimilarityFn::JaccardContainment, SimilarityFn::Cosine] {
            prop_assert_eq!(similarity(f, &v, &v, 1.0).unwrap(), 1.0);
        }
    }

    #[test]
    fn numeric_similarity_is_symmetric(x in -100.0f64..100.0, y in -100.0f64..100.0) {
        let norm = x.abs().max(y.abs()).max(1.0);
        let f = SimilarityFn::NormEuclid;
        let ab = similarity(f, &Value::Number(x), &Value::Number(y), norm).unwrap();
        let ba = similarity(f, &Value::Number(y), &Value::Number(x), norm).unwrap();
        prop_assert_eq!(ab, ba);
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert_eq!(similarity(f, &Value::Number(x), &Value::Number(x), norm).unwrap(), 1.0);
    }
}
