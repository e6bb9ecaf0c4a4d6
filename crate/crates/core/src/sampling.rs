//! Weighted sampling without replacement.

use rand::Rng;

/// Draws `min(b, items.len())` items without replacement, each step picking
/// among the remaining items with probability proportional to its weight.
///
/// Uses Efraimidis–Spirakis keys `ln(u) / w`: the `b` largest keys form the
/// sample, in draw order. Items with zero (or negative, or NaN) weight are
/// only drawn once every positive-weight item is taken, in uniform random
/// order; if every weight is zero the draw is uniform.
pub fn weighted_sample_without_replacement<T: Clone, R: Rng + ?Sized>(
    items: &[(T, f64)],
    b: usize,
    rng: &mut R,
) -> Vec<T> {
    let mut keyed: Vec<(bool, f64, usize)> = items
        .iter()
        .enumerate()
        .map(|(i, (_, w))| {
            // u in (0, 1] so ln(u) is finite
            let u: f64 = 1.0 - rng.gen::<f64>();
            let positive = *w > 0.0 && w.is_finite();
            let key = if positive { u.ln() / w } else { u.ln() };
            (positive, key, i)
        })
        .collect();
    keyed.sort_by(|a, b| {
        b.0.cmp(&a.0)
            .then(b.1.total_cmp(&a.1))
            .then(a.2.cmp(&b.2))
    });
    keyed
        .into_iter()
        .take(b)
        .map(|(_, _, i)| items[i].0.clone())
        .collect()
}
