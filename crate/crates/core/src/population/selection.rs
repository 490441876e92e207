use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;

use crate::belief::Belief;

/// Fitness-proportionate selection of `k` parents.
///
/// Each slot is drawn with probability proportional to belief among the
/// individuals not yet in the tuple, so parents are distinct whenever the pool
/// is large enough; once it is exhausted, slots are drawn from the whole pool.
/// When the candidate mass is below `1e-9` the draw is uniform.
pub fn roulette_select<T: Copy + PartialEq, R: Rng + ?Sized>(pool: &[(T, f64)], k: usize, rng: &mut R) -> Vec<T> {
    assert!(!pool.is_empty(), "roulette over an empty pool");
    let mut picked: Vec<T> = Vec::with_capacity(k);
    for _ in 0..k {
        let mut open: Vec<&(T, f64)> = pool.iter().filter(|(t, _)| !picked.contains(t)).collect();
        if open.is_empty() {
            open = pool.iter().collect();
        }
        let total: f64 = open.iter().map(|(_, w)| w.max(0.0)).sum();
        let i = if total >= 1e-9 {
            WeightedIndex::new(open.iter().map(|(_, w)| w.max(0.0))).expect("positive total weight").sample(rng)
        } else {
            rng.gen_range(0..open.len())
        };
        picked.push(open[i].0);
    }
    picked
}

/// Samples up to `k` distinct items without replacement, weighting each by its
/// rank when sorted by ascending score (the highest score has weight `n`).
pub fn rank_sample<T: Copy, R: Rng + ?Sized>(items: &[(T, f64)], k: usize, rng: &mut R) -> Vec<T> {
    let mut ranked: Vec<(T, f64)> = items.to_vec();
    ranked.sort_by(|a, b| a.1.total_cmp(&b.1));
    let mut remaining: Vec<(T, f64)> = ranked.into_iter().enumerate().map(|(i, (t, _))| (t, (i + 1) as f64)).collect();
    let mut out = Vec::new();
    while out.len() < k && !remaining.is_empty() {
        let dist = WeightedIndex::new(remaining.iter().map(|(_, w)| *w)).expect("positive rank weights");
        let i = dist.sample(rng);
        out.push(remaining.remove(i).0);
    }
    out
}

/// An offspring inherits the weakest belief among its parents.
pub fn assign_offspring_belief(parents: &[Belief]) -> Belief {
    *parents.iter().min_by(|a, b| a.cmp_strength(b)).expect("offspring needs at least one parent")
}
