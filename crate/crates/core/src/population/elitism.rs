use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use super::{column_clusters, row_clusters, CodeId, ObservationMatrix, TestId};
use crate::belief::Belief;

/// Stronger belief first; among equals the older (smaller) id first.
fn by_strength<Id: Ord>(beliefs: &BTreeMap<Id, Belief>) -> impl Fn(&Id, &Id) -> Ordering + '_ {
    move |a, b| beliefs[b].cmp_strength(&beliefs[a]).then_with(|| a.cmp(b))
}

fn representative<Id: Copy + Ord>(block: &[Id], beliefs: &BTreeMap<Id, Belief>) -> Option<Id> {
    let order = by_strength(beliefs);
    block.iter().filter(|id| beliefs.contains_key(id)).copied().min_by(|a, b| order(a, b))
}

/// Diversity-preserving code elitism.
///
/// The elite set is the union of the top `ceil(rate * |C|)` candidates by
/// belief and the strongest representative of every functional-equivalence
/// block. When the union exceeds `capacity`, the weakest members are dropped.
/// The candidate set is the key set of `beliefs`; candidates missing from the
/// matrix are treated as singleton blocks.
pub fn select_code_elites(
    beliefs: &BTreeMap<CodeId, Belief>,
    matrix: &ObservationMatrix,
    elitism_rate: f64,
    capacity: usize,
) -> BTreeSet<CodeId> {
    let capacity = capacity.max(1);
    let order = by_strength(beliefs);
    let mut ranked: Vec<CodeId> = beliefs.keys().copied().collect();
    ranked.sort_by(|a, b| order(a, b));

    let top_k = (elitism_rate * beliefs.len() as f64).ceil() as usize;
    let mut elites: BTreeSet<CodeId> = ranked.iter().take(top_k).copied().collect();

    for block in row_clusters(matrix) {
        if let Some(rep) = representative(&block, beliefs) {
            elites.insert(rep);
        }
    }
    for id in beliefs.keys() {
        if matrix.row_index(*id).is_none() {
            elites.insert(*id);
        }
    }

    if elites.len() > capacity {
        let mut kept: Vec<CodeId> = elites.into_iter().collect();
        kept.sort_by(|a, b| order(a, b));
        kept.truncate(capacity);
        elites = kept.into_iter().collect();
    }
    elites
}

/// Redundancy-compressing test elitism: one strongest representative per
/// block of identical columns, plus every anchor unconditionally. Anchors
/// take part in the clustering, so an evolved test that duplicates an
/// anchor's behavior survives only if it outranks that anchor.
pub fn select_test_elites(
    beliefs: &BTreeMap<TestId, Belief>,
    matrix: &ObservationMatrix,
    anchors: &BTreeSet<TestId>,
) -> BTreeSet<TestId> {
    let mut elites: BTreeSet<TestId> = anchors.clone();
    for block in column_clusters(matrix) {
        if let Some(rep) = representative(&block, beliefs) {
            elites.insert(rep);
        }
    }
    for id in beliefs.keys() {
        if matrix.col_index(*id).is_none() {
            elites.insert(*id);
        }
    }
    elites
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::belief::LogOddsLimit;

    fn b(p: f64) -> Belief {
        Belief::from_probability(p, LogOddsLimit::default())
    }

    /// The 5×5 matrix of the functional-equivalence illustration.
    fn figure_matrix() -> ObservationMatrix {
        #[rustfmt::skip]
        let bits = [
            true,  true,  false, true,  true,
            true,  false, false, false, false,
            false, true,  true,  true,  true,
            false, true,  true,  true,  true,
            true,  true,  true,  false, false,
        ];
        ObservationMatrix::from_bits((1..=5).map(CodeId).collect(), (1..=5).map(TestId).collect(), &bits)
    }

    #[test]
    fn all_distinct_blocks_are_kept() {
        let bits: Vec<bool> = (0..100).map(|i| i % 11 == 0).collect();
        let m = ObservationMatrix::from_bits((0..10).map(CodeId).collect(), (0..10).map(TestId).collect(), &bits);
        let beliefs = (0..10).map(|i| (CodeId(i), b(0.1 + 0.05 * i as f64))).collect();
        assert_eq!(select_code_elites(&beliefs, &m, 0.3, 10).len(), 10);
    }

    #[test]
    fn weaker_twin_enters_only_through_top_k() {
        let m = figure_matrix();
        let mut beliefs: BTreeMap<CodeId, Belief> =
            [(1, 0.1), (2, 0.1), (3, 0.6), (4, 0.5), (5, 0.1)].into_iter().map(|(i, p)| (CodeId(i), b(p))).collect();
        let elites = select_code_elites(&beliefs, &m, 0.4, 10);
        assert!(elites.contains(&CodeId(3)) && elites.contains(&CodeId(4)));
        // Push c4 out of the top-2 and it must disappear.
        beliefs.insert(CodeId(1), b(0.9));
        let elites = select_code_elites(&beliefs, &m, 0.4, 10);
        assert!(elites.contains(&CodeId(3)));
        assert!(!elites.contains(&CodeId(4)));
    }

    #[test]
    fn pruned_to_capacity_by_belief() {
        // rows: c0 == c1, c2 == c3
        let m =
            ObservationMatrix::from_bits((0..4).map(CodeId).collect(), vec![TestId(0)], &[true, true, false, false]);
        let beliefs = [(0, 0.3), (1, 0.9), (2, 0.5), (3, 0.4)].into_iter().map(|(i, p)| (CodeId(i), b(p))).collect();
        // top-1 = {c1}; reps = {c1, c2}; union fits.
        let elites = select_code_elites(&beliefs, &m, 0.25, 2);
        assert_eq!(elites, BTreeSet::from([CodeId(1), CodeId(2)]));
        let elites = select_code_elites(&beliefs, &m, 0.25, 1);
        assert_eq!(elites, BTreeSet::from([CodeId(1)]));
    }

    #[test]
    fn ties_go_to_the_older_id() {
        let m = ObservationMatrix::from_bits(vec![CodeId(5), CodeId(2)], vec![TestId(0)], &[true, true]);
        let beliefs = [(5, 0.5), (2, 0.5)].into_iter().map(|(i, p)| (CodeId(i), b(p))).collect();
        assert_eq!(select_code_elites(&beliefs, &m, 0.1, 5), BTreeSet::from([CodeId(2)]));
    }

    #[test]
    fn redundant_test_keeps_stronger_member() {
        let m = figure_matrix();
        let beliefs =
            [(1, 0.2), (2, 0.2), (3, 0.2), (4, 0.4), (5, 0.7)].into_iter().map(|(i, p)| (TestId(i), b(p))).collect();
        let elites = select_test_elites(&beliefs, &m, &BTreeSet::new());
        assert_eq!(elites, BTreeSet::from([TestId(1), TestId(2), TestId(3), TestId(5)]));
    }

    #[test]
    fn anchor_absorbs_its_duplicates() {
        // t0 is an anchor; t1 duplicates it, t2 is distinct.
        let m = ObservationMatrix::from_bits(
            vec![CodeId(0), CodeId(1)],
            vec![TestId(0), TestId(1), TestId(2)],
            &[true, true, false, false, false, true],
        );
        let beliefs = [(0, 1.0 - 1e-12), (1, 0.6), (2, 0.3)].into_iter().map(|(i, p)| (TestId(i), b(p))).collect();
        let anchors = BTreeSet::from([TestId(0)]);
        assert_eq!(select_test_elites(&beliefs, &m, &anchors), BTreeSet::from([TestId(0), TestId(2)]));
    }
}
