use std::collections::HashMap;

use super::{BehaviorVector, CodeId, ObservationMatrix, TestId};

fn group<Id: Copy + Ord>(items: impl Iterator<Item = (Id, BehaviorVector)>) -> Vec<Vec<Id>> {
    let mut blocks: HashMap<BehaviorVector, Vec<Id>> = HashMap::new();
    for (id, vector) in items {
        blocks.entry(vector).or_default().push(id);
    }
    let mut out: Vec<Vec<Id>> = blocks
        .into_values()
        .map(|mut b| {
            b.sort();
            b
        })
        .collect();
    out.sort_by_key(|b| b[0]);
    out
}

/// Partitions code ids into functional-equivalence blocks: identical rows of
/// the matrix. Blocks and their members are ordered by id.
pub fn row_clusters(matrix: &ObservationMatrix) -> Vec<Vec<CodeId>> {
    group(matrix.rows().iter().enumerate().map(|(r, &id)| (id, matrix.row_vector(r))))
}

/// Partitions test ids into redundancy blocks: identical columns of the matrix.
pub fn column_clusters(matrix: &ObservationMatrix) -> Vec<Vec<TestId>> {
    group(matrix.cols().iter().enumerate().map(|(c, &id)| (id, matrix.col_vector(c))))
}
