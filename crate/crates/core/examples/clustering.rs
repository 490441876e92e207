//! Functional-equivalence blocks of candidates and redundancy blocks of tests.
//!
//! ```text
//! cargo run --example clustering
//! ```

use bace::population::{column_clusters, row_clusters, CodeId, ObservationMatrix, TestId};

fn main() {
    #[rustfmt::skip]
    let bits = [
        true,  true,  false, true,  true,
        true,  false, false, false, false,
        false, true,  true,  true,  true,
        false, true,  true,  true,  true,
        true,  true,  true,  false, false,
    ];
    let matrix = ObservationMatrix::from_bits((1..=5).map(CodeId).collect(), (1..=5).map(TestId).collect(), &bits);

    for r in 0..matrix.n_rows() {
        let row: String = (0..matrix.n_cols()).map(|c| if matrix.get(r, c).is_pass() { '1' } else { '0' }).collect();
        println!("{}\t{row}", matrix.rows()[r]);
    }
    println!();
    for block in row_clusters(&matrix) {
        println!("code block: {block:?}");
    }
    for block in column_clusters(&matrix) {
        println!("test block: {block:?}");
    }
}
