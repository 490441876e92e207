//! One generation of belief updates on a hand-written observation matrix.
//!
//! ```text
//! cargo run --example belief_update
//! ```

use std::collections::{BTreeMap, BTreeSet};

use bace::belief::{generation_update, Belief, InteractionLedger, LogOddsLimit, UpdateParams};
use bace::population::{CodeId, ObservationMatrix, TestId};

fn main() {
    let limit = LogOddsLimit::default();
    // t0 is an anchor. c0 passes everything, c1 fails the anchor, c2 passes
    // the anchor and only one of the generated tests.
    let matrix = ObservationMatrix::from_bits(
        vec![CodeId(0), CodeId(1), CodeId(2)],
        vec![TestId(0), TestId(1), TestId(2), TestId(3)],
        &[
            true, true, true, true, //
            false, true, true, true, //
            true, false, true, false,
        ],
    );
    let code: BTreeMap<CodeId, Belief> = (0..3).map(|i| (CodeId(i), Belief::from_probability(0.2, limit))).collect();
    let mut tests: BTreeMap<TestId, Belief> =
        (1..4).map(|j| (TestId(j), Belief::from_probability(0.2, limit))).collect();
    tests.insert(TestId(0), Belief::from_probability(1.0 - 1e-12, limit));
    let anchors = BTreeSet::from([TestId(0)]);

    let mut ledger = InteractionLedger::new();
    let params = UpdateParams::default();
    let out =
        generation_update(&matrix, &code, &tests, &anchors, &params, &mut ledger).expect("matrix covers every id");

    println!("id\tprior\tposterior");
    for (id, b) in &out.code {
        println!("{id}\t{:.3}\t{:.6}", code[id].probability(), b.probability());
    }
    for (id, b) in &out.tests {
        println!("{id}\t{:.3}\t{:.6}", tests[id].probability(), b.probability());
    }
    println!("anchor failures: {:?}", out.anchor_failures);
    println!("pairs consumed: {}", out.consumed);

    // Replaying the same matrix is a no-op.
    let again = generation_update(&matrix, &out.code, &out.tests, &anchors, &params, &mut ledger).unwrap();
    assert_eq!(again.code, out.code);
    println!("replay consumed: {}", again.consumed);
}
