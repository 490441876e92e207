use std::fmt::Write;

use super::RunLog;
use crate::population::ParentId;

/// Renders the tab-separated report of a run: belief trajectories, lineage
/// edges and cluster-size history. Output depends only on the log.
pub fn render_report(log: &RunLog) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# run\t{}\tdigest\t{}", log.problem.id, log.digest);
    if let Some(r) = &log.result {
        let _ = writeln!(
            out,
            "# best\t{}\tbelief\t{:.9}\tpasses_anchors\t{}",
            r.best_code.id,
            r.best_code.belief.probability(),
            r.best_passes_anchors
        );
    }

    out.push_str("\n# belief_trajectories\ngeneration\tindividual\tbelief\tlog_odds\n");
    for g in &log.generations {
        let code = g.code_beliefs.iter().map(|(id, b)| (ParentId::Code(*id), b));
        let tests = g.test_beliefs.iter().map(|(id, b)| (ParentId::Test(*id), b));
        for (id, b) in code.chain(tests) {
            let _ = writeln!(out, "{}\t{}\t{:.9}\t{:.6}", g.index, id, b.probability(), b.log_odds());
        }
    }

    out.push_str("\n# lineage\nchild\tparent\toperator\tgeneration\n");
    for g in &log.generations {
        for birth in &g.births {
            for parent in &birth.lineage.parents {
                let _ = writeln!(
                    out,
                    "{}\t{}\t{}\t{}",
                    birth.individual,
                    parent,
                    birth.lineage.operator.as_str(),
                    birth.lineage.generation
                );
            }
        }
    }

    out.push_str("\n# clusters\ngeneration\tphase\tcode_blocks\tcode_sizes\ttest_blocks\ttest_sizes\n");
    let join = |v: &[usize]| v.iter().map(usize::to_string).collect::<Vec<_>>().join(",");
    for g in &log.generations {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}",
            g.index,
            serde_json::to_value(g.phase).expect("phase serializes").as_str().unwrap_or_default(),
            g.code_cluster_sizes.len(),
            join(&g.code_cluster_sizes),
            g.test_cluster_sizes.len(),
            join(&g.test_cluster_sizes)
        );
    }
    out
}
