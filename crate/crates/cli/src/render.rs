use std::fmt::Write;

use ideaforge::evaluation::Summary;

/// A human-readable digest of `summary.json`.
pub fn render_markdown(s: &Summary) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# Evaluation report\n\nseed: {}\n", s.seed);

    out.push_str("## Diversity\n\n");
    out.push_str("| method | unique atoms | coverage | Gini | mean rep | top-10 share |\n");
    out.push_str("|---|---|---|---|---|---|\n");
    for m in &s.diversity {
        let r = &m.report;
        let _ = writeln!(
            out,
            "| {} | {} | {:.1}% | {:.3} | {:.2} | {:.1}% |",
            m.method,
            r.unique_atoms,
            100.0 * r.coverage,
            r.gini,
            r.mean_repetition,
            100.0 * r.top10_share
        );
    }

    out.push_str("\n## Overlap with the corpus\n\n");
    out.push_str("| method | candidates | max int | max jac |\n|---|---|---|---|\n");
    for m in &s.coherence {
        let _ = writeln!(
            out,
            "| {} | {} | {:.3} | {:.3} |",
            m.method, m.candidates, m.max_int_mean, m.max_jac_mean
        );
    }

    if !s.novelty.is_empty() {
        out.push_str("\n## Novelty\n\n");
        if s.novelty.iter().any(|n| n.proxy) {
            out.push_str("Candidate embeddings are the mean of atom centroids (proxy), not reconstructions.\n\n");
        }
        out.push_str("| method | candidates | mean distance |\n|---|---|---|\n");
        for m in &s.novelty {
            let _ = writeln!(out, "| {} | {} | {:.4} |", m.method, m.candidates, m.mean_distance);
        }
    }

    if !s.comparisons.is_empty() {
        out.push_str("\n## Comparisons (two-sided Mann-Whitney U)\n\n");
        out.push_str("| metric | a | b | n1 | n2 | U | p | r |\n|---|---|---|---|---|---|---|---|\n");
        for c in &s.comparisons {
            let r = &c.result;
            let _ = writeln!(
                out,
                "| {} | {} | {} | {} | {} | {} | {:.3e} | {:.3} |",
                c.metric, c.method_a, c.method_b, r.n1, r.n2, r.u, r.p, r.r
            );
        }
    }

    if !s.reconstruction.is_empty() {
        out.push_str("\n## Reconstruction\n\n");
        out.push_str("| representation | rated | mean | 1 | 2 | 3 | 4 | 5 |\n|---|---|---|---|---|---|---|---|\n");
        for r in &s.reconstruction {
            let h = r.histogram;
            let _ = writeln!(
                out,
                "| {} | {} | {:.2} | {} | {} | {} | {} | {} |",
                r.representation.name(),
                r.rated,
                r.mean,
                h[0],
                h[1],
                h[2],
                h[3],
                h[4]
            );
        }
    }
    if let Some(st) = &s.stability {
        let _ = writeln!(
            out,
            "\nStability over {} reconstructions per combination: mean similarity {:.3} across {} combinations.",
            st.reconstructions,
            st.mean,
            st.per_combo.len()
        );
    }
    out
}
