//! Text table over a results CSV: one block per pipeline with the baseline
//! and the best cell of each context family, best value per column marked.

use std::fmt::Write as _;

use super::significance::{significance, MAX_EXACT_PAIRS};
use super::sweep::ResultRow;
use crate::error::{Error, Result};

const FAMILIES: [&str; 6] = [
    "none",
    "local",
    "local attention",
    "speaker",
    "speaker attention",
    "local+speaker",
];

fn family(r: &ResultRow) -> &'static str {
    match (r.local_size > 0, r.speaker_size > 0) {
        (false, false) => "none",
        (true, true) => "local+speaker",
        (true, false) if r.local_attention => "local attention",
        (true, false) => "local",
        (false, true) if r.speaker_attention => "speaker attention",
        (false, true) => "speaker",
    }
}

fn setting(r: &ResultRow) -> String {
    let local = format!("{} {}", r.local_position, r.local_size);
    let speaker = format!("k={}", r.speaker_size);
    match family(r) {
        "none" => "-".into(),
        "local" | "local attention" => local,
        "speaker" | "speaker attention" => speaker,
        _ => format!("{local} + {speaker}"),
    }
}

struct Line<'a> {
    row: &'a ResultRow,
    family: &'static str,
    p_value: Option<f64>,
}

fn fold_kappas(rows: &[ResultRow], cell: &ResultRow) -> Vec<(i64, f64)> {
    let mut v: Vec<(i64, f64)> = rows
        .iter()
        .filter(|r| !r.is_aggregate() && r.same_cell(cell))
        .map(|r| (r.fold, r.kappa))
        .collect();
    v.sort_by_key(|x| x.0);
    v
}

fn p_against(rows: &[ResultRow], cell: &ResultRow, baseline: &ResultRow) -> Option<f64> {
    let a = fold_kappas(rows, cell);
    let b = fold_kappas(rows, baseline);
    let paired = a.len() == b.len() && a.iter().zip(&b).all(|(x, y)| x.0 == y.0);
    if !paired || a.len() < 2 || a.len() > MAX_EXACT_PAIRS {
        return None;
    }
    let ka: Vec<f64> = a.iter().map(|x| x.1).collect();
    let kb: Vec<f64> = b.iter().map(|x| x.1).collect();
    significance(&ka, &kb).ok()
}

/// Renders the table. Output depends only on `rows`.
pub fn render_report(rows: &[ResultRow]) -> Result<String> {
    let aggregates: Vec<&ResultRow> = rows.iter().filter(|r| r.is_aggregate()).collect();
    if aggregates.is_empty() {
        return Err(Error::Data("results contain no aggregate (fold = -1) rows".into()));
    }
    let mut pipelines: Vec<&str> = Vec::new();
    for r in &aggregates {
        if !pipelines.contains(&r.pipeline.as_str()) {
            pipelines.push(&r.pipeline);
        }
    }
    let mut lines: Vec<Line> = Vec::new();
    for p in &pipelines {
        let mine: Vec<&&ResultRow> = aggregates.iter().filter(|r| r.pipeline == *p).collect();
        let baseline = mine.iter().find(|r| family(r) == "none").copied();
        for fam in FAMILIES {
            let mut best: Option<&ResultRow> = None;
            for r in mine.iter().filter(|r| family(r) == fam) {
                if best.is_none_or(|b| r.kappa > b.kappa) {
                    best = Some(r);
                }
            }
            if let Some(row) = best {
                let p_value = match baseline {
                    Some(b) if fam != "none" => p_against(rows, row, b),
                    _ => None,
                };
                lines.push(Line { row, family: fam, p_value });
            }
        }
    }

    let metric = |r: &ResultRow, c: usize| [r.kappa, r.precision, r.recall, r.f_score][c];
    let mut best = [f64::NEG_INFINITY; 4];
    for l in &lines {
        for (c, b) in best.iter_mut().enumerate() {
            *b = b.max(metric(l.row, c));
        }
    }
    let cellf = |v: f64, is_best: bool| {
        let s = format!("{v:.3}");
        if is_best {
            format!("**{s}**")
        } else {
            s
        }
    };

    let mut seeds: Vec<u64> = rows.iter().map(|r| r.seed).collect();
    seeds.sort_unstable();
    seeds.dedup();
    let seeds: Vec<String> = seeds.iter().map(u64::to_string).collect();

    let mut out = String::new();
    writeln!(out, "seed: {}", seeds.join(",")).unwrap();
    writeln!(out, "{:<18} {:<18} {:<18} {:>9} {:>9} {:>9} {:>9} {:>8}", "Model", "Context", "Setting", "Kappa", "Precision", "Recall", "F-score", "p").unwrap();
    let mut last_pipeline = "";
    for l in &lines {
        if !last_pipeline.is_empty() && l.row.pipeline != last_pipeline {
            out.push('\n');
        }
        last_pipeline = &l.row.pipeline;
        let vals: Vec<String> = (0..4).map(|c| cellf(metric(l.row, c), metric(l.row, c) == best[c])).collect();
        let p = l.p_value.map_or_else(|| "-".to_string(), |p| format!("{p:.4}"));
        writeln!(
            out,
            "{:<18} {:<18} {:<18} {:>9} {:>9} {:>9} {:>9} {:>8}",
            l.row.pipeline,
            l.family,
            setting(l.row),
            vals[0],
            vals[1],
            vals[2],
            vals[3],
            p
        )
        .unwrap();
    }
    writeln!(out, "\n** best in column; p: exact paired sign-flip test on per-fold kappa against the baseline").unwrap();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(pipeline: &str, pos: &str, l: usize, k: usize, fold: i64, kappa: f64) -> ResultRow {
        ResultRow {
            pipeline: pipeline.into(),
            local_position: pos.into(),
            local_size: l,
            speaker_size: k,
            local_attention: false,
            speaker_attention: false,
            fold,
            kappa,
            precision: kappa,
            recall: kappa,
            f_score: kappa,
            seed: 3,
        }
    }

    #[test]
    fn picks_best_per_family_and_marks_columns() {
        let rows = vec![
            row("hybrid", "none", 0, 0, -1, 0.35),
            row("hybrid", "prior", 2, 0, -1, 0.40),
            row("hybrid", "both", 2, 0, -1, 0.52),
            row("hybrid", "none", 0, 10, -1, 0.38),
            row("hybrid", "both", 2, 10, -1, 0.50),
        ];
        let t = render_report(&rows).unwrap();
        assert!(t.contains("both 2"));
        assert!(!t.contains("prior 2"));
        assert!(t.contains("**0.520**"));
        assert_eq!(t.matches("**").count(), 4 * 2 + 1);
        assert_eq!(render_report(&rows).unwrap(), t);
    }

    #[test]
    fn no_aggregates_is_an_error() {
        assert!(render_report(&[row("hybrid", "none", 0, 0, 0, 0.1)]).is_err());
    }
}
