//! CSV and text renderings of a benchmark run.

use std::fmt::Write as _;

use crate::bench::{AlgoSummary, BenchReport, StatRow};
use crate::traffic::TrafficRegime;

pub const REPORT_HEADER: &str =
    "approach,algorithm,preprocessing_min,avg_runtime_s,avg_cost,avg_expanded,avg_length_km,avg_eta_min,solved,unsolved";
pub const PER_TRIAL_HEADER: &str = "trial_id,algorithm,regime,cost,length_km,eta_min,runtime_s,expanded";
pub const STATS_HEADER: &str = "test,algo_a,algo_b,statistic,p_value,degenerate";

/// Marker for metrics that do not apply to an approach.
pub const NOT_APPLICABLE: &str = "-";

fn opt(v: Option<f64>, prec: usize) -> String {
    match v {
        Some(x) => format!("{x:.prec$}"),
        None => NOT_APPLICABLE.to_string(),
    }
}

/// One row per algorithm. With `breakdown`, four per-regime average-cost
/// columns follow, in none/light/moderate/heavy order.
pub fn report_csv(summaries: &[AlgoSummary], breakdown: bool) -> String {
    let mut out = String::from(REPORT_HEADER);
    if breakdown {
        for r in TrafficRegime::ALL {
            let _ = write!(out, ",cost_{r}");
        }
    }
    out.push('\n');
    for s in summaries {
        let _ = write!(
            out,
            "{},{},{:.6},{:.9},{:.6},{},{:.6},{:.6},{},{}",
            s.approach,
            s.label,
            s.preprocessing_min,
            s.avg_runtime_s,
            s.avg_cost,
            opt(s.avg_expanded, 2),
            s.avg_length_km,
            s.avg_eta_min,
            s.solved,
            s.unsolved
        );
        if breakdown {
            for c in s.regime_cost {
                let _ = write!(out, ",{}", opt(c, 6));
            }
        }
        out.push('\n');
    }
    out
}

/// Aligned markdown table for reading in a terminal.
pub fn report_markdown(summaries: &[AlgoSummary], breakdown: bool) -> String {
    let mut header = vec![
        "Approach".to_string(),
        "Algorithm".to_string(),
        "Preprocessing (min)".to_string(),
        "Avg runtime (s)".to_string(),
        "Avg cost".to_string(),
        "Avg expanded".to_string(),
        "Avg length (km)".to_string(),
        "Avg ETA (min)".to_string(),
        "Solved".to_string(),
        "Unsolved".to_string(),
    ];
    if breakdown {
        header.extend(TrafficRegime::ALL.iter().map(|r| format!("Cost ({r})")));
    }
    let mut rows = vec![header];
    for s in summaries {
        let mut row = vec![
            s.approach.to_string(),
            s.label.clone(),
            format!("{:.4}", s.preprocessing_min),
            format!("{:.6}", s.avg_runtime_s),
            format!("{:.2}", s.avg_cost),
            opt(s.avg_expanded, 0),
            format!("{:.2}", s.avg_length_km),
            format!("{:.2}", s.avg_eta_min),
            s.solved.to_string(),
            s.unsolved.to_string(),
        ];
        if breakdown {
            row.extend(s.regime_cost.iter().map(|c| opt(*c, 2)));
        }
        rows.push(row);
    }
    let widths: Vec<usize> = (0..rows[0].len())
        .map(|c| rows.iter().map(|r| r[c].chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for (i, row) in rows.iter().enumerate() {
        out.push('|');
        for (cell, w) in row.iter().zip(&widths) {
            let _ = write!(out, " {cell:<w$} |");
        }
        out.push('\n');
        if i == 0 {
            out.push('|');
            for w in &widths {
                let _ = write!(out, "{}|", "-".repeat(w + 2));
            }
            out.push('\n');
        }
    }
    out
}

/// Per-trial rows for external plotting, over the common-solvable trials.
pub fn per_trial_csv(report: &BenchReport) -> String {
    let mut out = String::from(PER_TRIAL_HEADER);
    out.push('\n');
    for rec in report.common_solvable() {
        for (c, r) in report.configs.iter().zip(&rec.results) {
            let r = r.as_ref().expect("common-solvable");
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                rec.trial.trial_id,
                c.label,
                rec.trial.regime,
                r.cost,
                r.length_km,
                r.eta_min,
                r.runtime_s,
                r.expanded.map_or(NOT_APPLICABLE.to_string(), |e| e.to_string())
            );
        }
    }
    out
}

pub fn stats_csv(rows: &[StatRow]) -> String {
    let mut out = String::from(STATS_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{:e},{}",
            r.test, r.algo_a, r.algo_b, r.result.statistic, r.result.p_value, r.result.degenerate
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::Approach;

    fn summary(label: &str, expanded: Option<f64>) -> AlgoSummary {
        AlgoSummary {
            approach: Approach::SingleQuery,
            label: label.into(),
            preprocessing_min: 0.0,
            avg_runtime_s: 0.001,
            avg_cost: 12.5,
            avg_expanded: expanded,
            avg_length_km: 10.0,
            avg_eta_min: 14.0,
            solved: 4,
            unsolved: 1,
            regime_cost: [Some(10.0), Some(11.0), None, Some(13.0)],
        }
    }

    #[test]
    fn csv_shape() {
        let s = [summary("a", Some(3.0)), summary("b", None)];
        let csv = report_csv(&s, false);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0], REPORT_HEADER);
        assert!(lines[2].contains(",-,"));

        let csv = report_csv(&s, true);
        let header: Vec<&str> = csv.lines().next().unwrap().split(',').collect();
        assert_eq!(&header[10..], ["cost_none", "cost_light", "cost_moderate", "cost_heavy"]);
        assert!(csv.lines().nth(1).unwrap().ends_with(",10.000000,11.000000,-,13.000000"));
    }

    #[test]
    fn markdown_is_aligned() {
        let md = report_markdown(&[summary("dijkstra", Some(3.0))], true);
        let widths: Vec<usize> = md.lines().map(|l| l.chars().count()).collect();
        assert!(widths.windows(2).all(|w| w[0] == w[1]));
    }
}
