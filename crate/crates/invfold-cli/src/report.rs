//! Result reporting: JSONL per-run records, and solved-count summary
//! tables (aligned text and CSV) with cumulative time or playout buckets.

use std::fmt::Write as _;

use clap::ValueEnum;
use serde::Serialize;

use crate::driver::RunOutcome;

/// What the cumulative buckets count by.
#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BucketBy {
    /// Wall-clock seconds at which each solve landed.
    Time,
    /// Playouts consumed by the run that solved.
    Playouts,
}

/// Cumulative bucket edges. Counts are non-decreasing across edges by
/// construction (every edge includes all earlier solves).
#[derive(Clone, Debug)]
pub struct Bucketing {
    /// The metric bucketed.
    pub by: BucketBy,
    /// Ascending edges (seconds or playouts).
    pub edges: Vec<f64>,
}

impl Bucketing {
    /// Doubling wall-time edges: 1m, 2m, 4m, 8m.
    pub fn time_default() -> Self {
        Bucketing {
            by: BucketBy::Time,
            edges: vec![60.0, 120.0, 240.0, 480.0],
        }
    }

    /// Decade playout edges: 100 … 100k.
    pub fn playouts_default() -> Self {
        Bucketing {
            by: BucketBy::Playouts,
            edges: vec![100.0, 1_000.0, 10_000.0, 100_000.0],
        }
    }

    /// The default edges for `by`.
    pub fn default_for(by: BucketBy) -> Self {
        match by {
            BucketBy::Time => Self::time_default(),
            BucketBy::Playouts => Self::playouts_default(),
        }
    }

    fn label(&self, edge: f64) -> String {
        match self.by {
            BucketBy::Time => {
                if edge >= 60.0 && (edge / 60.0).fract() == 0.0 {
                    format!("<={}m", edge / 60.0)
                } else {
                    format!("<={}s", edge)
                }
            }
            BucketBy::Playouts => format!("<={}", edge as u64),
        }
    }

    /// The metric value of a solved outcome, `None` when unsolved.
    fn solve_metric(&self, outcome: &RunOutcome) -> Option<f64> {
        if !outcome.solved {
            return None;
        }
        match self.by {
            BucketBy::Time => outcome.solve_s.or(Some(outcome.wall_s)),
            BucketBy::Playouts => Some(outcome.playouts as f64),
        }
    }
}

/// One JSONL line for a run record.
pub fn jsonl_line(outcome: &RunOutcome) -> String {
    let mut line =
        serde_json::to_string(outcome).expect("run outcomes serialize infallibly");
    line.push('\n');
    line
}

/// A summary row: one configuration across a whole puzzle set.
struct SummaryRow {
    cells: Vec<String>,
}

const BASE_COLUMNS: [&str; 9] = [
    "Algo", "Level", "Alpha", "N", "Beta", "P", "Beam", "H", "Solved",
];

fn config_cells(outcomes: &[RunOutcome], total: usize, bucketing: &Bucketing) -> SummaryRow {
    let config = &outcomes
        .first()
        .expect("summary rows need at least one outcome")
        .config;
    let solved = outcomes.iter().filter(|o| o.solved).count();
    let mut cells = vec![
        config.algo.name().to_string(),
        config.level.to_string(),
        format!("{}", config.alpha),
        config.n.clone(),
        if config.beta { "on" } else { "off" }.to_string(),
        config.p.to_string(),
        config.beam.to_string(),
        config.h.to_string(),
        format!("{solved}/{total}"),
    ];
    for &edge in &bucketing.edges {
        let count = outcomes
            .iter()
            .filter_map(|o| bucketing.solve_metric(o))
            .filter(|&m| m <= edge)
            .count();
        cells.push(count.to_string());
    }
    SummaryRow { cells }
}

fn header(bucketing: &Bucketing) -> Vec<String> {
    let mut cols: Vec<String> = BASE_COLUMNS.iter().map(|c| c.to_string()).collect();
    cols.extend(bucketing.edges.iter().map(|&e| bucketing.label(e)));
    cols
}

/// Renders the solved-count summary as an aligned plain-text table. Each
/// group in `cells` is every outcome of one configuration.
pub fn summary_text(cells: &[Vec<RunOutcome>], total: usize, bucketing: &Bucketing) -> String {
    let header = header(bucketing);
    let rows: Vec<SummaryRow> = cells
        .iter()
        .filter(|c| !c.is_empty())
        .map(|c| config_cells(c, total, bucketing))
        .collect();
    let mut widths: Vec<usize> = header.iter().map(String::len).collect();
    for row in &rows {
        for (w, cell) in widths.iter_mut().zip(&row.cells) {
            *w = (*w).max(cell.len());
        }
    }
    let mut out = String::new();
    let write_row = |out: &mut String, cells: &[String]| {
        for (i, (cell, w)) in cells.iter().zip(&widths).enumerate() {
            if i > 0 {
                out.push_str("  ");
            }
            let _ = write!(out, "{cell:>width$}", width = *w);
        }
        out.push('\n');
    };
    write_row(&mut out, &header);
    let rule: usize = widths.iter().sum::<usize>() + 2 * (widths.len() - 1);
    out.push_str(&"-".repeat(rule));
    out.push('\n');
    for row in &rows {
        write_row(&mut out, &row.cells);
    }
    out
}

/// The same summary as CSV.
pub fn summary_csv(cells: &[Vec<RunOutcome>], total: usize, bucketing: &Bucketing) -> String {
    let mut out = header(bucketing).join(",");
    out.push('\n');
    for group in cells.iter().filter(|c| !c.is_empty()) {
        out.push_str(&config_cells(group, total, bucketing).cells.join(","));
        out.push('\n');
    }
    out
}

/// One human-readable line for a finished run.
pub fn solve_line(outcome: &RunOutcome) -> String {
    let status = if outcome.solved { "solved" } else { "unsolved" };
    let score = outcome
        .best_score
        .map(|s| format!("{s:.4}"))
        .unwrap_or_else(|| "-".to_string());
    let mut line = format!(
        "{id}: {status}  score {score}  time {wall:.2}s  playouts {playouts}  oracle calls {oracle} (cache hit rate {rate:.0}%)",
        id = outcome.id,
        wall = outcome.wall_s,
        playouts = outcome.playouts,
        oracle = outcome.oracle_calls,
        rate = outcome.cache_hit_rate * 100.0,
    );
    if let Some(w) = outcome.winner {
        let _ = write!(line, "  winner instance {w}");
    }
    if let Some(seq) = &outcome.best_sequence {
        let _ = write!(line, "\n  {seq}");
    }
    line
}
