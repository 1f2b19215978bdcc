//! The benchmark harness: run a puzzle set across a grid of
//! configurations, stream JSONL records through one serialized writer,
//! and hand the grouped outcomes to the summary renderers.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::sync::Mutex;
use std::time::Duration;

use invfold_core::{BiasTables, LevelValues, SlotOrder};

use crate::driver::{run_one, Algo, RunOutcome, RunSpec};
use crate::puzzles::Puzzle;
use crate::report::jsonl_line;

/// One grid cell: `key=value` overrides applied on top of the base spec.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GridCell {
    /// 1-based line the cell came from.
    pub line: usize,
    /// Raw `key=value` pairs in file order.
    pub overrides: Vec<(String, String)>,
}

/// A grid file rejected at `line`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GridError {
    /// 1-based line number.
    pub line: usize,
    /// What was wrong.
    pub message: String,
}

impl fmt::Display for GridError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

impl std::error::Error for GridError {}

/// Parses a config grid: one cell per line, whitespace-separated
/// `key=value` tokens, `#` comments. An empty file is an empty grid.
pub fn parse_grid(text: &str) -> Result<Vec<GridCell>, GridError> {
    let mut cells = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut overrides = Vec::new();
        for token in content.split_whitespace() {
            let Some((key, value)) = token.split_once('=') else {
                return Err(GridError {
                    line,
                    message: format!("expected key=value, got `{token}`"),
                });
            };
            overrides.push((key.trim().to_string(), value.trim().to_string()));
        }
        cells.push(GridCell { line, overrides });
    }
    Ok(cells)
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, String>
where
    T::Err: fmt::Display,
{
    value
        .parse()
        .map_err(|e| format!("bad value for {key}: {e}"))
}

fn parse_switch(key: &str, value: &str) -> Result<bool, String> {
    match value {
        "on" | "true" | "1" => Ok(true),
        "off" | "false" | "0" => Ok(false),
        _ => Err(format!("bad value for {key}: expected on/off")),
    }
}

/// Applies one cell's overrides to a copy of `base`. Keys mirror the CLI
/// flags: `algo level n alpha beta p beam diversity start restart h order
/// seed exploration time-limit`.
pub fn apply_cell(base: &RunSpec, cell: &GridCell) -> Result<RunSpec, GridError> {
    let mut spec = base.clone();
    let bias_template = base.bias.clone().unwrap_or_else(BiasTables::standard);
    let mut beta_explicit = false;
    let fail = |message: String| GridError {
        line: cell.line,
        message,
    };
    for (key, value) in &cell.overrides {
        let result: Result<(), String> = (|| {
            match key.as_str() {
                "algo" => {
                    spec.algo = match value.as_str() {
                        "gnrpa" => Algo::Gnrpa,
                        "nrpa" => Algo::Nrpa,
                        "nmcs" => Algo::Nmcs,
                        "uct" => Algo::Uct,
                        _ => return Err(format!("unknown algo `{value}`")),
                    };
                }
                "level" => spec.config.level = parse(key, value)?,
                "n" => spec.config.iterations = parse::<LevelValues>(key, value)?,
                "alpha" => spec.config.alpha = parse(key, value)?,
                "beta" => {
                    beta_explicit = true;
                    spec.bias = parse_switch(key, value)?.then(|| bias_template.clone());
                }
                "p" => spec.config.stabilized = parse(key, value)?,
                "beam" => spec.config.beam = parse(key, value)?,
                "diversity" => spec.config.diversity = parse_switch(key, value)?,
                "start" => spec.config.start_learning = parse::<LevelValues>(key, value)?,
                "restart" => {
                    spec.config.restart_divisor = match value.as_str() {
                        "off" | "none" => None,
                        _ => Some(parse(key, value)?),
                    };
                }
                "h" => spec.history = parse(key, value)?,
                "order" => {
                    spec.order = match value.as_str() {
                        "string" => SlotOrder::StringOrder,
                        "nemo" => SlotOrder::PairedFirst,
                        _ => return Err(format!("unknown order `{value}`")),
                    };
                }
                "seed" => spec.seed = parse(key, value)?,
                "exploration" => spec.exploration = parse(key, value)?,
                "time-limit" => {
                    spec.time_limit = match value.as_str() {
                        "off" | "none" => None,
                        _ => {
                            let secs: f64 = parse(key, value)?;
                            if !secs.is_finite() || secs < 0.0 {
                                return Err(format!("bad value for {key}: must be non-negative"));
                            }
                            Some(Duration::from_secs_f64(secs))
                        }
                    };
                }
                _ => return Err(format!("unknown key `{key}`")),
            }
            Ok(())
        })();
        result.map_err(&fail)?;
    }
    // `algo=nrpa` means the unbiased variant; only an explicit beta=on in
    // the same cell should contradict it
    if spec.algo == Algo::Nrpa && !beta_explicit {
        spec.bias = None;
    }
    spec.validate()
        .map_err(|e| fail(format!("invalid configuration: {e}")))?;
    Ok(spec)
}

/// Runs every `(cell × puzzle)` combination. Outcomes stream to `jsonl`
/// (when given) through a single serialized writer as they finish, and
/// come back grouped per cell for the summary renderers.
pub fn run_suite(
    puzzles: &[Puzzle],
    base: &RunSpec,
    cells: &[GridCell],
    jsonl: Option<&mut dyn Write>,
) -> anyhow::Result<Vec<Vec<RunOutcome>>> {
    // one writer, serialized: cells could fan out without changing this
    let writer = jsonl.map(Mutex::new);
    let mut grouped = Vec::with_capacity(cells.len());
    for cell in cells {
        let spec = apply_cell(base, cell)?;
        let mut outcomes = Vec::with_capacity(puzzles.len());
        for puzzle in puzzles {
            let outcome = run_one(puzzle, &spec, None)?;
            if let Some(w) = &writer {
                let mut w = w.lock().expect("jsonl writer mutex never poisoned");
                w.write_all(jsonl_line(&outcome).as_bytes())?;
            }
            outcomes.push(outcome);
        }
        grouped.push(outcomes);
    }
    if let Some(w) = &writer {
        w.lock()
            .expect("jsonl writer mutex never poisoned")
            .flush()?;
    }
    Ok(grouped)
}
