//! `invfold` — inverse RNA folding from the command line.
//!
//! Subcommands: `solve` (one target or a puzzle file), `suite` (parameter
//! grid over a puzzle set), `fold` (debug access to the folding oracle),
//! and `contexts` (dump the structural classification of a target).
//!
//! Exit codes: 0 on success (an unsolved puzzle is still success), 2 on
//! invalid input (bad flags, unparseable targets or files), 1 on runtime
//! I/O failures.

#![forbid(unsafe_code)]

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use invfold_core::structure::{parse_sequence, SlotKind};
use invfold_core::{
    BiasTables, EnergyModel, FoldOracle, LevelValues, SlotOrder, TargetStructure, TraceEvent,
    TraceSink,
};
use invfold_cli::driver::{run_one, Algo, RunSpec};
use invfold_cli::harness::{self, GridCell};
use invfold_cli::puzzles::{parse_puzzle_file, toy_suite, Puzzle};
use invfold_cli::report::{self, BucketBy, Bucketing};

#[derive(Parser)]
#[command(
    name = "invfold",
    version,
    about = "Inverse RNA folding by nested Monte Carlo search"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one target (or every puzzle in a file).
    Solve(SolveArgs),
    /// Run a configuration grid over a puzzle set and print summary tables.
    Suite(SuiteArgs),
    /// Fold a sequence with the built-in oracle.
    Fold(FoldArgs),
    /// Show how a target's positions are classified (loop kinds, junction
    /// roles, mismatch partners, heuristic distributions).
    Contexts(ContextsArgs),
}

/// Flags shared by `solve` and `suite`; they mirror the search
/// configuration one to one.
#[derive(Args, Clone)]
struct SearchFlags {
    /// Algorithm: gnrpa, nrpa (unbiased), nmcs, or uct.
    #[arg(long, value_enum, default_value_t = Algo::Gnrpa)]
    algo: Algo,

    /// Nesting level (0 = a single playout; nmcs level 0 = one rollout).
    #[arg(long, default_value_t = 1)]
    level: u8,

    /// Iterations per level, dotted per-level notation (`100` or `100.50`).
    #[arg(long, default_value = "100")]
    n: String,

    /// Adaptation step size α.
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,

    /// Heuristic bias in the playout softmax: on or off.
    #[arg(long, default_value = "on", value_parser = parse_on_off)]
    beta: bool,

    /// Stabilized playouts per level-1 iteration (P).
    #[arg(long, default_value_t = 1)]
    p: u32,

    /// Level-1 beam width (B).
    #[arg(long, default_value_t = 1)]
    beam: u32,

    /// Keep only distinct best scores in the beam.
    #[arg(long)]
    diversity: bool,

    /// First iteration allowed to adapt, dotted per-level notation.
    #[arg(long, default_value = "0")]
    start: String,

    /// Restart on stagnation after (slot count / DIVISOR) iterations
    /// without improvement, instead of fixed iteration counts.
    #[arg(long, value_name = "DIVISOR")]
    restart: Option<u32>,

    /// Move-code history window: 0, 1, or 2 previous moves.
    #[arg(long, default_value_t = 0)]
    h: u8,

    /// Slot fill order: `nemo` (pairs first) or `string` (left to right).
    #[arg(long, default_value = "nemo", value_parser = parse_order)]
    order: SlotOrder,

    /// Replace the built-in bias tables with ones from a config file.
    #[arg(long, value_name = "PATH")]
    bias_file: Option<PathBuf>,

    /// UCT exploration constant.
    #[arg(long, default_value_t = 0.4)]
    exploration: f64,

    /// Base RNG seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Leaf-parallel worker threads for the B×P playout batch.
    #[arg(long, default_value_t = 1)]
    workers: usize,

    /// Independent racing searches; the first solution cancels the rest.
    #[arg(long, default_value_t = 1)]
    instances: usize,

    /// Wall-clock budget in seconds (re-invokes the search until solved).
    #[arg(long, value_name = "SECONDS")]
    time_limit: Option<f64>,
}

#[derive(Args)]
struct SolveArgs {
    /// Target structure in dot-bracket notation.
    #[arg(value_name = "TARGET", required_unless_present = "puzzles")]
    target: Option<String>,

    /// Sequence constraint (A/U/G/C lock, `.`/`N` free).
    #[arg(long, conflicts_with = "puzzles")]
    constraint: Option<String>,

    /// Solve every puzzle in this file instead of a single target.
    #[arg(long, value_name = "PATH", conflicts_with = "target")]
    puzzles: Option<PathBuf>,

    /// Solve only this puzzle id from the file.
    #[arg(long, requires = "puzzles")]
    id: Option<String>,

    /// Append one JSONL record per run to this file.
    #[arg(long, value_name = "PATH")]
    json: Option<PathBuf>,

    /// Print per-iteration progress to stderr.
    #[arg(long)]
    verbose: bool,

    #[command(flatten)]
    search: SearchFlags,
}

#[derive(Args)]
struct SuiteArgs {
    /// Puzzle file; defaults to the bundled 20-puzzle toy suite.
    #[arg(long, value_name = "PATH")]
    puzzles: Option<PathBuf>,

    /// Config grid file (one `key=value ...` cell per line); defaults to a
    /// single cell built from the search flags.
    #[arg(long, value_name = "PATH")]
    grid: Option<PathBuf>,

    /// Write one JSONL record per run to this file.
    #[arg(long, value_name = "PATH")]
    json: Option<PathBuf>,

    /// Write the summary as CSV to this file.
    #[arg(long, value_name = "PATH")]
    csv: Option<PathBuf>,

    /// Bucket cumulative solve counts by wall time or playouts.
    #[arg(long, value_enum, default_value_t = BucketBy::Time)]
    bucket_by: BucketBy,

    #[command(flatten)]
    search: SearchFlags,
}

#[derive(Args)]
struct FoldArgs {
    /// Nucleotide sequence (A/U/G/C, case-insensitive).
    sequence: String,

    /// Compare the fold against this target structure.
    #[arg(long)]
    target: Option<String>,
}

#[derive(Args)]
struct ContextsArgs {
    /// Target structure in dot-bracket notation.
    target: String,

    /// Sequence constraint (A/U/G/C lock, `.`/`N` free).
    #[arg(long)]
    constraint: Option<String>,

    /// Slot fill order: `nemo` (pairs first) or `string` (left to right).
    #[arg(long, default_value = "nemo", value_parser = parse_order)]
    order: SlotOrder,
}

fn parse_on_off(value: &str) -> Result<bool, String> {
    match value {
        "on" => Ok(true),
        "off" => Ok(false),
        _ => Err(format!("expected `on` or `off`, got `{value}`")),
    }
}

fn parse_order(value: &str) -> Result<SlotOrder, String> {
    match value {
        "nemo" => Ok(SlotOrder::PairedFirst),
        "string" => Ok(SlotOrder::StringOrder),
        _ => Err(format!("expected `string` or `nemo`, got `{value}`")),
    }
}

/// An input problem: reported on stderr, exits with code 2.
struct InputError(String);

fn input_err<E: std::fmt::Display>(e: E) -> InputError {
    InputError(e.to_string())
}

impl SearchFlags {
    fn to_spec(&self) -> Result<RunSpec, InputError> {
        let iterations: LevelValues = self.n.parse().map_err(input_err)?;
        let start_learning: LevelValues = self.start.parse().map_err(input_err)?;
        let tables = match &self.bias_file {
            None => BiasTables::standard(),
            Some(path) => {
                if !self.beta {
                    return Err(InputError(
                        "--bias-file contradicts --beta off".to_string(),
                    ));
                }
                let text = fs::read_to_string(path)
                    .map_err(|e| InputError(format!("{}: {e}", path.display())))?;
                BiasTables::from_config_str(&text)
                    .map_err(|e| InputError(format!("{}: {e}", path.display())))?
            }
        };
        let time_limit = match self.time_limit {
            None => None,
            Some(secs) if secs.is_finite() && secs >= 0.0 => Some(Duration::from_secs_f64(secs)),
            Some(_) => {
                return Err(InputError(
                    "--time-limit must be non-negative".to_string(),
                ))
            }
        };
        let spec = RunSpec {
            algo: self.algo,
            config: invfold_core::SearchConfig {
                level: self.level,
                iterations,
                alpha: self.alpha,
                stabilized: self.p,
                beam: self.beam,
                diversity: self.diversity,
                start_learning,
                restart_divisor: self.restart,
            },
            history: self.h,
            order: self.order,
            bias: self.beta.then_some(tables),
            exploration: self.exploration,
            seed: self.seed,
            workers: self.workers,
            instances: self.instances,
            time_limit,
        };
        spec.validate().map_err(input_err)?;
        Ok(spec)
    }
}

/// Prints search progress lines to stderr.
struct StderrTrace;

impl TraceSink for StderrTrace {
    fn record(&self, event: TraceEvent) {
        match event {
            TraceEvent::Iteration {
                level,
                iteration,
                best_score,
                playouts,
            } => eprintln!(
                "level {level} iteration {iteration}: best {best_score:.4} ({playouts} playouts)"
            ),
            TraceEvent::Adapted { level, iteration } => {
                eprintln!("level {level} iteration {iteration}: adapted");
            }
        }
    }
}

fn load_puzzles(path: &Path) -> Result<Vec<Puzzle>, InputError> {
    let text =
        fs::read_to_string(path).map_err(|e| InputError(format!("{}: {e}", path.display())))?;
    parse_puzzle_file(&text).map_err(|e| InputError(format!("{}: {e}", path.display())))
}

fn cmd_solve(args: &SolveArgs) -> Result<(), CliError> {
    let spec = args.search.to_spec()?;
    let puzzles: Vec<Puzzle> = match (&args.target, &args.puzzles) {
        (Some(target), None) => {
            // validate now so bad targets exit 2 before any search runs
            TargetStructure::parse_with(target, args.constraint.as_deref(), spec.order)
                .map_err(input_err)?;
            vec![Puzzle {
                id: "target".to_string(),
                dotbracket: target.clone(),
                constraint: args.constraint.clone(),
            }]
        }
        (None, Some(path)) => {
            let mut all = load_puzzles(path)?;
            if let Some(id) = &args.id {
                all.retain(|p| &p.id == id);
                if all.is_empty() {
                    return Err(InputError(format!("no puzzle with id `{id}`")).into());
                }
            }
            all
        }
        _ => unreachable!("clap enforces target xor puzzles"),
    };

    let trace = StderrTrace;
    let mut json = match &args.json {
        Some(path) => Some(
            fs::OpenOptions::new()
                .create(true)
                .append(true)
                .open(path)
                .map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?,
        ),
        None => None,
    };
    for puzzle in &puzzles {
        let sink: Option<&dyn TraceSink> = args.verbose.then_some(&trace as &dyn TraceSink);
        let outcome = run_one(puzzle, &spec, sink).map_err(input_err)?;
        println!("{}", report::solve_line(&outcome));
        if let Some(file) = &mut json {
            file.write_all(report::jsonl_line(&outcome).as_bytes())
                .map_err(|e| CliError::Runtime(e.to_string()))?;
        }
    }
    Ok(())
}

fn cmd_suite(args: &SuiteArgs) -> Result<(), CliError> {
    let spec = args.search.to_spec()?;
    let puzzles = match &args.puzzles {
        Some(path) => load_puzzles(path)?,
        None => toy_suite(),
    };
    let cells: Vec<GridCell> = match &args.grid {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| InputError(format!("{}: {e}", path.display())))?;
            harness::parse_grid(&text)
                .map_err(|e| InputError(format!("{}: {e}", path.display())))?
        }
        None => vec![GridCell {
            line: 0,
            overrides: Vec::new(),
        }],
    };
    // surface bad cells (unknown keys, bad values) as input errors before
    // any search runs
    for cell in &cells {
        harness::apply_cell(&spec, cell).map_err(input_err)?;
    }

    let mut json_file = match &args.json {
        Some(path) => Some(
            fs::File::create(path).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?,
        ),
        None => None,
    };
    let jsonl = json_file.as_mut().map(|f| f as &mut dyn Write);
    let grouped = harness::run_suite(&puzzles, &spec, &cells, jsonl)
        .map_err(|e| CliError::Runtime(e.to_string()))?;

    let bucketing = Bucketing::default_for(args.bucket_by);
    let text = report::summary_text(&grouped, puzzles.len(), &bucketing);
    print!("{text}");
    if let Some(path) = &args.csv {
        fs::write(path, report::summary_csv(&grouped, puzzles.len(), &bucketing))
            .map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;
    }
    Ok(())
}

fn cmd_fold(args: &FoldArgs) -> Result<(), CliError> {
    let seq = parse_sequence(&args.sequence).map_err(input_err)?;
    let oracle = EnergyModel::default();
    match &args.target {
        None => {
            let (structure, energy) = oracle.fold_structure(&seq);
            println!("{structure}");
            println!("mfe energy {energy}");
        }
        Some(target) => {
            let target = TargetStructure::parse(target).map_err(input_err)?;
            if target.len() != seq.len() {
                return Err(InputError(format!(
                    "sequence length {} does not match target length {}",
                    seq.len(),
                    target.len()
                ))
                .into());
            }
            let outcome = oracle.evaluate(&seq, &target);
            let record = invfold_core::score::score_sequence(&seq, &target, &oracle);
            println!("{}", outcome.mfe_structure());
            println!("mfe energy {}", outcome.mfe_energy);
            println!("target energy {}", outcome.target_energy);
            println!("delta-g {}", outcome.delta_g);
            println!("base pair distance {}", record.bpd);
            println!("score {}", record.score);
            println!("solved {}", record.solved);
        }
    }
    Ok(())
}

fn cmd_contexts(args: &ContextsArgs) -> Result<(), CliError> {
    let target =
        TargetStructure::parse_with(&args.target, args.constraint.as_deref(), args.order)
            .map_err(input_err)?;
    let tables = BiasTables::standard();
    let partial = vec![None; target.len()];
    println!("{}", target.dotbracket());
    println!(
        "{} positions, {} pairs, {} slots",
        target.len(),
        target.num_target_pairs(),
        target.slots().len()
    );
    for (i, slot) in target.slots().iter().enumerate() {
        let place = match slot.kind {
            SlotKind::Unpaired { pos } => format!("pos {pos}"),
            SlotKind::Paired { open, close } => format!("pair ({open},{close})"),
        };
        let ctx = &slot.context;
        let mut notes = vec![format!("{:?}", ctx.loop_kind)];
        if let Some(role) = ctx.junction_role {
            notes.push(format!("{role:?}"));
        }
        if let Some(adj) = ctx.adjacent_paired {
            notes.push(format!("mismatch vs {adj}"));
        }
        if let Some(partner) = ctx.mismatch_partner {
            notes.push(format!("faces {partner}"));
        }
        if slot.locked.is_some() {
            notes.push("locked".to_string());
        }
        let dist = tables.playout_distribution(slot, &partial);
        let dist = dist
            .iter()
            .map(|p| format!("{p:.3}"))
            .collect::<Vec<_>>()
            .join(" ");
        println!("slot {i:>3}  {place:<14} {:<32} [{dist}]", notes.join(", "));
    }
    Ok(())
}

enum CliError {
    /// Invalid input: exit 2.
    Input(String),
    /// Runtime failure (I/O): exit 1.
    Runtime(String),
}

impl From<InputError> for CliError {
    fn from(e: InputError) -> Self {
        CliError::Input(e.0)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Solve(args) => cmd_solve(args),
        Command::Suite(args) => cmd_suite(args),
        Command::Fold(args) => cmd_fold(args),
        Command::Contexts(args) => cmd_contexts(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Input(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(message)) => {
            eprintln!("error: {message}");
            ExitCode::FAILURE
        }
    }
}
