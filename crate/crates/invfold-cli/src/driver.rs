//! Runs one puzzle under one configuration: algorithm dispatch, wall-clock
//! deadlines with re-invocation, leaf-parallel playout batches, and
//! root-parallel instance racing with first-success cancellation.

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use invfold_core::structure::StructureError;
use invfold_core::{
    derive_seed, BatchExecutor, BiasTables, CacheStats, EnergyModel, EvalContext, MoveCodeScheme,
    NmcsSearch, PlayoutResult, ScoreCache, ScoreTable, SearchConfig, Searcher, SequentialExecutor,
    SlotOrder, StopSignal, TargetStructure, TraceSink, UctSearch, ZobristTable,
};
use serde::Serialize;

use crate::parallel::{PoolExecutor, StopWhen};
use crate::puzzles::Puzzle;

/// Which search algorithm to run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Algo {
    /// Nested rollout policy adaptation with the heuristic bias (β) in the
    /// playout softmax; covers the stabilized/beam/diversity/restart
    /// variants via the config flags.
    Gnrpa,
    /// Plain NRPA: the same engine with the bias disabled.
    Nrpa,
    /// Nested Monte Carlo search (level 0 = one biased rollout).
    Nmcs,
    /// Monte Carlo tree search with UCB move selection.
    Uct,
}

impl Algo {
    /// Lowercase name, as accepted on the command line.
    pub fn name(self) -> &'static str {
        match self {
            Algo::Gnrpa => "gnrpa",
            Algo::Nrpa => "nrpa",
            Algo::Nmcs => "nmcs",
            Algo::Uct => "uct",
        }
    }
}

/// Everything needed to run a puzzle: the algorithm, its search
/// configuration, and the execution envelope.
#[derive(Clone, Debug)]
pub struct RunSpec {
    /// Algorithm to dispatch.
    pub algo: Algo,
    /// Level, iterations, α, P, B, diversity, start, restart.
    pub config: SearchConfig,
    /// Move-code history window (0, 1, or 2 previous moves).
    pub history: u8,
    /// Slot fill order.
    pub order: SlotOrder,
    /// Heuristic bias tables; `None` searches unbiased.
    pub bias: Option<BiasTables>,
    /// UCT exploration constant.
    pub exploration: f64,
    /// Base RNG seed.
    pub seed: u64,
    /// Leaf-parallel worker threads for the B×P batch.
    pub workers: usize,
    /// Independent racing instances (root parallelism).
    pub instances: usize,
    /// Wall-clock budget; also enables re-invocation until solved.
    pub time_limit: Option<Duration>,
}

impl Default for RunSpec {
    fn default() -> Self {
        RunSpec {
            algo: Algo::Gnrpa,
            config: SearchConfig::default(),
            history: 0,
            order: SlotOrder::PairedFirst,
            bias: Some(BiasTables::standard()),
            exploration: 0.4,
            seed: 0,
            workers: 1,
            instances: 1,
            time_limit: None,
        }
    }
}

/// A rejected specification (contradictory or out-of-range flags).
#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum SpecError {
    /// `--algo nrpa` with the bias enabled.
    #[error("nrpa is the unbiased variant; use --beta off (or --algo gnrpa)")]
    NrpaWithBias,
    /// A policy-search flag passed to a baseline algorithm.
    #[error("--{flag} only applies to gnrpa/nrpa")]
    BaselineWithPolicyFlag {
        /// The offending flag.
        flag: &'static str,
    },
    /// Both parallel modes at once.
    #[error("--workers and --instances cannot both exceed 1")]
    RootAndLeafParallel,
    /// Zero instances or workers.
    #[error("--workers and --instances must be at least 1")]
    ZeroParallelism,
    /// Negative or non-finite exploration constant.
    #[error("--exploration must be finite and non-negative")]
    BadExploration,
    /// Invalid numeric search-config field.
    #[error("{0}")]
    Config(&'static str),
}

impl RunSpec {
    /// Rejects contradictory or out-of-range combinations.
    pub fn validate(&self) -> Result<(), SpecError> {
        self.config.validate().map_err(SpecError::Config)?;
        if self.workers == 0 || self.instances == 0 {
            return Err(SpecError::ZeroParallelism);
        }
        if self.workers > 1 && self.instances > 1 {
            return Err(SpecError::RootAndLeafParallel);
        }
        if self.algo == Algo::Nrpa && self.bias.is_some() {
            return Err(SpecError::NrpaWithBias);
        }
        if matches!(self.algo, Algo::Nmcs | Algo::Uct) {
            let flag = if self.config.beam > 1 {
                Some("beam")
            } else if self.config.stabilized > 1 {
                Some("p")
            } else if self.config.diversity {
                Some("diversity")
            } else if self.config.restart_divisor.is_some() {
                Some("restart")
            } else if self.config.start_learning.at_level(1) > 0 {
                Some("start")
            } else {
                None
            };
            if let Some(flag) = flag {
                return Err(SpecError::BaselineWithPolicyFlag { flag });
            }
        }
        if !self.exploration.is_finite() || self.exploration < 0.0 {
            return Err(SpecError::BadExploration);
        }
        if self.history > 2 {
            return Err(SpecError::Config("--h must be 0, 1, or 2"));
        }
        Ok(())
    }
}

/// Running a puzzle failed before any search started.
#[derive(Debug, thiserror::Error)]
pub enum RunError {
    /// The target or constraint did not parse.
    #[error("{0}")]
    BadTarget(#[from] StructureError),
    /// The run configuration was contradictory.
    #[error("{0}")]
    BadSpec(#[from] SpecError),
}

/// The configuration a run executed with, echoed into every record so a
/// run is reproducible from its JSON line alone.
#[derive(Clone, Debug, Serialize)]
pub struct ConfigEcho {
    /// Algorithm name.
    pub algo: Algo,
    /// Target structure (dot-bracket).
    pub target: String,
    /// Sequence constraint, if any.
    pub constraint: Option<String>,
    /// Search level.
    pub level: u8,
    /// Iterations per level, dotted notation.
    pub n: String,
    /// Adaptation step size.
    pub alpha: f64,
    /// Whether the heuristic bias was on.
    pub beta: bool,
    /// Stabilized playouts per iteration.
    pub p: u32,
    /// Beam width.
    pub beam: u32,
    /// Diversity pruning.
    pub diversity: bool,
    /// First adapting iteration, dotted notation.
    pub start: String,
    /// Restart stagnation divisor.
    pub restart: Option<u32>,
    /// Move-code history window.
    pub h: u8,
    /// Slot fill order (`string` or `nemo`).
    pub order: &'static str,
    /// UCT exploration constant (UCT runs only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exploration: Option<f64>,
    /// Base RNG seed.
    pub seed: u64,
    /// Leaf-parallel workers.
    pub workers: usize,
    /// Root-parallel instances.
    pub instances: usize,
    /// Wall-clock budget in seconds.
    pub time_limit_s: Option<f64>,
}

/// The result of running one puzzle under one spec.
#[derive(Clone, Debug, Serialize)]
pub struct RunOutcome {
    /// Puzzle id.
    pub id: String,
    /// Whether a sequence folding exactly to the target was found.
    pub solved: bool,
    /// Best score reached (1.0 iff solved); `None` if no playout finished.
    pub best_score: Option<f64>,
    /// Best sequence found.
    pub best_sequence: Option<String>,
    /// Total wall time in seconds.
    pub wall_s: f64,
    /// Wall time at which the solution was found.
    pub solve_s: Option<f64>,
    /// Playouts started.
    pub playouts: u64,
    /// Oracle evaluations (score-cache misses).
    pub oracle_calls: u64,
    /// Score-cache hits.
    pub cache_hits: u64,
    /// hits / (hits + misses), 0 when nothing was looked up.
    pub cache_hit_rate: f64,
    /// Index of the winning instance (root-parallel runs only).
    pub winner: Option<usize>,
    /// Full configuration echo.
    pub config: ConfigEcho,
}

fn echo(puzzle: &Puzzle, spec: &RunSpec) -> ConfigEcho {
    ConfigEcho {
        algo: spec.algo,
        target: puzzle.dotbracket.clone(),
        constraint: puzzle.constraint.clone(),
        level: spec.config.level,
        n: spec.config.iterations.to_string(),
        alpha: spec.config.alpha,
        beta: spec.bias.is_some(),
        p: spec.config.stabilized,
        beam: spec.config.beam,
        diversity: spec.config.diversity,
        start: spec.config.start_learning.to_string(),
        restart: spec.config.restart_divisor,
        h: spec.history,
        order: match spec.order {
            SlotOrder::StringOrder => "string",
            SlotOrder::PairedFirst => "nemo",
        },
        exploration: (spec.algo == Algo::Uct).then_some(spec.exploration),
        seed: spec.seed,
        workers: spec.workers,
        instances: spec.instances,
        time_limit_s: spec.time_limit.map(|d| d.as_secs_f64()),
    }
}

/// What one instance (the whole run, or one racer) produced.
struct InstanceResult {
    best: Option<PlayoutResult>,
    playouts: u64,
    stats: CacheStats,
    solve_elapsed: Option<Duration>,
}

/// Runs searches until solved, stopped, or — absent a time limit — one
/// pass completes. Re-invocation restarts from a fresh policy while
/// keeping the ticket counter (and so the RNG stream) moving forward.
fn run_instance(
    target: &TargetStructure,
    spec: &RunSpec,
    stop: &StopWhen,
    seed: u64,
    started: Instant,
    trace: Option<&dyn TraceSink>,
) -> InstanceResult {
    let oracle = EnergyModel::default();
    let cache = ScoreCache::new();
    let ctx = EvalContext {
        target,
        bias: spec.bias.as_ref(),
        scheme: MoveCodeScheme::new(spec.history),
        oracle: &oracle,
        cache: &cache,
        zobrist: ZobristTable::default(),
        seed,
    };
    let sequential = SequentialExecutor;
    let pool;
    let executor: &dyn BatchExecutor = if spec.workers > 1 {
        pool = PoolExecutor::new(spec.workers);
        &pool
    } else {
        &sequential
    };

    let mut best: Option<PlayoutResult> = None;
    let mut solve_elapsed = None;
    let playouts;

    macro_rules! drive {
        ($step:expr) => {
            loop {
                let result: Option<PlayoutResult> = $step;
                let stopped = result.is_none();
                if let Some(r) = result {
                    if best.as_ref().is_none_or(|b| r.score() > b.score()) {
                        best = Some(r);
                    }
                }
                if let Some(b) = &best {
                    if b.solved() {
                        solve_elapsed = Some(started.elapsed());
                        break;
                    }
                }
                if stopped || spec.time_limit.is_none() || stop.should_stop() {
                    break;
                }
            }
        };
    }

    match spec.algo {
        Algo::Gnrpa | Algo::Nrpa => {
            let mut searcher = Searcher::new(&ctx, &spec.config, executor, stop);
            if let Some(sink) = trace {
                searcher = searcher.with_trace(sink);
            }
            drive!(searcher.run());
            playouts = searcher.playouts();
        }
        Algo::Nmcs => {
            let mut searcher = NmcsSearch::new(&ctx, stop);
            drive!(searcher.run(spec.config.level));
            playouts = searcher.playouts();
        }
        Algo::Uct => {
            let budget = u64::from(spec.config.iterations.at_level(spec.config.level));
            let mut searcher = UctSearch::new(&ctx, spec.exploration, stop);
            drive!(searcher.run(budget));
            playouts = searcher.playouts();
        }
    }

    InstanceResult {
        best,
        playouts,
        stats: cache.stats(),
        solve_elapsed,
    }
}

/// Races `spec.instances` independent searches, each with its own derived
/// seed and private score cache; the first solution cancels the rest.
fn run_race(target: &TargetStructure, spec: &RunSpec, started: Instant) -> (InstanceResult, Option<usize>) {
    let cancel = Arc::new(AtomicBool::new(false));
    let deadline = spec.time_limit.map(|d| started + d);
    let winner: Mutex<Option<(usize, Duration)>> = Mutex::new(None);

    let mut results: Vec<Option<InstanceResult>> = Vec::new();
    results.resize_with(spec.instances, || None);

    thread::scope(|scope| {
        let mut handles = Vec::with_capacity(spec.instances);
        for instance in 0..spec.instances {
            let stop = StopWhen {
                deadline,
                cancel: Some(cancel.clone()),
            };
            let winner = &winner;
            let cancel = &cancel;
            handles.push(scope.spawn(move || {
                let result = run_instance(
                    target,
                    spec,
                    &stop,
                    derive_seed(spec.seed, instance as u64),
                    started,
                    None,
                );
                if let Some(elapsed) = result.solve_elapsed {
                    let mut slot = winner.lock().expect("winner mutex never poisoned");
                    if slot.is_none() {
                        *slot = Some((instance, elapsed));
                    }
                    drop(slot);
                    cancel.store(true, Ordering::Relaxed);
                }
                result
            }));
        }
        for (instance, handle) in handles.into_iter().enumerate() {
            results[instance] = Some(handle.join().expect("instance threads do not panic"));
        }
    });

    let winner = *winner.lock().expect("winner mutex never poisoned");
    let mut merged = InstanceResult {
        best: None,
        playouts: 0,
        stats: CacheStats::default(),
        solve_elapsed: winner.map(|(_, at)| at),
    };
    for result in results.into_iter().flatten() {
        merged.playouts += result.playouts;
        merged.stats.hits += result.stats.hits;
        merged.stats.misses += result.stats.misses;
        merged.stats.collisions += result.stats.collisions;
        if let Some(b) = result.best {
            // the winner's solution wins outright; otherwise keep the best
            // score, earliest instance first (iteration order does that)
            if merged.best.as_ref().is_none_or(|m| b.score() > m.score()) {
                merged.best = Some(b);
            }
        }
    }
    if let Some((index, _)) = winner {
        (merged, Some(index))
    } else {
        (merged, None)
    }
}

/// Runs `puzzle` under `spec` and reports the outcome. `trace` (used only
/// by single-instance policy searches) receives per-iteration events.
pub fn run_one(
    puzzle: &Puzzle,
    spec: &RunSpec,
    trace: Option<&dyn TraceSink>,
) -> Result<RunOutcome, RunError> {
    spec.validate()?;
    let target = puzzle.target(spec.order)?;
    let started = Instant::now();

    let (result, winner) = if spec.instances > 1 {
        run_race(&target, spec, started)
    } else {
        let stop = StopWhen {
            deadline: spec.time_limit.map(|d| started + d),
            cancel: None,
        };
        (
            run_instance(&target, spec, &stop, spec.seed, started, trace),
            None,
        )
    };

    let wall_s = started.elapsed().as_secs_f64();
    let solved = result.best.as_ref().is_some_and(|b| b.solved());
    let lookups = result.stats.hits + result.stats.misses;
    debug_assert!(!solved || result.best.as_ref().is_some_and(|b| b.score() == 1.0));

    Ok(RunOutcome {
        id: puzzle.id.clone(),
        solved,
        best_score: result.best.as_ref().map(PlayoutResult::score),
        best_sequence: result
            .best
            .as_ref()
            .map(|b| invfold_core::structure::render_sequence(&b.sequence)),
        wall_s,
        solve_s: result.solve_elapsed.map(|d| d.as_secs_f64()),
        playouts: result.playouts,
        oracle_calls: result.stats.misses,
        cache_hits: result.stats.hits,
        cache_hit_rate: if lookups == 0 {
            0.0
        } else {
            result.stats.hits as f64 / lookups as f64
        },
        winner,
        config: echo(puzzle, spec),
    })
}
