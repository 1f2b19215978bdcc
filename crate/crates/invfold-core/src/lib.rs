//! Inverse RNA folding by nested Monte Carlo search.
//!
//! Given a target secondary structure in dot-bracket notation, the crate
//! searches for a nucleotide sequence whose minimum-energy fold (under a
//! built-in, deliberately simple pair-energy model) matches the target.
//! Sequences are built one decision at a time — one move per unpaired
//! position, one move per base pair — and a learned softmax policy over
//! coded moves drives the sampling.
//!
//! The pieces, bottom to top:
//!
//! * [`structure`] — dot-bracket parsing, move slots, and the structural
//!   context (loop type, junction orientation, mismatch partners) attached
//!   to every slot.
//! * [`fold`] — the folding oracle: a Nussinov-style dynamic program that
//!   minimizes summed pair energies, plus energy evaluation of a fixed
//!   structure.
//! * [`score`] — the scoring kernel mapping a folded candidate to a scalar
//!   in need-of-improvement order, Zobrist hashing of assignments, and a
//!   shared score cache.
//! * [`bias`] — NEMO-style heuristic weight tables and the β terms they
//!   contribute to playout logits.
//! * [`policy`] — move coding and the weight table the search adapts.
//! * [`search`] — playouts, policy adaptation, and the nested search family
//!   (NRPA and its generalized, stabilized, beam, and restarting variants).
//! * [`baselines`] — NMCS and UCT over the same playout machinery, for
//!   comparison runs.
//!
//! The crate is `no_std`-compatible (with `alloc`); enable the `libm`
//! feature instead of `std` to supply float transcendentals. Everything
//! here is deterministic given a seed: playouts draw from counter-derived
//! RNG streams, so results are independent of execution interleaving.

#![cfg_attr(not(feature = "std"), no_std)]
#![forbid(unsafe_code)]
#![warn(missing_docs)]

extern crate alloc;

#[cfg(all(not(feature = "std"), not(feature = "libm")))]
compile_error!("invfold-core needs either the `std` or the `libm` feature for f64 math");

pub mod baselines;
pub mod bias;
pub mod fold;
mod math;
pub mod policy;
pub mod score;
pub mod search;
pub mod structure;

pub use baselines::{NmcsSearch, UctNode, UctSearch};
pub use bias::BiasTables;
pub use fold::{EnergyModel, FoldOracle, FoldOutcome};
pub use policy::{MoveCode, MoveCodeScheme, PlayoutResult, Policy};
pub use score::{CacheStats, NoCache, ScoreRecord, ScoreTable, ZobristTable};
#[cfg(feature = "std")]
pub use score::ScoreCache;
pub use search::{
    adapt, derive_seed, playout, rng_for_ticket, step_probabilities, BatchExecutor, EvalContext,
    LevelValues, NeverStop, PlayoutJob, SearchConfig, Searcher, SequentialExecutor, StopSignal,
    TraceEvent, TraceSink,
};
pub use structure::{Base, SlotOrder, TargetStructure};
