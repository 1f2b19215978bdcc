//! Command-line front end and benchmark harness for the inverse-folding
//! solver in `invfold-core`.
//!
//! * [`puzzles`] — tab-separated puzzle files and the bundled toy suite.
//! * [`driver`] — one puzzle × one configuration: algorithm dispatch,
//!   deadlines, leaf-parallel batches, root-parallel racing.
//! * [`parallel`] — the rayon batch executor and composite stop signals.
//! * [`harness`] — configuration grids and suite sweeps.
//! * [`report`] — JSONL records and solved-count summary tables.

#![forbid(unsafe_code)]
#![warn(missing_docs)]

pub mod driver;
pub mod harness;
pub mod parallel;
pub mod puzzles;
pub mod report;
