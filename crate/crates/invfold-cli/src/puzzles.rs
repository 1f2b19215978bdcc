//! Puzzle files: tab-separated `id<TAB>structure[<TAB>constraint]` lines,
//! `#` comments, blank lines ignored. Every structure is validated at load
//! time so downstream code never sees an unparseable target.

use std::fmt;

use invfold_core::structure::StructureError;
use invfold_core::{SlotOrder, TargetStructure};

/// One inverse-folding problem: a target structure and an optional
/// sequence constraint.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Puzzle {
    /// Identifier used in reports.
    pub id: String,
    /// Target structure in dot-bracket notation.
    pub dotbracket: String,
    /// Optional constraint: `A`/`U`/`G`/`C` lock a position, `.`/`N` leave
    /// it free.
    pub constraint: Option<String>,
}

impl Puzzle {
    /// Parses the puzzle's target with the given slot order.
    pub fn target(&self, order: SlotOrder) -> Result<TargetStructure, StructureError> {
        TargetStructure::parse_with(&self.dotbracket, self.constraint.as_deref(), order)
    }
}

/// A puzzle file rejected at `line` (1-based).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PuzzleFileError {
    /// 1-based line number of the offending line.
    pub line: usize,
    /// What was wrong with it.
    pub kind: PuzzleFileErrorKind,
}

/// The ways a puzzle line can be rejected.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PuzzleFileErrorKind {
    /// Fewer than two tab-separated fields.
    MissingField,
    /// More than three tab-separated fields.
    TooManyFields,
    /// Empty id field.
    EmptyId,
    /// The same id appeared earlier in the file.
    DuplicateId(String),
    /// The structure (or constraint) did not parse.
    BadTarget(StructureError),
}

impl fmt::Display for PuzzleFileError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: ", self.line)?;
        match &self.kind {
            PuzzleFileErrorKind::MissingField => {
                write!(f, "expected `id<TAB>structure[<TAB>constraint]`")
            }
            PuzzleFileErrorKind::TooManyFields => {
                write!(f, "too many fields (expected at most 3)")
            }
            PuzzleFileErrorKind::EmptyId => write!(f, "empty puzzle id"),
            PuzzleFileErrorKind::DuplicateId(id) => write!(f, "duplicate puzzle id `{id}`"),
            PuzzleFileErrorKind::BadTarget(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for PuzzleFileError {}

/// Parses a puzzle file. Errors carry the 1-based line number.
pub fn parse_puzzle_file(text: &str) -> Result<Vec<Puzzle>, PuzzleFileError> {
    let mut puzzles: Vec<Puzzle> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = match raw.split_once('#') {
            Some((before, _)) => before,
            None => raw,
        };
        if content.trim().is_empty() {
            continue;
        }
        let err = |kind| PuzzleFileError { line, kind };
        let fields: Vec<&str> = content.trim_end().split('\t').collect();
        if fields.len() < 2 {
            return Err(err(PuzzleFileErrorKind::MissingField));
        }
        if fields.len() > 3 {
            return Err(err(PuzzleFileErrorKind::TooManyFields));
        }
        let id = fields[0].trim();
        if id.is_empty() {
            return Err(err(PuzzleFileErrorKind::EmptyId));
        }
        if puzzles.iter().any(|p| p.id == id) {
            return Err(err(PuzzleFileErrorKind::DuplicateId(id.to_string())));
        }
        let dotbracket = fields[1].trim().to_string();
        let constraint = fields
            .get(2)
            .map(|c| c.trim().to_string())
            .filter(|c| !c.is_empty());
        // validate now so the error names the line
        TargetStructure::parse_with(&dotbracket, constraint.as_deref(), SlotOrder::StringOrder)
            .map_err(|e| err(PuzzleFileErrorKind::BadTarget(e)))?;
        puzzles.push(Puzzle {
            id: id.to_string(),
            dotbracket,
            constraint,
        });
    }
    Ok(puzzles)
}

/// The bundled 20-puzzle toy suite: hairpins, stems, bulges, internal
/// loops, and junctions, lengths 6–40, all solvable under the built-in
/// energy model.
pub fn toy_suite() -> Vec<Puzzle> {
    parse_puzzle_file(include_str!("../puzzles/toy20.tsv"))
        .expect("bundled toy suite always parses")
}
