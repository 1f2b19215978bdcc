//! Move codes and the weight table the search adapts.
//!
//! Every decision is flattened to an integer code so policies can be plain
//! maps. A move's code combines its slot anchor (string position), its
//! move number, and optionally the numbers of the last one or two moves
//! played before it:
//!
//! ```text
//! code = index + M·number (+ M·6·prev + M·6·6·prev²)
//! ```
//!
//! with stride `M = 2000` and number span 6 (pair slots have six moves,
//! unpaired slots use the low four). Codes are injective for targets
//! shorter than `M`. History depth 1 or 2 makes the learned weights
//! context-sensitive at the price of a larger effective state space; the
//! convention for the first slots is that missing predecessors read as
//! number 0, which cannot collide because the walk order is fixed.

use alloc::vec::Vec;

use crate::score::ScoreRecord;
use crate::structure::Base;

/// A coded move: see the module docs for the layout.
pub type MoveCode = u32;

/// The index stride `M`: anchors must stay below this.
pub const INDEX_STRIDE: u32 = 2000;

const NUMBER_SPAN: u32 = 6;

/// How moves are flattened into codes: fixed stride, configurable history
/// depth.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MoveCodeScheme {
    history: u8,
}

impl Default for MoveCodeScheme {
    fn default() -> Self {
        MoveCodeScheme::new(0)
    }
}

impl MoveCodeScheme {
    /// A scheme conditioning on the last `history` move numbers.
    ///
    /// # Panics
    /// When `history > 2`.
    pub fn new(history: u8) -> Self {
        assert!(history <= 2, "history depth must be 0, 1, or 2");
        MoveCodeScheme { history }
    }

    /// The configured history depth.
    pub fn history(&self) -> u8 {
        self.history
    }

    /// The code for playing `number` at the slot anchored at `index`,
    /// given the numbers played just before.
    ///
    /// # Panics
    /// When `index >= M`: such codes would collide with other slots, so
    /// targets at least `M` long are rejected rather than silently
    /// aliased.
    pub fn code(&self, index: usize, number: u8, history: &MoveHistory) -> MoveCode {
        assert!(
            (index as u32) < INDEX_STRIDE,
            "slot index {index} exceeds the code stride"
        );
        let mut code = index as u32 + INDEX_STRIDE * number as u32;
        if self.history >= 1 {
            code += INDEX_STRIDE * NUMBER_SPAN * history.prev(0) as u32;
        }
        if self.history >= 2 {
            code += INDEX_STRIDE * NUMBER_SPAN * NUMBER_SPAN * history.prev(1) as u32;
        }
        code
    }

    /// The move number encoded in `code`, at any history depth.
    pub fn number_of(code: MoveCode) -> u8 {
        ((code / INDEX_STRIDE) % NUMBER_SPAN) as u8
    }

    /// The slot anchor encoded in `code`.
    pub fn index_of(code: MoveCode) -> usize {
        (code % INDEX_STRIDE) as usize
    }

    /// The history-free code for `(index, number)` — what an `H = 0`
    /// scheme would produce. State hashing uses these so that a cache can
    /// be shared across policies with different history depths.
    pub fn base_code(index: usize, number: u8) -> MoveCode {
        assert!(
            (index as u32) < INDEX_STRIDE,
            "slot index {index} exceeds the code stride"
        );
        index as u32 + INDEX_STRIDE * number as u32
    }
}

/// The last two move numbers, oldest shifted out first.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct MoveHistory {
    prev: [u8; 2],
}

impl MoveHistory {
    /// A window with no moves played yet (reads as number 0).
    pub fn new() -> Self {
        MoveHistory::default()
    }

    /// Records a played move number.
    pub fn push(&mut self, number: u8) {
        self.prev[1] = self.prev[0];
        self.prev[0] = number;
    }

    /// The number played `back + 1` moves ago (`back` is 0 or 1).
    pub fn prev(&self, back: usize) -> u8 {
        self.prev[back]
    }
}

/// Learned move weights: a sparse map from code to weight, absent codes
/// reading as 0, plus the adaptation step size α.
#[derive(Clone, Debug)]
pub struct Policy {
    weights: hashbrown::HashMap<MoveCode, f64>,
    alpha: f64,
}

impl Policy {
    /// An empty policy (every move weighs 0) with step size `alpha`.
    pub fn new(alpha: f64) -> Self {
        Policy {
            weights: hashbrown::HashMap::new(),
            alpha,
        }
    }

    /// The adaptation step size α.
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// The weight of `code`; 0 unless adapted.
    pub fn weight(&self, code: MoveCode) -> f64 {
        self.weights.get(&code).copied().unwrap_or(0.0)
    }

    /// Adds `delta` to the weight of `code`.
    pub fn nudge(&mut self, code: MoveCode, delta: f64) {
        *self.weights.entry(code).or_insert(0.0) += delta;
    }

    /// Number of codes with an explicit entry.
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    /// True before any adaptation touched the policy.
    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// A finished playout: the codes played (one per unlocked slot, in walk
/// order), the complete sequence, and its score.
#[derive(Clone, Debug)]
pub struct PlayoutResult {
    /// Codes of the moves played, in slot walk order.
    pub moves: Vec<MoveCode>,
    /// The terminal sequence, locked positions included.
    pub sequence: Vec<Base>,
    /// Fold-and-compare outcome for the sequence.
    pub record: ScoreRecord,
}

impl PlayoutResult {
    /// The scalar score.
    pub fn score(&self) -> f64 {
        self.record.score
    }

    /// Whether this playout solved the target.
    pub fn solved(&self) -> bool {
        self.record.solved
    }
}
