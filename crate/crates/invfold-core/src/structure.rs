//! Target structures: dot-bracket parsing, move slots, and structural
//! contexts.
//!
//! A target is a properly nested dot-bracket string, optionally with a
//! sequence constraint locking some positions to fixed bases. Parsing
//! produces one *move slot* per unpaired position and one per base pair;
//! a search assigns each slot a move (a base, or an ordered pair of
//! complementary bases) to build a candidate sequence.
//!
//! Every slot carries a [`StructuralContext`] describing where it sits in
//! the loop decomposition of the target. For a multiloop the closing pairs
//! of the enclosed helices are oriented clockwise, viewed from the loop's
//! own closing pair:
//!
//! ```text
//!        left-most                    right-most
//!          child                        child
//!        ( . . . )    ( . . . )      ( . . . )
//!       /          \ /          \   /         \
//!   .. (   first    X   middle   ..    last    ) ..
//!       \________ closing pair _______________/
//! ```
//!
//! The first child helix after the closing pair is `LeftMost`, the last
//! one before it closes again is `RightMost`, everything between is
//! `Other`. A child that abuts a neighbouring helix with no unpaired gap
//! loses its orientation (it stacks rather than dangles) and is demoted to
//! `Other`.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

/// One of the four RNA nucleotides.
///
/// The discriminant order `A, U, G, C` is the canonical move-number order
/// for unpaired slots; [`Base::index`] exposes it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Base {
    /// Adenine.
    A,
    /// Uracil.
    U,
    /// Guanine.
    G,
    /// Cytosine.
    C,
}

impl Base {
    /// All four bases in canonical move order.
    pub const ALL: [Base; 4] = [Base::A, Base::U, Base::G, Base::C];

    /// Parses one nucleotide letter (either case).
    pub fn from_char(c: char) -> Option<Base> {
        match c {
            'A' | 'a' => Some(Base::A),
            'U' | 'u' => Some(Base::U),
            'G' | 'g' => Some(Base::G),
            'C' | 'c' => Some(Base::C),
            _ => None,
        }
    }

    /// The uppercase letter for this base.
    pub fn to_char(self) -> char {
        match self {
            Base::A => 'A',
            Base::U => 'U',
            Base::G => 'G',
            Base::C => 'C',
        }
    }

    /// Position of this base in [`Base::ALL`], also its unpaired move number.
    pub fn index(self) -> usize {
        self as usize
    }
}

/// The six orderings of a complementary base pair, in canonical move-number
/// order: `GC, CG, AU, UA, GU, UG`. Element `k` is the move numbered `k`
/// for a paired slot; the first base goes to the opening position, the
/// second to the closing one.
pub const PAIR_COMBOS: [(Base, Base); 6] = [
    (Base::G, Base::C),
    (Base::C, Base::G),
    (Base::A, Base::U),
    (Base::U, Base::A),
    (Base::G, Base::U),
    (Base::U, Base::G),
];

/// Whether `a` and `b` can pair (Watson-Crick or GU wobble).
pub fn is_complementary(a: Base, b: Base) -> bool {
    matches!(
        (a, b),
        (Base::G, Base::C)
            | (Base::C, Base::G)
            | (Base::A, Base::U)
            | (Base::U, Base::A)
            | (Base::G, Base::U)
            | (Base::U, Base::G)
    )
}

/// The kind of loop a position or pair belongs to in the loop
/// decomposition of the target.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LoopKind {
    /// A pair enclosing only unpaired positions.
    Hairpin,
    /// A pair directly enclosing exactly one pair, no unpaired positions.
    Stack,
    /// One enclosed helix with unpaired positions on one side only.
    Bulge,
    /// One enclosed helix with unpaired positions on both sides.
    Internal,
    /// Two or more enclosed helices.
    Multiloop,
    /// Outside every pair.
    External,
}

/// Orientation of a helix's closing pair inside the multiloop that
/// contains it. See the module docs for the clockwise convention.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum JunctionRole {
    /// First child helix after the loop's closing pair.
    LeftMost,
    /// Last child helix before the loop closes again.
    RightMost,
    /// A middle child, or one demoted for stacking flush against a
    /// neighbouring helix.
    Other,
}

/// Where a slot sits in the target's loop decomposition.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StructuralContext {
    /// For an unpaired slot, the kind of loop containing the position; for
    /// a paired slot, the kind of loop the pair *closes*.
    pub loop_kind: LoopKind,
    /// Orientation within the enclosing multiloop. Only ever set for
    /// paired slots whose parent loop is a multiloop.
    pub junction_role: Option<JunctionRole>,
    /// For an unpaired position with a paired immediate neighbour, that
    /// neighbour's position (the left one when both sides are paired).
    /// Bulge positions never count as mismatches and get `None`.
    pub adjacent_paired: Option<usize>,
    /// The unpaired position facing this one across a hairpin or a
    /// symmetric internal loop, when such a partner exists.
    pub mismatch_partner: Option<usize>,
}

/// Whether a slot assigns a single base or a complementary pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SlotKind {
    /// One unpaired position; moves are the four bases.
    Unpaired {
        /// The string position the slot assigns.
        pos: usize,
    },
    /// A base pair; moves are the six orderings in [`PAIR_COMBOS`].
    Paired {
        /// Opening (5') position of the pair.
        open: usize,
        /// Closing (3') position of the pair.
        close: usize,
    },
}

/// One sequence-building decision: a position or pair plus its structural
/// context and an optional constraint lock.
#[derive(Clone, Debug)]
pub struct MoveSlot {
    /// What the slot assigns.
    pub kind: SlotKind,
    /// Structural classification used by the heuristic bias.
    pub context: StructuralContext,
    /// When set, the only legal move number for this slot.
    pub locked: Option<u8>,
}

impl MoveSlot {
    /// The position identifying this slot in move codes: the position
    /// itself for unpaired slots, the opening position for pairs.
    pub fn anchor(&self) -> usize {
        match self.kind {
            SlotKind::Unpaired { pos } => pos,
            SlotKind::Paired { open, .. } => open,
        }
    }

    /// Number of candidate moves before considering locks: 4 or 6.
    pub fn candidate_count(&self) -> u8 {
        match self.kind {
            SlotKind::Unpaired { .. } => 4,
            SlotKind::Paired { .. } => 6,
        }
    }

    /// Legal move numbers: the lock alone when present, otherwise all
    /// candidates.
    pub fn legal_numbers(&self) -> impl Iterator<Item = u8> {
        let (start, end) = match self.locked {
            Some(n) => (n, n + 1),
            None => (0, self.candidate_count()),
        };
        start..end
    }

    /// The bases move `number` assigns: `(base, None)` for unpaired slots,
    /// `(open base, Some(close base))` for pairs.
    pub fn bases_of(&self, number: u8) -> (Base, Option<Base>) {
        match self.kind {
            SlotKind::Unpaired { .. } => (Base::ALL[number as usize], None),
            SlotKind::Paired { .. } => {
                let (a, b) = PAIR_COMBOS[number as usize];
                (a, Some(b))
            }
        }
    }

    /// Writes move `number`'s bases into a partial assignment.
    pub fn apply(&self, number: u8, partial: &mut [Option<Base>]) {
        match self.kind {
            SlotKind::Unpaired { pos } => partial[pos] = Some(Base::ALL[number as usize]),
            SlotKind::Paired { open, close } => {
                let (a, b) = PAIR_COMBOS[number as usize];
                partial[open] = Some(a);
                partial[close] = Some(b);
            }
        }
    }
}

/// Order in which slots are visited during a playout.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum SlotOrder {
    /// Left to right by string position, pairs anchored at their opening
    /// position.
    #[default]
    StringOrder,
    /// All pairs first (by opening position), then unpaired positions —
    /// the order the NEMO solver fills sequences in. Pair-adjacent
    /// mismatches then always see their neighbouring pair already
    /// assigned.
    PairedFirst,
}

/// Problems with a dot-bracket string or its sequence constraint.
#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum StructureError {
    /// The structure string was empty.
    #[error("empty structure")]
    Empty,
    /// A character other than `.`, `(`, `)`.
    #[error("illegal character '{found}' at position {position}")]
    IllegalChar {
        /// Zero-based position of the offending character.
        position: usize,
        /// The character found.
        found: char,
    },
    /// A bracket with no partner.
    #[error("unbalanced structure: unmatched '{symbol}' at position {position}")]
    Unbalanced {
        /// Zero-based position of the unmatched bracket.
        position: usize,
        /// Which bracket was unmatched.
        symbol: char,
    },
    /// Constraint string length differs from the structure length.
    #[error("constraint length {constraint_len} does not match structure length {structure_len}")]
    ConstraintLength {
        /// Length of the constraint string.
        constraint_len: usize,
        /// Length of the structure string.
        structure_len: usize,
    },
    /// A constraint character outside `AUGC`, `N` and `.`.
    #[error("illegal constraint character '{found}' at position {position}")]
    IllegalConstraintChar {
        /// Zero-based position in the constraint string.
        position: usize,
        /// The character found.
        found: char,
    },
    /// A pair whose two locked bases cannot pair.
    #[error("constraint locks pair ({open}, {close}) to {a}{b}, which cannot pair")]
    IllegalPairLock {
        /// Opening position of the pair.
        open: usize,
        /// Closing position of the pair.
        close: usize,
        /// Base locked at the opening position.
        a: char,
        /// Base locked at the closing position.
        b: char,
    },
    /// A pair with exactly one side locked. Pair slots assign both ends at
    /// once, so a half lock is rejected rather than silently narrowing the
    /// move set.
    #[error("pair ({open}, {close}) is constrained on one side only; lock both bases or neither")]
    HalfLockedPair {
        /// Opening position of the pair.
        open: usize,
        /// Closing position of the pair.
        close: usize,
    },
    /// A sequence letter outside `AUGC`.
    #[error("illegal base '{found}' at position {position}")]
    IllegalBase {
        /// Zero-based position in the sequence string.
        position: usize,
        /// The character found.
        found: char,
    },
}

/// A parsed inverse-folding target: the dot-bracket string, its pair map,
/// and the ordered move slots with their structural contexts.
#[derive(Clone, Debug)]
pub struct TargetStructure {
    dotbracket: String,
    pair_of: Vec<Option<usize>>,
    num_target_pairs: usize,
    slots: Vec<MoveSlot>,
    slot_of_pos: Vec<usize>,
}

impl TargetStructure {
    /// Parses an unconstrained target with slots in string order.
    pub fn parse(dotbracket: &str) -> Result<Self, StructureError> {
        Self::parse_with(dotbracket, None, SlotOrder::StringOrder)
    }

    /// Parses a target with an optional sequence constraint and an
    /// explicit slot order.
    ///
    /// Constraint characters `A`, `U`, `G`, `C` (either case) lock a
    /// position; `.` and `N` leave it free. Both ends of a pair must be
    /// locked together or not at all, and locked pairs must be
    /// complementary.
    pub fn parse_with(
        dotbracket: &str,
        constraint: Option<&str>,
        order: SlotOrder,
    ) -> Result<Self, StructureError> {
        if dotbracket.is_empty() {
            return Err(StructureError::Empty);
        }
        let pair_of = parse_pair_map(dotbracket)?;
        let n = pair_of.len();
        let num_target_pairs = pair_of.iter().filter(|p| p.is_some()).count() / 2;

        let locks = match constraint {
            None => vec![None; n],
            Some(text) => parse_constraint(text, n)?,
        };

        let contexts = classify(&pair_of);
        let mut slots = Vec::with_capacity(n - num_target_pairs);
        for pos in 0..n {
            match pair_of[pos] {
                Some(close) if close > pos => {
                    let locked = pair_lock(pos, close, locks[pos], locks[close])?;
                    slots.push(MoveSlot {
                        kind: SlotKind::Paired { open: pos, close },
                        context: contexts[pos],
                        locked,
                    });
                }
                Some(_) => {} // closing side, owned by the opening slot
                None => {
                    let locked = locks[pos].map(|b| b.index() as u8);
                    slots.push(MoveSlot {
                        kind: SlotKind::Unpaired { pos },
                        context: contexts[pos],
                        locked,
                    });
                }
            }
        }
        if order == SlotOrder::PairedFirst {
            // stable, so ties keep string order within each group
            slots.sort_by_key(|s| matches!(s.kind, SlotKind::Unpaired { .. }));
        }

        let mut slot_of_pos = vec![0usize; n];
        for (i, slot) in slots.iter().enumerate() {
            match slot.kind {
                SlotKind::Unpaired { pos } => slot_of_pos[pos] = i,
                SlotKind::Paired { open, close } => {
                    slot_of_pos[open] = i;
                    slot_of_pos[close] = i;
                }
            }
        }

        Ok(TargetStructure {
            dotbracket: String::from(dotbracket),
            pair_of,
            num_target_pairs,
            slots,
            slot_of_pos,
        })
    }

    /// Structure length in nucleotides.
    pub fn len(&self) -> usize {
        self.pair_of.len()
    }

    /// True when the structure has no positions (never true for parsed
    /// targets; parsing rejects empty input).
    pub fn is_empty(&self) -> bool {
        self.pair_of.is_empty()
    }

    /// The dot-bracket string this target was parsed from.
    pub fn dotbracket(&self) -> &str {
        &self.dotbracket
    }

    /// Pair map: `pairs()[i]` is the partner of position `i`, if any.
    pub fn pairs(&self) -> &[Option<usize>] {
        &self.pair_of
    }

    /// Number of base pairs in the target.
    pub fn num_target_pairs(&self) -> usize {
        self.num_target_pairs
    }

    /// The move slots in playout order.
    pub fn slots(&self) -> &[MoveSlot] {
        &self.slots
    }

    /// Index into [`TargetStructure::slots`] of the slot that assigns
    /// position `pos`.
    pub fn slot_of_position(&self, pos: usize) -> usize {
        self.slot_of_pos[pos]
    }
}

fn pair_lock(
    open: usize,
    close: usize,
    a: Option<Base>,
    b: Option<Base>,
) -> Result<Option<u8>, StructureError> {
    match (a, b) {
        (None, None) => Ok(None),
        (Some(a), Some(b)) => match PAIR_COMBOS.iter().position(|&c| c == (a, b)) {
            Some(k) => Ok(Some(k as u8)),
            None => Err(StructureError::IllegalPairLock {
                open,
                close,
                a: a.to_char(),
                b: b.to_char(),
            }),
        },
        _ => Err(StructureError::HalfLockedPair { open, close }),
    }
}

fn parse_constraint(text: &str, n: usize) -> Result<Vec<Option<Base>>, StructureError> {
    let chars: Vec<char> = text.chars().collect();
    if chars.len() != n {
        return Err(StructureError::ConstraintLength {
            constraint_len: chars.len(),
            structure_len: n,
        });
    }
    chars
        .iter()
        .enumerate()
        .map(|(position, &c)| match c {
            '.' | 'N' | 'n' => Ok(None),
            _ => match Base::from_char(c) {
                Some(b) => Ok(Some(b)),
                None => Err(StructureError::IllegalConstraintChar { position, found: c }),
            },
        })
        .collect()
}

/// Parses a dot-bracket string into a pair map. `result[i]` holds the
/// partner of position `i`, or `None` for unpaired positions.
pub fn parse_pair_map(dotbracket: &str) -> Result<Vec<Option<usize>>, StructureError> {
    let mut pair_of: Vec<Option<usize>> = Vec::new();
    let mut open_stack: Vec<usize> = Vec::new();
    for (position, c) in dotbracket.chars().enumerate() {
        match c {
            '.' => pair_of.push(None),
            '(' => {
                open_stack.push(position);
                pair_of.push(None);
            }
            ')' => {
                let open = open_stack.pop().ok_or(StructureError::Unbalanced {
                    position,
                    symbol: ')',
                })?;
                pair_of.push(Some(open));
                pair_of[open] = Some(position);
            }
            found => return Err(StructureError::IllegalChar { position, found }),
        }
    }
    if let Some(&position) = open_stack.first() {
        return Err(StructureError::Unbalanced {
            position,
            symbol: '(',
        });
    }
    Ok(pair_of)
}

/// Renders a pair map back to dot-bracket notation. Inverse of
/// [`parse_pair_map`] for well-formed maps.
pub fn render_pair_map(pair_of: &[Option<usize>]) -> String {
    pair_of
        .iter()
        .enumerate()
        .map(|(i, p)| match p {
            Some(j) if *j > i => '(',
            Some(_) => ')',
            None => '.',
        })
        .collect()
}

/// Parses a nucleotide string (either case) into bases.
pub fn parse_sequence(text: &str) -> Result<Vec<Base>, StructureError> {
    text.chars()
        .enumerate()
        .map(|(position, c)| {
            Base::from_char(c).ok_or(StructureError::IllegalBase { position, found: c })
        })
        .collect()
}

/// Renders a base slice as an uppercase string.
pub fn render_sequence(seq: &[Base]) -> String {
    seq.iter().map(|b| b.to_char()).collect()
}

// ---------------------------------------------------------------------------
// Loop decomposition and context classification
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, PartialEq, Eq)]
enum LoopItem {
    Unpaired(usize),
    Helix(usize, usize),
}

struct LoopDecomp {
    /// Closing pair of each loop; `None` for the external loop at index 0.
    closing: Vec<Option<(usize, usize)>>,
    /// Items of each loop in left-to-right order.
    items: Vec<Vec<LoopItem>>,
    /// Loop containing each position as an item (for a paired position,
    /// the loop its helix is an item of).
    loop_of: Vec<usize>,
    /// Loop *closed by* the pair opening at each position.
    closed_by: Vec<Option<usize>>,
}

fn decompose(pair_of: &[Option<usize>]) -> LoopDecomp {
    let n = pair_of.len();
    let mut d = LoopDecomp {
        closing: vec![None],
        items: vec![Vec::new()],
        loop_of: vec![0; n],
        closed_by: vec![None; n],
    };
    let mut stack: Vec<usize> = vec![0];
    for (pos, &paired) in pair_of.iter().enumerate() {
        let cur = *stack.last().expect("external loop never popped");
        match paired {
            Some(close) if close > pos => {
                d.items[cur].push(LoopItem::Helix(pos, close));
                d.loop_of[pos] = cur;
                d.loop_of[close] = cur;
                let li = d.closing.len();
                d.closing.push(Some((pos, close)));
                d.items.push(Vec::new());
                d.closed_by[pos] = Some(li);
                stack.push(li);
            }
            Some(_) => {
                stack.pop();
            }
            None => {
                d.items[cur].push(LoopItem::Unpaired(pos));
                d.loop_of[pos] = cur;
            }
        }
    }
    d
}

impl LoopDecomp {
    fn kind(&self, li: usize) -> LoopKind {
        if self.closing[li].is_none() {
            return LoopKind::External;
        }
        let items = &self.items[li];
        let helices = items
            .iter()
            .filter(|it| matches!(it, LoopItem::Helix(..)))
            .count();
        match helices {
            0 => LoopKind::Hairpin,
            1 => {
                let unpaired = items.len() - 1;
                if unpaired == 0 {
                    LoopKind::Stack
                } else {
                    let hpos = items
                        .iter()
                        .position(|it| matches!(it, LoopItem::Helix(..)))
                        .expect("exactly one helix");
                    if hpos == 0 || hpos == items.len() - 1 {
                        LoopKind::Bulge
                    } else {
                        LoopKind::Internal
                    }
                }
            }
            _ => LoopKind::Multiloop,
        }
    }

    fn helix_items(&self, li: usize) -> Vec<(usize, usize)> {
        self.items[li]
            .iter()
            .filter_map(|it| match it {
                LoopItem::Helix(a, b) => Some((*a, *b)),
                LoopItem::Unpaired(_) => None,
            })
            .collect()
    }
}

/// Classifies every string position. For unpaired positions the context
/// describes the position itself; for paired positions both ends carry the
/// context of the *pair* (keyed off the loop the pair closes).
fn classify(pair_of: &[Option<usize>]) -> Vec<StructuralContext> {
    let n = pair_of.len();
    let d = decompose(pair_of);
    let mut out = vec![
        StructuralContext {
            loop_kind: LoopKind::External,
            junction_role: None,
            adjacent_paired: None,
            mismatch_partner: None,
        };
        n
    ];

    for pos in 0..n {
        match pair_of[pos] {
            Some(close) if close > pos => {
                let own = d.closed_by[pos].expect("opening position closes a loop");
                let parent = d.loop_of[pos];
                let ctx = StructuralContext {
                    loop_kind: d.kind(own),
                    junction_role: junction_role(&d, parent, pos, close),
                    adjacent_paired: None,
                    mismatch_partner: None,
                };
                out[pos] = ctx;
                out[close] = ctx;
            }
            Some(_) => {}
            None => {
                let li = d.loop_of[pos];
                let kind = d.kind(li);
                out[pos] = StructuralContext {
                    loop_kind: kind,
                    junction_role: None,
                    adjacent_paired: adjacent_paired(pair_of, pos, kind),
                    mismatch_partner: mismatch_partner(&d, li, kind, pos),
                };
            }
        }
    }
    out
}

/// A paired immediate neighbour makes an unpaired position a mismatch —
/// except in bulges, whose unpaired stretch sits against a helix without
/// stacking the way loop-terminal mismatches do.
fn adjacent_paired(pair_of: &[Option<usize>], pos: usize, kind: LoopKind) -> Option<usize> {
    if kind == LoopKind::Bulge {
        return None;
    }
    if pos > 0 && pair_of[pos - 1].is_some() {
        return Some(pos - 1);
    }
    if pos + 1 < pair_of.len() && pair_of[pos + 1].is_some() {
        return Some(pos + 1);
    }
    None
}

/// The facing position across a hairpin or a symmetric internal loop.
fn mismatch_partner(d: &LoopDecomp, li: usize, kind: LoopKind, pos: usize) -> Option<usize> {
    match kind {
        LoopKind::Hairpin => {
            let (i, j) = d.closing[li].expect("hairpin has a closing pair");
            if pos == i + 1 && pos != j - 1 {
                Some(j - 1)
            } else if pos == j - 1 && pos != i + 1 {
                Some(i + 1)
            } else {
                None
            }
        }
        LoopKind::Internal => {
            let (i, j) = d.closing[li].expect("internal loop has a closing pair");
            let (k, l) = d.helix_items(li)[0];
            // only symmetric loops have well-defined facing partners
            if k - i != j - l {
                return None;
            }
            if pos == i + 1 {
                Some(j - 1)
            } else if pos == j - 1 {
                Some(i + 1)
            } else if pos == k - 1 {
                Some(l + 1)
            } else if pos == l + 1 {
                Some(k - 1)
            } else {
                None
            }
        }
        _ => None,
    }
}

/// Orientation of the child helix `(open, close)` inside its parent loop,
/// when that parent is a multiloop.
fn junction_role(d: &LoopDecomp, parent: usize, open: usize, close: usize) -> Option<JunctionRole> {
    if d.kind(parent) != LoopKind::Multiloop {
        return None;
    }
    let (pi, pj) = d.closing[parent].expect("multiloop has a closing pair");
    let helices = d.helix_items(parent);
    let idx = helices
        .iter()
        .position(|&h| h == (open, close))
        .expect("pair is an item of its parent loop");
    if idx == 0 {
        // flush against the closing pair or the next helix: stacked, not a
        // dangling left-most
        let flush_left = open == pi + 1;
        let flush_right = helices.get(1).is_some_and(|&(k2, _)| k2 == close + 1);
        if flush_left || flush_right {
            Some(JunctionRole::Other)
        } else {
            Some(JunctionRole::LeftMost)
        }
    } else if idx == helices.len() - 1 {
        let flush_right = close == pj - 1;
        let flush_left = helices[idx - 1].1 + 1 == open;
        if flush_left || flush_right {
            Some(JunctionRole::Other)
        } else {
            Some(JunctionRole::RightMost)
        }
    } else {
        Some(JunctionRole::Other)
    }
}
