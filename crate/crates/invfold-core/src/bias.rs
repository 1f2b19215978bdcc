//! NEMO-style heuristic weight tables and the bias term they add to
//! playout logits.
//!
//! The tables encode domain knowledge about which bases tend to appear
//! where in designed RNA: pairs lean heavily GC, unpaired positions lean
//! A, and loop-terminal mismatches depend on what they stack against. A
//! slot's [`StructuralContext`] plus the current partial assignment picks
//! the applicable row, and the bias for a move is the logarithm of that
//! row's probability — so a softmax over `w + β` with all weights zero
//! reproduces the table exactly.
//!
//! Row selection for an unpaired position:
//!
//! 1. not a mismatch (no paired neighbour, or in a bulge) → general row;
//! 2. mismatch in an internal loop → row keyed by the facing partner's
//!    base, or the dedicated unassigned row;
//! 3. mismatch whose adjacent paired base is already assigned → row keyed
//!    by that base;
//! 4. mismatch in a multiloop or the external loop, neighbour not yet
//!    assigned → the junction/external row;
//! 5. otherwise → general row.
//!
//! Paired slots use the general pair row, or the junction-orientation rows
//! for left-most/right-most children of a multiloop. Each aggregate pair
//! weight (e.g. 60% for GC/CG) is split equally between the two
//! orientations.
//!
//! Zero-probability entries would make `log` blow up and freeze moves out
//! entirely, so every row is floored at a small epsilon and renormalized;
//! all stored probabilities are strictly positive.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::math;
use crate::structure::{Base, JunctionRole, LoopKind, MoveSlot, SlotKind, StructuralContext};

/// Default floor substituted for 0% table entries before renormalizing.
pub const DEFAULT_EPSILON_FLOOR: f64 = 1e-4;

#[derive(Clone, Copy, Debug)]
struct Row<const N: usize> {
    prob: [f64; N],
    log: [f64; N],
}

impl<const N: usize> Row<N> {
    /// Normalizes raw non-negative weights, floors zeros at `epsilon`,
    /// renormalizes, and caches the logs.
    fn new(weights: [f64; N], epsilon: f64) -> Self {
        let sum: f64 = weights.iter().sum();
        let mut prob = weights.map(|w| w / sum);
        prob = prob.map(|p| if p == 0.0 { epsilon } else { p });
        let floored_sum: f64 = prob.iter().sum();
        prob = prob.map(|p| p / floored_sum);
        Row {
            prob,
            log: prob.map(math::ln),
        }
    }

    /// A degenerate row whose log is identically zero.
    fn flat() -> Self {
        Row {
            prob: [1.0; N],
            log: [0.0; N],
        }
    }
}

/// Splits aggregate pair weights (GC/CG, AU/UA, GU/UG) equally between the
/// two orientations of each pair.
fn split_pairs(gc: f64, au: f64, gu: f64) -> [f64; 6] {
    [gc / 2.0, gc / 2.0, au / 2.0, au / 2.0, gu / 2.0, gu / 2.0]
}

/// The heuristic weight tables. Immutable once built; share freely.
#[derive(Clone, Debug)]
pub struct BiasTables {
    paired_general: Row<6>,
    paired_leftmost: Row<6>,
    paired_rightmost: Row<6>,
    unpaired_general: Row<4>,
    /// Indexed by the adjacent paired base.
    mismatch_vs_paired: [Row<4>; 4],
    internal_unassigned: Row<4>,
    /// Indexed by the facing partner's base.
    internal_vs: [Row<4>; 4],
    junction_external: Row<4>,
    epsilon_floor: f64,
}

impl Default for BiasTables {
    fn default() -> Self {
        BiasTables::standard()
    }
}

impl BiasTables {
    /// The built-in tables with the default epsilon floor.
    pub fn standard() -> Self {
        Self::from_percentages(DEFAULT_EPSILON_FLOOR)
    }

    fn from_percentages(epsilon: f64) -> Self {
        let r4 = |w: [f64; 4]| Row::new(w, epsilon);
        BiasTables {
            paired_general: Row::new(split_pairs(60.0, 33.0, 7.0), epsilon),
            paired_leftmost: Row::new(split_pairs(82.0, 11.0, 7.0), epsilon),
            paired_rightmost: Row::new(split_pairs(37.0, 56.0, 7.0), epsilon),
            unpaired_general: r4([93.0, 1.0, 5.0, 1.0]),
            mismatch_vs_paired: [
                r4([63.0, 0.0, 25.0, 12.0]), // against a paired A
                r4([0.0, 55.0, 9.0, 36.0]),  // against a paired U
                r4([25.0, 12.0, 63.0, 0.0]), // against a paired G
                r4([55.0, 36.0, 0.0, 9.0]),  // against a paired C
            ],
            internal_unassigned: r4([18.0, 4.0, 74.0, 4.0]),
            internal_vs: [
                r4([44.0, 0.0, 44.0, 12.0]), // partner is A
                r4([0.0, 67.0, 11.0, 22.0]), // partner is U
                r4([67.0, 11.0, 22.0, 0.0]), // partner is G
                r4([66.0, 17.0, 0.0, 17.0]), // partner is C
            ],
            junction_external: r4([97.0, 1.0, 1.0, 1.0]),
            epsilon_floor: epsilon,
        }
    }

    /// Tables whose every β is exactly 0, making biased and unbiased
    /// searches coincide move for move. Useful for equivalence tests.
    pub fn zero() -> Self {
        BiasTables {
            paired_general: Row::flat(),
            paired_leftmost: Row::flat(),
            paired_rightmost: Row::flat(),
            unpaired_general: Row::flat(),
            mismatch_vs_paired: [Row::flat(); 4],
            internal_unassigned: Row::flat(),
            internal_vs: [Row::flat(); 4],
            junction_external: Row::flat(),
            epsilon_floor: 0.0,
        }
    }

    /// The floor applied to 0% entries when the tables were built.
    pub fn epsilon_floor(&self) -> f64 {
        self.epsilon_floor
    }

    fn unpaired_row(&self, ctx: &StructuralContext, partial: &[Option<Base>]) -> &Row<4> {
        let Some(adjacent) = ctx.adjacent_paired else {
            return &self.unpaired_general;
        };
        if ctx.loop_kind == LoopKind::Internal {
            return match ctx.mismatch_partner.and_then(|p| partial[p]) {
                Some(b) => &self.internal_vs[b.index()],
                None => &self.internal_unassigned,
            };
        }
        match partial[adjacent] {
            Some(b) => &self.mismatch_vs_paired[b.index()],
            None => match ctx.loop_kind {
                LoopKind::Multiloop | LoopKind::External => &self.junction_external,
                _ => &self.unpaired_general,
            },
        }
    }

    fn paired_row(&self, ctx: &StructuralContext) -> &Row<6> {
        match ctx.junction_role {
            Some(JunctionRole::LeftMost) => &self.paired_leftmost,
            Some(JunctionRole::RightMost) => &self.paired_rightmost,
            _ => &self.paired_general,
        }
    }

    /// The bias term for playing `number` at `slot` given the partial
    /// assignment so far: the log of the selected table probability.
    pub fn beta(&self, slot: &MoveSlot, number: u8, partial: &[Option<Base>]) -> f64 {
        match slot.kind {
            SlotKind::Unpaired { .. } => {
                self.unpaired_row(&slot.context, partial).log[number as usize]
            }
            SlotKind::Paired { .. } => self.paired_row(&slot.context).log[number as usize],
        }
    }

    /// The heuristic probability distribution over `slot`'s candidate
    /// moves, as a rollout policy would draw them. Locked slots yield a
    /// one-hot distribution at their forced move.
    pub fn playout_distribution(&self, slot: &MoveSlot, partial: &[Option<Base>]) -> Vec<f64> {
        let count = slot.candidate_count() as usize;
        if let Some(n) = slot.locked {
            let mut probs = vec![0.0; count];
            probs[n as usize] = 1.0;
            return probs;
        }
        let mut probs: Vec<f64> = match slot.kind {
            SlotKind::Unpaired { .. } => self.unpaired_row(&slot.context, partial).prob.to_vec(),
            SlotKind::Paired { .. } => self.paired_row(&slot.context).prob.to_vec(),
        };
        // rows are already normalized except for the degenerate zero()
        // tables, whose flat rows renormalize to uniform here
        let sum: f64 = probs.iter().sum();
        for p in &mut probs {
            *p /= sum;
        }
        probs
    }

    /// Parses tables from a plain-text config.
    ///
    /// One row per line, `key = v1 v2 ...`; values are relative weights
    /// (percentages and fractions both work — rows are normalized by their
    /// sum). `#` starts a comment. Keys not present keep their built-in
    /// defaults. Recognized keys:
    ///
    /// ```text
    /// epsilon_floor               = 0.0001
    /// paired_general              = 60 33 7        # GC/CG AU/UA GU/UG
    /// paired_leftmost             = 82 11 7
    /// paired_rightmost            = 37 56 7
    /// unpaired_general            = 93 1 5 1       # A U G C
    /// mismatch_vs_paired_a        = 63 0 25 12
    /// mismatch_vs_paired_u        = 0 55 9 36
    /// mismatch_vs_paired_g        = 25 12 63 0
    /// mismatch_vs_paired_c        = 55 36 0 9
    /// internal_mismatch_unassigned = 18 4 74 4
    /// internal_mismatch_a         = 44 0 44 12
    /// internal_mismatch_u         = 0 67 11 22
    /// internal_mismatch_g         = 67 11 22 0
    /// internal_mismatch_c         = 66 17 0 17
    /// junction_external_mismatch  = 97 1 1 1
    /// ```
    pub fn from_config_str(text: &str) -> Result<Self, BiasConfigError> {
        // collect raw rows first: epsilon_floor has to be known before
        // any row is built
        let mut epsilon = DEFAULT_EPSILON_FLOOR;
        let mut rows: Vec<(usize, String, Vec<f64>)> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, rest)) = content.split_once('=') else {
                return Err(BiasConfigError::Syntax { line });
            };
            let key = key.trim().to_string();
            let mut values = Vec::new();
            for token in rest.split_whitespace() {
                let v: f64 = token
                    .parse()
                    .map_err(|_| BiasConfigError::Number {
                        line,
                        token: token.to_string(),
                    })?;
                if !v.is_finite() || v < 0.0 {
                    return Err(BiasConfigError::BadRow { line });
                }
                values.push(v);
            }
            if key == "epsilon_floor" {
                if values.len() != 1 || values[0] <= 0.0 || values[0] > 0.1 {
                    return Err(BiasConfigError::BadEpsilon { line });
                }
                epsilon = values[0];
            } else {
                rows.push((line, key, values));
            }
        }

        let mut tables = Self::from_percentages(epsilon);
        for (line, key, values) in rows {
            let expected = if key.starts_with("paired_") { 3 } else { 4 };
            if values.len() != expected {
                return Err(BiasConfigError::Arity {
                    line,
                    key,
                    expected,
                    found: values.len(),
                });
            }
            if values.iter().sum::<f64>() <= 0.0 {
                return Err(BiasConfigError::BadRow { line });
            }
            let r4 = |v: &[f64]| Row::new([v[0], v[1], v[2], v[3]], epsilon);
            let r6 = |v: &[f64]| Row::new(split_pairs(v[0], v[1], v[2]), epsilon);
            match key.as_str() {
                "paired_general" => tables.paired_general = r6(&values),
                "paired_leftmost" => tables.paired_leftmost = r6(&values),
                "paired_rightmost" => tables.paired_rightmost = r6(&values),
                "unpaired_general" => tables.unpaired_general = r4(&values),
                "mismatch_vs_paired_a" => tables.mismatch_vs_paired[0] = r4(&values),
                "mismatch_vs_paired_u" => tables.mismatch_vs_paired[1] = r4(&values),
                "mismatch_vs_paired_g" => tables.mismatch_vs_paired[2] = r4(&values),
                "mismatch_vs_paired_c" => tables.mismatch_vs_paired[3] = r4(&values),
                "internal_mismatch_unassigned" => tables.internal_unassigned = r4(&values),
                "internal_mismatch_a" => tables.internal_vs[0] = r4(&values),
                "internal_mismatch_u" => tables.internal_vs[1] = r4(&values),
                "internal_mismatch_g" => tables.internal_vs[2] = r4(&values),
                "internal_mismatch_c" => tables.internal_vs[3] = r4(&values),
                "junction_external_mismatch" => tables.junction_external = r4(&values),
                _ => return Err(BiasConfigError::UnknownKey { line, key }),
            }
        }
        Ok(tables)
    }
}

/// Problems in a bias config file.
#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum BiasConfigError {
    /// A non-comment line without a `key = values` shape.
    #[error("line {line}: expected `key = v1 v2 ...`")]
    Syntax {
        /// One-based line number.
        line: usize,
    },
    /// A key that names no table.
    #[error("line {line}: unknown table `{key}`")]
    UnknownKey {
        /// One-based line number.
        line: usize,
        /// The unrecognized key.
        key: String,
    },
    /// A row with the wrong number of values.
    #[error("line {line}: `{key}` needs {expected} values, found {found}")]
    Arity {
        /// One-based line number.
        line: usize,
        /// The table key.
        key: String,
        /// How many values the table needs.
        expected: usize,
        /// How many were given.
        found: usize,
    },
    /// A token that is not a number.
    #[error("line {line}: invalid number `{token}`")]
    Number {
        /// One-based line number.
        line: usize,
        /// The offending token.
        token: String,
    },
    /// Negative, non-finite, or all-zero weights.
    #[error("line {line}: weights must be non-negative with a positive sum")]
    BadRow {
        /// One-based line number.
        line: usize,
    },
    /// `epsilon_floor` outside (0, 0.1].
    #[error("line {line}: epsilon_floor must be a single value in (0, 0.1]")]
    BadEpsilon {
        /// One-based line number.
        line: usize,
    },
}
