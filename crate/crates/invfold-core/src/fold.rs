//! The folding oracle: minimum-energy structure prediction under a simple
//! pair-energy model.
//!
//! Folding is a Nussinov-style dynamic program: the energy of a window is
//! the best of leaving its first position unpaired or pairing it with any
//! complementary partner far enough away, summing pair energies. No
//! stacking or loop terms — the model is deliberately small so the oracle
//! stays self-contained and fast, at the cost of realism.
//!
//! The same model also evaluates a sequence threaded onto a *fixed*
//! structure, which is what scoring needs: legal pairs contribute their
//! energy, while declared pairs that cannot form (non-complementary bases
//! or a hairpin below the minimum span) are charged a flat penalty. Since
//! the dynamic program may always fall back to the legal subset of any
//! fixed structure, the fixed-structure energy is never below the folded
//! minimum.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::structure::{self, Base, StructureError, TargetStructure};

/// Pair energies and folding constraints.
///
/// Defaults: GC −3, AU −2, GU −1, hairpin loops of at least three
/// unpaired positions, and a +10 penalty for declared pairs that cannot
/// form.
#[derive(Clone, Copy, Debug)]
pub struct EnergyModel {
    /// Energy of a GC or CG pair.
    pub pair_gc: f64,
    /// Energy of an AU or UA pair.
    pub pair_au: f64,
    /// Energy of a GU or UG wobble pair.
    pub pair_gu: f64,
    /// Minimum number of unpaired positions inside a hairpin loop.
    pub min_hairpin: usize,
    /// Charge for a declared pair that cannot form.
    pub illegal_penalty: f64,
}

impl Default for EnergyModel {
    fn default() -> Self {
        EnergyModel {
            pair_gc: -3.0,
            pair_au: -2.0,
            pair_gu: -1.0,
            min_hairpin: 3,
            illegal_penalty: 10.0,
        }
    }
}

/// Errors from the explicit-structure energy entry points.
#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum FoldError {
    /// Sequence and structure lengths differ.
    #[error("sequence length {sequence_len} does not match structure length {structure_len}")]
    LengthMismatch {
        /// Length of the sequence.
        sequence_len: usize,
        /// Length of the structure.
        structure_len: usize,
    },
    /// The structure string failed to parse.
    #[error(transparent)]
    Structure(#[from] StructureError),
}

/// Result of evaluating a candidate sequence against a target.
#[derive(Clone, Debug)]
pub struct FoldOutcome {
    /// Pair map of the minimum-energy fold.
    pub mfe_pairs: Vec<Option<usize>>,
    /// Energy of that fold.
    pub mfe_energy: f64,
    /// Energy of the sequence threaded onto the target structure.
    pub target_energy: f64,
    /// `target_energy - mfe_energy`; never negative.
    pub delta_g: f64,
}

impl FoldOutcome {
    /// The minimum-energy fold in dot-bracket notation.
    pub fn mfe_structure(&self) -> String {
        structure::render_pair_map(&self.mfe_pairs)
    }
}

/// A folding engine the search can score candidates against.
///
/// `Sync` so evaluation contexts can be shared across worker threads.
pub trait FoldOracle: Sync {
    /// Minimum-energy fold: pair map and energy.
    fn fold(&self, seq: &[Base]) -> (Vec<Option<usize>>, f64);

    /// Energy of `seq` threaded onto a fixed structure. Lengths must
    /// match.
    fn structure_energy(&self, seq: &[Base], pair_of: &[Option<usize>]) -> f64;

    /// Folds `seq` and compares against `target`.
    fn evaluate(&self, seq: &[Base], target: &TargetStructure) -> FoldOutcome {
        let (mfe_pairs, mfe_energy) = self.fold(seq);
        let target_energy = self.structure_energy(seq, target.pairs());
        FoldOutcome {
            mfe_pairs,
            mfe_energy,
            target_energy,
            delta_g: target_energy - mfe_energy,
        }
    }
}

impl EnergyModel {
    /// Energy of pairing `a` with `b`, or `None` when they cannot pair.
    pub fn pair_energy(&self, a: Base, b: Base) -> Option<f64> {
        match (a, b) {
            (Base::G, Base::C) | (Base::C, Base::G) => Some(self.pair_gc),
            (Base::A, Base::U) | (Base::U, Base::A) => Some(self.pair_au),
            (Base::G, Base::U) | (Base::U, Base::G) => Some(self.pair_gu),
            _ => None,
        }
    }

    /// Minimum-energy fold of `seq` as a pair map plus its energy.
    ///
    /// Ties are broken deterministically: at equal energy a position
    /// prefers pairing over staying unpaired, and among equal-energy
    /// partners the nearest (smallest index) wins. Runs in O(n³).
    pub fn fold_pairs(&self, seq: &[Base]) -> (Vec<Option<usize>>, f64) {
        let n = seq.len();
        let mut pair_of = vec![None; n];
        if n < 2 {
            return (pair_of, 0.0);
        }
        const UNPAIRED: usize = usize::MAX;
        let at = |i: usize, j: usize| i * n + j;
        let mut energy = vec![0.0f64; n * n];
        let mut choice = vec![UNPAIRED; n * n];

        for span in 1..n {
            for i in 0..n - span {
                let j = i + span;
                let mut best = energy[at(i + 1, j)];
                let mut pick = UNPAIRED;
                for k in (i + self.min_hairpin + 1)..=j {
                    let Some(e) = self.pair_energy(seq[i], seq[k]) else {
                        continue;
                    };
                    let inner = if k > i + 1 { energy[at(i + 1, k - 1)] } else { 0.0 };
                    let rest = if k < j { energy[at(k + 1, j)] } else { 0.0 };
                    let cand = e + inner + rest;
                    // strict improvement, or first pairing at equal energy
                    if cand < best || (cand == best && pick == UNPAIRED) {
                        best = cand;
                        pick = k;
                    }
                }
                energy[at(i, j)] = best;
                choice[at(i, j)] = pick;
            }
        }

        let mut stack = vec![(0usize, n - 1)];
        while let Some((i, j)) = stack.pop() {
            if i >= j {
                continue;
            }
            match choice[at(i, j)] {
                UNPAIRED => stack.push((i + 1, j)),
                k => {
                    pair_of[i] = Some(k);
                    pair_of[k] = Some(i);
                    if k > i + 1 {
                        stack.push((i + 1, k - 1));
                    }
                    if k < j {
                        stack.push((k + 1, j));
                    }
                }
            }
        }
        (pair_of, energy[at(0, n - 1)])
    }

    /// Minimum-energy fold rendered as a dot-bracket string.
    pub fn fold_structure(&self, seq: &[Base]) -> (String, f64) {
        let (pairs, e) = self.fold_pairs(seq);
        (structure::render_pair_map(&pairs), e)
    }

    /// Energy of `seq` threaded onto a fixed structure, checking lengths.
    pub fn energy_of_structure(
        &self,
        seq: &[Base],
        pair_of: &[Option<usize>],
    ) -> Result<f64, FoldError> {
        if seq.len() != pair_of.len() {
            return Err(FoldError::LengthMismatch {
                sequence_len: seq.len(),
                structure_len: pair_of.len(),
            });
        }
        Ok(self.energy_unchecked(seq, pair_of))
    }

    fn energy_unchecked(&self, seq: &[Base], pair_of: &[Option<usize>]) -> f64 {
        let mut total = 0.0;
        for i in 0..pair_of.len() {
            let Some(j) = pair_of[i] else { continue };
            if j <= i {
                continue;
            }
            match self.pair_energy(seq[i], seq[j]) {
                // hairpin span check mirrors the folding constraint
                Some(e) if j - i > self.min_hairpin => total += e,
                _ => total += self.illegal_penalty,
            }
        }
        total
    }
}

impl FoldOracle for EnergyModel {
    fn fold(&self, seq: &[Base]) -> (Vec<Option<usize>>, f64) {
        self.fold_pairs(seq)
    }

    fn structure_energy(&self, seq: &[Base], pair_of: &[Option<usize>]) -> f64 {
        assert_eq!(seq.len(), pair_of.len(), "sequence/structure length mismatch");
        self.energy_unchecked(seq, pair_of)
    }
}

/// Number of base pairs present in exactly one of two pair maps of equal
/// length.
pub fn pair_distance(a: &[Option<usize>], b: &[Option<usize>]) -> u32 {
    debug_assert_eq!(a.len(), b.len());
    let mut d = 0;
    for i in 0..a.len().min(b.len()) {
        let pa = a[i].filter(|&j| j > i);
        let pb = b[i].filter(|&j| j > i);
        if pa != pb {
            d += pa.is_some() as u32 + pb.is_some() as u32;
        }
    }
    d
}

/// Base-pair distance between two dot-bracket strings.
pub fn base_pair_distance(s1: &str, s2: &str) -> Result<u32, FoldError> {
    let a = structure::parse_pair_map(s1)?;
    let b = structure::parse_pair_map(s2)?;
    if a.len() != b.len() {
        return Err(FoldError::LengthMismatch {
            sequence_len: a.len(),
            structure_len: b.len(),
        });
    }
    Ok(pair_distance(&a, &b))
}
