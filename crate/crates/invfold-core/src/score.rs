//! Scoring candidates and caching the results.
//!
//! A candidate sequence is folded once and reduced to a scalar made of two
//! parts: a structural credit `K = 1 − BPD / (2 · pairs(target))`, full
//! when the fold reproduces every target pair, and an energy-gap factor
//! pulling the score toward zero as the target structure falls behind the
//! true minimum. Positive credit is divided by `1 + ΔG`, negative credit
//! multiplied by it, so the score orders candidates by how close they are
//! *and* how cheap the remaining repair looks. A score of exactly 1 means
//! solved.
//!
//! Folding dominates the cost of a playout, and distinct playouts reach
//! the same final assignment often, so scores are memoised behind a hash
//! of the assignment set ([`ZobristTable`]). The hash XORs one value per
//! slot decision and is therefore independent of the order slots were
//! filled in.

use core::sync::atomic::{AtomicU64, Ordering};

use crate::fold::{self, FoldOracle};
use crate::structure::{Base, TargetStructure};

/// A scored candidate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScoreRecord {
    /// The scalar score; 1 exactly when solved, can go negative for folds
    /// sharing less than half of a doubled pair count with the target.
    pub score: f64,
    /// Whether the minimum-energy fold reproduced the target exactly.
    pub solved: bool,
    /// Base-pair distance between the fold and the target.
    pub bpd: u32,
    /// Energy gap between the target structure and the fold.
    pub delta_g: f64,
}

/// The scoring kernel on its own, for callers that already folded.
///
/// Targets without any pairs use `K = 1 − BPD` so that every spurious
/// pair in the fold still costs credit and `score == 1` keeps meaning
/// `BPD == 0`.
pub fn score_value(bpd: u32, num_target_pairs: usize, delta_g: f64) -> f64 {
    let k = if num_target_pairs == 0 {
        1.0 - bpd as f64
    } else {
        1.0 - bpd as f64 / (2.0 * num_target_pairs as f64)
    };
    if k > 0.0 {
        k / (1.0 + delta_g)
    } else {
        k * (1.0 + delta_g)
    }
}

/// Folds `seq` with `oracle` and scores it against `target`.
pub fn score_sequence(
    seq: &[Base],
    target: &TargetStructure,
    oracle: &dyn FoldOracle,
) -> ScoreRecord {
    let out = oracle.evaluate(seq, target);
    let bpd = fold::pair_distance(&out.mfe_pairs, target.pairs());
    ScoreRecord {
        score: score_value(bpd, target.num_target_pairs(), out.delta_g),
        solved: bpd == 0,
        bpd,
        delta_g: out.delta_g,
    }
}

/// Stateless Zobrist values: a fixed mix of the table seed and the move
/// code stands in for a materialised random table, so any code gets a
/// value without preallocation.
#[derive(Clone, Copy, Debug)]
pub struct ZobristTable {
    seed: u64,
}

impl Default for ZobristTable {
    fn default() -> Self {
        ZobristTable::new(0x5851_F42D_4C95_7F2D)
    }
}

pub(crate) fn splitmix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl ZobristTable {
    /// A table derived from `seed`; equal seeds give equal values.
    pub fn new(seed: u64) -> Self {
        ZobristTable { seed }
    }

    /// The 64-bit value assigned to one move code.
    pub fn value(&self, code: u32) -> u64 {
        splitmix(
            self.seed
                .wrapping_add((code as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)),
        )
    }

    /// XOR of the values of all codes in an assignment; the empty
    /// assignment hashes to 0. Order-independent by construction.
    pub fn state_hash<I: IntoIterator<Item = u32>>(&self, codes: I) -> u64 {
        codes
            .into_iter()
            .fold(0, |acc, code| acc ^ self.value(code))
    }
}

/// Hit and miss counters for a score table.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct CacheStats {
    /// Lookups answered from the table.
    pub hits: u64,
    /// Lookups that fell through to the oracle.
    pub misses: u64,
    /// Lookups where the stored sequence disagreed with the probe (only
    /// detectable in paranoid mode).
    pub collisions: u64,
}

/// Shared score memo. `Sync` so one table can serve all worker threads.
pub trait ScoreTable: Sync {
    /// The record stored under `hash`, if any. `seq` is the probing
    /// sequence, letting paranoid implementations verify the entry.
    fn lookup(&self, hash: u64, seq: &[Base]) -> Option<ScoreRecord>;
    /// Stores `record` under `hash`; last writer wins.
    fn store(&self, hash: u64, seq: &[Base], record: ScoreRecord);
    /// Counter snapshot.
    fn stats(&self) -> CacheStats;
}

/// Scores through the table: returns the memoised record when present,
/// otherwise folds, scores, stores, and returns.
pub fn cached_score(
    hash: u64,
    seq: &[Base],
    target: &TargetStructure,
    oracle: &dyn FoldOracle,
    table: &dyn ScoreTable,
) -> ScoreRecord {
    if let Some(record) = table.lookup(hash, seq) {
        return record;
    }
    let record = score_sequence(seq, target, oracle);
    table.store(hash, seq, record);
    record
}

/// A table that never remembers anything; every lookup is a miss.
#[derive(Debug, Default)]
pub struct NoCache {
    misses: AtomicU64,
}

impl NoCache {
    /// A fresh non-caching table.
    pub const fn new() -> Self {
        NoCache {
            misses: AtomicU64::new(0),
        }
    }
}

impl ScoreTable for NoCache {
    fn lookup(&self, _hash: u64, _seq: &[Base]) -> Option<ScoreRecord> {
        self.misses.fetch_add(1, Ordering::Relaxed);
        None
    }

    fn store(&self, _hash: u64, _seq: &[Base], _record: ScoreRecord) {}

    fn stats(&self) -> CacheStats {
        CacheStats {
            hits: 0,
            misses: self.misses.load(Ordering::Relaxed),
            collisions: 0,
        }
    }
}

#[cfg(feature = "std")]
pub use self::std_cache::ScoreCache;

#[cfg(feature = "std")]
mod std_cache {
    use super::*;
    use alloc::boxed::Box;
    use std::sync::RwLock;

    struct CacheEntry {
        record: ScoreRecord,
        /// Stored only in paranoid mode, to verify probes against hash
        /// collisions.
        seq: Option<Box<[Base]>>,
    }

    /// Concurrent score memo: many readers, exclusive insertion.
    ///
    /// In paranoid mode the full sequence is stored alongside each record
    /// and verified on lookup; a mismatch counts as a collision and falls
    /// through to recomputation.
    pub struct ScoreCache {
        map: RwLock<hashbrown::HashMap<u64, CacheEntry>>,
        hits: AtomicU64,
        misses: AtomicU64,
        collisions: AtomicU64,
        paranoid: bool,
    }

    impl Default for ScoreCache {
        fn default() -> Self {
            Self::new()
        }
    }

    impl ScoreCache {
        /// An empty cache trusting its 64-bit hashes.
        pub fn new() -> Self {
            Self::with_paranoia(false)
        }

        /// An empty cache that verifies every hit against the stored
        /// sequence.
        pub fn paranoid() -> Self {
            Self::with_paranoia(true)
        }

        fn with_paranoia(paranoid: bool) -> Self {
            ScoreCache {
                map: RwLock::new(hashbrown::HashMap::new()),
                hits: AtomicU64::new(0),
                misses: AtomicU64::new(0),
                collisions: AtomicU64::new(0),
                paranoid,
            }
        }

        /// Number of memoised records.
        pub fn len(&self) -> usize {
            self.map.read().expect("cache lock poisoned").len()
        }

        /// True when nothing has been stored yet.
        pub fn is_empty(&self) -> bool {
            self.len() == 0
        }
    }

    impl ScoreTable for ScoreCache {
        fn lookup(&self, hash: u64, seq: &[Base]) -> Option<ScoreRecord> {
            let guard = self.map.read().expect("cache lock poisoned");
            match guard.get(&hash) {
                Some(entry) => {
                    if let Some(stored) = entry.seq.as_deref() {
                        if stored != seq {
                            self.collisions.fetch_add(1, Ordering::Relaxed);
                            self.misses.fetch_add(1, Ordering::Relaxed);
                            return None;
                        }
                    }
                    self.hits.fetch_add(1, Ordering::Relaxed);
                    Some(entry.record)
                }
                None => {
                    self.misses.fetch_add(1, Ordering::Relaxed);
                    None
                }
            }
        }

        fn store(&self, hash: u64, seq: &[Base], record: ScoreRecord) {
            let entry = CacheEntry {
                record,
                seq: self.paranoid.then(|| Box::from(seq)),
            };
            self.map
                .write()
                .expect("cache lock poisoned")
                .insert(hash, entry);
        }

        fn stats(&self) -> CacheStats {
            CacheStats {
                hits: self.hits.load(Ordering::Relaxed),
                misses: self.misses.load(Ordering::Relaxed),
                collisions: self.collisions.load(Ordering::Relaxed),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fold::EnergyModel;
    use crate::structure::parse_sequence;

    #[test]
    fn score_kernel_values() {
        // perfect reproduction
        assert_eq!(score_value(0, 3, 0.0), 1.0);
        // partial credit shrinks with the energy gap
        let s = score_value(2, 3, 1.5);
        assert!((s - (2.0 / 3.0) / 2.5).abs() < 1e-12);
        // negative credit grows more negative with the gap
        let s = score_value(8, 3, 2.0);
        assert!((s - (-1.0 / 3.0) * 3.0).abs() < 1e-12);
        // open-chain target: every spurious pair costs a full unit
        assert_eq!(score_value(0, 0, 0.0), 1.0);
        assert_eq!(score_value(2, 0, 0.0), -1.0);
    }

    #[test]
    fn score_orders_by_closeness() {
        for ntp in [1, 4, 10] {
            let mut last = f64::INFINITY;
            for bpd in 0..(2 * ntp) {
                let s = score_value(bpd, ntp as usize, 0.5);
                assert!(s < last, "score must strictly drop as bpd grows");
                last = s;
            }
        }
    }

    #[test]
    fn solved_iff_exact_fold() {
        let oracle = EnergyModel::default();
        let target = TargetStructure::parse("((...))").unwrap();
        let good = score_sequence(&parse_sequence("GGAAACC").unwrap(), &target, &oracle);
        assert!(good.solved);
        assert_eq!(good.score, 1.0);
        assert_eq!(good.bpd, 0);
        let bad = score_sequence(&parse_sequence("AAAAAAA").unwrap(), &target, &oracle);
        assert!(!bad.solved);
        assert!(bad.score < 1.0);
        assert_eq!(bad.bpd, 2);
    }

    #[test]
    fn zobrist_hash_is_order_free_and_empty_is_zero() {
        let z = ZobristTable::default();
        assert_eq!(z.state_hash([]), 0);
        let a = z.state_hash([3, 99, 2048]);
        let b = z.state_hash([2048, 3, 99]);
        assert_eq!(a, b);
        assert_ne!(a, z.state_hash([3, 99]));
        // different seeds give different tables
        assert_ne!(
            ZobristTable::new(1).value(42),
            ZobristTable::new(2).value(42)
        );
    }

    #[test]
    fn cache_round_trip_and_stats() {
        let cache = ScoreCache::new();
        let seq = parse_sequence("GGAAACC").unwrap();
        let rec = ScoreRecord {
            score: 0.5,
            solved: false,
            bpd: 1,
            delta_g: 0.0,
        };
        assert_eq!(cache.lookup(7, &seq), None);
        cache.store(7, &seq, rec);
        assert_eq!(cache.lookup(7, &seq), Some(rec));
        let stats = cache.stats();
        assert_eq!((stats.hits, stats.misses, stats.collisions), (1, 1, 0));
        assert_eq!(cache.len(), 1);
    }

    #[test]
    fn paranoid_cache_flags_collisions() {
        let cache = ScoreCache::paranoid();
        let a = parse_sequence("GGAAACC").unwrap();
        let b = parse_sequence("CCAAAGG").unwrap();
        let rec = ScoreRecord {
            score: 0.5,
            solved: false,
            bpd: 1,
            delta_g: 0.0,
        };
        cache.store(7, &a, rec);
        assert_eq!(cache.lookup(7, &a), Some(rec));
        // same hash, different sequence: must not be served
        assert_eq!(cache.lookup(7, &b), None);
        assert_eq!(cache.stats().collisions, 1);
    }

    #[test]
    fn no_cache_never_hits() {
        let t = NoCache::new();
        let seq = parse_sequence("GG").unwrap();
        let rec = ScoreRecord {
            score: 0.0,
            solved: false,
            bpd: 0,
            delta_g: 0.0,
        };
        t.store(1, &seq, rec);
        assert_eq!(t.lookup(1, &seq), None);
        assert_eq!(t.stats().misses, 1);
    }

    #[test]
    fn cached_score_memoises() {
        let oracle = EnergyModel::default();
        let target = TargetStructure::parse("((...))").unwrap();
        let cache = ScoreCache::new();
        let seq = parse_sequence("GGAAACC").unwrap();
        let first = cached_score(99, &seq, &target, &oracle, &cache);
        let second = cached_score(99, &seq, &target, &oracle, &cache);
        assert_eq!(first, second);
        assert_eq!(cache.stats().hits, 1);
        assert_eq!(cache.stats().misses, 1);
    }
}
