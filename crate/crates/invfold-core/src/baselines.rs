//! Comparison searches over the same playout machinery: nested Monte
//! Carlo search (NMCS) and UCT.
//!
//! Both run with learned weights pinned at zero, so their playouts sample
//! the raw bias softmax (or uniformly without bias tables) — they compete
//! with the policy-adapting searches on equal scoring, caching, and
//! randomness terms, differing only in how they direct the sampling:
//! NMCS by committing to the move of the best playout at each slot, UCT
//! by upper-confidence descent through a transposition table.

use alloc::vec::Vec;

use crate::math;
use crate::policy::{MoveCodeScheme, PlayoutResult, Policy};
use crate::search::{complete_playout, rng_for_ticket, EvalContext, StopSignal, WalkState};

/// Nested Monte Carlo search.
///
/// Level 0 is one playout. Level `n` walks the slots in order; at each
/// unlocked slot it runs a level `n−1` search after every legal move,
/// keeps the best playout seen anywhere so far, and then commits to that
/// playout's move at the slot. The kept best only improves, so the walk
/// always follows a real playout's prefix. When the best turns solved the
/// walk stops early (after finishing the slot's move sweep).
///
/// The searcher persists its ticket counter across [`NmcsSearch::run`]
/// calls, so repeated invocations draw fresh randomness but stay
/// reproducible from the seed.
pub struct NmcsSearch<'a> {
    ctx: &'a EvalContext<'a>,
    stop: &'a dyn StopSignal,
    /// Zero weights forever: rollouts follow the bias alone.
    policy: Policy,
    tickets: u64,
}

impl<'a> NmcsSearch<'a> {
    /// A searcher over `ctx` honoring `stop`.
    pub fn new(ctx: &'a EvalContext<'a>, stop: &'a dyn StopSignal) -> Self {
        NmcsSearch {
            ctx,
            stop,
            policy: Policy::new(1.0),
            tickets: 0,
        }
    }

    /// Playout tickets consumed so far.
    pub fn playouts(&self) -> u64 {
        self.tickets
    }

    /// One full search at `level` from the empty assignment. Returns the
    /// best playout found, or `None` when stopped before any playout.
    pub fn run(&mut self, level: u8) -> Option<PlayoutResult> {
        let mut state = WalkState::new(self.ctx);
        state.skip_locked(self.ctx);
        self.search(level, state)
    }

    fn rollout(&mut self, state: WalkState) -> PlayoutResult {
        let mut rng = rng_for_ticket(self.ctx.seed, self.tickets);
        self.tickets += 1;
        complete_playout(self.ctx, &self.policy, &mut rng, state)
    }

    fn search(&mut self, level: u8, mut state: WalkState) -> Option<PlayoutResult> {
        if level == 0 {
            return Some(self.rollout(state));
        }
        let slots = self.ctx.target.slots();
        let mut best: Option<PlayoutResult> = None;
        while state.next_slot < slots.len() {
            if self.stop.should_stop() {
                break;
            }
            let slot = &slots[state.next_slot];
            for number in 0..slot.candidate_count() {
                let mut child = state.clone();
                child.play(self.ctx, number);
                child.skip_locked(self.ctx);
                let Some(result) = self.search(level - 1, child) else {
                    return best; // stopped below: wind down with what we have
                };
                if best.as_ref().is_none_or(|b| result.score() >= b.score()) {
                    best = Some(result);
                }
            }
            let current = best.as_ref().expect("move sweep produced a result");
            if current.solved() {
                break;
            }
            // commit to the best playout's move at this slot; the best
            // always extends the walked prefix
            debug_assert!(current.moves.starts_with(&state.moves));
            let number = MoveCodeScheme::number_of(current.moves[state.moves.len()]);
            state.play(self.ctx, number);
            state.skip_locked(self.ctx);
        }
        best
    }
}

/// One transposition-table node: per-move visit counts and value sums for
/// the up-to-six candidate moves of the slot decided at this state.
#[derive(Clone, Copy, Debug, Default)]
pub struct UctNode {
    /// Times each move was taken from here.
    pub visits: [u32; 6],
    /// Summed playout scores credited to each move.
    pub sums: [f64; 6],
    /// Times this node was passed through; equals the sum of `visits`.
    pub total: u32,
}

impl UctNode {
    /// Whether `total` still equals the sum of per-move visits.
    pub fn visits_conserved(&self) -> bool {
        self.total as u64 == self.visits.iter().map(|&v| v as u64).sum::<u64>()
    }
}

/// Monte Carlo tree search with upper-confidence move selection.
///
/// Each iteration descends from the root by `argmax(mean + c·√(ln N / n))`
/// over fully expanded nodes, expands the first unvisited move (taking
/// unvisited moves in bias-probability order), finishes the sequence with
/// a bias-weighted rollout, and backs the score up the visited path. The
/// tree lives in a transposition table keyed by the Zobrist assignment
/// hash, so transposed paths share statistics. The best playout seen
/// anywhere is kept and returned.
pub struct UctSearch<'a> {
    ctx: &'a EvalContext<'a>,
    stop: &'a dyn StopSignal,
    exploration: f64,
    policy: Policy,
    nodes: hashbrown::HashMap<u64, UctNode>,
    tickets: u64,
    best: Option<PlayoutResult>,
}

impl<'a> UctSearch<'a> {
    /// A searcher over `ctx` with exploration constant `c` (0.4 is the
    /// usual default here).
    pub fn new(ctx: &'a EvalContext<'a>, exploration: f64, stop: &'a dyn StopSignal) -> Self {
        assert!(
            exploration >= 0.0,
            "exploration constant must be nonnegative"
        );
        UctSearch {
            ctx,
            stop,
            exploration,
            policy: Policy::new(1.0),
            nodes: hashbrown::HashMap::new(),
            tickets: 0,
            best: None,
        }
    }

    /// Playout tickets consumed so far.
    pub fn playouts(&self) -> u64 {
        self.tickets
    }

    /// Number of distinct states in the transposition table.
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// The transposition-table nodes, for invariant checks.
    pub fn nodes(&self) -> impl Iterator<Item = &UctNode> {
        self.nodes.values()
    }

    /// Best playout seen so far across all iterations.
    pub fn best(&self) -> Option<&PlayoutResult> {
        self.best.as_ref()
    }

    /// Runs up to `budget` more iterations (one playout each), stopping
    /// early when solved or signalled. Returns the best playout seen so
    /// far, also counting earlier `run` calls on this tree.
    pub fn run(&mut self, budget: u64) -> Option<PlayoutResult> {
        for _ in 0..budget {
            if self.stop.should_stop() {
                break;
            }
            if self.best.as_ref().is_some_and(|b| b.solved()) {
                break;
            }
            self.iterate();
        }
        self.best.clone()
    }

    fn iterate(&mut self) {
        let slots = self.ctx.target.slots();
        let mut state = WalkState::new(self.ctx);
        state.skip_locked(self.ctx);
        // (state hash, move number) edges walked this iteration
        let mut path: Vec<(u64, u8)> = Vec::new();
        let mut expanded = false;
        while state.next_slot < slots.len() && !expanded {
            let slot = &slots[state.next_slot];
            let count = slot.candidate_count() as usize;
            let node = self.nodes.entry(state.hash).or_default();
            let number = if node.visits[..count].contains(&0) {
                expanded = true;
                // most promising unvisited move first: order by bias
                // probability, then by move number
                let probs = self
                    .ctx
                    .bias
                    .map(|b| b.playout_distribution(slot, &state.partial));
                (0..count)
                    .filter(|&n| node.visits[n] == 0)
                    .max_by(|&a, &b| {
                        let (pa, pb) = match &probs {
                            Some(p) => (p[a], p[b]),
                            None => (0.0, 0.0),
                        };
                        pa.total_cmp(&pb).then(b.cmp(&a))
                    })
                    .expect("an unvisited move exists") as u8
            } else {
                let ln_total = math::ln(node.total as f64);
                let c = self.exploration;
                (0..count)
                    .max_by(|&a, &b| {
                        let ucb = |n: usize| {
                            node.sums[n] / node.visits[n] as f64
                                + c * math::sqrt(ln_total / node.visits[n] as f64)
                        };
                        ucb(a).total_cmp(&ucb(b)).then(b.cmp(&a))
                    })
                    .expect("slot has candidates") as u8
            };
            path.push((state.hash, number));
            state.play(self.ctx, number);
            state.skip_locked(self.ctx);
        }
        // finish with a rollout (a no-op walk if descent hit a terminal)
        let mut rng = rng_for_ticket(self.ctx.seed, self.tickets);
        self.tickets += 1;
        let result = complete_playout(self.ctx, &self.policy, &mut rng, state);
        let score = result.score();
        for (hash, number) in path {
            let node = self.nodes.get_mut(&hash).expect("node created on descent");
            node.visits[number as usize] += 1;
            node.sums[number as usize] += score;
            node.total += 1;
        }
        if self
            .best
            .as_ref()
            .is_none_or(|b| result.score() >= b.score())
        {
            self.best = Some(result);
        }
    }
}
