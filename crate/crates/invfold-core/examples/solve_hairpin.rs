//! Minimal library usage: solve one hairpin target with the default
//! biased nested search (this is the README snippet, kept compiling).

use invfold_core::{
    BiasTables, EnergyModel, EvalContext, MoveCodeScheme, NeverStop, NoCache, SearchConfig,
    Searcher, SequentialExecutor, SlotOrder, TargetStructure, ZobristTable,
};

fn main() {
    let target = TargetStructure::parse_with("((((....))))", None, SlotOrder::PairedFirst)
        .expect("valid dot-bracket");
    let oracle = EnergyModel::default();
    let bias = BiasTables::standard();
    let cache = NoCache::new();
    let ctx = EvalContext {
        target: &target,
        bias: Some(&bias),
        scheme: MoveCodeScheme::new(0),
        oracle: &oracle,
        cache: &cache,
        zobrist: ZobristTable::new(0),
        seed: 42,
    };
    let config = SearchConfig::default(); // level 1, 100 iterations, α = 1
    let best = Searcher::new(&ctx, &config, &SequentialExecutor, &NeverStop)
        .run()
        .expect("at least one playout ran");
    println!(
        "{} score {:.4}",
        invfold_core::structure::render_sequence(&best.sequence),
        best.score()
    );
}
