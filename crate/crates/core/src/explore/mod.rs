//! Exploration of branch alternatives: the tree of seen paths, the
//! worklist of negated formulas and the adversarial search loop.

mod formula;
mod search;
mod tree;

pub use formula::{Order, PathFormula, Worklist};
pub use search::{
    build_query, check_adversarial, execute, repair_assignment, replay_check, AdversarialExample,
    AttackResult, AttackStats, BranchKind, Execution, Outcome, QueryRecord, Replay, SearchConfig,
};
pub use tree::ExplorationTree;
