//! Training orchestration: parallel actors feeding a learner through a
//! bounded queue, online fine-tuning of sequence policies from a replay
//! buffer, budget accounting and evaluation.

mod actor;
mod agents;
mod behavior;
mod budget;
mod eval;
mod finetune;
mod learner;
mod replay;
mod rundir;
mod snapshot;

pub use actor::{Actor, Segment};
pub use agents::{Agent, DqnAgent, PpoAgent, VTraceAgent};
pub use behavior::{Behavior, EpsilonGreedy, ReturnConditioned, Stochastic};
pub use budget::{Budget, BudgetTracker, BudgetUsage, ClockKind};
pub use eval::{evaluate, EpisodeRecord, EvalOutcome};
pub use finetune::{finetune_mgdt, FinetuneConfig, FinetuneStats};
pub use learner::{run_actor_learner, ActorLearnerConfig, RunOutcome, RunStats};
pub use replay::ReplayBuffer;
pub use rundir::{RunDir, SegmentLog};
pub use snapshot::{Snapshot, SnapshotStore};
