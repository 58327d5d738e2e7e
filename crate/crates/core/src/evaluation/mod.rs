//! Evaluation tooling: DST metrics against gold annotations, slot
//! distribution statistics, blind judge batches, and training-mix budgeting.

mod dst;
mod judge;
mod mix;
mod slots;

pub use dst::{
    annotation_from_session, joint_goal_accuracy, slot_value_f1, DialogueStateAnnotation,
    DstScores, TurnState,
};
pub use judge::{
    aggregate_judge_scores, export_judge_batch, AggregateRow, JudgeAggregate, JudgeBatch,
    JudgeItem, JudgeKey, JudgeKeyEntry, JudgeScoreFile, JudgeScoreRecord, JudgeTurn,
    JUDGE_DIMENSIONS,
};
pub use mix::{mix_training_budget, MixManifest};
pub use slots::{slot_distribution, SlotDistributionRow, SlotDistributionTable};
