//! Phase 4: interactive dialogue generation.
//!
//! A session runs user-first under a sampled (user persona, agent persona,
//! blueprint) configuration: the user simulator and the agent generator
//! alternate, each grounded by retrieval evidence, until the blueprint
//! reaches a terminal outcome, the user's goals are met, or the turn cap
//! hits.

mod pools;
mod session;
mod state;

pub use pools::{build_agent_message_pool, build_opening_pool, build_user_query_pool};
pub use session::{
    generate_agent_turn, run_generation_phase, run_session, select_configuration,
    simulate_user_turn, synthesize_opening, AgentTurnOutcome, GenerationPhaseConfig,
    GenerationPhaseOutput, SessionConfig, SessionLimits, SessionPools, UserTurnSignal,
    DEFAULT_MAX_TURNS, DEFAULT_RETRIEVAL_K,
};
pub use state::{DialogueState, EvidenceItem, EvidenceKind, EvidenceSet};
