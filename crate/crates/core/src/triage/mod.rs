//! Human review of misclassified frames and the translation of category
//! tallies into the next generation config.

mod plan;
mod server;
mod session;
mod store;

pub use plan::{
    apply_plan, build_iteration_plan, ConfigDelta, IterationPlan, TargetedBlock, CROSS_REACH_STEP, DEFAULT_BUDGET_FRAMES,
    WEIGHT_STEP,
};
pub use server::{router, serve, SharedSession, DEFAULT_PER_PAGE};
pub use session::{AppliedPlan, ErrorPage, ErrorView, TriageSession};
pub use store::{Assignment, CategoryStore};
