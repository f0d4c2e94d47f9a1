//! Reference matchers used to judge the optimizer.

mod brute_force;
mod ted;

pub use brute_force::{BRUTE_FORCE_LIMIT, brute_force_matching};
pub use ted::{TedOutcome, label_cost, ted_match, ted_match_with_deadline};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BaselineError {
    #[error("{nodes} nodes exceed the exhaustive-search limit of {limit}")]
    TooLarge { nodes: usize, limit: usize },
    #[error("deadline exceeded")]
    Timeout,
}
