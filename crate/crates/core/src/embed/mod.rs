//! VNF forwarding-graph embedding with a double deep Q-learning agent.
//!
//! VNFs are placed one at a time. The action is a substrate node; the mask
//! hides nodes without capacity and nodes already tried for the current
//! VNF. After a node is reserved, every virtual link back to an already
//! placed VNF is routed. A VNF that cannot be placed within the attempt
//! budget rolls back the whole service.

mod ddql;
mod placement;
mod reward;

pub use ddql::{DdqlAgent, DdqlConfig, EmbedTransition};
pub use placement::{
    embed_service, embed_state, feasible_mask, state_size, PlacementOutcome, RoutedLink,
};
pub use reward::{
    local_reward, placement_factor, placement_term, quality_term, EmbedParams, RewardTerms,
};
