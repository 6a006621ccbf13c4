//! Partitioning of the tensor index grid into independent blocks and the
//! executor that applies one block's entry updates concurrently.
//!
//! Two entries are interchangeable when they share no index in any mode;
//! a block is a set of mutually interchangeable entries, so the factor
//! rows touched by distinct entries of one block are disjoint and the
//! entries can be updated in parallel without conflicts.

mod executor;
mod plan;

pub use executor::{run_block_parallel, BlockExecutor};
pub(crate) use executor::{SharedRows, SharedSlice};
pub use plan::{build_plan, verify_plan, Block, BlockPlan, Entry};
