//! Data-oblivious operators over validity-flagged, padded tuple arrays.
//!
//! Every kernel's control flow, output size and memory trace depend only on
//! input slot counts and schema widths. Invalid slots carry placeholders.

mod ops;
mod relation;
mod trace;

pub(crate) use ops::{acc_fold, acc_input, acc_start};
pub use ops::{Engine, SortSpec};
pub use relation::{PaddedRelation, Slot, Tag, ORIGIN_BROKER};
pub use trace::{CostReport, EventKind, OpCost, Recorder, TraceEvent};

#[cfg(test)]
mod tests;
