//! Resolved logical plans.

pub mod expr;
pub mod liveness;
pub mod logical;
pub mod resolve;

pub use expr::{Env, Expr, ExprType};
pub use logical::{AggCall, Column, LogicalPlan, Node, NodeId, Op, SetOpKind, SortKey};
pub use resolve::{compile, resolve};
