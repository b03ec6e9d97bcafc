//! Execution modes, split operators and execution sites.

use super::slice::shares_slice_key;
use super::{Mode, Phase, PhysNode, PhysicalPlan, Site};
use crate::error::{Error, Result};
use crate::plan::{AggCall, Expr, NodeId, Op};
use crate::sql::ast::AggFunc;
use crate::typer::{label_expression, Label};

/// Assigns modes bottom-up. Low operators and split low phases run plain.
/// A high operator goes secure after any secure child, or after a sliced
/// child it is not sliced alike with; otherwise it is sliced when it has a
/// key (or a sliced child) and secure when it has neither.
pub fn assign_execution_modes(plan: &mut PhysicalPlan) -> Result<()> {
    for id in plan.post_order() {
        let node = &plan.nodes[id];
        if matches!(node.op, Op::SetOp { .. }) {
            return Err(Error::Plan("set operations unsupported".into()));
        }
        let mode = if node.label == Label::Low || node.phase == Phase::Low {
            Mode::Plain
        } else {
            let mut e = Mode::Plain;
            for (slot, c) in node.children.iter().enumerate() {
                match plan.nodes[*c].mode {
                    Mode::Secure => e = Mode::Secure,
                    Mode::Sliced => {
                        e = if shares_slice_key(plan, id, slot) && e != Mode::Secure {
                            Mode::Sliced
                        } else {
                            Mode::Secure
                        }
                    }
                    Mode::Plain => {}
                }
            }
            if e == Mode::Plain {
                if node.key.is_empty() {
                    Mode::Secure
                } else {
                    Mode::Sliced
                }
            } else {
                e
            }
        };
        plan.nodes[id].mode = mode;
    }
    Ok(())
}

/// A chain of scans, filters and projections with plain modes.
fn is_local_chain(plan: &PhysicalPlan, id: NodeId) -> bool {
    let node = &plan.nodes[id];
    node.mode == Mode::Plain
        && match node.op {
            Op::Scan { .. } => true,
            Op::Filter { .. } | Op::Project { .. } => is_local_chain(plan, node.children[0]),
            _ => false,
        }
}

fn merge_call(call: &AggCall, pos: usize) -> Option<AggCall> {
    let func = match call.func {
        AggFunc::Count | AggFunc::Sum => AggFunc::Sum,
        AggFunc::Min => AggFunc::Min,
        AggFunc::Max => AggFunc::Max,
        AggFunc::CountDistinct => return None,
    };
    Some(AggCall { func, arg: Some(Expr::Column(pos)) })
}

/// Splits high aggregates over local inputs into per-provider partials and
/// a combining aggregate, and high filters over plain inputs into a plain
/// filter of their low conjuncts below a filter of the rest. The original
/// node id keeps the high half so parents are untouched.
pub fn split_operators(plan: &mut PhysicalPlan) {
    for id in plan.post_order() {
        let node = plan.nodes[id].clone();
        if node.label != Label::High || node.phase != Phase::Whole {
            continue;
        }
        match &node.op {
            Op::Aggregate { group_by, aggs } => {
                if !is_local_chain(plan, node.children[0]) {
                    continue;
                }
                let g = group_by.len();
                let Some(merged) =
                    aggs.iter().enumerate().map(|(i, a)| merge_call(a, g + i)).collect::<Option<Vec<_>>>()
                else {
                    continue;
                };
                let low = PhysNode { phase: Phase::Low, mode: Mode::Plain, ..node.clone() };
                plan.nodes.push(low);
                let low_id = plan.nodes.len() - 1;
                let high = &mut plan.nodes[id];
                high.op = Op::Aggregate { group_by: (0..g).map(Expr::Column).collect(), aggs: merged };
                high.children = vec![low_id];
                high.phase = Phase::High;
            }
            Op::Filter { predicate } => {
                if node.children.iter().any(|c| plan.nodes[*c].mode != Mode::Plain) {
                    continue;
                }
                let input: Vec<_> = node.children.iter().flat_map(|c| plan.nodes[*c].schema.clone()).collect();
                let (low, high): (Vec<Expr>, Vec<Expr>) = predicate
                    .conjuncts()
                    .into_iter()
                    .partition(|c| label_expression(c, &input, &plan.catalog) == Label::Low);
                if low.is_empty() || high.is_empty() {
                    continue;
                }
                let low_node = PhysNode {
                    op: Op::Filter { predicate: Expr::and_all(low).expect("non-empty") },
                    label: Label::Low,
                    phase: Phase::Low,
                    mode: Mode::Plain,
                    ..node.clone()
                };
                plan.nodes.push(low_node);
                let low_id = plan.nodes.len() - 1;
                let high_node = &mut plan.nodes[id];
                high_node.op = Op::Filter { predicate: Expr::and_all(high).expect("non-empty") };
                high_node.children = vec![low_id];
                high_node.phase = Phase::High;
            }
            _ => {}
        }
    }
    for node in &mut plan.nodes {
        let n = node.children.len();
        node.inputs = node.children.clone();
        node.edge_keys.resize(n, Vec::new());
        node.input_keys = vec![Vec::new(); n];
        node.pre = vec![Vec::new(); n];
    }
}

fn is_local(plan: &PhysicalPlan, id: NodeId) -> bool {
    let node = &plan.nodes[id];
    node.mode == Mode::Plain
        && match node.op {
            Op::Scan { .. } => true,
            Op::Filter { .. } | Op::Project { .. } => is_local(plan, node.children[0]),
            Op::Aggregate { .. } => node.phase == Phase::Low && is_local(plan, node.children[0]),
            _ => false,
        }
}

pub(super) fn assign_sites(plan: &mut PhysicalPlan) {
    for id in plan.post_order() {
        let site = if plan.nodes[id].mode != Mode::Plain {
            Site::Engine
        } else if is_local(plan, id) {
            Site::Local
        } else {
            Site::BrokerPlain
        };
        plan.nodes[id].site = site;
    }
}
