//! Column liveness: which output positions of each operator are read by
//! some ancestor.

use std::collections::{BTreeMap, BTreeSet};

use super::logical::{post_order, LogicalPlan, NodeId, Op};

/// Input positions, per child, that `op` reads to produce the `live`
/// positions of its output.
pub fn required_inputs(op: &Op, child_arities: &[usize], live: &BTreeSet<usize>) -> Vec<BTreeSet<usize>> {
    let mut need: BTreeSet<usize> = BTreeSet::new();
    match op {
        Op::Scan { .. } => return vec![],
        Op::Filter { .. } | Op::Sort { .. } | Op::Limit { .. } => need.extend(live.iter().copied()),
        Op::Project { exprs } => {
            for i in live {
                exprs[*i].collect_columns(&mut need);
            }
        }
        Op::Join { .. } => need.extend(live.iter().copied()),
        Op::Aggregate { .. } => {}
        Op::Distinct | Op::SetOp { .. } => {
            return child_arities.iter().map(|n| (0..*n).collect()).collect();
        }
        Op::WindowNumber { .. } => {
            let n = child_arities[0];
            need.extend(live.iter().copied().filter(|i| *i < n));
        }
    }
    if !matches!(op, Op::Project { .. }) {
        for e in op.expressions() {
            e.collect_columns(&mut need);
        }
    }
    split_by_child(&need, child_arities)
}

fn split_by_child(need: &BTreeSet<usize>, child_arities: &[usize]) -> Vec<BTreeSet<usize>> {
    let mut out = Vec::with_capacity(child_arities.len());
    let mut start = 0;
    for n in child_arities {
        out.push(need.iter().filter(|i| **i >= start && **i < start + n).map(|i| i - start).collect());
        start += n;
    }
    out
}

/// Live output positions of every node reachable from `root`.
///
/// `trimmable(n)` false forces every output of `n` live, which in turn keeps
/// all of its inputs that the operator reads.
pub fn live_outputs(
    root: NodeId,
    children: &dyn Fn(NodeId) -> Vec<NodeId>,
    op: &dyn Fn(NodeId) -> Op,
    arity: &dyn Fn(NodeId) -> usize,
    trimmable: &dyn Fn(NodeId) -> bool,
) -> BTreeMap<NodeId, BTreeSet<usize>> {
    let order = post_order(root, children);
    let mut live: BTreeMap<NodeId, BTreeSet<usize>> = BTreeMap::new();
    live.insert(root, (0..arity(root)).collect());
    for &id in order.iter().rev() {
        let mut out = live.get(&id).cloned().unwrap_or_default();
        if !trimmable(id) {
            out = (0..arity(id)).collect();
        }
        live.insert(id, out.clone());
        let kids = children(id);
        let arities: Vec<usize> = kids.iter().map(|c| arity(*c)).collect();
        for (c, need) in kids.iter().zip(required_inputs(&op(id), &arities, &out)) {
            live.entry(*c).or_default().extend(need);
        }
    }
    live
}

/// Liveness over a logical plan with every operator trimmable.
pub fn logical_liveness(plan: &LogicalPlan) -> BTreeMap<NodeId, BTreeSet<usize>> {
    live_outputs(
        plan.root,
        &|n| plan.nodes[n].children.clone(),
        &|n| plan.nodes[n].op.clone(),
        &|n| plan.nodes[n].arity(),
        &|_| true,
    )
}

/// Input columns (positions in the concatenated child schemas) an operator
/// reads under full liveness.
pub fn live_inputs(plan: &LogicalPlan, live: &BTreeMap<NodeId, BTreeSet<usize>>, id: NodeId) -> BTreeSet<usize> {
    let node = &plan.nodes[id];
    let arities: Vec<usize> = node.children.iter().map(|c| plan.nodes[*c].arity()).collect();
    let empty = BTreeSet::new();
    let per_child = required_inputs(&node.op, &arities, live.get(&id).unwrap_or(&empty));
    let mut out = BTreeSet::new();
    let mut start = 0;
    for (need, n) in per_child.iter().zip(&arities) {
        out.extend(need.iter().map(|i| i + start));
        start += n;
    }
    out
}
