//! Operator coalescing: single-tuple operators run inside a neighbouring
//! multi-tuple host instead of as separate passes.

use super::{FusedStep, Mode, PhysicalPlan};
use crate::plan::Op;

/// Marks absorbed operators and fills each host's effective inputs, input
/// keys and fused steps. With coalescing off every operator is its own host.
///
/// Fusion never crosses a mode boundary and only happens where the fused
/// operator has a single consumer. Plain filters are never fused.
pub fn coalesce(plan: &mut PhysicalPlan) {
    let order = plan.post_order();
    for &id in &order {
        let n = &mut plan.nodes[id];
        let k = n.children.len();
        n.absorbed_into = None;
        n.inputs = n.children.clone();
        n.input_keys = n.edge_keys.clone();
        n.pre = vec![Vec::new(); k];
        n.post = Vec::new();
    }
    if !plan.config.coalesce {
        return;
    }
    let parents = plan.parents();
    let single = |id| parents[&id].len() == 1;
    for &id in &order {
        let node = plan.nodes[id].clone();
        // upward: fold into the child's host as an output step
        if node.children.len() == 1 && single(node.children[0]) {
            let host = plan.host_of(node.children[0]);
            let same_mode = plan.nodes[host].mode == node.mode;
            let step = match &node.op {
                Op::Filter { predicate }
                    if node.mode != Mode::Plain && matches!(plan.nodes[host].op, Op::Join { .. }) =>
                {
                    Some(FusedStep::Filter { node: id, predicate: predicate.clone(), keep: node.keep.clone() })
                }
                Op::Project { exprs } => Some(FusedStep::Project { node: id, exprs: exprs.clone() }),
                _ => None,
            };
            if let (Some(step), true) = (step, same_mode) {
                plan.nodes[host].post.push(step);
                plan.nodes[id].absorbed_into = Some(host);
                continue;
            }
        }
        if node.mode == Mode::Plain {
            continue;
        }
        // downward: a child filter becomes a prefilter on that input
        for slot in 0..node.children.len() {
            let f = node.children[slot];
            let fnode = &plan.nodes[f];
            let Op::Filter { predicate } = &fnode.op else { continue };
            if !fnode.is_host()
                || fnode.mode != node.mode
                || !single(f)
                || !fnode.post.is_empty()
                || fnode.pre.iter().any(|p| !p.is_empty())
            {
                continue;
            }
            let step = FusedStep::Filter { node: f, predicate: predicate.clone(), keep: fnode.keep.clone() };
            let input = fnode.inputs[0];
            let keys = plan.nodes[id].input_keys[slot]
                .iter()
                .map(|p| fnode.keep.as_ref().map_or(*p, |k| k[*p]))
                .collect();
            plan.nodes[f].absorbed_into = Some(id);
            let host = &mut plan.nodes[id];
            host.inputs[slot] = input;
            host.input_keys[slot] = keys;
            host.pre[slot].push(step);
        }
    }
    // consumers of an operator fused upward read its host instead
    for &id in &order {
        let inputs: Vec<_> = plan.nodes[id].inputs.iter().map(|i| plan.host_of(*i)).collect();
        plan.nodes[id].inputs = inputs;
    }
}
