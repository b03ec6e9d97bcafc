//! Attribute trimming: every operator outputs only the columns some ancestor
//! reads.

use std::collections::{BTreeMap, BTreeSet};

use super::{Mode, PhysicalPlan, SliceKey};
use crate::plan::liveness::required_inputs;
use crate::plan::{Column, NodeId, Op};

/// Plain operators are always trimmed so intermediate results leaving a
/// provider carry only what later public operators need; engine operators
/// only when enabled. Aggregates and distincts keep their whole output.
fn trimmable(plan: &PhysicalPlan, id: NodeId) -> bool {
    let node = &plan.nodes[id];
    (node.mode == Mode::Plain || plan.config.trim) && !matches!(node.op, Op::Aggregate { .. } | Op::Distinct)
}

fn liveness(plan: &PhysicalPlan, order: &[NodeId]) -> BTreeMap<NodeId, BTreeSet<usize>> {
    let mut live: BTreeMap<NodeId, BTreeSet<usize>> = BTreeMap::new();
    live.insert(plan.root, (0..plan.nodes[plan.root].arity()).collect());
    for &id in order.iter().rev() {
        let node = &plan.nodes[id];
        let mut out = live.get(&id).cloned().unwrap_or_default();
        if !trimmable(plan, id) {
            out = (0..node.arity()).collect();
        }
        if node.mode == Mode::Sliced {
            // partitioning needs a surviving member of every key component
            for comp in &node.key.components {
                if !comp.iter().any(|p| out.contains(p)) {
                    out.insert(comp[0]);
                }
            }
        }
        live.insert(id, out.clone());
        let arities: Vec<usize> = node.children.iter().map(|c| plan.nodes[*c].arity()).collect();
        let needs = required_inputs(&node.op, &arities, &out);
        for (slot, (c, need)) in node.children.iter().zip(needs).enumerate() {
            let entry = live.entry(*c).or_default();
            entry.extend(need);
            if node.mode == Mode::Sliced {
                entry.extend(node.edge_keys[slot].iter().copied());
            }
        }
    }
    live
}

/// Narrows every operator's output to its live columns and rewrites
/// expressions, keys and edge keys to the new positions.
pub fn trim_attributes(plan: &mut PhysicalPlan) {
    let order = plan.post_order();
    let live = liveness(plan, &order);
    // old output position -> new output position
    let mut maps: BTreeMap<NodeId, Vec<Option<usize>>> = BTreeMap::new();
    for &id in &order {
        let node = plan.nodes[id].clone();
        let live_out: Vec<usize> = live[&id].iter().copied().collect();
        let child_maps: Vec<&Vec<Option<usize>>> = node.children.iter().map(|c| &maps[c]).collect();
        let old_arities: Vec<usize> = child_maps.iter().map(|m| m.len()).collect();
        let new_arities: Vec<usize> = node.children.iter().map(|c| plan.nodes[*c].arity()).collect();
        let in_map = |q: usize| -> usize {
            let (mut old_off, mut new_off) = (0, 0);
            for (i, m) in child_maps.iter().enumerate() {
                if q < old_off + old_arities[i] {
                    return new_off + m[q - old_off].expect("operator reads only live inputs");
                }
                old_off += old_arities[i];
                new_off += new_arities[i];
            }
            unreachable!("input position out of range")
        };
        // new input position -> old input position
        let mut inv: Vec<usize> = Vec::new();
        let mut old_off = 0;
        for (i, m) in child_maps.iter().enumerate() {
            let mut pairs: Vec<(usize, usize)> =
                m.iter().enumerate().filter_map(|(old, new)| new.map(|n| (n, old_off + old))).collect();
            pairs.sort();
            inv.extend(pairs.into_iter().map(|(_, old)| old));
            old_off += old_arities[i];
        }
        let old_full = &node.full_schema;
        let pick = |ps: &[usize]| -> Vec<Column> { ps.iter().map(|p| old_full[*p].clone()).collect() };

        let (op, full_schema, keep_full): (Op, Vec<Column>, Vec<usize>) = match &node.op {
            Op::Scan { table, columns } => {
                let cols = live_out.iter().map(|p| columns[*p]).collect();
                (Op::Scan { table: table.clone(), columns: cols }, pick(&live_out), (0..live_out.len()).collect())
            }
            Op::Project { exprs } => {
                let es = live_out.iter().map(|p| exprs[*p].remap(&in_map)).collect();
                (Op::Project { exprs: es }, pick(&live_out), (0..live_out.len()).collect())
            }
            Op::Aggregate { .. } => {
                let n = old_full.len();
                (node.op.remap(&in_map), old_full.clone(), (0..n).collect())
            }
            Op::WindowNumber { .. } => {
                let n_old = old_full.len() - 1;
                let mut full = pick(&inv);
                full.push(old_full[n_old].clone());
                let keep = live_out.iter().map(|p| if *p == n_old { inv.len() } else { in_map(*p) }).collect();
                (node.op.remap(&in_map), full, keep)
            }
            Op::Filter { .. } | Op::Sort { .. } | Op::Limit { .. } | Op::Join { .. } | Op::Distinct => {
                let keep = live_out.iter().map(|p| in_map(*p)).collect();
                (node.op.remap(&in_map), pick(&inv), keep)
            }
            Op::SetOp { .. } => unreachable!("rejected before trimming"),
        };

        let identity = keep_full.len() == full_schema.len() && keep_full.iter().enumerate().all(|(i, p)| i == *p);
        let schema: Vec<Column> = keep_full.iter().map(|p| full_schema[*p].clone()).collect();
        let mut out_map = vec![None; node.schema.len()];
        for (new, old) in live_out.iter().enumerate() {
            out_map[*old] = Some(new);
        }
        let key = SliceKey {
            components: node
                .key
                .components
                .iter()
                .map(|c| c.iter().filter_map(|p| out_map[*p]).collect::<Vec<_>>())
                .filter(|c: &Vec<usize>| !c.is_empty())
                .collect(),
        };
        let edge_keys = node
            .edge_keys
            .iter()
            .zip(&child_maps)
            .map(|(ek, m)| ek.iter().map(|p| m[*p]).collect::<Option<Vec<_>>>().unwrap_or_default())
            .collect();

        let n = &mut plan.nodes[id];
        n.op = op;
        n.full_schema = full_schema;
        n.schema = schema;
        n.keep = if identity { None } else { Some(keep_full) };
        n.key = key;
        n.edge_keys = edge_keys;
        n.inputs = n.children.clone();
        maps.insert(id, out_map);
    }
}
