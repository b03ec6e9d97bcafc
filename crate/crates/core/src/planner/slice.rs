//! Slice keys: public columns that partition an operator's work.

use std::collections::{BTreeMap, BTreeSet};

use super::{PhysNode, PhysicalPlan};
use crate::catalog::SecurityLevel;
use crate::plan::{Column, Expr, NodeId, Op};
use crate::sql::ast::BinOp;

/// Key components, each a set of output positions known to hold equal
/// values. Empty means the operator is not sliceable.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct SliceKey {
    pub components: Vec<Vec<usize>>,
}

impl SliceKey {
    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    fn singletons(positions: &[usize]) -> SliceKey {
        SliceKey { components: positions.iter().map(|p| vec![*p]).collect() }
    }

    /// Index of the component holding `pos`.
    pub fn component_of(&self, pos: usize) -> Option<usize> {
        self.components.iter().position(|c| c.contains(&pos))
    }
}

fn public(schema: &[Column], pos: usize) -> bool {
    schema[pos].level == SecurityLevel::Public
}

fn input_schema(plan: &PhysicalPlan, node: &PhysNode) -> Vec<Column> {
    node.children.iter().flat_map(|c| plan.nodes[*c].schema.clone()).collect()
}

/// Key of an operator that defines its own partitioning, with its edge keys.
/// `None` for filters and projections, which inherit.
fn own_key(plan: &PhysicalPlan, id: NodeId) -> Option<(SliceKey, Vec<Vec<usize>>)> {
    let node = &plan.nodes[id];
    let input = input_schema(plan, node);
    let empty = || Some((SliceKey::default(), vec![Vec::new(); node.children.len()]));
    // a prefix or subset of public column references
    let cols = |exprs: &mut dyn Iterator<Item = &Expr>, prefix: bool| {
        let mut out: Vec<usize> = Vec::new();
        for e in exprs {
            match e.as_column() {
                Some(c) if public(&input, c) => {
                    if !out.contains(&c) {
                        out.push(c);
                    }
                }
                _ if prefix => break,
                _ => {}
            }
        }
        out
    };
    match &node.op {
        Op::Filter { .. } | Op::Project { .. } => None,
        Op::Scan { .. } | Op::Limit { .. } | Op::SetOp { .. } => empty(),
        Op::Join { predicate } => {
            let n_left = plan.nodes[node.children[0]].arity();
            let mut parent: Vec<usize> = (0..input.len()).collect();
            fn find(p: &mut [usize], x: usize) -> usize {
                let mut r = x;
                while p[r] != r {
                    r = p[r];
                }
                p[x] = r;
                r
            }
            let mut touched = BTreeSet::new();
            for c in predicate.iter().flat_map(|p| p.conjuncts()) {
                if let Expr::Binary { op: BinOp::Eq, lhs, rhs } = &c {
                    if let (Some(a), Some(b)) = (lhs.as_column(), rhs.as_column()) {
                        if public(&input, a) && public(&input, b) {
                            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                            parent[ra] = rb;
                            touched.insert(a);
                            touched.insert(b);
                        }
                    }
                }
            }
            let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
            for p in touched {
                let r = find(&mut parent, p);
                groups.entry(r).or_default().push(p);
            }
            let mut comps: Vec<Vec<usize>> = groups
                .into_values()
                .filter(|g| g.iter().any(|p| *p < n_left) && g.iter().any(|p| *p >= n_left))
                .collect();
            comps.sort();
            let left = comps.iter().map(|g| g[0]).collect();
            let right = comps.iter().map(|g| *g.iter().find(|p| **p >= n_left).expect("both sides") - n_left).collect();
            Some((SliceKey { components: comps }, vec![left, right]))
        }
        Op::Aggregate { group_by, .. } => {
            let cs = cols(&mut group_by.iter(), true);
            // group columns lead the output
            let out: Vec<usize> = (0..cs.len())
                .filter(|i| group_by[*i].as_column() == Some(cs[*i]))
                .collect();
            if out.len() != cs.len() {
                return empty();
            }
            Some((SliceKey::singletons(&out), vec![cs]))
        }
        Op::Distinct => {
            let cs: Vec<usize> = (0..input.len()).filter(|p| public(&input, *p)).collect();
            Some((SliceKey::singletons(&cs), vec![cs]))
        }
        Op::Sort { keys } => {
            // partitions are emitted in ascending order, so only an ascending
            // prefix can be sliced, and only when partitions run separately
            if !plan.config.slicing {
                return empty();
            }
            let mut it = keys.iter().take_while(|k| !k.desc).map(|k| &k.expr);
            let cs = cols(&mut it, true);
            Some((SliceKey::singletons(&cs), vec![cs]))
        }
        Op::WindowNumber { partition_by, .. } => {
            let cs = cols(&mut partition_by.iter(), false);
            Some((SliceKey::singletons(&cs), vec![cs]))
        }
    }
}

/// Key of a filter or projection inherited from its child.
fn from_child(plan: &PhysicalPlan, id: NodeId) -> (SliceKey, Vec<Vec<usize>>) {
    let node = &plan.nodes[id];
    let child = &plan.nodes[node.children[0]];
    match &node.op {
        Op::Filter { .. } => {
            let edge = child.key.components.iter().map(|c| c[0]).collect();
            (child.key.clone(), vec![edge])
        }
        Op::Project { exprs } => {
            let mut comps = Vec::new();
            let mut edge = Vec::new();
            for comp in &child.key.components {
                let outs: Vec<usize> =
                    (0..exprs.len()).filter(|p| exprs[*p].as_column().is_some_and(|c| comp.contains(&c))).collect();
                let Some(first) = outs.first() else {
                    return (SliceKey::default(), vec![Vec::new()]);
                };
                edge.push(exprs[*first].as_column().expect("column"));
                comps.push(outs);
            }
            (SliceKey { components: comps }, vec![edge])
        }
        _ => unreachable!("only filters and projections inherit"),
    }
}

/// Key of a filter or projection taken from the positions its parents slice
/// it by.
fn from_parents(plan: &PhysicalPlan, id: NodeId, parents: &[(NodeId, usize)]) -> Option<(SliceKey, Vec<Vec<usize>>)> {
    let (first, rest) = parents.split_first()?;
    let ek = &plan.nodes[first.0].edge_keys[first.1];
    if ek.is_empty() || rest.iter().any(|(p, s)| &plan.nodes[*p].edge_keys[*s] != ek) {
        return None;
    }
    let edge = match &plan.nodes[id].op {
        Op::Filter { .. } => ek.clone(),
        Op::Project { exprs } => ek.iter().map(|p| exprs[*p].as_column()).collect::<Option<Vec<_>>>()?,
        _ => return None,
    };
    Some((SliceKey::singletons(ek), vec![edge]))
}

/// Computes every reachable operator's key and edge keys. Filters and
/// projections first take their child's key, then a top-down pass lets them
/// adopt the key their parents slice them by.
pub fn infer_slice_keys(plan: &mut PhysicalPlan) {
    let order = plan.post_order();
    if !plan.config.slice_keys {
        for id in order {
            let n = plan.nodes[id].children.len();
            plan.nodes[id].key = SliceKey::default();
            plan.nodes[id].edge_keys = vec![Vec::new(); n];
        }
        return;
    }
    for &id in &order {
        let (key, edges) = own_key(plan, id).unwrap_or_else(|| from_child(plan, id));
        plan.nodes[id].key = key;
        plan.nodes[id].edge_keys = edges;
    }
    let parents = plan.parents();
    for &id in order.iter().rev() {
        if !matches!(plan.nodes[id].op, Op::Filter { .. } | Op::Project { .. }) {
            continue;
        }
        if let Some((key, edges)) = from_parents(plan, id, &parents[&id]) {
            plan.nodes[id].key = key;
            plan.nodes[id].edge_keys = edges;
        }
    }
}

/// Whether `parent` and its child at `slot` are sliced alike: the positions
/// the parent slices the child by cover each of the child's key components
/// exactly once.
pub fn shares_slice_key(plan: &PhysicalPlan, parent: NodeId, slot: usize) -> bool {
    let p = &plan.nodes[parent];
    let child = &plan.nodes[p.children[slot]];
    let ek = &p.edge_keys[slot];
    if p.key.is_empty() || ek.is_empty() || ek.len() != child.key.len() {
        return false;
    }
    let mut hit = BTreeSet::new();
    ek.iter().all(|pos| child.key.component_of(*pos).is_some_and(|c| hit.insert(c)))
}
