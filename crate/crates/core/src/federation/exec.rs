//! Host execution: one physical host with its fused steps, either in
//! plaintext over a `Relation` or obliviously over a `PaddedRelation`.

use std::collections::BTreeMap;

use crate::catalog::Relation;
use crate::error::{Error, Result};
use crate::oblivious::{Engine, PaddedRelation, SortSpec};
use crate::plan::{Column, Env, Expr, NodeId, Op, SortKey};
use crate::planner::{FusedStep, Mode, PhysNode, PhysicalPlan};
use crate::value::{Value, ValueType};

/// Lookup of physical operators by id.
pub trait Nodes {
    fn get(&self, id: NodeId) -> &PhysNode;
}

impl Nodes for PhysicalPlan {
    fn get(&self, id: NodeId) -> &PhysNode {
        &self.nodes[id]
    }
}

impl Nodes for BTreeMap<NodeId, PhysNode> {
    fn get(&self, id: NodeId) -> &PhysNode {
        &self[&id]
    }
}

pub fn rel_schema(cols: &[Column]) -> Vec<(String, ValueType)> {
    cols.iter().map(|c| (c.name.clone(), c.value_type)).collect()
}

/// Output columns of a host after its fused steps.
pub fn host_columns<N: Nodes>(nodes: &N, host: NodeId) -> &[Column] {
    let node = nodes.get(host);
    match node.post.last() {
        Some(step) => &nodes.get(step.node()).schema,
        None => &node.schema,
    }
}

fn pick(row: &[Value], keep: &[usize]) -> Vec<Value> {
    keep.iter().map(|k| row[*k].clone()).collect()
}

fn key_cmp(a: &[Value], b: &[Value], keys: &[SortKey]) -> std::cmp::Ordering {
    for ((x, y), k) in a.iter().zip(b).zip(keys) {
        let o = if k.desc { y.cmp(x) } else { x.cmp(y) };
        if o.is_ne() {
            return o;
        }
    }
    std::cmp::Ordering::Equal
}

fn plain_step<N: Nodes>(nodes: &N, step: &FusedStep, rel: Relation, env: &Env) -> Relation {
    let schema = rel_schema(&nodes.get(step.node()).schema);
    match step {
        FusedStep::Filter { predicate, keep, .. } => {
            let rows = rel.rows.into_iter().filter(|r| predicate.holds(r, env));
            let rows = match keep {
                Some(k) => rows.map(|r| pick(&r, k)).collect(),
                None => rows.collect(),
            };
            Relation { schema, rows }
        }
        FusedStep::Project { exprs, .. } => Relation {
            schema,
            rows: rel.rows.iter().map(|r| exprs.iter().map(|e| e.eval(r, env)).collect()).collect(),
        },
    }
}

/// Grouped or global aggregation; a global aggregate always yields one row.
fn plain_aggregate(rows: &[Vec<Value>], group_by: &[Expr], aggs: &[crate::plan::AggCall], env: &Env) -> Vec<Vec<Value>> {
    use crate::oblivious::{acc_fold, acc_start};
    let mut groups: BTreeMap<Vec<Value>, Vec<Value>> = BTreeMap::new();
    if group_by.is_empty() {
        groups.insert(Vec::new(), aggs.iter().map(|a| acc_start(a.func)).collect());
    }
    for r in rows {
        let key: Vec<Value> = group_by.iter().map(|e| e.eval(r, env)).collect();
        let acc = groups.entry(key).or_insert_with(|| aggs.iter().map(|a| acc_start(a.func)).collect());
        for (slot, a) in acc.iter_mut().zip(aggs) {
            let v = crate::oblivious::acc_input(a, true, a.arg.as_ref().map(|e| e.eval(r, env)).as_ref());
            *slot = acc_fold(a.func, slot, &v);
        }
    }
    groups.into_iter().map(|(mut k, acc)| {
        k.extend(acc);
        k
    }).collect()
}

/// Evaluates a host in plaintext. A scan's single input is its whole table.
pub fn run_plain_host<N: Nodes>(nodes: &N, host: NodeId, mut inputs: Vec<Relation>, env: &Env) -> Result<Relation> {
    let node = nodes.get(host);
    for (slot, steps) in node.pre.iter().enumerate() {
        for step in steps {
            let rel = std::mem::replace(&mut inputs[slot], Relation::new(Vec::new()));
            inputs[slot] = plain_step(nodes, step, rel, env);
        }
    }
    let full = rel_schema(&node.full_schema);
    let rows: Vec<Vec<Value>> = match &node.op {
        Op::Scan { columns, .. } => inputs[0].rows.iter().map(|r| pick(r, columns)).collect(),
        Op::Filter { predicate } => inputs.remove(0).rows.into_iter().filter(|r| predicate.holds(r, env)).collect(),
        Op::Project { exprs } => inputs[0].rows.iter().map(|r| exprs.iter().map(|e| e.eval(r, env)).collect()).collect(),
        Op::Join { predicate } => {
            let mut out = Vec::new();
            for l in &inputs[0].rows {
                for r in &inputs[1].rows {
                    let row: Vec<Value> = l.iter().chain(r).cloned().collect();
                    if predicate.as_ref().is_none_or(|p| p.holds(&row, env)) {
                        out.push(row);
                    }
                }
            }
            out
        }
        Op::Aggregate { group_by, aggs } => plain_aggregate(&inputs[0].rows, group_by, aggs, env),
        Op::Distinct => {
            let mut seen = std::collections::BTreeSet::new();
            inputs.remove(0).rows.into_iter().filter(|r| seen.insert(r.clone())).collect()
        }
        Op::Sort { keys } => {
            let mut keyed: Vec<(Vec<Value>, Vec<Value>)> = inputs
                .remove(0)
                .rows
                .into_iter()
                .map(|r| (keys.iter().map(|k| k.expr.eval(&r, env)).collect(), r))
                .collect();
            keyed.sort_by(|a, b| key_cmp(&a.0, &b.0, keys));
            keyed.into_iter().map(|(_, r)| r).collect()
        }
        Op::Limit { k } => {
            let mut rows = inputs.remove(0).rows;
            rows.truncate(usize::try_from(*k).unwrap_or(usize::MAX));
            rows
        }
        Op::WindowNumber { partition_by, order_by } => {
            let mut keys: Vec<SortKey> = partition_by.iter().map(|e| SortKey { expr: e.clone(), desc: false }).collect();
            keys.extend(order_by.iter().cloned());
            let mut keyed: Vec<(Vec<Value>, Vec<Value>)> = inputs
                .remove(0)
                .rows
                .into_iter()
                .map(|r| (keys.iter().map(|k| k.expr.eval(&r, env)).collect(), r))
                .collect();
            keyed.sort_by(|a, b| key_cmp(&a.0, &b.0, &keys));
            let p = partition_by.len();
            let mut out = Vec::with_capacity(keyed.len());
            let mut prev: Option<(Vec<Value>, i64)> = None;
            for (k, mut r) in keyed {
                let n = match &prev {
                    Some((pk, n)) if pk[..] == k[..p] => n + 1,
                    _ => 1,
                };
                prev = Some((k[..p].to_vec(), n));
                r.push(Value::Int(n));
                out.push(r);
            }
            out
        }
        Op::SetOp { .. } => return Err(Error::Execute("set operations are not executable".into())),
    };
    let mut rel = match &node.keep {
        Some(k) => Relation { schema: rel_schema(&node.schema), rows: rows.iter().map(|r| pick(r, k)).collect() },
        None => Relation { schema: full, rows },
    };
    for step in &node.post {
        rel = plain_step(nodes, step, rel, env);
    }
    Ok(rel)
}

fn secure_step<N: Nodes>(eng: &mut Engine, nodes: &N, step: &FusedStep, rel: PaddedRelation) -> PaddedRelation {
    match step {
        FusedStep::Filter { predicate, keep, .. } => {
            let out = eng.fused_filter(rel, predicate);
            match keep {
                Some(k) => out.project_columns(k),
                None => out,
            }
        }
        FusedStep::Project { node, exprs } => eng.fused_project(rel, exprs, rel_schema(&nodes.get(*node).schema)),
    }
}

/// Whether `host` is a limit whose input is already a single sorted run,
/// so valid slots are known to come first.
pub fn limit_input_sorted<N: Nodes>(nodes: &N, host: NodeId) -> bool {
    let node = nodes.get(host);
    let input = nodes.get(node.inputs[0]);
    matches!(input.op, Op::Sort { .. }) && input.mode == Mode::Secure && node.pre[0].is_empty()
}

/// Evaluates a host obliviously, charging its costs to the host.
pub fn run_secure_host<N: Nodes>(
    eng: &mut Engine,
    nodes: &N,
    host: NodeId,
    mut inputs: Vec<PaddedRelation>,
) -> Result<PaddedRelation> {
    let node = nodes.get(host);
    eng.at(host, node.op.name());
    for (slot, steps) in node.pre.iter().enumerate() {
        for step in steps {
            let rel = std::mem::replace(&mut inputs[slot], PaddedRelation::empty(Vec::new()));
            inputs[slot] = secure_step(eng, nodes, step, rel);
        }
    }
    let full = rel_schema(&node.full_schema);
    let out = match &node.op {
        Op::Filter { predicate } => eng.filter(inputs.remove(0), predicate),
        Op::Project { exprs } => eng.project(inputs.remove(0), exprs, full),
        Op::Join { predicate } => {
            let r = inputs.remove(1);
            eng.join(inputs.remove(0), r, predicate.as_ref())
        }
        Op::Aggregate { group_by, aggs } => eng.aggregate(inputs.remove(0), group_by, aggs, full),
        Op::Distinct => eng.distinct(inputs.remove(0)),
        Op::Sort { keys } => eng.sort(inputs.remove(0), &SortSpec::from_keys(keys)),
        Op::Limit { k } => {
            let compact = !limit_input_sorted(nodes, host);
            eng.limit(inputs.remove(0), *k, compact)
        }
        Op::WindowNumber { partition_by, order_by } => {
            let name = full.last().map(|c| c.0.clone()).unwrap_or_default();
            eng.window(inputs.remove(0), partition_by, order_by, &name)
        }
        Op::Scan { .. } | Op::SetOp { .. } => {
            return Err(Error::Execute(format!("{} cannot run in the oblivious engine", node.op.name())))
        }
    };
    let mut out = match &node.keep {
        Some(k) => out.project_columns(k),
        None => out,
    };
    out.schema = rel_schema(&node.schema);
    for step in &node.post {
        out = secure_step(eng, nodes, step, out);
    }
    eng.finish(&out);
    Ok(out)
}
