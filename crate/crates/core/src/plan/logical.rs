//! Logical operator DAG.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::expr::Expr;
use crate::catalog::SecurityLevel;
use crate::sql::ast::AggFunc;
use crate::value::ValueType;

pub type NodeId = usize;

/// One output attribute of an operator.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    /// Table binding the column was reached through, if any.
    pub qualifier: Option<String>,
    pub value_type: ValueType,
    /// Provenance level: the most sensitive attribute it derives from.
    pub level: SecurityLevel,
}

impl Column {
    pub fn new(name: &str, value_type: ValueType, level: SecurityLevel) -> Column {
        Column { name: name.to_string(), qualifier: None, value_type, level }
    }
}

/// Names for rendering expressions over `cols`, qualified where a bare name
/// would be ambiguous.
pub fn display_names(cols: &[Column]) -> Vec<String> {
    cols.iter()
        .map(|c| {
            let dup = cols.iter().filter(|o| o.name == c.name).count() > 1;
            match (&c.qualifier, dup) {
                (Some(q), true) => format!("{q}.{}", c.name),
                _ => c.name.clone(),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AggCall {
    pub func: AggFunc,
    /// `None` for `COUNT(*)`.
    pub arg: Option<Expr>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SortKey {
    pub expr: Expr,
    pub desc: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SetOpKind {
    Union,
    Intersect,
    Except,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Op {
    /// `columns` are indices into the table definition.
    Scan { table: String, columns: Vec<usize> },
    Filter { predicate: Expr },
    Project { exprs: Vec<Expr> },
    /// Inner join; `None` is a cross product.
    Join { predicate: Option<Expr> },
    Aggregate { group_by: Vec<Expr>, aggs: Vec<AggCall> },
    /// Duplicate elimination over every input column.
    Distinct,
    Sort { keys: Vec<SortKey> },
    Limit { k: u64 },
    /// Appends a 1-based row number within each partition.
    WindowNumber { partition_by: Vec<Expr>, order_by: Vec<SortKey> },
    /// Typed but never executed.
    SetOp { kind: SetOpKind },
}

impl Op {
    pub fn name(&self) -> &'static str {
        match self {
            Op::Scan { .. } => "Scan",
            Op::Filter { .. } => "Filter",
            Op::Project { .. } => "Project",
            Op::Join { .. } => "Join",
            Op::Aggregate { .. } => "Aggregate",
            Op::Distinct => "Distinct",
            Op::Sort { .. } => "Sort",
            Op::Limit { .. } => "Limit",
            Op::WindowNumber { .. } => "WindowNumber",
            Op::SetOp { kind: SetOpKind::Union } => "Union",
            Op::SetOp { kind: SetOpKind::Intersect } => "Intersect",
            Op::SetOp { kind: SetOpKind::Except } => "Except",
        }
    }

    /// Operators that consume many tuples at once; the rest are
    /// tuple-at-a-time.
    pub fn is_multi_tuple(&self) -> bool {
        !matches!(self, Op::Scan { .. } | Op::Filter { .. } | Op::Project { .. })
    }

    /// Every expression the operator evaluates.
    pub fn expressions(&self) -> Vec<&Expr> {
        match self {
            Op::Scan { .. } | Op::Distinct | Op::Limit { .. } | Op::SetOp { .. } => vec![],
            Op::Filter { predicate } => vec![predicate],
            Op::Project { exprs } => exprs.iter().collect(),
            Op::Join { predicate } => predicate.iter().collect(),
            Op::Aggregate { group_by, aggs } => {
                group_by.iter().chain(aggs.iter().filter_map(|a| a.arg.as_ref())).collect()
            }
            Op::Sort { keys } => keys.iter().map(|k| &k.expr).collect(),
            Op::WindowNumber { partition_by, order_by } => {
                partition_by.iter().chain(order_by.iter().map(|k| &k.expr)).collect()
            }
        }
    }

    /// Rewrites every column reference.
    pub fn remap(&self, f: &dyn Fn(usize) -> usize) -> Op {
        let keys = |ks: &[SortKey]| ks.iter().map(|k| SortKey { expr: k.expr.remap(f), desc: k.desc }).collect();
        match self {
            Op::Scan { .. } | Op::Distinct | Op::Limit { .. } | Op::SetOp { .. } => self.clone(),
            Op::Filter { predicate } => Op::Filter { predicate: predicate.remap(f) },
            Op::Project { exprs } => Op::Project { exprs: exprs.iter().map(|e| e.remap(f)).collect() },
            Op::Join { predicate } => Op::Join { predicate: predicate.as_ref().map(|p| p.remap(f)) },
            Op::Aggregate { group_by, aggs } => Op::Aggregate {
                group_by: group_by.iter().map(|e| e.remap(f)).collect(),
                aggs: aggs.iter().map(|a| AggCall { func: a.func, arg: a.arg.as_ref().map(|e| e.remap(f)) }).collect(),
            },
            Op::Sort { keys: ks } => Op::Sort { keys: keys(ks) },
            Op::WindowNumber { partition_by, order_by } => Op::WindowNumber {
                partition_by: partition_by.iter().map(|e| e.remap(f)).collect(),
                order_by: keys(order_by),
            },
        }
    }

    /// `Name(args)` rendering given the names of the input and output columns.
    pub fn describe(&self, input: &[String], output: &[String]) -> String {
        let list = |es: &[Expr]| es.iter().map(|e| e.display(input).to_string()).collect::<Vec<_>>().join(", ");
        let keys = |ks: &[SortKey]| {
            ks.iter()
                .map(|k| format!("{}{}", k.expr.display(input), if k.desc { " DESC" } else { "" }))
                .collect::<Vec<_>>()
                .join(", ")
        };
        let args = match self {
            Op::Scan { table, .. } => table.clone(),
            Op::Filter { predicate } => predicate.display(input).to_string(),
            Op::Project { exprs } => exprs
                .iter()
                .zip(output)
                .map(|(e, name)| {
                    let s = e.display(input).to_string();
                    if e.as_column().is_some_and(|i| input[i] == *name || input[i].ends_with(&format!(".{name}"))) {
                        s
                    } else {
                        format!("{s} AS {name}")
                    }
                })
                .collect::<Vec<_>>()
                .join(", "),
            Op::Join { predicate: Some(p) } => p.display(input).to_string(),
            Op::Join { predicate: None } => "cross".to_string(),
            Op::Aggregate { group_by, aggs } => {
                let calls: Vec<String> = aggs
                    .iter()
                    .zip(&output[group_by.len().min(output.len())..])
                    .map(|(a, name)| {
                        let arg = match (&a.arg, a.func) {
                            (None, _) => "*".to_string(),
                            (Some(e), AggFunc::CountDistinct) => format!("DISTINCT {}", e.display(input)),
                            (Some(e), _) => e.display(input).to_string(),
                        };
                        format!("{}({arg}) AS {name}", a.func.name().to_ascii_uppercase())
                    })
                    .collect();
                if group_by.is_empty() {
                    calls.join(", ")
                } else {
                    format!("{}; {}", list(group_by), calls.join(", "))
                }
            }
            Op::Distinct => input.join(", "),
            Op::Sort { keys: ks } => keys(ks),
            Op::Limit { k } => k.to_string(),
            Op::WindowNumber { partition_by, order_by } => {
                let mut s = String::new();
                if !partition_by.is_empty() {
                    let _ = write!(s, "PARTITION BY {}", list(partition_by));
                }
                if !order_by.is_empty() {
                    if !s.is_empty() {
                        s.push(' ');
                    }
                    let _ = write!(s, "ORDER BY {}", keys(order_by));
                }
                if let Some(name) = output.last() {
                    let _ = write!(s, " AS {name}");
                }
                s.trim_start().to_string()
            }
            Op::SetOp { .. } => String::new(),
        };
        format!("{}({args})", self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Node {
    pub op: Op,
    pub children: Vec<NodeId>,
    /// Output schema.
    pub schema: Vec<Column>,
}

impl Node {
    pub fn arity(&self) -> usize {
        self.schema.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LogicalPlan {
    pub nodes: Vec<Node>,
    pub root: NodeId,
    /// WITH-clause names and the node each resolves to.
    pub ctes: BTreeMap<String, NodeId>,
}

impl LogicalPlan {
    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id]
    }

    pub fn output_schema(&self) -> &[Column] {
        &self.nodes[self.root].schema
    }

    /// Concatenated output schemas of `id`'s children.
    pub fn input_schema(&self, id: NodeId) -> Vec<Column> {
        self.nodes[id].children.iter().flat_map(|c| self.nodes[*c].schema.clone()).collect()
    }

    /// Nodes reachable from the root, children before parents, each once.
    pub fn post_order(&self) -> Vec<NodeId> {
        post_order(self.root, &|n| self.nodes[n].children.clone())
    }

    /// Parent edges of each reachable node, as (parent, child slot).
    pub fn parents(&self) -> BTreeMap<NodeId, Vec<(NodeId, usize)>> {
        let mut out: BTreeMap<NodeId, Vec<(NodeId, usize)>> = BTreeMap::new();
        for id in self.post_order() {
            out.entry(id).or_default();
            for (slot, c) in self.nodes[id].children.iter().enumerate() {
                out.entry(*c).or_default().push((id, slot));
            }
        }
        out
    }

    pub fn describe(&self, id: NodeId) -> String {
        let node = &self.nodes[id];
        // these operators pass their input through, and their own schema
        // carries the binding names of a shared input
        let passes = matches!(node.op, Op::Join { .. } | Op::Filter { .. } | Op::Sort { .. } | Op::Limit { .. } | Op::Distinct);
        let input = display_names(&if passes { node.schema.clone() } else { self.input_schema(id) });
        let output: Vec<String> = self.nodes[id].schema.iter().map(|c| c.name.clone()).collect();
        self.nodes[id].op.describe(&input, &output)
    }

    /// One line per reachable operator, children first.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for id in self.post_order() {
            let _ = writeln!(out, "{}", self.describe(id));
        }
        out
    }
}

/// Children-first traversal from `root`, visiting shared nodes once.
pub fn post_order(root: usize, children: &dyn Fn(usize) -> Vec<usize>) -> Vec<usize> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    let mut stack = vec![(root, false)];
    while let Some((n, expanded)) = stack.pop() {
        if expanded {
            out.push(n);
            continue;
        }
        if !seen.insert(n) {
            continue;
        }
        stack.push((n, true));
        for c in children(n).into_iter().rev() {
            if !seen.contains(&c) {
                stack.push((c, false));
            }
        }
    }
    out
}
