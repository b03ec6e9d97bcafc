//! Security labels for expressions and operators.
//!
//! An operator is `High` when it must run obliviously. Scans are always
//! `Low`; a filter takes its predicate's label; multi-tuple operators take
//! the label of the most sensitive input they consume; and every operator is
//! at least as high as its children.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::catalog::{Catalog, SecurityLevel};
use crate::error::{Error, Result};
use crate::plan::liveness::{live_inputs, logical_liveness};
use crate::plan::resolve::level_of;
use crate::plan::{Column, Expr, LogicalPlan, NodeId, Op};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, serde::Serialize, serde::Deserialize)]
pub enum Label {
    #[default]
    Low,
    High,
}

impl Label {
    pub fn lub(self, other: Label) -> Label {
        self.max(other)
    }

    pub fn of_level(level: SecurityLevel) -> Label {
        if level.is_sensitive() {
            Label::High
        } else {
            Label::Low
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Low => "low",
            Label::High => "high",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// `Low` iff the expression reads no sensitive attribute.
pub fn label_expression(e: &Expr, schema: &[Column], catalog: &Catalog) -> Label {
    Label::of_level(level_of(e, schema, catalog))
}

/// Least upper bound of the element labels; `Low` when empty.
pub fn label_expression_set<'a>(
    exprs: impl IntoIterator<Item = &'a Expr>,
    schema: &[Column],
    catalog: &Catalog,
) -> Label {
    exprs.into_iter().fold(Label::Low, |acc, e| acc.lub(label_expression(e, schema, catalog)))
}

/// Typing rule that fixes an operator's own label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Rule {
    Scan,
    Filter,
    Join,
    Aggregate,
    Distinct,
    Sort,
    SetOp,
    /// A unary operator is at least as high as its child.
    Nest,
    /// A binary operator with a high child is high.
    NestBin,
}

impl Rule {
    pub fn name(self) -> &'static str {
        match self {
            Rule::Scan => "r-scan",
            Rule::Filter => "r-filter",
            Rule::Join => "r-join",
            Rule::Aggregate => "r-aggregate",
            Rule::Distinct => "r-distinct",
            Rule::Sort => "r-sort",
            Rule::SetOp => "r-setop",
            Rule::Nest => "r-nest",
            Rule::NestBin => "r-nest-bin",
        }
    }

    /// The rule judging `op` itself. Tuple-at-a-time projections are only
    /// constrained by nesting; window numbering is typed like an aggregate and
    /// limit like a sort.
    pub fn for_op(op: &Op) -> Rule {
        match op {
            Op::Scan { .. } => Rule::Scan,
            Op::Filter { .. } => Rule::Filter,
            Op::Project { .. } => Rule::Nest,
            Op::Join { .. } => Rule::Join,
            Op::Aggregate { .. } | Op::WindowNumber { .. } => Rule::Aggregate,
            Op::Distinct => Rule::Distinct,
            Op::Sort { .. } | Op::Limit { .. } => Rule::Sort,
            Op::SetOp { .. } => Rule::SetOp,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledPlan {
    pub plan: LogicalPlan,
    /// Indexed by node id; unreachable nodes stay `Low`.
    pub op_labels: Vec<Label>,
    /// Per node, one label per entry of `Op::expressions`.
    pub expr_labels: Vec<Vec<Label>>,
    /// Live output positions of each reachable node.
    pub live: BTreeMap<NodeId, BTreeSet<usize>>,
}

impl LabeledPlan {
    pub fn label(&self, id: NodeId) -> Label {
        self.op_labels[id]
    }
}

/// The label `id`'s own rule demands, ignoring its children.
pub fn own_requirement(
    plan: &LogicalPlan,
    live: &BTreeMap<NodeId, BTreeSet<usize>>,
    id: NodeId,
    catalog: &Catalog,
) -> Label {
    let node = plan.node(id);
    let input = plan.input_schema(id);
    let exprs = || label_expression_set(node.op.expressions(), &input, catalog);
    match &node.op {
        Op::Scan { .. } | Op::Project { .. } => Label::Low,
        Op::Filter { .. } => exprs(),
        op if op.is_multi_tuple() => {
            // the input set: every input column the operator consumes
            let consumed = live_inputs(plan, live, id);
            let cols = consumed.iter().fold(Label::Low, |acc, i| acc.lub(Label::of_level(input[*i].level)));
            let all = if matches!(op, Op::SetOp { .. }) {
                input.iter().fold(Label::Low, |acc, c| acc.lub(Label::of_level(c.level)))
            } else {
                Label::Low
            };
            exprs().lub(cols).lub(all)
        }
        _ => unreachable!("all operators are covered"),
    }
}

/// Labels every reachable operator bottom-up without the output policy check.
pub fn label_plan_unchecked(plan: LogicalPlan, catalog: &Catalog) -> LabeledPlan {
    let live = logical_liveness(&plan);
    let mut op_labels = vec![Label::Low; plan.nodes.len()];
    let mut expr_labels = vec![Vec::new(); plan.nodes.len()];
    for id in plan.post_order() {
        let node = plan.node(id);
        let input = plan.input_schema(id);
        expr_labels[id] = node.op.expressions().into_iter().map(|e| label_expression(e, &input, catalog)).collect();
        let children = node.children.iter().fold(Label::Low, |acc, c| acc.lub(op_labels[*c]));
        op_labels[id] = own_requirement(&plan, &live, id, catalog).lub(children);
    }
    LabeledPlan { plan, op_labels, expr_labels, live }
}

/// Labels `plan` and rejects it if a private attribute reaches the output.
pub fn label_plan(plan: LogicalPlan, catalog: &Catalog) -> Result<LabeledPlan> {
    if plan.output_schema().iter().any(|c| c.level == SecurityLevel::Private) {
        return Err(Error::Policy("private attribute in output".into()));
    }
    Ok(label_plan_unchecked(plan, catalog))
}

/// A rule an assignment of labels fails.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub node: NodeId,
    pub rule: Rule,
}

/// Replays every rule against `labels` and reports the failures.
pub fn check_rules(plan: &LogicalPlan, labels: &[Label], catalog: &Catalog) -> Vec<Violation> {
    let live = logical_liveness(plan);
    let mut out = Vec::new();
    for id in plan.post_order() {
        let node = plan.node(id);
        let own = Rule::for_op(&node.op);
        if matches!(node.op, Op::Scan { .. }) {
            if labels[id] != Label::Low {
                out.push(Violation { node: id, rule: Rule::Scan });
            }
            continue;
        }
        if labels[id] < own_requirement(plan, &live, id, catalog) {
            out.push(Violation { node: id, rule: own });
        }
        let nest = if node.children.len() > 1 { Rule::NestBin } else { Rule::Nest };
        if node.children.iter().any(|c| labels[*c] > labels[id]) {
            out.push(Violation { node: id, rule: nest });
        }
    }
    out
}
