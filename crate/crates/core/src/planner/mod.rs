//! Physical planning: slice keys, execution modes, split operators, secure
//! semi-join tracks, attribute trimming and operator coalescing.

mod coalesce;
mod explain;
mod modes;
pub mod regions;
mod slice;
mod trim;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::catalog::{Catalog, Distribution, SecurityLevel};
use crate::error::Result;
use crate::plan::{compile, Column, Expr, LogicalPlan, NodeId, Op};
use crate::typer::{label_plan, Label};

pub use coalesce::coalesce;
pub use explain::explain;
pub use modes::{assign_execution_modes, split_operators};
pub use regions::{Region, RegionTracks};
pub use slice::{infer_slice_keys, shares_slice_key, SliceKey};
pub use trim::trim_attributes;

/// Which rewrites the planner applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    /// Treat every attribute as at least protected.
    pub raise_levels: bool,
    pub slice_keys: bool,
    pub split: bool,
    pub semi_join: bool,
    /// Run sliced regions one partition at a time.
    pub slicing: bool,
    pub trim: bool,
    pub coalesce: bool,
}

impl OptimizerConfig {
    /// Every operator above the scans runs as one secure program.
    pub fn baseline() -> Self {
        OptimizerConfig {
            raise_levels: true,
            slice_keys: false,
            split: false,
            semi_join: false,
            slicing: false,
            trim: false,
            coalesce: false,
        }
    }

    /// Split operators and the secure semi-join, without slicing.
    pub fn smc_minimized() -> Self {
        OptimizerConfig {
            raise_levels: false,
            slice_keys: true,
            split: true,
            semi_join: true,
            slicing: false,
            trim: false,
            coalesce: false,
        }
    }

    pub fn full() -> Self {
        OptimizerConfig {
            raise_levels: false,
            slice_keys: true,
            split: true,
            semi_join: true,
            slicing: true,
            trim: true,
            coalesce: true,
        }
    }

    pub fn by_name(name: &str) -> Option<Self> {
        match name {
            "baseline" => Some(Self::baseline()),
            "smc-minimized" | "smc_minimized" => Some(Self::smc_minimized()),
            "full" => Some(Self::full()),
            _ => None,
        }
    }
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self::full()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Mode {
    Plain,
    Sliced,
    Secure,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Phase {
    Whole,
    /// Per-provider partial work of a split operator.
    Low,
    /// The combining half of a split operator.
    High,
}

/// Where an operator runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Site {
    /// At each provider over its own rows.
    Local,
    /// At the broker, over public intermediate results.
    BrokerPlain,
    /// In the oblivious engine.
    Engine,
}

/// A single-tuple operator folded into a neighbouring host.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum FusedStep {
    Filter { node: NodeId, predicate: Expr, keep: Option<Vec<usize>> },
    Project { node: NodeId, exprs: Vec<Expr> },
}

impl FusedStep {
    pub fn node(&self) -> NodeId {
        match self {
            FusedStep::Filter { node, .. } | FusedStep::Project { node, .. } => *node,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhysNode {
    pub op: Op,
    pub children: Vec<NodeId>,
    /// Output before `keep` is applied.
    pub full_schema: Vec<Column>,
    /// Output schema.
    pub schema: Vec<Column>,
    /// Positions of `full_schema` retained after trimming.
    pub keep: Option<Vec<usize>>,
    pub label: Label,
    pub mode: Mode,
    pub phase: Phase,
    pub site: Site,
    /// Components over output positions.
    pub key: SliceKey,
    /// Per child: one child output position per key component.
    pub edge_keys: Vec<Vec<usize>>,
    /// Host this operator was coalesced into.
    pub absorbed_into: Option<NodeId>,
    /// Effective inputs once coalesced operators are skipped.
    pub inputs: Vec<NodeId>,
    /// `edge_keys` restated over the effective inputs' outputs.
    pub input_keys: Vec<Vec<usize>>,
    /// Filters applied to each input before the operator.
    pub pre: Vec<Vec<FusedStep>>,
    /// Steps applied to the output.
    pub post: Vec<FusedStep>,
}

impl PhysNode {
    pub fn arity(&self) -> usize {
        self.schema.len()
    }

    pub fn is_host(&self) -> bool {
        self.absorbed_into.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhysicalPlan {
    pub nodes: Vec<PhysNode>,
    pub root: NodeId,
    pub config: OptimizerConfig,
    /// Catalog the plan was labeled against.
    pub catalog: Catalog,
}

impl PhysicalPlan {
    pub fn node(&self, id: NodeId) -> &PhysNode {
        &self.nodes[id]
    }

    /// Reachable operators, children first.
    pub fn post_order(&self) -> Vec<NodeId> {
        crate::plan::logical::post_order(self.root, &|n| self.nodes[n].children.clone())
    }

    /// Parent edges (parent, slot) of every reachable operator.
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

    /// The host that executes `id`.
    pub fn host_of(&self, mut id: NodeId) -> NodeId {
        while let Some(h) = self.nodes[id].absorbed_into {
            id = h;
        }
        id
    }

    /// The host whose output is the query result.
    pub fn root_host(&self) -> NodeId {
        self.host_of(self.root)
    }

    /// Reachable hosts, inputs first.
    pub fn host_order(&self) -> Vec<NodeId> {
        crate::plan::logical::post_order(self.root_host(), &|n| self.nodes[n].inputs.clone())
    }

    /// Consumers (host, slot) of every reachable host.
    pub fn host_parents(&self) -> BTreeMap<NodeId, Vec<(NodeId, usize)>> {
        let mut out: BTreeMap<NodeId, Vec<(NodeId, usize)>> = BTreeMap::new();
        for id in self.host_order() {
            out.entry(id).or_default();
            for (slot, c) in self.nodes[id].inputs.iter().enumerate() {
                out.entry(*c).or_default().push((id, slot));
            }
        }
        out
    }

    /// Output schema of a host after its fused steps.
    pub fn host_schema(&self, host: NodeId) -> &[Column] {
        match self.nodes[host].post.last() {
            Some(step) => &self.nodes[step.node()].schema,
            None => &self.nodes[host].schema,
        }
    }

    /// The slice key of a host's final output.
    pub fn host_key(&self, host: NodeId) -> &SliceKey {
        match self.nodes[host].post.last() {
            Some(step) => &self.nodes[step.node()].key,
            None => &self.nodes[host].key,
        }
    }

    pub fn output_schema(&self) -> &[Column] {
        &self.nodes[self.root].schema
    }

    /// Scans of replicated tables only, so any one provider can evaluate it.
    pub fn is_replicated(&self, id: NodeId) -> bool {
        let node = &self.nodes[id];
        match &node.op {
            Op::Scan { table, .. } => {
                self.catalog.tables.get(table).is_some_and(|t| t.distribution == Distribution::Replicated)
            }
            _ => !node.children.is_empty() && node.children.iter().all(|c| self.is_replicated(*c)),
        }
    }

    /// Input names used when rendering `id`'s expressions.
    pub fn input_names(&self, id: NodeId) -> Vec<String> {
        let node = &self.nodes[id];
        let cols: Vec<Column> = match node.op {
            Op::Join { .. } | Op::Filter { .. } | Op::Sort { .. } | Op::Limit { .. } | Op::Distinct => {
                node.full_schema.clone()
            }
            Op::WindowNumber { .. } => node.full_schema[..node.full_schema.len() - 1].to_vec(),
            _ => node.children.iter().flat_map(|c| self.nodes[*c].schema.clone()).collect(),
        };
        crate::plan::logical::display_names(&cols)
    }

    pub fn describe(&self, id: NodeId) -> String {
        let node = &self.nodes[id];
        let output: Vec<String> = node.full_schema.iter().map(|c| c.name.clone()).collect();
        node.op.describe(&self.input_names(id), &output)
    }

    pub fn mode_text(&self, id: NodeId) -> String {
        let node = &self.nodes[id];
        match node.mode {
            Mode::Plain => "plain".into(),
            Mode::Secure => "secure".into(),
            Mode::Sliced => {
                let names: Vec<&str> =
                    node.key.components.iter().map(|c| node.schema[c[0]].name.as_str()).collect();
                format!("sliced({})", names.join(", "))
            }
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::Plain => "plain",
            Mode::Sliced => "sliced",
            Mode::Secure => "secure",
        })
    }
}

/// Raises every column level in `plan` to at least `level`.
fn raise_plan_levels(plan: &mut LogicalPlan, level: SecurityLevel) {
    for node in &mut plan.nodes {
        for c in &mut node.schema {
            c.level = c.level.max(level);
        }
    }
}

/// Full planning pipeline from SQL text. Regions and census are left to
/// execution.
pub fn plan_query(sql: &str, catalog: &Catalog, config: OptimizerConfig) -> Result<PhysicalPlan> {
    let logical = compile(sql, catalog)?;
    plan_logical(logical, catalog, config)
}

pub fn plan_logical(mut logical: LogicalPlan, catalog: &Catalog, config: OptimizerConfig) -> Result<PhysicalPlan> {
    // the output policy is checked against the declared levels
    let labeled = label_plan(logical.clone(), catalog)?;
    let (labeled, catalog) = if config.raise_levels {
        let raised = catalog.with_minimum_level(SecurityLevel::Protected);
        raise_plan_levels(&mut logical, SecurityLevel::Protected);
        (crate::typer::label_plan_unchecked(logical, &raised), raised)
    } else {
        (labeled, catalog.clone())
    };
    let nodes = labeled
        .plan
        .nodes
        .iter()
        .enumerate()
        .map(|(id, n)| PhysNode {
            op: n.op.clone(),
            children: n.children.clone(),
            full_schema: n.schema.clone(),
            schema: n.schema.clone(),
            keep: None,
            label: labeled.op_labels[id],
            mode: Mode::Plain,
            phase: Phase::Whole,
            site: Site::Local,
            key: SliceKey::default(),
            edge_keys: vec![Vec::new(); n.children.len()],
            absorbed_into: None,
            inputs: n.children.clone(),
            input_keys: vec![Vec::new(); n.children.len()],
            pre: vec![Vec::new(); n.children.len()],
            post: Vec::new(),
        })
        .collect();
    let mut plan = PhysicalPlan { nodes, root: labeled.plan.root, config, catalog };
    infer_slice_keys(&mut plan);
    assign_execution_modes(&mut plan)?;
    if config.split {
        split_operators(&mut plan);
        infer_slice_keys(&mut plan);
        assign_execution_modes(&mut plan)?;
    }
    modes::assign_sites(&mut plan);
    trim_attributes(&mut plan);
    coalesce(&mut plan);
    Ok(plan)
}
