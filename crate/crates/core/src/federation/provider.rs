//! A data provider: holds its own tables and evaluates plan fragments over
//! them in plaintext.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::exec::{host_columns, rel_schema, run_plain_host};
use super::message::{KeyFilter, Message};
use crate::catalog::{Party, Relation};
use crate::error::{Error, Result};
use crate::oblivious::PaddedRelation;
use crate::plan::{Env, Expr, NodeId, Op};
use crate::planner::regions::LeafEdge;
use crate::planner::PhysNode;
use crate::value::Value;

/// A serialized sub-plan: the operators a provider may evaluate, and the
/// region inputs that are restricted to one key value on a plaintext track.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Fragment {
    pub nodes: BTreeMap<NodeId, PhysNode>,
    pub leaves: Vec<LeafEdge>,
}

fn in_tables(e: &Expr, out: &mut BTreeSet<String>) {
    match e {
        Expr::InTable { expr, table } => {
            out.insert(table.clone());
            in_tables(expr, out);
        }
        Expr::Binary { lhs, rhs, .. } => {
            in_tables(lhs, out);
            in_tables(rhs, out);
        }
        Expr::Column(_) | Expr::Literal(_) => {}
    }
}

/// Tables read by `IN` predicates anywhere in `nodes`.
pub fn membership_tables<'a>(nodes: impl Iterator<Item = &'a PhysNode>) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    for n in nodes {
        for e in n.op.expressions() {
            in_tables(e, &mut out);
        }
    }
    out
}

pub fn membership_set(rel: &Relation) -> BTreeSet<Value> {
    rel.rows.iter().filter_map(|r| r.first().cloned()).filter(|v| !v.is_null()).collect()
}

pub struct DataProvider {
    party: Party,
    tables: BTreeMap<String, Relation>,
    fragments: BTreeMap<u64, (Fragment, Env)>,
}

impl DataProvider {
    pub fn new(party: Party, tables: BTreeMap<String, Relation>) -> DataProvider {
        DataProvider { party, tables, fragments: BTreeMap::new() }
    }

    pub fn party(&self) -> Party {
        self.party
    }

    fn table(&self, name: &str) -> Result<&Relation> {
        self.tables.get(name).ok_or_else(|| Error::Execute(format!("provider holds no table `{name}`")))
    }

    fn fragment(&self, id: u64) -> Result<&(Fragment, Env)> {
        self.fragments.get(&id).ok_or_else(|| Error::Execute(format!("unknown fragment {id}")))
    }

    /// Output of `host` over local rows. On a plaintext track, region
    /// inputs are restricted to the track's key value.
    fn eval(
        &self,
        frag: &Fragment,
        env: &Env,
        host: NodeId,
        track: Option<&[Value]>,
        memo: &mut BTreeMap<NodeId, Relation>,
    ) -> Result<Relation> {
        if let Some(r) = memo.get(&host) {
            return Ok(r.clone());
        }
        let node = frag.nodes.get(&host).ok_or_else(|| Error::Execute(format!("operator {host} not in fragment")))?;
        let inputs = match &node.op {
            Op::Scan { table, .. } => vec![self.table(table)?.clone()],
            _ => {
                let mut inputs = Vec::with_capacity(node.inputs.len());
                for (slot, input) in node.inputs.iter().enumerate() {
                    let mut rel = self.eval(frag, env, *input, track, memo)?;
                    let edge = frag.leaves.iter().find(|l| l.host == host && l.slot == slot);
                    if let (Some(v), Some(edge)) = (track, edge) {
                        let filter = KeyFilter::new(edge.positions.clone(), vec![v.to_vec()]);
                        rel.rows.retain(|r| filter.admits(r));
                    }
                    inputs.push(rel);
                }
                inputs
            }
        };
        let out = run_plain_host(&frag.nodes, host, inputs, env)?;
        memo.insert(host, out.clone());
        Ok(out)
    }

    /// Handles one request and produces its reply.
    pub fn handle(&mut self, msg: Message) -> Result<Message> {
        match msg {
            Message::PlanFragment { id, body } => {
                let frag: Fragment =
                    serde_json::from_str(&body).map_err(|e| Error::Codec(format!("bad plan fragment: {e}")))?;
                let mut env = Env::default();
                for t in membership_tables(frag.nodes.values()) {
                    env.sets.insert(t.clone(), membership_set(self.table(&t)?));
                }
                self.fragments.insert(id, (frag, env));
                Ok(Message::Ack { id })
            }
            Message::CensusRequest { fragment, leaf, positions } => {
                let (frag, env) = self.fragment(fragment)?;
                let rel = self.eval(frag, env, leaf, None, &mut BTreeMap::new())?;
                let cols = host_columns(&frag.nodes, leaf);
                let schema = rel_schema(&positions.iter().map(|p| cols[*p].clone()).collect::<Vec<_>>());
                let keys: BTreeSet<Vec<Value>> =
                    rel.rows.iter().map(|r| positions.iter().map(|p| r[*p].clone()).collect()).collect();
                Ok(Message::CensusReply { fragment, values: Relation { schema, rows: keys.into_iter().collect() } })
            }
            Message::InputRequest { fragment, host, filter, secure, step } => {
                let (frag, env) = self.fragment(fragment)?;
                let mut rel = self.eval(frag, env, host, None, &mut BTreeMap::new())?;
                if let Some(f) = &filter {
                    rel.rows.retain(|r| f.admits(r));
                }
                Ok(if secure {
                    Message::SecureStepInput { step, input: PaddedRelation::from_relation(&rel, self.party.index() as u8) }
                } else {
                    Message::LocalResult { fragment, node: host, partition: None, rel }
                })
            }
            Message::TrackRequest { fragment, exit, value } => {
                let (frag, env) = self.fragment(fragment)?;
                let rel = self.eval(frag, env, exit, Some(&value), &mut BTreeMap::new())?;
                Ok(Message::LocalResult { fragment, node: exit, partition: Some(value), rel })
            }
            Message::TableRequest { table } => Ok(Message::TableReply { rel: self.table(&table)?.clone(), table }),
            other => Err(Error::Execute(format!("provider cannot handle {}", other.name()))),
        }
    }
}
