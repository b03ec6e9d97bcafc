//! The honest broker: plans a query, drives the providers and the
//! oblivious engine, and assembles the result.

use std::collections::{BTreeMap, BTreeSet};

use super::exec::{host_columns, rel_schema, run_plain_host, run_secure_host};
use super::message::{KeyFilter, Message};
use super::provider::{membership_set, membership_tables, DataProvider, Fragment};
use super::transport::{Channels, Envelope, TransportKind};
use crate::catalog::{Catalog, DataSet, Party, Relation};
use crate::error::{Error, Result};
use crate::oblivious::{CostReport, Engine, PaddedRelation, Recorder, Slot, Tag, TraceEvent, ORIGIN_BROKER};
use crate::plan::{Env, NodeId};
use crate::planner::regions::{regions, LeafEdge, Region, RegionTracks};
use crate::planner::{explain, plan_query, OptimizerConfig, PhysicalPlan, Site};
use crate::value::Value;

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    pub config: OptimizerConfig,
    /// Record the oblivious engine's event trace.
    pub trace: bool,
    pub transport: TransportKind,
}

#[derive(Debug, Clone)]
pub struct QueryOutput {
    pub result: Relation,
    pub cost: CostReport,
    pub explain: String,
    pub trace: Vec<TraceEvent>,
    /// Every frame exchanged, in order.
    pub log: Vec<Envelope>,
    pub plan: PhysicalPlan,
    pub tracks: Vec<(Region, RegionTracks)>,
}

/// Plans and runs `sql` over the two providers' data.
pub fn run_query(sql: &str, catalog: &Catalog, data: &DataSet, opts: RunOptions) -> Result<QueryOutput> {
    let plan = plan_query(sql, catalog, opts.config)?;
    run_plan(plan, data, opts)
}

pub fn run_plan(plan: PhysicalPlan, data: &DataSet, opts: RunOptions) -> Result<QueryOutput> {
    let providers = Party::BOTH.iter().map(|p| DataProvider::new(*p, data.provider_tables(*p))).collect();
    let chans = Channels::new(providers, opts.transport)?;
    let mut broker = Broker {
        plan: &plan,
        chans,
        env: Env::default(),
        rec: Recorder::new(opts.trace),
        installed: BTreeMap::new(),
        next_id: 0,
        plain: BTreeMap::new(),
        secure: BTreeMap::new(),
        tracks: Vec::new(),
    };
    let result = broker.run()?;
    broker.chans.deliver(&Message::FinalResult(result.clone()));
    let explain = explain(&plan, Some(&broker.tracks));
    let trace = broker.rec.take_trace();
    let cost = std::mem::take(&mut broker.rec.cost);
    let log = std::mem::take(&mut broker.chans.log);
    let tracks = std::mem::take(&mut broker.tracks);
    drop(broker);
    Ok(QueryOutput { result, cost, explain, trace, log, plan, tracks })
}

fn expect_reply(m: Message, want: &str) -> Error {
    Error::Execute(format!("expected {want}, received {}", m.name()))
}

/// Appends plaintext rows the broker holds as valid slots of its own.
fn append_rows(acc: &mut PaddedRelation, rel: &Relation) {
    let base = acc.origin_counts[2];
    for (i, row) in rel.rows.iter().enumerate() {
        let tag = Tag { origin: ORIGIN_BROKER, index: (base + i as u64) as u32 };
        acc.slots.push(Slot { valid: true, values: row.clone(), tag });
    }
    acc.origin_counts[2] += rel.rows.len() as u64;
}

fn key_values<'a>(rel: &'a Relation, positions: &'a [usize]) -> impl Iterator<Item = Vec<Value>> + 'a {
    rel.rows.iter().map(move |r| positions.iter().map(|p| r[*p].clone()).collect())
}

struct Broker<'a> {
    plan: &'a PhysicalPlan,
    chans: Channels,
    env: Env,
    rec: Recorder,
    /// Fragment ids by (provider, fragment roots).
    installed: BTreeMap<(Party, Vec<NodeId>), u64>,
    next_id: u64,
    /// Outputs of plaintext hosts run by the broker.
    plain: BTreeMap<NodeId, Relation>,
    /// Outputs of engine hosts.
    secure: BTreeMap<NodeId, PaddedRelation>,
    tracks: Vec<(Region, RegionTracks)>,
}

impl Broker<'_> {
    fn fresh_id(&mut self) -> u64 {
        self.next_id += 1;
        self.next_id
    }

    /// Installs the sub-plan below `roots` at `party`, once.
    fn fragment(&mut self, party: Party, roots: &[NodeId], leaves: &[LeafEdge]) -> Result<u64> {
        if let Some(id) = self.installed.get(&(party, roots.to_vec())) {
            return Ok(*id);
        }
        let mut frag = Fragment { nodes: BTreeMap::new(), leaves: leaves.to_vec() };
        let mut work: Vec<NodeId> = roots.to_vec();
        while let Some(id) = work.pop() {
            if frag.nodes.contains_key(&id) {
                continue;
            }
            let node = self.plan.nodes[id].clone();
            work.extend(node.children.iter().copied());
            work.extend(node.pre.iter().flatten().chain(node.post.iter()).map(|s| s.node()));
            frag.nodes.insert(id, node);
        }
        let id = self.fresh_id();
        let body = serde_json::to_string(&frag).map_err(|e| Error::Codec(e.to_string()))?;
        match self.chans.call(party, &Message::PlanFragment { id, body })? {
            Message::Ack { .. } => {}
            m => return Err(expect_reply(m, "Ack")),
        }
        self.installed.insert((party, roots.to_vec()), id);
        Ok(id)
    }

    /// Providers holding rows of a local host; replicated data is read once.
    fn holders(&self, host: NodeId) -> Vec<Party> {
        if self.plan.is_replicated(host) {
            vec![Party::Alice]
        } else {
            Party::BOTH.to_vec()
        }
    }

    fn fetch_plain(&mut self, host: NodeId) -> Result<Relation> {
        let mut out = Relation::new(rel_schema(host_columns(self.plan, host)));
        for party in self.holders(host) {
            let fragment = self.fragment(party, &[host], &[])?;
            let step = self.fresh_id();
            let req = Message::InputRequest { fragment, host, filter: None, secure: false, step };
            match self.chans.call(party, &req)? {
                Message::LocalResult { rel, .. } => out.rows.extend(rel.rows),
                m => return Err(expect_reply(m, "LocalResult")),
            }
        }
        Ok(out)
    }

    fn fetch_secure(&mut self, host: NodeId, filter: Option<KeyFilter>) -> Result<PaddedRelation> {
        let mut out = PaddedRelation::empty(rel_schema(host_columns(self.plan, host)));
        for party in self.holders(host) {
            let fragment = self.fragment(party, &[host], &[])?;
            let step = self.fresh_id();
            let req = Message::InputRequest { fragment, host, filter: filter.clone(), secure: true, step };
            match self.chans.call(party, &req)? {
                Message::SecureStepInput { input, .. } => out = PaddedRelation::merge(out, input)?,
                m => return Err(expect_reply(m, "SecureStepInput")),
            }
        }
        Ok(out)
    }

    fn load_env(&mut self) -> Result<()> {
        for table in membership_tables(self.plan.nodes.iter()) {
            match self.chans.call(Party::Alice, &Message::TableRequest { table: table.clone() })? {
                Message::TableReply { rel, .. } => {
                    self.env.sets.insert(table, membership_set(&rel));
                }
                m => return Err(expect_reply(m, "TableReply")),
            }
        }
        Ok(())
    }

    fn run(&mut self) -> Result<Relation> {
        self.load_env()?;
        let plan = self.plan;
        let all_regions = regions(plan);
        let mut region_of: BTreeMap<NodeId, usize> = BTreeMap::new();
        for (i, r) in all_regions.iter().enumerate() {
            for h in &r.hosts {
                region_of.insert(*h, i);
            }
        }
        let mut regions_done = BTreeSet::new();
        let root = plan.root_host();
        for h in plan.host_order() {
            if let Some(&ri) = region_of.get(&h) {
                if regions_done.insert(ri) {
                    self.run_region(&all_regions[ri])?;
                }
                continue;
            }
            let node = &plan.nodes[h];
            match node.site {
                Site::Local => {}
                Site::BrokerPlain => {
                    let mut inputs = Vec::new();
                    for i in &node.inputs {
                        inputs.push(match plan.nodes[*i].site {
                            Site::Local => self.fetch_plain(*i)?,
                            _ => self.plain[i].clone(),
                        });
                    }
                    let out = run_plain_host(plan, h, inputs, &self.env)?;
                    self.plain.insert(h, out);
                }
                Site::Engine => {
                    let mut inputs = Vec::new();
                    for i in &node.inputs {
                        inputs.push(match plan.nodes[*i].site {
                            Site::Local => self.fetch_secure(*i, None)?,
                            Site::BrokerPlain => PaddedRelation::from_relation(&self.plain[i], ORIGIN_BROKER),
                            Site::Engine => self.secure[i].clone(),
                        });
                    }
                    let mut eng = Engine::new(&mut self.rec, &self.env);
                    let out = run_secure_host(&mut eng, plan, h, inputs)?;
                    self.secure.insert(h, out);
                }
            }
        }
        let mut result = match plan.nodes[root].site {
            Site::Local => self.fetch_plain(root)?,
            Site::BrokerPlain => self.plain[&root].clone(),
            Site::Engine => self.secure[&root].decode(),
        };
        result.schema = rel_schema(plan.output_schema());
        Ok(result)
    }

    fn run_region(&mut self, region: &Region) -> Result<()> {
        let plan = self.plan;
        let mut census: [BTreeSet<Vec<Value>>; 2] = Default::default();
        let mut broker_values = BTreeSet::new();
        for leaf in &region.leaves {
            if plan.nodes[leaf.leaf].site == Site::BrokerPlain {
                broker_values.extend(key_values(&self.plain[&leaf.leaf], &leaf.positions));
                continue;
            }
            for party in self.holders(leaf.leaf) {
                let fragment = self.fragment(party, &[leaf.leaf], &[])?;
                let req = Message::CensusRequest { fragment, leaf: leaf.leaf, positions: leaf.positions.clone() };
                match self.chans.call(party, &req)? {
                    Message::CensusReply { values, .. } => census[party.index()].extend(values.rows),
                    m => return Err(expect_reply(m, "CensusReply")),
                }
            }
        }
        let tracks = RegionTracks::new(census, &broker_values, plan.config.semi_join);
        let mut outs: BTreeMap<NodeId, PaddedRelation> = region
            .exits
            .iter()
            .map(|e| (*e, PaddedRelation::empty(rel_schema(host_columns(plan, *e)))))
            .collect();
        let partitions = tracks.partitions();
        if plan.config.slicing {
            for (value, track) in &partitions {
                match track {
                    None => self.secure_run(region, std::slice::from_ref(value), &mut outs)?,
                    Some(p) => self.plaintext_run(region, Party::BOTH[*p], value, &mut outs)?,
                }
            }
        } else {
            if !tracks.secure.is_empty() {
                self.secure_run(region, &tracks.secure, &mut outs)?;
            }
            for (value, track) in &partitions {
                if let Some(p) = track {
                    self.plaintext_run(region, Party::BOTH[*p], value, &mut outs)?;
                }
            }
        }
        self.secure.extend(outs);
        self.tracks.push((region.clone(), tracks));
        Ok(())
    }

    /// One oblivious run of the region over the rows whose key is in `values`.
    fn secure_run(
        &mut self,
        region: &Region,
        values: &[Vec<Value>],
        outs: &mut BTreeMap<NodeId, PaddedRelation>,
    ) -> Result<()> {
        let plan = self.plan;
        let mut leaf_inputs: BTreeMap<(NodeId, usize), PaddedRelation> = BTreeMap::new();
        for leaf in &region.leaves {
            let filter = KeyFilter::new(leaf.positions.clone(), values.to_vec());
            let input = if plan.nodes[leaf.leaf].site == Site::BrokerPlain {
                let mut rel = self.plain[&leaf.leaf].clone();
                rel.rows.retain(|r| filter.admits(r));
                PaddedRelation::from_relation(&rel, ORIGIN_BROKER)
            } else {
                self.fetch_secure(leaf.leaf, Some(filter))?
            };
            leaf_inputs.insert((leaf.host, leaf.slot), input);
        }
        let mut local: BTreeMap<NodeId, PaddedRelation> = BTreeMap::new();
        let mut eng = Engine::new(&mut self.rec, &self.env);
        for &h in &region.hosts {
            let inputs = plan.nodes[h]
                .inputs
                .iter()
                .enumerate()
                .map(|(slot, i)| leaf_inputs.remove(&(h, slot)).unwrap_or_else(|| local[i].clone()))
                .collect();
            let out = run_secure_host(&mut eng, plan, h, inputs)?;
            local.insert(h, out);
        }
        for (exit, acc) in outs.iter_mut() {
            let out = local.remove(exit).expect("exits are region hosts");
            *acc = PaddedRelation::merge(std::mem::replace(acc, PaddedRelation::empty(Vec::new())), out)?;
        }
        Ok(())
    }

    /// The region evaluated in plaintext by the only provider holding `value`.
    fn plaintext_run(
        &mut self,
        region: &Region,
        party: Party,
        value: &[Value],
        outs: &mut BTreeMap<NodeId, PaddedRelation>,
    ) -> Result<()> {
        let fragment = self.fragment(party, &region.exits, &region.leaves)?;
        for (exit, acc) in outs.iter_mut() {
            let req = Message::TrackRequest { fragment, exit: *exit, value: value.to_vec() };
            match self.chans.call(party, &req)? {
                Message::LocalResult { rel, .. } => append_rows(acc, &rel),
                m => return Err(expect_reply(m, "LocalResult")),
            }
        }
        Ok(())
    }
}
