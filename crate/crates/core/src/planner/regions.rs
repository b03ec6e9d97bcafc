//! Sliced regions and secure semi-join tracks.
//!
//! A region is a maximal connected set of sliced hosts. Every host in it is
//! sliced alike, so a region can run one key value at a time. Its leaves are
//! the plain inputs feeding it.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use super::{Mode, PhysicalPlan, Site};
use crate::plan::NodeId;
use crate::value::Value;

/// A plain input of a region.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct LeafEdge {
    pub host: NodeId,
    pub slot: usize,
    pub leaf: NodeId,
    /// Key positions in the leaf's output, in the region's canonical order.
    pub positions: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Region {
    /// Member hosts, inputs first.
    pub hosts: Vec<NodeId>,
    /// Members consumed outside the region, or the plan root.
    pub exits: Vec<NodeId>,
    pub leaves: Vec<LeafEdge>,
    /// Key column names in canonical order.
    pub key_names: Vec<String>,
}

impl Region {
    pub fn contains(&self, host: NodeId) -> bool {
        self.hosts.contains(&host)
    }
}

/// Partition values of one region.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RegionTracks {
    /// Distinct key values reported by each provider.
    pub census: [BTreeSet<Vec<Value>>; 2],
    /// Values run in the oblivious engine, ascending.
    pub secure: Vec<Vec<Value>>,
    /// Values each provider evaluates alone in plaintext, ascending.
    pub plaintext: [Vec<Vec<Value>>; 2],
}

impl RegionTracks {
    /// With the semi-join, values held by both providers are secure and the
    /// rest run in plaintext at their only holder. Without it, or when the
    /// broker holds leaf rows of its own, every value is secure.
    pub fn new(census: [BTreeSet<Vec<Value>>; 2], broker: &BTreeSet<Vec<Value>>, semi_join: bool) -> RegionTracks {
        if semi_join && broker.is_empty() {
            let secure: Vec<Vec<Value>> = census[0].intersection(&census[1]).cloned().collect();
            let only = |p: usize| census[p].iter().filter(|v| !census[1 - p].contains(*v)).cloned().collect();
            let plaintext = [only(0), only(1)];
            RegionTracks { census, secure, plaintext }
        } else {
            let all: BTreeSet<Vec<Value>> = census[0].union(&census[1]).chain(broker.iter()).cloned().collect();
            RegionTracks { census, secure: all.into_iter().collect(), plaintext: [Vec::new(), Vec::new()] }
        }
    }

    /// Every value with its track: `None` for secure, else the provider.
    pub fn partitions(&self) -> Vec<(Vec<Value>, Option<usize>)> {
        let mut all: Vec<(Vec<Value>, Option<usize>)> = self.secure.iter().map(|v| (v.clone(), None)).collect();
        for p in 0..2 {
            all.extend(self.plaintext[p].iter().map(|v| (v.clone(), Some(p))));
        }
        all.sort();
        all
    }
}

/// Maps each component of a host's final output key to a component of the
/// host's own operator key, following the fused output steps down.
fn out_to_own(plan: &PhysicalPlan, host: NodeId) -> Vec<usize> {
    let mut chain = vec![host];
    chain.extend(plan.nodes[host].post.iter().map(|s| s.node()));
    let top = *chain.last().expect("non-empty");
    let mut perm: Vec<usize> = (0..plan.nodes[top].key.len()).collect();
    for w in chain.windows(2).rev() {
        let (below, above) = (&plan.nodes[w[0]], &plan.nodes[w[1]]);
        perm = perm
            .iter()
            .map(|c| below.key.component_of(above.edge_keys[0][*c]).expect("fused steps are sliced alike"))
            .collect();
    }
    perm
}

/// Own-key component of `input` that `host` slices it by through `slot`,
/// for each of `host`'s own components.
fn edge_perm(plan: &PhysicalPlan, host: NodeId, slot: usize) -> Vec<usize> {
    let input = plan.nodes[host].inputs[slot];
    let key = plan.host_key(input);
    let to_own = out_to_own(plan, input);
    plan.nodes[host].input_keys[slot]
        .iter()
        .map(|p| to_own[key.component_of(*p).expect("sliced alike")])
        .collect()
}

pub fn regions(plan: &PhysicalPlan) -> Vec<Region> {
    let order = plan.host_order();
    let parents = plan.host_parents();
    let root = plan.root_host();
    let sliced = |h: NodeId| plan.nodes[h].mode == Mode::Sliced;
    let mut assigned: BTreeSet<NodeId> = BTreeSet::new();
    let mut out = Vec::new();
    for &start in &order {
        if !sliced(start) || assigned.contains(&start) {
            continue;
        }
        let mut members = BTreeSet::new();
        let mut queue = VecDeque::from([start]);
        while let Some(h) = queue.pop_front() {
            if !members.insert(h) {
                continue;
            }
            let ins = plan.nodes[h].inputs.iter().copied();
            let outs = parents[&h].iter().map(|(p, _)| *p);
            queue.extend(ins.chain(outs).filter(|n| sliced(*n) && !members.contains(n)));
        }
        assigned.extend(members.iter().copied());
        let hosts: Vec<NodeId> = order.iter().copied().filter(|h| members.contains(h)).collect();
        let exits: Vec<NodeId> = hosts
            .iter()
            .copied()
            .filter(|h| *h == root || parents[h].iter().any(|(p, _)| !members.contains(p)))
            .collect();
        let canon_root = *exits.last().expect("a region has an exit");

        // own-key component of each member for each canonical component
        let mut perm: BTreeMap<NodeId, Vec<usize>> = BTreeMap::new();
        perm.insert(canon_root, out_to_own(plan, canon_root));
        let mut queue = VecDeque::from([canon_root]);
        while let Some(h) = queue.pop_front() {
            let ph = perm[&h].clone();
            for (slot, c) in plan.nodes[h].inputs.iter().enumerate() {
                if members.contains(c) && !perm.contains_key(c) {
                    let ep = edge_perm(plan, h, slot);
                    perm.insert(*c, ph.iter().map(|j| ep[*j]).collect());
                    queue.push_back(*c);
                }
            }
            for (p, slot) in &parents[&h] {
                if members.contains(p) && !perm.contains_key(p) {
                    let ep = edge_perm(plan, *p, *slot);
                    let pp = ph.iter().map(|own| ep.iter().position(|x| x == own).expect("bijective")).collect();
                    perm.insert(*p, pp);
                    queue.push_back(*p);
                }
            }
        }
        let mut leaves = Vec::new();
        for &h in &hosts {
            let node = &plan.nodes[h];
            for (slot, leaf) in node.inputs.iter().enumerate() {
                if members.contains(leaf) {
                    continue;
                }
                debug_assert_ne!(plan.nodes[*leaf].site, Site::Engine);
                let positions = perm[&h].iter().map(|j| node.input_keys[slot][*j]).collect();
                leaves.push(LeafEdge { host: h, slot, leaf: *leaf, positions });
            }
        }
        let root_schema = plan.host_schema(canon_root);
        let root_key = plan.host_key(canon_root);
        let key_names = root_key.components.iter().map(|c| root_schema[c[0]].name.clone()).collect();
        out.push(Region { hosts, exits, leaves, key_names });
    }
    out
}
