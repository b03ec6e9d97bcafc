//! Indented plan rendering, children first and the root last.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use super::regions::{Region, RegionTracks};
use super::{FusedStep, Phase, PhysicalPlan};
use crate::plan::NodeId;

fn line(plan: &PhysicalPlan, id: NodeId) -> String {
    let node = plan.node(id);
    let mut s = format!("{} label={} mode={}", plan.describe(id), node.label, plan.mode_text(id));
    match node.phase {
        Phase::Whole => {}
        Phase::Low => s.push_str(" phase=low"),
        Phase::High => s.push_str(" phase=high"),
    }
    let fused: Vec<String> =
        node.pre.iter().flatten().chain(node.post.iter()).map(|f: &FusedStep| plan.describe(f.node())).collect();
    if !fused.is_empty() {
        let _ = write!(s, " fused: [{}]", fused.join(", "));
    }
    if let Some(h) = node.absorbed_into {
        let _ = write!(s, " coalesced-into={}", plan.node(h).op.name());
    }
    s
}

fn visit(plan: &PhysicalPlan, id: NodeId, depth: usize, seen: &mut BTreeSet<NodeId>, out: &mut String) {
    if !seen.insert(id) {
        return;
    }
    for c in &plan.node(id).children {
        visit(plan, *c, depth + 1, seen, out);
    }
    let _ = writeln!(out, "{}{}", "  ".repeat(depth), line(plan, id));
}

/// One line per operator. When partition tracks are known, one summary line
/// per sliced region follows.
pub fn explain(plan: &PhysicalPlan, tracks: Option<&[(Region, RegionTracks)]>) -> String {
    let mut out = String::new();
    visit(plan, plan.root, 0, &mut BTreeSet::new(), &mut out);
    for (region, t) in tracks.unwrap_or_default() {
        let _ = writeln!(
            out,
            "semi-join({}): secure={} plaintext {}={} {}={}",
            region.key_names.join(", "),
            t.secure.len(),
            plan.catalog.providers[0],
            t.plaintext[0].len(),
            plan.catalog.providers[1],
            t.plaintext[1].len(),
        );
    }
    out
}
