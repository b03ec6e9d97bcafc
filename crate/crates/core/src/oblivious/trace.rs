use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::plan::NodeId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EventKind {
    Compare,
    Swap,
    Read,
    Write,
    Emit,
}

/// One step of an oblivious kernel. Never carries tuple values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TraceEvent {
    pub kind: EventKind,
    pub a: u32,
    pub b: u32,
    pub op: NodeId,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpCost {
    pub op: String,
    pub compares: u64,
    pub accesses: u64,
    pub tuple_bits: u64,
    pub output_slots: u64,
}

/// Per-operator counters, summed over every run of the operator.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CostReport {
    pub operators: BTreeMap<NodeId, OpCost>,
}

impl CostReport {
    pub fn total_compares(&self) -> u64 {
        self.operators.values().map(|c| c.compares).sum()
    }

    pub fn total_accesses(&self) -> u64 {
        self.operators.values().map(|c| c.accesses).sum()
    }

    pub fn to_json(&self) -> String {
        let ops: Vec<serde_json::Value> = self
            .operators
            .iter()
            .map(|(id, c)| {
                serde_json::json!({
                    "id": id,
                    "op": c.op,
                    "compares": c.compares,
                    "accesses": c.accesses,
                    "tuple_bits": c.tuple_bits,
                    "output_slots": c.output_slots,
                })
            })
            .collect();
        serde_json::json!({ "operators": ops }).to_string()
    }
}

/// Collects costs and, optionally, the event trace.
#[derive(Debug, Clone, Default)]
pub struct Recorder {
    pub trace: Option<Vec<TraceEvent>>,
    pub cost: CostReport,
}

impl Recorder {
    pub fn new(tracing: bool) -> Recorder {
        Recorder { trace: tracing.then(Vec::new), cost: CostReport::default() }
    }

    pub(crate) fn event(&mut self, kind: EventKind, a: usize, b: usize, op: NodeId) {
        if let Some(t) = &mut self.trace {
            t.push(TraceEvent { kind, a: a as u32, b: b as u32, op });
        }
    }

    pub(crate) fn cost(&mut self, op: NodeId, name: &str) -> &mut OpCost {
        self.cost.operators.entry(op).or_insert_with(|| OpCost { op: name.to_string(), ..OpCost::default() })
    }

    pub fn take_trace(&mut self) -> Vec<TraceEvent> {
        self.trace.as_mut().map(std::mem::take).unwrap_or_default()
    }
}
