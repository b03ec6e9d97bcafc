use serde::{Deserialize, Serialize};

use crate::catalog::Relation;
use crate::error::{Error, Result};
use crate::value::{Value, ValueType};

/// Origin of rows the broker holds itself.
pub const ORIGIN_BROKER: u8 = 2;

/// Value-independent identity of a slot, used to break sort ties.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Tag {
    /// 0 for the first provider, 1 for the second, 2 for the broker.
    pub origin: u8,
    pub index: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Slot {
    pub valid: bool,
    pub values: Vec<Value>,
    pub tag: Tag,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PaddedRelation {
    pub schema: Vec<(String, ValueType)>,
    pub slots: Vec<Slot>,
    /// Input rows contributed by each origin.
    pub origin_counts: [u64; 3],
}

impl PaddedRelation {
    pub fn empty(schema: Vec<(String, ValueType)>) -> PaddedRelation {
        PaddedRelation { schema, slots: Vec::new(), origin_counts: [0; 3] }
    }

    /// Every row valid, tagged with `origin` and its position.
    pub fn from_relation(rel: &Relation, origin: u8) -> PaddedRelation {
        let slots = rel
            .rows
            .iter()
            .enumerate()
            .map(|(i, r)| Slot { valid: true, values: r.clone(), tag: Tag { origin, index: i as u32 } })
            .collect();
        let mut origin_counts = [0; 3];
        origin_counts[usize::from(origin.min(2))] = rel.rows.len() as u64;
        PaddedRelation { schema: rel.schema.clone(), slots, origin_counts }
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn valid_count(&self) -> usize {
        self.slots.iter().filter(|s| s.valid).count()
    }

    /// Bits per slot: every field plus the validity bit.
    pub fn width(&self) -> u64 {
        width_of(&self.schema)
    }

    /// Strips invalid slots. Only the final output is ever decoded.
    pub fn decode(&self) -> Relation {
        Relation {
            schema: self.schema.clone(),
            rows: self.slots.iter().filter(|s| s.valid).map(|s| s.values.clone()).collect(),
        }
    }

    pub fn placeholder_row(schema: &[(String, ValueType)]) -> Vec<Value> {
        schema.iter().map(|(_, t)| t.placeholder()).collect()
    }

    /// Concatenation, `a` first.
    pub fn merge(mut a: PaddedRelation, b: PaddedRelation) -> Result<PaddedRelation> {
        let types = |r: &PaddedRelation| r.schema.iter().map(|(_, t)| *t).collect::<Vec<_>>();
        if types(&a) != types(&b) {
            return Err(Error::Execute("merged inputs have different schemas".into()));
        }
        a.slots.extend(b.slots);
        for i in 0..3 {
            a.origin_counts[i] += b.origin_counts[i];
        }
        Ok(a)
    }

    /// Keeps the listed columns of every slot.
    pub fn project_columns(mut self, keep: &[usize]) -> PaddedRelation {
        self.schema = keep.iter().map(|k| self.schema[*k].clone()).collect();
        for s in &mut self.slots {
            s.values = keep.iter().map(|k| s.values[*k].clone()).collect();
        }
        self
    }
}

pub(crate) fn width_of(schema: &[(String, ValueType)]) -> u64 {
    schema.iter().map(|(_, t)| t.bit_width()).sum::<u64>() + 1
}
