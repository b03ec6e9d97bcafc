use std::cmp::Ordering;

use super::relation::{width_of, PaddedRelation, Slot, Tag};
use super::trace::{EventKind, Recorder};
use crate::plan::{AggCall, Env, Expr, NodeId, SortKey};
use crate::sql::ast::AggFunc;
use crate::value::{Value, ValueType};

/// Padding slots added by the sorting network sort after everything else.
const ORIGIN_PAD: u8 = 3;

/// Sort order over precomputed key columns.
#[derive(Debug, Clone, Default)]
pub struct SortSpec {
    pub keys: Vec<Expr>,
    pub desc: Vec<bool>,
}

impl SortSpec {
    pub fn ascending(keys: Vec<Expr>) -> SortSpec {
        let desc = vec![false; keys.len()];
        SortSpec { keys, desc }
    }

    pub fn from_keys(keys: &[SortKey]) -> SortSpec {
        SortSpec { keys: keys.iter().map(|k| k.expr.clone()).collect(), desc: keys.iter().map(|k| k.desc).collect() }
    }
}

/// Runs oblivious kernels, charging costs to the current operator.
pub struct Engine<'a> {
    pub rec: &'a mut Recorder,
    pub env: &'a Env,
    op: NodeId,
    name: &'static str,
    /// Output writes not yet charged; their width is known once the output
    /// is trimmed.
    pending_writes: u64,
}

fn key_cmp(a: &[Value], b: &[Value], desc: &[bool]) -> Ordering {
    for (i, (x, y)) in a.iter().zip(b).enumerate() {
        let o = if desc.get(i).copied().unwrap_or(false) { y.cmp(x) } else { x.cmp(y) };
        if o != Ordering::Equal {
            return o;
        }
    }
    Ordering::Equal
}

/// Whether slot `a` belongs before slot `b`: valid first, then keys, then tag.
fn before(a: &Slot, ka: &[Value], b: &Slot, kb: &[Value], desc: &[bool]) -> bool {
    match (a.valid, b.valid) {
        (true, false) => true,
        (false, true) => false,
        (true, true) => match key_cmp(ka, kb, desc) {
            Ordering::Equal => a.tag < b.tag,
            o => o == Ordering::Less,
        },
        (false, false) => a.tag < b.tag,
    }
}

fn same_group(a: &Slot, ka: &[Value], b: &Slot, kb: &[Value]) -> bool {
    a.valid && b.valid && ka == kb
}

fn placeholders(types: &[ValueType]) -> Vec<Value> {
    types.iter().map(|t| t.placeholder()).collect()
}

fn types_of(schema: &[(String, ValueType)]) -> Vec<ValueType> {
    schema.iter().map(|(_, t)| *t).collect()
}

pub(crate) fn acc_input(call: &AggCall, valid: bool, arg: Option<&Value>) -> Value {
    match (call.func, arg) {
        (AggFunc::Count | AggFunc::CountDistinct, None) => Value::Int(i64::from(valid)),
        (AggFunc::Count | AggFunc::CountDistinct, Some(v)) => Value::Int(i64::from(valid && !v.is_null())),
        (_, Some(v)) if valid => v.clone(),
        _ => Value::Null,
    }
}

/// Accumulator of an aggregate over no rows.
pub(crate) fn acc_start(func: AggFunc) -> Value {
    match func {
        AggFunc::Count | AggFunc::CountDistinct => Value::Int(0),
        _ => Value::Null,
    }
}

pub(crate) fn acc_fold(func: AggFunc, a: &Value, b: &Value) -> Value {
    match (a, b) {
        (Value::Null, x) | (x, Value::Null) => x.clone(),
        (x, y) => match func {
            AggFunc::Count | AggFunc::CountDistinct | AggFunc::Sum => {
                Value::Int(x.as_int().unwrap_or(0).wrapping_add(y.as_int().unwrap_or(0)))
            }
            AggFunc::Min => x.clone().min(y.clone()),
            AggFunc::Max => x.clone().max(y.clone()),
        },
    }
}

impl<'a> Engine<'a> {
    pub fn new(rec: &'a mut Recorder, env: &'a Env) -> Engine<'a> {
        Engine { rec, env, op: 0, name: "", pending_writes: 0 }
    }

    /// Charges subsequent work to operator `op`.
    pub fn at(&mut self, op: NodeId, name: &'static str) {
        self.op = op;
        self.name = name;
        self.pending_writes = 0;
    }

    fn ev(&mut self, kind: EventKind, a: usize, b: usize) {
        self.rec.event(kind, a, b, self.op);
    }

    fn charge(&mut self, compares: u64, accesses: u64, bits: u64) {
        let c = self.rec.cost(self.op, self.name);
        c.compares += compares;
        c.accesses += accesses;
        c.tuple_bits += bits;
    }

    /// Closes the current operator's run: charges the pending output writes
    /// at the width of the final output.
    pub fn finish(&mut self, out: &PaddedRelation) {
        let writes = std::mem::take(&mut self.pending_writes);
        let w = out.width();
        let c = self.rec.cost(self.op, self.name);
        c.tuple_bits += writes * w;
        c.output_slots += out.len() as u64;
    }

    /// Slot count unchanged; a slot stays valid iff the predicate holds.
    /// Invalidated slots are reset to placeholders.
    pub fn filter(&mut self, mut r: PaddedRelation, predicate: &Expr) -> PaddedRelation {
        let n = r.len();
        let w = r.width();
        let ph = PaddedRelation::placeholder_row(&r.schema);
        for (i, s) in r.slots.iter_mut().enumerate() {
            self.rec.event(EventKind::Read, i, i, self.op);
            self.rec.event(EventKind::Compare, i, i, self.op);
            let keep = s.valid && predicate.holds(&s.values, self.env);
            if !keep {
                s.values.clone_from(&ph);
            }
            s.valid = keep;
            self.rec.event(EventKind::Write, i, i, self.op);
        }
        self.charge(n as u64, 2 * n as u64, n as u64 * w);
        self.pending_writes += n as u64;
        r
    }

    /// A filter evaluated inside a neighbouring operator's pass: compares
    /// are charged, but it adds no memory traffic of its own.
    pub fn fused_filter(&mut self, mut r: PaddedRelation, predicate: &Expr) -> PaddedRelation {
        let ph = PaddedRelation::placeholder_row(&r.schema);
        for s in &mut r.slots {
            let keep = s.valid && predicate.holds(&s.values, self.env);
            if !keep {
                s.values.clone_from(&ph);
            }
            s.valid = keep;
        }
        self.charge(r.len() as u64, 0, 0);
        r
    }

    fn map_rows(&self, mut r: PaddedRelation, exprs: &[Expr], schema: Vec<(String, ValueType)>) -> PaddedRelation {
        let ph = placeholders(&types_of(&schema));
        for s in &mut r.slots {
            s.values = if s.valid { exprs.iter().map(|e| e.eval(&s.values, self.env)).collect() } else { ph.clone() };
        }
        r.schema = schema;
        r
    }

    pub fn project(&mut self, r: PaddedRelation, exprs: &[Expr], schema: Vec<(String, ValueType)>) -> PaddedRelation {
        let n = r.len();
        let w = r.width();
        for i in 0..n {
            self.ev(EventKind::Read, i, i);
            self.ev(EventKind::Write, i, i);
        }
        self.charge(0, 2 * n as u64, n as u64 * w);
        self.pending_writes += n as u64;
        self.map_rows(r, exprs, schema)
    }

    /// A projection computed inside a neighbouring operator's pass.
    pub fn fused_project(&mut self, r: PaddedRelation, exprs: &[Expr], schema: Vec<(String, ValueType)>) -> PaddedRelation {
        self.map_rows(r, exprs, schema)
    }

    /// Nested loops over every pair: exactly `m * n` output slots.
    pub fn join(&mut self, l: PaddedRelation, r: PaddedRelation, predicate: Option<&Expr>) -> PaddedRelation {
        let (m, n) = (l.len(), r.len());
        let mut schema = l.schema.clone();
        schema.extend(r.schema.iter().cloned());
        let ph = PaddedRelation::placeholder_row(&schema);
        let mut slots = Vec::with_capacity(m * n);
        for (i, a) in l.slots.iter().enumerate() {
            for (j, b) in r.slots.iter().enumerate() {
                self.ev(EventKind::Compare, i, j);
                let mut values = Vec::with_capacity(schema.len());
                values.extend(a.values.iter().cloned());
                values.extend(b.values.iter().cloned());
                let valid = a.valid && b.valid && predicate.is_none_or(|p| p.holds(&values, self.env));
                if !valid {
                    values.clone_from(&ph);
                }
                let k = i * n + j;
                self.ev(EventKind::Emit, k, k);
                slots.push(Slot { valid, values, tag: Tag { origin: a.tag.origin, index: k as u32 } });
            }
        }
        let pairs = (m * n) as u64;
        self.charge(pairs, 3 * pairs, pairs * (l.width() + r.width() - 1));
        self.pending_writes += pairs;
        let mut origin_counts = l.origin_counts;
        for (c, d) in origin_counts.iter_mut().zip(r.origin_counts) {
            *c += d;
        }
        PaddedRelation { schema, slots, origin_counts }
    }

    /// Bitonic network over `slots` padded to a power of two. `keys` holds
    /// each slot's precomputed sort key.
    fn network(&mut self, slots: &mut Vec<Slot>, keys: &mut Vec<Vec<Value>>, desc: &[bool], width: u64) {
        let n = slots.len();
        if n < 2 {
            return;
        }
        let size = n.next_power_of_two();
        let kw = keys.first().map_or(0, Vec::len);
        let vw = slots[0].values.len();
        for i in n..size {
            slots.push(Slot {
                valid: false,
                values: vec![Value::Null; vw],
                tag: Tag { origin: ORIGIN_PAD, index: i as u32 },
            });
            keys.push(vec![Value::Null; kw]);
        }
        let mut exchanges = 0u64;
        let mut k = 2;
        while k <= size {
            let mut j = k / 2;
            while j > 0 {
                for i in 0..size {
                    let l = i ^ j;
                    if l <= i {
                        continue;
                    }
                    let ascending = i & k == 0;
                    self.ev(EventKind::Compare, i, l);
                    self.ev(EventKind::Swap, i, l);
                    exchanges += 1;
                    let out_of_order = if ascending {
                        before(&slots[l], &keys[l], &slots[i], &keys[i], desc)
                    } else {
                        before(&slots[i], &keys[i], &slots[l], &keys[l], desc)
                    };
                    if out_of_order {
                        slots.swap(i, l);
                        keys.swap(i, l);
                    }
                }
                j /= 2;
            }
            k *= 2;
        }
        slots.truncate(n);
        keys.truncate(n);
        self.charge(exchanges, 4 * exchanges, 4 * exchanges * width);
    }

    fn sort_keys(&self, r: &PaddedRelation, exprs: &[Expr]) -> Vec<Vec<Value>> {
        r.slots.iter().map(|s| exprs.iter().map(|e| e.eval(&s.values, self.env)).collect()).collect()
    }

    /// Valid slots first in key order; ties by tag.
    pub fn sort(&mut self, mut r: PaddedRelation, spec: &SortSpec) -> PaddedRelation {
        let mut keys = self.sort_keys(&r, &spec.keys);
        let w = r.width();
        self.network(&mut r.slots, &mut keys, &spec.desc, w);
        r
    }

    /// Sorts on every column, then invalidates each slot equal to its
    /// predecessor.
    pub fn distinct(&mut self, r: PaddedRelation) -> PaddedRelation {
        let all: Vec<Expr> = (0..r.schema.len()).map(Expr::Column).collect();
        let mut r = self.sort(r, &SortSpec::ascending(all));
        let n = r.len();
        let w = r.width();
        let ph = PaddedRelation::placeholder_row(&r.schema);
        let valid: Vec<bool> = r.slots.iter().map(|s| s.valid).collect();
        let mut dup = vec![false; n];
        for i in 0..n {
            self.ev(EventKind::Read, i, i);
            self.ev(EventKind::Compare, i.saturating_sub(1), i);
            if i > 0 {
                let (a, b) = (&r.slots[i - 1], &r.slots[i]);
                dup[i] = valid[i - 1] && valid[i] && a.values == b.values;
            }
            self.ev(EventKind::Write, i, i);
        }
        for (s, d) in r.slots.iter_mut().zip(dup) {
            if d {
                s.valid = false;
                s.values.clone_from(&ph);
            }
        }
        self.charge(n as u64, 2 * n as u64, n as u64 * w);
        self.pending_writes += n as u64;
        r
    }

    /// Grouped: sort on the group key, then fold each slot into its
    /// successor within the group and invalidate it, leaving one valid slot
    /// per group; `n` slots out. Global: exactly one slot out.
    pub fn aggregate(
        &mut self,
        r: PaddedRelation,
        group_by: &[Expr],
        aggs: &[AggCall],
        schema: Vec<(String, ValueType)>,
    ) -> PaddedRelation {
        let n = r.len();
        let g = group_by.len();
        let minmax = aggs.iter().filter(|a| matches!(a.func, AggFunc::Min | AggFunc::Max)).count() as u64;
        let types = types_of(&schema);
        // group values followed by one accumulator per aggregate
        let rows: Vec<Slot> = r
            .slots
            .iter()
            .map(|s| {
                let mut values: Vec<Value> = group_by.iter().map(|e| e.eval(&s.values, self.env)).collect();
                for a in aggs {
                    let arg = a.arg.as_ref().map(|e| e.eval(&s.values, self.env));
                    values.push(acc_input(a, s.valid, arg.as_ref()));
                }
                Slot { valid: s.valid, values, tag: s.tag }
            })
            .collect();
        let w = width_of(&schema);
        if g == 0 {
            let mut acc: Vec<Value> = aggs.iter().map(|a| acc_start(a.func)).collect();
            for (i, s) in rows.iter().enumerate() {
                self.ev(EventKind::Read, i, i);
                for (k, a) in aggs.iter().enumerate() {
                    acc[k] = acc_fold(a.func, &acc[k], &s.values[k]);
                }
            }
            self.ev(EventKind::Write, 0, 0);
            self.charge(n as u64 * minmax, n as u64 + 1, n as u64 * w);
            self.pending_writes += 1;
            let tag = Tag { origin: 0, index: 0 };
            return PaddedRelation { schema, slots: vec![Slot { valid: true, values: acc, tag }], origin_counts: r.origin_counts };
        }
        let mut slots = rows;
        let mut keys: Vec<Vec<Value>> = slots.iter().map(|s| s.values[..g].to_vec()).collect();
        self.network(&mut slots, &mut keys, &[], w);
        let ph = placeholders(&types);
        for i in 0..n {
            self.ev(EventKind::Read, i, i);
            self.ev(EventKind::Compare, i.saturating_sub(1), i);
            if i > 0 && same_group(&slots[i - 1], &keys[i - 1], &slots[i], &keys[i]) {
                for (k, a) in aggs.iter().enumerate() {
                    let folded = acc_fold(a.func, &slots[i - 1].values[g + k], &slots[i].values[g + k]);
                    slots[i].values[g + k] = folded;
                }
                slots[i - 1].valid = false;
                slots[i - 1].values.clone_from(&ph);
            }
            self.ev(EventKind::Write, i.saturating_sub(1), i);
        }
        for s in &mut slots {
            if !s.valid {
                s.values.clone_from(&ph);
            }
        }
        self.charge(n as u64 * (1 + minmax), 2 * n as u64, n as u64 * w);
        self.pending_writes += n as u64;
        PaddedRelation { schema, slots, origin_counts: r.origin_counts }
    }

    /// Sorts on partition then order keys and numbers each slot within its
    /// partition, appending the number as a new column.
    pub fn window(
        &mut self,
        r: PaddedRelation,
        partition_by: &[Expr],
        order_by: &[SortKey],
        name: &str,
    ) -> PaddedRelation {
        let p = partition_by.len();
        let mut spec = SortSpec::ascending(partition_by.to_vec());
        spec.keys.extend(order_by.iter().map(|k| k.expr.clone()));
        spec.desc.extend(order_by.iter().map(|k| k.desc));
        let mut keys = self.sort_keys(&r, &spec.keys);
        let mut r = r;
        let w = r.width();
        self.network(&mut r.slots, &mut keys, &spec.desc, w);
        let n = r.len();
        let mut prev = 0i64;
        for i in 0..n {
            self.ev(EventKind::Read, i, i);
            self.ev(EventKind::Compare, i.saturating_sub(1), i);
            let same = i > 0 && same_group(&r.slots[i - 1], &keys[i - 1][..p], &r.slots[i], &keys[i][..p]);
            let num = if same { prev + 1 } else { 1 };
            prev = num;
            let s = &mut r.slots[i];
            s.values.push(Value::Int(if s.valid { num } else { 0 }));
            self.ev(EventKind::Write, i, i);
        }
        r.schema.push((name.to_string(), ValueType::Int64));
        self.charge(n as u64, 2 * n as u64, n as u64 * w);
        self.pending_writes += n as u64;
        r
    }

    /// The first `k` slots. Unless the input is already sorted with valid
    /// slots first, it is compacted by validity beforehand, keeping order.
    pub fn limit(&mut self, mut r: PaddedRelation, k: u64, compact: bool) -> PaddedRelation {
        let w = r.width();
        if compact {
            for (i, s) in r.slots.iter_mut().enumerate() {
                s.tag = Tag { origin: 0, index: i as u32 };
            }
            let mut keys = vec![Vec::new(); r.len()];
            self.network(&mut r.slots, &mut keys, &[], w);
        }
        let out = (k as usize).min(r.len());
        r.slots.truncate(out);
        for i in 0..out {
            self.ev(EventKind::Read, i, i);
            self.ev(EventKind::Write, i, i);
        }
        self.charge(0, 2 * out as u64, out as u64 * w);
        self.pending_writes += out as u64;
        r
    }
}
