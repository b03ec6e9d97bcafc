//! Broker/provider messages and their binary frame codec.
//!
//! A frame is a little-endian `u64` byte length followed by the body: a
//! one-byte variant tag, then the fields in declaration order. Integers are
//! little-endian 64-bit, strings are length-prefixed UTF-8 and relations are
//! a schema, a row count, then per row a validity byte and the values.

use crate::catalog::Relation;
use crate::error::{Error, Result};
use crate::oblivious::{PaddedRelation, Slot, Tag};
use crate::plan::NodeId;
use crate::value::{Value, ValueType};

/// Restricts rows to those whose key columns take one of `values`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeyFilter {
    pub positions: Vec<usize>,
    pub values: Vec<Vec<Value>>,
}

impl KeyFilter {
    pub fn new(positions: Vec<usize>, mut values: Vec<Vec<Value>>) -> KeyFilter {
        values.sort();
        values.dedup();
        KeyFilter { positions, values }
    }

    pub fn admits(&self, row: &[Value]) -> bool {
        let key: Vec<Value> = self.positions.iter().map(|p| row[*p].clone()).collect();
        self.values.binary_search(&key).is_ok()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Message {
    /// Installs a serialized sub-plan at a provider.
    PlanFragment { id: u64, body: String },
    Ack { id: u64 },
    /// Distinct key values of a fragment leaf.
    CensusRequest { fragment: u64, leaf: NodeId, positions: Vec<usize> },
    CensusReply { fragment: u64, values: Relation },
    /// Output of a local host, as engine input or as plaintext.
    InputRequest { fragment: u64, host: NodeId, filter: Option<KeyFilter>, secure: bool, step: u64 },
    SecureStepInput { step: u64, input: PaddedRelation },
    /// Plaintext evaluation of a sliced region for one key value.
    TrackRequest { fragment: u64, exit: NodeId, value: Vec<Value> },
    LocalResult { fragment: u64, node: NodeId, partition: Option<Vec<Value>>, rel: Relation },
    /// A replicated membership table for `IN` predicates.
    TableRequest { table: String },
    TableReply { table: String, rel: Relation },
    FinalResult(Relation),
    Failure(String),
    Shutdown,
}

impl Message {
    pub fn name(&self) -> &'static str {
        match self {
            Message::PlanFragment { .. } => "PlanFragment",
            Message::Ack { .. } => "Ack",
            Message::CensusRequest { .. } => "CensusRequest",
            Message::CensusReply { .. } => "CensusReply",
            Message::InputRequest { .. } => "InputRequest",
            Message::SecureStepInput { .. } => "SecureStepInput",
            Message::TrackRequest { .. } => "TrackRequest",
            Message::LocalResult { .. } => "LocalResult",
            Message::TableRequest { .. } => "TableRequest",
            Message::TableReply { .. } => "TableReply",
            Message::FinalResult(_) => "FinalResult",
            Message::Failure(_) => "Failure",
            Message::Shutdown => "Shutdown",
        }
    }
}

#[derive(Default)]
struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    fn usize(&mut self, v: usize) {
        self.u64(v as u64);
    }

    fn bool(&mut self, v: bool) {
        self.u8(u8::from(v));
    }

    fn str(&mut self, s: &str) {
        self.usize(s.len());
        self.buf.extend_from_slice(s.as_bytes());
    }

    fn value(&mut self, v: &Value) {
        match v {
            Value::Null => self.u8(0),
            Value::Int(i) => {
                self.u8(1);
                self.u64(*i as u64);
            }
            Value::Text(s) => {
                self.u8(2);
                self.str(s);
            }
            Value::Date(d) => {
                self.u8(3);
                self.u64(i64::from(*d) as u64);
            }
        }
    }

    fn values(&mut self, vs: &[Value]) {
        self.usize(vs.len());
        for v in vs {
            self.value(v);
        }
    }

    fn positions(&mut self, ps: &[usize]) {
        self.usize(ps.len());
        for p in ps {
            self.usize(*p);
        }
    }

    fn schema(&mut self, schema: &[(String, ValueType)]) {
        self.usize(schema.len());
        for (name, t) in schema {
            self.str(name);
            self.u8(match t {
                ValueType::Int64 => 0,
                ValueType::Text => 1,
                ValueType::Date => 2,
            });
        }
    }

    fn relation(&mut self, r: &Relation) {
        self.schema(&r.schema);
        self.usize(r.rows.len());
        for row in &r.rows {
            self.bool(true);
            for v in row {
                self.value(v);
            }
        }
    }

    fn padded(&mut self, r: &PaddedRelation) {
        self.schema(&r.schema);
        for c in r.origin_counts {
            self.u64(c);
        }
        self.usize(r.slots.len());
        for s in &r.slots {
            self.bool(s.valid);
            self.u8(s.tag.origin);
            self.u64(u64::from(s.tag.index));
            for v in &s.values {
                self.value(v);
            }
        }
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

fn short() -> Error {
    Error::Codec("truncated frame".into())
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|e| *e <= self.buf.len()).ok_or_else(short)?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u64(&mut self) -> Result<u64> {
        let b = self.take(8)?;
        Ok(u64::from_le_bytes(b.try_into().expect("eight bytes")))
    }

    fn usize(&mut self) -> Result<usize> {
        usize::try_from(self.u64()?).map_err(|_| Error::Codec("length out of range".into()))
    }

    /// A count of items that each take at least one byte.
    fn count(&mut self) -> Result<usize> {
        let n = self.usize()?;
        if n > self.buf.len() - self.pos {
            return Err(short());
        }
        Ok(n)
    }

    fn bool(&mut self) -> Result<bool> {
        match self.u8()? {
            0 => Ok(false),
            1 => Ok(true),
            b => Err(Error::Codec(format!("bad boolean byte {b}"))),
        }
    }

    fn str(&mut self) -> Result<String> {
        let n = self.count()?;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| Error::Codec("invalid UTF-8".into()))
    }

    fn value(&mut self) -> Result<Value> {
        Ok(match self.u8()? {
            0 => Value::Null,
            1 => Value::Int(self.u64()? as i64),
            2 => Value::Text(self.str()?),
            3 => Value::Date(
                i32::try_from(self.u64()? as i64).map_err(|_| Error::Codec("date out of range".into()))?,
            ),
            t => return Err(Error::Codec(format!("bad value tag {t}"))),
        })
    }

    fn values(&mut self) -> Result<Vec<Value>> {
        let n = self.count()?;
        (0..n).map(|_| self.value()).collect()
    }

    fn positions(&mut self) -> Result<Vec<usize>> {
        let n = self.count()?;
        (0..n).map(|_| self.usize()).collect()
    }

    fn schema(&mut self) -> Result<Vec<(String, ValueType)>> {
        let n = self.count()?;
        (0..n)
            .map(|_| {
                let name = self.str()?;
                let t = match self.u8()? {
                    0 => ValueType::Int64,
                    1 => ValueType::Text,
                    2 => ValueType::Date,
                    t => return Err(Error::Codec(format!("bad type tag {t}"))),
                };
                Ok((name, t))
            })
            .collect()
    }

    fn row(&mut self, arity: usize) -> Result<Vec<Value>> {
        (0..arity).map(|_| self.value()).collect()
    }

    fn relation(&mut self) -> Result<Relation> {
        let schema = self.schema()?;
        let n = self.count()?;
        let mut rows = Vec::with_capacity(n);
        for _ in 0..n {
            if !self.bool()? {
                return Err(Error::Codec("plaintext relation with an invalid row".into()));
            }
            rows.push(self.row(schema.len())?);
        }
        Ok(Relation { schema, rows })
    }

    fn padded(&mut self) -> Result<PaddedRelation> {
        let schema = self.schema()?;
        let mut origin_counts = [0; 3];
        for c in &mut origin_counts {
            *c = self.u64()?;
        }
        let n = self.count()?;
        let mut slots = Vec::with_capacity(n);
        for _ in 0..n {
            let valid = self.bool()?;
            let origin = self.u8()?;
            let index = u32::try_from(self.u64()?).map_err(|_| Error::Codec("slot index out of range".into()))?;
            let values = self.row(schema.len())?;
            slots.push(Slot { valid, values, tag: Tag { origin, index } });
        }
        Ok(PaddedRelation { schema, slots, origin_counts })
    }
}

/// Encodes a message as one length-prefixed frame.
pub fn encode(msg: &Message) -> Vec<u8> {
    let mut w = Writer::default();
    match msg {
        Message::PlanFragment { id, body } => {
            w.u8(0);
            w.u64(*id);
            w.str(body);
        }
        Message::Ack { id } => {
            w.u8(1);
            w.u64(*id);
        }
        Message::CensusRequest { fragment, leaf, positions } => {
            w.u8(2);
            w.u64(*fragment);
            w.usize(*leaf);
            w.positions(positions);
        }
        Message::CensusReply { fragment, values } => {
            w.u8(3);
            w.u64(*fragment);
            w.relation(values);
        }
        Message::InputRequest { fragment, host, filter, secure, step } => {
            w.u8(4);
            w.u64(*fragment);
            w.usize(*host);
            match filter {
                None => w.u8(0),
                Some(f) => {
                    w.u8(1);
                    w.positions(&f.positions);
                    w.usize(f.values.len());
                    for v in &f.values {
                        w.values(v);
                    }
                }
            }
            w.bool(*secure);
            w.u64(*step);
        }
        Message::SecureStepInput { step, input } => {
            w.u8(5);
            w.u64(*step);
            w.padded(input);
        }
        Message::TrackRequest { fragment, exit, value } => {
            w.u8(6);
            w.u64(*fragment);
            w.usize(*exit);
            w.values(value);
        }
        Message::LocalResult { fragment, node, partition, rel } => {
            w.u8(7);
            w.u64(*fragment);
            w.usize(*node);
            match partition {
                None => w.u8(0),
                Some(v) => {
                    w.u8(1);
                    w.values(v);
                }
            }
            w.relation(rel);
        }
        Message::TableRequest { table } => {
            w.u8(8);
            w.str(table);
        }
        Message::TableReply { table, rel } => {
            w.u8(9);
            w.str(table);
            w.relation(rel);
        }
        Message::FinalResult(rel) => {
            w.u8(10);
            w.relation(rel);
        }
        Message::Failure(text) => {
            w.u8(11);
            w.str(text);
        }
        Message::Shutdown => w.u8(12),
    }
    let mut frame = (w.buf.len() as u64).to_le_bytes().to_vec();
    frame.extend(w.buf);
    frame
}

/// Decodes one whole frame.
pub fn decode(frame: &[u8]) -> Result<Message> {
    let mut r = Reader { buf: frame, pos: 0 };
    let len = r.usize()?;
    if len != frame.len() - 8 {
        return Err(Error::Codec(format!("frame length {len} does not match {} body bytes", frame.len() - 8)));
    }
    let msg = match r.u8()? {
        0 => Message::PlanFragment { id: r.u64()?, body: r.str()? },
        1 => Message::Ack { id: r.u64()? },
        2 => Message::CensusRequest { fragment: r.u64()?, leaf: r.usize()?, positions: r.positions()? },
        3 => Message::CensusReply { fragment: r.u64()?, values: r.relation()? },
        4 => {
            let fragment = r.u64()?;
            let host = r.usize()?;
            let filter = if r.bool()? {
                let positions = r.positions()?;
                let n = r.count()?;
                let values = (0..n).map(|_| r.values()).collect::<Result<_>>()?;
                Some(KeyFilter::new(positions, values))
            } else {
                None
            };
            Message::InputRequest { fragment, host, filter, secure: r.bool()?, step: r.u64()? }
        }
        5 => Message::SecureStepInput { step: r.u64()?, input: r.padded()? },
        6 => Message::TrackRequest { fragment: r.u64()?, exit: r.usize()?, value: r.values()? },
        7 => {
            let fragment = r.u64()?;
            let node = r.usize()?;
            let partition = if r.bool()? { Some(r.values()?) } else { None };
            Message::LocalResult { fragment, node, partition, rel: r.relation()? }
        }
        8 => Message::TableRequest { table: r.str()? },
        9 => Message::TableReply { table: r.str()?, rel: r.relation()? },
        10 => Message::FinalResult(r.relation()?),
        11 => Message::Failure(r.str()?),
        12 => Message::Shutdown,
        t => return Err(Error::Codec(format!("unknown message tag {t}"))),
    };
    if r.pos != frame.len() {
        return Err(Error::Codec("trailing bytes in frame".into()));
    }
    Ok(msg)
}

/// Reads one frame from a byte stream; `None` at a clean end of stream.
pub fn read_frame(src: &mut impl std::io::Read) -> Result<Option<Vec<u8>>> {
    let mut len = [0u8; 8];
    match src.read_exact(&mut len) {
        Ok(()) => {}
        Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => return Ok(None),
        Err(e) => return Err(Error::Codec(e.to_string())),
    }
    let n = usize::try_from(u64::from_le_bytes(len)).map_err(|_| Error::Codec("frame too large".into()))?;
    let mut frame = len.to_vec();
    frame.resize(8 + n, 0);
    src.read_exact(&mut frame[8..]).map_err(|e| Error::Codec(e.to_string()))?;
    Ok(Some(frame))
}
