//! Boolean circuits: text format, validation and plaintext evaluation.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::error::{Error, Result};

pub type Wire = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GateKind {
    And,
    Or,
    Xor,
    Not,
}

impl GateKind {
    pub const ALL: [GateKind; 4] = [GateKind::And, GateKind::Or, GateKind::Xor, GateKind::Not];

    pub fn arity(self) -> usize {
        match self {
            GateKind::Not => 1,
            _ => 2,
        }
    }

    pub fn apply(self, a: bool, b: bool) -> bool {
        match self {
            GateKind::And => a & b,
            GateKind::Or => a | b,
            GateKind::Xor => a ^ b,
            GateKind::Not => !a,
        }
    }

    fn parse(s: &str) -> Option<GateKind> {
        match s.to_ascii_uppercase().as_str() {
            "AND" => Some(GateKind::And),
            "OR" => Some(GateKind::Or),
            "XOR" => Some(GateKind::Xor),
            "NOT" => Some(GateKind::Not),
            _ => None,
        }
    }
}

impl fmt::Display for GateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GateKind::And => "AND",
            GateKind::Or => "OR",
            GateKind::Xor => "XOR",
            GateKind::Not => "NOT",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Gate {
    /// Nonce mixed into every row hash of this gate.
    pub id: u64,
    pub kind: GateKind,
    pub inputs: Vec<Wire>,
    pub output: Wire,
}

/// Gates in topological order. Alice's and Bob's input wires are listed
/// least significant bit first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BooleanCircuit {
    pub gates: Vec<Gate>,
    pub alice_inputs: Vec<Wire>,
    pub bob_inputs: Vec<Wire>,
    pub outputs: Vec<Wire>,
}

fn err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Circuit(msg.into()))
}

impl BooleanCircuit {
    /// Checks the wiring and puts the gates in topological order.
    pub fn new(gates: Vec<Gate>, alice_inputs: Vec<Wire>, bob_inputs: Vec<Wire>, outputs: Vec<Wire>) -> Result<Self> {
        let mut driver: BTreeMap<Wire, Option<usize>> = BTreeMap::new();
        for w in alice_inputs.iter().chain(&bob_inputs) {
            if driver.insert(*w, None).is_some() {
                return err(format!("wire {w} has more than one driver"));
            }
        }
        let mut ids = BTreeSet::new();
        for (i, g) in gates.iter().enumerate() {
            if !ids.insert(g.id) {
                return err(format!("duplicate gate id G{}", g.id));
            }
            if g.inputs.len() != g.kind.arity() {
                return err(format!("G{}: {} takes {} inputs", g.id, g.kind, g.kind.arity()));
            }
            if driver.insert(g.output, Some(i)).is_some() {
                return err(format!("wire {} has more than one driver", g.output));
            }
        }
        for w in gates.iter().flat_map(|g| &g.inputs).chain(&outputs) {
            if !driver.contains_key(w) {
                return err(format!("wire {w} is never driven"));
            }
        }
        // depth-first topological sort; a gate on the stack twice is a cycle
        #[derive(Clone, Copy, PartialEq)]
        enum Mark {
            New,
            Active,
            Done,
        }
        let mut mark = vec![Mark::New; gates.len()];
        let mut order = Vec::with_capacity(gates.len());
        for start in 0..gates.len() {
            let mut stack = vec![(start, 0usize)];
            while let Some((g, next)) = stack.pop() {
                if next == 0 {
                    match mark[g] {
                        Mark::Done => continue,
                        Mark::Active => return err(format!("cycle through G{}", gates[g].id)),
                        Mark::New => mark[g] = Mark::Active,
                    }
                }
                match gates[g].inputs.get(next) {
                    Some(w) => {
                        stack.push((g, next + 1));
                        if let Some(Some(d)) = driver.get(w) {
                            match mark[*d] {
                                Mark::Active => return err(format!("cycle through G{}", gates[*d].id)),
                                Mark::New => stack.push((*d, 0)),
                                Mark::Done => {}
                            }
                        }
                    }
                    None => {
                        mark[g] = Mark::Done;
                        order.push(g);
                    }
                }
            }
        }
        let gates = order.into_iter().map(|i| gates[i].clone()).collect();
        Ok(BooleanCircuit { gates, alice_inputs, bob_inputs, outputs })
    }

    /// Parses `INPUT A|B <wire..>`, `OUTPUT <wire..>` and
    /// `G<id> <KIND> <in1> [<in2>] -> <out>` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let (mut gates, mut alice, mut bob, mut outputs) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let at = |msg: String| Error::Circuit(format!("line {}: {msg}", n + 1));
            let wire = |s: &str| s.parse::<Wire>().map_err(|_| at(format!("bad wire `{s}`")));
            let words: Vec<&str> = line.split_whitespace().collect();
            match words[0].to_ascii_uppercase().as_str() {
                "INPUT" => {
                    let target = match words.get(1).map(|w| w.to_ascii_uppercase()).as_deref() {
                        Some("A") => &mut alice,
                        Some("B") => &mut bob,
                        _ => return Err(at("INPUT needs owner A or B".into())),
                    };
                    for w in &words[2..] {
                        target.push(wire(w)?);
                    }
                }
                "OUTPUT" => {
                    for w in &words[1..] {
                        outputs.push(wire(w)?);
                    }
                }
                g if g.starts_with('G') => {
                    let id = g[1..].parse::<u64>().map_err(|_| at(format!("bad gate id `{}`", words[0])))?;
                    let kind = words
                        .get(1)
                        .and_then(|k| GateKind::parse(k))
                        .ok_or_else(|| at("expected AND, OR, XOR or NOT".into()))?;
                    let arrow = words.iter().position(|w| *w == "->").ok_or_else(|| at("missing `->`".into()))?;
                    if words.len() != arrow + 2 {
                        return Err(at("expected one output wire after `->`".into()));
                    }
                    let inputs = words[2..arrow].iter().map(|w| wire(w)).collect::<Result<Vec<_>>>()?;
                    if inputs.len() != kind.arity() {
                        return Err(at(format!("{kind} takes {} inputs", kind.arity())));
                    }
                    gates.push(Gate { id, kind, inputs, output: wire(words[arrow + 1])? });
                }
                other => return Err(at(format!("unknown directive `{other}`"))),
            }
        }
        if outputs.is_empty() {
            return err("circuit declares no OUTPUT wires");
        }
        BooleanCircuit::new(gates, alice, bob, outputs)
    }

    /// Plaintext evaluation.
    pub fn eval(&self, alice: &[bool], bob: &[bool]) -> Result<Vec<bool>> {
        self.check_widths(alice, bob)?;
        let mut val: BTreeMap<Wire, bool> = BTreeMap::new();
        val.extend(self.alice_inputs.iter().copied().zip(alice.iter().copied()));
        val.extend(self.bob_inputs.iter().copied().zip(bob.iter().copied()));
        for g in &self.gates {
            let a = val[&g.inputs[0]];
            let b = g.inputs.get(1).is_some_and(|w| val[w]);
            val.insert(g.output, g.kind.apply(a, b));
        }
        Ok(self.outputs.iter().map(|w| val[w]).collect())
    }

    pub fn check_widths(&self, alice: &[bool], bob: &[bool]) -> Result<()> {
        if alice.len() != self.alice_inputs.len() || bob.len() != self.bob_inputs.len() {
            return err(format!(
                "expected {} bits from A and {} from B, got {} and {}",
                self.alice_inputs.len(),
                self.bob_inputs.len(),
                alice.len(),
                bob.len()
            ));
        }
        Ok(())
    }

    /// Every wire, in ascending order.
    pub fn wires(&self) -> BTreeSet<Wire> {
        self.alice_inputs.iter().chain(&self.bob_inputs).copied().chain(self.gates.iter().map(|g| g.output)).collect()
    }
}

/// The low `width` bits of `n`, least significant first.
pub fn to_bits(n: u64, width: usize) -> Vec<bool> {
    (0..width).map(|i| i < 64 && (n >> i) & 1 == 1).collect()
}
