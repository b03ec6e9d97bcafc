//! Yao garbled circuits over boolean gates.
//!
//! Every wire gets two random 128-bit labels. A gate's rows encrypt the
//! output label under the hash of the input labels and the gate id, padded
//! with 64 zero bits so the evaluator can recognise the one row that
//! decrypts. Oblivious transfer is simulated: the garbler hands the
//! evaluator exactly one label per input wire.

mod circuit;
#[cfg(test)]
mod tests;

use std::collections::BTreeMap;
use std::fmt;

use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

pub use circuit::{to_bits, BooleanCircuit, Gate, GateKind, Wire};

use crate::error::{Error, Result};

pub const LABEL_BYTES: usize = 16;
pub const ROW_BYTES: usize = LABEL_BYTES + 8;

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct WireLabel(pub [u8; LABEL_BYTES]);

impl WireLabel {
    fn random(rng: &mut impl RngCore) -> WireLabel {
        let mut k = [0u8; LABEL_BYTES];
        rng.fill_bytes(&mut k);
        WireLabel(k)
    }
}

impl fmt::Debug for WireLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "WireLabel({})", hex(&self.0))
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub type Row = [u8; ROW_BYTES];

/// H(k_a ‖ k_b ‖ gate_id) truncated to one row; unary gates hash one label.
pub fn row_pad(labels: &[WireLabel], gate_id: u64) -> Row {
    let mut h = Sha256::new();
    for k in labels {
        h.update(k.0);
    }
    h.update(gate_id.to_le_bytes());
    let digest = h.finalize();
    let mut out = [0u8; ROW_BYTES];
    out.copy_from_slice(&digest[..ROW_BYTES]);
    out
}

fn xor(a: &Row, b: &Row) -> Row {
    let mut out = [0u8; ROW_BYTES];
    for i in 0..ROW_BYTES {
        out[i] = a[i] ^ b[i];
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GarbledGate {
    pub gate_id: u64,
    pub inputs: Vec<Wire>,
    pub output: Wire,
    /// Four rows, or two for NOT, in random order.
    pub rows: Vec<Row>,
}

/// What the evaluator receives: the wiring and the garbled tables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GarbledCircuit {
    pub gates: Vec<GarbledGate>,
    pub alice_inputs: Vec<Wire>,
    pub bob_inputs: Vec<Wire>,
    pub outputs: Vec<Wire>,
}

/// What the garbler keeps: both labels of every wire, `[label of 0, label of 1]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GarblerTables {
    labels: BTreeMap<Wire, [WireLabel; 2]>,
    alice_inputs: Vec<Wire>,
    bob_inputs: Vec<Wire>,
    outputs: Vec<Wire>,
}

impl GarblerTables {
    pub fn labels(&self, wire: Wire) -> Option<&[WireLabel; 2]> {
        self.labels.get(&wire)
    }
}

/// One label per input wire, as handed to the evaluator.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InputLabels {
    pub labels: BTreeMap<Wire, WireLabel>,
}

pub fn garble(circuit: &BooleanCircuit, seed: u64) -> Result<(GarbledCircuit, GarblerTables)> {
    // re-validate so hand-built circuits get the same checks as parsed ones
    let circuit = BooleanCircuit::new(
        circuit.gates.clone(),
        circuit.alice_inputs.clone(),
        circuit.bob_inputs.clone(),
        circuit.outputs.clone(),
    )?;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut labels = BTreeMap::new();
    for w in circuit.wires() {
        labels.insert(w, [WireLabel::random(&mut rng), WireLabel::random(&mut rng)]);
    }
    let mut gates = Vec::with_capacity(circuit.gates.len());
    for g in &circuit.gates {
        let out = labels[&g.output];
        let combos: Vec<(bool, bool)> = match g.kind.arity() {
            1 => vec![(false, false), (true, false)],
            _ => vec![(false, false), (false, true), (true, false), (true, true)],
        };
        let mut rows: Vec<Row> = combos
            .into_iter()
            .map(|(a, b)| {
                let mut ins = vec![labels[&g.inputs[0]][a as usize]];
                if let Some(w) = g.inputs.get(1) {
                    ins.push(labels[w][b as usize]);
                }
                let mut plain = [0u8; ROW_BYTES];
                plain[..LABEL_BYTES].copy_from_slice(&out[g.kind.apply(a, b) as usize].0);
                xor(&row_pad(&ins, g.id), &plain)
            })
            .collect();
        rows.shuffle(&mut rng);
        gates.push(GarbledGate { gate_id: g.id, inputs: g.inputs.clone(), output: g.output, rows });
    }
    let garbled = GarbledCircuit {
        gates,
        alice_inputs: circuit.alice_inputs.clone(),
        bob_inputs: circuit.bob_inputs.clone(),
        outputs: circuit.outputs.clone(),
    };
    let tables = GarblerTables {
        labels,
        alice_inputs: circuit.alice_inputs,
        bob_inputs: circuit.bob_inputs,
        outputs: circuit.outputs,
    };
    Ok((garbled, tables))
}

/// Simulated oblivious transfer: picks the label of each input bit.
pub fn select_input_labels(tables: &GarblerTables, alice: &[bool], bob: &[bool]) -> Result<InputLabels> {
    if alice.len() != tables.alice_inputs.len() || bob.len() != tables.bob_inputs.len() {
        return Err(Error::Circuit(format!(
            "expected {} bits from A and {} from B, got {} and {}",
            tables.alice_inputs.len(),
            tables.bob_inputs.len(),
            alice.len(),
            bob.len()
        )));
    }
    let wires = tables.alice_inputs.iter().zip(alice).chain(tables.bob_inputs.iter().zip(bob));
    let labels = wires.map(|(w, b)| (*w, tables.labels[w][*b as usize])).collect();
    Ok(InputLabels { labels })
}

/// Which row of which gate decrypted during evaluation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvalStep {
    pub gate_id: u64,
    pub row: usize,
    pub output: WireLabel,
}

pub fn evaluate(garbled: &GarbledCircuit, inputs: &InputLabels) -> Result<Vec<WireLabel>> {
    evaluate_traced(garbled, inputs).map(|(out, _)| out)
}

/// Evaluates gate by gate, trying every row until one ends in 64 zero bits.
pub fn evaluate_traced(garbled: &GarbledCircuit, inputs: &InputLabels) -> Result<(Vec<WireLabel>, Vec<EvalStep>)> {
    let mut wires = inputs.labels.clone();
    for w in garbled.alice_inputs.iter().chain(&garbled.bob_inputs) {
        if !wires.contains_key(w) {
            return Err(Error::Circuit(format!("no label for input wire {w}")));
        }
    }
    let mut steps = Vec::with_capacity(garbled.gates.len());
    for g in &garbled.gates {
        let ins: Vec<WireLabel> = g
            .inputs
            .iter()
            .map(|w| wires.get(w).copied().ok_or_else(|| Error::Circuit(format!("wire {w} has no label"))))
            .collect::<Result<_>>()?;
        let pad = row_pad(&ins, g.gate_id);
        let (row, plain) = g
            .rows
            .iter()
            .enumerate()
            .map(|(i, r)| (i, xor(r, &pad)))
            .find(|(_, p)| p[LABEL_BYTES..].iter().all(|b| *b == 0))
            .ok_or_else(|| Error::Circuit(format!("no row of G{} decrypts", g.gate_id)))?;
        let mut k = [0u8; LABEL_BYTES];
        k.copy_from_slice(&plain[..LABEL_BYTES]);
        wires.insert(g.output, WireLabel(k));
        steps.push(EvalStep { gate_id: g.gate_id, row, output: WireLabel(k) });
    }
    let out = garbled
        .outputs
        .iter()
        .map(|w| wires.get(w).copied().ok_or_else(|| Error::Circuit(format!("output wire {w} has no label"))))
        .collect::<Result<_>>()?;
    Ok((out, steps))
}

/// Maps output labels back to bits, in output-wire order.
pub fn decode(tables: &GarblerTables, outputs: &[WireLabel]) -> Result<Vec<bool>> {
    if outputs.len() != tables.outputs.len() {
        return Err(Error::Circuit(format!("expected {} output labels, got {}", tables.outputs.len(), outputs.len())));
    }
    tables
        .outputs
        .iter()
        .zip(outputs)
        .map(|(w, k)| match tables.labels[w].iter().position(|l| l == k) {
            Some(b) => Ok(b == 1),
            None => Err(Error::Circuit(format!("unknown label {} on output wire {w}", hex(&k.0)))),
        })
        .collect()
}
