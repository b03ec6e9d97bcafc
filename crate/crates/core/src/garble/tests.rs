use proptest::prelude::*;

use super::*;

const OR: &str = include_str!("../../../../data/circuits/or.txt");
const EQ2: &str = include_str!("../../../../data/circuits/eq2.txt");

fn run(c: &BooleanCircuit, seed: u64, a: &[bool], b: &[bool]) -> Vec<bool> {
    let (g, t) = garble(c, seed).unwrap();
    let ins = select_input_labels(&t, a, b).unwrap();
    decode(&t, &evaluate(&g, &ins).unwrap()).unwrap()
}

fn gate(id: u64, kind: GateKind, inputs: &[Wire], output: Wire) -> Gate {
    Gate { id, kind, inputs: inputs.to_vec(), output }
}

fn operand_choices(kind: GateKind, wires: &[Wire]) -> Vec<Vec<Wire>> {
    match kind.arity() {
        1 => wires.iter().map(|w| vec![*w]).collect(),
        _ => wires.iter().flat_map(|a| wires.iter().map(move |b| vec![*a, *b])).collect(),
    }
}

/// Every one- and two-gate circuit over one Alice wire (0) and one Bob wire (1).
fn small_circuits() -> Vec<BooleanCircuit> {
    let mut out = Vec::new();
    for k1 in GateKind::ALL {
        for in1 in operand_choices(k1, &[0, 1]) {
            let g1 = gate(0, k1, &in1, 2);
            out.push(BooleanCircuit::new(vec![g1.clone()], vec![0], vec![1], vec![2]).unwrap());
            for k2 in GateKind::ALL {
                for in2 in operand_choices(k2, &[0, 1, 2]) {
                    let g2 = gate(1, k2, &in2, 3);
                    for outs in [vec![3], vec![2, 3]] {
                        out.push(BooleanCircuit::new(vec![g1.clone(), g2.clone()], vec![0], vec![1], outs).unwrap());
                    }
                }
            }
        }
    }
    out
}

#[test]
fn parses_the_or_gate() {
    let c = BooleanCircuit::parse(OR).unwrap();
    assert_eq!(c.alice_inputs, vec![0]);
    assert_eq!(c.bob_inputs, vec![1]);
    assert_eq!(c.gates, vec![gate(0, GateKind::Or, &[0, 1], 2)]);
    let (g, _) = garble(&c, 1).unwrap();
    assert_eq!(g.gates[0].rows.len(), 4);
}

#[test]
fn not_gate_has_two_rows() {
    let c = BooleanCircuit::new(vec![gate(5, GateKind::Not, &[0], 1)], vec![0], vec![], vec![1]).unwrap();
    let (g, t) = garble(&c, 3).unwrap();
    assert_eq!(g.gates[0].rows.len(), 2);
    // only alice labels when bob has no inputs
    let ins = select_input_labels(&t, &[true], &[]).unwrap();
    assert_eq!(ins.labels.len(), 1);
    assert_eq!(decode(&t, &evaluate(&g, &ins).unwrap()).unwrap(), vec![false]);
}

#[test]
fn same_seed_same_garbling() {
    let c = BooleanCircuit::parse(EQ2).unwrap();
    assert_eq!(garble(&c, 9).unwrap(), garble(&c, 9).unwrap());
    assert_ne!(garble(&c, 9).unwrap().0, garble(&c, 10).unwrap().0);
}

#[test]
fn or_selects_one_label_per_wire() {
    let c = BooleanCircuit::parse(OR).unwrap();
    let (_, t) = garble(&c, 2).unwrap();
    let ins = select_input_labels(&t, &[true], &[false]).unwrap();
    assert_eq!(ins.labels[&0], t.labels(0).unwrap()[1]);
    assert_eq!(ins.labels[&1], t.labels(1).unwrap()[0]);
    assert!(select_input_labels(&t, &[true, false], &[false]).is_err());
    assert!(select_input_labels(&t, &[true], &[]).is_err());
}

#[test]
fn or_truth_table() {
    let c = BooleanCircuit::parse(OR).unwrap();
    for a in [false, true] {
        for b in [false, true] {
            assert_eq!(run(&c, 4, &[a], &[b]), vec![a | b]);
        }
    }
}

#[test]
fn all_small_circuits_are_correct() {
    let circuits = small_circuits();
    // first gate: 3 binary kinds x 4 operand pairs + NOT x 2; second gate: 3 x 9 + 3, two output lists
    assert_eq!(circuits.len(), 14 + 14 * 30 * 2);
    for (i, c) in circuits.iter().enumerate() {
        for a in [false, true] {
            for b in [false, true] {
                assert_eq!(run(c, i as u64, &[a], &[b]), c.eval(&[a], &[b]).unwrap(), "{c:?}");
            }
        }
    }
}

#[test]
fn equality_comparator_over_all_inputs() {
    let c = BooleanCircuit::parse(EQ2).unwrap();
    for x in 0..4u64 {
        for y in 0..4u64 {
            assert_eq!(run(&c, x * 4 + y, &to_bits(x, 2), &to_bits(y, 2)), vec![x == y], "{x} {y}");
        }
    }
}

#[test]
fn forged_label_is_rejected() {
    let c = BooleanCircuit::parse(OR).unwrap();
    let (_, t) = garble(&c, 2).unwrap();
    assert!(decode(&t, &[WireLabel([7; LABEL_BYTES])]).is_err());
}

#[test]
fn tampered_row_fails_to_decrypt() {
    let c = BooleanCircuit::parse(OR).unwrap();
    let (mut g, t) = garble(&c, 2).unwrap();
    for r in &mut g.gates[0].rows {
        r[ROW_BYTES - 1] ^= 1;
    }
    let ins = select_input_labels(&t, &[false], &[true]).unwrap();
    assert!(evaluate(&g, &ins).is_err());
}

#[test]
fn multi_output_bits_follow_output_order() {
    let text = "INPUT A 0\nINPUT B 1\nG0 AND 0 1 -> 2\nG1 XOR 0 1 -> 3\nOUTPUT 3 2\n";
    let c = BooleanCircuit::parse(text).unwrap();
    assert_eq!(run(&c, 1, &[true], &[true]), vec![false, true]);
    assert_eq!(run(&c, 1, &[true], &[false]), vec![true, false]);
}

#[test]
fn malformed_circuits_are_rejected() {
    for bad in [
        "INPUT A 0\nG0 NOT 0 -> 1\nG0 NOT 1 -> 2\nOUTPUT 2",
        "INPUT A 0\nG0 AND 0 2 -> 1\nG1 NOT 1 -> 2\nOUTPUT 2",
        "INPUT A 0\nG0 NOT 0 -> 0\nOUTPUT 0",
        "INPUT A 0\nG0 AND 0 -> 1\nOUTPUT 1",
        "INPUT A 0\nG0 NAND 0 0 -> 1\nOUTPUT 1",
        "INPUT A 0\nG0 NOT 3 -> 1\nOUTPUT 1",
        "INPUT C 0\nOUTPUT 0",
        "INPUT A 0\nG0 NOT 0 -> 1",
    ] {
        assert!(BooleanCircuit::parse(bad).is_err(), "{bad}");
    }
}

#[test]
fn gates_are_put_in_wiring_order() {
    let c = BooleanCircuit::parse("INPUT A 0\nG1 NOT 1 -> 2\nG0 NOT 0 -> 1\nOUTPUT 2").unwrap();
    assert_eq!(c.gates.iter().map(|g| g.id).collect::<Vec<_>>(), vec![0, 1]);
    assert_eq!(run(&c, 0, &[true], &[]), vec![true]);
}

/// Position of the row belonging to input combination `(a, b)`.
fn row_position(g: &GarbledCircuit, t: &GarblerTables, a: bool, b: bool) -> usize {
    let gate = &g.gates[0];
    let ins = [t.labels(gate.inputs[0]).unwrap()[a as usize], t.labels(gate.inputs[1]).unwrap()[b as usize]];
    let pad = row_pad(&ins, gate.gate_id);
    gate.rows.iter().position(|r| r.iter().zip(&pad).skip(LABEL_BYTES).all(|(x, y)| x == y)).unwrap()
}

#[test]
fn rows_are_uniformly_permuted() {
    let c = BooleanCircuit::parse(OR).unwrap();
    const SEEDS: u64 = 4000;
    for (a, b) in [(false, false), (true, true)] {
        let mut counts = [0u64; 4];
        for seed in 0..SEEDS {
            let (g, t) = garble(&c, seed).unwrap();
            counts[row_position(&g, &t, a, b)] += 1;
        }
        for n in counts {
            let freq = n as f64 / SEEDS as f64;
            assert!((freq - 0.25).abs() < 0.03, "{a} {b}: {counts:?}");
        }
    }
}

#[test]
fn evaluator_view_is_input_independent() {
    // which row decrypts is the only input-dependent thing the evaluator
    // sees besides labels; it must look the same for (0,0) and (1,1)
    let c = BooleanCircuit::parse(OR).unwrap();
    const SEEDS: u64 = 4000;
    let mut hist = [[0u64; 4]; 2];
    for (i, bits) in [false, true].into_iter().enumerate() {
        for seed in 0..SEEDS {
            let (g, t) = garble(&c, seed).unwrap();
            let ins = select_input_labels(&t, &[bits], &[bits]).unwrap();
            let (_, steps) = evaluate_traced(&g, &ins).unwrap();
            hist[i][steps[0].row] += 1;
        }
    }
    for p in 0..4 {
        let (x, y) = (hist[0][p] as f64 / SEEDS as f64, hist[1][p] as f64 / SEEDS as f64);
        assert!((x - y).abs() < 0.05, "{hist:?}");
    }
}

fn arb_circuit() -> impl Strategy<Value = (BooleanCircuit, Vec<bool>, Vec<bool>)> {
    (1usize..4, 0usize..4, 1usize..=64)
        .prop_flat_map(|(na, nb, ng)| {
            let gates = proptest::collection::vec((0usize..4, any::<prop::sample::Index>(), any::<prop::sample::Index>()), ng);
            let outs = proptest::collection::vec(any::<prop::sample::Index>(), 1..4);
            (Just(na), Just(nb), gates, outs, proptest::collection::vec(any::<bool>(), na), proptest::collection::vec(any::<bool>(), nb))
        })
        .prop_map(|(na, nb, specs, outs, a, b)| {
            let n_in = na + nb;
            let gates: Vec<Gate> = specs
                .iter()
                .enumerate()
                .map(|(i, (k, x, y))| {
                    let kind = GateKind::ALL[*k];
                    let avail = n_in + i;
                    let inputs = match kind.arity() {
                        1 => vec![x.index(avail)],
                        _ => vec![x.index(avail), y.index(avail)],
                    };
                    gate(1000 + i as u64, kind, &inputs, avail)
                })
                .collect();
            let total = n_in + gates.len();
            let outputs = outs.iter().map(|o| o.index(total)).collect();
            let c = BooleanCircuit::new(gates, (0..na).collect(), (na..n_in).collect(), outputs).unwrap();
            (c, a, b)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn garbled_evaluation_matches_plaintext((c, a, b) in arb_circuit(), seed in any::<u64>()) {
        prop_assert_eq!(run(&c, seed, &a, &b), c.eval(&a, &b).unwrap());
    }
}
