use std::collections::BTreeMap;

use proptest::prelude::*;

use super::*;
use crate::plan::{AggCall, Env, Expr, SortKey};
use crate::sql::ast::{AggFunc, BinOp};
use crate::value::{Value, ValueType};

fn ints(names: &[&str], rows: &[Vec<i64>], origin: u8) -> PaddedRelation {
    let schema = names.iter().map(|n| (n.to_string(), ValueType::Int64)).collect();
    let rel = crate::Relation {
        schema,
        rows: rows.iter().map(|r| r.iter().map(|v| Value::Int(*v)).collect()).collect(),
    };
    PaddedRelation::from_relation(&rel, origin)
}

fn col(i: usize) -> Expr {
    Expr::Column(i)
}

fn eq(a: Expr, b: Expr) -> Expr {
    Expr::binary(BinOp::Eq, a, b)
}

fn lit(v: i64) -> Expr {
    Expr::Literal(Value::Int(v))
}

fn valid_rows(r: &PaddedRelation) -> Vec<Vec<Value>> {
    r.decode().rows
}

fn sorted(mut rows: Vec<Vec<Value>>) -> Vec<Vec<Value>> {
    rows.sort();
    rows
}

/// Runs `f` with a fresh tracing engine; returns the result and recorder.
fn run<T>(f: impl FnOnce(&mut Engine) -> T) -> (T, Recorder) {
    let env = Env::default();
    let mut rec = Recorder::new(true);
    let out = {
        let mut e = Engine::new(&mut rec, &env);
        e.at(1, "Op");
        f(&mut e)
    };
    (out, rec)
}

#[test]
fn merge_concatenates() {
    let a = ints(&["x"], &[vec![1], vec![2], vec![3]], 0);
    let b = ints(&["x"], &[vec![4], vec![5]], 1);
    let m = PaddedRelation::merge(a, b.clone()).unwrap();
    assert_eq!(m.len(), 5);
    assert_eq!(m.origin_counts, [3, 2, 0]);
    assert_eq!(m.slots[3].tag.origin, 1);
    let empty = PaddedRelation::empty(b.schema.clone());
    assert_eq!(PaddedRelation::merge(empty, b.clone()).unwrap().slots, b.slots);
    let text = PaddedRelation::empty(vec![("x".into(), ValueType::Text)]);
    assert!(PaddedRelation::merge(text, b).is_err());
}

#[test]
fn filter_keeps_cardinality() {
    let r = ints(&["x"], &[vec![1], vec![2], vec![3], vec![4]], 0);
    let (out, rec) = run(|e| e.filter(r, &eq(col(0), lit(3))));
    assert_eq!(out.len(), 4);
    assert_eq!(valid_rows(&out), vec![vec![Value::Int(3)]]);
    // invalid slots carry placeholders
    assert!(out.slots.iter().filter(|s| !s.valid).all(|s| s.values == vec![Value::Int(0)]));
    assert_eq!(rec.trace.unwrap().len(), 12);
}

#[test]
fn filter_on_null_invalidates() {
    let rel = crate::Relation { schema: vec![("x".into(), ValueType::Int64)], rows: vec![vec![Value::Null]] };
    let r = PaddedRelation::from_relation(&rel, 0);
    let (out, _) = run(|e| e.filter(r, &eq(col(0), col(0))));
    assert_eq!(out.valid_count(), 0);
}

#[test]
fn join_emits_every_pair() {
    let l = ints(&["a"], &[vec![1], vec![2]], 0);
    let r = ints(&["b"], &[vec![2], vec![3], vec![4]], 1);
    let (out, rec) = run(|e| e.join(l, r, Some(&eq(col(0), col(1)))));
    assert_eq!(out.len(), 6);
    assert_eq!(valid_rows(&out), vec![vec![Value::Int(2), Value::Int(2)]]);
    assert_eq!(rec.cost.total_compares(), 6);
    let (out, _) = run(|e| e.join(ints(&["a"], &[], 0), ints(&["b"], &[vec![1]], 1), None));
    assert_eq!(out.len(), 0);
}

#[test]
fn join_compares_exceed_matches() {
    let rows: Vec<Vec<i64>> = (0..50).map(|i| vec![i % 7]).collect();
    let l = ints(&["a"], &rows, 0);
    let r = ints(&["b"], &rows, 1);
    let (out, rec) = run(|e| e.join(l, r, Some(&eq(col(0), col(1)))));
    assert_eq!(rec.cost.total_compares(), 2500);
    assert!(out.valid_count() as u64 <= 2500);
}

#[test]
fn bitonic_eight_has_24_exchanges() {
    let r = ints(&["x"], &[vec![5], vec![1], vec![4], vec![2], vec![3]], 0);
    let (out, rec) = run(|e| e.sort(r, &SortSpec::ascending(vec![col(0)])));
    assert_eq!(rec.cost.total_compares(), 24);
    let got: Vec<i64> = out.slots.iter().map(|s| s.values[0].as_int().unwrap()).collect();
    assert_eq!(got, vec![1, 2, 3, 4, 5]);
}

#[test]
fn sort_trace_ignores_input_order() {
    let up = ints(&["x"], &(0..8).map(|i| vec![i]).collect::<Vec<_>>(), 0);
    let down = ints(&["x"], &(0..8).rev().map(|i| vec![i]).collect::<Vec<_>>(), 0);
    let spec = SortSpec::ascending(vec![col(0)]);
    let (_, a) = run(|e| e.sort(up, &spec));
    let (_, b) = run(|e| e.sort(down, &spec));
    assert_eq!(a.trace, b.trace);
}

#[test]
fn sort_puts_valid_first_and_honours_desc() {
    let r = ints(&["x"], &[vec![1], vec![9], vec![5], vec![7]], 0);
    let (r, _) = run(|e| e.filter(r, &Expr::binary(BinOp::Gt, col(0), lit(3))));
    let spec = SortSpec::from_keys(&[SortKey { expr: col(0), desc: true }]);
    let (out, _) = run(|e| e.sort(r, &spec));
    let got: Vec<(bool, Value)> = out.slots.iter().map(|s| (s.valid, s.values[0].clone())).collect();
    assert_eq!(
        got,
        vec![(true, Value::Int(9)), (true, Value::Int(7)), (true, Value::Int(5)), (false, Value::Int(0))]
    );
}

#[test]
fn distinct_drops_duplicates() {
    let r = ints(&["x"], &[vec![2], vec![2], vec![3]], 0);
    let (out, _) = run(|e| e.distinct(r));
    assert_eq!(out.len(), 3);
    assert_eq!(sorted(valid_rows(&out)), vec![vec![Value::Int(2)], vec![Value::Int(3)]]);
    let (out, _) = run(|e| e.distinct(ints(&["x"], &[], 0)));
    assert!(out.is_empty());
}

#[test]
fn aggregate_merges_partials() {
    let text = |s: &str| Value::Text(s.into());
    let schema = vec![("diag".to_string(), ValueType::Text), ("cnt".to_string(), ValueType::Int64)];
    let a = crate::Relation { schema: schema.clone(), rows: vec![vec![text("flu"), Value::Int(2)]] };
    let b = crate::Relation {
        schema: schema.clone(),
        rows: vec![vec![text("flu"), Value::Int(3)], vec![text("cold"), Value::Int(1)]],
    };
    let merged =
        PaddedRelation::merge(PaddedRelation::from_relation(&a, 0), PaddedRelation::from_relation(&b, 1)).unwrap();
    let aggs = vec![AggCall { func: AggFunc::Sum, arg: Some(col(1)) }];
    let (out, _) = run(|e| e.aggregate(merged, &[col(0)], &aggs, schema.clone()));
    assert_eq!(out.len(), 3);
    assert_eq!(
        sorted(valid_rows(&out)),
        vec![vec![text("cold"), Value::Int(1)], vec![text("flu"), Value::Int(5)]]
    );
}

#[test]
fn global_aggregate_has_one_slot() {
    let aggs = vec![
        AggCall { func: AggFunc::Count, arg: None },
        AggCall { func: AggFunc::Max, arg: Some(col(0)) },
    ];
    let schema = vec![("count".to_string(), ValueType::Int64), ("max".to_string(), ValueType::Int64)];
    let r = ints(&["x"], &[vec![4], vec![9], vec![1]], 0);
    let (out, rec) = run(|e| e.aggregate(r, &[], &aggs, schema.clone()));
    assert_eq!(valid_rows(&out), vec![vec![Value::Int(3), Value::Int(9)]]);
    assert_eq!(rec.cost.total_compares(), 3);
    let (out, _) = run(|e| e.aggregate(ints(&["x"], &[], 0), &[], &aggs, schema));
    assert_eq!(valid_rows(&out), vec![vec![Value::Int(0), Value::Null]]);
}

#[test]
fn window_numbers_rows_per_partition() {
    let r = ints(&["pid", "t"], &[vec![7, 3], vec![8, 1], vec![7, 1], vec![7, 2], vec![8, 5]], 0);
    let order = vec![SortKey { expr: col(1), desc: false }];
    let (out, _) = run(|e| e.window(r, &[col(0)], &order, "row_no"));
    let got: Vec<Vec<i64>> = out.slots.iter().map(|s| s.values.iter().map(|v| v.as_int().unwrap()).collect()).collect();
    assert_eq!(got, vec![vec![7, 1, 1], vec![7, 2, 2], vec![7, 3, 3], vec![8, 1, 1], vec![8, 5, 2]]);
    let (out, _) = run(|e| e.window(ints(&["pid", "t"], &[vec![1, 1]], 0), &[col(0)], &order, "row_no"));
    assert_eq!(out.slots[0].values[2], Value::Int(1));
}

#[test]
fn limit_takes_prefix() {
    let r = ints(&["x"], &(0..10).map(|i| vec![i]).collect::<Vec<_>>(), 0);
    let (out, _) = run(|e| e.limit(r.clone(), 3, false));
    assert_eq!(out.len(), 3);
    let (out, _) = run(|e| e.limit(r.clone(), 20, false));
    assert_eq!(out.len(), 10);
    let (out, _) = run(|e| e.limit(r, 0, false));
    assert!(out.is_empty());
    assert_eq!(out.schema.len(), 1);
}

#[test]
fn limit_compaction_keeps_order_of_valid_slots() {
    let r = ints(&["x"], &[vec![1], vec![8], vec![2], vec![9], vec![3]], 0);
    let (r, _) = run(|e| e.filter(r, &Expr::binary(BinOp::Gt, col(0), lit(5))));
    let (out, _) = run(|e| e.limit(r, 2, true));
    assert_eq!(valid_rows(&out), vec![vec![Value::Int(8)], vec![Value::Int(9)]]);
}

#[test]
fn cost_report_serializes() {
    let (_, rec) = run(|e| {
        let r = e.filter(ints(&["x"], &[vec![1]], 0), &eq(col(0), lit(1)));
        e.finish(&r);
    });
    let json: serde_json::Value = serde_json::from_str(&rec.cost.to_json()).unwrap();
    assert_eq!(json["operators"][0]["id"], 1);
    assert_eq!(json["operators"][0]["compares"], 1);
    assert_eq!(json["operators"][0]["output_slots"], 1);
}

fn rows_strategy(max: usize, width: usize) -> impl Strategy<Value = Vec<Vec<i64>>> {
    prop::collection::vec(prop::collection::vec(0i64..6, width), 0..max)
}

/// Every kernel applied to `r` (one column pair), in sequence.
fn all_kernels(e: &mut Engine, r: &PaddedRelation, s: &PaddedRelation) -> Vec<PaddedRelation> {
    let aggs = vec![
        AggCall { func: AggFunc::Count, arg: None },
        AggCall { func: AggFunc::Sum, arg: Some(col(1)) },
        AggCall { func: AggFunc::Min, arg: Some(col(1)) },
    ];
    let agg_schema =
        ["k", "c", "s", "m"].iter().map(|n| (n.to_string(), ValueType::Int64)).collect::<Vec<_>>();
    let order = vec![SortKey { expr: col(1), desc: true }];
    vec![
        e.filter(r.clone(), &eq(col(0), lit(2))),
        e.join(r.clone(), s.clone(), Some(&eq(col(0), col(2)))),
        e.sort(r.clone(), &SortSpec::from_keys(&order)),
        e.distinct(r.clone()),
        e.aggregate(r.clone(), &[col(0)], &aggs, agg_schema.clone()),
        e.aggregate(r.clone(), &[], &aggs[..2], agg_schema[1..3].to_vec()),
        e.window(r.clone(), &[col(0)], &order, "row_no"),
        e.limit(r.clone(), 3, true),
    ]
}

fn plain_group(rows: &[Vec<i64>]) -> Vec<Vec<Value>> {
    let mut groups: BTreeMap<i64, (i64, i64, i64)> = BTreeMap::new();
    for r in rows {
        let g = groups.entry(r[0]).or_insert((0, 0, i64::MAX));
        g.0 += 1;
        g.1 += r[1];
        g.2 = g.2.min(r[1]);
    }
    groups.into_iter().map(|(k, (c, s, m))| vec![Value::Int(k), Value::Int(c), Value::Int(s), Value::Int(m)]).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn traces_depend_only_on_shape(a in rows_strategy(12, 2), seed in any::<u64>(), b in rows_strategy(6, 2)) {
        // same shape, independent values
        let mut other = a.clone();
        let mut x = seed;
        for v in other.iter_mut().flatten() {
            x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            *v = (x >> 33) as i64 % 6;
        }
        let (r1, r2, s) = (ints(&["k", "v"], &a, 0), ints(&["k", "v"], &other, 0), ints(&["k2", "v2"], &b, 1));
        let (_, t1) = run(|e| all_kernels(e, &r1, &s));
        let (_, t2) = run(|e| all_kernels(e, &r2, &s));
        prop_assert_eq!(t1.trace, t2.trace);
        prop_assert_eq!(t1.cost, t2.cost);
    }

    #[test]
    fn kernels_match_plaintext(a in rows_strategy(20, 2), b in rows_strategy(8, 2)) {
        let (r, s) = (ints(&["k", "v"], &a, 0), ints(&["k2", "v2"], &b, 1));
        let (outs, _) = run(|e| all_kernels(e, &r, &s));
        let val = |rows: &[Vec<i64>]| -> Vec<Vec<Value>> {
            sorted(rows.iter().map(|r| r.iter().map(|v| Value::Int(*v)).collect()).collect())
        };
        let n = a.len();
        // cardinality laws
        prop_assert_eq!(outs[0].len(), n);
        prop_assert_eq!(outs[1].len(), n * b.len());
        prop_assert_eq!(outs[3].len(), n);
        prop_assert_eq!(outs[4].len(), n);
        prop_assert_eq!(outs[5].len(), 1);
        prop_assert_eq!(outs[7].len(), n.min(3));

        let filtered: Vec<Vec<i64>> = a.iter().filter(|r| r[0] == 2).cloned().collect();
        prop_assert_eq!(sorted(valid_rows(&outs[0])), val(&filtered));
        let joined: Vec<Vec<i64>> = a.iter()
            .flat_map(|l| b.iter().filter(move |r| r[0] == l[0]).map(move |r| [l.clone(), r.clone()].concat()))
            .collect();
        prop_assert_eq!(sorted(valid_rows(&outs[1])), val(&joined));
        let mut by_v = a.clone();
        by_v.sort_by(|x, y| y[1].cmp(&x[1]));
        let got_v: Vec<i64> = outs[2].slots.iter().map(|s| s.values[1].as_int().unwrap()).collect();
        prop_assert_eq!(got_v, by_v.iter().map(|r| r[1]).collect::<Vec<_>>());
        let mut dedup = a.clone();
        dedup.sort();
        dedup.dedup();
        prop_assert_eq!(sorted(valid_rows(&outs[3])), val(&dedup));
        prop_assert_eq!(sorted(valid_rows(&outs[4])), plain_group(&a));
        let total: i64 = a.iter().map(|r| r[1]).sum();
        let sum = if a.is_empty() { Value::Null } else { Value::Int(total) };
        prop_assert_eq!(valid_rows(&outs[5]), vec![vec![Value::Int(n as i64), sum]]);
        // row numbers are 1..=size within every partition
        let mut per: BTreeMap<i64, Vec<i64>> = BTreeMap::new();
        for s in outs[6].slots.iter().filter(|s| s.valid) {
            per.entry(s.values[0].as_int().unwrap()).or_default().push(s.values[2].as_int().unwrap());
        }
        for (k, nums) in per {
            let size = a.iter().filter(|r| r[0] == k).count() as i64;
            prop_assert_eq!(nums, (1..=size).collect::<Vec<_>>());
        }
        let first: Vec<Vec<Value>> = a[..n.min(3)].iter().map(|r| r.iter().map(|v| Value::Int(*v)).collect()).collect();
        prop_assert_eq!(valid_rows(&outs[7]), first);
    }

    #[test]
    fn placeholders_never_leak(a in rows_strategy(12, 2), noise in 1i64..100) {
        // filter, then scribble over the padding slots
        let r = ints(&["k", "v"], &a, 0);
        let (r, _) = run(|e| e.filter(r, &Expr::binary(BinOp::Gt, col(1), lit(2))));
        let mut noisy = r.clone();
        for s in noisy.slots.iter_mut().filter(|s| !s.valid) {
            s.values = vec![Value::Int(noise), Value::Int(noise)];
        }
        let s = ints(&["k2", "v2"], &a, 1);
        let (clean, _) = run(|e| all_kernels(e, &r, &s));
        let (dirty, _) = run(|e| all_kernels(e, &noisy, &s));
        for (c, d) in clean.iter().zip(&dirty) {
            prop_assert_eq!(sorted(valid_rows(c)), sorted(valid_rows(d)));
        }
    }
}
