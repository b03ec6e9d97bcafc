mod common;

use common::{cardinalities, catalog, instance, resample_sensitive, random_query, typing_properties, unoptimized, Shape};
use pdnql::planner::plan_query;
use pdnql::typer::Label;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn labels_are_monotone_and_minimal(q in any::<u64>()) {
        let q = random_query(q);
        typing_properties(&q.sql, &catalog()).map_err(TestCaseError::fail)?;
    }

    #[test]
    fn low_operators_ignore_sensitive_values(q in any::<u64>(), seed in any::<u64>()) {
        let q = random_query(q);
        let cat = catalog();
        let plan = plan_query(&q.sql, &cat, unoptimized()).unwrap();
        let data = instance(seed, Shape { max_rows: 24, max_pid: 8, disjoint: false });
        let before = cardinalities(&plan, &data, &cat);
        let after = cardinalities(&plan, &resample_sensitive(&data, &cat, seed ^ 1), &cat);
        for (id, (label, n)) in before {
            if label == Label::Low {
                prop_assert_eq!(n, after[&id].1, "{} node {}", q.sql, id);
            }
        }
    }
}

#[test]
fn workload_queries_are_well_typed() {
    for q in common::workload_queries() {
        typing_properties(&q.sql, &catalog()).unwrap();
    }
}

#[test]
fn high_operators_do_see_sensitive_values() {
    // the soundness check above is not vacuous: a High filter's cardinality
    // moves when protected values are redrawn
    let cat = catalog();
    let plan = plan_query("SELECT pid FROM diagnoses WHERE diag = 'cdiff'", &cat, unoptimized()).unwrap();
    let moved = (0..20).any(|seed| {
        let data = instance(seed, Shape::default());
        let (a, b) = (cardinalities(&plan, &data, &cat), cardinalities(&plan, &resample_sensitive(&data, &cat, seed), &cat));
        a.iter().any(|(id, (l, n))| *l == Label::High && b[id].1 != *n)
    });
    assert!(moved);
}
