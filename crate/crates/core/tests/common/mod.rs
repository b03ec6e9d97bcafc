//! Shared fixtures: the sample catalog, a random two-provider instance
//! generator, a SQLite oracle and the workload queries.
#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use pdnql::catalog::{load_catalog, DataSet};
use pdnql::value::{Value, ValueType};
use pdnql::{Catalog, Party, Relation};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn repo() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn catalog() -> Catalog {
    load_catalog(&std::fs::read_to_string(repo().join("data/sample/catalog.json")).unwrap()).unwrap()
}

pub fn query_file(name: &str) -> String {
    std::fs::read_to_string(repo().join("data/queries").join(name)).unwrap()
}

const DIAGS: [&str; 5] = ["cdiff", "hd", "flu", "cold", "copd"];
const MEDS: [&str; 3] = ["aspirin", "heparin", "ibuprofen"];
const DOSES: [i64; 4] = [5, 10, 81, 325];
/// 2020-01-01
const DAY0: i32 = 18262;

#[derive(Debug, Clone, Copy)]
pub struct Shape {
    pub max_rows: usize,
    pub max_pid: i64,
    /// Alice holds only odd patients and Bob only even ones.
    pub disjoint: bool,
}

impl Default for Shape {
    fn default() -> Self {
        Shape { max_rows: 64, max_pid: 24, disjoint: false }
    }
}

fn pid(rng: &mut ChaCha8Rng, shape: Shape, party: Party) -> i64 {
    let p = rng.gen_range(1..=shape.max_pid);
    if !shape.disjoint {
        return p;
    }
    let want = if party == Party::Alice { 1 } else { 0 };
    if p % 2 == want {
        p
    } else if p < shape.max_pid {
        p + 1
    } else {
        p - 1
    }
}

/// A random instance of the sample schema.
pub fn instance(seed: u64, shape: Shape) -> DataSet {
    let cat = catalog();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = DataSet::new();
    let schema = |t: &str| cat.table(t).unwrap().schema();
    for party in Party::BOTH {
        let n = rng.gen_range(0..=shape.max_rows);
        let rows = (0..n)
            .map(|_| {
                vec![
                    Value::Int(pid(&mut rng, shape, party)),
                    Value::Text(DIAGS[rng.gen_range(0..DIAGS.len())].into()),
                    Value::Date(DAY0 + rng.gen_range(0..150)),
                ]
            })
            .collect();
        data.insert(party, "diagnoses", Relation { schema: schema("diagnoses"), rows });
        let n = rng.gen_range(0..=shape.max_rows);
        let rows = (0..n)
            .map(|_| {
                let dose = if rng.gen_bool(0.1) { Value::Null } else { Value::Int(DOSES[rng.gen_range(0..4)]) };
                vec![
                    Value::Int(pid(&mut rng, shape, party)),
                    Value::Text(MEDS[rng.gen_range(0..MEDS.len())].into()),
                    dose,
                    Value::Date(DAY0 + rng.gen_range(0..150)),
                ]
            })
            .collect();
        data.insert(party, "medications", Relation { schema: schema("medications"), rows });
    }
    let cohort: Vec<Vec<Value>> =
        (1..=shape.max_pid).filter(|_| rng.gen_bool(0.5)).map(|p| vec![Value::Int(p)]).collect();
    for party in Party::BOTH {
        data.insert(party, "cdiff_cohort", Relation { schema: schema("cdiff_cohort"), rows: cohort.clone() });
    }
    data.validate(&cat).unwrap();
    data
}

/// Ordered-output check for `ORDER BY .. LIMIT k`: rows tied at the cut may
/// legitimately differ.
#[derive(Debug, Clone, Copy)]
pub struct TopK {
    pub k: usize,
    pub key: usize,
}

#[derive(Debug, Clone)]
pub struct Workload {
    pub name: String,
    pub sql: String,
    /// The same query in SQLite's dialect, without any LIMIT.
    pub oracle: String,
    pub top: Option<TopK>,
}

fn w(name: &str, sql: &str, oracle: &str, top: Option<TopK>) -> Workload {
    Workload { name: name.into(), sql: sql.into(), oracle: oracle.into(), top }
}

const RCD: &str = "WITH rcd AS (SELECT pid, time, row_no() OVER (PARTITION BY pid ORDER BY time) FROM diagnoses WHERE diag = 'cdiff') ";
const RCD_LITE: &str = "WITH rcd AS (SELECT pid, time, row_number() OVER (PARTITION BY pid ORDER BY time) AS row_no FROM diagnoses WHERE diag = 'cdiff') ";
const IN_LITE: &str = "(SELECT pid FROM cdiff_cohort)";

pub fn workload_queries() -> Vec<Workload> {
    vec![
        w(
            "comorbidity",
            &query_file("comorbidity.sql"),
            &format!("SELECT diag, COUNT(*) cnt FROM diagnoses WHERE pid IN {IN_LITE} GROUP BY diag ORDER BY cnt DESC"),
            Some(TopK { k: 10, key: 1 }),
        ),
        w(
            "recurrent c.diff",
            &query_file("recurrent_cdiff.sql"),
            &format!(
                "{RCD_LITE}SELECT DISTINCT r1.pid FROM rcd r1 JOIN rcd r2 ON r1.pid = r2.pid \
                 WHERE r2.time - r1.time >= 15 AND r2.time - r1.time <= 56 AND r2.row_no = r1.row_no + 1"
            ),
            None,
        ),
        w(
            "aspirin count",
            &query_file("aspirin_count.sql"),
            "SELECT COUNT(DISTINCT d.pid) FROM diagnoses d JOIN medications m ON d.pid = m.pid \
             WHERE d.diag = 'hd' AND m.med = 'aspirin' AND d.time <= m.time",
            None,
        ),
    ]
}

/// Twenty smaller queries built from the pieces of the three workload queries.
pub fn sub_queries() -> Vec<Workload> {
    let same = |name: &str, sql: &str| w(name, sql, sql, None);
    let cohort = |name: &str, sql: &str| w(name, sql, &sql.replace("IN cdiff_cohort", &format!("IN {IN_LITE}")), None);
    let rcd = |name: &str, tail: &str| w(name, &format!("{RCD}{tail}"), &format!("{RCD_LITE}{tail}"), None);
    vec![
        same("cdiff rows", "SELECT pid FROM diagnoses WHERE diag = 'cdiff'"),
        same("cdiff patients", "SELECT DISTINCT pid FROM diagnoses WHERE diag = 'cdiff'"),
        cohort("cohort diagnoses", "SELECT pid, diag FROM diagnoses WHERE pid IN cdiff_cohort"),
        cohort("cohort counts", "SELECT diag, COUNT(*) cnt FROM diagnoses WHERE pid IN cdiff_cohort GROUP BY diag"),
        same("diagnosis counts", "SELECT diag, COUNT(*) FROM diagnoses GROUP BY diag"),
        same("hd count", "SELECT COUNT(*) FROM diagnoses WHERE diag = 'hd'"),
        rcd("repeat infections", "SELECT pid FROM rcd WHERE row_no >= 2"),
        rcd("consecutive pairs", "SELECT r1.pid, r2.pid FROM rcd r1 JOIN rcd r2 ON r1.pid = r2.pid WHERE r2.row_no = r1.row_no + 1"),
        same(
            "hd with aspirin",
            "SELECT d.pid FROM diagnoses d JOIN medications m ON d.pid = m.pid WHERE d.diag = 'hd' AND m.med = 'aspirin'",
        ),
        same(
            "aspirin after hd",
            "SELECT DISTINCT d.pid FROM diagnoses d JOIN medications m ON d.pid = m.pid \
             WHERE d.diag = 'hd' AND m.med = 'aspirin' AND d.time <= m.time",
        ),
        w(
            "top aspirin doses",
            "SELECT pid, dosage FROM medications WHERE med = 'aspirin' ORDER BY dosage DESC LIMIT 5",
            "SELECT pid, dosage FROM medications WHERE med = 'aspirin' ORDER BY dosage DESC",
            Some(TopK { k: 5, key: 1 }),
        ),
        same("dose totals", "SELECT pid, SUM(dosage) FROM medications GROUP BY pid"),
        same("dose range", "SELECT med, MIN(dosage), MAX(dosage) FROM medications GROUP BY med"),
        same("dose counts", "SELECT med, COUNT(dosage) FROM medications GROUP BY med"),
        same("high dose patients", "SELECT COUNT(DISTINCT pid) FROM medications WHERE dosage > 50"),
        cohort(
            "cohort pairs",
            "SELECT d.diag, m.med FROM diagnoses d JOIN medications m ON d.pid = m.pid WHERE d.pid IN cdiff_cohort",
        ),
        cohort("cohort aspirin", "SELECT pid FROM medications WHERE med = 'aspirin' AND pid IN cdiff_cohort"),
        same("joined counts", "SELECT d.pid, COUNT(*) FROM diagnoses d JOIN medications m ON d.pid = m.pid GROUP BY d.pid"),
        same("distinct diagnoses", "SELECT DISTINCT diag FROM diagnoses"),
        same("largest dose", "SELECT MAX(dosage) FROM medications"),
    ]
}

fn to_sql(v: &Value) -> rusqlite::types::Value {
    use rusqlite::types::Value as S;
    match v {
        Value::Null => S::Null,
        Value::Int(i) => S::Integer(*i),
        Value::Text(s) => S::Text(s.clone()),
        Value::Date(d) => S::Integer(i64::from(*d)),
    }
}

/// Dates compare as day numbers.
pub fn normalize(v: &Value) -> Value {
    match v {
        Value::Date(d) => Value::Int(i64::from(*d)),
        other => other.clone(),
    }
}

/// The union of both providers' rows in one SQLite database.
pub struct Oracle {
    conn: rusqlite::Connection,
}

impl Oracle {
    pub fn new(catalog: &Catalog, data: &DataSet) -> Oracle {
        let conn = rusqlite::Connection::open_in_memory().unwrap();
        for def in catalog.tables.values() {
            let cols: Vec<String> = def
                .schema()
                .iter()
                .map(|(n, t)| format!("{n} {}", if *t == ValueType::Text { "TEXT" } else { "INTEGER" }))
                .collect();
            conn.execute(&format!("CREATE TABLE {} ({})", def.name, cols.join(", ")), []).unwrap();
            let holders: &[Party] =
                if def.distribution == pdnql::catalog::Distribution::Replicated { &[Party::Alice] } else { &Party::BOTH };
            let marks = vec!["?"; cols.len()].join(", ");
            let mut stmt = conn.prepare(&format!("INSERT INTO {} VALUES ({marks})", def.name)).unwrap();
            for p in holders {
                for row in &data.get(*p, &def.name).unwrap().rows {
                    stmt.execute(rusqlite::params_from_iter(row.iter().map(to_sql))).unwrap();
                }
            }
        }
        Oracle { conn }
    }

    /// Rows in the order SQLite returns them.
    pub fn query(&self, sql: &str) -> Vec<Vec<Value>> {
        let mut stmt = self.conn.prepare(sql).unwrap_or_else(|e| panic!("{sql}: {e}"));
        let n = stmt.column_count();
        let rows = stmt
            .query_map([], |r| {
                (0..n)
                    .map(|i| {
                        Ok(match r.get_ref(i)? {
                            rusqlite::types::ValueRef::Null => Value::Null,
                            rusqlite::types::ValueRef::Integer(v) => Value::Int(v),
                            rusqlite::types::ValueRef::Text(t) => Value::Text(String::from_utf8_lossy(t).into()),
                            other => panic!("unexpected sqlite value {other:?}"),
                        })
                    })
                    .collect::<rusqlite::Result<Vec<Value>>>()
            })
            .unwrap();
        rows.collect::<rusqlite::Result<_>>().unwrap()
    }
}

fn multiset(rows: &[Vec<Value>]) -> Vec<Vec<Value>> {
    let mut out: Vec<Vec<Value>> = rows.iter().map(|r| r.iter().map(normalize).collect()).collect();
    out.sort();
    out
}

/// Compares a result against the oracle's rows; `Err` describes the mismatch.
pub fn check(q: &Workload, got: &Relation, oracle_rows: &[Vec<Value>]) -> Result<(), String> {
    let ours = multiset(&got.rows);
    match q.top {
        None => {
            let want = multiset(oracle_rows);
            if ours != want {
                return Err(format!("{}: got {ours:?}, oracle {want:?}", q.name));
            }
        }
        Some(TopK { k, key }) => {
            let n = k.min(oracle_rows.len());
            if ours.len() != n {
                return Err(format!("{}: {} rows, oracle {n}", q.name, ours.len()));
            }
            let mut keys_got: Vec<Value> = ours.iter().map(|r| r[key].clone()).collect();
            let mut keys_want: Vec<Value> = oracle_rows[..n].iter().map(|r| normalize(&r[key])).collect();
            keys_got.sort();
            keys_want.sort();
            if keys_got != keys_want {
                return Err(format!("{}: top keys {keys_got:?}, oracle {keys_want:?}", q.name));
            }
            let mut pool = multiset(oracle_rows);
            for r in &ours {
                match pool.iter().position(|p| p == r) {
                    Some(i) => {
                        pool.remove(i);
                    }
                    None => return Err(format!("{}: row {r:?} not in the oracle result", q.name)),
                }
            }
        }
    }
    Ok(())
}

/// Distinct patients per provider in a table.
pub fn patients(data: &DataSet, party: Party, table: &str) -> BTreeSet<i64> {
    data.get(party, table)
        .map(|r| r.rows.iter().filter_map(|row| if let Value::Int(p) = row[0] { Some(p) } else { None }).collect())
        .unwrap_or_default()
}

struct Source {
    from: &'static str,
    cols: &'static [&'static str],
    /// Columns usable as SUM arguments.
    numeric: &'static [&'static str],
    preds: &'static [&'static str],
}

const SOURCES: [Source; 4] = [
    Source {
        from: "diagnoses",
        cols: &["pid", "diag"],
        numeric: &["pid"],
        preds: &["pid < 12", "diag = 'flu'", "diag = 'cdiff'", "pid IN cdiff_cohort"],
    },
    Source {
        from: "medications",
        cols: &["pid", "med", "dosage"],
        numeric: &["pid", "dosage"],
        preds: &["dosage > 20", "med = 'aspirin'", "pid IN cdiff_cohort", "pid >= 5"],
    },
    Source {
        from: "diagnoses d JOIN medications m ON d.pid = m.pid",
        cols: &["d.pid", "d.diag", "m.med", "m.dosage"],
        numeric: &["m.dosage"],
        preds: &["d.diag = 'hd'", "m.med = 'aspirin'", "d.time <= m.time", "d.pid < 10"],
    },
    Source {
        from: "diagnoses d JOIN cdiff_cohort c ON d.pid = c.pid",
        cols: &["d.pid", "d.diag"],
        numeric: &["d.pid"],
        preds: &["d.diag = 'cdiff'", "d.pid > 3"],
    },
];

fn pick<'a>(rng: &mut ChaCha8Rng, xs: &[&'a str]) -> &'a str {
    xs[rng.gen_range(0..xs.len())]
}

/// A random single-block query over the sample schema.
pub fn random_query(seed: u64) -> Workload {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let src = &SOURCES[rng.gen_range(0..SOURCES.len())];
    let mut conj: Vec<&str> = Vec::new();
    for _ in 0..rng.gen_range(0..=2) {
        let p = pick(&mut rng, src.preds);
        if !conj.contains(&p) {
            conj.push(p);
        }
    }
    let filter = if conj.is_empty() { String::new() } else { format!(" WHERE {}", conj.join(" AND ")) };
    let agg = |rng: &mut ChaCha8Rng| match rng.gen_range(0..5) {
        0 => "COUNT(*)".to_string(),
        1 => format!("SUM({})", pick(rng, src.numeric)),
        2 => format!("MIN({})", pick(rng, src.cols)),
        3 => format!("MAX({})", pick(rng, src.cols)),
        _ => format!("COUNT(DISTINCT {})", pick(rng, src.cols)),
    };
    let (select, group) = match rng.gen_range(0..4) {
        0 => {
            let a = pick(&mut rng, src.cols);
            let b = pick(&mut rng, src.cols);
            (if a == b { a.to_string() } else { format!("{a}, {b}") }, String::new())
        }
        1 => (format!("DISTINCT {}", pick(&mut rng, src.cols)), String::new()),
        2 => {
            let g = pick(&mut rng, src.cols);
            (format!("{g}, {}", agg(&mut rng)), format!(" GROUP BY {g}"))
        }
        _ => (agg(&mut rng), String::new()),
    };
    let base = format!("SELECT {select} FROM {}{filter}{group}", src.from);
    let oracle_base = base.replace("IN cdiff_cohort", "IN (SELECT pid FROM cdiff_cohort)");
    if rng.gen_bool(0.25) {
        let first = select.trim_start_matches("DISTINCT ").split(',').next().unwrap().trim().to_string();
        // an aggregate has no stable name to order by
        if !first.contains('(') {
            let dir = if rng.gen_bool(0.5) { " DESC" } else { "" };
            let k = rng.gen_range(1..=5);
            return Workload {
                name: format!("random {seed}"),
                sql: format!("{base} ORDER BY {first}{dir} LIMIT {k}"),
                oracle: format!("{oracle_base} ORDER BY {first}{dir}"),
                top: Some(TopK { k, key: 0 }),
            };
        }
    }
    Workload { name: format!("random {seed}"), sql: base, oracle: oracle_base, top: None }
}

/// Checks the labeling of `sql`: every parent is at least as high as its
/// children, the computed labels pass the rule replay, lowering any High
/// operator breaks a rule, and raising a Low one (with its ancestors) does not.
pub fn typing_properties(sql: &str, cat: &Catalog) -> Result<usize, String> {
    use pdnql::typer::{check_rules, label_plan, Label};
    let lp = label_plan(pdnql::plan::compile(sql, cat).map_err(|e| e.to_string())?, cat).map_err(|e| e.to_string())?;
    let plan = &lp.plan;
    let order = plan.post_order();
    for &id in &order {
        for c in &plan.node(id).children {
            if lp.label(*c) > lp.label(id) {
                return Err(format!("{sql}: node {id} is below its child {c}"));
            }
        }
    }
    let v = check_rules(plan, &lp.op_labels, cat);
    if !v.is_empty() {
        return Err(format!("{sql}: computed labels fail {v:?}"));
    }
    let mut parents: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for &id in &order {
        for c in &plan.node(id).children {
            parents.entry(*c).or_default().push(id);
        }
    }
    for &id in &order {
        let mut flipped = lp.op_labels.clone();
        if lp.label(id) == Label::High {
            flipped[id] = Label::Low;
            if check_rules(plan, &flipped, cat).is_empty() {
                return Err(format!("{sql}: node {id} could be Low"));
            }
        } else if !matches!(plan.node(id).op, pdnql::plan::Op::Scan { .. }) {
            let mut work = vec![id];
            while let Some(n) = work.pop() {
                flipped[n] = Label::High;
                work.extend(parents.get(&n).into_iter().flatten().copied());
            }
            let v = check_rules(plan, &flipped, cat);
            if !v.is_empty() {
                return Err(format!("{sql}: raising node {id} fails {v:?}"));
            }
        }
    }
    Ok(order.len())
}

/// The plan with no rewrites: one physical operator per logical one.
pub fn unoptimized() -> pdnql::planner::OptimizerConfig {
    pdnql::planner::OptimizerConfig {
        raise_levels: false,
        slice_keys: false,
        split: false,
        semi_join: false,
        slicing: false,
        trim: false,
        coalesce: false,
    }
}

/// Output cardinality of every operator, evaluated in plaintext over the
/// union of both providers' rows.
pub fn cardinalities(
    plan: &pdnql::planner::PhysicalPlan,
    data: &DataSet,
    cat: &Catalog,
) -> std::collections::BTreeMap<usize, (pdnql::typer::Label, usize)> {
    use pdnql::federation::exec::run_plain_host;
    use pdnql::plan::{Env, Op};
    let union = |t: &str| {
        let def = cat.table(t).unwrap();
        let mut rel = Relation::new(def.schema());
        let holders: &[Party] =
            if def.distribution == pdnql::catalog::Distribution::Replicated { &[Party::Alice] } else { &Party::BOTH };
        for p in holders {
            rel.rows.extend(data.get(*p, t).unwrap().rows.iter().cloned());
        }
        rel
    };
    let mut env = Env::default();
    env.sets.insert("cdiff_cohort".into(), pdnql::federation::provider::membership_set(&union("cdiff_cohort")));
    let mut out_rel: std::collections::BTreeMap<usize, Relation> = Default::default();
    let mut out = std::collections::BTreeMap::new();
    for id in plan.post_order() {
        let node = &plan.nodes[id];
        let inputs = match &node.op {
            Op::Scan { table, .. } => vec![union(table)],
            _ => node.children.iter().map(|c| out_rel[c].clone()).collect(),
        };
        let rel = run_plain_host(plan, id, inputs, &env).unwrap();
        out.insert(id, (node.label, rel.rows.len()));
        out_rel.insert(id, rel);
    }
    out
}

/// Redraws every non-public value from the values its column holds at
/// either provider, keeping public columns fixed.
pub fn resample_sensitive(data: &DataSet, cat: &Catalog, seed: u64) -> DataSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = data.clone();
    for def in cat.tables.values() {
        for (i, c) in def.columns.iter().enumerate() {
            if c.level == pdnql::SecurityLevel::Public {
                continue;
            }
            let domain: Vec<Value> =
                Party::BOTH.iter().flat_map(|p| data.get(*p, &def.name).unwrap().rows.iter().map(|r| r[i].clone())).collect();
            if domain.is_empty() {
                continue;
            }
            for p in Party::BOTH {
                let mut rel = out.get(p, &def.name).unwrap().clone();
                for r in &mut rel.rows {
                    r[i] = domain[rng.gen_range(0..domain.len())].clone();
                }
                out.insert(p, &def.name, rel);
            }
        }
    }
    out
}
