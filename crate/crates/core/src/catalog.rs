//! Annotated schema, security policy levels and per-provider table storage.

use std::collections::BTreeMap;
use std::fmt;

use serde::de::{Deserializer, MapAccess, Visitor};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::value::{Value, ValueType};

/// Attribute protection level. `Public < Protected < Private`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SecurityLevel {
    Public,
    Protected,
    Private,
}

impl SecurityLevel {
    pub fn parse(s: &str) -> Option<SecurityLevel> {
        match s.to_ascii_lowercase().as_str() {
            "public" => Some(SecurityLevel::Public),
            "protected" => Some(SecurityLevel::Protected),
            "private" => Some(SecurityLevel::Private),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SecurityLevel::Public => "public",
            SecurityLevel::Protected => "protected",
            SecurityLevel::Private => "private",
        }
    }

    /// Planning collapses protected onto private: anything above public is sensitive.
    pub fn is_sensitive(self) -> bool {
        self > SecurityLevel::Public
    }
}

impl fmt::Display for SecurityLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnDef {
    pub name: String,
    pub value_type: ValueType,
    pub level: SecurityLevel,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Distribution {
    Partitioned,
    Replicated,
}

impl Distribution {
    fn as_str(self) -> &'static str {
        match self {
            Distribution::Partitioned => "partitioned",
            Distribution::Replicated => "replicated",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableDef {
    pub name: String,
    pub columns: Vec<ColumnDef>,
    pub distribution: Distribution,
}

impl TableDef {
    pub fn column_index(&self, name: &str) -> Option<usize> {
        let name = name.to_ascii_lowercase();
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn column(&self, name: &str) -> Option<&ColumnDef> {
        self.column_index(name).map(|i| &self.columns[i])
    }

    pub fn schema(&self) -> Vec<(String, ValueType)> {
        self.columns.iter().map(|c| (c.name.clone(), c.value_type)).collect()
    }
}

/// One of the two data providers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Party {
    Alice,
    Bob,
}

impl Party {
    pub const BOTH: [Party; 2] = [Party::Alice, Party::Bob];

    pub fn index(self) -> usize {
        match self {
            Party::Alice => 0,
            Party::Bob => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Catalog {
    pub tables: BTreeMap<String, TableDef>,
    /// Provider identifiers in (Alice, Bob) order.
    pub providers: [String; 2],
}

impl Catalog {
    pub fn table(&self, name: &str) -> Result<&TableDef> {
        self.tables
            .get(&name.to_ascii_lowercase())
            .ok_or_else(|| Error::Resolve(format!("unknown table `{name}`")))
    }

    pub fn party(&self, provider: &str) -> Result<Party> {
        Party::BOTH
            .into_iter()
            .find(|p| self.providers[p.index()].eq_ignore_ascii_case(provider))
            .ok_or_else(|| Error::Load(format!("unknown provider `{provider}`")))
    }

    pub fn provider_name(&self, party: Party) -> &str {
        &self.providers[party.index()]
    }

    /// Declared level of `table.column`. Never consults row data.
    pub fn column_level(&self, table: &str, column: &str) -> Result<SecurityLevel> {
        let t = self.table(table)?;
        t.column(column)
            .map(|c| c.level)
            .ok_or_else(|| Error::Resolve(format!("unknown column `{column}` in table `{}`", t.name)))
    }

    /// A copy of this catalog with every attribute raised to at least `level`.
    pub fn with_minimum_level(&self, level: SecurityLevel) -> Catalog {
        let mut out = self.clone();
        for t in out.tables.values_mut() {
            for c in &mut t.columns {
                c.level = c.level.max(level);
            }
        }
        out
    }

    /// Renders the catalog back into its JSON config form.
    pub fn render(&self) -> String {
        let mut tables = serde_json::Map::new();
        for t in self.tables.values() {
            let cols: Vec<serde_json::Value> = t
                .columns
                .iter()
                .map(|c| {
                    serde_json::json!({
                        "name": c.name,
                        "type": c.value_type.as_str(),
                        "level": c.level.as_str(),
                    })
                })
                .collect();
            tables.insert(
                t.name.clone(),
                serde_json::json!({ "distribution": t.distribution.as_str(), "columns": cols }),
            );
        }
        let doc = serde_json::json!({ "providers": self.providers, "tables": tables });
        serde_json::to_string_pretty(&doc).expect("catalog renders")
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCatalog {
    providers: Vec<String>,
    tables: Entries<RawTable>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTable {
    distribution: String,
    columns: Vec<RawColumn>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawColumn {
    name: String,
    #[serde(rename = "type")]
    ty: String,
    level: String,
}

/// JSON object kept as an ordered list of entries so duplicate keys survive
/// deserialization and can be reported.
struct Entries<T>(Vec<(String, T)>);

impl<'de, T: Deserialize<'de>> Deserialize<'de> for Entries<T> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V<T>(std::marker::PhantomData<T>);
        impl<'de, T: Deserialize<'de>> Visitor<'de> for V<T> {
            type Value = Entries<T>;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("an object")
            }
            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> std::result::Result<Self::Value, A::Error> {
                let mut out = Vec::new();
                while let Some((k, v)) = map.next_entry::<String, T>()? {
                    out.push((k, v));
                }
                Ok(Entries(out))
            }
        }
        d.deserialize_map(V(std::marker::PhantomData))
    }
}

/// Parses and validates a catalog config document.
pub fn load_catalog(config_text: &str) -> Result<Catalog> {
    let raw: RawCatalog = serde_json::from_str(config_text).map_err(|e| Error::CatalogSyntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    if raw.providers.len() != 2 {
        return Err(Error::Catalog(format!(
            "expected exactly 2 providers, found {}",
            raw.providers.len()
        )));
    }
    if raw.providers[0].eq_ignore_ascii_case(&raw.providers[1]) {
        return Err(Error::Catalog(format!("duplicate provider `{}`", raw.providers[0])));
    }
    if raw.tables.0.is_empty() {
        return Err(Error::Catalog("no tables defined".into()));
    }
    let mut tables = BTreeMap::new();
    for (name, rt) in raw.tables.0 {
        let name = name.to_ascii_lowercase();
        if tables.contains_key(&name) {
            return Err(Error::Catalog(format!("duplicate table `{name}`")));
        }
        let distribution = match rt.distribution.to_ascii_lowercase().as_str() {
            "partitioned" => Distribution::Partitioned,
            "replicated" => Distribution::Replicated,
            other => {
                return Err(Error::Catalog(format!(
                    "table `{name}`: unknown distribution `{other}`"
                )))
            }
        };
        if rt.columns.is_empty() {
            return Err(Error::Catalog(format!("table `{name}` has no columns")));
        }
        let mut columns: Vec<ColumnDef> = Vec::with_capacity(rt.columns.len());
        for rc in rt.columns {
            let cname = rc.name.to_ascii_lowercase();
            if columns.iter().any(|c| c.name == cname) {
                return Err(Error::Catalog(format!(
                    "table `{name}`: duplicate column `{cname}`"
                )));
            }
            let value_type = ValueType::parse(&rc.ty).ok_or_else(|| {
                Error::Catalog(format!("column `{name}.{cname}`: unknown type `{}`", rc.ty))
            })?;
            let level = SecurityLevel::parse(&rc.level).ok_or_else(|| {
                Error::Catalog(format!("column `{name}.{cname}`: unknown level `{}`", rc.level))
            })?;
            columns.push(ColumnDef { name: cname, value_type, level });
        }
        tables.insert(name.clone(), TableDef { name, columns, distribution });
    }
    let [a, b]: [String; 2] = raw.providers.try_into().expect("length checked");
    Ok(Catalog { tables, providers: [a, b] })
}

/// A typed table instance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Relation {
    pub schema: Vec<(String, ValueType)>,
    pub rows: Vec<Vec<Value>>,
}

impl Relation {
    pub fn new(schema: Vec<(String, ValueType)>) -> Relation {
        Relation { schema, rows: Vec::new() }
    }

    pub fn arity(&self) -> usize {
        self.schema.len()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Checks arity and per-column types of every row.
    pub fn validate(&self) -> Result<()> {
        for (i, row) in self.rows.iter().enumerate() {
            if row.len() != self.arity() {
                return Err(Error::Load(format!(
                    "row {i} has {} values, schema has {}",
                    row.len(),
                    self.arity()
                )));
            }
            for (v, (name, ty)) in row.iter().zip(&self.schema) {
                if let Some(t) = v.value_type() {
                    if t != *ty {
                        return Err(Error::Load(format!(
                            "row {i}, column `{name}`: expected {ty}, found {t}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Rows sorted, for multiset comparison.
    pub fn sorted_rows(&self) -> Vec<Vec<Value>> {
        let mut rows = self.rows.clone();
        rows.sort();
        rows
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        w.write_record(self.schema.iter().map(|(n, _)| n.as_str())).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row.iter().map(Value::to_cell)).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf-8 output")
    }

    pub fn to_json(&self) -> String {
        let rows: Vec<serde_json::Value> = self
            .rows
            .iter()
            .map(|row| {
                let mut obj = serde_json::Map::new();
                for ((name, _), v) in self.schema.iter().zip(row) {
                    obj.insert(name.clone(), v.to_json());
                }
                serde_json::Value::Object(obj)
            })
            .collect();
        serde_json::to_string(&rows).expect("json output")
    }
}

/// Parses CSV text for `table` as stored at `provider`.
pub fn load_table_csv(catalog: &Catalog, provider: &str, table: &str, csv_text: &str) -> Result<Relation> {
    catalog.party(provider)?;
    let def = catalog.table(table).map_err(|_| Error::Load(format!("unknown table `{table}`")))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(csv_text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| Error::Load(format!("{}: {e}", def.name)))?
        .clone();
    let names: Vec<String> = header.iter().map(|h| h.trim().to_ascii_lowercase()).collect();
    let expected: Vec<&str> = def.columns.iter().map(|c| c.name.as_str()).collect();
    if names != expected {
        return Err(Error::Load(format!(
            "{}: header mismatch: expected `{}`, found `{}`",
            def.name,
            expected.join(","),
            names.join(",")
        )));
    }
    let mut rel = Relation::new(def.schema());
    for record in reader.records() {
        let record = record.map_err(|e| Error::Load(format!("{}: {e}", def.name)))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let mut row = Vec::with_capacity(def.columns.len());
        for (cell, col) in record.iter().zip(&def.columns) {
            let v = Value::parse_typed(cell, col.value_type).ok_or_else(|| {
                Error::Load(format!(
                    "{}: type error at row {line}, column `{}`: `{cell}` is not a valid {}",
                    def.name, col.name, col.value_type
                ))
            })?;
            row.push(v);
        }
        rel.rows.push(row);
    }
    Ok(rel)
}

/// Table instances held by each provider.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DataSet {
    tables: BTreeMap<(Party, String), Relation>,
}

impl DataSet {
    pub fn new() -> DataSet {
        DataSet::default()
    }

    pub fn insert(&mut self, party: Party, table: &str, rel: Relation) {
        self.tables.insert((party, table.to_ascii_lowercase()), rel);
    }

    pub fn get(&self, party: Party, table: &str) -> Option<&Relation> {
        self.tables.get(&(party, table.to_ascii_lowercase()))
    }

    /// Every table a provider holds, keyed by table name.
    pub fn provider_tables(&self, party: Party) -> BTreeMap<String, Relation> {
        self.tables
            .iter()
            .filter(|((p, _), _)| *p == party)
            .map(|((_, t), r)| (t.clone(), r.clone()))
            .collect()
    }

    /// Fills absent tables with empty relations and checks that replicated
    /// tables hold the same row multiset at both providers.
    pub fn validate(&mut self, catalog: &Catalog) -> Result<()> {
        for def in catalog.tables.values() {
            for party in Party::BOTH {
                let key = (party, def.name.clone());
                let rel = self.tables.entry(key).or_insert_with(|| Relation::new(def.schema()));
                if rel.schema != def.schema() {
                    return Err(Error::Load(format!("{}: schema does not match catalog", def.name)));
                }
                rel.validate()?;
            }
            if def.distribution == Distribution::Replicated {
                let a = self.get(Party::Alice, &def.name).expect("filled").sorted_rows();
                let b = self.get(Party::Bob, &def.name).expect("filled").sorted_rows();
                if a != b {
                    return Err(Error::Load(format!(
                        "replicated table `{}` differs between providers",
                        def.name
                    )));
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const DIAG: &str = r#"{
        "providers": ["A", "B"],
        "tables": {
            "diagnoses": {
                "distribution": "partitioned",
                "columns": [
                    {"name": "pid", "type": "int64", "level": "public"},
                    {"name": "diag", "type": "text", "level": "protected"},
                    {"name": "time", "type": "date", "level": "private"}
                ]
            }
        }
    }"#;

    #[test]
    fn loads_annotated_schema() {
        let c = load_catalog(DIAG).unwrap();
        assert_eq!(c.tables.len(), 1);
        let t = c.table("diagnoses").unwrap();
        assert_eq!(t.columns.len(), 3);
        assert_eq!(c.column_level("diagnoses", "pid").unwrap(), SecurityLevel::Public);
        assert_eq!(c.column_level("diagnoses", "diag").unwrap(), SecurityLevel::Protected);
        assert_eq!(c.column_level("diagnoses", "time").unwrap(), SecurityLevel::Private);
        assert!(c.column_level("diagnoses", "zip").is_err());
        assert!(c.column_level("nope", "pid").is_err());
    }

    #[test]
    fn rejects_bad_configs() {
        let empty = r#"{"providers":["A","B"],"tables":{}}"#;
        assert_eq!(load_catalog(empty).unwrap_err(), Error::Catalog("no tables defined".into()));

        let dup_col = DIAG.replace(r#""name": "time""#, r#""name": "diag""#);
        let err = load_catalog(&dup_col).unwrap_err().to_string();
        assert!(err.contains("duplicate column `diag`"), "{err}");

        let bad_level = DIAG.replace(r#""level": "private""#, r#""level": "secret""#);
        assert!(load_catalog(&bad_level).unwrap_err().to_string().contains("unknown level `secret`"));

        let three = DIAG.replace(r#"["A", "B"]"#, r#"["A", "B", "C"]"#);
        assert!(load_catalog(&three).unwrap_err().to_string().contains("exactly 2 providers"));

        let dup_table = r#"{"providers":["A","B"],"tables":{
            "t": {"distribution":"partitioned","columns":[{"name":"x","type":"int64","level":"public"}]},
            "T": {"distribution":"partitioned","columns":[{"name":"x","type":"int64","level":"public"}]}}}"#;
        assert!(load_catalog(dup_table).unwrap_err().to_string().contains("duplicate table"));

        match load_catalog("{\n  \"providers\": [,]\n}") {
            Err(Error::CatalogSyntax { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected syntax error, got {other:?}"),
        }
    }

    #[test]
    fn render_round_trips() {
        let c = load_catalog(DIAG).unwrap();
        assert_eq!(load_catalog(&c.render()).unwrap(), c);
    }

    #[test]
    fn csv_loading() {
        let c = load_catalog(DIAG).unwrap();
        let rel = load_table_csv(&c, "A", "diagnoses", "pid,diag,time\n1,flu,2010-01-01\n2,,2010-01-02\r\n3,\"c,diff\",\n")
            .unwrap();
        assert_eq!(rel.len(), 3);
        assert_eq!(rel.rows[1][1], Value::Null);
        assert_eq!(rel.rows[2][1], Value::Text("c,diff".into()));
        assert_eq!(rel.rows[2][2], Value::Null);

        let err = load_table_csv(&c, "A", "diagnoses", "pid,time,diag\n").unwrap_err().to_string();
        assert!(err.contains("header mismatch"), "{err}");

        let err = load_table_csv(&c, "A", "diagnoses", "pid,diag,time\nabc,flu,2010-01-01\n")
            .unwrap_err()
            .to_string();
        assert!(err.contains("row 2") && err.contains("`pid`"), "{err}");

        assert!(load_table_csv(&c, "C", "diagnoses", "pid,diag,time\n").is_err());
        assert!(load_table_csv(&c, "A", "meds", "pid\n").is_err());
    }

    #[test]
    fn replicated_tables_must_match() {
        let cfg = r#"{"providers":["A","B"],"tables":{
            "cohort": {"distribution":"replicated","columns":[{"name":"pid","type":"int64","level":"public"}]}}}"#;
        let c = load_catalog(cfg).unwrap();
        let mut ds = DataSet::new();
        ds.insert(Party::Alice, "cohort", load_table_csv(&c, "A", "cohort", "pid\n1\n2\n").unwrap());
        ds.insert(Party::Bob, "cohort", load_table_csv(&c, "B", "cohort", "pid\n2\n1\n").unwrap());
        ds.validate(&c).unwrap();
        ds.insert(Party::Bob, "cohort", load_table_csv(&c, "B", "cohort", "pid\n2\n").unwrap());
        assert!(ds.validate(&c).is_err());
    }
}
