//! Two-party private data network query engine.

pub mod catalog;
pub mod cli;
pub mod config;
pub mod error;
pub mod federation;
pub mod garble;
pub mod oblivious;
pub mod plan;
pub mod planner;
pub mod sql;
pub mod typer;
pub mod value;

pub use catalog::{Catalog, Party, Relation, SecurityLevel};
pub use error::{Error, Result, Stage};

#[cfg(test)]
pub(crate) mod test_support {
    pub const CATALOG: &str = r#"{
      "providers": ["alice", "bob"],
      "tables": {
        "diagnoses": {"distribution": "partitioned", "columns": [
          {"name": "pid", "type": "int64", "level": "public"},
          {"name": "diag", "type": "text", "level": "protected"},
          {"name": "time", "type": "date", "level": "private"}]},
        "medications": {"distribution": "partitioned", "columns": [
          {"name": "pid", "type": "int64", "level": "public"},
          {"name": "med", "type": "text", "level": "protected"},
          {"name": "dosage", "type": "int64", "level": "protected"},
          {"name": "time", "type": "date", "level": "private"}]},
        "cdiff_cohort": {"distribution": "replicated", "columns": [
          {"name": "pid", "type": "int64", "level": "public"}]}
      }
    }"#;
}
