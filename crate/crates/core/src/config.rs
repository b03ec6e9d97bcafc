//! PDN configuration: a catalog plus a manifest of per-provider CSV files.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::catalog::{load_catalog, load_table_csv, Catalog, DataSet};
use crate::error::{Error, Result};

pub const DEFAULT_SEED: u64 = 7;

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct DataEntry {
    pub provider: String,
    pub table: String,
    pub path: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct PdnConfig {
    pub catalog: PathBuf,
    #[serde(default)]
    pub data: Vec<DataEntry>,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

/// A loaded network: catalog and every provider's tables.
#[derive(Debug, Clone)]
pub struct Pdn {
    pub catalog: Catalog,
    pub data: DataSet,
    pub seed: u64,
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Load(format!("cannot read {}: {e}", path.display())))
}

impl PdnConfig {
    /// Relative paths are taken relative to the config file's directory.
    pub fn load(path: &Path) -> Result<Pdn> {
        let text = read(path)?;
        let cfg: PdnConfig = serde_json::from_str(&text)
            .map_err(|e| Error::Load(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve(base)
    }

    pub fn resolve(&self, base: &Path) -> Result<Pdn> {
        let catalog = load_catalog(&read(&base.join(&self.catalog))?)?;
        let mut data = DataSet::new();
        for entry in &self.data {
            let file = base.join(&entry.path);
            let rel = load_table_csv(&catalog, &entry.provider, &entry.table, &read(&file)?)
                .map_err(|e| Error::Load(format!("{}: {e}", file.display())))?;
            data.insert(catalog.party(&entry.provider)?, &entry.table, rel);
        }
        data.validate(&catalog)?;
        Ok(Pdn { catalog, data, seed: self.seed })
    }
}
