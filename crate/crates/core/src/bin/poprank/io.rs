//! Output files and run manifests.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use poprank::engine::PopRankConfig;
use poprank::evaluate::RegressOn;
use poprank::ingest::{PageTargets, WindowConfig};
use poprank::model::Category;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::MatrixMode;

pub const MATRIX_FILE: &str = "matrix.json";
pub const TARGETS_FILE: &str = "targets.csv";
pub const INGEST_MANIFEST: &str = "ingest.manifest.json";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InputFile {
    pub path: PathBuf,
    pub sha256: String,
}

impl InputFile {
    pub fn hash(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        Ok(Self {
            path: path.to_path_buf(),
            sha256: hex::encode(Sha256::digest(&bytes)),
        })
    }
}

/// Everything needed to reproduce one command's outputs. No timestamps, so
/// identical runs give identical manifests.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub inputs: Vec<InputFile>,
    pub window: Option<WindowConfig>,
    pub poprank: Option<PopRankConfig>,
    pub matrix_mode: Option<String>,
    pub regress_on: Option<RegressOn>,
    pub out_dir: PathBuf,
    /// Command-specific settings.
    pub parameters: serde_json::Value,
}

impl RunManifest {
    pub fn new(command: &str, out_dir: &Path) -> Self {
        Self {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            inputs: Vec::new(),
            window: None,
            poprank: None,
            matrix_mode: None,
            regress_on: None,
            out_dir: out_dir.to_path_buf(),
            parameters: serde_json::Value::Null,
        }
    }

    pub fn matrix_mode(mut self, mode: MatrixMode) -> Self {
        self.matrix_mode = Some(
            match mode {
                MatrixMode::Rca => "rca",
                MatrixMode::Raw => "raw",
            }
            .to_string(),
        );
        self
    }

    pub fn write(&self) -> Result<()> {
        write_json(
            &self.out_dir.join(format!("{}.manifest.json", self.command)),
            self,
        )
    }
}

pub fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

/// Pretty JSON with object keys sorted, plus a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let value = serde_json::to_value(value)?;
    let mut text = serde_json::to_string_pretty(&value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

pub fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))
}

/// Shortest decimal that reads back to the same value; empty for NaN.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else {
        x.to_string()
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct TargetRow {
    page_id: String,
    category: Category,
    activity_of: f64,
    activity_on: f64,
    n_users: u64,
}

pub fn write_targets(
    path: &Path,
    targets: &BTreeMap<String, PageTargets>,
    categories: &BTreeMap<String, Category>,
) -> Result<()> {
    let mut w = csv_writer(path)?;
    for (page, t) in targets {
        w.serialize(TargetRow {
            page_id: page.clone(),
            category: categories.get(page).copied().unwrap_or(Category::Unknown),
            activity_of: t.activity_of,
            activity_on: t.activity_on,
            n_users: t.n_users,
        })?;
    }
    w.flush()?;
    Ok(())
}

pub type Targets = (BTreeMap<String, PageTargets>, BTreeMap<String, Category>);

pub fn read_targets(path: &Path) -> Result<Targets> {
    let mut r =
        csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let mut targets = BTreeMap::new();
    let mut categories = BTreeMap::new();
    for row in r.deserialize() {
        let row: TargetRow = row.with_context(|| format!("parsing {}", path.display()))?;
        categories.insert(row.page_id.clone(), row.category);
        targets.insert(
            row.page_id,
            PageTargets {
                activity_of: row.activity_of,
                activity_on: row.activity_on,
                n_users: row.n_users,
            },
        );
    }
    Ok((targets, categories))
}
