use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File};
use std::io::Read;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use uee_core::pipeline::AnalysisConfig;
use uee_core::{DetectionCriteria, InputFormat, ValidationReport};

pub const MANIFEST_SCHEMA: &str = "ueescan.manifest.v1";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Complete,
    Incomplete,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileRecord {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

impl FileRecord {
    pub fn of(path: &Path) -> Result<Self> {
        let mut file = File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
        let mut hasher = Sha256::new();
        let mut buf = vec![0u8; 1 << 20];
        let mut bytes = 0u64;
        loop {
            let n = file.read(&mut buf).with_context(|| format!("cannot read {}", path.display()))?;
            if n == 0 {
                break;
            }
            hasher.update(&buf[..n]);
            bytes += n as u64;
        }
        Ok(FileRecord { path: path.display().to_string(), bytes, sha256: hex::encode(hasher.finalize()) })
    }

    pub fn all(paths: &[PathBuf]) -> Result<Vec<Self>> {
        paths.iter().map(|p| FileRecord::of(p)).collect()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationCounts {
    pub total: u64,
    pub accepted: u64,
    pub rejected: u64,
    pub crossed: u64,
    pub one_sided: u64,
}

impl From<&ValidationReport> for ValidationCounts {
    fn from(r: &ValidationReport) -> Self {
        ValidationCounts {
            total: r.total,
            accepted: r.accepted,
            rejected: r.rejected_total(),
            crossed: r.crossed,
            one_sided: r.one_sided,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubsetCheck {
    pub narrow: String,
    pub wide: String,
    pub holds: bool,
    /// Events found only under the wider criterion.
    pub additional: u64,
}

/// Run record chaining the stages. Holds no wall-clock data so that reruns
/// are byte-identical.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema: String,
    pub version: String,
    pub status: Status,
    /// Set once detection has finished; later stages build on it.
    pub detected: bool,
    pub error: Option<String>,
    pub criteria: Vec<DetectionCriteria>,
    pub format: InputFormat,
    pub universe: Option<FileRecord>,
    pub trades: Vec<FileRecord>,
    pub quotes: Vec<FileRecord>,
    pub trade_validation: Option<ValidationCounts>,
    pub quote_validation: Option<ValidationCounts>,
    pub events: BTreeMap<String, u64>,
    pub subset_checks: Vec<SubsetCheck>,
    pub analysis: Option<AnalysisConfig>,
    pub outputs: BTreeSet<String>,
}

impl Manifest {
    pub fn new(criteria: Vec<DetectionCriteria>, format: InputFormat) -> Self {
        Manifest {
            schema: MANIFEST_SCHEMA.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            status: Status::Incomplete,
            detected: false,
            error: None,
            criteria,
            format,
            universe: None,
            trades: Vec::new(),
            quotes: Vec::new(),
            trade_validation: None,
            quote_validation: None,
            events: BTreeMap::new(),
            subset_checks: Vec::new(),
            analysis: None,
            outputs: BTreeSet::new(),
        }
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path)
            .with_context(|| format!("no manifest in {}; run `ueescan detect` first", dir.display()))?;
        let manifest: Manifest =
            serde_json::from_str(&text).with_context(|| format!("cannot parse {}", path.display()))?;
        if manifest.schema != MANIFEST_SCHEMA {
            bail!("{} has unknown schema {:?}", path.display(), manifest.schema);
        }
        Ok(manifest)
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        let path = dir.join(MANIFEST_FILE);
        fs::write(&path, text).with_context(|| format!("cannot write {}", path.display()))
    }

    /// Marks the run as in progress before a stage writes anything.
    pub fn begin(&mut self, dir: &Path) -> Result<()> {
        self.status = Status::Incomplete;
        self.error = None;
        self.save(dir)
    }

    pub fn finish(&mut self, dir: &Path) -> Result<()> {
        self.status = Status::Complete;
        self.save(dir)
    }

    pub fn record_outputs(&mut self, dir: &Path, files: &[PathBuf]) {
        for f in files {
            let rel = f.strip_prefix(dir).unwrap_or(f);
            self.outputs.insert(rel.to_string_lossy().replace('\\', "/"));
        }
    }
}

/// After a failed stage, flags whatever the manifest in `dir` describes as
/// incomplete and records the error.
pub fn mark_failed(dir: &Path, error: &anyhow::Error) {
    if let Ok(mut m) = Manifest::load(dir) {
        m.status = Status::Incomplete;
        m.error = Some(format!("{error:#}"));
        let _ = m.save(dir);
    }
}
