//! JSON-lines dataset manifests.
//!
//! The first line is a [`ManifestHeader`]; every following line is one
//! [`SampleRecord`]. Paths of degraded clouds are relative to the manifest's
//! directory.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{PipelineError, Result};
use crate::distort::Provenance;

pub const MANIFEST_FORMAT: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceEntry {
    pub id: String,
    pub path: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestHeader {
    pub format: u32,
    pub dataset_seed: u64,
    pub psnr_cap_db: f64,
    pub label_scale: (f64, f64),
    pub references: Vec<ReferenceEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub sample_id: String,
    pub reference_id: String,
    pub distortion_id: u8,
    pub level: u8,
    pub seed: u64,
    pub path: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pseudo_mos: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mos: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_metric: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
    /// Set when producing the cloud failed; no file exists then.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl SampleRecord {
    pub fn is_ok(&self) -> bool {
        self.error.is_none()
    }

    /// Subjective MOS when known, else the pseudo MOS.
    pub fn label(&self) -> Option<f64> {
        self.mos.or(self.pseudo_mos)
    }
}

pub fn sample_id(reference_id: &str, distortion_id: u8, level: u8) -> String {
    format!("{reference_id}_d{distortion_id:02}_l{level}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub header: ManifestHeader,
    pub records: Vec<SampleRecord>,
    /// Directory that relative paths resolve against.
    pub base: PathBuf,
}

impl Manifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| PipelineError::MissingFile(path.to_path_buf(), e))?;
        let mut lines = BufReader::new(file).lines();
        let first = lines
            .next()
            .ok_or_else(|| PipelineError::Validation(format!("{}: empty manifest", path.display())))??;
        let header: ManifestHeader = serde_json::from_str(&first)
            .map_err(|e| PipelineError::Validation(format!("{}: bad header: {e}", path.display())))?;
        if header.format != MANIFEST_FORMAT {
            return Err(PipelineError::Validation(format!("unsupported manifest format {}", header.format)));
        }
        let mut records = Vec::new();
        for (i, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: SampleRecord = serde_json::from_str(&line)
                .map_err(|e| PipelineError::Validation(format!("{}:{}: {e}", path.display(), i + 2)))?;
            records.push(rec);
        }
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let m = Self { header, records, base };
        m.validate()?;
        Ok(m)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        serde_json::to_writer(&mut w, &self.header)?;
        w.write_all(b"\n")?;
        for r in &self.records {
            serde_json::to_writer(&mut w, r)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
        Ok(())
    }

    /// Unique sample ids, known references, labels within the declared scale.
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.header.label_scale;
        if !(lo < hi) {
            return Err(PipelineError::Validation(format!("label scale [{lo}, {hi}] is empty")));
        }
        let refs: BTreeSet<&str> = self.header.references.iter().map(|r| r.id.as_str()).collect();
        let mut seen = BTreeSet::new();
        for r in &self.records {
            if !seen.insert(r.sample_id.as_str()) {
                return Err(PipelineError::Validation(format!("duplicate sample id {}", r.sample_id)));
            }
            if !refs.contains(r.reference_id.as_str()) {
                return Err(PipelineError::Validation(format!(
                    "sample {} names unknown reference {}",
                    r.sample_id, r.reference_id
                )));
            }
            for v in [r.mos, r.pseudo_mos].into_iter().flatten() {
                if !(lo..=hi).contains(&v) {
                    return Err(PipelineError::Validation(format!(
                        "label {v} of {} outside [{lo}, {hi}]",
                        r.sample_id
                    )));
                }
            }
        }
        Ok(())
    }

    /// Checks that every referenced file exists.
    pub fn check_files(&self) -> Result<()> {
        for r in &self.header.references {
            let p = self.resolve(&r.path);
            if !p.is_file() {
                return Err(PipelineError::MissingFile(p, std::io::ErrorKind::NotFound.into()));
            }
        }
        for r in self.records.iter().filter(|r| r.is_ok()) {
            let p = self.resolve(&r.path);
            if !p.is_file() {
                return Err(PipelineError::MissingFile(p, std::io::ErrorKind::NotFound.into()));
            }
        }
        Ok(())
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base.join(p)
        }
    }

    pub fn reference_path(&self, id: &str) -> Option<PathBuf> {
        self.header
            .references
            .iter()
            .find(|r| r.id == id)
            .map(|r| self.resolve(&r.path))
    }

    pub fn reference_ids(&self) -> BTreeSet<String> {
        self.header.references.iter().map(|r| r.id.clone()).collect()
    }

    pub fn by_id(&self) -> BTreeMap<&str, &SampleRecord> {
        self.records.iter().map(|r| (r.sample_id.as_str(), r)).collect()
    }
}
