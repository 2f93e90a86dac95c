//! Adapters that shell out to codecs and reconstruction tools.
//!
//! An adapter config is a JSON object keyed by distortion id:
//!
//! ```json
//! { "25": { "command": "tmc3", "args": ["--in={in}", "--out={out}", "--qp={qp}"] } }
//! ```
//!
//! Placeholders: `{in}` and `{out}` are PLY paths, `{p1}`..`{pk}` are the
//! level parameters in catalogue order, and `{name}` is the parameter with
//! that catalogue name.

use std::collections::BTreeMap;
use std::io::ErrorKind;
use std::path::Path;
use std::process::Command;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use super::{DistortError, DistortionSpec, Result};
use crate::pcio::{load_ply, save_ply, PlyMode, PointCloud};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Adapter {
    pub command: String,
    #[serde(default)]
    pub args: Vec<String>,
    /// When false, invocations of this adapter are serialized.
    #[serde(default = "yes")]
    pub reentrant: bool,
    #[serde(skip)]
    lock: Arc<Mutex<()>>,
}

fn yes() -> bool {
    true
}

impl Adapter {
    pub fn new(command: impl Into<String>, args: Vec<String>) -> Self {
        Self {
            command: command.into(),
            args,
            reentrant: true,
            lock: Arc::default(),
        }
    }

    pub fn serialized(mut self) -> Self {
        self.reentrant = false;
        self
    }

    /// The argument list with every placeholder substituted.
    pub fn render_args(&self, input: &Path, output: &Path, spec: &DistortionSpec) -> Vec<String> {
        let params = spec.descriptor().level_params(spec.level);
        self.args
            .iter()
            .map(|a| {
                let mut s = a
                    .replace("{in}", &input.to_string_lossy())
                    .replace("{out}", &output.to_string_lossy());
                for (i, (name, v)) in params.iter().enumerate() {
                    let text = format_param(*v);
                    s = s.replace(&format!("{{p{}}}", i + 1), &text);
                    s = s.replace(&format!("{{{name}}}"), &text);
                }
                s
            })
            .collect()
    }
}

/// Catalogue values verbatim: integers without a fractional part.
fn format_param(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AdapterConfig {
    adapters: BTreeMap<u8, Adapter>,
}

impl AdapterConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self =
            serde_json::from_str(text).map_err(|e| DistortError::AdapterConfig(e.to_string()))?;
        for (&id, a) in &cfg.adapters {
            match super::descriptor(id) {
                Some(d) if !d.is_native() => {}
                _ => {
                    return Err(DistortError::AdapterConfig(format!(
                        "id {id} is not an external distortion"
                    )))
                }
            }
            if a.command.trim().is_empty() {
                return Err(DistortError::AdapterConfig(format!("id {id} has an empty command")));
            }
        }
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn insert(&mut self, id: u8, adapter: Adapter) {
        self.adapters.insert(id, adapter);
    }

    pub fn get(&self, id: u8) -> Option<&Adapter> {
        self.adapters.get(&id)
    }

    pub fn ids(&self) -> impl Iterator<Item = u8> + '_ {
        self.adapters.keys().copied()
    }
}

/// Writes the cloud to a scratch directory, runs the adapter and reads back
/// its output. Returns the degraded cloud and the tool identity.
pub fn external_codec(
    cloud: &PointCloud,
    spec: &DistortionSpec,
    config: &AdapterConfig,
) -> Result<(PointCloud, String)> {
    let adapter = config
        .get(spec.distortion_id)
        .ok_or(DistortError::AdapterNotConfigured(spec.distortion_id))?;
    let dir = tempfile::tempdir()?;
    let input = dir.path().join("in.ply");
    let output = dir.path().join("out.ply");
    save_ply(cloud, &input, PlyMode::BinaryLe)?;
    let args = adapter.render_args(&input, &output, spec);

    let _guard = (!adapter.reentrant).then(|| adapter.lock.lock().unwrap_or_else(|e| e.into_inner()));
    let result = Command::new(&adapter.command).args(&args).output();
    let out = match result {
        Ok(out) => out,
        Err(e) if e.kind() == ErrorKind::NotFound => {
            return Err(DistortError::ToolMissing(adapter.command.clone()))
        }
        Err(e) => return Err(e.into()),
    };
    if !out.status.success() {
        return Err(DistortError::ToolFailed {
            command: adapter.command.clone(),
            status: out.status.to_string(),
            stderr: String::from_utf8_lossy(&out.stderr).trim().to_string(),
        });
    }
    let degraded = load_ply(&output).map_err(DistortError::UnreadableOutput)?;
    Ok((degraded, format!("external:{}", adapter.command)))
}
