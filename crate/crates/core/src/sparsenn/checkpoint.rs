//! Binary model checkpoints.
//!
//! Layout, all integers and floats little-endian:
//! magic (8 bytes), version `u32`, config JSON length `u64`, config JSON,
//! parameter count `u64`, parameters `f64`, running-stat count `u64`,
//! running means and variances `f64` (per batch-norm layer, means first).

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::model::{ModelConfig, ResScnn};
use super::{NnError, Result};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"RSCNNCKP";
pub const CHECKPOINT_VERSION: u32 = 1;

fn put_f64s<W: Write>(w: &mut W, v: &[f64]) -> Result<()> {
    w.write_all(&(v.len() as u64).to_le_bytes())?;
    for x in v {
        w.write_all(&x.to_le_bytes())?;
    }
    Ok(())
}

fn get_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn get_f64s<R: Read>(r: &mut R, limit: usize) -> Result<Vec<f64>> {
    let n = get_u64(r)? as usize;
    if n > limit {
        return Err(NnError::Checkpoint(format!("block of {n} values exceeds expected {limit}")));
    }
    let mut out = Vec::with_capacity(n);
    let mut b = [0u8; 8];
    for _ in 0..n {
        r.read_exact(&mut b)?;
        out.push(f64::from_le_bytes(b));
    }
    Ok(out)
}

pub fn write_checkpoint<W: Write>(mut w: W, model: &ResScnn) -> Result<()> {
    w.write_all(CHECKPOINT_MAGIC)?;
    w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    let cfg = serde_json::to_vec(model.config())?;
    w.write_all(&(cfg.len() as u64).to_le_bytes())?;
    w.write_all(&cfg)?;
    put_f64s(&mut w, &model.flat_params())?;
    put_f64s(&mut w, &model.flat_running_stats())?;
    w.flush()?;
    Ok(())
}

pub fn read_checkpoint<R: Read>(mut r: R) -> Result<ResScnn> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(NnError::Checkpoint("bad magic".into()));
    }
    let mut v = [0u8; 4];
    r.read_exact(&mut v)?;
    let version = u32::from_le_bytes(v);
    if version != CHECKPOINT_VERSION {
        return Err(NnError::Checkpoint(format!("unsupported version {version}")));
    }
    let len = get_u64(&mut r)? as usize;
    if len > 1 << 20 {
        return Err(NnError::Checkpoint("config block too large".into()));
    }
    let mut cfg = vec![0u8; len];
    r.read_exact(&mut cfg)?;
    let config: ModelConfig = serde_json::from_slice(&cfg)?;
    let shape = ResScnn::zeros(&config)?;
    let params = get_f64s(&mut r, shape.param_count())?;
    let running = get_f64s(&mut r, shape.flat_running_stats().len())?;
    ResScnn::from_flat(&config, &params, &running)
}

pub fn save_checkpoint(path: impl AsRef<Path>, model: &ResScnn) -> Result<()> {
    write_checkpoint(BufWriter::new(File::create(path)?), model)
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<ResScnn> {
    read_checkpoint(BufReader::new(File::open(path)?))
}
