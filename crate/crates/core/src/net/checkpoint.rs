//! Checkpoint files.
//!
//! ```text
//! magic   b"EVCK"
//! u64     header length in bytes (little-endian)
//! bytes   JSON header (CheckpointHeader)
//! f64[]   w_rec, w_in, b, w_out, row-major, little-endian
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::net::params::{LeakyRnnParams, NetShape};

pub const MAGIC: &[u8; 4] = b"EVCK";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub shape: NetShape,
    pub seed: u64,
    pub step: u64,
    /// Seed of the frozen encoder, regenerated on load.
    pub encoder_seed: Option<u64>,
    /// Free-form run configuration.
    #[serde(default)]
    pub config: serde_json::Value,
}

pub fn write_checkpoint(w: &mut impl Write, params: &LeakyRnnParams, header: &CheckpointHeader) -> Result<()> {
    if header.shape != params.shape() {
        return Err(Error::Format("header shape does not match parameters".into()));
    }
    let json = serde_json::to_vec(header)?;
    w.write_all(MAGIC)?;
    w.write_all(&(json.len() as u64).to_le_bytes())?;
    w.write_all(&json)?;
    for t in params.tensors() {
        let mut buf = Vec::with_capacity(t.len() * 8);
        for v in t {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    Ok(())
}

pub fn read_checkpoint(r: &mut impl Read) -> Result<(LeakyRnnParams, CheckpointHeader)> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format(format!("bad checkpoint magic {magic:?}")));
    }
    let mut len = [0u8; 8];
    r.read_exact(&mut len)?;
    let len = u64::from_le_bytes(len) as usize;
    if len > 1 << 26 {
        return Err(Error::Format(format!("header length {len} is implausible")));
    }
    let mut json = vec![0u8; len];
    r.read_exact(&mut json)?;
    let header: CheckpointHeader = serde_json::from_slice(&json)?;
    let mut params = LeakyRnnParams::zeros(header.shape)?;
    for t in params.tensors_mut() {
        let mut buf = vec![0u8; t.len() * 8];
        r.read_exact(&mut buf)?;
        for (v, c) in t.iter_mut().zip(buf.chunks_exact(8)) {
            *v = f64::from_le_bytes(c.try_into().expect("8-byte chunk"));
        }
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(Error::Format("trailing bytes after checkpoint".into()));
    }
    Ok((params, header))
}

pub fn save(path: &Path, params: &LeakyRnnParams, header: &CheckpointHeader) -> Result<()> {
    let tmp = path.with_extension("partial");
    {
        let mut w = BufWriter::new(File::create(&tmp)?);
        write_checkpoint(&mut w, params, header)?;
        w.flush()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

pub fn load(path: &Path) -> Result<(LeakyRnnParams, CheckpointHeader)> {
    read_checkpoint(&mut BufReader::new(File::open(path)?))
}
