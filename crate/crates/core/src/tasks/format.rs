//! Flat binary and JSON exports of trial batches.
//!
//! Binary layout, all little-endian:
//!
//! ```text
//! magic   b"EVD1"
//! u32     B, T, D, N_out, n_in
//! u32     mode (0 fixed_rt, 1 free_rt, 2 context_dependent)
//! f64     sigma, dt
//! u64     seed
//! f64[]   latents (B*D), observations (B*T*D), inputs (B*T*n_in),
//!         targets (B*T*N_out), loss_mask (B*T*N_out), row-major
//! ```

use std::io::{Read, Write};

use ndarray::{Array, Array2, Array3, Dimension};

use crate::error::{Error, Result};
use crate::tasks::batch::{BatchMeta, TrialBatch, TrialMode};

pub const MAGIC: &[u8; 4] = b"EVD1";

fn mode_code(mode: TrialMode) -> u32 {
    match mode {
        TrialMode::FixedRt => 0,
        TrialMode::FreeRt => 1,
        TrialMode::ContextDependent => 2,
    }
}

fn mode_from_code(code: u32) -> Result<TrialMode> {
    match code {
        0 => Ok(TrialMode::FixedRt),
        1 => Ok(TrialMode::FreeRt),
        2 => Ok(TrialMode::ContextDependent),
        other => Err(Error::Format(format!("unknown trial mode code {other}"))),
    }
}

fn put_array<D: Dimension>(w: &mut impl Write, a: &Array<f64, D>) -> Result<()> {
    let mut buf = Vec::with_capacity(a.len() * 8);
    for v in a.iter() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

fn get_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn get_u64(r: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn get_f64(r: &mut impl Read) -> Result<f64> {
    Ok(f64::from_bits(get_u64(r)?))
}

fn get_values(r: &mut impl Read, n: usize) -> Result<Vec<f64>> {
    let mut buf = vec![0u8; n * 8];
    r.read_exact(&mut buf)?;
    Ok(buf
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect())
}

pub fn write_batch(w: &mut impl Write, batch: &TrialBatch) -> Result<()> {
    let (b, t, d) = batch.observations.dim();
    let n_out = batch.targets.dim().2;
    let n_in = batch.inputs.dim().2;
    w.write_all(MAGIC)?;
    for v in [b, t, d, n_out, n_in] {
        let v = u32::try_from(v).map_err(|_| Error::Format(format!("dimension {v} exceeds u32")))?;
        w.write_all(&v.to_le_bytes())?;
    }
    w.write_all(&mode_code(batch.meta.mode).to_le_bytes())?;
    w.write_all(&batch.meta.sigma.to_le_bytes())?;
    w.write_all(&batch.meta.dt.to_le_bytes())?;
    w.write_all(&batch.meta.seed.to_le_bytes())?;
    put_array(w, &batch.latents)?;
    put_array(w, &batch.observations)?;
    put_array(w, &batch.inputs)?;
    put_array(w, &batch.targets)?;
    put_array(w, &batch.loss_mask)?;
    Ok(())
}

pub fn read_batch(r: &mut impl Read) -> Result<TrialBatch> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format(format!("bad magic {magic:?}")));
    }
    let b = get_u32(r)? as usize;
    let t = get_u32(r)? as usize;
    let d = get_u32(r)? as usize;
    let n_out = get_u32(r)? as usize;
    let n_in = get_u32(r)? as usize;
    let mode = mode_from_code(get_u32(r)?)?;
    let sigma = get_f64(r)?;
    let dt = get_f64(r)?;
    let seed = get_u64(r)?;
    let shape_err = |e: ndarray::ShapeError| Error::Format(e.to_string());
    let latents = Array2::from_shape_vec((b, d), get_values(r, b * d)?).map_err(shape_err)?;
    let observations = Array3::from_shape_vec((b, t, d), get_values(r, b * t * d)?).map_err(shape_err)?;
    let inputs = Array3::from_shape_vec((b, t, n_in), get_values(r, b * t * n_in)?).map_err(shape_err)?;
    let targets = Array3::from_shape_vec((b, t, n_out), get_values(r, b * t * n_out)?).map_err(shape_err)?;
    let loss_mask = Array3::from_shape_vec((b, t, n_out), get_values(r, b * t * n_out)?).map_err(shape_err)?;
    Ok(TrialBatch {
        latents,
        observations,
        inputs,
        targets,
        loss_mask,
        meta: BatchMeta {
            sigma,
            t_steps: t,
            dt,
            seed,
            mode,
        },
    })
}

pub fn batch_to_json(batch: &TrialBatch) -> Result<String> {
    Ok(serde_json::to_string(batch)?)
}

pub fn batch_from_json(text: &str) -> Result<TrialBatch> {
    Ok(serde_json::from_str(text)?)
}
