//! Binary checkpoints: a JSON metadata block followed by named `f64` arrays.
//!
//! Layout (little-endian): magic `HOPQACKP`, `u32` version, `u64` metadata
//! length, metadata JSON, `u32` array count, then per array a `u32` name
//! length, the name, a `u32` rank, `u64` dimensions and the values.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::{ArrayD, IxDyn};
use serde_json::Value;

use super::Params;
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"HOPQACKP";
const VERSION: u32 = 1;

pub fn write_checkpoint<P: Params>(w: &mut impl Write, meta: &Value, params: &P) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    let meta = serde_json::to_vec(meta)?;
    w.write_all(&(meta.len() as u64).to_le_bytes())?;
    w.write_all(&meta)?;
    let arrays = params.arrays();
    w.write_all(&(arrays.len() as u32).to_le_bytes())?;
    for (name, a) in arrays {
        w.write_all(&(name.len() as u32).to_le_bytes())?;
        w.write_all(name.as_bytes())?;
        w.write_all(&(a.ndim() as u32).to_le_bytes())?;
        for &d in a.shape() {
            w.write_all(&(d as u64).to_le_bytes())?;
        }
        for &v in a.iter() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn save_checkpoint<P: Params>(path: &Path, meta: &Value, params: &P) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_checkpoint(&mut w, meta, params)?;
    w.flush()?;
    Ok(())
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    let mut b = [0; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

/// Metadata and arrays in file order.
pub struct RawCheckpoint {
    pub meta: Value,
    pub arrays: Vec<(String, ArrayD<f64>)>,
}

pub fn read_checkpoint(r: &mut impl Read) -> Result<RawCheckpoint> {
    let mut magic = [0; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Checkpoint("not a checkpoint file".into()));
    }
    let version = read_u32(r)?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let meta_len = read_u64(r)? as usize;
    let mut meta = vec![0; meta_len];
    r.read_exact(&mut meta)?;
    let meta = serde_json::from_slice(&meta)?;
    let n = read_u32(r)? as usize;
    let mut arrays = Vec::with_capacity(n);
    for _ in 0..n {
        let mut name = vec![0; read_u32(r)? as usize];
        r.read_exact(&mut name)?;
        let name = String::from_utf8(name).map_err(|_| Error::Checkpoint("array name is not UTF-8".into()))?;
        let ndim = read_u32(r)? as usize;
        let shape = (0..ndim)
            .map(|_| read_u64(r).map(|d| d as usize))
            .collect::<Result<Vec<_>>>()?;
        let len: usize = shape.iter().product();
        let mut data = vec![0u8; len * 8];
        r.read_exact(&mut data)?;
        let values = data
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        let a = ArrayD::from_shape_vec(IxDyn(&shape), values).map_err(|e| Error::Checkpoint(e.to_string()))?;
        arrays.push((name, a));
    }
    Ok(RawCheckpoint { meta, arrays })
}

pub fn load_checkpoint(path: &Path) -> Result<RawCheckpoint> {
    read_checkpoint(&mut BufReader::new(File::open(path)?))
}

impl RawCheckpoint {
    /// Copies the stored arrays into `params`, which must have the same
    /// names and shapes in the same order.
    pub fn fill<P: Params>(&self, params: &mut P) -> Result<()> {
        let targets = params.arrays_mut();
        if targets.len() != self.arrays.len() {
            return Err(Error::Checkpoint(format!(
                "expected {} arrays, found {}",
                targets.len(),
                self.arrays.len()
            )));
        }
        for ((name, mut dst), (src_name, src)) in targets.into_iter().zip(&self.arrays) {
            if &name != src_name || dst.shape() != src.shape() {
                return Err(Error::Checkpoint(format!(
                    "array {src_name} {:?} does not match {name} {:?}",
                    src.shape(),
                    dst.shape()
                )));
            }
            dst.assign(src);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoder::{init_params, EncoderConfig, Params};

    #[test]
    fn round_trip_is_exact() {
        let cfg = EncoderConfig {
            d_model: 8,
            n_heads: 2,
            d_ff: 16,
            max_len: 16,
            vocab_size: 20,
            init_std: 0.3,
            ..EncoderConfig::default()
        };
        let p = init_params(&cfg).unwrap();
        let meta = serde_json::json!({"kind": "test", "x": 1.5});
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &meta, &p).unwrap();
        let raw = read_checkpoint(&mut buf.as_slice()).unwrap();
        assert_eq!(raw.meta, meta);
        let mut q = init_params(&EncoderConfig { seed: 9, ..cfg }).unwrap();
        raw.fill(&mut q).unwrap();
        assert_eq!(p.to_flat(), q.to_flat());

        let mut other = init_params(&EncoderConfig { n_layers: 1, ..cfg }).unwrap();
        assert!(raw.fill(&mut other).is_err());
        buf[0] = b'X';
        assert!(read_checkpoint(&mut buf.as_slice()).is_err());
    }
}
