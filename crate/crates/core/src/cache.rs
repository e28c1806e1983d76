//! On-disk cache for assembled impedance blocks, keyed by a hash of the
//! exact geometry, frequency, and quadrature settings that produced them.
//!
//! File layout: 8-byte magic, u32 LE metadata length, JSON metadata, then
//! the full impedance matrix as interleaved little-endian f64 (re, im) in
//! row-major order.

use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::impedance::ImpedanceBlocks;
use crate::quadrature::QuadratureSpec;
use crate::scenario::Scenario;

const MAGIC: &[u8; 8] = b"RWIRECZ1";

#[derive(Debug, Error)]
pub enum CacheError {
    #[error("cache i/o: {0}")]
    Io(#[from] io::Error),
    #[error("cache metadata: {0}")]
    Metadata(#[from] serde_json::Error),
    #[error("not a cache file (bad magic)")]
    BadMagic,
    #[error("cache entry was written for key {found}, expected {expected}")]
    KeyMismatch { expected: String, found: String },
    #[error("cache payload truncated: expected {expected} complex entries, got {got}")]
    Truncated { expected: usize, got: usize },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CacheMetadata {
    pub key: String,
    pub n_transmit: usize,
    pub n_scatterer: usize,
    pub n_receive: usize,
    pub frequency_hz: f64,
}

/// Hex digest over the canonical scenario geometry plus the quadrature
/// settings. Any change to element positions, dimensions, frequency, or
/// integration accuracy produces a different key.
pub fn geometry_hash(scenario: &Scenario, quad: &QuadratureSpec) -> String {
    let mut hasher = Sha256::new();
    let mut push = |x: f64| hasher.update(x.to_le_bytes());
    push(scenario.constants.frequency);
    for element in scenario.elements() {
        push(element.position.x);
        push(element.position.y);
        push(element.position.z);
        push(element.length);
        push(element.radius);
    }
    push(quad.base_order as f64);
    push(quad.rel_tol);
    push(quad.max_subdivisions as f64);
    push(quad.near_panel_width.unwrap_or(-1.0));
    // group boundaries matter: same points split differently are different
    hasher.update((scenario.transmit.len() as u64).to_le_bytes());
    hasher.update((scenario.scatterers.len() as u64).to_le_bytes());
    hasher.update((scenario.receive.len() as u64).to_le_bytes());
    format!("{:x}", hasher.finalize())
}

fn entry_path(dir: &Path, key: &str) -> PathBuf {
    dir.join(format!("{key}.zbin"))
}

/// Writes the blocks under `key` in `dir`, creating the directory if needed.
pub fn store(
    dir: &Path,
    key: &str,
    frequency_hz: f64,
    blocks: &ImpedanceBlocks,
) -> Result<PathBuf, CacheError> {
    fs::create_dir_all(dir)?;
    let (nt, ns, nr) = blocks.dims();
    let meta = CacheMetadata {
        key: key.to_string(),
        n_transmit: nt,
        n_scatterer: ns,
        n_receive: nr,
        frequency_hz,
    };
    let meta_json = serde_json::to_vec(&meta)?;
    let path = entry_path(dir, key);
    let tmp = path.with_extension("zbin.tmp");
    {
        let mut out = io::BufWriter::new(fs::File::create(&tmp)?);
        out.write_all(MAGIC)?;
        out.write_u32::<LittleEndian>(meta_json.len() as u32)?;
        out.write_all(&meta_json)?;
        let full = blocks.full_matrix();
        for i in 0..full.nrows() {
            for j in 0..full.ncols() {
                out.write_f64::<LittleEndian>(full[(i, j)].re)?;
                out.write_f64::<LittleEndian>(full[(i, j)].im)?;
            }
        }
        out.flush()?;
    }
    fs::rename(&tmp, &path)?;
    Ok(path)
}

/// Loads the entry for `key` from `dir`, or `Ok(None)` if absent. A present
/// but corrupt or mismatched entry is an error, never silently recomputed.
pub fn load(dir: &Path, key: &str) -> Result<Option<(ImpedanceBlocks, CacheMetadata)>, CacheError> {
    let path = entry_path(dir, key);
    let file = match fs::File::open(&path) {
        Ok(f) => f,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(None),
        Err(e) => return Err(e.into()),
    };
    let mut reader = io::BufReader::new(file);
    let mut magic = [0u8; 8];
    reader.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(CacheError::BadMagic);
    }
    let meta_len = reader.read_u32::<LittleEndian>()? as usize;
    let mut meta_json = vec![0u8; meta_len];
    reader.read_exact(&mut meta_json)?;
    let meta: CacheMetadata = serde_json::from_slice(&meta_json)?;
    if meta.key != key {
        return Err(CacheError::KeyMismatch {
            expected: key.to_string(),
            found: meta.key,
        });
    }
    let n = meta.n_transmit + meta.n_scatterer + meta.n_receive;
    let mut full = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let re = reader.read_f64::<LittleEndian>().map_err(|_| CacheError::Truncated {
                expected: n * n,
                got: i * n + j,
            })?;
            let im = reader.read_f64::<LittleEndian>().map_err(|_| CacheError::Truncated {
                expected: n * n,
                got: i * n + j,
            })?;
            full[(i, j)] = Complex64::new(re, im);
        }
    }
    let blocks = ImpedanceBlocks::from_full(&full, meta.n_transmit, meta.n_scatterer, meta.n_receive);
    Ok(Some((blocks, meta)))
}
