//! On-disk cache for distance fields.
//!
//! Entries are keyed by a SHA-256 content hash of the domain, the mode and the
//! lattice. The file layout is a fixed little-endian header followed by the
//! raw field:
//!
//! ```text
//! magic "NLDF" | version u32 | endian tag u32 (0x01020304) | key (32 bytes)
//! dim u32 | periodic u8 | empty u8 | wraparound u8
//! per axis: count u64, h f64, length f64, origin i64, shape u64, wrap u8
//! dist f64 × Π shape
//! ```

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::nodal_geom::{distance_field, extract_nodal, sample_lattice_capped, DistanceField, Lattice, Shape, DEFAULT_MAX_POINTS};
use crate::spectrum::EigenMode;
use crate::{Error, Result};

const MAGIC: &[u8; 4] = b"NLDF";
const VERSION: u32 = 1;
const ENDIAN_TAG: u32 = 0x0102_0304;

/// Environment variable overriding the cache directory.
pub const CACHE_DIR_ENV: &str = "NODAL_LAB_CACHE_DIR";

/// Content key of a distance field.
pub fn field_key(mode: &EigenMode, lattice: &Lattice) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(mode.domain().canonical_key().as_bytes());
    h.update(b"|m");
    for &m in mode.m() {
        h.update(m.to_le_bytes());
    }
    h.update(b"|k");
    h.update(format!("{:?}", mode.kinds()).as_bytes());
    h.update(b"|l");
    for j in 0..lattice.dim() {
        h.update((lattice.counts[j] as u64).to_le_bytes());
        h.update(lattice.h[j].to_bits().to_le_bytes());
    }
    h.finalize().into()
}

#[derive(Clone, Debug)]
pub struct FieldCache {
    dir: Option<PathBuf>,
}

impl FieldCache {
    /// A cache rooted at `dir`; `None` disables caching.
    pub fn new(dir: Option<PathBuf>) -> Self {
        Self { dir }
    }

    pub fn disabled() -> Self {
        Self { dir: None }
    }

    /// Directory from the environment override, else `fallback`.
    pub fn from_env(fallback: Option<PathBuf>) -> Self {
        let dir = std::env::var_os(CACHE_DIR_ENV).map(PathBuf::from).or(fallback);
        Self { dir }
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    fn path_for(&self, key: &[u8; 32]) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join(format!("{}.nldf", hex::encode(key))))
    }

    /// Loads the field for `(mode, lattice)` or computes and stores it.
    pub fn distance_field(&self, mode: &EigenMode, lattice: &Lattice) -> Result<DistanceField> {
        let key = field_key(mode, lattice);
        if let Some(path) = self.path_for(&key) {
            if path.exists() {
                let mut bytes = Vec::new();
                fs::File::open(&path)?.read_to_end(&mut bytes)?;
                let (stored, field) = decode(&bytes, mode)?;
                if stored == key {
                    return Ok(field);
                }
            }
        }
        let sample = sample_lattice_capped(mode, lattice, DEFAULT_MAX_POINTS)?;
        let field = distance_field(&extract_nodal(&sample), &sample)?;
        if let Some(path) = self.path_for(&key) {
            if let Some(parent) = path.parent() {
                fs::create_dir_all(parent)?;
            }
            let tmp = path.with_extension("tmp");
            fs::File::create(&tmp)?.write_all(&encode(&key, &field))?;
            fs::rename(tmp, path)?;
        }
        Ok(field)
    }
}

pub fn encode(key: &[u8; 32], f: &DistanceField) -> Vec<u8> {
    let n = f.dim();
    let mut out = Vec::with_capacity(64 + 48 * n + 8 * f.dist.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&ENDIAN_TAG.to_le_bytes());
    out.extend_from_slice(key);
    out.extend_from_slice(&(n as u32).to_le_bytes());
    out.push(f.lattice.periodic as u8);
    out.push(f.empty as u8);
    out.push(f.wraparound as u8);
    for j in 0..n {
        out.extend_from_slice(&(f.lattice.counts[j] as u64).to_le_bytes());
        out.extend_from_slice(&f.lattice.h[j].to_le_bytes());
        out.extend_from_slice(&f.lattice.lengths[j].to_le_bytes());
        out.extend_from_slice(&f.origin[j].to_le_bytes());
        out.extend_from_slice(&(f.shape.dims[j] as u64).to_le_bytes());
        out.push(f.wrap[j] as u8);
    }
    for d in &f.dist {
        out.extend_from_slice(&d.to_le_bytes());
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::CacheFormat("truncated file".into()));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn i64(&mut self) -> Result<i64> {
        Ok(i64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

/// Decodes a cache file; the domain is taken from `mode`.
pub fn decode(bytes: &[u8], mode: &EigenMode) -> Result<([u8; 32], DistanceField)> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(Error::CacheFormat("bad magic".into()));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::CacheFormat(format!("unsupported version {version}")));
    }
    if r.u32()? != ENDIAN_TAG {
        return Err(Error::CacheFormat("endianness tag mismatch".into()));
    }
    let key: [u8; 32] = r.take(32)?.try_into().unwrap();
    let n = r.u32()? as usize;
    if n == 0 || n > 16 {
        return Err(Error::CacheFormat(format!("bad dimension {n}")));
    }
    let periodic = r.u8()? != 0;
    let empty = r.u8()? != 0;
    let wraparound = r.u8()? != 0;
    let mut lattice = Lattice {
        counts: Vec::with_capacity(n),
        h: Vec::with_capacity(n),
        lengths: Vec::with_capacity(n),
        periodic,
    };
    let mut origin = Vec::with_capacity(n);
    let mut dims = Vec::with_capacity(n);
    let mut wrap = Vec::with_capacity(n);
    for _ in 0..n {
        lattice.counts.push(r.u64()? as usize);
        lattice.h.push(r.f64()?);
        lattice.lengths.push(r.f64()?);
        origin.push(r.i64()?);
        dims.push(r.u64()? as usize);
        wrap.push(r.u8()? != 0);
    }
    let shape = Shape::new(dims);
    let total = shape.len();
    if bytes.len() - r.pos != 8 * total {
        return Err(Error::CacheFormat("payload size mismatch".into()));
    }
    let mut dist = Vec::with_capacity(total);
    for _ in 0..total {
        dist.push(r.f64()?);
    }
    Ok((
        key,
        DistanceField {
            domain: mode.domain().clone(),
            lattice,
            origin,
            shape,
            wrap,
            dist,
            wraparound,
            empty,
        },
    ))
}
