//! On-disk cache of spectral data.
//!
//! Layout of an entry (all integers and floats little-endian):
//!
//! ```text
//! magic "BZTQSPEC" | version u8 | k u32 | dim u32 | provenance len u32 | provenance utf-8
//! | eigenvalues f64 × dim | eigenvectors (re, im) f64 × 2·dim², column-major
//! | sha256 of everything above
//! ```

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use num_complex::Complex64;
use sha2::{Digest, Sha256};

pub const MAGIC: &[u8; 8] = b"BZTQSPEC";
pub const FORMAT_VERSION: u8 = 1;
const CHECKSUM_LEN: usize = 32;

/// Content key: hex SHA-256 of the inputs that determine a spectrum.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CacheKey(String);

impl CacheKey {
    pub fn new(observable: &str, k: u32, assembly: &str, quadrature: &str) -> Self {
        let mut h = Sha256::new();
        for (name, value) in [
            ("model", berezin_core::VERSION),
            ("format", &FORMAT_VERSION.to_string()),
            ("observable", observable),
            ("k", &k.to_string()),
            ("assembly", assembly),
            ("quadrature", quadrature),
        ] {
            h.update(name.as_bytes());
            h.update([0]);
            h.update(value.as_bytes());
            h.update([0]);
        }
        CacheKey(hex(&h.finalize()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CacheEntry {
    pub k: u32,
    pub provenance: String,
    pub values: Vec<f64>,
    pub vectors: DMatrix<Complex64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Lookup {
    Hit(CacheEntry),
    Miss,
    /// Unreadable entry; treated as a miss by callers.
    Corrupt(String),
}

pub fn encode(e: &CacheEntry) -> Vec<u8> {
    let n = e.values.len();
    let mut buf = Vec::with_capacity(8 + 1 + 12 + e.provenance.len() + 8 * n * (1 + 2 * n) + CHECKSUM_LEN);
    buf.extend_from_slice(MAGIC);
    buf.push(FORMAT_VERSION);
    buf.extend_from_slice(&e.k.to_le_bytes());
    buf.extend_from_slice(&(n as u32).to_le_bytes());
    buf.extend_from_slice(&(e.provenance.len() as u32).to_le_bytes());
    buf.extend_from_slice(e.provenance.as_bytes());
    for v in &e.values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    for z in e.vectors.iter() {
        buf.extend_from_slice(&z.re.to_le_bytes());
        buf.extend_from_slice(&z.im.to_le_bytes());
    }
    let sum = Sha256::digest(&buf);
    buf.extend_from_slice(&sum);
    buf
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], String> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len()).ok_or("truncated payload")?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, String> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, String> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn decode(bytes: &[u8]) -> Result<CacheEntry, String> {
    if bytes.len() < MAGIC.len() + 1 + CHECKSUM_LEN {
        return Err("truncated payload".into());
    }
    if &bytes[..MAGIC.len()] != MAGIC {
        return Err("bad magic header".into());
    }
    if bytes[MAGIC.len()] != FORMAT_VERSION {
        return Err(format!("format version {} (expected {FORMAT_VERSION})", bytes[MAGIC.len()]));
    }
    let (body, sum) = bytes.split_at(bytes.len() - CHECKSUM_LEN);
    if Sha256::digest(body).as_slice() != sum {
        return Err("checksum mismatch".into());
    }
    let mut r = Reader {
        buf: body,
        pos: MAGIC.len() + 1,
    };
    let k = r.u32()?;
    let n = r.u32()? as usize;
    if n != k as usize + 1 {
        return Err(format!("dimension {n} does not match level {k}"));
    }
    let plen = r.u32()? as usize;
    let provenance = String::from_utf8(r.take(plen)?.to_vec()).map_err(|_| "provenance is not utf-8")?;
    let values = (0..n).map(|_| r.f64()).collect::<Result<Vec<_>, _>>()?;
    let mut data = Vec::with_capacity(n * n);
    for _ in 0..n * n {
        let re = r.f64()?;
        let im = r.f64()?;
        data.push(Complex64::new(re, im));
    }
    if r.pos != body.len() {
        return Err("trailing bytes".into());
    }
    Ok(CacheEntry {
        k,
        provenance,
        values,
        vectors: DMatrix::from_vec(n, n, data),
    })
}

#[derive(Debug, Clone)]
pub struct Cache {
    dir: PathBuf,
}

impl Cache {
    pub fn open(dir: &Path) -> std::io::Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Cache { dir: dir.to_path_buf() })
    }

    pub fn path_for(&self, key: &CacheKey) -> PathBuf {
        self.dir.join(format!("{}.bin", key.as_str()))
    }

    pub fn lookup(&self, key: &CacheKey) -> Lookup {
        let path = self.path_for(key);
        match fs::read(&path) {
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Lookup::Miss,
            Err(e) => Lookup::Corrupt(format!("{}: {e}", path.display())),
            Ok(bytes) => match decode(&bytes) {
                Ok(entry) => Lookup::Hit(entry),
                Err(reason) => Lookup::Corrupt(format!("{}: {reason}", path.display())),
            },
        }
    }

    /// Writes to a temporary file in the cache directory, then renames it
    /// over the final path.
    pub fn store(&self, key: &CacheKey, entry: &CacheEntry) -> std::io::Result<()> {
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir)?;
        tmp.write_all(&encode(entry))?;
        tmp.as_file().sync_all()?;
        tmp.persist(self.path_for(key)).map_err(|e| e.error)?;
        Ok(())
    }
}
