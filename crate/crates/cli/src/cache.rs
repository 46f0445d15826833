//! On-disk spectrum cache.
//!
//! Layout, all little-endian: the 8-byte magic `QSKYSPEC`, a version byte,
//! the dimension and the number of eigenpairs as `u64`, the eigenvalues as
//! `f64`, the eigenvectors column by column as `(re, im)` pairs of `f64`,
//! and finally a `u64` checksum (the first 8 bytes of the SHA-256 of
//! everything before it). Entries are written once through a temporary file
//! and never rewritten.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};

use ndarray::Array2;
use num_complex::Complex64;
use sha2::{Digest, Sha256};

use qsky_core::{Boundary, EigenSystem, SolveMode};

pub const MAGIC: &[u8; 8] = b"QSKYSPEC";
pub const FORMAT_VERSION: u8 = 1;
/// Environment variable that overrides the cache directory.
pub const CACHE_DIR_ENV: &str = "QSKY_CACHE_DIR";

const HEADER_LEN: usize = 8 + 1 + 8 + 8;

/// Physics inputs that determine a spectrum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumKey {
    pub n: usize,
    pub boundary: Boundary,
    pub classical_spin_length: f64,
    pub j: f64,
    pub delta: f64,
    pub dmi: f64,
    pub mode: SolveMode,
}

/// Stable hex digest of the key. Floats enter through their bit patterns, so
/// any change in value gives a different key.
pub fn cache_key(key: &SpectrumKey) -> String {
    let mut h = Sha256::new();
    h.update(b"qsky-spectrum-v1");
    h.update((key.n as u64).to_le_bytes());
    h.update([match key.boundary {
        Boundary::None => 0u8,
        Boundary::ClassicalFerromagneticUp => 1u8,
    }]);
    for x in [key.classical_spin_length, key.j, key.delta, key.dmi] {
        h.update(x.to_bits().to_le_bytes());
    }
    match key.mode {
        SolveMode::Full => h.update([0u8]),
        SolveMode::LowestK(k) => {
            h.update([1u8]);
            h.update((k as u64).to_le_bytes());
        }
    }
    hex::encode(h.finalize())
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum DecodeError {
    #[error("truncated cache entry")]
    Truncated,
    #[error("bad magic")]
    Magic,
    #[error("unsupported format version {0}")]
    Version(u8),
    #[error("checksum mismatch")]
    Checksum,
    #[error("inconsistent sizes")]
    Size,
}

fn checksum(bytes: &[u8]) -> u64 {
    let digest = Sha256::digest(bytes);
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

pub fn encode(system: &EigenSystem) -> Vec<u8> {
    let dim = system.eigenvectors.nrows();
    let count = system.eigenvalues.len();
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * count + 16 * dim * count + 8);
    out.extend_from_slice(MAGIC);
    out.push(FORMAT_VERSION);
    out.extend_from_slice(&(dim as u64).to_le_bytes());
    out.extend_from_slice(&(count as u64).to_le_bytes());
    for e in &system.eigenvalues {
        out.extend_from_slice(&e.to_le_bytes());
    }
    for col in system.eigenvectors.columns() {
        for z in col {
            out.extend_from_slice(&z.re.to_le_bytes());
            out.extend_from_slice(&z.im.to_le_bytes());
        }
    }
    let sum = checksum(&out);
    out.extend_from_slice(&sum.to_le_bytes());
    out
}

pub fn decode(bytes: &[u8]) -> Result<EigenSystem, DecodeError> {
    if bytes.len() < HEADER_LEN + 8 {
        return Err(DecodeError::Truncated);
    }
    if &bytes[..8] != MAGIC {
        return Err(DecodeError::Magic);
    }
    if bytes[8] != FORMAT_VERSION {
        return Err(DecodeError::Version(bytes[8]));
    }
    let (body, tail) = bytes.split_at(bytes.len() - 8);
    if checksum(body) != u64::from_le_bytes(tail.try_into().expect("8 bytes")) {
        return Err(DecodeError::Checksum);
    }
    let read_u64 = |at: usize| u64::from_le_bytes(body[at..at + 8].try_into().expect("8 bytes"));
    let dim = usize::try_from(read_u64(9)).map_err(|_| DecodeError::Size)?;
    let count = usize::try_from(read_u64(17)).map_err(|_| DecodeError::Size)?;
    let expected = dim
        .checked_mul(count)
        .and_then(|dc| dc.checked_mul(16))
        .and_then(|v| v.checked_add(8 * count + HEADER_LEN))
        .ok_or(DecodeError::Size)?;
    if body.len() != expected {
        return Err(DecodeError::Size);
    }
    let mut floats = body[HEADER_LEN..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")));
    let eigenvalues: Vec<f64> = floats.by_ref().take(count).collect();
    let mut eigenvectors = Array2::zeros((dim, count));
    for c in 0..count {
        for r in 0..dim {
            let re = floats.next().ok_or(DecodeError::Size)?;
            let im = floats.next().ok_or(DecodeError::Size)?;
            eigenvectors[[r, c]] = Complex64::new(re, im);
        }
    }
    Ok(EigenSystem {
        eigenvalues,
        eigenvectors,
    })
}

/// Cache directory from the environment, falling back to the user cache.
pub fn default_cache_dir() -> PathBuf {
    if let Some(dir) = std::env::var_os(CACHE_DIR_ENV) {
        return PathBuf::from(dir);
    }
    if let Some(dir) = std::env::var_os("XDG_CACHE_HOME") {
        return PathBuf::from(dir).join("qsky");
    }
    if let Some(home) = std::env::var_os("HOME") {
        return PathBuf::from(home).join(".cache").join("qsky");
    }
    std::env::temp_dir().join("qsky-cache")
}

/// Thread-safe spectrum store with hit and computation counters.
#[derive(Debug, Default)]
pub struct SpectrumCache {
    dir: Option<PathBuf>,
    hits: AtomicUsize,
    computed: AtomicUsize,
    corrupt: AtomicUsize,
}

impl SpectrumCache {
    /// `None` disables persistence; every request is computed.
    pub fn new(dir: Option<PathBuf>) -> Self {
        SpectrumCache {
            dir,
            ..Default::default()
        }
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    pub fn hits(&self) -> usize {
        self.hits.load(Ordering::Relaxed)
    }

    pub fn computed(&self) -> usize {
        self.computed.load(Ordering::Relaxed)
    }

    /// Entries that failed to decode and were recomputed.
    pub fn corrupt(&self) -> usize {
        self.corrupt.load(Ordering::Relaxed)
    }

    fn path_for(&self, key: &str) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join(format!("{key}.qspec")))
    }

    pub fn get_or_compute<E>(
        &self,
        key: &SpectrumKey,
        compute: impl FnOnce() -> Result<EigenSystem, E>,
    ) -> Result<EigenSystem, E> {
        let path = self.path_for(&cache_key(key));
        if let Some(path) = &path {
            if let Ok(bytes) = std::fs::read(path) {
                match decode(&bytes) {
                    Ok(system) => {
                        self.hits.fetch_add(1, Ordering::Relaxed);
                        return Ok(system);
                    }
                    Err(_) => {
                        self.corrupt.fetch_add(1, Ordering::Relaxed);
                    }
                }
            }
        }
        let system = compute()?;
        self.computed.fetch_add(1, Ordering::Relaxed);
        if let Some(path) = &path {
            // a failed write only costs a recomputation next time
            let _ = write_once(path, &encode(&system));
        }
        Ok(system)
    }
}

/// Writes `bytes` to `path` unless it already exists. Concurrent writers of
/// the same key race on the final rename; the loser's file is dropped.
fn write_once(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist_noclobber(path).map_err(|e| e.error)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn key(dmi: f64) -> SpectrumKey {
        SpectrumKey {
            n: 3,
            boundary: Boundary::ClassicalFerromagneticUp,
            classical_spin_length: 0.5,
            j: 1.0,
            delta: 0.25,
            dmi,
            mode: SolveMode::Full,
        }
    }

    fn sample() -> EigenSystem {
        EigenSystem {
            eigenvalues: vec![-1.0, 0.5, 2.25],
            eigenvectors: Array2::from_shape_fn((4, 3), |(r, c)| Complex64::new(r as f64 - c as f64, 0.1 * r as f64)),
        }
    }

    #[test]
    fn keys_are_stable_and_sensitive() {
        assert_eq!(cache_key(&key(0.4)), cache_key(&key(0.4)));
        assert_ne!(cache_key(&key(0.4)), cache_key(&key(0.4000001)));
        let mut lowest = key(0.4);
        lowest.mode = SolveMode::LowestK(8);
        assert_ne!(cache_key(&key(0.4)), cache_key(&lowest));
    }

    #[test]
    fn round_trip_is_exact() {
        let s = sample();
        let bytes = encode(&s);
        assert_eq!(&bytes[..8], MAGIC);
        assert_eq!(decode(&bytes).unwrap(), s);
    }

    #[test]
    fn corruption_is_detected() {
        let mut bytes = encode(&sample());
        bytes[40] ^= 1;
        assert_eq!(decode(&bytes), Err(DecodeError::Checksum));
        assert_eq!(decode(&bytes[..10]), Err(DecodeError::Truncated));
        let mut wrong = encode(&sample());
        wrong[0] = b'X';
        assert_eq!(decode(&wrong), Err(DecodeError::Magic));
    }

    #[test]
    fn second_lookup_is_a_hit_and_never_rewrites() {
        let dir = tempfile::tempdir().unwrap();
        let cache = SpectrumCache::new(Some(dir.path().to_path_buf()));
        let a = cache.get_or_compute(&key(0.4), || Ok::<_, ()>(sample())).unwrap();
        let path = dir.path().join(format!("{}.qspec", cache_key(&key(0.4))));
        let written = std::fs::metadata(&path).unwrap().modified().unwrap();
        let b = cache
            .get_or_compute(&key(0.4), || -> Result<EigenSystem, ()> { panic!("recomputed") })
            .unwrap();
        assert_eq!(a, b);
        assert_eq!((cache.computed(), cache.hits()), (1, 1));
        assert_eq!(std::fs::metadata(&path).unwrap().modified().unwrap(), written);
    }
}
