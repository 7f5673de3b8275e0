//! Binary cache for near-field weight tables.
//!
//! Layout (little-endian): magic, key `(N, s bits, h bits, radius, depth)`,
//! entry count, then `(d0, d1, d2, value bits)` per entry.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use super::KernelParams;
use crate::error::{Error, Result};
use crate::lattice::Coord;

const MAGIC: &[u8; 8] = b"FPKWTAB2";

fn key(params: &KernelParams) -> [u64; 5] {
    [
        params.dim as u64,
        params.s.to_bits(),
        params.h.to_bits(),
        params.near_field_radius as u64,
        params.subdivision_depth as u64,
    ]
}

fn path(dir: &Path, params: &KernelParams) -> PathBuf {
    let k = key(params);
    dir.join(format!("kernel-{}-{:016x}-{:016x}-{}-{}.bin", k[0], k[1], k[2], k[3], k[4]))
}

pub(super) fn load(dir: &Path, params: &KernelParams) -> Result<Option<BTreeMap<Coord, f64>>> {
    let file = path(dir, params);
    let bytes = match fs::read(&file) {
        Ok(b) => b,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
        Err(e) => return Err(e.into()),
    };
    let bad = || Error::Parse(format!("corrupt kernel cache {}", file.display()));
    let mut words = bytes
        .get(MAGIC.len()..)
        .filter(|_| bytes.starts_with(MAGIC))
        .ok_or_else(bad)?
        .chunks_exact(8)
        .map(|c| u64::from_le_bytes(c.try_into().unwrap()));
    let mut next = || words.next().ok_or_else(bad);
    for expected in key(params) {
        if next()? != expected {
            return Err(bad());
        }
    }
    let count = next()?;
    let mut near = BTreeMap::new();
    for _ in 0..count {
        let d = [next()? as i64, next()? as i64, next()? as i64];
        near.insert(d, f64::from_bits(next()?));
    }
    Ok(Some(near))
}

pub(super) fn store(dir: &Path, params: &KernelParams, near: &BTreeMap<Coord, f64>) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut out = MAGIC.to_vec();
    let mut push = |w: u64| out.extend_from_slice(&w.to_le_bytes());
    for w in key(params) {
        push(w);
    }
    push(near.len() as u64);
    for (d, v) in near {
        push(d[0] as u64);
        push(d[1] as u64);
        push(d[2] as u64);
        push(v.to_bits());
    }
    fs::write(path(dir, params), out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::super::KernelTable;
    use super::*;
    use crate::lattice::Lattice;

    #[test]
    fn cache_hit_is_bit_identical() {
        let dir = tempfile::tempdir().unwrap();
        let lat = Lattice::cube(2, 0.125, 8, 0.0).unwrap();
        let p = KernelParams::for_lattice(&lat, 0.35).unwrap();
        let fresh = KernelTable::new(p.clone(), &lat).unwrap();
        let first = KernelTable::with_cache(p.clone(), &lat, dir.path()).unwrap();
        let second = KernelTable::with_cache(p.clone(), &lat, dir.path()).unwrap();
        assert!(path(dir.path(), &p).exists());
        for (d, w) in fresh.near_weights() {
            assert_eq!(w.to_bits(), first.near_weights()[d].to_bits());
            assert_eq!(w.to_bits(), second.near_weights()[d].to_bits());
        }
    }

    #[test]
    fn corrupt_cache_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let p = KernelParams::new(1, 0.5, 1.0, 10.0).unwrap();
        fs::write(path(dir.path(), &p), b"garbage").unwrap();
        assert!(load(dir.path(), &p).is_err());
    }
}
