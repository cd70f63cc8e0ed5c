//! Binary cache of the unperturbed basis (energies and position matrices).
//!
//! Layout, little endian: magic, format version, 32-byte key, n, first_index,
//! truncated, r_min flag/x/k, then energies, nodes, X and X² in row-major order.

use std::io::{Read, Write};
use std::path::Path;

use faer::Mat;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::numerov::{BasisOptions, RMin, UnperturbedBasis};
use crate::units::Scaled;

const MAGIC: &[u8; 8] = b"ATIONBAS";
const VERSION: u32 = 1;

/// Hash of everything the basis depends on.
pub fn basis_key(scaled: &Scaled, opts: &BasisOptions) -> [u8; 32] {
    let payload = serde_json::json!({
        "r": scaled.r,
        "phase": scaled.phase,
        "bohr": scaled.bohr,
        "opts": opts,
    });
    Sha256::digest(payload.to_string().as_bytes()).into()
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn write_basis<W: Write>(mut w: W, key: &[u8; 32], b: &UnperturbedBasis) -> Result<()> {
    let n = b.dim();
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(key)?;
    for v in [n as u64, b.first_index as u64, b.truncated as u64] {
        w.write_all(&v.to_le_bytes())?;
    }
    let (flag, rx, rk) = b.r_min.map_or((0u64, 0.0, 0i64), |r| (1, r.x, r.k));
    w.write_all(&flag.to_le_bytes())?;
    w.write_all(&rx.to_le_bytes())?;
    w.write_all(&rk.to_le_bytes())?;
    for e in &b.energies {
        w.write_all(&e.to_le_bytes())?;
    }
    for i in 0..n {
        w.write_all(&(*b.nodes.get(i).unwrap_or(&0) as u64).to_le_bytes())?;
    }
    for m in [&b.x, &b.x2] {
        for i in 0..n {
            for j in 0..n {
                w.write_all(&m[(i, j)].to_le_bytes())?;
            }
        }
    }
    Ok(())
}

fn take<const N: usize, R: Read>(r: &mut R) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf)?;
    Ok(buf)
}

fn f64_of<R: Read>(r: &mut R) -> Result<f64> {
    Ok(f64::from_le_bytes(take::<8, _>(r)?))
}

fn u64_of<R: Read>(r: &mut R) -> Result<u64> {
    Ok(u64::from_le_bytes(take::<8, _>(r)?))
}

/// Read a cache written by [`write_basis`]; fails when `key` differs.
pub fn read_basis<R: Read>(mut r: R, key: &[u8; 32]) -> Result<UnperturbedBasis> {
    if &take::<8, _>(&mut r)? != MAGIC {
        return Err(Error::Config("not a basis cache file".into()));
    }
    let ver = u32::from_le_bytes(take::<4, _>(&mut r)?);
    if ver != VERSION {
        return Err(Error::Config(format!("basis cache version {ver}, expected {VERSION}")));
    }
    let stored = take::<32, _>(&mut r)?;
    if &stored != key {
        return Err(Error::Config(format!(
            "basis cache was built for different parameters ({} vs {})",
            hex(&stored[..6]),
            hex(&key[..6])
        )));
    }
    let n = u64_of(&mut r)? as usize;
    if n > 1 << 16 {
        return Err(Error::Config(format!("basis cache claims {n} states")));
    }
    let first_index = u64_of(&mut r)? as usize;
    let truncated = u64_of(&mut r)? as usize;
    let flag = u64_of(&mut r)?;
    let rx = f64_of(&mut r)?;
    let rk = i64::from_le_bytes(take::<8, _>(&mut r)?);
    let energies = (0..n).map(|_| f64_of(&mut r)).collect::<Result<Vec<_>>>()?;
    let nodes = (0..n).map(|_| u64_of(&mut r).map(|v| v as usize)).collect::<Result<Vec<_>>>()?;
    let mut mats = Vec::with_capacity(2);
    for _ in 0..2 {
        let mut m = Mat::<f64>::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = f64_of(&mut r)?;
            }
        }
        mats.push(m);
    }
    let x2 = mats.pop().unwrap();
    let x = mats.pop().unwrap();
    Ok(UnperturbedBasis {
        energies,
        first_index,
        nodes,
        states: Vec::new(),
        grid: None,
        x,
        x2,
        r_min: (flag == 1).then_some(RMin { x: rx, k: rk }),
        truncated,
        warnings: Vec::new(),
    })
}

pub fn save(path: &Path, key: &[u8; 32], b: &UnperturbedBasis) -> Result<()> {
    let f = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(f);
    write_basis(&mut w, key, b)?;
    w.flush()?;
    Ok(())
}

pub fn load(path: &Path, key: &[u8; 32]) -> Result<UnperturbedBasis> {
    let f = std::fs::File::open(path)?;
    read_basis(std::io::BufReader::new(f), key)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let b = UnperturbedBasis::harmonic_analytic(5);
        let key = [7u8; 32];
        let mut buf = Vec::new();
        write_basis(&mut buf, &key, &b).unwrap();
        let c = read_basis(buf.as_slice(), &key).unwrap();
        assert_eq!(c.energies, b.energies);
        assert_eq!(c.nodes, b.nodes);
        assert_eq!(c.x, b.x);
        assert_eq!(c.x2, b.x2);
        assert!(read_basis(buf.as_slice(), &[0u8; 32]).is_err());
        assert!(read_basis(&buf[..20], &key).is_err());
    }
}
