//! Binary CSR adjacency file.
//!
//! Layout, all little-endian:
//!
//! ```text
//! bytes 0..8   magic "PWRCSR01"
//! bytes 8..16  site count n, u64
//! next         (n + 1) row offsets, u64 each
//! next         offsets[n] neighbor ids, u32 each, ascending within a row
//! next         n flag bytes: bit 0 empty, bit 1 boundary, bit 2 degraded
//! ```
//!
//! The encoding is canonical: two diagrams with equal adjacency and flags
//! produce byte-identical files.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::FormatError;
use crate::builder::PowerDiagram;

pub const CSR_MAGIC: &[u8; 8] = b"PWRCSR01";

/// Adjacency data read back from a CSR file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsrData {
    pub site_count: usize,
    pub offsets: Vec<u64>,
    pub neighbors: Vec<u32>,
    pub flags: Vec<u8>,
}

impl CsrData {
    pub fn neighbors_of(&self, i: usize) -> &[u32] {
        &self.neighbors[self.offsets[i] as usize..self.offsets[i + 1] as usize]
    }
}

pub fn write_adjacency_csr(path: &Path, diagram: &PowerDiagram) -> Result<(), FormatError> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(CSR_MAGIC)?;
    w.write_all(&(diagram.site_count as u64).to_le_bytes())?;
    for &o in &diagram.offsets {
        w.write_all(&o.to_le_bytes())?;
    }
    for &nb in &diagram.neighbors {
        w.write_all(&nb.to_le_bytes())?;
    }
    w.write_all(&diagram.flags)?;
    w.flush()?;
    Ok(())
}

pub fn read_adjacency_csr(path: &Path) -> Result<CsrData, FormatError> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)
        .map_err(|_| FormatError::BadMagic {
            expected: CSR_MAGIC,
        })?;
    if &magic != CSR_MAGIC {
        return Err(FormatError::BadMagic {
            expected: CSR_MAGIC,
        });
    }
    let mut buf8 = [0u8; 8];
    r.read_exact(&mut buf8)?;
    let n = u64::from_le_bytes(buf8) as usize;

    let mut rest = Vec::new();
    r.read_to_end(&mut rest)?;
    let offsets_bytes = (n + 1) * 8;
    if rest.len() < offsets_bytes {
        return Err(FormatError::TruncatedPayload {
            expected: offsets_bytes as u64,
            found: rest.len() as u64,
        });
    }
    let mut offsets = Vec::with_capacity(n + 1);
    for i in 0..=n {
        offsets.push(u64::from_le_bytes(
            rest[i * 8..i * 8 + 8].try_into().unwrap(),
        ));
    }
    let m = offsets[n] as usize;
    let expected = offsets_bytes + m * 4 + n;
    if rest.len() != expected {
        return Err(FormatError::TruncatedPayload {
            expected: expected as u64,
            found: rest.len() as u64,
        });
    }
    let mut neighbors = Vec::with_capacity(m);
    let base = offsets_bytes;
    for i in 0..m {
        neighbors.push(u32::from_le_bytes(
            rest[base + i * 4..base + i * 4 + 4].try_into().unwrap(),
        ));
    }
    let flags = rest[base + m * 4..].to_vec();
    Ok(CsrData {
        site_count: n,
        offsets,
        neighbors,
        flags,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builder::{build_diagram, BuildConfig};
    use crate::geom::{Vec3, WeightedSite};

    fn two_site_diagram() -> PowerDiagram {
        let sites = vec![
            WeightedSite::new(Vec3::new(0.0, 0.0, 0.0), 0.0, 0),
            WeightedSite::new(Vec3::new(1.0, 0.0, 0.0), 0.0, 1),
        ];
        build_diagram(&sites, &BuildConfig::default()).unwrap()
    }

    #[test]
    fn two_site_layout() {
        let d = two_site_diagram();
        assert_eq!(d.offsets, vec![0, 1, 2]);
        assert_eq!(d.neighbors, vec![1, 0]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("adj.csr");
        write_adjacency_csr(&path, &d).unwrap();
        let back = read_adjacency_csr(&path).unwrap();
        assert_eq!(back.site_count, 2);
        assert_eq!(back.offsets, d.offsets);
        assert_eq!(back.neighbors, d.neighbors);
        assert_eq!(back.flags, d.flags);
    }

    #[test]
    fn canonical_bytes_across_builds() {
        let d1 = two_site_diagram();
        let d2 = two_site_diagram();
        let dir = tempfile::tempdir().unwrap();
        let p1 = dir.path().join("a.csr");
        let p2 = dir.path().join("b.csr");
        write_adjacency_csr(&p1, &d1).unwrap();
        write_adjacency_csr(&p2, &d2).unwrap();
        assert_eq!(std::fs::read(p1).unwrap(), std::fs::read(p2).unwrap());
    }

    #[test]
    fn empty_row_keeps_flag() {
        // Duplicate pair: the loser has an empty row and the empty flag.
        let sites = vec![
            WeightedSite::new(Vec3::new(0.0, 0.0, 0.0), 0.0, 0),
            WeightedSite::new(Vec3::new(0.0, 0.0, 0.0), 0.0, 1),
            WeightedSite::new(Vec3::new(2.0, 0.0, 0.0), 0.0, 2),
        ];
        let d = build_diagram(&sites, &BuildConfig::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("dup.csr");
        write_adjacency_csr(&path, &d).unwrap();
        let back = read_adjacency_csr(&path).unwrap();
        assert_eq!(back.neighbors_of(1), &[] as &[u32]);
        assert_eq!(back.flags[1] & 1, 1);
    }
}
