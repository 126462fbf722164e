//! Binary site file.
//!
//! Layout, all little-endian:
//!
//! ```text
//! bytes 0..8    magic "PWRGRAM1"
//! byte  8       precision: 4 (f32) or 8 (f64)
//! bytes 9..17   site count, u64
//! bytes 17..33  reserved, 16 zero bytes
//! payload       count * 4 scalars per site: x, y, z, w, IEEE little-endian
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::FormatError;
use crate::geom::{Vec3, WeightedSite};
use crate::real::PrecisionMode;

pub const SITE_MAGIC: &[u8; 8] = b"PWRGRAM1";
const HEADER_LEN: usize = 33;

/// A site array plus the precision it was stored at. Values are held as
/// `f64`; an `f32` payload converts losslessly, so a matching-precision
/// round trip is bit-exact.
#[derive(Debug, Clone)]
pub struct SiteFile {
    pub sites: Vec<WeightedSite<f64>>,
    pub stored_precision: PrecisionMode,
}

pub fn read_sites(path: &Path) -> Result<SiteFile, FormatError> {
    let mut r = BufReader::new(File::open(path)?);
    let mut header = [0u8; HEADER_LEN];
    r.read_exact(&mut header)
        .map_err(|_| FormatError::BadMagic {
            expected: SITE_MAGIC,
        })?;
    if &header[0..8] != SITE_MAGIC {
        return Err(FormatError::BadMagic {
            expected: SITE_MAGIC,
        });
    }
    let precision = match header[8] {
        4 => PrecisionMode::Single,
        8 => PrecisionMode::Double,
        other => return Err(FormatError::UnsupportedPrecision(other)),
    };
    let count = u64::from_le_bytes(header[9..17].try_into().unwrap());
    let scalar = precision.byte_width() as u64;
    let expected = count * 4 * scalar;
    let mut payload = Vec::new();
    r.read_to_end(&mut payload)?;
    if payload.len() as u64 != expected {
        return Err(FormatError::TruncatedPayload {
            expected,
            found: payload.len() as u64,
        });
    }

    let mut sites = Vec::with_capacity(count as usize);
    for i in 0..count as usize {
        let vals: [f64; 4] = match precision {
            PrecisionMode::Single => {
                let mut v = [0f64; 4];
                for (k, slot) in v.iter_mut().enumerate() {
                    let off = (i * 4 + k) * 4;
                    *slot = f32::from_le_bytes(payload[off..off + 4].try_into().unwrap()) as f64;
                }
                v
            }
            PrecisionMode::Double => {
                let mut v = [0f64; 4];
                for (k, slot) in v.iter_mut().enumerate() {
                    let off = (i * 4 + k) * 8;
                    *slot = f64::from_le_bytes(payload[off..off + 8].try_into().unwrap());
                }
                v
            }
        };
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(FormatError::NonFiniteValue(i));
        }
        sites.push(WeightedSite::new(
            Vec3::new(vals[0], vals[1], vals[2]),
            vals[3],
            i as u32,
        ));
    }
    Ok(SiteFile {
        sites,
        stored_precision: precision,
    })
}

/// Write sites at the requested precision; single-precision values round to
/// nearest.
pub fn write_sites(
    path: &Path,
    sites: &[WeightedSite<f64>],
    precision: PrecisionMode,
) -> Result<(), FormatError> {
    let mut w = BufWriter::new(File::create(path)?);
    let mut header = [0u8; HEADER_LEN];
    header[0..8].copy_from_slice(SITE_MAGIC);
    header[8] = precision.byte_width();
    header[9..17].copy_from_slice(&(sites.len() as u64).to_le_bytes());
    w.write_all(&header)?;
    for s in sites {
        let vals = [s.position.x, s.position.y, s.position.z, s.weight];
        match precision {
            PrecisionMode::Single => {
                for v in vals {
                    w.write_all(&(v as f32).to_le_bytes())?;
                }
            }
            PrecisionMode::Double => {
                for v in vals {
                    w.write_all(&v.to_le_bytes())?;
                }
            }
        }
    }
    w.flush()?;
    Ok(())
}
