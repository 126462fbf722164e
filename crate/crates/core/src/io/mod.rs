//! Bit-exact file formats: binary site sets, binary CSR adjacency, text mesh
//! export, and JSON run reports. All binary formats are little-endian.

mod csr;
mod obj;
mod sites;
mod stats;

pub use csr::{read_adjacency_csr, write_adjacency_csr, CsrData, CSR_MAGIC};
pub use obj::export_cells_obj;
pub use sites::{read_sites, write_sites, SiteFile, SITE_MAGIC};
pub use stats::{
    write_stats_json, BenchConfigEntry, BenchConfigReport, BenchReport, MismatchReport, RunOutcome,
    RunReport, TimingReport, TraversalReport, SCHEMA_VERSION,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("bad magic: expected {expected:?}")]
    BadMagic { expected: &'static [u8; 8] },
    #[error("unsupported precision byte {0} (expected 4 or 8)")]
    UnsupportedPrecision(u8),
    #[error("payload truncated: expected {expected} bytes, found {found}")]
    TruncatedPayload { expected: u64, found: u64 },
    #[error("non-finite value at site {0}")]
    NonFiniteValue(usize),
    #[error("diagram was built without geometry; rebuild with keep_geometry")]
    MissingGeometry,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
