//! Binary archives of fixed-shape per-utterance matrices.
//!
//! ```text
//! magic[8] ("RDFEAT01" | "RDXVEC01")
//! kind: u32 length + UTF-8
//! rows (N): u32, cols (M'): u32, count: u32
//! config hash: u64
//! count x record:
//!     id: u32 length + UTF-8
//!     label: u32 length + UTF-8           (RDXVEC01 only)
//!     N x M' f32, row-major
//! ```
//! All integers and floats are little-endian.

use std::path::Path;

use crate::binio::{read_file, ByteReader, ByteWriter};
use crate::error::{Error, Result};

const FEATURE_MAGIC: &[u8; 8] = b"RDFEAT01";
const XVECTOR_MAGIC: &[u8; 8] = b"RDXVEC01";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArchiveKind {
    Features,
    XVectors,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArchiveRecord {
    pub id: String,
    /// Joint env+attack label; present in x-vector archives only.
    pub label: Option<String>,
    pub values: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Archive {
    pub archive_kind: ArchiveKind,
    /// Feature kind name (e.g. "scmc") or embedding name.
    pub kind: String,
    pub rows: usize,
    pub cols: usize,
    pub config_hash: u64,
    pub records: Vec<ArchiveRecord>,
}

impl Archive {
    pub fn new(archive_kind: ArchiveKind, kind: &str, rows: usize, cols: usize, config_hash: u64) -> Self {
        Self {
            archive_kind,
            kind: kind.to_string(),
            rows,
            cols,
            config_hash,
            records: Vec::new(),
        }
    }

    pub fn push(&mut self, id: &str, label: Option<&str>, values: Vec<f32>) -> Result<()> {
        if values.len() != self.rows * self.cols {
            return Err(Error::DimensionMismatch {
                expected: self.rows * self.cols,
                got: values.len(),
            });
        }
        if (self.archive_kind == ArchiveKind::XVectors) != label.is_some() {
            return Err(Error::data(
                "x-vector records need a label; feature records must not have one",
            ));
        }
        self.records.push(ArchiveRecord {
            id: id.to_string(),
            label: label.map(str::to_string),
            values,
        });
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<&ArchiveRecord> {
        self.records.iter().find(|r| r.id == id)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = ByteWriter::new();
        w.bytes(match self.archive_kind {
            ArchiveKind::Features => FEATURE_MAGIC,
            ArchiveKind::XVectors => XVECTOR_MAGIC,
        });
        w.str(&self.kind);
        w.u32(self.rows as u32);
        w.u32(self.cols as u32);
        w.u32(self.records.len() as u32);
        w.u64(self.config_hash);
        for r in &self.records {
            w.str(&r.id);
            if let Some(label) = &r.label {
                w.str(label);
            }
            for &v in &r.values {
                w.f32(v);
            }
        }
        w.into_inner()
    }

    pub fn from_bytes(buf: &[u8], path: &Path) -> Result<Self> {
        let mut r = ByteReader::new(buf, "archive", path);
        let magic = r.take(8)?;
        let archive_kind = if magic == FEATURE_MAGIC {
            ArchiveKind::Features
        } else if magic == XVECTOR_MAGIC {
            ArchiveKind::XVectors
        } else {
            return Err(r.malformed("unknown magic"));
        };
        let kind = r.str()?;
        let rows = r.u32()? as usize;
        let cols = r.u32()? as usize;
        let count = r.u32()? as usize;
        let config_hash = r.u64()?;
        let mut records = Vec::with_capacity(count.min(1 << 20));
        for _ in 0..count {
            let id = r.str()?;
            let label = match archive_kind {
                ArchiveKind::XVectors => Some(r.str()?),
                ArchiveKind::Features => None,
            };
            let values = r.f32s(rows * cols)?;
            records.push(ArchiveRecord { id, label, values });
        }
        r.finish()?;
        Ok(Self {
            archive_kind,
            kind,
            rows,
            cols,
            config_hash,
            records,
        })
    }
}

pub fn write_archive(path: &Path, archive: &Archive) -> Result<()> {
    std::fs::write(path, archive.to_bytes()).map_err(|e| Error::io(path, e))
}

pub fn read_archive(path: &Path) -> Result<Archive> {
    Archive::from_bytes(&read_file(path)?, path)
}
