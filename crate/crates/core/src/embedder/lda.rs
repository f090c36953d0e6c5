use std::collections::BTreeMap;
use std::path::Path;

use ndarray::{Array1, Array2, Axis};

use crate::binio::{read_file, ByteReader, ByteWriter};
use crate::error::{Error, Result};
use crate::linalg::{cholesky, invert_lower, symmetric_eigen};

const MAGIC: &[u8] = b"RDLDA001";

/// Within-class scatter ridge, relative to its mean diagonal.
pub const WITHIN_RIDGE: f64 = 1e-4;

/// Linear discriminant projection `y = W^T (x - mean)`.
///
/// Parameters are held at f32 precision so a saved model reloads
/// bit-identically.
#[derive(Debug, Clone, PartialEq)]
pub struct LdaModel {
    pub config_hash: u64,
    pub mean: Array1<f64>,
    /// `(in_dim, out_dim)` projection; columns are discriminant directions.
    pub projection: Array2<f64>,
    /// Generalized eigenvalues of the kept directions, decreasing.
    pub eigenvalues: Vec<f64>,
    /// Projected training mean of each class, sorted by label.
    pub class_means: Vec<(String, Array1<f64>)>,
}

fn round32(x: f64) -> f64 {
    x as f32 as f64
}

impl LdaModel {
    /// Fits `out_dim` discriminant directions (`out_dim < n_classes`,
    /// `out_dim <= in_dim`) on rows of `x`.
    pub fn fit(x: &Array2<f64>, labels: &[String], out_dim: usize) -> Result<Self> {
        let (n, d) = x.dim();
        if labels.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: labels.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::data("non-finite LDA input"));
        }
        let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for (i, l) in labels.iter().enumerate() {
            groups.entry(l.as_str()).or_default().push(i);
        }
        if groups.len() < 2 {
            return Err(Error::data("LDA needs at least two classes"));
        }
        if out_dim == 0 || out_dim >= groups.len() || out_dim > d {
            return Err(Error::config(format!(
                "LDA output dimension {out_dim} must be in 1..{} and at most {d}",
                groups.len()
            )));
        }
        let mean = x.mean_axis(Axis(0)).expect("non-empty");
        let mut sw = Array2::<f64>::zeros((d, d));
        let mut sb = Array2::<f64>::zeros((d, d));
        for idx in groups.values() {
            let xc = x.select(Axis(0), idx);
            let mc = xc.mean_axis(Axis(0)).expect("non-empty class");
            let centered = &xc - &mc;
            sw += &centered.t().dot(&centered);
            let diff = (&mc - &mean).insert_axis(Axis(1));
            sb += &(diff.dot(&diff.t()) * idx.len() as f64);
        }
        sw /= n as f64;
        sb /= n as f64;
        let ridge = WITHIN_RIDGE * sw.diag().sum() / d as f64;
        let ridge = if ridge > 0.0 { ridge } else { WITHIN_RIDGE };
        for i in 0..d {
            sw[[i, i]] += ridge;
        }
        let l = cholesky(&sw)?;
        let li = invert_lower(&l);
        let mut m = li.dot(&sb).dot(&li.t());
        let sym = (&m + &m.t()) * 0.5;
        m.assign(&sym);
        let (vals, vecs) = symmetric_eigen(&m)?;
        let mut w = li.t().dot(&vecs.slice(ndarray::s![.., ..out_dim]));
        for mut col in w.columns_mut() {
            let pivot = col
                .iter()
                .copied()
                .fold(0.0f64, |a, v| if v.abs() > a.abs() { v } else { a });
            if pivot < 0.0 {
                col.mapv_inplace(|v| -v);
            }
        }
        let mut model = LdaModel {
            config_hash: 0,
            mean: mean.mapv(round32),
            projection: w.mapv(round32),
            eigenvalues: vals[..out_dim].iter().map(|&v| round32(v)).collect(),
            class_means: Vec::new(),
        };
        let projected = model.project_rows(x)?;
        model.class_means = groups
            .iter()
            .map(|(l, idx)| {
                let m = projected.select(Axis(0), idx).mean_axis(Axis(0)).expect("non-empty");
                (l.to_string(), m.mapv(round32))
            })
            .collect();
        Ok(model)
    }

    pub fn in_dim(&self) -> usize {
        self.projection.nrows()
    }

    pub fn out_dim(&self) -> usize {
        self.projection.ncols()
    }

    pub fn project(&self, x: &[f64]) -> Result<Array1<f64>> {
        if x.len() != self.in_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.in_dim(),
                got: x.len(),
            });
        }
        let centered = Array1::from_iter(x.iter().zip(&self.mean).map(|(a, m)| a - m));
        Ok(self.projection.t().dot(&centered))
    }

    pub fn project_rows(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.in_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.in_dim(),
                got: x.ncols(),
            });
        }
        Ok((x - &self.mean).dot(&self.projection))
    }

    pub fn class_mean(&self, label: &str) -> Option<&Array1<f64>> {
        self.class_means.iter().find(|(l, _)| l == label).map(|(_, m)| m)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = ByteWriter::new();
        w.bytes(MAGIC);
        w.u64(self.config_hash);
        w.u32(self.in_dim() as u32);
        w.u32(self.out_dim() as u32);
        self.mean.iter().for_each(|&v| w.f32(v as f32));
        self.projection.iter().for_each(|&v| w.f32(v as f32));
        self.eigenvalues.iter().for_each(|&v| w.f32(v as f32));
        w.u32(self.class_means.len() as u32);
        for (label, m) in &self.class_means {
            w.str(label);
            m.iter().for_each(|&v| w.f32(v as f32));
        }
        w.into_inner()
    }

    pub fn from_bytes(buf: &[u8], path: &Path) -> Result<Self> {
        let mut r = ByteReader::new(buf, "LDA model", path);
        r.expect_magic(MAGIC)?;
        let config_hash = r.u64()?;
        let d = r.u32()? as usize;
        let k = r.u32()? as usize;
        if d == 0 || k == 0 || k > d {
            return Err(r.malformed(format!("invalid dimensions {d}x{k}")));
        }
        let to64 = |v: Vec<f32>| v.into_iter().map(f64::from).collect::<Vec<_>>();
        let mean = Array1::from(to64(r.f32s(d)?));
        let projection = Array2::from_shape_vec((d, k), to64(r.f32s(d * k)?)).expect("sized");
        let eigenvalues = to64(r.f32s(k)?);
        let n = r.u32()? as usize;
        let mut class_means = Vec::with_capacity(n.min(1 << 16));
        for _ in 0..n {
            let label = r.str()?;
            class_means.push((label, Array1::from(to64(r.f32s(k)?))));
        }
        r.finish()?;
        Ok(LdaModel {
            config_hash,
            mean,
            projection,
            eigenvalues,
            class_means,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut w = ByteWriter::new();
        w.bytes(&self.to_bytes());
        w.save(path)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_bytes(&read_file(path)?, path)
    }
}
