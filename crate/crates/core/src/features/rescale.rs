use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::Scalar;

/// Per-dimension max-absolute scaling fitted on the training split.
///
/// Training vectors land in [-1, 1]; other splits are divided by the same
/// constants without clamping.
#[derive(Debug, Clone, PartialEq)]
pub struct Rescaler<T> {
    max_abs: Vec<T>,
}

impl<T: Scalar> Rescaler<T> {
    pub fn fit<'a, I>(vectors: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a [T]>,
    {
        let mut max_abs: Option<Vec<T>> = None;
        for v in vectors {
            match &mut max_abs {
                None => max_abs = Some(v.iter().map(|x| x.abs()).collect()),
                Some(m) => {
                    if m.len() != v.len() {
                        return Err(Error::DimensionMismatch {
                            expected: m.len(),
                            got: v.len(),
                        });
                    }
                    for (acc, x) in m.iter_mut().zip(v) {
                        *acc = acc.max(x.abs());
                    }
                }
            }
        }
        let mut max_abs = max_abs.ok_or_else(|| Error::data("rescaler fit on an empty set"))?;
        for m in max_abs.iter_mut() {
            if *m == T::zero() {
                *m = T::one();
            }
        }
        Ok(Self { max_abs })
    }

    pub fn from_max_abs(max_abs: Vec<T>) -> Result<Self> {
        if max_abs.iter().any(|m| !(*m > T::zero()) || !m.is_finite()) {
            return Err(Error::data("rescaler maxima must be positive and finite"));
        }
        Ok(Self { max_abs })
    }

    pub fn dim(&self) -> usize {
        self.max_abs.len()
    }

    pub fn max_abs(&self) -> &[T] {
        &self.max_abs
    }

    pub fn apply(&self, v: &[T]) -> Result<Vec<T>> {
        if v.len() != self.max_abs.len() {
            return Err(Error::DimensionMismatch {
                expected: self.max_abs.len(),
                got: v.len(),
            });
        }
        Ok(v.iter().zip(&self.max_abs).map(|(&x, &m)| x / m).collect())
    }

    /// Text form: optional `#` comment lines, then one maximum per line.
    pub fn to_text(&self, header: Option<&str>) -> String {
        let mut s = String::new();
        if let Some(h) = header {
            let _ = writeln!(s, "# {h}");
        }
        for m in &self.max_abs {
            let _ = writeln!(s, "{m}");
        }
        s
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let values = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(|l| {
                l.parse::<f64>().map(T::lit).map_err(|e| Error::Format {
                    what: "rescaler",
                    path: path.to_path_buf(),
                    detail: format!("{l:?}: {e}"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_max_abs(values)
    }

    pub fn write(&self, path: &Path, header: Option<&str>) -> Result<()> {
        std::fs::write(path, self.to_text(header)).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }
}
