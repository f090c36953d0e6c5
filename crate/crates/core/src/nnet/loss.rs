use ndarray::{Array2, Array3, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Loss {
    Mse,
    SoftmaxCrossEntropy,
}

/// Training targets for a whole dataset.
#[derive(Debug, Clone, PartialEq)]
pub enum Targets<T> {
    /// One row per sample, matching the flattened network output.
    Values(Array2<T>),
    /// Class index per sample.
    Classes { labels: Vec<usize>, n_classes: usize },
}

impl<T: Scalar> Targets<T> {
    pub fn len(&self) -> usize {
        match self {
            Targets::Values(v) => v.nrows(),
            Targets::Classes { labels, .. } => labels.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn select(&self, idx: &[usize]) -> Self {
        match self {
            Targets::Values(v) => Targets::Values(v.select(Axis(0), idx)),
            Targets::Classes { labels, n_classes } => Targets::Classes {
                labels: idx.iter().map(|&i| labels[i]).collect(),
                n_classes: *n_classes,
            },
        }
    }
}

impl Loss {
    /// Mean loss over the batch and its gradient with respect to `output`.
    pub fn evaluate<T: Scalar>(self, output: &Array3<T>, targets: &Targets<T>) -> Result<(T, Array3<T>)> {
        let (b, len, d) = output.dim();
        if targets.len() != b {
            return Err(Error::DimensionMismatch {
                expected: b,
                got: targets.len(),
            });
        }
        let flat = output.to_shape((b, len * d)).expect("contiguous output");
        match (self, targets) {
            (Loss::Mse, Targets::Values(t)) => {
                if t.ncols() != len * d {
                    return Err(Error::DimensionMismatch {
                        expected: len * d,
                        got: t.ncols(),
                    });
                }
                let n = T::from_usize_lossy(b * len * d);
                let diff = &flat - t;
                let loss = diff.iter().map(|&e| e * e).sum::<T>() / n;
                let grad = diff.mapv(|e| T::lit(2.0) * e / n);
                Ok((loss, grad.into_shape_with_order((b, len, d)).expect("shape")))
            }
            (Loss::SoftmaxCrossEntropy, Targets::Classes { labels, n_classes }) => {
                if len * d != *n_classes {
                    return Err(Error::DimensionMismatch {
                        expected: *n_classes,
                        got: len * d,
                    });
                }
                let bn = T::from_usize_lossy(b);
                let mut grad = Array2::zeros((b, *n_classes));
                let mut loss = T::zero();
                for (i, (row, &y)) in flat.rows().into_iter().zip(labels).enumerate() {
                    if y >= *n_classes {
                        return Err(Error::data(format!("class {y} out of range {n_classes}")));
                    }
                    let m = row.iter().fold(T::neg_infinity(), |a, &v| a.max(v));
                    let exps: Vec<T> = row.iter().map(|&v| (v - m).exp()).collect();
                    let z: T = exps.iter().copied().sum();
                    loss += z.ln() + m - row[y];
                    for (k, e) in exps.iter().enumerate() {
                        grad[[i, k]] = *e / z / bn;
                    }
                    grad[[i, y]] -= T::one() / bn;
                }
                Ok((loss / bn, grad.into_shape_with_order((b, len, d)).expect("shape")))
            }
            _ => Err(Error::config(format!("targets do not fit the {self:?} loss"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mse_hand_case() {
        let out = Array3::from_shape_vec((2, 1, 1), vec![1.0, 3.0]).unwrap();
        let t = Targets::Values(Array2::from_shape_vec((2, 1), vec![0.0, 1.0]).unwrap());
        let (l, g) = Loss::Mse.evaluate(&out, &t).unwrap();
        assert_eq!(l, 2.5);
        assert_eq!(g.iter().copied().collect::<Vec<f64>>(), vec![1.0, 2.0]);
    }

    #[test]
    fn cross_entropy_uniform_logits() {
        let out = Array3::<f64>::zeros((1, 1, 4));
        let t = Targets::Classes {
            labels: vec![2],
            n_classes: 4,
        };
        let (l, g) = Loss::SoftmaxCrossEntropy.evaluate(&out, &t).unwrap();
        assert!((l - 4f64.ln()).abs() < 1e-12);
        assert!((g[[0, 0, 2]] + 0.75).abs() < 1e-12);
        assert!((g.sum()).abs() < 1e-12);
    }

    #[test]
    fn mismatched_targets_rejected() {
        let out = Array3::<f64>::zeros((2, 1, 1));
        let t = Targets::Classes {
            labels: vec![0, 0],
            n_classes: 1,
        };
        assert!(Loss::Mse.evaluate(&out, &t).is_err());
        let t = Targets::Values(Array2::zeros((3, 1)));
        assert!(Loss::Mse.evaluate(&out, &t).is_err());
    }
}
