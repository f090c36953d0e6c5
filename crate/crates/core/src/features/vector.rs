use ndarray::Array2;

use super::extract::FeatureMatrix;
use super::{FeatureKind, EMBEDDING_DIM, TARGET_FRAMES};
use crate::error::{Error, Result};
use crate::Scalar;

/// Flat per-utterance input to the countermeasure.
///
/// Signal coefficients are laid out frame-major (all coefficients of frame 0,
/// then frame 1, ...), optionally followed by a scaled embedding block.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector<T> {
    pub values: Vec<T>,
    pub n_coeffs: usize,
    pub n_frames: usize,
    pub embedding_dim: usize,
}

impl<T: Scalar> FeatureVector<T> {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// A vector made only of an embedding block (no signal features).
    pub fn embedding_only(values: Vec<T>) -> Self {
        Self {
            embedding_dim: values.len(),
            values,
            n_coeffs: 0,
            n_frames: 0,
        }
    }
}

/// Frame-major flattening: `out[m * N + n] = f[n, m]`.
pub fn stack_frames<T: Scalar>(f: &FeatureMatrix<T>) -> Result<FeatureVector<T>> {
    if f.n_frames() != TARGET_FRAMES {
        return Err(Error::DimensionMismatch {
            expected: TARGET_FRAMES,
            got: f.n_frames(),
        });
    }
    Ok(FeatureVector {
        values: f.values.t().iter().copied().collect(),
        n_coeffs: f.n_coeffs(),
        n_frames: f.n_frames(),
        embedding_dim: 0,
    })
}

/// Inverse of [`stack_frames`], ignoring any embedding block.
pub fn unstack_frames<T: Scalar>(v: &FeatureVector<T>, kind: FeatureKind, id: &str) -> Result<FeatureMatrix<T>> {
    let n = v.n_coeffs * v.n_frames;
    if v.values.len() < n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: v.values.len(),
        });
    }
    let by_frame = Array2::from_shape_vec((v.n_frames, v.n_coeffs), v.values[..n].to_vec())
        .map_err(|e| Error::data(e.to_string()))?;
    Ok(FeatureMatrix {
        values: by_frame.reversed_axes().as_standard_layout().to_owned(),
        kind,
        utterance_id: id.to_string(),
    })
}

/// Appends `scale * embedding` to a signal feature vector.
pub fn concat_embedding<T: Scalar>(v: &FeatureVector<T>, embedding: &[T], scale: T) -> Result<FeatureVector<T>> {
    if embedding.len() != EMBEDDING_DIM {
        return Err(Error::DimensionMismatch {
            expected: EMBEDDING_DIM,
            got: embedding.len(),
        });
    }
    if v.embedding_dim != 0 {
        return Err(Error::data("vector already carries an embedding"));
    }
    let mut values = v.values.clone();
    values.extend(embedding.iter().map(|&x| x * scale));
    Ok(FeatureVector {
        values,
        n_coeffs: v.n_coeffs,
        n_frames: v.n_frames,
        embedding_dim: EMBEDDING_DIM,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fm(values: Array2<f64>) -> FeatureMatrix<f64> {
        FeatureMatrix {
            values,
            kind: FeatureKind::Scmc,
            utterance_id: "u".into(),
        }
    }

    #[test]
    fn frame_major_order() {
        // rows are coefficients, columns frames; pad to ten frames
        let mut m = Array2::zeros((2, 10));
        m[[0, 0]] = 1.0; // a
        m[[0, 1]] = 2.0; // b
        m[[1, 0]] = 3.0; // c
        m[[1, 1]] = 4.0; // d
        let v = stack_frames(&fm(m)).unwrap();
        assert_eq!(&v.values[..4], &[1.0, 3.0, 2.0, 4.0]);
    }

    #[test]
    fn scmc_stack_is_400_and_410_with_embedding() {
        let v = stack_frames(&fm(Array2::zeros((40, 10)))).unwrap();
        assert_eq!(v.len(), 400);
        let x = concat_embedding(&v, &[1.0; 10], 0.1).unwrap();
        assert_eq!(x.len(), 410);
        assert!(x.values[400..].iter().all(|&e| e == 0.1));
        let z = concat_embedding(&v, &[1.0; 10], 0.0).unwrap();
        assert!(z.values[400..].iter().all(|&e| e == 0.0));
    }

    #[test]
    fn wrong_shapes_rejected() {
        assert!(stack_frames(&fm(Array2::zeros((40, 9)))).is_err());
        let v = stack_frames(&fm(Array2::zeros((4, 10)))).unwrap();
        assert!(concat_embedding(&v, &[1.0; 9], 0.1).is_err());
        let x = concat_embedding(&v, &[1.0; 10], 0.1).unwrap();
        assert!(concat_embedding(&x, &[1.0; 10], 0.1).is_err());
    }

    proptest! {
        #[test]
        fn stack_unstack_roundtrip(n in 1usize..50, seed in any::<u64>()) {
            let m = Array2::from_shape_fn((n, 10), |(i, j)| ((seed as f64) * 1e-19 + (i * 10 + j) as f64).sin());
            let f = fm(m);
            let v = stack_frames(&f).unwrap();
            prop_assert_eq!(v.len(), n * 10);
            let back = unstack_frames(&v, FeatureKind::Scmc, "u").unwrap();
            prop_assert_eq!(back.values, f.values);
        }
    }
}
