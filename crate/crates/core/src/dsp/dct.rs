use ndarray::Array2;

use crate::error::{Error, Result};
use crate::Scalar;

/// Orthonormal DCT-II basis, `n_coeffs x n`.
pub fn dct_matrix<T: Scalar>(n_coeffs: usize, n: usize) -> Array2<T> {
    let nf = n as f64;
    Array2::from_shape_fn((n_coeffs, n), |(k, i)| {
        let scale = if k == 0 { (1.0 / nf).sqrt() } else { (2.0 / nf).sqrt() };
        T::lit(scale * (std::f64::consts::PI * k as f64 * (2 * i + 1) as f64 / (2.0 * nf)).cos())
    })
}

/// Orthonormal DCT-II of every row of `values` (frames x bands), truncated
/// to the first `n_coeffs` coefficients.
pub fn dct2<T: Scalar>(values: &Array2<T>, n_coeffs: usize) -> Result<Array2<T>> {
    let n_bands = values.ncols();
    if n_coeffs > n_bands {
        return Err(Error::config(format!(
            "{n_coeffs} cepstral coefficients requested from {n_bands} bands"
        )));
    }
    Ok(values.dot(&dct_matrix::<T>(n_coeffs, n_bands).t()))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// DCT-III written from its definition, the inverse of orthonormal DCT-II.
    fn idct(c: &[f64]) -> Vec<f64> {
        let n = c.len() as f64;
        (0..c.len())
            .map(|i| {
                c.iter()
                    .enumerate()
                    .map(|(k, &v)| {
                        let s = if k == 0 { (1.0 / n).sqrt() } else { (2.0 / n).sqrt() };
                        s * v * (std::f64::consts::PI * k as f64 * (2 * i + 1) as f64 / (2.0 * n)).cos()
                    })
                    .sum()
            })
            .collect()
    }

    #[test]
    fn constant_input_only_dc() {
        let x = Array2::from_elem((1, 16), 3.0f64);
        let c = dct2(&x, 16).unwrap();
        assert!((c[[0, 0]] - 3.0 * 4.0).abs() < 1e-12);
        assert!(c.iter().skip(1).all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn roundtrip_through_inverse() {
        let x: Vec<f64> = (0..40).map(|i| ((i * 37) % 11) as f64 - 5.0).collect();
        let c = dct2(&Array2::from_shape_vec((1, 40), x.clone()).unwrap(), 40).unwrap();
        let back = idct(c.row(0).as_slice().unwrap());
        for (a, b) in x.iter().zip(back.iter()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn basis_is_orthonormal() {
        let d = dct_matrix::<f64>(30, 30);
        let id = d.dot(&d.t());
        for ((i, j), v) in id.indexed_iter() {
            let want = if i == j { 1.0 } else { 0.0 };
            assert!((v - want).abs() < 1e-9);
        }
        let cols = dct2(&Array2::<f64>::eye(30), 30).unwrap();
        for col in cols.columns() {
            let norm: f64 = col.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn too_many_coefficients() {
        assert!(dct2(&Array2::<f32>::zeros((2, 10)), 11).is_err());
        let c = dct2(&Array2::<f32>::ones((2, 10)), 4).unwrap();
        assert_eq!(c.dim(), (2, 4));
    }
}
