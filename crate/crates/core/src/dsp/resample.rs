use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::Scalar;

/// Fourier-method resampling of a uniformly sampled real sequence to `num`
/// points: the spectrum is truncated or zero-padded and inverse
/// transformed, so sample spacing becomes `len / num` times the original.
///
/// The DC bin is carried over unchanged, which keeps the sequence mean.
/// When the retained band edge is an even-length Nyquist bin it is doubled
/// on the way down and split on the way up.
pub fn fft_resample<T: Scalar>(x: &[T], num: usize) -> Result<Vec<T>> {
    let m = x.len();
    if num == 0 {
        return Err(Error::config("resample target must be at least 1 point"));
    }
    if m == 0 {
        return Err(Error::data("cannot resample an empty sequence"));
    }
    if m == num {
        return Ok(x.to_vec());
    }
    let zero = Complex::new(T::zero(), T::zero());
    let mut planner = FftPlanner::<T>::new();

    let mut spec: Vec<Complex<T>> = x.iter().map(|&v| Complex::new(v, T::zero())).collect();
    planner.plan_fft_forward(m).process(&mut spec);

    let n = num.min(m);
    let keep = n / 2 + 1;
    let mut half = vec![zero; num / 2 + 1];
    half[..keep].copy_from_slice(&spec[..keep]);
    if n % 2 == 0 {
        let edge = n / 2;
        if num < m {
            half[edge] = half[edge] * T::lit(2.0);
        } else {
            half[edge] = half[edge] * T::lit(0.5);
        }
    }

    // Hermitian extension to the full length-`num` spectrum.
    let mut full = vec![zero; num];
    full[0] = Complex::new(half[0].re, T::zero());
    for k in 1..half.len() {
        if num % 2 == 0 && k == num / 2 {
            full[k] = Complex::new(half[k].re, T::zero());
        } else {
            full[k] = half[k];
            full[num - k] = half[k].conj();
        }
    }
    planner.plan_fft_inverse(num).process(&mut full);
    let scale = T::one() / T::from_usize_lossy(m);
    Ok(full.iter().map(|c| c.re * scale).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mean(x: &[f64]) -> f64 {
        x.iter().sum::<f64>() / x.len() as f64
    }

    #[test]
    fn identity_when_lengths_match() {
        let x = vec![1.0, -2.0, 3.5];
        assert_eq!(fft_resample(&x, 3).unwrap(), x);
    }

    #[test]
    fn constant_stays_constant() {
        for m in [1usize, 2, 7, 98, 333] {
            let y = fft_resample(&vec![0.75f64; m], 10).unwrap();
            assert!(y.iter().all(|v| (v - 0.75).abs() < 1e-12), "m={m}");
        }
    }

    #[test]
    fn mean_preserved_down_and_up() {
        let x: Vec<f64> = (0..98).map(|i| ((i * 7) % 13) as f64 * 0.3 - 1.0).collect();
        for num in [1, 2, 5, 10, 11, 200] {
            let y = fft_resample(&x, num).unwrap();
            assert_eq!(y.len(), num);
            assert!((mean(&y) - mean(&x)).abs() < 1e-12);
        }
    }

    #[test]
    fn band_limited_cosine_survives() {
        // two cycles over the sequence, well below the new Nyquist
        let m = 100;
        let x: Vec<f64> = (0..m)
            .map(|i| (2.0 * std::f64::consts::PI * 2.0 * i as f64 / m as f64).cos())
            .collect();
        let y = fft_resample(&x, 10).unwrap();
        for (i, v) in y.iter().enumerate() {
            let want = (2.0 * std::f64::consts::PI * 2.0 * i as f64 / 10.0).cos();
            assert!((v - want).abs() < 1e-9);
        }
    }

    #[test]
    fn matches_scipy_reference_values() {
        // values from scipy.signal.resample
        let cases: [(&[f64], usize, &[f64]); 3] = [
            (&[0.0, 1.0, 2.0, 3.0, 4.0, 5.0], 4, &[0.5, 1.76794919, 2.5, 5.23205081]),
            (
                &[0.0, 1.0, 2.0, 3.0, 4.0],
                8,
                &[
                    0.0,
                    -0.00527547,
                    1.62361808,
                    2.05877749,
                    2.0,
                    3.35543607,
                    4.37638192,
                    2.5910619,
                ],
            ),
            (&[0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0], 3, &[2.0, 1.70167972, 5.29832028]),
        ];
        for (x, num, want) in cases {
            let y = fft_resample(x, num).unwrap();
            for (a, b) in y.iter().zip(want.iter()) {
                assert!((a - b).abs() < 1e-7, "{y:?} vs {want:?}");
            }
        }
    }
}
