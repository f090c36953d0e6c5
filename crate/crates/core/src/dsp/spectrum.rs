use ndarray::Array2;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::Scalar;

/// Magnitude spectrogram (frames x bins).
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram<T> {
    pub magnitudes: Array2<T>,
    /// Center frequency of each bin in Hz.
    pub bin_freqs: Vec<f64>,
    /// Seconds between consecutive frames.
    pub frame_shift: f64,
}

impl<T: Scalar> Spectrogram<T> {
    pub fn n_frames(&self) -> usize {
        self.magnitudes.nrows()
    }

    pub fn n_bins(&self) -> usize {
        self.magnitudes.ncols()
    }

    /// Squared magnitudes.
    pub fn power(&self) -> Array2<T> {
        self.magnitudes.mapv(|m| m * m)
    }
}

/// Magnitude of the real FFT of every frame, zero-padded to `fft_size`.
///
/// Returns `fft_size / 2 + 1` bins per frame spanning 0 to Nyquist.
pub fn power_spectrum<T: Scalar>(
    frames: &Array2<T>,
    fft_size: usize,
    sample_rate: u32,
    frame_shift: f64,
) -> Result<Spectrogram<T>> {
    let (n_frames, flen) = frames.dim();
    if n_frames == 0 || flen == 0 {
        return Err(Error::data("power spectrum of an empty frame matrix"));
    }
    if fft_size < flen || fft_size < 2 {
        return Err(Error::config(format!(
            "fft size {fft_size} smaller than frame length {flen}"
        )));
    }
    let n_bins = fft_size / 2 + 1;
    let fft = FftPlanner::<T>::new().plan_fft_forward(fft_size);
    let mut buf = vec![Complex::new(T::zero(), T::zero()); fft_size];
    let mut scratch = vec![Complex::new(T::zero(), T::zero()); fft.get_inplace_scratch_len()];
    let mut magnitudes = Array2::zeros((n_frames, n_bins));
    for (frame, mut out) in frames.rows().into_iter().zip(magnitudes.rows_mut()) {
        for (slot, &x) in buf.iter_mut().zip(frame.iter()) {
            *slot = Complex::new(x, T::zero());
        }
        for slot in buf.iter_mut().skip(flen) {
            *slot = Complex::new(T::zero(), T::zero());
        }
        fft.process_with_scratch(&mut buf, &mut scratch);
        for (o, c) in out.iter_mut().zip(buf.iter()) {
            *o = c.norm();
        }
    }
    let bin_freqs = (0..n_bins)
        .map(|k| k as f64 * sample_rate as f64 / fft_size as f64)
        .collect();
    Ok(Spectrogram {
        magnitudes,
        bin_freqs,
        frame_shift,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::{frame_and_window, FrameConfig, Waveform};
    use proptest::prelude::*;

    fn dft_magnitudes(x: &[f64], n: usize) -> Vec<f64> {
        (0..n / 2 + 1)
            .map(|k| {
                let (mut re, mut im) = (0.0, 0.0);
                for (t, &v) in x.iter().enumerate() {
                    let ph = -2.0 * std::f64::consts::PI * (k * t) as f64 / n as f64;
                    re += v * ph.cos();
                    im += v * ph.sin();
                }
                (re * re + im * im).sqrt()
            })
            .collect()
    }

    #[test]
    fn sine_peak_at_1khz() {
        let sr = 16_000;
        let x: Vec<f64> = (0..sr)
            .map(|n| (2.0 * std::f64::consts::PI * 1000.0 * n as f64 / sr as f64).sin())
            .collect();
        let w = Waveform::new(x, sr as u32).unwrap();
        let cfg = FrameConfig::default();
        let frames = frame_and_window(&w, &cfg).unwrap();
        let spec = power_spectrum(&frames, 512, 16_000, 0.01).unwrap();
        let bin_width = 16_000.0 / 512.0;
        for row in spec.magnitudes.rows() {
            let (argmax, _) = row
                .iter()
                .enumerate()
                .fold((0, -1.0), |a, (i, &v)| if v > a.1 { (i, v) } else { a });
            assert!((spec.bin_freqs[argmax] - 1000.0).abs() <= bin_width);
        }
    }

    #[test]
    fn zero_frame_zero_spectrum() {
        let frames = Array2::<f64>::zeros((2, 64));
        let spec = power_spectrum(&frames, 64, 16_000, 0.01).unwrap();
        assert!(spec.magnitudes.iter().all(|&m| m == 0.0));
        assert_eq!(spec.n_bins(), 33);
    }

    #[test]
    fn parseval_holds() {
        let x: Vec<f64> = (0..400).map(|i| ((i * 7919) % 97) as f64 / 97.0 - 0.5).collect();
        let frames = Array2::from_shape_vec((1, 400), x.clone()).unwrap();
        let n = 512;
        let spec = power_spectrum(&frames, n, 16_000, 0.01).unwrap();
        let m = spec.magnitudes.row(0);
        let mut total = m[0] * m[0] + m[n / 2] * m[n / 2];
        for k in 1..n / 2 {
            total += 2.0 * m[k] * m[k];
        }
        total /= n as f64;
        let direct: f64 = x.iter().map(|v| v * v).sum();
        assert!(((total - direct) / direct).abs() < 1e-6);
    }

    #[test]
    fn bins_increase_to_nyquist() {
        let frames = Array2::<f32>::ones((1, 400));
        let spec = power_spectrum(&frames, 512, 16_000, 0.01).unwrap();
        assert_eq!(spec.bin_freqs[0], 0.0);
        assert_eq!(*spec.bin_freqs.last().unwrap(), 8000.0);
        assert!(spec.bin_freqs.windows(2).all(|p| p[1] > p[0]));
    }

    proptest! {
        #[test]
        fn matches_direct_dft(x in proptest::collection::vec(-1.0f64..1.0, 64)) {
            let frames = Array2::from_shape_vec((1, 64), x.clone()).unwrap();
            let spec = power_spectrum(&frames, 64, 16_000, 0.01).unwrap();
            let direct = dft_magnitudes(&x, 64);
            let scale = direct.iter().cloned().fold(1e-12, f64::max);
            for (a, b) in spec.magnitudes.row(0).iter().zip(direct.iter()) {
                prop_assert!((a - b).abs() <= 1e-6 * scale.max(b.abs()));
            }
        }
    }
}
