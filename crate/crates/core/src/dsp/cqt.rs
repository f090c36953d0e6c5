use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{frame_count, FrameConfig, Spectrogram, Waveform, WindowKind};
use crate::error::{Error, Result};
use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CqtConfig {
    pub f_min: f64,
    pub f_max: f64,
    pub bins_per_octave: usize,
}

impl Default for CqtConfig {
    fn default() -> Self {
        Self {
            f_min: 15.62,
            f_max: 8000.0,
            bins_per_octave: 12,
        }
    }
}

impl CqtConfig {
    /// Whole octaves between `f_min` and `f_max`.
    pub fn n_octaves(&self) -> usize {
        ((self.f_max / self.f_min).log2() + 1e-9).floor() as usize
    }

    pub fn n_bins(&self) -> usize {
        self.n_octaves() * self.bins_per_octave
    }

    /// Quality factor shared by every bin.
    pub fn q(&self) -> f64 {
        1.0 / (2f64.powf(1.0 / self.bins_per_octave as f64) - 1.0)
    }

    pub fn center(&self, k: usize) -> f64 {
        self.f_min * 2f64.powf(k as f64 / self.bins_per_octave as f64)
    }
}

struct Kernel<T> {
    cos: Vec<T>,
    sin: Vec<T>,
}

/// Constant-Q magnitude spectrum computed bin by bin as a windowed DFT whose
/// window length is `Q * fs / f_k`.
///
/// Frames are centered on the same grid as [`frame_and_window`](super::frame_and_window)
/// with `frame`, so a CQT and an FFT spectrogram of one waveform have equal
/// frame counts. Samples outside the waveform are treated as zero.
pub fn cqt<T: Scalar>(w: &Waveform<T>, cfg: &CqtConfig, frame: &FrameConfig) -> Result<Spectrogram<T>> {
    let sr = w.sample_rate() as f64;
    if !(cfg.f_min > 0.0) {
        return Err(Error::config(format!("CQT f_min must be positive, got {}", cfg.f_min)));
    }
    if cfg.f_max > sr / 2.0 || cfg.f_max <= cfg.f_min {
        return Err(Error::config(format!(
            "CQT f_max {} must lie in ({}, {}]",
            cfg.f_max,
            cfg.f_min,
            sr / 2.0
        )));
    }
    if cfg.bins_per_octave == 0 || cfg.n_octaves() == 0 {
        return Err(Error::config("CQT needs at least one octave and one bin per octave"));
    }
    let flen = frame.len_samples(w.sample_rate());
    let shift = frame.shift_samples(w.sample_rate());
    let n_frames = frame_count(w.len(), flen, shift).ok_or(Error::InsufficientSamples {
        needed: flen,
        got: w.len(),
    })?;

    let q = cfg.q();
    let kernels: Vec<Kernel<T>> = (0..cfg.n_bins())
        .map(|k| {
            let fk = cfg.center(k);
            let len = ((q * sr / fk).round() as usize).max(1);
            let win = WindowKind::Hamming.coefficients::<f64>(len);
            let norm = win.iter().sum::<f64>();
            let mut cos = Vec::with_capacity(len);
            let mut sin = Vec::with_capacity(len);
            for (n, wv) in win.iter().enumerate() {
                let ph = 2.0 * std::f64::consts::PI * fk * (n as f64 - len as f64 / 2.0) / sr;
                cos.push(T::lit(wv * ph.cos() / norm));
                sin.push(T::lit(wv * ph.sin() / norm));
            }
            Kernel { cos, sin }
        })
        .collect();

    let x = w.samples();
    let mut magnitudes = Array2::zeros((n_frames, kernels.len()));
    for m in 0..n_frames {
        let center = (m * shift + flen / 2) as isize;
        for (k, kern) in kernels.iter().enumerate() {
            let len = kern.cos.len() as isize;
            let start = center - len / 2;
            let lo = (-start).max(0) as usize;
            let hi = ((x.len() as isize - start).min(len)).max(0) as usize;
            let (mut re, mut im) = (T::zero(), T::zero());
            for n in lo..hi {
                let s = x[(start + n as isize) as usize];
                re += s * kern.cos[n];
                im += s * kern.sin[n];
            }
            magnitudes[[m, k]] = (re * re + im * im).sqrt();
        }
    }
    Ok(Spectrogram {
        magnitudes,
        bin_freqs: (0..cfg.n_bins()).map(|k| cfg.center(k)).collect(),
        frame_shift: frame.frame_shift,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tone(freq: f64, secs: f64) -> Waveform<f64> {
        let n = (16_000.0 * secs) as usize;
        Waveform::new(
            (0..n)
                .map(|i| (2.0 * std::f64::consts::PI * freq * i as f64 / 16_000.0).sin())
                .collect(),
            16_000,
        )
        .unwrap()
    }

    #[test]
    fn nine_octaves_for_table_range() {
        let cfg = CqtConfig::default();
        assert_eq!(cfg.n_octaves(), 9);
        assert_eq!(cfg.n_bins(), 108);
        assert!(cfg.center(cfg.n_bins() - 1) <= 8000.0);
    }

    #[test]
    fn tone_peaks_near_440() {
        let cfg = CqtConfig::default();
        let spec = cqt(&tone(440.0, 0.5), &cfg, &FrameConfig::default()).unwrap();
        let mid = spec.n_frames() / 2;
        let row = spec.magnitudes.row(mid);
        let argmax = row
            .iter()
            .enumerate()
            .fold((0, -1.0), |a, (i, &v)| if v > a.1 { (i, v) } else { a })
            .0;
        let octave_err = (spec.bin_freqs[argmax] / 440.0).log2().abs();
        assert!(octave_err <= 0.25, "peak at {} Hz", spec.bin_freqs[argmax]);
    }

    #[test]
    fn silence_gives_zeros() {
        let w = Waveform::new(vec![0.0f64; 8000], 16_000).unwrap();
        let spec = cqt(&w, &CqtConfig::default(), &FrameConfig::default()).unwrap();
        assert!(spec.magnitudes.iter().all(|&m| m == 0.0));
        assert_eq!(spec.n_frames(), 48);
    }

    #[test]
    fn rejects_non_positive_f_min() {
        let cfg = CqtConfig {
            f_min: 0.0,
            ..Default::default()
        };
        assert!(cqt(&tone(100.0, 0.1), &cfg, &FrameConfig::default()).is_err());
    }
}
