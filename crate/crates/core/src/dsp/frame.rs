use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Scalar;

/// Mono audio with amplitudes nominally in [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform<T> {
    samples: Vec<T>,
    sample_rate: u32,
}

impl<T: Scalar> Waveform<T> {
    pub fn new(samples: Vec<T>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::config("sample rate must be positive"));
        }
        if let Some(i) = samples.iter().position(|s| !s.is_finite()) {
            return Err(Error::data(format!("non-finite sample at index {i}")));
        }
        Ok(Self { samples, sample_rate })
    }

    pub fn samples(&self) -> &[T] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<T> {
        self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    pub fn peak(&self) -> T {
        self.samples.iter().fold(T::zero(), |acc, s| acc.max(s.abs()))
    }

    /// Converts to another scalar type.
    pub fn cast<U: Scalar>(&self) -> Waveform<U> {
        Waveform {
            samples: self.samples.iter().map(|s| U::lit(s.as_f64())).collect(),
            sample_rate: self.sample_rate,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum WindowKind {
    #[default]
    Hamming,
    Hann,
    Rectangular,
}

impl WindowKind {
    pub fn coefficients<T: Scalar>(self, len: usize) -> Vec<T> {
        if len == 1 {
            return vec![T::one()];
        }
        let denom = (len - 1) as f64;
        (0..len)
            .map(|n| {
                let phase = 2.0 * std::f64::consts::PI * n as f64 / denom;
                T::lit(match self {
                    WindowKind::Hamming => 0.54 - 0.46 * phase.cos(),
                    WindowKind::Hann => 0.5 - 0.5 * phase.cos(),
                    WindowKind::Rectangular => 1.0,
                })
            })
            .collect()
    }
}

/// Short-time analysis parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FrameConfig {
    /// Frame length in seconds.
    pub frame_len: f64,
    /// Frame shift in seconds.
    pub frame_shift: f64,
    pub window: WindowKind,
}

impl Default for FrameConfig {
    fn default() -> Self {
        Self {
            frame_len: 0.025,
            frame_shift: 0.010,
            window: WindowKind::Hamming,
        }
    }
}

impl FrameConfig {
    pub fn len_samples(&self, sample_rate: u32) -> usize {
        (self.frame_len * sample_rate as f64).round() as usize
    }

    pub fn shift_samples(&self, sample_rate: u32) -> usize {
        (self.frame_shift * sample_rate as f64).round() as usize
    }

    /// Smallest power of two holding one frame.
    pub fn fft_size(&self, sample_rate: u32) -> usize {
        self.len_samples(sample_rate).max(1).next_power_of_two()
    }
}

/// Number of whole frames in `len` samples, or `None` when not even one fits.
pub fn frame_count(len: usize, frame_len: usize, shift: usize) -> Option<usize> {
    if len < frame_len || shift == 0 {
        None
    } else {
        Some((len - frame_len) / shift + 1)
    }
}

/// Splits a waveform into overlapping windowed frames (frames x samples).
pub fn frame_and_window<T: Scalar>(w: &Waveform<T>, cfg: &FrameConfig) -> Result<Array2<T>> {
    if !(cfg.frame_shift > 0.0) || cfg.frame_len < cfg.frame_shift {
        return Err(Error::config(format!(
            "frame length {} s must be >= frame shift {} s > 0",
            cfg.frame_len, cfg.frame_shift
        )));
    }
    let flen = cfg.len_samples(w.sample_rate());
    let shift = cfg.shift_samples(w.sample_rate());
    if flen == 0 || shift == 0 {
        return Err(Error::config("frame shorter than one sample"));
    }
    let count = frame_count(w.len(), flen, shift).ok_or(Error::InsufficientSamples {
        needed: flen,
        got: w.len(),
    })?;
    let window = cfg.window.coefficients::<T>(flen);
    let samples = w.samples();
    Ok(Array2::from_shape_fn((count, flen), |(m, n)| {
        samples[m * shift + n] * window[n]
    }))
}
