use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Scalar;

pub fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

pub fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FilterbankKind {
    /// Triangles equally spaced on the mel scale.
    Mel,
    /// Mel triangles mirrored across the band so resolution concentrates at
    /// high frequencies.
    InvertedMel,
    /// Triangles equally spaced in Hz.
    Linear,
    /// Non-overlapping boxcars equally spaced in Hz.
    Rectangular,
}

/// Band weights over FFT bins.
#[derive(Debug, Clone, PartialEq)]
pub struct Filterbank<T> {
    /// bands x bins
    pub weights: Array2<T>,
    pub kind: FilterbankKind,
    pub f_min: f64,
    pub f_max: f64,
    /// Center frequency of each band in Hz, strictly increasing.
    pub centers: Vec<f64>,
}

impl<T: Scalar> Filterbank<T> {
    pub fn n_bands(&self) -> usize {
        self.weights.nrows()
    }

    /// Band energies (frames x bands) of a non-negative spectrum (frames x bins).
    pub fn apply(&self, spectrum: &Array2<T>) -> Array2<T> {
        spectrum.dot(&self.weights.t())
    }
}

/// Triangle edge points: `n_bands + 2` frequencies, band `i` spans
/// `edges[i]..edges[i + 2]` with its apex at `edges[i + 1]`.
fn triangle_edges(kind: FilterbankKind, n_bands: usize, f_min: f64, f_max: f64) -> Vec<f64> {
    let n = n_bands + 2;
    match kind {
        FilterbankKind::Mel => {
            let (lo, hi) = (hz_to_mel(f_min), hz_to_mel(f_max));
            (0..n)
                .map(|i| mel_to_hz(lo + (hi - lo) * i as f64 / (n - 1) as f64))
                .collect()
        }
        FilterbankKind::InvertedMel => {
            let mel = triangle_edges(FilterbankKind::Mel, n_bands, f_min, f_max);
            mel.iter().rev().map(|&f| f_min + f_max - f).collect()
        }
        FilterbankKind::Linear => (0..n)
            .map(|i| f_min + (f_max - f_min) * i as f64 / (n - 1) as f64)
            .collect(),
        FilterbankKind::Rectangular => unreachable!("rectangular bands have no apex"),
    }
}

pub fn make_filterbank<T: Scalar>(
    kind: FilterbankKind,
    n_bands: usize,
    f_min: f64,
    f_max: f64,
    sample_rate: u32,
    fft_size: usize,
) -> Result<Filterbank<T>> {
    let nyquist = sample_rate as f64 / 2.0;
    if n_bands == 0 {
        return Err(Error::config("filterbank needs at least one band"));
    }
    if !(0.0 <= f_min && f_min < f_max && f_max <= nyquist) {
        return Err(Error::config(format!(
            "filterbank range {f_min}-{f_max} Hz outside 0-{nyquist} Hz"
        )));
    }
    let n_bins = fft_size / 2 + 1;
    let bin_hz = sample_rate as f64 / fft_size as f64;
    let mut weights = Array2::<T>::zeros((n_bands, n_bins));
    let mut centers = Vec::with_capacity(n_bands);
    let mut bounds = Vec::with_capacity(n_bands);

    if kind == FilterbankKind::Rectangular {
        let width = (f_max - f_min) / n_bands as f64;
        for band in 0..n_bands {
            let lo = f_min + width * band as f64;
            let hi = if band + 1 == n_bands { f_max } else { lo + width };
            centers.push(0.5 * (lo + hi));
            bounds.push((lo, hi));
            for k in 0..n_bins {
                let f = k as f64 * bin_hz;
                let inside = f >= lo && (f < hi || (band + 1 == n_bands && f <= hi));
                if inside {
                    weights[[band, k]] = T::one();
                }
            }
        }
    } else {
        let edges = triangle_edges(kind, n_bands, f_min, f_max);
        for band in 0..n_bands {
            let (lo, c, hi) = (edges[band], edges[band + 1], edges[band + 2]);
            centers.push(c);
            bounds.push((lo, hi));
            for k in 0..n_bins {
                let f = k as f64 * bin_hz;
                let w = if f > lo && f <= c {
                    (f - lo) / (c - lo)
                } else if f > c && f < hi {
                    (hi - f) / (hi - c)
                } else {
                    0.0
                };
                weights[[band, k]] = T::lit(w);
            }
        }
    }

    for (band, row) in weights.rows().into_iter().enumerate() {
        if !row.iter().any(|&w| w > T::zero()) {
            let (lo, hi) = bounds[band];
            return Err(Error::DegenerateBand { band, lo, hi });
        }
    }
    if centers.windows(2).any(|p| p[1] <= p[0]) {
        return Err(Error::config("filterbank centers not strictly increasing"));
    }
    Ok(Filterbank {
        weights,
        kind,
        f_min,
        f_max,
        centers,
    })
}
