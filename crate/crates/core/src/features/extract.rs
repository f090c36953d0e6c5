use ndarray::{Array1, Array2, ArrayView1, Axis};

use super::{FeatureConfig, FeatureKind};
use crate::dsp::{
    cqt, dct2, fft_resample, frame_and_window, make_filterbank, power_spectrum, Filterbank, FilterbankKind, Waveform,
    LOG_FLOOR,
};
use crate::error::{Error, Result};
use crate::Scalar;

/// Per-utterance coefficient matrix, `n_coeffs x n_frames`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix<T> {
    pub values: Array2<T>,
    pub kind: FeatureKind,
    pub utterance_id: String,
}

impl<T: Scalar> FeatureMatrix<T> {
    pub fn n_coeffs(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_frames(&self) -> usize {
        self.values.ncols()
    }
}

/// A configured front-end. Building one precomputes the filterbank so
/// repeated extraction only pays for the per-utterance transforms.
#[derive(Debug, Clone)]
pub struct FeatureExtractor<T> {
    cfg: FeatureConfig,
    filterbank: Option<Filterbank<T>>,
    /// Bin frequencies, used by SCMC weighting.
    freqs: Array1<T>,
}

impl<T: Scalar> FeatureExtractor<T> {
    pub fn new(cfg: FeatureConfig) -> Result<Self> {
        cfg.validate()?;
        let fft = cfg.fft_size();
        let fb_kind = match cfg.kind {
            FeatureKind::Mfcc => Some(FilterbankKind::Mel),
            FeatureKind::Imfcc => Some(FilterbankKind::InvertedMel),
            FeatureKind::Lfcc | FeatureKind::Scmc => Some(FilterbankKind::Linear),
            FeatureKind::Rfcc => Some(FilterbankKind::Rectangular),
            FeatureKind::Cqcc => None,
        };
        let filterbank = fb_kind
            .map(|k| make_filterbank(k, cfg.n_bands, cfg.f_min, cfg.f_max, cfg.sample_rate, fft))
            .transpose()?;
        let freqs = Array1::from_shape_fn(fft / 2 + 1, |k| T::lit(k as f64 * cfg.sample_rate as f64 / fft as f64));
        Ok(Self { cfg, filterbank, freqs })
    }

    pub fn config(&self) -> &FeatureConfig {
        &self.cfg
    }

    pub fn extract(&self, w: &Waveform<T>, utterance_id: &str) -> Result<FeatureMatrix<T>> {
        if w.sample_rate() != self.cfg.sample_rate {
            return Err(Error::config(format!(
                "waveform sampled at {} Hz, front-end expects {} Hz",
                w.sample_rate(),
                self.cfg.sample_rate
            )));
        }
        let floor = T::lit(LOG_FLOOR);
        let log_bands = match self.cfg.kind {
            FeatureKind::Cqcc => {
                let cq = self.cfg.cqt();
                let spec = cqt(w, &cq, &self.cfg.frame)?;
                let grid = self.cfg.cqcc_grid_len();
                let mut out = Array2::zeros((spec.n_frames(), grid));
                for (row, mut dst) in spec.magnitudes.rows().into_iter().zip(out.rows_mut()) {
                    let logs: Vec<T> = row.iter().map(|&m| m.max(floor).ln()).collect();
                    let lin = geometric_to_linear(&logs, cq.bins_per_octave, grid)?;
                    dst.assign(&Array1::from(lin));
                }
                out
            }
            kind => {
                let frames = frame_and_window(w, &self.cfg.frame)?;
                let spec = power_spectrum(
                    &frames,
                    self.cfg.fft_size(),
                    self.cfg.sample_rate,
                    self.cfg.frame.frame_shift,
                )?;
                let fb = self.filterbank.as_ref().expect("filterbank for FFT features");
                let bands = if kind == FeatureKind::Scmc {
                    let mut m = Array2::zeros((spec.n_frames(), fb.n_bands()));
                    for (row, mut dst) in spec.magnitudes.rows().into_iter().zip(m.rows_mut()) {
                        dst.assign(&scmc_band_magnitudes(row, fb, self.freqs.view()));
                    }
                    m
                } else {
                    fb.apply(&spec.power())
                };
                bands.mapv(|e| e.max(floor).ln())
            }
        };
        let cep = dct2(&log_bands, self.cfg.n_coeffs)?;
        Ok(FeatureMatrix {
            values: cep.reversed_axes().as_standard_layout().to_owned(),
            kind: self.cfg.kind,
            utterance_id: utterance_id.to_string(),
        })
    }
}

/// One-shot extraction; see [`FeatureExtractor`] for repeated use.
pub fn extract<T: Scalar>(w: &Waveform<T>, cfg: &FeatureConfig, utterance_id: &str) -> Result<FeatureMatrix<T>> {
    FeatureExtractor::new(cfg.clone())?.extract(w, utterance_id)
}

/// Frequency-weighted mean magnitude of each band:
/// `m_j = sum_k w_j(k) f_k |S(k)| / sum_k w_j(k) f_k`.
pub fn scmc_band_magnitudes<T: Scalar>(
    magnitudes: ArrayView1<T>,
    fb: &Filterbank<T>,
    freqs: ArrayView1<T>,
) -> Array1<T> {
    let weighted = &fb.weights * &freqs.insert_axis(Axis(0));
    let num = weighted.dot(&magnitudes);
    let den = weighted.sum_axis(Axis(1));
    num / den
}

/// Resamples a spectrum on geometrically spaced bins onto a uniform
/// frequency grid of `grid_len` points.
///
/// Octave `j` spans a frequency width proportional to `2^j`, so it receives
/// that share of the grid; each octave's bins are FFT-resampled to their
/// share. Octaves narrower than one grid step are dropped.
pub fn geometric_to_linear<T: Scalar>(values: &[T], bins_per_octave: usize, grid_len: usize) -> Result<Vec<T>> {
    if bins_per_octave == 0 || values.len() % bins_per_octave != 0 {
        return Err(Error::config(format!(
            "{} geometric bins do not divide into octaves of {bins_per_octave}",
            values.len()
        )));
    }
    let n_oct = values.len() / bins_per_octave;
    let total = 2f64.powi(n_oct as i32) - 1.0;
    let boundary = |j: usize| ((grid_len as f64) * (2f64.powi(j as i32) - 1.0) / total).round() as usize;
    let mut out = Vec::with_capacity(grid_len);
    for j in 0..n_oct {
        let share = boundary(j + 1) - boundary(j);
        if share == 0 {
            continue;
        }
        let octave = &values[j * bins_per_octave..(j + 1) * bins_per_octave];
        out.extend(fft_resample(octave, share)?);
    }
    debug_assert_eq!(out.len(), grid_len);
    Ok(out)
}

/// Resamples every coefficient row to `m_prime` frames with the Fourier
/// method. Row means are preserved.
pub fn downsample_frames<T: Scalar>(f: &FeatureMatrix<T>, m_prime: usize) -> Result<FeatureMatrix<T>> {
    if m_prime < 1 {
        return Err(Error::config("target frame count must be at least 1"));
    }
    if f.n_frames() < 1 {
        return Err(Error::data(format!("{}: feature matrix has no frames", f.utterance_id)));
    }
    let mut values = Array2::zeros((f.n_coeffs(), m_prime));
    for (row, mut dst) in f.values.rows().into_iter().zip(values.rows_mut()) {
        let row: Vec<T> = row.to_vec();
        dst.assign(&Array1::from(fft_resample(&row, m_prime)?));
    }
    Ok(FeatureMatrix {
        values,
        kind: f.kind,
        utterance_id: f.utterance_id.clone(),
    })
}
