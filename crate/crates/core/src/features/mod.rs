//! Cepstral front-ends and the fixed-size vector chain that feeds the
//! countermeasure: FFT down-sampling to ten frames, frame-major stacking,
//! training-set rescaling and concatenation with scaled embeddings.

mod archive;
mod extract;
mod rescale;
mod vector;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use archive::{read_archive, write_archive, Archive, ArchiveKind, ArchiveRecord};
pub use extract::{
    downsample_frames, extract, geometric_to_linear, scmc_band_magnitudes, FeatureExtractor, FeatureMatrix,
};
pub use rescale::Rescaler;
pub use vector::{concat_embedding, stack_frames, unstack_frames, FeatureVector};

use crate::dsp::{CqtConfig, FrameConfig, SAMPLE_RATE};
use crate::error::{Error, Result};

/// Frames per utterance after down-sampling.
pub const TARGET_FRAMES: usize = 10;

/// Dimension of the reduced embedding appended to signal features.
pub const EMBEDDING_DIM: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Mfcc,
    Imfcc,
    Rfcc,
    Lfcc,
    Scmc,
    Cqcc,
}

impl FeatureKind {
    pub const ALL: [FeatureKind; 6] = [
        FeatureKind::Mfcc,
        FeatureKind::Imfcc,
        FeatureKind::Rfcc,
        FeatureKind::Lfcc,
        FeatureKind::Scmc,
        FeatureKind::Cqcc,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FeatureKind::Mfcc => "mfcc",
            FeatureKind::Imfcc => "imfcc",
            FeatureKind::Rfcc => "rfcc",
            FeatureKind::Lfcc => "lfcc",
            FeatureKind::Scmc => "scmc",
            FeatureKind::Cqcc => "cqcc",
        }
    }
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FeatureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FeatureKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::config(format!("unknown feature kind {s:?}")))
    }
}

/// Front-end parameters for one feature kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub kind: FeatureKind,
    pub n_coeffs: usize,
    pub f_min: f64,
    pub f_max: f64,
    /// Filterbank bands; for CQCC the number of geometric CQT bins.
    pub n_bands: usize,
    #[serde(default)]
    pub frame: FrameConfig,
    /// FFT length; defaults to the next power of two above the frame.
    #[serde(default)]
    pub fft_size: Option<usize>,
    #[serde(default = "default_bins_per_octave")]
    pub bins_per_octave: usize,
    #[serde(default = "default_sample_rate")]
    pub sample_rate: u32,
}

fn default_bins_per_octave() -> usize {
    CqtConfig::default().bins_per_octave
}

fn default_sample_rate() -> u32 {
    SAMPLE_RATE
}

impl FeatureConfig {
    /// Coefficient count and frequency range of each front-end.
    pub fn standard(kind: FeatureKind) -> Self {
        let (n, f_min, f_max) = match kind {
            FeatureKind::Mfcc => (70, 300.0, 8000.0),
            FeatureKind::Imfcc => (60, 200.0, 8000.0),
            FeatureKind::Rfcc => (30, 200.0, 8000.0),
            FeatureKind::Lfcc => (70, 100.0, 7800.0),
            FeatureKind::Scmc => (40, 100.0, 8000.0),
            FeatureKind::Cqcc => (50, 15.62, 8000.0),
        };
        let mut cfg = FeatureConfig {
            kind,
            n_coeffs: n,
            f_min,
            f_max,
            n_bands: n,
            frame: FrameConfig::default(),
            fft_size: None,
            bins_per_octave: default_bins_per_octave(),
            sample_rate: SAMPLE_RATE,
        };
        if kind == FeatureKind::Cqcc {
            cfg.n_bands = cfg.cqt().n_bins();
        }
        cfg
    }

    /// Frame-level MFCCs fed to the x-vector network: 40 coefficients from
    /// an 80-filter mel bank over the full band.
    pub fn xvector_mfcc() -> Self {
        FeatureConfig {
            n_coeffs: 40,
            n_bands: 80,
            f_min: 0.0,
            f_max: 8000.0,
            ..Self::standard(FeatureKind::Mfcc)
        }
    }

    pub fn cqt(&self) -> CqtConfig {
        CqtConfig {
            f_min: self.f_min,
            f_max: self.f_max,
            bins_per_octave: self.bins_per_octave,
        }
    }

    pub fn fft_size(&self) -> usize {
        self.fft_size.unwrap_or_else(|| self.frame.fft_size(self.sample_rate))
    }

    /// Length of the uniform grid the CQT spectrum is resampled onto.
    pub fn cqcc_grid_len(&self) -> usize {
        2 * self.cqt().n_bins()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_coeffs == 0 {
            return Err(Error::config("n_coeffs must be positive"));
        }
        let bands = if self.kind == FeatureKind::Cqcc {
            if self.n_bands != self.cqt().n_bins() {
                return Err(Error::config(format!(
                    "CQCC n_bands {} must equal the CQT bin count {}",
                    self.n_bands,
                    self.cqt().n_bins()
                )));
            }
            self.cqcc_grid_len()
        } else {
            self.n_bands
        };
        if self.n_coeffs > bands {
            return Err(Error::config(format!(
                "{}: n_coeffs {} exceeds {} bands",
                self.kind, self.n_coeffs, bands
            )));
        }
        if self.fft_size() < self.frame.len_samples(self.sample_rate) {
            return Err(Error::config("fft size shorter than the analysis frame"));
        }
        Ok(())
    }
}
