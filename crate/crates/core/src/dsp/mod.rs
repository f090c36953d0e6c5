//! Signal-processing kernels used by the cepstral front-ends.
//!
//! Everything here is a pure function over immutable inputs, generic over
//! the [`Scalar`](crate::Scalar) type.

mod cqt;
mod dct;
mod filterbank;
mod frame;
mod resample;
mod spectrum;
pub mod wav;

pub use cqt::{cqt, CqtConfig};
pub use dct::{dct2, dct_matrix};
pub use filterbank::{hz_to_mel, make_filterbank, mel_to_hz, Filterbank, FilterbankKind};
pub use frame::{frame_and_window, frame_count, FrameConfig, Waveform, WindowKind};
pub use resample::fft_resample;
pub use spectrum::{power_spectrum, Spectrogram};

/// Default sample rate of the corpus and all front-ends.
pub const SAMPLE_RATE: u32 = 16_000;

/// Floor applied to band energies before taking logarithms.
pub const LOG_FLOOR: f64 = 1e-10;
