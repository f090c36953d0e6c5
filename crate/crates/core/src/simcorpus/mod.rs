//! Parametric synthetic replay corpus over 27 environments x (bona fide +
//! 9 attacks), plus a Gaussian ASV score simulator.

mod corpus;
mod signal;

use serde::{Deserialize, Serialize};

pub use corpus::{
    assign_labels, generate_corpus, render_utterance, simulate_asv_scores, AsvTrials, CorpusCounts, Manifest,
    ManifestRecord, Split,
};
pub use signal::{
    add_noise, apply_attack, apply_environment, butterworth_bandpass, fft_convolve, replay_environment_seed,
    room_impulse_response, soft_clip, source_pitch_track, synth_source, N_REFLECTIONS, SOURCE_PEAK,
};

use crate::error::{Error, Result};
use crate::labels::{AttackId, EnvId};

/// Physical parameters of one acoustic environment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvParams {
    pub reflection_spacing_ms: f64,
    pub t60: f64,
    /// Direct-to-reverberant energy ratio.
    pub drr_db: f64,
}

/// Replay chain parameters; `None` fields are transparent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttackParams {
    pub snr_db: Option<f64>,
    pub passband: Option<(f64, f64)>,
    pub nonlinearity: f64,
}

impl AttackParams {
    pub fn transparent() -> Self {
        Self {
            snr_db: None,
            passband: None,
            nonlinearity: 0.0,
        }
    }
}

/// Level tables indexed by the a/b/c (A/B/C) letter of each factor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub duration: f64,
    pub sample_rate: u32,
    pub reflection_spacing_ms: [f64; 3],
    pub t60_s: [f64; 3],
    pub drr_db: [f64; 3],
    pub snr_db: [f64; 3],
    pub passband_hz: [[f64; 2]; 3],
    pub nonlinearity: [f64; 3],
    pub asv_target_mean: f64,
    pub asv_nontarget_mean: f64,
    pub asv_spoof_means: [f64; 3],
    pub asv_std: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            duration: 1.0,
            sample_rate: crate::dsp::SAMPLE_RATE,
            reflection_spacing_ms: [2.0, 5.0, 10.0],
            t60_s: [0.1, 0.4, 0.8],
            drr_db: [12.0, 6.0, 0.0],
            snr_db: [30.0, 20.0, 10.0],
            passband_hz: [[50.0, 7800.0], [100.0, 4000.0], [300.0, 3000.0]],
            nonlinearity: [0.01, 0.1, 0.3],
            asv_target_mean: 2.0,
            asv_nontarget_mean: -2.0,
            asv_spoof_means: [1.5, 0.5, -1.0],
            asv_std: 1.0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.5..=5.0).contains(&self.duration) {
            return Err(Error::config("duration must be in [0.5, 5] s"));
        }
        if self.sample_rate == 0 {
            return Err(Error::config("sample rate must be positive"));
        }
        let nyquist = self.sample_rate as f64 / 2.0;
        if self.t60_s.iter().any(|&t| !(t > 0.0)) || self.reflection_spacing_ms.iter().any(|&s| !(s > 0.0)) {
            return Err(Error::config("T60 and reflection spacing must be positive"));
        }
        if self
            .passband_hz
            .iter()
            .any(|[l, h]| !(0.0 < *l && l < h && *h < nyquist))
        {
            return Err(Error::config("passbands must satisfy 0 < low < high < Nyquist"));
        }
        if self.nonlinearity.iter().any(|&s| !(s >= 0.0)) || !(self.asv_std > 0.0) {
            return Err(Error::config("nonlinearity must be non-negative and asv_std positive"));
        }
        Ok(())
    }

    pub fn env_params(&self, env: EnvId) -> EnvParams {
        EnvParams {
            reflection_spacing_ms: self.reflection_spacing_ms[env.room as usize],
            t60: self.t60_s[env.t60 as usize],
            drr_db: self.drr_db[env.distance as usize],
        }
    }

    /// `None` for bona fide.
    pub fn attack_params(&self, attack: AttackId) -> Option<AttackParams> {
        match attack {
            AttackId::Bonafide => None,
            AttackId::Replay {
                attacker_distance,
                device_quality,
            } => {
                let [low, high] = self.passband_hz[device_quality as usize];
                Some(AttackParams {
                    snr_db: Some(self.snr_db[attacker_distance as usize]),
                    passband: Some((low, high)),
                    nonlinearity: self.nonlinearity[device_quality as usize],
                })
            }
        }
    }
}
