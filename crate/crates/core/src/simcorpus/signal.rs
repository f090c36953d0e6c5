use std::f64::consts::PI;

use biquad::{Biquad, Coefficients, DirectForm2Transposed, Type};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::{AttackParams, EnvParams};
use crate::dsp::Waveform;
use crate::error::{Error, Result};
use crate::seeds;

/// Peak amplitude of synthesized sources.
pub const SOURCE_PEAK: f64 = 0.5;

/// Early reflections in each impulse response.
pub const N_REFLECTIONS: usize = 8;

/// Randomized source parameters drawn from the source seed.
struct SourceParams {
    f_base: f64,
    drift_depth: f64,
    drift_rate: f64,
    drift_phase: f64,
    formants: [(f64, f64); 3],
}

impl SourceParams {
    fn draw(rng: &mut ChaCha8Rng) -> Self {
        Self {
            f_base: rng.random_range(100.0..250.0),
            drift_depth: rng.random_range(0.005..0.015),
            drift_rate: rng.random_range(0.5..2.0),
            drift_phase: rng.random_range(0.0..2.0 * PI),
            formants: [
                (rng.random_range(300.0..900.0), rng.random_range(60.0..120.0)),
                (rng.random_range(900.0..2500.0), rng.random_range(80.0..160.0)),
                (rng.random_range(2500.0..3500.0), rng.random_range(100.0..200.0)),
            ],
        }
    }

    fn pitch(&self, t: f64) -> f64 {
        let drift = self.drift_depth * (2.0 * PI * self.drift_rate * t + self.drift_phase).sin();
        (self.f_base * (1.0 + drift)).clamp(80.0, 300.0)
    }
}

fn check_duration(duration: f64) -> Result<()> {
    if !(0.5..=5.0).contains(&duration) {
        return Err(Error::config(format!(
            "source duration {duration} s is outside [0.5, 5]"
        )));
    }
    Ok(())
}

/// Per-sample fundamental frequency of [`synth_source`] for the same seed.
pub fn source_pitch_track(seed: u64, duration: f64, sample_rate: u32) -> Result<Vec<f64>> {
    check_duration(duration)?;
    let sr = sample_rate as f64;
    let p = SourceParams::draw(&mut seeds::rng(seed, &[0x50C]));
    Ok((0..(duration * sr).round() as usize)
        .map(|i| p.pitch(i as f64 / sr))
        .collect())
}

/// Speech-like source: band-limited sawtooth with slowly drifting pitch in
/// 80-300 Hz, three cascaded formant resonators and a low noise floor,
/// normalized to peak 0.5.
pub fn synth_source(seed: u64, duration: f64, sample_rate: u32) -> Result<Waveform<f64>> {
    check_duration(duration)?;
    let sr = sample_rate as f64;
    let n = (duration * sr).round() as usize;
    let mut rng = seeds::rng(seed, &[0x50C]);
    let params = SourceParams::draw(&mut rng);
    let noise_level = 1e-3;
    let mut phase = 0.0f64;
    let mut x = Vec::with_capacity(n);
    for i in 0..n {
        let dt = params.pitch(i as f64 / sr) / sr;
        x.push(2.0 * phase - 1.0 - poly_blep(phase, dt) + noise_level * gauss(&mut rng));
        phase += dt;
        if phase >= 1.0 {
            phase -= 1.0;
        }
    }
    for (f, bw) in params.formants {
        x = resonator(&x, f, bw, sr);
    }
    let peak = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak > 0.0 {
        x.iter_mut().for_each(|v| *v *= SOURCE_PEAK / peak);
    }
    Waveform::new(x, sample_rate)
}

fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Polynomial band-limited step correction for a sawtooth.
fn poly_blep(t: f64, dt: f64) -> f64 {
    if t < dt {
        let u = t / dt;
        2.0 * u - u * u - 1.0
    } else if t > 1.0 - dt {
        let u = (t - 1.0) / dt;
        u * u + 2.0 * u + 1.0
    } else {
        0.0
    }
}

/// Two-pole resonator with unit gain at its centre frequency.
fn resonator(x: &[f64], freq: f64, bandwidth: f64, sr: f64) -> Vec<f64> {
    let r = (-PI * bandwidth / sr).exp();
    let theta = 2.0 * PI * freq / sr;
    let a1 = -2.0 * r * theta.cos();
    let a2 = r * r;
    let gain = (1.0 - r) * (1.0 + r * r - 2.0 * r * (2.0 * theta).cos()).sqrt();
    let (mut y1, mut y2) = (0.0, 0.0);
    x.iter()
        .map(|&v| {
            let y = gain * v - a1 * y1 - a2 * y2;
            y2 = y1;
            y1 = y;
            y
        })
        .collect()
}

/// Linear convolution via FFT, truncated to `x.len()` samples.
pub fn fft_convolve(x: &[f64], h: &[f64]) -> Vec<f64> {
    if x.is_empty() || h.is_empty() {
        return vec![0.0; x.len()];
    }
    let n = (x.len() + h.len() - 1).next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let pad = |s: &[f64]| {
        let mut v: Vec<Complex<f64>> = s.iter().map(|&r| Complex::new(r, 0.0)).collect();
        v.resize(n, Complex::new(0.0, 0.0));
        v
    };
    let (mut a, mut b) = (pad(x), pad(h));
    fwd.process(&mut a);
    fwd.process(&mut b);
    a.iter_mut().zip(&b).for_each(|(p, q)| *p *= q);
    inv.process(&mut a);
    a[..x.len()].iter().map(|c| c.re / n as f64).collect()
}

/// Synthetic room impulse response: unit direct path, early reflections
/// spaced by the room size and an exponentially decaying noise tail, all
/// following `exp(-6.91 t / T60)` in amplitude and jointly scaled to the
/// configured direct-to-reverberant ratio.
pub fn room_impulse_response(env: &EnvParams, sample_rate: u32, seed: u64) -> Vec<f64> {
    let sr = sample_rate as f64;
    let len = (env.t60 * sr).ceil() as usize + 1;
    let decay = |i: usize| (-6.91 * i as f64 / sr / env.t60).exp();
    let mut rng = seeds::rng(seed, &[0x817]);
    let mut h = vec![0.0; len];
    let spacing = ((env.reflection_spacing_ms * 1e-3 * sr).round() as usize).max(1);
    let tail_start = spacing;
    for (i, v) in h.iter_mut().enumerate().skip(tail_start) {
        *v = gauss(&mut rng) * decay(i);
    }
    for k in 1..=N_REFLECTIONS {
        let i = k * spacing;
        if i < len {
            let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            h[i] += sign * 4.0 * decay(i);
        }
    }
    let reverb: f64 = h[1..].iter().map(|v| v * v).sum();
    let scale = (10f64.powf(-env.drr_db / 10.0) / reverb).sqrt();
    h[1..].iter_mut().for_each(|v| *v *= scale);
    h[0] = 1.0;
    h
}

/// Convolution with the environment's impulse response; output keeps the
/// input length.
pub fn apply_environment(w: &Waveform<f64>, env: &EnvParams, seed: u64) -> Result<Waveform<f64>> {
    let h = room_impulse_response(env, w.sample_rate(), seed);
    Waveform::new(fft_convolve(w.samples(), &h), w.sample_rate())
}

/// Seed of the replay-side environment inside [`apply_attack`].
pub fn replay_environment_seed(seed: u64) -> u64 {
    seeds::derive(seed, &[0x2E9])
}

/// Fourth-order Butterworth band-pass as cascaded high- and low-pass
/// biquad sections.
pub fn butterworth_bandpass(x: &[f64], low: f64, high: f64, sample_rate: u32) -> Result<Vec<f64>> {
    let nyquist = sample_rate as f64 / 2.0;
    if !(0.0 < low && low < high && high < nyquist) {
        return Err(Error::config(format!(
            "passband ({low}, {high}) Hz is invalid below Nyquist {nyquist} Hz"
        )));
    }
    let qs = [1.0 / (2.0 * (PI / 8.0).cos()), 1.0 / (2.0 * (3.0 * PI / 8.0).cos())];
    let mut sections = Vec::new();
    for (ty, f) in [(Type::HighPass, low), (Type::LowPass, high)] {
        for q in qs {
            let c = Coefficients::<f64>::from_normalized_params(ty, f / nyquist, q)
                .map_err(|e| Error::config(format!("biquad design failed: {e:?}")))?;
            sections.push(DirectForm2Transposed::<f64>::new(c));
        }
    }
    Ok(x.iter()
        .map(|&v| sections.iter_mut().fold(v, |acc, s| s.run(acc)))
        .collect())
}

/// Memoryless soft clipper `tanh(g x) / g` with drive `g = 20 s`; the
/// identity at strength 0.
pub fn soft_clip(x: &[f64], strength: f64) -> Vec<f64> {
    if strength == 0.0 {
        return x.to_vec();
    }
    let g = 20.0 * strength;
    x.iter().map(|&v| (g * v).tanh() / g).collect()
}

/// Adds white Gaussian noise at `snr_db` relative to the signal power.
pub fn add_noise(x: &[f64], snr_db: f64, seed: u64) -> Vec<f64> {
    let power = x.iter().map(|v| v * v).sum::<f64>() / x.len().max(1) as f64;
    let std = (power / 10f64.powf(snr_db / 10.0)).sqrt();
    let mut rng = seeds::rng(seed, &[0x401]);
    x.iter().map(|&v| v + std * gauss(&mut rng)).collect()
}

/// Interception at the attacker's distance (additive noise), playback
/// through the replay device (band-pass and soft clipping) and
/// re-presentation into the environment.
pub fn apply_attack(w: &Waveform<f64>, attack: &AttackParams, env: &EnvParams, seed: u64) -> Result<Waveform<f64>> {
    let mut x = w.samples().to_vec();
    if let Some(snr) = attack.snr_db {
        x = add_noise(&x, snr, seed);
    }
    if let Some((low, high)) = attack.passband {
        x = butterworth_bandpass(&x, low, high, w.sample_rate())?;
    }
    x = soft_clip(&x, attack.nonlinearity);
    apply_environment(&Waveform::new(x, w.sample_rate())?, env, replay_environment_seed(seed))
}
