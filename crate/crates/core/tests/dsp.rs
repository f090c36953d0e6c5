use ndarray::Array2;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use replay_cm::dsp::wav::{read_wav, write_wav};
use replay_cm::dsp::{
    cqt, dct2, dct_matrix, frame_and_window, frame_count, make_filterbank, power_spectrum, CqtConfig, FilterbankKind,
    FrameConfig, Waveform, WindowKind,
};
use replay_cm::Error;

const FS: u32 = 16_000;

fn sine(freq: f64, n: usize) -> Waveform<f64> {
    let x = (0..n)
        .map(|i| 0.5 * (2.0 * std::f64::consts::PI * freq * i as f64 / FS as f64).sin())
        .collect();
    Waveform::new(x, FS).unwrap()
}

fn noise(seed: u64, n: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

#[test]
fn one_second_gives_98_frames() {
    let w = Waveform::new(vec![0.0; 16_000], FS).unwrap();
    assert_eq!(frame_and_window(&w, &FrameConfig::default()).unwrap().nrows(), 98);
}

#[test]
fn constant_waveform_rectangular_frames_are_identical() {
    let w = Waveform::new(vec![1.0; 2000], FS).unwrap();
    let cfg = FrameConfig {
        window: WindowKind::Rectangular,
        ..FrameConfig::default()
    };
    let f = frame_and_window(&w, &cfg).unwrap();
    assert!(f.iter().all(|&v| v == 1.0));
}

#[test]
fn exactly_one_frame_and_too_short() {
    let cfg = FrameConfig::default();
    let w = Waveform::new(vec![0.1; 400], FS).unwrap();
    assert_eq!(frame_and_window(&w, &cfg).unwrap().nrows(), 1);
    let short = Waveform::new(vec![0.1; 399], FS).unwrap();
    assert!(matches!(
        frame_and_window(&short, &cfg),
        Err(Error::InsufficientSamples { needed: 400, got: 399 })
    ));
}

#[test]
fn sine_peaks_at_its_frequency() {
    let cfg = FrameConfig::default();
    let frames = frame_and_window(&sine(1000.0, 4000), &cfg).unwrap();
    let spec = power_spectrum(&frames, 512, FS, 0.01).unwrap();
    let width = FS as f64 / 512.0;
    for row in spec.magnitudes.rows() {
        let k = row
            .iter()
            .enumerate()
            .fold(0, |b, (i, &v)| if v > row[b] { i } else { b });
        assert!((spec.bin_freqs[k] - 1000.0).abs() <= width);
    }
}

#[test]
fn zero_frame_has_zero_spectrum_and_bins_increase() {
    let spec = power_spectrum(&Array2::<f64>::zeros((2, 400)), 512, FS, 0.01).unwrap();
    assert_eq!(spec.n_bins(), 257);
    assert!(spec.magnitudes.iter().all(|&m| m == 0.0));
    assert_eq!(spec.bin_freqs[0], 0.0);
    assert_eq!(*spec.bin_freqs.last().unwrap(), 8000.0);
    assert!(spec.bin_freqs.windows(2).all(|p| p[1] > p[0]));
}

#[test]
fn parseval_holds() {
    let n = 256;
    let x = noise(1, n);
    let frames = Array2::from_shape_vec((1, n), x.clone()).unwrap();
    let spec = power_spectrum(&frames, n, FS, 0.01).unwrap();
    let m = spec.magnitudes.row(0);
    let energy: f64 = x.iter().map(|v| v * v).sum();
    let half: f64 = (1..n / 2).map(|k| 2.0 * m[k] * m[k]).sum::<f64>() + m[0] * m[0] + m[n / 2] * m[n / 2];
    assert!((energy - half / n as f64).abs() / energy < 1e-6);
}

#[test]
fn mel_bank_rows_positive_and_centers_increase() {
    for (n, lo, hi) in [(80, 20.0, 7600.0), (70, 300.0, 8000.0), (10, 0.0, 8000.0)] {
        let fb = make_filterbank::<f64>(FilterbankKind::Mel, n, lo, hi, FS, 512).unwrap();
        assert!(fb.weights.rows().into_iter().all(|r| r.sum() > 0.0));
        assert!(fb.centers.windows(2).all(|p| p[1] > p[0]));
    }
}

#[test]
fn inverted_mel_mirrors_mel() {
    let (n, lo, hi) = (60, 200.0, 8000.0);
    let mel = make_filterbank::<f64>(FilterbankKind::Mel, n, lo, hi, FS, 512).unwrap();
    let inv = make_filterbank::<f64>(FilterbankKind::InvertedMel, n, lo, hi, FS, 512).unwrap();
    for i in 0..n {
        assert!((inv.centers[i] - (lo + hi - mel.centers[n - 1 - i])).abs() < 1e-9);
    }
}

#[test]
fn rectangular_rfcc_bands_are_260_hz() {
    let fb = make_filterbank::<f64>(FilterbankKind::Rectangular, 30, 200.0, 8000.0, FS, 512).unwrap();
    assert_eq!(fb.n_bands(), 30);
    for w in fb.centers.windows(2) {
        assert!((w[1] - w[0] - 260.0).abs() < 1e-9);
    }
}

#[test]
fn degenerate_filterbanks_are_rejected() {
    assert!(make_filterbank::<f64>(FilterbankKind::Linear, 10, 500.0, 500.0, FS, 512).is_err());
    assert!(make_filterbank::<f64>(FilterbankKind::Linear, 0, 100.0, 8000.0, FS, 512).is_err());
    assert!(make_filterbank::<f64>(FilterbankKind::Mel, 10, 100.0, 9000.0, FS, 512).is_err());
    assert!(make_filterbank::<f64>(FilterbankKind::Linear, 400, 100.0, 200.0, FS, 512).is_err());
}

#[test]
fn dct_of_constant_is_dc_only() {
    let c = dct2(&Array2::from_elem((1, 40), 3.0), 40).unwrap();
    assert!((c[[0, 0]] - 3.0 * 40f64.sqrt()).abs() < 1e-9);
    assert!(c.iter().skip(1).all(|v| v.abs() < 1e-9));
    assert!(dct2(&Array2::<f64>::zeros((1, 10)), 11).is_err());
}

#[test]
fn dct_round_trip_and_orthonormality() {
    let n = 40;
    let basis = dct_matrix::<f64>(n, n);
    let eye = basis.dot(&basis.t());
    for ((i, j), v) in eye.indexed_iter() {
        assert!((v - if i == j { 1.0 } else { 0.0 }).abs() < 1e-9);
    }
    let x = Array2::from_shape_vec((1, n), noise(2, n)).unwrap();
    let back = dct2(&x, n).unwrap().dot(&basis);
    assert!((&back - &x).iter().all(|v| v.abs() < 1e-9));
}

#[test]
fn cqt_geometry_tone_and_silence() {
    let cfg = CqtConfig::default();
    assert_eq!(cfg.n_octaves(), 9);
    assert_eq!(cfg.n_bins(), 108);
    let spec = cqt(&sine(440.0, 16_000), &cfg, &FrameConfig::default()).unwrap();
    let mid = spec.magnitudes.row(spec.n_frames() / 2);
    let k = mid
        .iter()
        .enumerate()
        .fold(0, |b, (i, &v)| if v > mid[b] { i } else { b });
    assert!((spec.bin_freqs[k] / 440.0).log2().abs() <= 0.25);
    let silent = Waveform::new(vec![0.0; 8000], FS).unwrap();
    assert!(cqt(&silent, &cfg, &FrameConfig::default())
        .unwrap()
        .magnitudes
        .iter()
        .all(|&m| m == 0.0));
    assert!(cqt(&silent, &CqtConfig { f_min: 0.0, ..cfg }, &FrameConfig::default()).is_err());
}

#[test]
fn wav_round_trip_within_quantization() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("a.wav");
    let w = Waveform::new(noise(3, 1000).into_iter().map(|v| 0.9 * v).collect(), FS).unwrap();
    write_wav(&path, &w).unwrap();
    let r: Waveform<f64> = read_wav(&path).unwrap();
    assert_eq!(r.sample_rate(), FS);
    assert_eq!(r.len(), 1000);
    assert!(r
        .samples()
        .iter()
        .zip(w.samples())
        .all(|(a, b)| (a - b).abs() <= 1.0 / 32768.0));
}

fn dft_magnitudes(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    (0..=n / 2)
        .map(|k| {
            let (mut re, mut im) = (0.0, 0.0);
            for (t, v) in x.iter().enumerate() {
                let a = -2.0 * std::f64::consts::PI * (k * t) as f64 / n as f64;
                re += v * a.cos();
                im += v * a.sin();
            }
            re.hypot(im)
        })
        .collect()
}

proptest! {
    #[test]
    fn frame_count_formula(len in 1usize..5000, flen in 1usize..600, shift in 1usize..300) {
        let expected = if len >= flen { Some((len - flen) / shift + 1) } else { None };
        prop_assert_eq!(frame_count(len, flen, shift), expected);
    }

    #[test]
    fn framing_matches_formula(len in 400usize..4000) {
        let w = Waveform::new(vec![0.25; len], FS).unwrap();
        prop_assert_eq!(frame_and_window(&w, &FrameConfig::default()).unwrap().nrows(), (len - 400) / 160 + 1);
    }

    #[test]
    fn spectrum_matches_direct_dft(seed in any::<u64>()) {
        let x = noise(seed, 64);
        let spec = power_spectrum(&Array2::from_shape_vec((1, 64), x.clone()).unwrap(), 64, FS, 0.01).unwrap();
        for (a, b) in spec.magnitudes.row(0).iter().zip(dft_magnitudes(&x)) {
            prop_assert!((a - b).abs() <= 1e-6 * b.max(1e-6));
        }
    }

    #[test]
    fn filterbanks_are_non_negative(
        kind in prop::sample::select(vec![FilterbankKind::Mel, FilterbankKind::InvertedMel, FilterbankKind::Linear, FilterbankKind::Rectangular]),
        n in 1usize..60,
        lo in 0.0f64..2000.0,
        span in 2000.0f64..6000.0,
        seed in any::<u64>(),
    ) {
        let hi = (lo + span).min(8000.0);
        let fb = make_filterbank::<f64>(kind, n, lo, hi, FS, 512).unwrap();
        prop_assert!(fb.weights.iter().all(|&w| w >= 0.0));
        prop_assert!(fb.weights.rows().into_iter().all(|r| r.iter().any(|&w| w > 0.0)));
        prop_assert!(fb.centers.windows(2).all(|p| p[1] > p[0]));
        for (k, col) in fb.weights.columns().into_iter().enumerate() {
            let f = k as f64 * FS as f64 / 512.0;
            if f < lo || f > hi {
                prop_assert!(col.iter().all(|&w| w == 0.0));
            }
        }
        let spec = Array2::from_shape_vec((1, 257), noise(seed, 257).into_iter().map(f64::abs).collect()).unwrap();
        prop_assert!(fb.apply(&spec).iter().all(|&e| e >= 0.0));
    }

    #[test]
    fn dct_matrix_is_orthonormal(n in 1usize..80) {
        let m = dct_matrix::<f64>(n, n);
        let eye = m.dot(&m.t());
        for ((i, j), v) in eye.indexed_iter() {
            let want = if i == j { 1.0 } else { 0.0 };
            prop_assert!((v - want).abs() < 1e-9);
        }
    }
}
