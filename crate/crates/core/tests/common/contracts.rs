#![allow(dead_code)]

//! Shape and down-sampling contracts shared by feature tests and acceptance.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use replay_cm::dsp::Waveform;
use replay_cm::features::{
    concat_embedding, downsample_frames, extract, stack_frames, FeatureConfig, FeatureKind, FeatureMatrix,
    TARGET_FRAMES,
};

pub fn matrix(values: Array2<f64>) -> FeatureMatrix<f64> {
    FeatureMatrix {
        values,
        kind: FeatureKind::Scmc,
        utterance_id: "u".into(),
    }
}

/// Worst absolute per-row mean error over `rows` random rows with M in
/// [11, 500], and whether a 10-frame input comes back unchanged.
pub fn downsample_contract(rows: usize, seed: u64) -> (f64, bool) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..rows {
        let m = rng.random_range(11..=500);
        let offset = rng.random_range(-20.0..20.0);
        let row: Vec<f64> = (0..m).map(|_| offset + rng.random_range(-5.0..5.0)).collect();
        let mean = row.iter().sum::<f64>() / m as f64;
        let d = downsample_frames(&matrix(Array2::from_shape_vec((1, m), row).unwrap()), TARGET_FRAMES).unwrap();
        assert_eq!(d.n_frames(), TARGET_FRAMES);
        worst = worst.max((d.values.row(0).sum() / TARGET_FRAMES as f64 - mean).abs());
    }
    let ten = Array2::from_shape_fn((40, TARGET_FRAMES), |_| rng.random_range(-5.0..5.0));
    let identity = downsample_frames(&matrix(ten.clone()), TARGET_FRAMES).unwrap().values == ten;
    (worst, identity)
}

pub fn speechy(seed: u64, n: usize) -> Waveform<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = (0..n)
        .map(|i| {
            let t = i as f64 / 16_000.0;
            0.3 * (2.0 * std::f64::consts::PI * 180.0 * t).sin() + rng.random_range(-0.1..0.1)
        })
        .collect();
    Waveform::new(x, 16_000).unwrap()
}

/// (kind, emitted N, expected N) per extractor, and the default SCMC+embedding
/// vector length.
pub fn shape_contract() -> (Vec<(FeatureKind, usize, usize)>, usize) {
    let w = speechy(1, 16_000);
    let table = [
        (FeatureKind::Mfcc, 70),
        (FeatureKind::Imfcc, 60),
        (FeatureKind::Rfcc, 30),
        (FeatureKind::Lfcc, 70),
        (FeatureKind::Scmc, 40),
        (FeatureKind::Cqcc, 50),
    ];
    let rows = table
        .iter()
        .map(|&(kind, n)| {
            (
                kind,
                extract(&w, &FeatureConfig::standard(kind), "u").unwrap().n_coeffs(),
                n,
            )
        })
        .collect();
    let scmc = extract(&w, &FeatureConfig::standard(FeatureKind::Scmc), "u").unwrap();
    let v = stack_frames(&downsample_frames(&scmc, TARGET_FRAMES).unwrap()).unwrap();
    let full = concat_embedding(&v, &[1.0; 10], 0.1).unwrap();
    (rows, full.len())
}
