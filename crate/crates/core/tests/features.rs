mod common {
    pub mod contracts;
}

use common::contracts::{downsample_contract, matrix, shape_contract, speechy};
use ndarray::{Array1, Array2};
use proptest::prelude::*;
use replay_cm::dsp::{make_filterbank, FilterbankKind};
use replay_cm::features::{
    concat_embedding, downsample_frames, extract, read_archive, scmc_band_magnitudes, stack_frames, unstack_frames,
    write_archive, Archive, ArchiveKind, FeatureConfig, FeatureKind, FeatureVector, Rescaler, TARGET_FRAMES,
};

#[test]
fn table_defaults() {
    let expect = [
        (FeatureKind::Mfcc, 70, 300.0, 8000.0),
        (FeatureKind::Imfcc, 60, 200.0, 8000.0),
        (FeatureKind::Rfcc, 30, 200.0, 8000.0),
        (FeatureKind::Lfcc, 70, 100.0, 7800.0),
        (FeatureKind::Scmc, 40, 100.0, 8000.0),
        (FeatureKind::Cqcc, 50, 15.62, 8000.0),
    ];
    for (kind, n, lo, hi) in expect {
        let c = FeatureConfig::standard(kind);
        assert_eq!((c.n_coeffs, c.f_min, c.f_max), (n, lo, hi), "{kind}");
        assert!(c.n_coeffs <= c.n_bands);
        c.validate().unwrap();
    }
}

#[test]
fn every_extractor_emits_its_n_and_default_vector_is_410() {
    let (rows, len) = shape_contract();
    for (kind, got, want) in rows {
        assert_eq!(got, want, "{kind}");
    }
    assert_eq!(len, 410);
}

#[test]
fn extracted_values_are_finite_and_scmc_has_40_rows() {
    let f = extract(&speechy(2, 8000), &FeatureConfig::standard(FeatureKind::Scmc), "u").unwrap();
    assert_eq!(f.values.dim(), (40, 48));
    assert!(f.values.iter().all(|v| v.is_finite()));
}

#[test]
fn downsampling_contract_over_1000_rows() {
    let (worst, identity) = downsample_contract(1000, 7);
    assert!(worst < 1e-9, "mean error {worst}");
    assert!(identity);
}

#[test]
fn constant_row_downsamples_to_constant() {
    for m in [1, 7, 11, 98, 333] {
        let d = downsample_frames(&matrix(Array2::from_elem((1, m), -2.5)), TARGET_FRAMES).unwrap();
        assert!(d.values.iter().all(|v| (v + 2.5).abs() < 1e-12), "M = {m}");
    }
    assert!(downsample_frames(&matrix(Array2::zeros((1, 5))), 0).is_err());
}

#[test]
fn rescaler_examples() {
    let r = Rescaler::fit([[2.0, -4.0].as_slice()]).unwrap();
    assert_eq!(r.apply(&[2.0, -4.0]).unwrap(), vec![1.0, -1.0]);
    assert_eq!(r.apply(&[1.0, 2.0]).unwrap(), vec![0.5, 0.5]);
    let z = Rescaler::fit([[0.0, 3.0].as_slice(), [0.0, -1.0].as_slice()]).unwrap();
    assert_eq!(z.max_abs(), &[1.0, 3.0]);
    assert_eq!(z.apply(&[0.7, 3.0]).unwrap(), vec![0.7, 1.0]);
    assert!(r.apply(&[1.0]).is_err());
    assert!(Rescaler::<f64>::fit(std::iter::empty()).is_err());
}

#[test]
fn rescaler_text_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.txt");
    let r = Rescaler::fit([[0.125f32, -3.5, 1e-7].as_slice()]).unwrap();
    r.write(&path, Some("config 00000000000000ab")).unwrap();
    assert_eq!(Rescaler::<f32>::read(&path).unwrap(), r);
}

#[test]
fn stacking_examples() {
    let f = matrix(Array2::from_shape_vec((2, 10), (0..20).map(f64::from).collect()).unwrap());
    let v = stack_frames(&f).unwrap();
    assert_eq!(&v.values[..4], &[0.0, 10.0, 1.0, 11.0]);
    let m = matrix(Array2::zeros((40, 10)));
    assert_eq!(stack_frames(&m).unwrap().len(), 400);
    assert!(stack_frames(&matrix(Array2::zeros((40, 9)))).is_err());
}

#[test]
fn embedding_concatenation_examples() {
    let v = stack_frames(&matrix(Array2::zeros((40, 10)))).unwrap();
    let x: Vec<f64> = (1..=10).map(f64::from).collect();
    assert_eq!(concat_embedding(&v, &x, 0.0).unwrap().values[400..], [0.0; 10]);
    let ones = concat_embedding(&v, &[1.0; 10], 0.1).unwrap();
    assert_eq!(ones.len(), 410);
    assert!(ones.values[400..].iter().all(|&e| e == 0.1));
    assert!(concat_embedding(&v, &[1.0; 9], 0.1).is_err());
}

#[test]
fn scmc_constant_spectrum_gives_amplitude() {
    let fb = make_filterbank::<f64>(FilterbankKind::Linear, 40, 100.0, 8000.0, 16_000, 512).unwrap();
    let freqs = Array1::from_shape_fn(257, |k| k as f64 * 31.25);
    let m = scmc_band_magnitudes(Array1::from_elem(257, 0.3).view(), &fb, freqs.view());
    assert!(m.iter().all(|v| (v - 0.3).abs() < 1e-12));
}

#[test]
fn archive_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("a.rdfeat");
    let mut a = Archive::new(ArchiveKind::Features, "scmc", 2, 3, 0xfeed);
    a.push("u1", None, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
    a.push("u2", None, vec![0.5; 6]).unwrap();
    assert!(a.push("u3", None, vec![0.0; 5]).is_err());
    assert!(a.push("u4", Some("aaaAB"), vec![0.0; 6]).is_err());
    write_archive(&path, &a).unwrap();
    let b = read_archive(&path).unwrap();
    assert_eq!(std::fs::read(&path).unwrap()[..8], *b"RDFEAT01");
    assert_eq!(b, a);
}

proptest! {
    #[test]
    fn downsample_preserves_row_means(rows in prop::collection::vec(prop::collection::vec(-50.0f64..50.0, 11..500), 1..4)) {
        let m = rows.iter().map(Vec::len).min().unwrap();
        let data: Vec<f64> = rows.iter().flat_map(|r| r[..m].to_vec()).collect();
        let f = matrix(Array2::from_shape_vec((rows.len(), m), data).unwrap());
        let d = downsample_frames(&f, TARGET_FRAMES).unwrap();
        for (a, b) in f.values.rows().into_iter().zip(d.values.rows()) {
            prop_assert!((a.mean().unwrap() - b.mean().unwrap()).abs() < 1e-9);
        }
    }

    #[test]
    fn stacking_is_a_bijection(n in 1usize..50, seed in any::<u32>()) {
        let values = Array2::from_shape_fn((n, 10), |(i, j)| f64::from(seed) + (i * 10 + j) as f64);
        let f = matrix(values);
        let v = stack_frames(&f).unwrap();
        for m in 0..10 {
            for c in 0..n {
                prop_assert_eq!(v.values[m * n + c], f.values[[c, m]]);
            }
        }
        prop_assert_eq!(unstack_frames(&v, FeatureKind::Scmc, "u").unwrap(), f);
    }

    #[test]
    fn refit_rescaler_maps_extrema_to_unit(vs in prop::collection::vec(prop::collection::vec(-9.0f64..9.0, 5), 1..20)) {
        let r = Rescaler::fit(vs.iter().map(Vec::as_slice)).unwrap();
        let once: Vec<Vec<f64>> = vs.iter().map(|v| r.apply(v).unwrap()).collect();
        prop_assert!(once.iter().flatten().all(|x| x.abs() <= 1.0));
        let again = Rescaler::fit(once.iter().map(Vec::as_slice)).unwrap();
        for d in 0..5 {
            let peak = once.iter().map(|v| again.apply(v).unwrap()[d].abs()).fold(0.0, f64::max);
            let all_zero = vs.iter().all(|v| v[d] == 0.0);
            prop_assert!(all_zero || (peak - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn scmc_scales_with_spectrum(alpha in 0.01f64..100.0, seed in any::<u64>()) {
        let fb = make_filterbank::<f64>(FilterbankKind::Linear, 40, 100.0, 8000.0, 16_000, 512).unwrap();
        let freqs = Array1::from_shape_fn(257, |k| k as f64 * 31.25);
        let mags = Array1::from_shape_fn(257, |k| ((k as u64 ^ seed) % 97) as f64 / 10.0);
        let base = scmc_band_magnitudes(mags.view(), &fb, freqs.view());
        let scaled = scmc_band_magnitudes((&mags * alpha).view(), &fb, freqs.view());
        for (a, b) in base.iter().zip(scaled.iter()) {
            prop_assert!((alpha * a - b).abs() <= 1e-9 * b.abs().max(1.0));
        }
    }
}

#[test]
fn embedding_only_vector_has_no_signal_part() {
    let v = FeatureVector::embedding_only(vec![0.5f64; 10]);
    assert_eq!((v.len(), v.n_coeffs, v.embedding_dim), (10, 0, 10));
}
