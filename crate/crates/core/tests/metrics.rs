mod common {
    pub mod oracles;
}

use common::oracles::*;
use proptest::prelude::*;

use replay_cm::metrics::*;

fn asv() -> AsvOperatingPoint {
    AsvOperatingPoint {
        threshold: 0.0,
        p_miss: 0.0228,
        p_fa: 0.0228,
        p_miss_spoof: 0.3,
    }
}

#[test]
fn eer_examples() {
    assert_eq!(eer(&[1.0, 0.9], &[-1.0, -0.9]).unwrap().0, 0.0);
    assert_eq!(eer(&[0.0, 1.0], &[0.0, 1.0]).unwrap().0, 0.5);
    assert!((eer(&[0.8, 0.6, 0.4], &[0.7, 0.3, 0.1]).unwrap().0 - 1.0 / 3.0).abs() < 1e-12);
    assert!(eer(&[], &[1.0]).is_err());
    assert!(eer(&[f64::NAN], &[1.0]).is_err());
}

#[test]
fn oracles_agree_on_fifty_random_sets() {
    let params = TdcfParams::default();
    let (c1, c2) = params.tandem_constants(&asv()).unwrap();
    for seed in 0..50 {
        let (pos, neg) = random_trials(seed);
        assert_eq!(eer(&pos, &neg).unwrap().0, brute_eer(&pos, &neg), "seed {seed}");
        assert_eq!(
            min_tdcf(&pos, &neg, &params, &asv()).unwrap().0,
            brute_min_tdcf(&pos, &neg, c1, c2),
            "seed {seed}"
        );
    }
}

#[test]
fn tdcf_examples() {
    let p = TdcfParams::default();
    let (v, _) = min_tdcf(&[1.0, 0.9], &[-1.0, -0.9], &p, &asv()).unwrap();
    assert_eq!(v, 0.0);
    let (c1, c2) = p.tandem_constants(&asv()).unwrap();
    let accept_all = c2 / c1.min(c2);
    assert!(accept_all >= 1.0);
    let (v, _) = min_tdcf(&[0.0, 0.0], &[0.0, 0.0], &p, &asv()).unwrap();
    assert!(v <= accept_all && v <= 1.0 + 1e-12);
    let degenerate = AsvOperatingPoint {
        p_miss_spoof: 1.0,
        ..asv()
    };
    assert!(min_tdcf(&[1.0], &[0.0], &p, &degenerate).is_err());
    assert!(TdcfParams { pi_spoof: 0.5, ..p }.validate().is_err());
}

#[test]
fn asv_operating_point_from_scores() {
    let op = asv_operating_point(&[2.0, 3.0, 4.0], &[-2.0, -3.0, -4.0], &[1.0, -1.0]).unwrap();
    assert_eq!((op.p_miss, op.p_fa), (0.0, 0.0));
    assert!(op.p_miss_spoof >= 0.0 && op.p_miss_spoof <= 1.0);
    assert!(asv_operating_point(&[1.0], &[0.0], &[]).is_err());
}

#[test]
fn accuracy_and_summary() {
    let (acc, m) = accuracy_and_confusion(&[0, 1, 1, 2], &[0, 1, 2, 2], 3).unwrap();
    assert_eq!(acc, 0.75);
    assert_eq!(m[[2, 1]], 1);
    assert!(accuracy_and_confusion(&[3], &[0], 3).is_err());
    let s = Summary::compute(&[1.0, 0.9], &[-1.0, -0.9], &TdcfParams::default(), &asv()).unwrap();
    assert!(s.to_text().starts_with("EER 0.00%\n"));
}

#[test]
fn files_roundtrip_and_reject_garbage() {
    let dir = tempfile::tempdir().unwrap();
    let scores = ScoreFile {
        config_hash: Some(0xABC),
        entries: vec![("a".into(), 0.5), ("b".into(), -0.25)],
    };
    let sp = dir.path().join("s.txt");
    write_scores(&sp, &scores).unwrap();
    let text = std::fs::read_to_string(&sp).unwrap();
    assert!(text.contains("a 0.500000\n") && text.contains("b -0.250000\n"));
    assert_eq!(read_scores(&sp).unwrap(), scores);
    let kp = dir.path().join("k.txt");
    write_keys(&kp, &[("a".into(), Key::Bonafide), ("b".into(), Key::Spoof)]).unwrap();
    let keys = read_keys(&kp).unwrap();
    assert_eq!(
        scores.split(&keys, Key::Bonafide, Key::Spoof).unwrap(),
        (vec![0.5], vec![-0.25])
    );
    std::fs::write(&sp, "a notanumber\n").unwrap();
    assert!(read_scores(&sp).is_err());
    std::fs::write(&kp, "a maybe\n").unwrap();
    assert!(read_keys(&kp).is_err());
}

fn score_sets() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (
        prop::collection::vec(-5.0f64..5.0, 1..60),
        prop::collection::vec(-5.0f64..5.0, 1..60),
    )
}

proptest! {
    #[test]
    fn eer_bounded_and_matches_oracle((pos, neg) in score_sets()) {
        let e = eer(&pos, &neg).unwrap().0;
        prop_assert!((0.0..=1.0).contains(&e));
        prop_assert_eq!(e, brute_eer(&pos, &neg));
    }

    #[test]
    fn monotone_transforms_preserve_metrics((pos, neg) in score_sets(), a in 0.1f64..5.0, b in -3.0f64..3.0) {
        let f = |v: &[f64]| v.iter().map(|x| (a * x + b).tanh() * 0.5 + 3.0 * x.atan()).collect::<Vec<_>>();
        let (e1, e2) = (eer(&pos, &neg).unwrap().0, eer(&f(&pos), &f(&neg)).unwrap().0);
        prop_assert!((e1 - e2).abs() < 1e-12);
        let p = TdcfParams::default();
        let t1 = min_tdcf(&pos, &neg, &p, &asv()).unwrap().0;
        let t2 = min_tdcf(&f(&pos), &f(&neg), &p, &asv()).unwrap().0;
        prop_assert!((t1 - t2).abs() < 1e-12);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&t1));
    }

    #[test]
    fn new_top_bonafide_never_raises_eer((pos, neg) in score_sets()) {
        let top = pos.iter().chain(&neg).cloned().fold(f64::MIN, f64::max) + 1.0;
        let mut more = pos.clone();
        more.push(top);
        prop_assert!(eer(&more, &neg).unwrap().0 <= eer(&pos, &neg).unwrap().0 + 1e-12);
    }
}
