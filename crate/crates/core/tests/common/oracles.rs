#![allow(dead_code)]

//! Exhaustive-threshold reference implementations of EER and min-tDCF.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `(threshold, far, frr)` counted directly at each distinct score and `+inf`.
pub fn brute_rates(pos: &[f64], neg: &[f64]) -> Vec<(f64, f64, f64)> {
    let mut ts: Vec<f64> = pos.iter().chain(neg).copied().collect();
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    ts.push(f64::INFINITY);
    ts.into_iter()
        .map(|t| {
            let far = neg.iter().filter(|&&s| s >= t).count() as f64 / neg.len() as f64;
            let frr = pos.iter().filter(|&&s| s < t).count() as f64 / pos.len() as f64;
            (t, far, frr)
        })
        .collect()
}

pub fn brute_eer(pos: &[f64], neg: &[f64]) -> f64 {
    let r = brute_rates(pos, neg);
    for i in 0..r.len() {
        let (_, far, frr) = r[i];
        if frr >= far {
            if frr == far || i == 0 {
                return far;
            }
            let (_, fa, fr) = r[i - 1];
            let (da, db) = (fr - fa, frr - far);
            let alpha = -da / (db - da);
            return fa + alpha * (far - fa);
        }
    }
    unreachable!()
}

pub fn brute_min_tdcf(pos: &[f64], neg: &[f64], c1: f64, c2: f64) -> f64 {
    let norm = c1.min(c2);
    brute_rates(pos, neg)
        .into_iter()
        .map(|(_, far, frr)| (c1 * frr + c2 * far) / norm)
        .fold(f64::INFINITY, f64::min)
}

/// 200-trial score set with a random class split, separation and ties.
pub fn random_trials(seed: u64) -> (Vec<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_pos = rng.random_range(20..180);
    let shift: f64 = rng.random_range(-1.0..3.0);
    let quantize = rng.random_bool(0.3);
    let mut draw = |offset: f64| {
        let v: f64 = offset + rng.random_range(-2.0..2.0) + rng.random_range(-2.0..2.0);
        if quantize {
            (v * 4.0).round() / 4.0
        } else {
            v
        }
    };
    let pos = (0..n_pos).map(|_| draw(shift)).collect();
    let neg = (0..200 - n_pos).map(|_| draw(0.0)).collect();
    (pos, neg)
}
