//! Detection metrics: EER, normalized minimum tandem detection cost,
//! the simulated ASV operating point, DET points and accuracy.

mod files;

use std::fmt::Write as _;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

pub use files::{read_keys, read_scores, write_keys, write_scores, Key, ScoreFile};

use crate::error::{Error, Result};

/// Error rates at one threshold. Scores `>= threshold` are accepted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetPoint {
    pub threshold: f64,
    /// Fraction of negatives accepted.
    pub far: f64,
    /// Fraction of positives rejected.
    pub frr: f64,
}

fn check_scores(pos: &[f64], neg: &[f64]) -> Result<()> {
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::data(format!(
            "metric needs both classes: {} positive and {} negative scores",
            pos.len(),
            neg.len()
        )));
    }
    if pos.iter().chain(neg).any(|s| !s.is_finite()) {
        return Err(Error::data("non-finite score"));
    }
    Ok(())
}

fn sorted(v: &[f64]) -> Vec<f64> {
    let mut v = v.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Error rates at every distinct score, ascending, followed by `+inf`
/// (everything rejected).
pub fn det_points(pos: &[f64], neg: &[f64]) -> Result<Vec<DetPoint>> {
    check_scores(pos, neg)?;
    let (p, n) = (sorted(pos), sorted(neg));
    let mut thresholds: Vec<f64> = p.iter().chain(&n).copied().collect();
    thresholds.sort_by(f64::total_cmp);
    thresholds.dedup();
    thresholds.push(f64::INFINITY);
    let (np, nn) = (p.len() as f64, n.len() as f64);
    let (mut ip, mut in_) = (0, 0);
    Ok(thresholds
        .into_iter()
        .map(|t| {
            while ip < p.len() && p[ip] < t {
                ip += 1;
            }
            while in_ < n.len() && n[in_] < t {
                in_ += 1;
            }
            DetPoint {
                threshold: t,
                far: (n.len() - in_) as f64 / nn,
                frr: ip as f64 / np,
            }
        })
        .collect())
}

/// Locates the FAR/FRR crossing on an ascending threshold sweep, linearly
/// interpolating between the two points that bracket it.
pub fn crossing(points: &[DetPoint]) -> (f64, f64) {
    let i = points
        .iter()
        .position(|p| p.frr >= p.far)
        .expect("the +inf point has frr = 1 >= far = 0");
    let b = points[i];
    if b.frr == b.far || i == 0 {
        return (b.far, b.threshold);
    }
    let a = points[i - 1];
    let (da, db) = (a.frr - a.far, b.frr - b.far);
    let alpha = -da / (db - da);
    let eer = a.far + alpha * (b.far - a.far);
    let threshold = if b.threshold.is_finite() {
        a.threshold + alpha * (b.threshold - a.threshold)
    } else {
        a.threshold
    };
    (eer, threshold)
}

/// Equal error rate and its threshold; `pos` are bona fide (or target)
/// scores, `neg` spoof (or non-target) scores.
pub fn eer(pos: &[f64], neg: &[f64]) -> Result<(f64, f64)> {
    Ok(crossing(&det_points(pos, neg)?))
}

/// Tandem cost parameters. Defaults follow the ASVspoof 2019 convention.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TdcfParams {
    pub pi_tar: f64,
    pub pi_non: f64,
    pub pi_spoof: f64,
    pub c_miss_asv: f64,
    pub c_fa_asv: f64,
    pub c_miss_cm: f64,
    pub c_fa_cm: f64,
}

impl Default for TdcfParams {
    fn default() -> Self {
        Self {
            pi_tar: 0.9405,
            pi_non: 0.0095,
            pi_spoof: 0.05,
            c_miss_asv: 1.0,
            c_fa_asv: 10.0,
            c_miss_cm: 1.0,
            c_fa_cm: 10.0,
        }
    }
}

impl TdcfParams {
    pub fn validate(&self) -> Result<()> {
        let priors = [self.pi_tar, self.pi_non, self.pi_spoof];
        if priors.iter().any(|p| !(*p > 0.0)) || (priors.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::config("tDCF priors must be positive and sum to 1"));
        }
        let costs = [self.c_miss_asv, self.c_fa_asv, self.c_miss_cm, self.c_fa_cm];
        if costs.iter().any(|c| !(*c > 0.0)) {
            return Err(Error::config("tDCF costs must be positive"));
        }
        Ok(())
    }

    /// `(C1, C2)` for an ASV operating point.
    pub fn tandem_constants(&self, asv: &AsvOperatingPoint) -> Result<(f64, f64)> {
        self.validate()?;
        asv.validate()?;
        let c1 = self.pi_tar * (self.c_miss_cm - self.c_miss_asv * asv.p_miss) - self.pi_non * self.c_fa_asv * asv.p_fa;
        let c2 = self.c_fa_cm * self.pi_spoof * (1.0 - asv.p_miss_spoof);
        if !(c1 > 0.0) || !(c2 > 0.0) {
            return Err(Error::DegenerateTandem { c1, c2 });
        }
        Ok((c1, c2))
    }
}

/// ASV error rates at its target/non-target EER threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsvOperatingPoint {
    pub threshold: f64,
    pub p_miss: f64,
    pub p_fa: f64,
    /// Fraction of spoof trials the ASV rejects.
    pub p_miss_spoof: f64,
}

impl AsvOperatingPoint {
    pub fn validate(&self) -> Result<()> {
        let rates = [self.p_miss, self.p_fa, self.p_miss_spoof];
        if rates.iter().any(|r| !(0.0..=1.0).contains(r)) {
            return Err(Error::config("ASV error rates must lie in [0, 1]"));
        }
        Ok(())
    }
}

pub fn asv_operating_point(target: &[f64], nontarget: &[f64], spoof: &[f64]) -> Result<AsvOperatingPoint> {
    if spoof.is_empty() {
        return Err(Error::data("ASV scores contain no spoof trials"));
    }
    let (_, threshold) = eer(target, nontarget)?;
    let below = |v: &[f64]| v.iter().filter(|&&s| s < threshold).count() as f64 / v.len() as f64;
    Ok(AsvOperatingPoint {
        threshold,
        p_miss: below(target),
        p_fa: 1.0 - below(nontarget),
        p_miss_spoof: below(spoof),
    })
}

/// Normalized minimum tDCF over all CM thresholds and the threshold that
/// attains it. `bona` and `spoof` are CM scores.
pub fn min_tdcf(bona: &[f64], spoof: &[f64], params: &TdcfParams, asv: &AsvOperatingPoint) -> Result<(f64, f64)> {
    let (c1, c2) = params.tandem_constants(asv)?;
    let norm = c1.min(c2);
    let mut best = (f64::INFINITY, f64::NAN);
    for p in det_points(bona, spoof)? {
        let cost = (c1 * p.frr + c2 * p.far) / norm;
        if cost < best.0 {
            best = (cost, p.threshold);
        }
    }
    Ok(best)
}

/// Multi-class accuracy and the `labels x predictions` count matrix.
pub fn accuracy_and_confusion(pred: &[usize], labels: &[usize], n_classes: usize) -> Result<(f64, Array2<usize>)> {
    if pred.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: labels.len(),
            got: pred.len(),
        });
    }
    if pred.is_empty() {
        return Err(Error::data("no predictions"));
    }
    let mut m = Array2::zeros((n_classes, n_classes));
    for (&p, &l) in pred.iter().zip(labels) {
        if p >= n_classes || l >= n_classes {
            return Err(Error::data(format!("class index out of range {n_classes}")));
        }
        m[[l, p]] += 1;
    }
    let correct = (0..n_classes).map(|i| m[[i, i]]).sum::<usize>();
    Ok((correct as f64 / pred.len() as f64, m))
}

/// Evaluation outcome for one CM score set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub eer: f64,
    pub eer_threshold: f64,
    pub min_tdcf: f64,
    pub tdcf_threshold: f64,
    pub n_bonafide: usize,
    pub n_spoof: usize,
}

impl Summary {
    pub fn compute(bona: &[f64], spoof: &[f64], params: &TdcfParams, asv: &AsvOperatingPoint) -> Result<Self> {
        let (eer, eer_threshold) = eer(bona, spoof)?;
        let (min_tdcf, tdcf_threshold) = min_tdcf(bona, spoof, params, asv)?;
        Ok(Self {
            eer,
            eer_threshold,
            min_tdcf,
            tdcf_threshold,
            n_bonafide: bona.len(),
            n_spoof: spoof.len(),
        })
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "EER {:.2}%", 100.0 * self.eer);
        let _ = writeln!(s, "EER threshold {:.6}", self.eer_threshold);
        let _ = writeln!(s, "min-tDCF {:.4}", self.min_tdcf);
        let _ = writeln!(s, "min-tDCF threshold {:.6}", self.tdcf_threshold);
        let _ = writeln!(s, "trials {} bonafide {} spoof", self.n_bonafide, self.n_spoof);
        s
    }
}
