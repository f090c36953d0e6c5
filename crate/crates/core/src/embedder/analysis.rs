use std::collections::BTreeMap;
use std::fmt::Write as _;

use ndarray::Array1;
use rand::Rng;

use crate::error::{Error, Result};
use crate::labels::{AttackId, EnvId, JointLabel};
use crate::metrics::eer;
use crate::seeds;

/// Multiplier applied to the reduced embedding before concatenation.
pub const EMBEDDING_SCALE: f64 = 0.1;

pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Verification over class enrolments.
#[derive(Debug, Clone, PartialEq)]
pub struct Verification {
    pub eer: f64,
    pub n_target: usize,
    pub n_nontarget: usize,
}

/// Each test vector yields one target trial against the enrolment of its
/// own class and one non-target trial against a seeded random other class.
/// Scores are cosine similarities.
pub fn verification_eer(
    enrolment: &[(String, Array1<f64>)],
    tests: &[(String, Array1<f64>)],
    seed: u64,
) -> Result<Verification> {
    if enrolment.len() < 2 {
        return Err(Error::data("verification needs at least two enrolled classes"));
    }
    let index: BTreeMap<&str, usize> = enrolment
        .iter()
        .enumerate()
        .map(|(i, (l, _))| (l.as_str(), i))
        .collect();
    let mut target = Vec::new();
    let mut nontarget = Vec::new();
    for (i, (label, v)) in tests.iter().enumerate() {
        let Some(&own) = index.get(label.as_str()) else {
            continue;
        };
        let v = v.as_slice().expect("contiguous");
        target.push(cosine(enrolment[own].1.as_slice().expect("contiguous"), v));
        let mut rng = seeds::rng(seed, &[0x7E51, i as u64]);
        let mut other = rng.random_range(0..enrolment.len() - 1);
        if other >= own {
            other += 1;
        }
        nontarget.push(cosine(enrolment[other].1.as_slice().expect("contiguous"), v));
    }
    if target.is_empty() {
        return Err(Error::data("no test vector belongs to an enrolled class"));
    }
    Ok(Verification {
        eer: eer(&target, &nontarget)?.0,
        n_target: target.len(),
        n_nontarget: nontarget.len(),
    })
}

/// How joint labels are grouped for the confusion analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Grouping {
    /// Ten groups: bona fide and the nine replay configurations.
    Attack,
    /// Twenty-seven acoustic environments.
    Environment,
}

impl Grouping {
    pub fn names(self) -> Vec<String> {
        match self {
            Grouping::Attack => AttackId::all().iter().map(ToString::to_string).collect(),
            Grouping::Environment => EnvId::all().iter().map(ToString::to_string).collect(),
        }
    }

    pub fn group(self, l: JointLabel) -> usize {
        match self {
            Grouping::Attack => l.attack.index(),
            Grouping::Environment => l.env.index(),
        }
    }
}

/// Cosine similarity between group means of test vectors (rows) and group
/// means of reference vectors (columns).
#[derive(Debug, Clone, PartialEq)]
pub struct Confusion {
    pub grouping: Grouping,
    pub names: Vec<String>,
    pub matrix: Vec<Vec<f64>>,
}

fn group_means(items: &[(JointLabel, Array1<f64>)], grouping: Grouping, what: &str) -> Result<Vec<Array1<f64>>> {
    let names = grouping.names();
    let dim = items.first().map_or(0, |(_, v)| v.len());
    let mut sums = vec![Array1::<f64>::zeros(dim); names.len()];
    let mut counts = vec![0usize; names.len()];
    for (l, v) in items {
        if v.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: v.len(),
            });
        }
        let g = grouping.group(*l);
        sums[g] += v;
        counts[g] += 1;
    }
    let missing: Vec<String> = names
        .iter()
        .zip(&counts)
        .filter(|(_, &c)| c == 0)
        .map(|(n, _)| format!("{what}:{n}"))
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingClasses(missing));
    }
    Ok(sums.into_iter().zip(counts).map(|(s, c)| s / c as f64).collect())
}

pub fn confusion_analysis(
    reference: &[(JointLabel, Array1<f64>)],
    test: &[(JointLabel, Array1<f64>)],
    grouping: Grouping,
) -> Result<Confusion> {
    let refs = group_means(reference, grouping, "reference")?;
    let tests = group_means(test, grouping, "test")?;
    if refs[0].len() != tests[0].len() {
        return Err(Error::DimensionMismatch {
            expected: refs[0].len(),
            got: tests[0].len(),
        });
    }
    let matrix = tests
        .iter()
        .map(|t| {
            refs.iter()
                .map(|r| cosine(t.as_slice().expect("contiguous"), r.as_slice().expect("contiguous")))
                .collect()
        })
        .collect();
    Ok(Confusion {
        grouping,
        names: grouping.names(),
        matrix,
    })
}

impl Confusion {
    /// Whitespace-separated grid with a header row; values to 3 decimals.
    pub fn to_text(&self) -> String {
        let mut s = String::from("test\\ref");
        for n in &self.names {
            let _ = write!(s, " {n:>6}");
        }
        s.push('\n');
        for (n, row) in self.names.iter().zip(&self.matrix) {
            let _ = write!(s, "{n:<8}");
            for v in row {
                let _ = write!(s, " {v:>6.3}");
            }
            s.push('\n');
        }
        s
    }

    /// Mean similarity between distinct replay configurations that share
    /// the device quality but differ in attacker distance, and the same for
    /// pairs sharing the distance but differing in quality. Attack grouping
    /// only.
    pub fn quality_vs_distance(&self) -> Result<QualityVsDistance> {
        if self.grouping != Grouping::Attack {
            return Err(Error::config("quality/distance grouping needs the attack confusion"));
        }
        let attacks = AttackId::all();
        let (mut same_q, mut same_d) = (Vec::new(), Vec::new());
        for (i, a) in attacks.iter().enumerate() {
            for (j, b) in attacks.iter().enumerate() {
                if let (
                    AttackId::Replay {
                        attacker_distance: da,
                        device_quality: qa,
                    },
                    AttackId::Replay {
                        attacker_distance: db,
                        device_quality: qb,
                    },
                ) = (a, b)
                {
                    if qa == qb && da != db {
                        same_q.push(self.matrix[i][j]);
                    } else if da == db && qa != qb {
                        same_d.push(self.matrix[i][j]);
                    }
                }
            }
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        Ok(QualityVsDistance {
            same_quality: mean(&same_q),
            same_distance: mean(&same_d),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QualityVsDistance {
    /// Mean similarity of same-quality, different-distance pairs.
    pub same_quality: f64,
    /// Mean similarity of same-distance, different-quality pairs.
    pub same_distance: f64,
}

impl QualityVsDistance {
    /// True when confusion groups by device quality more than by distance.
    pub fn groups_by_quality(&self) -> bool {
        self.same_quality > self.same_distance
    }
}
