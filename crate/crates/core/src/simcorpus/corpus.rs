use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::signal::{apply_attack, apply_environment, synth_source, SOURCE_PEAK};
use super::SimConfig;
use crate::dsp::wav::{quantize, write_wav};
use crate::dsp::Waveform;
use crate::error::{Error, Result};
use crate::labels::{AttackId, JointLabel, N_ATTACKS, N_ENVS, N_JOINT};
use crate::metrics::{Key, ScoreFile};
use crate::seeds;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
    Eval,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Dev, Split::Eval];

    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Eval => "eval",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Split::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| Error::data(format!("unknown split {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestRecord {
    pub utt_id: String,
    /// WAV path, relative to the manifest's directory unless absolute.
    pub path: PathBuf,
    pub split: Split,
    pub label: JointLabel,
    pub seed: u64,
}

/// `utt_id path split env_id attack_id seed` per line.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Manifest {
    pub records: Vec<ManifestRecord>,
}

impl Manifest {
    pub fn to_text(&self) -> String {
        self.records
            .iter()
            .map(|r| {
                format!(
                    "{} {} {} {} {} {}\n",
                    r.utt_id,
                    r.path.display(),
                    r.split,
                    r.label.env,
                    r.label.attack,
                    r.seed
                )
            })
            .collect()
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let bad = |line: usize, detail: String| Error::Format {
            what: "manifest",
            path: path.to_path_buf(),
            detail: format!("line {line}: {detail}"),
        };
        let mut records = Vec::new();
        let mut seen = HashSet::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 6 {
                return Err(bad(n + 1, format!("expected 6 fields, got {}", f.len())));
            }
            let label = JointLabel {
                env: f[3].parse().map_err(|e: Error| bad(n + 1, e.to_string()))?,
                attack: f[4].parse().map_err(|e: Error| bad(n + 1, e.to_string()))?,
            };
            let record = ManifestRecord {
                utt_id: f[0].to_string(),
                path: PathBuf::from(f[1]),
                split: f[2].parse().map_err(|e: Error| bad(n + 1, e.to_string()))?,
                label,
                seed: f[5]
                    .parse()
                    .map_err(|_| bad(n + 1, format!("invalid seed {:?}", f[5])))?,
            };
            if !seen.insert(record.utt_id.clone()) {
                return Err(bad(n + 1, format!("duplicate utterance id {}", record.utt_id)));
            }
            records.push(record);
        }
        Ok(Manifest { records })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn split(&self, split: Split) -> Vec<&ManifestRecord> {
        self.records.iter().filter(|r| r.split == split).collect()
    }

    /// Absolute WAV path given the manifest location.
    pub fn resolve(manifest_path: &Path, record: &ManifestRecord) -> PathBuf {
        if record.path.is_absolute() {
            record.path.clone()
        } else {
            manifest_path.parent().unwrap_or(Path::new(".")).join(&record.path)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusCounts {
    pub train: usize,
    pub dev: usize,
    pub eval: usize,
}

impl Default for CorpusCounts {
    fn default() -> Self {
        Self {
            train: 2700,
            dev: 900,
            eval: 900,
        }
    }
}

impl CorpusCounts {
    pub fn get(&self, split: Split) -> usize {
        match split {
            Split::Train => self.train,
            Split::Dev => self.dev,
            Split::Eval => self.eval,
        }
    }
}

/// Source, environment and (for spoofs) replay chain of one utterance,
/// normalized to the source peak level.
pub fn render_utterance(cfg: &SimConfig, label: JointLabel, seed: u64) -> Result<Waveform<f64>> {
    let source = synth_source(seeds::derive(seed, &[1]), cfg.duration, cfg.sample_rate)?;
    let env = cfg.env_params(label.env);
    let live = apply_environment(&source, &env, seeds::derive(seed, &[2]))?;
    let out = match cfg.attack_params(label.attack) {
        None => live,
        Some(attack) => apply_attack(&live, &attack, &env, seeds::derive(seed, &[3]))?,
    };
    let peak = out.peak();
    if peak > 0.0 {
        let sr = out.sample_rate();
        return Waveform::new(
            out.into_samples().into_iter().map(|v| v * SOURCE_PEAK / peak).collect(),
            sr,
        );
    }
    Ok(out)
}

/// Balanced label list: joint classes cycle in index order, then shuffle.
pub fn assign_labels(n: usize, seed: u64, split: Split) -> Vec<JointLabel> {
    let all = JointLabel::all();
    let mut labels: Vec<JointLabel> = (0..n).map(|i| all[i % N_JOINT]).collect();
    labels.shuffle(&mut seeds::rng(seed, &[0xC0, split as u64]));
    labels
}

/// Renders every split into `out_dir/wav/` and writes
/// `out_dir/manifest.txt`. Each utterance's RNG stream depends only on the
/// corpus seed, its split and its index.
pub fn generate_corpus(cfg: &SimConfig, counts: &CorpusCounts, seed: u64, out_dir: &Path) -> Result<Manifest> {
    cfg.validate()?;
    assert_eq!(N_ENVS * N_ATTACKS, N_JOINT);
    if Split::ALL.iter().any(|&s| counts.get(s) == 0) {
        return Err(Error::config("every split needs at least one utterance"));
    }
    let wav_dir = out_dir.join("wav");
    std::fs::create_dir_all(&wav_dir).map_err(|e| Error::io(&wav_dir, e))?;
    let mut records = Vec::new();
    for split in Split::ALL {
        for (i, label) in assign_labels(counts.get(split), seed, split).into_iter().enumerate() {
            let utt_id = format!("{split}_{i:06}");
            records.push(ManifestRecord {
                path: PathBuf::from("wav").join(format!("{utt_id}.wav")),
                utt_id,
                split,
                label,
                seed: seeds::derive(seed, &[0x77, split as u64, i as u64]),
            });
        }
    }
    records.par_iter().try_for_each(|r| {
        let w = render_utterance(cfg, r.label, r.seed)?;
        let q = Waveform::new(
            w.samples().iter().map(|&v| quantize(v) as f64 / 32768.0).collect(),
            w.sample_rate(),
        )?;
        write_wav(&out_dir.join(&r.path), &q)
    })?;
    let manifest = Manifest { records };
    let path = out_dir.join("manifest.txt");
    manifest.write(&path)?;
    Ok(manifest)
}

/// Simulated ASV scores with a 3-class key (plus `spoof`).
#[derive(Debug, Clone, PartialEq)]
pub struct AsvTrials {
    pub scores: ScoreFile,
    pub keys: Vec<(String, Key)>,
}

/// Each bona fide utterance yields a target trial `<utt>-tgt` and a
/// non-target trial `<utt>-non`; each spoofed utterance yields one spoof
/// trial `<utt>` whose mean depends on the replay device quality.
pub fn simulate_asv_scores(records: &[&ManifestRecord], cfg: &SimConfig, seed: u64) -> Result<AsvTrials> {
    if records.is_empty() {
        return Err(Error::data("empty manifest"));
    }
    let normal = |mean: f64| Normal::new(mean, cfg.asv_std).map_err(|e| Error::config(e.to_string()));
    let (tar, non) = (normal(cfg.asv_target_mean)?, normal(cfg.asv_nontarget_mean)?);
    let spoof = [
        normal(cfg.asv_spoof_means[0])?,
        normal(cfg.asv_spoof_means[1])?,
        normal(cfg.asv_spoof_means[2])?,
    ];
    let mut entries = Vec::new();
    let mut keys = Vec::new();
    for (i, r) in records.iter().enumerate() {
        let mut rng = seeds::rng(seed, &[0xA5F, i as u64]);
        match r.label.attack {
            AttackId::Bonafide => {
                for (suffix, dist, key) in [("tgt", &tar, Key::Target), ("non", &non, Key::Nontarget)] {
                    let id = format!("{}-{suffix}", r.utt_id);
                    entries.push((id.clone(), dist.sample(&mut rng)));
                    keys.push((id, key));
                }
            }
            AttackId::Replay { device_quality, .. } => {
                entries.push((r.utt_id.clone(), spoof[device_quality as usize].sample(&mut rng)));
                keys.push((r.utt_id.clone(), Key::Spoof));
            }
        }
    }
    Ok(AsvTrials {
        scores: ScoreFile {
            config_hash: None,
            entries,
        },
        keys,
    })
}
