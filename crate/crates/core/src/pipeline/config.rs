use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::countermeasure::CmModelConfig;
use crate::embedder::{TdnnConfig, EMBEDDING_SCALE};
use crate::error::{Error, Result};
use crate::features::{FeatureConfig, FeatureKind, TARGET_FRAMES};
use crate::metrics::TdcfParams;
use crate::nnet::{Loss, TrainConfig};
use crate::simcorpus::{CorpusCounts, SimConfig};

/// Which blocks make up the countermeasure input vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureSection {
    pub kind: FeatureKind,
    /// Include the down-sampled signal coefficients.
    pub signal: bool,
    /// Append the scaled LDA-reduced x-vector (xEAs).
    pub embedding: bool,
    pub embedding_scale: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_coeffs: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_bands: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f_min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f_max: Option<f64>,
}

impl Default for FeatureSection {
    fn default() -> Self {
        Self {
            kind: FeatureKind::Scmc,
            signal: true,
            embedding: true,
            embedding_scale: EMBEDDING_SCALE,
            n_coeffs: None,
            n_bands: None,
            f_min: None,
            f_max: None,
        }
    }
}

impl FeatureSection {
    /// Standard front-end for `kind` with the optional overrides applied.
    pub fn feature_config(&self) -> Result<FeatureConfig> {
        let mut cfg = FeatureConfig::standard(self.kind);
        if let Some(n) = self.n_coeffs {
            cfg.n_coeffs = n;
            if self.kind != FeatureKind::Cqcc {
                cfg.n_bands = n;
            }
        }
        if let Some(b) = self.n_bands {
            cfg.n_bands = b;
        }
        if let Some(f) = self.f_min {
            cfg.f_min = f;
        }
        if let Some(f) = self.f_max {
            cfg.f_max = f;
        }
        if self.kind == FeatureKind::Cqcc && self.n_bands.is_none() {
            cfg.n_bands = cfg.cqt().n_bins();
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.signal && !self.embedding {
            return Err(Error::config("features: enable signal, embedding or both"));
        }
        if !(self.embedding_scale > 0.0) {
            return Err(Error::config("features: embedding_scale must be positive"));
        }
        if self.signal {
            self.feature_config()?;
        }
        Ok(())
    }
}

/// Optimizer and early-stopping settings of one training stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub lr: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub min_delta: f64,
    pub validation_fraction: f64,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::new(Loss::Mse, 0);
        Self {
            lr: t.lr,
            batch_size: 64,
            max_epochs: t.max_epochs,
            patience: t.patience,
            min_delta: t.min_delta,
            validation_fraction: t.validation_fraction,
        }
    }
}

impl TrainSection {
    pub fn to_train_config(&self, loss: Loss, seed: u64) -> TrainConfig {
        TrainConfig {
            lr: self.lr,
            batch_size: self.batch_size,
            max_epochs: self.max_epochs,
            patience: self.patience,
            min_delta: self.min_delta,
            validation_fraction: self.validation_fraction,
            ..TrainConfig::new(loss, seed)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LdaSection {
    pub out_dim: usize,
}

impl Default for LdaSection {
    fn default() -> Self {
        Self {
            out_dim: crate::features::EMBEDDING_DIM,
        }
    }
}

/// Complete experiment description. Serialized as TOML with one table per
/// section; every field has a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub corpus: CorpusCounts,
    pub simulator: SimConfig,
    pub features: FeatureSection,
    pub tdnn: TdnnConfig,
    pub tdnn_train: TrainSection,
    pub lda: LdaSection,
    pub cm: CmModelConfig,
    pub cm_train: TrainSection,
    pub tdcf: TdcfParams,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            corpus: CorpusCounts::default(),
            simulator: SimConfig::default(),
            features: FeatureSection::default(),
            tdnn: TdnnConfig::desk(),
            tdnn_train: TrainSection {
                max_epochs: 60,
                ..TrainSection::default()
            },
            lda: LdaSection::default(),
            cm: CmModelConfig::default(),
            cm_train: TrainSection::default(),
            tdcf: TdcfParams::default(),
        }
    }
}

/// Keys that are unset by default and so absent from the serialized form.
const OPTIONAL_KEYS: [(&str, &str); 4] = [
    ("features.n_coeffs", "standard for the kind"),
    ("features.n_bands", "standard for the kind"),
    ("features.f_min", "standard for the kind"),
    ("features.f_max", "standard for the kind"),
];

fn toml_error(e: impl std::fmt::Display) -> Error {
    Error::config(e.to_string())
}

fn digest(parts: &[(&str, String)]) -> u64 {
    let mut h = Sha256::new();
    for (name, body) in parts {
        h.update(name.as_bytes());
        h.update([0u8]);
        h.update(body.as_bytes());
        h.update([0u8]);
    }
    let out = h.finalize();
    u64::from_le_bytes(out[..8].try_into().expect("8 bytes"))
}

fn canonical<T: Serialize>(v: &T) -> String {
    toml::Value::try_from(v)
        .map(|v| v.to_string())
        .expect("config sections serialize")
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(toml_error)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str::<Self>(&text).map_err(|e| Error::config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.simulator.validate()?;
        self.features.validate()?;
        self.tdnn.validate()?;
        self.cm.validate()?;
        self.tdcf.validate()?;
        for (name, t) in [("tdnn_train", &self.tdnn_train), ("cm_train", &self.cm_train)] {
            t.to_train_config(Loss::Mse, 0)
                .validate()
                .map_err(|e| Error::config(format!("{name}: {e}")))?;
        }
        if self.lda.out_dim == 0 {
            return Err(Error::config("lda.out_dim must be positive"));
        }
        Ok(())
    }

    /// Applies a `section.key=value` override. The value is read as a TOML
    /// literal, falling back to a plain string.
    pub fn set(&mut self, assignment: &str) -> Result<()> {
        let (key, value) = assignment
            .split_once('=')
            .ok_or_else(|| Error::config(format!("override {assignment:?} is not key=value")))?;
        let (section, field) = key
            .trim()
            .split_once('.')
            .ok_or_else(|| Error::config(format!("override key {key:?} is not section.key")))?;
        let value = value.trim();
        let parsed = toml::from_str::<toml::Table>(&format!("v = {value}"))
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| toml::Value::String(value.to_string()));
        let mut root = toml::Value::try_from(&*self).map_err(toml_error)?;
        let table = root
            .get_mut(section)
            .and_then(toml::Value::as_table_mut)
            .ok_or_else(|| Error::config(format!("unknown config section {section:?}")))?;
        table.insert(field.to_string(), parsed);
        let updated: Self = root
            .try_into()
            .map_err(|e| Error::config(format!("override {key}: {e}")))?;
        *self = updated;
        Ok(())
    }

    /// Every overridable `section.key` with its current value.
    pub fn override_keys(&self) -> Vec<(String, String)> {
        let root = toml::Value::try_from(self).expect("config serializes");
        let mut out = Vec::new();
        if let Some(t) = root.as_table() {
            for (section, body) in t {
                if let Some(fields) = body.as_table() {
                    for (k, v) in fields {
                        out.push((format!("{section}.{k}"), v.to_string()));
                    }
                }
            }
        }
        for (k, note) in OPTIONAL_KEYS {
            if !out.iter().any(|(key, _)| key == k) {
                out.push((k.to_string(), format!("<{note}>")));
            }
        }
        out.sort();
        out
    }

    pub fn override_help(&self) -> String {
        let mut s = String::from("Config overrides (--set section.key=value), with defaults:\n");
        for (k, v) in self.override_keys() {
            let _ = writeln!(s, "  {k} = {v}");
        }
        s
    }

    /// Hash of the whole configuration.
    pub fn hash(&self) -> u64 {
        digest(&[("config", canonical(self))])
    }

    pub fn corpus_hash(&self) -> u64 {
        digest(&[
            ("corpus", canonical(&self.corpus)),
            ("simulator", canonical(&self.simulator)),
        ])
    }

    pub fn features_hash(&self) -> Result<u64> {
        let fc = self.features.feature_config()?;
        Ok(digest(&[
            ("upstream", format!("{:016x}", self.corpus_hash())),
            ("features", canonical(&fc)),
        ]))
    }

    pub fn xvector_hash(&self) -> u64 {
        digest(&[
            ("upstream", format!("{:016x}", self.corpus_hash())),
            ("tdnn", canonical(&self.tdnn)),
            ("tdnn_train", canonical(&self.tdnn_train)),
        ])
    }

    pub fn lda_hash(&self) -> u64 {
        digest(&[
            ("upstream", format!("{:016x}", self.xvector_hash())),
            ("lda", canonical(&self.lda)),
        ])
    }

    /// Covers everything that shapes the countermeasure and its scores.
    pub fn cm_hash(&self) -> Result<u64> {
        let mut parts = vec![
            ("corpus", format!("{:016x}", self.corpus_hash())),
            ("selection", canonical(&self.features)),
            ("cm", canonical(&self.cm)),
            ("cm_train", canonical(&self.cm_train)),
        ];
        if self.features.signal {
            parts.push(("features", format!("{:016x}", self.features_hash()?)));
        }
        if self.features.embedding {
            parts.push(("lda", format!("{:016x}", self.lda_hash())));
        }
        Ok(digest(&parts))
    }

    /// Length of the countermeasure input vector.
    pub fn vector_len(&self) -> Result<usize> {
        let mut n = 0;
        if self.features.signal {
            n += self.features.feature_config()?.n_coeffs * TARGET_FRAMES;
        }
        if self.features.embedding {
            n += self.lda.out_dim;
        }
        Ok(n)
    }

    /// Short system name such as `scmc+xeas`, `xeas` or `scmc+xeas-n`
    /// (no noise layer).
    pub fn system_name(&self) -> String {
        let mut parts = Vec::new();
        if self.features.signal {
            parts.push(self.features.kind.name());
        }
        if self.features.embedding {
            parts.push("xeas");
        }
        let mut name = parts.join("+");
        if self.cm.noise_std == 0.0 {
            name.push_str("-n");
        }
        name
    }
}
