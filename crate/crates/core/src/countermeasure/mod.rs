//! CNN regression countermeasure: Gaussian noise, batch norm, three
//! same-padded Conv1D + max-pool stages, a single tanh output. Bona fide
//! utterances train towards +1, spoofed ones towards -1.

use std::path::Path;

use ndarray::{Array2, Array3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{write_scores, ScoreFile};
use crate::nnet::{
    train, Init, InputShape, LayerSpec, Loss, Network, Targets, TensorDataset, TrainConfig, TrainReport,
};

pub const BONAFIDE_TARGET: f32 = 1.0;
pub const SPOOF_TARGET: f32 = -1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CmModelConfig {
    /// Standard deviation of the training-time input noise; 0 disables it.
    pub noise_std: f64,
    pub conv_layers: usize,
    pub filters: usize,
    pub kernel: usize,
    pub pool: usize,
    /// L2 coefficient on the convolution kernels.
    pub l2: f64,
    /// Oversample the minority class to balance training batches.
    pub balance_classes: bool,
}

impl Default for CmModelConfig {
    fn default() -> Self {
        Self {
            noise_std: 0.001,
            conv_layers: 3,
            filters: 32,
            kernel: 3,
            pool: 2,
            l2: 1e-4,
            balance_classes: false,
        }
    }
}

impl CmModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.conv_layers == 0 || self.filters == 0 || self.kernel == 0 || self.pool == 0 {
            return Err(Error::config("countermeasure layer sizes must be positive"));
        }
        if !(self.noise_std >= 0.0) || !(self.l2 >= 0.0) {
            return Err(Error::config("noise_std and l2 must be non-negative"));
        }
        Ok(())
    }

    /// Shortest input that survives every pooling stage.
    pub fn min_input_len(&self) -> usize {
        self.pool.pow(self.conv_layers as u32)
    }

    /// `gaussian_noise -> batch_norm -> n x (conv1d -> max_pool) -> flatten
    /// -> dense(1) -> tanh`.
    pub fn specs(&self, input_len: usize) -> Result<Vec<LayerSpec>> {
        self.validate()?;
        if input_len < self.min_input_len() {
            return Err(Error::InsufficientSamples {
                needed: self.min_input_len(),
                got: input_len,
            });
        }
        let mut specs = vec![
            LayerSpec::GaussianNoise { std: self.noise_std },
            LayerSpec::batch_norm(1),
        ];
        let mut channels = 1;
        let mut len = input_len;
        for _ in 0..self.conv_layers {
            specs.push(LayerSpec::Conv1d {
                in_channels: channels,
                filters: self.filters,
                kernel: self.kernel,
                l2: self.l2,
            });
            specs.push(LayerSpec::MaxPool1d {
                pool: self.pool,
                stride: self.pool,
            });
            channels = self.filters;
            len = (len - self.pool) / self.pool + 1;
        }
        specs.push(LayerSpec::Flatten);
        specs.push(LayerSpec::dense(len * channels, 1));
        specs.push(LayerSpec::Tanh);
        Ok(specs)
    }

    /// Width of the flattened convolution output.
    pub fn flatten_len(&self, input_len: usize) -> Result<usize> {
        let specs = self.specs(input_len)?;
        match &specs[specs.len() - 2] {
            LayerSpec::Dense { inputs, .. } => Ok(*inputs),
            _ => unreachable!("dense precedes tanh"),
        }
    }
}

pub fn build_cm(cfg: &CmModelConfig, input_len: usize, seed: u64) -> Result<Network<f32>> {
    Network::with_init(
        cfg.specs(input_len)?,
        InputShape {
            len: Some(input_len),
            channels: 1,
        },
        seed,
        Init::Glorot,
    )
}

fn common_len(vectors: &[Vec<f32>]) -> Result<usize> {
    let len = vectors
        .first()
        .ok_or_else(|| Error::data("empty countermeasure training set"))?
        .len();
    if let Some(bad) = vectors.iter().find(|v| v.len() != len) {
        return Err(Error::DimensionMismatch {
            expected: len,
            got: bad.len(),
        });
    }
    Ok(len)
}

fn to_tensor(vectors: &[&Vec<f32>], len: usize) -> Array3<f32> {
    let flat: Vec<f32> = vectors.iter().flat_map(|v| v.iter().copied()).collect();
    Array3::from_shape_vec((vectors.len(), len, 1), flat).expect("sized")
}

/// Builds and trains a countermeasure with MSE towards +1 (bona fide) and
/// -1 (spoof). The loss in `train_cfg` is overridden with MSE.
pub fn train_cm(
    vectors: &[Vec<f32>],
    bonafide: &[bool],
    model: &CmModelConfig,
    train_cfg: &TrainConfig,
) -> Result<(Network<f32>, TrainReport)> {
    if vectors.len() != bonafide.len() {
        return Err(Error::DimensionMismatch {
            expected: vectors.len(),
            got: bonafide.len(),
        });
    }
    let len = common_len(vectors)?;
    let mut idx: Vec<usize> = (0..vectors.len()).collect();
    if model.balance_classes {
        let n_bona = bonafide.iter().filter(|&&b| b).count();
        let n_spoof = bonafide.len() - n_bona;
        if n_bona > 0 && n_spoof > 0 {
            let minority = n_bona < n_spoof;
            let pool: Vec<usize> = (0..vectors.len()).filter(|&i| bonafide[i] == minority).collect();
            let deficit = n_bona.max(n_spoof) - n_bona.min(n_spoof);
            idx.extend(pool.iter().cycle().take(deficit));
        }
    }
    let selected: Vec<&Vec<f32>> = idx.iter().map(|&i| &vectors[i]).collect();
    let targets: Vec<f32> = idx
        .iter()
        .map(|&i| if bonafide[i] { BONAFIDE_TARGET } else { SPOOF_TARGET })
        .collect();
    fit(&selected, targets, len, model, train_cfg)
}

/// Trains on explicit real-valued targets; used to probe score orientation.
pub fn train_cm_targets(
    vectors: &[Vec<f32>],
    targets: &[f32],
    model: &CmModelConfig,
    train_cfg: &TrainConfig,
) -> Result<(Network<f32>, TrainReport)> {
    if vectors.len() != targets.len() {
        return Err(Error::DimensionMismatch {
            expected: vectors.len(),
            got: targets.len(),
        });
    }
    let len = common_len(vectors)?;
    let refs: Vec<&Vec<f32>> = vectors.iter().collect();
    fit(&refs, targets.to_vec(), len, model, train_cfg)
}

fn fit(
    vectors: &[&Vec<f32>],
    targets: Vec<f32>,
    len: usize,
    model: &CmModelConfig,
    train_cfg: &TrainConfig,
) -> Result<(Network<f32>, TrainReport)> {
    let t = Array2::from_shape_vec((targets.len(), 1), targets).expect("sized");
    let data = TensorDataset::new(to_tensor(vectors, len), Targets::Values(t))?;
    let mut net = build_cm(model, len, train_cfg.seed)?;
    let mut cfg = train_cfg.clone();
    cfg.loss = Loss::Mse;
    let report = train(&mut net, &data, &cfg)?;
    Ok((net, report))
}

fn input_len(net: &Network<f32>) -> Result<usize> {
    net.input_shape()
        .len
        .ok_or_else(|| Error::data("countermeasure checkpoint has no fixed input length"))
}

/// Network output with the final tanh evaluated in f64, so scores stay
/// strictly inside (-1, 1) where f32 would round to +-1.
fn predict_scores(net: &Network<f32>, x: &Array3<f32>) -> Result<Vec<f64>> {
    let n = net.layers().len();
    if net.specs().last() != Some(&LayerSpec::Tanh) {
        return Ok(net.predict(x)?.iter().map(|&v| v as f64).collect());
    }
    Ok(net
        .predict_prefix(x, n - 1)?
        .iter()
        .map(|&v| (v as f64).tanh())
        .collect())
}

/// Tanh-bounded score of one vector; higher means more bona fide.
pub fn score(net: &Network<f32>, vector: &[f32]) -> Result<f64> {
    let len = input_len(net)?;
    if vector.len() != len {
        return Err(Error::DimensionMismatch {
            expected: len,
            got: vector.len(),
        });
    }
    let x = Array3::from_shape_vec((1, len, 1), vector.to_vec()).expect("sized");
    Ok(predict_scores(net, &x)?[0])
}

/// Parallel scoring in fixed-size batches; output order follows the input.
pub fn score_batch(net: &Network<f32>, vectors: &[Vec<f32>]) -> Result<Vec<f64>> {
    const BATCH: usize = 256;
    let len = input_len(net)?;
    if let Some(bad) = vectors.iter().find(|v| v.len() != len) {
        return Err(Error::DimensionMismatch {
            expected: len,
            got: bad.len(),
        });
    }
    let parts: Vec<Vec<f64>> = vectors
        .par_chunks(BATCH)
        .map(|chunk| {
            let refs: Vec<&Vec<f32>> = chunk.iter().collect();
            predict_scores(net, &to_tensor(&refs, len))
        })
        .collect::<Result<_>>()?;
    Ok(parts.concat())
}

/// Scores `(id, vector)` pairs and writes a challenge-style score file.
pub fn write_score_file(
    net: &Network<f32>,
    items: &[(String, Vec<f32>)],
    config_hash: Option<u64>,
    path: &Path,
) -> Result<ScoreFile> {
    let vectors: Vec<Vec<f32>> = items.iter().map(|(_, v)| v.clone()).collect();
    let scores = score_batch(net, &vectors)?;
    let file = ScoreFile {
        config_hash,
        entries: items.iter().map(|(id, _)| id.clone()).zip(scores).collect(),
    };
    write_scores(path, &file)?;
    Ok(file)
}
