use std::collections::HashMap;

use ndarray::{Array2, Array3, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dsp::Waveform;
use crate::error::{Error, Result};
use crate::features::{FeatureConfig, FeatureExtractor};
use crate::metrics::accuracy_and_confusion;
use crate::nnet::{
    predict_dataset, train, InputShape, LayerSpec, Loss, Network, SequenceDataset, Targets, TrainConfig, TrainReport,
};

/// x-vector TDNN geometry and its MFCC front-end.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TdnnConfig {
    /// Output width of the five frame-level layers.
    pub frame_dims: Vec<usize>,
    /// Context offsets of the five frame-level layers.
    pub contexts: Vec<Vec<isize>>,
    /// First segment-level layer; its pre-activation output is the x-vector.
    pub embedding_dim: usize,
    /// Second segment-level layer.
    pub segment_dim: usize,
    /// Frames per random training crop.
    pub chunk_frames: usize,
    /// Per-utterance cepstral mean normalization of the MFCC input.
    pub cmn: bool,
    pub mfcc_coeffs: usize,
    pub mfcc_bands: usize,
}

impl Default for TdnnConfig {
    fn default() -> Self {
        Self::desk()
    }
}

impl TdnnConfig {
    /// Desk-scale widths with the full-size 512-dim embedding slot.
    pub fn desk() -> Self {
        Self {
            frame_dims: vec![64; 5],
            contexts: vec![vec![-2, -1, 0, 1, 2], vec![-2, 0, 2], vec![-3, 0, 3], vec![0], vec![0]],
            embedding_dim: 512,
            segment_dim: 64,
            chunk_frames: 64,
            cmn: false,
            mfcc_coeffs: 40,
            mfcc_bands: 80,
        }
    }

    /// The full-size extractor widths.
    pub fn paper() -> Self {
        Self {
            frame_dims: vec![512, 512, 512, 512, 1500],
            segment_dim: 512,
            ..Self::desk()
        }
    }

    pub fn mfcc(&self) -> FeatureConfig {
        FeatureConfig {
            n_coeffs: self.mfcc_coeffs,
            n_bands: self.mfcc_bands,
            ..FeatureConfig::xvector_mfcc()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.frame_dims.len() != 5 || self.contexts.len() != 5 {
            return Err(Error::config("the TDNN needs exactly five frame-level layers"));
        }
        if self.frame_dims.contains(&0) || self.embedding_dim == 0 || self.segment_dim == 0 {
            return Err(Error::config("TDNN layer widths must be positive"));
        }
        if self.contexts.iter().any(Vec::is_empty) {
            return Err(Error::config("every TDNN layer needs a context"));
        }
        if self.chunk_frames < self.min_frames() {
            return Err(Error::config(format!(
                "chunk of {} frames is shorter than the {} the TDNN needs",
                self.chunk_frames,
                self.min_frames()
            )));
        }
        self.mfcc().validate()
    }

    /// Frames consumed by the frame-level contexts.
    pub fn context_span(&self) -> usize {
        self.contexts
            .iter()
            .map(|c| (c.iter().max().unwrap() - c.iter().min().unwrap()) as usize)
            .sum()
    }

    /// Shortest input that leaves two frames for statistics pooling.
    pub fn min_frames(&self) -> usize {
        self.context_span() + 2
    }

    /// Affine -> ReLU -> batch norm per layer; the classifier output is
    /// left as logits for the softmax cross-entropy loss.
    pub fn specs(&self, n_classes: usize) -> Vec<LayerSpec> {
        let mut specs = Vec::new();
        let mut width = self.mfcc_coeffs;
        for (dim, ctx) in self.frame_dims.iter().zip(&self.contexts) {
            specs.push(LayerSpec::Tdnn {
                in_channels: width,
                outputs: *dim,
                offsets: ctx.clone(),
                l2: 0.0,
            });
            specs.push(LayerSpec::Relu);
            specs.push(LayerSpec::batch_norm(*dim));
            width = *dim;
        }
        specs.push(LayerSpec::StatsPool);
        width *= 2;
        for dim in [self.embedding_dim, self.segment_dim] {
            specs.push(LayerSpec::dense(width, dim));
            specs.push(LayerSpec::Relu);
            specs.push(LayerSpec::batch_norm(dim));
            width = dim;
        }
        specs.push(LayerSpec::dense(width, n_classes));
        specs
    }

    /// Number of leading layers whose output is the x-vector: the frame
    /// layers, pooling and the first segment-level affine transform.
    pub fn embedding_prefix(&self) -> usize {
        5 * 3 + 1 + 1
    }

    pub fn input_shape(&self) -> InputShape {
        InputShape {
            len: None,
            channels: self.mfcc_coeffs,
        }
    }
}

/// Frame-major `(frames, coeffs)` MFCC sequence for the TDNN.
pub fn mfcc_sequence(extractor: &FeatureExtractor<f64>, w: &Waveform<f64>, cmn: bool) -> Result<Array2<f32>> {
    let f = extractor.extract(w, "")?;
    let mut seq = f.values.t().to_owned();
    if cmn {
        let mean = seq.mean_axis(Axis(0)).expect("at least one frame");
        seq -= &mean;
    }
    Ok(seq.mapv(|v| v as f32))
}

/// A trained extractor with its training report.
#[derive(Debug, Clone)]
pub struct XvectorTraining {
    pub net: Network<f32>,
    pub report: TrainReport,
    /// Classification accuracy on the held-out validation split.
    pub val_accuracy: f64,
}

/// Trains the TDNN classifier over `classes`. Every class must have at
/// least one example.
pub fn train_xvector_extractor(
    sequences: Vec<Array2<f32>>,
    labels: &[String],
    classes: &[String],
    cfg: &TdnnConfig,
    train_cfg: &TrainConfig,
) -> Result<XvectorTraining> {
    cfg.validate()?;
    if classes.len() < 2 {
        return Err(Error::data("the x-vector extractor needs at least two classes"));
    }
    if sequences.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: sequences.len(),
            got: labels.len(),
        });
    }
    let index: HashMap<&str, usize> = classes.iter().enumerate().map(|(i, c)| (c.as_str(), i)).collect();
    let mut counts = vec![0usize; classes.len()];
    let mut ids = Vec::with_capacity(labels.len());
    for l in labels {
        let i = *index
            .get(l.as_str())
            .ok_or_else(|| Error::data(format!("label {l} is not a training class")))?;
        counts[i] += 1;
        ids.push(i);
    }
    let missing: Vec<String> = classes
        .iter()
        .zip(&counts)
        .filter(|(_, &n)| n == 0)
        .map(|(c, _)| c.clone())
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingClasses(missing));
    }
    if let Some(short) = sequences.iter().find(|s| s.nrows() < cfg.min_frames()) {
        return Err(Error::InsufficientSamples {
            needed: cfg.min_frames(),
            got: short.nrows(),
        });
    }
    let targets = Targets::Classes {
        labels: ids.clone(),
        n_classes: classes.len(),
    };
    let data = SequenceDataset::new(sequences, targets, cfg.chunk_frames)?;
    let mut net = Network::new(cfg.specs(classes.len()), cfg.input_shape(), train_cfg.seed)?;
    let mut tc = train_cfg.clone();
    tc.loss = Loss::SoftmaxCrossEntropy;
    let report = train(&mut net, &data, &tc)?;
    let logits = predict_dataset(&net, &data, &report.val_indices, tc.batch_size)?;
    let pred: Vec<usize> = logits
        .outer_iter()
        .map(|row| {
            let row = row.row(0);
            (0..row.len()).fold(0, |best, k| if row[k] > row[best] { k } else { best })
        })
        .collect();
    let truth: Vec<usize> = report.val_indices.iter().map(|&i| ids[i]).collect();
    let (val_accuracy, _) = accuracy_and_confusion(&pred, &truth, classes.len())?;
    Ok(XvectorTraining {
        net,
        report,
        val_accuracy,
    })
}

/// Pre-activation output of the first segment-level layer.
pub fn extract_xvector(net: &Network<f32>, seq: &Array2<f32>, cfg: &TdnnConfig) -> Result<Vec<f32>> {
    if seq.nrows() < cfg.min_frames() {
        return Err(Error::InsufficientSamples {
            needed: cfg.min_frames(),
            got: seq.nrows(),
        });
    }
    let x: Array3<f32> = seq.clone().insert_axis(Axis(0));
    let out = net.predict_prefix(&x, cfg.embedding_prefix())?;
    Ok(out.iter().copied().collect())
}

/// Parallel [`extract_xvector`] over many utterances; output order
/// follows the input.
pub fn extract_xvectors(net: &Network<f32>, seqs: &[Array2<f32>], cfg: &TdnnConfig) -> Result<Vec<Vec<f32>>> {
    seqs.par_iter().map(|s| extract_xvector(net, s, cfg)).collect()
}
