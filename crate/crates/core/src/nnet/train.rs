use std::fmt::Write as _;
use std::path::Path;

use ndarray::{s, Array2, Array3, Axis};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nnet::loss::{Loss, Targets};
use crate::nnet::network::{Mode, Network};
use crate::nnet::optim::{Adam, AdamConfig};
use crate::{seeds, Scalar};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub loss: Loss,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub min_delta: f64,
    pub validation_fraction: f64,
    pub seed: u64,
}

impl TrainConfig {
    pub fn new(loss: Loss, seed: u64) -> Self {
        let adam = AdamConfig::default();
        Self {
            loss,
            lr: adam.lr,
            beta1: adam.beta1,
            beta2: adam.beta2,
            eps: adam.eps,
            batch_size: 64,
            max_epochs: 100,
            patience: 5,
            min_delta: 0.0,
            validation_fraction: 0.1,
            seed,
        }
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.eps,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0) {
            return Err(Error::config("learning rate must be positive"));
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return Err(Error::config("validation fraction must lie in (0, 1)"));
        }
        if self.batch_size == 0 || self.max_epochs == 0 {
            return Err(Error::config("batch size and max epochs must be positive"));
        }
        if !(self.min_delta >= 0.0) {
            return Err(Error::config("min_delta must be >= 0"));
        }
        Ok(())
    }
}

/// Source of training examples.
pub trait Dataset<T> {
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Input batch for `idx`; `crop` is set during training to draw random
    /// crops where the dataset supports them.
    fn inputs(&self, idx: &[usize], crop: Option<&mut ChaCha8Rng>) -> Result<Array3<T>>;

    fn targets(&self) -> &Targets<T>;
}

/// Fixed-shape inputs held in one `(n, len, channels)` tensor.
#[derive(Debug, Clone)]
pub struct TensorDataset<T> {
    pub inputs: Array3<T>,
    pub targets: Targets<T>,
}

impl<T: Scalar> TensorDataset<T> {
    pub fn new(inputs: Array3<T>, targets: Targets<T>) -> Result<Self> {
        if inputs.dim().0 != targets.len() {
            return Err(Error::DimensionMismatch {
                expected: inputs.dim().0,
                got: targets.len(),
            });
        }
        Ok(Self { inputs, targets })
    }
}

impl<T: Scalar> Dataset<T> for TensorDataset<T> {
    fn len(&self) -> usize {
        self.targets.len()
    }

    fn inputs(&self, idx: &[usize], _crop: Option<&mut ChaCha8Rng>) -> Result<Array3<T>> {
        Ok(self.inputs.select(Axis(0), idx))
    }

    fn targets(&self) -> &Targets<T> {
        &self.targets
    }
}

/// Variable-length `(frames, dims)` sequences. Training batches are random
/// crops of `chunk` frames; evaluation batches are centre crops to the
/// shortest sequence in the batch.
#[derive(Debug, Clone)]
pub struct SequenceDataset<T> {
    pub sequences: Vec<Array2<T>>,
    pub targets: Targets<T>,
    pub chunk: usize,
}

impl<T: Scalar> SequenceDataset<T> {
    pub fn new(sequences: Vec<Array2<T>>, targets: Targets<T>, chunk: usize) -> Result<Self> {
        if sequences.len() != targets.len() {
            return Err(Error::DimensionMismatch {
                expected: sequences.len(),
                got: targets.len(),
            });
        }
        if let Some(first) = sequences.first() {
            if let Some(bad) = sequences.iter().find(|s| s.ncols() != first.ncols()) {
                return Err(Error::DimensionMismatch {
                    expected: first.ncols(),
                    got: bad.ncols(),
                });
            }
        }
        if chunk == 0 {
            return Err(Error::config("chunk length must be positive"));
        }
        Ok(Self {
            sequences,
            targets,
            chunk,
        })
    }
}

impl<T: Scalar> Dataset<T> for SequenceDataset<T> {
    fn len(&self) -> usize {
        self.sequences.len()
    }

    fn inputs(&self, idx: &[usize], crop: Option<&mut ChaCha8Rng>) -> Result<Array3<T>> {
        let shortest = idx.iter().map(|&i| self.sequences[i].nrows()).min().unwrap_or(0);
        let dims = self.sequences.first().map_or(0, |s| s.ncols());
        let len = match crop {
            Some(_) => self.chunk.min(shortest),
            None => shortest,
        };
        let mut out = Array3::zeros((idx.len(), len, dims));
        let mut crop = crop;
        for (b, &i) in idx.iter().enumerate() {
            let seq = &self.sequences[i];
            let slack = seq.nrows() - len;
            let start = match crop.as_deref_mut() {
                Some(rng) => rng.random_range(0..=slack),
                None => slack / 2,
            };
            out.slice_mut(s![b, .., ..])
                .assign(&seq.slice(s![start..start + len, ..]));
        }
        Ok(out)
    }

    fn targets(&self) -> &Targets<T> {
        &self.targets
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub history: Vec<EpochStats>,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    /// Validation loss of the initial weights.
    pub initial_val_loss: f64,
    pub stopped_early: bool,
    pub train_indices: Vec<usize>,
    pub val_indices: Vec<usize>,
}

impl TrainReport {
    /// One `epoch train_loss val_loss` line per epoch.
    pub fn history_text(&self) -> String {
        let mut s = String::new();
        for e in &self.history {
            let _ = writeln!(s, "{} {:.6} {:.6}", e.epoch, e.train_loss, e.val_loss);
        }
        s
    }

    pub fn write_history(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.history_text()).map_err(|e| Error::io(path, e))
    }
}

/// Seeded split: the last `round(fraction * n)` (at least one) entries of
/// a shuffled index list are held out.
pub fn validation_split(n: usize, fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    let n_val = ((fraction * n as f64).round() as usize).max(1);
    if n_val >= n {
        return Err(Error::data(format!(
            "{n} examples leave no training batch after a {fraction} validation split"
        )));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut seeds::rng(seed, &[0x5B11]));
    let val = idx.split_off(n - n_val);
    Ok((idx, val))
}

/// Inference over `idx` in batches; returns the stacked outputs.
pub fn predict_dataset<T: Scalar, D: Dataset<T> + ?Sized>(
    net: &Network<T>,
    data: &D,
    idx: &[usize],
    batch_size: usize,
) -> Result<Array3<T>> {
    let mut parts = Vec::new();
    for chunk in idx.chunks(batch_size.max(1)) {
        parts.push(net.predict(&data.inputs(chunk, None)?)?);
    }
    let views: Vec<_> = parts.iter().map(|p| p.view()).collect();
    ndarray::concatenate(Axis(0), &views).map_err(|e| Error::data(e.to_string()))
}

/// Mean loss (plus the L2 penalty) of the network in inference mode.
pub fn evaluate_loss<T: Scalar, D: Dataset<T> + ?Sized>(
    net: &Network<T>,
    data: &D,
    idx: &[usize],
    loss: Loss,
    batch_size: usize,
) -> Result<f64> {
    let mut total = 0.0;
    for chunk in idx.chunks(batch_size.max(1)) {
        let out = net.predict(&data.inputs(chunk, None)?)?;
        let (l, _) = loss.evaluate(&out, &data.targets().select(chunk))?;
        total += l.as_f64() * chunk.len() as f64;
    }
    Ok(total / idx.len() as f64 + net.l2_penalty().as_f64())
}

/// Adam training with early stopping on validation loss.
///
/// An epoch improves when its validation loss is below the best so far by
/// more than `min_delta`; training stops once `max(patience, 1)` epochs
/// in a row fail to improve. The best-epoch parameters are restored.
pub fn train<T: Scalar, D: Dataset<T> + ?Sized>(
    net: &mut Network<T>,
    data: &D,
    cfg: &TrainConfig,
) -> Result<TrainReport> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::data("empty training set"));
    }
    if data.targets().len() != data.len() {
        return Err(Error::DimensionMismatch {
            expected: data.len(),
            got: data.targets().len(),
        });
    }
    let (train_idx, val_idx) = validation_split(data.len(), cfg.validation_fraction, cfg.seed)?;
    let mut adam = Adam::new(cfg.adam(), net);
    let mut crop_rng = seeds::rng(cfg.seed, &[0xC209]);
    let initial_val_loss = evaluate_loss(net, data, &val_idx, cfg.loss, cfg.batch_size)?;
    let mut best = (0, initial_val_loss, net.snapshot());
    let mut wait = 0;
    let mut history = Vec::new();
    let mut step = net.step();
    let mut stopped_early = false;
    net.set_mode(Mode::Train);
    for epoch in 1..=cfg.max_epochs {
        let mut order = train_idx.clone();
        order.shuffle(&mut seeds::rng(cfg.seed, &[0x5F1E, epoch as u64]));
        let mut total = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            step += 1;
            net.set_step(step);
            let x = data.inputs(chunk, Some(&mut crop_rng))?;
            net.zero_grad();
            let out = net.forward(&x)?;
            let (loss, grad) = cfg.loss.evaluate(&out, &data.targets().select(chunk))?;
            let loss = loss + net.l2_penalty();
            if !loss.is_finite() {
                net.set_mode(Mode::Infer);
                let (layer, kind) = net.first_nonfinite_layer().unwrap_or((net.layers().len(), "loss"));
                return Err(Error::NonFinite {
                    epoch,
                    layer,
                    kind: kind.to_string(),
                });
            }
            net.backward(&grad)?;
            adam.step(net);
            total += loss.as_f64() * chunk.len() as f64;
        }
        net.set_mode(Mode::Infer);
        let val_loss = evaluate_loss(net, data, &val_idx, cfg.loss, cfg.batch_size)?;
        net.set_mode(Mode::Train);
        if !val_loss.is_finite() {
            net.set_mode(Mode::Infer);
            return Err(Error::NonFinite {
                epoch,
                layer: net.layers().len(),
                kind: "validation loss".to_string(),
            });
        }
        let train_loss = total / train_idx.len() as f64;
        log::debug!("epoch {epoch}: train {train_loss:.6} val {val_loss:.6}");
        history.push(EpochStats {
            epoch,
            train_loss,
            val_loss,
        });
        if val_loss < best.1 - cfg.min_delta {
            best = (epoch, val_loss, net.snapshot());
            wait = 0;
        } else {
            wait += 1;
            if wait >= cfg.patience.max(1) {
                stopped_early = true;
                break;
            }
        }
    }
    net.set_mode(Mode::Infer);
    net.set_step(step);
    net.restore(&best.2);
    Ok(TrainReport {
        history,
        best_epoch: best.0,
        best_val_loss: best.1,
        initial_val_loss,
        stopped_early,
        train_indices: train_idx,
        val_indices: val_idx,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nnet::{InputShape, LayerSpec};
    use rand::SeedableRng;

    #[test]
    fn split_is_seeded_and_disjoint() {
        let (t, v) = validation_split(100, 0.1, 3).unwrap();
        assert_eq!((t.len(), v.len()), (90, 10));
        assert_eq!(validation_split(100, 0.1, 3).unwrap(), (t.clone(), v.clone()));
        let mut all: Vec<usize> = t.into_iter().chain(v).collect();
        all.sort_unstable();
        assert_eq!(all, (0..100).collect::<Vec<_>>());
        assert!(validation_split(1, 0.1, 0).is_err());
    }

    #[test]
    fn sequence_crops() {
        let seqs = vec![
            Array2::from_shape_fn((10, 2), |(t, d)| (t * 2 + d) as f64),
            Array2::from_shape_fn((6, 2), |(t, d)| (t * 2 + d) as f64),
        ];
        let targets = Targets::Classes {
            labels: vec![0, 1],
            n_classes: 2,
        };
        let ds = SequenceDataset::new(seqs, targets, 4).unwrap();
        let eval = ds.inputs(&[0, 1], None).unwrap();
        assert_eq!(eval.dim(), (2, 6, 2));
        assert_eq!(eval[[0, 0, 0]], 4.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let tr = ds.inputs(&[0], Some(&mut rng)).unwrap();
        assert_eq!(tr.dim(), (1, 4, 2));
    }

    #[test]
    fn config_validation() {
        let mut cfg = TrainConfig::new(Loss::Mse, 0);
        cfg.validation_fraction = 1.0;
        assert!(cfg.validate().is_err());
        cfg.validation_fraction = 0.1;
        cfg.lr = 0.0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn nan_input_reports_layer() {
        let mut net = Network::<f64>::new(
            vec![LayerSpec::dense(1, 1), LayerSpec::Tanh],
            InputShape {
                len: Some(1),
                channels: 1,
            },
            0,
        )
        .unwrap();
        let x = Array3::from_elem((20, 1, 1), f64::NAN);
        let targets = Targets::Values(Array2::zeros((20, 1)));
        let data = TensorDataset::new(x, targets).unwrap();
        let mut cfg = TrainConfig::new(Loss::Mse, 0);
        cfg.batch_size = 64;
        cfg.validation_fraction = 0.05;
        let err = train(&mut net, &data, &cfg).unwrap_err();
        assert!(matches!(err, Error::NonFinite { epoch: 1, layer: 0, .. }), "{err}");
        assert_eq!(err.exit_code(), 3);
    }
}
