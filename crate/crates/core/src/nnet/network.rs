use std::path::Path;

use ndarray::{Array2, Array3};

use crate::binio::{read_file, ByteReader, ByteWriter};
use crate::error::{Error, Result};
use crate::nnet::layer::{Init, Layer, LayerSpec};
use crate::{seeds, Scalar};

const CHECKPOINT_MAGIC: &[u8; 7] = b"RDNET01";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

/// Expected input geometry: `len` is `None` for variable-length sequences.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InputShape {
    pub len: Option<usize>,
    pub channels: usize,
}

/// Saved parameters and buffers of every layer.
pub type Snapshot<T> = Vec<(Vec<Array2<T>>, Vec<Array2<T>>)>;

/// An ordered stack of layers.
#[derive(Debug, Clone)]
pub struct Network<T> {
    layers: Vec<Layer<T>>,
    input: InputShape,
    seed: u64,
    step: u64,
    mode: Mode,
    freeze_bn: bool,
    first_nonfinite: Option<usize>,
}

impl<T: Scalar> Network<T> {
    /// Builds the network, running a symbolic shape pass and drawing the
    /// initial weights from `seed`.
    pub fn new(specs: Vec<LayerSpec>, input: InputShape, seed: u64) -> Result<Self> {
        Self::with_init(specs, input, seed, Init::FanIn)
    }

    pub fn with_init(specs: Vec<LayerSpec>, input: InputShape, seed: u64, init: Init) -> Result<Self> {
        check_shapes(&specs, input)?;
        let mut rng = seeds::rng(seed, &[0x1A17]);
        let layers = specs.into_iter().map(|s| Layer::with_init(s, init, &mut rng)).collect();
        Ok(Self {
            layers,
            input,
            seed,
            step: 0,
            mode: Mode::Infer,
            freeze_bn: false,
            first_nonfinite: None,
        })
    }

    pub fn layers(&self) -> &[Layer<T>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer<T>] {
        &mut self.layers
    }

    pub fn specs(&self) -> Vec<LayerSpec> {
        self.layers.iter().map(|l| l.spec.clone()).collect()
    }

    pub fn input_shape(&self) -> InputShape {
        self.input
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn set_mode(&mut self, mode: Mode) {
        self.mode = mode;
        if mode == Mode::Infer {
            self.layers.iter_mut().for_each(Layer::clear_cache);
        }
    }

    /// In training mode, batch norm uses its running statistics instead
    /// of batch statistics.
    pub fn set_batch_norm_frozen(&mut self, frozen: bool) {
        self.freeze_bn = frozen;
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    /// Selects the noise stream used by the next training forward pass.
    pub fn set_step(&mut self, step: u64) {
        self.step = step;
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().flat_map(|l| &l.params).map(|p| p.len()).sum()
    }

    /// Output shape per sample for a given input length.
    pub fn output_shape(&self, len: Option<usize>) -> Result<InputShape> {
        let specs = self.specs();
        check_shapes(&specs, InputShape { len, ..self.input })
    }

    fn check_input(&self, x: &Array3<T>) -> Result<()> {
        let (_, len, c) = x.dim();
        let bad = c != self.input.channels || self.input.len.is_some_and(|l| l != len);
        if bad {
            let kind = self.layers.first().map_or("input", |l| l.spec.kind_name());
            return Err(Error::Shape {
                layer: 0,
                kind: kind.to_string(),
                detail: format!(
                    "input (len {len}, channels {c}) does not match network input (len {}, channels {})",
                    self.input.len.map_or("any".to_string(), |l| l.to_string()),
                    self.input.channels
                ),
            });
        }
        Ok(())
    }

    /// Forward pass in the current mode. In training mode layer caches
    /// are kept for [`Network::backward`].
    pub fn forward(&mut self, x: &Array3<T>) -> Result<Array3<T>> {
        if self.mode == Mode::Infer {
            return self.predict(x);
        }
        self.check_input(x)?;
        self.first_nonfinite = None;
        let mut h = x.clone();
        for (i, layer) in self.layers.iter_mut().enumerate() {
            let mut noise = seeds::rng(self.seed, &[0x0015E, self.step, i as u64]);
            h = layer
                .forward(&h, true, self.freeze_bn, &mut noise)
                .map_err(|e| shape_error(e, i, &layer.spec))?;
            if self.first_nonfinite.is_none() && h.iter().any(|v| !v.is_finite()) {
                self.first_nonfinite = Some(i);
            }
        }
        Ok(h)
    }

    /// Deterministic inference pass; never mutates the network.
    pub fn predict(&self, x: &Array3<T>) -> Result<Array3<T>> {
        self.predict_prefix(x, self.layers.len())
    }

    /// Inference through the first `n_layers` layers only.
    pub fn predict_prefix(&self, x: &Array3<T>, n_layers: usize) -> Result<Array3<T>> {
        self.check_input(x)?;
        let mut h = x.clone();
        for (i, layer) in self.layers.iter().take(n_layers).enumerate() {
            h = layer.infer(&h).map_err(|e| shape_error(e, i, &layer.spec))?;
        }
        Ok(h)
    }

    /// Backpropagates the loss gradient with respect to the output,
    /// accumulating parameter gradients. Returns the input gradient.
    pub fn backward(&mut self, dloss: &Array3<T>) -> Result<Array3<T>> {
        if self.mode != Mode::Train {
            return Err(Error::data("backward called in inference mode"));
        }
        let mut g = dloss.clone();
        for layer in self.layers.iter_mut().rev() {
            g = layer.backward(&g)?;
        }
        Ok(g)
    }

    pub fn zero_grad(&mut self) {
        for layer in &mut self.layers {
            for g in &mut layer.grads {
                g.fill(T::zero());
            }
        }
    }

    /// Index and kind of the first layer whose last training output held a
    /// non-finite value.
    pub fn first_nonfinite_layer(&self) -> Option<(usize, &'static str)> {
        self.first_nonfinite.map(|i| (i, self.layers[i].spec.kind_name()))
    }

    /// `sum(l2 / 2 * w^2)` over regularized weight matrices.
    pub fn l2_penalty(&self) -> T {
        self.layers
            .iter()
            .filter(|l| l.spec.l2() > 0.0)
            .map(|l| T::lit(0.5 * l.spec.l2()) * l.params[0].iter().map(|&w| w * w).sum::<T>())
            .sum()
    }

    pub fn snapshot(&self) -> Snapshot<T> {
        self.layers
            .iter()
            .map(|l| (l.params.clone(), l.buffers.clone()))
            .collect()
    }

    pub fn restore(&mut self, snap: &Snapshot<T>) {
        for (layer, (p, b)) in self.layers.iter_mut().zip(snap) {
            layer.params.clone_from(p);
            layer.buffers.clone_from(b);
        }
    }

    /// Converts parameters to another scalar type.
    pub fn cast<U: Scalar>(&self) -> Network<U> {
        let conv = |m: &Array2<T>| m.mapv(|v| U::lit(v.as_f64()));
        let layers = self
            .layers
            .iter()
            .map(|l| {
                let mut rng = seeds::rng(0, &[]);
                let mut out = Layer::<U>::new(l.spec.clone(), &mut rng);
                out.params = l.params.iter().map(conv).collect();
                out.buffers = l.buffers.iter().map(conv).collect();
                out
            })
            .collect();
        Network {
            layers,
            input: self.input,
            seed: self.seed,
            step: self.step,
            mode: Mode::Infer,
            freeze_bn: false,
            first_nonfinite: None,
        }
    }
}

fn shape_error(e: Error, layer: usize, spec: &LayerSpec) -> Error {
    match e {
        Error::DimensionMismatch { .. } | Error::Data(_) => Error::Shape {
            layer,
            kind: spec.kind_name().to_string(),
            detail: e.to_string(),
        },
        other => other,
    }
}

fn check_shapes(specs: &[LayerSpec], input: InputShape) -> Result<InputShape> {
    if input.channels == 0 {
        return Err(Error::config("network input needs at least one channel"));
    }
    let (mut len, mut ch) = (input.len, input.channels);
    for (i, spec) in specs.iter().enumerate() {
        let err = |detail: String| Error::Shape {
            layer: i,
            kind: spec.kind_name().to_string(),
            detail,
        };
        spec.validate().map_err(err)?;
        (len, ch) = spec.output_shape(len, ch).map_err(err)?;
    }
    Ok(InputShape { len, channels: ch })
}

/// A network plus the hash of the experiment configuration it came from.
///
/// ```text
/// magic[7] "RDNET01"
/// config hash: u64, seed: u64
/// input len: u32 (0 = variable), input channels: u32
/// layer count: u32, then per layer a u32-length-prefixed spec record
/// tensor count: u32, then per tensor rows: u32, cols: u32, rows*cols f32
/// ```
/// Tensors are every layer's parameters followed by its buffers, in layer
/// order. Little-endian throughout.
#[derive(Debug, Clone)]
pub struct Checkpoint<T> {
    pub net: Network<T>,
    pub config_hash: u64,
}

impl<T: Scalar> Checkpoint<T> {
    pub fn new(net: Network<T>, config_hash: u64) -> Self {
        Self { net, config_hash }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = ByteWriter::new();
        w.bytes(CHECKPOINT_MAGIC);
        w.u64(self.config_hash);
        w.u64(self.net.seed);
        w.u32(self.net.input.len.unwrap_or(0) as u32);
        w.u32(self.net.input.channels as u32);
        w.u32(self.net.layers.len() as u32);
        for l in &self.net.layers {
            w.str(&l.spec.to_string());
        }
        let tensors: Vec<&Array2<T>> = self
            .net
            .layers
            .iter()
            .flat_map(|l| l.params.iter().chain(&l.buffers))
            .collect();
        w.u32(tensors.len() as u32);
        for t in tensors {
            w.u32(t.nrows() as u32);
            w.u32(t.ncols() as u32);
            for &v in t.iter() {
                w.f32(v.as_f64() as f32);
            }
        }
        w.into_inner()
    }

    pub fn from_bytes(buf: &[u8], path: &Path) -> Result<Self> {
        let mut r = ByteReader::new(buf, "checkpoint", path);
        r.expect_magic(CHECKPOINT_MAGIC)?;
        let config_hash = r.u64()?;
        let seed = r.u64()?;
        let len = r.u32()? as usize;
        let channels = r.u32()? as usize;
        let n_layers = r.u32()? as usize;
        let mut specs = Vec::new();
        for _ in 0..n_layers {
            let rec = r.str()?;
            specs.push(rec.parse::<LayerSpec>().map_err(|e| r.malformed(e))?);
        }
        let input = InputShape {
            len: (len > 0).then_some(len),
            channels,
        };
        let mut net = Network::new(specs, input, seed).map_err(|e| r.malformed(e.to_string()))?;
        let n_tensors = r.u32()? as usize;
        let expected: usize = net.layers.iter().map(|l| l.params.len() + l.buffers.len()).sum();
        if n_tensors != expected {
            return Err(r.malformed(format!("{n_tensors} tensors, layer graph needs {expected}")));
        }
        for layer in &mut net.layers {
            for t in layer.params.iter_mut().chain(layer.buffers.iter_mut()) {
                let rows = r.u32()? as usize;
                let cols = r.u32()? as usize;
                if (rows, cols) != t.dim() {
                    return Err(r.malformed(format!(
                        "{} tensor shape {rows}x{cols}, expected {:?}",
                        layer.spec.kind_name(),
                        t.dim()
                    )));
                }
                let vals = r.f32s(rows * cols)?;
                *t = Array2::from_shape_vec((rows, cols), vals.into_iter().map(|v| T::lit(v as f64)).collect())
                    .expect("checked shape");
            }
        }
        r.finish()?;
        Ok(Self { net, config_hash })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_bytes(&read_file(path)?, path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cm_like(len: usize) -> Vec<LayerSpec> {
        let mut specs = vec![LayerSpec::GaussianNoise { std: 0.001 }, LayerSpec::batch_norm(1)];
        let mut ch = 1;
        for _ in 0..3 {
            specs.push(LayerSpec::Conv1d {
                in_channels: ch,
                filters: 4,
                kernel: 3,
                l2: 1e-4,
            });
            specs.push(LayerSpec::MaxPool1d { pool: 2, stride: 2 });
            ch = 4;
        }
        specs.push(LayerSpec::Flatten);
        specs.push(LayerSpec::dense(len / 8 * 4, 1));
        specs.push(LayerSpec::Tanh);
        specs
    }

    #[test]
    fn shape_pass_rejects_mismatch() {
        let specs = vec![LayerSpec::dense(3, 4), LayerSpec::dense(5, 1)];
        let err = Network::<f64>::new(
            specs,
            InputShape {
                len: Some(1),
                channels: 3,
            },
            0,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Shape { layer: 1, .. }), "{err}");
    }

    #[test]
    fn input_mismatch_names_layer() {
        let net = Network::<f64>::new(
            cm_like(16),
            InputShape {
                len: Some(16),
                channels: 1,
            },
            0,
        )
        .unwrap();
        let err = net.predict(&Array3::zeros((1, 17, 1))).unwrap_err();
        assert!(err.to_string().contains("gaussian_noise"), "{err}");
    }

    #[test]
    fn checkpoint_roundtrip_is_bitwise() {
        let net = Network::<f32>::new(
            cm_like(32),
            InputShape {
                len: Some(32),
                channels: 1,
            },
            9,
        )
        .unwrap();
        let ck = Checkpoint::new(net, 0xFEED);
        let bytes = ck.to_bytes();
        assert_eq!(&bytes[..7], b"RDNET01");
        let back = Checkpoint::<f32>::from_bytes(&bytes, Path::new("x")).unwrap();
        assert_eq!(back.config_hash, 0xFEED);
        assert_eq!(back.to_bytes(), bytes);
        let probe = Array3::from_shape_fn((3, 32, 1), |(b, t, _)| (b as f32 - t as f32 * 0.1).sin());
        assert_eq!(ck.net.predict(&probe).unwrap(), back.net.predict(&probe).unwrap());
        assert!(Checkpoint::<f32>::from_bytes(&bytes[..bytes.len() - 2], Path::new("x")).is_err());
    }

    #[test]
    fn backward_requires_train_mode() {
        let mut net = Network::<f64>::new(
            vec![LayerSpec::dense(2, 1)],
            InputShape {
                len: Some(1),
                channels: 2,
            },
            0,
        )
        .unwrap();
        assert!(net.backward(&Array3::zeros((1, 1, 1))).is_err());
    }

    #[test]
    fn same_seed_same_weights() {
        let shape = InputShape {
            len: Some(16),
            channels: 1,
        };
        let a = Network::<f32>::new(cm_like(16), shape, 3).unwrap();
        let b = Network::<f32>::new(cm_like(16), shape, 3).unwrap();
        let c = Network::<f32>::new(cm_like(16), shape, 4).unwrap();
        assert_eq!(Checkpoint::new(a, 0).to_bytes(), Checkpoint::new(b, 0).to_bytes());
        assert_ne!(
            Checkpoint::new(c, 0).to_bytes(),
            Checkpoint::new(Network::<f32>::new(cm_like(16), shape, 3).unwrap(), 0).to_bytes()
        );
    }
}
