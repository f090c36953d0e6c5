use std::fmt;

use ndarray::{s, Array1, Array2, Array3, Axis, Zip};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::Scalar;

/// Layer kinds and their hyper-parameters.
///
/// Activations flow as `(batch, time, channels)` tensors. Dense layers act
/// on every time step independently.
#[derive(Debug, Clone, PartialEq)]
pub enum LayerSpec {
    Dense {
        inputs: usize,
        outputs: usize,
        l2: f64,
    },
    /// 1-D convolution with zero "same" padding.
    Conv1d {
        in_channels: usize,
        filters: usize,
        kernel: usize,
        l2: f64,
    },
    /// Temporal affine layer over explicit context offsets, no padding.
    Tdnn {
        in_channels: usize,
        outputs: usize,
        offsets: Vec<isize>,
        l2: f64,
    },
    BatchNorm {
        channels: usize,
        momentum: f64,
        eps: f64,
    },
    Relu,
    Tanh,
    /// Additive N(0, std^2) noise in training, identity at inference.
    GaussianNoise {
        std: f64,
    },
    MaxPool1d {
        pool: usize,
        stride: usize,
    },
    /// Per-channel mean and standard deviation over time.
    StatsPool,
    Flatten,
}

impl LayerSpec {
    pub fn dense(inputs: usize, outputs: usize) -> Self {
        LayerSpec::Dense {
            inputs,
            outputs,
            l2: 0.0,
        }
    }

    pub fn batch_norm(channels: usize) -> Self {
        LayerSpec::BatchNorm {
            channels,
            momentum: 0.99,
            eps: 1e-5,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            LayerSpec::Dense { .. } => "dense",
            LayerSpec::Conv1d { .. } => "conv1d",
            LayerSpec::Tdnn { .. } => "tdnn",
            LayerSpec::BatchNorm { .. } => "batch_norm",
            LayerSpec::Relu => "relu",
            LayerSpec::Tanh => "tanh",
            LayerSpec::GaussianNoise { .. } => "gaussian_noise",
            LayerSpec::MaxPool1d { .. } => "max_pool1d",
            LayerSpec::StatsPool => "stats_pool",
            LayerSpec::Flatten => "flatten",
        }
    }

    /// Temporal affine geometry: (context offsets, first output position
    /// relative to input, input channels, output channels, l2).
    fn affine(&self) -> Option<(Vec<isize>, bool, usize, usize, f64)> {
        match self {
            LayerSpec::Dense { inputs, outputs, l2 } => Some((vec![0], true, *inputs, *outputs, *l2)),
            LayerSpec::Conv1d {
                in_channels,
                filters,
                kernel,
                l2,
            } => {
                let left = (*kernel as isize - 1) / 2;
                let offsets = (0..*kernel as isize).map(|k| k - left).collect();
                Some((offsets, true, *in_channels, *filters, *l2))
            }
            LayerSpec::Tdnn {
                in_channels,
                outputs,
                offsets,
                l2,
            } => Some((offsets.clone(), false, *in_channels, *outputs, *l2)),
            _ => None,
        }
    }

    pub fn l2(&self) -> f64 {
        self.affine().map_or(0.0, |a| a.4)
    }

    /// Symbolic output shape for an input of `(len, channels)`; `len` is
    /// `None` for variable-length sequences.
    pub fn output_shape(
        &self,
        len: Option<usize>,
        channels: usize,
    ) -> std::result::Result<(Option<usize>, usize), String> {
        if let Some((offsets, same, cin, cout, _)) = self.affine() {
            if channels != cin {
                return Err(format!("expects {cin} input channels, got {channels}"));
            }
            if same {
                return Ok((len, cout));
            }
            let span = span(&offsets);
            return match len {
                Some(l) if l <= span => Err(format!("input length {l} too short for context span {span}")),
                Some(l) => Ok((Some(l - span), cout)),
                None => Ok((None, cout)),
            };
        }
        match self {
            LayerSpec::BatchNorm { channels: c, .. } => {
                if *c != channels {
                    Err(format!("expects {c} channels, got {channels}"))
                } else {
                    Ok((len, channels))
                }
            }
            LayerSpec::MaxPool1d { pool, stride } => match len {
                Some(l) if l < *pool => Err(format!("input length {l} shorter than pool {pool}")),
                Some(l) => Ok((Some((l - pool) / stride + 1), channels)),
                None => Ok((None, channels)),
            },
            LayerSpec::StatsPool => Ok((Some(1), 2 * channels)),
            LayerSpec::Flatten => match len {
                Some(l) => Ok((Some(1), l * channels)),
                None => Err("cannot flatten a variable-length input".to_string()),
            },
            _ => Ok((len, channels)),
        }
    }

    pub fn validate(&self) -> std::result::Result<(), String> {
        match self {
            LayerSpec::Conv1d { kernel, filters, .. } if *kernel == 0 || *filters == 0 => {
                Err("conv1d needs kernel >= 1 and filters >= 1".into())
            }
            LayerSpec::Tdnn { offsets, outputs, .. } if offsets.is_empty() || *outputs == 0 => {
                Err("tdnn needs at least one context offset and output".into())
            }
            LayerSpec::Dense { inputs, outputs, .. } if *inputs == 0 || *outputs == 0 => {
                Err("dense needs non-zero sizes".into())
            }
            LayerSpec::MaxPool1d { pool, stride } if *pool == 0 || *stride == 0 => {
                Err("max_pool1d needs pool >= 1 and stride >= 1".into())
            }
            LayerSpec::GaussianNoise { std } if !(*std >= 0.0) => Err("noise std must be >= 0".into()),
            LayerSpec::BatchNorm { eps, momentum, .. } if !(*eps > 0.0) || !(0.0..1.0).contains(momentum) => {
                Err("batch_norm needs eps > 0 and momentum in [0, 1)".into())
            }
            _ => Ok(()),
        }
    }
}

impl fmt::Display for LayerSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "kind={}", self.kind_name())?;
        match self {
            LayerSpec::Dense { inputs, outputs, l2 } => write!(f, " in={inputs} out={outputs} l2={l2}"),
            LayerSpec::Conv1d {
                in_channels,
                filters,
                kernel,
                l2,
            } => {
                write!(f, " in={in_channels} filters={filters} kernel={kernel} l2={l2}")
            }
            LayerSpec::Tdnn {
                in_channels,
                outputs,
                offsets,
                l2,
            } => {
                let offs: Vec<String> = offsets.iter().map(|o| o.to_string()).collect();
                write!(f, " in={in_channels} out={outputs} offsets={} l2={l2}", offs.join(","))
            }
            LayerSpec::BatchNorm {
                channels,
                momentum,
                eps,
            } => {
                write!(f, " channels={channels} momentum={momentum} eps={eps}")
            }
            LayerSpec::GaussianNoise { std } => write!(f, " std={std}"),
            LayerSpec::MaxPool1d { pool, stride } => write!(f, " pool={pool} stride={stride}"),
            _ => Ok(()),
        }
    }
}

impl std::str::FromStr for LayerSpec {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let mut fields = std::collections::HashMap::new();
        for tok in s.split_whitespace() {
            let (k, v) = tok.split_once('=').ok_or_else(|| format!("bad token {tok:?}"))?;
            fields.insert(k, v);
        }
        let get = |k: &str| fields.get(k).copied().ok_or_else(|| format!("missing {k} in {s:?}"));
        let num = |k: &str| -> std::result::Result<usize, String> { get(k)?.parse().map_err(|e| format!("{k}: {e}")) };
        let real = |k: &str| -> std::result::Result<f64, String> { get(k)?.parse().map_err(|e| format!("{k}: {e}")) };
        Ok(match get("kind")? {
            "dense" => LayerSpec::Dense {
                inputs: num("in")?,
                outputs: num("out")?,
                l2: real("l2")?,
            },
            "conv1d" => LayerSpec::Conv1d {
                in_channels: num("in")?,
                filters: num("filters")?,
                kernel: num("kernel")?,
                l2: real("l2")?,
            },
            "tdnn" => LayerSpec::Tdnn {
                in_channels: num("in")?,
                outputs: num("out")?,
                offsets: get("offsets")?
                    .split(',')
                    .map(|o| o.parse().map_err(|e| format!("offset {o:?}: {e}")))
                    .collect::<std::result::Result<_, _>>()?,
                l2: real("l2")?,
            },
            "batch_norm" => LayerSpec::BatchNorm {
                channels: num("channels")?,
                momentum: real("momentum")?,
                eps: real("eps")?,
            },
            "relu" => LayerSpec::Relu,
            "tanh" => LayerSpec::Tanh,
            "gaussian_noise" => LayerSpec::GaussianNoise { std: real("std")? },
            "max_pool1d" => LayerSpec::MaxPool1d {
                pool: num("pool")?,
                stride: num("stride")?,
            },
            "stats_pool" => LayerSpec::StatsPool,
            "flatten" => LayerSpec::Flatten,
            other => return Err(format!("unknown layer kind {other:?}")),
        })
    }
}

fn span(offsets: &[isize]) -> usize {
    let lo = *offsets.iter().min().unwrap();
    let hi = *offsets.iter().max().unwrap();
    (hi - lo) as usize
}

/// What a layer keeps from its training forward pass for backprop.
#[derive(Debug, Clone)]
enum Cache<T> {
    None,
    Affine {
        cols: Array2<T>,
        in_len: usize,
        start: isize,
    },
    BatchNorm {
        xhat: Array2<T>,
        inv_std: Array1<T>,
        frozen: bool,
    },
    Output(Array3<T>),
    MaxPool {
        argmax: Array3<usize>,
        in_len: usize,
    },
    Stats {
        x: Array3<T>,
        mean: Array2<T>,
        std: Array2<T>,
    },
    Shape((usize, usize, usize)),
}

/// A layer with its parameters, gradients and non-trainable buffers.
#[derive(Debug, Clone)]
pub struct Layer<T> {
    pub spec: LayerSpec,
    /// Trainable tensors: affine `[weights (K*Cin x Cout), bias (1 x Cout)]`,
    /// batch norm `[gamma, beta]` (1 x C).
    pub params: Vec<Array2<T>>,
    pub grads: Vec<Array2<T>>,
    /// Batch-norm running mean and variance (1 x C).
    pub buffers: Vec<Array2<T>>,
    cache: Cache<T>,
}

/// Uniform weight initialization scheme for affine layers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Init {
    /// `U(-sqrt(3 / fan_in), +sqrt(3 / fan_in))`.
    #[default]
    FanIn,
    /// `U(-sqrt(6 / (fan_in + fan_out)), ..)`, fan counts including the kernel width.
    Glorot,
}

impl<T: Scalar> Layer<T> {
    pub fn new(spec: LayerSpec, rng: &mut ChaCha8Rng) -> Self {
        Self::with_init(spec, Init::FanIn, rng)
    }

    pub fn with_init(spec: LayerSpec, init: Init, rng: &mut ChaCha8Rng) -> Self {
        let mut params = Vec::new();
        let mut buffers = Vec::new();
        if let Some((offsets, _, cin, cout, _)) = spec.affine() {
            let fan_in = offsets.len() * cin;
            let limit = match init {
                Init::FanIn => (3.0 / fan_in as f64).sqrt(),
                Init::Glorot => (6.0 / (fan_in + offsets.len() * cout) as f64).sqrt(),
            };
            params.push(Array2::from_shape_fn((fan_in, cout), |_| {
                T::lit(rng.random_range(-limit..limit))
            }));
            params.push(Array2::zeros((1, cout)));
        } else if let LayerSpec::BatchNorm { channels, .. } = spec {
            params.push(Array2::ones((1, channels)));
            params.push(Array2::zeros((1, channels)));
            buffers.push(Array2::zeros((1, channels)));
            buffers.push(Array2::ones((1, channels)));
        }
        let grads = params.iter().map(|p| Array2::zeros(p.raw_dim())).collect();
        Self {
            spec,
            params,
            grads,
            buffers,
            cache: Cache::None,
        }
    }

    pub fn clear_cache(&mut self) {
        self.cache = Cache::None;
    }

    /// Forward pass. In training mode intermediate values are cached for
    /// [`Layer::backward`]; `noise_rng` feeds the Gaussian noise layer.
    pub fn forward(
        &mut self,
        x: &Array3<T>,
        train: bool,
        freeze_bn: bool,
        noise_rng: &mut ChaCha8Rng,
    ) -> Result<Array3<T>> {
        let (out, cache) = self.run(x, train, freeze_bn, Some(noise_rng))?;
        if train {
            self.cache = cache;
            if let LayerSpec::BatchNorm { momentum, .. } = self.spec {
                if !freeze_bn {
                    let (b, len, c) = x.dim();
                    let flat = x.to_shape((b * len, c)).expect("contiguous");
                    let mean = flat.mean_axis(Axis(0)).expect("non-empty batch");
                    let var = flat.var_axis(Axis(0), T::zero());
                    let m = T::lit(momentum);
                    let keep = |buf: &mut Array2<T>, batch: &Array1<T>| {
                        Zip::from(buf.row_mut(0))
                            .and(batch)
                            .for_each(|r, &v| *r = m * *r + (T::one() - m) * v);
                    };
                    keep(&mut self.buffers[0], &mean);
                    keep(&mut self.buffers[1], &var);
                }
            }
        }
        Ok(out)
    }

    /// Inference-only forward pass without caching.
    pub fn infer(&self, x: &Array3<T>) -> Result<Array3<T>> {
        self.run(x, false, true, None).map(|r| r.0)
    }

    fn run(
        &self,
        x: &Array3<T>,
        train: bool,
        freeze_bn: bool,
        noise_rng: Option<&mut ChaCha8Rng>,
    ) -> Result<(Array3<T>, Cache<T>)> {
        let (b, len, c) = x.dim();
        if let Some((offsets, same, _, cout, _)) = self.spec.affine() {
            let (out_len, start) = if same {
                (len, 0)
            } else {
                let lo = *offsets.iter().min().unwrap();
                (len.saturating_sub(span(&offsets)), -lo)
            };
            let cols = im2col(x, &offsets, out_len, start);
            let y = cols.dot(&self.params[0]) + &self.params[1];
            let out = y
                .into_shape_with_order((b, out_len, cout))
                .expect("affine output shape");
            let cache = if train {
                Cache::Affine {
                    cols,
                    in_len: len,
                    start,
                }
            } else {
                Cache::None
            };
            return Ok((out, cache));
        }
        match &self.spec {
            LayerSpec::BatchNorm { momentum: _, eps, .. } => {
                let flat = x.to_shape((b * len, c)).expect("contiguous").to_owned();
                let use_batch = train && !freeze_bn;
                let (mean, var) = if use_batch {
                    let mean = flat.mean_axis(Axis(0)).expect("non-empty batch");
                    let var = flat.var_axis(Axis(0), T::zero());
                    (mean, var)
                } else {
                    (self.buffers[0].row(0).to_owned(), self.buffers[1].row(0).to_owned())
                };
                let inv_std = var.mapv(|v| T::one() / (v + T::lit(*eps)).sqrt());
                let xhat = (&flat - &mean) * &inv_std;
                let y = &xhat * &self.params[0] + &self.params[1];
                let out = y.into_shape_with_order((b, len, c)).expect("bn shape");
                let cache = if train {
                    Cache::BatchNorm {
                        xhat,
                        inv_std,
                        frozen: !use_batch,
                    }
                } else {
                    Cache::None
                };
                Ok((out, cache))
            }
            LayerSpec::Relu => {
                let out = x.mapv(|v| v.max(T::zero()));
                Ok((out.clone(), if train { Cache::Output(out) } else { Cache::None }))
            }
            LayerSpec::Tanh => {
                let out = x.mapv(|v| v.tanh());
                Ok((out.clone(), if train { Cache::Output(out) } else { Cache::None }))
            }
            LayerSpec::GaussianNoise { std } => {
                let mut out = x.clone();
                if train && *std > 0.0 {
                    let rng = noise_rng.expect("noise rng in training");
                    let normal = Normal::new(0.0, *std).expect("valid std");
                    out.mapv_inplace(|v| v + T::lit(normal.sample(rng)));
                }
                Ok((out, Cache::None))
            }
            LayerSpec::MaxPool1d { pool, stride } => {
                if len < *pool {
                    return Err(Error::data(format!("pool {pool} longer than input {len}")));
                }
                let out_len = (len - pool) / stride + 1;
                let mut out = Array3::zeros((b, out_len, c));
                let mut argmax = Array3::zeros((b, out_len, c));
                for bi in 0..b {
                    for t in 0..out_len {
                        for ch in 0..c {
                            let base = t * stride;
                            let mut best = base;
                            for p in base + 1..base + pool {
                                if x[[bi, p, ch]] > x[[bi, best, ch]] {
                                    best = p;
                                }
                            }
                            out[[bi, t, ch]] = x[[bi, best, ch]];
                            argmax[[bi, t, ch]] = best;
                        }
                    }
                }
                let cache = if train {
                    Cache::MaxPool { argmax, in_len: len }
                } else {
                    Cache::None
                };
                Ok((out, cache))
            }
            LayerSpec::StatsPool => {
                if len < 2 {
                    return Err(Error::InsufficientSamples { needed: 2, got: len });
                }
                let mean = x.mean_axis(Axis(1)).expect("non-empty");
                let n = T::from_usize_lossy(len);
                let std = Array2::from_shape_fn((b, c), |(bi, k)| {
                    let m = mean[[bi, k]];
                    let ss: T = (0..len).map(|t| (x[[bi, t, k]] - m) * (x[[bi, t, k]] - m)).sum();
                    (ss / n).max(T::zero()).sqrt()
                });
                let mut out = Array3::zeros((b, 1, 2 * c));
                out.slice_mut(s![.., 0, ..c]).assign(&mean);
                out.slice_mut(s![.., 0, c..]).assign(&std);
                let cache = if train {
                    Cache::Stats {
                        x: x.clone(),
                        mean,
                        std,
                    }
                } else {
                    Cache::None
                };
                Ok((out, cache))
            }
            LayerSpec::Flatten => {
                let out = x
                    .as_standard_layout()
                    .into_owned()
                    .into_shape_with_order((b, 1, len * c))
                    .expect("flatten");
                Ok((out, if train { Cache::Shape((b, len, c)) } else { Cache::None }))
            }
            _ => unreachable!("affine handled above"),
        }
    }

    /// Backpropagates `dy`, accumulating parameter gradients (including the
    /// `l2 * w` weight-decay term) and returning the input gradient.
    pub fn backward(&mut self, dy: &Array3<T>) -> Result<Array3<T>> {
        let cache = std::mem::replace(&mut self.cache, Cache::None);
        let (b, len, c) = dy.dim();
        match (&self.spec, cache) {
            (spec, Cache::Affine { cols, in_len, start }) => {
                let (offsets, _, cin, _, l2) = spec.affine().expect("affine layer");
                let dy2 = dy.to_shape((b * len, c)).expect("contiguous");
                let mut dw = cols.t().dot(&dy2);
                if l2 > 0.0 {
                    dw.scaled_add(T::lit(l2), &self.params[0]);
                }
                self.grads[0] += &dw;
                self.grads[1] += &dy2.sum_axis(Axis(0)).insert_axis(Axis(0));
                let dcols = dy2.dot(&self.params[0].t());
                Ok(col2im(&dcols, &offsets, b, len, in_len, cin, start))
            }
            (LayerSpec::BatchNorm { .. }, Cache::BatchNorm { xhat, inv_std, frozen }) => {
                let n = T::from_usize_lossy(b * len);
                let dy2 = dy.to_shape((b * len, c)).expect("contiguous").to_owned();
                self.grads[0] += &(&dy2 * &xhat).sum_axis(Axis(0)).insert_axis(Axis(0));
                self.grads[1] += &dy2.sum_axis(Axis(0)).insert_axis(Axis(0));
                let dxhat = &dy2 * &self.params[0];
                let dx = if frozen {
                    dxhat * &inv_std
                } else {
                    let sum_d = dxhat.sum_axis(Axis(0));
                    let sum_dx = (&dxhat * &xhat).sum_axis(Axis(0));
                    let mut dx = &dxhat * n - &sum_d - &(&xhat * &sum_dx);
                    dx *= &(inv_std / n);
                    dx
                };
                Ok(dx.into_shape_with_order((b, len, c)).expect("bn grad shape"))
            }
            (LayerSpec::Relu, Cache::Output(out)) => {
                let mut dx = dy.clone();
                Zip::from(&mut dx).and(&out).for_each(|d, &o| {
                    if o <= T::zero() {
                        *d = T::zero();
                    }
                });
                Ok(dx)
            }
            (LayerSpec::Tanh, Cache::Output(out)) => {
                let mut dx = dy.clone();
                Zip::from(&mut dx).and(&out).for_each(|d, &o| *d *= T::one() - o * o);
                Ok(dx)
            }
            (LayerSpec::GaussianNoise { .. }, _) => Ok(dy.clone()),
            (LayerSpec::MaxPool1d { .. }, Cache::MaxPool { argmax, in_len }) => {
                let mut dx = Array3::zeros((b, in_len, c));
                Zip::indexed(dy).and(&argmax).for_each(|(bi, _, ch), &d, &p| {
                    dx[[bi, p, ch]] += d;
                });
                Ok(dx)
            }
            (LayerSpec::StatsPool, Cache::Stats { x, mean, std }) => {
                let (_, t, ch) = x.dim();
                let tn = T::from_usize_lossy(t);
                let mut dx = Array3::zeros((b, t, ch));
                for bi in 0..b {
                    for k in 0..ch {
                        let dmean = dy[[bi, 0, k]];
                        let dstd = dy[[bi, 0, ch + k]];
                        let sd = std[[bi, k]];
                        for ti in 0..t {
                            let mut g = dmean / tn;
                            if sd > T::zero() {
                                g += dstd * (x[[bi, ti, k]] - mean[[bi, k]]) / (tn * sd);
                            }
                            dx[[bi, ti, k]] = g;
                        }
                    }
                }
                Ok(dx)
            }
            (LayerSpec::Flatten, Cache::Shape(shape)) => Ok(dy
                .as_standard_layout()
                .into_owned()
                .into_shape_with_order(shape)
                .expect("unflatten")),
            (spec, _) => Err(Error::data(format!(
                "backward through {} without a training forward pass",
                spec.kind_name()
            ))),
        }
    }
}

/// Gathers context windows: row `(b, t)` holds input positions
/// `start + t + offset` for each offset, zero outside the sequence.
fn im2col<T: Scalar>(x: &Array3<T>, offsets: &[isize], out_len: usize, start: isize) -> Array2<T> {
    let (b, len, c) = x.dim();
    let k = offsets.len();
    let mut cols = Array2::zeros((b * out_len, k * c));
    for bi in 0..b {
        for t in 0..out_len {
            let mut row = cols.row_mut(bi * out_len + t);
            for (j, &o) in offsets.iter().enumerate() {
                let p = start + t as isize + o;
                if p >= 0 && (p as usize) < len {
                    row.slice_mut(s![j * c..(j + 1) * c])
                        .assign(&x.slice(s![bi, p as usize, ..]));
                }
            }
        }
    }
    cols
}

fn col2im<T: Scalar>(
    dcols: &Array2<T>,
    offsets: &[isize],
    b: usize,
    out_len: usize,
    in_len: usize,
    c: usize,
    start: isize,
) -> Array3<T> {
    let mut dx = Array3::zeros((b, in_len, c));
    for bi in 0..b {
        for t in 0..out_len {
            let row = dcols.row(bi * out_len + t);
            for (j, &o) in offsets.iter().enumerate() {
                let p = start + t as isize + o;
                if p >= 0 && (p as usize) < in_len {
                    let mut dst = dx.slice_mut(s![bi, p as usize, ..]);
                    dst += &row.slice(s![j * c..(j + 1) * c]);
                }
            }
        }
    }
    dx
}
