use ndarray::Array3;
use rand::Rng;

use crate::error::Result;
use crate::nnet::layer::LayerSpec;
use crate::nnet::loss::{Loss, Targets};
use crate::nnet::network::{InputShape, Mode, Network};
use crate::seeds;

/// Outcome of a finite-difference gradient check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    pub max_rel_err: f64,
    pub n_checked: usize,
}

/// Denominator floor for the relative error, so that entries whose true
/// gradient is numerically zero are judged by absolute error.
pub const REL_ERR_FLOOR: f64 = 1e-6;

fn total_loss(
    net: &mut Network<f64>,
    x: &Array3<f64>,
    targets: &Targets<f64>,
    loss: Loss,
) -> Result<(f64, Array3<f64>)> {
    let out = net.forward(x)?;
    let (l, g) = loss.evaluate(&out, targets)?;
    Ok((l + net.l2_penalty(), g))
}

/// Compares analytic gradients of every trainable parameter with central
/// differences `(L(w + eps) - L(w - eps)) / 2eps`. The noise stream is held
/// fixed so noisy layers are differentiable functions of the weights.
pub fn check_gradients(
    net: &mut Network<f64>,
    x: &Array3<f64>,
    targets: &Targets<f64>,
    loss: Loss,
    eps: f64,
) -> Result<GradCheck> {
    net.set_mode(Mode::Train);
    net.zero_grad();
    let (_, g) = total_loss(net, x, targets, loss)?;
    net.backward(&g)?;
    let analytic: Vec<Vec<_>> = net.layers().iter().map(|l| l.grads.clone()).collect();
    let mut max_rel_err: f64 = 0.0;
    let mut n_checked = 0;
    for li in 0..net.layers().len() {
        for pi in 0..net.layers()[li].params.len() {
            for k in 0..net.layers()[li].params[pi].len() {
                let orig = net.layers()[li].params[pi].as_slice().expect("contiguous")[k];
                let at = |v: f64, net: &mut Network<f64>| -> Result<f64> {
                    net.layers_mut()[li].params[pi].as_slice_mut().expect("contiguous")[k] = v;
                    Ok(total_loss(net, x, targets, loss)?.0)
                };
                let plus = at(orig + eps, net)?;
                let minus = at(orig - eps, net)?;
                at(orig, net)?;
                let numeric = (plus - minus) / (2.0 * eps);
                let a = analytic[li][pi].as_slice().expect("contiguous")[k];
                let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(REL_ERR_FLOOR);
                max_rel_err = max_rel_err.max(rel);
                n_checked += 1;
            }
        }
    }
    net.set_mode(Mode::Infer);
    Ok(GradCheck { max_rel_err, n_checked })
}

/// A randomized micro-network exercising one layer kind.
#[derive(Debug, Clone)]
pub struct MicroNet {
    pub kind: &'static str,
    pub net: Network<f64>,
    pub input: Array3<f64>,
    pub targets: Targets<f64>,
    pub loss: Loss,
}

/// One micro-net (at most 500 parameters) per layer kind, with weights,
/// inputs and targets drawn from `seed`.
pub fn micro_nets(seed: u64) -> Result<Vec<MicroNet>> {
    let mut rng = seeds::rng(seed, &[0x6C]);
    let mut uniform = |shape: (usize, usize, usize)| Array3::from_shape_fn(shape, |_| rng.random_range(-1.0..1.0));
    let tdnn = |cin, cout| LayerSpec::Tdnn {
        in_channels: cin,
        outputs: cout,
        offsets: vec![-2, 0, 2],
        l2: 0.0,
    };
    let conv = |cin, f, l2| LayerSpec::Conv1d {
        in_channels: cin,
        filters: f,
        kernel: 3,
        l2,
    };
    let cases: Vec<(&'static str, Vec<LayerSpec>, (usize, usize, usize), Loss)> = vec![
        (
            "dense",
            vec![
                LayerSpec::Dense {
                    inputs: 3,
                    outputs: 4,
                    l2: 0.01,
                },
                LayerSpec::Tanh,
                LayerSpec::dense(4, 2),
            ],
            (4, 1, 3),
            Loss::Mse,
        ),
        (
            "conv1d",
            vec![conv(2, 3, 0.01), LayerSpec::Flatten, LayerSpec::dense(18, 1)],
            (3, 6, 2),
            Loss::Mse,
        ),
        (
            "tdnn",
            vec![tdnn(2, 3), LayerSpec::Flatten, LayerSpec::dense(9, 2)],
            (3, 7, 2),
            Loss::Mse,
        ),
        (
            "batch_norm",
            vec![
                LayerSpec::dense(2, 3),
                LayerSpec::batch_norm(3),
                LayerSpec::Tanh,
                LayerSpec::dense(3, 1),
            ],
            (5, 2, 2),
            Loss::Mse,
        ),
        (
            "relu",
            vec![LayerSpec::dense(3, 5), LayerSpec::Relu, LayerSpec::dense(5, 2)],
            (4, 2, 3),
            Loss::Mse,
        ),
        (
            "tanh",
            vec![
                LayerSpec::dense(2, 4),
                LayerSpec::Tanh,
                LayerSpec::dense(4, 1),
                LayerSpec::Tanh,
            ],
            (4, 1, 2),
            Loss::Mse,
        ),
        (
            "gaussian_noise",
            vec![
                LayerSpec::GaussianNoise { std: 0.1 },
                LayerSpec::dense(3, 2),
                LayerSpec::Tanh,
            ],
            (4, 1, 3),
            Loss::Mse,
        ),
        (
            "max_pool1d",
            vec![
                conv(1, 2, 0.0),
                LayerSpec::MaxPool1d { pool: 2, stride: 2 },
                LayerSpec::Flatten,
                LayerSpec::dense(8, 1),
            ],
            (3, 8, 1),
            Loss::Mse,
        ),
        (
            "stats_pool",
            vec![tdnn(2, 4), LayerSpec::StatsPool, LayerSpec::dense(8, 3)],
            (4, 9, 2),
            Loss::SoftmaxCrossEntropy,
        ),
        (
            "flatten",
            vec![LayerSpec::Flatten, LayerSpec::dense(6, 2)],
            (3, 3, 2),
            Loss::Mse,
        ),
    ];
    let mut out = Vec::new();
    for (i, (kind, specs, (b, len, ch), loss)) in cases.into_iter().enumerate() {
        let net = Network::new(
            specs,
            InputShape {
                len: Some(len),
                channels: ch,
            },
            seeds::derive(seed, &[i as u64]),
        )?;
        let out_dim = net.output_shape(Some(len))?;
        let width = out_dim.len.unwrap_or(1) * out_dim.channels;
        let input = uniform((b, len, ch));
        let targets = match loss {
            Loss::Mse => Targets::Values(uniform((b, width, 1)).into_shape_with_order((b, width)).expect("shape")),
            Loss::SoftmaxCrossEntropy => Targets::Classes {
                labels: (0..b).map(|j| (j + seed as usize) % width).collect(),
                n_classes: width,
            },
        };
        out.push(MicroNet {
            kind,
            net,
            input,
            targets,
            loss,
        });
    }
    Ok(out)
}
