//! Network assembly, forward/backward plumbing, and the two shipped
//! classifier architectures.
//!
//! Both classifiers share the spatial skeleton 40 -> 40 -> 8 -> 2 -> 1:
//! a periodically padded 2x2 stride-1 first layer followed by three
//! non-overlapping stages. The quaternion variant runs on depth-4 input
//! with a quaternion convolution up front and a per-channel depth
//! contraction as classifier head; the plain variant takes the spin
//! components as three channels and classifies with its last convolution.
//! Channel widths put the parameter totals near 19.6k vs 24.2k with the
//! quaternion net strictly smaller.

use rand::Rng;
use rayon::prelude::*;

use super::layer::{ActKind, Activation, Conv, DepthMix, Dropout, Layer, Mode, PeriodicPad, QConv};
use super::tensor::{Shape, Tensor};
use crate::error::{Error, Result};
use crate::rng::{self, domain};
use crate::spin::SpinTexture;

pub const NUM_CLASSES: usize = 9;

/// One-hot class index for a Chern number in `-4 ..= 4`.
pub fn class_index(chern: i32) -> usize {
    debug_assert!((-4..=4).contains(&chern));
    (chern + 4) as usize
}

pub fn class_chern(index: usize) -> i32 {
    index as i32 - 4
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Arch {
    QCnn,
    Cnn,
}

impl Arch {
    pub fn name(self) -> &'static str {
        match self {
            Arch::QCnn => "qcnn",
            Arch::Cnn => "cnn",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "qcnn" => Arch::QCnn,
            "cnn" => Arch::Cnn,
            _ => return None,
        })
    }
}

/// Architecture and training hyperparameters; everything the run needs to
/// be reproduced, embedded verbatim in checkpoints.
#[derive(Clone, Debug, PartialEq)]
pub struct NetConfig {
    pub arch: Arch,
    pub activation: ActKind,
    pub seed: u64,
    /// Channel widths of the three convolution stages.
    pub widths: [usize; 3],
    pub classes: usize,
    pub dropout: f64,
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    /// Multiplier on the first layer's init scale. Chirality only enters
    /// through odd orders of the first activation, so the first layer
    /// starts hot enough for the curvature to matter.
    pub first_layer_gain: f64,
}

impl NetConfig {
    pub fn qcnn(seed: u64) -> Self {
        Self {
            arch: Arch::QCnn,
            activation: ActKind::Arctan,
            seed,
            widths: [10, 20, 40],
            classes: NUM_CLASSES,
            dropout: 0.2,
            lr: 3e-3,
            batch_size: 16,
            epochs: 40,
            first_layer_gain: 1.0,
        }
    }

    pub fn cnn(seed: u64) -> Self {
        Self {
            arch: Arch::Cnn,
            widths: [12, 24, 40],
            ..Self::qcnn(seed)
        }
    }

    pub fn to_text(&self) -> String {
        format!(
            "arch={}\nactivation={}\nseed={}\nwidths={},{},{}\nclasses={}\ndropout={}\nlr={}\nbatch_size={}\nepochs={}\nfirst_layer_gain={}\n",
            self.arch.name(),
            self.activation.name(),
            self.seed,
            self.widths[0],
            self.widths[1],
            self.widths[2],
            self.classes,
            self.dropout,
            self.lr,
            self.batch_size,
            self.epochs,
            self.first_layer_gain,
        )
    }

    pub fn from_text(text: &str) -> Option<Self> {
        let mut cfg = Self::qcnn(0);
        for line in text.lines() {
            let (key, value) = line.split_once('=')?;
            match key {
                "arch" => cfg.arch = Arch::parse(value)?,
                "activation" => cfg.activation = ActKind::parse(value)?,
                "seed" => cfg.seed = value.parse().ok()?,
                "widths" => {
                    let mut it = value.split(',');
                    for w in cfg.widths.iter_mut() {
                        *w = it.next()?.parse().ok()?;
                    }
                }
                "classes" => cfg.classes = value.parse().ok()?,
                "dropout" => cfg.dropout = value.parse().ok()?,
                "lr" => cfg.lr = value.parse().ok()?,
                "batch_size" => cfg.batch_size = value.parse().ok()?,
                "epochs" => cfg.epochs = value.parse().ok()?,
                "first_layer_gain" => cfg.first_layer_gain = value.parse().ok()?,
                _ => {}
            }
        }
        Some(cfg)
    }
}

#[derive(Clone, Debug)]
pub struct Network {
    pub layers: Vec<Layer>,
    pub input_shape: Shape,
    pub config: NetConfig,
}

/// Per-layer parameter gradients, in the layers' flat parameter layout.
#[derive(Clone, Debug)]
pub struct Gradients(pub Vec<Vec<f64>>);

impl Gradients {
    pub fn zeros_like(net: &Network) -> Self {
        Gradients(net.layers.iter().map(|l| vec![0.0; l.params().len()]).collect())
    }

    pub fn accumulate(&mut self, other: &Gradients) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, s: f64) {
        for g in self.0.iter_mut() {
            for v in g.iter_mut() {
                *v *= s;
            }
        }
    }
}

/// Glorot-uniform fill for a weight block, biases left at zero.
fn init_uniform(rng: &mut impl Rng, weights: &mut [f64], fan_in: usize, fan_out: usize, gain: f64) {
    let s = gain * (6.0 / (fan_in + fan_out) as f64).sqrt();
    for w in weights.iter_mut() {
        *w = rng.gen_range(-s..s);
    }
}

impl Network {
    /// Build the configured architecture with seeded initialization.
    pub fn build(config: &NetConfig) -> Network {
        let mut rng = rng::stream(config.seed, &[domain::NET_INIT]);
        let [w0, w1, w2] = config.widths;
        let classes = config.classes;
        let act = |k: ActKind| Layer::Activation(Activation { kind: k });

        let conv = |rng: &mut rand_chacha::ChaCha8Rng,
                    kh: usize,
                    kw: usize,
                    cin: usize,
                    cout: usize,
                    stride: usize,
                    gain: f64| {
            let mut params = vec![0.0; kh * kw * cin * cout + cout];
            let wlen = kh * kw * cin * cout;
            init_uniform(rng, &mut params[..wlen], kh * kw * cin, kh * kw * cout, gain);
            Layer::Conv(Conv {
                kh,
                kw,
                cin,
                cout,
                stride,
                params,
            })
        };
        let gain = config.first_layer_gain;

        let (layers, input_shape) = match config.arch {
            Arch::QCnn => {
                let mut qparams = vec![0.0; 4 * 2 * 2 * w0 + 4 * w0];
                let wlen = 4 * 2 * 2 * w0;
                init_uniform(
                    &mut rng,
                    &mut qparams[..wlen],
                    4 * 2 * 2,
                    4 * 2 * 2 * w0,
                    gain,
                );
                let mut dm_params = vec![0.0; classes * 4 + classes];
                init_uniform(&mut rng, &mut dm_params[..classes * 4], 4, 1, 1.0);
                let layers = vec![
                    Layer::PeriodicPad(PeriodicPad { ph: 1, pw: 1 }),
                    Layer::QConv(QConv {
                        kh: 2,
                        kw: 2,
                        cin: 1,
                        cout: w0,
                        stride: 1,
                        params: qparams,
                    }),
                    act(config.activation),
                    conv(&mut rng, 5, 5, w0, w1, 5, 1.0),
                    act(ActKind::Tanh),
                    conv(&mut rng, 4, 4, w1, w2, 4, 1.0),
                    act(ActKind::Tanh),
                    conv(&mut rng, 2, 2, w2, classes, 2, 1.0),
                    act(ActKind::Tanh),
                    Layer::Dropout(Dropout {
                        rate: config.dropout,
                        slot: 0,
                    }),
                    Layer::DepthMix(DepthMix {
                        channels: classes,
                        params: dm_params,
                    }),
                ];
                (layers, Shape::new(4, 40, 40, 1))
            }
            Arch::Cnn => {
                let layers = vec![
                    Layer::PeriodicPad(PeriodicPad { ph: 1, pw: 1 }),
                    conv(&mut rng, 2, 2, 3, w0, 1, gain),
                    act(config.activation),
                    conv(&mut rng, 5, 5, w0, w1, 5, 1.0),
                    act(ActKind::Tanh),
                    conv(&mut rng, 4, 4, w1, w2, 4, 1.0),
                    act(ActKind::Tanh),
                    Layer::Dropout(Dropout {
                        rate: config.dropout,
                        slot: 0,
                    }),
                    conv(&mut rng, 2, 2, w2, classes, 2, 1.0),
                ];
                (layers, Shape::new(1, 40, 40, 3))
            }
        };

        let net = Network {
            layers,
            input_shape,
            config: config.clone(),
        };
        debug_assert!(net.output_shape().is_ok());
        net
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.params().len()).sum()
    }

    pub fn output_shape(&self) -> Result<Shape> {
        let mut shape = self.input_shape;
        for (i, layer) in self.layers.iter().enumerate() {
            shape = layer.out_shape(i, shape)?;
        }
        Ok(shape)
    }

    /// Input sizes of the dropout layers, for mask generation.
    pub fn dropout_sizes(&self) -> Vec<(usize, f64)> {
        let mut shape = self.input_shape;
        let mut out = Vec::new();
        for (i, layer) in self.layers.iter().enumerate() {
            if let Layer::Dropout(d) = layer {
                out.push((shape.len(), d.rate));
            }
            shape = layer.out_shape(i, shape).expect("validated at build");
        }
        out
    }

    /// Run all layers, keeping each layer's input for the backward pass.
    /// The returned vector has one entry per layer plus the final output.
    pub fn run(&self, x: &Tensor, mode: Mode) -> Result<Vec<Tensor>> {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.clone());
        for (i, layer) in self.layers.iter().enumerate() {
            let y = layer.forward(i, acts.last().unwrap(), mode)?;
            acts.push(y);
        }
        Ok(acts)
    }

    /// Class probabilities for one input, with per-layer finiteness checks.
    pub fn forward(&self, x: &Tensor) -> Result<Vec<f64>> {
        let mut current = x.clone();
        for (i, layer) in self.layers.iter().enumerate() {
            current = layer.forward(i, &current, Mode::Eval)?;
            if !current.is_finite() {
                return Err(Error::NumericalFailure {
                    layer: i,
                    kind: layer.kind_name(),
                });
            }
        }
        Ok(softmax(&current.data))
    }

    pub fn logits<'a>(&self, acts: &'a [Tensor]) -> &'a [f64] {
        &acts.last().expect("run() output present").data
    }

    /// Reverse pass from the logit gradient; accumulates into `grads` and
    /// returns nothing (the input gradient is discarded).
    pub fn backward(&self, acts: &[Tensor], dlogits: &[f64], mode: Mode, grads: &mut Gradients) {
        let out_shape = acts.last().unwrap().shape;
        let mut dy = Tensor::from_data(out_shape, dlogits.to_vec());
        for (i, layer) in self.layers.iter().enumerate().rev() {
            dy = layer.backward(&acts[i], &dy, mode, &mut grads.0[i]);
        }
    }
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&v| (v - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.iter().map(|&e| e / sum).collect()
}

/// Cross-entropy of softmax probabilities against a one-hot class, plus the
/// logit gradient `p - onehot`.
pub fn cross_entropy(logits: &[f64], class: usize) -> (f64, Vec<f64>, Vec<f64>) {
    let probs = softmax(logits);
    let loss = -probs[class].max(1e-300).ln();
    let mut dlogits = probs.clone();
    dlogits[class] -= 1.0;
    (loss, dlogits, probs)
}

/// Encode a spin texture for the quaternion network: shape `(4, L, L, 1)`
/// with depth slices `(0, n_x, n_y, n_z)`.
pub fn encode_quaternion(t: &SpinTexture) -> Tensor {
    let l = t.l;
    let mut out = Tensor::zeros(Shape::new(4, l, l, 1));
    for i in 0..l {
        for j in 0..l {
            let s = t.spin(i, j);
            for d in 0..3 {
                *out.at_mut(d + 1, i, j, 0) = s[d];
            }
        }
    }
    out
}

/// Encode a spin texture for the plain network: shape `(1, L, L, 3)`.
pub fn encode_vector(t: &SpinTexture) -> Tensor {
    let l = t.l;
    let mut out = Tensor::zeros(Shape::new(1, l, l, 3));
    for i in 0..l {
        for j in 0..l {
            let s = t.spin(i, j);
            for d in 0..3 {
                *out.at_mut(0, i, j, d) = s[d];
            }
        }
    }
    out
}

pub fn encoder_for(arch: Arch) -> fn(&SpinTexture) -> Tensor {
    match arch {
        Arch::QCnn => encode_quaternion,
        Arch::Cnn => encode_vector,
    }
}

/// Argmax accuracy and the confusion matrix (`[true][predicted]`).
pub fn evaluate<S: Sync>(
    net: &Network,
    data: &[S],
    encode: impl Fn(&S) -> Tensor + Sync,
    label: impl Fn(&S) -> usize + Sync,
) -> Result<(f64, Vec<Vec<usize>>)> {
    let classes = net.config.classes;
    let predictions: Vec<Result<(usize, usize)>> = data
        .par_iter()
        .map(|s| {
            let probs = net.forward(&encode(s))?;
            let predicted = probs
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .map(|(i, _)| i)
                .unwrap_or(0);
            Ok((label(s), predicted))
        })
        .collect();

    let mut confusion = vec![vec![0usize; classes]; classes];
    let mut correct = 0usize;
    for p in predictions {
        let (truth, pred) = p?;
        confusion[truth][pred] += 1;
        if truth == pred {
            correct += 1;
        }
    }
    Ok((correct as f64 / data.len().max(1) as f64, confusion))
}
