//! Network layers: periodic padding, plain and quaternion convolutions,
//! the depth-mixing classifier head, activations, and dropout.
//!
//! Every layer exposes `forward`, a matching `backward` that accumulates
//! parameter gradients and returns the input gradient, and a flat parameter
//! vector (weights followed by biases) so the optimizer and checkpoints can
//! treat all layers uniformly.

use super::tensor::{Shape, Tensor};
use crate::error::{Error, Result};

/// Sign-permuted component stacks of the quaternion left-multiplication:
/// stack `l` of output row `s` uses component `QCONV_COMP[s][l]` of the
/// input with sign `QCONV_SIGN[s][l]`.
pub const QCONV_COMP: [[usize; 4]; 4] = [
    [0, 1, 2, 3],
    [1, 0, 3, 2],
    [2, 3, 0, 1],
    [3, 2, 1, 0],
];
pub const QCONV_SIGN: [[f64; 4]; 4] = [
    [1.0, -1.0, -1.0, -1.0],
    [1.0, 1.0, -1.0, 1.0],
    [1.0, 1.0, 1.0, -1.0],
    [1.0, -1.0, 1.0, 1.0],
];

/// Evaluation vs training pass; training carries one dropout mask per
/// dropout layer (indexed by slot).
#[derive(Clone, Copy)]
pub enum Mode<'a> {
    Eval,
    Train { masks: &'a [Vec<f64>] },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ActKind {
    Arctan,
    Tanh,
    Relu,
}

impl ActKind {
    pub fn name(self) -> &'static str {
        match self {
            ActKind::Arctan => "arctan",
            ActKind::Tanh => "tanh",
            ActKind::Relu => "relu",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "arctan" => ActKind::Arctan,
            "tanh" => ActKind::Tanh,
            "relu" => ActKind::Relu,
            _ => return None,
        })
    }

    pub fn tag(self) -> u8 {
        match self {
            ActKind::Arctan => 0,
            ActKind::Tanh => 1,
            ActKind::Relu => 2,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        Some(match tag {
            0 => ActKind::Arctan,
            1 => ActKind::Tanh,
            2 => ActKind::Relu,
            _ => return None,
        })
    }

    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            ActKind::Arctan => x.atan(),
            ActKind::Tanh => x.tanh(),
            ActKind::Relu => x.max(0.0),
        }
    }

    #[inline]
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            ActKind::Arctan => 1.0 / (1.0 + x * x),
            ActKind::Tanh => {
                let t = x.tanh();
                1.0 - t * t
            }
            ActKind::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// Wrap-around padding at the high end of both spatial axes.
#[derive(Clone, Debug)]
pub struct PeriodicPad {
    pub ph: usize,
    pub pw: usize,
}

/// Ordinary convolution applied independently to every depth slice with
/// shared kernels; with depth 1 this is a plain 2D convolution.
#[derive(Clone, Debug)]
pub struct Conv {
    pub kh: usize,
    pub kw: usize,
    pub cin: usize,
    pub cout: usize,
    pub stride: usize,
    /// `kh*kw*cin*cout` weights followed by `cout` biases.
    pub params: Vec<f64>,
}

/// Quaternion convolution: depth-4 input and kernels, output assembled from
/// the four sign-permuted stacks so that for 1x1 kernels it reduces to a
/// channel-wise Hamilton product `input * kernel`.
#[derive(Clone, Debug)]
pub struct QConv {
    pub kh: usize,
    pub kw: usize,
    pub cin: usize,
    pub cout: usize,
    pub stride: usize,
    /// `4*kh*kw*cin*cout` weights (stack-major) followed by `4*cout` biases.
    pub params: Vec<f64>,
}

/// Per-channel contraction of the four depth slices down to depth 1;
/// one length-4 kernel per channel.
#[derive(Clone, Debug)]
pub struct DepthMix {
    pub channels: usize,
    /// `channels*4` weights followed by `channels` biases.
    pub params: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct Activation {
    pub kind: ActKind,
}

/// Inverted-scaling dropout; identity outside training.
#[derive(Clone, Debug)]
pub struct Dropout {
    pub rate: f64,
    /// Index into the per-sample mask list.
    pub slot: usize,
}

#[derive(Clone, Debug)]
pub enum Layer {
    PeriodicPad(PeriodicPad),
    Conv(Conv),
    QConv(QConv),
    DepthMix(DepthMix),
    Activation(Activation),
    Dropout(Dropout),
}

impl Conv {
    pub fn weight_len(&self) -> usize {
        self.kh * self.kw * self.cin * self.cout
    }
}

impl QConv {
    pub fn weight_len(&self) -> usize {
        4 * self.kh * self.kw * self.cin * self.cout
    }
}

fn conv_out_extent(input: usize, kernel: usize, stride: usize) -> Option<usize> {
    if kernel > input || stride == 0 {
        None
    } else {
        Some((input - kernel) / stride + 1)
    }
}

impl Layer {
    pub fn kind_name(&self) -> &'static str {
        match self {
            Layer::PeriodicPad(_) => "periodic_pad",
            Layer::Conv(_) => "conv",
            Layer::QConv(_) => "qconv",
            Layer::DepthMix(_) => "depth_mix",
            Layer::Activation(_) => "activation",
            Layer::Dropout(_) => "dropout",
        }
    }

    pub fn params(&self) -> &[f64] {
        match self {
            Layer::Conv(l) => &l.params,
            Layer::QConv(l) => &l.params,
            Layer::DepthMix(l) => &l.params,
            _ => &[],
        }
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        match self {
            Layer::Conv(l) => &mut l.params,
            Layer::QConv(l) => &mut l.params,
            Layer::DepthMix(l) => &mut l.params,
            _ => &mut [],
        }
    }

    pub fn out_shape(&self, layer_idx: usize, x: Shape) -> Result<Shape> {
        let err = |msg: String| Error::LayerConfig {
            layer: layer_idx,
            kind: self.kind_name(),
            msg,
        };
        match self {
            Layer::PeriodicPad(l) => {
                if l.ph >= x.h || l.pw >= x.w {
                    return Err(err(format!("pad ({}, {}) too large for {x}", l.ph, l.pw)));
                }
                Ok(Shape::new(x.d, x.h + l.ph, x.w + l.pw, x.c))
            }
            Layer::Conv(l) => {
                if x.c != l.cin {
                    return Err(err(format!("expected {} input channels, got {x}", l.cin)));
                }
                let oh = conv_out_extent(x.h, l.kh, l.stride);
                let ow = conv_out_extent(x.w, l.kw, l.stride);
                match (oh, ow) {
                    (Some(oh), Some(ow)) => Ok(Shape::new(x.d, oh, ow, l.cout)),
                    _ => Err(err(format!(
                        "kernel {}x{} stride {} does not fit {x}",
                        l.kh, l.kw, l.stride
                    ))),
                }
            }
            Layer::QConv(l) => {
                if x.d != 4 {
                    return Err(err(format!("quaternion input must have depth 4, got {x}")));
                }
                if x.c != l.cin {
                    return Err(err(format!("expected {} input channels, got {x}", l.cin)));
                }
                let oh = conv_out_extent(x.h, l.kh, l.stride);
                let ow = conv_out_extent(x.w, l.kw, l.stride);
                match (oh, ow) {
                    (Some(oh), Some(ow)) => Ok(Shape::new(4, oh, ow, l.cout)),
                    _ => Err(err(format!(
                        "kernel {}x{} stride {} does not fit {x}",
                        l.kh, l.kw, l.stride
                    ))),
                }
            }
            Layer::DepthMix(l) => {
                if x.d != 4 {
                    return Err(err(format!("depth mix needs depth-4 input, got {x}")));
                }
                if x.c != l.channels {
                    return Err(err(format!(
                        "expected {} channels, got {x}",
                        l.channels
                    )));
                }
                Ok(Shape::new(1, x.h, x.w, x.c))
            }
            Layer::Activation(_) | Layer::Dropout(_) => Ok(x),
        }
    }

    pub fn forward(&self, layer_idx: usize, x: &Tensor, mode: Mode) -> Result<Tensor> {
        let out_shape = self.out_shape(layer_idx, x.shape)?;
        Ok(match self {
            Layer::PeriodicPad(_) => {
                let mut y = Tensor::zeros(out_shape);
                for d in 0..out_shape.d {
                    for i in 0..out_shape.h {
                        let si = i % x.shape.h;
                        for j in 0..out_shape.w {
                            let sj = j % x.shape.w;
                            let src = x.idx(d, si, sj, 0);
                            let dst = y.idx(d, i, j, 0);
                            y.data[dst..dst + x.shape.c]
                                .copy_from_slice(&x.data[src..src + x.shape.c]);
                        }
                    }
                }
                y
            }
            Layer::Conv(l) => conv_forward(l, x, out_shape),
            Layer::QConv(l) => qconv_forward(l, x, out_shape),
            Layer::DepthMix(l) => {
                let mut y = Tensor::zeros(out_shape);
                let (w, b) = l.params.split_at(l.channels * 4);
                for i in 0..out_shape.h {
                    for j in 0..out_shape.w {
                        for cc in 0..l.channels {
                            let mut acc = b[cc];
                            for dd in 0..4 {
                                acc += w[cc * 4 + dd] * x.at(dd, i, j, cc);
                            }
                            *y.at_mut(0, i, j, cc) = acc;
                        }
                    }
                }
                y
            }
            Layer::Activation(l) => Tensor::from_data(
                out_shape,
                x.data.iter().map(|&v| l.kind.apply(v)).collect(),
            ),
            Layer::Dropout(l) => match mode {
                Mode::Eval => x.clone(),
                Mode::Train { masks } => {
                    let mask = &masks[l.slot];
                    debug_assert_eq!(mask.len(), x.len());
                    Tensor::from_data(
                        out_shape,
                        x.data.iter().zip(mask).map(|(v, m)| v * m).collect(),
                    )
                }
            },
        })
    }

    /// Accumulate parameter gradients into `grad` (same layout as `params`)
    /// and return the gradient with respect to the input.
    pub fn backward(&self, x: &Tensor, dy: &Tensor, mode: Mode, grad: &mut [f64]) -> Tensor {
        match self {
            Layer::PeriodicPad(_) => {
                let mut dx = Tensor::zeros(x.shape);
                for d in 0..dy.shape.d {
                    for i in 0..dy.shape.h {
                        let si = i % x.shape.h;
                        for j in 0..dy.shape.w {
                            let sj = j % x.shape.w;
                            let src = dy.idx(d, i, j, 0);
                            let dst = dx.idx(d, si, sj, 0);
                            for cc in 0..x.shape.c {
                                dx.data[dst + cc] += dy.data[src + cc];
                            }
                        }
                    }
                }
                dx
            }
            Layer::Conv(l) => conv_backward(l, x, dy, grad),
            Layer::QConv(l) => qconv_backward(l, x, dy, grad),
            Layer::DepthMix(l) => {
                let (w, _) = l.params.split_at(l.channels * 4);
                let (gw, gb) = grad.split_at_mut(l.channels * 4);
                let mut dx = Tensor::zeros(x.shape);
                for i in 0..dy.shape.h {
                    for j in 0..dy.shape.w {
                        for cc in 0..l.channels {
                            let g = dy.at(0, i, j, cc);
                            gb[cc] += g;
                            for dd in 0..4 {
                                gw[cc * 4 + dd] += x.at(dd, i, j, cc) * g;
                                *dx.at_mut(dd, i, j, cc) += w[cc * 4 + dd] * g;
                            }
                        }
                    }
                }
                dx
            }
            Layer::Activation(l) => Tensor::from_data(
                x.shape,
                x.data
                    .iter()
                    .zip(&dy.data)
                    .map(|(&xv, &gv)| l.kind.derivative(xv) * gv)
                    .collect(),
            ),
            Layer::Dropout(l) => match mode {
                Mode::Eval => dy.clone(),
                Mode::Train { masks } => {
                    let mask = &masks[l.slot];
                    Tensor::from_data(
                        x.shape,
                        dy.data.iter().zip(mask).map(|(v, m)| v * m).collect(),
                    )
                }
            },
        }
    }
}

fn conv_forward(l: &Conv, x: &Tensor, out_shape: Shape) -> Tensor {
    let mut y = Tensor::zeros(out_shape);
    let (w, b) = l.params.split_at(l.weight_len());
    for dd in 0..out_shape.d {
        for oi in 0..out_shape.h {
            for oj in 0..out_shape.w {
                let out_base = y.idx(dd, oi, oj, 0);
                y.data[out_base..out_base + l.cout].copy_from_slice(b);
                for ki in 0..l.kh {
                    let xi = oi * l.stride + ki;
                    for kj in 0..l.kw {
                        let xj = oj * l.stride + kj;
                        let x_base = x.idx(dd, xi, xj, 0);
                        for t in 0..l.cin {
                            let v = x.data[x_base + t];
                            if v == 0.0 {
                                continue;
                            }
                            let w_base = ((ki * l.kw + kj) * l.cin + t) * l.cout;
                            let w_row = &w[w_base..w_base + l.cout];
                            let out_row = &mut y.data[out_base..out_base + l.cout];
                            for (o, wv) in out_row.iter_mut().zip(w_row) {
                                *o += v * wv;
                            }
                        }
                    }
                }
            }
        }
    }
    y
}

fn conv_backward(l: &Conv, x: &Tensor, dy: &Tensor, grad: &mut [f64]) -> Tensor {
    let (w, _) = l.params.split_at(l.weight_len());
    let (gw, gb) = grad.split_at_mut(l.weight_len());
    let mut dx = Tensor::zeros(x.shape);
    for dd in 0..dy.shape.d {
        for oi in 0..dy.shape.h {
            for oj in 0..dy.shape.w {
                let dy_base = dy.idx(dd, oi, oj, 0);
                let dy_row = &dy.data[dy_base..dy_base + l.cout];
                for (gbv, dyv) in gb.iter_mut().zip(dy_row) {
                    *gbv += dyv;
                }
                for ki in 0..l.kh {
                    let xi = oi * l.stride + ki;
                    for kj in 0..l.kw {
                        let xj = oj * l.stride + kj;
                        let x_base = x.idx(dd, xi, xj, 0);
                        for t in 0..l.cin {
                            let xv = x.data[x_base + t];
                            let w_base = ((ki * l.kw + kj) * l.cin + t) * l.cout;
                            let w_row = &w[w_base..w_base + l.cout];
                            let gw_row = &mut gw[w_base..w_base + l.cout];
                            let mut dot = 0.0;
                            for ((gwv, wv), dyv) in
                                gw_row.iter_mut().zip(w_row).zip(dy_row)
                            {
                                *gwv += xv * dyv;
                                dot += wv * dyv;
                            }
                            dx.data[x_base + t] += dot;
                        }
                    }
                }
            }
        }
    }
    dx
}

fn qconv_forward(l: &QConv, x: &Tensor, out_shape: Shape) -> Tensor {
    let mut y = Tensor::zeros(out_shape);
    let (w, b) = l.params.split_at(l.weight_len());
    let slice_w = l.kh * l.kw * l.cin * l.cout;
    for s in 0..4 {
        // depth row s accumulates all four permuted stacks
        for oi in 0..out_shape.h {
            for oj in 0..out_shape.w {
                let out_base = y.idx(s, oi, oj, 0);
                y.data[out_base..out_base + l.cout]
                    .copy_from_slice(&b[s * l.cout..(s + 1) * l.cout]);
            }
        }
        for stack in 0..4 {
            let sign = QCONV_SIGN[s][stack];
            let src_d = QCONV_COMP[s][stack];
            let w_stack = &w[stack * slice_w..(stack + 1) * slice_w];
            for oi in 0..out_shape.h {
                for oj in 0..out_shape.w {
                    let out_base = y.idx(s, oi, oj, 0);
                    for ki in 0..l.kh {
                        let xi = oi * l.stride + ki;
                        for kj in 0..l.kw {
                            let xj = oj * l.stride + kj;
                            let x_base = x.idx(src_d, xi, xj, 0);
                            for t in 0..l.cin {
                                let v = sign * x.data[x_base + t];
                                if v == 0.0 {
                                    continue;
                                }
                                let w_base = ((ki * l.kw + kj) * l.cin + t) * l.cout;
                                let w_row = &w_stack[w_base..w_base + l.cout];
                                let out_row = &mut y.data[out_base..out_base + l.cout];
                                for (o, wv) in out_row.iter_mut().zip(w_row) {
                                    *o += v * wv;
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    y
}

fn qconv_backward(l: &QConv, x: &Tensor, dy: &Tensor, grad: &mut [f64]) -> Tensor {
    let slice_w = l.kh * l.kw * l.cin * l.cout;
    let (w, _) = l.params.split_at(l.weight_len());
    let (gw, gb) = grad.split_at_mut(l.weight_len());
    let mut dx = Tensor::zeros(x.shape);
    for s in 0..4 {
        for oi in 0..dy.shape.h {
            for oj in 0..dy.shape.w {
                let dy_base = dy.idx(s, oi, oj, 0);
                let dy_row = &dy.data[dy_base..dy_base + l.cout];
                let gb_row = &mut gb[s * l.cout..(s + 1) * l.cout];
                for (gbv, dyv) in gb_row.iter_mut().zip(dy_row) {
                    *gbv += dyv;
                }
            }
        }
        for stack in 0..4 {
            let sign = QCONV_SIGN[s][stack];
            let src_d = QCONV_COMP[s][stack];
            let w_stack = &w[stack * slice_w..(stack + 1) * slice_w];
            let gw_stack = &mut gw[stack * slice_w..(stack + 1) * slice_w];
            for oi in 0..dy.shape.h {
                for oj in 0..dy.shape.w {
                    let dy_base = dy.idx(s, oi, oj, 0);
                    let dy_row = &dy.data[dy_base..dy_base + l.cout];
                    for ki in 0..l.kh {
                        let xi = oi * l.stride + ki;
                        for kj in 0..l.kw {
                            let xj = oj * l.stride + kj;
                            let x_base = x.idx(src_d, xi, xj, 0);
                            for t in 0..l.cin {
                                let xv = sign * x.data[x_base + t];
                                let w_base = ((ki * l.kw + kj) * l.cin + t) * l.cout;
                                let w_row = &w_stack[w_base..w_base + l.cout];
                                let gw_row = &mut gw_stack[w_base..w_base + l.cout];
                                let mut dot = 0.0;
                                for ((gwv, wv), dyv) in
                                    gw_row.iter_mut().zip(w_row).zip(dy_row)
                                {
                                    *gwv += xv * dyv;
                                    dot += wv * dyv;
                                }
                                dx.data[x_base + t] += sign * dot;
                            }
                        }
                    }
                }
            }
        }
    }
    dx
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quaternion::Quaternion;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_tensor(rng: &mut impl Rng, shape: Shape) -> Tensor {
        Tensor::from_data(
            shape,
            (0..shape.len()).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        )
    }

    fn random_conv(rng: &mut impl Rng, kh: usize, kw: usize, cin: usize, cout: usize, stride: usize) -> Conv {
        let n = kh * kw * cin * cout + cout;
        Conv {
            kh,
            kw,
            cin,
            cout,
            stride,
            params: (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        }
    }

    /// Reference implementation of the convolution as an explicit loop.
    fn conv_reference(l: &Conv, x: &Tensor) -> Tensor {
        let out_shape = Layer::Conv(l.clone()).out_shape(0, x.shape).unwrap();
        let (w, b) = l.params.split_at(l.weight_len());
        let mut y = Tensor::zeros(out_shape);
        for dd in 0..out_shape.d {
            for oi in 0..out_shape.h {
                for oj in 0..out_shape.w {
                    for tt in 0..l.cout {
                        let mut acc = b[tt];
                        for ki in 0..l.kh {
                            for kj in 0..l.kw {
                                for t in 0..l.cin {
                                    acc += x.at(dd, oi * l.stride + ki, oj * l.stride + kj, t)
                                        * w[((ki * l.kw + kj) * l.cin + t) * l.cout + tt];
                                }
                            }
                        }
                        *y.at_mut(dd, oi, oj, tt) = acc;
                    }
                }
            }
        }
        y
    }

    #[test]
    fn periodic_pad_wraps_rows_and_columns() {
        let x = Tensor::from_data(
            Shape::new(1, 2, 2, 1),
            vec![1.0, 2.0, 3.0, 4.0],
        );
        let layer = Layer::PeriodicPad(PeriodicPad { ph: 1, pw: 1 });
        let y = layer.forward(0, &x, Mode::Eval).unwrap();
        assert_eq!(y.shape, Shape::new(1, 3, 3, 1));
        // wrapped row/column repeat the first ones
        assert_eq!(y.at(0, 2, 0, 0), 1.0);
        assert_eq!(y.at(0, 2, 1, 0), 2.0);
        assert_eq!(y.at(0, 0, 2, 0), 1.0);
        assert_eq!(y.at(0, 2, 2, 0), 1.0);

        let identity = Layer::PeriodicPad(PeriodicPad { ph: 0, pw: 0 });
        assert_eq!(identity.forward(0, &x, Mode::Eval).unwrap().data, x.data);
    }

    #[test]
    fn pad_then_stride_one_conv_preserves_extent() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = random_tensor(&mut rng, Shape::new(1, 8, 8, 2));
        let pad = Layer::PeriodicPad(PeriodicPad { ph: 1, pw: 1 });
        let conv = Layer::Conv(random_conv(&mut rng, 2, 2, 2, 3, 1));
        let y = conv
            .forward(1, &pad.forward(0, &x, Mode::Eval).unwrap(), Mode::Eval)
            .unwrap();
        assert_eq!((y.shape.h, y.shape.w), (8, 8));
    }

    #[test]
    fn identity_kernel_copies_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = random_tensor(&mut rng, Shape::new(2, 4, 4, 1));
        let conv = Conv {
            kh: 1,
            kw: 1,
            cin: 1,
            cout: 1,
            stride: 1,
            params: vec![1.0, 0.0],
        };
        let y = Layer::Conv(conv).forward(0, &x, Mode::Eval).unwrap();
        assert_eq!(y.data, x.data);
    }

    #[test]
    fn conv_matches_reference_loop_on_random_shapes() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let kh = rng.gen_range(1..=3);
            let kw = rng.gen_range(1..=3);
            let stride = rng.gen_range(1..=2);
            let cin = rng.gen_range(1..=3);
            let cout = rng.gen_range(1..=4);
            let h = rng.gen_range(kh..=8);
            let w = rng.gen_range(kw..=8);
            let d = rng.gen_range(1..=4);
            let x = random_tensor(&mut rng, Shape::new(d, h, w, cin));
            let conv = random_conv(&mut rng, kh, kw, cin, cout, stride);
            let fast = Layer::Conv(conv.clone()).forward(0, &x, Mode::Eval).unwrap();
            let slow = conv_reference(&conv, &x);
            let err = fast
                .data
                .iter()
                .zip(&slow.data)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            assert!(err < 1e-12);
        }
    }

    #[test]
    fn non_overlapping_stride_tiles_the_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x = random_tensor(&mut rng, Shape::new(1, 4, 4, 1));
        let conv = random_conv(&mut rng, 2, 2, 1, 1, 2);
        let y = Layer::Conv(conv).forward(0, &x, Mode::Eval).unwrap();
        assert_eq!((y.shape.h, y.shape.w), (2, 2));
    }

    #[test]
    fn qconv_1x1_is_the_hamilton_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let x = random_tensor(&mut rng, Shape::new(4, 1, 1, 1));
            let mut qc = QConv {
                kh: 1,
                kw: 1,
                cin: 1,
                cout: 1,
                stride: 1,
                params: (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            };
            // zero biases: pure product
            qc.params[4..].iter_mut().for_each(|b| *b = 0.0);
            let kernel = Quaternion::new(qc.params[0], qc.params[1], qc.params[2], qc.params[3]);
            let input = Quaternion::new(x.data[0], x.data[1], x.data[2], x.data[3]);
            let y = Layer::QConv(qc).forward(0, &x, Mode::Eval).unwrap();
            let got = Quaternion::new(y.data[0], y.data[1], y.data[2], y.data[3]);
            let want = input * kernel;
            assert!((got - want).norm() < 1e-12, "{got:?} vs {want:?}");
        }
    }

    #[test]
    fn qconv_identity_kernel_passes_input_through() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let x = random_tensor(&mut rng, Shape::new(4, 3, 3, 1));
        let mut params = vec![0.0; 4 * 1 + 4];
        params[0] = 1.0; // kernel (1, 0, 0, 0)
        let qc = QConv {
            kh: 1,
            kw: 1,
            cin: 1,
            cout: 1,
            stride: 1,
            params,
        };
        let y = Layer::QConv(qc).forward(0, &x, Mode::Eval).unwrap();
        let err = y
            .data
            .iter()
            .zip(&x.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-15);
    }

    #[test]
    fn pure_inputs_give_negative_dot_in_the_scalar_slice() {
        // pure input, pure kernel: scalar output is minus the component dot
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut x = random_tensor(&mut rng, Shape::new(4, 1, 1, 1));
        x.data[0] = 0.0;
        let mut params: Vec<f64> = (0..8).map(|_| rng.gen_range(-1.0..1.0)).collect();
        params[0] = 0.0; // pure kernel
        params[4..].iter_mut().for_each(|b| *b = 0.0);
        let dot: f64 = (1..4).map(|i| x.data[i] * params[i]).sum();
        let qc = QConv {
            kh: 1,
            kw: 1,
            cin: 1,
            cout: 1,
            stride: 1,
            params,
        };
        let y = Layer::QConv(qc).forward(0, &x, Mode::Eval).unwrap();
        assert!((y.data[0] + dot).abs() < 1e-15);
    }

    /// Reference for the quaternion convolution built from the plain
    /// reference convolution applied to sign-permuted component stacks.
    fn qconv_reference(l: &QConv, x: &Tensor) -> Tensor {
        let out_shape = Layer::QConv(l.clone()).out_shape(0, x.shape).unwrap();
        let slice_w = l.kh * l.kw * l.cin * l.cout;
        let (w, b) = l.params.split_at(l.weight_len());
        let mut y = Tensor::zeros(out_shape);
        for s in 0..4 {
            for stack in 0..4 {
                // build the permuted single-depth input
                let src_d = QCONV_COMP[s][stack];
                let sign = QCONV_SIGN[s][stack];
                let mut perm = Tensor::zeros(Shape::new(1, x.shape.h, x.shape.w, x.shape.c));
                for i in 0..x.shape.h {
                    for j in 0..x.shape.w {
                        for t in 0..x.shape.c {
                            *perm.at_mut(0, i, j, t) = sign * x.at(src_d, i, j, t);
                        }
                    }
                }
                let conv = Conv {
                    kh: l.kh,
                    kw: l.kw,
                    cin: l.cin,
                    cout: l.cout,
                    stride: l.stride,
                    params: {
                        let mut p = w[stack * slice_w..(stack + 1) * slice_w].to_vec();
                        p.extend(std::iter::repeat(0.0).take(l.cout));
                        p
                    },
                };
                let part = conv_reference(&conv, &perm);
                for i in 0..out_shape.h {
                    for j in 0..out_shape.w {
                        for t in 0..l.cout {
                            *y.at_mut(s, i, j, t) += part.at(0, i, j, t);
                        }
                    }
                }
            }
            for i in 0..out_shape.h {
                for j in 0..out_shape.w {
                    for t in 0..l.cout {
                        *y.at_mut(s, i, j, t) += b[s * l.cout + t];
                    }
                }
            }
        }
        y
    }

    #[test]
    fn qconv_matches_reference_stacks() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        for _ in 0..10 {
            let kh = rng.gen_range(1..=2);
            let kw = rng.gen_range(1..=2);
            let stride = rng.gen_range(1..=2);
            let cin = rng.gen_range(1..=2);
            let cout = rng.gen_range(1..=3);
            let h = rng.gen_range(kh.max(2)..=6);
            let w = rng.gen_range(kw.max(2)..=6);
            let x = random_tensor(&mut rng, Shape::new(4, h, w, cin));
            let n = 4 * kh * kw * cin * cout + 4 * cout;
            let qc = QConv {
                kh,
                kw,
                cin,
                cout,
                stride,
                params: (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            };
            let fast = Layer::QConv(qc.clone()).forward(0, &x, Mode::Eval).unwrap();
            let slow = qconv_reference(&qc, &x);
            let err = fast
                .data
                .iter()
                .zip(&slow.data)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            assert!(err < 1e-12);
        }
    }

    #[test]
    fn depth_mix_reference_and_selector() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let x = random_tensor(&mut rng, Shape::new(4, 2, 2, 3));

        // depth selector (1, 0, 0, 0) per channel copies the scalar slice
        let mut params = vec![0.0; 3 * 4 + 3];
        for cc in 0..3 {
            params[cc * 4] = 1.0;
        }
        let dm = DepthMix {
            channels: 3,
            params,
        };
        let y = Layer::DepthMix(dm).forward(0, &x, Mode::Eval).unwrap();
        assert_eq!(y.shape.d, 1);
        for i in 0..2 {
            for j in 0..2 {
                for cc in 0..3 {
                    assert_eq!(y.at(0, i, j, cc), x.at(0, i, j, cc));
                }
            }
        }

        // random kernels against an explicit loop
        let n = 3 * 4 + 3;
        let dm = DepthMix {
            channels: 3,
            params: (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        };
        let y = Layer::DepthMix(dm.clone()).forward(0, &x, Mode::Eval).unwrap();
        let (w, b) = dm.params.split_at(12);
        for i in 0..2 {
            for j in 0..2 {
                for cc in 0..3 {
                    let mut acc = b[cc];
                    for dd in 0..4 {
                        acc += w[cc * 4 + dd] * x.at(dd, i, j, cc);
                    }
                    assert!((y.at(0, i, j, cc) - acc).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn conv_keeps_depth_slices_independent() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let x = random_tensor(&mut rng, Shape::new(4, 4, 4, 2));
        let mut conv = random_conv(&mut rng, 2, 2, 2, 3, 2);
        // bias-free so a zeroed slice maps exactly to zero
        let wlen = conv.weight_len();
        conv.params[wlen..].iter_mut().for_each(|b| *b = 0.0);
        let layer = Layer::Conv(conv);

        let full = layer.forward(0, &x, Mode::Eval).unwrap();
        for zeroed in 0..4 {
            let mut masked = x.clone();
            for i in 0..4 {
                for j in 0..4 {
                    for t in 0..2 {
                        *masked.at_mut(zeroed, i, j, t) = 0.0;
                    }
                }
            }
            let y = layer.forward(0, &masked, Mode::Eval).unwrap();
            for d in 0..4 {
                for i in 0..y.shape.h {
                    for j in 0..y.shape.w {
                        for t in 0..y.shape.c {
                            if d == zeroed {
                                assert_eq!(y.at(d, i, j, t), 0.0);
                            } else {
                                assert_eq!(y.at(d, i, j, t), full.at(d, i, j, t));
                            }
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn activation_values_and_asymptotes() {
        assert_eq!(ActKind::Arctan.apply(0.0), 0.0);
        assert!((ActKind::Arctan.apply(1e12) - std::f64::consts::FRAC_PI_2).abs() < 1e-9);
        assert!((ActKind::Arctan.apply(-1e12) + std::f64::consts::FRAC_PI_2).abs() < 1e-9);
        assert_eq!(ActKind::Tanh.apply(0.0), 0.0);
        assert_eq!(ActKind::Relu.apply(-2.0), 0.0);
        assert_eq!(ActKind::Relu.apply(2.0), 2.0);
    }

    #[test]
    fn activation_derivatives_match_finite_differences() {
        let h = 1e-6;
        for kind in [ActKind::Arctan, ActKind::Tanh, ActKind::Relu] {
            for &x in &[-1.7, -0.4, 0.3, 1.1, 2.5] {
                let fd = (kind.apply(x + h) - kind.apply(x - h)) / (2.0 * h);
                let an = kind.derivative(x);
                assert!(
                    (fd - an).abs() <= 1e-6 * (1.0 + an.abs()),
                    "{} at {x}: fd {fd} vs {an}",
                    kind.name()
                );
            }
        }
    }

    #[test]
    fn dropout_scales_by_mask_in_training_only() {
        let x = Tensor::from_data(Shape::new(1, 1, 1, 4), vec![1.0, 2.0, 3.0, 4.0]);
        let layer = Layer::Dropout(Dropout { rate: 0.5, slot: 0 });
        let masks = vec![vec![0.0, 2.0, 0.0, 2.0]];
        let y = layer
            .forward(0, &x, Mode::Train { masks: &masks })
            .unwrap();
        assert_eq!(y.data, vec![0.0, 4.0, 0.0, 8.0]);
        let y = layer.forward(0, &x, Mode::Eval).unwrap();
        assert_eq!(y.data, x.data);
    }
}
