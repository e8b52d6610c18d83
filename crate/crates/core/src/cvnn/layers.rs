//! Layer kinds and their forward/backward passes on planar tensors.
//!
//! Gradients are taken on the real split `(Re, Im)` of every value. For a
//! real loss this is the Wirtinger gradient `2 dL/dz*` with its real and
//! imaginary parts stored in the two slots.

use super::batchnorm::{BatchNorm, BnCache};
use super::gemm::{gemm, Layout};
use super::{Domain, Tensor};
use crate::error::{invalid, Error, Result};
use crate::linalg::Rng;

/// Serializable description of one layer. Channel and feature counts are in
/// units of the layer's domain (complex channels for complex layers).
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LayerSpec {
    Conv2d {
        domain: Domain,
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        padding: usize,
    },
    Dense {
        domain: Domain,
        inputs: usize,
        outputs: usize,
    },
    /// Split-type ReLU, applied to real and imaginary parts separately.
    Relu { domain: Domain },
    /// Split-type logistic sigmoid.
    Sigmoid { domain: Domain },
    BatchNorm { domain: Domain, channels: usize },
    Flatten,
    /// Reinterprets `c` complex values as `2c` real ones (real parts first).
    ToReal,
    /// Inverse of [`LayerSpec::ToReal`].
    ToComplex,
    /// Adds the model input to the running activation.
    ResidualAdd,
}

impl LayerSpec {
    pub fn kind_name(&self) -> &'static str {
        match self {
            LayerSpec::Conv2d { domain: Domain::Complex, .. } => "complex_conv2d",
            LayerSpec::Conv2d { .. } => "real_conv2d",
            LayerSpec::Dense { domain: Domain::Complex, .. } => "complex_dense",
            LayerSpec::Dense { .. } => "real_dense",
            LayerSpec::Relu { domain: Domain::Complex } => "complex_relu",
            LayerSpec::Relu { .. } => "real_relu",
            LayerSpec::Sigmoid { domain: Domain::Complex } => "complex_sigmoid",
            LayerSpec::Sigmoid { .. } => "real_sigmoid",
            LayerSpec::BatchNorm { domain: Domain::Complex, .. } => "complex_batchnorm",
            LayerSpec::BatchNorm { .. } => "real_batchnorm",
            LayerSpec::Flatten => "flatten",
            LayerSpec::ToReal => "to_real",
            LayerSpec::ToComplex => "to_complex",
            LayerSpec::ResidualAdd => "residual_add",
        }
    }
}

/// Per-sample shape of an activation: `[c, h, w]` or `[f]` in domain units.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Signature {
    pub domain: Domain,
    pub dims: Vec<usize>,
}

impl Signature {
    pub fn new(domain: Domain, dims: &[usize]) -> Self {
        Self { domain, dims: dims.to_vec() }
    }

    /// Per-sample shape in real slots.
    pub fn real_dims(&self) -> Vec<usize> {
        let mut d = self.dims.clone();
        d[0] *= self.domain.width();
        d
    }

    pub fn real_len(&self) -> usize {
        self.real_dims().iter().product()
    }

    /// Full tensor shape for a batch.
    pub fn batch_shape(&self, batch: usize) -> Vec<usize> {
        let mut s = vec![batch];
        s.extend(self.real_dims());
        s
    }
}

/// A trainable array with its accumulated gradient. Complex parameters are
/// stored interleaved `(re, im)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Param {
    pub value: Vec<f64>,
    pub grad: Vec<f64>,
}

impl Param {
    pub(crate) fn zeros(n: usize) -> Self {
        Self { value: vec![0.0; n], grad: vec![0.0; n] }
    }

    pub(crate) fn filled(n: usize, v: f64) -> Self {
        Self { value: vec![v; n], grad: vec![0.0; n] }
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }
}

/// Weights shared by convolution (kernel `k`) and dense (`k = 1`) layers.
#[derive(Clone, Debug, PartialEq)]
pub(crate) struct Affine {
    pub domain: Domain,
    pub n_in: usize,
    pub n_out: usize,
    pub kk: usize,
    /// `n_out x n_in x kk`, interleaved if complex.
    pub weight: Param,
    pub bias: Param,
}

impl Affine {
    fn new(domain: Domain, n_in: usize, n_out: usize, kk: usize, rng: &mut Rng) -> Self {
        let w = domain.width();
        let limit = (6.0 / ((n_in + n_out) * kk) as f64).sqrt() / (w as f64).sqrt();
        let count = n_out * n_in * kk * w;
        let value = (0..count).map(|_| rng.uniform_range(-limit, limit)).collect();
        Self {
            domain,
            n_in,
            n_out,
            kk,
            weight: Param { value, grad: vec![0.0; count] },
            bias: Param::zeros(n_out * w),
        }
    }

    fn rows(&self) -> usize {
        self.n_out * self.domain.width()
    }

    fn cols(&self) -> usize {
        self.n_in * self.domain.width() * self.kk
    }

    /// Real `rows x cols` operator. A complex weight `w` becomes the block
    /// `[[Re w, -Im w], [Im w, Re w]]` acting on `[Re x; Im x]`.
    fn matrix(&self) -> Vec<f64> {
        match self.domain {
            Domain::Real => self.weight.value.clone(),
            Domain::Complex => {
                let (ci, co, kk) = (self.n_in, self.n_out, self.kk);
                let cols = self.cols();
                let mut m = vec![0.0; self.rows() * cols];
                for o in 0..co {
                    for i in 0..ci {
                        for q in 0..kk {
                            let idx = 2 * ((o * ci + i) * kk + q);
                            let (wr, wi) = (self.weight.value[idx], self.weight.value[idx + 1]);
                            m[o * cols + i * kk + q] = wr;
                            m[o * cols + (ci + i) * kk + q] = -wi;
                            m[(co + o) * cols + i * kk + q] = wi;
                            m[(co + o) * cols + (ci + i) * kk + q] = wr;
                        }
                    }
                }
                m
            }
        }
    }

    /// Folds the gradient of the real operator back onto the parameters.
    fn add_matrix_grad(&mut self, g: &[f64]) {
        match self.domain {
            Domain::Real => {
                for (a, b) in self.weight.grad.iter_mut().zip(g) {
                    *a += b;
                }
            }
            Domain::Complex => {
                let (ci, co, kk) = (self.n_in, self.n_out, self.kk);
                let cols = self.cols();
                for o in 0..co {
                    for i in 0..ci {
                        for q in 0..kk {
                            let idx = 2 * ((o * ci + i) * kk + q);
                            let rr = g[o * cols + i * kk + q];
                            let ri = g[o * cols + (ci + i) * kk + q];
                            let ir = g[(co + o) * cols + i * kk + q];
                            let ii = g[(co + o) * cols + (ci + i) * kk + q];
                            self.weight.grad[idx] += rr + ii;
                            self.weight.grad[idx + 1] += ir - ri;
                        }
                    }
                }
            }
        }
    }

    /// Bias of real output row `r`.
    fn bias_at(&self, r: usize) -> f64 {
        match self.domain {
            Domain::Real => self.bias.value[r],
            Domain::Complex => {
                let (o, part) = if r < self.n_out { (r, 0) } else { (r - self.n_out, 1) };
                self.bias.value[2 * o + part]
            }
        }
    }

    fn add_bias_grad(&mut self, r: usize, g: f64) {
        let idx = match self.domain {
            Domain::Real => r,
            Domain::Complex if r < self.n_out => 2 * r,
            Domain::Complex => 2 * (r - self.n_out) + 1,
        };
        self.bias.grad[idx] += g;
    }
}

#[derive(Clone, Debug, PartialEq)]
pub(crate) struct Conv2d {
    pub affine: Affine,
    pub kernel: usize,
    pub padding: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub(crate) struct Dense {
    pub affine: Affine,
}

#[derive(Clone, Debug, PartialEq)]
pub(crate) enum Layer {
    Conv(Conv2d),
    Dense(Dense),
    Relu(Domain),
    Sigmoid(Domain),
    Bn(BatchNorm),
    Flatten,
    ToReal,
    ToComplex,
    Residual,
}

/// Saved forward state needed by the backward pass.
#[derive(Debug)]
pub(crate) enum Cache {
    None,
    Conv { cols: Vec<f64>, in_shape: Vec<usize>, out_hw: (usize, usize) },
    Dense { x: Tensor },
    Relu { x: Tensor },
    Sigmoid { y: Tensor },
    Flatten { in_shape: Vec<usize> },
    Bn(BnCache),
}

fn conv_out(n: usize, k: usize, p: usize) -> Option<usize> {
    (n + 2 * p + 1).checked_sub(k)
}

impl Layer {
    pub fn build(spec: &LayerSpec, rng: &mut Rng) -> Self {
        match *spec {
            LayerSpec::Conv2d { domain, in_channels, out_channels, kernel, padding } => Layer::Conv(Conv2d {
                affine: Affine::new(domain, in_channels, out_channels, kernel * kernel, rng),
                kernel,
                padding,
            }),
            LayerSpec::Dense { domain, inputs, outputs } => {
                Layer::Dense(Dense { affine: Affine::new(domain, inputs, outputs, 1, rng) })
            }
            LayerSpec::Relu { domain } => Layer::Relu(domain),
            LayerSpec::Sigmoid { domain } => Layer::Sigmoid(domain),
            LayerSpec::BatchNorm { domain, channels } => Layer::Bn(BatchNorm::new(domain, channels)),
            LayerSpec::Flatten => Layer::Flatten,
            LayerSpec::ToReal => Layer::ToReal,
            LayerSpec::ToComplex => Layer::ToComplex,
            LayerSpec::ResidualAdd => Layer::Residual,
        }
    }

    pub fn spec(&self) -> LayerSpec {
        match self {
            Layer::Conv(c) => LayerSpec::Conv2d {
                domain: c.affine.domain,
                in_channels: c.affine.n_in,
                out_channels: c.affine.n_out,
                kernel: c.kernel,
                padding: c.padding,
            },
            Layer::Dense(d) => LayerSpec::Dense {
                domain: d.affine.domain,
                inputs: d.affine.n_in,
                outputs: d.affine.n_out,
            },
            Layer::Relu(d) => LayerSpec::Relu { domain: *d },
            Layer::Sigmoid(d) => LayerSpec::Sigmoid { domain: *d },
            Layer::Bn(b) => LayerSpec::BatchNorm { domain: b.domain, channels: b.channels },
            Layer::Flatten => LayerSpec::Flatten,
            Layer::ToReal => LayerSpec::ToReal,
            Layer::ToComplex => LayerSpec::ToComplex,
            Layer::Residual => LayerSpec::ResidualAdd,
        }
    }

    /// Output signature for a given input signature, or a shape error.
    pub fn signature(&self, input: &Signature) -> Result<Signature> {
        let name = self.spec().kind_name();
        let domain_ok = |d: Domain| {
            if d == input.domain {
                Ok(())
            } else {
                Err(invalid(format!("{name} expects {d:?} input, got {:?}", input.domain)))
            }
        };
        match self {
            Layer::Conv(c) => {
                domain_ok(c.affine.domain)?;
                let [ch, h, w] = input.dims[..] else {
                    return Err(invalid(format!("{name} needs a [c, h, w] input, got {:?}", input.dims)));
                };
                if ch != c.affine.n_in {
                    return Err(invalid(format!("{name} expects {} channels, got {ch}", c.affine.n_in)));
                }
                let ho = conv_out(h, c.kernel, c.padding).filter(|&v| v > 0);
                let wo = conv_out(w, c.kernel, c.padding).filter(|&v| v > 0);
                match (ho, wo) {
                    (Some(ho), Some(wo)) => Ok(Signature::new(input.domain, &[c.affine.n_out, ho, wo])),
                    _ => Err(invalid(format!(
                        "{name}: kernel {} with padding {} does not fit {h}x{w}",
                        c.kernel, c.padding
                    ))),
                }
            }
            Layer::Dense(d) => {
                domain_ok(d.affine.domain)?;
                if input.dims != [d.affine.n_in] {
                    return Err(invalid(format!("{name} expects [{}] input, got {:?}", d.affine.n_in, input.dims)));
                }
                Ok(Signature::new(input.domain, &[d.affine.n_out]))
            }
            Layer::Relu(d) | Layer::Sigmoid(d) => {
                domain_ok(*d)?;
                Ok(input.clone())
            }
            Layer::Bn(b) => {
                domain_ok(b.domain)?;
                if input.dims[0] != b.channels {
                    return Err(invalid(format!("{name} expects {} channels, got {}", b.channels, input.dims[0])));
                }
                Ok(input.clone())
            }
            Layer::Flatten => Ok(Signature::new(input.domain, &[input.dims.iter().product()])),
            Layer::ToReal => {
                domain_ok(Domain::Complex)?;
                let mut dims = input.dims.clone();
                dims[0] *= 2;
                Ok(Signature::new(Domain::Real, &dims))
            }
            Layer::ToComplex => {
                domain_ok(Domain::Real)?;
                if input.dims[0] % 2 != 0 {
                    return Err(invalid("to_complex needs an even leading dimension"));
                }
                let mut dims = input.dims.clone();
                dims[0] /= 2;
                Ok(Signature::new(Domain::Complex, &dims))
            }
            Layer::Residual => Ok(input.clone()),
        }
    }

    pub fn params(&self) -> Vec<&Param> {
        match self {
            Layer::Conv(c) => vec![&c.affine.weight, &c.affine.bias],
            Layer::Dense(d) => vec![&d.affine.weight, &d.affine.bias],
            Layer::Bn(b) => vec![&b.gamma, &b.beta],
            _ => Vec::new(),
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        match self {
            Layer::Conv(c) => vec![&mut c.affine.weight, &mut c.affine.bias],
            Layer::Dense(d) => vec![&mut d.affine.weight, &mut d.affine.bias],
            Layer::Bn(b) => vec![&mut b.gamma, &mut b.beta],
            _ => Vec::new(),
        }
    }

    /// Forward pass. `train` selects batch statistics in batch norm and
    /// requests a cache.
    pub fn forward(&self, x: &Tensor, train: bool) -> Result<(Tensor, Cache)> {
        match self {
            Layer::Conv(c) => c.forward(x, train),
            Layer::Dense(d) => d.forward(x, train),
            Layer::Relu(_) => {
                let y = map(x, |v| v.max(0.0));
                Ok((y, if train { Cache::Relu { x: x.clone() } } else { Cache::None }))
            }
            Layer::Sigmoid(_) => {
                let y = map(x, sigmoid);
                let cache = if train { Cache::Sigmoid { y: y.clone() } } else { Cache::None };
                Ok((y, cache))
            }
            Layer::Bn(b) => b.forward(x, train),
            Layer::Flatten => {
                let y = x.clone().reshaped(&[x.batch(), x.sample_len()]);
                Ok((y, Cache::Flatten { in_shape: x.shape().to_vec() }))
            }
            Layer::ToReal | Layer::ToComplex | Layer::Residual => Ok((x.clone(), Cache::None)),
        }
    }

    /// Accumulates parameter gradients and returns the input gradient.
    pub fn backward(&mut self, cache: &Cache, g: &Tensor) -> Result<Tensor> {
        match (self, cache) {
            (Layer::Conv(c), Cache::Conv { cols, in_shape, out_hw }) => Ok(c.backward(cols, in_shape, *out_hw, g)),
            (Layer::Dense(d), Cache::Dense { x }) => Ok(d.backward(x, g)),
            (Layer::Relu(_), Cache::Relu { x }) => Ok(zip(g, x, |gv, xv| if xv > 0.0 { gv } else { 0.0 })),
            (Layer::Sigmoid(_), Cache::Sigmoid { y }) => Ok(zip(g, y, |gv, yv| gv * yv * (1.0 - yv))),
            (Layer::Bn(b), Cache::Bn(c)) => b.backward(c, g),
            (Layer::Flatten, Cache::Flatten { in_shape }) => Ok(g.clone().reshaped(in_shape)),
            (Layer::ToReal | Layer::ToComplex | Layer::Residual, _) => Ok(g.clone()),
            (layer, _) => Err(Error::State(format!("{} backward without a training forward", layer.spec().kind_name()))),
        }
    }

    /// Real floating point operations per sample: two per real
    /// multiply-accumulate, eight per complex one.
    pub fn flops(&self, input: &Signature) -> u64 {
        let per_mac = match self {
            Layer::Conv(c) if c.affine.domain == Domain::Complex => 8,
            Layer::Dense(d) if d.affine.domain == Domain::Complex => 8,
            _ => 2,
        };
        match self {
            Layer::Conv(c) => {
                let out = self.signature(input).expect("validated model");
                let positions = (out.dims[1] * out.dims[2]) as u64;
                positions * (c.affine.n_out * c.affine.n_in * c.affine.kk) as u64 * per_mac
            }
            Layer::Dense(d) => (d.affine.n_out * d.affine.n_in) as u64 * per_mac,
            _ => 0,
        }
    }
}

pub(crate) fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

fn map(x: &Tensor, f: impl Fn(f64) -> f64) -> Tensor {
    let data = x.data().iter().map(|&v| f(v)).collect();
    Tensor::from_vec(x.shape(), data).expect("same shape")
}

fn zip(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Tensor {
    let data = a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect();
    Tensor::from_vec(a.shape(), data).expect("same shape")
}

impl Conv2d {
    fn forward(&self, x: &Tensor, train: bool) -> Result<(Tensor, Cache)> {
        let &[b, c_in, h, w] = x.shape() else {
            return Err(invalid(format!("conv2d needs a 4-d tensor, got {:?}", x.shape())));
        };
        let a = &self.affine;
        if c_in != a.n_in * a.domain.width() {
            return Err(invalid(format!("conv2d input has {c_in} real channels")));
        }
        let (k, p) = (self.kernel, self.padding);
        let ho = conv_out(h, k, p).filter(|&v| v > 0).ok_or_else(|| invalid("kernel does not fit"))?;
        let wo = conv_out(w, k, p).filter(|&v| v > 0).ok_or_else(|| invalid("kernel does not fit"))?;
        let hw = ho * wo;
        let n = b * hw;
        let kdim = a.cols();

        // im2col: row (channel, kh, kw), column (sample, oh, ow)
        let mut cols = vec![0.0; kdim * n];
        let xd = x.data();
        for c in 0..c_in {
            for kh in 0..k {
                for kw in 0..k {
                    let row = &mut cols[((c * k + kh) * k + kw) * n..][..n];
                    for s in 0..b {
                        let plane = &xd[(s * c_in + c) * h * w..][..h * w];
                        for oh in 0..ho {
                            let ih = (oh + kh) as isize - p as isize;
                            if ih < 0 || ih >= h as isize {
                                continue;
                            }
                            for ow in 0..wo {
                                let iw = (ow + kw) as isize - p as isize;
                                if iw >= 0 && iw < w as isize {
                                    row[s * hw + oh * wo + ow] = plane[ih as usize * w + iw as usize];
                                }
                            }
                        }
                    }
                }
            }
        }

        let rows = a.rows();
        let wm = a.matrix();
        let mut tmp = vec![0.0; rows * n];
        gemm(rows, kdim, n, &wm, Layout::rows(kdim), &cols, Layout::rows(n), 0.0, &mut tmp);
        let mut out = Tensor::zeros(&[b, rows, ho, wo]);
        let od = out.data_mut();
        for r in 0..rows {
            let bias = a.bias_at(r);
            for s in 0..b {
                let dst = &mut od[(s * rows + r) * hw..][..hw];
                for (d, v) in dst.iter_mut().zip(&tmp[r * n + s * hw..][..hw]) {
                    *d = v + bias;
                }
            }
        }
        let cache = if train {
            Cache::Conv { cols, in_shape: x.shape().to_vec(), out_hw: (ho, wo) }
        } else {
            Cache::None
        };
        Ok((out, cache))
    }

    fn backward(&mut self, cols: &[f64], in_shape: &[usize], (ho, wo): (usize, usize), g: &Tensor) -> Tensor {
        let &[b, c_in, h, w] = in_shape else { unreachable!("cached 4-d shape") };
        let (k, p) = (self.kernel, self.padding);
        let hw = ho * wo;
        let n = b * hw;
        let rows = self.affine.rows();
        let kdim = self.affine.cols();

        let mut gt = vec![0.0; rows * n];
        let gd = g.data();
        for r in 0..rows {
            let mut bsum = 0.0;
            for s in 0..b {
                let src = &gd[(s * rows + r) * hw..][..hw];
                gt[r * n + s * hw..][..hw].copy_from_slice(src);
                bsum += src.iter().sum::<f64>();
            }
            self.affine.add_bias_grad(r, bsum);
        }

        let mut gw = vec![0.0; rows * kdim];
        gemm(rows, n, kdim, &gt, Layout::rows(n), cols, Layout::trans(n), 0.0, &mut gw);
        let wm = self.affine.matrix();
        self.affine.add_matrix_grad(&gw);

        let mut gcols = vec![0.0; kdim * n];
        gemm(kdim, rows, n, &wm, Layout::trans(kdim), &gt, Layout::rows(n), 0.0, &mut gcols);

        let mut gx = Tensor::zeros(in_shape);
        let gxd = gx.data_mut();
        for c in 0..c_in {
            for kh in 0..k {
                for kw in 0..k {
                    let row = &gcols[((c * k + kh) * k + kw) * n..][..n];
                    for s in 0..b {
                        let plane = &mut gxd[(s * c_in + c) * h * w..][..h * w];
                        for oh in 0..ho {
                            let ih = (oh + kh) as isize - p as isize;
                            if ih < 0 || ih >= h as isize {
                                continue;
                            }
                            for ow in 0..wo {
                                let iw = (ow + kw) as isize - p as isize;
                                if iw >= 0 && iw < w as isize {
                                    plane[ih as usize * w + iw as usize] += row[s * hw + oh * wo + ow];
                                }
                            }
                        }
                    }
                }
            }
        }
        gx
    }
}

impl Dense {
    fn forward(&self, x: &Tensor, train: bool) -> Result<(Tensor, Cache)> {
        let a = &self.affine;
        let (rows, cols) = (a.rows(), a.cols());
        if x.shape().len() != 2 || x.shape()[1] != cols {
            return Err(invalid(format!("dense expects [batch, {cols}], got {:?}", x.shape())));
        }
        let b = x.batch();
        let wm = a.matrix();
        let mut out = Tensor::zeros(&[b, rows]);
        {
            let od = out.data_mut();
            for s in 0..b {
                for r in 0..rows {
                    od[s * rows + r] = a.bias_at(r);
                }
            }
            gemm(b, cols, rows, x.data(), Layout::rows(cols), &wm, Layout::trans(cols), 1.0, od);
        }
        let cache = if train { Cache::Dense { x: x.clone() } } else { Cache::None };
        Ok((out, cache))
    }

    fn backward(&mut self, x: &Tensor, g: &Tensor) -> Tensor {
        let (rows, cols) = (self.affine.rows(), self.affine.cols());
        let b = x.batch();
        let gd = g.data();
        for r in 0..rows {
            let s: f64 = (0..b).map(|i| gd[i * rows + r]).sum();
            self.affine.add_bias_grad(r, s);
        }
        let mut gw = vec![0.0; rows * cols];
        gemm(rows, b, cols, gd, Layout::trans(rows), x.data(), Layout::rows(cols), 0.0, &mut gw);
        let wm = self.affine.matrix();
        self.affine.add_matrix_grad(&gw);
        let mut gx = Tensor::zeros(&[b, cols]);
        gemm(b, rows, cols, gd, Layout::rows(rows), &wm, Layout::rows(cols), 0.0, gx.data_mut());
        gx
    }
}
