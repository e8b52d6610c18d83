use super::layers::{Cache, Layer, LayerSpec, Param, Signature};
use super::Tensor;
use crate::error::{invalid, Error, Result};
use crate::linalg::Rng;

/// Layer-sequential network with an optional skip from its input.
#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    input: Signature,
    pub(crate) layers: Vec<Layer>,
}

/// Caches from one training-mode forward pass.
#[derive(Debug)]
pub struct Trace {
    caches: Vec<Cache>,
}

impl Model {
    /// Builds and shape-checks a model. Weights are drawn from `rng`.
    pub fn new(input: Signature, specs: &[LayerSpec], rng: &mut Rng) -> Result<Self> {
        if input.dims.is_empty() || input.dims.contains(&0) {
            return Err(invalid(format!("invalid input dims {:?}", input.dims)));
        }
        let layers = specs.iter().map(|s| Layer::build(s, rng)).collect();
        let model = Self { input, layers };
        model.output_signature()?;
        Ok(model)
    }

    pub fn input_signature(&self) -> &Signature {
        &self.input
    }

    /// Signature after every layer, validating shape compatibility.
    fn signatures(&self) -> Result<Vec<Signature>> {
        let mut sigs = vec![self.input.clone()];
        for (i, layer) in self.layers.iter().enumerate() {
            let next = layer
                .signature(sigs.last().expect("non-empty"))
                .map_err(|e| invalid(format!("layer {i}: {e}")))?;
            if matches!(layer, Layer::Residual) && next != self.input {
                return Err(invalid(format!(
                    "layer {i}: residual needs {:?}, activation is {:?}",
                    self.input, next
                )));
            }
            sigs.push(next);
        }
        Ok(sigs)
    }

    pub fn output_signature(&self) -> Result<Signature> {
        Ok(self.signatures()?.pop().expect("non-empty"))
    }

    pub fn specs(&self) -> Vec<LayerSpec> {
        self.layers.iter().map(Layer::spec).collect()
    }

    fn check_input(&self, x: &Tensor) -> Result<()> {
        let want = self.input.real_dims();
        if x.shape().len() != want.len() + 1 || x.shape()[1..] != want[..] || x.batch() == 0 {
            return Err(invalid(format!("model expects [batch, {want:?}], got {:?}", x.shape())));
        }
        Ok(())
    }

    /// Inference-mode forward pass (running batch-norm statistics).
    pub fn predict(&self, x: &Tensor) -> Result<Tensor> {
        self.check_input(x)?;
        let mut cur = x.clone();
        for layer in &self.layers {
            let (mut y, _) = layer.forward(&cur, false)?;
            if matches!(layer, Layer::Residual) {
                add_into(&mut y, x);
            }
            cur = y;
        }
        Ok(cur)
    }

    /// Training-mode forward pass: batch statistics, running-stat updates and
    /// caches for [`Model::backward`].
    pub fn forward_train(&mut self, x: &Tensor) -> Result<(Tensor, Trace)> {
        self.check_input(x)?;
        let mut cur = x.clone();
        let mut caches = Vec::with_capacity(self.layers.len());
        for layer in &mut self.layers {
            let (mut y, cache) = layer.forward(&cur, true)?;
            if let (Layer::Bn(bn), Cache::Bn(c)) = (&mut *layer, &cache) {
                bn.update_running(c);
            }
            if matches!(layer, Layer::Residual) {
                add_into(&mut y, x);
            }
            caches.push(cache);
            cur = y;
        }
        Ok((cur, Trace { caches }))
    }

    /// Accumulates parameter gradients for `grad` (the loss gradient with
    /// respect to the output) and returns the gradient with respect to the input.
    pub fn backward(&mut self, trace: &Trace, grad: &Tensor) -> Result<Tensor> {
        if trace.caches.len() != self.layers.len() {
            return Err(Error::State("trace does not belong to this model".into()));
        }
        let mut g = grad.clone();
        let mut skip: Option<Tensor> = None;
        for (layer, cache) in self.layers.iter_mut().zip(&trace.caches).rev() {
            if matches!(layer, Layer::Residual) {
                match &mut skip {
                    Some(s) => add_into(s, &g),
                    None => skip = Some(g.clone()),
                }
            }
            g = layer.backward(cache, &g)?;
        }
        if let Some(s) = skip {
            add_into(&mut g, &s);
        }
        Ok(g)
    }

    pub fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.grad.iter_mut().for_each(|g| *g = 0.0);
        }
    }

    pub fn params(&self) -> Vec<&Param> {
        self.layers.iter().flat_map(Layer::params).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param> {
        self.layers.iter_mut().flat_map(Layer::params_mut).collect()
    }

    /// Weight slots of convolution and dense layers (biases and batch norm
    /// excluded), counting a complex weight as two real slots.
    pub fn count_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| match l {
                Layer::Conv(c) => c.affine.weight.len(),
                Layer::Dense(d) => d.affine.weight.len(),
                _ => 0,
            })
            .sum()
    }

    /// Every trainable real slot, including biases and batch-norm parameters.
    pub fn count_all_params(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    /// Forward-pass FLOPs for one sample.
    pub fn count_flops(&self) -> u64 {
        let sigs = self.signatures().expect("validated model");
        self.layers.iter().zip(&sigs).map(|(l, s)| l.flops(s)).sum()
    }

    /// Zeroes the weights and bias of layer `index` (a convolution or dense layer).
    pub fn zero_layer(&mut self, index: usize) -> Result<()> {
        match self.layers.get_mut(index) {
            Some(Layer::Conv(c)) => {
                c.affine.weight.value.iter_mut().for_each(|v| *v = 0.0);
                c.affine.bias.value.iter_mut().for_each(|v| *v = 0.0);
                Ok(())
            }
            Some(Layer::Dense(d)) => {
                d.affine.weight.value.iter_mut().for_each(|v| *v = 0.0);
                d.affine.bias.value.iter_mut().for_each(|v| *v = 0.0);
                Ok(())
            }
            _ => Err(invalid(format!("layer {index} has no weights"))),
        }
    }

    /// Rounds every stored value to single precision, as a checkpoint does.
    pub fn quantize(&mut self) {
        for layer in &mut self.layers {
            for p in layer.params_mut() {
                p.value.iter_mut().for_each(|v| *v = *v as f32 as f64);
            }
            if let Layer::Bn(bn) = layer {
                bn.running_mean.iter_mut().for_each(|v| *v = *v as f32 as f64);
                bn.running_var.iter_mut().for_each(|v| *v = *v as f32 as f64);
            }
        }
    }
}

fn add_into(dst: &mut Tensor, src: &Tensor) {
    for (a, b) in dst.data_mut().iter_mut().zip(src.data()) {
        *a += b;
    }
}
