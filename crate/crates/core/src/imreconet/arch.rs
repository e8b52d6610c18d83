//! Default AAPD and SE topologies in complex and real form.
//!
//! The real twin of each network uses the same number of real slots per
//! layer: a complex layer with `c` channels becomes a real layer with `2c`.
//! Since a complex weight occupies two slots and a real weight one, the
//! complex network has exactly half the weight slots of its twin.

use crate::cvnn::{Domain, LayerSpec, Model, Signature};
use crate::error::{invalid, Result};
use crate::linalg::Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Variant {
    Real,
    Complex,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::Real => "real",
            Variant::Complex => "complex",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "real" => Ok(Variant::Real),
            "complex" => Ok(Variant::Complex),
            other => Err(invalid(format!("unknown variant `{other}` (expected real or complex)"))),
        }
    }
}

/// Layer widths in complex units; the real variant doubles each of them.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AapdWidths {
    pub conv1: usize,
    pub conv2: usize,
    pub fc1: usize,
    pub fc2: usize,
}

impl Default for AapdWidths {
    fn default() -> Self {
        Self { conv1: 32, conv2: 64, fc1: 256, fc2: 128 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SeWidths {
    pub hidden: usize,
}

impl Default for SeWidths {
    fn default() -> Self {
        Self { hidden: 16 }
    }
}

const KERNEL: usize = 3;
const PAD: usize = 1;

/// Input signature of the AAPD: one complex channel holding `Y` (`N_r x T`).
pub fn aapd_input(n_r: usize, t: usize) -> Signature {
    Signature::new(Domain::Complex, &[1, n_r, t])
}

/// Input signature of the SE: one complex channel holding `S` (`N_u x T`).
pub fn se_input(n_u: usize, t: usize) -> Signature {
    Signature::new(Domain::Complex, &[1, n_u, t])
}

/// Layer list of the AAPD.
///
/// Complex form: two 3x3 convolutions with complex batch norm and split ReLU,
/// two dense layers, then a complex dense layer with `N_t / 2` outputs whose
/// real and imaginary parts (real parts first) are the `N_t` logits of a real
/// sigmoid. The real form starts by splitting the input into two real planes.
pub fn aapd_specs(n_r: usize, t: usize, n_t: usize, variant: Variant, w: AapdWidths) -> Result<Vec<LayerSpec>> {
    if n_r == 0 || t == 0 || n_t == 0 {
        return Err(invalid(format!("AAPD needs positive dims, got n_r={n_r} t={t} n_t={n_t}")));
    }
    if n_t % 2 != 0 {
        return Err(invalid(format!("AAPD head needs an even antenna count, got {n_t}")));
    }
    if [w.conv1, w.conv2, w.fc1, w.fc2].contains(&0) {
        return Err(invalid("AAPD widths must be positive"));
    }
    let (d, k, mut specs) = match variant {
        Variant::Complex => (Domain::Complex, 1, Vec::new()),
        Variant::Real => (Domain::Real, 2, vec![LayerSpec::ToReal]),
    };
    let conv = |i, o| LayerSpec::Conv2d { domain: d, in_channels: i, out_channels: o, kernel: KERNEL, padding: PAD };
    let dense = |i, o| LayerSpec::Dense { domain: d, inputs: i, outputs: o };
    specs.extend([
        conv(k, k * w.conv1),
        LayerSpec::BatchNorm { domain: d, channels: k * w.conv1 },
        LayerSpec::Relu { domain: d },
        conv(k * w.conv1, k * w.conv2),
        LayerSpec::BatchNorm { domain: d, channels: k * w.conv2 },
        LayerSpec::Relu { domain: d },
        LayerSpec::Flatten,
        dense(k * w.conv2 * n_r * t, k * w.fc1),
        LayerSpec::Relu { domain: d },
        dense(k * w.fc1, k * w.fc2),
        LayerSpec::Relu { domain: d },
        dense(k * w.fc2, k * n_t / 2),
    ]);
    if variant == Variant::Complex {
        specs.push(LayerSpec::ToReal);
    }
    specs.push(LayerSpec::Sigmoid { domain: Domain::Real });
    Ok(specs)
}

/// Layer list of the SE: three 3x3 convolutions (the last one linear) and a
/// skip from the input.
pub fn se_specs(n_u: usize, t: usize, variant: Variant, w: SeWidths) -> Result<Vec<LayerSpec>> {
    if n_u == 0 || t == 0 || w.hidden == 0 {
        return Err(invalid(format!("SE needs positive dims, got n_u={n_u} t={t} hidden={}", w.hidden)));
    }
    let (d, k) = match variant {
        Variant::Complex => (Domain::Complex, 1),
        Variant::Real => (Domain::Real, 2),
    };
    let conv = |i, o| LayerSpec::Conv2d { domain: d, in_channels: i, out_channels: o, kernel: KERNEL, padding: PAD };
    let mut specs = Vec::new();
    if variant == Variant::Real {
        specs.push(LayerSpec::ToReal);
    }
    specs.extend([
        conv(k, k * w.hidden),
        LayerSpec::Relu { domain: d },
        conv(k * w.hidden, k * w.hidden),
        LayerSpec::Relu { domain: d },
        conv(k * w.hidden, k),
    ]);
    if variant == Variant::Real {
        specs.push(LayerSpec::ToComplex);
    }
    specs.push(LayerSpec::ResidualAdd);
    Ok(specs)
}

pub fn build_aapd(n_r: usize, t: usize, n_t: usize, variant: Variant, w: AapdWidths, rng: &mut Rng) -> Result<Model> {
    Model::new(aapd_input(n_r, t), &aapd_specs(n_r, t, n_t, variant, w)?, rng)
}

/// Builds the SE with its last convolution zeroed, so it starts as the
/// identity map.
pub fn build_se(n_u: usize, t: usize, variant: Variant, w: SeWidths, rng: &mut Rng) -> Result<Model> {
    let specs = se_specs(n_u, t, variant, w)?;
    let mut model = Model::new(se_input(n_u, t), &specs, rng)?;
    let last_conv = specs
        .iter()
        .rposition(|s| matches!(s, LayerSpec::Conv2d { .. }))
        .expect("SE has convolutions");
    model.zero_layer(last_conv)?;
    Ok(model)
}
