//! Binary model checkpoints.
//!
//! Layout, all little-endian: magic `CVNN`, version `u16`, input signature
//! (domain `u8`, rank `u8`, dims `u32`), layer count `u32`, then per layer a
//! kind byte, a domain byte and its `u32` hyperparameters. Parameter blobs
//! follow in layer order as `u32` length plus `f32` values (complex values
//! interleaved), then batch-norm running statistics in the same form, then a
//! flag byte and, if set, the Adam state.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use super::layers::{Layer, LayerSpec, Signature};
use super::{Adam, Domain, Model};
use crate::error::{Error, Result};
use crate::linalg::Rng;

pub const MAGIC: &[u8; 4] = b"CVNN";
pub const VERSION: u16 = 1;

fn put_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&(v as u32).to_le_bytes());
}

fn put_f32s(out: &mut Vec<u8>, vals: &[f64]) {
    put_u32(out, vals.len());
    for &v in vals {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| Error::Format("checkpoint truncated".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")) as usize)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f32s_into(&mut self, dst: &mut [f64]) -> Result<()> {
        let n = self.u32()?;
        if n != dst.len() {
            return Err(Error::Format(format!("blob has {n} values, layer expects {}", dst.len())));
        }
        let bytes = self.take(4 * n)?;
        for (d, c) in dst.iter_mut().zip(bytes.chunks_exact(4)) {
            *d = f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64;
        }
        Ok(())
    }
}

fn spec_bytes(out: &mut Vec<u8>, spec: &LayerSpec) {
    let (kind, domain, hyper): (u8, Domain, Vec<usize>) = match *spec {
        LayerSpec::Conv2d { domain, in_channels, out_channels, kernel, padding } => {
            (0, domain, vec![in_channels, out_channels, kernel, padding])
        }
        LayerSpec::Dense { domain, inputs, outputs } => (1, domain, vec![inputs, outputs]),
        LayerSpec::Relu { domain } => (2, domain, vec![]),
        LayerSpec::Sigmoid { domain } => (3, domain, vec![]),
        LayerSpec::BatchNorm { domain, channels } => (4, domain, vec![channels]),
        LayerSpec::Flatten => (5, Domain::Real, vec![]),
        LayerSpec::ToReal => (6, Domain::Real, vec![]),
        LayerSpec::ToComplex => (7, Domain::Real, vec![]),
        LayerSpec::ResidualAdd => (8, Domain::Real, vec![]),
    };
    out.push(kind);
    out.push(domain.code());
    for h in hyper {
        put_u32(out, h);
    }
}

fn read_spec(r: &mut Reader) -> Result<LayerSpec> {
    let kind = r.u8()?;
    let domain = Domain::from_code(r.u8()?)?;
    Ok(match kind {
        0 => LayerSpec::Conv2d {
            domain,
            in_channels: r.u32()?,
            out_channels: r.u32()?,
            kernel: r.u32()?,
            padding: r.u32()?,
        },
        1 => LayerSpec::Dense { domain, inputs: r.u32()?, outputs: r.u32()? },
        2 => LayerSpec::Relu { domain },
        3 => LayerSpec::Sigmoid { domain },
        4 => LayerSpec::BatchNorm { domain, channels: r.u32()? },
        5 => LayerSpec::Flatten,
        6 => LayerSpec::ToReal,
        7 => LayerSpec::ToComplex,
        8 => LayerSpec::ResidualAdd,
        k => return Err(Error::Format(format!("unknown layer kind {k}"))),
    })
}

/// Serializes a model and, optionally, its optimizer state.
pub fn to_bytes(model: &Model, adam: Option<&Adam>) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    let sig = model.input_signature();
    out.push(sig.domain.code());
    out.push(sig.dims.len() as u8);
    for &d in &sig.dims {
        put_u32(&mut out, d);
    }
    let specs = model.specs();
    put_u32(&mut out, specs.len());
    for s in &specs {
        spec_bytes(&mut out, s);
    }
    for p in model.params() {
        put_f32s(&mut out, &p.value);
    }
    for layer in &model.layers {
        if let Layer::Bn(bn) = layer {
            put_f32s(&mut out, &bn.running_mean);
            put_f32s(&mut out, &bn.running_var);
        }
    }
    match adam {
        Some(a) if a.m.len() == model.params().len() => {
            out.push(1);
            out.extend_from_slice(&a.step.to_le_bytes());
            for v in [a.lr, a.beta1, a.beta2, a.eps] {
                out.extend_from_slice(&v.to_le_bytes());
            }
            for (m, v) in a.m.iter().zip(&a.v) {
                put_f32s(&mut out, m);
                put_f32s(&mut out, v);
            }
        }
        _ => out.push(0),
    }
    out
}

pub fn from_bytes(buf: &[u8]) -> Result<(Model, Option<Adam>)> {
    let mut r = Reader { buf, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(Error::Format("not a CVNN checkpoint".into()));
    }
    let version = r.u16()?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported checkpoint version {version}")));
    }
    let domain = Domain::from_code(r.u8()?)?;
    let rank = r.u8()? as usize;
    let dims = (0..rank).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
    let n_layers = r.u32()?;
    if n_layers > 4096 {
        return Err(Error::Format(format!("implausible layer count {n_layers}")));
    }
    let specs = (0..n_layers).map(|_| read_spec(&mut r)).collect::<Result<Vec<_>>>()?;
    let mut model = Model::new(Signature::new(domain, &dims), &specs, &mut Rng::new(0))
        .map_err(|e| Error::Format(format!("checkpoint describes an invalid model: {e}")))?;
    for p in model.params_mut() {
        r.f32s_into(&mut p.value)?;
    }
    for layer in &mut model.layers {
        if let Layer::Bn(bn) = layer {
            r.f32s_into(&mut bn.running_mean)?;
            r.f32s_into(&mut bn.running_var)?;
        }
    }
    let adam = match r.u8()? {
        0 => None,
        1 => {
            let step = r.u64()?;
            let mut a = Adam::new(r.f64()?);
            a.step = step;
            a.beta1 = r.f64()?;
            a.beta2 = r.f64()?;
            a.eps = r.f64()?;
            for p in model.params() {
                let mut m = vec![0.0; p.len()];
                let mut v = vec![0.0; p.len()];
                r.f32s_into(&mut m)?;
                r.f32s_into(&mut v)?;
                a.m.push(m);
                a.v.push(v);
            }
            Some(a)
        }
        f => return Err(Error::Format(format!("bad optimizer flag {f}"))),
    };
    if r.pos != buf.len() {
        return Err(Error::Format(format!("{} trailing bytes in checkpoint", buf.len() - r.pos)));
    }
    Ok((model, adam))
}

pub fn save(path: &Path, model: &Model, adam: Option<&Adam>) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(&to_bytes(model, adam))?;
    Ok(())
}

pub fn load(path: &Path) -> Result<(Model, Option<Adam>)> {
    let mut buf = Vec::new();
    fs::File::open(path)?.read_to_end(&mut buf)?;
    from_bytes(&buf)
}
