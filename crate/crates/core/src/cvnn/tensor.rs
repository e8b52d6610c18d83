use num_complex::Complex64;

use crate::error::{invalid, Result};

/// Whether a tensor carries complex or real values.
///
/// Complex tensors are stored planar: a tensor with `c` complex channels
/// (or features) holds `2c` real channels, the first `c` real parts and the
/// next `c` imaginary parts. Complex convolutions and dense layers then act as
/// real ones on the doubled width with a structured weight block.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Domain {
    Real,
    Complex,
}

impl Domain {
    pub(crate) fn code(self) -> u8 {
        match self {
            Domain::Real => 0,
            Domain::Complex => 1,
        }
    }

    pub(crate) fn from_code(c: u8) -> Result<Self> {
        match c {
            0 => Ok(Domain::Real),
            1 => Ok(Domain::Complex),
            _ => Err(crate::Error::Format(format!("unknown domain code {c}"))),
        }
    }

    /// Real slots per value.
    pub fn width(self) -> usize {
        match self {
            Domain::Real => 1,
            Domain::Complex => 2,
        }
    }
}

/// Dense batch-major array of `f64`, shape `(batch, ...)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Self { shape: shape.to_vec(), data: vec![0.0; n] }
    }

    pub fn from_vec(shape: &[usize], data: Vec<f64>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(invalid(format!("shape {shape:?} needs {n} values, got {}", data.len())));
        }
        Ok(Self { shape: shape.to_vec(), data })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn batch(&self) -> usize {
        self.shape[0]
    }

    /// Values per sample.
    pub fn sample_len(&self) -> usize {
        self.shape[1..].iter().product()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn sample(&self, b: usize) -> &[f64] {
        let n = self.sample_len();
        &self.data[b * n..(b + 1) * n]
    }

    pub(crate) fn reshaped(mut self, shape: &[usize]) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), self.data.len());
        self.shape = shape.to_vec();
        self
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Stacks samples of identical shape into a batch.
    pub fn stack(samples: &[&[f64]], sample_shape: &[usize]) -> Result<Self> {
        let n: usize = sample_shape.iter().product();
        let mut data = Vec::with_capacity(n * samples.len());
        for s in samples {
            if s.len() != n {
                return Err(invalid(format!("sample has {} values, expected {n}", s.len())));
            }
            data.extend_from_slice(s);
        }
        let mut shape = vec![samples.len()];
        shape.extend_from_slice(sample_shape);
        Ok(Self { shape, data })
    }

    /// Packs complex samples, each `dims` in row-major order, into the planar
    /// layout: real parts first, imaginary parts after.
    pub fn from_complex(dims: &[usize], samples: &[&[Complex64]]) -> Result<Self> {
        let n: usize = dims.iter().product();
        let mut data = Vec::with_capacity(2 * n * samples.len());
        for s in samples {
            if s.len() != n {
                return Err(invalid(format!("complex sample has {} values, expected {n}", s.len())));
            }
            data.extend(s.iter().map(|z| z.re));
            data.extend(s.iter().map(|z| z.im));
        }
        let mut shape = vec![samples.len()];
        shape.extend_from_slice(dims);
        shape[1] *= 2;
        Ok(Self { shape, data })
    }

    /// Inverse of [`Tensor::from_complex`] for sample `b`.
    pub fn complex_sample(&self, b: usize) -> Vec<Complex64> {
        let s = self.sample(b);
        let half = s.len() / 2;
        s[..half].iter().zip(&s[half..]).map(|(&re, &im)| Complex64::new(re, im)).collect()
    }
}
