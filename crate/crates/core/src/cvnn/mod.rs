//! Complex-valued CNN engine with real-valued twins of every layer.
//!
//! Activations are [`Tensor`]s; complex ones use a planar layout described
//! on [`Domain`]. Models are sequential stacks of [`LayerSpec`]s trained with
//! [`Adam`] on [`bce`] or [`mse`].

mod adam;
mod batchnorm;
pub mod checkpoint;
mod gemm;
mod layers;
mod loss;
mod model;
mod tensor;

pub use adam::Adam;
pub use batchnorm::{BN_EPS, BN_MOMENTUM};
pub use layers::{LayerSpec, Param, Signature};
pub use loss::{bce, mse, BCE_CLIP};
pub use model::{Model, Trace};
pub use tensor::{Domain, Tensor};
