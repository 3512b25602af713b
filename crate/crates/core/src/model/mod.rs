//! The skip-connected super-resolution network.
//!
//! Data flow for an `h x w` luma input and scale `S`:
//!
//! 1. a cascade of 3x3 convolutions with activators (and inverted dropout
//!    when training), filter counts following [`filter_schedule`];
//! 2. every cascade output concatenated channel-wise;
//! 3. reconstruction: a 1x1 path (A1) in parallel with 1x1 -> 3x3 (B1, B2),
//!    concatenated and mapped by a final 1x1 layer to `S^2` channels;
//! 4. [`depth_to_space`] to `Sh x Sw`;
//! 5. plus the bicubic upsample of the input.

mod config;
mod network;
mod ops;
mod pipeline;
mod tensor;
mod weights;

pub use config::{filter_schedule, Activator, ModelConfig};
pub use network::{
    bicubic_upsample, forward, forward_with_masks, predict, predict_branch, DropoutMasks, ForwardCache,
};
pub use ops::{activate, conv2d, depth_to_space, space_to_depth};
pub use pipeline::{bicubic_upscale, super_resolve};
pub use tensor::{Scalar, Tensor};
pub use weights::{init_model, layer_specs, ConvLayer, LayerSpec, ModelWeights};

pub(crate) use network::layout_of;
pub(crate) use ops::{activate_backward, conv2d_backward};
