//! Joint super-resolution and deblurring of text images.
//!
//! The crate bundles everything needed to train and evaluate a skip-connected
//! convolutional super-resolver on text:
//!
//! * [`imagecore`]: planar float images, YCbCr conversion, bicubic resampling,
//!   aligned patch sampling and PNG I/O.
//! * [`degrade`]: synthetic motion/defocus blur followed by downscaling.
//! * [`model`]: the feature-extraction cascade, network-in-network
//!   reconstruction and sub-pixel upscale, with a bicubic residual.
//! * [`train`]: MSE loss, reverse-mode gradients, Adam and the training loop.
//! * [`iqa`]: PSNR, SSIM, IFC and VIF.
//! * [`ocreval`]: Levenshtein ratio and character-frequency cosine over OCR output.
//! * [`persist`]: the versioned `SDTD` model file format.
//! * [`cli`]: the subcommands behind the `textsr` binary.

// Negated comparisons are how NaN parameters get rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod degrade;
mod error;
pub mod imagecore;
pub mod iqa;
pub mod model;
pub mod ocreval;
pub mod persist;
pub mod synth;
pub mod train;

pub use error::{Error, Result};
