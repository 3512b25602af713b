//! Forward pass: feature cascade, skip concatenation, network-in-network
//! reconstruction, sub-pixel upscale and bicubic residual.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::ModelConfig;
use super::ops::{activate, conv2d, depth_to_space};
use super::tensor::{Scalar, Tensor};
use super::weights::ModelWeights;
use crate::imagecore::{clamp_unit, resize_plane};
use crate::{Error, Result};

/// Inverted-dropout masks, one per activated layer (feature layers, then A1,
/// B1, B2). Entries are `0` or `1 / keep`; `None` means no dropout.
#[derive(Clone, Debug, PartialEq)]
pub struct DropoutMasks<T = f32> {
    pub(crate) masks: Vec<Option<Vec<T>>>,
}

impl<T: Scalar> DropoutMasks<T> {
    pub fn disabled(layers: usize) -> Self {
        Self {
            masks: vec![None; layers],
        }
    }

    /// Draws Bernoulli(keep) masks for every activated layer at the given
    /// input size.
    pub fn sample(cfg: &ModelConfig, height: usize, width: usize, seed: u64) -> Result<Self> {
        let mut channels = cfg.schedule()?;
        channels.extend([cfg.recon_a1, cfg.recon_b1, cfg.recon_b2]);
        if cfg.dropout_keep >= 1.0 {
            return Ok(Self::disabled(channels.len()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let keep = cfg.dropout_keep;
        let scale = T::lit(1.0 / keep);
        let masks = channels
            .iter()
            .map(|&c| {
                Some(
                    (0..c * height * width)
                        .map(|_| if rng.random::<f64>() < keep { scale } else { T::zero() })
                        .collect(),
                )
            })
            .collect();
        Ok(Self { masks })
    }

    pub fn len(&self) -> usize {
        self.masks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masks.is_empty()
    }

    pub fn layer(&self, i: usize) -> Option<&[T]> {
        self.masks.get(i).and_then(|m| m.as_deref())
    }
}

/// Intermediate activations retained for the backward pass.
#[derive(Clone, Debug)]
pub struct ForwardCache<T = f32> {
    pub(crate) input: Tensor<T>,
    /// Pre-activations of every activated layer.
    pub(crate) pre: Vec<Tensor<T>>,
    /// Post-activation, post-dropout outputs of every activated layer.
    pub(crate) post: Vec<Tensor<T>>,
    pub(crate) concat: Tensor<T>,
    pub(crate) recon: Tensor<T>,
    pub(crate) masks: DropoutMasks<T>,
    pub(crate) trainable: bool,
    pub(crate) layout: Vec<(usize, usize, usize)>,
}

impl<T: Scalar> ForwardCache<T> {
    pub fn masks(&self) -> &DropoutMasks<T> {
        &self.masks
    }

    pub fn input(&self) -> &Tensor<T> {
        &self.input
    }

    /// Whether a gradient pass may consume this cache.
    pub fn is_trainable(&self) -> bool {
        self.trainable
    }

    /// Channel count of the skip concatenation.
    pub fn concat_channels(&self) -> usize {
        self.concat.channels()
    }

    pub fn activations(&self) -> impl Iterator<Item = &Tensor<T>> {
        self.pre.iter().chain(self.post.iter())
    }
}

pub(crate) fn layout_of<T: Scalar>(w: &ModelWeights<T>) -> Vec<(usize, usize, usize)> {
    w.layers().iter().map(|l| (l.c_in, l.c_out, l.ksize)).collect()
}

/// Bicubic `s`x upscale of a single-channel tensor, clamped to `[0, 1]`.
pub fn bicubic_upsample<T: Scalar>(x: &Tensor<T>, s: usize) -> Result<Tensor<T>> {
    if x.channels() != 1 {
        return Err(Error::invalid("bicubic residual expects a single channel"));
    }
    let src: Vec<f64> = x.data().iter().map(|v| v.to_f64_lossy()).collect();
    let up = resize_plane(&src, x.width(), x.height(), s * x.width(), s * x.height());
    Tensor::new(
        s * x.height(),
        s * x.width(),
        1,
        up.into_iter().map(|v| T::lit(clamp_unit(v))).collect(),
    )
}

struct Pass<T> {
    branch: Tensor<T>,
    pre: Vec<Tensor<T>>,
    post: Vec<Tensor<T>>,
    concat: Tensor<T>,
    recon: Tensor<T>,
}

fn apply_mask<T: Scalar>(mut t: Tensor<T>, mask: Option<&[T]>) -> Result<Tensor<T>> {
    if let Some(m) = mask {
        if m.len() != t.data().len() {
            return Err(Error::invalid("dropout mask does not match the activation size"));
        }
        for (v, &k) in t.data_mut().iter_mut().zip(m) {
            *v = *v * k;
        }
    }
    Ok(t)
}

/// Runs every layer up to the depth-to-space output. When `keep` is false the
/// intermediates are dropped as soon as they are consumed.
fn run<T: Scalar>(
    w: &ModelWeights<T>,
    cfg: &ModelConfig,
    input: &Tensor<T>,
    masks: &DropoutMasks<T>,
    keep: bool,
) -> Result<Pass<T>> {
    if input.channels() != 1 {
        return Err(Error::invalid(format!(
            "network input must be single-channel luma, got {} channels",
            input.channels()
        )));
    }
    w.check_shapes(cfg)?;
    let activated = w.features.len() + 3;
    if masks.len() != activated {
        return Err(Error::invalid("dropout mask count does not match the model"));
    }
    let act = cfg.activator;
    let mut pre = Vec::new();
    let mut post = Vec::with_capacity(activated);
    let layer_out = |layer_idx: usize,
                         x: &Tensor<T>,
                         conv: &super::weights::ConvLayer<T>,
                         pre: &mut Vec<Tensor<T>>|
     -> Result<Tensor<T>> {
        let z = conv2d(x, conv)?;
        let a = apply_mask(activate(&z, act, &conv.slope)?, masks.layer(layer_idx))?;
        if keep {
            pre.push(z);
        }
        Ok(a)
    };

    let mut x = input.clone();
    for (i, layer) in w.features.iter().enumerate() {
        let out = layer_out(i, &x, layer, &mut pre)?;
        x = out.clone();
        post.push(out);
    }
    let n = w.features.len();
    let concat = Tensor::concat(&post.iter().collect::<Vec<_>>())?;
    let a = layer_out(n, &concat, &w.a1, &mut pre)?;
    let b1 = layer_out(n + 1, &concat, &w.b1, &mut pre)?;
    let b2 = layer_out(n + 2, &b1, &w.b2, &mut pre)?;
    let recon = Tensor::concat(&[&a, &b2])?;
    let last = conv2d(&recon, &w.last)?;
    let branch = depth_to_space(&last, cfg.scale)?;
    if keep {
        post.extend([a, b1, b2]);
    } else {
        post.clear();
    }
    Ok(Pass {
        branch,
        pre,
        post,
        concat,
        recon,
    })
}

fn add_residual<T: Scalar>(branch: Tensor<T>, input: &Tensor<T>, s: usize) -> Result<Tensor<T>> {
    let up = bicubic_upsample(input, s)?;
    let (h, w, c) = branch.shape();
    let data = branch.into_data().into_iter().zip(up.data()).map(|(b, &u)| b + u).collect();
    Tensor::new(h, w, c, data)
}

/// Full forward pass. With `training` set, inverted dropout is applied to
/// every activated layer using masks drawn from `dropout_seed`. The output is
/// not clamped.
pub fn forward<T: Scalar>(
    w: &ModelWeights<T>,
    cfg: &ModelConfig,
    input: &Tensor<T>,
    training: bool,
    dropout_seed: u64,
) -> Result<(Tensor<T>, ForwardCache<T>)> {
    let masks = if training {
        DropoutMasks::sample(cfg, input.height(), input.width(), dropout_seed)?
    } else {
        DropoutMasks::disabled(w.features.len() + 3)
    };
    forward_impl(w, cfg, input, masks, training)
}

/// Training-mode forward pass with caller-supplied (frozen) dropout masks.
pub fn forward_with_masks<T: Scalar>(
    w: &ModelWeights<T>,
    cfg: &ModelConfig,
    input: &Tensor<T>,
    masks: &DropoutMasks<T>,
) -> Result<(Tensor<T>, ForwardCache<T>)> {
    forward_impl(w, cfg, input, masks.clone(), true)
}

fn forward_impl<T: Scalar>(
    w: &ModelWeights<T>,
    cfg: &ModelConfig,
    input: &Tensor<T>,
    masks: DropoutMasks<T>,
    trainable: bool,
) -> Result<(Tensor<T>, ForwardCache<T>)> {
    let pass = run(w, cfg, input, &masks, true)?;
    let out = add_residual(pass.branch, input, cfg.scale)?;
    let cache = ForwardCache {
        input: input.clone(),
        pre: pass.pre,
        post: pass.post,
        concat: pass.concat,
        recon: pass.recon,
        masks,
        trainable,
        layout: layout_of(w),
    };
    Ok((out, cache))
}

/// Learned high-resolution correction only (the output minus the bicubic
/// residual), without dropout.
pub fn predict_branch<T: Scalar>(w: &ModelWeights<T>, cfg: &ModelConfig, input: &Tensor<T>) -> Result<Tensor<T>> {
    let masks = DropoutMasks::disabled(w.features.len() + 3);
    Ok(run(w, cfg, input, &masks, false)?.branch)
}

/// Inference forward pass without a cache.
pub fn predict<T: Scalar>(w: &ModelWeights<T>, cfg: &ModelConfig, input: &Tensor<T>) -> Result<Tensor<T>> {
    add_residual(predict_branch(w, cfg, input)?, input, cfg.scale)
}
