use crate::model::{
    activate_backward, conv2d_backward, layout_of, space_to_depth, Activator, ConvLayer, ForwardCache, ModelConfig,
    ModelWeights, Scalar, Tensor,
};
use crate::{Error, Result};

fn unmask<T: Scalar>(mut t: Tensor<T>, mask: Option<&[T]>) -> Tensor<T> {
    if let Some(m) = mask {
        for (v, &k) in t.data_mut().iter_mut().zip(m) {
            *v = *v * k;
        }
    }
    t
}

fn add_into<T: Scalar>(acc: &mut Tensor<T>, other: &Tensor<T>) {
    for (a, &b) in acc.data_mut().iter_mut().zip(other.data()) {
        *a += b;
    }
}

/// Gradient through dropout, activation and convolution of one activated
/// layer; returns the gradient at the layer input when requested.
#[allow(clippy::too_many_arguments)]
fn layer_backward<T: Scalar>(
    d_post: Tensor<T>,
    mask: Option<&[T]>,
    pre: &Tensor<T>,
    input: &Tensor<T>,
    layer: &ConvLayer<T>,
    act: Activator,
    grad: &mut ConvLayer<T>,
    need_input_grad: bool,
) -> Option<Tensor<T>> {
    let d_act = unmask(d_post, mask);
    let dz = activate_backward(pre, act, &layer.slope, &d_act, &mut grad.slope);
    conv2d_backward(input, layer, &dz, grad, need_input_grad)
}

/// Reverse-mode gradients of `sum(out_grad * output)` with respect to every
/// parameter, given the cache of a training-mode forward pass.
///
/// The bicubic residual carries no parameters, so its branch of the output
/// gradient is dropped.
pub fn backward<T: Scalar>(
    w: &ModelWeights<T>,
    cfg: &ModelConfig,
    cache: &ForwardCache<T>,
    out_grad: &Tensor<T>,
) -> Result<ModelWeights<T>> {
    if !cache.trainable {
        return Err(Error::InvalidState("cache comes from an inference-mode forward pass".into()));
    }
    if cache.layout != layout_of(w) {
        return Err(Error::InvalidState("cache was produced by a different model".into()));
    }
    let n = w.features.len();
    if cache.pre.len() != n + 3 || cache.post.len() != n + 3 {
        return Err(Error::InvalidState("cache is incomplete".into()));
    }
    let s = cfg.scale;
    let (h, wd, _) = cache.input.shape();
    if out_grad.shape() != (s * h, s * wd, 1) {
        return Err(Error::invalid(format!(
            "output gradient has shape {:?}, expected {:?}",
            out_grad.shape(),
            (s * h, s * wd, 1)
        )));
    }
    let act = cfg.activator;
    let masks = &cache.masks;
    let mut g = ModelWeights::<T>::zeros(cfg)?;

    let d_last = space_to_depth(out_grad, s)?;
    let d_recon = conv2d_backward(&cache.recon, &w.last, &d_last, &mut g.last, true).expect("input grad requested");
    let mut halves = d_recon.split(&[w.a1.c_out, w.b2.c_out])?.into_iter();
    let (d_a, d_b2) = (halves.next().unwrap(), halves.next().unwrap());

    let mut d_concat = layer_backward(d_a, masks.layer(n), &cache.pre[n], &cache.concat, &w.a1, act, &mut g.a1, true)
        .expect("input grad requested");
    let d_b1 = layer_backward(
        d_b2,
        masks.layer(n + 2),
        &cache.pre[n + 2],
        &cache.post[n + 1],
        &w.b2,
        act,
        &mut g.b2,
        true,
    )
    .expect("input grad requested");
    let d_concat_b = layer_backward(d_b1, masks.layer(n + 1), &cache.pre[n + 1], &cache.concat, &w.b1, act, &mut g.b1, true)
        .expect("input grad requested");
    add_into(&mut d_concat, &d_concat_b);

    let counts: Vec<usize> = w.features.iter().map(|l| l.c_out).collect();
    let pieces = d_concat.split(&counts)?;
    let mut carry: Option<Tensor<T>> = None;
    for (i, mut d_post) in pieces.into_iter().enumerate().rev() {
        if let Some(c) = carry.take() {
            add_into(&mut d_post, &c);
        }
        let input = if i == 0 { &cache.input } else { &cache.post[i - 1] };
        carry = layer_backward(
            d_post,
            masks.layer(i),
            &cache.pre[i],
            input,
            &w.features[i],
            act,
            &mut g.features[i],
            i > 0,
        );
    }
    Ok(g)
}
