use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{backward, mse_loss};
use crate::model::{forward_with_masks, init_model, layer_specs, DropoutMasks, ModelConfig, ModelWeights, Tensor};
use crate::Result;

/// Worst-case disagreement for one parameter tensor.
#[derive(Clone, Debug, Serialize)]
pub struct TensorCheck {
    pub name: String,
    pub params: usize,
    pub max_rel_error: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct GradcheckReport {
    pub eps: f64,
    pub tensors: Vec<TensorCheck>,
}

impl GradcheckReport {
    pub fn max_rel_error(&self) -> f64 {
        self.tensors.iter().map(|t| t.max_rel_error).fold(0.0, f64::max)
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.max_rel_error() < tol
    }
}

/// Relative error with an absolute floor so exact zeros compare cleanly.
pub(crate) fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8)
}

const KINK_MARGIN_FACTOR: f64 = 10.0;

/// Shifts biases, one activated layer at a time, until no pre-activation lies
/// within `margin` of the activation kink at zero. A finite difference that
/// straddles a kink measures neither one-sided derivative.
fn clear_kinks(
    w: &mut ModelWeights<f64>,
    cfg: &ModelConfig,
    input: &Tensor<f64>,
    masks: &DropoutMasks<f64>,
    margin: f64,
) -> Result<()> {
    let activated = w.layers().len() - 1;
    for li in 0..activated {
        let (_, cache) = forward_with_masks(w, cfg, input, masks)?;
        let pre = &cache.pre[li];
        let mut layers = w.layers_mut();
        let layer = &mut layers[li];
        for c in 0..pre.shape().2 {
            let z = pre.plane(c);
            let clear = |d: f64| z.iter().all(|v| (v + d).abs() >= margin);
            let shift = (0..)
                .flat_map(|k| [k as f64 * margin, -(k as f64) * margin])
                .find(|&d| clear(d))
                .unwrap_or(0.0);
            layer.bias[c] += shift;
        }
    }
    Ok(())
}

/// Compares reverse-mode gradients of the MSE loss against central finite
/// differences at 64-bit precision, for every parameter.
///
/// Weights are He-initialised, then biases and PReLU slopes are randomised so
/// no unit sits on an activation kink. Dropout masks are drawn once and
/// frozen.
pub fn gradcheck(cfg: &ModelConfig, input_size: usize, eps: f64, seed: u64) -> Result<GradcheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w: ModelWeights<f64> = init_model(cfg, seed)?;
    for layer in w.layers_mut() {
        for b in layer.bias.iter_mut() {
            *b = rng.random_range(-0.1..0.1);
        }
        for s in layer.slope.iter_mut() {
            *s = rng.random_range(0.05..0.3);
        }
    }
    let s = cfg.scale;
    let input = Tensor::<f64>::from_fn(input_size, input_size, 1, |_, _, _| rng.random());
    let target = Tensor::<f64>::from_fn(s * input_size, s * input_size, 1, |_, _, _| rng.random());
    let masks = DropoutMasks::<f64>::sample(cfg, input_size, input_size, rng.random())?;

    clear_kinks(&mut w, cfg, &input, &masks, KINK_MARGIN_FACTOR * eps)?;

    let loss_at = |w: &ModelWeights<f64>| -> Result<f64> {
        let (out, _) = forward_with_masks(w, cfg, &input, &masks)?;
        Ok(mse_loss(&out, &target)?.0)
    };
    let (out, cache) = forward_with_masks(&w, cfg, &input, &masks)?;
    let (_, dout) = mse_loss(&out, &target)?;
    let grads = backward(&w, cfg, &cache, &dout)?;
    let analytic: Vec<Vec<f64>> = grads.tensors().into_iter().map(|t| t.to_vec()).collect();

    let names: Vec<String> = layer_specs(cfg)?
        .iter()
        .flat_map(|l| ["kernel", "bias", "slope"].map(|p| format!("{}.{p}", l.name)))
        .collect();
    let mut tensors = Vec::new();
    for (ti, name) in names.into_iter().enumerate() {
        let len = analytic[ti].len();
        if len == 0 {
            continue;
        }
        let mut worst: f64 = 0.0;
        for (i, &a) in analytic[ti].iter().enumerate() {
            let original = w.tensors()[ti][i];
            w.tensors_mut()[ti][i] = original + eps;
            let plus = loss_at(&w)?;
            w.tensors_mut()[ti][i] = original - eps;
            let minus = loss_at(&w)?;
            w.tensors_mut()[ti][i] = original;
            let numeric = (plus - minus) / (2.0 * eps);
            worst = worst.max(relative_error(a, numeric));
        }
        tensors.push(TensorCheck {
            name,
            params: len,
            max_rel_error: worst,
        });
    }
    Ok(GradcheckReport { eps, tensors })
}
