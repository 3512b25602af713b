use crate::model::{ModelConfig, ModelWeights, Scalar};
use crate::{Error, Result};

use super::TrainConfig;

/// Adam first/second moments shaped like the weights, plus the step count.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerState<T = f32> {
    pub m: ModelWeights<T>,
    pub v: ModelWeights<T>,
    pub step: u64,
}

impl<T: Scalar> OptimizerState<T> {
    pub fn new(cfg: &ModelConfig) -> Result<Self> {
        Ok(Self {
            m: ModelWeights::zeros(cfg)?,
            v: ModelWeights::zeros(cfg)?,
            step: 0,
        })
    }
}

fn same_shape<T: Scalar>(a: &ModelWeights<T>, b: &ModelWeights<T>) -> bool {
    let (ta, tb) = (a.tensors(), b.tensors());
    ta.len() == tb.len() && ta.iter().zip(&tb).all(|(x, y)| x.len() == y.len())
}

/// One bias-corrected Adam update applied in place.
pub fn adam_step<T: Scalar>(
    w: &mut ModelWeights<T>,
    g: &ModelWeights<T>,
    state: &mut OptimizerState<T>,
    cfg: &TrainConfig,
) -> Result<()> {
    if !same_shape(w, g) || !same_shape(w, &state.m) || !same_shape(w, &state.v) {
        return Err(Error::invalid("weights, gradients and optimiser state differ in shape"));
    }
    state.step += 1;
    let t = state.step as i32;
    let (b1, b2) = (cfg.beta1, cfg.beta2);
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);
    let grads = g.tensors();
    let ms = state.m.tensors_mut();
    let vs = state.v.tensors_mut();
    for (((wt, gt), mt), vt) in w.tensors_mut().into_iter().zip(grads).zip(ms).zip(vs) {
        for i in 0..wt.len() {
            let gi = gt[i].to_f64_lossy();
            let m = b1 * mt[i].to_f64_lossy() + (1.0 - b1) * gi;
            let v = b2 * vt[i].to_f64_lossy() + (1.0 - b2) * gi * gi;
            mt[i] = T::lit(m);
            vt[i] = T::lit(v);
            let update = cfg.lr * (m / c1) / ((v / c2).sqrt() + cfg.epsilon);
            wt[i] = T::lit(wt[i].to_f64_lossy() - update);
        }
    }
    Ok(())
}
