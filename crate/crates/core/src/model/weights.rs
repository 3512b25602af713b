use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::config::ModelConfig;
use super::tensor::Scalar;
use crate::{Error, Result};

/// Shape of one convolution layer.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LayerSpec {
    pub name: String,
    pub c_in: usize,
    pub c_out: usize,
    pub ksize: usize,
    pub has_slope: bool,
}

impl LayerSpec {
    pub fn kernel_len(&self) -> usize {
        self.c_out * self.c_in * self.ksize * self.ksize
    }

    pub fn param_count(&self) -> usize {
        self.kernel_len() + self.c_out + if self.has_slope { self.c_out } else { 0 }
    }
}

/// Ordered layer shapes for a configuration: feature layers, then the
/// reconstruction layers A1, B1, B2 and the final 1x1 layer.
pub fn layer_specs(cfg: &ModelConfig) -> Result<Vec<LayerSpec>> {
    cfg.validate()?;
    let schedule = cfg.schedule()?;
    let slope = cfg.activator.has_slope();
    let spec = |name: String, c_in, c_out, ksize, has_slope| LayerSpec {
        name,
        c_in,
        c_out,
        ksize,
        has_slope,
    };
    let mut specs = Vec::with_capacity(schedule.len() + 4);
    let mut c_in = 1;
    for (i, &c) in schedule.iter().enumerate() {
        specs.push(spec(format!("feature.{i}"), c_in, c, 3, slope));
        c_in = c;
    }
    let cat: usize = schedule.iter().sum();
    specs.push(spec("recon.a1".into(), cat, cfg.recon_a1, 1, slope));
    specs.push(spec("recon.b1".into(), cat, cfg.recon_b1, 1, slope));
    specs.push(spec("recon.b2".into(), cfg.recon_b1, cfg.recon_b2, 3, slope));
    specs.push(spec("recon.l".into(), cfg.recon_a1 + cfg.recon_b2, cfg.output_channels(), 1, false));
    Ok(specs)
}

/// Parameters of one convolution: kernel `[c_out][c_in][k][k]`, bias
/// `[c_out]` and, for PReLU layers, slopes `[c_out]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvLayer<T = f32> {
    pub c_in: usize,
    pub c_out: usize,
    pub ksize: usize,
    pub kernel: Vec<T>,
    pub bias: Vec<T>,
    pub slope: Vec<T>,
}

impl<T: Scalar> ConvLayer<T> {
    pub fn zeros(spec: &LayerSpec) -> Self {
        Self {
            c_in: spec.c_in,
            c_out: spec.c_out,
            ksize: spec.ksize,
            kernel: vec![T::zero(); spec.kernel_len()],
            bias: vec![T::zero(); spec.c_out],
            slope: vec![T::zero(); if spec.has_slope { spec.c_out } else { 0 }],
        }
    }

    pub fn fan_in(&self) -> usize {
        self.c_in * self.ksize * self.ksize
    }

    fn matches(&self, spec: &LayerSpec) -> bool {
        self.c_in == spec.c_in
            && self.c_out == spec.c_out
            && self.ksize == spec.ksize
            && self.kernel.len() == spec.kernel_len()
            && self.bias.len() == spec.c_out
            && self.slope.len() == if spec.has_slope { spec.c_out } else { 0 }
    }

    fn cast<U: Scalar>(&self) -> ConvLayer<U> {
        let c = |v: &[T]| v.iter().map(|x| U::lit(x.to_f64_lossy())).collect();
        ConvLayer {
            c_in: self.c_in,
            c_out: self.c_out,
            ksize: self.ksize,
            kernel: c(&self.kernel),
            bias: c(&self.bias),
            slope: c(&self.slope),
        }
    }
}

/// Every learned parameter of the network. Gradients and optimiser moments
/// use the same type.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelWeights<T = f32> {
    pub features: Vec<ConvLayer<T>>,
    pub a1: ConvLayer<T>,
    pub b1: ConvLayer<T>,
    pub b2: ConvLayer<T>,
    pub last: ConvLayer<T>,
}

impl<T: Scalar> ModelWeights<T> {
    pub fn zeros(cfg: &ModelConfig) -> Result<Self> {
        Self::from_layers(layer_specs(cfg)?.iter().map(ConvLayer::zeros).collect())
    }

    /// Assembles weights from layers in [`layer_specs`] order.
    pub(crate) fn from_layers(mut layers: Vec<ConvLayer<T>>) -> Result<Self> {
        if layers.len() < 6 {
            return Err(Error::invalid("a model needs at least 2 feature layers and 4 reconstruction layers"));
        }
        let last = layers.pop().unwrap();
        let b2 = layers.pop().unwrap();
        let b1 = layers.pop().unwrap();
        let a1 = layers.pop().unwrap();
        Ok(Self {
            features: layers,
            a1,
            b1,
            b2,
            last,
        })
    }

    pub fn layers(&self) -> Vec<&ConvLayer<T>> {
        let mut v: Vec<_> = self.features.iter().collect();
        v.extend([&self.a1, &self.b1, &self.b2, &self.last]);
        v
    }

    pub fn layers_mut(&mut self) -> Vec<&mut ConvLayer<T>> {
        let mut v: Vec<_> = self.features.iter_mut().collect();
        v.extend([&mut self.a1, &mut self.b1, &mut self.b2, &mut self.last]);
        v
    }

    /// Parameter tensors in storage order: per layer kernel, bias, slope.
    pub fn tensors(&self) -> Vec<&[T]> {
        self.layers()
            .into_iter()
            .flat_map(|l| [&l.kernel[..], &l.bias[..], &l.slope[..]])
            .collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Vec<T>> {
        self.layers_mut()
            .into_iter()
            .flat_map(|l| [&mut l.kernel, &mut l.bias, &mut l.slope])
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    /// Checks that every layer has the shape `cfg` prescribes.
    pub fn check_shapes(&self, cfg: &ModelConfig) -> Result<()> {
        let specs = layer_specs(cfg)?;
        let layers = self.layers();
        if layers.len() != specs.len() || !layers.iter().zip(&specs).all(|(l, s)| l.matches(s)) {
            return Err(Error::invalid("weights do not match the model configuration"));
        }
        Ok(())
    }

    pub fn cast<U: Scalar>(&self) -> ModelWeights<U> {
        ModelWeights {
            features: self.features.iter().map(ConvLayer::cast).collect(),
            a1: self.a1.cast(),
            b1: self.b1.cast(),
            b2: self.b2.cast(),
            last: self.last.cast(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }
}

/// He-initialised weights: kernels ~ N(0, 2 / fan_in), biases and PReLU
/// slopes exactly zero. Deterministic for a seed and independent of `T`.
pub fn init_model<T: Scalar>(cfg: &ModelConfig, seed: u64) -> Result<ModelWeights<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w = ModelWeights::<T>::zeros(cfg)?;
    for layer in w.layers_mut() {
        let std = (2.0 / layer.fan_in() as f64).sqrt();
        let normal = Normal::new(0.0, std).map_err(|e| Error::invalid(e.to_string()))?;
        for k in layer.kernel.iter_mut() {
            *k = T::lit(normal.sample(&mut rng));
        }
    }
    Ok(w)
}
