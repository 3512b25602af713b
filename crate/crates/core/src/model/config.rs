use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activator {
    PReLU,
    ReLU,
    Sigmoid,
    Tanh,
    LeakyReLU,
    SELU,
}

impl Activator {
    /// Whether the activator carries a learned per-channel slope.
    pub fn has_slope(self) -> bool {
        self == Activator::PReLU
    }
}

impl std::str::FromStr for Activator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "prelu" => Ok(Activator::PReLU),
            "relu" => Ok(Activator::ReLU),
            "sigmoid" => Ok(Activator::Sigmoid),
            "tanh" => Ok(Activator::Tanh),
            "leakyrelu" | "leaky_relu" => Ok(Activator::LeakyReLU),
            "selu" => Ok(Activator::SELU),
            other => Err(Error::invalid(format!("unknown activator `{other}`"))),
        }
    }
}

/// Per-layer filter counts of the feature-extraction cascade.
///
/// Counts fall from `first` to `last` along `(i / (layers - 1))^(1 / gamma)`
/// and are truncated towards zero, which reproduces the reference schedules
/// (e.g. 196 -> 32 over 8 layers with gamma 1.2 gives
/// `[196, 163, 138, 115, 93, 72, 51, 32]`).
pub fn filter_schedule(first: usize, last: usize, layers: usize, gamma: f64) -> Result<Vec<usize>> {
    if layers < 2 {
        return Err(Error::invalid(format!("need at least 2 feature layers, got {layers}")));
    }
    if last < 1 || first < last {
        return Err(Error::invalid(format!("filter counts must satisfy first >= last >= 1, got {first}, {last}")));
    }
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::invalid(format!("filter decay gamma must be positive, got {gamma}")));
    }
    let span = (first - last) as f64;
    Ok((0..layers)
        .map(|i| {
            let x = i as f64 / (layers - 1) as f64;
            let decayed = span * (1.0 - x.powf(1.0 / gamma)) + last as f64;
            (decayed as usize).clamp(last, first)
        })
        .collect())
}

/// Architecture hyper-parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub scale: usize,
    pub feature_layers: usize,
    pub first_filters: usize,
    pub last_filters: usize,
    pub filter_decay_gamma: f64,
    pub activator: Activator,
    pub recon_a1: usize,
    pub recon_b1: usize,
    pub recon_b2: usize,
    pub dropout_keep: f64,
    /// Explicit feature filter counts, overriding the decay schedule.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feature_filters: Option<Vec<usize>>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self::table1(2)
    }
}

impl ModelConfig {
    /// Full-size architecture: 8 feature layers 196 -> 32, PReLU,
    /// reconstruction 64/32/32.
    pub fn table1(scale: usize) -> Self {
        Self {
            scale,
            feature_layers: 8,
            first_filters: 196,
            last_filters: 32,
            filter_decay_gamma: 1.2,
            activator: Activator::PReLU,
            recon_a1: 64,
            recon_b1: 32,
            recon_b2: 32,
            dropout_keep: 0.8,
            feature_filters: None,
        }
    }

    /// Reduced profile for CPU training: feature layers `[64, 48, 38, 32]`.
    pub fn desk(scale: usize) -> Self {
        Self {
            feature_layers: 4,
            first_filters: 64,
            last_filters: 32,
            feature_filters: Some(vec![64, 48, 38, 32]),
            ..Self::table1(scale)
        }
    }

    /// Smallest useful network: feature layers `[4, 3]`, used for gradient
    /// checking.
    pub fn tiny(scale: usize) -> Self {
        Self {
            feature_layers: 2,
            first_filters: 4,
            last_filters: 3,
            feature_filters: None,
            ..Self::table1(scale)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.scale != 2 && self.scale != 4 {
            return Err(Error::invalid(format!("model scale must be 2 or 4, got {}", self.scale)));
        }
        if !(self.dropout_keep > 0.0 && self.dropout_keep <= 1.0) {
            return Err(Error::invalid(format!("dropout keep must be in (0, 1], got {}", self.dropout_keep)));
        }
        if self.recon_a1 == 0 || self.recon_b1 == 0 || self.recon_b2 == 0 {
            return Err(Error::invalid("reconstruction filter counts must be positive"));
        }
        self.schedule().map(|_| ())
    }

    /// Feature-layer filter counts.
    pub fn schedule(&self) -> Result<Vec<usize>> {
        match &self.feature_filters {
            None => filter_schedule(self.first_filters, self.last_filters, self.feature_layers, self.filter_decay_gamma),
            Some(f) => {
                if f.len() != self.feature_layers || f.len() < 2 {
                    return Err(Error::invalid("explicit filter list length must equal feature_layers (>= 2)"));
                }
                if f.first() != Some(&self.first_filters) || f.last() != Some(&self.last_filters) {
                    return Err(Error::invalid("explicit filter list must start at first_filters and end at last_filters"));
                }
                if f.windows(2).any(|p| p[1] > p[0]) || self.last_filters == 0 {
                    return Err(Error::invalid("explicit filter list must be non-increasing and positive"));
                }
                Ok(f.clone())
            }
        }
    }

    /// Channels entering the reconstruction network.
    pub fn concat_channels(&self) -> Result<usize> {
        Ok(self.schedule()?.iter().sum())
    }

    /// Channels produced by the final 1x1 layer before depth-to-space.
    pub fn output_channels(&self) -> usize {
        self.scale * self.scale
    }
}
