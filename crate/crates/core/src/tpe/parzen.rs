use std::f64::consts::{PI, SQRT_2};

use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::erf::{erfc, erfc_inv};

use super::TpeError;
use crate::study::{ColumnDef, ParamKind};

/// Smallest kernel bandwidth as a fraction of the support width.
pub const MIN_BANDWIDTH_FRACTION: f64 = 1e-3;

/// One truncated-Gaussian mixture component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Kernel {
    pub center: f64,
    pub bandwidth: f64,
    pub weight: f64,
}

/// Kernel density over one encoded column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ParzenEstimator {
    /// Mixture of Gaussians truncated to `[lower, upper]`.
    Numeric {
        kernels: Vec<Kernel>,
        lower: f64,
        upper: f64,
    },
    /// Probability per categorical choice.
    Categorical { weights: Vec<f64> },
}

/// The good-trial density `l` and bad-trial density `g`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParzenPair {
    pub l: ParzenEstimator,
    pub g: ParzenEstimator,
}

pub(crate) fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / SQRT_2)
}

fn std_normal_quantile(p: f64) -> f64 {
    -SQRT_2 * erfc_inv(2.0 * p)
}

/// Density at `x` of `N(center, bandwidth^2)` truncated to `[lower, upper]`.
pub fn truncated_normal_pdf(x: f64, center: f64, bandwidth: f64, lower: f64, upper: f64) -> f64 {
    if x < lower || x > upper {
        return 0.0;
    }
    let z = std_normal_cdf((upper - center) / bandwidth) - std_normal_cdf((lower - center) / bandwidth);
    let u = (x - center) / bandwidth;
    (-0.5 * u * u).exp() / (bandwidth * z * (2.0 * PI).sqrt())
}

fn sample_truncated_normal<R: Rng + ?Sized>(rng: &mut R, center: f64, bandwidth: f64, lower: f64, upper: f64) -> f64 {
    let a = std_normal_cdf((lower - center) / bandwidth);
    let b = std_normal_cdf((upper - center) / bandwidth);
    let u = a + (b - a) * rng.random::<f64>();
    let u = u.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON);
    (center + bandwidth * std_normal_quantile(u)).clamp(lower, upper)
}

/// Support of the density for a numeric column, on the encoded scale.
///
/// Integer columns are widened by half a unit on each side so that every
/// integer gets an equal-width rounding cell.
pub fn numeric_support(col: &ColumnDef) -> (f64, f64) {
    match col.kind {
        ParamKind::Integer => (col.to_encoded(col.lower - 0.5), col.to_encoded(col.upper + 0.5)),
        _ => (col.encoded_lower(), col.encoded_upper()),
    }
}

impl ParzenEstimator {
    /// Fits a density to observed encoded values.
    ///
    /// Numeric columns get one kernel per observation with bandwidth
    /// `max(width / (1 + n), 1e-3 * width)` plus a prior kernel centred on
    /// the support with bandwidth equal to the width. Observation kernels
    /// weigh `1 / (n + prior_weight)` each and the prior
    /// `prior_weight / (n + prior_weight)`. Categorical columns smooth the
    /// choice counts with `prior_weight` spread uniformly over the choices.
    pub fn fit(values: &[f64], col: &ColumnDef, prior_weight: f64) -> Result<Self, TpeError> {
        if !(prior_weight >= 0.0 && prior_weight.is_finite()) {
            return Err(TpeError::InvalidConfig(format!(
                "prior weight must be non-negative, got {prior_weight}"
            )));
        }
        if values.is_empty() && prior_weight == 0.0 {
            return Err(TpeError::EmptyEstimator);
        }
        let total = values.len() as f64 + prior_weight;

        if col.kind == ParamKind::Categorical {
            let k = col.n_choices;
            let mut weights = vec![prior_weight / k as f64; k];
            for &v in values {
                let idx = v.round();
                if idx < 0.0 || idx as usize >= k || idx != v {
                    return Err(TpeError::OutOfSupport { value: v });
                }
                weights[idx as usize] += 1.0;
            }
            weights.iter_mut().for_each(|w| *w /= total);
            return Ok(ParzenEstimator::Categorical { weights });
        }

        let (lower, upper) = numeric_support(col);
        let width = upper - lower;
        if let Some(&bad) = values.iter().find(|&&v| !(lower..=upper).contains(&v)) {
            return Err(TpeError::OutOfSupport { value: bad });
        }
        let bandwidth = (width / (1.0 + values.len() as f64)).max(MIN_BANDWIDTH_FRACTION * width);
        let mut kernels: Vec<Kernel> = values
            .iter()
            .map(|&center| Kernel {
                center,
                bandwidth,
                weight: 1.0 / total,
            })
            .collect();
        if prior_weight > 0.0 {
            kernels.push(Kernel {
                center: 0.5 * (lower + upper),
                bandwidth: width,
                weight: prior_weight / total,
            });
        }
        Ok(ParzenEstimator::Numeric { kernels, lower, upper })
    }

    /// Density at an encoded value (probability mass for categoricals).
    pub fn density(&self, x: f64) -> Result<f64, TpeError> {
        match self {
            ParzenEstimator::Numeric { kernels, lower, upper } => {
                if !(x >= *lower && x <= *upper) {
                    return Err(TpeError::OutOfSupport { value: x });
                }
                Ok(kernels
                    .iter()
                    .map(|k| k.weight * truncated_normal_pdf(x, k.center, k.bandwidth, *lower, *upper))
                    .sum())
            }
            ParzenEstimator::Categorical { weights } => {
                if x.fract() != 0.0 || x < 0.0 || x as usize >= weights.len() {
                    return Err(TpeError::OutOfSupport { value: x });
                }
                Ok(weights[x as usize])
            }
        }
    }

    /// Draws one encoded value.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            ParzenEstimator::Numeric { kernels, lower, upper } => {
                let k = &kernels[pick_weighted(rng, kernels.iter().map(|k| k.weight))];
                sample_truncated_normal(rng, k.center, k.bandwidth, *lower, *upper)
            }
            ParzenEstimator::Categorical { weights } => pick_weighted(rng, weights.iter().copied()) as f64,
        }
    }

    /// A copy with every mixture weight multiplied by `factor`.
    pub fn with_scaled_weights(&self, factor: f64) -> Self {
        match self {
            ParzenEstimator::Numeric { kernels, lower, upper } => ParzenEstimator::Numeric {
                kernels: kernels
                    .iter()
                    .map(|k| Kernel {
                        weight: k.weight * factor,
                        ..*k
                    })
                    .collect(),
                lower: *lower,
                upper: *upper,
            },
            ParzenEstimator::Categorical { weights } => ParzenEstimator::Categorical {
                weights: weights.iter().map(|w| w * factor).collect(),
            },
        }
    }

    pub fn weights(&self) -> Vec<f64> {
        match self {
            ParzenEstimator::Numeric { kernels, .. } => kernels.iter().map(|k| k.weight).collect(),
            ParzenEstimator::Categorical { weights } => weights.clone(),
        }
    }
}

fn pick_weighted<R: Rng + ?Sized>(rng: &mut R, weights: impl Iterator<Item = f64> + Clone) -> usize {
    let total: f64 = weights.clone().sum();
    let mut target = rng.random::<f64>() * total;
    let mut last = 0;
    for (i, w) in weights.enumerate() {
        if w <= 0.0 {
            continue;
        }
        last = i;
        if target < w {
            return i;
        }
        target -= w;
    }
    last
}

impl ParzenPair {
    /// `l(x) / g(x)`.
    pub fn expected_improvement(&self, x: f64) -> Result<f64, TpeError> {
        let l = self.l.density(x)?;
        let g = self.g.density(x)?;
        Ok(l / g)
    }
}
