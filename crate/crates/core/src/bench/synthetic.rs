use std::collections::BTreeMap;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::BenchError;
use crate::seeds;
use crate::study::{encode_config, Config, ParamDef, SearchSpace, Study, TrialRecord};
use crate::tpe::{random_config, suggest_config, TpeConfig};

/// Response of one column, as a function of its position `u` in `[0, 1]`
/// across the declared range. Every shape maps into `[-1, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    MonotoneUp,
    MonotoneDown,
    /// Gaussian bump of the given width, both in units of `u`.
    Peak {
        center: f64,
        width: f64,
    },
    Step {
        threshold: f64,
    },
    /// `1 - 2 (u - center)^2`.
    Quadratic {
        center: f64,
    },
}

impl Shape {
    pub fn eval(&self, u: f64) -> f64 {
        match *self {
            Shape::MonotoneUp => 2.0 * u - 1.0,
            Shape::MonotoneDown => 1.0 - 2.0 * u,
            Shape::Peak { center, width } => {
                let z = (u - center) / width;
                2.0 * (-0.5 * z * z).exp() - 1.0
            }
            Shape::Step { threshold } => {
                if u >= threshold {
                    1.0
                } else {
                    -1.0
                }
            }
            Shape::Quadratic { center } => 1.0 - 2.0 * (u - center).powi(2),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Effect {
    /// Encoded column name.
    pub param: String,
    pub shape: Shape,
    pub weight: f64,
}

/// Product term `(2 u_a - 1)(2 u_b - 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Interaction {
    pub param_a: String,
    pub param_b: String,
    pub weight: f64,
}

/// Objective with planted structure over a search space.
///
/// `f = 0.5 + 0.5 * (sum of weighted terms) / (sum of |weights|) + noise`,
/// clamped to `[0, 1]`. Noise is seeded by the configuration, so equal
/// configurations always score the same.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub space: SearchSpace,
    #[serde(default)]
    pub effects: Vec<Effect>,
    #[serde(default)]
    pub interactions: Vec<Interaction>,
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(default)]
    pub seed: u64,
}

/// Names accepted by [`SyntheticSpec::preset`].
pub const PRESETS: [&str; 3] = ["planted", "quadratic", "interaction"];

impl SyntheticSpec {
    pub fn validate(&self) -> Result<(), BenchError> {
        self.space.validate()?;
        let columns = self.space.column_names();
        let known = |c: &str| {
            if columns.iter().any(|n| n == c) {
                Ok(())
            } else {
                Err(BenchError::Spec(format!("unknown column `{c}`")))
            }
        };
        for e in &self.effects {
            known(&e.param)?;
            if !e.weight.is_finite() {
                return Err(BenchError::Spec(format!("weight of `{}` is not finite", e.param)));
            }
            if let Shape::Peak { width, .. } = e.shape {
                if width.is_nan() || width <= 0.0 {
                    return Err(BenchError::Spec(format!(
                        "peak width of `{}` must be positive",
                        e.param
                    )));
                }
            }
        }
        for i in &self.interactions {
            known(&i.param_a)?;
            known(&i.param_b)?;
            if !i.weight.is_finite() {
                return Err(BenchError::Spec(format!(
                    "weight of `{}` x `{}` is not finite",
                    i.param_a, i.param_b
                )));
            }
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(BenchError::Spec("noise_sigma must be finite and non-negative".into()));
        }
        Ok(())
    }

    /// Weights 10:3:1 on `a` (increasing), `b` (decreasing, log-scaled) and
    /// `c` (increasing); `d` is inert.
    pub fn planted(seed: u64) -> Self {
        let space = SearchSpace::new(vec![
            ParamDef::continuous("a", 0.0, 1.0),
            ParamDef::continuous("b", 1e-4, 1e-1).with_log_scale(),
            ParamDef::continuous("c", 0.0, 1.0),
            ParamDef::integer("d", 1.0, 8.0),
        ])
        .expect("preset space is valid");
        Self {
            space,
            effects: vec![
                effect("a", Shape::MonotoneUp, 10.0),
                effect("b", Shape::MonotoneDown, 3.0),
                effect("c", Shape::MonotoneUp, 1.0),
            ],
            interactions: Vec::new(),
            noise_sigma: 0.03,
            seed,
        }
    }

    /// One continuous `x` on `[0, 1]` with `f(x) = 1 - (x - 0.3)^2`.
    pub fn quadratic(seed: u64) -> Self {
        let space = SearchSpace::new(vec![ParamDef::continuous("x", 0.0, 1.0)]).expect("preset space is valid");
        Self {
            space,
            effects: vec![effect("x", Shape::Quadratic { center: 0.3 }, 1.0)],
            interactions: Vec::new(),
            noise_sigma: 0.0,
            seed,
        }
    }

    /// A product term between `a` and `b`, a weak monotone `c` and an inert
    /// `d`.
    pub fn interaction(seed: u64) -> Self {
        let space = SearchSpace::new(
            ["a", "b", "c", "d"]
                .iter()
                .map(|n| ParamDef::continuous(*n, 0.0, 1.0))
                .collect(),
        )
        .expect("preset space is valid");
        Self {
            space,
            effects: vec![effect("c", Shape::MonotoneUp, 1.0)],
            interactions: vec![Interaction {
                param_a: "a".into(),
                param_b: "b".into(),
                weight: 3.0,
            }],
            noise_sigma: 0.03,
            seed,
        }
    }

    pub fn preset(name: &str, seed: u64) -> Option<Self> {
        match name {
            "planted" => Some(Self::planted(seed)),
            "quadratic" => Some(Self::quadratic(seed)),
            "interaction" => Some(Self::interaction(seed)),
            _ => None,
        }
    }
}

fn effect(param: &str, shape: Shape, weight: f64) -> Effect {
    Effect {
        param: param.into(),
        shape,
        weight,
    }
}

fn noise_seed(spec_seed: u64, row: &[f64]) -> u64 {
    row.iter().fold(seeds::mix64(spec_seed), |h, &v| {
        let bits = if v == 0.0 { 0 } else { v.to_bits() };
        seeds::mix64(h ^ bits)
    })
}

/// Objective of `config` under `spec`.
pub fn eval_synthetic(spec: &SyntheticSpec, config: &Config) -> Result<f64, BenchError> {
    spec.validate()?;
    let row = encode_config(&spec.space, "synthetic", config)?;
    let defs = spec.space.column_defs();
    let position = |name: &str| -> f64 {
        let j = defs.iter().position(|c| c.name == name).expect("validated column");
        let w = defs[j].encoded_width();
        if w > 0.0 {
            ((row[j] - defs[j].encoded_lower()) / w).clamp(0.0, 1.0)
        } else {
            0.5
        }
    };

    let mut total = 0.0;
    let mut scale = 0.0;
    for e in &spec.effects {
        total += e.weight * e.shape.eval(position(&e.param));
        scale += e.weight.abs();
    }
    for i in &spec.interactions {
        let a = 2.0 * position(&i.param_a) - 1.0;
        let b = 2.0 * position(&i.param_b) - 1.0;
        total += i.weight * a * b;
        scale += i.weight.abs();
    }
    let mut f = if scale > 0.0 { 0.5 + 0.5 * total / scale } else { 0.5 };
    if spec.noise_sigma > 0.0 {
        let mut rng = seeds::rng(noise_seed(spec.seed, &row));
        let z: f64 = StandardNormal.sample(&mut rng);
        f += spec.noise_sigma * z;
    }
    Ok(f.clamp(0.0, 1.0))
}

#[derive(Debug, Clone, PartialEq)]
pub enum Sampler {
    Random,
    Tpe(TpeConfig),
}

impl Sampler {
    pub fn name(&self) -> &'static str {
        match self {
            Sampler::Random => "random",
            Sampler::Tpe(_) => "tpe",
        }
    }
}

/// Runs `n_trials` sequential trials against the synthetic objective.
pub fn simulate_study(
    spec: &SyntheticSpec,
    sampler: &Sampler,
    n_trials: usize,
    seed: u64,
) -> Result<Study, BenchError> {
    spec.validate()?;
    if n_trials == 0 {
        return Err(BenchError::Spec("n_trials must be at least 1".into()));
    }
    let mut rng = seeds::rng(seed);
    let mut study = Study {
        space: spec.space.clone(),
        trials: Vec::with_capacity(n_trials),
    };
    for i in 0..n_trials {
        let config = match sampler {
            Sampler::Random => random_config(&spec.space, &mut rng),
            Sampler::Tpe(cfg) => suggest_config(&study, cfg, &mut rng)?,
        };
        let objective = eval_synthetic(spec, &config)?;
        let mut tags = BTreeMap::new();
        tags.insert("sampler".to_string(), serde_json::Value::from(sampler.name()));
        study.trials.push(TrialRecord {
            trial_id: format!("t{i:05}"),
            config,
            objective,
            tags,
        });
    }
    Ok(study)
}
