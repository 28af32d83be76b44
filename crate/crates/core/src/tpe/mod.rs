//! Tree-structured Parzen estimator sampler.
//!
//! Past trials are split into a "good" set (lowest loss, i.e. highest
//! objective) and a "bad" set. Each encoded column gets a Parzen density
//! per set, `l` for good and `g` for bad, and the next value is the
//! candidate drawn from `l` that maximizes `l(x) / g(x)`. Columns are
//! sampled independently.

mod parzen;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use parzen::{numeric_support, truncated_normal_pdf, Kernel, ParzenEstimator, ParzenPair, MIN_BANDWIDTH_FRACTION};

use crate::study::{ColumnDef, ColumnRole, Config, ParamDef, ParamKind, SearchSpace, Study};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TpeError {
    #[error("invalid sampler configuration: {0}")]
    InvalidConfig(String),
    #[error("an estimator needs observations or a positive prior weight")]
    EmptyEstimator,
    #[error("value {value} lies outside the estimator support")]
    OutOfSupport { value: f64 },
    #[error("unknown parameter `{0}`")]
    UnknownParam(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TpeConfig {
    /// Fraction of trials treated as "good".
    pub gamma: f64,
    /// Trials sampled uniformly before the densities are used.
    pub n_startup: usize,
    /// Candidates drawn from `l` per column.
    pub n_candidates: usize,
    pub prior_weight: f64,
    pub seed: u64,
}

impl Default for TpeConfig {
    fn default() -> Self {
        Self {
            gamma: 0.25,
            n_startup: 10,
            n_candidates: 24,
            prior_weight: 1.0,
            seed: 0,
        }
    }
}

impl TpeConfig {
    pub fn validate(&self) -> Result<(), TpeError> {
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(TpeError::InvalidConfig(format!(
                "gamma must lie in (0, 1), got {}",
                self.gamma
            )));
        }
        if self.n_startup == 0 {
            return Err(TpeError::InvalidConfig("n_startup must be at least 1".into()));
        }
        if self.n_candidates == 0 {
            return Err(TpeError::InvalidConfig("n_candidates must be at least 1".into()));
        }
        if !(self.prior_weight >= 0.0 && self.prior_weight.is_finite()) {
            return Err(TpeError::InvalidConfig("prior_weight must be non-negative".into()));
        }
        Ok(())
    }
}

/// Indices of the good and bad trials.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub good: Vec<usize>,
    pub bad: Vec<usize>,
}

/// Splits trials by objective (higher is better).
///
/// The good set holds the `ceil(gamma * n)` best trials; on equal
/// objectives the earlier trial wins. Both sets are returned in trial order.
pub fn split_trials(objectives: &[f64], gamma: f64) -> Split {
    let n = objectives.len();
    let n_good = ((gamma * n as f64).ceil() as usize).min(n);
    let mut order: Vec<usize> = (0..n).collect();
    // Ascending loss; the sort is stable so ties keep trial order.
    order.sort_by(|&a, &b| (-objectives[a]).total_cmp(&(-objectives[b])));
    let mut good = order[..n_good].to_vec();
    let mut bad = order[n_good..].to_vec();
    good.sort_unstable();
    bad.sort_unstable();
    Split { good, bad }
}

/// Fits the density for one column. See [`ParzenEstimator::fit`].
pub fn fit_parzen(values: &[f64], col: &ColumnDef, prior_weight: f64) -> Result<ParzenEstimator, TpeError> {
    ParzenEstimator::fit(values, col, prior_weight)
}

/// Index of the candidate with the largest EI; ties go to the smallest
/// candidate value.
pub fn argmax_ei(pair: &ParzenPair, candidates: &[f64]) -> Result<usize, TpeError> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &c) in candidates.iter().enumerate() {
        let ei = pair.expected_improvement(c)?;
        best = match best {
            None => Some((i, ei)),
            Some((bi, bei)) => {
                if ei > bei || (ei == bei && c < candidates[bi]) {
                    Some((i, ei))
                } else {
                    Some((bi, bei))
                }
            }
        };
    }
    best.map(|(i, _)| i)
        .ok_or_else(|| TpeError::InvalidConfig("no candidates".into()))
}

/// Uniform draw on the encoded scale (log-uniform for log-scaled
/// columns), snapped to the column's kind.
pub fn sample_uniform<R: Rng + ?Sized>(col: &ColumnDef, rng: &mut R) -> f64 {
    match col.kind {
        ParamKind::Categorical => rng.random_range(0..col.n_choices) as f64,
        _ => {
            let (lo, hi) = numeric_support(col);
            snap(col, lo + (hi - lo) * rng.random::<f64>())
        }
    }
}

/// Rounds integer columns to the nearest in-bounds integer (on the raw
/// scale) and returns the encoded value.
fn snap(col: &ColumnDef, encoded: f64) -> f64 {
    match col.kind {
        ParamKind::Integer => {
            let raw = col.from_encoded(encoded).round().clamp(col.lower, col.upper);
            col.to_encoded(raw)
        }
        ParamKind::Categorical => encoded.round().clamp(0.0, (col.n_choices - 1) as f64),
        ParamKind::Continuous => encoded.clamp(col.encoded_lower(), col.encoded_upper()),
    }
}

/// Suggests an encoded value for one column given its history of
/// `(encoded value, objective)` pairs.
pub fn suggest_column<R: Rng + ?Sized>(
    history: &[(f64, f64)],
    col: &ColumnDef,
    cfg: &TpeConfig,
    rng: &mut R,
) -> Result<f64, TpeError> {
    if history.is_empty() {
        return Ok(sample_uniform(col, rng));
    }
    let objectives: Vec<f64> = history.iter().map(|h| h.1).collect();
    let split = split_trials(&objectives, cfg.gamma);
    let good: Vec<f64> = split.good.iter().map(|&i| history[i].0).collect();
    let bad: Vec<f64> = split.bad.iter().map(|&i| history[i].0).collect();
    let pair = ParzenPair {
        l: fit_parzen(&good, col, cfg.prior_weight)?,
        g: fit_parzen(&bad, col, cfg.prior_weight)?,
    };
    let candidates: Vec<f64> = (0..cfg.n_candidates).map(|_| pair.l.sample(rng)).collect();
    let best = argmax_ei(&pair, &candidates)?;
    Ok(snap(col, candidates[best]))
}

/// Suggests a value for one parameter of the study's space.
///
/// Below `n_startup` trials the value is drawn uniformly. Variable-length
/// parameters first pick a length, then fill each slot from the trials
/// that actually had that slot.
pub fn suggest<R: Rng + ?Sized>(
    study: &Study,
    param: &str,
    cfg: &TpeConfig,
    rng: &mut R,
) -> Result<crate::study::ParamValue, TpeError> {
    cfg.validate()?;
    let p_idx = study
        .space
        .param_index(param)
        .ok_or_else(|| TpeError::UnknownParam(param.to_string()))?;
    let rows: Vec<Vec<f64>> = study.trials.iter().map(|t| study.encode_trial(t)).collect();
    let objectives = study.objectives();
    let startup = study.len() < cfg.n_startup;
    suggest_param(&study.space, p_idx, &rows, &objectives, startup, cfg, rng)
}

fn suggest_param<R: Rng + ?Sized>(
    space: &SearchSpace,
    p_idx: usize,
    rows: &[Vec<f64>],
    objectives: &[f64],
    startup: bool,
    cfg: &TpeConfig,
    rng: &mut R,
) -> Result<crate::study::ParamValue, TpeError> {
    let def: &ParamDef = &space.params[p_idx];
    let offset: usize = space.params[..p_idx].iter().map(ParamDef::n_columns).sum();
    let cols: Vec<ColumnDef> = space.column_defs().into_iter().filter(|c| c.param == p_idx).collect();

    let draw = |j: usize, history: Vec<(f64, f64)>, rng: &mut R| -> Result<f64, TpeError> {
        if startup || history.is_empty() {
            Ok(sample_uniform(&cols[j], rng))
        } else {
            suggest_column(&history, &cols[j], cfg, rng)
        }
    };

    let mut encoded = Vec::with_capacity(cols.len());
    let (len, first_slot) = if def.arity.is_variable() {
        let history = rows.iter().zip(objectives).map(|(r, &y)| (r[offset], y)).collect();
        let len = draw(0, history, rng)?;
        encoded.push(len);
        (len as usize, 1)
    } else {
        (def.arity.max_len(), 0)
    };
    for slot in 0..def.arity.max_len() {
        let j = first_slot + slot;
        debug_assert_eq!(cols[j].role, ColumnRole::Value { slot });
        if slot >= len {
            encoded.push(def.filler());
            continue;
        }
        let history = rows
            .iter()
            .zip(objectives)
            .filter(|(r, _)| first_slot == 0 || (r[offset] as usize) > slot)
            .map(|(r, &y)| (r[offset + j], y))
            .collect();
        encoded.push(draw(j, history, rng)?);
    }
    Ok(def.decode_value(&encoded))
}

/// Suggests a full configuration, one parameter at a time in space order.
pub fn suggest_config<R: Rng + ?Sized>(study: &Study, cfg: &TpeConfig, rng: &mut R) -> Result<Config, TpeError> {
    cfg.validate()?;
    let rows: Vec<Vec<f64>> = study.trials.iter().map(|t| study.encode_trial(t)).collect();
    let objectives = study.objectives();
    let startup = study.len() < cfg.n_startup;
    let mut config = Config::new();
    for (i, p) in study.space.params.iter().enumerate() {
        let v = suggest_param(&study.space, i, &rows, &objectives, startup, cfg, rng)?;
        config.insert(p.name.clone(), v);
    }
    Ok(config)
}

/// A configuration drawn uniformly from the space.
pub fn random_config<R: Rng + ?Sized>(space: &SearchSpace, rng: &mut R) -> Config {
    let mut config = Config::new();
    for (i, p) in space.params.iter().enumerate() {
        let v =
            suggest_param(space, i, &[], &[], true, &TpeConfig::default(), rng).expect("uniform sampling cannot fail");
        config.insert(p.name.clone(), v);
    }
    config
}
