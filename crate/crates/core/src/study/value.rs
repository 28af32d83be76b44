use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::space::{ParamDef, ParamKind};

/// A single hyperparameter value as it appears in a trial file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Scalar {
    Number(f64),
    Label(String),
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scalar::Number(v) => write!(f, "{v}"),
            Scalar::Label(s) => write!(f, "{s:?}"),
        }
    }
}

/// Value of one parameter: a scalar, or a list for parameters with arity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Scalar(Scalar),
    List(Vec<Scalar>),
}

impl ParamValue {
    pub fn number(v: f64) -> Self {
        ParamValue::Scalar(Scalar::Number(v))
    }

    pub fn label(s: impl Into<String>) -> Self {
        ParamValue::Scalar(Scalar::Label(s.into()))
    }

    pub fn numbers(vs: impl IntoIterator<Item = f64>) -> Self {
        ParamValue::List(vs.into_iter().map(Scalar::Number).collect())
    }

    fn as_slice(&self) -> &[Scalar] {
        match self {
            ParamValue::Scalar(s) => std::slice::from_ref(s),
            ParamValue::List(v) => v,
        }
    }

    /// The numeric value when this is a single number.
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            ParamValue::Scalar(Scalar::Number(v)) => Some(*v),
            _ => None,
        }
    }
}

/// Parameter name to value.
pub type Config = BTreeMap<String, ParamValue>;

impl ParamDef {
    /// Encoded value of one scalar: ordinal index for categoricals, log10
    /// for log-scaled numbers, the raw number otherwise.
    pub fn encode_scalar(&self, value: &Scalar) -> Result<f64, String> {
        match (self.kind, value) {
            (ParamKind::Categorical, Scalar::Label(label)) => self
                .choices
                .iter()
                .position(|c| c == label)
                .map(|i| i as f64)
                .ok_or_else(|| format!("{label:?} is not one of {:?}", self.choices)),
            (ParamKind::Categorical, Scalar::Number(v)) => {
                Err(format!("expected a label from {:?}, got {v}", self.choices))
            }
            (_, Scalar::Label(s)) => Err(format!("expected a number, got {s:?}")),
            (kind, Scalar::Number(v)) => {
                let v = *v;
                if !v.is_finite() {
                    return Err(format!("non-finite value {v}"));
                }
                if kind == ParamKind::Integer && v.fract() != 0.0 {
                    return Err(format!("expected an integer, got {v}"));
                }
                if v < self.lower || v > self.upper {
                    return Err(format!("value {v} outside bounds [{}, {}]", self.lower, self.upper));
                }
                Ok(if self.log_scale { v.log10() } else { v })
            }
        }
    }

    pub fn decode_scalar(&self, encoded: f64) -> Scalar {
        match self.kind {
            ParamKind::Categorical => {
                let idx = (encoded.round().max(0.0) as usize).min(self.choices.len() - 1);
                Scalar::Label(self.choices[idx].clone())
            }
            ParamKind::Integer => {
                let raw = if self.log_scale { 10f64.powf(encoded) } else { encoded };
                Scalar::Number(raw.round().clamp(self.lower, self.upper))
            }
            ParamKind::Continuous => {
                let raw = if self.log_scale { 10f64.powf(encoded) } else { encoded };
                Scalar::Number(raw.clamp(self.lower, self.upper))
            }
        }
    }

    /// Encoded value used for list slots a trial does not populate.
    pub fn filler(&self) -> f64 {
        match self.kind {
            ParamKind::Categorical => 0.0,
            _ if self.log_scale => self.lower.log10(),
            _ => self.lower,
        }
    }

    /// Encodes a full parameter value into its columns (see
    /// [`ParamDef::column_names`]).
    pub fn encode_value(&self, value: &ParamValue) -> Result<Vec<f64>, String> {
        let items = value.as_slice();
        let (lo, hi) = (self.arity.min_len(), self.arity.max_len());
        if items.len() < lo || items.len() > hi {
            return Err(if lo == hi {
                format!("expected {lo} value(s), got {}", items.len())
            } else {
                format!("expected between {lo} and {hi} values, got {}", items.len())
            });
        }
        let mut out = Vec::with_capacity(self.n_columns());
        if self.arity.is_variable() {
            out.push(items.len() as f64);
        }
        for item in items {
            out.push(self.encode_scalar(item)?);
        }
        let filler = self.filler();
        out.resize(self.n_columns(), filler);
        Ok(out)
    }

    /// Inverse of [`ParamDef::encode_value`].
    pub fn decode_value(&self, encoded: &[f64]) -> ParamValue {
        let (len, slots) = if self.arity.is_variable() {
            let len = (encoded[0].round() as usize).clamp(self.arity.min_len(), self.arity.max_len());
            (len, &encoded[1..])
        } else {
            (self.arity.max_len(), encoded)
        };
        let scalars: Vec<Scalar> = slots[..len].iter().map(|&e| self.decode_scalar(e)).collect();
        match (self.arity, scalars.len()) {
            (super::Arity::Fixed(1), 1) => ParamValue::Scalar(scalars.into_iter().next().expect("one scalar")),
            _ => ParamValue::List(scalars),
        }
    }
}
