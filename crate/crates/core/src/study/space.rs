use std::collections::HashSet;
use std::fmt;
use std::io::Read;

use serde::{Deserialize, Serialize};

use super::StudyError;

/// Kind of a hyperparameter dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParamKind {
    Continuous,
    Integer,
    Categorical,
}

impl ParamKind {
    pub fn is_numeric(self) -> bool {
        !matches!(self, ParamKind::Categorical)
    }
}

impl fmt::Display for ParamKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ParamKind::Continuous => "continuous",
            ParamKind::Integer => "integer",
            ParamKind::Categorical => "categorical",
        })
    }
}

/// Number of repeated scalar slots a parameter carries.
///
/// `Fixed(k)` always has exactly `k` values. `Range([lo, hi])` is a
/// variable-length list (e.g. one width per hidden layer) and adds a
/// `name.len` column to the encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Arity {
    Fixed(usize),
    Range([usize; 2]),
}

impl Default for Arity {
    fn default() -> Self {
        Arity::Fixed(1)
    }
}

impl Arity {
    pub fn min_len(self) -> usize {
        match self {
            Arity::Fixed(k) => k,
            Arity::Range([lo, _]) => lo,
        }
    }

    pub fn max_len(self) -> usize {
        match self {
            Arity::Fixed(k) => k,
            Arity::Range([_, hi]) => hi,
        }
    }

    /// True when the list length itself varies between trials.
    pub fn is_variable(self) -> bool {
        self.min_len() != self.max_len()
    }
}

fn is_default_arity(a: &Arity) -> bool {
    *a == Arity::Fixed(1)
}

/// One named hyperparameter dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamDef {
    pub name: String,
    pub kind: ParamKind,
    #[serde(default)]
    pub lower: f64,
    #[serde(default)]
    pub upper: f64,
    #[serde(default)]
    pub log_scale: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub choices: Vec<String>,
    #[serde(default, skip_serializing_if = "is_default_arity")]
    pub arity: Arity,
    /// Hard domain limits used to clamp bound advice (e.g. a probability
    /// may never leave `[0, 1]`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hard_lower: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hard_upper: Option<f64>,
}

impl ParamDef {
    pub fn continuous(name: impl Into<String>, lower: f64, upper: f64) -> Self {
        Self {
            name: name.into(),
            kind: ParamKind::Continuous,
            lower,
            upper,
            log_scale: false,
            choices: Vec::new(),
            arity: Arity::Fixed(1),
            hard_lower: None,
            hard_upper: None,
        }
    }

    pub fn integer(name: impl Into<String>, lower: f64, upper: f64) -> Self {
        Self {
            kind: ParamKind::Integer,
            ..Self::continuous(name, lower, upper)
        }
    }

    pub fn categorical<S: Into<String>>(name: impl Into<String>, choices: impl IntoIterator<Item = S>) -> Self {
        Self {
            kind: ParamKind::Categorical,
            choices: choices.into_iter().map(Into::into).collect(),
            ..Self::continuous(name, 0.0, 0.0)
        }
    }

    pub fn with_log_scale(mut self) -> Self {
        self.log_scale = true;
        self
    }

    pub fn with_arity(mut self, arity: Arity) -> Self {
        self.arity = arity;
        self
    }

    pub fn with_hard_limits(mut self, lower: Option<f64>, upper: Option<f64>) -> Self {
        self.hard_lower = lower;
        self.hard_upper = upper;
        self
    }

    pub fn validate(&self) -> Result<(), StudyError> {
        let bad = |reason: String| StudyError::InvalidSpace {
            param: self.name.clone(),
            reason,
        };
        if self.name.is_empty() {
            return Err(bad("empty parameter name".into()));
        }
        match self.kind {
            ParamKind::Categorical => {
                if self.choices.is_empty() {
                    return Err(bad("categorical parameter needs at least one choice".into()));
                }
                let unique: HashSet<&str> = self.choices.iter().map(String::as_str).collect();
                if unique.len() != self.choices.len() {
                    return Err(bad("categorical choices must be unique".into()));
                }
                if self.log_scale {
                    return Err(bad("categorical parameter cannot be log-scaled".into()));
                }
            }
            ParamKind::Continuous | ParamKind::Integer => {
                if !(self.lower.is_finite() && self.upper.is_finite()) {
                    return Err(bad("bounds must be finite".into()));
                }
                if self.lower >= self.upper {
                    return Err(bad(format!(
                        "lower bound {} must be below upper bound {}",
                        self.lower, self.upper
                    )));
                }
                if self.log_scale && self.lower <= 0.0 {
                    return Err(bad("log-scaled parameter needs a positive lower bound".into()));
                }
                if self.kind == ParamKind::Integer && (self.lower.fract() != 0.0 || self.upper.fract() != 0.0) {
                    return Err(bad("integer bounds must be integral".into()));
                }
            }
        }
        if self.arity.min_len() == 0 || self.arity.min_len() > self.arity.max_len() {
            return Err(bad(format!("invalid arity {:?}", self.arity)));
        }
        if let (Some(lo), Some(hi)) = (self.hard_lower, self.hard_upper) {
            if lo >= hi {
                return Err(bad("hard limits are not well ordered".into()));
            }
        }
        if let Some(lo) = self.hard_lower {
            if self.kind.is_numeric() && lo > self.lower {
                return Err(bad("hard lower limit exceeds the lower bound".into()));
            }
        }
        if let Some(hi) = self.hard_upper {
            if self.kind.is_numeric() && hi < self.upper {
                return Err(bad("hard upper limit is below the upper bound".into()));
            }
        }
        Ok(())
    }

    /// Names of the encoded columns this parameter expands to, in order.
    pub fn column_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        if self.arity.is_variable() {
            names.push(format!("{}.len", self.name));
        }
        match self.arity {
            Arity::Fixed(1) => names.push(self.name.clone()),
            a => names.extend((0..a.max_len()).map(|i| format!("{}[{}]", self.name, i))),
        }
        names
    }

    pub fn n_columns(&self) -> usize {
        self.arity.max_len() + usize::from(self.arity.is_variable())
    }
}

/// What an encoded column represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnRole {
    /// A scalar slot of the parameter (slot index for list parameters).
    Value { slot: usize },
    /// The length of a variable-length list parameter.
    Length,
}

/// A single encoded column with the bounds and scale needed to interpret it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnDef {
    pub name: String,
    /// Index of the owning parameter in the search space.
    pub param: usize,
    pub role: ColumnRole,
    pub kind: ParamKind,
    pub lower: f64,
    pub upper: f64,
    pub log_scale: bool,
    pub n_choices: usize,
    pub hard_lower: Option<f64>,
    pub hard_upper: Option<f64>,
}

impl ColumnDef {
    /// Raw value to the encoded scale (log10 for log-scaled columns).
    pub fn to_encoded(&self, raw: f64) -> f64 {
        if self.log_scale {
            raw.log10()
        } else {
            raw
        }
    }

    pub fn from_encoded(&self, encoded: f64) -> f64 {
        if self.log_scale {
            10f64.powf(encoded)
        } else {
            encoded
        }
    }

    /// Lower bound on the encoded scale. Categorical columns span the
    /// ordinal indices `0..n_choices-1`.
    pub fn encoded_lower(&self) -> f64 {
        match self.kind {
            ParamKind::Categorical => 0.0,
            _ => self.to_encoded(self.lower),
        }
    }

    pub fn encoded_upper(&self) -> f64 {
        match self.kind {
            ParamKind::Categorical => self.n_choices.saturating_sub(1) as f64,
            _ => self.to_encoded(self.upper),
        }
    }

    pub fn encoded_width(&self) -> f64 {
        self.encoded_upper() - self.encoded_lower()
    }
}

/// Ordered collection of hyperparameter dimensions.
///
/// The parameter order fixes the column order of every downstream matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub params: Vec<ParamDef>,
}

impl SearchSpace {
    pub fn new(params: Vec<ParamDef>) -> Result<Self, StudyError> {
        let space = Self { params };
        space.validate()?;
        Ok(space)
    }

    pub fn validate(&self) -> Result<(), StudyError> {
        let mut seen = HashSet::new();
        for p in &self.params {
            p.validate()?;
            if !seen.insert(p.name.as_str()) {
                return Err(StudyError::InvalidSpace {
                    param: p.name.clone(),
                    reason: "duplicate parameter name".into(),
                });
            }
        }
        Ok(())
    }

    pub fn from_json_reader(reader: impl Read) -> Result<Self, StudyError> {
        let space: SearchSpace = serde_json::from_reader(reader).map_err(|e| StudyError::SpaceFormat(e.to_string()))?;
        space.validate()?;
        Ok(space)
    }

    pub fn from_json_str(s: &str) -> Result<Self, StudyError> {
        Self::from_json_reader(s.as_bytes())
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("search space serializes")
    }

    pub fn param(&self, name: &str) -> Option<&ParamDef> {
        self.params.iter().find(|p| p.name == name)
    }

    pub fn param_index(&self, name: &str) -> Option<usize> {
        self.params.iter().position(|p| p.name == name)
    }

    pub fn n_columns(&self) -> usize {
        self.params.iter().map(ParamDef::n_columns).sum()
    }

    pub fn column_names(&self) -> Vec<String> {
        self.params.iter().flat_map(ParamDef::column_names).collect()
    }

    /// Per-column definitions in encoded column order.
    pub fn column_defs(&self) -> Vec<ColumnDef> {
        let mut out = Vec::with_capacity(self.n_columns());
        for (idx, p) in self.params.iter().enumerate() {
            let names = p.column_names();
            let mut names = names.into_iter();
            if p.arity.is_variable() {
                out.push(ColumnDef {
                    name: names.next().expect("length column"),
                    param: idx,
                    role: ColumnRole::Length,
                    kind: ParamKind::Integer,
                    lower: p.arity.min_len() as f64,
                    upper: p.arity.max_len() as f64,
                    log_scale: false,
                    n_choices: 0,
                    hard_lower: Some(1.0),
                    hard_upper: None,
                });
            }
            for (slot, name) in names.enumerate() {
                out.push(ColumnDef {
                    name,
                    param: idx,
                    role: ColumnRole::Value { slot },
                    kind: p.kind,
                    lower: p.lower,
                    upper: p.upper,
                    log_scale: p.log_scale,
                    n_choices: p.choices.len(),
                    hard_lower: p.hard_lower,
                    hard_upper: p.hard_upper,
                });
            }
        }
        out
    }

    pub fn column_def(&self, name: &str) -> Option<ColumnDef> {
        self.column_defs().into_iter().find(|c| c.name == name)
    }
}

/// The three search spaces shipped with the crate, from the initial,
/// intermediate and final tuning phases of a curriculum-RL study.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fixture {
    Initial,
    Intermediate,
    Final,
}

impl Fixture {
    pub const ALL: [Fixture; 3] = [Fixture::Initial, Fixture::Intermediate, Fixture::Final];

    pub fn file_name(self) -> &'static str {
        match self {
            Fixture::Initial => "initial_space.json",
            Fixture::Intermediate => "intermediate_space.json",
            Fixture::Final => "final_space.json",
        }
    }

    pub fn json(self) -> &'static str {
        match self {
            Fixture::Initial => include_str!("../../tables/initial_space.json"),
            Fixture::Intermediate => include_str!("../../tables/intermediate_space.json"),
            Fixture::Final => include_str!("../../tables/final_space.json"),
        }
    }

    pub fn space(self) -> SearchSpace {
        SearchSpace::from_json_str(self.json()).expect("shipped fixture is valid")
    }
}
