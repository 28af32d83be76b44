//! Search spaces, trial corpora and their numeric encoding.
//!
//! Objectives are always "higher is better" in `[0, 1]` (goal coverage).
//! Studies recorded as losses can be flipped at ingest with
//! [`ObjectiveSense::Minimize`].

mod space;
mod value;

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

pub use space::{Arity, ColumnDef, ColumnRole, Fixture, ParamDef, ParamKind, SearchSpace};
pub use value::{Config, ParamValue, Scalar};

/// Objective threshold used for the histogram views.
pub const HISTOGRAM_FILTER_THRESHOLD: f64 = 0.7;
/// Objective threshold used for correlation matrices and surfaces.
pub const CORRELATION_FILTER_THRESHOLD: f64 = 0.8;
/// Both standard filter levels, loosest first.
pub const FILTER_THRESHOLDS: [f64; 2] = [HISTOGRAM_FILTER_THRESHOLD, CORRELATION_FILTER_THRESHOLD];

/// Tag key recording how many raw trials an aggregated trial stands for.
pub const GROUP_SIZE_TAG: &str = "group_size";

#[derive(Debug, thiserror::Error)]
pub enum StudyError {
    #[error("invalid search space: parameter `{param}`: {reason}")]
    InvalidSpace { param: String, reason: String },
    #[error("malformed search space file: {0}")]
    SpaceFormat(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("trial `{trial_id}`: field `{field}`: {reason}")]
    Validation {
        trial_id: String,
        field: String,
        reason: String,
    },
    #[error("coverage of an empty evaluation set is undefined")]
    EmptyCoverage,
    #[error("study has no trials")]
    EmptyStudy,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One observed (configuration, objective) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial_id: String,
    #[serde(rename = "params")]
    pub config: Config,
    pub objective: f64,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub tags: BTreeMap<String, serde_json::Value>,
}

impl TrialRecord {
    pub fn new(trial_id: impl Into<String>, config: Config, objective: f64) -> Self {
        Self {
            trial_id: trial_id.into(),
            config,
            objective,
            tags: BTreeMap::new(),
        }
    }

    /// Number of raw trials this record aggregates (1 unless tagged).
    pub fn group_size(&self) -> usize {
        self.tags
            .get(GROUP_SIZE_TAG)
            .and_then(serde_json::Value::as_u64)
            .map_or(1, |n| n as usize)
    }
}

/// Whether the objective in a trial file is to be maximized or minimized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ObjectiveSense {
    #[default]
    Maximize,
    /// Stored objectives are losses in `[0, 1]`; they are flipped to
    /// `1 - loss` at ingest.
    Minimize,
}

/// A search space together with the trials observed in it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Study {
    pub space: SearchSpace,
    pub trials: Vec<TrialRecord>,
}

impl Study {
    /// Builds a study, validating every trial against the space.
    pub fn new(space: SearchSpace, trials: Vec<TrialRecord>) -> Result<Self, StudyError> {
        space.validate()?;
        for t in &trials {
            validate_trial(&space, t)?;
        }
        Ok(Self { space, trials })
    }

    pub fn len(&self) -> usize {
        self.trials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trials.is_empty()
    }

    pub fn objectives(&self) -> Vec<f64> {
        self.trials.iter().map(|t| t.objective).collect()
    }

    pub fn best(&self) -> Option<&TrialRecord> {
        self.trials
            .iter()
            .fold(None, |best: Option<&TrialRecord>, t| match best {
                Some(b) if b.objective >= t.objective => Some(b),
                _ => Some(t),
            })
    }

    /// Encoded row for one trial. The trial must belong to this study.
    pub fn encode_trial(&self, trial: &TrialRecord) -> Vec<f64> {
        encode_config(&self.space, &trial.trial_id, &trial.config).expect("trial was validated against the space")
    }

    /// Writes the trials as JSON lines.
    pub fn write_jsonl(&self, mut out: impl Write) -> Result<(), StudyError> {
        for t in &self.trials {
            serde_json::to_writer(&mut out, t).map_err(std::io::Error::from)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

fn validate_trial(space: &SearchSpace, t: &TrialRecord) -> Result<(), StudyError> {
    let invalid = |field: &str, reason: String| StudyError::Validation {
        trial_id: t.trial_id.clone(),
        field: field.to_string(),
        reason,
    };
    if !t.objective.is_finite() {
        return Err(invalid("objective", format!("non-finite objective {}", t.objective)));
    }
    if !(0.0..=1.0).contains(&t.objective) {
        return Err(invalid(
            "objective",
            format!("objective {} is outside [0, 1]", t.objective),
        ));
    }
    encode_config(space, &t.trial_id, &t.config).map(|_| ())
}

/// Encodes a configuration into one row over `space.column_names()`.
pub fn encode_config(space: &SearchSpace, trial_id: &str, config: &Config) -> Result<Vec<f64>, StudyError> {
    let invalid = |field: &str, reason: String| StudyError::Validation {
        trial_id: trial_id.to_string(),
        field: field.to_string(),
        reason,
    };
    if let Some(unknown) = config.keys().find(|k| space.param(k).is_none()) {
        return Err(invalid(unknown, "unknown parameter".into()));
    }
    let mut row = Vec::with_capacity(space.n_columns());
    for p in &space.params {
        let value = config
            .get(&p.name)
            .ok_or_else(|| invalid(&p.name, "missing parameter".into()))?;
        let cols = p.encode_value(value).map_err(|r| invalid(&p.name, r))?;
        row.extend(cols);
    }
    Ok(row)
}

/// Decodes an encoded row back into a configuration.
pub fn decode_row(space: &SearchSpace, row: &[f64]) -> Config {
    let mut config = Config::new();
    let mut offset = 0;
    for p in &space.params {
        let n = p.n_columns();
        config.insert(p.name.clone(), p.decode_value(&row[offset..offset + n]));
        offset += n;
    }
    config
}

/// Reads a JSON-lines trial file. Blank lines are skipped.
pub fn parse_study(stream: impl BufRead, space: SearchSpace) -> Result<Study, StudyError> {
    parse_study_with(stream, space, ObjectiveSense::Maximize)
}

pub fn parse_study_with(stream: impl BufRead, space: SearchSpace, sense: ObjectiveSense) -> Result<Study, StudyError> {
    space.validate()?;
    let mut trials = Vec::new();
    for (idx, line) in stream.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut trial: TrialRecord = serde_json::from_str(&line).map_err(|e| StudyError::Parse {
            line: idx + 1,
            message: e.to_string(),
        })?;
        validate_trial(&space, &trial)?;
        if sense == ObjectiveSense::Minimize {
            trial.objective = 1.0 - trial.objective;
        }
        trials.push(trial);
    }
    Ok(Study { space, trials })
}

/// Fraction of successful evaluations.
pub fn coverage(success_flags: &[bool]) -> Result<f64, StudyError> {
    if success_flags.is_empty() {
        return Err(StudyError::EmptyCoverage);
    }
    let hits = success_flags.iter().filter(|&&s| s).count();
    Ok(hits as f64 / success_flags.len() as f64)
}

/// Merges trials whose encoded configurations are identical.
///
/// The merged objective is the group-size-weighted mean, the merged trial
/// keeps the id and tags of the first occurrence plus a `group_size` tag,
/// and output order follows first occurrence. Singletons pass through
/// untouched, so the operation is idempotent.
pub fn aggregate_duplicates(study: &Study) -> Study {
    let mut index: HashMap<Vec<u64>, usize> = HashMap::new();
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for (i, t) in study.trials.iter().enumerate() {
        let key: Vec<u64> = study
            .encode_trial(t)
            .into_iter()
            // -0.0 and 0.0 encode the same configuration.
            .map(|v| if v == 0.0 { 0u64 } else { v.to_bits() })
            .collect();
        match index.get(&key) {
            Some(&g) => groups[g].push(i),
            None => {
                index.insert(key, groups.len());
                groups.push(vec![i]);
            }
        }
    }

    let trials = groups
        .into_iter()
        .map(|members| {
            let first = &study.trials[members[0]];
            if members.len() == 1 {
                return first.clone();
            }
            let (mut total, mut weighted) = (0usize, 0.0);
            for &m in &members {
                let t = &study.trials[m];
                let size = t.group_size();
                total += size;
                weighted += size as f64 * t.objective;
            }
            let mut merged = first.clone();
            merged.objective = weighted / total as f64;
            merged
                .tags
                .insert(GROUP_SIZE_TAG.to_string(), serde_json::Value::from(total));
            merged
        })
        .collect();

    Study {
        space: study.space.clone(),
        trials,
    }
}

/// Trials whose objective is strictly greater than `threshold`.
pub fn filter_by_objective(study: &Study, threshold: f64) -> Study {
    Study {
        space: study.space.clone(),
        trials: study
            .trials
            .iter()
            .filter(|t| t.objective > threshold)
            .cloned()
            .collect(),
    }
}

/// Numeric design matrix of a study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodedMatrix {
    pub columns: Vec<String>,
    /// Row-major `n x p` values.
    pub x: Vec<Vec<f64>>,
    pub y: Vec<f64>,
    pub trial_ids: Vec<String>,
}

impl EncodedMatrix {
    pub fn n_rows(&self) -> usize {
        self.x.len()
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.x.iter().map(|r| r[j]).collect()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn select_rows(&self, rows: &[usize]) -> EncodedMatrix {
        EncodedMatrix {
            columns: self.columns.clone(),
            x: rows.iter().map(|&i| self.x[i].clone()).collect(),
            y: rows.iter().map(|&i| self.y[i]).collect(),
            trial_ids: rows.iter().map(|&i| self.trial_ids[i].clone()).collect(),
        }
    }

    /// CSV with a `trial_id` column, the encoded columns and `objective`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("trial_id");
        for c in &self.columns {
            out.push(',');
            out.push_str(&crate::csv_field(c));
        }
        out.push_str(",objective\n");
        for ((id, row), y) in self.trial_ids.iter().zip(&self.x).zip(&self.y) {
            out.push_str(&crate::csv_field(id));
            for v in row {
                out.push(',');
                out.push_str(&v.to_string());
            }
            out.push(',');
            out.push_str(&y.to_string());
            out.push('\n');
        }
        out
    }
}

/// Encodes every trial of a non-empty study.
pub fn encode(study: &Study) -> Result<EncodedMatrix, StudyError> {
    if study.is_empty() {
        return Err(StudyError::EmptyStudy);
    }
    Ok(EncodedMatrix {
        columns: study.space.column_names(),
        x: study.trials.iter().map(|t| study.encode_trial(t)).collect(),
        y: study.objectives(),
        trial_ids: study.trials.iter().map(|t| t.trial_id.clone()).collect(),
    })
}
