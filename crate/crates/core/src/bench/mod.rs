//! Synthetic objectives with planted structure, study simulation and the
//! end-to-end analysis pipeline that writes report bundles.

mod pipeline;
pub mod svg;
mod synthetic;

pub use pipeline::{
    analyze, file_stem, render_svgs, run_analyze, sha256_hex, write_bundle, Analysis, AnalyzeOptions, DependenceEntry,
    Formats, Manifest, ManifestEntry, PlotBundle, ReportBundle, SurrogateReport,
};
pub use synthetic::{eval_synthetic, simulate_study, Effect, Interaction, Sampler, Shape, SyntheticSpec, PRESETS};

use crate::advisor::AdvisorError;
use crate::forest::ForestError;
use crate::shap::ShapError;
use crate::study::StudyError;
use crate::tpe::TpeError;

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error(transparent)]
    Study(#[from] StudyError),
    #[error(transparent)]
    Tpe(#[from] TpeError),
    #[error(transparent)]
    Forest(#[from] ForestError),
    #[error(transparent)]
    Shap(#[from] ShapError),
    #[error(transparent)]
    Advisor(#[from] AdvisorError),
    #[error("invalid synthetic spec or options: {0}")]
    Spec(String),
    #[error(
        "only {remaining} trials score above {threshold}, need at least {min_trials}; \
         lower the filter threshold or run more trials"
    )]
    InsufficientData {
        remaining: usize,
        threshold: f64,
        min_trials: usize,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
