//! Interpretability toolkit for hyperparameter optimization studies.
//!
//! The crate ingests trial records ([`study`]), fits a random-forest
//! surrogate of the objective ([`forest`]), attributes its predictions to
//! individual hyperparameters with exact Shapley values ([`shap`]) and turns
//! distributional and attribution statistics into search-bound advice
//! ([`advisor`]). A TPE sampler ([`tpe`]) and synthetic objectives
//! ([`bench`]) let it generate and analyze its own studies end to end.

pub mod advisor;
pub mod bench;
pub mod forest;
pub mod shap;
pub mod study;
pub mod tpe;

pub(crate) mod seeds;

/// Version string echoed into report manifests.
pub const TOOL_VERSION: &str = concat!("hpscope ", env!("CARGO_PKG_VERSION"));

/// Quotes a CSV field when it contains a delimiter or a quote, or spans lines.
pub(crate) fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}
