//! Diagnostic statistics over successful trials and the rules that turn
//! them into search-bound recommendations.
//!
//! Two rule engines exist. [`advise_from_skew`] reads the histogram of a
//! column among filtered trials. [`advise_from_shap`] reads where the
//! column's values sit when their attribution is positive.

pub mod stats;
pub mod surface;

use serde::{Deserialize, Serialize};

use crate::shap::DependenceSeries;
use crate::study::{ColumnDef, ParamKind};

pub use stats::{
    extreme_pairs, histogram, objective_correlation, pearson, pearson_matrix, skewness, CorrelatedPair,
    CorrelationMatrix, ExtremePairs, HistogramStats,
};
pub use surface::{surface_grid, SurfaceGrid};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AdvisorError {
    #[error("column `{0}` has no values")]
    EmptyValues(String),
    #[error("need at least 2 bins, got {0}")]
    TooFewBins(usize),
    #[error("need at least 2 rows, got {0}")]
    TooFewRows(usize),
    #[error("column `{column}`: value {value} lies outside the declared bounds")]
    OutOfBounds { column: String, value: f64 },
    #[error("column `{0}` is categorical")]
    Categorical(String),
    #[error("surface axes must differ, got `{0}` twice")]
    SameColumn(String),
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
}

/// Tunable constants of both rule engines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdvisorThresholds {
    /// `|g1|` above which a histogram counts as skewed.
    pub skew: f64,
    /// KS p-value above which a histogram counts as uniform.
    pub p_uniform: f64,
    /// Fraction of the width added at each end on `expand`.
    pub expand_factor: f64,
    /// Fraction of the width moved on `shift_*`, or removed at each end on
    /// `contract`.
    pub shift_factor: f64,
    /// Share of positive-impact points in one third needed to fix a value.
    pub fix_fraction: f64,
    /// Largest interquartile range, relative to the width, that still
    /// counts as a single value.
    pub fix_spread: f64,
    /// Share of positive-impact points in one third needed to shift or
    /// contract.
    pub concentration: f64,
    pub n_bins: usize,
    pub resolution: usize,
}

impl Default for AdvisorThresholds {
    fn default() -> Self {
        Self {
            skew: 0.5,
            p_uniform: 0.05,
            expand_factor: 0.25,
            shift_factor: 0.25,
            fix_fraction: 0.9,
            fix_spread: 0.05,
            concentration: 0.6,
            n_bins: 20,
            resolution: 25,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    ShiftUp,
    ShiftDown,
    Expand,
    Contract,
    FixValue,
    Keep,
}

impl Action {
    pub fn as_str(self) -> &'static str {
        match self {
            Action::ShiftUp => "shift_up",
            Action::ShiftDown => "shift_down",
            Action::Expand => "expand",
            Action::Contract => "contract",
            Action::FixValue => "fix_value",
            Action::Keep => "keep",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvidenceSource {
    Histogram,
    Shap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evidence {
    pub statistic: String,
    pub value: f64,
    pub rule: String,
}

impl Evidence {
    fn new(statistic: &str, value: f64, rule: &str) -> Self {
        Self {
            statistic: statistic.to_string(),
            value,
            rule: rule.to_string(),
        }
    }
}

/// Suggested search range on the raw (unencoded) scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suggested {
    Bounds { lower: f64, upper: f64 },
    Fixed { value: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundRecommendation {
    /// Encoded column the advice is about.
    pub param: String,
    pub source: EvidenceSource,
    pub action: Action,
    pub evidence: Vec<Evidence>,
    pub suggested: Suggested,
}

impl BoundRecommendation {
    /// One line of the text report.
    pub fn render(&self) -> String {
        let target = match &self.suggested {
            Suggested::Bounds { lower, upper } => format!("[{}, {}]", num(*lower), num(*upper)),
            Suggested::Fixed { value } => format!("= {}", num(*value)),
        };
        let why: Vec<String> = self
            .evidence
            .iter()
            .map(|e| match e.rule.as_str() {
                "" => format!("{}={}", e.statistic, num(e.value)),
                rule => format!("{}={} ({rule})", e.statistic, num(e.value)),
            })
            .collect();
        let source = match self.source {
            EvidenceSource::Histogram => "histogram",
            EvidenceSource::Shap => "shap",
        };
        format!(
            "{:<24} {:<10} {:<10} {target:<26} {}",
            self.param,
            source,
            self.action.as_str(),
            why.join("; ")
        )
    }
}

/// Four significant digits, switching to scientific notation for very
/// small or large magnitudes.
fn num(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || (1e-3..1e6).contains(&a) {
        let s = format!("{v:.4}");
        let s = s.trim_end_matches('0').trim_end_matches('.');
        if s == "-0" {
            "0".into()
        } else {
            s.to_string()
        }
    } else {
        format!("{v:.3e}")
    }
}

/// Plain-text report, one recommendation per line.
pub fn render_text(recs: &[BoundRecommendation]) -> String {
    let mut out = format!(
        "{:<24} {:<10} {:<10} {:<26} evidence\n",
        "column", "source", "action", "suggested"
    );
    for r in recs {
        out.push_str(&r.render());
        out.push('\n');
    }
    out
}

/// Moves encoded bounds back to the raw scale, clamps them to the hard
/// limits and rounds integer bounds outward.
fn finish_bounds(col: &ColumnDef, lo: f64, hi: f64, evidence: &mut Vec<Evidence>) -> Suggested {
    let mut lower = col.from_encoded(lo);
    let mut upper = col.from_encoded(hi);
    if let Some(h) = col.hard_lower {
        if lower < h {
            lower = h;
            evidence.push(Evidence::new("hard_lower", h, "clamped to hard limit"));
        }
    }
    if let Some(h) = col.hard_upper {
        if upper > h {
            upper = h;
            evidence.push(Evidence::new("hard_upper", h, "clamped to hard limit"));
        }
    }
    if col.kind == ParamKind::Integer {
        lower = lower.floor();
        upper = upper.ceil();
    }
    if lower >= upper {
        evidence.push(Evidence::new(
            "collapsed_width",
            upper - lower,
            "clamping left no range; current bounds kept",
        ));
        lower = col.lower;
        upper = col.upper;
    }
    Suggested::Bounds { lower, upper }
}

fn current_bounds(col: &ColumnDef) -> Suggested {
    Suggested::Bounds {
        lower: col.lower,
        upper: col.upper,
    }
}

fn categorical_keep(col: &ColumnDef, source: EvidenceSource) -> BoundRecommendation {
    BoundRecommendation {
        param: col.name.clone(),
        source,
        action: Action::Keep,
        evidence: vec![Evidence::new(
            "n_choices",
            col.n_choices as f64,
            "categorical columns have no numeric bounds",
        )],
        suggested: Suggested::Bounds {
            lower: 0.0,
            upper: col.n_choices.saturating_sub(1) as f64,
        },
    }
}

/// Histogram rule, first match wins: uniform → expand, negative skew →
/// shift up, positive skew → shift down, otherwise keep.
pub fn advise_from_skew(h: &HistogramStats, col: &ColumnDef, t: &AdvisorThresholds) -> BoundRecommendation {
    if col.kind == ParamKind::Categorical {
        return categorical_keep(col, EvidenceSource::Histogram);
    }
    let lo = col.encoded_lower();
    let hi = col.encoded_upper();
    let w = hi - lo;
    let mut evidence = vec![
        Evidence::new("uniform_p", h.uniform_p, ""),
        Evidence::new("skew", h.skew, ""),
    ];
    let (action, rule, bounds) = if h.uniform_p > t.p_uniform {
        let d = t.expand_factor * w;
        (Action::Expand, "uniform_p above threshold", Some((lo - d, hi + d)))
    } else if h.skew < -t.skew {
        let d = t.shift_factor * w;
        (Action::ShiftUp, "skew below negative threshold", Some((lo + d, hi + d)))
    } else if h.skew > t.skew {
        let d = t.shift_factor * w;
        (
            Action::ShiftDown,
            "skew above positive threshold",
            Some((lo - d, hi - d)),
        )
    } else {
        (Action::Keep, "no rule fired", None)
    };
    let fired = if matches!(action, Action::Expand) { 0 } else { 1 };
    evidence[fired].rule = rule.to_string();
    if action == Action::Keep {
        evidence.iter_mut().for_each(|e| e.rule = rule.to_string());
    }
    let suggested = match bounds {
        Some((l, u)) => finish_bounds(col, l, u, &mut evidence),
        None => current_bounds(col),
    };
    BoundRecommendation {
        param: col.name.clone(),
        source: EvidenceSource::Histogram,
        action,
        evidence,
        suggested,
    }
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    if i + 1 < sorted.len() {
        sorted[i] + frac * (sorted[i + 1] - sorted[i])
    } else {
        sorted[i]
    }
}

/// Attribution rule. Takes the feature values of points with positive
/// attribution and locates them in thirds of the declared range.
///
/// A tight cluster holding at least `fix_fraction` of them fixes the
/// value at their median. Otherwise a third holding at least
/// `concentration` of them shifts the bounds toward it, or contracts them
/// when it is the middle third.
pub fn advise_from_shap(d: &DependenceSeries, col: &ColumnDef, t: &AdvisorThresholds) -> BoundRecommendation {
    if col.kind == ParamKind::Categorical {
        return categorical_keep(col, EvidenceSource::Shap);
    }
    let lo = col.encoded_lower();
    let hi = col.encoded_upper();
    let w = hi - lo;
    let mut positive: Vec<f64> = d.points.iter().filter(|p| p.1 > 0.0).map(|p| p.0).collect();
    if positive.is_empty() {
        return BoundRecommendation {
            param: col.name.clone(),
            source: EvidenceSource::Shap,
            action: Action::Keep,
            evidence: vec![Evidence::new("positive_points", 0.0, "no positive-impact observations")],
            suggested: current_bounds(col),
        };
    }
    positive.sort_by(f64::total_cmp);
    let n = positive.len() as f64;
    let mut thirds = [0usize; 3];
    for &v in &positive {
        let k = ((3.0 * (v - lo) / w).floor().max(0.0) as usize).min(2);
        thirds[k] += 1;
    }
    let fractions = thirds.map(|c| c as f64 / n);
    let modal = (0..3).fold(0, |m, k| if fractions[k] > fractions[m] { k } else { m });
    let concentration = fractions[modal];
    let spread = (quantile(&positive, 0.75) - quantile(&positive, 0.25)) / w;
    let median = quantile(&positive, 0.5);

    let mut evidence = vec![
        Evidence::new("positive_points", n, ""),
        Evidence::new("fraction_lower_third", fractions[0], ""),
        Evidence::new("fraction_middle_third", fractions[1], ""),
        Evidence::new("fraction_upper_third", fractions[2], ""),
        Evidence::new("concentration", concentration, ""),
        Evidence::new("relative_iqr", spread, ""),
    ];
    let mut fire = |idx: usize, rule: &str| evidence[idx].rule = rule.to_string();

    let (action, bounds) = if concentration >= t.fix_fraction && spread <= t.fix_spread {
        fire(4, "concentration at or above fix threshold");
        fire(5, "spread at or below fix threshold");
        (Action::FixValue, None)
    } else if concentration >= t.concentration {
        let dshift = t.shift_factor * w;
        match modal {
            2 => {
                fire(3, "positive impact concentrated in upper third");
                (Action::ShiftUp, Some((lo + dshift, hi + dshift)))
            }
            0 => {
                fire(1, "positive impact concentrated in lower third");
                (Action::ShiftDown, Some((lo - dshift, hi - dshift)))
            }
            _ => {
                fire(2, "positive impact concentrated in middle third");
                (Action::Contract, Some((lo + dshift, hi - dshift)))
            }
        }
    } else {
        fire(4, "no third dominates");
        (Action::Keep, None)
    };

    let suggested = match (action, bounds) {
        (Action::FixValue, _) => {
            let mut value = col.from_encoded(median);
            if col.kind == ParamKind::Integer {
                value = value.round();
            }
            Suggested::Fixed { value }
        }
        (_, Some((l, u))) => finish_bounds(col, l, u, &mut evidence),
        (_, None) => current_bounds(col),
    };
    BoundRecommendation {
        param: col.name.clone(),
        source: EvidenceSource::Shap,
        action,
        evidence,
        suggested,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::study::{ParamDef, SearchSpace};

    fn col(def: ParamDef) -> ColumnDef {
        SearchSpace::new(vec![def]).unwrap().column_defs().remove(0)
    }

    fn hist(skew: f64, uniform_p: f64) -> HistogramStats {
        HistogramStats {
            column: "u".into(),
            edges: vec![0.0, 1.0],
            counts: vec![1],
            n: 1,
            skew,
            ks_statistic: 0.0,
            uniform_p,
        }
    }

    fn series(points: &[(f64, f64)]) -> DependenceSeries {
        DependenceSeries {
            feature: "u".into(),
            interaction: "u".into(),
            points: points.iter().map(|&(v, s)| (v, s, v)).collect(),
        }
    }

    #[test]
    fn skew_rules_in_order() {
        let c = col(ParamDef::continuous("u", 0.0, 1.0));
        let t = AdvisorThresholds::default();
        let r = advise_from_skew(&hist(-2.0, 0.5), &c, &t);
        assert_eq!(r.action, Action::Expand);
        assert_eq!(
            r.suggested,
            Suggested::Bounds {
                lower: -0.25,
                upper: 1.25
            }
        );
        assert_eq!(advise_from_skew(&hist(-0.8, 0.01), &c, &t).action, Action::ShiftUp);
        assert_eq!(advise_from_skew(&hist(0.8, 0.01), &c, &t).action, Action::ShiftDown);
        assert_eq!(advise_from_skew(&hist(0.1, 0.01), &c, &t).action, Action::Keep);
    }

    #[test]
    fn hard_limits_and_integer_rounding() {
        let t = AdvisorThresholds::default();
        let q = col(ParamDef::continuous("q", 0.8, 0.99).with_hard_limits(Some(0.0), Some(1.0)));
        let r = advise_from_skew(&hist(-1.0, 0.0), &q, &t);
        let Suggested::Bounds { lower, upper } = r.suggested else {
            panic!()
        };
        assert!((lower - 0.8475).abs() < 1e-12);
        assert_eq!(upper, 1.0);
        assert!(r.evidence.iter().any(|e| e.statistic == "hard_upper"));

        let k = col(ParamDef::integer("k", 1.0, 8.0).with_hard_limits(Some(1.0), None));
        let r = advise_from_skew(&hist(0.0, 0.9), &k, &t);
        assert_eq!(
            r.suggested,
            Suggested::Bounds {
                lower: 1.0,
                upper: 10.0
            }
        );
    }

    #[test]
    fn log_scale_bounds_move_in_log_space() {
        let t = AdvisorThresholds::default();
        let lr = col(ParamDef::continuous("lr", 1e-4, 1e-2).with_log_scale());
        let r = advise_from_skew(&hist(-1.0, 0.0), &lr, &t);
        let Suggested::Bounds { lower, upper } = r.suggested else {
            panic!()
        };
        assert!((lower.log10() + 3.5).abs() < 1e-9);
        assert!((upper.log10() + 1.5).abs() < 1e-9);
    }

    #[test]
    fn shap_thirds() {
        let c = col(ParamDef::continuous("u", 0.0, 1.0));
        let t = AdvisorThresholds::default();
        let top = series(&[(0.8, 0.1), (0.9, 0.2), (0.95, 0.1), (0.1, -0.3)]);
        assert_eq!(advise_from_shap(&top, &c, &t).action, Action::ShiftUp);
        let bottom = series(&[(0.1, 0.1), (0.2, 0.2), (0.05, 0.1), (0.9, -0.3)]);
        assert_eq!(advise_from_shap(&bottom, &c, &t).action, Action::ShiftDown);
        let mid = series(&[(0.4, 0.1), (0.5, 0.2), (0.6, 0.1), (0.35, 0.1)]);
        let r = advise_from_shap(&mid, &c, &t);
        assert_eq!(r.action, Action::Contract);
        assert_eq!(
            r.suggested,
            Suggested::Bounds {
                lower: 0.25,
                upper: 0.75
            }
        );
        let spread = series(&[(0.1, 0.1), (0.5, 0.2), (0.9, 0.1)]);
        assert_eq!(advise_from_shap(&spread, &c, &t).action, Action::Keep);
    }

    #[test]
    fn shap_fix_and_empty() {
        let c = col(ParamDef::continuous("u", 0.0, 1.0));
        let t = AdvisorThresholds::default();
        let mut pts = vec![(0.7, 0.2); 49];
        pts.push((0.1, 0.05));
        let r = advise_from_shap(&series(&pts), &c, &t);
        assert_eq!(r.action, Action::FixValue);
        assert_eq!(r.suggested, Suggested::Fixed { value: 0.7 });
        let r = advise_from_shap(&series(&[(0.5, -0.1)]), &c, &t);
        assert_eq!(r.action, Action::Keep);
        assert_eq!(r.evidence[0].rule, "no positive-impact observations");
    }

    #[test]
    fn categorical_is_kept() {
        let c = col(ParamDef::categorical("c", ["a", "b"]));
        let r = advise_from_skew(&hist(3.0, 0.0), &c, &AdvisorThresholds::default());
        assert_eq!(r.action, Action::Keep);
    }

    #[test]
    fn text_report_has_one_line_per_recommendation() {
        let c = col(ParamDef::continuous("u", 0.0, 1.0));
        let t = AdvisorThresholds::default();
        let recs = vec![
            advise_from_skew(&hist(0.0, 0.9), &c, &t),
            advise_from_skew(&hist(0.0, 0.0), &c, &t),
        ];
        let text = render_text(&recs);
        assert_eq!(text.lines().count(), 3);
        assert!(text.contains("expand"));
    }
}
