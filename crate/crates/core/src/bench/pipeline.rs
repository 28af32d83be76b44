use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{svg, BenchError};
use crate::advisor::{
    advise_from_shap, advise_from_skew, extreme_pairs, histogram, objective_correlation, pearson_matrix, render_text,
    surface_grid, AdvisorThresholds, BoundRecommendation, CorrelationMatrix, ExtremePairs, HistogramStats, SurfaceGrid,
};
use crate::forest::{fit_matrix, mse, r_squared, train_test_split, ForestParams, RegressionForest};
use crate::seeds;
use crate::shap::{dependence_series, explain_all, rank_features, select_interaction, DependenceSeries, ShapMatrix};
use crate::study::{
    aggregate_duplicates, encode, filter_by_objective, ColumnDef, ColumnRole, EncodedMatrix, Study,
    CORRELATION_FILTER_THRESHOLD,
};
use crate::TOOL_VERSION;

/// Which artifact formats a bundle contains. The manifest, the summary and
/// the text recommendations are always written.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Formats {
    pub csv: bool,
    pub json: bool,
    pub svg: bool,
}

impl Default for Formats {
    fn default() -> Self {
        Self {
            csv: true,
            json: true,
            svg: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnalyzeOptions {
    /// Trials must score strictly above this to count as successful.
    pub filter_threshold: f64,
    /// Fewest successful trials the analysis accepts.
    pub min_trials: usize,
    pub test_fraction: f64,
    pub forest: ForestParams,
    pub thresholds: AdvisorThresholds,
    /// Extreme pairs reported per sign.
    pub top_pairs: usize,
    /// Seed of the train/test split.
    pub seed: u64,
    pub formats: Formats,
}

impl Default for AnalyzeOptions {
    fn default() -> Self {
        Self {
            filter_threshold: CORRELATION_FILTER_THRESHOLD,
            min_trials: 50,
            test_fraction: 0.2,
            forest: ForestParams::default(),
            thresholds: AdvisorThresholds::default(),
            top_pairs: 2,
            seed: 0,
            formats: Formats::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateReport {
    pub n_train: usize,
    pub n_test: usize,
    pub test_mse: f64,
    /// `None` when the test targets have no variance.
    pub test_r2: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DependenceEntry {
    pub series: DependenceSeries,
    /// Correlation with the partner among successful trials; `None` when
    /// no partner could be chosen and the feature colours itself.
    pub partner_r: Option<f64>,
    pub low_confidence: bool,
}

/// Everything the pipeline computes, before it is written to disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Analysis {
    pub n_trials: usize,
    pub n_aggregated: usize,
    pub n_filtered: usize,
    pub filter_threshold: f64,
    pub surrogate: SurrogateReport,
    pub forest: RegressionForest,
    pub shap: ShapMatrix,
    pub ranking: Vec<(String, f64)>,
    pub dependence: Vec<DependenceEntry>,
    pub histograms: Vec<HistogramStats>,
    pub correlation_filtered: CorrelationMatrix,
    pub correlation_all: CorrelationMatrix,
    pub objective_correlation: Vec<(String, Option<f64>)>,
    pub extreme_pairs: ExtremePairs,
    pub surfaces: Vec<SurfaceGrid>,
    pub recommendations: Vec<BoundRecommendation>,
}

/// Rows in which column `j` carries a real value. Slots of a
/// variable-length parameter beyond the trial's length hold filler.
fn active_rows(defs: &[ColumnDef], m: &EncodedMatrix, j: usize) -> Vec<bool> {
    let col = &defs[j];
    let ColumnRole::Value { slot } = col.role else {
        return vec![true; m.n_rows()];
    };
    match defs
        .iter()
        .position(|d| d.param == col.param && d.role == ColumnRole::Length)
    {
        Some(len_col) => m.x.iter().map(|r| r[len_col] as usize > slot).collect(),
        None => vec![true; m.n_rows()],
    }
}

fn masked(values: Vec<f64>, mask: &[bool]) -> Vec<f64> {
    values
        .into_iter()
        .zip(mask)
        .filter(|(_, &k)| k)
        .map(|(v, _)| v)
        .collect()
}

/// Runs the whole analysis in memory.
///
/// The surrogate is fit on all aggregated trials so it sees the full
/// objective range; histograms, input correlations and interaction
/// partners use the successful trials only.
pub fn analyze(study: &Study, opts: &AnalyzeOptions) -> Result<Analysis, BenchError> {
    if study.is_empty() {
        return Err(BenchError::Study(crate::study::StudyError::EmptyStudy));
    }
    if opts.min_trials < 2 {
        return Err(BenchError::Spec("min_trials must be at least 2".into()));
    }
    let aggregated = aggregate_duplicates(study);
    let filtered = filter_by_objective(&aggregated, opts.filter_threshold);
    if filtered.len() < opts.min_trials {
        return Err(BenchError::InsufficientData {
            remaining: filtered.len(),
            threshold: opts.filter_threshold,
            min_trials: opts.min_trials,
        });
    }
    let defs = study.space.column_defs();
    let all = encode(&aggregated)?;
    let good = encode(&filtered)?;

    let mut split_rng = seeds::rng(seeds::derive(opts.seed, 0));
    let (train, test) = train_test_split(&all, opts.test_fraction, &mut split_rng)?;
    let forest = fit_matrix(&train, &opts.forest)?;
    let predictions = forest.predict_rows(&test.x)?;
    let test_mse = mse(&predictions, &test.y)?;
    let r2 = r_squared(&predictions, &test.y)?;
    let surrogate = SurrogateReport {
        n_train: train.n_rows(),
        n_test: test.n_rows(),
        test_mse,
        test_r2: r2.is_finite().then_some(r2),
    };

    let shap = explain_all(&forest, &all.x, Some(&all.trial_ids))?;
    let ranking = rank_features(&shap)?;

    let mut dependence = Vec::with_capacity(defs.len());
    for (name, _) in &ranking {
        let j = all.column_index(name).expect("ranked column exists");
        let (partner, partner_r, low_confidence) = match select_interaction(&good.x, &good.columns, name) {
            Ok(choice) => (choice.column, Some(choice.r), choice.low_confidence),
            Err(_) => (name.clone(), None, true),
        };
        let mut series = dependence_series(&shap, name, &partner)?;
        let mask = active_rows(&defs, &all, j);
        series.points = series
            .points
            .into_iter()
            .zip(&mask)
            .filter(|(_, &k)| k)
            .map(|(p, _)| p)
            .collect();
        dependence.push(DependenceEntry {
            series,
            partner_r,
            low_confidence,
        });
    }

    let mut histograms = Vec::with_capacity(defs.len());
    let mut recommendations = Vec::with_capacity(2 * defs.len());
    for (j, col) in defs.iter().enumerate() {
        let values = masked(good.column(j), &active_rows(&defs, &good, j));
        if values.is_empty() {
            continue;
        }
        let h = histogram(&values, col, opts.thresholds.n_bins)?;
        recommendations.push(advise_from_skew(&h, col, &opts.thresholds));
        histograms.push(h);
        let entry = dependence
            .iter()
            .find(|d| d.series.feature == col.name)
            .expect("every column has a dependence series");
        recommendations.push(advise_from_shap(&entry.series, col, &opts.thresholds));
    }

    let correlation_filtered = pearson_matrix(&good.x, &good.columns)?;
    let correlation_all = pearson_matrix(&all.x, &all.columns)?;
    let objective_correlation = all
        .columns
        .iter()
        .cloned()
        .zip(objective_correlation(&all.x, &all.y)?)
        .collect();
    let pairs = extreme_pairs(&correlation_filtered, opts.top_pairs);

    let mut surfaces: Vec<SurfaceGrid> = Vec::new();
    for pair in pairs.positive.iter().chain(&pairs.negative) {
        let (Some(a), Some(b)) = (
            defs.iter().find(|d| d.name == pair.a),
            defs.iter().find(|d| d.name == pair.b),
        ) else {
            continue;
        };
        if surfaces.iter().any(|s| s.x_param == a.name && s.y_param == b.name) {
            continue;
        }
        if let Ok(g) = surface_grid(&all, a, b, opts.thresholds.resolution) {
            surfaces.push(g);
        }
    }

    Ok(Analysis {
        n_trials: study.len(),
        n_aggregated: aggregated.len(),
        n_filtered: filtered.len(),
        filter_threshold: opts.filter_threshold,
        surrogate,
        forest,
        shap,
        ranking,
        dependence,
        histograms,
        correlation_filtered,
        correlation_all,
        objective_correlation,
        extreme_pairs: pairs,
        surfaces,
        recommendations,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: usize,
}

/// Index of a written bundle. Lists every other file with its hash.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool_version: String,
    pub input_sha256: String,
    pub options: AnalyzeOptions,
    pub files: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn entry(&self, path: &str) -> Option<&ManifestEntry> {
        self.files.iter().find(|f| f.path == path)
    }
}

/// A written bundle and the analysis it came from.
#[derive(Debug, Clone)]
pub struct ReportBundle {
    pub analysis: Analysis,
    pub manifest: Manifest,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// File-name safe form of a column name.
pub fn file_stem(name: &str) -> String {
    name.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.') {
                c
            } else {
                '_'
            }
        })
        .collect()
}

struct Writer<'a> {
    root: &'a Path,
    files: Vec<ManifestEntry>,
}

impl Writer<'_> {
    fn put(&mut self, rel: &str, content: &[u8]) -> Result<(), BenchError> {
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, content)?;
        self.files.push(ManifestEntry {
            path: rel.to_string(),
            sha256: sha256_hex(content),
            bytes: content.len(),
        });
        Ok(())
    }

    fn json<T: Serialize>(&mut self, rel: &str, value: &T) -> Result<(), BenchError> {
        let mut s = serde_json::to_string_pretty(value)?;
        s.push('\n');
        self.put(rel, s.as_bytes())
    }
}

#[derive(Serialize)]
struct Summary<'a> {
    n_trials: usize,
    n_aggregated: usize,
    n_filtered: usize,
    filter_threshold: f64,
    surrogate: &'a SurrogateReport,
    ranking: &'a [(String, f64)],
    interactions: Vec<(&'a str, &'a str, Option<f64>, bool)>,
    objective_correlation: &'a [(String, Option<f64>)],
    extreme_pairs: &'a ExtremePairs,
}

/// Data behind every figure of a bundle, written as `plots.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotBundle {
    pub filter_threshold: f64,
    pub histograms: Vec<HistogramStats>,
    pub correlation_filtered: CorrelationMatrix,
    pub correlation_all: CorrelationMatrix,
    pub extreme_pairs: ExtremePairs,
    pub surfaces: Vec<SurfaceGrid>,
    pub dependence: Vec<DependenceEntry>,
    pub ranking: Vec<(String, f64)>,
    pub shap: ShapMatrix,
}

impl PlotBundle {
    pub fn from_analysis(a: &Analysis) -> Self {
        Self {
            filter_threshold: a.filter_threshold,
            histograms: a.histograms.clone(),
            correlation_filtered: a.correlation_filtered.clone(),
            correlation_all: a.correlation_all.clone(),
            extreme_pairs: a.extreme_pairs.clone(),
            surfaces: a.surfaces.clone(),
            dependence: a.dependence.clone(),
            ranking: a.ranking.clone(),
            shap: a.shap.clone(),
        }
    }
}

/// Every SVG of a bundle as `(relative path, document)`.
pub fn render_svgs(p: &PlotBundle) -> Vec<(String, String)> {
    let order: Vec<String> = p.ranking.iter().map(|(c, _)| c.clone()).collect();
    let mut out = vec![
        ("shap_summary.svg".to_string(), svg::shap_summary_svg(&p.shap, &order)),
        (
            "correlation_filtered.svg".to_string(),
            svg::matrix_svg(
                &p.correlation_filtered,
                Some(&p.extreme_pairs),
                &format!("correlation, objective > {}", p.filter_threshold),
            ),
        ),
        (
            "correlation_all.svg".to_string(),
            svg::matrix_svg(&p.correlation_all, None, "correlation, all trials"),
        ),
    ];
    for h in &p.histograms {
        out.push((
            format!("histograms/{}.svg", file_stem(&h.column)),
            svg::histogram_svg(h),
        ));
    }
    for d in &p.dependence {
        out.push((
            format!("dependence/{}.svg", file_stem(&d.series.feature)),
            svg::dependence_svg(&d.series),
        ));
    }
    for g in &p.surfaces {
        out.push((
            format!("surfaces/{}__{}.svg", file_stem(&g.x_param), file_stem(&g.y_param)),
            svg::surface_svg(g),
        ));
    }
    out
}

fn ranking_csv(ranking: &[(String, f64)]) -> String {
    let mut out = String::from("column,mean_abs_shap\n");
    for (c, v) in ranking {
        out.push_str(&format!("{},{v}\n", crate::csv_field(c)));
    }
    out
}

fn objective_correlation_csv(rows: &[(String, Option<f64>)]) -> String {
    let mut out = String::from("column,r\n");
    for (c, r) in rows {
        let r = r.map_or_else(|| "NA".to_string(), |v| v.to_string());
        out.push_str(&format!("{},{r}\n", crate::csv_field(c)));
    }
    out
}

fn pairs_csv(p: &ExtremePairs) -> String {
    let mut out = String::from("sign,a,b,r\n");
    for (sign, list) in [("positive", &p.positive), ("negative", &p.negative)] {
        for e in list {
            out.push_str(&format!(
                "{sign},{},{},{}\n",
                crate::csv_field(&e.a),
                crate::csv_field(&e.b),
                e.r
            ));
        }
    }
    out
}

/// Writes the bundle for `analysis` under `dir` and returns its manifest.
pub fn write_bundle(
    study: &Study,
    analysis: &Analysis,
    opts: &AnalyzeOptions,
    dir: &Path,
) -> Result<Manifest, BenchError> {
    fs::create_dir_all(dir)?;
    let mut w = Writer {
        root: dir,
        files: Vec::new(),
    };
    let a = analysis;
    let f = opts.formats;

    let summary = Summary {
        n_trials: a.n_trials,
        n_aggregated: a.n_aggregated,
        n_filtered: a.n_filtered,
        filter_threshold: a.filter_threshold,
        surrogate: &a.surrogate,
        ranking: &a.ranking,
        interactions: a
            .dependence
            .iter()
            .map(|d| {
                (
                    d.series.feature.as_str(),
                    d.series.interaction.as_str(),
                    d.partner_r,
                    d.low_confidence,
                )
            })
            .collect(),
        objective_correlation: &a.objective_correlation,
        extreme_pairs: &a.extreme_pairs,
    };
    w.json("summary.json", &summary)?;
    w.put("recommendations.txt", render_text(&a.recommendations).as_bytes())?;

    if f.json {
        w.json("recommendations.json", &a.recommendations)?;
        let mut forest = a.forest.to_json();
        forest.push('\n');
        w.put("forest.json", forest.as_bytes())?;
        w.json("plots.json", &PlotBundle::from_analysis(a))?;
    }

    if f.csv {
        w.put("shap_values.csv", a.shap.to_csv().as_bytes())?;
        w.put("shap_ranking.csv", ranking_csv(&a.ranking).as_bytes())?;
        w.put("correlation_filtered.csv", a.correlation_filtered.to_csv().as_bytes())?;
        w.put("correlation_all.csv", a.correlation_all.to_csv().as_bytes())?;
        w.put(
            "objective_correlation.csv",
            objective_correlation_csv(&a.objective_correlation).as_bytes(),
        )?;
        w.put("extreme_pairs.csv", pairs_csv(&a.extreme_pairs).as_bytes())?;
        for h in &a.histograms {
            w.put(
                &format!("histograms/{}.csv", file_stem(&h.column)),
                h.to_csv().as_bytes(),
            )?;
        }
        for d in &a.dependence {
            w.put(
                &format!("dependence/{}.csv", file_stem(&d.series.feature)),
                d.series.to_csv().as_bytes(),
            )?;
        }
        for g in &a.surfaces {
            w.put(
                &format!("surfaces/{}__{}.csv", file_stem(&g.x_param), file_stem(&g.y_param)),
                g.to_csv().as_bytes(),
            )?;
        }
    }

    if f.svg {
        for (path, doc) in render_svgs(&PlotBundle::from_analysis(a)) {
            w.put(&path, doc.as_bytes())?;
        }
    }

    let mut input = Vec::new();
    study.write_jsonl(&mut input)?;
    let mut files = w.files;
    files.sort_by(|x, y| x.path.cmp(&y.path));
    let manifest = Manifest {
        tool_version: TOOL_VERSION.to_string(),
        input_sha256: sha256_hex(&input),
        options: opts.clone(),
        files,
    };
    let mut s = serde_json::to_string_pretty(&manifest)?;
    s.push('\n');
    fs::write(dir.join("manifest.json"), s)?;
    Ok(manifest)
}

/// [`analyze`] followed by [`write_bundle`].
pub fn run_analyze(study: &Study, opts: &AnalyzeOptions, dir: &Path) -> Result<ReportBundle, BenchError> {
    let analysis = analyze(study, opts)?;
    let manifest = write_bundle(study, &analysis, opts, dir)?;
    Ok(ReportBundle { analysis, manifest })
}
