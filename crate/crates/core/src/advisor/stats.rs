use serde::{Deserialize, Serialize};

use super::AdvisorError;
use crate::csv_field;
use crate::study::{ColumnDef, ParamKind};

/// Fisher-Pearson skewness `g1 = m3 / m2^1.5`. Returns 0 for fewer than two
/// values or zero spread.
pub fn skewness(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    if values.len() < 2 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / n;
    let (mut m2, mut m3) = (0.0, 0.0);
    for v in values {
        let d = v - mean;
        m2 += d * d;
        m3 += d * d * d;
    }
    m2 /= n;
    m3 /= n;
    if m2 == 0.0 {
        return 0.0;
    }
    m3 / m2.powf(1.5)
}

/// Pearson correlation, accumulated in one pass. `None` when either input
/// has zero variance or fewer than two points are given.
pub fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    assert_eq!(a.len(), b.len(), "pearson inputs differ in length");
    if a.len() < 2 {
        return None;
    }
    let (mut ma, mut mb) = (0.0, 0.0);
    let (mut caa, mut cbb, mut cab) = (0.0, 0.0, 0.0);
    for (i, (&x, &y)) in a.iter().zip(b).enumerate() {
        let k = (i + 1) as f64;
        let dx = x - ma;
        let dy = y - mb;
        ma += dx / k;
        mb += dy / k;
        caa += dx * (x - ma);
        cbb += dy * (y - mb);
        cab += dx * (y - mb);
    }
    if caa <= 0.0 || cbb <= 0.0 {
        return None;
    }
    Some((cab / (caa * cbb).sqrt()).clamp(-1.0, 1.0))
}

/// Survival function of the Kolmogorov distribution.
fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for j in 1..=100 {
        let j = j as f64;
        let term = (-2.0 * j * j * lambda * lambda).exp();
        sum += sign * term;
        if term < 1e-16 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// One-sample Kolmogorov-Smirnov test against the uniform distribution on
/// `[lower, upper]`. Returns `(D, p)`; `p` uses Stephens' small-sample
/// correction.
pub fn ks_uniform(values: &[f64], lower: f64, upper: f64) -> (f64, f64) {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let width = upper - lower;
    let mut d: f64 = 0.0;
    for (i, &v) in sorted.iter().enumerate() {
        let f = ((v - lower) / width).clamp(0.0, 1.0);
        d = d.max((i + 1) as f64 / n - f).max(f - i as f64 / n);
    }
    (d, ks_p_value(d, sorted.len()))
}

/// Kolmogorov-Smirnov test against the discrete uniform distribution on
/// the integers `lower..=upper`.
pub fn ks_discrete_uniform(values: &[f64], lower: i64, upper: i64) -> (f64, f64) {
    let k = (upper - lower + 1) as usize;
    let mut counts = vec![0usize; k];
    for &v in values {
        let idx = (v.round() as i64 - lower).clamp(0, k as i64 - 1) as usize;
        counts[idx] += 1;
    }
    let n = values.len() as f64;
    let mut cum = 0usize;
    let mut d: f64 = 0.0;
    for (i, c) in counts.iter().enumerate() {
        cum += c;
        let f = (i + 1) as f64 / k as f64;
        d = d.max((cum as f64 / n - f).abs());
    }
    (d, ks_p_value(d, values.len()))
}

fn ks_p_value(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    kolmogorov_q((sn + 0.12 + 0.11 / sn) * d)
}

/// Histogram of one encoded column over its declared bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramStats {
    pub column: String,
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
    pub n: usize,
    pub skew: f64,
    /// KS statistic against the uniform distribution on the bounds.
    pub ks_statistic: f64,
    pub uniform_p: f64,
}

impl HistogramStats {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_lower,bin_upper,count\n");
        for (i, c) in self.counts.iter().enumerate() {
            out.push_str(&format!("{},{},{c}\n", self.edges[i], self.edges[i + 1]));
        }
        out
    }
}

fn is_discrete(col: &ColumnDef) -> bool {
    match col.kind {
        ParamKind::Categorical => true,
        ParamKind::Integer => !col.log_scale,
        ParamKind::Continuous => false,
    }
}

/// Equal-width histogram of encoded `values` over the column's bounds.
///
/// Discrete columns whose range fits in `n_bins` get one bin per value.
/// Uniformity is tested against the continuous or discrete uniform law as
/// appropriate.
pub fn histogram(values: &[f64], col: &ColumnDef, n_bins: usize) -> Result<HistogramStats, AdvisorError> {
    if values.is_empty() {
        return Err(AdvisorError::EmptyValues(col.name.clone()));
    }
    if n_bins < 2 {
        return Err(AdvisorError::TooFewBins(n_bins));
    }
    let lo = col.encoded_lower();
    let hi = col.encoded_upper();
    let tol = 1e-9 * (hi - lo).abs().max(1.0);
    if let Some(&v) = values.iter().find(|&&v| !(v >= lo - tol && v <= hi + tol)) {
        return Err(AdvisorError::OutOfBounds {
            column: col.name.clone(),
            value: v,
        });
    }

    let discrete = is_discrete(col);
    let n_values = (hi - lo).round() as usize + 1;
    let edges: Vec<f64> = if discrete && n_values <= n_bins {
        (0..=n_values).map(|i| lo - 0.5 + i as f64).collect()
    } else {
        let w = (hi - lo) / n_bins as f64;
        (0..=n_bins)
            .map(|i| if i == n_bins { hi } else { lo + w * i as f64 })
            .collect()
    };
    let n_out = edges.len() - 1;
    let first = edges[0];
    let width = (edges[n_out] - first) / n_out as f64;
    let mut counts = vec![0usize; n_out];
    for &v in values {
        let idx = (((v - first) / width).floor().max(0.0) as usize).min(n_out - 1);
        counts[idx] += 1;
    }

    let (ks_statistic, uniform_p) = if discrete {
        ks_discrete_uniform(values, lo.round() as i64, hi.round() as i64)
    } else {
        ks_uniform(values, lo, hi)
    };
    Ok(HistogramStats {
        column: col.name.clone(),
        edges,
        counts,
        n: values.len(),
        skew: skewness(values),
        ks_statistic,
        uniform_p,
    })
}

/// Pairwise Pearson coefficients. `None` marks a pair involving a
/// zero-variance column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub columns: Vec<String>,
    pub r: Vec<Vec<Option<f64>>>,
}

impl CorrelationMatrix {
    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.r[i][j]
    }

    /// Square CSV with a header row; undefined entries are written as `NA`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("column");
        for c in &self.columns {
            out.push(',');
            out.push_str(&csv_field(c));
        }
        out.push('\n');
        for (c, row) in self.columns.iter().zip(&self.r) {
            out.push_str(&csv_field(c));
            for v in row {
                match v {
                    Some(v) => out.push_str(&format!(",{v}")),
                    None => out.push_str(",NA"),
                }
            }
            out.push('\n');
        }
        out
    }
}

fn columns_of(x: &[Vec<f64>], p: usize) -> Vec<Vec<f64>> {
    (0..p).map(|j| x.iter().map(|r| r[j]).collect()).collect()
}

pub fn pearson_matrix(x: &[Vec<f64>], columns: &[String]) -> Result<CorrelationMatrix, AdvisorError> {
    if x.len() < 2 {
        return Err(AdvisorError::TooFewRows(x.len()));
    }
    let p = columns.len();
    let cols = columns_of(x, p);
    let mut r = vec![vec![None; p]; p];
    for i in 0..p {
        let constant = cols[i].iter().all(|&v| v == cols[i][0]);
        r[i][i] = (!constant).then_some(1.0);
        for j in i + 1..p {
            let v = pearson(&cols[i], &cols[j]);
            r[i][j] = v;
            r[j][i] = v;
        }
    }
    Ok(CorrelationMatrix {
        columns: columns.to_vec(),
        r,
    })
}

/// Pearson coefficient of every column against the objective.
pub fn objective_correlation(x: &[Vec<f64>], y: &[f64]) -> Result<Vec<Option<f64>>, AdvisorError> {
    if x.len() < 2 {
        return Err(AdvisorError::TooFewRows(x.len()));
    }
    let p = x[0].len();
    Ok(columns_of(x, p).iter().map(|c| pearson(c, y)).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelatedPair {
    pub a: String,
    pub b: String,
    pub r: f64,
}

/// The most positively and most negatively correlated column pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtremePairs {
    pub positive: Vec<CorrelatedPair>,
    pub negative: Vec<CorrelatedPair>,
}

/// Up to `k` pairs with the largest positive `r` and up to `k` with the
/// most negative. Each unordered pair appears once; undefined entries are
/// skipped and ties keep row-major order.
pub fn extreme_pairs(c: &CorrelationMatrix, k: usize) -> ExtremePairs {
    let p = c.columns.len();
    let mut pairs: Vec<(usize, usize, f64)> = Vec::new();
    for i in 0..p {
        for j in i + 1..p {
            if let Some(r) = c.r[i][j] {
                pairs.push((i, j, r));
            }
        }
    }
    let named = |&(i, j, r): &(usize, usize, f64)| CorrelatedPair {
        a: c.columns[i].clone(),
        b: c.columns[j].clone(),
        r,
    };
    let mut pos: Vec<_> = pairs.iter().filter(|e| e.2 > 0.0).copied().collect();
    pos.sort_by(|a, b| b.2.total_cmp(&a.2));
    let mut neg: Vec<_> = pairs.iter().filter(|e| e.2 < 0.0).copied().collect();
    neg.sort_by(|a, b| a.2.total_cmp(&b.2));
    ExtremePairs {
        positive: pos.iter().take(k).map(named).collect(),
        negative: neg.iter().take(k).map(named).collect(),
    }
}
