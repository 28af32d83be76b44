use serde::{Deserialize, Serialize};

use super::AdvisorError;
use crate::study::{ColumnDef, EncodedMatrix, ParamKind};

/// Mean objective over a grid of cells spanned by two columns.
///
/// Rows of `cell_mean` and `cell_count` follow the y axis, columns the x
/// axis. Cells without trials hold `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceGrid {
    pub x_param: String,
    pub y_param: String,
    pub x_edges: Vec<f64>,
    pub y_edges: Vec<f64>,
    pub cell_mean: Vec<Vec<Option<f64>>>,
    pub cell_count: Vec<Vec<usize>>,
}

impl SurfaceGrid {
    pub fn total_count(&self) -> usize {
        self.cell_count.iter().flatten().sum()
    }

    /// Count-weighted mean over the occupied cells.
    pub fn weighted_mean(&self) -> Option<f64> {
        let total = self.total_count();
        if total == 0 {
            return None;
        }
        let sum: f64 = self
            .cell_mean
            .iter()
            .flatten()
            .zip(self.cell_count.iter().flatten())
            .filter_map(|(m, &c)| m.map(|m| m * c as f64))
            .sum();
        Some(sum / total as f64)
    }

    /// The occupied cell with the highest mean, as `(x_cell, y_cell)`.
    pub fn argmax(&self) -> Option<(usize, usize)> {
        let mut best: Option<(usize, usize, f64)> = None;
        for (yi, row) in self.cell_mean.iter().enumerate() {
            for (xi, m) in row.iter().enumerate() {
                if let Some(m) = *m {
                    if best.is_none_or(|b| m > b.2) {
                        best = Some((xi, yi, m));
                    }
                }
            }
        }
        best.map(|(x, y, _)| (x, y))
    }

    /// Long-format CSV, one line per cell; empty cells have an empty mean.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x_lower,x_upper,y_lower,y_upper,count,mean_objective\n");
        for (yi, row) in self.cell_mean.iter().enumerate() {
            for (xi, m) in row.iter().enumerate() {
                let mean = m.map(|v| v.to_string()).unwrap_or_default();
                out.push_str(&format!(
                    "{},{},{},{},{},{mean}\n",
                    self.x_edges[xi],
                    self.x_edges[xi + 1],
                    self.y_edges[yi],
                    self.y_edges[yi + 1],
                    self.cell_count[yi][xi],
                ));
            }
        }
        out
    }
}

fn axis(col: &ColumnDef, resolution: usize) -> Vec<f64> {
    let lo = col.encoded_lower();
    let hi = col.encoded_upper();
    let w = (hi - lo) / resolution as f64;
    (0..=resolution)
        .map(|i| if i == resolution { hi } else { lo + w * i as f64 })
        .collect()
}

fn cell(v: f64, edges: &[f64]) -> usize {
    let n = edges.len() - 1;
    let w = (edges[n] - edges[0]) / n as f64;
    (((v - edges[0]) / w).floor().max(0.0) as usize).min(n - 1)
}

/// Bins the rows of `m` over `x` and `y` into `resolution` equal-width
/// cells per axis, spanning the declared bounds on the encoded scale.
pub fn surface_grid(
    m: &EncodedMatrix,
    x: &ColumnDef,
    y: &ColumnDef,
    resolution: usize,
) -> Result<SurfaceGrid, AdvisorError> {
    if resolution < 2 {
        return Err(AdvisorError::TooFewBins(resolution));
    }
    if x.name == y.name {
        return Err(AdvisorError::SameColumn(x.name.clone()));
    }
    for c in [x, y] {
        if c.kind == ParamKind::Categorical {
            return Err(AdvisorError::Categorical(c.name.clone()));
        }
    }
    let xi = m
        .column_index(&x.name)
        .ok_or_else(|| AdvisorError::UnknownColumn(x.name.clone()))?;
    let yi = m
        .column_index(&y.name)
        .ok_or_else(|| AdvisorError::UnknownColumn(y.name.clone()))?;

    let x_edges = axis(x, resolution);
    let y_edges = axis(y, resolution);
    let mut sums = vec![vec![0.0; resolution]; resolution];
    let mut cell_count = vec![vec![0usize; resolution]; resolution];
    for (row, &obj) in m.x.iter().zip(&m.y) {
        let cx = cell(row[xi], &x_edges);
        let cy = cell(row[yi], &y_edges);
        sums[cy][cx] += obj;
        cell_count[cy][cx] += 1;
    }
    let cell_mean = sums
        .iter()
        .zip(&cell_count)
        .map(|(s, c)| s.iter().zip(c).map(|(&s, &c)| (c > 0).then(|| s / c as f64)).collect())
        .collect();
    Ok(SurfaceGrid {
        x_param: x.name.clone(),
        y_param: y.name.clone(),
        x_edges,
        y_edges,
        cell_mean,
        cell_count,
    })
}
