//! Spatiotemporal cell grid: distributes flow vectors, quantises
//! orientations into 8 bins, clusters each selected bin spatially into
//! dominant groups, and computes neighborhood entropy.

use std::f64::consts::TAU;

use thiserror::Error;

use crate::flow::VideoVolumeConfig;
use crate::geom::circular_mean;
use crate::kmeans::kmeans_auto;
use crate::sampling::FlowVector;

pub const ANGLE_BINS: usize = 8;

#[derive(Debug, Error)]
pub enum CellError {
    #[error("cell has no vectors")]
    EmptyCell,
}

/// Spatial cluster of similarly oriented flow vectors within one cell.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DominantGroup {
    /// Mean position.
    pub x: f64,
    pub y: f64,
    /// Member count.
    pub n: usize,
    /// Circular-mean orientation in [0, 2pi).
    pub theta: f64,
    /// Mean member magnitude; used when a displacement has to be
    /// reconstructed from the group.
    pub mean_magnitude: f64,
}

/// One spatiotemporal cell accumulating vectors over a mini-batch.
#[derive(Debug, Clone, Default)]
pub struct Cell {
    pub col: usize,
    pub row: usize,
    pub vectors: Vec<FlowVector>,
    /// Dominant groups, descending by member count.
    pub groups: Vec<DominantGroup>,
    pub representative: Option<DominantGroup>,
    /// Neighborhood entropy in bits, filled by [`cell_entropy`].
    pub entropy: f64,
}

/// The three granularity levels aggregated over a grid.
#[derive(Debug, Clone, Default)]
pub struct FineToCoarse {
    pub vectors: Vec<FlowVector>,
    pub groups: Vec<DominantGroup>,
    pub representatives: Vec<DominantGroup>,
}

#[derive(Debug, Clone)]
pub struct CellGrid {
    pub cols: usize,
    pub rows: usize,
    pub cells: Vec<Cell>,
}

impl CellGrid {
    pub fn new(cols: usize, rows: usize) -> CellGrid {
        let mut cells = Vec::with_capacity(cols * rows);
        for row in 0..rows {
            for col in 0..cols {
                cells.push(Cell {
                    col,
                    row,
                    ..Cell::default()
                });
            }
        }
        CellGrid { cols, rows, cells }
    }

    pub fn at(&self, col: usize, row: usize) -> &Cell {
        &self.cells[row * self.cols + col]
    }

    pub fn at_mut(&mut self, col: usize, row: usize) -> &mut Cell {
        &mut self.cells[row * self.cols + col]
    }
}

/// Drops each vector into the unique cell containing its start position.
pub fn distribute(vectors: &[FlowVector], config: &VideoVolumeConfig) -> CellGrid {
    let mut grid = CellGrid::new(config.grid_cols(), config.grid_rows());
    for f in vectors {
        let (col, row) = config.cell_of(f.x, f.y);
        grid.at_mut(col, row).vectors.push(*f);
    }
    grid
}

/// 45-degree bin index of an angle.
#[inline]
pub fn angle_bin(theta: f64) -> usize {
    ((theta / (TAU / ANGLE_BINS as f64)) as usize).min(ANGLE_BINS - 1)
}

fn median_of_counts(counts: &[usize; ANGLE_BINS]) -> f64 {
    let mut sorted = *counts;
    sorted.sort_unstable();
    (sorted[ANGLE_BINS / 2 - 1] + sorted[ANGLE_BINS / 2]) as f64 / 2.0
}

/// Returns the bins whose count is strictly above the median of the 8
/// counts, each with its member vectors. When every count ties (nothing is
/// strictly above), all non-empty bins are returned.
pub fn quantise_orientations(cell: &Cell) -> Result<Vec<(usize, Vec<FlowVector>)>, CellError> {
    if cell.vectors.is_empty() {
        return Err(CellError::EmptyCell);
    }
    let mut bins: Vec<Vec<FlowVector>> = vec![Vec::new(); ANGLE_BINS];
    for f in &cell.vectors {
        bins[angle_bin(f.angle)].push(*f);
    }
    let counts: [usize; ANGLE_BINS] = std::array::from_fn(|i| bins[i].len());
    let median = median_of_counts(&counts);
    let mut selected: Vec<(usize, Vec<FlowVector>)> = bins
        .iter()
        .enumerate()
        .filter(|(i, b)| counts[*i] as f64 > median && !b.is_empty())
        .map(|(i, b)| (i, b.clone()))
        .collect();
    if selected.is_empty() {
        // degenerate tie: keep all occupied bins
        selected = bins
            .into_iter()
            .enumerate()
            .filter(|(_, b)| !b.is_empty())
            .collect();
    }
    Ok(selected)
}

/// k-means over (x, y) with the compactness-ratio stopping rule. One
/// DominantGroup per cluster.
pub fn cluster_spatial(vectors: &[FlowVector], t_c: f64, max_k: usize) -> Vec<DominantGroup> {
    assert!(!vectors.is_empty());
    let data: Vec<f64> = vectors.iter().flat_map(|f| [f.x, f.y]).collect();
    let km = kmeans_auto(&data, 2, t_c, max_k);
    let mut groups = Vec::new();
    for c in 0..km.k {
        let members: Vec<&FlowVector> = vectors
            .iter()
            .zip(&km.assignments)
            .filter(|(_, &a)| a == c)
            .map(|(f, _)| f)
            .collect();
        if members.is_empty() {
            continue;
        }
        let n = members.len();
        let x = members.iter().map(|f| f.x).sum::<f64>() / n as f64;
        let y = members.iter().map(|f| f.y).sum::<f64>() / n as f64;
        let angles: Vec<f64> = members.iter().map(|f| f.angle).collect();
        let mean_magnitude = members.iter().map(|f| f.magnitude).sum::<f64>() / n as f64;
        groups.push(DominantGroup {
            x,
            y,
            n,
            theta: circular_mean(&angles),
            mean_magnitude,
        });
    }
    groups.sort_by(|a, b| b.n.cmp(&a.n).then(a.x.total_cmp(&b.x)));
    groups
}

/// Runs quantisation + clustering on every non-empty cell of the grid,
/// filling `groups` and `representative`.
pub fn quantise_and_cluster(grid: &mut CellGrid, t_c: f64, max_k: usize) {
    for cell in &mut grid.cells {
        if cell.vectors.is_empty() {
            continue;
        }
        let mut groups = Vec::new();
        for (_, members) in quantise_orientations(cell).unwrap() {
            groups.extend(cluster_spatial(&members, t_c, max_k));
        }
        groups.sort_by(|a, b| b.n.cmp(&a.n).then(a.x.total_cmp(&b.x)));
        cell.representative = groups.first().cloned();
        cell.groups = groups;
    }
}

/// Aggregates the three levels across cells. The representative of a cell is
/// its largest group.
pub fn fine_to_coarse(grid: &CellGrid) -> FineToCoarse {
    let mut out = FineToCoarse::default();
    for cell in &grid.cells {
        out.vectors.extend(cell.vectors.iter().copied());
        out.groups.extend(cell.groups.iter().cloned());
        if let Some(rep) = &cell.representative {
            out.representatives.push(rep.clone());
        }
    }
    out
}

/// Shannon entropy (bits) of an 8-bin angular histogram.
fn entropy_bits(counts: &[f64; ANGLE_BINS]) -> f64 {
    let total: f64 = counts.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    -counts
        .iter()
        .filter(|&&c| c > 0.0)
        .map(|&c| {
            let p = c / total;
            p * p.log2()
        })
        .sum::<f64>()
}

/// Per-cell entropy over the cell's own vectors plus the group prototypes of
/// its K x K neighborhood. Out-of-grid neighbors are replaced by replicating
/// the cell's own vectors.
pub fn cell_entropy(grid: &mut CellGrid, neighborhood: usize) {
    assert!(neighborhood % 2 == 1, "neighborhood must be odd");
    let half = (neighborhood / 2) as isize;
    let mut entropies = vec![0.0; grid.cells.len()];
    for (idx, cell) in grid.cells.iter().enumerate() {
        let mut counts = [0.0f64; ANGLE_BINS];
        let mut own = [0.0f64; ANGLE_BINS];
        for f in &cell.vectors {
            own[angle_bin(f.angle)] += 1.0;
        }
        for b in 0..ANGLE_BINS {
            counts[b] += own[b];
        }
        for dy in -half..=half {
            for dx in -half..=half {
                if dx == 0 && dy == 0 {
                    continue;
                }
                let nc = cell.col as isize + dx;
                let nr = cell.row as isize + dy;
                if nc < 0 || nr < 0 || nc >= grid.cols as isize || nr >= grid.rows as isize {
                    // boundary: replicate own vectors
                    for b in 0..ANGLE_BINS {
                        counts[b] += own[b];
                    }
                    continue;
                }
                for g in &grid.at(nc as usize, nr as usize).groups {
                    counts[angle_bin(g.theta)] += 1.0;
                }
            }
        }
        entropies[idx] = entropy_bits(&counts);
    }
    for (cell, e) in grid.cells.iter_mut().zip(entropies) {
        cell.entropy = e;
    }
}

/// Debug dump of per-cell groups and entropy (one JSON document per grid).
pub fn grid_to_json(grid: &CellGrid) -> serde_json::Value {
    let cells: Vec<serde_json::Value> = grid
        .cells
        .iter()
        .filter(|c| !c.vectors.is_empty() || !c.groups.is_empty())
        .map(|c| {
            serde_json::json!({
                "col": c.col,
                "row": c.row,
                "vector_count": c.vectors.len(),
                "groups": c.groups,
                "entropy_bits": c.entropy,
            })
        })
        .collect();
    serde_json::json!({ "cols": grid.cols, "rows": grid.rows, "cells": cells })
}
