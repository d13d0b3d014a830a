//! Layout metrics: blank-space and alignment.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::document::RasterGrid;

/// Default grid cell for blank estimation, in pixels.
pub const DEFAULT_CELL: usize = 128;
/// Minimum fraction of ink pixels for a cell to count as used.
pub const DEFAULT_INK_THRESHOLD: f64 = 0.005;
/// Divisor applied to the projection variance in the alignment score.
pub const ALIGN_VARIANCE_SCALE: f64 = 1e4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LayoutError {
    #[error("blank ratio {0} outside [0, 1]")]
    OutOfRange(f64),
    #[error("grid cell size must be positive")]
    InvalidCell,
    #[error("ink threshold {0} outside [0, 1]")]
    InvalidThreshold(f64),
}

/// Cell-aligned content box, in cell coordinates (half-open).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellBox {
    pub col0: usize,
    pub row0: usize,
    pub col1: usize,
    pub row1: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlankEstimate {
    /// Invalid-blank ratio; 1 when nothing was painted.
    pub beta: f64,
    pub grid_cell: usize,
    pub cells_total: usize,
    pub cells_blank: usize,
    pub content_box: Option<CellBox>,
}

/// Per-cell ink fractions over the full grid, row-major.
fn cell_ink_fractions(grid: &RasterGrid, cell: usize) -> (usize, usize, Vec<f64>) {
    let cols = grid.width().div_ceil(cell);
    let rows = grid.height().div_ceil(cell);
    let mut ink = vec![0usize; cols * rows];
    for y in 0..grid.height() {
        let row = grid.row(y);
        let base = (y / cell) * cols;
        for (x, &v) in row.iter().enumerate() {
            if v < 255 {
                ink[base + x / cell] += 1;
            }
        }
    }
    let fractions = ink
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            let (c, r) = (i % cols, i / cols);
            let cw = (grid.width() - c * cell).min(cell);
            let ch = (grid.height() - r * cell).min(cell);
            n as f64 / (cw * ch) as f64
        })
        .collect();
    (cols, rows, fractions)
}

/// Estimate the invalid-blank ratio on a `cell`-pixel grid.
///
/// Only cells inside the content box (the tightest cell-aligned box holding
/// any ink) are counted, so outer margins never count as blank. A cell is
/// blank when its ink fraction is below `ink_threshold`.
pub fn estimate_blank(
    grid: &RasterGrid,
    cell: usize,
    ink_threshold: f64,
) -> Result<BlankEstimate, LayoutError> {
    if cell == 0 {
        return Err(LayoutError::InvalidCell);
    }
    if !(0.0..=1.0).contains(&ink_threshold) {
        return Err(LayoutError::InvalidThreshold(ink_threshold));
    }
    let (cols, _rows, fractions) = cell_ink_fractions(grid, cell);
    let mut bounds: Option<CellBox> = None;
    for (i, _) in fractions.iter().enumerate().filter(|(_, &f)| f > 0.0) {
        let (c, r) = (i % cols, i / cols);
        bounds = Some(match bounds {
            None => CellBox {
                col0: c,
                row0: r,
                col1: c + 1,
                row1: r + 1,
            },
            Some(b) => CellBox {
                col0: b.col0.min(c),
                row0: b.row0.min(r),
                col1: b.col1.max(c + 1),
                row1: b.row1.max(r + 1),
            },
        });
    }
    let Some(bbox) = bounds else {
        return Ok(BlankEstimate {
            beta: 1.0,
            grid_cell: cell,
            cells_total: 0,
            cells_blank: 0,
            content_box: None,
        });
    };
    let mut total = 0;
    let mut blank = 0;
    for r in bbox.row0..bbox.row1 {
        for c in bbox.col0..bbox.col1 {
            total += 1;
            if fractions[r * cols + c] < ink_threshold {
                blank += 1;
            }
        }
    }
    Ok(BlankEstimate {
        beta: blank as f64 / total as f64,
        grid_cell: cell,
        cells_total: total,
        cells_blank: blank,
        content_box: Some(bbox),
    })
}

/// `1 / (1 + 2β)`.
pub fn blank_score(beta: f64) -> Result<f64, LayoutError> {
    if !(0.0..=1.0).contains(&beta) {
        return Err(LayoutError::OutOfRange(beta));
    }
    Ok(1.0 / (1.0 + 2.0 * beta))
}

/// Row projection of raw grayscale values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionProfile {
    /// `p[y]`: mean gray level of row `y`.
    pub p: Vec<f64>,
    /// Population variance of `p`.
    pub variance: f64,
}

pub fn projection_profile(grid: &RasterGrid) -> ProjectionProfile {
    let w = grid.width() as f64;
    let p: Vec<f64> = (0..grid.height())
        .map(|y| grid.row(y).iter().map(|&v| u64::from(v)).sum::<u64>() as f64 / w)
        .collect();
    let n = p.len() as f64;
    let mean = p.iter().sum::<f64>() / n;
    let variance = p.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    ProjectionProfile { p, variance }
}

/// `1 / (1 + Var / 10⁴)`.
pub fn alignment_from_variance(variance: f64) -> f64 {
    1.0 / (1.0 + variance / ALIGN_VARIANCE_SCALE)
}

pub fn alignment_score(grid: &RasterGrid) -> f64 {
    alignment_from_variance(projection_profile(grid).variance)
}

/// Copy of `grid` with grid lines burned in every `cell` pixels, for judges
/// that estimate blank space visually.
pub fn overlay_grid(grid: &RasterGrid, cell: usize, line_gray: u8) -> RasterGrid {
    let mut out = grid.clone();
    if cell == 0 {
        return out;
    }
    for y in 0..grid.height() {
        for x in 0..grid.width() {
            if x % cell == 0 || y % cell == 0 {
                out.set(x, y, line_gray.min(out.get(x, y)));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid_from_cells(
        cols: usize,
        rows: usize,
        cell: usize,
        inked: &[(usize, usize)],
    ) -> RasterGrid {
        let mut g = RasterGrid::filled(cols * cell, rows * cell, 255);
        for &(c, r) in inked {
            for y in r * cell..(r + 1) * cell {
                for x in c * cell..(c + 1) * cell {
                    g.set(x, y, 0);
                }
            }
        }
        g
    }

    #[test]
    fn fully_inked_grid_has_no_blank() {
        let g = RasterGrid::filled(1024, 1024, 10);
        let est = estimate_blank(&g, 128, DEFAULT_INK_THRESHOLD).unwrap();
        assert_eq!(est.beta, 0.0);
        assert_eq!(est.cells_total, 64);
    }

    #[test]
    fn no_ink_means_beta_one() {
        let g = RasterGrid::filled(256, 256, 255);
        let est = estimate_blank(&g, 128, DEFAULT_INK_THRESHOLD).unwrap();
        assert_eq!(est.beta, 1.0);
        assert_eq!(est.cells_total, 0);
        assert!(est.content_box.is_none());
    }

    #[test]
    fn margins_outside_content_box_do_not_count() {
        // Ink in cells (2,2) and (4,3) only -> content box 3x2 with 4 blank.
        let g = grid_from_cells(8, 8, 128, &[(2, 2), (4, 3)]);
        let est = estimate_blank(&g, 128, DEFAULT_INK_THRESHOLD).unwrap();
        assert_eq!(est.cells_total, 6);
        assert_eq!(est.cells_blank, 4);
    }

    #[test]
    fn sub_threshold_ink_is_blank() {
        let mut g = grid_from_cells(2, 1, 128, &[(0, 0)]);
        // 81 of 16384 pixels ≈ 0.49% ink in the second cell.
        for i in 0..81 {
            g.set(128 + i % 128, i / 128, 0);
        }
        let est = estimate_blank(&g, 128, DEFAULT_INK_THRESHOLD).unwrap();
        assert_eq!((est.cells_total, est.cells_blank), (2, 1));
        for i in 81..82 {
            g.set(128 + i % 128, i / 128, 0);
        }
        let est = estimate_blank(&g, 128, DEFAULT_INK_THRESHOLD).unwrap();
        assert_eq!(est.cells_blank, 0);
    }

    #[test]
    fn blank_score_values() {
        assert_eq!(blank_score(0.0).unwrap(), 1.0);
        assert_eq!(blank_score(0.5).unwrap(), 0.5);
        assert!((blank_score(0.27).unwrap() - 1.0 / 1.54).abs() < 1e-15);
        assert_eq!(blank_score(1.2), Err(LayoutError::OutOfRange(1.2)));
        assert!(blank_score(-0.1).is_err());
    }

    #[test]
    fn uniform_image_is_perfectly_aligned() {
        for v in [0u8, 77, 255] {
            assert_eq!(alignment_score(&RasterGrid::filled(40, 30, v)), 1.0);
        }
    }

    #[test]
    fn two_band_variance() {
        let mut g = RasterGrid::filled(64, 64, 255);
        for y in 0..32 {
            for x in 0..64 {
                g.set(x, y, 0);
            }
        }
        let prof = projection_profile(&g);
        assert!((prof.variance - 16256.25).abs() < 1e-9);
        assert!((alignment_score(&g) - 1.0 / 2.625625).abs() < 1e-12);
    }

    #[test]
    fn overlay_draws_lines() {
        let g = overlay_grid(&RasterGrid::filled(10, 10, 255), 5, 100);
        assert_eq!(g.get(0, 3), 100);
        assert_eq!(g.get(5, 3), 100);
        assert_eq!(g.get(3, 3), 255);
    }
}
