//! Placement of projected images on a uniform grid.
//!
//! `greedy_assign` walks grid positions column-by-column (outer loop over x,
//! inner over y) and gives each position the nearest unused image, ties going
//! to the lowest sample index. `exact_assign` solves the same placement as a
//! minimum-cost bipartite matching and serves as a verification oracle:
//! its total squared-distance cost never exceeds the greedy cost.

use crate::numerics::Matrix;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GridError {
    #[error("grid needs {cells} cells but only {n} images are available")]
    TooFewImages { cells: usize, n: usize },
    #[error("grid dimensions must be nonzero (got {rows}x{cols})")]
    EmptyGrid { rows: usize, cols: usize },
    #[error("coordinates must be an N x 2 matrix, got N x {cols}")]
    BadCoords { cols: usize },
    #[error("coordinates contain a non-finite value")]
    NonFiniteCoords,
    #[error("sample index {index} out of range for {len} labels/outputs")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("label at index {index} is {value}, expected 0 or 1")]
    BadLabel { index: usize, value: f64 },
    #[error("output at index {index} is {value}, expected within [0, 1]")]
    BadOutput { index: usize, value: f64 },
    #[error("layout has no overlay values to report on")]
    NoOverlays,
}

/// Uniform grid geometry derived from the coordinate bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub rows: usize,
    pub cols: usize,
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    /// Horizontal step between grid positions.
    pub d1: f64,
    /// Vertical step between grid positions.
    pub d2: f64,
}

impl GridSpec {
    fn from_coords(coords: &Matrix, rows: usize, cols: usize) -> Self {
        let n = coords.rows();
        let mut x_min = f64::INFINITY;
        let mut x_max = f64::NEG_INFINITY;
        let mut y_min = f64::INFINITY;
        let mut y_max = f64::NEG_INFINITY;
        for i in 0..n {
            let x = coords.get(i, 0);
            let y = coords.get(i, 1);
            x_min = x_min.min(x);
            x_max = x_max.max(x);
            y_min = y_min.min(y);
            y_max = y_max.max(y);
        }
        let d1 = (x_max - x_min) / cols.saturating_sub(1).max(1) as f64;
        let d2 = (y_max - y_min) / rows.saturating_sub(1).max(1) as f64;
        GridSpec { rows, cols, x_min, x_max, y_min, y_max, d1, d2 }
    }

    /// Coordinate of the grid position at (row, col).
    pub fn position(&self, row: usize, col: usize) -> (f64, f64) {
        (
            self.x_min + col as f64 * self.d1,
            self.y_min + row as f64 * self.d2,
        )
    }
}

/// Grid cells with their assigned sample indices and overlay error values.
#[derive(Debug, Clone, PartialEq)]
pub struct GridLayout {
    pub spec: GridSpec,
    /// Row-major cells: `assignment[row * cols + col]` is the sample index.
    pub assignment: Vec<Option<usize>>,
    /// Per-cell |label - output|, filled by `overlay_values`.
    pub overlay: Vec<Option<f64>>,
}

impl GridLayout {
    #[inline]
    fn cell(&self, row: usize, col: usize) -> usize {
        row * self.spec.cols + col
    }

    pub fn assigned(&self, row: usize, col: usize) -> Option<usize> {
        self.assignment[self.cell(row, col)]
    }

    pub fn overlay_at(&self, row: usize, col: usize) -> Option<f64> {
        self.overlay[self.cell(row, col)]
    }

    /// Total squared distance between each assigned cell's grid position and
    /// its image's coordinates.
    pub fn total_cost(&self, coords: &Matrix) -> f64 {
        let mut cost = 0.0;
        for row in 0..self.spec.rows {
            for col in 0..self.spec.cols {
                if let Some(i) = self.assigned(row, col) {
                    let (px, py) = self.spec.position(row, col);
                    let dx = coords.get(i, 0) - px;
                    let dy = coords.get(i, 1) - py;
                    cost += dx * dx + dy * dy;
                }
            }
        }
        cost
    }
}

fn validate(coords: &Matrix, rows: usize, cols: usize) -> Result<(), GridError> {
    if coords.cols() != 2 {
        return Err(GridError::BadCoords { cols: coords.cols() });
    }
    if coords.data().iter().any(|v| !v.is_finite()) {
        return Err(GridError::NonFiniteCoords);
    }
    if rows == 0 || cols == 0 {
        return Err(GridError::EmptyGrid { rows, cols });
    }
    let cells = rows * cols;
    if cells > coords.rows() {
        return Err(GridError::TooFewImages { cells, n: coords.rows() });
    }
    Ok(())
}

/// Greedy nearest-unused-image assignment.
///
/// Grid positions are visited with the outer loop over x (columns) and the
/// inner loop over y (rows). Each position takes the unused image closest in
/// Euclidean distance, lowest index on exact ties, and removes it from the
/// pool. The scan order makes the result fully deterministic.
pub fn greedy_assign(coords: &Matrix, rows: usize, cols: usize) -> Result<GridLayout, GridError> {
    validate(coords, rows, cols)?;
    let n = coords.rows();
    let spec = GridSpec::from_coords(coords, rows, cols);
    let mut used = vec![false; n];
    let mut assignment = vec![None; rows * cols];
    for col in 0..cols {
        for row in 0..rows {
            let (px, py) = spec.position(row, col);
            let mut best: Option<(usize, f64)> = None;
            for i in 0..n {
                if used[i] {
                    continue;
                }
                let dx = coords.get(i, 0) - px;
                let dy = coords.get(i, 1) - py;
                let dist = (dx * dx + dy * dy).sqrt();
                let better = match best {
                    None => true,
                    Some((_, d)) => dist < d,
                };
                if better {
                    best = Some((i, dist));
                }
            }
            let (idx, _) = best.expect("cells <= images guarantees an unused image");
            used[idx] = true;
            assignment[row * cols + col] = Some(idx);
        }
    }
    Ok(GridLayout { spec, assignment, overlay: vec![None; rows * cols] })
}

/// Optimal assignment minimizing total squared cell-to-image distance.
///
/// Shortest-augmenting-path matching with potentials, O(cells^2 * N); costs
/// are evaluated on the fly so no cells x N matrix is materialized.
pub fn exact_assign(coords: &Matrix, rows: usize, cols: usize) -> Result<GridLayout, GridError> {
    validate(coords, rows, cols)?;
    let n_images = coords.rows();
    let spec = GridSpec::from_coords(coords, rows, cols);
    let n_cells = rows * cols;

    // Cell order is row-major; cost(cell, image) computed on demand.
    let positions: Vec<(f64, f64)> = (0..n_cells)
        .map(|cell| spec.position(cell / cols, cell % cols))
        .collect();
    let cost = |cell: usize, image: usize| -> f64 {
        let (px, py) = positions[cell];
        let dx = coords.get(image, 0) - px;
        let dy = coords.get(image, 1) - py;
        dx * dx + dy * dy
    };

    const NONE: usize = usize::MAX;
    let mut u = vec![0.0; n_cells];
    let mut v = vec![0.0; n_images + 1];
    // matched_cell[j] = cell currently assigned image j (last slot is the
    // virtual start column).
    let mut matched_cell = vec![NONE; n_images + 1];

    for cell in 0..n_cells {
        matched_cell[n_images] = cell;
        let mut j0 = n_images;
        let mut min_slack = vec![f64::INFINITY; n_images + 1];
        let mut prev = vec![n_images; n_images + 1];
        let mut visited = vec![false; n_images + 1];
        loop {
            visited[j0] = true;
            let i0 = matched_cell[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = NONE;
            for j in 0..n_images {
                if visited[j] {
                    continue;
                }
                let reduced = cost(i0, j) - u[i0] - v[j];
                if reduced < min_slack[j] {
                    min_slack[j] = reduced;
                    prev[j] = j0;
                }
                if min_slack[j] < delta {
                    delta = min_slack[j];
                    j1 = j;
                }
            }
            for j in 0..=n_images {
                if visited[j] {
                    u[matched_cell[j]] += delta;
                    v[j] -= delta;
                } else {
                    min_slack[j] -= delta;
                }
            }
            j0 = j1;
            if matched_cell[j0] == NONE {
                break;
            }
        }
        // Unwind the augmenting path.
        while j0 != n_images {
            let j1 = prev[j0];
            matched_cell[j0] = matched_cell[j1];
            j0 = j1;
        }
    }

    let mut assignment = vec![None; n_cells];
    for j in 0..n_images {
        let cell = matched_cell[j];
        if cell != NONE {
            assignment[cell] = Some(j);
        }
    }
    Ok(GridLayout { spec, assignment, overlay: vec![None; n_cells] })
}

/// Fill each assigned cell's overlay with |label - output| of its image.
pub fn overlay_values(
    layout: &mut GridLayout,
    labels: &[u8],
    outputs: &[f64],
) -> Result<(), GridError> {
    let len = labels.len().min(outputs.len());
    for cell in 0..layout.assignment.len() {
        if let Some(i) = layout.assignment[cell] {
            if i >= labels.len() || i >= outputs.len() {
                return Err(GridError::IndexOutOfRange { index: i, len });
            }
            if labels[i] > 1 {
                return Err(GridError::BadLabel { index: i, value: labels[i] as f64 });
            }
            let o = outputs[i];
            if !(0.0..=1.0).contains(&o) {
                return Err(GridError::BadOutput { index: i, value: o });
            }
            layout.overlay[cell] = Some((labels[i] as f64 - o).abs());
        }
    }
    Ok(())
}

/// Mean overlay error and cell count for one grid region.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionStat {
    pub count: usize,
    pub mean_error: Option<f64>,
}

impl RegionStat {
    fn from_sum(sum: f64, count: usize) -> Self {
        RegionStat {
            count,
            mean_error: if count > 0 { Some(sum / count as f64) } else { None },
        }
    }
}

/// Per-half, per-quadrant and overall overlay error summary.
///
/// Halves split the grid at the middle row/column; when the row (or column)
/// count is odd, the central row (column) belongs to neither half so the two
/// sides stay the same size. Quadrants intersect the halves.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionReport {
    pub overall: RegionStat,
    pub top: RegionStat,
    pub bottom: RegionStat,
    pub left: RegionStat,
    pub right: RegionStat,
    pub top_left: RegionStat,
    pub top_right: RegionStat,
    pub bottom_left: RegionStat,
    pub bottom_right: RegionStat,
}

/// Aggregate overlay errors per grid region.
pub fn region_report(layout: &GridLayout) -> Result<RegionReport, GridError> {
    let rows = layout.spec.rows;
    let cols = layout.spec.cols;
    let mut sums = [0.0; 9];
    let mut counts = [0usize; 9];
    let mut add = |region: usize, v: f64| {
        sums[region] += v;
        counts[region] += 1;
    };
    for row in 0..rows {
        for col in 0..cols {
            let Some(v) = layout.overlay_at(row, col) else { continue };
            add(0, v);
            let in_top = row < rows / 2;
            let in_bottom = row >= rows - rows / 2;
            let in_left = col < cols / 2;
            let in_right = col >= cols - cols / 2;
            if in_top {
                add(1, v);
            }
            if in_bottom {
                add(2, v);
            }
            if in_left {
                add(3, v);
            }
            if in_right {
                add(4, v);
            }
            match (in_top, in_bottom, in_left, in_right) {
                (true, _, true, _) => add(5, v),
                (true, _, _, true) => add(6, v),
                (_, true, true, _) => add(7, v),
                (_, true, _, true) => add(8, v),
                _ => {}
            }
        }
    }
    if counts[0] == 0 {
        return Err(GridError::NoOverlays);
    }
    let stat = |i: usize| RegionStat::from_sum(sums[i], counts[i]);
    Ok(RegionReport {
        overall: stat(0),
        top: stat(1),
        bottom: stat(2),
        left: stat(3),
        right: stat(4),
        top_left: stat(5),
        top_right: stat(6),
        bottom_left: stat(7),
        bottom_right: stat(8),
    })
}

/// Render the layout as `row,col,sample_index,x_grid,y_grid,overlay` CSV.
/// Empty cells are omitted; a missing overlay renders as an empty field.
pub fn layout_to_csv(layout: &GridLayout) -> String {
    let mut out = String::from("row,col,sample_index,x_grid,y_grid,overlay\n");
    for row in 0..layout.spec.rows {
        for col in 0..layout.spec.cols {
            let Some(i) = layout.assigned(row, col) else { continue };
            let (px, py) = layout.spec.position(row, col);
            let overlay = match layout.overlay_at(row, col) {
                Some(v) => format!("{v:.16e}"),
                None => String::new(),
            };
            out.push_str(&format!("{row},{col},{i},{px:.16e},{py:.16e},{overlay}\n"));
        }
    }
    out
}
