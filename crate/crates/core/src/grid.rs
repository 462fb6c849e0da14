//! One-dimensional cell-centered meshes and the scalar data living on them.

use crate::error::{Result, SolverError};
use serde::{Deserialize, Serialize};

/// Boundary condition attached to a domain endpoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryTag {
    /// Outflow boundary with Robin flux `beta * rho`.
    Exit,
    /// Impermeable wall, zero total flux.
    Wall,
}

/// Uniform cell-centered grid on `[x_min, x_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    x_min: f64,
    x_max: f64,
    n_cells: usize,
    h: f64,
    left: BoundaryTag,
    right: BoundaryTag,
}

impl Grid {
    pub fn new(
        x_min: f64,
        x_max: f64,
        n_cells: usize,
        left: BoundaryTag,
        right: BoundaryTag,
    ) -> Result<Self> {
        if !(x_min.is_finite() && x_max.is_finite()) {
            return Err(SolverError::InvalidInput(format!(
                "grid bounds must be finite, got [{x_min}, {x_max}]"
            )));
        }
        if x_min >= x_max {
            return Err(SolverError::InvalidInput(format!(
                "inverted grid bounds: x_min = {x_min} >= x_max = {x_max}"
            )));
        }
        if n_cells < 2 {
            return Err(SolverError::InvalidInput(format!(
                "grid needs at least 2 cells, got {n_cells}"
            )));
        }
        let h = (x_max - x_min) / n_cells as f64;
        Ok(Self {
            x_min,
            x_max,
            n_cells,
            h,
            left,
            right,
        })
    }

    /// Symmetric room `[-1, 1]` with exits at both ends.
    pub fn symmetric_room(n_cells: usize) -> Result<Self> {
        Self::new(-1.0, 1.0, n_cells, BoundaryTag::Exit, BoundaryTag::Exit)
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn left(&self) -> BoundaryTag {
        self.left
    }

    pub fn right(&self) -> BoundaryTag {
        self.right
    }

    pub fn has_exit(&self) -> bool {
        self.left == BoundaryTag::Exit || self.right == BoundaryTag::Exit
    }

    pub fn center(&self, i: usize) -> f64 {
        self.x_min + (i as f64 + 0.5) * self.h
    }

    pub fn centers(&self) -> Vec<f64> {
        (0..self.n_cells).map(|i| self.center(i)).collect()
    }

    /// Index of the cell whose center is closest to `x` (clamped to the domain).
    pub fn nearest_cell(&self, x: f64) -> usize {
        let s = ((x - self.x_min) / self.h - 0.5).round();
        s.clamp(0.0, (self.n_cells - 1) as f64) as usize
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.x_min && x <= self.x_max
    }

    /// Cell averages of `f` computed with `samples` midpoint sub-samples per cell.
    pub fn cell_averages(&self, samples: usize, f: impl Fn(f64) -> f64) -> Vec<f64> {
        let samples = samples.max(1);
        let sub = self.h / samples as f64;
        (0..self.n_cells)
            .map(|i| {
                let left = self.x_min + i as f64 * self.h;
                (0..samples)
                    .map(|s| f(left + (s as f64 + 0.5) * sub))
                    .sum::<f64>()
                    / samples as f64
            })
            .collect()
    }

    /// Exact cell averages of the indicator of `[lo, hi]` scaled by `height`.
    pub fn indicator_averages(&self, lo: f64, hi: f64, height: f64) -> Vec<f64> {
        (0..self.n_cells)
            .map(|i| {
                let a = self.x_min + i as f64 * self.h;
                let b = a + self.h;
                let overlap = (b.min(hi) - a.max(lo)).max(0.0);
                height * overlap / self.h
            })
            .collect()
    }
}

/// Scalar value per cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    grid: Grid,
    values: Vec<f64>,
}

impl Field {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_cells() {
            return Err(SolverError::InvalidInput(format!(
                "field has {} values but grid has {} cells",
                values.len(),
                grid.n_cells()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(SolverError::InvalidInput(format!(
                "non-finite field value {} in cell {i}",
                values[i]
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn constant(grid: Grid, value: f64) -> Result<Self> {
        Self::new(grid, vec![value; grid.n_cells()])
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(grid, grid.centers().into_iter().map(f).collect())
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// `sum_i values_i * h`.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.h()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Time series of fields on a common grid with uniform spacing.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    grid: Grid,
    times: Vec<f64>,
    frames: Vec<Vec<f64>>,
}

impl Trajectory {
    /// Builds a trajectory with frames at `t_k = k * dt`.
    pub fn new(grid: Grid, dt: f64, frames: Vec<Vec<f64>>) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(SolverError::InvalidInput(format!(
                "trajectory spacing must be positive, got {dt}"
            )));
        }
        if frames.is_empty() {
            return Err(SolverError::InvalidInput("trajectory has no frames".into()));
        }
        if let Some(k) = frames.iter().position(|f| f.len() != grid.n_cells()) {
            return Err(SolverError::InvalidInput(format!(
                "frame {k} has {} values but grid has {} cells",
                frames[k].len(),
                grid.n_cells()
            )));
        }
        let times = (0..frames.len()).map(|k| k as f64 * dt).collect();
        Ok(Self {
            grid,
            times,
            frames,
        })
    }

    /// Same field repeated at every time `k * dt`, `k = 0..=steps`.
    pub fn constant_in_time(field: &Field, dt: f64, steps: usize) -> Result<Self> {
        Self::new(*field.grid(), dt, vec![field.values().to_vec(); steps + 1])
    }

    pub fn zeros(grid: Grid, dt: f64, steps: usize) -> Result<Self> {
        Self::new(grid, dt, vec![vec![0.0; grid.n_cells()]; steps + 1])
    }

    /// Samples `f(x, t)` at every cell center and frame time.
    pub fn from_fn(grid: Grid, dt: f64, steps: usize, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let centers = grid.centers();
        let frames = (0..=steps)
            .map(|k| {
                let t = k as f64 * dt;
                centers.iter().map(|&x| f(x, t)).collect()
            })
            .collect();
        Self::new(grid, dt, frames)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn dt(&self) -> f64 {
        if self.times.len() > 1 {
            self.times[1] - self.times[0]
        } else {
            0.0
        }
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Number of time steps, i.e. frames minus one.
    pub fn steps(&self) -> usize {
        self.frames.len() - 1
    }

    pub fn final_time(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn frame(&self, k: usize) -> &[f64] {
        &self.frames[k]
    }

    pub fn frame_mut(&mut self, k: usize) -> &mut [f64] {
        &mut self.frames[k]
    }

    pub fn frames(&self) -> &[Vec<f64>] {
        &self.frames
    }

    pub fn field(&self, k: usize) -> Field {
        Field {
            grid: self.grid,
            values: self.frames[k].clone(),
        }
    }

    /// Index of the frame closest in time to `t`.
    pub fn frame_index_at(&self, t: f64) -> usize {
        let dt = self.dt();
        if dt == 0.0 {
            return 0;
        }
        ((t / dt).round().max(0.0) as usize).min(self.steps())
    }

    pub fn frame_at(&self, t: f64) -> &[f64] {
        self.frame(self.frame_index_at(t))
    }

    /// Mass `sum_i rho_i h` of each frame.
    pub fn masses(&self) -> Vec<f64> {
        let h = self.grid.h();
        self.frames
            .iter()
            .map(|f| f.iter().sum::<f64>() * h)
            .collect()
    }

    /// Values at the cell nearest `x`, one per frame.
    pub fn probe(&self, x: f64) -> Vec<f64> {
        let i = self.grid.nearest_cell(x);
        self.frames.iter().map(|f| f[i]).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.frames
            .iter()
            .flat_map(|f| f.iter())
            .fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Checks that `other` lives on the same grid and time axis.
    pub fn is_aligned_with(&self, other: &Trajectory) -> bool {
        self.grid == other.grid
            && self.frames.len() == other.frames.len()
            && (self.dt() - other.dt()).abs() <= 1e-12 * self.dt().abs().max(1.0)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Trajectory {
        Trajectory {
            grid: self.grid,
            times: self.times.clone(),
            frames: self
                .frames
                .iter()
                .map(|fr| fr.iter().map(|&v| f(v)).collect())
                .collect(),
        }
    }

    /// `self + scale * other`, frame by frame.
    pub fn axpy(&self, scale: f64, other: &Trajectory) -> Trajectory {
        Trajectory {
            grid: self.grid,
            times: self.times.clone(),
            frames: self
                .frames
                .iter()
                .zip(&other.frames)
                .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + scale * y).collect())
                .collect(),
        }
    }
}
