use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub const MAX_DIM: usize = 3;

/// Cell-center coordinates; only the first `n` entries are meaningful.
pub type Point = [f64; MAX_DIM];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    Periodic,
    /// Ghost cells hold the analytic initial profile for the whole run.
    FrozenFarField,
}

/// Uniform Cartesian cell-centered grid, row-major with axis 0 slowest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    cells: Vec<usize>,
    dx: f64,
    origin: Vec<f64>,
    boundary: Boundary,
}

impl Grid {
    /// `spacing` holds one value (broadcast) or one per axis; all must agree.
    pub fn new(cells: &[usize], spacing: &[f64], boundary: Boundary) -> Result<Self> {
        let n = cells.len();
        if !(1..=MAX_DIM).contains(&n) {
            return Err(invalid("cells", format!("{n} axes, expected 1..=3")));
        }
        if let Some(c) = cells.iter().find(|&&c| c < 4) {
            return Err(invalid("cells", format!("{c} cells on an axis, need at least 4")));
        }
        if spacing.len() != 1 && spacing.len() != n {
            return Err(invalid("dx", format!("{} spacings for {n} axes", spacing.len())));
        }
        let dx = spacing[0];
        if !(dx > 0.0) || !dx.is_finite() {
            return Err(invalid("dx", format!("{dx} must be positive")));
        }
        if spacing.iter().any(|&h| h != dx) {
            return Err(Error::NonuniformSpacing(spacing.to_vec()));
        }
        Ok(Grid { cells: cells.to_vec(), dx, origin: vec![0.0; n], boundary })
    }

    /// Grid whose domain is centered at the origin.
    pub fn centered(cells: &[usize], dx: f64, boundary: Boundary) -> Result<Self> {
        let g = Grid::new(cells, &[dx], boundary)?;
        let origin: Vec<f64> = cells.iter().map(|&c| -(c as f64) * dx / 2.0).collect();
        g.with_origin(&origin)
    }

    pub fn with_origin(mut self, origin: &[f64]) -> Result<Self> {
        if origin.len() != self.dim() || origin.iter().any(|o| !o.is_finite()) {
            return Err(invalid("origin", format!("{origin:?}")));
        }
        self.origin = origin.to_vec();
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.cells.len()
    }

    pub fn cells(&self) -> &[usize] {
        &self.cells
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    /// Lower corner of the domain.
    pub fn origin(&self) -> &[f64] {
        &self.origin
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn len(&self) -> usize {
        self.cells.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_volume(&self) -> f64 {
        self.dx.powi(self.dim() as i32)
    }

    pub fn length(&self, axis: usize) -> f64 {
        self.cells[axis] as f64 * self.dx
    }

    pub fn upper(&self, axis: usize) -> f64 {
        self.origin[axis] + self.length(axis)
    }

    pub fn volume(&self) -> f64 {
        (0..self.dim()).map(|a| self.length(a)).product()
    }

    pub fn stride(&self, axis: usize) -> usize {
        self.cells[axis + 1..].iter().product()
    }

    pub fn axis_index(&self, flat: usize, axis: usize) -> usize {
        (flat / self.stride(axis)) % self.cells[axis]
    }

    pub fn multi_index(&self, flat: usize) -> [usize; MAX_DIM] {
        let mut idx = [0; MAX_DIM];
        let mut rest = flat;
        for a in (0..self.dim()).rev() {
            idx[a] = rest % self.cells[a];
            rest /= self.cells[a];
        }
        idx
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.cells).fold(0, |acc, (&i, &c)| acc * c + i)
    }

    pub fn center(&self, flat: usize) -> Point {
        let idx = self.multi_index(flat);
        let mut x = [0.0; MAX_DIM];
        for a in 0..self.dim() {
            x[a] = self.origin[a] + (idx[a] as f64 + 0.5) * self.dx;
        }
        x
    }

    /// Neighbor `delta` cells along `axis`; `None` when it leaves a non-periodic domain.
    pub fn shift(&self, flat: usize, axis: usize, delta: isize) -> Option<usize> {
        let n = self.cells[axis] as isize;
        let i = self.axis_index(flat, axis) as isize;
        let j = i + delta;
        let j = if (0..n).contains(&j) {
            j
        } else if self.boundary == Boundary::Periodic {
            j.rem_euclid(n)
        } else {
            return None;
        };
        Some((flat as isize + (j - i) * self.stride(axis) as isize) as usize)
    }

    /// Samples `f` at every cell center.
    pub fn sample(&self, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
        let n = self.dim();
        (0..self.len()).map(|k| f(&self.center(k)[..n])).collect()
    }

    /// Distance from `x` to the nearest face of the domain.
    pub fn distance_to_boundary(&self, x: &[f64]) -> f64 {
        (0..self.dim())
            .map(|a| (x[a] - self.origin[a]).min(self.upper(a) - x[a]))
            .fold(f64::INFINITY, f64::min)
    }
}
