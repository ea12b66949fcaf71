//! Parameters, grids, state containers, moments and norms.

mod grid;
pub mod io;
mod region;
mod state;

pub use grid::{Boundary, Grid, Point, MAX_DIM};
pub use region::{norm_family, norm_on, CutoffKind, NormKind, Region, Shape, TestCutoff};
pub use state::{moments, KineticState, MacroState};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Dimension, exponent and Knudsen parameter of one kinetic model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub n: usize,
    pub alpha: f64,
    pub epsilon: f64,
}

impl ModelParams {
    pub fn new(n: usize, alpha: f64, epsilon: f64) -> Result<Self> {
        let p = ModelParams { n, alpha, epsilon };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=MAX_DIM).contains(&self.n) {
            return Err(invalid("n", format!("{} not in 1..=3", self.n)));
        }
        if !self.alpha.is_finite() || self.alpha.abs() > 1.0 {
            return Err(invalid("alpha", format!("{} not in [-1, 1]", self.alpha)));
        }
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return Err(invalid("epsilon", format!("{} must be positive", self.epsilon)));
        }
        Ok(())
    }

    /// Number of velocities, 2n.
    pub fn ncomp(&self) -> usize {
        2 * self.n
    }

    /// Axis and sign of velocity `i` (0-based): `i < n` is `+e_i`, `i >= n` is `-e_{i-n}`.
    pub fn velocity(&self, i: usize) -> (usize, i8) {
        velocity(self.n, i)
    }
}

pub fn velocity(n: usize, i: usize) -> (usize, i8) {
    debug_assert!(i < 2 * n);
    if i < n {
        (i, 1)
    } else {
        (i - n, -1)
    }
}
