use crate::error::{Error, Result};

use super::{Grid, ModelParams};

/// The 2n velocity densities on one grid at one time.
///
/// Storage is cell-major: the 2n values of a cell are contiguous, which keeps
/// the per-cell collision solve local.
#[derive(Debug, Clone, PartialEq)]
pub struct KineticState {
    grid: Grid,
    data: Vec<f64>,
    t: f64,
}

impl KineticState {
    pub fn from_fields(grid: Grid, fields: &[Vec<f64>], t: f64) -> Result<Self> {
        let m = 2 * grid.dim();
        if fields.len() != m || fields.iter().any(|f| f.len() != grid.len()) {
            return Err(Error::GridMismatch);
        }
        let mut data = vec![0.0; m * grid.len()];
        for (i, f) in fields.iter().enumerate() {
            for (k, &v) in f.iter().enumerate() {
                data[k * m + i] = v;
            }
        }
        Self::from_raw(grid, data, t)
    }

    /// Cell-major data, `data[cell * 2n + component]`.
    pub fn from_raw(grid: Grid, data: Vec<f64>, t: f64) -> Result<Self> {
        let m = 2 * grid.dim();
        if data.len() != m * grid.len() {
            return Err(Error::GridMismatch);
        }
        if let Some(pos) = data.iter().position(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::NegativeDensity { cell: pos / m, component: pos % m, value: data[pos] });
        }
        Ok(KineticState { grid, data, t })
    }

    pub fn from_fn(grid: Grid, t: f64, f: impl Fn(usize, &[f64]) -> f64) -> Result<Self> {
        let n = grid.dim();
        let m = 2 * n;
        let mut data = Vec::with_capacity(m * grid.len());
        for k in 0..grid.len() {
            let x = grid.center(k);
            data.extend((0..m).map(|i| f(i, &x[..n])));
        }
        Self::from_raw(grid, data, t)
    }

    pub fn uniform(grid: Grid, value: f64) -> Result<Self> {
        Self::from_fn(grid, 0.0, |_, _| value)
    }

    pub(crate) fn from_raw_unchecked(grid: Grid, data: Vec<f64>, t: f64) -> Self {
        KineticState { grid, data, t }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub(crate) fn set_t(&mut self, t: f64) {
        self.t = t;
    }

    pub fn ncomp(&self) -> usize {
        2 * self.grid.dim()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn cell(&self, k: usize) -> &[f64] {
        let m = self.ncomp();
        &self.data[k * m..(k + 1) * m]
    }

    pub fn value(&self, k: usize, i: usize) -> f64 {
        self.data[k * self.ncomp() + i]
    }

    pub fn field(&self, i: usize) -> Vec<f64> {
        self.data.iter().skip(i).step_by(self.ncomp()).copied().collect()
    }

    pub fn fields(&self) -> Vec<Vec<f64>> {
        (0..self.ncomp()).map(|i| self.field(i)).collect()
    }

    /// Pointwise total density.
    pub fn rho(&self) -> Vec<f64> {
        self.data.chunks(self.ncomp()).map(|c| c.iter().sum()).collect()
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Riemann sum of ρ over the whole grid.
    pub fn mass(&self) -> f64 {
        self.data.iter().sum::<f64>() * self.grid.cell_volume()
    }
}

/// Macroscopic moments of a kinetic state.
#[derive(Debug, Clone, PartialEq)]
pub struct MacroState {
    pub n: usize,
    /// ρ = Σ u_i.
    pub rho: Vec<f64>,
    /// ρ_i = u_i + u_{i+n}.
    pub rho_pair: Vec<Vec<f64>>,
    /// J_i = (u_i − u_{i+n})/ε.
    pub current: Vec<Vec<f64>>,
    pair_current: Vec<Vec<f64>>,
}

impl MacroState {
    /// J_{i,j} = (u_i − u_j)/ε for 0-based velocity indices.
    pub fn pair_current(&self, i: usize, j: usize) -> &[f64] {
        &self.pair_current[i * 2 * self.n + j]
    }
}

pub fn moments(state: &KineticState, params: &ModelParams) -> Result<MacroState> {
    let n = params.n;
    if state.grid().dim() != n {
        return Err(Error::GridMismatch);
    }
    let m = 2 * n;
    let eps = params.epsilon;
    let rho = state.rho();
    let rho_pair = (0..n)
        .map(|i| state.data.chunks(m).map(|c| c[i] + c[i + n]).collect())
        .collect();
    let current = (0..n)
        .map(|i| state.data.chunks(m).map(|c| (c[i] - c[i + n]) / eps).collect())
        .collect();
    let mut pair_current = Vec::with_capacity(m * m);
    for i in 0..m {
        for j in 0..m {
            pair_current.push(state.data.chunks(m).map(|c| (c[i] - c[j]) / eps).collect());
        }
    }
    Ok(MacroState { n, rho, rho_pair, current, pair_current })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Boundary;
    use proptest::prelude::*;

    fn single(n: usize, u: &[f64], eps: f64) -> MacroState {
        let grid = Grid::new(&vec![4; n], &[1.0], Boundary::Periodic).unwrap();
        let state = KineticState::from_fn(grid, 0.0, |i, _| u[i]).unwrap();
        moments(&state, &ModelParams::new(n, 0.0, eps).unwrap()).unwrap()
    }

    #[test]
    fn one_dimensional_moments() {
        let m = single(1, &[0.6, 0.4], 0.1);
        assert!((m.rho[0] - 1.0).abs() < 1e-15);
        assert!((m.current[0][0] - 2.0).abs() < 1e-12);
        assert!((m.pair_current(0, 1)[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn two_dimensional_moments() {
        let m = single(2, &[1.0, 2.0, 3.0, 4.0], 0.5);
        assert_eq!(m.rho[0], 10.0);
        assert_eq!(m.rho_pair[0][0], 4.0);
        assert_eq!(m.current[0][0], -4.0);
        assert_eq!(m.pair_current(0, 1)[0], -2.0);
    }

    #[test]
    fn equal_components_have_no_current() {
        let m = single(3, &[0.3; 6], 0.2);
        assert!((m.rho[0] - 1.8).abs() < 1e-15);
        assert!(m.current.iter().all(|f| f.iter().all(|&v| v == 0.0)));
        for i in 0..6 {
            for j in 0..6 {
                assert!(m.pair_current(i, j).iter().all(|&v| v == 0.0));
            }
        }
    }

    #[test]
    fn rejects_negative_density() {
        let grid = Grid::new(&[4], &[1.0], Boundary::Periodic).unwrap();
        assert!(KineticState::from_fn(grid, 0.0, |i, _| if i == 0 { -1.0 } else { 1.0 }).is_err());
    }

    proptest! {
        #[test]
        fn reconstruction_and_antisymmetry(
            u in prop::collection::vec(0.0f64..10.0, 4),
            eps in 0.01f64..1.0,
        ) {
            let m = single(2, &u, eps);
            for i in 0..2 {
                let back = (m.rho_pair[i][0] + eps * m.current[i][0]) / 2.0;
                prop_assert!((back - u[i]).abs() <= 1e-14 * (1.0 + u[i]));
            }
            for i in 0..4 {
                prop_assert_eq!(m.pair_current(i, i)[0], 0.0);
                for j in 0..4 {
                    prop_assert_eq!(m.pair_current(i, j)[0], -m.pair_current(j, i)[0]);
                }
            }
            let sum: f64 = m.rho_pair.iter().map(|f| f[0]).sum();
            prop_assert!((sum - m.rho[0]).abs() <= 1e-14 * m.rho[0].max(1.0));
        }
    }
}
