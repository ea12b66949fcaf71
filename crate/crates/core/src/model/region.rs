use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

use super::Grid;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Shape {
    Ball { center: Vec<f64>, radius: f64 },
    Box { lo: Vec<f64>, hi: Vec<f64> },
}

/// A spatial set with a time window; cells belong to it when their center does.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub shape: Shape,
    #[serde(default)]
    pub t0: f64,
    #[serde(default = "infinity")]
    pub t1: f64,
}

fn infinity() -> f64 {
    f64::INFINITY
}

impl Region {
    pub fn ball(center: &[f64], radius: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(invalid("radius", format!("{radius} must be positive")));
        }
        Ok(Region { shape: Shape::Ball { center: center.to_vec(), radius }, t0: 0.0, t1: f64::INFINITY })
    }

    pub fn cube(lo: &[f64], hi: &[f64]) -> Result<Self> {
        if lo.len() != hi.len() || lo.iter().zip(hi).any(|(a, b)| !(a < b)) {
            return Err(invalid("box", format!("{lo:?} .. {hi:?}")));
        }
        Ok(Region { shape: Shape::Box { lo: lo.to_vec(), hi: hi.to_vec() }, t0: 0.0, t1: f64::INFINITY })
    }

    /// The centered box covering half of every axis of the domain.
    pub fn central_half(grid: &Grid) -> Self {
        let n = grid.dim();
        let lo: Vec<f64> = (0..n).map(|a| grid.origin()[a] + 0.25 * grid.length(a)).collect();
        let hi: Vec<f64> = (0..n).map(|a| grid.origin()[a] + 0.75 * grid.length(a)).collect();
        Region { shape: Shape::Box { lo, hi }, t0: 0.0, t1: f64::INFINITY }
    }

    pub fn whole(grid: &Grid) -> Self {
        let n = grid.dim();
        let lo = grid.origin().to_vec();
        let hi = (0..n).map(|a| grid.upper(a)).collect();
        Region { shape: Shape::Box { lo, hi }, t0: 0.0, t1: f64::INFINITY }
    }

    pub fn with_window(mut self, t0: f64, t1: f64) -> Result<Self> {
        if !(t0 <= t1) {
            return Err(invalid("window", format!("[{t0}, {t1}]")));
        }
        self.t0 = t0;
        self.t1 = t1;
        Ok(self)
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        match &self.shape {
            Shape::Ball { center, radius } => {
                let r2: f64 = center.iter().zip(x).map(|(c, v)| (v - c) * (v - c)).sum();
                r2 < radius * radius
            }
            Shape::Box { lo, hi } => lo.iter().zip(hi).zip(x).all(|((a, b), v)| a <= v && v <= b),
        }
    }

    pub fn contains_time(&self, t: f64) -> bool {
        self.t0 <= t && t <= self.t1
    }

    /// Smallest distance from the region to the domain boundary.
    pub fn clearance(&self, grid: &Grid) -> f64 {
        let n = grid.dim();
        match &self.shape {
            Shape::Ball { center, radius } => grid.distance_to_boundary(center) - radius,
            Shape::Box { lo, hi } => (0..n)
                .map(|a| (lo[a] - grid.origin()[a]).min(grid.upper(a) - hi[a]))
                .fold(f64::INFINITY, f64::min),
        }
    }

    pub fn cells(&self, grid: &Grid) -> Result<Vec<usize>> {
        let dims_ok = match &self.shape {
            Shape::Ball { center, .. } => center.len() == grid.dim(),
            Shape::Box { lo, .. } => lo.len() == grid.dim(),
        };
        if !dims_ok {
            return Err(Error::GridMismatch);
        }
        let n = grid.dim();
        let cells: Vec<usize> = (0..grid.len()).filter(|&k| self.contains(&grid.center(k)[..n])).collect();
        if cells.is_empty() {
            return Err(Error::EmptyRegion);
        }
        Ok(cells)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormKind {
    L1,
    L2,
    Linf,
}

/// Midpoint Riemann-sum norm of `field` over the cells of `region`.
pub fn norm_on(field: &[f64], grid: &Grid, region: &Region, kind: NormKind) -> Result<f64> {
    norm_family(&[field], grid, region, kind)
}

/// Norm of a family of fields: sum of L1 norms, root of summed squares, or overall max.
pub fn norm_family(fields: &[&[f64]], grid: &Grid, region: &Region, kind: NormKind) -> Result<f64> {
    if fields.iter().any(|f| f.len() != grid.len()) {
        return Err(Error::GridMismatch);
    }
    let cells = region.cells(grid)?;
    let vol = grid.cell_volume();
    let mut acc = 0.0;
    for f in fields {
        for &k in &cells {
            let v = f[k].abs();
            match kind {
                NormKind::L1 => acc += v,
                NormKind::L2 => acc += v * v,
                NormKind::Linf => acc = f64::max(acc, v),
            }
        }
    }
    Ok(match kind {
        NormKind::L1 => acc * vol,
        NormKind::L2 => (acc * vol).sqrt(),
        NormKind::Linf => acc,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CutoffKind {
    /// exp(1 − 1/(1 − r²)) in the scaled radius r.
    SmoothBump,
    /// Product of cos²(π s/2) over the scaled axis offsets s.
    TensorCosine,
}

/// Test function φ with 0 ≤ φ ≤ 1 supported in a ball or cube of the given radius.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestCutoff {
    pub kind: CutoffKind,
    pub center: Vec<f64>,
    pub radius: f64,
}

impl TestCutoff {
    pub fn new(kind: CutoffKind, center: &[f64], radius: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(invalid("radius", format!("{radius} must be positive")));
        }
        Ok(TestCutoff { kind, center: center.to_vec(), radius })
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self.kind {
            CutoffKind::SmoothBump => {
                let r2: f64 =
                    self.center.iter().zip(x).map(|(c, v)| (v - c) * (v - c)).sum::<f64>() / (self.radius * self.radius);
                if r2 >= 1.0 {
                    0.0
                } else {
                    (1.0 - 1.0 / (1.0 - r2)).exp()
                }
            }
            CutoffKind::TensorCosine => self
                .center
                .iter()
                .zip(x)
                .map(|(c, v)| {
                    let s = (v - c) / self.radius;
                    if s.abs() >= 1.0 {
                        0.0
                    } else {
                        (std::f64::consts::FRAC_PI_2 * s).cos().powi(2)
                    }
                })
                .product(),
        }
    }

    /// Samples φ on the grid; the support must fit inside the domain.
    pub fn sample(&self, grid: &Grid) -> Result<Vec<f64>> {
        if self.center.len() != grid.dim() {
            return Err(Error::GridMismatch);
        }
        let inside = (0..grid.dim()).all(|a| {
            self.center[a] - self.radius >= grid.origin()[a] && self.center[a] + self.radius <= grid.upper(a)
        });
        if !inside {
            return Err(invalid("cutoff", "support leaves the grid"));
        }
        Ok(grid.sample(|x| self.eval(x)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Boundary;
    use proptest::prelude::*;

    #[test]
    fn l2_of_two_cells() {
        let g = Grid::new(&[4], &[0.5], Boundary::Periodic).unwrap();
        let region = Region::cube(&[0.0], &[1.0]).unwrap();
        let v = norm_on(&[1.0, -2.0, 7.0, 7.0], &g, &region, NormKind::L2).unwrap();
        assert!((v - 2.5f64.sqrt()).abs() < 1e-15);
        assert!((v - 1.5811).abs() < 1e-4);
    }

    #[test]
    fn constant_field_l1_is_value_times_volume() {
        let g = Grid::new(&[10, 10], &[0.1], Boundary::Periodic).unwrap();
        let f = vec![3.0; g.len()];
        let v = norm_on(&f, &g, &Region::whole(&g), NormKind::L1).unwrap();
        assert!((v - 3.0).abs() < 1e-12);
        let zero = vec![0.0; g.len()];
        for kind in [NormKind::L1, NormKind::L2, NormKind::Linf] {
            assert_eq!(norm_on(&zero, &g, &Region::whole(&g), kind).unwrap(), 0.0);
        }
    }

    #[test]
    fn empty_region_is_an_error() {
        let g = Grid::new(&[8], &[0.1], Boundary::Periodic).unwrap();
        let r = Region::ball(&[5.0], 0.1).unwrap();
        assert_eq!(norm_on(&[0.0; 8], &g, &r, NormKind::L1), Err(Error::EmptyRegion));
    }

    #[test]
    fn cutoffs_are_bounded_and_supported() {
        let g = Grid::centered(&[32, 32], 0.1, Boundary::Periodic).unwrap();
        for kind in [CutoffKind::SmoothBump, CutoffKind::TensorCosine] {
            let phi = TestCutoff::new(kind, &[0.0, 0.0], 1.0).unwrap();
            assert_eq!(phi.eval(&[0.0, 0.0]), 1.0);
            assert_eq!(phi.eval(&[1.0, 1.0]), 0.0);
            let s = phi.sample(&g).unwrap();
            assert!(s.iter().all(|&v| (0.0..=1.0).contains(&v)));
            let outside = TestCutoff::new(kind, &[1.0, 0.0], 1.0).unwrap();
            assert!(outside.sample(&g).is_err());
        }
    }

    proptest! {
        #[test]
        fn norms_monotone_in_region(vals in prop::collection::vec(0.0f64..5.0, 16), r in 0.1f64..1.0) {
            let g = Grid::centered(&[16], 0.25, Boundary::Periodic).unwrap();
            let small = Region::ball(&[0.0], r).unwrap();
            let big = Region::ball(&[0.0], r + 0.5).unwrap();
            if let (Ok(a), Ok(b)) = (
                norm_on(&vals, &g, &small, NormKind::L1),
                norm_on(&vals, &g, &big, NormKind::L1),
            ) {
                prop_assert!(a <= b);
            }
        }
    }
}
