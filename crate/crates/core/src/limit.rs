//! Explicit finite-volume solver for ρ_t = ∇·(D(ρ)∇ρ).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::interaction::RateSpec;
use crate::kinetic::FarField;
use crate::model::{Boundary, Grid};

/// D(ρ) = 1/(n·k(ρ/2n, ρ/2n)); for the power-sum rate this is n^{α−1}ρ^{−α}.
pub fn diffusivity(rate: &RateSpec, n: usize, rho: f64) -> Result<f64> {
    if !(rho > 0.0) {
        return Err(Error::NonPositive { location: "diffusivity".into(), value: rho });
    }
    Ok(1.0 / (n as f64 * rate.equilibrium_rate(rho, n)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LimitOptions {
    /// dt = cfl·dx²/(2n·max D).
    pub cfl: f64,
    pub floor: f64,
    /// Smallest admissible dt relative to max(t_end, 1).
    pub min_dt_ratio: f64,
}

impl Default for LimitOptions {
    fn default() -> Self {
        LimitOptions { cfl: 0.45, floor: 1e-12, min_dt_ratio: 1e-12 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LimitSnapshot {
    pub t: f64,
    pub rho: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct LimitRun {
    pub n: usize,
    pub rate: RateSpec,
    pub grid: Grid,
    /// Starts with the initial field; later entries follow the schedule.
    pub snapshots: Vec<LimitSnapshot>,
    pub final_state: LimitSnapshot,
    pub dt_log: Vec<f64>,
}

impl LimitRun {
    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.t).collect()
    }

    pub fn mass(rho: &[f64], grid: &Grid) -> f64 {
        rho.iter().sum::<f64>() * grid.cell_volume()
    }
}

/// Integrates to `t_end`, landing exactly on every scheduled time.
pub fn advance_limit(
    initial: &[f64],
    grid: &Grid,
    rate: &RateSpec,
    t_end: f64,
    schedule: &[f64],
    far: Option<&FarField>,
    opts: &LimitOptions,
) -> Result<LimitRun> {
    let n = grid.dim();
    if initial.len() != grid.len() {
        return Err(Error::GridMismatch);
    }
    if let Some(k) = initial.iter().position(|&r| !(r >= opts.floor)) {
        return Err(Error::NonPositive { location: format!("initial rho at cell {k}"), value: initial[k] });
    }
    if grid.boundary() == Boundary::FrozenFarField && far.is_none() {
        return Err(invalid("far_field", "frozen boundary needs ghost values"));
    }
    if !(t_end >= 0.0) {
        return Err(invalid("t_end", format!("{t_end}")));
    }
    let mut stops: Vec<f64> = Vec::with_capacity(schedule.len() + 1);
    for &t in schedule {
        if t == 0.0 && stops.is_empty() {
            continue;
        }
        if !(t > stops.last().copied().unwrap_or(0.0)) || t > t_end {
            return Err(Error::ScheduleOrder);
        }
        stops.push(t);
    }
    let scheduled = stops.len();
    if stops.last().map_or(true, |&t| t < t_end) {
        stops.push(t_end);
    }

    let dx2 = grid.dx() * grid.dx();
    let min_dt = opts.min_dt_ratio * t_end.max(1.0);
    let ghost_d = match far {
        Some(f) if grid.boundary() == Boundary::FrozenFarField => {
            let mut max_d = 0.0f64;
            for layer in 0..2 * n {
                let (axis, sign) = crate::model::velocity(n, layer);
                let face = if sign > 0 { 0 } else { grid.cells()[axis] - 1 };
                for k in 0..grid.len() {
                    if grid.axis_index(k, axis) == face {
                        max_d = max_d.max(diffusivity(rate, n, f.ghost(layer, k))?);
                    }
                }
            }
            max_d
        }
        _ => 0.0,
    };

    let mut rho = initial.to_vec();
    let mut t = 0.0;
    let mut snapshots = vec![LimitSnapshot { t: 0.0, rho: rho.clone() }];
    let mut dt_log = Vec::new();
    for (s, &stop) in stops.iter().enumerate() {
        while t < stop {
            let d: Vec<f64> = rho.par_iter().map(|&r| diffusivity(rate, n, r)).collect::<Result<_>>()?;
            let max_d = d.iter().copied().fold(ghost_d, f64::max);
            let stable = opts.cfl * dx2 / (2.0 * n as f64 * max_d);
            if !(stable >= min_dt) {
                return Err(Error::TimeStepUnderflow { dt: stable, max_d });
            }
            let (dt, t_next) = if t + stable >= stop { (stop - t, stop) } else { (stable, t + stable) };
            let lam = dt / dx2;
            rho = (0..grid.len())
                .into_par_iter()
                .map(|k| {
                    let mut acc = 0.0;
                    for axis in 0..n {
                        for (delta, layer) in [(1isize, axis + n), (-1, axis)] {
                            let (r_nb, d_nb) = match grid.shift(k, axis, delta) {
                                Some(j) => (rho[j], d[j]),
                                None => {
                                    let g = far.expect("checked above").ghost(layer, k);
                                    (g, diffusivity(rate, n, g).unwrap_or(0.0))
                                }
                            };
                            acc += 0.5 * (d[k] + d_nb) * (r_nb - rho[k]);
                        }
                    }
                    rho[k] + lam * acc
                })
                .collect();
            dt_log.push(dt);
            t = t_next;
        }
        if s < scheduled {
            snapshots.push(LimitSnapshot { t, rho: rho.clone() });
        }
    }
    Ok(LimitRun {
        n,
        rate: *rate,
        grid: grid.clone(),
        snapshots,
        final_state: LimitSnapshot { t, rho },
        dt_log,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diffusivity_examples() {
        for rho in [0.1, 1.0, 7.0] {
            assert!((diffusivity(&RateSpec::power_sum(0.0), 3, rho).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        }
        assert!((diffusivity(&RateSpec::power_sum(1.0), 2, 2.0).unwrap() - 0.5).abs() < 1e-15);
        assert!((diffusivity(&RateSpec::power_sum(-1.0), 2, 0.5).unwrap() - 0.125).abs() < 1e-15);
        assert!(diffusivity(&RateSpec::power_sum(0.5), 2, 0.0).is_err());
    }

    #[test]
    fn constant_stays_constant() {
        let g = Grid::new(&[8, 8], &[0.1], Boundary::Periodic).unwrap();
        let run = advance_limit(&vec![0.8; 64], &g, &RateSpec::power_sum(0.5), 0.05, &[0.01, 0.05], None, &LimitOptions::default())
            .unwrap();
        assert_eq!(run.times(), vec![0.0, 0.01, 0.05]);
        assert!(run.final_state.rho.iter().all(|&r| r == 0.8));
    }

    #[test]
    fn periodic_mass_and_extrema() {
        let g = Grid::new(&[32, 32], &[1.0 / 32.0], Boundary::Periodic).unwrap();
        let rho0 = g.sample(|x| 1.0 + 0.5 * (6.2831853 * x[0]).sin() * (6.2831853 * x[1]).cos());
        for alpha in [-1.0, -0.5, 0.0, 0.5] {
            let run = advance_limit(&rho0, &g, &RateSpec::power_sum(alpha), 0.01, &[0.005, 0.01], None, &LimitOptions::default())
                .unwrap();
            let m0 = LimitRun::mass(&rho0, &g);
            let m1 = LimitRun::mass(&run.final_state.rho, &g);
            assert!(((m1 - m0) / m0).abs() < 1e-10);
            let mut lo = f64::MIN;
            let mut hi = f64::MAX;
            for s in &run.snapshots {
                let smin = s.rho.iter().copied().fold(f64::MAX, f64::min);
                let smax = s.rho.iter().copied().fold(f64::MIN, f64::max);
                assert!(smin >= lo - 1e-12 && smax <= hi + 1e-12);
                lo = smin;
                hi = smax;
            }
        }
    }

    #[test]
    fn underflow_guard() {
        let g = Grid::new(&[8], &[0.1], Boundary::Periodic).unwrap();
        let mut rho = vec![1.0; 8];
        rho[3] = 1e-12;
        let opts = LimitOptions { min_dt_ratio: 1e-6, ..Default::default() };
        let err = advance_limit(&rho, &g, &RateSpec::power_sum(1.0), 1.0, &[], None, &opts);
        assert!(matches!(err, Err(Error::TimeStepUnderflow { .. })));
    }
}
