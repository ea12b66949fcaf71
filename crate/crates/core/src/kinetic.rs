//! Lattice streaming plus per-cell backward-Euler collision.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::interaction::RateSpec;
use crate::model::{velocity, Boundary, Grid, KineticState, ModelParams, Region};

const MAX_COMP: usize = 6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    pub newton_tol: f64,
    pub max_newton: usize,
    pub max_halvings: u32,
    /// Lower clamp applied to densities before the collision solve when α < 0.
    pub floor: f64,
    /// Region watched by the domain-of-dependence guard; defaults to the central half box.
    pub region_of_interest: Option<Region>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { newton_tol: 1e-12, max_newton: 50, max_halvings: 20, floor: 1e-12, region_of_interest: None }
    }
}

/// Ghost values for frozen far-field boundaries.
///
/// Layer `i` is the face upwind of velocity `i`: the low face of axis `i` for
/// `i < n`, the high face of axis `i − n` otherwise. Entries are stored at the
/// index of the adjacent interior cell.
#[derive(Debug, Clone, PartialEq)]
pub struct FarField {
    layers: Vec<Vec<f64>>,
}

impl FarField {
    /// `f(layer, x)` is evaluated at the ghost cell centers of each layer.
    pub fn new(grid: &Grid, f: impl Fn(usize, &[f64]) -> f64) -> Self {
        let n = grid.dim();
        let mut layers = vec![vec![0.0; grid.len()]; 2 * n];
        for (i, layer) in layers.iter_mut().enumerate() {
            let (axis, sign) = velocity(n, i);
            let face = if sign > 0 { 0 } else { grid.cells()[axis] - 1 };
            for k in 0..grid.len() {
                if grid.axis_index(k, axis) == face {
                    let mut x = grid.center(k);
                    x[axis] -= sign as f64 * grid.dx();
                    layer[k] = f(i, &x[..n]);
                }
            }
        }
        FarField { layers }
    }

    /// Ghosts for a kinetic run: each layer holds its own component.
    pub fn from_state_fn(grid: &Grid, g: impl Fn(usize, &[f64]) -> f64) -> Self {
        Self::new(grid, g)
    }

    /// Ghosts for a scalar field: every layer holds the same profile.
    pub fn scalar(grid: &Grid, rho: impl Fn(&[f64]) -> f64) -> Self {
        Self::new(grid, |_, x| rho(x))
    }

    pub fn ghost(&self, layer: usize, cell: usize) -> f64 {
        self.layers[layer][cell]
    }
}

/// Shifts every u_i one cell along its velocity.
pub fn stream_step(state: &KineticState, far: Option<&FarField>) -> Result<KineticState> {
    let grid = state.grid();
    if grid.boundary() == Boundary::FrozenFarField && far.is_none() {
        return Err(invalid("far_field", "frozen boundary needs ghost values"));
    }
    let n = grid.dim();
    let m = 2 * n;
    let src = state.data();
    let mut out = vec![0.0; src.len()];
    out.par_chunks_mut(m).enumerate().for_each(|(k, cell)| {
        for (i, slot) in cell.iter_mut().enumerate() {
            let (axis, sign) = velocity(n, i);
            *slot = match grid.shift(k, axis, -(sign as isize)) {
                Some(j) => src[j * m + i],
                None => far.expect("checked above").ghost(i, k),
            };
        }
    });
    Ok(KineticState::from_raw_unchecked(grid.clone(), out, state.t()))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CollideStats {
    pub newton_iters_max: usize,
    pub clips: usize,
    pub halvings_max: u32,
}

/// Solves u⁺ = u + (dt/(2nε²))·A(u⁺) in every cell.
pub fn collide_step(
    state: &KineticState,
    params: &ModelParams,
    rate: &RateSpec,
    dt: f64,
    opts: &SolverOptions,
) -> Result<(KineticState, CollideStats)> {
    if !(dt > 0.0) {
        return Err(invalid("dt", format!("{dt} must be positive")));
    }
    let m = params.ncomp();
    if state.ncomp() != m {
        return Err(Error::GridMismatch);
    }
    let h = dt / (m as f64 * params.epsilon * params.epsilon);
    let floor_active = rate.alpha < 0.0;
    let mut out = state.data().to_vec();
    let stats: Vec<Result<CollideStats>> = out
        .par_chunks_mut(m)
        .enumerate()
        .map(|(k, cell)| {
            let mut clips = 0;
            if floor_active {
                for v in cell.iter_mut() {
                    if *v < opts.floor {
                        *v = opts.floor;
                        clips += 1;
                    }
                }
            }
            let mut u0 = [0.0; MAX_COMP];
            u0[..m].copy_from_slice(cell);
            let mut solver = CellSolver { rate, opts, iters_max: 0, halvings_max: 0 };
            let w = solver.relax(&u0[..m], h, 0).map_err(|(residual, halvings)| Error::NewtonFailure {
                cell: k,
                halvings,
                residual,
                state: cell.to_vec(),
            })?;
            cell.copy_from_slice(&w[..m]);
            Ok(CollideStats { newton_iters_max: solver.iters_max, clips, halvings_max: solver.halvings_max })
        })
        .collect();
    let mut total = CollideStats::default();
    for s in stats {
        let s = s?;
        total.newton_iters_max = total.newton_iters_max.max(s.newton_iters_max);
        total.clips += s.clips;
        total.halvings_max = total.halvings_max.max(s.halvings_max);
    }
    Ok((KineticState::from_raw_unchecked(state.grid().clone(), out, state.t()), total))
}

/// Relaxes a single cell over `dt` with `substeps` equal backward-Euler steps.
pub fn relax_cell(
    u: &[f64],
    params: &ModelParams,
    rate: &RateSpec,
    dt: f64,
    substeps: usize,
    opts: &SolverOptions,
) -> Result<Vec<f64>> {
    let m = params.ncomp();
    if u.len() != m || substeps == 0 {
        return Err(invalid("relax_cell", "state length must be 2n and substeps positive"));
    }
    rate.collision_map(u)?;
    let h = dt / substeps as f64 / (m as f64 * params.epsilon * params.epsilon);
    let mut w = [0.0; MAX_COMP];
    w[..m].copy_from_slice(u);
    let mut solver = CellSolver { rate, opts, iters_max: 0, halvings_max: 0 };
    for _ in 0..substeps {
        w = solver.relax(&w[..m], h, 0).map_err(|(residual, halvings)| Error::NewtonFailure {
            cell: 0,
            halvings,
            residual,
            state: u.to_vec(),
        })?;
    }
    Ok(w[..m].to_vec())
}

struct CellSolver<'a> {
    rate: &'a RateSpec,
    opts: &'a SolverOptions,
    iters_max: usize,
    halvings_max: u32,
}

impl CellSolver<'_> {
    /// Backward Euler over `h`, splitting into halves when Newton stalls.
    fn relax(&mut self, u0: &[f64], h: f64, depth: u32) -> Result<[f64; MAX_COMP], (f64, u32)> {
        self.halvings_max = self.halvings_max.max(depth);
        match self.newton(u0, h) {
            Ok(w) => Ok(w),
            Err(residual) if depth >= self.opts.max_halvings => Err((residual, depth)),
            Err(_) => {
                let mid = self.relax(u0, h / 2.0, depth + 1)?;
                let m = u0.len();
                self.relax(&mid[..m], h / 2.0, depth + 1)
            }
        }
    }

    fn residual(&self, u0: &[f64], w: &[f64], h: f64, f: &mut [f64]) -> f64 {
        let m = u0.len();
        let mut a = [0.0; MAX_COMP];
        self.rate.collision_unchecked(w, &mut a[..m]);
        let mut norm = 0.0f64;
        for i in 0..m {
            f[i] = w[i] - u0[i] - h * a[i];
            norm = norm.max(f[i].abs());
        }
        norm
    }

    fn newton(&mut self, u0: &[f64], h: f64) -> Result<[f64; MAX_COMP], f64> {
        let m = u0.len();
        let mass: f64 = u0.iter().sum();
        let mut w = [0.0; MAX_COMP];
        if mass == 0.0 {
            return Ok(w);
        }
        // Start from the linear relaxation with the rate frozen at the cell mean.
        let mean = mass / m as f64;
        let k = match self.rate.equilibrium_rate(mass, m / 2) {
            Ok(k) if k.is_finite() => k,
            _ => 1.0,
        };
        let r = h * m as f64 * k;
        for i in 0..m {
            w[i] = (u0[i] + r * mean) / (1.0 + r);
        }
        let scale = u0.iter().fold(1.0f64, |acc, &v| acc.max(v));
        let tol = self.opts.newton_tol * scale;
        let mut f = [0.0; MAX_COMP];
        let mut norm = self.residual(u0, &w[..m], h, &mut f);
        let mut jac = [0.0; MAX_COMP * MAX_COMP];
        for iter in 0..=self.opts.max_newton {
            if norm <= tol {
                self.iters_max = self.iters_max.max(iter);
                restore_mass(&mut w[..m], mass);
                return Ok(w);
            }
            if iter == self.opts.max_newton || !norm.is_finite() {
                break;
            }
            self.rate.jacobian_unchecked(&w[..m], &mut jac);
            for i in 0..m {
                for j in 0..m {
                    jac[i * m + j] = if i == j { 1.0 } else { 0.0 } - h * jac[i * m + j];
                }
            }
            let mut delta = [0.0; MAX_COMP];
            for i in 0..m {
                delta[i] = -f[i];
            }
            if !solve_dense(&mut jac[..m * m], &mut delta[..m], m) {
                return Err(norm);
            }
            let mut lambda = 1.0;
            let mut accepted = false;
            let mut trial = [0.0; MAX_COMP];
            let mut ft = [0.0; MAX_COMP];
            for _ in 0..40 {
                for i in 0..m {
                    trial[i] = w[i] + lambda * delta[i];
                }
                if trial[..m].iter().all(|&v| v > 0.0) {
                    let nt = self.residual(u0, &trial[..m], h, &mut ft);
                    if nt <= (1.0 - 1e-4 * lambda) * norm || nt <= tol {
                        w = trial;
                        f = ft;
                        norm = nt;
                        accepted = true;
                        break;
                    }
                }
                lambda *= 0.5;
            }
            if !accepted {
                return Err(norm);
            }
        }
        Err(norm)
    }
}

/// Removes the rounding-level mass defect left by the Newton iteration.
fn restore_mass(w: &mut [f64], mass: f64) {
    let defect = (mass - w.iter().sum::<f64>()) / w.len() as f64;
    if w.iter().all(|&v| v + defect >= 0.0) {
        w.iter_mut().for_each(|v| *v += defect);
    }
}

/// Gaussian elimination with partial pivoting; `a` is row-major and overwritten.
fn solve_dense(a: &mut [f64], b: &mut [f64], m: usize) -> bool {
    for col in 0..m {
        let piv = (col..m).max_by(|&p, &q| a[p * m + col].abs().total_cmp(&a[q * m + col].abs())).unwrap();
        if a[piv * m + col] == 0.0 || !a[piv * m + col].is_finite() {
            return false;
        }
        if piv != col {
            for j in 0..m {
                a.swap(piv * m + j, col * m + j);
            }
            b.swap(piv, col);
        }
        for row in col + 1..m {
            let factor = a[row * m + col] / a[col * m + col];
            for j in col..m {
                a[row * m + j] -= factor * a[col * m + j];
            }
            b[row] -= factor * b[col];
        }
    }
    for row in (0..m).rev() {
        let mut s = b[row];
        for j in row + 1..m {
            s -= a[row * m + j] * b[j];
        }
        b[row] = s / a[row * m + row];
    }
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub t: f64,
    pub newton_iters_max: usize,
    pub clips: usize,
    pub mass: f64,
    pub min_u: f64,
    pub max_u: f64,
}

#[derive(Debug, Clone)]
pub struct KineticRun {
    pub params: ModelParams,
    pub rate: RateSpec,
    pub dt: f64,
    /// Starts with the initial state; later entries follow the schedule.
    pub snapshots: Vec<KineticState>,
    /// State after the last step, whether or not it was scheduled.
    pub final_state: KineticState,
    pub log: Vec<StepRecord>,
    pub warnings: Vec<String>,
}

impl KineticRun {
    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.t()).collect()
    }

    pub fn last(&self) -> &KineticState {
        &self.final_state
    }

    /// Largest relative change of total mass over the run.
    pub fn mass_drift(&self) -> f64 {
        let m0 = self.snapshots[0].mass();
        self.log.iter().map(|r| ((r.mass - m0) / m0).abs()).fold(0.0, f64::max)
    }

    /// Extreme values over every step, including the initial state.
    pub fn range(&self) -> (f64, f64) {
        let s0 = &self.snapshots[0];
        self.log.iter().fold((s0.min(), s0.max()), |(lo, hi), r| (lo.min(r.min_u), hi.max(r.max_u)))
    }

    /// Step log as CSV with columns step, t, newton_iters_max, mass, min_u, max_u.
    pub fn step_log_csv(&self) -> String {
        let mut out = String::from("step,t,newton_iters_max,mass,min_u,max_u\n");
        for r in &self.log {
            out.push_str(&format!("{},{:e},{},{:e},{:e},{:e}\n", r.step, r.t, r.newton_iters_max, r.mass, r.min_u, r.max_u));
        }
        out
    }
}

/// Step indices of the scheduled snapshot times; each must be a multiple of dt.
pub(crate) fn schedule_steps(schedule: &[f64], dt: f64, steps: usize) -> Result<Vec<usize>> {
    let mut out = Vec::with_capacity(schedule.len());
    let mut prev = 0usize;
    for &t in schedule {
        let k = (t / dt).round();
        if (k * dt - t).abs() > 1e-9 * dt.max(t.abs()) {
            return Err(Error::ScheduleMisaligned { t, dt });
        }
        let k = k as usize;
        if k == 0 && t == 0.0 {
            continue;
        }
        if k <= prev || k > steps {
            return Err(Error::ScheduleOrder);
        }
        out.push(k);
        prev = k;
    }
    Ok(out)
}

/// Number of whole steps of size dt that fit in t_end.
pub fn step_count(t_end: f64, dt: f64) -> usize {
    (t_end / dt * (1.0 + 1e-12)).floor() as usize
}

/// Integrates the kinetic system with Lie splitting (stream, then collide).
///
/// The run ends at the largest multiple of dt = ε·dx not exceeding `t_end`.
pub fn advance(
    initial: &KineticState,
    params: &ModelParams,
    rate: &RateSpec,
    t_end: f64,
    schedule: &[f64],
    far: Option<&FarField>,
    opts: &SolverOptions,
) -> Result<KineticRun> {
    params.validate()?;
    let grid = initial.grid();
    if grid.dim() != params.n {
        return Err(Error::GridMismatch);
    }
    if !(t_end >= 0.0) {
        return Err(invalid("t_end", format!("{t_end}")));
    }
    let dt = params.epsilon * grid.dx();
    let steps = step_count(t_end, dt);
    let marks = schedule_steps(schedule, dt, steps)?;

    let mut warnings = Vec::new();
    if grid.boundary() == Boundary::FrozenFarField {
        let roi = opts.region_of_interest.clone().unwrap_or_else(|| Region::central_half(grid));
        let reach = steps as f64 * dt / params.epsilon;
        let clearance = roi.clearance(grid);
        if clearance < reach {
            let msg = format!(
                "region of interest is {clearance:.4} from the boundary but signals travel {reach:.4} by t_end"
            );
            log::warn!("{msg}");
            warnings.push(msg);
        }
    }

    let mut state = initial.clone();
    let mut snapshots = vec![initial.clone()];
    let mut log = Vec::with_capacity(steps);
    let mut next_mark = 0;
    for step in 1..=steps {
        let streamed = stream_step(&state, far)?;
        let (mut collided, stats) = collide_step(&streamed, params, rate, dt, opts)?;
        let t = step as f64 * dt;
        collided.set_t(t);
        log.push(StepRecord {
            step,
            t,
            newton_iters_max: stats.newton_iters_max,
            clips: stats.clips,
            mass: collided.mass(),
            min_u: collided.min(),
            max_u: collided.max(),
        });
        state = collided;
        if next_mark < marks.len() && marks[next_mark] == step {
            snapshots.push(state.clone());
            next_mark += 1;
        }
    }
    Ok(KineticRun { params: *params, rate: *rate, dt, snapshots, final_state: state, log, warnings })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(cells: usize) -> Grid {
        Grid::new(&[cells], &[1.0], Boundary::Periodic).unwrap()
    }

    #[test]
    fn streaming_shifts_by_one_cell() {
        let g = line(8);
        let s = KineticState::from_fields(g, &[
            (0..8).map(|k| if k == 3 { 1.0 } else { 0.0 }).collect(),
            (0..8).map(|k| if k == 3 { 1.0 } else { 0.0 }).collect(),
        ], 0.0)
        .unwrap();
        let out = stream_step(&s, None).unwrap();
        assert_eq!(out.field(0)[4], 1.0);
        assert_eq!(out.field(0).iter().sum::<f64>(), 1.0);
        assert_eq!(out.field(1)[2], 1.0);
        assert_eq!(out.field(1).iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn streaming_wraps_and_reads_ghosts() {
        let s = KineticState::from_fn(line(4), 0.0, |i, x| if i == 0 { x[0] } else { 10.0 + x[0] }).unwrap();
        let out = stream_step(&s, None).unwrap();
        assert_eq!(out.field(0), vec![3.5, 0.5, 1.5, 2.5]);
        assert_eq!(out.field(1), vec![11.5, 12.5, 13.5, 10.5]);

        let g = Grid::new(&[4], &[1.0], Boundary::FrozenFarField).unwrap();
        let far = FarField::from_state_fn(&g, |i, x| if i == 0 { x[0] } else { 10.0 + x[0] });
        let s = KineticState::from_fn(g, 0.0, |i, x| if i == 0 { x[0] } else { 10.0 + x[0] }).unwrap();
        assert!(stream_step(&s, None).is_err());
        let out = stream_step(&s, Some(&far)).unwrap();
        assert_eq!(out.field(0), vec![-0.5, 0.5, 1.5, 2.5]);
        assert_eq!(out.field(1), vec![11.5, 12.5, 13.5, 14.5]);
    }

    #[test]
    fn streaming_constant_is_identity() {
        let g = Grid::new(&[6, 5], &[0.2], Boundary::Periodic).unwrap();
        let s = KineticState::uniform(g, 0.7).unwrap();
        assert_eq!(stream_step(&s, None).unwrap(), s);
    }

    #[test]
    fn backward_euler_linear_relaxation() {
        let params = ModelParams::new(1, 0.0, 0.1).unwrap();
        let w = relax_cell(&[1.0, 0.0], &params, &RateSpec::power_sum(0.0), 0.01, 1, &SolverOptions::default())
            .unwrap();
        assert!((w[0] - 0.75).abs() < 1e-12);
        assert!((w[1] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn equilibrium_is_fixed() {
        let params = ModelParams::new(2, -0.5, 0.01).unwrap();
        let g = Grid::new(&[4, 4], &[0.1], Boundary::Periodic).unwrap();
        let s = KineticState::uniform(g, 0.3).unwrap();
        let (out, _) = collide_step(&s, &params, &RateSpec::power_sum(-0.5), 10.0, &SolverOptions::default()).unwrap();
        assert_eq!(out, s);
    }

    #[test]
    fn stiff_cells_converge_and_conserve() {
        let opts = SolverOptions::default();
        for alpha in [-1.0, -0.5, 0.0, 0.5, 1.0] {
            let params = ModelParams::new(3, alpha, 1e-3).unwrap();
            let u = [1e-9, 50.0, 3.0, 0.2, 7.0, 1e-6];
            let w = relax_cell(&u, &params, &RateSpec::power_sum(alpha), 0.5, 1, &opts).unwrap();
            let m0: f64 = u.iter().sum();
            let m1: f64 = w.iter().sum();
            assert!(((m1 - m0) / m0).abs() < 1e-13, "alpha {alpha}");
            assert!(w.iter().all(|&v| v > 0.0));
        }
    }

    #[test]
    fn constant_data_stays_constant() {
        for alpha in [-1.0, 0.0, 0.5] {
            let params = ModelParams::new(2, alpha, 0.1).unwrap();
            let g = Grid::new(&[8, 8], &[0.125], Boundary::Periodic).unwrap();
            let s = KineticState::uniform(g, 0.4).unwrap();
            let run = advance(&s, &params, &RateSpec::power_sum(alpha), 0.1, &[], None, &SolverOptions::default())
                .unwrap();
            assert_eq!(run.last().data(), s.data());
        }
    }

    #[test]
    fn misaligned_schedule_rejected() {
        let params = ModelParams::new(1, 0.0, 0.1).unwrap();
        let s = KineticState::uniform(line(8), 1.0).unwrap();
        let err = advance(&s, &params, &RateSpec::power_sum(0.0), 1.0, &[0.15], None, &SolverOptions::default());
        assert!(matches!(err, Err(Error::ScheduleMisaligned { .. })));
        let err = advance(&s, &params, &RateSpec::power_sum(0.0), 1.0, &[0.5, 0.3], None, &SolverOptions::default());
        assert!(matches!(err, Err(Error::ScheduleOrder)));
    }

    #[test]
    fn far_field_guard_warns() {
        let params = ModelParams::new(1, 0.0, 0.1).unwrap();
        let g = Grid::centered(&[16], 0.25, Boundary::FrozenFarField).unwrap();
        let far = FarField::from_state_fn(&g, |_, _| 1.0);
        let s = KineticState::uniform(g, 1.0).unwrap();
        let run = advance(&s, &params, &RateSpec::power_sum(0.0), 0.2, &[], Some(&far), &SolverOptions::default())
            .unwrap();
        assert_eq!(run.warnings.len(), 1);
    }
}
