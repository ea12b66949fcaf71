//! Quantitative checks on completed runs: contraction, ordering, current and
//! entropy functionals, Fick's-law residual, ε sweeps and barrier audits.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::barriers::{psi_eval, BarrierSpec};
use crate::error::{Error, Result};
use crate::interaction::RateSpec;
use crate::kinetic::KineticRun;
use crate::limit::LimitRun;
use crate::model::{norm_on, KineticState, ModelParams, NormKind, Region, TestCutoff};

fn same_grid(u: &KineticState, v: &KineticState) -> Result<()> {
    if u.grid() != v.grid() || u.ncomp() != v.ncomp() {
        return Err(Error::GridMismatch);
    }
    Ok(())
}

/// Σ_i ∫ (u_i − v_i)⁺ dx.
pub fn positive_part_l1(u: &KineticState, v: &KineticState) -> Result<f64> {
    same_grid(u, v)?;
    let s: f64 = u.data().iter().zip(v.data()).map(|(a, b)| (a - b).max(0.0)).sum();
    Ok(s * u.grid().cell_volume())
}

/// Smallest v_i − u_i over cells and components, with the cell and component where it occurs.
pub fn ordering_margin(u: &KineticState, v: &KineticState) -> Result<(f64, Witness)> {
    same_grid(u, v)?;
    let m = u.ncomp();
    let (idx, margin) = u
        .data()
        .iter()
        .zip(v.data())
        .map(|(a, b)| b - a)
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (k, d)| if d < acc.1 { (k, d) } else { acc });
    Ok((margin, Witness { cell: Some(idx / m), component: Some(idx % m), t: Some(u.t()) }))
}

/// Contraction series Σ_i ∫ (u_i − v_i)⁺ at the common snapshot times of two runs.
pub fn contraction_series(u: &KineticRun, v: &KineticRun) -> Result<Vec<(f64, f64)>> {
    paired(u, v)?.into_iter().map(|(a, b)| Ok((a.t(), positive_part_l1(a, b)?))).collect()
}

/// Ordering margin series min(v_i − u_i) at the common snapshot times.
pub fn ordering_series(u: &KineticRun, v: &KineticRun) -> Result<Vec<(f64, f64)>> {
    paired(u, v)?.into_iter().map(|(a, b)| Ok((a.t(), ordering_margin(a, b)?.0))).collect()
}

fn paired<'a>(u: &'a KineticRun, v: &'a KineticRun) -> Result<Vec<(&'a KineticState, &'a KineticState)>> {
    if !times_match(&u.times(), &v.times()) {
        return Err(Error::ScheduleMismatch);
    }
    Ok(u.snapshots.iter().zip(&v.snapshots).collect())
}

fn times_match(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= 1e-12 * x.abs().max(1.0))
}

/// ∬ Σ_{i,j} J_{i,j}² φ² and its k²-weighted variant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluxL2 {
    pub plain: f64,
    pub weighted: f64,
}

/// Trapezoid in time over the snapshots, midpoint sum in space.
pub fn flux_l2(run: &KineticRun, phi: &TestCutoff) -> Result<FluxL2> {
    let w = phi.sample(run.snapshots[0].grid())?;
    flux_l2_with(run, &w)
}

/// flux_l2 with the cutoff given as cell values.
pub fn flux_l2_with(run: &KineticRun, w: &[f64]) -> Result<FluxL2> {
    if run.snapshots.len() < 2 {
        return Err(crate::error::invalid("run", "flux_l2 needs at least two snapshots"));
    }
    let grid = run.snapshots[0].grid();
    if w.len() != grid.len() {
        return Err(Error::GridMismatch);
    }
    let eps = run.params.epsilon;
    let m = run.params.ncomp();
    let per_snapshot: Vec<(f64, f64)> = run
        .snapshots
        .par_iter()
        .map(|s| {
            let mut acc = (0.0, 0.0);
            for (k, wk) in w.iter().enumerate() {
                if *wk == 0.0 {
                    continue;
                }
                let u = s.cell(k);
                let w2 = wk * wk;
                for i in 0..m {
                    for j in 0..m {
                        if i == j {
                            continue;
                        }
                        let jij = (u[i] - u[j]) / eps;
                        let kk = run.rate.local_rate(u, i, j)?;
                        acc.0 += jij * jij * w2;
                        acc.1 += (kk * jij).powi(2) * w2;
                    }
                }
            }
            Ok((acc.0 * grid.cell_volume(), acc.1 * grid.cell_volume()))
        })
        .collect::<Result<_>>()?;
    let times = run.times();
    let mut out = FluxL2 { plain: 0.0, weighted: 0.0 };
    for k in 1..times.len() {
        let h = times[k] - times[k - 1];
        out.plain += 0.5 * h * (per_snapshot[k].0 + per_snapshot[k - 1].0);
        out.weighted += 0.5 * h * (per_snapshot[k].1 + per_snapshot[k - 1].1);
    }
    Ok(out)
}

/// Entropy ∫ Σ_i log(u_i) φ² at every snapshot; reported, never asserted.
pub fn entropy_series(run: &KineticRun, phi: &TestCutoff) -> Result<Vec<(f64, f64)>> {
    let grid = run.snapshots[0].grid();
    let w = phi.sample(grid)?;
    run.snapshots
        .iter()
        .map(|s| {
            let mut acc = 0.0;
            for (k, wk) in w.iter().enumerate() {
                if *wk != 0.0 {
                    for &u in s.cell(k) {
                        if !(u > 0.0) {
                            return Err(Error::NonPositive { location: format!("cell {k}, t = {}", s.t()), value: u });
                        }
                        acc += u.ln() * wk * wk;
                    }
                }
            }
            Ok((s.t(), acc * grid.cell_volume()))
        })
        .collect()
}

/// Per-axis residual (1/n)∂_iρ + k(ρ/2n, ρ/2n) J_i and its L² norm on a region.
#[derive(Debug, Clone, PartialEq)]
pub struct FicksResidual {
    pub fields: Vec<Vec<f64>>,
    pub l2: Vec<f64>,
}

impl FicksResidual {
    pub fn total_l2(&self) -> f64 {
        self.l2.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

pub fn ficks_residual(state: &KineticState, params: &ModelParams, rate: &RateSpec, region: &Region) -> Result<FicksResidual> {
    let grid = state.grid();
    let n = params.n;
    if grid.dim() != n {
        return Err(Error::GridMismatch);
    }
    if let Some((k, &v)) = state.data().iter().enumerate().find(|(_, &v)| !(v > 0.0)) {
        return Err(Error::NonPositive { location: format!("cell {}", k / (2 * n)), value: v });
    }
    let rho = state.rho();
    let h = grid.dx();
    let eps = params.epsilon;
    let mut fields = vec![vec![0.0; grid.len()]; n];
    for k in 0..grid.len() {
        let u = state.cell(k);
        let keq = rate.equilibrium_rate(rho[k], n)?;
        for (axis, f) in fields.iter_mut().enumerate() {
            let grad = match (grid.shift(k, axis, -1), grid.shift(k, axis, 1)) {
                (Some(l), Some(r)) => (rho[r] - rho[l]) / (2.0 * h),
                (None, Some(r)) => (rho[r] - rho[k]) / h,
                (Some(l), None) => (rho[k] - rho[l]) / h,
                (None, None) => 0.0,
            };
            let current = (u[axis] - u[axis + n]) / eps;
            f[k] = grad / n as f64 + keq * current;
        }
    }
    let l2 = fields.iter().map(|f| norm_on(f, grid, region, NormKind::L2)).collect::<Result<_>>()?;
    Ok(FicksResidual { fields, l2 })
}

/// Σ_i ∫ u_i dx.
pub fn mass(state: &KineticState) -> f64 {
    state.mass()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub cell: Option<usize>,
    pub component: Option<usize>,
    pub t: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    /// How `value` is compared with `tolerance`, e.g. "<=" or ">=".
    pub comparison: String,
    pub tolerance: f64,
    pub witness: Witness,
}

impl Verdict {
    pub fn at_most(name: impl Into<String>, value: f64, tolerance: f64, witness: Witness) -> Self {
        Verdict { name: name.into(), passed: value <= tolerance, value, comparison: "<=".into(), tolerance, witness }
    }

    pub fn at_least(name: impl Into<String>, value: f64, tolerance: f64, witness: Witness) -> Self {
        Verdict { name: name.into(), passed: value >= tolerance, value, comparison: ">=".into(), tolerance, witness }
    }
}

/// One row of an ε sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub epsilon: f64,
    /// max over snapshots of Σ_i ‖u_i − ρ_lim/2n‖_{L¹(K)}.
    pub error: f64,
    pub error_time: f64,
    /// max over snapshots and i of ‖u_i − ρ^ε/2n‖_{L¹(K)}.
    pub isotropy_gap: f64,
    /// Empirical order log(e_prev/e)/log(ε_prev/ε); absent on the first row.
    pub rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    /// Largest ‖ρ_lim‖_{L¹(K)} over the snapshots, for normalizing errors.
    pub limit_l1: f64,
    pub min_limit_l1: f64,
    pub error_decreasing: bool,
    pub isotropy_decreasing: bool,
}

impl SweepTable {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epsilon,error,error_time,isotropy_gap,rate\n");
        for r in &self.rows {
            let rate = r.rate.map(|v| format!("{v:e}")).unwrap_or_default();
            s.push_str(&format!("{:e},{:e},{:e},{:e},{}\n", r.epsilon, r.error, r.error_time, r.isotropy_gap, rate));
        }
        s
    }
}

/// Compares kinetic runs (any ε order; rows are sorted by decreasing ε) with a limit run on K.
pub fn convergence_report(runs: &[&KineticRun], limit: &LimitRun, region: &Region) -> Result<SweepTable> {
    let grid = &limit.grid;
    let times = limit.times();
    let cells = region.cells(grid)?;
    let vol = grid.cell_volume();
    let limit_norms: Vec<f64> = limit.snapshots.iter().map(|s| cells.iter().map(|&k| s.rho[k].abs()).sum::<f64>() * vol).collect();
    let mut sorted: Vec<&KineticRun> = runs.to_vec();
    sorted.sort_by(|a, b| b.params.epsilon.total_cmp(&a.params.epsilon));
    let mut rows: Vec<SweepRow> = Vec::new();
    for run in sorted {
        if !times_match(&run.times(), &times) {
            return Err(Error::ScheduleMismatch);
        }
        if run.snapshots[0].grid() != grid {
            return Err(Error::GridMismatch);
        }
        let m = run.params.ncomp();
        let per: Vec<(f64, f64)> = run
            .snapshots
            .par_iter()
            .zip(&limit.snapshots)
            .map(|(s, l)| {
                let mut err = 0.0;
                let mut gaps = vec![0.0; m];
                for &k in &cells {
                    let u = s.cell(k);
                    let rho_eps: f64 = u.iter().sum();
                    for i in 0..m {
                        err += (u[i] - l.rho[k] / m as f64).abs();
                        gaps[i] += (u[i] - rho_eps / m as f64).abs();
                    }
                }
                (err * vol, gaps.into_iter().fold(0.0, f64::max) * vol)
            })
            .collect();
        let (idx, error) = per.iter().map(|p| p.0).enumerate().fold((0, f64::NEG_INFINITY), |a, (k, v)| if v > a.1 { (k, v) } else { a });
        let isotropy_gap = per.iter().map(|p| p.1).fold(0.0, f64::max);
        let rate = rows.last().map(|prev| (prev.error / error).ln() / (prev.epsilon / run.params.epsilon).ln());
        rows.push(SweepRow { epsilon: run.params.epsilon, error, error_time: times[idx], isotropy_gap, rate });
    }
    let strictly = |f: &dyn Fn(&SweepRow) -> f64| rows.windows(2).all(|w| f(&w[1]) < f(&w[0]));
    Ok(SweepTable {
        error_decreasing: strictly(&|r| r.error),
        isotropy_decreasing: strictly(&|r| r.isotropy_gap),
        limit_l1: limit_norms.iter().cloned().fold(0.0, f64::max),
        min_limit_l1: limit_norms.iter().cloned().fold(f64::INFINITY, f64::min),
        rows,
    })
}

/// Extremal barrier margins of a run on K.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarrierAudit {
    /// min over snapshots, K and i of u_i − Ψ/4n.
    pub lower_margin: Option<f64>,
    pub lower_witness: Witness,
    /// max over snapshots, K and i of u_i − 3Ψ̄/4n.
    pub upper_margin: Option<f64>,
    pub upper_witness: Witness,
}

const PRECONDITION_TOL: f64 = 1e-12;

/// Checks g_i ≥ (3/4n)Ψ(·,0) and g_i ≤ (1/4n)Ψ̄(·,0) on the whole grid, then
/// tracks the margins to Ψ/4n and 3Ψ̄/4n on K at every snapshot inside the region's time window.
pub fn barrier_bound_audit(
    run: &KineticRun,
    lower: Option<&BarrierSpec>,
    upper: Option<&BarrierSpec>,
    region: &Region,
) -> Result<BarrierAudit> {
    let s0 = &run.snapshots[0];
    let grid = s0.grid();
    let n = grid.dim();
    let m = 2 * n;
    let nf = n as f64;
    for b in lower.iter().chain(upper.iter()) {
        if b.n != n {
            return Err(Error::GridMismatch);
        }
    }
    let trace = |b: &BarrierSpec, t: f64| -> Result<Vec<f64>> {
        (0..grid.len()).into_par_iter().map(|k| psi_eval(b, &grid.center(k)[..n], t)).collect()
    };
    let check = |b: &BarrierSpec, frac: f64, below: bool| -> Result<()> {
        let psi = trace(b, s0.t())?;
        for k in 0..grid.len() {
            let bound = frac / nf * psi[k];
            for i in 0..m {
                let margin = if below { s0.value(k, i) - bound } else { bound - s0.value(k, i) };
                if margin < -PRECONDITION_TOL * bound.abs().max(1.0) {
                    return Err(Error::BarrierPrecondition { cell: k, component: i, margin });
                }
            }
        }
        Ok(())
    };
    if let Some(b) = lower {
        check(b, 0.75, true)?;
    }
    if let Some(b) = upper {
        check(b, 0.25, false)?;
    }
    let cells = region.cells(grid)?;
    let mut audit = BarrierAudit { lower_margin: None, lower_witness: Witness::default(), upper_margin: None, upper_witness: Witness::default() };
    for s in run.snapshots.iter().filter(|s| region.contains_time(s.t())) {
        if let Some(b) = lower {
            let psi = trace(b, s.t())?;
            for &k in &cells {
                for i in 0..m {
                    let d = s.value(k, i) - psi[k] / (4.0 * nf);
                    if audit.lower_margin.map_or(true, |v| d < v) {
                        audit.lower_margin = Some(d);
                        audit.lower_witness = Witness { cell: Some(k), component: Some(i), t: Some(s.t()) };
                    }
                }
            }
        }
        if let Some(b) = upper {
            let psi = trace(b, s.t())?;
            for &k in &cells {
                for i in 0..m {
                    let d = s.value(k, i) - 0.75 / nf * psi[k];
                    if audit.upper_margin.map_or(true, |v| d > v) {
                        audit.upper_margin = Some(d);
                        audit.upper_witness = Witness { cell: Some(k), component: Some(i), t: Some(s.t()) };
                    }
                }
            }
        }
    }
    Ok(audit)
}

/// Named time series, ε sweeps and verdicts of one experiment.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub series: BTreeMap<String, Vec<(f64, f64)>>,
    pub sweeps: BTreeMap<String, SweepTable>,
    pub verdicts: Vec<Verdict>,
}

impl DiagnosticsReport {
    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.passed)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Format(e.to_string()))
    }

    /// Long-format CSV: series,t,value.
    pub fn series_csv(&self) -> String {
        let mut s = String::from("series,t,value\n");
        for (name, pts) in &self.series {
            for (t, v) in pts {
                s.push_str(&format!("{name},{t:e},{v:e}\n"));
            }
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinetic::{advance, SolverOptions};
    use crate::model::{Boundary, CutoffKind, Grid};

    fn grid() -> Grid {
        Grid::new(&[8, 8], &[0.125], Boundary::Periodic).unwrap()
    }

    #[test]
    fn positive_part_examples() {
        let v = KineticState::from_fn(grid(), 0.0, |i, x| 1.0 + 0.1 * i as f64 + x[0]).unwrap();
        let u = KineticState::from_fn(grid(), 0.0, |i, x| 1.1 + 0.1 * i as f64 + x[0]).unwrap();
        assert_eq!(positive_part_l1(&v, &v).unwrap(), 0.0);
        assert_eq!(positive_part_l1(&v, &u).unwrap(), 0.0);
        // 2n components, excess 0.1, unit volume.
        assert!((positive_part_l1(&u, &v).unwrap() - 4.0 * 0.1).abs() < 1e-12);
        let (m, _) = ordering_margin(&v, &u).unwrap();
        assert!((m - 0.1).abs() < 1e-12);
        assert_eq!(ordering_margin(&v, &v).unwrap().0, 0.0);
    }

    #[test]
    fn crossing_margin_is_deepest_crossing() {
        let u = KineticState::from_fn(grid(), 0.0, |_, _| 1.0).unwrap();
        let v = KineticState::from_fn(grid(), 0.0, |i, x| if i == 2 && x[1] > 0.5 { 0.7 } else { 1.2 }).unwrap();
        let (m, w) = ordering_margin(&u, &v).unwrap();
        assert!((m + 0.3).abs() < 1e-15);
        assert_eq!(w.component, Some(2));
    }

    fn constant_run(eps: f64) -> KineticRun {
        let p = ModelParams::new(2, 0.5, eps).unwrap();
        let s = KineticState::uniform(grid(), 0.4).unwrap();
        let dt = eps * 0.125;
        advance(&s, &p, &RateSpec::power_sum(0.5), 4.0 * dt, &[2.0 * dt, 4.0 * dt], None, &SolverOptions::default()).unwrap()
    }

    #[test]
    fn constant_run_has_no_current() {
        let run = constant_run(0.1);
        let phi = TestCutoff::new(CutoffKind::SmoothBump, &[0.5, 0.5], 0.3).unwrap();
        let f = flux_l2(&run, &phi).unwrap();
        assert_eq!(f.plain, 0.0);
        assert_eq!(f.weighted, 0.0);
        let r = ficks_residual(run.last(), &run.params, &run.rate, &Region::central_half(&grid())).unwrap();
        assert!(r.total_l2() < 1e-14);
    }

    #[test]
    fn flux_is_quadratic_in_cutoff_and_unweighted_at_heat() {
        let p = ModelParams::new(2, 0.0, 0.1).unwrap();
        let s = KineticState::from_fn(grid(), 0.0, |i, x| {
            1.0 + 0.3 * (std::f64::consts::TAU * (x[0] + 0.25 * i as f64)).sin()
        })
        .unwrap();
        let dt = 0.1 * 0.125;
        let run = advance(&s, &p, &RateSpec::power_sum(0.0), 4.0 * dt, &[2.0 * dt, 4.0 * dt], None, &SolverOptions::default()).unwrap();
        let phi = TestCutoff::new(CutoffKind::SmoothBump, &[0.5, 0.5], 0.3).unwrap();
        let a = flux_l2(&run, &phi).unwrap();
        assert!(a.plain > 0.0);
        let doubled: Vec<f64> = phi.sample(&grid()).unwrap().iter().map(|v| 2.0 * v).collect();
        let b = flux_l2_with(&run, &doubled).unwrap();
        assert!((b.plain - 4.0 * a.plain).abs() < 1e-12 * b.plain);
        // k ≡ 1 at α = 0.
        assert!((a.plain - a.weighted).abs() < 1e-12 * a.plain);
    }

    #[test]
    fn limit_against_itself_is_zero() {
        use crate::limit::{advance_limit, LimitOptions};
        let g = grid();
        let rate = RateSpec::power_sum(0.0);
        let rho0 = g.sample(|x| 1.0 + 0.5 * (std::f64::consts::TAU * x[0]).cos());
        let lim = advance_limit(&rho0, &g, &rate, 0.02, &[0.01, 0.02], None, &LimitOptions::default()).unwrap();
        let fake: Vec<KineticState> = lim
            .snapshots
            .iter()
            .map(|s| {
                let mut st = KineticState::from_raw(g.clone(), s.rho.iter().flat_map(|r| [r / 4.0; 4]).collect(), 0.0).unwrap();
                st.set_t(s.t);
                st
            })
            .collect();
        let run = KineticRun {
            params: ModelParams::new(2, 0.0, 0.1).unwrap(),
            rate,
            dt: 0.01,
            final_state: fake.last().unwrap().clone(),
            snapshots: fake,
            log: vec![],
            warnings: vec![],
        };
        let table = convergence_report(&[&run], &lim, &Region::central_half(&g)).unwrap();
        assert!(table.rows[0].error < 1e-15);
        assert!(table.rows[0].isotropy_gap < 1e-15);
    }

    #[test]
    fn report_serializes() {
        let mut r = DiagnosticsReport::default();
        r.series.insert("mass".into(), vec![(0.0, 1.0), (0.1, 1.0)]);
        r.verdicts.push(Verdict::at_most("drift", 0.0, 1e-12, Witness::default()));
        assert!(r.passed());
        assert!(r.to_json().unwrap().contains("\"drift\""));
        assert_eq!(r.series_csv().lines().count(), 3);
    }
}
