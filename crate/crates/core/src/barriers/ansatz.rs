//! The second-order profile ū_i = (Ψ + εA_i + ε²B_i)/2n and its kinetic residual.
//!
//! With g = (n/ρ)^α the coefficients are
//! A_i = −g D_{v_i}ρ and B_i = g ∂_i(g ∂_iρ) − (α/2ρ)(g ∂_iρ)²,
//! where ∂_i is the derivative along the axis of v_i.

use super::{norm_sq, BarrierCase, BarrierSpec};
use crate::error::{Error, Result};
use crate::interaction::RateSpec;
use crate::model::{velocity, Grid, KineticState, ModelParams};

/// Ψ and the expansion coefficients at one point. Vectors have 2n entries.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalCoeffs {
    pub psi: f64,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

/// Expansion coefficients on a grid, `a[i][cell]` and `b[i][cell]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpansionCoeffs {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
}

/// Closed-form coefficients of a barrier, using its exact radial derivatives.
pub fn expansion_at(spec: &BarrierSpec, x: &[f64], t: f64) -> Result<LocalCoeffs> {
    if x.len() != spec.n {
        return Err(Error::GridMismatch);
    }
    let n = spec.n;
    let r = spec.radial(norm_sq(x), t)?;
    let mut out = LocalCoeffs { psi: r.phi, a: vec![0.0; 2 * n], b: vec![0.0; 2 * n] };
    if r.phi == 0.0 {
        return Ok(out);
    }
    let al = spec.alpha;
    let g = (n as f64 / r.phi).powf(al);
    for axis in 0..n {
        let d = 2.0 * x[axis] * r.phi_q;
        let dd = 2.0 * r.phi_q + 4.0 * x[axis] * x[axis] * r.phi_qq;
        let b = g * g * (dd - 1.5 * al * d * d / r.phi);
        out.a[axis] = -g * d;
        out.a[axis + n] = g * d;
        out.b[axis] = b;
        out.b[axis + n] = b;
    }
    Ok(out)
}

/// Closed-form coefficients sampled at every cell center.
pub fn expansion_fields(spec: &BarrierSpec, grid: &Grid, t: f64) -> Result<ExpansionCoeffs> {
    if grid.dim() != spec.n {
        return Err(Error::GridMismatch);
    }
    let m = 2 * spec.n;
    let mut out = ExpansionCoeffs { a: vec![vec![0.0; grid.len()]; m], b: vec![vec![0.0; grid.len()]; m] };
    for k in 0..grid.len() {
        let c = expansion_at(spec, &grid.center(k)[..spec.n], t)?;
        for i in 0..m {
            out.a[i][k] = c.a[i];
            out.b[i][k] = c.b[i];
        }
    }
    Ok(out)
}

const FIELD_FLOOR: f64 = 1e-12;

/// Coefficients of an arbitrary positive density field by centered second-order
/// differences. On a frozen boundary the missing neighbour is replaced by the
/// cell itself (zero-gradient ghost).
pub fn expansion_from_field(grid: &Grid, rho: &[f64], alpha: f64) -> Result<ExpansionCoeffs> {
    if rho.len() != grid.len() {
        return Err(Error::GridMismatch);
    }
    if let Some((k, &v)) = rho.iter().enumerate().find(|(_, &v)| !(v > FIELD_FLOOR)) {
        return Err(Error::NonPositive { location: format!("cell {k}"), value: v });
    }
    let n = grid.dim();
    let h = grid.dx();
    let g: Vec<f64> = rho.iter().map(|&r| (n as f64 / r).powf(alpha)).collect();
    let mut out = ExpansionCoeffs { a: vec![vec![0.0; grid.len()]; 2 * n], b: vec![vec![0.0; grid.len()]; 2 * n] };
    for k in 0..grid.len() {
        for axis in 0..n {
            let lo = grid.shift(k, axis, -1).unwrap_or(k);
            let hi = grid.shift(k, axis, 1).unwrap_or(k);
            let d = (rho[hi] - rho[lo]) / (2.0 * h);
            let flux_hi = 0.5 * (g[hi] + g[k]) * (rho[hi] - rho[k]);
            let flux_lo = 0.5 * (g[k] + g[lo]) * (rho[k] - rho[lo]);
            let gd = g[k] * d;
            let b = g[k] * (flux_hi - flux_lo) / (h * h) - alpha / (2.0 * rho[k]) * gd * gd;
            out.a[axis][k] = -gd;
            out.a[axis + n][k] = gd;
            out.b[axis][k] = b;
            out.b[axis + n][k] = b;
        }
    }
    Ok(out)
}

/// ū at one point, without a validity-region check.
pub fn ansatz_at(spec: &BarrierSpec, epsilon: f64, x: &[f64], t: f64) -> Result<Vec<f64>> {
    let c = expansion_at(spec, x, t)?;
    let m = 2.0 * spec.n as f64;
    Ok(c.a.iter().zip(&c.b).map(|(a, b)| (c.psi + epsilon * a + epsilon * epsilon * b) / m).collect())
}

/// ū at one point, refusing points outside the validity region of radius coefficient `coeff`.
pub fn ansatz_profile(spec: &BarrierSpec, epsilon: f64, coeff: f64, x: &[f64], t: f64) -> Result<Vec<f64>> {
    if scale_variable(spec, x, t)? >= validity_radius(spec, epsilon, t, coeff)? {
        return Err(Error::OutsideValidityRegion);
    }
    ansatz_at(spec, epsilon, x, t)
}

/// ū on every cell center (no region check; the caller decides where it is used).
pub fn ansatz_fields(spec: &BarrierSpec, grid: &Grid, epsilon: f64, t: f64) -> Result<Vec<Vec<f64>>> {
    if grid.dim() != spec.n {
        return Err(Error::GridMismatch);
    }
    let m = 2 * spec.n;
    let mut out = vec![vec![0.0; grid.len()]; m];
    for k in 0..grid.len() {
        let u = ansatz_at(spec, epsilon, &grid.center(k)[..spec.n], t)?;
        for i in 0..m {
            out[i][k] = u[i];
        }
    }
    Ok(out)
}

/// min_i min(ū_i − Ψ/4n, 3Ψ/4n − ū_i); nonnegative exactly when the sandwich holds.
pub fn sandwich_margin(psi: f64, u: &[f64]) -> f64 {
    let quarter = psi / (2.0 * u.len() as f64);
    u.iter().map(|&v| (v - quarter).min(3.0 * quarter - v)).fold(f64::INFINITY, f64::min)
}

/// The quantity ξ(x, t) that the validity region bounds by coeff·τ(t)/ε.
pub fn scale_variable(spec: &BarrierSpec, x: &[f64], t: f64) -> Result<f64> {
    if x.len() != spec.n {
        return Err(Error::GridMismatch);
    }
    let q = norm_sq(x);
    let (r2, tt, n) = (spec.r * spec.r, spec.t_scale, spec.n as f64);
    Ok(match spec.case {
        BarrierCase::FdeSuperCriticalTMinus | BarrierCase::SuperPme => (q + r2).sqrt(),
        BarrierCase::FdeCritical => (q + r2 * (4.0 * n * t / tt).exp()).sqrt(),
        BarrierCase::FdeSubcriticalGlobal => (q + r2 * (t + tt).powf(4.0 / (2.0 - n * spec.alpha))).sqrt(),
        BarrierCase::PmeSeparable => (q + spec.support_radius_sq()).sqrt(),
        BarrierCase::HeatGaussian | BarrierCase::SuperHeat | BarrierCase::SuperFde => q.sqrt(),
    })
}

/// coeff·τ(t)/ε, with τ = T − ct, T, t + T or T − t depending on the family.
pub fn validity_radius(spec: &BarrierSpec, epsilon: f64, t: f64, coeff: f64) -> Result<f64> {
    let end = spec.life_span_end();
    if !(t < end) || t < 0.0 {
        return Err(Error::OutsideLifeSpan { t, end });
    }
    let tt = spec.t_scale;
    let tau = match spec.case {
        BarrierCase::FdeSuperCriticalTMinus | BarrierCase::SuperPme => tt - spec.c * t,
        BarrierCase::FdeCritical | BarrierCase::FdeSubcriticalGlobal => tt,
        BarrierCase::HeatGaussian | BarrierCase::PmeSeparable => t + tt,
        BarrierCase::SuperHeat | BarrierCase::SuperFde => tt - t,
    };
    Ok(coeff * tau / epsilon)
}

fn binom(alpha: f64, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, j| acc * (alpha - j as f64) / (j as f64 + 1.0))
}

/// Bound on the cubic Taylor coefficient R_{a,b} of (1 + aε + bε²)^α over all
/// intermediate points, using that the base stays in [1/2, 3/2].
pub fn taylor_remainder_bound(a: f64, b: f64, epsilon: f64, alpha: f64) -> Result<f64> {
    let small = (a * epsilon + b * epsilon * epsilon).abs();
    if small > 0.5 {
        return Err(Error::TaylorSmallness(small));
    }
    let worst = |p: f64| 0.5f64.powf(p).max(1.5f64.powf(p));
    let slope = a.abs() + 2.0 * b.abs() * epsilon.abs();
    let b3 = binom(alpha, 3);
    let b2 = binom(alpha, 2);
    let mut bound = 0.0;
    if b3 != 0.0 {
        bound += b3.abs() * worst(alpha - 3.0) * slope.powi(3);
    }
    if b2 != 0.0 {
        bound += 2.0 * b2.abs() * worst(alpha - 2.0) * slope * b.abs();
    }
    Ok(bound)
}

/// Pointwise kinetic residual of a smooth profile and the size of its largest term.
#[derive(Debug, Clone, PartialEq)]
pub struct KineticResidualPoint {
    pub residual: Vec<f64>,
    pub scale: Vec<f64>,
}

/// ∂_t u_i + (1/ε)D_{v_i}u_i − (1/2nε²)A(u)_i at (x, t), by fourth-order
/// centered differences with steps `hx`, `ht`.
pub fn kinetic_residual_at<F>(
    params: &ModelParams,
    rate: &RateSpec,
    profile: F,
    x: &[f64],
    t: f64,
    hx: f64,
    ht: f64,
) -> Result<KineticResidualPoint>
where
    F: Fn(&[f64], f64) -> Result<Vec<f64>>,
{
    let n = params.n;
    let m = 2 * n;
    let positive = |u: Vec<f64>, y: &[f64], s: f64| -> Result<Vec<f64>> {
        match u.iter().find(|v| !(**v > 0.0)) {
            Some(&v) => Err(Error::NonPositive { location: format!("x = {y:?}, t = {s}"), value: v }),
            None => Ok(u),
        }
    };
    const OFFS: [f64; 4] = [-2.0, -1.0, 1.0, 2.0];
    const W: [f64; 4] = [1.0, -8.0, 8.0, -1.0];

    let center = positive(profile(x, t)?, x, t)?;
    let mut dt = vec![0.0; m];
    for (k, w) in OFFS.iter().zip(W) {
        let s = t + k * ht;
        let u = positive(profile(x, s)?, x, s)?;
        for i in 0..m {
            dt[i] += w * u[i];
        }
    }
    let mut dx = vec![vec![0.0; m]; n];
    let mut y = x.to_vec();
    for axis in 0..n {
        for (k, w) in OFFS.iter().zip(W) {
            y[axis] = x[axis] + k * hx;
            let u = positive(profile(&y, t)?, &y, t)?;
            for i in 0..m {
                dx[axis][i] += w * u[i];
            }
        }
        y[axis] = x[axis];
    }
    let coll = rate.collision_map(&center)?;
    let eps = params.epsilon;
    let mut out = KineticResidualPoint { residual: vec![0.0; m], scale: vec![0.0; m] };
    for i in 0..m {
        let (axis, sign) = velocity(n, i);
        let time = dt[i] / (12.0 * ht);
        let stream = sign as f64 * dx[axis][i] / (12.0 * hx * eps);
        let c = coll[i] / (m as f64 * eps * eps);
        out.residual[i] = time + stream - c;
        out.scale[i] = time.abs().max(stream.abs()).max(c.abs());
    }
    Ok(out)
}

/// Kinetic residual of a discrete profile given at three equally spaced times,
/// by second-order centered differences around `cur`. Frozen boundaries fall
/// back to one-sided differences.
pub fn kinetic_residual(
    prev: &KineticState,
    cur: &KineticState,
    next: &KineticState,
    params: &ModelParams,
    rate: &RateSpec,
) -> Result<Vec<Vec<f64>>> {
    let grid = cur.grid();
    if prev.grid() != grid || next.grid() != grid || grid.dim() != params.n {
        return Err(Error::GridMismatch);
    }
    let h = next.t() - cur.t();
    if !(h > 0.0) || ((cur.t() - prev.t()) - h).abs() > 1e-12 * h.max(1.0) {
        return Err(Error::InvalidParameter { name: "times", reason: "snapshots must be equally spaced".into() });
    }
    for s in [prev, cur, next] {
        if let Some((idx, &v)) = s.data().iter().enumerate().find(|(_, &v)| !(v > 0.0)) {
            let m = s.ncomp();
            return Err(Error::NonPositive { location: format!("cell {}, component {}", idx / m, idx % m), value: v });
        }
    }
    let n = params.n;
    let m = 2 * n;
    let dx = grid.dx();
    let eps = params.epsilon;
    let mut out = vec![vec![0.0; grid.len()]; m];
    let mut coll = vec![0.0; m];
    for k in 0..grid.len() {
        rate.collision_into(cur.cell(k), &mut coll)?;
        for i in 0..m {
            let (axis, sign) = velocity(n, i);
            let (lo, hi) = (grid.shift(k, axis, -1), grid.shift(k, axis, 1));
            let grad = match (lo, hi) {
                (Some(l), Some(r)) => (cur.value(r, i) - cur.value(l, i)) / (2.0 * dx),
                (None, Some(r)) => (cur.value(r, i) - cur.value(k, i)) / dx,
                (Some(l), None) => (cur.value(k, i) - cur.value(l, i)) / dx,
                (None, None) => 0.0,
            };
            let time = (next.value(k, i) - prev.value(k, i)) / (2.0 * h);
            out[i][k] = time + sign as f64 * grad / eps - coll[i] / (m as f64 * eps * eps);
        }
    }
    Ok(out)
}
