//! Residual of a barrier against the limit equation
//! ρ_t = ∇·(n^{α−1} ρ^{−α} ∇ρ).

use serde::{Deserialize, Serialize};

use super::{norm_sq, BarrierCase, BarrierSpec};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum ResidualMode {
    /// The per-family closed-form expression.
    ClosedForm,
    /// Chain rule through the radial profile: exact derivatives, no per-family algebra.
    Analytic,
    /// Fourth-order centered differences of psi_eval applied to Φ(Ψ), where Φ' = s^{−α}.
    /// `h = None` picks steps relative to the local length and time scales.
    FiniteDifference { h: Option<f64> },
}

pub fn limit_residual(spec: &BarrierSpec, x: &[f64], t: f64, mode: ResidualMode) -> Result<f64> {
    if x.len() != spec.n {
        return Err(Error::GridMismatch);
    }
    match mode {
        ResidualMode::ClosedForm => closed_form(spec, x, t),
        ResidualMode::Analytic => limit_residual_analytic(spec, x, t),
        ResidualMode::FiniteDifference { h } => finite_difference(spec, x, t, h),
    }
}

pub fn limit_residual_analytic(spec: &BarrierSpec, x: &[f64], t: f64) -> Result<f64> {
    let q = norm_sq(x);
    let r = spec.radial(q, t)?;
    if r.phi == 0.0 {
        return Ok(0.0);
    }
    let (n, a) = (spec.n as f64, spec.alpha);
    let lap = 2.0 * n * r.phi_q + 4.0 * q * r.phi_qq;
    let grad2 = 4.0 * q * r.phi_q * r.phi_q;
    Ok(r.phi_t - n.powf(a - 1.0) * r.phi.powf(-a) * (lap - a * grad2 / r.phi))
}

fn closed_form(spec: &BarrierSpec, x: &[f64], t: f64) -> Result<f64> {
    let q = norm_sq(x);
    let psi = spec.radial(q, t)?.phi;
    let (n, a) = (spec.n as f64, spec.alpha);
    let (r2, tt) = (spec.r * spec.r, spec.t_scale);
    Ok(match spec.case {
        BarrierCase::FdeSuperCriticalTMinus => {
            let w = q + r2;
            let pre = 2.0 * psi.powf(1.0 - a) / (a * n.powf(1.0 - a) * w * w);
            pre * ((2.0 / a) * r2 - (spec.c - 1.0) * (n - 2.0 / a) * w)
        }
        BarrierCase::FdeCritical => {
            let e = r2 * (4.0 * n * t / tt).exp();
            let w = q + e;
            -(2.0 * n * ((tt - t) / tt) * e / w + 1.0 / (t / tt + 1.0)) * psi / (a * tt)
        }
        BarrierCase::FdeSubcriticalGlobal => {
            let p = 4.0 / (2.0 - n * a);
            let grow = r2 * (t + tt).powf(p);
            let w = q + grow;
            -((2.0 / (2.0 - n * a)) * (grow / w) * ((tt - t) / (tt + t)) + 1.0) * psi / (tt * a)
        }
        BarrierCase::HeatGaussian => {
            let s = t + tt;
            let (ch, cb) = (spec.c_hat, spec.c_bar);
            -(ch * (ch - 1.0) / 2.0 * q / (s * s) + (cb - ch) / s) * n * psi / 2.0
        }
        BarrierCase::PmeSeparable => {
            let s_sq = spec.support_radius_sq();
            if q >= s_sq {
                0.0
            } else {
                (1.0 / a) * (2.0 / (2.0 - n * a)) * (s_sq / (s_sq - q)) * psi / (t + tt)
            }
        }
        BarrierCase::SuperPme => {
            let w = q + r2;
            let lead = tt - spec.c * t;
            (spec.c + n * a / (2.0 - n * a) - (2.0 / (2.0 - n * a)) * q / w) * (-psi) / (a * lead)
        }
        BarrierCase::SuperHeat => {
            let s = tt - t;
            let (ch, cb) = (spec.c_hat, spec.c_bar);
            (ch * (1.0 - ch) / 2.0 * q / (s * s) + (cb - ch) / s) * n * psi / 2.0
        }
        BarrierCase::SuperFde => {
            let s = tt - t;
            let k = spec.c_hat * n / (4.0 * s);
            psi * (n * spec.c_bar / (2.0 * s) + k * q / s)
                - n.powf(a - 1.0) * psi.powf(1.0 - a) * (2.0 * n * k + 4.0 * (1.0 - a) * k * k * q)
        }
    })
}

/// Length and time scales used to pick default finite-difference steps.
pub(crate) fn local_scales(spec: &BarrierSpec, q: f64, t: f64) -> (f64, f64) {
    let (r2, tt) = (spec.r * spec.r, spec.t_scale);
    let n = spec.n as f64;
    match spec.case {
        BarrierCase::FdeSuperCriticalTMinus | BarrierCase::SuperPme => {
            ((q + r2).sqrt(), (tt - spec.c * t) / spec.c)
        }
        BarrierCase::FdeCritical => ((q + r2 * (4.0 * n * t / tt).exp()).sqrt(), tt / (4.0 * n)),
        BarrierCase::FdeSubcriticalGlobal => {
            let p = 4.0 / (2.0 - n * spec.alpha);
            ((q + r2 * (t + tt).powf(p)).sqrt(), (t + tt) / p)
        }
        BarrierCase::HeatGaussian => ((t + tt).sqrt(), t + tt),
        BarrierCase::PmeSeparable => (spec.support_radius_sq().sqrt(), t + tt),
        BarrierCase::SuperHeat | BarrierCase::SuperFde => ((tt - t).sqrt(), tt - t),
    }
}

const D1: [f64; 4] = [1.0, -8.0, 8.0, -1.0];
const D2: [f64; 5] = [-1.0, 16.0, -30.0, 16.0, -1.0];
const FD_REL: f64 = 1e-3;

fn finite_difference(spec: &BarrierSpec, x: &[f64], t: f64, h: Option<f64>) -> Result<f64> {
    let (len, tau) = local_scales(spec, norm_sq(x), t);
    let (hx, ht) = match h {
        Some(h) => (h, h),
        None => (FD_REL * len, FD_REL * tau),
    };
    let a = spec.alpha;
    let flux_potential = |s: f64| {
        if a == 1.0 {
            s.ln()
        } else {
            s.powf(1.0 - a) / (1.0 - a)
        }
    };
    let psi = |y: &[f64], s: f64| spec.radial(norm_sq(y), s).map(|r| r.phi);

    let center = psi(x, t)?;
    let compact = spec.case == BarrierCase::PmeSeparable;
    if compact && center == 0.0 {
        // Identically zero in a neighbourhood unless the stencil reaches the support.
        let reach = norm_sq(x).sqrt() - 2.0 * hx * (spec.n as f64).sqrt();
        if reach.max(0.0).powi(2) >= spec.support_radius_sq() {
            return Ok(0.0);
        }
        return Err(Error::SupportBoundary);
    }

    let mut psi_t = 0.0;
    for (k, w) in [-2.0, -1.0, 1.0, 2.0].iter().zip(D1) {
        psi_t += w * psi(x, t + k * ht)?;
    }
    psi_t /= 12.0 * ht;

    let mut lap = 0.0;
    let mut y = x.to_vec();
    for axis in 0..spec.n {
        for (k, w) in [-2.0, -1.0, 0.0, 1.0, 2.0].iter().zip(D2) {
            y[axis] = x[axis] + k * hx;
            let v = psi(&y, t)?;
            if compact && v <= 0.0 {
                return Err(Error::SupportBoundary);
            }
            lap += w * flux_potential(v);
        }
        y[axis] = x[axis];
    }
    lap /= 12.0 * hx * hx;
    Ok(psi_t - (spec.n as f64).powf(a - 1.0) * lap)
}
