//! Closed-form sub- and supersolutions of the limit equation, the
//! second-order kinetic ansatz built on them, and sign certificates.

mod ansatz;
mod certify;
mod residual;

pub use ansatz::{
    ansatz_at, ansatz_fields, ansatz_profile, expansion_at, expansion_fields, expansion_from_field, kinetic_residual,
    kinetic_residual_at, sandwich_margin, scale_variable, taylor_remainder_bound, validity_radius, ExpansionCoeffs,
    KineticResidualPoint, LocalCoeffs,
};
pub use certify::{
    calibrate_kinetic, calibrate_super_fde_radius, certify_limit_residual, super_fde_radius_bound, Attempt,
    CertifyOptions, KineticCertificate, LimitCertificate, SampledRegion,
};
pub use residual::{limit_residual, limit_residual_analytic, ResidualMode};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BarrierCase {
    /// α ∈ (2/n, 1], n ≥ 3: extinguishing Barenblatt-type profile on t < T/c.
    #[serde(rename = "fde_super_critical_T_minus", alias = "fde_super_critical_t_minus")]
    FdeSuperCriticalTMinus,
    /// α = 2/n.
    FdeCritical,
    /// α ∈ (0, 2/n).
    FdeSubcriticalGlobal,
    /// α = 0: widening Gaussian.
    HeatGaussian,
    /// α ∈ [−1, 0): compactly supported separable profile.
    PmeSeparable,
    /// Supersolution for α ∈ [−1, 0).
    SuperPme,
    /// Supersolution for α = 0: growing Gaussian on t < T.
    SuperHeat,
    /// The growing Gaussian as a supersolution for α ∈ (0, 1], valid once R is large.
    SuperFde,
}

impl BarrierCase {
    pub const ALL: [BarrierCase; 8] = [
        BarrierCase::FdeSuperCriticalTMinus,
        BarrierCase::FdeCritical,
        BarrierCase::FdeSubcriticalGlobal,
        BarrierCase::HeatGaussian,
        BarrierCase::PmeSeparable,
        BarrierCase::SuperPme,
        BarrierCase::SuperHeat,
        BarrierCase::SuperFde,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BarrierCase::FdeSuperCriticalTMinus => "fde_super_critical_T_minus",
            BarrierCase::FdeCritical => "fde_critical",
            BarrierCase::FdeSubcriticalGlobal => "fde_subcritical_global",
            BarrierCase::HeatGaussian => "heat_gaussian",
            BarrierCase::PmeSeparable => "pme_separable",
            BarrierCase::SuperPme => "super_pme",
            BarrierCase::SuperHeat => "super_heat",
            BarrierCase::SuperFde => "super_fde",
        }
    }

    pub fn is_supersolution(self) -> bool {
        matches!(self, BarrierCase::SuperPme | BarrierCase::SuperHeat | BarrierCase::SuperFde)
    }

    fn check(self, n: usize, alpha: f64) -> Result<()> {
        let fail = |reason: &str| {
            Err(Error::IncompatibleBarrier { case: self.name(), n, alpha, reason: reason.to_string() })
        };
        if !(2..=3).contains(&n) {
            return fail("barriers are defined for n in {2, 3}");
        }
        let crit = 2.0 / n as f64;
        match self {
            BarrierCase::FdeSuperCriticalTMinus => {
                if n < 3 {
                    return fail("requires n >= 3");
                }
                if !(alpha > crit + TOL && alpha <= 1.0) {
                    return fail(&format!("requires alpha in ({crit}, 1]"));
                }
            }
            BarrierCase::FdeCritical => {
                if (alpha - crit).abs() > TOL {
                    return fail(&format!("requires alpha = 2/n = {crit}"));
                }
            }
            BarrierCase::FdeSubcriticalGlobal => {
                if !(alpha > 0.0 && alpha < crit - TOL) {
                    return fail(&format!("requires alpha in (0, {crit})"));
                }
            }
            BarrierCase::HeatGaussian | BarrierCase::SuperHeat => {
                if alpha != 0.0 {
                    return fail("requires alpha = 0");
                }
            }
            BarrierCase::PmeSeparable | BarrierCase::SuperPme => {
                if !(-1.0..0.0).contains(&alpha) {
                    return fail("requires alpha in [-1, 0)");
                }
            }
            BarrierCase::SuperFde => {
                if !(alpha > 0.0 && alpha <= 1.0) {
                    return fail("requires alpha in (0, 1]");
                }
            }
        }
        Ok(())
    }
}

/// Amplitude and default shape constants of a barrier family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BarrierConstants {
    /// C_α for the power-law families, the n^{(α−1)/α} prefactor for the critical case, 1 for Gaussians.
    pub amplitude: f64,
    /// Default speed-up constant c, where the family has one.
    pub speed: Option<f64>,
    pub c_hat: Option<f64>,
    pub c_bar: Option<f64>,
}

pub fn barrier_constants(case: BarrierCase, n: usize, alpha: f64) -> Result<BarrierConstants> {
    case.check(n, alpha)?;
    let nf = n as f64;
    let power_amp = |base: f64| base.powf(1.0 / alpha);
    let none = BarrierConstants { amplitude: 1.0, speed: None, c_hat: None, c_bar: None };
    Ok(match case {
        BarrierCase::FdeSuperCriticalTMinus => {
            let q = nf - 2.0 / alpha;
            BarrierConstants {
                amplitude: power_amp(2.0 * nf.powf(alpha - 1.0) * q),
                speed: Some(1.0 + 2.0 * (2.0 / alpha) / q),
                ..none
            }
        }
        BarrierCase::FdeCritical => BarrierConstants { amplitude: power_amp(nf.powf(alpha - 1.0)), ..none },
        BarrierCase::FdeSubcriticalGlobal => {
            BarrierConstants { amplitude: power_amp(2.0 * nf.powf(alpha - 1.0) * (2.0 / alpha - nf)), ..none }
        }
        BarrierCase::HeatGaussian => BarrierConstants { c_hat: Some(1.25), c_bar: Some(1.5), ..none },
        BarrierCase::PmeSeparable => {
            BarrierConstants { amplitude: power_amp(2.0 * nf.powf(alpha - 1.0) * (nf - 2.0 / alpha)), ..none }
        }
        BarrierCase::SuperPme => BarrierConstants {
            amplitude: power_amp(2.0 * nf.powf(alpha - 1.0) * (nf - 2.0 / alpha)),
            speed: Some(2.0),
            ..none
        },
        BarrierCase::SuperHeat | BarrierCase::SuperFde => {
            BarrierConstants { c_hat: Some(0.75), c_bar: Some(1.0), ..none }
        }
    })
}

/// Serialized form of a barrier; unset constants take the family defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarrierConfig {
    pub case: BarrierCase,
    pub n: usize,
    pub alpha: f64,
    #[serde(rename = "R")]
    pub r: f64,
    #[serde(rename = "T")]
    pub t_scale: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_hat: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_bar: Option<f64>,
}

/// A validated barrier Ψ_{R,T} (or Ψ̄_{R,T}) with all constants resolved.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BarrierConfig", into = "BarrierConfig")]
pub struct BarrierSpec {
    pub case: BarrierCase,
    pub n: usize,
    pub alpha: f64,
    pub r: f64,
    pub t_scale: f64,
    /// Speed-up constant (families with a T − ct factor); 0 otherwise.
    pub c: f64,
    pub c_hat: f64,
    pub c_bar: f64,
    amplitude: f64,
}

impl TryFrom<BarrierConfig> for BarrierSpec {
    type Error = Error;

    fn try_from(cfg: BarrierConfig) -> Result<Self> {
        let k = barrier_constants(cfg.case, cfg.n, cfg.alpha)?;
        let spec = BarrierSpec {
            case: cfg.case,
            n: cfg.n,
            alpha: cfg.alpha,
            r: cfg.r,
            t_scale: cfg.t_scale,
            c: cfg.c.or(k.speed).unwrap_or(0.0),
            c_hat: cfg.c_hat.or(k.c_hat).unwrap_or(0.0),
            c_bar: cfg.c_bar.or(k.c_bar).unwrap_or(0.0),
            amplitude: k.amplitude,
        };
        spec.validate()?;
        Ok(spec)
    }
}

impl From<BarrierSpec> for BarrierConfig {
    fn from(s: BarrierSpec) -> Self {
        let k = barrier_constants(s.case, s.n, s.alpha).expect("validated spec");
        BarrierConfig {
            case: s.case,
            n: s.n,
            alpha: s.alpha,
            r: s.r,
            t_scale: s.t_scale,
            c: k.speed.map(|_| s.c),
            c_hat: k.c_hat.map(|_| s.c_hat),
            c_bar: k.c_bar.map(|_| s.c_bar),
        }
    }
}

impl BarrierSpec {
    pub fn new(case: BarrierCase, n: usize, alpha: f64, r: f64, t_scale: f64) -> Result<Self> {
        BarrierConfig { case, n, alpha, r, t_scale, c: None, c_hat: None, c_bar: None }.try_into()
    }

    pub fn with_speed(mut self, c: f64) -> Result<Self> {
        self.c = c;
        self.validate()?;
        Ok(self)
    }

    pub fn with_gaussian(mut self, c_hat: f64, c_bar: f64) -> Result<Self> {
        self.c_hat = c_hat;
        self.c_bar = c_bar;
        self.validate()?;
        Ok(self)
    }

    pub fn with_radius(mut self, r: f64) -> Result<Self> {
        self.r = r;
        self.validate()?;
        Ok(self)
    }

    pub fn constants(&self) -> BarrierConstants {
        let k = barrier_constants(self.case, self.n, self.alpha).expect("validated spec");
        BarrierConstants {
            amplitude: self.amplitude,
            speed: k.speed.map(|_| self.c),
            c_hat: k.c_hat.map(|_| self.c_hat),
            c_bar: k.c_bar.map(|_| self.c_bar),
        }
    }

    fn validate(&self) -> Result<()> {
        self.case.check(self.n, self.alpha)?;
        let bad = |reason: String| {
            Err(Error::IncompatibleBarrier { case: self.case.name(), n: self.n, alpha: self.alpha, reason })
        };
        if !(self.r > 0.0) || !(self.t_scale > 0.0) {
            return bad(format!("R = {} and T = {} must be positive", self.r, self.t_scale));
        }
        match self.case {
            BarrierCase::FdeSuperCriticalTMinus => {
                let need = (2.0 / self.alpha) / (self.n as f64 - 2.0 / self.alpha);
                if !(self.c - 1.0 > need) {
                    return bad(format!("c - 1 = {} must exceed {need}", self.c - 1.0));
                }
            }
            BarrierCase::SuperPme => {
                if !(self.c > 1.0) {
                    return bad(format!("c = {} must exceed 1", self.c));
                }
            }
            BarrierCase::HeatGaussian => {
                if !(self.c_bar > self.c_hat && self.c_hat > 1.0) {
                    return bad(format!("need c_bar > c_hat > 1, got {} and {}", self.c_bar, self.c_hat));
                }
            }
            BarrierCase::SuperHeat | BarrierCase::SuperFde => {
                if !(self.c_hat > 0.0 && self.c_hat < 1.0 && self.c_bar > self.c_hat) {
                    return bad(format!("need 0 < c_hat < 1 and c_bar > c_hat, got {} and {}", self.c_hat, self.c_bar));
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// End of the life span; infinite for the globally defined families.
    pub fn life_span_end(&self) -> f64 {
        match self.case {
            BarrierCase::FdeSuperCriticalTMinus | BarrierCase::SuperPme => self.t_scale / self.c,
            BarrierCase::FdeCritical
            | BarrierCase::FdeSubcriticalGlobal
            | BarrierCase::SuperHeat
            | BarrierCase::SuperFde => self.t_scale,
            BarrierCase::HeatGaussian | BarrierCase::PmeSeparable => f64::INFINITY,
        }
    }

    /// Exponent 4/(2 − nα) of the subcritical family.
    fn growth_exponent(&self) -> f64 {
        4.0 / (2.0 - self.n as f64 * self.alpha)
    }

    /// R²T^{2/(2−nα)}: squared support radius of the separable family.
    pub fn support_radius_sq(&self) -> f64 {
        self.r * self.r * self.t_scale.powf(2.0 / (2.0 - self.n as f64 * self.alpha))
    }

    fn check_time(&self, t: f64) -> Result<()> {
        let end = self.life_span_end();
        let start = match self.case {
            BarrierCase::HeatGaussian | BarrierCase::PmeSeparable | BarrierCase::FdeSubcriticalGlobal => -self.t_scale,
            _ => f64::NEG_INFINITY,
        };
        if !(t < end) || !(t > start) {
            return Err(Error::OutsideLifeSpan { t, end });
        }
        Ok(())
    }

    /// Ψ and its derivatives in the radial variable q = |x|².
    pub(crate) fn radial(&self, q: f64, t: f64) -> Result<Radial> {
        self.check_time(t)?;
        let a = self.alpha;
        let ia = 1.0 / a;
        let nf = self.n as f64;
        let r2 = self.r * self.r;
        let tt = self.t_scale;
        let power = |phi: f64, w: f64, sign: f64, phi_t: f64| Radial {
            phi,
            phi_q: sign * ia * phi / w,
            phi_qq: ia * (ia + 1.0) * phi / (w * w),
            phi_t,
        };
        Ok(match self.case {
            BarrierCase::FdeSuperCriticalTMinus | BarrierCase::SuperPme => {
                let w = q + r2;
                let lead = tt - self.c * t;
                let phi = self.amplitude * (lead / w).powf(ia);
                power(phi, w, -1.0, -self.c * ia * phi / lead)
            }
            BarrierCase::FdeCritical => {
                let e = r2 * (4.0 * nf * t / tt).exp();
                let w = q + e;
                let s = t / tt + 1.0;
                let phi = self.amplitude * (tt / (w * s)).powf(ia);
                power(phi, w, -1.0, -ia * phi * ((4.0 * nf / tt) * e / w + (1.0 / tt) / s))
            }
            BarrierCase::FdeSubcriticalGlobal => {
                let p = self.growth_exponent();
                let grow = r2 * (t + tt).powf(p);
                let w = q + grow;
                let phi = self.amplitude * (tt / w).powf(ia);
                power(phi, w, -1.0, -ia * phi * r2 * p * (t + tt).powf(p - 1.0) / w)
            }
            BarrierCase::PmeSeparable => {
                let w = self.support_radius_sq() - q;
                if w <= 0.0 {
                    Radial { phi: 0.0, phi_q: 0.0, phi_qq: 0.0, phi_t: 0.0 }
                } else {
                    let phi = self.amplitude * ((t + tt) / w).powf(ia);
                    power(phi, w, 1.0, ia * phi / (t + tt))
                }
            }
            BarrierCase::HeatGaussian => {
                let s = t + tt;
                let k = self.c_hat * nf / (4.0 * s);
                let phi = r2 * (4.0 * std::f64::consts::PI * s).powf(-nf * self.c_bar / 2.0) * (-k * q).exp();
                Radial { phi, phi_q: -k * phi, phi_qq: k * k * phi, phi_t: phi * (-nf * self.c_bar / (2.0 * s) + k * q / s) }
            }
            BarrierCase::SuperHeat | BarrierCase::SuperFde => {
                let s = tt - t;
                let k = self.c_hat * nf / (4.0 * s);
                let phi = r2 * (4.0 * std::f64::consts::PI * s).powf(-nf * self.c_bar / 2.0) * (k * q).exp();
                Radial { phi, phi_q: k * phi, phi_qq: k * k * phi, phi_t: phi * (nf * self.c_bar / (2.0 * s) + k * q / s) }
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Radial {
    pub phi: f64,
    pub phi_q: f64,
    pub phi_qq: f64,
    pub phi_t: f64,
}

fn norm_sq(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

/// Ψ(x, t).
pub fn psi_eval(spec: &BarrierSpec, x: &[f64], t: f64) -> Result<f64> {
    if x.len() != spec.n {
        return Err(Error::GridMismatch);
    }
    Ok(spec.radial(norm_sq(x), t)?.phi)
}

/// Ψ(·, t) at every cell center.
pub fn psi_field(spec: &BarrierSpec, grid: &crate::model::Grid, t: f64) -> Result<Vec<f64>> {
    if grid.dim() != spec.n {
        return Err(Error::GridMismatch);
    }
    let n = grid.dim();
    (0..grid.len()).map(|k| psi_eval(spec, &grid.center(k)[..n], t)).collect()
}
