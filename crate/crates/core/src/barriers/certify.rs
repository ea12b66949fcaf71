//! Sampled sign certificates for barriers and their kinetic ansatz.
//!
//! The region constants of the expansion argument are only known to exist, so
//! the kinetic region is calibrated: the radius coefficient starts at
//! `start` and is multiplied by `factor` until every sample passes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ansatz::{ansatz_at, kinetic_residual_at, sandwich_margin, scale_variable, validity_radius};
use super::residual::{limit_residual, local_scales, ResidualMode};
use super::{norm_sq, BarrierCase, BarrierConstants, BarrierSpec};
use crate::error::{Error, Result};
use crate::interaction::RateSpec;
use crate::model::ModelParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertifyOptions {
    pub samples: usize,
    pub seed: u64,
    /// First trial radius coefficient.
    pub start: f64,
    /// Geometric shrink factor between attempts.
    pub factor: f64,
    pub max_attempts: usize,
    /// Finite-difference step relative to the local length and time scales.
    pub fd_rel: f64,
    /// Residual slack relative to the largest term of the residual; defaults to fd_rel².
    pub slack_rel: Option<f64>,
    /// Sampled times cover [0, time_fraction · life span end).
    pub time_fraction: f64,
    /// Relative distance kept from the free boundary of a compactly supported barrier.
    pub support_margin: f64,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        CertifyOptions {
            samples: 10_000,
            seed: 7,
            start: 1.0,
            factor: 0.5,
            max_attempts: 30,
            fd_rel: 5e-4,
            slack_rel: None,
            time_fraction: 0.95,
            support_margin: 0.01,
        }
    }
}

impl CertifyOptions {
    fn slack(&self) -> f64 {
        self.slack_rel.unwrap_or(self.fd_rel * self.fd_rel)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledRegion {
    pub t_min: f64,
    pub t_max: f64,
    /// Human-readable description of the spatial set.
    pub spatial: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitCertificate {
    pub barrier: BarrierSpec,
    pub constants: BarrierConstants,
    pub mode: ResidualMode,
    pub samples: usize,
    pub region: SampledRegion,
    /// Required sign of the residual: "<= 0" or ">= 0".
    pub required_sign: String,
    /// Largest residual in the forbidden direction (positive for subsolutions, negative for supersolutions).
    pub worst_residual: f64,
    pub worst_point: (Vec<f64>, f64),
    pub slack: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attempt {
    pub coefficient: f64,
    pub residual_violations: usize,
    pub sandwich_violations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KineticCertificate {
    pub barrier: BarrierSpec,
    pub constants: BarrierConstants,
    pub epsilon: f64,
    pub rate: RateSpec,
    /// Certified radius coefficient of the validity region.
    pub coefficient: f64,
    pub samples: usize,
    pub region: SampledRegion,
    pub required_sign: String,
    /// Largest residual in the forbidden direction over the samples.
    pub max_residual: f64,
    /// The same, divided by the largest term of the residual at that point.
    pub max_relative_residual: f64,
    pub slack_rel: f64,
    /// min over samples of the sandwich margin divided by Ψ.
    pub min_sandwich_margin: f64,
    pub attempts: Vec<Attempt>,
    pub passed: bool,
}

fn sign_of(spec: &BarrierSpec) -> f64 {
    if spec.case.is_supersolution() {
        -1.0
    } else {
        1.0
    }
}

fn required_sign(spec: &BarrierSpec) -> String {
    if spec.case.is_supersolution() { ">= 0" } else { "<= 0" }.to_string()
}

fn time_window(spec: &BarrierSpec, fraction: f64) -> (f64, f64) {
    let end = spec.life_span_end();
    if end.is_finite() {
        (0.0, fraction * end)
    } else {
        (0.0, 2.0 * spec.t_scale)
    }
}

fn uniform_ball(rng: &mut ChaCha8Rng, n: usize, radius: f64) -> Vec<f64> {
    loop {
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        if norm_sq(&x) < 1.0 {
            return x.into_iter().map(|v| v * radius).collect();
        }
    }
}

/// Samples the limit residual on |x| ≤ 3ℓ, t in the life span window, where ℓ
/// is the barrier's length scale at t = 0.
pub fn certify_limit_residual(
    spec: &BarrierSpec,
    samples: usize,
    seed: u64,
    mode: ResidualMode,
    slack: f64,
) -> Result<LimitCertificate> {
    let (t0, t1) = time_window(spec, 0.95);
    let radius = 3.0 * local_scales(spec, 0.0, 0.0).0;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pts: Vec<(Vec<f64>, f64)> =
        (0..samples).map(|_| (uniform_ball(&mut rng, spec.n, radius), rng.gen_range(t0..t1))).collect();
    let sign = sign_of(spec);
    let vals: Vec<f64> = pts
        .par_iter()
        .map(|(x, t)| limit_residual(spec, x, *t, mode).map(|r| sign * r))
        .collect::<Result<_>>()?;
    let (worst_idx, worst) = vals
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
    Ok(LimitCertificate {
        barrier: spec.clone(),
        constants: spec.constants(),
        mode,
        samples,
        region: SampledRegion { t_min: t0, t_max: t1, spatial: format!("|x| <= {radius}") },
        required_sign: required_sign(spec),
        worst_residual: sign * worst,
        worst_point: pts.get(worst_idx).cloned().unwrap_or_default(),
        slack,
        passed: worst <= slack,
    })
}

/// Sufficient radius for the growing Gaussian to be a supersolution when α ∈ (0, 1]:
/// R² ≥ (4πT)^{n c̄/2} · n · max(ĉ/c̄, ĉ(1−α))^{1/α}.
pub fn super_fde_radius_bound(spec: &BarrierSpec) -> Result<f64> {
    if spec.case != BarrierCase::SuperFde {
        return Err(Error::Calibration(format!("{} has no radius threshold", spec.case.name())));
    }
    let (n, a) = (spec.n as f64, spec.alpha);
    let ratio = (spec.c_hat / spec.c_bar).max(spec.c_hat * (1.0 - a));
    let r2 = (4.0 * std::f64::consts::PI * spec.t_scale).powf(n * spec.c_bar / 2.0) * n * ratio.powf(1.0 / a);
    Ok(r2.sqrt())
}

/// Doubles R from its configured value until the closed-form limit residual of
/// the growing Gaussian is certified nonnegative.
pub fn calibrate_super_fde_radius(spec: &BarrierSpec, samples: usize, seed: u64) -> Result<(BarrierSpec, LimitCertificate)> {
    if spec.case != BarrierCase::SuperFde {
        return Err(Error::Calibration(format!("{} has no radius to calibrate", spec.case.name())));
    }
    let mut cur = spec.clone();
    for _ in 0..40 {
        let cert = certify_limit_residual(&cur, samples, seed, ResidualMode::ClosedForm, 1e-9)?;
        if cert.passed {
            return Ok((cur, cert));
        }
        let r = cur.r * 2.0;
        cur = cur.with_radius(r)?;
    }
    Err(Error::Calibration(format!("no radius up to {} certifies the supersolution", cur.r)))
}

struct Sample {
    x: Vec<f64>,
    t: f64,
}

fn draw_region(
    spec: &BarrierSpec,
    epsilon: f64,
    coeff: f64,
    opts: &CertifyOptions,
    rng: &mut ChaCha8Rng,
) -> Result<Option<Vec<Sample>>> {
    let (t0, t1) = time_window(spec, opts.time_fraction);
    let zero = vec![0.0; spec.n];
    let support = (spec.case == BarrierCase::PmeSeparable).then(|| (1.0 - opts.support_margin) * spec.support_radius_sq().sqrt());
    let mut out = Vec::with_capacity(opts.samples);
    let mut tries = 0usize;
    while out.len() < opts.samples {
        tries += 1;
        if tries > 200 * opts.samples.max(1) {
            return Ok(None);
        }
        let t = rng.gen_range(t0..t1);
        let bound = validity_radius(spec, epsilon, t, coeff)?;
        let offset = scale_variable(spec, &zero, t)?;
        if bound <= offset {
            continue;
        }
        let mut rad = (bound * bound - offset * offset).sqrt();
        if let Some(s) = support {
            rad = rad.min(s);
        }
        out.push(Sample { x: uniform_ball(rng, spec.n, rad), t });
    }
    Ok(Some(out))
}

struct Eval {
    residual: f64,
    relative: f64,
    residual_bad: bool,
    margin: f64,
    sandwich_bad: bool,
}

fn evaluate(spec: &BarrierSpec, params: &ModelParams, rate: &RateSpec, s: &Sample, opts: &CertifyOptions) -> Result<Eval> {
    let sign = sign_of(spec);
    let u = ansatz_at(spec, params.epsilon, &s.x, s.t)?;
    let psi = super::psi_eval(spec, &s.x, s.t)?;
    let margin = sandwich_margin(psi, &u) / psi;
    let sandwich_bad = !(margin >= -1e-12);
    let (len, tau) = local_scales(spec, norm_sq(&s.x), s.t);
    let profile = |y: &[f64], t: f64| ansatz_at(spec, params.epsilon, y, t);
    let point = match kinetic_residual_at(params, rate, profile, &s.x, s.t, opts.fd_rel * len, opts.fd_rel * tau) {
        Ok(p) => p,
        Err(Error::NonPositive { .. }) => {
            return Ok(Eval { residual: f64::INFINITY, relative: f64::INFINITY, residual_bad: true, margin, sandwich_bad: true })
        }
        Err(e) => return Err(e),
    };
    let mut worst = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    let mut bad = false;
    for (r, sc) in point.residual.iter().zip(&point.scale) {
        let v = sign * r;
        let rel = v / sc.max(f64::MIN_POSITIVE);
        if v > worst.0 {
            worst = (v, rel);
        }
        bad |= v > opts.slack() * sc;
    }
    Ok(Eval { residual: worst.0, relative: worst.1, residual_bad: bad, margin, sandwich_bad })
}

/// Calibrates the validity-region coefficient of the ansatz for one ε and
/// returns the certificate of the first coefficient with no violations.
pub fn calibrate_kinetic(spec: &BarrierSpec, epsilon: f64, rate: &RateSpec, opts: &CertifyOptions) -> Result<KineticCertificate> {
    let params = ModelParams::new(spec.n, spec.alpha, epsilon)?;
    let mut attempts = Vec::new();
    let mut coeff = opts.start;
    let (t0, t1) = time_window(spec, opts.time_fraction);
    for k in 0..opts.max_attempts {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(k as u64));
        let Some(samples) = draw_region(spec, epsilon, coeff, opts, &mut rng)? else {
            break;
        };
        let evals: Vec<Eval> =
            samples.par_iter().map(|s| evaluate(spec, &params, rate, s, opts)).collect::<Result<_>>()?;
        let residual_violations = evals.iter().filter(|e| e.residual_bad).count();
        let sandwich_violations = evals.iter().filter(|e| e.sandwich_bad).count();
        attempts.push(Attempt { coefficient: coeff, residual_violations, sandwich_violations });
        if residual_violations == 0 && sandwich_violations == 0 {
            let worst = evals.iter().max_by(|a, b| a.residual.total_cmp(&b.residual)).expect("nonempty sample");
            let max_rel = evals.iter().map(|e| e.relative).fold(f64::NEG_INFINITY, f64::max);
            let min_margin = evals.iter().map(|e| e.margin).fold(f64::INFINITY, f64::min);
            return Ok(KineticCertificate {
                barrier: spec.clone(),
                constants: spec.constants(),
                epsilon,
                rate: *rate,
                coefficient: coeff,
                samples: opts.samples,
                region: SampledRegion {
                    t_min: t0,
                    t_max: t1,
                    spatial: format!("xi(x,t) < {coeff} * tau(t) / {epsilon}"),
                },
                required_sign: required_sign(spec),
                max_residual: sign_of(spec) * worst.residual,
                max_relative_residual: max_rel,
                slack_rel: opts.slack(),
                min_sandwich_margin: min_margin,
                attempts,
                passed: true,
            });
        }
        coeff *= opts.factor;
    }
    Err(Error::Calibration(format!(
        "{} at eps = {epsilon}: no coefficient certified after {} attempts ({attempts:?})",
        spec.case.name(),
        attempts.len()
    )))
}
