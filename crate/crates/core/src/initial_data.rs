//! Constructive initial data, the barrier sandwich truncation g_{i,m}, and
//! the horizon estimates T₁, T₂.
//!
//! Tail behaviour cannot be read off a finite grid, so every primitive
//! carries its asymptotics symbolically. The envelope f is the sum of the
//! non-integrable primitives; bumps and perturbations make up f − g.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::barriers::{psi_eval, BarrierCase, BarrierSpec};
use crate::error::{Error, Result};
use crate::model::{Grid, ModelParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub amplitude: f64,
    pub width: f64,
    pub center: Vec<f64>,
}

impl Bump {
    fn eval(&self, x: &[f64]) -> f64 {
        let d2: f64 = x.iter().zip(&self.center).map(|(a, b)| (a - b) * (a - b)).sum();
        self.amplitude * (-d2 / (self.width * self.width)).exp()
    }

    fn l1(&self, n: usize) -> f64 {
        self.amplitude.abs() * (std::f64::consts::PI * self.width * self.width).powf(n as f64 / 2.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Primitive {
    Constant {
        value: f64,
    },
    /// A / (|x|² + core²)^{exponent/2}.
    PowerTail {
        amplitude: f64,
        exponent: f64,
        core: f64,
    },
    /// amplitude · exp(−|x − center|²/width²).
    GaussianBump {
        amplitude: f64,
        width: f64,
        center: Vec<f64>,
    },
    /// scale · Ψ(x, 0).
    BarrierTrace {
        barrier: BarrierSpec,
        #[serde(default = "one")]
        scale: f64,
    },
    /// Signed Gaussian bumps whose total L¹ mass may not exceed `budget`.
    L1Perturbation {
        bumps: Vec<Bump>,
        budget: f64,
    },
}

fn one() -> f64 {
    1.0
}

/// f ~ coeff · |x|^{−power} · exp(gauss · |x|²) as |x| → ∞.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailTerm {
    pub coeff: f64,
    pub power: f64,
    pub gauss: f64,
}

impl Primitive {
    fn validate(&self, n: usize) -> Result<()> {
        let bad = |s: String| Err(Error::NotAdmissible(s));
        match self {
            Primitive::Constant { value } if !(*value >= 0.0) => bad(format!("constant {value} is negative")),
            Primitive::PowerTail { amplitude, core, .. } if !(*amplitude >= 0.0) || !(*core > 0.0) => {
                bad(format!("power tail needs amplitude >= 0 and core > 0 (got {amplitude}, {core})"))
            }
            Primitive::GaussianBump { amplitude, width, center } => {
                if !(*amplitude >= 0.0) || !(*width > 0.0) {
                    bad(format!("bump needs amplitude >= 0 and width > 0 (got {amplitude}, {width})"))
                } else if center.len() != n {
                    bad(format!("bump center has {} coordinates, expected {n}", center.len()))
                } else {
                    Ok(())
                }
            }
            Primitive::BarrierTrace { barrier, scale } => {
                if barrier.n != n {
                    bad(format!("barrier dimension {} differs from {n}", barrier.n))
                } else if !(*scale >= 0.0) {
                    bad(format!("barrier scale {scale} is negative"))
                } else {
                    Ok(())
                }
            }
            Primitive::L1Perturbation { bumps, budget } => {
                if bumps.iter().any(|b| b.center.len() != n || !(b.width > 0.0)) {
                    return bad("perturbation bumps need positive width and matching dimension".into());
                }
                let mass: f64 = bumps.iter().map(|b| b.l1(n)).sum();
                if mass > *budget {
                    bad(format!("perturbation mass {mass} exceeds budget {budget}"))
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }

    fn eval(&self, x: &[f64]) -> Result<f64> {
        let q: f64 = x.iter().map(|v| v * v).sum();
        Ok(match self {
            Primitive::Constant { value } => *value,
            Primitive::PowerTail { amplitude, exponent, core } => amplitude * (q + core * core).powf(-exponent / 2.0),
            Primitive::GaussianBump { amplitude, width, center } => {
                Bump { amplitude: *amplitude, width: *width, center: center.clone() }.eval(x)
            }
            Primitive::BarrierTrace { barrier, scale } => scale * psi_eval(barrier, x, 0.0)?,
            Primitive::L1Perturbation { bumps, .. } => bumps.iter().map(|b| b.eval(x)).sum(),
        })
    }

    /// Integrable primitives belong to f − g; the rest form the envelope.
    fn tail(&self, n: usize) -> Option<TailTerm> {
        let term = |coeff, power, gauss| Some(TailTerm { coeff, power, gauss });
        match self {
            Primitive::Constant { value } if *value > 0.0 => term(*value, 0.0, 0.0),
            Primitive::Constant { .. } => None,
            Primitive::PowerTail { amplitude, exponent, .. } => term(*amplitude, *exponent, 0.0),
            Primitive::GaussianBump { .. } | Primitive::L1Perturbation { .. } => None,
            Primitive::BarrierTrace { barrier: b, scale } => {
                let (a, tt, nf) = (b.alpha, b.t_scale, n as f64);
                let amp = psi_eval(b, &vec![0.0; n], 0.0).ok()?;
                match b.case {
                    BarrierCase::FdeSuperCriticalTMinus
                    | BarrierCase::FdeCritical
                    | BarrierCase::FdeSubcriticalGlobal
                    | BarrierCase::SuperPme => {
                        // Ψ(x,0) = Ψ(0,0)·(w₀/(q + w₀))^{1/α} with w₀ the q-offset at t = 0.
                        let w0 = match b.case {
                            BarrierCase::FdeSubcriticalGlobal => b.r * b.r * tt.powf(4.0 / (2.0 - nf * a)),
                            _ => b.r * b.r,
                        };
                        term(scale * amp * w0.powf(1.0 / a), 2.0 / a, 0.0)
                    }
                    BarrierCase::HeatGaussian | BarrierCase::PmeSeparable => None,
                    BarrierCase::SuperHeat | BarrierCase::SuperFde => term(scale * amp, 0.0, b.c_hat * nf / (4.0 * tt)),
                }
            }
        }
    }

    fn l1_part(&self, n: usize) -> f64 {
        match self {
            Primitive::GaussianBump { amplitude, width, center } => {
                Bump { amplitude: *amplitude, width: *width, center: center.clone() }.l1(n)
            }
            Primitive::L1Perturbation { bumps, .. } => bumps.iter().map(|b| b.l1(n)).sum(),
            _ => 0.0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Recipe {
    pub terms: Vec<Primitive>,
}

impl Recipe {
    pub fn new(terms: Vec<Primitive>) -> Self {
        Recipe { terms }
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        self.terms.iter().map(|p| p.eval(x)).sum()
    }

    pub fn envelope_tail(&self, n: usize) -> Vec<TailTerm> {
        self.terms.iter().filter_map(|p| p.tail(n)).filter(|t| t.coeff > 0.0).collect()
    }

    /// Upper bound on ‖f − g‖_{L¹(ℝⁿ)} from the integrable primitives.
    pub fn perturbation_l1(&self, n: usize) -> f64 {
        self.terms.iter().map(|p| p.l1_part(n)).sum()
    }
}

/// Per-component recipes. A single recipe applies to all 2n components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialDataSpec {
    pub components: Vec<Recipe>,
}

impl InitialDataSpec {
    pub fn isotropic(recipe: Recipe) -> Self {
        InitialDataSpec { components: vec![recipe] }
    }

    fn recipe(&self, i: usize) -> &Recipe {
        if self.components.len() == 1 {
            &self.components[0]
        } else {
            &self.components[i]
        }
    }

    pub fn validate(&self, params: &ModelParams) -> Result<()> {
        let m = params.ncomp();
        if self.components.len() != 1 && self.components.len() != m {
            return Err(Error::NotAdmissible(format!("{} recipes for {m} components", self.components.len())));
        }
        for i in 0..m {
            for p in &self.recipe(i).terms {
                p.validate(params.n)?;
            }
        }
        let tails = self.tail_limits(params);
        let a = params.alpha;
        let crit = 2.0 / params.n as f64;
        for (i, t) in tails.iter().enumerate() {
            if a >= crit && a <= 1.0 && !(t.liminf_decay > 0.0) {
                return Err(Error::NotAdmissible(format!(
                    "component {i}: the envelope decays faster than |x|^(-2/alpha) = |x|^{}",
                    -2.0 / a
                )));
            }
            if a >= 0.0 && !t.log_growth.is_finite() {
                return Err(Error::NotAdmissible(format!("component {i}: envelope grows faster than exp(C|x|^2)")));
            }
            if a < 0.0 && !t.limsup_growth.is_finite() {
                return Err(Error::NotAdmissible(format!(
                    "component {i}: envelope grows faster than |x|^{}",
                    -2.0 / a
                )));
            }
        }
        Ok(())
    }

    /// Tail limits of each component's envelope.
    pub fn tail_limits(&self, params: &ModelParams) -> Vec<TailLimits> {
        (0..params.ncomp()).map(|i| TailLimits::of(&self.recipe(i).envelope_tail(params.n), params.alpha)).collect()
    }
}

/// liminf |x|^{2/α} f, limsup |x|^{−2} log(f + 1) and limsup |x|^{2/α} f.
/// Quantities that do not apply to the given α are reported as NaN.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailLimits {
    pub liminf_decay: f64,
    pub log_growth: f64,
    pub limsup_growth: f64,
}

impl TailLimits {
    fn of(terms: &[TailTerm], alpha: f64) -> TailLimits {
        // The dominant term: largest Gaussian rate, then slowest power decay.
        let gauss = terms.iter().map(|t| t.gauss).fold(f64::NEG_INFINITY, f64::max);
        let power = terms.iter().filter(|t| t.gauss == gauss).map(|t| t.power).fold(f64::INFINITY, f64::min);
        let coeff: f64 = terms.iter().filter(|t| t.gauss == gauss && t.power == power).map(|t| t.coeff).sum();
        let weighted = |s: f64| {
            // lim |x|^s f
            if terms.is_empty() || gauss < 0.0 {
                0.0
            } else if gauss > 0.0 {
                f64::INFINITY
            } else if (power - s).abs() < 1e-12 {
                coeff
            } else if power < s {
                f64::INFINITY
            } else {
                0.0
            }
        };
        let log_growth = if terms.is_empty() { 0.0 } else { gauss.max(0.0) };
        if alpha == 0.0 {
            return TailLimits { liminf_decay: f64::NAN, log_growth, limsup_growth: f64::NAN };
        }
        let lim = weighted(2.0 / alpha);
        TailLimits {
            liminf_decay: if alpha > 0.0 { lim } else { f64::NAN },
            log_growth: if alpha >= 0.0 { log_growth } else { f64::NAN },
            limsup_growth: if alpha < 0.0 { lim } else { f64::NAN },
        }
    }
}

/// Powers with the convention that a negative power of 0 is ∞.
fn conv_pow(base: f64, p: f64) -> f64 {
    if base == 0.0 && p < 0.0 {
        f64::INFINITY
    } else if base.is_infinite() && p < 0.0 {
        0.0
    } else {
        base.powf(p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Horizon {
    pub t1: f64,
    pub t2: f64,
    /// min(T₁, T₂); the admissible horizon is an unknown multiple of it.
    pub t_bar_scale: f64,
}

impl Horizon {
    /// A concrete experiment horizon: `fraction` of min(T₁, T₂).
    pub fn experiment_horizon(&self, fraction: f64) -> f64 {
        fraction * self.t_bar_scale
    }
}

pub const DEFAULT_HORIZON_FRACTION: f64 = 0.25;

pub fn horizon_estimate(spec: &InitialDataSpec, params: &ModelParams) -> Horizon {
    let a = params.alpha;
    let tails = spec.tail_limits(params);
    let crit = 2.0 / params.n as f64;
    let t1 = if a >= crit && a <= 1.0 {
        let m = tails.iter().map(|t| t.liminf_decay).fold(f64::INFINITY, f64::min);
        conv_pow(m, 1.0 / a)
    } else {
        f64::INFINITY
    };
    let t2 = if a >= 0.0 {
        let m = tails.iter().map(|t| t.log_growth).fold(0.0, f64::max);
        conv_pow(m, -1.0)
    } else {
        let m = tails.iter().map(|t| t.limsup_growth).fold(0.0, f64::max);
        conv_pow(m, 1.0 / a)
    };
    Horizon { t1, t2, t_bar_scale: t1.min(t2) }
}

/// Samples every recipe at the cell centers and returns the 2n fields g_i.
pub fn build(spec: &InitialDataSpec, grid: &Grid, params: &ModelParams) -> Result<Vec<Vec<f64>>> {
    if grid.dim() != params.n {
        return Err(Error::GridMismatch);
    }
    spec.validate(params)?;
    let n = params.n;
    (0..params.ncomp())
        .map(|i| {
            let recipe = spec.recipe(i);
            let field: Vec<f64> =
                (0..grid.len()).into_par_iter().map(|k| recipe.eval(&grid.center(k)[..n])).collect::<Result<_>>()?;
            if let Some((k, &v)) = field.iter().enumerate().find(|(_, &v)| !(v >= 0.0)) {
                return Err(Error::NotAdmissible(format!("component {i} is {v} at cell {k}")));
            }
            Ok(field)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Truncation {
    pub fields: Vec<Vec<f64>>,
    /// Σ_i ‖g_{i,m} − g_i‖_{L¹} over the grid.
    pub l1_gap: f64,
    pub lower_radius: f64,
    pub upper_radius: f64,
}

/// Level-m radius: the lower trace must shrink and the upper trace grow with m.
fn level_radius(spec: &BarrierSpec, m: f64, lower: bool) -> f64 {
    let grows_with_r = !matches!(
        spec.case,
        BarrierCase::FdeSuperCriticalTMinus | BarrierCase::FdeCritical | BarrierCase::FdeSubcriticalGlobal
    );
    if lower == grows_with_r {
        spec.r / m
    } else {
        spec.r * m
    }
}

/// g_{i,m} = median{(3/4n)Ψ_m(·,0), g_i, (1/4n)Ψ̄_m(·,0)} where Ψ_m, Ψ̄_m are the
/// templates rescaled to level m.
pub fn sandwich_truncate(
    g: &[Vec<f64>],
    grid: &Grid,
    m: f64,
    lower: &BarrierSpec,
    upper: &BarrierSpec,
) -> Result<Truncation> {
    if !(m > 0.0) {
        return Err(crate::error::invalid("m", format!("level must be positive, got {m}")));
    }
    if lower.case.is_supersolution() || !upper.case.is_supersolution() {
        return Err(crate::error::invalid("barriers", "expects a subsolution below and a supersolution above"));
    }
    let n = grid.dim();
    if lower.n != n || upper.n != n || g.len() != 2 * n || g.iter().any(|f| f.len() != grid.len()) {
        return Err(Error::GridMismatch);
    }
    let (rl, ru) = (level_radius(lower, m, true), level_radius(upper, m, false));
    let lo_spec = lower.clone().with_radius(rl)?;
    let hi_spec = upper.clone().with_radius(ru)?;
    let nf = n as f64;
    let bounds: Vec<(f64, f64)> = (0..grid.len())
        .into_par_iter()
        .map(|k| {
            let x = &grid.center(k)[..n];
            Ok((0.75 / nf * psi_eval(&lo_spec, x, 0.0)?, 0.25 / nf * psi_eval(&hi_spec, x, 0.0)?))
        })
        .collect::<Result<_>>()?;
    if let Some((cell, &(lower, upper))) = bounds.iter().enumerate().find(|(_, (l, u))| l > u) {
        return Err(Error::CrossedBarriers { cell, lower, upper });
    }
    let mut gap = 0.0;
    let fields = g
        .iter()
        .map(|f| {
            f.iter()
                .zip(&bounds)
                .map(|(&v, &(l, u))| {
                    let c = v.clamp(l, u);
                    gap += (c - v).abs();
                    c
                })
                .collect()
        })
        .collect();
    Ok(Truncation { fields, l1_gap: gap * grid.cell_volume(), lower_radius: rl, upper_radius: ru })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Boundary;

    fn tail4() -> Primitive {
        Primitive::PowerTail { amplitude: 4.0, exponent: 2.0, core: 1.0 }
    }

    #[test]
    fn build_examples() {
        let p = ModelParams::new(3, 1.0, 0.1).unwrap();
        let g = Grid::centered(&[4, 4, 4], 0.5, Boundary::FrozenFarField).unwrap();
        let c = build(&InitialDataSpec::isotropic(Recipe::new(vec![Primitive::Constant { value: 0.7 }])), &g, &p).unwrap();
        assert_eq!(c.len(), 6);
        assert!(c.iter().flatten().all(|v| *v == 0.7));
        let r = Recipe::new(vec![tail4()]);
        assert!((r.eval(&[1.0, 0.0, 0.0]).unwrap() - 2.0).abs() < 1e-15);

        let bump = Recipe::new(vec![
            Primitive::Constant { value: 0.5 },
            Primitive::GaussianBump { amplitude: 2.0, width: 0.3, center: vec![0.1, 0.2, 0.0] },
        ]);
        assert!((bump.eval(&[0.1, 0.2, 0.0]).unwrap() - 2.5).abs() < 1e-15);
    }

    #[test]
    fn incompatible_tail_rejected() {
        let p = ModelParams::new(3, 1.0, 0.1).unwrap();
        let fast = InitialDataSpec::isotropic(Recipe::new(vec![Primitive::PowerTail {
            amplitude: 1.0,
            exponent: 3.0,
            core: 1.0,
        }]));
        assert!(matches!(fast.validate(&p), Err(Error::NotAdmissible(_))));
        let pme = ModelParams::new(3, -0.5, 0.1).unwrap();
        let grow = InitialDataSpec::isotropic(Recipe::new(vec![Primitive::PowerTail {
            amplitude: 1.0,
            exponent: -5.0,
            core: 1.0,
        }]));
        assert!(grow.validate(&pme).is_err());
    }

    #[test]
    fn horizon_examples() {
        let p = ModelParams::new(3, 1.0, 0.1).unwrap();
        let spec = InitialDataSpec::isotropic(Recipe::new(vec![tail4()]));
        let h = horizon_estimate(&spec, &p);
        assert_eq!(h.t1, 4.0);
        assert_eq!(h.t2, f64::INFINITY);
        assert_eq!(h.t_bar_scale, 4.0);

        let pme = ModelParams::new(2, -0.5, 0.1).unwrap();
        let c = InitialDataSpec::isotropic(Recipe::new(vec![Primitive::Constant { value: 1.0 }]));
        assert_eq!(horizon_estimate(&c, &pme).t1, f64::INFINITY);
        // A constant has limsup |x|^{-4} f = 0, and 0^{-2} = ∞.
        assert_eq!(horizon_estimate(&c, &pme).t2, f64::INFINITY);
        let heat = ModelParams::new(2, 0.0, 0.1).unwrap();
        assert_eq!(horizon_estimate(&c, &heat).t2, f64::INFINITY);
    }

    #[test]
    fn gaussian_growth_sets_t2() {
        let p = ModelParams::new(2, 0.0, 0.1).unwrap();
        let sup = BarrierSpec::new(BarrierCase::SuperHeat, 2, 0.0, 1.0, 2.0).unwrap();
        let spec = InitialDataSpec::isotropic(Recipe::new(vec![Primitive::BarrierTrace { barrier: sup, scale: 1.0 }]));
        // exp(ĉ n |x|²/(4T)) with ĉ = 0.75, n = 2, T = 2.
        let h = horizon_estimate(&spec, &p);
        assert!((h.t2 - 1.0 / (0.75 * 2.0 / 8.0)).abs() < 1e-12);
    }

    #[test]
    fn perturbation_budget() {
        let p = ModelParams::new(2, 0.0, 0.1).unwrap();
        let bumps = vec![Bump { amplitude: 1.0, width: 0.5, center: vec![0.0, 0.0] }];
        let mass = std::f64::consts::PI * 0.25;
        let ok = InitialDataSpec::isotropic(Recipe::new(vec![
            Primitive::Constant { value: 1.0 },
            Primitive::L1Perturbation { bumps: bumps.clone(), budget: mass * 1.01 },
        ]));
        assert!(ok.validate(&p).is_ok());
        assert!((ok.components[0].perturbation_l1(2) - mass).abs() < 1e-14);
        let over = InitialDataSpec::isotropic(Recipe::new(vec![Primitive::L1Perturbation { bumps, budget: mass * 0.99 }]));
        assert!(over.validate(&p).is_err());
    }

    fn truncation_setup() -> (Grid, BarrierSpec, BarrierSpec) {
        let g = Grid::centered(&[16, 16, 16], 0.5, Boundary::FrozenFarField).unwrap();
        let lower = BarrierSpec::new(BarrierCase::FdeSuperCriticalTMinus, 3, 1.0, 1.0, 100.0).unwrap();
        let upper = BarrierSpec::new(BarrierCase::SuperFde, 3, 1.0, 1e5, 100.0).unwrap();
        (g, lower, upper)
    }

    #[test]
    fn truncation_examples() {
        let (g, lower, upper) = truncation_setup();
        let p = ModelParams::new(3, 1.0, 0.1).unwrap();
        let zero = vec![vec![0.0; g.len()]; 6];
        let t = sandwich_truncate(&zero, &g, 1.0, &lower, &upper).unwrap();
        for (k, v) in t.fields[0].iter().enumerate() {
            let x = &g.center(k)[..3];
            assert!((v - 0.25 * psi_eval(&lower, x, 0.0).unwrap()).abs() < 1e-15);
        }
        let big = Primitive::PowerTail { amplitude: 60.0, exponent: 2.0, core: 1.0 };
        let inside = build(&InitialDataSpec::isotropic(Recipe::new(vec![big])), &g, &p).unwrap();
        let t = sandwich_truncate(&inside, &g, 8.0, &lower, &upper).unwrap();
        assert_eq!(t.l1_gap, 0.0);
        assert_eq!(t.fields, inside);
    }

    #[test]
    fn truncation_gap_decreases_with_level() {
        let (g, lower, upper) = truncation_setup();
        let p = ModelParams::new(3, 1.0, 0.1).unwrap();
        let data = build(&InitialDataSpec::isotropic(Recipe::new(vec![tail4()])), &g, &p).unwrap();
        let mut prev = f64::INFINITY;
        for m in [1.0, 2.0, 4.0, 8.0] {
            let t = sandwich_truncate(&data, &g, m, &lower, &upper).unwrap();
            assert!(t.l1_gap < prev, "m = {m}: {} !< {prev}", t.l1_gap);
            let again = sandwich_truncate(&t.fields, &g, m, &lower, &upper).unwrap();
            assert_eq!(again.l1_gap, 0.0);
            prev = t.l1_gap;
        }
    }

    #[test]
    fn crossed_barriers_rejected() {
        let (g, lower, _) = truncation_setup();
        let low_upper = BarrierSpec::new(BarrierCase::SuperFde, 3, 1.0, 1.0, 100.0).unwrap();
        let zero = vec![vec![0.0; g.len()]; 6];
        assert!(matches!(sandwich_truncate(&zero, &g, 1.0, &lower, &low_upper), Err(Error::CrossedBarriers { .. })));
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(32))]

        #[test]
        fn build_is_monotone(c in 0.1f64..2.0, extra in 0.0f64..1.0, amp in 0.0f64..3.0, width in 0.1f64..1.0) {
            let g = Grid::centered(&[8, 8], 0.25, Boundary::FrozenFarField).unwrap();
            let p = ModelParams::new(2, 0.5, 0.1).unwrap();
            let bump = Primitive::GaussianBump { amplitude: amp, width, center: vec![0.1, -0.2] };
            let lo = build(&InitialDataSpec::isotropic(Recipe::new(vec![Primitive::Constant { value: c }, bump.clone()])), &g, &p).unwrap();
            let hi = build(&InitialDataSpec::isotropic(Recipe::new(vec![Primitive::Constant { value: c + extra }, bump])), &g, &p).unwrap();
            for (a, b) in lo.iter().flatten().zip(hi.iter().flatten()) {
                proptest::prop_assert!(a <= b);
            }
        }

        #[test]
        fn truncation_is_idempotent(amp in 0.0f64..100.0, m in 1.0f64..8.0) {
            let (g, lower, upper) = truncation_setup();
            let p = ModelParams::new(3, 1.0, 0.1).unwrap();
            let f = Primitive::PowerTail { amplitude: amp, exponent: 2.0, core: 0.5 };
            let data = build(&InitialDataSpec::isotropic(Recipe::new(vec![f])), &g, &p).unwrap();
            let once = sandwich_truncate(&data, &g, m, &lower, &upper).unwrap();
            let twice = sandwich_truncate(&once.fields, &g, m, &lower, &upper).unwrap();
            proptest::prop_assert_eq!(twice.l1_gap, 0.0);
            proptest::prop_assert_eq!(twice.fields, once.fields);
        }

        #[test]
        fn t1_scales_with_the_data(a in 0.1f64..10.0, lambda in 0.1f64..10.0, alpha in 0.67f64..=1.0) {
            let p = ModelParams::new(3, alpha, 0.1).unwrap();
            let tail = |amplitude| InitialDataSpec::isotropic(Recipe::new(vec![Primitive::PowerTail {
                amplitude,
                exponent: 2.0 / alpha,
                core: 1.0,
            }]));
            let t = horizon_estimate(&tail(a), &p).t1;
            let scaled = horizon_estimate(&tail(lambda * a), &p).t1;
            proptest::prop_assert!((scaled - lambda.powf(1.0 / alpha) * t).abs() <= 1e-12 * scaled);
        }
    }
}
