//! Interaction rates and the collision map.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateKind {
    /// k(a, b) = (a + b)^α.
    PowerSum,
    /// A_i = ρ^α (ρ − 2n u_i): one rate ρ^α shared by every pair.
    MeanField,
    /// A_i = Σ_j (u_j^{α+1} − u_i^{α+1}).
    PowerDifference,
}

impl RateKind {
    pub fn name(self) -> &'static str {
        match self {
            RateKind::PowerSum => "power_sum",
            RateKind::MeanField => "mean_field",
            RateKind::PowerDifference => "power_difference",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateSpec {
    pub kind: RateKind,
    pub alpha: f64,
}

impl RateSpec {
    pub fn new(kind: RateKind, alpha: f64) -> Self {
        RateSpec { kind, alpha }
    }

    pub fn power_sum(alpha: f64) -> Self {
        RateSpec { kind: RateKind::PowerSum, alpha }
    }

    /// Pairwise rate k(a, b). The mean-field kind has no pairwise form.
    ///
    /// For the power-difference kind this is the divided difference of
    /// s ↦ s^{α+1}, so that k(a, b)(a − b) is the exchange between a and b.
    pub fn rate(&self, a: f64, b: f64) -> Result<f64> {
        check_density(a)?;
        check_density(b)?;
        let al = self.alpha;
        match self.kind {
            RateKind::PowerSum => {
                let s = a + b;
                if s == 0.0 && al < 0.0 {
                    return Err(Error::SingularRate { alpha: al });
                }
                Ok(s.powf(al))
            }
            RateKind::PowerDifference => {
                if a == b {
                    if a == 0.0 && al < 0.0 {
                        return Err(Error::SingularRate { alpha: al });
                    }
                    Ok((al + 1.0) * a.powf(al))
                } else {
                    Ok((b.powf(al + 1.0) - a.powf(al + 1.0)) / (b - a))
                }
            }
            RateKind::MeanField => Err(Error::NotPairwise(self.kind.name())),
        }
    }

    /// The rate acting between components `i` and `j` of the local state `u`.
    pub fn local_rate(&self, u: &[f64], i: usize, j: usize) -> Result<f64> {
        match self.kind {
            RateKind::MeanField => {
                let rho: f64 = u.iter().sum();
                if rho == 0.0 && self.alpha < 0.0 {
                    return Err(Error::SingularRate { alpha: self.alpha });
                }
                Ok(rho.powf(self.alpha))
            }
            _ => self.rate(u[i], u[j]),
        }
    }

    /// Effective rate at the isotropic state u_i = ρ/2n: the linearized
    /// collision map there is −2n·k_eff times the deviation from the mean.
    pub fn equilibrium_rate(&self, rho: f64, n: usize) -> Result<f64> {
        if !(rho > 0.0) {
            return Err(Error::NonPositive { location: "equilibrium rate".into(), value: rho });
        }
        let m = (2 * n) as f64;
        Ok(match self.kind {
            RateKind::PowerSum => (2.0 * rho / m).powf(self.alpha),
            RateKind::MeanField => rho.powf(self.alpha),
            RateKind::PowerDifference => (self.alpha + 1.0) * (rho / m).powf(self.alpha),
        })
    }

    /// Bounds (min k, max k) of the rate over densities in [1/λ, λ]; the
    /// admissibility constant is M(λ) = max(max k, 1/min k).
    pub fn admissibility_bounds(&self, lambda: f64, n: usize) -> Result<(f64, f64)> {
        if !(lambda >= 1.0) {
            return Err(invalid("lambda", format!("{lambda} must be at least 1")));
        }
        let (lo, hi) = (1.0 / lambda, lambda);
        let ends = match self.kind {
            RateKind::PowerSum => [(2.0 * lo).powf(self.alpha), (2.0 * hi).powf(self.alpha)],
            RateKind::MeanField => {
                let m = (2 * n) as f64;
                [(m * lo).powf(self.alpha), (m * hi).powf(self.alpha)]
            }
            // The divided difference of a monotone power lies between the endpoint derivatives.
            RateKind::PowerDifference => {
                [(self.alpha + 1.0) * lo.powf(self.alpha), (self.alpha + 1.0) * hi.powf(self.alpha)]
            }
        };
        Ok((ends[0].min(ends[1]), ends[0].max(ends[1])))
    }

    fn validate_state(&self, u: &[f64]) -> Result<()> {
        for &v in u {
            check_density(v)?;
        }
        if self.alpha < 0.0 {
            let singular = match self.kind {
                RateKind::PowerSum => {
                    let zeros = u.iter().filter(|&&v| v == 0.0).count();
                    zeros >= 2
                }
                RateKind::MeanField => u.iter().all(|&v| v == 0.0),
                RateKind::PowerDifference => false,
            };
            if singular {
                return Err(Error::SingularRate { alpha: self.alpha });
            }
        }
        Ok(())
    }

    /// Writes A(u) into `out`: component i is Σ_j k(u_j, u_i)(u_j − u_i) for
    /// the power-sum kind, and the corresponding display for the other kinds.
    pub fn collision_into(&self, u: &[f64], out: &mut [f64]) -> Result<()> {
        self.validate_state(u)?;
        self.collision_unchecked(u, out);
        Ok(())
    }

    pub fn collision_map(&self, u: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; u.len()];
        self.collision_into(u, &mut out)?;
        Ok(out)
    }

    pub(crate) fn collision_unchecked(&self, u: &[f64], out: &mut [f64]) {
        let m = u.len();
        out.iter_mut().for_each(|o| *o = 0.0);
        match self.kind {
            RateKind::PowerSum => {
                for i in 0..m {
                    for j in i + 1..m {
                        let e = (u[i] + u[j]).powf(self.alpha) * (u[j] - u[i]);
                        out[i] += e;
                        out[j] -= e;
                    }
                }
            }
            RateKind::MeanField => {
                let rho: f64 = u.iter().sum();
                let k = rho.powf(self.alpha);
                for i in 0..m {
                    for j in i + 1..m {
                        let e = k * (u[j] - u[i]);
                        out[i] += e;
                        out[j] -= e;
                    }
                }
            }
            RateKind::PowerDifference => {
                let p = self.alpha + 1.0;
                for i in 0..m {
                    for j in i + 1..m {
                        let e = u[j].powf(p) - u[i].powf(p);
                        out[i] += e;
                        out[j] -= e;
                    }
                }
            }
        }
    }

    /// Row-major Jacobian ∂A_i/∂u_j. Every column sums to zero.
    pub(crate) fn jacobian_unchecked(&self, u: &[f64], jac: &mut [f64]) {
        let m = u.len();
        jac[..m * m].iter_mut().for_each(|v| *v = 0.0);
        let al = self.alpha;
        match self.kind {
            RateKind::PowerSum => {
                for i in 0..m {
                    for j in 0..m {
                        if i == j {
                            continue;
                        }
                        // e = s^α (u_j − u_i) with s = u_i + u_j.
                        let s = u[i] + u[j];
                        let d = u[j] - u[i];
                        let k = s.powf(al);
                        let bend = if d == 0.0 { 0.0 } else { al * s.powf(al - 1.0) * d };
                        jac[i * m + j] += bend + k;
                        jac[i * m + i] += bend - k;
                    }
                }
            }
            RateKind::MeanField => {
                let rho: f64 = u.iter().sum();
                let k = rho.powf(al);
                let dk = if al == 0.0 { 0.0 } else { al * rho.powf(al - 1.0) };
                let mf = m as f64;
                for i in 0..m {
                    let bracket = rho - mf * u[i];
                    for j in 0..m {
                        let delta = if i == j { 1.0 } else { 0.0 };
                        jac[i * m + j] = dk * bracket + k * (1.0 - mf * delta);
                    }
                }
            }
            RateKind::PowerDifference => {
                let mf = m as f64;
                for i in 0..m {
                    for j in 0..m {
                        let dj = (al + 1.0) * u[j].powf(al);
                        jac[i * m + j] = if i == j { dj - mf * dj } else { dj };
                    }
                }
            }
        }
    }

    /// (A(u) − A(v))·sgn⁺(u − v), evaluated pair by pair.
    ///
    /// With D_{ji} the change of the exchange from j into i, the pairing is
    /// Σ_{i<j} (sgn⁺_i − sgn⁺_j) D_{ji}; pairs with equal signs cancel exactly.
    pub fn dissipation_pairing(&self, u: &[f64], v: &[f64]) -> Result<f64> {
        if u.len() != v.len() {
            return Err(invalid("v", "length differs from u"));
        }
        self.validate_state(u)?;
        self.validate_state(v)?;
        let m = u.len();
        let s: Vec<f64> = u.iter().zip(v).map(|(a, b)| sgn_plus(a - b)).collect();
        let (ku, kv) = match self.kind {
            RateKind::MeanField => {
                let ru: f64 = u.iter().sum();
                let rv: f64 = v.iter().sum();
                (ru.powf(self.alpha), rv.powf(self.alpha))
            }
            _ => (0.0, 0.0),
        };
        let exchange = |w: &[f64], k: f64, i: usize, j: usize| -> f64 {
            match self.kind {
                RateKind::PowerSum => (w[i] + w[j]).powf(self.alpha) * (w[j] - w[i]),
                RateKind::MeanField => k * (w[j] - w[i]),
                RateKind::PowerDifference => w[j].powf(self.alpha + 1.0) - w[i].powf(self.alpha + 1.0),
            }
        };
        let mut total = 0.0;
        for i in 0..m {
            for j in i + 1..m {
                let w = s[i] - s[j];
                if w != 0.0 {
                    total += w * (exchange(u, ku, i, j) - exchange(v, kv, i, j));
                }
            }
        }
        Ok(total)
    }
}

fn check_density(a: f64) -> Result<()> {
    if !(a >= 0.0) || !a.is_finite() {
        return Err(Error::NonPositive { location: "rate argument".into(), value: a });
    }
    Ok(())
}

/// Positive-part sign: 1 for positive arguments, 0 otherwise (including 0).
pub fn sgn_plus(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DissipativityReport {
    pub samples: usize,
    pub max_violation: f64,
    /// The pair (u, v) attaining `max_violation`.
    pub worst: Option<(Vec<f64>, Vec<f64>)>,
}

impl DissipativityReport {
    pub fn certified(&self, tol: f64) -> bool {
        self.max_violation <= tol
    }
}

/// Samples pairs uniformly in (lo, hi]^{2n} and records the largest pairing.
pub fn t_dissipativity_test(
    spec: &RateSpec,
    n: usize,
    samples: usize,
    range: (f64, f64),
    seed: u64,
) -> Result<DissipativityReport> {
    let (lo, hi) = range;
    if samples == 0 || !(lo >= 0.0 && hi > lo) || !(1..=3).contains(&n) {
        return Err(invalid("t_dissipativity_test", format!("samples {samples}, range {range:?}, n {n}")));
    }
    let m = 2 * n;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut u = vec![0.0; m];
    let mut v = vec![0.0; m];
    let mut best = f64::NEG_INFINITY;
    let mut worst = None;
    for _ in 0..samples {
        for k in 0..m {
            // Uniform on (lo, hi]: 1 − [0, 1) lies in (0, 1].
            u[k] = lo + (hi - lo) * (1.0 - rng.gen::<f64>());
            v[k] = lo + (hi - lo) * (1.0 - rng.gen::<f64>());
        }
        let p = spec.dissipation_pairing(&u, &v)?;
        if p > best {
            best = p;
            worst = Some((u.clone(), v.clone()));
        }
    }
    Ok(DissipativityReport { samples, max_violation: best, worst })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn direct_pairing(spec: &RateSpec, u: &[f64], v: &[f64]) -> f64 {
        let au = spec.collision_map(u).unwrap();
        let av = spec.collision_map(v).unwrap();
        (0..u.len()).map(|i| (au[i] - av[i]) * sgn_plus(u[i] - v[i])).sum()
    }

    #[test]
    fn rate_examples() {
        assert_eq!(RateSpec::power_sum(1.0).rate(1.0, 1.0).unwrap(), 2.0);
        assert_eq!(RateSpec::power_sum(0.0).rate(0.3, 7.0).unwrap(), 1.0);
        assert_eq!(RateSpec::power_sum(0.0).rate(0.0, 0.0).unwrap(), 1.0);
        assert_eq!(RateSpec::power_sum(-1.0).rate(1.0, 3.0).unwrap(), 0.25);
        assert_eq!(RateSpec::power_sum(-0.5).rate(0.0, 0.0), Err(Error::SingularRate { alpha: -0.5 }));
        assert!(RateSpec::new(RateKind::MeanField, 0.5).rate(1.0, 1.0).is_err());
    }

    #[test]
    fn collision_examples() {
        assert_eq!(RateSpec::power_sum(1.0).collision_map(&[2.0, 1.0]).unwrap(), vec![-3.0, 3.0]);
        assert_eq!(RateSpec::power_sum(0.0).collision_map(&[1.0, 0.0]).unwrap(), vec![-1.0, 1.0]);
        for kind in [RateKind::PowerSum, RateKind::MeanField, RateKind::PowerDifference] {
            let a = RateSpec::new(kind, -0.7).collision_map(&[0.4; 6]).unwrap();
            assert!(a.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn pairing_examples() {
        let spec = RateSpec::power_sum(1.0);
        assert_eq!(spec.dissipation_pairing(&[2.0, 1.0], &[1.0, 2.0]).unwrap(), -6.0);
        assert_eq!(direct_pairing(&spec, &[2.0, 1.0], &[1.0, 2.0]), -6.0);
        assert_eq!(spec.dissipation_pairing(&[2.0, 1.0], &[2.0, 1.0]).unwrap(), 0.0);
    }

    #[test]
    fn superlinear_rate_violates_dissipativity() {
        let report = t_dissipativity_test(&RateSpec::power_sum(1.5), 1, 100_000, (0.0, 10.0), 7).unwrap();
        assert!(report.max_violation > 0.0);
        let (u, v) = report.worst.unwrap();
        assert!(direct_pairing(&RateSpec::power_sum(1.5), &u, &v) > 0.0);
    }

    #[test]
    fn admissibility_bounds_bracket_rates() {
        let spec = RateSpec::power_sum(-0.5);
        let (lo, hi) = spec.admissibility_bounds(4.0, 2).unwrap();
        assert!((lo - 8f64.powf(-0.5)).abs() < 1e-15);
        assert!((hi - 0.5f64.powf(-0.5)).abs() < 1e-15);
    }

    #[test]
    fn equilibrium_rate_matches_pairwise_rate() {
        let spec = RateSpec::power_sum(0.5);
        let rho = 3.0;
        let k = spec.rate(rho / 4.0, rho / 4.0).unwrap();
        assert!((spec.equilibrium_rate(rho, 2).unwrap() - k).abs() < 1e-15);
    }

    fn kind_strategy() -> impl Strategy<Value = RateKind> {
        prop_oneof![Just(RateKind::PowerSum), Just(RateKind::MeanField), Just(RateKind::PowerDifference)]
    }

    proptest! {
        #[test]
        fn conservation(u in prop::collection::vec(0.0f64..10.0, 6), alpha in 0.0f64..=1.0, power_diff in any::<bool>()) {
            let kind = if power_diff { RateKind::PowerDifference } else { RateKind::PowerSum };
            let a = RateSpec::new(kind, alpha).collision_map(&u).unwrap();
            let norm: f64 = u.iter().sum();
            prop_assert!(a.iter().sum::<f64>().abs() <= 1e-13 * norm.max(1.0));
        }

        #[test]
        fn symmetry(a in 0.01f64..10.0, b in 0.01f64..10.0, alpha in -1.0f64..=1.0) {
            for kind in [RateKind::PowerSum, RateKind::PowerDifference] {
                let s = RateSpec::new(kind, alpha);
                prop_assert_eq!(s.rate(a, b).unwrap(), s.rate(b, a).unwrap());
            }
        }

        #[test]
        fn equilibrium(c in 1e-6f64..100.0, alpha in -1.0f64..=1.0, kind in kind_strategy()) {
            let a = RateSpec::new(kind, alpha).collision_map(&[c; 4]).unwrap();
            prop_assert!(a.iter().all(|&v| v == 0.0));
        }

        #[test]
        fn monotone_relaxation(u in prop::collection::vec(0.1f64..5.0, 4), alpha in -1.0f64..=1.0) {
            let spec = RateSpec::power_sum(alpha);
            let a = spec.collision_map(&u).unwrap();
            let spread = |w: &[f64]| w.iter().cloned().fold(f64::MIN, f64::max) - w.iter().cloned().fold(f64::MAX, f64::min);
            prop_assume!(spread(&u) > 1e-3);
            let tau = 1e-4;
            let w: Vec<f64> = u.iter().zip(&a).map(|(x, y)| x + tau * y).collect();
            prop_assert!(spread(&w) < spread(&u));
        }

        #[test]
        fn pairing_matches_direct_form(
            u in prop::collection::vec(0.01f64..10.0, 4),
            v in prop::collection::vec(0.01f64..10.0, 4),
            alpha in -1.0f64..=1.0,
            kind in kind_strategy(),
        ) {
            let spec = RateSpec::new(kind, alpha);
            let p = spec.dissipation_pairing(&u, &v).unwrap();
            let d = direct_pairing(&spec, &u, &v);
            prop_assert!((p - d).abs() <= 1e-10 * (1.0 + d.abs()));
        }

        #[test]
        fn jacobian_matches_finite_differences(
            u in prop::collection::vec(0.2f64..3.0, 4),
            alpha in -1.0f64..=1.0,
            kind in kind_strategy(),
        ) {
            let spec = RateSpec::new(kind, alpha);
            let mut jac = vec![0.0; 16];
            spec.jacobian_unchecked(&u, &mut jac);
            let h = 1e-6;
            for j in 0..4 {
                let mut up = u.clone();
                let mut dn = u.clone();
                up[j] += h;
                dn[j] -= h;
                let ap = spec.collision_map(&up).unwrap();
                let an = spec.collision_map(&dn).unwrap();
                let mut col = 0.0;
                for i in 0..4 {
                    let fd = (ap[i] - an[i]) / (2.0 * h);
                    prop_assert!((fd - jac[i * 4 + j]).abs() <= 1e-6 * (1.0 + fd.abs()));
                    col += jac[i * 4 + j];
                }
                prop_assert!(col.abs() <= 1e-12 * (1.0 + jac[j * 4 + j].abs()));
            }
        }
    }
}
