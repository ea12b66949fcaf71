use carleman::diagnostics::{contraction_series, convergence_report, ficks_residual, ordering_series};
use carleman::interaction::RateSpec;
use carleman::kinetic::{advance, SolverOptions};
use carleman::limit::{advance_limit, LimitOptions, LimitRun};
use carleman::model::{Boundary, Grid, KineticState, ModelParams, Region};
use proptest::prelude::*;

const TAU: f64 = std::f64::consts::TAU;

fn rho_at(cells: usize, eps: f64, t_end: f64) -> Vec<f64> {
    let grid = Grid::new(&[cells], &[1.0 / cells as f64], Boundary::Periodic).unwrap();
    let init = KineticState::from_fn(grid, 0.0, |i, x| {
        if i == 0 {
            1.0 + 0.5 * (TAU * x[0]).sin()
        } else {
            1.0 + 0.3 * (TAU * x[0]).cos()
        }
    })
    .unwrap();
    let p = ModelParams::new(1, 0.5, eps).unwrap();
    let run = advance(&init, &p, &RateSpec::power_sum(0.5), t_end, &[t_end], None, &SolverOptions::default()).unwrap();
    run.final_state.rho()
}

fn restrict(fine: &[f64], coarse: usize) -> Vec<f64> {
    let r = fine.len() / coarse;
    fine.chunks(r).map(|c| c.iter().sum::<f64>() / r as f64).collect()
}

#[test]
fn splitting_is_first_order_at_fixed_epsilon() {
    let (eps, t_end) = (0.5, 0.125);
    let levels: Vec<Vec<f64>> = [32, 64, 128, 256].iter().map(|&c| restrict(&rho_at(c, eps, t_end), 32)).collect();
    let reference: Vec<f64> = levels[3].iter().zip(&levels[2]).map(|(f, c)| 2.0 * f - c).collect();
    let err = |v: &[f64]| v.iter().zip(&reference).map(|(a, b)| (a - b).abs()).sum::<f64>() / 32.0;
    let (e0, e1) = (err(&levels[0]), err(&levels[1]));
    let order = (e0 / e1).log2();
    assert!(order >= 0.9, "errors {e0:e}, {e1:e}, order {order}");
}

#[test]
fn ficks_residual_and_isotropy_gap_shrink_with_epsilon() {
    let grid = Grid::new(&[64, 64], &[1.0 / 64.0], Boundary::Periodic).unwrap();
    let rho = grid.sample(|x| 2.0 + (TAU * x[0]).sin() * (TAU * x[1]).cos());
    let init = KineticState::from_fields(grid.clone(), &vec![rho.iter().map(|r| r / 4.0).collect(); 4], 0.0).unwrap();
    let region = Region::central_half(&grid);
    let schedule: Vec<f64> = (1..=8).map(|k| k as f64 * 0.2 / 64.0).collect();
    let t_end = *schedule.last().unwrap();
    let rate = RateSpec::power_sum(0.5);
    let mut ficks = Vec::new();
    let mut runs = Vec::new();
    for eps in [0.2, 0.1, 0.05] {
        let p = ModelParams::new(2, 0.5, eps).unwrap();
        let run = advance(&init, &p, &rate, t_end, &schedule, None, &SolverOptions::default()).unwrap();
        ficks.push(ficks_residual(run.last(), &p, &rate, &region).unwrap().total_l2());
        runs.push(run);
    }
    assert!(ficks.windows(2).all(|w| w[1] < w[0]), "{ficks:?}");
    let limit = advance_limit(&rho, &grid, &rate, t_end, &schedule, None, &LimitOptions::default()).unwrap();
    let refs: Vec<_> = runs.iter().collect();
    let table = convergence_report(&refs, &limit, &region).unwrap();
    assert!(table.isotropy_decreasing && table.error_decreasing, "{}", table.to_csv());
}

fn field(values: &[f64], grid: &Grid) -> Vec<f64> {
    (0..grid.len()).map(|k| values[k % values.len()]).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn comparison_and_contraction(
        base in prop::collection::vec(0.05f64..4.0, 4 * 16),
        other in prop::collection::vec(0.05f64..4.0, 4 * 16),
        lift in prop::collection::vec(0.0f64..1.0, 16),
        alpha in -1.0f64..=1.0,
        eps in 0.05f64..0.5,
    ) {
        let grid = Grid::new(&[4, 4], &[0.25], Boundary::Periodic).unwrap();
        let u: Vec<Vec<f64>> = base.chunks(16).map(|c| field(c, &grid)).collect();
        let v: Vec<Vec<f64>> = u.iter().map(|f| f.iter().zip(&lift).map(|(a, b)| a + b).collect()).collect();
        let w: Vec<Vec<f64>> = other.chunks(16).map(|c| field(c, &grid)).collect();
        let p = ModelParams::new(2, alpha, eps).unwrap();
        let rate = RateSpec::power_sum(alpha);
        let dt = eps * 0.25;
        let schedule: Vec<f64> = (1..=6).map(|k| k as f64 * dt).collect();
        let run = |f: &[Vec<f64>]| {
            let s = KineticState::from_fields(grid.clone(), f, 0.0).unwrap();
            advance(&s, &p, &rate, schedule[5], &schedule, None, &SolverOptions::default()).unwrap()
        };
        let (ru, rv, rw) = (run(&u), run(&v), run(&w));
        for m in ordering_series(&ru, &rv).unwrap() {
            prop_assert!(m.1 >= -1e-10, "ordering {m:?}");
        }
        for (a, b) in [(&ru, &rw), (&rw, &ru), (&rv, &rw)] {
            let c = contraction_series(a, b).unwrap();
            for pair in c.windows(2) {
                prop_assert!(pair[1].1 <= pair[0].1 + 1e-8, "{pair:?}");
            }
        }
    }

    #[test]
    fn limit_mass_and_extrema(values in prop::collection::vec(0.2f64..3.0, 64), alpha in -1.0f64..0.9) {
        let grid = Grid::new(&[8, 8], &[0.125], Boundary::Periodic).unwrap();
        let run = advance_limit(&values, &grid, &RateSpec::power_sum(alpha), 0.01, &[0.0025, 0.005, 0.01], None, &LimitOptions::default())
            .unwrap();
        let m0 = LimitRun::mass(&values, &grid);
        let mut lo = f64::NEG_INFINITY;
        let mut hi = f64::INFINITY;
        for s in &run.snapshots {
            prop_assert!((LimitRun::mass(&s.rho, &grid) - m0).abs() <= 1e-10 * m0);
            let smin = s.rho.iter().copied().fold(f64::INFINITY, f64::min);
            let smax = s.rho.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(smin >= lo - 1e-12 && smax <= hi + 1e-12);
            lo = smin;
            hi = smax;
        }
    }
}
