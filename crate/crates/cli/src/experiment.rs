//! Orchestration of one experiment: certificates, ε sweep, limit run, diagnostics.

use std::path::Path;

use carleman::barriers::{
    calibrate_kinetic, calibrate_super_fde_radius, certify_limit_residual, BarrierCase, BarrierSpec, CertifyOptions,
    ResidualMode,
};
use carleman::diagnostics::{
    barrier_bound_audit, contraction_series, convergence_report, entropy_series, ficks_residual, flux_l2,
    ordering_series, DiagnosticsReport, Verdict, Witness,
};
use carleman::initial_data::{build, InitialDataSpec, Recipe};
use carleman::kinetic::{advance, FarField, KineticRun, SolverOptions};
use carleman::limit::{advance_limit, LimitOptions, LimitRun};
use carleman::model::io::{write_binary, SolverKind};
use carleman::model::{Boundary, CutoffKind, KineticState, TestCutoff};
use log::{info, warn};
use rayon::prelude::*;
use serde_json::json;

use crate::artifacts::Artifacts;
use crate::config::Experiment;
use crate::Failure;

fn solver(context: &str) -> impl Fn(carleman::Error) -> Failure + '_ {
    move |e| Failure::Solver(format!("{context}: {e}"))
}

fn io(e: std::io::Error) -> Failure {
    Failure::Io(e.to_string())
}

pub fn eps_tag(eps: f64) -> String {
    format!("eps_{eps:e}")
}

pub struct Outcome {
    pub report: DiagnosticsReport,
    pub files: usize,
}

pub fn run(exp: &Experiment, out: &Path, seed: u64, certify_only: bool) -> Result<Outcome, Failure> {
    let mut art = Artifacts::create(out).map_err(io)?;
    art.write_json(
        "config.json",
        &json!({
            "config": exp.config,
            "resolved": { "t_end": exp.t_end, "snapshots": exp.schedule, "seed": seed, "warnings": exp.warnings },
        }),
    )
    .map_err(io)?;
    for w in &exp.warnings {
        warn!("{w}");
    }
    let mut report = DiagnosticsReport::default();

    let certify = exp.config.barriers.as_ref().and_then(|b| b.certify.clone());
    if certify.is_some() || certify_only {
        let samples = certify.map_or(10_000, |c| c.samples);
        certify_barriers(exp, seed, samples, &mut art, &mut report)?;
    }
    if !certify_only {
        simulate(exp, &mut art, &mut report)?;
    }

    art.write_json("diagnostics.json", &report).map_err(io)?;
    art.write("series.csv", report.series_csv().as_bytes()).map_err(io)?;
    let manifest = art.finish().map_err(io)?;
    Ok(Outcome { report, files: manifest.files.len() })
}

fn certify_barriers(
    exp: &Experiment,
    seed: u64,
    samples: usize,
    art: &mut Artifacts,
    report: &mut DiagnosticsReport,
) -> Result<(), Failure> {
    let opts = CertifyOptions { samples, seed, ..CertifyOptions::default() };
    for (name, spec) in [("lower", &exp.lower), ("upper", &exp.upper)] {
        let Some(spec) = spec else { continue };
        let mut spec: BarrierSpec = spec.clone();
        if spec.case == BarrierCase::SuperFde {
            let (calibrated, _) = calibrate_super_fde_radius(&spec, samples, seed).map_err(solver(name))?;
            info!("{name}: growing Gaussian certified from R = {}", calibrated.r);
            spec = calibrated;
        }
        let limit = certify_limit_residual(&spec, samples, seed, ResidualMode::ClosedForm, 1e-9).map_err(solver(name))?;
        art.write_json(&format!("certificates/{name}_limit.json"), &limit).map_err(io)?;
        report.verdicts.push(Verdict {
            name: format!("{name}: limit residual sign ({})", spec.case.name()),
            passed: limit.passed,
            value: limit.worst_residual,
            comparison: limit.required_sign.clone(),
            tolerance: limit.slack,
            witness: Witness { t: Some(limit.worst_point.1), ..Witness::default() },
        });
        for p in &exp.params {
            let name_eps = format!("{name}: kinetic region at eps = {}", p.epsilon);
            match calibrate_kinetic(&spec, p.epsilon, &exp.rate, &opts) {
                Ok(cert) => {
                    art.write_json(&format!("certificates/{name}_{}.json", eps_tag(p.epsilon)), &cert).map_err(io)?;
                    report.verdicts.push(Verdict {
                        name: format!("{name_eps} (coefficient {})", cert.coefficient),
                        passed: cert.passed,
                        value: cert.max_relative_residual,
                        comparison: cert.required_sign.clone(),
                        tolerance: cert.slack_rel,
                        witness: Witness::default(),
                    });
                }
                Err(carleman::Error::Calibration(msg)) => {
                    warn!("{msg}");
                    report.verdicts.push(Verdict::at_most(name_eps, f64::MAX, opts.slack_rel.unwrap_or(0.0), Witness::default()));
                }
                Err(e) => return Err(solver(name)(e)),
            }
        }
    }
    Ok(())
}

fn far_field(exp: &Experiment, spec: &InitialDataSpec) -> Option<FarField> {
    if exp.grid.boundary() != Boundary::FrozenFarField {
        return None;
    }
    let m = exp.params[0].ncomp();
    let recipe = |i: usize| -> &Recipe { if spec.components.len() == 1 { &spec.components[0] } else { &spec.components[i] } };
    // Recipes were validated, so evaluation only fails on barrier traces outside their life span.
    Some(FarField::new(&exp.grid, |i, x| recipe(i % m).eval(x).unwrap_or(0.0)))
}

fn scalar_far_field(exp: &Experiment, spec: &InitialDataSpec) -> Option<FarField> {
    if exp.grid.boundary() != Boundary::FrozenFarField {
        return None;
    }
    let m = exp.params[0].ncomp();
    Some(FarField::scalar(&exp.grid, |x| {
        (0..m)
            .map(|i| {
                let r = if spec.components.len() == 1 { &spec.components[0] } else { &spec.components[i] };
                r.eval(x).unwrap_or(0.0)
            })
            .sum()
    }))
}

fn with_extra(spec: &InitialDataSpec, extra: &Recipe) -> InitialDataSpec {
    InitialDataSpec {
        components: spec
            .components
            .iter()
            .map(|r| Recipe::new(r.terms.iter().chain(&extra.terms).cloned().collect()))
            .collect(),
    }
}

fn sweep(exp: &Experiment, spec: &InitialDataSpec) -> Result<Vec<KineticRun>, Failure> {
    let fields = build(spec, &exp.grid, &exp.params[0]).map_err(|e| Failure::Config(vec![format!("initial_data: {e}")]))?;
    let initial = KineticState::from_fields(exp.grid.clone(), &fields, 0.0).map_err(solver("initial data"))?;
    let far = far_field(exp, spec);
    let opts = SolverOptions { region_of_interest: Some(exp.region.clone()), ..SolverOptions::default() };
    exp.params
        .par_iter()
        .map(|p| {
            advance(&initial, p, &exp.rate, exp.t_end, &exp.schedule, far.as_ref(), &opts)
                .map_err(|e| Failure::Solver(format!("kinetic run at eps = {}: {e}", p.epsilon)))
        })
        .collect()
}

fn write_kinetic(art: &mut Artifacts, run: &KineticRun, prefix: &str) -> Result<(), Failure> {
    let dir = format!("{prefix}/{}", eps_tag(run.params.epsilon));
    for (k, s) in run.snapshots.iter().enumerate() {
        let mut buf = Vec::new();
        write_binary(&mut buf, SolverKind::Kinetic, s.grid(), s.t(), &s.fields()).map_err(solver("snapshot"))?;
        art.write(&format!("{dir}/snapshot_{k:03}.bin"), &buf).map_err(io)?;
    }
    art.write(&format!("{dir}/step_log.csv"), run.step_log_csv().as_bytes()).map_err(io)
}

fn write_limit(art: &mut Artifacts, run: &LimitRun) -> Result<(), Failure> {
    for (k, s) in run.snapshots.iter().enumerate() {
        let mut buf = Vec::new();
        write_binary(&mut buf, SolverKind::Limit, &run.grid, s.t, std::slice::from_ref(&s.rho)).map_err(solver("snapshot"))?;
        art.write(&format!("limit/snapshot_{k:03}.bin"), &buf).map_err(io)?;
    }
    Ok(())
}

fn cutoff(exp: &Experiment) -> Result<TestCutoff, Failure> {
    let g = &exp.grid;
    let n = g.dim();
    let center: Vec<f64> = (0..n).map(|a| g.origin()[a] + 0.5 * g.length(a)).collect();
    let radius = (0..n).map(|a| g.length(a)).fold(f64::INFINITY, f64::min) * 0.25;
    TestCutoff::new(CutoffKind::SmoothBump, &center, radius).map_err(solver("cutoff"))
}

fn simulate(exp: &Experiment, art: &mut Artifacts, report: &mut DiagnosticsReport) -> Result<(), Failure> {
    let d = &exp.config.diagnostics;
    let spec = &exp.config.initial_data;
    info!("running {} kinetic runs to t = {}", exp.params.len(), exp.t_end);
    let runs = sweep(exp, spec)?;
    for r in &runs {
        for w in &r.warnings {
            warn!("eps = {}: {w}", r.params.epsilon);
        }
        write_kinetic(art, r, "kinetic")?;
    }

    let rho0: Vec<f64> = runs[0].snapshots[0].rho();
    let limit = advance_limit(&rho0, &exp.grid, &exp.rate, exp.t_end, &exp.schedule, scalar_far_field(exp, spec).as_ref(), &LimitOptions::default())
        .map_err(solver("limit run"))?;
    write_limit(art, &limit)?;

    let periodic = exp.grid.boundary() == Boundary::Periodic;
    for r in &runs {
        let tag = eps_tag(r.params.epsilon);
        if d.mass {
            report.series.insert(format!("mass/{tag}"), r.log.iter().map(|s| (s.t, s.mass)).collect());
            if periodic {
                report.verdicts.push(Verdict::at_most(format!("mass drift at {tag}"), r.mass_drift(), d.mass_tolerance, Witness::default()));
            }
        }
        if d.bounds {
            report.series.insert(format!("min/{tag}"), r.log.iter().map(|s| (s.t, s.min_u)).collect());
            report.series.insert(format!("max/{tag}"), r.log.iter().map(|s| (s.t, s.max_u)).collect());
            if periodic {
                let s0 = &r.snapshots[0];
                let (lo, hi) = r.range();
                let excess = (s0.min() - lo).max(hi - s0.max());
                report.verdicts.push(Verdict::at_most(format!("initial bounds kept at {tag}"), excess, d.bound_tolerance, Witness::default()));
            }
        }
        if d.entropy {
            let phi = cutoff(exp)?;
            report.series.insert(format!("entropy/{tag}"), entropy_series(r, &phi).map_err(solver("entropy"))?);
        }
        if d.ficks {
            let series = r
                .snapshots
                .iter()
                .map(|s| ficks_residual(s, &r.params, &r.rate, &exp.region).map(|f| (s.t(), f.total_l2())))
                .collect::<Result<Vec<_>, _>>()
                .map_err(solver("ficks residual"))?;
            report.series.insert(format!("ficks/{tag}"), series);
        }
    }
    if d.flux {
        let phi = cutoff(exp)?;
        let mut csv = String::from("epsilon,plain,weighted\n");
        for r in &runs {
            let f = flux_l2(r, &phi).map_err(solver("flux"))?;
            csv.push_str(&format!("{:e},{:e},{:e}\n", r.params.epsilon, f.plain, f.weighted));
        }
        art.write("flux.csv", csv.as_bytes()).map_err(io)?;
    }
    if d.convergence {
        let refs: Vec<&KineticRun> = runs.iter().collect();
        let table = convergence_report(&refs, &limit, &exp.region).map_err(solver("convergence"))?;
        art.write("convergence.csv", table.to_csv().as_bytes()).map_err(io)?;
        if table.rows.len() >= 2 {
            let last = table.rows.last().expect("nonempty");
            report.verdicts.push(Verdict {
                name: "e(eps) strictly decreasing".into(),
                passed: table.error_decreasing,
                value: last.error,
                comparison: "decreasing".into(),
                tolerance: 0.0,
                witness: Witness { t: Some(last.error_time), ..Witness::default() },
            });
            report.verdicts.push(Verdict {
                name: "isotropy gap strictly decreasing".into(),
                passed: table.isotropy_decreasing,
                value: last.isotropy_gap,
                comparison: "decreasing".into(),
                tolerance: 0.0,
                witness: Witness::default(),
            });
        }
        report.sweeps.insert("convergence".into(), table);
    }
    if let Some(extra) = &d.contraction {
        let companion = sweep(exp, &with_extra(spec, extra))?;
        for (a, b) in runs.iter().zip(&companion) {
            let tag = eps_tag(a.params.epsilon);
            let c = contraction_series(b, a).map_err(solver("contraction"))?;
            let growth = c.windows(2).map(|w| w[1].1 - w[0].1).fold(f64::NEG_INFINITY, f64::max);
            report.verdicts.push(Verdict::at_most(format!("contraction nonincreasing at {tag}"), growth, 1e-8, Witness::default()));
            report.series.insert(format!("contraction/{tag}"), c);
            let o = ordering_series(a, b).map_err(solver("ordering"))?;
            if o[0].1 >= 0.0 {
                let worst = o.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
                report.verdicts.push(Verdict::at_least(format!("ordering kept at {tag}"), worst, -1e-10, Witness::default()));
            }
            report.series.insert(format!("ordering/{tag}"), o);
        }
    }
    if exp.lower.is_some() || exp.upper.is_some() {
        let tol = exp.config.barriers.as_ref().map_or(1e-6, |b| b.audit_tolerance);
        for r in &runs {
            let tag = eps_tag(r.params.epsilon);
            let audit = barrier_bound_audit(r, exp.lower.as_ref(), exp.upper.as_ref(), &exp.region).map_err(|e| match e {
                carleman::Error::BarrierPrecondition { .. } => Failure::Config(vec![format!("initial_data: {e}")]),
                e => Failure::Solver(format!("barrier audit: {e}")),
            })?;
            if let Some(v) = audit.lower_margin {
                report.verdicts.push(Verdict::at_least(format!("lower barrier margin at {tag}"), v, -tol, audit.lower_witness.clone()));
            }
            if let Some(v) = audit.upper_margin {
                report.verdicts.push(Verdict::at_most(format!("upper barrier margin at {tag}"), v, tol, audit.upper_witness.clone()));
            }
        }
    }
    Ok(())
}
