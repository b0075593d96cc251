use ricci_core::flow::{integrate, FlowMode, IntegratorConfig};
use ricci_core::homogeneous::{DiagonalMetric, MilnorSignature};
use ricci_core::maxprinciple::{
    null_vector_condition_check, null_vector_triples, p_identity_check, p_lower_bound_check, pinched_triples,
    pinching_monitor, uniform_triples, CheckReport,
};
use ricci_core::rng::derive_seed;

use crate::error::CliError;
use crate::output::{num, plot_script, Csv, Curve, Run};
use crate::settings::{opt, OptSpec};

pub const OPTIONS: &[OptSpec] = &[
    opt("trials", Some("100000"), "random eigenvalue triples per suite"),
    opt("eps", Some("0.1"), "pinching constant ε in (0, 1/3]"),
    opt("monitor-init", Some("1,1.2,1.5"), "initial SU(2) metric A,B,C of the pinching monitor run"),
    opt("monitor-t-end", Some("1"), "final time of the pinching monitor run"),
];

pub fn run(run: &mut Run) -> Result<(), CliError> {
    let s = run.settings();
    let trials = s.usize("trials")?;
    let eps = s.f64("eps")?;
    let seed = s.u64("seed")?;
    let init = s.f64_list("monitor-init")?;
    let t_end = s.positive("monitor-t-end")?;
    let [a, b, c] = init[..] else {
        return Err(CliError::Invalid("monitor-init needs A,B,C".into()));
    };
    if trials == 0 {
        return Err(CliError::Invalid("trials must be positive".into()));
    }

    let reports: Vec<CheckReport> = vec![
        p_identity_check(&uniform_triples(trials, -10.0, 10.0, derive_seed(seed, 0))),
        p_lower_bound_check(&pinched_triples(trials, eps, derive_seed(seed, 1)), eps)?,
        null_vector_condition_check(&null_vector_triples(trials, eps, derive_seed(seed, 2)), eps)?,
    ];
    let g0 = DiagonalMetric::new(a, b, c)?;
    let traj = integrate(MilnorSignature::su2(), &g0, &IntegratorConfig::with_t_end(t_end), FlowMode::Unnormalized)?;
    let monitor = pinching_monitor(&traj, None)?;

    let mut csv = Csv::new("check,samples,violations,worst_slack");
    for r in &reports {
        csv.cells(&[r.check.clone(), r.samples.to_string(), r.violations.to_string(), num(r.worst_slack)]);
    }
    let c0 = monitor.values[0];
    let bound = c0 * (1.0 + 1e-6);
    let over = monitor.values.iter().filter(|v| **v > bound).count();
    let worst = monitor.values.iter().map(|v| bound - v).fold(f64::INFINITY, f64::min);
    csv.cells(&["pinching_monitor".into(), monitor.values.len().to_string(), over.to_string(), num(worst)]);
    run.write_csv("pinch_report.csv", csv)?;

    let mut series = Csv::new("t,C");
    for (t, v) in monitor.times.iter().zip(&monitor.values) {
        series.row(&[*t, *v]);
    }
    run.write_csv("pinching.csv", series)?;
    run.write(
        "plot.gp",
        &plot_script(
            "pinching quotient (S − R²/3) / R^(2−δ)",
            &[("C(t)", false, vec![Curve { file: "pinching.csv", x: 1, y: 2, title: "C" }])],
        ),
    )?;

    for r in &reports {
        run.check(
            &r.check,
            r.pass(),
            format!(
                "{} samples ({} rejected), {} violations, worst slack {:e}",
                r.samples, r.rejected, r.violations, r.worst_slack
            ),
        );
    }
    run.check(
        "pinching_monitor",
        monitor.pass,
        format!(
            "δ = {}, max C(t)/C(0) − 1 = {:e}",
            monitor.delta,
            monitor.values.iter().fold(0.0f64, |m, v| m.max(v / c0 - 1.0))
        ),
    );
    Ok(())
}
