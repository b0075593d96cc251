use std::sync::Arc;

use num_complex::Complex64;
use ricci_core::kahler::{
    curvature_equation_residual, evolve, mean_aligned_distance, stationary_newton, ComplexTorusGrid, FlatMetric,
    KahlerFlowConfig, KahlerMode, PotentialState,
};

use crate::error::CliError;
use crate::expr::Expr;
use crate::output::{num, plot_script, Csv, Curve, Run};
use crate::settings::{opt, OptSpec};

pub const OPTIONS: &[OptSpec] = &[
    opt("dim", Some("1"), "complex dimension n_c (1 or 2)"),
    opt("grid", None, "samples per real axis (default 64 for n_c = 1, 16 for n_c = 2)"),
    opt("f", Some("0.2*cos(x)"), "data f in the variables x,y (n_c = 1) or x1,y1,x2,y2"),
    opt("mode", Some("ricci-flat"), "ricci-flat | negative"),
    opt("g0", None, "diagonal of the flat background metric (default all ones)"),
    opt("t-end", None, "final time (default 60 for ricci-flat, 20 for negative)"),
    opt("output-interval", Some("0.5"), "time between monitor samples"),
    opt("cfl", Some("0.4"), "fraction of the explicit stability bound"),
];

const AGREEMENT_BAR: f64 = 1e-6;

pub fn run(run: &mut Run) -> Result<(), CliError> {
    let s = run.settings();
    let n_c = s.usize("dim")?;
    let vars: &[&str] = match n_c {
        1 => &["x|x1", "y|y1"],
        2 => &["x1|x", "y1|y", "x2", "y2"],
        _ => return Err(CliError::Invalid(format!("dim must be 1 or 2, got {n_c}"))),
    };
    let n = match s.raw("grid") {
        Some(_) => s.usize("grid")?,
        None if n_c == 1 => 64,
        None => 16,
    };
    let mode = match s.string("mode")? {
        "ricci-flat" => KahlerMode::RicciFlat,
        "negative" => KahlerMode::Negative,
        other => return Err(CliError::Invalid(format!("unknown mode `{other}`"))),
    };
    let t_end = match s.raw("t-end") {
        Some(_) => s.f64("t-end")?,
        None if mode == KahlerMode::RicciFlat => 60.0,
        None => 20.0,
    };
    let cfg = KahlerFlowConfig { t_end, output_interval: s.f64("output-interval")?, cfl: s.f64("cfl")? };
    cfg.validate()?;
    let diag = match s.raw("g0") {
        Some(_) => s.f64_list("g0")?,
        None => vec![1.0; n_c],
    };
    if diag.len() != n_c {
        return Err(CliError::Invalid(format!("g0 needs {n_c} diagonal entries")));
    }
    let mut entries = vec![Complex64::new(0.0, 0.0); n_c * n_c];
    for (i, d) in diag.iter().enumerate() {
        entries[i * n_c + i] = Complex64::new(*d, 0.0);
    }
    let g0 = FlatMetric::new(n_c, entries)?;
    let f_expr = Expr::parse(s.string("f")?, vars)?;

    let settings = run.settings_mut();
    settings.set("grid", n.to_string());
    settings.set("t-end", t_end.to_string());
    run.note(format!("data f = {f_expr}"));

    let grid = Arc::new(ComplexTorusGrid::new(n_c, n)?);
    let f = grid.sample(|x| f_expr.eval(x));
    let state = PotentialState::new(grid.clone(), g0.clone(), &f, vec![0.0; grid.len()], mode)?;
    let traj = evolve(&state, &cfg)?;
    let newton = stationary_newton(&grid, &g0, &f, mode)?;
    let last = traj.states.last().expect("initial state is recorded");

    let mut mon = Csv::new("t,max_dudt,osc,E,trace_min,equiv_K");
    for m in &traj.monitors {
        mon.row(&[m.t, m.max_dudt, m.osc, m.energy, m.trace_min, m.equiv_k]);
    }
    run.write_csv("monitor.csv", mon)?;

    let axes = ["x1", "y1", "x2", "y2"];
    let header = if n_c == 1 { "x,y,u,u_newton".to_string() } else { format!("{},u,u_newton", axes.join(",")) };
    let mut pot = Csv::new(&header);
    let u = last.normalized_u();
    let mean = newton.u.iter().sum::<f64>() / newton.u.len() as f64;
    let spectral = grid.spectral();
    for (p, (up, un)) in u.iter().zip(&newton.u).enumerate() {
        let mut row = spectral.coords(p);
        row.push(*up);
        row.push(un - mean);
        pot.row(&row);
    }
    pot.comment(&format!("t={}", num(last.t)));
    run.write_csv("potential.csv", pot)?;
    let m = "monitor.csv";
    run.write(
        "plot.gp",
        &plot_script(
            &format!("Kähler-Ricci flow ({mode})"),
            &[
                (
                    "decay",
                    true,
                    vec![Curve { file: m, x: 1, y: 3, title: "osc" }, Curve { file: m, x: 1, y: 4, title: "E" }],
                ),
                ("max |du/dt|", false, vec![Curve { file: m, x: 1, y: 2, title: "max|du/dt|" }]),
            ],
        ),
    )?;

    let distance = mean_aligned_distance(&last.u, &newton.u);
    run.note(format!(
        "flow/newton agreement: sup distance {distance:e} after mean alignment (newton residual {:e}, {} iterations)",
        newton.residual, newton.iterations
    ));
    run.check("newton-agreement", distance <= AGREEMENT_BAR, format!("sup distance {distance:e}"));
    let bar = if n_c == 1 { 1e-6 } else { 1e-5 };
    let residual = curvature_equation_residual(last)?;
    run.check("curvature-residual", residual <= bar, format!("‖Ric − Ω‖∞ {residual:e} (bar {bar:e})"));
    if mode == KahlerMode::RicciFlat {
        let fmax = last.f.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        let worst = traj.monitors.iter().map(|m| m.max_dudt).fold(0.0, f64::max);
        run.check("dudt-bound", worst <= fmax + 1e-10, format!("max |∂u/∂t| {worst:e} vs max |f| {fmax:e}"));
    }
    let late: Vec<_> = traj.monitors.iter().filter(|m| m.t >= 1.0).collect();
    let rises = late.windows(2).filter(|w| w[1].osc > w[0].osc || w[1].energy > w[0].energy).count();
    run.check("decay", rises == 0, format!("{rises} increases of osc or E after t = 1"));
    let trace_min = traj.monitors.iter().map(|m| m.trace_min).fold(f64::INFINITY, f64::min);
    run.check("trace-positive", trace_min > 0.0, format!("min (n + Δu) {trace_min:e}"));
    Ok(())
}
