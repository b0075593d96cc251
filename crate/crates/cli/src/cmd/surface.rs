use std::f64::consts::PI;
use std::path::PathBuf;
use std::sync::Arc;

use ricci_core::maxprinciple::surface_extremum_check;
use ricci_core::surface::{
    evolve, harnack_check, random_pairs, Background, BackgroundKind, ConformalState, SurfaceFlowConfig,
    SurfaceTrajectory,
};
use ricci_core::Error;

use crate::error::CliError;
use crate::expr::Expr;
use crate::output::{num, plot_script, Csv, Curve, Run};
use crate::settings::{opt, OptSpec};

pub const OPTIONS: &[OptSpec] = &[
    opt("background", Some("torus"), "torus | sphere"),
    opt("grid", None, "samples per axis (torus, default 64) or latitude bands (sphere, default 128)"),
    opt("init", Some("0"), "initial conformal factor, e.g. `0.1*cos(x)` or `0.05,1` tuples"),
    opt("init-file", None, "file holding the initial-data expression"),
    opt("t-end", Some("5"), "final time"),
    opt("output-interval", Some("0.1"), "time between recorded samples"),
    opt("cfl", Some("0.4"), "fraction of the explicit stability bound"),
    opt("checks", Some("gauss-bonnet,entropy,harnack,max-principle,soliton"), "comma-separated checks"),
    opt("harnack-pairs", Some("100"), "random space-time pairs for the Harnack check"),
    opt("path-nodes", Some("65"), "path grid size of the Harnack action"),
    opt("snapshot-every", Some("10"), "write the fields every k-th sample (and the last)"),
];

const CHECKS: &[&str] = &["gauss-bonnet", "entropy", "harnack", "max-principle", "soliton"];

pub fn run(run: &mut Run) -> Result<(), CliError> {
    let s = run.settings();
    let kind = s.string("background")?.to_string();
    let (bg, vars): (Background, &[&str]) = match kind.as_str() {
        "torus" => (Background::flat_torus(s.raw("grid").map_or(Ok(64), |_| s.usize("grid"))?)?, &["x", "y"]),
        "sphere" => (Background::round_sphere(s.raw("grid").map_or(Ok(128), |_| s.usize("grid"))?)?, &["theta"]),
        other => return Err(CliError::Invalid(format!("unknown background `{other}`"))),
    };
    let grid = bg.n();
    let checks = s.list("checks");
    if let Some(bad) = checks.iter().find(|c| !CHECKS.contains(&c.as_str())) {
        return Err(CliError::Invalid(format!("unknown check `{bad}` (known: {})", CHECKS.join(", "))));
    }
    let cfg =
        SurfaceFlowConfig { t_end: s.f64("t-end")?, output_interval: s.f64("output-interval")?, cfl: s.f64("cfl")? };
    cfg.validate()?;
    let pairs = s.usize("harnack-pairs")?;
    let path_nodes = s.usize("path-nodes")?;
    let every = s.usize("snapshot-every")?.max(1);
    let seed = s.u64("seed")?;
    let source = match s.raw("init-file").map(PathBuf::from) {
        Some(path) => run.read_input(&path)?,
        None => s.string("init")?.to_string(),
    };
    let init = Expr::parse(&source, vars)?;
    run.settings_mut().set("grid", grid.to_string());
    run.note(format!("initial data: {init}"));

    let bg = Arc::new(bg);
    let state = ConformalState::from_fn(bg.clone(), |a, b| init.eval(&[a, b]))?;
    let traj = evolve(&state, &cfg)?;
    write_outputs(run, &traj, every)?;

    let torus = bg.kind() == BackgroundKind::FlatTorus;
    let chi_target = 4.0 * PI * bg.euler_characteristic();
    for check in &checks {
        match check.as_str() {
            "gauss-bonnet" => {
                let tol = if torus { 1e-8 } else { 1e-6 };
                let a0 = traj.diagnostics[0].area;
                let gb = traj.diagnostics.iter().map(|d| (d.gauss_bonnet - chi_target).abs()).fold(0.0, f64::max);
                let drift = traj.diagnostics.iter().map(|d| ((d.area - a0) / a0).abs()).fold(0.0, f64::max);
                run.check(
                    check,
                    gb <= tol && drift <= 1e-6,
                    format!("max |∫R dμ − 4πχ| {gb:e} (tol {tol:e}); max relative area drift {drift:e}"),
                );
            }
            "entropy" => {
                let Some(series) = traj.diagnostics.iter().map(|d| d.entropy).collect::<Option<Vec<f64>>>() else {
                    run.skip(check, "entropy needs R > 0 at every sample");
                    continue;
                };
                let worst = series.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
                run.check(check, worst <= 1e-8, format!("largest per-sample increase {worst:e}"));
            }
            "harnack" => {
                let report = random_pairs(&traj, pairs, seed).and_then(|p| harnack_check(&traj, &p, path_nodes));
                match report {
                    Ok(r) => run.check(
                        check,
                        r.violations == 0,
                        format!("{} pairs, {} violations, worst slack {:e}", r.pairs, r.violations, r.worst_slack),
                    ),
                    Err(Error::Inapplicable(why)) => run.skip(check, why),
                    Err(e) => return Err(e.into()),
                }
            }
            "max-principle" => {
                let [lo, hi] = surface_extremum_check(&traj)?;
                run.check(
                    check,
                    lo.pass && hi.pass,
                    format!(
                        "R_min worst slack {:e} ({} violations), R_max worst slack {:e} ({} violations)",
                        lo.worst_slack, lo.violations, hi.worst_slack, hi.violations
                    ),
                );
            }
            "soliton" => {
                let m = traj.diagnostics.last().map_or(0.0, |d| d.soliton_m_norm);
                run.check(check, m <= 1e-3, format!("final M_norm {m:e}"));
            }
            _ => unreachable!("validated above"),
        }
    }
    Ok(())
}

fn write_outputs(run: &mut Run, traj: &SurfaceTrajectory, every: usize) -> Result<(), CliError> {
    let mut diag = Csv::new("t,area,r,Rmin,Rmax,gauss_bonnet,entropy,M_norm,I_osc");
    for d in &traj.diagnostics {
        diag.cells(&[
            num(d.t),
            num(d.area),
            num(d.r),
            num(d.r_min),
            num(d.r_max),
            num(d.gauss_bonnet),
            d.entropy.map(num).unwrap_or_default(),
            num(d.soliton_m_norm),
            num(d.conserved_i_osc),
        ]);
    }
    run.write_csv("diagnostics.csv", diag)?;

    let bg = traj.background().clone();
    let torus = bg.kind() == BackgroundKind::FlatTorus;
    let last = traj.states.len() - 1;
    for (k, (state, d)) in traj.states.iter().zip(&traj.diagnostics).enumerate() {
        if k % every != 0 && k != last {
            continue;
        }
        let mut csv = Csv::new(if torus { "x,y,v,R" } else { "theta,v,R" });
        for i in 0..bg.len() {
            let (a, b) = bg.coords(i);
            if torus {
                csv.row(&[a, b, state.v[i], d.curvature[i]]);
            } else {
                csv.row(&[a, state.v[i], d.curvature[i]]);
            }
        }
        csv.comment(&format!("t={}", num(state.t)));
        run.write_csv(&format!("snapshot_{k:04}.csv"), csv)?;
    }

    let f = "diagnostics.csv";
    let plot = plot_script(
        "surface flow",
        &[
            (
                "curvature",
                false,
                vec![
                    Curve { file: f, x: 1, y: 3, title: "r" },
                    Curve { file: f, x: 1, y: 4, title: "Rmin" },
                    Curve { file: f, x: 1, y: 5, title: "Rmax" },
                ],
            ),
            ("entropy", false, vec![Curve { file: f, x: 1, y: 7, title: "N" }]),
            ("soliton residual", true, vec![Curve { file: f, x: 1, y: 8, title: "|M|" }]),
        ],
    );
    run.write("plot.gp", &plot)
}
