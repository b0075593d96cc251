use ricci_core::symbol::symbol_survey;

use crate::error::CliError;
use crate::output::{num, Csv, Run};
use crate::settings::{opt, OptSpec};

pub const OPTIONS: &[OptSpec] = &[
    opt("n", Some("2,3,4,5"), "manifold dimensions to survey (each in 2..=5)"),
    opt("trials", Some("100"), "random (g, ξ) pairs per dimension"),
];

const RESIDUAL_BAR: f64 = 1e-12;

pub fn run(run: &mut Run) -> Result<(), CliError> {
    let s = run.settings();
    let dims: Vec<usize> = s
        .list("n")
        .iter()
        .map(|d| d.parse().map_err(|_| CliError::Invalid(format!("`n`: bad dimension `{d}`"))))
        .collect::<Result<_, _>>()?;
    if dims.is_empty() {
        return Err(CliError::Invalid("`n` needs at least one dimension".into()));
    }
    let trials = s.usize("trials")?;
    let seed = s.u64("seed")?;

    let mut csv = Csv::new("n,trials,kernel_dim_mode,max_composition_residual,max_deturck_residual");
    let mut surveys = Vec::new();
    for (i, &n) in dims.iter().enumerate() {
        let survey = symbol_survey(n, trials, ricci_core::rng::derive_seed(seed, i as u64))?;
        csv.cells(&[
            n.to_string(),
            trials.to_string(),
            survey.kernel_dim_mode.to_string(),
            num(survey.max_composition_residual),
            num(survey.max_deturck_residual),
        ]);
        surveys.push(survey);
    }
    run.write_csv("symbol_report.csv", csv)?;
    for sv in surveys {
        let n = sv.n;
        run.check(
            &format!("kernel-dim-n{n}"),
            sv.kernel_dim_mode == n && sv.kernel_dim_outliers == 0,
            format!("mode {} with {} outliers over {} trials", sv.kernel_dim_mode, sv.kernel_dim_outliers, sv.trials),
        );
        run.check(
            &format!("composition-n{n}"),
            sv.max_composition_residual <= RESIDUAL_BAR,
            format!("max scaled residual {:e}", sv.max_composition_residual),
        );
        run.check(
            &format!("deturck-n{n}"),
            sv.max_deturck_residual <= RESIDUAL_BAR,
            format!("max |σ + ½|ξ|²·Id| / |ξ|² {:e}", sv.max_deturck_residual),
        );
    }
    Ok(())
}
