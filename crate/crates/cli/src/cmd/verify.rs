//! Re-checks properties of CSVs written by earlier runs, without recomputing anything.

use std::f64::consts::PI;
use std::path::PathBuf;

use crate::error::CliError;
use crate::output::Run;
use crate::settings::{opt, OptSpec};

pub const OPTIONS: &[OptSpec] = &[
    opt("csv", None, "CSV file produced by a run"),
    opt(
        "check",
        None,
        "entropy-monotone | gauss-bonnet | area-conserved | report-clean | singularity | kahler-decay | symbol-clean",
    ),
];

struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
    comments: Vec<String>,
}

impl Table {
    fn parse(text: &str) -> Result<Self, CliError> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| CliError::Invalid("empty CSV".into()))?
            .split(',')
            .map(|h| h.trim().to_string())
            .collect::<Vec<_>>();
        let mut rows = Vec::new();
        let mut comments = Vec::new();
        for line in lines {
            if let Some(c) = line.strip_prefix('#') {
                comments.push(c.trim().to_string());
            } else if !line.trim().is_empty() {
                let row: Vec<String> = line.split(',').map(|c| c.trim().to_string()).collect();
                if row.len() != header.len() {
                    return Err(CliError::Invalid(format!("row has {} cells, header has {}", row.len(), header.len())));
                }
                rows.push(row);
            }
        }
        Ok(Self { header, rows, comments })
    }

    fn column(&self, name: &str) -> Result<Vec<Option<f64>>, CliError> {
        let i = self
            .header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::Invalid(format!("CSV has no `{name}` column")))?;
        self.rows
            .iter()
            .map(|r| match r[i].as_str() {
                "" => Ok(None),
                cell => {
                    cell.parse().map(Some).map_err(|_| CliError::Invalid(format!("bad number `{cell}` in `{name}`")))
                }
            })
            .collect()
    }

    fn numbers(&self, name: &str) -> Result<Vec<f64>, CliError> {
        self.column(name)?
            .into_iter()
            .map(|v| v.ok_or_else(|| CliError::Invalid(format!("empty cell in `{name}`"))))
            .collect()
    }
}

/// Largest increase between consecutive entries.
fn max_rise(series: &[f64]) -> f64 {
    series.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max)
}

pub fn run(run: &mut Run) -> Result<(), CliError> {
    let s = run.settings();
    let path = PathBuf::from(s.string("csv")?);
    let check = s.string("check")?.to_string();
    let table = Table::parse(&run.read_input(&path)?)?;
    match check.as_str() {
        "entropy-monotone" => {
            let Some(series) = table.column("entropy")?.into_iter().collect::<Option<Vec<f64>>>() else {
                run.skip(&check, "entropy column is empty for this run");
                return Ok(());
            };
            let rise = max_rise(&series);
            run.check(&check, rise <= 1e-8, format!("largest per-sample increase {rise:e}"));
        }
        "gauss-bonnet" => {
            let gb = table.numbers("gauss_bonnet")?;
            let chi = (gb.first().copied().unwrap_or(0.0) / (4.0 * PI)).round();
            let err = gb.iter().map(|v| (v - 4.0 * PI * chi).abs()).fold(0.0, f64::max);
            run.check(&check, err <= 1e-6, format!("χ = {chi}, max |∫R dμ − 4πχ| {err:e}"));
        }
        "area-conserved" => {
            let area = table.numbers("area")?;
            let a0 = area.first().copied().unwrap_or(1.0);
            let drift = area.iter().map(|a| ((a - a0) / a0).abs()).fold(0.0, f64::max);
            run.check(&check, drift <= 1e-6, format!("max relative drift {drift:e}"));
        }
        "report-clean" => {
            let v = table.numbers("violations")?;
            let bad = v.iter().filter(|x| **x != 0.0).count();
            run.check(&check, bad == 0, format!("{bad} of {} rows report violations", v.len()));
        }
        "singularity" => {
            let event = table.comments.iter().find(|c| c.starts_with("event: singularity"));
            match event {
                Some(e) => run.check(&check, true, e.clone()),
                None => run.check(&check, false, "no singularity event recorded"),
            }
        }
        "kahler-decay" => {
            let (t, osc, e, tr) =
                (table.numbers("t")?, table.numbers("osc")?, table.numbers("E")?, table.numbers("trace_min")?);
            let late: Vec<usize> = (0..t.len()).filter(|&i| t[i] >= 1.0).collect();
            let rises = late.windows(2).filter(|w| osc[w[1]] > osc[w[0]] || e[w[1]] > e[w[0]]).count();
            let positive = tr.iter().all(|x| *x > 0.0);
            run.check(
                &check,
                rises == 0 && positive,
                format!("{rises} increases after t = 1; trace positive: {positive}"),
            );
        }
        "symbol-clean" => {
            let n = table.numbers("n")?;
            let k = table.numbers("kernel_dim_mode")?;
            let comp = table.numbers("max_composition_residual")?;
            let det = table.numbers("max_deturck_residual")?;
            let bad = (0..n.len()).filter(|&i| k[i] != n[i] || comp[i] > 1e-12 || det[i] > 1e-12).count();
            run.check(&check, bad == 0, format!("{bad} of {} dimensions fail", n.len()));
        }
        other => return Err(CliError::Invalid(format!("unknown check `{other}`"))),
    }
    Ok(())
}
