//! Output directory bookkeeping: CSVs, the plot script and the run manifest.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use sha2::{Digest, Sha256};

use crate::error::CliError;
use crate::settings::Settings;

/// 17 significant digits, round-trippable.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub struct Csv {
    text: String,
}

impl Csv {
    pub fn new(header: &str) -> Self {
        Self { text: format!("{header}\n") }
    }

    pub fn row(&mut self, values: &[f64]) {
        let cells: Vec<String> = values.iter().map(|v| num(*v)).collect();
        self.cells(&cells);
    }

    pub fn cells(&mut self, cells: &[String]) {
        self.text.push_str(&cells.join(","));
        self.text.push('\n');
    }

    pub fn comment(&mut self, line: &str) {
        let _ = writeln!(self.text, "# {line}");
    }

    pub fn into_string(self) -> String {
        self.text
    }
}

#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub name: String,
    pub pass: bool,
    pub skipped: bool,
    pub detail: String,
}

pub struct Run {
    command: String,
    out: PathBuf,
    settings: Settings,
    started: SystemTime,
    inputs: Vec<(String, String)>,
    files: Vec<(String, String)>,
    checks: Vec<CheckOutcome>,
    notes: Vec<String>,
    manifest: &'static str,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn unix_seconds(t: SystemTime) -> f64 {
    t.duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

impl Run {
    pub fn new(command: &str, settings: Settings) -> Self {
        let out = PathBuf::from(settings.raw("out").unwrap_or("ricci-out"));
        Self {
            command: command.to_string(),
            out,
            settings,
            started: SystemTime::now(),
            inputs: Vec::new(),
            files: Vec::new(),
            checks: Vec::new(),
            notes: Vec::new(),
            // `verify` reads other runs' directories and must not replace their manifests
            manifest: if command == "verify" { "verify_manifest.txt" } else { "manifest.txt" },
        }
    }

    pub fn settings(&self) -> &Settings {
        &self.settings
    }

    pub fn settings_mut(&mut self) -> &mut Settings {
        &mut self.settings
    }

    /// Reads an input file and records its digest.
    pub fn read_input(&mut self, path: &Path) -> Result<String, CliError> {
        let bytes =
            std::fs::read(path).map_err(|e| CliError::Invalid(format!("cannot read {}: {e}", path.display())))?;
        self.inputs.push((path.display().to_string(), sha256_hex(&bytes)));
        String::from_utf8(bytes).map_err(|_| CliError::Invalid(format!("{} is not UTF-8", path.display())))
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<(), CliError> {
        std::fs::create_dir_all(&self.out)?;
        std::fs::write(self.out.join(name), contents)?;
        self.files.retain(|(n, _)| n != name);
        self.files.push((name.to_string(), sha256_hex(contents.as_bytes())));
        Ok(())
    }

    pub fn write_csv(&mut self, name: &str, csv: Csv) -> Result<(), CliError> {
        self.write(name, &csv.into_string())
    }

    pub fn check(&mut self, name: &str, pass: bool, detail: impl Into<String>) {
        let detail = detail.into();
        println!("{:<24} {}  {}", name, if pass { "pass" } else { "FAIL" }, detail);
        self.checks.push(CheckOutcome { name: name.to_string(), pass, skipped: false, detail });
    }

    /// A requested check that does not apply to this run; it does not affect the exit code.
    pub fn skip(&mut self, name: &str, reason: impl Into<String>) {
        let detail = reason.into();
        println!("{name:<24} skipped  {detail}");
        self.checks.push(CheckOutcome { name: name.to_string(), pass: true, skipped: true, detail });
    }

    pub fn note(&mut self, line: impl Into<String>) {
        let line = line.into();
        println!("{line}");
        self.notes.push(line);
    }

    /// Writes the manifest whatever happened and returns the process exit code.
    pub fn finish(self, outcome: Result<(), CliError>) -> i32 {
        let (status, code) = match &outcome {
            Err(e) => (format!("error: {e}"), e.exit_code()),
            Ok(()) if self.checks.iter().any(|c| !c.pass) => ("check-failed".to_string(), 1),
            Ok(()) => ("ok".to_string(), 0),
        };
        if let Err(e) = &outcome {
            eprintln!("ricci {}: {e}", self.command);
        }
        let finished = SystemTime::now();
        let mut m = String::new();
        let _ = writeln!(m, "tool = ricci {}", env!("CARGO_PKG_VERSION"));
        let _ = writeln!(m, "command = {}", self.command);
        let _ = writeln!(m, "started = {:.3}", unix_seconds(self.started));
        let _ = writeln!(m, "finished = {:.3}", unix_seconds(finished));
        let elapsed = finished.duration_since(self.started).map(|d| d.as_secs_f64()).unwrap_or(0.0);
        let _ = writeln!(m, "elapsed_seconds = {elapsed:.3}");
        let _ = writeln!(m, "status = {status}");
        let _ = writeln!(m, "exit_code = {code}");
        m.push_str("\n[config]\n");
        for (k, v) in self.settings.entries() {
            let _ = writeln!(m, "{k} = {v}");
        }
        m.push_str("\n[inputs]\n");
        for (path, digest) in &self.inputs {
            let _ = writeln!(m, "{path} sha256:{digest}");
        }
        m.push_str("\n[outputs]\n");
        for (name, digest) in &self.files {
            let _ = writeln!(m, "{name} sha256:{digest}");
        }
        m.push_str("\n[checks]\n");
        for c in &self.checks {
            let status = match (c.skipped, c.pass) {
                (true, _) => "skipped",
                (false, true) => "pass",
                (false, false) => "fail",
            };
            let _ = writeln!(m, "{} = {status}  {}", c.name, c.detail);
        }
        if !self.notes.is_empty() {
            m.push_str("\n[notes]\n");
            for n in &self.notes {
                let _ = writeln!(m, "{n}");
            }
        }
        let written = std::fs::create_dir_all(&self.out).and_then(|_| std::fs::write(self.out.join(self.manifest), m));
        if let Err(e) = written {
            eprintln!("ricci {}: cannot write manifest: {e}", self.command);
            return code.max(2);
        }
        code
    }
}

/// One curve of a gnuplot script: `file` columns `x:y`.
pub struct Curve<'a> {
    pub file: &'a str,
    pub x: usize,
    pub y: usize,
    pub title: &'a str,
}

/// A gnuplot script with one panel per entry of `panels`.
pub fn plot_script(title: &str, panels: &[(&str, bool, Vec<Curve<'_>>)]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# gnuplot -p plot.gp");
    let _ = writeln!(s, "set datafile separator ','");
    let _ = writeln!(s, "set datafile commentschars '#'");
    let _ = writeln!(s, "set key autotitle columnhead");
    let _ = writeln!(s, "set multiplot layout {},1 title '{title}'", panels.len().max(1));
    for (ylabel, log, curves) in panels {
        let _ = writeln!(s, "set ylabel '{ylabel}'");
        let _ = writeln!(s, "{}", if *log { "set logscale y" } else { "unset logscale y" });
        let parts: Vec<String> = curves
            .iter()
            .map(|c| format!("'{}' using {}:{} with lines title '{}'", c.file, c.x, c.y, c.title))
            .collect();
        let _ = writeln!(s, "plot {}", parts.join(", \\\n     "));
    }
    let _ = writeln!(s, "unset multiplot");
    s
}
