//! `ricci`: batch runs and verification suites over ricci-core.

mod cmd;
mod error;
mod expr;
mod output;
mod settings;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::parser::ValueSource;
use clap::{Arg, ArgAction, ArgMatches, Command};

use crate::output::Run;
use crate::settings::{OptSpec, Settings, COMMON};

fn to_arg(o: &OptSpec) -> Arg {
    let arg = Arg::new(o.key).long(o.key).help(o.help);
    let arg = if o.flag { arg.action(ArgAction::SetTrue) } else { arg.value_name("VALUE") };
    match o.default {
        Some(d) if !o.flag => arg.long_help(format!("{} [default: {d}]", o.help)),
        _ => arg,
    }
}

fn cli() -> Command {
    let mut app = Command::new("ricci")
        .version(env!("CARGO_PKG_VERSION"))
        .about("Ricci flow laboratory: homogeneous, surface and Kähler flows with verification suites")
        .subcommand_required(true)
        .arg_required_else_help(true);
    for c in cmd::COMMANDS {
        let mut sub = Command::new(c.name)
            .about(c.about)
            .arg(Arg::new("config").long("config").value_name("FILE").help("key = value file; flags override it"));
        for o in COMMON.iter().chain(c.options) {
            sub = sub.arg(match o.key {
                // the one positional argument
                "csv" => Arg::new("csv").required(true).value_name("CSV").help(o.help),
                _ => to_arg(o),
            });
        }
        app = app.subcommand(sub);
    }
    app
}

/// Options given explicitly on the command line.
fn explicit_flags(m: &ArgMatches, options: &[OptSpec]) -> BTreeMap<String, String> {
    let mut out = BTreeMap::new();
    for o in COMMON.iter().chain(options) {
        if m.value_source(o.key) != Some(ValueSource::CommandLine) {
            continue;
        }
        let v = if o.flag {
            m.get_flag(o.key).to_string()
        } else {
            m.get_one::<String>(o.key).cloned().unwrap_or_default()
        };
        out.insert(o.key.to_string(), v);
    }
    out
}

fn main() -> ExitCode {
    let matches = cli().get_matches();
    let (name, sub) = matches.subcommand().expect("subcommand required");
    let c = cmd::COMMANDS.iter().find(|c| c.name == name).expect("registered command");
    let flags = explicit_flags(sub, c.options);
    let config = sub.get_one::<String>("config").map(PathBuf::from);
    let code = match Settings::resolve(&[COMMON, c.options], config.as_deref(), flags) {
        Ok(settings) => {
            let mut run = Run::new(c.name, settings);
            let outcome = match &config {
                Some(path) => run.read_input(path).map(|_| ()),
                None => Ok(()),
            }
            .and_then(|_| (c.run)(&mut run));
            run.finish(outcome)
        }
        Err(e) => {
            eprintln!("ricci {name}: {e}");
            let mut settings = Settings::default();
            if let Some(out) = sub.get_one::<String>("out") {
                settings.set("out", out.clone());
            }
            Run::new(c.name, settings).finish(Err(e))
        }
    };
    ExitCode::from(code as u8)
}
