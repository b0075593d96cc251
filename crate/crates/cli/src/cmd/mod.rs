use crate::error::CliError;
use crate::output::Run;
use crate::settings::OptSpec;

mod homog;
mod kahler;
mod pinch;
mod surface;
mod symbol;
mod verify;

pub struct CommandSpec {
    pub name: &'static str,
    pub about: &'static str,
    pub options: &'static [OptSpec],
    pub run: fn(&mut Run) -> Result<(), CliError>,
}

pub const COMMANDS: &[CommandSpec] = &[
    CommandSpec {
        name: "homog",
        about: "Ricci flow of a left-invariant metric on a 3-D unimodular Lie group",
        options: homog::OPTIONS,
        run: homog::run,
    },
    CommandSpec {
        name: "surface",
        about: "Normalized Ricci flow of a conformal metric on the torus or the sphere",
        options: surface::OPTIONS,
        run: surface::run,
    },
    CommandSpec {
        name: "symbol",
        about: "Principal-symbol survey of the linearized Ricci and DeTurck operators",
        options: symbol::OPTIONS,
        run: symbol::run,
    },
    CommandSpec {
        name: "pinch",
        about: "Eigenvalue algebra of 3-D pinching and the SU(2) pinching monitor",
        options: pinch::OPTIONS,
        run: pinch::run,
    },
    CommandSpec {
        name: "kahler",
        about: "Kähler-Ricci flow of a potential on a flat complex torus, checked against Newton",
        options: kahler::OPTIONS,
        run: kahler::run,
    },
    CommandSpec {
        name: "verify",
        about: "Re-check a property of a CSV written by an earlier run",
        options: verify::OPTIONS,
        run: verify::run,
    },
];
