//! Numerical Ricci flow: left-invariant metrics on three-dimensional unimodular
//! Lie groups, conformal surface flow, comparison principles, principal symbols
//! and the Kähler-Ricci flow on flat complex tori.

#![allow(clippy::needless_range_loop)]

pub mod error;
pub mod flow;
pub mod homogeneous;
pub mod kahler;
pub mod maxprinciple;
pub mod ode;
pub mod rng;
pub mod spectral;
pub mod surface;
pub mod symbol;

pub use error::{Error, Result};
