//! Homogeneous Ricci flow as an ODE system in `(A, B, C)`.
//!
//! Unnormalized: `Ȧ = −2 Ric11` (and likewise for `B`, `C`).
//! Normalized: `Ȧ = −2 Ric11 + (2/3) R A`, which keeps `ABC` fixed.

use std::fmt;

use crate::error::{Error, Result};
use crate::homogeneous::{ricci_diagonal, DiagonalMetric, MilnorSignature};
use crate::ode::{dopri_step, Stepper, Tolerances};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    pub t_end: f64,
    /// Stop once `min(A, B, C)` falls below this multiple of the initial scale `(ABC)^(1/3)`.
    pub singularity_floor: f64,
    /// Stop once the largest `|K|` exceeds this value.
    pub curvature_ceiling: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-9,
            abs_tol: 1e-12,
            max_step: 1e-2,
            t_end: 1.0,
            singularity_floor: 1e-8,
            curvature_ceiling: 1e8,
        }
    }
}

impl IntegratorConfig {
    pub fn with_t_end(t_end: f64) -> Self {
        Self { t_end, ..Self::default() }
    }

    /// Tight, purely relative error control. Needed for observables built from
    /// differences of nearly equal coefficients, and near a collapse where an
    /// absolute tolerance stops resolving the metric.
    pub fn resolving(t_end: f64) -> Self {
        Self { rel_tol: 1e-13, abs_tol: 1e-24, t_end, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("rel_tol", self.rel_tol),
            ("abs_tol", self.abs_tol),
            ("max_step", self.max_step),
            ("t_end", self.t_end),
            ("singularity_floor", self.singularity_floor),
            ("curvature_ceiling", self.curvature_ceiling),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlowMode {
    Unnormalized,
    Normalized,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SingularityReason {
    Floor,
    Ceiling,
}

impl fmt::Display for SingularityReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SingularityReason::Floor => "floor",
            SingularityReason::Ceiling => "ceiling",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowEvent {
    pub singularity_time: f64,
    pub reason: SingularityReason,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowTrajectory {
    pub signature: MilnorSignature,
    pub mode: FlowMode,
    pub times: Vec<f64>,
    pub states: Vec<DiagonalMetric>,
    pub event: Option<FlowEvent>,
}

impl FlowTrajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> (f64, DiagonalMetric) {
        (*self.times.last().unwrap(), *self.states.last().unwrap())
    }

    /// Cubic Hermite interpolation using the flow's own vector field for slopes.
    pub fn interpolate(&self, t: f64) -> Result<DiagonalMetric> {
        let (t0, t1) = (self.times[0], *self.times.last().unwrap());
        if !(t >= t0 && t <= t1) {
            return Err(Error::OutOfSpan(format!("t = {t} outside [{t0}, {t1}]")));
        }
        let i = match self.times.binary_search_by(|x| x.partial_cmp(&t).unwrap()) {
            Ok(i) => return Ok(self.states[i]),
            Err(i) => i - 1,
        };
        let (ta, tb) = (self.times[i], self.times[i + 1]);
        let (ya, yb) = (self.states[i].coeffs(), self.states[i + 1].coeffs());
        let da = vector_field(self.signature, &self.states[i], self.mode);
        let db = vector_field(self.signature, &self.states[i + 1], self.mode);
        let h = tb - ta;
        let s = (t - ta) / h;
        let (h00, h10, h01, h11) = (
            2.0 * s.powi(3) - 3.0 * s * s + 1.0,
            s.powi(3) - 2.0 * s * s + s,
            -2.0 * s.powi(3) + 3.0 * s * s,
            s.powi(3) - s * s,
        );
        let mut out = [0.0; 3];
        for k in 0..3 {
            out[k] = h00 * ya[k] + h10 * h * da[k] + h01 * yb[k] + h11 * h * db[k];
        }
        Ok(DiagonalMetric::from_array_unchecked(out))
    }
}

/// Right-hand side of the flow in `(A, B, C)`.
pub fn vector_field(sig: MilnorSignature, g: &DiagonalMetric, mode: FlowMode) -> [f64; 3] {
    let curv = ricci_diagonal(sig, g);
    let w = g.coeffs();
    let mut d = curv.ricci.map(|r| -2.0 * r);
    if mode == FlowMode::Normalized {
        for k in 0..3 {
            d[k] += 2.0 / 3.0 * curv.scalar * w[k];
        }
    }
    d
}

fn rhs(sig: MilnorSignature, mode: FlowMode) -> impl Fn(f64, &[f64; 3]) -> [f64; 3] {
    move |_t, y| vector_field(sig, &DiagonalMetric::from_array_unchecked(*y), mode)
}

fn singular(y: &[f64; 3], sig: MilnorSignature, floor: f64, ceiling: f64) -> Option<SingularityReason> {
    if y.iter().any(|v| !v.is_finite()) || y.iter().copied().fold(f64::INFINITY, f64::min) < floor {
        return Some(SingularityReason::Floor);
    }
    let curv = ricci_diagonal(sig, &DiagonalMetric::from_array_unchecked(*y));
    if curv.max_abs_sectional() > ceiling {
        return Some(SingularityReason::Ceiling);
    }
    None
}

/// Adaptive Dormand–Prince integration of the flow from `g0`.
///
/// Every accepted step is recorded. A step that crosses the floor or ceiling is
/// retried with half the length until the crossing step is shorter than
/// `abs_tol`; the trajectory ends at that step's state.
pub fn integrate(
    sig: MilnorSignature,
    g0: &DiagonalMetric,
    config: &IntegratorConfig,
    mode: FlowMode,
) -> Result<FlowTrajectory> {
    config.validate()?;
    let f = rhs(sig, mode);
    let scale0 = g0.volume_density().powf(2.0 / 3.0);
    let floor = config.singularity_floor * scale0;
    let tol = Tolerances { rel: config.rel_tol, abs: config.abs_tol, max_step: config.max_step };
    let mut stepper = Stepper::new(tol, config.max_step.min(1e-4 * config.t_end.max(1.0)));

    let mut traj = FlowTrajectory { signature: sig, mode, times: vec![0.0], states: vec![*g0], event: None };
    let (mut t, mut y) = (0.0, g0.coeffs());
    while t < config.t_end {
        let acc = match stepper.step(&f, t, &y, config.t_end) {
            Some(a) => a,
            None => return Err(Error::StepUnderflow { t, last: DiagonalMetric::from_array_unchecked(y) }),
        };
        if let Some(reason) = singular(&acc.y, sig, floor, config.curvature_ceiling) {
            // Back off and let error control carry the solution up to the
            // crossing; only a step shorter than the time resolution may end there.
            if acc.h_used > config.abs_tol.max(4.0 * stepper.min_step * t.max(1.0)) {
                stepper.retry_with(0.5 * acc.h_used);
                continue;
            }
            if acc.y.iter().all(|v| v.is_finite() && *v > 0.0) {
                traj.times.push(acc.t);
                traj.states.push(DiagonalMetric::from_array_unchecked(acc.y));
            }
            traj.event = Some(FlowEvent { singularity_time: acc.t, reason });
            return Ok(traj);
        }
        t = acc.t;
        y = acc.y;
        traj.times.push(t);
        traj.states.push(DiagonalMetric::from_array_unchecked(y));
    }
    Ok(traj)
}

/// Fixed-step integration with the fifth-order Dormand–Prince solution.
/// No singularity detection; used for convergence-order checks.
pub fn integrate_fixed_step(
    sig: MilnorSignature,
    g0: &DiagonalMetric,
    step: f64,
    t_end: f64,
    mode: FlowMode,
) -> Result<FlowTrajectory> {
    if !(step > 0.0 && t_end > 0.0) {
        return Err(Error::invalid("step and t_end must be positive"));
    }
    let f = rhs(sig, mode);
    let n = (t_end / step).round().max(1.0) as usize;
    let h = t_end / n as f64;
    let mut times = Vec::with_capacity(n + 1);
    let mut states = Vec::with_capacity(n + 1);
    times.push(0.0);
    states.push(*g0);
    let mut y = g0.coeffs();
    for i in 0..n {
        y = dopri_step(&f, i as f64 * h, &y, h).0;
        times.push((i + 1) as f64 * h);
        states.push(DiagonalMetric::from_array_unchecked(y));
    }
    Ok(FlowTrajectory { signature: sig, mode, times, states, event: None })
}

/// Exact solution of the unnormalized flow on Nil.
pub fn nil_closed_form(g0: &DiagonalMetric, t: f64) -> DiagonalMetric {
    let [a0, b0, c0] = g0.coeffs();
    let s = 12.0 * t + b0 * c0 / a0;
    let cbrt = f64::cbrt;
    DiagonalMetric::from_array_unchecked([
        cbrt(a0 * a0 * b0 * c0) / cbrt(s),
        cbrt(a0 * b0 * b0 / c0) * cbrt(s),
        cbrt(a0 * c0 * c0 / b0) * cbrt(s),
    ])
}

/// Homothety factor `1 − 2λt` of an Einstein metric with `Ric = λ g` under the flow.
pub fn einstein_scale(lambda: f64, t: f64) -> Result<f64> {
    let s = 1.0 - 2.0 * lambda * t;
    if s <= 0.0 {
        return Err(Error::invalid(format!("t = {t} is past the extinction time 1/(2λ) = {}", 0.5 / lambda)));
    }
    Ok(s)
}

/// `(1 − 2λt) g0`, after checking `Ric(g0) = λ g0` to 1e-10.
pub fn einstein_closed_form(sig: MilnorSignature, g0: &DiagonalMetric, lambda: f64, t: f64) -> Result<DiagonalMetric> {
    let ric = ricci_diagonal(sig, g0).ricci;
    let w = g0.coeffs();
    let residual = (0..3).map(|k| (ric[k] - lambda * w[k]).abs()).fold(0.0, f64::max);
    let scale = 1.0 + lambda.abs() * w.iter().copied().fold(0.0, f64::max);
    if residual > 1e-10 * scale {
        return Err(Error::NotEinstein { lambda, residual });
    }
    Ok(g0.scaled(einstein_scale(lambda, t)?))
}

/// Rescale an unnormalized trajectory to unit volume density, with time
/// reparametrized by `t̃ = ∫ ψ dt` (trapezoidal), `ψ = (ABC)^(−1/3)`.
pub fn rescale_to_normalized(traj: &FlowTrajectory) -> Result<FlowTrajectory> {
    if traj.mode != FlowMode::Unnormalized {
        return Err(Error::invalid("trajectory is already normalized"));
    }
    let psi: Vec<f64> = traj.states.iter().map(|g| g.volume_density().powf(-2.0 / 3.0)).collect();
    let mut times = Vec::with_capacity(traj.len());
    let mut acc = 0.0;
    times.push(0.0);
    for i in 1..traj.len() {
        acc += 0.5 * (psi[i] + psi[i - 1]) * (traj.times[i] - traj.times[i - 1]);
        times.push(acc);
    }
    let states = traj.states.iter().zip(&psi).map(|(g, p)| g.scaled(*p)).collect();
    Ok(FlowTrajectory { signature: traj.signature, mode: FlowMode::Normalized, times, states, event: None })
}

/// `E = B + C` and `F = (B − C)/ε` along a Berger-type SU(2) trajectory
/// (the first coefficient already carries the factor ε).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollapseSample {
    pub t: f64,
    pub e: f64,
    pub f: f64,
}

pub fn collapse_observables(traj: &FlowTrajectory, eps_split: f64) -> Vec<CollapseSample> {
    traj.times
        .iter()
        .zip(&traj.states)
        .map(|(&t, g)| CollapseSample { t, e: g.b() + g.c(), f: (g.b() - g.c()) / eps_split })
        .collect()
}

/// Reduced Sol variables `B` and `G = A/C`, with the drift of the conserved product `AC`.
#[derive(Debug, Clone, PartialEq)]
pub struct SolReport {
    pub samples: Vec<(f64, f64, f64)>,
    pub max_ac_drift: f64,
}

pub fn sol_reduced(traj: &FlowTrajectory) -> Result<SolReport> {
    if traj.signature != MilnorSignature::sol() {
        return Err(Error::invalid(format!("expected Sol signature, got {}", traj.signature)));
    }
    let ac0 = traj.states[0].a() * traj.states[0].c();
    let mut max_ac_drift: f64 = 0.0;
    let samples = traj
        .times
        .iter()
        .zip(&traj.states)
        .map(|(&t, g)| {
            max_ac_drift = max_ac_drift.max((g.a() * g.c() - ac0).abs());
            (t, g.b(), g.a() / g.c())
        })
        .collect();
    Ok(SolReport { samples, max_ac_drift })
}

/// Monotonicity bookkeeping along an SU(2) trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Su2Monitor {
    /// Count of samples where `εA ≤ C ≤ B` fails beyond the tolerance.
    pub ordering_violations: usize,
    /// Count of consecutive pairs where `(B − εA)/(εA)` increased beyond the tolerance.
    pub ratio_increases: usize,
    pub worst_ratio_increase: f64,
}

/// Checks that the initial ordering `εA ≤ C ≤ B` is kept and that
/// `(B − εA)/(εA)` does not increase, both with tolerance `tol·scale`.
pub fn su2_monitor(traj: &FlowTrajectory, tol: f64) -> Su2Monitor {
    let mut out = Su2Monitor { ordering_violations: 0, ratio_increases: 0, worst_ratio_increase: 0.0 };
    let ratio = |g: &DiagonalMetric| (g.b() - g.a()) / g.a();
    for (i, g) in traj.states.iter().enumerate() {
        let scale = g.b().max(1.0);
        if g.a() > g.c() + tol * scale || g.c() > g.b() + tol * scale {
            out.ordering_violations += 1;
        }
        if i > 0 {
            let prev = ratio(&traj.states[i - 1]);
            let inc = ratio(g) - prev;
            let bound = tol * prev.abs().max(1.0);
            if inc > bound {
                out.ratio_increases += 1;
            }
            out.worst_ratio_increase = out.worst_ratio_increase.max(inc);
        }
    }
    out
}
