//! Browser bindings for three small experiments: a left-invariant metric under
//! Ricci flow, curvature smoothing on a deformed sphere, and the Kähler-Ricci
//! flow on a circle of complex dimension one.
//!
//! Results cross the boundary as flat `Float64Array`s; `www/index.html` draws them.

use std::sync::Arc;

use ricci_core::flow::{integrate, FlowMode, IntegratorConfig};
use ricci_core::homogeneous::{DiagonalMetric, MilnorSignature};
use ricci_core::kahler::{self, ComplexTorusGrid, FlatMetric, KahlerFlowConfig, KahlerMode, PotentialState};
use ricci_core::surface::{self, Background, ConformalState, SurfaceFlowConfig};
use ricci_core::Error;
use wasm_bindgen::prelude::*;

fn js(e: Error) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen]
pub struct HomogeneousRun {
    rows: Vec<f64>,
    singular_at: Option<f64>,
}

#[wasm_bindgen]
impl HomogeneousRun {
    /// Rows of `t, A, B, C`.
    pub fn rows(&self) -> Vec<f64> {
        self.rows.clone()
    }

    /// Time at which the flow left the resolvable range, if it did.
    pub fn singular_at(&self) -> Option<f64> {
        self.singular_at
    }
}

pub fn run_homogeneous(geometry: &str, init: [f64; 3], t_end: f64, normalized: bool) -> Result<HomogeneousRun, Error> {
    let sig = match geometry {
        "su2" => MilnorSignature::su2(),
        "nil" => MilnorSignature::nil(),
        "sol" => MilnorSignature::sol(),
        "flat" => MilnorSignature::abelian(),
        other => return Err(Error::InvalidInput(format!("unknown geometry '{other}'"))),
    };
    let g0 = DiagonalMetric::new(init[0], init[1], init[2])?;
    let mode = if normalized { FlowMode::Normalized } else { FlowMode::Unnormalized };
    let traj = integrate(sig, &g0, &IntegratorConfig::with_t_end(t_end), mode)?;
    let rows = traj.times.iter().zip(&traj.states).flat_map(|(t, g)| [*t, g.a(), g.b(), g.c()]).collect();
    Ok(HomogeneousRun { rows, singular_at: traj.event.map(|e| e.singularity_time) })
}

#[wasm_bindgen]
pub fn homogeneous(
    geometry: &str,
    a: f64,
    b: f64,
    c: f64,
    t_end: f64,
    normalized: bool,
) -> Result<HomogeneousRun, JsError> {
    run_homogeneous(geometry, [a, b, c], t_end, normalized).map_err(js)
}

#[wasm_bindgen]
pub struct SphereRun {
    history: Vec<f64>,
    theta: Vec<f64>,
    first: Vec<f64>,
    last: Vec<f64>,
}

#[wasm_bindgen]
impl SphereRun {
    /// Rows of `t, Rmin, Rmax, entropy`.
    pub fn history(&self) -> Vec<f64> {
        self.history.clone()
    }

    pub fn theta(&self) -> Vec<f64> {
        self.theta.clone()
    }

    pub fn initial_curvature(&self) -> Vec<f64> {
        self.first.clone()
    }

    pub fn final_curvature(&self) -> Vec<f64> {
        self.last.clone()
    }
}

/// Zonal bump `a·cos(kθ)` in the conformal factor, flowed to `t_end`.
pub fn run_sphere(amplitude: f64, wavenumber: u32, grid: usize, t_end: f64) -> Result<SphereRun, Error> {
    let bg = Arc::new(Background::round_sphere(grid)?);
    let k = wavenumber as f64;
    let state = ConformalState::from_fn(bg.clone(), |th, _| amplitude * (k * th).cos())?;
    let cfg = SurfaceFlowConfig { t_end, output_interval: t_end / 50.0, cfl: 0.4 };
    let traj = surface::evolve(&state, &cfg)?;
    let history =
        traj.diagnostics.iter().flat_map(|d| [d.t, d.r_min, d.r_max, d.entropy.unwrap_or(f64::NAN)]).collect();
    Ok(SphereRun {
        history,
        theta: bg.theta().to_vec(),
        first: traj.diagnostics[0].curvature.clone(),
        last: traj.diagnostics.last().map(|d| d.curvature.clone()).unwrap_or_default(),
    })
}

#[wasm_bindgen]
pub fn sphere(amplitude: f64, wavenumber: u32, grid: usize, t_end: f64) -> Result<SphereRun, JsError> {
    run_sphere(amplitude, wavenumber, grid, t_end).map_err(js)
}

#[wasm_bindgen]
pub struct KahlerRun {
    history: Vec<f64>,
    x: Vec<f64>,
    potential: Vec<f64>,
}

#[wasm_bindgen]
impl KahlerRun {
    /// Rows of `t, osc, E`.
    pub fn history(&self) -> Vec<f64> {
        self.history.clone()
    }

    pub fn x(&self) -> Vec<f64> {
        self.x.clone()
    }

    /// Final potential, normalized to zero mean.
    pub fn potential(&self) -> Vec<f64> {
        self.potential.clone()
    }
}

/// One complex dimension with data `f = a·cos(x)`; the potential depends on `x` only,
/// so only the `y = 0` line of the grid is returned.
pub fn run_kahler(amplitude: f64, negative: bool, grid: usize, t_end: f64) -> Result<KahlerRun, Error> {
    let g = Arc::new(ComplexTorusGrid::new(1, grid)?);
    let f = g.sample(|x| amplitude * x[0].cos());
    let mode = if negative { KahlerMode::Negative } else { KahlerMode::RicciFlat };
    let state = PotentialState::new(g.clone(), FlatMetric::identity(1)?, &f, vec![0.0; g.len()], mode)?;
    let traj = kahler::evolve(&state, &KahlerFlowConfig { t_end, output_interval: t_end / 50.0, cfl: 0.4 })?;
    let history = traj.monitors.iter().flat_map(|m| [m.t, m.osc, m.energy]).collect();
    let u = traj.states.last().unwrap_or(&state).normalized_u();
    let h = g.spacing();
    Ok(KahlerRun {
        history,
        x: (0..grid).map(|i| i as f64 * h).collect(),
        potential: (0..grid).map(|i| u[i * grid]).collect(),
    })
}

#[wasm_bindgen]
pub fn kahler_circle(amplitude: f64, negative: bool, grid: usize, t_end: f64) -> Result<KahlerRun, JsError> {
    run_kahler(amplitude, negative, grid, t_end).map_err(js)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_su2_collapses_at_a_quarter() {
        let run = run_homogeneous("su2", [1.0, 1.0, 1.0], 1.0, false).unwrap();
        assert!((run.singular_at().unwrap() - 0.25).abs() < 1e-4);
        assert_eq!(run.rows().len() % 4, 0);
        assert!(run_homogeneous("heisenberg", [1.0; 3], 1.0, false).is_err());
    }

    #[test]
    fn sphere_bump_flattens() {
        let run = run_sphere(0.1, 1, 32, 2.0).unwrap();
        let spread =
            |r: &[f64]| r.iter().cloned().fold(f64::MIN, f64::max) - r.iter().cloned().fold(f64::MAX, f64::min);
        assert_eq!(run.theta().len(), run.final_curvature().len());
        assert!(spread(&run.final_curvature()) < 0.1 * spread(&run.initial_curvature()));
    }

    #[test]
    fn kahler_potential_has_zero_mean() {
        let run = run_kahler(0.2, true, 16, 3.0).unwrap();
        let u = run.potential();
        assert_eq!(u.len(), 16);
        assert!(u.iter().sum::<f64>().abs() / 16.0 < 1e-9);
        let h = run.history();
        assert!(h[h.len() - 2] < h[1]);
    }
}
