//! Normalized Ricci flow on surfaces, `∂g/∂t = (r − R) g`, written for a
//! conformal factor over a fixed background: `g = e^{2v} h`.
//!
//! With this convention
//!
//! ```text
//! R_g   = e^{−2v} (R_h − 2 Δ_h v)
//! ∂v/∂t = (r − R_g) / 2,      r = 4πχ / A
//! ```
//!
//! On the flat torus this is `∂v/∂t = e^{−2v} Δ_h v`; the factor `u` that is
//! often used for the `r = 0` case (`g = e^{−2u} h`) is `u = −v`.

mod background;
mod harnack;

use std::sync::Arc;

pub use background::{Background, BackgroundKind, MIN_SPHERE_GRID, MIN_TORUS_GRID};
pub use harnack::{
    harnack_check, harnack_distance, harnack_static_bounds, random_pairs, HarnackPair, HarnackReport, SpacePoint,
};

use crate::error::{Error, Result};

/// Conformal factor `v` of `g = e^{2v} h` at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConformalState {
    pub background: Arc<Background>,
    pub v: Vec<f64>,
    pub t: f64,
}

impl ConformalState {
    pub fn new(background: Arc<Background>, v: Vec<f64>) -> Result<Self> {
        if v.len() != background.len() {
            return Err(Error::DimensionMismatch { expected: background.len(), got: v.len() });
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("conformal factor must be finite"));
        }
        Ok(Self { background, v, t: 0.0 })
    }

    pub fn from_fn(background: Arc<Background>, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let v = background.sample(f);
        Self::new(background, v)
    }

    /// Area form weights `e^{2v} dμ_h` at each node.
    pub fn area_weights(&self) -> Vec<f64> {
        self.v.iter().zip(self.background.weights()).map(|(v, w)| (2.0 * v).exp() * w).collect()
    }

    /// `∫ field dμ_g`.
    pub fn integrate(&self, field: &[f64]) -> f64 {
        field.iter().zip(self.area_weights()).map(|(f, w)| f * w).sum()
    }

    pub fn area(&self) -> f64 {
        self.area_weights().iter().sum()
    }

    /// Average scalar curvature `4πχ / A`.
    pub fn average_curvature(&self) -> f64 {
        4.0 * std::f64::consts::PI * self.background.euler_characteristic() / self.area()
    }

    /// `Δ_g = e^{−2v} Δ_h`.
    pub fn laplacian_g(&self, field: &[f64]) -> Result<Vec<f64>> {
        let lap = self.background.laplacian(field)?;
        Ok(lap.iter().zip(&self.v).map(|(l, v)| (-2.0 * v).exp() * l).collect())
    }

    /// `|∇f|²_g = e^{−2v} |∇f|²_h`.
    pub fn gradient_sq_g(&self, field: &[f64]) -> Result<Vec<f64>> {
        let g = self.background.gradient_sq(field)?;
        Ok(g.iter().zip(&self.v).map(|(g, v)| (-2.0 * v).exp() * g).collect())
    }

    pub fn max_abs_v(&self) -> f64 {
        self.v.iter().fold(0.0, |m, x| m.max(x.abs()))
    }
}

/// Applies the background Laplacian.
pub fn laplacian(background: &Background, field: &[f64]) -> Result<Vec<f64>> {
    background.laplacian(field)
}

/// `R_g = e^{−2v}(R_h − 2Δ_h v)`.
pub fn scalar_curvature(state: &ConformalState) -> Vec<f64> {
    let lap = state.background.laplacian(&state.v).expect("state matches its background");
    let rh = state.background.curvature();
    lap.iter().zip(&state.v).map(|(l, v)| (-2.0 * v).exp() * (rh - 2.0 * l)).collect()
}

fn flow_rhs(bg: &Background, v: &[f64]) -> Vec<f64> {
    let lap = bg.laplacian(v).expect("grid size fixed");
    let rh = bg.curvature();
    let area: f64 = v.iter().zip(bg.weights()).map(|(v, w)| (2.0 * v).exp() * w).sum();
    let r = 4.0 * std::f64::consts::PI * bg.euler_characteristic() / area;
    lap.iter().zip(v).map(|(l, v)| 0.5 * (r - (-2.0 * v).exp() * (rh - 2.0 * l))).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceFlowConfig {
    pub t_end: f64,
    /// Time between recorded samples.
    pub output_interval: f64,
    /// Safety factor in `δt = cfl · h² / (4 max e^{−2v})`.
    pub cfl: f64,
}

impl Default for SurfaceFlowConfig {
    fn default() -> Self {
        Self { t_end: 5.0, output_interval: 0.1, cfl: 0.4 }
    }
}

impl SurfaceFlowConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_end > 0.0 && self.output_interval > 0.0 && self.cfl > 0.0) {
            return Err(Error::invalid("t_end, output_interval and cfl must be positive"));
        }
        if self.cfl > 0.7 {
            return Err(Error::invalid("cfl above 0.7 is outside the RK4 stability margin"));
        }
        Ok(())
    }
}

/// Diagnostics of one conformal state.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceDiagnostics {
    pub t: f64,
    pub curvature: Vec<f64>,
    pub area: f64,
    pub r: f64,
    pub r_min: f64,
    pub r_max: f64,
    pub gauss_bonnet: f64,
    pub entropy: Option<f64>,
    pub potential_f: Vec<f64>,
    pub soliton_m_norm: f64,
    pub h_field: Vec<f64>,
    pub conserved_i_osc: f64,
}

pub fn diagnose(state: &ConformalState) -> Result<SurfaceDiagnostics> {
    let curvature = scalar_curvature(state);
    let area = state.area();
    let r = state.average_curvature();
    let (r_min, r_max) = min_max(&curvature);
    let gauss_bonnet = state.integrate(&curvature);
    let entropy = entropy_of(state, &curvature).ok();
    let potential_f = ricci_potential_with(state, &curvature, r)?;
    let res = soliton_residuals_with(state, &curvature, r, &potential_f)?;
    Ok(SurfaceDiagnostics {
        t: state.t,
        curvature,
        area,
        r,
        r_min,
        r_max,
        gauss_bonnet,
        entropy,
        potential_f,
        soliton_m_norm: res.m_norm,
        h_field: res.h_field,
        conserved_i_osc: res.i_oscillation,
    })
}

pub(crate) fn min_max(x: &[f64]) -> (f64, f64) {
    x.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

/// Samples of a surface flow run at uniform output times.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceTrajectory {
    pub states: Vec<ConformalState>,
    pub diagnostics: Vec<SurfaceDiagnostics>,
}

impl SurfaceTrajectory {
    pub fn times(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.t).collect()
    }

    pub fn background(&self) -> &Arc<Background> {
        &self.states[0].background
    }
}

/// Explicit RK4 integration of `∂v/∂t = (r − R)/2`.
///
/// Sample `k` is taken at exactly `k · output_interval`; inside each interval
/// the step is recomputed from the current state and the last step is
/// shortened to land on the sample time.
pub fn evolve(state: &ConformalState, config: &SurfaceFlowConfig) -> Result<SurfaceTrajectory> {
    config.validate()?;
    let bg = state.background.clone();
    let h2 = bg.min_spacing().powi(2);
    let n_out = (config.t_end / config.output_interval).round().max(1.0) as usize;

    let mut states = vec![state.clone()];
    let mut diagnostics = vec![diagnose(state)?];
    let mut v = state.v.clone();
    let t0 = state.t;
    let mut t = t0;
    let len = v.len();
    let mut stage = vec![0.0; len];
    for k in 1..=n_out {
        let t_target = t0 + k as f64 * config.output_interval;
        while t < t_target {
            let max_diff = v.iter().map(|x| (-2.0 * x).exp()).fold(0.0, f64::max);
            let dt_max = config.cfl * h2 / (4.0 * max_diff);
            let remaining = t_target - t;
            let dt = if remaining <= dt_max * (1.0 + 1e-12) { remaining } else { dt_max };

            let k1 = flow_rhs(&bg, &v);
            for i in 0..len {
                stage[i] = v[i] + 0.5 * dt * k1[i];
            }
            let k2 = flow_rhs(&bg, &stage);
            for i in 0..len {
                stage[i] = v[i] + 0.5 * dt * k2[i];
            }
            let k3 = flow_rhs(&bg, &stage);
            for i in 0..len {
                stage[i] = v[i] + dt * k3[i];
            }
            let k4 = flow_rhs(&bg, &stage);
            let mut next = v.clone();
            for i in 0..len {
                next[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            if next.iter().any(|x| !x.is_finite()) {
                let last = ConformalState { background: bg.clone(), v, t };
                return Err(Error::SurfaceBlowUp { t, last: Box::new(last) });
            }
            v = next;
            t = if dt == remaining { t_target } else { t + dt };
        }
        let s = ConformalState { background: bg.clone(), v: v.clone(), t: t_target };
        diagnostics.push(diagnose(&s)?);
        states.push(s);
    }
    Ok(SurfaceTrajectory { states, diagnostics })
}

/// Ricci potential: mean-zero (w.r.t. `dμ_g`) solution of `Δ_g f = R − r`.
pub fn ricci_potential(state: &ConformalState) -> Result<Vec<f64>> {
    let curvature = scalar_curvature(state);
    ricci_potential_with(state, &curvature, state.average_curvature())
}

fn ricci_potential_with(state: &ConformalState, curvature: &[f64], r: f64) -> Result<Vec<f64>> {
    let bg = &state.background;
    let mean = state.integrate(&curvature.iter().map(|x| x - r).collect::<Vec<_>>()) / state.area();
    if mean.abs() > 1e-8 * (1.0 + r.abs()) {
        return Err(Error::InconsistentState { mean });
    }
    // Δ_h f = e^{2v}(R − r − mean); removing the rounding-level mean keeps the system consistent.
    let rhs: Vec<f64> = curvature.iter().zip(&state.v).map(|(rr, v)| (2.0 * v).exp() * (rr - r - mean)).collect();
    let mut f = bg.solve_poisson(&rhs)?;
    let fmean = state.integrate(&f) / state.area();
    f.iter_mut().for_each(|x| *x -= fmean);
    Ok(f)
}

/// Trace-free Hessian norm, the `h` field, and the oscillation of `R + |∇f|² + rf`.
#[derive(Debug, Clone, PartialEq)]
pub struct SolitonResiduals {
    pub m_norm: f64,
    pub h_field: Vec<f64>,
    pub i_oscillation: f64,
}

pub fn soliton_residuals(state: &ConformalState, f: &[f64]) -> Result<SolitonResiduals> {
    let curvature = scalar_curvature(state);
    soliton_residuals_with(state, &curvature, state.average_curvature(), f)
}

fn soliton_residuals_with(state: &ConformalState, curvature: &[f64], r: f64, f: &[f64]) -> Result<SolitonResiduals> {
    let bg = &state.background;
    let m_h = trace_free_hessian_h(state, f)?;
    let m_norm = m_h.iter().zip(&state.v).map(|(m, v)| (-2.0 * v).exp() * m).fold(0.0, f64::max);
    let lap_g = state.laplacian_g(f)?;
    let grad_g = state.gradient_sq_g(f)?;
    let h_field: Vec<f64> = lap_g.iter().zip(&grad_g).map(|(l, g)| l + g).collect();
    let i_field: Vec<f64> = (0..bg.len()).map(|i| curvature[i] + grad_g[i] + r * f[i]).collect();
    let (lo, hi) = min_max(&i_field);
    Ok(SolitonResiduals { m_norm, h_field, i_oscillation: hi - lo })
}

/// `|TF_h(Hess_h f − dv⊗df − df⊗dv)|_h` per node; multiply by `e^{−2v}` for the `g`-norm
/// of the trace-free Hessian of `f` with respect to `g`.
fn trace_free_hessian_h(state: &ConformalState, f: &[f64]) -> Result<Vec<f64>> {
    let bg = &state.background;
    match bg.grid() {
        Some(grid) => {
            let fx = grid.derivative(f, 0)?;
            let fy = grid.derivative(f, 1)?;
            let vx = grid.derivative(&state.v, 0)?;
            let vy = grid.derivative(&state.v, 1)?;
            let fxx = grid.second_derivative(f, 0, 0)?;
            let fxy = grid.second_derivative(f, 0, 1)?;
            let fyy = grid.second_derivative(f, 1, 1)?;
            Ok((0..bg.len())
                .map(|i| {
                    let a11 = fxx[i] - 2.0 * vx[i] * fx[i];
                    let a22 = fyy[i] - 2.0 * vy[i] * fy[i];
                    let a12 = fxy[i] - vx[i] * fy[i] - vy[i] * fx[i];
                    let m11 = 0.5 * (a11 - a22);
                    (2.0 * m11 * m11 + 2.0 * a12 * a12).sqrt()
                })
                .collect())
        }
        None => {
            let ft = bg.sphere_dtheta(f);
            let ftt = bg.sphere_dtheta2(f);
            let vt = bg.sphere_dtheta(&state.v);
            Ok((0..bg.len())
                .map(|i| {
                    let theta = bg.theta()[i];
                    let a = ftt[i] - 2.0 * vt[i] * ft[i];
                    let b = ft[i] * theta.cos() / theta.sin();
                    (a - b).abs() / std::f64::consts::SQRT_2
                })
                .collect())
        }
    }
}

/// `∫ R log R dμ_g`; requires `R > 0` everywhere.
pub fn entropy(state: &ConformalState) -> Result<f64> {
    entropy_of(state, &scalar_curvature(state))
}

fn entropy_of(state: &ConformalState, curvature: &[f64]) -> Result<f64> {
    if let Some((i, r)) = curvature.iter().enumerate().find(|(_, r)| **r <= 0.0) {
        return Err(Error::Inapplicable(format!("R = {r:e} ≤ 0 at node {i}")));
    }
    Ok(state.integrate(&curvature.iter().map(|r| r * r.ln()).collect::<Vec<_>>()))
}

/// Sup-norm of `∂R/∂t − (Δ_g R + R(R − r))` with `∂R/∂t` from centered
/// differences of samples spaced `stride` apart; maximum over interior samples.
pub fn r_evolution_residual(traj: &SurfaceTrajectory, stride: usize) -> Result<f64> {
    let n = traj.states.len();
    if stride == 0 || n < 2 * stride + 1 {
        return Err(Error::invalid("need at least three samples at the requested stride"));
    }
    let mut worst: f64 = 0.0;
    for k in (stride..n - stride).step_by(stride) {
        let (prev, cur, next) = (&traj.diagnostics[k - stride], &traj.diagnostics[k], &traj.diagnostics[k + stride]);
        let dt = traj.states[k + stride].t - traj.states[k - stride].t;
        let lap = traj.states[k].laplacian_g(&cur.curvature)?;
        for i in 0..lap.len() {
            let dr = (next.curvature[i] - prev.curvature[i]) / dt;
            let rhs = lap[i] + cur.curvature[i] * (cur.curvature[i] - cur.r);
            worst = worst.max((dr - rhs).abs());
        }
    }
    Ok(worst)
}

/// `∫ R² dμ_g` and `∫ |∇R|²_g dμ_g` (the latter is conformally invariant in 2-D).
pub fn curvature_energies(state: &ConformalState, curvature: &[f64]) -> Result<(f64, f64)> {
    let l2 = state.integrate(&curvature.iter().map(|r| r * r).collect::<Vec<_>>());
    let grad = state.background.gradient_sq(curvature)?;
    Ok((l2, state.background.integrate(&grad)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn torus(n: usize) -> Arc<Background> {
        Arc::new(Background::flat_torus(n).unwrap())
    }

    fn sphere(n: usize) -> Arc<Background> {
        Arc::new(Background::round_sphere(n).unwrap())
    }

    #[test]
    fn curvature_examples() {
        let s = ConformalState::from_fn(torus(16), |_, _| 0.0).unwrap();
        assert!(scalar_curvature(&s).iter().all(|r| *r == 0.0));
        let s = ConformalState::from_fn(sphere(32), |_, _| 0.0).unwrap();
        assert!(scalar_curvature(&s).iter().all(|r| *r == 2.0));
        let s = ConformalState::from_fn(torus(16), |_, _| 0.5 * 2f64.ln()).unwrap();
        assert!(scalar_curvature(&s).iter().all(|r| r.abs() < 1e-14));
    }

    #[test]
    fn flat_torus_is_stationary() {
        let s = ConformalState::from_fn(torus(16), |_, _| 0.0).unwrap();
        let cfg = SurfaceFlowConfig { t_end: 1.0, output_interval: 0.5, ..Default::default() };
        let traj = evolve(&s, &cfg).unwrap();
        for st in &traj.states {
            assert!(st.v.iter().all(|x| *x == 0.0));
        }
        assert_eq!(traj.times(), vec![0.0, 0.5, 1.0]);
    }

    #[test]
    fn potential_examples() {
        let s = ConformalState::from_fn(sphere(32), |_, _| 0.0).unwrap();
        assert!(ricci_potential(&s).unwrap().iter().all(|f| f.abs() < 1e-14));

        let s = ConformalState::from_fn(torus(32), |x, _| 0.1 * x.cos()).unwrap();
        let f = ricci_potential(&s).unwrap();
        let r = scalar_curvature(&s);
        let lap = s.laplacian_g(&f).unwrap();
        let scale = r.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
        let res = lap.iter().zip(&r).map(|(l, rr)| (l - rr).abs()).fold(0.0, f64::max);
        assert!(res <= 1e-10 * scale, "residual {res}");
    }

    #[test]
    fn sphere_potential_residual() {
        let s = ConformalState::from_fn(sphere(64), |t, _| 0.1 * (2.0 * t).cos()).unwrap();
        let f = ricci_potential(&s).unwrap();
        let rr = scalar_curvature(&s);
        let r = s.average_curvature();
        let lap = s.laplacian_g(&f).unwrap();
        let scale = rr.iter().fold(0.0_f64, |m, x| m.max((x - r).abs()));
        let res = lap.iter().zip(&rr).map(|(l, x)| (l - (x - r)).abs()).fold(0.0, f64::max);
        assert!(res <= 1e-10 * scale, "residual {res}");
    }

    #[test]
    fn soliton_residual_examples() {
        let s = ConformalState::from_fn(sphere(32), |_, _| 0.0).unwrap();
        let d = diagnose(&s).unwrap();
        assert_eq!(d.soliton_m_norm, 0.0);
        assert!(d.conserved_i_osc < 1e-14);

        let s = ConformalState::from_fn(torus(32), |x, y| 0.3 * x.cos() * y.cos()).unwrap();
        assert!(diagnose(&s).unwrap().soliton_m_norm > 0.0);
    }

    #[test]
    fn entropy_examples() {
        let s = ConformalState::from_fn(sphere(32), |_, _| 0.0).unwrap();
        assert_relative_eq!(entropy(&s).unwrap(), 8.0 * PI * 2f64.ln(), max_relative = 1e-13);
        let s = ConformalState::from_fn(torus(16), |x, _| 0.1 * x.cos()).unwrap();
        assert!(matches!(entropy(&s), Err(Error::Inapplicable(_))));
    }

    #[test]
    fn gauss_bonnet_is_exact() {
        let s = ConformalState::from_fn(sphere(40), |t, _| 0.3 * t.cos() + 0.1 * (3.0 * t).cos()).unwrap();
        let d = diagnose(&s).unwrap();
        assert!((d.gauss_bonnet - 8.0 * PI).abs() < 1e-10);
        let s = ConformalState::from_fn(torus(32), |x, y| 0.3 * x.sin() * (2.0 * y).cos()).unwrap();
        assert!(diagnose(&s).unwrap().gauss_bonnet.abs() < 1e-10);
    }

    #[test]
    fn non_uniform_interval_lands_on_samples() {
        let s = ConformalState::from_fn(torus(16), |x, _| 0.1 * x.cos()).unwrap();
        let traj = evolve(&s, &SurfaceFlowConfig { t_end: 0.3, output_interval: 0.1, cfl: 0.4 }).unwrap();
        let times = traj.times();
        assert_eq!(times.len(), 4);
        assert_relative_eq!(times[3], 0.3, max_relative = 1e-15);
    }

    #[test]
    fn bad_config() {
        let s = ConformalState::from_fn(torus(16), |_, _| 0.0).unwrap();
        assert!(evolve(&s, &SurfaceFlowConfig { cfl: 2.0, ..Default::default() }).is_err());
        assert!(ConformalState::new(torus(16), vec![0.0; 5]).is_err());
    }
}
