use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::spectral::SpectralGrid;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BackgroundKind {
    FlatTorus,
    RoundSphereZonal,
}

/// Fixed background surface `h` over which the conformal factor lives.
///
/// * flat torus: `N × N` periodic grid on `[0, 2π)²`, spectral derivatives;
/// * round unit sphere, zonal: `N` staggered colatitude nodes `θ_i = (i + ½)π/N`,
///   finite-volume Laplacian whose cell weights are the exact band areas
///   `2π(cos θ_{i−½} − cos θ_{i+½})`, so discrete integrals of Laplacians vanish.
#[derive(Debug, Clone, PartialEq)]
pub struct Background {
    kind: BackgroundKind,
    n: usize,
    grid: Option<SpectralGrid>,
    /// Sphere: node colatitudes.
    theta: Vec<f64>,
    /// Sphere: `sin` at the N+1 cell faces (zero at both poles).
    face_sin: Vec<f64>,
    /// Quadrature weight of each node with respect to `dμ_h`.
    weights: Vec<f64>,
}

pub const MIN_TORUS_GRID: usize = 16;
pub const MIN_SPHERE_GRID: usize = 8;

impl Background {
    pub fn flat_torus(n: usize) -> Result<Self> {
        if n < MIN_TORUS_GRID || !n.is_multiple_of(2) {
            return Err(Error::invalid(format!("torus grid must be even and at least {MIN_TORUS_GRID}, got {n}")));
        }
        let grid = SpectralGrid::new(n, 2)?;
        let weights = vec![grid.cell_volume(); grid.len()];
        Ok(Self {
            kind: BackgroundKind::FlatTorus,
            n,
            grid: Some(grid),
            theta: Vec::new(),
            face_sin: Vec::new(),
            weights,
        })
    }

    pub fn round_sphere(n: usize) -> Result<Self> {
        if n < MIN_SPHERE_GRID {
            return Err(Error::invalid(format!("sphere grid must have at least {MIN_SPHERE_GRID} nodes, got {n}")));
        }
        let dt = PI / n as f64;
        let theta: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) * dt).collect();
        let face: Vec<f64> = (0..=n).map(|i| i as f64 * dt).collect();
        let mut face_sin: Vec<f64> = face.iter().map(|t| t.sin()).collect();
        face_sin[0] = 0.0;
        face_sin[n] = 0.0;
        let weights = (0..n).map(|i| 2.0 * PI * (face[i].cos() - face[i + 1].cos())).collect();
        Ok(Self { kind: BackgroundKind::RoundSphereZonal, n, grid: None, theta, face_sin, weights })
    }

    pub fn kind(&self) -> BackgroundKind {
        self.kind
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn grid(&self) -> Option<&SpectralGrid> {
        self.grid.as_ref()
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Scalar curvature of the background metric.
    pub fn curvature(&self) -> f64 {
        match self.kind {
            BackgroundKind::FlatTorus => 0.0,
            BackgroundKind::RoundSphereZonal => 2.0,
        }
    }

    pub fn euler_characteristic(&self) -> f64 {
        match self.kind {
            BackgroundKind::FlatTorus => 0.0,
            BackgroundKind::RoundSphereZonal => 2.0,
        }
    }

    pub fn min_spacing(&self) -> f64 {
        match self.kind {
            BackgroundKind::FlatTorus => 2.0 * PI / self.n as f64,
            BackgroundKind::RoundSphereZonal => PI / self.n as f64,
        }
    }

    /// Grid coordinates of node `i`: `(x, y)` on the torus, `(θ, 0)` on the sphere.
    pub fn coords(&self, i: usize) -> (f64, f64) {
        match &self.grid {
            Some(g) => {
                let c = g.coords(i);
                (c[0], c[1])
            }
            None => (self.theta[i], 0.0),
        }
    }

    pub fn sample(&self, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        (0..self.len())
            .map(|i| {
                let (a, b) = self.coords(i);
                f(a, b)
            })
            .collect()
    }

    fn check(&self, field: &[f64]) -> Result<()> {
        if field.len() != self.len() {
            return Err(Error::DimensionMismatch { expected: self.len(), got: field.len() });
        }
        Ok(())
    }

    /// `∫ field dμ_h`.
    pub fn integrate(&self, field: &[f64]) -> f64 {
        field.iter().zip(&self.weights).map(|(f, w)| f * w).sum()
    }

    pub fn area(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Background Laplacian `Δ_h`.
    pub fn laplacian(&self, field: &[f64]) -> Result<Vec<f64>> {
        self.check(field)?;
        match &self.grid {
            Some(g) => g.laplacian(field),
            None => Ok(self.sphere_laplacian(field)),
        }
    }

    fn sphere_laplacian(&self, f: &[f64]) -> Vec<f64> {
        let n = self.n;
        let dt = PI / n as f64;
        let flux = |k: usize| -> f64 {
            // flux through face k (between nodes k−1 and k)
            if k == 0 || k == n {
                0.0
            } else {
                2.0 * PI * self.face_sin[k] * (f[k] - f[k - 1]) / dt
            }
        };
        (0..n).map(|i| (flux(i + 1) - flux(i)) / self.weights[i]).collect()
    }

    /// `|∇f|²_h` pointwise.
    pub fn gradient_sq(&self, f: &[f64]) -> Result<Vec<f64>> {
        self.check(f)?;
        match &self.grid {
            Some(g) => {
                let fx = g.derivative(f, 0)?;
                let fy = g.derivative(f, 1)?;
                Ok(fx.iter().zip(&fy).map(|(a, b)| a * a + b * b).collect())
            }
            None => Ok(self.sphere_dtheta(f).iter().map(|d| d * d).collect()),
        }
    }

    /// Centered `∂_θ` with the pole-reflected ghost nodes.
    pub(crate) fn sphere_dtheta(&self, f: &[f64]) -> Vec<f64> {
        let n = self.n;
        let dt = PI / n as f64;
        (0..n)
            .map(|i| {
                let lo = if i == 0 { f[0] } else { f[i - 1] };
                let hi = if i + 1 == n { f[n - 1] } else { f[i + 1] };
                (hi - lo) / (2.0 * dt)
            })
            .collect()
    }

    pub(crate) fn sphere_dtheta2(&self, f: &[f64]) -> Vec<f64> {
        let n = self.n;
        let dt = PI / n as f64;
        (0..n)
            .map(|i| {
                let lo = if i == 0 { f[0] } else { f[i - 1] };
                let hi = if i + 1 == n { f[n - 1] } else { f[i + 1] };
                (hi - 2.0 * f[i] + lo) / (dt * dt)
            })
            .collect()
    }

    /// Solves `Δ_h u = rhs` up to constants; the caller fixes the constant.
    /// `rhs` must integrate to zero against `dμ_h`.
    pub fn solve_poisson(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        self.check(rhs)?;
        match &self.grid {
            Some(g) => g.inverse_laplacian(rhs),
            None => {
                // Flux recursion: the finite-volume system is tridiagonal with a
                // one-dimensional kernel, so it integrates cell by cell from the pole.
                let n = self.n;
                let dt = PI / n as f64;
                let mut u = vec![0.0; n];
                let mut cumulative = 0.0;
                for i in 0..n - 1 {
                    cumulative += self.weights[i] * rhs[i];
                    u[i + 1] = u[i] + dt * cumulative / (2.0 * PI * self.face_sin[i + 1]);
                }
                Ok(u)
            }
        }
    }
}
