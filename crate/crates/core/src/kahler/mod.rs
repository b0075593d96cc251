//! Kähler-Ricci flow on flat complex tori as a parabolic complex Monge-Ampère
//! equation for the potential:
//!
//! ```text
//! ∂u/∂t = log det(g0 + ∂∂̄u) − log det g0 + f          (ricci_flat)
//! ∂u/∂t = log det(g0 + ∂∂̄u) − log det g0 + f − u      (negative)
//! ```
//!
//! Coordinates are `z_j = x_j + i y_j`, real axes ordered `x_1, y_1, x_2, y_2`,
//! each of period `2π`. Hermitian matrices are stored with `M[j][k] = g_{j k̄}`
//! and `∂_j ∂_k̄ u = ¼[u_{x_j x_k} + u_{y_j y_k} + i(u_{x_j y_k} − u_{y_j x_k})]`.

mod newton;

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::spectral::SpectralGrid;

pub use newton::{gmres, stationary_newton, stationary_newton_from, GmresOutcome, NewtonSolution};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Clone)]
pub struct ComplexTorusGrid {
    n_c: usize,
    grid: SpectralGrid,
    /// Spectral multipliers of `∂_j∂_k̄` for `j ≤ k`, row-major over the pairs.
    hessian_symbols: Vec<Vec<Complex64>>,
}

impl std::fmt::Debug for ComplexTorusGrid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ComplexTorusGrid").field("n_c", &self.n_c).field("n", &self.grid.n()).finish()
    }
}

impl PartialEq for ComplexTorusGrid {
    fn eq(&self, other: &Self) -> bool {
        self.n_c == other.n_c && self.grid == other.grid
    }
}

impl ComplexTorusGrid {
    pub fn new(n_c: usize, n: usize) -> Result<Self> {
        let min = match n_c {
            1 => 16,
            2 => 12,
            _ => return Err(Error::invalid(format!("complex dimension must be 1 or 2, got {n_c}"))),
        };
        if n < min || !n.is_multiple_of(2) {
            return Err(Error::invalid(format!("grid must be even and at least {min} for n_c = {n_c}, got {n}")));
        }
        let mut out = Self { n_c, grid: SpectralGrid::new(n, 2 * n_c)?, hessian_symbols: Vec::new() };
        let mut b = vec![0; 2 * n_c];
        for j in 0..n_c {
            for k in j..n_c {
                let sym = (0..out.grid.len())
                    .map(|i| {
                        out.grid.bins(i, &mut b);
                        out.ddbar_symbol(&b, j, k)
                    })
                    .collect();
                out.hessian_symbols.push(sym);
            }
        }
        Ok(out)
    }

    pub fn n_c(&self) -> usize {
        self.n_c
    }

    pub fn n(&self) -> usize {
        self.grid.n()
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spectral(&self) -> &SpectralGrid {
        &self.grid
    }

    pub fn spacing(&self) -> f64 {
        self.grid.spacing()
    }

    pub fn volume(&self) -> f64 {
        self.grid.total_volume()
    }

    pub fn integrate(&self, field: &[f64]) -> f64 {
        self.grid.integrate(field)
    }

    /// Samples `f(coords)` with coordinates ordered `x_1, y_1, x_2, y_2`.
    pub fn sample(&self, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
        self.grid.sample(f)
    }

    fn check(&self, field: &[f64]) -> Result<()> {
        if field.len() != self.len() {
            return Err(Error::DimensionMismatch { expected: self.len(), got: field.len() });
        }
        Ok(())
    }

    /// Symbol of `∂_{z_j}`.
    fn dz(&self, b: &[usize], j: usize) -> Complex64 {
        // ½(∂x − i∂y)
        0.5 * (self.grid.ik(b, 2 * j) - Complex64::i() * self.grid.ik(b, 2 * j + 1))
    }

    /// Symbol of `∂_{z̄_k}`.
    fn dzbar(&self, b: &[usize], k: usize) -> Complex64 {
        0.5 * (self.grid.ik(b, 2 * k) + Complex64::i() * self.grid.ik(b, 2 * k + 1))
    }

    /// Symbol of `∂_{z_j}∂_{z̄_k}` keeping the Nyquist mode on pure second derivatives.
    fn ddbar_symbol(&self, b: &[usize], j: usize, k: usize) -> Complex64 {
        let g = &self.grid;
        let pair = |a: usize, c: usize| -> f64 {
            if a == c {
                -g.wavenumber(b[a]).powi(2)
            } else {
                (g.ik(b, a) * g.ik(b, c)).re
            }
        };
        let (xj, yj, xk, yk) = (2 * j, 2 * j + 1, 2 * k, 2 * k + 1);
        0.25 * Complex64::new(pair(xj, xk) + pair(yj, yk), pair(xj, yk) - pair(yj, xk))
    }
}

/// Per-point Hermitian `n_c × n_c` matrices, point-major.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianField {
    pub n_c: usize,
    pub entries: Vec<Complex64>,
}

impl HermitianField {
    pub fn len(&self) -> usize {
        self.entries.len() / (self.n_c * self.n_c)
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn at(&self, p: usize, j: usize, k: usize) -> Complex64 {
        self.entries[(p * self.n_c + j) * self.n_c + k]
    }

    fn point(&self, p: usize) -> &[Complex64] {
        let m = self.n_c * self.n_c;
        &self.entries[p * m..(p + 1) * m]
    }

    /// `max |a − b|` over all entries.
    pub fn sup_distance(&self, other: &HermitianField) -> f64 {
        self.entries.iter().zip(&other.entries).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    pub fn sup_norm(&self) -> f64 {
        self.entries.iter().map(|a| a.norm()).fold(0.0, f64::max)
    }

    /// Largest deviation from Hermitian symmetry.
    pub fn hermitian_defect(&self) -> f64 {
        let n = self.n_c;
        let mut worst = 0.0f64;
        for p in 0..self.len() {
            for j in 0..n {
                for k in 0..n {
                    worst = worst.max((self.at(p, j, k) - self.at(p, k, j).conj()).norm());
                }
            }
        }
        worst
    }

    fn combine(&self, other: &HermitianField, a: f64, b: f64) -> HermitianField {
        HermitianField {
            n_c: self.n_c,
            entries: self.entries.iter().zip(&other.entries).map(|(x, y)| a * x + b * y).collect(),
        }
    }

    pub fn add(&self, other: &HermitianField) -> HermitianField {
        self.combine(other, 1.0, 1.0)
    }

    pub fn sub(&self, other: &HermitianField) -> HermitianField {
        self.combine(other, 1.0, -1.0)
    }

    /// Adds the constant matrix `m` at every point.
    pub fn shifted(&self, m: &[Complex64]) -> HermitianField {
        let k = self.n_c * self.n_c;
        HermitianField { n_c: self.n_c, entries: self.entries.iter().enumerate().map(|(i, x)| x + m[i % k]).collect() }
    }
}

// Small Hermitian matrix helpers (n_c ∈ {1, 2}).

fn herm_det(m: &[Complex64]) -> f64 {
    match m.len() {
        1 => m[0].re,
        _ => m[0].re * m[3].re - m[1].norm_sqr(),
    }
}

fn herm_min_eig(m: &[Complex64]) -> f64 {
    match m.len() {
        1 => m[0].re,
        _ => {
            let (a, d) = (m[0].re, m[3].re);
            0.5 * (a + d) - (0.25 * (a - d).powi(2) + m[1].norm_sqr()).sqrt()
        }
    }
}

fn herm_inverse(m: &[Complex64]) -> Vec<Complex64> {
    match m.len() {
        1 => vec![Complex64::new(1.0 / m[0].re, 0.0)],
        _ => {
            let det = herm_det(m);
            vec![m[3] / det, -m[1] / det, -m[2] / det, m[0] / det]
        }
    }
}

/// `Σ_{jk} A[k][j] B[j][k] = tr(AB)`, real part.
fn trace_product(a: &[Complex64], b: &[Complex64]) -> f64 {
    let n = if a.len() == 1 { 1 } else { 2 };
    let mut s = 0.0;
    for j in 0..n {
        for k in 0..n {
            s += (a[k * n + j] * b[j * n + k]).re;
        }
    }
    s
}

/// Generalized eigenvalues of `(A, B)`: roots of `det(A − λB) = 0`, ascending.
fn relative_eigs(a: &[Complex64], b: &[Complex64]) -> (f64, f64) {
    match a.len() {
        1 => {
            let l = a[0].re / b[0].re;
            (l, l)
        }
        _ => {
            let qa = herm_det(b);
            let qb = a[0].re * b[3].re + a[3].re * b[0].re - 2.0 * (a[1] * b[1].conj()).re;
            let qc = herm_det(a);
            let disc = (qb * qb - 4.0 * qa * qc).max(0.0).sqrt();
            ((qb - disc) / (2.0 * qa), (qb + disc) / (2.0 * qa))
        }
    }
}

/// `∂∂̄u` at every grid point.
pub fn complex_hessian(grid: &ComplexTorusGrid, u: &[f64]) -> Result<HermitianField> {
    grid.check(u)?;
    let spec = grid.grid.forward(u);
    Ok(hessian_from_spectrum(grid, &spec))
}

fn hessian_from_spectrum(grid: &ComplexTorusGrid, spec: &[Complex64]) -> HermitianField {
    let n = grid.n_c;
    let pts = grid.len();
    let mut entries = vec![ZERO; pts * n * n];
    let mut pairs = Vec::new();
    for j in 0..n {
        for k in j..n {
            pairs.push((j, k));
        }
    }
    let symbol = |j: usize, k: usize| &grid.hessian_symbols[pairs.iter().position(|&p| p == (j, k)).expect("pair")];
    // Diagonal entries are real fields: two of them share one inverse transform.
    let diag: Vec<usize> = (0..n).collect();
    for chunk in diag.chunks(2) {
        let a = symbol(chunk[0], chunk[0]);
        let packed: Vec<Complex64> = match chunk {
            [_, k] => {
                let b = symbol(*k, *k);
                spec.iter().zip(a).zip(b).map(|((s, x), y)| s * (x + Complex64::i() * y)).collect()
            }
            _ => spec.iter().zip(a).map(|(s, x)| s * x).collect(),
        };
        let field = grid.grid.inverse_complex(packed);
        for (p, v) in field.into_iter().enumerate() {
            entries[(p * n + chunk[0]) * n + chunk[0]] = Complex64::new(v.re, 0.0);
            if let [_, k] = chunk {
                entries[(p * n + k) * n + k] = Complex64::new(v.im, 0.0);
            }
        }
    }
    for &(j, k) in pairs.iter().filter(|(j, k)| j != k) {
        let sym = symbol(j, k);
        let field = grid.grid.inverse_complex(spec.iter().zip(sym).map(|(a, b)| a * b).collect());
        for (p, v) in field.into_iter().enumerate() {
            entries[(p * n + j) * n + k] = v;
            entries[(p * n + k) * n + j] = v.conj();
        }
    }
    HermitianField { n_c: n, entries }
}

/// `∂_{z_j}∂_{z̄_k}u` for one index pair, computed independently of [`complex_hessian`].
pub fn mixed_derivative(grid: &ComplexTorusGrid, u: &[f64], j: usize, k: usize) -> Result<Vec<Complex64>> {
    grid.check(u)?;
    if j >= grid.n_c || k >= grid.n_c {
        return Err(Error::invalid("complex index out of range"));
    }
    let spec = grid.grid.forward(u);
    Ok(grid.grid.filter(&spec, |b| grid.dz(b, j) * grid.dzbar(b, k)))
}

/// Constant Hermitian positive-definite background `g0`.
#[derive(Debug, Clone, PartialEq)]
pub struct FlatMetric {
    entries: Vec<Complex64>,
}

impl FlatMetric {
    pub fn new(n_c: usize, entries: Vec<Complex64>) -> Result<Self> {
        if entries.len() != n_c * n_c || !(1..=2).contains(&n_c) {
            return Err(Error::DimensionMismatch { expected: n_c * n_c, got: entries.len() });
        }
        for j in 0..n_c {
            for k in 0..n_c {
                if (entries[j * n_c + k] - entries[k * n_c + j].conj()).norm() > 1e-13 {
                    return Err(Error::invalid("g0 is not Hermitian"));
                }
            }
        }
        if herm_min_eig(&entries) <= 0.0 {
            return Err(Error::invalid("g0 is not positive definite"));
        }
        Ok(Self { entries })
    }

    pub fn identity(n_c: usize) -> Result<Self> {
        let mut e = vec![ZERO; n_c * n_c];
        for j in 0..n_c {
            e[j * n_c + j] = Complex64::new(1.0, 0.0);
        }
        Self::new(n_c, e)
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    pub fn n_c(&self) -> usize {
        if self.entries.len() == 1 {
            1
        } else {
            2
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KahlerMode {
    RicciFlat,
    Negative,
}

impl std::fmt::Display for KahlerMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            KahlerMode::RicciFlat => "ricci-flat",
            KahlerMode::Negative => "negative",
        })
    }
}

/// Shifts `f` by the constant `b` with `∫(e^{f+b} − 1) dV = 0`.
pub fn normalize_data(grid: &ComplexTorusGrid, f: &[f64]) -> Result<Vec<f64>> {
    grid.check(f)?;
    if f.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("f has non-finite values"));
    }
    // stable log-sum-exp
    let m = f.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = f.iter().map(|x| (x - m).exp()).sum();
    let b = -(m + (sum / grid.len() as f64).ln());
    Ok(f.iter().map(|x| x + b).collect())
}

/// Potential `u` with background `g0`, normalized data `f`, at time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialState {
    pub grid: Arc<ComplexTorusGrid>,
    pub g0: FlatMetric,
    pub f: Arc<Vec<f64>>,
    pub u: Vec<f64>,
    pub t: f64,
    pub mode: KahlerMode,
}

impl PotentialState {
    /// Normalizes `f` and validates positivity of `g0 + ∂∂̄u`.
    pub fn new(grid: Arc<ComplexTorusGrid>, g0: FlatMetric, f: &[f64], u: Vec<f64>, mode: KahlerMode) -> Result<Self> {
        if g0.n_c() != grid.n_c() {
            return Err(Error::DimensionMismatch { expected: grid.n_c(), got: g0.n_c() });
        }
        grid.check(&u)?;
        if u.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("u has non-finite values"));
        }
        let f = Arc::new(normalize_data(&grid, f)?);
        let s = Self { grid, g0, f, u, t: 0.0, mode };
        s.metric()?;
        Ok(s)
    }

    pub fn with_u(&self, u: Vec<f64>, t: f64) -> Self {
        Self { grid: self.grid.clone(), g0: self.g0.clone(), f: self.f.clone(), u, t, mode: self.mode }
    }

    /// `g̃ = g0 + ∂∂̄u`, checked positive definite.
    pub fn metric(&self) -> Result<HermitianField> {
        let h = complex_hessian(&self.grid, &self.u)?;
        let g = h.shifted(self.g0.entries());
        check_positive(&g)?;
        Ok(g)
    }

    /// Mean-normalized potential.
    pub fn normalized_u(&self) -> Vec<f64> {
        let mean = self.u.iter().sum::<f64>() / self.u.len() as f64;
        self.u.iter().map(|x| x - mean).collect()
    }
}

fn check_positive(g: &HermitianField) -> Result<()> {
    let mut worst = (0, f64::INFINITY);
    for p in 0..g.len() {
        let e = herm_min_eig(g.point(p));
        if e < worst.1 || e.is_nan() {
            worst = (p, e);
        }
    }
    if worst.1.is_nan() || worst.1 <= 0.0 {
        return Err(Error::DegenerateMetric { index: worst.0, min_eig: worst.1 });
    }
    Ok(())
}

fn log_ratio_of(g: &HermitianField, g0: &FlatMetric) -> Vec<f64> {
    let base = herm_det(g0.entries()).ln();
    (0..g.len()).map(|p| herm_det(g.point(p)).ln() - base).collect()
}

/// `log det(g0 + ∂∂̄u) − log det g0`.
pub fn ma_log_ratio(state: &PotentialState) -> Result<Vec<f64>> {
    Ok(log_ratio_of(&state.metric()?, &state.g0))
}

/// Right-hand side of the potential flow.
pub fn flow_rhs(state: &PotentialState) -> Result<Vec<f64>> {
    let lr = ma_log_ratio(state)?;
    Ok(match state.mode {
        KahlerMode::RicciFlat => lr.iter().zip(state.f.iter()).map(|(a, f)| a + f).collect(),
        KahlerMode::Negative => lr.iter().zip(state.f.iter()).zip(&state.u).map(|((a, f), u)| a + f - u).collect(),
    })
}

/// `Ric_{j k̄} = −∂_j∂_k̄ log det g̃`.
pub fn ricci_form(state: &PotentialState) -> Result<HermitianField> {
    let g = state.metric()?;
    let ld: Vec<f64> = (0..g.len()).map(|p| -herm_det(g.point(p)).ln()).collect();
    complex_hessian(&state.grid, &ld)
}

/// Residual of the stationary curvature equation at the state:
/// `Ric − ∂∂̄f` (ricci_flat) or `Ric + g̃ − g0 − ∂∂̄f` (negative).
pub fn curvature_equation_residual(state: &PotentialState) -> Result<f64> {
    let ric = ricci_form(state)?;
    let ddf = complex_hessian(&state.grid, &state.f)?;
    Ok(match state.mode {
        KahlerMode::RicciFlat => ric.sub(&ddf).sup_norm(),
        KahlerMode::Negative => {
            let g = state.metric()?;
            ric.add(&g).sub(&ddf.shifted(state.g0.entries())).sup_norm()
        }
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureIdentityReport {
    /// `sup |g^{ij̄} R_{ij̄kl̄} + ∂_k∂_l̄ log det g|`.
    pub discrepancy: f64,
    /// `sup |∂_k∂_l̄ log det g|`, for scale.
    pub ricci_sup: f64,
}

/// Computes the Ricci form twice — as the trace of the Kähler curvature tensor
/// built from Christoffel-type derivatives of `g`, and as `−∂∂̄ log det g` — and
/// compares them.
pub fn curvature_identity_check(
    grid: &ComplexTorusGrid,
    g0: &FlatMetric,
    potential: &[f64],
) -> Result<CurvatureIdentityReport> {
    grid.check(potential)?;
    let n = grid.n_c;
    let sg = &grid.grid;
    let spec = sg.forward(potential);
    let g = hessian_from_spectrum(grid, &spec).shifted(g0.entries());
    check_positive(&g)?;
    let pts = grid.len();

    // ∂_k g_{ij̄}, ∂_l̄ g_{ij̄}, ∂_k∂_l̄ g_{ij̄} straight from the potential's spectrum.
    let idx = |a: usize, b: usize| a * n + b;
    let mut dg = vec![Vec::new(); n * n * n];
    let mut dbg = vec![Vec::new(); n * n * n];
    let mut ddg = vec![Vec::new(); n * n * n * n];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                dg[idx(i, j) * n + k] = sg.filter(&spec, |b| grid.dz(b, i) * grid.dzbar(b, j) * grid.dz(b, k));
                dbg[idx(i, j) * n + k] = sg.filter(&spec, |b| grid.dz(b, i) * grid.dzbar(b, j) * grid.dzbar(b, k));
                for l in 0..n {
                    ddg[(idx(i, j) * n + k) * n + l] =
                        sg.filter(&spec, |b| grid.dz(b, i) * grid.dzbar(b, j) * grid.dz(b, k) * grid.dzbar(b, l));
                }
            }
        }
    }

    let ld: Vec<f64> = (0..pts).map(|p| herm_det(g.point(p)).ln()).collect();
    let ld_spec = sg.forward(&ld);
    let mut discrepancy = 0.0f64;
    let mut ricci_sup = 0.0f64;
    for k in 0..n {
        for l in 0..n {
            let route_b = sg.filter(&ld_spec, |b| -grid.dz(b, k) * grid.dzbar(b, l));
            for p in 0..pts {
                let ginv = herm_inverse(g.point(p));
                let mut tr = ZERO;
                for i in 0..n {
                    for j in 0..n {
                        let mut r = -ddg[(idx(i, j) * n + k) * n + l][p];
                        for pp in 0..n {
                            for q in 0..n {
                                r += ginv[idx(q, pp)] * dg[idx(i, q) * n + k][p] * dbg[idx(pp, j) * n + l][p];
                            }
                        }
                        tr += ginv[idx(j, i)] * r;
                    }
                }
                discrepancy = discrepancy.max((tr - route_b[p]).norm());
                ricci_sup = ricci_sup.max(route_b[p].norm());
            }
        }
    }
    Ok(CurvatureIdentityReport { discrepancy, ricci_sup })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KahlerFlowConfig {
    pub t_end: f64,
    pub output_interval: f64,
    pub cfl: f64,
}

impl Default for KahlerFlowConfig {
    fn default() -> Self {
        Self { t_end: 60.0, output_interval: 0.5, cfl: 0.4 }
    }
}

impl KahlerFlowConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_end.is_finite() && self.t_end > 0.0) {
            return Err(Error::invalid(format!("t_end must be positive, got {}", self.t_end)));
        }
        if !(self.output_interval > 0.0 && self.output_interval <= self.t_end) {
            return Err(Error::invalid(format!(
                "output interval must lie in (0, t_end], got {}",
                self.output_interval
            )));
        }
        if !(self.cfl > 0.0 && self.cfl <= 0.7) {
            return Err(Error::invalid(format!("cfl must lie in (0, 0.7], got {}", self.cfl)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KahlerMonitor {
    pub t: f64,
    pub max_dudt: f64,
    /// `max ∂u/∂t − min ∂u/∂t`.
    pub osc: f64,
    /// `½∫φ² dṼ`, `φ` the `dṼ`-mean-normalized `∂u/∂t`.
    pub energy: f64,
    /// `min (n + g0^{jk̄} ∂_j∂_k̄ u)`.
    pub trace_min: f64,
    /// Smallest `K` with `spec(g0⁻¹ g̃) ⊂ [1/K, K]`.
    pub equiv_k: f64,
    /// `∫|v(t) − v(t_prev)| dV` for the mean-normalized potential; 0 on the first sample.
    pub l1_change: f64,
    /// `|∫e^{∂u/∂t − f} dV − ∫dṼ|` (ricci_flat only, else 0).
    pub volume_identity: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KahlerTrajectory {
    pub states: Vec<PotentialState>,
    pub monitors: Vec<KahlerMonitor>,
}

fn monitor(state: &PotentialState, previous: Option<&PotentialState>) -> Result<KahlerMonitor> {
    let g = state.metric()?;
    let grid = &state.grid;
    let lr = log_ratio_of(&g, &state.g0);
    let rhs = flow_rhs(state)?;
    let max_dudt = rhs.iter().map(|x| x.abs()).fold(0.0, f64::max);
    let (lo, hi) = rhs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(*x), b.max(*x)));
    let density: Vec<f64> = lr.iter().map(|x| x.exp()).collect();
    let vol_t = grid.integrate(&density);
    let weighted: Vec<f64> = rhs.iter().zip(&density).map(|(a, d)| a * d).collect();
    let mean = grid.integrate(&weighted) / vol_t;
    let sq: Vec<f64> = rhs.iter().zip(&density).map(|(a, d)| (a - mean).powi(2) * d).collect();
    let energy = 0.5 * grid.integrate(&sq);
    let g0inv = herm_inverse(state.g0.entries());
    let mut trace_min = f64::INFINITY;
    let mut equiv_k = 1.0f64;
    for p in 0..g.len() {
        trace_min = trace_min.min(trace_product(&g0inv, g.point(p)));
        let (a, b) = relative_eigs(g.point(p), state.g0.entries());
        equiv_k = equiv_k.max(b).max(1.0 / a);
    }
    let l1_change = match previous {
        Some(prev) => {
            let d: Vec<f64> =
                state.normalized_u().iter().zip(prev.normalized_u()).map(|(a, b)| (a - b).abs()).collect();
            grid.integrate(&d)
        }
        None => 0.0,
    };
    let volume_identity = match state.mode {
        KahlerMode::RicciFlat => {
            let e: Vec<f64> = rhs.iter().zip(state.f.iter()).map(|(a, f)| (a - f).exp()).collect();
            (grid.integrate(&e) - vol_t).abs()
        }
        KahlerMode::Negative => 0.0,
    };
    Ok(KahlerMonitor { t: state.t, max_dudt, osc: hi - lo, energy, trace_min, equiv_k, l1_change, volume_identity })
}

#[derive(Default)]
struct FlowWorkspace {
    spec: Vec<Complex64>,
    diag: Vec<Complex64>,
    off: Vec<Complex64>,
}

/// Flow right-hand side at `u` into `rhs`; returns `λ_min(g̃)` over the grid.
/// Same arithmetic as [`flow_rhs`], without allocating per call.
fn flow_eval(state: &PotentialState, u: &[f64], ws: &mut FlowWorkspace, rhs: &mut [f64]) -> Result<f64> {
    let grid = &state.grid;
    let sg = &grid.grid;
    sg.forward_into(u, &mut ws.spec);
    let syms = &grid.hessian_symbols;
    ws.diag.clear();
    ws.off.clear();
    if grid.n_c == 1 {
        ws.diag.extend(ws.spec.iter().zip(&syms[0]).map(|(s, a)| s * a));
    } else {
        let i = Complex64::i();
        ws.diag.extend(ws.spec.iter().zip(&syms[0]).zip(&syms[2]).map(|((s, a), b)| s * (a + i * b)));
        ws.off.extend(ws.spec.iter().zip(&syms[1]).map(|(s, a)| s * a));
        sg.inverse_in_place(&mut ws.off);
    }
    sg.inverse_in_place(&mut ws.diag);

    let g0 = state.g0.entries();
    let base = herm_det(g0).ln();
    let mut worst = (0, f64::INFINITY);
    for p in 0..u.len() {
        let d = ws.diag[p];
        let (det, eig) = if grid.n_c == 1 {
            let g = g0[0].re + d.re;
            (g, g)
        } else {
            let m = [
                Complex64::new(g0[0].re + d.re, 0.0),
                g0[1] + ws.off[p],
                g0[2] + ws.off[p].conj(),
                Complex64::new(g0[3].re + d.im, 0.0),
            ];
            (herm_det(&m), herm_min_eig(&m))
        };
        if eig < worst.1 || eig.is_nan() {
            worst = (p, eig);
        }
        rhs[p] = det.ln() - base + state.f[p];
        if state.mode == KahlerMode::Negative {
            rhs[p] -= u[p];
        }
    }
    if worst.1.is_nan() || worst.1 <= 0.0 {
        return Err(Error::DegenerateMetric { index: worst.0, min_eig: worst.1 });
    }
    Ok(worst.1)
}

/// Classical RK4 with the parabolic step bound recomputed every step; samples
/// land exactly on multiples of the output interval.
pub fn evolve(state: &PotentialState, cfg: &KahlerFlowConfig) -> Result<KahlerTrajectory> {
    cfg.validate()?;
    let h = state.grid.spacing();
    let mut current = state.clone();
    let mut states = vec![current.clone()];
    let mut monitors = vec![monitor(&current, None)?];
    let t0 = state.t;
    let n_out = (cfg.t_end / cfg.output_interval).round().max(1.0) as usize;
    let blow_up = |t: f64, last: &PotentialState| Error::KahlerBlowUp { t, last: Box::new(last.clone()) };
    let len = state.u.len();
    let mut ws = FlowWorkspace::default();
    let (mut k1, mut k2, mut k3, mut k4, mut stage) =
        (vec![0.0; len], vec![0.0; len], vec![0.0; len], vec![0.0; len], vec![0.0; len]);
    for k in 1..=n_out {
        let target = if k == n_out { t0 + cfg.t_end } else { t0 + k as f64 * cfg.output_interval };
        while current.t < target {
            let remaining = target - current.t;
            let fail = |_| blow_up(current.t, &current);
            let lam_min = flow_eval(&current, &current.u, &mut ws, &mut k1).map_err(fail)?;
            // λ_max(g̃⁻¹) = 1 / λ_min(g̃)
            let dt_max = cfg.cfl * h * h * lam_min / 4.0;
            let steps = (remaining / dt_max).ceil().max(1.0);
            let dt = if steps <= 1.0 { remaining } else { remaining / steps };
            let u0 = &current.u;
            let fill = |stage: &mut [f64], k: &[f64], a: f64| {
                stage.iter_mut().zip(u0).zip(k).for_each(|((s, x), y)| *s = x + a * y);
            };
            fill(&mut stage, &k1, 0.5 * dt);
            flow_eval(&current, &stage, &mut ws, &mut k2).map_err(fail)?;
            fill(&mut stage, &k2, 0.5 * dt);
            flow_eval(&current, &stage, &mut ws, &mut k3).map_err(fail)?;
            fill(&mut stage, &k3, dt);
            flow_eval(&current, &stage, &mut ws, &mut k4).map_err(fail)?;
            let u: Vec<f64> =
                (0..len).map(|i| u0[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])).collect();
            if u.iter().any(|x| !x.is_finite()) {
                return Err(blow_up(current.t, &current));
            }
            let t = if dt == remaining { target } else { current.t + dt };
            current = current.with_u(u, t);
        }
        let m = monitor(&current, states.last()).map_err(|_| blow_up(current.t, &current))?;
        monitors.push(m);
        states.push(current.clone());
    }
    Ok(KahlerTrajectory { states, monitors })
}

/// Stationary constant `c∞ = log(Vol / ∫e^{−f})` approached by `∂u/∂t` in ricci_flat mode.
pub fn ricci_flat_limit_constant(grid: &ComplexTorusGrid, f: &[f64]) -> f64 {
    let e: Vec<f64> = f.iter().map(|x| (-x).exp()).collect();
    (grid.volume() / grid.integrate(&e)).ln()
}

/// `sup |a − mean(a) − (b − mean(b))|`.
pub fn mean_aligned_distance(a: &[f64], b: &[f64]) -> f64 {
    let ma = a.iter().sum::<f64>() / a.len() as f64;
    let mb = b.iter().sum::<f64>() / b.len() as f64;
    a.iter().zip(b).map(|(x, y)| (x - ma - y + mb).abs()).fold(0.0, f64::max)
}
