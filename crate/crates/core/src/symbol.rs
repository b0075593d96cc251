//! Principal symbols at a point: the linearized Ricci operator, the adjoint of
//! the divergence, and the DeTurck-corrected operator.
//!
//! Symmetric 2-tensors are coordinatized in the basis `(1,1), (1,2), …, (1,n),
//! (2,2), …, (n,n)`, off-diagonal elements carrying weight `√2` so that the
//! coordinate inner product is the Frobenius product of the tensors.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};
use crate::rng;

pub const DEFAULT_RANK_TOL: f64 = 1e-9;
pub const MAX_CONDITION: f64 = 1e6;

#[derive(Debug, Clone, PartialEq)]
pub struct PointMetric {
    g: DMatrix<f64>,
    g_inv: DMatrix<f64>,
}

impl PointMetric {
    pub fn new(g: DMatrix<f64>) -> Result<Self> {
        let n = g.nrows();
        if !(2..=5).contains(&n) || g.ncols() != n {
            return Err(Error::invalid(format!("metric must be square with n in 2..=5, got {}x{}", n, g.ncols())));
        }
        if g.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("metric has non-finite entries"));
        }
        let asym = (&g - g.transpose()).amax();
        if asym > 1e-14 * g.amax().max(1.0) {
            return Err(Error::invalid(format!("metric not symmetric (deviation {asym:e})")));
        }
        let min_eig = g.clone().symmetric_eigenvalues().min();
        if min_eig <= 0.0 {
            return Err(Error::invalid(format!("metric not positive definite (min eigenvalue {min_eig:e})")));
        }
        let g_inv = g.clone().try_inverse().ok_or_else(|| Error::invalid("singular metric"))?;
        Ok(Self { g, g_inv })
    }

    pub fn identity(n: usize) -> Result<Self> {
        Self::new(DMatrix::identity(n, n))
    }

    pub fn n(&self) -> usize {
        self.g.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.g
    }

    pub fn inverse(&self) -> &DMatrix<f64> {
        &self.g_inv
    }

    pub fn condition_number(&self) -> f64 {
        let e = self.g.clone().symmetric_eigenvalues();
        e.max() / e.min()
    }

    /// `|ξ|²_g = g^{pq} ξ_p ξ_q`.
    pub fn norm_sq(&self, xi: &DVector<f64>) -> f64 {
        xi.dot(&(&self.g_inv * xi))
    }

    /// `tr_g h = g^{pq} h_{pq}`.
    pub fn trace(&self, h: &DMatrix<f64>) -> f64 {
        (&self.g_inv * h).trace()
    }
}

/// Dimension of the space of symmetric 2-tensors.
pub fn sym_dim(n: usize) -> usize {
    n * (n + 1) / 2
}

fn pairs(n: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..n).flat_map(move |i| (i..n).map(move |j| (i, j)))
}

/// Basis tensor number `k`.
pub fn basis_tensor(n: usize, k: usize) -> DMatrix<f64> {
    let (i, j) = pairs(n).nth(k).expect("basis index in range");
    let mut e = DMatrix::zeros(n, n);
    if i == j {
        e[(i, i)] = 1.0;
    } else {
        e[(i, j)] = std::f64::consts::FRAC_1_SQRT_2;
        e[(j, i)] = std::f64::consts::FRAC_1_SQRT_2;
    }
    e
}

pub fn to_coords(h: &DMatrix<f64>) -> DVector<f64> {
    let n = h.nrows();
    DVector::from_iterator(
        sym_dim(n),
        pairs(n)
            .map(|(i, j)| if i == j { h[(i, i)] } else { std::f64::consts::SQRT_2 * 0.5 * (h[(i, j)] + h[(j, i)]) }),
    )
}

pub fn from_coords(n: usize, c: &DVector<f64>) -> DMatrix<f64> {
    let mut h = DMatrix::zeros(n, n);
    for (k, (i, j)) in pairs(n).enumerate() {
        if i == j {
            h[(i, i)] = c[k];
        } else {
            h[(i, j)] = c[k] * std::f64::consts::FRAC_1_SQRT_2;
            h[(j, i)] = h[(i, j)];
        }
    }
    h
}

/// A linear map on symmetric 2-tensors, as an `m × m` matrix in the weighted basis.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolOperator {
    pub n: usize,
    pub matrix: DMatrix<f64>,
}

impl SymbolOperator {
    fn from_map(n: usize, map: impl Fn(&DMatrix<f64>) -> DMatrix<f64>) -> Self {
        let m = sym_dim(n);
        let mut matrix = DMatrix::zeros(m, m);
        for k in 0..m {
            matrix.set_column(k, &to_coords(&map(&basis_tensor(n, k))));
        }
        Self { n, matrix }
    }

    pub fn apply(&self, h: &DMatrix<f64>) -> DMatrix<f64> {
        from_coords(self.n, &(&self.matrix * to_coords(h)))
    }

    pub fn norm(&self) -> f64 {
        operator_norm(&self.matrix)
    }
}

pub fn operator_norm(a: &DMatrix<f64>) -> f64 {
    a.clone().svd(false, false).singular_values.max()
}

fn check_xi(g: &PointMetric, xi: &DVector<f64>) -> Result<()> {
    if xi.len() != g.n() {
        return Err(Error::DimensionMismatch { expected: g.n(), got: xi.len() });
    }
    if xi.iter().all(|x| *x == 0.0) {
        return Err(Error::DegenerateCovector);
    }
    Ok(())
}

/// `ξ ⊙ X = ½(ξ⊗X + X⊗ξ)`.
fn sym_product(a: &DVector<f64>, b: &DVector<f64>) -> DMatrix<f64> {
    0.5 * (a * b.transpose() + b * a.transpose())
}

fn ricci_map(g: &PointMetric, xi: &DVector<f64>, h: &DMatrix<f64>) -> DMatrix<f64> {
    let hx = h * (g.inverse() * xi);
    // ½(ξ⊗hg⁻¹ξ + hg⁻¹ξ⊗ξ − |ξ|² h − ξ⊗ξ tr h)
    sym_product(xi, &hx) - 0.5 * g.norm_sq(xi) * h - 0.5 * g.trace(h) * (xi * xi.transpose())
}

/// Gauge correction `h ↦ ξ ⊙ V(h)`, `V(h) = G(h) g⁻¹ ξ`, `G(h) = h − ½ (tr_g h) g`.
fn correction_map(g: &PointMetric, xi: &DVector<f64>, h: &DMatrix<f64>) -> DMatrix<f64> {
    let big_g = h - 0.5 * g.trace(h) * g.matrix();
    let v = big_g * (g.inverse() * xi);
    sym_product(xi, &v)
}

pub fn ricci_symbol(g: &PointMetric, xi: &DVector<f64>) -> Result<SymbolOperator> {
    check_xi(g, xi)?;
    Ok(SymbolOperator::from_map(g.n(), |h| ricci_map(g, xi, h)))
}

pub fn correction_symbol(g: &PointMetric, xi: &DVector<f64>) -> Result<SymbolOperator> {
    check_xi(g, xi)?;
    Ok(SymbolOperator::from_map(g.n(), |h| correction_map(g, xi, h)))
}

/// `m × n` matrix of `X ↦ ξ ⊙ X`.
pub fn divadj_symbol(g: &PointMetric, xi: &DVector<f64>) -> Result<DMatrix<f64>> {
    check_xi(g, xi)?;
    let n = g.n();
    let mut out = DMatrix::zeros(sym_dim(n), n);
    for k in 0..n {
        let e = DVector::from_fn(n, |i, _| if i == k { 1.0 } else { 0.0 });
        out.set_column(k, &to_coords(&sym_product(xi, &e)));
    }
    Ok(out)
}

/// Number of singular values below `tol · σ_max`.
pub fn kernel_dim(op: &DMatrix<f64>, tol: f64) -> usize {
    let s = op.clone().svd(false, false).singular_values;
    let max = s.max();
    if max == 0.0 {
        return op.ncols();
    }
    let below = s.iter().filter(|x| **x < tol * max).count();
    below + op.ncols().saturating_sub(s.len())
}

/// `‖σ(Ric') ∘ σ(δ*)‖`.
pub fn composition_residual(g: &PointMetric, xi: &DVector<f64>) -> Result<f64> {
    let ric = ricci_symbol(g, xi)?;
    let d = divadj_symbol(g, xi)?;
    Ok(operator_norm(&(&ric.matrix * d)))
}

pub fn deturck_symbol(g: &PointMetric, xi: &DVector<f64>) -> Result<SymbolOperator> {
    let ric = ricci_symbol(g, xi)?;
    let cor = correction_symbol(g, xi)?;
    Ok(SymbolOperator { n: g.n(), matrix: ric.matrix - cor.matrix })
}

/// `‖σ(Ric') − (−½|ξ|²_g Id) − σ(correction)‖`.
pub fn lichnerowicz_consistency(g: &PointMetric, xi: &DVector<f64>) -> Result<f64> {
    let ric = ricci_symbol(g, xi)?;
    let cor = correction_symbol(g, xi)?;
    let m = sym_dim(g.n());
    let lap = DMatrix::identity(m, m) * (-0.5 * g.norm_sq(xi));
    Ok(operator_norm(&(ric.matrix - lap - cor.matrix)))
}

/// Random SPD metric with condition number at most [`MAX_CONDITION`].
pub fn random_metric(n: usize, rng: &mut impl Rng) -> Result<PointMetric> {
    loop {
        let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let g = &a * a.transpose() + DMatrix::identity(n, n) * 0.05;
        let g = 0.5 * (&g + g.transpose());
        let pm = PointMetric::new(g)?;
        if pm.condition_number() <= MAX_CONDITION {
            return Ok(pm);
        }
    }
}

/// Random covector of unit Euclidean length.
pub fn random_unit_covector(n: usize, rng: &mut impl Rng) -> DVector<f64> {
    loop {
        let v = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let norm = v.norm();
        if norm > 1e-3 {
            return v / norm;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SymbolSurvey {
    pub n: usize,
    pub trials: usize,
    pub kernel_dim_mode: usize,
    /// Kernel dimensions that disagree with the mode.
    pub kernel_dim_outliers: usize,
    /// Composition residual over `‖g⁻¹‖ |ξ|³`.
    pub max_composition_residual: f64,
    /// `‖deturck + ½|ξ|²_g Id‖ / |ξ|²_g`.
    pub max_deturck_residual: f64,
    pub max_lichnerowicz_residual: f64,
}

/// Runs every symbol check on `trials` random `(g, ξ)` pairs.
pub fn symbol_survey(n: usize, trials: usize, seed: u64) -> Result<SymbolSurvey> {
    if !(2..=5).contains(&n) {
        return Err(Error::invalid(format!("n must lie in 2..=5, got {n}")));
    }
    if trials == 0 {
        return Err(Error::invalid("trials must be positive"));
    }
    let m = sym_dim(n);
    let mut counts = vec![0usize; m + 1];
    let (mut comp, mut det, mut lich) = (0.0f64, 0.0f64, 0.0f64);
    for i in 0..trials {
        let mut r = rng::stream(seed, i as u64);
        let g = random_metric(n, &mut r)?;
        let xi = random_unit_covector(n, &mut r);
        let ric = ricci_symbol(&g, &xi)?;
        counts[kernel_dim(&ric.matrix, DEFAULT_RANK_TOL)] += 1;
        let xn = g.norm_sq(&xi);
        let scale = operator_norm(g.inverse()) * xi.norm().powi(3);
        comp = comp.max(composition_residual(&g, &xi)? / scale);
        let d = deturck_symbol(&g, &xi)?;
        let target = DMatrix::identity(m, m) * (-0.5 * xn);
        det = det.max(operator_norm(&(d.matrix - target)) / xn);
        lich = lich.max(lichnerowicz_consistency(&g, &xi)? / xn);
    }
    let mode = (0..=m).max_by_key(|k| (counts[*k], std::cmp::Reverse(*k))).unwrap_or(0);
    Ok(SymbolSurvey {
        n,
        trials,
        kernel_dim_mode: mode,
        kernel_dim_outliers: trials - counts[mode],
        max_composition_residual: comp,
        max_deturck_residual: det,
        max_lichnerowicz_residual: lich,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(n: usize, k: usize) -> DVector<f64> {
        DVector::from_fn(n, |i, _| if i == k { 1.0 } else { 0.0 })
    }

    #[test]
    fn worked_examples() {
        let g = PointMetric::identity(3).unwrap();
        let xi = e(3, 0);
        let ric = ricci_symbol(&g, &xi).unwrap();
        let h = &xi * xi.transpose();
        assert!(ric.apply(&h).amax() < 1e-15);
        let e2 = e(3, 1);
        let out = ric.apply(&(&e2 * e2.transpose()));
        let want = DMatrix::from_diagonal(&DVector::from_vec(vec![-0.5, -0.5, 0.0]));
        assert!((out - want).amax() < 1e-15);
        let det = deturck_symbol(&g, &xi).unwrap().apply(&(&e2 * e2.transpose()));
        let want = DMatrix::from_diagonal(&DVector::from_vec(vec![0.0, -0.5, 0.0]));
        assert!((det - want).amax() < 1e-15);
    }

    #[test]
    fn divadj_examples() {
        let g = PointMetric::identity(3).unwrap();
        let d = divadj_symbol(&g, &e(3, 0)).unwrap();
        let x = from_coords(3, &(&d * e(3, 0)));
        assert!((x - &e(3, 0) * e(3, 0).transpose()).amax() < 1e-15);
        let x = from_coords(3, &(&d * e(3, 1)));
        let mut want = DMatrix::zeros(3, 3);
        want[(0, 1)] = 0.5;
        want[(1, 0)] = 0.5;
        assert!((x - want).amax() < 1e-15);
        assert_eq!(kernel_dim(&d, DEFAULT_RANK_TOL), 0);
    }

    #[test]
    fn coordinates_roundtrip_and_isometry() {
        let h = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 3.0, 2.0, 4.0, 5.0, 3.0, 5.0, 6.0]);
        assert!((from_coords(3, &to_coords(&h)) - &h).amax() < 1e-14);
        let frob: f64 = h.iter().map(|x| x * x).sum();
        assert!((to_coords(&h).norm_squared() - frob).abs() < 1e-12);
    }

    #[test]
    fn zero_covector_rejected() {
        let g = PointMetric::identity(2).unwrap();
        assert!(matches!(ricci_symbol(&g, &DVector::zeros(2)), Err(Error::DegenerateCovector)));
        assert!(PointMetric::new(DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0])).is_err());
        assert!(PointMetric::new(DMatrix::identity(6, 6)).is_err());
    }

    #[test]
    fn surveys() {
        for n in 2..=5 {
            let s = symbol_survey(n, 100, 11).unwrap();
            assert_eq!(s.kernel_dim_mode, n);
            assert_eq!(s.kernel_dim_outliers, 0);
            assert!(s.max_composition_residual < 1e-12);
            assert!(s.max_deturck_residual < 1e-12);
        }
    }
}
