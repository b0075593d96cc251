//! Left-invariant diagonal metrics on three-dimensional unimodular Lie groups.
//!
//! Everything is expressed in a Milnor frame `{F1, F2, F3}` whose bracket
//! endomorphism is `diag(2λ, 2μ, 2ν)`:
//!
//! ```text
//! [F2, F3] = 2λ F1,   [F3, F1] = 2μ F2,   [F1, F2] = 2ν F3
//! ```
//!
//! The metric is `g = A ω¹⊗ω¹ + B ω²⊗ω² + C ω³⊗ω³`. Curvature is derived
//! generically: structure constants give the Levi-Civita connection through the
//! Koszul-type formula `∇_X Y = ½([X,Y] − (ad X)*Y − (ad Y)*X)`, the connection
//! gives `R(X,Y)Z`, and Ricci and sectional curvatures are traces of that.
//! The per-geometry closed forms only appear in [`ricci_closed_form`], which the
//! tests compare against the generic chain.

use std::fmt;

use crate::error::{Error, Result};

/// Signature `(λ, μ, ν)` of a Milnor frame, each in `{-1, 0, 1}` and ordered `λ ≤ μ ≤ ν`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MilnorSignature {
    lambda: i8,
    mu: i8,
    nu: i8,
}

impl MilnorSignature {
    pub fn new(lambda: i8, mu: i8, nu: i8) -> Result<Self> {
        for s in [lambda, mu, nu] {
            if !(-1..=1).contains(&s) {
                return Err(Error::invalid(format!("signature entry {s} not in {{-1, 0, 1}}")));
            }
        }
        if !(lambda <= mu && mu <= nu) {
            return Err(Error::invalid(format!("signature ({lambda}, {mu}, {nu}) violates λ ≤ μ ≤ ν")));
        }
        Ok(Self { lambda, mu, nu })
    }

    /// Builds a signature without the ordering requirement. Used for the
    /// frame-flip checks, where `(1, 1, 1)` must be accepted as well.
    pub fn unordered(lambda: i8, mu: i8, nu: i8) -> Result<Self> {
        for s in [lambda, mu, nu] {
            if !(-1..=1).contains(&s) {
                return Err(Error::invalid(format!("signature entry {s} not in {{-1, 0, 1}}")));
            }
        }
        Ok(Self { lambda, mu, nu })
    }

    pub const fn su2() -> Self {
        Self { lambda: -1, mu: -1, nu: -1 }
    }

    pub const fn nil() -> Self {
        Self { lambda: -1, mu: 0, nu: 0 }
    }

    pub const fn sol() -> Self {
        Self { lambda: -1, mu: 0, nu: 1 }
    }

    pub const fn abelian() -> Self {
        Self { lambda: 0, mu: 0, nu: 0 }
    }

    pub fn values(&self) -> [i8; 3] {
        [self.lambda, self.mu, self.nu]
    }

    /// Every ordered signature (ten of them).
    pub fn all() -> Vec<Self> {
        let mut out = Vec::new();
        for l in -1..=1 {
            for m in l..=1 {
                for n in m..=1 {
                    out.push(Self { lambda: l, mu: m, nu: n });
                }
            }
        }
        out
    }

    /// Overall sign flip of the frame: `(λ, μ, ν) → (−ν, −μ, −λ)` after reordering
    /// would change the frame labels, so the flip keeps labels and negates entries.
    pub fn negated(&self) -> Self {
        Self { lambda: -self.lambda, mu: -self.mu, nu: -self.nu }
    }
}

impl fmt::Display for MilnorSignature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.lambda, self.mu, self.nu)
    }
}

/// Diagonal left-invariant metric `(A, B, C)` in the Milnor coframe.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagonalMetric {
    coeffs: [f64; 3],
}

impl DiagonalMetric {
    pub fn new(a: f64, b: f64, c: f64) -> Result<Self> {
        let coeffs = [a, b, c];
        if coeffs.iter().any(|x| !x.is_finite() || *x <= 0.0) {
            return Err(Error::invalid(format!(
                "metric coefficients must be positive and finite, got ({a}, {b}, {c})"
            )));
        }
        Ok(Self { coeffs })
    }

    pub(crate) fn from_array_unchecked(coeffs: [f64; 3]) -> Self {
        Self { coeffs }
    }

    pub fn a(&self) -> f64 {
        self.coeffs[0]
    }
    pub fn b(&self) -> f64 {
        self.coeffs[1]
    }
    pub fn c(&self) -> f64 {
        self.coeffs[2]
    }

    pub fn coeffs(&self) -> [f64; 3] {
        self.coeffs
    }

    pub fn volume_density(&self) -> f64 {
        (self.coeffs[0] * self.coeffs[1] * self.coeffs[2]).sqrt()
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { coeffs: self.coeffs.map(|x| x * s) }
    }

    pub fn min_coeff(&self) -> f64 {
        self.coeffs.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Structure constants `c[k][i][j]` with `[F_i, F_j] = Σ_k c[k][i][j] F_k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StructureConstants {
    pub c: [[[f64; 3]; 3]; 3],
}

impl StructureConstants {
    /// Coefficients of `[F_i, F_j]`.
    pub fn bracket(&self, i: usize, j: usize) -> [f64; 3] {
        [self.c[0][i][j], self.c[1][i][j], self.c[2][i][j]]
    }

    /// Jacobi identity residual, maximum absolute coefficient over all triples.
    pub fn jacobi_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    // [[Fi,Fj],Fk] + [[Fj,Fk],Fi] + [[Fk,Fi],Fj]
                    let mut out = [0.0; 3];
                    for (a, b, c) in [(i, j, k), (j, k, i), (k, i, j)] {
                        for m in 0..3 {
                            let coef = self.c[m][a][b];
                            for (l, o) in out.iter_mut().enumerate() {
                                *o += coef * self.c[l][m][c];
                            }
                        }
                    }
                    worst = out.iter().fold(worst, |w, x| w.max(x.abs()));
                }
            }
        }
        worst
    }

    /// `tr(ad F_i)` for each basis vector; zero on unimodular algebras.
    pub fn ad_traces(&self) -> [f64; 3] {
        let mut t = [0.0; 3];
        for (i, ti) in t.iter_mut().enumerate() {
            *ti = (0..3).map(|k| self.c[k][i][k]).sum();
        }
        t
    }
}

/// Structure constants of the Milnor frame with the given signature.
pub fn milnor_structure(sig: MilnorSignature) -> StructureConstants {
    let [l, m, n] = sig.values().map(|v| 2.0 * f64::from(v));
    let mut c = [[[0.0; 3]; 3]; 3];
    c[0][1][2] = l;
    c[0][2][1] = -l;
    c[1][2][0] = m;
    c[1][0][2] = -m;
    c[2][0][1] = n;
    c[2][1][0] = -n;
    StructureConstants { c }
}

/// Frame-vector table: entry `[i][j]` holds the coefficients of some vector
/// field in the frame `{F_k}`.
pub type FrameTable = [[[f64; 3]; 3]; 3];

/// `(ad F_i)* F_j`, the metric adjoint of `ad F_i` applied to `F_j`, stored at `[i][j]`.
///
/// The displayed matrix in the usual presentation is indexed the other way
/// round (row `j`, column `i`); [`ad_star_display`] gives that orientation.
pub fn ad_star_table(sig: MilnorSignature, g: &DiagonalMetric) -> FrameTable {
    let sc = milnor_structure(sig);
    let w = g.coeffs();
    let mut t = [[[0.0; 3]; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            // <(ad Fi)* Fj, Fk> = <Fj, [Fi, Fk]> = c[j][i][k] * g_j
            for k in 0..3 {
                t[i][j][k] = sc.c[j][i][k] * w[j] / w[k];
            }
        }
    }
    t
}

/// The ad* table in display orientation: row `j`, column `i` holds `(ad F_i)* F_j`.
pub fn ad_star_display(sig: MilnorSignature, g: &DiagonalMetric) -> FrameTable {
    let t = ad_star_table(sig, g);
    let mut d = [[[0.0; 3]; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            d[j][i] = t[i][j];
        }
    }
    d
}

/// Levi-Civita connection: entry `[i][j]` holds the coefficients of `∇_{F_i} F_j`.
pub fn connection_coefficients(sig: MilnorSignature, g: &DiagonalMetric) -> FrameTable {
    let sc = milnor_structure(sig);
    let ad = ad_star_table(sig, g);
    let mut gamma = [[[0.0; 3]; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            for k in 0..3 {
                gamma[i][j][k] = 0.5 * (sc.c[k][i][j] - ad[i][j][k] - ad[j][i][k]);
            }
        }
    }
    gamma
}

/// Full curvature tensor: `riem[a][b][c][d]` is the `F_d` coefficient of `R(F_a, F_b) F_c`.
pub fn riemann_tensor(sig: MilnorSignature, g: &DiagonalMetric) -> [FrameTable; 3] {
    let sc = milnor_structure(sig);
    let gamma = connection_coefficients(sig, g);
    let mut riem = [[[[0.0; 3]; 3]; 3]; 3];
    for a in 0..3 {
        for b in 0..3 {
            for c in 0..3 {
                for d in 0..3 {
                    let mut v = 0.0;
                    for m in 0..3 {
                        // ∇_a ∇_b F_c − ∇_b ∇_a F_c
                        v += gamma[b][c][m] * gamma[a][m][d] - gamma[a][c][m] * gamma[b][m][d];
                        // − ∇_{[F_a, F_b]} F_c
                        v -= sc.c[m][a][b] * gamma[m][c][d];
                    }
                    riem[a][b][c][d] = v;
                }
            }
        }
    }
    riem
}

/// Ricci and sectional curvature data in the Milnor frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvatureData {
    /// `Ric(F_i, F_i)`.
    pub ricci: [f64; 3],
    /// Sectional curvatures of the planes `(F1,F2)`, `(F1,F3)`, `(F2,F3)`.
    pub sectional: [f64; 3],
    pub scalar: f64,
}

impl CurvatureData {
    /// Eigenvalues of the Ricci endomorphism, `Ric(F_i,F_i) / g_ii`.
    pub fn ricci_eigenvalues(&self, g: &DiagonalMetric) -> [f64; 3] {
        let w = g.coeffs();
        [self.ricci[0] / w[0], self.ricci[1] / w[1], self.ricci[2] / w[2]]
    }

    pub fn max_abs_sectional(&self) -> f64 {
        self.sectional.iter().fold(0.0_f64, |m, k| m.max(k.abs()))
    }
}

/// Full Ricci matrix `Ric(F_i, F_j)` traced from the generic curvature tensor.
pub fn ricci_matrix(sig: MilnorSignature, g: &DiagonalMetric) -> [[f64; 3]; 3] {
    let riem = riemann_tensor(sig, g);
    let mut ric = [[0.0; 3]; 3];
    for (i, row) in ric.iter_mut().enumerate() {
        for (j, r) in row.iter_mut().enumerate() {
            *r = (0..3).map(|a| riem[a][i][j][a]).sum();
        }
    }
    ric
}

/// Largest `|<R(F_k,F_i)F_j, F_k>|` over `i ≠ j`, relative to the largest curvature entry.
pub fn milnor_offdiagonal_residual(sig: MilnorSignature, g: &DiagonalMetric) -> f64 {
    let riem = riemann_tensor(sig, g);
    let w = g.coeffs();
    let mut worst: f64 = 0.0;
    for k in 0..3 {
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    worst = worst.max((riem[k][i][j][k] * w[k]).abs());
                }
            }
        }
    }
    worst
}

/// Ricci curvature of `(sig, g)`, computed through connection and curvature tensor.
pub fn ricci_diagonal(sig: MilnorSignature, g: &DiagonalMetric) -> CurvatureData {
    let riem = riemann_tensor(sig, g);
    let w = g.coeffs();
    let mut ricci = [0.0; 3];
    for (i, r) in ricci.iter_mut().enumerate() {
        *r = (0..3).map(|a| riem[a][i][i][a]).sum();
    }
    debug_assert!({
        let scale = ricci.iter().fold(1.0_f64, |m, r| m.max(r.abs()));
        (0..3).all(|i| (0..3).all(|j| i == j || (0..3).map(|a| riem[a][i][j][a]).sum::<f64>().abs() <= 1e-10 * scale))
    });
    let sectional = sectional_from_riemann(&riem, &w);
    let scalar = ricci[0] / w[0] + ricci[1] / w[1] + ricci[2] / w[2];
    CurvatureData { ricci, sectional, scalar }
}

fn sectional_from_riemann(riem: &[FrameTable; 3], w: &[f64; 3]) -> [f64; 3] {
    let k = |i: usize, j: usize| riem[i][j][j][i] * w[i] / (w[i] * w[j]);
    [k(0, 1), k(0, 2), k(1, 2)]
}

/// Sectional curvatures `K(F_i,F_j) = <R(F_i,F_j)F_j,F_i> / (g_ii g_jj)` for the
/// planes `(1,2)`, `(1,3)`, `(2,3)`.
///
/// These satisfy `Ric(F_i,F_i) = g_ii Σ_{j≠i} K(F_i,F_j)`.
pub fn sectional_curvatures(sig: MilnorSignature, g: &DiagonalMetric) -> [f64; 3] {
    let riem = riemann_tensor(sig, g);
    sectional_from_riemann(&riem, &g.coeffs())
}

/// Closed form `Ric11 = (2/(BC))[(λA)² − (μB − νC)²]` and cyclic permutations.
pub fn ricci_closed_form(sig: MilnorSignature, g: &DiagonalMetric) -> [f64; 3] {
    let [l, m, n] = sig.values().map(f64::from);
    let [a, b, c] = g.coeffs();
    [
        2.0 / (b * c) * ((l * a).powi(2) - (m * b - n * c).powi(2)),
        2.0 / (c * a) * ((m * b).powi(2) - (n * c - l * a).powi(2)),
        2.0 / (a * b) * ((n * c).powi(2) - (l * a - m * b).powi(2)),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn unit() -> DiagonalMetric {
        DiagonalMetric::new(1.0, 1.0, 1.0).unwrap()
    }

    #[test]
    fn signature_validation() {
        assert!(MilnorSignature::new(-1, 0, 1).is_ok());
        assert!(MilnorSignature::new(1, 0, -1).is_err());
        assert!(MilnorSignature::new(-2, 0, 0).is_err());
        assert_eq!(MilnorSignature::su2().values(), [-1, -1, -1]);
        assert_eq!(MilnorSignature::nil().values(), [-1, 0, 0]);
        assert_eq!(MilnorSignature::sol().values(), [-1, 0, 1]);
        assert_eq!(MilnorSignature::abelian().values(), [0, 0, 0]);
        assert_eq!(MilnorSignature::all().len(), 10);
    }

    #[test]
    fn metric_validation() {
        assert!(DiagonalMetric::new(1.0, 0.0, 1.0).is_err());
        assert!(DiagonalMetric::new(1.0, f64::NAN, 1.0).is_err());
        assert_relative_eq!(DiagonalMetric::new(1.0, 4.0, 9.0).unwrap().volume_density(), 6.0);
    }

    #[test]
    fn structure_constants_of_named_groups() {
        let su2 = milnor_structure(MilnorSignature::su2());
        assert_eq!(su2.c[0][1][2], -2.0);
        assert_eq!(su2.c[1][2][0], -2.0);
        assert_eq!(su2.c[2][0][1], -2.0);

        let ab = milnor_structure(MilnorSignature::abelian());
        assert!(ab.c.iter().flatten().flatten().all(|&x| x == 0.0));

        let nil = milnor_structure(MilnorSignature::nil());
        let nonzero: Vec<_> = (0..3)
            .flat_map(|k| (0..3).flat_map(move |i| (0..3).map(move |j| (k, i, j))))
            .filter(|&(k, i, j)| nil.c[k][i][j] != 0.0)
            .collect();
        assert_eq!(nonzero, vec![(0, 1, 2), (0, 2, 1)]);
        assert_eq!(nil.c[0][1][2], -2.0);

        for sig in MilnorSignature::all() {
            let sc = milnor_structure(sig);
            assert_eq!(sc.jacobi_residual(), 0.0);
            assert_eq!(sc.ad_traces(), [0.0; 3]);
            for k in 0..3 {
                for i in 0..3 {
                    for j in 0..3 {
                        assert_eq!(sc.c[k][i][j], -sc.c[k][j][i]);
                    }
                }
            }
        }
    }

    #[test]
    fn ad_star_entries() {
        // display (1,2) = (ad F2)* F1 = 2λ(A/C) F3
        let d = ad_star_display(MilnorSignature::su2(), &unit());
        assert_eq!(d[0][1], [0.0, 0.0, -2.0]);
        let g = DiagonalMetric::new(2.0, 1.0, 1.0).unwrap();
        let d = ad_star_display(MilnorSignature::sol(), &g);
        assert_eq!(d[0][1], [0.0, 0.0, -4.0]);
        let d = ad_star_display(MilnorSignature::abelian(), &g);
        assert!(d.iter().flatten().flatten().all(|&x| x == 0.0));
    }

    #[test]
    fn ad_star_matches_display_matrix() {
        // Remaining entries of the displayed matrix, with the (3,2) entry along F1.
        let g = DiagonalMetric::new(1.3, 0.7, 2.1).unwrap();
        let sig = MilnorSignature::sol();
        let [l, m, n] = sig.values().map(f64::from);
        let (a, b, c) = (g.a(), g.b(), g.c());
        let d = ad_star_display(sig, &g);
        assert_relative_eq!(d[0][2][1], -2.0 * l * a / b);
        assert_relative_eq!(d[1][0][2], -2.0 * m * b / c);
        assert_relative_eq!(d[1][2][0], 2.0 * m * b / a);
        assert_relative_eq!(d[2][0][1], 2.0 * n * c / b);
        assert_relative_eq!(d[2][1][0], -2.0 * n * c / a);
    }

    #[test]
    fn connection_examples() {
        let gamma = connection_coefficients(MilnorSignature::abelian(), &unit());
        assert!(gamma.iter().flatten().flatten().all(|&x| x == 0.0));

        let gamma = connection_coefficients(MilnorSignature::su2(), &unit());
        assert_eq!(gamma[0][1], [0.0, 0.0, -1.0]);
        assert_eq!(gamma[1][2], [-1.0, 0.0, 0.0]);
        assert_eq!(gamma[2][0], [0.0, -1.0, 0.0]);

        let gamma = connection_coefficients(MilnorSignature::nil(), &unit());
        assert_eq!(gamma[1][2], [-1.0, 0.0, 0.0]);
        // <∇_{F2}F3, F1> + <F3, ∇_{F2}F1> = 0
        assert_eq!(gamma[1][2][0] + gamma[1][0][2], 0.0);
    }

    fn torsion_and_compatibility(sig: MilnorSignature, g: &DiagonalMetric) -> f64 {
        let gamma = connection_coefficients(sig, g);
        let sc = milnor_structure(sig);
        let w = g.coeffs();
        let mut worst: f64 = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    // ∇_i F_j − ∇_j F_i − [F_i, F_j]
                    worst = worst.max((gamma[i][j][k] - gamma[j][i][k] - sc.c[k][i][j]).abs());
                    // X<Y,Z> = 0 for frame fields
                    let comp = gamma[i][j][k] * w[k] + gamma[i][k][j] * w[j];
                    worst = worst.max(comp.abs());
                }
            }
        }
        worst
    }

    #[test]
    fn connection_is_torsion_free_and_metric() {
        let g = DiagonalMetric::new(0.3, 1.7, 2.9).unwrap();
        for sig in MilnorSignature::all() {
            assert!(torsion_and_compatibility(sig, &g) < 1e-13, "{sig}");
        }
    }

    #[test]
    fn ricci_examples() {
        let nil = ricci_diagonal(MilnorSignature::nil(), &unit());
        assert_eq!(nil.ricci, [2.0, -2.0, -2.0]);
        let su2 = ricci_diagonal(MilnorSignature::su2(), &unit());
        assert_eq!(su2.ricci, [2.0, 2.0, 2.0]);
        assert_eq!(su2.scalar, 6.0);
        let sol = ricci_diagonal(MilnorSignature::sol(), &unit());
        assert_eq!(sol.ricci, [0.0, -8.0, 0.0]);
        // Ric22 = −2(A+C)²/(AC) on Sol
        let g = DiagonalMetric::new(3.0, 1.5, 0.5).unwrap();
        let sol = ricci_diagonal(MilnorSignature::sol(), &g);
        assert_relative_eq!(sol.ricci[1], -2.0 * 3.5f64.powi(2) / 1.5, max_relative = 1e-14);
    }

    #[test]
    fn su2_berger_formula() {
        let (ea, b, c) = (0.2, 1.4, 0.9);
        let g = DiagonalMetric::new(ea, b, c).unwrap();
        let r = ricci_diagonal(MilnorSignature::su2(), &g).ricci;
        assert_relative_eq!(r[0], 2.0 / (b * c) * (ea * ea - (b - c) * (b - c)), max_relative = 1e-13);
        assert_relative_eq!(r[1], 2.0 / (ea * c) * (b * b - (ea - c) * (ea - c)), max_relative = 1e-13);
        assert_relative_eq!(r[2], 2.0 / (ea * b) * (c * c - (ea - b) * (ea - b)), max_relative = 1e-13);
    }

    #[test]
    fn sectional_examples() {
        assert_eq!(sectional_curvatures(MilnorSignature::su2(), &unit()), [1.0; 3]);
        assert_eq!(sectional_curvatures(MilnorSignature::abelian(), &unit()), [0.0; 3]);
        let k = sectional_curvatures(MilnorSignature::nil(), &unit());
        // K12 + K13 = Ric11, K12 + K23 = Ric22, K13 + K23 = Ric33
        assert_relative_eq!(k[0] + k[1], 2.0);
        assert_relative_eq!(k[0] + k[2], -2.0);
        assert_relative_eq!(k[1] + k[2], -2.0);
        assert!(k.iter().any(|&x| x > 0.0) && k.iter().any(|&x| x < 0.0));
    }

    #[test]
    fn abelian_is_flat() {
        let g = DiagonalMetric::new(2.0, 3.0, 4.0).unwrap();
        let d = ricci_diagonal(MilnorSignature::abelian(), &g);
        assert_eq!(d.ricci, [0.0; 3]);
        assert_eq!(d.sectional, [0.0; 3]);
        assert_eq!(d.scalar, 0.0);
    }

    #[test]
    fn frame_sign_flip_leaves_curvature_invariant() {
        let g = DiagonalMetric::new(0.4, 1.1, 2.3).unwrap();
        for sig in MilnorSignature::all() {
            let a = ricci_diagonal(sig, &g);
            let b = ricci_diagonal(sig.negated(), &g);
            for i in 0..3 {
                assert_relative_eq!(a.ricci[i], b.ricci[i], epsilon = 1e-13);
                assert_relative_eq!(a.sectional[i], b.sectional[i], epsilon = 1e-13);
            }
        }
    }
}
