//! Scalar comparison solutions for `∂R/∂t ≥ ΔR + R(R − r)` and the
//! eigenvalue algebra of three-dimensional Ricci pinching.

use rand::Rng;

use crate::error::{Error, Result};
use crate::flow::FlowTrajectory;
use crate::homogeneous::ricci_diagonal;
use crate::rng;
use crate::surface::SurfaceTrajectory;

/// Solution of `φ' = φ(φ − r)`, `φ(0) = c0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComparisonSolution {
    pub r: f64,
    pub c0: f64,
    pub blow_up_time: Option<f64>,
}

impl ComparisonSolution {
    /// `None` at or past the blow-up time.
    pub fn eval(&self, t: f64) -> Option<f64> {
        if self.blow_up_time.is_some_and(|tb| t >= tb) {
            return None;
        }
        let (r, c0) = (self.r, self.c0);
        Some(if r == 0.0 { c0 / (1.0 - c0 * t) } else { r * c0 / (c0 - (c0 - r) * (r * t).exp()) })
    }

    /// Closed-form `φ'(t)`, independent of the ODE right-hand side.
    pub fn derivative(&self, t: f64) -> Option<f64> {
        self.eval(t)?;
        let (r, c0) = (self.r, self.c0);
        Some(if r == 0.0 {
            c0 * c0 / (1.0 - c0 * t).powi(2)
        } else {
            let e = (r * t).exp();
            let d = c0 - (c0 - r) * e;
            r * r * c0 * (c0 - r) * e / (d * d)
        })
    }
}

pub fn logistic_comparison(r: f64, c0: f64) -> ComparisonSolution {
    let blow_up_time = if r == 0.0 {
        (c0 > 0.0).then(|| 1.0 / c0)
    } else if c0 != r && c0 != 0.0 {
        // c0 − (c0 − r) e^{rt} = 0
        let q = c0 / (c0 - r);
        (q > 0.0).then(|| q.ln() / r).filter(|t| *t > 0.0)
    } else {
        None
    };
    ComparisonSolution { r, c0, blow_up_time }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundDirection {
    Lower,
    Upper,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarBoundReport {
    pub direction: BoundDirection,
    pub samples: usize,
    pub violations: usize,
    /// Most negative `value − φ` (lower) or `φ − value` (upper).
    pub worst_slack: f64,
    /// Samples at or beyond the comparison's blow-up were skipped.
    pub truncated: bool,
    pub pass: bool,
}

/// Checks a per-sample extremum series `(t, value)` against a comparison solution.
pub fn verify_scalar_bound(
    series: &[(f64, f64)],
    comparison: &ComparisonSolution,
    direction: BoundDirection,
) -> ScalarBoundReport {
    let scale = series.iter().map(|(_, v)| v.abs()).fold(1.0, f64::max);
    let tol = 1e-8 * scale;
    let mut samples = 0;
    let mut violations = 0;
    let mut worst = f64::INFINITY;
    let mut truncated = false;
    for &(t, value) in series {
        let Some(phi) = comparison.eval(t) else {
            truncated = true;
            continue;
        };
        samples += 1;
        let slack = match direction {
            BoundDirection::Lower => value - phi,
            BoundDirection::Upper => phi - value,
        };
        if slack < -tol {
            violations += 1;
        }
        worst = worst.min(slack);
    }
    ScalarBoundReport { direction, samples, violations, worst_slack: worst, truncated, pass: violations == 0 }
}

/// `R_min(t) ≥ φ_min(t)` and `R_max(t) ≤ φ_max(t)` along a surface run, with both
/// comparison solutions started from the initial extrema and the run's `r`.
pub fn surface_extremum_check(traj: &SurfaceTrajectory) -> Result<[ScalarBoundReport; 2]> {
    let Some(first) = traj.diagnostics.first() else {
        return Err(Error::invalid("empty trajectory"));
    };
    let t0 = first.t;
    let lower: Vec<(f64, f64)> = traj.diagnostics.iter().map(|d| (d.t - t0, d.r_min)).collect();
    let upper: Vec<(f64, f64)> = traj.diagnostics.iter().map(|d| (d.t - t0, d.r_max)).collect();
    Ok([
        verify_scalar_bound(&lower, &logistic_comparison(first.r, first.r_min), BoundDirection::Lower),
        verify_scalar_bound(&upper, &logistic_comparison(first.r, first.r_max), BoundDirection::Upper),
    ])
}

/// Eigenvalues of `Ric`, ordered `lam ≥ mu ≥ nu`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenTriple {
    lam: f64,
    mu: f64,
    nu: f64,
}

impl EigenTriple {
    pub fn new(lam: f64, mu: f64, nu: f64) -> Result<Self> {
        if !(lam.is_finite() && mu.is_finite() && nu.is_finite()) {
            return Err(Error::invalid("eigenvalues must be finite"));
        }
        if lam < mu || mu < nu {
            return Err(Error::invalid(format!("eigenvalues not ordered: {lam}, {mu}, {nu}")));
        }
        Ok(Self { lam, mu, nu })
    }

    pub fn sorted(values: [f64; 3]) -> Result<Self> {
        let mut v = values;
        v.sort_by(|a, b| b.total_cmp(a));
        Self::new(v[0], v[1], v[2])
    }

    pub fn values(&self) -> [f64; 3] {
        [self.lam, self.mu, self.nu]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenInvariants {
    pub r: f64,
    pub s: f64,
    pub t: f64,
    pub c: f64,
    pub p: f64,
    pub q: [f64; 3],
}

pub fn eigen_invariants(e: &EigenTriple) -> EigenInvariants {
    invariants_of(e.values())
}

fn invariants_of(v: [f64; 3]) -> EigenInvariants {
    let r: f64 = v.iter().sum();
    let s: f64 = v.iter().map(|x| x * x).sum();
    let t: f64 = v.iter().map(|x| x * x * x).sum();
    let c = 0.5 * (r * r * r - 5.0 * r * s + 6.0 * t);
    let p = s * s + r * (c - t);
    let q = v.map(|l| 3.0 * r * l - 6.0 * l * l + (2.0 * s - r * r));
    EigenInvariants { r, s, t, c, p, q }
}

/// `λ²(λ−μ)(λ−ν) + μ²(μ−λ)(μ−ν) + ν²(ν−λ)(ν−μ)`.
pub fn p_factored(v: [f64; 3]) -> f64 {
    let [l, m, n] = v;
    l * l * (l - m) * (l - n) + m * m * (m - l) * (m - n) + n * n * (n - l) * (n - m)
}

/// Result of a sampled inequality or identity check.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    pub check: String,
    pub samples: usize,
    pub rejected: usize,
    pub violations: usize,
    pub worst_slack: f64,
}

impl CheckReport {
    pub fn pass(&self) -> bool {
        self.violations == 0
    }

    fn new(check: &str) -> Self {
        Self { check: check.into(), samples: 0, rejected: 0, violations: 0, worst_slack: f64::INFINITY }
    }

    /// Records a slack normalized by `scale`; violation when below `−tol`.
    fn record(&mut self, slack: f64, tol: f64) {
        self.samples += 1;
        if slack < -tol {
            self.violations += 1;
        }
        self.worst_slack = self.worst_slack.min(slack);
    }
}

fn scale_of(v: [f64; 3]) -> f64 {
    v.iter().map(|x| x.abs()).fold(1.0, f64::max)
}

/// Compares `S² + R(C − T)` with the factored quartic. Slack is the negated discrepancy.
pub fn p_identity_check(samples: &[[f64; 3]]) -> CheckReport {
    let mut rep = CheckReport::new("p_identity");
    for &v in samples {
        let d = (invariants_of(v).p - p_factored(v)).abs();
        rep.record(-d, 1e-9 * scale_of(v).powi(4));
    }
    rep
}

/// `P ≥ ε² S (S − R²/3)` for `R > 0`, `ν ≥ εR`.
pub fn p_lower_bound_check(samples: &[[f64; 3]], eps: f64) -> Result<CheckReport> {
    if !(eps > 0.0 && eps <= 1.0 / 3.0) {
        return Err(Error::invalid(format!("eps must lie in (0, 1/3], got {eps}")));
    }
    let mut rep = CheckReport::new("p_lower_bound");
    for &v in samples {
        let inv = invariants_of(v);
        let nu = v.iter().copied().fold(f64::INFINITY, f64::min);
        if !(inv.r > 0.0 && nu >= eps * inv.r) {
            rep.rejected += 1;
            continue;
        }
        let slack = inv.p - eps * eps * inv.s * (inv.s - inv.r * inv.r / 3.0);
        rep.record(slack, 1e-12 * scale_of(v).powi(4));
    }
    Ok(rep)
}

/// `R[λ(μ+ν) + (μ−ν)²] − 2λS ≥ 0` where `λ = εR` is the null eigenvalue
/// (the first entry of each sample).
pub fn null_vector_expression(v: [f64; 3]) -> f64 {
    let [l, m, n] = v;
    let inv = invariants_of(v);
    inv.r * (l * (m + n) + (m - n).powi(2)) - 2.0 * l * inv.s
}

pub fn null_vector_condition_check(samples: &[[f64; 3]], eps: f64) -> Result<CheckReport> {
    if !(eps > 0.0 && eps <= 1.0 / 3.0) {
        return Err(Error::invalid(format!("eps must lie in (0, 1/3], got {eps}")));
    }
    let mut rep = CheckReport::new("null_vector_condition");
    for &v in samples {
        let [l, m, n] = v;
        let r = l + m + n;
        let ok =
            r > 0.0 && v.iter().all(|x| *x > 0.0) && (l - eps * r).abs() <= 1e-12 * scale_of(v) && m + n >= 2.0 * l;
        if !ok {
            rep.rejected += 1;
            continue;
        }
        rep.record(null_vector_expression(v), 1e-12 * scale_of(v).powi(3));
    }
    Ok(rep)
}

/// Uniform triples from `[lo, hi]³`, one seeded stream per index.
pub fn uniform_triples(count: usize, lo: f64, hi: f64, seed: u64) -> Vec<[f64; 3]> {
    (0..count)
        .map(|i| {
            let mut g = rng::stream(seed, i as u64);
            [g.random_range(lo..=hi), g.random_range(lo..=hi), g.random_range(lo..=hi)]
        })
        .collect()
}

/// Triples with `R > 0` and `min ≥ εR`, by rejection from `(0, 10]³`.
pub fn pinched_triples(count: usize, eps: f64, seed: u64) -> Vec<[f64; 3]> {
    (0..count)
        .map(|i| {
            let mut g = rng::stream(seed, i as u64);
            loop {
                let v: [f64; 3] = [g.random_range(0.0..10.0), g.random_range(0.0..10.0), g.random_range(0.0..10.0)];
                let r: f64 = v.iter().sum();
                if r > 0.0 && v.iter().all(|x| *x >= eps * r) {
                    return v;
                }
            }
        })
        .collect()
}

/// Triples `(λ, μ, ν)` with `λ = ε(λ+μ+ν)` and `μ, ν ∈ (0, 10]`.
pub fn null_vector_triples(count: usize, eps: f64, seed: u64) -> Vec<[f64; 3]> {
    (0..count)
        .map(|i| {
            let mut g = rng::stream(seed, i as u64);
            let m: f64 = 10.0 - g.random_range(0.0..10.0);
            let n: f64 = 10.0 - g.random_range(0.0..10.0);
            [eps * (m + n) / (1.0 - eps), m, n]
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PinchingReport {
    pub delta: f64,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub pass: bool,
}

/// `C(t) = (S − R²/3) / R^{2−δ}` along a homogeneous trajectory, using the
/// mixed eigenvalues `Ric_ii / g_ii`.
pub fn pinching_monitor(traj: &FlowTrajectory, delta: Option<f64>) -> Result<PinchingReport> {
    let mut eigs = Vec::with_capacity(traj.len());
    for (t, g) in traj.times.iter().zip(&traj.states) {
        let e = ricci_diagonal(traj.signature, g).ricci_eigenvalues(g);
        let r: f64 = e.iter().sum();
        if r <= 0.0 {
            return Err(Error::Inapplicable(format!("R = {r} ≤ 0 at t = {t}")));
        }
        eigs.push(e);
    }
    let Some(first) = eigs.first() else {
        return Err(Error::invalid("empty trajectory"));
    };
    let delta = delta.unwrap_or_else(|| {
        let r0: f64 = first.iter().sum();
        let eps0 = first.iter().copied().fold(f64::INFINITY, f64::min) / r0;
        (2.0 * eps0 * eps0).min(1.0)
    });
    let values: Vec<f64> = eigs
        .iter()
        .map(|&[a, b, c]| {
            let r = a + b + c;
            // S − R²/3 written as a sum of squared gaps, exact for equal eigenvalues
            let spread = ((a - b).powi(2) + (b - c).powi(2) + (c - a).powi(2)) / 3.0;
            spread / r.powf(2.0 - delta)
        })
        .collect();
    let c0 = values[0];
    let pass = values.iter().all(|c| *c <= c0 * (1.0 + 1e-6));
    Ok(PinchingReport { delta, times: traj.times.clone(), values, pass })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn comparison_examples() {
        let c = logistic_comparison(0.0, -1.0);
        assert!(c.blow_up_time.is_none());
        assert_relative_eq!(c.eval(3.0).unwrap(), -0.25);
        let c = logistic_comparison(1.5, 1.5);
        assert!(c.blow_up_time.is_none());
        assert_relative_eq!(c.eval(10.0).unwrap(), 1.5);
        let c = logistic_comparison(1.0, 2.0);
        assert_relative_eq!(c.blow_up_time.unwrap(), 2f64.ln(), max_relative = 1e-15);
        assert!(c.eval(1.0).is_none());
        assert_eq!(c.eval(0.0), Some(2.0));
    }

    #[test]
    fn comparison_satisfies_ode() {
        for (r, c0) in [(0.0, -1.0), (0.0, 0.5), (1.0, 0.3), (1.0, -2.0), (-0.5, 0.2), (2.0, 3.0)] {
            let c = logistic_comparison(r, c0);
            let end = c.blow_up_time.map_or(5.0, |t| 0.9 * t);
            for k in 0..=1000 {
                let t = end * k as f64 / 1000.0;
                let phi = c.eval(t).unwrap();
                let d = c.derivative(t).unwrap();
                assert!((d - phi * (phi - r)).abs() <= 1e-10 * (1.0 + phi * phi), "r={r} c0={c0} t={t}");
            }
        }
    }

    #[test]
    fn invariant_examples() {
        let i = eigen_invariants(&EigenTriple::new(1.0, 1.0, 1.0).unwrap());
        assert_eq!((i.r, i.s, i.t, i.c, i.p), (3.0, 3.0, 3.0, 0.0, 0.0));
        let i = eigen_invariants(&EigenTriple::new(2.0, 1.0, 1.0).unwrap());
        assert_eq!((i.r, i.s, i.t, i.c, i.p), (4.0, 6.0, 10.0, 2.0, 4.0));
        assert_eq!(p_factored([2.0, 1.0, 1.0]), 4.0);
        let z = eigen_invariants(&EigenTriple::new(0.0, 0.0, 0.0).unwrap());
        assert_eq!(z.p, 0.0);
        assert!(EigenTriple::new(1.0, 2.0, 0.0).is_err());
    }

    #[test]
    fn inequality_examples() {
        let rep = p_lower_bound_check(&[[2.0, 1.0, 1.0]], 0.25).unwrap();
        assert_eq!(rep.samples, 1);
        assert_relative_eq!(rep.worst_slack, 4.0 - 0.25, max_relative = 1e-14);
        assert_eq!(null_vector_expression([1.0, 2.0, 3.0]), 8.0);
        assert_eq!(null_vector_expression([1.0, 1.0, 1.0]), 0.0);
        let rep = null_vector_condition_check(&[[1.0, 2.0, 3.0], [1.0, 1.0, 1.0]], 1.0 / 6.0).unwrap();
        assert_eq!((rep.samples, rep.rejected), (1, 1));
    }

    #[test]
    fn generated_samples_meet_preconditions() {
        let p = pinched_triples(2000, 0.1, 5);
        let rep = p_lower_bound_check(&p, 0.1).unwrap();
        assert_eq!((rep.rejected, rep.violations), (0, 0));
        let nv = null_vector_triples(2000, 0.2, 5);
        let rep = null_vector_condition_check(&nv, 0.2).unwrap();
        assert_eq!((rep.rejected, rep.violations), (0, 0));
    }
}
