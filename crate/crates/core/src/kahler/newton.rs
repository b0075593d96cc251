//! Newton solver for the stationary potential equations, used as an oracle for
//! the flow. Linearizations `g̃^{jk̄}∂_j∂_k̄ δu [− δu]` are solved by restarted
//! GMRES, right-preconditioned with the constant-coefficient operator built from
//! the grid-averaged `g̃⁻¹`.

use std::sync::Arc;

use num_complex::Complex64;

use super::{
    check_positive, herm_inverse, hessian_from_spectrum, log_ratio_of, normalize_data, ricci_flat_limit_constant,
    trace_product, ComplexTorusGrid, FlatMetric, HermitianField, KahlerMode,
};
use crate::error::{Error, Result};

pub const NEWTON_TOL: f64 = 1e-11;
const MAX_NEWTON: usize = 60;
const MIN_DAMPING: f64 = 1.0 / 1024.0;

#[derive(Debug, Clone, PartialEq)]
pub struct GmresOutcome {
    pub x: Vec<f64>,
    /// Final residual relative to `‖b‖`.
    pub residual: f64,
    pub iterations: usize,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Restarted GMRES for `A x = b` with right preconditioner `M⁻¹`.
pub fn gmres(
    apply: impl Fn(&[f64]) -> Vec<f64>,
    precond: impl Fn(&[f64]) -> Vec<f64>,
    b: &[f64],
    rel_tol: f64,
    restart: usize,
    max_iter: usize,
) -> GmresOutcome {
    let n = b.len();
    let bnorm = norm(b);
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return GmresOutcome { x, residual: 0.0, iterations: 0 };
    }
    let mut total = 0;
    let mut rel = 1.0;
    while total < max_iter {
        let ax = apply(&x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(a, c)| a - c).collect();
        let beta = norm(&r);
        rel = beta / bnorm;
        if rel <= rel_tol {
            break;
        }
        let mut v: Vec<Vec<f64>> = vec![r.iter().map(|x| x / beta).collect()];
        let mut z: Vec<Vec<f64>> = Vec::new();
        let mut h = vec![vec![0.0; restart]; restart + 1];
        let (mut cs, mut sn) = (vec![0.0; restart], vec![0.0; restart]);
        let mut g = vec![0.0; restart + 1];
        g[0] = beta;
        let mut k_used = 0;
        for k in 0..restart {
            let zk = precond(&v[k]);
            let mut w = apply(&zk);
            z.push(zk);
            for (i, vi) in v.iter().enumerate() {
                h[i][k] = dot(&w, vi);
                w.iter_mut().zip(vi).for_each(|(a, c)| *a -= h[i][k] * c);
            }
            h[k + 1][k] = norm(&w);
            for i in 0..k {
                let t = cs[i] * h[i][k] + sn[i] * h[i + 1][k];
                h[i + 1][k] = -sn[i] * h[i][k] + cs[i] * h[i + 1][k];
                h[i][k] = t;
            }
            let denom = h[k][k].hypot(h[k + 1][k]);
            if denom == 0.0 {
                k_used = k;
                break;
            }
            cs[k] = h[k][k] / denom;
            sn[k] = h[k + 1][k] / denom;
            h[k][k] = denom;
            h[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            k_used = k + 1;
            total += 1;
            if g[k + 1].abs() / bnorm <= rel_tol || total >= max_iter {
                break;
            }
            let wn = norm(&w);
            if wn == 0.0 {
                break;
            }
            v.push(w.iter().map(|x| x / wn).collect());
        }
        // back substitution
        let mut y = vec![0.0; k_used];
        for i in (0..k_used).rev() {
            let mut s = g[i];
            for j in i + 1..k_used {
                s -= h[i][j] * y[j];
            }
            y[i] = s / h[i][i];
        }
        for (j, yj) in y.iter().enumerate() {
            x.iter_mut().zip(&z[j]).for_each(|(a, c)| *a += yj * c);
        }
        if k_used == 0 {
            break;
        }
    }
    let ax = apply(&x);
    let r: Vec<f64> = b.iter().zip(&ax).map(|(a, c)| a - c).collect();
    rel = rel.min(norm(&r) / bnorm);
    GmresOutcome { x, residual: rel, iterations: total }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonSolution {
    /// Potential; mean zero in ricci_flat mode.
    pub u: Vec<f64>,
    /// Stationary value of `∂u/∂t` (ricci_flat); 0 in negative mode.
    pub constant: f64,
    /// `sup |F|` at the returned iterate.
    pub residual: f64,
    pub iterations: usize,
}

struct Linearization {
    ginv: Vec<Complex64>,
    mean_inv: Vec<Complex64>,
    n_c: usize,
}

impl Linearization {
    fn new(g: &HermitianField) -> Self {
        let n = g.n_c;
        let m = n * n;
        let mut ginv = Vec::with_capacity(g.entries.len());
        let mut mean_inv = vec![Complex64::new(0.0, 0.0); m];
        for p in 0..g.len() {
            let inv = herm_inverse(g.point(p));
            mean_inv.iter_mut().zip(&inv).for_each(|(a, b)| *a += b);
            ginv.extend(inv);
        }
        let np = g.len() as f64;
        mean_inv.iter_mut().for_each(|a| *a /= np);
        Self { ginv, mean_inv, n_c: n }
    }

    /// `tr(g̃⁻¹ ∂∂̄ δu)`.
    fn apply(&self, grid: &ComplexTorusGrid, du: &[f64]) -> Vec<f64> {
        let m = self.n_c * self.n_c;
        let h = hessian_from_spectrum(grid, &grid.spectral().forward(du));
        (0..du.len()).map(|p| trace_product(&self.ginv[p * m..(p + 1) * m], h.point(p))).collect()
    }

    /// Inverse of the averaged operator `tr(ḡ⁻¹ ∂∂̄) − shift`; kernel mapped to 0.
    fn precondition(&self, grid: &ComplexTorusGrid, y: &[f64], shift: f64) -> Vec<f64> {
        let n = self.n_c;
        let sg = grid.spectral();
        let spec = sg.forward(y);
        sg.filter(&spec, |b| {
            let mut s = Complex64::new(0.0, 0.0);
            for j in 0..n {
                for k in 0..n {
                    s += self.mean_inv[k * n + j] * grid.ddbar_symbol(b, j, k);
                }
            }
            let d = s.re - shift;
            if d.abs() < 1e-14 {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new(1.0 / d, 0.0)
            }
        })
        .into_iter()
        .map(|c| c.re)
        .collect()
    }
}

fn metric_of(grid: &ComplexTorusGrid, g0: &FlatMetric, u: &[f64]) -> Result<HermitianField> {
    let g = hessian_from_spectrum(grid, &grid.spectral().forward(u)).shifted(g0.entries());
    check_positive(&g)?;
    Ok(g)
}

fn residual_of(g: &HermitianField, g0: &FlatMetric, f: &[f64], u: &[f64], c: f64, mode: KahlerMode) -> Vec<f64> {
    let lr = log_ratio_of(g, g0);
    match mode {
        KahlerMode::RicciFlat => lr.iter().zip(f).map(|(a, b)| a + b - c).collect(),
        KahlerMode::Negative => lr.iter().zip(f).zip(u).map(|((a, b), x)| a + b - x).collect(),
    }
}

fn sup(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).fold(0.0, f64::max)
}

/// Solves `log det(g0 + ∂∂̄u) − log det g0 + f = c` (ricci_flat, `u` mean zero)
/// or `… + f − u = 0` (negative), starting from `u = 0`.
pub fn stationary_newton(
    grid: &Arc<ComplexTorusGrid>,
    g0: &FlatMetric,
    f: &[f64],
    mode: KahlerMode,
) -> Result<NewtonSolution> {
    stationary_newton_from(grid, g0, f, mode, vec![0.0; grid.len()])
}

pub fn stationary_newton_from(
    grid: &Arc<ComplexTorusGrid>,
    g0: &FlatMetric,
    f: &[f64],
    mode: KahlerMode,
    guess: Vec<f64>,
) -> Result<NewtonSolution> {
    if g0.n_c() != grid.n_c() {
        return Err(Error::DimensionMismatch { expected: grid.n_c(), got: g0.n_c() });
    }
    let f = normalize_data(grid, f)?;
    grid.check(&guess)?;
    let mut u = guess;
    let mut c = match mode {
        KahlerMode::RicciFlat => ricci_flat_limit_constant(grid, &f),
        KahlerMode::Negative => 0.0,
    };
    let mut g = metric_of(grid, g0, &u)?;
    let mut res = residual_of(&g, g0, &f, &u, c, mode);
    let mut res_norm = sup(&res);
    let shift = match mode {
        KahlerMode::RicciFlat => 0.0,
        KahlerMode::Negative => 1.0,
    };
    for it in 0..MAX_NEWTON {
        if res_norm <= NEWTON_TOL {
            return Ok(finish(u, c, res_norm, it, mode));
        }
        let lin = Linearization::new(&g);
        let (rhs, dc) = match mode {
            KahlerMode::RicciFlat => {
                // Solvability: ∫det g̃ (L δu) dV = 0 fixes δc.
                let det: Vec<f64> = log_ratio_of(&g, g0).iter().map(|x| x.exp()).collect();
                let num: f64 = det.iter().zip(&res).map(|(d, r)| d * r).sum();
                let dc = num / det.iter().sum::<f64>();
                (res.iter().map(|r| dc - r).collect::<Vec<_>>(), dc)
            }
            KahlerMode::Negative => (res.iter().map(|r| -r).collect(), 0.0),
        };
        let sol = gmres(
            |x| {
                let mut y = lin.apply(grid, x);
                if shift != 0.0 {
                    y.iter_mut().zip(x).for_each(|(a, b)| *a -= shift * b);
                }
                y
            },
            |y| lin.precondition(grid, y, shift),
            &rhs,
            1e-12,
            40,
            400,
        );
        let mut step = 1.0;
        loop {
            let trial: Vec<f64> = u.iter().zip(&sol.x).map(|(a, b)| a + step * b).collect();
            let tc = c + step * dc;
            if let Ok(tg) = metric_of(grid, g0, &trial) {
                let tr = residual_of(&tg, g0, &f, &trial, tc, mode);
                let tn = sup(&tr);
                if tn < res_norm {
                    u = trial;
                    c = tc;
                    g = tg;
                    res = tr;
                    res_norm = tn;
                    break;
                }
            }
            step *= 0.5;
            if step < MIN_DAMPING {
                return Err(Error::NoConvergence { residual: res_norm, iterations: it + 1 });
            }
        }
    }
    if res_norm <= NEWTON_TOL {
        Ok(finish(u, c, res_norm, MAX_NEWTON, mode))
    } else {
        Err(Error::NoConvergence { residual: res_norm, iterations: MAX_NEWTON })
    }
}

fn finish(mut u: Vec<f64>, c: f64, residual: f64, iterations: usize, mode: KahlerMode) -> NewtonSolution {
    if mode == KahlerMode::RicciFlat {
        let mean = u.iter().sum::<f64>() / u.len() as f64;
        u.iter_mut().for_each(|x| *x -= mean);
    }
    NewtonSolution { u, constant: c, residual, iterations }
}

#[cfg(test)]
mod tests {
    use super::super::mean_aligned_distance;
    use super::*;

    #[test]
    fn gmres_solves_small_system() {
        // tridiagonal SPD
        let n = 50;
        let apply = |x: &[f64]| -> Vec<f64> {
            (0..n)
                .map(|i| {
                    let l = if i > 0 { x[i - 1] } else { 0.0 };
                    let r = if i + 1 < n { x[i + 1] } else { 0.0 };
                    3.0 * x[i] - l - r
                })
                .collect()
        };
        let b: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let out = gmres(apply, |y| y.to_vec(), &b, 1e-12, 10, 500);
        assert!(out.residual <= 1e-12, "{out:?}");
        let ax = apply(&out.x);
        assert!(ax.iter().zip(&b).all(|(a, c)| (a - c).abs() < 1e-10));
    }

    #[test]
    fn zero_data_gives_zero() {
        let grid = Arc::new(ComplexTorusGrid::new(1, 16).unwrap());
        let g0 = FlatMetric::identity(1).unwrap();
        for mode in [KahlerMode::RicciFlat, KahlerMode::Negative] {
            let s = stationary_newton(&grid, &g0, &vec![0.0; grid.len()], mode).unwrap();
            assert!(s.u.iter().all(|x| x.abs() < 1e-14));
        }
    }

    #[test]
    fn ricci_flat_solution_is_unique() {
        let grid = Arc::new(ComplexTorusGrid::new(1, 64).unwrap());
        let g0 = FlatMetric::identity(1).unwrap();
        let f = grid.sample(|x| 0.2 * x[0].cos());
        let a = stationary_newton(&grid, &g0, &f, KahlerMode::RicciFlat).unwrap();
        assert!(a.residual <= NEWTON_TOL);
        assert!(a.u.iter().sum::<f64>().abs() < 1e-10);
        let guess = grid.sample(|x| 0.3 * x[1].sin() + 0.1 * (2.0 * x[0]).cos() + 5.0);
        let b = stationary_newton_from(&grid, &g0, &f, KahlerMode::RicciFlat, guess).unwrap();
        assert!(mean_aligned_distance(&a.u, &b.u) <= 1e-9);
    }

    #[test]
    fn two_dimensional_solve() {
        let grid = Arc::new(ComplexTorusGrid::new(2, 12).unwrap());
        let g0 = FlatMetric::identity(2).unwrap();
        let f = grid.sample(|x| 0.1 * x[0].cos());
        for mode in [KahlerMode::RicciFlat, KahlerMode::Negative] {
            let s = stationary_newton(&grid, &g0, &f, mode).unwrap();
            assert!(s.residual <= NEWTON_TOL, "{mode}: {}", s.residual);
        }
    }
}
