//! Space-time path action `Δ = inf_γ ∫ |γ'|²_{g(t)} dt` and the Harnack inequality
//! `(e^{rτ} − 1) R(ξ, τ) ≤ e^{Δ/4} (e^{rT} − 1) R(X, T)`.
//!
//! Paths run along one coordinate line (a meridian of the zonal sphere, or an
//! `x`-line of a torus metric that does not depend on `y`). The infimum is
//! approximated from above by dynamic programming over piecewise-linear paths
//! whose vertices sit at the trajectory's sample times and on a uniform path grid.

use std::f64::consts::PI;

use super::{BackgroundKind, SurfaceTrajectory};
use rand::Rng;

use crate::error::{Error, Result};
use crate::rng;

/// A space-time point: coordinate along the path line and a sample index of the trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpacePoint {
    pub x: f64,
    pub sample: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HarnackPair {
    pub from: SpacePoint,
    pub to: SpacePoint,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HarnackReport {
    pub pairs: usize,
    pub violations: usize,
    pub worst_slack: f64,
    pub slacks: Vec<f64>,
}

struct Line {
    periodic: bool,
    /// Node coordinates of the 1-D profile.
    nodes: Vec<f64>,
    /// Conformal factor per sample, one profile per trajectory sample.
    profiles: Vec<Vec<f64>>,
}

impl Line {
    fn extent(&self) -> f64 {
        if self.periodic {
            2.0 * PI
        } else {
            PI
        }
    }

    fn from_trajectory(traj: &SurfaceTrajectory) -> Result<Self> {
        let bg = traj.background();
        match bg.kind() {
            BackgroundKind::RoundSphereZonal => Ok(Self {
                periodic: false,
                nodes: bg.theta().to_vec(),
                profiles: traj.states.iter().map(|s| s.v.clone()).collect(),
            }),
            BackgroundKind::FlatTorus => {
                let n = bg.n();
                let mut profiles = Vec::with_capacity(traj.states.len());
                for s in &traj.states {
                    let row: Vec<f64> = (0..n).map(|ix| s.v[ix * n]).collect();
                    for ix in 0..n {
                        for iy in 0..n {
                            if (s.v[ix * n + iy] - row[ix]).abs() > 1e-12 {
                                return Err(Error::Inapplicable("torus metric depends on y".into()));
                            }
                        }
                    }
                    profiles.push(row);
                }
                let nodes = (0..n).map(|i| 2.0 * PI * i as f64 / n as f64).collect();
                Ok(Self { periodic: true, nodes, profiles })
            }
        }
    }

    /// Linear interpolation of a nodal profile.
    fn interp(&self, profile: &[f64], x: f64) -> f64 {
        let n = self.nodes.len();
        if self.periodic {
            let h = 2.0 * PI / n as f64;
            let s = x.rem_euclid(2.0 * PI) / h;
            let i = (s.floor() as usize) % n;
            let frac = s - s.floor();
            profile[i] * (1.0 - frac) + profile[(i + 1) % n] * frac
        } else {
            let h = PI / n as f64;
            let s = x / h - 0.5;
            if s <= 0.0 {
                return profile[0];
            }
            if s >= (n - 1) as f64 {
                return profile[n - 1];
            }
            let i = s.floor() as usize;
            let frac = s - i as f64;
            profile[i] * (1.0 - frac) + profile[i + 1] * frac
        }
    }

    fn displacement(&self, a: f64, b: f64) -> f64 {
        if self.periodic {
            let d = (b - a).rem_euclid(2.0 * PI);
            if d > PI {
                d - 2.0 * PI
            } else {
                d
            }
        } else {
            b - a
        }
    }
}

fn check_points(traj: &SurfaceTrajectory, line: &Line, from: SpacePoint, to: SpacePoint) -> Result<()> {
    let n = traj.states.len();
    if from.sample >= n || to.sample >= n {
        return Err(Error::OutOfSpan(format!("sample index beyond {} samples", n)));
    }
    if from.sample >= to.sample {
        return Err(Error::invalid("need τ < T (from.sample < to.sample)"));
    }
    for x in [from.x, to.x] {
        if !(0.0..=line.extent()).contains(&x) {
            return Err(Error::OutOfSpan(format!("coordinate {x} outside [0, {}]", line.extent())));
        }
    }
    Ok(())
}

/// Discrete path action between `from` and `to` with `path_nodes` intermediate positions.
pub fn harnack_distance(traj: &SurfaceTrajectory, from: SpacePoint, to: SpacePoint, path_nodes: usize) -> Result<f64> {
    let line = Line::from_trajectory(traj)?;
    check_points(traj, &line, from, to)?;
    if path_nodes < 2 {
        return Err(Error::invalid("path grid needs at least two nodes"));
    }
    let times: Vec<f64> = traj.states.iter().map(|s| s.t).collect();
    let (k1, k2) = (from.sample, to.sample);

    let seg_cost = |a: f64, b: f64, k: usize| -> f64 {
        let d = line.displacement(a, b);
        let mid = a + 0.5 * d;
        let vm = 0.5 * (line.interp(&line.profiles[k], mid) + line.interp(&line.profiles[k + 1], mid));
        (2.0 * vm).exp() * d * d / (times[k + 1] - times[k])
    };
    if k2 == k1 + 1 {
        return Ok(seg_cost(from.x, to.x, k1));
    }

    let m = path_nodes;
    let grid: Vec<f64> = if line.periodic {
        (0..m).map(|j| 2.0 * PI * j as f64 / m as f64).collect()
    } else {
        (0..m).map(|j| PI * j as f64 / (m - 1) as f64).collect()
    };
    // Metric factor at all pairwise midpoints of grid nodes, indexed by the half-grid.
    let half: Vec<f64> = if line.periodic {
        (0..2 * m).map(|h| PI * h as f64 / m as f64).collect()
    } else {
        (0..2 * m - 1).map(|h| PI * h as f64 / (2 * (m - 1)) as f64).collect()
    };

    let mut cost: Vec<f64> = grid.iter().map(|&b| seg_cost(from.x, b, k1)).collect();
    let mut next = vec![0.0; m];
    for k in k1 + 1..k2 - 1 {
        let dt = times[k + 1] - times[k];
        let w: Vec<f64> = half
            .iter()
            .map(|&x| (line.interp(&line.profiles[k], x) + line.interp(&line.profiles[k + 1], x)).exp())
            .collect();
        for (l, nl) in next.iter_mut().enumerate() {
            let mut best = f64::INFINITY;
            for (j, cj) in cost.iter().enumerate() {
                let (d, h) = if line.periodic {
                    let mut dj = l as isize - j as isize;
                    let mi = m as isize;
                    if dj > mi / 2 {
                        dj -= mi;
                    } else if dj < -mi / 2 {
                        dj += mi;
                    }
                    let h = (2 * j as isize + dj).rem_euclid(2 * mi) as usize;
                    (dj as f64 * 2.0 * PI / m as f64, h)
                } else {
                    (grid[l] - grid[j], j + l)
                };
                let c = cj + w[h] * d * d / dt;
                if c < best {
                    best = c;
                }
            }
            *nl = best;
        }
        std::mem::swap(&mut cost, &mut next);
    }
    let k = k2 - 1;
    Ok(grid.iter().zip(&cost).map(|(&a, c)| c + seg_cost(a, to.x, k)).fold(f64::INFINITY, f64::min))
}

/// Static comparison bounds `d_h²/(T−τ)` and `d_G²/(T−τ)` from the pointwise
/// minimum and maximum of the metric over the samples in `[τ, T]`.
pub fn harnack_static_bounds(traj: &SurfaceTrajectory, from: SpacePoint, to: SpacePoint) -> Result<(f64, f64)> {
    let line = Line::from_trajectory(traj)?;
    check_points(traj, &line, from, to)?;
    let span = &line.profiles[from.sample..=to.sample];
    let duration = traj.states[to.sample].t - traj.states[from.sample].t;
    let length = |pick: &dyn Fn(&[f64]) -> f64, a: f64, d: f64| -> f64 {
        let q = 4000;
        let h = d / q as f64;
        (0..q)
            .map(|i| {
                let x = a + (i as f64 + 0.5) * h;
                let vals: Vec<f64> = span.iter().map(|p| line.interp(p, x)).collect();
                pick(&vals).exp() * h.abs()
            })
            .sum()
    };
    let vmin = |v: &[f64]| v.iter().copied().fold(f64::INFINITY, f64::min);
    let vmax = |v: &[f64]| v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let d = line.displacement(from.x, to.x);
    let mut lo = length(&vmin, from.x, d);
    let mut hi = length(&vmax, from.x, d);
    if line.periodic && d != 0.0 {
        let other = d - d.signum() * 2.0 * PI;
        lo = lo.min(length(&vmin, from.x, other));
        hi = hi.min(length(&vmax, from.x, other));
    }
    Ok((lo * lo / duration, hi * hi / duration))
}

/// `count` reproducible pairs with `τ < T` drawn uniformly over samples and the path line.
pub fn random_pairs(traj: &SurfaceTrajectory, count: usize, seed: u64) -> Result<Vec<HarnackPair>> {
    let line = Line::from_trajectory(traj)?;
    let n = traj.states.len();
    if n < 2 {
        return Err(Error::invalid("need at least two samples"));
    }
    Ok((0..count)
        .map(|i| {
            let mut g = rng::stream(seed, i as u64);
            let a = g.random_range(0..n - 1);
            let b = g.random_range(a + 1..n);
            HarnackPair {
                from: SpacePoint { x: g.random_range(0.0..=line.extent()), sample: a },
                to: SpacePoint { x: g.random_range(0.0..=line.extent()), sample: b },
            }
        })
        .collect())
}

/// Evaluates the Harnack inequality on each pair; slack is `RHS − LHS`.
pub fn harnack_check(traj: &SurfaceTrajectory, pairs: &[HarnackPair], path_nodes: usize) -> Result<HarnackReport> {
    let line = Line::from_trajectory(traj)?;
    let r = traj.diagnostics[0].r;
    if r <= 0.0 {
        return Err(Error::Inapplicable(format!("average curvature r = {r} is not positive")));
    }
    let mut slacks = Vec::with_capacity(pairs.len());
    for p in pairs {
        check_points(traj, &line, p.from, p.to)?;
        for d in &traj.diagnostics[p.from.sample..=p.to.sample] {
            if d.r_min <= 0.0 {
                return Err(Error::Inapplicable(format!("R ≤ 0 at t = {}", d.t)));
            }
        }
        let delta = harnack_distance(traj, p.from, p.to, path_nodes)?;
        let tau = traj.states[p.from.sample].t;
        let big_t = traj.states[p.to.sample].t;
        let r_from = curvature_at(traj, &line, p.from);
        let r_to = curvature_at(traj, &line, p.to);
        let lhs = ((r * tau).exp() - 1.0) * r_from;
        let rhs = (delta / 4.0).exp() * ((r * big_t).exp() - 1.0) * r_to;
        slacks.push(rhs - lhs);
    }
    let violations = slacks.iter().filter(|s| **s < -1e-8).count();
    let worst_slack = slacks.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(HarnackReport { pairs: pairs.len(), violations, worst_slack, slacks })
}

fn curvature_at(traj: &SurfaceTrajectory, line: &Line, p: SpacePoint) -> f64 {
    let curv = &traj.diagnostics[p.sample].curvature;
    if line.periodic {
        let n = line.nodes.len();
        let row: Vec<f64> = (0..n).map(|ix| curv[ix * n]).collect();
        line.interp(&row, p.x)
    } else {
        line.interp(curv, p.x)
    }
}
