//! Dormand–Prince 5(4) stepping for small fixed-size systems.

/// Butcher tableau of the Dormand–Prince pair.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
/// Fifth-order weights (FSAL: equal to the last row of `A`).
const B5: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
/// Embedded fourth-order weights.
const B4: [f64; 7] =
    [5179.0 / 57600.0, 0.0, 7571.0 / 16695.0, 393.0 / 640.0, -92097.0 / 339200.0, 187.0 / 2100.0, 1.0 / 40.0];

/// One Dormand–Prince step of size `h`. Returns the fifth-order solution and
/// the difference to the embedded fourth-order one.
pub fn dopri_step<const N: usize, F>(f: &F, t: f64, y: &[f64; N], h: f64) -> ([f64; N], [f64; N])
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
{
    let mut k = [[0.0; N]; 7];
    k[0] = f(t, y);
    for s in 1..7 {
        let mut ys = *y;
        for (j, kj) in k.iter().enumerate().take(s) {
            let a = A[s][j];
            if a != 0.0 {
                for i in 0..N {
                    ys[i] += h * a * kj[i];
                }
            }
        }
        k[s] = f(t + C[s] * h, &ys);
    }
    let mut y5 = *y;
    let mut err = [0.0; N];
    for s in 0..7 {
        for i in 0..N {
            y5[i] += h * B5[s] * k[s][i];
            err[i] += h * (B5[s] - B4[s]) * k[s][i];
        }
    }
    (y5, err)
}

/// Step-size controller settings.
#[derive(Debug, Clone, Copy)]
pub struct Tolerances {
    pub rel: f64,
    pub abs: f64,
    pub max_step: f64,
}

/// Outcome of a single adaptive attempt.
pub struct Accepted<const N: usize> {
    pub t: f64,
    pub y: [f64; N],
    pub h_used: f64,
}

/// PI-controlled adaptive stepper.
pub struct Stepper {
    tol: Tolerances,
    h: f64,
    err_prev: f64,
    pub min_step: f64,
}

const SAFETY: f64 = 0.9;
const BETA: f64 = 0.04;
const ALPHA: f64 = 0.2 - 0.75 * BETA;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;

impl Stepper {
    pub fn new(tol: Tolerances, h0: f64) -> Self {
        Self { tol, h: h0.min(tol.max_step), err_prev: 1e-4, min_step: 1e-14 }
    }

    fn error_norm<const N: usize>(&self, y: &[f64; N], y_new: &[f64; N], err: &[f64; N]) -> f64 {
        let mut s = 0.0;
        for i in 0..N {
            let sc = self.tol.abs + self.tol.rel * y[i].abs().max(y_new[i].abs());
            s += (err[i] / sc).powi(2);
        }
        (s / N as f64).sqrt()
    }

    /// Next attempt starts from `h` (used to back off from an event).
    pub fn retry_with(&mut self, h: f64) {
        self.h = h;
    }

    /// Advance by one accepted step, never past `t_limit`. Returns `None` when
    /// the step size underflows.
    pub fn step<const N: usize, F>(&mut self, f: &F, t: f64, y: &[f64; N], t_limit: f64) -> Option<Accepted<N>>
    where
        F: Fn(f64, &[f64; N]) -> [f64; N],
    {
        loop {
            let mut h = self.h.min(self.tol.max_step);
            let mut clipped = false;
            if t + h >= t_limit {
                h = t_limit - t;
                clipped = true;
            }
            if h < self.min_step * t.abs().max(1.0) {
                if clipped && h > 0.0 {
                    // Landing exactly on the limit; accept whatever the tiny step gives.
                    let (y5, _) = dopri_step(f, t, y, h);
                    return Some(Accepted { t: t_limit, y: y5, h_used: h });
                }
                return None;
            }
            let (y5, e) = dopri_step(f, t, y, h);
            let finite = y5.iter().all(|v| v.is_finite());
            let err = if finite { self.error_norm(y, &y5, &e) } else { f64::INFINITY };
            if err <= 1.0 {
                let fac = if err == 0.0 {
                    FAC_MAX
                } else {
                    (SAFETY * err.powf(-ALPHA) * self.err_prev.powf(BETA)).clamp(FAC_MIN, FAC_MAX)
                };
                self.err_prev = err.max(1e-4);
                if !clipped {
                    self.h = h * fac;
                }
                let t_new = if clipped { t_limit } else { t + h };
                return Some(Accepted { t: t_new, y: y5, h_used: h });
            }
            let fac = if err.is_finite() { (SAFETY * err.powf(-ALPHA)).clamp(FAC_MIN, 1.0) } else { FAC_MIN };
            self.h = h * fac;
        }
    }
}
