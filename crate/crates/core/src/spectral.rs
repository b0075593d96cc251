//! Fourier pseudo-spectral operators on periodic grids `[0, 2π)^d`.
//!
//! Fields are stored row-major with the last axis contiguous. All axes have the
//! same number of samples `n` (even). Odd derivatives drop the Nyquist mode.

use std::cell::RefCell;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

#[derive(Clone)]
pub struct SpectralGrid {
    n: usize,
    dims: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for SpectralGrid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectralGrid").field("n", &self.n).field("dims", &self.dims).finish()
    }
}

impl PartialEq for SpectralGrid {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.dims == other.dims
    }
}

impl SpectralGrid {
    pub fn new(n: usize, dims: usize) -> Result<Self> {
        if n < 4 || !n.is_multiple_of(2) {
            return Err(Error::invalid(format!("grid size must be even and at least 4, got {n}")));
        }
        if !(1..=4).contains(&dims) {
            return Err(Error::invalid(format!("unsupported dimension {dims}")));
        }
        let mut planner = FftPlanner::new();
        Ok(Self { n, dims, forward: planner.plan_fft_forward(n), inverse: planner.plan_fft_inverse(n) })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.dims as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.n as f64
    }

    /// Volume of one grid cell.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dims as i32)
    }

    /// Coordinate of a flat index along every axis.
    pub fn coords(&self, index: usize) -> Vec<f64> {
        let h = self.spacing();
        let mut out = vec![0.0; self.dims];
        let mut rem = index;
        for a in (0..self.dims).rev() {
            out[a] = (rem % self.n) as f64 * h;
            rem /= self.n;
        }
        out
    }

    /// Samples `f` at every grid point.
    pub fn sample(&self, f: impl Fn(&[f64]) -> f64) -> Vec<f64> {
        (0..self.len()).map(|i| f(&self.coords(i))).collect()
    }

    /// Signed integer wavenumber of FFT bin `i`.
    pub fn wavenumber(&self, i: usize) -> f64 {
        if i <= self.n / 2 {
            i as f64
        } else {
            i as f64 - self.n as f64
        }
    }

    fn is_nyquist(&self, i: usize) -> bool {
        i == self.n / 2
    }

    fn check(&self, field: &[f64]) -> Result<()> {
        if field.len() != self.len() {
            return Err(Error::DimensionMismatch { expected: self.len(), got: field.len() });
        }
        Ok(())
    }

    fn transform(&self, data: &mut [Complex64], fft: &Arc<dyn Fft<f64>>) {
        thread_local! {
            static BUFFERS: RefCell<(Vec<Complex64>, Vec<Complex64>)> = const { RefCell::new((Vec::new(), Vec::new())) };
        }
        BUFFERS.with_borrow_mut(|(lines, scratch)| self.transform_with(data, fft, lines, scratch));
    }

    fn transform_with(
        &self,
        data: &mut [Complex64],
        fft: &Arc<dyn Fft<f64>>,
        lines: &mut Vec<Complex64>,
        scratch: &mut Vec<Complex64>,
    ) {
        let n = self.n;
        let total = data.len();
        scratch.resize(fft.get_inplace_scratch_len(), Complex64::new(0.0, 0.0));
        for axis in 0..self.dims {
            let stride = n.pow((self.dims - 1 - axis) as u32);
            if stride == 1 {
                fft.process_with_scratch(data, scratch);
                continue;
            }
            // Gather every line along `axis` contiguously, transform in one call, scatter back.
            lines.resize(total, Complex64::new(0.0, 0.0));
            let block = stride * n;
            let mut l = 0;
            for start in (0..total).step_by(block) {
                for offset in 0..stride {
                    let base = start + offset;
                    for k in 0..n {
                        lines[l * n + k] = data[base + k * stride];
                    }
                    l += 1;
                }
            }
            fft.process_with_scratch(lines, scratch);
            let mut l = 0;
            for start in (0..total).step_by(block) {
                for offset in 0..stride {
                    let base = start + offset;
                    for k in 0..n {
                        data[base + k * stride] = lines[l * n + k];
                    }
                    l += 1;
                }
            }
        }
    }

    /// Forward transform of a real field into `out`, reusing its allocation.
    pub fn forward_into(&self, field: &[f64], out: &mut Vec<Complex64>) {
        out.clear();
        out.extend(field.iter().map(|&x| Complex64::new(x, 0.0)));
        self.transform(out, &self.forward);
    }

    /// Normalized inverse transform in place.
    pub fn inverse_in_place(&self, data: &mut [Complex64]) {
        self.transform(data, &self.inverse);
        let norm = 1.0 / self.len() as f64;
        data.iter_mut().for_each(|c| *c *= norm);
    }

    pub fn forward(&self, field: &[f64]) -> Vec<Complex64> {
        let mut data: Vec<Complex64> = field.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        self.transform(&mut data, &self.forward);
        data
    }

    /// Inverse transform, real part, normalized.
    pub fn inverse_real(&self, mut spec: Vec<Complex64>) -> Vec<f64> {
        self.transform(&mut spec, &self.inverse);
        let norm = 1.0 / self.len() as f64;
        spec.into_iter().map(|c| c.re * norm).collect()
    }

    pub fn forward_complex(&self, field: &[Complex64]) -> Vec<Complex64> {
        let mut data = field.to_vec();
        self.transform(&mut data, &self.forward);
        data
    }

    /// Inverse transform of a full complex spectrum, normalized.
    pub fn inverse_complex(&self, mut spec: Vec<Complex64>) -> Vec<Complex64> {
        self.transform(&mut spec, &self.inverse);
        let norm = 1.0 / self.len() as f64;
        spec.iter_mut().for_each(|c| *c *= norm);
        spec
    }

    /// Multiplies a precomputed spectrum by `symbol(bins)` and returns the complex field.
    pub fn filter(&self, spec: &[Complex64], symbol: impl Fn(&[usize]) -> Complex64) -> Vec<Complex64> {
        let mut b = vec![0; self.dims];
        let out = spec
            .iter()
            .enumerate()
            .map(|(i, s)| {
                self.bins(i, &mut b);
                s * symbol(&b)
            })
            .collect();
        self.inverse_complex(out)
    }

    /// `i k` along `axis`, Nyquist removed.
    pub fn ik(&self, bins: &[usize], axis: usize) -> Complex64 {
        if self.is_nyquist(bins[axis]) {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::new(0.0, self.wavenumber(bins[axis]))
        }
    }

    /// Axis bins of a flat spectral index.
    pub fn bins(&self, index: usize, out: &mut [usize]) {
        let mut rem = index;
        for a in (0..self.dims).rev() {
            out[a] = rem % self.n;
            rem /= self.n;
        }
    }

    /// Multiplies the spectrum by `symbol(bins)` and transforms back.
    pub fn apply_symbol(&self, field: &[f64], symbol: impl Fn(&[usize]) -> Complex64) -> Result<Vec<f64>> {
        self.check(field)?;
        let mut spec = self.forward(field);
        let mut b = vec![0; self.dims];
        for (i, s) in spec.iter_mut().enumerate() {
            self.bins(i, &mut b);
            *s *= symbol(&b);
        }
        Ok(self.inverse_real(spec))
    }

    /// Spectral Laplacian, eigenvalue `−|k|²`.
    pub fn laplacian(&self, field: &[f64]) -> Result<Vec<f64>> {
        self.apply_symbol(field, |b| {
            let k2: f64 = b.iter().map(|&i| self.wavenumber(i).powi(2)).sum();
            Complex64::new(-k2, 0.0)
        })
    }

    /// `∂/∂x_axis`.
    pub fn derivative(&self, field: &[f64], axis: usize) -> Result<Vec<f64>> {
        self.apply_symbol(field, |b| {
            if self.is_nyquist(b[axis]) {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new(0.0, self.wavenumber(b[axis]))
            }
        })
    }

    /// `∂²/∂x_a∂x_b`.
    pub fn second_derivative(&self, field: &[f64], a: usize, b: usize) -> Result<Vec<f64>> {
        self.apply_symbol(field, |bins| {
            if a != b && (self.is_nyquist(bins[a]) || self.is_nyquist(bins[b])) {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new(-self.wavenumber(bins[a]) * self.wavenumber(bins[b]), 0.0)
            }
        })
    }

    /// Solves `Δ u = rhs` for mean-zero `u`. The mean of `rhs` is ignored.
    pub fn inverse_laplacian(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        self.apply_symbol(rhs, |b| {
            let k2: f64 = b.iter().map(|&i| self.wavenumber(i).powi(2)).sum();
            if k2 == 0.0 {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new(-1.0 / k2, 0.0)
            }
        })
    }

    /// Trapezoidal (spectrally exact) integral over the torus.
    pub fn integrate(&self, field: &[f64]) -> f64 {
        field.iter().sum::<f64>() * self.cell_volume()
    }

    pub fn mean(&self, field: &[f64]) -> f64 {
        field.iter().sum::<f64>() / field.len() as f64
    }

    pub fn total_volume(&self) -> f64 {
        (2.0 * std::f64::consts::PI).powi(self.dims as i32)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn laplacian_of_trig_modes() {
        let grid = SpectralGrid::new(16, 2).unwrap();
        let f = grid.sample(|x| (2.0 * x[0]).cos() * (3.0 * x[1]).sin());
        let lap = grid.laplacian(&f).unwrap();
        for (l, v) in lap.iter().zip(&f) {
            assert!((l + 13.0 * v).abs() < 1e-12);
        }
    }

    #[test]
    fn derivatives_in_four_dimensions() {
        let grid = SpectralGrid::new(8, 4).unwrap();
        let f = grid.sample(|x| (x[0] + 2.0 * x[2]).sin() + x[3].cos() * x[1].cos());
        let d2 = grid.derivative(&f, 2).unwrap();
        let exact = grid.sample(|x| 2.0 * (x[0] + 2.0 * x[2]).cos());
        for (a, b) in d2.iter().zip(&exact) {
            assert!((a - b).abs() < 1e-12);
        }
        let d13 = grid.second_derivative(&f, 1, 3).unwrap();
        let exact = grid.sample(|x| x[3].sin() * x[1].sin());
        for (a, b) in d13.iter().zip(&exact) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn poisson_roundtrip() {
        let grid = SpectralGrid::new(32, 2).unwrap();
        let f = grid.sample(|x| (x[0]).cos() * (2.0 * x[1]).cos() + 0.3 * (3.0 * x[1]).sin());
        let u = grid.inverse_laplacian(&f).unwrap();
        let back = grid.laplacian(&u).unwrap();
        for (a, b) in back.iter().zip(&f) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(grid.mean(&u).abs() < 1e-14);
        assert_relative_eq!(grid.integrate(&vec![1.0; grid.len()]), grid.total_volume(), max_relative = 1e-14);
    }

    #[test]
    fn rejects_odd_or_mismatched() {
        assert!(SpectralGrid::new(15, 2).is_err());
        let grid = SpectralGrid::new(8, 2).unwrap();
        assert!(matches!(grid.laplacian(&[0.0; 10]), Err(Error::DimensionMismatch { .. })));
    }
}
