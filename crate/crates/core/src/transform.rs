//! Dealiased transforms between lattice coefficients and a periodic grid.
//!
//! Conventions: `u(x) = Σ_n a_n e^{-i n·x}` and
//! `coef_n(f) = ⨍ f e^{i n·x}`, with `⨍` the mean over the grid.
//! A grid of `G ≥ pN + 1` points per axis integrates every product the
//! model forms exactly.

use std::sync::Arc;

use num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::lattice::ModeLattice;
use crate::scalar::Real;

/// Smallest 5-smooth integer `≥ n`.
pub fn smooth_size(n: usize) -> usize {
    let mut m = n.max(1);
    loop {
        let mut r = m;
        for f in [2, 3, 5] {
            while r % f == 0 {
                r /= f;
            }
        }
        if r == 1 {
            return m;
        }
        m += 1;
    }
}

pub struct SpectralGrid<T: Real> {
    dim: usize,
    side: usize,
    total: usize,
    /// Grid offset of every lattice mode (`n mod G`, flattened).
    slots: Vec<usize>,
    forward: Arc<dyn Fft<T>>,
    inverse: Arc<dyn Fft<T>>,
    inv_total: T,
}

impl<T: Real> std::fmt::Debug for SpectralGrid<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectralGrid")
            .field("dim", &self.dim)
            .field("side", &self.side)
            .finish()
    }
}

impl<T: Real> SpectralGrid<T> {
    /// Grid exact for products of degree `degree` in `u, ū`.
    pub fn new(lattice: &ModeLattice, degree: usize) -> Self {
        let side = smooth_size(degree * lattice.cutoff() + 1);
        let dim = lattice.dim();
        let total = side.pow(dim as u32);
        let slots = lattice
            .iter()
            .map(|n| {
                n.iter().fold(0usize, |acc, &ni| {
                    acc * side + ni.rem_euclid(side as i32) as usize
                })
            })
            .collect();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(side);
        let inverse = planner.plan_fft_inverse(side);
        Self {
            dim,
            side,
            total,
            slots,
            forward,
            inverse,
            inv_total: T::one() / T::lit(total as f64),
        }
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn points(&self) -> usize {
        self.total
    }

    fn transform(&self, buf: &mut [Complex<T>], fft: &Arc<dyn Fft<T>>) {
        let side = self.side;
        if self.dim == 1 {
            fft.process(buf);
            return;
        }
        let mut line = vec![Complex::new(T::zero(), T::zero()); side];
        let mut scratch = vec![Complex::new(T::zero(), T::zero()); fft.get_inplace_scratch_len()];
        for axis in 0..self.dim {
            let stride = side.pow((self.dim - 1 - axis) as u32);
            let block = stride * side;
            for outer in (0..self.total).step_by(block) {
                for inner in 0..stride {
                    let base = outer + inner;
                    for (j, l) in line.iter_mut().enumerate() {
                        *l = buf[base + j * stride];
                    }
                    fft.process_with_scratch(&mut line, &mut scratch);
                    for (j, l) in line.iter().enumerate() {
                        buf[base + j * stride] = *l;
                    }
                }
            }
        }
    }

    fn scatter(&self, coeffs: &[Complex<T>]) -> Vec<Complex<T>> {
        let mut buf = vec![Complex::new(T::zero(), T::zero()); self.total];
        for (&s, &c) in self.slots.iter().zip(coeffs) {
            buf[s] = c;
        }
        buf
    }

    /// `u(x_j) = Σ a_n e^{-i n·x_j}`.
    pub fn to_physical(&self, coeffs: &[Complex<T>]) -> Vec<Complex<T>> {
        let mut buf = self.scatter(coeffs);
        self.transform(&mut buf, &self.forward);
        buf
    }

    /// `Z(x_j) = Σ z_n e^{+i n·x_j}`.
    pub fn to_physical_conj(&self, coeffs: &[Complex<T>]) -> Vec<Complex<T>> {
        let mut buf = self.scatter(coeffs);
        self.transform(&mut buf, &self.inverse);
        buf
    }

    /// `coef_n(f) = ⨍ f e^{+i n·x}`; consumes the buffer.
    pub fn coefficients(&self, mut f: Vec<Complex<T>>) -> Vec<Complex<T>> {
        self.transform(&mut f, &self.inverse);
        self.slots.iter().map(|&s| f[s] * self.inv_total).collect()
    }

    /// `⨍ f e^{-i n·x}`; consumes the buffer.
    pub fn conj_coefficients(&self, mut f: Vec<Complex<T>>) -> Vec<Complex<T>> {
        self.transform(&mut f, &self.forward);
        self.slots.iter().map(|&s| f[s] * self.inv_total).collect()
    }

    pub fn mean<I: IntoIterator<Item = T>>(&self, values: I) -> T {
        values.into_iter().sum::<T>() * self.inv_total
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smooth_sizes() {
        assert_eq!(smooth_size(1), 1);
        assert_eq!(smooth_size(7), 8);
        assert_eq!(smooth_size(129), 135);
        assert_eq!(smooth_size(13), 15);
    }

    #[test]
    fn physical_values_match_direct_sum() {
        let lat = ModeLattice::new(2, 1);
        let grid = SpectralGrid::<f64>::new(&lat, 4);
        let a: Vec<Complex<f64>> = (0..lat.len())
            .map(|k| Complex::new(k as f64 * 0.3 - 1.0, (k * k) as f64 * 0.1))
            .collect();
        let u = grid.to_physical(&a);
        let g = grid.side();
        for (j0, j1) in [(0usize, 0usize), (1, 3), (4, 2)] {
            let x = [
                2.0 * std::f64::consts::PI * j0 as f64 / g as f64,
                2.0 * std::f64::consts::PI * j1 as f64 / g as f64,
            ];
            let mut direct = Complex::new(0.0, 0.0);
            for k in 0..lat.len() {
                let n = lat.mode(k);
                let ph = -(n[0] as f64 * x[0] + n[1] as f64 * x[1]);
                direct += a[k] * Complex::from_polar(1.0, ph);
            }
            assert!((u[j0 * g + j1] - direct).norm() < 1e-12);
        }
    }

    #[test]
    fn coefficients_invert_physical() {
        let lat = ModeLattice::new(3, 1);
        let grid = SpectralGrid::<f64>::new(&lat, 4);
        let a: Vec<Complex<f64>> = (0..lat.len())
            .map(|k| Complex::new((k as f64).sin(), (k as f64).cos()))
            .collect();
        let back = grid.coefficients(grid.to_physical(&a));
        let back_c = grid.conj_coefficients(grid.to_physical_conj(&a));
        for k in 0..a.len() {
            assert!((back[k] - a[k]).norm() < 1e-12);
            assert!((back_c[k] - a[k]).norm() < 1e-12);
        }
    }
}
