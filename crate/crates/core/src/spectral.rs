//! Periodic grid, Fourier transforms and the spectral calculus built on them.
//!
//! Fields are stored row-major with linear index `(ix * n + iy) * n + iz`.
//! Forward transforms are unnormalised; inverse transforms divide by `n³`.
//! The Nyquist plane carries zero wavenumber so that spectral derivatives of
//! real fields stay real.

use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::C64;

pub type RealField = Vec<f64>;
pub type ComplexField = Vec<C64>;
/// Three spatial components of a real field.
pub type VectorField = [RealField; 3];

#[derive(Clone)]
pub struct SpectralGrid {
    n: usize,
    box_length: f64,
    /// Integer wavenumber per axis index, Nyquist reported as `-n/2`.
    kint: Vec<i64>,
    /// Physical wavenumber per axis index used by derivatives (Nyquist = 0).
    k: Vec<f64>,
    dealias: Vec<bool>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for SpectralGrid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectralGrid")
            .field("n", &self.n)
            .field("box_length", &self.box_length)
            .finish()
    }
}

impl SpectralGrid {
    pub fn new(n: usize, box_length: f64) -> Result<Self> {
        if n < 4 || !n.is_power_of_two() {
            return Err(Error::Config(format!("grid size n = {n} must be a power of two >= 4")));
        }
        if !(box_length.is_finite() && box_length > 0.0) {
            return Err(Error::Config(format!("box length {box_length} must be positive")));
        }
        let half = (n / 2) as i64;
        let kint: Vec<i64> = (0..n as i64).map(|m| if m < half { m } else { m - n as i64 }).collect();
        let base = 2.0 * PI / box_length;
        let k: Vec<f64> = kint
            .iter()
            .map(|&m| if m == -half { 0.0 } else { m as f64 * base })
            .collect();
        // 2/3 rule: keep |m| <= n/3 on every axis; the Nyquist plane is always dropped.
        let cut = (n / 3) as i64;
        let keep_axis: Vec<bool> = kint.iter().map(|&m| m != -half && m.abs() <= cut).collect();
        let mut dealias = vec![false; n * n * n];
        for ix in 0..n {
            for iy in 0..n {
                for iz in 0..n {
                    dealias[(ix * n + iy) * n + iz] = keep_axis[ix] && keep_axis[iy] && keep_axis[iz];
                }
            }
        }
        let mut planner = FftPlanner::new();
        Ok(SpectralGrid {
            n,
            box_length,
            kint,
            k,
            dealias,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of grid points, `n³`.
    pub fn len(&self) -> usize {
        self.n * self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn box_length(&self) -> f64 {
        self.box_length
    }

    pub fn volume(&self) -> f64 {
        self.box_length.powi(3)
    }

    pub fn cell_volume(&self) -> f64 {
        (self.box_length / self.n as f64).powi(3)
    }

    pub fn spacing(&self) -> f64 {
        self.box_length / self.n as f64
    }

    /// Integer wavenumber along one axis.
    pub fn mode_index(&self, axis_index: usize) -> i64 {
        self.kint[axis_index]
    }

    pub fn axis_wavenumbers(&self) -> &[f64] {
        &self.k
    }

    #[inline]
    pub fn split_index(&self, idx: usize) -> [usize; 3] {
        let n = self.n;
        [idx / (n * n), (idx / n) % n, idx % n]
    }

    #[inline]
    pub fn wavevector(&self, idx: usize) -> [f64; 3] {
        let [i, j, l] = self.split_index(idx);
        [self.k[i], self.k[j], self.k[l]]
    }

    /// Grid coordinates of a point, each in `[0, L)`.
    pub fn position(&self, idx: usize) -> [f64; 3] {
        let h = self.spacing();
        let [i, j, l] = self.split_index(idx);
        [i as f64 * h, j as f64 * h, l as f64 * h]
    }

    pub fn dealias_mask(&self) -> &[bool] {
        &self.dealias
    }

    // ---- transforms -------------------------------------------------------

    fn transform(&self, data: &mut [C64], plan: &Arc<dyn Fft<f64>>) {
        let n = self.n;
        // z is contiguous: one batched call over all rows
        plan.process(data);
        let mut lines = vec![C64::new(0.0, 0.0); n * n * n];
        for stride in [n, n * n] {
            // gather lines along the strided axis into contiguous storage
            let mut line = 0;
            for base in 0..n * n * n {
                if (base / stride) % n != 0 {
                    continue;
                }
                for m in 0..n {
                    lines[line * n + m] = data[base + m * stride];
                }
                line += 1;
            }
            plan.process(&mut lines);
            line = 0;
            for base in 0..n * n * n {
                if (base / stride) % n != 0 {
                    continue;
                }
                for m in 0..n {
                    data[base + m * stride] = lines[line * n + m];
                }
                line += 1;
            }
        }
    }

    pub fn fft_c(&self, field: &[C64]) -> ComplexField {
        let mut data = field.to_vec();
        self.transform(&mut data, &self.forward);
        data
    }

    pub fn ifft_c(&self, mut spectrum: ComplexField) -> ComplexField {
        self.transform(&mut spectrum, &self.inverse);
        let scale = 1.0 / self.len() as f64;
        for v in spectrum.iter_mut() {
            *v *= scale;
        }
        spectrum
    }

    pub fn fft_r(&self, field: &[f64]) -> ComplexField {
        let mut data: Vec<C64> = field.iter().map(|&x| C64::new(x, 0.0)).collect();
        self.transform(&mut data, &self.forward);
        data
    }

    /// Inverse transform keeping the real part.
    pub fn ifft_r(&self, spectrum: ComplexField) -> RealField {
        self.ifft_c(spectrum).into_iter().map(|z| z.re).collect()
    }

    // ---- derivatives -------------------------------------------------------

    fn apply_symbol(&self, spectrum: &mut [C64], symbol: impl Fn([f64; 3]) -> C64) {
        for (idx, v) in spectrum.iter_mut().enumerate() {
            *v *= symbol(self.wavevector(idx));
        }
    }

    pub fn deriv_c(&self, field: &[C64], axis: usize) -> ComplexField {
        let mut s = self.fft_c(field);
        self.apply_symbol(&mut s, |k| C64::new(0.0, k[axis]));
        self.ifft_c(s)
    }

    pub fn deriv_r(&self, field: &[f64], axis: usize) -> RealField {
        let mut s = self.fft_r(field);
        self.apply_symbol(&mut s, |k| C64::new(0.0, k[axis]));
        self.ifft_r(s)
    }

    pub fn grad_r(&self, field: &[f64]) -> VectorField {
        let s = self.fft_r(field);
        std::array::from_fn(|axis| {
            let mut d = s.clone();
            self.apply_symbol(&mut d, |k| C64::new(0.0, k[axis]));
            self.ifft_r(d)
        })
    }

    pub fn grad_c(&self, field: &[C64]) -> [ComplexField; 3] {
        let s = self.fft_c(field);
        std::array::from_fn(|axis| {
            let mut d = s.clone();
            self.apply_symbol(&mut d, |k| C64::new(0.0, k[axis]));
            self.ifft_c(d)
        })
    }

    pub fn laplacian_c(&self, field: &[C64]) -> ComplexField {
        let mut s = self.fft_c(field);
        self.apply_symbol(&mut s, |k| C64::new(-(k[0] * k[0] + k[1] * k[1] + k[2] * k[2]), 0.0));
        self.ifft_c(s)
    }

    pub fn div(&self, v: &VectorField) -> RealField {
        let mut acc = vec![C64::new(0.0, 0.0); self.len()];
        for (axis, comp) in v.iter().enumerate() {
            let s = self.fft_r(comp);
            for (idx, (a, b)) in acc.iter_mut().zip(s).enumerate() {
                *a += C64::new(0.0, self.wavevector(idx)[axis]) * b;
            }
        }
        self.ifft_r(acc)
    }

    pub fn curl(&self, v: &VectorField) -> VectorField {
        let d: [VectorField; 3] = std::array::from_fn(|c| self.grad_r(&v[c]));
        // d[c][axis] = ∂_axis v_c
        [
            sub(&d[2][1], &d[1][2]),
            sub(&d[0][2], &d[2][0]),
            sub(&d[1][0], &d[0][1]),
        ]
    }

    // ---- dealiasing ---------------------------------------------------------

    pub fn dealias_r(&self, field: &mut RealField) {
        let mut s = self.fft_r(field);
        self.mask_spectrum(&mut s);
        *field = self.ifft_r(s);
    }

    pub fn dealias_c(&self, field: &mut ComplexField) {
        let mut s = self.fft_c(field);
        self.mask_spectrum(&mut s);
        *field = self.ifft_c(s);
    }

    pub fn mask_spectrum(&self, spectrum: &mut [C64]) {
        for (v, &keep) in spectrum.iter_mut().zip(&self.dealias) {
            if !keep {
                *v = C64::new(0.0, 0.0);
            }
        }
    }

    // ---- norms -------------------------------------------------------------

    /// `‖u‖_{L₂}` by direct quadrature over the grid.
    pub fn l2_norm_r(&self, field: &[f64]) -> f64 {
        (self.cell_volume() * field.iter().map(|x| x * x).sum::<f64>()).sqrt()
    }

    pub fn l2_norm_c(&self, field: &[C64]) -> f64 {
        (self.cell_volume() * field.iter().map(|z| z.norm_sqr()).sum::<f64>()).sqrt()
    }

    /// `‖u‖_{L_p}` by grid quadrature, `p ≥ 1`.
    pub fn lp_norm_r(&self, field: &[f64], p: f64) -> f64 {
        (self.cell_volume() * field.iter().map(|x| x.abs().powf(p)).sum::<f64>()).powf(1.0 / p)
    }

    /// Multi-index weight `Σ_{|α|≤p} Π_s k_s^{2α_s}`.
    pub fn sobolev_weight(k: [f64; 3], p: u32) -> f64 {
        let q = [k[0] * k[0], k[1] * k[1], k[2] * k[2]];
        let mut w = 1.0;
        if p >= 1 {
            w += q[0] + q[1] + q[2];
        }
        if p >= 2 {
            w += q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[0] * q[1] + q[0] * q[2] + q[1] * q[2];
        }
        w
    }

    /// `‖u‖_{H_p}` from a forward spectrum, via Parseval with box measure.
    pub fn sobolev_norm_spectrum(&self, spectrum: &[C64], p: u32) -> f64 {
        let scale = self.cell_volume() / self.len() as f64;
        let sum: f64 = spectrum
            .iter()
            .enumerate()
            .map(|(idx, z)| Self::sobolev_weight(self.wavevector(idx), p) * z.norm_sqr())
            .sum();
        (scale * sum).sqrt()
    }

    pub fn sobolev_norm_r(&self, field: &[f64], p: u32) -> f64 {
        self.sobolev_norm_spectrum(&self.fft_r(field), p)
    }

    pub fn sobolev_norm_c(&self, field: &[C64], p: u32) -> f64 {
        self.sobolev_norm_spectrum(&self.fft_c(field), p)
    }

    /// Splits a vector field into divergence-free and curl-free parts.
    /// The `k = 0` mode is assigned entirely to the transverse part.
    pub fn helmholtz(&self, e: &VectorField) -> (VectorField, VectorField) {
        let s: [ComplexField; 3] = std::array::from_fn(|c| self.fft_r(&e[c]));
        let (t, l) = self.helmholtz_spectrum(&s);
        (t.map(|x| self.ifft_r(x)), l.map(|x| self.ifft_r(x)))
    }

    pub fn helmholtz_spectrum(&self, s: &[ComplexField; 3]) -> ([ComplexField; 3], [ComplexField; 3]) {
        let len = self.len();
        let mut t: [ComplexField; 3] = std::array::from_fn(|_| vec![C64::new(0.0, 0.0); len]);
        let mut l: [ComplexField; 3] = std::array::from_fn(|_| vec![C64::new(0.0, 0.0); len]);
        for idx in 0..len {
            let k = self.wavevector(idx);
            let k2 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
            if k2 == 0.0 {
                for c in 0..3 {
                    t[c][idx] = s[c][idx];
                }
                continue;
            }
            let kdot = (s[0][idx] * k[0] + s[1][idx] * k[1] + s[2][idx] * k[2]) / k2;
            for c in 0..3 {
                l[c][idx] = kdot * k[c];
                t[c][idx] = s[c][idx] - l[c][idx];
            }
        }
        (t, l)
    }
}

pub(crate) fn sub(a: &[f64], b: &[f64]) -> RealField {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}
