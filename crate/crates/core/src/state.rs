//! The evolved state `u = (A, E, φ, π)`, its Sobolev norms and initial data.
//!
//! Only `(φ, π)` are stored; the conjugate rows are their complex conjugates
//! by construction.

use log::warn;
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::constraint::{charge_density, constraint_residual_field, solve_ec};
use crate::error::{Error, Result};
use crate::geometry::GridGeometry;
use crate::model::ModelSpec;
use crate::spectral::{ComplexField, SpectralGrid, VectorField};
use crate::C64;

#[derive(Clone, Debug, PartialEq)]
pub struct FieldState {
    pub a: Vec<VectorField>,
    pub e: Vec<VectorField>,
    pub phi: Vec<ComplexField>,
    pub pi: Vec<ComplexField>,
    pub time: f64,
}

fn zero_vector(len: usize) -> VectorField {
    [vec![0.0; len], vec![0.0; len], vec![0.0; len]]
}

impl FieldState {
    pub fn zeros(n_v: usize, n_c: usize, len: usize) -> Self {
        FieldState {
            a: (0..n_v).map(|_| zero_vector(len)).collect(),
            e: (0..n_v).map(|_| zero_vector(len)).collect(),
            phi: vec![vec![C64::new(0.0, 0.0); len]; n_c],
            pi: vec![vec![C64::new(0.0, 0.0); len]; n_c],
            time: 0.0,
        }
    }

    pub fn n_v(&self) -> usize {
        self.a.len()
    }

    pub fn n_c(&self) -> usize {
        self.phi.len()
    }

    pub fn len(&self) -> usize {
        self.phi.first().map(|f| f.len()).or_else(|| self.a.first().map(|v| v[0].len())).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_finite(&self) -> bool {
        self.a.iter().chain(&self.e).all(|v| v.iter().all(|c| c.iter().all(|x| x.is_finite())))
            && self.phi.iter().chain(&self.pi).all(|f| f.iter().all(|z| z.is_finite()))
    }

    /// `self += s · other` on every field; time is untouched.
    pub fn add_scaled(&mut self, s: f64, other: &FieldState) {
        for (x, y) in self.a.iter_mut().zip(&other.a).chain(self.e.iter_mut().zip(&other.e)) {
            for (xc, yc) in x.iter_mut().zip(y) {
                for (p, q) in xc.iter_mut().zip(yc) {
                    *p += s * q;
                }
            }
        }
        for (x, y) in self.phi.iter_mut().zip(&other.phi).chain(self.pi.iter_mut().zip(&other.pi)) {
            for (p, q) in x.iter_mut().zip(y) {
                *p += q * s;
            }
        }
    }

    pub fn scaled(&self, s: f64) -> FieldState {
        let mut out = FieldState::zeros(self.n_v(), self.n_c(), self.len());
        out.add_scaled(s, self);
        out.time = self.time;
        out
    }

    pub fn difference(&self, other: &FieldState) -> FieldState {
        let mut out = self.clone();
        out.add_scaled(-1.0, other);
        out
    }

    /// True when every field is exactly zero.
    pub fn is_zero(&self) -> bool {
        self.a.iter().chain(&self.e).all(|v| v.iter().all(|c| c.iter().all(|&x| x == 0.0)))
            && self.phi.iter().chain(&self.pi).all(|f| f.iter().all(|z| *z == C64::new(0.0, 0.0)))
    }
}

/// Per-group Sobolev norms. Each group norm is the root of the sum over its
/// components; the composite counts the conjugate rows `(φ̄, π̄)` as well.
#[derive(Clone, Debug, PartialEq)]
pub struct SobolevReport {
    pub a_h1: f64,
    pub a_h2: f64,
    pub e_h1: f64,
    pub e_h2: f64,
    pub phi_h1: f64,
    pub phi_h2: f64,
    pub pi_h1: f64,
    pub pi_h2: f64,
    pub composite: f64,
}

/// `(‖f‖²_{H₁}, ‖f‖²_{H₂})` from one spectrum.
fn h1_h2_sq(grid: &SpectralGrid, spectrum: &[C64]) -> (f64, f64) {
    let (mut s1, mut s2) = (0.0, 0.0);
    for (idx, c) in spectrum.iter().enumerate() {
        let k = grid.wavevector(idx);
        let m = c.norm_sqr();
        s1 += SpectralGrid::sobolev_weight(k, 1) * m;
        s2 += SpectralGrid::sobolev_weight(k, 2) * m;
    }
    let scale = grid.cell_volume() / grid.len() as f64;
    (s1 * scale, s2 * scale)
}

pub fn sobolev_report(state: &FieldState, grid: &SpectralGrid) -> SobolevReport {
    let real_group = |g: &[VectorField]| {
        g.iter().flat_map(|v| v.iter()).map(|c| h1_h2_sq(grid, &grid.fft_r(c))).fold((0.0, 0.0), |acc, x| (acc.0 + x.0, acc.1 + x.1))
    };
    let complex_group = |g: &[ComplexField]| {
        g.iter().map(|c| h1_h2_sq(grid, &grid.fft_c(c))).fold((0.0, 0.0), |acc, x| (acc.0 + x.0, acc.1 + x.1))
    };
    let a = real_group(&state.a);
    let e = real_group(&state.e);
    let phi = complex_group(&state.phi);
    let pi = complex_group(&state.pi);
    SobolevReport {
        a_h1: a.0.sqrt(),
        a_h2: a.1.sqrt(),
        e_h1: e.0.sqrt(),
        e_h2: e.1.sqrt(),
        phi_h1: phi.0.sqrt(),
        phi_h2: phi.1.sqrt(),
        pi_h1: pi.0.sqrt(),
        pi_h2: pi.1.sqrt(),
        composite: (a.1 + e.0 + 2.0 * phi.1 + 2.0 * pi.0).sqrt(),
    }
}

/// `‖u‖_ℋ` with `ℋ = (H₂ × H₁)³`.
pub fn state_norm(state: &FieldState, grid: &SpectralGrid) -> f64 {
    sobolev_report(state, grid).composite
}

/// Sobolev norm of a single real field, `p ∈ {1, 2}`.
pub fn sobolev_norm(field: &[f64], p: u32, grid: &SpectralGrid) -> f64 {
    grid.sobolev_norm_r(field, p)
}

/// `‖u‖_{L₃}/‖u‖_{H₁}`, monitored against [`EMBEDDING_CONSTANT`].
pub fn embedding_ratio(field: &[f64], grid: &SpectralGrid) -> f64 {
    let h1 = grid.sobolev_norm_r(field, 1);
    if h1 == 0.0 {
        return 0.0;
    }
    grid.lp_norm_r(field, 3.0) / h1
}

/// Embedding constant calibrated on the default box `L = 2π` for band limits up to `n/4`.
pub const EMBEDDING_CONSTANT: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InitConfig {
    pub seed: u64,
    pub amplitude: f64,
    /// Largest integer mode kept on each axis.
    pub band: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct InitReport {
    pub iterations: usize,
    /// Relative residual `‖𝒞‖_{L₂}/‖E‖_{H₁}` (absolute when `E = 0`).
    pub residual: f64,
    /// Charge-zero-mode magnitude before neutralization.
    pub net_charge: f64,
    pub warnings: Vec<String>,
}

fn random_spectrum(rng: &mut ChaCha8Rng, grid: &SpectralGrid, band: usize) -> ComplexField {
    let mut spec = vec![C64::new(0.0, 0.0); grid.len()];
    for (idx, c) in spec.iter_mut().enumerate() {
        let [i, j, l] = grid.split_index(idx);
        let m = [grid.mode_index(i), grid.mode_index(j), grid.mode_index(l)];
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        if m.iter().all(|x| x.unsigned_abs() as usize <= band) {
            let k = grid.wavevector(idx);
            let w = 1.0 / (1.0 + k[0] * k[0] + k[1] * k[1] + k[2] * k[2]);
            *c = C64::new(re, im) * w;
        }
    }
    spec
}

fn rms_c(f: &[C64]) -> f64 {
    (f.iter().map(|z| z.norm_sqr()).sum::<f64>() / f.len() as f64).sqrt()
}

/// Band-limited random real field with RMS `amplitude`.
pub fn random_real_field(rng: &mut ChaCha8Rng, grid: &SpectralGrid, band: usize, amplitude: f64) -> Vec<f64> {
    let f: Vec<f64> = grid.ifft_c(random_spectrum(rng, grid, band)).into_iter().map(|z| z.re).collect();
    let rms = (f.iter().map(|x| x * x).sum::<f64>() / f.len() as f64).sqrt();
    if rms == 0.0 {
        return f;
    }
    f.into_iter().map(|x| x * amplitude / rms).collect()
}

/// Band-limited random complex field with RMS `amplitude`.
pub fn random_complex_field(rng: &mut ChaCha8Rng, grid: &SpectralGrid, band: usize, amplitude: f64) -> ComplexField {
    let f = grid.ifft_c(random_spectrum(rng, grid, band));
    let rms = rms_c(&f);
    if rms == 0.0 {
        return f;
    }
    f.into_iter().map(|z| z * (amplitude / rms)).collect()
}

/// Random smooth state with no constraint imposed.
pub fn random_state(n_v: usize, n_c: usize, grid: &SpectralGrid, cfg: &InitConfig) -> FieldState {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut s = FieldState::zeros(n_v, n_c, grid.len());
    if cfg.amplitude == 0.0 {
        return s;
    }
    for v in s.a.iter_mut().chain(s.e.iter_mut()) {
        for c in v.iter_mut() {
            *c = random_real_field(&mut rng, grid, cfg.band, cfg.amplitude);
        }
    }
    for f in s.phi.iter_mut().chain(s.pi.iter_mut()) {
        *f = random_complex_field(&mut rng, grid, cfg.band, cfg.amplitude);
    }
    s
}

/// Random smooth fields, then `E_L ← E_C(u)` iterated to a fixed point with
/// the net charge removed by shifting `π` along the Killing vectors.
pub fn make_initial_data(model: &ModelSpec, grid: &SpectralGrid, cfg: &InitConfig) -> Result<(FieldState, InitReport)> {
    if !(cfg.amplitude >= 0.0) || !cfg.amplitude.is_finite() {
        return Err(Error::InitialData(format!("amplitude must be finite and nonnegative, got {}", cfg.amplitude)));
    }
    if cfg.band == 0 || 3 * cfg.band > grid.n() {
        return Err(Error::InitialData(format!("band {} must lie in 1..={}", cfg.band, grid.n() / 3)));
    }
    let mut state = random_state(model.n_v(), model.n_c(), grid, cfg);
    let mut report = InitReport { iterations: 0, residual: 0.0, net_charge: 0.0, warnings: vec![] };
    if cfg.amplitude == 0.0 {
        return Ok((state, report));
    }
    let (e_t, _) = helmholtz_all(&state.e, grid);
    let mut first = true;
    for it in 0..60 {
        report.iterations = it + 1;
        let rho = charge_density(&state, model, grid)?;
        let zero: Vec<f64> = rho.rho.iter().map(|r| r.iter().sum::<f64>() / r.len() as f64).collect();
        let zero_norm = zero.iter().map(|z| z * z).sum::<f64>().sqrt();
        if first {
            report.net_charge = zero_norm;
            first = false;
        }
        if zero_norm > 0.0 && model.killing.is_gauged() {
            neutralize(&mut state, model, grid, &zero, &mut report)?;
        }
        let rho = charge_density(&state, model, grid)?;
        let ec = solve_ec(&rho, grid);
        for (a, e) in state.e.iter_mut().enumerate() {
            for s in 0..3 {
                e[s] = e_t[a][s].iter().zip(&ec.e_c[a][s]).map(|(x, y)| x + y).collect();
            }
        }
        let res = relative_residual(&state, model, grid)?;
        report.residual = res;
        if res <= 1e-13 {
            break;
        }
    }
    if report.residual > 1e-10 {
        let msg = format!("initial constraint residual {:.3e} above 1e-10", report.residual);
        warn!("{msg}");
        report.warnings.push(msg);
    }
    Ok((state, report))
}

fn relative_residual(state: &FieldState, model: &ModelSpec, grid: &SpectralGrid) -> Result<f64> {
    let c = constraint_residual_field(state, model, grid)?;
    let l2 = c.iter().map(|f| grid.l2_norm_r(f).powi(2)).sum::<f64>().sqrt();
    let e = state.e.iter().flat_map(|v| v.iter()).map(|f| grid.sobolev_norm_r(f, 1).powi(2)).sum::<f64>().sqrt();
    Ok(if e > 0.0 { l2 / e } else { l2 })
}

fn helmholtz_all(e: &[VectorField], grid: &SpectralGrid) -> (Vec<VectorField>, Vec<VectorField>) {
    e.iter().map(|v| grid.helmholtz(v)).unzip()
}

/// Solves `M λ = −ρ̄` with `M_ac = −2 ⟨h^{ab} Re(g X_c X̄_b)⟩` and shifts `π += λ_c X_c`.
fn neutralize(state: &mut FieldState, model: &ModelSpec, grid: &SpectralGrid, zero: &[f64], report: &mut InitReport) -> Result<()> {
    let (nv, nc, len) = (model.n_v(), model.n_c(), grid.len());
    let dphi: Vec<[ComplexField; 3]> =
        if model.kinetic.is_constant() { vec![] } else { state.phi.iter().map(|f| grid.grad_c(f)).collect() };
    let geo = GridGeometry::new(model, &state.phi, &dphi, len)?;
    let mut m = DMatrix::<f64>::zeros(nv, nv);
    let mut xb = vec![C64::new(0.0, 0.0); nc];
    let mut xc = vec![C64::new(0.0, 0.0); nc];
    for p in 0..len {
        for b in 0..nv {
            for c in 0..nv {
                for i in 0..nc {
                    xb[i] = geo.x(p, b, i);
                    xc[i] = geo.x(p, c, i);
                }
                let inner = geo.re_inner(p, &xc, &xb);
                for a in 0..nv {
                    m[(a, c)] += -2.0 * geo.kin.h_inv(p, a, b) * inner / len as f64;
                }
            }
        }
    }
    let rhs = DVector::from_iterator(nv, zero.iter().map(|z| -4.0 * std::f64::consts::PI * z));
    let lambda = m.clone().svd(true, true).solve(&rhs, 1e-12).map_err(|e| Error::InitialData(e.to_string()))?;
    let achieved = &m * &lambda - &rhs;
    if achieved.norm() > 1e-8 * rhs.norm().max(1e-300) {
        let msg = format!("net charge {:.3e} cannot be removed by the gauged isometries; dropped as a zero mode", rhs.norm());
        warn!("{msg}");
        if !report.warnings.contains(&msg) {
            report.warnings.push(msg);
        }
    }
    for p in 0..len {
        for i in 0..nc {
            let mut shift = C64::new(0.0, 0.0);
            for c in 0..nv {
                shift += geo.x(p, c, i) * lambda[c];
            }
            state.pi[i][p] += shift;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::SpectralGrid;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn sine_h1_norm() {
        let g = SpectralGrid::new(32, 2.0 * PI).unwrap();
        let f: Vec<f64> = (0..g.len()).map(|p| g.position(p)[0].sin()).collect();
        let l3 = g.box_length().powi(3);
        assert!((sobolev_norm(&f, 1, &g).powi(2) - l3).abs() <= 1e-10 * l3);
        assert_eq!(sobolev_norm(&vec![0.0; g.len()], 2, &g), 0.0);
    }

    #[test]
    fn spectral_norm_matches_finite_differences() {
        let g = SpectralGrid::new(64, 2.0 * PI).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let f = random_real_field(&mut rng, &g, 4, 1.0);
        let n = g.n();
        let h = g.spacing();
        let at = |i: usize, j: usize, l: usize| f[(i % n * n + j % n) * n + l % n];
        let mut grad_sq = 0.0;
        for i in 0..n {
            for j in 0..n {
                for l in 0..n {
                    let d4 = |m: [usize; 3]| {
                        let shift = |k: isize| {
                            let ii = (i as isize + k * m[0] as isize).rem_euclid(n as isize) as usize;
                            let jj = (j as isize + k * m[1] as isize).rem_euclid(n as isize) as usize;
                            let ll = (l as isize + k * m[2] as isize).rem_euclid(n as isize) as usize;
                            at(ii, jj, ll)
                        };
                        (shift(-2) - shift(2) + 8.0 * (shift(1) - shift(-1))) / (12.0 * h)
                    };
                    for m in [[1, 0, 0], [0, 1, 0], [0, 0, 1]] {
                        grad_sq += d4(m).powi(2);
                    }
                }
            }
        }
        let fd = (g.l2_norm_r(&f).powi(2) + grad_sq * g.cell_volume()).sqrt();
        let sp = sobolev_norm(&f, 1, &g);
        assert!((fd - sp).abs() <= 0.01 * sp, "{fd} {sp}");
    }

    #[test]
    fn composite_is_sum_of_squares() {
        let g = SpectralGrid::new(8, 2.0 * PI).unwrap();
        let s = random_state(2, 1, &g, &InitConfig { seed: 1, amplitude: 0.3, band: 2 });
        let r = sobolev_report(&s, &g);
        let want = r.a_h2.powi(2) + r.e_h1.powi(2) + 2.0 * r.phi_h2.powi(2) + 2.0 * r.pi_h1.powi(2);
        assert!((r.composite.powi(2) - want).abs() <= 1e-12 * want);
        assert!(r.a_h1 <= r.a_h2 && r.pi_h1 <= r.pi_h2);
    }

    #[test]
    fn zero_amplitude_is_vacuum() {
        let g = SpectralGrid::new(8, 2.0 * PI).unwrap();
        let (s, rep) = make_initial_data(&ModelSpec::abelian_higgs(), &g, &InitConfig { seed: 3, amplitude: 0.0, band: 2 }).unwrap();
        assert!(s.is_zero());
        assert_eq!(rep.residual, 0.0);
    }

    #[test]
    fn initial_data_is_deterministic_and_constrained() {
        let g = SpectralGrid::new(16, 2.0 * PI).unwrap();
        let cfg = InitConfig { seed: 9, amplitude: 0.1, band: 3 };
        let (a, rep) = make_initial_data(&ModelSpec::abelian_higgs(), &g, &cfg).unwrap();
        let (b, _) = make_initial_data(&ModelSpec::abelian_higgs(), &g, &cfg).unwrap();
        assert_eq!(a, b);
        assert!(rep.residual <= 1e-10, "{}", rep.residual);
        assert!(rep.warnings.is_empty());
    }

    #[test]
    fn embedding_monitor_holds_on_samples() {
        let g = SpectralGrid::new(16, 2.0 * PI).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for band in 1..=4 {
            for _ in 0..10 {
                let f = random_real_field(&mut rng, &g, band, 1.0);
                assert!(embedding_ratio(&f, &g) <= EMBEDDING_CONSTANT);
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn parseval_grid_vs_spectrum(seed in 0u64..1000, band in 1usize..5) {
            let g = SpectralGrid::new(16, 2.0 * PI).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let f = random_real_field(&mut rng, &g, band, 1.0);
            let grid_sum = (f.iter().map(|x| x * x).sum::<f64>() * g.cell_volume()).sqrt();
            let spec = g.sobolev_norm_spectrum(&g.fft_r(&f), 0);
            prop_assert!((grid_sum - spec).abs() <= 1e-12 * grid_sum);
        }

        #[test]
        fn helmholtz_projectors(seed in 0u64..1000) {
            let g = SpectralGrid::new(8, 2.0 * PI).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let e: VectorField = std::array::from_fn(|_| random_real_field(&mut rng, &g, 2, 1.0));
            let (t, l) = g.helmholtz(&e);
            let norm2: f64 = e.iter().map(|c| c.iter().map(|x| x * x).sum::<f64>()).sum();
            let mut inner = 0.0;
            for s in 0..3 {
                for p in 0..g.len() {
                    prop_assert!((t[s][p] + l[s][p] - e[s][p]).abs() <= 1e-13);
                    inner += t[s][p] * l[s][p];
                }
            }
            prop_assert!(inner.abs() <= 1e-12 * norm2);
            let (tt, tl) = g.helmholtz(&t);
            let (lt, ll) = g.helmholtz(&l);
            for s in 0..3 {
                for p in 0..g.len() {
                    prop_assert!((tt[s][p] - t[s][p]).abs() <= 1e-12);
                    prop_assert!((ll[s][p] - l[s][p]).abs() <= 1e-12);
                    prop_assert!(tl[s][p].abs() <= 1e-12 && lt[s][p].abs() <= 1e-12);
                }
            }
        }
    }
}
