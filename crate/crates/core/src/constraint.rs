//! Charge density, the curl-free field `E_C` and the Gauss constraint.
//!
//! With `Π^a_s = h_ab E^b_s + k_ab B^b_s` the Gauss law reads
//! `∂_s E^a_s = 4πρ^a`, where
//!
//! ```text
//! 4πρ^a = h^{ab} [ −∂_s h_bc E^c_s − ∂_s k_bc B^c_s + k_bc f^c_de A^d·B^e
//!                  − f^c_bd A^d·Π^c − 2 Re(g_{ij̄} X^i_b π̄^j) ]
//! ```

use std::f64::consts::PI;

use crate::error::Result;
use crate::gauge::{field_strength, FieldStrengthEval};
use crate::geometry::GridGeometry;
use crate::model::ModelSpec;
use crate::spectral::{ComplexField, RealField, SpectralGrid, VectorField};
use crate::state::FieldState;
use crate::C64;

#[derive(Clone, Debug, PartialEq)]
pub struct ChargeDensity {
    pub rho: Vec<RealField>,
    /// `(Σ_a ⟨ρ^a⟩²)^{1/2}`, the net charge per unit volume.
    pub zero_mode: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConstraintField {
    pub e_c: Vec<VectorField>,
    /// Mean of each `ρ^a`, dropped by the solve.
    pub dropped_zero_mode: Vec<f64>,
}

pub fn charge_density(state: &FieldState, model: &ModelSpec, grid: &SpectralGrid) -> Result<ChargeDensity> {
    let dphi: Vec<[ComplexField; 3]> =
        if model.kinetic.is_constant() { vec![] } else { state.phi.iter().map(|f| grid.grad_c(f)).collect() };
    let geo = GridGeometry::new(model, &state.phi, &dphi, grid.len())?;
    let fs = field_strength(&model.algebra, &state.a, grid);
    Ok(charge_density_with(state, model, grid, &geo, &fs))
}

/// As [`charge_density`] with the geometry and field strength supplied.
pub fn charge_density_with(
    state: &FieldState,
    model: &ModelSpec,
    grid: &SpectralGrid,
    geo: &GridGeometry,
    fs: &FieldStrengthEval,
) -> ChargeDensity {
    let (nv, nc, len) = (model.n_v(), model.n_c(), grid.len());
    let alg = &model.algebra;
    let kin = &geo.kin;
    let abelian = alg.is_abelian();
    let gauged = model.killing.is_gauged();
    let mut rho: Vec<RealField> = vec![vec![0.0; len]; nv];
    let mut bracket = vec![0.0; nv];
    let mut pi_c = vec![[0.0; 3]; nv];
    let mut xb = vec![C64::new(0.0, 0.0); nc];
    let mut pi = vec![C64::new(0.0, 0.0); nc];
    for p in 0..len {
        for i in 0..nc {
            pi[i] = state.pi[i][p];
        }
        if !abelian {
            for c in 0..nv {
                for s in 0..3 {
                    pi_c[c][s] = (0..nv).map(|e| kin.h(p, c, e) * state.e[e][s][p] + kin.k(p, c, e) * fs.b[e][s][p]).sum();
                }
            }
        }
        for b in 0..nv {
            let mut acc = 0.0;
            if !kin.constant {
                for c in 0..nv {
                    for s in 0..3 {
                        acc -= kin.dh(s, p, b, c) * state.e[c][s][p] + kin.dk(s, p, b, c) * fs.b[c][s][p];
                    }
                }
            }
            if !abelian {
                for c in 0..nv {
                    for d in 0..nv {
                        let a_dot_pi: f64 = (0..3).map(|s| state.a[d][s][p] * pi_c[c][s]).sum();
                        acc -= alg.f(c, b, d) * a_dot_pi;
                        let kbc = kin.k(p, b, c);
                        if kbc != 0.0 {
                            for e in 0..nv {
                                let fcde = alg.f(c, d, e);
                                if fcde != 0.0 {
                                    let ab: f64 = (0..3).map(|s| state.a[d][s][p] * fs.b[e][s][p]).sum();
                                    acc += kbc * fcde * ab;
                                }
                            }
                        }
                    }
                }
            }
            if gauged {
                for i in 0..nc {
                    xb[i] = geo.x(p, b, i);
                }
                acc -= 2.0 * geo.re_inner(p, &xb, &pi);
            }
            bracket[b] = acc;
        }
        for a in 0..nv {
            let four_pi_rho: f64 = (0..nv).map(|b| kin.h_inv(p, a, b) * bracket[b]).sum();
            rho[a][p] = four_pi_rho / (4.0 * PI);
        }
    }
    for r in rho.iter_mut() {
        grid.dealias_r(r);
    }
    let zero_mode = rho.iter().map(|r| (r.iter().sum::<f64>() / len as f64).powi(2)).sum::<f64>().sqrt();
    ChargeDensity { rho, zero_mode }
}

/// `Ê_C = −i k/|k|² · 4πρ̂` for `k ≠ 0`; the zero mode of `ρ` is dropped.
pub fn solve_ec(rho: &ChargeDensity, grid: &SpectralGrid) -> ConstraintField {
    let len = grid.len();
    let mut e_c = Vec::with_capacity(rho.rho.len());
    let mut dropped = Vec::with_capacity(rho.rho.len());
    for r in &rho.rho {
        let spec = grid.fft_r(r);
        dropped.push(spec[0].re / len as f64);
        let mut comps: [ComplexField; 3] = std::array::from_fn(|_| vec![C64::new(0.0, 0.0); len]);
        for (idx, c) in spec.iter().enumerate() {
            let k = grid.wavevector(idx);
            let k2 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
            if k2 == 0.0 {
                continue;
            }
            let q = c * (4.0 * PI / k2);
            for s in 0..3 {
                comps[s][idx] = C64::new(q.im * k[s], -q.re * k[s]);
            }
        }
        let [x, y, z] = comps;
        e_c.push([grid.ifft_r(x), grid.ifft_r(y), grid.ifft_r(z)]);
    }
    if dropped.iter().any(|d| d.abs() > 1e-12 * rho.rho.iter().map(|r| grid.l2_norm_r(r)).fold(0.0, f64::max)) {
        log::debug!("charge zero mode {dropped:?} dropped from the Poisson solve");
    }
    ConstraintField { e_c, dropped_zero_mode: dropped }
}

/// `𝒞^a = −∂_s E^a_s + 4πρ^a`.
pub fn constraint_residual_field(state: &FieldState, model: &ModelSpec, grid: &SpectralGrid) -> Result<Vec<RealField>> {
    let rho = charge_density(state, model, grid)?;
    Ok(residual_from(state, &rho, grid))
}

pub fn residual_from(state: &FieldState, rho: &ChargeDensity, grid: &SpectralGrid) -> Vec<RealField> {
    state
        .e
        .iter()
        .zip(&rho.rho)
        .map(|(e, r)| grid.div(e).iter().zip(r).map(|(d, q)| -d + 4.0 * PI * q).collect())
        .collect()
}

/// `‖𝒞‖_{L₂}` over all gauge indices.
pub fn constraint_residual(state: &FieldState, model: &ModelSpec, grid: &SpectralGrid) -> Result<f64> {
    let c = constraint_residual_field(state, model, grid)?;
    Ok(c.iter().map(|f| grid.l2_norm_r(f).powi(2)).sum::<f64>().sqrt())
}

/// Both sides of the equivalence `E_L = E_C ⇔ ∂_s E^s = 4πρ`.
#[derive(Clone, Debug, PartialEq)]
pub struct EquivalenceReport {
    /// `‖E_L − E_C‖_{L₂}`.
    pub longitudinal_gap: f64,
    /// `‖𝒞‖_{L₂}`.
    pub residual: f64,
    /// `1 + ‖E‖_{H₁}`, the scale both sides are compared against.
    pub scale: f64,
    pub tol: f64,
    pub gap_small: bool,
    pub residual_small: bool,
}

impl EquivalenceReport {
    pub fn equivalence_holds(&self) -> bool {
        self.gap_small == self.residual_small
    }
}

/// Relative tolerance used for the equivalence check.
pub const EQUIVALENCE_TOL: f64 = 1e-8;

pub fn verify_lemma3(state: &FieldState, model: &ModelSpec, grid: &SpectralGrid, tol: f64) -> Result<EquivalenceReport> {
    let rho = charge_density(state, model, grid)?;
    let ec = solve_ec(&rho, grid);
    let mut gap = 0.0;
    for (e, c) in state.e.iter().zip(&ec.e_c) {
        let (_, el) = grid.helmholtz(e);
        for s in 0..3 {
            let d: Vec<f64> = el[s].iter().zip(&c[s]).map(|(x, y)| x - y).collect();
            gap += grid.l2_norm_r(&d).powi(2);
        }
    }
    let res = residual_from(state, &rho, grid);
    let residual = res.iter().map(|f| grid.l2_norm_r(f).powi(2)).sum::<f64>().sqrt();
    let e_h1 = state.e.iter().flat_map(|v| v.iter()).map(|f| grid.sobolev_norm_r(f, 1).powi(2)).sum::<f64>().sqrt();
    let scale = 1.0 + e_h1;
    let longitudinal_gap = gap.sqrt();
    Ok(EquivalenceReport {
        longitudinal_gap,
        residual,
        scale,
        tol,
        gap_small: longitudinal_gap <= tol * scale,
        residual_small: residual <= tol * scale,
    })
}

/// Smallest `C′` with `‖𝒞(t)‖² ≤ ‖𝒞(0)‖² exp(C′ ∫₀ᵗ ‖E‖_{H₁})` along a recorded
/// trajectory; `None` when `𝒞(0)` vanishes or no time has elapsed.
pub fn fit_decay_constant(times: &[f64], residuals: &[f64], e_h1: &[f64]) -> Option<f64> {
    let c0 = *residuals.first()?;
    if c0 <= 0.0 || times.len() < 2 {
        return None;
    }
    let mut integral = 0.0;
    let mut best = f64::NEG_INFINITY;
    for n in 1..times.len() {
        integral += 0.5 * (e_h1[n] + e_h1[n - 1]) * (times[n] - times[n - 1]);
        if integral > 0.0 && residuals[n] > 0.0 {
            best = best.max((residuals[n] * residuals[n] / (c0 * c0)).ln() / integral);
        }
    }
    best.is_finite().then_some(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::{random_real_field, random_state, InitConfig};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn grid() -> SpectralGrid {
        SpectralGrid::new(16, 2.0 * PI).unwrap()
    }

    #[test]
    fn vacuum_has_no_charge() {
        let g = grid();
        let s = FieldState::zeros(1, 1, g.len());
        let rho = charge_density(&s, &ModelSpec::abelian_higgs(), &g).unwrap();
        assert!(rho.rho[0].iter().all(|&x| x == 0.0));
        let ec = solve_ec(&rho, &g);
        assert!(ec.e_c[0].iter().all(|c| c.iter().all(|&x| x == 0.0)));
        assert_eq!(constraint_residual(&s, &ModelSpec::abelian_higgs(), &g).unwrap(), 0.0);
    }

    #[test]
    fn scalar_current_only() {
        let g = grid();
        let s = random_state(1, 1, &g, &InitConfig { seed: 2, amplitude: 0.2, band: 2 });
        let rho = charge_density(&s, &ModelSpec::abelian_higgs(), &g).unwrap();
        // X = −iφ, so 4πρ = −2 Re(−iφ π̄) = −2 Im(φ π̄)
        let mut hand: Vec<f64> = (0..g.len()).map(|p| -2.0 * (s.phi[0][p] * s.pi[0][p].conj()).im / (4.0 * PI)).collect();
        g.dealias_r(&mut hand);
        for p in 0..g.len() {
            assert!((rho.rho[0][p] - hand[p]).abs() < 1e-14);
        }
    }

    #[test]
    fn single_mode_poisson() {
        let g = grid();
        let rho: Vec<f64> = (0..g.len()).map(|p| g.position(p)[0].cos()).collect();
        let ec = solve_ec(&ChargeDensity { rho: vec![rho.clone()], zero_mode: 0.0 }, &g);
        for p in 0..g.len() {
            // ∂_x E = 4π cos x  ⇒  E_x = 4π sin x
            assert!((ec.e_c[0][0][p] - 4.0 * PI * g.position(p)[0].sin()).abs() < 1e-12);
            assert!(ec.e_c[0][1][p].abs() < 1e-12);
        }
        let div = g.div(&ec.e_c[0]);
        for p in 0..g.len() {
            assert!((div[p] - 4.0 * PI * rho[p]).abs() < 1e-12);
        }
    }

    #[test]
    fn ec_is_curl_free_and_zero_mode_dropped() {
        let g = grid();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let rho: Vec<f64> = random_real_field(&mut rng, &g, 4, 1.0).iter().map(|x| x + 0.3).collect();
        let ec = solve_ec(&ChargeDensity { rho: vec![rho.clone()], zero_mode: 0.3 }, &g);
        assert!((ec.dropped_zero_mode[0] - rho.iter().sum::<f64>() / g.len() as f64).abs() < 1e-14);
        let curl = g.curl(&ec.e_c[0]);
        let scale = ec.e_c[0].iter().map(|c| g.l2_norm_r(c)).sum::<f64>();
        let c = curl.iter().map(|c| g.l2_norm_r(c)).sum::<f64>();
        assert!(c <= 1e-10 * scale);
        let mean = ec.dropped_zero_mode[0];
        let div = g.div(&ec.e_c[0]);
        let err: Vec<f64> = div.iter().zip(&rho).map(|(d, r)| d - 4.0 * PI * (r - mean)).collect();
        assert!(g.l2_norm_r(&err) <= 1e-12 * 4.0 * PI * g.l2_norm_r(&rho));
    }

    #[test]
    fn zeroed_longitudinal_field_leaves_full_charge() {
        let g = grid();
        let mut s = random_state(1, 1, &g, &InitConfig { seed: 5, amplitude: 0.3, band: 3 });
        for c in s.e[0].iter_mut() {
            c.iter_mut().for_each(|x| *x = 0.0);
        }
        let model = ModelSpec::abelian_higgs();
        let rho = charge_density(&s, &model, &g).unwrap();
        let want = rho.rho.iter().map(|r| (4.0 * PI * g.l2_norm_r(r)).powi(2)).sum::<f64>().sqrt();
        let got = constraint_residual(&s, &model, &g).unwrap();
        assert!((got - want).abs() <= 1e-12 * want);
    }

    #[test]
    fn decay_constant_fit() {
        let t = [0.0, 1.0, 2.0];
        let e = [1.0, 1.0, 1.0];
        let c = [1.0, 2f64.sqrt(), 2.0];
        let fit = fit_decay_constant(&t, &c, &e).unwrap();
        assert!((fit - 2f64.ln()).abs() < 1e-12);
        assert_eq!(fit_decay_constant(&t, &[0.0, 1.0, 1.0], &e), None);
    }
}
