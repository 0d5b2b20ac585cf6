//! The nonlinear operator `J(u)`, the exact linear semigroup and the energy.
//!
//! The evolution is `du/dt = 𝒜u + J(u)` with
//!
//! * `dA/dt = E_T + J₁`, `J₁ = E_C` (or `E_L` for the unmodified system)
//! * `dE/dt = ΔA_T + J₂`
//! * `dφ/dt = π`
//! * `dπ/dt = Δφ + J₄`
//!
//! With `Π^b = h_bc E^c + k_bc B^c` and `D_sφ = ∂_sφ + A^a_s X_a`:
//!
//! ```text
//! J₂^a = ∂_r(f^a_bc A^b_r A^c_s) + h^{ab} [ ∂_r h_bc ℱ^c_rs + (∇k_bc × E^c)_s
//!        + f^c_db h_ce (A^d × B^e)_s + 𝒟₁ ]
//! 𝒟₁  = −∂_t h_bc E^c − ∂_t k_bc B^c − (k_bc f^c_de + k_ce f^c_db)(A^d × E^e)
//!        − 2 Re(g_{ij̄} X^i_b conj(D_sφ^j))
//! J₄^m = Γ^m_kl (∂_sφ^k ∂_sφ^l − π^k π^l) + X^m_a ∂_s A^a_s + A^a_s ∇_k X^m_a ∂_sφ^k
//!        − g^{mj̄} g_{lk̄} A^a_s conj(∇_j X^k_a) D_sφ^l + 𝒟₂
//! 𝒟₂  = g^{mj̄} [ ½ conj(∂_j f_ab)(½(E^a·E^b − B^a·B^b) + i E^a·B^b) − ∂_j̄ V ]
//! ```

use crate::constraint::{charge_density_with, solve_ec, ChargeDensity};
use crate::error::{Error, Result};
use crate::gauge::{field_strength_with_gradient, FieldStrengthEval};
use crate::geometry::GridGeometry;
use crate::model::{potential_with, ModelSpec};
use crate::spectral::{ComplexField, RealField, SpectralGrid, VectorField};
use crate::state::FieldState;
use crate::C64;

/// Spatial derivatives and pointwise data shared by `J`, `ρ` and the energy.
pub struct Prepared {
    /// `dphi[i][s] = ∂_s φ^i`.
    pub dphi: Vec<[ComplexField; 3]>,
    /// `da[a][s][r] = ∂_r A^a_s`.
    pub da: Vec<[VectorField; 3]>,
    pub geo: GridGeometry,
    pub fs: FieldStrengthEval,
}

impl Prepared {
    pub fn new(state: &FieldState, model: &ModelSpec, grid: &SpectralGrid) -> Result<Self> {
        let dphi: Vec<[ComplexField; 3]> = state.phi.iter().map(|f| grid.grad_c(f)).collect();
        let da: Vec<[VectorField; 3]> =
            state.a.iter().map(|v| [grid.grad_r(&v[0]), grid.grad_r(&v[1]), grid.grad_r(&v[2])]).collect();
        let geo = GridGeometry::new(model, &state.phi, &dphi, grid.len())?;
        let fs = field_strength_with_gradient(&model.algebra, &state.a, &da, grid);
        Ok(Prepared { dphi, da, geo, fs })
    }

    /// `D_s φ^i` at point `p`.
    #[inline]
    fn cov_dphi(&self, state: &FieldState, p: usize, s: usize, i: usize) -> C64 {
        let mut v = self.dphi[i][s][p];
        for a in 0..self.geo.n_v {
            v += self.geo.x(p, a, i) * state.a[a][s][p];
        }
        v
    }
}

/// The rows of `J(u)`; the `φ` row is identically zero.
#[derive(Clone, Debug, PartialEq)]
pub struct NonlinearEval {
    pub j1: Vec<VectorField>,
    pub j2: Vec<VectorField>,
    pub j4: Vec<ComplexField>,
    /// `h^{ab} 𝒟₁_b`, already included in `j2`.
    pub d1: Vec<VectorField>,
    /// `𝒟₂`, already included in `j4`.
    pub d2: Vec<ComplexField>,
    pub rho: ChargeDensity,
}

impl NonlinearEval {
    pub fn as_state(&self, time: f64) -> FieldState {
        let len = self.j4.first().map(|f| f.len()).or_else(|| self.j1.first().map(|v| v[0].len())).unwrap_or(0);
        FieldState {
            a: self.j1.clone(),
            e: self.j2.clone(),
            phi: vec![vec![C64::new(0.0, 0.0); len]; self.j4.len()],
            pi: self.j4.clone(),
            time,
        }
    }
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

#[inline]
fn vec_at(v: &VectorField, p: usize) -> [f64; 3] {
    [v[0][p], v[1][p], v[2][p]]
}

/// Which longitudinal field drives `dA/dt`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum System {
    /// `J₁ = E_C`, built from the charge density.
    #[default]
    Modified,
    /// `J₁ = E_L`, the unmodified equations.
    Original,
}

pub fn assemble_j(state: &FieldState, model: &ModelSpec, grid: &SpectralGrid) -> Result<NonlinearEval> {
    assemble_j_system(state, model, grid, System::Modified)
}

pub fn assemble_j_system(state: &FieldState, model: &ModelSpec, grid: &SpectralGrid, system: System) -> Result<NonlinearEval> {
    let prep = Prepared::new(state, model, grid)?;
    let rho = charge_density_with(state, model, grid, &prep.geo, &prep.fs);
    let j1 = match system {
        System::Modified => solve_ec(&rho, grid).e_c,
        System::Original => state.e.iter().map(|e| grid.helmholtz(e).1).collect(),
    };
    let (j2, d1) = gauge_row(state, model, grid, &prep);
    let (j4, d2) = scalar_row(state, model, grid, &prep)?;
    let out = NonlinearEval { j1, j2, j4, d1, d2, rho };
    check_finite(&out)?;
    Ok(out)
}

fn check_finite(j: &NonlinearEval) -> Result<()> {
    for (name, rows) in [("J₁", &j.j1), ("J₂", &j.j2)] {
        for v in rows.iter() {
            for c in v.iter() {
                if let Some(p) = c.iter().position(|x| !x.is_finite()) {
                    return Err(Error::NonFinite { quantity: name, point: p });
                }
            }
        }
    }
    for f in &j.j4 {
        if let Some(p) = f.iter().position(|z| !z.is_finite()) {
            return Err(Error::NonFinite { quantity: "J₄", point: p });
        }
    }
    Ok(())
}

fn gauge_row(state: &FieldState, model: &ModelSpec, grid: &SpectralGrid, prep: &Prepared) -> (Vec<VectorField>, Vec<VectorField>) {
    let (nv, nc, len) = (model.n_v(), model.n_c(), grid.len());
    let alg = &model.algebra;
    let abelian = alg.is_abelian();
    let geo = &prep.geo;
    let kin = &geo.kin;
    let fs = &prep.fs;
    let gauged = model.killing.is_gauged();
    let zero_v = || -> VectorField { [vec![0.0; len], vec![0.0; len], vec![0.0; len]] };

    // ∂_r of the masked quadratic part of ℱ
    let mut nonlin: Vec<VectorField> = (0..nv).map(|_| zero_v()).collect();
    if !abelian {
        for a in 0..nv {
            for s in 0..3 {
                let mut acc = vec![0.0; len];
                for r in 0..3 {
                    if r == s {
                        continue;
                    }
                    let mut q = vec![0.0; len];
                    for b in 0..nv {
                        for c in 0..nv {
                            let f = alg.f(a, b, c);
                            if f != 0.0 {
                                for p in 0..len {
                                    q[p] += f * state.a[b][r][p] * state.a[c][s][p];
                                }
                            }
                        }
                    }
                    grid.dealias_r(&mut q);
                    let dq = grid.deriv_r(&q, r);
                    for p in 0..len {
                        acc[p] += dq[p];
                    }
                }
                nonlin[a][s] = acc;
            }
        }
    }

    let mut rest: Vec<VectorField> = (0..nv).map(|_| zero_v()).collect();
    let mut d1: Vec<VectorField> = (0..nv).map(|_| zero_v()).collect();
    let mut r_b = vec![[0.0; 3]; nv];
    let mut d_b = vec![[0.0; 3]; nv];
    let mut xb = vec![C64::new(0.0, 0.0); nc];
    let mut dphi_s = vec![C64::new(0.0, 0.0); nc];
    for p in 0..len {
        for b in 0..nv {
            let mut r = [0.0; 3];
            let mut d = [0.0; 3];
            if !kin.constant {
                for c in 0..nv {
                    let e_c = vec_at(&state.e[c], p);
                    let b_c = vec_at(&fs.b[c], p);
                    // ∂_r h_bc ℱ^c_rs and ∇k_bc × E^c
                    let grad_k = [kin.dk(0, p, b, c), kin.dk(1, p, b, c), kin.dk(2, p, b, c)];
                    let kxe = cross(grad_k, e_c);
                    // ∂_t f_bc = ∂_i f_bc π^i
                    let mut dtf = C64::new(0.0, 0.0);
                    for i in 0..nc {
                        dtf += kin.df(p, i, b, c) * state.pi[i][p];
                    }
                    for s in 0..3 {
                        let mut dh_f = 0.0;
                        for rr in 0..3 {
                            dh_f += kin.dh(rr, p, b, c) * fs.f[c][rr][s][p];
                        }
                        r[s] += dh_f + kxe[s];
                        d[s] -= dtf.re * e_c[s] + dtf.im * b_c[s];
                    }
                }
            }
            if !abelian {
                for c in 0..nv {
                    for dd in 0..nv {
                        let fcdb = alg.f(c, dd, b);
                        let a_d = vec_at(&state.a[dd], p);
                        for e in 0..nv {
                            let hce = kin.h(p, c, e);
                            if fcdb != 0.0 && hce != 0.0 {
                                let axb = cross(a_d, vec_at(&fs.b[e], p));
                                for s in 0..3 {
                                    r[s] += fcdb * hce * axb[s];
                                }
                            }
                            let coeff = kin.k(p, b, c) * alg.f(c, dd, e) + kin.k(p, c, e) * fcdb;
                            if coeff != 0.0 {
                                let axe = cross(a_d, vec_at(&state.e[e], p));
                                for s in 0..3 {
                                    d[s] -= coeff * axe[s];
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
                for s in 0..3 {
                    for i in 0..nc {
                        dphi_s[i] = prep.cov_dphi(state, p, s, i);
                    }
                    d[s] -= 2.0 * geo.re_inner(p, &xb, &dphi_s);
                }
            }
            r_b[b] = r;
            d_b[b] = d;
        }
        for a in 0..nv {
            for s in 0..3 {
                let mut acc_r = 0.0;
                let mut acc_d = 0.0;
                for b in 0..nv {
                    let hab = kin.h_inv(p, a, b);
                    acc_r += hab * r_b[b][s];
                    acc_d += hab * d_b[b][s];
                }
                rest[a][s][p] = acc_r + acc_d;
                d1[a][s][p] = acc_d;
            }
        }
    }
    let mut j2 = nonlin;
    for a in 0..nv {
        for s in 0..3 {
            grid.dealias_r(&mut rest[a][s]);
            grid.dealias_r(&mut d1[a][s]);
            for p in 0..len {
                j2[a][s][p] += rest[a][s][p];
            }
        }
    }
    (j2, d1)
}

fn scalar_row(state: &FieldState, model: &ModelSpec, grid: &SpectralGrid, prep: &Prepared) -> Result<(Vec<ComplexField>, Vec<ComplexField>)> {
    let (nv, nc, len) = (model.n_v(), model.n_c(), grid.len());
    let geo = &prep.geo;
    let kin = &geo.kin;
    let fs = &prep.fs;
    let gauged = model.killing.is_gauged();
    let flat = geo.is_flat();
    let has_potential = !model.superpotential.is_zero()
        || gauged
        || model.killing.fi_constants.iter().any(|&x| x != 0.0)
        || model.extra_quartic != 0.0;
    let nn = nv * nv;

    let div_a: Vec<RealField> = if gauged {
        (0..nv).map(|a| (0..len).map(|p| prep.da[a][0][0][p] + prep.da[a][1][1][p] + prep.da[a][2][2][p]).collect()).collect()
    } else {
        vec![]
    };

    let mut j4 = vec![vec![C64::new(0.0, 0.0); len]; nc];
    let mut d2 = vec![vec![C64::new(0.0, 0.0); len]; nc];
    let mut phi = vec![C64::new(0.0, 0.0); nc];
    let mut pi = vec![C64::new(0.0, 0.0); nc];
    let mut rhs = vec![C64::new(0.0, 0.0); nc]; // terms carrying a lower index j̄, contracted with g^{mj̄}
    // ∇_k X^m_a at the point, stored [(a*nc + m)*nc + k]
    let mut nabla_x = vec![C64::new(0.0, 0.0); nv * nc * nc];
    let mut dphi = vec![[C64::new(0.0, 0.0); 3]; nc];
    let mut cov = vec![[C64::new(0.0, 0.0); 3]; nc];
    let zero_df = vec![C64::new(0.0, 0.0); nc * nn];
    for p in 0..len {
        for i in 0..nc {
            phi[i] = state.phi[i][p];
            pi[i] = state.pi[i][p];
            for s in 0..3 {
                dphi[i][s] = prep.dphi[i][s][p];
                cov[i][s] = if gauged { prep.cov_dphi(state, p, s, i) } else { dphi[i][s] };
            }
        }
        let mut out = vec![C64::new(0.0, 0.0); nc];

        if !flat {
            for m in 0..nc {
                let mut acc = C64::new(0.0, 0.0);
                for k in 0..nc {
                    for l in 0..nc {
                        let gam = geo.gamma(p, m, k, l);
                        let grad = dphi[k][0] * dphi[l][0] + dphi[k][1] * dphi[l][1] + dphi[k][2] * dphi[l][2];
                        acc += gam * (grad - pi[k] * pi[l]);
                    }
                }
                out[m] += acc;
            }
        }

        if gauged {
            for a in 0..nv {
                for m in 0..nc {
                    for k in 0..nc {
                        // ∂_k X^m_a = −i T_a[m][k]
                        let t = model.killing.t(a, m, k);
                        let mut v = C64::new(t.im, -t.re);
                        if !flat {
                            for l in 0..nc {
                                v += geo.gamma(p, m, k, l) * geo.x(p, a, l);
                            }
                        }
                        nabla_x[(a * nc + m) * nc + k] = v;
                    }
                }
            }
            for m in 0..nc {
                let mut acc = C64::new(0.0, 0.0);
                for a in 0..nv {
                    acc += geo.x(p, a, m) * div_a[a][p];
                    for s in 0..3 {
                        let a_s = state.a[a][s][p];
                        if a_s == 0.0 {
                            continue;
                        }
                        let mut t = C64::new(0.0, 0.0);
                        for k in 0..nc {
                            t += nabla_x[(a * nc + m) * nc + k] * dphi[k][s];
                        }
                        acc += t * a_s;
                    }
                }
                out[m] += acc;
            }
            // lower-index piece: g_{lk̄} A^a_s conj(∇_j X^k_a) D_sφ^l
            for j in 0..nc {
                let mut acc = C64::new(0.0, 0.0);
                for a in 0..nv {
                    for s in 0..3 {
                        let a_s = state.a[a][s][p];
                        if a_s == 0.0 {
                            continue;
                        }
                        for k in 0..nc {
                            let nx = nabla_x[(a * nc + k) * nc + j].conj();
                            for l in 0..nc {
                                acc += geo.g(p, l, k) * nx * cov[l][s] * a_s;
                            }
                        }
                    }
                }
                rhs[j] = -acc;
            }
        } else {
            rhs.iter_mut().for_each(|z| *z = C64::new(0.0, 0.0));
        }

        // 𝒟₂ with its lower index j̄ before raising
        let mut d2_low = vec![C64::new(0.0, 0.0); nc];
        if !kin.constant {
            for j in 0..nc {
                let mut acc = C64::new(0.0, 0.0);
                for a in 0..nv {
                    for b in 0..nv {
                        let ee = (0..3).map(|s| state.e[a][s][p] * state.e[b][s][p]).sum::<f64>();
                        let bb = (0..3).map(|s| fs.b[a][s][p] * fs.b[b][s][p]).sum::<f64>();
                        let eb = (0..3).map(|s| state.e[a][s][p] * fs.b[b][s][p]).sum::<f64>();
                        acc += kin.df(p, j, a, b).conj() * 0.5 * C64::new(0.5 * (ee - bb), eb);
                    }
                }
                d2_low[j] = acc;
            }
        }
        if has_potential {
            let h_inv = &kin.h_inv[p * nn..(p + 1) * nn];
            let df = if kin.constant { &zero_df[..] } else { &kin.df[p * nc * nn..(p + 1) * nc * nn] };
            let (_, dv) = match &geo.metric {
                Some(m) => potential_with(model, &m[p], &phi, h_inv, df),
                None => {
                    let m = crate::kahler::metric_at(&model.kahler, &phi)?;
                    potential_with(model, &m, &phi, h_inv, df)
                }
            };
            for j in 0..nc {
                d2_low[j] -= dv[j];
            }
        }
        for m in 0..nc {
            let mut d2m = C64::new(0.0, 0.0);
            let mut rm = C64::new(0.0, 0.0);
            for j in 0..nc {
                let gi = geo.g_inv(p, m, j);
                d2m += gi * d2_low[j];
                rm += gi * rhs[j];
            }
            d2[m][p] = d2m;
            j4[m][p] = out[m] + rm + d2m;
        }
    }
    for f in j4.iter_mut().chain(d2.iter_mut()) {
        grid.dealias_c(f);
    }
    Ok((j4, d2))
}

/// Exact solution of `du/dt = 𝒜u` over `dt`, mode by mode.
pub fn linear_propagate(state: &FieldState, dt: f64, grid: &SpectralGrid) -> FieldState {
    if dt == 0.0 {
        return state.clone();
    }
    let len = grid.len();
    let rot: Vec<(f64, f64, f64)> = (0..len)
        .map(|idx| {
            let k = grid.wavevector(idx);
            let kn = (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]).sqrt();
            if kn == 0.0 {
                (1.0, dt, 0.0)
            } else {
                let (s, c) = (kn * dt).sin_cos();
                (c, s / kn, -kn * s)
            }
        })
        .collect();
    let mut out = state.clone();
    out.time = state.time + dt;
    for v in 0..state.n_v() {
        let ah: [ComplexField; 3] = std::array::from_fn(|s| grid.fft_r(&state.a[v][s]));
        let eh: [ComplexField; 3] = std::array::from_fn(|s| grid.fft_r(&state.e[v][s]));
        let (at, al) = grid.helmholtz_spectrum(&ah);
        let (et, el) = grid.helmholtz_spectrum(&eh);
        let mut na: [ComplexField; 3] = std::array::from_fn(|_| vec![C64::new(0.0, 0.0); len]);
        let mut ne: [ComplexField; 3] = std::array::from_fn(|_| vec![C64::new(0.0, 0.0); len]);
        for s in 0..3 {
            for idx in 0..len {
                let (c, sk, ks) = rot[idx];
                na[s][idx] = at[s][idx] * c + et[s][idx] * sk + al[s][idx];
                ne[s][idx] = at[s][idx] * ks + et[s][idx] * c + el[s][idx];
            }
        }
        let [a0, a1, a2] = na;
        let [e0, e1, e2] = ne;
        out.a[v] = [grid.ifft_r(a0), grid.ifft_r(a1), grid.ifft_r(a2)];
        out.e[v] = [grid.ifft_r(e0), grid.ifft_r(e1), grid.ifft_r(e2)];
    }
    for i in 0..state.n_c() {
        let qh = grid.fft_c(&state.phi[i]);
        let ph = grid.fft_c(&state.pi[i]);
        let mut nq = vec![C64::new(0.0, 0.0); len];
        let mut np = vec![C64::new(0.0, 0.0); len];
        for idx in 0..len {
            let (c, sk, ks) = rot[idx];
            nq[idx] = qh[idx] * c + ph[idx] * sk;
            np[idx] = qh[idx] * ks + ph[idx] * c;
        }
        out.phi[i] = grid.ifft_c(nq);
        out.pi[i] = grid.ifft_c(np);
    }
    out
}

/// `∫ [g(ππ̄ + D_sφ D_sφ̄) + ½h_ab(E^a·E^b + B^a·B^b) + V] d³x`.
pub fn energy_monitor(state: &FieldState, model: &ModelSpec, grid: &SpectralGrid) -> Result<f64> {
    let prep = Prepared::new(state, model, grid)?;
    energy_with(state, model, grid, &prep)
}

pub fn energy_with(state: &FieldState, model: &ModelSpec, grid: &SpectralGrid, prep: &Prepared) -> Result<f64> {
    let (nv, nc, len) = (model.n_v(), model.n_c(), grid.len());
    let geo = &prep.geo;
    let kin = &geo.kin;
    let nn = nv * nv;
    let mut total = 0.0;
    let mut phi = vec![C64::new(0.0, 0.0); nc];
    let mut pi = vec![C64::new(0.0, 0.0); nc];
    let mut cov = vec![C64::new(0.0, 0.0); nc];
    let zero_df = vec![C64::new(0.0, 0.0); nc * nn];
    for p in 0..len {
        for i in 0..nc {
            phi[i] = state.phi[i][p];
            pi[i] = state.pi[i][p];
        }
        let mut dens = geo.re_inner(p, &pi, &pi);
        for s in 0..3 {
            for i in 0..nc {
                cov[i] = prep.cov_dphi(state, p, s, i);
            }
            dens += geo.re_inner(p, &cov, &cov);
        }
        for a in 0..nv {
            for b in 0..nv {
                let h = kin.h(p, a, b);
                let ee: f64 = (0..3).map(|s| state.e[a][s][p] * state.e[b][s][p]).sum();
                let bb: f64 = (0..3).map(|s| prep.fs.b[a][s][p] * prep.fs.b[b][s][p]).sum();
                dens += 0.5 * h * (ee + bb);
            }
        }
        let h_inv = &kin.h_inv[p * nn..(p + 1) * nn];
        let df = if kin.constant { &zero_df[..] } else { &kin.df[p * nc * nn..(p + 1) * nc * nn] };
        let v = match &geo.metric {
            Some(m) => potential_with(model, &m[p], &phi, h_inv, df).0,
            None => potential_with(model, &crate::kahler::metric_at(&model.kahler, &phi)?, &phi, h_inv, df).0,
        };
        total += dens + v;
    }
    Ok(total * grid.cell_volume())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::{random_state, InitConfig};
    use std::f64::consts::PI;

    fn grid() -> SpectralGrid {
        SpectralGrid::new(16, 2.0 * PI).unwrap()
    }

    #[test]
    fn vacuum_has_zero_j() {
        let g = grid();
        let s = FieldState::zeros(1, 1, g.len());
        let j = assemble_j(&s, &ModelSpec::abelian_higgs(), &g).unwrap();
        assert!(j.as_state(0.0).is_zero());
    }

    #[test]
    fn free_scalar_has_zero_j() {
        let g = grid();
        let s = random_state(1, 1, &g, &InitConfig { seed: 3, amplitude: 0.5, band: 3 });
        let j = assemble_j(&s, &ModelSpec::free(1, 1), &g).unwrap();
        assert!(j.j2.iter().all(|v| v.iter().all(|c| c.iter().all(|&x| x == 0.0))));
        assert!(j.j4.iter().all(|f| f.iter().all(|z| *z == C64::new(0.0, 0.0))));
    }

    #[test]
    fn standing_wave() {
        let g = grid();
        let mut s = FieldState::zeros(1, 1, g.len());
        for p in 0..g.len() {
            s.phi[0][p] = C64::new((2.0 * g.position(p)[1]).sin(), 0.0);
        }
        let dt = 0.37;
        let out = linear_propagate(&s, dt, &g);
        for p in 0..g.len() {
            let want = (2.0 * dt).cos() * (2.0 * g.position(p)[1]).sin();
            assert!((out.phi[0][p] - want).norm() <= 1e-12);
        }
        assert_eq!(linear_propagate(&s, 0.0, &g).phi, s.phi);
    }

    #[test]
    fn propagation_is_invertible_and_keeps_longitudinal_part() {
        let g = grid();
        let s = random_state(2, 1, &g, &InitConfig { seed: 4, amplitude: 1.0, band: 4 });
        let back = linear_propagate(&linear_propagate(&s, 0.8, &g), -0.8, &g);
        let d = back.difference(&s);
        assert!(d.a.iter().chain(&d.e).all(|v| v.iter().all(|c| c.iter().all(|x| x.abs() <= 1e-12))));
        assert!(d.phi.iter().chain(&d.pi).all(|f| f.iter().all(|z| z.norm() <= 1e-12)));
        let fwd = linear_propagate(&s, 0.8, &g);
        let (_, el0) = g.helmholtz(&s.e[1]);
        let (_, el1) = g.helmholtz(&fwd.e[1]);
        for c in 0..3 {
            for p in 0..g.len() {
                assert!((el0[c][p] - el1[c][p]).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn free_energy_is_conserved_by_the_semigroup() {
        let g = grid();
        let model = ModelSpec::free(1, 1);
        let mut s = FieldState::zeros(1, 1, g.len());
        for p in 0..g.len() {
            let x = g.position(p);
            s.phi[0][p] = C64::new((x[0] + 2.0 * x[2]).sin(), 0.3 * x[1].cos());
        }
        let e0 = energy_monitor(&s, &model, &g).unwrap();
        let e1 = energy_monitor(&linear_propagate(&s, 1.3, &g), &model, &g).unwrap();
        assert!((e1 - e0).abs() <= 1e-10 * e0);
        assert_eq!(energy_monitor(&FieldState::zeros(1, 1, g.len()), &model, &g).unwrap(), 0.0);
    }
}
