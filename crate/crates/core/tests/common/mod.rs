//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

use susyflow::kahler::metric_at;
use susyflow::model::{scalar_potential, ModelSpec};
use susyflow::spectral::{ComplexField, RealField, SpectralGrid, VectorField};
use susyflow::state::FieldState;
use susyflow::C64;

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Largest entrywise difference over the largest entry (floored at 1).
pub fn rel_diff_r(a: &[f64], b: &[f64]) -> f64 {
    let scale = a.iter().chain(b).fold(1.0f64, |m, x| m.max(x.abs()));
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max) / scale
}

pub fn rel_diff_c(a: &[C64], b: &[C64]) -> f64 {
    let scale = a.iter().chain(b).fold(1.0f64, |m, x| m.max(x.norm()));
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max) / scale
}

fn lap_r(grid: &SpectralGrid, f: &[f64]) -> RealField {
    let mut out = vec![0.0; f.len()];
    for r in 0..3 {
        let d = grid.deriv_r(&grid.deriv_r(f, r), r);
        out.iter_mut().zip(&d).for_each(|(o, x)| *o += x);
    }
    out
}

fn lap_c(grid: &SpectralGrid, f: &[C64]) -> ComplexField {
    let mut out = vec![c(0.0, 0.0); f.len()];
    for r in 0..3 {
        let d = grid.deriv_c(&grid.deriv_c(f, r), r);
        out.iter_mut().zip(&d).for_each(|(o, x)| *o += x);
    }
    out
}

/// Parameters of a Yang–Mills–Higgs model with constant couplings `h = coupling·δ`.
pub struct YmhParams {
    pub n_v: usize,
    pub n_c: usize,
    /// `f[(a*n_v + b)*n_v + c] = f^a_bc`.
    pub f: Vec<f64>,
    /// Hermitian generators, row-major.
    pub t: Vec<Vec<C64>>,
    pub coupling: f64,
    pub xi: Vec<f64>,
    /// Mass of the quadratic superpotential `W = (m/2)Σφ²`.
    pub mass: f64,
    /// Coefficient of `λ|φ|⁴`.
    pub quartic: f64,
}

impl YmhParams {
    fn fabc(&self, a: usize, b: usize, cc: usize) -> f64 {
        self.f[(a * self.n_v + b) * self.n_v + cc]
    }

    /// `(T_a v)_i`.
    fn t_apply(&self, a: usize, v: &[C64]) -> Vec<C64> {
        let n = self.n_c;
        (0..n).map(|i| (0..n).map(|j| self.t[a][i * n + j] * v[j]).sum()).collect()
    }
}

pub struct YmhJ {
    pub j1: Vec<VectorField>,
    pub j2: Vec<VectorField>,
    pub j4: Vec<ComplexField>,
}

/// Textbook covariant form: `∂_tE = D_rF_rs − ΔA_T + j/h`, `∂_tπ = D_sD_sφ − ∂̄V`,
/// with the Gauss law `∂·E = −f A·E + charge/h` solved for the longitudinal field.
pub fn ymh_oracle(p: &YmhParams, u: &FieldState, grid: &SpectralGrid) -> YmhJ {
    let (nv, nc, len) = (p.n_v, p.n_c, grid.len());
    let zero_v = || -> VectorField { [vec![0.0; len], vec![0.0; len], vec![0.0; len]] };
    // field strength with the dealiased quadratic part
    let mut fs: Vec<[[RealField; 3]; 3]> = Vec::new();
    for a in 0..nv {
        let mut fa: [[RealField; 3]; 3] = std::array::from_fn(|_| std::array::from_fn(|_| vec![0.0; len]));
        for r in 0..3 {
            for s in 0..3 {
                let mut q = vec![0.0; len];
                for b in 0..nv {
                    for cc in 0..nv {
                        let f = p.fabc(a, b, cc);
                        if f != 0.0 {
                            for i in 0..len {
                                q[i] += f * u.a[b][r][i] * u.a[cc][s][i];
                            }
                        }
                    }
                }
                grid.dealias_r(&mut q);
                let d1 = grid.deriv_r(&u.a[a][s], r);
                let d2 = grid.deriv_r(&u.a[a][r], s);
                for i in 0..len {
                    fa[r][s][i] = d1[i] - d2[i] + q[i];
                }
            }
        }
        fs.push(fa);
    }
    // covariant derivatives of φ
    let mut dphi: Vec<[ComplexField; 3]> = Vec::new();
    for i in 0..nc {
        dphi.push(std::array::from_fn(|s| grid.deriv_c(&u.phi[i], s)));
    }
    let mut cov: [Vec<ComplexField>; 3] = std::array::from_fn(|_| vec![vec![c(0.0, 0.0); len]; nc]);
    for s in 0..3 {
        for x in 0..len {
            let phi: Vec<C64> = (0..nc).map(|i| u.phi[i][x]).collect();
            for i in 0..nc {
                cov[s][i][x] = dphi[i][s][x];
            }
            for a in 0..nv {
                let tp = p.t_apply(a, &phi);
                for i in 0..nc {
                    cov[s][i][x] += c(0.0, -1.0) * u.a[a][s][x] * tp[i];
                }
            }
        }
    }

    let mut j2: Vec<VectorField> = (0..nv).map(|_| zero_v()).collect();
    for a in 0..nv {
        let (at, _) = grid.helmholtz(&u.a[a]);
        for s in 0..3 {
            let lap = lap_r(grid, &at[s]);
            let mut acc = vec![0.0; len];
            for r in 0..3 {
                let d = grid.deriv_r(&fs[a][r][s], r);
                for x in 0..len {
                    acc[x] += d[x];
                    for b in 0..nv {
                        for cc in 0..nv {
                            acc[x] += p.fabc(a, b, cc) * u.a[b][r][x] * fs[cc][r][s][x];
                        }
                    }
                }
            }
            for x in 0..len {
                let phi: Vec<C64> = (0..nc).map(|i| u.phi[i][x]).collect();
                let tp = p.t_apply(a, &phi);
                let mut im = c(0.0, 0.0);
                for i in 0..nc {
                    im += cov[s][i][x].conj() * tp[i];
                }
                acc[x] += -lap[x] - 2.0 * im.im / p.coupling;
            }
            grid.dealias_r(&mut acc);
            j2[a][s] = acc;
        }
    }

    let mut j4: Vec<ComplexField> = vec![vec![c(0.0, 0.0); len]; nc];
    let div_cov: Vec<ComplexField> = (0..nc)
        .map(|i| {
            let mut acc = vec![c(0.0, 0.0); len];
            for s in 0..3 {
                let d = grid.deriv_c(&cov[s][i], s);
                acc.iter_mut().zip(&d).for_each(|(o, x)| *o += x);
            }
            acc
        })
        .collect();
    let laps: Vec<ComplexField> = (0..nc).map(|i| lap_c(grid, &u.phi[i])).collect();
    for x in 0..len {
        let phi: Vec<C64> = (0..nc).map(|i| u.phi[i][x]).collect();
        let mut out: Vec<C64> = (0..nc).map(|i| div_cov[i][x] - laps[i][x]).collect();
        for s in 0..3 {
            let dv: Vec<C64> = (0..nc).map(|i| cov[s][i][x]).collect();
            for a in 0..nv {
                let td = p.t_apply(a, &dv);
                for i in 0..nc {
                    out[i] += c(0.0, -1.0) * u.a[a][s][x] * td[i];
                }
            }
        }
        // ∂V/∂φ̄
        let norm2: f64 = phi.iter().map(|z| z.norm_sqr()).sum();
        for i in 0..nc {
            out[i] -= p.mass * p.mass * phi[i] + 2.0 * p.quartic * norm2 * phi[i];
        }
        for a in 0..nv {
            let tp = p.t_apply(a, &phi);
            let moment: C64 = phi.iter().zip(&tp).map(|(z, w)| z.conj() * w).sum();
            let pa = -2.0 * moment.re + p.xi[a];
            for i in 0..nc {
                out[i] -= -pa / (2.0 * p.coupling) * tp[i];
            }
        }
        for i in 0..nc {
            j4[i][x] = out[i];
        }
    }
    for f in j4.iter_mut() {
        grid.dealias_c(f);
    }

    // Gauss law: 4πρ^a = −f^a_bc A^b·E^c − (2/h) Im(π† T_a φ)
    let mut j1 = Vec::new();
    for a in 0..nv {
        let mut rho = vec![0.0; len];
        for x in 0..len {
            let phi: Vec<C64> = (0..nc).map(|i| u.phi[i][x]).collect();
            let tp = p.t_apply(a, &phi);
            let q: C64 = (0..nc).map(|i| u.pi[i][x].conj() * tp[i]).sum();
            let mut v = -2.0 * q.im / p.coupling;
            for b in 0..nv {
                for cc in 0..nv {
                    for s in 0..3 {
                        v -= p.fabc(a, b, cc) * u.a[b][s][x] * u.e[cc][s][x];
                    }
                }
            }
            rho[x] = v;
        }
        grid.dealias_r(&mut rho);
        j1.push(poisson_gradient(grid, &rho));
    }
    YmhJ { j1, j2, j4 }
}

/// Curl-free `E` with `∂·E = q`, zero mode discarded.
pub fn poisson_gradient(grid: &SpectralGrid, q: &[f64]) -> VectorField {
    let spec = grid.fft_r(q);
    let mut comps: [ComplexField; 3] = std::array::from_fn(|_| vec![c(0.0, 0.0); q.len()]);
    for (idx, z) in spec.iter().enumerate() {
        let k = grid.wavevector(idx);
        let k2: f64 = k.iter().map(|x| x * x).sum();
        if k2 > 0.0 {
            for s in 0..3 {
                comps[s][idx] = c(0.0, -k[s] / k2) * z;
            }
        }
    }
    let [x, y, z] = comps;
    [grid.ifft_r(x), grid.ifft_r(y), grid.ifft_r(z)]
}

/// The conjugate scalar row evaluated directly in barred indices for an
/// abelian model with linear generators `X_a = −iT_aφ`.
pub fn j6_formula(model: &ModelSpec, u: &FieldState, grid: &SpectralGrid) -> Vec<ComplexField> {
    let (nv, nc, len) = (model.n_v(), model.n_c(), grid.len());
    assert!(model.algebra.is_abelian());
    let dphi: Vec<[ComplexField; 3]> = (0..nc).map(|i| std::array::from_fn(|s| grid.deriv_c(&u.phi[i], s))).collect();
    let div_a: Vec<RealField> = (0..nv).map(|a| grid.div(&u.a[a])).collect();
    let b: Vec<VectorField> = (0..nv).map(|a| grid.curl(&u.a[a])).collect();
    let mut out = vec![vec![c(0.0, 0.0); len]; nc];
    let t = |a: usize, i: usize, j: usize| model.killing.t(a, i, j);
    for x in 0..len {
        let phi: Vec<C64> = (0..nc).map(|i| u.phi[i][x]).collect();
        let m = metric_at(&model.kahler, &phi).unwrap();
        // barred quantities
        let gb = |k: usize, l: usize| m.g(k, l).conj();
        let ginvb = |i: usize, j: usize| m.g_inv(i, j).conj();
        let gammab = |i: usize, k: usize, l: usize| m.gamma(i, k, l).conj();
        let xb = |a: usize, i: usize| -> C64 { (0..nc).map(|j| c(0.0, -1.0) * t(a, i, j) * phi[j]).sum::<C64>().conj() };
        let x_ = |a: usize, i: usize| -> C64 { (0..nc).map(|j| c(0.0, -1.0) * t(a, i, j) * phi[j]).sum::<C64>() };
        // ∇_k̄ X̄^ī_a = conj(∂_k X^i + Γ^i_kl X^l)
        let nab_xb = |a: usize, i: usize, k: usize| -> C64 {
            let mut v = c(0.0, -1.0) * t(a, i, k);
            for l in 0..nc {
                v += m.gamma(i, k, l) * x_(a, l);
            }
            v.conj()
        };
        let nab_x = |a: usize, i: usize, k: usize| nab_xb(a, i, k).conj();
        let dphib = |i: usize, s: usize| dphi[i][s][x].conj();
        let covb = |i: usize, s: usize| -> C64 {
            let mut v = dphib(i, s);
            for a in 0..nv {
                v += u.a[a][s][x] * xb(a, i);
            }
            v
        };
        let (_, df) = model.kinetic.eval(&phi);
        let (_, dv) = scalar_potential(model, &phi).unwrap();
        for mi in 0..nc {
            let mut acc = c(0.0, 0.0);
            for k in 0..nc {
                for l in 0..nc {
                    let mut q = -u.pi[k][x].conj() * u.pi[l][x].conj();
                    for s in 0..3 {
                        q += dphib(k, s) * dphib(l, s);
                    }
                    acc += gammab(mi, k, l) * q;
                }
            }
            for a in 0..nv {
                acc += xb(a, mi) * div_a[a][x];
                for s in 0..3 {
                    for k in 0..nc {
                        acc += u.a[a][s][x] * nab_xb(a, mi, k) * dphib(k, s);
                    }
                }
            }
            for j in 0..nc {
                for l in 0..nc {
                    for k in 0..nc {
                        for a in 0..nv {
                            for s in 0..3 {
                                acc -= ginvb(mi, j) * gb(l, k) * u.a[a][s][x] * nab_x(a, k, j) * covb(l, s);
                            }
                        }
                    }
                }
            }
            // ½ ∂_j f_ab (½(E·E − B·B) − i E·B) − ∂_j V
            for j in 0..nc {
                let mut d2 = -dv[j].conj();
                for a in 0..nv {
                    for bb in 0..nv {
                        let dfab = df[(j * nv + a) * nv + bb];
                        let mut ee = 0.0;
                        let mut bbv = 0.0;
                        let mut eb = 0.0;
                        for s in 0..3 {
                            ee += u.e[a][s][x] * u.e[bb][s][x];
                            bbv += b[a][s][x] * b[bb][s][x];
                            eb += u.e[a][s][x] * b[bb][s][x];
                        }
                        d2 += 0.5 * dfab * c(0.5 * (ee - bbv), -eb);
                    }
                }
                acc += ginvb(mi, j) * d2;
            }
            out[mi][x] = acc;
        }
    }
    for f in out.iter_mut() {
        grid.dealias_c(f);
    }
    out
}

/// Closed-form Kähler potentials for the finite-difference metric oracle.
pub fn kahler_value(kind: &str, phi: &[C64]) -> f64 {
    let u: f64 = phi.iter().map(|z| z.norm_sqr()).sum();
    match kind {
        "flat" => u,
        "fubini_study" => (1.0 + u).ln(),
        // Φ = s² + s⁴/4
        "even_polynomial" => u + 0.25 * u * u,
        _ => unreachable!(),
    }
}

/// `∂_i∂_j̄K` from a 4-point stencil on the real coordinates, step `h`.
pub fn fd_hessian(kind: &str, phi: &[C64], h: f64) -> Vec<C64> {
    let n = phi.len();
    let mut out = vec![c(0.0, 0.0); n * n];
    let shifted = |i: usize, di: C64, j: usize, dj: C64| {
        let mut p = phi.to_vec();
        p[i] += di;
        p[j] += dj;
        kahler_value(kind, &p)
    };
    for i in 0..n {
        for j in 0..n {
            // ∂_i∂_j̄ = ¼(∂_{x_i}∂_{x_j} + ∂_{y_i}∂_{y_j}) + (i/4)(∂_{x_i}∂_{y_j} − ∂_{y_i}∂_{x_j})
            let mixed = |da: C64, db: C64| {
                (shifted(i, da, j, db) - shifted(i, da, j, -db) - shifted(i, -da, j, db) + shifted(i, -da, j, -db))
                    / (4.0 * h * h)
            };
            let xx = mixed(c(h, 0.0), c(h, 0.0));
            let yy = mixed(c(0.0, h), c(0.0, h));
            let xy = mixed(c(h, 0.0), c(0.0, h));
            let yx = mixed(c(0.0, h), c(h, 0.0));
            out[i * n + j] = c(xx + yy, xy - yx) * 0.25;
        }
    }
    out
}

pub fn two_pi_grid(n: usize) -> SpectralGrid {
    SpectralGrid::new(n, 2.0 * PI).unwrap()
}
