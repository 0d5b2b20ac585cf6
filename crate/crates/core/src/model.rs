//! Superpotential, Killing data and the scalar potential `V` with its gradient.
//!
//! Gauged isometries act linearly, `X^i_a = −i (T_a)^i_j φ^j` with Hermitian
//! `T_a`. For a U(n)-symmetric Kähler potential the Killing relation
//! `X^i_a = (i/2) g^{ij̄} ∂_j̄ P_a` is solved by
//! `P_a = −(Φ′/|φ|) φ†T_aφ + ξ_a`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::gauge::{spd_inverse, GaugeAlgebra, GaugeKinetic};
use crate::kahler::{metric_at, random_direction, KahlerPotential, MetricEval};
use crate::C64;

#[derive(Clone, Debug, PartialEq)]
pub enum SuperKind {
    Zero,
    Mass(f64),
    Cubic(f64),
    Polynomial(Vec<C64>),
}

/// `W = Σ_i p(φ^i)` with one polynomial `p(z) = Σ_n c_n zⁿ` shared by all components.
#[derive(Clone, Debug, PartialEq)]
pub struct SuperPotential {
    kind: SuperKind,
    coeffs: Vec<C64>,
}

/// `W` and its holomorphic derivatives at a point. The second and third
/// derivatives are diagonal for a separable `W` and stored as vectors.
#[derive(Clone, Debug, PartialEq)]
pub struct SuperEval {
    pub w: C64,
    pub dw: Vec<C64>,
    pub d2w: Vec<C64>,
    pub d3w: Vec<C64>,
}

impl SuperPotential {
    pub fn zero() -> Self {
        SuperPotential { kind: SuperKind::Zero, coeffs: vec![] }
    }

    /// `p(z) = m z²/2`.
    pub fn mass(m: f64) -> Self {
        SuperPotential { kind: SuperKind::Mass(m), coeffs: vec![C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(m / 2.0, 0.0)] }
    }

    /// `p(z) = g₃ z³/3`.
    pub fn cubic(g3: f64) -> Self {
        let z = C64::new(0.0, 0.0);
        SuperPotential { kind: SuperKind::Cubic(g3), coeffs: vec![z, z, z, C64::new(g3 / 3.0, 0.0)] }
    }

    pub fn polynomial(coeffs: Vec<C64>) -> Self {
        SuperPotential { kind: SuperKind::Polynomial(coeffs.clone()), coeffs }
    }

    pub fn kind(&self) -> &SuperKind {
        &self.kind
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| *c == C64::new(0.0, 0.0))
    }

    fn poly(&self, z: C64) -> [C64; 4] {
        let mut out = [C64::new(0.0, 0.0); 4];
        let n = self.coeffs.len();
        for (order, slot) in out.iter_mut().enumerate() {
            // Horner on the `order`-th derivative
            let mut acc = C64::new(0.0, 0.0);
            for m in (order..n).rev() {
                let falling: f64 = (0..order).map(|t| (m - t) as f64).product();
                acc = acc * z + self.coeffs[m] * falling;
            }
            *slot = acc;
        }
        out
    }

    pub fn eval(&self, phi: &[C64]) -> SuperEval {
        let mut e = SuperEval {
            w: C64::new(0.0, 0.0),
            dw: Vec::with_capacity(phi.len()),
            d2w: Vec::with_capacity(phi.len()),
            d3w: Vec::with_capacity(phi.len()),
        };
        for &z in phi {
            let [p0, p1, p2, p3] = self.poly(z);
            e.w += p0;
            e.dw.push(p1);
            e.d2w.push(p2);
            e.d3w.push(p3);
        }
        e
    }
}

/// Hermitian generators `T_a` (row-major `n_c × n_c`) and FI constants `ξ_a`.
#[derive(Clone, Debug, PartialEq)]
pub struct KillingData {
    pub generators: Vec<Vec<C64>>,
    pub fi_constants: Vec<f64>,
    n_c: usize,
}

impl KillingData {
    /// No gauged isometry: every `T_a = 0`.
    pub fn ungauged(n_v: usize, n_c: usize) -> Self {
        KillingData { generators: vec![vec![C64::new(0.0, 0.0); n_c * n_c]; n_v], fi_constants: vec![0.0; n_v], n_c }
    }

    /// Abelian charges, `T_a = diag(q_a)`.
    pub fn charges(q: &[Vec<f64>]) -> Result<Self> {
        let n_c = q.first().map(|r| r.len()).unwrap_or(0);
        let mut generators = Vec::with_capacity(q.len());
        for row in q {
            if row.len() != n_c {
                return Err(Error::Config("charge rows must all have n_c entries".into()));
            }
            let mut t = vec![C64::new(0.0, 0.0); n_c * n_c];
            for (i, &qi) in row.iter().enumerate() {
                t[i * n_c + i] = C64::new(qi, 0.0);
            }
            generators.push(t);
        }
        Ok(KillingData { fi_constants: vec![0.0; q.len()], generators, n_c })
    }

    /// su(2) doublet, `T_a = σ_a/2`.
    pub fn su2_fundamental() -> Self {
        let z = C64::new(0.0, 0.0);
        let h = 0.5;
        let generators = vec![
            vec![z, C64::new(h, 0.0), C64::new(h, 0.0), z],
            vec![z, C64::new(0.0, -h), C64::new(0.0, h), z],
            vec![C64::new(h, 0.0), z, z, C64::new(-h, 0.0)],
        ];
        KillingData { generators, fi_constants: vec![0.0; 3], n_c: 2 }
    }

    pub fn explicit(generators: Vec<Vec<C64>>, n_c: usize) -> Result<Self> {
        if generators.iter().any(|t| t.len() != n_c * n_c) {
            return Err(Error::Config(format!("every generator needs {} entries", n_c * n_c)));
        }
        Ok(KillingData { fi_constants: vec![0.0; generators.len()], generators, n_c })
    }

    pub fn with_fi(mut self, xi: Vec<f64>) -> Result<Self> {
        if xi.len() != self.generators.len() {
            return Err(Error::Config(format!("expected {} FI constants, got {}", self.generators.len(), xi.len())));
        }
        self.fi_constants = xi;
        Ok(self)
    }

    pub fn n_v(&self) -> usize {
        self.generators.len()
    }

    pub fn n_c(&self) -> usize {
        self.n_c
    }

    pub fn is_gauged(&self) -> bool {
        self.generators.iter().any(|t| t.iter().any(|z| *z != C64::new(0.0, 0.0)))
    }

    #[inline]
    pub fn t(&self, a: usize, i: usize, j: usize) -> C64 {
        self.generators[a][i * self.n_c + j]
    }

    /// `X^i_a = −i (T_a φ)^i`, stored at `[a*n_c + i]`.
    pub fn killing_vectors(&self, phi: &[C64]) -> Vec<C64> {
        let n = self.n_c;
        let mut x = vec![C64::new(0.0, 0.0); self.n_v() * n];
        for (a, t) in self.generators.iter().enumerate() {
            for i in 0..n {
                let mut acc = C64::new(0.0, 0.0);
                for j in 0..n {
                    acc += t[i * n + j] * phi[j];
                }
                x[a * n + i] = C64::new(acc.im, -acc.re);
            }
        }
        x
    }

    /// Hermiticity and closure `[T_a, T_b] = i f^c_{ab} T_c`.
    pub fn validate(&self, alg: &GaugeAlgebra) -> Result<()> {
        let n = self.n_c;
        if self.n_v() != alg.n_v() {
            return Err(Error::Config(format!("{} generators for an algebra of dimension {}", self.n_v(), alg.n_v())));
        }
        for (a, t) in self.generators.iter().enumerate() {
            for i in 0..n {
                for j in 0..n {
                    if (t[i * n + j] - t[j * n + i].conj()).norm() > 1e-12 {
                        return Err(Error::Config(format!("generator {a} is not Hermitian")));
                    }
                }
            }
        }
        if !self.is_gauged() {
            return Ok(());
        }
        for a in 0..self.n_v() {
            for b in 0..self.n_v() {
                for i in 0..n {
                    for j in 0..n {
                        let mut comm = C64::new(0.0, 0.0);
                        for l in 0..n {
                            comm += self.t(a, i, l) * self.t(b, l, j) - self.t(b, i, l) * self.t(a, l, j);
                        }
                        let mut rhs = C64::new(0.0, 0.0);
                        for c in 0..self.n_v() {
                            rhs += C64::i() * alg.f(c, a, b) * self.t(c, i, j);
                        }
                        if (comm - rhs).norm() > 1e-12 {
                            return Err(Error::Algebra(format!("[T_{a}, T_{b}] does not close on the structure constants")));
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// Everything that defines a model.
#[derive(Clone, Debug)]
pub struct ModelSpec {
    pub algebra: GaugeAlgebra,
    pub kinetic: GaugeKinetic,
    pub kahler: KahlerPotential,
    pub superpotential: SuperPotential,
    pub killing: KillingData,
    /// Coefficient `λ` of an additional `λ|φ|⁴` term in `V`.
    pub extra_quartic: f64,
}

impl ModelSpec {
    pub fn n_v(&self) -> usize {
        self.algebra.n_v()
    }

    pub fn n_c(&self) -> usize {
        self.killing.n_c()
    }

    pub fn validate(&self) -> Result<()> {
        self.algebra.validate()?;
        self.killing.validate(&self.algebra)?;
        if self.kinetic.n_v() != self.n_v() || self.kinetic.n_c() != self.n_c() {
            return Err(Error::Config(format!(
                "kinetic function is {}×{} over {} scalars, model has n_v = {}, n_c = {}",
                self.kinetic.n_v(),
                self.kinetic.n_v(),
                self.kinetic.n_c(),
                self.n_v(),
                self.n_c()
            )));
        }
        if self.n_c() == 0 {
            return Err(Error::Config("at least one chiral multiplet is required".into()));
        }
        if !self.extra_quartic.is_finite() {
            return Err(Error::Config("extra_quartic must be finite".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..8 {
            let dir = random_direction(&mut rng, self.n_c());
            let phi: Vec<C64> = dir.iter().map(|z| z * rng.random_range(0.05..1.0)).collect();
            let r = killing_relation_residual(&self.killing, &self.kahler, &phi)?;
            if r > 1e-6 {
                return Err(Error::Config(format!("generators are not isometries of the Kähler metric (residual {r:.3e})")));
            }
        }
        Ok(())
    }

    /// Free, ungauged, massless scalars with constant couplings over `u(1)^{n_v}`.
    pub fn free(n_v: usize, n_c: usize) -> Self {
        ModelSpec {
            algebra: GaugeAlgebra::abelian(n_v),
            kinetic: GaugeKinetic::identity(n_v, n_c),
            kahler: KahlerPotential::flat(),
            superpotential: SuperPotential::zero(),
            killing: KillingData::ungauged(n_v, n_c),
            extra_quartic: 0.0,
        }
    }

    /// `u(1)` with one unit-charge scalar, flat target, `f_ab = 1`, `W = 0`.
    pub fn abelian_higgs() -> Self {
        ModelSpec {
            killing: KillingData::charges(&[vec![1.0]]).expect("one charge row"),
            ..Self::free(1, 1)
        }
    }
}

/// `P_a` at one point.
pub fn killing_potential(kd: &KillingData, pot: &KahlerPotential, phi: &[C64]) -> Vec<f64> {
    let s = phi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    killing_potential_with(kd, pot.radial(s).psi1, phi)
}

fn moment(kd: &KillingData, a: usize, phi: &[C64]) -> f64 {
    let n = kd.n_c;
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            acc += phi[i].conj() * kd.t(a, i, j) * phi[j];
        }
    }
    acc.re
}

fn killing_potential_with(kd: &KillingData, psi1: f64, phi: &[C64]) -> Vec<f64> {
    (0..kd.n_v()).map(|a| -2.0 * psi1 * moment(kd, a, phi) + kd.fi_constants[a]).collect()
}

/// `∂_j̄ P_a`, stored at `[a*n_c + j]`.
pub fn killing_potential_gradient(kd: &KillingData, m: &MetricEval, phi: &[C64]) -> Vec<C64> {
    let n = kd.n_c;
    let (psi1, psi2) = (m.radial.psi1, m.radial.f);
    let mut out = vec![C64::new(0.0, 0.0); kd.n_v() * n];
    for a in 0..kd.n_v() {
        let mu = moment(kd, a, phi);
        for j in 0..n {
            let mut tphi = C64::new(0.0, 0.0);
            for l in 0..n {
                tphi += kd.t(a, j, l) * phi[l];
            }
            out[a * n + j] = phi[j] * (-2.0 * psi2 * mu) - tphi * (2.0 * psi1);
        }
    }
    out
}

/// Largest `|X^i_a − (i/2) g^{ij̄} ∂_j̄ P_a|`.
pub fn killing_relation_residual(kd: &KillingData, pot: &KahlerPotential, phi: &[C64]) -> Result<f64> {
    let m = metric_at(pot, phi)?;
    let n = kd.n_c;
    let x = kd.killing_vectors(phi);
    let dp = killing_potential_gradient(kd, &m, phi);
    let mut worst = 0.0f64;
    for a in 0..kd.n_v() {
        for i in 0..n {
            let mut acc = C64::new(0.0, 0.0);
            for j in 0..n {
                acc += m.g_inv(i, j) * dp[a * n + j];
            }
            worst = worst.max((x[a * n + i] - C64::i() * 0.5 * acc).norm());
        }
    }
    Ok(worst)
}

/// `∂_j̄ g^{ik̄}`, stored at `[(j*n + i)*n + k]`.
pub fn inverse_metric_gradient(m: &MetricEval, phi: &[C64]) -> Vec<C64> {
    let n = m.n_c;
    let u: f64 = phi.iter().map(|z| z.norm_sqr()).sum();
    let (psi1, psi2, psi3) = (m.radial.psi1, m.radial.f, m.radial.f_prime_over_2s);
    let den = psi1 + psi2 * u;
    let c = psi2 / den;
    let dc = (psi1 * psi3 - 2.0 * psi2 * psi2) / (den * den);
    let mut out = vec![C64::new(0.0, 0.0); n * n * n];
    for j in 0..n {
        for i in 0..n {
            for k in 0..n {
                let pij = phi[i] * phi[k].conj();
                let delta_ik = if i == k { 1.0 } else { 0.0 };
                let mut v = phi[j] * (C64::new(delta_ik, 0.0) - pij * c) * (-psi2 / (psi1 * psi1));
                v += phi[j] * pij * (-dc / psi1);
                if j == k {
                    v -= phi[i] * (c / psi1);
                }
                out[(j * n + i) * n + k] = v;
            }
        }
    }
    out
}

/// `V` and `∂_j̄ V` given metric data, `h^{ab}` and `∂_i f_ab` (layout `[i*n_v² + ab]`) at the point.
pub fn potential_with(model: &ModelSpec, m: &MetricEval, phi: &[C64], h_inv: &[f64], df: &[C64]) -> (f64, Vec<C64>) {
    let n = m.n_c;
    let nv = model.n_v();
    let nn = nv * nv;
    let mut v = 0.0;
    let mut dv = vec![C64::new(0.0, 0.0); n];
    let u: f64 = phi.iter().map(|z| z.norm_sqr()).sum();

    if !model.superpotential.is_zero() {
        let w = model.superpotential.eval(phi);
        let dn = inverse_metric_gradient(m, phi);
        let mut vf = C64::new(0.0, 0.0);
        for i in 0..n {
            for k in 0..n {
                let wk = w.dw[i] * w.dw[k].conj();
                vf += m.g_inv(i, k) * wk;
                for j in 0..n {
                    dv[j] += dn[(j * n + i) * n + k] * wk;
                }
            }
        }
        for j in 0..n {
            for i in 0..n {
                dv[j] += m.g_inv(i, j) * w.dw[i] * w.d2w[j].conj();
            }
        }
        v += vf.re;
    }

    if model.killing.is_gauged() || model.killing.fi_constants.iter().any(|&x| x != 0.0) {
        let p = killing_potential_with(&model.killing, m.radial.psi1, phi);
        let dp = killing_potential_gradient(&model.killing, m, phi);
        for a in 0..nv {
            for b in 0..nv {
                let hab = h_inv[a * nv + b];
                v += 0.125 * hab * p[a] * p[b];
                for j in 0..n {
                    dv[j] += dp[b * n + j] * (0.25 * hab * p[a]);
                }
            }
        }
        if df.iter().any(|z| *z != C64::new(0.0, 0.0)) {
            // ∂_j̄ h^{ab} = −h^{ac} (½ conj ∂_j f_cd) h^{db}
            for j in 0..n {
                let mut acc = C64::new(0.0, 0.0);
                for c in 0..nv {
                    for d in 0..nv {
                        let dh = df[j * nn + c * nv + d].conj() * 0.5;
                        let mut hp_c = 0.0;
                        let mut hp_d = 0.0;
                        for a in 0..nv {
                            hp_c += h_inv[a * nv + c] * p[a];
                            hp_d += h_inv[d * nv + a] * p[a];
                        }
                        acc -= dh * (hp_c * hp_d);
                    }
                }
                dv[j] += acc * 0.125;
            }
        }
    }

    if model.extra_quartic != 0.0 {
        v += model.extra_quartic * u * u;
        for j in 0..n {
            dv[j] += phi[j] * (2.0 * model.extra_quartic * u);
        }
    }
    (v, dv)
}

/// `(V, ∂_j̄ V)` at one point.
pub fn scalar_potential(model: &ModelSpec, phi: &[C64]) -> Result<(f64, Vec<C64>)> {
    let m = metric_at(&model.kahler, phi)?;
    let (f, df) = model.kinetic.eval(phi);
    let h: Vec<f64> = f.iter().map(|z| z.re).collect();
    let h_inv = spd_inverse(model.n_v(), &h).ok_or(Error::SingularKinetic { point: 0 })?;
    Ok(potential_with(model, &m, phi, &h_inv, &df))
}

/// Uniform sample of the ball `|φ| ≤ radius` in ℂⁿ.
pub fn sample_ball(rng: &mut impl Rng, n: usize, radius: f64) -> Vec<C64> {
    let dir = random_direction(rng, n);
    let r = radius * rng.random::<f64>().powf(1.0 / (2 * n) as f64);
    dir.into_iter().map(|z| z * r).collect()
}

/// `max |∂̄V(φ′) − ∂̄V(φ)| / |φ′ − φ|` over random pairs in the ball.
pub fn lipschitz_probe_v(model: &ModelSpec, ball_radius: f64, pairs: usize, seed: u64) -> Result<f64> {
    if pairs == 0 {
        return Err(Error::Config("lipschitz_probe_v needs at least one pair".into()));
    }
    let n = model.n_c();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..pairs {
        let a = sample_ball(&mut rng, n, ball_radius);
        let b = sample_ball(&mut rng, n, ball_radius);
        let dist = a.iter().zip(&b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt();
        if dist == 0.0 {
            continue;
        }
        let (_, da) = scalar_potential(model, &a)?;
        let (_, db) = scalar_potential(model, &b)?;
        let diff = da.iter().zip(&db).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt();
        worst = worst.max(diff / dist);
    }
    Ok(worst)
}
