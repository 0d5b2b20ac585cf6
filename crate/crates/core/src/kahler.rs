//! U(n)-symmetric Kähler potentials `K = Φ(|φ|)` and their geometry.
//!
//! Everything is expressed through the radial functions of `u = |φ|²`
//! obtained from `ψ(u) = Φ(√u)`:
//!
//! * `ψ′ = Φ′/(2s)`
//! * `ψ″ = F = (Φ″ − Φ′/s)/(4s²)`
//! * `ψ‴ = F′/(2s) = (Φ‴ − 3Φ″/s + 3Φ′/s²)/(8s³)`
//!
//! so that `g_{kl̄} = ψ′ δ_{kl} + F φ̄_k φ_l` and
//! `∂_j g_{kl̄} = F(φ̄_j δ_{kl} + φ̄_k δ_{jl}) + (F′/2s) φ̄_j φ̄_k φ_l`.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::C64;

/// `s ↦ [Φ(s), Φ′(s), Φ″(s), Φ‴(s)]`.
pub type ProfileFn = Arc<dyn Fn(f64) -> [f64; 4] + Send + Sync>;

/// Radii used to extrapolate the `s → 0` limits of a custom profile.
const LIMIT_STENCIL: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KahlerKind {
    Flat,
    FubiniStudy,
    CustomProfile,
}

/// Radial data at one radius.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Radial {
    pub phi: f64,
    pub psi1: f64,
    pub f: f64,
    pub f_prime_over_2s: f64,
}

#[derive(Clone)]
pub struct KahlerPotential {
    kind: KahlerKind,
    profile: Option<ProfileFn>,
    origin: Radial,
    stencil: Radial,
}

impl fmt::Debug for KahlerPotential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KahlerPotential").field("kind", &self.kind).field("origin", &self.origin).finish()
    }
}

impl KahlerPotential {
    /// `Φ = s²`, the flat metric on ℂⁿ.
    pub fn flat() -> Self {
        let origin = Radial { phi: 0.0, psi1: 1.0, f: 0.0, f_prime_over_2s: 0.0 };
        KahlerPotential { kind: KahlerKind::Flat, profile: None, origin, stencil: origin }
    }

    /// `Φ = ln(1 + s²)`, the Fubini–Study metric in an affine chart of ℂPⁿ.
    pub fn fubini_study() -> Self {
        let origin = Radial { phi: 0.0, psi1: 1.0, f: -1.0, f_prime_over_2s: 2.0 };
        KahlerPotential { kind: KahlerKind::FubiniStudy, profile: None, origin, stencil: origin }
    }

    /// A user profile with derivatives up to third order. The origin limits
    /// of `Φ′/2s`, `F` and `F′/2s` are extrapolated from the stencil
    /// `s ∈ {1, 2, 4}·10⁻³` assuming an even expansion in `s`.
    pub fn custom(profile: ProfileFn) -> Result<Self> {
        let at = |s: f64| Self::radial_from_profile(&profile, s);
        let (r1, r2, r4) = (at(LIMIT_STENCIL), at(2.0 * LIMIT_STENCIL), at(4.0 * LIMIT_STENCIL));
        let extrapolate = |f1: f64, f2: f64, f4: f64| {
            let a = (4.0 * f1 - f2) / 3.0;
            let b = (4.0 * f2 - f4) / 3.0;
            (16.0 * a - b) / 15.0
        };
        let origin = Radial {
            phi: profile(0.0)[0],
            psi1: extrapolate(r1.psi1, r2.psi1, r4.psi1),
            f: extrapolate(r1.f, r2.f, r4.f),
            f_prime_over_2s: extrapolate(r1.f_prime_over_2s, r2.f_prime_over_2s, r4.f_prime_over_2s),
        };
        for (name, v) in [("Φ′/2s", origin.psi1), ("F", origin.f), ("F′/2s", origin.f_prime_over_2s)] {
            if !v.is_finite() {
                return Err(Error::Config(format!("custom Kähler profile: {name} has no finite limit at the origin")));
            }
        }
        if origin.psi1 <= 0.0 {
            return Err(Error::SingularMetric { radius: 0.0, detail: format!("Φ′/2s → {} at the origin", origin.psi1) });
        }
        Ok(KahlerPotential { kind: KahlerKind::CustomProfile, profile: Some(profile), origin, stencil: r1 })
    }

    /// Even polynomial profile `Φ(s) = Σ_n c_n s^{2n}`.
    pub fn even_polynomial(coeffs: Vec<f64>) -> Result<Self> {
        let profile: ProfileFn = Arc::new(move |s: f64| {
            let mut out = [0.0; 4];
            for (n, &c) in coeffs.iter().enumerate() {
                let p = 2 * n as i32;
                let pf = p as f64;
                out[0] += c * s.powi(p);
                if p >= 1 {
                    out[1] += c * pf * s.powi(p - 1);
                }
                if p >= 2 {
                    out[2] += c * pf * (pf - 1.0) * s.powi(p - 2);
                }
                if p >= 3 {
                    out[3] += c * pf * (pf - 1.0) * (pf - 2.0) * s.powi(p - 3);
                }
            }
            out
        });
        Self::custom(profile)
    }

    pub fn kind(&self) -> KahlerKind {
        self.kind
    }

    pub fn is_flat(&self) -> bool {
        self.kind == KahlerKind::Flat
    }

    fn radial_from_profile(profile: &ProfileFn, s: f64) -> Radial {
        let [p0, p1, p2, p3] = profile(s);
        Radial {
            phi: p0,
            psi1: p1 / (2.0 * s),
            f: (p2 - p1 / s) / (4.0 * s * s),
            f_prime_over_2s: (p3 - 3.0 * p2 / s + 3.0 * p1 / (s * s)) / (8.0 * s * s * s),
        }
    }

    /// Radial functions at `s = |φ| ≥ 0`.
    pub fn radial(&self, s: f64) -> Radial {
        let u = s * s;
        match self.kind {
            KahlerKind::Flat => Radial { phi: u, ..self.origin },
            KahlerKind::FubiniStudy => {
                let w = 1.0 / (1.0 + u);
                Radial { phi: u.ln_1p(), psi1: w, f: -w * w, f_prime_over_2s: 2.0 * w * w * w }
            }
            KahlerKind::CustomProfile => {
                let profile = self.profile.as_ref().expect("custom potential carries a profile");
                if s >= LIMIT_STENCIL {
                    return Self::radial_from_profile(profile, s);
                }
                // linear interpolation in u between the origin limit and the stencil point
                let t = u / (LIMIT_STENCIL * LIMIT_STENCIL);
                let lerp = |a: f64, b: f64| a + t * (b - a);
                Radial {
                    phi: profile(s)[0],
                    psi1: lerp(self.origin.psi1, self.stencil.psi1),
                    f: lerp(self.origin.f, self.stencil.f),
                    f_prime_over_2s: lerp(self.origin.f_prime_over_2s, self.stencil.f_prime_over_2s),
                }
            }
        }
    }

    /// `Φ(s)`.
    pub fn value(&self, s: f64) -> f64 {
        self.radial(s).phi
    }
}

/// Returns `(F(s), F′(s)/(2s))`; at `s = 0` the analytic (or extrapolated) limits.
pub fn profile_f(pot: &KahlerPotential, s: f64) -> (f64, f64) {
    let r = pot.radial(s);
    (r.f, r.f_prime_over_2s)
}

/// Metric data at one target-space point. Matrices are row-major `n_c × n_c`.
#[derive(Clone, Debug)]
pub struct MetricEval {
    pub n_c: usize,
    /// `g[k*n+l] = g_{kl̄}`.
    pub g: Vec<C64>,
    /// `g_inv[i*n+j] = g^{ij̄}`, so that `Σ_j g^{ij̄} g_{kj̄} = δ^i_k`.
    pub g_inv: Vec<C64>,
    /// `gamma[(i*n+k)*n+l] = Γ^i_{kl}`.
    pub gamma: Vec<C64>,
    /// `dg[(j*n+k)*n+l] = ∂_j g_{kl̄}`.
    pub dg: Vec<C64>,
    pub f_value: f64,
    pub radial: Radial,
}

impl MetricEval {
    #[inline]
    pub fn g(&self, k: usize, l: usize) -> C64 {
        self.g[k * self.n_c + l]
    }
    #[inline]
    pub fn g_inv(&self, i: usize, j: usize) -> C64 {
        self.g_inv[i * self.n_c + j]
    }
    #[inline]
    pub fn gamma(&self, i: usize, k: usize, l: usize) -> C64 {
        self.gamma[(i * self.n_c + k) * self.n_c + l]
    }
    #[inline]
    pub fn dg(&self, j: usize, k: usize, l: usize) -> C64 {
        self.dg[(j * self.n_c + k) * self.n_c + l]
    }
}

pub fn metric_at(pot: &KahlerPotential, phi: &[C64]) -> Result<MetricEval> {
    let n = phi.len();
    let u: f64 = phi.iter().map(|z| z.norm_sqr()).sum();
    let s = u.sqrt();
    if !s.is_finite() {
        return Err(Error::SingularMetric { radius: s, detail: "non-finite field value".into() });
    }
    let r = pot.radial(s);
    let (psi1, f, f3) = (r.psi1, r.f, r.f_prime_over_2s);
    let radial_eig = psi1 + f * u;
    if !(psi1 > 0.0 && radial_eig > 0.0) {
        return Err(Error::SingularMetric {
            radius: s,
            detail: format!("eigenvalues {psi1:.6e} (angular) and {radial_eig:.6e} (radial)"),
        });
    }
    let delta = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
    let mut g = vec![C64::new(0.0, 0.0); n * n];
    let mut g_inv = vec![C64::new(0.0, 0.0); n * n];
    let c = f / radial_eig;
    for k in 0..n {
        for l in 0..n {
            g[k * n + l] = phi[k].conj() * phi[l] * f + delta(k, l) * psi1;
            g_inv[k * n + l] = (C64::new(delta(k, l), 0.0) - phi[k] * phi[l].conj() * c) / psi1;
        }
    }
    let mut dg = vec![C64::new(0.0, 0.0); n * n * n];
    for j in 0..n {
        for k in 0..n {
            for l in 0..n {
                let mut v = phi[j].conj() * phi[k].conj() * phi[l] * f3;
                if k == l {
                    v += phi[j].conj() * f;
                }
                if j == l {
                    v += phi[k].conj() * f;
                }
                dg[(j * n + k) * n + l] = v;
            }
        }
    }
    let mut gamma = vec![C64::new(0.0, 0.0); n * n * n];
    for i in 0..n {
        for k in 0..n {
            for l in 0..n {
                let mut acc = C64::new(0.0, 0.0);
                for j in 0..n {
                    acc += g_inv[i * n + j] * dg[(k * n + l) * n + j];
                }
                gamma[(i * n + k) * n + l] = acc;
            }
        }
    }
    Ok(MetricEval { n_c: n, g, g_inv, gamma, dg, f_value: f, radial: r })
}

/// `|Γ| = (g^{jj̄′} g^{kk̄′} g_{iī′} Γ^i_{jk} conj(Γ^{i′}_{j′k′}))^{1/2}`.
pub fn christoffel_norm(m: &MetricEval) -> f64 {
    let n = m.n_c;
    let mut acc = C64::new(0.0, 0.0);
    for j in 0..n {
        for jp in 0..n {
            for k in 0..n {
                for kp in 0..n {
                    let w = m.g_inv(j, jp) * m.g_inv(k, kp);
                    for i in 0..n {
                        for ip in 0..n {
                            acc += w * m.g(i, ip) * m.gamma(i, j, k) * m.gamma(ip, jp, kp).conj();
                        }
                    }
                }
            }
        }
    }
    acc.re.max(0.0).sqrt()
}

/// `|∂g| = (g^{ll̄′} g^{jj̄′} g^{kk̄′} ∂_j g_{kl̄′} conj(∂_{j′} g_{k′l̄}))^{1/2}`, equal to `|Γ|`.
pub fn metric_derivative_norm(m: &MetricEval) -> f64 {
    let n = m.n_c;
    let mut acc = C64::new(0.0, 0.0);
    for l in 0..n {
        for lp in 0..n {
            for j in 0..n {
                for jp in 0..n {
                    for k in 0..n {
                        for kp in 0..n {
                            acc += m.g_inv(l, lp)
                                * m.g_inv(j, jp)
                                * m.g_inv(k, kp)
                                * m.dg(j, k, lp)
                                * m.dg(jp, kp, l).conj();
                        }
                    }
                }
            }
        }
    }
    acc.re.max(0.0).sqrt()
}

/// Outcome of checking the polynomial bounds on `|Φ|` and `|Γ|`.
#[derive(Clone, Debug, PartialEq)]
pub struct EstimateReport {
    pub n_c: usize,
    pub radius: f64,
    pub samples: usize,
    pub epsilon: f64,
    /// Radius at which `|F′/2s|` attains its sampled supremum.
    pub epsilon_at: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub worst_phi_margin: f64,
    pub phi_witness: f64,
    pub worst_gamma_margin: f64,
    pub gamma_witness: f64,
    pub phi_bound_holds: bool,
    pub gamma_bound_holds: bool,
}

impl EstimateReport {
    pub fn passed(&self) -> bool {
        self.phi_bound_holds && self.gamma_bound_holds
    }

    /// Flat `key = value` block, one entry per line.
    pub fn to_key_value(&self) -> String {
        let mut out = String::new();
        let mut put = |k: &str, v: String| {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        };
        put("n_c", self.n_c.to_string());
        put("radius", format!("{:e}", self.radius));
        put("samples", self.samples.to_string());
        put("epsilon", format!("{:e}", self.epsilon));
        put("epsilon_at", format!("{:e}", self.epsilon_at));
        put("c1", format!("{:e}", self.c1));
        put("c2", format!("{:e}", self.c2));
        put("c3", format!("{:e}", self.c3));
        put("worst_phi_margin", format!("{:e}", self.worst_phi_margin));
        put("phi_witness", format!("{:e}", self.phi_witness));
        put("worst_gamma_margin", format!("{:e}", self.worst_gamma_margin));
        put("gamma_witness", format!("{:e}", self.gamma_witness));
        put("phi_bound_holds", self.phi_bound_holds.to_string());
        put("gamma_bound_holds", self.gamma_bound_holds.to_string());
        out
    }

    pub fn from_key_value(text: &str) -> Result<Self> {
        let mut map = std::collections::HashMap::new();
        for (lineno, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", lineno + 1)))?;
            map.insert(k.trim().to_string(), v.trim().to_string());
        }
        let get = |k: &str| map.get(k).ok_or_else(|| Error::Config(format!("missing key `{k}`")));
        let num = |k: &str| -> Result<f64> { get(k)?.parse().map_err(|_| Error::Config(format!("bad number for `{k}`"))) };
        let int = |k: &str| -> Result<usize> { get(k)?.parse().map_err(|_| Error::Config(format!("bad integer for `{k}`"))) };
        let flag = |k: &str| -> Result<bool> { get(k)?.parse().map_err(|_| Error::Config(format!("bad bool for `{k}`"))) };
        Ok(EstimateReport {
            n_c: int("n_c")?,
            radius: num("radius")?,
            samples: int("samples")?,
            epsilon: num("epsilon")?,
            epsilon_at: num("epsilon_at")?,
            c1: num("c1")?,
            c2: num("c2")?,
            c3: num("c3")?,
            worst_phi_margin: num("worst_phi_margin")?,
            phi_witness: num("phi_witness")?,
            worst_gamma_margin: num("worst_gamma_margin")?,
            gamma_witness: num("gamma_witness")?,
            phi_bound_holds: flag("phi_bound_holds")?,
            gamma_bound_holds: flag("gamma_bound_holds")?,
        })
    }
}

/// Radii `s_m = radius · 10^{-6(1 − m/(samples−1))}`, logarithmically spaced up to `radius`.
pub fn log_radii(radius: f64, samples: usize) -> Vec<f64> {
    if samples == 1 {
        return vec![radius];
    }
    (0..samples)
        .map(|m| radius * 10f64.powf(-6.0 * (1.0 - m as f64 / (samples - 1) as f64)))
        .collect()
}

/// Random unit vector in ℂⁿ, uniform on the sphere.
pub fn random_direction(rng: &mut impl Rng, n: usize) -> Vec<C64> {
    loop {
        let v: Vec<C64> = (0..n)
            .map(|_| {
                let g: [f64; 2] = [rng.sample(rand_distr::StandardNormal), rng.sample(rand_distr::StandardNormal)];
                C64::new(g[0], g[1])
            })
            .collect();
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|z| z / norm).collect();
        }
    }
}

/// Samples the ball `0 < |φ| ≤ radius` and checks
/// `|Φ| ≤ (ε/6)s⁶ + (C₁/2)s⁴ + C₂s² + C₃` and `|Γ| ≤ 2εs³ + C₁s`.
pub fn certify_estimates(pot: &KahlerPotential, n_c: usize, radius: f64, samples: usize) -> Result<EstimateReport> {
    if samples == 0 || !(radius > 0.0) || n_c == 0 {
        return Err(Error::Config("certify_estimates needs samples >= 1, radius > 0, n_c >= 1".into()));
    }
    let radii = log_radii(radius, samples);
    let origin = pot.radial(0.0);
    let (mut epsilon, mut epsilon_at) = (origin.f_prime_over_2s.abs(), 0.0);
    for &s in &radii {
        let v = pot.radial(s).f_prime_over_2s.abs();
        if v > epsilon {
            epsilon = v;
            epsilon_at = s;
        }
    }
    let (c1, c2, c3) = (origin.f.abs(), origin.psi1.abs(), origin.phi.abs());
    let mut rng = ChaCha8Rng::seed_from_u64(0x4b61_686c);
    let mut report = EstimateReport {
        n_c,
        radius,
        samples,
        epsilon,
        epsilon_at,
        c1,
        c2,
        c3,
        worst_phi_margin: f64::INFINITY,
        phi_witness: f64::NAN,
        worst_gamma_margin: f64::INFINITY,
        gamma_witness: f64::NAN,
        phi_bound_holds: true,
        gamma_bound_holds: true,
    };
    for &s in &radii {
        let s2 = s * s;
        let phi_bound = epsilon / 6.0 * s2 * s2 * s2 + c1 / 2.0 * s2 * s2 + c2 * s2 + c3;
        let phi_margin = phi_bound - pot.value(s).abs();
        if phi_margin < report.worst_phi_margin {
            report.worst_phi_margin = phi_margin;
            report.phi_witness = s;
        }
        if phi_margin < -4.0 * f64::EPSILON * phi_bound {
            report.phi_bound_holds = false;
        }
        let dir = random_direction(&mut rng, n_c);
        let point: Vec<C64> = dir.iter().map(|z| z * s).collect();
        let m = metric_at(pot, &point)?;
        let gamma_bound = 2.0 * epsilon * s2 * s + c1 * s;
        let gamma_margin = gamma_bound - christoffel_norm(&m);
        if gamma_margin < report.worst_gamma_margin {
            report.worst_gamma_margin = gamma_margin;
            report.gamma_witness = s;
        }
        if gamma_margin < -4.0 * f64::EPSILON * gamma_bound.max(f64::MIN_POSITIVE) {
            report.gamma_bound_holds = false;
        }
    }
    Ok(report)
}

/// Wirtinger Hessian `∂_i ∂_{j̄} K` by central differences on real coordinates.
pub fn fd_metric(pot: &KahlerPotential, phi: &[C64], h: f64) -> Vec<C64> {
    let n = phi.len();
    let k = |p: &[C64]| pot.value(p.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt());
    // second derivative along real directions a, b (0..2n: x_0, y_0, x_1, ...)
    let shift = |p: &mut Vec<C64>, dir: usize, d: f64| {
        if dir.is_multiple_of(2) {
            p[dir / 2].re += d
        } else {
            p[dir / 2].im += d
        }
    };
    let d2 = |a: usize, b: usize| {
        let mut acc = 0.0;
        for (sa, sb, w) in [(1.0, 1.0, 1.0), (1.0, -1.0, -1.0), (-1.0, 1.0, -1.0), (-1.0, -1.0, 1.0)] {
            let mut p = phi.to_vec();
            shift(&mut p, a, sa * h);
            shift(&mut p, b, sb * h);
            acc += w * k(&p);
        }
        acc / (4.0 * h * h)
    };
    let mut out = vec![C64::new(0.0, 0.0); n * n];
    for i in 0..n {
        for j in 0..n {
            // ∂_i ∂_{j̄} = ¼ (∂_{x_i} − i∂_{y_i})(∂_{x_j} + i∂_{y_j})
            let xx = d2(2 * i, 2 * j);
            let yy = d2(2 * i + 1, 2 * j + 1);
            let xy = d2(2 * i, 2 * j + 1);
            let yx = d2(2 * i + 1, 2 * j);
            out[i * n + j] = C64::new(xx + yy, xy - yx) * 0.25;
        }
    }
    out
}
