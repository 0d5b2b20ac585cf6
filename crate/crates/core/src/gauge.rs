//! Lie-algebra data, holomorphic gauge kinetic functions and field strengths.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::spectral::{ComplexField, RealField, SpectralGrid, VectorField};
use crate::C64;

/// Structure constants `f^a_{bc}`, stored at `f[(a*n + b)*n + c]`.
#[derive(Clone, Debug, PartialEq)]
pub struct GaugeAlgebra {
    n_v: usize,
    f: Vec<f64>,
}

impl GaugeAlgebra {
    /// `u(1)ⁿ`.
    pub fn abelian(n_v: usize) -> Self {
        GaugeAlgebra { n_v, f: vec![0.0; n_v * n_v * n_v] }
    }

    /// `su(2)` with `f^a_{bc} = ε_{abc}`.
    pub fn su2() -> Self {
        let mut f = vec![0.0; 27];
        for (a, b, c) in [(0, 1, 2), (1, 2, 0), (2, 0, 1)] {
            f[(a * 3 + b) * 3 + c] = 1.0;
            f[(a * 3 + c) * 3 + b] = -1.0;
        }
        GaugeAlgebra { n_v: 3, f }
    }

    /// Sparse constants `(a, b, c, f^a_{bc})`; the `(a, c, b)` entry is filled by antisymmetry.
    pub fn custom(n_v: usize, entries: &[(usize, usize, usize, f64)]) -> Result<Self> {
        let mut f = vec![0.0; n_v * n_v * n_v];
        for &(a, b, c, v) in entries {
            if a >= n_v || b >= n_v || c >= n_v {
                return Err(Error::Algebra(format!("index ({a},{b},{c}) out of range for n_v = {n_v}")));
            }
            if b == c && v != 0.0 {
                return Err(Error::Algebra(format!("f^{a}_{{{b}{b}}} must vanish")));
            }
            f[(a * n_v + b) * n_v + c] = v;
            f[(a * n_v + c) * n_v + b] = -v;
        }
        let alg = GaugeAlgebra { n_v, f };
        alg.validate()?;
        Ok(alg)
    }

    pub fn n_v(&self) -> usize {
        self.n_v
    }

    #[inline]
    pub fn f(&self, a: usize, b: usize, c: usize) -> f64 {
        self.f[(a * self.n_v + b) * self.n_v + c]
    }

    pub fn is_abelian(&self) -> bool {
        self.f.iter().all(|&v| v == 0.0)
    }

    /// Largest Jacobi-identity residual.
    pub fn jacobi_residual(&self) -> f64 {
        let n = self.n_v;
        let mut worst = 0.0f64;
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    for d in 0..n {
                        let mut s = 0.0;
                        for e in 0..n {
                            s += self.f(a, b, e) * self.f(e, c, d)
                                + self.f(a, c, e) * self.f(e, d, b)
                                + self.f(a, d, e) * self.f(e, b, c);
                        }
                        worst = worst.max(s.abs());
                    }
                }
            }
        }
        worst
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_v;
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    if self.f(a, b, c) != -self.f(a, c, b) {
                        return Err(Error::Algebra(format!("f^{a}_{{{b}{c}}} is not antisymmetric")));
                    }
                }
            }
        }
        let j = self.jacobi_residual();
        if j > 1e-12 {
            return Err(Error::Algebra(format!("Jacobi identity violated, residual {j:.3e}")));
        }
        Ok(())
    }
}

/// `φ ↦ (f_ab(φ), ∂_i f_ab(φ))`, returning row-major `n_v²` and `n_c·n_v²` arrays.
pub type KineticFn = Arc<dyn Fn(&[C64]) -> (Vec<C64>, Vec<C64>) + Send + Sync>;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KineticKind {
    Constant,
    LinearHolomorphic,
    CustomHolomorphic,
}

/// Holomorphic gauge kinetic function `f_ab(φ) = h_ab + i k_ab`.
#[derive(Clone)]
pub struct GaugeKinetic {
    kind: KineticKind,
    n_v: usize,
    n_c: usize,
    base: Vec<C64>,
    /// Linear coefficients, `theta[(i*n_v + a)*n_v + b]`.
    theta: Vec<C64>,
    custom: Option<KineticFn>,
}

impl fmt::Debug for GaugeKinetic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GaugeKinetic")
            .field("kind", &self.kind)
            .field("n_v", &self.n_v)
            .field("n_c", &self.n_c)
            .field("base", &self.base)
            .finish()
    }
}

fn check_symmetric(n_v: usize, m: &[C64], what: &str) -> Result<()> {
    for a in 0..n_v {
        for b in 0..n_v {
            if m[a * n_v + b] != m[b * n_v + a] {
                return Err(Error::Config(format!("{what} must be a symmetric matrix")));
            }
        }
    }
    Ok(())
}

impl GaugeKinetic {
    pub fn constant(base: Vec<C64>, n_v: usize, n_c: usize) -> Result<Self> {
        if base.len() != n_v * n_v {
            return Err(Error::Config(format!("kinetic base needs {} entries", n_v * n_v)));
        }
        check_symmetric(n_v, &base, "kinetic base")?;
        Ok(GaugeKinetic { kind: KineticKind::Constant, n_v, n_c, base, theta: vec![], custom: None })
    }

    /// `f_ab = δ_ab`.
    pub fn identity(n_v: usize, n_c: usize) -> Self {
        Self::constant(identity(n_v), n_v, n_c).expect("identity is symmetric")
    }

    /// `f_ab = base_ab + Σ_i θ^i_ab φ^i`.
    pub fn linear(base: Vec<C64>, theta: Vec<C64>, n_v: usize, n_c: usize) -> Result<Self> {
        let mut gk = Self::constant(base, n_v, n_c)?;
        if theta.len() != n_c * n_v * n_v {
            return Err(Error::Config(format!("linear kinetic coefficients need {} entries", n_c * n_v * n_v)));
        }
        for i in 0..n_c {
            check_symmetric(n_v, &theta[i * n_v * n_v..(i + 1) * n_v * n_v], "linear kinetic coefficient")?;
        }
        gk.kind = KineticKind::LinearHolomorphic;
        gk.theta = theta;
        Ok(gk)
    }

    /// `f_ab = base_ab + δ_ab Σ_i α_i φ^i`.
    pub fn linear_diagonal(base: Vec<C64>, alpha: &[C64], n_v: usize) -> Result<Self> {
        let n_c = alpha.len();
        let mut theta = vec![C64::new(0.0, 0.0); n_c * n_v * n_v];
        for (i, &al) in alpha.iter().enumerate() {
            for a in 0..n_v {
                theta[(i * n_v + a) * n_v + a] = al;
            }
        }
        Self::linear(base, theta, n_v, n_c)
    }

    /// Any holomorphic `f_ab`; the caller supplies the derivatives.
    pub fn custom(n_v: usize, n_c: usize, eval: KineticFn) -> Self {
        GaugeKinetic {
            kind: KineticKind::CustomHolomorphic,
            n_v,
            n_c,
            base: identity(n_v),
            theta: vec![],
            custom: Some(eval),
        }
    }

    /// `f_ab = base_ab · exp(Σ_i α_i φ^i)`.
    pub fn exponential(base: Vec<C64>, alpha: Vec<C64>, n_v: usize) -> Result<Self> {
        if base.len() != n_v * n_v {
            return Err(Error::Config(format!("kinetic base needs {} entries", n_v * n_v)));
        }
        check_symmetric(n_v, &base, "kinetic base")?;
        let n_c = alpha.len();
        let b2 = base.clone();
        let eval: KineticFn = Arc::new(move |phi: &[C64]| {
            let w: C64 = alpha.iter().zip(phi).map(|(a, p)| a * p).sum::<C64>().exp();
            let f: Vec<C64> = b2.iter().map(|b| b * w).collect();
            let mut df = Vec::with_capacity(alpha.len() * f.len());
            for a in &alpha {
                df.extend(f.iter().map(|v| v * a));
            }
            (f, df)
        });
        let mut gk = Self::custom(n_v, n_c, eval);
        gk.base = base;
        Ok(gk)
    }

    pub fn kind(&self) -> KineticKind {
        self.kind
    }

    pub fn is_constant(&self) -> bool {
        self.kind == KineticKind::Constant
    }

    pub fn n_v(&self) -> usize {
        self.n_v
    }

    pub fn n_c(&self) -> usize {
        self.n_c
    }

    /// `(f_ab, ∂_i f_ab)` at one target point.
    pub fn eval(&self, phi: &[C64]) -> (Vec<C64>, Vec<C64>) {
        let nn = self.n_v * self.n_v;
        match self.kind {
            KineticKind::Constant => (self.base.clone(), vec![C64::new(0.0, 0.0); self.n_c * nn]),
            KineticKind::LinearHolomorphic => {
                let mut f = self.base.clone();
                for (i, p) in phi.iter().enumerate() {
                    for ab in 0..nn {
                        f[ab] += self.theta[i * nn + ab] * p;
                    }
                }
                (f, self.theta.clone())
            }
            KineticKind::CustomHolomorphic => (self.custom.as_ref().expect("custom kinetic carries a function"))(phi),
        }
    }
}

pub fn identity(n: usize) -> Vec<C64> {
    let mut m = vec![C64::new(0.0, 0.0); n * n];
    for a in 0..n {
        m[a * n + a] = C64::new(1.0, 0.0);
    }
    m
}

/// Inverse of a symmetric positive-definite real matrix, `None` if not positive definite.
pub fn spd_inverse(n: usize, m: &[f64]) -> Option<Vec<f64>> {
    if n == 1 {
        return (m[0] > 0.0).then(|| vec![1.0 / m[0]]);
    }
    let mat = DMatrix::from_row_slice(n, n, m);
    let chol = mat.cholesky()?;
    let inv = chol.inverse();
    Some((0..n * n).map(|idx| inv[(idx / n, idx % n)]).collect())
}

/// `h`, `k`, `h⁻¹`, `∂_i f` and the chain-rule gradients on the grid.
/// Per-point matrices are stored point-major: `h[p*n_v² + a*n_v + b]`.
#[derive(Clone, Debug)]
pub struct KineticSplit {
    pub n_v: usize,
    pub n_c: usize,
    pub constant: bool,
    pub h: Vec<f64>,
    pub k: Vec<f64>,
    pub h_inv: Vec<f64>,
    /// `df[(p*n_c + i)*n_v² + ab] = ∂_i f_ab`.
    pub df: Vec<C64>,
    /// `dh[s][p*n_v² + ab] = ∂_s h_ab = Re(∂_i f_ab ∂_s φ^i)`.
    pub dh: [Vec<f64>; 3],
    pub dk: [Vec<f64>; 3],
}

impl KineticSplit {
    #[inline]
    pub fn h(&self, p: usize, a: usize, b: usize) -> f64 {
        self.h[p * self.n_v * self.n_v + a * self.n_v + b]
    }
    #[inline]
    pub fn k(&self, p: usize, a: usize, b: usize) -> f64 {
        self.k[p * self.n_v * self.n_v + a * self.n_v + b]
    }
    #[inline]
    pub fn h_inv(&self, p: usize, a: usize, b: usize) -> f64 {
        self.h_inv[p * self.n_v * self.n_v + a * self.n_v + b]
    }
    #[inline]
    pub fn df(&self, p: usize, i: usize, a: usize, b: usize) -> C64 {
        let nn = self.n_v * self.n_v;
        self.df[(p * self.n_c + i) * nn + a * self.n_v + b]
    }
    #[inline]
    pub fn dh(&self, s: usize, p: usize, a: usize, b: usize) -> f64 {
        self.dh[s][p * self.n_v * self.n_v + a * self.n_v + b]
    }
    #[inline]
    pub fn dk(&self, s: usize, p: usize, a: usize, b: usize) -> f64 {
        self.dk[s][p * self.n_v * self.n_v + a * self.n_v + b]
    }
}

pub fn kinetic_split(gk: &GaugeKinetic, phi: &[ComplexField], grid: &SpectralGrid) -> Result<KineticSplit> {
    let dphi: Vec<[ComplexField; 3]> = if gk.is_constant() { vec![] } else { phi.iter().map(|f| grid.grad_c(f)).collect() };
    kinetic_split_with_gradient(gk, phi, &dphi, grid.len())
}

/// As [`kinetic_split`] with precomputed `∂_s φ^i` (ignored for constant couplings).
pub fn kinetic_split_with_gradient(
    gk: &GaugeKinetic,
    phi: &[ComplexField],
    dphi: &[[ComplexField; 3]],
    len: usize,
) -> Result<KineticSplit> {
    let (nv, nc) = (gk.n_v, gk.n_c);
    let nn = nv * nv;
    let mut out = KineticSplit {
        n_v: nv,
        n_c: nc,
        constant: gk.is_constant(),
        h: vec![0.0; len * nn],
        k: vec![0.0; len * nn],
        h_inv: vec![0.0; len * nn],
        df: vec![C64::new(0.0, 0.0); len * nc * nn],
        dh: [vec![0.0; len * nn], vec![0.0; len * nn], vec![0.0; len * nn]],
        dk: [vec![0.0; len * nn], vec![0.0; len * nn], vec![0.0; len * nn]],
    };
    if gk.is_constant() {
        let h: Vec<f64> = gk.base.iter().map(|z| z.re).collect();
        let h_inv = spd_inverse(nv, &h).ok_or(Error::SingularKinetic { point: 0 })?;
        for p in 0..len {
            for ab in 0..nn {
                out.h[p * nn + ab] = h[ab];
                out.k[p * nn + ab] = gk.base[ab].im;
                out.h_inv[p * nn + ab] = h_inv[ab];
            }
        }
        return Ok(out);
    }
    let mut point = vec![C64::new(0.0, 0.0); nc];
    for p in 0..len {
        for i in 0..nc {
            point[i] = phi[i][p];
        }
        let (f, df) = gk.eval(&point);
        let h: Vec<f64> = f.iter().map(|z| z.re).collect();
        let h_inv = spd_inverse(nv, &h).ok_or(Error::SingularKinetic { point: p })?;
        for ab in 0..nn {
            out.h[p * nn + ab] = h[ab];
            out.k[p * nn + ab] = f[ab].im;
            out.h_inv[p * nn + ab] = h_inv[ab];
        }
        out.df[p * nc * nn..(p + 1) * nc * nn].copy_from_slice(&df);
        for s in 0..3 {
            for ab in 0..nn {
                let mut acc = C64::new(0.0, 0.0);
                for i in 0..nc {
                    acc += df[i * nn + ab] * dphi[i][s][p];
                }
                out.dh[s][p * nn + ab] = acc.re;
                out.dk[s][p * nn + ab] = acc.im;
            }
        }
    }
    Ok(out)
}

/// `ℱ^a_{rs}` and the magnetic field `B^a_s = ½ ε_{srl} ℱ^a_{rl}`.
/// The electric components are `ℱ^a_{0s} = −E^a_s` and are not stored.
#[derive(Clone, Debug)]
pub struct FieldStrengthEval {
    pub f: Vec<[[RealField; 3]; 3]>,
    pub b: Vec<VectorField>,
}

pub fn field_strength(alg: &GaugeAlgebra, a: &[VectorField], grid: &SpectralGrid) -> FieldStrengthEval {
    let da: Vec<[VectorField; 3]> = a.iter().map(|ac| [grid.grad_r(&ac[0]), grid.grad_r(&ac[1]), grid.grad_r(&ac[2])]).collect();
    field_strength_with_gradient(alg, a, &da, grid)
}

/// As [`field_strength`] with `da[a][s][r] = ∂_r A^a_s` precomputed.
pub fn field_strength_with_gradient(
    alg: &GaugeAlgebra,
    a: &[VectorField],
    da: &[[VectorField; 3]],
    grid: &SpectralGrid,
) -> FieldStrengthEval {
    let nv = alg.n_v();
    let len = grid.len();
    let zero = || -> [[RealField; 3]; 3] { std::array::from_fn(|_| std::array::from_fn(|_| vec![0.0; len])) };
    let mut f: Vec<[[RealField; 3]; 3]> = (0..nv).map(|_| zero()).collect();
    for c in 0..nv {
        for r in 0..3 {
            for s in (r + 1)..3 {
                let mut v: RealField = (0..len).map(|p| da[c][s][r][p] - da[c][r][s][p]).collect();
                if !alg.is_abelian() {
                    let mut quad = vec![0.0; len];
                    for b1 in 0..nv {
                        for b2 in 0..nv {
                            let fc = alg.f(c, b1, b2);
                            if fc == 0.0 {
                                continue;
                            }
                            for p in 0..len {
                                quad[p] += fc * a[b1][r][p] * a[b2][s][p];
                            }
                        }
                    }
                    grid.dealias_r(&mut quad);
                    for p in 0..len {
                        v[p] += quad[p];
                    }
                }
                let neg: RealField = v.iter().map(|x| -x).collect();
                f[c][r][s] = v;
                f[c][s][r] = neg;
            }
        }
    }
    let b = f.iter().map(|fc| [fc[1][2].clone(), fc[2][0].clone(), fc[0][1].clone()]).collect();
    FieldStrengthEval { f, b }
}

/// Ratios `‖∂_s h_ab‖_{H₁}/‖φ‖_{H₂}` over a set of sample fields.
#[derive(Clone, Debug, PartialEq)]
pub struct GrowthReport {
    /// `(‖φ‖_{H₂}, ratio)` for each usable sample.
    pub points: Vec<(f64, f64)>,
    pub sup_ratio: f64,
    /// Least-squares slope of `log ratio` against `log ‖φ‖_{H₂}`.
    pub log_slope: f64,
    pub growth_flagged: bool,
}

/// Slope of the log-log fit above which a growth trend is flagged.
pub const GROWTH_SLOPE_LIMIT: f64 = 0.5;

pub fn check_linear_growth(gk: &GaugeKinetic, samples: &[Vec<ComplexField>], grid: &SpectralGrid) -> Result<GrowthReport> {
    if samples.is_empty() {
        return Err(Error::Config("check_linear_growth needs at least one sample".into()));
    }
    let nn = gk.n_v * gk.n_v;
    let mut points = Vec::new();
    for phi in samples {
        let norm_phi = phi.iter().map(|f| grid.sobolev_norm_c(f, 2).powi(2)).sum::<f64>().sqrt();
        if norm_phi == 0.0 {
            continue;
        }
        let split = kinetic_split(gk, phi, grid)?;
        let mut acc = 0.0;
        for s in 0..3 {
            for ab in 0..nn {
                let comp: RealField = (0..grid.len()).map(|p| split.dh[s][p * nn + ab]).collect();
                acc += grid.sobolev_norm_r(&comp, 1).powi(2);
            }
        }
        points.push((norm_phi, acc.sqrt() / norm_phi));
    }
    let sup_ratio = points.iter().map(|p| p.1).fold(0.0, f64::max);
    let log_slope = log_log_slope(&points);
    Ok(GrowthReport { growth_flagged: log_slope > GROWTH_SLOPE_LIMIT, points, sup_ratio, log_slope })
}

fn log_log_slope(points: &[(f64, f64)]) -> f64 {
    let pts: Vec<(f64, f64)> = points.iter().filter(|p| p.0 > 0.0 && p.1 > 0.0).map(|p| (p.0.ln(), p.1.ln())).collect();
    if pts.len() < 2 {
        return 0.0;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}
