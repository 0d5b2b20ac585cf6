//! Run configuration in TOML. Every table rejects unknown keys.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::dynamics::System;
use crate::error::{Error, Result};
use crate::gauge::{GaugeAlgebra, GaugeKinetic};
use crate::integrator::{IntegratorConfig, Scheme};
use crate::kahler::KahlerPotential;
use crate::model::{KillingData, ModelSpec, SuperPotential};
use crate::spectral::SpectralGrid;
use crate::state::InitConfig;
use crate::C64;

/// Environment variable that replaces `output.dir`.
pub const OUTPUT_DIR_ENV: &str = "SUSYFLOW_OUTPUT_DIR";

/// A real number or a `[re, im]` pair.
#[derive(Clone, Copy, Debug, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum Complex {
    Real(f64),
    Pair([f64; 2]),
}

impl From<Complex> for C64 {
    fn from(c: Complex) -> C64 {
        match c {
            Complex::Real(r) => C64::new(r, 0.0),
            Complex::Pair([re, im]) => C64::new(re, im),
        }
    }
}

fn cvec(v: &[Complex]) -> Vec<C64> {
    v.iter().map(|&c| c.into()).collect()
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum AlgebraConfig {
    U1 {
        #[serde(default = "one")]
        copies: usize,
    },
    Su2,
    /// Nonzero `f^a_bc` as `[a, b, c, value]`; antisymmetric partners are filled in.
    Custom { dim: usize, constants: Vec<(usize, usize, usize, f64)> },
}

fn one() -> usize {
    1
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum KineticConfig {
    Identity,
    /// Row-major `n_v × n_v` matrix.
    Constant { base: Vec<Complex> },
    /// `f_ab = base_ab + Σ_i θ^i_ab φ^i`, `theta` as `n_c` row-major matrices.
    Linear { base: Vec<Complex>, theta: Vec<Complex> },
    /// `f_ab = base_ab exp(Σ_i α_i φ^i)`.
    Exponential { base: Vec<Complex>, alpha: Vec<Complex> },
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum KahlerConfig {
    Flat,
    FubiniStudy,
    /// `Φ(s) = Σ_n c_n s^{2n}`.
    EvenPolynomial { coefficients: Vec<f64> },
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SuperpotentialConfig {
    Zero,
    Mass { m: f64 },
    Cubic { g3: f64 },
    /// `W = Σ_i Σ_n c_n (φ^i)^n`.
    Polynomial { coefficients: Vec<Complex> },
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum KillingConfig {
    Ungauged,
    /// One row of charges per gauge generator.
    Charges { charges: Vec<Vec<f64>> },
    Su2Fundamental,
    /// Row-major Hermitian `n_c × n_c` generators.
    Explicit { generators: Vec<Vec<Complex>> },
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub n_c: usize,
    pub algebra: AlgebraConfig,
    #[serde(default = "default_kinetic")]
    pub kinetic: KineticConfig,
    #[serde(default = "default_kahler")]
    pub kahler: KahlerConfig,
    #[serde(default = "default_super")]
    pub superpotential: SuperpotentialConfig,
    #[serde(default = "default_killing")]
    pub killing: KillingConfig,
    #[serde(default)]
    pub fi: Option<Vec<f64>>,
    /// Coefficient of an additional `λ|φ|⁴` term in the potential.
    #[serde(default)]
    pub extra_quartic: f64,
}

fn default_kinetic() -> KineticConfig {
    KineticConfig::Identity
}
fn default_kahler() -> KahlerConfig {
    KahlerConfig::Flat
}
fn default_super() -> SuperpotentialConfig {
    SuperpotentialConfig::Zero
}
fn default_killing() -> KillingConfig {
    KillingConfig::Ungauged
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_box")]
    pub box_length: f64,
}

fn default_n() -> usize {
    16
}
fn default_box() -> f64 {
    2.0 * std::f64::consts::PI
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig { n: default_n(), box_length: default_box() }
    }
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum SchemeName {
    EtdRk2,
    PicardDuhamel,
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum SystemName {
    Modified,
    Original,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSection {
    #[serde(default = "default_scheme")]
    pub scheme: SchemeName,
    pub dt: f64,
    pub t_end: f64,
    #[serde(default = "default_tol")]
    pub picard_tol: f64,
    #[serde(default = "default_iter")]
    pub picard_max_iter: usize,
    #[serde(default = "default_blowup")]
    pub blowup_factor: f64,
    #[serde(default = "default_system")]
    pub system: SystemName,
}

fn default_scheme() -> SchemeName {
    SchemeName::EtdRk2
}
fn default_tol() -> f64 {
    IntegratorConfig::default().picard_tol
}
fn default_iter() -> usize {
    IntegratorConfig::default().picard_max_iter
}
fn default_blowup() -> f64 {
    IntegratorConfig::default().blowup_factor
}
fn default_system() -> SystemName {
    SystemName::Modified
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct InitSection {
    #[serde(default)]
    pub seed: u64,
    pub amplitude: f64,
    #[serde(default = "default_band")]
    pub band: usize,
}

fn default_band() -> usize {
    2
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    #[serde(default = "default_csv")]
    pub diagnostics: String,
    /// Write a snapshot every this many steps; 0 keeps only the final state.
    #[serde(default)]
    pub snapshot_every: usize,
    #[serde(default = "default_prefix")]
    pub snapshot_prefix: String,
}

fn default_dir() -> PathBuf {
    PathBuf::from("output")
}
fn default_csv() -> String {
    "diagnostics.csv".into()
}
fn default_prefix() -> String {
    "snapshot".into()
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { dir: default_dir(), diagnostics: default_csv(), snapshot_every: 0, snapshot_prefix: default_prefix() }
    }
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub name: String,
    pub model: ModelConfig,
    #[serde(default)]
    pub grid: GridConfig,
    pub integrator: IntegratorSection,
    pub init: InitSection,
    #[serde(default)]
    pub output: OutputSection,
}

/// 1-based line of the first `key = ...` inside `[section]` (or any table
/// whose name starts with `section.`).
fn locate(source: &str, section: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    for (i, line) in source.lines().enumerate() {
        let t = line.trim();
        if let Some(name) = t.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            current = name.trim().to_string();
            continue;
        }
        let in_section = current == section || current.starts_with(&format!("{section}."));
        if in_section && t.split('=').next().map(str::trim) == Some(key) {
            return Some(i + 1);
        }
    }
    None
}

fn invalid(source: &str, section: &str, key: &str, msg: String) -> Error {
    match locate(source, section, key) {
        Some(line) => Error::Config(format!("line {line}: {section}.{key}: {msg}")),
        None => Error::Config(format!("{section}.{key}: {msg}")),
    }
}

impl RunConfig {
    /// Parses and validates; error messages carry the offending line.
    pub fn from_toml(source: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(source).map_err(|e| {
            let line = e.span().map(|s| source[..s.start].matches('\n').count() + 1);
            match line {
                Some(l) => Error::Config(format!("line {l}: {}", e.message())),
                None => Error::Config(e.message().to_string()),
            }
        })?;
        cfg.validate(source)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    fn validate(&self, source: &str) -> Result<()> {
        let it = &self.integrator;
        if !(it.dt > 0.0) || !it.dt.is_finite() {
            return Err(invalid(source, "integrator", "dt", format!("must be positive, got {}", it.dt)));
        }
        if !(it.t_end >= 0.0) || !it.t_end.is_finite() {
            return Err(invalid(source, "integrator", "t_end", format!("must be nonnegative, got {}", it.t_end)));
        }
        if !(it.picard_tol > 0.0) {
            return Err(invalid(source, "integrator", "picard_tol", "must be positive".into()));
        }
        if it.picard_max_iter == 0 {
            return Err(invalid(source, "integrator", "picard_max_iter", "must be at least 1".into()));
        }
        if !(it.blowup_factor > 1.0) {
            return Err(invalid(source, "integrator", "blowup_factor", "must exceed 1".into()));
        }
        if self.grid.n < 4 {
            return Err(invalid(source, "grid", "n", format!("must be at least 4, got {}", self.grid.n)));
        }
        if !(self.grid.box_length > 0.0) || !self.grid.box_length.is_finite() {
            return Err(invalid(source, "grid", "box_length", "must be positive".into()));
        }
        if let Err(Error::Config(m)) = self.grid() {
            return Err(invalid(source, "grid", "n", m));
        }
        let max_band = (self.grid.n / 3).max(1);
        if self.init.band == 0 || self.init.band > max_band {
            return Err(invalid(source, "init", "band", format!("must lie in 1..={max_band}")));
        }
        if !(self.init.amplitude >= 0.0) || !self.init.amplitude.is_finite() {
            return Err(invalid(source, "init", "amplitude", "must be finite and nonnegative".into()));
        }
        if self.model.n_c == 0 {
            return Err(invalid(source, "model", "n_c", "must be at least 1".into()));
        }
        self.build_model().map_err(|e| match e {
            Error::Config(m) | Error::Algebra(m) => Error::Config(format!("[model]: {m}")),
            other => other,
        })?;
        Ok(())
    }

    pub fn build_model(&self) -> Result<ModelSpec> {
        let m = &self.model;
        let nc = m.n_c;
        let algebra = match &m.algebra {
            AlgebraConfig::U1 { copies } => GaugeAlgebra::abelian(*copies),
            AlgebraConfig::Su2 => GaugeAlgebra::su2(),
            AlgebraConfig::Custom { dim, constants } => GaugeAlgebra::custom(*dim, constants)?,
        };
        let nv = algebra.n_v();
        let kinetic = match &m.kinetic {
            KineticConfig::Identity => GaugeKinetic::identity(nv, nc),
            KineticConfig::Constant { base } => GaugeKinetic::constant(cvec(base), nv, nc)?,
            KineticConfig::Linear { base, theta } => GaugeKinetic::linear(cvec(base), cvec(theta), nv, nc)?,
            KineticConfig::Exponential { base, alpha } => {
                if alpha.len() != nc {
                    return Err(Error::Config(format!("exponential kinetic needs {nc} entries in alpha")));
                }
                GaugeKinetic::exponential(cvec(base), cvec(alpha), nv)?
            }
        };
        let kahler = match &m.kahler {
            KahlerConfig::Flat => KahlerPotential::flat(),
            KahlerConfig::FubiniStudy => KahlerPotential::fubini_study(),
            KahlerConfig::EvenPolynomial { coefficients } => KahlerPotential::even_polynomial(coefficients.clone())?,
        };
        let superpotential = match &m.superpotential {
            SuperpotentialConfig::Zero => SuperPotential::zero(),
            SuperpotentialConfig::Mass { m } => SuperPotential::mass(*m),
            SuperpotentialConfig::Cubic { g3 } => SuperPotential::cubic(*g3),
            SuperpotentialConfig::Polynomial { coefficients } => SuperPotential::polynomial(cvec(coefficients)),
        };
        let mut killing = match &m.killing {
            KillingConfig::Ungauged => KillingData::ungauged(nv, nc),
            KillingConfig::Charges { charges } => KillingData::charges(charges)?,
            KillingConfig::Su2Fundamental => KillingData::su2_fundamental(),
            KillingConfig::Explicit { generators } => {
                KillingData::explicit(generators.iter().map(|g| cvec(g)).collect(), nc)?
            }
        };
        if let Some(xi) = &m.fi {
            killing = killing.with_fi(xi.clone())?;
        }
        if !m.extra_quartic.is_finite() {
            return Err(Error::Config("extra_quartic must be finite".into()));
        }
        let model = ModelSpec { algebra, kinetic, kahler, superpotential, killing, extra_quartic: m.extra_quartic };
        model.validate()?;
        Ok(model)
    }

    pub fn grid(&self) -> Result<SpectralGrid> {
        SpectralGrid::new(self.grid.n, self.grid.box_length)
    }

    pub fn integrator(&self) -> IntegratorConfig {
        let it = &self.integrator;
        IntegratorConfig {
            scheme: match it.scheme {
                SchemeName::EtdRk2 => Scheme::EtdRk2,
                SchemeName::PicardDuhamel => Scheme::PicardDuhamel,
            },
            dt: it.dt,
            picard_tol: it.picard_tol,
            picard_max_iter: it.picard_max_iter,
            blowup_factor: it.blowup_factor,
            system: match it.system {
                SystemName::Modified => System::Modified,
                SystemName::Original => System::Original,
            },
        }
    }

    pub fn init(&self) -> InitConfig {
        InitConfig { seed: self.init.seed, amplitude: self.init.amplitude, band: self.init.band }
    }

    /// Output directory after applying the environment override.
    pub fn output_dir(&self) -> PathBuf {
        match std::env::var_os(OUTPUT_DIR_ENV) {
            Some(d) if !d.is_empty() => PathBuf::from(d),
            _ => self.output.dir.clone(),
        }
    }
}
