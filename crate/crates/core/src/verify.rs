//! Certification suites run by `susyflow verify`.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::constraint::{charge_density, solve_ec, verify_lemma3, ChargeDensity, EQUIVALENCE_TOL};
use crate::error::Result;
use crate::integrator::{run, IntegratorConfig, NoObserver, Scheme};
use crate::kahler::{certify_estimates, fd_metric, metric_at, profile_f, KahlerPotential};
use crate::model::{lipschitz_probe_v, ModelSpec, SuperPotential};
use crate::probe::{check_envelope, lipschitz_probe_j};
use crate::spectral::SpectralGrid;
use crate::state::{make_initial_data, random_real_field, state_norm, FieldState, InitConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    Kahler,
    Constraint,
    Lipschitz,
    Convergence,
    All,
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub threshold: f64,
    pub detail: String,
}

impl Check {
    fn at_most(name: &str, value: f64, threshold: f64, detail: String) -> Self {
        Check { name: name.into(), passed: value <= threshold, value, threshold, detail }
    }
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct SuiteReport {
    pub suite: String,
    pub passed: bool,
    pub checks: Vec<Check>,
}

impl SuiteReport {
    fn new(suite: &str, checks: Vec<Check>) -> Self {
        SuiteReport { suite: suite.into(), passed: checks.iter().all(|c| c.passed), checks }
    }
}

/// `sup |F′/2s|` over `samples` evenly spaced radii in `[0, radius]`, and where it is attained.
pub fn fubini_study_sup(samples: usize, radius: f64) -> (f64, f64) {
    let pot = KahlerPotential::fubini_study();
    let mut best = (f64::NEG_INFINITY, 0.0);
    for k in 0..samples {
        let s = radius * k as f64 / (samples - 1) as f64;
        let v = profile_f(&pot, s).1.abs();
        if v > best.0 {
            best = (v, s);
        }
    }
    best
}

pub fn kahler_suite() -> Result<SuiteReport> {
    let mut checks = Vec::new();
    let (sup, at) = fubini_study_sup(10_000, 10.0);
    checks.push(Check {
        name: "fubini_study_sup".into(),
        passed: (sup - 2.0).abs() <= 1e-9 && at == 0.0,
        value: sup,
        threshold: 2.0,
        detail: format!("attained at |φ| = {at}"),
    });
    for (label, pot) in [("flat", KahlerPotential::flat()), ("fubini_study", KahlerPotential::fubini_study())] {
        for n_c in [1, 2] {
            let r = certify_estimates(&pot, n_c, 10.0, 10_000)?;
            checks.push(Check {
                name: format!("{label}_n{n_c}_potential_bound"),
                passed: r.phi_bound_holds,
                value: r.worst_phi_margin,
                threshold: 0.0,
                detail: format!("witness |φ| = {:.6e}", r.phi_witness),
            });
            checks.push(Check {
                name: format!("{label}_n{n_c}_christoffel_bound"),
                passed: r.gamma_bound_holds,
                value: r.worst_gamma_margin,
                threshold: 0.0,
                detail: format!("witness |φ| = {:.6e}", r.gamma_witness),
            });
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x6b61);
    let builtins = [
        ("flat", KahlerPotential::flat()),
        ("fubini_study", KahlerPotential::fubini_study()),
        ("even_polynomial", KahlerPotential::even_polynomial(vec![0.0, 1.0, 0.25])?),
    ];
    for (label, pot) in builtins {
        let mut worst = 0.0f64;
        for _ in 0..100 {
            let phi: Vec<_> = (0..2).map(|_| crate::C64::new(rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5))).collect();
            let m = metric_at(&pot, &phi)?;
            let fd = fd_metric(&pot, &phi, 1e-4);
            let scale = m.g.iter().map(|z| z.norm()).fold(0.0, f64::max);
            for (a, b) in m.g.iter().zip(&fd) {
                worst = worst.max((a - b).norm() / scale);
            }
        }
        checks.push(Check::at_most(&format!("{label}_metric_vs_fd_hessian"), worst, 1e-6, "100 random points".into()));
    }
    Ok(SuiteReport::new("kahler", checks))
}

/// Relative divergence residual `‖∂·E_C − 4πρ‖ / ‖4πρ‖` for a random zero-mean density.
pub fn poisson_residual(n: usize, seed: u64) -> Result<f64> {
    let grid = SpectralGrid::new(n, 2.0 * PI)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut r = random_real_field(&mut rng, &grid, (n / 3).max(1), 1.0);
    let mean = r.iter().sum::<f64>() / r.len() as f64;
    r.iter_mut().for_each(|x| *x -= mean);
    let ec = solve_ec(&ChargeDensity { rho: vec![r.clone()], zero_mode: 0.0 }, &grid);
    let div = grid.div(&ec.e_c[0]);
    let diff: Vec<f64> = div.iter().zip(&r).map(|(d, q)| d - 4.0 * PI * q).collect();
    Ok(grid.l2_norm_r(&diff) / (4.0 * PI * grid.l2_norm_r(&r)))
}

/// Adds `∇χ` for a random `χ`, which changes only the longitudinal electric field.
pub fn perturb_longitudinal(state: &FieldState, grid: &SpectralGrid, amplitude: f64, seed: u64) -> FieldState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let chi = random_real_field(&mut rng, grid, 2.min(grid.n() / 3), amplitude);
    let g = grid.grad_r(&chi);
    let mut out = state.clone();
    for v in out.e.iter_mut() {
        for s in 0..3 {
            for (x, d) in v[s].iter_mut().zip(&g[s]) {
                *x += d;
            }
        }
    }
    out
}

/// Gauss law against the longitudinal gap, both directions: constraint-satisfying
/// data has both sides small, a longitudinal perturbation makes both large.
pub fn equivalence_checks(model: &ModelSpec, grid: &SpectralGrid, init: &InitConfig) -> Result<Vec<Check>> {
    let (s, _) = make_initial_data(model, grid, init)?;
    let good = verify_lemma3(&s, model, grid, EQUIVALENCE_TOL)?;
    let bad = verify_lemma3(&perturb_longitudinal(&s, grid, 0.1, init.seed ^ 1), model, grid, EQUIVALENCE_TOL)?;
    Ok(vec![
        Check {
            name: "equivalence_satisfied_state".into(),
            passed: good.equivalence_holds() && good.gap_small,
            value: good.residual / good.scale,
            threshold: EQUIVALENCE_TOL,
            detail: format!("gap {:.3e}, residual {:.3e}", good.longitudinal_gap, good.residual),
        },
        Check {
            name: "equivalence_violated_state".into(),
            passed: bad.equivalence_holds() && !bad.gap_small,
            value: bad.residual / bad.scale,
            threshold: EQUIVALENCE_TOL,
            detail: format!("gap {:.3e}, residual {:.3e}", bad.longitudinal_gap, bad.residual),
        },
    ])
}

pub fn constraint_suite() -> Result<SuiteReport> {
    let mut checks = Vec::new();
    for n in [16, 32] {
        let r = poisson_residual(n, n as u64)?;
        checks.push(Check::at_most(&format!("poisson_n{n}"), r, 1e-12, "relative divergence residual".into()));
    }
    let grid = SpectralGrid::new(16, 2.0 * PI)?;
    for (label, model) in [("abelian_higgs", ModelSpec::abelian_higgs()), ("su2_doublet", su2_doublet())] {
        for mut c in equivalence_checks(&model, &grid, &InitConfig { seed: 11, amplitude: 0.3, band: 2 })? {
            c.name = format!("{label}_{}", c.name);
            checks.push(c);
        }
    }
    let (s, _) = make_initial_data(&ModelSpec::abelian_higgs(), &grid, &InitConfig { seed: 5, amplitude: 0.3, band: 2 })?;
    let rho = charge_density(&s, &ModelSpec::abelian_higgs(), &grid)?;
    checks.push(Check::at_most("initial_net_charge", rho.zero_mode.abs(), 1e-10, "neutralized zero mode".into()));
    Ok(SuiteReport::new("constraint", checks))
}

/// `su(2)` with one flat doublet and unit couplings.
pub fn su2_doublet() -> ModelSpec {
    ModelSpec {
        algebra: crate::gauge::GaugeAlgebra::su2(),
        kinetic: crate::gauge::GaugeKinetic::identity(3, 2),
        killing: crate::model::KillingData::su2_fundamental(),
        ..ModelSpec::free(3, 2)
    }
}

pub fn lipschitz_suite() -> Result<SuiteReport> {
    let grid = SpectralGrid::new(16, 2.0 * PI)?;
    let model = ModelSpec::abelian_higgs();
    let mut reps = Vec::new();
    for r in [1.0, 2.0, 4.0] {
        reps.push(lipschitz_probe_j(&model, &grid, r, 8, 21)?);
    }
    let mut checks: Vec<Check> = reps
        .iter()
        .map(|r| Check {
            name: format!("ratios_finite_r{}", r.radius),
            passed: r.finite,
            value: r.j1.max(r.j2).max(r.j4),
            threshold: f64::INFINITY,
            detail: format!("J1 {:.3e} J2 {:.3e} J4 {:.3e}", r.j1, r.j2, r.j4),
        })
        .collect();
    let env = check_envelope(&reps, 3);
    let worst = env.growth.iter().flat_map(|g| g.iter().copied()).fold(0.0, f64::max);
    checks.push(Check {
        name: "envelope".into(),
        passed: env.holds,
        value: worst,
        threshold: env.limits.iter().copied().fold(f64::INFINITY, f64::min),
        detail: format!("fitted slopes {:?}", env.fitted_slopes),
    });
    let m = 1.3;
    let mass = ModelSpec { superpotential: SuperPotential::mass(m), ..ModelSpec::free(1, 2) };
    let l = lipschitz_probe_v(&mass, 2.0, 200, 3)?;
    checks.push(Check::at_most("mass_probe", (l - m * m).abs() / (m * m), 0.05, format!("probe {l:.6} vs m² {:.6}", m * m)));
    Ok(SuiteReport::new("lipschitz", checks))
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceOptions {
    pub n: usize,
    pub init: InitConfig,
    pub t_end: f64,
    /// Coarsest step; the two finer runs halve it.
    pub dt: f64,
    /// End time of the scheme comparison.
    pub compare_t: f64,
}

impl Default for ConvergenceOptions {
    fn default() -> Self {
        ConvergenceOptions { n: 16, init: InitConfig { seed: 7, amplitude: 0.1, band: 1 }, t_end: 0.2, dt: 4e-3, compare_t: 0.1 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceResult {
    pub order: f64,
    pub errors: [f64; 2],
    pub scheme_gap: f64,
}

/// Self-convergence order of the explicit scheme and its agreement with the implicit one.
pub fn convergence_study(model: &ModelSpec, opts: &ConvergenceOptions) -> Result<ConvergenceResult> {
    let grid = SpectralGrid::new(opts.n, 2.0 * PI)?;
    let (s, _) = make_initial_data(model, &grid, &opts.init)?;
    let solve = |scheme, dt, t| -> Result<FieldState> {
        let cfg = IntegratorConfig { scheme, dt, ..Default::default() };
        Ok(run(&s, model, &grid, &cfg, t, &mut NoObserver)?.final_state)
    };
    let u: Vec<FieldState> =
        [1.0, 0.5, 0.25].iter().map(|f| solve(Scheme::EtdRk2, opts.dt * f, opts.t_end)).collect::<Result<_>>()?;
    let e0 = state_norm(&u[0].difference(&u[1]), &grid);
    let e1 = state_norm(&u[1].difference(&u[2]), &grid);
    let fine = opts.dt * 0.25;
    let a = solve(Scheme::EtdRk2, fine, opts.compare_t)?;
    let b = solve(Scheme::PicardDuhamel, fine, opts.compare_t)?;
    let scheme_gap = state_norm(&a.difference(&b), &grid) / state_norm(&a, &grid);
    Ok(ConvergenceResult { order: (e0 / e1).log2(), errors: [e0, e1], scheme_gap })
}

pub fn convergence_suite(opts: &ConvergenceOptions) -> Result<SuiteReport> {
    let r = convergence_study(&ModelSpec::abelian_higgs(), opts)?;
    let checks = vec![
        Check {
            name: "etd_rk2_order".into(),
            passed: (r.order - 2.0).abs() <= 0.3,
            value: r.order,
            threshold: 2.0,
            detail: format!("successive differences {:.3e}, {:.3e}", r.errors[0], r.errors[1]),
        },
        Check::at_most("picard_vs_etd", r.scheme_gap, 1e-6, format!("relative ℋ gap at t = {}", opts.compare_t)),
    ];
    Ok(SuiteReport::new("convergence", checks))
}

pub fn run_suite(suite: Suite) -> Result<Vec<SuiteReport>> {
    Ok(match suite {
        Suite::Kahler => vec![kahler_suite()?],
        Suite::Constraint => vec![constraint_suite()?],
        Suite::Lipschitz => vec![lipschitz_suite()?],
        Suite::Convergence => vec![convergence_suite(&ConvergenceOptions::default())?],
        Suite::All => vec![
            kahler_suite()?,
            constraint_suite()?,
            lipschitz_suite()?,
            convergence_suite(&ConvergenceOptions::default())?,
        ],
    })
}
