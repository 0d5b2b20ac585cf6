//! Time stepping of `u(t+h) = e^{h𝒜}u(t) + ∫ e^{(t+h−s)𝒜} J(u(s)) ds` and run orchestration.

use std::io::Write;

use log::{debug, info};

use crate::constraint::{charge_density_with, fit_decay_constant, residual_from};
use crate::dynamics::{assemble_j_system, energy_with, linear_propagate, Prepared, System};
use crate::error::{Error, Result};
use crate::model::ModelSpec;
use crate::spectral::SpectralGrid;
use crate::state::{sobolev_report, state_norm, FieldState, SobolevReport};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scheme {
    /// Trapezoidal Duhamel quadrature solved by fixed-point iteration.
    PicardDuhamel,
    /// Two-stage integrating-factor Runge–Kutta with the exact propagator.
    EtdRk2,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IntegratorConfig {
    pub scheme: Scheme,
    pub dt: f64,
    pub picard_tol: f64,
    pub picard_max_iter: usize,
    /// Blow-up is declared once `‖u‖_ℋ` exceeds this multiple of its initial value.
    pub blowup_factor: f64,
    pub system: System,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            scheme: Scheme::EtdRk2,
            dt: 1e-3,
            picard_tol: 1e-12,
            picard_max_iter: 50,
            blowup_factor: 1e6,
            system: System::Modified,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.picard_tol > 0.0) {
            return Err(Error::Config(format!("picard_tol must be positive, got {}", self.picard_tol)));
        }
        if self.picard_max_iter == 0 {
            return Err(Error::Config("picard_max_iter must be at least 1".into()));
        }
        if !(self.blowup_factor > 1.0) {
            return Err(Error::Config(format!("blowup_factor must exceed 1, got {}", self.blowup_factor)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct StepOutput {
    pub state: FieldState,
    /// Fixed-point iterations used (0 for the explicit scheme).
    pub picard_iterations: usize,
}

fn j_state(state: &FieldState, model: &ModelSpec, grid: &SpectralGrid, system: System) -> Result<FieldState> {
    Ok(assemble_j_system(state, model, grid, system)?.as_state(state.time))
}

/// Advances by one step of size `dt`.
pub fn step(state: &FieldState, model: &ModelSpec, grid: &SpectralGrid, cfg: &IntegratorConfig) -> Result<StepOutput> {
    step_with(state, model, grid, cfg, |u| j_state(u, model, grid, cfg.system))
}

/// One step with an arbitrary nonlinearity `J`.
pub fn step_with<F>(state: &FieldState, _model: &ModelSpec, grid: &SpectralGrid, cfg: &IntegratorConfig, mut j: F) -> Result<StepOutput>
where
    F: FnMut(&FieldState) -> Result<FieldState>,
{
    let h = cfg.dt;
    let j0 = j(state)?;
    let j0_zero = j0.is_zero();
    match cfg.scheme {
        Scheme::EtdRk2 => {
            if j0_zero {
                // u* = S u, so the second stage is J(S u)
                let su = linear_propagate(state, h, grid);
                let j1 = j(&su)?;
                if j1.is_zero() {
                    return Ok(StepOutput { state: su, picard_iterations: 0 });
                }
                let mut out = su;
                out.add_scaled(0.5 * h, &j1);
                return Ok(StepOutput { state: out, picard_iterations: 0 });
            }
            let mut pred = state.clone();
            pred.add_scaled(h, &j0);
            let u_star = linear_propagate(&pred, h, grid);
            let j1 = j(&u_star)?;
            let mut half = state.clone();
            half.add_scaled(0.5 * h, &j0);
            let mut out = linear_propagate(&half, h, grid);
            out.add_scaled(0.5 * h, &j1);
            Ok(StepOutput { state: out, picard_iterations: 0 })
        }
        Scheme::PicardDuhamel => {
            let su = linear_propagate(state, h, grid);
            let sj = if j0_zero { None } else { Some(linear_propagate(&j0, h, grid)) };
            // explicit predictor
            let mut v = su.clone();
            if let Some(sj) = &sj {
                v.add_scaled(h, sj);
            }
            let mut last = f64::INFINITY;
            for it in 1..=cfg.picard_max_iter {
                let jv = j(&v)?;
                let mut next = su.clone();
                if let Some(sj) = &sj {
                    next.add_scaled(0.5 * h, sj);
                }
                if !jv.is_zero() {
                    next.add_scaled(0.5 * h, &jv);
                }
                if !next.is_finite() {
                    return Err(Error::NonFinite { quantity: "Picard iterate", point: 0 });
                }
                let diff = state_norm(&next.difference(&v), grid);
                let scale = state_norm(&next, grid);
                v = next;
                last = diff;
                if diff <= cfg.picard_tol * scale.max(f64::MIN_POSITIVE) || diff == 0.0 {
                    return Ok(StepOutput { state: v, picard_iterations: it });
                }
            }
            Err(Error::StepSize { iterations: cfg.picard_max_iter, last_update: last })
        }
    }
}

/// One row of the diagnostics table.
#[derive(Clone, Debug, PartialEq)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub norms: SobolevReport,
    pub constraint_l2: f64,
    pub zero_mode: f64,
    pub energy: f64,
    pub picard_iterations: usize,
}

pub const CSV_HEADER: &str =
    "t,norm,a_h1,a_h2,e_h1,e_h2,phi_h1,phi_h2,pi_h1,pi_h2,constraint_l2,zero_mode,energy,picard_iterations";

impl DiagnosticsRecord {
    pub fn csv_row(&self) -> String {
        let n = &self.norms;
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.t,
            n.composite,
            n.a_h1,
            n.a_h2,
            n.e_h1,
            n.e_h2,
            n.phi_h1,
            n.phi_h2,
            n.pi_h1,
            n.pi_h2,
            self.constraint_l2,
            self.zero_mode,
            self.energy,
            self.picard_iterations
        )
    }

    pub fn parse_csv_row(line: &str) -> Result<Self> {
        let f: Vec<&str> = line.trim().split(',').collect();
        if f.len() != 14 {
            return Err(Error::Config(format!("diagnostics row has {} columns, expected 14", f.len())));
        }
        let num = |i: usize| -> Result<f64> { f[i].parse().map_err(|_| Error::Config(format!("bad number `{}`", f[i]))) };
        Ok(DiagnosticsRecord {
            t: num(0)?,
            norms: SobolevReport {
                composite: num(1)?,
                a_h1: num(2)?,
                a_h2: num(3)?,
                e_h1: num(4)?,
                e_h2: num(5)?,
                phi_h1: num(6)?,
                phi_h2: num(7)?,
                pi_h1: num(8)?,
                pi_h2: num(9)?,
            },
            constraint_l2: num(10)?,
            zero_mode: num(11)?,
            energy: num(12)?,
            picard_iterations: f[13].parse().map_err(|_| Error::Config(format!("bad count `{}`", f[13])))?,
        })
    }
}

pub fn diagnostics(state: &FieldState, model: &ModelSpec, grid: &SpectralGrid, picard_iterations: usize) -> Result<DiagnosticsRecord> {
    let prep = Prepared::new(state, model, grid)?;
    let rho = charge_density_with(state, model, grid, &prep.geo, &prep.fs);
    let c = residual_from(state, &rho, grid);
    let constraint_l2 = c.iter().map(|f| grid.l2_norm_r(f).powi(2)).sum::<f64>().sqrt();
    Ok(DiagnosticsRecord {
        t: state.time,
        norms: sobolev_report(state, grid),
        constraint_l2,
        zero_mode: rho.zero_mode,
        energy: energy_with(state, model, grid, &prep)?,
        picard_iterations,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub enum Outcome {
    Completed,
    BlowUp { t_max: f64, reason: String },
}

#[derive(Clone, Debug)]
pub struct RunResult {
    pub outcome: Outcome,
    pub final_state: FieldState,
    pub records: Vec<DiagnosticsRecord>,
    /// `(t, ‖u‖_ℋ)` after every step, starting at the initial state.
    pub norm_trajectory: Vec<(f64, f64)>,
    /// Fitted constant of the constraint growth bound, when defined.
    pub decay_constant: Option<f64>,
}

impl RunResult {
    pub fn blew_up(&self) -> bool {
        matches!(self.outcome, Outcome::BlowUp { .. })
    }
}

/// Hooks called while a run progresses.
pub trait RunObserver {
    fn record(&mut self, _rec: &DiagnosticsRecord) -> Result<()> {
        Ok(())
    }
    fn state(&mut self, _step: usize, _state: &FieldState) -> Result<()> {
        Ok(())
    }
}

/// Observer that ignores everything.
pub struct NoObserver;
impl RunObserver for NoObserver {}

/// Streams diagnostics rows to a writer.
pub struct CsvObserver<W: Write> {
    out: W,
}

impl<W: Write> CsvObserver<W> {
    pub fn new(mut out: W) -> Result<Self> {
        writeln!(out, "{CSV_HEADER}")?;
        Ok(CsvObserver { out })
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

impl<W: Write> RunObserver for CsvObserver<W> {
    fn record(&mut self, rec: &DiagnosticsRecord) -> Result<()> {
        writeln!(self.out, "{}", rec.csv_row())?;
        Ok(())
    }
}

/// Relative residual above which a run refuses to start.
pub const START_TOLERANCE: f64 = 1e-8;

/// Steps from `state0` to `t_end`, recording diagnostics after every step.
/// The last step is shortened so that the run lands on `t_end`.
pub fn run(
    state0: &FieldState,
    model: &ModelSpec,
    grid: &SpectralGrid,
    cfg: &IntegratorConfig,
    t_end: f64,
    observer: &mut dyn RunObserver,
) -> Result<RunResult> {
    cfg.validate()?;
    let first = diagnostics(state0, model, grid, 0)?;
    let rel = first.constraint_l2 / (1.0 + first.norms.e_h1);
    if rel > START_TOLERANCE {
        return Err(Error::InitialData(format!("initial constraint residual {rel:.3e} exceeds {START_TOLERANCE:e}")));
    }
    observer.record(&first)?;
    observer.state(0, state0)?;
    let norm0 = first.norms.composite;
    let threshold = cfg.blowup_factor * norm0.max(f64::MIN_POSITIVE);
    let mut records = vec![first];
    let mut traj = vec![(state0.time, norm0)];
    let mut state = state0.clone();
    let span = t_end - state0.time;
    let steps = if span > 0.0 { (span / cfg.dt - 1e-9).ceil() as usize } else { 0 };
    let mut outcome = Outcome::Completed;
    for n in 1..=steps {
        let t_next = if n == steps { t_end } else { state0.time + n as f64 * cfg.dt };
        let h = t_next - state.time;
        let step_cfg = IntegratorConfig { dt: h, ..*cfg };
        let out = match step(&state, model, grid, &step_cfg) {
            Ok(o) => o,
            Err(Error::NonFinite { quantity, point }) => {
                outcome = Outcome::BlowUp { t_max: state.time, reason: format!("non-finite {quantity} at grid point {point}") };
                break;
            }
            Err(e) => return Err(e),
        };
        let mut next = out.state;
        next.time = t_next;
        if !next.is_finite() {
            outcome = Outcome::BlowUp { t_max: next.time, reason: "non-finite state".into() };
            break;
        }
        let norm = state_norm(&next, grid);
        traj.push((next.time, norm));
        if !norm.is_finite() || norm > threshold {
            info!("blow-up detected at t = {} (norm {norm:.3e})", next.time);
            outcome = Outcome::BlowUp { t_max: next.time, reason: format!("‖u‖ = {norm:.3e} exceeds {threshold:.3e}") };
            state = next;
            break;
        }
        let rec = match diagnostics(&next, model, grid, out.picard_iterations) {
            Ok(r) => r,
            Err(Error::NonFinite { quantity, point }) => {
                outcome = Outcome::BlowUp { t_max: next.time, reason: format!("non-finite {quantity} at grid point {point}") };
                state = next;
                break;
            }
            Err(e) => return Err(e),
        };
        debug!("t = {:.6} norm = {:.6e} constraint = {:.3e}", rec.t, rec.norms.composite, rec.constraint_l2);
        observer.record(&rec)?;
        observer.state(n, &next)?;
        records.push(rec);
        state = next;
    }
    let times: Vec<f64> = records.iter().map(|r| r.t).collect();
    let cons: Vec<f64> = records.iter().map(|r| r.constraint_l2).collect();
    let eh1: Vec<f64> = records.iter().map(|r| r.norms.e_h1).collect();
    Ok(RunResult { outcome, final_state: state, records, norm_trajectory: traj, decay_constant: fit_decay_constant(&times, &cons, &eh1) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::{make_initial_data, random_state, InitConfig};
    use std::f64::consts::PI;

    fn grid() -> SpectralGrid {
        SpectralGrid::new(8, 2.0 * PI).unwrap()
    }

    #[test]
    fn vacuum_stays_vacuum() {
        let g = grid();
        let s = FieldState::zeros(1, 1, g.len());
        for scheme in [Scheme::EtdRk2, Scheme::PicardDuhamel] {
            let cfg = IntegratorConfig { scheme, dt: 0.1, ..Default::default() };
            let out = step(&s, &ModelSpec::abelian_higgs(), &g, &cfg).unwrap();
            assert!(out.state.is_zero());
        }
    }

    #[test]
    fn zero_nonlinearity_matches_propagator_bitwise() {
        let g = grid();
        let s = random_state(1, 1, &g, &InitConfig { seed: 1, amplitude: 0.5, band: 2 });
        let zero = |u: &FieldState| Ok(FieldState::zeros(u.n_v(), u.n_c(), u.len()));
        for scheme in [Scheme::EtdRk2, Scheme::PicardDuhamel] {
            let cfg = IntegratorConfig { scheme, dt: 0.05, ..Default::default() };
            let out = step_with(&s, &ModelSpec::free(1, 1), &g, &cfg, zero).unwrap();
            assert_eq!(out.state, linear_propagate(&s, 0.05, &g));
        }
    }

    #[test]
    fn rejects_bad_config() {
        assert!(IntegratorConfig { dt: -1e-3, ..Default::default() }.validate().is_err());
        assert!(IntegratorConfig { blowup_factor: 0.5, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn picard_reports_non_contraction() {
        let g = grid();
        let (s, _) = make_initial_data(&ModelSpec::abelian_higgs(), &g, &InitConfig { seed: 2, amplitude: 0.3, band: 2 }).unwrap();
        let cfg = IntegratorConfig { scheme: Scheme::PicardDuhamel, dt: 0.05, picard_max_iter: 1, picard_tol: 1e-15, ..Default::default() };
        assert!(matches!(step(&s, &ModelSpec::abelian_higgs(), &g, &cfg), Err(Error::StepSize { .. })));
    }

    #[test]
    fn csv_row_roundtrip() {
        let g = grid();
        let (s, _) = make_initial_data(&ModelSpec::abelian_higgs(), &g, &InitConfig { seed: 2, amplitude: 0.3, band: 2 }).unwrap();
        let rec = diagnostics(&s, &ModelSpec::abelian_higgs(), &g, 3).unwrap();
        assert_eq!(DiagnosticsRecord::parse_csv_row(&rec.csv_row()).unwrap(), rec);
        assert_eq!(CSV_HEADER.split(',').count(), 14);
    }

    #[test]
    fn run_lands_on_end_time() {
        let g = grid();
        let model = ModelSpec::abelian_higgs();
        let (s, _) = make_initial_data(&model, &g, &InitConfig { seed: 2, amplitude: 0.1, band: 2 }).unwrap();
        let cfg = IntegratorConfig { dt: 0.03, ..Default::default() };
        let r = run(&s, &model, &g, &cfg, 0.1, &mut NoObserver).unwrap();
        assert_eq!(r.outcome, Outcome::Completed);
        assert_eq!(r.final_state.time, 0.1);
        assert_eq!(r.records.len(), 5);
    }
}
