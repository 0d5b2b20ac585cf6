//! Empirical Lipschitz constants of `J` on balls of the state space.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dynamics::assemble_j;
use crate::error::{Error, Result};
use crate::model::ModelSpec;
use crate::spectral::SpectralGrid;
use crate::state::{random_state, state_norm, FieldState, InitConfig};

/// Largest observed `‖J(u) − J(v)‖ / ‖u − v‖_ℋ` per row, with the `A` row
/// measured in `H₂` and the `E`, `π` rows in `H₁`.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbeReport {
    pub radius: f64,
    pub pairs: usize,
    pub j1: f64,
    pub j2: f64,
    pub j4: f64,
    pub finite: bool,
}

impl ProbeReport {
    pub fn rows(&self) -> [f64; 3] {
        [self.j1, self.j2, self.j4]
    }
}

fn unit_state(model: &ModelSpec, grid: &SpectralGrid, rng: &mut ChaCha8Rng) -> FieldState {
    let band = (grid.n() / 3).clamp(1, 2);
    let s = random_state(model.n_v(), model.n_c(), grid, &InitConfig { seed: rng.random(), amplitude: 1.0, band });
    let n = state_norm(&s, grid);
    s.scaled(1.0 / n)
}

fn row_norms(ju: &FieldState, jv: &FieldState, grid: &SpectralGrid) -> [f64; 3] {
    let d = ju.difference(jv);
    let sq = |fields: &[[Vec<f64>; 3]], p: u32| -> f64 {
        fields.iter().flat_map(|v| v.iter()).map(|f| grid.sobolev_norm_r(f, p).powi(2)).sum()
    };
    let j4: f64 = d.pi.iter().map(|f| 2.0 * grid.sobolev_norm_c(f, 1).powi(2)).sum();
    [sq(&d.a, 2).sqrt(), sq(&d.e, 1).sqrt(), j4.sqrt()]
}

/// Samples `pairs` state pairs inside the ball of radius `ball_radius`: half
/// are independent points, half are nearby perturbations of a point.
pub fn lipschitz_probe_j(model: &ModelSpec, grid: &SpectralGrid, ball_radius: f64, pairs: usize, seed: u64) -> Result<ProbeReport> {
    if pairs == 0 || !(ball_radius > 0.0) {
        return Err(Error::Config("Lipschitz probe needs a positive radius and at least one pair".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = ProbeReport { radius: ball_radius, pairs, j1: 0.0, j2: 0.0, j4: 0.0, finite: true };
    for k in 0..pairs {
        let u = unit_state(model, grid, &mut rng).scaled(ball_radius * rng.random_range(0.5..1.0));
        let v = if k % 2 == 0 {
            unit_state(model, grid, &mut rng).scaled(ball_radius * rng.random_range(0.0..1.0))
        } else {
            let mut v = u.clone();
            v.add_scaled(1e-3 * ball_radius, &unit_state(model, grid, &mut rng));
            v
        };
        let dist = state_norm(&u.difference(&v), grid);
        let ju = assemble_j(&u, model, grid)?.as_state(0.0);
        let jv = assemble_j(&v, model, grid)?.as_state(0.0);
        let r = row_norms(&ju, &jv, grid).map(|x| x / dist);
        out.finite &= r.iter().all(|x| x.is_finite());
        out.j1 = out.j1.max(r[0]);
        out.j2 = out.j2.max(r[1]);
        out.j4 = out.j4.max(r[2]);
    }
    Ok(out)
}

/// Slack allowed on top of the polynomial growth factor between radii.
pub const ENVELOPE_SLACK: f64 = 1.25;

#[derive(Clone, Debug, PartialEq)]
pub struct EnvelopeReport {
    /// Polynomial degree of the nonlinearity; ratios may grow like `R^{degree−1}`.
    pub degree: u32,
    /// `[J₁, J₂, J₄]` growth factor between each consecutive pair of radii.
    pub growth: Vec<[f64; 3]>,
    /// Allowed factor for each consecutive pair.
    pub limits: Vec<f64>,
    /// Least-squares log-log slope of each row over all radii.
    pub fitted_slopes: [f64; 3],
    pub holds: bool,
}

/// Checks that the probed ratios grow no faster than `(R₂/R₁)^{degree−1}`
/// up to [`ENVELOPE_SLACK`]. Rows that vanish identically are skipped.
pub fn check_envelope(reports: &[ProbeReport], degree: u32) -> EnvelopeReport {
    let mut growth = Vec::new();
    let mut limits = Vec::new();
    let mut holds = reports.iter().all(|r| r.finite);
    for w in reports.windows(2) {
        let (lo, hi) = (w[0].rows(), w[1].rows());
        let g = [0, 1, 2].map(|i| if lo[i] > 0.0 { hi[i] / lo[i] } else if hi[i] == 0.0 { 1.0 } else { f64::INFINITY });
        let limit = (w[1].radius / w[0].radius).powi(degree as i32 - 1) * ENVELOPE_SLACK;
        holds &= g.iter().all(|x| *x <= limit);
        growth.push(g);
        limits.push(limit);
    }
    let fitted_slopes = [0, 1, 2].map(|i| {
        let pts: Vec<(f64, f64)> =
            reports.iter().filter(|r| r.rows()[i] > 0.0).map(|r| (r.radius.ln(), r.rows()[i].ln())).collect();
        if pts.len() < 2 {
            return 0.0;
        }
        let m = pts.len() as f64;
        let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), p| (a + p.0, b + p.1));
        let (mx, my) = (sx / m, sy / m);
        let num: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let den: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        num / den
    });
    EnvelopeReport { degree, growth, limits, fitted_slopes, holds }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn free_theory_has_zero_constants() {
        let g = SpectralGrid::new(8, 2.0 * PI).unwrap();
        let r = lipschitz_probe_j(&ModelSpec::free(1, 1), &g, 1.0, 4, 3).unwrap();
        assert_eq!(r.rows(), [0.0, 0.0, 0.0]);
        assert!(r.finite);
    }

    #[test]
    fn abelian_higgs_ratios_grow_polynomially() {
        let g = SpectralGrid::new(8, 2.0 * PI).unwrap();
        let model = ModelSpec::abelian_higgs();
        let reps: Vec<_> = [1.0, 2.0, 4.0].iter().map(|&r| lipschitz_probe_j(&model, &g, r, 6, 5).unwrap()).collect();
        let env = check_envelope(&reps, 3);
        assert!(env.holds, "{env:?}");
        assert!(reps[0].j4 > 0.0);
    }

    #[test]
    fn envelope_flags_fast_growth() {
        let mk = |radius: f64, v: f64| ProbeReport { radius, pairs: 1, j1: v, j2: v, j4: v, finite: true };
        assert!(!check_envelope(&[mk(1.0, 1.0), mk(2.0, 10.0)], 3).holds);
        assert!(check_envelope(&[mk(1.0, 1.0), mk(2.0, 4.0)], 3).holds);
    }
}
