//! Pointwise target-space data over the whole grid, computed once per evaluation.

use crate::error::{Error, Result};
use crate::gauge::{kinetic_split_with_gradient, KineticSplit};
use crate::kahler::{metric_at, MetricEval};
use crate::model::ModelSpec;
use crate::spectral::ComplexField;
use crate::C64;

pub struct GridGeometry {
    pub n_v: usize,
    pub n_c: usize,
    /// `None` for the flat target, where `g = δ` and `Γ = 0`.
    pub metric: Option<Vec<MetricEval>>,
    /// `x[(p*n_v + a)*n_c + i] = X^i_a`.
    pub x: Vec<C64>,
    pub kin: KineticSplit,
}

impl GridGeometry {
    pub fn new(model: &ModelSpec, phi: &[ComplexField], dphi: &[[ComplexField; 3]], len: usize) -> Result<Self> {
        let (nv, nc) = (model.n_v(), model.n_c());
        let kin = kinetic_split_with_gradient(&model.kinetic, phi, dphi, len)?;
        let mut point = vec![C64::new(0.0, 0.0); nc];
        let flat = model.kahler.is_flat();
        let mut metric = if flat { None } else { Some(Vec::with_capacity(len)) };
        let gauged = model.killing.is_gauged();
        let mut x = vec![C64::new(0.0, 0.0); len * nv * nc];
        for p in 0..len {
            for i in 0..nc {
                point[i] = phi[i][p];
                if !point[i].is_finite() {
                    return Err(Error::NonFinite { quantity: "φ", point: p });
                }
            }
            if let Some(m) = metric.as_mut() {
                m.push(metric_at(&model.kahler, &point)?);
            }
            if gauged {
                x[p * nv * nc..(p + 1) * nv * nc].copy_from_slice(&model.killing.killing_vectors(&point));
            }
        }
        Ok(GridGeometry { n_v: nv, n_c: nc, metric, x, kin })
    }

    pub fn is_flat(&self) -> bool {
        self.metric.is_none()
    }

    #[inline]
    pub fn g(&self, p: usize, k: usize, l: usize) -> C64 {
        match &self.metric {
            Some(m) => m[p].g(k, l),
            None => C64::new(if k == l { 1.0 } else { 0.0 }, 0.0),
        }
    }

    #[inline]
    pub fn g_inv(&self, p: usize, i: usize, j: usize) -> C64 {
        match &self.metric {
            Some(m) => m[p].g_inv(i, j),
            None => C64::new(if i == j { 1.0 } else { 0.0 }, 0.0),
        }
    }

    #[inline]
    pub fn gamma(&self, p: usize, i: usize, k: usize, l: usize) -> C64 {
        match &self.metric {
            Some(m) => m[p].gamma(i, k, l),
            None => C64::new(0.0, 0.0),
        }
    }

    #[inline]
    pub fn x(&self, p: usize, a: usize, i: usize) -> C64 {
        self.x[(p * self.n_v + a) * self.n_c + i]
    }

    /// `Re(g_{ij̄} v^i conj(w^j))` at point `p`.
    pub fn re_inner(&self, p: usize, v: &[C64], w: &[C64]) -> f64 {
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..self.n_c {
            for j in 0..self.n_c {
                acc += self.g(p, i, j) * v[i] * w[j].conj();
            }
        }
        acc.re
    }
}
